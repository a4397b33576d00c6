//! Zeroth-order Bessel function of the first kind.

use std::f64::consts::PI;

/// Arguments up to this magnitude use the power series.
const SERIES_LIMIT: f64 = 12.0;

/// `J0(x)`.
///
/// Power series for `|x| <= 12`; beyond that the integral
/// `(1/π) ∫₀^π cos(x sin θ) dθ` is evaluated with the trapezoidal rule. The
/// integrand is smooth and π-periodic, so an `M`-point rule only differs from
/// the integral by `2 Σ_k J_{2kM}(x)`, which is below double precision once
/// `2M` comfortably exceeds `|x|`.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(x)
    } else {
        periodic_trapezoid(x)
    }
}

fn series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn periodic_trapezoid(x: f64) -> f64 {
    let points = x.ceil() as usize + 32;
    let step = PI / points as f64;
    let sum: f64 = (0..points).map(|i| (x * (step * i as f64).sin()).cos()).sum();
    sum / points as f64
}

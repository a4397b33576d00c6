//! Hermitian quadratic-form kernels of the received waveform statistics.
//!
//! Every kernel lives on a [`Window`] of the global sample grid. For a
//! receive waveform `ψ` supported on that window, `ψᴴ K ψ` is a mean
//! received power: `KS` for the wanted symbol, `KI` for all other
//! lattice symbols and `KIN` adds the noise floor.

use faer::Mat;

use crate::channel::ScatteringSpec;
use crate::lattice::{modulated_shift, unit_phase, LatticeConfig, SampledWaveform, ShiftClass};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Contiguous range of global sample indices `[start, start + size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub size: usize,
}

impl Window {
    pub fn new(start: i64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Window("window size must be positive".into()));
        }
        Ok(Self { start, size })
    }

    /// The window covering the support of `w`.
    pub fn of(w: &SampledWaveform) -> Self {
        Self { start: w.start(), size: w.len() }
    }

    pub fn end(&self) -> i64 {
        self.start + self.size as i64
    }

    pub fn overlaps(&self, start: i64, len: usize) -> bool {
        start < self.end() && start + len as i64 > self.start
    }
}

/// Square Hermitian matrix whose row/column 0 sits at global sample `window_start`.
#[derive(Debug, Clone)]
pub struct HermitianKernel {
    entries: Mat<C64>,
    window_start: i64,
}

impl HermitianKernel {
    /// Wraps `entries`, replacing them by `(A + Aᴴ)/2`.
    pub fn new(entries: Mat<C64>, window_start: i64) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::Kernel(format!(
                "kernel must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        let sym = Mat::from_fn(n, n, |i, j| (entries[(i, j)] + entries[(j, i)].conj()) * 0.5);
        Ok(Self { entries: sym, window_start })
    }

    /// Builds from `f(i, j)`, evaluated on the lower triangle and mirrored.
    pub fn from_fn(size: usize, window_start: i64, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Mat::<C64>::zeros(size, size);
        for j in 0..size {
            m[(j, j)] = C64::new(f(j, j).re, 0.0);
            for i in j + 1..size {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        Self { entries: m, window_start }
    }

    pub fn zeros(window: Window) -> Self {
        Self { entries: Mat::zeros(window.size, window.size), window_start: window.start }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn window_start(&self) -> i64 {
        self.window_start
    }

    pub fn window(&self) -> Window {
        Window { start: self.window_start, size: self.size() }
    }

    pub fn entries(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    /// `xᴴ K x` for a vector indexed like the window.
    pub fn quadratic_form_slice(&self, x: &[C64]) -> f64 {
        assert_eq!(x.len(), self.size(), "vector length must match kernel size");
        let n = self.size();
        let mut acc = 0.0;
        for j in 0..n {
            if x[j] == ZERO {
                continue;
            }
            let mut col = ZERO;
            for i in 0..n {
                col += x[i].conj() * self.entries[(i, j)];
            }
            acc += (col * x[j]).re;
        }
        acc
    }

    /// `wᴴ K w` with `w` placed on the global grid; samples outside the
    /// window are ignored.
    pub fn quadratic_form(&self, w: &SampledWaveform) -> f64 {
        let x: Vec<C64> = (0..self.size()).map(|i| w.at(self.window_start + i as i64)).collect();
        self.quadratic_form_slice(&x)
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.size();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.entries[(i, j)].norm());
            }
        }
        m
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        let n = self.size();
        (0..n).all(|j| (0..n).all(|i| self.entries[(i, j)].im == 0.0))
    }

    pub fn max_abs_diff(&self, other: &HermitianKernel) -> f64 {
        assert_eq!(self.window(), other.window(), "kernels live on different windows");
        let n = self.size();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        m
    }

    pub fn plus_identity(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.size() {
            out.entries[(i, i)].re += shift;
        }
        out
    }

    pub fn minus(&self, other: &HermitianKernel) -> Result<Self> {
        if self.window() != other.window() {
            return Err(Error::Kernel("cannot subtract kernels on different windows".into()));
        }
        let n = self.size();
        Ok(Self::from_fn(n, self.window_start, |i, j| self.entries[(i, j)] - other.entries[(i, j)]))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        let n = out.size();
        for j in 0..n {
            for i in 0..n {
                out.entries[(i, j)] *= factor;
            }
        }
        out
    }

    /// Entrywise product with a real, symmetric lag function.
    fn masked_by_lag(&self, f: impl Fn(i64) -> f64) -> Self {
        let n = self.size();
        Self::from_fn(n, self.window_start, |i, j| self.entries[(i, j)] * f(i as i64 - j as i64))
    }
}

/// Signal-to-noise ratio `E_s/N_0` of a quotient: finite linear or infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Finite(f64),
    Infinite,
}

impl Snr {
    pub fn from_db(db: f64) -> Self {
        if db == f64::INFINITY {
            Snr::Infinite
        } else {
            Snr::Finite(crate::from_db(db))
        }
    }

    pub fn to_db(self) -> f64 {
        match self {
            Snr::Finite(s) => crate::to_db(s),
            Snr::Infinite => f64::INFINITY,
        }
    }

    /// `1/snr`, zero when infinite.
    pub fn inverse(self) -> f64 {
        match self {
            Snr::Finite(s) => 1.0 / s,
            Snr::Infinite => 0.0,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Snr::Finite(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::InvalidArgument(format!("snr must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Value of a shift-class comb `Σ_j e^{j2π(first + step·j)·lag/Q}`, `j < Q/step`.
pub fn comb_value(class: &ShiftClass, subcarriers: usize, lag: i64) -> f64 {
    let q = subcarriers as i64;
    let step = class.subcarrier_step as i64;
    let count = q / step;
    if (lag * step).rem_euclid(q) != 0 {
        return 0.0;
    }
    (unit_phase(class.first_subcarrier as i64 * lag, subcarriers) * count as f64).re
}

fn check_even(subcarriers: usize) -> Result<()> {
    if subcarriers == 0 || subcarriers % 2 != 0 {
        return Err(Error::InvalidArgument(format!("comb needs an even Q, got {subcarriers}")));
    }
    Ok(())
}

/// Even-subcarrier comb `(Q/2)·[lag ≡ 0 mod Q/2]` applied entrywise to `corr`.
pub fn comb_even(subcarriers: usize, corr: &HermitianKernel) -> Result<HermitianKernel> {
    check_even(subcarriers)?;
    let class = ShiftClass { offset: 0, first_subcarrier: 0, subcarrier_step: 2 };
    Ok(corr.masked_by_lag(|lag| comb_value(&class, subcarriers, lag)))
}

/// Odd-subcarrier comb, `+Q/2` at `lag ≡ 0 mod Q` and `-Q/2` at
/// `lag ≡ Q/2 mod Q`, applied entrywise to `corr`.
pub fn comb_odd(subcarriers: usize, corr: &HermitianKernel) -> Result<HermitianKernel> {
    check_even(subcarriers)?;
    let class = ShiftClass { offset: 0, first_subcarrier: 1, subcarrier_step: 2 };
    Ok(corr.masked_by_lag(|lag| comb_value(&class, subcarriers, lag)))
}

/// All-subcarrier comb `Q·[lag ≡ 0 mod Q]` applied entrywise to `corr`.
pub fn comb_full(subcarriers: usize, corr: &HermitianKernel) -> Result<HermitianKernel> {
    if subcarriers == 0 {
        return Err(Error::InvalidArgument("Q must be positive".into()));
    }
    let class = ShiftClass { offset: 0, first_subcarrier: 0, subcarrier_step: 1 };
    Ok(corr.masked_by_lag(|lag| comb_value(&class, subcarriers, lag)))
}

/// Channel time correlation `Π'` on `window`, including Doppler lines and
/// the frequency offset.
pub fn correlation_matrix(spec: &ScatteringSpec, ts: f64, window: Window) -> HermitianKernel {
    let lags = lag_correlations(spec, ts, window.size);
    HermitianKernel::from_fn(window.size, window.start, |i, j| lags[i - j])
}

fn lag_correlations(spec: &ScatteringSpec, ts: f64, size: usize) -> Vec<C64> {
    (0..size as i64).map(|lag| spec.correlation(ts, lag)).collect()
}

fn check_inputs(w: &SampledWaveform, spec: &ScatteringSpec, window: Window) -> Result<()> {
    if window.size == 0 {
        return Err(Error::Window("window size must be positive".into()));
    }
    if w.norm_sq() == 0.0 {
        return Err(Error::InvalidArgument("kernel waveform has zero norm".into()));
    }
    spec.validate(w.ts())?;
    Ok(())
}

/// Mean outer product of the wanted symbol after the channel:
/// `KS = Π' ⊙ Σ_k π_k σ_{p_k}(w) σ_{p_k}(w)ᴴ` on `window`.
pub fn useful_kernel(w: &SampledWaveform, spec: &ScatteringSpec, window: Window) -> Result<HermitianKernel> {
    check_inputs(w, spec, window)?;
    let lags = lag_correlations(spec, w.ts(), window.size);
    let paths: Vec<_> = spec.effective_paths().filter(|p| p.power > 0.0).collect();
    let n = window.size;
    let mut acc = Mat::<C64>::zeros(n, n);
    for path in &paths {
        // rows of the window covered by this delayed copy
        let lo = (w.start() + path.delay - window.start).max(0) as usize;
        let hi = (w.end() + path.delay - window.start).min(n as i64);
        if hi <= lo as i64 {
            continue;
        }
        let hi = hi as usize;
        let seg: Vec<C64> = (lo..hi)
            .map(|i| w.at(window.start + i as i64 - path.delay))
            .collect();
        for j in lo..hi {
            let bj = seg[j - lo].conj() * path.power;
            for i in j..hi {
                acc[(i, j)] += seg[i - lo] * bj;
            }
        }
    }
    Ok(HermitianKernel::from_fn(n, window.start, |i, j| acc[(i, j)] * lags[i - j]))
}

/// Range of `n` for which a copy of `w` shifted by `offset + n·N` meets `window`.
fn overlap_range(w: &SampledWaveform, offset: i64, period: i64, window: Window) -> (i64, i64) {
    // need start + offset + nN < window.end and start + offset + nN + len > window.start
    let lo = (window.start - w.start() - offset - w.len() as i64).div_euclid(period) + 1;
    let hi = (window.end() - w.start() - offset - 1).div_euclid(period);
    (lo, hi)
}

/// Lattice sum of all symbols, wanted one included, evaluated through the
/// comb factorization of the subcarrier sum.
pub fn infinite_kernel(
    w: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    window: Window,
) -> Result<HermitianKernel> {
    infinite_kernel_with_margin(w, spec, cfg, window, 0)
}

/// [`infinite_kernel`] with the symbol-index range widened by `margin` on
/// both sides. Added copies lie outside the window and contribute nothing.
pub fn infinite_kernel_with_margin(
    w: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    window: Window,
    margin: i64,
) -> Result<HermitianKernel> {
    check_inputs(w, spec, window)?;
    if (w.ts() - cfg.ts()).abs() > 1e-15 * cfg.ts() {
        return Err(Error::InvalidArgument("waveform and lattice sampling periods differ".into()));
    }
    let q = cfg.subcarriers();
    let period = cfg.samples_per_symbol() as i64;
    let classes = cfg.geometry().shift_classes(q, cfg.samples_per_symbol());
    let lag_step = classes
        .iter()
        .map(|c| q / c.subcarrier_step)
        .min()
        .expect("geometry has at least one shift class");
    let lags = lag_correlations(spec, w.ts(), window.size);

    // (offset, power, n range) per class and path
    struct Copy {
        class: usize,
        offset: i64,
        power: f64,
        n_lo: i64,
        n_hi: i64,
    }
    let mut copies = Vec::new();
    for (ci, class) in classes.iter().enumerate() {
        for path in spec.effective_paths().filter(|p| p.power > 0.0) {
            let offset = class.offset + path.delay;
            let (lo, hi) = overlap_range(w, offset, period, window);
            copies.push(Copy { class: ci, offset, power: path.power, n_lo: lo - margin, n_hi: hi + margin });
        }
    }

    let wstart = w.start();
    let wlen = w.len() as i64;
    let n = window.size;
    let mut m = Mat::<C64>::zeros(n, n);
    let mut class_acc = vec![ZERO; classes.len()];
    for j in 0..n {
        let gb = window.start + j as i64;
        let mut i = j;
        while i < n {
            let lag = (i - j) as i64;
            let ga = window.start + i as i64;
            class_acc.iter_mut().for_each(|c| *c = ZERO);
            for copy in &copies {
                // n with both ga - offset - nN and gb - offset - nN inside the support
                let top = (gb - copy.offset - wstart).div_euclid(period);
                let bottom = (ga - copy.offset - wstart - wlen).div_euclid(period) + 1;
                let n_lo = bottom.max(copy.n_lo);
                let n_hi = top.min(copy.n_hi);
                let mut sum = ZERO;
                for nn in n_lo..=n_hi {
                    let shift = copy.offset + nn * period;
                    sum += w.at(ga - shift) * w.at(gb - shift).conj();
                }
                class_acc[copy.class] += sum * copy.power;
            }
            let mut v = ZERO;
            for (class, acc) in classes.iter().zip(&class_acc) {
                let c = comb_value(class, q, lag);
                if c != 0.0 {
                    v += *acc * c;
                }
            }
            m[(i, j)] = v * lags[i - j];
            i += lag_step;
        }
    }
    Ok(HermitianKernel::from_fn(n, window.start, |i, j| m[(i, j)]))
}

/// Direct sum over lattice points `m ∈ 0..Q`, `n ∈ n_range` (inclusive) of
/// the mean outer products of the channel-distorted modulated copies,
/// wanted symbol included. Shares no comb identities with [`infinite_kernel`].
pub fn brute_force_total_kernel(
    w: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    window: Window,
    n_range: (i64, i64),
) -> HermitianKernel {
    brute_force_kernel_over(w, spec, cfg, window, (0..cfg.subcarriers() as i64).flat_map(|m| {
        (n_range.0..=n_range.1).map(move |n| (m, n))
    }))
}

/// Direct sum of the mean outer products over an explicit list of lattice points.
pub fn brute_force_kernel_over(
    w: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    window: Window,
    points: impl IntoIterator<Item = (i64, i64)>,
) -> HermitianKernel {
    let n = window.size;
    let mut acc = Mat::<C64>::zeros(n, n);
    let paths: Vec<_> = spec.effective_paths().collect();
    for (m, nn) in points {
        let shifted = modulated_shift(w, cfg, m, nn);
        for path in &paths {
            let x: Vec<C64> = (0..n).map(|i| shifted.at(window.start + i as i64 - path.delay)).collect();
            for j in 0..n {
                if x[j] == ZERO {
                    continue;
                }
                let bj = x[j].conj() * path.power;
                for i in 0..n {
                    acc[(i, j)] += x[i] * bj;
                }
            }
        }
    }
    let lags: Vec<C64> = (-(n as i64) + 1..n as i64).map(|lag| spec.correlation(w.ts(), lag)).collect();
    let mid = n - 1;
    let full = Mat::from_fn(n, n, |i, j| acc[(i, j)] * lags[mid + i - j]);
    HermitianKernel::new(full, window.start).expect("square nonempty matrix")
}

/// `KI = ∞K - KS`: mean interference power kernel of all other lattice symbols.
pub fn interference_kernel(
    w: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    window: Window,
) -> Result<HermitianKernel> {
    let total = infinite_kernel(w, spec, cfg, window)?;
    let useful = useful_kernel(w, spec, window)?;
    total.minus(&useful)
}

/// `KIN = KI + snr⁻¹ ‖φ‖² I`, where `other_norm_sq` is `‖φ‖²` of the fixed waveform.
pub fn kin_kernel(ki: &HermitianKernel, snr: Snr, other_norm_sq: f64) -> Result<HermitianKernel> {
    snr.validate()?;
    if !(other_norm_sq > 0.0) {
        return Err(Error::InvalidArgument("waveform energy must be positive".into()));
    }
    Ok(match snr {
        Snr::Infinite => ki.clone(),
        Snr::Finite(s) => ki.plus_identity(other_norm_sq / s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{exponential_profile, reverse, DelayProfile, DopplerLine, DopplerSpectrum};
    use crate::lattice::LatticeKind;
    use faer::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_waveform(rng: &mut ChaCha8Rng, len: usize, start: i64) -> SampledWaveform {
        let s = (0..len).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        SampledWaveform::new(s, 1.0, start).unwrap()
    }

    fn min_eig(k: &HermitianKernel) -> f64 {
        let e = k.entries().self_adjoint_eigen(Side::Lower).unwrap();
        e.S().column_vector()[0].re
    }

    fn dispersive_spec(fd_ts: f64) -> ScatteringSpec {
        ScatteringSpec::new(exponential_profile(4, 0.5).unwrap(), DopplerSpectrum::Jakes { max_doppler: fd_ts })
    }

    #[test]
    fn comb_examples() {
        let ones = HermitianKernel::from_fn(5, 0, |_, _| C64::new(1.0, 0.0));
        let even = comb_even(4, &ones).unwrap();
        let odd = comb_odd(4, &ones).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let lag = i as i64 - j as i64;
                let e = if lag % 2 == 0 { 2.0 } else { 0.0 };
                assert_eq!(even.get(i, j), C64::new(e, 0.0));
                let o = match lag.rem_euclid(4) {
                    0 => 2.0,
                    2 => -2.0,
                    _ => 0.0,
                };
                assert_eq!(odd.get(i, j), C64::new(o, 0.0));
            }
        }
        assert!(comb_even(3, &ones).is_err());
        assert!(comb_odd(5, &ones).is_err());
    }

    #[test]
    fn combs_match_geometric_series() {
        let q = 8usize;
        let ones = HermitianKernel::from_fn(17, 0, |_, _| C64::new(1.0, 0.0));
        let even = comb_even(q, &ones).unwrap();
        let odd = comb_odd(q, &ones).unwrap();
        let full = comb_full(q, &ones).unwrap();
        for i in 0..17usize {
            let k = i as i64 - 8;
            let direct = |first: i64, step: i64, count: i64| -> C64 {
                (0..count)
                    .map(|d| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((first + step * d) * k) as f64 / q as f64))
                    .sum()
            };
            let (a, b) = if k >= 0 { (i, 8) } else { (8, (8 - k) as usize) };
            assert!((even.get(a, b) - direct(0, 2, 4)).norm() < 1e-12, "even k={k}");
            assert!((odd.get(a, b) - direct(1, 2, 4)).norm() < 1e-12, "odd k={k}");
            assert!((full.get(a, b) - direct(0, 1, 8)).norm() < 1e-12, "full k={k}");
            let sum = even.get(a, b) + odd.get(a, b);
            assert_eq!(sum, full.get(a, b));
        }
    }

    #[test]
    fn identity_channel_useful_kernel_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_waveform(&mut rng, 6, 3);
        let ks = useful_kernel(&w, &ScatteringSpec::identity(), Window::of(&w)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = w.samples()[i] * w.samples()[j].conj();
                let expect = if i == j { C64::new(expect.re, 0.0) } else { expect };
                assert_eq!(ks.get(i, j), expect);
            }
        }
    }

    #[test]
    fn useful_trace_is_windowed_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_waveform(&mut rng, 10, 0);
        let spec = dispersive_spec(0.01);
        let window = Window::new(2, 9).unwrap();
        let ks = useful_kernel(&w, &spec, window).unwrap();
        let mut expect = 0.0;
        for p in spec.effective_paths() {
            for g in window.start..window.end() {
                expect += p.power * w.at(g - p.delay).norm_sqr();
            }
        }
        assert!((ks.trace() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn disjoint_window_gives_zero_useful_kernel() {
        let w = SampledWaveform::from_real(&[1.0, 1.0], 1.0, 0).unwrap();
        let ks = useful_kernel(&w, &ScatteringSpec::identity(), Window::new(10, 3).unwrap()).unwrap();
        assert_eq!(ks.max_abs(), 0.0);
    }

    #[test]
    fn infinite_kernel_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [LatticeKind::Hexagonal, LatticeKind::Rectangular] {
            let cfg = LatticeConfig::new(kind, 8, 10, 1.0).unwrap();
            let w = random_waveform(&mut rng, 30, 0);
            let spec = dispersive_spec(0.02);
            let window = Window::new(2, 30).unwrap();
            let fast = infinite_kernel(&w, &spec, &cfg, window).unwrap();
            let slow = brute_force_total_kernel(&w, &spec, &cfg, window, (-8, 8));
            assert!(fast.max_abs_diff(&slow) < 1e-10 * w.norm_sq(), "{kind}");
        }
    }

    #[test]
    fn margin_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 8, 10, 1.0).unwrap();
        let w = random_waveform(&mut rng, 20, -3);
        let window = Window::new(0, 20).unwrap();
        let spec = dispersive_spec(0.05);
        let a = infinite_kernel(&w, &spec, &cfg, window).unwrap();
        let b = infinite_kernel_with_margin(&w, &spec, &cfg, window, 5).unwrap();
        assert_eq!(a.max_abs_diff(&b), 0.0);
    }

    #[test]
    fn single_point_brute_force_is_useful_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 8, 10, 1.0).unwrap();
        let w = random_waveform(&mut rng, 12, 0);
        let spec = dispersive_spec(0.03);
        let window = Window::of(&w);
        let ks = useful_kernel(&w, &spec, window).unwrap();
        let bf = brute_force_kernel_over(&w, &spec, &cfg, window, [(0, 0)]);
        assert!(ks.max_abs_diff(&bf) < 1e-14);
    }

    #[test]
    fn cp_ofdm_is_interference_free_on_identity_channel() {
        let (q, cp) = (8usize, 2usize);
        let cfg = LatticeConfig::new(LatticeKind::Rectangular, q, q + cp, 1.0).unwrap();
        let phi = SampledWaveform::from_real(&vec![1.0; q + cp], 1.0, 0).unwrap();
        let psi = SampledWaveform::from_real(&vec![1.0; q], 1.0, cp as i64).unwrap();
        let ki = interference_kernel(&phi, &ScatteringSpec::identity(), &cfg, Window::of(&psi)).unwrap();
        assert!(ki.quadratic_form(&psi).abs() < 1e-12);
    }

    #[test]
    fn interference_kernel_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [LatticeKind::Hexagonal, LatticeKind::Rectangular] {
            let cfg = LatticeConfig::new(kind, 8, 10, 1.0).unwrap();
            let w = random_waveform(&mut rng, 30, 0);
            let ki = interference_kernel(&w, &dispersive_spec(0.02), &cfg, Window::new(1, 30).unwrap()).unwrap();
            assert!(min_eig(&ki) >= -1e-9 * ki.trace());
        }
    }

    #[test]
    fn kernels_are_quadratic_in_waveform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 8, 10, 1.0).unwrap();
        let w = random_waveform(&mut rng, 20, 0);
        let c = C64::new(0.3, -1.7);
        let window = Window::of(&w);
        let spec = dispersive_spec(0.02);
        let a = interference_kernel(&w, &spec, &cfg, window).unwrap().scaled(c.norm_sqr());
        let b = interference_kernel(&w.scaled(c), &spec, &cfg, window).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12 * a.max_abs());
    }

    #[test]
    fn duality_with_lines_and_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 8, 10, 1.0).unwrap();
        let profile = DelayProfile::new(vec![
            crate::channel::Path { delay: -1, power: 0.3 },
            crate::channel::Path { delay: 2, power: 0.7 },
        ])
        .unwrap();
        let mut spec = ScatteringSpec::new(
            profile,
            DopplerSpectrum::Lines(vec![
                DopplerLine { freq: 0.01, weight: 0.6 },
                DopplerLine { freq: -0.03, weight: 0.4 },
            ]),
        );
        spec.time_offset = 3;
        spec.freq_offset = 0.02;
        let phi = random_waveform(&mut rng, 20, 0);
        let psi = random_waveform(&mut rng, 20, 4);
        let back = reverse(&spec);
        let ks = useful_kernel(&phi, &spec, Window::of(&psi)).unwrap().quadratic_form(&psi);
        let ks_dual = useful_kernel(&psi, &back, Window::of(&phi)).unwrap().quadratic_form(&phi);
        assert!((ks - ks_dual).abs() < 1e-10 * ks.abs());
        let ki = interference_kernel(&phi, &spec, &cfg, Window::of(&psi)).unwrap().quadratic_form(&psi);
        let ki_dual = interference_kernel(&psi, &back, &cfg, Window::of(&phi)).unwrap().quadratic_form(&phi);
        assert!((ki - ki_dual).abs() < 1e-10 * ki.abs());
    }

    #[test]
    fn kin_examples() {
        let zero = HermitianKernel::zeros(Window::new(0, 3).unwrap());
        let kin = kin_kernel(&zero, Snr::Finite(10.0), 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 0.1 } else { 0.0 };
                assert!((kin.get(i, j).re - e).abs() < 1e-15);
            }
        }
        let same = kin_kernel(&zero, Snr::Infinite, 1.0).unwrap();
        assert_eq!(same.max_abs_diff(&zero), 0.0);
        assert!(kin_kernel(&zero, Snr::Finite(0.0), 1.0).is_err());
        assert!(kin_kernel(&zero, Snr::Finite(-1.0), 1.0).is_err());
    }

    #[test]
    fn kin_floor_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 12;
            let b = Mat::<C64>::from_fn(n, 5, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let ki = HermitianKernel::new(&b * b.adjoint(), 0).unwrap();
            let snr = 10f64.powf(rng.random::<f64>() * 3.0);
            let energy = 0.5 + rng.random::<f64>();
            let kin = kin_kernel(&ki, Snr::Finite(snr), energy).unwrap();
            assert!(min_eig(&kin) >= 0.99 * energy / snr);
        }
    }

    #[test]
    fn correlation_matrix_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let fd: f64 = rng.random::<f64>() * 0.49;
            let spec = ScatteringSpec::new(DelayProfile::single(0), DopplerSpectrum::Jakes { max_doppler: fd });
            let pi = correlation_matrix(&spec, 1.0, Window::new(0, 40).unwrap());
            assert!(min_eig(&pi) >= -1e-9 * 40.0);
        }
    }
}

//! Ping-pong maximization of the mean SINR of a transmit/receive pulse pair.
//!
//! The ping step fixes the transmit pulse `φ` and maximizes over the
//! receive pulse `ψ`; the pong step does the same for `φ` against the
//! time- and frequency-mirrored channel. Both steps maximize the same
//! objective, so the recorded trace never decreases.

pub mod quotient;

use rayon::prelude::*;

use crate::channel::{balanced_spec, reverse, ScatteringSpec};
use crate::kernels::{interference_kernel, useful_kernel, Snr, Window};
use crate::lattice::{LatticeConfig, SampledWaveform};
use crate::{to_db, Error, Result, C64};

pub use quotient::{default_solver, solver_by_name, solvers, QuotientProblem, QuotientSolution, QuotientSolver};

/// Relative noise floor used when the SNR is infinite.
const SIR_FLOOR: f64 = 1e-12;

/// Interference below this fraction of the useful power counts as none.
const INTERFERENCE_FREE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Gaussian,
    Custom(SampledWaveform),
}

#[derive(Debug, Clone)]
pub struct PopsConfig {
    pub snr: Snr,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init: Init,
    /// Half-range of the receive-window offset search; `None` means `N/2`.
    pub window_search: Option<i64>,
    /// Candidate path counts for the dispersion-balance search; `None` uses [`default_k_grid`].
    pub k_grid: Option<Vec<usize>>,
    pub solver: &'static dyn QuotientSolver,
}

impl Default for PopsConfig {
    fn default() -> Self {
        Self {
            snr: Snr::Infinite,
            epsilon: 1e-6,
            max_iters: 200,
            init: Init::Gaussian,
            window_search: None,
            k_grid: None,
            solver: default_solver(),
        }
    }
}

impl PopsConfig {
    pub fn with_snr(snr: Snr) -> Self {
        Self { snr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.snr.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if matches!(self.window_search, Some(h) if h < 0) {
            return Err(Error::InvalidArgument("window search half-range must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PopsResult {
    pub phi: SampledWaveform,
    pub psi: SampledWaveform,
    /// Objective in dB after every half-step (ping, pong, ping, ...).
    pub sinr_trace: Vec<f64>,
    /// Start of the receive window relative to the start of `φ`.
    pub window_offset: i64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest eigen-residual reported by the quotient solver.
    pub max_eig_residual: f64,
    /// SINR of the final pair without any regularization, in dB.
    pub final_sinr_db: f64,
}

impl PopsResult {
    pub fn final_objective_db(&self) -> f64 {
        *self.sinr_trace.last().expect("trace has at least one entry")
    }
}

/// Unit-norm sampled Gaussian `exp(-π ((q - c) Ts)² F/T)`, `c = (len - 1)/2`,
/// starting at global sample 0.
pub fn gaussian_init(length: usize, cfg: &LatticeConfig) -> Result<SampledWaveform> {
    if length == 0 {
        return Err(Error::InvalidArgument("waveform length must be positive".into()));
    }
    let c = (length as f64 - 1.0) / 2.0;
    let scale = cfg.subcarrier_spacing() / cfg.symbol_period() * cfg.ts() * cfg.ts();
    let samples: Vec<f64> = (0..length)
        .map(|q| {
            let t = q as f64 - c;
            (-std::f64::consts::PI * t * t * scale).exp()
        })
        .collect();
    SampledWaveform::from_real(&samples, cfg.ts(), 0)?.normalized()
}

/// Mean powers of the wanted symbol, the interference and the noise at the
/// output of `ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub useful: f64,
    pub interference: f64,
    pub noise: f64,
}

impl PowerBudget {
    /// SINR in dB; `+∞` when interference and noise both vanish, `-∞` when
    /// no wanted energy reaches the window.
    pub fn sinr_db(&self) -> f64 {
        if self.useful <= 0.0 {
            f64::NEG_INFINITY
        } else if self.noise == 0.0 && self.interference <= INTERFERENCE_FREE * self.useful {
            f64::INFINITY
        } else {
            to_db(self.useful / (self.interference.max(0.0) + self.noise))
        }
    }
}

/// Power budget of a pair, evaluated on the support of `ψ`.
pub fn power_budget(
    phi: &SampledWaveform,
    psi: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    snr: Snr,
) -> Result<PowerBudget> {
    if phi.norm_sq() == 0.0 || psi.norm_sq() == 0.0 {
        return Err(Error::InvalidArgument("waveforms must have nonzero norm".into()));
    }
    snr.validate()?;
    let window = Window::of(psi);
    let ks = useful_kernel(phi, spec, window)?;
    let ki = interference_kernel(phi, spec, cfg, window)?;
    Ok(PowerBudget {
        useful: ks.quadratic_form(psi),
        interference: ki.quadratic_form(psi),
        noise: snr.inverse() * phi.norm_sq() * psi.norm_sq(),
    })
}

/// `ψᴴKSψ / (ψᴴKIψ + snr⁻¹‖φ‖²‖ψ‖²)` in dB, evaluated on the support of `ψ`.
/// Interference-free pairs at infinite SNR give `+∞`.
pub fn sinr_of_pair(
    phi: &SampledWaveform,
    psi: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    snr: Snr,
) -> Result<f64> {
    Ok(power_budget(phi, psi, spec, cfg, snr)?.sinr_db())
}

/// Output of one half-step.
#[derive(Debug, Clone)]
pub struct HalfStep {
    pub waveform: SampledWaveform,
    /// Objective of the returned waveform, linear.
    pub value: f64,
    pub residual: f64,
}

/// Maximizes the quotient over waveforms supported on `window` with
/// `fixed` transmitted through `spec`. `noise_inverse` is the reciprocal
/// SNR used in the noise term `noise_inverse·‖fixed‖²`.
pub fn half_step(
    fixed: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    noise_inverse: f64,
    window: Window,
    warm_start: Option<&SampledWaveform>,
    solver: &dyn QuotientSolver,
) -> Result<HalfStep> {
    if !spec.effective_paths().any(|p| window.overlaps(fixed.start() + p.delay, fixed.len())) {
        return Err(Error::Window(format!(
            "no delayed copy of the waveform [{}, {}) meets window [{}, {})",
            fixed.start(),
            fixed.end(),
            window.start,
            window.end()
        )));
    }
    let ks = useful_kernel(fixed, spec, window)?;
    let ki = interference_kernel(fixed, spec, cfg, window)?;
    let noise = noise_inverse * fixed.norm_sq();
    let warm: Option<Vec<C64>> =
        warm_start.map(|w| (0..window.size).map(|i| w.at(window.start + i as i64)).collect());
    let sol = solver.solve(&QuotientProblem {
        useful: &ks,
        interference: &ki,
        noise,
        warm_start: warm.as_deref().filter(|w| w.iter().any(|x| x.norm_sqr() > 0.0)),
    })?;
    let waveform = SampledWaveform::new(sol.vector, fixed.ts(), window.start)?.normalized()?;
    let useful = ks.quadratic_form(&waveform);
    let value = useful / (ki.quadratic_form(&waveform) + noise);
    Ok(HalfStep { waveform, value, residual: sol.residual })
}

/// Runs the ping-pong loop with the receive window starting `offset`
/// samples after the transmit window. Durations are in samples.
pub fn pops_optimize(
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    pops: &PopsConfig,
    nphi: usize,
    npsi: usize,
    offset: i64,
) -> Result<PopsResult> {
    pops.validate()?;
    spec.validate(cfg.ts())?;
    let n = cfg.samples_per_symbol();
    if nphi == 0 || npsi == 0 || nphi % n != 0 || npsi % n != 0 {
        return Err(Error::InvalidArgument(format!(
            "waveform lengths {nphi}, {npsi} must be positive multiples of N = {n}"
        )));
    }
    let mut phi = match &pops.init {
        Init::Gaussian => gaussian_init(nphi, cfg)?,
        Init::Custom(w) => {
            if w.len() != nphi {
                return Err(Error::InvalidArgument(format!(
                    "initial waveform has {} samples, expected {nphi}",
                    w.len()
                )));
            }
            w.normalized()?
        }
    };
    let back = reverse(spec);
    let psi_window = Window::new(phi.start() + offset, npsi)?;
    let phi_window = Window::of(&phi);

    let noise_inverse = match pops.snr {
        Snr::Finite(s) => 1.0 / s,
        Snr::Infinite => {
            let ki = interference_kernel(&phi, spec, cfg, psi_window)?;
            let floor = SIR_FLOOR * ki.trace() / phi.norm_sq();
            if floor > 0.0 {
                floor
            } else {
                SIR_FLOOR
            }
        }
    };

    let mut trace = Vec::with_capacity(2 * pops.max_iters);
    let mut psi: Option<SampledWaveform> = None;
    let mut residual = 0.0f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < pops.max_iters {
        iterations += 1;
        let ping = half_step(&phi, spec, cfg, noise_inverse, psi_window, psi.as_ref(), pops.solver)?;
        trace.push(to_db(ping.value));
        let pong = half_step(&ping.waveform, &back, cfg, noise_inverse, phi_window, Some(&phi), pops.solver)?;
        trace.push(to_db(pong.value));
        residual = residual.max(ping.residual).max(pong.residual);

        let e_phi = phi.aligned_distance(&pong.waveform);
        let e_psi = psi.as_ref().map_or(f64::INFINITY, |p| p.aligned_distance(&ping.waveform));
        phi = pong.waveform;
        psi = Some(ping.waveform);
        if e_phi <= pops.epsilon && e_psi <= pops.epsilon {
            converged = true;
            break;
        }
    }
    let phi = phi.canonical_phase();
    let psi = psi.expect("at least one iteration").canonical_phase();
    let final_sinr_db = sinr_of_pair(&phi, &psi, spec, cfg, pops.snr)?;
    Ok(PopsResult {
        phi,
        psi,
        sinr_trace: trace,
        window_offset: offset,
        converged,
        iterations,
        max_eig_residual: residual,
        final_sinr_db,
    })
}

/// Runs [`pops_optimize`] for every receive-window offset within the
/// search half-range of the rounded mean delay and keeps the best final
/// objective; ties go to the offset closest to the mean delay.
pub fn window_offset_search(
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    pops: &PopsConfig,
    nphi: usize,
    npsi: usize,
) -> Result<PopsResult> {
    let half = pops.window_search.unwrap_or(cfg.samples_per_symbol() as i64 / 2);
    let mean = spec.mean_delay();
    let center = mean.round() as i64;
    let offsets: Vec<i64> = (center - half..=center + half).collect();
    let results: Vec<Result<PopsResult>> =
        offsets.par_iter().map(|&o| pops_optimize(spec, cfg, pops, nphi, npsi, o)).collect();
    let mut best: Option<PopsResult> = None;
    for r in results {
        let r = r?;
        best = Some(match best {
            None => r,
            Some(b) => {
                if prefer(&r, &b, mean) {
                    r
                } else {
                    b
                }
            }
        });
    }
    best.ok_or_else(|| Error::InvalidArgument("empty offset range".into()))
}

fn prefer(candidate: &PopsResult, incumbent: &PopsResult, mean: f64) -> bool {
    let (c, i) = (candidate.final_objective_db(), incumbent.final_objective_db());
    let tie = (from_db_safe(c) - from_db_safe(i)).abs() <= 1e-9 * from_db_safe(c).max(from_db_safe(i));
    if !tie {
        return c > i;
    }
    let dc = (candidate.window_offset as f64 - mean).abs();
    let di = (incumbent.window_offset as f64 - mean).abs();
    dc < di || (dc == di && candidate.window_offset < incumbent.window_offset)
}

fn from_db_safe(db: f64) -> f64 {
    if db.is_finite() {
        crate::from_db(db)
    } else {
        f64::MAX
    }
}

/// Default candidate path counts around `K* = 1 + √(B_dT_m·Q·N)`, the
/// count at which the delay and Doppler spreads are equal in lattice units.
pub fn default_k_grid(spread_factor: f64, cfg: &LatticeConfig) -> Vec<usize> {
    let k_star = 1.0 + (spread_factor * (cfg.subcarriers() * cfg.samples_per_symbol()) as f64).sqrt();
    let max_k = cfg.samples_per_symbol();
    let mut grid: Vec<usize> = [0.5, std::f64::consts::FRAC_1_SQRT_2, 1.0, std::f64::consts::SQRT_2, 2.0]
        .iter()
        .map(|f| ((k_star * f).round() as usize).clamp(2, max_k))
        .collect();
    grid.dedup();
    grid
}

/// Best design over the dispersion-balance grid: for each candidate
/// channel with spread factor `spread_factor`, a full offset search.
pub fn balanced_design(
    spread_factor: f64,
    cfg: &LatticeConfig,
    pops: &PopsConfig,
    nphi: usize,
    npsi: usize,
) -> Result<(PopsResult, ScatteringSpec)> {
    let grid = pops.k_grid.clone().unwrap_or_else(|| default_k_grid(spread_factor, cfg));
    let specs = balanced_spec(spread_factor, cfg, &grid)?;
    let mut best: Option<(PopsResult, ScatteringSpec)> = None;
    for spec in specs {
        let r = window_offset_search(&spec, cfg, pops, nphi, npsi)?;
        let better = best.as_ref().is_none_or(|(b, _)| r.final_objective_db() > b.final_objective_db());
        if better {
            best = Some((r, spec));
        }
    }
    best.ok_or_else(|| Error::Channel("empty K grid".into()))
}

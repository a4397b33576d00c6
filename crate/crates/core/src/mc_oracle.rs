//! Monte-Carlo link simulator.
//!
//! Transmits random QPSK symbols on every lattice point that can reach the
//! receive window, passes them through random channel realizations, adds
//! white noise and correlates with `ψ`. The wanted, interference and noise
//! terms of the decision variable are accumulated separately. Nothing here
//! uses the kernel assembly code, so agreement with the analytic SINR is an
//! independent check of it.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{complex_gaussian, sample_realization_with, ScatteringSpec, DEFAULT_DOPPLER_LINES};
use crate::kernels::{HermitianKernel, Snr};
use crate::lattice::{modulated_shift, LatticeConfig, SampledWaveform};
use crate::{to_db, Error, Result, C64};

/// Trials are split into this many independently seeded groups, which are
/// also the jackknife blocks.
const GROUPS: usize = 50;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEstimate {
    pub useful: f64,
    pub interference: f64,
    pub noise: f64,
    pub sinr_db: f64,
    /// Half-width of the 95% confidence interval of `sinr_db`.
    pub ci95_db: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub trials: usize,
    pub seed: u64,
    pub doppler_lines: usize,
    /// When false every symbol is zero and only noise is received.
    pub transmit: bool,
}

impl LinkConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self { trials, seed, doppler_lines: DEFAULT_DOPPLER_LINES, transmit: true }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    useful: f64,
    interference: f64,
    noise: f64,
    trials: usize,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.useful += o.useful;
        self.interference += o.interference;
        self.noise += o.noise;
        self.trials += o.trials;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            useful: self.useful - o.useful,
            interference: self.interference - o.interference,
            noise: self.noise - o.noise,
            trials: self.trials - o.trials,
        }
    }

    fn sinr_db(&self) -> f64 {
        to_db(self.useful / (self.interference + self.noise))
    }
}

fn group_rng(seed: u64, group: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(group as u64);
    rng
}

fn group_sizes(trials: usize) -> Vec<usize> {
    let g = GROUPS.min(trials);
    (0..g).map(|i| trials / g + usize::from(i < trials % g)).collect()
}

fn qpsk<R: Rng>(rng: &mut R) -> C64 {
    let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// Lattice points `(m, n)`, `m ∈ 0..Q`, whose transmitted copy reaches
/// `[win_start, win_end)` through some path delay.
fn reaching_points(phi: &SampledWaveform, cfg: &LatticeConfig, delays: &[i64], win_start: i64, win_end: i64) -> Vec<(i64, i64)> {
    let n = cfg.samples_per_symbol() as i64;
    let dmin = *delays.iter().min().unwrap();
    let dmax = *delays.iter().max().unwrap();
    let len = phi.len() as i64;
    let mut points = Vec::new();
    for m in 0..cfg.subcarriers() as i64 {
        let base = phi.start() + crate::lattice::lattice_point(cfg, m, 0).0;
        let lo = (win_start - base - len - dmax).div_euclid(n) - 1;
        let hi = (win_end - base - dmin).div_euclid(n) + 1;
        for k in lo..=hi {
            let shift = crate::lattice::lattice_point(cfg, m, k).0;
            let start = phi.start() + shift;
            if delays.iter().any(|d| start + d < win_end && start + d + len > win_start) {
                points.push((m, k));
            }
        }
    }
    points
}

/// Estimates the mean wanted, interference and noise powers at the output
/// of `ψ` by simulation with the default Doppler line count.
pub fn simulate_link(
    phi: &SampledWaveform,
    psi: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    snr: Snr,
    trials: usize,
    seed: u64,
) -> Result<LinkEstimate> {
    simulate_link_with(phi, psi, spec, cfg, snr, &LinkConfig::new(trials, seed))
}

pub fn simulate_link_with(
    phi: &SampledWaveform,
    psi: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    snr: Snr,
    link: &LinkConfig,
) -> Result<LinkEstimate> {
    if link.trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_TRIALS} trials, got {}", link.trials)));
    }
    if phi.norm_sq() == 0.0 || psi.norm_sq() == 0.0 {
        return Err(Error::InvalidArgument("waveforms must have nonzero norm".into()));
    }
    snr.validate()?;
    spec.validate(cfg.ts())?;
    let ts = cfg.ts();
    let noise_density = snr.inverse() * phi.norm_sq();
    let win_start = psi.start();
    let win_len = psi.len();
    let win_end = win_start + win_len as i64;
    let delays: Vec<i64> = spec.effective_paths().map(|p| p.delay).collect();
    let points = reaching_points(phi, cfg, &delays, win_start, win_end);
    let wanted = points.iter().position(|&p| p == (0, 0));

    // delayed copies of every lattice waveform on the window: copies[point][path][sample]
    let copies: Vec<Vec<Vec<C64>>> = points
        .iter()
        .map(|&(m, n)| {
            let shifted = modulated_shift(phi, cfg, m, n);
            delays
                .iter()
                .map(|&d| (0..win_len).map(|i| shifted.at(win_start + i as i64 - d)).collect())
                .collect()
        })
        .collect();

    let sizes = group_sizes(link.trials);
    let groups: Vec<Sums> = sizes
        .par_iter()
        .enumerate()
        .map(|(g, &count)| {
            let mut rng = group_rng(link.seed, g);
            let mut sums = Sums::default();
            let mut path_gain = vec![vec![C64::new(0.0, 0.0); win_len]; delays.len()];
            for _ in 0..count {
                let h = sample_realization_with(spec, ts, link.doppler_lines, &mut rng);
                for row in path_gain.iter_mut() {
                    row.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                }
                for tap in &h.taps {
                    let k = delays.iter().position(|&d| d == tap.delay).expect("tap on a profile delay");
                    let step = C64::from_polar(1.0, 2.0 * PI * tap.doppler * ts);
                    let mut rot = tap.gain * C64::from_polar(1.0, 2.0 * PI * tap.doppler * ts * win_start as f64);
                    for x in path_gain[k].iter_mut() {
                        *x += rot;
                        rot *= step;
                    }
                }
                // effective matched filter per path: conj(ψ) · h_k
                let filters: Vec<Vec<C64>> = path_gain
                    .iter()
                    .map(|row| row.iter().zip(psi.samples()).map(|(hk, p)| p.conj() * hk).collect())
                    .collect();
                let mut desired = C64::new(0.0, 0.0);
                let mut interference = C64::new(0.0, 0.0);
                for (idx, copy) in copies.iter().enumerate() {
                    let a = if link.transmit { qpsk(&mut rng) } else { C64::new(0.0, 0.0) };
                    let mut c = C64::new(0.0, 0.0);
                    for (f, x) in filters.iter().zip(copy) {
                        c += f.iter().zip(x).map(|(fi, xi)| fi * xi).sum::<C64>();
                    }
                    if Some(idx) == wanted {
                        desired = a * c;
                    } else {
                        interference += a * c;
                    }
                }
                let noise: C64 = if noise_density > 0.0 {
                    psi.samples().iter().map(|p| p.conj() * complex_gaussian(&mut rng, noise_density)).sum()
                } else {
                    C64::new(0.0, 0.0)
                };
                sums.useful += desired.norm_sqr();
                sums.interference += interference.norm_sqr();
                sums.noise += noise.norm_sqr();
                sums.trials += 1;
            }
            sums
        })
        .collect();

    let mut total = Sums::default();
    for g in &groups {
        total.add(g);
    }
    let t = total.trials as f64;
    let sinr_db = total.sinr_db();
    // delete-a-group jackknife
    let leave_out: Vec<f64> = groups.iter().map(|g| total.minus(g).sinr_db()).collect();
    let k = leave_out.len() as f64;
    let mean = leave_out.iter().sum::<f64>() / k;
    let var = (k - 1.0) / k * leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    Ok(LinkEstimate {
        useful: total.useful / t,
        interference: total.interference / t,
        noise: total.noise / t,
        sinr_db,
        ci95_db: 1.96 * var.sqrt(),
        trials: total.trials,
    })
}

/// Average of `y yᴴ` over channel realizations, where `y` is `φ` after the
/// channel restricted to `[window_start, window_start + size)`.
pub fn empirical_kernel(
    phi: &SampledWaveform,
    spec: &ScatteringSpec,
    window_start: i64,
    size: usize,
    trials: usize,
    seed: u64,
) -> Result<HermitianKernel> {
    if trials == 0 || size == 0 {
        return Err(Error::InvalidArgument("trials and window size must be positive".into()));
    }
    spec.validate(phi.ts())?;
    let ts = phi.ts();
    let sizes = group_sizes(trials);
    let parts: Vec<Mat<C64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(g, &count)| {
            let mut rng = group_rng(seed, g);
            let mut acc = Mat::<C64>::zeros(size, size);
            let mut y = vec![C64::new(0.0, 0.0); size];
            for _ in 0..count {
                let h = sample_realization_with(spec, ts, DEFAULT_DOPPLER_LINES, &mut rng);
                for (i, yi) in y.iter_mut().enumerate() {
                    let q = window_start + i as i64;
                    *yi = h
                        .taps
                        .iter()
                        .map(|t| t.gain * C64::from_polar(1.0, 2.0 * PI * t.doppler * ts * q as f64) * phi.at(q - t.delay))
                        .sum();
                }
                for j in 0..size {
                    let yj = y[j].conj();
                    for i in 0..size {
                        acc[(i, j)] += y[i] * yj;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Mat::<C64>::zeros(size, size);
    for p in &parts {
        total += p;
    }
    let scale = 1.0 / trials as f64;
    let avg = Mat::from_fn(size, size, |i, j| total[(i, j)] * scale);
    HermitianKernel::new(avg, window_start)
}

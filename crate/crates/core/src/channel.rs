//! Separable WSSUS channel statistics and random channel realizations.
//!
//! A [`ScatteringSpec`] is the product of a discrete delay profile and a
//! Doppler spectrum shared by every path, plus deterministic time and
//! frequency offsets modelling synchronization errors. Conventions:
//! the Doppler spread is `B_d = 2 f_D` and the delay spread is
//! `T_m = (max p_k - min p_k) Ts`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bessel::j0;
use crate::kernels::HermitianKernel;
use crate::lattice::LatticeConfig;
use crate::{Error, Result, C64};

const POWER_TOLERANCE: f64 = 1e-12;

/// Default number of Doppler lines per path when realizing a Jakes spectrum.
pub const DEFAULT_DOPPLER_LINES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Delay in samples.
    pub delay: i64,
    pub power: f64,
}

/// Discrete multipath power profile. Delays are distinct and ascending and
/// the powers sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    paths: Vec<Path>,
}

impl DelayProfile {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Channel("delay profile needs at least one path".into()));
        }
        if paths.windows(2).any(|w| w[0].delay >= w[1].delay) {
            return Err(Error::Channel("path delays must be distinct and ascending".into()));
        }
        if paths.iter().any(|p| !(p.power.is_finite() && p.power >= 0.0)) {
            return Err(Error::Channel("path powers must be finite and nonnegative".into()));
        }
        let total: f64 = paths.iter().map(|p| p.power).sum();
        if (total - 1.0).abs() > POWER_TOLERANCE {
            return Err(Error::Channel(format!("path powers sum to {total}, expected 1")));
        }
        Ok(Self { paths })
    }

    /// Single unit-power path.
    pub fn single(delay: i64) -> Self {
        Self { paths: vec![Path { delay, power: 1.0 }] }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn mean_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.power * p.delay as f64).sum()
    }

    /// `max p_k - min p_k` in samples.
    pub fn spread_samples(&self) -> i64 {
        self.paths.last().unwrap().delay - self.paths[0].delay
    }

    fn negated(&self) -> Self {
        let paths = self.paths.iter().rev().map(|p| Path { delay: -p.delay, power: p.power }).collect();
        Self { paths }
    }
}

/// `K` contiguous paths with powers `(1-b)/(1-b^K) b^k`.
pub fn exponential_profile(paths: usize, decay: f64) -> Result<DelayProfile> {
    if paths == 0 {
        return Err(Error::Channel("K must be at least 1".into()));
    }
    if paths == 1 {
        return Ok(DelayProfile::single(0));
    }
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::Channel(format!("decay factor must lie in (0, 1), got {decay}")));
    }
    let scale = (1.0 - decay) / (1.0 - decay.powi(paths as i32));
    let raw: Vec<f64> = (0..paths).map(|k| scale * decay.powi(k as i32)).collect();
    // renormalize away the last few ulps
    let total: f64 = raw.iter().sum();
    let paths = raw
        .into_iter()
        .enumerate()
        .map(|(k, p)| Path { delay: k as i64, power: p / total })
        .collect();
    DelayProfile::new(paths)
}

/// Decay factor giving a 10 dB power drop from the first to the last of `K` paths.
pub fn default_decay(paths: usize) -> f64 {
    if paths <= 1 {
        0.5
    } else {
        0.1f64.powf(1.0 / (paths - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerLine {
    /// Frequency shift in Hz.
    pub freq: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DopplerSpectrum {
    /// No Doppler spread (`f_D = 0`).
    None,
    /// Classical Jakes spectrum with maximum Doppler shift `max_doppler` (Hz).
    Jakes { max_doppler: f64 },
    /// Discrete lines with weights summing to one.
    Lines(Vec<DopplerLine>),
}

impl DopplerSpectrum {
    /// Largest `|ν|` in the support.
    pub fn support(&self) -> f64 {
        match self {
            DopplerSpectrum::None => 0.0,
            DopplerSpectrum::Jakes { max_doppler } => *max_doppler,
            DopplerSpectrum::Lines(lines) => lines.iter().map(|l| l.freq.abs()).fold(0.0, f64::max),
        }
    }

    /// Time autocorrelation at a lag of `lag` samples.
    pub fn autocorrelation(&self, ts: f64, lag: i64) -> C64 {
        match self {
            DopplerSpectrum::None => C64::new(1.0, 0.0),
            DopplerSpectrum::Jakes { max_doppler } => {
                C64::new(j0(2.0 * PI * max_doppler * ts * lag as f64), 0.0)
            }
            DopplerSpectrum::Lines(lines) => lines
                .iter()
                .map(|l| C64::from_polar(l.weight, 2.0 * PI * l.freq * ts * lag as f64))
                .sum(),
        }
    }

    fn mirrored(&self) -> Self {
        match self {
            DopplerSpectrum::Lines(lines) => DopplerSpectrum::Lines(
                lines.iter().rev().map(|l| DopplerLine { freq: -l.freq, weight: l.weight }).collect(),
            ),
            other => other.clone(),
        }
    }
}

/// Separable scattering function `S(p, ν) = α(ν) β(p)` with deterministic
/// time (`Δτ`, samples) and frequency (`Δν`, Hz) offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSpec {
    pub delay: DelayProfile,
    pub doppler: DopplerSpectrum,
    pub time_offset: i64,
    pub freq_offset: f64,
}

impl ScatteringSpec {
    pub fn new(delay: DelayProfile, doppler: DopplerSpectrum) -> Self {
        Self { delay, doppler, time_offset: 0, freq_offset: 0.0 }
    }

    /// Identity channel: one unit path at zero delay, no Doppler.
    pub fn identity() -> Self {
        Self::new(DelayProfile::single(0), DopplerSpectrum::None)
    }

    /// Checks the Doppler constraints against the sampling period.
    pub fn validate(&self, ts: f64) -> Result<()> {
        let nyquist = 0.5 / ts;
        match &self.doppler {
            DopplerSpectrum::Jakes { max_doppler } if !(*max_doppler >= 0.0 && *max_doppler < nyquist) => {
                return Err(Error::Channel(format!(
                    "Jakes f_D = {max_doppler} Hz must lie in [0, {nyquist}) Hz"
                )));
            }
            DopplerSpectrum::Lines(lines) => {
                if lines.is_empty() || lines.iter().any(|l| !(l.weight >= 0.0 && l.freq.is_finite())) {
                    return Err(Error::Channel("Doppler lines need finite frequencies and nonnegative weights".into()));
                }
                let total: f64 = lines.iter().map(|l| l.weight).sum();
                if (total - 1.0).abs() > POWER_TOLERANCE {
                    return Err(Error::Channel(format!("Doppler line weights sum to {total}, expected 1")));
                }
            }
            _ => {}
        }
        if !self.freq_offset.is_finite() || self.doppler.support() + self.freq_offset.abs() >= nyquist {
            return Err(Error::Channel(format!(
                "Doppler support plus frequency offset must stay below {nyquist} Hz"
            )));
        }
        Ok(())
    }

    /// Path delays including the time offset, with their powers.
    pub fn effective_paths(&self) -> impl Iterator<Item = Path> + '_ {
        let dt = self.time_offset;
        self.delay.paths().iter().map(move |p| Path { delay: p.delay + dt, power: p.power })
    }

    pub fn mean_delay(&self) -> f64 {
        self.delay.mean_delay() + self.time_offset as f64
    }

    /// Largest `|effective delay|`.
    pub fn max_abs_delay(&self) -> i64 {
        self.effective_paths().map(|p| p.delay.abs()).max().unwrap_or(0)
    }

    /// Channel time autocorrelation at `lag` samples, including the
    /// frequency-offset phase `e^{j2πΔν Ts lag}`.
    pub fn correlation(&self, ts: f64, lag: i64) -> C64 {
        let base = self.doppler.autocorrelation(ts, lag);
        if self.freq_offset == 0.0 {
            base
        } else {
            base * C64::from_polar(1.0, 2.0 * PI * self.freq_offset * ts * lag as f64)
        }
    }

    /// `T_m` in seconds.
    pub fn delay_spread(&self, ts: f64) -> f64 {
        self.delay.spread_samples() as f64 * ts
    }
}

/// `size x size` Toeplitz matrix with entries `J0(2π f_D Ts (p - q))`.
pub fn jakes_autocorrelation(max_doppler: f64, ts: f64, size: usize) -> Result<HermitianKernel> {
    if !(ts > 0.0) {
        return Err(Error::Channel("sampling period must be positive".into()));
    }
    if !(max_doppler >= 0.0 && max_doppler < 0.5 / ts) {
        return Err(Error::Channel(format!("f_D = {max_doppler} Hz is not below Nyquist")));
    }
    if size == 0 {
        return Err(Error::InvalidArgument("matrix size must be positive".into()));
    }
    let lags: Vec<f64> = (0..size).map(|d| j0(2.0 * PI * max_doppler * ts * d as f64)).collect();
    Ok(HermitianKernel::from_fn(size, 0, |p, q| C64::new(lags[p.abs_diff(q)], 0.0)))
}

/// Time- and frequency-mirrored statistics `S(-p, -ν)`.
pub fn reverse(spec: &ScatteringSpec) -> ScatteringSpec {
    ScatteringSpec {
        delay: spec.delay.negated(),
        doppler: spec.doppler.mirrored(),
        time_offset: -spec.time_offset,
        freq_offset: -spec.freq_offset,
    }
}

/// Adds a timing error of `dt_samples` and a carrier frequency error of `dnu` Hz.
pub fn apply_sync_errors(spec: &ScatteringSpec, dt_samples: i64, dnu: f64, ts: f64) -> Result<ScatteringSpec> {
    let out = ScatteringSpec {
        time_offset: spec.time_offset + dt_samples,
        freq_offset: spec.freq_offset + dnu,
        ..spec.clone()
    };
    out.validate(ts)?;
    Ok(out)
}

/// Jakes channel on `delay` whose spread factor `B_d T_m` equals `spread_factor`.
pub fn spec_for_spread(spread_factor: f64, delay: DelayProfile, ts: f64) -> Result<ScatteringSpec> {
    if !(spread_factor > 0.0 && spread_factor.is_finite()) {
        return Err(Error::Channel(format!("spread factor must be positive, got {spread_factor}")));
    }
    let tm = delay.spread_samples() as f64 * ts;
    if tm <= 0.0 {
        return Err(Error::Channel("a positive spread factor needs at least two distinct delays".into()));
    }
    let spec = ScatteringSpec::new(delay, DopplerSpectrum::Jakes { max_doppler: spread_factor / (2.0 * tm) });
    spec.validate(ts)?;
    Ok(spec)
}

/// One candidate channel per `K` in `k_grid`, each an exponential profile of
/// `K` contiguous paths (default decay) with `f_D` set so that `B_d T_m`
/// equals `spread_factor`.
pub fn balanced_spec(spread_factor: f64, cfg: &LatticeConfig, k_grid: &[usize]) -> Result<Vec<ScatteringSpec>> {
    if k_grid.is_empty() {
        return Err(Error::Channel("empty K grid".into()));
    }
    k_grid
        .iter()
        .map(|&k| {
            if k < 2 {
                return Err(Error::Channel(format!("balanced channels need K >= 2, got {k}")));
            }
            spec_for_spread(spread_factor, exponential_profile(k, default_decay(k))?, cfg.ts())
        })
        .collect()
}

/// One tap of a channel realization: gain and Doppler shift at a given delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: i64,
    pub gain: C64,
    pub doppler: f64,
}

/// A random draw of `h(p, q) = Σ_k h_k e^{j2π ν_k Ts q} δ(p - p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Tap>,
    pub ts: f64,
}

impl ChannelRealization {
    /// `h(p, q)`.
    pub fn response(&self, p: i64, q: i64) -> C64 {
        self.taps
            .iter()
            .filter(|t| t.delay == p)
            .map(|t| t.gain * C64::from_polar(1.0, 2.0 * PI * t.doppler * self.ts * q as f64))
            .sum()
    }

    /// `Σ |h_k|²`.
    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(scale * re, scale * im)
}

/// Draws a realization from `rng`; see [`sample_realization`].
pub fn sample_realization_with<R: Rng + ?Sized>(
    spec: &ScatteringSpec,
    ts: f64,
    doppler_lines: usize,
    rng: &mut R,
) -> ChannelRealization {
    let mut taps = Vec::new();
    for path in spec.effective_paths() {
        match &spec.doppler {
            DopplerSpectrum::None => taps.push(Tap {
                delay: path.delay,
                gain: complex_gaussian(rng, path.power),
                doppler: spec.freq_offset,
            }),
            DopplerSpectrum::Jakes { max_doppler } => {
                let lines = doppler_lines.max(1);
                for _ in 0..lines {
                    let theta: f64 = rng.random::<f64>() * PI;
                    taps.push(Tap {
                        delay: path.delay,
                        gain: complex_gaussian(rng, path.power / lines as f64),
                        doppler: max_doppler * theta.cos() + spec.freq_offset,
                    });
                }
            }
            DopplerSpectrum::Lines(lines) => {
                for line in lines {
                    taps.push(Tap {
                        delay: path.delay,
                        gain: complex_gaussian(rng, path.power * line.weight),
                        doppler: line.freq + spec.freq_offset,
                    });
                }
            }
        }
    }
    ChannelRealization { taps, ts }
}

/// Random channel realization, deterministic in `seed`. A Jakes spectrum is
/// realized as `doppler_lines` independent lines per path at `f_D cos θ`
/// with `θ` uniform on `[0, π)`; every tap gain is a centered complex
/// Gaussian so that the mean total power is one.
pub fn sample_realization(spec: &ScatteringSpec, ts: f64, seed: u64, doppler_lines: usize) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_realization_with(spec, ts, doppler_lines, &mut rng)
}

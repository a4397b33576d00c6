use rustfft::FftPlanner;

use crate::lattice::{modulated_shift, LatticeConfig, SampledWaveform};
use crate::{Error, Result, C64};

/// Frequency bins per subcarrier spacing.
pub const DEFAULT_OVERSAMPLE: usize = 64;

/// Ratio assigned to exact spectral nulls so that dB values stay finite.
const NULL_FLOOR: f64 = 1e-300;

/// Periodogram over one period of the sampled spectrum, frequencies in
/// units of `F` running over `[-Q/2, Q/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    /// `|X|²` divided by the waveform length.
    pub linear: Vec<f64>,
    /// Peak-normalized dB.
    pub db: Vec<f64>,
}

impl Spectrum {
    fn from_linear(freq: Vec<f64>, linear: Vec<f64>) -> Self {
        let peak = linear.iter().copied().fold(0.0, f64::max);
        let db = linear.iter().map(|&p| 10.0 * (p / peak).max(NULL_FLOOR).log10()).collect();
        Self { freq, linear, db }
    }
}

fn grid_len(len: usize, subcarriers: usize, oversample: usize) -> Result<usize> {
    if oversample == 0 || subcarriers == 0 {
        return Err(Error::InvalidArgument("oversample and Q must be positive".into()));
    }
    let base = oversample * subcarriers;
    Ok(base * len.div_ceil(base).max(1))
}

fn periodogram(w: &SampledWaveform, size: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf = vec![C64::new(0.0, 0.0); size];
    buf[..w.len()].copy_from_slice(w.samples());
    planner.plan_fft_forward(size).process(&mut buf);
    let half = size / 2;
    // fftshift: bin `half` is the lowest frequency
    (0..size).map(|i| buf[(i + half) % size].norm_sqr() / w.len() as f64).collect()
}

fn axis(size: usize, subcarriers: usize) -> Vec<f64> {
    let half = (size / 2) as f64;
    (0..size).map(|i| (i as f64 - half) * subcarriers as f64 / size as f64).collect()
}

/// Power spectral density of `w` on a grid of `oversample·Q·k` points, the
/// smallest such grid that holds the waveform, i.e. a resolution of
/// `F/(oversample·k)`.
pub fn psd(w: &SampledWaveform, subcarriers: usize, oversample: usize) -> Result<Spectrum> {
    if w.is_empty() {
        return Err(Error::InvalidArgument("empty waveform".into()));
    }
    let size = grid_len(w.len(), subcarriers, oversample)?;
    let mut planner = FftPlanner::new();
    Ok(Spectrum::from_linear(axis(size, subcarriers), periodogram(w, size, &mut planner)))
}

/// PSD of `count` contiguous subcarriers centered on subcarrier 0, the sum
/// of the periodograms of the modulated copies of `w`.
pub fn aggregate_psd(w: &SampledWaveform, cfg: &LatticeConfig, count: usize, oversample: usize) -> Result<Spectrum> {
    let q = cfg.subcarriers();
    if count == 0 || count > q {
        return Err(Error::InvalidArgument(format!("cannot aggregate {count} of {q} subcarriers")));
    }
    if w.is_empty() {
        return Err(Error::InvalidArgument("empty waveform".into()));
    }
    let size = grid_len(w.len(), q, oversample)?;
    let mut planner = FftPlanner::new();
    let first = -((count as i64 - 1) / 2);
    let mut total = vec![0.0; size];
    for m in first..first + count as i64 {
        let copy = modulated_shift(w, cfg, m, 0);
        for (t, p) in total.iter_mut().zip(periodogram(&copy, size, &mut planner)) {
            *t += p;
        }
    }
    Ok(Spectrum::from_linear(axis(size, q), total))
}

/// Largest peak-normalized level at `|f| ≥ offset` (in units of `F`).
pub fn oob_leakage(spectrum: &Spectrum, offset: f64) -> Result<f64> {
    spectrum
        .freq
        .iter()
        .zip(&spectrum.db)
        .filter(|(f, _)| f.abs() >= offset)
        .map(|(_, &d)| d)
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidArgument(format!("no frequency bins beyond {offset} F")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind;
    use std::f64::consts::PI;

    fn rectangle(n: usize) -> SampledWaveform {
        SampledWaveform::from_real(&vec![1.0; n], 1e-6, 0).unwrap().normalized().unwrap()
    }

    /// Normalized Dirichlet kernel `|sin(π n x)/(n sin(π x))|²`, `x` in cycles per sample.
    fn dirichlet(n: usize, x: f64) -> f64 {
        let d = (PI * x).sin();
        if d.abs() < 1e-15 {
            1.0
        } else {
            ((PI * n as f64 * x).sin() / (n as f64 * d)).powi(2)
        }
    }

    #[test]
    fn parseval_and_axis() {
        let w = crate::solver::gaussian_init(
            50,
            &LatticeConfig::new(LatticeKind::Hexagonal, 16, 20, 1e-6).unwrap(),
        )
        .unwrap()
        .scaled(C64::new(0.0, 3.0));
        let s = psd(&w, 16, 8).unwrap();
        assert_eq!(s.freq.len(), 128);
        assert_eq!(s.freq[0], -8.0);
        assert_eq!(s.freq[64], 0.0);
        let mean = s.linear.iter().sum::<f64>() / s.linear.len() as f64;
        assert!((mean - w.norm_sq() / w.len() as f64).abs() < 1e-12);
        assert_eq!(s.db.iter().copied().fold(f64::MIN, f64::max), 0.0);
    }

    #[test]
    fn grid_grows_to_hold_long_waveforms() {
        let s = psd(&rectangle(300), 16, 8).unwrap();
        assert_eq!(s.freq.len(), 384);
    }

    #[test]
    fn rectangle_matches_dirichlet_oracle() {
        let n = 160;
        let q = 128;
        let s = psd(&rectangle(n), q, 64).unwrap();
        for (f, d) in s.freq.iter().zip(&s.db) {
            let oracle = 10.0 * dirichlet(n, f / q as f64).max(NULL_FLOOR).log10();
            if oracle > -200.0 {
                assert!((d - oracle).abs() < 1e-8, "f = {f}: {d} vs {oracle}");
            }
        }
        // first sidelobe of a long rectangle
        let first = s
            .freq
            .iter()
            .zip(&s.db)
            .filter(|(f, _)| **f > 0.9 && **f < 1.7)
            .map(|(_, &d)| d)
            .fold(f64::MIN, f64::max);
        assert!((first + 13.26).abs() < 0.05, "{first}");
    }

    #[test]
    fn oob_of_rectangle_follows_envelope() {
        let (n, q) = (160usize, 128usize);
        let s = psd(&rectangle(n), q, 64).unwrap();
        let mut prev = f64::INFINITY;
        for offset in [1.0, 2.0, 5.0, 10.0, 20.0] {
            let level = oob_leakage(&s, offset).unwrap();
            assert!(level <= prev);
            prev = level;
            // continuous maximum of the Dirichlet kernel beyond the offset
            let oracle = (0..=200_000)
                .map(|i| offset + i as f64 * (q as f64 / 2.0 - offset) / 200_000.0)
                .map(|f| dirichlet(n, f / q as f64))
                .fold(0.0, f64::max);
            let oracle = 10.0 * oracle.log10();
            assert!(level <= oracle + 1e-9 && level > oracle - 0.02, "{offset}: {level} vs {oracle}");
        }
        assert!(oob_leakage(&s, 100.0).is_err());
    }

    #[test]
    fn aggregate_equals_shifted_sum_and_is_symmetric() {
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 16, 20, 1e-6).unwrap();
        let w = crate::solver::gaussian_init(60, &cfg).unwrap().with_start(7);
        let single = psd(&w, 16, 4).unwrap();
        let agg = aggregate_psd(&w, &cfg, 5, 4).unwrap();
        let size = single.linear.len();
        let per_f = size / 16;
        for i in 0..size {
            let expect: f64 = (-2i64..=2)
                .map(|m| single.linear[(i as i64 - m * per_f as i64).rem_euclid(size as i64) as usize])
                .sum();
            assert!((agg.linear[i] - expect).abs() < 1e-12 * expect.max(1e-300) + 1e-15);
        }
        for i in 1..size / 2 {
            assert!((agg.linear[size / 2 + i] - agg.linear[size / 2 - i]).abs() < 1e-12);
        }
        assert!(aggregate_psd(&w, &cfg, 17, 4).is_err());
    }
}

//! Experiment layer: SIR sweeps, spectra, synchronization sensitivity,
//! codebooks and the cyclic-prefix OFDM baseline.

mod codebook;
mod spectrum;

use rayon::prelude::*;

use crate::channel::{balanced_spec, apply_sync_errors, ScatteringSpec};
use crate::kernels::Snr;
use crate::lattice::{LatticeConfig, LatticeKind, SampledWaveform};
use crate::solver::{balanced_design, default_k_grid, sinr_of_pair, PopsConfig, PopsResult};
use crate::{Error, Result};

pub use codebook::{build_codebook, mismatch_matrix, Codebook, CodebookEntry};
pub use spectrum::{aggregate_psd, oob_leakage, psd, Spectrum, DEFAULT_OVERSAMPLE};

/// Named series of dB values over a common axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    /// Configuration echo as ordered key/value pairs.
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub fn new(axis_name: impl Into<String>, axis_values: Vec<f64>) -> Self {
        Self { axis_name: axis_name.into(), axis_values, series: Vec::new(), metadata: Vec::new() }
    }

    pub fn push_series(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.axis_values.len() {
            return Err(Error::InvalidArgument(format!(
                "series {name} has {} points, axis has {}",
                values.len(),
                self.axis_values.len()
            )));
        }
        if self.series.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidArgument(format!("duplicate series {name}")));
        }
        self.series.push((name, values));
        Ok(())
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Appends the series of `other`, which must share the axis.
    pub fn merge(&mut self, other: SweepResult) -> Result<()> {
        if other.axis_values != self.axis_values || other.axis_name != self.axis_name {
            return Err(Error::InvalidArgument("cannot merge sweeps over different axes".into()));
        }
        for (name, values) in other.series {
            self.push_series(name, values)?;
        }
        Ok(())
    }
}

/// An optimized pair together with the channel and lattice it was designed for.
#[derive(Debug, Clone)]
pub struct Design {
    pub result: PopsResult,
    pub spec: ScatteringSpec,
    pub cfg: LatticeConfig,
    pub spread_factor: f64,
}

impl Design {
    pub fn phi(&self) -> &SampledWaveform {
        &self.result.phi
    }

    pub fn psi(&self) -> &SampledWaveform {
        &self.result.psi
    }

    /// SINR of the final pair at the design SNR, in dB.
    pub fn sinr_db(&self) -> f64 {
        self.result.final_sinr_db
    }

    pub fn paths(&self) -> usize {
        self.spec.delay.len()
    }
}

/// Lattice with `Q` subcarriers and `N` the even integer closest to `FT·Q`.
pub fn lattice_for_ft(kind: LatticeKind, subcarriers: usize, ft: f64, ts: f64) -> Result<LatticeConfig> {
    if !(ft > 1.0 && ft.is_finite()) {
        return Err(Error::Lattice(format!("FT must exceed 1, got {ft}")));
    }
    let n = 2 * (ft * subcarriers as f64 / 2.0).round() as usize;
    LatticeConfig::new(kind, subcarriers, n, ts)
}

/// Balanced design of waveforms lasting `d_over_t` symbol periods.
pub fn design(cfg: &LatticeConfig, spread_factor: f64, d_over_t: usize, pops: &PopsConfig) -> Result<Design> {
    if d_over_t == 0 {
        return Err(Error::InvalidArgument("D/T must be a positive integer".into()));
    }
    let len = d_over_t * cfg.samples_per_symbol();
    let (result, spec) = balanced_design(spread_factor, cfg, pops, len, len)?;
    Ok(Design { result, spec, cfg: *cfg, spread_factor })
}

/// Conventional CP-OFDM as a pulse pair on a rectangular lattice with
/// `N = Q + cp`: a rectangle of `N` samples at 0 and a rectangle of `Q`
/// samples at `cp`, both unit norm.
pub fn conventional_ofdm_pair(
    subcarriers: usize,
    cp: usize,
    ts: f64,
) -> Result<(SampledWaveform, SampledWaveform, LatticeConfig)> {
    if cp == 0 {
        return Err(Error::Lattice("cyclic prefix must be positive".into()));
    }
    let cfg = LatticeConfig::new(LatticeKind::Rectangular, subcarriers, subcarriers + cp, ts)?;
    let n = cfg.samples_per_symbol();
    let phi = SampledWaveform::from_real(&vec![1.0; n], ts, 0)?.normalized()?;
    let psi = SampledWaveform::from_real(&vec![1.0; subcarriers], ts, cp as i64)?.normalized()?;
    Ok((phi, psi, cfg))
}

/// CP-OFDM evaluated on its own best balanced channel.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub phi: SampledWaveform,
    pub psi: SampledWaveform,
    pub cfg: LatticeConfig,
    pub spec: ScatteringSpec,
    pub sinr_db: f64,
}

/// CP-OFDM SINR maximized over the candidate path counts, the same
/// dispersion balance the optimized systems go through.
pub fn ofdm_baseline(
    subcarriers: usize,
    cp: usize,
    ts: f64,
    spread_factor: f64,
    k_grid: Option<&[usize]>,
    snr: Snr,
) -> Result<Baseline> {
    let (phi, psi, cfg) = conventional_ofdm_pair(subcarriers, cp, ts)?;
    let grid = k_grid.map_or_else(|| default_k_grid(spread_factor, &cfg), <[usize]>::to_vec);
    let mut best: Option<Baseline> = None;
    for spec in balanced_spec(spread_factor, &cfg, &grid)? {
        let sinr_db = sinr_of_pair(&phi, &psi, &spec, &cfg, snr)?;
        if best.as_ref().is_none_or(|b| sinr_db > b.sinr_db) {
            best = Some(Baseline { phi: phi.clone(), psi: psi.clone(), cfg, spec, sinr_db });
        }
    }
    best.ok_or_else(|| Error::Channel("empty K grid".into()))
}

pub fn series_name(kind: LatticeKind, d_over_t: usize) -> String {
    format!("{}_D{d_over_t}", kind.name())
}

fn sir_pops(pops: &PopsConfig) -> PopsConfig {
    PopsConfig { snr: Snr::Infinite, ..pops.clone() }
}

/// Optimized SIR against `FT`: one series per lattice kind and duration,
/// plus CP-OFDM with `cp = N - Q`.
pub fn sweep_ft(
    subcarriers: usize,
    ts: f64,
    spread_factor: f64,
    durations: &[usize],
    ft_values: &[f64],
    kinds: &[LatticeKind],
    pops: &PopsConfig,
) -> Result<SweepResult> {
    let pops = sir_pops(pops);
    let jobs: Vec<(LatticeKind, usize, f64)> = kinds
        .iter()
        .flat_map(|&k| durations.iter().flat_map(move |&d| ft_values.iter().map(move |&ft| (k, d, ft))))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(kind, d, ft)| {
            let cfg = lattice_for_ft(kind, subcarriers, ft, ts)?;
            Ok(design(&cfg, spread_factor, d, &pops)?.sinr_db())
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::new("FT", ft_values.to_vec());
    for (chunk, (kind, d)) in values
        .chunks(ft_values.len().max(1))
        .zip(kinds.iter().flat_map(|&k| durations.iter().map(move |&d| (k, d))))
    {
        out.push_series(series_name(kind, d), chunk.to_vec())?;
    }
    let ofdm = ft_values
        .iter()
        .map(|&ft| {
            let cfg = lattice_for_ft(LatticeKind::Rectangular, subcarriers, ft, ts)?;
            let cp = cfg.samples_per_symbol() - subcarriers;
            Ok(ofdm_baseline(subcarriers, cp, ts, spread_factor, pops.k_grid.as_deref(), Snr::Infinite)?.sinr_db)
        })
        .collect::<Result<Vec<_>>>()?;
    out.push_series("ofdm", ofdm)?;
    out.meta("Q", subcarriers);
    out.meta("Ts", ts);
    out.meta("BdTm", spread_factor);
    echo_pops(&mut out, &pops);
    Ok(out)
}

/// Optimized SIR against the channel spread factor on a fixed lattice.
pub fn sweep_spread(
    cfg: &LatticeConfig,
    durations: &[usize],
    spreads: &[f64],
    kinds: &[LatticeKind],
    pops: &PopsConfig,
) -> Result<SweepResult> {
    let pops = sir_pops(pops);
    let jobs: Vec<(LatticeKind, usize, f64)> = kinds
        .iter()
        .flat_map(|&k| durations.iter().flat_map(move |&d| spreads.iter().map(move |&s| (k, d, s))))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(kind, d, s)| Ok(design(&cfg.with_kind(kind)?, s, d, &pops)?.sinr_db()))
        .collect::<Result<_>>()?;
    let mut out = SweepResult::new("BdTm", spreads.to_vec());
    for (chunk, (kind, d)) in values
        .chunks(spreads.len().max(1))
        .zip(kinds.iter().flat_map(|&k| durations.iter().map(move |&d| (k, d))))
    {
        out.push_series(series_name(kind, d), chunk.to_vec())?;
    }
    let q = cfg.subcarriers();
    let cp = cfg.samples_per_symbol() - q;
    let ofdm = spreads
        .iter()
        .map(|&s| Ok(ofdm_baseline(q, cp, cfg.ts(), s, pops.k_grid.as_deref(), Snr::Infinite)?.sinr_db))
        .collect::<Result<Vec<_>>>()?;
    out.push_series("ofdm", ofdm)?;
    out.meta("Q", q);
    out.meta("N", cfg.samples_per_symbol());
    out.meta("Ts", cfg.ts());
    echo_pops(&mut out, &pops);
    Ok(out)
}

/// Optimized SIR against `FT` for several subcarrier counts; one series per
/// lattice kind, `Q` and duration.
pub fn sweep_q(
    subcarrier_counts: &[usize],
    ts: f64,
    spread_factor: f64,
    durations: &[usize],
    ft_values: &[f64],
    kinds: &[LatticeKind],
    pops: &PopsConfig,
) -> Result<SweepResult> {
    let pops = sir_pops(pops);
    let mut labels = Vec::new();
    let mut jobs = Vec::new();
    for &kind in kinds {
        for &q in subcarrier_counts {
            for &d in durations {
                labels.push(format!("{}_Q{q}_D{d}", kind.name()));
                jobs.extend(ft_values.iter().map(|&ft| (kind, q, d, ft)));
            }
        }
    }
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(kind, q, d, ft)| Ok(design(&lattice_for_ft(kind, q, ft, ts)?, spread_factor, d, &pops)?.sinr_db()))
        .collect::<Result<_>>()?;
    let mut out = SweepResult::new("FT", ft_values.to_vec());
    for (chunk, label) in values.chunks(ft_values.len().max(1)).zip(labels) {
        out.push_series(label, chunk.to_vec())?;
    }
    out.meta("Ts", ts);
    out.meta("BdTm", spread_factor);
    echo_pops(&mut out, &pops);
    Ok(out)
}

fn echo_pops(out: &mut SweepResult, pops: &PopsConfig) {
    out.meta("snr_dB", pops.snr.to_db());
    out.meta("epsilon", pops.epsilon);
    out.meta("max_iters", pops.max_iters);
    out.meta("solver", pops.solver.name());
    if let Some(h) = pops.window_search {
        out.meta("window_search", h);
    }
    if let Some(grid) = &pops.k_grid {
        out.meta("K_grid", grid.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "));
    }
}

/// Synchronization error axis for [`sensitivity_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SyncAxis {
    /// Carrier frequency errors as fractions of `F`.
    Frequency(Vec<f64>),
    /// Timing errors in samples.
    Time(Vec<i64>),
}

/// SIR of a fixed pair as the synchronization error varies; the pair is not
/// re-optimized.
pub fn sensitivity_sweep(
    name: &str,
    phi: &SampledWaveform,
    psi: &SampledWaveform,
    spec: &ScatteringSpec,
    cfg: &LatticeConfig,
    axis: &SyncAxis,
) -> Result<SweepResult> {
    let ts = cfg.ts();
    let (axis_name, axis_values, perturbed): (&str, Vec<f64>, Vec<ScatteringSpec>) = match axis {
        SyncAxis::Frequency(grid) => (
            "dnu_over_F",
            grid.clone(),
            grid.iter()
                .map(|&x| apply_sync_errors(spec, 0, x * cfg.subcarrier_spacing(), ts))
                .collect::<Result<_>>()?,
        ),
        SyncAxis::Time(grid) => (
            "dtau_over_Ts",
            grid.iter().map(|&x| x as f64).collect(),
            grid.iter().map(|&x| apply_sync_errors(spec, x, 0.0, ts)).collect::<Result<_>>()?,
        ),
    };
    let values: Vec<f64> = perturbed
        .par_iter()
        .map(|s| sinr_of_pair(phi, psi, s, cfg, Snr::Infinite))
        .collect::<Result<_>>()?;
    let mut out = SweepResult::new(axis_name, axis_values);
    out.push_series(name, values)?;
    out.meta("lattice", cfg.kind());
    out.meta("Q", cfg.subcarriers());
    out.meta("N", cfg.samples_per_symbol());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{exponential_profile, spec_for_spread, DelayProfile, DopplerSpectrum};

    #[test]
    fn ofdm_is_orthogonal_on_identity_channel() {
        let (phi, psi, cfg) = conventional_ofdm_pair(16, 4, 1e-6).unwrap();
        assert_eq!(cfg.samples_per_symbol(), 20);
        assert!((phi.norm() - 1.0).abs() < 1e-15 && (psi.norm() - 1.0).abs() < 1e-15);
        assert_eq!(psi.start(), 4);
        let snr = 100.0;
        let sinr = sinr_of_pair(&phi, &psi, &ScatteringSpec::identity(), &cfg, Snr::Finite(snr)).unwrap();
        // the receive rectangle sees Q of the N transmitted samples
        let expect = crate::to_db(snr * 16.0 / 20.0);
        assert!((sinr - expect).abs() < 1e-9, "{sinr} vs {expect}");
        let sir = sinr_of_pair(&phi, &psi, &ScatteringSpec::identity(), &cfg, Snr::Infinite).unwrap();
        assert_eq!(sir, f64::INFINITY);
    }

    #[test]
    fn cyclic_prefix_absorbs_static_delay_spread() {
        let (phi, psi, cfg) = conventional_ofdm_pair(16, 4, 1e-6).unwrap();
        let spec = ScatteringSpec::new(exponential_profile(5, 0.6).unwrap(), DopplerSpectrum::None);
        let budget = crate::solver::power_budget(&phi, &psi, &spec, &cfg, Snr::Infinite).unwrap();
        assert!(budget.interference.abs() < 1e-12 * budget.useful);
        // one path beyond the prefix breaks orthogonality
        let spec = ScatteringSpec::new(
            DelayProfile::new(vec![
                crate::channel::Path { delay: 0, power: 0.5 },
                crate::channel::Path { delay: 6, power: 0.5 },
            ])
            .unwrap(),
            DopplerSpectrum::None,
        );
        let budget = crate::solver::power_budget(&phi, &psi, &spec, &cfg, Snr::Infinite).unwrap();
        assert!(budget.interference > 1e-3 * budget.useful);
    }

    #[test]
    fn lattice_for_ft_rounds_to_even_n() {
        let cfg = lattice_for_ft(LatticeKind::Hexagonal, 16, 1.125, 1e-6).unwrap();
        assert_eq!(cfg.samples_per_symbol(), 18);
        let cfg = lattice_for_ft(LatticeKind::Hexagonal, 128, 1.25, 1e-6).unwrap();
        assert_eq!(cfg.samples_per_symbol(), 160);
        assert!(lattice_for_ft(LatticeKind::Hexagonal, 16, 0.9, 1e-6).is_err());
    }

    #[test]
    fn sweep_result_rejects_ragged_series() {
        let mut s = SweepResult::new("x", vec![1.0, 2.0]);
        assert!(s.push_series("a", vec![1.0]).is_err());
        s.push_series("a", vec![1.0, 2.0]).unwrap();
        assert!(s.push_series("a", vec![3.0, 4.0]).is_err());
        assert_eq!(s.series("a"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn zero_sync_error_reproduces_unperturbed_sir() {
        let cfg = LatticeConfig::new(LatticeKind::Hexagonal, 16, 20, 1e-6).unwrap();
        let spec = spec_for_spread(1e-2, exponential_profile(3, 0.3).unwrap(), 1e-6).unwrap();
        let phi = crate::solver::gaussian_init(60, &cfg).unwrap();
        let psi = phi.clone().with_start(1);
        let base = sinr_of_pair(&phi, &psi, &spec, &cfg, Snr::Infinite).unwrap();
        let f = sensitivity_sweep("p", &phi, &psi, &spec, &cfg, &SyncAxis::Frequency(vec![-0.1, 0.0, 0.1])).unwrap();
        let t = sensitivity_sweep("p", &phi, &psi, &spec, &cfg, &SyncAxis::Time(vec![-3, 0, 3])).unwrap();
        assert_eq!(f.series("p").unwrap()[1], base);
        assert_eq!(t.series("p").unwrap()[1], base);
        assert!(f.series("p").unwrap()[0] < base && t.series("p").unwrap()[2] < base);
    }

    #[test]
    fn sweeps_are_deterministic_and_shaped() {
        let pops = PopsConfig { max_iters: 3, window_search: Some(1), k_grid: Some(vec![2, 3]), ..Default::default() };
        let run = || sweep_ft(8, 1e-6, 1e-2, &[1, 2], &[1.25, 1.5], &[LatticeKind::Hexagonal], &pops).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.series.len(), 3);
        assert_eq!(a.series[0].0, "hexagonal_D1");
        assert_eq!(a.series[2].0, "ofdm");
        assert!(a.series.iter().all(|(_, v)| v.len() == 2));
    }
}

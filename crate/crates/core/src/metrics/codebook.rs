use rayon::prelude::*;

use super::SweepResult;
use crate::channel::{exponential_profile, spec_for_spread, ScatteringSpec};
use crate::kernels::Snr;
use crate::lattice::{LatticeConfig, SampledWaveform};
use crate::solver::{sinr_of_pair, window_offset_search, PopsConfig};
use crate::{Error, Result};

/// Waveform pair designed for one channel spread factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub design_spread: f64,
    pub phi: SampledWaveform,
    pub psi: SampledWaveform,
    pub cfg: LatticeConfig,
    /// Number of paths of the exponential delay profile.
    pub paths: usize,
    pub decay: f64,
    /// SINR of the pair on its design channel at `design_snr_db`.
    pub design_sinr_db: f64,
    pub design_snr_db: f64,
}

impl CodebookEntry {
    /// Channel with the entry's delay profile and the Doppler spread giving `spread_factor`.
    pub fn channel_at(&self, spread_factor: f64) -> Result<ScatteringSpec> {
        spec_for_spread(spread_factor, exponential_profile(self.paths, self.decay)?, self.cfg.ts())
    }

    pub fn design_channel(&self) -> Result<ScatteringSpec> {
        self.channel_at(self.design_spread)
    }

    pub fn sinr_at(&self, spread_factor: f64, snr: Snr) -> Result<f64> {
        sinr_of_pair(&self.phi, &self.psi, &self.channel_at(spread_factor)?, &self.cfg, snr)
    }
}

/// Pairs ordered by strictly increasing design spread factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<CodebookEntry>,
}

impl Codebook {
    pub fn new(entries: Vec<CodebookEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("codebook needs at least one entry".into()));
        }
        for pair in entries.windows(2) {
            if !(pair[1].design_spread > pair[0].design_spread) {
                return Err(Error::InvalidArgument(format!(
                    "design spread factors must increase strictly: {} then {}",
                    pair[0].design_spread, pair[1].design_spread
                )));
            }
        }
        for e in &entries {
            for w in [&e.phi, &e.psi] {
                if (w.norm_sq() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "entry at {} is not unit norm (‖w‖² = {})",
                        e.design_spread,
                        w.norm_sq()
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    /// Entry whose design spread factor is closest in log scale to `spread_factor`.
    pub fn select(&self, spread_factor: f64) -> &CodebookEntry {
        let target = spread_factor.ln();
        self.entries
            .iter()
            .min_by(|a, b| {
                (a.design_spread.ln() - target).abs().total_cmp(&(b.design_spread.ln() - target).abs())
            })
            .expect("codebook is nonempty")
    }
}

/// Designs one pair per spread factor on a common exponential delay profile
/// of `paths` paths; only the Doppler spread changes between entries.
pub fn build_codebook(
    cfg: &LatticeConfig,
    d_over_t: usize,
    spreads: &[f64],
    paths: usize,
    decay: f64,
    pops: &PopsConfig,
) -> Result<Codebook> {
    if d_over_t == 0 {
        return Err(Error::InvalidArgument("D/T must be a positive integer".into()));
    }
    let len = d_over_t * cfg.samples_per_symbol();
    let profile = exponential_profile(paths, decay)?;
    let entries = spreads
        .par_iter()
        .map(|&s| {
            let spec = spec_for_spread(s, profile.clone(), cfg.ts())?;
            let r = window_offset_search(&spec, cfg, pops, len, len)?;
            Ok(CodebookEntry {
                design_spread: s,
                phi: r.phi,
                psi: r.psi,
                cfg: *cfg,
                paths,
                decay,
                design_sinr_db: r.final_sinr_db,
                design_snr_db: pops.snr.to_db(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(entries)
}

pub fn entry_series_name(spread_factor: f64) -> String {
    format!("design_{spread_factor:e}")
}

/// SIR of every fixed codebook pair across `grid`, plus the upper envelope.
pub fn mismatch_matrix(codebook: &Codebook, grid: &[f64]) -> Result<SweepResult> {
    let rows: Vec<Vec<f64>> = codebook
        .entries()
        .par_iter()
        .map(|e| grid.iter().map(|&s| e.sinr_at(s, Snr::Infinite)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut out = SweepResult::new("BdTm", grid.to_vec());
    let envelope = (0..grid.len()).map(|i| rows.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    for (e, row) in codebook.entries().iter().zip(rows) {
        out.push_series(entry_series_name(e.design_spread), row)?;
    }
    out.push_series("envelope", envelope)?;
    let first = &codebook.entries()[0];
    out.meta("lattice", first.cfg.kind());
    out.meta("Q", first.cfg.subcarriers());
    out.meta("N", first.cfg.samples_per_symbol());
    out.meta("paths", first.paths);
    out.meta("decay", first.decay);
    Ok(out)
}

//! Command registry. Each command reads a validated descriptor and writes
//! its artifacts into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use popslab::channel::{default_decay, ScatteringSpec};
use popslab::kernels::Snr;
use popslab::lattice::{LatticeConfig, LatticeKind, SampledWaveform};
use popslab::mc_oracle::simulate_link;
use popslab::metrics::{
    aggregate_psd, build_codebook, design, mismatch_matrix, ofdm_baseline, psd, sensitivity_sweep, sweep_ft,
    sweep_q, sweep_spread, Codebook, CodebookEntry, SweepResult, SyncAxis,
};
use popslab::solver::{default_k_grid, sinr_of_pair, window_offset_search, PopsResult};

use crate::descriptor::{ChannelParams, ExperimentDescriptor};
use crate::formats::{codebook_from_text, codebook_to_text, metadata_text, sweep_to_csv};
use crate::CliError;

/// Largest tolerated gap between the analytic and simulated SINR.
pub const VALIDATE_TOLERANCE_DB: f64 = 0.2;

pub struct Context<'a> {
    pub descriptor: &'a ExperimentDescriptor,
    pub out_dir: &'a Path,
    pub seed: u64,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// Set when a tolerance check failed.
    pub breach: Option<String>,
}

pub trait Command: Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError>;
}

struct Optimize;
struct Sweep;
struct Psd;
struct Sensitivity;
struct CodebookCmd;
struct Validate;

static COMMANDS: [&dyn Command; 6] = [&Optimize, &Sweep, &Psd, &Sensitivity, &CodebookCmd, &Validate];

pub fn commands() -> &'static [&'static dyn Command] {
    &COMMANDS
}

pub fn command_by_name(name: &str) -> Option<&'static dyn Command> {
    COMMANDS.iter().copied().find(|c| c.name() == name)
}

fn write(ctx: &Context<'_>, outcome: &mut Outcome, name: &str, contents: &str) -> Result<(), CliError> {
    let path = ctx.out_dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    outcome.files.push(path);
    Ok(())
}

fn write_sweep(ctx: &Context<'_>, outcome: &mut Outcome, stem: &str, sweep: &SweepResult) -> Result<(), CliError> {
    write(ctx, outcome, &format!("{stem}.csv"), &sweep_to_csv(sweep))?;
    write(ctx, outcome, &format!("{stem}.meta"), &metadata_text(sweep))
}

/// An optimized (or loaded) pair with the channel it is evaluated on.
struct Pair {
    entry: CodebookEntry,
    spec: ScatteringSpec,
    trace: Option<Vec<f64>>,
}

fn optimize_pair(d: &ExperimentDescriptor, cfg: &LatticeConfig) -> Result<Pair, CliError> {
    let ts = cfg.ts();
    let len = d.d_over_t * cfg.samples_per_symbol();
    let (result, spec, spread, paths, decay): (PopsResult, ScatteringSpec, f64, usize, f64) = match &d.channel {
        ChannelParams::Spread(s) => {
            let des = design(cfg, *s, d.d_over_t, &d.pops)?;
            let k = des.paths();
            (des.result, des.spec, *s, k, default_decay(k))
        }
        ChannelParams::Explicit { paths, decay, .. } => {
            let spec = d.channel.explicit_spec(ts).expect("explicit channel")?;
            let r = window_offset_search(&spec, cfg, &d.pops, len, len)?;
            (r, spec, d.channel.spread_factor(ts), *paths, *decay)
        }
    };
    let entry = CodebookEntry {
        design_spread: spread,
        phi: result.phi,
        psi: result.psi,
        cfg: *cfg,
        paths,
        decay,
        design_sinr_db: result.final_sinr_db,
        design_snr_db: d.pops.snr.to_db(),
    };
    Ok(Pair { entry, spec, trace: Some(result.sinr_trace) })
}

fn load_codebook(path: &Path) -> Result<Codebook, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    codebook_from_text(&text)
}

/// Pair for `kind`: from the input codebook when one is given, else optimized.
fn pair_for(d: &ExperimentDescriptor, kind: LatticeKind) -> Result<Pair, CliError> {
    let cfg = d.lattice.with_kind(kind)?;
    match &d.codebook {
        None => optimize_pair(d, &cfg),
        Some(path) => {
            let book = load_codebook(path)?;
            let spread = d.channel.spread_factor(cfg.ts());
            let entry = book
                .entries()
                .iter()
                .filter(|e| e.cfg.kind() == kind)
                .min_by(|a, b| {
                    (a.design_spread.ln() - spread.ln()).abs().total_cmp(&(b.design_spread.ln() - spread.ln()).abs())
                })
                .cloned()
                .ok_or_else(|| CliError::Format(format!("{} has no {kind} entry", path.display())))?;
            let spec = match d.channel.explicit_spec(cfg.ts()) {
                Some(spec) => spec?,
                None => entry.channel_at(spread)?,
            };
            Ok(Pair { entry, spec, trace: None })
        }
    }
}

fn waveforms_csv(phi: &SampledWaveform, psi: &SampledWaveform) -> SweepResult {
    let lo = phi.start().min(psi.start());
    let hi = phi.end().max(psi.end());
    let mut s = SweepResult::new("sample", (lo..hi).map(|q| q as f64).collect());
    let parts = |w: &SampledWaveform| -> (Vec<f64>, Vec<f64>) {
        (lo..hi).map(|q| (w.at(q).re, w.at(q).im)).unzip()
    };
    let (pr, pi) = parts(phi);
    let (sr, si) = parts(psi);
    for (name, v) in [("phi_re", pr), ("phi_im", pi), ("psi_re", sr), ("psi_im", si)] {
        s.push_series(name, v).expect("series share the axis");
    }
    s
}

impl Command for Optimize {
    fn name(&self) -> &'static str {
        "optimize"
    }

    fn about(&self) -> &'static str {
        "design a waveform pair; writes trace.csv, waveforms.csv and codebook.popscb"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let pair = optimize_pair(d, &d.lattice)?;
        let mut out = Outcome::default();
        let trace = pair.trace.clone().unwrap_or_default();
        let mut t = SweepResult::new("half_step", (1..=trace.len()).map(|i| i as f64).collect());
        t.push_series("sinr_dB", trace)?;
        t.meta("lattice", d.lattice.kind());
        t.meta("K", pair.entry.paths);
        write_sweep(ctx, &mut out, "trace", &t)?;
        write(ctx, &mut out, "waveforms.csv", &sweep_to_csv(&waveforms_csv(&pair.entry.phi, &pair.entry.psi)))?;
        out.summary = format!(
            "{} lattice, K = {}: SINR {} dB",
            d.lattice.kind(),
            pair.entry.paths,
            pair.entry.design_sinr_db
        );
        let book = Codebook::new(vec![pair.entry])?;
        write(ctx, &mut out, "codebook.popscb", &codebook_to_text(&book))?;
        Ok(out)
    }
}

fn require_spread(d: &ExperimentDescriptor, what: &str) -> Result<f64, CliError> {
    match d.channel {
        ChannelParams::Spread(s) => Ok(s),
        ChannelParams::Explicit { .. } => Err(CliError::Config {
            key: "channel.BdTm".into(),
            message: format!("{what} needs a balanced channel given by BdTm"),
        }),
    }
}

fn require_values(d: &ExperimentDescriptor) -> Result<&[f64], CliError> {
    if d.sweep.values.is_empty() {
        return Err(CliError::Config { key: "sweep.values".into(), message: "missing sweep values".into() });
    }
    Ok(&d.sweep.values)
}

impl Command for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn about(&self) -> &'static str {
        "optimized SIR against FT, the spread factor or Q (sweep.axis = ft | spread | q); writes sweep.csv"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let s = &d.sweep;
        let cfg = &d.lattice;
        let result = match s.axis.as_deref() {
            Some("ft") => sweep_ft(
                cfg.subcarriers(),
                cfg.ts(),
                require_spread(d, "sweep ft")?,
                &s.durations,
                require_values(d)?,
                &s.kinds,
                &d.pops,
            )?,
            Some("spread") => sweep_spread(cfg, &s.durations, require_values(d)?, &s.kinds, &d.pops)?,
            Some("q") => sweep_q(
                &s.q_values,
                cfg.ts(),
                require_spread(d, "sweep q")?,
                &s.durations,
                require_values(d)?,
                &s.kinds,
                &d.pops,
            )?,
            other => {
                return Err(CliError::Config {
                    key: "sweep.axis".into(),
                    message: format!("expected ft, spread or q, got {other:?}"),
                })
            }
        };
        let mut out = Outcome::default();
        write_sweep(ctx, &mut out, "sweep", &result)?;
        out.summary = format!("{} series over {} points", result.series.len(), result.axis_values.len());
        Ok(out)
    }
}

impl Command for Psd {
    fn name(&self) -> &'static str {
        "psd"
    }

    fn about(&self) -> &'static str {
        "single-subcarrier and aggregated spectra of the transmit pulses; writes psd.csv"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let s = &d.sweep;
        let mut result: Option<SweepResult> = None;
        for &kind in &s.kinds {
            let pair = pair_for(d, kind)?;
            let cfg = pair.entry.cfg;
            let single = psd(&pair.entry.phi, cfg.subcarriers(), s.oversample)?;
            let agg = aggregate_psd(&pair.entry.phi, &cfg, s.subcarriers, s.oversample)?;
            let mut part = SweepResult::new("f_over_F", single.freq.clone());
            part.push_series(kind.name(), single.db)?;
            part.push_series(format!("{}_aggregate", kind.name()), agg.db)?;
            match &mut result {
                None => result = Some(part),
                Some(r) => r.merge(part)?,
            }
        }
        let mut result = result.ok_or_else(|| CliError::Config {
            key: "sweep.kinds".into(),
            message: "no lattice kinds given".into(),
        })?;
        result.meta("oversample", s.oversample);
        result.meta("aggregated_subcarriers", s.subcarriers);
        let mut out = Outcome::default();
        write_sweep(ctx, &mut out, "psd", &result)?;
        out.summary = format!("{} spectra over {} bins", result.series.len(), result.axis_values.len());
        Ok(out)
    }
}

impl Command for Sensitivity {
    fn name(&self) -> &'static str {
        "sensitivity"
    }

    fn about(&self) -> &'static str {
        "SIR of fixed pairs under timing or carrier errors (sweep.axis = freq | time); writes sensitivity.csv"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let values = require_values(d)?;
        let axis = match d.sweep.axis.as_deref() {
            Some("freq") => SyncAxis::Frequency(values.to_vec()),
            Some("time") => {
                if values.iter().any(|v| v.fract() != 0.0) {
                    return Err(CliError::Config {
                        key: "sweep.values".into(),
                        message: "timing errors are whole samples".into(),
                    });
                }
                SyncAxis::Time(values.iter().map(|&v| v as i64).collect())
            }
            other => {
                return Err(CliError::Config {
                    key: "sweep.axis".into(),
                    message: format!("expected freq or time, got {other:?}"),
                })
            }
        };
        let mut result: Option<SweepResult> = None;
        for &kind in &d.sweep.kinds {
            let pair = pair_for(d, kind)?;
            let e = &pair.entry;
            let part = sensitivity_sweep(kind.name(), &e.phi, &e.psi, &pair.spec, &e.cfg, &axis)?;
            match &mut result {
                None => result = Some(part),
                Some(r) => r.merge(part)?,
            }
        }
        let cfg = &d.lattice;
        let q = cfg.subcarriers();
        let cp = cfg.samples_per_symbol() - q;
        let spread = d.channel.spread_factor(cfg.ts());
        let ofdm = ofdm_baseline(q, cp, cfg.ts(), spread, d.pops.k_grid.as_deref(), Snr::Infinite)?;
        let spec = match d.channel.explicit_spec(cfg.ts()) {
            Some(spec) => spec?,
            None => ofdm.spec.clone(),
        };
        let part = sensitivity_sweep("ofdm", &ofdm.phi, &ofdm.psi, &spec, &ofdm.cfg, &axis)?;
        let result = match result {
            None => part,
            Some(mut r) => {
                r.merge(part)?;
                r
            }
        };
        let mut out = Outcome::default();
        write_sweep(ctx, &mut out, "sensitivity", &result)?;
        out.summary = format!("{} series over {} errors", result.series.len(), result.axis_values.len());
        Ok(out)
    }
}

impl Command for CodebookCmd {
    fn name(&self) -> &'static str {
        "codebook"
    }

    fn about(&self) -> &'static str {
        "pairs for several spread factors (sweep.spreads) and their mismatch losses; writes codebook.popscb and mismatch.csv"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let mut spreads = d.sweep.spreads.clone();
        if spreads.is_empty() {
            return Err(CliError::Config { key: "sweep.spreads".into(), message: "missing design spreads".into() });
        }
        spreads.sort_by(f64::total_cmp);
        let cfg = &d.lattice;
        let (paths, decay) = match d.channel {
            ChannelParams::Explicit { paths, decay, .. } => (paths, decay),
            ChannelParams::Spread(s) => {
                let grid = default_k_grid(s, cfg);
                let k = grid[grid.len() / 2];
                (k, default_decay(k))
            }
        };
        let book = build_codebook(cfg, d.d_over_t, &spreads, paths, decay, &d.pops)?;
        let eval = if d.sweep.values.is_empty() { spreads.clone() } else { d.sweep.values.clone() };
        let m = mismatch_matrix(&book, &eval)?;
        let mut out = Outcome::default();
        write(ctx, &mut out, "codebook.popscb", &codebook_to_text(&book))?;
        write_sweep(ctx, &mut out, "mismatch", &m)?;
        out.summary = format!("{} entries, K = {paths}", book.entries().len());
        Ok(out)
    }
}

impl Command for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }

    fn about(&self) -> &'static str {
        "Monte-Carlo check of the analytic SINR of a pair; writes validate.csv and fails on a tolerance breach"
    }

    fn run(&self, ctx: &Context<'_>) -> Result<Outcome, CliError> {
        let d = ctx.descriptor;
        let pair = pair_for(d, d.lattice.kind())?;
        let e = &pair.entry;
        let snr = d.pops.snr;
        let analytic = sinr_of_pair(&e.phi, &e.psi, &pair.spec, &e.cfg, snr)?;
        let est = simulate_link(&e.phi, &e.psi, &pair.spec, &e.cfg, snr, d.sweep.trials, ctx.seed)?;
        let gap = est.sinr_db - analytic;
        let mut s = SweepResult::new("trials", vec![est.trials as f64]);
        for (name, v) in [
            ("analytic_dB", analytic),
            ("simulated_dB", est.sinr_db),
            ("ci95_dB", est.ci95_db),
            ("gap_dB", gap),
        ] {
            s.push_series(name, vec![v])?;
        }
        s.meta("seed", ctx.seed);
        s.meta("tolerance_dB", VALIDATE_TOLERANCE_DB);
        let mut out = Outcome::default();
        write_sweep(ctx, &mut out, "validate", &s)?;
        out.summary = format!("analytic {analytic} dB, simulated {} dB (gap {gap} dB)", est.sinr_db);
        if !(gap.abs() <= VALIDATE_TOLERANCE_DB) {
            out.breach = Some(format!("|gap| = {} dB exceeds {VALIDATE_TOLERANCE_DB} dB", gap.abs()));
        }
        Ok(out)
    }
}

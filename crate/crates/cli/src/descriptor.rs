//! Experiment descriptors: a flat key/value document with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! command = optimize
//!
//! [lattice]
//! kind = hexagonal
//! Q = 128
//! CP = 32
//!
//! [channel]
//! BdTm = 0.01
//!
//! [pops]
//! D_over_T = 7
//! snr_dB = inf
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use popslab::channel::{default_decay, exponential_profile, DopplerSpectrum, ScatteringSpec};
use popslab::kernels::Snr;
use popslab::lattice::{LatticeConfig, LatticeKind};
use popslab::solver::{solver_by_name, PopsConfig};

use crate::CliError;

/// Every accepted `section.key`; top-level keys have an empty section.
const KEYS: &[&str] = &[
    ".command",
    "lattice.kind",
    "lattice.Q",
    "lattice.N",
    "lattice.CP",
    "lattice.Ts",
    "channel.BdTm",
    "channel.f_D",
    "channel.K",
    "channel.b",
    "pops.snr_dB",
    "pops.epsilon",
    "pops.max_iters",
    "pops.D_over_T",
    "pops.window_search",
    "pops.K_grid",
    "pops.solver",
    "sweep.axis",
    "sweep.values",
    "sweep.kinds",
    "sweep.durations",
    "sweep.Q_values",
    "sweep.spreads",
    "sweep.oversample",
    "sweep.subcarriers",
    "sweep.trials",
    "input.codebook",
    "output.path",
    "output.seed",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelParams {
    /// Balanced channel with spread factor `B_d T_m`.
    Spread(f64),
    /// Exponential profile of `paths` paths with decay `decay` and Jakes Doppler `max_doppler` (Hz).
    Explicit { max_doppler: f64, paths: usize, decay: f64 },
}

impl ChannelParams {
    /// `B_d T_m` of the channel; explicit channels use `2 f_D (K - 1) Ts`.
    pub fn spread_factor(&self, ts: f64) -> f64 {
        match *self {
            ChannelParams::Spread(s) => s,
            ChannelParams::Explicit { max_doppler, paths, .. } => 2.0 * max_doppler * (paths - 1) as f64 * ts,
        }
    }

    pub fn explicit_spec(&self, ts: f64) -> Option<popslab::Result<ScatteringSpec>> {
        match *self {
            ChannelParams::Spread(_) => None,
            ChannelParams::Explicit { max_doppler, paths, decay } => Some((|| {
                let spec = ScatteringSpec::new(exponential_profile(paths, decay)?, DopplerSpectrum::Jakes { max_doppler });
                spec.validate(ts)?;
                Ok(spec)
            })()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub axis: Option<String>,
    pub values: Vec<f64>,
    pub kinds: Vec<LatticeKind>,
    pub durations: Vec<usize>,
    pub q_values: Vec<usize>,
    pub spreads: Vec<f64>,
    pub oversample: usize,
    pub subcarriers: usize,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentDescriptor {
    pub command: Option<String>,
    pub lattice: LatticeConfig,
    pub channel: ChannelParams,
    pub pops: PopsConfig,
    pub d_over_t: usize,
    pub sweep: SweepParams,
    pub codebook: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

struct Entry {
    value: String,
    line: usize,
}

struct Fields(BTreeMap<String, Entry>);

impl Fields {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.0.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| semantic(key, format!("cannot parse {:?}", e.value))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| semantic(key, format!("cannot parse list item {s:?}"))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }
}

fn semantic(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.trim_start_matches('.').to_string(), message: message.into() }
}

fn syntax(line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { line, message: message.into() }
}

fn tokenize(text: &str) -> Result<Fields, CliError> {
    let mut section = String::new();
    let mut fields: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| syntax(line, "unterminated section header"))?.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax(line, format!("bad section name {name:?}")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(syntax(line, "empty key"));
        }
        let full = format!("{section}.{key}");
        if !KEYS.contains(&full.as_str()) {
            let shown = full.trim_start_matches('.');
            return Err(syntax(line, format!("unknown key `{shown}`")));
        }
        if let Some(prev) = fields.get(&full) {
            return Err(syntax(
                line,
                format!("duplicate key `{}` (first set on line {})", full.trim_start_matches('.'), prev.line),
            ));
        }
        fields.insert(full, Entry { value: value.to_string(), line });
    }
    Ok(Fields(fields))
}

fn parse_kind(key: &str, s: &str) -> Result<LatticeKind, CliError> {
    LatticeKind::from_name(s).ok_or_else(|| semantic(key, format!("unknown lattice kind {s:?}")))
}

/// Parses and validates a descriptor.
pub fn parse_descriptor(text: &str) -> Result<ExperimentDescriptor, CliError> {
    let mut f = tokenize(text)?;
    let command = f.take(".command").map(|e| e.value);

    let kind = match f.take("lattice.kind") {
        Some(e) => parse_kind("lattice.kind", &e.value)?,
        None => LatticeKind::Hexagonal,
    };
    let q: usize = f.parse("lattice.Q")?.ok_or_else(|| semantic("lattice.Q", "missing"))?;
    let n: Option<usize> = f.parse("lattice.N")?;
    let cp: Option<usize> = f.parse("lattice.CP")?;
    let (n, n_key) = match (n, cp) {
        (Some(n), None) => (n, "lattice.N"),
        (None, Some(cp)) => (q + cp, "lattice.CP"),
        (Some(_), Some(_)) => return Err(semantic("lattice.CP", "give either N or CP, not both")),
        (None, None) => return Err(semantic("lattice.N", "missing (or give CP)")),
    };
    let ts: f64 = f.parse("lattice.Ts")?.unwrap_or(1e-6);
    let lattice = LatticeConfig::new(kind, q, n, ts).map_err(|e| semantic(n_key, e.to_string()))?;

    let spread: Option<f64> = f.parse("channel.BdTm")?;
    let fd: Option<f64> = f.parse("channel.f_D")?;
    let paths: Option<usize> = f.parse("channel.K")?;
    let decay: Option<f64> = f.parse("channel.b")?;
    let channel = match (spread, fd, paths) {
        (Some(s), None, None) if decay.is_none() => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(semantic("channel.BdTm", "must be positive"));
            }
            ChannelParams::Spread(s)
        }
        (None, Some(fd), Some(k)) => {
            if k < 2 {
                return Err(semantic("channel.K", "need at least two paths"));
            }
            let decay = decay.unwrap_or_else(|| default_decay(k));
            if !(decay > 0.0 && decay <= 1.0) {
                return Err(semantic("channel.b", "decay must lie in (0, 1]"));
            }
            let params = ChannelParams::Explicit { max_doppler: fd, paths: k, decay };
            if let Some(Err(e)) = params.explicit_spec(ts) {
                return Err(semantic("channel.f_D", e.to_string()));
            }
            params
        }
        (Some(_), _, _) => return Err(semantic("channel.BdTm", "give either BdTm or f_D/K/b, not both")),
        (None, None, None) if decay.is_none() => return Err(semantic("channel.BdTm", "missing channel")),
        (None, _, _) => return Err(semantic("channel.f_D", "explicit channels need both f_D and K")),
    };

    let mut pops = PopsConfig::default();
    if let Some(e) = f.take("pops.snr_dB") {
        pops.snr = if e.value.eq_ignore_ascii_case("inf") {
            Snr::Infinite
        } else {
            let db: f64 = e.value.parse().map_err(|_| semantic("pops.snr_dB", format!("cannot parse {:?}", e.value)))?;
            if !db.is_finite() {
                return Err(semantic("pops.snr_dB", "must be finite or `inf`"));
            }
            Snr::from_db(db)
        };
    }
    if let Some(eps) = f.parse("pops.epsilon")? {
        pops.epsilon = eps;
    }
    if let Some(it) = f.parse("pops.max_iters")? {
        pops.max_iters = it;
    }
    pops.window_search = f.parse("pops.window_search")?;
    pops.k_grid = f.list("pops.K_grid")?;
    if let Some(e) = f.take("pops.solver") {
        pops.solver = solver_by_name(&e.value).ok_or_else(|| semantic("pops.solver", format!("unknown solver {:?}", e.value)))?;
    }
    pops.validate().map_err(|e| semantic("pops", e.to_string()))?;
    let d_over_t: usize = f.parse("pops.D_over_T")?.unwrap_or(3);
    if d_over_t == 0 {
        return Err(semantic("pops.D_over_T", "must be a positive integer"));
    }

    let kinds = match f.take("sweep.kinds") {
        Some(e) => e
            .value
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| parse_kind("sweep.kinds", s))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![kind],
    };
    let sweep = SweepParams {
        axis: f.take("sweep.axis").map(|e| e.value),
        values: f.list("sweep.values")?.unwrap_or_default(),
        kinds,
        durations: f.list("sweep.durations")?.unwrap_or_else(|| vec![d_over_t]),
        q_values: f.list("sweep.Q_values")?.unwrap_or_else(|| vec![q]),
        spreads: f.list("sweep.spreads")?.unwrap_or_default(),
        oversample: f.parse("sweep.oversample")?.unwrap_or(popslab::metrics::DEFAULT_OVERSAMPLE),
        subcarriers: f.parse("sweep.subcarriers")?.unwrap_or(65),
        trials: f.parse("sweep.trials")?.unwrap_or(10_000),
    };
    if sweep.durations.contains(&0) {
        return Err(semantic("sweep.durations", "durations must be positive integers"));
    }

    let codebook = f.take("input.codebook").map(|e| PathBuf::from(e.value));
    let output = f.take("output.path").map(|e| PathBuf::from(e.value));
    let seed = f.parse("output.seed")?.unwrap_or(0);
    debug_assert!(f.0.is_empty(), "every accepted key is consumed");

    Ok(ExperimentDescriptor { command, lattice, channel, pops, d_over_t, sweep, codebook, output, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "command=optimize\n[lattice]\nkind=hexagonal\nQ=128\nCP=32\n[channel]\nBdTm=0.01\n[pops]\nD_over_T=7\nsnr_dB=inf\n";

    #[test]
    fn minimal_descriptor() {
        let d = parse_descriptor(MINIMAL).unwrap();
        assert_eq!(d.command.as_deref(), Some("optimize"));
        assert_eq!(d.lattice.samples_per_symbol(), 160);
        assert_eq!(d.channel, ChannelParams::Spread(0.01));
        assert_eq!(d.d_over_t, 7);
        assert_eq!(d.pops.snr, Snr::Infinite);
        assert_eq!(d.pops.max_iters, 200);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\n[lattice]  # trailing\nQ = 16 # sixteen\nN = 20\n[channel]\nf_D = 50\nK = 3\n";
        let d = parse_descriptor(text).unwrap();
        match d.channel {
            ChannelParams::Explicit { paths, decay, .. } => {
                assert_eq!(paths, 3);
                assert_eq!(decay, default_decay(3));
            }
            _ => panic!("expected explicit channel"),
        }
    }

    #[test]
    fn odd_n_rejected_for_hexagonal() {
        let err = parse_descriptor("[lattice]\nQ=16\nN=21\n[channel]\nBdTm=0.01\n").unwrap_err();
        assert!(matches!(&err, CliError::Config { key, .. } if key == "lattice.N"), "{err}");
        assert!(parse_descriptor("[lattice]\nkind=rectangular\nQ=16\nN=21\n[channel]\nBdTm=0.01\n").is_ok());
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_descriptor("[lattice]\nQ=16\nN=20\nQ=18\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, CliError::Parse { line: 4, .. }));
        assert!(msg.contains("line 2") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn unknown_key_and_syntax_errors_carry_lines() {
        assert!(matches!(parse_descriptor("[lattice]\nQ=16\nn=20\n"), Err(CliError::Parse { line: 3, .. })));
        assert!(matches!(parse_descriptor("[pops\n"), Err(CliError::Parse { line: 1, .. })));
        assert!(matches!(parse_descriptor("[lattice]\nQ 16\n"), Err(CliError::Parse { line: 2, .. })));
    }

    #[test]
    fn exactly_one_channel_parameterization() {
        let base = "[lattice]\nQ=16\nN=20\n[channel]\n";
        assert!(parse_descriptor(&format!("{base}BdTm=0.01\nf_D=10\nK=3\n")).is_err());
        assert!(parse_descriptor(&format!("{base}f_D=10\n")).is_err());
        assert!(parse_descriptor("[lattice]\nQ=16\nN=20\n").is_err());
        assert!(parse_descriptor(&format!("{base}BdTm=0.01\nb=0.5\n")).is_err());
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let base = "[lattice]\nQ=16\nN=20\n[channel]\nBdTm=0.01\n";
        for (extra, key) in [
            ("[pops]\nD_over_T=0\n", "pops.D_over_T"),
            ("[pops]\nsolver=newton\n", "pops.solver"),
            ("[pops]\nsnr_dB=loud\n", "pops.snr_dB"),
            ("[sweep]\nkinds=hexagonal triangular\n", "sweep.kinds"),
        ] {
            match parse_descriptor(&format!("{base}{extra}")) {
                Err(CliError::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{extra}: {other:?}"),
            }
        }
    }
}

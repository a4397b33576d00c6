//! CSV output and the `POPSCB v1` codebook text format.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit for bit. Infinities are written as `inf`.

use std::fmt::Write as _;

use popslab::lattice::{LatticeConfig, LatticeKind, SampledWaveform};
use popslab::metrics::{Codebook, CodebookEntry, SweepResult};
use popslab::C64;

use crate::CliError;

pub const CODEBOOK_HEADER: &str = "POPSCB v1";

/// Shortest decimal that parses back to exactly `v`.
pub fn fmt_float(v: f64) -> String {
    let s = format!("{v:?}");
    match s.strip_suffix(".0") {
        Some(t) => t.to_string(),
        None => s,
    }
}

/// `axis,<series>...` header followed by one row per axis value.
pub fn sweep_to_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("axis");
    for (name, _) in &sweep.series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, x) in sweep.axis_values.iter().enumerate() {
        out.push_str(&fmt_float(*x));
        for (_, values) in &sweep.series {
            out.push(',');
            out.push_str(&fmt_float(values[i]));
        }
        out.push('\n');
    }
    out
}

/// Configuration echo as `key = value` lines.
pub fn metadata_text(sweep: &SweepResult) -> String {
    let mut out = format!("axis_name = {}\n", sweep.axis_name);
    for (k, v) in &sweep.metadata {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn push_waveform(out: &mut String, label: &str, w: &SampledWaveform) {
    let _ = writeln!(out, "{label} {} {}", w.start(), w.len());
    for s in w.samples() {
        let _ = writeln!(out, "{},{}", fmt_float(s.re), fmt_float(s.im));
    }
}

pub fn codebook_to_text(book: &Codebook) -> String {
    let mut out = format!("{CODEBOOK_HEADER}\nentries {}\n", book.entries().len());
    for e in book.entries() {
        let _ = writeln!(out, "design_BdTm {}", fmt_float(e.design_spread));
        let _ = writeln!(
            out,
            "lattice {} {} {}",
            e.cfg.kind(),
            e.cfg.subcarriers(),
            e.cfg.samples_per_symbol()
        );
        let _ = writeln!(out, "Ts {}", fmt_float(e.cfg.ts()));
        let _ = writeln!(out, "profile {} {}", e.paths, fmt_float(e.decay));
        let _ = writeln!(out, "design_snr_dB {}", fmt_float(e.design_snr_db));
        let _ = writeln!(out, "design_sinr_dB {}", fmt_float(e.design_sinr_db));
        push_waveform(&mut out, "phi", &e.phi);
        push_waveform(&mut out, "psi", &e.psi);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), CliError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .ok_or_else(|| CliError::Format(format!("unexpected end of codebook, expected {what}")))
    }

    /// Next line, which must read `tag <fields...>`.
    fn tagged(&mut self, tag: &str, count: usize) -> Result<(usize, Vec<&'a str>), CliError> {
        let (line, text) = self.next(tag)?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(bad(line, format!("expected `{tag}`")));
        }
        let fields: Vec<&str> = parts.collect();
        if fields.len() != count {
            return Err(bad(line, format!("`{tag}` takes {count} fields, found {}", fields.len())));
        }
        Ok((line, fields))
    }
}

fn bad(line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Format(format!("codebook line {line}: {message}"))
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|_| bad(line, format!("cannot parse {s:?}")))
}

fn read_waveform(lines: &mut Lines<'_>, tag: &str, ts: f64) -> Result<SampledWaveform, CliError> {
    let (line, f) = lines.tagged(tag, 2)?;
    let start: i64 = num(line, f[0])?;
    let len: usize = num(line, f[1])?;
    let mut samples = Vec::with_capacity(len);
    for _ in 0..len {
        let (line, text) = lines.next("a sample")?;
        let (re, im) = text.split_once(',').ok_or_else(|| bad(line, "expected `re,im`"))?;
        samples.push(C64::new(num(line, re.trim())?, num(line, im.trim())?));
    }
    SampledWaveform::new(samples, ts, start).map_err(|e| bad(line, e))
}

pub fn codebook_from_text(text: &str) -> Result<Codebook, CliError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (line, header) = lines.next("the header")?;
    if header != CODEBOOK_HEADER {
        return Err(bad(line, format!("expected `{CODEBOOK_HEADER}`, found {header:?}")));
    }
    let (line, f) = lines.tagged("entries", 1)?;
    let count: usize = num(line, f[0])?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, f) = lines.tagged("design_BdTm", 1)?;
        let design_spread: f64 = num(line, f[0])?;
        let (lline, lf) = lines.tagged("lattice", 3)?;
        let kind = LatticeKind::from_name(lf[0]).ok_or_else(|| bad(lline, format!("unknown lattice {:?}", lf[0])))?;
        let (line, f) = lines.tagged("Ts", 1)?;
        let ts: f64 = num(line, f[0])?;
        let cfg = LatticeConfig::new(kind, num(lline, lf[1])?, num(lline, lf[2])?, ts).map_err(|e| bad(lline, e))?;
        let (line, f) = lines.tagged("profile", 2)?;
        let paths: usize = num(line, f[0])?;
        let decay: f64 = num(line, f[1])?;
        let (line, f) = lines.tagged("design_snr_dB", 1)?;
        let design_snr_db: f64 = num(line, f[0])?;
        let (line, f) = lines.tagged("design_sinr_dB", 1)?;
        let design_sinr_db: f64 = num(line, f[0])?;
        let phi = read_waveform(&mut lines, "phi", ts)?;
        let psi = read_waveform(&mut lines, "psi", ts)?;
        entries.push(CodebookEntry { design_spread, phi, psi, cfg, paths, decay, design_sinr_db, design_snr_db });
    }
    if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(bad(i + 1, format!("trailing content {extra:?}")));
    }
    Codebook::new(entries).map_err(|e| CliError::Format(e.to_string()))
}

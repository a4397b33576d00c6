//! Time-frequency lattice geometry and sampled waveforms.
//!
//! Waveforms live on a global sample grid. A [`SampledWaveform`] is a finite
//! run of samples plus the global index of its first sample; everything
//! outside that run is zero. Lattice copies are produced by moving the start
//! index and applying the subcarrier phase `e^{j2π m q / Q}` at each global
//! index `q`.

use std::f64::consts::PI;
use std::fmt;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    /// Quincunx layout: odd subcarriers are offset by half a symbol period.
    Hexagonal,
    Rectangular,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        self.geometry().name()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        geometry_by_name(name).map(|g| g.kind())
    }

    pub fn geometry(self) -> &'static dyn LatticeGeometry {
        match self {
            LatticeKind::Hexagonal => &Hexagonal,
            LatticeKind::Rectangular => &Rectangular,
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Subcarriers `first, first + step, ...` below `Q` whose copies share the
/// time offset `offset + nN`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftClass {
    pub offset: i64,
    pub first_subcarrier: usize,
    pub subcarrier_step: usize,
}

/// Geometry of a lattice family. Implementations are registered by name and
/// selected at runtime through [`geometry_by_name`] or [`LatticeKind::geometry`].
pub trait LatticeGeometry: Send + Sync + fmt::Debug {
    fn kind(&self) -> LatticeKind;

    fn name(&self) -> &'static str;

    /// Checks the lattice-specific constraints on `Q` and `N`.
    fn validate(&self, subcarriers: usize, samples_per_symbol: usize) -> Result<()>;

    /// Time shift, in samples, of lattice point `(m, n)`.
    fn time_shift(&self, samples_per_symbol: usize, m: i64, n: i64) -> i64;

    /// Partition of the `Q` subcarriers into classes with a common time offset.
    fn shift_classes(&self, subcarriers: usize, samples_per_symbol: usize) -> Vec<ShiftClass>;
}

#[derive(Debug, Clone, Copy)]
pub struct Hexagonal;

#[derive(Debug, Clone, Copy)]
pub struct Rectangular;

impl LatticeGeometry for Hexagonal {
    fn kind(&self) -> LatticeKind {
        LatticeKind::Hexagonal
    }

    fn name(&self) -> &'static str {
        "hexagonal"
    }

    fn validate(&self, subcarriers: usize, samples_per_symbol: usize) -> Result<()> {
        if samples_per_symbol % 2 != 0 {
            return Err(Error::Lattice(format!(
                "hexagonal lattice needs an even N, got {samples_per_symbol}"
            )));
        }
        if subcarriers % 2 != 0 {
            return Err(Error::Lattice(format!(
                "hexagonal lattice needs an even Q, got {subcarriers}"
            )));
        }
        Ok(())
    }

    fn time_shift(&self, samples_per_symbol: usize, m: i64, n: i64) -> i64 {
        let n_sym = samples_per_symbol as i64;
        n * n_sym + m * (n_sym / 2)
    }

    fn shift_classes(&self, _subcarriers: usize, samples_per_symbol: usize) -> Vec<ShiftClass> {
        vec![
            ShiftClass { offset: 0, first_subcarrier: 0, subcarrier_step: 2 },
            ShiftClass {
                offset: samples_per_symbol as i64 / 2,
                first_subcarrier: 1,
                subcarrier_step: 2,
            },
        ]
    }
}

impl LatticeGeometry for Rectangular {
    fn kind(&self) -> LatticeKind {
        LatticeKind::Rectangular
    }

    fn name(&self) -> &'static str {
        "rectangular"
    }

    fn validate(&self, _subcarriers: usize, _samples_per_symbol: usize) -> Result<()> {
        Ok(())
    }

    fn time_shift(&self, samples_per_symbol: usize, _m: i64, n: i64) -> i64 {
        n * samples_per_symbol as i64
    }

    fn shift_classes(&self, _subcarriers: usize, _samples_per_symbol: usize) -> Vec<ShiftClass> {
        vec![ShiftClass { offset: 0, first_subcarrier: 0, subcarrier_step: 1 }]
    }
}

static GEOMETRIES: [&dyn LatticeGeometry; 2] = [&Hexagonal, &Rectangular];

/// All registered lattice geometries.
pub fn geometries() -> &'static [&'static dyn LatticeGeometry] {
    &GEOMETRIES
}

pub fn geometry_by_name(name: &str) -> Option<&'static dyn LatticeGeometry> {
    GEOMETRIES.iter().copied().find(|g| g.name().eq_ignore_ascii_case(name))
}

/// Lattice of `Q` subcarriers with `N` samples per symbol period at sampling period `Ts`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    kind: LatticeKind,
    subcarriers: usize,
    samples_per_symbol: usize,
    ts: f64,
}

impl LatticeConfig {
    pub fn new(kind: LatticeKind, subcarriers: usize, samples_per_symbol: usize, ts: f64) -> Result<Self> {
        if subcarriers == 0 {
            return Err(Error::Lattice("Q must be positive".into()));
        }
        if samples_per_symbol <= subcarriers {
            return Err(Error::Lattice(format!(
                "N = {samples_per_symbol} must exceed Q = {subcarriers} (undersampled lattice)"
            )));
        }
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::Lattice(format!("sampling period must be positive, got {ts}")));
        }
        kind.geometry().validate(subcarriers, samples_per_symbol)?;
        Ok(Self { kind, subcarriers, samples_per_symbol, ts })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn geometry(&self) -> &'static dyn LatticeGeometry {
        self.kind.geometry()
    }

    /// `Q`.
    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// `N`.
    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// `T = N Ts`.
    pub fn symbol_period(&self) -> f64 {
        self.samples_per_symbol as f64 * self.ts
    }

    /// `F = 1 / (Q Ts)`.
    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / (self.subcarriers as f64 * self.ts)
    }

    /// `FT = N / Q`.
    pub fn ft_product(&self) -> f64 {
        self.samples_per_symbol as f64 / self.subcarriers as f64
    }

    /// `Δ = Q / N`.
    pub fn density(&self) -> f64 {
        self.subcarriers as f64 / self.samples_per_symbol as f64
    }

    pub fn with_kind(&self, kind: LatticeKind) -> Result<Self> {
        Self::new(kind, self.subcarriers, self.samples_per_symbol, self.ts)
    }
}

/// Time shift (samples) and subcarrier index of lattice point `(m, n)`.
pub fn lattice_point(cfg: &LatticeConfig, m: i64, n: i64) -> (i64, i64) {
    (cfg.geometry().time_shift(cfg.samples_per_symbol, m, n), m)
}

/// `e^{j2π k / Q}` with exact values on the real axis.
pub(crate) fn unit_phase(k: i64, q: usize) -> C64 {
    let q = q as i64;
    let r = k.rem_euclid(q);
    if r == 0 {
        C64::new(1.0, 0.0)
    } else if 2 * r == q {
        C64::new(-1.0, 0.0)
    } else {
        C64::from_polar(1.0, 2.0 * PI * r as f64 / q as f64)
    }
}

/// Copy of `w` moved to lattice point `(m, n)`: the start index advances by
/// the lattice time shift and the sample at global index `q` is multiplied by
/// `e^{j2π m q / Q}`.
pub fn modulated_shift(w: &SampledWaveform, cfg: &LatticeConfig, m: i64, n: i64) -> SampledWaveform {
    let (shift, m) = lattice_point(cfg, m, n);
    let q = cfg.subcarriers as i64;
    let m = m.rem_euclid(q);
    let start = w.start + shift;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let global = (start + i as i64).rem_euclid(q);
            s * unit_phase(m * global, cfg.subcarriers)
        })
        .collect();
    SampledWaveform { samples, ts: w.ts, start }
}

/// Finite run of complex samples placed on the global sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    samples: Vec<C64>,
    ts: f64,
    start: i64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<C64>, ts: f64, start: i64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("waveform needs at least one sample".into()));
        }
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling period must be positive, got {ts}")));
        }
        Ok(Self { samples, ts, start })
    }

    pub fn from_real(samples: &[f64], ts: f64, start: i64) -> Result<Self> {
        Self::new(samples.iter().map(|&x| C64::new(x, 0.0)).collect(), ts, start)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Global index of the first sample.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the global index of the last sample.
    pub fn end(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.ts
    }

    /// Sample at global index `q`, zero outside the support.
    pub fn at(&self, q: i64) -> C64 {
        let i = q - self.start;
        if i >= 0 && (i as usize) < self.samples.len() {
            self.samples[i as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn with_start(mut self, start: i64) -> Self {
        self.start = start;
        self
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * factor).collect(),
            ts: self.ts,
            start: self.start,
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalize a zero waveform".into()));
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    /// `⟨self, other⟩ = Σ_q conj(self_q) other_q` over the common support.
    pub fn inner(&self, other: &SampledWaveform) -> C64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo..hi).map(|q| self.at(q).conj() * other.at(q)).sum()
    }

    /// Distance `‖other·c − self‖` after choosing the unit phasor `c` that
    /// maximizes `Re⟨self, other·c⟩`. Both waveforms must share their support.
    pub fn aligned_distance(&self, other: &SampledWaveform) -> f64 {
        let ip = self.inner(other);
        let phase = if ip.norm() > 0.0 { ip.conj() / ip.norm() } else { C64::new(1.0, 0.0) };
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        (lo..hi)
            .map(|q| (other.at(q) * phase - self.at(q)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Rotates the global phase so that the largest-magnitude sample is real
    /// and positive (first one wins on ties).
    pub fn canonical_phase(&self) -> Self {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.norm_sqr() > self.samples[best].norm_sqr() {
                best = i;
            }
        }
        let pivot = self.samples[best];
        if pivot.norm() == 0.0 {
            return self.clone();
        }
        let rotation = pivot.conj() / pivot.norm();
        let mut out = self.scaled(rotation);
        out.samples[best] = C64::new(out.samples[best].re, 0.0);
        out
    }

    /// Time reversal about the origin of the sample grid: `r_q = w_{-q}`.
    pub fn time_reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { samples, ts: self.ts, start: -(self.end() - 1) }
    }
}

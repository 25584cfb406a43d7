//! Step-size sources for AC(λ): a fixed baseline and the three normalized
//! Metatrace tuners (scalar, vector, mixed), all with entropy terms.
//!
//! Every tuner consumes the current TD error, the freshly accumulated
//! eligibility trace and the step's gradients, and emits the step-size used
//! for that same step's weight update. Vector step-sizes are only defined on
//! the trace support, which is the only place the weight update reads them.

mod mixed;
mod scalar;
mod vector;

pub use mixed::MixedMetatrace;
pub use scalar::ScalarMetatrace;
pub use vector::VectorMetatrace;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::GradientBundle;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy)]
pub enum StepSize<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
}

impl StepSize<'_> {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self {
            StepSize::Scalar(a) => *a,
            StepSize::Vector(v) => v[i],
        }
    }
}

/// Everything a tuner receives on one time-step.
#[derive(Debug, Clone, Copy)]
pub struct TunerInput<'a> {
    pub delta: f64,
    /// Trace after this step's accumulation; its support covers the
    /// supports of ∂U/∂w and ∂H/∂w.
    pub trace: &'a Trace,
    pub bundle: &'a GradientBundle,
    pub gamma: f64,
    pub lambda: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    pub alpha0: f64,
    /// Meta step-size.
    pub mu: f64,
    /// Running-max normalization of the β update plus effective step-size
    /// clipping. Off gives the plain meta-gradient update β += μΔβ.
    pub normalized: bool,
}

impl MetaConfig {
    pub fn new(alpha0: f64, mu: f64, normalized: bool) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::Config(format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("mu must be non-negative, got {mu}")));
        }
        Ok(Self { alpha0, mu, normalized })
    }

    pub fn beta0(&self) -> f64 {
        self.alpha0.ln()
    }
}

/// Internals of the most recent tuner step, for invariant checks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Largest |μΔβ/v| applied by the normalized update (over all β's).
    pub max_normalized_change: f64,
    /// Effective step-size before clipping (scalar: e^β‖∂U/∂w‖²).
    pub effective_pre_clip: f64,
    /// Effective step-size after clipping, with the same gradient.
    pub effective_post_clip: f64,
    pub u: f64,
    /// The clipping divisor max(u, 1).
    pub m: f64,
}

impl StepDiagnostics {
    pub fn clipped(&self) -> bool {
        self.m > 1.0
    }
}

/// Read-only view of the log step-sizes.
#[derive(Debug, Clone, Copy)]
pub enum BetaView<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
    /// Shared β̂ plus per-weight corrections.
    Mixed(f64, &'a [f64]),
}

impl BetaView<'_> {
    pub fn at(&self, i: usize) -> f64 {
        match self {
            BetaView::Scalar(b) => *b,
            BetaView::Vector(v) => v[i],
            BetaView::Mixed(b, v) => b + v[i],
        }
    }

    /// Mean of β over `indices` (NaN for an empty group).
    pub fn mean_over(&self, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return f64::NAN;
        }
        indices.iter().map(|&i| self.at(i)).sum::<f64>() / indices.len() as f64
    }
}

pub trait StepSizeTuner {
    /// Clear episode-local state (meta-trace and the effective step-size max).
    fn episode_reset(&mut self);

    fn step(&mut self, input: &TunerInput<'_>) -> Result<StepSize<'_>>;

    fn beta(&self) -> BetaView<'_>;

    fn diagnostics(&self) -> StepDiagnostics;
}

/// Constant step-size: the no-tuning baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedStep {
    alpha: f64,
}

impl FixedStep {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl StepSizeTuner for FixedStep {
    fn episode_reset(&mut self) {}

    fn step(&mut self, _input: &TunerInput<'_>) -> Result<StepSize<'_>> {
        Ok(StepSize::Scalar(self.alpha))
    }

    fn beta(&self) -> BetaView<'_> {
        BetaView::Scalar(self.alpha.ln())
    }

    fn diagnostics(&self) -> StepDiagnostics {
        StepDiagnostics::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunerKind {
    Fixed,
    Scalar,
    Vector,
    Mixed,
}

impl TunerKind {
    pub const ALL: [TunerKind; 4] = [TunerKind::Fixed, TunerKind::Scalar, TunerKind::Vector, TunerKind::Mixed];

    pub fn as_str(&self) -> &'static str {
        match self {
            TunerKind::Fixed => "fixed",
            TunerKind::Scalar => "scalar",
            TunerKind::Vector => "vector",
            TunerKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for TunerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TunerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "none" => Ok(TunerKind::Fixed),
            "scalar" => Ok(TunerKind::Scalar),
            "vector" => Ok(TunerKind::Vector),
            "mixed" => Ok(TunerKind::Mixed),
            _ => Err(Error::Config(format!("unknown tuner '{s}'"))),
        }
    }
}

/// Closed set of tuners, for call sites that pick one at run time.
#[derive(Debug, Clone)]
pub enum Tuner {
    Fixed(FixedStep),
    Scalar(ScalarMetatrace),
    Vector(VectorMetatrace),
    Mixed(MixedMetatrace),
}

impl Tuner {
    pub fn new(kind: TunerKind, n_params: usize, cfg: MetaConfig) -> Self {
        match kind {
            TunerKind::Fixed => Tuner::Fixed(FixedStep::new(cfg.alpha0)),
            TunerKind::Scalar => Tuner::Scalar(ScalarMetatrace::new(n_params, cfg)),
            TunerKind::Vector => Tuner::Vector(VectorMetatrace::new(n_params, cfg)),
            TunerKind::Mixed => Tuner::Mixed(MixedMetatrace::new(n_params, cfg)),
        }
    }

    pub fn kind(&self) -> TunerKind {
        match self {
            Tuner::Fixed(_) => TunerKind::Fixed,
            Tuner::Scalar(_) => TunerKind::Scalar,
            Tuner::Vector(_) => TunerKind::Vector,
            Tuner::Mixed(_) => TunerKind::Mixed,
        }
    }
}

impl StepSizeTuner for Tuner {
    fn episode_reset(&mut self) {
        match self {
            Tuner::Fixed(t) => t.episode_reset(),
            Tuner::Scalar(t) => t.episode_reset(),
            Tuner::Vector(t) => t.episode_reset(),
            Tuner::Mixed(t) => t.episode_reset(),
        }
    }

    fn step(&mut self, input: &TunerInput<'_>) -> Result<StepSize<'_>> {
        match self {
            Tuner::Fixed(t) => t.step(input),
            Tuner::Scalar(t) => t.step(input),
            Tuner::Vector(t) => t.step(input),
            Tuner::Mixed(t) => t.step(input),
        }
    }

    fn beta(&self) -> BetaView<'_> {
        match self {
            Tuner::Fixed(t) => t.beta(),
            Tuner::Scalar(t) => t.beta(),
            Tuner::Vector(t) => t.beta(),
            Tuner::Mixed(t) => t.beta(),
        }
    }

    fn diagnostics(&self) -> StepDiagnostics {
        match self {
            Tuner::Fixed(t) => t.diagnostics(),
            Tuner::Scalar(t) => t.diagnostics(),
            Tuner::Vector(t) => t.diagnostics(),
            Tuner::Mixed(t) => t.diagnostics(),
        }
    }
}

pub(crate) fn divergence(source_name: &'static str, step: u64, detail: String) -> Error {
    Error::Divergence {
        source_name,
        step,
        detail,
    }
}

/// Running max with tracking rate: max(x, prev + rate·(x − prev)).
#[inline]
pub(crate) fn running_max(prev: f64, x: f64, rate: f64) -> f64 {
    f64::max(x, prev + rate * (x - prev))
}

#[inline]
pub(crate) fn guard(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// e^x that reuses the last result while x is unchanged. Seeded with
/// (ln α₀, α₀), so a log step-size that never moved reproduces α₀ exactly
/// even where exp(ln α₀) would round differently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ExpMemo {
    x: f64,
    y: f64,
}

impl ExpMemo {
    pub fn seeded(alpha0: f64) -> Self {
        Self {
            x: alpha0.ln(),
            y: alpha0,
        }
    }

    pub fn from_parts(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn eval(&mut self, x: f64) -> f64 {
        if x.to_bits() != self.x.to_bits() {
            self.x = x;
            self.y = x.exp();
        }
        self.y
    }

    pub fn peek(&self, x: f64) -> f64 {
        if x.to_bits() == self.x.to_bits() {
            self.y
        } else {
            x.exp()
        }
    }
}

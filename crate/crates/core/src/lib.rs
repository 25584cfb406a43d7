//! Online actor-critic with eligibility traces, AC(λ), and the Metatrace
//! family of meta-gradient step-size tuners, with the mountain-car and
//! drifting mountain-car testbeds and an experiment harness.

pub mod ac;
pub mod encoding;
pub mod env;
pub mod error;
pub mod features;
pub mod harness;
pub mod meta;
pub mod model;
pub mod sparse;
pub mod trace;

pub use ac::{run_episode, run_episode_with, td_error, AcConfig, AcLearner, ActionSource, EpisodeRecord};
pub use encoding::{DriftingEncoder, Encoder, RawStateEncoder, TileEncoder};
pub use env::{McState, MountainCar, StepOutcome, TimeoutMode};
pub use error::{Error, Result};
pub use features::{DriftState, SparseFeatures, TileCoder};
pub use meta::{
    BetaView, FixedStep, MetaConfig, MixedMetatrace, ScalarMetatrace, StepDiagnostics, StepSize, StepSizeTuner, Tuner,
    TunerInput, TunerKind, VectorMetatrace,
};
pub use model::{
    sample_action, ActionDistribution, Activation, Approximator, Evaluation, GradientBundle, LinearModel, Mlp,
};
pub use sparse::SparseVec;
pub use trace::Trace;

//! Finite-difference check of the scalar tuner's h trace (∂w/∂β).

use metatrace::{
    AcConfig, AcLearner, Approximator, Encoder, FixedStep, LinearModel, MetaConfig, MountainCar, Result as CoreResult,
    ScalarMetatrace, StepSizeTuner, TileEncoder, TimeoutMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HOracleConfig {
    pub alpha0: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub psi: f64,
    pub horizon: usize,
    pub eps: f64,
    pub seed: u64,
    /// Replace every environment reward with this value.
    pub reward_override: Option<f64>,
}

impl Default for HOracleConfig {
    fn default() -> Self {
        Self {
            alpha0: 2f64.powi(-10),
            gamma: 0.99,
            lambda: 0.8,
            psi: 0.0,
            horizon: 30,
            eps: 1e-4,
            seed: 0,
            reward_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HOracleResult {
    /// (w(β+ε) − w(β)) / ε.
    pub empirical: Vec<f64>,
    /// h from a scalar tuner run alongside the β learner.
    pub tuner_h: Vec<f64>,
    pub steps: usize,
}

impl HOracleResult {
    pub fn cosine(&self) -> f64 {
        cosine(&self.empirical, &self.tuner_h)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Run two fixed-α AC(λ) learners at α = e^β and e^(β+ε) on the same start
/// state with the same uniformly random forced actions, alongside a scalar
/// tuner whose meta step-size is zero (so its β stays put).
pub fn replay_h_oracle(cfg: &HOracleConfig) -> CoreResult<HOracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = LinearModel::new(TileEncoder::default().dim(), 3);
    let ac = AcConfig {
        gamma: cfg.gamma,
        lambda: cfg.lambda,
        psi: cfg.psi,
    };
    let zeros = vec![0.0; model.n_params()];
    let mut base = AcLearner::new(model, zeros.clone(), ac)?;
    let mut bumped = AcLearner::new(model, zeros, ac)?;
    let meta = MetaConfig::new(cfg.alpha0, 0.0, false)?;
    let mut tuner = ScalarMetatrace::new(model.n_params(), meta);
    let mut fixed = FixedStep::new((meta.beta0() + cfg.eps).exp());

    let mut env = MountainCar::new();
    let mut enc = TileEncoder::default();
    let start = env.reset(&mut rng);
    let actions: Vec<usize> = (0..cfg.horizon).map(|_| rng.gen_range(0..3)).collect();
    tuner.episode_reset();
    let mut obs = enc.encode(&start)?;
    let mut steps = 0;
    for &a in &actions {
        let out = env.step(a)?;
        let next = enc.encode(&out.next_state)?;
        let next_ref = if out.bootstrap_zero(TimeoutMode::Terminate) {
            None
        } else {
            Some(&next)
        };
        let reward = cfg.reward_override.unwrap_or(out.reward);
        base.learn_step(&obs, a, reward, next_ref, &mut tuner)?;
        bumped.learn_step(&obs, a, reward, next_ref, &mut fixed)?;
        steps += 1;
        if out.terminal {
            break;
        }
        obs = next;
    }
    let empirical = bumped
        .params()
        .iter()
        .zip(base.params())
        .map(|(b, a)| (b - a) / cfg.eps)
        .collect();
    Ok(HOracleResult {
        empirical,
        tuner_h: tuner.h().to_vec(),
        steps,
    })
}

//! Online actor-critic with accumulating eligibility traces, AC(λ).
//!
//! Per step: encode S_t, sample A_t, step the environment, compute the
//! gradient bundle and δ_t, accumulate z, ask the tuner for α, update w.

use rand::Rng;

use crate::encoding::Encoder;
use crate::env::{MountainCar, TimeoutMode};
use crate::error::{Error, Result};
use crate::meta::{StepSize, StepSizeTuner, TunerInput};
use crate::model::{sample_action, Approximator, Evaluation, GradientBundle};
use crate::trace::{Scatter, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Entropy bonus weight ψ.
    pub psi: f64,
}

impl Default for AcConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.8,
            psi: 0.0,
        }
    }
}

impl AcConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return Err(Error::Config(format!("psi must be non-negative, got {}", self.psi)));
        }
        Ok(())
    }
}

/// δ = r + γ V(S_{t+1}) − V(S_t); the bundle already holds V(S_{t+1}) = 0
/// for terminal transitions.
pub fn td_error(bundle: &GradientBundle, reward: f64, gamma: f64) -> f64 {
    reward + gamma * bundle.value_s_next - bundle.value_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Undiscounted sum of rewards.
    pub total_return: f64,
    pub steps: u32,
}

#[derive(Debug, Clone)]
pub struct AcLearner<M: Approximator> {
    model: M,
    params: Vec<f64>,
    trace: Trace,
    cfg: AcConfig,
    grad_entropy: Scatter,
    steps: u64,
}

impl<M: Approximator> AcLearner<M> {
    pub fn new(model: M, params: Vec<f64>, cfg: AcConfig) -> Result<Self> {
        cfg.validate()?;
        let n = model.n_params();
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: params.len(),
            });
        }
        Ok(Self {
            model,
            params,
            trace: Trace::new(n),
            cfg,
            grad_entropy: Scatter::new(n),
            steps: 0,
        })
    }

    /// Learner with the model's default initialization.
    pub fn with_init<R: Rng + ?Sized>(model: M, cfg: AcConfig, rng: &mut R) -> Result<Self> {
        let params = model.init_params(rng);
        Self::new(model, params, cfg)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn config(&self) -> &AcConfig {
        &self.cfg
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Zero the eligibility trace.
    pub fn begin_episode(&mut self) {
        self.trace.reset();
    }

    pub fn evaluate(&self, obs: &M::Obs) -> Result<Evaluation> {
        self.model.evaluate(&self.params, obs)
    }

    pub fn gradients(&self, obs: &M::Obs, next: Option<&M::Obs>, action: usize) -> Result<GradientBundle> {
        self.model.gradients(&self.params, obs, next, action)
    }

    pub fn td_error(&self, bundle: &GradientBundle, reward: f64) -> f64 {
        td_error(bundle, reward, self.cfg.gamma)
    }

    /// z ← γλ z + ∂V/∂w + ½ ∂log π/∂w. The entropy gradient's indices join
    /// the trace support (with zero trace) so tuners and the update see them.
    pub fn accumulate_trace(&mut self, bundle: &GradientBundle) {
        self.trace.touch(bundle.grad_entropy.indices());
        self.trace
            .decay_and_add(self.cfg.gamma * self.cfg.lambda, bundle.grad_u());
    }

    /// w ← w + α ⊙ (z δ + ψ ∂H/∂w).
    pub fn apply_update(&mut self, alpha: StepSize<'_>, delta: f64, bundle: &GradientBundle) -> Result<()> {
        let psi = self.cfg.psi;
        if psi != 0.0 {
            self.grad_entropy.load(&bundle.grad_entropy);
        }
        let z = self.trace.values();
        let mut finite = true;
        for &i in self.trace.support() {
            self.params[i] += alpha.at(i) * (z[i] * delta + psi * self.grad_entropy.get(i));
            finite &= self.params[i].is_finite();
        }
        self.grad_entropy.clear();
        if !finite {
            return Err(Error::Divergence {
                source_name: "ac learner",
                step: self.steps,
                detail: format!("non-finite weight after update (delta = {delta})"),
            });
        }
        Ok(())
    }

    /// One full learning step on the transition (obs, action, reward, next).
    /// `next = None` bootstraps from zero.
    pub fn learn_step<T: StepSizeTuner + ?Sized>(
        &mut self,
        obs: &M::Obs,
        action: usize,
        reward: f64,
        next: Option<&M::Obs>,
        tuner: &mut T,
    ) -> Result<StepReport> {
        self.steps += 1;
        let bundle = self.gradients(obs, next, action)?;
        let delta = self.td_error(&bundle, reward);
        if !delta.is_finite() {
            return Err(Error::Divergence {
                source_name: "ac learner",
                step: self.steps,
                detail: format!("non-finite TD error {delta}"),
            });
        }
        self.accumulate_trace(&bundle);
        let alpha = tuner.step(&TunerInput {
            delta,
            trace: &self.trace,
            bundle: &bundle,
            gamma: self.cfg.gamma,
            lambda: self.cfg.lambda,
            psi: self.cfg.psi,
        })?;
        self.apply_update(alpha, delta, &bundle)?;
        Ok(StepReport {
            delta,
            value: bundle.value_s,
        })
    }
}

/// Where actions come from during an episode.
pub enum ActionSource<'a> {
    /// Sample from the current policy.
    Policy,
    /// Replay a fixed sequence; the episode stops when it runs out.
    Forced(&'a [usize]),
}

/// Run one episode with actions sampled from the learner's policy.
pub fn run_episode<M, E, T, R>(
    learner: &mut AcLearner<M>,
    env: &mut MountainCar,
    encoder: &mut E,
    tuner: &mut T,
    rng: &mut R,
    timeout: TimeoutMode,
) -> Result<EpisodeRecord>
where
    M: Approximator,
    E: Encoder<Obs = M::Obs>,
    T: StepSizeTuner + ?Sized,
    R: Rng + ?Sized,
{
    run_episode_with(
        learner,
        env,
        encoder,
        tuner,
        rng,
        timeout,
        ActionSource::Policy,
        |_, _| {},
    )
}

/// General episode loop. `observe(step, action)` is called after every
/// learning step.
#[allow(clippy::too_many_arguments)]
pub fn run_episode_with<M, E, T, R, F>(
    learner: &mut AcLearner<M>,
    env: &mut MountainCar,
    encoder: &mut E,
    tuner: &mut T,
    rng: &mut R,
    timeout: TimeoutMode,
    actions: ActionSource<'_>,
    mut observe: F,
) -> Result<EpisodeRecord>
where
    M: Approximator,
    E: Encoder<Obs = M::Obs>,
    T: StepSizeTuner + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u32, usize),
{
    learner.begin_episode();
    tuner.episode_reset();
    let start = env.reset(rng);
    let mut obs = encoder.encode(&start)?;
    let mut total_return = 0.0;
    let mut steps = 0u32;
    loop {
        let action = match actions {
            ActionSource::Policy => {
                let eval = learner.evaluate(&obs)?;
                sample_action(&eval.dist, rng)
            }
            ActionSource::Forced(seq) => match seq.get(steps as usize) {
                Some(&a) => a,
                None => break,
            },
        };
        let out = env.step(action)?;
        encoder.advance();
        let next = encoder.encode(&out.next_state)?;
        let next_ref = if out.bootstrap_zero(timeout) { None } else { Some(&next) };
        learner.learn_step(&obs, action, out.reward, next_ref, tuner)?;
        total_return += out.reward;
        steps += 1;
        observe(steps, action);
        if out.terminal {
            break;
        }
        obs = next;
    }
    Ok(EpisodeRecord { total_return, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::TileEncoder;
    use crate::features::TileCoder;
    use crate::meta::{FixedStep, MetaConfig, ScalarMetatrace, Tuner, TunerKind};
    use crate::model::LinearModel;
    use crate::sparse::SparseVec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle(value_s: f64, value_s_next: f64) -> GradientBundle {
        GradientBundle::new(
            4,
            0,
            value_s,
            value_s_next,
            0.0,
            0.0,
            SparseVec::new(),
            SparseVec::new(),
            SparseVec::new(),
            SparseVec::new(),
        )
    }

    fn learner() -> AcLearner<LinearModel> {
        let m = LinearModel::new(1600, 3);
        AcLearner::new(m, vec![0.0; m.n_params()], AcConfig::default()).unwrap()
    }

    #[test]
    fn td_error_cases() {
        assert_eq!(td_error(&bundle(0.0, 0.0), -1.0, 0.99), -1.0);
        assert!((td_error(&bundle(2.0, 3.0), -1.0, 0.99) - (-0.03)).abs() < 1e-12);
        assert_eq!(td_error(&bundle(5.0, 0.0), 0.0, 0.99), -5.0);
    }

    #[test]
    fn first_accumulation_equals_grad_u() {
        let mut l = learner();
        let phi = TileCoder.encode(-0.5, 0.0).unwrap();
        let b = l.gradients(&phi, Some(&phi), 2).unwrap();
        l.accumulate_trace(&b);
        assert_eq!(l.trace().values().to_vec(), b.grad_u().to_dense(l.n_params()));
    }

    #[test]
    fn zero_gradient_steps_decay_trace_geometrically() {
        let mut l = learner();
        let phi = TileCoder.encode(-0.5, 0.0).unwrap();
        let b = l.gradients(&phi, Some(&phi), 0).unwrap();
        l.accumulate_trace(&b);
        let n0 = l.trace().norm_sq().sqrt();
        let zero = GradientBundle::new(
            l.n_params(),
            0,
            0.0,
            0.0,
            0.0,
            0.0,
            SparseVec::new(),
            SparseVec::new(),
            SparseVec::new(),
            SparseVec::new(),
        );
        let before = l.trace().values().to_vec();
        l.accumulate_trace(&zero);
        for (a, b) in l.trace().values().iter().zip(&before) {
            assert_eq!(*a, 0.792 * b);
        }
        for _ in 1..10 {
            l.accumulate_trace(&zero);
        }
        let n10 = l.trace().norm_sq().sqrt();
        assert!((n10 / n0 - 0.792f64.powi(10)).abs() < 1e-12);
    }

    #[test]
    fn update_rules() {
        let mut l = learner();
        let phi = TileCoder.encode(-0.5, 0.0).unwrap();
        let b = l.gradients(&phi, Some(&phi), 0).unwrap();
        l.accumulate_trace(&b);
        // δ = 0, ψ = 0 leaves weights alone
        l.apply_update(StepSize::Scalar(0.5), 0.0, &b).unwrap();
        assert!(l.params().iter().all(|&w| w == 0.0));

        // one-hot trace at j, δ = −1, α = 2^-8
        let j = phi.active().indices()[0];
        let mut l = learner();
        let one_hot = GradientBundle::new(
            l.n_params(),
            0,
            0.0,
            0.0,
            0.0,
            0.0,
            SparseVec::from_pairs([(j, 1.0)]),
            SparseVec::new(),
            SparseVec::new(),
            SparseVec::new(),
        );
        l.accumulate_trace(&one_hot);
        l.apply_update(StepSize::Scalar(2f64.powi(-8)), -1.0, &one_hot).unwrap();
        assert_eq!(l.params()[j], -(2f64.powi(-8)));

        // zero entry in a vector step-size freezes that weight
        let mut l = learner();
        l.accumulate_trace(&b);
        let mut alpha = vec![0.1; l.n_params()];
        alpha[j] = 0.0;
        l.apply_update(StepSize::Vector(&alpha), 3.0, &b).unwrap();
        assert_eq!(l.params()[j], 0.0);
        assert!(l.params()[phi.active().indices()[1]] != 0.0);
    }

    #[test]
    fn entropy_term_enters_update() {
        let m = LinearModel::new(1600, 3);
        let mut w = vec![0.0; m.n_params()];
        let phi = TileCoder.encode(-0.5, 0.0).unwrap();
        w[m.actor_range(0).start + phi.active().indices()[0]] = 1.0;
        let cfg = AcConfig {
            psi: 0.1,
            ..Default::default()
        };
        let mut l = AcLearner::new(m, w.clone(), cfg).unwrap();
        let b = l.gradients(&phi, None, 0).unwrap();
        l.accumulate_trace(&b);
        l.apply_update(StepSize::Scalar(0.5), 0.0, &b).unwrap();
        for (i, g) in b.grad_entropy.iter() {
            assert!((l.params()[i] - (w[i] + 0.5 * 0.1 * g)).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut l = learner();
        let phi = TileCoder.encode(-0.5, 0.0).unwrap();
        let b = l.gradients(&phi, Some(&phi), 0).unwrap();
        l.accumulate_trace(&b);
        let err = l.apply_update(StepSize::Scalar(f64::INFINITY), 1.0, &b).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    fn run(tuner: &mut Tuner, seed: u64, episodes: usize) -> (Vec<f64>, Vec<EpisodeRecord>) {
        let mut l = learner();
        let mut env = MountainCar::new();
        let mut enc = TileEncoder::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..episodes)
            .map(|_| run_episode(&mut l, &mut env, &mut enc, tuner, &mut rng, TimeoutMode::Terminate).unwrap())
            .collect();
        (l.params().to_vec(), recs)
    }

    #[test]
    fn untrained_policy_times_out() {
        let mut env = MountainCar::new();
        let mut enc = TileEncoder::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut l = learner();
        let mut t = FixedStep::new(0.0);
        for _ in 0..5 {
            let r = run_episode(&mut l, &mut env, &mut enc, &mut t, &mut rng, TimeoutMode::Terminate).unwrap();
            assert_eq!(r.total_return, -200.0);
            assert_eq!(r.steps, 200);
        }
    }

    #[test]
    fn episodes_are_bit_reproducible() {
        let cfg = MetaConfig::new(2f64.powi(-7), 2f64.powi(-8), true).unwrap();
        let mut t1 = Tuner::new(TunerKind::Scalar, 6400, cfg);
        let mut t2 = Tuner::new(TunerKind::Scalar, 6400, cfg);
        let (w1, r1) = run(&mut t1, 5, 3);
        let (w2, r2) = run(&mut t2, 5, 3);
        assert_eq!(r1, r2);
        assert!(w1.iter().zip(&w2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn zero_meta_rate_matches_fixed_baseline() {
        let alpha0 = 2f64.powi(-7);
        let cfg = MetaConfig::new(alpha0, 0.0, false).unwrap();
        let mut meta = Tuner::Scalar(ScalarMetatrace::new(6400, cfg));
        let mut fixed = Tuner::Fixed(FixedStep::new(alpha0));
        let (w1, r1) = run(&mut meta, 11, 3);
        let (w2, r2) = run(&mut fixed, 11, 3);
        assert_eq!(r1, r2);
        assert!(w1.iter().zip(&w2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn forced_actions_stop_when_exhausted() {
        let mut l = learner();
        let mut env = MountainCar::new();
        let mut enc = TileEncoder::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = FixedStep::new(0.01);
        let seq = [0, 1, 2, 2, 2];
        let mut seen = Vec::new();
        let r = run_episode_with(
            &mut l,
            &mut env,
            &mut enc,
            &mut t,
            &mut rng,
            TimeoutMode::Terminate,
            ActionSource::Forced(&seq),
            |_, a| seen.push(a),
        )
        .unwrap();
        assert_eq!(r.steps, 5);
        assert_eq!(seen, seq);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let m = LinearModel::new(16, 3);
        let bad = AcConfig {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(AcLearner::new(m, vec![0.0; m.n_params()], bad).is_err());
        assert!(AcLearner::new(m, vec![0.0; 3], AcConfig::default()).is_err());
    }
}

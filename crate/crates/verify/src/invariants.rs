//! Randomized stress of the tuners' normalization invariants.

use metatrace::{GradientBundle, MetaConfig, SparseVec, StepSizeTuner, Trace, Tuner, TunerInput, TunerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantReport {
    pub steps: usize,
    /// max over steps of |normalized β change| / μ.
    pub max_change_over_mu: f64,
    pub clip_events: usize,
    /// Largest post-clip effective step-size among clipped steps.
    pub max_post_clip: f64,
    /// Steps where u, M or the post-clip bound broke.
    pub violations: usize,
}

fn random_sparse<R: Rng>(rng: &mut R, n: usize, k: usize, scale: f64) -> SparseVec {
    let mut idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
    idx.sort_unstable();
    idx.dedup();
    SparseVec::from_pairs(idx.into_iter().map(|i| (i, rng.gen_range(-scale..scale))))
}

/// Drive normalized scalar, vector and mixed tuners with random gradients,
/// TD errors, hyperparameters and episode boundaries for `total_steps`
/// steps in all.
pub fn stress_normalization(total_steps: usize, seed: u64) -> InvariantReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = InvariantReport::default();
    let kinds = [TunerKind::Scalar, TunerKind::Vector, TunerKind::Mixed];
    while rep.steps < total_steps {
        let n = rng.gen_range(1..40);
        let mu = 2f64.powf(rng.gen_range(-14.0..-1.0));
        let alpha0 = 2f64.powf(rng.gen_range(-14.0..2.0));
        let gamma = rng.gen_range(0.5..1.0);
        let lambda = rng.gen_range(0.0..1.0);
        let psi = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..0.1)
        };
        let kind = kinds[rng.gen_range(0..3)];
        let mut tuner = Tuner::new(kind, n, MetaConfig::new(alpha0, mu, true).unwrap());
        let mut trace = Trace::new(n);
        let scale = 2f64.powf(rng.gen_range(-3.0..3.0));
        for t in 0..rng.gen_range(50..500) {
            if t % 60 == 0 {
                trace.reset();
                tuner.episode_reset();
            }
            let b = GradientBundle::new(
                n,
                0,
                0.0,
                0.0,
                0.0,
                0.0,
                random_sparse(&mut rng, n, 4, scale),
                random_sparse(&mut rng, n, 4, scale),
                random_sparse(&mut rng, n, 3, scale),
                random_sparse(&mut rng, n, 3, scale),
            );
            trace.touch(b.grad_entropy.indices());
            trace.decay_and_add(gamma * lambda, b.grad_u());
            let inp = TunerInput {
                delta: rng.gen_range(-5.0..5.0) * scale,
                trace: &trace,
                bundle: &b,
                gamma,
                lambda,
                psi,
            };
            tuner.step(&inp).expect("normalized tuners stay finite");
            let d = tuner.diagnostics();
            rep.steps += 1;
            rep.max_change_over_mu = rep.max_change_over_mu.max(d.max_normalized_change / mu);
            if d.m < 1.0 || d.u < d.effective_pre_clip {
                rep.violations += 1;
            }
            if d.clipped() {
                rep.clip_events += 1;
                rep.max_post_clip = rep.max_post_clip.max(d.effective_post_clip);
                if d.effective_post_clip > 1.0 + 1e-12 {
                    rep.violations += 1;
                }
            }
        }
    }
    rep
}

/// Run AC(λ) on mountain car with an unnormalized μ = 0 tuner of `kind`
/// and with the fixed baseline, same seed; true when every weight matches
/// bit for bit after `episodes` episodes, along with every episode record.
pub fn mu_zero_matches_fixed(kind: TunerKind, alpha0: f64, seed: u64, episodes: usize) -> metatrace::Result<bool> {
    use metatrace::{
        run_episode, AcConfig, AcLearner, Approximator, LinearModel, MountainCar, TileEncoder, TimeoutMode,
    };

    let run = |tuner: &mut Tuner| -> metatrace::Result<(Vec<f64>, Vec<metatrace::EpisodeRecord>)> {
        let model = LinearModel::new(1600, 3);
        let mut learner = AcLearner::new(model, vec![0.0; model.n_params()], AcConfig::default())?;
        let mut env = MountainCar::new();
        let mut enc = TileEncoder::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            recs.push(run_episode(
                &mut learner,
                &mut env,
                &mut enc,
                tuner,
                &mut rng,
                TimeoutMode::Terminate,
            )?);
        }
        Ok((learner.params().to_vec(), recs))
    };
    let cfg = MetaConfig::new(alpha0, 0.0, false)?;
    let (w_meta, r_meta) = run(&mut Tuner::new(kind, 6400, cfg))?;
    let (w_fixed, r_fixed) = run(&mut Tuner::new(TunerKind::Fixed, 6400, cfg))?;
    Ok(r_meta == r_fixed && w_meta.iter().zip(&w_fixed).all(|(a, b)| a.to_bits() == b.to_bits()))
}

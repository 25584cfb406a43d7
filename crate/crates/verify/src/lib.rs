//! Independent oracles for checking the metatrace library: forward-view
//! λ-returns, finite differences, h-trace replay and invariant stress runs.

pub mod gradcheck;
pub mod h_oracle;
pub mod invariants;
pub mod trajectory;

pub use gradcheck::{finite_diff, linear_gradient_check, mlp_gradient_check, rel_err, GradCheckReport};
pub use h_oracle::{cosine, replay_h_oracle, HOracleConfig, HOracleResult};
pub use invariants::{mu_zero_matches_fixed, stress_normalization, InvariantReport};
pub use trajectory::{forward_lambda_return, record, Trajectory};

use metatrace::harness::{csv_string, run_experiment, EnvKind, ExperimentConfig};
use metatrace::{Activation, Approximator, LinearModel, Mlp, MountainCar, TileEncoder, TunerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("{what} disagree by {err:e} (tolerance {tol:e})")]
    Mismatch { what: &'static str, err: f64, tol: f64 },
    #[error(transparent)]
    Core(#[from] metatrace::Error),
}

/// Random fixed-weight mountain-car episodes of at most `max_len` steps.
pub fn random_trajectories(
    count: usize,
    max_len: usize,
    seed: u64,
) -> Vec<(LinearModel, Vec<f64>, Trajectory<metatrace::SparseFeatures>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LinearModel::new(1600, 3);
    (0..count)
        .map(|_| {
            let params: Vec<f64> = (0..model.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = rng.gen_range(1..=max_len);
            let mut env = MountainCar::new();
            let traj =
                record(&model, &params, &mut env, &mut TileEncoder::default(), &mut rng, len).expect("valid rollout");
            (model, params, traj)
        })
        .collect()
}

/// Largest disagreement between the recursive and δ-sum λ-returns over
/// random trajectories, with random γ and λ.
pub fn lambda_return_identity(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11ce);
    random_trajectories(count, 20, seed)
        .iter()
        .map(|(_, _, traj)| {
            let gamma = rng.gen_range(0.0..=1.0);
            let lambda = rng.gen_range(0.0..=1.0);
            let (r, v) = (traj.rewards(), traj.values());
            let a = trajectory::lambda_return_recursive(&r, &v, traj.final_value, gamma, lambda);
            let b = trajectory::lambda_return_delta_sum(&r, &v, traj.final_value, gamma, lambda);
            trajectory::max_abs_diff(&a, &b)
        })
        .fold(0.0, f64::max)
}

/// True when running `cfg` twice gives byte-identical CSV.
pub fn csv_reproducible(cfg: &ExperimentConfig) -> metatrace::Result<bool> {
    Ok(csv_string(&run_experiment(cfg)?) == csv_string(&run_experiment(cfg)?))
}

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// The oracle suite at moderate sizes (a few seconds in release builds).
pub fn check_suite() -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    let err = lambda_return_identity(1000, 1);
    out.push(outcome(
        "lambda-return identity",
        err <= 1e-9,
        format!("max abs diff {err:.3e} over 1000 trajectories"),
    ));

    let mut fb = 0.0f64;
    for (model, _, traj) in random_trajectories(50, 20, 2) {
        let (b, f) = trajectory::forward_backward_sides(&traj, model.n_params(), 0.99, 0.8);
        fb = fb.max(trajectory::max_abs_diff(&b, &f));
    }
    out.push(outcome(
        "forward/backward trace identity",
        fb <= 1e-9,
        format!("max abs diff {fb:.3e}"),
    ));

    let lin = linear_gradient_check(200, 3, false);
    out.push(outcome(
        "linear gradients",
        lin.worst() <= 1e-4,
        format!("max rel err {:.3e}", lin.worst()),
    ));
    let drift = linear_gradient_check(100, 4, true);
    out.push(outcome(
        "drifting linear gradients",
        drift.worst() <= 1e-4,
        format!("max rel err {:.3e}", drift.worst()),
    ));
    for (name, act) in [
        ("mlp gradients (silu)", Activation::Silu),
        ("mlp gradients (dsilu)", Activation::Dsilu),
    ] {
        let r = mlp_gradient_check(200, 5, Mlp::new(2, 32, 3, act));
        out.push(outcome(
            name,
            r.worst() <= 1e-4,
            format!("max rel err {:.3e}", r.worst()),
        ));
    }

    let cosines: Vec<f64> = (0..20)
        .map(|seed| {
            replay_h_oracle(&HOracleConfig {
                seed,
                ..Default::default()
            })
            .map(|r| r.cosine())
            .unwrap_or(f64::NAN)
        })
        .collect();
    let min_cos = cosines.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(outcome(
        "h trace vs finite difference",
        min_cos >= 0.99,
        format!("min cosine {min_cos:.6} over 20 seeds"),
    ));

    let inv = stress_normalization(100_000, 6);
    out.push(outcome(
        "normalization invariants",
        inv.violations == 0 && inv.max_change_over_mu <= 1.0 + 1e-12,
        format!(
            "{} steps, max |dbeta|/mu {:.6}, {} clips, max post-clip {:.6}, {} violations",
            inv.steps, inv.max_change_over_mu, inv.clip_events, inv.max_post_clip, inv.violations
        ),
    ));

    let mut bit = true;
    for kind in [TunerKind::Scalar, TunerKind::Vector, TunerKind::Mixed] {
        bit &= mu_zero_matches_fixed(kind, 2f64.powi(-7), 7, 5).unwrap_or(false);
    }
    out.push(outcome(
        "mu = 0 matches fixed baseline",
        bit,
        "5 episodes, bitwise weights".into(),
    ));

    let cfg = ExperimentConfig {
        env: EnvKind::DriftingMountainCar,
        tuner: TunerKind::Mixed,
        drift_rate: 1e-4,
        episodes: 5,
        seeds: vec![0, 1],
        ..Default::default()
    };
    let same = csv_reproducible(&cfg).unwrap_or(false);
    out.push(outcome(
        "csv determinism",
        same,
        "drifting mixed, 2 seeds x 5 episodes".into(),
    ));
    out
}

use metatrace::{Approximator, LinearModel, TileCoder};
use metatrace_verify::gradcheck::{check_point, FD_EPS};
use metatrace_verify::h_oracle::{cosine, replay_h_oracle, HOracleConfig};
use metatrace_verify::trajectory::{
    forward_backward_sides, lambda_return_delta_sum, lambda_return_recursive, max_abs_diff,
};
use metatrace_verify::{finite_diff, forward_lambda_return, random_trajectories, stress_normalization};
use proptest::prelude::*;

#[test]
fn three_step_episode_return() {
    let g = lambda_return_recursive(&[-1.0; 3], &[0.0; 3], 0.0, 0.99, 0.8);
    // −1 − 0.99·0.8·(1 + 0.99·0.8)
    assert!((g[0] - (-1.0 - 0.99 * 0.8 * (1.0 + 0.99 * 0.8))).abs() < 1e-12);
    assert!((g[0] + 2.419264).abs() < 1e-12);
}

#[test]
fn recorded_trajectories_pass_cross_check() {
    for (_, _, traj) in random_trajectories(100, 20, 3) {
        assert!(!traj.is_empty());
        let g = forward_lambda_return(&traj, 0.99, 0.8).unwrap();
        assert_eq!(g.len(), traj.len());
    }
}

#[test]
fn forward_and_backward_views_agree() {
    for (model, _, traj) in random_trajectories(40, 20, 4) {
        for (gamma, lambda) in [(0.99, 0.8), (1.0, 1.0), (0.5, 0.0)] {
            let (b, f) = forward_backward_sides(&traj, model.n_params(), gamma, lambda);
            assert!(max_abs_diff(&b, &f) <= 1e-9);
        }
    }
}

#[test]
fn undiscounted_full_lambda_is_monte_carlo() {
    for (_, _, traj) in random_trajectories(30, 20, 5) {
        let g = lambda_return_recursive(&traj.rewards(), &traj.values(), traj.final_value, 1.0, 1.0);
        let mut mc = traj.final_value;
        for t in (0..traj.len()).rev() {
            mc += traj.steps[t].reward;
            assert!((g[t] - mc).abs() < 1e-9);
        }
    }
}

#[test]
fn softmax_log_prob_slope_matches_gradient() {
    let model = LinearModel::new(1600, 3);
    let obs = TileCoder.encode(-0.3, 0.01).unwrap();
    let next = TileCoder.encode(-0.29, 0.012).unwrap();
    let mut params = vec![0.0; model.n_params()];
    for (k, &j) in obs.active().indices().iter().enumerate() {
        params[model.actor_range(k % 3).start + j] = 0.1 * k as f64;
        params[j] = -0.05 * k as f64;
    }
    let idx: Vec<usize> = (0..model.n_params())
        .filter(|i| i % 7 == 0 || params[*i] != 0.0)
        .collect();
    let r = check_point(&model, &params, &obs, &next, 1, &idx, FD_EPS);
    assert!(r.worst() <= 1e-4, "{r:?}");
    let slope = finite_diff(
        |w| model.evaluate(w, &obs).unwrap().dist.log_probs()[1],
        &params,
        model.actor_range(1).start + obs.active().indices()[0],
        FD_EPS,
    );
    assert!(slope.abs() > 0.0);
}

#[test]
fn h_after_one_step_is_closed_form() {
    let cfg = HOracleConfig {
        horizon: 1,
        eps: 1e-6,
        ..Default::default()
    };
    let r = replay_h_oracle(&cfg).unwrap();
    assert_eq!(r.steps, 1);
    // (e^ε − 1)/ε ≈ 1 + ε/2
    for (e, h) in r.empirical.iter().zip(&r.tuner_h) {
        assert!((e - h).abs() <= 1e-5 * h.abs().max(1e-12), "{e} vs {h}");
    }
    assert!(r.tuner_h.iter().any(|&h| h != 0.0));
}

#[test]
fn h_oracle_step_sizes_agree() {
    for seed in 0..3 {
        let coarse = replay_h_oracle(&HOracleConfig {
            seed,
            eps: 1e-3,
            ..Default::default()
        })
        .unwrap();
        let fine = replay_h_oracle(&HOracleConfig {
            seed,
            eps: 1e-4,
            ..Default::default()
        })
        .unwrap();
        assert!(cosine(&coarse.empirical, &fine.empirical) > 0.99999);
        let ratio = coarse.empirical.iter().map(|x| x * x).sum::<f64>().sqrt()
            / fine.empirical.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((ratio - 1.0).abs() < 2e-3, "ratio {ratio}");
    }
}

#[test]
fn zero_rewards_give_zero_sensitivity() {
    let r = replay_h_oracle(&HOracleConfig {
        reward_override: Some(0.0),
        ..Default::default()
    })
    .unwrap();
    assert!(r.tuner_h.iter().all(|&h| h == 0.0));
    assert!(r.empirical.iter().all(|&e| e == 0.0));
}

#[test]
fn critic_block_of_h_is_first_order_exact() {
    // The critic's trace does not depend on the weights, so only the actor
    // block feels the dropped ∂z/∂w term.
    for seed in 0..5 {
        let r = replay_h_oracle(&HOracleConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        assert!(cosine(&r.empirical[..1600], &r.tuner_h[..1600]) > 0.99999);
    }
}

#[test]
fn normalization_stress_small() {
    let rep = stress_normalization(5_000, 9);
    assert_eq!(rep.violations, 0);
    assert!(rep.max_change_over_mu <= 1.0 + 1e-12);
    assert!(rep.clip_events > 0);
}

proptest! {
    #[test]
    fn lambda_return_forms_agree(
        rewards in proptest::collection::vec(-5.0f64..5.0, 1..25),
        seed_values in proptest::collection::vec(-50.0f64..50.0, 25),
        final_value in -50.0f64..50.0,
        gamma in 0.0f64..=1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let values = &seed_values[..rewards.len()];
        let a = lambda_return_recursive(&rewards, values, final_value, gamma, lambda);
        let b = lambda_return_delta_sum(&rewards, values, final_value, gamma, lambda);
        prop_assert!(max_abs_diff(&a, &b) <= 1e-9);
    }
}

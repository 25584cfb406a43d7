//! Central finite differences and gradient checks for the approximators.

use metatrace::env::{MAX_POSITION, MAX_SPEED, MIN_POSITION};
use metatrace::{
    Approximator, DriftState, DriftingEncoder, Encoder, LinearModel, McState, Mlp, RawStateEncoder, TileEncoder,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (f(w + εe_i) − f(w − εe_i)) / 2ε.
pub fn finite_diff<F: FnMut(&[f64]) -> f64>(mut f: F, at: &[f64], index: usize, eps: f64) -> f64 {
    assert!(eps > 0.0, "eps must be positive");
    let mut w = at.to_vec();
    w[index] = at[index] + eps;
    let up = f(&w);
    w[index] = at[index] - eps;
    let down = f(&w);
    (up - down) / (2.0 * eps)
}

/// Magnitude below which relative error is measured against this floor
/// instead, so entries that are zero analytically are compared absolutely.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Worst relative error per gradient over all checked points and entries.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    pub points: usize,
    pub entries: usize,
    pub grad_v: f64,
    pub grad_v_next: f64,
    pub grad_logpi: f64,
    pub grad_entropy: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.grad_v
            .max(self.grad_v_next)
            .max(self.grad_logpi)
            .max(self.grad_entropy)
    }

    fn merge(&mut self, other: &GradCheckReport) {
        self.points += other.points;
        self.entries += other.entries;
        self.grad_v = self.grad_v.max(other.grad_v);
        self.grad_v_next = self.grad_v_next.max(other.grad_v_next);
        self.grad_logpi = self.grad_logpi.max(other.grad_logpi);
        self.grad_entropy = self.grad_entropy.max(other.grad_entropy);
    }
}

pub const FD_EPS: f64 = 1e-6;

/// Compare every analytic gradient at one point with central differences
/// over `indices`.
pub fn check_point<M: Approximator>(
    model: &M,
    params: &[f64],
    obs: &M::Obs,
    next: &M::Obs,
    action: usize,
    indices: &[usize],
    eps: f64,
) -> GradCheckReport {
    let b = model.gradients(params, obs, Some(next), action).expect("valid point");
    let value = |w: &[f64]| model.evaluate(w, obs).unwrap().value;
    let value_next = |w: &[f64]| model.evaluate(w, next).unwrap().value;
    let logpi = |w: &[f64]| model.evaluate(w, obs).unwrap().dist.log_probs()[action];
    let entropy = |w: &[f64]| model.evaluate(w, obs).unwrap().dist.entropy();
    let mut r = GradCheckReport {
        points: 1,
        entries: indices.len(),
        ..Default::default()
    };
    for &i in indices {
        r.grad_v = r
            .grad_v
            .max(rel_err(b.grad_v_s.get(i), finite_diff(value, params, i, eps)));
        r.grad_v_next = r
            .grad_v_next
            .max(rel_err(b.grad_v_s_next.get(i), finite_diff(value_next, params, i, eps)));
        r.grad_logpi = r
            .grad_logpi
            .max(rel_err(b.grad_logpi.get(i), finite_diff(logpi, params, i, eps)));
        r.grad_entropy = r
            .grad_entropy
            .max(rel_err(b.grad_entropy.get(i), finite_diff(entropy, params, i, eps)));
    }
    r
}

pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> McState {
    McState::new(
        rng.gen_range(MIN_POSITION..=MAX_POSITION),
        rng.gen_range(-MAX_SPEED..=MAX_SPEED),
    )
    .expect("in range")
}

/// Linear model over tile features (optionally drifting, with noisy
/// features and flipped signs). Checks every entry touched by either
/// observation plus a random sample of the rest.
pub fn linear_gradient_check(points: usize, seed: u64, drifting: bool) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    let mut plain = TileEncoder::default();
    let mut drift = DriftingEncoder::new(DriftState::new(0.2, 32, seed ^ 0x5eed).expect("valid drift"));
    for _ in 0..points {
        let (obs, next) = if drifting {
            for _ in 0..rng.gen_range(1..5) {
                drift.advance();
            }
            let o = drift.encode(&random_state(&mut rng)).unwrap();
            drift.advance();
            (o, drift.encode(&random_state(&mut rng)).unwrap())
        } else {
            (
                plain.encode(&random_state(&mut rng)).unwrap(),
                plain.encode(&random_state(&mut rng)).unwrap(),
            )
        };
        let model = LinearModel::new(obs.dim(), 3);
        let params: Vec<f64> = (0..model.n_params()).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let action = rng.gen_range(0..3);
        let mut indices = Vec::new();
        for a in 0..=3 {
            let off = if a == 0 {
                model.critic_range().start
            } else {
                model.actor_range(a - 1).start
            };
            indices.extend(obs.active().indices().iter().map(|&j| off + j));
            indices.extend(next.active().indices().iter().map(|&j| off + j));
        }
        indices.extend((0..16).map(|_| rng.gen_range(0..model.n_params())));
        indices.sort_unstable();
        indices.dedup();
        report.merge(&check_point(&model, &params, &obs, &next, action, &indices, FD_EPS));
    }
    report
}

/// MLP over the raw state; every parameter is checked at random small
/// weights.
pub fn mlp_gradient_check(points: usize, seed: u64, model: Mlp) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut enc = RawStateEncoder;
    let mut report = GradCheckReport::default();
    let all: Vec<usize> = (0..model.n_params()).collect();
    for _ in 0..points {
        let params: Vec<f64> = (0..model.n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let obs = enc.encode(&random_state(&mut rng)).unwrap();
        let next = enc.encode(&random_state(&mut rng)).unwrap();
        let action = rng.gen_range(0..3);
        report.merge(&check_point(&model, &params, &obs, &next, action, &all, FD_EPS));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_slope_is_exact() {
        let f = |w: &[f64]| 3.0 * w[0] - 2.0 * w[1] + 0.5;
        assert_eq!(finite_diff(f, &[0.25, 4.0], 0, 0.125), 3.0);
        assert_eq!(finite_diff(f, &[0.25, 4.0], 1, 0.125), -2.0);
    }

    #[test]
    fn quadratic_slope_is_second_order() {
        let f = |w: &[f64]| w[0].powi(3);
        for eps in [1e-2, 1e-3] {
            let d = finite_diff(f, &[2.0], 0, eps);
            // error of the central difference for x³ is exactly ε²
            assert!((d - 12.0 - eps * eps).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert!((rel_err(1.0, 1.0001) - 1e-4 / 1.0001).abs() < 1e-12);
        assert!((rel_err(0.0, 1e-8) - 1e-4).abs() < 1e-12);
    }
}

use rand::Rng;

use super::{ActionDistribution, Approximator, Evaluation, GradientBundle};
use crate::error::{Error, Result};
use crate::features::SparseFeatures;
use crate::sparse::SparseVec;

/// Linear critic and linear-softmax actor over a shared sparse feature vector.
///
/// Parameter layout: `[critic | actor_0 | actor_1 | ...]`, each block of
/// length `feature_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearModel {
    feature_dim: usize,
    n_actions: usize,
}

impl LinearModel {
    pub fn new(feature_dim: usize, n_actions: usize) -> Self {
        Self { feature_dim, n_actions }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn critic_range(&self) -> std::ops::Range<usize> {
        0..self.feature_dim
    }

    pub fn actor_range(&self, action: usize) -> std::ops::Range<usize> {
        let start = (1 + action) * self.feature_dim;
        start..start + self.feature_dim
    }

    fn check(&self, params: &[f64], obs: &SparseFeatures) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        if obs.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: obs.dim(),
            });
        }
        Ok(())
    }

    fn dot_block(&self, params: &[f64], block: usize, obs: &SparseFeatures) -> f64 {
        let w = &params[block * self.feature_dim..(block + 1) * self.feature_dim];
        obs.iter().map(|(i, x)| w[i] * x).sum()
    }

    fn value(&self, params: &[f64], obs: &SparseFeatures) -> f64 {
        self.dot_block(params, 0, obs)
    }

    fn policy(&self, params: &[f64], obs: &SparseFeatures) -> ActionDistribution {
        let prefs: Vec<f64> = (0..self.n_actions)
            .map(|a| self.dot_block(params, 1 + a, obs))
            .collect();
        ActionDistribution::softmax(&prefs)
    }

    /// Per-action coefficients `coef[a]` placed at `φ·coef[a]` in actor block a.
    fn actor_grad(&self, obs: &SparseFeatures, coef: &[f64]) -> SparseVec {
        let mut g = SparseVec::with_capacity(obs.active().len() * self.n_actions);
        for (a, &c) in coef.iter().enumerate() {
            let off = (1 + a) * self.feature_dim;
            for (i, x) in obs.iter() {
                g.push(off + i, x * c);
            }
        }
        g
    }

    fn critic_grad(obs: &SparseFeatures) -> SparseVec {
        obs.active().clone()
    }
}

impl Approximator for LinearModel {
    type Obs = SparseFeatures;

    fn n_params(&self) -> usize {
        self.feature_dim * (1 + self.n_actions)
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn init_params<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    fn evaluate(&self, params: &[f64], obs: &SparseFeatures) -> Result<Evaluation> {
        self.check(params, obs)?;
        Ok(Evaluation {
            value: self.value(params, obs),
            dist: self.policy(params, obs),
        })
    }

    fn gradients(
        &self,
        params: &[f64],
        obs: &SparseFeatures,
        next: Option<&SparseFeatures>,
        action: usize,
    ) -> Result<GradientBundle> {
        self.check(params, obs)?;
        if action >= self.n_actions {
            return Err(Error::InvalidAction(action));
        }
        let (value_s_next, grad_v_s_next) = match next {
            Some(n) => {
                self.check(params, n)?;
                (self.value(params, n), Self::critic_grad(n))
            }
            None => (0.0, SparseVec::new()),
        };
        let dist = self.policy(params, obs);
        let logpi_coef: Vec<f64> = dist
            .probs()
            .iter()
            .enumerate()
            .map(|(a, p)| if a == action { 1.0 - p } else { -p })
            .collect();
        let entropy_coef = dist.entropy_pref_grad();
        Ok(GradientBundle::new(
            self.n_params(),
            action,
            self.value(params, obs),
            value_s_next,
            dist.log_probs()[action],
            dist.entropy(),
            Self::critic_grad(obs),
            grad_v_s_next,
            self.actor_grad(obs, &logpi_coef),
            self.actor_grad(obs, &entropy_coef),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TileCoder;

    fn setup() -> (LinearModel, SparseFeatures) {
        let m = LinearModel::new(1600, 3);
        (m, TileCoder.encode(-0.5, 0.01).unwrap())
    }

    #[test]
    fn zero_params_give_zero_value_and_uniform_policy() {
        let (m, phi) = setup();
        let e = m.evaluate(&vec![0.0; m.n_params()], &phi).unwrap();
        assert_eq!(e.value, 0.0);
        for p in e.dist.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn indicator_critic_weights_sum_active_features() {
        let (m, phi) = setup();
        let mut w = vec![0.0; m.n_params()];
        for (i, _) in phi.iter() {
            w[i] = 1.0;
        }
        assert_eq!(m.evaluate(&w, &phi).unwrap().value, 16.0);
    }

    #[test]
    fn shifting_all_preferences_leaves_policy_unchanged() {
        let (m, phi) = setup();
        let mut w: Vec<f64> = (0..m.n_params()).map(|i| ((i * 37) % 11) as f64 * 0.01).collect();
        let before = m.evaluate(&w, &phi).unwrap().dist;
        // +c/16 on each active weight of every actor block adds c to every preference
        for a in 0..3 {
            for (i, _) in phi.iter() {
                w[m.actor_range(a).start + i] += 0.7 / 16.0;
            }
        }
        let after = m.evaluate(&w, &phi).unwrap().dist;
        for (x, y) in before.probs().iter().zip(after.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_point_logpi_gradient() {
        let (m, phi) = setup();
        let w = vec![0.0; m.n_params()];
        let b = m.gradients(&w, &phi, Some(&phi), 1).unwrap();
        for a in 0..3 {
            let expected = if a == 1 { 2.0 / 3.0 } else { -1.0 / 3.0 };
            for (i, x) in phi.iter() {
                let g = b.grad_logpi.get(m.actor_range(a).start + i);
                assert!((g - x * expected).abs() < 1e-15);
            }
        }
        assert!(b.grad_entropy.norm_sq().sqrt() <= 1e-12);
    }

    #[test]
    fn sparsity_pattern_matches_active_features() {
        let (m, phi) = setup();
        let w: Vec<f64> = (0..m.n_params()).map(|i| (i as f64 * 0.001).sin()).collect();
        let b = m.gradients(&w, &phi, None, 0).unwrap();
        assert_eq!(b.grad_v_s.indices(), phi.active().indices());
        assert!(b.grad_v_s_next.is_empty());
        assert_eq!(b.value_s_next, 0.0);
        let actor: Vec<usize> = (0..3)
            .flat_map(|a| phi.active().indices().iter().map(move |i| (1 + a) * 1600 + i))
            .collect();
        assert_eq!(b.grad_logpi.indices(), actor.as_slice());
        assert_eq!(b.grad_entropy.indices(), actor.as_slice());
        assert!(b.grad_v_s.indices().iter().all(|&i| i < 1600));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (m, phi) = setup();
        assert!(matches!(
            m.evaluate(&[0.0; 10], &phi),
            Err(Error::DimensionMismatch { .. })
        ));
        let other = LinearModel::new(1632, 3);
        assert!(other.evaluate(&vec![0.0; other.n_params()], &phi).is_err());
    }
}

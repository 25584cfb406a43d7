//! Actor-critic function approximators behind one gradient interface.
//!
//! Both models share a value head V(s) and a softmax policy head π(·|s) and
//! expose the gradients the learner and the step-size tuners consume.

mod checkpoint;
mod linear;
mod mlp;

pub use checkpoint::{load_params, read_params, save_params, write_params, CHECKPOINT_MAGIC};
pub use linear::LinearModel;
pub use mlp::{Activation, Mlp};

use rand::Rng;

use crate::error::Result;
use crate::sparse::SparseVec;

/// Probabilities over the discrete actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ActionDistribution {
    /// Softmax of `preferences`, computed with the usual max shift.
    pub fn softmax(preferences: &[f64]) -> Self {
        let max = preferences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = preferences.iter().map(|p| (p - max).exp()).sum();
        let log_z = max + sum.ln();
        let log_probs: Vec<f64> = preferences.iter().map(|p| p - log_z).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Self { probs, log_probs }
    }

    pub fn from_probs(probs: Vec<f64>) -> Self {
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self { probs, log_probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
            .sum::<f64>()
    }

    /// ∂H/∂preference_b = −π_b (log π_b + H).
    pub(crate) fn entropy_pref_grad(&self) -> Vec<f64> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| if *p > 0.0 { -p * (l + h) } else { 0.0 })
            .collect()
    }
}

/// Draw an action by inverting the cumulative distribution.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (a, &p) in dist.probs().iter().enumerate() {
        if p > 0.0 {
            last_nonzero = a;
        }
        acc += p;
        if u < acc {
            return a;
        }
    }
    last_nonzero
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub dist: ActionDistribution,
}

/// Per-step gradients over the flat parameter vector.
///
/// `grad_logpi` is the plain gradient of log π(A_t|S_t); the ½ weight it
/// carries inside U = V + ½ log π is applied in [`GradientBundle::grad_u`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub n_params: usize,
    pub action: usize,
    pub value_s: f64,
    /// Zero when S_{t+1} is terminal.
    pub value_s_next: f64,
    pub logpi: f64,
    pub entropy: f64,
    pub grad_v_s: SparseVec,
    /// Empty when S_{t+1} is terminal.
    pub grad_v_s_next: SparseVec,
    pub grad_logpi: SparseVec,
    pub grad_entropy: SparseVec,
    grad_u: SparseVec,
}

impl GradientBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_params: usize,
        action: usize,
        value_s: f64,
        value_s_next: f64,
        logpi: f64,
        entropy: f64,
        grad_v_s: SparseVec,
        grad_v_s_next: SparseVec,
        grad_logpi: SparseVec,
        grad_entropy: SparseVec,
    ) -> Self {
        let grad_u = SparseVec::combine(&grad_v_s, &grad_logpi, 0.5);
        Self {
            n_params,
            action,
            value_s,
            value_s_next,
            logpi,
            entropy,
            grad_v_s,
            grad_v_s_next,
            grad_logpi,
            grad_entropy,
            grad_u,
        }
    }

    /// ∂U/∂w = ∂V(S_t)/∂w + ½ ∂log π(A_t|S_t)/∂w.
    pub fn grad_u(&self) -> &SparseVec {
        &self.grad_u
    }

    /// Full gradient of the TD error, γ ∂V(S_{t+1})/∂w − ∂V(S_t)/∂w.
    pub fn grad_delta(&self, gamma: f64) -> SparseVec {
        SparseVec::combine_scaled(&self.grad_v_s_next, gamma, &self.grad_v_s, -1.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.value_s, self.value_s_next, self.logpi, self.entropy]
            .iter()
            .all(|v| v.is_finite())
            && self.grad_v_s.is_finite()
            && self.grad_v_s_next.is_finite()
            && self.grad_logpi.is_finite()
            && self.grad_entropy.is_finite()
    }
}

/// A differentiable value + softmax-policy approximator.
pub trait Approximator {
    type Obs;

    fn n_params(&self) -> usize;

    fn n_actions(&self) -> usize;

    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;

    fn evaluate(&self, params: &[f64], obs: &Self::Obs) -> Result<Evaluation>;

    /// Gradients for the transition (obs, action) -> next; `next = None`
    /// means S_{t+1} is terminal and bootstraps to zero.
    fn gradients(
        &self,
        params: &[f64],
        obs: &Self::Obs,
        next: Option<&Self::Obs>,
        action: usize,
    ) -> Result<GradientBundle>;
}

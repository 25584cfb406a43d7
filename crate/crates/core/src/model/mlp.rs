use rand::Rng;

use super::{ActionDistribution, Approximator, Evaluation, GradientBundle};
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    /// x·σ(x)
    #[default]
    Silu,
    /// Derivative of SiLU: σ(x)(1 + x(1 − σ(x))).
    Dsilu,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        let s = sigmoid(x);
        match self {
            Activation::Silu => x * s,
            Activation::Dsilu => s * (1.0 + x * (1.0 - s)),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        let s = sigmoid(x);
        match self {
            Activation::Silu => s * (1.0 + x * (1.0 - s)),
            Activation::Dsilu => s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s)),
        }
    }
}

/// One-hidden-layer network with a linear value head and a softmax policy
/// head on the shared hidden layer.
///
/// Parameter layout: `[W1 (hidden × inputs, row-major) | b1 | value weights |
/// value bias | policy weights (actions × hidden) | policy biases]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    n_inputs: usize,
    hidden: usize,
    n_actions: usize,
    activation: Activation,
    init_scale: f64,
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    value: f64,
    dist: ActionDistribution,
}

impl Mlp {
    pub fn new(n_inputs: usize, hidden: usize, n_actions: usize, activation: Activation) -> Self {
        Self {
            n_inputs,
            hidden,
            n_actions,
            activation,
            init_scale: 0.05,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn b1_off(&self) -> usize {
        self.hidden * self.n_inputs
    }
    fn vw_off(&self) -> usize {
        self.b1_off() + self.hidden
    }
    fn vb_off(&self) -> usize {
        self.vw_off() + self.hidden
    }
    fn pw_off(&self) -> usize {
        self.vb_off() + 1
    }
    fn pb_off(&self) -> usize {
        self.pw_off() + self.n_actions * self.hidden
    }

    /// Indices of the value head (weights and bias).
    pub fn value_head_range(&self) -> std::ops::Range<usize> {
        self.vw_off()..self.pw_off()
    }

    /// Indices of the policy head (weights and biases).
    pub fn policy_head_range(&self) -> std::ops::Range<usize> {
        self.pw_off()..self.n_params()
    }

    fn check(&self, params: &[f64], obs: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        if obs.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: obs.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Forward {
        let (h, ni) = (self.hidden, self.n_inputs);
        let mut pre = vec![0.0; h];
        let mut act = vec![0.0; h];
        for j in 0..h {
            let row = &params[j * ni..(j + 1) * ni];
            let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + params[self.b1_off() + j];
            pre[j] = z;
            act[j] = self.activation.apply(z);
        }
        let vw = &params[self.vw_off()..self.vw_off() + h];
        let value = vw.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + params[self.vb_off()];
        let prefs: Vec<f64> = (0..self.n_actions)
            .map(|b| {
                let row = &params[self.pw_off() + b * h..self.pw_off() + (b + 1) * h];
                row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + params[self.pb_off() + b]
            })
            .collect();
        Forward {
            pre,
            act,
            value,
            dist: ActionDistribution::softmax(&prefs),
        }
    }

    /// Reverse pass for an output seed `value_coef·V + Σ_b pref_coef[b]·pref_b`.
    fn backward(&self, params: &[f64], x: &[f64], fwd: &Forward, value_coef: f64, pref_coef: &[f64]) -> SparseVec {
        let (h, ni) = (self.hidden, self.n_inputs);
        let mut g = vec![0.0; self.n_params()];
        let mut d_act = vec![0.0; h];
        if value_coef != 0.0 {
            for j in 0..h {
                g[self.vw_off() + j] = value_coef * fwd.act[j];
                d_act[j] += value_coef * params[self.vw_off() + j];
            }
            g[self.vb_off()] = value_coef;
        }
        for (b, &c) in pref_coef.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = self.pw_off() + b * h;
            for j in 0..h {
                g[row + j] = c * fwd.act[j];
                d_act[j] += c * params[row + j];
            }
            g[self.pb_off() + b] = c;
        }
        for j in 0..h {
            let d_pre = d_act[j] * self.activation.derivative(fwd.pre[j]);
            for k in 0..ni {
                g[j * ni + k] = d_pre * x[k];
            }
            g[self.b1_off() + j] = d_pre;
        }
        SparseVec::from_dense(&g)
    }
}

impl Approximator for Mlp {
    type Obs = Vec<f64>;

    fn n_params(&self) -> usize {
        self.pb_off() + self.n_actions
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Hidden weights uniform in ±0.05; biases and both heads start at zero.
    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params()];
        for w in &mut p[..self.b1_off()] {
            *w = rng.gen_range(-self.init_scale..=self.init_scale);
        }
        p
    }

    fn evaluate(&self, params: &[f64], obs: &Vec<f64>) -> Result<Evaluation> {
        self.check(params, obs)?;
        let f = self.forward(params, obs);
        Ok(Evaluation {
            value: f.value,
            dist: f.dist,
        })
    }

    fn gradients(
        &self,
        params: &[f64],
        obs: &Vec<f64>,
        next: Option<&Vec<f64>>,
        action: usize,
    ) -> Result<GradientBundle> {
        self.check(params, obs)?;
        if action >= self.n_actions {
            return Err(Error::InvalidAction(action));
        }
        let fwd = self.forward(params, obs);
        let no_pref = vec![0.0; self.n_actions];
        let grad_v_s = self.backward(params, obs, &fwd, 1.0, &no_pref);
        let (value_s_next, grad_v_s_next) = match next {
            Some(n) => {
                self.check(params, n)?;
                let f = self.forward(params, n);
                (f.value, self.backward(params, n, &f, 1.0, &no_pref))
            }
            None => (0.0, SparseVec::new()),
        };
        let logpi_coef: Vec<f64> = fwd
            .dist
            .probs()
            .iter()
            .enumerate()
            .map(|(a, p)| if a == action { 1.0 - p } else { -p })
            .collect();
        let grad_logpi = self.backward(params, obs, &fwd, 0.0, &logpi_coef);
        let grad_entropy = self.backward(params, obs, &fwd, 0.0, &fwd.dist.entropy_pref_grad());
        Ok(GradientBundle::new(
            self.n_params(),
            action,
            fwd.value,
            value_s_next,
            fwd.dist.log_probs()[action],
            fwd.dist.entropy(),
            grad_v_s,
            grad_v_s_next,
            grad_logpi,
            grad_entropy,
        ))
    }
}

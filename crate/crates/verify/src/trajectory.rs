//! Recorded fixed-weight episodes and the forward-view λ-return.

use metatrace::{sample_action, Approximator, Encoder, GradientBundle, MountainCar, Result as CoreResult};
use rand::Rng;

use crate::VerifyError;

#[derive(Debug, Clone)]
pub struct TrajStep<O> {
    pub obs: O,
    pub action: usize,
    pub reward: f64,
    /// V(S_t) under the recording weights.
    pub value: f64,
    pub bundle: GradientBundle,
}

/// One episode recorded under a single frozen weight vector.
#[derive(Debug, Clone)]
pub struct Trajectory<O> {
    pub steps: Vec<TrajStep<O>>,
    /// True when the last transition entered a terminal state.
    pub terminal: bool,
    /// V(S_T) after the last step; zero when terminal.
    pub final_value: f64,
}

impl<O> Trajectory<O> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    /// δ_t = R_{t+1} + γ V(S_{t+1}) − V(S_t).
    pub fn td_errors(&self, gamma: f64) -> Vec<f64> {
        (0..self.len())
            .map(|t| {
                let next = self.steps.get(t + 1).map_or(self.final_value, |s| s.value);
                self.steps[t].reward + gamma * next - self.steps[t].value
            })
            .collect()
    }
}

/// Roll out up to `max_len` steps with frozen `params`, sampling actions from
/// the policy. A run that stops at `max_len` bootstraps from V(S_T).
pub fn record<M, E, R>(
    model: &M,
    params: &[f64],
    env: &mut MountainCar,
    encoder: &mut E,
    rng: &mut R,
    max_len: usize,
) -> CoreResult<Trajectory<M::Obs>>
where
    M: Approximator,
    M::Obs: Clone,
    E: Encoder<Obs = M::Obs>,
    R: Rng + ?Sized,
{
    let start = env.reset(rng);
    let mut obs = encoder.encode(&start)?;
    let mut steps = Vec::new();
    let mut terminal = false;
    let mut final_value = 0.0;
    for _ in 0..max_len {
        let eval = model.evaluate(params, &obs)?;
        let action = sample_action(&eval.dist, rng);
        let out = env.step(action)?;
        encoder.advance();
        let next = encoder.encode(&out.next_state)?;
        let next_ref = if out.terminal { None } else { Some(&next) };
        let bundle = model.gradients(params, &obs, next_ref, action)?;
        final_value = bundle.value_s_next;
        steps.push(TrajStep {
            obs: obs.clone(),
            action,
            reward: out.reward,
            value: eval.value,
            bundle,
        });
        obs = next;
        if out.terminal {
            terminal = true;
            break;
        }
    }
    Ok(Trajectory {
        steps,
        terminal,
        final_value: if terminal { 0.0 } else { final_value },
    })
}

/// Backward recursion G_t = R_{t+1} + γ((1−λ)V(S_{t+1}) + λ G_{t+1}), with
/// G_T = V(S_T) (zero at a terminal state).
pub fn lambda_return_recursive(rewards: &[f64], values: &[f64], final_value: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut g = vec![0.0; n];
    let mut g_next = final_value;
    for t in (0..n).rev() {
        let v_next = if t + 1 < n { values[t + 1] } else { final_value };
        g[t] = rewards[t] + gamma * ((1.0 - lambda) * v_next + lambda * g_next);
        g_next = g[t];
    }
    g
}

/// G_t = V(S_t) + Σ_{k≥t} (γλ)^{k−t} δ_k, summed directly.
pub fn lambda_return_delta_sum(rewards: &[f64], values: &[f64], final_value: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let v_next = if t + 1 < n { values[t + 1] } else { final_value };
            rewards[t] + gamma * v_next - values[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for d in &delta[t..] {
                sum += w * d;
                w *= gamma * lambda;
            }
            values[t] + sum
        })
        .collect()
}

/// Agreement required between the two λ-return forms.
pub const LAMBDA_RETURN_TOL: f64 = 1e-10;

/// λ-returns of a fixed-weight trajectory, cross-checked against the δ-sum
/// expansion.
pub fn forward_lambda_return<O>(traj: &Trajectory<O>, gamma: f64, lambda: f64) -> Result<Vec<f64>, VerifyError> {
    let (r, v) = (traj.rewards(), traj.values());
    let rec = lambda_return_recursive(&r, &v, traj.final_value, gamma, lambda);
    let sum = lambda_return_delta_sum(&r, &v, traj.final_value, gamma, lambda);
    let err = max_abs_diff(&rec, &sum);
    if err > LAMBDA_RETURN_TOL {
        return Err(VerifyError::Mismatch {
            what: "lambda-return forms",
            err,
            tol: LAMBDA_RETURN_TOL,
        });
    }
    Ok(rec)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Both sides of the forward/backward identity for frozen weights:
/// backward Σ_t δ_t z_t and forward Σ_t ∂U_t (G_t^λ − V(S_t)), densely.
pub fn forward_backward_sides<O>(
    traj: &Trajectory<O>,
    n_params: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let delta = traj.td_errors(gamma);
    let g = lambda_return_recursive(&traj.rewards(), &traj.values(), traj.final_value, gamma, lambda);
    let mut z = vec![0.0; n_params];
    let mut backward = vec![0.0; n_params];
    let mut forward = vec![0.0; n_params];
    for (t, step) in traj.steps.iter().enumerate() {
        z.iter_mut().for_each(|x| *x *= gamma * lambda);
        let grad_u = step.bundle.grad_u();
        for (i, gi) in grad_u.iter() {
            z[i] += gi;
            forward[i] += gi * (g[t] - step.value);
        }
        for (b, zi) in backward.iter_mut().zip(&z) {
            *b += delta[t] * zi;
        }
    }
    (backward, forward)
}

use super::vector::{memo_exp, LazyRunningMax};
use super::{
    divergence, guard, running_max, BetaView, MetaConfig, StepDiagnostics, StepSize, StepSizeTuner, TunerInput,
};
use crate::error::Result;
use crate::trace::Scatter;

/// Shared log step-size β̂ plus a per-weight correction β⃗; weight i uses
/// exp(β̂ + β⃗_i). Clipping only lowers β̂.
#[derive(Debug, Clone)]
pub struct MixedMetatrace {
    cfg: MetaConfig,
    beta_hat: f64,
    beta_vec: Vec<f64>,
    alpha: Vec<f64>,
    alpha_x: Vec<f64>,
    h_hat: Vec<f64>,
    h_vec: Vec<f64>,
    z_beta_hat: f64,
    z_beta_vec: Vec<f64>,
    v_hat: f64,
    v_vec: LazyRunningMax,
    u: f64,
    grad_u: Scatter,
    grad_h: Scatter,
    grad_delta: Scatter,
    diag: StepDiagnostics,
    steps: u64,
}

impl MixedMetatrace {
    pub fn new(n_params: usize, cfg: MetaConfig) -> Self {
        let beta0 = cfg.beta0();
        Self {
            cfg,
            beta_hat: beta0,
            beta_vec: vec![0.0; n_params],
            alpha: vec![cfg.alpha0; n_params],
            alpha_x: vec![beta0; n_params],
            h_hat: vec![0.0; n_params],
            h_vec: vec![0.0; n_params],
            z_beta_hat: 0.0,
            z_beta_vec: vec![0.0; n_params],
            v_hat: 0.0,
            v_vec: LazyRunningMax::new(n_params, cfg.mu),
            u: 0.0,
            grad_u: Scatter::new(n_params),
            grad_h: Scatter::new(n_params),
            grad_delta: Scatter::new(n_params),
            diag: StepDiagnostics::default(),
            steps: 0,
        }
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn beta_vec(&self) -> &[f64] {
        &self.beta_vec
    }

    pub fn h_hat(&self) -> &[f64] {
        &self.h_hat
    }

    pub fn h_vec(&self) -> &[f64] {
        &self.h_vec
    }

    pub fn z_beta_hat(&self) -> f64 {
        self.z_beta_hat
    }

    pub fn z_beta_vec(&self) -> &[f64] {
        &self.z_beta_vec
    }

    pub fn u(&self) -> f64 {
        self.u
    }
}

impl StepSizeTuner for MixedMetatrace {
    fn episode_reset(&mut self) {
        self.z_beta_vec.iter_mut().for_each(|z| *z = 0.0);
        self.z_beta_hat = 0.0;
        self.u = 0.0;
    }

    fn step(&mut self, inp: &TunerInput<'_>) -> Result<StepSize<'_>> {
        self.steps += 1;
        let now = self.steps;
        let gl = inp.gamma * inp.lambda;
        let mu = self.cfg.mu;
        let psi = inp.psi;
        let delta = inp.delta;
        let grad_u = inp.bundle.grad_u();
        let grad_delta = inp.bundle.grad_delta(inp.gamma);
        self.grad_u.load(grad_u);
        if psi != 0.0 {
            self.grad_h.load(&inp.bundle.grad_entropy);
        }
        self.grad_delta.load(&grad_delta);
        let support = inp.trace.support();

        let mut diag = StepDiagnostics {
            m: 1.0,
            ..Default::default()
        };

        // Vector pipeline.
        for &i in support {
            self.z_beta_vec[i] = gl * self.z_beta_vec[i] + self.grad_u.get(i) * self.h_vec[i];
            let d = self.z_beta_vec[i] * delta + psi * (self.grad_h.get(i) * self.h_vec[i]);
            if self.cfg.normalized {
                let v = self.v_vec.update(i, d.abs(), mu, now);
                let change = mu * d / guard(v);
                self.beta_vec[i] += change;
                diag.max_normalized_change = diag.max_normalized_change.max(change.abs());
            } else {
                self.beta_vec[i] += mu * d;
            }
        }

        // Scalar pipeline.
        self.z_beta_hat = gl * self.z_beta_hat + grad_u.dot_dense(&self.h_hat);
        let d_hat = self.z_beta_hat * delta + psi * inp.bundle.grad_entropy.dot_dense(&self.h_hat);
        if self.cfg.normalized {
            self.v_hat = running_max(self.v_hat, d_hat.abs(), mu);
            let change = mu * d_hat / guard(self.v_hat);
            self.beta_hat += change;
            diag.max_normalized_change = diag.max_normalized_change.max(change.abs());

            let effective: f64 = grad_u
                .iter()
                .map(|(i, g)| (self.beta_hat + self.beta_vec[i]).exp() * (g * g))
                .sum();
            self.u = running_max(self.u, effective, 1.0 - gl);
            let m = self.u.max(1.0);
            self.beta_hat -= m.ln();
            diag.effective_pre_clip = effective;
            diag.effective_post_clip = grad_u
                .iter()
                .map(|(i, g)| (self.beta_hat + self.beta_vec[i]).exp() * (g * g))
                .sum();
            diag.u = self.u;
            diag.m = m;
        } else {
            self.beta_hat += mu * d_hat;
        }
        self.diag = diag;

        // ⟨∂δ/∂w, ĥ⟩ must use ĥ from before this step's update.
        let c_hat = delta + grad_delta.dot_dense(&self.h_hat);
        let z = inp.trace.values();
        let mut finite = self.beta_hat.is_finite();
        for &i in support {
            let a = memo_exp(
                &mut self.alpha_x[i],
                &mut self.alpha[i],
                self.beta_hat + self.beta_vec[i],
            );
            let entropy_term = psi * self.grad_h.get(i);
            self.h_vec[i] += a * (z[i] * (delta + self.grad_delta.get(i) * self.h_vec[i]) + entropy_term);
            self.h_hat[i] += a * (z[i] * c_hat + entropy_term);
            finite &= a.is_finite() && self.h_vec[i].is_finite() && self.h_hat[i].is_finite();
        }
        self.grad_u.clear();
        self.grad_h.clear();
        self.grad_delta.clear();
        if !finite {
            return Err(divergence("mixed metatrace", now, "non-finite step-size or h".into()));
        }
        Ok(StepSize::Vector(&self.alpha))
    }

    fn beta(&self) -> BetaView<'_> {
        BetaView::Mixed(self.beta_hat, &self.beta_vec)
    }

    fn diagnostics(&self) -> StepDiagnostics {
        self.diag
    }
}

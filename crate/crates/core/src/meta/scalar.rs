use super::{
    divergence, guard, running_max, BetaView, ExpMemo, MetaConfig, StepDiagnostics, StepSize, StepSizeTuner, TunerInput,
};
use crate::error::Result;
use crate::trace::Scatter;

/// One log step-size β shared by every weight.
#[derive(Debug, Clone)]
pub struct ScalarMetatrace {
    cfg: MetaConfig,
    beta: f64,
    /// Estimate of ∂w/∂β.
    h: Vec<f64>,
    z_beta: f64,
    v: f64,
    u: f64,
    alpha: ExpMemo,
    grad_entropy: Scatter,
    diag: StepDiagnostics,
    steps: u64,
}

impl ScalarMetatrace {
    pub fn new(n_params: usize, cfg: MetaConfig) -> Self {
        Self {
            cfg,
            beta: cfg.beta0(),
            h: vec![0.0; n_params],
            z_beta: 0.0,
            v: 0.0,
            u: 0.0,
            alpha: ExpMemo::seeded(cfg.alpha0),
            grad_entropy: Scatter::new(n_params),
            diag: StepDiagnostics::default(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &MetaConfig {
        &self.cfg
    }

    pub fn beta_value(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.peek(self.beta)
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn z_beta(&self) -> f64 {
        self.z_beta
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn u(&self) -> f64 {
        self.u
    }
}

impl StepSizeTuner for ScalarMetatrace {
    fn episode_reset(&mut self) {
        self.z_beta = 0.0;
        self.u = 0.0;
    }

    fn step(&mut self, inp: &TunerInput<'_>) -> Result<StepSize<'_>> {
        self.steps += 1;
        let gl = inp.gamma * inp.lambda;
        let mu = self.cfg.mu;
        let grad_u = inp.bundle.grad_u();
        let grad_h = &inp.bundle.grad_entropy;

        self.z_beta = gl * self.z_beta + grad_u.dot_dense(&self.h);
        let delta_beta = self.z_beta * inp.delta + inp.psi * grad_h.dot_dense(&self.h);

        let mut diag = StepDiagnostics {
            m: 1.0,
            ..Default::default()
        };
        if self.cfg.normalized {
            self.v = running_max(self.v, delta_beta.abs(), mu);
            let change = mu * delta_beta / guard(self.v);
            self.beta += change;
            diag.max_normalized_change = change.abs();

            let grad_u_sq = grad_u.norm_sq();
            let effective = self.beta.exp() * grad_u_sq;
            self.u = running_max(self.u, effective, 1.0 - gl);
            let m = self.u.max(1.0);
            self.beta -= m.ln();
            diag.effective_pre_clip = effective;
            diag.effective_post_clip = self.beta.exp() * grad_u_sq;
            diag.u = self.u;
            diag.m = m;
        } else {
            self.beta += mu * delta_beta;
        }
        self.diag = diag;

        let alpha = self.alpha.eval(self.beta);
        if !alpha.is_finite() || !self.beta.is_finite() {
            return Err(divergence(
                "scalar metatrace",
                self.steps,
                format!("beta = {}", self.beta),
            ));
        }

        let c = inp.delta + inp.bundle.grad_delta(inp.gamma).dot_dense(&self.h);
        let z = inp.trace.values();
        if inp.psi != 0.0 {
            self.grad_entropy.load(grad_h);
        }
        let mut finite = true;
        for &i in inp.trace.support() {
            self.h[i] += alpha * (z[i] * c + inp.psi * self.grad_entropy.get(i));
            finite &= self.h[i].is_finite();
        }
        self.grad_entropy.clear();
        if !finite {
            return Err(divergence("scalar metatrace", self.steps, "non-finite h".into()));
        }
        Ok(StepSize::Scalar(alpha))
    }

    fn beta(&self) -> BetaView<'_> {
        BetaView::Scalar(self.beta)
    }

    fn diagnostics(&self) -> StepDiagnostics {
        self.diag
    }
}

use super::{
    divergence, guard, running_max, BetaView, ExpMemo, MetaConfig, StepDiagnostics, StepSize, StepSizeTuner, TunerInput,
};
use crate::error::Result;
use crate::trace::Scatter;

/// Running maxima that decay lazily for entries whose input is zero.
///
/// With input 0 the update max(0, v + μ(0 − v)) is multiplication by
/// max(1 − μ, 0), so untouched entries are brought up to date on read.
#[derive(Debug, Clone)]
pub(crate) struct LazyRunningMax {
    stored: Vec<f64>,
    stamp: Vec<u64>,
    decay: f64,
}

impl LazyRunningMax {
    pub fn new(n: usize, rate: f64) -> Self {
        Self {
            stored: vec![0.0; n],
            stamp: vec![0; n],
            decay: (1.0 - rate).max(0.0),
        }
    }

    /// Value of entry `i` as of the end of step `now`.
    pub fn get(&self, i: usize, now: u64) -> f64 {
        let k = now.saturating_sub(self.stamp[i]);
        match k {
            0 => self.stored[i],
            1 => self.stored[i] * self.decay,
            _ => self.stored[i] * self.decay.powi(k.min(i32::MAX as u64) as i32),
        }
    }

    /// Apply the running-max update for entry `i` at step `now` (≥ 1).
    pub fn update(&mut self, i: usize, x: f64, rate: f64, now: u64) -> f64 {
        let prev = self.get(i, now - 1);
        let v = running_max(prev, x, rate);
        self.stored[i] = v;
        self.stamp[i] = now;
        v
    }
}

/// `ExpMemo` over parallel slices, so step-sizes stay contiguous.
#[inline]
pub(crate) fn memo_exp(x_slot: &mut f64, y_slot: &mut f64, x: f64) -> f64 {
    let mut m = ExpMemo::from_parts(*x_slot, *y_slot);
    let y = m.eval(x);
    (*x_slot, *y_slot) = (x, y);
    y
}

/// One log step-size per weight.
#[derive(Debug, Clone)]
pub struct VectorMetatrace {
    cfg: MetaConfig,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    /// Exponent each `alpha` entry was computed from.
    alpha_x: Vec<f64>,
    h: Vec<f64>,
    z_beta: Vec<f64>,
    v: LazyRunningMax,
    u: f64,
    grad_u: Scatter,
    grad_h: Scatter,
    grad_delta: Scatter,
    diag: StepDiagnostics,
    steps: u64,
}

impl VectorMetatrace {
    pub fn new(n_params: usize, cfg: MetaConfig) -> Self {
        let beta0 = cfg.beta0();
        Self {
            cfg,
            beta: vec![beta0; n_params],
            alpha: vec![cfg.alpha0; n_params],
            alpha_x: vec![beta0; n_params],
            h: vec![0.0; n_params],
            z_beta: vec![0.0; n_params],
            v: LazyRunningMax::new(n_params, cfg.mu),
            u: 0.0,
            grad_u: Scatter::new(n_params),
            grad_h: Scatter::new(n_params),
            grad_delta: Scatter::new(n_params),
            diag: StepDiagnostics::default(),
            steps: 0,
        }
    }

    pub fn beta_values(&self) -> &[f64] {
        &self.beta
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn z_beta(&self) -> &[f64] {
        &self.z_beta
    }

    pub fn v_at(&self, i: usize) -> f64 {
        self.v.get(i, self.steps)
    }

    pub fn u(&self) -> f64 {
        self.u
    }
}

impl StepSizeTuner for VectorMetatrace {
    fn episode_reset(&mut self) {
        self.z_beta.iter_mut().for_each(|z| *z = 0.0);
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
        self.grad_u.load(grad_u);
        if psi != 0.0 {
            self.grad_h.load(&inp.bundle.grad_entropy);
        }
        self.grad_delta.load(&inp.bundle.grad_delta(inp.gamma));
        let support = inp.trace.support();

        let mut diag = StepDiagnostics {
            m: 1.0,
            ..Default::default()
        };
        for &i in support {
            self.z_beta[i] = gl * self.z_beta[i] + self.grad_u.get(i) * self.h[i];
            let d = self.z_beta[i] * delta + psi * (self.grad_h.get(i) * self.h[i]);
            if self.cfg.normalized {
                let v = self.v.update(i, d.abs(), mu, now);
                let change = mu * d / guard(v);
                self.beta[i] += change;
                diag.max_normalized_change = diag.max_normalized_change.max(change.abs());
            } else {
                self.beta[i] += mu * d;
            }
        }

        if self.cfg.normalized {
            let effective: f64 = grad_u.iter().map(|(i, g)| self.beta[i].exp() * (g * g)).sum();
            self.u = running_max(self.u, effective, 1.0 - gl);
            let m = self.u.max(1.0);
            if m > 1.0 {
                let log_m = m.ln();
                self.beta.iter_mut().for_each(|b| *b -= log_m);
            }
            diag.effective_pre_clip = effective;
            diag.effective_post_clip = grad_u.iter().map(|(i, g)| self.beta[i].exp() * (g * g)).sum();
            diag.u = self.u;
            diag.m = m;
        }
        self.diag = diag;

        let z = inp.trace.values();
        let mut finite = true;
        for &i in support {
            let a = memo_exp(&mut self.alpha_x[i], &mut self.alpha[i], self.beta[i]);
            self.h[i] += a * (z[i] * (delta + self.grad_delta.get(i) * self.h[i]) + psi * self.grad_h.get(i));
            finite &= a.is_finite() && self.h[i].is_finite();
        }
        self.grad_u.clear();
        self.grad_h.clear();
        self.grad_delta.clear();
        if !finite {
            return Err(divergence("vector metatrace", now, "non-finite step-size or h".into()));
        }
        Ok(StepSize::Vector(&self.alpha))
    }

    fn beta(&self) -> BetaView<'_> {
        BetaView::Vector(&self.beta)
    }

    fn diagnostics(&self) -> StepDiagnostics {
        self.diag
    }
}

use std::fmt;
use std::str::FromStr;

use crate::ac::AcConfig;
use crate::env::TimeoutMode;
use crate::error::{Error, Result};
use crate::features::DEFAULT_NOISY_FEATURES;
use crate::meta::{MetaConfig, TunerKind};
use crate::model::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    MountainCar,
    DriftingMountainCar,
}

impl EnvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mountain_car",
            EnvKind::DriftingMountainCar => "drifting_mountain_car",
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mountain_car" | "mc" => Ok(EnvKind::MountainCar),
            "drifting_mountain_car" | "drifting" => Ok(EnvKind::DriftingMountainCar),
            _ => Err(Error::Config(format!("unknown env '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

/// Everything that determines a run apart from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub model: ModelKind,
    pub tuner: TunerKind,
    pub normalized: bool,
    pub alpha0: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub psi: f64,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub drift_rate: f64,
    pub n_noisy: usize,
    pub window: usize,
    pub timeout: TimeoutMode,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::MountainCar,
            model: ModelKind::Linear,
            tuner: TunerKind::Fixed,
            normalized: true,
            alpha0: 2f64.powi(-7),
            mu: 2f64.powi(-8),
            gamma: 0.99,
            lambda: 0.8,
            psi: 0.0,
            episodes: 1000,
            seeds: (0..10).collect(),
            drift_rate: 0.0,
            n_noisy: DEFAULT_NOISY_FEATURES,
            window: 20,
            timeout: TimeoutMode::Terminate,
            hidden: 32,
            activation: Activation::Silu,
        }
    }
}

/// Parse a real, accepting `2^-7` style powers as well as plain decimals.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('^') {
        Some((base, exp)) => {
            let b: f64 = base.trim().parse().map_err(|_| bad_value("real", s))?;
            let e: f64 = exp.trim().parse().map_err(|_| bad_value("real", s))?;
            b.powf(e)
        }
        None => s.parse().map_err(|_| bad_value("real", s))?,
    };
    Ok(v)
}

/// Parse a seed list: `N` (seeds 0..N), `a..b`, or `a,b,c`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad_value("seed range", s))?;
        let b: u64 = b.trim().parse().map_err(|_| bad_value("seed range", s))?;
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse().map_err(|_| bad_value("seed list", s)))
            .collect();
    }
    let n: u64 = s.parse().map_err(|_| bad_value("seed count", s))?;
    Ok((0..n).collect())
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad_value("bool", s)),
    }
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| bad_value("count", s))
}

fn bad_value(kind: &str, s: &str) -> Error {
    Error::Config(format!("invalid {kind} '{s}'"))
}

impl ExperimentConfig {
    /// Set one field from its textual key and value. Keys match the CLI
    /// flag names; `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "env" => self.env = value.parse()?,
            "model" => self.model = value.parse()?,
            "tuner" => self.tuner = value.parse()?,
            "normalized" => self.normalized = parse_bool(value)?,
            "unnormalized" => self.normalized = !parse_bool(value)?,
            "alpha0" | "alpha" => self.alpha0 = parse_real(value)?,
            "mu" => self.mu = parse_real(value)?,
            "gamma" => self.gamma = parse_real(value)?,
            "lambda" => self.lambda = parse_real(value)?,
            "psi" => self.psi = parse_real(value)?,
            "episodes" => self.episodes = parse_count(value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "drift_rate" | "drift" => self.drift_rate = parse_real(value)?,
            "noisy_features" | "n_noisy" => self.n_noisy = parse_count(value)?,
            "window" => self.window = parse_count(value)?,
            "timeout" => {
                self.timeout = match value {
                    "terminate" => TimeoutMode::Terminate,
                    "truncate" => TimeoutMode::Truncate,
                    _ => return Err(bad_value("timeout mode", value)),
                }
            }
            "hidden" => self.hidden = parse_count(value)?,
            "activation" => {
                self.activation = match value {
                    "silu" => Activation::Silu,
                    "dsilu" => Activation::Dsilu,
                    _ => return Err(bad_value("activation", value)),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ac_config().validate()?;
        self.meta_config()?;
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.drift_rate) {
            return Err(Error::Config(format!(
                "drift_rate must lie in [0, 1], got {}",
                self.drift_rate
            )));
        }
        if self.model == ModelKind::Mlp && self.env == EnvKind::DriftingMountainCar {
            return Err(Error::Config(
                "the mlp model reads the raw state and has no drifting variant".into(),
            ));
        }
        if self.model == ModelKind::Mlp && self.hidden == 0 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ac_config(&self) -> AcConfig {
        AcConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            psi: self.psi,
        }
    }

    pub fn meta_config(&self) -> Result<MetaConfig> {
        MetaConfig::new(self.alpha0, self.mu, self.normalized)
    }

    /// Canonical `key=value` form; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let timeout = match self.timeout {
            TimeoutMode::Terminate => "terminate",
            TimeoutMode::Truncate => "truncate",
        };
        let activation = match self.activation {
            Activation::Silu => "silu",
            Activation::Dsilu => "dsilu",
        };
        format!(
            "env={}\nmodel={}\ntuner={}\nnormalized={}\nalpha0={:?}\nmu={:?}\ngamma={:?}\nlambda={:?}\npsi={:?}\n\
             episodes={}\nseeds={}\ndrift_rate={:?}\nnoisy_features={}\nwindow={}\ntimeout={}\nhidden={}\nactivation={}\n",
            self.env.as_str(),
            self.model.as_str(),
            self.tuner,
            self.normalized,
            self.alpha0,
            self.mu,
            self.gamma,
            self.lambda,
            self.psi,
            self.episodes,
            if seeds.len() == 1 { format!("{},", seeds[0]) } else { seeds.join(",") },
            self.drift_rate,
            self.n_noisy,
            self.window,
            timeout,
            self.hidden,
            activation,
        )
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{EnvKind, ExperimentConfig, ModelKind};
use crate::ac::{run_episode, AcLearner};
use crate::encoding::{DriftingEncoder, Encoder, RawStateEncoder, TileEncoder};
use crate::env::MountainCar;
use crate::error::{Error, Result};
use crate::features::{DriftState, N_TILE_FEATURES};
use crate::meta::{StepSizeTuner, Tuner, TunerKind};
use crate::model::{Approximator, LinearModel, Mlp};

/// Parameter index sets for β logging under linear FA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaGroups {
    pub critic_info: Vec<usize>,
    pub critic_noise: Vec<usize>,
    pub actor_info: Vec<usize>,
    pub actor_noise: Vec<usize>,
}

impl BetaGroups {
    /// Number of non-empty groups.
    pub fn count(&self) -> usize {
        self.as_array().iter().filter(|g| !g.is_empty()).count()
    }

    pub fn total_len(&self) -> usize {
        self.as_array().iter().map(|g| g.len()).sum()
    }

    pub fn as_array(&self) -> [&[usize]; 4] {
        [
            &self.critic_info,
            &self.critic_noise,
            &self.actor_info,
            &self.actor_noise,
        ]
    }
}

/// Split a linear model's parameters into {critic, actor} × {tile, noisy}.
/// Features past `N_TILE_FEATURES` are the noisy block.
pub fn beta_groups(model: &LinearModel) -> BetaGroups {
    let d = model.feature_dim();
    let tiles = d.min(N_TILE_FEATURES);
    let split = |r: std::ops::Range<usize>, info: &mut Vec<usize>, noise: &mut Vec<usize>| {
        info.extend(r.start..r.start + tiles);
        noise.extend(r.start + tiles..r.end);
    };
    let mut g = BetaGroups {
        critic_info: Vec::new(),
        critic_noise: Vec::new(),
        actor_info: Vec::new(),
        actor_noise: Vec::new(),
    };
    split(model.critic_range(), &mut g.critic_info, &mut g.critic_noise);
    for a in 0..model.n_actions() {
        split(model.actor_range(a), &mut g.actor_info, &mut g.actor_noise);
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub seed: u64,
    /// Zero-based episode index.
    pub episode: usize,
    pub ret: f64,
    pub steps: u32,
    /// Mean β per group at episode end (critic-info, critic-noise,
    /// actor-info, actor-noise); NaN for an empty group.
    pub betas: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRecord {
    pub seed: u64,
    /// Episode during which the run diverged; earlier rows are kept.
    pub episode: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub rows: Vec<EpisodeRow>,
    pub divergence: Option<DivergenceRecord>,
}

/// Raw per-episode results of an experiment over all its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub config: ExperimentConfig,
    /// Sorted by (seed, episode).
    pub rows: Vec<EpisodeRow>,
    pub beta_columns: bool,
    pub divergences: Vec<DivergenceRecord>,
}

impl LearningCurve {
    /// Seeds in sorted order, deduplicated.
    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.config.seeds.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Per-seed return sequences of length `config.episodes`. Episodes lost
    /// to divergence are filled with `fill`.
    pub fn returns_by_seed(&self, fill: f64) -> Vec<Vec<f64>> {
        self.seeds()
            .into_iter()
            .map(|seed| {
                let mut out = vec![fill; self.config.episodes];
                for r in self.rows.iter().filter(|r| r.seed == seed) {
                    out[r.episode] = r.ret;
                }
                out
            })
            .collect()
    }

    pub fn all_diverged(&self) -> bool {
        !self.config.seeds.is_empty() && self.seeds().len() == self.divergences.len()
    }
}

/// Per-seed random streams: the policy and environment share one stream,
/// feature drift and noise draw from another.
pub fn seed_streams(seed: u64) -> (ChaCha8Rng, u64) {
    let drift_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (ChaCha8Rng::seed_from_u64(seed), drift_seed)
}

/// Run one seed of an experiment.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let (rng, drift_seed) = seed_streams(seed);
    match (cfg.model, cfg.env) {
        (ModelKind::Linear, EnvKind::MountainCar) => {
            let model = LinearModel::new(N_TILE_FEATURES, 3);
            let groups = beta_groups(&model);
            run_with(cfg, seed, rng, model, TileEncoder::default(), Some(groups))
        }
        (ModelKind::Linear, EnvKind::DriftingMountainCar) => {
            let drift = DriftState::new(cfg.drift_rate, cfg.n_noisy, drift_seed)?;
            let encoder = DriftingEncoder::new(drift);
            let model = LinearModel::new(encoder.dim(), 3);
            let groups = beta_groups(&model);
            run_with(cfg, seed, rng, model, encoder, Some(groups))
        }
        (ModelKind::Mlp, EnvKind::MountainCar) => {
            let model = Mlp::new(2, cfg.hidden, 3, cfg.activation);
            run_with(cfg, seed, rng, model, RawStateEncoder, None)
        }
        (ModelKind::Mlp, EnvKind::DriftingMountainCar) => unreachable!("rejected by validate"),
    }
}

fn run_with<M, E>(
    cfg: &ExperimentConfig,
    seed: u64,
    mut rng: ChaCha8Rng,
    model: M,
    mut encoder: E,
    groups: Option<BetaGroups>,
) -> Result<RunOutput>
where
    M: Approximator,
    E: Encoder<Obs = M::Obs>,
{
    let mut learner = AcLearner::with_init(model, cfg.ac_config(), &mut rng)?;
    let mut tuner = Tuner::new(cfg.tuner, learner.n_params(), cfg.meta_config()?);
    let log_betas = groups.is_some() && cfg.tuner != TunerKind::Fixed;
    let mut env = MountainCar::new();
    let mut rows = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        match run_episode(&mut learner, &mut env, &mut encoder, &mut tuner, &mut rng, cfg.timeout) {
            Ok(rec) => {
                let betas = match (&groups, log_betas) {
                    (Some(g), true) => {
                        let view = tuner.beta();
                        let [a, b, c, d] = g.as_array();
                        Some([
                            view.mean_over(a),
                            view.mean_over(b),
                            view.mean_over(c),
                            view.mean_over(d),
                        ])
                    }
                    _ => None,
                };
                rows.push(EpisodeRow {
                    seed,
                    episode,
                    ret: rec.total_return,
                    steps: rec.steps,
                    betas,
                });
            }
            Err(e @ Error::Divergence { .. }) => {
                return Ok(RunOutput {
                    seed,
                    rows,
                    divergence: Some(DivergenceRecord {
                        seed,
                        episode,
                        message: e.to_string(),
                    }),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutput {
        seed,
        rows,
        divergence: None,
    })
}

/// Run every seed of `cfg` (in parallel) and collect the rows in
/// (seed, episode) order. Diverged seeds keep their completed episodes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let outputs: Vec<RunOutput> = seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut divergences = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        divergences.extend(out.divergence);
    }
    rows.sort_by_key(|r| (r.seed, r.episode));
    let beta_columns = cfg.model == ModelKind::Linear && cfg.tuner != TunerKind::Fixed;
    Ok(LearningCurve {
        config: cfg.clone(),
        rows,
        beta_columns,
        divergences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(tuner: TunerKind, env: EnvKind) -> ExperimentConfig {
        ExperimentConfig {
            env,
            tuner,
            episodes: 3,
            seeds: vec![2, 0, 1],
            drift_rate: if env == EnvKind::DriftingMountainCar { 1e-3 } else { 0.0 },
            ..Default::default()
        }
    }

    #[test]
    fn groups_partition_parameters() {
        let plain = beta_groups(&LinearModel::new(N_TILE_FEATURES, 3));
        assert_eq!(plain.count(), 2);
        assert_eq!(plain.total_len(), 4 * N_TILE_FEATURES);
        let drifting = beta_groups(&LinearModel::new(N_TILE_FEATURES + 32, 3));
        assert_eq!(drifting.count(), 4);
        assert_eq!(drifting.total_len(), 4 * (N_TILE_FEATURES + 32));
        assert_eq!(drifting.critic_noise, (1600..1632).collect::<Vec<_>>());
        let mut all: Vec<usize> = drifting.as_array().concat();
        all.sort_unstable();
        assert_eq!(all, (0..4 * 1632).collect::<Vec<_>>());
    }

    #[test]
    fn zero_episodes_is_empty() {
        let cfg = ExperimentConfig {
            episodes: 0,
            ..quick(TunerKind::Scalar, EnvKind::MountainCar)
        };
        let c = run_experiment(&cfg).unwrap();
        assert!(c.rows.is_empty());
        assert!(c.divergences.is_empty());
    }

    #[test]
    fn rows_sorted_and_reproducible() {
        let cfg = quick(TunerKind::Mixed, EnvKind::DriftingMountainCar);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let keys: Vec<(u64, usize)> = a.rows.iter().map(|r| (r.seed, r.episode)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert_eq!(a.rows.len(), 9);
        assert!(a.rows.iter().all(|r| r.betas.is_some()));
    }

    #[test]
    fn seed_order_does_not_matter() {
        let cfg = quick(TunerKind::Vector, EnvKind::MountainCar);
        let mut other = cfg.clone();
        other.seeds = vec![1, 2, 0];
        let a = run_experiment(&cfg).unwrap().rows;
        let b = run_experiment(&other).unwrap().rows;
        // NaN β fields (empty groups) compare unequal, so compare renderings.
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn runs_do_not_share_state() {
        let cfg = quick(TunerKind::Scalar, EnvKind::MountainCar);
        let alone = run_seed(&cfg, 1).unwrap();
        let together = run_experiment(&cfg).unwrap();
        let mine: Vec<EpisodeRow> = together.rows.into_iter().filter(|r| r.seed == 1).collect();
        assert_eq!(format!("{:?}", alone.rows), format!("{mine:?}"));
    }

    #[test]
    fn divergence_is_recorded_not_raised() {
        let cfg = ExperimentConfig {
            alpha0: 1e200,
            episodes: 2,
            seeds: vec![0],
            ..Default::default()
        };
        let c = run_experiment(&cfg).unwrap();
        assert!(c.all_diverged());
        assert_eq!(c.divergences[0].episode, 0);
        assert_eq!(c.returns_by_seed(-200.0), vec![vec![-200.0, -200.0]]);
    }

    #[test]
    fn mlp_runs() {
        let cfg = ExperimentConfig {
            model: ModelKind::Mlp,
            tuner: TunerKind::Mixed,
            episodes: 2,
            seeds: vec![0],
            psi: 0.01,
            mu: 0.001,
            ..Default::default()
        };
        let c = run_experiment(&cfg).unwrap();
        assert_eq!(c.rows.len(), 2);
        assert!(!c.beta_columns);
    }
}

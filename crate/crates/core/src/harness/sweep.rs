use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::aggregate::final_mean;
use super::config::{EnvKind, ExperimentConfig};
use super::csv::write_csv;
use super::run::{run_experiment, LearningCurve};
use crate::error::Result;
use crate::meta::TunerKind;

/// Cartesian grid over the swept hyperparameters. Empty axes take the base
/// config's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub tuner: Vec<TunerKind>,
    pub drift_rate: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub mu: Vec<f64>,
}

impl SweepGrid {
    /// One config per cell, ordered tuner, drift rate, α₀, μ. μ is ignored
    /// by the fixed tuner, so it contributes a single cell per α₀.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        fn or<T: Clone>(axis: &[T], dflt: T) -> Vec<T> {
            if axis.is_empty() {
                vec![dflt]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for &tuner in &or(&self.tuner, base.tuner) {
            for &drift_rate in &or(&self.drift_rate, base.drift_rate) {
                for &alpha0 in &or(&self.alpha0, base.alpha0) {
                    let mus = or(&self.mu, base.mu);
                    let mus = if tuner == TunerKind::Fixed { &mus[..1] } else { &mus[..] };
                    for &mu in mus {
                        out.push(ExperimentConfig {
                            tuner,
                            drift_rate,
                            alpha0,
                            mu,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Hex SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_text().as_bytes()))
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    pub file: String,
    pub hash: String,
    pub curve: LearningCurve,
}

impl SweepCell {
    pub fn config(&self) -> &ExperimentConfig {
        &self.curve.config
    }
}

pub const MANIFEST_HEADER: &str = "cell\tfile\ttuner\tnormalized\talpha0\tmu\tdrift_rate\tconfig_hash\tdiverged_seeds";

/// Run every cell of the grid. With `out_dir`, writes `cell_NNN.csv`,
/// `cell_NNN.cfg` and `manifest.tsv` there.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid, out_dir: Option<&Path>) -> Result<Vec<SweepCell>> {
    let configs = grid.cells(base);
    for c in &configs {
        c.validate()?;
    }
    let curves: Vec<LearningCurve> = configs.par_iter().map(run_experiment).collect::<Result<_>>()?;
    let cells: Vec<SweepCell> = curves
        .into_iter()
        .enumerate()
        .map(|(index, curve)| SweepCell {
            index,
            file: format!("cell_{index:03}.csv"),
            hash: config_hash(&curve.config),
            curve,
        })
        .collect();
    if let Some(dir) = out_dir {
        write_sweep(dir, &cells)?;
    }
    Ok(cells)
}

pub fn write_sweep(dir: &Path, cells: &[SweepCell]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = BufWriter::new(fs::File::create(dir.join("manifest.tsv"))?);
    writeln!(manifest, "{MANIFEST_HEADER}")?;
    for cell in cells {
        let cfg = cell.config();
        write_csv(&cell.curve, BufWriter::new(fs::File::create(dir.join(&cell.file))?))?;
        fs::write(dir.join(cell.file.replace(".csv", ".cfg")), cfg.to_text())?;
        let diverged: Vec<String> = cell.curve.divergences.iter().map(|d| d.seed.to_string()).collect();
        writeln!(
            manifest,
            "{}\t{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{}\t{}",
            cell.index,
            cell.file,
            cfg.tuner,
            cfg.normalized,
            cfg.alpha0,
            cfg.mu,
            cfg.drift_rate,
            cell.hash,
            diverged.join(",")
        )?;
    }
    manifest.flush()?;
    Ok(())
}

/// For each (tuner, drift rate, α₀), keep the μ whose final-`last`-episode
/// mean return is highest. Diverged episodes count as `fill`. Returns cell
/// indices in grid order.
pub fn best_mu(cells: &[SweepCell], last: usize, fill: f64) -> Vec<usize> {
    let mut best: Vec<(usize, f64)> = Vec::new();
    for cell in cells {
        let score = final_mean(&cell.curve.returns_by_seed(fill), last);
        let c = cell.config();
        let same_group = |o: &SweepCell| {
            let d = o.config();
            d.tuner == c.tuner && d.drift_rate == c.drift_rate && d.alpha0 == c.alpha0
        };
        match best.iter_mut().find(|(i, _)| same_group(&cells[*i])) {
            Some(entry) if score > entry.1 => *entry = (cell.index, score),
            Some(_) => {}
            None => best.push((cell.index, score)),
        }
    }
    best.into_iter().map(|(i, _)| i).collect()
}

/// A named experiment grid.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub base: ExperimentConfig,
    pub grid: SweepGrid,
}

pub const PRESET_NAMES: [&str; 4] = ["fig1", "fig2", "fig6", "fig7"];

/// Powers of two 2^lo ..= 2^hi.
pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

/// Episodes per drifting run in the drifting presets.
pub const DRIFTING_EPISODES: usize = 1000;

pub fn preset(name: &str) -> Option<Preset> {
    let mc = ExperimentConfig {
        episodes: 1000,
        seeds: (0..10).collect(),
        window: 20,
        ..Default::default()
    };
    let drifting = ExperimentConfig {
        env: EnvKind::DriftingMountainCar,
        alpha0: 2f64.powi(-10),
        mu: 2f64.powi(-10),
        episodes: DRIFTING_EPISODES,
        seeds: (0..20).collect(),
        drift_rate: 6e-6,
        window: 40,
        ..Default::default()
    };
    let p = match name {
        "fig1" => Preset {
            name: "fig1",
            base: ExperimentConfig {
                tuner: TunerKind::Fixed,
                ..mc
            },
            grid: SweepGrid {
                alpha0: powers_of_two(-12, -5),
                ..Default::default()
            },
        },
        "fig2" => Preset {
            name: "fig2",
            base: ExperimentConfig {
                tuner: TunerKind::Scalar,
                normalized: true,
                ..mc
            },
            grid: SweepGrid {
                alpha0: powers_of_two(-12, -5),
                mu: powers_of_two(-11, -6),
                ..Default::default()
            },
        },
        "fig6" => Preset {
            name: "fig6",
            base: drifting,
            grid: SweepGrid {
                tuner: TunerKind::ALL.to_vec(),
                drift_rate: vec![4e-6, 6e-6, 8e-6, 1e-5],
                mu: powers_of_two(-12, -6),
                ..Default::default()
            },
        },
        "fig7" => Preset {
            name: "fig7",
            base: drifting,
            grid: SweepGrid {
                tuner: vec![TunerKind::Scalar, TunerKind::Vector, TunerKind::Mixed],
                mu: powers_of_two(-12, -6),
                ..Default::default()
            },
        },
        _ => return None,
    };
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            episodes: 2,
            seeds: vec![0, 1],
            ..Default::default()
        }
    }

    #[test]
    fn grid_counting() {
        let grid = SweepGrid {
            tuner: vec![TunerKind::Scalar],
            alpha0: powers_of_two(-12, -7),
            mu: powers_of_two(-11, -6),
            ..Default::default()
        };
        assert_eq!(grid.cells(&tiny()).len(), 36);
        let fixed = SweepGrid {
            tuner: vec![TunerKind::Fixed],
            ..grid
        };
        assert_eq!(fixed.cells(&tiny()).len(), 6);
        assert_eq!(SweepGrid::default().cells(&tiny()), vec![tiny()]);
    }

    #[test]
    fn single_cell_equals_run_experiment() {
        let cells = sweep(&tiny(), &SweepGrid::default(), None).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].curve, run_experiment(&tiny()).unwrap());
    }

    #[test]
    fn writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SweepGrid {
            tuner: vec![TunerKind::Scalar],
            alpha0: vec![2f64.powi(-8), 2f64.powi(-7)],
            mu: vec![2f64.powi(-9)],
            ..Default::default()
        };
        sweep(&tiny(), &grid, Some(dir.path())).unwrap();
        let manifest = fs::read_to_string(dir.path().join("manifest.tsv")).unwrap();
        let lines: Vec<&str> = manifest.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], MANIFEST_HEADER);
        for f in ["cell_000.csv", "cell_001.csv", "cell_000.cfg", "cell_001.cfg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let cfg = ExperimentConfig::from_text(&fs::read_to_string(dir.path().join("cell_001.cfg")).unwrap()).unwrap();
        assert_eq!(cfg.alpha0, 2f64.powi(-7));
        assert!(lines[2].contains(&config_hash(&cfg)));
    }

    #[test]
    fn hash_tracks_config() {
        let a = tiny();
        let b = ExperimentConfig { mu: 0.5, ..tiny() };
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn presets_exist() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(!p.grid.cells(&p.base).is_empty());
        }
        assert_eq!(
            preset("fig1").unwrap().grid.cells(&preset("fig1").unwrap().base).len(),
            8
        );
        assert_eq!(
            preset("fig2").unwrap().grid.cells(&preset("fig2").unwrap().base).len(),
            48
        );
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn best_mu_picks_highest_tail() {
        use crate::harness::EpisodeRow;
        let make = |index: usize, mu: f64, ret: f64| {
            let config = ExperimentConfig {
                tuner: TunerKind::Scalar,
                mu,
                episodes: 1,
                seeds: vec![0],
                ..Default::default()
            };
            SweepCell {
                index,
                file: String::new(),
                hash: String::new(),
                curve: LearningCurve {
                    config,
                    rows: vec![EpisodeRow {
                        seed: 0,
                        episode: 0,
                        ret,
                        steps: 1,
                        betas: None,
                    }],
                    beta_columns: false,
                    divergences: Vec::new(),
                },
            }
        };
        let cells = vec![make(0, 0.1, -150.0), make(1, 0.2, -120.0), make(2, 0.3, -130.0)];
        assert_eq!(best_mu(&cells, 100, -200.0), vec![1]);
    }
}

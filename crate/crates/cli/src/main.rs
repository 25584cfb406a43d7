//! `metatrace` command-line runner.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metatrace::harness::{
    aggregate, best_mu, csv_string, parse_real, preset, run_experiment, sweep, ExperimentConfig, LearningCurve,
    SweepGrid,
};
use metatrace::TunerKind;

#[derive(Parser)]
#[command(
    name = "metatrace",
    version,
    about = "Actor-critic step-size tuning experiments on mountain car"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over its seeds.
    Run(ExpArgs),
    /// Run a grid; --tuner, --alpha0, --mu and --drift-rate take comma lists.
    Sweep(ExpArgs),
    /// Run the oracle check suite.
    Check,
}

#[derive(Args, Default)]
struct ExpArgs {
    /// Named grid: fig1, fig2, fig6 or fig7.
    #[arg(long)]
    preset: Option<String>,
    /// File of key=value lines; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    tuner: Option<String>,
    #[arg(long, conflicts_with = "unnormalized")]
    normalized: bool,
    #[arg(long)]
    unnormalized: bool,
    #[arg(long, allow_hyphen_values = true)]
    alpha0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    /// N (seeds 0..N), a..b, or a,b,c.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    drift_rate: Option<String>,
    #[arg(long)]
    noisy_features: Option<String>,
    /// Smoothing window for the printed summary.
    #[arg(long)]
    window: Option<String>,
    /// terminate (default) or truncate.
    #[arg(long)]
    timeout: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    /// Output directory; without it `run` writes CSV to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error raised for bad input, reported with exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const AXES: [&str; 4] = ["tuner", "alpha0", "mu", "drift_rate"];

impl ExpArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let fields: [(&'static str, &Option<String>); 16] = [
            ("env", &self.env),
            ("model", &self.model),
            ("tuner", &self.tuner),
            ("alpha0", &self.alpha0),
            ("mu", &self.mu),
            ("gamma", &self.gamma),
            ("lambda", &self.lambda),
            ("psi", &self.psi),
            ("episodes", &self.episodes),
            ("seeds", &self.seeds),
            ("drift_rate", &self.drift_rate),
            ("noisy_features", &self.noisy_features),
            ("window", &self.window),
            ("timeout", &self.timeout),
            ("hidden", &self.hidden),
            ("activation", &self.activation),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        }
        if self.normalized {
            out.push(("normalized", "true".into()));
        }
        if self.unnormalized {
            out.push(("normalized", "false".into()));
        }
        out
    }

    /// Base config and grid: preset, then config file, then flags. In sweep
    /// mode the grid axes accept comma lists.
    fn resolve(&self, sweep_mode: bool) -> Result<(ExperimentConfig, SweepGrid)> {
        let (mut cfg, mut grid) = match &self.preset {
            Some(name) => {
                let p = preset(name).ok_or_else(|| Usage(format!("unknown preset '{name}'")))?;
                (p.base, p.grid)
            }
            None => (ExperimentConfig::default(), SweepGrid::default()),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text)
                .map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        }
        for (k, v) in self.pairs() {
            if sweep_mode && AXES.contains(&k) && v.contains(',') {
                let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                match k {
                    "tuner" => {
                        grid.tuner = items
                            .iter()
                            .map(|s| s.parse::<TunerKind>())
                            .collect::<Result<_, _>>()
                            .map_err(|e| Usage(e.to_string()))?
                    }
                    _ => {
                        let vals: Vec<f64> = items
                            .iter()
                            .map(|s| parse_real(s))
                            .collect::<Result<_, _>>()
                            .map_err(|e| Usage(e.to_string()))?;
                        match k {
                            "alpha0" => grid.alpha0 = vals,
                            "mu" => grid.mu = vals,
                            _ => grid.drift_rate = vals,
                        }
                    }
                }
            } else {
                cfg.set(k, &v)
                    .map_err(|e| Usage(format!("--{}: {e}", k.replace('_', "-"))))?;
                // An explicit single value replaces a preset's axis.
                match k {
                    "tuner" => grid.tuner.clear(),
                    "alpha0" => grid.alpha0.clear(),
                    "mu" => grid.mu.clear(),
                    "drift_rate" => grid.drift_rate.clear(),
                    _ => {}
                }
            }
        }
        cfg.validate().map_err(|e| Usage(e.to_string()))?;
        Ok((cfg, grid))
    }
}

fn summary_line(curve: &LearningCurve) -> String {
    let cfg = &curve.config;
    let returns = curve.returns_by_seed(-200.0);
    let tail = if cfg.episodes == 0 {
        f64::NAN
    } else {
        aggregate::final_mean(&returns, 100)
    };
    let smoothed = aggregate::aggregate(&returns, cfg.window);
    let last = smoothed.last().copied().unwrap_or(f64::NAN);
    format!(
        "tuner={} alpha0={:e} mu={:e} drift={:e} seeds={} final100={:.2} smoothed_last={:.2} diverged={}",
        cfg.tuner,
        cfg.alpha0,
        cfg.mu,
        cfg.drift_rate,
        cfg.seeds.len(),
        tail,
        last,
        curve.divergences.len()
    )
}

fn write_run(out: Option<&Path>, curve: &LearningCurve) -> Result<()> {
    let csv = csv_string(curve);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("curve.csv"), csv)?;
            fs::write(dir.join("config.cfg"), curve.config.to_text())?;
            let mut div = String::new();
            for d in &curve.divergences {
                div.push_str(&format!("{}\t{}\t{}\n", d.seed, d.episode, d.message));
            }
            fs::write(dir.join("divergences.tsv"), div)?;
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn cmd_run(args: &ExpArgs) -> Result<bool> {
    if args.preset.is_some() {
        bail!(Usage("presets are grids; use `metatrace sweep --preset`".into()));
    }
    let (cfg, _) = args.resolve(false)?;
    let curve = run_experiment(&cfg)?;
    write_run(args.out.as_deref(), &curve)?;
    eprintln!("{}", summary_line(&curve));
    for d in &curve.divergences {
        eprintln!("diverged: seed {} episode {}: {}", d.seed, d.episode, d.message);
    }
    Ok(curve.all_diverged())
}

fn cmd_sweep(args: &ExpArgs) -> Result<bool> {
    let (cfg, grid) = args.resolve(true)?;
    let cells = sweep(&cfg, &grid, args.out.as_deref())?;
    for c in &cells {
        eprintln!("[{}] {}", c.file, summary_line(&c.curve));
    }
    if grid.mu.len() > 1 {
        let best: Vec<String> = best_mu(&cells, 100, -200.0)
            .iter()
            .map(|&i| cells[i].file.clone())
            .collect();
        eprintln!("best mu per (tuner, drift, alpha0): {}", best.join(" "));
    }
    Ok(!cells.is_empty() && cells.iter().all(|c| c.curve.all_diverged()))
}

fn cmd_check() -> bool {
    let results = metatrace_verify::check_suite();
    let mut ok = true;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    ok
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check => {
            return if cmd_check() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: every seed diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

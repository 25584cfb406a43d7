use std::io::Write;

use super::run::LearningCurve;
use crate::error::Result;

pub const CSV_HEADER: &str = "seed,episode,return,steps";
pub const BETA_HEADER: &str = "beta_critic_info,beta_critic_noise,beta_actor_info,beta_actor_noise";

/// Shortest round-trip decimal; empty for NaN (an empty β group).
fn real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn write_csv<W: Write>(curve: &LearningCurve, mut w: W) -> Result<()> {
    if curve.beta_columns {
        writeln!(w, "{CSV_HEADER},{BETA_HEADER}")?;
    } else {
        writeln!(w, "{CSV_HEADER}")?;
    }
    for r in &curve.rows {
        write!(w, "{},{},{},{}", r.seed, r.episode, real(r.ret), r.steps)?;
        if curve.beta_columns {
            let b = r.betas.unwrap_or([f64::NAN; 4]);
            write!(w, ",{},{},{},{}", real(b[0]), real(b[1]), real(b[2]), real(b[3]))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn csv_string(curve: &LearningCurve) -> String {
    let mut buf = Vec::new();
    write_csv(curve, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EpisodeRow, ExperimentConfig};

    #[test]
    fn layout() {
        let mut curve = LearningCurve {
            config: ExperimentConfig::default(),
            rows: vec![EpisodeRow {
                seed: 3,
                episode: 0,
                ret: -200.0,
                steps: 200,
                betas: Some([-6.5, f64::NAN, 0.1, f64::NAN]),
            }],
            beta_columns: true,
            divergences: Vec::new(),
        };
        assert_eq!(
            csv_string(&curve),
            "seed,episode,return,steps,beta_critic_info,beta_critic_noise,beta_actor_info,beta_actor_noise\n\
             3,0,-200.0,200,-6.5,,0.1,\n"
        );
        curve.beta_columns = false;
        assert_eq!(csv_string(&curve), "seed,episode,return,steps\n3,0,-200.0,200\n");
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -6.931471805599453, 1e-300, 123456789.125] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }
}

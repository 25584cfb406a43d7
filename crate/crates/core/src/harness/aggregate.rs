//! Smoothing and summary statistics over per-seed return curves.

/// Trailing average with the window clipped at the start of the sequence.
pub fn trailing_mean(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Per-episode mean over seeds of each seed's trailing-window average.
pub fn aggregate(curves: &[Vec<f64>], window: usize) -> Vec<f64> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let n = first.len();
    assert!(curves.iter().all(|c| c.len() == n), "curves must have equal length");
    let mut mean = vec![0.0; n];
    for c in curves {
        for (m, s) in mean.iter_mut().zip(trailing_mean(c, window)) {
            *m += s;
        }
    }
    let k = curves.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    mean
}

/// Mean of the last `last` entries (all of them if shorter).
pub fn tail_mean(xs: &[f64], last: usize) -> f64 {
    let tail = &xs[xs.len().saturating_sub(last)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Per-seed mean return over the final `last` episodes.
pub fn final_means(curves: &[Vec<f64>], last: usize) -> Vec<f64> {
    curves.iter().map(|c| tail_mean(c, last)).collect()
}

/// Mean over seeds of the final-`last`-episode mean return.
pub fn final_mean(curves: &[Vec<f64>], last: usize) -> f64 {
    let m = final_means(curves, last);
    m.iter().sum::<f64>() / m.len() as f64
}

/// max − min of a set of values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Index of the candidate with the highest final-`last`-episode mean
/// return; ties go to the earliest candidate.
pub fn best_by_final(candidates: &[Vec<Vec<f64>>], last: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let m = final_mean(c, last);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

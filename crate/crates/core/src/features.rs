//! Tile coding over the mountain-car state box, and the drifting/noisy
//! wrapper that flips feature signs and appends random binary features.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{check_range, McState, MAX_POSITION, MAX_SPEED, MIN_POSITION};
use crate::error::Result;
use crate::sparse::SparseVec;

pub const N_TILINGS: usize = 16;
pub const TILES_PER_DIM: usize = 10;
pub const TILES_PER_TILING: usize = TILES_PER_DIM * TILES_PER_DIM;
pub const N_TILE_FEATURES: usize = N_TILINGS * TILES_PER_TILING;
pub const DEFAULT_NOISY_FEATURES: usize = 32;

/// Signed sparse feature vector.
///
/// `active` holds every non-zero entry in increasing index order. When the
/// vector comes from the drifting wrapper, `tail` is the dense block of noisy
/// features (values 0 or 1) that starts at `tail_start`; their non-zero
/// entries are also listed in `active`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures {
    dim: usize,
    active: SparseVec,
    tail_start: usize,
    tail: Vec<f64>,
}

impl SparseFeatures {
    pub fn new(dim: usize, active: SparseVec) -> Self {
        debug_assert!(active.max_index().is_none_or(|m| m < dim));
        Self {
            dim,
            active,
            tail_start: dim,
            tail: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active(&self) -> &SparseVec {
        &self.active
    }

    pub fn tail_start(&self) -> usize {
        self.tail_start
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.active.iter()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.active.to_dense(self.dim)
    }
}

/// 16 offset 10x10 grids over (position, velocity).
///
/// Tiling `i` is shifted by `i/16` of a cell in both dimensions; cells pushed
/// past the upper edge are clamped into the last row/column. Feature index is
/// `100*tiling + 10*row + column` with rows indexing velocity and columns
/// position.
#[derive(Debug, Clone, Copy, Default)]
pub struct TileCoder;

impl TileCoder {
    pub fn dim(&self) -> usize {
        N_TILE_FEATURES
    }

    pub fn encode(&self, position: f64, velocity: f64) -> Result<SparseFeatures> {
        check_range("position", position, MIN_POSITION, MAX_POSITION)?;
        check_range("velocity", velocity, -MAX_SPEED, MAX_SPEED)?;
        let px = (position - MIN_POSITION) / (MAX_POSITION - MIN_POSITION) * TILES_PER_DIM as f64;
        let vx = (velocity + MAX_SPEED) / (2.0 * MAX_SPEED) * TILES_PER_DIM as f64;
        let last = (TILES_PER_DIM - 1) as f64;
        let mut active = SparseVec::with_capacity(N_TILINGS);
        for tiling in 0..N_TILINGS {
            let offset = tiling as f64 / N_TILINGS as f64;
            let col = (px + offset).floor().clamp(0.0, last) as usize;
            let row = (vx + offset).floor().clamp(0.0, last) as usize;
            active.push(tiling * TILES_PER_TILING + row * TILES_PER_DIM + col, 1.0);
        }
        Ok(SparseFeatures::new(N_TILE_FEATURES, active))
    }

    pub fn encode_state(&self, s: &McState) -> Result<SparseFeatures> {
        self.encode(s.position, s.velocity)
    }
}

/// Sign-flip drift over the tile features plus fresh noisy features.
///
/// Flips are Bernoulli(`drift_rate`) per feature per step. They are sampled
/// by geometric skipping over the flattened (step, feature) trial sequence,
/// which has the same distribution as one Bernoulli draw per trial.
#[derive(Debug, Clone)]
pub struct DriftState {
    signs: Vec<f64>,
    drift_rate: f64,
    n_noisy: usize,
    rng: ChaCha8Rng,
    /// Trials remaining before the next flip; `None` when the rate is zero.
    until_flip: Option<u64>,
}

impl DriftState {
    pub fn new(drift_rate: f64, n_noisy: usize, seed: u64) -> Result<Self> {
        check_range("drift_rate", drift_rate, 0.0, 1.0)?;
        let mut d = Self {
            signs: vec![1.0; N_TILE_FEATURES],
            drift_rate,
            n_noisy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            until_flip: None,
        };
        d.until_flip = d.sample_gap();
        Ok(d)
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    pub fn n_noisy(&self) -> usize {
        self.n_noisy
    }

    pub fn dim(&self) -> usize {
        N_TILE_FEATURES + self.n_noisy
    }

    /// Number of failures before the next success of a Bernoulli(rate) sequence.
    fn sample_gap(&mut self) -> Option<u64> {
        if self.drift_rate <= 0.0 {
            None
        } else if self.drift_rate >= 1.0 {
            Some(0)
        } else {
            let u: f64 = 1.0 - self.rng.gen::<f64>(); // (0, 1]
            let gap = (u.ln() / (1.0 - self.drift_rate).ln()).floor();
            Some(if gap >= u64::MAX as f64 { u64::MAX } else { gap as u64 })
        }
    }

    /// Advance one environment step: each sign flips independently with
    /// probability `drift_rate`. Returns the number of flips.
    pub fn step(&mut self) -> usize {
        let n = self.signs.len() as u64;
        let mut pos = 0u64;
        let mut flips = 0;
        while let Some(gap) = self.until_flip {
            match pos.checked_add(gap) {
                Some(k) if k < n => {
                    self.signs[k as usize] = -self.signs[k as usize];
                    flips += 1;
                    pos = k + 1;
                    self.until_flip = self.sample_gap();
                }
                _ => {
                    self.until_flip = Some(gap - (n - pos));
                    break;
                }
            }
        }
        flips
    }

    /// Apply the current signs to a plain tile encoding and append freshly
    /// drawn noisy features.
    pub fn encode(&mut self, base: &SparseFeatures) -> SparseFeatures {
        debug_assert_eq!(base.dim(), N_TILE_FEATURES);
        let mut active = SparseVec::with_capacity(base.active().len() + self.n_noisy);
        for (i, v) in base.iter() {
            active.push(i, v * self.signs[i]);
        }
        let mut tail = Vec::with_capacity(self.n_noisy);
        let mut bits = 0u64;
        for k in 0..self.n_noisy {
            if k % 64 == 0 {
                bits = self.rng.next_u64();
            }
            let on = (bits >> (k % 64)) & 1 == 1;
            tail.push(if on { 1.0 } else { 0.0 });
            if on {
                active.push(N_TILE_FEATURES + k, 1.0);
            }
        }
        SparseFeatures {
            dim: N_TILE_FEATURES + self.n_noisy,
            active,
            tail_start: N_TILE_FEATURES,
            tail,
        }
    }

    #[cfg(test)]
    fn set_sign(&mut self, i: usize, s: f64) {
        self.signs[i] = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
        (0..=n).flat_map(move |i| {
            (0..=n).map(move |j| {
                (
                    MIN_POSITION + (MAX_POSITION - MIN_POSITION) * i as f64 / n as f64,
                    -MAX_SPEED + 2.0 * MAX_SPEED * j as f64 / n as f64,
                )
            })
        })
    }

    #[test]
    fn sixteen_active_one_per_tiling() {
        for (p, v) in grid(37) {
            let f = TileCoder.encode(p, v).unwrap();
            assert_eq!(f.active().len(), 16);
            for (t, (i, val)) in f.iter().enumerate() {
                assert!(i >= 100 * t && i < 100 * (t + 1));
                assert_eq!(val, 1.0);
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let a = TileCoder.encode(-0.3, 0.01).unwrap();
        let b = TileCoder.encode(-0.3, 0.01).unwrap();
        assert_eq!(a, b);
    }

    /// Cell membership computed independently from the grid definition.
    fn cells(p: f64, v: f64) -> Vec<(usize, usize, usize)> {
        (0..16)
            .map(|t| {
                let wp = 1.8 / 10.0;
                let wv = 0.14 / 10.0;
                let off = t as f64 / 16.0;
                let c = (((p + 1.2) / wp) + off).floor().clamp(0.0, 9.0) as usize;
                let r = (((v + 0.07) / wv) + off).floor().clamp(0.0, 9.0) as usize;
                (t, r, c)
            })
            .collect()
    }

    #[test]
    fn same_cells_same_features_and_corners_disjoint() {
        let (p1, v1) = (-0.5, 0.0);
        let (p2, v2) = (-0.5 + 1e-6, 1e-7);
        assert_eq!(cells(p1, v1), cells(p2, v2));
        assert_eq!(TileCoder.encode(p1, v1).unwrap(), TileCoder.encode(p2, v2).unwrap());
        let lo = TileCoder.encode(MIN_POSITION, -MAX_SPEED).unwrap();
        let hi = TileCoder.encode(MAX_POSITION, MAX_SPEED).unwrap();
        assert!(lo.active().indices().iter().all(|i| !hi.active().indices().contains(i)));
        let expected: Vec<usize> = cells(MAX_POSITION, MAX_SPEED)
            .into_iter()
            .map(|(t, r, c)| 100 * t + 10 * r + c)
            .collect();
        assert_eq!(hi.active().indices(), expected.as_slice());
    }

    #[test]
    fn grid_covers_every_feature() {
        let mut hit = vec![false; N_TILE_FEATURES];
        for (p, v) in grid(400) {
            for (i, _) in TileCoder.encode(p, v).unwrap().iter() {
                hit[i] = true;
            }
        }
        assert!(hit.iter().all(|&h| h));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(TileCoder.encode(0.61, 0.0).is_err());
        assert!(TileCoder.encode(0.0, -0.071).is_err());
    }

    #[test]
    fn zero_rate_never_flips() {
        let mut d = DriftState::new(0.0, 32, 1).unwrap();
        for _ in 0..100 {
            assert_eq!(d.step(), 0);
        }
        assert!(d.signs().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn unit_rate_flips_everything() {
        let mut d = DriftState::new(1.0, 32, 1).unwrap();
        assert_eq!(d.step(), N_TILE_FEATURES);
        assert!(d.signs().iter().all(|&s| s == -1.0));
        d.step();
        assert!(d.signs().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn flip_count_matches_binomial_mean() {
        // 10^6 feature-steps at 6e-6 gives 6 expected flips; sum many
        // independent replicates to keep the check tight.
        let steps = 1_000_000 / N_TILE_FEATURES; // 625 steps
        let reps = 200;
        let mut total = 0usize;
        for seed in 0..reps {
            let mut d = DriftState::new(6e-6, 32, seed).unwrap();
            total += (0..steps).map(|_| d.step()).sum::<usize>();
        }
        let mean = total as f64 / reps as f64;
        let expected = 6e-6 * (steps * N_TILE_FEATURES) as f64;
        // Poisson sd of the mean: sqrt(6/200) ~ 0.17
        assert!((mean - expected).abs() < 0.7, "mean flips {mean}");
    }

    #[test]
    fn identity_signs_preserve_base() {
        let base = TileCoder.encode(-0.5, 0.0).unwrap();
        let mut d = DriftState::new(0.0, 32, 5).unwrap();
        let out = d.encode(&base);
        assert_eq!(out.dim(), 1632);
        assert_eq!(out.tail().len(), 32);
        let tile_part: Vec<_> = out.iter().filter(|&(i, _)| i < 1600).collect();
        assert_eq!(tile_part, base.iter().collect::<Vec<_>>());
        for (k, &t) in out.tail().iter().enumerate() {
            assert!(t == 0.0 || t == 1.0);
            assert_eq!(out.active().get(1600 + k), t);
        }
    }

    #[test]
    fn flipped_sign_reports_minus_one() {
        let base = TileCoder.encode(-0.5, 0.0).unwrap();
        let target = base.active().indices()[3];
        let mut d = DriftState::new(0.0, 32, 5).unwrap();
        d.set_sign(target, -1.0);
        let out = d.encode(&base);
        assert_eq!(out.active().get(target), -1.0);
        let before: Vec<usize> = base.active().indices().to_vec();
        let after: Vec<usize> = out.iter().filter(|&(i, _)| i < 1600).map(|(i, _)| i).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn sixteen_noisy_features_active_on_average() {
        let base = TileCoder.encode(-0.5, 0.0).unwrap();
        let mut d = DriftState::new(0.0, 32, 11).unwrap();
        let n = 10_000;
        let total: f64 = (0..n).map(|_| d.encode(&base).tail().iter().sum::<f64>()).sum();
        let mean = total / n as f64;
        assert!((mean - 16.0).abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn noisy_features_independent_across_steps() {
        // 2x2 contingency of (on at t, on at t+1) for one feature, chi-square
        // against independence with 1 dof; 15.1 is the 0.9999 quantile.
        let base = TileCoder.encode(-0.5, 0.0).unwrap();
        let mut d = DriftState::new(0.0, 32, 17).unwrap();
        let mut counts = [[0f64; 2]; 2];
        let mut prev = d.encode(&base).tail().to_vec();
        for _ in 0..20_000 {
            let cur = d.encode(&base).tail().to_vec();
            for k in 0..32 {
                counts[prev[k] as usize][cur[k] as usize] += 1.0;
            }
            prev = cur;
        }
        let total: f64 = counts.iter().flatten().sum();
        let mut chi2 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let row: f64 = counts[a].iter().sum();
                let col = counts[0][b] + counts[1][b];
                let e = row * col / total;
                chi2 += (counts[a][b] - e).powi(2) / e;
            }
        }
        assert!(chi2 < 15.1, "chi2 {chi2}");
    }
}

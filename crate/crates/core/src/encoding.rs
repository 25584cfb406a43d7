//! Observation encoders turning a mountain-car state into model input.

use crate::env::{McState, MAX_POSITION, MAX_SPEED, MIN_POSITION};
use crate::error::Result;
use crate::features::{DriftState, SparseFeatures, TileCoder};

pub trait Encoder {
    type Obs;

    /// Feature dimension of the produced observations.
    fn dim(&self) -> usize;

    /// Called once per environment step, before the new state is encoded.
    fn advance(&mut self) {}

    fn encode(&mut self, state: &McState) -> Result<Self::Obs>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TileEncoder {
    coder: TileCoder,
}

impl Encoder for TileEncoder {
    type Obs = SparseFeatures;

    fn dim(&self) -> usize {
        self.coder.dim()
    }

    fn encode(&mut self, state: &McState) -> Result<SparseFeatures> {
        self.coder.encode_state(state)
    }
}

/// Tile features with sign drift and appended noisy features.
#[derive(Debug, Clone)]
pub struct DriftingEncoder {
    coder: TileCoder,
    drift: DriftState,
}

impl DriftingEncoder {
    pub fn new(drift: DriftState) -> Self {
        Self {
            coder: TileCoder,
            drift,
        }
    }

    pub fn drift(&self) -> &DriftState {
        &self.drift
    }
}

impl Encoder for DriftingEncoder {
    type Obs = SparseFeatures;

    fn dim(&self) -> usize {
        self.drift.dim()
    }

    fn advance(&mut self) {
        self.drift.step();
    }

    fn encode(&mut self, state: &McState) -> Result<SparseFeatures> {
        let base = self.coder.encode_state(state)?;
        Ok(self.drift.encode(&base))
    }
}

/// Raw (position, velocity) rescaled to roughly [-1, 1] for the MLP.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawStateEncoder;

impl Encoder for RawStateEncoder {
    type Obs = Vec<f64>;

    fn dim(&self) -> usize {
        2
    }

    fn encode(&mut self, state: &McState) -> Result<Vec<f64>> {
        state.validate()?;
        Ok(vec![
            2.0 * (state.position - MIN_POSITION) / (MAX_POSITION - MIN_POSITION) - 1.0,
            state.velocity / MAX_SPEED,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_encoding_spans_unit_box() {
        let mut e = RawStateEncoder;
        let lo = e.encode(&McState::new(MIN_POSITION, -MAX_SPEED).unwrap()).unwrap();
        let hi = e.encode(&McState::new(MAX_POSITION, MAX_SPEED).unwrap()).unwrap();
        assert_eq!(lo, vec![-1.0, -1.0]);
        assert_eq!(hi, vec![1.0, 1.0]);
    }

    #[test]
    fn drifting_encoder_dimension() {
        let e = DriftingEncoder::new(DriftState::new(1e-5, 32, 0).unwrap());
        assert_eq!(e.dim(), 1632);
        assert_eq!(TileEncoder::default().dim(), 1600);
    }
}

//! Seeded bounded noise on `[-1, 1]`.
//!
//! Generator: ChaCha20 keyed by four SplitMix64 outputs of the seed, with
//! the 64-bit ChaCha stream selector set to `stream_id`. Run `i` of an
//! ensemble uses stream `i`, so a run's draws never depend on which other
//! runs exist or in which order they execute.
//!
//! * `UniformSym`: `(u >> 11) * 2^-52 - 1` for a raw 64-bit word `u`.
//! * `TwoPoint(p)`: `+1` when `(u >> 11) * 2^-53 < p`, else `-1`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    UniformSym,
    TwoPoint { p: f64 },
}

impl NoiseKind {
    pub fn two_point(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Parameter(format!("two-point probability {p} must lie in (0, 1)")));
        }
        Ok(NoiseKind::TwoPoint { p })
    }

    /// True when the draws have zero mean.
    pub fn is_centered(&self) -> bool {
        match *self {
            NoiseKind::UniformSym => true,
            NoiseKind::TwoPoint { p } => p == 0.5,
        }
    }

    /// True for the kinds with a continuous density positive on `[-1, 1]`.
    pub fn has_density(&self) -> bool {
        matches!(self, NoiseKind::UniformSym)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        if !kind.is_centered() {
            log::warn!("noise kind {kind:?} has non-zero mean");
        }
        Self { kind, seed, stream_id: 0 }
    }

    pub fn uniform(seed: u64) -> Self {
        Self::new(NoiseKind::UniformSym, seed)
    }

    pub fn substream(&self, run_index: u64) -> Self {
        Self { stream_id: run_index, ..*self }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream::new(*self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single consumer's view of a noise model.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    kind: NoiseKind,
    rng: ChaCha20Rng,
    draws: u64,
}

impl NoiseStream {
    pub fn new(model: NoiseModel) -> Self {
        let mut state = model.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(model.stream_id);
        Self { kind: model.kind, rng, draws: 0 }
    }

    pub fn sample(&mut self) -> f64 {
        self.draws += 1;
        let bits = self.rng.next_u64() >> 11;
        match self.kind {
            NoiseKind::UniformSym => bits as f64 * f64::powi(2.0, -52) - 1.0,
            NoiseKind::TwoPoint { p } => {
                if (bits as f64) * f64::powi(2.0, -53) < p {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Number of samples drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_give_identical_sequences() {
        let m = NoiseModel::uniform(42);
        let mut a = m.stream();
        let mut b = m.stream();
        for _ in 0..1000 {
            assert_eq!(a.sample().to_bits(), b.sample().to_bits());
        }
    }

    #[test]
    fn substreams_differ_and_are_idempotent() {
        let m = NoiseModel::uniform(7);
        assert_eq!(m.substream(3), m.substream(3));
        let mut a = m.substream(0).stream();
        let mut b = m.substream(1).stream();
        let same = (0..100).filter(|_| a.sample() == b.sample()).count();
        assert!(same < 5);
    }

    #[test]
    fn uniform_mean_and_bounds() {
        let mut s = NoiseModel::uniform(1).stream();
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = s.sample();
            assert!((-1.0..=1.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64).abs() < 4e-3);
    }

    #[test]
    fn two_point_frequency() {
        let mut s = NoiseModel::new(NoiseKind::two_point(0.5).unwrap(), 9).stream();
        let n = 1_000_000;
        let ups = (0..n).filter(|_| s.sample() == 1.0).count();
        assert!((ups as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn lag_one_autocorrelation_is_small() {
        let mut s = NoiseModel::uniform(5).stream();
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.sample()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
        assert!((cov / var).abs() < 0.005);
    }

    #[test]
    fn bad_probability_rejected() {
        assert!(NoiseKind::two_point(0.0).is_err());
        assert!(NoiseKind::two_point(1.0).is_err());
        assert!(!NoiseKind::two_point(0.3).unwrap().is_centered());
    }
}

//! Reproducible samplers for one-sided stable laws and for increments of the
//! rotationally invariant `2s`-stable Lévy process driving the semigroup.

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::SemigroupSpec;

/// Seed plus stream index. Equal states give equal sample sequences;
/// distinct stream indices give independent streams under the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StableSamplerState {
    pub seed: u64,
    pub stream_index: u64,
}

impl StableSamplerState {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn sampler(&self) -> StableSampler {
        StableSampler::new(*self)
    }
}

/// A sampling stream backed by ChaCha8.
#[derive(Debug, Clone)]
pub struct StableSampler {
    rng: ChaCha8Rng,
}

impl StableSampler {
    pub fn new(state: StableSamplerState) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_stream(state.stream_index);
        Self { rng }
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One-sided stable variable with `E[e^{-λS}] = e^{-λ^index}`, from
    /// Kanter's representation with `U ~ Unif(0, π)` and `E ~ Exp(1)`.
    pub fn positive_stable(&mut self, index: f64) -> Result<f64> {
        if !(index > 0.0 && index < 1.0) {
            return Err(invalid(format!("positive stable index must lie in (0, 1), got {index}")));
        }
        let u = std::f64::consts::PI * self.open_uniform();
        let e = -self.open_uniform().ln();
        let a = (index * u).sin() / u.sin().powf(1.0 / index);
        let b = (((1.0 - index) * u).sin() / e).powf((1.0 - index) / index);
        Ok(a * b)
    }

    /// Increment over `dt` of the Lévy process whose characteristic function is
    /// `exp(-dt ‖Q^{1/2}ξ‖^{2s} / 2)`.
    ///
    /// For `s < 1` this is the subordinated Gaussian `Q^{1/2} √(c S) G` with
    /// `S` positive stable of index `s` and `c = 2 (dt/2)^{1/s}`, so that
    /// `E e^{-c S r²/2} = e^{-dt r^{2s}/2}`.
    pub fn levy_increment(&mut self, spec: &SemigroupSpec, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) {
            return Err(invalid(format!("increment length must be positive, got {dt}")));
        }
        let s = spec.stability();
        let variance = if spec.is_gaussian() {
            dt
        } else {
            2.0 * (0.5 * dt).powf(1.0 / s) * self.positive_stable(s)?
        };
        let n = spec.dim();
        let g = DVector::from_iterator(n, (0..n).map(|_| self.standard_normal()));
        let y = spec.diffusion_sqrt() * g * variance.sqrt();
        Ok(y.iter().copied().collect())
    }
}

/// First positive stable sample of the stream named by `state`.
pub fn sample_positive_stable(index: f64, state: StableSamplerState) -> Result<f64> {
    state.sampler().positive_stable(index)
}

/// First Lévy increment of the stream named by `state`.
pub fn sample_levy_increment(spec: &SemigroupSpec, dt: f64, state: StableSamplerState) -> Result<Vec<f64>> {
    state.sampler().levy_increment(spec, dt)
}

use nalgebra::DMatrix;

use super::schedule::{GammaSchedule, Schedule};
use crate::error::{Error, Result};
use crate::qcore::{max_abs_diff, HermitianOperator, C64};

/// Largest tolerated `max |B(t)^2 - gamma(t)^2 I|`.
pub const NOISE_CONDITION_TOL: f64 = 1e-8;

/// One stochastic term `B(t) dW(t)` together with its strength `gamma(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    generator: Schedule<HermitianOperator>,
    strength: GammaSchedule,
}

impl NoiseChannel {
    pub fn new(generator: Schedule<HermitianOperator>, strength: GammaSchedule) -> Result<Self> {
        if strength.stored_values().iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("noise strength must be finite and nonnegative"));
        }
        let dims: Vec<usize> = generator.stored_values().iter().map(HermitianOperator::dim).collect();
        if let Some(&d) = dims.first() {
            if let Some(&bad) = dims.iter().find(|&&x| x != d) {
                return Err(Error::DimensionMismatch { expected: d, found: bad });
            }
        }
        Ok(NoiseChannel { generator, strength })
    }

    /// `B(t) = gamma(t) * op`.
    pub fn scaled(op: &HermitianOperator, strength: GammaSchedule) -> Result<Self> {
        let generator = strength.map(|g| op.scale(*g));
        Self::new(generator, strength)
    }

    pub fn constant(op: &HermitianOperator, gamma: f64) -> Result<Self> {
        Self::scaled(op, Schedule::constant(gamma))
    }

    pub fn generator(&self) -> &Schedule<HermitianOperator> {
        &self.generator
    }

    pub fn strength(&self) -> &GammaSchedule {
        &self.strength
    }

    pub fn dim(&self) -> usize {
        self.generator.stored_values()[0].dim()
    }

    pub fn covers(&self, t: f64) -> Result<()> {
        self.generator.covers(t)?;
        self.strength.covers(t)
    }

    /// `max |B(t)^2 - gamma(t)^2 I|` at one time.
    pub fn deviation_at(&self, t: f64) -> Result<f64> {
        let b = self.generator.value_at(t)?;
        let g = self.strength.value_at(t)?;
        let d = b.dim();
        let target = DMatrix::<C64>::identity(d, d) * C64::from(g * g);
        Ok(max_abs_diff(&b.square(), &target))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseValidation {
    pub worst_deviation: f64,
    pub at_time: f64,
}

/// Checks the local-noise condition at `n_samples` uniformly spaced times
/// on `[0, horizon]`.
pub fn validate_noise(channel: &NoiseChannel, n_samples: usize, horizon: f64) -> Result<NoiseValidation> {
    validate_indexed(channel, 0, n_samples, horizon)
}

pub fn validate_channels(channels: &[NoiseChannel], n_samples: usize, horizon: f64) -> Result<Vec<NoiseValidation>> {
    channels.iter().enumerate().map(|(k, c)| validate_indexed(c, k, n_samples, horizon)).collect()
}

fn validate_indexed(channel: &NoiseChannel, index: usize, n_samples: usize, horizon: f64) -> Result<NoiseValidation> {
    if n_samples == 0 {
        return Err(Error::invalid("noise validation needs at least one sample"));
    }
    channel.covers(horizon)?;
    let mut worst = NoiseValidation { worst_deviation: 0.0, at_time: 0.0 };
    for k in 0..n_samples {
        let t = if n_samples == 1 { 0.0 } else { horizon * k as f64 / (n_samples - 1) as f64 };
        let dev = channel.deviation_at(t)?;
        if dev > worst.worst_deviation {
            worst = NoiseValidation { worst_deviation: dev, at_time: t };
        }
    }
    if worst.worst_deviation > NOISE_CONDITION_TOL {
        return Err(Error::NoiseViolation { channel: index, deviation: worst.worst_deviation, time: worst.at_time });
    }
    Ok(worst)
}

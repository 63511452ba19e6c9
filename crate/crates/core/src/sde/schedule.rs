//! Time-indexed values on `[0, T]`: Hamiltonians, noise generators and
//! noise strengths.

use crate::error::{Error, Result};
use crate::qcore::HermitianOperator;

/// Values that a sampled-grid schedule can interpolate between.
pub trait Interpolate: Clone {
    fn interpolate(&self, other: &Self, w: f64) -> Self;
}

impl Interpolate for f64 {
    fn interpolate(&self, other: &Self, w: f64) -> Self {
        (1.0 - w) * self + w * other
    }
}

impl Interpolate for HermitianOperator {
    fn interpolate(&self, other: &Self, w: f64) -> Self {
        self.lerp(other, w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule<V> {
    /// Same value for every `t >= 0`.
    Constant(V),
    /// `values[k]` on `[breaks[k], breaks[k + 1])`; the last segment is
    /// closed at `breaks[n]`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<V> },
    /// Linear interpolation between `(times[k], values[k])` samples.
    Sampled { times: Vec<f64>, values: Vec<V> },
}

/// Strength schedule `gamma(t)`.
pub type GammaSchedule = Schedule<f64>;

/// Identifies which stored value a schedule uses at a given time; equal
/// keys mean equal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum SegmentKey {
    Constant,
    Piece(usize),
    Unique,
}

impl<V: Interpolate> Schedule<V> {
    pub fn constant(value: V) -> Self {
        Schedule::Constant(value)
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<V>) -> Result<Self> {
        if values.is_empty() || breaks.len() != values.len() + 1 {
            return Err(Error::invalid(format!(
                "piecewise schedule needs n + 1 breakpoints for n values, got {} and {}",
                breaks.len(),
                values.len()
            )));
        }
        check_grid(&breaks)?;
        Ok(Schedule::PiecewiseConstant { breaks, values })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<V>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::invalid(format!(
                "sampled schedule needs at least two (time, value) pairs, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        check_grid(&times)?;
        Ok(Schedule::Sampled { times, values })
    }

    /// End of the domain, `None` for constant schedules.
    pub fn horizon(&self) -> Option<f64> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::PiecewiseConstant { breaks, .. } => breaks.last().copied(),
            Schedule::Sampled { times, .. } => times.last().copied(),
        }
    }

    /// Errors unless the schedule is defined on all of `[0, t]`.
    pub fn covers(&self, t: f64) -> Result<()> {
        match self.horizon() {
            Some(end) if t > end * (1.0 + 1e-12) || t < 0.0 => Err(Error::OutOfDomain { t, end }),
            None if t < 0.0 => Err(Error::OutOfDomain { t, end: f64::INFINITY }),
            _ => Ok(()),
        }
    }

    pub fn value_at(&self, t: f64) -> Result<V> {
        self.covers(t)?;
        Ok(match self {
            Schedule::Constant(v) => v.clone(),
            Schedule::PiecewiseConstant { breaks, values } => values[piece_index(breaks, t)].clone(),
            Schedule::Sampled { times, values } => {
                let k = piece_index(times, t);
                let w = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
                values[k].interpolate(&values[k + 1], w)
            }
        })
    }

    pub(crate) fn segment_key(&self, t: f64) -> SegmentKey {
        match self {
            Schedule::Constant(_) => SegmentKey::Constant,
            Schedule::PiecewiseConstant { breaks, .. } => SegmentKey::Piece(piece_index(breaks, t)),
            Schedule::Sampled { .. } => SegmentKey::Unique,
        }
    }

    /// Points in `(0, t)` where the schedule changes form.
    pub fn interior_breaks(&self, t: f64) -> Vec<f64> {
        let pts: &[f64] = match self {
            Schedule::Constant(_) => &[],
            Schedule::PiecewiseConstant { breaks, .. } => breaks,
            Schedule::Sampled { times, .. } => times,
        };
        pts.iter().copied().filter(|&b| b > 0.0 && b < t).collect()
    }

    pub fn stored_values(&self) -> &[V] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::PiecewiseConstant { values, .. } | Schedule::Sampled { values, .. } => values,
        }
    }

    pub fn map<U, F: Fn(&V) -> U>(&self, f: F) -> Schedule<U> {
        match self {
            Schedule::Constant(v) => Schedule::Constant(f(v)),
            Schedule::PiecewiseConstant { breaks, values } => {
                Schedule::PiecewiseConstant { breaks: breaks.clone(), values: values.iter().map(&f).collect() }
            }
            Schedule::Sampled { times, values } => {
                Schedule::Sampled { times: times.clone(), values: values.iter().map(&f).collect() }
            }
        }
    }
}

impl Schedule<f64> {
    /// `sup gamma(s)` for `s` in `[0, t]`.
    pub fn sup_on(&self, t: f64) -> Result<f64> {
        self.covers(t)?;
        Ok(match self {
            Schedule::Constant(v) => *v,
            Schedule::PiecewiseConstant { breaks, values } => {
                let last = piece_index(breaks, t);
                values[..=last].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            Schedule::Sampled { times, values } => {
                let inside = times.iter().zip(values).filter(|(s, _)| **s <= t).map(|(_, v)| *v);
                inside.fold(self.value_at(t)?, f64::max)
            }
        })
    }
}

fn check_grid(points: &[f64]) -> Result<()> {
    if points[0] != 0.0 {
        return Err(Error::invalid("schedule must start at t = 0"));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("schedule times must be finite and strictly increasing"));
    }
    Ok(())
}

/// Index `k` with `points[k] <= t < points[k + 1]`, clamped to the last
/// interval.
fn piece_index(points: &[f64], t: f64) -> usize {
    let n_pieces = points.len() - 1;
    points[1..].partition_point(|&b| b <= t).min(n_pieces - 1)
}

//! Analytic fidelity bounds and the stochastic quantum speed limit.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::error::{Error, Result};
use crate::qcore::{variance, HermitianOperator, StateVector};
use crate::sde::{GammaSchedule, NoiseChannel, Schedule};

/// Relative tolerance of the adaptive Simpson rule for sampled schedules.
pub const QUADRATURE_RTOL: f64 = 1e-8;

/// Default number of grid points when maximizing operator deviations.
pub const DEFAULT_QSL_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `exp(-integral_gamma_sq)`.
    pub f_star: f64,
    /// `sum_j int_0^t gamma_j(s)^2 ds`.
    pub integral_gamma_sq: f64,
    /// Largest `sup gamma_j` over `[0, t]` among the channels.
    pub gamma_max: f64,
    pub t: f64,
    /// Per-channel `int_0^t gamma_j^2`.
    pub per_channel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QslReport {
    pub t_qsl: f64,
    pub mean_bures_angle: f64,
    /// `max_t sqrt(Var_{s0} H(t))`.
    pub max_dev_h: f64,
    /// Sum over channels of `max_t sqrt(Var_{s0} B_j(t))`.
    pub max_dev_b: f64,
    /// True when more than one channel contributed to `max_dev_b`.
    pub multi_channel: bool,
}

/// `int_0^t gamma(s)^2 ds`: closed form for constant and piecewise-constant
/// schedules, adaptive Simpson otherwise.
pub fn integrate_gamma_squared(strength: &GammaSchedule, t: f64) -> Result<f64> {
    strength.covers(t)?;
    match strength {
        Schedule::Constant(g) => Ok(g * g * t),
        Schedule::PiecewiseConstant { breaks, values } => Ok(breaks
            .windows(2)
            .zip(values)
            .map(|(w, g)| {
                let len = (w[1].min(t) - w[0]).max(0.0);
                g * g * len
            })
            .sum()),
        Schedule::Sampled { .. } => integrate_gamma_squared_simpson(strength, t),
    }
}

/// Quadrature route for any schedule: adaptive Simpson on each smooth
/// interval between breakpoints.
pub fn integrate_gamma_squared_simpson(strength: &GammaSchedule, t: f64) -> Result<f64> {
    strength.covers(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut knots = vec![0.0];
    knots.extend(strength.interior_breaks(t));
    knots.push(t);
    let f = |s: f64| {
        let g = strength.value_at(s.min(t)).expect("inside the covered domain");
        g * g
    };
    let mut total = 0.0;
    for w in knots.windows(2) {
        // Piecewise-constant schedules switch value exactly at a knot; sample
        // just inside the interval so the left-closed convention does not leak.
        let (a, b) = (w[0], w[1]);
        let inner = |s: f64| f(s.clamp(a, b - (b - a) * 1e-12));
        total += adaptive_simpson(&inner, a, b, QUADRATURE_RTOL, 40);
    }
    Ok(total)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rtol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, rtol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rtol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    let err = refined - whole;
    if depth == 0 || err.abs() <= 15.0 * rtol * refined.abs().max(f64::MIN_POSITIVE) {
        return refined + err / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, rtol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, rtol, depth - 1)
}

/// `F_* = exp(-sum_j int_0^t gamma_j^2)`.
pub fn fidelity_lower_bound(strengths: &[&GammaSchedule], t: f64) -> Result<BoundReport> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let per_channel = strengths.iter().map(|s| integrate_gamma_squared(s, t)).collect::<Result<Vec<_>>>()?;
    let gamma_max = strengths.iter().map(|s| s.sup_on(t)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let integral_gamma_sq: f64 = per_channel.iter().sum();
    Ok(BoundReport { f_star: (-integral_gamma_sq).exp(), integral_gamma_sq, gamma_max, t, per_channel })
}

/// Strength schedules of a channel list, in order.
pub fn strengths(channels: &[NoiseChannel]) -> Vec<&GammaSchedule> {
    channels.iter().map(NoiseChannel::strength).collect()
}

/// `exp(-gamma_max^2 t)`.
pub fn gamma_max_bound(gamma_max: f64, t: f64) -> f64 {
    (-gamma_max * gamma_max * t).exp()
}

/// Shortest control time compatible with a target mean fidelity:
/// `-ln(target) / gamma_max^2`.
pub fn control_time_lower_bound(gamma_max: f64, target_mean_fidelity: f64) -> Result<f64> {
    if gamma_max.is_nan() || gamma_max <= 0.0 {
        return Err(Error::invalid("control-time bound is unbounded for gamma_max = 0"));
    }
    if !(target_mean_fidelity > 0.0 && target_mean_fidelity <= 1.0) {
        return Err(Error::invalid(format!("target mean fidelity must lie in (0, 1], got {target_mean_fidelity}")));
    }
    Ok((-target_mean_fidelity.ln()).max(0.0) / (gamma_max * gamma_max))
}

/// Quantum speed limit
/// `T_QSL = sin^2(E[L]) / (sqrt(2) (max_t dH + sum_j max_t dB_j))`,
/// with deviations taken in `s0` over `n_grid` uniform times on
/// `[0, horizon]`.
///
/// A zero denominator gives `t_qsl = inf` unless the angle is also zero.
pub fn qsl_time(
    h: &Schedule<HermitianOperator>,
    channels: &[NoiseChannel],
    s0: &StateVector,
    mean_bures_angle: f64,
    n_grid: usize,
    horizon: f64,
) -> Result<QslReport> {
    if !(0.0..=FRAC_PI_2).contains(&mean_bures_angle) {
        return Err(Error::invalid(format!("mean Bures angle {mean_bures_angle} lies outside [0, pi/2]")));
    }
    if n_grid < 2 {
        return Err(Error::invalid("QSL grid needs at least two points"));
    }
    let times: Vec<f64> = (0..n_grid).map(|k| horizon * k as f64 / (n_grid - 1) as f64).collect();
    let max_dev = |sched: &Schedule<HermitianOperator>| -> Result<f64> {
        let mut best = 0.0f64;
        if let Schedule::Constant(op) = sched {
            return Ok(variance(op, s0)?.sqrt());
        }
        for &t in &times {
            best = best.max(variance(&sched.value_at(t)?, s0)?.sqrt());
        }
        Ok(best)
    };
    let max_dev_h = max_dev(h)?;
    let mut max_dev_b = 0.0;
    for c in channels {
        max_dev_b += max_dev(c.generator())?;
    }
    let numerator = mean_bures_angle.sin().powi(2);
    let denominator = SQRT_2 * (max_dev_h + max_dev_b);
    let t_qsl = if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        f64::INFINITY
    } else {
        numerator / denominator
    };
    Ok(QslReport { t_qsl, mean_bures_angle, max_dev_h, max_dev_b, multi_channel: channels.len() > 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{pauli, Pauli};
    use std::f64::consts::PI;

    #[test]
    fn integral_examples() {
        assert_eq!(integrate_gamma_squared(&Schedule::constant(0.0), 3.0).unwrap(), 0.0);
        let v = integrate_gamma_squared(&Schedule::constant(0.5), FRAC_PI_2).unwrap();
        // 0.25 * pi / 2
        assert!((v - std::f64::consts::FRAC_PI_8).abs() < 1e-15);
        let v = integrate_gamma_squared(&Schedule::constant(1.0), FRAC_PI_2).unwrap();
        assert_eq!(v, FRAC_PI_2);
    }

    #[test]
    fn integral_outside_domain() {
        let s = Schedule::piecewise(vec![0.0, 1.0], vec![0.3]).unwrap();
        assert!(matches!(integrate_gamma_squared(&s, 1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn piecewise_integral_truncates_at_t() {
        let s = Schedule::piecewise(vec![0.0, 1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!((integrate_gamma_squared(&s, 1.5).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_ramp_integral() {
        // gamma(t) = t on [0, 2]: int t^2 = 8/3.
        let s = Schedule::sampled(vec![0.0, 2.0], vec![0.0, 2.0]).unwrap();
        let v = integrate_gamma_squared(&s, 2.0).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-10, "{v}");
        let v = integrate_gamma_squared(&s, 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn bound_examples() {
        let g = Schedule::constant(0.4);
        let r = fidelity_lower_bound(&[&g], 0.0).unwrap();
        assert_eq!(r.f_star, 1.0);
        for u in [0.5, 1.0, 2.0] {
            let t = PI / (2.0 * u);
            let r = fidelity_lower_bound(&[&g], t).unwrap();
            // integral of gamma^2 over [0, pi/(2u)] is gamma^2 pi / (2u)
            assert!((r.f_star - (-0.16 * PI / (2.0 * u)).exp()).abs() < 1e-14);
            let r2 = fidelity_lower_bound(&[&g, &g], t).unwrap();
            assert!((r2.f_star - (-0.16 * PI / u).exp()).abs() < 1e-14);
            assert_eq!(r2.per_channel.len(), 2);
        }
        assert!(fidelity_lower_bound(&[&g], -1.0).is_err());
    }

    #[test]
    fn gamma_max_examples() {
        assert_eq!(gamma_max_bound(0.0, 7.0), 1.0);
        assert!((gamma_max_bound(1.0, FRAC_PI_2) - 0.207_879_576_350_761_9).abs() < 1e-15);
        let g = Schedule::constant(0.8);
        let r = fidelity_lower_bound(&[&g], 1.3).unwrap();
        assert_eq!(gamma_max_bound(r.gamma_max, 1.3), r.f_star);
    }

    #[test]
    fn control_time_examples() {
        assert_eq!(control_time_lower_bound(0.7, 1.0).unwrap(), 0.0);
        let t = control_time_lower_bound(1.0, (-FRAC_PI_2).exp()).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-15);
        let t = control_time_lower_bound(0.5, 0.5).unwrap();
        assert!((t - 2.772_588_722_239_781).abs() < 1e-12);
        assert!(control_time_lower_bound(0.0, 0.5).is_err());
        assert!(control_time_lower_bound(1.0, 0.0).is_err());
        assert!(control_time_lower_bound(1.0, 1.2).is_err());
    }

    fn qubit() -> (Schedule<HermitianOperator>, StateVector) {
        (Schedule::constant(pauli(Pauli::Y)), StateVector::from_labels("1").unwrap())
    }

    #[test]
    fn qsl_noiseless_qubit() {
        let (h, s0) = qubit();
        let r = qsl_time(&h, &[], &s0, FRAC_PI_2, DEFAULT_QSL_GRID, FRAC_PI_2).unwrap();
        assert!((r.t_qsl - 1.0 / SQRT_2).abs() < 1e-15);
        assert!(!r.multi_channel);
    }

    #[test]
    fn qsl_with_flip_noise() {
        let (h, s0) = qubit();
        let u = 1.3;
        let h = h.map(|op| op.scale(u));
        let gamma = 0.4;
        let c = NoiseChannel::constant(&pauli(Pauli::X), gamma).unwrap();
        let r = qsl_time(&h, &[c], &s0, FRAC_PI_2, 11, 1.0).unwrap();
        assert!((r.t_qsl - 1.0 / (SQRT_2 * (u + gamma))).abs() < 1e-14);
        assert!((r.max_dev_b - gamma).abs() < 1e-15);
    }

    #[test]
    fn qsl_edges() {
        let (h, s0) = qubit();
        assert_eq!(qsl_time(&h, &[], &s0, 0.0, 2, 1.0).unwrap().t_qsl, 0.0);
        assert!(qsl_time(&h, &[], &s0, 1.7, 2, 1.0).is_err());
        assert!(qsl_time(&h, &[], &s0, 1.0, 1, 1.0).is_err());
        let still = Schedule::constant(pauli(Pauli::Z));
        let r = qsl_time(&still, &[], &StateVector::from_labels("0").unwrap(), 0.5, 2, 1.0).unwrap();
        assert!(r.t_qsl.is_infinite());
    }

    #[test]
    fn qsl_time_dependent_maximum() {
        // H(t) = t * Y on [0, 2]: the deviation in |1> peaks at t = 2.
        let h =
            Schedule::sampled(vec![0.0, 2.0], vec![pauli(Pauli::Y).scale(0.0), pauli(Pauli::Y).scale(2.0)]).unwrap();
        let s0 = StateVector::from_labels("1").unwrap();
        let r = qsl_time(&h, &[], &s0, FRAC_PI_2, 5, 2.0).unwrap();
        assert!((r.max_dev_h - 2.0).abs() < 1e-14);
    }
}

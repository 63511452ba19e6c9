//! Monte Carlo ensembles of noisy trajectories and the statistical checks
//! run against their aggregates.
//!
//! Trajectories are processed in fixed blocks of [`BLOCK_SIZE`] indices.
//! Each block folds its trajectories in index order and blocks are merged
//! in block order, so the statistics are bit-identical for any number of
//! worker threads.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bounds::{integrate_gamma_squared, BoundReport};
use crate::error::{Error, Result};
use crate::qcore::HermitianOperator;
use crate::qcore::{check_dims, StateVector, C64};
use crate::sde::{
    trajectory_rng, validate_channels, Discretization, NoiseChannel, Schedule, StepperKind, Workspace,
    VALIDATION_SAMPLES,
};

pub const BLOCK_SIZE: usize = 64;

/// Absolute slack added to every statistical tolerance so that
/// deterministic cases (zero standard error) are judged up to rounding.
pub const NUMERIC_FLOOR: f64 = 1e-9;

/// Streaming mean and variance (Welford), mergeable with Chan's rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, stderr: (self.sample_variance() / self.n.max(1) as f64).sqrt() }
    }
}

/// Sample mean with its standard error (sample std / sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub stepper: StepperKind,
    /// Snapshot times; `None` records `t = 0` and ten equal divisions of `[0, T]`.
    pub record_grid: Option<Vec<f64>>,
}

impl EnsembleConfig {
    pub fn new(n_traj: usize, dt: f64, master_seed: u64, stepper: StepperKind) -> Self {
        EnsembleConfig { n_traj, dt, master_seed, stepper, record_grid: None }
    }

    pub fn with_record_grid(mut self, times: Vec<f64>) -> Self {
        self.record_grid = Some(times);
        self
    }

    fn snapshot_times(&self, horizon: f64) -> Vec<f64> {
        match &self.record_grid {
            Some(t) => t.clone(),
            None => (0..=10).map(|k| horizon * k as f64 / 10.0).collect(),
        }
    }
}

/// Aggregates at one snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStats {
    pub time: f64,
    /// `E[|<psi(t)|phi(t)>|^2]` with `phi` normalized.
    pub fidelity: Estimate,
    /// `E[Re <psi(t)|phi(t)>]` on the raw state.
    pub re_overlap: Estimate,
    /// `E[|<psi(t)|phi(t)>|]` with `phi` normalized.
    pub abs_overlap: Estimate,
    /// `E[arccos |<psi_0|phi(t)>|]`.
    pub bures_angle: Estimate,
    /// Componentwise mean of the raw state; Euler-Maruyama runs only.
    pub raw_state: Option<Vec<ComplexEstimate>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub stepper: StepperKind,
    pub horizon: f64,
    pub snapshots: Vec<SnapshotStats>,
}

impl EnsembleStats {
    pub fn final_snapshot(&self) -> &SnapshotStats {
        self.snapshots.last().expect("at least one snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

#[derive(Debug, Clone)]
struct SnapshotAcc {
    fidelity: Moments,
    re_overlap: Moments,
    abs_overlap: Moments,
    bures_angle: Moments,
    raw: Vec<(Moments, Moments)>,
}

impl SnapshotAcc {
    fn new(raw_dim: usize) -> Self {
        SnapshotAcc {
            fidelity: Moments::default(),
            re_overlap: Moments::default(),
            abs_overlap: Moments::default(),
            bures_angle: Moments::default(),
            raw: vec![(Moments::default(), Moments::default()); raw_dim],
        }
    }

    fn merge(&mut self, other: &SnapshotAcc) {
        self.fidelity.merge(&other.fidelity);
        self.re_overlap.merge(&other.re_overlap);
        self.abs_overlap.merge(&other.abs_overlap);
        self.bures_angle.merge(&other.bures_angle);
        for (a, b) in self.raw.iter_mut().zip(&other.raw) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }
    }
}

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Runs `cfg.n_traj` trajectories and aggregates statistics at each snapshot
/// against the ideal state at the same time.
pub fn run_ensemble(
    h: &Schedule<HermitianOperator>,
    channels: &[NoiseChannel],
    s0: &StateVector,
    horizon: f64,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats> {
    if cfg.n_traj < 2 {
        return Err(Error::invalid("an ensemble needs at least two trajectories"));
    }
    validate_channels(channels, VALIDATION_SAMPLES, horizon)?;
    let disc = Discretization::new(h, channels, horizon, cfg.dt)?;
    check_dims(disc.dim(), s0.dim())?;
    let grid = *disc.grid();

    let times = cfg.snapshot_times(horizon);
    let mut steps = Vec::with_capacity(times.len());
    for &t in &times {
        steps.push(grid.nearest_step(t)?);
    }
    if steps.is_empty() || steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("record grid must be nonempty, strictly increasing and resolved by dt"));
    }
    let ideal = disc.ideal_states(s0, &steps)?;
    let ideal: Vec<&[C64]> = ideal.iter().map(StateVector::as_slice).collect();
    let dim = disc.dim();
    let raw_dim = if cfg.stepper == StepperKind::EulerMaruyama { dim } else { 0 };

    let n_blocks = cfg.n_traj.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Vec<SnapshotAcc>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![SnapshotAcc::new(raw_dim); steps.len()];
            let mut ws = Workspace::new(dim);
            let end = ((b + 1) * BLOCK_SIZE).min(cfg.n_traj);
            for k in b * BLOCK_SIZE..end {
                let mut rng = trajectory_rng(cfg.master_seed, k as u64);
                disc.integrate(
                    &mut rng,
                    cfg.stepper,
                    s0.as_slice(),
                    &steps,
                    &mut ws,
                    |snap, psi| {
                        let a = &mut acc[snap];
                        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        let overlap = dot_conj(ideal[snap], psi);
                        let to_initial = dot_conj(s0.as_slice(), psi).norm() / norm;
                        let mag = overlap.norm() / norm;
                        a.fidelity.push(mag * mag);
                        a.re_overlap.push(overlap.re);
                        a.abs_overlap.push(mag);
                        a.bures_angle.push(to_initial.clamp(0.0, 1.0).acos());
                        for (m, z) in a.raw.iter_mut().zip(psi) {
                            m.0.push(z.re);
                            m.1.push(z.im);
                        }
                    },
                    |_, _, _| {},
                );
            }
            acc
        })
        .collect();

    let mut total = vec![SnapshotAcc::new(raw_dim); steps.len()];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }

    let snapshots = total
        .into_iter()
        .zip(&steps)
        .map(|(acc, &step)| SnapshotStats {
            time: grid.time(step),
            fidelity: acc.fidelity.estimate(),
            re_overlap: acc.re_overlap.estimate(),
            abs_overlap: acc.abs_overlap.estimate(),
            bures_angle: acc.bures_angle.estimate(),
            raw_state: (raw_dim > 0).then(|| {
                acc.raw
                    .iter()
                    .map(|(re, im)| ComplexEstimate {
                        mean: C64::new(re.mean(), im.mean()),
                        stderr_re: re.estimate().stderr,
                        stderr_im: im.estimate().stderr,
                    })
                    .collect()
            }),
        })
        .collect();

    Ok(EnsembleStats {
        n_traj: cfg.n_traj,
        dt: grid.dt(),
        master_seed: cfg.master_seed,
        stepper: cfg.stepper,
        horizon,
        snapshots,
    })
}

/// One compared quantity in a [`CheckReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub time: f64,
    pub label: String,
    pub observed: f64,
    pub expected: f64,
    pub stderr: f64,
    /// Largest admissible gap (or shortfall, for one-sided checks).
    pub allowance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn worst_sigmas(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let gap = (r.observed - r.expected).abs();
                if r.stderr > 0.0 {
                    gap / r.stderr
                } else if gap > NUMERIC_FLOOR {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

fn allowance(sigmas: f64, stderr: f64) -> f64 {
    sigmas * stderr + NUMERIC_FLOOR
}

fn two_sided(time: f64, label: String, observed: f64, expected: f64, stderr: f64, sigmas: f64) -> CheckRow {
    let allow = allowance(sigmas, stderr);
    CheckRow { time, label, observed, expected, stderr, allowance: allow, passed: (observed - expected).abs() <= allow }
}

/// Compares `E[Re <psi|phi>]` with `exp(-1/2 sum_j int_0^t gamma_j^2)` at
/// every snapshot.
pub fn check_overlap_decay(
    stats: &EnsembleStats,
    channels: &[NoiseChannel],
    tolerance_sigmas: f64,
) -> Result<CheckReport> {
    let mut rows = Vec::with_capacity(stats.snapshots.len());
    for s in &stats.snapshots {
        let exponent = channels.iter().map(|c| integrate_gamma_squared(c.strength(), s.time)).sum::<Result<f64>>()?;
        rows.push(two_sided(
            s.time,
            "re_overlap".into(),
            s.re_overlap.mean,
            (-0.5 * exponent).exp(),
            s.re_overlap.stderr,
            tolerance_sigmas,
        ));
    }
    Ok(CheckReport { name: "overlap_decay", rows })
}

/// One-sided check `E[F(t)] + k * stderr >= F_*(t)` on matching snapshots.
pub fn check_bound(stats: &EnsembleStats, reports: &[BoundReport], tolerance_sigmas: f64) -> Result<CheckReport> {
    if reports.len() != stats.snapshots.len() {
        return Err(Error::invalid(format!("{} bound reports for {} snapshots", reports.len(), stats.snapshots.len())));
    }
    let mut rows = Vec::with_capacity(reports.len());
    for (s, r) in stats.snapshots.iter().zip(reports) {
        if (s.time - r.t).abs() > 1e-9 * stats.horizon.max(1.0) {
            return Err(Error::invalid(format!("bound at t = {} does not match snapshot t = {}", r.t, s.time)));
        }
        let allow = allowance(tolerance_sigmas, s.fidelity.stderr);
        rows.push(CheckRow {
            time: s.time,
            label: "fidelity_bound".into(),
            observed: s.fidelity.mean,
            expected: r.f_star,
            stderr: s.fidelity.stderr,
            allowance: allow,
            passed: s.fidelity.mean + allow >= r.f_star,
        });
    }
    Ok(CheckReport { name: "fidelity_bound", rows })
}

/// Bound reports evaluated at every snapshot of `stats`.
pub fn bounds_at_snapshots(stats: &EnsembleStats, channels: &[NoiseChannel]) -> Result<Vec<BoundReport>> {
    let strengths = crate::bounds::strengths(channels);
    stats.snapshots.iter().map(|s| crate::bounds::fidelity_lower_bound(&strengths, s.time)).collect()
}

/// Compares the final componentwise mean of raw Euler-Maruyama states with
/// `exp(-1/2 sum_j int_0^T gamma_j^2) |psi(T)>`, real and imaginary parts
/// separately.
pub fn check_expectation_state(
    stats: &EnsembleStats,
    ideal_final: &StateVector,
    channels: &[NoiseChannel],
    tolerance_sigmas: f64,
) -> Result<CheckReport> {
    let last = stats.final_snapshot();
    let raw = last.raw_state.as_ref().ok_or(Error::RequiresRawStates)?;
    check_dims(raw.len(), ideal_final.dim())?;
    let exponent = channels.iter().map(|c| integrate_gamma_squared(c.strength(), last.time)).sum::<Result<f64>>()?;
    let scale = (-0.5 * exponent).exp();
    let mut rows = Vec::with_capacity(2 * raw.len());
    for (k, (est, target)) in raw.iter().zip(ideal_final.as_slice()).enumerate() {
        let expected = target * scale;
        rows.push(two_sided(last.time, format!("re[{k}]"), est.mean.re, expected.re, est.stderr_re, tolerance_sigmas));
        rows.push(two_sided(last.time, format!("im[{k}]"), est.mean.im, expected.im, est.stderr_im, tolerance_sigmas));
    }
    Ok(CheckReport { name: "expectation_state", rows })
}

/// `E[Re <psi|phi>] <= E[|<psi|phi>|] <= sqrt(E[F])` at every snapshot,
/// each inequality allowed to fail by `k` combined standard errors.
pub fn check_jensen_chain(stats: &EnsembleStats, tolerance_sigmas: f64) -> CheckReport {
    let mut rows = Vec::with_capacity(2 * stats.snapshots.len());
    for s in &stats.snapshots {
        let first_se = s.re_overlap.stderr.hypot(s.abs_overlap.stderr);
        let allow = allowance(tolerance_sigmas, first_se);
        rows.push(CheckRow {
            time: s.time,
            label: "re <= abs".into(),
            observed: s.re_overlap.mean,
            expected: s.abs_overlap.mean,
            stderr: first_se,
            allowance: allow,
            passed: s.re_overlap.mean <= s.abs_overlap.mean + allow,
        });
        let root = s.fidelity.mean.max(0.0).sqrt();
        // delta method: se(sqrt(F)) = se(F) / (2 sqrt(F))
        let root_se = if root > 0.0 { s.fidelity.stderr / (2.0 * root) } else { 0.0 };
        let second_se = s.abs_overlap.stderr.hypot(root_se);
        let allow = allowance(tolerance_sigmas, second_se);
        rows.push(CheckRow {
            time: s.time,
            label: "abs <= sqrt(F)".into(),
            observed: s.abs_overlap.mean,
            expected: root,
            stderr: second_se,
            allowance: allow,
            passed: s.abs_overlap.mean <= root + allow,
        });
    }
    CheckReport { name: "jensen_chain", rows }
}

/// Final raw mean state as a vector, if recorded.
pub fn mean_raw_state(stats: &EnsembleStats) -> Option<DVector<C64>> {
    let raw = stats.final_snapshot().raw_state.as_ref()?;
    Some(DVector::from_iterator(raw.len(), raw.iter().map(|e| e.mean)))
}

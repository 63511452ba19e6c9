//! Gamma sweeps, their statistical checks, and CSV output.

use std::io::Write;

use noisebound_core::bounds::{fidelity_lower_bound, qsl_time, strengths, BoundReport, QslReport, DEFAULT_QSL_GRID};
use noisebound_core::ensemble::{
    bounds_at_snapshots, check_bound, check_overlap_decay, run_ensemble, CheckReport, EnsembleConfig, EnsembleStats,
    Estimate,
};
use noisebound_core::sde::{NoiseChannel, StepperKind};

use crate::config::EnsembleOverrides;
use crate::error::CliError;
use crate::model::{default_gamma_grid, validate_gamma_grid, Model};

pub const DEFAULT_N_TRAJ: usize = 10_000;
/// Steps per control horizon when `dt` is not given.
pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const SEED_ENV: &str = "NOISEBOUND_SEED";
/// Statistical checks allow this many standard errors.
pub const TOLERANCE_SIGMAS: f64 = 3.0;

pub const PRESET_HEADER: [&str; 11] = [
    "preset",
    "gamma",
    "f_star",
    "mean_F",
    "stderr_F",
    "mean_re_overlap",
    "stderr_overlap",
    "n_traj",
    "dt",
    "seed",
    "stepper",
];

pub const QSL_HEADER: [&str; 7] = ["preset", "gamma", "mean_bures_angle", "stderr", "t_qsl", "T", "satisfied"];

/// Fully resolved sweep parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub gammas: Vec<f64>,
    pub n_traj: usize,
    pub dt: f64,
    pub seed: u64,
    pub stepper: StepperKind,
}

impl RunSettings {
    /// Fills unset fields with defaults; `dt` defaults to `horizon / 2000`.
    pub fn resolve(overrides: EnsembleOverrides, horizon: f64) -> Result<Self, CliError> {
        let seed = match overrides.seed {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        };
        let settings = RunSettings {
            gammas: overrides.gammas.unwrap_or_else(default_gamma_grid),
            n_traj: overrides.n_traj.unwrap_or(DEFAULT_N_TRAJ),
            dt: overrides.dt.unwrap_or(horizon / DEFAULT_STEPS as f64),
            seed,
            stepper: overrides.stepper.unwrap_or_default(),
        };
        validate_gamma_grid(&settings.gammas)?;
        if settings.n_traj < 2 {
            return Err(CliError::Usage("n_traj must be at least 2".into()));
        }
        if !(settings.dt > 0.0 && settings.dt <= horizon) {
            return Err(CliError::Usage(format!("dt must lie in (0, {horizon}], got {}", settings.dt)));
        }
        Ok(settings)
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig::new(self.n_traj, self.dt, self.seed, self.stepper)
    }
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// One ensemble run at one gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub gamma: f64,
    /// Bound at the control time.
    pub bound: BoundReport,
    pub stats: EnsembleStats,
    /// Every recorded snapshot.
    pub bound_check: CheckReport,
    /// Final time only.
    pub overlap_check: CheckReport,
}

impl SweepPoint {
    pub fn passed(&self) -> bool {
        self.bound_check.passed() && self.overlap_check.passed()
    }
}

/// Runs every noise variant at every gamma. All points share the master seed,
/// so neighbouring gammas see the same Brownian paths.
pub fn run_sweep(model: &Model, settings: &RunSettings) -> Result<Vec<SweepPoint>, CliError> {
    model.check_dimensions()?;
    let h = model.hamiltonian_schedule();
    let cfg = settings.ensemble_config();
    let mut points = Vec::with_capacity(model.variants.len() * settings.gammas.len());
    for variant in &model.variants {
        for &gamma in &settings.gammas {
            let channels = variant.channels_at(gamma)?;
            let stats = run_ensemble(&h, &channels, &model.initial, model.horizon, &cfg)?;
            let bounds = bounds_at_snapshots(&stats, &channels)?;
            let bound_check = check_bound(&stats, &bounds, TOLERANCE_SIGMAS)?;
            let mut overlap_check = check_overlap_decay(&stats, &channels, TOLERANCE_SIGMAS)?;
            overlap_check.rows.drain(..overlap_check.rows.len() - 1);
            let bound = fidelity_lower_bound(&strengths(&channels), model.horizon)?;
            points.push(SweepPoint { label: variant.label.clone(), gamma, bound, stats, bound_check, overlap_check });
        }
    }
    Ok(points)
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PRESET_HEADER)?;
    for p in points {
        let last = p.stats.final_snapshot();
        w.write_record([
            p.label.clone(),
            fmt_real(p.gamma),
            fmt_real(p.bound.f_star),
            fmt_real(last.fidelity.mean),
            fmt_real(last.fidelity.stderr),
            fmt_real(last.re_overlap.mean),
            fmt_real(last.re_overlap.stderr),
            p.stats.n_traj.to_string(),
            fmt_real(p.stats.dt),
            p.stats.master_seed.to_string(),
            p.stats.stepper.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn write_sweep_summary<W: Write>(points: &[SweepPoint], mut out: W) -> Result<(), CliError> {
    for p in points {
        let last = p.stats.final_snapshot();
        writeln!(
            out,
            "{:<14} gamma={:<6} F*={:.6} E[F]={:.6}±{:.6} E[Re]={:.6}±{:.6}  bound {} ({:.2} se)  overlap {} ({:.2} se)",
            p.label,
            p.gamma,
            p.bound.f_star,
            last.fidelity.mean,
            last.fidelity.stderr,
            last.re_overlap.mean,
            last.re_overlap.stderr,
            verdict(p.bound_check.passed()),
            bound_slack(&p.bound_check),
            verdict(p.overlap_check.passed()),
            p.overlap_check.worst_sigmas(),
        )?;
    }
    Ok(())
}

/// Smallest `(E[F] - F*) / stderr` over the snapshots; negative means the
/// sample mean sits below the bound.
fn bound_slack(report: &CheckReport) -> f64 {
    report
        .rows
        .iter()
        .filter(|r| r.stderr > 0.0)
        .map(|r| (r.observed - r.expected) / r.stderr)
        .fold(f64::INFINITY, f64::min)
}

/// First gamma where `curve_a - curve_b` changes sign, by linear interpolation
/// between grid points. Leading exact ties (both curves equal 1 at gamma = 0)
/// do not count.
pub fn crossing(gammas: &[f64], curve_a: &[f64], curve_b: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = curve_a.iter().zip(curve_b).map(|(a, b)| a - b).collect();
    diff.windows(2).zip(gammas.windows(2)).find_map(|(d, g)| {
        let changes = d[0] != 0.0 && (d[1] == 0.0 || d[0].signum() != d[1].signum());
        changes.then(|| g[0] + d[0] * (g[1] - g[0]) / (d[0] - d[1]))
    })
}

/// Crossing of final mean fidelity between two labelled variants of a sweep.
pub fn sweep_crossing(points: &[SweepPoint], label_a: &str, label_b: &str) -> Option<f64> {
    let curve = |label: &str| -> (Vec<f64>, Vec<f64>) {
        points.iter().filter(|p| p.label == label).map(|p| (p.gamma, p.stats.final_snapshot().fidelity.mean)).unzip()
    };
    let (ga, fa) = curve(label_a);
    let (gb, fb) = curve(label_b);
    if ga != gb || ga.is_empty() {
        return None;
    }
    crossing(&ga, &fa, &fb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QslRow {
    pub label: String,
    pub gamma: f64,
    /// `E[L(T)]` against the initial state.
    pub mean_bures_angle: Estimate,
    pub report: QslReport,
    pub horizon: f64,
}

impl QslRow {
    pub fn satisfied(&self) -> bool {
        self.horizon >= self.report.t_qsl
    }
}

/// Speed-limit row from an ensemble already run for `channels`.
pub fn qsl_row(
    model: &Model,
    label: &str,
    gamma: f64,
    channels: &[NoiseChannel],
    stats: &EnsembleStats,
) -> Result<QslRow, CliError> {
    let angle = stats.final_snapshot().bures_angle;
    // a mean of angles in [0, pi/2] can only leave that range by rounding
    let clamped = angle.mean.clamp(0.0, std::f64::consts::FRAC_PI_2);
    let report =
        qsl_time(&model.hamiltonian_schedule(), channels, &model.initial, clamped, DEFAULT_QSL_GRID, model.horizon)?;
    Ok(QslRow { label: label.to_string(), gamma, mean_bures_angle: angle, report, horizon: model.horizon })
}

/// Speed-limit rows for the points of a finished sweep of `model`.
pub fn qsl_from_sweep(model: &Model, points: &[SweepPoint]) -> Result<Vec<QslRow>, CliError> {
    points
        .iter()
        .map(|p| {
            let variant =
                model.variants.iter().find(|v| v.label == p.label).ok_or_else(|| {
                    CliError::Usage(format!("sweep point {:?} is not a variant of this model", p.label))
                })?;
            qsl_row(model, &p.label, p.gamma, &variant.channels_at(p.gamma)?, &p.stats)
        })
        .collect()
}

pub fn run_qsl(model: &Model, settings: &RunSettings) -> Result<Vec<QslRow>, CliError> {
    model.check_dimensions()?;
    let h = model.hamiltonian_schedule();
    let cfg = settings.ensemble_config().with_record_grid(vec![model.horizon]);
    let mut rows = Vec::new();
    for variant in &model.variants {
        for &gamma in &settings.gammas {
            let channels = variant.channels_at(gamma)?;
            let stats = run_ensemble(&h, &channels, &model.initial, model.horizon, &cfg)?;
            rows.push(qsl_row(model, &variant.label, gamma, &channels, &stats)?);
        }
    }
    Ok(rows)
}

pub fn write_qsl_csv<W: Write>(rows: &[QslRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QSL_HEADER)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            fmt_real(r.gamma),
            fmt_real(r.mean_bures_angle.mean),
            fmt_real(r.mean_bures_angle.stderr),
            fmt_real(r.report.t_qsl),
            fmt_real(r.horizon),
            r.satisfied().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_qsl_summary<W: Write>(rows: &[QslRow], mut out: W) -> Result<(), CliError> {
    for r in rows {
        writeln!(
            out,
            "{:<14} gamma={:<6} E[L]={:.6}±{:.6} T_QSL={:.6} T={:.6}  {}",
            r.label,
            r.gamma,
            r.mean_bures_angle.mean,
            r.mean_bures_angle.stderr,
            r.report.t_qsl,
            r.horizon,
            verdict(r.satisfied()),
        )?;
    }
    Ok(())
}

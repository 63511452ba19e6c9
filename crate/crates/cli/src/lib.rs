//! Experiment presets, config-file models and CSV sweeps behind the
//! `noisebound` binary.

pub mod config;
pub mod error;
pub mod model;
pub mod run;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use config::{parse_config, Config, EnsembleOverrides};
pub use error::{exit_code, CliError};
pub use model::{preset, PresetName};
pub use run::{run_qsl, run_sweep, sweep_crossing, RunSettings};

/// Where the CSV goes; `None` means standard output.
fn with_sink(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            body(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
        }
    }
    Ok(())
}

/// Runs a sweep, writes its CSV and summary, and reports whether every
/// bound and overlap check passed.
fn sweep_and_report(
    model: &model::Model,
    settings: &RunSettings,
    crossing_of: Option<(&str, &str)>,
    out: Option<&Path>,
    summary: &mut dyn Write,
) -> Result<bool, CliError> {
    let points = run_sweep(model, settings)?;
    with_sink(out, |w| run::write_sweep_csv(&points, w))?;
    run::write_sweep_summary(&points, &mut *summary)?;
    if let Some((a, b)) = crossing_of {
        match sweep_crossing(&points, a, b) {
            Some(g) => writeln!(summary, "crossing of E[F] for {a} and {b}: gamma ~ {g:.4}")?,
            None => writeln!(summary, "E[F] for {a} and {b} does not cross on this grid")?,
        }
    }
    let passed = points.iter().all(run::SweepPoint::passed);
    writeln!(summary, "{}", if passed { "all checks passed" } else { "some checks FAILED" })?;
    Ok(passed)
}

pub fn run_preset(
    name: PresetName,
    u: f64,
    overrides: EnsembleOverrides,
    out: Option<&Path>,
    summary: &mut dyn Write,
) -> Result<bool, CliError> {
    let model = preset(name, u)?;
    let settings = RunSettings::resolve(overrides, model.horizon)?;
    let crossing_of = (name == PresetName::Fig2a).then_some(("fig2a-local", "fig2a-global"));
    sweep_and_report(&model, &settings, crossing_of, out, summary)
}

/// Command-line `overrides` win over values fixed in the config file.
pub fn run_custom(
    config_path: &Path,
    overrides: EnsembleOverrides,
    out: Option<&Path>,
    summary: &mut dyn Write,
) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg = parse_config(&text)?;
    let settings = RunSettings::resolve(overrides.or(cfg.ensemble), cfg.model.horizon)?;
    sweep_and_report(&cfg.model, &settings, None, out, summary)
}

pub fn run_qsl_report(
    name: PresetName,
    u: f64,
    overrides: EnsembleOverrides,
    out: Option<&Path>,
    summary: &mut dyn Write,
) -> Result<bool, CliError> {
    let model = preset(name, u)?;
    let settings = RunSettings::resolve(overrides, model.horizon)?;
    let rows = run_qsl(&model, &settings)?;
    with_sink(out, |w| run::write_qsl_csv(&rows, w))?;
    run::write_qsl_summary(&rows, &mut *summary)?;
    let passed = rows.iter().all(run::QslRow::satisfied);
    writeln!(summary, "{}", if passed { "T >= T_QSL on every row" } else { "speed limit VIOLATED" })?;
    Ok(passed)
}

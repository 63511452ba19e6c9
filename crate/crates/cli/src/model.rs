//! Experiment descriptions shared by the built-in presets and config files.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use noisebound_core::qcore::{HermitianOperator, PauliString, StateVector};
use noisebound_core::sde::{NoiseChannel, Schedule};

use crate::error::CliError;

/// `coefficient * pauli_string`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub pauli: PauliString,
}

impl Term {
    pub fn new(coefficient: f64, pauli: &str) -> Result<Self, CliError> {
        Ok(Term { coefficient, pauli: pauli.parse()? })
    }
}

/// `u * sum_k c_k P_k`.
pub fn operator_from_terms(u: f64, terms: &[Term]) -> Result<HermitianOperator, CliError> {
    let mut total: Option<HermitianOperator> = None;
    for t in terms {
        let op = t.pauli.to_operator().scale(t.coefficient);
        total = Some(match total {
            None => op,
            Some(acc) => acc.add(&op)?,
        });
    }
    let total = total.ok_or_else(|| CliError::Usage("operator has no terms".into()))?;
    Ok(total.scale(u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    /// Takes each value of the sweep grid.
    Sweep,
    Fixed(f64),
}

/// Channel `B = gamma * sum_k c_k P_k`. Only single Pauli strings satisfy
/// `B^2 = gamma^2 I` in general; sums are accepted here and rejected by
/// validation when they violate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub terms: Vec<Term>,
    pub gamma: GammaSpec,
}

impl ChannelSpec {
    pub fn generator(&self) -> Result<HermitianOperator, CliError> {
        operator_from_terms(1.0, &self.terms)
    }
}

/// One noise configuration swept over the gamma grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVariant {
    pub label: String,
    pub channels: Vec<ChannelSpec>,
}

impl NoiseVariant {
    /// Channels `B_j = gamma_j P_j` with constant strengths.
    pub fn channels_at(&self, gamma: f64) -> Result<Vec<NoiseChannel>, CliError> {
        self.channels
            .iter()
            .map(|c| {
                let g = match c.gamma {
                    GammaSpec::Sweep => gamma,
                    GammaSpec::Fixed(g) => g,
                };
                Ok(NoiseChannel::constant(&c.generator()?, g)?)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hamiltonian: HermitianOperator,
    pub initial: StateVector,
    pub horizon: f64,
    pub variants: Vec<NoiseVariant>,
}

impl Model {
    pub fn hamiltonian_schedule(&self) -> Schedule<HermitianOperator> {
        Schedule::constant(self.hamiltonian.clone())
    }

    /// Hamiltonian, state and every channel act on one Hilbert space.
    pub fn check_dimensions(&self) -> Result<(), CliError> {
        let expected = self.hamiltonian.dim();
        let mismatch = |found| CliError::Model(noisebound_core::Error::DimensionMismatch { expected, found });
        if self.initial.dim() != expected {
            return Err(mismatch(self.initial.dim()));
        }
        for v in &self.variants {
            for c in &v.channels {
                let d = c.generator()?.dim();
                if d != expected {
                    return Err(mismatch(d));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [PresetName::Fig1a, PresetName::Fig1b, PresetName::Fig2a, PresetName::Fig2b];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig1a => "fig1a",
            PresetName::Fig1b => "fig1b",
            PresetName::Fig2a => "fig2a",
            PresetName::Fig2b => "fig2b",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CliError::Usage(format!("unknown preset {s:?} (expected fig1a, fig1b, fig2a or fig2b)")))
    }
}

fn sweep(label: &str, paulis: &[&str]) -> NoiseVariant {
    NoiseVariant {
        label: label.to_string(),
        channels: paulis
            .iter()
            .map(|p| ChannelSpec {
                terms: vec![Term::new(1.0, p).expect("preset Pauli strings are valid")],
                gamma: GammaSpec::Sweep,
            })
            .collect(),
    }
}

/// Hamiltonian terms of a preset (before the factor `u`).
pub fn preset_terms(name: PresetName) -> Vec<Term> {
    let t = |c, p| Term::new(c, p).expect("preset Pauli strings are valid");
    match name {
        PresetName::Fig1a | PresetName::Fig1b => vec![t(1.0, "Y")],
        PresetName::Fig2a | PresetName::Fig2b => vec![t(-0.5, "X@X"), t(-0.5, "Y@Y"), t(-0.5, "Z@Z")],
    }
}

/// Bit-flip qubit (`H = u Y`, `|1> -> |0>`) and two-qubit SWAP
/// (`H = -(u/2)(XX + YY + ZZ)`, `|+0> -> |0+>`) experiments, each with
/// control time `pi / (2u)`.
pub fn preset(name: PresetName, u: f64) -> Result<Model, CliError> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(CliError::Usage(format!("control amplitude u must be positive, got {u}")));
    }
    let hamiltonian = operator_from_terms(u, &preset_terms(name))?;
    let (initial, variants) = match name {
        PresetName::Fig1a => ("1", vec![sweep("fig1a", &["X"])]),
        PresetName::Fig1b => ("1", vec![sweep("fig1b", &["X", "Z"])]),
        PresetName::Fig2a => ("+0", vec![sweep("fig2a-local", &["X@I"]), sweep("fig2a-global", &["X@X"])]),
        PresetName::Fig2b => ("+0", vec![sweep("fig2b", &["X@I", "I@X"])]),
    };
    Ok(Model { hamiltonian, initial: StateVector::from_labels(initial)?, horizon: FRAC_PI_2 / u, variants })
}

/// `0.1, 0.2, ..., 1.5`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=15).map(|k| k as f64 / 10.0).collect()
}

pub fn validate_gamma_grid(gammas: &[f64]) -> Result<(), CliError> {
    if gammas.is_empty() {
        return Err(CliError::Usage("gamma grid is empty".into()));
    }
    if gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(CliError::Usage("gamma values must be finite and nonnegative".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("gamma grid must be strictly increasing".into()));
    }
    Ok(())
}

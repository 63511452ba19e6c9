//! Flat `key = value` config files describing a custom experiment.
//!
//! ```text
//! [control]
//! label = fig1a
//! initial = 1          # qubit labels 0, 1, +, -
//! time = pi/2
//! gammas = 0.1, 0.5, 1.0
//!
//! [hamiltonian]
//! u = 1
//! terms = Y            # u * (sum of coefficient*Pauli terms)
//!
//! [channel.1]
//! operator = X
//! gamma = sweep        # or a fixed number
//!
//! [ensemble]
//! n_traj = 10000
//! dt = pi/4000
//! seed = 7
//! stepper = unitary
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use noisebound_core::qcore::StateVector;
use noisebound_core::sde::StepperKind;

use crate::error::CliError;
use crate::model::{operator_from_terms, validate_gamma_grid, ChannelSpec, GammaSpec, Model, NoiseVariant, Term};

/// Ensemble settings a config may fix; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleOverrides {
    pub gammas: Option<Vec<f64>>,
    pub n_traj: Option<usize>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub stepper: Option<StepperKind>,
}

impl EnsembleOverrides {
    /// Fields of `self`, falling back to `other`.
    pub fn or(self, other: EnsembleOverrides) -> EnsembleOverrides {
        EnsembleOverrides {
            gammas: self.gammas.or(other.gammas),
            n_traj: self.n_traj.or(other.n_traj),
            dt: self.dt.or(other.dt),
            seed: self.seed.or(other.seed),
            stepper: self.stepper.or(other.stepper),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub label: String,
    pub model: Model,
    pub ensemble: EnsembleOverrides,
}

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { line, message: message.into() }
}

/// Products and quotients of numbers and `pi`, e.g. `pi/2`, `-0.5*pi`, `1e-3`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let factor = |tok: &str| -> Result<f64, String> {
        let tok = tok.trim();
        if tok.eq_ignore_ascii_case("pi") {
            Ok(PI)
        } else {
            tok.parse::<f64>().map_err(|_| format!("cannot read {tok:?} as a number"))
        }
    };
    let mut value = 0.0;
    let mut op = '*';
    let mut start = 0;
    let mut first = true;
    for (i, c) in body.char_indices().chain(std::iter::once((body.len(), '*'))) {
        if c == '*' || c == '/' {
            let f = factor(&body[start..i])?;
            value = if first {
                f
            } else if op == '*' {
                value * f
            } else {
                value / f
            };
            first = false;
            op = c;
            start = i + 1;
        }
    }
    let value = sign * value;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

/// `[coef*]PAULI` terms joined by `+` or `-`, e.g. `-0.5*X@X - 0.5*Y@Y`.
pub fn parse_terms(s: &str) -> Result<Vec<Term>, String> {
    let mut pieces: Vec<(f64, String)> = Vec::new();
    let mut sign = 1.0;
    let mut current = String::new();
    let mut prev: Option<char> = None;
    let mut before_prev: Option<char> = None;
    for c in s.chars() {
        // a sign directly after a mantissa's exponent marker belongs to the number
        let in_exponent =
            matches!(prev, Some('e' | 'E')) && matches!(before_prev, Some(d) if d.is_ascii_digit() || d == '.');
        if (c == '+' || c == '-') && !in_exponent {
            if !current.trim().is_empty() {
                pieces.push((sign, std::mem::take(&mut current)));
            } else if !pieces.is_empty() || sign != 1.0 {
                return Err(format!("dangling sign in {s:?}"));
            }
            sign = if c == '-' { -1.0 } else { 1.0 };
            current.clear();
        } else {
            current.push(c);
        }
        if !c.is_whitespace() {
            before_prev = prev;
            prev = Some(c);
        }
    }
    if current.trim().is_empty() {
        return Err(format!("missing term in {s:?}"));
    }
    pieces.push((sign, current));

    pieces
        .into_iter()
        .map(|(sign, piece)| {
            let piece = piece.trim();
            let (coef, pauli) = match piece.rsplit_once('*') {
                Some((c, p)) => (parse_real(c)?, p),
                None => (1.0, piece),
            };
            Term::new(sign * coef, pauli).map_err(|e| e.to_string())
        })
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn require(&mut self, name: &str, key: &str) -> Result<(usize, String), CliError> {
        self.take(key).ok_or_else(|| err(self.line, format!("[{name}] is missing `{key}`")))
    }

    fn finish(self, name: &str) -> Result<(), CliError> {
        match self.entries.into_iter().next() {
            Some((key, (line, _))) => Err(err(line, format!("unknown key `{key}` in [{name}]"))),
            None => Ok(()),
        }
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, CliError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("unterminated section header {content:?}")))?
                .trim()
                .to_string();
            let known = matches!(name.as_str(), "control" | "hamiltonian" | "ensemble")
                || name.strip_prefix("channel.").is_some_and(|n| n.parse::<u32>().is_ok());
            if !known {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(err(line, format!("section [{name}] appears twice")));
            }
            sections.insert(name.clone(), Section { line, entries: BTreeMap::new() });
            current = Some(name);
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, found {content:?}")))?;
        let section = current
            .as_ref()
            .and_then(|name| sections.get_mut(name))
            .ok_or_else(|| err(line, "key outside of any section"))?;
        let key = key.trim().to_string();
        if section.entries.insert(key.clone(), (line, value.trim().to_string())).is_some() {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
    }
    Ok(sections)
}

fn real_at(line: usize, value: &str) -> Result<f64, CliError> {
    parse_real(value).map_err(|m| err(line, m))
}

pub fn parse_config(text: &str) -> Result<Config, CliError> {
    let mut sections = split_sections(text)?;

    let mut control = sections.remove("control").ok_or_else(|| err(0, "missing [control] section"))?;
    let label = control.take("label").map(|(_, v)| v).unwrap_or_else(|| "custom".to_string());
    if label.is_empty() || label.contains([',', '"', '\n']) {
        return Err(err(control.line, format!("label {label:?} cannot be used as a CSV field")));
    }
    let (line, initial) = control.require("control", "initial")?;
    let initial = StateVector::from_labels(&initial).map_err(|e| err(line, e.to_string()))?;
    let (line, time) = control.require("control", "time")?;
    let horizon = real_at(line, &time)?;
    if horizon <= 0.0 {
        return Err(err(line, "time must be positive"));
    }
    let gammas = match control.take("gammas") {
        Some((line, v)) => {
            let grid = parse_list(&v).map_err(|m| err(line, m))?;
            validate_gamma_grid(&grid).map_err(|e| err(line, e.to_string()))?;
            Some(grid)
        }
        None => None,
    };
    control.finish("control")?;

    let mut ham = sections.remove("hamiltonian").ok_or_else(|| err(0, "missing [hamiltonian] section"))?;
    let u = match ham.take("u") {
        Some((line, v)) => real_at(line, &v)?,
        None => 1.0,
    };
    let (line, terms) = ham.require("hamiltonian", "terms")?;
    let terms = parse_terms(&terms).map_err(|m| err(line, m))?;
    let hamiltonian = operator_from_terms(u, &terms).map_err(|e| err(line, e.to_string()))?;
    ham.finish("hamiltonian")?;

    let mut ensemble = EnsembleOverrides { gammas, ..Default::default() };
    if let Some(mut sec) = sections.remove("ensemble") {
        if let Some((line, v)) = sec.take("n_traj") {
            ensemble.n_traj = Some(v.parse().map_err(|_| err(line, format!("n_traj {v:?} is not a count")))?);
        }
        if let Some((line, v)) = sec.take("dt") {
            ensemble.dt = Some(real_at(line, &v)?);
        }
        if let Some((line, v)) = sec.take("seed") {
            ensemble.seed = Some(v.parse().map_err(|_| err(line, format!("seed {v:?} is not an unsigned integer")))?);
        }
        if let Some((line, v)) = sec.take("stepper") {
            ensemble.stepper = Some(v.parse().map_err(|e: noisebound_core::Error| err(line, e.to_string()))?);
        }
        sec.finish("ensemble")?;
    }

    // remaining sections are channels; sort by numeric index
    let mut channels: Vec<(u32, Section)> = sections
        .into_iter()
        .map(|(name, sec)| (name["channel.".len()..].parse().expect("checked when splitting"), sec))
        .collect();
    channels.sort_by_key(|(n, _)| *n);
    if let Some(w) = channels.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(err(w[0].1.line.max(w[1].1.line), format!("channel index {} appears twice", w[1].0)));
    }
    let mut specs = Vec::with_capacity(channels.len());
    for (n, mut sec) in channels {
        let name = format!("channel.{n}");
        let (line, op) = sec.require(&name, "operator")?;
        let terms = parse_terms(&op).map_err(|m| err(line, m))?;
        let (line, g) = sec.require(&name, "gamma")?;
        let gamma = if g.eq_ignore_ascii_case("sweep") {
            GammaSpec::Sweep
        } else {
            let g = real_at(line, &g)?;
            if g < 0.0 {
                return Err(err(line, "gamma must be nonnegative"));
            }
            GammaSpec::Fixed(g)
        };
        sec.finish(&name)?;
        specs.push(ChannelSpec { terms, gamma });
    }

    let model =
        Model { hamiltonian, initial, horizon, variants: vec![NoiseVariant { label: label.clone(), channels: specs }] };
    Ok(Config { label, model, ensemble })
}

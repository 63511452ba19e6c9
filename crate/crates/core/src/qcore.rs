//! Dense complex linear algebra for small quantum systems.
//!
//! Basis convention: `|0> = [1, 0]^T`, `|1> = [0, 1]^T`. In a Kronecker
//! product the leftmost factor addresses the most significant qubit, so
//! `|a> (x) |b>` has amplitude index `2 * a + b`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Validation threshold for Hermiticity, unitarity and normalization.
pub const VALIDATION_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> HermitianOperator {
        let m = match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
            // |0><1| + |1><0|
            Pauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            // i(|1><0| - |0><1|)
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            // |0><0| - |1><1|
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        };
        HermitianOperator { m }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// 2x2 Pauli matrix (or identity) in the computational basis.
pub fn pauli(which: Pauli) -> HermitianOperator {
    which.matrix()
}

/// A tensor product of single-qubit Paulis, written `X@I`, `Z@Z@Y`, ...
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(factors: Vec<Pauli>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("empty Pauli string"));
        }
        Ok(PauliString(factors))
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.0
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn to_operator(&self) -> HermitianOperator {
        let mut it = self.0.iter();
        let first = it.next().expect("non-empty by construction").matrix();
        it.fold(first, |acc, p| tensor(&acc, &p.matrix()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .split('@')
            .map(|tok| {
                let tok = tok.trim();
                let mut chars = tok.chars();
                match (chars.next().and_then(Pauli::from_char), chars.next()) {
                    (Some(p), None) => Ok(p),
                    _ => Err(Error::invalid(format!("bad Pauli factor {tok:?} in {s:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(factors)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "@")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Wraps amplitudes that must already have unit norm.
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::DimensionTooSmall(amps.len()));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(StateVector { amps })
    }

    /// Rescales any nonzero vector to unit norm.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::DimensionTooSmall(amps.len()));
        }
        let norm = amps.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(StateVector { amps: amps / C64::from(norm) })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} out of range for dim {dim}")));
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = ONE;
        Self::new(amps)
    }

    /// `|+> = (|0> + |1>)/sqrt(2)`.
    pub fn plus() -> Self {
        let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        StateVector { amps: DVector::from_column_slice(&[h, h]) }
    }

    pub fn minus() -> Self {
        let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        StateVector { amps: DVector::from_column_slice(&[h, -h]) }
    }

    /// Product state from per-qubit labels in `{0, 1, +, -}`, e.g. `"+0"`.
    pub fn from_labels(labels: &str) -> Result<Self> {
        let mut state: Option<StateVector> = None;
        for c in labels.trim().chars() {
            let q = match c {
                '0' => Self::basis(2, 0)?,
                '1' => Self::basis(2, 1)?,
                '+' => Self::plus(),
                '-' => Self::minus(),
                _ => return Err(Error::invalid(format!("unknown qubit label {c:?}"))),
            };
            state = Some(match state {
                None => q,
                Some(s) => s.tensor(&q),
            });
        }
        state.ok_or_else(|| Error::invalid("empty state label"))
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector { amps: self.amps.kronecker(&other.amps) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn into_inner(self) -> DVector<C64> {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn with_global_phase(&self, alpha: f64) -> StateVector {
        StateVector { amps: &self.amps * C64::from_polar(1.0, alpha) }
    }
}

/// Square complex matrix equal to its conjugate transpose within
/// [`VALIDATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let deviation = hermitian_deviation(&m);
        if deviation > VALIDATION_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(HermitianOperator { m })
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { m: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn scale(&self, factor: f64) -> HermitianOperator {
        HermitianOperator { m: &self.m * C64::from(factor) }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        check_dims(self.dim(), other.dim())?;
        Ok(HermitianOperator { m: &self.m + &other.m })
    }

    /// `(1 - w) * self + w * other`, used for interpolating sampled schedules.
    pub fn lerp(&self, other: &HermitianOperator, w: f64) -> HermitianOperator {
        HermitianOperator { m: &self.m * C64::from(1.0 - w) + &other.m * C64::from(w) }
    }

    pub fn square(&self) -> DMatrix<C64> {
        &self.m * &self.m
    }

    pub fn apply(&self, s: &StateVector) -> Result<DVector<C64>> {
        check_dims(self.dim(), s.dim())?;
        Ok(&self.m * s.amplitudes())
    }

    /// `<s|op|s>`, real for Hermitian operators.
    pub fn expectation(&self, s: &StateVector) -> Result<f64> {
        let v = self.apply(s)?;
        Ok(s.amplitudes().dotc(&v).re)
    }

    /// Largest eigenvalue magnitude bound via the max row sum.
    pub fn norm_inf(&self) -> f64 {
        self.m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl std::ops::Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;

    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Pure-state density matrix, kept for Hilbert-Schmidt cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let h = HermitianOperator::new(m)?;
        let trace = h.m.trace();
        if (trace.re - 1.0).abs() > VALIDATION_TOL || trace.im.abs() > VALIDATION_TOL {
            return Err(Error::invalid(format!("density matrix trace {trace} is not 1")));
        }
        if let Some(min) = h.eigenvalues().first() {
            if *min < -VALIDATION_TOL {
                return Err(Error::invalid(format!("density matrix has eigenvalue {min}")));
            }
        }
        Ok(DensityMatrix { m: h.m })
    }

    pub fn from_pure(s: &StateVector) -> Self {
        DensityMatrix { m: s.amplitudes() * s.amplitudes().adjoint() }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// `Tr[self * other]`.
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        check_dims(self.m.nrows(), other.m.nrows())?;
        Ok((&self.m * &other.m).trace().re)
    }
}

/// Kronecker product; `a` acts on the leading (most significant) factor.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator { m: a.m.kronecker(&b.m) }
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `arccos |<a|b>|`, with the overlap clamped into `[0, 1]`.
pub fn bures_angle(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm().clamp(0.0, 1.0).acos())
}

/// `<s|op^2|s> - <s|op|s>^2`, floored at zero.
pub fn variance(op: &HermitianOperator, s: &StateVector) -> Result<f64> {
    let v = op.apply(s)?;
    let second = v.norm_squared();
    let first = s.amplitudes().dotc(&v).re;
    Ok((second - first * first).max(0.0))
}

/// `exp(scale * h)` through the eigendecomposition of `h`.
pub fn expm_hermitian(h: &HermitianOperator, scale: C64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.m.clone());
    let v = eig.eigenvectors;
    let phases = DVector::from_iterator(h.dim(), eig.eigenvalues.iter().map(|&l| (scale * l).exp()));
    let mut scaled = v.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    scaled * v.adjoint()
}

/// `max |m - m^dagger|`.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |a - b|` over entries.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

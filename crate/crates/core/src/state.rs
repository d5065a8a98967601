//! Density matrices, spectra, von Neumann entropy, and spectral comparisons.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_hermitian, eig_hermitian_part, hermitian_eigenvalues, hermitian_part,
    ComplexMatrix, ComplexMatrixRepr, HERMITIAN_TOL,
};
use crate::sequence::{
    entropy_bits, is_majorized, random_simplex, MajorizationVerdict, ProbVector,
};

/// Trace tolerance for a valid state.
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues down to `-PSD_TOL` are accepted as zero.
pub const PSD_TOL: f64 = 1e-9;
/// Drift of the eigenvalue total tolerated by [`spectrum`].
pub const SPECTRUM_DRIFT_TOL: f64 = 1e-8;
/// A state counts as full rank when its smallest eigenvalue exceeds this.
pub const FULL_RANK_TOL: f64 = 1e-9;
/// Smallest eigenvalue of states from [`random_full_rank_density`].
pub const FULL_RANK_FLOOR: f64 = 1e-7;

/// A Hermitian positive semidefinite matrix with unit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct DensityMatrix(ComplexMatrix);

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(flatten)]
    matrix: ComplexMatrixRepr,
}

impl TryFrom<DensityRepr> for DensityMatrix {
    type Error = Error;
    fn try_from(repr: DensityRepr) -> Result<Self> {
        if let Some(kind) = repr.kind.as_deref() {
            if kind != "density" {
                return Err(Error::InvalidArgument(format!(
                    "expected kind \"density\", found \"{kind}\""
                )));
            }
        }
        DensityMatrix::new(repr.matrix.to_matrix()?)
    }
}

impl From<DensityMatrix> for DensityRepr {
    fn from(rho: DensityMatrix) -> Self {
        DensityRepr {
            kind: Some("density".into()),
            matrix: ComplexMatrixRepr::from(&rho.0),
        }
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_hermitian(&m, HERMITIAN_TOL)?;
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        let trace = linalg::trace(&m).re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace });
        }
        let m = hermitian_part(&m);
        let min_eigenvalue = *hermitian_eigenvalues(&m)?.last().expect("non-empty");
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps the Hermitian part of a matrix known to be a state up to rounding.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        DensityMatrix(hermitian_part(&m))
    }

    /// `diag(p)` for a normalized `p`.
    pub fn from_diagonal(p: &ProbVector) -> Result<Self> {
        let sum = p.total();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace: sum });
        }
        Ok(DensityMatrix(linalg::diagonal(p.entries())))
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty);
        }
        Ok(DensityMatrix(
            ComplexMatrix::identity(d, d).scale(1.0 / d as f64),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `UρU*` for a unitary `U`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<Self> {
        linalg::check_unitary(u)?;
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.ncols(),
            });
        }
        Ok(DensityMatrix::from_trusted(u * &self.0 * u.adjoint()))
    }

    /// Smallest eigenvalue above [`FULL_RANK_TOL`].
    pub fn is_full_rank(&self) -> Result<bool> {
        let values = hermitian_eigenvalues(&self.0)?;
        Ok(values.last().is_some_and(|&x| x > FULL_RANK_TOL))
    }
}

pub use crate::linalg::{eig_hermitian, SpectralDecomposition};

/// Eigenvalues of `ρ`, clamped to `[0, 1]` and sorted non-increasing.
///
/// Fails if clamping moves the total more than [`SPECTRUM_DRIFT_TOL`] from one.
pub fn spectrum(rho: &DensityMatrix) -> Result<ProbVector> {
    let values: Vec<f64> = hermitian_eigenvalues(&rho.0)?
        .into_iter()
        .map(|x| x.clamp(0.0, 1.0))
        .collect();
    let drift = (values.iter().sum::<f64>() - 1.0).abs();
    if drift > SPECTRUM_DRIFT_TOL {
        return Err(Error::SpectrumDrift { drift });
    }
    Ok(ProbVector::from_trusted(values, true))
}

/// `S(ρ) = −tr ρ log₂ ρ = H(λ(ρ))`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(entropy_bits(spectrum(rho)?.entries()))
}

/// `ρ₁ ≺ ρ₂` iff `λ(ρ₁) ≺ λ(ρ₂)`; spectra of different lengths are zero-padded.
pub fn state_majorized(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    tol: f64,
) -> Result<MajorizationVerdict> {
    Ok(is_majorized(&spectrum(rho1)?, &spectrum(rho2)?, tol))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    check_hermitian(h, HERMITIAN_TOL)?;
    Ok(hermitian_eigenvalues(h)?.iter().map(|x| x.abs()).sum())
}

/// `‖ρ₁ − ρ₂‖₁` (no factor ½: orthogonal pure states are at distance 2).
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            found: rho2.dim(),
        });
    }
    trace_norm(&(&rho1.0 - &rho2.0))
}

/// Sum of the `k` largest eigenvalues of a Hermitian matrix.
pub fn ky_fan_sum(a: &ComplexMatrix, k: usize) -> Result<f64> {
    check_hermitian(a, HERMITIAN_TOL)?;
    let d = a.nrows();
    if k == 0 || k > d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    Ok(hermitian_eigenvalues(a)?[..k].iter().sum())
}

/// Whether the nonzero parts of the two spectra (entries above `tol`) agree as
/// sorted multisets within `tol`. Dimensions may differ.
pub fn l1_equivalent(rho1: &DensityMatrix, rho2: &DensityMatrix, tol: f64) -> Result<bool> {
    let nonzero = |rho: &DensityMatrix| -> Result<Vec<f64>> {
        Ok(spectrum(rho)?
            .into_entries()
            .into_iter()
            .filter(|&x| x > tol)
            .collect())
    };
    let (x, y) = (nonzero(rho1)?, nonzero(rho2)?);
    Ok(x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= tol))
}

/// The rank-one projection `x x*` onto a unit vector.
pub fn pure_state(x: &[Complex64]) -> Result<DensityMatrix> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(DensityMatrix::from_trusted(linalg::outer(x, x)))
}

/// A random state with the requested spectrum (flat-simplex sample when
/// `None`) in a Haar-random eigenbasis.
///
/// A spectrum shorter than `d` is zero-padded. A uniform full-length spectrum
/// yields `I/d` exactly.
pub fn random_density<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    spectrum: Option<&ProbVector>,
) -> Result<DensityMatrix> {
    if d == 0 {
        return Err(Error::Empty);
    }
    let values = match spectrum {
        Some(p) => {
            if p.len() > d {
                return Err(Error::InvalidArgument(format!(
                    "spectrum of length {} does not fit dimension {d}",
                    p.len()
                )));
            }
            let sum = p.total();
            if (sum - 1.0).abs() > TRACE_TOL {
                return Err(Error::NotNormalized { sum });
            }
            p.padded(d).into_entries()
        }
        None => random_simplex(d, rng),
    };
    if values.iter().all(|&x| x == values[0]) {
        return DensityMatrix::maximally_mixed(d);
    }
    let u = linalg::random_unitary(d, rng);
    let scaled = ComplexMatrix::from_fn(d, d, |r, c| u[(r, c)] * values[c]);
    Ok(DensityMatrix::from_trusted(scaled * u.adjoint()))
}

/// A random state whose spectrum is drawn from a softmax of Gaussians with a
/// random inverse temperature in `[0, max_sharpness]`, so that samples range
/// from nearly maximally mixed to nearly pure. Every eigenvalue is at least
/// `FULL_RANK_FLOOR` (for `d` small enough that this is possible).
pub fn random_full_rank_density<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    max_sharpness: f64,
) -> Result<DensityMatrix> {
    if d == 0 {
        return Err(Error::Empty);
    }
    let beta = rng.random::<f64>() * max_sharpness;
    let logits: Vec<f64> = (0..d)
        .map(|_| beta * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let floor = FULL_RANK_FLOOR.min(0.5 / d as f64);
    let keep = 1.0 - floor * d as f64;
    let p = ProbVector::from_trusted(
        weights.iter().map(|w| keep * w / total + floor).collect(),
        true,
    );
    random_density(d, rng, Some(&p))
}

/// Eigen-decomposition of a state, eigenvalues non-increasing.
pub fn spectral_decomposition(rho: &DensityMatrix) -> Result<SpectralDecomposition> {
    eig_hermitian_part(&rho.0)
}

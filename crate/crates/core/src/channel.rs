//! Quantum channels in Kraus form.
//!
//! Besides application and structural checks, this module builds the
//! channels that realize a spectral majorization `ρ₁ ≺ ρ₂` (pinching, phase
//! averaging, the rank-one Uhlmann channel, the Birkhoff mixed-unitary
//! channel) and decides whether a channel is an isometric conjugation
//! `X ↦ VXV*`, which is exactly when it preserves von Neumann entropy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_unitary, complex_matrix_serde, complex_matrix_vec_serde, from_real,
    hermitian_eigenvalues, isometry_deviation, matrix_unit, max_abs, ComplexMatrix,
    ComplexMatrixRepr, ONE, ZERO,
};
use crate::sequence::{ProbVector, DEFAULT_MAJORIZATION_TOL};
use crate::state::{
    random_full_rank_density, spectral_decomposition, state_majorized, trace_distance,
    von_neumann_entropy, DensityMatrix,
};
use crate::transfer::{
    birkhoff_decompose, chain_to_doubly_stochastic, find_transfer_chain, schur_horn_orthogonal,
};

/// Entrywise tolerance for the completeness and unitality relations.
pub const FLAG_TOL: f64 = 1e-8;
/// Choi eigenvalues down to `-CP_TOL` count as non-negative.
pub const CP_TOL: f64 = 1e-8;
/// Default tolerance for [`detect_isometry`].
pub const DEFAULT_ISOMETRY_TOL: f64 = 1e-7;
/// Birkhoff tolerance used by [`mixed_unitary_uhlmann`].
const MIXED_UNITARY_BIRKHOFF_TOL: f64 = 1e-12;
/// Inverse-temperature ceiling for states sampled by [`entropy_probe`].
const PROBE_SHARPNESS: f64 = 12.0;

/// A linear map on matrices, given by its action.
///
/// Only [`structure_checks`] needs maps that are not Kraus channels (e.g. the
/// transpose).
pub trait LinearMap {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn map(&self, x: &ComplexMatrix) -> ComplexMatrix;

    /// `Φ†(I)`, assembled from `tr Φ(e_rc)`.
    fn dual_of_identity(&self) -> ComplexMatrix {
        let d = self.input_dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                out[(c, r)] = linalg::trace(&self.map(&matrix_unit(d, r, c)));
            }
        }
        out
    }

    /// `C = Σ_rc e_rc ⊗ Φ(e_rc)`.
    fn choi_matrix(&self) -> ComplexMatrix {
        let (n, m) = (self.input_dim(), self.output_dim());
        let mut choi = ComplexMatrix::zeros(n * m, n * m);
        for r in 0..n {
            for c in 0..n {
                let block = self.map(&matrix_unit(n, r, c));
                choi.view_mut((r * m, c * m), (m, m)).copy_from(&block);
            }
        }
        choi
    }

    fn min_choi_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.choi_matrix())?
            .last()
            .copied()
            .unwrap_or(0.0))
    }
}

/// The transpose map `X ↦ Xᵀ`: positive and trace preserving but not
/// completely positive.
#[derive(Debug, Clone, Copy)]
pub struct TransposeMap {
    pub dim: usize,
}

impl LinearMap for TransposeMap {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn map(&self, x: &ComplexMatrix) -> ComplexMatrix {
        x.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelFlags {
    pub trace_preserving: bool,
    pub unital: bool,
}

/// `X ↦ Σ Aᵢ X Aᵢ*` with `d_out × d_in` Kraus operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KrausRepr", into = "KrausRepr")]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<ComplexMatrix>,
    flags: ChannelFlags,
    /// `W_rc = Σ aᵢ(r)·conj(aᵢ(c))` when every Kraus operator is diagonal, so
    /// that `Φ(X) = W ∘ X`.
    schur_multiplier: Option<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct KrausRepr {
    d_in: usize,
    d_out: usize,
    #[serde(with = "complex_matrix_vec_serde")]
    kraus: Vec<ComplexMatrix>,
    #[serde(default)]
    flags: Option<ChannelFlags>,
}

impl TryFrom<KrausRepr> for KrausChannel {
    type Error = Error;
    fn try_from(repr: KrausRepr) -> Result<Self> {
        let channel = KrausChannel::new(repr.d_in, repr.d_out, repr.kraus)?;
        if let Some(declared) = repr.flags {
            if declared.trace_preserving && !channel.flags.trace_preserving {
                return Err(Error::NotTracePreserving {
                    deviation: channel.completeness_deviation(),
                });
            }
            if declared.unital && !channel.flags.unital {
                return Err(Error::NotUnital {
                    deviation: channel.unitality_deviation(),
                });
            }
        }
        Ok(channel)
    }
}

impl From<KrausChannel> for KrausRepr {
    fn from(c: KrausChannel) -> Self {
        KrausRepr {
            d_in: c.d_in,
            d_out: c.d_out,
            kraus: c.kraus,
            flags: Some(c.flags),
        }
    }
}

impl KrausChannel {
    /// Builds a channel; the trace-preserving and unital flags are computed
    /// at tolerance [`FLAG_TOL`].
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        if kraus.is_empty() || d_in == 0 || d_out == 0 {
            return Err(Error::Empty);
        }
        for a in &kraus {
            if a.nrows() != d_out {
                return Err(Error::DimensionMismatch {
                    expected: d_out,
                    found: a.nrows(),
                });
            }
            if a.ncols() != d_in {
                return Err(Error::DimensionMismatch {
                    expected: d_in,
                    found: a.ncols(),
                });
            }
            linalg::check_finite(a)?;
        }
        let schur_multiplier = diagonal_multiplier(d_in, d_out, &kraus);
        let mut channel = KrausChannel {
            d_in,
            d_out,
            kraus,
            flags: ChannelFlags::default(),
            schur_multiplier,
        };
        channel.flags = ChannelFlags {
            trace_preserving: channel.completeness_deviation() <= FLAG_TOL,
            unital: channel.unitality_deviation() <= FLAG_TOL,
        };
        Ok(channel)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new(d, d, vec![ComplexMatrix::identity(d, d)])
    }

    /// `X ↦ VXV*` for an isometry (or unitary) `V`.
    pub fn conjugation(v: ComplexMatrix) -> Result<Self> {
        let deviation = isometry_deviation(&v);
        if deviation > linalg::UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Self::new(v.ncols(), v.nrows(), vec![v])
    }

    /// `X ↦ Σ tᵢ UᵢXUᵢ*`.
    pub fn mixed_unitary(terms: &[(f64, ComplexMatrix)]) -> Result<Self> {
        let first = terms.first().ok_or(Error::Empty)?;
        let d = first.1.nrows();
        let mut kraus = Vec::with_capacity(terms.len());
        for (t, u) in terms {
            if *t < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative mixture weight {t}"
                )));
            }
            check_unitary(u)?;
            kraus.push(u.scale(t.sqrt()));
        }
        Self::new(d, d, kraus)
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn output_dim(&self) -> usize {
        self.d_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn flags(&self) -> ChannelFlags {
        self.flags
    }

    pub fn is_bistochastic(&self) -> bool {
        self.flags.trace_preserving && self.flags.unital
    }

    /// `‖Σ Aᵢ*Aᵢ − I‖_max`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d_in, self.d_in);
        for a in &self.kraus {
            sum += a.adjoint() * a;
        }
        max_abs(&(sum - ComplexMatrix::identity(self.d_in, self.d_in)))
    }

    /// `‖Σ AᵢAᵢ* − I‖_max`.
    pub fn unitality_deviation(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d_out, self.d_out);
        for a in &self.kraus {
            sum += a * a.adjoint();
        }
        max_abs(&(sum - ComplexMatrix::identity(self.d_out, self.d_out)))
    }

    /// `Σ AᵢXAᵢ*` for an arbitrary `d_in × d_in` matrix.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.d_in, self.d_in) {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                found: if x.nrows() != self.d_in {
                    x.nrows()
                } else {
                    x.ncols()
                },
            });
        }
        Ok(self.map_unchecked(x))
    }

    fn map_unchecked(&self, x: &ComplexMatrix) -> ComplexMatrix {
        if let Some(w) = &self.schur_multiplier {
            return w.component_mul(x);
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for a in &self.kraus {
            out += a * x * a.adjoint();
        }
        out
    }

    /// `Φ(ρ)` for a trace-preserving channel.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if !self.flags.trace_preserving {
            return Err(Error::NotTracePreserving {
                deviation: self.completeness_deviation(),
            });
        }
        let out = self.apply_operator(rho.matrix())?;
        Ok(DensityMatrix::from_trusted(out))
    }

    /// `Φ†(X) = Σ Aᵢ*XAᵢ` for a `d_out × d_out` matrix.
    pub fn adjoint_apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.d_out, self.d_out) {
            return Err(Error::DimensionMismatch {
                expected: self.d_out,
                found: if x.nrows() != self.d_out {
                    x.nrows()
                } else {
                    x.ncols()
                },
            });
        }
        if let Some(w) = &self.schur_multiplier {
            return Ok(w.map(|z| z.conj()).component_mul(x));
        }
        let mut out = ComplexMatrix::zeros(self.d_in, self.d_in);
        for a in &self.kraus {
            out += a.adjoint() * x * a;
        }
        Ok(out)
    }

    /// `then ∘ self`, with Kraus operators `Bⱼ Aᵢ`.
    pub fn compose(&self, then: &KrausChannel) -> Result<KrausChannel> {
        if then.d_in != self.d_out {
            return Err(Error::DimensionMismatch {
                expected: self.d_out,
                found: then.d_in,
            });
        }
        let kraus = then
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        KrausChannel::new(self.d_in, then.d_out, kraus)
    }

    /// The same channel with Kraus operators `Bᵢ = Σⱼ wᵢⱼ Aⱼ`; a unitary `w`
    /// leaves the channel unchanged.
    pub fn remix(&self, w: &ComplexMatrix) -> Result<KrausChannel> {
        let k = self.kraus.len();
        if w.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: w.nrows(),
            });
        }
        let kraus = (0..k)
            .map(|i| {
                let mut b = ComplexMatrix::zeros(self.d_out, self.d_in);
                for (j, a) in self.kraus.iter().enumerate() {
                    b += a * w[(i, j)];
                }
                b
            })
            .collect();
        KrausChannel::new(self.d_in, self.d_out, kraus)
    }

    /// `X ↦ B·Φ(B*XB)·B*`: the same channel expressed in the basis given by
    /// the columns of the unitary `B`.
    pub fn in_basis(&self, basis: &ComplexMatrix) -> Result<KrausChannel> {
        check_unitary(basis)?;
        if self.d_in != self.d_out || basis.nrows() != self.d_in {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                found: basis.nrows(),
            });
        }
        let kraus = self
            .kraus
            .iter()
            .map(|a| basis * a * basis.adjoint())
            .collect();
        KrausChannel::new(self.d_in, self.d_out, kraus)
    }
}

fn diagonal_multiplier(
    d_in: usize,
    d_out: usize,
    kraus: &[ComplexMatrix],
) -> Option<ComplexMatrix> {
    if d_in != d_out {
        return None;
    }
    let is_diagonal =
        |a: &ComplexMatrix| (0..d_in).all(|c| (0..d_in).all(|r| r == c || a[(r, c)] == ZERO));
    if !kraus.iter().all(is_diagonal) {
        return None;
    }
    let mut w = ComplexMatrix::zeros(d_in, d_in);
    for a in kraus {
        for c in 0..d_in {
            for r in 0..d_in {
                w[(r, c)] += a[(r, r)] * a[(c, c)].conj();
            }
        }
    }
    Some(w)
}

impl LinearMap for KrausChannel {
    fn input_dim(&self) -> usize {
        self.d_in
    }

    fn output_dim(&self) -> usize {
        self.d_out
    }

    fn map(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.map_unchecked(x)
    }

    fn dual_of_identity(&self) -> ComplexMatrix {
        let mut sum = ComplexMatrix::zeros(self.d_in, self.d_in);
        for a in &self.kraus {
            sum += a.adjoint() * a;
        }
        sum
    }

    /// The Choi matrix is `Σ vec(Aᵢ) vec(Aᵢ)*`; its nonzero spectrum is that
    /// of the Gram matrix `⟨vec Aᵢ, vec Aⱼ⟩`, padded with zeros.
    fn min_choi_eigenvalue(&self) -> Result<f64> {
        let k = self.kraus.len();
        let gram = ComplexMatrix::from_fn(k, k, |i, j| self.kraus[i].dotc(&self.kraus[j]));
        let smallest = hermitian_eigenvalues(&gram)?.last().copied().unwrap_or(0.0);
        Ok(if k < self.d_in * self.d_out {
            smallest.min(0.0)
        } else {
            smallest
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagCheck {
    pub holds: bool,
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpCheck {
    pub holds: bool,
    pub min_choi_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub trace_preserving: FlagCheck,
    pub unital: FlagCheck,
    pub completely_positive: CpCheck,
}

impl StructureReport {
    pub fn is_bistochastic(&self) -> bool {
        self.trace_preserving.holds && self.unital.holds
    }
}

/// Trace preservation (`Φ†(I) = I`), unitality (`Φ(I) = I`) and complete
/// positivity (Choi matrix PSD, minimum eigenvalue `≥ −CP_TOL`).
pub fn structure_checks<M: LinearMap + ?Sized>(map: &M) -> Result<StructureReport> {
    let (n, m) = (map.input_dim(), map.output_dim());
    let tp = max_abs(&(map.dual_of_identity() - ComplexMatrix::identity(n, n)));
    let unital =
        max_abs(&(map.map(&ComplexMatrix::identity(n, n)) - ComplexMatrix::identity(m, m)));
    let min_choi_eigenvalue = map.min_choi_eigenvalue()?;
    Ok(StructureReport {
        trace_preserving: FlagCheck {
            holds: tp <= FLAG_TOL,
            deviation: tp,
        },
        unital: FlagCheck {
            holds: unital <= FLAG_TOL,
            deviation: unital,
        },
        completely_positive: CpCheck {
            holds: min_choi_eigenvalue >= -CP_TOL,
            min_choi_eigenvalue,
        },
    })
}

/// `ρ ↦ Σ EᵢρEᵢ` with `Eᵢ = eᵢeᵢ*` for the columns `eᵢ` of a unitary.
pub fn pinching_channel(basis: &ComplexMatrix) -> Result<KrausChannel> {
    check_unitary(basis)?;
    let d = basis.nrows();
    let kraus = (0..d)
        .map(|i| {
            let e: Vec<Complex64> = basis.column(i).iter().copied().collect();
            linalg::outer(&e, &e)
        })
        .collect();
    KrausChannel::new(d, d, kraus)
}

/// `Φ_n(ρ) = (1/n) Σ_{k=1..n} Uᵏ ρ U⁻ᵏ` with
/// `U = diag(ω, ω², …, ωⁿ, 1, …, 1)`, `ω = e^{2πi/n}`.
///
/// The first `n − 1` coordinates are decohered from everything; coordinates
/// `n−1..d` carry phase 1 and keep their coherences.
pub fn phase_averaging_channel(n: usize, d: usize) -> Result<KrausChannel> {
    if n == 0 || n > d {
        return Err(Error::IndexOutOfRange { index: n, dim: d });
    }
    let scale = 1.0 / (n as f64).sqrt();
    let kraus = (1..=n)
        .map(|k| {
            let mut u = ComplexMatrix::zeros(d, d);
            for i in 0..d {
                u[(i, i)] = if i < n {
                    let exponent = (k * (i + 1)) % n;
                    Complex64::from_polar(
                        scale,
                        2.0 * std::f64::consts::PI * exponent as f64 / n as f64,
                    )
                } else {
                    Complex64::new(scale, 0.0)
                };
            }
            u
        })
        .collect();
    KrausChannel::new(d, d, kraus)
}

/// One row of the phase-averaging convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchRow {
    pub n: usize,
    pub trace_distance: f64,
    pub bound: f64,
}

/// For `n = 1..=d`: `‖Φ_n(ρ₂) − Φ(ρ₂)‖₁` against the bound
/// `2·tr((I − P_n) ρ₂ (I − P_n))`, where both channels act in `basis`, and
/// `P_n` projects onto its first `n − 1` vectors.
pub fn pinch_convergence_experiment(
    rho2: &DensityMatrix,
    basis: &ComplexMatrix,
) -> Result<Vec<PinchRow>> {
    check_unitary(basis)?;
    let d = rho2.dim();
    if basis.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: basis.nrows(),
        });
    }
    // Work in the pinching basis; trace distances are unitarily invariant.
    let in_basis = DensityMatrix::from_trusted(basis.adjoint() * rho2.matrix() * basis);
    let pinch = pinching_channel(&ComplexMatrix::identity(d, d))?.apply(&in_basis)?;

    let mut rows = Vec::with_capacity(d);
    for n in 1..=d {
        let averaged = phase_averaging_channel(n, d)?.apply(&in_basis)?;
        let tail: f64 = (n - 1..d).map(|i| in_basis.matrix()[(i, i)].re).sum();
        rows.push(PinchRow {
            n,
            trace_distance: trace_distance(&averaged, &pinch)?,
            bound: 2.0 * tail,
        });
    }
    Ok(rows)
}

/// `n,trace_distance,bound` followed by one line per row.
pub fn pinch_table_csv(rows: &[PinchRow]) -> String {
    let mut out = String::from("n,trace_distance,bound\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.n, r.trace_distance, r.bound));
    }
    out
}

fn check_same_dim(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<usize> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho2.dim(),
            found: rho1.dim(),
        });
    }
    Ok(rho1.dim())
}

/// Eigenvalues clamped to `[0, 1]` together with the eigenbasis.
fn sorted_eigensystem(rho: &DensityMatrix) -> Result<(ProbVector, ComplexMatrix)> {
    let dec = spectral_decomposition(rho)?;
    let values = dec.eigenvalues.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    Ok((ProbVector::with_flag(values, false)?, dec.eigenvectors))
}

fn require_majorized(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<()> {
    let verdict = state_majorized(rho1, rho2, DEFAULT_MAJORIZATION_TOL)?;
    if !verdict.holds {
        return Err(Error::MajorizationFailed(verdict));
    }
    Ok(())
}

/// A bistochastic channel `Ψ` with `Ψ(ρ₂) = ρ₁`, for `ρ₁ ≺ ρ₂`.
///
/// With `ρ₂ = Y diag(β) Y*`, `ρ₁ = F diag(α) F*` and a Schur–Horn orthogonal
/// `U` (so `Σ_k U_ik² β_k = α_i`), the rotated basis `eᵢ = Y·Uᵀeᵢ` satisfies
/// `⟨ρ₂eᵢ, eᵢ⟩ = αᵢ`. The Kraus operators are `fᵢ eᵢ*`: pinch in the rotated
/// basis, then relabel onto the eigenbasis of `ρ₁`.
pub fn uhlmann_channel(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<KrausChannel> {
    let d = check_same_dim(rho1, rho2)?;
    require_majorized(rho1, rho2)?;
    let (alpha, f) = sorted_eigensystem(rho1)?;
    let (beta, y) = sorted_eigensystem(rho2)?;
    let u = schur_horn_orthogonal(&alpha, &beta)?;
    let e = &y * from_real(&u.matrix().transpose());
    let kraus = (0..d)
        .map(|i| f.column(i) * e.column(i).adjoint())
        .collect();
    KrausChannel::new(d, d, kraus)
}

/// `X ↦ Σ tᵢ UᵢXUᵢ*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedUnitary {
    pub terms: Vec<UnitaryTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryTerm {
    pub weight: f64,
    #[serde(with = "complex_matrix_serde")]
    pub unitary: ComplexMatrix,
}

impl MixedUnitary {
    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    pub fn to_channel(&self) -> Result<KrausChannel> {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|t| (t.weight, t.unitary.clone()))
            .collect();
        KrausChannel::mixed_unitary(&terms)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.to_channel()?.apply(rho)
    }
}

/// A mixed-unitary channel with `Φ(ρ₂) = ρ₁`, for `ρ₁ ≺ ρ₂`.
///
/// The doubly stochastic `Q` with `Qβ = α` comes from the transfer chain; its
/// Birkhoff terms `t_π P(π)` become unitaries `U_π = F·P(π)·Y*`.
pub fn mixed_unitary_uhlmann(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<MixedUnitary> {
    let d = check_same_dim(rho1, rho2)?;
    require_majorized(rho1, rho2)?;
    let (alpha, f) = sorted_eigensystem(rho1)?;
    let (beta, y) = sorted_eigensystem(rho2)?;
    let q = chain_to_doubly_stochastic(&find_transfer_chain(&alpha, &beta)?);
    let dec = birkhoff_decompose(&q, MIXED_UNITARY_BIRKHOFF_TOL)?;
    let total = dec.total_weight();
    let y_adj = y.adjoint();
    let terms = dec
        .terms
        .iter()
        .map(|term| {
            let p = ComplexMatrix::from_fn(d, d, |r, c| if term.perm[r] == c { ONE } else { ZERO });
            UnitaryTerm {
                weight: term.weight / total,
                unitary: &f * p * &y_adj,
            }
        })
        .collect();
    Ok(MixedUnitary { terms })
}

/// Which part of the isometry test failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsometryCheck {
    /// `Aⱼ*Aᵢ` is not a multiple of the identity.
    ScalarProduct,
    /// `|λᵢⱼ|² ≠ λᵢᵢλⱼⱼ`.
    RankOneGram,
    /// `Σ λᵢᵢ ≠ 1`.
    GramTrace,
    /// The recovered `V` is not an isometry.
    Isometry,
    /// `Φ(X)` and `VXV*` disagree on some matrix unit.
    Conjugation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureWitness {
    pub check: IsometryCheck,
    /// Zero-based Kraus indices, when the check concerns a pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
    pub deviation: f64,
}

/// Outcome of [`detect_isometry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub is_isometric_conjugation: bool,
    #[serde(
        default,
        with = "option_matrix_serde",
        skip_serializing_if = "Option::is_none"
    )]
    pub isometry: Option<ComplexMatrix>,
    /// `λᵢⱼ = tr(Aᵢ*Aⱼ)/d_in`.
    #[serde(with = "complex_matrix_serde")]
    pub gram: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_witness: Option<FailureWitness>,
    /// `max_rc ‖Φ(e_rc) − V e_rc V*‖_max`, when an isometry was recovered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugation_deviation: Option<f64>,
}

mod option_matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &Option<ComplexMatrix>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(ComplexMatrixRepr::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<ComplexMatrix>, D::Error> {
        Option::<ComplexMatrixRepr>::deserialize(d)?
            .map(|r| r.to_matrix().map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Decides whether `Φ(X) = VXV*` for some isometry `V`.
///
/// Checks, at tolerance `tol` in max-entry norm: every product `Aⱼ*Aᵢ` equals
/// `λⱼᵢ·I` with `λⱼᵢ = tr(Aⱼ*Aᵢ)/d_in`; the Gram matrix `(λᵢⱼ)` has rank one
/// (`|λᵢⱼ|² = λᵢᵢλⱼⱼ`) and unit trace; `V = A_p/√λ_pp`, taken at the largest
/// diagonal Gram entry, is an isometry and reproduces `Φ` on matrix units.
/// `V` is returned with its first non-negligible entry (column-major) real
/// positive.
pub fn detect_isometry(channel: &KrausChannel, tol: f64) -> Result<IsometryReport> {
    if !channel.flags.trace_preserving {
        return Err(Error::NotTracePreserving {
            deviation: channel.completeness_deviation(),
        });
    }
    let a = &channel.kraus;
    let k = a.len();
    let d_in = channel.d_in;
    let identity = ComplexMatrix::identity(d_in, d_in);

    let mut gram = ComplexMatrix::zeros(k, k);
    let mut witness = None;
    for i in 0..k {
        for j in i..k {
            let product = a[j].adjoint() * &a[i];
            let lambda = linalg::trace(&product) / d_in as f64;
            gram[(j, i)] = lambda;
            gram[(i, j)] = lambda.conj();
            let deviation = max_abs(&(product - &identity * lambda));
            if witness.is_none() && deviation > tol {
                witness = Some(FailureWitness {
                    check: IsometryCheck::ScalarProduct,
                    pair: Some((i, j)),
                    deviation,
                });
            }
        }
    }
    let negative = |gram, failure_witness| IsometryReport {
        is_isometric_conjugation: false,
        isometry: None,
        gram,
        failure_witness,
        conjugation_deviation: None,
    };
    if witness.is_some() {
        return Ok(negative(gram, witness));
    }

    'outer: for i in 0..k {
        for j in i + 1..k {
            let deviation = (gram[(i, j)].norm_sqr() - gram[(i, i)].re * gram[(j, j)].re).abs();
            if deviation > tol {
                witness = Some(FailureWitness {
                    check: IsometryCheck::RankOneGram,
                    pair: Some((i, j)),
                    deviation,
                });
                break 'outer;
            }
        }
    }
    let trace_deviation = (gram.diagonal().iter().map(|z| z.re).sum::<f64>() - 1.0).abs();
    if witness.is_none() && trace_deviation > tol {
        witness = Some(FailureWitness {
            check: IsometryCheck::GramTrace,
            pair: None,
            deviation: trace_deviation,
        });
    }
    if witness.is_some() {
        return Ok(negative(gram, witness));
    }

    let pivot = (0..k)
        .max_by(|&x, &y| gram[(x, x)].re.total_cmp(&gram[(y, y)].re))
        .expect("non-empty Kraus list");
    let mut v = a[pivot].unscale(gram[(pivot, pivot)].re.sqrt());
    fix_global_phase(&mut v);

    let deviation = isometry_deviation(&v);
    if deviation > tol {
        let witness = FailureWitness {
            check: IsometryCheck::Isometry,
            pair: None,
            deviation,
        };
        return Ok(negative(gram, Some(witness)));
    }

    let conjugation = conjugation_deviation(channel, &v);
    let failure_witness = (conjugation > tol).then_some(FailureWitness {
        check: IsometryCheck::Conjugation,
        pair: None,
        deviation: conjugation,
    });
    Ok(IsometryReport {
        is_isometric_conjugation: failure_witness.is_none(),
        isometry: failure_witness.is_none().then_some(v),
        gram,
        failure_witness,
        conjugation_deviation: Some(conjugation),
    })
}

fn fix_global_phase(v: &mut ComplexMatrix) {
    let scale = max_abs(v);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-6 * scale).copied() {
        let phase = z.conj() / z.norm();
        *v *= phase;
    }
}

/// `max_rc ‖Φ(e_rc) − V e_rc V*‖_max` over all matrix units of the input.
pub fn conjugation_deviation(channel: &KrausChannel, v: &ComplexMatrix) -> f64 {
    let d = channel.d_in;
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let e = matrix_unit(d, r, c);
            let diff = channel.map_unchecked(&e) - v * &e * v.adjoint();
            worst = worst.max(max_abs(&diff));
        }
    }
    worst
}

/// Result of [`entropy_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub max_deviation: f64,
    /// Seed of the trial attaining `max_deviation`; the state is reproduced by
    /// `random_full_rank_density` under `ChaCha8Rng::seed_from_u64(seed)`.
    pub worst_seed: u64,
}

/// Largest `|S(Φ(ρ)) − S(ρ)|` over `trials` random full-rank states of
/// dimension `d`.
///
/// Trial `k` uses the seed `base + k`, where `base` is drawn from `rng`.
/// Trials run in parallel; ties in the maximum go to the smaller seed.
pub fn entropy_probe<R: Rng + ?Sized>(
    channel: &KrausChannel,
    trials: usize,
    d: usize,
    rng: &mut R,
) -> Result<ProbeReport> {
    if !channel.flags.trace_preserving {
        return Err(Error::NotTracePreserving {
            deviation: channel.completeness_deviation(),
        });
    }
    if d != channel.d_in {
        return Err(Error::DimensionMismatch {
            expected: channel.d_in,
            found: d,
        });
    }
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "entropy probe needs at least one trial".into(),
        ));
    }
    let base: u64 = rng.random();
    let results: Vec<(f64, u64)> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base.wrapping_add(k);
            let rho = probe_state(d, seed)?;
            let deviation =
                (von_neumann_entropy(&channel.apply(&rho)?)? - von_neumann_entropy(&rho)?).abs();
            Ok((deviation, seed))
        })
        .collect::<Result<_>>()?;
    let (max_deviation, worst_seed) = results
        .into_iter()
        .reduce(|best, next| match next.0.total_cmp(&best.0) {
            std::cmp::Ordering::Greater => next,
            std::cmp::Ordering::Equal if next.1 < best.1 => next,
            _ => best,
        })
        .expect("trials > 0");
    Ok(ProbeReport {
        trials,
        max_deviation,
        worst_seed,
    })
}

/// The state examined by [`entropy_probe`] for a given trial seed.
pub fn probe_state(d: usize, seed: u64) -> Result<DensityMatrix> {
    random_full_rank_density(d, &mut ChaCha8Rng::seed_from_u64(seed), PROBE_SHARPNESS)
}

/// Result of [`fixed_point_commutant_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// `Φ†(I) ≤ I` within tolerance.
    pub hypothesis_holds: bool,
    /// Largest eigenvalue of `Φ†(I) − I`.
    pub hypothesis_excess: f64,
    pub is_fixed: bool,
    /// `‖Φ(B) − B‖_max`.
    pub fixed_deviation: f64,
    /// `max_i max(‖AᵢB − BAᵢ‖_max, ‖Aᵢ*B − BAᵢ*‖_max)`, reported for fixed `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_commutator_norm: Option<f64>,
}

/// For a fixed point `Φ(B) = B` of a channel with `Φ†(I) ≤ I`, `B` commutes
/// with every Kraus operator and its adjoint; this reports both sides.
pub fn fixed_point_commutant_check(
    channel: &KrausChannel,
    b: &ComplexMatrix,
    tol: f64,
) -> Result<FixedPointReport> {
    if channel.d_in != channel.d_out {
        return Err(Error::DimensionMismatch {
            expected: channel.d_in,
            found: channel.d_out,
        });
    }
    let d = channel.d_in;
    let excess = LinearMap::dual_of_identity(channel) - ComplexMatrix::identity(d, d);
    let hypothesis_excess = hermitian_eigenvalues(&excess)?
        .first()
        .copied()
        .unwrap_or(0.0);
    let image = channel.apply_operator(b)?;
    let fixed_deviation = max_abs(&(image - b));
    let is_fixed = fixed_deviation <= tol;
    let max_commutator_norm = is_fixed.then(|| {
        channel
            .kraus
            .iter()
            .map(|a| {
                let left = max_abs(&(a * b - b * a));
                let adj = a.adjoint();
                let right = max_abs(&(&adj * b - b * &adj));
                left.max(right)
            })
            .fold(0.0, f64::max)
    });
    Ok(FixedPointReport {
        hypothesis_holds: hypothesis_excess <= tol,
        hypothesis_excess,
        is_fixed,
        fixed_deviation,
        max_commutator_norm,
    })
}

/// A random mixed-unitary (hence bistochastic) channel with `terms` Haar
/// unitaries and flat-simplex weights.
pub fn random_mixed_unitary_channel<R: Rng + ?Sized>(
    d: usize,
    terms: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    if terms == 0 {
        return Err(Error::Empty);
    }
    let weights = crate::sequence::random_simplex(terms, rng);
    let list: Vec<_> = weights
        .into_iter()
        .map(|w| (w, linalg::random_unitary(d, rng)))
        .collect();
    KrausChannel::mixed_unitary(&list)
}

/// `X ↦ VXV*` for a Haar-random isometry `V`, written redundantly with
/// `terms` Kraus operators `cᵢ·V` (random phases, `Σ|cᵢ|² = 1`).
///
/// Returns the channel together with `V`.
pub fn random_isometric_channel<R: Rng + ?Sized>(
    d_in: usize,
    d_out: usize,
    terms: usize,
    rng: &mut R,
) -> Result<(KrausChannel, ComplexMatrix)> {
    if terms == 0 {
        return Err(Error::Empty);
    }
    let v = linalg::random_isometry(d_out, d_in, rng)?;
    let weights = crate::sequence::random_simplex(terms, rng);
    let kraus = weights
        .into_iter()
        .map(|w| {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            &v * Complex64::from_polar(w.sqrt(), phase)
        })
        .collect();
    Ok((KrausChannel::new(d_in, d_out, kraus)?, v))
}

/// Real matrices as complex; convenience for building Kraus lists from
/// real data.
pub fn real_kraus(ops: &[DMatrix<f64>]) -> Vec<ComplexMatrix> {
    ops.iter().map(from_real).collect()
}

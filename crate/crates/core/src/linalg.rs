//! Dense complex matrix helpers shared by the state and channel modules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix, the carrier for every operator in the crate.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for `H = H*`.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Entrywise tolerance for `U*U = I`.
pub const UNITARY_TOL: f64 = 1e-9;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix, eigenvalues non-increasing.
///
/// Column `k` of `eigenvectors` belongs to `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// `V·diag(λ)·V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * self.eigenvalues[c]);
        scaled * v.adjoint()
    }
}

/// Largest `|H_rc − conj(H_cr)|` and where it occurs.
pub fn hermitian_deviation(h: &ComplexMatrix) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for c in 0..h.ncols() {
        for r in 0..=c.min(h.nrows().saturating_sub(1)) {
            let dev = (h[(r, c)] - h[(c, r)].conj()).norm();
            if dev > worst.2 {
                worst = (r, c, dev);
            }
        }
    }
    worst
}

pub(crate) fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn check_finite(m: &ComplexMatrix) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_hermitian(h: &ComplexMatrix, tol: f64) -> Result<()> {
    check_square(h)?;
    check_finite(h)?;
    let (row, col, deviation) = hermitian_deviation(h);
    if deviation > tol {
        return Err(Error::NotHermitian {
            row,
            col,
            deviation,
        });
    }
    Ok(())
}

/// `(H + H*)/2`.
pub fn hermitian_part(h: &ComplexMatrix) -> ComplexMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// Hermitian eigensolver.
///
/// Fails with `NotHermitian` when `h` departs from `h*` by more than
/// [`HERMITIAN_TOL`] in any entry; otherwise the Hermitian part is
/// diagonalized.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<SpectralDecomposition> {
    check_hermitian(h, HERMITIAN_TOL)?;
    eig_hermitian_part(h)
}

pub(crate) fn eig_hermitian_part(h: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let n = h.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig =
        SymmetricEigen::try_new(hermitian_part(h), f64::EPSILON, 0).ok_or(Error::EigenFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, non-increasing.
pub(crate) fn hermitian_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = h.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut values: Vec<f64> = hermitian_part(h)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Max-entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `‖M*M − I‖_max`.
pub fn isometry_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.ncols();
    max_abs(&(m.adjoint() * m - ComplexMatrix::identity(n, n)))
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && isometry_deviation(m) <= tol
}

pub(crate) fn check_unitary(m: &ComplexMatrix) -> Result<()> {
    check_square(m)?;
    let deviation = isometry_deviation(m);
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `e_r e_c*` in dimension `d`.
pub fn matrix_unit(d: usize, r: usize, c: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(r, c)] = ONE;
    m
}

/// `x y*`.
pub fn outer(x: &[Complex64], y: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(x.len(), y.len(), |r, c| x[r] * y[c].conj())
}

pub fn from_real(m: &DMatrix<f64>) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn diagonal(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(values[r], 0.0)
        } else {
            ZERO
        }
    })
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Haar-random isometry (`rows ≥ cols`) from the QR factorization of a complex
/// Gaussian matrix, with the phases of `R`'s diagonal absorbed into `Q`.
pub fn random_isometry<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if cols > rows {
        return Err(Error::InvalidArgument(format!(
            "an isometry into dimension {rows} cannot have {cols} columns"
        )));
    }
    let qr = random_gaussian(rows, cols, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q[(i, j)] * phase
    }))
}

/// Haar-random unitary.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    random_isometry(d, d, rng).expect("square isometry")
}

/// Haar-random real orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    DMatrix::from_fn(d, d, |i, j| {
        if r[(j, j)] < 0.0 {
            -q[(i, j)]
        } else {
            q[(i, j)]
        }
    })
}

/// Uniformly random unit vector in `ℂ^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let g = random_gaussian(d, 1, rng);
    let norm = g.norm();
    g.iter().map(|z| z / norm).collect()
}

/// `{"d_rows":r,"d_cols":c,"rows":[[[re,im],...],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixRepr {
    pub d_rows: usize,
    pub d_cols: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl ComplexMatrixRepr {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.rows.len() != self.d_rows {
            return Err(Error::DimensionMismatch {
                expected: self.d_rows,
                found: self.rows.len(),
            });
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.d_cols) {
            return Err(Error::DimensionMismatch {
                expected: self.d_cols,
                found: r.len(),
            });
        }
        let m = ComplexMatrix::from_fn(self.d_rows, self.d_cols, |r, c| {
            let [re, im] = self.rows[r][c];
            Complex64::new(re, im)
        });
        check_finite(&m)?;
        Ok(m)
    }
}

impl From<&ComplexMatrix> for ComplexMatrixRepr {
    fn from(m: &ComplexMatrix) -> Self {
        ComplexMatrixRepr {
            d_rows: m.nrows(),
            d_cols: m.ncols(),
            rows: m
                .row_iter()
                .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

/// `#[serde(with = "...")]` adapter for a single [`ComplexMatrix`].
pub mod complex_matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &ComplexMatrix,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        ComplexMatrixRepr::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<ComplexMatrix, D::Error> {
        ComplexMatrixRepr::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "...")]` adapter for a list of [`ComplexMatrix`].
pub mod complex_matrix_vec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        ms: &[ComplexMatrix],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<ComplexMatrixRepr> = ms.iter().map(ComplexMatrixRepr::from).collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<ComplexMatrix>, D::Error> {
        Vec::<ComplexMatrixRepr>::deserialize(d)?
            .iter()
            .map(|r| r.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_input_keeps_basis() {
        let dec = eig_hermitian(&diagonal(&[0.3, 0.7])).unwrap();
        assert_eq!(dec.eigenvalues, vec![0.7, 0.3]);
        // Columns are the standard basis vectors, up to phase.
        assert!((dec.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((dec.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_projector() {
        let h = ComplexMatrix::from_element(2, 2, c(0.5));
        let dec = eig_hermitian(&h).unwrap();
        assert!((dec.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!(dec.eigenvalues[1].abs() < 1e-15);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [1, 2, 5, 16, 24] {
            let g = random_gaussian(d, d, &mut rng);
            let h = hermitian_part(&g);
            let dec = eig_hermitian(&h).unwrap();
            assert!(max_abs(&(dec.reconstruct() - &h)) <= 1e-8);
            assert!(isometry_deviation(&dec.eigenvectors) <= 1e-9);
            assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = hermitian_part(&random_gaussian(6, 6, &mut rng));
        let x = eig_hermitian(&h).unwrap();
        let y = eig_hermitian(&h).unwrap();
        assert_eq!(x.eigenvalues, y.eigenvalues);
        assert_eq!(x.eigenvectors, y.eigenvectors);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = ComplexMatrix::zeros(3, 3);
        h[(0, 2)] = c(1.0);
        match eig_hermitian(&h) {
            Err(Error::NotHermitian {
                row: 0,
                col: 2,
                deviation,
            }) => assert_eq!(deviation, 1.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            eig_hermitian(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1, 3, 16] {
            assert!(isometry_deviation(&random_unitary(d, &mut rng)) < 1e-12);
        }
        let v = random_isometry(7, 3, &mut rng).unwrap();
        assert_eq!(v.shape(), (7, 3));
        assert!(isometry_deviation(&v) < 1e-12);
        assert!(random_isometry(2, 3, &mut rng).is_err());
        let o = random_orthogonal(5, &mut rng);
        assert!((o.transpose() * &o - DMatrix::<f64>::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn json_form() {
        let m = ComplexMatrix::from_row_slice(1, 2, &[c(1.0), Complex64::new(0.0, -0.5)]);
        let s = serde_json::to_string(&ComplexMatrixRepr::from(&m)).unwrap();
        assert_eq!(
            s,
            r#"{"d_rows":1,"d_cols":2,"rows":[[[1.0,0.0],[0.0,-0.5]]]}"#
        );
        let back: ComplexMatrixRepr = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
        let bad: ComplexMatrixRepr =
            serde_json::from_str(r#"{"d_rows":2,"d_cols":1,"rows":[[[1,0]]]}"#).unwrap();
        assert!(bad.to_matrix().is_err());
    }
}

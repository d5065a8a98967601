//! Constructive certificates for `a ≺ b`.
//!
//! A majorization is witnessed by a chain of T-transforms (two-coordinate
//! averaging steps), by the doubly stochastic matrix the chain multiplies out
//! to, by a Birkhoff mixture of permutations, or by a real orthogonal matrix
//! whose squared entries map `b↓` to `a↓`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{is_majorized, ProbVector, DEFAULT_MAJORIZATION_TOL};

/// Row/column sum tolerance for doubly stochastic matrices.
pub const DOUBLY_STOCHASTIC_TOL: f64 = 1e-9;
/// Entrywise tolerance for `UᵀU = I`.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Coordinates closer than this to their target are considered finalized.
const SETTLED: f64 = 1e-14;

/// The map `t·id + (1−t)·swap` acting on coordinates `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTransform {
    pub i: usize,
    pub j: usize,
    pub t: f64,
}

impl TTransform {
    pub fn new(i: usize, j: usize, t: f64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "T-transform needs two distinct coordinates, got ({i},{j})"
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "T-transform weight {t} outside [0,1]"
            )));
        }
        Ok(TTransform { i, j, t })
    }

    fn act(&self, v: &mut [f64]) {
        let (x, y) = (v[self.i], v[self.j]);
        v[self.i] = self.t * x + (1.0 - self.t) * y;
        v[self.j] = (1.0 - self.t) * x + self.t * y;
    }
}

/// Applies one T-transform to `v`.
pub fn apply_t_transform(step: &TTransform, v: &ProbVector) -> Result<ProbVector> {
    let dim = v.len();
    for index in [step.i, step.j] {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
    }
    let mut entries = v.entries().to_vec();
    step.act(&mut entries);
    Ok(ProbVector::from_trusted(entries, v.is_normalized()))
}

/// An ordered list of T-transforms on `dim` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferChain {
    pub dim: usize,
    pub steps: Vec<TTransform>,
}

impl TransferChain {
    pub fn new(dim: usize, steps: Vec<TTransform>) -> Result<Self> {
        for s in &steps {
            let s = TTransform::new(s.i, s.j, s.t)?;
            for index in [s.i, s.j] {
                if index >= dim {
                    return Err(Error::IndexOutOfRange { index, dim });
                }
            }
        }
        Ok(TransferChain { dim, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Applies the steps in order.
    pub fn apply(&self, v: &ProbVector) -> Result<ProbVector> {
        self.steps
            .iter()
            .try_fold(v.clone(), |acc, step| apply_t_transform(step, &acc))
    }
}

/// Builds a chain of at most `d − 1` T-transforms taking `b↓` to `a↓`.
///
/// Both vectors are zero-padded to a common length and sorted descending; the
/// chain acts on the sorted coordinates. Each step moves mass from the last
/// coordinate still above its target into the first later coordinate still
/// below its target, and pins one of them to its final value.
pub fn find_transfer_chain(a: &ProbVector, b: &ProbVector) -> Result<TransferChain> {
    let n = a.len().max(b.len());
    let target = a.padded(n).sort_desc().into_entries();
    let mut x = b.padded(n).sort_desc().into_entries();

    let verdict = is_majorized(a, b, DEFAULT_MAJORIZATION_TOL);
    if !verdict.holds {
        return Err(Error::MajorizationFailed(verdict));
    }

    let mut steps = Vec::new();
    while let Some(j) = (0..n).rev().find(|&j| x[j] - target[j] > SETTLED) {
        let Some(k) = (j + 1..n).find(|&k| target[k] - x[k] > SETTLED) else {
            break;
        };
        let surplus = x[j] - target[j];
        let deficit = target[k] - x[k];
        let delta = surplus.min(deficit);
        let gap = x[j] - x[k];
        let t = (1.0 - delta / gap).clamp(0.0, 1.0);
        steps.push(TTransform { i: j, j: k, t });

        let total = x[j] + x[k];
        if surplus <= deficit {
            x[j] = target[j];
            x[k] = total - target[j];
        } else {
            x[k] = target[k];
            x[j] = total - target[k];
        }
        if steps.len() >= n {
            // Cannot happen for exact input: every step pins a coordinate.
            break;
        }
    }
    Ok(TransferChain { dim: n, steps })
}

/// A square non-negative matrix with unit row and column sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealMatrixRepr", into = "RealMatrixRepr")]
pub struct DoublyStochasticMatrix(DMatrix<f64>);

impl DoublyStochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(m, DOUBLY_STOCHASTIC_TOL)
    }

    /// Validates row/column sums against `tol` instead of the default.
    pub fn with_tol(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_finite(&m)?;
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        if let Some(x) = m.iter().find(|&&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            return Err(Error::NotDoublyStochastic(format!(
                "entry {x} outside [0,1]"
            )));
        }
        let dev = stochastic_deviation(&m);
        if dev > tol {
            return Err(Error::NotDoublyStochastic(format!(
                "row/column sums deviate from 1 by {dev}"
            )));
        }
        Ok(DoublyStochasticMatrix(m))
    }

    pub fn identity(d: usize) -> Self {
        DoublyStochasticMatrix(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest deviation of any row or column sum from one.
    pub fn deviation(&self) -> f64 {
        stochastic_deviation(&self.0)
    }

    /// `Q·v`; `v` is zero-padded to the matrix dimension.
    pub fn apply(&self, v: &ProbVector) -> Result<ProbVector> {
        let d = self.dim();
        if v.len() > d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let v = v.padded(d);
        let out = &self.0 * nalgebra::DVector::from_column_slice(v.entries());
        Ok(ProbVector::from_trusted(
            out.iter().copied().collect(),
            v.is_normalized(),
        ))
    }
}

fn stochastic_deviation(m: &DMatrix<f64>) -> f64 {
    let rows = m.row_iter().map(|r| (r.sum() - 1.0).abs());
    let cols = m.column_iter().map(|c| (c.sum() - 1.0).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for (c, col) in m.column_iter().enumerate() {
        if let Some(r) = col.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: r, col: c });
        }
    }
    Ok(())
}

/// `{"d":n,"rows":[[...],...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct RealMatrixRepr {
    d: usize,
    rows: Vec<Vec<f64>>,
}

fn matrix_from_rows(d: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn matrix_to_repr(m: DMatrix<f64>) -> RealMatrixRepr {
    RealMatrixRepr {
        d: m.nrows(),
        rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
    }
}

impl TryFrom<RealMatrixRepr> for DoublyStochasticMatrix {
    type Error = Error;
    fn try_from(repr: RealMatrixRepr) -> Result<Self> {
        Self::new(matrix_from_rows(repr.d, &repr.rows)?)
    }
}

impl From<DoublyStochasticMatrix> for RealMatrixRepr {
    fn from(q: DoublyStochasticMatrix) -> Self {
        matrix_to_repr(q.0)
    }
}

/// Multiplies out a chain: `Q = T_m ⋯ T_1`.
pub fn chain_to_doubly_stochastic(chain: &TransferChain) -> DoublyStochasticMatrix {
    let d = chain.dim;
    let mut q = DMatrix::<f64>::identity(d, d);
    for step in &chain.steps {
        let (i, j, t) = (step.i, step.j, step.t);
        for c in 0..d {
            let (x, y) = (q[(i, c)], q[(j, c)]);
            q[(i, c)] = t * x + (1.0 - t) * y;
            q[(j, c)] = (1.0 - t) * x + t * y;
        }
    }
    DoublyStochasticMatrix(q)
}

/// One weighted permutation; `perm[row] = column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffTerm {
    pub weight: f64,
    pub perm: Vec<usize>,
}

/// `Q = Σ tᵢ P(πᵢ)` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BirkhoffDecomposition {
    pub terms: Vec<BirkhoffTerm>,
}

impl BirkhoffDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Σ tᵢ P(πᵢ) as a `d × d` matrix.
    pub fn reconstruct(&self, d: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(d, d);
        for term in &self.terms {
            for (row, &col) in term.perm.iter().enumerate() {
                m[(row, col)] += term.weight;
            }
        }
        m
    }

    /// Max-entry error against `q`.
    pub fn reconstruction_error(&self, q: &DoublyStochasticMatrix) -> f64 {
        (self.reconstruct(q.dim()) - q.matrix()).amax()
    }
}

/// Upper bound on the number of Birkhoff terms for a `d × d` matrix.
pub fn birkhoff_term_bound(d: usize) -> usize {
    let m = d.saturating_sub(1);
    m * m + 1
}

/// Greedy Birkhoff–von Neumann decomposition.
///
/// Each step takes the bottleneck perfect matching of the residual (the one
/// whose smallest entry is largest), subtracts that smallest entry along it,
/// and the loop stops once every residual row sum (hence every entry, and the
/// missing total weight) is below `tol`. Weights are
/// at least `tol` except in the tail, where entries below `tol` may still be
/// needed to keep the row and column sums balanced. Every step
/// zeroes an entry, so the residual moves to a strictly smaller face of the
/// Birkhoff polytope and at most `(d−1)² + 1` terms are produced. Choosing
/// the bottleneck keeps weights large and avoids stranding mass in entries
/// below `tol`.
pub fn birkhoff_decompose(q: &DoublyStochasticMatrix, tol: f64) -> Result<BirkhoffDecomposition> {
    let dev = q.deviation();
    if dev > tol.max(f64::EPSILON * q.dim() as f64) {
        return Err(Error::NotDoublyStochastic(format!(
            "row/column sums deviate from 1 by {dev}, above tolerance {tol}"
        )));
    }
    let d = q.dim();
    let mut residual = q.matrix().clone();
    let mut out = BirkhoffDecomposition::default();

    loop {
        let largest_row = residual.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
        if largest_row < tol {
            break;
        }
        // Products of near-identity T-transforms carry genuine structure below
        // `tol`; when the entries `≥ tol` no longer admit a perfect matching,
        // the tail is finished on the positive support.
        let perm = match bottleneck_matching(&residual, tol)
            .or_else(|| bottleneck_matching(&residual, f64::MIN_POSITIVE))
        {
            Some(perm) => perm,
            None => {
                return Err(Error::MatchingFailed {
                    residual: residual.sum() / d as f64,
                })
            }
        };
        let (argmin, weight) = perm
            .iter()
            .enumerate()
            .map(|(r, &c)| ((r, c), residual[(r, c)]))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("d >= 1");
        for (r, &c) in perm.iter().enumerate() {
            let v = residual[(r, c)] - weight;
            residual[(r, c)] = if v <= weight * 1e-12 { 0.0 } else { v };
        }
        residual[argmin] = 0.0;
        out.terms.push(BirkhoffTerm { weight, perm });
    }
    Ok(out)
}

/// The perfect matching maximizing its smallest entry, if that entry is at
/// least `floor`. Binary search over the distinct entry values.
fn bottleneck_matching(m: &DMatrix<f64>, floor: f64) -> Option<Vec<usize>> {
    let d = m.nrows();
    let mut levels: Vec<f64> = m.iter().copied().filter(|&x| x >= floor).collect();
    levels.sort_by(|x, y| x.total_cmp(y));
    levels.dedup();

    let mut matcher = Matcher::new(d);
    let mut best = None;
    let (mut lo, mut hi) = (0, levels.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        let threshold = levels[mid];
        if matcher.complete(|r, c| m[(r, c)] >= threshold) {
            best = Some(matcher.row_to_col());
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    best
}

/// Augmenting-path bipartite matching. The matching is kept between calls,
/// so tightening the edge set only repairs the rows that lost their edge.
struct Matcher {
    col_of_row: Vec<Option<usize>>,
    row_of_col: Vec<Option<usize>>,
}

impl Matcher {
    fn new(d: usize) -> Self {
        Matcher {
            col_of_row: vec![None; d],
            row_of_col: vec![None; d],
        }
    }

    /// Extends the matching to a perfect one over the edges accepted by
    /// `edge`; returns false when none exists.
    fn complete(&mut self, edge: impl Fn(usize, usize) -> bool) -> bool {
        let d = self.col_of_row.len();
        for r in 0..d {
            if let Some(c) = self.col_of_row[r] {
                if !edge(r, c) {
                    self.col_of_row[r] = None;
                    self.row_of_col[c] = None;
                }
            }
        }
        for r in 0..d {
            if self.col_of_row[r].is_none() {
                let mut seen = vec![false; d];
                if !self.augment(r, &edge, &mut seen) {
                    return false;
                }
            }
        }
        true
    }

    fn augment(
        &mut self,
        r: usize,
        edge: &impl Fn(usize, usize) -> bool,
        seen: &mut [bool],
    ) -> bool {
        for c in 0..seen.len() {
            if seen[c] || !edge(r, c) {
                continue;
            }
            seen[c] = true;
            let free = match self.row_of_col[c] {
                None => true,
                Some(other) => self.augment(other, edge, seen),
            };
            if free {
                self.col_of_row[r] = Some(c);
                self.row_of_col[c] = Some(r);
                return true;
            }
        }
        false
    }

    fn row_to_col(&self) -> Vec<usize> {
        self.col_of_row
            .iter()
            .map(|c| c.expect("perfect matching"))
            .collect()
    }
}

/// A real square matrix with `UᵀU = I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealMatrixRepr", into = "RealMatrixRepr")]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let deviation = orthogonality_deviation(&m);
        if deviation > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(OrthogonalMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

fn orthogonality_deviation(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

impl TryFrom<RealMatrixRepr> for OrthogonalMatrix {
    type Error = Error;
    fn try_from(repr: RealMatrixRepr) -> Result<Self> {
        Self::new(matrix_from_rows(repr.d, &repr.rows)?)
    }
}

impl From<OrthogonalMatrix> for RealMatrixRepr {
    fn from(u: OrthogonalMatrix) -> Self {
        matrix_to_repr(u.0)
    }
}

/// Builds an orthogonal `U` with `diag(U·diag(b↓)·Uᵀ) = a↓`.
///
/// Follows the transfer chain from `b↓` to `a↓` with one Givens rotation per
/// step. Each rotation angle is chosen so the rotated diagonal entry hits the
/// chain's next value; when the current off-diagonal entry in that plane is
/// zero this is the angle with `cos²θ = t`.
pub fn schur_horn_orthogonal(a: &ProbVector, b: &ProbVector) -> Result<OrthogonalMatrix> {
    let chain = find_transfer_chain(a, b)?;
    let n = chain.dim;
    let mut x = b.padded(n).sort_desc().into_entries();
    let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&x));
    let mut u = DMatrix::<f64>::identity(n, n);

    for step in &chain.steps {
        step.act(&mut x);
        let (i, j) = (step.i, step.j);
        let (c, s) = rotation_for_diagonal(m[(i, i)], m[(j, j)], m[(i, j)], x[i]);
        rotate_rows(&mut m, i, j, c, s);
        rotate_cols(&mut m, i, j, c, s);
        rotate_rows(&mut u, i, j, c, s);
    }
    // UᵀU is only as orthogonal as the accumulated rotations; check anyway.
    OrthogonalMatrix::new(u)
}

/// Angle for `G = [[c, −s], [s, c]]` in the plane `(i, j)` such that
/// `(G M Gᵀ)_ii = target`, where `M_ii = xi`, `M_jj = xj`, `M_ij = m`.
fn rotation_for_diagonal(xi: f64, xj: f64, m: f64, target: f64) -> (f64, f64) {
    // (GMGᵀ)_ii = mean + half·cos2θ − m·sin2θ
    let mean = 0.5 * (xi + xj);
    let half = 0.5 * (xi - xj);
    let radius = half.hypot(m);
    if radius < 1e-300 {
        return (1.0, 0.0);
    }
    let phase = (-m).atan2(half);
    let cos = ((target - mean) / radius).clamp(-1.0, 1.0);
    let two_theta = phase + cos.acos();
    let theta = 0.5 * two_theta;
    (theta.cos(), theta.sin())
}

fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let (x, y) = (m[(i, k)], m[(j, k)]);
        m[(i, k)] = c * x - s * y;
        m[(j, k)] = s * x + c * y;
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let (x, y) = (m[(k, i)], m[(k, j)]);
        m[(k, i)] = c * x - s * y;
        m[(k, j)] = s * x + c * y;
    }
}

/// `Q_ij = U_ij²`; doubly stochastic because the rows and columns of `U` are
/// unit vectors.
pub fn orthostochastic_of(u: &OrthogonalMatrix) -> Result<DoublyStochasticMatrix> {
    let deviation = orthogonality_deviation(&u.0);
    if deviation > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { deviation });
    }
    DoublyStochasticMatrix::new(u.0.map(|x| x * x))
}

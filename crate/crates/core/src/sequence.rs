//! Finite probability vectors, the majorization preorder, and Shannon entropy.
//!
//! Vectors of different lengths are compared after zero-padding, which leaves
//! both the preorder and the entropy unchanged.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries in `[-CLAMP_TOL, 0)` are clamped to zero on construction.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed drift of the total of a vector flagged as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Default absolute tolerance for prefix-sum comparisons.
pub const DEFAULT_MAJORIZATION_TOL: f64 = 1e-9;

/// Positive entries below this are treated as exact zeros by the entropy.
const LOG_FLOOR: f64 = 1e-300;

/// A finite sequence of non-negative reals, optionally flagged as summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbVectorRepr", into = "ProbVectorRepr")]
pub struct ProbVector {
    entries: Vec<f64>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
struct ProbVectorRepr {
    entries: Vec<f64>,
    #[serde(default)]
    normalized: bool,
}

impl TryFrom<ProbVectorRepr> for ProbVector {
    type Error = Error;

    fn try_from(repr: ProbVectorRepr) -> Result<Self> {
        ProbVector::with_flag(repr.entries, repr.normalized)
    }
}

impl From<ProbVector> for ProbVectorRepr {
    fn from(p: ProbVector) -> Self {
        ProbVectorRepr {
            entries: p.entries,
            normalized: p.normalized,
        }
    }
}

impl ProbVector {
    /// Builds an unnormalized vector of non-negative entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::with_flag(entries, false)
    }

    /// Builds a vector that must sum to one within [`NORMALIZATION_TOL`].
    pub fn normalized(entries: Vec<f64>) -> Result<Self> {
        Self::with_flag(entries, true)
    }

    pub fn with_flag(mut entries: Vec<f64>, normalized: bool) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        for (index, x) in entries.iter_mut().enumerate() {
            if !x.is_finite() || *x < -CLAMP_TOL {
                return Err(Error::InvalidEntry { index, value: *x });
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        if normalized {
            let sum: f64 = entries.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(ProbVector {
            entries,
            normalized,
        })
    }

    /// Uniform distribution on `d` outcomes.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty);
        }
        Self::normalized(vec![1.0 / d as f64; d])
    }

    /// Internal constructor for values already known to be valid.
    pub(crate) fn from_trusted(entries: Vec<f64>, normalized: bool) -> Self {
        debug_assert!(!entries.is_empty());
        let entries = entries.into_iter().map(|x| x.max(0.0)).collect();
        ProbVector {
            entries,
            normalized,
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Zero-pads to length `n` (no-op when already at least that long).
    pub fn padded(&self, n: usize) -> ProbVector {
        let mut entries = self.entries.clone();
        if entries.len() < n {
            entries.resize(n, 0.0);
        }
        ProbVector {
            entries,
            normalized: self.normalized,
        }
    }

    /// Non-increasing rearrangement. Ties keep their original relative order.
    pub fn sort_desc(&self) -> ProbVector {
        let mut entries = self.entries.clone();
        entries.sort_by(|x, y| y.total_cmp(x));
        ProbVector {
            entries,
            normalized: self.normalized,
        }
    }

    pub fn is_sorted_desc(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] >= w[1])
    }
}

/// The smallest prefix length `k` (1-based) at which `Σ a↓ > Σ b↓ + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixViolation {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of a majorization test `a ≺ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationVerdict {
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<PrefixViolation>,
    pub sums_equal: bool,
}

impl fmt::Display for MajorizationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.holds {
            return write!(f, "majorized");
        }
        match self.first_violation {
            Some(v) => write!(f, "prefix sum {} exceeds {} at k={}", v.lhs, v.rhs, v.k),
            None => write!(f, "totals differ"),
        }
    }
}

/// Tests `a ≺ b`: every descending prefix sum of `a` is at most that of `b`
/// (up to `tol`) and the totals agree within `tol`.
pub fn is_majorized(a: &ProbVector, b: &ProbVector, tol: f64) -> MajorizationVerdict {
    let n = a.len().max(b.len());
    let a = a.padded(n).sort_desc();
    let b = b.padded(n).sort_desc();

    let mut first_violation = None;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (k, (x, y)) in a.entries.iter().zip(&b.entries).enumerate() {
        lhs += x;
        rhs += y;
        if lhs > rhs + tol {
            first_violation = Some(PrefixViolation { k: k + 1, lhs, rhs });
            break;
        }
    }
    let sums_equal = (a.total() - b.total()).abs() <= tol;
    MajorizationVerdict {
        holds: first_violation.is_none() && sums_equal,
        first_violation,
        sums_equal,
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(p: &ProbVector) -> Result<f64> {
    if p.normalized {
        if let Some((index, &value)) = p
            .entries
            .iter()
            .enumerate()
            .find(|(_, &x)| x > 1.0 + NORMALIZATION_TOL)
        {
            return Err(Error::InvalidEntry { index, value });
        }
    }
    Ok(entropy_bits(&p.entries))
}

pub(crate) fn entropy_bits(entries: &[f64]) -> f64 {
    entries
        .iter()
        .filter(|&&x| x >= LOG_FLOOR)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Keeps the first `n` entries and lumps the remainder into one trailing entry.
pub fn tail_group(c: &ProbVector, n: usize) -> Result<ProbVector> {
    if n == 0 || n > c.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            dim: c.len(),
        });
    }
    let mut entries = c.entries[..n].to_vec();
    entries.push(c.entries[n..].iter().sum());
    Ok(ProbVector {
        entries,
        normalized: c.normalized,
    })
}

/// Samples `b` from the flat simplex and sets `a = Q b` for a random convex
/// mixture `Q` of permutation matrices, so that `a ≺ b`.
pub fn random_majorized_pair<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
) -> Result<(ProbVector, ProbVector)> {
    if d == 0 {
        return Err(Error::Empty);
    }
    if d == 1 {
        let one = ProbVector::normalized(vec![1.0])?;
        return Ok((one.clone(), one));
    }
    let b = random_simplex(d, rng);

    let terms = rng.random_range(1..=d + 1);
    let weights = random_simplex(terms, rng);
    let mut a = vec![0.0; d];
    let mut perm: Vec<usize> = (0..d).collect();
    for w in weights {
        perm.shuffle(rng);
        for (ai, &pi) in a.iter_mut().zip(&perm) {
            *ai += w * b[pi];
        }
    }
    Ok((ProbVector::normalized(a)?, ProbVector::normalized(b)?))
}

/// A flat-Dirichlet sample (normalized exponentials).
pub(crate) fn random_simplex<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(x: &[f64]) -> ProbVector {
        ProbVector::normalized(x.to_vec()).unwrap()
    }

    #[test]
    fn sort_examples() {
        assert_eq!(pv(&[0.2, 0.5, 0.3]).sort_desc().entries(), &[0.5, 0.3, 0.2]);
        assert_eq!(
            pv(&[0.25, 0.25, 0.5]).sort_desc().entries(),
            &[0.5, 0.25, 0.25]
        );
        assert_eq!(pv(&[1.0]).sort_desc().entries(), &[1.0]);
    }

    #[test]
    fn construction_clamps_and_rejects() {
        let p = ProbVector::new(vec![-5e-13, 0.5]).unwrap();
        assert_eq!(p.entries(), &[0.0, 0.5]);
        assert!(matches!(
            ProbVector::new(vec![-1e-6, 0.5]),
            Err(Error::InvalidEntry { index: 0, .. })
        ));
        assert!(matches!(ProbVector::new(vec![]), Err(Error::Empty)));
        assert!(matches!(
            ProbVector::normalized(vec![0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(ProbVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn majorization_examples() {
        let v = is_majorized(&pv(&[0.5, 0.5]), &pv(&[0.75, 0.25]), 1e-9);
        assert!(v.holds && v.sums_equal && v.first_violation.is_none());

        let x = pv(&[0.3, 0.3, 0.4]);
        assert!(is_majorized(&x, &x, 1e-9).holds);

        let v = is_majorized(&pv(&[0.6, 0.4]), &pv(&[0.5, 0.5]), 1e-9);
        assert!(!v.holds);
        assert!(v.sums_equal);
        let w = v.first_violation.unwrap();
        assert_eq!(w.k, 1);
        assert_eq!((w.lhs, w.rhs), (0.6, 0.5));
    }

    #[test]
    fn mismatched_totals_are_a_false_verdict() {
        let a = ProbVector::new(vec![0.2, 0.2]).unwrap();
        let b = ProbVector::new(vec![0.5, 0.5]).unwrap();
        let v = is_majorized(&a, &b, 1e-9);
        assert!(!v.holds);
        assert!(!v.sums_equal);
        assert!(v.first_violation.is_none());
    }

    #[test]
    fn zero_padding() {
        let a = pv(&[0.5, 0.5]);
        let b = pv(&[0.5, 0.25, 0.25]);
        assert!(is_majorized(&b, &a, 1e-9).holds);
        assert!(!is_majorized(&a, &b, 1e-9).holds);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&pv(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(shannon_entropy(&pv(&[0.5, 0.5])).unwrap(), 1.0);
        // 2 - (3/4) log2 3, rounded to f64.
        let h = shannon_entropy(&pv(&[0.75, 0.25])).unwrap();
        assert!((h - 0.811_278_124_459_132_8).abs() < 1e-15);
    }

    #[test]
    fn entropy_treats_subnormal_mass_as_zero() {
        let p = ProbVector::new(vec![1e-310, 0.5, 0.5]).unwrap();
        assert_eq!(shannon_entropy(&p).unwrap(), 1.0);
    }

    #[test]
    fn entropy_rejects_entries_above_one() {
        let p = ProbVector {
            entries: vec![1.5, -0.5],
            normalized: true,
        };
        assert!(matches!(
            shannon_entropy(&p),
            Err(Error::InvalidEntry { index: 0, .. })
        ));
    }

    #[test]
    fn tail_group_examples() {
        let c = pv(&[0.5, 0.25, 0.25]);
        assert_eq!(tail_group(&c, 1).unwrap().entries(), &[0.5, 0.5]);
        assert_eq!(
            tail_group(&c, 3).unwrap().entries(),
            &[0.5, 0.25, 0.25, 0.0]
        );
        assert!(tail_group(&c, 0).is_err());
        assert!(tail_group(&c, 4).is_err());
        let h_full = shannon_entropy(&c).unwrap();
        let h_grouped = shannon_entropy(&tail_group(&c, 1).unwrap()).unwrap();
        assert!((h_full - 1.5).abs() < 1e-15);
        assert!((h_grouped - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_pair_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = random_majorized_pair(1, &mut rng).unwrap();
        assert_eq!(a.entries(), &[1.0]);
        assert_eq!(b.entries(), &[1.0]);

        for _ in 0..200 {
            let (a, b) = random_majorized_pair(8, &mut rng).unwrap();
            assert!(is_majorized(&a, &b, 1e-9).holds);
        }

        let first = random_majorized_pair(4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let second = random_majorized_pair(4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(first, second);
        assert!(random_majorized_pair(0, &mut rng).is_err());
    }

    #[test]
    fn json_form() {
        let p: ProbVector = serde_json::from_str(r#"{"entries":[0.5,0.5]}"#).unwrap();
        assert!(!p.is_normalized());
        let s = serde_json::to_string(&pv(&[0.25, 0.75])).unwrap();
        assert_eq!(s, r#"{"entries":[0.25,0.75],"normalized":true}"#);
        assert!(
            serde_json::from_str::<ProbVector>(r#"{"entries":[0.5,0.4],"normalized":true}"#)
                .is_err()
        );
    }
}

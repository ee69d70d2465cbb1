//! Level bookkeeping and the elementary operator algebra on the
//! `2N - 1` dimensional space of a ground level plus `N - 1` doubly
//! degenerate excited levels.
//!
//! Basis order is fixed globally as `(1,1), (2,1), (2,2), (3,1), (3,2), ...`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;

/// Absolute tolerance for the Hermitian / skew-Hermitian flags.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Degeneracy of level `n` (1-based): the ground level is simple, every
/// excited level is doubly degenerate.
pub fn degeneracy(n: usize) -> usize {
    if n == 1 {
        1
    } else {
        2
    }
}

/// Hilbert space dimension for `levels` energy levels.
pub fn basis_dimension(levels: usize) -> Result<usize> {
    if levels < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    Ok(2 * levels - 1)
}

/// A state label `|n, k>` with `n` the level and `k` the sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LevelIndex {
    pub n: usize,
    pub k: usize,
}

impl LevelIndex {
    pub const fn new(n: usize, k: usize) -> Self {
        Self { n, k }
    }

    /// Checks the label against a system with `levels` levels.
    pub fn validate(self, levels: usize) -> Result<()> {
        if self.n == 0 || self.n > levels || self.k == 0 || self.k > degeneracy(self.n) {
            return Err(Error::Index(format!(
                "|{},{}> is not a state of a {levels}-level system",
                self.n, self.k
            )));
        }
        Ok(())
    }

    /// Position of this state in the flattened basis.
    pub fn flat(self) -> usize {
        if self.n == 1 {
            0
        } else {
            2 * (self.n - 2) + self.k
        }
    }

    /// Inverse of [`LevelIndex::flat`].
    pub fn from_flat(i: usize) -> Self {
        if i == 0 {
            Self::new(1, 1)
        } else {
            Self::new((i - 1) / 2 + 2, (i - 1) % 2 + 1)
        }
    }

    /// Strict level order used to orient the `x`, `y`, `h` operators.
    pub fn precedes(self, other: Self) -> bool {
        self.n < other.n || (self.n == other.n && self.k < other.k)
    }
}

impl fmt::Display for LevelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.n, self.k)
    }
}

/// All basis labels of an `levels`-level system in flattened order.
pub fn basis_labels(levels: usize) -> Vec<LevelIndex> {
    (1..=levels)
        .flat_map(|n| (1..=degeneracy(n)).map(move |k| LevelIndex::new(n, k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Hermitian,
    SkewHermitian,
    General,
}

/// Dense complex square matrix tagged with its (checked) symmetry class.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Matrix,
    kind: OperatorKind,
}

impl OperatorMatrix {
    /// Wraps `entries`, verifying the claimed symmetry class.
    pub fn new(entries: Matrix, kind: OperatorKind) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Contract(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let op = Self { entries, kind };
        let ok = match kind {
            OperatorKind::Hermitian => op.is_hermitian(HERMITICITY_TOL),
            OperatorKind::SkewHermitian => op.is_skew_hermitian(HERMITICITY_TOL),
            OperatorKind::General => true,
        };
        if !ok {
            return Err(Error::Contract(format!(
                "matrix is not {kind:?} within {HERMITICITY_TOL:e}"
            )));
        }
        Ok(op)
    }

    pub fn general(entries: Matrix) -> Self {
        Self {
            entries,
            kind: OperatorKind::General,
        }
    }

    pub fn zeros(dim: usize, kind: OperatorKind) -> Self {
        Self {
            entries: Matrix::zeros(dim, dim),
            kind,
        }
    }

    /// Builds a matrix whose construction guarantees `kind`; not re-checked.
    pub(crate) fn trusted(entries: Matrix, kind: OperatorKind) -> Self {
        debug_assert!(Self::new(entries.clone(), kind).is_ok());
        Self { entries, kind }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Largest entrywise deviation from `A = A^†`.
    pub fn hermitian_defect(&self) -> f64 {
        let a = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise deviation from `A = -A^†`.
    pub fn skew_hermitian_defect(&self) -> f64 {
        let a = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                worst = worst.max((a[(i, j)] + a[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn is_skew_hermitian(&self, tol: f64) -> bool {
        self.skew_hermitian_defect() <= tol
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiplies by `i`, turning Hermitian into skew-Hermitian and back.
    pub fn times_i(&self) -> Self {
        let kind = match self.kind {
            OperatorKind::Hermitian => OperatorKind::SkewHermitian,
            OperatorKind::SkewHermitian => OperatorKind::Hermitian,
            OperatorKind::General => OperatorKind::General,
        };
        Self {
            entries: self.entries.map(|z| z * Complex64::i()),
            kind,
        }
    }

    /// Real rescaling keeps the symmetry class.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.map(|z| z * factor),
            kind: self.kind,
        }
    }

    /// Real linear combination `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Result<Self> {
        check_dims(self, other)?;
        let kind = if self.kind == other.kind {
            self.kind
        } else {
            OperatorKind::General
        };
        Ok(Self {
            entries: &self.entries + other.entries.map(|z| z * factor),
            kind,
        })
    }

    /// Conjugation `P A P^T` by the permutation sending basis state `i` to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{d}"
            )));
        }
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                out[(perm[i], perm[j])] = self.entries[(i, j)];
            }
        }
        Ok(Self {
            entries: out,
            kind: self.kind,
        })
    }
}

fn check_dims(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

fn check_pair(a: LevelIndex, b: LevelIndex, levels: usize) -> Result<(usize, usize, usize)> {
    let dim = basis_dimension(levels)?;
    a.validate(levels)?;
    b.validate(levels)?;
    if !a.precedes(b) {
        return Err(Error::Index(format!("|{a}> must precede |{b}> in level order")));
    }
    Ok((dim, a.flat(), b.flat()))
}

/// `x_{a,b} = i(|a><b| + |b><a|)`.
pub fn make_x(a: LevelIndex, b: LevelIndex, levels: usize) -> Result<OperatorMatrix> {
    let (dim, i, j) = check_pair(a, b, levels)?;
    let mut m = Matrix::zeros(dim, dim);
    m[(i, j)] = Complex64::i();
    m[(j, i)] = Complex64::i();
    Ok(OperatorMatrix::trusted(m, OperatorKind::SkewHermitian))
}

/// `y_{a,b} = |a><b| - |b><a|`.
pub fn make_y(a: LevelIndex, b: LevelIndex, levels: usize) -> Result<OperatorMatrix> {
    let (dim, i, j) = check_pair(a, b, levels)?;
    let mut m = Matrix::zeros(dim, dim);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m[(j, i)] = Complex64::new(-1.0, 0.0);
    Ok(OperatorMatrix::trusted(m, OperatorKind::SkewHermitian))
}

/// `h_{a,b} = i(|a><a| - |b><b|)`.
pub fn make_h(a: LevelIndex, b: LevelIndex, levels: usize) -> Result<OperatorMatrix> {
    let (dim, i, j) = check_pair(a, b, levels)?;
    let mut m = Matrix::zeros(dim, dim);
    m[(i, i)] = Complex64::i();
    m[(j, j)] = -Complex64::i();
    Ok(OperatorMatrix::trusted(m, OperatorKind::SkewHermitian))
}

/// `[A, B] = AB - BA`. Skew-Hermitian inputs give a skew-Hermitian result.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_dims(a, b)?;
    let entries = &a.entries * &b.entries - &b.entries * &a.entries;
    let kind = match (a.kind, b.kind) {
        (OperatorKind::SkewHermitian, OperatorKind::SkewHermitian) => OperatorKind::SkewHermitian,
        (OperatorKind::Hermitian, OperatorKind::Hermitian) => OperatorKind::SkewHermitian,
        _ => OperatorKind::General,
    };
    Ok(OperatorMatrix { entries, kind })
}

/// `Re tr(A^† B)`.
pub fn frobenius_inner(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.entries
        .iter()
        .zip(b.entries.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum())
}

/// The full `x`, `y`, `h` family over every ordered pair of basis states.
/// It spans `su(2N - 1)` but is not linearly independent (the `h`'s are not).
pub fn su_spanning_set(levels: usize) -> Result<Vec<OperatorMatrix>> {
    let labels = basis_labels(levels);
    let mut out = Vec::new();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            out.push(make_x(a, b, levels)?);
            out.push(make_y(a, b, levels)?);
            out.push(make_h(a, b, levels)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const G: LevelIndex = LevelIndex::new(1, 1);
    const E21: LevelIndex = LevelIndex::new(2, 1);
    const E22: LevelIndex = LevelIndex::new(2, 2);
    const E31: LevelIndex = LevelIndex::new(3, 1);

    #[test]
    fn dimension() {
        assert_eq!(basis_dimension(2).unwrap(), 3);
        assert_eq!(basis_dimension(3).unwrap(), 5);
        assert_eq!(basis_dimension(10).unwrap(), 19);
        assert!(matches!(basis_dimension(1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn flattening_is_a_bijection() {
        let labels = basis_labels(6);
        assert_eq!(labels.len(), 11);
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(l.flat(), i);
            assert_eq!(LevelIndex::from_flat(i), *l);
        }
        assert_eq!(labels[..4], [G, E21, E22, E31]);
    }

    #[test]
    fn elementary_operators() {
        let x = make_x(G, E21, 2).unwrap();
        let y = make_y(G, E21, 2).unwrap();
        let h = make_h(G, E21, 2).unwrap();
        let mut ex = Matrix::zeros(3, 3);
        ex[(0, 1)] = c(0.0, 1.0);
        ex[(1, 0)] = c(0.0, 1.0);
        assert_eq!(x.entries(), &ex);
        assert_eq!(y.get(0, 1), c(1.0, 0.0));
        assert_eq!(y.get(1, 0), c(-1.0, 0.0));
        assert_eq!(h.entries(), &Matrix::from_diagonal(&nalgebra::dvector![c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]));
        for op in [&x, &y, &h] {
            assert_eq!(op.kind(), OperatorKind::SkewHermitian);
        }
    }

    #[test]
    fn bad_indices() {
        assert!(matches!(make_x(G, LevelIndex::new(3, 1), 2), Err(Error::Index(_))));
        assert!(matches!(make_x(G, LevelIndex::new(1, 2), 3), Err(Error::Index(_))));
        assert!(matches!(make_y(E21, G, 3), Err(Error::Index(_))));
        assert!(matches!(make_h(E21, E21, 3), Err(Error::Index(_))));
        // intra-level pairs are allowed
        assert!(make_x(E21, E22, 2).is_ok());
    }

    #[test]
    fn commutator_examples() {
        let x = make_x(G, E21, 2).unwrap();
        let y = make_y(G, E21, 2).unwrap();
        let zero = commutator(&x, &x).unwrap();
        assert_eq!(zero.frobenius_norm(), 0.0);
        let h = commutator(&x, &y).unwrap().scaled(-0.5);
        assert_eq!(h.entries(), make_h(G, E21, 2).unwrap().entries());
        assert_eq!(h.kind(), OperatorKind::SkewHermitian);

        let x3 = make_x(G, E21, 3).unwrap();
        let y3 = make_y(E21, E31, 3).unwrap();
        let got = commutator(&x3, &y3).unwrap();
        assert_eq!(got.entries(), make_x(G, E31, 3).unwrap().entries());
        assert!(got.is_skew_hermitian(HERMITICITY_TOL));
    }

    #[test]
    fn shape_errors() {
        let a = make_x(G, E21, 2).unwrap();
        let b = make_x(G, E21, 3).unwrap();
        assert!(matches!(commutator(&a, &b), Err(Error::Shape { left: 3, right: 5 })));
        assert!(matches!(frobenius_inner(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn inner_products() {
        let x = make_x(G, E21, 2).unwrap();
        let y = make_y(G, E21, 2).unwrap();
        let h = make_h(G, E21, 2).unwrap();
        assert_eq!(frobenius_inner(&x, &x).unwrap(), 2.0);
        assert_eq!(frobenius_inner(&x, &y).unwrap(), 0.0);
        assert_eq!(frobenius_inner(&h, &h).unwrap(), 2.0);
    }

    #[test]
    fn kind_is_checked() {
        let x = make_x(G, E21, 2).unwrap();
        assert!(OperatorMatrix::new(x.entries().clone(), OperatorKind::Hermitian).is_err());
        assert!(OperatorMatrix::new(x.times_i().into_entries(), OperatorKind::Hermitian).is_ok());
        assert!(OperatorMatrix::new(Matrix::zeros(2, 3), OperatorKind::General).is_err());
    }

    #[test]
    fn permutation_conjugation() {
        let x = make_x(G, E21, 2).unwrap();
        let p = x.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(2, 0), c(0.0, 1.0));
        assert_eq!(p.get(0, 2), c(0.0, 1.0));
        assert!(x.permuted(&[0, 0, 1]).is_err());
    }
}

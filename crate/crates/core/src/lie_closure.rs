//! Numerical closure of the dynamical Lie algebra.
//!
//! Skew-Hermitian `d x d` matrices are treated as vectors in a real
//! `2d^2`-dimensional space with the Frobenius inner product `Re tr(A^† B)`.
//! Starting from the (normalized) generators, commutators are formed
//! breadth-first, orthogonalized against the current basis by modified
//! Gram-Schmidt, and admitted when the relative residual exceeds the
//! tolerance. The process stops at a fixpoint or when the basis reaches
//! `dim su(d) = d^2 - 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::hamiltonians::{build_h0, build_hi, traceless_part, SystemSpec};
use crate::hilbert::{Matrix, OperatorKind, OperatorMatrix};

/// Default relative admission tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Relative residual below which a candidate gets a second Gram-Schmidt pass.
const REORTHOGONALIZE_BELOW: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ClosureResult {
    pub dimension: usize,
    pub controllable: bool,
    /// Orthonormal under the Frobenius inner product.
    pub basis: Vec<OperatorMatrix>,
    pub rounds: usize,
    pub tolerance: f64,
    /// `d^2 - 1` for the Hilbert dimension `d`.
    pub target_dimension: usize,
    /// Basis size after the generator pass and after each round.
    pub growth: Vec<usize>,
}

/// The part of a [`ClosureResult`] that goes into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureSummary {
    pub dimension: usize,
    pub target_dimension: usize,
    pub controllable: bool,
    pub rounds: usize,
    pub tolerance: f64,
}

impl ClosureResult {
    pub fn summary(&self) -> ClosureSummary {
        ClosureSummary {
            dimension: self.dimension,
            target_dimension: self.target_dimension,
            controllable: self.controllable,
            rounds: self.rounds,
            tolerance: self.tolerance,
        }
    }

    /// Largest norm of `[b_i, b_j]` left over after projecting onto the basis.
    /// A closed algebra gives roundoff-level values.
    pub fn closure_residual(&self) -> f64 {
        let space = OrthoBasis::from_operators(&self.basis);
        let n = self.basis.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                let c = commute(self.basis[i].entries(), self.basis[j].entries());
                let mut v = vectorize(&c);
                space.project_out(&mut v);
                worst = worst.max(norm(&v));
            }
        }
        worst
    }
}

fn vectorize(m: &Matrix) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn devectorize(v: &[f64], dim: usize) -> Matrix {
    Matrix::from_iterator(
        dim,
        dim,
        v.chunks_exact(2).map(|c| num_complex::Complex64::new(c[0], c[1])),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn commute(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

/// Orthonormal vectors kept alongside their matrix forms.
struct OrthoBasis {
    vectors: Vec<Vec<f64>>,
    matrices: Vec<Matrix>,
}

impl OrthoBasis {
    fn new() -> Self {
        Self {
            vectors: Vec::new(),
            matrices: Vec::new(),
        }
    }

    fn from_operators(ops: &[OperatorMatrix]) -> Self {
        Self {
            vectors: ops.iter().map(|o| vectorize(o.entries())).collect(),
            matrices: ops.iter().map(|o| o.entries().clone()).collect(),
        }
    }

    fn len(&self) -> usize {
        self.vectors.len()
    }

    fn project_out(&self, v: &mut [f64]) {
        for b in &self.vectors {
            let c = dot(b, v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }

    /// Orthogonalizes `candidate` against the basis and admits it when the
    /// relative residual exceeds `tol`. Returns whether it was admitted.
    fn admit(&mut self, candidate: &Matrix, tol: f64) -> bool {
        let mut v = vectorize(candidate);
        let scale = norm(&v);
        // Basis elements have unit norm, so commutators of magnitude <= tol
        // are indistinguishable from exact zeros.
        if scale <= tol {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= scale);
        self.project_out(&mut v);
        let mut residual = norm(&v);
        if residual < REORTHOGONALIZE_BELOW {
            self.project_out(&mut v);
            residual = norm(&v);
        }
        if residual <= tol {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= residual);
        let dim = candidate.nrows();
        self.matrices.push(devectorize(&v, dim));
        self.vectors.push(v);
        true
    }
}

/// Computes the real Lie algebra generated by skew-Hermitian, traceless
/// `generators` under commutation.
pub fn close_algebra(generators: &[OperatorMatrix], tolerance: f64) -> Result<ClosureResult> {
    close_algebra_with(generators, tolerance, Execution::default())
}

/// [`close_algebra`] with an explicit schedule for the commutator batches.
/// Admission always happens in index order, so the result does not depend on
/// `exec`.
pub fn close_algebra_with(
    generators: &[OperatorMatrix],
    tolerance: f64,
    exec: Execution,
) -> Result<ClosureResult> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "closure tolerance must be positive, got {tolerance}"
        )));
    }
    let first = generators
        .first()
        .ok_or_else(|| Error::Contract("closure needs at least one generator".into()))?;
    let dim = first.dim();
    for g in generators {
        if g.dim() != dim {
            return Err(Error::Shape {
                left: dim,
                right: g.dim(),
            });
        }
        let scale = g.frobenius_norm().max(1.0);
        if !g.is_skew_hermitian(1e-12 * scale) {
            return Err(Error::Contract("closure generators must be skew-Hermitian".into()));
        }
        if g.trace().norm() > 1e-12 * scale * dim as f64 {
            return Err(Error::Contract(format!(
                "closure generators must be traceless (trace {})",
                g.trace()
            )));
        }
    }

    let target = dim * dim - 1;
    let mut space = OrthoBasis::new();
    for g in generators {
        if space.len() == target {
            break;
        }
        space.admit(g.entries(), tolerance);
    }

    let mut growth = vec![space.len()];
    let mut rounds = 0;
    let mut frontier = 0;
    while frontier < space.len() && space.len() < target {
        rounds += 1;
        let end = space.len();
        for i in frontier..end {
            if space.len() == target {
                break;
            }
            let candidates = {
                let mats = &space.matrices;
                map_indexed(exec, i, |j| commute(&mats[i], &mats[j]))
            };
            for c in &candidates {
                space.admit(c, tolerance);
                if space.len() == target {
                    break;
                }
            }
        }
        frontier = end;
        growth.push(space.len());
    }

    let dimension = space.len();
    let basis = space
        .matrices
        .into_iter()
        .map(|m| OperatorMatrix::trusted(m, OperatorKind::SkewHermitian))
        .collect();
    Ok(ClosureResult {
        dimension,
        controllable: dimension == target,
        basis,
        rounds,
        tolerance,
        target_dimension: target,
        growth,
    })
}

/// The closure generators for a spec: `i * traceless(H0)` and `i * HI`.
pub fn drift_and_control_generators(spec: &SystemSpec) -> Result<[OperatorMatrix; 2]> {
    let drift = traceless_part(&build_h0(spec)?).times_i();
    let control = build_hi(spec)?.times_i();
    Ok([drift, control])
}

pub fn is_completely_controllable(spec: &SystemSpec, tolerance: f64) -> Result<ClosureResult> {
    is_completely_controllable_with(spec, tolerance, Execution::default())
}

pub fn is_completely_controllable_with(
    spec: &SystemSpec,
    tolerance: f64,
    exec: Execution,
) -> Result<ClosureResult> {
    close_algebra_with(&drift_and_control_generators(spec)?, tolerance, exec)
}

//! Equal-gap regime: the `K^2`, `nu`, `b` parameters, the symmetric
//! recursion blocks `G_i`, their spectra, and the Vandermonde-type
//! distinctness condition built on them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_lemma1, distinct, nonzero, ConditionId, ConditionReport, RELATIVE_MARGIN};
use crate::error::{Error, Result};
use crate::hamiltonians::{energy_gaps, SystemSpec, TransitionTable};
use crate::hilbert::{basis_labels, degeneracy, LevelIndex};
use crate::linalg::symmetric_eigen;

/// One diagonalized recursion block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBlock {
    /// Block number `i` (1-based).
    pub level: usize,
    /// `G_i`, row-major.
    pub g: Vec<Vec<f64>>,
    /// Eigenvalues in ascending order.
    pub lambdas: Vec<f64>,
    /// Rows are the eigenvectors, so `U G U^T = diag(lambdas)`.
    pub u: Vec<Vec<f64>>,
    /// Couplings of this block in the `G_i` ordering.
    pub couplings: Vec<f64>,
    /// `C = U d`.
    pub transformed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualGapParameters {
    /// `K^2_{ij,ij}` per basis state in flattened order.
    pub k2: Vec<f64>,
    /// `nu_{ij,i+1k}`, flattened in the same order as the dipoles.
    pub nu: Vec<f64>,
    /// `b_0 = 0, b_1, ..., b_{N-1}`.
    pub b: Vec<f64>,
    pub blocks: Vec<EigenBlock>,
}

impl EqualGapParameters {
    /// Every eigenvalue, block by block.
    pub fn all_lambdas(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.lambdas.iter().copied()).collect()
    }
}

/// All gaps coincide within the relative margin.
pub fn gaps_are_equal(gaps: &[f64]) -> bool {
    gaps.iter().all(|&g| !distinct(g, gaps[0]))
}

fn k_squared(d: &TransitionTable, level: LevelIndex) -> f64 {
    let n_levels = d.levels();
    let (i, j) = (level.n, level.k);
    if i == 1 {
        d.get(1, 1, 1).powi(2) + d.get(1, 1, 2).powi(2)
    } else {
        let up: f64 = if i < n_levels {
            (1..=2).map(|a| d.get(i, j, a).powi(2)).sum()
        } else {
            0.0
        };
        let down: f64 = (1..=degeneracy(i - 1)).map(|g| d.get(i - 1, g, j).powi(2)).sum();
        up - down
    }
}

fn b_parameter(d: &TransitionTable, i: usize) -> f64 {
    let n_levels = d.levels();
    if i == 0 {
        return 0.0;
    }
    let within = if i == 1 {
        d.get(1, 1, 1) * d.get(1, 1, 2)
    } else {
        d.get(i, 1, 1) * d.get(i, 1, 2) + d.get(i, 2, 1) * d.get(i, 2, 2)
    };
    let next = if i + 1 < n_levels {
        d.get(i + 1, 1, 1) * d.get(i + 1, 2, 1) + d.get(i + 1, 1, 2) * d.get(i + 1, 2, 2)
    } else {
        0.0
    };
    within - next
}

fn diagonalize(level: usize, g: DMatrix<f64>, couplings: Vec<f64>) -> Result<EigenBlock> {
    let n = g.nrows();
    let (lambdas, vectors) = symmetric_eigen(&g)?;
    let mut u = DMatrix::<f64>::zeros(n, n);
    for row in 0..n {
        let v = vectors.column(row);
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            u[(row, k)] = sign * v[k];
        }
    }
    let transformed = (&u * DVector::from_vec(couplings.clone())).iter().copied().collect();
    Ok(EigenBlock {
        level,
        g: rows(&g),
        lambdas,
        u: rows(&u),
        couplings,
        transformed,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Computes `K^2`, `nu`, `b`, assembles and diagonalizes every `G_i`.
pub fn equal_gap_parameters(spec: &SystemSpec) -> Result<EqualGapParameters> {
    let d = spec.dipole_table()?;
    let levels = spec.levels;
    if levels < 3 {
        return Err(Error::Precondition(format!(
            "equal-gap parameters need N >= 3, got N = {levels}"
        )));
    }
    let gaps = energy_gaps(spec)?;
    if !gaps_are_equal(&gaps) {
        return Err(Error::Precondition(format!("energy gaps are not equal: {gaps:?}")));
    }

    let labels = basis_labels(levels);
    let k2: Vec<f64> = labels.iter().map(|&l| k_squared(&d, l)).collect();
    let k2_of = |n: usize, k: usize| k2[LevelIndex::new(n, k).flat()];
    let mut nu_table = TransitionTable::zeros(levels);
    for (lower, upper, _) in d.iter() {
        let value = k2_of(upper.n, upper.k) - k2_of(lower.n, lower.k);
        nu_table.set(lower.n, lower.k, upper.k, value)?;
    }
    let nu: Vec<f64> = nu_table.iter().map(|(_, _, v)| v).collect();
    let b: Vec<f64> = (0..levels).map(|i| b_parameter(&d, i)).collect();

    let mut blocks = Vec::with_capacity(levels - 1);
    let g1 = DMatrix::from_row_slice(
        2,
        2,
        &[nu_table.get(1, 1, 1), -b[1], -b[1], nu_table.get(1, 1, 2)],
    );
    blocks.push(diagonalize(1, g1, vec![d.get(1, 1, 1), d.get(1, 1, 2)])?);
    for i in 2..levels {
        let nu_at = |j, k| nu_table.get(i, j, k);
        #[rustfmt::skip]
        let gi = DMatrix::from_row_slice(4, 4, &[
            nu_at(1, 1), -b[i],       b[i - 1],    0.0,
            -b[i],       nu_at(1, 2), 0.0,         b[i - 1],
            b[i - 1],    0.0,         nu_at(2, 1), -b[i],
            0.0,         b[i - 1],    -b[i],       nu_at(2, 2),
        ]);
        let couplings = vec![d.get(i, 1, 1), d.get(i, 1, 2), d.get(i, 2, 1), d.get(i, 2, 2)];
        blocks.push(diagonalize(i, gi, couplings)?);
    }

    Ok(EqualGapParameters { k2, nu, b, blocks })
}

/// Equal-gap sufficient condition: Lemma 1, nonzero and distinct first-block
/// eigenvalues with nonzero first-block transformed couplings, and global
/// distinctness of every nonzero eigenvalue.
pub fn check_theorem2(spec: &SystemSpec) -> Result<ConditionReport> {
    spec.validate()?;
    if spec.levels < 3 {
        return Ok(ConditionReport::inapplicable(ConditionId::Theorem2, super::N2_NOTE));
    }
    let params = equal_gap_parameters(spec)?;
    let mut report = ConditionReport::new(ConditionId::Theorem2);

    let lemma = check_lemma1(spec)?;
    if !lemma.pass {
        report.notes.push("Lemma 1 coupling determinant condition fails".into());
    }

    let lambdas = params.all_lambdas();
    let lambda_scale = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let first = &params.blocks[0];
    let (l11, l12) = (first.lambdas[0], first.lambdas[1]);
    let (c1121, c1122) = (first.transformed[0], first.transformed[1]);
    let c_scale = first.couplings.iter().map(|c| c * c).sum::<f64>().sqrt();
    let lambda_ok = nonzero(l11, lambda_scale) && nonzero(l12, lambda_scale) && distinct(l11, l12);
    let c_ok = nonzero(c1121, c_scale) && nonzero(c1122, c_scale);
    if !lambda_ok {
        report
            .notes
            .push("first-block eigenvalues must be nonzero and distinct".into());
    }
    if !c_ok {
        report
            .notes
            .push("first-block transformed couplings must be nonzero".into());
    }

    let margin = RELATIVE_MARGIN * lambda_scale;
    let live: Vec<f64> = lambdas.iter().copied().filter(|l| l.abs() > margin).collect();
    let mut distinct_ok = true;
    for (a, &x) in live.iter().enumerate() {
        for &y in &live[a + 1..] {
            if (x - y).abs() <= margin {
                distinct_ok = false;
                report
                    .notes
                    .push(format!("nonzero eigenvalues coincide: {x} and {y}"));
            }
        }
    }

    for block in &params.blocks[1..] {
        let scale = block.couplings.iter().map(|c| c * c).sum::<f64>().sqrt();
        for (m, c) in block.transformed.iter().enumerate() {
            if !nonzero(*c, scale) {
                report.notes.push(format!(
                    "transformed coupling {} of block G_{} vanishes",
                    m + 1,
                    block.level
                ));
            }
        }
    }

    report.witness("lambdas", lambdas);
    report.witness("lambda_11", l11);
    report.witness("lambda_12", l12);
    report.witness("C_11_21", c1121);
    report.witness("C_11_22", c1122);
    report.witness(
        "C_all",
        params
            .blocks
            .iter()
            .flat_map(|b| b.transformed.iter().copied())
            .collect::<Vec<_>>(),
    );
    report.witness("lemma1", lemma.pass);
    report.witness("first_block_condition", lambda_ok && c_ok);
    report.witness("distinct_condition", distinct_ok);
    report.pass = lemma.pass && lambda_ok && c_ok && distinct_ok;
    Ok(report)
}

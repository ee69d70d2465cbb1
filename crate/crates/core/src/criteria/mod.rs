//! Sufficient conditions for complete controllability, and the conditions
//! under which a weak static field removes the degeneracy.
//!
//! Every inequality is exact in real arithmetic; in floating point two
//! quantities count as different only when they differ by more than
//! [`RELATIVE_MARGIN`] times the larger magnitude of the terms compared.
//! These checkers are sufficient, never necessary: a failing report says
//! nothing about controllability.

mod elimination;
mod equal_gap;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::hamiltonians::{energy_gaps, SystemSpec};

pub use elimination::{check_elimination, EliminationReport, SplitLevel};
pub use equal_gap::{check_theorem2, equal_gap_parameters, gaps_are_equal, EigenBlock, EqualGapParameters};

/// Relative margin applied to every exact (in)equality.
pub const RELATIVE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    Lemma1,
    Theorem1,
    Theorem2,
    ElimNoCrossing,
    ElimGapDistinct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    Flag(bool),
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
    Text(String),
}

impl From<f64> for Witness {
    fn from(v: f64) -> Self {
        Witness::Scalar(v)
    }
}

impl From<bool> for Witness {
    fn from(v: bool) -> Self {
        Witness::Flag(v)
    }
}

impl From<Vec<f64>> for Witness {
    fn from(v: Vec<f64>) -> Self {
        Witness::Vector(v)
    }
}

impl From<Vec<Vec<f64>>> for Witness {
    fn from(v: Vec<Vec<f64>>) -> Self {
        Witness::Matrix(v)
    }
}

impl From<String> for Witness {
    fn from(v: String) -> Self {
        Witness::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub applicable: bool,
    pub pass: bool,
    pub witnesses: BTreeMap<String, Witness>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(condition_id: ConditionId) -> Self {
        Self {
            condition_id,
            applicable: true,
            pass: false,
            witnesses: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn inapplicable(condition_id: ConditionId, note: impl Into<String>) -> Self {
        Self {
            applicable: false,
            notes: vec![note.into()],
            ..Self::new(condition_id)
        }
    }

    fn witness(&mut self, name: impl Into<String>, value: impl Into<Witness>) {
        self.witnesses.insert(name.into(), value.into());
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.witnesses.get(name) {
            Some(Witness::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn vector(&self, name: &str) -> Option<&[f64]> {
        match self.witnesses.get(name) {
            Some(Witness::Vector(v)) => Some(v),
            _ => None,
        }
    }
}

/// `a != b` beyond the relative margin.
pub fn distinct(a: f64, b: f64) -> bool {
    (a - b).abs() > RELATIVE_MARGIN * a.abs().max(b.abs())
}

/// `x != 0` relative to the magnitude `scale` of the quantities it came from.
pub fn nonzero(x: f64, scale: f64) -> bool {
    x.abs() > RELATIVE_MARGIN * scale.abs()
}

const N2_NOTE: &str = "inapplicable for N = 2: the two-level degenerate system is never completely controllable";

/// Coupling determinants `d_{n1,n+11} d_{n2,n+12} - d_{n1,n+12} d_{n2,n+11}`
/// must be nonzero for every `2 <= n <= N-1`.
pub fn check_lemma1(spec: &SystemSpec) -> Result<ConditionReport> {
    let d = spec.dipole_table()?;
    let levels = spec.levels;
    if levels < 3 {
        return Ok(ConditionReport::inapplicable(ConditionId::Lemma1, N2_NOTE));
    }
    let mut report = ConditionReport::new(ConditionId::Lemma1);
    let mut dets = Vec::new();
    let mut all = true;
    for n in 2..levels {
        let diag = d.get(n, 1, 1) * d.get(n, 2, 2);
        let anti = d.get(n, 1, 2) * d.get(n, 2, 1);
        dets.push(diag - anti);
        if !distinct(diag, anti) {
            all = false;
            report
                .notes
                .push(format!("coupling determinant vanishes at n = {n}"));
        }
    }
    report.witness("determinants", dets);
    report.pass = all;
    Ok(report)
}

/// Distinct first gap plus the first/second band coupling inequality, with
/// Lemma 1 closing the argument.
pub fn check_theorem1(spec: &SystemSpec) -> Result<ConditionReport> {
    let d = spec.dipole_table()?;
    if spec.levels < 3 {
        return Ok(ConditionReport::inapplicable(ConditionId::Theorem1, N2_NOTE));
    }
    let mut report = ConditionReport::new(ConditionId::Theorem1);
    let gaps = energy_gaps(spec)?;
    let mut gap_ok = true;
    for (i, &mu) in gaps.iter().enumerate().skip(1) {
        if !distinct(gaps[0], mu) {
            gap_ok = false;
            report
                .notes
                .push(format!("first gap equals gap mu_{}", i + 1));
        }
    }

    let (d1121, d1122) = (d.get(1, 1, 1), d.get(1, 1, 2));
    let p = d1121 * d.get(2, 1, 1) + d1122 * d.get(2, 2, 1);
    let q = d1121 * d.get(2, 1, 2) + d1122 * d.get(2, 2, 2);
    let lhs = d1121 * (p * d.get(2, 2, 1) + q * d.get(2, 2, 2));
    let rhs = d1122 * (p * d.get(2, 1, 1) + q * d.get(2, 1, 2));
    let coupling_ok = distinct(lhs, rhs);
    if !coupling_ok {
        report
            .notes
            .push("coupling inequality fails: both sides are equal".into());
    }

    let lemma = check_lemma1(spec)?;
    if !lemma.pass {
        report.notes.push("Lemma 1 coupling determinant condition fails".into());
    }

    report.witness("p", p);
    report.witness("q", q);
    report.witness("lhs", lhs);
    report.witness("rhs", rhs);
    report.witness("gaps", gaps);
    report.witness("gap_condition", gap_ok);
    report.witness("coupling_condition", coupling_ok);
    report.witness("lemma1", lemma.pass);
    report.pass = gap_ok && coupling_ok && lemma.pass;
    Ok(report)
}

/// Every applicable checker, in a fixed order. Theorem 2 is reported as
/// inapplicable outside the equal-gap regime.
pub fn all_reports(spec: &SystemSpec) -> Result<Vec<ConditionReport>> {
    let mut out = vec![check_lemma1(spec)?, check_theorem1(spec)?];
    if spec.levels >= 3 && !gaps_are_equal(&energy_gaps(spec)?) {
        out.push(ConditionReport::inapplicable(
            ConditionId::Theorem2,
            "inapplicable: energy gaps are not all equal",
        ));
    } else {
        out.push(check_theorem2(spec)?);
    }
    Ok(out)
}

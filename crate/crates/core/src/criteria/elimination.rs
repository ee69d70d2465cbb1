//! Degeneracy removal by a weak static field, to first order.
//!
//! Only the intra-level couplings `g_{n1,n2}` shift energies at first order:
//! level `n` splits into `E_n - Gamma_n` and `E_n + Gamma_n` with
//! `Gamma_n = |g_{n1,n2}|`; the ground level is unshifted.

use serde::Serialize;

use super::{distinct, ConditionId, ConditionReport, RELATIVE_MARGIN};
use crate::error::Result;
use crate::hamiltonians::SystemSpec;
use crate::hilbert::LevelIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitLevel {
    pub n: usize,
    pub k: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationReport {
    pub pass: bool,
    /// `Gamma_n` for `n = 2..=N`, in eV.
    pub splittings: Vec<f64>,
    pub split_spectrum: Vec<SplitLevel>,
    pub no_crossing: ConditionReport,
    pub gap_distinct: ConditionReport,
    pub notes: Vec<String>,
}

/// First-order split spectrum in basis order.
fn split_spectrum(energies: &[f64], gamma: &[f64]) -> Vec<SplitLevel> {
    let mut out = vec![SplitLevel {
        n: 1,
        k: 1,
        energy: energies[0],
    }];
    for n in 2..=energies.len() {
        let g = gamma[n - 2];
        out.push(SplitLevel { n, k: 1, energy: energies[n - 1] - g });
        out.push(SplitLevel { n, k: 2, energy: energies[n - 1] + g });
    }
    out
}

/// Checks that the split levels do not cross and that the first split gap
/// differs from every intra-level gap `2 Gamma_n` and every inter-level gap
/// `(E_n - Gamma_n) - (E_{n-1} + Gamma_{n-1})`.
pub fn check_elimination(spec: &SystemSpec) -> Result<EliminationReport> {
    let intra = spec.intra_ev()?;
    let levels = spec.levels;
    let e = &spec.energies;
    let gamma: Vec<f64> = (2..=levels).map(|n| intra[n].abs()).collect();
    let spectrum = split_spectrum(e, &gamma);
    let at = |n: usize, k: usize| spectrum[LevelIndex::new(n, k).flat()].energy;
    let mut notes = Vec::new();

    let zero: Vec<usize> = (2..=levels).filter(|&n| gamma[n - 2] == 0.0).collect();
    if !zero.is_empty() {
        notes.push(format!("splitting is zero for levels {zero:?}; degeneracy not lifted"));
    }

    let mut crossing = ConditionReport::new(ConditionId::ElimNoCrossing);
    let mut offending = Vec::new();
    // (2,1) above the ground level, then (n+1,1) above (n,2).
    let mut pairs = vec![((1, 1), (2, 1))];
    pairs.extend((2..levels).map(|n| ((n, 2), (n + 1, 1))));
    for ((ln, lk), (un, uk)) in pairs {
        let (lower, upper) = (at(ln, lk), at(un, uk));
        let margin = RELATIVE_MARGIN * lower.abs().max(upper.abs());
        if upper - lower <= margin {
            crossing.notes.push(format!(
                "E_({un},{uk}) = {upper} does not lie above E_({ln},{lk}) = {lower}"
            ));
            offending.push(vec![ln as f64, lk as f64, un as f64, uk as f64]);
        }
    }
    crossing.pass = offending.is_empty();
    crossing.witness("offending_pairs", offending);

    let mut gapcheck = ConditionReport::new(ConditionId::ElimGapDistinct);
    let first_gap = at(2, 1) - e[0];
    let intra_gaps: Vec<f64> = gamma.iter().map(|g| 2.0 * g).collect();
    let inter_gaps: Vec<f64> = (3..=levels).map(|n| at(n, 1) - at(n - 1, 2)).collect();
    let mut clashes = Vec::new();
    for (i, &g) in intra_gaps.iter().enumerate() {
        if !distinct(first_gap, g) {
            clashes.push(format!("first gap equals 2*Gamma_{}", i + 2));
        }
    }
    for (i, &g) in inter_gaps.iter().enumerate() {
        if !distinct(first_gap, g) {
            clashes.push(format!("first gap equals the gap below level {}", i + 3));
        }
    }
    gapcheck.pass = clashes.is_empty();
    gapcheck.notes = clashes;
    gapcheck.notes.push(format!(
        "comparison index runs over levels 2..={levels} (the printed range 2..2N-1 exceeds the level count)"
    ));
    gapcheck.witness("first_gap", first_gap);
    gapcheck.witness("intra_gaps", intra_gaps);
    gapcheck.witness("inter_gaps", inter_gaps);

    Ok(EliminationReport {
        pass: zero.is_empty() && crossing.pass && gapcheck.pass,
        splittings: gamma,
        split_spectrum: spectrum,
        no_crossing: crossing,
        gap_distinct: gapcheck,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_detected() {
        let spec = SystemSpec::new(vec![0.0, 1.0, 1.05]).with_intra(2, 0.1).with_intra(3, 0.01);
        let r = check_elimination(&spec).unwrap();
        assert!(!r.pass);
        assert!(!r.no_crossing.pass);
        assert_eq!(
            r.no_crossing.witnesses["offending_pairs"],
            super::super::Witness::Matrix(vec![vec![2.0, 2.0, 3.0, 1.0]])
        );
        let e: Vec<f64> = r.split_spectrum.iter().map(|l| l.energy).collect();
        assert!((e[2] - 1.1).abs() < 1e-15 && (e[3] - 1.04).abs() < 1e-15);
    }

    #[test]
    fn small_splitting_passes() {
        let spec = SystemSpec::new(vec![0.0, 1.0]).with_intra(2, -0.001);
        let r = check_elimination(&spec).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.split_spectrum[1].energy, 0.999);
        assert_eq!(r.split_spectrum[2].energy, 1.001);
        assert_eq!(r.gap_distinct.scalar("first_gap"), Some(0.999));
        assert_eq!(r.gap_distinct.vector("intra_gaps").unwrap(), [0.002]);
    }

    #[test]
    fn zero_splitting_fails() {
        let spec = SystemSpec::new(vec![0.0, 1.0, 2.0]);
        let r = check_elimination(&spec).unwrap();
        assert!(!r.pass);
        assert!(r.notes[0].contains("splitting is zero"));
    }

    #[test]
    fn first_gap_clash() {
        // first gap 1 - 0.25 = 0.75, gap below level 3: (2.0 - 0.25) - (1 + 0.25) = 0.5
        let ok = SystemSpec::new(vec![0.0, 1.0, 2.0]).with_intra(2, 0.25).with_intra(3, 0.25);
        assert!(check_elimination(&ok).unwrap().pass);
        // 2 * Gamma_3 = 0.75 matches the first gap
        let clash = SystemSpec::new(vec![0.0, 1.0, 2.0]).with_intra(2, 0.25).with_intra(3, 0.375);
        let r = check_elimination(&clash).unwrap();
        assert!(!r.gap_distinct.pass);
        assert!(r.no_crossing.pass);
    }

    #[test]
    fn joule_couplings_are_converted() {
        let spec = SystemSpec::new(vec![0.0, 1.0])
            .with_intra(2, 1e-22)
            .with_coupling_unit(crate::hamiltonians::CouplingUnit::Joule);
        let r = check_elimination(&spec).unwrap();
        assert!((r.splittings[0] - 6.241509074460763e-4).abs() < 1e-15);
    }
}

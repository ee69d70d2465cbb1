//! System description and the drift (`H0`), excitation (`He`) and dipole
//! control (`HI`) Hamiltonians built from it.
//!
//! Energies and excitation couplings are in eV (excitation couplings may be
//! stored in joules and are converted on access); dipole weights are
//! dimensionless and multiply a control field measured in eV.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{basis_dimension, degeneracy, LevelIndex, Matrix, OperatorKind, OperatorMatrix};

/// Reduced Planck constant in eV s.
pub const HBAR_EV_S: f64 = 6.582119569e-16;
/// Joules per electron-volt.
pub const JOULE_PER_EV: f64 = 1.602176634e-19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CouplingUnit {
    #[default]
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "J")]
    Joule,
}

impl CouplingUnit {
    pub fn to_ev(self, value: f64) -> f64 {
        match self {
            CouplingUnit::ElectronVolt => value,
            CouplingUnit::Joule => value / JOULE_PER_EV,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CouplingUnit::ElectronVolt => "eV",
            CouplingUnit::Joule => "J",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub coupling: CouplingUnit,
}

/// Coupling between `|n,k>` and `|n+1,p>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionCoupling {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub value: f64,
}

/// Coupling between the two sublevels `|n,1>` and `|n,2>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntraCoupling {
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "N")]
    pub levels: usize,
    pub energies: Vec<f64>,
    #[serde(default)]
    pub dipoles: Vec<TransitionCoupling>,
    #[serde(default)]
    pub excitation_inter: Vec<TransitionCoupling>,
    #[serde(default)]
    pub excitation_intra: Vec<IntraCoupling>,
    pub units: Units,
}

/// Dense table of adjacent-level couplings `c_{nk,n+1p}`; absent entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    levels: usize,
    // [n - 1][k - 1][p - 1]
    data: Vec<[[f64; 2]; 2]>,
}

impl TransitionTable {
    pub fn zeros(levels: usize) -> Self {
        Self {
            levels,
            data: vec![[[0.0; 2]; 2]; levels.saturating_sub(1)],
        }
    }

    fn in_range(&self, n: usize, k: usize, p: usize) -> bool {
        n >= 1 && n < self.levels && k >= 1 && k <= degeneracy(n) && (1..=2).contains(&p)
    }

    /// `c_{nk,n+1p}`, or 0 for labels that do not exist.
    pub fn get(&self, n: usize, k: usize, p: usize) -> f64 {
        if self.in_range(n, k, p) {
            self.data[n - 1][k - 1][p - 1]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, n: usize, k: usize, p: usize, value: f64) -> Result<()> {
        if !self.in_range(n, k, p) {
            return Err(Error::Index(format!(
                "coupling ({n}{k},{}{p}) does not exist for N={}",
                n + 1,
                self.levels
            )));
        }
        self.data[n - 1][k - 1][p - 1] = value;
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Iterates `(lower, upper, value)` over every admissible index triple.
    pub fn iter(&self) -> impl Iterator<Item = (LevelIndex, LevelIndex, f64)> + '_ {
        (1..self.levels).flat_map(move |n| {
            (1..=degeneracy(n)).flat_map(move |k| {
                (1..=2).map(move |p| {
                    (LevelIndex::new(n, k), LevelIndex::new(n + 1, p), self.get(n, k, p))
                })
            })
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for block in &mut out.data {
            for row in block.iter_mut() {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.iter().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
    }
}

impl SystemSpec {
    /// A spec with the given energies and no couplings.
    pub fn new(energies: Vec<f64>) -> Self {
        Self {
            levels: energies.len(),
            energies,
            dipoles: Vec::new(),
            excitation_inter: Vec::new(),
            excitation_intra: Vec::new(),
            units: Units::default(),
        }
    }

    pub fn with_dipole(mut self, n: usize, k: usize, p: usize, value: f64) -> Self {
        self.dipoles.push(TransitionCoupling { n, k, p, value });
        self
    }

    pub fn with_excitation(mut self, n: usize, k: usize, p: usize, value: f64) -> Self {
        self.excitation_inter.push(TransitionCoupling { n, k, p, value });
        self
    }

    pub fn with_intra(mut self, n: usize, value: f64) -> Self {
        self.excitation_intra.push(IntraCoupling { n, value });
        self
    }

    pub fn with_coupling_unit(mut self, unit: CouplingUnit) -> Self {
        self.units.coupling = unit;
        self
    }

    /// Fills every dipole from a table (entries equal to zero are omitted).
    pub fn with_dipole_table(mut self, table: &TransitionTable) -> Self {
        self.dipoles = table
            .iter()
            .filter(|(_, _, v)| *v != 0.0)
            .map(|(a, b, value)| TransitionCoupling {
                n: a.n,
                k: a.k,
                p: b.k,
                value,
            })
            .collect();
        self
    }

    /// Equally spaced levels `E_n = n - 1/2` with dipoles
    /// `d_{ij,i+1k} = sqrt(N + 3 - i - j - k)`.
    pub fn equal_gap_example(levels: usize) -> Result<Self> {
        basis_dimension(levels)?;
        let energies = (1..=levels).map(|n| n as f64 - 0.5).collect();
        let mut spec = Self::new(energies);
        for i in 1..levels {
            for j in 1..=degeneracy(i) {
                for k in 1..=2 {
                    let arg = (levels + 3) as f64 - (i + j + k) as f64;
                    spec.dipoles.push(TransitionCoupling {
                        n: i,
                        k: j,
                        p: k,
                        value: arg.sqrt(),
                    });
                }
            }
        }
        Ok(spec)
    }

    pub fn dimension(&self) -> usize {
        2 * self.levels - 1
    }

    pub fn validate(&self) -> Result<()> {
        basis_dimension(self.levels)?;
        if self.energies.len() != self.levels {
            return Err(Error::InvalidSpec(format!(
                "N={} but {} energies given",
                self.levels,
                self.energies.len()
            )));
        }
        if let Some(e) = self.energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite energy {e}")));
        }
        for (i, w) in self.energies.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidSpec(format!(
                    "energies must be strictly increasing: E_{} = {} >= E_{} = {}",
                    i + 1,
                    w[0],
                    i + 2,
                    w[1]
                )));
            }
        }
        self.transition_table(&self.dipoles, "dipoles")?;
        self.transition_table(&self.excitation_inter, "excitation_inter")?;
        let mut seen = vec![false; self.levels + 1];
        for c in &self.excitation_intra {
            if c.n < 2 || c.n > self.levels {
                return Err(Error::InvalidSpec(format!(
                    "excitation_intra level {} outside 2..={}",
                    c.n, self.levels
                )));
            }
            if !c.value.is_finite() {
                return Err(Error::InvalidSpec(format!("non-finite excitation_intra at n={}", c.n)));
            }
            if std::mem::replace(&mut seen[c.n], true) {
                return Err(Error::InvalidSpec(format!("duplicate excitation_intra for n={}", c.n)));
            }
        }
        Ok(())
    }

    fn transition_table(&self, entries: &[TransitionCoupling], field: &str) -> Result<TransitionTable> {
        let mut table = TransitionTable::zeros(self.levels);
        let mut seen = TransitionTable::zeros(self.levels);
        for c in entries {
            if !c.value.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "{field}: non-finite value at ({}{},{}{})",
                    c.n,
                    c.k,
                    c.n + 1,
                    c.p
                )));
            }
            table
                .set(c.n, c.k, c.p, c.value)
                .map_err(|e| Error::InvalidSpec(format!("{field}: {e}")))?;
            if seen.get(c.n, c.k, c.p) != 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "{field}: duplicate entry ({}{},{}{})",
                    c.n,
                    c.k,
                    c.n + 1,
                    c.p
                )));
            }
            seen.set(c.n, c.k, c.p, 1.0)?;
        }
        Ok(table)
    }

    /// Dipole weights `d_{nk,n+1p}`.
    pub fn dipole_table(&self) -> Result<TransitionTable> {
        self.validate()?;
        self.transition_table(&self.dipoles, "dipoles")
    }

    /// Inter-level excitation couplings `g_{nk,n+1p}` in eV.
    pub fn excitation_table_ev(&self) -> Result<TransitionTable> {
        self.validate()?;
        let raw = self.transition_table(&self.excitation_inter, "excitation_inter")?;
        Ok(raw.scaled(self.units.coupling.to_ev(1.0)))
    }

    /// Intra-level couplings `g_{n1,n2}` in eV, indexed by level `n`
    /// (entries 0 and 1 are always zero).
    pub fn intra_ev(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut out = vec![0.0; self.levels + 1];
        for c in &self.excitation_intra {
            out[c.n] = self.units.coupling.to_ev(c.value);
        }
        Ok(out)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

fn real_symmetric(dim: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> OperatorMatrix {
    let mut m = Matrix::zeros(dim, dim);
    for (i, j, v) in entries {
        m[(i, j)] = Complex64::new(v, 0.0);
        m[(j, i)] = Complex64::new(v, 0.0);
    }
    OperatorMatrix::trusted(m, OperatorKind::Hermitian)
}

/// Diagonal drift Hamiltonian, `E_n` on every sublevel of level `n`.
pub fn build_h0(spec: &SystemSpec) -> Result<OperatorMatrix> {
    spec.validate()?;
    let dim = spec.dimension();
    let diag = (0..dim).map(|i| {
        let n = LevelIndex::from_flat(i).n;
        (i, i, spec.energies[n - 1])
    });
    Ok(real_symmetric(dim, diag))
}

/// Dipole interaction Hamiltonian (adjacent levels only).
pub fn build_hi(spec: &SystemSpec) -> Result<OperatorMatrix> {
    let table = spec.dipole_table()?;
    Ok(real_symmetric(
        spec.dimension(),
        table.iter().map(|(a, b, v)| (a.flat(), b.flat(), v)),
    ))
}

/// Excitation Hamiltonian in eV: inter-level plus intra-level couplings.
pub fn build_he(spec: &SystemSpec) -> Result<OperatorMatrix> {
    let inter = spec.excitation_table_ev()?;
    let intra = spec.intra_ev()?;
    let entries = inter
        .iter()
        .map(|(a, b, v)| (a.flat(), b.flat(), v))
        .chain((2..=spec.levels).map(|n| {
            (
                LevelIndex::new(n, 1).flat(),
                LevelIndex::new(n, 2).flat(),
                intra[n],
            )
        }));
    Ok(real_symmetric(spec.dimension(), entries))
}

/// Gaps `mu_i = E_{i+1} - E_i`.
pub fn energy_gaps(spec: &SystemSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec.energies.windows(2).map(|w| w[1] - w[0]).collect())
}

/// `H - tr(H)/d * I`.
pub fn traceless_part(op: &OperatorMatrix) -> OperatorMatrix {
    let dim = op.dim();
    let shift = op.trace() / dim as f64;
    let mut m = op.entries().clone();
    for i in 0..dim {
        m[(i, i)] -= shift;
    }
    // A real multiple of the identity is Hermitian; an imaginary one skew.
    let kind = match op.kind() {
        OperatorKind::Hermitian if shift.im == 0.0 => OperatorKind::Hermitian,
        OperatorKind::SkewHermitian if shift.re == 0.0 => OperatorKind::SkewHermitian,
        OperatorKind::General => OperatorKind::General,
        _ => OperatorKind::General,
    };
    OperatorMatrix::trusted(m, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::make_x;

    fn diag_of(op: &OperatorMatrix) -> Vec<f64> {
        (0..op.dim()).map(|i| op.get(i, i).re).collect()
    }

    #[test]
    fn drift() {
        let h = build_h0(&SystemSpec::new(vec![0.0, 1.0])).unwrap();
        assert_eq!(diag_of(&h), [0.0, 1.0, 1.0]);
        assert_eq!(h.kind(), OperatorKind::Hermitian);
        let h = build_h0(&SystemSpec::new(vec![0.5, 1.5, 2.5])).unwrap();
        assert_eq!(diag_of(&h), [0.5, 1.5, 1.5, 2.5, 2.5]);
        assert!(matches!(
            build_h0(&SystemSpec::new(vec![1.0, 0.0])),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn dipole_two_level() {
        let (d1, d2) = (0.3, -1.7);
        let spec = SystemSpec::new(vec![0.0, 1.0])
            .with_dipole(1, 1, 1, d1)
            .with_dipole(1, 1, 2, d2);
        let ih = build_hi(&spec).unwrap().times_i();
        let g = LevelIndex::new(1, 1);
        let expect = make_x(g, LevelIndex::new(2, 1), 2)
            .unwrap()
            .scaled(d1)
            .add_scaled(&make_x(g, LevelIndex::new(2, 2), 2).unwrap(), d2)
            .unwrap();
        assert_eq!(ih.entries(), expect.entries());
        let zero = build_hi(&SystemSpec::new(vec![0.0, 1.0])).unwrap();
        assert_eq!(zero.frobenius_norm(), 0.0);
    }

    #[test]
    fn explicit_example_dipoles() {
        let spec = SystemSpec::equal_gap_example(3).unwrap();
        let d = spec.dipole_table().unwrap();
        assert_eq!(d.get(1, 1, 1), 3f64.sqrt());
        assert_eq!(d.get(1, 1, 2), 2f64.sqrt());
        assert_eq!(d.get(2, 1, 1), 2f64.sqrt());
        assert_eq!(d.get(2, 1, 2), 1.0);
        assert_eq!(d.get(2, 2, 1), 1.0);
        assert_eq!(d.get(2, 2, 2), 0.0);
        let h = build_hi(&spec).unwrap();
        assert_eq!(h.get(0, 1).re, 3f64.sqrt());
        assert_eq!(h.get(2, 3).re, 1.0);
        assert_eq!(h.get(3, 2).re, 1.0);
        assert_eq!(h.get(1, 2).re, 0.0);
        assert!(h.is_hermitian(0.0));
        // N=4 first block starts at sqrt(4)
        let d4 = SystemSpec::equal_gap_example(4).unwrap().dipole_table().unwrap();
        assert_eq!(d4.get(1, 1, 1), 2.0);
        assert_eq!(d4.get(3, 2, 2), 0.0);
    }

    #[test]
    fn excitation() {
        let spec = SystemSpec::new(vec![0.0, 1.0]).with_intra(2, 0.1);
        let he = build_he(&spec).unwrap();
        assert_eq!(he.get(1, 2).re, 0.1);
        assert_eq!(he.get(2, 1).re, 0.1);
        assert!((he.frobenius_norm() - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(build_he(&SystemSpec::new(vec![0.0, 1.0])).unwrap().frobenius_norm(), 0.0);

        let joules = SystemSpec::new(vec![0.0, 1.0])
            .with_excitation(1, 1, 1, 1e-22)
            .with_excitation(1, 1, 2, 1e-22)
            .with_coupling_unit(CouplingUnit::Joule);
        let he = build_he(&joules).unwrap();
        let expected = 1e-22 / 1.602176634e-19;
        assert!((he.get(0, 1).re - expected).abs() < 1e-18);
        assert!((he.get(0, 2).re - 6.2415e-4).abs() < 1e-8);
    }

    #[test]
    fn gaps() {
        let g = |e: Vec<f64>| energy_gaps(&SystemSpec::new(e)).unwrap();
        assert_eq!(g(vec![0.5, 1.5, 2.5]), [1.0, 1.0]);
        assert_eq!(g(vec![0.0, 1.0, 2.5]), [1.0, 1.5]);
        assert_eq!(g(vec![0.0, 1.0]), [1.0]);
    }

    #[test]
    fn traceless() {
        let h = build_h0(&SystemSpec::new(vec![0.0, 1.0])).unwrap();
        let t = traceless_part(&h);
        let want = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, b) in diag_of(&t).iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(t.trace().norm() < 1e-12);
        let twice = traceless_part(&t);
        assert!((twice.entries() - t.entries()).norm() < 1e-15);
        let id = OperatorMatrix::new(Matrix::identity(4, 4), OperatorKind::Hermitian).unwrap();
        assert_eq!(traceless_part(&id).frobenius_norm(), 0.0);
    }

    #[test]
    fn validation() {
        let ok = SystemSpec::new(vec![0.0, 1.0, 2.0]);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_dipole(1, 2, 1, 1.0).validate().is_err());
        assert!(ok.clone().with_dipole(3, 1, 1, 1.0).validate().is_err());
        assert!(ok.clone().with_dipole(2, 1, 3, 1.0).validate().is_err());
        assert!(ok.clone().with_dipole(2, 1, 1, 1.0).with_dipole(2, 1, 1, 2.0).validate().is_err());
        assert!(ok.clone().with_intra(1, 0.1).validate().is_err());
        assert!(ok.clone().with_intra(3, 0.1).with_intra(3, 0.2).validate().is_err());
        let mut bad = ok.clone();
        bad.levels = 4;
        assert!(bad.validate().is_err());
        assert!(SystemSpec::new(vec![0.0]).validate().is_err());
        assert!(SystemSpec::new(vec![0.0, f64::NAN]).validate().is_err());
    }

    #[test]
    fn json_schema() {
        let text = r#"{"N":2,"energies":[0,1],"dipoles":[{"n":1,"k":1,"p":2,"value":0.5}],
            "excitation_intra":[{"n":2,"value":1e-22}],"units":{"coupling":"J"}}"#;
        let spec = SystemSpec::from_json_str(text).unwrap();
        assert_eq!(spec.units.coupling, CouplingUnit::Joule);
        assert_eq!(spec.dipole_table().unwrap().get(1, 1, 2), 0.5);
        assert!(SystemSpec::from_json_str(r#"{"N":2,"energies":[0,1],"units":{"coupling":"eV"},"extra":1}"#).is_err());
        assert!(SystemSpec::from_json_str(r#"{"N":2,"energies":[0,1]}"#).is_err());
        assert!(SystemSpec::from_json_str(r#"{"N":2,"energies":[0,1],"units":{"coupling":"Hz"}}"#).is_err());
        assert!(matches!(
            SystemSpec::from_json_str(r#"{"N":2,"energies":[1,0],"units":{"coupling":"eV"}}"#),
            Err(Error::InvalidSpec(_))
        ));
    }
}

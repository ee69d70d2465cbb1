//! Time evolution: relaxation of the degeneracy-lifting field after the
//! target is reached, and piecewise-constant control with the dipole field.
//!
//! Energies are in eV, times in seconds, `hbar` in eV s.

mod control;
mod relaxation;

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{CouplingUnit, SystemSpec};
use crate::hilbert::LevelIndex;

pub use control::{
    evolve_piecewise, fidelity_gradient, optimize_pulse, schedule_fidelity, OptimizerSettings,
};
pub use relaxation::{
    default_max_step, first_order_coefficients, fidelity_exact, fidelity_perturbative,
    integrate_relaxation, sweep_tau, CoefficientVariant, ExactFidelity, SweepOptions,
};

/// Allowed deviation of a state norm from 1.
pub const NORM_TOL: f64 = 1e-10;

/// Excitation couplings (J) of the four reference relaxation curves.
pub const REFERENCE_COUPLINGS_J: [f64; 4] = [1e-23, 1e-22, 1e-21, 1e-20];

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    /// `[re, im]` pairs in basis order.
    amplitudes: Vec<[f64; 2]>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = l2(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = l2(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numeric(format!("cannot normalize a state of norm {norm}")));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// `|n,k>` in a `levels`-level system.
    pub fn basis_state(levels: usize, label: LevelIndex) -> Result<Self> {
        label.validate(levels)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 2 * levels - 1];
        amplitudes[label.flat()] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// Haar-random state of dimension `dim`.
    pub fn random<R: Rng>(dim: usize, rng: &mut R) -> Result<Self> {
        let amps = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(amps)
    }

    pub(crate) fn from_unchecked(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: LevelIndex) -> Complex64 {
        self.amplitudes
            .get(label.flat())
            .copied()
            .unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(text)?;
        Self::new(
            file.amplitudes
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = StateFile {
            amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub(crate) fn check_dim(&self, spec: &SystemSpec) -> Result<()> {
        if self.dim() != spec.dimension() {
            return Err(Error::Shape {
                left: spec.dimension(),
                right: self.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|<target|psi>|^2 / <psi|psi>` for a normalized target.
pub(crate) fn normalized_overlap(target: &[Complex64], psi: &[Complex64]) -> Result<f64> {
    let norm_sq = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(norm_sq > 0.0 && norm_sq.is_finite()) {
        return Err(Error::Numeric(format!("state has norm^2 {norm_sq}")));
    }
    Ok(inner(target, psi).norm_sqr() / norm_sq)
}

/// 17 significant digits.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Two-level system with a doubly degenerate excited level 1 eV above the
/// ground level, coupled to the excitation field by `g_{11,21} = g_{11,22}
/// = g_joules`, prepared in `(1/sqrt 2, 1/2, 1/2)`.
pub fn relaxation_benchmark(g_joules: f64) -> (SystemSpec, StateVector) {
    let spec = SystemSpec::new(vec![0.0, 1.0])
        .with_excitation(1, 1, 1, g_joules)
        .with_excitation(1, 1, 2, g_joules)
        .with_coupling_unit(CouplingUnit::Joule);
    let state = StateVector::from_unchecked(vec![
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
    ]);
    (spec, state)
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo <= hi and count >= 1, got {lo}:{hi}:{count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelitySample {
    pub tau: f64,
    pub perturbative: f64,
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityCurve {
    pub samples: Vec<FidelitySample>,
}

impl FidelityCurve {
    /// CSV with `#`-prefixed metadata lines, then `tau,F_pert,F_exact`.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        let mut out = String::new();
        for line in metadata {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("tau,F_pert,F_exact\n");
        for s in &self.samples {
            let exact = s.exact.map(fmt_float).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", fmt_float(s.tau), fmt_float(s.perturbative), exact);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    /// Seconds.
    pub dt: f64,
    /// Control field in eV.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub duration: f64,
    pub segments: Vec<PulseSegment>,
    pub achieved_fidelity: f64,
}

impl PulseSchedule {
    /// Equal-length segments covering `duration`.
    pub fn uniform(duration: f64, amplitudes: &[f64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one segment".into()));
        }
        let dt = duration / amplitudes.len() as f64;
        let schedule = Self {
            duration,
            segments: amplitudes
                .iter()
                .map(|&amplitude| PulseSegment { dt, amplitude })
                .collect(),
            achieved_fidelity: 0.0,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "schedule duration must be positive, got {}",
                self.duration
            )));
        }
        if let Some(s) = self
            .segments
            .iter()
            .find(|s| !(s.dt > 0.0 && s.dt.is_finite() && s.amplitude.is_finite()))
        {
            return Err(Error::InvalidArgument(format!("bad segment {s:?}")));
        }
        let total: f64 = self.segments.iter().map(|s| s.dt).sum();
        if (total - self.duration).abs() > 1e-12 * self.duration {
            return Err(Error::InvalidArgument(format!(
                "segments sum to {total} s but duration is {} s",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.amplitude).collect()
    }

    /// CSV `t_start,dt,amplitude` with `#` metadata lines.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        let mut out = String::new();
        for line in metadata {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("t_start,dt,amplitude\n");
        let mut t = 0.0;
        for s in &self.segments {
            let _ = writeln!(out, "{},{},{}", fmt_float(t), fmt_float(s.dt), fmt_float(s.amplitude));
            t += s.dt;
        }
        out
    }
}

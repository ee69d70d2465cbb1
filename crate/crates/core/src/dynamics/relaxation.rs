//! Fidelity cost of switching off the static excitation field.
//!
//! After the target `|psi(T)>` is reached the field decays as
//! `H(t) = H0 + exp(-(t - T)/tau) He`. The state at the half-decay time
//! `T_e = T + tau ln 2` is estimated to first order in `He` and, as an
//! independent check, by direct RK4 integration.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{normalized_overlap, FidelityCurve, FidelitySample, StateVector};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::hamiltonians::{build_h0, build_he, SystemSpec, HBAR_EV_S};
use crate::hilbert::{degeneracy, LevelIndex};

/// Which amplitude the inter-level terms of the first-order correction use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientVariant {
    /// `C_{m-1,k}` / `C_{m+1,k}` inside the sums over `p`, as printed.
    /// A sublevel index that does not exist on the neighbouring level
    /// contributes nothing.
    #[default]
    Printed,
    /// `C_{m-1,p}` / `C_{m+1,p}`, the standard first-order result.
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactFidelity {
    pub fidelity: f64,
    pub steps: usize,
    pub note: Option<String>,
}

/// Largest RK4 step used when none is given: 0.02 rad of phase per step at
/// the widest energy scale of `H0 + He`.
pub fn default_max_step(spec: &SystemSpec) -> Result<f64> {
    let he = build_he(spec)?;
    let e = &spec.energies;
    let span = (e[e.len() - 1] - e[0]).abs() + he.frobenius_norm();
    Ok(0.02 * HBAR_EV_S / span)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relaxation time must be >= 0, got {tau}"
        )));
    }
    Ok(())
}

/// First-order amplitude corrections `C^(1)_{mk}(T_e)` in basis order.
pub fn first_order_coefficients(
    spec: &SystemSpec,
    state: &StateVector,
    tau: f64,
    variant: CoefficientVariant,
) -> Result<Vec<Complex64>> {
    check_tau(tau)?;
    state.check_dim(spec)?;
    let dim = spec.dimension();
    let zero = Complex64::new(0.0, 0.0);
    if tau == 0.0 {
        return Ok(vec![zero; dim]);
    }
    let he = build_he(spec)?;
    let levels = spec.levels;
    let energy = |m: usize| spec.energies[m - 1];
    let g = |a: LevelIndex, b: LevelIndex| he.get(a.flat(), b.flat()).re;
    let amp = |n: usize, k: usize| {
        if k <= degeneracy(n) {
            state.amplitude(LevelIndex::new(n, k))
        } else {
            zero
        }
    };
    // 1/(E_m - E_n + i hbar/tau) * (1 - exp(i w_mn tau ln2)/2)
    let propagator = |m: usize, n: usize| {
        let de = energy(m) - energy(n);
        let denom = Complex64::new(de, HBAR_EV_S / tau);
        let phase = Complex64::from_polar(1.0, de / HBAR_EV_S * tau * LN_2);
        (Complex64::new(1.0, 0.0) - 0.5 * phase) / denom
    };
    let same_level = Complex64::new(0.0, -tau / (2.0 * HBAR_EV_S));

    let mut out = vec![zero; dim];
    for m in 1..=levels {
        for k in 1..=degeneracy(m) {
            let here = LevelIndex::new(m, k);
            let mut c = zero;
            for n in [m.wrapping_sub(1), m + 1] {
                if n == 0 || n > levels {
                    continue;
                }
                let factor = propagator(m, n);
                for p in 1..=degeneracy(n) {
                    let a = match variant {
                        CoefficientVariant::Printed => amp(n, k),
                        CoefficientVariant::Corrected => amp(n, p),
                    };
                    c += factor * a * g(here, LevelIndex::new(n, p));
                }
            }
            for p in 1..=degeneracy(m) {
                c += same_level * amp(m, p) * g(here, LevelIndex::new(m, p));
            }
            out[here.flat()] = c;
        }
    }
    Ok(out)
}

/// `|<psi(T)|psi_I(T_e)>|^2 / <psi_I|psi_I>` with the first-order state.
pub fn fidelity_perturbative(
    spec: &SystemSpec,
    state: &StateVector,
    tau: f64,
    variant: CoefficientVariant,
) -> Result<f64> {
    let c1 = first_order_coefficients(spec, state, tau, variant)?;
    let psi: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .zip(&c1)
        .map(|(a, b)| a + b)
        .collect();
    normalized_overlap(state.amplitudes(), &psi)
}

fn apply(h: &DMatrix<f64>, scale: f64, psi: &[Complex64], out: &mut [Complex64]) {
    let n = psi.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += psi[j] * h[(i, j)];
        }
        // -i/hbar * H psi
        out[i] = Complex64::new(acc.im, -acc.re) * scale;
    }
}

/// Integrates from `T` to `T + tau ln 2` with exactly `steps` RK4 steps and
/// returns the interaction-picture fidelity against the initial state.
pub fn integrate_relaxation(spec: &SystemSpec, state: &StateVector, tau: f64, steps: usize) -> Result<f64> {
    check_tau(tau)?;
    state.check_dim(spec)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one integration step".into()));
    }
    let h0 = build_h0(spec)?.entries().map(|z| z.re);
    let he = build_he(spec)?.entries().map(|z| z.re);
    let span = tau * LN_2;
    let h = span / steps as f64;
    let n = state.dim();
    let inv_hbar = 1.0 / HBAR_EV_S;

    let hamiltonian = |s: f64| &h0 + &he * (-s / tau).exp();
    let mut psi = state.amplitudes().to_vec();
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let (mut k1, mut k2, mut k3, mut k4) = (tmp.clone(), tmp.clone(), tmp.clone(), tmp.clone());
    for step in 0..steps {
        let s = step as f64 * h;
        let h_start = hamiltonian(s);
        let h_mid = hamiltonian(s + 0.5 * h);
        let h_end = hamiltonian(s + h);
        apply(&h_start, inv_hbar, &psi, &mut k1);
        for i in 0..n {
            tmp[i] = psi[i] + k1[i] * (0.5 * h);
        }
        apply(&h_mid, inv_hbar, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = psi[i] + k2[i] * (0.5 * h);
        }
        apply(&h_mid, inv_hbar, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = psi[i] + k3[i] * h;
        }
        apply(&h_end, inv_hbar, &tmp, &mut k4);
        for i in 0..n {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    // Undo the free evolution exp(-i H0 span / hbar).
    for (i, a) in psi.iter_mut().enumerate() {
        *a *= Complex64::from_polar(1.0, h0[(i, i)] * span * inv_hbar);
    }
    normalized_overlap(state.amplitudes(), &psi)
}

/// Integrated fidelity with step `<= dt_max` and `<= tau/1000`.
pub fn fidelity_exact(spec: &SystemSpec, state: &StateVector, tau: f64, dt_max: f64) -> Result<ExactFidelity> {
    check_tau(tau)?;
    state.check_dim(spec)?;
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
    }
    let span = tau * LN_2;
    let step = dt_max.min(tau / 1000.0);
    if !(span > 0.0 && step >= f64::MIN_POSITIVE && span / step < 1e12) {
        let note = if tau == 0.0 {
            "tau = 0: field switched off instantly".to_string()
        } else {
            format!("integration step underflows at tau = {tau:e} s; using the tau -> 0 limit")
        };
        return Ok(ExactFidelity {
            fidelity: 1.0,
            steps: 0,
            note: Some(note),
        });
    }
    let steps = (span / step).ceil() as usize;
    if steps > 2_000_000_000 {
        return Err(Error::InvalidArgument(format!(
            "{steps} integration steps requested; raise dt_max"
        )));
    }
    Ok(ExactFidelity {
        fidelity: integrate_relaxation(spec, state, tau, steps)?,
        steps,
        note: None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub with_exact: bool,
    pub variant: CoefficientVariant,
    /// Defaults to [`default_max_step`] when `None`.
    pub dt_max: Option<f64>,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            with_exact: false,
            variant: CoefficientVariant::Printed,
            dt_max: None,
            exec: Execution::default(),
        }
    }
}

/// Fidelity at every `tau`, evaluated independently per point.
pub fn sweep_tau(spec: &SystemSpec, state: &StateVector, taus: &[f64], options: SweepOptions) -> Result<FidelityCurve> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("tau grid is empty".into()));
    }
    for &t in taus {
        check_tau(t)?;
    }
    state.check_dim(spec)?;
    let dt_max = match options.dt_max {
        Some(v) => v,
        None => default_max_step(spec)?,
    };
    let samples = map_slice(options.exec, taus, |&tau| -> Result<FidelitySample> {
        let perturbative = fidelity_perturbative(spec, state, tau, options.variant)?;
        let exact = if options.with_exact {
            Some(fidelity_exact(spec, state, tau, dt_max)?.fidelity)
        } else {
            None
        };
        Ok(FidelitySample {
            tau,
            perturbative,
            exact,
        })
    });
    Ok(FidelityCurve {
        samples: samples.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::relaxation_benchmark;

    #[test]
    fn zero_tau() {
        let (spec, state) = relaxation_benchmark(1e-22);
        let c = first_order_coefficients(&spec, &state, 0.0, CoefficientVariant::Printed).unwrap();
        assert!(c.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(fidelity_perturbative(&spec, &state, 0.0, CoefficientVariant::Printed).unwrap(), 1.0);
        let exact = fidelity_exact(&spec, &state, 0.0, 1e-17).unwrap();
        assert_eq!(exact.fidelity, 1.0);
        assert!(exact.note.is_some());
    }

    #[test]
    fn no_excitation_field() {
        let (mut spec, state) = relaxation_benchmark(0.0);
        spec.excitation_inter.clear();
        let c = first_order_coefficients(&spec, &state, 1e-12, CoefficientVariant::Printed).unwrap();
        assert!(c.iter().all(|z| z.norm() == 0.0));
        let f = fidelity_exact(&spec, &state, 1e-13, 1e-17).unwrap().fidelity;
        assert!((f - 1.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn decoupled_ground_state() {
        // intra-level field on n=2 only; the ground state never feels it
        let spec = SystemSpec::new(vec![0.0, 1.0]).with_intra(2, 0.01);
        let ground = StateVector::basis_state(2, LevelIndex::new(1, 1)).unwrap();
        let f = fidelity_perturbative(&spec, &ground, 1e-12, CoefficientVariant::Printed).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn bad_arguments() {
        let (spec, state) = relaxation_benchmark(1e-22);
        assert!(matches!(
            first_order_coefficients(&spec, &state, -1.0, CoefficientVariant::Printed),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(fidelity_exact(&spec, &state, 1e-13, 0.0), Err(Error::InvalidArgument(_))));
        assert!(sweep_tau(&spec, &state, &[], SweepOptions::default()).is_err());
        let wrong = StateVector::basis_state(3, LevelIndex::new(1, 1)).unwrap();
        assert!(matches!(
            fidelity_perturbative(&spec, &wrong, 1e-13, CoefficientVariant::Printed),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn printed_and_corrected_agree_on_symmetric_amplitudes() {
        // Upper-level sums coincide when C_21 = C_22; only the ground-to-excited
        // term for |2,2> differs (the printed C_{1,2} does not exist).
        let (spec, state) = relaxation_benchmark(1e-22);
        let a = first_order_coefficients(&spec, &state, 1e-13, CoefficientVariant::Printed).unwrap();
        let b = first_order_coefficients(&spec, &state, 1e-13, CoefficientVariant::Corrected).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        assert_eq!(a[2], Complex64::new(0.0, 0.0));
        assert!(b[2].norm() > 0.0);
    }

    #[test]
    fn tiny_tau_underflow() {
        let (spec, state) = relaxation_benchmark(1e-22);
        let r = fidelity_exact(&spec, &state, 1e-320, 1e-17).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert!(r.note.unwrap().contains("underflow"));
    }

    #[test]
    fn sweep_single_zero() {
        let (spec, state) = relaxation_benchmark(1e-22);
        let opts = SweepOptions {
            with_exact: true,
            ..Default::default()
        };
        let curve = sweep_tau(&spec, &state, &[0.0], opts).unwrap();
        assert_eq!(
            curve.samples,
            vec![FidelitySample {
                tau: 0.0,
                perturbative: 1.0,
                exact: Some(1.0)
            }]
        );
    }
}

//! Piecewise-constant control with the dipole field and a gradient-ascent
//! pulse optimizer.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{inner, normalized_overlap, PulseSchedule, StateVector};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::hamiltonians::{build_h0, build_hi, energy_gaps, SystemSpec, HBAR_EV_S};
use crate::linalg::symmetric_eigen;

/// Real symmetric drift and control matrices in eV.
struct Generators {
    h0: DMatrix<f64>,
    hi: DMatrix<f64>,
}

impl Generators {
    fn new(spec: &SystemSpec) -> Result<Self> {
        Ok(Self {
            h0: build_h0(spec)?.entries().map(|z| z.re),
            hi: build_hi(spec)?.entries().map(|z| z.re),
        })
    }

    fn propagator(&self, amplitude: f64, dt: f64) -> Result<Propagator> {
        let (values, vectors) = symmetric_eigen(&(&self.h0 + &self.hi * amplitude))?;
        let phases = values
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * dt / HBAR_EV_S))
            .collect();
        Ok(Propagator { vectors, phases })
    }
}

/// `exp(-i H dt / hbar) = V diag(phases) V^T`.
struct Propagator {
    vectors: DMatrix<f64>,
    phases: Vec<Complex64>,
}

impl Propagator {
    fn project(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let v = &self.vectors;
        (0..v.ncols())
            .map(|j| (0..v.nrows()).map(|i| psi[i] * v[(i, j)]).sum())
            .collect()
    }

    fn expand(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let v = &self.vectors;
        (0..v.nrows())
            .map(|i| (0..v.ncols()).map(|j| coeffs[j] * v[(i, j)]).sum())
            .collect()
    }

    fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = self.project(psi).iter().zip(&self.phases).map(|(a, p)| a * p).collect();
        self.expand(&c)
    }

    fn apply_adjoint(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = self
            .project(psi)
            .iter()
            .zip(&self.phases)
            .map(|(a, p)| a * p.conj())
            .collect();
        self.expand(&c)
    }
}

fn check_schedule(spec: &SystemSpec, initial: &StateVector, schedule: &PulseSchedule) -> Result<()> {
    initial.check_dim(spec)?;
    schedule.validate()?;
    if schedule.segments.is_empty() {
        return Err(Error::InvalidArgument("schedule has no segments".into()));
    }
    Ok(())
}

/// State after applying every segment of `schedule` in time order.
pub fn evolve_piecewise(spec: &SystemSpec, initial: &StateVector, schedule: &PulseSchedule) -> Result<StateVector> {
    check_schedule(spec, initial, schedule)?;
    let gens = Generators::new(spec)?;
    let mut psi = initial.amplitudes().to_vec();
    for seg in &schedule.segments {
        psi = gens.propagator(seg.amplitude, seg.dt)?.apply(&psi);
    }
    Ok(StateVector::from_unchecked(psi))
}

/// `|<target|U(f)|initial>|^2`.
pub fn schedule_fidelity(
    spec: &SystemSpec,
    initial: &StateVector,
    target: &StateVector,
    schedule: &PulseSchedule,
) -> Result<f64> {
    target.check_dim(spec)?;
    let psi = evolve_piecewise(spec, initial, schedule)?;
    normalized_overlap(target.amplitudes(), psi.amplitudes())
}

/// States before each segment, targets propagated back to the end of each
/// segment, and the fidelity of the whole schedule.
type Sweep = (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, f64);

fn forward_backward(
    gens: &Generators,
    initial: &StateVector,
    target: &StateVector,
    schedule: &PulseSchedule,
) -> Result<Sweep> {
    let segs = &schedule.segments;
    let props = segs
        .iter()
        .map(|s| gens.propagator(s.amplitude, s.dt))
        .collect::<Result<Vec<_>>>()?;
    // forward[k] is the state before segment k
    let mut forward = Vec::with_capacity(segs.len() + 1);
    forward.push(initial.amplitudes().to_vec());
    for p in &props {
        let next = p.apply(forward.last().unwrap());
        forward.push(next);
    }
    // backward[k] is the target propagated back to the end of segment k
    let mut backward = vec![Vec::new(); segs.len()];
    let mut chi = target.amplitudes().to_vec();
    for k in (0..segs.len()).rev() {
        backward[k] = chi.clone();
        chi = props[k].apply_adjoint(&chi);
    }
    let fidelity = inner(target.amplitudes(), &forward[segs.len()]).norm_sqr();
    Ok((forward, backward, fidelity))
}

/// Central finite-difference gradient of the fidelity with respect to each
/// segment amplitude, with step `step` in eV. Also returns the fidelity.
pub fn fidelity_gradient(
    spec: &SystemSpec,
    initial: &StateVector,
    target: &StateVector,
    schedule: &PulseSchedule,
    step: f64,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    check_schedule(spec, initial, schedule)?;
    target.check_dim(spec)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("gradient step must be positive, got {step}")));
    }
    let gens = Generators::new(spec)?;
    let (forward, backward, fidelity) = forward_backward(&gens, initial, target, schedule)?;
    let segs = &schedule.segments;
    let grad = map_indexed(exec, segs.len(), |k| -> Result<f64> {
        let f = |a: f64| -> Result<f64> {
            let psi = gens.propagator(a, segs[k].dt)?.apply(&forward[k]);
            Ok(inner(&backward[k], &psi).norm_sqr())
        };
        let a = segs[k].amplitude;
        Ok((f(a + step)? - f(a - step)?) / (2.0 * step))
    });
    Ok((fidelity, grad.into_iter().collect::<Result<_>>()?))
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerSettings {
    pub n_segments: usize,
    /// Seconds.
    pub duration: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Stop as soon as this fidelity is reached.
    pub stop_fidelity: f64,
    pub exec: Execution,
}

impl OptimizerSettings {
    pub fn new(n_segments: usize, duration: f64, iterations: usize) -> Self {
        Self {
            n_segments,
            duration,
            iterations,
            seed: 0,
            stop_fidelity: 0.9999,
            exec: Execution::default(),
        }
    }
}

/// Field strength that shifts the first transition by about its own gap.
fn amplitude_scale(spec: &SystemSpec) -> Result<f64> {
    let mu = energy_gaps(spec)?[0];
    let d = spec.dipole_table()?.max_abs();
    Ok(if d > 0.0 { mu / d } else { mu })
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const HISTORY: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory quasi-Newton ascent direction from `(s, y)` pairs, where
/// `y` is the change of the negated gradient.
fn quasi_newton_direction(grad: &[f64], history: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut coeffs = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        coeffs.push((rho, a));
    }
    if let Some((s, y)) = history.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), (rho, a)) in history.iter().zip(coeffs.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

/// Gradient ascent on `|<target|U(f)|initial>|^2` over the segment amplitudes.
///
/// Gradients are central finite differences with step `1e-6` times the
/// amplitude scale. The search direction is the gradient preconditioned by a
/// limited-memory quasi-Newton estimate, and every step is accepted by a
/// backtracking Armijo line search. The initial guess is uniform in
/// `[-0.1, 0.1]` times the amplitude scale, drawn from a generator seeded
/// with `settings.seed`. The zero field is also evaluated and the best
/// schedule seen is returned; reaching a high fidelity is not guaranteed
/// when the system is not controllable.
pub fn optimize_pulse(
    spec: &SystemSpec,
    initial: &StateVector,
    target: &StateVector,
    settings: &OptimizerSettings,
) -> Result<PulseSchedule> {
    initial.check_dim(spec)?;
    target.check_dim(spec)?;
    if settings.n_segments == 0 {
        return Err(Error::InvalidArgument("n_segments must be >= 1".into()));
    }
    if !(settings.duration > 0.0 && settings.duration.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {}",
            settings.duration
        )));
    }
    let scale = amplitude_scale(spec)?;
    let fd_step = 1e-6 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let start: Vec<f64> = (0..settings.n_segments)
        .map(|_| rng.gen_range(-0.1..=0.1) * scale)
        .collect();

    let fidelity_of = |amps: &[f64]| -> Result<(PulseSchedule, f64)> {
        let s = PulseSchedule::uniform(settings.duration, amps)?;
        let f = schedule_fidelity(spec, initial, target, &s)?;
        Ok((s, f))
    };
    let gradient_of = |s: &PulseSchedule| -> Result<Vec<f64>> {
        Ok(fidelity_gradient(spec, initial, target, s, fd_step, settings.exec)?.1)
    };

    let (zero, zero_f) = fidelity_of(&vec![0.0; settings.n_segments])?;
    let (mut current, mut current_f) = fidelity_of(&start)?;
    let (mut best, mut best_f) = if zero_f > current_f {
        (zero, zero_f)
    } else {
        (current.clone(), current_f)
    };

    let mut grad = gradient_of(&current)?;
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for _ in 0..settings.iterations {
        if best_f >= settings.stop_fidelity {
            break;
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if !(gmax > 0.0 && gmax.is_finite()) {
            break;
        }
        let mut direction = quasi_newton_direction(&grad, &history);
        let mut slope = dot(&grad, &direction);
        if !(slope > 0.0 && slope.is_finite()) {
            history.clear();
            direction = grad.clone();
            slope = dot(&grad, &grad);
        }
        // no amplitude moves by more than the scale in one iteration
        let dmax = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut step = if history.is_empty() { 0.1 * scale / dmax } else { 1.0 };
        step = step.min(scale / dmax);

        let amps = current.amplitudes();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<f64> = amps.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
            let (s, f) = fidelity_of(&trial)?;
            if f >= current_f + ARMIJO * step * slope {
                accepted = Some((s, f));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_f)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let next_grad = gradient_of(&next)?;
        let s: Vec<f64> = next.amplitudes().iter().zip(&amps).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad.iter().zip(&next_grad).map(|(g0, g1)| g0 - g1).collect();
        if dot(&s, &y) > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            history.push((s, y));
            if history.len() > HISTORY {
                history.remove(0);
            }
        }
        current = next;
        current_f = next_f;
        grad = next_grad;
        if current_f > best_f {
            best = current.clone();
            best_f = current_f;
        }
    }
    best.achieved_fidelity = best_f;
    Ok(best)
}

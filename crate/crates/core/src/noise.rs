//! Magnetic-field dephasing: a diagonal Lindblad operator built from the
//! per-level field sensitivities, integrated with fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::control::{displacement, rotating_hamiltonian, signed_phases};
use crate::error::{Error, Result};
use crate::linalg::{cplx, is_hermitian, jz_value, propagate, real_diagonal, CMatrix, HermitianEigen};
use crate::optim::{fit_damped_cosine, DampedCosineFit};
use crate::{Complex, ComplexMatrix, PulseParams, PulseSequence, ToneSet};

/// RK4 steps per pulse when no explicit step is given.
pub const STEPS_PER_PULSE: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    /// Per-level field sensitivity (MHz/G); only differences matter.
    pub sensitivities: Vec<f64>,
    /// Rate scale multiplying the Lindblad dissipator (1/ms per (MHz/G)²).
    pub gamma: f64,
    /// Coherence time the rate was normalized to, if any (ms).
    pub t2_reference: Option<f64>,
}

impl DephasingModel {
    pub fn new(sensitivities: Vec<f64>, gamma: f64) -> Result<Self> {
        if sensitivities.is_empty() || sensitivities.iter().any(|s| !s.is_finite()) {
            return Err(Error::Contract("sensitivities must be finite and non-empty".into()));
        }
        if !(gamma >= 0.0) {
            return Err(Error::Contract(format!("dephasing rate {gamma} must be >= 0")));
        }
        Ok(Self {
            sensitivities,
            gamma,
            t2_reference: None,
        })
    }

    /// Chooses `gamma` so the slowest-decaying coherence (smallest nonzero
    /// sensitivity difference) has `1/e` time `t2`.
    pub fn normalized(sensitivities: Vec<f64>, t2: f64) -> Result<Self> {
        if !(t2 > 0.0) {
            return Err(Error::Contract(format!("T2 = {t2} must be positive")));
        }
        let mut m = Self::new(sensitivities, 0.0)?;
        let gap = m.min_nonzero_gap().ok_or_else(|| {
            Error::Contract("all sensitivities are equal; no coherence dephases".into())
        })?;
        m.gamma = 2.0 / (t2 * gap * gap);
        m.t2_reference = Some(t2);
        Ok(m)
    }

    /// Noiseless model of dimension `d`.
    pub fn none(d: usize) -> Self {
        Self {
            sensitivities: vec![0.0; d],
            gamma: 0.0,
            t2_reference: None,
        }
    }

    pub fn d(&self) -> usize {
        self.sensitivities.len()
    }

    fn min_nonzero_gap(&self) -> Option<f64> {
        let s = &self.sensitivities;
        let mut best: Option<f64> = None;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let g = (s[i] - s[j]).abs();
                if g > 1e-15 && best.map_or(true, |b| g < b) {
                    best = Some(g);
                }
            }
        }
        best
    }

    pub fn operator(&self) -> ComplexMatrix {
        real_diagonal(&self.sensitivities)
    }

    /// Decay rate of the `(j, k)` coherence, `γ (s_j - s_k)² / 2`.
    pub fn coherence_rate(&self, j: usize, k: usize) -> f64 {
        0.5 * self.gamma * (self.sensitivities[j] - self.sensitivities[k]).powi(2)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            t2_reference: None,
            ..self.clone()
        }
    }
}

fn lindblad_rhs(rho: &ComplexMatrix, h: &ComplexMatrix, l: &ComplexMatrix, ldl: &ComplexMatrix, gamma: f64) -> ComplexMatrix {
    let mi = cplx(0.0, -1.0);
    let comm = (h * rho - rho * h) * mi;
    if gamma == 0.0 {
        return comm;
    }
    let diss = l * rho * l.adjoint() - (ldl * rho + rho * ldl) * cplx(0.5, 0.0);
    comm + diss * cplx(gamma, 0.0)
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * cplx(0.5, 0.0)
}

fn trace(m: &ComplexMatrix) -> Complex {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(rho: &ComplexMatrix) -> f64 {
    HermitianEigen::new(&hermitize(rho), 1.0)
        .map(|e| e.values.iter().copied().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN)
}

/// Integrates `dρ/dt = -i[H,ρ] + γ(LρL† - ½{L†L,ρ})` for a time `total`
/// with RK4 steps no longer than `dt`.
pub fn lindblad_evolve(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    l: &ComplexMatrix,
    gamma: f64,
    total: f64,
    dt: f64,
) -> Result<ComplexMatrix> {
    if !(dt > 0.0) {
        return Err(Error::Integration(format!("step {dt} must be positive")));
    }
    if !(total >= 0.0) {
        return Err(Error::Integration(format!("duration {total} must be >= 0")));
    }
    let d = rho.nrows();
    for (name, m) in [("H", h), ("L", l)] {
        if m.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, actual: m.nrows() });
        }
        if name == "L" && !crate::linalg::is_diagonal(m, 1e-12) {
            return Err(Error::Contract("dephasing operator must be diagonal".into()));
        }
    }
    if !is_hermitian(rho, 1e-9) {
        return Err(Error::Contract("density matrix is not Hermitian".into()));
    }
    let tr0 = trace(rho);
    if (tr0.re - 1.0).abs() > 1e-8 || tr0.im.abs() > 1e-8 {
        return Err(Error::Contract(format!("density matrix trace {} != 1", tr0.re)));
    }
    if total == 0.0 {
        return Ok(rho.clone());
    }
    let steps = (total / dt).ceil().max(1.0) as usize;
    let step = total / steps as f64;
    let ldl = l.adjoint() * l;
    let half = cplx(0.5 * step, 0.0);
    let full = cplx(step, 0.0);
    let sixth = cplx(step / 6.0, 0.0);
    let two = cplx(2.0, 0.0);
    let mut r = rho.clone();
    for _ in 0..steps {
        let k1 = lindblad_rhs(&r, h, l, &ldl, gamma);
        let k2 = lindblad_rhs(&(&r + &k1 * half), h, l, &ldl, gamma);
        let k3 = lindblad_rhs(&(&r + &k2 * half), h, l, &ldl, gamma);
        let k4 = lindblad_rhs(&(&r + &k3 * full), h, l, &ldl, gamma);
        r += (k1 + k2 * two + k3 * two + k4) * sixth;
        r = hermitize(&r);
    }
    let drift = (trace(&r) - tr0).norm();
    if drift > 1e-6 {
        return Err(Error::Integration(format!("trace drifted by {drift:e}")));
    }
    Ok(r)
}

/// Applies each pulse as a Lindblad evolution under the rotating-frame
/// Hamiltonian of `tones` for the pulse's physical duration. With `gamma = 0`
/// the exact propagator is used instead of RK4.
pub fn noisy_sequence(
    rho0: &ComplexMatrix,
    seq: &PulseSequence,
    tones: &ToneSet,
    model: &DephasingModel,
) -> Result<ComplexMatrix> {
    noisy_sequence_with_steps(rho0, seq, tones, model, STEPS_PER_PULSE)
}

pub fn noisy_sequence_with_steps(
    rho0: &ComplexMatrix,
    seq: &PulseSequence,
    tones: &ToneSet,
    model: &DephasingModel,
    steps_per_pulse: usize,
) -> Result<ComplexMatrix> {
    let d = seq.d;
    if tones.d != d || model.d() != d || rho0.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: model.d() });
    }
    let l = model.operator();
    let mut rho = rho0.clone();
    for p in &seq.pulses {
        let t = tones.duration(p.theta);
        if t == 0.0 {
            continue;
        }
        let h = rotating_hamiltonian(tones, &signed_phases(p))?;
        if model.gamma == 0.0 {
            let u = propagate(&h, t)?;
            rho = hermitize(&(&u * rho * u.adjoint()));
        } else {
            rho = lindblad_evolve(&rho, &h, &l, model.gamma, t, t / steps_per_pulse.max(1) as f64)?;
        }
    }
    Ok(rho)
}

/// Total drive time of a sequence (ms).
pub fn sequence_duration(seq: &PulseSequence, tones: &ToneSet) -> f64 {
    seq.pulses.iter().map(|p| tones.duration(p.theta)).sum()
}

/// `Σ_i ρ_ii · m_i` with `m_i = -(d-1)/2 + i`.
pub fn jz_expectation(rho: &ComplexMatrix) -> f64 {
    let d = rho.nrows();
    (0..d).map(|i| rho[(i, i)].re * jz_value(d, i)).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RamseyResult {
    pub delays: Vec<f64>,
    pub jz: Vec<f64>,
    pub fit: Option<DampedCosineFit>,
    pub fit_error: Option<String>,
}

/// Ramsey sequence with displacement π/2 pulses (treated as instantaneous)
/// around free evolution under the detuning part of `tones`.
pub fn ramsey(d: usize, tones: &ToneSet, model: &DephasingModel, delays: &[f64]) -> Result<RamseyResult> {
    if tones.d != d || model.d() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: tones.d });
    }
    if delays.iter().any(|&t| t < 0.0) || delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("Ramsey delays must be non-negative and increasing".into()));
    }
    let half_pi = displacement(d, &PulseParams::uniform(d, std::f64::consts::FRAC_PI_2, 0.0))?;
    let free_tones = ToneSet {
        amplitudes: vec![0.0; d - 1],
        ..tones.clone()
    };
    let h = rotating_hamiltonian(&free_tones, &vec![0.0; d - 1])?;
    let l = model.operator();
    let mut rho: CMatrix<f64> = CMatrix::zeros(d, d);
    rho[(0, 0)] = cplx(1.0, 0.0);
    let prepared = &half_pi * rho * half_pi.adjoint();

    let spread = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let diag_h: Vec<f64> = (0..d).map(|i| h[(i, i)].re).collect();
    let rate = spread(&diag_h) + model.gamma * spread(&model.sensitivities).powi(2);
    let mut jz = Vec::with_capacity(delays.len());
    for &t in delays {
        let mut dt = (t / STEPS_PER_PULSE as f64).max(1e-12);
        if rate > 0.0 {
            dt = dt.min(0.05 / rate);
        }
        let free = lindblad_evolve(&prepared, &h, &l, model.gamma, t, dt)?;
        let out = &half_pi * free * half_pi.adjoint();
        jz.push(jz_expectation(&out));
    }
    let (fit, fit_error) = match fit_damped_cosine(delays, &jz) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e)),
    };
    Ok(RamseyResult {
        delays: delays.to_vec(),
        jz,
        fit,
        fit_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::compose;
    use crate::linalg::{max_abs_diff, StateVector};

    fn pure(d: usize, amps: &[(f64, f64)]) -> ComplexMatrix {
        let v = crate::ComplexVector::from_iterator(d, amps.iter().map(|&(a, b)| cplx(a, b)));
        StateVector::normalized(v).unwrap().density()
    }

    #[test]
    fn unitary_limit() {
        let d = 3;
        let rho = pure(d, &[(1.0, 0.0), (0.5, 0.2), (-0.3, 0.4)]);
        let tones = ToneSet::new(d, vec![1.2, 0.7], vec![0.3, -0.5], 1.0).unwrap();
        let h = rotating_hamiltonian(&tones, &[0.4, -1.0]).unwrap();
        let l = real_diagonal(&[0.0, 1.0, 3.0]);
        let out = lindblad_evolve(&rho, &h, &l, 0.0, 2.0, 2.0 / 400.0).unwrap();
        let u = propagate(&h, 2.0).unwrap();
        assert!(max_abs_diff(&out, &(&u * &rho * u.adjoint())) < 1e-8);
    }

    #[test]
    fn pure_dephasing_closed_form() {
        let d = 4;
        let rho = pure(d, &[(1.0, 0.0), (0.5, 0.5), (-0.3, 0.1), (0.2, -0.7)]);
        let s = [0.0, 0.4, 1.1, -0.6];
        let l = real_diagonal(&s);
        let (gamma, t) = (1.3, 0.9);
        let out = lindblad_evolve(&rho, &ComplexMatrix::zeros(d, d), &l, gamma, t, t / 200.0).unwrap();
        for j in 0..d {
            assert_eq!(out[(j, j)], rho[(j, j)], "populations untouched exactly");
            for k in 0..d {
                let expect = rho[(j, k)] * (-0.5 * gamma * (s[j] - s[k]).powi(2) * t).exp();
                assert!((out[(j, k)] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn maximally_mixed_is_stationary() {
        let d = 5;
        let rho = ComplexMatrix::identity(d, d) * cplx(0.2, 0.0);
        let tones = ToneSet::ideal(d, 2.0).unwrap();
        let h = rotating_hamiltonian(&tones, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = lindblad_evolve(&rho, &h, &real_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0]), 2.0, 1.0, 0.01).unwrap();
        assert!(max_abs_diff(&out, &rho) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rho = pure(2, &[(1.0, 0.0), (0.0, 0.0)]);
        let z = ComplexMatrix::zeros(2, 2);
        assert!(matches!(lindblad_evolve(&rho, &z, &z, 1.0, 1.0, 0.0), Err(Error::Integration(_))));
        assert!(matches!(lindblad_evolve(&rho, &z, &z, 1.0, 1.0, -1.0), Err(Error::Integration(_))));
        let mut offdiag = z.clone();
        offdiag[(0, 1)] = cplx(1.0, 0.0);
        assert!(lindblad_evolve(&rho, &z, &offdiag, 1.0, 1.0, 0.1).is_err());
        let bad = ComplexMatrix::identity(2, 2);
        assert!(lindblad_evolve(&bad, &z, &z, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn normalization_sets_slowest_coherence() {
        let m = DephasingModel::normalized(vec![0.0, 0.5, 2.0], 3.0).unwrap();
        assert!((m.coherence_rate(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(DephasingModel::normalized(vec![1.0, 1.0], 3.0).is_err());
    }

    #[test]
    fn noisy_sequence_limits() {
        let d = 4;
        let seq = PulseSequence::new(
            d,
            vec![PulseParams::new(1.2, vec![0.3, 0.1, -0.5]), PulseParams::new(0.7, vec![2.0, -1.0, 0.2])],
        )
        .unwrap();
        let tones = ToneSet::ideal(d, 10.0).unwrap();
        let rho0 = pure(d, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let none = DephasingModel::none(d);
        let out = noisy_sequence(&rho0, &seq, &tones, &none).unwrap();
        let u = compose(&seq).unwrap();
        assert!(max_abs_diff(&out, &(&u * &rho0 * u.adjoint())) < 1e-8);

        let empty = PulseSequence::new(d, vec![PulseParams::uniform(d, 0.0, 0.0)]).unwrap();
        let m = DephasingModel::new(vec![0.0, 1.0, 2.0, 3.0], 5.0).unwrap();
        assert_eq!(noisy_sequence(&rho0, &empty, &tones, &m).unwrap(), rho0);

        let ideal = &u * &rho0 * u.adjoint();
        let fid = |g: f64| {
            let r = noisy_sequence(&rho0, &seq, &tones, &m.with_gamma(g)).unwrap();
            crate::linalg::trace_overlap(&ideal, &r).re
        };
        let grid: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|&g| fid(g)).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]), "{grid:?}");
    }

    #[test]
    fn ramsey_two_level() {
        let tones = ToneSet::new(2, vec![1.0], vec![2.0], 1.0).unwrap();
        let delays: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        let flat = ramsey(2, &tones, &DephasingModel::none(2), &delays).unwrap();
        for (&t, &jz) in delays.iter().zip(&flat.jz) {
            assert!((jz - 0.5 * (2.0 * t).cos()).abs() < 1e-6, "t={t}: {jz}");
        }
        let model = DephasingModel::normalized(vec![0.0, 1.0], 2.5).unwrap();
        let r = ramsey(2, &tones, &model, &delays).unwrap();
        let fit = r.fit.unwrap();
        assert!((fit.t2 - 2.5).abs() / 2.5 < 0.1, "{fit:?}");
    }

    #[test]
    fn ramsey_zero_delay_is_full_flip() {
        let d = 5;
        let tones = ToneSet::new(d, vec![1.0; 4], vec![0.5; 4], 1.0).unwrap();
        let r = ramsey(d, &tones, &DephasingModel::none(d), &[0.0, 0.1]).unwrap();
        assert!((r.jz[0] - 2.0).abs() < 1e-10);
        assert!(r.fit.is_none() && r.fit_error.is_some());
    }
}

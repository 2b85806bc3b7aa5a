//! Multi-tone rotating-frame control: the tridiagonal drive Hamiltonian,
//! displacement and SNAP gates, and sequence composition.
//!
//! Coupling `k` (for `k = 0..d-2`) links levels `k` and `k+1`; its drive
//! phase `φ_k` sits on the upper off-diagonal as `e^{+iφ_k}`. A displacement
//! pulse is `exp(-iθ G(φ))` where `G(0) = Jx` exactly, so `θ = π` is a full
//! spin flip `|0⟩ → |d-1⟩`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cplx, identity, phase, spin_operators, CMatrix, HermitianEigen};
use crate::scalar::Real;

/// Ratio between the rotating-frame Hamiltonian built from [`ideal_amplitudes`]
/// and `Ω·Jx`: the off-diagonals are `Ω√(k(d-k))` while `Jx` carries
/// `½√(k(d-k))`.
pub const GENERATOR_SCALE: f64 = 2.0;

/// Per-coupling Rabi amplitudes and detunings, in angular units (rad/ms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSet<T> {
    pub d: usize,
    pub amplitudes: Vec<T>,
    pub detunings: Vec<T>,
    /// Nominal Rabi scale `Ω` used to convert rotation angles to durations.
    pub rabi: T,
}

impl<T: Real> ToneSet<T> {
    pub fn new(d: usize, amplitudes: Vec<T>, detunings: Vec<T>, rabi: T) -> Result<Self> {
        check_dim(d)?;
        check_len(d - 1, amplitudes.len())?;
        check_len(d - 1, detunings.len())?;
        if amplitudes.iter().any(|&a| a < T::zero() || !a.is_finite()) {
            return Err(Error::Contract("tone amplitudes must be finite and >= 0".into()));
        }
        if !(rabi > T::zero()) {
            return Err(Error::Contract("nominal Rabi scale must be positive".into()));
        }
        Ok(Self {
            d,
            amplitudes,
            detunings,
            rabi,
        })
    }

    /// Resonant tones with the spin-displacement amplitude law.
    pub fn ideal(d: usize, rabi: T) -> Result<Self> {
        Self::new(d, ideal_amplitudes(d, rabi)?, vec![T::zero(); d - 1], rabi)
    }

    /// Amplitudes relative to the ideal law (1.0 = perfectly calibrated).
    pub fn relative_amplitudes(&self) -> Vec<T> {
        let ideal = ideal_amplitudes(self.d, self.rabi).expect("validated dimension");
        self.amplitudes.iter().zip(ideal).map(|(&a, i)| a / i).collect()
    }

    /// Ideal tones with amplitudes scaled per coupling by `rel`.
    pub fn with_relative_amplitudes(&self, rel: &[T]) -> Result<Self> {
        check_len(self.d - 1, rel.len())?;
        let ideal = ideal_amplitudes(self.d, self.rabi)?;
        let amps = ideal.iter().zip(rel).map(|(&i, &r)| i * r).collect();
        Self::new(self.d, amps, self.detunings.clone(), self.rabi)
    }

    /// Duration of a pulse of nominal rotation angle `theta`.
    pub fn duration(&self, theta: T) -> T {
        theta.abs() / (T::lit(GENERATOR_SCALE) * self.rabi)
    }
}

/// One displacement pulse: rotation angle and per-coupling phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseParams<T> {
    pub theta: T,
    pub phases: Vec<T>,
}

impl<T: Real> PulseParams<T> {
    pub fn new(theta: T, phases: Vec<T>) -> Self {
        Self { theta, phases }
    }

    /// Pulse with every tone at the same phase.
    pub fn uniform(d: usize, theta: T, phi: T) -> Self {
        Self {
            theta,
            phases: vec![phi; d.saturating_sub(1)],
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            theta: -self.theta,
            phases: self.phases.clone(),
        }
    }
}

/// Pulses in time order: `pulses[0]` acts on the state first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<T> {
    pub d: usize,
    pub pulses: Vec<PulseParams<T>>,
}

impl<T: Real> PulseSequence<T> {
    pub fn new(d: usize, pulses: Vec<PulseParams<T>>) -> Result<Self> {
        check_dim(d)?;
        for p in &pulses {
            check_len(d - 1, p.phases.len())?;
            if !p.theta.is_finite() || p.phases.iter().any(|x| !x.is_finite()) {
                return Err(Error::Contract("pulse parameters must be finite".into()));
            }
        }
        Ok(Self { d, pulses })
    }

    pub fn empty(d: usize) -> Self {
        Self { d, pulses: vec![] }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        check_len(self.d, other.d)?;
        let mut pulses = self.pulses.clone();
        pulses.extend(other.pulses.iter().cloned());
        Ok(Self { d: self.d, pulses })
    }

    pub fn reversed(&self) -> Self {
        Self {
            d: self.d,
            pulses: self.pulses.iter().rev().cloned().collect(),
        }
    }

    /// Flattened `(θ, φ_0..φ_{d-2})` per pulse.
    pub fn to_params(&self) -> Vec<T> {
        self.pulses
            .iter()
            .flat_map(|p| std::iter::once(p.theta).chain(p.phases.iter().copied()))
            .collect()
    }

    pub fn from_params(d: usize, params: &[T]) -> Result<Self> {
        check_dim(d)?;
        if params.len() % d != 0 {
            return Err(Error::Contract(format!(
                "parameter vector of length {} is not a multiple of d = {d}",
                params.len()
            )));
        }
        let pulses = params
            .chunks(d)
            .map(|c| PulseParams::new(c[0], c[1..].to_vec()))
            .collect();
        Self::new(d, pulses)
    }

    pub fn total_angle(&self) -> T {
        self.pulses.iter().fold(T::zero(), |a, p| a + p.theta.abs())
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `Ω √(k(d-k))` for `k = 1..d-1`.
pub fn ideal_amplitudes<T: Real>(d: usize, omega: T) -> Result<Vec<T>> {
    check_dim(d)?;
    Ok((1..d)
        .map(|k| omega * T::lit(((k * (d - k)) as f64).sqrt()))
        .collect())
}

/// Tridiagonal rotating-frame Hamiltonian for the given tones and phases.
pub fn rotating_hamiltonian<T: Real>(tones: &ToneSet<T>, phases: &[T]) -> Result<CMatrix<T>> {
    let d = tones.d;
    check_len(d - 1, phases.len())?;
    let mut h = CMatrix::<T>::zeros(d, d);
    let mut diag = T::zero();
    for k in 0..d - 1 {
        let z = phase(phases[k]) * tones.amplitudes[k];
        h[(k, k + 1)] = z;
        h[(k + 1, k)] = z.conj();
        diag += tones.detunings[k];
        h[(k + 1, k + 1)] = cplx(diag, T::zero());
    }
    Ok(h)
}

/// Displacement generator `G(φ)` with `G(0) = Jx`.
pub fn generator<T: Real>(d: usize, phases: &[T]) -> Result<CMatrix<T>> {
    check_dim(d)?;
    check_len(d - 1, phases.len())?;
    let jx = spin_operators::<T>(d)?.x;
    let mut g = CMatrix::<T>::zeros(d, d);
    for k in 0..d - 1 {
        let z = phase(phases[k]) * jx[(k, k + 1)].re;
        g[(k, k + 1)] = z;
        g[(k + 1, k)] = z.conj();
    }
    Ok(g)
}

/// How to read published rotation angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorNormalization {
    /// `exp(-iθ Jx(φ))`
    Jx,
    /// `exp(-iθ 2Jx(φ))`, i.e. the raw tridiagonal matrix with unit `Ω`.
    TwoJx,
}

impl GeneratorNormalization {
    pub fn factor(self) -> f64 {
        match self {
            Self::Jx => 1.0,
            Self::TwoJx => GENERATOR_SCALE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseOrder {
    /// First listed pulse is applied first.
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Convention {
    pub normalization: GeneratorNormalization,
    pub order: PulseOrder,
}

impl Default for Convention {
    fn default() -> Self {
        Self {
            normalization: GeneratorNormalization::Jx,
            order: PulseOrder::Forward,
        }
    }
}

impl Convention {
    pub const ALL: [Convention; 4] = [
        Convention { normalization: GeneratorNormalization::Jx, order: PulseOrder::Forward },
        Convention { normalization: GeneratorNormalization::TwoJx, order: PulseOrder::Forward },
        Convention { normalization: GeneratorNormalization::Jx, order: PulseOrder::Reverse },
        Convention { normalization: GeneratorNormalization::TwoJx, order: PulseOrder::Reverse },
    ];

    pub fn label(&self) -> String {
        let n = match self.normalization {
            GeneratorNormalization::Jx => "jx",
            GeneratorNormalization::TwoJx => "2jx",
        };
        let o = match self.order {
            PulseOrder::Forward => "forward",
            PulseOrder::Reverse => "reverse",
        };
        format!("{n}/{o}")
    }
}

/// `exp(-iθ G(φ))`
pub fn displacement<T: Real>(d: usize, p: &PulseParams<T>) -> Result<CMatrix<T>> {
    let g = generator(d, &p.phases)?;
    Ok(HermitianEigen::new(&g, T::default_tol())?.propagator(p.theta))
}

/// Diagonal phase gate `diag(e^{iΦ_0}, ..., e^{iΦ_{d-1}})` with `Φ_0 = 0`,
/// `Φ_{k+1} = Φ_k + φ_k`.
pub fn snap<T: Real>(d: usize, phases: &[T]) -> Result<CMatrix<T>> {
    check_dim(d)?;
    check_len(d - 1, phases.len())?;
    let mut m = CMatrix::<T>::zeros(d, d);
    for (i, a) in cumulative_phases(phases).into_iter().enumerate() {
        m[(i, i)] = phase(a);
    }
    Ok(m)
}

/// Level phases `Φ` from coupling phases `φ`.
pub fn cumulative_phases<T: Real>(phases: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(phases.len() + 1);
    let mut acc = T::zero();
    out.push(acc);
    for &p in phases {
        acc += p;
        out.push(acc);
    }
    out
}

/// Fast displacement evaluation for a fixed dimension.
///
/// Uses `D(φ, θ) = S(φ)† exp(-iθ Jx) S(φ)` with the `Jx` eigenbasis computed
/// once, so each pulse costs `O(d³)` multiplications and no eigensolve.
#[derive(Debug, Clone)]
pub struct DisplacementKernel<T: Real> {
    d: usize,
    jx: HermitianEigen<T>,
}

impl<T: Real> DisplacementKernel<T> {
    pub fn new(d: usize) -> Result<Self> {
        let jx = spin_operators::<T>(d)?.x;
        Ok(Self {
            d,
            jx: HermitianEigen::new(&jx, T::default_tol())?,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `exp(-i scale·θ G(φ))` from a raw `(θ, φ)` slice.
    pub fn eval(&self, theta: T, phases: &[T], scale: T) -> CMatrix<T> {
        let d = self.d;
        let lvl: Vec<_> = cumulative_phases(phases).into_iter().map(phase).collect();
        let w: Vec<_> = self.jx.values.iter().map(|&l| phase(-l * theta * scale)).collect();
        let v = &self.jx.vectors;
        let mut out = CMatrix::<T>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = cplx(T::zero(), T::zero());
                for k in 0..d {
                    acc += v[(a, k)] * w[k] * v[(b, k)].conj();
                }
                out[(a, b)] = lvl[a].conj() * acc * lvl[b];
            }
        }
        out
    }

    pub fn pulse(&self, p: &PulseParams<T>) -> CMatrix<T> {
        self.eval(p.theta, &p.phases, T::one())
    }
}

/// `D_n ··· D_2 D_1`; the empty sequence composes to the identity.
pub fn compose<T: Real>(seq: &PulseSequence<T>) -> Result<CMatrix<T>> {
    compose_with(seq, Convention::default())
}

pub fn compose_with<T: Real>(seq: &PulseSequence<T>, conv: Convention) -> Result<CMatrix<T>> {
    let kernel = DisplacementKernel::new(seq.d)?;
    Ok(compose_kernel(&kernel, seq, conv))
}

pub(crate) fn compose_kernel<T: Real>(
    kernel: &DisplacementKernel<T>,
    seq: &PulseSequence<T>,
    conv: Convention,
) -> CMatrix<T> {
    let scale = T::lit(conv.normalization.factor());
    let mut u = identity::<T>(seq.d);
    let apply = |u: CMatrix<T>, p: &PulseParams<T>| kernel.eval(p.theta, &p.phases, scale) * u;
    match conv.order {
        PulseOrder::Forward => seq.pulses.iter().fold(u, apply),
        PulseOrder::Reverse => {
            for p in seq.pulses.iter().rev() {
                u = apply(u, p);
            }
            u
        }
    }
}

/// Evolution under the actual (possibly miscalibrated, detuned) tones.
///
/// Pulse `n` lasts `|θ_n| / (2Ω)` with `Ω = tones.rabi`; a negative angle is
/// realized by shifting every tone phase by π.
pub fn evolve_nonideal<T: Real>(seq: &PulseSequence<T>, tones: &ToneSet<T>) -> Result<CMatrix<T>> {
    check_len(tones.d, seq.d)?;
    let mut u = identity::<T>(seq.d);
    for p in &seq.pulses {
        if p.theta == T::zero() {
            continue;
        }
        let phases = signed_phases(p);
        let h = rotating_hamiltonian(tones, &phases)?;
        u = HermitianEigen::new(&h, T::default_tol())?.propagator(tones.duration(p.theta)) * u;
    }
    Ok(u)
}

/// Phases realizing `exp(-iθG(φ))` with a non-negative drive duration.
pub(crate) fn signed_phases<T: Real>(p: &PulseParams<T>) -> Vec<T> {
    if p.theta < T::zero() {
        p.phases.iter().map(|&x| x + T::pi()).collect()
    } else {
        p.phases.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_diagonal, is_hermitian, is_unitary, max_abs_diff, unitary_fidelity};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn amplitude_law_examples() {
        assert_eq!(ideal_amplitudes(2, 1.5).unwrap(), vec![1.5]);
        let a3 = ideal_amplitudes(3, 1.0).unwrap();
        assert_abs_diff_eq!(a3[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a3[1], 2f64.sqrt(), epsilon = 1e-15);
        let a5 = ideal_amplitudes(5, 1.0).unwrap();
        let expect = [2.0, 6f64.sqrt(), 6f64.sqrt(), 2.0];
        for (a, e) in a5.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_level_hamiltonian_readoff() {
        let tones = ToneSet::new(2, vec![0.7], vec![0.3], 1.0).unwrap();
        let h = rotating_hamiltonian(&tones, &[0.4]).unwrap();
        assert_abs_diff_eq!(h[(0, 0)].norm(), 0.0);
        assert!((h[(0, 1)] - Complex::from_polar(0.7, 0.4)).norm() < 1e-15);
        assert!((h[(1, 0)] - Complex::from_polar(0.7, -0.4)).norm() < 1e-15);
        assert_abs_diff_eq!(h[(1, 1)].re, 0.3);
        assert!(rotating_hamiltonian(&tones, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn ideal_hamiltonian_is_two_jx() {
        for d in 2..=8 {
            let tones = ToneSet::ideal(d, 1.0).unwrap();
            let h = rotating_hamiltonian(&tones, &vec![0.0; d - 1]).unwrap();
            let jx = spin_operators::<f64>(d).unwrap().x * Complex::new(GENERATOR_SCALE, 0.0);
            assert!(max_abs_diff(&h, &jx) < 1e-12);
        }
    }

    #[test]
    fn displacement_examples() {
        let id = displacement(4, &PulseParams::uniform(4, 0.0, 0.3)).unwrap();
        assert!(max_abs_diff(&id, &identity(4)) < 1e-14);

        let u = displacement(2, &PulseParams::uniform(2, PI, 0.0)).unwrap();
        let mut minus_i_x = CMatrix::<f64>::zeros(2, 2);
        minus_i_x[(0, 1)] = Complex::new(0.0, -1.0);
        minus_i_x[(1, 0)] = Complex::new(0.0, -1.0);
        assert!(max_abs_diff(&u, &minus_i_x) < 1e-14);

        let u5 = displacement(5, &PulseParams::uniform(5, PI, 0.0)).unwrap();
        assert_abs_diff_eq!(u5[(4, 0)].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_matches_direct_exponential() {
        for d in 2..=8 {
            let k = DisplacementKernel::<f64>::new(d).unwrap();
            let phases: Vec<f64> = (0..d - 1).map(|i| 0.37 * i as f64 - 1.1).collect();
            let p = PulseParams::new(1.234, phases);
            assert!(max_abs_diff(&k.pulse(&p), &displacement(d, &p).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn snap_examples_and_conjugation() {
        assert!(max_abs_diff(&snap(3, &[0.0, 0.0]).unwrap(), &identity(3)) < 1e-15);
        let s = snap(2, &[PI]).unwrap();
        assert!((s[(1, 1)] - Complex::new(-1.0, 0.0)).norm() < 1e-15);
        for d in [2, 3, 5, 8] {
            let phases: Vec<f64> = (0..d - 1).map(|i| 0.9 - 0.41 * i as f64).collect();
            let s = snap(d, &phases).unwrap();
            let d0 = displacement(d, &PulseParams::uniform(d, 0.77, 0.0)).unwrap();
            let dphi = displacement(d, &PulseParams::new(0.77, phases.clone())).unwrap();
            assert!(max_abs_diff(&(s.adjoint() * d0 * &s), &dphi) < 1e-10);
            assert!(s.iter().all(|z| z.norm() < 1e-15 || (z.norm() - 1.0).abs() < 1e-15));
            let diag = crate::linalg::real_diagonal(&(0..d).map(|i| i as f64).collect::<Vec<_>>());
            assert!(max_abs_diff(&(&s * &diag), &(&diag * &s)) < 1e-15);
        }
    }

    #[test]
    fn compose_examples() {
        let p = PulseParams::new(0.9, vec![0.1, -0.4, 2.0]);
        let single = PulseSequence::new(4, vec![p.clone()]).unwrap();
        assert!(max_abs_diff(&compose(&single).unwrap(), &displacement(4, &p).unwrap()) < 1e-12);
        let back = PulseSequence::new(4, vec![p.clone(), p.inverse()]).unwrap();
        assert!(max_abs_diff(&compose(&back).unwrap(), &identity(4)) < 1e-10);
        assert!(max_abs_diff(&compose(&PulseSequence::<f64>::empty(3)).unwrap(), &identity(3)) < 1e-15);
    }

    #[test]
    fn compose_order_is_time_order() {
        let a = PulseParams::new(0.9, vec![0.1, 0.5]);
        let b = PulseParams::new(1.3, vec![-0.7, 0.2]);
        let seq = PulseSequence::new(3, vec![a.clone(), b.clone()]).unwrap();
        let expect = displacement(3, &b).unwrap() * displacement(3, &a).unwrap();
        assert!(max_abs_diff(&compose(&seq).unwrap(), &expect) < 1e-12);
        let rev = Convention { order: PulseOrder::Reverse, ..Default::default() };
        let expect_rev = displacement(3, &a).unwrap() * displacement(3, &b).unwrap();
        assert!(max_abs_diff(&compose_with(&seq, rev).unwrap(), &expect_rev) < 1e-12);
    }

    #[test]
    fn nonideal_matches_ideal_and_detects_miscalibration() {
        let d = 5;
        let seq = PulseSequence::new(
            d,
            vec![
                PulseParams::new(1.1, vec![0.3, -0.2, 1.0, 0.0]),
                PulseParams::new(-0.6, vec![2.0, 0.1, -1.0, 0.5]),
            ],
        )
        .unwrap();
        let tones = ToneSet::ideal(d, 3.7).unwrap();
        let ideal = compose(&seq).unwrap();
        assert!(max_abs_diff(&evolve_nonideal(&seq, &tones).unwrap(), &ideal) < 1e-10);

        let mut off = tones.clone();
        off.amplitudes[1] *= 1.1;
        let f = unitary_fidelity(&evolve_nonideal(&seq, &off).unwrap(), &ideal).unwrap();
        assert!(f < 1.0 - 1e-6);

        let mut det = tones.clone();
        det.detunings = vec![0.3, -0.1, 0.2, 0.05];
        let zero = PulseSequence::new(d, vec![PulseParams::uniform(d, 0.0, 1.0)]).unwrap();
        assert!(max_abs_diff(&evolve_nonideal(&zero, &det).unwrap(), &identity(d)) < 1e-15);
    }

    #[test]
    fn generic_f32_path() {
        let seq = PulseSequence::new(3, vec![PulseParams::new(1.0f32, vec![0.2, 0.4])]).unwrap();
        let u = compose(&seq).unwrap();
        assert!(is_unitary(&u, 1e-4));
    }

    proptest! {
        #[test]
        fn same_axis_additivity(t1 in -4.0f64..4.0, t2 in -4.0f64..4.0, phases in prop::collection::vec(-7.0f64..7.0, 5)) {
            let d = 6;
            let a = displacement(d, &PulseParams::new(t1, phases.clone())).unwrap();
            let b = displacement(d, &PulseParams::new(t2, phases.clone())).unwrap();
            let c = displacement(d, &PulseParams::new(t1 + t2, phases)).unwrap();
            prop_assert!(max_abs_diff(&(a * b), &c) < 1e-10);
        }

        #[test]
        fn hamiltonian_hermitian(amps in prop::collection::vec(0.0f64..5.0, 4), det in prop::collection::vec(-3.0f64..3.0, 4), ph in prop::collection::vec(-7.0f64..7.0, 4)) {
            let tones = ToneSet::new(5, amps, det, 1.0).unwrap();
            prop_assert!(is_hermitian(&rotating_hamiltonian(&tones, &ph).unwrap(), 1e-12));
        }

        #[test]
        fn compose_unitary(params in prop::collection::vec(-4.0f64..4.0, 5 * 7)) {
            let seq = PulseSequence::from_params(5, &params).unwrap();
            let k = seq.len() as f64;
            prop_assert!(is_unitary(&compose(&seq).unwrap(), k * 1e-10));
        }

        #[test]
        fn snap_is_diagonal_unitary(ph in prop::collection::vec(-7.0f64..7.0, 6)) {
            let s = snap(7, &ph).unwrap();
            prop_assert!(is_diagonal(&s, 0.0) && is_unitary(&s, 1e-12));
        }
    }
}

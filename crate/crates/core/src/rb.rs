//! Randomized benchmarking with the single-qubit Clifford group lifted to
//! the spin-(d-1)/2 representation.
//!
//! Every Clifford is written as `Z_α Y_β Z_γ` (Euler angles of its SU(2)
//! rotation). `Y_β` has `β ∈ {0, π/2, π}` for the whole group and is
//! realized with 0, 1 or 2 native pulses, each a displacement of angle π/2
//! with all tone phases equal. Z rotations are virtual: they are pushed
//! through later pulses as phase offsets, `D(φ) Z_f = Z_f D(φ - f)`, and
//! collected into a single frame rotation at the end.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{compose, snap};
use crate::error::{Error, Result};
use crate::linalg::{cplx, phase, spin_operators, unitary_fidelity, HermitianEigen};
use crate::noise::{noisy_sequence, DephasingModel};
use crate::optim::{fit_exp_decay, ExpDecayFit};
use crate::rng::task_rng;
use crate::{Complex, ComplexMatrix, PulseParams, PulseSequence, ToneSet};

/// Rotation angle of the native pulse.
pub const NATIVE_THETA: f64 = FRAC_PI_2;
/// Common tone phase of the native pulse; with no frame offset it is a
/// rotation about the y axis.
pub const NATIVE_PHASE: f64 = FRAC_PI_2;

type M2 = [[Complex; 2]; 2];

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut c = [[cplx(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `|Tr(A†B)|/2`
fn overlap2(a: &M2, b: &M2) -> f64 {
    let mut t = cplx(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            t += a[i][j].conj() * b[i][j];
        }
    }
    t.norm() / 2.0
}

/// Euler angles of a qubit rotation, `U ∝ Rz(α) Ry(β) Rz(γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Euler {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn euler(u: &M2) -> Euler {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let s = det.sqrt();
    let a = u[0][0] / s;
    let b = u[1][0] / s;
    let beta = 2.0 * b.norm().atan2(a.norm());
    let (alpha, gamma) = if b.norm() < 1e-12 {
        (-2.0 * a.arg(), 0.0)
    } else if a.norm() < 1e-12 {
        (2.0 * b.arg(), 0.0)
    } else {
        let sum = -2.0 * a.arg();
        let diff = 2.0 * b.arg();
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    Euler { alpha, beta, gamma }
}

/// The 24 single-qubit Cliffords, generated from H and S and deduplicated
/// up to phase; element 0 is the identity.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    qubit: Vec<M2>,
    euler: Vec<Euler>,
}

impl CliffordGroup {
    pub fn new() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let one = cplx(1.0, 0.0);
        let zero = cplx(0.0, 0.0);
        let id: M2 = [[one, zero], [zero, one]];
        let h: M2 = [[cplx(r, 0.0), cplx(r, 0.0)], [cplx(r, 0.0), cplx(-r, 0.0)]];
        let s: M2 = [[one, zero], [zero, cplx(0.0, 1.0)]];
        let mut qubit = vec![id];
        let mut frontier = 0;
        while frontier < qubit.len() {
            let cur = qubit[frontier];
            frontier += 1;
            for g in [&h, &s] {
                let next = mul2(g, &cur);
                if !qubit.iter().any(|q| overlap2(q, &next) > 1.0 - 1e-9) {
                    qubit.push(next);
                }
            }
        }
        assert_eq!(qubit.len(), 24, "single-qubit Clifford group has 24 elements");
        let euler = qubit.iter().map(euler).collect();
        Self { qubit, euler }
    }

    pub fn len(&self) -> usize {
        self.qubit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubit.is_empty()
    }

    pub fn euler(&self, index: usize) -> Euler {
        self.euler[index]
    }

    fn find(&self, u: &M2) -> usize {
        self.qubit
            .iter()
            .position(|q| overlap2(q, u) > 1.0 - 1e-9)
            .expect("group is closed")
    }

    /// Index of `C_b · C_a`.
    pub fn product(&self, a: usize, b: usize) -> usize {
        self.find(&mul2(&self.qubit[b], &self.qubit[a]))
    }

    pub fn inverse(&self, a: usize) -> usize {
        let q = &self.qubit[a];
        let adj: M2 = [[q[0][0].conj(), q[1][0].conj()], [q[0][1].conj(), q[1][1].conj()]];
        self.find(&adj)
    }

    /// Element undoing the sequence `indices` (applied first to last).
    pub fn sequence_inverse(&self, indices: &[usize]) -> usize {
        let total = indices.iter().fold(0, |acc, &c| self.product(acc, c));
        self.inverse(total)
    }
}

impl Default for CliffordGroup {
    fn default() -> Self {
        Self::new()
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// `exp(-iχ Jz)`
pub fn z_rotation(d: usize, chi: f64) -> Result<ComplexMatrix> {
    check_d(d)?;
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = phase(-chi * crate::linalg::jz_value(d, i));
    }
    Ok(m)
}

/// SNAP realization of [`z_rotation`], equal to it up to a global phase.
pub fn z_as_snap(d: usize, chi: f64) -> Result<ComplexMatrix> {
    snap(d, &vec![-chi; d - 1])
}

/// The 24 Cliffords lifted as `exp(-iαJz) exp(-iβJy) exp(-iγJz)`.
pub fn clifford_su2_embedded(d: usize) -> Result<Vec<ComplexMatrix>> {
    let group = CliffordGroup::new();
    let jy = HermitianEigen::new(&spin_operators::<f64>(d)?.y, 1e-10)?;
    (0..group.len())
        .map(|i| {
            let e = group.euler(i);
            Ok(z_rotation(d, e.alpha)? * jy.propagator(e.beta) * z_rotation(d, e.gamma)?)
        })
        .collect()
}

/// Native pulses plus the virtual Z rotation left over at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSequence {
    pub pulses: PulseSequence,
    /// The target equals `exp(-i frame Jz) · compose(pulses)` up to phase.
    pub frame: f64,
}

impl CompiledSequence {
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        Ok(z_rotation(self.pulses.d, self.frame)? * compose(&self.pulses)?)
    }
}

fn native_count(beta: f64) -> Result<usize> {
    let k = beta / FRAC_PI_2;
    let r = k.round();
    if (k - r).abs() > 1e-9 || !(0.0..=2.0).contains(&r) {
        return Err(Error::Contract(format!("Euler angle β = {beta} is not a multiple of π/2 in [0, π]")));
    }
    Ok(r as usize)
}

/// Compiles Cliffords (applied first to last) into native pulses with frame
/// tracking.
pub fn compile_cliffords(d: usize, group: &CliffordGroup, indices: &[usize]) -> Result<CompiledSequence> {
    check_d(d)?;
    let mut frame = 0.0;
    let mut pulses = vec![];
    for &i in indices {
        if i >= group.len() {
            return Err(Error::Contract(format!("Clifford index {i} out of range")));
        }
        let e = group.euler(i);
        frame += e.gamma;
        for _ in 0..native_count(e.beta)? {
            pulses.push(PulseParams::uniform(d, NATIVE_THETA, NATIVE_PHASE - frame));
        }
        frame += e.alpha;
    }
    Ok(CompiledSequence {
        pulses: PulseSequence::new(d, pulses)?,
        frame: frame % (4.0 * PI),
    })
}

pub fn decompose_clifford(d: usize, index: usize) -> Result<CompiledSequence> {
    compile_cliffords(d, &CliffordGroup::new(), &[index])
}

/// Average native pulses per Clifford over the group.
pub fn mean_pulses_per_clifford(group: &CliffordGroup) -> f64 {
    let total: usize = (0..group.len())
        .map(|i| native_count(group.euler(i).beta).expect("Clifford Euler angles"))
        .sum();
    total as f64 / group.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub include_inverse: bool,
}

fn default_true() -> bool {
    true
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.len() < 3 {
            return Err(Error::Fit(format!(
                "need at least 3 sequence lengths to fit A·p^m + B, got {}",
                self.lengths.len()
            )));
        }
        if self.lengths[0] == 0 || self.lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("RB lengths must be positive and increasing".into()));
        }
        if self.n_sequences == 0 {
            return Err(Error::Config("n_sequences must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random Clifford indices of one RB sequence, with the inverting element
/// appended when requested.
pub fn random_sequence(group: &CliffordGroup, m: usize, include_inverse: bool, seed: u64, task: u64) -> Vec<usize> {
    let mut rng = task_rng(seed, task);
    let mut seq: Vec<usize> = (0..m).map(|_| rng.gen_range(0..group.len())).collect();
    if include_inverse {
        seq.push(group.sequence_inverse(&seq));
    }
    seq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbPoint {
    pub m: usize,
    pub mean_survival: f64,
    /// Standard error of the mean over sequences.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub points: Vec<RbPoint>,
    pub fit: Option<ExpDecayFit>,
    pub mean_pulses_per_clifford: f64,
    /// `p^(1/n̄)`
    pub per_pulse_fidelity: Option<f64>,
}

/// Overlap of the simulated final state with the noiseless one. With the
/// inverting element included this is the population of `|0⟩`.
fn survival(seq: &CompiledSequence, tones: &ToneSet, model: &DephasingModel) -> Result<f64> {
    let d = seq.pulses.d;
    let mut rho0 = ComplexMatrix::zeros(d, d);
    rho0[(0, 0)] = cplx(1.0, 0.0);
    let rho = noisy_sequence(&rho0, &seq.pulses, tones, model)?;
    let ideal = compose(&seq.pulses)?.column(0).into_owned();
    Ok(ideal.dotc(&(&rho * &ideal)).re)
}

pub fn rb_run(cfg: &RbConfig, d: usize, tones: &ToneSet, model: &DephasingModel) -> Result<RbResult> {
    cfg.validate()?;
    if tones.d != d || model.d() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: tones.d });
    }
    let group = CliffordGroup::new();
    let tasks: Vec<(usize, usize)> = (0..cfg.lengths.len())
        .flat_map(|li| (0..cfg.n_sequences).map(move |s| (li, s)))
        .collect();
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(li, s)| {
            let task = (li * cfg.n_sequences + s) as u64;
            let idx = random_sequence(&group, cfg.lengths[li], cfg.include_inverse, cfg.seed, task);
            survival(&compile_cliffords(d, &group, &idx)?, tones, model)
        })
        .collect::<Result<_>>()?;
    let n = cfg.n_sequences as f64;
    let points: Vec<RbPoint> = cfg
        .lengths
        .iter()
        .enumerate()
        .map(|(li, &m)| {
            let v = &values[li * cfg.n_sequences..(li + 1) * cfg.n_sequences];
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            RbPoint {
                m,
                mean_survival: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect();
    let ms: Vec<f64> = points.iter().map(|p| p.m as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_survival).collect();
    let fit = fit_exp_decay(&ms, &ys);
    let nbar = mean_pulses_per_clifford(&group);
    Ok(RbResult {
        per_pulse_fidelity: fit.map(|f| f.p.powf(1.0 / nbar)),
        fit,
        mean_pulses_per_clifford: nbar,
        points,
    })
}

/// Recomposition fidelity of one Clifford from its native pulses.
pub fn recomposition_fidelity(d: usize, index: usize) -> Result<f64> {
    let target = &clifford_su2_embedded(d)?[index];
    unitary_fidelity(target, &decompose_clifford(d, index)?.unitary()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_at_d2_is_the_qubit_group() {
        let g = CliffordGroup::new();
        let lifted = clifford_su2_embedded(2).unwrap();
        // Level 0 is spin down, so the lift is the qubit group conjugated
        // by X; as a set it is the same group.
        for l in &lifted {
            let m: M2 = [[l[(0, 0)], l[(0, 1)]], [l[(1, 0)], l[(1, 1)]]];
            assert_eq!(g.qubit.iter().filter(|q| overlap2(q, &m) > 1.0 - 1e-12).count(), 1);
        }
        assert!(crate::linalg::max_abs_diff(&lifted[0], &ComplexMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn closure_and_inverses() {
        let g = CliffordGroup::new();
        for d in [3, 6] {
            let c = clifford_su2_embedded(d).unwrap();
            for a in 0..24 {
                for b in 0..24 {
                    let p = &c[b] * &c[a];
                    assert!(unitary_fidelity(&c[g.product(a, b)], &p).unwrap() > 1.0 - 1e-9);
                }
                let inv = &c[g.inverse(a)] * &c[a];
                assert!(unitary_fidelity(&inv, &ComplexMatrix::identity(d, d)).unwrap() > 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn decompositions() {
        assert!(decompose_clifford(5, 0).unwrap().pulses.is_empty());
        let g = CliffordGroup::new();
        assert!((mean_pulses_per_clifford(&g) - 1.0).abs() < 1e-12);
        for d in 2..=8 {
            for i in 0..24 {
                let n = decompose_clifford(d, i).unwrap().pulses.len();
                assert!(n <= 2);
                assert!(recomposition_fidelity(d, i).unwrap() > 1.0 - 1e-8, "d={d} index={i}");
            }
        }
    }

    #[test]
    fn virtual_z_is_a_snap() {
        let a = z_rotation(6, 0.83).unwrap();
        let b = z_as_snap(6, 0.83).unwrap();
        assert!(unitary_fidelity(&a, &b).unwrap() > 1.0 - 1e-14);
    }

    #[test]
    fn noiseless_rb_is_flat() {
        let d = 3;
        let tones = ToneSet::ideal(d, 10.0).unwrap();
        let cfg = RbConfig { lengths: vec![1, 5, 20], n_sequences: 3, seed: 4, include_inverse: true };
        let r = rb_run(&cfg, d, &tones, &DephasingModel::none(d)).unwrap();
        for p in &r.points {
            assert!((p.mean_survival - 1.0).abs() < 1e-8);
        }
        assert!((r.fit.unwrap().p - 1.0).abs() < 1e-4);
        let short = RbConfig { lengths: vec![1, 2], ..cfg };
        assert!(matches!(rb_run(&short, d, &tones, &DephasingModel::none(d)), Err(Error::Fit(_))));
    }
}

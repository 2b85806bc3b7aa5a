//! Grover search on a single qudit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::compose;
use crate::error::{Error, Result};
use crate::linalg::{cplx, is_unitary, phase, sso};
use crate::noise::{noisy_sequence, DephasingModel};
use crate::optim::linear_fit;
use crate::pulse_table::{Operation, PulseTable};
use crate::{ComplexMatrix, ComplexVector, ProbabilityDistribution, PulseSequence, StateVector, ToneSet};

/// Ratio points with an ideal success probability below this are left out
/// of the per-iteration fit; near the zeros of the Grover oscillation the
/// ratio is dominated by noise-floor population.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.2;

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

pub fn oracle_matrix(d: usize, m: usize) -> Result<ComplexMatrix> {
    check_d(d)?;
    if m >= d {
        return Err(Error::LevelOutOfRange { index: m, d });
    }
    let mut o = ComplexMatrix::identity(d, d);
    o[(m, m)] = cplx(-1.0, 0.0);
    Ok(o)
}

/// `e^{iπ/d}` for even `d`, 1 for odd.
pub fn reflection_phase(d: usize) -> crate::Complex {
    if d % 2 == 0 {
        phase(std::f64::consts::PI / d as f64)
    } else {
        cplx(1.0, 0.0)
    }
}

/// `c (2|s⟩⟨s| - I)`, scaled into SU(d).
pub fn reflection_matrix(d: usize) -> Result<ComplexMatrix> {
    check_d(d)?;
    let s = StateVector::uniform(d)?;
    let a = s.amplitudes();
    let r = a * a.adjoint() * cplx(2.0, 0.0) - ComplexMatrix::identity(d, d);
    Ok(r * reflection_phase(d))
}

/// `sin²[(2N+1) arcsin(1/√d)]`
pub fn asp(d: usize, n: usize) -> f64 {
    let a = (1.0 / (d as f64).sqrt()).asin();
    ((2 * n + 1) as f64 * a).sin().powi(2)
}

pub fn optimal_iterations(d: usize) -> usize {
    let guess = std::f64::consts::PI * (d as f64).sqrt() / 4.0 - 0.5;
    let lo = guess.floor().max(0.0) as usize;
    let candidates = lo.saturating_sub(1)..=lo + 2;
    let mut best = (0usize, f64::NEG_INFINITY);
    for n in candidates {
        let p = asp(d, n);
        if p > best.1 + 1e-12 {
            best = (n, p);
        }
    }
    best.0
}

/// One block of a circuit: a pulse sequence, or an exact unitary applied
/// instantaneously.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Pulses(PulseSequence),
    Exact(ComplexMatrix),
}

impl Stage {
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        match self {
            Self::Pulses(s) => compose(s),
            Self::Exact(u) => Ok(u.clone()),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Pulses(s) => s.d,
            Self::Exact(u) => u.nrows(),
        }
    }

    pub fn n_pulses(&self) -> usize {
        match self {
            Self::Pulses(s) => s.len(),
            Self::Exact(_) => 0,
        }
    }

    fn apply_pure(&self, psi: &ComplexVector) -> Result<ComplexVector> {
        Ok(self.unitary()? * psi)
    }

    fn apply_noisy(&self, rho: &ComplexMatrix, noise: &NoiseBackend) -> Result<ComplexMatrix> {
        match self {
            Self::Pulses(s) => noisy_sequence(rho, s, &noise.tones, &noise.model),
            Self::Exact(u) => Ok(u * rho * u.adjoint()),
        }
    }
}

/// Physical tones (for pulse durations) plus the dephasing model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBackend {
    pub tones: ToneSet,
    pub model: DephasingModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverCircuit {
    pub d: usize,
    pub prep: Stage,
    pub oracles: BTreeMap<usize, Stage>,
    pub reflection: Stage,
    pub n_iterations: usize,
}

impl GroverCircuit {
    /// Circuit built from the analytic matrices; the prep is any unitary
    /// mapping `|0⟩` to the uniform superposition.
    pub fn analytic(d: usize, n_iterations: usize) -> Result<Self> {
        check_d(d)?;
        let oracles = (0..d)
            .map(|m| oracle_matrix(d, m).map(|o| (m, Stage::Exact(o))))
            .collect::<Result<_>>()?;
        Ok(Self {
            d,
            prep: Stage::Exact(uniform_prep(d)?),
            oracles,
            reflection: Stage::Exact(reflection_matrix(d)?),
            n_iterations,
        })
    }

    /// Circuit from a pulse table with `Equal Sup.`, `Reflection` and
    /// `Mark k` operations.
    pub fn from_table(table: &PulseTable, n_iterations: usize) -> Result<Self> {
        let get = |op: Operation| {
            table
                .sequence_for(&op)
                .ok_or_else(|| Error::Contract(format!("pulse table has no `{op}` sequence")))
        };
        let prep = Stage::Pulses(get(Operation::EqualSuperposition)?);
        let reflection = Stage::Pulses(get(Operation::Reflection)?);
        let mut oracles = BTreeMap::new();
        for name in table.operation_names() {
            if let Operation::Mark(k) = Operation::parse(&name) {
                if k >= table.d {
                    return Err(Error::LevelOutOfRange { index: k, d: table.d });
                }
                oracles.insert(k, Stage::Pulses(table.sequence(&name).expect("listed name")));
            }
        }
        let c = Self {
            d: table.d,
            prep,
            oracles,
            reflection,
            n_iterations,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_iterations(&self, n: usize) -> Self {
        Self {
            n_iterations: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_d(self.d)?;
        for st in std::iter::once(&self.prep)
            .chain(std::iter::once(&self.reflection))
            .chain(self.oracles.values())
        {
            if st.d() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, actual: st.d() });
            }
            if let Stage::Exact(u) = st {
                if !is_unitary(u, 1e-9) {
                    return Err(Error::Contract("exact circuit stage is not unitary".into()));
                }
            }
        }
        Ok(())
    }

    pub fn marks(&self) -> Vec<usize> {
        self.oracles.keys().copied().collect()
    }

    fn stages(&self, marked: usize) -> Result<Vec<&Stage>> {
        let oracle = self.oracles.get(&marked).ok_or_else(|| {
            Error::Contract(format!("circuit has no oracle for level {marked}"))
        })?;
        let mut st = vec![&self.prep];
        for _ in 0..self.n_iterations {
            st.push(oracle);
            st.push(&self.reflection);
        }
        Ok(st)
    }

    /// Number of drive pulses in one oracle + reflection iteration.
    pub fn pulses_per_iteration(&self, marked: usize) -> usize {
        self.oracles.get(&marked).map_or(0, Stage::n_pulses) + self.reflection.n_pulses()
    }

    /// Final pure state with no noise.
    pub fn ideal_state(&self, marked: usize) -> Result<StateVector> {
        let mut psi = StateVector::basis(self.d, 0)?.amplitudes().clone();
        for st in self.stages(marked)? {
            psi = st.apply_pure(&psi)?;
        }
        StateVector::normalized(psi)
    }
}

/// Householder-style unitary sending `|0⟩` to the uniform superposition.
pub fn uniform_prep(d: usize) -> Result<ComplexMatrix> {
    // Reflection across the bisector of |0⟩ and |s⟩, then fixed so U|0⟩ = |s⟩.
    let s = StateVector::uniform(d)?.amplitudes().clone();
    let mut e0 = ComplexVector::zeros(d);
    e0[0] = cplx(1.0, 0.0);
    let w = &e0 - &s;
    let nw = w.norm();
    if nw < 1e-15 {
        return Ok(ComplexMatrix::identity(d, d));
    }
    let w = w / cplx(nw, 0.0);
    Ok(ComplexMatrix::identity(d, d) - &w * w.adjoint() * cplx(2.0, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroverOutcome {
    pub marked: usize,
    pub distribution: ProbabilityDistribution,
    pub asp_measured: f64,
    pub sso_vs_ideal: f64,
}

fn clean_probs(p: Vec<f64>) -> Result<ProbabilityDistribution> {
    let p: Vec<f64> = p.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let total: f64 = p.iter().sum();
    ProbabilityDistribution::new(p.into_iter().map(|x| x / total).collect())
}

pub fn run(circuit: &GroverCircuit, marked: usize, noise: Option<&NoiseBackend>) -> Result<GroverOutcome> {
    let ideal = circuit.ideal_state(marked)?.probabilities();
    let distribution = match noise {
        None => ideal.clone(),
        Some(nb) => {
            let d = circuit.d;
            let mut rho = ComplexMatrix::zeros(d, d);
            rho[(0, 0)] = cplx(1.0, 0.0);
            for st in circuit.stages(marked)? {
                rho = st.apply_noisy(&rho, nb)?;
            }
            clean_probs((0..d).map(|i| rho[(i, i)].re).collect())?
        }
    };
    Ok(GroverOutcome {
        marked,
        asp_measured: distribution.get(marked),
        sso_vs_ideal: sso(&ideal, &distribution)?,
        distribution,
    })
}

/// One outcome per oracle in the circuit, ordered by marked level.
pub fn mark_sweep(circuit: &GroverCircuit, noise: Option<&NoiseBackend>) -> Result<Vec<GroverOutcome>> {
    circuit
        .marks()
        .into_par_iter()
        .map(|m| run(circuit, m, noise))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationPoint {
    pub n: usize,
    pub p_measured: f64,
    /// Same circuit without noise.
    pub p_ideal: f64,
    /// `asp(d, N)`
    pub p_formula: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSweep {
    pub marked: Vec<usize>,
    pub points: Vec<IterationPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// `1 + slope`
    pub per_iteration_fidelity: f64,
    pub fitted_points: usize,
}

/// Success probability for `N = 1..=n_max`, averaged over `marks`, and the
/// straight-line fit of `p_measured / p_ideal` against `N` over the points
/// where `p_ideal >= threshold`.
pub fn iteration_sweep(
    circuit: &GroverCircuit,
    marks: &[usize],
    n_max: usize,
    noise: Option<&NoiseBackend>,
    threshold: f64,
) -> Result<IterationSweep> {
    if n_max < 2 {
        return Err(Error::Contract(format!("iteration sweep needs N_max >= 2, got {n_max}")));
    }
    if marks.is_empty() {
        return Err(Error::Contract("iteration sweep needs at least one marked level".into()));
    }
    let tasks: Vec<(usize, usize)> = (1..=n_max).flat_map(|n| marks.iter().map(move |&m| (n, m))).collect();
    let results: Vec<(f64, f64)> = tasks
        .par_iter()
        .map(|&(n, m)| {
            let c = circuit.with_iterations(n);
            let measured = run(&c, m, noise)?.asp_measured;
            let ideal = c.ideal_state(m)?.probabilities().get(m);
            Ok((measured, ideal))
        })
        .collect::<Result<_>>()?;
    let k = marks.len() as f64;
    let mut points = vec![];
    for (i, n) in (1..=n_max).enumerate() {
        let chunk = &results[i * marks.len()..(i + 1) * marks.len()];
        points.push(IterationPoint {
            n,
            p_measured: chunk.iter().map(|r| r.0).sum::<f64>() / k,
            p_ideal: chunk.iter().map(|r| r.1).sum::<f64>() / k,
            p_formula: asp(circuit.d, n),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.p_ideal >= threshold)
        .map(|p| (p.n as f64, p.p_measured / p.p_ideal))
        .unzip();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::Fit(format!("only {} sweep points above threshold {threshold}", xs.len())))?;
    Ok(IterationSweep {
        marked: marks.to_vec(),
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        per_iteration_fidelity: 1.0 + fit.slope,
        fitted_points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn det(m: &ComplexMatrix) -> crate::Complex {
        m.clone().determinant()
    }

    #[test]
    fn oracle_basics() {
        let o = oracle_matrix(5, 2).unwrap();
        assert_eq!(o[(2, 2)], cplx(-1.0, 0.0));
        assert_eq!(o[(1, 1)], cplx(1.0, 0.0));
        assert!(max_abs_diff(&(&o * &o), &ComplexMatrix::identity(5, 5)) == 0.0);
        assert!(matches!(oracle_matrix(3, 3), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn reflection_in_su_d() {
        for d in 2..=8 {
            let r = reflection_matrix(d).unwrap();
            assert!((det(&r) - cplx(1.0, 0.0)).norm() < 1e-10, "d={d}");
            let s = StateVector::uniform(d).unwrap().amplitudes().clone();
            assert!((&r * &s - &s * reflection_phase(d)).norm() < 1e-12);
        }
    }

    #[test]
    fn asp_values() {
        assert!((asp(5, 1) - 0.968).abs() < 1e-12);
        assert!((asp(8, 1) - 0.78125).abs() < 1e-12);
        assert!((asp(4, 1) - 1.0).abs() < 1e-12);
        assert_eq!(optimal_iterations(4), 1);
        assert_eq!(optimal_iterations(5), 1);
        assert_eq!(optimal_iterations(8), 2);
        for d in 2..=8 {
            let best = (0..=if d == 8 { 4 } else { 3 }).max_by(|&a, &b| asp(d, a).total_cmp(&asp(d, b))).unwrap();
            assert!((asp(d, optimal_iterations(d)) - asp(d, best)).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn prep_hits_uniform() {
        for d in 2..=8 {
            let u = uniform_prep(d).unwrap();
            assert!(is_unitary(&u, 1e-12));
            let out = u.column(0).into_owned();
            let s = StateVector::uniform(d).unwrap();
            assert!((out - s.amplitudes()).norm() < 1e-12);
        }
    }

    #[test]
    fn step_stays_in_plane() {
        for d in 3..=8 {
            for m in [0, d / 2, d - 1] {
                let g = reflection_matrix(d).unwrap() * oracle_matrix(d, m).unwrap();
                let s = StateVector::uniform(d).unwrap().amplitudes().clone();
                let mut e = ComplexVector::zeros(d);
                e[m] = cplx(1.0, 0.0);
                let psi = (&s * cplx(0.3, 0.1) + &e * cplx(-0.7, 0.4)).normalize();
                let out = &g * &psi;
                // Orthonormal basis of span{e, s}.
                let s_perp = (&s - &e * e.dotc(&s)).normalize();
                let inplane = &e * e.dotc(&out) + &s_perp * s_perp.dotc(&out);
                assert!((out - inplane).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn analytic_run_matches_formula() {
        for d in 2..=8 {
            for n in 0..=5 {
                let c = GroverCircuit::analytic(d, n).unwrap();
                for m in 0..d {
                    let out = run(&c, m, None).unwrap();
                    assert!((out.asp_measured - asp(d, n)).abs() < 1e-9, "d={d} N={n} m={m}");
                    assert!((out.sso_vs_ideal - 1.0).abs() < 1e-9);
                }
            }
        }
        let c0 = GroverCircuit::analytic(5, 0).unwrap();
        for p in run(&c0, 3, None).unwrap().distribution.probs() {
            assert!((p - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn sweeps() {
        let c = GroverCircuit::analytic(2, 1).unwrap();
        let rows = mark_sweep(&c, None).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.asp_measured - 0.5).abs() < 1e-9);
            assert!((r.distribution.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let c = GroverCircuit::analytic(5, 1).unwrap();
        let sw = iteration_sweep(&c, &[0, 2], 6, None, DEFAULT_RATIO_THRESHOLD).unwrap();
        assert!((sw.per_iteration_fidelity - 1.0).abs() < 1e-6);
        assert!(sw.points.iter().all(|p| (p.p_ideal - p.p_formula).abs() < 1e-9));
        assert!(iteration_sweep(&c, &[0], 1, None, 0.2).is_err());
    }

    #[test]
    fn missing_oracle() {
        let mut c = GroverCircuit::analytic(3, 1).unwrap();
        c.oracles.remove(&1);
        assert!(run(&c, 1, None).is_err());
    }
}

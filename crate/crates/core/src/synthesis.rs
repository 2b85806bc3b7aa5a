//! Pulse-sequence synthesis by gradient descent, and verification of
//! published pulse tables against the analytic Grover targets.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{compose_kernel, Convention, DisplacementKernel};
use crate::error::{Error, Result};
use crate::grover::{oracle_matrix, reflection_matrix};
use crate::linalg::{is_diagonal, is_unitary, trace_overlap, unitary_fidelity};
use crate::pulse_table::{Operation, PulseTable};
use crate::rng::task_rng;
use crate::{ComplexMatrix, ComplexVector, PulseSequence, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Match a unitary up to global phase.
    FullUnitary(ComplexMatrix),
    /// Map `input` to `output` up to phase; other inputs are unconstrained.
    StateMap { input: StateVector, output: StateVector },
    /// Diagonal target; scored like a full unitary.
    DiagonalUpToPhase(ComplexMatrix),
}

impl TargetSpec {
    pub fn full_unitary(u: ComplexMatrix) -> Result<Self> {
        if !is_unitary(&u, 1e-9) {
            return Err(Error::Contract("full-unitary target is not unitary".into()));
        }
        Ok(Self::FullUnitary(u))
    }

    pub fn diagonal(u: ComplexMatrix) -> Result<Self> {
        if !is_diagonal(&u, 1e-12) || !is_unitary(&u, 1e-9) {
            return Err(Error::Contract("target is not a diagonal unitary".into()));
        }
        Ok(Self::DiagonalUpToPhase(u))
    }

    pub fn state_map(input: StateVector, output: StateVector) -> Result<Self> {
        if input.dim() != output.dim() {
            return Err(Error::DimensionMismatch { expected: input.dim(), actual: output.dim() });
        }
        Ok(Self::StateMap { input, output })
    }

    /// State map from `|0⟩`.
    pub fn state_prep(output: StateVector) -> Result<Self> {
        Self::state_map(StateVector::basis(output.dim(), 0)?, output)
    }

    /// Oracle action on the uniform superposition: `|s⟩ → O_m|s⟩`.
    pub fn oracle_on_uniform(d: usize, m: usize) -> Result<Self> {
        let s = StateVector::uniform(d)?;
        let out = s.evolve(&oracle_matrix(d, m)?)?;
        Self::state_map(s, out)
    }

    pub fn d(&self) -> usize {
        match self {
            Self::FullUnitary(u) | Self::DiagonalUpToPhase(u) => u.nrows(),
            Self::StateMap { input, .. } => input.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::FullUnitary(_) => "full_unitary",
            Self::StateMap { .. } => "state_map",
            Self::DiagonalUpToPhase(_) => "diagonal_up_to_phase",
        }
    }

    /// Loss of an already composed unitary.
    pub fn infidelity_of(&self, u: &ComplexMatrix) -> f64 {
        match self {
            Self::FullUnitary(t) | Self::DiagonalUpToPhase(t) => {
                let d = t.nrows() as f64;
                (1.0 - trace_overlap(t, u).norm_sqr() / (d * d)).max(0.0)
            }
            Self::StateMap { input, output } => {
                let v = u * input.amplitudes();
                (1.0 - output.amplitudes().dotc(&v).norm_sqr()).max(0.0)
            }
        }
    }
}

fn check_target(seq: &PulseSequence, target: &TargetSpec) -> Result<()> {
    if seq.d != target.d() {
        return Err(Error::DimensionMismatch { expected: target.d(), actual: seq.d });
    }
    Ok(())
}

pub fn infidelity(seq: &PulseSequence, target: &TargetSpec) -> Result<f64> {
    check_target(seq, target)?;
    let kernel = DisplacementKernel::new(seq.d)?;
    Ok(target.infidelity_of(&compose_kernel(&kernel, seq, Convention::default())))
}

/// Loss as a function of the flat parameter vector `[θ_1, φ_1.., θ_2, ..]`.
struct Objective<'a> {
    kernel: DisplacementKernel<f64>,
    target: &'a TargetSpec,
    d: usize,
}

impl<'a> Objective<'a> {
    fn new(target: &'a TargetSpec) -> Result<Self> {
        let d = target.d();
        Ok(Self {
            kernel: DisplacementKernel::new(d)?,
            target,
            d,
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self.target {
            TargetSpec::StateMap { input, output } => {
                let mut v: ComplexVector = input.amplitudes().clone();
                for c in x.chunks(self.d) {
                    v = self.kernel.eval(c[0], &c[1..], 1.0) * v;
                }
                (1.0 - output.amplitudes().dotc(&v).norm_sqr()).max(0.0)
            }
            _ => {
                let mut u = ComplexMatrix::identity(self.d, self.d);
                for c in x.chunks(self.d) {
                    u = self.kernel.eval(c[0], &c[1..], 1.0) * u;
                }
                self.target.infidelity_of(&u)
            }
        }
    }

    /// Central differences. Each pulse is perturbed in isolation, with the
    /// rest of the sequence folded into a fixed environment so a probe costs
    /// one pulse evaluation instead of a full composition.
    fn gradient(&self, x: &[f64], h: f64) -> Vec<f64> {
        let d = self.d;
        let pulses: Vec<ComplexMatrix> = x.chunks(d).map(|c| self.kernel.eval(c[0], &c[1..], 1.0)).collect();
        let n = pulses.len();
        // prefix[i] = D_{i-1}..D_0, suffix[i] = D_{n-1}..D_{i+1}
        let mut prefix = vec![ComplexMatrix::identity(d, d)];
        for p in &pulses[..n - 1] {
            let next = p * prefix.last().expect("non-empty");
            prefix.push(next);
        }
        let mut suffix = vec![ComplexMatrix::identity(d, d); n];
        for i in (0..n - 1).rev() {
            suffix[i] = &suffix[i + 1] * &pulses[i + 1];
        }
        let mut g = vec![0.0; x.len()];
        let mut c = vec![0.0; d];
        for i in 0..n {
            let local = self.local_loss(&prefix[i], &suffix[i]);
            c.copy_from_slice(&x[i * d..(i + 1) * d]);
            for j in 0..d {
                let x0 = c[j];
                c[j] = x0 + h;
                let up = local(&self.kernel.eval(c[0], &c[1..], 1.0));
                c[j] = x0 - h;
                let dn = local(&self.kernel.eval(c[0], &c[1..], 1.0));
                c[j] = x0;
                g[i * d + j] = (up - dn) / (2.0 * h);
            }
        }
        g
    }

    /// Loss as a function of one pulse matrix with everything before it in
    /// `before` and everything after it in `after`.
    fn local_loss(&self, before: &ComplexMatrix, after: &ComplexMatrix) -> Box<dyn Fn(&ComplexMatrix) -> f64 + '_> {
        match self.target {
            TargetSpec::StateMap { input, output } => {
                let b = before * input.amplitudes();
                let a = after.adjoint() * output.amplitudes();
                Box::new(move |p| (1.0 - a.dotc(&(p * &b)).norm_sqr()).max(0.0))
            }
            TargetSpec::FullUnitary(t) | TargetSpec::DiagonalUpToPhase(t) => {
                // Tr(T† A P B) = Σ_jk P_jk M_kj with M = B T† A
                let mt = (before * t.adjoint() * after).transpose();
                let d2 = (self.d * self.d) as f64;
                Box::new(move |p| {
                    let tr: crate::Complex = p.iter().zip(mt.iter()).map(|(a, b)| a * b).sum();
                    (1.0 - tr.norm_sqr() / d2).max(0.0)
                })
            }
        }
    }
}

/// Central finite-difference gradient over all pulse parameters, ordered
/// as in [`PulseSequence::to_params`].
pub fn gradient(seq: &PulseSequence, target: &TargetSpec, grad_step: f64) -> Result<Vec<f64>> {
    check_target(seq, target)?;
    if !(grad_step > 0.0) {
        return Err(Error::Contract(format!("gradient step {grad_step} must be positive")));
    }
    Ok(Objective::new(target)?.gradient(&seq.to_params(), grad_step))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub n_pulses: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Initial line-search step.
    pub step: f64,
    pub grad_step: f64,
    pub tol: f64,
    pub seed: u64,
    /// Restarts run concurrently in groups of this size; the search stops
    /// after the first group containing a converged restart.
    pub batch: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            n_pulses: 2,
            restarts: 20,
            max_iters: 5000,
            step: 1.0,
            grad_step: 1e-6,
            tol: 1e-6,
            seed: 0,
            batch: 4,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 || self.restarts == 0 || self.max_iters == 0 || self.batch == 0 {
            return Err(Error::Config("n_pulses, restarts, max_iters and batch must be positive".into()));
        }
        if !(self.step > 0.0) || !(self.grad_step > 0.0) {
            return Err(Error::Config("step and grad_step must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol = {} must lie in (0, 1)", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub sequence: PulseSequence,
    pub infidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Loss after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
    /// Index of the restart that produced this result.
    pub restart: usize,
    pub restarts_run: usize,
}

fn initial_point(d: usize, n_pulses: usize, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = task_rng(seed, restart as u64);
    let mut x = Vec::with_capacity(n_pulses * d);
    for _ in 0..n_pulses {
        // θ in (0, π]
        x.push(PI - rng.gen::<f64>() * PI);
        for _ in 1..d {
            x.push(rng.gen_range(-PI..PI));
        }
    }
    x
}

struct Descent {
    x: Vec<f64>,
    fx: f64,
    iterations: usize,
    trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const STALL_WINDOW: usize = 50;
const STALL_DECREASE: f64 = 1e-12;

fn descend(obj: &Objective, mut x: Vec<f64>, cfg: &SynthesisConfig) -> Descent {
    let mut fx = obj.eval(&x);
    let mut trace = vec![fx];
    let mut step = cfg.step;
    let mut iterations = 0;
    while iterations < cfg.max_iters && fx > cfg.tol {
        iterations += 1;
        let g = obj.gradient(&x, cfg.grad_step);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let ft = obj.eval(&trial);
            if ft <= fx - ARMIJO * step * g2 {
                x = trial;
                fx = ft;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(fx);
        let n = trace.len();
        if n > STALL_WINDOW && trace[n - 1 - STALL_WINDOW] - fx < STALL_DECREASE {
            break;
        }
    }
    Descent { x, fx, iterations, trace }
}

/// Best-of-restarts gradient descent with backtracking line search.
pub fn synthesize(target: &TargetSpec, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    cfg.validate()?;
    let d = target.d();
    let obj = Objective::new(target)?;
    let mut best: Option<(usize, Descent)> = None;
    let mut run = 0;
    while run < cfg.restarts {
        let batch: Vec<usize> = (run..(run + cfg.batch).min(cfg.restarts)).collect();
        run += batch.len();
        let results: Vec<(usize, Descent)> = batch
            .par_iter()
            .map(|&r| (r, descend(&obj, initial_point(d, cfg.n_pulses, cfg.seed, r), cfg)))
            .collect();
        for (r, res) in results {
            // Results arrive in restart order, so strict `<` keeps the
            // lowest index among ties.
            if best.as_ref().map_or(true, |(_, b)| res.fx < b.fx) {
                best = Some((r, res));
            }
        }
        if best.as_ref().is_some_and(|(_, b)| b.fx <= cfg.tol) {
            break;
        }
    }
    let (restart, b) = best.expect("at least one restart");
    Ok(SynthesisResult {
        sequence: PulseSequence::from_params(d, &b.x)?,
        infidelity: b.fx,
        iterations: b.iterations,
        converged: b.fx <= cfg.tol,
        trace: b.trace,
        restart,
        restarts_run: run,
    })
}

/// What a table operation is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// `|⟨s|U|0⟩|²`
    PrepState,
    /// `|⟨O s|U s⟩|²`; the full-unitary value is kept as a diagnostic.
    OracleOnUniform,
    /// `|Tr(R†U)|/d`
    Unitary,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionFidelity {
    pub convention: String,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationEntry {
    pub operation: String,
    pub fidelity: Option<f64>,
    pub convention: Option<String>,
    pub n_pulses: usize,
    pub scoring: Scoring,
    pub per_convention: Vec<ConventionFidelity>,
    /// `|Tr(O†U)|/d` under the winning convention, for oracle rows.
    pub full_unitary_fidelity: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub d: usize,
    pub entries: Vec<VerificationEntry>,
    /// Convention with the highest worst-row fidelity.
    pub winner: Option<String>,
    /// True when every scored row is best (within 1e-9) under `winner`.
    pub single_winner: bool,
}

impl VerificationReport {
    pub fn winning_convention(&self) -> Option<Convention> {
        let w = self.winner.as_deref()?;
        Convention::ALL.into_iter().find(|c| c.label() == w)
    }

    pub fn entry(&self, op: &Operation) -> Option<&VerificationEntry> {
        self.entries.iter().find(|e| Operation::parse(&e.operation) == *op)
    }
}

fn score(kind: Scoring, op: &Operation, d: usize, u: &ComplexMatrix) -> Result<f64> {
    let s = StateVector::uniform(d)?;
    Ok(match (kind, op) {
        (Scoring::PrepState, _) => {
            let out = StateVector::basis(d, 0)?.evolve(u)?;
            out.overlap_sq(&s)
        }
        (Scoring::OracleOnUniform, Operation::Mark(m)) => {
            let want = s.evolve(&oracle_matrix(d, *m)?)?;
            s.evolve(u)?.overlap_sq(&want)
        }
        (Scoring::Unitary, _) => unitary_fidelity(&reflection_matrix(d)?, u)?,
        _ => f64::NAN,
    })
}

pub fn verify_pulse_table(table: &PulseTable) -> Result<VerificationReport> {
    let d = table.d;
    let kernel = DisplacementKernel::new(d)?;
    let mut entries = vec![];
    for (name, seq) in table.operations() {
        let op = Operation::parse(&name);
        let (scoring, flag) = match &op {
            Operation::EqualSuperposition => (Scoring::PrepState, None),
            Operation::Reflection => (Scoring::Unitary, None),
            Operation::Mark(m) if *m < d => (Scoring::OracleOnUniform, None),
            Operation::Mark(m) => (Scoring::Unknown, Some(format!("marked level {m} outside 0..{d}"))),
            Operation::Other(_) => (Scoring::Unknown, Some(format!("unknown operation `{name}`"))),
        };
        let mut per_convention = vec![];
        if scoring != Scoring::Unknown {
            for conv in Convention::ALL {
                let u = compose_kernel(&kernel, &seq, conv);
                per_convention.push(ConventionFidelity {
                    convention: conv.label(),
                    fidelity: score(scoring, &op, d, &u)?,
                });
            }
        }
        entries.push(VerificationEntry {
            operation: name,
            fidelity: None,
            convention: None,
            n_pulses: seq.len(),
            scoring,
            per_convention,
            full_unitary_fidelity: None,
            flag,
        });
    }

    let scored: Vec<&VerificationEntry> = entries.iter().filter(|e| e.scoring != Scoring::Unknown).collect();
    let winner = (!scored.is_empty()).then(|| {
        Convention::ALL
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let worst = scored.iter().map(|e| e.per_convention[i].fidelity).fold(f64::INFINITY, f64::min);
                (i, c, worst)
            })
            .fold(None::<(usize, &Convention, f64)>, |acc, x| match acc {
                Some(a) if a.2 >= x.2 => Some(a),
                _ => Some(x),
            })
            .map(|(i, c, _)| (i, *c))
            .expect("four conventions")
    });
    let mut single_winner = winner.is_some();
    for e in entries.iter_mut().filter(|e| e.scoring != Scoring::Unknown) {
        let (wi, wc) = winner.expect("scored rows imply a winner");
        let best = e.per_convention.iter().map(|c| c.fidelity).fold(f64::NEG_INFINITY, f64::max);
        let f = e.per_convention[wi].fidelity;
        if f < best - 1e-9 {
            single_winner = false;
        }
        e.fidelity = Some(f);
        e.convention = Some(wc.label());
        if let (Scoring::OracleOnUniform, Operation::Mark(m)) = (e.scoring, Operation::parse(&e.operation)) {
            let seq = table.sequence(&e.operation).expect("listed operation");
            let u = compose_kernel(&kernel, &seq, wc);
            e.full_unitary_fidelity = Some(unitary_fidelity(&oracle_matrix(d, m)?, &u)?);
        }
    }
    Ok(VerificationReport {
        d,
        entries,
        winner: winner.map(|(_, c)| c.label()),
        single_winner,
    })
}

//! Tone-amplitude calibration against averaged RB-sequence fidelity.
//!
//! The simulated lab has per-tone gains chosen so that programming
//! `true_amplitudes` produces the ideal drive. Programming `x` instead drives
//! tone `k` with `ideal_k · x_k / true_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{compose, evolve_nonideal, ideal_amplitudes};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rb::{compile_cliffords, random_sequence, CliffordGroup};
use crate::{PulseSequence, ToneSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProblem {
    pub d: usize,
    /// Nominal Rabi scale (rad/ms).
    pub rabi: f64,
    pub true_amplitudes: Vec<f64>,
    pub start_amplitudes: Vec<f64>,
    pub sequences: Vec<PulseSequence>,
    pub bounds: Vec<(f64, f64)>,
}

impl CalibrationProblem {
    /// Problem whose true amplitudes follow the ideal law, probed with
    /// `n_sequences` inverted RB sequences of `length` Cliffords, starting
    /// from the truth scaled by `1 + offset` and searching within ±`span`
    /// (relative) of the truth.
    pub fn rb_standard(
        d: usize,
        rabi: f64,
        offset: f64,
        n_sequences: usize,
        length: usize,
        seed: u64,
        span: f64,
    ) -> Result<Self> {
        let truth = ideal_amplitudes(d, rabi)?;
        let group = CliffordGroup::new();
        let sequences = (0..n_sequences)
            .map(|i| {
                let idx = random_sequence(&group, length, true, seed, i as u64);
                compile_cliffords(d, &group, &idx).map(|c| c.pulses)
            })
            .collect::<Result<_>>()?;
        let p = Self {
            d,
            rabi,
            start_amplitudes: truth.iter().map(|a| a * (1.0 + offset)).collect(),
            bounds: truth.iter().map(|a| (a * (1.0 - span), a * (1.0 + span))).collect(),
            true_amplitudes: truth,
            sequences,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.d.checked_sub(1).filter(|&n| n > 0).ok_or(Error::InvalidDimension(self.d))?;
        for v in [&self.true_amplitudes, &self.start_amplitudes] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: v.len() });
            }
        }
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: self.bounds.len() });
        }
        if self.true_amplitudes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Contract("true amplitudes must be positive".into()));
        }
        for (x, &(lo, hi)) in self.start_amplitudes.iter().zip(&self.bounds) {
            if !(lo <= *x && *x <= hi) {
                return Err(Error::Contract(format!("start amplitude {x} outside [{lo}, {hi}]")));
            }
        }
        if self.sequences.iter().any(|s| s.d != self.d) {
            return Err(Error::Contract("calibration sequence dimension mismatch".into()));
        }
        Ok(())
    }

    fn tones(&self, x: &[f64]) -> Result<ToneSet> {
        let ideal = ideal_amplitudes(self.d, self.rabi)?;
        let amps = x
            .iter()
            .zip(&self.true_amplitudes)
            .zip(&ideal)
            .map(|((&xi, &ti), &ii)| (ii * xi / ti).max(0.0))
            .collect();
        ToneSet::new(self.d, amps, vec![0.0; self.d - 1], self.rabi)
    }

    /// `|⟨ψ_ideal|U(x)|0⟩|²` for each sequence.
    pub fn sequence_fidelities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tones = self.tones(x)?;
        self.sequences
            .iter()
            .map(|s| {
                let ideal = compose(s)?.column(0).into_owned();
                let actual = evolve_nonideal(s, &tones)?.column(0).into_owned();
                Ok(ideal.dotc(&actual).norm_sqr())
            })
            .collect()
    }

    pub fn mean_fidelity(&self, x: &[f64]) -> Result<f64> {
        if self.sequences.is_empty() {
            return Err(Error::Contract("calibration needs at least one sequence".into()));
        }
        let f = self.sequence_fidelities(x)?;
        Ok(f.iter().sum::<f64>() / f.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub tones: (usize, usize),
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
    /// `per_sequence[s][i][j]` at `(axis_a[i], axis_b[j])`.
    pub per_sequence: Vec<Vec<Vec<f64>>>,
    pub averaged: Vec<Vec<f64>>,
}

impl Landscape {
    /// Grid indices of the averaged maximum (first in row-major order).
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, row) in self.averaged.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if best.map_or(true, |b| v > b.1) {
                    best = Some(((i, j), v));
                }
            }
        }
        best.map(|b| b.0)
    }
}

/// Fidelity over a grid of amplitudes for tones `a` and `b`, with every
/// other tone at its true amplitude.
pub fn calibration_landscape(
    problem: &CalibrationProblem,
    tones: (usize, usize),
    axis_a: &[f64],
    axis_b: &[f64],
) -> Result<Landscape> {
    problem.validate()?;
    let n = problem.d - 1;
    let (a, b) = tones;
    if a >= n || b >= n || a == b {
        return Err(Error::Contract(format!("landscape tones ({a}, {b}) must be distinct and < {n}")));
    }
    let points: Vec<(usize, usize)> = (0..axis_a.len())
        .flat_map(|i| (0..axis_b.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(i, j)| {
            let mut x = problem.true_amplitudes.clone();
            x[a] = axis_a[i];
            x[b] = axis_b[j];
            problem.sequence_fidelities(&x)
        })
        .collect::<Result<_>>()?;
    let ns = problem.sequences.len();
    let mut per_sequence = vec![vec![vec![0.0; axis_b.len()]; axis_a.len()]; ns];
    let mut averaged = vec![vec![0.0; axis_b.len()]; axis_a.len()];
    for (&(i, j), v) in points.iter().zip(&values) {
        for (s, &f) in v.iter().enumerate() {
            per_sequence[s][i][j] = f;
        }
        averaged[i][j] = if ns == 0 { 0.0 } else { v.iter().sum::<f64>() / ns as f64 };
    }
    Ok(Landscape {
        tones,
        axis_a: axis_a.to_vec(),
        axis_b: axis_b.to_vec(),
        per_sequence,
        averaged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub recovered: Vec<f64>,
    #[serde(rename = "true")]
    pub true_amplitudes: Vec<f64>,
    /// Largest per-tone relative error.
    pub rel_error: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// `1 - mean fidelity` after each iteration.
    pub trace: Vec<f64>,
}

pub fn nelder_mead_calibrate(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.validate()?;
    let step: Vec<f64> = problem.start_amplitudes.iter().map(|a| 0.05 * a.abs().max(1e-12)).collect();
    let opts = NelderMeadOptions::new(step).with_bounds(problem.bounds.clone());
    nelder_mead_calibrate_with(problem, &opts)
}

pub fn nelder_mead_calibrate_with(problem: &CalibrationProblem, opts: &NelderMeadOptions) -> Result<CalibrationResult> {
    problem.validate()?;
    let mut failure = None;
    let res = nelder_mead(
        |x| match problem.mean_fidelity(x) {
            Ok(f) => 1.0 - f,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        &problem.start_amplitudes,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let rel_error = res
        .x
        .iter()
        .zip(&problem.true_amplitudes)
        .map(|(r, t)| ((r - t) / t).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationResult {
        recovered: res.x,
        true_amplitudes: problem.true_amplitudes.clone(),
        rel_error,
        iterations: res.iterations,
        evaluations: res.evaluations,
        converged: res.converged,
        trace: res.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_is_perfect() {
        let p = CalibrationProblem::rb_standard(3, 5.0, 0.1, 3, 6, 2, 0.3).unwrap();
        assert!((p.mean_fidelity(&p.true_amplitudes).unwrap() - 1.0).abs() < 1e-10);
        let off: Vec<f64> = p.true_amplitudes.iter().map(|a| a * 1.05).collect();
        assert!(p.mean_fidelity(&off).unwrap() < 1.0 - 1e-6);
    }

    #[test]
    fn start_at_truth_stays() {
        let mut p = CalibrationProblem::rb_standard(3, 5.0, 0.0, 3, 6, 2, 0.3).unwrap();
        p.start_amplitudes = p.true_amplitudes.clone();
        let r = nelder_mead_calibrate(&p).unwrap();
        assert!(r.recovered.iter().zip(&p.true_amplitudes).all(|(a, b)| (a - b).abs() < 1e-6 * b));
    }

    #[test]
    fn empty_grid() {
        let p = CalibrationProblem::rb_standard(3, 5.0, 0.1, 2, 4, 2, 0.3).unwrap();
        let l = calibration_landscape(&p, (0, 1), &[], &[]).unwrap();
        assert!(l.averaged.is_empty() && l.argmax().is_none());
        assert!(calibration_landscape(&p, (0, 0), &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn start_outside_bounds_rejected() {
        let mut p = CalibrationProblem::rb_standard(3, 5.0, 0.1, 2, 4, 2, 0.3).unwrap();
        p.start_amplitudes[0] *= 10.0;
        assert!(nelder_mead_calibrate(&p).is_err());
    }
}

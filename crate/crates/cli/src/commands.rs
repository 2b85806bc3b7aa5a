use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use qudit_core::calibration::{calibration_landscape, nelder_mead_calibrate, CalibrationProblem};
use qudit_core::control::GENERATOR_SCALE;
use qudit_core::grover::{
    iteration_sweep, mark_sweep, oracle_matrix, reflection_matrix, GroverCircuit, NoiseBackend,
};
use qudit_core::levels::{
    assignments_csv, off_resonant_error, score_qudit_candidates, transitions_csv, LevelStructure,
};
use qudit_core::linalg::jz_value;
use qudit_core::noise::{ramsey, DephasingModel};
use qudit_core::pulse_table::{Operation, PulseTable};
use qudit_core::rb::{rb_run, RbConfig};
use qudit_core::synthesis::{synthesize, verify_pulse_table, TargetSpec};
use qudit_core::{StateVector, ToneSet};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::output::{csv_row, num, Recorder};

pub struct Ctx {
    pub seed: u64,
    /// True when the seed came from a flag or the top-level config key.
    pub seed_explicit: bool,
    pub out: PathBuf,
    pub note: Option<String>,
}

fn dephasing(d: usize, noise: Option<&NoiseSection>) -> anyhow::Result<DephasingModel> {
    let Some(n) = noise else {
        return Ok(DephasingModel::none(d));
    };
    let sens = n
        .sensitivities
        .clone()
        .unwrap_or_else(|| (0..d).map(|i| jz_value(d, i)).collect());
    ensure!(sens.len() == d, "noise.sensitivities has {} entries, expected d = {d}", sens.len());
    Ok(DephasingModel::normalized(sens, n.t2_ms)?)
}

fn read_table(path: &Path) -> anyhow::Result<PulseTable> {
    ensure!(path.is_file(), "fixture not found: {}", path.display());
    PulseTable::read(path).with_context(|| format!("reading pulse table {}", path.display()))
}

pub fn levels(cfg: &LevelsSection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let (hc, fc) = cfg.require()?;
    let mut rec = Recorder::start(ctx, "levels", ctx.seed, cfg)?;
    let ls = LevelStructure::new(&hc, &fc)?;
    let table = ls.transition_table(&cfg.polarizations);
    let mut ranked = score_qudit_candidates(&table, cfg.d, &cfg.weights)?;
    ranked.truncate(cfg.top);
    rec.text("transitions.csv", &transitions_csv(&table))?;
    rec.text("assignments.csv", &assignments_csv(&ranked))?;
    let off_resonant = match (cfg.omega_khz, ranked.first()) {
        (Some(w), Some(best)) => Some(off_resonant_error(best, &table, w)),
        _ => None,
    };
    let metrics = json!({
        "n_levels": ls.levels.len(),
        "n_transitions": table.len(),
        "n_candidates": ranked.len(),
        "off_resonant_error": off_resonant.as_ref().and_then(|r| r.as_ref().ok()),
        "off_resonant_failure": off_resonant.as_ref().and_then(|r| r.as_ref().err()).map(|e| e.to_string()),
    });
    rec.finish(&json!({ "levels": ls.levels, "best": ranked.first() }), &metrics)
}

pub fn synth(cfg: &SynthSection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut cfg = cfg.clone();
    if ctx.seed_explicit {
        cfg.optimizer.seed = ctx.seed;
    }
    let d = cfg.d;
    let (target, op) = match cfg.target {
        SynthTarget::Oracle => (TargetSpec::oracle_on_uniform(d, cfg.mark)?, Operation::Mark(cfg.mark)),
        SynthTarget::OracleUnitary => (TargetSpec::full_unitary(oracle_matrix(d, cfg.mark)?)?, Operation::Mark(cfg.mark)),
        SynthTarget::Prep => (TargetSpec::state_prep(StateVector::uniform(d)?)?, Operation::EqualSuperposition),
        SynthTarget::Reflection => (TargetSpec::full_unitary(reflection_matrix(d)?)?, Operation::Reflection),
    };
    let mut rec = Recorder::start(ctx, "synth", cfg.optimizer.seed, &cfg)?;
    let result = synthesize(&target, &cfg.optimizer)?;
    let mut table = PulseTable::new(d);
    table.push_sequence(&op.to_string(), &result.sequence)?;
    rec.text("synth_pulses.csv", &table.rounded(9).to_csv())?;
    rec.json("synth_result.json", &result)?;
    let metrics = json!({
        "infidelity": result.infidelity,
        "converged": result.converged,
        "iterations": result.iterations,
        "restarts_run": result.restarts_run,
        "target": target.kind(),
    });
    rec.finish(&json!({ "operation": op.to_string(), "sequence": result.sequence }), &metrics)
}

#[derive(Serialize)]
struct VerifyRecord {
    operation: String,
    fidelity: Option<f64>,
    convention: Option<String>,
    n_pulses: usize,
}

#[derive(Serialize)]
struct VerifyTable {
    table: PathBuf,
    d: usize,
    winner: Option<String>,
    single_winner: bool,
    entries: Vec<VerifyRecord>,
}

pub fn verify_tables(cfg: &VerifySection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut rec = Recorder::start(ctx, "verify-tables", ctx.seed, cfg)?;
    let mut tables = vec![];
    let mut details = vec![];
    for path in &cfg.tables {
        let table = read_table(path)?;
        rec.fixture(path)?;
        let report = verify_pulse_table(&table)?;
        tables.push(VerifyTable {
            table: path.clone(),
            d: report.d,
            winner: report.winner.clone(),
            single_winner: report.single_winner,
            entries: report
                .entries
                .iter()
                .map(|e| VerifyRecord {
                    operation: e.operation.clone(),
                    fidelity: e.fidelity,
                    convention: e.convention.clone(),
                    n_pulses: e.n_pulses,
                })
                .collect(),
        });
        details.push(report);
    }
    rec.json("verification.json", &tables)?;
    let worst = details
        .iter()
        .flat_map(|r| r.entries.iter().filter_map(|e| e.fidelity))
        .fold(1.0, f64::min);
    rec.finish(&details, &json!({ "worst_fidelity": worst }))
}

pub fn grover(cfg: &GroverSection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut rec = Recorder::start(ctx, "grover", ctx.seed, cfg)?;
    let (circuit, rabi) = match cfg.source {
        GroverSource::Analytic => (GroverCircuit::analytic(cfg.d, cfg.iterations)?, 1.0),
        GroverSource::Table => {
            let path = match (&cfg.table, cfg.d) {
                (Some(p), _) => p.clone(),
                (None, 5) => TABLE_D5.into(),
                (None, 8) => TABLE_D8.into(),
                (None, d) => bail!("no shipped table for d = {d}; set grover.table"),
            };
            let table = read_table(&path)?;
            rec.fixture(&path)?;
            ensure!(!table.rows.is_empty(), "pulse table {} is empty", path.display());
            let mean_theta = table.rows.iter().map(|r| r.theta.abs()).sum::<f64>() / table.rows.len() as f64;
            let rabi = mean_theta / (GENERATOR_SCALE * cfg.pulse_us * 1e-3);
            (GroverCircuit::from_table(&table, cfg.iterations)?, rabi)
        }
    };
    let d = circuit.d;
    let noise = match &cfg.noise {
        Some(n) => Some(NoiseBackend {
            tones: ToneSet::ideal(d, rabi)?,
            model: dephasing(d, Some(n))?,
        }),
        None => None,
    };
    let outcomes = mark_sweep(&circuit, noise.as_ref())?;
    let mut header = vec!["marked".to_string()];
    header.extend((0..d).map(|j| format!("p_{j}")));
    let rows: Vec<String> = outcomes
        .iter()
        .map(|o| csv_row(&[o.marked.to_string()], o.distribution.probs().iter().copied()))
        .collect();
    rec.lines("grover_matrix.csv", &header.join(","), &rows)?;

    let sweep = if cfg.sweep_max >= 2 {
        let s = iteration_sweep(&circuit, &circuit.marks(), cfg.sweep_max, noise.as_ref(), cfg.threshold)?;
        let rows: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{},{},{}", p.n, num(p.p_measured), num(p.p_ideal)))
            .collect();
        rec.lines("grover_sweep.csv", "N,p_measured,p_ideal", &rows)?;
        Some(s)
    } else {
        None
    };
    let mean_asp = outcomes.iter().map(|o| o.asp_measured).sum::<f64>() / outcomes.len().max(1) as f64;
    let min_sso = outcomes.iter().map(|o| o.sso_vs_ideal).fold(1.0, f64::min);
    let metrics = json!({
        "d": d,
        "rabi_rad_per_ms": rabi,
        "mean_asp": mean_asp,
        "min_sso": min_sso,
        "per_iteration_fidelity": sweep.as_ref().map(|s| s.per_iteration_fidelity),
    });
    rec.finish(&json!({ "outcomes": outcomes, "sweep": sweep }), &metrics)
}

pub fn rb(cfg: &RbSection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut rec = Recorder::start(ctx, "rb", ctx.seed, cfg)?;
    let rb_cfg = RbConfig {
        lengths: cfg.lengths.clone(),
        n_sequences: cfg.n_sequences,
        seed: ctx.seed,
        include_inverse: cfg.include_inverse,
    };
    let rabi = qudit_core::rb::NATIVE_THETA / (GENERATOR_SCALE * cfg.pulse_us * 1e-3);
    let tones = ToneSet::ideal(cfg.d, rabi)?;
    let model = dephasing(cfg.d, cfg.noise.as_ref())?;
    let r = rb_run(&rb_cfg, cfg.d, &tones, &model)?;
    let rows: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("{},{},{}", p.m, num(p.mean_survival), num(p.stderr)))
        .collect();
    rec.lines("rb.csv", "m,mean_survival,stderr", &rows)?;
    let metrics = json!({
        "decay": r.fit.as_ref().map(|f| f.p),
        "per_pulse_fidelity": r.per_pulse_fidelity,
        "mean_pulses_per_clifford": r.mean_pulses_per_clifford,
    });
    rec.finish(&r, &metrics)
}

pub fn ramsey_cmd(cfg: &RamseySection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut rec = Recorder::start(ctx, "ramsey", ctx.seed, cfg)?;
    let d = cfg.d;
    ensure!(d >= 2, "ramsey.d must be >= 2");
    ensure!(cfg.n_points >= 2 && cfg.t_max_ms > 0.0, "ramsey needs n_points >= 2 and t_max_ms > 0");
    let detunings = cfg
        .detunings
        .clone()
        .unwrap_or_else(|| vec![2.0 * std::f64::consts::PI; d - 1]);
    let tones = ToneSet::new(d, vec![0.0; d - 1], detunings, 1.0)?;
    let model = dephasing(d, Some(&cfg.noise))?;
    let delays: Vec<f64> = (0..cfg.n_points)
        .map(|i| cfg.t_max_ms * i as f64 / (cfg.n_points - 1) as f64)
        .collect();
    let r = ramsey(d, &tones, &model, &delays)?;
    let rows: Vec<String> = r.delays.iter().zip(&r.jz).map(|(t, j)| format!("{},{}", num(*t), num(*j))).collect();
    rec.lines("ramsey.csv", "delay_ms,jz", &rows)?;
    let metrics = json!({
        "t2_fit_ms": r.fit.as_ref().map(|f| f.t2),
        "t2_configured_ms": cfg.noise.t2_ms,
        "fit_error": r.fit_error,
    });
    rec.finish(&r, &metrics)
}

#[derive(Serialize)]
struct CalibrationSummary<'a> {
    recovered: &'a [f64],
    #[serde(rename = "true")]
    truth: &'a [f64],
    rel_error: f64,
    iterations: usize,
}

pub fn calibrate(cfg: &CalibrateSection, ctx: &Ctx) -> anyhow::Result<PathBuf> {
    let mut rec = Recorder::start(ctx, "calibrate", ctx.seed, cfg)?;
    let problem =
        CalibrationProblem::rb_standard(cfg.d, cfg.rabi, cfg.offset, cfg.n_sequences, cfg.length, ctx.seed, cfg.span)?;
    let r = nelder_mead_calibrate(&problem)?;
    rec.json(
        "calibration.json",
        &CalibrationSummary {
            recovered: &r.recovered,
            truth: &r.true_amplitudes,
            rel_error: r.rel_error,
            iterations: r.iterations,
        },
    )?;
    let mut landscape_max = None;
    if let Some(l) = &cfg.landscape {
        ensure!(l.points >= 2, "calibrate.landscape.points must be >= 2");
        let (a, b) = l.tones;
        let n = problem.true_amplitudes.len();
        ensure!(a < n && b < n, "calibrate.landscape.tones must be < {n}");
        let axis = |k: usize| -> Vec<f64> {
            let t = problem.true_amplitudes[k];
            (0..l.points)
                .map(|i| t * (1.0 - l.rel_span + 2.0 * l.rel_span * i as f64 / (l.points - 1) as f64))
                .collect()
        };
        let land = calibration_landscape(&problem, l.tones, &axis(a), &axis(b))?;
        let header = std::iter::once(format!("a{a}\\a{b}"))
            .chain(land.axis_b.iter().map(|x| num(*x)))
            .collect::<Vec<_>>()
            .join(",");
        let rows: Vec<String> = land
            .axis_a
            .iter()
            .zip(&land.averaged)
            .map(|(x, row)| csv_row(&[num(*x)], row.iter().copied()))
            .collect();
        rec.lines("landscape.csv", &header, &rows)?;
        landscape_max = land.argmax().map(|(i, j)| (land.axis_a[i], land.axis_b[j]));
    }
    let metrics = json!({
        "rel_error": r.rel_error,
        "converged": r.converged,
        "evaluations": r.evaluations,
        "landscape_argmax": landscape_max,
    });
    rec.finish(&r, &metrics)
}

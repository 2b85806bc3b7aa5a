//! Hyperfine plus Zeeman level structure of a single atomic manifold, its
//! magnetic-dipole transitions, and selection of qudit level chains.
//!
//! The uncoupled basis `|m_I, m_J⟩` is ordered with `m_J` fastest:
//! index `= i_I (2J+1) + i_J`, where `m = -j + i` for both spins.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cplx, spin_operators, HermitianEigen};
use crate::pulse_table::format_sig;
use crate::{Complex, ComplexMatrix, ComplexVector};

/// Finite-difference step for field sensitivities (gauss), 1 mG.
pub const SENSITIVITY_STEP_G: f64 = 1e-3;
/// Largest manifold the chain search accepts.
pub const MAX_LEVELS: usize = 24;
/// Couplings weaker than this count as forbidden.
pub const MIN_STRENGTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineConstants {
    /// Nuclear spin.
    pub i: f64,
    /// Electronic angular momentum.
    pub j: f64,
    /// Magnetic-dipole constant (MHz).
    pub a_mhz: f64,
    /// Electric-quadrupole constant (MHz).
    pub b_mhz: f64,
    pub g_j: f64,
    pub g_i: f64,
}

fn half_integer(x: f64) -> bool {
    x >= 0.0 && (2.0 * x - (2.0 * x).round()).abs() < 1e-12
}

impl HyperfineConstants {
    pub fn validate(&self) -> Result<()> {
        if !half_integer(self.i) || !half_integer(self.j) {
            return Err(Error::InvalidConstants(format!(
                "I = {} and J = {} must be non-negative half-integers",
                self.i, self.j
            )));
        }
        for (name, v) in [("A", self.a_mhz), ("B", self.b_mhz), ("gJ", self.g_j), ("gI", self.g_i)] {
            if !v.is_finite() {
                return Err(Error::InvalidConstants(format!("{name} = {v} is not finite")));
            }
        }
        let n = self.n_i() * self.n_j();
        if n > MAX_LEVELS {
            return Err(Error::InvalidConstants(format!("manifold has {n} levels, at most {MAX_LEVELS} supported")));
        }
        Ok(())
    }

    pub fn n_i(&self) -> usize {
        (2.0 * self.i).round() as usize + 1
    }

    pub fn n_j(&self) -> usize {
        (2.0 * self.j).round() as usize + 1
    }

    pub fn dim(&self) -> usize {
        self.n_i() * self.n_j()
    }

    /// `(m_I, m_J)` of uncoupled basis state `k`.
    pub fn quantum_numbers(&self, k: usize) -> (f64, f64) {
        let nj = self.n_j();
        (-self.i + (k / nj) as f64, -self.j + (k % nj) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub bz_gauss: f64,
    pub mu_b_mhz_per_g: f64,
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bz_gauss >= 0.0) || !self.mu_b_mhz_per_g.is_finite() {
            return Err(Error::InvalidConstants(format!(
                "field Bz = {} G must be >= 0 and μB finite",
                self.bz_gauss
            )));
        }
        Ok(())
    }

    fn at(&self, bz: f64) -> Self {
        Self { bz_gauss: bz, ..*self }
    }
}

fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Hyperfine + Zeeman Hamiltonian (MHz) in the uncoupled basis.
pub fn build_hamiltonian(hc: &HyperfineConstants, fc: &FieldConfig) -> Result<ComplexMatrix> {
    hc.validate()?;
    hamiltonian_at(hc, fc.mu_b_mhz_per_g, fc.bz_gauss)
}

fn hamiltonian_at(hc: &HyperfineConstants, mu_b: f64, bz: f64) -> Result<ComplexMatrix> {
    let (ni, nj) = (hc.n_i(), hc.n_j());
    let dim = ni * nj;
    let mut h = ComplexMatrix::zeros(dim, dim);
    if ni > 1 && nj > 1 {
        let si = spin_operators::<f64>(ni)?;
        let sj = spin_operators::<f64>(nj)?;
        let idot = kron(&si.x, &sj.x) + kron(&si.y, &sj.y) + kron(&si.z, &sj.z);
        h += &idot * cplx(hc.a_mhz, 0.0);
        // Quadrupole term; defined only for I, J >= 1.
        if hc.i >= 1.0 && hc.j >= 1.0 && hc.b_mhz != 0.0 {
            let (i, j) = (hc.i, hc.j);
            let id = ComplexMatrix::identity(dim, dim);
            let num = &idot * &idot * cplx(3.0, 0.0) + &idot * cplx(1.5, 0.0)
                - id * cplx(i * (i + 1.0) * j * (j + 1.0), 0.0);
            let den = 2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0);
            h += num * cplx(hc.b_mhz / den, 0.0);
        }
    }
    for k in 0..dim {
        let (mi, mj) = hc.quantum_numbers(k);
        h[(k, k)] += cplx(mu_b * bz * (hc.g_j * mj + hc.g_i * mi), 0.0);
    }
    Ok(h)
}

/// `F_z = I_z + J_z` in the uncoupled basis.
pub fn fz_operator(hc: &HyperfineConstants) -> ComplexMatrix {
    let dim = hc.dim();
    let mut f = ComplexMatrix::zeros(dim, dim);
    for k in 0..dim {
        let (mi, mj) = hc.quantum_numbers(k);
        f[(k, k)] = cplx(mi + mj, 0.0);
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub index: usize,
    /// MHz
    pub energy: f64,
    pub m_f: f64,
    /// Position within its `m_F` block in ascending energy; together with
    /// `m_f` this identifies the level across field values.
    pub block_rank: usize,
    /// Amplitudes over the uncoupled basis.
    pub composition: Vec<Complex>,
}

/// Block-diagonalizes `h` by `m_F`. Levels come out sorted by energy with
/// exact ties broken by `m_F`; each eigenvector's largest component is made
/// real and positive.
pub fn diagonalize_levels(hc: &HyperfineConstants, h: &ComplexMatrix) -> Result<Vec<Level>> {
    hc.validate()?;
    let dim = hc.dim();
    if h.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: h.nrows() });
    }
    let mut blocks: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for k in 0..dim {
        let (mi, mj) = hc.quantum_numbers(k);
        blocks.entry((2.0 * (mi + mj)).round() as i64).or_default().push(k);
    }
    let mut levels = vec![];
    for (two_mf, idx) in blocks {
        let sub = ComplexMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let eig = HermitianEigen::new(&sub, 1e-9)?;
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
        for (rank, &col) in order.iter().enumerate() {
            let mut v = ComplexVector::zeros(dim);
            for (r, &k) in idx.iter().enumerate() {
                v[k] = eig.vectors[(r, col)];
            }
            let big = v.iter().copied().fold(cplx(0.0, 0.0), |acc, z| if z.norm() > acc.norm() + 1e-12 { z } else { acc });
            let fix = big.conj() / big.norm();
            levels.push(Level {
                index: 0,
                energy: eig.values[col],
                m_f: two_mf as f64 / 2.0,
                block_rank: rank,
                composition: v.iter().map(|z| z * fix).collect(),
            });
        }
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m_f.total_cmp(&b.m_f)));
    for (i, l) in levels.iter_mut().enumerate() {
        l.index = i;
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub frequency_mhz: f64,
    pub strength: f64,
    pub sensitivity_mhz_per_g: f64,
}

/// Levels at the working field and at `±1 mG`, for sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStructure {
    pub constants: HyperfineConstants,
    pub field: FieldConfig,
    pub levels: Vec<Level>,
    electron: [ComplexMatrix; 2],
    energy_plus: BTreeMap<(i64, usize), f64>,
    energy_minus: BTreeMap<(i64, usize), f64>,
}

fn key(l: &Level) -> (i64, usize) {
    ((2.0 * l.m_f).round() as i64, l.block_rank)
}

impl LevelStructure {
    pub fn new(hc: &HyperfineConstants, fc: &FieldConfig) -> Result<Self> {
        hc.validate()?;
        fc.validate()?;
        let energies = |bz: f64| -> Result<BTreeMap<(i64, usize), f64>> {
            let h = hamiltonian_at(hc, fc.mu_b_mhz_per_g, bz)?;
            Ok(diagonalize_levels(hc, &h)?.iter().map(|l| (key(l), l.energy)).collect())
        };
        let h = build_hamiltonian(hc, fc)?;
        let levels = diagonalize_levels(hc, &h)?;
        let sj = spin_operators::<f64>(hc.n_j())?;
        let id_i = ComplexMatrix::identity(hc.n_i(), hc.n_i());
        Ok(Self {
            constants: hc.clone(),
            field: fc.at(fc.bz_gauss),
            electron: [kron(&id_i, &sj.x), kron(&id_i, &sj.z)],
            energy_plus: energies(fc.bz_gauss + SENSITIVITY_STEP_G)?,
            energy_minus: energies(fc.bz_gauss - SENSITIVITY_STEP_G)?,
            levels,
        })
    }

    /// `max_α |⟨b|J_α|a⟩|` over the requested polarizations.
    pub fn strength(&self, a: usize, b: usize, pols: &[Polarization]) -> f64 {
        let va = ComplexVector::from_vec(self.levels[a].composition.clone());
        let vb = ComplexVector::from_vec(self.levels[b].composition.clone());
        pols.iter()
            .map(|p| {
                let op = &self.electron[match p {
                    Polarization::X => 0,
                    Polarization::Z => 1,
                }];
                vb.dotc(&(op * &va)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `d(E_b - E_a)/dBz` by central difference.
    pub fn sensitivity(&self, a: usize, b: usize) -> f64 {
        let (ka, kb) = (key(&self.levels[a]), key(&self.levels[b]));
        let up = self.energy_plus[&kb] - self.energy_plus[&ka];
        let dn = self.energy_minus[&kb] - self.energy_minus[&ka];
        (up - dn) / (2.0 * SENSITIVITY_STEP_G)
    }

    /// Every pair with `|ΔmF| <= 1`, lower level first.
    pub fn transition_table(&self, pols: &[Polarization]) -> Vec<Transition> {
        let n = self.levels.len();
        let mut out = vec![];
        for a in 0..n {
            for b in a + 1..n {
                if (self.levels[a].m_f - self.levels[b].m_f).abs() > 1.0 + 1e-9 {
                    continue;
                }
                out.push(Transition {
                    lower: a,
                    upper: b,
                    frequency_mhz: self.levels[b].energy - self.levels[a].energy,
                    strength: self.strength(a, b, pols),
                    sensitivity_mhz_per_g: self.sensitivity(a, b),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringWeights {
    pub strength: f64,
    /// Penalty per MHz/G of the worst link sensitivity.
    pub sensitivity: f64,
    /// Reward per MHz of the closest spectral neighbour of any tone.
    pub separation: f64,
    /// Separations beyond this (MHz) are not rewarded further.
    pub separation_cap_mhz: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        Self {
            strength: 1.0,
            sensitivity: 1.0,
            separation: 1.0,
            separation_cap_mhz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuditAssignment {
    pub d: usize,
    pub state_indices: Vec<usize>,
    pub tone_frequencies: Vec<f64>,
    pub coupling_strengths: Vec<f64>,
    pub link_sensitivities: Vec<f64>,
    pub min_strength: f64,
    pub max_sensitivity: f64,
    pub min_separation_mhz: f64,
    pub score: f64,
}

/// Table lookup keyed by unordered level pair.
struct Links<'a> {
    by_pair: BTreeMap<(usize, usize), &'a Transition>,
    neighbours: BTreeMap<usize, Vec<usize>>,
}

impl<'a> Links<'a> {
    fn new(table: &'a [Transition]) -> Self {
        let mut by_pair = BTreeMap::new();
        let mut neighbours: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for t in table {
            let k = (t.lower.min(t.upper), t.lower.max(t.upper));
            by_pair.insert(k, t);
            if t.strength > MIN_STRENGTH {
                neighbours.entry(t.lower).or_default().push(t.upper);
                neighbours.entry(t.upper).or_default().push(t.lower);
            }
        }
        for v in neighbours.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Self { by_pair, neighbours }
    }

    fn get(&self, a: usize, b: usize) -> Option<&'a Transition> {
        self.by_pair.get(&(a.min(b), a.max(b))).copied()
    }
}

fn assess(chain: &[usize], links: &Links, table: &[Transition], w: &ScoringWeights) -> Option<QuditAssignment> {
    let mut tones = vec![];
    for p in chain.windows(2) {
        let t = links.get(p[0], p[1])?;
        if t.strength <= MIN_STRENGTH {
            return None;
        }
        tones.push(t);
    }
    let involved: Vec<&Transition> = table
        .iter()
        .filter(|t| chain.contains(&t.lower) || chain.contains(&t.upper))
        .collect();
    let mut sep = w.separation_cap_mhz;
    for t in &tones {
        for u in &involved {
            if std::ptr::eq(*t, *u) {
                continue;
            }
            sep = sep.min((t.frequency_mhz - u.frequency_mhz).abs());
        }
    }
    let min_strength = tones.iter().map(|t| t.strength).fold(f64::INFINITY, f64::min);
    let max_sensitivity = tones.iter().map(|t| t.sensitivity_mhz_per_g.abs()).fold(0.0, f64::max);
    Some(QuditAssignment {
        d: chain.len(),
        state_indices: chain.to_vec(),
        tone_frequencies: tones.iter().map(|t| t.frequency_mhz).collect(),
        coupling_strengths: tones.iter().map(|t| t.strength).collect(),
        link_sensitivities: tones.iter().map(|t| t.sensitivity_mhz_per_g).collect(),
        min_strength,
        max_sensitivity,
        min_separation_mhz: sep,
        score: w.strength * min_strength - w.sensitivity * max_sensitivity + w.separation * sep,
    })
}

fn dfs(chain: &mut Vec<usize>, d: usize, links: &Links, out: &mut Vec<Vec<usize>>) {
    if chain.len() == d {
        // A chain and its reverse are the same assignment; keep one.
        if chain[0] < chain[d - 1] || d == 1 {
            out.push(chain.clone());
        }
        return;
    }
    let last = *chain.last().expect("non-empty chain");
    if let Some(next) = links.neighbours.get(&last) {
        for &n in next {
            if !chain.contains(&n) {
                chain.push(n);
                dfs(chain, d, links, out);
                chain.pop();
            }
        }
    }
}

/// Every simple chain of `d` levels joined by allowed transitions, ranked
/// by score (descending, ties by state indices).
pub fn score_qudit_candidates(table: &[Transition], d: usize, weights: &ScoringWeights) -> Result<Vec<QuditAssignment>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let links = Links::new(table);
    let starts: Vec<usize> = links.neighbours.keys().copied().collect();
    if starts.len() > MAX_LEVELS {
        return Err(Error::Contract(format!("chain search limited to {MAX_LEVELS} levels, table has {}", starts.len())));
    }
    let mut ranked: Vec<QuditAssignment> = starts
        .par_iter()
        .flat_map_iter(|&s| {
            let mut found = vec![];
            dfs(&mut vec![s], d, &links, &mut found);
            found.into_iter().filter_map(|c| assess(&c, &links, table, weights)).collect::<Vec<_>>()
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.state_indices.cmp(&b.state_indices)));
    Ok(ranked)
}

/// `Σ Ω_ik² / δ_ik²` over every tone and every spectator transition
/// touching the qudit levels. Tone `k` is taken to drive its own link at
/// Rabi frequency `omega_khz`; a spectator of strength `s` sees
/// `omega_khz · s / s_k`.
pub fn off_resonant_error(assignment: &QuditAssignment, table: &[Transition], omega_khz: f64) -> Result<f64> {
    let chain = &assignment.state_indices;
    let links: Vec<(usize, usize)> = chain.windows(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect();
    let mut total = 0.0;
    for (k, &link) in links.iter().enumerate() {
        let f_k = assignment.tone_frequencies[k];
        let s_k = assignment.coupling_strengths[k];
        for t in table {
            let pair = (t.lower.min(t.upper), t.lower.max(t.upper));
            if pair == link || t.strength <= MIN_STRENGTH {
                continue;
            }
            if !(chain.contains(&t.lower) || chain.contains(&t.upper)) {
                continue;
            }
            let delta_khz = (t.frequency_mhz - f_k) * 1e3;
            if delta_khz.abs() < 1e-9 {
                return Err(Error::DegenerateSpectrum {
                    lower: t.lower,
                    upper: t.upper,
                    tone_mhz: f_k,
                });
            }
            let omega = omega_khz * t.strength / s_k;
            total += (omega / delta_khz).powi(2);
        }
    }
    Ok(total)
}

pub fn transitions_csv(table: &[Transition]) -> String {
    let mut s = String::from("lower,upper,freq_mhz,strength,sensitivity_mhz_per_g\n");
    for t in table {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            t.lower,
            t.upper,
            format_sig(t.frequency_mhz, 9),
            format_sig(t.strength, 9),
            format_sig(t.sensitivity_mhz_per_g, 9)
        ));
    }
    s
}

pub fn assignments_csv(ranked: &[QuditAssignment]) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format_sig(*x, 9)).collect::<Vec<_>>().join(";");
    let mut s = String::from("rank,score,states,tone_freqs_mhz,min_strength,max_sensitivity_mhz_per_g,min_separation_mhz\n");
    for (r, a) in ranked.iter().enumerate() {
        let states = a.state_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r + 1,
            format_sig(a.score, 9),
            states,
            join(&a.tone_frequencies),
            format_sig(a.min_strength, 9),
            format_sig(a.max_sensitivity, 9),
            format_sig(a.min_separation_mhz, 9)
        ));
    }
    s
}

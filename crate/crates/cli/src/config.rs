//! Run configuration: one JSON section per command, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qudit_core::levels::{FieldConfig, HyperfineConstants, Polarization, ScoringWeights};
use qudit_core::synthesis::SynthesisConfig;
use serde::{Deserialize, Serialize};

pub const TABLE_D5: &str = "fixtures/table1_d5.csv";
pub const TABLE_D8: &str = "fixtures/table2_d8.csv";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    /// Free-text provenance note, copied into run records.
    pub note: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub levels: LevelsSection,
    pub synth: SynthSection,
    pub verify_tables: VerifySection,
    pub grover: GroverSection,
    pub rb: RbSection,
    pub ramsey: RamseySection,
    pub calibrate: CalibrateSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Dephasing settings shared by the noisy commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Coherence time of the slowest-decaying coherence (ms).
    pub t2_ms: f64,
    /// Per-level field sensitivities; defaults to the level's Jz value.
    #[serde(default)]
    pub sensitivities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsSection {
    pub hyperfine: Option<HyperfineConstants>,
    pub field: Option<FieldConfig>,
    pub d: usize,
    pub polarizations: Vec<Polarization>,
    pub weights: ScoringWeights,
    /// Number of ranked chains to export.
    pub top: usize,
    /// Drive strength for the off-resonant error estimate of the best chain.
    pub omega_khz: Option<f64>,
}

impl Default for LevelsSection {
    fn default() -> Self {
        Self {
            hyperfine: None,
            field: None,
            d: 3,
            polarizations: vec![Polarization::X, Polarization::Z],
            weights: ScoringWeights::default(),
            top: 10,
            omega_khz: None,
        }
    }
}

impl LevelsSection {
    pub fn require(&self) -> anyhow::Result<(HyperfineConstants, FieldConfig)> {
        let Some(hc) = self.hyperfine.clone() else {
            bail!("configuration error: missing key `levels.hyperfine` (fields i, j, a_mhz, b_mhz, g_j, g_i)");
        };
        let Some(fc) = self.field else {
            bail!("configuration error: missing key `levels.field` (fields bz_gauss, mu_b_mhz_per_g)");
        };
        Ok((hc, fc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTarget {
    /// Phase-flip oracle, judged on the uniform superposition.
    Oracle,
    /// Phase-flip oracle as a whole unitary.
    OracleUnitary,
    /// Uniform superposition from |0⟩.
    Prep,
    Reflection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub target: SynthTarget,
    pub d: usize,
    pub mark: usize,
    pub optimizer: SynthesisConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            target: SynthTarget::Oracle,
            d: 5,
            mark: 0,
            optimizer: SynthesisConfig { tol: 1e-4, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub tables: Vec<PathBuf>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            tables: vec![TABLE_D5.into(), TABLE_D8.into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroverSource {
    Analytic,
    Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroverSection {
    pub source: GroverSource,
    /// Used by analytic circuits; table circuits take d from the table.
    pub d: usize,
    /// Defaults to the shipped fixture for d = 5 or 8.
    pub table: Option<PathBuf>,
    /// Iterations for the outcome matrix; defaults to 1.
    pub iterations: usize,
    /// Largest N in the iteration sweep.
    pub sweep_max: usize,
    /// Mean pulse duration (μs); sets the Rabi scale.
    pub pulse_us: f64,
    pub noise: Option<NoiseSection>,
    /// Sweep points with ideal success below this are left out of the fit.
    pub threshold: f64,
}

impl Default for GroverSection {
    fn default() -> Self {
        Self {
            source: GroverSource::Analytic,
            d: 5,
            table: None,
            iterations: 1,
            sweep_max: 6,
            pulse_us: 33.0,
            noise: None,
            threshold: qudit_core::grover::DEFAULT_RATIO_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbSection {
    pub d: usize,
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    pub include_inverse: bool,
    /// Duration of one native π/2 pulse (μs).
    pub pulse_us: f64,
    pub noise: Option<NoiseSection>,
}

impl Default for RbSection {
    fn default() -> Self {
        Self {
            d: 5,
            lengths: vec![1, 2, 4, 8, 16, 32, 64],
            n_sequences: 20,
            include_inverse: true,
            pulse_us: 33.0,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseySection {
    pub d: usize,
    /// Per-tone detunings (rad/ms); defaults to 2π rad/ms on every tone.
    pub detunings: Option<Vec<f64>>,
    pub t_max_ms: f64,
    pub n_points: usize,
    pub noise: NoiseSection,
}

impl Default for RamseySection {
    fn default() -> Self {
        Self {
            d: 5,
            detunings: None,
            t_max_ms: 6.0,
            n_points: 61,
            noise: NoiseSection { t2_ms: 3.0, sensitivities: None },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    pub tones: (usize, usize),
    /// Grid spans truth·(1 ± rel_span).
    pub rel_span: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub d: usize,
    /// Nominal Rabi scale (rad/ms).
    pub rabi: f64,
    /// Relative error of the starting amplitudes.
    pub offset: f64,
    pub n_sequences: usize,
    pub length: usize,
    /// Search bounds are truth·(1 ± span).
    pub span: f64,
    pub landscape: Option<LandscapeSection>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            d: 5,
            rabi: 10.0,
            offset: 0.10,
            n_sequences: 4,
            length: 10,
            span: 0.3,
            landscape: Some(LandscapeSection { tones: (0, 1), rel_span: 0.2, points: 21 }),
        }
    }
}

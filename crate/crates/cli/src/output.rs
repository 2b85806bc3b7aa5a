//! Result persistence: atomic writes, CSV formatting and run records.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use qudit_core::pulse_table::format_sig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Ctx;

pub const CSV_DIGITS: usize = 9;

pub fn num(x: f64) -> String {
    format_sig(x, CSV_DIGITS)
}

pub fn csv_row<I: IntoIterator<Item = f64>>(lead: &[String], values: I) -> String {
    let mut cells: Vec<String> = lead.to_vec();
    cells.extend(values.into_iter().map(num));
    cells.join(",")
}

/// Write via a sibling temp file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_lines(path: &Path, header: &str, rows: &[String]) -> anyhow::Result<()> {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureHash {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn hash_file(path: &Path) -> anyhow::Result<FixtureHash> {
    let bytes = fs::read(path).with_context(|| format!("fixture not found: {}", path.display()))?;
    Ok(FixtureHash {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Provenance for one command invocation. Timestamps live only here, so
/// the primary result files stay byte-identical across reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub note: Option<String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub config: serde_json::Value,
    pub fixtures: Vec<FixtureHash>,
    pub outputs: Vec<PathBuf>,
    pub results: serde_json::Value,
    pub metrics: serde_json::Value,
}

pub struct Recorder {
    record: RunRecord,
    out: PathBuf,
}

impl Recorder {
    pub fn start<C: Serialize>(ctx: &Ctx, command: &str, seed: u64, config: &C) -> anyhow::Result<Self> {
        Ok(Self {
            record: RunRecord {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                note: ctx.note.clone(),
                started_unix_s: unix_now(),
                finished_unix_s: 0.0,
                config: serde_json::to_value(config)?,
                fixtures: vec![],
                outputs: vec![],
                results: serde_json::Value::Null,
                metrics: serde_json::Value::Null,
            },
            out: ctx.out.clone(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn fixture(&mut self, path: &Path) -> anyhow::Result<()> {
        let h = hash_file(path)?;
        self.record.fixtures.push(h);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let p = self.path(name);
        write_json(&p, value)?;
        self.record.outputs.push(p);
        Ok(())
    }

    pub fn lines(&mut self, name: &str, header: &str, rows: &[String]) -> anyhow::Result<()> {
        let p = self.path(name);
        write_lines(&p, header, rows)?;
        self.record.outputs.push(p);
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        write_atomic(&p, body.as_bytes())?;
        self.record.outputs.push(p);
        Ok(())
    }

    pub fn finish<R: Serialize, M: Serialize>(mut self, results: &R, metrics: &M) -> anyhow::Result<PathBuf> {
        self.record.results = serde_json::to_value(results)?;
        self.record.metrics = serde_json::to_value(metrics)?;
        self.record.finished_unix_s = unix_now();
        let p = self.path(&format!("{}.run.json", self.record.command));
        write_json(&p, &self.record)?;
        Ok(p)
    }
}

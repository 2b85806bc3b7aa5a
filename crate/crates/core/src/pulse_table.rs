//! Pulse-table CSV: `operation,pulse,theta,phi_1,...,phi_{d-1}`.
//!
//! Column `phi_j` is the phase of coupling `j-1` (levels `j-1` and `j`).
//! Values are kept as parsed `f64` and written back with shortest
//! round-trip formatting, so a published table survives a read/write cycle
//! unchanged.

use std::fmt;
use std::path::Path;

use crate::control::{PulseParams, PulseSequence};
use crate::error::{Error, Result};

/// Role of a named block of pulses in a Grover circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operation {
    Mark(usize),
    EqualSuperposition,
    Reflection,
    Other(String),
}

impl Operation {
    pub fn parse(name: &str) -> Self {
        let n = name.trim();
        let lower = n.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("mark") {
            if let Ok(k) = rest.trim().parse::<usize>() {
                return Self::Mark(k);
            }
        }
        match lower.as_str() {
            "equal sup." | "equal sup" | "equal superposition" | "prep" => Self::EqualSuperposition,
            "reflection" => Self::Reflection,
            _ => Self::Other(n.to_string()),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mark(k) => write!(f, "Mark {k}"),
            Self::EqualSuperposition => write!(f, "Equal Sup."),
            Self::Reflection => write!(f, "Reflection"),
            Self::Other(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseRow {
    pub operation: String,
    pub pulse: usize,
    pub theta: f64,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseTable {
    pub d: usize,
    pub rows: Vec<PulseRow>,
}

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that parses back to the rounded value.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x);
    format!("{rounded}")
}

fn header(d: usize) -> Vec<String> {
    let mut h = vec!["operation".to_string(), "pulse".into(), "theta".into()];
    h.extend((1..d).map(|j| format!("phi_{j}")));
    h
}

impl PulseTable {
    pub fn new(d: usize) -> Self {
        Self { d, rows: vec![] }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = rdr.records();
        let head = match records.next() {
            None => return Err(Error::Parse { line: 1, msg: "missing header".into() }),
            Some(r) => r.map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?,
        };
        let n = head.len();
        if n < 4 {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header needs at least 4 columns, found {n}"),
            });
        }
        let d = n - 2;
        let expected = header(d);
        for (i, (got, want)) in head.iter().zip(&expected).enumerate() {
            if !got.eq_ignore_ascii_case(want) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("column {} is `{got}`, expected `{want}`", i + 1),
                });
            }
        }
        let mut rows = vec![];
        for rec in records {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if rec.len() != n {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {n} fields, found {}", rec.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column `{}`: cannot parse `{}` as a number", expected[i], &rec[i]),
                })
            };
            let pulse = rec[1].parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("pulse index `{}` is not a positive integer", &rec[1]),
            })?;
            let theta = num(2)?;
            let phases = (3..n).map(num).collect::<Result<Vec<_>>>()?;
            rows.push(PulseRow {
                operation: rec[0].to_string(),
                pulse,
                theta,
                phases,
            });
        }
        Ok(Self { d, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = header(self.d).join(",");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![r.operation.clone(), r.pulse.to_string(), format!("{}", r.theta)];
            fields.extend(r.phases.iter().map(|p| format!("{p}")));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Operation names in order of first appearance.
    pub fn operation_names(&self) -> Vec<String> {
        let mut names: Vec<String> = vec![];
        for r in &self.rows {
            if !names.contains(&r.operation) {
                names.push(r.operation.clone());
            }
        }
        names
    }

    /// Pulses of one operation sorted by their pulse index.
    pub fn sequence(&self, name: &str) -> Option<PulseSequence<f64>> {
        let mut rows: Vec<&PulseRow> = self.rows.iter().filter(|r| r.operation == name).collect();
        if rows.is_empty() {
            return None;
        }
        rows.sort_by_key(|r| r.pulse);
        let pulses = rows
            .into_iter()
            .map(|r| PulseParams::new(r.theta, r.phases.clone()))
            .collect();
        PulseSequence::new(self.d, pulses).ok()
    }

    pub fn sequence_for(&self, op: &Operation) -> Option<PulseSequence<f64>> {
        self.operation_names()
            .into_iter()
            .find(|n| Operation::parse(n) == *op)
            .and_then(|n| self.sequence(&n))
    }

    pub fn operations(&self) -> Vec<(String, PulseSequence<f64>)> {
        self.operation_names()
            .into_iter()
            .filter_map(|n| self.sequence(&n).map(|s| (n, s)))
            .collect()
    }

    pub fn push_sequence(&mut self, name: &str, seq: &PulseSequence<f64>) -> Result<()> {
        if seq.d != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, actual: seq.d });
        }
        for (i, p) in seq.pulses.iter().enumerate() {
            self.rows.push(PulseRow {
                operation: name.to_string(),
                pulse: i + 1,
                theta: p.theta,
                phases: p.phases.clone(),
            });
        }
        Ok(())
    }

    /// Same table with every value rounded to `digits` significant digits.
    pub fn rounded(&self, digits: usize) -> Self {
        let r = |x: f64| format_sig(x, digits).parse::<f64>().unwrap_or(x);
        Self {
            d: self.d,
            rows: self
                .rows
                .iter()
                .map(|row| PulseRow {
                    operation: row.operation.clone(),
                    pulse: row.pulse,
                    theta: r(row.theta),
                    phases: row.phases.iter().map(|&p| r(p)).collect(),
                })
                .collect(),
        }
    }
}

//! Episode records and their JSON-lines form.
//!
//! A trace file holds one JSON object per line, each tagged by `kind`:
//! one `header`, then a `step` line per decomposed step, a `port` line per port
//! (load ports at departure, then the final port), and a closing `totals` line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::PortReport;
use crate::config::hex_digest;
use crate::error::{Result, StowError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub episode: u64,
    pub pipeline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub pol: usize,
    pub pod: usize,
    pub k: usize,
    /// First 16 hex chars of SHA-256 over the pre-step utilization bytes.
    pub state_digest: String,
    pub raw: Vec<f64>,
    pub masked: Vec<f64>,
    pub projected: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub revenue: f64,
    pub ho_cost: f64,
    pub cm_cost: f64,
    /// Running sum of step rewards.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub q: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub ports: Vec<PortReport>,
    pub totals: Totals,
    pub complete: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header {
        #[serde(flatten)]
        header: TraceHeader,
        q: Vec<f64>,
    },
    Step(StepRecord),
    Port(PortReport),
    Totals {
        #[serde(flatten)]
        totals: Totals,
        complete: bool,
    },
}

pub fn state_digest(u: &[f64]) -> String {
    let bytes: Vec<u8> = u.iter().flat_map(|v| v.to_le_bytes()).collect();
    hex_digest(&bytes)[..16].to_string()
}

impl EpisodeTrace {
    pub fn new(header: TraceHeader, q: Vec<f64>) -> Self {
        Self {
            header,
            q,
            steps: Vec::new(),
            ports: Vec::new(),
            totals: Totals::default(),
            complete: false,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut put = |line: &Line| -> Result<()> {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        put(&Line::Header {
            header: self.header.clone(),
            q: self.q.clone(),
        })?;
        for s in &self.steps {
            put(&Line::Step(s.clone()))?;
        }
        for p in &self.ports {
            put(&Line::Port(p.clone()))?;
        }
        put(&Line::Totals {
            totals: self.totals,
            complete: self.complete,
        })
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut trace: Option<EpisodeTrace> = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| StowError::Parse {
                line: n + 1,
                detail: e.to_string(),
            })?;
            match parsed {
                Line::Header { header, q } => trace = Some(EpisodeTrace::new(header, q)),
                other => {
                    let t = trace.as_mut().ok_or(StowError::Parse {
                        line: n + 1,
                        detail: "record before header".into(),
                    })?;
                    match other {
                        Line::Step(s) => t.steps.push(s),
                        Line::Port(p) => t.ports.push(p),
                        Line::Totals { totals, complete } => {
                            t.totals = totals;
                            t.complete = complete;
                        }
                        Line::Header { .. } => unreachable!(),
                    }
                }
            }
        }
        trace.ok_or(StowError::Parse {
            line: 0,
            detail: "empty trace".into(),
        })
    }
}

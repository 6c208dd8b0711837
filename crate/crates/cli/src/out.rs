//! Artifact writing: provenance-stamped CSV and JSON.
//!
//! Every CSV starts with three `#` comment lines carrying the tool version,
//! the config digest and the seed, followed by a header row. Numbers are
//! written with six decimals so repeated runs are byte-identical.

use std::fs;
use std::path::Path;

use serde::Serialize;
use stowlab_core::learn::rollout::VERSION;
use stowlab_core::{Result, StowError, VoyageConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(cfg: &VoyageConfig, seed: u64) -> Self {
        Self {
            version: VERSION.into(),
            config_digest: cfg.digest(),
            seed,
        }
    }
}

pub fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn csv_err(e: csv::Error) -> StowError {
    StowError::Io(std::io::Error::other(e.to_string()))
}

pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut buf = format!(
        "# stowlab version={}\n# config_digest={}\n# seed={}\n",
        prov.version, prov.config_digest, prov.seed
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub struct CsvFile {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_csv(path: &Path) -> Result<CsvFile> {
    let text = fs::read_to_string(path)?;
    let mut meta = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for kv in line.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                meta.push((k.to_string(), v.to_string()));
            }
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok(CsvFile { meta, header, rows })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Worker count: `STOWLAB_THREADS` if set and positive, else the number of cores.
pub fn threads() -> usize {
    std::env::var("STOWLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_provenance() {
        let dir = std::env::temp_dir().join(format!("stowlab-out-{}", std::process::id()));
        let path = dir.join("t.csv");
        let prov = Provenance {
            version: "0.1.0".into(),
            config_digest: "abc".into(),
            seed: 7,
        };
        write_csv(&path, &prov, &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        let f = read_csv(&path).unwrap();
        assert_eq!(f.header, vec!["a", "b"]);
        assert_eq!(f.rows, vec![vec!["1".to_string(), "x,y".to_string()]]);
        assert!(f.meta.contains(&("seed".into(), "7".into())));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(num(-0.0), "0.000000");
        assert_eq!(num(-1e-9), "0.000000");
        assert_eq!(num(2.5), "2.500000");
    }
}

//! CSV files with a `#` comment header carrying the config and seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::HarnessConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    /// Header recording the command, the full config (minus the output
    /// directory, so reruns elsewhere stay byte-identical) and the seeding rule.
    pub fn new(command: &str, cfg: &HarnessConfig) -> Self {
        let mut value = serde_json::to_value(cfg).expect("config serializes");
        if let Some(c) = value.get_mut("campaign").and_then(|c| c.as_object_mut()) {
            c.remove("out");
        }
        Self {
            lines: vec![
                format!("ipp {command}"),
                format!("config: {value}"),
                format!(
                    "seeds: trial t uses environment seed {} + t for every planner",
                    cfg.campaign.seed
                ),
            ],
        }
    }

    pub fn with(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }
}

pub fn write_csv<S: Serialize>(path: &Path, header: &Header, rows: impl IntoIterator<Item = S>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for line in &header.lines {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: f64,
        b: Option<f64>,
        name: String,
    }

    #[test]
    fn round_trip_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x/rows.csv");
        let rows = vec![
            Row { a: 0.1 + 0.2, b: None, name: "p".into() },
            Row { a: f64::MAX, b: Some(-3.5), name: "q".into() },
        ];
        let h = Header::new("test", &HarnessConfig::default()).with("extra");
        write_csv(&path, &h, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# ipp test\n# config: {"));
        assert!(!text.contains("\"out\""));
        let back: Vec<Row> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }
}

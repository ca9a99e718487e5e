//! Atomic file output stamped with the configuration hash.

use std::io::Write;
use std::path::PathBuf;

use mehler_core::experiments::ExperimentReport;
use mehler_core::grid::fmt17;
use serde_json::Value;

use crate::config::RunConfig;
use crate::{io_error, CliError};

pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            dir: cfg.output_dir.clone(),
            hash: cfg.hash(),
        }
    }

    /// `#` lines for CSV headers: the hash, the command, then `key = value`.
    pub fn metadata(&self, command: &str, pairs: &[(&str, f64)]) -> Vec<String> {
        let mut lines = vec![format!("config_hash = {}", self.hash), format!("command = {command}")];
        lines.extend(pairs.iter().map(|(k, v)| format!("{k} = {}", fmt17(*v))));
        lines
    }

    /// JSON has no comment syntax, so the hash goes in a top-level field.
    pub fn json_with_hash(&self, mut value: Value) -> String {
        if let Value::Object(map) = &mut value {
            map.insert("configHash".into(), Value::String(self.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value).expect("JSON serializes");
        text.push('\n');
        text
    }

    /// Writes `rel` under the output directory through a temporary file and
    /// a rename, so readers never see a partial file.
    pub fn write(&self, rel: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        let parent = path.parent().map(PathBuf::from).unwrap_or_else(|| self.dir.clone());
        std::fs::create_dir_all(&parent).map_err(|e| io_error(&parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| io_error(&parent, e))?;
        tmp.write_all(content.as_bytes()).map_err(|e| io_error(&path, e))?;
        tmp.persist(&path).map_err(|e| io_error(&path, e.error))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

pub fn report_json(out: &Output, report: &ExperimentReport) -> String {
    out.json_with_hash(serde_json::to_value(report).expect("report serializes"))
}

/// One row per experiment, from its headline check.
pub fn summary_csv(out: &Output, reports: &[(u32, ExperimentReport)], timed: bool) -> String {
    let mut text = String::new();
    for line in out.metadata("suite", &[]) {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str("name,criterion,expected,measured,tolerance,verdict,runtime\n");
    for (criterion, r) in reports {
        let (expected, measured, tolerance) = match r.headline() {
            Some(c) => (fmt17(c.expected), fmt17(c.measured), fmt17(c.tolerance)),
            None => (String::new(), String::new(), String::new()),
        };
        let runtime = match (timed, r.runtime_seconds) {
            (true, Some(s)) => format!("{s:.3}"),
            _ => String::new(),
        };
        text.push_str(&format!(
            "{},{criterion},{expected},{measured},{tolerance},{},{runtime}\n",
            r.name,
            r.verdict.as_str()
        ));
    }
    text
}

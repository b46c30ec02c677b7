//! Result persistence: CSV tables with fixed column orders and JSON run
//! summaries.
//!
//! Files are deterministic functions of the resolved configuration and the
//! master seed: floats are written with Rust's shortest round-trip
//! formatting ('.' decimal, no locale), rows follow the iteration order of
//! the experiment definition, and no timestamps or host details are
//! recorded. The run id is a content digest, so re-running a configuration
//! reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{CliError, CliResult, ResolvedConfig};

/// Collects the files of one run and writes the final JSON summary.
pub struct RunWriter {
    out_dir: PathBuf,
    files: Vec<String>,
}

impl RunWriter {
    pub fn new(out_dir: &str) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| {
            CliError::config(format!("cannot create output directory {out_dir}: {e}"))
        })?;
        Ok(RunWriter {
            out_dir: PathBuf::from(out_dir),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.out_dir
    }

    /// Write one CSV file; `rows` are preformatted comma-joined lines.
    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> CliResult<PathBuf> {
        let mut text = String::with_capacity(header.len() + 1 + 32 * rows.len());
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        let path = self.out_dir.join(name);
        fs::write(&path, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Write the run summary: command, content-digest run id, the full
    /// resolved config, the files written so far, and a command-specific
    /// report payload.
    pub fn summary<R: Serialize>(
        &mut self,
        command: &str,
        config: &ResolvedConfig,
        report: &R,
    ) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Summary<'a, R: Serialize> {
            command: &'a str,
            run_id: String,
            config: &'a ResolvedConfig,
            files: &'a [String],
            report: &'a R,
        }
        let summary = Summary {
            command,
            run_id: run_id(command, config),
            config,
            files: &self.files,
            report,
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::config(format!("cannot serialize summary: {e}")))?;
        let path = self.out_dir.join(format!("{command}-summary.json"));
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Short content digest of (command, resolved config), git-style.
pub fn run_id(command: &str, config: &ResolvedConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update([0u8]);
    hasher.update(
        serde_json::to_string(config)
            .expect("config serializes")
            .as_bytes(),
    );
    let digest = hasher.finalize();
    let mut id = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

/// Format a float for CSV: shortest representation that round-trips.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Format an optional value; absent cells stay empty.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

//! Artifact persistence: manifest, CSV, report, all written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const ARTIFACT_VERSION: &str = "1";

/// One verification performed during a run.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Reference value when the check is two-sided or bounded.
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn within(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: Some(expected),
            tolerance: Some(tolerance),
            pass: (measured - expected).abs() <= tolerance,
        }
    }

    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: Some(bound),
            tolerance: None,
            pass: measured <= bound,
        }
    }

    pub fn boolean(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured: if pass { 1.0 } else { 0.0 },
            expected: None,
            tolerance: None,
            pass,
        }
    }
}

#[derive(Serialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Write-then-rename so readers never observe a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root.join("plots"))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn record(&mut self, rel: &str) {
        self.files.push(rel.to_string());
    }

    /// 17 significant digits, LF endings, fixed row order: reruns with the
    /// same config are byte-identical.
    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[Vec<CsvCell>]) -> Result<(), CliError> {
        let mut body = String::new();
        body.push_str(header);
        body.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(CsvCell::render).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        write_atomic(&self.root.join(name), body.as_bytes())?;
        self.record(name);
        Ok(())
    }

    pub fn write_report(&mut self, checks: &[Check], extra: &[String]) -> Result<(), CliError> {
        let mut text = String::new();
        for c in checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let target = match (c.expected, c.tolerance) {
                (Some(e), Some(t)) => format!(" vs {e:.6e} (tol {t:.1e})"),
                (Some(e), None) => format!(" vs bound {e:.6e}"),
                _ => String::new(),
            };
            text.push_str(&format!("{}: measured {:.6e}{target} {verdict}\n", c.name, c.measured));
        }
        for line in extra {
            text.push_str(line);
            text.push('\n');
        }
        write_atomic(&self.root.join("report.txt"), text.as_bytes())?;
        self.record("report.txt");
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        body.push('\n');
        write_atomic(&self.root.join(name), body.as_bytes())?;
        self.record(name);
        Ok(())
    }

    pub fn write_plot(&mut self, name: &str, svg: &str) -> Result<(), CliError> {
        let rel = format!("plots/{name}");
        write_atomic(&self.root.join(&rel), svg.as_bytes())?;
        self.record(&rel);
        Ok(())
    }

    /// Manifest goes last so its file list is complete.
    pub fn finish(
        mut self,
        experiment: &str,
        config: &ExperimentConfig,
        checks: Vec<Check>,
        started: std::time::Instant,
    ) -> Result<Manifest, CliError> {
        self.record("manifest.json");
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION.into(),
            experiment: experiment.into(),
            config: config.clone(),
            outputs: self.files.clone(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            checks,
            pass: false,
        };
        let mut manifest = manifest;
        manifest.pass = manifest.checks.iter().all(|c| c.pass);
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Config(e.to_string()))?;
        write_atomic(&self.root.join("manifest.json"), body.as_bytes())?;
        Ok(manifest)
    }
}

/// CSV cell: floats get the fixed 17-significant-digit form, everything
/// else is written verbatim.
pub enum CsvCell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Float(v) => format!("{v:.16e}"),
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Text(s) => s.clone(),
        }
    }
}

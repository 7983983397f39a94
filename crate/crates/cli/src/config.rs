//! Experiment configuration: one JSON file, dotted `--set` overrides.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use blowlab_core::fields::VectorFieldSystem;
use blowlab_core::grid::{Grid, GridFunction};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSpec {
    /// euclidean | constant | trig-bounded | grushin | engel
    pub tag: String,
    pub n: usize,
    /// Grushin degeneracy degree.
    pub k: u32,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            tag: "euclidean".into(),
            n: 1,
            k: 1,
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<VectorFieldSystem, CliError> {
        Ok(VectorFieldSystem::builtin(&self.tag, self.n, self.k)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub half_width: f64,
    /// Nodes per axis.
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            points: 101,
        }
    }
}

impl GridSpec {
    pub fn build(&self, dim: usize) -> Result<Arc<Grid>, CliError> {
        Ok(Arc::new(Grid::uniform(dim, self.half_width, self.points)?))
    }

    /// Same box, spacing halved `level` times.
    pub fn refined(&self, dim: usize, level: usize) -> Result<Arc<Grid>, CliError> {
        let mut points = self.points;
        for _ in 0..level {
            points = 2 * points + 1;
        }
        Ok(Arc::new(Grid::uniform(dim, self.half_width, points)?))
    }
}

/// Named data families for the forcing and the initial state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    /// zero | gaussian-bump | power-tail | plateau
    pub family: String,
    pub eps: f64,
    /// Tail decay rate for power-tail.
    pub lambda: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            family: "zero".into(),
            eps: 0.0,
            lambda: 2.0,
        }
    }
}

impl DataSpec {
    pub fn sample(&self, grid: Arc<Grid>) -> Result<GridFunction, CliError> {
        let eps = self.eps;
        let lambda = self.lambda;
        match self.family.as_str() {
            "zero" => Ok(GridFunction::zeros(grid)),
            "gaussian-bump" => Ok(GridFunction::sample_fn(grid, move |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                eps * (-r2).exp()
            })),
            "power-tail" => Ok(GridFunction::sample_fn(grid, move |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                eps * r2.powf(-lambda / 2.0).min(1.0)
            })),
            "plateau" => Ok(GridFunction::sample_fn(grid, move |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 <= 1.0 {
                    eps
                } else {
                    0.0
                }
            })),
            other => Err(CliError::Config(format!("unknown data family {other:?}"))),
        }
    }

    /// Closure form for quadrature against test functions.
    pub fn closure(&self) -> Result<impl Fn(&[f64]) -> f64 + Sync, CliError> {
        let eps = self.eps;
        let lambda = self.lambda;
        let family = self.family.clone();
        if !matches!(
            family.as_str(),
            "zero" | "gaussian-bump" | "power-tail" | "plateau"
        ) {
            return Err(CliError::Config(format!("unknown data family {family:?}")));
        }
        Ok(move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            match family.as_str() {
                "gaussian-bump" => eps * (-r2).exp(),
                "power-tail" => eps * r2.powf(-lambda / 2.0).min(1.0),
                "plateau" => {
                    if r2 <= 1.0 {
                        eps
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub t_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            t_values: vec![],
            r_values: vec![],
            eps_values: vec![],
            p_values: vec![],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub threshold: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-9,
            t_max: 10.0,
            threshold: 1e8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSpec {
    /// Duhamel mesh steps J.
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// "auto" (guaranteed local horizon) or a number.
    pub horizon: serde_json::Value,
    /// Emit the full (t, node, value) trajectory CSV.
    pub trajectory: bool,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            steps: 32,
            tol: 1e-10,
            max_iter: 60,
            horizon: serde_json::Value::String("auto".into()),
            trajectory: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub slope: f64,
    pub kernel_mass: f64,
    pub kernel_mass_cross: f64,
    pub semigroup_defect: f64,
    pub contraction: f64,
    pub residual: f64,
    pub order: f64,
    pub blowup_uncertainty: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            slope: 0.05,
            kernel_mass: 1e-8,
            kernel_mass_cross: 1e-4,
            semigroup_defect: 1e-8,
            contraction: 0.6,
            residual: 1e-8,
            order: 0.2,
            blowup_uncertainty: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub grid: GridSpec,
    pub p: f64,
    pub kappa: u32,
    /// parabolic | critical-log | grushin | engel (functional-scan).
    pub family_kind: String,
    pub forcing: DataSpec,
    pub u0: DataSpec,
    pub sweep: SweepSpec,
    pub time: TimeSpec,
    pub picard: PicardSpec,
    pub tolerances: ToleranceSpec,
    pub quad_panels: usize,
    /// Refinement levels for order studies.
    pub levels: usize,
    pub workers: Option<usize>,
    /// Probe-point sampling only; the solvers are deterministic.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::default(),
            grid: GridSpec::default(),
            p: 2.0,
            kappa: 8,
            family_kind: "parabolic".into(),
            forcing: DataSpec::default(),
            u0: DataSpec::default(),
            sweep: SweepSpec::default(),
            time: TimeSpec::default(),
            picard: PicardSpec::default(),
            tolerances: ToleranceSpec::default(),
            quad_panels: 8,
            levels: 3,
            workers: None,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn horizon_override(&self) -> Result<Option<f64>, CliError> {
        match &self.picard.horizon {
            serde_json::Value::String(s) if s == "auto" => Ok(None),
            serde_json::Value::Number(n) => Ok(n.as_f64()),
            other => Err(CliError::Config(format!(
                "picard.horizon must be \"auto\" or a number, got {other}"
            ))),
        }
    }
}

/// Parse `key=value`, value as JSON with a bare-string fallback.
fn parse_override(spec: &str) -> Result<(Vec<String>, serde_json::Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set needs key=value, got {spec:?}")))?;
    let value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), value))
}

fn insert_path(root: &mut serde_json::Value, path: &[String], value: serde_json::Value) {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        if !node.is_object() {
            *node = serde_json::Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(key.clone())
            .or_insert(serde_json::Value::Null);
    }
    if !node.is_object() {
        *node = serde_json::Value::Object(Default::default());
    }
    node.as_object_mut()
        .unwrap()
        .insert(path.last().unwrap().clone(), value);
}

/// Load the config file (or start from defaults when absent) and apply
/// the dotted overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut value: serde_json::Value = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::to_value(ExperimentConfig::default()).unwrap(),
    };
    for spec in overrides {
        let (keys, v) = parse_override(spec)?;
        insert_path(&mut value, &keys, v);
    }
    // Fill unset fields with defaults by merging onto the default tree.
    let mut base = serde_json::to_value(ExperimentConfig::default()).unwrap();
    merge(&mut base, value);
    serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

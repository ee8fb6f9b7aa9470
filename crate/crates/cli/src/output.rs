//! CSV and JSON writers for estimate series.
//!
//! CSV columns are fixed: `<t|tau|omega>,mean_re,mean_im,stderr`, preceded
//! by `# key=value` metadata comment lines. The JSON document carries the
//! full series (including per-component errors) under a versioned schema.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qtraj::EstimateSeries;

use crate::config::{serialize_config, RunConfig};

pub const SERIES_SCHEMA: &str = "qtraj.series/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    T,
    Tau,
    Omega,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::T => "t",
            Column::Tau => "tau",
            Column::Omega => "omega",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    /// Trajectories that entered the estimate (0 for oracle output).
    pub n: usize,
    pub failed: usize,
    pub method: Option<String>,
    pub model_hash: String,
    pub threads: usize,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub schema: String,
    pub column: Column,
    pub grid: Vec<f64>,
    pub mean_re: Vec<f64>,
    pub mean_im: Vec<f64>,
    pub stderr: Vec<f64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    pub metadata: Metadata,
}

impl SeriesDocument {
    pub fn new(series: &EstimateSeries, column: Column, metadata: Metadata) -> Self {
        Self {
            schema: SERIES_SCHEMA.into(),
            column,
            grid: series.grid.clone(),
            mean_re: series.mean.iter().map(|z| z.re).collect(),
            mean_im: series.mean.iter().map(|z| z.im).collect(),
            stderr: series.stderr.clone(),
            stderr_re: series.stderr_re.clone(),
            stderr_im: series.stderr_im.clone(),
            metadata,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("document serializes") + "\n",
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        out.push_str(&format!("# schema={}\n# command={}\n", self.schema, m.command));
        if let Some(method) = &m.method {
            out.push_str(&format!("# method={method}\n"));
        }
        out.push_str(&format!(
            "# seed={}\n# n={}\n# failed={}\n# model_hash={}\n# threads={}\n",
            m.seed, m.n, m.failed, m.model_hash, m.threads
        ));
        out.push_str(&format!("# cpu_seconds={}\n# wall_seconds={}\n", m.cpu_seconds, m.wall_seconds));
        out.push_str(&format!("{},mean_re,mean_im,stderr\n", self.column.name()));
        for k in 0..self.grid.len() {
            out.push_str(&format!("{},{},{},{}\n", self.grid[k], self.mean_re[k], self.mean_im[k], self.stderr[k]));
        }
        out
    }
}

/// Rows of a CSV written by [`SeriesDocument::render`]: `(x, re, im, stderr)`.
pub fn parse_csv(text: &str) -> Result<Vec<[f64; 4]>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or("missing header")?;
    if !header.ends_with(",mean_re,mean_im,stderr") {
        return Err(format!("unexpected header {header:?}"));
    }
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
            <[f64; 4]>::try_from(v).map_err(|_| format!("bad row {l:?}"))
        })
        .collect()
}

/// SHA-256 over the model part of the configuration, in canonical JSON.
pub fn model_hash(cfg: &RunConfig) -> String {
    let full: serde_json::Value = serde_json::from_str(&serialize_config(cfg)).expect("config is JSON");
    let keys = ["model", "omega", "gamma", "detuning", "dim", "hamiltonian", "drive", "channels", "operators"];
    let model: serde_json::Map<String, serde_json::Value> =
        keys.iter().filter_map(|&k| full.get(k).map(|v| (k.to_string(), v.clone()))).collect();
    let canonical = serde_json::to_string(&model).expect("model serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

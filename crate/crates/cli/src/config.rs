//! JSON run configuration.
//!
//! Two model forms are accepted: the two-level preset
//! (`{"model": "two_level", "omega": 10, "gamma": 1}`) and an inline model
//! given by `dim`, a `hamiltonian` matrix, optional sinusoidal `drive`
//! terms and a list of `channels`. Complex entries are `[re, im]` pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use qtraj::hilbert::two_level;
use qtraj::{
    Coefficient, CorrelationMethod, DecayChannel, HamiltonianTerm, Insertion, LindbladModel, Operator, Sampling,
    StateVector, StepControl, C64,
};

/// A validation failure located by its JSON path, e.g. `channels[0].rate`.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

pub type Matrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoLevel,
    #[default]
    Inline,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Doubled,
    Kick,
    Limit,
    Four,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Doubled => "doubled",
            Method::Kick => "kick",
            Method::Limit => "limit",
            Method::Four => "four",
        })
    }
}

/// Operator given by name (`sigma_z`, `sigma_plus*sigma_minus`, a key of
/// `operators`) or as an explicit matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorRef {
    Name(String),
    Matrix(Matrix),
}

/// `"ground"`, `"excited"`, `"basis:k"` or explicit amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Name(String),
    Amplitudes(Vec<[f64; 2]>),
}

/// `amplitude · cos(omega t + phase) · op`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveTerm {
    pub op: OperatorRef,
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub rate: f64,
    pub op: OperatorRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionConfig {
    pub time: f64,
    pub op: OperatorRef,
}

/// Explicit multitime specification `⟨A₁(t₁)⋯ observable(t) ⋯B₁(s₁)⟩`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionsConfig {
    #[serde(default)]
    pub a: Vec<InsertionConfig>,
    #[serde(default)]
    pub b: Vec<InsertionConfig>,
}

/// `start:end:points`, inclusive of both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(start: f64, end: f64, points: usize) -> Self {
        Self { start, end, points }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * step).collect()
    }

    fn check(&self) -> Result<(), String> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err("grid bounds must be finite".into());
        }
        if self.points == 0 || (self.points > 1 && self.end <= self.start) {
            return Err("grid needs at least one point and end > start".into());
        }
        Ok(())
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:end:points, got {s:?}"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let points = parts[2].trim().parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        let g = Self { start: num(parts[0])?, end: num(parts[1])?, points };
        g.check()?;
        Ok(g)
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSettings {
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { ladder: default_ladder(), methods: default_methods(), repetitions: 1 }
    }
}

fn default_ladder() -> Vec<usize> {
    vec![250, 1000, 4000]
}
fn default_methods() -> Vec<Method> {
    vec![Method::Doubled, Method::Limit, Method::Four]
}
fn one() -> usize {
    1
}
fn default_initial() -> StateRef {
    StateRef::Name("ground".into())
}
fn default_trajectories() -> usize {
    10_000
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_dt_max() -> f64 {
    StepControl::default().dt_max
}
fn default_jump_tol() -> f64 {
    StepControl::default().tol_t
}
fn default_safety() -> f64 {
    StepControl::default().safety
}
fn default_grid() -> GridSpec {
    GridSpec::new(0.0, 5.0, 51)
}
fn default_burn_in() -> f64 {
    10.0
}
fn default_omega_grid() -> GridSpec {
    GridSpec::new(-20.0, 20.0, 401)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drive: Vec<DriveTerm>,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub operators: BTreeMap<String, Matrix>,

    #[serde(default = "default_initial")]
    pub initial: StateRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<StateRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<StateRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<OperatorRef>,
    /// Measured operator of the stationary correlation `⟨A(τ) B⟩`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<OperatorRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<OperatorRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertions: Option<InsertionsConfig>,

    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_jump_tol")]
    pub jump_tol: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_omega_grid")]
    pub omega_grid: GridSpec,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config(r#"{"model": "two_level"}"#).expect("preset defaults are valid")
    }
}

/// Parses and validates a JSON document, filling in defaults.
pub fn parse_config(document: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    cfg.apply_defaults();
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

fn finite(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, "must be finite"))
    }
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {x}")))
    }
}

fn matrix_to_operator(path: &str, m: &Matrix, dim: usize) -> Result<Operator, ConfigError> {
    if m.len() != dim {
        return Err(ConfigError::new(path, format!("expected {dim} rows, found {}", m.len())));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for (i, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(ConfigError::new(format!("{path}[{i}]"), format!("expected {dim} entries, found {}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !(z[0].is_finite() && z[1].is_finite()) {
                return Err(ConfigError::new(format!("{path}[{i}][{j}]"), "entries must be finite"));
            }
            data.push(C64::new(z[0], z[1]));
        }
    }
    Operator::new(dim, data).map_err(|e| ConfigError::new(path, e.to_string()))
}

fn builtin(name: &str, dim: usize) -> Option<Operator> {
    if name == "identity" {
        return Some(Operator::identity(dim));
    }
    if dim != 2 {
        return None;
    }
    Some(match name {
        "sigma_minus" => two_level::sigma_minus(),
        "sigma_plus" => two_level::sigma_plus(),
        "sigma_x" => two_level::sigma_x(),
        "sigma_y" => two_level::sigma_y(),
        "sigma_z" => two_level::sigma_z(),
        "excited_projector" => two_level::excited_projector(),
        _ => return None,
    })
}

impl RunConfig {
    fn apply_defaults(&mut self) {
        if self.model == ModelKind::TwoLevel {
            self.omega.get_or_insert(10.0);
            self.gamma.get_or_insert(1.0);
            self.detuning.get_or_insert(0.0);
            self.dim.get_or_insert(2);
        }
        // σ_z, σ⁺, σ⁻ for two-level systems, the identity otherwise
        let two = self.dim == Some(2);
        let pick = |name: &str| OperatorRef::Name(if two { name } else { "identity" }.into());
        self.observable.get_or_insert_with(|| pick("sigma_z"));
        self.a.get_or_insert_with(|| pick("sigma_plus"));
        self.b.get_or_insert_with(|| pick("sigma_minus"));
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(2)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.model {
            ModelKind::TwoLevel => {
                if self.dim != Some(2) {
                    return Err(ConfigError::new("dim", "the two_level preset has dim 2"));
                }
                if self.hamiltonian.is_some() {
                    return Err(ConfigError::new("hamiltonian", "not allowed with the two_level preset"));
                }
                finite("omega", self.omega.unwrap_or_default())?;
                finite("detuning", self.detuning.unwrap_or_default())?;
                let g = self.gamma.unwrap_or_default();
                if !(g.is_finite() && g >= 0.0) {
                    return Err(ConfigError::new("gamma", format!("decay rate must be non-negative, got {g}")));
                }
            }
            ModelKind::Inline => {
                let dim = self.dim.ok_or_else(|| ConfigError::new("dim", "required for an inline model"))?;
                if dim == 0 {
                    return Err(ConfigError::new("dim", "must be at least 1"));
                }
                if self.hamiltonian.is_none() {
                    return Err(ConfigError::new("hamiltonian", "required for an inline model"));
                }
                for key in ["omega", "gamma", "detuning"] {
                    let set = match key {
                        "omega" => self.omega.is_some(),
                        "gamma" => self.gamma.is_some(),
                        _ => self.detuning.is_some(),
                    };
                    if set {
                        return Err(ConfigError::new(key, "only allowed with the two_level preset"));
                    }
                }
            }
        }
        let dim = self.dim();
        for (name, m) in &self.operators {
            if name.is_empty() || name.contains('*') || builtin(name, dim).is_some() {
                return Err(ConfigError::new(format!("operators.{name}"), "invalid or reserved operator name"));
            }
            matrix_to_operator(&format!("operators.{name}"), m, dim)?;
        }
        for (i, ch) in self.channels.iter().enumerate() {
            let path = format!("channels[{i}].rate");
            if !(ch.rate.is_finite() && ch.rate >= 0.0) {
                return Err(ConfigError::new(path, format!("decay rate must be non-negative, got {}", ch.rate)));
            }
            self.operator(&format!("channels[{i}].op"), &ch.op)?;
        }
        for (i, d) in self.drive.iter().enumerate() {
            finite(&format!("drive[{i}].amplitude"), d.amplitude)?;
            finite(&format!("drive[{i}].omega"), d.omega)?;
            finite(&format!("drive[{i}].phase"), d.phase)?;
            let op = self.operator(&format!("drive[{i}].op"), &d.op)?;
            if !op.is_hermitian(1e-12) {
                return Err(ConfigError::new(format!("drive[{i}].op"), "Hamiltonian term is not hermitian"));
            }
        }
        self.build_model()?;
        self.state("initial", &self.initial)?;
        if let Some(s) = &self.phi0 {
            self.state("phi0", s)?;
        }
        if let Some(s) = &self.psi0 {
            self.state("psi0", s)?;
        }
        for (path, r) in [("observable", &self.observable), ("a", &self.a), ("b", &self.b)] {
            self.operator(path, r.as_ref().ok_or_else(|| ConfigError::new(path, "missing"))?)?;
        }
        if let Some(ins) = &self.insertions {
            self.insertion_list("insertions.a", &ins.a)?;
            self.insertion_list("insertions.b", &ins.b)?;
        }
        if self.trajectories < 2 {
            return Err(ConfigError::new("trajectories", "need at least 2 trajectories"));
        }
        positive("epsilon", self.epsilon)?;
        positive("dt_max", self.dt_max)?;
        positive("jump_tol", self.jump_tol)?;
        positive("safety", self.safety)?;
        if self.jump_tol >= self.dt_max {
            return Err(ConfigError::new("jump_tol", "must be smaller than dt_max"));
        }
        self.grid.check().map_err(|m| ConfigError::new("grid", m))?;
        self.omega_grid.check().map_err(|m| ConfigError::new("omega_grid", m))?;
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(ConfigError::new("burn_in", "must be non-negative"));
        }
        if self.bench.ladder.is_empty() || self.bench.ladder.iter().any(|&n| n < 2) {
            return Err(ConfigError::new("bench.ladder", "needs trajectory counts of at least 2"));
        }
        if self.bench.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::new("bench.ladder", "trajectory counts must increase"));
        }
        if self.bench.repetitions == 0 {
            return Err(ConfigError::new("bench.repetitions", "must be at least 1"));
        }
        Ok(())
    }

    fn insertion_list(&self, path: &str, list: &[InsertionConfig]) -> Result<Vec<Insertion>, ConfigError> {
        list.iter()
            .enumerate()
            .map(|(i, ins)| {
                finite(&format!("{path}[{i}].time"), ins.time)?;
                Ok(Insertion::new(ins.time, self.operator(&format!("{path}[{i}].op"), &ins.op)?))
            })
            .collect()
    }

    /// Resolves a name (or `name*name*…` product) or explicit matrix.
    pub fn operator(&self, path: &str, r: &OperatorRef) -> Result<Operator, ConfigError> {
        let dim = self.dim();
        match r {
            OperatorRef::Matrix(m) => matrix_to_operator(path, m, dim),
            OperatorRef::Name(expr) => {
                let mut acc = Operator::identity(dim);
                for name in expr.split('*').map(str::trim) {
                    let op = match self.operators.get(name) {
                        Some(m) => matrix_to_operator(path, m, dim)?,
                        None => builtin(name, dim)
                            .ok_or_else(|| ConfigError::new(path, format!("unknown operator {name:?}")))?,
                    };
                    acc = acc.matmul(&op);
                }
                Ok(acc)
            }
        }
    }

    pub fn state(&self, path: &str, r: &StateRef) -> Result<StateVector, ConfigError> {
        let dim = self.dim();
        let v = match r {
            StateRef::Name(name) => {
                let k = match name.as_str() {
                    "ground" => 0,
                    "excited" if dim == 2 => 1,
                    other => other
                        .strip_prefix("basis:")
                        .and_then(|k| k.parse::<usize>().ok())
                        .ok_or_else(|| ConfigError::new(path, format!("unknown state {other:?}")))?,
                };
                if k >= dim {
                    return Err(ConfigError::new(path, format!("basis index {k} out of range for dim {dim}")));
                }
                StateVector::basis(dim, k)
            }
            StateRef::Amplitudes(a) => {
                if a.len() != dim {
                    return Err(ConfigError::new(path, format!("expected {dim} amplitudes, found {}", a.len())));
                }
                StateVector::new(a.iter().map(|z| C64::new(z[0], z[1])).collect())
                    .map_err(|e| ConfigError::new(path, e.to_string()))?
            }
        };
        if !v.is_normalized() {
            return Err(ConfigError::new(path, "state must be normalized"));
        }
        Ok(v)
    }

    pub fn build_model(&self) -> Result<LindbladModel, ConfigError> {
        match self.model {
            ModelKind::TwoLevel => LindbladModel::two_level(
                self.omega.unwrap_or(10.0),
                self.gamma.unwrap_or(1.0),
                self.detuning.unwrap_or(0.0),
            )
            .map_err(|e| ConfigError::new("", e.to_string())),
            ModelKind::Inline => {
                let dim = self.dim();
                let h = matrix_to_operator("hamiltonian", self.hamiltonian.as_ref().expect("validated"), dim)?;
                if !h.is_hermitian(1e-12) {
                    return Err(ConfigError::new(
                        "hamiltonian",
                        format!("Hamiltonian is not hermitian (max deviation {:.3e})", h.hermiticity_defect()),
                    ));
                }
                let mut terms = vec![HamiltonianTerm::constant(h)];
                for (i, d) in self.drive.iter().enumerate() {
                    terms.push(HamiltonianTerm {
                        base: self.operator(&format!("drive[{i}].op"), &d.op)?,
                        coeff: Coefficient::Sinusoid { amplitude: d.amplitude, omega: d.omega, phase: d.phase },
                    });
                }
                let channels = self
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok(DecayChannel { rate: c.rate, jump_op: self.operator(&format!("channels[{i}].op"), &c.op)? })
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                LindbladModel::new(dim, terms, channels).map_err(|e| ConfigError::new("", e.to_string()))
            }
        }
    }

    pub fn initial_state(&self) -> StateVector {
        self.state("initial", &self.initial).expect("validated")
    }

    /// `(φ₀, ψ₀)` for Heisenberg matrix elements; both default to `initial`.
    pub fn heisenberg_states(&self) -> (StateVector, StateVector) {
        let get = |path, r: &Option<StateRef>| match r {
            Some(s) => self.state(path, s).expect("validated"),
            None => self.initial_state(),
        };
        (get("phi0", &self.phi0), get("psi0", &self.psi0))
    }

    pub fn resolved(&self, path: &str, r: &Option<OperatorRef>) -> Operator {
        self.operator(path, r.as_ref().expect("defaults applied")).expect("validated")
    }

    /// `(a_ops, b_ops)` of an explicit multitime specification.
    pub fn insertion_ops(&self) -> Option<(Vec<Insertion>, Vec<Insertion>)> {
        self.insertions.as_ref().map(|ins| {
            (
                self.insertion_list("insertions.a", &ins.a).expect("validated"),
                self.insertion_list("insertions.b", &ins.b).expect("validated"),
            )
        })
    }

    pub fn control(&self) -> StepControl {
        StepControl { dt_max: self.dt_max, tol_t: self.jump_tol, safety: self.safety }
    }

    pub fn sampling(&self) -> Sampling {
        Sampling::new(self.trajectories, self.seed).with_threads(self.threads).with_control(self.control())
    }

    pub fn correlation_method(&self) -> CorrelationMethod {
        method_of(self.method, self.epsilon)
    }
}

pub fn method_of(m: Method, epsilon: f64) -> CorrelationMethod {
    match m {
        Method::Doubled => CorrelationMethod::Doubled,
        Method::Kick => CorrelationMethod::Kick { epsilon },
        Method::Limit => CorrelationMethod::KickLimit,
        Method::Four => CorrelationMethod::Four,
    }
}

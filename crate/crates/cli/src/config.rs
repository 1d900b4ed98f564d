//! Experiment configuration: a TOML file with `geometry`, `physics`,
//! `carleman`, `inverse` and `output` sections. Parsing reports the path of
//! the first offending field.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// A schema violation at a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn schema(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub carleman: CarlemanConfig,
    #[serde(default)]
    pub inverse: InverseConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterfaceSpec {
    Disk {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// `ρ(θ) = c0 + Σ c_k cos(kθ)` about `center`.
    Fourier {
        c0: f64,
        modes: Vec<(u32, f64)>,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Plain-text `theta,rho` pairs, one per line; `#` starts a comment.
    File {
        path: String,
        #[serde(default)]
        center: [f64; 2],
    },
}

fn default_samples() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub outer: Rect,
    pub interface: InterfaceSpec,
    /// Center of the single weight checked by `weight-verify`.
    pub x0: [f64; 2],
    pub x1: [f64; 2],
    pub x2: [f64; 2],
}

/// A real field on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · exp(−|x − center|² / (2 width²))`.
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    /// `base + amplitude · cos(k₀x) cos(k₁y)`.
    CosProduct {
        base: f64,
        amplitude: f64,
        k: [f64; 2],
    },
}

/// Initial data: a real profile, optionally rotated onto the imaginary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub profile: ScalarSpec,
    #[serde(default)]
    pub imaginary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Zero,
    FromInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub a1: f64,
    pub a2: f64,
    pub p: ScalarSpec,
    pub y0: InitialSpec,
    #[serde(default = "default_boundary")]
    pub h: BoundarySpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub nx: usize,
    /// Optional; must agree with the square-cell count implied by `nx`.
    #[serde(default)]
    pub ny: Option<usize>,
    pub dt: f64,
    /// Lower bound required of `|y0|`.
    #[serde(default = "default_lower_bound")]
    pub r: f64,
    /// `L∞` bound on admissible potentials.
    #[serde(default = "default_q_bound")]
    pub q_bound: f64,
}

fn default_boundary() -> BoundarySpec {
    BoundarySpec::FromInitial
}

fn default_lower_bound() -> f64 {
    carleman_lab::inverse::DEFAULT_LOWER_BOUND
}

fn default_q_bound() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanConfig {
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(rename = "M2")]
    pub m2: f64,
    /// Inner and outer radius of the cutoff around `x0`.
    pub cutoff: [f64; 2],
    /// Grid for the sweep; defaults to `physics.nx`.
    #[serde(default)]
    pub nx: Option<usize>,
    /// Time clamp: the estimate is evaluated on `|t| ≤ T − delta_t`.
    /// Defaults to `T/64`.
    #[serde(default)]
    pub delta_t: Option<f64>,
    /// Even number of steps on `[−T, T]`.
    pub n_steps: usize,
    pub n_solved: usize,
    pub n_manufactured: usize,
    pub seed: u64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            s: vec![10.0, 20.0, 40.0, 80.0],
            lambda: vec![1.0, 2.0],
            m2: 1.0,
            cutoff: [0.1, 0.2],
            nx: None,
            delta_t: None,
            n_steps: 128,
            n_solved: 5,
            n_manufactured: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    pub beta: f64,
    pub max_iter: usize,
    /// Initial guess; also the regularization reference.
    pub q0: ScalarSpec,
    pub n_perturbations: usize,
    pub amplitudes: [f64; 2],
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            beta: 1e-6,
            max_iter: 100,
            q0: ScalarSpec::Zero,
            n_perturbations: 30,
            amplitudes: [1e-3, 1e-1],
            seed: 7,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            let path = if path == "." { "<root>".to_string() } else { path };
            schema(&path, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range and consistency checks that the type system does not express.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let g = &self.geometry;
        let o = g.outer;
        if !(o.x_max > o.x_min && o.y_max > o.y_min) {
            return Err(schema("geometry.outer", "need x_min < x_max and y_min < y_max"));
        }
        match &g.interface {
            InterfaceSpec::Disk { radius, samples, .. } => {
                positive("geometry.interface.radius", *radius)?;
                at_least("geometry.interface.samples", *samples, 16)?;
            }
            InterfaceSpec::Fourier { c0, samples, .. } => {
                positive("geometry.interface.c0", *c0)?;
                at_least("geometry.interface.samples", *samples, 16)?;
            }
            InterfaceSpec::File { path, .. } => {
                if path.is_empty() {
                    return Err(schema("geometry.interface.path", "empty path"));
                }
            }
        }
        let ph = &self.physics;
        positive("physics.a1", ph.a1)?;
        positive("physics.a2", ph.a2)?;
        positive("physics.T", ph.horizon)?;
        positive("physics.dt", ph.dt)?;
        if ph.dt > ph.horizon {
            return Err(schema("physics.dt", "must not exceed T"));
        }
        at_least("physics.nx", ph.nx, 4)?;
        positive("physics.r", ph.r)?;
        positive("physics.q_bound", ph.q_bound)?;
        scalar("physics.p", &ph.p)?;
        scalar("physics.y0.profile", &ph.y0.profile)?;
        let expected_ny = (o.y_max - o.y_min) / ((o.x_max - o.x_min) / ph.nx as f64);
        if (expected_ny - expected_ny.round()).abs() > 1e-8 {
            return Err(schema("physics.nx", format!("does not give square cells (ny = {expected_ny})")));
        }
        if let Some(ny) = ph.ny {
            if ny != expected_ny.round() as usize {
                return Err(schema("physics.ny", format!("square cells need ny = {}", expected_ny.round())));
            }
        }

        let c = &self.carleman;
        nonempty_positive("carleman.s", &c.s)?;
        nonempty_positive("carleman.lambda", &c.lambda)?;
        positive("carleman.M2", c.m2)?;
        if !(c.cutoff[0] > 0.0 && c.cutoff[1] > c.cutoff[0]) {
            return Err(schema("carleman.cutoff", "need 0 < inner < outer"));
        }
        if let Some(nx) = c.nx {
            at_least("carleman.nx", nx, 4)?;
        }
        if let Some(d) = c.delta_t {
            if !(d > 0.0 && d < self.physics.horizon) {
                return Err(schema("carleman.delta_t", "need 0 < delta_t < T"));
            }
        }
        if c.n_steps < 4 || !c.n_steps.is_multiple_of(2) {
            return Err(schema("carleman.n_steps", "need an even count ≥ 4"));
        }

        let inv = &self.inverse;
        if !(inv.beta >= 0.0) {
            return Err(schema("inverse.beta", "must be ≥ 0"));
        }
        scalar("inverse.q0", &inv.q0)?;
        let [lo, hi] = inv.amplitudes;
        if !(lo > 0.0 && hi >= lo) {
            return Err(schema("inverse.amplitudes", "need 0 < low ≤ high"));
        }
        if let Some(n) = inv.noise {
            if !(n.level >= 0.0) {
                return Err(schema("inverse.noise.level", "must be ≥ 0"));
            }
        }
        if self.output.directory.is_empty() {
            return Err(schema("output.directory", "empty path"));
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<(), SchemaError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(path, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), SchemaError> {
    if v >= min {
        Ok(())
    } else {
        Err(schema(path, format!("must be at least {min}, got {v}")))
    }
}

fn nonempty_positive(path: &str, v: &[f64]) -> Result<(), SchemaError> {
    if v.is_empty() {
        return Err(schema(path, "must not be empty"));
    }
    for (i, &x) in v.iter().enumerate() {
        positive(&format!("{path}[{i}]"), x)?;
    }
    Ok(())
}

fn scalar(path: &str, spec: &ScalarSpec) -> Result<(), SchemaError> {
    match spec {
        ScalarSpec::Gaussian { width, .. } => positive(&format!("{path}.width"), *width),
        ScalarSpec::Zero | ScalarSpec::Constant { .. } | ScalarSpec::CosProduct { .. } => Ok(()),
    }
}

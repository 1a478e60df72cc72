//! Experiment configuration: TOML, or the same structure as JSON.

use std::path::{Path, PathBuf};

use gibbs_forge::approx::ThinningRule;
use gibbs_forge::diagnostics::TestFunction;
use gibbs_forge::models::{Intensity, Model, ModelSpec};
use gibbs_forge::samplers::Sampler;
use gibbs_forge::{Point, PointConfig, Window};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sample,
    Couple,
    Gnz,
    EmptySpace,
    OneArm,
    Bounds,
    Matern,
    Validate,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Sample,
        Experiment::Couple,
        Experiment::Gnz,
        Experiment::EmptySpace,
        Experiment::OneArm,
        Experiment::Bounds,
        Experiment::Matern,
        Experiment::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Couple => "couple",
            Experiment::Gnz => "gnz",
            Experiment::EmptySpace => "empty_space",
            Experiment::OneArm => "one_arm",
            Experiment::Bounds => "bounds",
            Experiment::Matern => "matern",
            Experiment::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }
}

fn default_replicates() -> usize {
    1000
}

fn default_n_z() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Initial common draws per retention probability.
    #[serde(default = "default_n_z")]
    pub n_z: usize,
    /// Stop after this many seconds and flag the results as partial.
    #[serde(default)]
    pub wall_clock_secs: Option<f64>,
    /// Worker threads; `GIBBS_FORGE_THREADS` takes precedence.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { replicates: default_replicates(), n_z: default_n_z(), wall_clock_secs: None, threads: None }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: default_dir() }
    }
}

/// Experiment-specific settings; each experiment reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub sampler: Option<Sampler>,
    #[serde(default)]
    pub functions: Vec<TestFunction>,
    /// Quadrature nodes for the GNZ right-hand side.
    pub nodes: Option<usize>,
    /// Region `B` of the empty-space probability.
    pub region: Option<Window>,
    #[serde(default)]
    pub us: Vec<f64>,
    #[serde(default)]
    pub vs: Vec<f64>,
    /// Intensity of the Boolean model in the one-arm experiment.
    pub alpha: Option<f64>,
    pub thinning: Option<ThinningRule>,
    pub r_radius: Option<f64>,
    pub s_radius: Option<f64>,
    /// Extra room around the window on which `ξ` is simulated.
    pub domain_margin: Option<f64>,
    pub c: Option<f64>,
    #[serde(default)]
    pub ns: Vec<f64>,
    /// Scale applied to the default budgets of `validate`.
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub model: Option<ModelSpec>,
    pub window: Option<Window>,
    #[serde(default)]
    pub boundary: Vec<Point>,
    #[serde(default)]
    pub boundary_prime: Vec<Point>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub params: Params,
}

/// A config that passed validation, with the model built.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub model: Option<Model>,
    pub window: Option<Window>,
    pub boundary: PointConfig,
    pub boundary_prime: PointConfig,
}

impl ExperimentConfig {
    pub fn from_str_as(text: &str, json: bool) -> Result<Self, CliError> {
        if json {
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(e.to_string()))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Ok((Self::from_str_as(text, json)?, bytes))
    }

    pub fn validate(self) -> Result<Validated, CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let needs_model = self.experiment != Experiment::Validate;
        let model = match (&self.model, needs_model) {
            (Some(spec), _) => Some(Model::new(spec.clone()).map_err(|e| CliError::Validation(e.to_string()))?),
            (None, true) => return bad(format!("experiment {} needs a [model] block", self.experiment.name())),
            (None, false) => None,
        };
        let window = self.window;
        let needs_window = matches!(
            self.experiment,
            Experiment::Sample | Experiment::Couple | Experiment::Gnz | Experiment::EmptySpace | Experiment::Bounds
        );
        if needs_window && window.is_none() {
            return bad(format!("experiment {} needs a [window] block", self.experiment.name()));
        }
        if let (Some(m), Some(w)) = (&model, &window) {
            if m.spec().dim != w.dim() {
                return bad(format!("model dimension {} but window dimension {}", m.spec().dim, w.dim()));
            }
        }
        let b = &self.budget;
        if b.replicates == 0 || b.replicates > 100_000_000 {
            return bad(format!("budget.replicates must be in 1..=1e8, got {}", b.replicates));
        }
        if b.n_z < 16 || b.n_z > 1 << 24 {
            return bad(format!("budget.n_z must be in 16..=2^24, got {}", b.n_z));
        }
        if let Some(t) = b.wall_clock_secs {
            if !(t > 0.0 && t.is_finite()) {
                return bad("budget.wall_clock_secs must be positive".into());
            }
        }
        if b.threads == Some(0) {
            return bad("budget.threads must be positive".into());
        }
        let boundary = points(&self.boundary, "boundary")?;
        let boundary_prime = points(&self.boundary_prime, "boundary_prime")?;
        if let Some(w) = &window {
            for p in boundary.iter().chain(boundary_prime.iter()) {
                if p.dim() != w.dim() {
                    return bad("boundary points must match the window dimension".into());
                }
                if w.contains(p.loc()) {
                    return bad(format!("boundary point {:?} lies inside the window", p.loc()));
                }
            }
        }
        if let Some(m) = &model {
            for p in boundary.iter().chain(boundary_prime.iter()) {
                if !m.marks().admits(p) {
                    return bad(format!("boundary point {:?} has marks outside the mark space", p.loc()));
                }
            }
        }
        self.validate_params()?;
        Ok(Validated { model, window, boundary, boundary_prime, config: self })
    }

    fn validate_params(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |m: &str| Err(CliError::Validation(m.to_string()));
        let positive = |v: Option<f64>| v.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(p.alpha) || !positive(p.c) || !positive(p.r_radius) || !positive(p.s_radius) || !positive(p.scale) {
            return bad("params.alpha, c, r_radius, s_radius and scale must be positive and finite");
        }
        if p.domain_margin.is_some_and(|m| !(m >= 0.0 && m.is_finite())) {
            return bad("params.domain_margin must be non-negative");
        }
        if p.us.iter().chain(&p.vs).chain(&p.ns).any(|x| !(*x > 0.0 && x.is_finite())) {
            return bad("params.us, vs and ns must be positive and finite");
        }
        if p.nodes == Some(0) {
            return bad("params.nodes must be positive");
        }
        if let Some(t) = &p.thinning {
            t.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        if let Some(w) = &self.window {
            for f in &p.functions {
                f.validate(w).map_err(|e| CliError::Validation(e.to_string()))?;
            }
        }
        match self.experiment {
            Experiment::Gnz if p.functions.is_empty() => bad("gnz needs params.functions"),
            Experiment::EmptySpace if p.region.is_none() => bad("empty_space needs params.region"),
            Experiment::OneArm if p.us.is_empty() || p.vs.is_empty() => bad("one_arm needs params.us and params.vs"),
            Experiment::Bounds if p.thinning.is_none() => bad("bounds needs params.thinning"),
            Experiment::Matern if p.c.is_none() || p.ns.is_empty() => bad("matern needs params.c and params.ns"),
            _ => Ok(()),
        }
    }
}

fn points(v: &[Point], what: &str) -> Result<PointConfig, CliError> {
    if v.iter().any(|p| !p.is_finite()) {
        return Err(CliError::Validation(format!("{what} has non-finite coordinates")));
    }
    PointConfig::new(v.to_vec()).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

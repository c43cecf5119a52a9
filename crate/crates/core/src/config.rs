//! Run configurations and the built-in example setups.
//!
//! A configuration is a JSON document:
//!
//! ```json
//! {
//!   "problem": { "layers": {...}, "interfaces": {...}, "boundary": {...}, "initial": [...] },
//!   "times": [0.01, 0.1, 1.0],
//!   "grid": 401,
//!   "method": "utm",
//!   "compare_to": "fourier",
//!   "contour": { "theta_max": 15.0, "count": 2001, "radius": 1.0, "fixed_T": null },
//!   "output": "a.csv"
//! }
//! ```
//!
//! `problem` may instead be `{ "file": "path/to/problem.json" }`, resolved
//! relative to the configuration file.

use crate::contour::ContourSpec;
use crate::evaluate::SolveOptions;
use crate::oracles::{CrankNicolson, DEFAULT_FOURIER_TERMS};
use crate::problem::{
    BoundarySpec, InitialCondition, InterfaceSpec, LayerStack, Problem, TimeSignal, ValidatedProblem,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Utm,
    Fd,
    Fourier,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Utm => "utm",
            Method::Fd => "fd",
            Method::Fourier => "fourier",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    File { file: PathBuf },
    Inline(Problem),
}

/// Overrides of the default contour; unset fields keep the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Multiplier on the curve's distance from the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, rename = "fixed_T", skip_serializing_if = "Option::is_none")]
    pub fixed_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSettings {
    pub cells_per_layer: usize,
    pub dt: f64,
}

impl Default for FdSettings {
    fn default() -> Self {
        let cn = CrankNicolson::default();
        Self { cells_per_layer: cn.cells_per_layer, dt: cn.dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

fn default_grid() -> usize {
    401
}

fn default_terms() -> usize {
    DEFAULT_FOURIER_TERMS
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub times: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "Method::default_method")]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_to: Option<Method>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub contour: ContourOverrides,
    #[serde(default, skip_serializing_if = "is_default")]
    pub fd: FdSettings,
    #[serde(default = "default_terms")]
    pub fourier_terms: usize,
    /// Excludes the end points from error reports; by default they are
    /// excluded exactly when the boundary data are nonhomogeneous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_endpoints: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub format: OutputFormat,
}

impl Method {
    fn default_method() -> Self {
        Method::Utm
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    /// Parse and I/O failures, as opposed to well-formed but invalid settings.
    pub fn is_parse(&self) -> bool {
        !matches!(self, ConfigError::Invalid(_))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a configuration and inlines a referenced problem file.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut config = Self::from_json(&text)?;
        if let ProblemSource::File { file } = &config.problem {
            let file = path.parent().map_or_else(|| file.clone(), |dir| dir.join(file));
            let problem: Problem = serde_json::from_str(&read(&file)?)?;
            config.problem = ProblemSource::Inline(problem);
        }
        Ok(config)
    }

    /// A configuration solving `problem` with default settings.
    pub fn for_problem(problem: &ValidatedProblem, times: Vec<f64>) -> Self {
        Self {
            problem: ProblemSource::Inline(problem.original().clone()),
            times,
            grid: default_grid(),
            method: Method::Utm,
            compare_to: None,
            contour: ContourOverrides::default(),
            fd: FdSettings::default(),
            fourier_terms: default_terms(),
            exclude_endpoints: None,
            output: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn problem(&self) -> Result<&Problem, ConfigError> {
        match &self.problem {
            ProblemSource::Inline(p) => Ok(p),
            ProblemSource::File { file } => {
                Err(ConfigError::Invalid(format!("problem file {} was not loaded", file.display())))
            }
        }
    }

    /// Checks the settings that do not depend on the problem.
    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.times.is_empty() {
            return bad("no output times".into());
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("times must be finite and nonnegative".into());
        }
        if self.times.windows(2).any(|w| w[0] > w[1]) {
            return bad("times must be sorted".into());
        }
        if self.grid < 3 {
            return bad(format!("grid must have at least 3 points, got {}", self.grid));
        }
        let c = &self.contour;
        if c.theta_max.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return bad("theta_max must be positive".into());
        }
        if c.count.is_some_and(|n| n < 16) {
            return bad("contour count must be at least 16".into());
        }
        if c.radius.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("radius must be positive".into());
        }
        if let Some(ft) = c.fixed_t {
            let last = self.times.last().copied().unwrap_or(0.0);
            if !(ft.is_finite() && ft >= last) {
                return bad(format!("fixed_T = {ft} is below the last output time {last}"));
            }
        }
        if self.fd.cells_per_layer < 2 || !(self.fd.dt > 0.0) {
            return bad("fd needs at least 2 cells per layer and dt > 0".into());
        }
        if self.fourier_terms == 0 {
            return bad("fourier_terms must be positive".into());
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut options = SolveOptions::default();
        let c = &self.contour;
        let spec: &mut ContourSpec = &mut options.contour;
        if let Some(v) = c.theta_max {
            spec.theta_max = v;
        }
        if let Some(v) = c.count {
            spec.count = v;
        }
        if let Some(v) = c.radius {
            spec.radius = v;
        }
        options.fixed_horizon = c.fixed_t;
        options
    }

    pub fn crank_nicolson(&self) -> CrankNicolson {
        CrankNicolson { cells_per_layer: self.fd.cells_per_layer, dt: self.fd.dt, ..CrankNicolson::default() }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    A,
    A0,
    B,
    C,
    D,
    E,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown example {0:?}; expected one of A, A0, B, C, D, E, F")]
pub struct UnknownExample(pub String);

impl FromStr for Example {
    type Err = UnknownExample;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "A" => Example::A,
            "A0" => Example::A0,
            "B" => Example::B,
            "C" => Example::C,
            "D" => Example::D,
            "E" => Example::E,
            "F" => Example::F,
            _ => return Err(UnknownExample(s.to_string())),
        })
    }
}

impl Example {
    pub const ALL: [Example; 7] = [Example::A, Example::A0, Example::B, Example::C, Example::D, Example::E, Example::F];

    pub fn name(self) -> &'static str {
        match self {
            Example::A => "A",
            Example::A0 => "A0",
            Example::B => "B",
            Example::C => "C",
            Example::D => "D",
            Example::E => "E",
            Example::F => "F",
        }
    }

    pub fn problem(self) -> Problem {
        match self {
            Example::A => cubic_on_three_layers(1.0),
            Example::A0 => cubic_on_three_layers(0.0),
            Example::B => Problem {
                layers: LayerStack::uniform(0.0, 1.0, alternating(10)),
                interfaces: InterfaceSpec::perfect(),
                boundary: BoundarySpec::dirichlet(TimeSignal::constant(1.0), TimeSignal::zero()),
                initial: vec![InitialCondition::constant(0.0); 10],
            },
            Example::C => Problem {
                layers: LayerStack::uniform(0.0, 1.0, vec![0.2f64.sqrt(), 0.1, 0.1f64.sqrt(), 1.0]),
                interfaces: InterfaceSpec::perfect(),
                boundary: BoundarySpec {
                    beta: [1.0, 0.0, 1.0, 1.0],
                    left: TimeSignal::Cosine { amplitude: 1.0, frequency: 1.0 },
                    right: TimeSignal::zero(),
                },
                initial: vec![InitialCondition::constant(1.0); 4],
            },
            Example::D => Problem {
                layers: LayerStack::uniform(0.0, 1.0, alternating(10)),
                interfaces: InterfaceSpec::imperfect(vec![0.5; 9]),
                boundary: BoundarySpec {
                    beta: [1.0, 0.0, 0.0, 1.0],
                    left: TimeSignal::constant(1.0),
                    right: TimeSignal::zero(),
                },
                initial: vec![InitialCondition::constant(0.0); 10],
            },
            Example::E => sine_stack(199),
            Example::F => Problem {
                layers: LayerStack::uniform(0.0, 1.0, sine_sigmas(200)),
                interfaces: InterfaceSpec::imperfect(vec![0.5; 199]),
                boundary: BoundarySpec { beta: [0.0, 1.0, 1.0, 0.0], left: TimeSignal::zero(), right: TimeSignal::zero() },
                initial: vec![InitialCondition::polynomial(vec![0.0, 1.0]); 200],
            },
        }
    }

    pub fn config(self) -> RunConfig {
        let mut config = RunConfig {
            problem: ProblemSource::Inline(self.problem()),
            times: vec![0.02, 0.1, 0.5],
            grid: default_grid(),
            method: Method::Utm,
            compare_to: Some(Method::Fd),
            contour: ContourOverrides::default(),
            fd: FdSettings::default(),
            fourier_terms: default_terms(),
            exclude_endpoints: None,
            output: Some(PathBuf::from(format!("example_{}.csv", self.name().to_ascii_lowercase()))),
            format: OutputFormat::Csv,
        };
        match self {
            Example::A => {
                config.times = vec![0.01, 0.1, 1.0];
                config.compare_to = Some(Method::Fourier);
            }
            Example::A0 => {
                config.times = vec![0.001, 0.01, 0.1];
                config.compare_to = Some(Method::Fourier);
            }
            Example::C => {
                config.times = vec![0.1, 0.25, 0.5];
                config.compare_to = None;
            }
            Example::E | Example::F => {
                config.fd = FdSettings { cells_per_layer: 20, dt: 1e-4 };
            }
            Example::B | Example::D => {}
        }
        config
    }
}

/// Example E's stack and data with `n` interfaces.
pub fn sine_stack(n: usize) -> Problem {
    Problem {
        layers: LayerStack::uniform(0.0, 1.0, sine_sigmas(n + 1)),
        interfaces: InterfaceSpec::perfect(),
        boundary: BoundarySpec::dirichlet(TimeSignal::constant(0.5), TimeSignal::zero()),
        initial: vec![InitialCondition::constant(1.0); n + 1],
    }
}

fn cubic_on_three_layers(right: f64) -> Problem {
    Problem {
        layers: LayerStack::uniform(0.0, 1.0, vec![1.0; 3]),
        interfaces: InterfaceSpec::perfect(),
        boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::constant(right)),
        initial: vec![InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]); 3],
    }
}

/// `1, sqrt(0.1), 1, ...` starting from the first layer.
fn alternating(layers: usize) -> Vec<f64> {
    (1..=layers).map(|j| if j % 2 == 1 { 1.0 } else { 0.1f64.sqrt() }).collect()
}

fn sine_sigmas(layers: usize) -> Vec<f64> {
    (1..=layers).map(|j| (1.1 + (j as f64).sin()).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate, InterfaceKind};

    #[test]
    fn examples_validate() {
        for ex in Example::ALL {
            let config = ex.config();
            config.check().unwrap();
            let p = validate(config.problem().unwrap()).unwrap();
            assert_eq!(p.length(), 1.0, "{}", ex.name());
        }
    }

    #[test]
    fn example_parameters() {
        let d = validate(&Example::D.problem()).unwrap();
        assert_eq!(d.n_interfaces(), 9);
        assert_eq!(d.kind(), InterfaceKind::Imperfect);
        assert_eq!(d.contact(8), 0.5);
        assert_eq!(d.boundary().beta, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(d.sigma(1), 0.1f64.sqrt());
        let f = validate(&Example::F.problem()).unwrap();
        assert_eq!(f.n_interfaces(), 199);
        assert_eq!(f.initial_value(0.25), 0.25);
        assert_eq!(f.sigma(0), (1.1 + 1f64.sin()).sqrt());
        let c = validate(&Example::C.problem()).unwrap();
        assert_eq!(c.sigma(1).powi(2), 0.010000000000000002);
        assert_eq!(c.boundary().left.eval(1.0), 1f64.cos());
    }

    #[test]
    fn names_parse_case_insensitively() {
        for ex in Example::ALL {
            assert_eq!(ex.name().to_lowercase().parse::<Example>().unwrap(), ex);
        }
        assert!("G".parse::<Example>().is_err());
    }

    #[test]
    fn config_round_trips_problem() {
        for ex in Example::ALL {
            let p = validate(&ex.problem()).unwrap();
            let config = RunConfig::for_problem(&p, vec![0.1]);
            let back = RunConfig::from_json(&config.to_json()).unwrap();
            assert_eq!(back, config);
            assert_eq!(validate(back.problem().unwrap()).unwrap(), p);
        }
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let text = serde_json::json!({
            "problem": Example::A.problem(),
            "times": [0.1],
            "contour": { "fixed_T": 0.5, "count": 801 }
        })
        .to_string();
        let config = RunConfig::from_json(&text).unwrap();
        assert_eq!(config.grid, 401);
        assert_eq!(config.method, Method::Utm);
        let opts = config.solve_options();
        assert_eq!(opts.fixed_horizon, Some(0.5));
        assert_eq!(opts.contour.count, 801);
        assert_eq!(opts.contour.theta_max, ContourSpec::default().theta_max);
    }

    #[test]
    fn invalid_settings_are_reported() {
        let mut config = Example::A.config();
        config.times = vec![0.5, 0.1];
        assert!(matches!(config.check(), Err(ConfigError::Invalid(_))));
        config.times = vec![0.1];
        config.grid = 2;
        assert!(config.check().is_err());
        assert!(RunConfig::from_json("{ not json").unwrap_err().is_parse());
        assert!(RunConfig::from_json(r#"{"times": [1]}"#).unwrap_err().is_parse());
    }

    #[test]
    fn problem_file_is_resolved_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.json"), serde_json::to_string(&Example::B.problem()).unwrap()).unwrap();
        std::fs::write(dir.path().join("run.json"), r#"{"problem": {"file": "b.json"}, "times": [0.1]}"#).unwrap();
        let config = RunConfig::from_path(&dir.path().join("run.json")).unwrap();
        assert_eq!(config.problem().unwrap(), &Example::B.problem());
    }
}

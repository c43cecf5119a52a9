//! Command implementations behind the `utm-heat` binary: solving a configured
//! problem, comparing two methods, and running the built-in examples.

use crate::config::{ConfigError, Example, Method, RunConfig};
use crate::evaluate::{output_grid, solve_field, EvalError, SolutionField};
use crate::oracles::{crank_nicolson, fourier_field, relative_error, ErrorReport, OracleError};
use crate::problem::{validate, ValidatedProblem, ValidationError};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid problem: {0}")]
    Validation(#[from] ValidationError),
    #[error("{method} cannot solve this problem: {reason}")]
    Unsupported { method: Method, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for unreadable configurations, 2 for invalid settings or problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(e) if e.is_parse() => 1,
            CliError::Output { .. } => 1,
            CliError::Config(_) | CliError::Validation(_) | CliError::Unsupported { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::OutOfDomain { .. } | EvalError::TableHorizonTooSmall { .. } | EvalError::NonPositiveTime(_) => {
                CliError::Config(ConfigError::Invalid(e.to_string()))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn oracle_error(method: Method, e: OracleError) -> CliError {
    match e {
        OracleError::UnsupportedSetup(reason) => CliError::Unsupported { method, reason },
        other => CliError::Numerical(other.to_string()),
    }
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub times: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub output: Option<PathBuf>,
    pub oracle: Option<Method>,
    pub theta_max: Option<f64>,
    pub nodes: Option<usize>,
    pub fixed_t: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(t) = &self.times {
            config.times = t.clone();
        }
        if let Some(g) = self.grid {
            config.grid = g;
        }
        if let Some(o) = &self.output {
            config.output = Some(o.clone());
        }
        if let Some(m) = self.oracle {
            config.compare_to = Some(m);
        }
        if let Some(v) = self.theta_max {
            config.contour.theta_max = Some(v);
        }
        if let Some(v) = self.nodes {
            config.contour.count = Some(v);
        }
        if let Some(v) = self.fixed_t {
            config.contour.fixed_t = Some(v);
        }
    }
}

/// Result of a solve or compare run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub field: SolutionField,
    pub csv: String,
    pub reports: Vec<ErrorReport>,
    pub reference: Option<Method>,
    pub written: Vec<PathBuf>,
}

impl RunOutput {
    /// `t,E` lines, one per output time.
    pub fn error_table(&self) -> String {
        let mut out = String::from("t,E,endpoints_excluded,grid\n");
        for r in &self.reports {
            let _ = writeln!(out, "{},{},{},{}", fmt_f64(r.time), fmt_f64(r.error), r.excluded_endpoints, r.grid_size);
        }
        out
    }
}

/// Shortest representation that parses back to the same value; exponent
/// notation outside `[1e-5, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn validated(config: &RunConfig) -> Result<ValidatedProblem, CliError> {
    config.check()?;
    Ok(validate(config.problem()?)?)
}

/// Field of `method` on the configured grid and times.
pub fn compute_field(config: &RunConfig, problem: &ValidatedProblem, method: Method) -> Result<SolutionField, CliError> {
    let grid = output_grid(problem, config.grid);
    match method {
        Method::Utm => Ok(solve_field(problem, &grid, &config.times, &config.solve_options())?),
        Method::Fd => crank_nicolson(problem, &config.crank_nicolson(), &grid, &config.times)
            .map_err(|e| oracle_error(method, e)),
        Method::Fourier => {
            fourier_field(problem, &grid, &config.times, config.fourier_terms).map_err(|e| oracle_error(method, e))
        }
    }
}

fn metadata(config: &RunConfig, method: Method, field: &SolutionField) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "# method: {method}");
    match method {
        Method::Utm => {
            let o = config.solve_options();
            let _ = writeln!(
                m,
                "# contour: angle={} theta_max={} nodes={} radius={}",
                fmt_f64(o.contour.angle),
                fmt_f64(o.contour.theta_max),
                o.contour.count,
                fmt_f64(o.contour.radius)
            );
            match o.fixed_horizon {
                Some(h) => {
                    let _ = writeln!(m, "# horizon: fixed_T={}", fmt_f64(h));
                }
                None => m.push_str("# horizon: T=t\n"),
            }
            let d = &field.diagnostics;
            let _ = writeln!(m, "# max_residual: {}", fmt_f64(d.max_residual));
            let _ = writeln!(m, "# max_interpolated_fraction: {}", fmt_f64(d.max_interpolated_fraction));
            let _ = writeln!(m, "# max_imaginary_residue: {}", fmt_f64(d.max_imaginary_residue));
        }
        Method::Fd => {
            let _ = writeln!(m, "# fd: cells_per_layer={} dt={}", config.fd.cells_per_layer, fmt_f64(config.fd.dt));
        }
        Method::Fourier => {
            let _ = writeln!(m, "# fourier: terms={}", config.fourier_terms);
        }
    }
    let _ = writeln!(m, "# endpoint_caveat: {}", field.diagnostics.endpoint_caveat);
    for s in &field.interfaces {
        let _ = writeln!(
            m,
            "# interface {} x={} t={} u_left={} u_right={} flux_left={} flux_right={}",
            s.interface,
            fmt_f64(s.x),
            fmt_f64(field.times[s.time_index]),
            fmt_f64(s.left_value),
            fmt_f64(s.right_value),
            fmt_f64(s.left_flux),
            fmt_f64(s.right_flux)
        );
    }
    m
}

/// `x,t,layer,u,flux` rows (time-major) after a `#` metadata block; `flux`
/// is `sigma^2 u_x` and layers are numbered from 0.
pub fn render_csv(config: &RunConfig, method: Method, field: &SolutionField) -> String {
    let mut out = metadata(config, method, field);
    out.push_str("x,t,layer,u,flux\n");
    for (ti, t) in field.times.iter().enumerate() {
        let t = fmt_f64(*t);
        for (j, x) in field.grid_x.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(*x),
                t,
                field.layers[j],
                fmt_f64(field.values[ti][j]),
                fmt_f64(field.flux[ti][j])
            );
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let err = |source| CliError::Output { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(err)
}

/// `run.csv` becomes `run_errors.csv`.
pub fn error_table_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}_errors.csv"))
}

/// Solves with the configured method and writes the CSV to `output` if set.
pub fn run_solve(config: &RunConfig) -> Result<RunOutput, CliError> {
    let problem = validated(config)?;
    let field = compute_field(config, &problem, config.method)?;
    let csv = render_csv(config, config.method, &field);
    let mut written = Vec::new();
    if let Some(path) = &config.output {
        write_file(path, &csv)?;
        written.push(path.clone());
    }
    Ok(RunOutput { field, csv, reports: Vec::new(), reference: None, written })
}

/// Solves with `method`, evaluates `compare_to` on the same points and reports
/// the relative error per time. End points are excluded when the boundary data
/// are nonhomogeneous unless the configuration says otherwise.
pub fn run_compare(config: &RunConfig) -> Result<RunOutput, CliError> {
    let reference = config
        .compare_to
        .ok_or_else(|| ConfigError::Invalid("compare needs compare_to or --oracle".into()))?;
    let problem = validated(config)?;
    let field = compute_field(config, &problem, config.method)?;
    let other = if reference == config.method { field.clone() } else { compute_field(config, &problem, reference)? };
    let exclude = config.exclude_endpoints.unwrap_or(!problem.boundary().is_homogeneous());
    let reports = config
        .times
        .iter()
        .map(|&t| relative_error(&field, &other, t, exclude))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let csv = render_csv(config, config.method, &field);
    let mut out = RunOutput { field, csv, reports, reference: Some(reference), written: Vec::new() };
    if let Some(path) = &config.output {
        write_file(path, &out.csv)?;
        let table = error_table_path(path);
        write_file(&table, &out.error_table())?;
        out.written = vec![path.clone(), table];
    }
    Ok(out)
}

/// Runs a built-in example: a comparison when it names a reference method,
/// a plain solve otherwise.
pub fn run_example(example: Example, overrides: &Overrides) -> Result<RunOutput, CliError> {
    let mut config = example.config();
    overrides.apply(&mut config);
    if config.compare_to.is_some() {
        run_compare(&config)
    } else {
        run_solve(&config)
    }
}

/// Parses `0.01,0.1,1`.
pub fn parse_times(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad time {s:?}: {e}")))
        .collect()
}

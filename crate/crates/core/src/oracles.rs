//! Reference solutions used to check the transform solver: a sine series for a
//! single effective material, a Crank–Nicolson finite-difference scheme for
//! general stacks, the piecewise-linear steady state, and the relative error.

use crate::evaluate::{FieldDiagnostics, InterfaceSample, SolutionField};
use crate::linalg::{solve_real, BandedLu, SingularMatrix};
use crate::problem::{InitialCondition, InterfaceKind, ValidatedProblem};
use std::collections::HashMap;
use std::f64::consts::PI;

pub const DEFAULT_FOURIER_TERMS: usize = 400;
pub const DEFAULT_CELLS_PER_LAYER: usize = 200;
pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("setup not supported by this oracle: {0}")]
    UnsupportedSetup(String),
    #[error("singular step matrix: {0}")]
    SingularStep(SingularMatrix),
    #[error("no steady state: insulated ends with unbalanced fluxes")]
    NoSteadyState,
    #[error("fields do not share grid and time")]
    GridMismatch,
}

/// `integral_0^len (y^p) sin(k (a + y)) dy` and the cosine analogue for
/// `p = 0..=degree`, by integration by parts.
fn sine_cosine_moments(k: f64, a: f64, len: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    // moments of y^p sin(k y) and y^p cos(k y) on [0, len]
    let (s, c) = ((k * len).sin(), (k * len).cos());
    let mut ms = vec![0.0; degree + 1];
    let mut mc = vec![0.0; degree + 1];
    ms[0] = (1.0 - c) / k;
    mc[0] = s / k;
    for p in 1..=degree {
        let lp = len.powi(p as i32);
        ms[p] = -lp * c / k + p as f64 / k * mc[p - 1];
        mc[p] = lp * s / k - p as f64 / k * ms[p - 1];
    }
    let (sa, ca) = ((k * a).sin(), (k * a).cos());
    let sin_m = (0..=degree).map(|p| sa * mc[p] + ca * ms[p]).collect();
    let cos_m = (0..=degree).map(|p| ca * mc[p] - sa * ms[p]).collect();
    (sin_m, cos_m)
}

/// Sine-series solution on `[0, length]` with constant Dirichlet ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub sigma: f64,
    pub length: f64,
    pub left: f64,
    pub right: f64,
    pub coefficients: Vec<f64>,
}

impl FourierSeries {
    /// `pieces` are `(lo, hi, local coeffs)` polynomial pieces of the initial data
    /// in the series' own coordinate.
    pub fn new(sigma: f64, length: f64, left: f64, right: f64, pieces: &[(f64, f64, Vec<f64>)], terms: usize) -> Self {
        let coefficients = (1..=terms)
            .map(|m| {
                let k = m as f64 * PI / length;
                let mut acc = 0.0;
                for (lo, hi, coeffs) in pieces {
                    // subtract the steady line, expressed in the local variable
                    let slope = (right - left) / length;
                    let mut q = coeffs.clone();
                    if q.len() < 2 {
                        q.resize(2, 0.0);
                    }
                    q[0] -= left + slope * lo;
                    q[1] -= slope;
                    let (sm, _) = sine_cosine_moments(k, *lo, hi - lo, q.len() - 1);
                    acc += q.iter().zip(&sm).map(|(a, b)| a * b).sum::<f64>();
                }
                2.0 / length * acc
            })
            .collect();
        Self { sigma, length, left, right, coefficients }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let mut u = self.left + (self.right - self.left) * x / self.length;
        for (m, b) in self.coefficients.iter().enumerate() {
            let k = (m + 1) as f64 * PI / self.length;
            u += b * (-(self.sigma * k).powi(2) * t).exp() * (k * x).sin();
        }
        u
    }
}

/// `U(x, t)` for one material on `[0, length]` with Dirichlet values `a`, `b`.
#[allow(clippy::too_many_arguments)]
pub fn fourier_series_solution(
    sigma: f64,
    length: f64,
    a: f64,
    b: f64,
    u0: &InitialCondition,
    x: f64,
    t: f64,
    terms: usize,
) -> f64 {
    FourierSeries::new(sigma, length, a, b, &u0.pieces(0.0, length), terms).eval(x, t)
}

/// Series for a validated problem that reduces to a single material with
/// constant Dirichlet data.
pub fn fourier_series_for(problem: &ValidatedProblem, terms: usize) -> Result<FourierSeries, OracleError> {
    let sigma = problem.sigma(0);
    if (0..problem.n_layers()).any(|l| problem.sigma(l) != sigma) {
        return Err(OracleError::UnsupportedSetup("layers have different diffusivities".into()));
    }
    if problem.kind() != InterfaceKind::Perfect {
        return Err(OracleError::UnsupportedSetup("imperfect contact".into()));
    }
    let bc = problem.boundary();
    if bc.beta[1] != 0.0 || bc.beta[3] != 0.0 || bc.beta[0] == 0.0 || bc.beta[2] == 0.0 {
        return Err(OracleError::UnsupportedSetup("boundary conditions are not Dirichlet".into()));
    }
    let (Some(f1), Some(f2)) = (bc.left.constant_value(), bc.right.constant_value()) else {
        return Err(OracleError::UnsupportedSetup("boundary data are not constant".into()));
    };
    let mut pieces = Vec::new();
    for l in 0..problem.n_layers() {
        pieces.extend(problem.initial(l).pieces(problem.breakpoint(l), problem.breakpoint(l + 1)));
    }
    Ok(FourierSeries::new(sigma, problem.length(), f1 / bc.beta[0], f2 / bc.beta[2], &pieces, terms))
}

/// Sine-series field on original-coordinate points.
pub fn fourier_field(problem: &ValidatedProblem, grid_x: &[f64], times: &[f64], terms: usize) -> Result<SolutionField, OracleError> {
    let series = fourier_series_for(problem, terms)?;
    let off = problem.offset();
    let values = times
        .iter()
        .map(|&t| {
            grid_x
                .iter()
                .map(|&x| if t == 0.0 { problem.initial_value(x - off) } else { series.eval(x - off, t) })
                .collect()
        })
        .collect();
    Ok(plain_field(problem, grid_x, times, values, Vec::new()))
}

fn plain_field(
    problem: &ValidatedProblem,
    grid_x: &[f64],
    times: &[f64],
    values: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
) -> SolutionField {
    SolutionField {
        grid_x: grid_x.to_vec(),
        times: times.to_vec(),
        layers: grid_x.iter().map(|&x| problem.layer_of(x - problem.offset())).collect(),
        values,
        flux,
        interfaces: Vec::new(),
        diagnostics: FieldDiagnostics::default(),
    }
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrankNicolson {
    pub cells_per_layer: usize,
    pub dt: f64,
    /// Implicit Euler half steps replacing the first Crank–Nicolson step.
    pub startup_steps: usize,
}

impl Default for CrankNicolson {
    fn default() -> Self {
        Self { cells_per_layer: DEFAULT_CELLS_PER_LAYER, dt: DEFAULT_DT, startup_steps: 4 }
    }
}

struct Discretization<'a> {
    problem: &'a ValidatedProblem,
    cells: usize,
    h: Vec<f64>,
}

impl<'a> Discretization<'a> {
    fn size(&self) -> usize {
        self.problem.n_layers() * (self.cells + 1)
    }

    fn index(&self, layer: usize, i: usize) -> usize {
        layer * (self.cells + 1) + i
    }

    fn x(&self, layer: usize, i: usize) -> f64 {
        self.problem.breakpoint(layer) + i as f64 * self.h[layer]
    }

    /// One-sided second-order derivative stencil at the left (`forward`) or right end of a layer.
    fn end_derivative(&self, layer: usize, forward: bool) -> [(usize, f64); 3] {
        let h = self.h[layer];
        let n = self.cells;
        if forward {
            [(self.index(layer, 0), -1.5 / h), (self.index(layer, 1), 2.0 / h), (self.index(layer, 2), -0.5 / h)]
        } else {
            [(self.index(layer, n), 1.5 / h), (self.index(layer, n - 1), -2.0 / h), (self.index(layer, n - 2), 0.5 / h)]
        }
    }

    /// Constraint rows `(row, entries)`; the right-hand side is filled separately.
    fn constraints(&self) -> Vec<(usize, Vec<(usize, f64)>)> {
        let p = self.problem;
        let n_layers = p.n_layers();
        let beta = p.boundary().beta;
        let mut out = Vec::new();
        let mut row = vec![(self.index(0, 0), beta[0])];
        row.extend(self.end_derivative(0, true).iter().map(|&(j, w)| (j, beta[1] * w)));
        out.push((self.index(0, 0), row));
        for i in 0..n_layers - 1 {
            let (l, r) = (i, i + 1);
            let (sl, sr) = (p.sigma(l).powi(2), p.sigma(r).powi(2));
            let ul = self.index(l, self.cells);
            let ur = self.index(r, 0);
            let dl = self.end_derivative(l, false);
            let dr = self.end_derivative(r, true);
            match p.kind() {
                InterfaceKind::Perfect => {
                    out.push((ul, vec![(ul, 1.0), (ur, -1.0)]));
                    let mut row: Vec<(usize, f64)> = dl.iter().map(|&(j, w)| (j, sl * w)).collect();
                    row.extend(dr.iter().map(|&(j, w)| (j, -sr * w)));
                    out.push((ur, row));
                }
                InterfaceKind::Imperfect => {
                    let hc = p.contact(i);
                    let mut row: Vec<(usize, f64)> = dl.iter().map(|&(j, w)| (j, sl * w)).collect();
                    row.extend([(ur, -hc), (ul, hc)]);
                    out.push((ul, row));
                    let mut row: Vec<(usize, f64)> = dr.iter().map(|&(j, w)| (j, sr * w)).collect();
                    row.extend([(ur, -hc), (ul, hc)]);
                    out.push((ur, row));
                }
            }
        }
        let last = n_layers - 1;
        let end = self.index(last, self.cells);
        let mut row = vec![(end, beta[2])];
        row.extend(self.end_derivative(last, false).iter().map(|&(j, w)| (j, beta[3] * w)));
        out.push((end, row));
        out
    }

    /// Matrix `I - theta dt L` on differential rows plus the constraint rows.
    fn step_matrix(&self, dt_theta: f64) -> Result<BandedLu, OracleError> {
        let mut entries = Vec::new();
        for l in 0..self.problem.n_layers() {
            let c = dt_theta * self.problem.sigma(l).powi(2) / self.h[l].powi(2);
            for i in 1..self.cells {
                let g = self.index(l, i);
                entries.extend([(g, g - 1, -c), (g, g, 1.0 + 2.0 * c), (g, g + 1, -c)]);
            }
        }
        for (row, cols) in self.constraints() {
            entries.extend(cols.into_iter().map(|(j, w)| (row, j, w)));
        }
        BandedLu::factor(self.size(), 3, 3, &entries).map_err(OracleError::SingularStep)
    }

    /// Right-hand side for a step from `u` over `dt` with weight `theta` on the new level.
    fn step_rhs(&self, u: &[f64], dt: f64, theta: f64, t_new: f64) -> Vec<f64> {
        let p = self.problem;
        let mut b = vec![0.0; self.size()];
        for l in 0..p.n_layers() {
            let c = (1.0 - theta) * dt * p.sigma(l).powi(2) / self.h[l].powi(2);
            for i in 1..self.cells {
                let g = self.index(l, i);
                b[g] = u[g] + c * (u[g - 1] - 2.0 * u[g] + u[g + 1]);
            }
        }
        b[self.index(0, 0)] = p.boundary().left.eval(t_new);
        b[self.index(p.n_layers() - 1, self.cells)] = p.boundary().right.eval(t_new);
        b
    }

    /// Value and `sigma^2 u_x` at normalized `x` in `layer`, by quadratic interpolation.
    fn sample(&self, u: &[f64], layer: usize, x: f64) -> (f64, f64) {
        let h = self.h[layer];
        let s = (x - self.problem.breakpoint(layer)) / h;
        let i0 = (s.floor() as isize).clamp(0, self.cells as isize - 2) as usize;
        let r = s - i0 as f64;
        let (a, b, c) = (u[self.index(layer, i0)], u[self.index(layer, i0 + 1)], u[self.index(layer, i0 + 2)]);
        let value = a * (r - 1.0) * (r - 2.0) / 2.0 - b * r * (r - 2.0) + c * r * (r - 1.0) / 2.0;
        let slope = (a * (2.0 * r - 3.0) / 2.0 - b * (2.0 * r - 2.0) + c * (2.0 * r - 1.0) / 2.0) / h;
        (value, self.problem.sigma(layer).powi(2) * slope)
    }
}

/// Crank–Nicolson field on original-coordinate points at the requested times.
///
/// Each interface carries one unknown per side; the interface and Robin
/// conditions use one-sided three-point derivatives and are imposed at the
/// new time level. The first step is replaced by implicit Euler half steps.
pub fn crank_nicolson(
    problem: &ValidatedProblem,
    settings: &CrankNicolson,
    grid_x: &[f64],
    times: &[f64],
) -> Result<SolutionField, OracleError> {
    if settings.cells_per_layer < 3 {
        return Err(OracleError::UnsupportedSetup("need at least 3 cells per layer".into()));
    }
    let n_layers = problem.n_layers();
    let d = Discretization {
        problem,
        cells: settings.cells_per_layer,
        h: (0..n_layers)
            .map(|l| (problem.breakpoint(l + 1) - problem.breakpoint(l)) / settings.cells_per_layer as f64)
            .collect(),
    };
    let mut u = vec![0.0; d.size()];
    for l in 0..n_layers {
        for i in 0..=d.cells {
            u[d.index(l, i)] = problem.initial(l).eval(d.x(l, i));
        }
    }
    let mut factors: HashMap<u64, BandedLu> = HashMap::new();
    let mut step = |u: &mut Vec<f64>, dt: f64, theta: f64, t_new: f64| -> Result<(), OracleError> {
        let key = (dt * theta).to_bits();
        if let std::collections::hash_map::Entry::Vacant(slot) = factors.entry(key) {
            slot.insert(d.step_matrix(dt * theta)?);
        }
        let mut b = d.step_rhs(u, dt, theta, t_new);
        factors[&key].solve(&mut b);
        *u = b;
        Ok(())
    };

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut snapshots: Vec<Option<Vec<f64>>> = vec![None; times.len()];
    let mut t = 0.0;
    let mut started = false;
    for &k in &order {
        let target = times[k];
        while target - t > 1e-12 * target.max(1.0) {
            let remaining = target - t;
            if !started && settings.startup_steps > 0 {
                let span = (2.0 * settings.dt).min(remaining);
                let h = span / settings.startup_steps as f64;
                for j in 1..=settings.startup_steps {
                    step(&mut u, h, 1.0, t + j as f64 * h)?;
                }
                t += span;
                started = true;
                continue;
            }
            let n = (remaining / settings.dt + 1e-9).floor() as usize;
            if n == 0 {
                step(&mut u, remaining, 0.5, target)?;
                t = target;
            } else {
                step(&mut u, settings.dt, 0.5, t + settings.dt)?;
                t += settings.dt;
            }
        }
        snapshots[k] = Some(u.clone());
    }

    let off = problem.offset();
    let layers: Vec<usize> = grid_x.iter().map(|&x| problem.layer_of(x - off)).collect();
    let mut values = Vec::with_capacity(times.len());
    let mut flux = Vec::with_capacity(times.len());
    let mut interfaces = Vec::new();
    for (ti, snap) in snapshots.iter().enumerate() {
        let snap = snap.as_ref().unwrap();
        let (v, f): (Vec<f64>, Vec<f64>) = grid_x.iter().zip(&layers).map(|(&x, &l)| d.sample(snap, l, x - off)).unzip();
        values.push(v);
        flux.push(f);
        for i in 0..n_layers - 1 {
            let xn = problem.breakpoint(i + 1);
            let (lv, lf) = d.sample(snap, i, xn);
            let (rv, rf) = d.sample(snap, i + 1, xn);
            interfaces.push(InterfaceSample {
                time_index: ti,
                interface: i,
                x: xn + off,
                left_value: lv,
                right_value: rv,
                left_flux: lf,
                right_flux: rf,
            });
        }
    }
    Ok(SolutionField {
        grid_x: grid_x.to_vec(),
        times: times.to_vec(),
        layers,
        values,
        flux,
        interfaces,
        diagnostics: FieldDiagnostics::default(),
    })
}

/// Per-layer linear profile `u = intercept + slope (x - x_l)` (normalized `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub offset: f64,
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl SteadyState {
    /// Value at original coordinate `x` (left-layer convention at breakpoints).
    pub fn eval(&self, x: f64) -> f64 {
        let xn = x - self.offset;
        let n = self.slopes.len();
        let l = (0..n).find(|&l| xn <= self.breakpoints[l + 1]).unwrap_or(n - 1);
        self.intercepts[l] + self.slopes[l] * (xn - self.breakpoints[l])
    }
}

/// Large-time limit for constant boundary data.
pub fn steady_state_profile(problem: &ValidatedProblem) -> Result<SteadyState, OracleError> {
    let bc = problem.boundary();
    let (Some(f1), Some(f2)) = (bc.left.constant_value(), bc.right.constant_value()) else {
        return Err(OracleError::UnsupportedSetup("boundary data are not constant".into()));
    };
    let n = problem.n_layers();
    let m = 2 * n;
    let len = |l: usize| problem.breakpoint(l + 1) - problem.breakpoint(l);
    let s2 = |l: usize| problem.sigma(l).powi(2);
    // unknowns: intercepts a_l at 2l, slopes s_l at 2l+1
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    let mut r = 0;
    let insulated = bc.beta[0] == 0.0 && bc.beta[2] == 0.0;
    if insulated {
        let (q1, q2) = (s2(0) * f1 / bc.beta[1], s2(n - 1) * f2 / bc.beta[3]);
        if (q1 - q2).abs() > 1e-12 * q1.abs().max(q2.abs()).max(1.0) {
            return Err(OracleError::NoSteadyState);
        }
        // total heat is conserved
        for l in 0..n {
            a[r][2 * l] = len(l);
            a[r][2 * l + 1] = 0.5 * len(l).powi(2);
            b[r] += problem
                .initial(l)
                .pieces(problem.breakpoint(l), problem.breakpoint(l + 1))
                .iter()
                .map(|(lo, hi, c)| {
                    c.iter().enumerate().map(|(p, v)| v * (hi - lo).powi(p as i32 + 1) / (p as f64 + 1.0)).sum::<f64>()
                })
                .sum::<f64>();
        }
    } else {
        a[r][0] = bc.beta[0];
        a[r][1] = bc.beta[1];
        b[r] = f1;
    }
    r += 1;
    for i in 0..n - 1 {
        a[r][2 * i + 1] = s2(i);
        a[r][2 * i + 3] = -s2(i + 1);
        r += 1;
        match problem.kind() {
            InterfaceKind::Perfect => {
                a[r][2 * i] = 1.0;
                a[r][2 * i + 1] = len(i);
                a[r][2 * i + 2] = -1.0;
            }
            InterfaceKind::Imperfect => {
                let h = problem.contact(i);
                a[r][2 * i + 1] = s2(i) + h * len(i);
                a[r][2 * i] = h;
                a[r][2 * i + 2] = -h;
            }
        }
        r += 1;
    }
    a[r][2 * (n - 1)] = bc.beta[2];
    a[r][2 * (n - 1) + 1] = bc.beta[2] * len(n - 1) + bc.beta[3];
    b[r] = f2;
    let x = solve_real(&a, &b).map_err(|_| OracleError::NoSteadyState)?;
    Ok(SteadyState {
        offset: problem.offset(),
        breakpoints: problem.breakpoints().to_vec(),
        intercepts: (0..n).map(|l| x[2 * l]).collect(),
        slopes: (0..n).map(|l| x[2 * l + 1]).collect(),
    })
}

/// Relative sup error with the computed field in the denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub error: f64,
    pub excluded_endpoints: bool,
    pub grid_size: usize,
    pub time: f64,
}

/// `max |u - U| / max |u|` over the points of both fields at time `t`.
pub fn relative_error(
    computed: &SolutionField,
    reference: &SolutionField,
    t: f64,
    exclude_endpoints: bool,
) -> Result<ErrorReport, OracleError> {
    if computed.grid_x != reference.grid_x {
        return Err(OracleError::GridMismatch);
    }
    let find = |f: &SolutionField| f.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0));
    let (Some(i), Some(j)) = (find(computed), find(reference)) else {
        return Err(OracleError::GridMismatch);
    };
    let (u, v) = (&computed.values[i], &reference.values[j]);
    let n = u.len();
    let range = if exclude_endpoints && n > 2 { 1..n - 1 } else { 0..n };
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for k in range {
        num = num.max((u[k] - v[k]).abs());
        den = den.max(u[k].abs());
    }
    let error = if num == 0.0 { 0.0 } else { num / den };
    Ok(ErrorReport { error, excluded_endpoints: exclude_endpoints, grid_size: n, time: t })
}

//! Assembly of `u(x, t)` and `sigma^2 u_x(x, t)` from the spectral tables.
//!
//! In layer `l` the solution is the real-axis heat-kernel term of the layer's
//! initial data plus two contour integrals: over the lower curve with the
//! right-edge quantities of the layer, and over the upper curve with the
//! left-edge quantities, each weighted by `-1/(2 pi)`.

use crate::assembly::{layer_edges, Combo, RhsSpec};
use crate::contour::{real_axis_nodes, ContourSpec, NonPositiveTime};
use crate::problem::ValidatedProblem;
use crate::spectral::{build_table_with, SpectralError, SpectralTable, TableOptions};
use crate::transforms::{initial_transform, TransformCache, TransformError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Tolerance on the Gaussian factor at the real-axis truncation point.
pub const REAL_AXIS_TOLERANCE: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("x = {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("time {t} exceeds the table horizon {horizon}")]
    TableHorizonTooSmall { t: f64, horizon: f64 },
    #[error(transparent)]
    NonPositiveTime(#[from] NonPositiveTime),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Tables on the upper and lower curves.
#[derive(Debug, Clone)]
pub struct TablePair {
    pub plus: SpectralTable,
    pub minus: SpectralTable,
}

impl TablePair {
    pub fn build(
        problem: &ValidatedProblem,
        contour: &ContourSpec,
        rhs: &RhsSpec,
        scale_time: f64,
        options: &TableOptions,
        cache: Option<&TransformCache>,
    ) -> Result<Self, SpectralError> {
        let plus = build_table_with(problem, &contour.build(crate::contour::Half::Plus), rhs, scale_time, options, cache)?;
        let minus = plus.mirrored();
        Ok(Self { plus, minus })
    }
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    kappa: Complex64,
    amp: Complex64,
    flux_factor: Complex64,
}

#[derive(Debug, Clone, Default)]
struct LayerModes {
    sigma_sq: f64,
    initial: Vec<(f64, Complex64)>,
    left: Vec<Mode>,
    right: Vec<Mode>,
}

fn combine(combo: &Combo, x: &[Complex64]) -> Complex64 {
    combo.iter().map(|&(c, w)| x[c] * w).sum()
}

/// Precomputed integrands for one evaluation time.
#[derive(Debug, Clone)]
pub struct Evaluator {
    t: f64,
    breakpoints: Vec<f64>,
    offset: f64,
    layers: Vec<LayerModes>,
}

impl Evaluator {
    /// `tables` are summed; each must have a horizon of at least `t`.
    pub fn new(problem: &ValidatedProblem, t: f64, tables: &[&TablePair]) -> Result<Self, EvalError> {
        if !(t > 0.0) {
            return Err(NonPositiveTime(t).into());
        }
        for pair in tables {
            if t > pair.plus.horizon * (1.0 + 1e-12) {
                return Err(EvalError::TableHorizonTooSmall { t, horizon: pair.plus.horizon });
            }
        }
        let edges = layer_edges(problem);
        let i = Complex64::i();
        let mut layers = Vec::with_capacity(problem.n_layers());
        for (l, e) in edges.iter().enumerate() {
            let s = problem.sigma(l);
            let mut modes = LayerModes { sigma_sq: s * s, initial: initial_modes(problem, l, t)?, ..Default::default() };
            for pair in tables {
                for (table, out, value, flux) in [
                    (&pair.plus, &mut modes.left, &e.left_value, &e.left_flux),
                    (&pair.minus, &mut modes.right, &e.right_value, &e.right_flux),
                ] {
                    for (node, x) in table.grid.nodes.iter().zip(&table.values) {
                        let nu = node.nu;
                        let edge = combine(flux, x) / s + i * nu * combine(value, x);
                        let decay = (-nu * nu * (t - table.scale_time)).exp();
                        let amp = -node.weight * edge * decay / (2.0 * PI);
                        if amp.norm() == 0.0 || !amp.re.is_finite() || !amp.im.is_finite() {
                            continue;
                        }
                        out.push(Mode { kappa: nu / s, amp, flux_factor: i * nu * s });
                    }
                }
            }
            layers.push(modes);
        }
        Ok(Self { t, breakpoints: problem.breakpoints().to_vec(), offset: problem.offset(), layers })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn check(&self, layer: usize, x: f64) -> Result<f64, EvalError> {
        let xn = x - self.offset;
        let (lo, hi) = (self.breakpoints[0], *self.breakpoints.last().unwrap());
        if !(xn >= lo - 1e-12 && xn <= hi + 1e-12) || layer >= self.layers.len() {
            return Err(EvalError::OutOfDomain { x, lo: lo + self.offset, hi: hi + self.offset });
        }
        Ok(xn)
    }

    fn sums(&self, layer: usize, xn: f64) -> (Complex64, Complex64) {
        let m = &self.layers[layer];
        let (xl, xr) = (self.breakpoints[layer], self.breakpoints[layer + 1]);
        let i = Complex64::i();
        let mut u = Complex64::new(0.0, 0.0);
        let mut du = Complex64::new(0.0, 0.0);
        for &(k, amp) in &m.initial {
            let e = amp * Complex64::from_polar(1.0, k * xn);
            u += e;
            du += e * (i * k);
        }
        let mut flux = Complex64::new(0.0, 0.0);
        for (modes, edge) in [(&m.left, xl), (&m.right, xr)] {
            for md in modes {
                let e = md.amp * (i * md.kappa * (xn - edge)).exp();
                u += e;
                flux += e * md.flux_factor;
            }
        }
        (u, flux + du * m.sigma_sq)
    }

    /// Complex value of the representation in `layer` at original coordinate `x`;
    /// the real part is the temperature.
    pub fn value_in_layer(&self, layer: usize, x: f64) -> Result<Complex64, EvalError> {
        let xn = self.check(layer, x)?;
        Ok(self.sums(layer, xn).0)
    }

    /// Complex `sigma^2 u_x` in `layer` at original coordinate `x`.
    pub fn flux_in_layer(&self, layer: usize, x: f64) -> Result<Complex64, EvalError> {
        let xn = self.check(layer, x)?;
        Ok(self.sums(layer, xn).1)
    }

    pub fn value_and_flux(&self, layer: usize, x: f64) -> Result<(Complex64, Complex64), EvalError> {
        let xn = self.check(layer, x)?;
        Ok(self.sums(layer, xn))
    }
}

fn initial_modes(problem: &ValidatedProblem, layer: usize, t: f64) -> Result<Vec<(f64, Complex64)>, EvalError> {
    let s = problem.sigma(layer);
    let span = problem.breakpoint(layer + 1) - problem.breakpoint(layer);
    let grid = real_axis_nodes(s, t, REAL_AXIS_TOLERANCE, span)?;
    let mut out = Vec::with_capacity(grid.nodes.len());
    for &(k, w) in &grid.nodes {
        let u0 = initial_transform(problem, layer, Complex64::new(k, 0.0))?;
        let amp = u0 * (w * (-(s * k).powi(2) * t).exp() / (2.0 * PI));
        if amp.norm() > 0.0 {
            out.push((k, amp));
        }
    }
    Ok(out)
}

/// Real-axis term `(1/2pi) integral exp(ikx - (sigma k)^2 t) u0_hat(k) dk` of one layer.
pub fn evaluate_initial_term(problem: &ValidatedProblem, layer: usize, x: f64, t: f64) -> Result<f64, EvalError> {
    if !(t > 0.0) {
        return Err(NonPositiveTime(t).into());
    }
    let xn = x - problem.offset();
    let modes = initial_modes(problem, layer, t)?;
    Ok(modes.iter().map(|&(k, a)| (a * Complex64::from_polar(1.0, k * xn)).re).sum())
}

fn locate(problem: &ValidatedProblem, x: f64) -> Result<usize, EvalError> {
    let xn = x - problem.offset();
    if !(xn >= -1e-12 && xn <= problem.length() + 1e-12) {
        return Err(EvalError::OutOfDomain { x, lo: problem.offset(), hi: problem.offset() + problem.length() });
    }
    Ok(problem.layer_of(xn))
}

/// `u(x, t)` from a table pair; `t = 0` returns the initial data.
pub fn evaluate_solution(problem: &ValidatedProblem, tables: &TablePair, x: f64, t: f64) -> Result<f64, EvalError> {
    let layer = locate(problem, x)?;
    if t == 0.0 {
        return Ok(problem.initial(layer).eval(x - problem.offset()));
    }
    Ok(Evaluator::new(problem, t, &[tables])?.value_in_layer(layer, x)?.re)
}

/// `sigma^2 u_x(x, t)` from a table pair.
pub fn evaluate_flux(problem: &ValidatedProblem, tables: &TablePair, x: f64, t: f64) -> Result<f64, EvalError> {
    let layer = locate(problem, x)?;
    if t == 0.0 {
        return Ok(problem.sigma(layer).powi(2) * problem.initial(layer).derivative(x - problem.offset()));
    }
    Ok(Evaluator::new(problem, t, &[tables])?.flux_in_layer(layer, x)?.re)
}

/// Contour and horizon settings for field evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub contour: ContourSpec,
    /// Spectral horizon used for every time instead of `T = t`.
    pub fixed_horizon: Option<f64>,
    /// Curve carrying the difference between horizons `T` and `t`.
    pub correction_contour: ContourSpec,
    pub table: TableOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            contour: ContourSpec::default(),
            fixed_horizon: None,
            correction_contour: ContourSpec::inside_sector(12.0, 2001),
            table: TableOptions::default(),
        }
    }
}

/// Tables needed to evaluate one time.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    pub t: f64,
    pub horizon: f64,
    pub main: TablePair,
    /// Contribution of the boundary data on `[t, T]` when `T > t`.
    pub correction: Option<TablePair>,
}

impl TimeSlice {
    /// With horizon `T > t` the representation is split as the `T = t` field
    /// plus the part driven by the boundary data on `[t, T]`. That part decays
    /// only inside `Re(nu^2) < 0`, so it is integrated on the sector curve.
    pub fn prepare(
        problem: &ValidatedProblem,
        t: f64,
        options: &SolveOptions,
        cache: Option<&TransformCache>,
    ) -> Result<Self, EvalError> {
        if !(t > 0.0) {
            return Err(NonPositiveTime(t).into());
        }
        let horizon = options.fixed_horizon.unwrap_or(t);
        if horizon < t {
            return Err(EvalError::TableHorizonTooSmall { t, horizon });
        }
        let main = TablePair::build(problem, &options.contour, &RhsSpec::full(t), t, &options.table, cache)?;
        let correction = if horizon > t {
            let rhs = RhsSpec { horizon, boundary_from: t, include_initial: false };
            Some(TablePair::build(problem, &options.correction_contour, &rhs, t, &options.table, cache)?)
        } else {
            None
        };
        Ok(Self { t, horizon, main, correction })
    }

    pub fn evaluator(&self, problem: &ValidatedProblem) -> Result<Evaluator, EvalError> {
        let mut pairs = vec![&self.main];
        if let Some(c) = &self.correction {
            pairs.push(c);
        }
        Evaluator::new(problem, self.t, &pairs)
    }

    pub fn max_residual(&self) -> f64 {
        let c = self.correction.as_ref().map_or(0.0, |c| c.plus.max_residual());
        self.main.plus.max_residual().max(c)
    }

    pub fn interpolated_fraction(&self) -> f64 {
        self.main.plus.interpolated_fraction()
    }
}

/// Both one-sided values at an interior breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSample {
    pub time_index: usize,
    pub interface: usize,
    pub x: f64,
    pub left_value: f64,
    pub right_value: f64,
    pub left_flux: f64,
    pub right_flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldDiagnostics {
    pub max_imaginary_residue: f64,
    pub max_residual: f64,
    pub max_interpolated_fraction: f64,
    /// Grid contains an end point while the boundary data are nonhomogeneous.
    pub endpoint_caveat: bool,
}

/// Values on a grid of original-coordinate points at several times.
/// Indexing is `values[time][point]`; a breakpoint takes the value of the
/// layer on its left, with both sides listed in `interfaces`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid_x: Vec<f64>,
    pub times: Vec<f64>,
    pub layers: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub flux: Vec<Vec<f64>>,
    pub interfaces: Vec<InterfaceSample>,
    pub diagnostics: FieldDiagnostics,
}

impl SolutionField {
    pub fn layer_of(&self, point: usize) -> usize {
        self.layers[point]
    }
}

/// `n` points covering the domain with every breakpoint included; interior
/// points are shared among the layers in proportion to their lengths (largest
/// remainder) and spaced evenly within each layer.
pub fn output_grid(problem: &ValidatedProblem, n: usize) -> Vec<f64> {
    let bp = problem.breakpoints();
    let layers = problem.n_layers();
    let interior = n.saturating_sub(layers + 1);
    let len = problem.length();
    let quotas: Vec<f64> = (0..layers).map(|l| interior as f64 * (bp[l + 1] - bp[l]) / len).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..layers).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let missing = interior - counts.iter().sum::<usize>();
    for &l in order.iter().take(missing) {
        counts[l] += 1;
    }
    let mut out = vec![bp[0]];
    for l in 0..layers {
        let m = counts[l] + 1;
        for j in 1..m {
            out.push(bp[l] + (bp[l + 1] - bp[l]) * j as f64 / m as f64);
        }
        out.push(bp[l + 1]);
    }
    out.iter().map(|x| x + problem.offset()).collect()
}

/// Evaluates `u` and `sigma^2 u_x` on `grid_x` (original coordinates) at each time.
pub fn solve_field(
    problem: &ValidatedProblem,
    grid_x: &[f64],
    times: &[f64],
    options: &SolveOptions,
) -> Result<SolutionField, EvalError> {
    let layers: Vec<usize> = grid_x.iter().map(|&x| locate(problem, x)).collect::<Result<_, _>>()?;
    let offset = problem.offset();
    let cache = TransformCache::new();
    let mut values = Vec::with_capacity(times.len());
    let mut flux = Vec::with_capacity(times.len());
    let mut interfaces = Vec::new();
    let mut diagnostics = FieldDiagnostics::default();
    let ends = [offset, offset + problem.length()];
    diagnostics.endpoint_caveat = !problem.boundary().is_homogeneous()
        && grid_x.iter().any(|x| ends.iter().any(|e| (x - e).abs() <= 1e-12 * problem.length().max(1.0)));
    for (ti, &t) in times.iter().enumerate() {
        if t == 0.0 {
            values.push(grid_x.iter().zip(&layers).map(|(x, &l)| problem.initial(l).eval(x - offset)).collect());
            flux.push(
                grid_x
                    .iter()
                    .zip(&layers)
                    .map(|(x, &l)| problem.sigma(l).powi(2) * problem.initial(l).derivative(x - offset))
                    .collect(),
            );
            for i in 0..problem.n_interfaces() {
                let xn = problem.breakpoint(i + 1);
                let (a, b) = (problem.initial(i), problem.initial(i + 1));
                interfaces.push(InterfaceSample {
                    time_index: ti,
                    interface: i,
                    x: xn + offset,
                    left_value: a.eval(xn),
                    right_value: b.eval(xn),
                    left_flux: problem.sigma(i).powi(2) * a.derivative(xn),
                    right_flux: problem.sigma(i + 1).powi(2) * b.derivative(xn),
                });
            }
            continue;
        }
        let slice = TimeSlice::prepare(problem, t, options, Some(&cache))?;
        diagnostics.max_residual = diagnostics.max_residual.max(slice.max_residual());
        diagnostics.max_interpolated_fraction = diagnostics.max_interpolated_fraction.max(slice.interpolated_fraction());
        let ev = slice.evaluator(problem)?;
        let pairs: Vec<(Complex64, Complex64)> = grid_x
            .par_iter()
            .zip(&layers)
            .map(|(&x, &l)| ev.value_and_flux(l, x))
            .collect::<Result<_, _>>()?;
        for (u, _) in &pairs {
            diagnostics.max_imaginary_residue = diagnostics.max_imaginary_residue.max(u.im.abs());
        }
        values.push(pairs.iter().map(|p| p.0.re).collect());
        flux.push(pairs.iter().map(|p| p.1.re).collect());
        for i in 0..problem.n_interfaces() {
            let x = problem.breakpoint(i + 1) + offset;
            let (ul, fl) = ev.value_and_flux(i, x)?;
            let (ur, fr) = ev.value_and_flux(i + 1, x)?;
            interfaces.push(InterfaceSample {
                time_index: ti,
                interface: i,
                x,
                left_value: ul.re,
                right_value: ur.re,
                left_flux: fl.re,
                right_flux: fr.re,
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
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        validate, BoundarySpec, InitialCondition, InterfaceSpec, LayerStack, Problem, TimeSignal,
    };

    fn three_layers(interfaces: InterfaceSpec, left: f64, right: f64, u0: InitialCondition) -> ValidatedProblem {
        validate(&Problem {
            layers: LayerStack::uniform(0.0, 1.0, vec![1.0, 0.5, 0.8]),
            interfaces,
            boundary: BoundarySpec::dirichlet(TimeSignal::constant(left), TimeSignal::constant(right)),
            initial: vec![u0; 3],
        })
        .unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|j| f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
        (f(a) + f(b) + inner) * h / 3.0
    }

    #[test]
    fn constant_state_is_preserved() {
        for interfaces in [InterfaceSpec::perfect(), InterfaceSpec::imperfect(vec![0.5, 2.0])] {
            let p = three_layers(interfaces, 0.7, 0.7, InitialCondition::constant(0.7));
            let grid = output_grid(&p, 41);
            let f = solve_field(&p, &grid, &[0.01, 0.3], &SolveOptions::default()).unwrap();
            for row in &f.values {
                for u in &row[1..row.len() - 1] {
                    assert!((u - 0.7).abs() < 1e-8, "{u}");
                }
            }
            for row in &f.flux {
                for q in &row[1..row.len() - 1] {
                    assert!(q.abs() < 1e-7, "{q}");
                }
            }
        }
    }

    #[test]
    fn initial_term_matches_heat_kernel() {
        let p = three_layers(InterfaceSpec::perfect(), 0.0, 0.0, InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]));
        let (x, t) = (0.2, 0.1);
        let kernel = |y: f64| (-(x - y) * (x - y) / (4.0 * t)).exp() * y.powi(3) / (4.0 * PI * t).sqrt();
        let expected = simpson(kernel, 0.0, 1.0 / 3.0, 2000);
        let got = evaluate_initial_term(&p, 0, x, t).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn flux_matches_finite_difference() {
        let p = three_layers(
            InterfaceSpec::imperfect(vec![1.0, 3.0]),
            1.0,
            0.0,
            InitialCondition::polynomial(vec![0.0, 1.0]),
        );
        let slice = TimeSlice::prepare(&p, 0.05, &SolveOptions::default(), None).unwrap();
        let ev = slice.evaluator(&p).unwrap();
        let h = 1e-5;
        for (layer, x) in [(0, 0.15), (1, 0.5), (2, 0.8)] {
            let up = ev.value_in_layer(layer, x + h).unwrap().re;
            let down = ev.value_in_layer(layer, x - h).unwrap().re;
            let fd = p.sigma(layer).powi(2) * (up - down) / (2.0 * h);
            let q = ev.flux_in_layer(layer, x).unwrap().re;
            assert!((q - fd).abs() < 1e-6, "layer {layer}: {q} vs {fd}");
        }
    }

    #[test]
    fn zero_time_returns_initial_data() {
        let p = three_layers(InterfaceSpec::perfect(), 0.0, 0.0, InitialCondition::polynomial(vec![1.0, 2.0]));
        let grid = output_grid(&p, 7);
        let f = solve_field(&p, &grid, &[0.0], &SolveOptions::default()).unwrap();
        for (x, u) in grid.iter().zip(&f.values[0]) {
            assert_eq!(*u, 1.0 + 2.0 * x);
        }
        assert_eq!(f.interfaces.len(), 2);
    }

    #[test]
    fn grid_contains_breakpoints_and_requested_size() {
        let p = three_layers(InterfaceSpec::perfect(), 0.0, 0.0, InitialCondition::constant(0.0));
        for n in [4, 10, 401] {
            let g = output_grid(&p, n);
            assert_eq!(g.len(), n);
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            for bp in p.breakpoints() {
                assert!(g.iter().any(|x| (x - bp).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn points_outside_domain_are_rejected() {
        let p = three_layers(InterfaceSpec::perfect(), 0.0, 0.0, InitialCondition::constant(0.0));
        let err = solve_field(&p, &[0.5, 1.5], &[0.1], &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, EvalError::OutOfDomain { .. }));
    }

    #[test]
    fn endpoint_caveat_follows_boundary_data() {
        let p = three_layers(InterfaceSpec::perfect(), 1.0, 0.0, InitialCondition::constant(0.0));
        let f = solve_field(&p, &[0.0, 0.5], &[0.1], &SolveOptions::default()).unwrap();
        assert!(f.diagnostics.endpoint_caveat);
        let f = solve_field(&p, &[0.2, 0.5], &[0.1], &SolveOptions::default()).unwrap();
        assert!(!f.diagnostics.endpoint_caveat);
    }
}

//! The `(2n+4) x (2n+4)` interface systems `A(nu) X = Y(nu, T)`.
//!
//! Unknown ordering:
//! * imperfect contact: `(g1^(1), g0^(1..n+1), h0^(1..n+1), h1^(n+1))`
//! * perfect contact: `(g0^(1..n+1), h0^(n+1), g1^(1..n+1), h1^(n+1))`
//!
//! Row 0 is the left boundary condition, rows `1..=n+1` the global relations
//! at `+nu/sigma_j`, rows `n+2..=2n+2` those at `-nu/sigma_j`, and the last
//! row the right boundary condition.
//!
//! Every layer edge quantity (temperature transform and `sigma^2` times the
//! flux transform at each end of each layer) is a real linear combination of
//! the unknowns once the interface conditions are substituted; the global
//! relations are generated from those combinations.

use crate::linalg::CMatrix;
use crate::problem::{InterfaceKind, Side, ValidatedProblem};
use crate::transforms::{TransformCache, TransformError};
use num_complex::Complex64;

/// Raw entries above this magnitude are reported as overflow.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("problem has {found:?} contact, expected {expected:?}")]
    WrongInterfaceKind { expected: InterfaceKind, found: InterfaceKind },
    #[error("matrix entry overflows at nu = {nu}")]
    OverflowAtArgument { nu: Complex64 },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

impl AssemblyError {
    pub fn is_overflow(&self) -> bool {
        matches!(
            self,
            AssemblyError::OverflowAtArgument { .. }
                | AssemblyError::Transform(TransformError::OverflowAtArgument { .. })
        )
    }
}

/// Sparse real combination of unknowns.
pub type Combo = Vec<(usize, f64)>;

/// Transforms of `u` and of `sigma^2 u_x` at both ends of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEdges {
    pub left_value: Combo,
    pub left_flux: Combo,
    pub right_value: Combo,
    pub right_flux: Combo,
}

/// Edge quantities of every layer in terms of the unknown vector.
pub fn layer_edges(problem: &ValidatedProblem) -> Vec<LayerEdges> {
    let n = problem.n_layers();
    let s2 = |l: usize| problem.sigma(l).powi(2);
    match problem.kind() {
        InterfaceKind::Imperfect => {
            let g1_first = 0;
            let g0 = |l: usize| 1 + l;
            let h0 = |l: usize| n + 1 + l;
            let h1_last = 2 * n + 1;
            (0..n)
                .map(|l| LayerEdges {
                    left_value: vec![(g0(l), 1.0)],
                    left_flux: if l == 0 {
                        vec![(g1_first, s2(0))]
                    } else {
                        let h = problem.contact(l - 1);
                        vec![(g0(l), h), (h0(l - 1), -h)]
                    },
                    right_value: vec![(h0(l), 1.0)],
                    right_flux: if l == n - 1 {
                        vec![(h1_last, s2(l))]
                    } else {
                        let h = problem.contact(l);
                        vec![(g0(l + 1), h), (h0(l), -h)]
                    },
                })
                .collect()
        }
        InterfaceKind::Perfect => {
            let g0 = |l: usize| l;
            let h0_last = n;
            let g1 = |l: usize| n + 1 + l;
            let h1_last = 2 * n + 1;
            (0..n)
                .map(|l| LayerEdges {
                    left_value: vec![(g0(l), 1.0)],
                    left_flux: vec![(g1(l), s2(l))],
                    right_value: if l == n - 1 { vec![(h0_last, 1.0)] } else { vec![(g0(l + 1), 1.0)] },
                    right_flux: if l == n - 1 {
                        vec![(h1_last, s2(l))]
                    } else {
                        vec![(g1(l + 1), s2(l + 1))]
                    },
                })
                .collect()
        }
    }
}

/// `coef * exp(exponent)` placed in column `col`.
#[derive(Debug, Clone, Copy)]
struct Term {
    col: usize,
    coef: Complex64,
    exponent: Complex64,
}

impl Term {
    fn log_magnitude(&self) -> f64 {
        self.coef.norm().ln() + self.exponent.re
    }
}

fn push_combo(out: &mut Vec<Term>, combo: &Combo, factor: Complex64, exponent: Complex64) {
    for &(col, c) in combo {
        out.push(Term { col, coef: factor * c, exponent });
    }
}

fn row_terms(problem: &ValidatedProblem, nu: Complex64) -> Vec<Vec<Term>> {
    let n = problem.n_layers();
    let edges = layer_edges(problem);
    let beta = problem.boundary().beta;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut rows = Vec::with_capacity(2 * n + 2);

    let mut first = Vec::new();
    push_combo(&mut first, &edges[0].left_value, one * beta[0], zero);
    push_combo(&mut first, &edges[0].left_flux, one * (beta[1] / problem.sigma(0).powi(2)), zero);
    rows.push(first);

    for sign in [1.0, -1.0] {
        for (l, e) in edges.iter().enumerate() {
            let s = problem.sigma(l);
            let isn = sign * i * s * nu;
            let phase = |x: f64| -sign * i * nu * x / s;
            let mut row = Vec::new();
            let (xr, xl) = (problem.breakpoint(l + 1), problem.breakpoint(l));
            push_combo(&mut row, &e.right_flux, one, phase(xr));
            push_combo(&mut row, &e.right_value, isn, phase(xr));
            push_combo(&mut row, &e.left_flux, -one, phase(xl));
            push_combo(&mut row, &e.left_value, -isn, phase(xl));
            rows.push(row);
        }
    }

    let mut last = Vec::new();
    push_combo(&mut last, &edges[n - 1].right_value, one * beta[2], zero);
    push_combo(&mut last, &edges[n - 1].right_flux, one * (beta[3] / problem.sigma(n - 1).powi(2)), zero);
    rows.push(last);
    rows
}

fn check_kind(problem: &ValidatedProblem, expected: InterfaceKind) -> Result<(), AssemblyError> {
    if problem.kind() != expected {
        return Err(AssemblyError::WrongInterfaceKind { expected, found: problem.kind() });
    }
    Ok(())
}

fn raw_matrix(problem: &ValidatedProblem, nu: Complex64) -> Result<CMatrix, AssemblyError> {
    let size = 2 * problem.n_layers() + 2;
    let mut a = CMatrix::zeros(size, size);
    for (r, terms) in row_terms(problem, nu).iter().enumerate() {
        for t in terms {
            if t.coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            let v = t.coef * t.exponent.exp();
            if !(v.norm() <= OVERFLOW_THRESHOLD) {
                return Err(AssemblyError::OverflowAtArgument { nu });
            }
            a.add(r, t.col, v);
        }
    }
    Ok(a)
}

/// Imperfect-contact matrix `A(nu)`, unscaled.
pub fn assemble_imperfect(problem: &ValidatedProblem, nu: Complex64) -> Result<CMatrix, AssemblyError> {
    check_kind(problem, InterfaceKind::Imperfect)?;
    raw_matrix(problem, nu)
}

/// Perfect-contact matrix `A^(p)(nu)`, unscaled.
pub fn assemble_perfect(problem: &ValidatedProblem, nu: Complex64) -> Result<CMatrix, AssemblyError> {
    check_kind(problem, InterfaceKind::Perfect)?;
    raw_matrix(problem, nu)
}

/// Matrix for whichever contact kind the problem has.
pub fn assemble_matrix(problem: &ValidatedProblem, nu: Complex64) -> Result<CMatrix, AssemblyError> {
    raw_matrix(problem, nu)
}

/// Which data drive the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsSpec {
    /// Upper limit `T` of the boundary time transforms.
    pub horizon: f64,
    /// Lower limit of the boundary time integrals (zero for the full transform).
    pub boundary_from: f64,
    pub include_initial: bool,
}

impl RhsSpec {
    pub fn full(horizon: f64) -> Self {
        Self { horizon, boundary_from: 0.0, include_initial: true }
    }
}

fn rhs_entry(
    problem: &ValidatedProblem,
    row: usize,
    nu: Complex64,
    spec: &RhsSpec,
    shift: Complex64,
    cache: Option<&TransformCache>,
) -> Result<Complex64, TransformError> {
    let n = problem.n_layers();
    let omega = nu * nu;
    let boundary = |side: Side| -> Result<Complex64, TransformError> {
        let (from, to) = (spec.boundary_from, spec.horizon);
        match cache {
            Some(c) => c.boundary(problem, side, omega, from, to, shift),
            None => {
                let sig = match side {
                    Side::Left => &problem.boundary().left,
                    Side::Right => &problem.boundary().right,
                };
                crate::transforms::boundary_window_scaled(sig, omega, from, to, shift)
            }
        }
    };
    let initial = |l: usize, sign: f64| -> Result<Complex64, TransformError> {
        if !spec.include_initial {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k = sign * nu / problem.sigma(l);
        let v = match cache {
            Some(c) => c.initial(problem, l, k, shift)?,
            None => crate::transforms::initial_transform_scaled(problem, l, k, shift)?,
        };
        Ok(-v)
    };
    if row == 0 {
        boundary(Side::Left)
    } else if row <= n {
        initial(row - 1, 1.0)
    } else if row <= 2 * n {
        initial(row - 1 - n, -1.0)
    } else {
        boundary(Side::Right)
    }
}

/// Right-hand side `Y(nu, T)`, multiplied by `exp(-nu^2 scale_time)` when requested.
pub fn assemble_rhs(
    problem: &ValidatedProblem,
    nu: Complex64,
    horizon: f64,
    scale_time: Option<f64>,
) -> Result<Vec<Complex64>, AssemblyError> {
    let shift = scale_time.map_or(Complex64::new(0.0, 0.0), |ts| -nu * nu * ts);
    let spec = RhsSpec::full(horizon);
    (0..2 * problem.n_layers() + 2)
        .map(|r| Ok(rhs_entry(problem, r, nu, &spec, shift, None)?))
        .collect()
}

/// How rows are balanced before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Equilibration {
    /// Row maxima are found from the logarithms of the entries and divided out
    /// before exponentiation; nothing overflows.
    #[default]
    Logarithmic,
    /// Entries are formed directly and then rows divided by their largest entry;
    /// nodes whose entries exceed the floating range report overflow.
    Raw,
}

/// Row-equilibrated system at one contour node.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub matrix: CMatrix,
    pub rhs: Vec<Complex64>,
    pub nu: Complex64,
    pub horizon: f64,
    pub scale_time: f64,
    /// Natural log of the factor each row was divided by.
    pub row_log_scale: Vec<f64>,
}

/// Assembles the equilibrated system with the right-hand side scaled by `exp(-nu^2 scale_time)`.
pub fn assemble_system(
    problem: &ValidatedProblem,
    nu: Complex64,
    rhs: &RhsSpec,
    scale_time: f64,
    equilibration: Equilibration,
    cache: Option<&TransformCache>,
) -> Result<SpectralSystem, AssemblyError> {
    let size = 2 * problem.n_layers() + 2;
    let base_shift = -nu * nu * scale_time;
    let mut matrix = CMatrix::zeros(size, size);
    let mut y = vec![Complex64::new(0.0, 0.0); size];
    let mut row_log_scale = vec![0.0; size];
    match equilibration {
        Equilibration::Logarithmic => {
            for (r, terms) in row_terms(problem, nu).iter().enumerate() {
                let m = terms
                    .iter()
                    .filter(|t| t.coef.norm() > 0.0)
                    .map(Term::log_magnitude)
                    .fold(f64::NEG_INFINITY, f64::max);
                let m = if m.is_finite() { m } else { 0.0 };
                for t in terms {
                    matrix.add(r, t.col, t.coef * (t.exponent - m).exp());
                }
                row_log_scale[r] = m;
                y[r] = rhs_entry(problem, r, nu, rhs, base_shift - m, cache)?;
            }
        }
        Equilibration::Raw => {
            let raw = raw_matrix(problem, nu)?;
            for r in 0..size {
                let m = raw.row(r).iter().map(|v| v.norm()).fold(0.0, f64::max);
                let m = if m > 0.0 { m } else { 1.0 };
                for c in 0..size {
                    matrix.set(r, c, raw.get(r, c) / m);
                }
                row_log_scale[r] = m.ln();
                let v = rhs_entry(problem, r, nu, rhs, base_shift, cache)?;
                if !(v.norm() <= OVERFLOW_THRESHOLD) {
                    return Err(AssemblyError::OverflowAtArgument { nu });
                }
                y[r] = v / m;
            }
        }
    }
    Ok(SpectralSystem { matrix, rhs: y, nu, horizon: rhs.horizon, scale_time, row_log_scale })
}

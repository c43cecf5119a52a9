//! Per-node solution of the interface systems along a contour.

use crate::assembly::{assemble_system, AssemblyError, Equilibration, RhsSpec, SpectralSystem};
use crate::contour::{ContourGrid, Half};
use crate::linalg::{Lu, Pchip};
use crate::problem::ValidatedProblem;
use crate::transforms::TransformCache;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

/// Pivots below this fraction of the largest entry count as rank deficiency.
pub const PIVOT_TOLERANCE: f64 = 1e-14;
/// Largest share of nodes that may be filled by interpolation.
pub const MAX_INTERPOLATED_FRACTION: f64 = 0.2;
/// Solved nodes used on each side of an interpolated gap.
pub const INTERPOLATION_SUPPORT: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("singular system at nu = {nu} (pivot {pivot:.3e}, scale {scale:.3e})")]
    SingularNode { nu: Complex64, pivot: f64, scale: f64 },
    #[error("{count} of {total} contour nodes overflowed")]
    TooManyOverflowNodes { count: usize, total: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Solved,
    Interpolated,
}

/// Scaled unknowns `exp(-nu^2 scale_time) X(nu^2, T)` at every node of a grid.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    pub grid: ContourGrid,
    pub horizon: f64,
    pub scale_time: f64,
    pub values: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl SpectralTable {
    pub fn interpolated_fraction(&self) -> f64 {
        let k = self.provenance.iter().filter(|p| **p == Provenance::Interpolated).count();
        k as f64 / self.provenance.len().max(1) as f64
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| **p == Provenance::Solved)
            .map(|(r, _)| *r)
            .fold(0.0, f64::max)
    }

    /// Table on the reflected grid. The unknowns depend on `nu` only through
    /// `nu^2`, and node `j` of the lower curve is the negative of node `j` of
    /// the upper one, so the values carry over unchanged.
    pub fn mirrored(&self) -> SpectralTable {
        let half = match self.grid.half {
            Half::Plus => Half::Minus,
            Half::Minus => Half::Plus,
        };
        SpectralTable { grid: self.grid.spec.build(half), ..self.clone() }
    }

    /// Writes `theta, re/im of every component, residual, provenance` rows.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.values.first().map_or(0, Vec::len);
        write!(w, "theta")?;
        for c in 0..m {
            write!(w, ",re_x{c},im_x{c}")?;
        }
        writeln!(w, ",residual,provenance")?;
        for (j, node) in self.grid.nodes.iter().enumerate() {
            write!(w, "{}", node.theta)?;
            for v in &self.values[j] {
                write!(w, ",{},{}", v.re, v.im)?;
            }
            let p = match self.provenance[j] {
                Provenance::Solved => "solved",
                Provenance::Interpolated => "interpolated",
            };
            writeln!(w, ",{},{p}", self.residuals[j])?;
        }
        Ok(())
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense pivoted solve of an equilibrated system; returns the unknowns and
/// the relative residual `|A X - Y| / |Y|`.
pub fn solve_at_node(system: &SpectralSystem) -> Result<(Vec<Complex64>, f64), SpectralError> {
    let lu = Lu::factor(system.matrix.clone(), PIVOT_TOLERANCE).map_err(|e| SpectralError::SingularNode {
        nu: system.nu,
        pivot: e.pivot,
        scale: e.scale,
    })?;
    let x = lu.solve(&system.rhs);
    let ax = system.matrix.mul_vec(&x);
    let diff: Vec<Complex64> = ax.iter().zip(&system.rhs).map(|(a, b)| a - b).collect();
    let ny = norm(&system.rhs);
    let residual = if ny > 0.0 { norm(&diff) / ny } else { norm(&diff) };
    Ok((x, residual))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub equilibration: Equilibration,
    pub max_interpolated_fraction: f64,
    pub support: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            equilibration: Equilibration::default(),
            max_interpolated_fraction: MAX_INTERPOLATED_FRACTION,
            support: INTERPOLATION_SUPPORT,
        }
    }
}

/// `None` marks a node whose assembly overflowed.
type NodeOutcome = Result<Option<(Vec<Complex64>, f64)>, SpectralError>;

/// Table for the full right-hand side with horizon and scale time `T`.
pub fn build_spectral_table(
    problem: &ValidatedProblem,
    grid: &ContourGrid,
    horizon: f64,
) -> Result<SpectralTable, SpectralError> {
    build_table_with(problem, grid, &RhsSpec::full(horizon), horizon, &TableOptions::default(), None)
}

pub fn build_table_with(
    problem: &ValidatedProblem,
    grid: &ContourGrid,
    rhs: &RhsSpec,
    scale_time: f64,
    options: &TableOptions,
    cache: Option<&TransformCache>,
) -> Result<SpectralTable, SpectralError> {
    let outcomes: Vec<NodeOutcome> = grid
        .nodes
        .par_iter()
        .map(|node| match assemble_system(problem, node.nu, rhs, scale_time, options.equilibration, cache) {
            Ok(sys) => solve_at_node(&sys).map(Some),
            Err(e) if e.is_overflow() => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect();
    let total = outcomes.len();
    let mut values = Vec::with_capacity(total);
    let mut residuals = Vec::with_capacity(total);
    let mut provenance = Vec::with_capacity(total);
    for o in outcomes {
        match o? {
            Some((x, r)) => {
                values.push(x);
                residuals.push(r);
                provenance.push(Provenance::Solved);
            }
            None => {
                values.push(Vec::new());
                residuals.push(f64::NAN);
                provenance.push(Provenance::Interpolated);
            }
        }
    }
    let count = provenance.iter().filter(|p| **p == Provenance::Interpolated).count();
    if count as f64 > options.max_interpolated_fraction * total as f64 || count == total {
        return Err(SpectralError::TooManyOverflowNodes { count, total });
    }
    if count > 0 {
        fill_gaps(grid, &mut values, &provenance, options.support);
    }
    Ok(SpectralTable { grid: grid.clone(), horizon: rhs.horizon, scale_time, values, residuals, provenance })
}

/// Shape-preserving cubic Hermite fill of every run of unsolved nodes, using up
/// to `support` solved nodes on each side. A run touching the end of the grid
/// is anchored to zero at the end node.
fn fill_gaps(grid: &ContourGrid, values: &mut [Vec<Complex64>], provenance: &[Provenance], support: usize) {
    let n = values.len();
    let m = values.iter().find(|v| !v.is_empty()).map_or(0, Vec::len);
    let theta: Vec<f64> = grid.nodes.iter().map(|node| node.theta).collect();
    let mut j = 0;
    while j < n {
        if provenance[j] == Provenance::Solved {
            j += 1;
            continue;
        }
        let start = j;
        while j < n && provenance[j] == Provenance::Interpolated {
            j += 1;
        }
        let end = j;
        let mut idx: Vec<usize> = (0..start).rev().filter(|&i| provenance[i] == Provenance::Solved).take(support).collect();
        idx.reverse();
        idx.extend((end..n).filter(|&i| provenance[i] == Provenance::Solved).take(support));
        let anchor_left = start == 0;
        let anchor_right = end == n;
        let mut xs: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
        if anchor_left {
            xs.insert(0, theta[0]);
        }
        if anchor_right {
            xs.push(theta[n - 1]);
        }
        let mut filled = vec![vec![Complex64::new(0.0, 0.0); m]; end - start];
        for c in 0..m {
            let part = |f: fn(Complex64) -> f64| {
                let mut ys: Vec<f64> = idx.iter().map(|&i| f(values[i][c])).collect();
                if anchor_left {
                    ys.insert(0, 0.0);
                }
                if anchor_right {
                    ys.push(0.0);
                }
                Pchip::new(xs.clone(), ys)
            };
            let (re, im) = (part(|z| z.re), part(|z| z.im));
            for (k, row) in filled.iter_mut().enumerate() {
                let th = theta[start + k];
                row[c] = Complex64::new(re.eval(th), im.eval(th));
            }
        }
        for (k, row) in filled.into_iter().enumerate() {
            values[start + k] = row;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::contour::{contour_nodes, ContourSpec};
    use crate::problem::*;

    fn example_a(t_right: f64) -> ValidatedProblem {
        validate(&Problem {
            layers: LayerStack::uniform(0.0, 1.0, vec![1.0; 3]),
            interfaces: InterfaceSpec::perfect(),
            boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::constant(t_right)),
            initial: vec![InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]); 3],
        })
        .unwrap()
    }

    fn tail_to_peak(table: &SpectralTable) -> f64 {
        let mags: Vec<f64> = table.values.iter().map(|x| x.iter().map(|z| z.norm()).fold(0.0, f64::max)).collect();
        let peak = mags.iter().copied().fold(0.0, f64::max);
        let decile = mags.len() / 10;
        let tail = mags[..decile].iter().chain(&mags[mags.len() - decile..]).copied().fold(0.0, f64::max);
        tail / peak
    }

    #[test]
    fn tails_decay_for_homogeneous_boundary_data() {
        let grid = ContourSpec::default().build(Half::Plus);
        for t in [0.001, 0.01, 0.1] {
            let table = build_spectral_table(&example_a(0.0), &grid, t).unwrap();
            assert!(tail_to_peak(&table) <= 1e-8);
        }
        // boundary data leave an algebraic tail
        let table = build_spectral_table(&example_a(1.0), &grid, 0.1).unwrap();
        assert!(tail_to_peak(&table) > 1e-8);
    }

    #[test]
    fn zero_data_gives_zero_vector() {
        let p = validate(&Problem {
            layers: LayerStack { breakpoints: vec![0.0, 1.0], sigmas: vec![1.0] },
            interfaces: InterfaceSpec::perfect(),
            boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::zero()),
            initial: vec![InitialCondition::constant(0.0)],
        })
        .unwrap();
        let grid = contour_nodes(Half::Plus, 10.0, 101);
        let table = build_spectral_table(&p, &grid, 0.1).unwrap();
        assert!(table.values.iter().flatten().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn example_a_node_residual() {
        let p = example_a(1.0);
        let nu = Complex64::new(0.0, (std::f64::consts::PI / 8.0).sin());
        let sys = assemble_system(&p, nu, &RhsSpec::full(0.1), 0.1, Equilibration::Logarithmic, None).unwrap();
        let (_, r) = solve_at_node(&sys).unwrap();
        assert!(r <= 1e-10, "{r}");
    }

    #[test]
    fn parity_of_solves() {
        let p = example_a(1.0);
        for nu in [Complex64::new(0.3, 0.9), Complex64::new(-4.0, 2.5), Complex64::new(20.0, 8.0)] {
            let spec = RhsSpec::full(0.1);
            let a = assemble_system(&p, nu, &spec, 0.1, Equilibration::Logarithmic, None).unwrap();
            let b = assemble_system(&p, -nu, &spec, 0.1, Equilibration::Logarithmic, None).unwrap();
            let (xa, _) = solve_at_node(&a).unwrap();
            let (xb, _) = solve_at_node(&b).unwrap();
            let scale = norm(&xa);
            for (u, v) in xa.iter().zip(&xb) {
                assert!((u - v).norm() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn example_a_table_fully_solved() {
        let p = example_a(1.0);
        let grid = contour_nodes(Half::Plus, 10.0, 2001);
        let table = build_spectral_table(&p, &grid, 0.1).unwrap();
        assert!(table.provenance.iter().all(|p| *p == Provenance::Solved));
        assert!(table.max_residual() <= 1e-10, "{}", table.max_residual());
        let minus = table.mirrored();
        assert_eq!(minus.grid.half, Half::Minus);
        assert_eq!(minus.grid.nodes[7].nu, -table.grid.nodes[7].nu);
    }

    #[test]
    fn raw_mode_interpolates_overflowing_tails() {
        let p = validate(&Problem {
            layers: LayerStack { breakpoints: vec![0.0, 0.5, 1.0], sigmas: vec![1e-3, 1e-3] },
            interfaces: InterfaceSpec::perfect(),
            boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::zero()),
            initial: vec![InitialCondition::constant(1.0); 2],
        })
        .unwrap();
        let grid = ContourSpec { theta_max: 1.4, count: 401, ..ContourSpec::default() }.build(Half::Plus);
        let options = TableOptions { equilibration: Equilibration::Raw, ..TableOptions::default() };
        let table = build_table_with(&p, &grid, &RhsSpec::full(0.1), 0.1, &options, None).unwrap();
        let k = table.provenance.iter().filter(|p| **p == Provenance::Interpolated).count();
        assert!(k > 0);
        assert!(table.interpolated_fraction() <= MAX_INTERPOLATED_FRACTION);
        let mid = table.provenance.len() / 2;
        assert_eq!(table.provenance[mid], Provenance::Solved);
        // interpolated nodes sit in the tails
        let first = table.provenance.iter().position(|p| *p == Provenance::Interpolated).unwrap();
        assert!(first == 0 || table.provenance[..first].iter().all(|p| *p == Provenance::Solved));
        assert!(table.values.iter().all(|v| v.len() == 6));

        let strict = TableOptions { max_interpolated_fraction: 0.0, ..options };
        assert!(matches!(
            build_table_with(&p, &grid, &RhsSpec::full(0.1), 0.1, &strict, None),
            Err(SpectralError::TooManyOverflowNodes { .. })
        ));
    }

    #[test]
    fn dump_has_one_line_per_node() {
        let p = example_a(1.0);
        let grid = contour_nodes(Half::Plus, 5.0, 33);
        let table = build_spectral_table(&p, &grid, 0.1).unwrap();
        let mut out = Vec::new();
        table.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 34);
        assert!(text.lines().next().unwrap().ends_with("im_x7,residual,provenance"));
    }
}

//! Quadrature grids for the spectral integrals.
//!
//! The upper and lower contours are the hyperbolas
//! `nu(theta) = +/- R i sin(alpha - i theta)`, i.e.
//! `nu = +/- R (cos(alpha) sinh(theta) + i sin(alpha) cosh(theta))`,
//! with asymptotes at angle `alpha` from the real axis. With `theta`
//! increasing the upper curve runs left to right and the lower curve right
//! to left, which is the orientation the solution formulas integrate in.
//!
//! For `alpha < pi/4` the tails leave the sector `Re(nu^2) < 0`, so
//! `exp(-nu^2 t)` decays along them; for `alpha >= pi/4` the whole curve
//! stays inside that sector.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

pub const DEFAULT_ANGLE: f64 = FRAC_PI_8;
pub const DEFAULT_THETA_MAX: f64 = 15.0;
pub const DEFAULT_NODE_COUNT: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Half {
    Plus,
    Minus,
}

impl Half {
    fn sign(self) -> f64 {
        match self {
            Half::Plus => 1.0,
            Half::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourNode {
    pub theta: f64,
    pub nu: Complex64,
    /// `d nu / d theta` times the trapezoid weight.
    pub weight: Complex64,
}

/// Shape of a contour pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub angle: f64,
    pub theta_max: f64,
    pub count: usize,
    pub radius: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            angle: DEFAULT_ANGLE,
            theta_max: DEFAULT_THETA_MAX,
            count: DEFAULT_NODE_COUNT,
            radius: 1.0,
        }
    }
}

impl ContourSpec {
    /// A curve asymptotic to `Re(nu^2) < 0` with every node inside that sector.
    pub fn inside_sector(theta_max: f64, count: usize) -> Self {
        Self { angle: 1.5 * FRAC_PI_4, theta_max, count, radius: 1.0 }
    }

    pub fn with_count(self, count: usize) -> Self {
        Self { count, ..self }
    }

    pub fn build(&self, half: Half) -> ContourGrid {
        assert!(self.theta_max > 0.0 && self.count >= 16, "contour needs theta_max > 0, count >= 16");
        assert!(self.angle > 0.0 && self.angle < PI / 2.0 && self.radius > 0.0);
        let m = self.count;
        let dt = 2.0 * self.theta_max / (m - 1) as f64;
        let s = half.sign();
        let i = Complex64::new(0.0, 1.0);
        let nodes = (0..m)
            .map(|j| {
                let theta = if j == m - 1 { self.theta_max } else { -self.theta_max + j as f64 * dt };
                let arg = Complex64::new(self.angle, -theta);
                let nu = s * self.radius * i * arg.sin();
                let w = if j == 0 || j == m - 1 { 0.5 * dt } else { dt };
                ContourNode { theta, nu, weight: s * self.radius * arg.cos() * w }
            })
            .collect();
        ContourGrid { half, spec: *self, nodes }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub half: Half,
    pub spec: ContourSpec,
    pub nodes: Vec<ContourNode>,
}

impl ContourGrid {
    pub fn theta_max(&self) -> f64 {
        self.spec.theta_max
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }
}

/// Nodes on `[-theta_max, theta_max]` of `+/- i sin(pi/8 - i theta)`.
pub fn contour_nodes(half: Half, theta_max: f64, count: usize) -> ContourGrid {
    ContourSpec { theta_max, count, ..ContourSpec::default() }.build(half)
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("real-axis quadrature needs t > 0, got {0}")]
pub struct NonPositiveTime(pub f64);

/// Truncated trapezoid grid for `integral_R exp(ikx - sigma^2 k^2 t) F(k) dk`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealAxisGrid {
    pub nodes: Vec<(f64, f64)>,
    pub truncation: f64,
    pub step: f64,
}

/// `span` is the spatial extent the oscillatory factor `exp(ikx)` must resolve.
pub fn real_axis_nodes(
    sigma: f64,
    t: f64,
    tol: f64,
    span: f64,
) -> Result<RealAxisGrid, NonPositiveTime> {
    if !(t > 0.0) {
        return Err(NonPositiveTime(t));
    }
    let log_tol = (1.0 / tol).ln();
    let truncation = log_tol.sqrt() / (sigma * t.sqrt());
    // The trapezoid sum aliases the heat-kernel smoothed data by 2 pi / h;
    // keep the first image beyond the data support plus the kernel spread.
    let spread = 2.0 * sigma * (t * log_tol).sqrt();
    let step = (PI / (2.0 * span)).min(2.0 * PI / (2.0 * span + 2.0 * spread));
    let half = (truncation / step).ceil() as usize;
    let step = truncation / half as f64;
    let nodes = (0..=2 * half)
        .map(|j| {
            let k = -truncation + j as f64 * step;
            let w = if j == 0 || j == 2 * half { 0.5 * step } else { step };
            (k, w)
        })
        .collect();
    Ok(RealAxisGrid { nodes, truncation, step })
}

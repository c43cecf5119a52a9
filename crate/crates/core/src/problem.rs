//! Multilayer heat conduction problems and their validation.
//!
//! Layers are indexed from zero internally: layer `l` occupies
//! `[breakpoints[l], breakpoints[l + 1]]` with diffusivity root `sigmas[l]`,
//! and interface `i` sits at `breakpoints[i + 1]` between layers `i` and `i + 1`.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Breakpoints `x_0 < ... < x_{n+1}` and the square roots of the layer diffusivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub breakpoints: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl LayerStack {
    /// Evenly spaced breakpoints on `[a, b]` for `sigmas.len()` layers.
    pub fn uniform(a: f64, b: f64, sigmas: Vec<f64>) -> Self {
        let m = sigmas.len();
        let breakpoints = (0..=m)
            .map(|i| if i == m { b } else { a + (b - a) * i as f64 / m as f64 })
            .collect();
        Self { breakpoints, sigmas }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub kind: InterfaceKind,
    /// Contact transfer coefficients `H_i`, one per interface (imperfect contact only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contact: Vec<f64>,
}

impl InterfaceSpec {
    pub fn perfect() -> Self {
        Self { kind: InterfaceKind::Perfect, contact: Vec::new() }
    }

    pub fn imperfect(contact: Vec<f64>) -> Self {
        Self { kind: InterfaceKind::Imperfect, contact }
    }
}

/// Time-dependent boundary data `f(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSignal {
    Constant { value: f64 },
    /// Coefficients of `c_0 + c_1 t + c_2 t^2 + ...`.
    Polynomial { coeffs: Vec<f64> },
    Cosine { amplitude: f64, frequency: f64 },
    Sine { amplitude: f64, frequency: f64 },
    Exponential { amplitude: f64, rate: f64 },
    /// Piecewise-linear data through `(t, value)` samples.
    Sampled { points: Vec<(f64, f64)> },
}

impl TimeSignal {
    pub fn constant(value: f64) -> Self {
        TimeSignal::Constant { value }
    }

    pub fn zero() -> Self {
        TimeSignal::Constant { value: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant { value } => *value,
            TimeSignal::Polynomial { coeffs } => horner(coeffs, t),
            TimeSignal::Cosine { amplitude, frequency } => amplitude * (frequency * t).cos(),
            TimeSignal::Sine { amplitude, frequency } => amplitude * (frequency * t).sin(),
            TimeSignal::Exponential { amplitude, rate } => amplitude * (rate * t).exp(),
            TimeSignal::Sampled { points } => piecewise_linear(points, t),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            TimeSignal::Constant { value } => *value == 0.0,
            TimeSignal::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            TimeSignal::Cosine { amplitude, .. }
            | TimeSignal::Sine { amplitude, .. }
            | TimeSignal::Exponential { amplitude, .. } => *amplitude == 0.0,
            TimeSignal::Sampled { points } => points.iter().all(|p| p.1 == 0.0),
        }
    }

    /// The constant value, if the signal does not depend on time.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            TimeSignal::Constant { value } => Some(*value),
            TimeSignal::Polynomial { coeffs } => {
                if coeffs.iter().skip(1).all(|c| *c == 0.0) {
                    Some(coeffs.first().copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            TimeSignal::Cosine { amplitude, frequency } if *frequency == 0.0 => Some(*amplitude),
            TimeSignal::Sine { amplitude, frequency }
                if *frequency == 0.0 || *amplitude == 0.0 =>
            {
                Some(0.0)
            }
            TimeSignal::Exponential { amplitude, rate } if *rate == 0.0 || *amplitude == 0.0 => {
                Some(if *rate == 0.0 { *amplitude } else { 0.0 })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// `(beta_1, beta_2, beta_3, beta_4)`: `beta_1 u + beta_2 u_x = f_left` at `x_0`,
    /// `beta_3 u + beta_4 u_x = f_right` at `x_{n+1}`.
    pub beta: [f64; 4],
    pub left: TimeSignal,
    pub right: TimeSignal,
}

impl BoundarySpec {
    pub fn dirichlet(left: TimeSignal, right: TimeSignal) -> Self {
        Self { beta: [1.0, 0.0, 1.0, 0.0], left, right }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.left.is_identically_zero() && self.right.is_identically_zero()
    }
}

/// Initial temperature on one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant { value: f64 },
    /// Coefficients of `c_0 + c_1 x + ...` in the problem's own `x` coordinate.
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise-linear data through `(x, value)` samples covering the layer.
    Sampled { points: Vec<(f64, f64)> },
}

impl InitialCondition {
    pub fn constant(value: f64) -> Self {
        InitialCondition::Constant { value }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        InitialCondition::Polynomial { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Constant { value } => *value,
            InitialCondition::Polynomial { coeffs } => horner(coeffs, x),
            InitialCondition::Sampled { points } => piecewise_linear(points, x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Constant { .. } => 0.0,
            InitialCondition::Polynomial { coeffs } => horner(&poly_derivative(coeffs), x),
            InitialCondition::Sampled { points } => {
                if points.len() < 2 {
                    return 0.0;
                }
                let i = segment_index(points, x);
                let (a, b) = (points[i], points[i + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    /// Polynomial pieces `(a, b, coeffs)` with `coeffs` expressed in the local variable `x - a`.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, Vec<f64>)> {
        match self {
            InitialCondition::Constant { value } => vec![(a, b, vec![*value])],
            InitialCondition::Polynomial { coeffs } => vec![(a, b, taylor_shift(coeffs, a))],
            InitialCondition::Sampled { points } => points
                .windows(2)
                .filter_map(|w| {
                    let (lo, hi) = (w[0].0.max(a), w[1].0.min(b));
                    if hi <= lo {
                        return None;
                    }
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    let v = w[0].1 + slope * (lo - w[0].0);
                    Some((lo, hi, vec![v, slope]))
                })
                .collect(),
        }
    }

    fn shifted(&self, offset: f64) -> Self {
        match self {
            InitialCondition::Constant { value } => InitialCondition::Constant { value: *value },
            InitialCondition::Polynomial { coeffs } => {
                InitialCondition::Polynomial { coeffs: taylor_shift(coeffs, offset) }
            }
            InitialCondition::Sampled { points } => InitialCondition::Sampled {
                points: points.iter().map(|&(x, v)| (x - offset, v)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub layers: LayerStack,
    pub interfaces: InterfaceSpec,
    pub boundary: BoundarySpec,
    /// One initial condition per layer.
    pub initial: Vec<InitialCondition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonIncreasingBreakpoints { index: usize },
    NonPositiveSigma { layer: usize, value: f64 },
    ZeroContactCoefficient { interface: usize },
    DegenerateBoundaryRow { side: Side },
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    InvalidData { what: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonIncreasingBreakpoints { index } => {
                write!(f, "breakpoints not strictly increasing at index {index}")
            }
            Violation::NonPositiveSigma { layer, value } => {
                write!(f, "sigma of layer {layer} must be positive and finite, got {value}")
            }
            Violation::ZeroContactCoefficient { interface } => {
                write!(f, "contact coefficient of interface {interface} must be nonzero and finite")
            }
            Violation::DegenerateBoundaryRow { side } => {
                write!(f, "{side} boundary coefficients are both zero")
            }
            Violation::LengthMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected} entries, found {found}")
            }
            Violation::InvalidData { what } => write!(f, "{what}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError(pub Vec<Violation>);

/// A checked problem with `x_0` shifted to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    original: Problem,
    normalized: Problem,
    offset: f64,
}

pub fn validate(problem: &Problem) -> Result<ValidatedProblem, ValidationError> {
    let mut errs = Vec::new();
    let Problem { layers, interfaces, boundary, initial } = problem;
    let bp = &layers.breakpoints;

    if bp.len() < 2 {
        errs.push(Violation::LengthMismatch { what: "breakpoints", expected: 2, found: bp.len() });
    }
    for (i, w) in bp.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            errs.push(Violation::NonIncreasingBreakpoints { index: i + 1 });
        }
    }
    let n_layers = bp.len().saturating_sub(1);
    if layers.sigmas.len() != n_layers {
        errs.push(Violation::LengthMismatch {
            what: "sigmas",
            expected: n_layers,
            found: layers.sigmas.len(),
        });
    }
    for (l, &s) in layers.sigmas.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            errs.push(Violation::NonPositiveSigma { layer: l, value: s });
        }
    }
    let n_interfaces = n_layers.saturating_sub(1);
    match interfaces.kind {
        InterfaceKind::Perfect => {
            if !interfaces.contact.is_empty() {
                errs.push(Violation::LengthMismatch {
                    what: "contact coefficients (perfect contact)",
                    expected: 0,
                    found: interfaces.contact.len(),
                });
            }
        }
        InterfaceKind::Imperfect => {
            if interfaces.contact.len() != n_interfaces {
                errs.push(Violation::LengthMismatch {
                    what: "contact coefficients",
                    expected: n_interfaces,
                    found: interfaces.contact.len(),
                });
            }
            for (i, &h) in interfaces.contact.iter().enumerate() {
                if h == 0.0 || !h.is_finite() {
                    errs.push(Violation::ZeroContactCoefficient { interface: i });
                }
            }
        }
    }
    let b = boundary.beta;
    if b.iter().any(|v| !v.is_finite()) {
        errs.push(Violation::InvalidData { what: "boundary coefficients must be finite".into() });
    }
    if b[0] == 0.0 && b[1] == 0.0 {
        errs.push(Violation::DegenerateBoundaryRow { side: Side::Left });
    }
    if b[2] == 0.0 && b[3] == 0.0 {
        errs.push(Violation::DegenerateBoundaryRow { side: Side::Right });
    }
    for (side, sig) in [(Side::Left, &boundary.left), (Side::Right, &boundary.right)] {
        if let Err(what) = check_signal(sig) {
            errs.push(Violation::InvalidData { what: format!("{side} boundary signal: {what}") });
        }
    }
    if initial.len() != n_layers {
        errs.push(Violation::LengthMismatch {
            what: "initial conditions",
            expected: n_layers,
            found: initial.len(),
        });
    } else if errs.is_empty() {
        for (l, ic) in initial.iter().enumerate() {
            if let Err(what) = check_initial(ic, bp[l], bp[l + 1]) {
                errs.push(Violation::InvalidData {
                    what: format!("initial condition of layer {l}: {what}"),
                });
            }
        }
    }
    if !errs.is_empty() {
        return Err(ValidationError(errs));
    }

    let offset = bp[0];
    let mut normalized = problem.clone();
    if offset != 0.0 {
        normalized.layers.breakpoints = bp.iter().map(|x| x - offset).collect();
        normalized.initial = initial.iter().map(|ic| ic.shifted(offset)).collect();
    }
    normalized.layers.breakpoints[0] = 0.0;
    Ok(ValidatedProblem { original: problem.clone(), normalized, offset })
}

fn check_signal(sig: &TimeSignal) -> Result<(), String> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match sig {
        TimeSignal::Constant { value } if !value.is_finite() => Err("non-finite value".into()),
        TimeSignal::Polynomial { coeffs } if !finite(coeffs) => Err("non-finite coefficient".into()),
        TimeSignal::Cosine { amplitude, frequency } | TimeSignal::Sine { amplitude, frequency }
            if !finite(&[*amplitude, *frequency]) =>
        {
            Err("non-finite parameter".into())
        }
        TimeSignal::Exponential { amplitude, rate } if !finite(&[*amplitude, *rate]) => {
            Err("non-finite parameter".into())
        }
        TimeSignal::Sampled { points } => {
            if points.is_empty() || points[0].0 > 0.0 {
                return Err("samples must start at t <= 0".into());
            }
            check_samples(points)
        }
        _ => Ok(()),
    }
}

fn check_initial(ic: &InitialCondition, a: f64, b: f64) -> Result<(), String> {
    match ic {
        InitialCondition::Constant { value } if !value.is_finite() => Err("non-finite value".into()),
        InitialCondition::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
            Err("non-finite coefficient".into())
        }
        InitialCondition::Sampled { points } => {
            check_samples(points)?;
            if points[0].0 > a || points[points.len() - 1].0 < b {
                return Err(format!("samples do not cover [{a}, {b}]"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_samples(points: &[(f64, f64)]) -> Result<(), String> {
    if points.len() < 2 {
        return Err("need at least two samples".into());
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err("non-finite sample".into());
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err("sample abscissae must be strictly increasing".into());
    }
    Ok(())
}

impl ValidatedProblem {
    /// The problem exactly as it was supplied (original coordinates).
    pub fn original(&self) -> &Problem {
        &self.original
    }

    /// The problem with `x_0 = 0`.
    pub fn normalized(&self) -> &Problem {
        &self.normalized
    }

    /// Amount subtracted from every `x` during normalization.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn n_layers(&self) -> usize {
        self.normalized.layers.sigmas.len()
    }

    pub fn n_interfaces(&self) -> usize {
        self.n_layers() - 1
    }

    pub fn kind(&self) -> InterfaceKind {
        self.normalized.interfaces.kind
    }

    /// Normalized breakpoint `x_i`, `0 <= i <= n + 1`.
    pub fn breakpoint(&self, i: usize) -> f64 {
        self.normalized.layers.breakpoints[i]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.normalized.layers.breakpoints
    }

    pub fn sigma(&self, layer: usize) -> f64 {
        self.normalized.layers.sigmas[layer]
    }

    pub fn contact(&self, interface: usize) -> f64 {
        self.normalized.interfaces.contact[interface]
    }

    pub fn length(&self) -> f64 {
        self.breakpoint(self.n_layers())
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.normalized.boundary
    }

    pub fn initial(&self, layer: usize) -> &InitialCondition {
        &self.normalized.initial[layer]
    }

    /// Layer containing normalized `x`; breakpoints belong to the layer on their left
    /// (except `x_0`).
    pub fn layer_of(&self, x: f64) -> usize {
        let bp = self.breakpoints();
        let n = self.n_layers();
        (0..n).find(|&l| x <= bp[l + 1]).unwrap_or(n - 1)
    }

    pub fn initial_value(&self, x: f64) -> f64 {
        self.initial(self.layer_of(x)).eval(x)
    }

    /// Same problem with every contact coefficient replaced by `h` (imperfect contact).
    pub fn with_uniform_contact(&self, h: f64) -> Result<ValidatedProblem, ValidationError> {
        let mut p = self.original.clone();
        p.interfaces = InterfaceSpec::imperfect(vec![h; self.n_interfaces()]);
        validate(&p)
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub(crate) fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

/// Coefficients of `q(y) = p(y + a)`.
pub(crate) fn taylor_shift(coeffs: &[f64], a: f64) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            out[j] += a * out[j + 1];
        }
    }
    out
}

fn segment_index(points: &[(f64, f64)], x: f64) -> usize {
    let n = points.len();
    match points.binary_search_by(|p| p.0.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    }
}

fn piecewise_linear(points: &[(f64, f64)], x: f64) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => points[0].1,
        _ => {
            let i = segment_index(points, x);
            let (a, b) = (points[i], points[i + 1]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_a() -> Problem {
        Problem {
            layers: LayerStack::uniform(0.0, 1.0, vec![1.0; 3]),
            interfaces: InterfaceSpec::perfect(),
            boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::constant(1.0)),
            initial: vec![InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]); 3],
        }
    }

    #[test]
    fn example_a_is_valid() {
        let v = validate(&example_a()).unwrap();
        assert_eq!(v.n_layers(), 3);
        assert_eq!(v.offset(), 0.0);
        assert!((v.breakpoint(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn repeated_breakpoint_rejected() {
        let mut p = example_a();
        p.layers = LayerStack { breakpoints: vec![0.0, 0.5, 0.5], sigmas: vec![1.0, 1.0] };
        p.initial.truncate(2);
        let err = validate(&p).unwrap_err();
        assert!(err.0.contains(&Violation::NonIncreasingBreakpoints { index: 2 }));
    }

    #[test]
    fn zero_contact_rejected() {
        let mut p = example_a();
        p.interfaces = InterfaceSpec::imperfect(vec![0.0, 1.0]);
        let err = validate(&p).unwrap_err();
        assert_eq!(err.0, vec![Violation::ZeroContactCoefficient { interface: 0 }]);
    }

    #[test]
    fn perfect_with_contact_rejected() {
        let mut p = example_a();
        p.interfaces.contact = vec![1.0, 1.0];
        assert!(matches!(
            validate(&p).unwrap_err().0[0],
            Violation::LengthMismatch { expected: 0, .. }
        ));
    }

    #[test]
    fn collects_several_violations() {
        let mut p = example_a();
        p.layers.sigmas = vec![1.0, -1.0, f64::NAN];
        p.boundary.beta = [0.0, 0.0, 0.0, 0.0];
        let err = validate(&p).unwrap_err();
        assert_eq!(err.0.len(), 4);
        assert!(err.0.contains(&Violation::DegenerateBoundaryRow { side: Side::Right }));
    }

    #[test]
    fn length_mismatch() {
        let mut p = example_a();
        p.initial.pop();
        assert!(matches!(
            validate(&p).unwrap_err().0[0],
            Violation::LengthMismatch { what: "initial conditions", .. }
        ));
    }

    #[test]
    fn shift_normalizes_and_preserves_initial_data() {
        let mut p = example_a();
        p.layers = LayerStack::uniform(2.0, 3.0, vec![1.0; 3]);
        let v = validate(&p).unwrap();
        assert_eq!(v.offset(), 2.0);
        assert_eq!(v.breakpoint(0), 0.0);
        // u0 = x^3 in original coordinates, evaluated at original x = 2.5
        assert!((v.initial_value(0.5) - 2.5f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn validate_is_idempotent() {
        let mut p = example_a();
        p.layers = LayerStack::uniform(-1.0, 1.0, vec![1.0, 2.0, 0.5]);
        let once = validate(&p).unwrap();
        let twice = validate(once.original()).unwrap();
        assert_eq!(once, twice);
        let renorm = validate(once.normalized()).unwrap();
        assert_eq!(renorm.normalized(), once.normalized());
    }

    #[test]
    fn sampled_initial_must_cover_layer() {
        let mut p = example_a();
        p.initial[1] = InitialCondition::Sampled { points: vec![(0.4, 1.0), (0.6, 1.0)] };
        assert!(validate(&p).is_err());
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let s = taylor_shift(&c, 0.7);
        for y in [-1.0, 0.0, 0.3, 2.0] {
            assert!((horner(&s, y) - horner(&c, y + 0.7)).abs() < 1e-12);
        }
    }
}

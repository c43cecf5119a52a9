//! Spectral transforms of the data: the layer Fourier transforms of the initial
//! condition and the finite-time Laplace-type transforms of the boundary signals.
//!
//! Every routine accepts an additive complex `shift` and returns the transform
//! multiplied by `exp(shift)`. The exponential is folded into each closed-form
//! term before it is evaluated, so heavily scaled rows never pass through an
//! overflowing intermediate.

use crate::problem::{Side, TimeSignal, ValidatedProblem};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Mutex;

/// Real part of an exponent above which `exp` leaves the `f64` range.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("transform overflows at argument {argument} (exponent {exponent:.1})")]
    OverflowAtArgument { argument: Complex64, exponent: f64 },
    #[error("sampled signal does not cover [0, {horizon}]")]
    SignalNotCovered { horizon: f64 },
    #[error("layer index {0} out of range")]
    InvalidLayer(usize),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `exp(shift) * integral_a^b exp(z s) p(s - a) ds` where `coeffs` are the
/// coefficients of `p` in the local variable `s - a`.
pub fn exp_poly_integral(
    z: Complex64,
    coeffs: &[f64],
    a: f64,
    b: f64,
    shift: Complex64,
) -> Result<Complex64, TransformError> {
    let len = b - a;
    if len <= 0.0 || coeffs.is_empty() {
        return Ok(ZERO);
    }
    let half = 0.5 * len;
    if z.norm() * half <= 1.0 {
        // Series about the midpoint: term r is bounded by (|z| h)^r / r! <= 1 / r!,
        // so 24 terms reach double precision.
        let centered = crate::problem::taylor_shift(coeffs, half);
        let exponent = z * (a + half) + shift;
        check_exponent(z, exponent)?;
        let mut sum = ZERO;
        let mut zr = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for r in 0..24 {
            if r > 0 {
                zr *= z;
                fact *= r as f64;
            }
            let mut moment = 0.0;
            for (m, c) in centered.iter().enumerate() {
                let p = r + m;
                if p % 2 == 0 {
                    moment += c * 2.0 * half.powi(p as i32 + 1) / (p as f64 + 1.0);
                }
            }
            sum += zr * (moment / fact);
        }
        return Ok(exponent.exp() * sum);
    }
    // Antiderivative exp(z y) * sum_r (-1)^r p^(r)(y) / z^(r+1) in the local variable.
    let antiderivative_poly = |y: f64| {
        let mut deriv = coeffs.to_vec();
        let mut zpow = z;
        let mut acc = ZERO;
        let mut sign = 1.0;
        while !deriv.is_empty() {
            acc += sign * crate::problem::horner(&deriv, y) / zpow;
            deriv = crate::problem::poly_derivative(&deriv);
            zpow *= z;
            sign = -sign;
        }
        acc
    };
    let e_hi = z * b + shift;
    let e_lo = z * a + shift;
    check_exponent(z, e_hi)?;
    check_exponent(z, e_lo)?;
    Ok(e_hi.exp() * antiderivative_poly(len) - e_lo.exp() * antiderivative_poly(0.0))
}

fn check_exponent(z: Complex64, exponent: Complex64) -> Result<(), TransformError> {
    if exponent.re > MAX_EXPONENT || !exponent.re.is_finite() {
        return Err(TransformError::OverflowAtArgument { argument: z, exponent: exponent.re });
    }
    Ok(())
}

/// `u0_hat(k) = integral over layer of exp(-i k x) u0(x) dx`.
pub fn initial_transform(
    problem: &ValidatedProblem,
    layer: usize,
    k: Complex64,
) -> Result<Complex64, TransformError> {
    initial_transform_scaled(problem, layer, k, ZERO)
}

/// `exp(shift) * u0_hat(k)` for one layer.
pub fn initial_transform_scaled(
    problem: &ValidatedProblem,
    layer: usize,
    k: Complex64,
    shift: Complex64,
) -> Result<Complex64, TransformError> {
    if layer >= problem.n_layers() {
        return Err(TransformError::InvalidLayer(layer));
    }
    let (a, b) = (problem.breakpoint(layer), problem.breakpoint(layer + 1));
    let z = Complex64::new(0.0, -1.0) * k;
    problem
        .initial(layer)
        .pieces(a, b)
        .iter()
        .try_fold(ZERO, |acc, (lo, hi, c)| Ok(acc + exp_poly_integral(z, c, *lo, *hi, shift)?))
}

/// `f_tilde(omega, t) = integral_0^t exp(omega s) f(s) ds`.
pub fn boundary_transform(
    signal: &TimeSignal,
    omega: Complex64,
    t: f64,
) -> Result<Complex64, TransformError> {
    boundary_transform_scaled(signal, omega, t, ZERO)
}

/// `exp(shift) * f_tilde(omega, t)`.
pub fn boundary_transform_scaled(
    signal: &TimeSignal,
    omega: Complex64,
    t: f64,
    shift: Complex64,
) -> Result<Complex64, TransformError> {
    boundary_window_scaled(signal, omega, 0.0, t, shift)
}

/// `exp(shift) * integral_from^to exp(omega s) f(s) ds`.
pub fn boundary_window_scaled(
    signal: &TimeSignal,
    omega: Complex64,
    from: f64,
    to: f64,
    shift: Complex64,
) -> Result<Complex64, TransformError> {
    if to <= from {
        return Ok(ZERO);
    }
    let unit = |z: Complex64| exp_poly_integral(z, &[1.0], from, to, shift);
    let i = Complex64::new(0.0, 1.0);
    match signal {
        TimeSignal::Constant { value } => Ok(*value * unit(omega)?),
        TimeSignal::Polynomial { coeffs } => {
            exp_poly_integral(omega, &crate::problem::taylor_shift(coeffs, from), from, to, shift)
        }
        TimeSignal::Cosine { amplitude, frequency } => {
            let w = i * *frequency;
            Ok(0.5 * amplitude * (unit(omega + w)? + unit(omega - w)?))
        }
        TimeSignal::Sine { amplitude, frequency } => {
            let w = i * *frequency;
            Ok(amplitude * (unit(omega + w)? - unit(omega - w)?) / (2.0 * i))
        }
        TimeSignal::Exponential { amplitude, rate } => Ok(*amplitude * unit(omega + *rate)?),
        TimeSignal::Sampled { points } => {
            if points.last().is_none_or(|p| p.0 < to) {
                return Err(TransformError::SignalNotCovered { horizon: to });
            }
            let mut acc = ZERO;
            for w in points.windows(2) {
                let (lo, hi) = (w[0].0.max(from), w[1].0.min(to));
                if hi <= lo {
                    continue;
                }
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let v = w[0].1 + slope * (lo - w[0].0);
                acc += exp_poly_integral(omega, &[v, slope], lo, hi, shift)?;
            }
            Ok(acc)
        }
    }
}

type Key = (u8, usize, [u64; 6]);

fn bits(values: [f64; 6]) -> [u64; 6] {
    values.map(f64::to_bits)
}

/// Thread-safe memo of transform evaluations.
#[derive(Debug, Default)]
pub struct TransformCache {
    map: Mutex<HashMap<Key, Complex64>>,
}

impl TransformCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn memo(
        &self,
        key: Key,
        f: impl FnOnce() -> Result<Complex64, TransformError>,
    ) -> Result<Complex64, TransformError> {
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn initial(
        &self,
        problem: &ValidatedProblem,
        layer: usize,
        k: Complex64,
        shift: Complex64,
    ) -> Result<Complex64, TransformError> {
        let key = (0, layer, bits([k.re, k.im, shift.re, shift.im, 0.0, 0.0]));
        self.memo(key, || initial_transform_scaled(problem, layer, k, shift))
    }

    /// Boundary transform over the time window `[from, to]`.
    pub fn boundary(
        &self,
        problem: &ValidatedProblem,
        side: Side,
        omega: Complex64,
        from: f64,
        to: f64,
        shift: Complex64,
    ) -> Result<Complex64, TransformError> {
        let tag = match side {
            Side::Left => 1,
            Side::Right => 2,
        };
        let key = (tag, 0, bits([omega.re, omega.im, from, to, shift.re, shift.im]));
        let signal = match side {
            Side::Left => &problem.boundary().left,
            Side::Right => &problem.boundary().right,
        };
        self.memo(key, || boundary_window_scaled(signal, omega, from, to, shift))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;
    use proptest::prelude::*;

    /// Adaptive Simpson on a complex integrand; independent of the closed forms.
    fn adaptive(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
        fn rec(
            f: &dyn Fn(f64) -> Complex64,
            a: f64,
            b: f64,
            fa: Complex64,
            fm: Complex64,
            fb: Complex64,
            whole: Complex64,
            tol: f64,
            depth: u32,
        ) -> Complex64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.norm() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    fn single_layer(ic: InitialCondition) -> ValidatedProblem {
        validate(&Problem {
            layers: LayerStack { breakpoints: vec![0.0, 1.0], sigmas: vec![1.0] },
            interfaces: InterfaceSpec::perfect(),
            boundary: BoundarySpec::dirichlet(TimeSignal::zero(), TimeSignal::zero()),
            initial: vec![ic],
        })
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_at_zero() {
        let p = single_layer(InitialCondition::constant(1.0));
        let v = initial_transform(&p, 0, c(0.0, 0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn cubic_at_zero() {
        let p = single_layer(InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]));
        let v = initial_transform(&p, 0, c(0.0, 0.0)).unwrap();
        assert!((v - 0.25).norm() < 1e-15);
    }

    #[test]
    fn cubic_at_pi_matches_quadrature() {
        let p = single_layer(InitialCondition::polynomial(vec![0.0, 0.0, 0.0, 1.0]));
        let k = std::f64::consts::PI;
        let v = initial_transform(&p, 0, c(k, 0.0)).unwrap();
        let reference = adaptive(&|x| (c(0.0, -k * x)).exp() * x.powi(3), 0.0, 1.0, 1e-15);
        assert!((v - reference).norm() < 1e-12, "{v} vs {reference}");
    }

    #[test]
    fn complex_argument_matches_quadrature() {
        let p = single_layer(InitialCondition::polynomial(vec![0.3, -1.0, 2.0, 0.5]));
        for k in [c(0.2, 0.4), c(-3.0, 2.5), c(12.0, -7.0), c(0.9, -0.9)] {
            let v = initial_transform(&p, 0, k).unwrap();
            let reference = adaptive(
                &|x| (c(0.0, -1.0) * k * x).exp() * (0.3 - x + 2.0 * x * x + 0.5 * x.powi(3)),
                0.0,
                1.0,
                1e-15,
            );
            assert!((v - reference).norm() <= 1e-11 * reference.norm().max(1.0), "k={k}");
        }
    }

    #[test]
    fn sampled_initial_is_exact_for_linear_data() {
        let p = single_layer(InitialCondition::Sampled {
            points: vec![(0.0, 1.0), (0.5, 2.0), (1.0, 0.0)],
        });
        let k = c(4.0, 1.0);
        let f = |x: f64| if x < 0.5 { 1.0 + 2.0 * x } else { 2.0 - 4.0 * (x - 0.5) };
        let reference = adaptive(&|x| (c(0.0, -1.0) * k * x).exp() * f(x), 0.0, 0.5, 1e-15)
            + adaptive(&|x| (c(0.0, -1.0) * k * x).exp() * f(x), 0.5, 1.0, 1e-15);
        let v = initial_transform(&p, 0, k).unwrap();
        assert!((v - reference).norm() < 1e-10);
    }

    #[test]
    fn shift_is_folded_into_result() {
        let p = single_layer(InitialCondition::polynomial(vec![1.0, 1.0]));
        let k = c(3.0, 2.0);
        let shift = c(-1.5, 0.7);
        let a = initial_transform_scaled(&p, 0, k, shift).unwrap();
        let b = initial_transform(&p, 0, k).unwrap() * shift.exp();
        assert!((a - b).norm() < 1e-13 * b.norm());
    }

    #[test]
    fn overflow_reported_and_avoided_by_shift() {
        let p = single_layer(InitialCondition::constant(1.0));
        let k = c(0.0, 1000.0);
        assert!(matches!(
            initial_transform(&p, 0, k),
            Err(TransformError::OverflowAtArgument { .. })
        ));
        let v = initial_transform_scaled(&p, 0, k, c(-1000.0, 0.0)).unwrap();
        // integral_0^1 exp(1000 x) dx * exp(-1000) ~ 1/1000
        assert!((v.re - (1.0 - (-1000f64).exp()) / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn zero_signal() {
        let v = boundary_transform(&TimeSignal::zero(), c(3.0, -2.0), 1.7).unwrap();
        assert_eq!(v, ZERO);
    }

    #[test]
    fn unit_signal_limits() {
        let one = TimeSignal::constant(1.0);
        let v = boundary_transform(&one, c(0.0, 0.0), 2.5).unwrap();
        assert!((v - 2.5).norm() < 1e-15);
        let v = boundary_transform(&one, c(1.0, 0.0), 1.0).unwrap();
        assert!((v.re - 1.718281828459045).abs() < 1e-14 && v.im.abs() < 1e-15, "{v}");
        let tiny = boundary_transform(&one, c(1e-9, 0.0), 1.0).unwrap();
        assert!((tiny.re - (1.0 + 0.5e-9)).abs() < 1e-15);
    }

    #[test]
    fn cosine_matches_quadrature() {
        let sig = TimeSignal::Cosine { amplitude: 1.0, frequency: 1.0 };
        let v = boundary_transform(&sig, c(-1.0, 0.0), 1.0).unwrap();
        let reference = adaptive(&|s| c((-s).exp() * s.cos(), 0.0), 0.0, 1.0, 1e-15);
        assert!((v - reference).norm() < 1e-12, "{v} {reference}");
    }

    #[test]
    fn other_signals_match_quadrature() {
        let omega = c(-2.0, 3.0);
        let t = 1.3;
        let cases: Vec<(TimeSignal, Box<dyn Fn(f64) -> f64>)> = vec![
            (TimeSignal::Sine { amplitude: 2.0, frequency: 3.0 }, Box::new(|s| 2.0 * (3.0 * s).sin())),
            (TimeSignal::Exponential { amplitude: 0.5, rate: -1.0 }, Box::new(|s| 0.5 * (-s).exp())),
            (TimeSignal::Polynomial { coeffs: vec![1.0, 0.0, -2.0] }, Box::new(|s| 1.0 - 2.0 * s * s)),
            (
                TimeSignal::Sampled { points: vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)] },
                Box::new(|s| if s < 1.0 { s } else { 2.0 - s }),
            ),
        ];
        for (sig, f) in cases {
            let v = boundary_transform(&sig, omega, t).unwrap();
            let g = |s: f64| (omega * s).exp() * f(s);
            let reference = adaptive(&g, 0.0, 1.0, 1e-15) + adaptive(&g, 1.0, t, 1e-15);
            assert!((v - reference).norm() < 1e-11, "{sig:?}: {v} vs {reference}");
        }
    }

    #[test]
    fn sampled_signal_must_cover_horizon() {
        let sig = TimeSignal::Sampled { points: vec![(0.0, 1.0), (1.0, 1.0)] };
        assert!(matches!(
            boundary_transform(&sig, c(0.0, 0.0), 2.0),
            Err(TransformError::SignalNotCovered { .. })
        ));
    }

    #[test]
    fn cache_is_pure_memoization() {
        let p = single_layer(InitialCondition::polynomial(vec![0.0, 1.0, 1.0]));
        let cache = TransformCache::new();
        let k = c(2.0, 0.5);
        let a = cache.initial(&p, 0, k, ZERO).unwrap();
        let b = cache.initial(&p, 0, k, ZERO).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, initial_transform(&p, 0, k).unwrap());
        assert_eq!(cache.len(), 1);
        let f = cache.boundary(&p, Side::Left, k, 0.0, 1.0, ZERO).unwrap();
        assert_eq!(f, ZERO);
        assert_eq!(cache.len(), 2);
    }

    proptest! {
        #[test]
        fn conjugate_symmetry_for_real_data(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..5),
            re in -20.0f64..20.0,
            im in -5.0f64..5.0,
        ) {
            let p = single_layer(InitialCondition::polynomial(coeffs));
            let k = c(re, im);
            let a = initial_transform(&p, 0, -k.conj()).unwrap();
            let b = initial_transform(&p, 0, k).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }

        #[test]
        fn closed_form_matches_quadrature_on_real_axis(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..5),
            k in -50.0f64..50.0,
        ) {
            let p = single_layer(InitialCondition::polynomial(coeffs.clone()));
            let v = initial_transform(&p, 0, c(k, 0.0)).unwrap();
            let f = |x: f64| c(0.0, -k * x).exp() * horner(&coeffs, x);
            let reference = (0..8).map(|i| {
                let (a, b) = (i as f64 / 8.0, (i + 1) as f64 / 8.0);
                adaptive(&f, a, b, 1e-16)
            }).sum::<Complex64>();
            let scale = coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1e-3);
            prop_assert!((v - reference).norm() <= 1e-10 * reference.norm().max(1e-2 * scale));
        }

        #[test]
        fn time_derivative_recovers_integrand(
            re in -3.0f64..3.0,
            im in -3.0f64..3.0,
            t in 0.1f64..2.0,
            which in 0usize..4,
        ) {
            let sig = match which {
                0 => TimeSignal::constant(1.5),
                1 => TimeSignal::Cosine { amplitude: 1.0, frequency: 2.0 },
                2 => TimeSignal::Exponential { amplitude: -1.0, rate: 0.5 },
                _ => TimeSignal::Polynomial { coeffs: vec![0.5, 1.0, -0.3] },
            };
            let omega = c(re, im);
            let h = 1e-5;
            let d = (boundary_transform(&sig, omega, t + h).unwrap()
                - boundary_transform(&sig, omega, t - h).unwrap()) / (2.0 * h);
            let exact = (omega * t).exp() * sig.eval(t);
            prop_assert!((d - exact).norm() <= 1e-6 * exact.norm().max(1e-3));
        }
    }
}

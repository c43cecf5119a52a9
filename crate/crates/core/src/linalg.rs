//! Small dense complex LU, a real banded solver and monotone cubic Hermite
//! interpolation.

use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("matrix is numerically singular at elimination step {step} (pivot {pivot:e}, scale {scale:e})")]
pub struct SingularMatrix {
    pub step: usize,
    pub pivot: f64,
    pub scale: f64,
}

/// LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    /// Factors `a`; pivots below `rel_tol * max|a_ij|` are reported as singular.
    pub fn factor(mut a: CMatrix, rel_tol: f64) -> Result<Self, SingularMatrix> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let scale = a.max_abs();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a.get(i, k).norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > rel_tol * scale) {
                return Err(SingularMatrix { step: k, pivot: pmax.max(0.0), scale });
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let inv = 1.0 / a.get(k, k);
            for i in k + 1..n {
                let f = a.get(i, k) * inv;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                a.set(i, k, f);
                let (top, bottom) = a.data.split_at_mut(i * n);
                let pivot_row = &top[k * n..k * n + n];
                let row = &mut bottom[..n];
                for j in k + 1..n {
                    row[j] -= f * pivot_row[j];
                }
            }
        }
        Ok(Self { lu: a, perm, swaps })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: Complex64 = (0..i).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: Complex64 = (i + 1..n).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / self.lu.get(i, i);
        }
        x
    }

    pub fn determinant(&self) -> Complex64 {
        let d: Complex64 = (0..self.lu.rows).map(|i| self.lu.get(i, i)).product();
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    /// `log10 |det|`, safe for large systems whose determinant underflows.
    pub fn log10_abs_det(&self) -> f64 {
        (0..self.lu.rows).map(|i| self.lu.get(i, i).norm().log10()).sum()
    }
}

/// Solves a small dense real system.
pub fn solve_real(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    let n = b.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m.set(i, j, Complex64::new(*v, 0.0));
        }
    }
    let lu = Lu::factor(m, 1e-13)?;
    let rhs: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    Ok(lu.solve(&rhs).into_iter().map(|v| v.re).collect())
}

/// Banded real matrix with `kl` sub- and `ku` super-diagonals, factored by
/// Gaussian elimination with partial pivoting (fill grows the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // Row i stores columns i - kl ..= i + kl + ku at offsets 0..width.
    band: Vec<f64>,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandedLu {
    /// `entries` are `(row, col, value)` triples with `|row - col|` within the band.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, SingularMatrix> {
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut scale: f64 = 0.0;
        for &(i, j, v) in entries {
            assert!(j + kl >= i && j <= i + ku, "entry ({i},{j}) outside band");
            band[idx(i, j)] += v;
            scale = scale.max(v.abs());
        }
        let mut pivots = vec![0; n];
        let mut multipliers = vec![0.0; n * kl];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (p, pmax) = (k..=last)
                .map(|i| (i, band[idx(i, k)].abs()))
                .fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            if !(pmax > 1e-14 * scale) {
                return Err(SingularMatrix { step: k, pivot: pmax.max(0.0), scale });
            }
            pivots[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    band.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = band[idx(k, k)];
            for i in k + 1..=last {
                let f = band[idx(i, k)] / piv;
                multipliers[k * kl + (i - k - 1)] = f;
                band[idx(i, k)] = 0.0;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        band[idx(i, j)] -= f * band[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, kl, width, band, pivots, multipliers })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, width) = (self.n, self.kl, self.width);
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * b[k];
            }
        }
        let ub = width - kl - 1;
        for i in (0..n).rev() {
            let jmax = (i + ub).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jmax {
                s -= self.band[idx(i, j)] * b[j];
            }
            b[i] = s / self.band[idx(i, i)];
        }
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson slopes
/// with the three-point end formula).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2);
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Self { x, y, d };
        }
        for i in 1..n - 1 {
            let (a, b) = (delta[i - 1], delta[i]);
            if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { x, y, d }
    }

    /// Evaluates the interpolant; outside the data the end cubic is extended.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.total_cmp(&xq)) {
            Ok(i) => return self.y[i],
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

//! Periodic channel geometry `[0, L) x [0, 1]` with Fourier collocation in
//! `x1` and Chebyshev-Lobatto collocation in `x2`.
//!
//! Every field in the crate lives on a [`Grid`]. Nodal storage is row-major
//! with `x1` outer and `x2` inner, so one `x2` line (fixed `x1`) is a
//! contiguous slice of length `n2`.

mod eaf1;
mod field;

pub use eaf1::{read_eaf1, write_eaf1, Eaf1Error};
pub use field::{NormReport, ScalarField, VectorField};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("channel length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("N1 must be even and at least 4, got {0}")]
    BadN1(usize),
    #[error("N2 must be at least 8, got {0}")]
    BadN2(usize),
    #[error("field size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value in field")]
    NonFinite,
}

/// Collocation geometry and precomputed differentiation / quadrature data.
pub struct Grid {
    length: f64,
    n1: usize,
    n2: usize,
    x1: Vec<f64>,
    x2: Vec<f64>,
    /// First derivative in `x2` on `[0, 1]`.
    d1: DMatrix<f64>,
    /// Second derivative in `x2`, `d1 * d1`.
    d2: DMatrix<f64>,
    /// Clenshaw-Curtis weights on `[0, 1]`.
    w2: Vec<f64>,
    /// Barycentric weights of the Lobatto nodes.
    bary: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.length)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.n1 == other.n1 && self.n2 == other.n2
    }
}

/// Builds a shared grid. `n1` Fourier points over a period `length`, `n2`
/// Chebyshev-Lobatto points mapped to `[0, 1]`.
pub fn make_grid(length: f64, n1: usize, n2: usize) -> Result<Arc<Grid>, GridError> {
    Grid::new(length, n1, n2).map(Arc::new)
}

impl Grid {
    pub fn new(length: f64, n1: usize, n2: usize) -> Result<Self, GridError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        if n1 < 4 || n1 % 2 != 0 {
            return Err(GridError::BadN1(n1));
        }
        if n2 < 8 {
            return Err(GridError::BadN2(n2));
        }
        let h1 = length / n1 as f64;
        let x1 = (0..n1).map(|i| i as f64 * h1).collect();

        let n = n2 - 1;
        let half_angles: Vec<f64> = (0..n2).map(|j| PI * j as f64 / (2.0 * n as f64)).collect();
        // x = (1 - cos theta) / 2 = sin^2(theta / 2): exact 0 and 1 at the ends.
        let x2: Vec<f64> = half_angles.iter().map(|a| a.sin().powi(2)).collect();

        let bary: Vec<f64> = (0..n2)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();

        let mut d1 = DMatrix::<f64>::zeros(n2, n2);
        for i in 0..n2 {
            let mut row_sum = 0.0;
            for j in 0..n2 {
                if i == j {
                    continue;
                }
                // x_i - x_j = sin(a_i + a_j) sin(a_i - a_j) with a = theta / 2
                let diff = (half_angles[i] + half_angles[j]).sin()
                    * (half_angles[i] - half_angles[j]).sin();
                let v = bary[j] / bary[i] / diff;
                d1[(i, j)] = v;
                row_sum += v;
            }
            d1[(i, i)] = -row_sum;
        }
        let d2 = &d1 * &d1;

        let w2 = clenshaw_curtis_unit(n2);

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n1);
        let ifft = planner.plan_fft_inverse(n1);

        Ok(Self {
            length,
            n1,
            n2,
            x1,
            x2,
            d1,
            d2,
            w2,
            bary,
            fft,
            ifft,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn x1_nodes(&self) -> &[f64] {
        &self.x1
    }
    pub fn x2_nodes(&self) -> &[f64] {
        &self.x2
    }
    pub fn h1(&self) -> f64 {
        self.length / self.n1 as f64
    }
    /// First `x2` differentiation matrix.
    pub fn diff_x2(&self) -> &DMatrix<f64> {
        &self.d1
    }
    /// Second `x2` differentiation matrix.
    pub fn diff2_x2(&self) -> &DMatrix<f64> {
        &self.d2
    }
    pub fn weights_x2(&self) -> &[f64] {
        &self.w2
    }
    pub fn bary_weights(&self) -> &[f64] {
        &self.bary
    }
    /// Quadrature weight of node `(i, j)`.
    pub fn weight(&self, j: usize) -> f64 {
        self.h1() * self.w2[j]
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    /// Number of stored Fourier modes, `n1 / 2 + 1`.
    pub fn n_modes(&self) -> usize {
        self.n1 / 2 + 1
    }

    /// Wavenumber `2 pi k / L` of mode `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// Wavenumber seen by the differentiation operators. The Nyquist mode
    /// has no consistent odd derivative on the nodes, so it is treated as
    /// `x1`-independent by every operator (and by the elliptic solvers).
    pub fn effective_wavenumber(&self, k: usize) -> f64 {
        if k == self.n1 / 2 {
            0.0
        } else {
            self.wavenumber(k)
        }
    }

    /// Local spacing around `x2` node `j` (smallest neighbouring gap).
    pub fn spacing_x2(&self, j: usize) -> f64 {
        let x = &self.x2;
        let left = if j > 0 { x[j] - x[j - 1] } else { f64::INFINITY };
        let right = if j + 1 < self.n2 { x[j + 1] - x[j] } else { f64::INFINITY };
        left.min(right)
    }

    /// Smallest `x2` gap (at the walls).
    pub fn min_spacing_x2(&self) -> f64 {
        self.x2[1] - self.x2[0]
    }

    /// Coefficients of one `x2` line in the basis `T_k(2 x2 - 1)`.
    pub fn chebyshev_coefficients(&self, line: &[f64]) -> Vec<f64> {
        let n2 = self.n2;
        debug_assert_eq!(line.len(), n2);
        let n = (n2 - 1) as f64;
        let half = |i: usize| if i == 0 || i == n2 - 1 { 0.5 } else { 1.0 };
        (0..n2)
            .map(|k| {
                let s: f64 = line
                    .iter()
                    .enumerate()
                    .map(|(j, v)| half(j) * v * (PI * (k * (n2 - 1 - j)) as f64 / n).cos())
                    .sum();
                s * 2.0 / n * half(k)
            })
            .collect()
    }

    /// Fourier coefficients along `x1`, one set per `x2` node.
    pub fn to_modes(&self, values: &[f64]) -> Modes {
        let (n1, n2, nk) = (self.n1, self.n2, self.n_modes());
        debug_assert_eq!(values.len(), n1 * n2);
        let mut data = vec![Complex64::new(0.0, 0.0); nk * n2];
        let mut buf = vec![Complex64::new(0.0, 0.0); n1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let scale = 1.0 / n1 as f64;
        for j in 0..n2 {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(values[i * n2 + j], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..nk {
                data[k * n2 + j] = buf[k] * scale;
            }
        }
        Modes { nk, n2, data }
    }

    /// Inverse of [`Grid::to_modes`] for real fields.
    pub fn from_modes(&self, modes: &Modes) -> Vec<f64> {
        let (n1, n2, nk) = (self.n1, self.n2, self.n_modes());
        let mut out = vec![0.0; n1 * n2];
        let mut buf = vec![Complex64::new(0.0, 0.0); n1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];
        let nyq = n1 / 2;
        for j in 0..n2 {
            buf[0] = Complex64::new(modes.data[j].re, 0.0);
            for k in 1..nk {
                let c = modes.data[k * n2 + j];
                if k == nyq {
                    buf[k] = Complex64::new(c.re, 0.0);
                } else {
                    buf[k] = c;
                    buf[n1 - k] = c.conj();
                }
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..n1 {
                out[i * n2 + j] = buf[i].re;
            }
        }
        out
    }

    /// `order`-th spectral derivative in `x1` of nodal values.
    pub fn dx1(&self, values: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return values.to_vec();
        }
        let mut modes = self.to_modes(values);
        let n2 = self.n2;
        for k in 0..self.n_modes() {
            let kappa = self.effective_wavenumber(k);
            let factor = Complex64::new(0.0, kappa).powu(order);
            for c in &mut modes.data[k * n2..(k + 1) * n2] {
                *c *= factor;
            }
        }
        self.from_modes(&modes)
    }

    /// `order`-th Chebyshev derivative in `x2`, applied line by line.
    pub fn dx2(&self, values: &[f64], order: u32) -> Vec<f64> {
        match order {
            0 => values.to_vec(),
            1 => self.apply_x2(&self.d1, values),
            2 => self.apply_x2(&self.d2, values),
            n => {
                let once = self.apply_x2(&self.d2, values);
                self.dx2(&once, n - 2)
            }
        }
    }

    fn apply_x2(&self, mat: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
        let n2 = self.n2;
        let mut out = vec![0.0; values.len()];
        for (line_in, line_out) in values.chunks_exact(n2).zip(out.chunks_exact_mut(n2)) {
            for (r, o) in line_out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, v) in line_in.iter().enumerate() {
                    acc += mat[(r, c)] * v;
                }
                *o = acc;
            }
        }
        out
    }

    /// Barycentric interpolation weights in `x2` at `x` (normalised, sum 1).
    pub fn interp_weights_x2(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n2);
        let mut total = 0.0;
        for (j, (&xj, &bj)) in self.x2.iter().zip(&self.bary).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[j] = 1.0;
                return;
            }
            let t = bj / d;
            out[j] = t;
            total += t;
        }
        let inv = 1.0 / total;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    /// Trigonometric (band-limited) interpolation weights in `x1` at `x`.
    /// Returns `Some(i)` instead of filling `out` when `x` sits on node `i`.
    pub fn interp_weights_x1(&self, x: f64, out: &mut [f64]) -> Option<usize> {
        let n = self.n1;
        debug_assert_eq!(out.len(), n);
        let h = self.h1();
        let s = x.rem_euclid(self.length) / h;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-13 {
            return Some((nearest as usize) % n);
        }
        // cardinal S(t) = sin(n t / 2) cot(t / 2) / n with t = 2 pi (x - x_i) / L,
        // written in the offset r from the nearest node so that points close
        // to a node keep full relative accuracy
        let r = s - nearest;
        let near = nearest as i64;
        let parity = if near % 2 == 0 { 1.0 } else { -1.0 };
        let sin_n = parity * (PI * r).sin();
        let inv_n = 1.0 / n as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            // cot has period pi: keep the angle in (-pi/2, pi/2]
            let mut k = (near - i as i64).rem_euclid(n as i64);
            if 2 * k > n as i64 {
                k -= n as i64;
            }
            let a = PI * (r + k as f64) * inv_n;
            *o = sign * sin_n / a.tan() * inv_n;
        }
        None
    }
}

/// Clenshaw-Curtis weights for `n` Lobatto points on `[0, 1]`.
fn clenshaw_curtis_unit(n_points: usize) -> Vec<f64> {
    let n = n_points - 1;
    let nf = n as f64;
    let mut w = vec![0.0; n_points];
    let theta = |k: usize| PI * k as f64 / nf;
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(idx + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    // [-1, 1] -> [0, 1]
    w.iter_mut().for_each(|x| *x *= 0.5);
    w
}

/// Per-mode complex coefficients, `k = 0 ..= n1/2`, stored `k`-major.
#[derive(Debug, Clone)]
pub struct Modes {
    pub nk: usize,
    pub n2: usize,
    pub data: Vec<Complex64>,
}

impl Modes {
    pub fn mode(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.n2..(k + 1) * self.n2]
    }
    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.n2..(k + 1) * self.n2]
    }
}

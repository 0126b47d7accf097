//! Semi-Lagrangian transport of a scalar by a frozen, divergence-free
//! velocity: `q_new(x) = q(X(x))` with `X` the backward foot of a midpoint
//! trajectory.
//!
//! Feet are evaluated with either the band-limited interpolant of the grid
//! (trigonometric in `x1`, barycentric Chebyshev in `x2`) or local cubics.
//! Two optional guards act on the result: a cell limiter that clips each
//! value to the range of its four surrounding nodes, and a norm guard that
//! keeps the discrete `L2` norm from growing. The guard first damps the top
//! third of the resolved spectrum and only then, if that is not enough,
//! contracts fluctuations about the mean.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Grid, ScalarField, VectorField};

/// Default ceiling on the local Courant number.
pub const MAX_CFL: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("CFL number {cfl:.3} exceeds the limit {limit}")]
    Cfl { cfl: f64, limit: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("non-finite velocity")]
    NonFiniteVelocity,
    #[error("non-finite transported field")]
    NonFiniteField,
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Trigonometric in `x1`, barycentric Chebyshev in `x2`.
    Spectral,
    /// Periodic cubic in `x1`, local cubic Lagrange in `x2`.
    Cubic,
}

/// What to do when a step would raise the discrete `L2` norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormGuard {
    Off,
    /// Contract fluctuations about the quadrature mean.
    Uniform,
    /// Damp the top third of Fourier and Chebyshev modes, then contract
    /// uniformly if still needed.
    HighPass,
}

#[derive(Debug, Clone)]
pub struct AdvectionScheme {
    grid: Arc<Grid>,
    pub interpolation: Interpolation,
    pub limiter: bool,
    pub norm_guard: NormGuard,
    pub max_cfl: f64,
    /// Row-major `n2 x n2` map onto the top Chebyshev modes.
    cheb_high: Arc<Vec<f64>>,
}

/// Interpolation weights on a contiguous index window along one axis
/// (wrapping modulo `n1` in `x1`).
#[derive(Debug, Clone)]
struct Axis {
    start: usize,
    len: usize,
    w: Vec<f64>,
}

impl Axis {
    fn with_capacity(n: usize) -> Self {
        Self {
            start: 0,
            len: 0,
            w: vec![0.0; n],
        }
    }
    fn node(&mut self, i: usize) {
        self.start = i;
        self.len = 1;
        self.w[0] = 1.0;
    }
}

/// Reusable per-worker buffers.
#[derive(Debug, Clone)]
pub struct Interpolant {
    a1: Axis,
    a2: Axis,
}

impl AdvectionScheme {
    /// Spectral interpolation, cell limiter on, high-pass norm guard.
    pub fn new(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            interpolation: Interpolation::Spectral,
            limiter: true,
            norm_guard: NormGuard::HighPass,
            max_cfl: MAX_CFL,
            cheb_high: Arc::new(chebyshev_high_pass(grid.n2())),
        }
    }

    pub fn with_limiter(mut self, on: bool) -> Self {
        self.limiter = on;
        self
    }

    pub fn with_interpolation(mut self, kind: Interpolation) -> Self {
        self.interpolation = kind;
        self
    }

    pub fn with_norm_guard(mut self, guard: NormGuard) -> Self {
        self.norm_guard = guard;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn interpolant(&self) -> Interpolant {
        Interpolant {
            a1: Axis::with_capacity(self.grid.n1()),
            a2: Axis::with_capacity(self.grid.n2()),
        }
    }

    /// Fills `buf` with weights for the point `(x1, x2)`; `x1` is wrapped
    /// and `x2` clamped to the channel.
    pub fn locate(&self, x1: f64, x2: f64, buf: &mut Interpolant) {
        let g = &*self.grid;
        let x1 = x1.rem_euclid(g.length());
        let x2 = x2.clamp(0.0, 1.0);
        match self.interpolation {
            Interpolation::Spectral => {
                let a1 = &mut buf.a1;
                match g.interp_weights_x1(x1, &mut a1.w) {
                    Some(i) => a1.node(i),
                    None => {
                        a1.start = 0;
                        a1.len = g.n1();
                    }
                }
                let a2 = &mut buf.a2;
                match g.x2_nodes().iter().position(|&xj| xj == x2) {
                    Some(j) => a2.node(j),
                    None => {
                        g.interp_weights_x2(x2, &mut a2.w);
                        a2.start = 0;
                        a2.len = g.n2();
                    }
                }
            }
            Interpolation::Cubic => {
                cubic_periodic(g, x1, &mut buf.a1);
                cubic_chebyshev(g, x2, &mut buf.a2);
            }
        }
    }

    /// Evaluates nodal values at the point last passed to [`Self::locate`].
    #[inline]
    pub fn apply(&self, values: &[f64], buf: &Interpolant) -> f64 {
        let g = &*self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        let a2 = &buf.a2;
        let w2 = &a2.w[..a2.len];
        let mut acc = 0.0;
        for a in 0..buf.a1.len {
            let i = (buf.a1.start + a) % n1;
            let base = i * n2 + a2.start;
            let line = &values[base..base + a2.len];
            let dot: f64 = line.iter().zip(w2).map(|(f, w)| f * w).sum();
            acc += buf.a1.w[a] * dot;
        }
        acc
    }

    /// Value of a field at an arbitrary point.
    pub fn interpolate(&self, f: &ScalarField, x1: f64, x2: f64) -> f64 {
        let mut buf = self.interpolant();
        self.locate(x1, x2, &mut buf);
        self.apply(f.values(), &buf)
    }

    /// Largest local Courant number `|u_d| dt / h_d` over nodes and directions.
    pub fn cfl(&self, u: &VectorField, dt: f64) -> f64 {
        let g = &*self.grid;
        let n2 = g.n2();
        let inv_h1 = 1.0 / g.h1();
        let inv_h2: Vec<f64> = (0..n2).map(|j| 1.0 / g.spacing_x2(j)).collect();
        let mut c = 0.0f64;
        for (l1, l2) in u.u1.values().chunks_exact(n2).zip(u.u2.values().chunks_exact(n2)) {
            for j in 0..n2 {
                c = c.max(l1[j].abs() * inv_h1).max(l2[j].abs() * inv_h2[j]);
            }
        }
        c * dt
    }

    /// Part of `q` in the top third of the `x1` spectrum or, for the rest,
    /// of the Chebyshev spectrum.
    fn high_part(&self, q: &ScalarField) -> ScalarField {
        let g = q.grid();
        let (n1, n2) = (g.n1(), g.n2());
        let mut m = q.modes();
        for k in 0..m.nk {
            if 3 * k > n1 {
                m.mode_mut(k).iter_mut().for_each(|c| *c = 0.0.into());
            }
        }
        let low = ScalarField::from_modes(g, &m);
        let mut hi = q.sub(&low);
        let p = &self.cheb_high;
        for (h, line) in hi.values_mut().chunks_exact_mut(n2).zip(low.values().chunks_exact(n2)) {
            for (j, hj) in h.iter_mut().enumerate() {
                *hj += p[j * n2..(j + 1) * n2].iter().zip(line).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        hi
    }

    /// Removes the smallest fraction of the high part that brings the norm
    /// down to `target`, or all of it when that is not enough.
    fn damp_high_modes(&self, q: &mut ScalarField, target: f64) {
        let nq = q.inner(q);
        let t2 = target * target;
        if nq <= t2 {
            return;
        }
        let h = self.high_part(q);
        let a = h.inner(&h);
        let b = q.inner(&h);
        let disc = b * b - a * (nq - t2);
        let s = if a > 0.0 && disc >= 0.0 {
            ((b - disc.sqrt()) / a).clamp(0.0, 1.0)
        } else {
            1.0
        };
        q.axpy(-s, &h);
    }

    fn check(&self, q: &ScalarField, u: &VectorField, dt: f64) -> Result<(), TransportError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TransportError::BadStep(dt));
        }
        let same = |g: &Arc<Grid>| Arc::ptr_eq(g, &self.grid) || **g == *self.grid;
        if !same(q.grid()) || !same(u.grid()) {
            return Err(TransportError::GridMismatch);
        }
        if !u.is_finite() {
            return Err(TransportError::NonFiniteVelocity);
        }
        if !q.is_finite() {
            return Err(TransportError::NonFiniteField);
        }
        let cfl = self.cfl(u, dt);
        if cfl > self.max_cfl {
            return Err(TransportError::Cfl {
                cfl,
                limit: self.max_cfl,
            });
        }
        Ok(())
    }

    /// One transport step of length `dt` with velocity `u` frozen in time.
    pub fn advect(&self, q: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField, TransportError> {
        self.check(q, u, dt)?;
        let g = &*self.grid;
        let n2 = g.n2();
        let (qv, u1, u2) = (q.values(), u.u1.values(), u.u2.values());
        let x1n = g.x1_nodes();
        let x2n = g.x2_nodes();
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(n2).enumerate().for_each_init(
            || (self.interpolant(), self.interpolant()),
            |(mid_buf, foot_buf), (i, line)| {
                let x1 = x1n[i];
                for (j, o) in line.iter_mut().enumerate() {
                    let p = i * n2 + j;
                    let x2 = x2n[j];
                    let (v1, v2) = (u1[p], u2[p]);
                    if v1 == 0.0 && v2 == 0.0 {
                        // stagnation: the midpoint and foot coincide with the node
                        *o = qv[p];
                        continue;
                    }
                    self.locate(x1 - 0.5 * dt * v1, x2 - 0.5 * dt * v2, mid_buf);
                    let m1 = self.apply(u1, mid_buf);
                    let m2 = self.apply(u2, mid_buf);
                    let f1 = x1 - dt * m1;
                    let f2 = x2 - dt * m2;
                    self.locate(f1, f2, foot_buf);
                    let mut val = self.apply(qv, foot_buf);
                    if self.limiter {
                        let (lo, hi) = self.cell_range(qv, f1, f2);
                        val = val.clamp(lo, hi);
                    }
                    *o = val;
                }
            },
        );
        let mut q_new = ScalarField::from_values(&self.grid, out).expect("grid-sized buffer");
        if !q_new.is_finite() {
            return Err(TransportError::NonFiniteField);
        }
        self.guard_norm(&mut q_new, q.l2());
        Ok(q_new)
    }

    /// Applies the configured norm guard so that `||q|| <= target`.
    pub fn guard_norm(&self, q: &mut ScalarField, target: f64) {
        match self.norm_guard {
            NormGuard::Off => {}
            // damping modes could leave the cell range, so the limiter
            // keeps the range-preserving contraction
            NormGuard::Uniform => contract_to_norm(q, target),
            NormGuard::HighPass if self.limiter => contract_to_norm(q, target),
            NormGuard::HighPass => {
                self.damp_high_modes(q, target);
                contract_to_norm(q, target);
            }
        }
    }

    /// Range of nodal values on the cell containing `(x1, x2)`.
    fn cell_range(&self, values: &[f64], x1: f64, x2: f64) -> (f64, f64) {
        let g = &*self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        let s = x1.rem_euclid(g.length()) / g.h1();
        let i0 = (s.floor() as usize) % n1;
        let i1 = (i0 + 1) % n1;
        let x2 = x2.clamp(0.0, 1.0);
        let j0 = g.x2_nodes().partition_point(|&x| x <= x2).saturating_sub(1).min(n2 - 2);
        let c = [
            values[i0 * n2 + j0],
            values[i0 * n2 + j0 + 1],
            values[i1 * n2 + j0],
            values[i1 * n2 + j0 + 1],
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Shrinks the fluctuation about the quadrature mean so that the discrete
/// `L2` norm does not exceed `target`. Values stay within their old range.
fn contract_to_norm(q: &mut ScalarField, target: f64) {
    let norm = q.l2();
    if norm <= target {
        return;
    }
    let area = q.grid().length();
    let mean = q.integral() / area;
    let fluct_sq = (norm * norm - area * mean * mean).max(0.0);
    let room = (target * target - area * mean * mean).max(0.0);
    let s = if fluct_sq > 0.0 {
        (room / fluct_sq).sqrt().min(1.0)
    } else {
        1.0
    };
    q.values_mut().iter_mut().for_each(|v| *v = mean + s * (*v - mean));
}

/// Projector onto Chebyshev modes `k >= 2 n2 / 3` in nodal space.
fn chebyshev_high_pass(n2: usize) -> Vec<f64> {
    let nn = (n2 - 1) as f64;
    let cut = (2 * n2) / 3;
    let half = |i: usize| if i == 0 || i == n2 - 1 { 0.5 } else { 1.0 };
    let cos = |a: usize, b: usize| (std::f64::consts::PI * (a * b) as f64 / nn).cos();
    let mut p = vec![0.0; n2 * n2];
    for j in 0..n2 {
        for l in 0..n2 {
            let s: f64 = (cut..n2).map(|k| half(k) * cos(j, k) * cos(l, k)).sum();
            p[j * n2 + l] = s * 2.0 / nn * half(l);
        }
    }
    p
}

fn cubic_periodic(g: &Grid, x1: f64, axis: &mut Axis) {
    let n1 = g.n1();
    let s = x1 / g.h1();
    let i0 = s.floor();
    let t = s - i0;
    if t == 0.0 {
        axis.node(i0 as usize % n1);
        return;
    }
    axis.start = (i0 as usize + n1 - 1) % n1;
    axis.len = 4;
    // nodes at -1, 0, 1, 2
    axis.w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    axis.w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    axis.w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    axis.w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

fn cubic_chebyshev(g: &Grid, x2: f64, axis: &mut Axis) {
    let nodes = g.x2_nodes();
    let n2 = nodes.len();
    if let Some(j) = nodes.iter().position(|&xj| xj == x2) {
        axis.node(j);
        return;
    }
    let j0 = nodes.partition_point(|&x| x <= x2).saturating_sub(1);
    let start = j0.saturating_sub(1).min(n2 - 4);
    axis.start = start;
    axis.len = 4;
    let xs = &nodes[start..start + 4];
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x2 - xs[b]) / (xs[a] - xs[b]);
            }
        }
        axis.w[a] = w;
    }
}

/// Free-function form of [`AdvectionScheme::advect`].
pub fn advect(
    scheme: &AdvectionScheme,
    q: &ScalarField,
    u: &VectorField,
    dt: f64,
) -> Result<ScalarField, TransportError> {
    scheme.advect(q, u, dt)
}

/// `|| advect(dt) - advect(dt/2) o advect(dt/2) ||` as a local error proxy.
pub fn step_error_estimate(
    scheme: &AdvectionScheme,
    q: &ScalarField,
    u: &VectorField,
    dt: f64,
) -> Result<f64, TransportError> {
    let full = scheme.advect(q, u, dt)?;
    let half = scheme.advect(q, u, 0.5 * dt)?;
    let two = scheme.advect(&half, u, 0.5 * dt)?;
    Ok(full.sub(&two).l2())
}

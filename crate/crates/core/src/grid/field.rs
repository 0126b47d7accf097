use std::sync::Arc;

use super::{Grid, GridError, Modes};

/// Nodal scalar field on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Pair of scalar fields sharing one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

/// Discrete norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormReport {
    pub l2: f64,
    /// `||grad f||`
    pub h1_semi: f64,
    /// Sum over multi-indices `|b| <= 3` of `||d^b f||`.
    pub h3: f64,
    pub linf: f64,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &x1 in grid.x1_nodes() {
            for &x2 in grid.x2_nodes() {
                values.push(f(x1, x2));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn modes(&self) -> Modes {
        self.grid.to_modes(&self.values)
    }

    pub fn from_modes(grid: &Arc<Grid>, modes: &Modes) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.from_modes(modes),
        }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn dx1(&self, order: u32) -> Self {
        self.with_values(self.grid.dx1(&self.values, order))
    }

    pub fn dx2(&self, order: u32) -> Self {
        self.with_values(self.grid.dx2(&self.values, order))
    }

    /// Mixed derivative `d1^a d2^b`.
    pub fn deriv(&self, a: u32, b: u32) -> Self {
        let v = self.grid.dx2(&self.values, b);
        self.with_values(self.grid.dx1(&v, a))
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.dx1(2);
        let d22 = self.grid.dx2(&self.values, 2);
        out.values.iter_mut().zip(d22).for_each(|(a, b)| *a += b);
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid);
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Self) {
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(x, y)| *x += c * y);
    }

    /// Quadrature inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let w = g.weights_x2();
        let mut acc = 0.0;
        for (a, b) in self.values.chunks_exact(n2).zip(other.values.chunks_exact(n2)) {
            for j in 0..n2 {
                acc += w[j] * a[j] * b[j];
            }
        }
        acc * g.h1()
    }

    /// Quadrature integral over the channel.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let w = g.weights_x2();
        let mut acc = 0.0;
        for line in self.values.chunks_exact(n2) {
            for j in 0..n2 {
                acc += w[j] * line[j];
            }
        }
        acc * g.h1()
    }

    pub fn l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute value on the two walls.
    pub fn wall_max(&self) -> f64 {
        let n2 = self.grid.n2();
        self.values
            .chunks_exact(n2)
            .fold(0.0, |m, line| m.max(line[0].abs()).max(line[n2 - 1].abs()))
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            u1: self.dx1(1),
            u2: self.dx2(1),
        }
    }

    /// `(-d2 f, d1 f)`
    pub fn perp_gradient(&self) -> VectorField {
        VectorField {
            u1: self.dx2(1).scale(-1.0),
            u2: self.dx1(1),
        }
    }

    pub fn h1_semi(&self) -> f64 {
        let g = self.gradient();
        (g.u1.inner(&g.u1) + g.u2.inner(&g.u2)).max(0.0).sqrt()
    }

    pub fn norms(&self) -> NormReport {
        let mut h3 = 0.0;
        let mut h1_sq = 0.0;
        // d2 derivatives first, then x1 derivatives of each
        let mut along2 = self.clone();
        for b in 0..=3u32 {
            if b > 0 {
                along2 = along2.dx2(1);
            }
            let mut cur = along2.clone();
            for a in 0..=(3 - b) {
                if a > 0 {
                    cur = cur.dx1(1);
                }
                let n = cur.l2();
                h3 += n;
                if a + b == 1 {
                    h1_sq += n * n;
                }
            }
        }
        NormReport {
            l2: self.l2(),
            h1_semi: h1_sq.sqrt(),
            h3,
            linf: self.linf(),
        }
    }
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Self {
        Self { u1, u2 }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            u1: ScalarField::zeros(grid),
            u2: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(
        grid: &Arc<Grid>,
        f1: impl Fn(f64, f64) -> f64,
        f2: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            u1: ScalarField::from_fn(grid, f1),
            u2: ScalarField::from_fn(grid, f2),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u1.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }

    /// `d1 u2 - d2 u1`
    pub fn curl(&self) -> ScalarField {
        self.u2.dx1(1).sub(&self.u1.dx2(1))
    }

    pub fn divergence(&self) -> ScalarField {
        self.u1.dx1(1).add(&self.u2.dx2(1))
    }

    pub fn laplacian(&self) -> Self {
        Self {
            u1: self.u1.laplacian(),
            u2: self.u2.laplacian(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            u1: self.u1.scale(c),
            u2: self.u2.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            u1: self.u1.combine(a, &other.u1, b),
            u2: self.u2.combine(a, &other.u2, b),
        }
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        self.u1.axpy(c, &other.u1);
        self.u2.axpy(c, &other.u2);
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.u1.inner(&other.u1) + self.u2.inner(&other.u2)
    }

    pub fn l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// `||grad u||` (Frobenius).
    pub fn h1_semi(&self) -> f64 {
        (self.u1.h1_semi().powi(2) + self.u2.h1_semi().powi(2)).sqrt()
    }

    /// Full `H^1` norm `sqrt(||u||^2 + ||grad u||^2)`.
    pub fn h1(&self) -> f64 {
        (self.inner(self) + self.u1.h1_semi().powi(2) + self.u2.h1_semi().powi(2))
            .max(0.0)
            .sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.u1
            .values()
            .iter()
            .zip(self.u2.values())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn wall_max(&self) -> f64 {
        self.u1.wall_max().max(self.u2.wall_max())
    }

    pub fn norms(&self) -> NormReport {
        let a = self.u1.norms();
        let b = self.u2.norms();
        NormReport {
            l2: a.l2.hypot(b.l2),
            h1_semi: a.h1_semi.hypot(b.h1_semi),
            h3: a.h3.hypot(b.h3),
            linf: self.linf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gradient_examples() {
        let g = make_grid(2.0, 16, 24).unwrap();
        let kap = 2.0 * PI / 2.0;
        let c = ScalarField::constant(&g, 4.0).gradient();
        assert!(c.u1.linf() < 1e-12 && c.u2.linf() < 1e-11);

        let f = ScalarField::from_fn(&g, |x1, _| (kap * x1).sin()).gradient();
        let e1 = ScalarField::from_fn(&g, |x1, _| kap * (kap * x1).cos());
        assert!(f.u1.sub(&e1).linf() < 1e-10);
        assert!(f.u2.linf() < 1e-10);

        let f = ScalarField::from_fn(&g, |_, x2| x2.powi(3)).gradient();
        let e2 = ScalarField::from_fn(&g, |_, x2| 3.0 * x2 * x2);
        assert!(f.u1.linf() < 1e-10);
        assert!(f.u2.sub(&e2).linf() < 1e-9);
    }

    #[test]
    fn perp_gradient_of_clamped_quartic() {
        let g = make_grid(1.0, 8, 20).unwrap();
        let u = ScalarField::from_fn(&g, |_, y| y * y * (1.0 - y).powi(2)).perp_gradient();
        let e = ScalarField::from_fn(&g, |_, y| -2.0 * y * (1.0 - y) * (1.0 - 2.0 * y));
        assert!(u.u1.sub(&e).linf() < 1e-9);
        assert!(u.u2.linf() < 1e-12);
    }

    #[test]
    fn curl_examples() {
        let l = 2.0;
        let g = make_grid(l, 16, 32).unwrap();
        assert_eq!(VectorField::zeros(&g).curl().linf(), 0.0);
        let u = VectorField::from_fn(&g, |_, y| (PI * y).sin(), |_, _| 0.0);
        let e = ScalarField::from_fn(&g, |_, y| -PI * (PI * y).cos());
        assert!(u.curl().sub(&e).linf() < 1e-9);

        let k = 2.0 * PI / l;
        let psi = ScalarField::from_fn(&g, |x, y| (k * x).sin() * (PI * y).sin());
        let c = psi.perp_gradient().curl();
        let e = psi.scale(-(k * k + PI * PI));
        assert!(c.sub(&e).linf() < 1e-8);
    }

    #[test]
    fn norms_of_sine_profile() {
        let g = make_grid(1.0, 8, 41).unwrap();
        let zero = ScalarField::zeros(&g).norms();
        assert_eq!(zero, NormReport::default());
        let f = ScalarField::from_fn(&g, |_, y| (PI * y).sin());
        let n = f.norms();
        assert!(rel(n.l2, 0.5f64.sqrt()) < 1e-9);
        assert!(rel(n.h1_semi, PI * 0.5f64.sqrt()) < 1e-8);
        // x1-independent: h3 is the sum of ||d2^b f|| = pi^b / sqrt 2
        let h3 = (0..4).map(|b| PI.powi(b) / 2f64.sqrt()).sum::<f64>();
        assert!(rel(n.h3, h3) < 1e-7);
        assert!(rel(n.linf, 1.0) < 1e-12);
    }

    #[test]
    fn mean_free_mode_quadrature() {
        let l = 3.0;
        let g = make_grid(l, 12, 24).unwrap();
        let gy = |y: f64| (1.0 + y) * (-y).exp();
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * PI * 2.0 * x / l).sin() * gy(y));
        let line: f64 = g
            .x2_nodes()
            .iter()
            .zip(g.weights_x2())
            .map(|(y, w)| w * gy(*y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(rel(f.l2(), (l / 2.0).sqrt() * line) < 1e-10);
    }

    #[test]
    fn wall_max_and_extremes() {
        let g = make_grid(1.0, 4, 8).unwrap();
        let f = ScalarField::from_fn(&g, |_, y| y - 0.25);
        assert_eq!(f.wall_max(), 0.75);
        assert_eq!(f.max(), 0.75);
        assert_eq!(f.min(), -0.25);
    }
}

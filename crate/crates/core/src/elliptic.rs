//! Stream-function solvers, factored per Fourier mode.
//!
//! * [`AlphaEllipticSolver`] inverts `D phi - a^2 D^2 phi = q` with clamped
//!   walls (`phi = d phi / d x2 = 0`): the Biot-Savart-alpha map.
//! * [`EulerStreamSolver`] inverts `D psi = w` with `psi = 0` on the walls.
//!
//! Boundary conditions replace the wall-adjacent collocation rows. The
//! channel is periodic in `x1`, so the stream function may take different
//! constant values on the two walls; that difference (the wall jump, equal to
//! minus the mean volume flux) is a conserved quantity of both systems and is
//! carried separately through [`StreamSolver::stream`]. The classical clamped
//! / Dirichlet problems are the zero-jump case.

use std::sync::Arc;

use nalgebra::{DMatrix, Dyn, LU};
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::grid::{Grid, ScalarField, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("singular per-mode system at Fourier mode {mode}")]
    SingularMode { mode: usize },
    #[error("right-hand side lives on a different grid")]
    GridMismatch,
    #[error("non-finite right-hand side")]
    NonFinite,
}

/// Common interface of the two stream-function solvers.
pub trait StreamSolver: Send + Sync {
    fn grid(&self) -> &Arc<Grid>;

    /// Regularisation length; `0` for the Euler solver.
    fn alpha(&self) -> f64;

    /// Stream function with `psi = 0` on `x2 = 0` and `psi = wall_jump` on
    /// `x2 = 1`.
    fn stream(&self, source: &ScalarField, wall_jump: f64) -> Result<ScalarField, EllipticError>;

    /// Left-hand operator applied to a stream function.
    fn apply_forward(&self, phi: &ScalarField) -> ScalarField;

    fn velocity(&self, source: &ScalarField, wall_jump: f64) -> Result<VectorField, EllipticError> {
        Ok(self.stream(source, wall_jump)?.perp_gradient())
    }
}

/// `curl(u - a^2 D u)`: potential vorticity for `a > 0`, vorticity for `a = 0`.
pub fn potential_vorticity(u: &VectorField, alpha: f64) -> ScalarField {
    if alpha == 0.0 {
        return u.curl();
    }
    let v = u.combine(1.0, &u.laplacian(), -alpha * alpha);
    v.curl()
}

/// `psi(x2 = 1) - psi(x2 = 0)` for a velocity `u = perp grad psi`.
pub fn wall_jump_of(u: &VectorField) -> f64 {
    -u.u1.integral() / u.grid().length()
}

struct ModeFactors {
    lus: Vec<LU<f64, Dyn, Dyn>>,
    /// Row equilibration factors, one vector per mode.
    row_scale: Vec<Vec<f64>>,
    /// `x1`-independent homogeneous solution with unit wall jump.
    jump_profile: Vec<f64>,
}

fn check_source(grid: &Arc<Grid>, source: &ScalarField) -> Result<(), EllipticError> {
    if !(Arc::ptr_eq(grid, source.grid()) || **grid == **source.grid()) {
        return Err(EllipticError::GridMismatch);
    }
    if !source.is_finite() {
        return Err(EllipticError::NonFinite);
    }
    Ok(())
}

fn factor_modes(
    grid: &Grid,
    mut assemble: impl FnMut(f64) -> DMatrix<f64>,
    top_row: usize,
) -> Result<ModeFactors, EllipticError> {
    let mut lus = Vec::with_capacity(grid.n_modes());
    let mut row_scale = Vec::with_capacity(grid.n_modes());
    for k in 0..grid.n_modes() {
        let mut m = assemble(grid.effective_wavenumber(k));
        // boundary rows are O(1) while the fourth-order rows are huge
        let scale: Vec<f64> = m.row_iter().map(|r| 1.0 / r.amax()).collect();
        for (mut r, s) in m.row_iter_mut().zip(&scale) {
            r *= *s;
        }
        row_scale.push(scale);
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(EllipticError::SingularMode { mode: k });
        }
        lus.push(lu);
    }
    let n2 = grid.n2();
    let mut rhs = DMatrix::<f64>::zeros(n2, 1);
    rhs[(top_row, 0)] = row_scale[0][top_row];
    let jump_profile = lus[0]
        .solve(&rhs)
        .ok_or(EllipticError::SingularMode { mode: 0 })?
        .column(0)
        .iter()
        .copied()
        .collect();
    Ok(ModeFactors {
        lus,
        row_scale,
        jump_profile,
    })
}

/// Solves every mode with the right-hand side placed on `interior` rows
/// and zeros on the boundary rows.
fn solve_modes(
    grid: &Arc<Grid>,
    factors: &ModeFactors,
    source: &ScalarField,
    interior: std::ops::Range<usize>,
    wall_jump: f64,
) -> Result<ScalarField, EllipticError> {
    let n2 = grid.n2();
    let mut modes = source.modes();
    let mut rhs = DMatrix::<f64>::zeros(n2, 2);
    let nyquist = grid.n1() / 2;
    for (k, lu) in factors.lus.iter().enumerate() {
        if k == nyquist {
            // unresolved: the odd x1 derivatives of this mode vanish on the nodes
            modes.mode_mut(k).fill(Complex64::new(0.0, 0.0));
            continue;
        }
        rhs.fill(0.0);
        {
            let m = modes.mode(k);
            let scale = &factors.row_scale[k];
            for j in interior.clone() {
                rhs[(j, 0)] = m[j].re * scale[j];
                rhs[(j, 1)] = m[j].im * scale[j];
            }
        }
        let sol = lu.solve(&rhs).ok_or(EllipticError::SingularMode { mode: k })?;
        for (j, c) in modes.mode_mut(k).iter_mut().enumerate() {
            *c = Complex64::new(sol[(j, 0)], sol[(j, 1)]);
        }
    }
    let mut phi = ScalarField::from_modes(grid, &modes);
    if wall_jump != 0.0 {
        for line in phi.values_mut().chunks_exact_mut(n2) {
            for (v, t) in line.iter_mut().zip(&factors.jump_profile) {
                *v += wall_jump * t;
            }
        }
    }
    Ok(phi)
}

/// Clamped fourth-order solver for `D phi - a^2 D^2 phi = q`.
pub struct AlphaEllipticSolver {
    grid: Arc<Grid>,
    alpha: f64,
    factors: ModeFactors,
}

impl std::fmt::Debug for AlphaEllipticSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlphaEllipticSolver")
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl AlphaEllipticSolver {
    pub fn new(grid: &Arc<Grid>, alpha: f64) -> Result<Self, EllipticError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(EllipticError::BadAlpha(alpha));
        }
        let n2 = grid.n2();
        let d1 = grid.diff_x2();
        let d2 = grid.diff2_x2();
        let a2 = alpha * alpha;
        let factors = factor_modes(
            grid,
            |kappa| {
                let mut lap = d2.clone();
                for j in 0..n2 {
                    lap[(j, j)] -= kappa * kappa;
                }
                let mut m = &lap - (&lap * &lap) * a2;
                m.row_mut(0).fill(0.0);
                m[(0, 0)] = 1.0;
                m.row_mut(1).copy_from(&d1.row(0));
                m.row_mut(n2 - 2).copy_from(&d1.row(n2 - 1));
                m.row_mut(n2 - 1).fill(0.0);
                m[(n2 - 1, n2 - 1)] = 1.0;
                m
            },
            n2 - 1,
        )?;
        Ok(Self {
            grid: grid.clone(),
            alpha,
            factors,
        })
    }
}

impl StreamSolver for AlphaEllipticSolver {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn stream(&self, source: &ScalarField, wall_jump: f64) -> Result<ScalarField, EllipticError> {
        check_source(&self.grid, source)?;
        let n2 = self.grid.n2();
        solve_modes(&self.grid, &self.factors, source, 2..n2 - 2, wall_jump)
    }

    fn apply_forward(&self, phi: &ScalarField) -> ScalarField {
        let lap = phi.laplacian();
        lap.combine(1.0, &lap.laplacian(), -self.alpha * self.alpha)
    }
}

/// Dirichlet Poisson solver for the Euler stream function.
pub struct EulerStreamSolver {
    grid: Arc<Grid>,
    factors: ModeFactors,
}

impl std::fmt::Debug for EulerStreamSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EulerStreamSolver").field("grid", &self.grid).finish()
    }
}

impl EulerStreamSolver {
    pub fn new(grid: &Arc<Grid>) -> Result<Self, EllipticError> {
        let n2 = grid.n2();
        let d2 = grid.diff2_x2();
        let factors = factor_modes(
            grid,
            |kappa| {
                let mut m = d2.clone();
                for j in 0..n2 {
                    m[(j, j)] -= kappa * kappa;
                }
                m.row_mut(0).fill(0.0);
                m[(0, 0)] = 1.0;
                m.row_mut(n2 - 1).fill(0.0);
                m[(n2 - 1, n2 - 1)] = 1.0;
                m
            },
            n2 - 1,
        )?;
        Ok(Self {
            grid: grid.clone(),
            factors,
        })
    }
}

impl StreamSolver for EulerStreamSolver {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        0.0
    }

    fn stream(&self, source: &ScalarField, wall_jump: f64) -> Result<ScalarField, EllipticError> {
        check_source(&self.grid, source)?;
        let n2 = self.grid.n2();
        solve_modes(&self.grid, &self.factors, source, 1..n2 - 1, wall_jump)
    }

    fn apply_forward(&self, phi: &ScalarField) -> ScalarField {
        phi.laplacian()
    }
}

/// Biot-Savart-alpha map `q -> (phi, perp grad phi)` with fully clamped walls.
pub fn biot_savart_alpha(
    solver: &AlphaEllipticSolver,
    q: &ScalarField,
) -> Result<(ScalarField, VectorField), EllipticError> {
    let phi = solver.stream(q, 0.0)?;
    let u = phi.perp_gradient();
    Ok((phi, u))
}

/// Euler stream function and velocity from vorticity, `psi = 0` on both walls.
pub fn euler_stream(
    solver: &EulerStreamSolver,
    omega: &ScalarField,
) -> Result<(ScalarField, VectorField), EllipticError> {
    let psi = solver.stream(omega, 0.0)?;
    let u = psi.perp_gradient();
    Ok((psi, u))
}

/// `D phi - a^2 D^2 phi` with the solver's `a`.
pub fn apply_forward(solver: &AlphaEllipticSolver, phi: &ScalarField) -> ScalarField {
    StreamSolver::apply_forward(solver, phi)
}

//! Parallel flows `u = (phi(x2), 0)`: stationary for every alpha, with
//! pressure `p = -(phi^2 - a^2 phi'^2) / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use super::ExperimentError;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::stepper::{integrate, Dynamics, IntegrateOptions, StepConfig, Trajectory};

/// Relative size of the top third of the `phi''` spectrum above which the
/// profile is flagged as under-resolved or not C2.
pub const TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `sin(pi x2)`.
    Sin,
    /// `x2 (1 - x2)`.
    Poiseuille,
    Zero,
    /// `1/2 - |x2 - 1/2|`, continuous but with a kink.
    Kink,
}

impl Profile {
    pub fn phi(self, x2: f64) -> f64 {
        match self {
            Self::Sin => (PI * x2).sin(),
            Self::Poiseuille => x2 * (1.0 - x2),
            Self::Zero => 0.0,
            Self::Kink => 0.5 - (x2 - 0.5).abs(),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sin" => Ok(Self::Sin),
            "poiseuille" => Ok(Self::Poiseuille),
            "zero" => Ok(Self::Zero),
            "kink" => Ok(Self::Kink),
            _ => Err(format!("unknown profile `{s}` (sin, poiseuille, zero, kink)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParallelFlowCase {
    pub profile: Profile,
    pub alpha: f64,
    grid: Arc<Grid>,
    pub phi: ScalarField,
    pub pressure: ScalarField,
}

impl ParallelFlowCase {
    pub fn new(profile: Profile, alpha: f64, grid: &Arc<Grid>) -> Result<Self, ExperimentError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(ExperimentError::Config(format!("alpha must be nonnegative, got {alpha}")));
        }
        let phi = ScalarField::from_fn(grid, |_, y| profile.phi(y));
        let wall = phi.wall_max();
        if wall > 1e-12 {
            return Err(ExperimentError::Config(format!("profile reaches {wall:e} on the walls")));
        }
        let mut case = Self {
            profile,
            alpha,
            grid: grid.clone(),
            phi,
            pressure: ScalarField::zeros(grid),
        };
        case.pressure = reconstruct_parallel_pressure(&case);
        Ok(case)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn velocity(&self) -> VectorField {
        VectorField::new(self.phi.clone(), ScalarField::zeros(&self.grid))
    }
}

/// `p = -(phi^2 - a^2 phi'^2) / 2` with a spectral `phi'`.
pub fn reconstruct_parallel_pressure(case: &ParallelFlowCase) -> ScalarField {
    let d = case.phi.dx2(1);
    let a2 = case.alpha * case.alpha;
    let vals = case
        .phi
        .values()
        .iter()
        .zip(d.values())
        .map(|(p, dp)| -0.5 * (p * p - a2 * dp * dp))
        .collect();
    ScalarField::from_values(&case.grid, vals).expect("grid sized")
}

#[derive(Debug, Clone)]
pub struct ParallelReport {
    /// `max_n ||u(t_n) - u(0)|| / ||u(0)||`, absolute when `u(0) = 0`.
    pub stationarity: f64,
    /// `L2` norm of `u . grad v + sum_j v_j grad u_j + grad p`.
    pub residual_l2: f64,
    /// Relative weight of the top third of the Chebyshev spectrum of `phi''`.
    pub tail: f64,
    pub smooth: bool,
    pub pressure: ScalarField,
    pub trajectory: Trajectory,
}

impl ParallelReport {
    pub fn summary(&self) -> String {
        format!(
            "stationarity {:e}\nresidual_L2 {:e}\nspectral_tail {:e}\nsmooth {}\n",
            self.stationarity, self.residual_l2, self.tail, self.smooth
        )
    }
}

fn steady_residual(u: &VectorField, alpha: f64, p: &ScalarField) -> f64 {
    let v = u.combine(1.0, &u.laplacian(), -alpha * alpha);
    let grad = |f: &ScalarField| [f.dx1(1), f.dx2(1)];
    let gu = [grad(&u.u1), grad(&u.u2)];
    let gv = [grad(&v.u1), grad(&v.u2)];
    let gp = grad(p);
    let uc = [u.u1.values(), u.u2.values()];
    let vc = [v.u1.values(), v.u2.values()];
    let mut comps = Vec::with_capacity(2);
    for i in 0..2 {
        let mut r = gp[i].values().to_vec();
        for (n, ri) in r.iter_mut().enumerate() {
            for j in 0..2 {
                *ri += uc[j][n] * gv[i][j].values()[n] + vc[j][n] * gu[j][i].values()[n];
            }
        }
        comps.push(ScalarField::from_values(u.grid(), r).expect("grid sized"));
    }
    let [r1, r2]: [ScalarField; 2] = comps.try_into().expect("two components");
    VectorField::new(r1, r2).l2()
}

fn spectral_tail(phi: &ScalarField) -> f64 {
    let g = phi.grid();
    let n2 = g.n2();
    let c = g.chebyshev_coefficients(&phi.dx2(2).values()[..n2]);
    let top = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    c[(2 * n2) / 3..].iter().map(|v| v.abs()).fold(0.0, f64::max) / top
}

/// Integrates the parallel flow to `t_end` and evaluates the steady momentum
/// residual with the closed-form pressure.
pub fn parallel_flow_verify(
    case: &ParallelFlowCase,
    t_end: f64,
    step: &StepConfig,
) -> Result<ParallelReport, ExperimentError> {
    let tail = spectral_tail(&case.phi);
    let smooth = tail <= TAIL_TOL;
    if !smooth {
        log::warn!("profile spectrum tail {tail:.2e}: not resolved as a C2 function on this grid");
    }
    let u0 = case.velocity();
    let residual_l2 = steady_residual(&u0, case.alpha, &case.pressure);
    let dynamics = Dynamics::new(&case.grid, case.alpha)?;
    let state = dynamics.initial_state(&u0)?;
    let stride = (((t_end / step.dt).ceil() as usize) / 50).max(1);
    let trajectory = integrate(&state, t_end, step, &dynamics, &IntegrateOptions::every(stride))?;
    let s0 = &trajectory.samples[0].u;
    let n0 = s0.l2();
    let scale = if n0 > 0.0 { n0 } else { 1.0 };
    let stationarity = trajectory
        .samples
        .iter()
        .map(|s| s.u.sub(s0).l2() / scale)
        .fold(0.0, f64::max);
    Ok(ParallelReport {
        stationarity,
        residual_l2,
        tail,
        smooth,
        pressure: case.pressure.clone(),
        trajectory,
    })
}

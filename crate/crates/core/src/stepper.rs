//! Time stepping by the frozen-velocity fixed point: transport `q` with a
//! guessed velocity, reconstruct the velocity from the transported `q`, and
//! iterate until successive reconstructions agree in `H1`.
//!
//! The same code advances Euler (`alpha = 0`, vorticity and Dirichlet stream
//! function) and Euler-alpha (`alpha > 0`, potential vorticity and clamped
//! stream function); only the [`StreamSolver`] differs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::elliptic::{
    potential_vorticity, wall_jump_of, AlphaEllipticSolver, EllipticError, EulerStreamSolver, StreamSolver,
};
use crate::grid::{write_eaf1, Eaf1Error, Grid, ScalarField, VectorField};
use crate::transport::{AdvectionScheme, NormGuard, TransportError};

#[derive(Debug, Error)]
pub enum StepError {
    #[error("invalid step configuration: {0}")]
    Config(String),
    #[error("compute_v needs alpha > 0")]
    AlphaZero,
    #[error("fixed point did not converge in {iters} iterations (last H1 change {change:.3e}, tolerance {tol:.3e})")]
    NoConvergence { iters: usize, change: f64, tol: f64 },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("step failed at t = {t}: {source}")]
    FailedAt {
        t: f64,
        #[source]
        source: Box<StepError>,
    },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing checkpoint: {0}")]
    Checkpoint(#[from] Eaf1Error),
}

/// A time slice `(t, alpha, q, u)`. `wall_jump` is the stream-function
/// difference between the walls, fixed by the initial data.
#[derive(Debug, Clone)]
pub struct AlphaState {
    pub t: f64,
    pub alpha: f64,
    pub q: ScalarField,
    pub u: VectorField,
    pub wall_jump: f64,
}

impl AlphaState {
    /// State at time 0 whose velocity is the reconstruction of `curl(u - a^2 D u)`.
    pub fn from_velocity(u: &VectorField, solver: &dyn StreamSolver) -> Result<Self, StepError> {
        let alpha = solver.alpha();
        let q = potential_vorticity(u, alpha);
        let wall_jump = wall_jump_of(u);
        Self::from_q(q, wall_jump, solver)
    }

    pub fn from_q(q: ScalarField, wall_jump: f64, solver: &dyn StreamSolver) -> Result<Self, StepError> {
        let u = solver.velocity(&q, wall_jump)?;
        Ok(Self {
            t: 0.0,
            alpha: solver.alpha(),
            q,
            u,
            wall_jump,
        })
    }

    pub fn zeros(grid: &Arc<Grid>, alpha: f64) -> Self {
        Self {
            t: 0.0,
            alpha,
            q: ScalarField::zeros(grid),
            u: VectorField::zeros(grid),
            wall_jump: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.q.grid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Absolute `H1` tolerance; `None` means `1e-10 * (1 + |u|_H1)`.
    pub picard_tol: Option<f64>,
    pub picard_max_iter: usize,
    /// Cell limiter in the transport step. Off by default: clipping smooth
    /// extrema every step costs far more energy than the scheme's own error.
    pub limiter: bool,
    /// Weight of the new midpoint velocity in the frozen-velocity update.
    pub relaxation: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            picard_tol: None,
            picard_max_iter: 50,
            limiter: false,
            relaxation: 1.0,
        }
    }
}

impl StepConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(StepError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(tol) = self.picard_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(StepError::Config(format!("picard_tol must be positive, got {tol}")));
            }
        }
        if self.picard_max_iter < 2 {
            return Err(StepError::Config("picard_max_iter must be at least 2".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(StepError::Config(format!("relaxation must lie in (0, 1], got {}", self.relaxation)));
        }
        Ok(())
    }

    fn tolerance(&self, u: &VectorField) -> f64 {
        self.picard_tol.unwrap_or_else(|| 1e-10 * (1.0 + u.h1()))
    }
}

/// Stream solver and transport scheme for one value of `alpha`.
#[derive(Clone)]
pub struct Dynamics {
    pub solver: Arc<dyn StreamSolver>,
    pub scheme: AdvectionScheme,
}

impl std::fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dynamics")
            .field("alpha", &self.solver.alpha())
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl Dynamics {
    /// Euler for `alpha = 0`, Euler-alpha otherwise.
    pub fn new(grid: &Arc<Grid>, alpha: f64) -> Result<Self, StepError> {
        let solver: Arc<dyn StreamSolver> = if alpha == 0.0 {
            Arc::new(EulerStreamSolver::new(grid)?)
        } else {
            Arc::new(AlphaEllipticSolver::new(grid, alpha)?)
        };
        Ok(Self {
            solver,
            scheme: AdvectionScheme::new(grid),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.solver.alpha()
    }

    pub fn initial_state(&self, u0: &VectorField) -> Result<AlphaState, StepError> {
        AlphaState::from_velocity(u0, &*self.solver)
    }
}

/// `v = u - a^2 D u`.
pub fn compute_v(state: &AlphaState) -> Result<VectorField, StepError> {
    if state.alpha == 0.0 {
        return Err(StepError::AlphaZero);
    }
    Ok(state.u.combine(1.0, &state.u.laplacian(), -state.alpha * state.alpha))
}

/// `|u|^2 + a^2 |grad u|^2`.
pub fn alpha_energy(state: &AlphaState) -> f64 {
    let l2 = state.u.l2();
    let h1 = state.u.h1_semi();
    l2 * l2 + state.alpha * state.alpha * h1 * h1
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: AlphaState,
    pub picard_iters: usize,
    pub change: f64,
}

/// Advances `state` by `cfg.dt`.
pub fn picard_step(
    state: &AlphaState,
    cfg: &StepConfig,
    solver: &dyn StreamSolver,
    scheme: &AdvectionScheme,
) -> Result<Step, StepError> {
    cfg.validate()?;
    let scheme = scheme.clone().with_limiter(cfg.limiter);
    // the norm guard acts once, on the converged iterate, so the iterated
    // map stays smooth
    let inner = scheme.clone().with_norm_guard(NormGuard::Off);
    let dt = cfg.dt;
    let tol = cfg.tolerance(&state.u);
    let mut frozen = state.u.clone();
    let mut prev: Option<VectorField> = None;
    let mut change = f64::INFINITY;
    for iter in 1..=cfg.picard_max_iter {
        let mut q_new = inner.advect(&state.q, &frozen, dt)?;
        let mut u_new = solver.velocity(&q_new, state.wall_jump)?;
        if let Some(p) = &prev {
            change = u_new.sub(p).h1();
            if change < tol {
                let before = q_new.l2();
                scheme.guard_norm(&mut q_new, state.q.l2());
                if q_new.l2() != before {
                    u_new = solver.velocity(&q_new, state.wall_jump)?;
                }
                return Ok(Step {
                    state: AlphaState {
                        t: state.t + dt,
                        alpha: state.alpha,
                        q: q_new,
                        u: u_new,
                        wall_jump: state.wall_jump,
                    },
                    picard_iters: iter,
                    change,
                });
            }
        }
        let mid = state.u.combine(0.5, &u_new, 0.5);
        frozen = frozen.combine(1.0 - cfg.relaxation, &mid, cfg.relaxation);
        prev = Some(u_new);
    }
    Err(StepError::NoConvergence {
        iters: cfg.picard_max_iter,
        change,
        tol,
    })
}

/// Per-step diagnostics; `h1_u` is the seminorm `|grad u|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub t: f64,
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_q: f64,
    pub energy: f64,
    pub picard_iters: usize,
}

impl Monitor {
    pub fn of(state: &AlphaState, picard_iters: usize) -> Self {
        Self {
            t: state.t,
            l2_u: state.u.l2(),
            h1_u: state.u.h1_semi(),
            l2_q: state.q.l2(),
            energy: alpha_energy(state),
            picard_iters,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IntegrateOptions {
    /// Keep every `stride`-th step (the initial and final states are always kept).
    pub stride: usize,
    /// Directory for `monitors.csv` and EAF1 checkpoints of the kept states.
    pub out_dir: Option<PathBuf>,
    /// Maximum number of step halvings when a step fails.
    pub max_halvings: usize,
}

impl IntegrateOptions {
    pub fn every(stride: usize) -> Self {
        Self {
            stride,
            out_dir: None,
            max_halvings: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<AlphaState>,
    pub monitors: Vec<Monitor>,
    /// Steps that needed to be split after a failure.
    pub halvings: usize,
}

impl Trajectory {
    pub fn last(&self) -> &AlphaState {
        self.samples.last().expect("trajectory holds the initial state")
    }
}

fn step_with_halving(
    state: &AlphaState,
    dt: f64,
    cfg: &StepConfig,
    dynamics: &Dynamics,
    depth: usize,
    halvings: &mut usize,
) -> Result<Step, StepError> {
    let trial = StepConfig { dt, ..cfg.clone() };
    match picard_step(state, &trial, &*dynamics.solver, &dynamics.scheme) {
        Ok(s) => Ok(s),
        Err(e @ (StepError::NoConvergence { .. } | StepError::Transport(TransportError::Cfl { .. })))
            if depth > 0 =>
        {
            log::warn!("step at t = {} with dt = {dt} failed ({e}); halving", state.t);
            *halvings += 1;
            let a = step_with_halving(state, 0.5 * dt, cfg, dynamics, depth - 1, halvings)?;
            let b = step_with_halving(&a.state, 0.5 * dt, cfg, dynamics, depth - 1, halvings)?;
            Ok(Step {
                picard_iters: a.picard_iters + b.picard_iters,
                ..b
            })
        }
        Err(e) => Err(e),
    }
}

/// Repeated [`picard_step`] from `state0` to `t_end` (the last step is
/// shortened to land on `t_end`).
pub fn integrate(
    state0: &AlphaState,
    t_end: f64,
    cfg: &StepConfig,
    dynamics: &Dynamics,
    opts: &IntegrateOptions,
) -> Result<Trajectory, StepError> {
    cfg.validate()?;
    if !(t_end.is_finite() && t_end >= state0.t) {
        return Err(StepError::Config(format!("final time {t_end} precedes the start {}", state0.t)));
    }
    let stride = opts.stride.max(1);
    let mut traj = Trajectory {
        samples: vec![state0.clone()],
        monitors: vec![Monitor::of(state0, 0)],
        halvings: 0,
    };
    let span = t_end - state0.t;
    let n_steps = if span == 0.0 {
        0
    } else {
        ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize
    };
    let mut state = state0.clone();
    for n in 1..=n_steps {
        let t_next = if n == n_steps {
            t_end
        } else {
            state0.t + n as f64 * cfg.dt
        };
        let dt = t_next - state.t;
        let step = step_with_halving(&state, dt, cfg, dynamics, opts.max_halvings, &mut traj.halvings).map_err(
            |e| StepError::FailedAt {
                t: state.t,
                source: Box::new(e),
            },
        )?;
        state = step.state;
        state.t = t_next;
        traj.monitors.push(Monitor::of(&state, step.picard_iters));
        if n % stride == 0 || n == n_steps {
            traj.samples.push(state.clone());
        }
    }
    if let Some(dir) = &opts.out_dir {
        write_trajectory(dir, &traj)?;
    }
    Ok(traj)
}

pub fn monitors_csv(monitors: &[Monitor]) -> String {
    let mut s = String::from("t,l2_u,h1_u,l2_q,energy,picard_iters\n");
    for m in monitors {
        let _ = writeln!(s, "{},{},{},{},{},{}", m.t, m.l2_u, m.h1_u, m.l2_q, m.energy, m.picard_iters);
    }
    s
}

/// `monitors.csv` plus `q_NNNN.eaf1`, `u1_NNNN.eaf1`, `u2_NNNN.eaf1` per kept sample.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<(), StepError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("monitors.csv"), monitors_csv(&traj.monitors))?;
    for (n, s) in traj.samples.iter().enumerate() {
        write_eaf1(dir.join(format!("q_{n:04}.eaf1")), &s.q)?;
        write_eaf1(dir.join(format!("u1_{n:04}.eaf1")), &s.u.u1)?;
        write_eaf1(dir.join(format!("u2_{n:04}.eaf1")), &s.u.u2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn shear(g: &Arc<Grid>) -> VectorField {
        VectorField::from_fn(g, |_, y| (PI * y).sin(), |_, _| 0.0)
    }

    fn cell(g: &Arc<Grid>) -> VectorField {
        let k = 2.0 * PI / g.length();
        ScalarField::from_fn(g, |x, y| (k * x).sin() * (PI * y).sin().powi(2)).perp_gradient()
    }

    #[test]
    fn config_validation() {
        assert!(StepConfig::default().validate().is_ok());
        assert!(StepConfig::with_dt(0.0).validate().is_err());
        let c = StepConfig {
            picard_max_iter: 1,
            ..StepConfig::default()
        };
        assert!(c.validate().is_err());
        let c = StepConfig {
            picard_tol: Some(-1.0),
            ..StepConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn energy_of_sine_shear() {
        let g = make_grid(1.0, 8, 32).unwrap();
        let s = AlphaState {
            t: 0.0,
            alpha: 0.1,
            q: ScalarField::zeros(&g),
            u: shear(&g),
            wall_jump: 0.0,
        };
        let e = 0.5 + 0.01 * PI * PI / 2.0;
        assert!((alpha_energy(&s) - e).abs() < 1e-8);
        assert_eq!(alpha_energy(&AlphaState::zeros(&g, 0.1)), 0.0);
    }

    #[test]
    fn compute_v_rejects_euler_and_matches_q() {
        let g = make_grid(2.0, 16, 32).unwrap();
        assert!(matches!(compute_v(&AlphaState::zeros(&g, 0.0)), Err(StepError::AlphaZero)));
        let d = Dynamics::new(&g, 0.1).unwrap();
        let s = d.initial_state(&cell(&g)).unwrap();
        let v = compute_v(&s).unwrap();
        let r = v.curl().sub(&s.q).l2() / s.q.l2();
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = make_grid(2.0, 8, 16).unwrap();
        let d = Dynamics::new(&g, 0.1).unwrap();
        let s = AlphaState::zeros(&g, 0.1);
        let out = picard_step(&s, &StepConfig::default(), &*d.solver, &d.scheme).unwrap();
        assert_eq!(out.state.u.linf(), 0.0);
        assert_eq!(out.state.q.linf(), 0.0);
    }

    #[test]
    fn stationary_shear_step() {
        let g = make_grid(2.0, 8, 64).unwrap();
        for alpha in [0.1, 0.0] {
            let d = Dynamics::new(&g, alpha).unwrap();
            let s = d.initial_state(&shear(&g)).unwrap();
            let out = picard_step(&s, &StepConfig::with_dt(1e-3), &*d.solver, &d.scheme).unwrap();
            let r = out.state.u.sub(&s.u).l2() / s.u.l2();
            assert!(r <= 1e-6, "alpha {alpha}: {r}");
            assert!(out.state.u.u1.wall_max() < 1e-9 || alpha == 0.0, "{}", out.state.u.u1.wall_max());
            assert!(out.state.u.u2.wall_max() < 1e-9);
        }
    }

    #[test]
    fn picard_iterations_do_not_grow_as_dt_shrinks() {
        let g = make_grid(2.0, 16, 32).unwrap();
        let d = Dynamics::new(&g, 0.1).unwrap();
        let s = d.initial_state(&cell(&g)).unwrap();
        let it = |dt| picard_step(&s, &StepConfig::with_dt(dt), &*d.solver, &d.scheme).unwrap().picard_iters;
        let (a, b) = (it(4e-3), it(2e-3));
        assert!(b <= a, "{b} > {a}");
    }

    #[test]
    fn absurd_step_is_an_error() {
        let g = make_grid(2.0, 16, 32).unwrap();
        let d = Dynamics::new(&g, 0.1).unwrap();
        let s = d.initial_state(&cell(&g).scale(50.0)).unwrap();
        assert!(picard_step(&s, &StepConfig::with_dt(1.0), &*d.solver, &d.scheme).is_err());
    }

    #[test]
    fn integrate_zero_span_and_monitors() {
        let g = make_grid(2.0, 8, 16).unwrap();
        let d = Dynamics::new(&g, 0.1).unwrap();
        let s = d.initial_state(&cell(&g)).unwrap();
        let tr = integrate(&s, 0.0, &StepConfig::default(), &d, &IntegrateOptions::every(1)).unwrap();
        assert_eq!(tr.samples.len(), 1);
        let tr = integrate(&s, 0.0105, &StepConfig::with_dt(0.002), &d, &IntegrateOptions::every(2)).unwrap();
        assert_eq!(tr.monitors.len(), 7);
        assert_eq!(tr.last().t, 0.0105);
        assert_eq!(tr.samples.len(), 4);
        let q0 = s.q.l2();
        for m in &tr.monitors {
            assert!(m.l2_q <= q0 * (1.0 + 1e-9));
        }
        assert!(monitors_csv(&tr.monitors).starts_with("t,l2_u,h1_u,l2_q,energy,picard_iters\n"));
    }

    #[test]
    fn checkpoints_are_written() {
        let g = make_grid(2.0, 8, 16).unwrap();
        let d = Dynamics::new(&g, 0.0).unwrap();
        let s = d.initial_state(&cell(&g)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = IntegrateOptions {
            out_dir: Some(dir.path().to_path_buf()),
            ..IntegrateOptions::every(1)
        };
        let tr = integrate(&s, 0.003, &StepConfig::default(), &d, &opts).unwrap();
        let back = crate::grid::read_eaf1(dir.path().join("q_0003.eaf1"), Some(&g)).unwrap();
        assert_eq!(back.values(), tr.last().q.values());
        let csv = fs::read_to_string(dir.path().join("monitors.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
    }
}

//! Experiment drivers: the vanishing-alpha sweep against an Euler
//! reference, the parallel-flow verification, and their configuration.

pub mod config;
mod parallel;
mod sweep;

pub use config::{parse_grid, Config};
pub use parallel::{parallel_flow_verify, reconstruct_parallel_pressure, ParallelFlowCase, ParallelReport, Profile};
pub use sweep::{
    run_reference, run_sweep, ConvergenceRow, Gate, InitMode, ReferenceStats, SweepConfig, SweepReport, SWEEP_KEYS,
};

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::corrector::CorrectorError;
use crate::elliptic::EllipticError;
use crate::grid::{read_eaf1, Eaf1Error, Grid, GridError, ScalarField, VectorField};
use crate::initdata::InitError;
use crate::stepper::StepError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eaf1(#[from] Eaf1Error),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("only {ok} of the sweep rows succeeded: {}", failures.join("; "))]
    TooFewRows { ok: usize, failures: Vec<String> },
}

impl ExperimentError {
    /// 1 for bad input, 2 for a numerical failure.
    pub fn exit_code(&self) -> i32 {
        let numerical = match self {
            Self::Config(_) | Self::Grid(_) | Self::Eaf1(_) | Self::Io(_) => false,
            Self::Init(e) => matches!(
                e,
                InitError::Eigensolver(_) | InitError::BasisExhausted { .. } | InitError::Elliptic(_)
            ),
            Self::Step(e) => !matches!(e, StepError::Config(_) | StepError::Io(_) | StepError::Checkpoint(_)),
            Self::Corrector(e) => matches!(e, CorrectorError::TraceMismatch(_)),
            Self::Elliptic(e) => !matches!(e, EllipticError::BadAlpha(_)),
            Self::TooFewRows { .. } => true,
        };
        if numerical {
            2
        } else {
            1
        }
    }
}

/// Initial velocity: a named analytic field or a pair of EAF1 files.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    /// `perp grad (sin(2 pi x1 / L) sin^2(pi x2))`.
    Cell,
    /// The cell plus the uniform stream `(1, 0)`.
    CellPlug,
    /// `(sin(pi x2), 0)`.
    Shear,
    /// `(x2 (1 - x2), 0)`.
    Poiseuille,
    Zero,
    File { u1: PathBuf, u2: PathBuf },
}

impl Datum {
    pub fn velocity(&self, grid: &Arc<Grid>) -> Result<VectorField, ExperimentError> {
        let k = 2.0 * PI / grid.length();
        let cell = || ScalarField::from_fn(grid, |x, y| (k * x).sin() * (PI * y).sin().powi(2)).perp_gradient();
        Ok(match self {
            Self::Cell => cell(),
            Self::CellPlug => {
                let mut u = cell();
                u.u1.values_mut().iter_mut().for_each(|v| *v += 1.0);
                u
            }
            Self::Shear => VectorField::from_fn(grid, |_, y| (PI * y).sin(), |_, _| 0.0),
            Self::Poiseuille => VectorField::from_fn(grid, |_, y| y * (1.0 - y), |_, _| 0.0),
            Self::Zero => VectorField::zeros(grid),
            Self::File { u1, u2 } => {
                let a = read_eaf1(u1, Some(grid))?;
                let b = read_eaf1(u2, Some(grid))?;
                for f in [&a, &b] {
                    if !Arc::ptr_eq(f.grid(), grid) {
                        return Err(ExperimentError::Config(format!(
                            "datum file grid {}x{} (L = {}) differs from the run grid",
                            f.grid().n1(),
                            f.grid().n2(),
                            f.grid().length()
                        )));
                    }
                }
                VectorField::new(a, b)
            }
        })
    }
}

impl std::str::FromStr for Datum {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "cell" => Self::Cell,
            "cell-plug" => Self::CellPlug,
            "shear" => Self::Shear,
            "poiseuille" => Self::Poiseuille,
            "zero" => Self::Zero,
            _ => match s.strip_prefix("file:").and_then(|r| r.split_once(',')) {
                Some((a, b)) => Self::File {
                    u1: PathBuf::from(a.trim()),
                    u2: PathBuf::from(b.trim()),
                },
                None => {
                    return Err(format!(
                        "unknown datum `{s}` (cell, cell-plug, shear, poiseuille, zero, file:U1.eaf1,U2.eaf1)"
                    ))
                }
            },
        })
    }
}

impl std::fmt::Display for Datum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Cell => write!(f, "cell"),
            Self::CellPlug => write!(f, "cell-plug"),
            Self::Shear => write!(f, "shear"),
            Self::Poiseuille => write!(f, "poiseuille"),
            Self::Zero => write!(f, "zero"),
            Self::File { u1, u2 } => write!(f, "file:{},{}", u1.display(), u2.display()),
        }
    }
}

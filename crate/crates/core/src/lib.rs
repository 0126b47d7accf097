//! Euler-alpha and Euler solvers on the periodic channel `[0, L) x [0, 1]`.

pub mod corrector;
pub mod elliptic;
pub mod experiments;
pub mod fit;
pub mod grid;
pub mod initdata;
pub mod report;
pub mod stepper;
pub mod transport;

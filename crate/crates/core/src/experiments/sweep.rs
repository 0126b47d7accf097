//! The vanishing-alpha sweep: one Euler reference, one Euler-alpha run per
//! rung of the ladder, compared at common sample times.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{parse_grid, Config};
use super::{Datum, ExperimentError};
use crate::grid::{make_grid, Grid, VectorField};
use crate::initdata::{
    certify_e1, check_datum, mollify_family, project_family, stokes_eigenbasis, ApproximationFamily, E1Report,
    FamilyMember,
};
use crate::report::{self, Series};
use crate::stepper::{integrate, monitors_csv, Dynamics, IntegrateOptions, StepConfig, Trajectory};

/// Construction of the alpha-dependent initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Stokes-eigenfield projection onto `floor(1 / (a^2 lambda_1))` modes.
    Projection,
    /// Wall-masked stream function with mask width `a^(2/3)`.
    Mollification,
}

impl std::str::FromStr for InitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "projection" => Ok(Self::Projection),
            "mollification" => Ok(Self::Mollification),
            _ => Err(format!("unknown init mode `{s}` (projection, mollification)")),
        }
    }
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Projection => "projection",
            Self::Mollification => "mollification",
        })
    }
}

/// Keys understood by [`SweepConfig::from_config`].
pub const SWEEP_KEYS: [&str; 16] = [
    "length",
    "grid",
    "u0",
    "alphas",
    "T",
    "dt",
    "stride",
    "init",
    "limiter",
    "half_dt_floor",
    "out",
    "eigen_k_max",
    "eigen_per_mode",
    "picard_tol",
    "picard_max_iter",
    "relaxation",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub length: f64,
    pub n1: usize,
    pub n2: usize,
    pub datum: Datum,
    /// Strictly decreasing, at least four rungs.
    pub alphas: Vec<f64>,
    pub t_end: f64,
    pub step: StepConfig,
    /// `None` keeps about 50 samples per run.
    pub stride: Option<usize>,
    pub init: InitMode,
    /// Rerun the reference and the smallest alpha at `dt / 2`.
    pub half_dt_floor: bool,
    pub out_dir: Option<PathBuf>,
    pub eigen_k_max: Option<usize>,
    pub eigen_per_mode: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            length: 2.0,
            n1: 32,
            n2: 64,
            datum: Datum::Cell,
            alphas: vec![0.2, 0.1, 0.05, 0.025],
            t_end: 1.0,
            step: StepConfig::default(),
            stride: None,
            init: InitMode::Mollification,
            half_dt_floor: true,
            out_dir: None,
            eigen_k_max: None,
            eigen_per_mode: None,
        }
    }
}

impl SweepConfig {
    /// Defaults overridden by whatever keys `cfg` sets.
    pub fn from_config(cfg: &Config) -> Result<Self, ExperimentError> {
        cfg.check_known(&SWEEP_KEYS)?;
        let mut s = Self::default();
        let bad = |e: String| ExperimentError::Config(e);
        if let Some(v) = cfg.get("length")? {
            s.length = v;
        }
        if let Some(g) = cfg.raw("grid") {
            (s.n1, s.n2) = parse_grid(g)?;
        }
        if let Some(d) = cfg.raw("u0") {
            s.datum = d.parse().map_err(bad)?;
        }
        if let Some(a) = cfg.get_list("alphas")? {
            s.alphas = a;
        }
        if let Some(v) = cfg.get("T")? {
            s.t_end = v;
        }
        if let Some(v) = cfg.get("dt")? {
            s.step.dt = v;
        }
        if let Some(v) = cfg.get("stride")? {
            s.stride = Some(v);
        }
        if let Some(v) = cfg.raw("init") {
            s.init = v.parse().map_err(bad)?;
        }
        if let Some(v) = cfg.get("limiter")? {
            s.step.limiter = v;
        }
        if let Some(v) = cfg.get("half_dt_floor")? {
            s.half_dt_floor = v;
        }
        if let Some(v) = cfg.raw("out") {
            s.out_dir = Some(PathBuf::from(v));
        }
        s.eigen_k_max = cfg.get("eigen_k_max")?;
        s.eigen_per_mode = cfg.get("eigen_per_mode")?;
        if let Some(v) = cfg.get("picard_tol")? {
            s.step.picard_tol = Some(v);
        }
        if let Some(v) = cfg.get("picard_max_iter")? {
            s.step.picard_max_iter = v;
        }
        if let Some(v) = cfg.get("relaxation")? {
            s.step.relaxation = v;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.alphas.len() < 4 {
            return bad(format!("the alpha ladder needs at least 4 rungs, got {}", self.alphas.len()));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return bad("alphas must be positive".into());
        }
        if self.alphas.windows(2).any(|w| w[1] >= w[0]) {
            return bad("alphas must be strictly decreasing".into());
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("T must be positive, got {}", self.t_end));
        }
        if self.stride == Some(0) {
            return bad("stride must be positive".into());
        }
        self.step
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ExperimentError> {
        Ok(make_grid(self.length, self.n1, self.n2)?)
    }

    fn n_steps(&self) -> usize {
        ((self.t_end / self.step.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn sample_stride(&self) -> usize {
        self.stride.unwrap_or_else(|| (self.n_steps() / 50).max(1))
    }

    /// Effective configuration as `key = value` text.
    pub fn to_config(&self) -> Config {
        let mut c = Config::default();
        c.set("length", self.length.to_string());
        c.set("grid", format!("{}x{}", self.n1, self.n2));
        c.set("u0", self.datum.to_string());
        let a: Vec<String> = self.alphas.iter().map(f64::to_string).collect();
        c.set("alphas", a.join(","));
        c.set("T", self.t_end.to_string());
        c.set("dt", self.step.dt.to_string());
        c.set("stride", self.sample_stride().to_string());
        c.set("init", self.init.to_string());
        c.set("limiter", self.step.limiter.to_string());
        c.set("half_dt_floor", self.half_dt_floor.to_string());
        if let Some(t) = self.step.picard_tol {
            c.set("picard_tol", t.to_string());
        }
        c.set("picard_max_iter", self.step.picard_max_iter.to_string());
        c.set("relaxation", self.step.relaxation.to_string());
        if let Some(k) = self.eigen_k_max {
            c.set("eigen_k_max", k.to_string());
        }
        if let Some(k) = self.eigen_per_mode {
            c.set("eigen_per_mode", k.to_string());
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub alpha: f64,
    /// `max_n ||u^a(t_n) - u(t_n)||`.
    pub sup_l2_diff: f64,
    /// `a^2 max_n ||grad u^a(t_n)||`.
    pub sup_alpha2_gradnorm: f64,
    /// `||u^a(0) - u(0)||`.
    pub init_diff: f64,
    /// `max_n |E(t_n) - E(0)| / E(0)`, zero when `E(0) = 0`.
    pub energy_drift: f64,
    /// `max_n ||q(t_n)|| / ||q(0)||`, zero when `q(0) = 0`.
    pub q_ratio: f64,
}

impl ConvergenceRow {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.alpha,
            self.sup_l2_diff,
            self.sup_alpha2_gradnorm,
            self.init_diff,
            self.energy_drift,
            self.q_ratio,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStats {
    pub energy_drift: f64,
    /// Vorticity-norm ratio.
    pub q_ratio: f64,
    pub sup_l2: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub sup_diff_decreasing: bool,
    pub gradnorm_decreasing: bool,
    /// Time-step floor from the half-`dt` reruns.
    pub floor: Option<f64>,
    /// `2 (init_diff + floor)` of the last row.
    pub bound: Option<f64>,
    pub final_small: Option<bool>,
    pub e1_passed: bool,
}

impl Gate {
    pub fn passed(&self) -> bool {
        self.sup_diff_decreasing && self.gradnorm_decreasing && self.final_small.unwrap_or(false) && self.e1_passed
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Successful rows by decreasing alpha.
    pub rows: Vec<ConvergenceRow>,
    /// `(alpha, reason)` of rows whose run failed.
    pub failures: Vec<(f64, String)>,
    pub reference: ReferenceStats,
    pub e1: E1Report,
    pub gate: Gate,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "alpha",
    "sup_L2_diff",
    "sup_alpha2_gradnorm",
    "init_diff",
    "energy_drift",
    "q_ratio",
];

impl SweepReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self.rows.iter().map(|r| r.as_array().to_vec()).collect();
        report::csv(&SWEEP_HEADER, &rows)
    }

    pub fn svg(&self) -> String {
        let col = |f: fn(&ConvergenceRow) -> f64| self.rows.iter().map(|r| (r.alpha, f(r))).collect::<Vec<_>>();
        let series = vec![
            Series::new("sup |u_a - u|", col(|r| r.sup_l2_diff)),
            Series::new("a^2 sup |grad u_a|", col(|r| r.sup_alpha2_gradnorm)),
            Series::new("|u_a(0) - u(0)|", col(|r| r.init_diff)),
        ];
        report::loglog_svg("vanishing-alpha sweep", "alpha", "discrepancy", &series)
    }

    pub fn summary(&self) -> String {
        let g = &self.gate;
        let r = &self.reference;
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:e}"));
        let mut s = String::new();
        s += &format!("rows {} failed {}\n", self.rows.len(), self.failures.len());
        for (a, why) in &self.failures {
            s += &format!("failed alpha {a}: {why}\n");
        }
        s += &format!(
            "reference energy_drift {:e} vorticity_ratio {} sup_L2 {:e} halvings {}\n",
            r.energy_drift, r.q_ratio, r.sup_l2, r.halvings
        );
        s += &format!(
            "e1 passed {} diffs_decreasing {} energy_slope {}\n",
            self.e1.passed(),
            self.e1.diffs_decreasing,
            opt(self.e1.energy_slope)
        );
        s += &format!(
            "gate sup_diff_decreasing {} gradnorm_decreasing {} floor {} bound {} final_small {} passed {}\n",
            g.sup_diff_decreasing,
            g.gradnorm_decreasing,
            opt(g.floor),
            opt(g.bound),
            g.final_small.map_or("n/a".into(), |b| b.to_string()),
            g.passed()
        );
        s
    }

    /// `sweep.csv`, `sweep.svg`, `summary.txt` and `sweep.cfg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), self.csv())?;
        std::fs::write(dir.join("sweep.svg"), self.svg())?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        std::fs::write(dir.join("sweep.cfg"), self.config.to_config().to_text())?;
        Ok(())
    }
}

fn run_one(
    grid: &Arc<Grid>,
    alpha: f64,
    u0: &VectorField,
    cfg: &SweepConfig,
    dt: f64,
    stride: usize,
) -> Result<Trajectory, ExperimentError> {
    let dynamics = Dynamics::new(grid, alpha)?;
    let state = dynamics.initial_state(u0)?;
    let step = StepConfig { dt, ..cfg.step.clone() };
    Ok(integrate(&state, cfg.t_end, &step, &dynamics, &IntegrateOptions::every(stride))?)
}

fn energy_drift(traj: &Trajectory) -> f64 {
    let e0 = traj.monitors[0].energy;
    if e0 == 0.0 {
        return 0.0;
    }
    traj.monitors.iter().map(|m| (m.energy - e0).abs() / e0).fold(0.0, f64::max)
}

fn q_ratio(traj: &Trajectory) -> f64 {
    let q0 = traj.monitors[0].l2_q;
    if q0 == 0.0 {
        return 0.0;
    }
    traj.monitors.iter().map(|m| m.l2_q / q0).fold(0.0, f64::max)
}

/// `max_n ||a(t_n) - b(t_n)||` over samples at common times.
fn sup_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut sup: f64 = 0.0;
    let mut j = 0;
    for s in &a.samples {
        while j < b.samples.len() && b.samples[j].t < s.t - 1e-12 {
            j += 1;
        }
        if j < b.samples.len() && (b.samples[j].t - s.t).abs() <= 1e-12 {
            sup = sup.max(s.u.sub(&b.samples[j].u).l2());
        }
    }
    sup
}

/// The Euler reference alone, as run inside [`run_sweep`].
pub fn run_reference(cfg: &SweepConfig) -> Result<Trajectory, ExperimentError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let u0 = cfg.datum.velocity(&grid)?;
    check_datum(&u0)?;
    run_one(&grid, 0.0, &u0, cfg, cfg.step.dt, cfg.sample_stride())
}

fn build_family(cfg: &SweepConfig, grid: &Arc<Grid>, u0: &VectorField) -> Result<ApproximationFamily, ExperimentError> {
    Ok(match cfg.init {
        InitMode::Mollification => mollify_family(u0, &cfg.alphas)?,
        InitMode::Projection => {
            let k_max = cfg.eigen_k_max.unwrap_or(grid.n1() / 2 - 1);
            let per_mode = cfg.eigen_per_mode.unwrap_or((grid.n2() - 5).min(32));
            let basis = stokes_eigenbasis(grid, k_max, per_mode)?;
            project_family(&basis, u0, &cfg.alphas)?
        }
    })
}

/// Runs the reference and every rung (concurrently), then the optional
/// half-`dt` reruns, and assembles rows, certification and gate.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let u0 = cfg.datum.velocity(&grid)?;
    check_datum(&u0)?;
    let dt = cfg.step.dt;
    let stride = cfg.sample_stride();
    let family = build_family(cfg, &grid, &u0)?;
    let alphas: Vec<f64> = family.members.iter().map(|m| m.alpha).collect();

    // job 0 is the reference; then one per rung; then the half-step reruns
    let mut jobs: Vec<(f64, &VectorField, f64, usize)> = vec![(0.0, &u0, dt, stride)];
    jobs.extend(family.members.iter().map(|m| (m.alpha, &m.u, dt, stride)));
    if cfg.half_dt_floor {
        let last = family.members.last().expect("at least four rungs");
        jobs.push((0.0, &u0, 0.5 * dt, 2 * stride));
        jobs.push((last.alpha, &last.u, 0.5 * dt, 2 * stride));
    }
    let mut runs: Vec<Result<Trajectory, ExperimentError>> = jobs
        .par_iter()
        .map(|&(a, u, step, s)| run_one(&grid, a, u, cfg, step, s))
        .collect();
    let half = if cfg.half_dt_floor {
        let b = runs.pop().expect("job");
        let a = runs.pop().expect("job");
        Some((a, b))
    } else {
        None
    };
    let mut runs = runs.into_iter();
    let reference = runs.next().expect("reference job")?;
    let ref_state0 = &reference.samples[0];

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut certified = Vec::new();
    let mut last_run = None;
    for (alpha, run) in alphas.iter().zip(runs) {
        match run {
            Ok(traj) => {
                let gradsup = traj.samples.iter().map(|s| s.u.h1_semi()).fold(0.0, f64::max);
                rows.push(ConvergenceRow {
                    alpha: *alpha,
                    sup_l2_diff: sup_distance(&traj, &reference),
                    sup_alpha2_gradnorm: alpha * alpha * gradsup,
                    init_diff: traj.samples[0].u.sub(&ref_state0.u).l2(),
                    energy_drift: energy_drift(&traj),
                    q_ratio: q_ratio(&traj),
                });
                certified.push(FamilyMember::new(*alpha, None, traj.samples[0].u.clone()));
                last_run = Some((*alpha, traj));
            }
            Err(e) => {
                log::warn!("alpha {alpha}: {e}");
                failures.push((*alpha, e.to_string()));
                certified.push(FamilyMember::new(
                    *alpha,
                    None,
                    family.members.iter().find(|m| m.alpha == *alpha).expect("rung").u.clone(),
                ));
            }
        }
    }
    if rows.len() < 3 {
        return Err(ExperimentError::TooFewRows {
            ok: rows.len(),
            failures: failures.iter().map(|(a, e)| format!("alpha {a}: {e}")).collect(),
        });
    }
    // certify the states actually integrated, against the reference start
    let e1 = certify_e1(&ApproximationFamily {
        kind: family.kind,
        u0: ref_state0.u.clone(),
        members: certified,
    })?;

    let floor = match (half, &last_run) {
        (Some((ref_half, last_half)), Some((alpha, last))) if *alpha == *alphas.last().expect("rung") => {
            let ref_half = ref_half?;
            let last_half = last_half?;
            Some(sup_distance(&reference, &ref_half) + sup_distance(last, &last_half))
        }
        _ => None,
    };
    let strictly = |f: fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let last = rows.last().expect("rows");
    let bound = floor.map(|f| 2.0 * (last.init_diff + f));
    let gate = Gate {
        sup_diff_decreasing: strictly(|r| r.sup_l2_diff),
        gradnorm_decreasing: strictly(|r| r.sup_alpha2_gradnorm),
        floor,
        bound,
        final_small: bound.map(|b| last.sup_l2_diff < b),
        e1_passed: e1.passed(),
    };
    let report = SweepReport {
        config: cfg.clone(),
        rows,
        failures,
        reference: ReferenceStats {
            energy_drift: energy_drift(&reference),
            q_ratio: q_ratio(&reference),
            sup_l2: reference.samples.iter().map(|s| s.u.l2()).fold(0.0, f64::max),
            halvings: reference.halvings,
        },
        e1,
        gate,
    };
    if let Some(dir) = &cfg.out_dir {
        report.write(dir)?;
        std::fs::write(dir.join("reference.csv"), monitors_csv(&reference.monitors))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let c = Config::parse("grid = 16x24\nalphas = 0.4,0.2,0.1,0.05\nT = 0.1\ninit = projection\n").unwrap();
        let s = SweepConfig::from_config(&c).unwrap();
        assert_eq!((s.n1, s.n2), (16, 24));
        assert_eq!(s.init, InitMode::Projection);
        assert_eq!(s.sample_stride(), 2);
        let back = SweepConfig::from_config(&s.to_config()).unwrap();
        assert_eq!(back.stride, Some(2));
        assert_eq!(back.to_config(), s.to_config());
        for bad in [
            "alphas = 0.2,0.1,0.05",
            "alphas = 0.2,0.1,0.1,0.05",
            "T = 0",
            "dt = -1",
            "colour = red",
            "init = magic",
        ] {
            let c = Config::parse(bad).unwrap();
            let e = SweepConfig::from_config(&c).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn default_keeps_fifty_samples() {
        let s = SweepConfig::default();
        assert_eq!(s.sample_stride(), 20);
        assert_eq!(s.to_config().raw("init"), Some("mollification"));
    }
}

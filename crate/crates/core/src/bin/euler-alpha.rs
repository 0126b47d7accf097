use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use euler_alpha::corrector::{scaling_study, CutoffProfile};
use euler_alpha::experiments::{
    parallel_flow_verify, parse_grid, run_sweep, Config, Datum, ExperimentError, ParallelFlowCase, Profile,
    SweepConfig, SWEEP_KEYS,
};
use euler_alpha::grid::{make_grid, read_eaf1, write_eaf1, Grid, ScalarField};
use euler_alpha::initdata::{certify_e1, project_family, stokes_eigenbasis, E1Report};
use euler_alpha::report;
use euler_alpha::stepper::{integrate, monitors_csv, write_trajectory, Dynamics, IntegrateOptions, StepConfig};

#[derive(Parser, Debug)]
#[command(name = "euler-alpha", version, about = "Euler-alpha and Euler experiments in a periodic channel")]
struct Cli {
    /// Collocation grid as N1xN2.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Channel period in x1.
    #[arg(long, global = true)]
    length: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key = value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory (alpha = 0 runs Euler).
    Solve {
        #[arg(long)]
        alpha: Option<f64>,
        /// cell, cell-plug, shear, poiseuille, zero or file:U1.eaf1,U2.eaf1
        #[arg(long)]
        u0: Option<String>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        limiter: Option<bool>,
    },
    /// Vanishing-alpha sweep against the Euler reference.
    Sweep {
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        u0: Option<String>,
        /// projection or mollification
        #[arg(long)]
        init: Option<String>,
    },
    /// Stokes eigenpairs and their manifest.
    Eigen {
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        per_mode: Option<usize>,
    },
    /// Projection family of a datum and its certification.
    Project {
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        u0: Option<String>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        per_mode: Option<usize>,
    },
    /// Boundary-layer corrector scaling study.
    Corrector {
        /// Comma-separated halving ladder.
        #[arg(long)]
        deltas: Option<String>,
        /// quintic or septic
        #[arg(long)]
        profile: Option<String>,
        /// quartic (x2^2 (1-x2)^2) or sin (sin(pi x2) / pi)
        #[arg(long)]
        stream: Option<String>,
    },
    /// Parallel-flow stationarity and steady residual.
    Parallel {
        /// sin, poiseuille, zero or kink
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Norms of an EAF1 field file.
    Norms { file: PathBuf },
}

fn cfg_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

/// Config file overlaid with the global flags and the command's own flags.
fn merged(cli: &Cli, own: &[(&str, Option<String>)]) -> Result<Config, ExperimentError> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let globals = [
        ("grid", cli.grid.clone()),
        ("length", cli.length.map(|v| v.to_string())),
        ("dt", cli.dt.map(|v| v.to_string())),
        ("T", cli.t_end.map(|v| v.to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in globals.iter().chain(own) {
        if let Some(v) = v {
            c.set(k, v.clone());
        }
    }
    Ok(c)
}

fn grid_of(c: &Config, default: (usize, usize)) -> Result<std::sync::Arc<Grid>, ExperimentError> {
    let (n1, n2) = match c.raw("grid") {
        Some(g) => parse_grid(g)?,
        None => default,
    };
    Ok(make_grid(c.get("length")?.unwrap_or(2.0), n1, n2)?)
}

fn out_dir(c: &Config) -> Option<PathBuf> {
    c.raw("out").map(PathBuf::from)
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn print_e1(r: &E1Report) {
    println!("alpha,m,diff,wall_max");
    for i in 0..r.alphas.len() {
        let m = r.m[i].map_or("-".to_string(), |m| m.to_string());
        println!("{},{},{:e},{:e}", r.alphas[i], m, r.diffs[i], r.wall_max[i]);
    }
    let opt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "walls {} decreasing {} final_rel_diff {:.4e} grad_slope {} h3_slope {} energy_slope {} passed {}",
        r.wall_ok,
        r.diffs_decreasing,
        r.final_rel_diff,
        opt(r.grad_slope),
        opt(r.h3_slope),
        opt(r.energy_slope),
        r.passed()
    );
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    match &cli.command {
        Command::Solve {
            alpha,
            u0,
            stride,
            limiter,
        } => {
            let c = merged(
                cli,
                &[
                    ("alpha", alpha.map(|v| v.to_string())),
                    ("u0", u0.clone()),
                    ("stride", stride.map(|v| v.to_string())),
                    ("limiter", limiter.map(|v| v.to_string())),
                ],
            )?;
            c.check_known(&["grid", "length", "dt", "T", "out", "alpha", "u0", "stride", "limiter"])?;
            let grid = grid_of(&c, (32, 64))?;
            let alpha: f64 = c.get("alpha")?.unwrap_or(0.1);
            let datum: Datum = c.raw("u0").unwrap_or("cell").parse().map_err(cfg_err)?;
            let mut step = StepConfig::with_dt(c.get("dt")?.unwrap_or(1e-3));
            if let Some(l) = c.get("limiter")? {
                step.limiter = l;
            }
            let t_end: f64 = c.get("T")?.unwrap_or(1.0);
            let dynamics = Dynamics::new(&grid, alpha)?;
            let state = dynamics.initial_state(&datum.velocity(&grid)?)?;
            let n_steps = ((t_end / step.dt).ceil() as usize).max(1);
            let stride = c.get("stride")?.unwrap_or((n_steps / 50).max(1));
            let traj = integrate(&state, t_end, &step, &dynamics, &IntegrateOptions::every(stride))?;
            if let Some(dir) = out_dir(&c) {
                write_trajectory(&dir, &traj)?;
            }
            let e0 = traj.monitors[0].energy;
            let q0 = traj.monitors[0].l2_q;
            let drift = traj.monitors.iter().map(|m| (m.energy - e0).abs()).fold(0.0, f64::max);
            let qmax = traj.monitors.iter().map(|m| m.l2_q).fold(0.0, f64::max);
            let last = traj.monitors.last().expect("monitor");
            println!(
                "t {} l2_u {:e} h1_u {:e} l2_q {:e} energy {:e}",
                last.t, last.l2_u, last.h1_u, last.l2_q, last.energy
            );
            println!(
                "energy_drift {:e} q_ratio {} samples {} halvings {}",
                if e0 > 0.0 { drift / e0 } else { 0.0 },
                if q0 > 0.0 { qmax / q0 } else { 0.0 },
                traj.samples.len(),
                traj.halvings
            );
        }
        Command::Sweep { alphas, u0, init } => {
            let c = merged(cli, &[("alphas", alphas.clone()), ("u0", u0.clone()), ("init", init.clone())])?;
            c.check_known(&SWEEP_KEYS)?;
            let cfg = SweepConfig::from_config(&c)?;
            let rep = run_sweep(&cfg)?;
            print!("{}", rep.csv());
            print!("{}", rep.summary());
        }
        Command::Eigen { k_max, per_mode } => {
            let c = merged(
                cli,
                &[
                    ("k_max", k_max.map(|v| v.to_string())),
                    ("per_mode", per_mode.map(|v| v.to_string())),
                ],
            )?;
            c.check_known(&["grid", "length", "dt", "T", "out", "k_max", "per_mode"])?;
            let grid = grid_of(&c, (16, 48))?;
            let basis = stokes_eigenbasis(&grid, c.get("k_max")?.unwrap_or(3), c.get("per_mode")?.unwrap_or(8))?;
            if let Some(dir) = out_dir(&c) {
                basis.save(&dir)?;
            }
            print!("{}", basis.manifest_csv());
            println!(
                "pairs {} certified {} rejected {} gramian_defect {:e}",
                basis.len(),
                basis.certified_len(),
                basis.rejected.len(),
                basis.gramian_defect(basis.len())
            );
        }
        Command::Project {
            alphas,
            u0,
            k_max,
            per_mode,
        } => {
            let c = merged(
                cli,
                &[
                    ("alphas", alphas.clone()),
                    ("u0", u0.clone()),
                    ("k_max", k_max.map(|v| v.to_string())),
                    ("per_mode", per_mode.map(|v| v.to_string())),
                ],
            )?;
            c.check_known(&["grid", "length", "dt", "T", "out", "alphas", "u0", "k_max", "per_mode"])?;
            let grid = grid_of(&c, (32, 64))?;
            let alphas: Vec<f64> = c.get_list("alphas")?.unwrap_or(vec![0.2, 0.1, 0.05, 0.025]);
            let datum: Datum = c.raw("u0").unwrap_or("cell-plug").parse().map_err(cfg_err)?;
            let k_max = c.get("k_max")?.unwrap_or(grid.n1() / 2 - 1);
            let per_mode = c.get("per_mode")?.unwrap_or((grid.n2() - 5).min(32));
            let basis = stokes_eigenbasis(&grid, k_max, per_mode)?;
            let family = project_family(&basis, &datum.velocity(&grid)?, &alphas)?;
            let rep = certify_e1(&family)?;
            if let Some(dir) = out_dir(&c) {
                let rows: Vec<Vec<f64>> = family
                    .members
                    .iter()
                    .zip(&rep.diffs)
                    .map(|(m, d)| {
                        vec![
                            m.alpha,
                            m.m.unwrap_or(0) as f64,
                            *d,
                            (m.alpha * m.norms.h1_semi).powi(2),
                            m.norms.h3,
                            m.u.wall_max(),
                        ]
                    })
                    .collect();
                let csv = report::csv(&["alpha", "m", "diff", "alpha2_grad2", "h3", "wall_max"], &rows);
                write_out(&dir, "projection.csv", &csv)?;
            }
            print_e1(&rep);
        }
        Command::Corrector {
            deltas,
            profile,
            stream,
        } => {
            let c = merged(
                cli,
                &[("deltas", deltas.clone()), ("profile", profile.clone()), ("stream", stream.clone())],
            )?;
            c.check_known(&["grid", "length", "dt", "T", "out", "deltas", "profile", "stream"])?;
            let grid = grid_of(&c, (8, 128))?;
            let deltas: Vec<f64> = c.get_list("deltas")?.unwrap_or((3..=6).map(|k| 2f64.powi(-k)).collect());
            let profile: CutoffProfile = c.raw("profile").unwrap_or("quintic").parse().map_err(cfg_err)?;
            let psi = match c.raw("stream").unwrap_or("quartic") {
                "quartic" => ScalarField::from_fn(&grid, |_, y| (y * (1.0 - y)).powi(2)),
                "sin" => ScalarField::from_fn(&grid, |_, y| (std::f64::consts::PI * y).sin() / std::f64::consts::PI),
                other => return Err(cfg_err(format!("unknown stream `{other}` (quartic, sin)"))),
            };
            let rep = scaling_study(&psi, &deltas, profile)?;
            if let Some(dir) = out_dir(&c) {
                rep.write(&dir)?;
            }
            print!("{}", rep.csv());
            match rep.slopes {
                Some(s) => println!("slopes {:.4} {:.4} {:.4} {:.4}", s[0], s[1], s[2], s[3]),
                None => println!("slopes degenerate"),
            }
        }
        Command::Parallel { profile, alpha } => {
            let c = merged(cli, &[("profile", profile.clone()), ("alpha", alpha.map(|v| v.to_string()))])?;
            c.check_known(&["grid", "length", "dt", "T", "out", "profile", "alpha"])?;
            let grid = grid_of(&c, (32, 64))?;
            let profile: Profile = c.raw("profile").unwrap_or("sin").parse().map_err(cfg_err)?;
            let case = ParallelFlowCase::new(profile, c.get("alpha")?.unwrap_or(0.1), &grid)?;
            let step = StepConfig::with_dt(c.get("dt")?.unwrap_or(1e-3));
            let rep = parallel_flow_verify(&case, c.get("T")?.unwrap_or(1.0), &step)?;
            if let Some(dir) = out_dir(&c) {
                std::fs::create_dir_all(&dir)?;
                write_eaf1(dir.join("pressure.eaf1"), &rep.pressure)?;
                write_out(&dir, "parallel.txt", &rep.summary())?;
                write_out(&dir, "monitors.csv", &monitors_csv(&rep.trajectory.monitors))?;
            }
            print!("{}", rep.summary());
        }
        Command::Norms { file } => {
            let f = read_eaf1(file, None)?;
            let n = f.norms();
            println!("grid {}x{} length {}", f.grid().n1(), f.grid().n2(), f.grid().length());
            println!("l2 {:e}\nh1_semi {:e}\nh3 {:e}\nlinf {:e}", n.l2, n.h1_semi, n.h3, n.linf);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

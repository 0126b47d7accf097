//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. `ACCEPTANCE_ONLY=1,2,7` runs a subset;
//! criterion 4 reads the trajectories of 5, 6 and 9 and runs whichever of
//! them are selected.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use euler_alpha::corrector::{scaling_study, CutoffProfile, EXPECTED_SLOPES, FUNCTIONAL_NAMES};
use euler_alpha::elliptic::{biot_savart_alpha, AlphaEllipticSolver, StreamSolver};
use euler_alpha::experiments::{
    parallel_flow_verify, run_sweep, Config, Datum, ParallelFlowCase, Profile, SweepConfig, SweepReport,
};
use euler_alpha::fit::loglog_slope;
use euler_alpha::grid::{make_grid, ScalarField};
use euler_alpha::initdata::{certify_e1, project_family, stokes_eigenbasis};
use euler_alpha::stepper::{integrate, monitors_csv, Dynamics, IntegrateOptions, StepConfig, Trajectory};

struct Line {
    id: u8,
    pass: bool,
    detail: String,
}

fn selected(id: u8) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn rel_l2(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).l2() / b.l2()
}

/// Manufactured stream `sin(2 pi x1 / L) x2^2 (1 - x2)^2` and its source.
fn criterion_1() -> Line {
    let t0 = Instant::now();
    let (l, alpha) = (2.0, 0.1);
    let g = make_grid(l, 32, 64).unwrap();
    let k = 2.0 * PI / l;
    let phi = ScalarField::from_fn(&g, |x, y| (k * x).sin() * (y * (1.0 - y)).powi(2));
    let q = ScalarField::from_fn(&g, |x, y| {
        let gg = (y * (1.0 - y)).powi(2);
        let g2 = 2.0 - 12.0 * y + 12.0 * y * y;
        let g4 = 24.0;
        let lap = g2 - k * k * gg;
        let bilap = g4 - 2.0 * k * k * g2 + k.powi(4) * gg;
        (k * x).sin() * (lap - alpha * alpha * bilap)
    });
    let solver = AlphaEllipticSolver::new(&g, alpha).unwrap();
    let (got, _) = biot_savart_alpha(&solver, &q).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let err = rel_l2(&got, &phi);
    Line {
        id: 1,
        pass: err <= 1e-8 && secs < 1.0,
        detail: format!("elliptic oracle: relative L2 error {err:.2e} (<= 1e-8), {secs:.3} s (< 1 s)"),
    }
}

/// `phi'' - a^2 phi'''' = 1` with clamped ends:
/// `phi = (x^2 - x)/2 + (a/2) coth(1/(2a)) - a cosh((x - 1/2)/a) / (2 sinh(1/(2a)))`.
fn criterion_2() -> Line {
    let alpha: f64 = 0.1;
    let g = make_grid(2.0, 8, 64).unwrap();
    let h = 0.5 / alpha;
    let exact = ScalarField::from_fn(&g, |_, y| {
        0.5 * (y * y - y) + 0.5 * alpha / h.tanh() - alpha * ((y - 0.5) / alpha).cosh() / (2.0 * h.sinh())
    });
    let solver = AlphaEllipticSolver::new(&g, alpha).unwrap();
    let got = solver.stream(&ScalarField::constant(&g, 1.0), 0.0).unwrap();
    let err = rel_l2(&got, &exact);
    let abs = got.sub(&exact).linf();
    Line {
        id: 2,
        pass: err <= 1e-8,
        detail: format!("1D closed form: relative L2 error {err:.2e}, max error {abs:.2e} (<= 1e-8)"),
    }
}

fn criterion_3() -> Line {
    let g = make_grid(2.0, 16, 48).unwrap();
    let b = stokes_eigenbasis(&g, 3, 8).unwrap();
    let shear: Vec<f64> = b.pairs.iter().filter(|p| p.k == 0).map(|p| p.lambda).take(5).collect();
    let worst = shear
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let e = ((j + 1) as f64 * PI).powi(2);
            (l - e).abs() / e
        })
        .fold(0.0, f64::max);
    let gram = b.gramian_defect(10);
    Line {
        id: 3,
        pass: shear.len() == 5 && worst <= 1e-8 && gram <= 1e-8,
        detail: format!(
            "Stokes eigenvalues: worst relative error of j^2 pi^2 (j = 1..5) {worst:.2e}, Gramian defect of first 10 {gram:.2e} (<= 1e-8)"
        ),
    }
}

fn drift(t: &Trajectory) -> f64 {
    let e0 = t.monitors[0].energy;
    t.monitors.iter().map(|m| (m.energy - e0).abs() / e0).fold(0.0, f64::max)
}

fn q_ratio(t: &Trajectory) -> f64 {
    let q0 = t.monitors[0].l2_q;
    if q0 == 0.0 {
        return 0.0;
    }
    t.monitors.iter().map(|m| m.l2_q / q0).fold(0.0, f64::max)
}

struct EnergyStudy {
    dts: Vec<f64>,
    drifts: Vec<f64>,
    secs: Vec<f64>,
    runs: Vec<Trajectory>,
}

/// Cell datum, alpha = 0.1, T = 1, dt = 4e-3, 2e-3, 1e-3 at 32x64.
fn energy_study() -> EnergyStudy {
    let g = make_grid(2.0, 32, 64).unwrap();
    let d = Dynamics::new(&g, 0.1).unwrap();
    let s0 = d.initial_state(&Datum::Cell.velocity(&g).unwrap()).unwrap();
    let mut out = EnergyStudy {
        dts: vec![4e-3, 2e-3, 1e-3],
        drifts: vec![],
        secs: vec![],
        runs: vec![],
    };
    for &dt in &out.dts {
        let t0 = Instant::now();
        let traj = integrate(&s0, 1.0, &StepConfig::with_dt(dt), &d, &IntegrateOptions::every(20)).unwrap();
        out.secs.push(t0.elapsed().as_secs_f64());
        out.drifts.push(drift(&traj));
        out.runs.push(traj);
    }
    out
}

fn criterion_5(e: &EnergyStudy) -> Line {
    let d = &e.drifts;
    let observed = ((d[0] - d[1]) / (d[1] - d[2])).log2();
    let fit = loglog_slope(&e.dts, d).unwrap_or(f64::NAN);
    let slowest = e.secs.iter().copied().fold(0.0, f64::max);
    let pass = d[2] <= 1e-3 && d[1] > d[2] && d[0] > d[1] && observed >= 2.0 && slowest < 120.0;
    Line {
        id: 5,
        pass,
        detail: format!(
            "energy: drift {:.3e}, {:.3e}, {:.3e} at dt = 4e-3, 2e-3, 1e-3 (last <= 1e-3); observed order {observed:.2} (>= 2), log-log slope {fit:.2}; slowest run {slowest:.0} s (< 120 s)",
            d[0], d[1], d[2]
        ),
    }
}

struct ParallelRuns {
    lines: Vec<String>,
    pass: bool,
    runs: Vec<Trajectory>,
}

fn parallel_runs() -> ParallelRuns {
    let g = make_grid(2.0, 32, 64).unwrap();
    let mut out = ParallelRuns {
        lines: vec![],
        pass: true,
        runs: vec![],
    };
    for profile in [Profile::Poiseuille, Profile::Sin] {
        for alpha in [0.1, 0.05] {
            let case = ParallelFlowCase::new(profile, alpha, &g).unwrap();
            let r = parallel_flow_verify(&case, 1.0, &StepConfig::with_dt(1e-3)).unwrap();
            out.pass &= r.stationarity <= 1e-4 && r.residual_l2 <= 1e-8;
            out.lines.push(format!(
                "{profile:?}/{alpha}: drift {:.1e}, residual {:.1e}",
                r.stationarity, r.residual_l2
            ));
            out.runs.push(r.trajectory);
        }
    }
    out
}

fn criterion_6(p: &ParallelRuns) -> Line {
    Line {
        id: 6,
        pass: p.pass,
        detail: format!(
            "parallel flows (stationarity <= 1e-4, residual <= 1e-8): {}",
            p.lines.join("; ")
        ),
    }
}

fn corrector_study() -> (euler_alpha::corrector::ScalingReport, f64) {
    let t0 = Instant::now();
    let g = make_grid(1.0, 8, 128).unwrap();
    let psi = ScalarField::from_fn(&g, |_, y| (y * (1.0 - y)).powi(2));
    let deltas: Vec<f64> = (3..=6).map(|k| 2f64.powi(-k)).collect();
    let r = scaling_study(&psi, &deltas, CutoffProfile::Quintic).unwrap();
    (r, t0.elapsed().as_secs_f64())
}

fn criterion_7() -> Line {
    let (r, secs) = corrector_study();
    let slopes = r.slopes.unwrap_or([f64::NAN; 4]);
    let within = r.within(0.15);
    let parts: Vec<String> = (0..4)
        .map(|i| {
            format!(
                "{} {:.3} (target {:+})",
                FUNCTIONAL_NAMES[i], slopes[i], EXPECTED_SLOPES[i]
            )
        })
        .collect();
    Line {
        id: 7,
        pass: within.iter().all(|b| *b) && r.rows.len() == 4 && secs < 10.0,
        detail: format!("corrector slopes within 0.15: {}; {secs:.2} s (< 10 s)", parts.join(", ")),
    }
}

fn criterion_8() -> Line {
    let g = make_grid(2.0, 32, 64).unwrap();
    let basis = stokes_eigenbasis(&g, 15, 32).unwrap();
    let u0 = Datum::CellPlug.velocity(&g).unwrap();
    let fam = match project_family(&basis, &u0, &[0.2, 0.1, 0.05, 0.025]) {
        Ok(f) => f,
        Err(e) => {
            return Line {
                id: 8,
                pass: false,
                detail: format!("projection family: {e}"),
            }
        }
    };
    let r = certify_e1(&fam).unwrap();
    let slope = r.energy_slope.unwrap_or(f64::NAN);
    let wall = r.wall_max.iter().copied().fold(0.0, f64::max);
    let m: Vec<String> = r.m.iter().map(|m| m.unwrap_or(0).to_string()).collect();
    let diffs: Vec<String> = r.diffs.iter().map(|d| format!("{d:.3e}")).collect();
    Line {
        id: 8,
        pass: slope >= 2.0 / 3.0 - 0.2 && wall <= 1e-9 && r.diffs_decreasing,
        detail: format!(
            "projection family (m = {}): slope of a^2|grad u|^2 {slope:.3} (>= {:.3}); wall max {wall:.1e} (<= 1e-9); diffs {} decreasing {}",
            m.join("/"),
            2.0 / 3.0 - 0.2,
            diffs.join(", "),
            r.diffs_decreasing
        ),
    }
}

fn shipped_sweep() -> SweepConfig {
    let c = Config::load(&config_path("sweep.cfg")).unwrap();
    SweepConfig::from_config(&c).unwrap()
}

fn criterion_9(r: &SweepReport, secs: f64) -> Line {
    let g = &r.gate;
    let limit = if rayon::current_num_threads() > 1 { 300.0 } else { 900.0 };
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "a={} sup {:.3e} grad {:.3e} init {:.3e}",
                row.alpha, row.sup_l2_diff, row.sup_alpha2_gradnorm, row.init_diff
            )
        })
        .collect();
    let last = r.rows.last().map_or(f64::NAN, |x| x.sup_l2_diff);
    Line {
        id: 9,
        pass: r.failures.is_empty()
            && r.rows.len() == r.config.alphas.len()
            && g.sup_diff_decreasing
            && g.gradnorm_decreasing
            && g.final_small == Some(true)
            && secs < limit,
        detail: format!(
            "sweep: {}; decreasing {} / {}; final {last:.3e} vs bound {:.3e} (floor {:.3e}); E1 {}; {secs:.0} s (< {limit:.0} s on {} thread(s))",
            rows.join("; "),
            g.sup_diff_decreasing,
            g.gradnorm_decreasing,
            g.bound.unwrap_or(f64::NAN),
            g.floor.unwrap_or(f64::NAN),
            r.e1.passed(),
            rayon::current_num_threads()
        ),
    }
}

/// Runs a shipped config through the binary twice and compares every
/// output file byte for byte.
fn cli_reruns_match(cmd: &str, cfg: &str) -> bool {
    let outputs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_euler-alpha"))
                .arg("--config")
                .arg(config_path(cfg))
                .arg("--out")
                .arg(dir.path())
                .arg(cmd)
                .stdout(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "{cmd} exited with {status}");
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
                .unwrap()
                .map(|e| {
                    let e = e.unwrap();
                    (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
                })
                .collect();
            files.sort();
            files
        })
        .collect();
    !outputs[0].is_empty() && outputs[0] == outputs[1]
}

fn criterion_4(ratios: &[(String, f64)]) -> Line {
    let worst = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Line {
        id: 4,
        pass: !ratios.is_empty() && worst <= 1.0 + 1e-9,
        detail: format!(
            "q-norm bound over {} trajectories: worst |q(t)|/|q0| = 1 + {:.2e} (<= 1 + 1e-9)",
            ratios.len(),
            worst - 1.0
        ),
    }
}

fn main() -> ExitCode {
    let mut lines: Vec<Line> = Vec::new();
    let run = |id: u8, f: &dyn Fn() -> Line, lines: &mut Vec<Line>| {
        if selected(id) {
            let l = f();
            println!("criterion {}: {} ({})", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
            lines.push(l);
        }
    };
    run(1, &criterion_1, &mut lines);
    run(2, &criterion_2, &mut lines);
    run(3, &criterion_3, &mut lines);
    run(7, &criterion_7, &mut lines);
    run(8, &criterion_8, &mut lines);

    let want4 = selected(4);
    let mut ratios: Vec<(String, f64)> = Vec::new();
    let mut energy = None;
    if selected(5) || want4 || selected(10) {
        let e = energy_study();
        for (dt, t) in e.dts.iter().zip(&e.runs) {
            ratios.push((format!("energy dt={dt}"), q_ratio(t)));
        }
        if selected(5) {
            run(5, &|| criterion_5(&e), &mut lines);
        }
        energy = Some(e);
    }
    if selected(6) || want4 {
        let p = parallel_runs();
        for (n, t) in p.runs.iter().enumerate() {
            ratios.push((format!("parallel {n}"), q_ratio(t)));
        }
        if selected(6) {
            run(6, &|| criterion_6(&p), &mut lines);
        }
    }
    let mut sweep = None;
    if selected(9) || want4 || selected(10) {
        let cfg = shipped_sweep();
        let t0 = Instant::now();
        let r = run_sweep(&cfg).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        ratios.push(("sweep reference".into(), r.reference.q_ratio));
        for row in &r.rows {
            ratios.push((format!("sweep a={}", row.alpha), row.q_ratio));
        }
        if selected(9) {
            run(9, &|| criterion_9(&r, secs), &mut lines);
        }
        sweep = Some(r);
    }
    if want4 {
        run(4, &|| criterion_4(&ratios), &mut lines);
    }
    if selected(10) {
        run(
            10,
            &|| {
                // rerun with a different worker count
                let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
                let again = pool.install(|| run_sweep(&shipped_sweep()).unwrap());
                let first = sweep.as_ref().expect("sweep ran");
                let sweep_same = again.csv() == first.csv() && again.summary() == first.summary();
                let e = energy.as_ref().expect("energy ran");
                let g = make_grid(2.0, 32, 64).unwrap();
                let d = Dynamics::new(&g, 0.1).unwrap();
                let s0 = d.initial_state(&Datum::Cell.velocity(&g).unwrap()).unwrap();
                let rerun = integrate(&s0, 1.0, &StepConfig::with_dt(1e-3), &d, &IntegrateOptions::every(20)).unwrap();
                let energy_same = monitors_csv(&rerun.monitors) == monitors_csv(&e.runs[2].monitors);
                let shipped: Vec<String> = [("corrector", "corrector.cfg"), ("parallel", "parallel.cfg"), ("project", "project.cfg")]
                    .iter()
                    .map(|(cmd, cfg)| format!("{cmd} {}", cli_reruns_match(cmd, cfg)))
                    .collect();
                let cli_same = shipped.iter().all(|s| s.ends_with("true"));
                Line {
                    id: 10,
                    pass: sweep_same && energy_same && cli_same,
                    detail: format!(
                        "bit-identical reruns: sweep {sweep_same} (default pool vs 3 workers), energy run {energy_same}, {}",
                        shipped.join(", ")
                    ),
                }
            },
            &mut lines,
        );
    }
    lines.sort_by_key(|l| l.id);
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| l.id.to_string()).collect();
    println!("summary:");
    for l in &lines {
        println!("  criterion {:>2}: {}", l.id, if l.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}

//! Boundary-layer corrector `u_b = perp grad (z psi)` with `z = xi(rho / delta)`,
//! and the scaling study of its four size functionals.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::fit::loglog_slope;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::report::{self, Series};

/// Fewest nodes each collar must contain for the layer to count as resolved.
pub const MIN_COLLAR_NODES: usize = 8;
/// Largest admissible wall value of the stream function.
pub const WALL_TOL: f64 = 1e-9;
/// Largest admissible tangential trace mismatch between `u_b` and the flow.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("layer width must lie in (0, 1/2), got {0}")]
    BadWidth(f64),
    #[error("collar of width {delta} holds {nodes} nodes, need at least {MIN_COLLAR_NODES}")]
    Unresolved { delta: f64, nodes: usize },
    #[error("stream function reaches {0:e} on the walls")]
    WallValue(f64),
    #[error("tangential trace mismatch {0:e}")]
    TraceMismatch(f64),
    #[error("stream rate lives on a different grid")]
    GridMismatch,
    #[error("widths must form a halving ladder")]
    NotDyadic,
    #[error("only {0} resolvable widths, need at least 4")]
    TooFewWidths(usize),
    #[error("exponent must lie in (0, 2), got {0}")]
    BadExponent(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cutoff profile on `[0, 1]`, identically zero beyond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `(1 - r)^3 (1 + 3r + 6r^2)`, C2 at `r = 1`.
    #[default]
    Quintic,
    /// `1 - 35r^4 + 84r^5 - 70r^6 + 20r^7`, C3 at `r = 1`.
    Septic,
}

impl CutoffProfile {
    /// `(xi, xi', xi'')` at `r >= 0`.
    pub fn eval(self, r: f64) -> (f64, f64, f64) {
        if r >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let s = 1.0 - r;
        match self {
            Self::Quintic => (
                s * s * s * (1.0 + 3.0 * r + 6.0 * r * r),
                -30.0 * r * r * s * s,
                -60.0 * r * s * (1.0 - 2.0 * r),
            ),
            Self::Septic => (
                s.powi(4) * (1.0 + 4.0 * r + 10.0 * r * r + 20.0 * r.powi(3)),
                -140.0 * r.powi(3) * s.powi(3),
                -420.0 * r * r * s * s * (1.0 - 2.0 * r),
            ),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Quintic => "quintic",
            Self::Septic => "septic",
        }
    }
}

impl std::str::FromStr for CutoffProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quintic" => Ok(Self::Quintic),
            "septic" => Ok(Self::Septic),
            _ => Err(format!("unknown cutoff profile `{s}` (quintic, septic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    delta: f64,
    pub profile: CutoffProfile,
}

impl Cutoff {
    pub fn new(delta: f64, profile: CutoffProfile) -> Result<Self, CorrectorError> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(CorrectorError::BadWidth(delta));
        }
        Ok(Self { delta, profile })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `z(x2) = xi(rho / delta)` with its first two `x2` derivatives.
    pub fn z(&self, x2: f64) -> (f64, f64, f64) {
        let (rho, sign) = if x2 <= 0.5 { (x2, 1.0) } else { (1.0 - x2, -1.0) };
        let (v, d1, d2) = self.profile.eval(rho / self.delta);
        (v, sign * d1 / self.delta, d2 / (self.delta * self.delta))
    }
}

/// Distance to the nearer wall.
pub fn wall_distance(grid: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(grid, |_, y| y.min(1.0 - y))
}

/// Number of `x2` nodes in the lower and upper collars `{rho < delta}`.
pub fn collar_nodes(grid: &Grid, delta: f64) -> (usize, usize) {
    let x = grid.x2_nodes();
    let lo = x.iter().filter(|&&y| y < delta).count();
    let hi = x.iter().filter(|&&y| 1.0 - y < delta).count();
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Functionals {
    pub ub_l2: f64,
    pub grad_ub_l2: f64,
    pub rho2_grad_ub_linf: f64,
    pub rho_grad_ub_l2: f64,
}

impl Functionals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.ub_l2, self.grad_ub_l2, self.rho2_grad_ub_linf, self.rho_grad_ub_l2]
    }
}

/// Velocity gradient stored as `[d1 u1, d2 u1, d1 u2, d2 u2]`.
pub type Gradient = [ScalarField; 4];

#[derive(Debug, Clone)]
pub struct CorrectorBundle {
    pub cutoff: Cutoff,
    pub rho: ScalarField,
    pub z: ScalarField,
    pub u_b: VectorField,
    pub grad_u_b: Gradient,
    pub dt_u_b: VectorField,
    pub functionals: Functionals,
    /// Largest `|u_flow - u_b|` on the walls, both components.
    pub trace_defect: f64,
}

impl CorrectorBundle {
    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    /// Divergence from the stored gradient.
    pub fn divergence(&self) -> ScalarField {
        self.grad_u_b[0].add(&self.grad_u_b[3])
    }

    /// Largest `|u_b|` over nodes with `rho >= delta`.
    pub fn outside_max(&self) -> f64 {
        let d = self.cutoff.delta;
        let (r, a, b) = (self.rho.values(), self.u_b.u1.values(), self.u_b.u2.values());
        (0..r.len())
            .filter(|&n| r[n] >= d)
            .map(|n| a[n].abs().max(b[n].abs()))
            .fold(0.0, f64::max)
    }
}

/// Product-rule evaluation of `perp grad (z psi)` and its gradient. The
/// cutoff enters only through its closed-form derivatives, so the result
/// vanishes exactly where `z` does.
fn cut_perp_gradient(psi: &ScalarField, cutoff: &Cutoff) -> (VectorField, Gradient) {
    let g = psi.grid();
    let n2 = g.n2();
    let zs: Vec<(f64, f64, f64)> = g.x2_nodes().iter().map(|&y| cutoff.z(y)).collect();
    let p = psi.values();
    let p1 = psi.dx1(1);
    let p2 = psi.dx2(1);
    let p11 = psi.dx1(2);
    let p12 = psi.deriv(1, 1);
    let p22 = psi.dx2(2);
    let (p1, p2, p11, p12, p22) = (p1.values(), p2.values(), p11.values(), p12.values(), p22.values());
    let len = p.len();
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; len]);
    for n in 0..len {
        let (z, dz, ddz) = zs[n % n2];
        if z == 0.0 && dz == 0.0 && ddz == 0.0 {
            continue;
        }
        out[0][n] = -(z * p2[n] + dz * p[n]);
        out[1][n] = z * p1[n];
        out[2][n] = -(z * p12[n] + dz * p1[n]);
        out[3][n] = -(z * p22[n] + 2.0 * dz * p2[n] + ddz * p[n]);
        out[4][n] = z * p11[n];
        out[5][n] = z * p12[n] + dz * p1[n];
    }
    let [u1, u2, a, b, c, d] = out.map(|v| ScalarField::from_values(g, v).expect("grid sized"));
    (VectorField::new(u1, u2), [a, b, c, d])
}

fn functionals(u: &VectorField, grad: &Gradient, rho: &ScalarField) -> Functionals {
    let g = rho.grid();
    let sq: f64 = grad.iter().map(|f| f.inner(f)).sum();
    let frob: Vec<f64> = (0..g.len())
        .map(|n| grad.iter().map(|f| f.values()[n].powi(2)).sum::<f64>().sqrt())
        .collect();
    let r = rho.values();
    let linf = frob.iter().zip(r).map(|(f, r)| r * r * f).fold(0.0, f64::max);
    let weighted = ScalarField::from_values(g, frob.iter().zip(r).map(|(f, r)| r * f).collect())
        .expect("grid sized")
        .l2();
    Functionals {
        ub_l2: u.l2(),
        grad_ub_l2: sq.sqrt(),
        rho2_grad_ub_linf: linf,
        rho_grad_ub_l2: weighted,
    }
}

pub fn build_corrector(psi_bar: &ScalarField, cutoff: Cutoff) -> Result<CorrectorBundle, CorrectorError> {
    build_corrector_with_rate(psi_bar, None, cutoff)
}

/// As [`build_corrector`]; `dt_psi_bar` feeds the time derivative of `u_b`.
pub fn build_corrector_with_rate(
    psi_bar: &ScalarField,
    dt_psi_bar: Option<&ScalarField>,
    cutoff: Cutoff,
) -> Result<CorrectorBundle, CorrectorError> {
    let g = psi_bar.grid().clone();
    let (lo, hi) = collar_nodes(&g, cutoff.delta);
    if lo.min(hi) < MIN_COLLAR_NODES {
        return Err(CorrectorError::Unresolved {
            delta: cutoff.delta,
            nodes: lo.min(hi),
        });
    }
    let wall = psi_bar.wall_max();
    if !(wall <= WALL_TOL) {
        return Err(CorrectorError::WallValue(wall));
    }
    let rho = wall_distance(&g);
    let z = ScalarField::from_fn(&g, |_, y| cutoff.z(y).0);
    let (u_b, grad_u_b) = cut_perp_gradient(psi_bar, &cutoff);
    let dt_u_b = match dt_psi_bar {
        Some(r) => {
            if !Arc::ptr_eq(r.grid(), &g) && **r.grid() != *g {
                return Err(CorrectorError::GridMismatch);
            }
            let rw = r.wall_max();
            if !(rw <= WALL_TOL) {
                return Err(CorrectorError::WallValue(rw));
            }
            cut_perp_gradient(r, &cutoff).0
        }
        None => VectorField::zeros(&g),
    };
    let flow = psi_bar.perp_gradient();
    let n2 = g.n2();
    let mut trace_defect: f64 = 0.0;
    for i in 0..g.n1() {
        for j in [0, n2 - 1] {
            let n = g.idx(i, j);
            trace_defect = trace_defect
                .max((flow.u1.values()[n] - u_b.u1.values()[n]).abs())
                .max((flow.u2.values()[n] - u_b.u2.values()[n]).abs());
        }
    }
    if !(trace_defect <= TRACE_TOL) {
        return Err(CorrectorError::TraceMismatch(trace_defect));
    }
    let functionals = functionals(&u_b, &grad_u_b, &rho);
    Ok(CorrectorBundle {
        cutoff,
        rho,
        z,
        u_b,
        grad_u_b,
        dt_u_b,
        functionals,
        trace_defect,
    })
}

/// `delta = alpha^exponent`; any exponent in `(0, 2)` sends both `delta`
/// and `alpha^2 / delta` to zero.
pub fn delta_schedule(alpha: f64, exponent: f64) -> Result<f64, CorrectorError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CorrectorError::BadAlpha(alpha));
    }
    if !(exponent > 0.0 && exponent < 2.0) {
        return Err(CorrectorError::BadExponent(exponent));
    }
    Ok(alpha.powf(exponent))
}

/// Exponents the four functionals should follow for a flow that slips at the wall.
pub const EXPECTED_SLOPES: [f64; 4] = [0.5, -0.5, 1.0, 0.5];
pub const FUNCTIONAL_NAMES: [&str; 4] = ["ub_L2", "grad_ub_L2", "rho2_grad_ub_Linf", "rho_grad_ub_L2"];

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub profile: CutoffProfile,
    /// Resolved widths in decreasing order.
    pub rows: Vec<(f64, Functionals)>,
    /// Widths dropped as unresolved.
    pub skipped: Vec<f64>,
    /// `None` when every functional vanishes.
    pub slopes: Option<[f64; 4]>,
}

impl ScalingReport {
    pub fn degenerate(&self) -> bool {
        self.slopes.is_none()
    }

    /// Per functional: slope within `tol` of its expected exponent.
    pub fn within(&self, tol: f64) -> [bool; 4] {
        match self.slopes {
            Some(s) => std::array::from_fn(|i| (s[i] - EXPECTED_SLOPES[i]).abs() <= tol),
            None => [false; 4],
        }
    }

    pub fn csv(&self) -> String {
        let mut header = vec!["delta"];
        header.extend(FUNCTIONAL_NAMES);
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|(d, f)| {
                let mut r = vec![*d];
                r.extend(f.as_array());
                r
            })
            .collect();
        report::csv(&header, &rows)
    }

    pub fn svg(&self) -> String {
        let series: Vec<Series> = (0..4)
            .map(|i| {
                let name = match self.slopes {
                    Some(s) => format!("{} ({:.2})", FUNCTIONAL_NAMES[i], s[i]),
                    None => FUNCTIONAL_NAMES[i].to_string(),
                };
                Series::new(name, self.rows.iter().map(|(d, f)| (*d, f.as_array()[i])).collect())
            })
            .collect();
        report::loglog_svg("corrector scaling", "delta", "functional", &series)
    }

    /// Writes `scaling.csv` and `scaling.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CorrectorError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scaling.csv"), self.csv())?;
        std::fs::write(dir.join("scaling.svg"), self.svg())?;
        Ok(())
    }
}

/// Builds the corrector for every width and regresses each functional on
/// `delta` in log-log coordinates.
pub fn scaling_study(
    psi_bar: &ScalarField,
    deltas: &[f64],
    profile: CutoffProfile,
) -> Result<ScalingReport, CorrectorError> {
    let mut ds = deltas.to_vec();
    ds.sort_by(|a, b| b.total_cmp(a));
    for d in &ds {
        Cutoff::new(*d, profile)?;
    }
    if ds.windows(2).any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-9) {
        return Err(CorrectorError::NotDyadic);
    }
    let built: Vec<Result<(f64, Functionals), CorrectorError>> = ds
        .par_iter()
        .map(|&d| build_corrector(psi_bar, Cutoff::new(d, profile)?).map(|b| (d, b.functionals)))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (d, r) in ds.iter().zip(built) {
        match r {
            Ok(row) => rows.push(row),
            Err(CorrectorError::Unresolved { .. }) => {
                log::warn!("width {d} is unresolved on this grid, skipped");
                skipped.push(*d);
            }
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 4 {
        return Err(CorrectorError::TooFewWidths(rows.len()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let all_zero = rows.iter().all(|(_, f)| f.as_array().iter().all(|v| *v == 0.0));
    let slopes = if all_zero {
        None
    } else {
        let mut s = [f64::NAN; 4];
        for (i, si) in s.iter_mut().enumerate() {
            let ys: Vec<f64> = rows.iter().map(|r| r.1.as_array()[i]).collect();
            *si = loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
        }
        Some(s)
    };
    Ok(ScalingReport {
        profile,
        rows,
        skipped,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn quartic(g: &Arc<Grid>) -> ScalarField {
        ScalarField::from_fn(g, |_, y| (y * (1.0 - y)).powi(2))
    }

    #[test]
    fn profiles_meet_edge_conditions() {
        for p in [CutoffProfile::Quintic, CutoffProfile::Septic] {
            assert_eq!(p.eval(0.0), (1.0, 0.0, 0.0));
            assert_eq!(p.eval(1.0), (0.0, 0.0, 0.0));
            assert_eq!(p.eval(3.0), (0.0, 0.0, 0.0));
            let (v, d1, d2) = p.eval(1.0 - 1e-9);
            assert!(v.abs() < 1e-20 && d1.abs() < 1e-12 && d2.abs() < 1e-6);
            // derivatives against central differences
            for r in [0.1, 0.37, 0.5, 0.81] {
                let h = 1e-5;
                let fd1 = (p.eval(r + h).0 - p.eval(r - h).0) / (2.0 * h);
                let fd2 = (p.eval(r + h).1 - p.eval(r - h).1) / (2.0 * h);
                assert!((fd1 - p.eval(r).1).abs() < 1e-8, "{p:?} {r}");
                assert!((fd2 - p.eval(r).2).abs() < 1e-7, "{p:?} {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn profile_is_bounded(r in 0.0f64..1.5) {
            for p in [CutoffProfile::Quintic, CutoffProfile::Septic] {
                let v = p.eval(r).0;
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn layer_mass_shrinks_with_width(k in 3i32..5, c in 0.5f64..2.0) {
            let g = make_grid(1.0, 4, 129).unwrap();
            let psi = ScalarField::from_fn(&g, |_, y| c * (PI * y).sin() + (y * (1.0 - y)).powi(2));
            let d = 2f64.powi(-k);
            let a = build_corrector(&psi, Cutoff::new(d, CutoffProfile::Quintic).unwrap()).unwrap();
            let b = build_corrector(&psi, Cutoff::new(d / 2.0, CutoffProfile::Quintic).unwrap()).unwrap();
            prop_assert!(b.functionals.ub_l2 < a.functionals.ub_l2);
        }
    }

    #[test]
    fn zero_stream_gives_zero_corrector() {
        let g = make_grid(2.0, 8, 128).unwrap();
        let b = build_corrector(&ScalarField::zeros(&g), Cutoff::new(0.1, CutoffProfile::Quintic).unwrap()).unwrap();
        assert_eq!(b.u_b.linf(), 0.0);
        assert_eq!(b.functionals, Functionals::default());
        let deltas = [0.125, 0.0625, 0.03125, 0.015625];
        let r = scaling_study(&ScalarField::zeros(&g), &deltas, CutoffProfile::Quintic).unwrap();
        assert!(r.degenerate());
        assert_eq!(r.within(10.0), [false; 4]);
    }

    #[test]
    fn support_trace_and_divergence() {
        let g = make_grid(2.0, 16, 96).unwrap();
        let psi = ScalarField::from_fn(&g, |x, y| {
            (y * (1.0 - y)).powi(2) * (1.0 + 0.5 * (PI * x).cos()) + (PI * y).sin() * 0.1
        });
        let b = build_corrector(&psi, Cutoff::new(0.2, CutoffProfile::Quintic).unwrap()).unwrap();
        assert_eq!(b.outside_max(), 0.0);
        assert!(b.trace_defect < 1e-12);
        assert!(b.divergence().linf() < 1e-12);
        assert!(b.u_b.linf() > 0.0);
        assert_eq!(b.dt_u_b.linf(), 0.0);
    }

    #[test]
    fn nodal_values_match_closed_form_on_two_grids() {
        let d = 0.125;
        let cut = Cutoff::new(d, CutoffProfile::Quintic).unwrap();
        let exact = |y: f64| {
            let p = (y * (1.0 - y)).powi(2);
            let dp = 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
            let rho = y.min(1.0 - y);
            let r = rho / d;
            let z = if r >= 1.0 { 0.0 } else { (1.0 - r).powi(3) * (1.0 + 3.0 * r + 6.0 * r * r) };
            let dr = if r >= 1.0 { 0.0 } else { -30.0 * r * r * (1.0 - r).powi(2) };
            let dz = if y <= 0.5 { dr / d } else { -dr / d };
            -(z * dp + dz * p)
        };
        for n2 in [64, 128] {
            let g = make_grid(1.0, 4, n2).unwrap();
            let b = build_corrector(&quartic(&g), cut).unwrap();
            let err = g
                .x2_nodes()
                .iter()
                .enumerate()
                .map(|(j, &y)| (b.u_b.u1.at(0, j) - exact(y)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "n2 = {n2}: {err}");
        }
    }

    #[test]
    fn functionals_match_fine_quadrature() {
        // psi = sin(pi y) / pi slips at the wall; integrals by composite Simpson
        let d = 0.125;
        let cut = Cutoff::new(d, CutoffProfile::Quintic).unwrap();
        let l = 1.0;
        let g = make_grid(l, 4, 160).unwrap();
        let psi = ScalarField::from_fn(&g, |_, y| (PI * y).sin() / PI);
        let b = build_corrector(&psi, cut).unwrap();
        let field = |y: f64| {
            let (z, dz, ddz) = cut.z(y);
            let (p, dp, ddp) = ((PI * y).sin() / PI, (PI * y).cos(), -PI * (PI * y).sin());
            let u = -(z * dp + dz * p);
            let gu = -(z * ddp + 2.0 * dz * dp + ddz * p);
            (u, gu, y.min(1.0 - y))
        };
        let m = 200_000;
        let h = 1.0 / m as f64;
        let (mut a, mut c, mut e) = (0.0, 0.0, 0.0);
        for k in 0..=m {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let (u, gu, r) = field(k as f64 * h);
            a += w * u * u;
            c += w * gu * gu;
            e += w * r * r * gu * gu;
        }
        let s = h / 3.0 * l;
        let f = b.functionals;
        assert!((f.ub_l2 / (s * a).sqrt() - 1.0).abs() < 1e-3);
        assert!((f.grad_ub_l2 / (s * c).sqrt() - 1.0).abs() < 1e-3);
        assert!((f.rho_grad_ub_l2 / (s * e).sqrt() - 1.0).abs() < 1e-3);
        let linf = (0..=20_000)
            .map(|k| {
                let (_, gu, r) = field(k as f64 / 20_000.0);
                r * r * gu.abs()
            })
            .fold(0.0, f64::max);
        assert!((f.rho2_grad_ub_linf / linf - 1.0).abs() < 2e-2);
    }

    #[test]
    fn slipping_flow_follows_expected_exponents() {
        let g = make_grid(1.0, 4, 160).unwrap();
        let psi = ScalarField::from_fn(&g, |_, y| (PI * y).sin() / PI);
        let deltas = [0.125, 0.0625, 0.03125, 0.015625];
        let r = scaling_study(&psi, &deltas, CutoffProfile::Quintic).unwrap();
        assert_eq!(r.within(0.15), [true; 4], "{:?}", r.slopes);
        let csv = r.csv();
        assert!(csv.starts_with("delta,ub_L2,grad_ub_L2,rho2_grad_ub_Linf,rho_grad_ub_L2\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn rate_field_is_linear_in_stream() {
        let g = make_grid(2.0, 8, 96).unwrap();
        let psi = quartic(&g);
        let rate = psi.scale(-3.0);
        let cut = Cutoff::new(0.2, CutoffProfile::Septic).unwrap();
        let b = build_corrector_with_rate(&psi, Some(&rate), cut).unwrap();
        assert!(b.dt_u_b.sub(&b.u_b.scale(-3.0)).linf() < 1e-13);
    }

    #[test]
    fn rejections() {
        let g = make_grid(1.0, 4, 64).unwrap();
        assert!(matches!(Cutoff::new(0.5, CutoffProfile::Quintic), Err(CorrectorError::BadWidth(_))));
        assert!(matches!(Cutoff::new(0.0, CutoffProfile::Quintic), Err(CorrectorError::BadWidth(_))));
        let thin = Cutoff::new(2f64.powi(-6), CutoffProfile::Quintic).unwrap();
        assert!(matches!(build_corrector(&quartic(&g), thin), Err(CorrectorError::Unresolved { .. })));
        let lifted = ScalarField::from_fn(&g, |_, y| 1.0 + y);
        let cut = Cutoff::new(0.25, CutoffProfile::Quintic).unwrap();
        assert!(matches!(build_corrector(&lifted, cut), Err(CorrectorError::WallValue(_))));
        // at n2 = 64 the thinnest width drops out, leaving three
        let deltas = [0.125, 0.0625, 0.03125, 0.015625];
        assert!(matches!(
            scaling_study(&quartic(&g), &deltas, CutoffProfile::Quintic),
            Err(CorrectorError::TooFewWidths(3))
        ));
        assert!(matches!(
            scaling_study(&quartic(&g), &[0.2, 0.1, 0.04], CutoffProfile::Quintic),
            Err(CorrectorError::NotDyadic)
        ));
    }

    #[test]
    fn schedule() {
        assert!((delta_schedule(0.1, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(delta_schedule(0.1, 2.0), Err(CorrectorError::BadExponent(_))));
        assert!(matches!(delta_schedule(0.1, 0.0), Err(CorrectorError::BadExponent(_))));
        assert!(matches!(delta_schedule(1.0, 1.0), Err(CorrectorError::BadAlpha(_))));
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 1..8 {
            let a = 2f64.powi(-k);
            let d = delta_schedule(a, 1.0).unwrap();
            let next = (d, a * a / d);
            assert!(next.0 < prev.0 && next.1 < prev.1);
            prev = next;
        }
    }
}

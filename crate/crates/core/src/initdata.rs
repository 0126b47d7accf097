//! Wall-vanishing initial-data families `u0^a -> u0` for the alpha limit.
//!
//! Two constructions are provided:
//! * projection onto the first `m = floor(1 / (a^2 lambda_1))` Stokes
//!   eigenfields of the channel ([`stokes_eigenbasis`], [`project_family`]);
//! * mollification of the stream function near the walls with a mask of
//!   width `a^(2/3)` ([`mollify_family`]).
//!
//! [`certify_e1`] turns the asymptotic requirements on such families into
//! slope tests over a geometric ladder of `a`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::elliptic::{wall_jump_of, EllipticError, EulerStreamSolver, StreamSolver};
use crate::fit::loglog_slope;
use crate::grid::{read_eaf1, write_eaf1, Eaf1Error, Grid, NormReport, ScalarField, VectorField};

/// Eigenpairs whose strong-form residual exceeds this are discarded.
pub const RESIDUAL_FILTER: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("k_max = {k_max} must be below N1/2 = {limit}")]
    BadKMax { k_max: usize, limit: usize },
    #[error("per_mode_count = {count} must be positive and below N2 - 4 = {limit}")]
    BadCount { count: usize, limit: usize },
    #[error("eigensolver failed for Fourier mode {0}")]
    Eigensolver(usize),
    #[error("basis exhausted: m = {required} eigenfields needed, {available} certified")]
    BasisExhausted { required: usize, available: usize },
    #[error("initial velocity rejected: {0}")]
    BadDatum(String),
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("certification needs at least 4 members, got {0}")]
    TooFewMembers(usize),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("eigenbasis file: {0}")]
    File(#[from] Eaf1Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest line {0}")]
    Manifest(usize),
}

/// `x1` dependence of an eigenfield.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `k = 0`: parallel flow `(w(x2), 0)`.
    Shear,
    /// Stream function `psi(x2) cos(k x1)`.
    Cos,
    /// Stream function `psi(x2) sin(k x1)`.
    Sin,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub k: usize,
    pub parity: Parity,
    /// Relative strong-form residual of the wall-normal profile.
    pub residual: f64,
    pub field: VectorField,
}

#[derive(Debug, Clone)]
pub struct EigenBasis {
    grid: Arc<Grid>,
    /// Sorted ascending by eigenvalue.
    pub pairs: Vec<EigenPair>,
    /// Every Stokes eigenvalue below this bound is in `pairs`.
    pub complete_below: f64,
    /// `(k, lambda, residual)` of eigenpairs removed by the residual filter.
    pub rejected: Vec<(usize, f64, f64)>,
}

struct ModeSpectrum {
    k: usize,
    /// Accepted `(lambda, residual, profile)`, ascending.
    accepted: Vec<(f64, f64, Vec<f64>)>,
    rejected: Vec<(f64, f64)>,
    /// Smallest eigenvalue of this family not kept.
    next: f64,
}

/// Orthonormal basis of the null space of the constraint rows `c`.
fn constrained_basis(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.ncols();
    let cct = c * c.transpose();
    let inv = cct.try_inverse().expect("independent boundary constraints");
    let p = DMatrix::<f64>::identity(n, n) - c.transpose() * inv * c;
    let eig = SymmetricEigen::new(p);
    let mut cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_unstable();
    DMatrix::from_fn(n, cols.len(), |r, j| eig.eigenvectors[(r, cols[j])])
}

fn weighted_norm(v: &[f64], w: &[f64], rows: std::ops::Range<usize>) -> f64 {
    rows.map(|j| w[j] * v[j] * v[j]).sum::<f64>().sqrt()
}

/// Relative strong-form residual `|A psi - lambda B psi| / |lambda B psi|` on `rows`.
fn strong_residual(
    op_a: &DMatrix<f64>,
    op_b: &DMatrix<f64>,
    lambda: f64,
    profile: &[f64],
    w: &[f64],
    rows: std::ops::Range<usize>,
) -> f64 {
    let pv = DVector::from_column_slice(profile);
    let lhs = op_a * &pv;
    let rhs = op_b * &pv;
    let r: Vec<f64> = lhs.iter().zip(rhs.iter()).map(|(l, m)| l - lambda * m).collect();
    let scaled: Vec<f64> = rhs.iter().map(|m| lambda * m).collect();
    weighted_norm(&r, w, rows.clone()) / weighted_norm(&scaled, w, rows)
}

fn orient(profile: &mut [f64]) {
    let big = profile.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if big < 0.0 {
        profile.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Candidate `(lambda, profile)` pairs of one mode, ascending.
type Candidates = Vec<(f64, Vec<f64>)>;

/// Real positive eigenpairs of `A psi = lambda B psi` collocated on `rows`,
/// with the wall conditions `C psi = 0` imposed through a constrained basis
/// (one collocation row dropped per condition).
fn collocated_candidates(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
    k: usize,
) -> Result<Candidates, InitError> {
    let q = constrained_basis(c);
    let dim = q.ncols();
    let p = (b * &q).rows(rows.start, dim).into_owned();
    let r = (a * &q).rows(rows.start, dim).into_owned();
    let m = p.clone().lu().solve(&r).ok_or(InitError::Eigensolver(k))?;
    let mut lambdas: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.re > 0.0 && z.im.abs() <= 1e-8 * z.re)
        .map(|z| z.re)
        .collect();
    lambdas.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        // inverse iteration on the pencil R - mu P
        let mu = lambda * (1.0 + 1e-12);
        let lu = (&r - &p * mu).lu();
        let mut x = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 * 0.7).sin());
        for _ in 0..3 {
            let rhs = &p * &x;
            x = match lu.solve(&rhs) {
                Some(y) => y,
                None => break,
            };
            let s = x.amax();
            if s == 0.0 || !s.is_finite() {
                break;
            }
            x /= s;
        }
        let px = &p * &x;
        let rx = &r * &x;
        let refined = px.dot(&rx) / px.dot(&px);
        out.push((refined, (&q * &x).iter().copied().collect()));
    }
    Ok(out)
}

fn wall_constraints(grid: &Grid, clamped: bool) -> DMatrix<f64> {
    let n = grid.n2();
    let d1 = grid.diff_x2();
    let mut c = DMatrix::<f64>::zeros(if clamped { 4 } else { 2 }, n);
    c[(0, 0)] = 1.0;
    c[(1, n - 1)] = 1.0;
    if clamped {
        c.row_mut(2).copy_from(&d1.row(0));
        c.row_mut(3).copy_from(&d1.row(n - 1));
        for r in 2..4 {
            let s = c.row(r).amax();
            c.row_mut(r).scale_mut(1.0 / s);
        }
    }
    c
}

fn laplacian_1d(grid: &Grid, kappa: f64) -> DMatrix<f64> {
    let mut lap = grid.diff2_x2().clone();
    for j in 0..grid.n2() {
        lap[(j, j)] -= kappa * kappa;
    }
    lap
}

/// Velocity inner product of two wall-normal profiles of the same mode
/// (up to the `x1` normalisation).
fn profile_inner(grid: &Grid, kappa: f64, a: &[f64], b: &[f64]) -> f64 {
    let w = grid.weights_x2();
    if kappa == 0.0 {
        return (0..a.len()).map(|j| w[j] * a[j] * b[j]).sum();
    }
    let d1 = grid.diff_x2();
    let da = d1 * DVector::from_column_slice(a);
    let db = d1 * DVector::from_column_slice(b);
    (0..a.len()).map(|j| w[j] * (da[j] * db[j] + kappa * kappa * a[j] * b[j])).sum()
}

fn mode_spectrum(grid: &Grid, k: usize, count: usize) -> Result<ModeSpectrum, InitError> {
    let n = grid.n2();
    let w = grid.weights_x2();
    let kappa = grid.wavenumber(k);
    // k = 0: -w'' = lambda w with Dirichlet ends; k > 0: stream form
    // (D^2 - k^2)^2 psi = -lambda (D^2 - k^2) psi with clamped ends
    let (op_a, op_b, rows) = if k == 0 {
        (-grid.diff2_x2(), DMatrix::identity(n, n), 1..n - 1)
    } else {
        let lap = laplacian_1d(grid, kappa);
        (&lap * &lap, -lap, 2..n - 2)
    };
    let c = wall_constraints(grid, k > 0);
    let candidates = collocated_candidates(&op_a, &op_b, &c, rows.clone(), k)?;
    let mut accepted: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let mut rejected = Vec::new();
    let mut next = f64::INFINITY;
    for (lambda, mut profile) in candidates {
        if accepted.len() == count {
            next = lambda;
            break;
        }
        // Gram-Schmidt against the kept profiles, then unit velocity norm
        for (_, _, prev) in &accepted {
            let c = profile_inner(grid, kappa, &profile, prev);
            profile.iter_mut().zip(prev).for_each(|(v, p)| *v -= c * p);
        }
        let norm = profile_inner(grid, kappa, &profile, &profile).sqrt();
        profile.iter_mut().for_each(|v| *v /= norm);
        orient(&mut profile);
        let residual = strong_residual(&op_a, &op_b, lambda, &profile, w, rows.clone());
        if !(lambda > 0.0 && residual <= RESIDUAL_FILTER) {
            rejected.push((lambda, residual));
            next = next.min(lambda.max(0.0));
            continue;
        }
        accepted.push((lambda, residual, profile));
    }
    Ok(ModeSpectrum {
        k,
        accepted,
        rejected,
        next,
    })
}

fn eigenfield(grid: &Arc<Grid>, k: usize, parity: Parity, profile: &[f64]) -> VectorField {
    let n2 = grid.n2();
    let l = grid.length();
    let kappa = grid.wavenumber(k);
    let x1 = grid.x1_nodes();
    match parity {
        Parity::Shear => {
            let s = (1.0 / l).sqrt();
            let u1: Vec<f64> = (0..grid.len()).map(|p| s * profile[p % n2]).collect();
            VectorField::new(
                ScalarField::from_values(grid, u1).expect("grid-sized"),
                ScalarField::zeros(grid),
            )
        }
        Parity::Cos | Parity::Sin => {
            let s = (2.0 / l).sqrt();
            let dpsi = grid.diff_x2() * DVector::from_column_slice(profile);
            let mut u1 = vec![0.0; grid.len()];
            let mut u2 = vec![0.0; grid.len()];
            for (i, &x) in x1.iter().enumerate() {
                // stream = psi * c(x1); u = (-psi' c, psi c')
                let (c, dc) = match parity {
                    Parity::Cos => ((kappa * x).cos(), -kappa * (kappa * x).sin()),
                    _ => ((kappa * x).sin(), kappa * (kappa * x).cos()),
                };
                for j in 0..n2 {
                    u1[i * n2 + j] = -s * dpsi[j] * c;
                    u2[i * n2 + j] = s * profile[j] * dc;
                }
            }
            VectorField::new(
                ScalarField::from_values(grid, u1).expect("grid-sized"),
                ScalarField::from_values(grid, u2).expect("grid-sized"),
            )
        }
    }
}

/// Stokes eigenpairs of the channel for Fourier modes `0..=k_max`, at most
/// `per_mode_count` wall-normal profiles per mode (each `k > 0` profile
/// yields a cosine and a sine eigenfield).
pub fn stokes_eigenbasis(grid: &Arc<Grid>, k_max: usize, per_mode_count: usize) -> Result<EigenBasis, InitError> {
    let limit = grid.n1() / 2;
    if k_max >= limit {
        return Err(InitError::BadKMax { k_max, limit });
    }
    let climit = grid.n2() - 4;
    if per_mode_count == 0 || per_mode_count >= climit {
        return Err(InitError::BadCount {
            count: per_mode_count,
            limit: climit,
        });
    }
    let spectra: Vec<ModeSpectrum> = (0..=k_max)
        .into_par_iter()
        .map(|k| mode_spectrum(grid, k, per_mode_count))
        .collect::<Result<_, _>>()?;
    let mut complete_below = f64::INFINITY;
    if k_max + 1 < limit {
        let kappa = grid.wavenumber(k_max + 1);
        complete_below = kappa * kappa + std::f64::consts::PI.powi(2);
    }
    let mut pairs = Vec::new();
    let mut rejected = Vec::new();
    for s in &spectra {
        complete_below = complete_below.min(s.next);
        rejected.extend(s.rejected.iter().map(|&(l, r)| (s.k, l, r)));
        for (lambda, residual, profile) in &s.accepted {
            let parities: &[Parity] = if s.k == 0 {
                &[Parity::Shear]
            } else {
                &[Parity::Cos, Parity::Sin]
            };
            for &parity in parities {
                pairs.push(EigenPair {
                    lambda: *lambda,
                    k: s.k,
                    parity,
                    residual: *residual,
                    field: eigenfield(grid, s.k, parity, profile),
                });
            }
        }
    }
    for (k, l, r) in &rejected {
        log::warn!("discarded eigenpair k = {k}, lambda = {l:.6e}, residual {r:.2e}");
    }
    sort_pairs(&mut pairs);
    Ok(EigenBasis {
        grid: grid.clone(),
        pairs,
        complete_below,
        rejected,
    })
}

fn parity_rank(p: Parity) -> u8 {
    match p {
        Parity::Shear => 0,
        Parity::Cos => 1,
        Parity::Sin => 2,
    }
}

fn sort_pairs(pairs: &mut [EigenPair]) {
    pairs.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then(a.k.cmp(&b.k))
            .then(parity_rank(a.parity).cmp(&parity_rank(b.parity)))
    });
}

impl EigenBasis {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Smallest computed eigenvalue.
    pub fn lambda1(&self) -> f64 {
        self.pairs.first().map_or(f64::NAN, |p| p.lambda)
    }

    /// Leading pairs guaranteed to be the true lowest part of the spectrum.
    pub fn certified_len(&self) -> usize {
        self.pairs.iter().take_while(|p| p.lambda < self.complete_below).count()
    }

    /// Gram matrix of the first `n` eigenfields.
    pub fn gramian(&self, n: usize) -> DMatrix<f64> {
        let n = n.min(self.pairs.len());
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.pairs[i].field.inner(&self.pairs[j].field);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `max |G - I|` over the first `n` eigenfields.
    pub fn gramian_defect(&self, n: usize) -> f64 {
        let g = self.gramian(n);
        let mut d = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                d = d.max((g[(i, j)] - target).abs());
            }
        }
        d
    }

    /// `j,k,lambda,residual` with `j` starting at 1.
    pub fn manifest_csv(&self) -> String {
        let mut s = String::from("j,k,lambda,residual\n");
        for (j, p) in self.pairs.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", j + 1, p.k, p.lambda, p.residual);
        }
        s
    }

    /// Writes `manifest.csv` plus `w{j}_u1.eaf1` / `w{j}_u2.eaf1` per pair.
    pub fn save(&self, dir: &Path) -> Result<(), InitError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.csv"), self.manifest_csv())?;
        for (j, p) in self.pairs.iter().enumerate() {
            write_eaf1(dir.join(format!("w{:04}_u1.eaf1", j + 1)), &p.field.u1)?;
            write_eaf1(dir.join(format!("w{:04}_u2.eaf1", j + 1)), &p.field.u2)?;
        }
        Ok(())
    }

    /// Reads a basis written by [`Self::save`]. Every stored pair is treated
    /// as certified.
    pub fn load(dir: &Path, grid: Option<&Arc<Grid>>) -> Result<Self, InitError> {
        let text = fs::read_to_string(dir.join("manifest.csv"))?;
        let mut pairs = Vec::new();
        let mut grid = grid.cloned();
        for (n, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(InitError::Manifest(n + 1));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| InitError::Manifest(n + 1));
            let j = parse(cols[0])? as usize;
            let k = parse(cols[1])? as usize;
            let lambda = parse(cols[2])?;
            let residual = parse(cols[3])?;
            let u1 = read_eaf1(dir.join(format!("w{j:04}_u1.eaf1")), grid.as_ref())?;
            let g = u1.grid().clone();
            let u2 = read_eaf1(dir.join(format!("w{j:04}_u2.eaf1")), Some(&g))?;
            grid = Some(g);
            let parity = if k == 0 {
                Parity::Shear
            } else if u1.values()[..u1.grid().n2()].iter().any(|v| *v != 0.0) {
                Parity::Cos
            } else {
                Parity::Sin
            };
            pairs.push(EigenPair {
                lambda,
                k,
                parity,
                residual,
                field: VectorField::new(u1, u2),
            });
        }
        let grid = grid.ok_or(InitError::Manifest(1))?;
        Ok(Self {
            grid,
            pairs,
            complete_below: f64::INFINITY,
            rejected: Vec::new(),
        })
    }

    /// `sum_{j <= m} (u, w_j) w_j`.
    pub fn project(&self, u: &VectorField, m: usize) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for p in self.pairs.iter().take(m) {
            let c = u.inner(&p.field);
            out.axpy(c, &p.field);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Projection,
    Mollification,
    /// Assembled by hand.
    Custom,
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub alpha: f64,
    /// Number of eigenfields kept (projection family only).
    pub m: Option<usize>,
    pub u: VectorField,
    pub norms: NormReport,
}

impl FamilyMember {
    pub fn new(alpha: f64, m: Option<usize>, u: VectorField) -> Self {
        let norms = u.norms();
        Self { alpha, m, u, norms }
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationFamily {
    pub kind: FamilyKind,
    pub u0: VectorField,
    /// Sorted by decreasing alpha.
    pub members: Vec<FamilyMember>,
}

/// Rejects velocities that are not divergence-free or cross the walls.
pub fn check_datum(u0: &VectorField) -> Result<(), InitError> {
    if !u0.is_finite() {
        return Err(InitError::BadDatum("non-finite values".into()));
    }
    let scale = 1.0 + u0.h1();
    let div = u0.divergence().l2();
    if div > 1e-8 * scale {
        return Err(InitError::BadDatum(format!("divergence {div:.3e}")));
    }
    let wall = u0.u2.wall_max();
    if wall > 1e-9 * (1.0 + u0.linf()) {
        return Err(InitError::BadDatum(format!("wall-normal velocity {wall:.3e}")));
    }
    Ok(())
}

fn sorted_alphas(alphas: &[f64]) -> Result<Vec<f64>, InitError> {
    let mut a = alphas.to_vec();
    for &x in &a {
        if !(x.is_finite() && x > 0.0) {
            return Err(InitError::BadAlpha(x));
        }
    }
    a.sort_by(|x, y| y.total_cmp(x));
    Ok(a)
}

/// `m = floor(1 / (a^2 lambda_1))`.
pub fn projection_size(alpha: f64, lambda1: f64) -> usize {
    (1.0 / (alpha * alpha * lambda1)).floor() as usize
}

/// Projection of `u0` onto the first `m(a)` eigenfields for each `a`.
pub fn project_family(basis: &EigenBasis, u0: &VectorField, alphas: &[f64]) -> Result<ApproximationFamily, InitError> {
    check_datum(u0)?;
    let alphas = sorted_alphas(alphas)?;
    let lambda1 = basis.lambda1();
    let available = basis.certified_len();
    let mut members = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let m = projection_size(alpha, lambda1);
        if m > available {
            return Err(InitError::BasisExhausted { required: m, available });
        }
        members.push(FamilyMember::new(alpha, Some(m), basis.project(u0, m)));
    }
    Ok(ApproximationFamily {
        kind: FamilyKind::Projection,
        u0: u0.clone(),
        members,
    })
}

/// Wall mask `(1 - exp(-x^2/d^2)) (1 - exp(-(1-x)^2/d^2))`: vanishes with
/// its first derivative at both walls, equals one to within `exp(-1/(4 d^2))`
/// in the middle.
pub fn wall_mask(x2: f64, delta: f64) -> f64 {
    let g = |s: f64| -(-(s * s) / (delta * delta)).exp_m1();
    g(x2) * g(1.0 - x2)
}

/// Width of the mollification mask for a given `a`.
pub fn mollification_width(alpha: f64) -> f64 {
    alpha.powf(2.0 / 3.0)
}

/// `psi^a = c H + mask (psi_0 - c H)` with `H = 3 x2^2 - 2 x2^3` and `c` the
/// wall jump of `u0`; `u0^a = perp grad psi^a`.
pub fn mollify_family(u0: &VectorField, alphas: &[f64]) -> Result<ApproximationFamily, InitError> {
    check_datum(u0)?;
    let alphas = sorted_alphas(alphas)?;
    let grid = u0.grid();
    let c = wall_jump_of(u0);
    let psi0 = EulerStreamSolver::new(grid)?.stream(&u0.curl(), c)?;
    let jump = ScalarField::from_fn(grid, |_, y| c * y * y * (3.0 - 2.0 * y));
    let rest = psi0.sub(&jump);
    let members = alphas
        .into_iter()
        .map(|alpha| {
            let delta = mollification_width(alpha);
            let mask = ScalarField::from_fn(grid, |_, y| wall_mask(y, delta));
            let mut psi = rest.clone();
            psi.values_mut().iter_mut().zip(mask.values()).for_each(|(v, m)| *v *= m);
            let psi = psi.add(&jump);
            FamilyMember::new(alpha, None, psi.perp_gradient())
        })
        .collect();
    Ok(ApproximationFamily {
        kind: FamilyKind::Mollification,
        u0: u0.clone(),
        members,
    })
}

/// Finite-ladder check of the approximation-family conditions.
#[derive(Debug, Clone)]
pub struct E1Report {
    pub alphas: Vec<f64>,
    pub m: Vec<Option<usize>>,
    /// (i) largest wall value of either component, per member.
    pub wall_max: Vec<f64>,
    pub wall_ok: bool,
    /// (ii) `||u0^a - u0||` per member.
    pub diffs: Vec<f64>,
    pub diffs_decreasing: bool,
    /// Final discrepancy relative to `||u0||`.
    pub final_rel_diff: f64,
    pub convergence_ok: bool,
    /// (iii) slope of `a ||grad u0^a||` against `a`; must be positive.
    pub grad_slope: Option<f64>,
    pub grad_ok: bool,
    /// (iv) slope of `||u0^a||_H3` against `a`; must be at least `-3.3`.
    pub h3_slope: Option<f64>,
    pub h3_ok: bool,
    /// Slope of `a^2 ||grad u0^a||^2` against `a`; at least `2/3 - 0.2`.
    pub energy_slope: Option<f64>,
    pub energy_ok: bool,
}

impl E1Report {
    pub fn passed(&self) -> bool {
        self.wall_ok && self.diffs_decreasing && self.convergence_ok && self.grad_ok && self.h3_ok && self.energy_ok
    }
}

pub const WALL_TOL: f64 = 1e-9;

pub fn certify_e1(family: &ApproximationFamily) -> Result<E1Report, InitError> {
    let n = family.members.len();
    if n < 4 {
        return Err(InitError::TooFewMembers(n));
    }
    let mut members: Vec<&FamilyMember> = family.members.iter().collect();
    members.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let alphas: Vec<f64> = members.iter().map(|m| m.alpha).collect();
    let wall_max: Vec<f64> = members.iter().map(|m| m.u.wall_max()).collect();
    let diffs: Vec<f64> = members.iter().map(|m| m.u.sub(&family.u0).l2()).collect();
    let u0_norm = family.u0.l2();
    let diffs_decreasing = diffs.windows(2).all(|w| w[1] < w[0]) || diffs.iter().all(|d| *d == 0.0);
    let final_rel_diff = if u0_norm > 0.0 { diffs[n - 1] / u0_norm } else { 0.0 };
    let grads: Vec<f64> = members.iter().map(|m| m.alpha * m.norms.h1_semi).collect();
    let h3: Vec<f64> = members.iter().map(|m| m.norms.h3).collect();
    let energy: Vec<f64> = grads.iter().map(|g| g * g).collect();
    let grad_slope = loglog_slope(&alphas, &grads);
    let h3_slope = loglog_slope(&alphas, &h3);
    let energy_slope = loglog_slope(&alphas, &energy);
    for (name, s) in [("a|grad u|", grad_slope), ("|u|_H3", h3_slope), ("a^2|grad u|^2", energy_slope)] {
        if s.is_none() {
            log::warn!("degenerate slope for {name}: a member has a zero norm");
        }
    }
    Ok(E1Report {
        m: members.iter().map(|m| m.m).collect(),
        wall_ok: wall_max.iter().all(|w| *w <= WALL_TOL),
        wall_max,
        diffs_decreasing,
        convergence_ok: final_rel_diff < 0.1,
        final_rel_diff,
        diffs,
        grad_ok: grad_slope.is_some_and(|s| s > 0.0),
        grad_slope,
        h3_ok: h3_slope.is_some_and(|s| s >= -3.3),
        h3_slope,
        energy_ok: energy_slope.is_some_and(|s| s >= 2.0 / 3.0 - 0.2),
        energy_slope,
        alphas,
    })
}

//! Experiment harness: manufactured solutions, error norms, random SPD
//! coefficient suites and penalty sweeps.

use std::f64::consts::E;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::global::{flux_recovery, BlockProblem, Discretization, GlobalSystem, ProblemData};
use crate::local::{build_local, unit_surface, FaceKind, LocalProblem};
use crate::mesh::{orient_face_vector, FaceRole, Mesh, Side};
use crate::sbp2d::{Coefficients2D, Face, Operators2D};
use crate::solve::{extreme_eigenvalues, for_each_block, solve_trace_streaming, Solution, SolvedBlock};

/// A problem whose exact solution is known, for error measurement.
pub trait ExactSolution: ProblemData {
    fn exact(&self, block: usize, x: f64, y: f64) -> f64;
    fn gradient(&self, block: usize, x: f64, y: f64) -> Point;
}

/// Manufactured solution on the disk-in-square mesh with b = I.
///
/// Inside the unit disk u = K(a − e^{−r²}) r sinθ; outside
/// u = (r−1)² cosθ + (r−1) sinθ. With K = e/(1+e) the radial derivative is
/// continuous across r = 1 only for a = 1; a = 2 leaves a flux jump of
/// K sinθ, which the interface conditions cannot represent.
#[derive(Clone, Copy, Debug)]
pub struct DiskMms {
    pub k: f64,
    pub a: f64,
    /// Blocks 0..inner_blocks lie inside the disk.
    pub inner_blocks: usize,
}

impl DiskMms {
    /// K = e/(1+e), a = 1: continuous value jump data and continuous flux.
    pub fn new(inner_blocks: usize) -> Self {
        DiskMms {
            k: E / (1.0 + E),
            a: 1.0,
            inner_blocks,
        }
    }

    pub fn with_inner(k: f64, a: f64, inner_blocks: usize) -> Self {
        DiskMms { k, a, inner_blocks }
    }

    pub fn inside(&self, block: usize) -> bool {
        block < self.inner_blocks
    }

    pub fn u_inner(&self, x: f64, y: f64) -> f64 {
        let rho = x * x + y * y;
        self.k * (self.a - (-rho).exp()) * y
    }

    pub fn grad_inner(&self, x: f64, y: f64) -> Point {
        let e = (-(x * x + y * y)).exp();
        [
            self.k * y * 2.0 * x * e,
            self.k * ((self.a - e) + 2.0 * y * y * e),
        ]
    }

    pub fn lap_inner(&self, x: f64, y: f64) -> f64 {
        let rho = x * x + y * y;
        self.k * y * (-rho).exp() * (8.0 - 4.0 * rho)
    }

    pub fn u_outer(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        let (c, s) = (x / r, y / r);
        (r - 1.0).powi(2) * c + (r - 1.0) * s
    }

    pub fn grad_outer(&self, x: f64, y: f64) -> Point {
        let r = x.hypot(y);
        let (c, s) = (x / r, y / r);
        let ur = 2.0 * (r - 1.0) * c + s;
        let ut = (-(r - 1.0).powi(2) * s + (r - 1.0) * c) / r;
        [ur * c - ut * s, ur * s + ut * c]
    }

    pub fn lap_outer(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        let (c, s) = (x / r, y / r);
        c * (2.0 + 2.0 * (r - 1.0) / r - (r - 1.0).powi(2) / (r * r)) + s / (r * r)
    }

    /// Radial derivative from either side at a point of the unit circle.
    pub fn radial_derivatives(&self, theta: f64) -> (f64, f64) {
        let (x, y) = (theta.cos(), theta.sin());
        let gi = self.grad_inner(x, y);
        let go = self.grad_outer(x, y);
        (gi[0] * x + gi[1] * y, go[0] * x + go[1] * y)
    }
}

impl ProblemData for DiskMms {
    fn forcing(&self, block: usize, x: f64, y: f64) -> f64 {
        if self.inside(block) {
            -self.lap_inner(x, y)
        } else {
            -self.lap_outer(x, y)
        }
    }

    fn dirichlet(&self, block: usize, x: f64, y: f64) -> f64 {
        self.exact(block, x, y)
    }

    fn neumann(&self, block: usize, x: f64, y: f64, n: Point) -> f64 {
        let g = self.gradient(block, x, y);
        n[0] * g[0] + n[1] * g[1]
    }

    fn jump(&self, plus: usize, minus: usize, x: f64, y: f64) -> f64 {
        self.exact(minus, x, y) - self.exact(plus, x, y)
    }
}

impl ExactSolution for DiskMms {
    fn exact(&self, block: usize, x: f64, y: f64) -> f64 {
        if self.inside(block) {
            self.u_inner(x, y)
        } else {
            self.u_outer(x, y)
        }
    }

    fn gradient(&self, block: usize, x: f64, y: f64) -> Point {
        if self.inside(block) {
            self.grad_inner(x, y)
        } else {
            self.grad_outer(x, y)
        }
    }
}

/// u = c0 + cx·x + cy·y with a constant tensor b; f = 0.
#[derive(Clone, Copy, Debug)]
pub struct LinearSolution {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    /// [bxx, bxy, byy].
    pub b: [f64; 3],
}

impl LinearSolution {
    pub fn new(c0: f64, cx: f64, cy: f64) -> Self {
        LinearSolution {
            c0,
            cx,
            cy,
            b: [1.0, 0.0, 1.0],
        }
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(c0, 0.0, 0.0)
    }
}

impl ProblemData for LinearSolution {
    fn forcing(&self, _: usize, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dirichlet(&self, b: usize, x: f64, y: f64) -> f64 {
        self.exact(b, x, y)
    }

    fn neumann(&self, _: usize, _: f64, _: f64, n: Point) -> f64 {
        let [bxx, bxy, byy] = self.b;
        let fx = bxx * self.cx + bxy * self.cy;
        let fy = bxy * self.cx + byy * self.cy;
        n[0] * fx + n[1] * fy
    }
}

impl ExactSolution for LinearSolution {
    fn exact(&self, _: usize, x: f64, y: f64) -> f64 {
        self.c0 + self.cx * x + self.cy * y
    }

    fn gradient(&self, _: usize, _: f64, _: f64) -> Point {
        [self.cx, self.cy]
    }
}

/// Σ Δᵀ J (H⊗H) Δ over one block, Δ = u − u_exact.
pub fn volume_error_sq(bp: &BlockProblem, u: &[f64], exact: &dyn ExactSolution) -> f64 {
    let m = &bp.geom.metrics;
    (0..u.len())
        .map(|k| {
            let d = u[k] - exact.exact(bp.index, m.x[k], m.y[k]);
            d * d * m.j[k] * bp.local.hvol[k]
        })
        .sum()
}

/// max |u − u_exact| over one block.
pub fn max_error(bp: &BlockProblem, u: &[f64], exact: &dyn ExactSolution) -> f64 {
    let m = &bp.geom.metrics;
    (0..u.len())
        .map(|k| (u[k] - exact.exact(bp.index, m.x[k], m.y[k])).abs())
        .fold(0.0, f64::max)
}

/// Σ Δᵀ S_J H Δ over one face, Δ = σ̂/S_J − n̂·b∇u_exact.
///
/// σ̂ carries the surface Jacobian, so it is divided out before comparing
/// with the physical normal flux.
pub fn face_flux_error_sq(bp: &BlockProblem, face: Face, sigma: &[f64], exact: &dyn ExactSolution) -> f64 {
    let k = face.slot();
    let pts = bp.geom.face_points(&bp.local.ops, face);
    let nrm = &bp.geom.surface.normal[k];
    let sj = &bp.geom.surface.sj[k];
    let h = &bp.local.faces[k].hface;
    (0..sigma.len())
        .map(|t| {
            let g = exact.neumann(bp.index, pts[t][0], pts[t][1], nrm[t]);
            let d = sigma[t] / sj[t] - g;
            d * d * sj[t] * h[t]
        })
        .sum()
}

/// Accumulates the volume and interface error norms block by block.
#[derive(Clone, Debug, Default)]
pub struct ErrorAccumulator {
    pub volume_sq: f64,
    pub interface_sq: f64,
    pub max_abs: f64,
    pub faces: usize,
}

impl ErrorAccumulator {
    /// `sides` lists the interface faces of the block with their side; only
    /// plus-side faces enter the interface norm.
    pub fn add_block(
        &mut self,
        bp: &BlockProblem,
        u: &[f64],
        fluxes: &[Vec<f64>; 4],
        sides: &[(Face, Side)],
        exact: &dyn ExactSolution,
    ) {
        self.volume_sq += volume_error_sq(bp, u, exact);
        self.max_abs = self.max_abs.max(max_error(bp, u, exact));
        for (f, side) in sides {
            if *side == Side::Plus {
                self.interface_sq += face_flux_error_sq(bp, *f, &fluxes[f.slot()], exact);
                self.faces += 1;
            }
        }
    }

    pub fn volume(&self) -> f64 {
        self.volume_sq.sqrt()
    }

    pub fn interface(&self) -> f64 {
        self.interface_sq.sqrt()
    }
}

/// log2(e_coarse / e_fine) for consecutive doublings.
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Pointwise SPD coefficients G Gᵀ + εI with G uniform in [−1, 1]².
pub fn random_spd_coefficients(seed: u64, nr: usize, ns: usize) -> Result<Coefficients2D> {
    const EPS: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (nr + 1) * (ns + 1);
    let (mut crr, mut css, mut crs) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    for _ in 0..len {
        let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        crr.push(g[0] * g[0] + g[1] * g[1] + EPS);
        css.push(g[2] * g[2] + g[3] * g[3] + EPS);
        crs.push(g[0] * g[2] + g[1] * g[3]);
    }
    Coefficients2D::new(nr, ns, crr, css, crs)
}

/// Local problem on the reference square with given face kinds.
pub fn reference_local(
    ops: &Operators2D,
    c: &Coefficients2D,
    tau_scale: f64,
    kinds: [FaceKind; 4],
) -> Result<LocalProblem> {
    build_local(ops, c, &unit_surface(ops), tau_scale, kinds)
}

pub fn local_extremes(lp: &LocalProblem) -> Result<(f64, f64)> {
    extreme_eigenvalues(&lp.m.to_dense())
}

/// One row of a penalty sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub tau_scale: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Extreme eigenvalues of an all-Dirichlet reference block for each scale.
pub fn tau_sweep(ops: &Operators2D, c: &Coefficients2D, scales: &[f64]) -> Result<Vec<SweepRow>> {
    scales
        .iter()
        .map(|&s| {
            let lp = reference_local(ops, c, s, [FaceKind::Dirichlet; 4])?;
            let (lo, hi) = local_extremes(&lp)?;
            Ok(SweepRow {
                tau_scale: s,
                lambda_min: lo,
                lambda_max: hi,
            })
        })
        .collect()
}

/// Least-squares slope of log λ_max against log τ_s over rows with
/// τ_s in [lo, hi].
pub fn loglog_slope(rows: &[SweepRow], lo: f64, hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.tau_scale >= lo && r.tau_scale <= hi)
        .map(|r| (r.tau_scale.ln(), r.lambda_max.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Verify("slope needs at least two sweep points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// max/min − 1 of λ_min over rows with τ_s ≥ from.
pub fn plateau_variation(rows: &[SweepRow], from: f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.tau_scale >= from).map(|r| r.lambda_min).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi / lo - 1.0
}

/// Eigenvector of the smallest eigenvalue and its |cosine| with 𝟙.
pub fn null_vector_alignment(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let i = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(i);
    let ones = (a.nrows() as f64).sqrt();
    (v.sum() / (v.norm() * ones)).abs()
}

/// Volume and trace sizes for a mesh with `blocks` blocks and `ifaces`
/// interfaces at resolution N.
pub fn point_counts(blocks: usize, ifaces: usize, n: usize) -> (usize, usize) {
    (blocks * (n + 1) * (n + 1), ifaces * (n + 1))
}

/// Volume and interface errors of a solved system.
pub fn measure_errors(
    mesh: &Mesh,
    sys: &GlobalSystem,
    sol: &Solution,
    exact: &dyn ExactSolution,
) -> ErrorAccumulator {
    let mut acc = ErrorAccumulator::default();
    for_each_block(mesh, sys, sol, |sb| add_solved(&mut acc, mesh, sb, exact));
    acc
}

fn add_solved(acc: &mut ErrorAccumulator, mesh: &Mesh, sb: SolvedBlock<'_>, exact: &dyn ExactSolution) {
    let fluxes = flux_recovery(sb.problem, sb.u, &sb.traces, exact);
    let sides: Vec<(Face, Side)> = Face::ALL
        .iter()
        .filter_map(|&f| match mesh.role(sb.problem.index, f) {
            FaceRole::Interface { side, .. } => Some((f, side)),
            _ => None,
        })
        .collect();
    acc.add_block(sb.problem, sb.u, &fluxes, &sides, exact);
}

/// Errors from the streaming trace solver, for resolutions where holding
/// every block at once is too costly.
pub fn measure_errors_streaming(
    mesh: &Mesh,
    disc: &Discretization,
    exact: &dyn ExactSolution,
) -> Result<ErrorAccumulator> {
    let mut acc = ErrorAccumulator::default();
    solve_trace_streaming(mesh, disc, exact, |sb| add_solved(&mut acc, mesh, sb, exact))?;
    Ok(acc)
}

/// max |σ̂⁺ + σ̂⁻| over interface points, the minus side mapped to plus
/// ordering.
pub fn flux_conservation(mesh: &Mesh, sys: &GlobalSystem, sol: &Solution, data: &dyn ProblemData) -> f64 {
    let mut per_iface: Vec<[Vec<f64>; 2]> = vec![Default::default(); mesh.num_interfaces()];
    for_each_block(mesh, sys, sol, |sb| {
        let fluxes = flux_recovery(sb.problem, sb.u, &sb.traces, data);
        for c in &sys.couplings[sb.problem.index] {
            let s = fluxes[c.face.slot()].clone();
            match c.side {
                Side::Plus => per_iface[c.iface][0] = s,
                Side::Minus => {
                    per_iface[c.iface][1] = orient_face_vector(&s, mesh.interfaces[c.iface].orientation)
                }
            }
        }
    });
    per_iface
        .iter()
        .flat_map(|[p, m]| p.iter().zip(m).map(|(a, b)| (a + b).abs()))
        .fold(0.0, f64::max)
}

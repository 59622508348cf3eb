//! Solvers for the coupled system and spectral checks.
//!
//! Three mathematically equivalent paths: the full monolithic system, the
//! trace Schur complement D̄ − F̄ᵀM̄⁻¹F̄ (blocks factored independently) and
//! the volume Schur complement M̄ − F̄D̄⁻¹F̄ᵀ (D̄ is diagonal).

use faer::Mat;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::global::{
    block_couplings, block_rhs, build_block, jump_data, side_jump, BlockProblem, Coupling,
    Discretization, GlobalSystem, ProblemData, TraceAccumulator,
};
use crate::mesh::{Mesh, TraceNumbering};
use crate::sbp2d::Face;
use crate::sparse::{Csr, SpdFactor, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverPath {
    Monolithic,
    Trace,
    Volume,
}

impl SolverPath {
    pub const ALL: [SolverPath; 3] = [SolverPath::Monolithic, SolverPath::Trace, SolverPath::Volume];

    pub fn name(self) -> &'static str {
        match self {
            SolverPath::Monolithic => "monolithic",
            SolverPath::Trace => "trace",
            SolverPath::Volume => "volume",
        }
    }
}

impl std::str::FromStr for SolverPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monolithic" => Ok(SolverPath::Monolithic),
            "trace" => Ok(SolverPath::Trace),
            "volume" => Ok(SolverPath::Volume),
            _ => Err(Error::Solve(format!("unknown solver path '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Volume values per block.
    pub u: Vec<Vec<f64>>,
    /// Interface traces λ̄, plus-side ordering.
    pub lambda: Vec<f64>,
    pub path: SolverPath,
}

impl Solution {
    pub fn stacked(&self) -> Vec<f64> {
        self.u.iter().flatten().cloned().collect()
    }

    /// max |difference| over volume and trace values.
    pub fn max_difference(&self, other: &Solution) -> f64 {
        let a = self.stacked().into_iter().chain(self.lambda.iter().cloned());
        let b = other.stacked().into_iter().chain(other.lambda.iter().cloned());
        a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

fn split_blocks(sys: &GlobalSystem, stacked: &[f64]) -> Vec<Vec<f64>> {
    let bs = sys.numbering.block_size();
    stacked.chunks(bs).map(|c| c.to_vec()).collect()
}

pub fn solve(sys: &GlobalSystem, path: SolverPath) -> Result<Solution> {
    match path {
        SolverPath::Monolithic => solve_monolithic(sys),
        SolverPath::Trace => solve_trace_schur(sys),
        SolverPath::Volume => solve_volume_schur(sys),
    }
}

pub fn solve_monolithic(sys: &GlobalSystem) -> Result<Solution> {
    let k = sys.monolithic();
    let fac = SpdFactor::new(&k)?;
    let x = fac.solve(&sys.monolithic_rhs());
    let nv = sys.volume_size();
    Ok(Solution {
        u: split_blocks(sys, &x[..nv]),
        lambda: x[nv..].to_vec(),
        path: SolverPath::Monolithic,
    })
}

/// Per-block contribution to the trace Schur complement.
struct BlockSchur {
    /// Global trace indices of the block's coupled points.
    idx: Vec<usize>,
    /// F_Bᵀ M_B⁻¹ F_B on those points, row-major.
    s: Vec<f64>,
    /// F_Bᵀ M_B⁻¹ ḡ_B.
    r: Vec<f64>,
}

/// Coupled columns of F for one block, as (global trace index, column).
fn coupled_columns(bp: &BlockProblem, couplings: &[Coupling]) -> Vec<(usize, Vec<(usize, f64)>)> {
    let mut cols = Vec::new();
    for c in couplings {
        let ft = bp.local.f[c.face.slot()].transpose();
        for (q, &gi) in c.trace.iter().enumerate() {
            cols.push((gi, ft.row(q).collect()));
        }
    }
    cols
}

fn block_schur(bp: &BlockProblem, fac: &SpdFactor, couplings: &[Coupling], g: &[f64]) -> BlockSchur {
    let cols = coupled_columns(bp, couplings);
    let n = bp.local.size();
    let k = cols.len();
    let mut x = Mat::<f64>::zeros(n, k + 1);
    for (j, (_, col)) in cols.iter().enumerate() {
        for &(i, v) in col {
            x[(i, j)] = v;
        }
    }
    for i in 0..n {
        x[(i, k)] = g[i];
    }
    fac.solve_many(&mut x);
    let mut s = vec![0.0; k * k];
    let mut r = vec![0.0; k];
    for (a, (_, col)) in cols.iter().enumerate() {
        for b in 0..k {
            s[a * k + b] = col.iter().map(|&(i, v)| v * x[(i, b)]).sum();
        }
        r[a] = col.iter().map(|&(i, v)| v * x[(i, k)]).sum();
    }
    // exact symmetry of the assembled complement
    for a in 0..k {
        for b in 0..a {
            let m = 0.5 * (s[a * k + b] + s[b * k + a]);
            s[a * k + b] = m;
            s[b * k + a] = m;
        }
    }
    BlockSchur {
        idx: cols.iter().map(|c| c.0).collect(),
        s,
        r,
    }
}

/// Assembles D̄ − Σ S_B and ḡ_δ − Σ F_Bᵀ M_B⁻¹ ḡ_B.
fn trace_system(dbar: &[f64], g_delta: &[f64], parts: &[BlockSchur]) -> (Csr, Vec<f64>) {
    let nt = dbar.len();
    let mut t = Triplets::new(nt, nt);
    let mut rhs = g_delta.to_vec();
    for (i, d) in dbar.iter().enumerate() {
        t.push(i, i, *d);
    }
    for p in parts {
        let k = p.idx.len();
        for a in 0..k {
            rhs[p.idx[a]] -= p.r[a];
            for b in 0..k {
                if p.idx[a] >= p.idx[b] {
                    t.push(p.idx[a], p.idx[b], -p.s[a * k + b]);
                }
            }
        }
    }
    (t.into_symmetric_csr(), rhs)
}

/// u_B = M_B⁻¹(ḡ_B − F_B λ_B).
fn recover_block(bp: &BlockProblem, fac: &SpdFactor, couplings: &[Coupling], g: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut r = g.to_vec();
    for c in couplings {
        let l: Vec<f64> = c.trace.iter().map(|&i| lambda[i]).collect();
        bp.local.add_trace(c.face, &l, &mut r);
    }
    fac.solve(&r)
}

fn factor_blocks(sys: &GlobalSystem) -> Result<(Vec<SpdFactor>, Csr, Vec<f64>)> {
    let factors: Vec<SpdFactor> = sys
        .blocks
        .par_iter()
        .map(|bp| SpdFactor::new_in(&bp.local.m, Some(bp.index)))
        .collect::<Result<_>>()?;
    let parts: Vec<BlockSchur> = sys
        .blocks
        .par_iter()
        .enumerate()
        .map(|(b, bp)| block_schur(bp, &factors[b], &sys.couplings[b], &sys.g[b]))
        .collect();
    let (s, rhs) = trace_system(&sys.dbar, &sys.g_delta, &parts);
    Ok((factors, s, rhs))
}

/// Sparse D̄ − F̄ᵀM̄⁻¹F̄ and its right-hand side.
pub fn trace_schur_matrix(sys: &GlobalSystem) -> Result<(Csr, Vec<f64>)> {
    let (_, s, rhs) = factor_blocks(sys)?;
    Ok((s, rhs))
}

pub fn solve_trace_schur(sys: &GlobalSystem) -> Result<Solution> {
    let (factors, s, rhs) = factor_blocks(sys)?;
    let lambda = SpdFactor::new(&s)?.solve(&rhs);
    let u = sys
        .blocks
        .par_iter()
        .enumerate()
        .map(|(b, bp)| recover_block(bp, &factors[b], &sys.couplings[b], &sys.g[b], &lambda))
        .collect();
    Ok(Solution {
        u,
        lambda,
        path: SolverPath::Trace,
    })
}

/// M̄ − F̄D̄⁻¹F̄ᵀ.
pub fn volume_schur_matrix(sys: &GlobalSystem) -> Csr {
    let nv = sys.volume_size();
    let mut t = Triplets::new(nv, nv);
    for (b, bp) in sys.blocks.iter().enumerate() {
        let off = sys.block_offset(b);
        for (i, j, v) in bp.local.m.iter() {
            if i >= j {
                t.push(off + i, off + j, v);
            }
        }
    }
    // F̄ᵀ rows: the volume entries attached to each trace point
    let fbar_t = sys.fbar().transpose();
    for (q, d) in sys.dbar.iter().enumerate() {
        let row: Vec<(usize, f64)> = fbar_t.row(q).collect();
        for &(a, va) in &row {
            for &(b, vb) in &row {
                if a >= b {
                    t.push(a, b, -va * vb / d);
                }
            }
        }
    }
    t.into_symmetric_csr()
}

pub fn solve_volume_schur(sys: &GlobalSystem) -> Result<Solution> {
    let s = volume_schur_matrix(sys);
    let fbar = sys.fbar();
    let mut rhs: Vec<f64> = sys.g.iter().flatten().cloned().collect();
    let w: Vec<f64> = sys.g_delta.iter().zip(&sys.dbar).map(|(g, d)| g / d).collect();
    fbar.matvec_add(-1.0, &w, &mut rhs);
    let u = SpdFactor::new(&s)?.solve(&rhs);
    let mut r = sys.g_delta.clone();
    fbar.matvec_t_add(-1.0, &u, &mut r);
    let lambda = r.iter().zip(&sys.dbar).map(|(v, d)| v / d).collect();
    Ok(Solution {
        u: split_blocks(sys, &u),
        lambda,
        path: SolverPath::Volume,
    })
}

/// Per-block view of a solved system, handed to streaming consumers.
pub struct SolvedBlock<'a> {
    pub problem: &'a BlockProblem,
    pub u: &'a [f64],
    /// Traces of the interface faces with the jump shift applied.
    pub traces: Vec<(Face, Vec<f64>)>,
}

/// Visits every block of a solved system.
pub fn for_each_block(
    mesh: &Mesh,
    sys: &GlobalSystem,
    sol: &Solution,
    mut visit: impl FnMut(SolvedBlock<'_>),
) {
    for (b, bp) in sys.blocks.iter().enumerate() {
        visit(SolvedBlock {
            problem: bp,
            u: &sol.u[b],
            traces: sys.face_traces(mesh, b, &sol.lambda),
        });
    }
}

/// Trace-Schur solve that never holds more than one block's local problem:
/// blocks are built, reduced and dropped, then rebuilt to recover u. The
/// visitor sees each block once after recovery.
pub fn solve_trace_streaming(
    mesh: &Mesh,
    disc: &Discretization,
    data: &dyn ProblemData,
    mut visit: impl FnMut(SolvedBlock<'_>),
) -> Result<Solution> {
    let ops = disc.operators()?;
    let numbering = TraceNumbering::new(mesh, disc.n);
    let jumps = jump_data(mesh, disc.n, data);
    let mut acc = TraceAccumulator::new(mesh, &numbering);
    let mut parts = Vec::with_capacity(mesh.num_blocks());
    for b in 0..mesh.num_blocks() {
        let bp = build_block(mesh, b, &ops, disc)?;
        let cs = block_couplings(mesh, &numbering, b);
        let g = block_rhs(mesh, &bp, &cs, &jumps, data)?;
        let fac = SpdFactor::new_in(&bp.local.m, Some(b))?;
        acc.add_block(mesh, &bp, &cs);
        parts.push(block_schur(&bp, &fac, &cs, &g));
    }
    let (dbar, g_delta) = acc.finish(mesh, &jumps)?;
    let (s, rhs) = trace_system(&dbar, &g_delta, &parts);
    drop(parts);
    let lambda = SpdFactor::new(&s)?.solve(&rhs);
    drop(s);
    let mut u = Vec::with_capacity(mesh.num_blocks());
    for b in 0..mesh.num_blocks() {
        let bp = build_block(mesh, b, &ops, disc)?;
        let cs = block_couplings(mesh, &numbering, b);
        let g = block_rhs(mesh, &bp, &cs, &jumps, data)?;
        let fac = SpdFactor::new_in(&bp.local.m, Some(b))?;
        let ub = recover_block(&bp, &fac, &cs, &g, &lambda);
        let traces = cs
            .iter()
            .map(|c| {
                let shift = side_jump(mesh, &jumps, c);
                (c.face, c.trace.iter().zip(&shift).map(|(&i, s)| lambda[i] + s).collect())
            })
            .collect();
        visit(SolvedBlock {
            problem: &bp,
            u: &ub,
            traces,
        });
        u.push(ub);
    }
    Ok(Solution {
        u,
        lambda,
        path: SolverPath::Trace,
    })
}

/// Relative asymmetry ‖A − Aᵀ‖_max / ‖A‖_max above which eigenvalue checks
/// refuse to run.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest and largest eigenvalue of a symmetric dense matrix.
pub fn extreme_eigenvalues(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Verify("eigenvalues need a non-empty square matrix".into()));
    }
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Verify(format!(
            "matrix not symmetric: relative asymmetry {:.3e}",
            asym / scale
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let e = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    Ok((e.min(), e.max()))
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    extreme_eigenvalues(a).map(|e| e.0)
}

/// Dense forms of the monolithic matrix and both Schur complements.
pub struct DenseSystems {
    pub monolithic: DMatrix<f64>,
    pub trace_schur: DMatrix<f64>,
    pub volume_schur: DMatrix<f64>,
}

pub fn dense_systems(sys: &GlobalSystem) -> Result<DenseSystems> {
    let m = sys.mbar().to_dense();
    let f = sys.fbar().to_dense();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sys.dbar));
    let (nv, nt) = (m.nrows(), d.nrows());
    let mut k = DMatrix::zeros(nv + nt, nv + nt);
    k.view_mut((0, 0), (nv, nv)).copy_from(&m);
    k.view_mut((0, nv), (nv, nt)).copy_from(&f);
    k.view_mut((nv, 0), (nt, nv)).copy_from(&f.transpose());
    k.view_mut((nv, nv), (nt, nt)).copy_from(&d);
    // LU so an indefinite M̄ still yields a complement to inspect
    let minv_f = m.clone().lu().solve(&f).ok_or_else(|| Error::Factorization {
        block: None,
        msg: "volume matrix is singular".into(),
    })?;
    let mut trace_schur = &d - f.transpose() * minv_f;
    trace_schur = (&trace_schur + trace_schur.transpose()) * 0.5;
    let dinv: Vec<f64> = sys.dbar.iter().map(|v| 1.0 / v).collect();
    let fd = DMatrix::from_fn(nv, nt, |i, j| f[(i, j)] * dinv[j]);
    let mut volume_schur = &m - fd * f.transpose();
    volume_schur = (&volume_schur + volume_schur.transpose()) * 0.5;
    Ok(DenseSystems {
        monolithic: k,
        trace_schur,
        volume_schur,
    })
}

//! Global coupling of the local problems through the interface traces.
//!
//! Unknowns are the stacked block volumes ū and the interface traces λ̄:
//!
//! ```text
//! [ M̄   F̄ ] [ū]   [ḡ  ]
//! [ F̄ᵀ  D̄ ] [λ̄] = [ḡ_δ]
//! ```
//!
//! On a jump interface the data δ is u⁻ − u⁺, entering as λ⁺ = λ − δ/2 and
//! λ⁻ = λ + δ/2.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BlockGeometry, MetricMode, Point, Tensor};
use crate::local::{build_local, FaceData, FaceKind, LocalProblem};
use crate::mesh::{orient_face_vector, BcTag, FaceRole, Mesh, Side, TraceNumbering};
use crate::sbp2d::{Face, Operators2D};
use crate::sparse::{Csr, Triplets};

/// Data of a boundary value problem −∇·(b∇u) = f on a mesh.
pub trait ProblemData: Sync {
    fn forcing(&self, block: usize, x: f64, y: f64) -> f64;
    fn dirichlet(&self, block: usize, x: f64, y: f64) -> f64;
    /// n̂·(b∇u) with n̂ the outward unit normal of the block.
    fn neumann(&self, block: usize, x: f64, y: f64, normal: Point) -> f64;
    /// u⁻ − u⁺ at a point of a jump interface.
    fn jump(&self, _plus: usize, _minus: usize, _x: f64, _y: f64) -> f64 {
        0.0
    }
}

/// Discretization settings shared by all blocks.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub p: usize,
    pub n: usize,
    pub tau_scale: f64,
    pub metric_mode: MetricMode,
    pub tensor: Tensor,
}

impl Discretization {
    pub fn new(p: usize, n: usize) -> Self {
        Discretization {
            p,
            n,
            tau_scale: 1.0,
            metric_mode: MetricMode::Analytic,
            tensor: Tensor::Identity,
        }
    }

    pub fn operators(&self) -> Result<Operators2D> {
        Operators2D::new(self.p, self.n)
    }
}

/// Face kinds of a block from its mesh roles.
pub fn face_kinds(mesh: &Mesh, block: usize) -> [FaceKind; 4] {
    mesh.roles(block).map(|r| match r {
        FaceRole::Boundary(BcTag::Dirichlet) => FaceKind::Dirichlet,
        FaceRole::Boundary(BcTag::Neumann) => FaceKind::Neumann,
        FaceRole::Interface { .. } => FaceKind::Interface,
    })
}

#[derive(Clone, Debug)]
pub struct BlockProblem {
    pub index: usize,
    pub geom: BlockGeometry,
    pub local: LocalProblem,
}

pub fn block_geometry(mesh: &Mesh, block: usize, ops: &Operators2D, disc: &Discretization) -> Result<BlockGeometry> {
    let mapping = mesh.blocks[block].mapping()?;
    BlockGeometry::new(&mapping, ops, disc.metric_mode, &disc.tensor)
}

/// Local problem for a block with the given geometry.
pub fn block_problem(
    mesh: &Mesh,
    block: usize,
    ops: &Operators2D,
    geom: BlockGeometry,
    tau_scale: f64,
) -> Result<BlockProblem> {
    let local = build_local(ops, &geom.coeffs, &geom.surface.sj, tau_scale, face_kinds(mesh, block))
        .map_err(|e| match e {
            Error::Factorization { msg, .. } => Error::Factorization {
                block: Some(block),
                msg,
            },
            e => e,
        })?;
    Ok(BlockProblem {
        index: block,
        geom,
        local,
    })
}

pub fn build_block(mesh: &Mesh, block: usize, ops: &Operators2D, disc: &Discretization) -> Result<BlockProblem> {
    let geom = block_geometry(mesh, block, ops, disc)?;
    block_problem(mesh, block, ops, geom, disc.tau_scale)
}

pub fn build_blocks(mesh: &Mesh, disc: &Discretization) -> Result<Vec<BlockProblem>> {
    let ops = disc.operators()?;
    (0..mesh.num_blocks())
        .into_par_iter()
        .map(|b| build_block(mesh, b, &ops, disc))
        .collect()
}

/// A block's link to one interface face.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub face: Face,
    pub iface: usize,
    pub side: Side,
    /// Global trace index per face point, in this side's ordering.
    pub trace: Vec<usize>,
}

pub fn block_couplings(mesh: &Mesh, numbering: &TraceNumbering, block: usize) -> Vec<Coupling> {
    Face::ALL
        .iter()
        .filter_map(|&f| match mesh.role(block, f) {
            FaceRole::Interface { index, side } => Some(Coupling {
                face: f,
                iface: index,
                side,
                trace: numbering.selection(index, side),
            }),
            _ => None,
        })
        .collect()
}

/// Jump data of every interface in plus-side ordering; zero for locked
/// interfaces.
pub fn jump_data(mesh: &Mesh, n: usize, data: &dyn ProblemData) -> Vec<Vec<f64>> {
    mesh.interfaces
        .iter()
        .map(|i| {
            if !i.jump {
                return vec![0.0; n + 1];
            }
            let blk = &mesh.blocks[i.plus.0];
            (0..=n)
                .map(|t| {
                    let p = blk.face_point(i.plus.1, t as f64 / n as f64);
                    data.jump(i.plus.0, i.minus.0, p[0], p[1])
                })
                .collect()
        })
        .collect()
}

/// The half jump seen from one side, in that side's ordering.
pub fn side_jump(mesh: &Mesh, jumps: &[Vec<f64>], c: &Coupling) -> Vec<f64> {
    let d = &jumps[c.iface];
    match c.side {
        Side::Plus => d.iter().map(|v| -0.5 * v).collect(),
        Side::Minus => orient_face_vector(d, mesh.interfaces[c.iface].orientation)
            .into_iter()
            .map(|v| 0.5 * v)
            .collect(),
    }
}

/// Local right-hand side with boundary data and the jump shift; interface
/// traces left to the global system.
pub fn block_rhs(
    mesh: &Mesh,
    bp: &BlockProblem,
    couplings: &[Coupling],
    jumps: &[Vec<f64>],
    data: &dyn ProblemData,
) -> Result<Vec<f64>> {
    let b = bp.index;
    let ops = &bp.local.ops;
    let m = &bp.geom.metrics;
    let forcing: Vec<f64> = (0..m.len()).map(|k| data.forcing(b, m.x[k], m.y[k])).collect();
    let mut q = bp.local.volume_rhs(&m.j, &forcing)?;
    for f in Face::ALL {
        let pts = bp.geom.face_points(ops, f);
        match bp.local.kinds[f.slot()] {
            FaceKind::Dirichlet => {
                let g: Vec<f64> = pts.iter().map(|p| data.dirichlet(b, p[0], p[1])).collect();
                bp.local.add_face_data(f, FaceData::Dirichlet(&g), &mut q)?;
            }
            FaceKind::Neumann => {
                let nrm = &bp.geom.surface.normal[f.slot()];
                let g: Vec<f64> = pts
                    .iter()
                    .zip(nrm)
                    .map(|(p, n)| data.neumann(b, p[0], p[1], *n))
                    .collect();
                bp.local.add_face_data(f, FaceData::Neumann(&g), &mut q)?;
            }
            FaceKind::Interface => {}
        }
    }
    for c in couplings {
        let shift = side_jump(mesh, jumps, c);
        // −F(λ + shift) = −Fλ − F·shift
        bp.local.add_trace(c.face, &shift, &mut q);
    }
    Ok(q)
}

#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub numbering: TraceNumbering,
    pub blocks: Vec<BlockProblem>,
    pub couplings: Vec<Vec<Coupling>>,
    /// ḡ per block.
    pub g: Vec<Vec<f64>>,
    pub g_delta: Vec<f64>,
    pub dbar: Vec<f64>,
    /// δ per interface, plus-side ordering.
    pub jumps: Vec<Vec<f64>>,
}

/// Penalty and norm of one side mapped to plus-side ordering.
fn plus_ordered(mesh: &Mesh, bp: &BlockProblem, c: &Coupling) -> (Vec<f64>, Vec<f64>) {
    let k = c.face.slot();
    let tau = &bp.local.penalties.tau[k];
    let h = &bp.local.faces[k].hface;
    match c.side {
        Side::Plus => (tau.clone(), h.clone()),
        Side::Minus => {
            let o = mesh.interfaces[c.iface].orientation;
            (orient_face_vector(tau, o), orient_face_vector(h, o))
        }
    }
}

/// Collects D̄ and ḡ_δ one block at a time.
#[derive(Clone, Debug)]
pub struct TraceAccumulator {
    n: usize,
    offsets: Vec<usize>,
    dbar: Vec<f64>,
    /// τ of the plus and minus side, plus ordering.
    tau_side: Vec<[Vec<f64>; 2]>,
    h_plus: Vec<Vec<f64>>,
}

impl TraceAccumulator {
    pub fn new(mesh: &Mesh, numbering: &TraceNumbering) -> Self {
        TraceAccumulator {
            n: numbering.n,
            offsets: numbering.offsets.clone(),
            dbar: vec![0.0; numbering.trace_size],
            tau_side: vec![Default::default(); mesh.num_interfaces()],
            h_plus: vec![Vec::new(); mesh.num_interfaces()],
        }
    }

    pub fn add_block(&mut self, mesh: &Mesh, bp: &BlockProblem, couplings: &[Coupling]) {
        for c in couplings {
            let (tau, h) = plus_ordered(mesh, bp, c);
            let off = self.offsets[c.iface];
            for t in 0..=self.n {
                self.dbar[off + t] += h[t] * tau[t];
            }
            let s = if c.side == Side::Plus { 0 } else { 1 };
            self.tau_side[c.iface][s] = tau;
            if c.side == Side::Plus {
                self.h_plus[c.iface] = h;
            }
        }
    }

    /// (D̄, ḡ_δ) once every block has been added.
    pub fn finish(self, mesh: &Mesh, jumps: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g_delta = vec![0.0; self.dbar.len()];
        for (f, iface) in mesh.interfaces.iter().enumerate() {
            let [tp, tm] = &self.tau_side[f];
            if tp.is_empty() || tm.is_empty() {
                return Err(Error::Global(format!("interface {} is missing a side", f + 1)));
            }
            if !iface.jump {
                continue;
            }
            let off = self.offsets[f];
            for t in 0..=self.n {
                g_delta[off + t] = 0.5 * self.h_plus[f][t] * (tp[t] - tm[t]) * jumps[f][t];
            }
        }
        if let Some(i) = self.dbar.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::Global(format!("trace diagonal entry {i} is not positive")));
        }
        Ok((self.dbar, g_delta))
    }
}

pub fn assemble_global(
    mesh: &Mesh,
    numbering: &TraceNumbering,
    blocks: Vec<BlockProblem>,
    data: &dyn ProblemData,
) -> Result<GlobalSystem> {
    if blocks.len() != mesh.num_blocks() {
        return Err(Error::Global(format!(
            "{} local problems for {} blocks",
            blocks.len(),
            mesh.num_blocks()
        )));
    }
    let n = numbering.n;
    for bp in &blocks {
        if bp.local.ops.nr() != n || bp.local.ops.ns() != n {
            return Err(Error::Global(format!(
                "block {} has N=({}, {}), numbering uses N={n}",
                bp.index + 1,
                bp.local.ops.nr(),
                bp.local.ops.ns()
            )));
        }
    }
    let jumps = jump_data(mesh, n, data);
    let couplings: Vec<Vec<Coupling>> = (0..mesh.num_blocks())
        .map(|b| block_couplings(mesh, numbering, b))
        .collect();
    let g: Vec<Vec<f64>> = blocks
        .par_iter()
        .zip(couplings.par_iter())
        .map(|(bp, c)| block_rhs(mesh, bp, c, &jumps, data))
        .collect::<Result<_>>()?;

    let mut acc = TraceAccumulator::new(mesh, numbering);
    for (bp, cs) in blocks.iter().zip(&couplings) {
        acc.add_block(mesh, bp, cs);
    }
    let (dbar, g_delta) = acc.finish(mesh, &jumps)?;
    Ok(GlobalSystem {
        numbering: numbering.clone(),
        blocks,
        couplings,
        g,
        g_delta,
        dbar,
        jumps,
    })
}

/// Builds the blocks from the mesh geometry and assembles.
pub fn assemble_problem(mesh: &Mesh, disc: &Discretization, data: &dyn ProblemData) -> Result<GlobalSystem> {
    let numbering = TraceNumbering::new(mesh, disc.n);
    let blocks = build_blocks(mesh, disc)?;
    assemble_global(mesh, &numbering, blocks, data)
}

impl GlobalSystem {
    pub fn volume_size(&self) -> usize {
        self.numbering.volume_size
    }

    pub fn trace_size(&self) -> usize {
        self.numbering.trace_size
    }

    pub fn block_offset(&self, b: usize) -> usize {
        self.numbering.block_offset(b)
    }

    pub fn mbar(&self) -> Csr {
        let nv = self.volume_size();
        let mut t = Triplets::new(nv, nv);
        for (b, bp) in self.blocks.iter().enumerate() {
            let off = self.block_offset(b);
            for (i, j, v) in bp.local.m.iter() {
                t.push(off + i, off + j, v);
            }
        }
        t.into_csr()
    }

    pub fn fbar(&self) -> Csr {
        let mut t = Triplets::new(self.volume_size(), self.trace_size());
        for (b, bp) in self.blocks.iter().enumerate() {
            let off = self.block_offset(b);
            for c in &self.couplings[b] {
                for (i, q, v) in bp.local.f[c.face.slot()].iter() {
                    t.push(off + i, c.trace[q], v);
                }
            }
        }
        t.into_csr()
    }

    /// [M̄ F̄; F̄ᵀ D̄].
    pub fn monolithic(&self) -> Csr {
        let nv = self.volume_size();
        let n = nv + self.trace_size();
        let mut t = Triplets::new(n, n);
        for (b, bp) in self.blocks.iter().enumerate() {
            let off = self.block_offset(b);
            for (i, j, v) in bp.local.m.iter() {
                t.push(off + i, off + j, v);
            }
            for c in &self.couplings[b] {
                for (i, q, v) in bp.local.f[c.face.slot()].iter() {
                    t.push(off + i, nv + c.trace[q], v);
                    t.push(nv + c.trace[q], off + i, v);
                }
            }
        }
        for (i, d) in self.dbar.iter().enumerate() {
            t.push(nv + i, nv + i, *d);
        }
        t.into_csr()
    }

    pub fn monolithic_rhs(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.g.iter().flatten().cloned().collect();
        r.extend_from_slice(&self.g_delta);
        r
    }

    /// Trace values of every coupled face of block b, in that block's
    /// ordering, with the jump shift applied.
    pub fn face_traces(&self, mesh: &Mesh, b: usize, lambda: &[f64]) -> Vec<(Face, Vec<f64>)> {
        self.couplings[b]
            .iter()
            .map(|c| {
                let shift = side_jump(mesh, &self.jumps, c);
                let l = c.trace.iter().zip(&shift).map(|(&i, s)| lambda[i] + s).collect();
                (c.face, l)
            })
            .collect()
    }
}

/// Fluxes σ̂ on every face of a solved block, by face slot. Boundary faces
/// use their eliminated traces.
pub fn flux_recovery(
    bp: &BlockProblem,
    u: &[f64],
    interface_traces: &[(Face, Vec<f64>)],
    data: &dyn ProblemData,
) -> [Vec<f64>; 4] {
    let ops = &bp.local.ops;
    let mut out: [Vec<f64>; 4] = Default::default();
    for f in Face::ALL {
        let pts = bp.geom.face_points(ops, f);
        let lambda: Vec<f64> = match bp.local.kinds[f.slot()] {
            FaceKind::Dirichlet => pts.iter().map(|p| data.dirichlet(bp.index, p[0], p[1])).collect(),
            FaceKind::Neumann => {
                let nrm = &bp.geom.surface.normal[f.slot()];
                let g: Vec<f64> = pts
                    .iter()
                    .zip(nrm)
                    .map(|(p, n)| data.neumann(bp.index, p[0], p[1], *n))
                    .collect();
                bp.local.neumann_trace(f, u, &g)
            }
            FaceKind::Interface => interface_traces
                .iter()
                .find(|(face, _)| *face == f)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(|| vec![0.0; ops.face_len(f)]),
        };
        out[f.slot()] = bp.local.flux(f, u, &lambda);
    }
    out
}

//! The per-block problem: penalties, the local matrix M, face matrices F_k
//! and the right-hand side.

use crate::error::{Error, Result};
use crate::sbp1d::{borrowing_constants, BorrowingConstants};
use crate::sbp2d::{
    build_all_faces, build_stiffness_total, psi_min_field, Coefficients2D, Face, FaceOperators,
    Operators2D,
};
use crate::sparse::{Csr, Triplets};

/// How a face's trace is determined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Dirichlet,
    Neumann,
    /// Trace is a global unknown.
    Interface,
}

#[derive(Clone, Debug)]
pub struct PenaltyParameters {
    /// Diagonal of τ_k by face slot.
    pub tau: [Vec<f64>; 4],
    pub tau_scale: f64,
    pub borrow_r: BorrowingConstants,
    pub borrow_s: BorrowingConstants,
}

/// Penalties from the borrowing bound, scaled by `tau_scale` ≥ 1.
pub fn penalty_parameters(
    ops: &Operators2D,
    c: &Coefficients2D,
    tau_scale: f64,
) -> Result<PenaltyParameters> {
    if !(tau_scale >= 1.0) {
        return Err(Error::Local(format!("tau_scale must be >= 1, got {tau_scale}")));
    }
    ops.check_len("local_problem", c.len())?;
    let psi = psi_min_field(c).map_err(|e| match e {
        Error::CoefficientNotSpd {
            node, crr, css, crs, ..
        } => Error::CoefficientNotSpd {
            module: "local_problem",
            node,
            crr,
            css,
            crs,
        },
        e => e,
    })?;
    let br = borrowing_constants(ops.p, &ops.r)?;
    let bs = borrowing_constants(ops.p, &ops.s)?;
    let (nr, ns) = (ops.nr(), ops.ns());
    let mut tau: [Vec<f64>; 4] = Default::default();
    for face in Face::ALL {
        let (b, h, len) = if face.is_r_face() {
            (&br, ops.r.h, ns + 1)
        } else {
            (&bs, ops.s.h, nr + 1)
        };
        let depth = if face.is_r_face() { nr } else { ns };
        let l = b.l.min(depth);
        let mut t = Vec::with_capacity(len);
        for q in 0..len {
            // node at normal depth k from the face
            let at = |k: usize| match face {
                Face::R0 => ops.idx(k, q),
                Face::R1 => ops.idx(nr - k, q),
                Face::S0 => ops.idx(q, k),
                Face::S1 => ops.idx(q, ns - k),
            };
            let big_psi = (0..=l).map(|k| psi[at(k)]).fold(f64::INFINITY, f64::min);
            let node = at(0);
            let normal = if face.is_r_face() { c.crr[node] } else { c.css[node] };
            let cross = c.crs[node];
            t.push(
                tau_scale
                    * (2.0 * normal * normal / (h * b.beta * big_psi)
                        + 2.0 * cross * cross / (h * b.alpha * big_psi)),
            );
        }
        tau[face.slot()] = t;
    }
    Ok(PenaltyParameters {
        tau,
        tau_scale,
        borrow_r: br,
        borrow_s: bs,
    })
}

#[derive(Clone, Debug)]
pub struct LocalProblem {
    pub ops: Operators2D,
    pub m: Csr,
    pub faces: [FaceOperators; 4],
    pub penalties: PenaltyParameters,
    /// F_k = G_kᵀ − L_kᵀHτ_k, size (N_r+1)(N_s+1) × face length.
    pub f: [Csr; 4],
    pub kinds: [FaceKind; 4],
    /// Diagonal of H ⊗ H.
    pub hvol: Vec<f64>,
}

/// Face data for the right-hand side.
#[derive(Clone, Copy, Debug)]
pub enum FaceData<'a> {
    /// Dirichlet values g_D at the face points.
    Dirichlet(&'a [f64]),
    /// Neumann values g_N = n̂·b∇u at the face points.
    Neumann(&'a [f64]),
    /// A given trace λ on an interface face.
    Trace(&'a [f64]),
    /// Interface faces whose trace is left to the global system.
    Skip,
}

fn face_matrix(ops: &Operators2D, face: &FaceOperators, tau: &[f64]) -> Csr {
    let m = face.nodes.len();
    let mut t = Triplets::new(ops.size(), m);
    for (row, col, v) in face.g.iter() {
        t.push(col, row, v);
    }
    for q in 0..m {
        t.push(face.nodes[q], q, -face.hface[q] * tau[q]);
    }
    t.into_csr()
}

pub fn assemble_local(
    ops: &Operators2D,
    stiffness: &Csr,
    faces: [FaceOperators; 4],
    penalties: PenaltyParameters,
    kinds: [FaceKind; 4],
) -> Result<LocalProblem> {
    let np = ops.size();
    if stiffness.nrows != np || stiffness.ncols != np {
        return Err(Error::Local(format!(
            "stiffness is {}x{}, grid has {np} points",
            stiffness.nrows, stiffness.ncols
        )));
    }
    for f in Face::ALL {
        let fo = &faces[f.slot()];
        if fo.face != f || fo.nodes.len() != ops.face_len(f) || penalties.tau[f.slot()].len() != fo.nodes.len() {
            return Err(Error::Local(format!("face {} operators do not match the grid", f.number())));
        }
    }
    let mut t = Triplets::new(np, np);
    t.entries.reserve(stiffness.nnz() * 2);
    t.extend_csr(stiffness, 1.0);
    let mut fm: Vec<Csr> = Vec::with_capacity(4);
    for f in Face::ALL {
        let fo = &faces[f.slot()];
        let tau = &penalties.tau[f.slot()];
        for (q, col, v) in fo.g.iter() {
            let node = fo.nodes[q];
            t.push(node, col, -v);
            t.push(col, node, -v);
        }
        for q in 0..fo.nodes.len() {
            t.push(fo.nodes[q], fo.nodes[q], fo.hface[q] * tau[q]);
        }
        let fk = face_matrix(ops, fo, tau);
        if kinds[f.slot()] == FaceKind::Neumann {
            // M -= F (Hτ)⁻¹ Fᵀ, one column of F at a time
            let ft = fk.transpose();
            for q in 0..fo.nodes.len() {
                let w = 1.0 / (fo.hface[q] * tau[q]);
                let col: Vec<(usize, f64)> = ft.row(q).collect();
                for &(a, va) in &col {
                    for &(b, vb) in &col {
                        if a >= b {
                            t.push(a, b, -w * va * vb);
                        }
                    }
                }
            }
        }
        fm.push(fk);
    }
    let m = t.into_symmetric_csr();
    let f: [Csr; 4] = fm.try_into().expect("four faces");
    Ok(LocalProblem {
        ops: ops.clone(),
        m,
        faces,
        penalties,
        f,
        kinds,
        hvol: ops.volume_norm(),
    })
}

/// Stiffness, faces and penalties from coefficients in one call.
pub fn build_local(
    ops: &Operators2D,
    c: &Coefficients2D,
    sj: &[Vec<f64>; 4],
    tau_scale: f64,
    kinds: [FaceKind; 4],
) -> Result<LocalProblem> {
    let a = build_stiffness_total(ops, c)?;
    let faces = build_all_faces(ops, c, sj)?;
    let pen = penalty_parameters(ops, c, tau_scale)?;
    assemble_local(ops, &a, faces, pen, kinds)
}

/// Unit surface Jacobians, for problems posed directly on the reference square.
pub fn unit_surface(ops: &Operators2D) -> [Vec<f64>; 4] {
    Face::ALL.map(|f| vec![1.0; ops.face_len(f)])
}

impl LocalProblem {
    pub fn size(&self) -> usize {
        self.ops.size()
    }

    pub fn face_len(&self, face: Face) -> usize {
        self.ops.face_len(face)
    }

    /// Volume part (H⊗H) J f.
    pub fn volume_rhs(&self, jac: &[f64], forcing: &[f64]) -> Result<Vec<f64>> {
        self.ops.check_len("local_problem", jac.len())?;
        self.ops.check_len("local_problem", forcing.len())?;
        Ok((0..self.size())
            .map(|k| self.hvol[k] * jac[k] * forcing[k])
            .collect())
    }

    /// q += −F_k λ.
    pub fn add_trace(&self, face: Face, lambda: &[f64], q: &mut [f64]) {
        self.f[face.slot()].matvec_add(-1.0, lambda, q);
    }

    /// Adds the boundary and given-trace contributions to q.
    pub fn add_face_data(&self, face: Face, data: FaceData<'_>, q: &mut [f64]) -> Result<()> {
        let k = face.slot();
        let m = self.face_len(face);
        let check = |v: &[f64]| -> Result<()> {
            if v.len() != m {
                return Err(Error::LengthMismatch {
                    module: "local_problem",
                    expected: m,
                    got: v.len(),
                });
            }
            Ok(())
        };
        match (self.kinds[k], data) {
            (FaceKind::Dirichlet, FaceData::Dirichlet(g)) => {
                check(g)?;
                self.add_trace(face, g, q);
            }
            (FaceKind::Neumann, FaceData::Neumann(g)) => {
                check(g)?;
                let tau = &self.penalties.tau[k];
                let sj = &self.faces[k].sj;
                let w: Vec<f64> = (0..m).map(|t| sj[t] * g[t] / tau[t]).collect();
                self.add_trace(face, &w, q);
            }
            (FaceKind::Interface, FaceData::Trace(l)) => {
                check(l)?;
                self.add_trace(face, l, q);
            }
            (FaceKind::Interface, FaceData::Skip) => {}
            (kind, _) => {
                return Err(Error::Local(format!(
                    "face {} is {kind:?} but received mismatched or missing data",
                    face.number()
                )))
            }
        }
        Ok(())
    }

    /// q = (H⊗H) J f − Σ_k F_k λ_k with the boundary traces eliminated.
    pub fn local_rhs(&self, jac: &[f64], forcing: &[f64], data: [FaceData<'_>; 4]) -> Result<Vec<f64>> {
        let mut q = self.volume_rhs(jac, forcing)?;
        for f in Face::ALL {
            self.add_face_data(f, data[f.slot()], &mut q)?;
        }
        Ok(q)
    }

    /// The trace of a Neumann face in terms of u and g_N.
    pub fn neumann_trace(&self, face: Face, u: &[f64], gn: &[f64]) -> Vec<f64> {
        let k = face.slot();
        let fo = &self.faces[k];
        let gu = fo.g.matvec(u);
        let tau = &self.penalties.tau[k];
        (0..fo.nodes.len())
            .map(|t| u[fo.nodes[t]] + (fo.sj[t] * gn[t] - gu[t] / fo.hface[t]) / tau[t])
            .collect()
    }

    /// σ̂_k from Hσ̂ = G u − Hτ(L u − λ).
    pub fn flux(&self, face: Face, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let k = face.slot();
        let fo = &self.faces[k];
        let gu = fo.g.matvec(u);
        let tau = &self.penalties.tau[k];
        (0..fo.nodes.len())
            .map(|t| gu[t] / fo.hface[t] - tau[t] * (u[fo.nodes[t]] - lambda[t]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_penalty_value() {
        let ops = Operators2D::new(1, 4).unwrap();
        let c = Coefficients2D::identity(4);
        let p = penalty_parameters(&ops, &c, 1.0).unwrap();
        for f in Face::ALL {
            for v in &p.tau[f.slot()] {
                assert!((v - 8.0 / 0.363636363).abs() < 1e-12);
            }
        }
        assert!(penalty_parameters(&ops, &c, 0.5).is_err());
    }
}

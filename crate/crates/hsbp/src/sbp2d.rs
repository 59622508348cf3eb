//! Tensor-product SBP operators on the reference square [0, 1]².
//!
//! Grid functions are stacked with r fastest: point (i, j) lives at
//! j·(N_r+1) + i. Face 1 is r = 0, face 2 is r = 1, face 3 is s = 0 and
//! face 4 is s = 1; face vectors run along the other coordinate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sbp1d::build_first_derivative;
use crate::sparse::{Csr, Triplets};
use crate::Sbp1d;

/// Flat index of (i, j) on an (N+1)×(N+1) grid.
pub fn grid_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i > n || j > n {
        return Err(Error::GridIndex { i, j, n });
    }
    Ok(j * (n + 1) + i)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    R0 = 1,
    R1 = 2,
    S0 = 3,
    S1 = 4,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::R0, Face::R1, Face::S0, Face::S1];

    pub fn from_index(k: usize) -> Result<Face> {
        match k {
            1 => Ok(Face::R0),
            2 => Ok(Face::R1),
            3 => Ok(Face::S0),
            4 => Ok(Face::S1),
            _ => Err(Error::InvalidFace(k)),
        }
    }

    /// 1-based face number.
    pub fn number(self) -> usize {
        self as usize
    }

    /// 0-based slot for per-face arrays.
    pub fn slot(self) -> usize {
        self as usize - 1
    }

    /// True for faces of constant r.
    pub fn is_r_face(self) -> bool {
        matches!(self, Face::R0 | Face::R1)
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Face::R1 | Face::S1)
    }
}

/// The pair of 1D operator sets used along r and along s.
#[derive(Clone, Debug)]
pub struct Operators2D {
    pub p: usize,
    pub r: Arc<Sbp1d>,
    pub s: Arc<Sbp1d>,
}

impl Operators2D {
    pub fn new(p: usize, n: usize) -> Result<Self> {
        let ops = Arc::new(build_first_derivative(p, n)?);
        Ok(Operators2D {
            p,
            r: ops.clone(),
            s: ops,
        })
    }

    pub fn anisotropic(p: usize, nr: usize, ns: usize) -> Result<Self> {
        Ok(Operators2D {
            p,
            r: Arc::new(build_first_derivative(p, nr)?),
            s: Arc::new(build_first_derivative(p, ns)?),
        })
    }

    pub fn nr(&self) -> usize {
        self.r.n
    }

    pub fn ns(&self) -> usize {
        self.s.n
    }

    pub fn size(&self) -> usize {
        (self.nr() + 1) * (self.ns() + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nr() + 1) + i
    }

    /// Number of points on face k.
    pub fn face_len(&self, face: Face) -> usize {
        if face.is_r_face() {
            self.ns() + 1
        } else {
            self.nr() + 1
        }
    }

    /// Volume index of point t on a face.
    pub fn face_node(&self, face: Face, t: usize) -> usize {
        match face {
            Face::R0 => self.idx(0, t),
            Face::R1 => self.idx(self.nr(), t),
            Face::S0 => self.idx(t, 0),
            Face::S1 => self.idx(t, self.ns()),
        }
    }

    /// 1D norm along a face.
    pub fn face_norm(&self, face: Face) -> &[f64] {
        if face.is_r_face() {
            &self.s.hdiag
        } else {
            &self.r.hdiag
        }
    }

    /// Tensor-product norm H_s ⊗ H_r as a vector.
    pub fn volume_norm(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.size()];
        for j in 0..=self.ns() {
            for i in 0..=self.nr() {
                w[self.idx(i, j)] = self.r.hdiag[i] * self.s.hdiag[j];
            }
        }
        w
    }

    pub fn check_len(&self, module: &'static str, len: usize) -> Result<()> {
        if len != self.size() {
            return Err(Error::LengthMismatch {
                module,
                expected: self.size(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Grid fields of the transformed coefficient matrix [c_rr c_rs; c_rs c_ss].
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients2D {
    pub nr: usize,
    pub ns: usize,
    pub crr: Vec<f64>,
    pub css: Vec<f64>,
    pub crs: Vec<f64>,
}

impl Coefficients2D {
    pub fn new(nr: usize, ns: usize, crr: Vec<f64>, css: Vec<f64>, crs: Vec<f64>) -> Result<Self> {
        let n = (nr + 1) * (ns + 1);
        for v in [&crr, &css, &crs] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    module: "sbp2d",
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let c = Coefficients2D {
            nr,
            ns,
            crr,
            css,
            crs,
        };
        c.check()?;
        Ok(c)
    }

    pub fn constant(nr: usize, ns: usize, crr: f64, css: f64, crs: f64) -> Result<Self> {
        let n = (nr + 1) * (ns + 1);
        Self::new(nr, ns, vec![crr; n], vec![css; n], vec![crs; n])
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(n, n, 1.0, 1.0, 0.0).expect("identity is SPD")
    }

    pub fn len(&self) -> usize {
        self.crr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crr.is_empty()
    }

    /// Positive definiteness at every node.
    pub fn check(&self) -> Result<()> {
        for node in 0..self.len() {
            let (a, b, c) = (self.crr[node], self.css[node], self.crs[node]);
            if !(a > 0.0 && b > 0.0 && a * b > c * c) {
                return Err(Error::CoefficientNotSpd {
                    module: "sbp2d",
                    node,
                    crr: a,
                    css: b,
                    crs: c,
                });
            }
        }
        Ok(())
    }

    pub fn psi_min_field(&self) -> Result<Vec<f64>> {
        psi_min_field(self)
    }
}

/// Smaller eigenvalue of [a c; c b], written to avoid cancellation.
#[inline]
pub fn psi_min(a: f64, b: f64, c: f64) -> f64 {
    let disc = ((a - b) * (a - b) + 4.0 * c * c).sqrt();
    let big = 0.5 * (a + b + disc);
    // product of eigenvalues is the determinant
    if big > 0.0 {
        (a * b - c * c) / big
    } else {
        0.5 * (a + b - disc)
    }
}

pub fn psi_min_field(c: &Coefficients2D) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(c.len());
    for node in 0..c.len() {
        let v = psi_min(c.crr[node], c.css[node], c.crs[node]);
        if !(v > 0.0) {
            return Err(Error::CoefficientNotSpd {
                module: "sbp2d",
                node,
                crr: c.crr[node],
                css: c.css[node],
                crs: c.crs[node],
            });
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FaceOperators {
    pub face: Face,
    /// Selection of the face points from the volume.
    pub l: Csr,
    /// Weighted boundary derivative.
    pub g: Csr,
    pub sj: Vec<f64>,
    pub hface: Vec<f64>,
    /// Volume index of each face point.
    pub nodes: Vec<usize>,
}

pub fn build_face_operators(
    face: Face,
    ops: &Operators2D,
    c: &Coefficients2D,
    sj: &[f64],
) -> Result<FaceOperators> {
    ops.check_len("sbp2d", c.len())?;
    let m = ops.face_len(face);
    if sj.len() != m {
        return Err(Error::LengthMismatch {
            module: "sbp2d",
            expected: m,
            got: sj.len(),
        });
    }
    let np = ops.size();
    let (nr, ns) = (ops.nr(), ops.ns());
    let nodes: Vec<usize> = (0..m).map(|t| ops.face_node(face, t)).collect();
    let l = Csr::from_triplets(m, np, nodes.iter().enumerate().map(|(t, &v)| (t, v, 1.0)).collect());

    let mut g = Triplets::new(m, np);
    let sign = if face.is_upper() { 1.0 } else { -1.0 };
    match face {
        Face::R0 | Face::R1 => {
            let i = if face == Face::R0 { 0 } else { nr };
            let normal = if face == Face::R0 { &ops.r.d0 } else { &ops.r.dn };
            for j in 0..=ns {
                let node = ops.idx(i, j);
                let w = sign * ops.s.hdiag[j] * c.crr[node];
                for (a, v) in normal.iter().enumerate() {
                    if *v != 0.0 {
                        g.push(j, ops.idx(a, j), w * v);
                    }
                }
                let x = sign * c.crs[node];
                for &(jj, q) in ops.s.q_row(j) {
                    g.push(j, ops.idx(i, jj), x * q);
                }
            }
        }
        Face::S0 | Face::S1 => {
            let j = if face == Face::S0 { 0 } else { ns };
            let normal = if face == Face::S0 { &ops.s.d0 } else { &ops.s.dn };
            for i in 0..=nr {
                let node = ops.idx(i, j);
                let w = sign * ops.r.hdiag[i] * c.css[node];
                for (b, v) in normal.iter().enumerate() {
                    if *v != 0.0 {
                        g.push(i, ops.idx(i, b), w * v);
                    }
                }
                let x = sign * c.crs[node];
                for &(ii, q) in ops.r.q_row(i) {
                    g.push(i, ops.idx(ii, j), x * q);
                }
            }
        }
    }
    Ok(FaceOperators {
        face,
        l,
        g: g.into_csr(),
        sj: sj.to_vec(),
        hface: ops.face_norm(face).to_vec(),
        nodes,
    })
}

/// All four faces with the given surface Jacobians (indexed by slot).
pub fn build_all_faces(
    ops: &Operators2D,
    c: &Coefficients2D,
    sj: &[Vec<f64>; 4],
) -> Result<[FaceOperators; 4]> {
    Ok([
        build_face_operators(Face::R0, ops, c, &sj[0])?,
        build_face_operators(Face::R1, ops, c, &sj[1])?,
        build_face_operators(Face::S0, ops, c, &sj[2])?,
        build_face_operators(Face::S1, ops, c, &sj[3])?,
    ])
}

#[derive(Clone, Debug)]
pub struct StiffnessBundle {
    pub arr: Csr,
    pub ass: Csr,
    pub ars: Csr,
    pub asr: Csr,
    pub total: Csr,
}

fn push_rr(ops: &Operators2D, c: &Coefficients2D, t: &mut Triplets, scale: f64) {
    let (nr, ns) = (ops.nr(), ops.ns());
    let mut line = vec![0.0; nr + 1];
    for j in 0..=ns {
        for (i, v) in line.iter_mut().enumerate() {
            *v = c.crr[ops.idx(i, j)];
        }
        let w = scale * ops.s.hdiag[j];
        ops.r
            .stiffness_entries(&line, |a, b, v| t.push(ops.idx(a, j), ops.idx(b, j), w * v));
    }
}

fn push_ss(ops: &Operators2D, c: &Coefficients2D, t: &mut Triplets, scale: f64) {
    let (nr, ns) = (ops.nr(), ops.ns());
    let mut line = vec![0.0; ns + 1];
    for i in 0..=nr {
        for (j, v) in line.iter_mut().enumerate() {
            *v = c.css[ops.idx(i, j)];
        }
        let w = scale * ops.r.hdiag[i];
        ops.s
            .stiffness_entries(&line, |a, b, v| t.push(ops.idx(i, a), ops.idx(i, b), w * v));
    }
}

/// Entries of A_rs: Q_r[i, i'] c_rs(i, j) Q_s[j, j''] at ((i', j), (i, j'')).
/// With `transpose` the entries of A_sr are emitted instead.
fn push_rs(ops: &Operators2D, c: &Coefficients2D, t: &mut Triplets, scale: f64, transpose: bool) {
    for j in 0..=ops.ns() {
        for i in 0..=ops.nr() {
            let x = scale * c.crs[ops.idx(i, j)];
            if x == 0.0 {
                continue;
            }
            for &(ip, qr) in ops.r.q_row(i) {
                let row = ops.idx(ip, j);
                for &(jj, qs) in ops.s.q_row(j) {
                    let col = ops.idx(i, jj);
                    if transpose {
                        t.push(col, row, x * qr * qs);
                    } else {
                        t.push(row, col, x * qr * qs);
                    }
                }
            }
        }
    }
}

pub fn build_stiffness(ops: &Operators2D, c: &Coefficients2D) -> Result<StiffnessBundle> {
    ops.check_len("sbp2d", c.len())?;
    c.check()?;
    let np = ops.size();
    let mut arr = Triplets::new(np, np);
    push_rr(ops, c, &mut arr, 1.0);
    let mut ass = Triplets::new(np, np);
    push_ss(ops, c, &mut ass, 1.0);
    let mut ars = Triplets::new(np, np);
    push_rs(ops, c, &mut ars, 1.0, false);
    let mut asr = Triplets::new(np, np);
    push_rs(ops, c, &mut asr, 1.0, true);
    let mut total = Triplets::new(np, np);
    total.entries.extend(arr.entries.iter().cloned());
    total.entries.extend(ass.entries.iter().cloned());
    total.entries.extend(ars.entries.iter().cloned());
    total.entries.extend(asr.entries.iter().cloned());
    Ok(StiffnessBundle {
        arr: arr.into_csr(),
        ass: ass.into_csr(),
        ars: ars.into_csr(),
        asr: asr.into_csr(),
        total: total.into_csr(),
    })
}

/// Only the summed stiffness, without keeping the four parts.
pub fn build_stiffness_total(ops: &Operators2D, c: &Coefficients2D) -> Result<Csr> {
    ops.check_len("sbp2d", c.len())?;
    c.check()?;
    let np = ops.size();
    let mut t = Triplets::new(np, np);
    push_rr(ops, c, &mut t, 1.0);
    push_ss(ops, c, &mut t, 1.0);
    push_rs(ops, c, &mut t, 1.0, false);
    push_rs(ops, c, &mut t, 1.0, true);
    Ok(t.into_csr())
}

fn dense_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .filter(|&j| m[(i, j)] != 0.0)
                .map(|j| (j, m[(i, j)]))
                .collect()
        })
        .collect()
}

/// Max-abs entry of (H⊗H)(−D_rr − D_rs − D_sr − D_ss) − (A − Σ L_kᵀG_k).
/// The second-derivative matrices are built independently of the
/// stiffness assembly, from the 1D D2 and D operators.
pub fn verify_split_identity(
    ops: &Operators2D,
    c: &Coefficients2D,
    stiffness: &StiffnessBundle,
    faces: &[FaceOperators],
) -> Result<f64> {
    let np = ops.size();
    let (nr, ns) = (ops.nr(), ops.ns());
    let hvol = ops.volume_norm();
    let mut lhs = Triplets::new(np, np);

    for j in 0..=ns {
        let line: Vec<f64> = (0..=nr).map(|i| c.crr[ops.idx(i, j)]).collect();
        let d2 = ops.r.second_derivative(&line)?.d2;
        for (a, row) in dense_rows(&d2).into_iter().enumerate() {
            let ra = ops.idx(a, j);
            for (b, v) in row {
                lhs.push(ra, ops.idx(b, j), -hvol[ra] * v);
            }
        }
    }
    for i in 0..=nr {
        let line: Vec<f64> = (0..=ns).map(|j| c.css[ops.idx(i, j)]).collect();
        let d2 = ops.s.second_derivative(&line)?.d2;
        for (a, row) in dense_rows(&d2).into_iter().enumerate() {
            let ra = ops.idx(i, a);
            for (b, v) in row {
                lhs.push(ra, ops.idx(i, b), -hvol[ra] * v);
            }
        }
    }
    // D_rs = (I ⊗ D_r) C_rs (D_s ⊗ I), D_sr = (D_s ⊗ I) C_rs (I ⊗ D_r)
    let mut dr = Triplets::new(np, np);
    let mut ds = Triplets::new(np, np);
    for j in 0..=ns {
        for i in 0..=nr {
            let row = ops.idx(i, j);
            for &(ii, v) in ops.r.d_row(i) {
                dr.push(row, ops.idx(ii, j), v);
            }
            for &(jj, v) in ops.s.d_row(j) {
                ds.push(row, ops.idx(i, jj), v);
            }
        }
    }
    let dr = dr.into_csr();
    let ds = ds.into_csr();
    let crs = Csr::diagonal(&c.crs);
    let drs = dr.mul(&crs).mul(&ds);
    let dsr = ds.mul(&crs).mul(&dr);
    let hmat = Csr::diagonal(&hvol);
    lhs.extend_csr(&hmat.mul(&drs.add(&dsr)), -1.0);
    let lhs = lhs.into_csr();

    let mut rhs = stiffness.total.clone();
    for f in faces {
        rhs = rhs.sub(&f.l.transpose().mul(&f.g));
    }
    Ok(lhs.sub(&rhs).max_abs())
}

/// Grid coordinates r_i = i/N_r and s_j = j/N_s.
pub fn reference_nodes(ops: &Operators2D) -> (Vec<f64>, Vec<f64>) {
    let r = (0..=ops.nr()).map(|i| i as f64 / ops.nr() as f64).collect();
    let s = (0..=ops.ns()).map(|j| j as f64 / ops.ns() as f64).collect();
    (r, s)
}

//! Multi-block meshes: blocks, conforming interfaces, boundary tags and the
//! numbering of trace unknowns.
//!
//! Text format, one record per line, `#` starts a comment. Blocks and faces
//! are numbered from 1 in files.
//!
//! ```text
//! block x0 y0 x1 y1 x2 y2 x3 y3    corners at (r,s) = (0,0) (1,0) (1,1) (0,1)
//! arc k cx cy radius               face k of the previous block is an arc
//! iface B+ k+ B- k- aligned|reversed [jump]
//! bc B k D|N
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BlockMapping, Curve, Point};
use crate::sbp2d::Face;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcTag {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Aligned,
    Reversed,
}

/// Identity or reversal so both sides of a face address the same points.
pub fn orient_face_vector<T: Clone>(v: &[T], o: Orientation) -> Vec<T> {
    match o {
        Orientation::Aligned => v.to_vec(),
        Orientation::Reversed => v.iter().rev().cloned().collect(),
    }
}

/// Checked variant for callers holding an expected face length.
pub fn orient_face_vector_checked<T: Clone>(v: &[T], o: Orientation, len: usize) -> Result<Vec<T>> {
    if v.len() != len {
        return Err(Error::LengthMismatch {
            module: "mesh",
            expected: len,
            got: v.len(),
        });
    }
    Ok(orient_face_vector(v, o))
}

#[derive(Clone, Debug)]
pub struct BlockSpec {
    /// Corners at (r, s) = (0,0), (1,0), (1,1), (0,1).
    pub corners: [Point; 4],
    /// Edge curves by face slot, each running in increasing r or s.
    pub edges: [Curve; 4],
}

impl BlockSpec {
    pub fn straight(corners: [Point; 4]) -> Self {
        let [v0, v1, v2, v3] = corners;
        BlockSpec {
            corners,
            edges: [
                Curve::line(v0, v3),
                Curve::line(v1, v2),
                Curve::line(v0, v1),
                Curve::line(v3, v2),
            ],
        }
    }

    /// Endpoints of a face in its increasing parameter direction.
    pub fn face_endpoints(&self, face: Face) -> (Point, Point) {
        let [v0, v1, v2, v3] = self.corners;
        match face {
            Face::R0 => (v0, v3),
            Face::R1 => (v1, v2),
            Face::S0 => (v0, v1),
            Face::S1 => (v3, v2),
        }
    }

    /// Replaces face k with a circular arc through its endpoints.
    pub fn set_arc(&mut self, face: Face, center: Point, radius: f64) -> Result<()> {
        let (a, b) = self.face_endpoints(face);
        self.edges[face.slot()] = Curve::arc(a, b, center, radius)?;
        Ok(())
    }

    pub fn mapping(&self) -> Result<BlockMapping> {
        BlockMapping::transfinite(self.edges.clone())
    }

    pub fn face_point(&self, face: Face, t: f64) -> Point {
        self.edges[face.slot()].point(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interface {
    pub plus: (usize, Face),
    pub minus: (usize, Face),
    /// How the minus side's face ordering relates to the plus side's.
    pub orientation: Orientation,
    pub jump: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub block: usize,
    pub face: Face,
    pub tag: BcTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceRole {
    Boundary(BcTag),
    Interface { index: usize, side: Side },
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub blocks: Vec<BlockSpec>,
    pub interfaces: Vec<Interface>,
    pub boundary: Vec<BoundaryFace>,
    roles: Vec<[FaceRole; 4]>,
}

const CONFORM_TOL: f64 = 1e-10;

fn gap(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Validates the face bookkeeping and conformity of every interface.
    pub fn new(
        blocks: Vec<BlockSpec>,
        interfaces: Vec<Interface>,
        boundary: Vec<BoundaryFace>,
    ) -> Result<Self> {
        let nb = blocks.len();
        let mut roles: Vec<[Option<FaceRole>; 4]> = vec![[None; 4]; nb];
        let mut claim = |b: usize, f: Face, role: FaceRole| -> Result<()> {
            if b >= nb {
                return Err(Error::Mesh(format!("block {} does not exist", b + 1)));
            }
            let slot = &mut roles[b][f.slot()];
            if slot.is_some() {
                return Err(Error::Mesh(format!(
                    "face {} of block {} is listed twice",
                    f.number(),
                    b + 1
                )));
            }
            *slot = Some(role);
            Ok(())
        };
        for (index, iface) in interfaces.iter().enumerate() {
            claim(iface.plus.0, iface.plus.1, FaceRole::Interface { index, side: Side::Plus })?;
            claim(iface.minus.0, iface.minus.1, FaceRole::Interface { index, side: Side::Minus })?;
        }
        for bf in &boundary {
            claim(bf.block, bf.face, FaceRole::Boundary(bf.tag))?;
        }
        let mut done = Vec::with_capacity(nb);
        for (b, r) in roles.iter().enumerate() {
            let mut out = [FaceRole::Boundary(BcTag::Dirichlet); 4];
            for f in Face::ALL {
                out[f.slot()] = r[f.slot()].ok_or_else(|| {
                    Error::Mesh(format!("face {} of block {} has no tag", f.number(), b + 1))
                })?;
            }
            done.push(out);
        }
        let mesh = Mesh {
            blocks,
            interfaces,
            boundary,
            roles: done,
        };
        for b in 0..nb {
            mesh.blocks[b].mapping()?;
        }
        for (k, iface) in mesh.interfaces.iter().enumerate() {
            let g = mesh.interface_gap(iface, 16);
            if g > CONFORM_TOL {
                return Err(Error::Mesh(format!(
                    "interface {} (block {} face {} / block {} face {}) is not conforming, gap {g:e}",
                    k + 1,
                    iface.plus.0 + 1,
                    iface.plus.1.number(),
                    iface.minus.0 + 1,
                    iface.minus.1.number()
                )));
            }
        }
        Ok(mesh)
    }

    /// Largest distance between matching points of the two sides of a face
    /// sampled at n+1 uniform parameters.
    pub fn interface_gap(&self, iface: &Interface, n: usize) -> f64 {
        let pb = &self.blocks[iface.plus.0];
        let mb = &self.blocks[iface.minus.0];
        (0..=n)
            .map(|t| {
                let tp = t as f64 / n as f64;
                let tm = match iface.orientation {
                    Orientation::Aligned => tp,
                    Orientation::Reversed => 1.0 - tp,
                };
                gap(pb.face_point(iface.plus.1, tp), mb.face_point(iface.minus.1, tm))
            })
            .fold(0.0, f64::max)
    }

    /// Largest gap over all interfaces at the grid points of an N grid.
    pub fn conformity_gap(&self, n: usize) -> f64 {
        self.interfaces
            .iter()
            .map(|i| self.interface_gap(i, n))
            .fold(0.0, f64::max)
    }

    /// Builds interfaces by matching face endpoints; faces left over are
    /// tagged by `tag` from their midpoint. `plus_first` decides which block
    /// of a matched pair is the plus side and `jump` marks jump interfaces.
    pub fn from_blocks(
        blocks: Vec<BlockSpec>,
        tag: impl Fn(Point) -> BcTag,
        plus_first: impl Fn(usize, usize) -> bool,
        jump: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let key = |p: Point| ((p[0] * 1e8).round() as i64, (p[1] * 1e8).round() as i64);
        let mut open: HashMap<((i64, i64), (i64, i64)), (usize, Face)> = HashMap::new();
        let mut interfaces = Vec::new();
        for (b, blk) in blocks.iter().enumerate() {
            for f in Face::ALL {
                let (a, c) = blk.face_endpoints(f);
                let (ka, kc) = (key(a), key(c));
                let k = if ka <= kc { (ka, kc) } else { (kc, ka) };
                if let Some((ob, of)) = open.remove(&k) {
                    let (oa, _) = blocks[ob].face_endpoints(of);
                    let same_start = key(oa) == ka;
                    let orientation = if same_start {
                        Orientation::Aligned
                    } else {
                        Orientation::Reversed
                    };
                    let (plus, minus) = if plus_first(ob, b) {
                        ((ob, of), (b, f))
                    } else {
                        ((b, f), (ob, of))
                    };
                    interfaces.push(Interface {
                        plus,
                        minus,
                        orientation,
                        jump: jump(ob, b),
                    });
                } else {
                    open.insert(k, (b, f));
                }
            }
        }
        let mut boundary: Vec<BoundaryFace> = open
            .into_values()
            .map(|(b, f)| {
                let mid = blocks[b].face_point(f, 0.5);
                BoundaryFace {
                    block: b,
                    face: f,
                    tag: tag(mid),
                }
            })
            .collect();
        boundary.sort_by_key(|bf| (bf.block, bf.face));
        Mesh::new(blocks, interfaces, boundary)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_interfaces(&self) -> usize {
        self.interfaces.len()
    }

    pub fn role(&self, block: usize, face: Face) -> FaceRole {
        self.roles[block][face.slot()]
    }

    pub fn roles(&self, block: usize) -> [FaceRole; 4] {
        self.roles[block]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks: Vec<BlockSpec> = Vec::new();
        let mut interfaces = Vec::new();
        let mut boundary = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tok: Vec<&str> = content.split_whitespace().collect();
            let perr = |msg: String| Error::Parse { line, msg };
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| perr(format!("expected a number, found '{s}'")))
            };
            let block_id = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(b) if b >= 1 => Ok(b - 1),
                    _ => Err(perr(format!("expected a block number (from 1), found '{s}'"))),
                }
            };
            let face_id = |s: &str| -> Result<Face> {
                s.parse::<usize>()
                    .ok()
                    .and_then(|k| Face::from_index(k).ok())
                    .ok_or_else(|| perr(format!("expected a face number 1..4, found '{s}'")))
            };
            let want = |n: usize| -> Result<()> {
                if tok.len() != n {
                    return Err(perr(format!(
                        "'{}' takes {} fields, found {}",
                        tok[0],
                        n - 1,
                        tok.len() - 1
                    )));
                }
                Ok(())
            };
            match tok[0] {
                "block" => {
                    want(9)?;
                    let v: Vec<f64> = tok[1..].iter().map(|s| num(s)).collect::<Result<_>>()?;
                    blocks.push(BlockSpec::straight([
                        [v[0], v[1]],
                        [v[2], v[3]],
                        [v[4], v[5]],
                        [v[6], v[7]],
                    ]));
                }
                "arc" => {
                    want(5)?;
                    let f = face_id(tok[1])?;
                    let (cx, cy, rad) = (num(tok[2])?, num(tok[3])?, num(tok[4])?);
                    let blk = blocks
                        .last_mut()
                        .ok_or_else(|| perr("'arc' before any block".into()))?;
                    blk.set_arc(f, [cx, cy], rad)
                        .map_err(|e| perr(format!("arc endpoints off the circle: {e}")))?;
                }
                "iface" => {
                    if tok.len() != 6 && tok.len() != 7 {
                        return Err(perr("'iface' takes 5 or 6 fields".into()));
                    }
                    let orientation = match tok[5] {
                        "aligned" => Orientation::Aligned,
                        "reversed" => Orientation::Reversed,
                        o => return Err(perr(format!("unknown orientation '{o}'"))),
                    };
                    let jump = match tok.get(6) {
                        None => false,
                        Some(&"jump") => true,
                        Some(o) => return Err(perr(format!("unknown interface flag '{o}'"))),
                    };
                    interfaces.push(Interface {
                        plus: (block_id(tok[1])?, face_id(tok[2])?),
                        minus: (block_id(tok[3])?, face_id(tok[4])?),
                        orientation,
                        jump,
                    });
                }
                "bc" => {
                    want(4)?;
                    let tag = match tok[3] {
                        "D" => BcTag::Dirichlet,
                        "N" => BcTag::Neumann,
                        t => return Err(perr(format!("unknown boundary tag '{t}'"))),
                    };
                    boundary.push(BoundaryFace {
                        block: block_id(tok[1])?,
                        face: face_id(tok[2])?,
                        tag,
                    });
                }
                other => return Err(perr(format!("unknown record '{other}'"))),
            }
        }
        Mesh::new(blocks, interfaces, boundary)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for blk in &self.blocks {
            let c = blk.corners;
            let _ = writeln!(
                s,
                "block {} {} {} {} {} {} {} {}",
                c[0][0], c[0][1], c[1][0], c[1][1], c[2][0], c[2][1], c[3][0], c[3][1]
            );
            for f in Face::ALL {
                if let Curve::Arc { center, radius, .. } = &blk.edges[f.slot()] {
                    let _ = writeln!(s, "arc {} {} {} {}", f.number(), center[0], center[1], radius);
                }
            }
        }
        for i in &self.interfaces {
            let _ = writeln!(
                s,
                "iface {} {} {} {} {}{}",
                i.plus.0 + 1,
                i.plus.1.number(),
                i.minus.0 + 1,
                i.minus.1.number(),
                match i.orientation {
                    Orientation::Aligned => "aligned",
                    Orientation::Reversed => "reversed",
                },
                if i.jump { " jump" } else { "" }
            );
        }
        for b in &self.boundary {
            let _ = writeln!(
                s,
                "bc {} {} {}",
                b.block + 1,
                b.face.number(),
                match b.tag {
                    BcTag::Dirichlet => "D",
                    BcTag::Neumann => "N",
                }
            );
        }
        s
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Mesh::parse(&text)
}

/// Offsets of the unknowns for a run with N intervals per direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceNumbering {
    pub n: usize,
    pub num_blocks: usize,
    /// Start of each interface's trace values.
    pub offsets: Vec<usize>,
    pub orientation: Vec<Orientation>,
    pub trace_size: usize,
    pub volume_size: usize,
}

impl TraceNumbering {
    pub fn new(mesh: &Mesh, n: usize) -> Self {
        let m = n + 1;
        let offsets = (0..mesh.num_interfaces()).map(|f| f * m).collect();
        TraceNumbering {
            n,
            num_blocks: mesh.num_blocks(),
            offsets,
            orientation: mesh.interfaces.iter().map(|i| i.orientation).collect(),
            trace_size: m * mesh.num_interfaces(),
            volume_size: m * m * mesh.num_blocks(),
        }
    }

    pub fn block_size(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn block_offset(&self, b: usize) -> usize {
        b * self.block_size()
    }

    /// Global trace index of face point t as seen from one side. The trace
    /// is stored in the plus side's ordering.
    pub fn trace_index(&self, iface: usize, side: Side, t: usize) -> usize {
        let local = match (side, self.orientation[iface]) {
            (Side::Minus, Orientation::Reversed) => self.n - t,
            _ => t,
        };
        self.offsets[iface] + local
    }

    /// Global indices of a face seen from one side, in that side's ordering.
    pub fn selection(&self, iface: usize, side: Side) -> Vec<usize> {
        (0..=self.n).map(|t| self.trace_index(iface, side, t)).collect()
    }
}

pub fn build_trace_numbering(mesh: &Mesh, n: usize) -> TraceNumbering {
    TraceNumbering::new(mesh, n)
}

pub mod builtin {
    //! Meshes available by name.

    use std::f64::consts::PI;

    use super::*;

    pub const NAMES: [&str; 3] = ["single", "two-block", "disk56"];

    pub fn by_name(name: &str) -> Result<Mesh> {
        let name = name.strip_prefix("builtin:").unwrap_or(name);
        match name {
            "single" => single(),
            "two-block" => two_block(),
            "disk56" => disk56(),
            _ => Err(Error::Mesh(format!(
                "unknown builtin mesh '{name}' (known: {})",
                NAMES.join(", ")
            ))),
        }
    }

    /// The unit square with Dirichlet data on every face.
    pub fn single() -> Result<Mesh> {
        Mesh::from_blocks(
            vec![BlockSpec::straight([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])],
            |_| BcTag::Dirichlet,
            |a, b| a < b,
            |_, _| false,
        )
    }

    /// [0, 1]² and [1, 2]×[0, 1] joined along x = 1, Dirichlet outside.
    pub fn two_block() -> Result<Mesh> {
        Mesh::from_blocks(
            vec![
                BlockSpec::straight([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                BlockSpec::straight([[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]),
            ],
            |_| BcTag::Dirichlet,
            |a, b| a < b,
            |_, _| false,
        )
    }

    /// Half-width of the square separating the outer frame from the annulus.
    pub const FRAME_INNER: f64 = 1.35;
    /// Half-width of the core square inside the disk.
    pub const CORE: f64 = 0.4;
    /// Blocks 0..DISK_BLOCKS lie inside the unit circle.
    pub const DISK_BLOCKS: usize = 12;

    fn rot(p: Point, quarter: usize) -> Point {
        let mut q = p;
        for _ in 0..quarter {
            q = [-q[1], q[0]];
        }
        q
    }

    fn mid(a: Point, b: Point) -> Point {
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    fn lerp(a: Point, b: Point, t: f64) -> Point {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    fn on_circle(p: Point) -> bool {
        (p[0].hypot(p[1]) - 1.0).abs() < 1e-12
    }

    fn quad(v: [Point; 4]) -> BlockSpec {
        let mut b = BlockSpec::straight(v);
        for f in Face::ALL {
            let (a, c) = b.face_endpoints(f);
            if on_circle(a) && on_circle(c) {
                b.set_arc(f, [0.0, 0.0], 1.0).expect("endpoints on the unit circle");
            }
        }
        b
    }

    /// Four blocks joining one inner edge t0→t1 to three outer edges
    /// through o0..o3.
    fn transition(t0: Point, t1: Point, o: [Point; 4]) -> [[Point; 4]; 4] {
        let x = mid(lerp(t0, t1, 1.0 / 3.0), o[1]);
        let y = mid(lerp(t0, t1, 2.0 / 3.0), o[2]);
        [
            [t0, o[0], o[1], x],
            [x, o[1], o[2], y],
            [y, o[2], o[3], t1],
            [t0, x, y, t1],
        ]
    }

    /// A disk of radius 1 inside the square [-2, 2]². The disk holds a 2×2
    /// core and a ring of 8 blocks; an annulus of 8 blocks reaches the
    /// square [-1.35, 1.35]²; an outer frame of 36 blocks grades from 8
    /// edges on that square to 32 edges on the boundary. Interfaces on the
    /// unit circle are jump interfaces with the disk on the plus side. The
    /// faces x = ±2 are Dirichlet and y = ±2 Neumann.
    pub fn disk56() -> Result<Mesh> {
        disk56_layout(CORE, FRAME_INNER, FRAME_INNER)
    }

    /// The disk56 topology with the core half-width `core` and the annulus'
    /// outer octagon through (axis, 0) and (diag, diag).
    pub fn disk56_layout(core: f64, axis: f64, diag: f64) -> Result<Mesh> {
        let a = core;
        let mut v: Vec<[Point; 4]> = Vec::new();

        // Core 2×2.
        for (x0, y0) in [(-a, -a), (0.0, -a), (-a, 0.0), (0.0, 0.0)] {
            v.push([[x0, y0], [x0 + a, y0], [x0 + a, y0 + a], [x0, y0 + a]]);
        }
        // 8-point loops at 45° steps starting from angle -45°.
        let loop8 = |axis: f64, diag: f64| -> Vec<Point> {
            (0..8)
                .map(|k| {
                    let base = [[diag, -diag], [axis, 0.0]][k % 2];
                    rot(base, k / 2)
                })
                .collect()
        };
        let circle: Vec<Point> = (0..8)
            .map(|k| {
                let th = -PI / 4.0 + k as f64 * PI / 4.0;
                let (s, c) = th.sin_cos();
                // exact values keep endpoint matching robust
                [snap(c), snap(s)]
            })
            .collect();
        let core = loop8(a, a);
        let square = loop8(axis, diag);
        // Disk ring.
        for k in 0..8 {
            let k1 = (k + 1) % 8;
            v.push([core[k], circle[k], circle[k1], core[k1]]);
        }
        assert_eq!(v.len(), DISK_BLOCKS);
        // Annulus.
        for k in 0..8 {
            let k1 = (k + 1) % 8;
            v.push([circle[k], square[k], square[k1], circle[k1]]);
        }
        // Outer frame, built on the x = 2 side and rotated.
        for q in 0..4 {
            let r = |p: Point| rot(p, q);
            v.push([r([diag, diag]), r([2.0, 1.5]), r([2.0, 2.0]), r([1.5, 2.0])]);
            for (t0, t1, y0) in [([diag, -diag], [axis, 0.0], -1.5), ([axis, 0.0], [diag, diag], 0.0)] {
                let o = [
                    [2.0, y0],
                    [2.0, y0 + 0.5],
                    [2.0, y0 + 1.0],
                    [2.0, y0 + 1.5],
                ];
                for blk in transition(t0, t1, o) {
                    v.push(blk.map(r));
                }
            }
        }
        let blocks: Vec<BlockSpec> = v.into_iter().map(quad).collect();
        Mesh::from_blocks(
            blocks,
            |m| {
                if (m[0].abs() - 2.0).abs() < 1e-12 {
                    BcTag::Dirichlet
                } else {
                    BcTag::Neumann
                }
            },
            |p, q| {
                let (pd, qd) = (p < DISK_BLOCKS, q < DISK_BLOCKS);
                if pd != qd {
                    pd
                } else {
                    p < q
                }
            },
            |p, q| (p < DISK_BLOCKS) != (q < DISK_BLOCKS),
        )
    }

    fn snap(v: f64) -> f64 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for c in [0.0, 1.0, -1.0, h, -h] {
            if (v - c).abs() < 1e-14 {
                return c;
            }
        }
        v
    }
}

//! Block mappings from the reference square, metric terms, surface
//! Jacobians, outward normals and the transformed coefficient tensor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sbp2d::{Coefficients2D, Face, Operators2D};

pub type Point = [f64; 2];

/// Position and first partials of a mapping at one reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapPoint {
    pub x: f64,
    pub y: f64,
    pub xr: f64,
    pub xs: f64,
    pub yr: f64,
    pub ys: f64,
}

/// A parametric curve on t ∈ [0, 1].
#[derive(Clone)]
pub enum Curve {
    Line { a: Point, b: Point },
    /// Circular arc swept from angle `theta0` to `theta1`.
    Arc {
        center: Point,
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
    /// Position and derivative at t.
    Custom(Arc<dyn Fn(f64) -> (Point, Point) + Send + Sync>),
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Curve::Line { a, b } => write!(f, "Line({a:?} -> {b:?})"),
            Curve::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => write!(f, "Arc(c={center:?}, r={radius}, {theta0} -> {theta1})"),
            Curve::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Curve {
    pub fn line(a: Point, b: Point) -> Curve {
        Curve::Line { a, b }
    }

    /// The shorter circular arc from `a` to `b` about `center`. Both
    /// endpoints must lie at distance `radius` from the center.
    pub fn arc(a: Point, b: Point, center: Point, radius: f64) -> Result<Curve> {
        for (k, q) in [a, b].iter().enumerate() {
            let d = (q[0] - center[0]).hypot(q[1] - center[1]);
            if (d - radius).abs() > 1e-10 * radius.max(1.0) {
                return Err(Error::CornerMismatch {
                    corner: k,
                    gap: (d - radius).abs(),
                });
            }
        }
        let theta0 = (a[1] - center[1]).atan2(a[0] - center[0]);
        let mut theta1 = (b[1] - center[1]).atan2(b[0] - center[0]);
        while theta1 - theta0 > PI {
            theta1 -= 2.0 * PI;
        }
        while theta1 - theta0 < -PI {
            theta1 += 2.0 * PI;
        }
        Ok(Curve::Arc {
            center,
            radius,
            theta0,
            theta1,
        })
    }

    pub fn eval(&self, t: f64) -> (Point, Point) {
        match self {
            Curve::Line { a, b } => (
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                [b[0] - a[0], b[1] - a[1]],
            ),
            Curve::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let w = theta1 - theta0;
                let th = theta0 + t * w;
                let (s, c) = th.sin_cos();
                (
                    [center[0] + radius * c, center[1] + radius * s],
                    [-radius * w * s, radius * w * c],
                )
            }
            Curve::Custom(f) => f(t),
        }
    }

    pub fn point(&self, t: f64) -> Point {
        self.eval(t).0
    }

    pub fn reversed(&self) -> Curve {
        match self {
            Curve::Line { a, b } => Curve::Line { a: *b, b: *a },
            Curve::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => Curve::Arc {
                center: *center,
                radius: *radius,
                theta0: *theta1,
                theta1: *theta0,
            },
            Curve::Custom(f) => {
                let f = f.clone();
                Curve::Custom(Arc::new(move |t| {
                    let (p, d) = f(1.0 - t);
                    (p, [-d[0], -d[1]])
                }))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingKind {
    Analytic,
    Transfinite,
}

#[derive(Clone)]
pub struct BlockMapping {
    pub kind: MappingKind,
    f: Arc<dyn Fn(f64, f64) -> MapPoint + Send + Sync>,
}

impl fmt::Debug for BlockMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockMapping({:?})", self.kind)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl BlockMapping {
    /// A mapping given with its exact partials.
    pub fn analytic(f: impl Fn(f64, f64) -> MapPoint + Send + Sync + 'static) -> Self {
        BlockMapping {
            kind: MappingKind::Analytic,
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::analytic(|r, s| MapPoint {
            x: r,
            y: s,
            xr: 1.0,
            xs: 0.0,
            yr: 0.0,
            ys: 1.0,
        })
    }

    /// Bilinear map of the reference square onto the quadrilateral with
    /// corners at (r, s) = (0,0), (1,0), (1,1), (0,1).
    pub fn bilinear(v: [Point; 4]) -> Self {
        Self::transfinite([
            Curve::line(v[0], v[3]),
            Curve::line(v[1], v[2]),
            Curve::line(v[0], v[1]),
            Curve::line(v[3], v[2]),
        ])
        .expect("straight edges meet at the corners")
    }

    /// Coons patch from the edges of faces 1..4. Faces 1 and 2 are
    /// parametrized by s, faces 3 and 4 by r, all in increasing direction.
    pub fn transfinite(edges: [Curve; 4]) -> Result<Self> {
        let [e1, e2, e3, e4] = edges;
        let p00 = e3.point(0.0);
        let p10 = e3.point(1.0);
        let p01 = e4.point(0.0);
        let p11 = e4.point(1.0);
        let pairs = [
            (e1.point(0.0), p00),
            (e2.point(0.0), p10),
            (e1.point(1.0), p01),
            (e2.point(1.0), p11),
        ];
        for (k, (a, b)) in pairs.iter().enumerate() {
            let gap = dist(*a, *b);
            let scale = 1.0f64.max(a[0].abs()).max(a[1].abs());
            if gap > 1e-12 * scale {
                return Err(Error::CornerMismatch { corner: k, gap });
            }
        }
        let f = move |r: f64, s: f64| {
            let (l, dl) = e1.eval(s);
            let (rr, drr) = e2.eval(s);
            let (b, db) = e3.eval(r);
            let (t, dt) = e4.eval(r);
            let mut out = [[0.0; 3]; 2];
            for c in 0..2 {
                let corner = (1.0 - r) * (1.0 - s) * p00[c]
                    + r * (1.0 - s) * p10[c]
                    + (1.0 - r) * s * p01[c]
                    + r * s * p11[c];
                let val = (1.0 - r) * l[c] + r * rr[c] + (1.0 - s) * b[c] + s * t[c] - corner;
                let dr = -l[c] + rr[c] + (1.0 - s) * db[c] + s * dt[c]
                    - (-(1.0 - s) * p00[c] + (1.0 - s) * p10[c] - s * p01[c] + s * p11[c]);
                let ds = (1.0 - r) * dl[c] + r * drr[c] - b[c] + t[c]
                    - (-(1.0 - r) * p00[c] - r * p10[c] + (1.0 - r) * p01[c] + r * p11[c]);
                out[c] = [val, dr, ds];
            }
            MapPoint {
                x: out[0][0],
                y: out[1][0],
                xr: out[0][1],
                xs: out[0][2],
                yr: out[1][1],
                ys: out[1][2],
            }
        };
        Ok(BlockMapping {
            kind: MappingKind::Transfinite,
            f: Arc::new(f),
        })
    }

    pub fn eval(&self, r: f64, s: f64) -> MapPoint {
        (self.f)(r, s)
    }
}

/// Where metric partials come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetricMode {
    /// Exact partials of the mapping.
    #[default]
    Analytic,
    /// The SBP first derivative applied to grid coordinates.
    Discrete,
}

#[derive(Clone, Debug)]
pub struct MetricTerms {
    pub nr: usize,
    pub ns: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xr: Vec<f64>,
    pub xs: Vec<f64>,
    pub yr: Vec<f64>,
    pub ys: Vec<f64>,
    pub j: Vec<f64>,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
}

impl MetricTerms {
    fn from_partials(
        nr: usize,
        ns: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        xr: Vec<f64>,
        xs: Vec<f64>,
        yr: Vec<f64>,
        ys: Vec<f64>,
    ) -> Result<Self> {
        let n = x.len();
        let mut j = vec![0.0; n];
        let (mut rx, mut ry, mut sx, mut sy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let jac = xr[k] * ys[k] - xs[k] * yr[k];
            if !(jac > 0.0) {
                let (i, jj) = (k % (nr + 1), k / (nr + 1));
                return Err(Error::DegenerateMapping {
                    r: i as f64 / nr as f64,
                    s: jj as f64 / ns as f64,
                    jac,
                });
            }
            j[k] = jac;
            rx[k] = ys[k] / jac;
            sy[k] = xr[k] / jac;
            sx[k] = -yr[k] / jac;
            ry[k] = -xs[k] / jac;
        }
        Ok(MetricTerms {
            nr,
            ns,
            x,
            y,
            xr,
            xs,
            yr,
            ys,
            j,
            rx,
            ry,
            sx,
            sy,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Metrics on an (N_r+1)×(N_s+1) grid from the exact partials.
pub fn evaluate_metrics(mapping: &BlockMapping, nr: usize, ns: usize) -> Result<MetricTerms> {
    let n = (nr + 1) * (ns + 1);
    let mut v: [Vec<f64>; 6] = Default::default();
    for a in v.iter_mut() {
        a.reserve(n);
    }
    for j in 0..=ns {
        for i in 0..=nr {
            let m = mapping.eval(i as f64 / nr as f64, j as f64 / ns as f64);
            for (a, val) in v.iter_mut().zip([m.x, m.y, m.xr, m.xs, m.yr, m.ys]) {
                a.push(val);
            }
        }
    }
    let [x, y, xr, xs, yr, ys] = v;
    MetricTerms::from_partials(nr, ns, x, y, xr, xs, yr, ys)
}

/// Metrics with partials from the SBP first derivative of the coordinates.
pub fn evaluate_metrics_discrete(mapping: &BlockMapping, ops: &Operators2D) -> Result<MetricTerms> {
    let exact = evaluate_metrics(mapping, ops.nr(), ops.ns())?;
    let n = exact.len();
    let (mut xr, mut xs, mut yr, mut ys) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..=ops.ns() {
        for i in 0..=ops.nr() {
            let k = ops.idx(i, j);
            for &(ii, d) in ops.r.d_row(i) {
                let q = ops.idx(ii, j);
                xr[k] += d * exact.x[q];
                yr[k] += d * exact.y[q];
            }
            for &(jj, d) in ops.s.d_row(j) {
                let q = ops.idx(i, jj);
                xs[k] += d * exact.x[q];
                ys[k] += d * exact.y[q];
            }
        }
    }
    MetricTerms::from_partials(ops.nr(), ops.ns(), exact.x, exact.y, xr, xs, yr, ys)
}

pub fn evaluate_metrics_with(
    mapping: &BlockMapping,
    ops: &Operators2D,
    mode: MetricMode,
) -> Result<MetricTerms> {
    match mode {
        MetricMode::Analytic => evaluate_metrics(mapping, ops.nr(), ops.ns()),
        MetricMode::Discrete => evaluate_metrics_discrete(mapping, ops),
    }
}

/// Per-face surface Jacobians and unit outward normals, indexed by face slot.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    pub sj: [Vec<f64>; 4],
    pub normal: [Vec<Point>; 4],
}

pub fn surface_geometry(m: &MetricTerms) -> Result<SurfaceGeometry> {
    let (nr, ns) = (m.nr, m.ns);
    let idx = |i: usize, j: usize| j * (nr + 1) + i;
    let mut sj: [Vec<f64>; 4] = Default::default();
    let mut normal: [Vec<Point>; 4] = Default::default();
    for face in Face::ALL {
        let len = if face.is_r_face() { ns + 1 } else { nr + 1 };
        for t in 0..len {
            let k = match face {
                Face::R0 => idx(0, t),
                Face::R1 => idx(nr, t),
                Face::S0 => idx(t, 0),
                Face::S1 => idx(t, ns),
            };
            let v = match face {
                Face::R0 => [-m.ys[k], m.xs[k]],
                Face::R1 => [m.ys[k], -m.xs[k]],
                Face::S0 => [m.yr[k], -m.xr[k]],
                Face::S1 => [-m.yr[k], m.xr[k]],
            };
            let s = v[0].hypot(v[1]);
            if !(s > 0.0) {
                return Err(Error::DegenerateEdge { face: face.number() });
            }
            sj[face.slot()].push(s);
            normal[face.slot()].push([v[0] / s, v[1] / s]);
        }
    }
    Ok(SurfaceGeometry { sj, normal })
}

/// Physical coefficient tensor b = [b_xx b_xy; b_xy b_yy] as a field.
#[derive(Clone)]
pub enum Tensor {
    Identity,
    Field(Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>),
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tensor::Identity => write!(f, "Identity"),
            Tensor::Field(_) => write!(f, "Field"),
        }
    }
}

impl Tensor {
    pub fn eval(&self, x: f64, y: f64) -> [f64; 3] {
        match self {
            Tensor::Identity => [1.0, 0.0, 1.0],
            Tensor::Field(f) => f(x, y),
        }
    }
}

pub fn transform_coefficients(m: &MetricTerms, b: &Tensor) -> Result<Coefficients2D> {
    let n = m.len();
    let (mut crr, mut css, mut crs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let [bxx, bxy, byy] = b.eval(m.x[k], m.y[k]);
        if !(bxx > 0.0 && byy > 0.0 && bxx * byy > bxy * bxy) {
            return Err(Error::TensorNotSpd { x: m.x[k], y: m.y[k] });
        }
        let (rx, ry, sx, sy, j) = (m.rx[k], m.ry[k], m.sx[k], m.sy[k], m.j[k]);
        crr[k] = j * (bxx * rx * rx + 2.0 * bxy * rx * ry + byy * ry * ry);
        css[k] = j * (bxx * sx * sx + 2.0 * bxy * sx * sy + byy * sy * sy);
        crs[k] = j * (bxx * rx * sx + bxy * (rx * sy + ry * sx) + byy * ry * sy);
    }
    Coefficients2D::new(m.nr, m.ns, crr, css, crs).map_err(|e| match e {
        Error::CoefficientNotSpd {
            node, crr, css, crs, ..
        } => Error::CoefficientNotSpd {
            module: "geometry",
            node,
            crr,
            css,
            crs,
        },
        e => e,
    })
}

/// Everything geometric one block needs.
#[derive(Clone, Debug)]
pub struct BlockGeometry {
    pub metrics: MetricTerms,
    pub surface: SurfaceGeometry,
    pub coeffs: Coefficients2D,
}

impl BlockGeometry {
    pub fn new(
        mapping: &BlockMapping,
        ops: &Operators2D,
        mode: MetricMode,
        b: &Tensor,
    ) -> Result<Self> {
        let metrics = evaluate_metrics_with(mapping, ops, mode)?;
        let surface = surface_geometry(&metrics)?;
        let coeffs = transform_coefficients(&metrics, b)?;
        Ok(BlockGeometry {
            metrics,
            surface,
            coeffs,
        })
    }

    /// Physical coordinates of the points of one face.
    pub fn face_points(&self, ops: &Operators2D, face: Face) -> Vec<Point> {
        (0..ops.face_len(face))
            .map(|t| {
                let k = ops.face_node(face, t);
                [self.metrics.x[k], self.metrics.y[k]]
            })
            .collect()
    }
}

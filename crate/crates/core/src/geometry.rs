//! Domain descriptions and radial reference solutions.
//!
//! Everything here is closed-form or reduces to 1-D quadrature, so these
//! values serve as ground truth for the meshed solvers: the torsion constant
//! of a ball, the p = 1 value of an annulus, radial torsion and rigidity
//! profiles, and the equal-volume ball radius.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Geometry of the computational domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub enum DomainKind<T> {
    Disk {
        center: [T; 2],
        radius: T,
    },
    Annulus {
        center: [T; 2],
        r_inner: T,
        r_outer: T,
    },
    Rectangle {
        corner_min: [T; 2],
        corner_max: [T; 2],
    },
    /// Outer loop counterclockwise, hole loops clockwise, all simple.
    PolygonWithHoles {
        outer_loop: Vec<[T; 2]>,
        hole_loops: Vec<Vec<[T; 2]>>,
    },
}

/// Validated domain description: a shape plus the ambient dimension.
///
/// Closed-form and radial operations accept any dimension >= 2; meshing and
/// the finite element solvers require dimension 2.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec<T> {
    kind: DomainKind<T>,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct SpecDoc<T> {
    #[serde(flatten)]
    kind: DomainKind<T>,
    #[serde(default = "default_dimension")]
    dimension: usize,
}

fn default_dimension() -> usize {
    2
}

impl<T: Real + Serialize> Serialize for DomainSpec<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecDoc {
            kind: self.kind.clone(),
            dimension: self.dimension,
        }
        .serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for DomainSpec<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SpecDoc::<T>::deserialize(d)?;
        DomainSpec::new(doc.kind, doc.dimension).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> DomainSpec<T> {
    pub fn new(kind: DomainKind<T>, dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be >= 2, got {dimension}"
            )));
        }
        match &kind {
            DomainKind::Disk { radius, .. } => {
                if !(*radius > T::zero()) || !radius.is_finite() {
                    return Err(Error::InvalidDomain("disk radius must be > 0".into()));
                }
            }
            DomainKind::Annulus {
                r_inner, r_outer, ..
            } => {
                if !(*r_inner > T::zero()) || !(*r_inner < *r_outer) || !r_outer.is_finite() {
                    return Err(Error::InvalidDomain(
                        "annulus requires 0 < r_inner < r_outer".into(),
                    ));
                }
            }
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => {
                if dimension != 2 {
                    return Err(Error::InvalidDomain(
                        "rectangle domains are 2-D only".into(),
                    ));
                }
                if !(corner_min[0] < corner_max[0]) || !(corner_min[1] < corner_max[1]) {
                    return Err(Error::InvalidDomain(
                        "rectangle corners must satisfy corner_min < corner_max".into(),
                    ));
                }
            }
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            } => {
                if dimension != 2 {
                    return Err(Error::InvalidDomain("polygon domains are 2-D only".into()));
                }
                validate_polygon(outer_loop, hole_loops)?;
            }
        }
        Ok(Self { kind, dimension })
    }

    pub fn disk(center: [T; 2], radius: T) -> Result<Self> {
        Self::new(DomainKind::Disk { center, radius }, 2)
    }

    pub fn annulus(center: [T; 2], r_inner: T, r_outer: T) -> Result<Self> {
        Self::new(
            DomainKind::Annulus {
                center,
                r_inner,
                r_outer,
            },
            2,
        )
    }

    pub fn rectangle(corner_min: [T; 2], corner_max: [T; 2]) -> Result<Self> {
        Self::new(
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            },
            2,
        )
    }

    pub fn unit_square() -> Self {
        Self::rectangle([T::zero(), T::zero()], [T::one(), T::one()]).expect("unit square")
    }

    pub fn polygon_with_holes(outer_loop: Vec<[T; 2]>, hole_loops: Vec<Vec<[T; 2]>>) -> Result<Self> {
        Self::new(
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            },
            2,
        )
    }

    pub fn kind(&self) -> &DomainKind<T> {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// N-dimensional volume (2-D area for rectangles and polygons).
    pub fn volume(&self) -> T {
        match &self.kind {
            DomainKind::Disk { radius, .. } => {
                unit_ball_volume::<T>(self.dimension) * radius.powi(self.dimension as i32)
            }
            DomainKind::Annulus {
                r_inner, r_outer, ..
            } => {
                unit_ball_volume::<T>(self.dimension)
                    * (r_outer.powi(self.dimension as i32) - r_inner.powi(self.dimension as i32))
            }
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => (corner_max[0] - corner_min[0]) * (corner_max[1] - corner_min[1]),
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            } => {
                // hole loops are clockwise, so their signed areas subtract
                let mut a = shoelace(outer_loop);
                for h in hole_loops {
                    a = a + shoelace(h);
                }
                a
            }
        }
    }

    /// Number of bounded complement components (holes).
    pub fn hole_count(&self) -> usize {
        match &self.kind {
            DomainKind::Disk { .. } | DomainKind::Rectangle { .. } => 0,
            DomainKind::Annulus { .. } => 1,
            DomainKind::PolygonWithHoles { hole_loops, .. } => hole_loops.len(),
        }
    }

    /// Exact areas of the holes, indexed by boundary component 1..=j.
    pub fn hole_volumes(&self) -> Vec<T> {
        match &self.kind {
            DomainKind::Disk { .. } | DomainKind::Rectangle { .. } => vec![],
            DomainKind::Annulus { r_inner, .. } => {
                vec![unit_ball_volume::<T>(self.dimension) * r_inner.powi(self.dimension as i32)]
            }
            DomainKind::PolygonWithHoles { hole_loops, .. } => {
                hole_loops.iter().map(|h| shoelace(h).abs()).collect()
            }
        }
    }

    pub fn complement_connected(&self) -> bool {
        self.hole_count() == 0
    }

    /// Radius of the ball with the same volume.
    pub fn equivalent_ball_radius(&self) -> T {
        equivalent_ball_radius(self.volume(), self.dimension).expect("validated spec has volume > 0")
    }

    pub fn bounding_box(&self) -> ([T; 2], [T; 2]) {
        match &self.kind {
            DomainKind::Disk { center, radius } => (
                [center[0] - *radius, center[1] - *radius],
                [center[0] + *radius, center[1] + *radius],
            ),
            DomainKind::Annulus {
                center, r_outer, ..
            } => (
                [center[0] - *r_outer, center[1] - *r_outer],
                [center[0] + *r_outer, center[1] + *r_outer],
            ),
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => (*corner_min, *corner_max),
            DomainKind::PolygonWithHoles { outer_loop, .. } => {
                let mut lo = outer_loop[0];
                let mut hi = outer_loop[0];
                for p in outer_loop {
                    lo[0] = lo[0].min(p[0]);
                    lo[1] = lo[1].min(p[1]);
                    hi[0] = hi[0].max(p[0]);
                    hi[1] = hi[1].max(p[1]);
                }
                (lo, hi)
            }
        }
    }

    /// Diagonal of the bounding box; the length scale used by smoothing
    /// parameters.
    pub fn diameter_hint(&self) -> T {
        let (lo, hi) = self.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Exact (unsigned) distance from a point to the true boundary curves.
    pub fn boundary_distance(&self, p: [T; 2]) -> T {
        match &self.kind {
            DomainKind::Disk { center, radius } => (*radius - dist(p, *center)).abs(),
            DomainKind::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let d = dist(p, *center);
                (d - *r_inner).abs().min((*r_outer - d).abs())
            }
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => {
                let dx = (p[0] - corner_min[0]).abs().min((corner_max[0] - p[0]).abs());
                let dy = (p[1] - corner_min[1]).abs().min((corner_max[1] - p[1]).abs());
                dx.min(dy)
            }
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            } => {
                let mut d = loop_distance(p, outer_loop);
                for h in hole_loops {
                    d = d.min(loop_distance(p, h));
                }
                d
            }
        }
    }

    /// Compact identifier used in reports and CSV tables.
    pub fn identifier(&self) -> String {
        match &self.kind {
            DomainKind::Disk { center, radius } => {
                format!("disk(c=({},{}),r={})", center[0], center[1], radius)
            }
            DomainKind::Annulus {
                center,
                r_inner,
                r_outer,
            } => format!(
                "annulus(c=({},{}),r={}..{})",
                center[0], center[1], r_inner, r_outer
            ),
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => format!(
                "rectangle(({},{})..({},{}))",
                corner_min[0], corner_min[1], corner_max[0], corner_max[1]
            ),
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            } => format!(
                "polygon({}v,{}holes)",
                outer_loop.len(),
                hole_loops.len()
            ),
        }
    }

    /// Polygonal boundary loops at arc spacing <= h. The first loop is the
    /// outer boundary (counterclockwise); the rest are holes (clockwise),
    /// in declaration order. Vertices lie on the exact curves.
    pub fn boundary_loops(&self, h: T) -> Result<Vec<Vec<[T; 2]>>> {
        if !(h > T::zero()) {
            return Err(Error::InvalidParameter("mesh size h must be > 0".into()));
        }
        match &self.kind {
            DomainKind::Disk { center, radius } => {
                Ok(vec![circle_points(*center, *radius, h, false)])
            }
            DomainKind::Annulus {
                center,
                r_inner,
                r_outer,
            } => Ok(vec![
                circle_points(*center, *r_outer, h, false),
                circle_points(*center, *r_inner, h, true),
            ]),
            DomainKind::Rectangle {
                corner_min,
                corner_max,
            } => {
                let corners = [
                    *corner_min,
                    [corner_max[0], corner_min[1]],
                    *corner_max,
                    [corner_min[0], corner_max[1]],
                ];
                Ok(vec![subdivide_loop(&corners, h)])
            }
            DomainKind::PolygonWithHoles {
                outer_loop,
                hole_loops,
            } => {
                let mut loops = vec![subdivide_loop(outer_loop, h)];
                for hl in hole_loops {
                    loops.push(subdivide_loop(hl, h));
                }
                Ok(loops)
            }
        }
    }
}

impl<T: Real + Serialize> DomainSpec<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl<T: Real + DeserializeOwned> DomainSpec<T> {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed area of a closed polygonal loop (positive when counterclockwise).
pub fn shoelace<T: Real>(pts: &[[T; 2]]) -> T {
    let two = T::of(2.0);
    let n = pts.len();
    let mut s = T::zero();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        s = s + (a[0] * b[1] - b[0] * a[1]);
    }
    s / two
}

/// Distance from a point to the segment [a, b] (projection clamped to the
/// segment).
pub fn point_to_segment_distance<T: Real>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == T::zero() {
        return dist(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2)
        .max(T::zero())
        .min(T::one());
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn loop_distance<T: Real>(p: [T; 2], pts: &[[T; 2]]) -> T {
    let n = pts.len();
    let mut d = T::infinity();
    for i in 0..n {
        d = d.min(point_to_segment_distance(p, pts[i], pts[(i + 1) % n]));
    }
    d
}

/// Even-odd point-in-polygon test (crossing count). Points on the boundary
/// are classified arbitrarily; callers only query points away from edges.
pub fn point_in_loop<T: Real>(p: [T; 2], pts: &[[T; 2]]) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_properly_intersect<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2], d: [T; 2]) -> bool {
    let orient = |p: [T; 2], q: [T; 2], r: [T; 2]| -> T {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > T::zero() && d2 < T::zero()) || (d1 < T::zero() && d2 > T::zero()))
        && ((d3 > T::zero() && d4 < T::zero()) || (d3 < T::zero() && d4 > T::zero()))
}

fn validate_loop_simple<T: Real>(pts: &[[T; 2]], label: &str) -> Result<()> {
    let n = pts.len();
    if n < 3 {
        return Err(Error::InvalidDomain(format!(
            "{label} needs at least 3 vertices"
        )));
    }
    let mut scale = T::zero();
    for p in pts {
        scale = scale.max(p[0].abs()).max(p[1].abs());
    }
    let tol = scale.max(T::one()) * T::of(1e-12);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if dist(a, b) <= tol {
            return Err(Error::InvalidDomain(format!(
                "{label} has a degenerate edge at vertex {i}"
            )));
        }
        for j in (i + 1)..n {
            let c = pts[j];
            let d = pts[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_properly_intersect(a, b, c, d) {
                return Err(Error::InvalidDomain(format!(
                    "{label} self-intersects (edges {i} and {j})"
                )));
            }
            // non-adjacent edges must also stay clear of each other's endpoints
            if point_to_segment_distance(c, a, b) <= tol || point_to_segment_distance(a, c, d) <= tol
            {
                return Err(Error::InvalidDomain(format!(
                    "{label} touches itself (edges {i} and {j})"
                )));
            }
        }
    }
    Ok(())
}

fn validate_polygon<T: Real>(outer: &[[T; 2]], holes: &[Vec<[T; 2]>]) -> Result<()> {
    validate_loop_simple(outer, "outer loop")?;
    if !(shoelace(outer) > T::zero()) {
        return Err(Error::InvalidDomain(
            "outer loop must be counterclockwise".into(),
        ));
    }
    for (k, h) in holes.iter().enumerate() {
        validate_loop_simple(h, &format!("hole loop {k}"))?;
        if !(shoelace(h) < T::zero()) {
            return Err(Error::InvalidDomain(format!(
                "hole loop {k} must be clockwise"
            )));
        }
        for p in h {
            if !point_in_loop(*p, outer) {
                return Err(Error::InvalidDomain(format!(
                    "hole loop {k} is not inside the outer loop"
                )));
            }
        }
        for i in 0..h.len() {
            for j in 0..outer.len() {
                if segments_properly_intersect(
                    h[i],
                    h[(i + 1) % h.len()],
                    outer[j],
                    outer[(j + 1) % outer.len()],
                ) {
                    return Err(Error::InvalidDomain(format!(
                        "hole loop {k} crosses the outer loop"
                    )));
                }
            }
        }
        for (k2, h2) in holes.iter().enumerate().skip(k + 1) {
            if h2.iter().any(|p| point_in_loop(*p, h)) || h.iter().any(|p| point_in_loop(*p, h2)) {
                return Err(Error::InvalidDomain(format!(
                    "hole loops {k} and {k2} overlap"
                )));
            }
            for i in 0..h.len() {
                for j in 0..h2.len() {
                    if segments_properly_intersect(
                        h[i],
                        h[(i + 1) % h.len()],
                        h2[j],
                        h2[(j + 1) % h2.len()],
                    ) {
                        return Err(Error::InvalidDomain(format!(
                            "hole loops {k} and {k2} intersect"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn circle_points<T: Real>(center: [T; 2], radius: T, h: T, clockwise: bool) -> Vec<[T; 2]> {
    let circumference = T::of(std::f64::consts::TAU) * radius;
    let n = (circumference / h).ceil().as_f64() as usize;
    let n = n.max(16);
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let theta = T::of(std::f64::consts::TAU) * T::of_usize(k) / T::of_usize(n);
        let (s, c) = theta.sin_cos();
        pts.push([center[0] + radius * c, center[1] + radius * s]);
    }
    if clockwise {
        pts[1..].reverse();
    }
    pts
}

fn subdivide_loop<T: Real>(corners: &[[T; 2]], h: T) -> Vec<[T; 2]> {
    let n = corners.len();
    let mut pts = Vec::new();
    for i in 0..n {
        let a = corners[i];
        let b = corners[(i + 1) % n];
        let len = dist(a, b);
        let pieces = (len / h).ceil().as_f64() as usize;
        let pieces = pieces.max(1);
        for k in 0..pieces {
            let t = T::of_usize(k) / T::of_usize(pieces);
            pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    pts
}

/// Volume of the unit ball in `dim` dimensions via the half-integer Gamma
/// recursion V_k = V_{k-2} * 2 pi / k.
pub fn unit_ball_volume<T: Real>(dim: usize) -> T {
    let tau = T::of(std::f64::consts::TAU);
    let mut v = if dim % 2 == 0 { T::one() } else { T::of(2.0) };
    let mut k = if dim % 2 == 0 { 2 } else { 3 };
    while k <= dim {
        v = v * tau / T::of_usize(k);
        k += 2;
    }
    v
}

/// Dual Hoelder exponent: 1/p + 1/q = 1, with p = 1 mapping to infinity.
pub fn dual_exponent<T: Real>(p: T) -> T {
    if p == T::one() {
        T::infinity()
    } else if p.is_infinite() {
        T::one()
    } else {
        p / (p - T::one())
    }
}

/// Saint-Venant functional of the ball B(r) in `dim` dimensions:
/// (N/(N+p) m(B))^{1/p} r^{1+N/p}.
pub fn qq_ball<T: Real>(dim: usize, p: T, r: T) -> Result<T> {
    if dim < 2 {
        return Err(Error::InvalidParameter("dimension must be >= 2".into()));
    }
    if !(p >= T::one()) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("radius must be > 0".into()));
    }
    let n = T::of_usize(dim);
    let mb = unit_ball_volume::<T>(dim);
    Ok((n / (n + p) * mb).powf(T::one() / p) * r.powf(T::one() + n / p))
}

/// p = 1 Saint-Venant value of the annulus r..R:
/// (N m(B)/(N+1)) (R^{N+1} + r^{N+1} - (R+r)^{N+1}/2^N).
pub fn qinf_annulus<T: Real>(dim: usize, r: T, big_r: T) -> Result<T> {
    if dim < 2 {
        return Err(Error::InvalidParameter("dimension must be >= 2".into()));
    }
    if !(r > T::zero()) || !(r < big_r) {
        return Err(Error::InvalidParameter(
            "annulus requires 0 < r < R".into(),
        ));
    }
    let n = T::of_usize(dim);
    let mb = unit_ball_volume::<T>(dim);
    let e = n + T::one();
    let two_n = T::of(2.0).powi(dim as i32);
    Ok(n * mb / e * (big_r.powf(e) + r.powf(e) - (big_r + r).powf(e) / two_n))
}

/// Radius of the ball with the given volume.
pub fn equivalent_ball_radius<T: Real>(volume: T, dim: usize) -> Result<T> {
    if !(volume > T::zero()) {
        return Err(Error::InvalidParameter("volume must be > 0".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidParameter("dimension must be >= 2".into()));
    }
    Ok((volume / unit_ball_volume::<T>(dim)).powf(T::one() / T::of_usize(dim)))
}

/// Which radial boundary value problem `radial_solve` integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialProblem {
    /// (rho^{N-1} |w'|^{q-2} w')' = -rho^{N-1}, zero boundary values.
    QTorsion,
    /// Laplace(v) = -N with v = 0 at the outer radius, v constant (free) at
    /// the inner radius, and flux through the inner sphere equal to twice the
    /// hole volume.
    RigidityWithFlux,
}

#[derive(Clone, Copy, Debug)]
enum RadialForm<T> {
    /// w(rho) = N^{1-p} (R^p - rho^p)/p on a ball of radius R.
    BallTorsion { p: T },
    /// First-integral form on an annulus: w'(rho) = sgn(g) |g|^{p-1} with
    /// g = (a^N - rho^N)/(N rho^{N-1}); values tabulated by quadrature.
    AnnulusTorsion { p: T, free_radius: T },
    /// Distance to the nearest boundary sphere (the q = infinity profile).
    Distance,
    /// v'(rho) = -rho + c rho^{1-N}; v vanishes at the outer radius.
    Rigidity { c: T },
}

/// Radial solution profile on a ball (r_inner = 0) or annulus.
///
/// Values and derivatives are tabulated on a grid; `value_at` and
/// `derivative_at` evaluate the underlying analytic form where one exists and
/// fall back to cubic Hermite interpolation of the grid otherwise.
#[derive(Clone, Debug)]
pub struct RadialProfile<T> {
    pub dimension: usize,
    /// Torsion exponent q in (1, inf]; 2 for rigidity profiles.
    pub q_exponent: T,
    pub r_inner: T,
    pub r_outer: T,
    pub radii: Vec<T>,
    pub values: Vec<T>,
    pub derivatives: Vec<T>,
    /// Annulus torsion: the radius where the derivative vanishes.
    pub free_radius: Option<T>,
    /// Rigidity: the floating constant c_1 = v(r_inner).
    pub inner_value: Option<T>,
    form: RadialForm<T>,
}

impl<T: Real> RadialProfile<T> {
    pub fn value_at(&self, rho: T) -> T {
        let n = T::of_usize(self.dimension);
        match self.form {
            RadialForm::BallTorsion { p } => {
                n.powf(T::one() - p) * (self.r_outer.powf(p) - rho.abs().powf(p)) / p
            }
            RadialForm::Distance => {
                if self.r_inner > T::zero() {
                    (rho - self.r_inner).min(self.r_outer - rho)
                } else {
                    self.r_outer - rho.abs()
                }
            }
            RadialForm::Rigidity { c } => {
                let half = T::of(0.5);
                let lin = half * (self.r_outer * self.r_outer - rho * rho);
                if c == T::zero() {
                    lin
                } else if self.dimension == 2 {
                    lin + c * (rho / self.r_outer).ln()
                } else {
                    let e = T::of_usize(2) - n;
                    lin + c * (rho.powf(e) - self.r_outer.powf(e)) / e
                }
            }
            RadialForm::AnnulusTorsion { .. } => self.hermite(rho),
        }
    }

    pub fn derivative_at(&self, rho: T) -> T {
        let n = T::of_usize(self.dimension);
        match self.form {
            RadialForm::BallTorsion { p } => {
                -n.powf(T::one() - p) * rho.abs().powf(p - T::one()) * rho.signum()
            }
            RadialForm::Distance => {
                if self.r_inner > T::zero() {
                    let mid = (self.r_inner + self.r_outer) * T::of(0.5);
                    if rho < mid {
                        T::one()
                    } else {
                        -T::one()
                    }
                } else {
                    -T::one()
                }
            }
            RadialForm::Rigidity { c } => -rho + c * rho.powf(T::one() - n),
            RadialForm::AnnulusTorsion { p, free_radius } => {
                annulus_torsion_slope(self.dimension, p, free_radius, rho)
            }
        }
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    /// Integral of the profile over the N-dimensional domain.
    pub fn domain_integral(&self) -> Result<T> {
        let surf = surface_factor::<T>(self.dimension);
        let f = |rho: T| self.value_at(rho) * surf * rho.powi(self.dimension as i32 - 1);
        integrate_with_breaks(&f, self.r_inner, self.r_outer, self.breakpoints())
    }

    /// L^p norm of the radial derivative over the domain; p = infinity gives
    /// the maximum slope magnitude.
    pub fn grad_norm(&self, p: T) -> Result<T> {
        if p.is_infinite() {
            let mut cands = vec![self.r_inner.max(T::of(1e-300)), self.r_outer];
            cands.extend(self.breakpoints());
            let m = cands
                .into_iter()
                .map(|r| self.derivative_at(r).abs())
                .fold(T::zero(), |a, b| a.max(b));
            return Ok(m);
        }
        let surf = surface_factor::<T>(self.dimension);
        let f =
            |rho: T| self.derivative_at(rho).abs().powf(p) * surf * rho.powi(self.dimension as i32 - 1);
        Ok(integrate_with_breaks(&f, self.r_inner, self.r_outer, self.breakpoints())?
            .powf(T::one() / p))
    }

    /// Dirichlet energy of the profile; for rigidity profiles this is the
    /// torsional rigidity value.
    pub fn dirichlet_energy(&self) -> Result<T> {
        let g = self.grad_norm(T::of(2.0))?;
        Ok(g * g)
    }

    fn breakpoints(&self) -> Vec<T> {
        match self.form {
            RadialForm::AnnulusTorsion { free_radius, .. } => vec![free_radius],
            RadialForm::Distance if self.r_inner > T::zero() => {
                vec![(self.r_inner + self.r_outer) * T::of(0.5)]
            }
            _ => vec![],
        }
    }

    fn hermite(&self, rho: T) -> T {
        let r = &self.radii;
        let n = r.len();
        if rho <= r[0] {
            return self.values[0];
        }
        if rho >= r[n - 1] {
            return self.values[n - 1];
        }
        let mut i = match r.binary_search_by(|x| x.partial_cmp(&rho).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        if i >= n - 1 {
            i = n - 2;
        }
        let (x0, x1) = (r[i], r[i + 1]);
        let hseg = x1 - x0;
        let t = (rho - x0) / hseg;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivatives[i], self.derivatives[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let three = T::of(3.0);
        let two = T::of(2.0);
        (two * t3 - three * t2 + T::one()) * y0
            + (t3 - two * t2 + t) * hseg * d0
            + (three * t2 - two * t3) * y1
            + (t3 - t2) * hseg * d1
    }
}

/// Surface area of the unit sphere in `dim` dimensions (N m(B)).
fn surface_factor<T: Real>(dim: usize) -> T {
    T::of_usize(dim) * unit_ball_volume::<T>(dim)
}

/// Exact q-torsion function of the ball B(r): w_q(rho) = N^{1-p}(r^p - rho^p)/p
/// with p dual to q. Accepts q = infinity (p = 1, the distance function).
pub fn wq_ball_profile<T: Real>(dim: usize, q: T, r: T) -> Result<RadialProfile<T>> {
    if dim < 2 {
        return Err(Error::InvalidParameter("dimension must be >= 2".into()));
    }
    if !(q > T::one()) {
        return Err(Error::InvalidParameter(format!("q must be > 1, got {q}")));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("radius must be > 0".into()));
    }
    let p = dual_exponent(q);
    let form = if q.is_infinite() {
        RadialForm::Distance
    } else {
        RadialForm::BallTorsion { p }
    };
    Ok(tabulate(dim, q, T::zero(), r, form, None, None))
}

/// Slope of the annulus q-torsion profile from its first integral.
fn annulus_torsion_slope<T: Real>(dim: usize, p: T, free_radius: T, rho: T) -> T {
    let n = T::of_usize(dim);
    let g = (free_radius.powi(dim as i32) - rho.powi(dim as i32))
        / (n * rho.powi(dim as i32 - 1));
    g.signum() * g.abs().powf(p - T::one())
}

/// Integrates the radial boundary value problem. See `RadialProblem`.
pub fn radial_solve<T: Real>(
    dim: usize,
    q: T,
    r_inner: T,
    r_outer: T,
    problem: RadialProblem,
) -> Result<RadialProfile<T>> {
    if dim < 2 {
        return Err(Error::InvalidParameter("dimension must be >= 2".into()));
    }
    if !(r_inner >= T::zero()) || !(r_inner < r_outer) || !r_outer.is_finite() {
        return Err(Error::InvalidParameter(
            "radial domain requires 0 <= r_inner < r_outer".into(),
        ));
    }
    match problem {
        RadialProblem::QTorsion => {
            if !(q > T::one()) {
                return Err(Error::InvalidParameter(format!("q must be > 1, got {q}")));
            }
            if r_inner == T::zero() {
                return ball_torsion_by_quadrature(dim, q, r_outer);
            }
            if q.is_infinite() {
                let mid = (r_inner + r_outer) * T::of(0.5);
                return Ok(tabulate(
                    dim,
                    q,
                    r_inner,
                    r_outer,
                    RadialForm::Distance,
                    Some(mid),
                    None,
                ));
            }
            annulus_torsion_solve(dim, q, r_inner, r_outer)
        }
        RadialProblem::RigidityWithFlux => {
            if q != T::of(2.0) {
                return Err(Error::InvalidParameter(
                    "rigidity_with_flux requires q = 2".into(),
                ));
            }
            if !(r_inner > T::zero()) {
                return Err(Error::InvalidParameter(
                    "rigidity_with_flux requires r_inner > 0".into(),
                ));
            }
            // flux condition through the inner sphere: the exterior normal
            // points inward, so -v'(r) * N m(B) r^{N-1} = 2 m(B) r^N, i.e.
            // v'(r) = -2r/N; matching -rho + c rho^{1-N} fixes c.
            let n = T::of_usize(dim);
            let c = r_inner.powi(dim as i32) * (n - T::of(2.0)) / n;
            let profile = tabulate(
                dim,
                q,
                r_inner,
                r_outer,
                RadialForm::Rigidity { c },
                None,
                None,
            );
            let c1 = profile.value_at(r_inner);
            Ok(RadialProfile {
                inner_value: Some(c1),
                ..profile
            })
        }
    }
}

fn ball_torsion_by_quadrature<T: Real>(dim: usize, q: T, r: T) -> Result<RadialProfile<T>> {
    if q.is_infinite() {
        return Ok(tabulate(dim, q, T::zero(), r, RadialForm::Distance, None, None));
    }
    let p = dual_exponent(q);
    let n = T::of_usize(dim);
    // first integral with regularity at the origin: |w'|^{q-2} w' = -rho/N
    let slope = move |rho: T| -(rho / n).powf(p - T::one());
    let grid = grid_points(T::zero(), r, &[]);
    let m = grid.len();
    let mut values = vec![T::zero(); m];
    // integrate inward from the boundary where w = 0
    for i in (0..m - 1).rev() {
        let seg = integrate_adaptive(&slope, grid[i], grid[i + 1], T::of(1e-13))?;
        values[i] = values[i + 1] - seg;
    }
    let derivatives: Vec<T> = grid.iter().map(|&rho| slope(rho)).collect();
    Ok(RadialProfile {
        dimension: dim,
        q_exponent: q,
        r_inner: T::zero(),
        r_outer: r,
        radii: grid,
        values,
        derivatives,
        free_radius: None,
        inner_value: None,
        form: RadialForm::BallTorsion { p },
    })
}

fn annulus_torsion_solve<T: Real>(
    dim: usize,
    q: T,
    r_inner: T,
    r_outer: T,
) -> Result<RadialProfile<T>> {
    let p = dual_exponent(q);
    // mismatch(a) = integral of the slope over [r, R]; strictly increasing in
    // the free radius a, so bisection brackets the root where w(R) = 0.
    let mismatch = |a: T| -> Result<T> {
        let f = |rho: T| annulus_torsion_slope(dim, p, a, rho);
        integrate_with_breaks(&f, r_inner, r_outer, vec![a])
    };
    let mut lo = r_inner;
    let mut hi = r_outer;
    let mut flo = mismatch(lo)?;
    let scale = (r_outer - r_inner).max(T::one());
    let tol = T::of(1e-12) * scale;
    let mut a = (lo + hi) * T::of(0.5);
    for _ in 0..200 {
        a = (lo + hi) * T::of(0.5);
        let fa = mismatch(a)?;
        if fa.abs() <= tol || (hi - lo) <= T::epsilon() * r_outer * T::of(4.0) {
            break;
        }
        if (fa > T::zero()) == (flo > T::zero()) {
            lo = a;
            flo = fa;
        } else {
            hi = a;
        }
    }
    let grid = grid_points(r_inner, r_outer, &[a]);
    let m = grid.len();
    let mut values = vec![T::zero(); m];
    for i in 1..m {
        let f = |rho: T| annulus_torsion_slope(dim, p, a, rho);
        let seg = integrate_adaptive(&f, grid[i - 1], grid[i], T::of(1e-13))?;
        values[i] = values[i - 1] + seg;
    }
    // the residual at R is below the bisection tolerance; spread it so the
    // tabulated boundary value is exactly zero
    let resid = values[m - 1];
    for (i, v) in values.iter_mut().enumerate() {
        let t = grid[i];
        *v = *v - resid * (t - r_inner) / (r_outer - r_inner);
    }
    let derivatives: Vec<T> = grid
        .iter()
        .map(|&rho| annulus_torsion_slope(dim, p, a, rho))
        .collect();
    Ok(RadialProfile {
        dimension: dim,
        q_exponent: q,
        r_inner,
        r_outer,
        radii: grid,
        values,
        derivatives,
        free_radius: Some(a),
        inner_value: None,
        form: RadialForm::AnnulusTorsion { p, free_radius: a },
    })
}

fn tabulate<T: Real>(
    dim: usize,
    q: T,
    r_inner: T,
    r_outer: T,
    form: RadialForm<T>,
    free_radius: Option<T>,
    inner_value: Option<T>,
) -> RadialProfile<T> {
    let breaks: Vec<T> = free_radius.into_iter().collect();
    let radii = grid_points(r_inner, r_outer, &breaks);
    let mut profile = RadialProfile {
        dimension: dim,
        q_exponent: q,
        r_inner,
        r_outer,
        radii,
        values: vec![],
        derivatives: vec![],
        free_radius,
        inner_value,
        form,
    };
    profile.values = profile.radii.iter().map(|&r| profile.value_at(r)).collect();
    profile.derivatives = profile
        .radii
        .iter()
        .map(|&r| profile.derivative_at(r))
        .collect();
    profile
}

fn grid_points<T: Real>(a: T, b: T, breaks: &[T]) -> Vec<T> {
    const CELLS: usize = 1024;
    let mut pts: Vec<T> = (0..=CELLS)
        .map(|i| a + (b - a) * T::of_usize(i) / T::of_usize(CELLS))
        .collect();
    for &brk in breaks {
        if brk > a && brk < b {
            pts.push(brk);
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() <= T::epsilon() * b.abs().max(T::one()));
    pts
}

fn integrate_with_breaks<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    mut breaks: Vec<T>,
) -> Result<T> {
    breaks.retain(|&x| x > a && x < b);
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut total = T::zero();
    let mut left = a;
    for brk in breaks.into_iter().chain(std::iter::once(b)) {
        total = total + integrate_adaptive(f, left, brk, T::of(1e-12))?;
        left = brk;
    }
    Ok(total)
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (positive half; the rule is
// symmetric). Odd-indexed nodes are the embedded Gauss points.
const GK_NODES: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::of(0.5);
    let mid = (a + b) * T::of(0.5);
    let mut k = T::zero();
    let mut g = T::zero();
    for i in 0..8 {
        let x = T::of(GK_NODES[i]) * half;
        let w = T::of(GK_WEIGHTS[i]);
        let fs = if i == 7 {
            f(mid)
        } else {
            f(mid - x) + f(mid + x)
        };
        k = k + w * fs;
        if i % 2 == 1 {
            g = g + T::of(GAUSS_WEIGHTS[i / 2]) * fs;
        }
    }
    (k * half, (k - g).abs() * half)
}

/// Adaptive Gauss-Kronrod quadrature to the requested relative tolerance.
fn integrate_adaptive<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, rel_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let rel_tol = rel_tol.max(T::epsilon() * T::of(64.0));
    let (whole, _) = gk15(f, a, b);
    let mut stack = vec![(a, b)];
    let mut total = T::zero();
    let mut budget = 0usize;
    let len = b - a;
    while let Some((lo, hi)) = stack.pop() {
        budget += 1;
        if budget > 100_000 {
            return Err(Error::IterationFailed(
                "adaptive quadrature exceeded its subdivision budget".into(),
            ));
        }
        let (val, err) = gk15(f, lo, hi);
        let local_tol =
            rel_tol * whole.abs().max(T::of(1e-280)) * ((hi - lo) / len) + T::of(1e-280);
        if err <= local_tol || (hi - lo) <= T::epsilon() * len.abs() * T::of(8.0) {
            total = total + val;
        } else {
            let mid = (lo + hi) * T::of(0.5);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_volumes_match_gamma_values() {
        assert_relative_eq!(unit_ball_volume::<f64>(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume::<f64>(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume::<f64>(4), PI * PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            unit_ball_volume::<f64>(5),
            8.0 * PI * PI / 15.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn qq_ball_reference_values() {
        assert_relative_eq!(
            qq_ball::<f64>(2, 2.0, 1.0).unwrap(),
            (PI / 2.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            qq_ball::<f64>(2, 1.0, 1.0).unwrap(),
            2.0 * PI / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            qq_ball::<f64>(3, 2.0, 1.0).unwrap(),
            (4.0 * PI / 5.0).sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn qq_ball_rejects_bad_parameters() {
        assert!(qq_ball::<f64>(2, 0.5, 1.0).is_err());
        assert!(qq_ball::<f64>(2, 2.0, 0.0).is_err());
        assert!(qq_ball::<f64>(2, 2.0, -1.0).is_err());
        assert!(qq_ball::<f64>(1, 2.0, 1.0).is_err());
    }

    #[test]
    fn qinf_annulus_reference_values() {
        // N=2, r=1, R=3: (2 pi/3)(27 + 1 - 64/4) = 8 pi
        assert_relative_eq!(
            qinf_annulus::<f64>(2, 1.0, 3.0).unwrap(),
            8.0 * PI,
            max_relative = 1e-14
        );
        assert!(qinf_annulus::<f64>(2, 3.0, 1.0).is_err());
        assert!(qinf_annulus::<f64>(2, 0.0, 1.0).is_err());
        // degenerate annulus value tends to zero
        let v = qinf_annulus::<f64>(2, 2.0 - 1e-8, 2.0).unwrap();
        assert!(v.abs() < 1e-6, "near-degenerate annulus gave {v}");
    }

    #[test]
    fn qinf_annulus_matches_distance_quadrature_in_3d() {
        // independent route: N * integral of dist(x, boundary) by radial
        // quadrature of the tent profile
        let profile = radial_solve::<f64>(3, f64::INFINITY, 1.0, 2.0, RadialProblem::QTorsion)
            .unwrap();
        let quad = 3.0 * profile.domain_integral().unwrap();
        let formula = qinf_annulus::<f64>(3, 1.0, 2.0).unwrap();
        assert_relative_eq!(quad, formula, max_relative = 1e-10);
    }

    #[test]
    fn wq_ball_profile_center_and_boundary_values() {
        let w = wq_ball_profile::<f64>(2, 2.0, 1.0).unwrap();
        assert_relative_eq!(w.value_at(0.0), 0.25, max_relative = 1e-14);
        assert!(w.value_at(1.0).abs() < 1e-15);
        // w_2 = (1 - rho^2)/4 on the unit disk
        assert_relative_eq!(w.value_at(0.7), (1.0 - 0.49) / 4.0, max_relative = 1e-13);

        let w34 = wq_ball_profile::<f64>(3, 4.0, 1.0).unwrap();
        let p = 4.0 / 3.0;
        assert_relative_eq!(
            w34.value_at(0.0),
            3.0f64.powf(1.0 - p) / p,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            w34.derivative_at(0.5),
            -3.0f64.powf(1.0 - p) * 0.5f64.powf(p - 1.0),
            max_relative = 1e-13
        );
        assert!(wq_ball_profile::<f64>(2, 1.0, 1.0).is_err());
    }

    #[test]
    fn wq_profile_satisfies_radial_equation() {
        // residual of (rho^{N-1}|w'|^{q-2}w')' = -rho^{N-1} via central
        // differences of the flux
        let dim = 3;
        let q = 4.0;
        let p = dual_exponent(q);
        let w = wq_ball_profile::<f64>(dim, q, 1.0).unwrap();
        let flux = |rho: f64| {
            let d: f64 = w.derivative_at(rho);
            rho.powi(dim as i32 - 1) * d.abs().powf(q - 2.0) * d
        };
        let _ = p;
        for &rho in &[0.3, 0.5, 0.8] {
            let eps = 1e-5;
            let lhs = (flux(rho + eps) - flux(rho - eps)) / (2.0 * eps);
            assert_relative_eq!(lhs, -rho.powi(dim as i32 - 1), max_relative = 1e-6);
        }
    }

    #[test]
    fn radial_ball_torsion_matches_closed_form_profile() {
        for &(dim, q) in &[(2usize, 2.0f64), (2, 4.0), (3, 1.5), (2, 16.0)] {
            let by_quad = radial_solve::<f64>(dim, q, 0.0, 1.0, RadialProblem::QTorsion).unwrap();
            let closed = wq_ball_profile::<f64>(dim, q, 1.0).unwrap();
            for (i, &rho) in by_quad.radii.iter().enumerate() {
                let a = by_quad.values[i];
                let b = closed.value_at(rho);
                assert!(
                    (a - b).abs() <= 1e-10 * closed.max_value(),
                    "dim={dim} q={q} rho={rho}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn radial_annulus_torsion_matches_log_solution_for_q2() {
        // closed form for N=2, q=2 on 1..2: w = -rho^2/4 + A ln rho + 1/4,
        // A = 0.75/ln 2
        let w = radial_solve::<f64>(2, 2.0, 1.0, 2.0, RadialProblem::QTorsion).unwrap();
        let a = 0.75 / 2.0f64.ln();
        let exact = |rho: f64| -rho * rho / 4.0 + a * rho.ln() + 0.25;
        for &rho in &[1.0, 1.2, 1.4710686, 1.7, 2.0] {
            assert!(
                (w.value_at(rho) - exact(rho)).abs() < 1e-10,
                "rho={rho}: {} vs {}",
                w.value_at(rho),
                exact(rho)
            );
        }
        let free = w.free_radius.unwrap();
        assert_relative_eq!(free, (2.0 * a).sqrt(), max_relative = 1e-10);
        // integral oracle: 2 pi (15 - 9/ln 2)/16
        let exact_integral = 2.0 * PI * (15.0 - 9.0 / 2.0f64.ln()) / 16.0;
        assert_relative_eq!(
            w.domain_integral().unwrap(),
            exact_integral,
            max_relative = 1e-10
        );
    }

    #[test]
    fn radial_annulus_distance_profile_is_a_tent() {
        let w = radial_solve::<f64>(2, f64::INFINITY, 1.0, 3.0, RadialProblem::QTorsion).unwrap();
        assert_relative_eq!(w.value_at(2.0), 1.0, max_relative = 1e-14);
        assert!(w.value_at(1.0).abs() < 1e-14);
        assert!(w.value_at(3.0).abs() < 1e-14);
        assert_relative_eq!(w.value_at(1.25), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn rigidity_profile_matches_hollow_shaft_value() {
        // N=2 annulus: the flux condition is met by v = (R^2 - rho^2)/2 and
        // the rigidity integral is pi (R^4 - r^4)/2
        let v = radial_solve::<f64>(2, 2.0, 1.0, 2.0, RadialProblem::RigidityWithFlux).unwrap();
        assert_relative_eq!(v.inner_value.unwrap(), 1.5, max_relative = 1e-12);
        assert_relative_eq!(v.value_at(1.3), (4.0 - 1.69) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            v.dirichlet_energy().unwrap(),
            PI * 15.0 / 2.0,
            max_relative = 1e-10
        );
        // flux through the inner circle: -v'(r) 2 pi r = 2 pi r^2
        assert_relative_eq!(-v.derivative_at(1.0) * 2.0 * PI, 2.0 * PI, max_relative = 1e-12);
        assert!(radial_solve::<f64>(2, 3.0, 1.0, 2.0, RadialProblem::RigidityWithFlux).is_err());
        assert!(radial_solve::<f64>(2, 2.0, 0.0, 2.0, RadialProblem::RigidityWithFlux).is_err());
    }

    #[test]
    fn rigidity_profile_flux_condition_in_3d() {
        // the flux constant is dimension-dependent; check v'(r) = -2r/N
        // directly in three dimensions
        let v = radial_solve::<f64>(3, 2.0, 0.5, 2.0, RadialProblem::RigidityWithFlux).unwrap();
        assert_relative_eq!(v.derivative_at(0.5), -2.0 * 0.5 / 3.0, max_relative = 1e-12);
        assert!(v.value_at(2.0).abs() < 1e-12);
        assert!(v.inner_value.unwrap() > 0.0);
    }

    #[test]
    fn equivalent_ball_radius_reference_values() {
        assert_relative_eq!(equivalent_ball_radius::<f64>(PI, 2).unwrap(), 1.0);
        assert_relative_eq!(
            equivalent_ball_radius::<f64>(1.0, 2).unwrap(),
            1.0 / PI.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            equivalent_ball_radius::<f64>(4.0 * PI / 3.0, 3).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(equivalent_ball_radius::<f64>(0.0, 2).is_err());
    }

    #[test]
    fn domain_spec_validation_and_helpers() {
        assert!(DomainSpec::<f64>::disk([0.0, 0.0], 0.0).is_err());
        assert!(DomainSpec::<f64>::annulus([0.0, 0.0], 2.0, 1.0).is_err());
        assert!(DomainSpec::<f64>::rectangle([0.0, 0.0], [0.0, 1.0]).is_err());

        let sq = DomainSpec::<f64>::unit_square();
        assert_eq!(sq.hole_count(), 0);
        assert_relative_eq!(sq.volume(), 1.0);
        assert_relative_eq!(sq.equivalent_ball_radius(), 1.0 / PI.sqrt());
        assert_relative_eq!(sq.boundary_distance([0.5, 0.5]), 0.5);

        let ann = DomainSpec::<f64>::annulus([0.0, 0.0], 1.0, 3.0).unwrap();
        assert_eq!(ann.hole_count(), 1);
        assert_relative_eq!(ann.hole_volumes()[0], PI);
        assert_relative_eq!(ann.boundary_distance([2.0, 0.0]), 1.0);
        assert!(!ann.complement_connected());
    }

    #[test]
    fn polygon_validation_rejects_bad_loops() {
        // clockwise outer loop
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(DomainSpec::<f64>::polygon_with_holes(cw, vec![]).is_err());
        // self-intersecting bowtie
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(DomainSpec::<f64>::polygon_with_holes(bow, vec![]).is_err());
        // hole outside
        let outer = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let hole = vec![[2.0, 2.0], [2.0, 2.5], [2.5, 2.5], [2.5, 2.0]];
        assert!(DomainSpec::<f64>::polygon_with_holes(outer.clone(), vec![hole]).is_err());
        // valid L-shape
        let ell = vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ];
        let spec = DomainSpec::<f64>::polygon_with_holes(ell, vec![]).unwrap();
        assert_relative_eq!(spec.volume(), 3.0);
    }

    #[test]
    fn domain_spec_json_round_trip() {
        let ann = DomainSpec::<f64>::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        let js = ann.to_json().unwrap();
        assert!(js.contains("\"kind\""));
        assert!(js.contains("annulus"));
        let back = DomainSpec::<f64>::from_json(&js).unwrap();
        assert_eq!(ann, back);
        // default dimension and validation on the parse path
        let doc = r#"{"kind": "disk", "params": {"center": [0.0, 0.0], "radius": 1.0}}"#;
        let d = DomainSpec::<f64>::from_json(doc).unwrap();
        assert_eq!(d.dimension(), 2);
        let bad = r#"{"kind": "disk", "params": {"center": [0.0, 0.0], "radius": -1.0}}"#;
        assert!(DomainSpec::<f64>::from_json(bad).is_err());
    }

    #[test]
    fn boundary_loops_lie_on_exact_curves() {
        let ann = DomainSpec::<f64>::annulus([0.5, -0.25], 1.0, 3.0).unwrap();
        let loops = ann.boundary_loops(0.1).unwrap();
        assert_eq!(loops.len(), 2);
        for p in &loops[0] {
            let r = ((p[0] - 0.5).powi(2) + (p[1] + 0.25).powi(2)).sqrt();
            assert_relative_eq!(r, 3.0, max_relative = 1e-14);
        }
        // spacing <= h on the circle
        for w in loops[1].windows(2) {
            let d = ((w[0][0] - w[1][0]).powi(2) + (w[0][1] - w[1][1]).powi(2)).sqrt();
            assert!(d <= 0.1 + 1e-12);
        }
        // orientations: outer ccw, hole cw
        assert!(shoelace(&loops[0]) > 0.0);
        assert!(shoelace(&loops[1]) < 0.0);
    }

    #[test]
    fn f32_instantiation_stays_coherent() {
        let v = qq_ball::<f32>(2, 2.0, 1.0).unwrap();
        assert!((v - (std::f32::consts::PI / 2.0).sqrt()).abs() < 1e-6);
        let w = wq_ball_profile::<f32>(2, 2.0, 1.0).unwrap();
        assert!((w.value_at(0.0) - 0.25).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn qq_ball_scaling_law(p in 1.0f64..4.0, r in 0.2f64..3.0, dim in 2usize..5) {
            let base = qq_ball::<f64>(dim, p, 1.0).unwrap();
            let scaled = qq_ball::<f64>(dim, p, r).unwrap();
            let expected = base * r.powf(1.0 + dim as f64 / p);
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }

        #[test]
        fn qq_ball_monotone_in_radius(p in 1.0f64..4.0, r in 0.2f64..3.0) {
            let a = qq_ball::<f64>(2, p, r).unwrap();
            let b = qq_ball::<f64>(2, p, r * 1.01).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn dual_exponent_involution(p in 1.0001f64..50.0) {
            let q = dual_exponent(p);
            let back = dual_exponent(q);
            prop_assert!((back - p).abs() <= 1e-9 * p);
        }
    }

    #[test]
    fn qq_ball_continuous_in_p_near_one() {
        // continuity on [1, inf): approach p = 1 from above
        let at_one = qq_ball::<f64>(2, 1.0, 1.0).unwrap();
        let near = qq_ball::<f64>(2, 1.0 + 1e-9, 1.0).unwrap();
        assert!((at_one - near).abs() < 1e-6);
    }
}

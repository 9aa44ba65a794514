//! Triangulation of planar domains with tagged boundary components,
//! quadrature, and exact boundary-distance evaluation.

mod delaunay;
mod generate;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{shoelace, DomainSpec};
use crate::scalar::{neumaier_sum, Real};

static MESH_COUNTER: AtomicU64 = AtomicU64::new(1);

pub(crate) fn next_mesh_id() -> u64 {
    MESH_COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// One oriented boundary edge; the domain interior lies on its left.
/// Component 0 is the outer boundary, components 1.. are hole boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub component: usize,
}

/// Conforming triangulation of a planar domain.
///
/// Triangles are positively oriented. Boundary edges form one closed loop
/// per component, oriented with the interior on the left (outer loop
/// counterclockwise, hole loops clockwise). `hole_areas` stores the exact
/// hole measures (πr² for circular holes, shoelace for polygonal ones), which
/// the flux conditions of the rigidity solve consume.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub vertices: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub hole_areas: Vec<T>,
    pub target_h: T,
    spec: Option<DomainSpec<T>>,
    id: u64,
}

/// Nodal values of a piecewise-linear function on a specific mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    mesh_id: u64,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(mesh: &Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.vertices.len() {
            return Err(Error::FieldMismatch(format!(
                "{} nodal values for a mesh with {} vertices",
                values.len(),
                mesh.vertices.len()
            )));
        }
        Ok(Self {
            mesh_id: mesh.id,
            values,
        })
    }

    pub fn from_fn(mesh: &Mesh<T>, f: impl Fn([T; 2]) -> T) -> Self {
        Self {
            mesh_id: mesh.id,
            values: mesh.vertices.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn constant(mesh: &Mesh<T>, c: T) -> Self {
        Self {
            mesh_id: mesh.id,
            values: vec![c; mesh.vertices.len()],
        }
    }

    /// Confirms the field belongs to this mesh.
    pub fn check(&self, mesh: &Mesh<T>) -> Result<()> {
        if self.mesh_id != mesh.id || self.values.len() != mesh.vertices.len() {
            return Err(Error::FieldMismatch(
                "field does not live on this mesh".into(),
            ));
        }
        Ok(())
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }
}

/// Barycentric quadrature points and weights, normalized so the weights sum
/// to one (affine invariance); integrals multiply by the triangle area.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub order: u32,
}

impl<T: Real> QuadratureRule<T> {
    /// Centroid rule, exact for linear integrands.
    pub fn order1() -> Self {
        let third = T::one() / T::of(3.0);
        Self {
            points: vec![[third, third, third]],
            weights: vec![T::one()],
            order: 1,
        }
    }

    /// Edge-midpoint rule, exact for quadratic integrands.
    pub fn order2() -> Self {
        let half = T::of(0.5);
        let third = T::one() / T::of(3.0);
        Self {
            points: vec![
                [half, half, T::zero()],
                [T::zero(), half, half],
                [half, T::zero(), half],
            ],
            weights: vec![third, third, third],
            order: 2,
        }
    }
}

/// What `integrate_field` evaluates over the mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrand<T> {
    /// ∫ u dm, exact for nodal data.
    Field,
    /// ∫ ‖∇u‖^p dm; the gradient is constant per triangle.
    GradNormPow(T),
    /// ∫ u ‖x‖² dm, the field against the squared-radius moment.
    FieldTimesMoment,
    /// ∫ x·∇u dm, exact because the linear moment factor meets a constant.
    XDotGrad,
}

impl<T: Real> Mesh<T> {
    /// Triangulates the domain at nominal edge length h. Boundary vertices
    /// lie on the exact curves; the result has min angle ≥ 20° and max edge
    /// ≤ 2h.
    pub fn generate(spec: &DomainSpec<T>, h: T) -> Result<Self> {
        generate::generate(spec, h)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// The originating domain description, absent for imported meshes.
    pub fn domain(&self) -> Option<&DomainSpec<T>> {
        self.spec.as_ref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_vertices(&self, k: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_area(&self, k: usize) -> T {
        let [a, b, c] = self.tri_vertices(k);
        ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) * T::of(0.5)
    }

    /// Constant gradient of the P1 interpolant on triangle k.
    pub fn tri_gradient(&self, k: usize, values: &[T]) -> [T; 2] {
        let [ia, ib, ic] = self.triangles[k];
        let [a, b, c] = self.tri_vertices(k);
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let (ua, ub, uc) = (values[ia], values[ib], values[ic]);
        [
            (ua * (b[1] - c[1]) + ub * (c[1] - a[1]) + uc * (a[1] - b[1])) / two_area,
            (ua * (c[0] - b[0]) + ub * (a[0] - c[0]) + uc * (b[0] - a[0])) / two_area,
        ]
    }

    pub fn centroid(&self, k: usize) -> [T; 2] {
        let [a, b, c] = self.tri_vertices(k);
        let third = T::one() / T::of(3.0);
        [
            (a[0] + b[0] + c[0]) * third,
            (a[1] + b[1] + c[1]) * third,
        ]
    }

    pub fn area(&self) -> T {
        neumaier_sum((0..self.triangles.len()).map(|k| self.tri_area(k)))
    }

    pub fn min_angle_deg(&self) -> T {
        let mut worst = T::infinity();
        for k in 0..self.triangles.len() {
            let [a, b, c] = self.tri_vertices(k);
            let pts = [a, b, c];
            for i in 0..3 {
                let p = pts[i];
                let q = pts[(i + 1) % 3];
                let r = pts[(i + 2) % 3];
                let v1 = [q[0] - p[0], q[1] - p[1]];
                let v2 = [r[0] - p[0], r[1] - p[1]];
                let dot = v1[0] * v2[0] + v1[1] * v2[1];
                let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
                let n2 = (v2[0] * v2[0] + v2[1] * v2[1]).sqrt();
                let cosv = (dot / (n1 * n2)).min(T::one()).max(-T::one());
                worst = worst.min(cosv.acos().to_degrees());
            }
        }
        worst
    }

    pub fn max_edge_length(&self) -> T {
        let mut longest = T::zero();
        for k in 0..self.triangles.len() {
            let [a, b, c] = self.tri_vertices(k);
            for (p, q) in [(a, b), (b, c), (c, a)] {
                let l = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                longest = longest.max(l);
            }
        }
        longest
    }

    /// Component id per vertex; `None` for interior vertices.
    pub fn boundary_components(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.vertices.len()];
        for e in &self.boundary_edges {
            for &v in &e.vertices {
                out[v] = Some(e.component);
            }
        }
        out
    }

    pub fn boundary_component_count(&self) -> usize {
        self.boundary_edges
            .iter()
            .map(|e| e.component)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Closed boundary loops (vertex indices, interior on the left), one per
    /// component, indexed by component id.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>> {
        let ncomp = self.boundary_component_count();
        let mut next: HashMap<(usize, usize), usize> = HashMap::new();
        let mut start = vec![usize::MAX; ncomp];
        for e in &self.boundary_edges {
            next.insert((e.component, e.vertices[0]), e.vertices[1]);
            if start[e.component] == usize::MAX {
                start[e.component] = e.vertices[0];
            }
        }
        let mut loops = Vec::with_capacity(ncomp);
        for (c, &s) in start.iter().enumerate() {
            if s == usize::MAX {
                return Err(Error::MeshGeneration(format!(
                    "boundary component {c} has no edges"
                )));
            }
            let mut walk = vec![s];
            let mut cur = s;
            loop {
                let nxt = *next.get(&(c, cur)).ok_or_else(|| {
                    Error::MeshGeneration(format!("boundary loop {c} is not closed"))
                })?;
                if nxt == s {
                    break;
                }
                walk.push(nxt);
                cur = nxt;
                if walk.len() > self.boundary_edges.len() + 1 {
                    return Err(Error::MeshGeneration(format!(
                        "boundary loop {c} does not close"
                    )));
                }
            }
            loops.push(walk);
        }
        Ok(loops)
    }

    /// Structural invariants: positive conforming triangles, closed disjoint
    /// boundary loops, and the area partition (triangle areas plus polygonal
    /// hole areas recover the polygonal outer-loop area).
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::MeshGeneration(format!(
                    "triangle {k} references a missing vertex"
                )));
            }
            if !(self.tri_area(k) > T::zero()) {
                return Err(Error::MeshGeneration(format!(
                    "triangle {k} is not positively oriented"
                )));
            }
            for i in 0..3 {
                let e = (t[i], t[(i + 1) % 3]);
                if directed.insert(e, k).is_some() {
                    return Err(Error::MeshGeneration(format!(
                        "directed edge {e:?} appears twice; mesh is not conforming"
                    )));
                }
            }
        }
        let mut vertex_comp = vec![usize::MAX; n];
        for e in &self.boundary_edges {
            let (a, b) = (e.vertices[0], e.vertices[1]);
            if !directed.contains_key(&(a, b)) {
                return Err(Error::MeshGeneration(format!(
                    "boundary edge ({a}, {b}) has no interior triangle on its left"
                )));
            }
            if directed.contains_key(&(b, a)) {
                return Err(Error::MeshGeneration(format!(
                    "boundary edge ({a}, {b}) is shared by two triangles"
                )));
            }
            for &v in &e.vertices {
                if vertex_comp[v] != usize::MAX && vertex_comp[v] != e.component {
                    return Err(Error::MeshGeneration(format!(
                        "vertex {v} lies on two boundary components"
                    )));
                }
                vertex_comp[v] = e.component;
            }
        }
        // interior edges must be paired
        for (&(a, b), _) in directed.iter() {
            if !directed.contains_key(&(b, a))
                && !self
                    .boundary_edges
                    .iter()
                    .any(|e| e.vertices == [a, b])
            {
                return Err(Error::MeshGeneration(format!(
                    "edge ({a}, {b}) is neither interior nor a tagged boundary edge"
                )));
            }
        }
        let loops = self.boundary_loops()?;
        if self.hole_areas.len() + 1 != loops.len() {
            return Err(Error::MeshGeneration(format!(
                "{} hole areas for {} boundary components",
                self.hole_areas.len(),
                loops.len()
            )));
        }
        // area partition with the polygonal loop areas
        let loop_area = |walk: &[usize]| -> T {
            let pts: Vec<[T; 2]> = walk.iter().map(|&v| self.vertices[v]).collect();
            shoelace(&pts)
        };
        let outer = loop_area(&loops[0]);
        if !(outer > T::zero()) {
            return Err(Error::MeshGeneration(
                "outer boundary loop is not counterclockwise".into(),
            ));
        }
        let mut holes = T::zero();
        for walk in &loops[1..] {
            let a = loop_area(walk);
            if !(a < T::zero()) {
                return Err(Error::MeshGeneration(
                    "hole boundary loop is not clockwise".into(),
                ));
            }
            holes = holes + a.abs();
        }
        let total = self.area();
        let gap = (total + holes - outer).abs();
        if gap > T::of(1e-10) * outer.max(T::one()) {
            return Err(Error::MeshGeneration(format!(
                "area partition violated: triangles {total} + holes {holes} vs outer {outer}"
            )));
        }
        Ok(())
    }
}

/// Integrates the chosen quantity of a nodal field over the mesh.
///
/// `Field` uses the exact P1 formula; `GradNormPow` and `XDotGrad` reduce to
/// per-triangle constants; `FieldTimesMoment` applies the order-2 rule.
pub fn integrate_field<T: Real>(
    mesh: &Mesh<T>,
    field: &ScalarField<T>,
    integrand: Integrand<T>,
) -> Result<T> {
    field.check(mesh)?;
    let vals = &field.values;
    match integrand {
        Integrand::Field => {
            let third = T::one() / T::of(3.0);
            Ok(neumaier_sum((0..mesh.triangles.len()).map(|k| {
                let [a, b, c] = mesh.triangles[k];
                mesh.tri_area(k) * third * (vals[a] + vals[b] + vals[c])
            })))
        }
        Integrand::GradNormPow(p) => {
            if !(p >= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "grad_norm_pow requires p >= 1, got {p}"
                )));
            }
            Ok(neumaier_sum((0..mesh.triangles.len()).map(|k| {
                let g = mesh.tri_gradient(k, vals);
                let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                mesh.tri_area(k) * norm.powf(p)
            })))
        }
        Integrand::XDotGrad => Ok(neumaier_sum((0..mesh.triangles.len()).map(|k| {
            let g = mesh.tri_gradient(k, vals);
            let c = mesh.centroid(k);
            mesh.tri_area(k) * (c[0] * g[0] + c[1] * g[1])
        }))),
        Integrand::FieldTimesMoment => {
            let rule = QuadratureRule::<T>::order2();
            Ok(neumaier_sum((0..mesh.triangles.len()).map(|k| {
                let [ia, ib, ic] = mesh.triangles[k];
                let [a, b, c] = mesh.tri_vertices(k);
                let mut acc = T::zero();
                for (bc, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = [
                        bc[0] * a[0] + bc[1] * b[0] + bc[2] * c[0],
                        bc[0] * a[1] + bc[1] * b[1] + bc[2] * c[1],
                    ];
                    let u = bc[0] * vals[ia] + bc[1] * vals[ib] + bc[2] * vals[ic];
                    acc = acc + w * u * (x[0] * x[0] + x[1] * x[1]);
                }
                mesh.tri_area(k) * acc
            })))
        }
    }
}

/// Nodal field of exact Euclidean distances to the true boundary curves of
/// the originating domain; exactly zero on boundary vertices.
pub fn boundary_distance_field<T: Real>(mesh: &Mesh<T>) -> Result<ScalarField<T>> {
    let spec = mesh.spec.as_ref().ok_or_else(|| {
        Error::MissingDomain("mesh has no originating domain description".into())
    })?;
    let comps = mesh.boundary_components();
    let values = mesh
        .vertices
        .iter()
        .zip(&comps)
        .map(|(&v, c)| {
            if c.is_some() {
                T::zero()
            } else {
                spec.boundary_distance(v)
            }
        })
        .collect();
    ScalarField::new(mesh, values)
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct MeshDoc<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    hole_areas: Vec<T>,
    target_h: T,
}

impl<T: Real + Serialize> Mesh<T> {
    pub fn to_json(&self) -> Result<String> {
        let doc = MeshDoc {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            hole_areas: self.hole_areas.clone(),
            target_h: self.target_h,
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

impl<T: Real + DeserializeOwned> Mesh<T> {
    /// Imports a mesh exported by `to_json`. The originating domain is not
    /// part of the document, so distance fields are unavailable on the
    /// result.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MeshDoc<T> = serde_json::from_str(s)?;
        let mesh = Mesh {
            vertices: doc.vertices,
            triangles: doc.triangles,
            boundary_edges: doc.boundary_edges,
            hole_areas: doc.hole_areas,
            target_h: doc.target_h,
            spec: None,
            id: next_mesh_id(),
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

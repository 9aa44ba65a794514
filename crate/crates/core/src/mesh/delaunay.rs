//! Incremental constrained Delaunay triangulation in the plane.
//!
//! Predicates always evaluate in `f64` with locality-aware tolerance guards:
//! rings of boundary samples on a common circle are exactly co-circular, and
//! an unguarded incircle test would flip their chords back and forth. The
//! guard treats determinants below the local roundoff scale as "not inside",
//! which accepts either diagonal of a co-circular quad and keeps insertion
//! terminating.
//!
//! Containers are chosen for determinism: triangle storage is a slot vector,
//! constraints live in a `BTreeMap`, and hash maps are only ever used for
//! keyed lookup, never iterated. Two runs over the same input produce the
//! same triangulation.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

const DEAD: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tri {
    pub v: [u32; 3],
    pub alive: bool,
    pub inside: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Loc {
    Inside(u32),
    /// Triangle index and local edge index (edge k runs v[k] -> v[k+1]).
    OnEdge(u32, usize),
    OnVertex(u32),
}

pub(crate) struct Triangulation {
    pub pts: Vec<[f64; 2]>,
    pub tris: Vec<Tri>,
    free: Vec<u32>,
    /// Directed edge (a, b) -> index of the triangle containing a -> b.
    edge: HashMap<(u32, u32), u32>,
    /// Directed constrained edges following loop orientation -> component id.
    pub constraints: BTreeMap<(u32, u32), u32>,
    hint: u32,
    inserted: usize,
}

impl Triangulation {
    /// Starts from a triangle comfortably enclosing the bounding box.
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let w = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12) * 64.0;
        let pts = vec![
            [cx - 3.0 * w, cy - w],
            [cx + 3.0 * w, cy - w],
            [cx, cy + 3.0 * w],
        ];
        let mut t = Self {
            pts,
            tris: Vec::new(),
            free: Vec::new(),
            edge: HashMap::new(),
            constraints: BTreeMap::new(),
            hint: 0,
            inserted: 0,
        };
        t.add_tri(0, 1, 2, false);
        t
    }

    pub fn point(&self, v: u32) -> [f64; 2] {
        self.pts[v as usize]
    }

    pub fn is_super_vertex(v: u32) -> bool {
        v < 3
    }

    fn add_tri(&mut self, a: u32, b: u32, c: u32, inside: bool) -> u32 {
        let tri = Tri {
            v: [a, b, c],
            alive: true,
            inside,
        };
        let id = if let Some(id) = self.free.pop() {
            self.tris[id as usize] = tri;
            id
        } else {
            self.tris.push(tri);
            (self.tris.len() - 1) as u32
        };
        self.edge.insert((a, b), id);
        self.edge.insert((b, c), id);
        self.edge.insert((c, a), id);
        self.hint = id;
        id
    }

    fn kill_tri(&mut self, id: u32) {
        let t = self.tris[id as usize];
        debug_assert!(t.alive);
        for k in 0..3 {
            let key = (t.v[k], t.v[(k + 1) % 3]);
            if self.edge.get(&key) == Some(&id) {
                self.edge.remove(&key);
            }
        }
        self.tris[id as usize].alive = false;
        self.free.push(id);
    }

    pub fn tri_across(&self, a: u32, b: u32) -> Option<u32> {
        self.edge.get(&(a, b)).copied()
    }

    pub fn is_constrained(&self, a: u32, b: u32) -> bool {
        self.constraints.contains_key(&(a, b)) || self.constraints.contains_key(&(b, a))
    }

    fn orient_sign(&self, a: u32, b: u32, c: [f64; 2]) -> i32 {
        let pa = self.point(a);
        let pb = self.point(b);
        let det = (pb[0] - pa[0]) * (c[1] - pa[1]) - (pb[1] - pa[1]) * (c[0] - pa[0]);
        let m = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2))
            .max((c[0] - pa[0]).powi(2) + (c[1] - pa[1]).powi(2));
        if det.abs() <= 1e-12 * m {
            0
        } else if det > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Is d strictly inside the circumcircle of the ccw triangle (a, b, c)?
    fn incircle(&self, a: u32, b: u32, c: u32, d: u32) -> bool {
        let pa = self.point(a);
        let pb = self.point(b);
        let pc = self.point(c);
        let pd = self.point(d);
        let adx = pa[0] - pd[0];
        let ady = pa[1] - pd[1];
        let bdx = pb[0] - pd[0];
        let bdy = pb[1] - pd[1];
        let cdx = pc[0] - pd[0];
        let cdy = pc[1] - pd[1];
        let ad2 = adx * adx + ady * ady;
        let bd2 = bdx * bdx + bdy * bdy;
        let cd2 = cdx * cdx + cdy * cdy;
        let det = adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2)
            + ad2 * (bdx * cdy - cdx * bdy);
        let m = ad2.max(bd2).max(cd2);
        det > 1e-12 * m * m
    }

    pub fn locate(&self, p: [f64; 2]) -> Result<Loc> {
        let mut t = if (self.hint as usize) < self.tris.len()
            && self.tris[self.hint as usize].alive
        {
            self.hint
        } else {
            self.first_alive()?
        };
        let limit = 4 * self.tris.len() + 64;
        for _ in 0..limit {
            let tri = self.tris[t as usize];
            // near-vertex short circuit; duplicates collapse onto the vertex
            for &v in &tri.v {
                let q = self.point(v);
                let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                let m = q[0].abs().max(q[1].abs()).max(1.0);
                if d2 <= (1e-13 * m).powi(2) {
                    return Ok(Loc::OnVertex(v));
                }
            }
            let mut signs = [0i32; 3];
            for k in 0..3 {
                signs[k] = self.orient_sign(tri.v[k], tri.v[(k + 1) % 3], p);
            }
            if let Some(k) = (0..3).find(|&k| signs[k] < 0) {
                let a = tri.v[k];
                let b = tri.v[(k + 1) % 3];
                match self.tri_across(b, a) {
                    Some(n) => {
                        t = n;
                        continue;
                    }
                    None => {
                        return Err(Error::MeshGeneration(
                            "point location walked off the triangulation".into(),
                        ))
                    }
                }
            }
            if let Some(k) = (0..3).find(|&k| signs[k] == 0) {
                return Ok(Loc::OnEdge(t, k));
            }
            return Ok(Loc::Inside(t));
        }
        // guarded predicates can in principle cycle; fall back to a scan
        for (id, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            if (0..3).all(|k| self.orient_sign(tri.v[k], tri.v[(k + 1) % 3], p) >= 0) {
                return Ok(Loc::Inside(id as u32));
            }
        }
        Err(Error::MeshGeneration("point location failed".into()))
    }

    fn first_alive(&self) -> Result<u32> {
        self.tris
            .iter()
            .position(|t| t.alive)
            .map(|i| i as u32)
            .ok_or_else(|| Error::MeshGeneration("empty triangulation".into()))
    }

    /// Inserts a point, restoring the constrained Delaunay property. Returns
    /// the vertex index (an existing one if p coincides with a vertex) and
    /// fails if p lies on a constrained edge; callers split that edge through
    /// `split_constraint` instead.
    pub fn insert(&mut self, p: [f64; 2]) -> Result<u32> {
        match self.locate(p)? {
            Loc::OnVertex(v) => Ok(v),
            Loc::Inside(t) => {
                let v = self.push_point(p);
                let tri = self.tris[t as usize];
                let [a, b, c] = tri.v;
                self.kill_tri(t);
                self.add_tri(a, b, v, tri.inside);
                self.add_tri(b, c, v, tri.inside);
                self.add_tri(c, a, v, tri.inside);
                self.legalize(v, vec![(a, b), (b, c), (c, a)]);
                Ok(v)
            }
            Loc::OnEdge(t, k) => {
                let tri = self.tris[t as usize];
                let a = tri.v[k];
                let b = tri.v[(k + 1) % 3];
                if self.is_constrained(a, b) {
                    return Err(Error::MeshGeneration(
                        "insertion point lies on a constrained edge".into(),
                    ));
                }
                let v = self.push_point(p);
                self.split_edge_unchecked(a, b, v);
                Ok(v)
            }
        }
    }

    fn push_point(&mut self, p: [f64; 2]) -> u32 {
        self.pts.push(p);
        self.inserted += 1;
        (self.pts.len() - 1) as u32
    }

    /// 2-4 split of the (not necessarily constrained) edge (a, b) at the
    /// already-registered vertex v.
    fn split_edge_unchecked(&mut self, a: u32, b: u32, v: u32) {
        let t1 = self.edge[&(a, b)];
        let t2 = self.edge[&(b, a)];
        let tri1 = self.tris[t1 as usize];
        let tri2 = self.tris[t2 as usize];
        let c = third_vertex(&tri1, a, b);
        let d = third_vertex(&tri2, b, a);
        self.kill_tri(t1);
        self.kill_tri(t2);
        self.add_tri(b, c, v, tri1.inside);
        self.add_tri(c, a, v, tri1.inside);
        self.add_tri(d, b, v, tri2.inside);
        self.add_tri(a, d, v, tri2.inside);
        self.legalize(v, vec![(b, c), (c, a), (d, b), (a, d)]);
    }

    /// Splits the constrained edge (a, b) at point p (which may be off the
    /// chord, e.g. projected onto a circle). The constraint is replaced by
    /// its two halves; the caller must afterwards re-check presence with
    /// `missing_constraints`.
    pub fn split_constraint(&mut self, a: u32, b: u32, p: [f64; 2]) -> Result<u32> {
        let (key, comp) = if let Some(c) = self.constraints.get(&(a, b)) {
            ((a, b), *c)
        } else if let Some(c) = self.constraints.get(&(b, a)) {
            ((b, a), *c)
        } else {
            return Err(Error::MeshGeneration("edge is not constrained".into()));
        };
        self.constraints.remove(&key);
        let v = match self.locate(p)? {
            Loc::OnVertex(w) => w,
            Loc::OnEdge(t, k) => {
                let tri = self.tris[t as usize];
                let ea = tri.v[k];
                let eb = tri.v[(k + 1) % 3];
                if self.is_constrained(ea, eb) {
                    // p landed on some other constraint; restore and fail
                    self.constraints.insert(key, comp);
                    return Err(Error::MeshGeneration(
                        "constraint split point fell on another constraint".into(),
                    ));
                }
                let v = self.push_point(p);
                self.split_edge_unchecked(ea, eb, v);
                v
            }
            Loc::Inside(t) => {
                let tri = self.tris[t as usize];
                let [x, y, z] = tri.v;
                let v = self.push_point(p);
                self.kill_tri(t);
                self.add_tri(x, y, v, tri.inside);
                self.add_tri(y, z, v, tri.inside);
                self.add_tri(z, x, v, tri.inside);
                self.legalize(v, vec![(x, y), (y, z), (z, x)]);
                v
            }
        };
        self.constraints.insert((key.0, v), comp);
        self.constraints.insert((v, key.1), comp);
        Ok(v)
    }

    fn legalize(&mut self, p: u32, mut stack: Vec<(u32, u32)>) {
        let mut guard = 0usize;
        while let Some((a, b)) = stack.pop() {
            guard += 1;
            if guard > 100_000 {
                // co-circular guards should prevent this; bail out rather
                // than loop forever, the quality pass will catch any damage
                return;
            }
            if self.is_constrained(a, b) {
                continue;
            }
            let t1 = match self.edge.get(&(a, b)) {
                Some(&t) if self.tris[t as usize].alive => t,
                _ => continue,
            };
            if third_vertex(&self.tris[t1 as usize], a, b) != p {
                continue;
            }
            let t2 = match self.edge.get(&(b, a)) {
                Some(&t) if self.tris[t as usize].alive => t,
                _ => continue,
            };
            let tri2 = self.tris[t2 as usize];
            let d = third_vertex(&tri2, b, a);
            if !self.incircle(a, b, p, d) {
                continue;
            }
            // flip only strictly convex quads
            if self.orient_sign(a, d, self.point(p)) <= 0
                || self.orient_sign(d, b, self.point(p)) <= 0
            {
                continue;
            }
            let inside = self.tris[t1 as usize].inside;
            self.kill_tri(t1);
            self.kill_tri(t2);
            self.add_tri(a, d, p, inside);
            self.add_tri(d, b, p, inside);
            stack.push((a, d));
            stack.push((d, b));
        }
    }

    /// Registers the consecutive pairs of a closed loop as constrained edges.
    pub fn add_constraint_loop(&mut self, loop_vertices: &[u32], component: u32) {
        let n = loop_vertices.len();
        for i in 0..n {
            let a = loop_vertices[i];
            let b = loop_vertices[(i + 1) % n];
            self.constraints.insert((a, b), component);
        }
    }

    /// Constraints that are not currently edges of the triangulation.
    pub fn missing_constraints(&self) -> Vec<(u32, u32, u32)> {
        self.constraints
            .iter()
            .filter(|((a, b), _)| {
                !self.edge.contains_key(&(*a, *b)) && !self.edge.contains_key(&(*b, *a))
            })
            .map(|((a, b), c)| (*a, *b, *c))
            .collect()
    }

    /// Reconstructs the closed constraint loops, ordered by component id.
    /// Each loop lists vertices in stored (domain-on-the-left) orientation.
    pub fn constraint_loops(&self) -> Result<Vec<(u32, Vec<u32>)>> {
        let mut next: HashMap<(u32, u32), u32> = HashMap::new();
        let mut comps: Vec<u32> = Vec::new();
        for (&(a, b), &c) in &self.constraints {
            next.insert((c, a), b);
            if !comps.contains(&c) {
                comps.push(c);
            }
        }
        comps.sort_unstable();
        let mut loops = Vec::new();
        for c in comps {
            let start = self
                .constraints
                .iter()
                .find(|(_, &cc)| cc == c)
                .map(|((a, _), _)| *a)
                .expect("component has edges");
            let mut walk = vec![start];
            let mut cur = start;
            loop {
                let nxt = *next.get(&(c, cur)).ok_or_else(|| {
                    Error::MeshGeneration(format!("boundary loop of component {c} is not closed"))
                })?;
                if nxt == start {
                    break;
                }
                walk.push(nxt);
                cur = nxt;
                if walk.len() > self.constraints.len() + 1 {
                    return Err(Error::MeshGeneration(format!(
                        "boundary loop of component {c} does not close"
                    )));
                }
            }
            loops.push((c, walk));
        }
        Ok(loops)
    }

    /// Flood-fills regions bounded by constrained edges and classifies each
    /// with the provided point test (applied to one triangle centroid per
    /// region).
    pub fn classify(&mut self, is_inside: &dyn Fn([f64; 2]) -> bool) {
        let n = self.tris.len();
        let mut region = vec![DEAD; n];
        let mut current = 0u32;
        for seed in 0..n {
            if !self.tris[seed].alive || region[seed] != DEAD {
                continue;
            }
            let mut queue = vec![seed as u32];
            region[seed] = current;
            let mut members = vec![seed as u32];
            while let Some(t) = queue.pop() {
                let tri = self.tris[t as usize];
                for k in 0..3 {
                    let a = tri.v[k];
                    let b = tri.v[(k + 1) % 3];
                    if self.is_constrained(a, b) {
                        continue;
                    }
                    if let Some(nb) = self.tri_across(b, a) {
                        if self.tris[nb as usize].alive && region[nb as usize] == DEAD {
                            region[nb as usize] = current;
                            members.push(nb);
                            queue.push(nb);
                        }
                    }
                }
            }
            // classify the whole region from one representative centroid,
            // skipping triangles that touch the enclosing super-triangle
            let rep = members
                .iter()
                .find(|&&t| self.tris[t as usize].v.iter().all(|&v| !Self::is_super_vertex(v)))
                .copied();
            let inside = match rep {
                Some(t) => is_inside(self.centroid(t)),
                None => false,
            };
            for &t in &members {
                self.tris[t as usize].inside = inside;
            }
            current += 1;
        }
    }

    pub fn centroid(&self, t: u32) -> [f64; 2] {
        let tri = self.tris[t as usize];
        let a = self.point(tri.v[0]);
        let b = self.point(tri.v[1]);
        let c = self.point(tri.v[2]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn circumcenter(&self, t: u32) -> Option<[f64; 2]> {
        let tri = self.tris[t as usize];
        let a = self.point(tri.v[0]);
        let b = self.point(tri.v[1]);
        let c = self.point(tri.v[2]);
        let d = 2.0 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        if d.abs() < 1e-30 {
            return None;
        }
        let b2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
        let c2 = (c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2);
        let ux = (c[1] - a[1]) * b2 - (b[1] - a[1]) * c2;
        let uy = (b[0] - a[0]) * c2 - (c[0] - a[0]) * b2;
        Some([a[0] + ux / d, a[1] + uy / d])
    }

    /// Squared edge lengths of triangle t, indexed like its edges.
    pub fn edge_lengths2(&self, t: u32) -> [f64; 3] {
        let tri = self.tris[t as usize];
        let mut out = [0.0; 3];
        for k in 0..3 {
            let a = self.point(tri.v[k]);
            let b = self.point(tri.v[(k + 1) % 3]);
            out[k] = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        }
        out
    }

    pub fn min_angle_deg(&self, t: u32) -> f64 {
        let l2 = self.edge_lengths2(t);
        let mut worst = f64::INFINITY;
        for k in 0..3 {
            // angle at vertex v[k] is between edges k and k+2, opposite edge k+1
            let b2 = l2[k];
            let c2 = l2[(k + 2) % 3];
            let a2 = l2[(k + 1) % 3];
            let denom = 2.0 * (b2 * c2).sqrt();
            if denom == 0.0 {
                return 0.0;
            }
            let cosv = ((b2 + c2 - a2) / denom).clamp(-1.0, 1.0);
            worst = worst.min(cosv.acos().to_degrees());
        }
        worst
    }

    #[cfg(test)]
    pub fn signed_area(&self, t: u32) -> f64 {
        let tri = self.tris[t as usize];
        let a = self.point(tri.v[0]);
        let b = self.point(tri.v[1]);
        let c = self.point(tri.v[2]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn inserted_count(&self) -> usize {
        self.inserted
    }

    /// Moves a free (unconstrained, non-super) vertex. The caller is
    /// responsible for keeping the move inside the vertex's kernel; flips
    /// should follow to restore Delaunay quality.
    pub fn move_vertex(&mut self, v: u32, p: [f64; 2]) {
        self.pts[v as usize] = p;
    }

    /// One Lawson pass over all non-constrained interior edges; returns the
    /// number of flips performed.
    pub fn flip_pass(&mut self) -> usize {
        let mut flips = 0;
        for id in 0..self.tris.len() {
            if !self.tris[id].alive {
                continue;
            }
            let tri = self.tris[id];
            for k in 0..3 {
                let a = tri.v[k];
                let b = tri.v[(k + 1) % 3];
                if a > b || self.is_constrained(a, b) {
                    continue;
                }
                let t1 = match self.edge.get(&(a, b)) {
                    Some(&t) if t == id as u32 && self.tris[t as usize].alive => t,
                    _ => continue,
                };
                let t2 = match self.edge.get(&(b, a)) {
                    Some(&t) if self.tris[t as usize].alive => t,
                    _ => continue,
                };
                let p = third_vertex(&self.tris[t1 as usize], a, b);
                let d = third_vertex(&self.tris[t2 as usize], b, a);
                if !self.incircle(a, b, p, d) {
                    continue;
                }
                if self.orient_sign(a, d, self.point(p)) <= 0
                    || self.orient_sign(d, b, self.point(p)) <= 0
                {
                    continue;
                }
                let inside = self.tris[t1 as usize].inside;
                self.kill_tri(t1);
                self.kill_tri(t2);
                self.add_tri(a, d, p, inside);
                self.add_tri(d, b, p, inside);
                flips += 1;
            }
        }
        flips
    }
}

pub(crate) fn third_vertex(tri: &Tri, a: u32, b: u32) -> u32 {
    for k in 0..3 {
        if tri.v[k] == a && tri.v[(k + 1) % 3] == b {
            return tri.v[(k + 2) % 3];
        }
    }
    panic!("edge ({a}, {b}) not in triangle {:?}", tri.v);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_cloud() -> Triangulation {
        let mut t = Triangulation::new([0.0, 0.0], [1.0, 1.0]);
        for &p in &[
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.25, 0.75],
        ] {
            t.insert(p).unwrap();
        }
        t
    }

    #[test]
    fn insert_builds_a_conforming_delaunay_set() {
        let t = square_cloud();
        let alive: Vec<_> = t
            .tris
            .iter()
            .filter(|tr| tr.alive)
            .collect();
        assert!(!alive.is_empty());
        for tr in &alive {
            let a = t.pts[tr.v[0] as usize];
            let b = t.pts[tr.v[1] as usize];
            let c = t.pts[tr.v[2] as usize];
            let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
            assert!(area > 0.0, "non-positive triangle {:?}", tr.v);
        }
    }

    #[test]
    fn duplicate_insert_returns_existing_vertex() {
        let mut t = square_cloud();
        let before = t.pts.len();
        let v = t.insert([0.5, 0.5]).unwrap();
        assert_eq!(t.pts.len(), before);
        assert_eq!(t.point(v), [0.5, 0.5]);
    }

    #[test]
    fn cocircular_ring_insertion_is_stable() {
        // 64 points on a circle are pairwise co-circular; guarded predicates
        // must terminate and produce positive triangles
        let mut t = Triangulation::new([-1.0, -1.0], [1.0, 1.0]);
        let mut ring = Vec::new();
        for k in 0..64 {
            let th = std::f64::consts::TAU * (k as f64) / 64.0;
            ring.push(t.insert([th.cos(), th.sin()]).unwrap());
        }
        t.add_constraint_loop(&ring, 0);
        assert!(t.missing_constraints().is_empty());
        for tr in t.tris.iter().filter(|tr| tr.alive) {
            let a = t.pts[tr.v[0] as usize];
            let b = t.pts[tr.v[1] as usize];
            let c = t.pts[tr.v[2] as usize];
            let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
            assert!(area > 0.0);
        }
    }

    #[test]
    fn constraint_loops_close_and_orient() {
        let mut t = Triangulation::new([-1.0, -1.0], [1.0, 1.0]);
        let mut ring = Vec::new();
        for k in 0..16 {
            let th = std::f64::consts::TAU * (k as f64) / 16.0;
            ring.push(t.insert([th.cos(), th.sin()]).unwrap());
        }
        t.add_constraint_loop(&ring, 0);
        let loops = t.constraint_loops().unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].0, 0);
        assert_eq!(loops[0].1.len(), 16);
    }

    #[test]
    fn classify_separates_disk_interior_from_exterior() {
        let mut t = Triangulation::new([-1.0, -1.0], [1.0, 1.0]);
        let mut ring = Vec::new();
        for k in 0..32 {
            let th = std::f64::consts::TAU * (k as f64) / 32.0;
            ring.push(t.insert([th.cos(), th.sin()]).unwrap());
        }
        t.add_constraint_loop(&ring, 0);
        t.insert([0.1, 0.2]).unwrap();
        let poly: Vec<[f64; 2]> = ring.iter().map(|&v| t.point(v)).collect();
        t.classify(&|p| crate::geometry::point_in_loop(p, &poly));
        let inside_area: f64 = (0..t.tris.len() as u32)
            .filter(|&i| t.tris[i as usize].alive && t.tris[i as usize].inside)
            .map(|i| t.signed_area(i))
            .sum();
        // area of the inscribed 32-gon
        let expected = 0.5 * 32.0 * (std::f64::consts::TAU / 32.0).sin();
        assert!((inside_area - expected).abs() < 1e-12, "{inside_area} vs {expected}");
    }

    #[test]
    fn split_constraint_replaces_edge_with_halves() {
        let mut t = Triangulation::new([-1.0, -1.0], [1.0, 1.0]);
        let mut ring = Vec::new();
        for k in 0..8 {
            let th = std::f64::consts::TAU * (k as f64) / 8.0;
            ring.push(t.insert([th.cos(), th.sin()]).unwrap());
        }
        t.add_constraint_loop(&ring, 0);
        let (a, b) = (ring[0], ring[1]);
        // project the chord midpoint back onto the circle
        let pa = t.point(a);
        let pb = t.point(b);
        let m = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let norm = (m[0] * m[0] + m[1] * m[1]).sqrt();
        let proj = [m[0] / norm, m[1] / norm];
        let v = t.split_constraint(a, b, proj).unwrap();
        assert!(!t.is_constrained(a, b));
        assert!(t.is_constrained(a, v));
        assert!(t.is_constrained(v, b));
        assert!(t.missing_constraints().is_empty());
        let loops = t.constraint_loops().unwrap();
        assert_eq!(loops[0].1.len(), 9);
    }
}

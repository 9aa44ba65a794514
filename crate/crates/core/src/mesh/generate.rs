//! Mesh generation pipeline: boundary sampling on the exact curves,
//! constrained Delaunay triangulation, region carving, Ruppert-style quality
//! refinement, and smart Laplacian smoothing.

use super::delaunay::{Loc, Triangulation};
use super::{next_mesh_id, BoundaryEdge, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{point_in_loop, DomainKind, DomainSpec};
use crate::scalar::Real;

const MIN_ANGLE_DEG: f64 = 20.0;
/// Refine triangles whose longest edge exceeds this multiple of h; the mesh
/// contract only promises 2h, the slack absorbs smoothing drift.
const SIZE_FACTOR: f64 = 1.5;

/// How boundary points of a component are generated when a constrained edge
/// must be split: circles reproject onto the exact curve, straight-edged
/// loops split at the chord midpoint.
enum ComponentCurve {
    Circle { center: [f64; 2], radius: f64 },
    Polyline,
}

impl ComponentCurve {
    fn split_point(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        match self {
            ComponentCurve::Polyline => mid,
            ComponentCurve::Circle { center, radius } => {
                let dx = mid[0] - center[0];
                let dy = mid[1] - center[1];
                let len = (dx * dx + dy * dy).sqrt();
                if len == 0.0 {
                    // degenerate chord through the center; cannot happen for
                    // sampled arcs shorter than a semicircle
                    return mid;
                }
                [
                    center[0] + radius * dx / len,
                    center[1] + radius * dy / len,
                ]
            }
        }
    }
}

fn component_curves<T: Real>(spec: &DomainSpec<T>) -> Vec<ComponentCurve> {
    let f = |x: T| x.as_f64();
    match spec.kind() {
        DomainKind::Disk { center, radius } => vec![ComponentCurve::Circle {
            center: [f(center[0]), f(center[1])],
            radius: f(*radius),
        }],
        DomainKind::Annulus {
            center,
            r_inner,
            r_outer,
        } => vec![
            ComponentCurve::Circle {
                center: [f(center[0]), f(center[1])],
                radius: f(*r_outer),
            },
            ComponentCurve::Circle {
                center: [f(center[0]), f(center[1])],
                radius: f(*r_inner),
            },
        ],
        DomainKind::Rectangle { .. } => vec![ComponentCurve::Polyline],
        DomainKind::PolygonWithHoles { hole_loops, .. } => {
            (0..=hole_loops.len()).map(|_| ComponentCurve::Polyline).collect()
        }
    }
}

fn narrowest_feature<T: Real>(spec: &DomainSpec<T>) -> f64 {
    match spec.kind() {
        DomainKind::Disk { radius, .. } => radius.as_f64(),
        DomainKind::Annulus {
            r_inner, r_outer, ..
        } => (*r_outer - *r_inner).as_f64(),
        DomainKind::Rectangle {
            corner_min,
            corner_max,
        } => (corner_max[0] - corner_min[0])
            .min(corner_max[1] - corner_min[1])
            .as_f64(),
        DomainKind::PolygonWithHoles { .. } => {
            let (lo, hi) = spec.bounding_box();
            (hi[0] - lo[0]).min(hi[1] - lo[1]).as_f64()
        }
    }
}

pub(crate) fn generate<T: Real>(spec: &DomainSpec<T>, h: T) -> Result<Mesh<T>> {
    if spec.dimension() != 2 {
        return Err(Error::InvalidDomain(
            "mesh generation requires a 2-D domain".into(),
        ));
    }
    let hf = h.as_f64();
    if !(hf > 0.0) || !hf.is_finite() {
        return Err(Error::InvalidParameter("mesh size h must be > 0".into()));
    }
    let feature = narrowest_feature(spec);
    if hf >= feature {
        return Err(Error::InvalidParameter(format!(
            "mesh size h = {hf} is not smaller than the narrowest feature {feature}"
        )));
    }

    let loops_t = spec.boundary_loops(h)?;
    let loops: Vec<Vec<[f64; 2]>> = loops_t
        .iter()
        .map(|lp| lp.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect())
        .collect();
    let curves = component_curves(spec);
    debug_assert_eq!(curves.len(), loops.len());

    let (lo_t, hi_t) = spec.bounding_box();
    let lo = [lo_t[0].as_f64(), lo_t[1].as_f64()];
    let hi = [hi_t[0].as_f64(), hi_t[1].as_f64()];
    let mut tri = Triangulation::new(lo, hi);

    for (c, lp) in loops.iter().enumerate() {
        let mut ids = Vec::with_capacity(lp.len());
        for &p in lp {
            ids.push(tri.insert(p)?);
        }
        tri.add_constraint_loop(&ids, c as u32);
    }

    // rough vertex estimate drives the safety budget
    let area_estimate = spec.volume().as_f64().abs().max(hf * hf);
    let expected = (area_estimate / (0.4 * hf * hf)) as usize + tri.pts.len();
    let budget = 16 * expected + 100_000;

    recover_constraints(&mut tri, &curves, budget)?;
    refine(&mut tri, &curves, hf, budget)?;
    smooth(&mut tri, hf, 3);
    classify_current(&mut tri)?;
    extract(spec, &tri, h)
}

/// Splits constraints until every one is an edge of the triangulation.
fn recover_constraints(
    tri: &mut Triangulation,
    curves: &[ComponentCurve],
    budget: usize,
) -> Result<()> {
    loop {
        let missing = tri.missing_constraints();
        if missing.is_empty() {
            return Ok(());
        }
        if tri.inserted_count() > budget {
            return Err(Error::MeshGeneration(
                "constraint recovery exceeded its insertion budget".into(),
            ));
        }
        for (a, b, c) in missing {
            if tri.is_constrained(a, b) {
                let p = curves[c as usize].split_point(tri.point(a), tri.point(b));
                tri.split_constraint(a, b, p)?;
            }
        }
    }
}

/// Rebuilds the polygonal loops from the current constraints and classifies
/// the flood-fill regions against them.
fn classify_current(tri: &mut Triangulation) -> Result<()> {
    let loops = tri.constraint_loops()?;
    if loops.is_empty() || loops[0].0 != 0 {
        return Err(Error::MeshGeneration("missing outer boundary loop".into()));
    }
    let polys: Vec<Vec<[f64; 2]>> = loops
        .iter()
        .map(|(_, vs)| vs.iter().map(|&v| tri.point(v)).collect())
        .collect();
    let is_inside = move |p: [f64; 2]| -> bool {
        if !point_in_loop(p, &polys[0]) {
            return false;
        }
        polys[1..].iter().all(|hole| !point_in_loop(p, hole))
    };
    tri.classify(&is_inside);
    Ok(())
}

fn diametral_contains(tri: &Triangulation, a: u32, b: u32, p: [f64; 2]) -> bool {
    let pa = tri.point(a);
    let pb = tri.point(b);
    let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
    let r2 = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)) / 4.0;
    let d2 = (p[0] - mid[0]).powi(2) + (p[1] - mid[1]).powi(2);
    d2 < r2 * (1.0 - 1e-9)
}

fn is_bad(tri: &Triangulation, t: u32, size_max2: f64) -> bool {
    let l2 = tri.edge_lengths2(t);
    let longest = l2[0].max(l2[1]).max(l2[2]);
    longest > size_max2 || tri.min_angle_deg(t) < MIN_ANGLE_DEG
}

fn refine(
    tri: &mut Triangulation,
    curves: &[ComponentCurve],
    hf: f64,
    budget: usize,
) -> Result<()> {
    let size_max2 = (SIZE_FACTOR * hf).powi(2);
    let mut stale_sweeps = 0usize;
    for _sweep in 0..200 {
        classify_current(tri)?;
        let mut progressed = false;

        // Ruppert rule 1: split constrained edges encroached by their
        // neighbouring apex vertices.
        let snapshot: Vec<(u32, u32, u32)> = tri
            .constraints
            .iter()
            .map(|(&(a, b), &c)| (a, b, c))
            .collect();
        for (a, b, c) in snapshot {
            if !tri.is_constrained(a, b) {
                continue;
            }
            let mut encroached = false;
            for (x, y) in [(a, b), (b, a)] {
                if let Some(t) = tri.tri_across(x, y) {
                    let apex = super::delaunay::third_vertex(&tri.tris[t as usize], x, y);
                    if diametral_contains(tri, a, b, tri.point(apex)) {
                        encroached = true;
                        break;
                    }
                }
            }
            if encroached {
                let p = curves[c as usize].split_point(tri.point(a), tri.point(b));
                tri.split_constraint(a, b, p)?;
                progressed = true;
            }
        }
        if progressed {
            recover_constraints(tri, curves, budget)?;
            classify_current(tri)?;
        }

        // Ruppert rule 2: insert circumcenters of poor-quality or oversized
        // interior triangles.
        let bad: Vec<(u32, [u32; 3])> = (0..tri.tris.len() as u32)
            .filter(|&t| {
                let tr = &tri.tris[t as usize];
                tr.alive && tr.inside && is_bad(tri, t, size_max2)
            })
            .map(|t| (t, tri.tris[t as usize].v))
            .collect();

        for (t, verts) in bad {
            let tr = tri.tris[t as usize];
            if !tr.alive || tr.v != verts || !tr.inside || !is_bad(tri, t, size_max2) {
                continue;
            }
            if tri.inserted_count() > budget {
                return Err(Error::MeshGeneration(
                    "quality refinement exceeded its insertion budget".into(),
                ));
            }
            if try_refine_one(tri, curves, t)? {
                progressed = true;
            }
        }

        if !progressed {
            let still_bad = (0..tri.tris.len() as u32).any(|t| {
                let tr = &tri.tris[t as usize];
                tr.alive && tr.inside && is_bad(tri, t, size_max2)
            });
            if !still_bad {
                return Ok(());
            }
            stale_sweeps += 1;
            if stale_sweeps >= 3 {
                return Err(Error::MeshGeneration(
                    "refinement stalled before reaching the angle and size bounds".into(),
                ));
            }
        } else {
            stale_sweeps = 0;
        }
    }
    Err(Error::MeshGeneration(
        "refinement did not converge within the sweep limit".into(),
    ))
}

/// One refinement action for a bad triangle. Returns true if a point was
/// inserted or a constraint split.
fn try_refine_one(
    tri: &mut Triangulation,
    curves: &[ComponentCurve],
    t: u32,
) -> Result<bool> {
    let cc = tri.circumcenter(t);
    if let Some(cc) = cc {
        // if the circumcenter encroaches a constrained edge, split that edge
        // instead of inserting
        let hit = tri
            .constraints
            .iter()
            .map(|(&(a, b), &c)| (a, b, c))
            .find(|&(a, b, _)| diametral_contains(tri, a, b, cc));
        if let Some((a, b, c)) = hit {
            let p = curves[c as usize].split_point(tri.point(a), tri.point(b));
            tri.split_constraint(a, b, p)?;
            return Ok(true);
        }
        // only insert circumcenters that land strictly inside the domain
        let landing_inside = match tri.locate(cc) {
            Ok(Loc::Inside(tt)) => tri.tris[tt as usize].inside,
            Ok(Loc::OnEdge(tt, k)) => {
                let tr = tri.tris[tt as usize];
                let a = tr.v[k];
                let b = tr.v[(k + 1) % 3];
                !tri.is_constrained(a, b) && tr.inside
            }
            _ => false,
        };
        if landing_inside {
            let before = tri.pts.len();
            if tri.insert(cc).is_ok() && tri.pts.len() > before {
                return Ok(true);
            }
        }
    }
    // fallback: split the longest edge of the triangle
    let l2 = tri.edge_lengths2(t);
    let k = (0..3).max_by(|&i, &j| l2[i].partial_cmp(&l2[j]).unwrap()).unwrap();
    let tr = tri.tris[t as usize];
    let a = tr.v[k];
    let b = tr.v[(k + 1) % 3];
    if tri.is_constrained(a, b) {
        let comp = *tri
            .constraints
            .get(&(a, b))
            .or_else(|| tri.constraints.get(&(b, a)))
            .expect("constrained edge has a component");
        let p = curves[comp as usize].split_point(tri.point(a), tri.point(b));
        tri.split_constraint(a, b, p)?;
        return Ok(true);
    }
    let pa = tri.point(a);
    let pb = tri.point(b);
    let before = tri.pts.len();
    tri.insert([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0])?;
    Ok(tri.pts.len() > before)
}

/// Smart Laplacian smoothing: moves free interior vertices to the average of
/// their neighbours when that improves the worst incident angle and keeps
/// every incident edge within the size bound.
fn smooth(tri: &mut Triangulation, hf: f64, passes: usize) {
    let hard_max2 = (2.0 * hf).powi(2);
    for _ in 0..passes {
        // vertex -> incident alive triangles, rebuilt per pass
        let mut around: Vec<Vec<u32>> = vec![Vec::new(); tri.pts.len()];
        for (id, tr) in tri.tris.iter().enumerate() {
            if tr.alive {
                for &v in &tr.v {
                    around[v as usize].push(id as u32);
                }
            }
        }
        let mut constrained = vec![false; tri.pts.len()];
        for (&(a, b), _) in tri.constraints.iter() {
            constrained[a as usize] = true;
            constrained[b as usize] = true;
        }
        for v in 3..tri.pts.len() as u32 {
            if constrained[v as usize] || around[v as usize].is_empty() {
                continue;
            }
            if around[v as usize]
                .iter()
                .any(|&t| !tri.tris[t as usize].inside)
            {
                continue;
            }
            let mut nbrs: Vec<u32> = Vec::new();
            for &t in &around[v as usize] {
                for &w in &tri.tris[t as usize].v {
                    if w != v && !nbrs.contains(&w) {
                        nbrs.push(w);
                    }
                }
            }
            let mut target = [0.0f64; 2];
            for &w in &nbrs {
                let p = tri.point(w);
                target[0] += p[0];
                target[1] += p[1];
            }
            target[0] /= nbrs.len() as f64;
            target[1] /= nbrs.len() as f64;

            let quality = |tri: &Triangulation| -> (f64, f64) {
                let mut worst = f64::INFINITY;
                let mut longest = 0.0f64;
                for &t in &around[v as usize] {
                    worst = worst.min(tri.min_angle_deg(t));
                    let l2 = tri.edge_lengths2(t);
                    longest = longest.max(l2[0]).max(l2[1]).max(l2[2]);
                }
                (worst, longest)
            };
            let (old_angle, _) = quality(tri);
            let old_pos = tri.point(v);
            tri.move_vertex(v, target);
            let (new_angle, new_longest) = quality(tri);
            if new_angle <= old_angle || new_longest > hard_max2 {
                tri.move_vertex(v, old_pos);
            }
        }
        for _ in 0..8 {
            if tri.flip_pass() == 0 {
                break;
            }
        }
    }
}

fn extract<T: Real>(spec: &DomainSpec<T>, tri: &Triangulation, h: T) -> Result<Mesh<T>> {
    let hf = h.as_f64();
    let mut min_angle = f64::INFINITY;
    let mut max_edge2 = 0.0f64;
    let mut vmap: Vec<usize> = vec![usize::MAX; tri.pts.len()];
    let mut vertices: Vec<[T; 2]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (id, tr) in tri.tris.iter().enumerate() {
        if !tr.alive || !tr.inside {
            continue;
        }
        min_angle = min_angle.min(tri.min_angle_deg(id as u32));
        let l2 = tri.edge_lengths2(id as u32);
        max_edge2 = max_edge2.max(l2[0]).max(l2[1]).max(l2[2]);
        let mut t = [0usize; 3];
        for (k, &v) in tr.v.iter().enumerate() {
            if vmap[v as usize] == usize::MAX {
                vmap[v as usize] = vertices.len();
                let p = tri.point(v);
                vertices.push([T::of(p[0]), T::of(p[1])]);
            }
            t[k] = vmap[v as usize];
        }
        triangles.push(t);
    }
    if triangles.is_empty() {
        return Err(Error::MeshGeneration("no interior triangles produced".into()));
    }
    if min_angle < MIN_ANGLE_DEG - 1e-9 {
        return Err(Error::MeshGeneration(format!(
            "refinement finished with min angle {min_angle:.3} below {MIN_ANGLE_DEG}"
        )));
    }
    if max_edge2.sqrt() > 2.0 * hf * (1.0 + 1e-12) {
        return Err(Error::MeshGeneration(format!(
            "refinement finished with max edge {} above 2h = {}",
            max_edge2.sqrt(),
            2.0 * hf
        )));
    }

    let mut boundary_edges = Vec::new();
    for (comp, walk) in tri.constraint_loops()? {
        let n = walk.len();
        for i in 0..n {
            let a = walk[i];
            let b = walk[(i + 1) % n];
            let (ma, mb) = (vmap[a as usize], vmap[b as usize]);
            if ma == usize::MAX || mb == usize::MAX {
                return Err(Error::MeshGeneration(
                    "boundary vertex not referenced by any interior triangle".into(),
                ));
            }
            boundary_edges.push(BoundaryEdge {
                vertices: [ma, mb],
                component: comp as usize,
            });
        }
    }

    let mesh = Mesh {
        vertices,
        triangles,
        boundary_edges,
        hole_areas: spec.hole_volumes(),
        target_h: h,
        spec: Some(spec.clone()),
        id: next_mesh_id(),
    };
    mesh.validate()?;
    Ok(mesh)
}

//! Piecewise-linear finite elements: weighted Poisson solves with Dirichlet
//! data, floating boundary components with prescribed fluxes, harmonic
//! extension, and gradient norms.
//!
//! The floating solve ties every node of a hole boundary to a single unknown
//! constant and prescribes the lumped flux through that component by adding
//! the target to the tied equation's right-hand side. Reading fluxes back
//! from the assembled residual keeps them discretely exact, which is what
//! the rigidity functional needs on multiply connected domains.

pub mod sparse;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{integrate_field, Integrand, Mesh, ScalarField};
use crate::scalar::Real;
use sparse::{cg_jacobi, reverse_cuthill_mckee, BandedCholesky, CsrMatrix};

/// Relative residual for the conjugate gradient inner solver.
pub const CG_REL_TOL: f64 = 1e-10;

/// Boundary values for a Dirichlet solve, given per boundary component.
/// Component 0 is the outer boundary; holes are 1, 2, ...
pub struct DirichletData<'a, T> {
    default: Option<Box<dyn Fn([T; 2]) -> T + 'a>>,
    per_component: BTreeMap<usize, Box<dyn Fn([T; 2]) -> T + 'a>>,
}

impl<'a, T: Real> DirichletData<'a, T> {
    /// The same boundary function on every component.
    pub fn uniform(f: impl Fn([T; 2]) -> T + 'a) -> Self {
        Self {
            default: Some(Box::new(f)),
            per_component: BTreeMap::new(),
        }
    }

    /// Homogeneous data on every component.
    pub fn zero() -> Self {
        Self::uniform(|_| T::zero())
    }

    /// Starts with no data; add components with `with_component`.
    pub fn empty() -> Self {
        Self {
            default: None,
            per_component: BTreeMap::new(),
        }
    }

    /// Overrides (or supplies) the data on one component.
    pub fn with_component(mut self, component: usize, f: impl Fn([T; 2]) -> T + 'a) -> Self {
        self.per_component.insert(component, Box::new(f));
        self
    }

    fn covers(&self, component: usize) -> bool {
        self.default.is_some() || self.per_component.contains_key(&component)
    }

    fn value(&self, component: usize, x: [T; 2]) -> T {
        match self.per_component.get(&component) {
            Some(f) => f(x),
            None => (self.default.as_ref().expect("component covered"))(x),
        }
    }
}

/// Assembles the P1 stiffness matrix, optionally with one positive weight
/// per triangle.
pub(crate) fn assemble_stiffness<T: Real>(
    mesh: &Mesh<T>,
    weights: Option<&[T]>,
) -> Result<CsrMatrix<T>> {
    if let Some(w) = weights {
        if w.len() != mesh.triangle_count() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} triangles",
                w.len(),
                mesh.triangle_count()
            )));
        }
        for (k, &wk) in w.iter().enumerate() {
            if !(wk > T::zero()) || !wk.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weight {wk:e} on triangle {k} is not strictly positive"
                )));
            }
        }
    }
    let n = mesh.vertex_count();
    let mut trips = Vec::with_capacity(9 * mesh.triangle_count());
    for k in 0..mesh.triangle_count() {
        let idx = mesh.triangles[k];
        let g = hat_gradients(mesh, k);
        let area = mesh.tri_area(k);
        let w = weights.map_or(T::one(), |w| w[k]);
        let scale = w * area;
        for a in 0..3 {
            for b in 0..3 {
                let v = scale * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                trips.push((idx[a], idx[b], v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, &mut trips))
}

/// Gradients of the three hat functions on triangle k.
pub(crate) fn hat_gradients<T: Real>(mesh: &Mesh<T>, k: usize) -> [[T; 2]; 3] {
    let [a, b, c] = mesh.tri_vertices(k);
    let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let perp = |p: [T; 2], q: [T; 2]| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
    [perp(b, c), perp(c, a), perp(a, b)]
}

/// Consistent load vector for a constant right-hand-side density: each
/// triangle sends area/3 to each of its vertices, which is exact for P1.
pub(crate) fn load_vector<T: Real>(mesh: &Mesh<T>, rhs_density: T) -> Vec<T> {
    let mut f = vec![T::zero(); mesh.vertex_count()];
    let third = T::one() / T::of(3.0);
    for k in 0..mesh.triangle_count() {
        let share = rhs_density * mesh.tri_area(k) * third;
        for &v in &mesh.triangles[k] {
            f[v] = f[v] + share;
        }
    }
    f
}

#[derive(Clone, Copy)]
enum NodeDof<T> {
    Fixed(T),
    Unknown(usize),
}

/// Numbers the unknowns: free nodes first (ascending), then one unknown per
/// tied group. Nodes listed in `fixed` take the given value.
fn number_dofs<T: Real>(
    n: usize,
    fixed: &BTreeMap<usize, T>,
    ties: &[Vec<usize>],
) -> (Vec<NodeDof<T>>, usize) {
    let mut group_of = vec![None; n];
    for (g, group) in ties.iter().enumerate() {
        for &v in group {
            debug_assert!(group_of[v].is_none(), "tied groups must be disjoint");
            group_of[v] = Some(g);
        }
    }
    let mut dof = Vec::with_capacity(n);
    let mut free = 0usize;
    for i in 0..n {
        if let Some(&val) = fixed.get(&i) {
            dof.push(NodeDof::Fixed(val));
        } else if group_of[i].is_some() {
            dof.push(NodeDof::Unknown(0)); // patched below
        } else {
            dof.push(NodeDof::Unknown(free));
            free += 1;
        }
    }
    for i in 0..n {
        if let Some(g) = group_of[i] {
            if !matches!(dof[i], NodeDof::Fixed(_)) {
                dof[i] = NodeDof::Unknown(free + g);
            }
        }
    }
    (dof, free + ties.len())
}

/// Eliminates fixed values, collapses tied groups, adds `tie_rhs` to each
/// group equation, and solves by preconditioned conjugate gradients.
pub(crate) fn solve_constrained<T: Real>(
    mesh: &Mesh<T>,
    stiffness: &CsrMatrix<T>,
    load: &[T],
    fixed: &BTreeMap<usize, T>,
    ties: &[Vec<usize>],
    tie_rhs: &[T],
    rel_tol: T,
) -> Result<(ScalarField<T>, Vec<T>)> {
    let n = mesh.vertex_count();
    debug_assert_eq!(ties.len(), tie_rhs.len());
    let (dof, unknowns) = number_dofs(n, fixed, ties);
    let n_free = unknowns - ties.len();

    let mut values = vec![T::zero(); n];
    if unknowns == 0 {
        for i in 0..n {
            if let NodeDof::Fixed(v) = dof[i] {
                values[i] = v;
            }
        }
        return Ok((ScalarField::new(mesh, values)?, Vec::new()));
    }

    let mut trips = Vec::with_capacity(stiffness.nnz());
    let mut rhs = vec![T::zero(); unknowns];
    for i in 0..n {
        let NodeDof::Unknown(ui) = dof[i] else {
            continue;
        };
        rhs[ui] = rhs[ui] + load[i];
        for (j, v) in stiffness.row(i) {
            match dof[j] {
                NodeDof::Fixed(val) => rhs[ui] = rhs[ui] - v * val,
                NodeDof::Unknown(uj) => trips.push((ui, uj, v)),
            }
        }
    }
    for (g, &extra) in tie_rhs.iter().enumerate() {
        rhs[n_free + g] = rhs[n_free + g] + extra;
    }
    let reduced = CsrMatrix::from_triplets(unknowns, &mut trips);
    let cap = 2 + (T::of(50.0) * T::of_usize(unknowns).sqrt()).as_f64().ceil() as usize;
    let (x, _iters) = cg_jacobi(&reduced, &rhs, rel_tol, cap)?;

    for i in 0..n {
        values[i] = match dof[i] {
            NodeDof::Fixed(v) => v,
            NodeDof::Unknown(u) => x[u],
        };
    }
    let constants = (0..ties.len()).map(|g| x[n_free + g]).collect();
    Ok((ScalarField::new(mesh, values)?, constants))
}

/// Nodal Dirichlet values from per-component boundary functions, evaluated
/// at the exact vertex coordinates.
fn dirichlet_values<T: Real>(
    mesh: &Mesh<T>,
    data: &DirichletData<T>,
) -> Result<BTreeMap<usize, T>> {
    let comps = mesh.boundary_components();
    let mut fixed = BTreeMap::new();
    for (i, comp) in comps.iter().enumerate() {
        let Some(c) = comp else { continue };
        if !data.covers(*c) {
            return Err(Error::InvalidParameter(format!(
                "no Dirichlet data for boundary component {c}"
            )));
        }
        fixed.insert(i, data.value(*c, mesh.vertices[i]));
    }
    Ok(fixed)
}

/// Solves ∫ weight·∇u·∇φ = ∫ rhs_density·φ for all interior hats φ, with
/// the given boundary data. Weights are per triangle and strictly positive.
pub fn solve_weighted_poisson<T: Real>(
    mesh: &Mesh<T>,
    weights: &[T],
    rhs_density: T,
    dirichlet: &DirichletData<T>,
) -> Result<ScalarField<T>> {
    solve_weighted_poisson_tol(mesh, weights, rhs_density, dirichlet, T::of(CG_REL_TOL))
}

pub(crate) fn solve_weighted_poisson_tol<T: Real>(
    mesh: &Mesh<T>,
    weights: &[T],
    rhs_density: T,
    dirichlet: &DirichletData<T>,
    rel_tol: T,
) -> Result<ScalarField<T>> {
    let stiffness = assemble_stiffness(mesh, Some(weights))?;
    let load = load_vector(mesh, rhs_density);
    let fixed = dirichlet_values(mesh, dirichlet)?;
    let (field, _) = solve_constrained(mesh, &stiffness, &load, &fixed, &[], &[], rel_tol)?;
    Ok(field)
}

/// Unweighted convenience wrapper around `solve_weighted_poisson`.
pub fn solve_poisson<T: Real>(
    mesh: &Mesh<T>,
    rhs_density: T,
    dirichlet: &DirichletData<T>,
) -> Result<ScalarField<T>> {
    let weights = vec![T::one(); mesh.triangle_count()];
    solve_weighted_poisson(mesh, &weights, rhs_density, dirichlet)
}

/// Solves −Δv = rhs_density with v = 0 on the outer boundary and v equal to
/// an unknown constant on each hole boundary, fixed by prescribing the flux
/// through hole i as twice the hole's measure. Returns the field and the
/// hole constants. Without holes this is a plain Dirichlet solve.
pub fn floating_boundary_solve<T: Real>(
    mesh: &Mesh<T>,
    rhs_density: T,
) -> Result<(ScalarField<T>, Vec<T>)> {
    let targets: Vec<T> = mesh.hole_areas.iter().map(|&a| T::of(2.0) * a).collect();
    floating_boundary_solve_with_targets(mesh, rhs_density, &targets, T::of(CG_REL_TOL))
}

/// Floating solve with explicit flux targets, one per hole component.
pub(crate) fn floating_boundary_solve_with_targets<T: Real>(
    mesh: &Mesh<T>,
    rhs_density: T,
    targets: &[T],
    rel_tol: T,
) -> Result<(ScalarField<T>, Vec<T>)> {
    let n_comps = mesh.boundary_component_count();
    let holes = n_comps.saturating_sub(1);
    if targets.len() != holes {
        return Err(Error::InvalidParameter(format!(
            "{} flux targets for {holes} hole components",
            targets.len()
        )));
    }
    let comps = mesh.boundary_components();
    let mut fixed = BTreeMap::new();
    let mut ties: Vec<Vec<usize>> = vec![Vec::new(); holes];
    for (i, comp) in comps.iter().enumerate() {
        match comp {
            Some(0) => {
                fixed.insert(i, T::zero());
            }
            Some(c) => ties[c - 1].push(i),
            None => {}
        }
    }
    let stiffness = assemble_stiffness(mesh, None)?;
    let load = load_vector(mesh, rhs_density);
    let (field, constants) =
        solve_constrained(mesh, &stiffness, &load, &fixed, &ties, targets, rel_tol)?;

    // The tied equations enforce the targets exactly up to the linear solve;
    // re-read the fluxes from the residual as an internal consistency check.
    let fluxes = component_fluxes(mesh, &stiffness, &load, &field);
    let scale = T::one() + targets.iter().fold(T::zero(), |s, &t| s + t.abs());
    for (g, &target) in targets.iter().enumerate() {
        let got = fluxes[g + 1];
        if (got - target).abs() > T::of(1e-7) * scale {
            return Err(Error::SolverDiverged(format!(
                "flux through hole component {} is {:e}, target {:e}",
                g + 1,
                got.as_f64(),
                target.as_f64()
            )));
        }
    }
    Ok((field, constants))
}

/// Lumped outward flux through each boundary component, read from the
/// assembled residual: flux_c = Σ_{nodes a on c} (K u − f)_a. Discretely
/// exact for the computed solution.
pub(crate) fn component_fluxes<T: Real>(
    mesh: &Mesh<T>,
    stiffness: &CsrMatrix<T>,
    load: &[T],
    field: &ScalarField<T>,
) -> Vec<T> {
    let ku = stiffness.mul_vec_alloc(&field.values);
    let comps = mesh.boundary_components();
    let mut flux = vec![T::zero(); mesh.boundary_component_count()];
    for (i, comp) in comps.iter().enumerate() {
        if let Some(c) = comp {
            flux[*c] = flux[*c] + ku[i] - load[i];
        }
    }
    flux
}

/// L_p norm of the piecewise-constant gradient, p in [1, ∞].
pub fn grad_p_norm<T: Real>(mesh: &Mesh<T>, field: &ScalarField<T>, p: T) -> Result<T> {
    field.check(mesh)?;
    if !(p >= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "gradient norm requires p >= 1, got {p}"
        )));
    }
    if p.is_infinite() {
        let mut worst = T::zero();
        for k in 0..mesh.triangle_count() {
            let g = mesh.tri_gradient(k, &field.values);
            worst = worst.max((g[0] * g[0] + g[1] * g[1]).sqrt());
        }
        Ok(worst)
    } else {
        Ok(integrate_field(mesh, field, Integrand::GradNormPow(p))?.powf(T::one() / p))
    }
}

/// Discrete harmonic extension basis: one column per boundary node, each
/// the zero-load solve with value one at that node and zero at every other
/// boundary node. The interior block is factored once (banded Cholesky
/// after reverse Cuthill-McKee), so the basis costs one back-substitution
/// per boundary node.
pub(crate) struct HarmonicExtensionBasis<T> {
    pub boundary_nodes: Vec<usize>,
    pub columns: Vec<Vec<T>>,
}

pub(crate) fn harmonic_extension_basis<T: Real>(
    mesh: &Mesh<T>,
    stiffness: &CsrMatrix<T>,
) -> Result<HarmonicExtensionBasis<T>> {
    let n = mesh.vertex_count();
    let comps = mesh.boundary_components();
    let boundary_nodes: Vec<usize> = (0..n).filter(|&i| comps[i].is_some()).collect();
    let interior_nodes: Vec<usize> = (0..n).filter(|&i| comps[i].is_none()).collect();
    let mut interior_pos = vec![usize::MAX; n];
    for (k, &i) in interior_nodes.iter().enumerate() {
        interior_pos[i] = k;
    }

    let ni = interior_nodes.len();
    let mut trips = Vec::new();
    for (k, &i) in interior_nodes.iter().enumerate() {
        for (j, v) in stiffness.row(i) {
            if interior_pos[j] != usize::MAX {
                trips.push((k, interior_pos[j], v));
            }
        }
    }
    let kii = CsrMatrix::from_triplets(ni, &mut trips);
    let order = reverse_cuthill_mckee(&kii);
    let permuted = kii.permute_sym(&order);
    let chol = BandedCholesky::factor(&permuted)?;
    let mut pos_of_old = vec![0usize; ni];
    for (new, &old) in order.iter().enumerate() {
        pos_of_old[old] = new;
    }

    let mut columns = Vec::with_capacity(boundary_nodes.len());
    let mut rhs = vec![T::zero(); ni];
    for &b in &boundary_nodes {
        for v in rhs.iter_mut() {
            *v = T::zero();
        }
        // Interior equations read K_ii x = −K_ib e_b.
        for (j, v) in stiffness.row(b) {
            if interior_pos[j] != usize::MAX {
                rhs[pos_of_old[interior_pos[j]]] = -v;
            }
        }
        chol.solve_in_place(&mut rhs);
        let mut col = vec![T::zero(); n];
        col[b] = T::one();
        for (k, &i) in interior_nodes.iter().enumerate() {
            col[i] = rhs[pos_of_old[k]];
        }
        columns.push(col);
    }
    Ok(HarmonicExtensionBasis {
        boundary_nodes,
        columns,
    })
}

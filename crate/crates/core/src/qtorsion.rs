//! Nonlinear torsion solver: minimizes the regularized q-energy
//! J(u) = (1/q)·Σ_T area·(‖∇u‖² + ε²)^{q/2} − ∫u over fields vanishing on
//! the whole boundary, by damped Picard iteration. Each step solves a
//! weighted Poisson problem with weights (‖∇u‖² + ε²)^{(q−2)/2}; a step
//! that would raise the objective is redone with halved damping, so the
//! objective never increases across accepted iterations.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, hat_gradients, load_vector, solve_constrained, solve_weighted_poisson,
    DirichletData, CG_REL_TOL,
};
use crate::mesh::{boundary_distance_field, integrate_field, Integrand, Mesh, ScalarField};
use crate::scalar::Real;

/// Controls for the damped Picard iteration.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig<T> {
    /// Gradient regularization; keeps the weights finite at flat spots.
    pub epsilon: T,
    /// Stop when the relative objective decrease falls below this.
    pub tol: T,
    pub max_iter: usize,
    /// Under-relaxation factor in (0, 1]; halved on objective increase.
    pub damping: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::of(1e-6),
            tol: T::of(1e-10).max(T::epsilon() * T::of(100.0)),
            max_iter: 200,
            damping: T::one(),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || self.epsilon > T::of(1e-3) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1e-3], got {:e}",
                self.epsilon
            )));
        }
        if !(self.tol >= T::epsilon() * T::of(100.0)) {
            return Err(Error::InvalidParameter(format!(
                "tol must be at least 100 machine epsilons, got {:e}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// One accepted iteration of the solver.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub objective: T,
    pub damping: T,
    /// Relative objective decrease achieved by this iteration.
    pub rel_decrease: T,
}

/// Solver output: the best (last accepted) iterate, whether the stopping
/// tolerance was met before `max_iter`, and the iteration log.
#[derive(Clone, Debug)]
pub struct QTorsionSolution<T> {
    pub field: ScalarField<T>,
    pub converged: bool,
    pub log: Vec<IterationRecord<T>>,
}

/// Smallest damping carried from one accepted iteration to the next. The
/// line search inside an iteration may go below this; the carried value is
/// clamped so the step size recovers after a locally hard iteration.
const DAMPING_FLOOR: f64 = 1.0 / 64.0;

/// Largest exponent the meshed solver accepts; the weight dynamic range
/// stops being useful in double precision beyond this. Use
/// `w_infinity_field` for the limit problem.
pub const MAX_MESHED_Q: f64 = 32.0;

fn check_q<T: Real>(q: T) -> Result<()> {
    if !(q > T::one()) || q.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "torsion exponent must satisfy q > 1, got {q}"
        )));
    }
    if q.is_infinite() || q > T::of(MAX_MESHED_Q) {
        return Err(Error::InvalidParameter(format!(
            "meshed solves accept q <= {MAX_MESHED_Q}; use w_infinity_field for larger q"
        )));
    }
    Ok(())
}

/// Regularized per-triangle Picard weights (‖∇u‖² + ε²)^{(q−2)/2}. A
/// triangle with exactly zero gradient gets ε^{q−2}, which removes the
/// 0^negative singularity for q < 2.
fn irls_weights<T: Real>(mesh: &Mesh<T>, values: &[T], q: T, epsilon: T) -> Vec<T> {
    let expo = (q - T::of(2.0)) * T::of(0.5);
    (0..mesh.triangle_count())
        .map(|k| {
            let g = mesh.tri_gradient(k, values);
            (g[0] * g[0] + g[1] * g[1] + epsilon * epsilon).powf(expo)
        })
        .collect()
}

/// Regularized energy J(u); infinite or NaN values are the caller's signal
/// to abort.
fn energy<T: Real>(mesh: &Mesh<T>, field: &ScalarField<T>, q: T, epsilon: T) -> Result<T> {
    let mut bulk = T::zero();
    for k in 0..mesh.triangle_count() {
        let g = mesh.tri_gradient(k, &field.values);
        let s = g[0] * g[0] + g[1] * g[1] + epsilon * epsilon;
        bulk = bulk + mesh.tri_area(k) * s.powf(q * T::of(0.5));
    }
    let j = bulk / q - integrate_field(mesh, field, Integrand::Field)?;
    if !j.is_finite() {
        return Err(Error::IterationFailed(format!(
            "energy became non-finite ({j}) at q = {q}"
        )));
    }
    Ok(j)
}

/// Solves the q-torsion problem starting from the q = 2 solution (one
/// linear solve), which already has the right sign and boundary behavior.
/// Exponents above 4 are reached by doubling continuation (4, 8, ...): the
/// Picard weights of a near-converged neighbor exponent stay within a
/// workable dynamic range, whereas jumping from q = 2 straight to q ≥ 8
/// produces weights that underflow any useful precision near flat spots.
pub fn solve_q_torsion<T: Real>(
    mesh: &Mesh<T>,
    q: T,
    cfg: &SolverConfig<T>,
) -> Result<QTorsionSolution<T>> {
    check_q(q)?;
    cfg.validate()?;
    let ones = vec![T::one(); mesh.triangle_count()];
    let init = solve_weighted_poisson(mesh, &ones, T::one(), &DirichletData::zero())?;

    let mut stages = Vec::new();
    let mut s = T::of(4.0);
    while s < q {
        stages.push(s);
        s = s * T::of(2.0);
    }
    stages.push(q);

    let mut current = init;
    let mut log = Vec::new();
    let mut converged = true;
    for stage in stages {
        let sol = iterate(mesh, stage, cfg, current)?;
        current = sol.field;
        converged &= sol.converged;
        log = sol.log;
    }
    Ok(QTorsionSolution {
        field: current,
        converged,
        log,
    })
}

/// Same iteration from a caller-supplied start, which must vanish on the
/// boundary (the damped update preserves boundary values).
pub fn solve_q_torsion_with_init<T: Real>(
    mesh: &Mesh<T>,
    q: T,
    cfg: &SolverConfig<T>,
    init: &ScalarField<T>,
) -> Result<QTorsionSolution<T>> {
    check_q(q)?;
    cfg.validate()?;
    init.check(mesh)?;
    let comps = mesh.boundary_components();
    for (i, comp) in comps.iter().enumerate() {
        if comp.is_some() && init.values[i] != T::zero() {
            return Err(Error::InvalidParameter(format!(
                "initial guess must vanish on the boundary (node {i} has {:e})",
                init.values[i]
            )));
        }
    }
    iterate(mesh, q, cfg, init.clone())
}

fn iterate<T: Real>(
    mesh: &Mesh<T>,
    q: T,
    cfg: &SolverConfig<T>,
    init: ScalarField<T>,
) -> Result<QTorsionSolution<T>> {
    let mut u = init;
    let mut j_u = energy(mesh, &u, q, cfg.epsilon)?;
    let mut log = Vec::new();
    let floor = T::of(DAMPING_FLOOR);
    let armijo = T::of(1e-2);
    let mut converged = false;
    // Damping carried between iterations. Within one iteration the line
    // search may shrink far below the floor (the Picard direction is a
    // descent direction, so a small enough step always lowers the
    // objective); the floor only limits how small the carried value may
    // get, so a single hard iteration cannot poison all later ones.
    let mut d_carry = cfg.damping;

    let comps = mesh.boundary_components();
    let mut fixed = BTreeMap::new();
    for (i, comp) in comps.iter().enumerate() {
        if comp.is_some() {
            fixed.insert(i, T::zero());
        }
    }
    let load = load_vector(mesh, T::one());

    for it in 1..=cfg.max_iter {
        let weights = irls_weights(mesh, &u.values, q, cfg.epsilon);
        let stiffness = assemble_stiffness(mesh, Some(&weights))?;
        let (step, _) = solve_constrained(
            mesh,
            &stiffness,
            &load,
            &fixed,
            &[],
            &[],
            T::of(CG_REL_TOL),
        )?;

        // First-order decrease available along the step: with the weights
        // frozen, grad J(u) = K u − load, and the solve gives K step = load,
        // so −<grad J, step − u> = (step − u)ᵀ (load − K u) ≥ 0.
        let ku = stiffness.mul_vec_alloc(&u.values);
        let mut sigma = T::zero();
        for i in 0..mesh.vertex_count() {
            sigma = sigma + (step.values[i] - u.values[i]) * (load[i] - ku[i]);
        }
        sigma = sigma.max(T::zero());

        let mut d = d_carry;
        let mut halvings = 0usize;
        let (cand, j_cand, accepted) = loop {
            let blended: Vec<T> = u
                .values
                .iter()
                .zip(&step.values)
                .map(|(&a, &b)| (T::one() - d) * a + d * b)
                .collect();
            let cand = ScalarField::new(mesh, blended)?;
            let j_cand = energy(mesh, &cand, q, cfg.epsilon)?;
            // Sufficient decrease, not mere non-increase: close to the
            // minimizer an undamped step can reflect the iterate to the
            // far side with a near-zero objective change, which mere
            // non-increase would accept and then mistake for convergence.
            if j_cand <= j_u - armijo * d * sigma {
                break (cand, j_cand, true);
            }
            if halvings >= 120 {
                break (cand, j_cand, false);
            }
            d = d * T::of(0.5);
            halvings += 1;
        };

        if !accepted {
            // No sufficient decrease even at damping ~1e-36: the objective
            // cannot be lowered along the step in floating point. Honest
            // convergence only if the available decrease is at tolerance.
            converged = sigma <= T::of(16.0) * cfg.tol * j_u.abs();
            log.push(IterationRecord {
                iteration: it,
                objective: j_u,
                damping: d,
                rel_decrease: T::zero(),
            });
            break;
        }

        let rel_decrease = (j_u - j_cand) / j_u.abs().max(T::epsilon());
        let sigma_rel = sigma / j_u.abs().max(T::epsilon());
        u = cand;
        j_u = j_cand;
        log.push(IterationRecord {
            iteration: it,
            objective: j_u,
            damping: d,
            rel_decrease,
        });
        // Realized decrease alone can be small during damping recovery, so
        // the stop also requires the available first-order decrease to be
        // at tolerance.
        if rel_decrease < cfg.tol && sigma_rel <= T::of(16.0) * cfg.tol {
            converged = true;
            break;
        }
        d_carry = cfg.damping.min((d + d).max(floor));
    }

    Ok(QTorsionSolution {
        field: u,
        converged,
        log,
    })
}

/// The q → ∞ limit: the boundary distance function at the nodes.
pub fn w_infinity_field<T: Real>(mesh: &Mesh<T>) -> Result<ScalarField<T>> {
    boundary_distance_field(mesh)
}

/// Largest relative weak-form defect |∫‖∇w‖^{q−2}∇w·∇φ − ∫φ| / ∫φ over
/// `sample_count` interior hat functions φ drawn with the given seed. The
/// flux of a zero-gradient triangle is zero (the q > 1 limit).
pub fn weak_residual<T: Real>(
    mesh: &Mesh<T>,
    field: &ScalarField<T>,
    q: T,
    sample_count: usize,
    seed: u64,
) -> Result<T> {
    field.check(mesh)?;
    if !(q > T::one()) || q.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "weak residual requires finite q > 1, got {q}"
        )));
    }
    let comps = mesh.boundary_components();
    let interior: Vec<usize> = (0..mesh.vertex_count())
        .filter(|&i| comps[i].is_none())
        .collect();
    if interior.is_empty() {
        return Err(Error::InvalidParameter(
            "mesh has no interior nodes to test against".into(),
        ));
    }

    let mut tris_of = vec![Vec::new(); mesh.vertex_count()];
    for k in 0..mesh.triangle_count() {
        for &v in &mesh.triangles[k] {
            tris_of[v].push(k);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let third = T::one() / T::of(3.0);
    let mut worst = T::zero();
    for _ in 0..sample_count {
        let i = interior[rng.gen_range(0..interior.len())];
        let mut lhs = T::zero();
        let mut mass = T::zero();
        for &k in &tris_of[i] {
            let area = mesh.tri_area(k);
            let g = mesh.tri_gradient(k, &field.values);
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let local = mesh.triangles[k].iter().position(|&v| v == i).unwrap();
            let phi = hat_gradients(mesh, k)[local];
            if norm > T::zero() {
                lhs = lhs + area * norm.powf(q - T::of(2.0)) * (g[0] * phi[0] + g[1] * phi[1]);
            }
            mass = mass + area * third;
        }
        worst = worst.max((lhs - mass).abs() / mass);
    }
    Ok(worst)
}

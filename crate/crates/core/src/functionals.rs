//! Domain constants assembled from the solvers: the torsion functional by
//! three independent routes, torsional rigidity from the floating-boundary
//! potential, and the constrained gradient p-norm minimum together with the
//! bracket it forms around the harmonic-field infimum.
//!
//! The p-norm minimization runs over the affine family u* + E(b): u* is the
//! zero-boundary particular solution of Δu = N and E extends boundary nodal
//! values b harmonically. Every member satisfies the interior equations, so
//! each reweighting step reduces to a small dense system over b, factored
//! directly; the extension basis is built once per mesh.

use crate::error::{Error, Result};
use crate::fem::sparse::{BandedCholesky, CsrMatrix};
use crate::fem::{
    assemble_stiffness, floating_boundary_solve, grad_p_norm, harmonic_extension_basis,
    solve_poisson, solve_weighted_poisson, DirichletData, HarmonicExtensionBasis,
};
use crate::geometry::{dual_exponent, equivalent_ball_radius, qq_ball, DomainSpec};
use crate::mesh::{integrate_field, Integrand, Mesh, ScalarField};
use crate::qtorsion::{
    solve_q_torsion, w_infinity_field, weak_residual, IterationRecord, SolverConfig,
};
use crate::scalar::Real;

/// Ambient dimension of all meshed computations.
const N_DIM: f64 = 2.0;

/// Smallest damping carried between reweighting iterations (see qtorsion).
const DAMPING_FLOOR: f64 = 1.0 / 64.0;

/// Torsion functional values: from the field integral, from the gradient
/// q-norm, and from the position pairing. The routes coincide in exact
/// arithmetic; their spread measures discretization error.
#[derive(Clone, Debug)]
pub struct QqRoutes<T> {
    /// N (∫ w dm)^{1/p}.
    pub primary: T,
    /// N ‖∇w‖_{L_q}^{q−1}; absent at p = 1 where q is infinite.
    pub dual_route: Option<T>,
    /// −(∫ x·∇w dm) / ‖∇w‖_{L_q}.
    pub pairing_route: T,
    /// The torsion field behind the numbers (distance field at p = 1).
    pub field: ScalarField<T>,
    /// Nonlinear iterations spent (0 when no iteration runs: p = 1, p = 2).
    pub iterations: usize,
}

/// Computes the torsion functional for exponent p by all three routes.
/// The dual exponent q = p/(p−1) drives the field solve; p = 1 takes the
/// boundary distance field directly.
pub fn st_venant_qq<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<QqRoutes<T>> {
    if !(p >= T::one()) || p.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "p must be a finite real >= 1, got {p}"
        )));
    }
    let q = dual_exponent(p);
    let n = T::of(N_DIM);
    let (field, iterations) = if q.is_infinite() {
        (w_infinity_field(mesh)?, 0)
    } else {
        let sol = solve_q_torsion(mesh, q, cfg)?;
        if !sol.converged {
            return Err(Error::IterationFailed(format!(
                "torsion solve at q = {q} stopped after {} iterations above tolerance",
                sol.log.len()
            )));
        }
        let iters = sol.log.len();
        (sol.field, iters)
    };
    let mass = integrate_field(mesh, &field, Integrand::Field)?;
    if !(mass > T::zero()) {
        return Err(Error::SolverDiverged(format!(
            "torsion field has nonpositive integral {mass:e}"
        )));
    }
    let primary = n * mass.powf(T::one() / p);
    // The distance field satisfies |∇w| = 1 almost everywhere, so its sup
    // norm is 1. The per-triangle max of the interpolant overshoots on
    // triangles straddling the medial ridge by an amount refinement does
    // not remove, so the continuum value is the consistent denominator.
    let grad_q = if q.is_infinite() {
        T::one()
    } else {
        grad_p_norm(mesh, &field, q)?
    };
    let dual_route = if q.is_infinite() {
        None
    } else {
        Some(n * grad_q.powf(q - T::one()))
    };
    let x_dot_grad = integrate_field(mesh, &field, Integrand::XDotGrad)?;
    let pairing_route = -x_dot_grad / grad_q;
    Ok(QqRoutes {
        primary,
        dual_route,
        pairing_route,
        field,
        iterations,
    })
}

/// Torsional rigidity: the Dirichlet energy ∫‖∇v‖² dm of the potential v
/// solving −Δv = N with zero outer data, each hole boundary floating at an
/// unknown constant fixed by the flux prescription 2·m(hole).
pub fn torsional_rigidity<T: Real>(mesh: &Mesh<T>) -> Result<T> {
    let (v, _) = floating_boundary_solve(mesh, T::of(N_DIM))?;
    integrate_field(mesh, &v, Integrand::GradNormPow(T::of(2.0)))
}

/// The quadratic-case minimum √(N ∫u dm), with u the zero-boundary defect
/// of the half-square-norm: u = H − ‖x‖²/2, H its harmonic extension.
pub fn lambda_b2<T: Real>(mesh: &Mesh<T>) -> Result<T> {
    Ok(quadratic_minimizer(mesh)?.1)
}

/// Returns (u₀, λ) where u₀ = ‖x‖²/2 − H satisfies Δu₀ = N weakly with zero
/// boundary values and λ = √(N ∫(−u₀)); −u₀ is nonnegative by the maximum
/// principle, which the integral check enforces.
fn quadratic_minimizer<T: Real>(mesh: &Mesh<T>) -> Result<(ScalarField<T>, T)> {
    let half = T::of(0.5);
    let quad = move |x: [T; 2]| half * (x[0] * x[0] + x[1] * x[1]);
    let h_field = solve_poisson(mesh, T::zero(), &DirichletData::uniform(quad))?;
    let values: Vec<T> = (0..mesh.vertex_count())
        .map(|i| quad(mesh.vertices[i]) - h_field.values[i])
        .collect();
    let u0 = ScalarField::new(mesh, values)?;
    let integral = -integrate_field(mesh, &u0, Integrand::Field)?;
    if !(integral > T::zero()) {
        return Err(Error::SolverDiverged(format!(
            "harmonic defect integral is {integral:e}, expected positive"
        )));
    }
    Ok((u0, (T::of(N_DIM) * integral).sqrt()))
}

/// Output of the p-norm minimization.
#[derive(Clone, Debug)]
pub struct BpSolution<T> {
    /// ‖∇u₀‖_{L_p} at the minimizer.
    pub value: T,
    /// Position-pairing cross-check (∫ f₀·x dm)/‖f₀‖_{L_q} with
    /// f₀ = ‖∇u₀‖^{p−2}∇u₀; agrees with `value` up to discretization.
    pub pairing_route: T,
    pub field: ScalarField<T>,
    pub converged: bool,
    pub log: Vec<IterationRecord<T>>,
}

/// Minimum of ‖∇u‖_{L_p} over discrete fields satisfying the interior
/// equations of Δu = N. Errors if the reweighting loop fails to converge.
pub fn lambda_bp<T: Real>(mesh: &Mesh<T>, p: T, cfg: &SolverConfig<T>) -> Result<T> {
    let sol = lambda_bp_detailed(mesh, p, cfg, None)?;
    if !sol.converged {
        return Err(Error::IterationFailed(format!(
            "p-norm minimization at p = {p} stopped after {} iterations above tolerance",
            sol.log.len()
        )));
    }
    Ok(sol.value)
}

/// Full-detail variant: optional initial field (its boundary trace seeds the
/// minimization; interior values are ignored), iteration log, and the
/// pairing cross-check. p = 2 short-circuits to the closed-form minimizer,
/// which the reweighting loop would reproduce after one step.
pub fn lambda_bp_detailed<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    cfg: &SolverConfig<T>,
    init: Option<&ScalarField<T>>,
) -> Result<BpSolution<T>> {
    if !(p >= T::one()) || p.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "p must be a finite real >= 1, got {p}"
        )));
    }
    cfg.validate()?;

    if p == T::of(2.0) {
        let (u0, value) = quadratic_minimizer(mesh)?;
        let pairing_route = bp_pairing(mesh, &u0, p)?;
        return Ok(BpSolution {
            value,
            pairing_route,
            field: u0,
            converged: true,
            log: Vec::new(),
        });
    }

    let n = T::of(N_DIM);
    // Degenerate weights at p = 1 get a diameter-scaled smoothing instead
    // of the configured epsilon.
    let eps = if p == T::one() {
        T::of(1e-5) * bounding_box_diameter(mesh)
    } else {
        cfg.epsilon
    };

    let ones = vec![T::one(); mesh.triangle_count()];
    let u_star = solve_weighted_poisson(mesh, &ones, -n, &DirichletData::zero())?;
    let unweighted = assemble_stiffness(mesh, None)?;
    let basis = harmonic_extension_basis(mesh, &unweighted)?;
    let m = basis.boundary_nodes.len();
    if m < 2 {
        return Err(Error::MeshGeneration(format!(
            "{m} boundary nodes cannot carry the boundary minimization"
        )));
    }

    let mut b = vec![T::zero(); m];
    if let Some(f) = init {
        f.check(mesh)?;
        for (j, &node) in basis.boundary_nodes.iter().enumerate() {
            b[j] = f.values[node];
        }
    }
    let mut u = extend(mesh, &u_star, &basis, &b)?;
    let mut phi = smoothed_p_energy(mesh, &u, p, eps)?;
    let mut log = Vec::new();
    let mut converged = false;
    let floor = T::of(DAMPING_FLOOR);
    let armijo = T::of(1e-2);
    let mut d_carry = cfg.damping;

    for it in 1..=cfg.max_iter {
        let weights = bp_weights(mesh, &u.values, p, eps);
        let kw = assemble_stiffness(mesh, Some(&weights))?;
        let b_solve = reduced_minimizer(&kw, &basis, &u_star.values)?;

        // First-order decrease of the smoothed energy along the step:
        // dΦ·δ = p·δᵀK_w u, and the reduced solve zeroes XᵀK_w at the
        // candidate, so the slope is −p·ΔuᵀK_wΔu.
        let db: Vec<T> = b_solve.iter().zip(&b).map(|(&x, &y)| x - y).collect();
        let mut delta_u = vec![T::zero(); mesh.vertex_count()];
        for (j, col) in basis.columns.iter().enumerate() {
            if db[j] != T::zero() {
                for (a, &c) in col.iter().enumerate() {
                    delta_u[a] = delta_u[a] + db[j] * c;
                }
            }
        }
        let k_delta = kw.mul_vec_alloc(&delta_u);
        let mut sigma = T::zero();
        for (du, kd) in delta_u.iter().zip(&k_delta) {
            sigma = sigma + *du * *kd;
        }
        sigma = (sigma * p).max(T::zero());

        let mut d = d_carry;
        let mut halvings = 0usize;
        let (cand_b, cand_u, phi_cand, accepted) = loop {
            let bc: Vec<T> = b
                .iter()
                .zip(&b_solve)
                .map(|(&old, &new)| (T::one() - d) * old + d * new)
                .collect();
            let uc = extend(mesh, &u_star, &basis, &bc)?;
            let pc = smoothed_p_energy(mesh, &uc, p, eps)?;
            if pc <= phi - armijo * d * sigma {
                break (bc, uc, pc, true);
            }
            if halvings >= 120 {
                break (bc, uc, pc, false);
            }
            d = d * T::of(0.5);
            halvings += 1;
        };
        let _ = &cand_b;

        if !accepted {
            converged = sigma <= T::of(16.0) * cfg.tol * phi.abs();
            log.push(IterationRecord {
                iteration: it,
                objective: phi,
                damping: d,
                rel_decrease: T::zero(),
            });
            break;
        }

        let rel_decrease = (phi - phi_cand) / phi.abs().max(T::epsilon());
        let sigma_rel = sigma / phi.abs().max(T::epsilon());
        b = cand_b;
        u = cand_u;
        phi = phi_cand;
        log.push(IterationRecord {
            iteration: it,
            objective: phi,
            damping: d,
            rel_decrease,
        });
        if rel_decrease < cfg.tol && sigma_rel <= T::of(16.0) * cfg.tol {
            converged = true;
            break;
        }
        d_carry = cfg.damping.min((d + d).max(floor));
    }

    let value = grad_p_norm(mesh, &u, p)?;
    let pairing_route = bp_pairing(mesh, &u, p)?;
    Ok(BpSolution {
        value,
        pairing_route,
        field: u,
        converged,
        log,
    })
}

/// The rigorous two-sided enclosure of the harmonic-field infimum:
/// (torsion functional, p-norm minimum). The sides coincide at p = 2.
pub fn lambda_ap_bracket<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<(T, T)> {
    let qq = st_venant_qq(mesh, p, cfg)?;
    let upper = lambda_bp(mesh, p, cfg)?;
    Ok((qq.primary, upper))
}

fn bounding_box_diameter<T: Real>(mesh: &Mesh<T>) -> T {
    let mut lo = [T::infinity(), T::infinity()];
    let mut hi = [-T::infinity(), -T::infinity()];
    for v in &mesh.vertices {
        for a in 0..2 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    let dx = hi[0] - lo[0];
    let dy = hi[1] - lo[1];
    (dx * dx + dy * dy).sqrt()
}

fn extend<T: Real>(
    mesh: &Mesh<T>,
    u_star: &ScalarField<T>,
    basis: &HarmonicExtensionBasis<T>,
    b: &[T],
) -> Result<ScalarField<T>> {
    let mut values = u_star.values.clone();
    for (j, col) in basis.columns.iter().enumerate() {
        if b[j] != T::zero() {
            for (a, &c) in col.iter().enumerate() {
                values[a] = values[a] + b[j] * c;
            }
        }
    }
    ScalarField::new(mesh, values)
}

fn bp_weights<T: Real>(mesh: &Mesh<T>, values: &[T], p: T, eps: T) -> Vec<T> {
    let half_pm2 = (p - T::of(2.0)) * T::of(0.5);
    (0..mesh.triangle_count())
        .map(|k| {
            let g = mesh.tri_gradient(k, values);
            (g[0] * g[0] + g[1] * g[1] + eps * eps).powf(half_pm2)
        })
        .collect()
}

/// Σ_T area·(‖∇u‖² + ε²)^{p/2}: the smoothed p-energy the reweighting
/// descends on.
fn smoothed_p_energy<T: Real>(mesh: &Mesh<T>, u: &ScalarField<T>, p: T, eps: T) -> Result<T> {
    let half_p = p * T::of(0.5);
    let mut acc = T::zero();
    for k in 0..mesh.triangle_count() {
        let g = mesh.tri_gradient(k, &u.values);
        acc = acc + mesh.tri_area(k) * (g[0] * g[0] + g[1] * g[1] + eps * eps).powf(half_p);
    }
    if !acc.is_finite() {
        return Err(Error::IterationFailed(format!(
            "p-energy became non-finite ({acc:e})"
        )));
    }
    Ok(acc)
}

/// Minimizes the weighted quadratic energy over boundary values: solves
/// (XᵀK_wX) b = −XᵀK_w u* with the first boundary value pinned to zero
/// (the energy only sees b up to an additive constant).
fn reduced_minimizer<T: Real>(
    kw: &CsrMatrix<T>,
    basis: &HarmonicExtensionBasis<T>,
    u_star: &[T],
) -> Result<Vec<T>> {
    let m = basis.columns.len();
    let y: Vec<Vec<T>> = basis.columns.iter().map(|c| kw.mul_vec_alloc(c)).collect();
    let k_ustar = kw.mul_vec_alloc(u_star);

    let mut s = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut acc = T::zero();
            for (xa, ya) in basis.columns[i].iter().zip(&y[j]) {
                acc = acc + *xa * *ya;
            }
            s[i * m + j] = acc;
            s[j * m + i] = acc;
        }
    }
    let mut rhs = vec![T::zero(); m];
    for i in 0..m {
        let mut acc = T::zero();
        for (xa, ka) in basis.columns[i].iter().zip(&k_ustar) {
            acc = acc + *xa * *ka;
        }
        rhs[i] = -acc;
    }

    let red = m - 1;
    let mut trips = Vec::with_capacity(red * red);
    for i in 0..red {
        for j in 0..red {
            trips.push((i, j, s[(i + 1) * m + (j + 1)]));
        }
    }
    let dense = CsrMatrix::from_triplets(red, &mut trips);
    let chol = BandedCholesky::factor(&dense)?;
    let solved = chol.solve(&rhs[1..]);
    let mut b = vec![T::zero(); m];
    b[1..].copy_from_slice(&solved);
    Ok(b)
}

/// (∫ f₀·x dm)/‖f₀‖_{L_q} with f₀ = ‖∇u‖^{p−2}∇u. The denominator collapses
/// to ‖∇u‖_p^{p−1} since (p−1)q = p; zero-gradient triangles carry no flux.
fn bp_pairing<T: Real>(mesh: &Mesh<T>, field: &ScalarField<T>, p: T) -> Result<T> {
    let mut acc = T::zero();
    for k in 0..mesh.triangle_count() {
        let g = mesh.tri_gradient(k, &field.values);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if norm == T::zero() {
            continue;
        }
        let c = mesh.centroid(k);
        acc = acc
            + mesh.tri_area(k) * norm.powf(p - T::of(2.0)) * (g[0] * c[0] + g[1] * c[1]);
    }
    let nrm = grad_p_norm(mesh, field, p)?;
    Ok(acc / nrm.powf(p - T::one()))
}

/// One (domain, p, h) computation: all constants, the bracket, the
/// reference ball comparison, and solver metadata.
#[derive(Clone, Debug)]
pub struct ConstantsReport<T> {
    pub domain: String,
    pub p: T,
    /// Dual exponent; infinite at p = 1.
    pub q: T,
    pub qq: T,
    pub qq_dual_route: Option<T>,
    pub qq_pairing_route: T,
    pub rho: T,
    pub sqrt_rho: T,
    pub lambda_b2: T,
    pub lambda_bp: T,
    pub lambda_ap_bracket: (T, T),
    /// Radius of the ball with the meshed domain's measure.
    pub r_omega: T,
    pub qq_ball_r_omega: T,
    pub mesh_h: T,
    /// Richardson guard |value(h) − value(2h)| / (2^1.5 − 1) on the primary
    /// torsion route.
    pub estimated_error: T,
    pub metadata: SolverMetadata<T>,
}

/// Iteration counts and residual diagnostics backing a report.
#[derive(Clone, Debug)]
pub struct SolverMetadata<T> {
    pub torsion_iterations: usize,
    /// Relative weak-form defect of the torsion field (finite q only).
    pub torsion_residual: Option<T>,
    pub bp_iterations: usize,
    pub bp_pairing_check: T,
    pub residual_samples: usize,
    pub residual_seed: u64,
}

/// Number of interior hat functions sampled for the residual diagnostic.
pub const RESIDUAL_SAMPLES: usize = 50;

/// Meshes the domain at h and 2h, computes every constant on the fine mesh,
/// and derives the error estimate from the coarse/fine torsion values.
pub fn constants_report<T: Real>(
    domain: &DomainSpec<T>,
    p: T,
    h: T,
    cfg: &SolverConfig<T>,
    seed: u64,
) -> Result<ConstantsReport<T>> {
    let mesh = Mesh::generate(domain, h)?;
    let coarse = Mesh::generate(domain, h + h)?;
    let fine = st_venant_qq(&mesh, p, cfg)?;
    let coarse_qq = st_venant_qq(&coarse, p, cfg)?;
    let richardson = T::of(2.0).powf(T::of(1.5)) - T::one();
    let estimated_error = (fine.primary - coarse_qq.primary).abs() / richardson;

    let rho = torsional_rigidity(&mesh)?;
    let lb2 = lambda_b2(&mesh)?;
    let bp = lambda_bp_detailed(&mesh, p, cfg, None)?;
    if !bp.converged {
        return Err(Error::IterationFailed(format!(
            "p-norm minimization at p = {p} stopped after {} iterations above tolerance",
            bp.log.len()
        )));
    }

    let q = dual_exponent(p);
    let torsion_residual = if q.is_finite() {
        Some(weak_residual(&mesh, &fine.field, q, RESIDUAL_SAMPLES, seed)?)
    } else {
        None
    };
    let r_omega = equivalent_ball_radius(mesh.area(), 2)?;
    let qq_ball_r_omega = qq_ball(2, p, r_omega)?;

    Ok(ConstantsReport {
        domain: domain.identifier(),
        p,
        q,
        qq: fine.primary,
        qq_dual_route: fine.dual_route,
        qq_pairing_route: fine.pairing_route,
        rho,
        sqrt_rho: rho.sqrt(),
        lambda_b2: lb2,
        lambda_bp: bp.value,
        lambda_ap_bracket: (fine.primary, bp.value),
        r_omega,
        qq_ball_r_omega,
        mesh_h: h,
        estimated_error,
        metadata: SolverMetadata {
            torsion_iterations: fine.iterations,
            torsion_residual,
            bp_iterations: bp.log.len(),
            bp_pairing_check: bp.pairing_route,
            residual_samples: RESIDUAL_SAMPLES,
            residual_seed: seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{radial_solve, RadialProblem};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn disk(h: f64) -> Mesh<f64> {
        Mesh::generate(&DomainSpec::disk([0.0, 0.0], 1.0).unwrap(), h).unwrap()
    }

    fn square(h: f64) -> Mesh<f64> {
        Mesh::generate(&DomainSpec::unit_square(), h).unwrap()
    }

    fn annulus(r: f64, big_r: f64, h: f64) -> Mesh<f64> {
        Mesh::generate(&DomainSpec::annulus([0.0, 0.0], r, big_r).unwrap(), h).unwrap()
    }

    #[test]
    fn disk_routes_match_closed_form_at_p2() {
        let m = disk(0.05);
        let cfg = SolverConfig::default();
        let routes = st_venant_qq(&m, 2.0, &cfg).unwrap();
        let exact = (PI / 2.0).sqrt();
        assert_relative_eq!(routes.primary, exact, max_relative = 1e-2);
        assert_relative_eq!(routes.dual_route.unwrap(), exact, max_relative = 1e-2);
        assert_relative_eq!(routes.pairing_route, exact, max_relative = 1e-2);
    }

    #[test]
    fn annulus_p1_value_matches_closed_form() {
        let m = annulus(1.0, 3.0, 0.05);
        let routes = st_venant_qq(&m, 1.0, &SolverConfig::default()).unwrap();
        assert!(routes.dual_route.is_none());
        assert_relative_eq!(routes.primary, 8.0 * PI, max_relative = 1e-2);
        assert_relative_eq!(routes.pairing_route, 8.0 * PI, max_relative = 1e-2);
        // With unit denominator the pairing integral reduces to the field
        // integral through the divergence theorem, exactly on the mesh.
        assert_relative_eq!(routes.pairing_route, routes.primary, max_relative = 1e-12);
        assert_eq!(routes.iterations, 0);
    }

    #[test]
    fn square_p2_value_matches_series_oracle() {
        // Double-sine series for ∫w₂ over the unit square, frozen before
        // the solvers existed: 0.035144253737082962.
        let m = square(0.02);
        let routes = st_venant_qq(&m, 2.0, &SolverConfig::default()).unwrap();
        assert_relative_eq!(
            routes.primary,
            0.37493601447224545,
            max_relative = 3e-3
        );
    }

    #[test]
    fn rigidity_matches_oracles_on_three_geometries() {
        let m = disk(0.05);
        assert_relative_eq!(
            torsional_rigidity(&m).unwrap(),
            PI / 2.0,
            max_relative = 1e-2
        );

        let m = square(0.05);
        // 4·∫w₂ from the same frozen series constant.
        assert_relative_eq!(
            torsional_rigidity(&m).unwrap(),
            0.14057701494833185,
            max_relative = 1e-2
        );

        let oracle = radial_solve(2, 2.0, 1.0, 2.0, RadialProblem::RigidityWithFlux)
            .unwrap()
            .dirichlet_energy()
            .unwrap();
        assert_relative_eq!(oracle, 15.0 * PI / 2.0, epsilon = 1e-9);
        let m = annulus(1.0, 2.0, 0.05);
        assert_relative_eq!(torsional_rigidity(&m).unwrap(), oracle, max_relative = 1e-2);
    }

    #[test]
    fn quadratic_minimum_on_disk_and_square() {
        let m = disk(0.05);
        assert_relative_eq!(
            lambda_b2(&m).unwrap(),
            (PI / 2.0).sqrt(),
            max_relative = 1e-2
        );

        // Two independent pipelines for the same constant.
        let m = square(0.05);
        let lb2 = lambda_b2(&m).unwrap();
        let q2 = st_venant_qq(&m, 2.0, &SolverConfig::default())
            .unwrap()
            .primary;
        assert_relative_eq!(lb2, q2, max_relative = 5e-3);
    }

    #[test]
    fn annulus_quadratic_minimum_sits_below_sqrt_rigidity() {
        // The rigidity potential decomposes as the minimizer plus an
        // orthogonal remainder, ρ = λ² + ∫‖∇z‖², so √ρ dominates λ on any
        // domain with a hole while the torsion identity λ = Q₂ still holds.
        let m = annulus(1.0, 2.0, 0.05);
        let lb2 = lambda_b2(&m).unwrap();
        let q2 = st_venant_qq(&m, 2.0, &SolverConfig::default())
            .unwrap()
            .primary;
        assert_relative_eq!(lb2, q2, max_relative = 5e-3);
        let rho = torsional_rigidity(&m).unwrap();
        assert!(
            lb2 < rho.sqrt(),
            "λ = {lb2} should sit below √ρ = {}",
            rho.sqrt()
        );
    }

    #[test]
    fn p2_minimization_short_circuits_to_the_quadratic_case() {
        let m = square(0.08);
        let sol = lambda_bp_detailed(&m, 2.0, &SolverConfig::default(), None).unwrap();
        let direct = lambda_b2(&m).unwrap();
        assert_eq!(sol.value, direct);
        assert!(sol.converged);
        assert!(sol.log.is_empty());
        assert_relative_eq!(sol.pairing_route, direct, max_relative = 1e-2);
    }

    #[test]
    fn ball_minimum_matches_the_torsion_value_at_p15() {
        let m = disk(0.05);
        let cfg = SolverConfig::default();
        let sol = lambda_bp_detailed(&m, 1.5, &cfg, None).unwrap();
        assert!(sol.converged);
        let exact = qq_ball(2, 1.5, 1.0).unwrap();
        assert_relative_eq!(exact, 1.4770931451073131, epsilon = 1e-12);
        assert_relative_eq!(sol.value, exact, max_relative = 1e-2);
        assert_relative_eq!(sol.pairing_route, sol.value, max_relative = 2e-2);
    }

    #[test]
    fn square_minimum_respects_the_equal_measure_ball_bound() {
        let m = square(0.05);
        let cfg = SolverConfig::default();
        let val = lambda_bp(&m, 1.5, &cfg).unwrap();
        let bound = qq_ball(2, 1.5, 1.0 / PI.sqrt()).unwrap();
        assert!(val < bound, "{val} should stay below {bound}");
        let (lower, upper) = lambda_ap_bracket(&m, 1.5, &cfg).unwrap();
        assert!(lower <= upper + 1e-12, "bracket inverted: {lower} > {upper}");
    }

    #[test]
    fn minimization_objective_is_monotone_and_p1_runs() {
        let m = square(0.08);
        let cfg = SolverConfig::default();
        for p in [1.0, 1.5, 3.0] {
            let sol = lambda_bp_detailed(&m, p, &cfg, None).unwrap();
            assert!(sol.converged, "p = {p} failed to converge");
            for pair in sol.log.windows(2) {
                assert!(
                    pair[1].objective <= pair[0].objective,
                    "objective rose at p = {p}"
                );
            }
            assert!(sol.value > 0.0);
        }
    }

    #[test]
    fn two_initializations_agree_at_p15() {
        // Same flatness arithmetic as the torsion solver: objectives agree
        // to the stopping resolution, gradients to its square root.
        let m = disk(0.1);
        let cfg = SolverConfig {
            tol: 1e-12,
            ..SolverConfig::default()
        };
        let a = lambda_bp_detailed(&m, 1.5, &cfg, None).unwrap();
        let quad = ScalarField::from_fn(&m, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let b = lambda_bp_detailed(&m, 1.5, &cfg, Some(&quad)).unwrap();
        assert!(a.converged && b.converged);
        let ja = a.log.last().unwrap().objective;
        let jb = b.log.last().unwrap().objective;
        assert!(
            (ja - jb).abs() <= 10.0 * cfg.tol * ja.abs(),
            "objectives {ja:e} vs {jb:e}"
        );
        let mut worst = 0.0f64;
        for k in 0..m.triangle_count() {
            let ga = m.tri_gradient(k, &a.field.values);
            let gb = m.tri_gradient(k, &b.field.values);
            let dx = ga[0] - gb[0];
            let dy = ga[1] - gb[1];
            worst = worst.max((dx * dx + dy * dy).sqrt());
        }
        assert!(worst <= cfg.tol.sqrt(), "per-triangle gradient gap {worst:e}");
    }

    #[test]
    fn torsion_value_scales_with_the_domain() {
        // Side-s square against the unit square: the functional carries
        // s^{1+N/p}, checked here at p = 1.5 with matching resolution.
        let p = 1.5;
        let cfg = SolverConfig::default();
        let unit = st_venant_qq(&square(0.08), p, &cfg).unwrap().primary;
        let big_spec =
            DomainSpec::rectangle([0.0, 0.0], [2.0, 2.0]).unwrap();
        let big = st_venant_qq(&Mesh::generate(&big_spec, 0.16).unwrap(), p, &cfg)
            .unwrap()
            .primary;
        let factor = 2.0f64.powf(1.0 + 2.0 / p);
        assert_relative_eq!(big / unit, factor, max_relative = 1e-2);
    }

    #[test]
    fn square_value_increases_with_p_and_stays_below_the_ball() {
        let cfg = SolverConfig::default();
        let m = square(0.08);
        // Measure is exactly one, so the normalized monotone quantity is
        // the value itself.
        let q1 = st_venant_qq(&m, 1.0, &cfg).unwrap().primary;
        let q2 = st_venant_qq(&m, 2.0, &cfg).unwrap().primary;
        let q4 = st_venant_qq(&m, 4.0, &cfg).unwrap().primary;
        assert!(q1 <= q2 * (1.0 + 1e-3) && q2 <= q4 * (1.0 + 1e-3));

        let r = 1.0 / PI.sqrt();
        for p in [1.0, 1.5, 2.0] {
            let val = st_venant_qq(&m, p, &cfg).unwrap().primary;
            let ball = qq_ball(2, p, r).unwrap();
            assert!(val < ball, "p = {p}: {val} should stay below {ball}");
        }
    }

    #[test]
    fn report_fields_are_coherent() {
        let domain = DomainSpec::<f64>::unit_square();
        let cfg = SolverConfig::default();
        let rep = constants_report(&domain, 2.0, 0.1, &cfg, 42).unwrap();
        assert_eq!(rep.q, 2.0);
        assert_eq!(rep.lambda_ap_bracket, (rep.qq, rep.lambda_bp));
        assert_relative_eq!(rep.sqrt_rho, rep.rho.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(rep.r_omega, 1.0 / PI.sqrt(), max_relative = 1e-9);
        assert!(rep.estimated_error > 0.0);
        assert!(rep.metadata.torsion_residual.unwrap() <= 1e-4);
        assert_eq!(rep.metadata.residual_samples, RESIDUAL_SAMPLES);

        let rep1 = constants_report(&domain, 1.0, 0.1, &cfg, 42).unwrap();
        assert!(rep1.q.is_infinite());
        assert!(rep1.qq_dual_route.is_none());
        assert!(rep1.metadata.torsion_residual.is_none());
    }
}

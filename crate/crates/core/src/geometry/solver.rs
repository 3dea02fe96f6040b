use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use super::canonical::{canonicalize, CanonicalInstance, Degeneracy};
use super::{payoff_unchecked, EngagementInstance, GeometryError, Point3};
use crate::numeric::golden_section_max;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_GRID_N: usize = 2048;

const DAMPING: f64 = 0.5;
const BETA_INIT: f64 = FRAC_PI_4;
const Z_FLOOR: f64 = -1e-12;
const BOUNDARY_SAMPLES: usize = 720;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    FixedPoint,
    Grid,
    ClosedForm,
    /// The in-plane optimum fell below the ground plane; the point was re-optimized over the
    /// feasible part of the dome.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachSolution {
    /// Angle at the origin between the defender direction and the breach point.
    pub theta_star: f64,
    /// Angle between the attacker's approach line and the tangent at the breach point.
    pub beta_star: f64,
    pub breach_world: Point3,
    pub tau_attacker: f64,
    pub tau_defender: f64,
    pub payoff: f64,
    /// Largest violation of the two stationarity equations at `(theta_star, beta_star)`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True when the ground-plane constraint was active.
    pub clamped: bool,
    pub method: SolveMethod,
}

fn defender_distance(c: &CanonicalInstance, theta: f64) -> f64 {
    let r = c.radius;
    (c.a * c.a + r * r - 2.0 * c.a * r * theta.cos()).max(0.0).sqrt()
}

fn attacker_distance(c: &CanonicalInstance, theta: f64) -> f64 {
    let r = c.radius;
    let ra = c.r_attacker;
    (ra * ra + r * r - 2.0 * ra * r * (theta - c.phi_attacker).cos()).max(0.0).sqrt()
}

/// θ-update: `φ' − β + acos(R cos β / r_A)`.
fn theta_map(c: &CanonicalInstance, beta: f64) -> f64 {
    c.phi_attacker - beta + (c.radius * beta.cos() / c.r_attacker).clamp(-1.0, 1.0).acos()
}

/// Cosine of the β-update: `a v sin θ / τ_D(θ)`.
fn beta_cosine(c: &CanonicalInstance, theta: f64) -> f64 {
    let td = defender_distance(c, theta);
    if td <= 0.0 {
        return 0.0;
    }
    c.a * c.v * theta.sin() / td
}

/// Largest absolute violation of the stationarity system at `(theta, beta)`.
///
/// The β equation is checked in cosine form so that a clipped `acos` argument shows up as a
/// violation instead of a spurious fixed point.
pub fn fixed_point_residual(c: &CanonicalInstance, theta: f64, beta: f64) -> f64 {
    let ratio = c.radius * beta.cos() / c.r_attacker;
    let overflow = (ratio.abs() - 1.0).max(0.0);
    let r_theta = (theta - theta_map(c, beta)).abs() + overflow;
    let r_beta = (beta.cos() - beta_cosine(c, theta)).abs();
    r_theta.max(r_beta)
}

struct Iterate {
    theta: f64,
    beta: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn damped_iteration(c: &CanonicalInstance, tol: f64, max_iter: usize) -> Iterate {
    let mut theta = c.phi_attacker;
    let mut beta = BETA_INIT;
    let mut best = Iterate {
        theta,
        beta,
        residual: fixed_point_residual(c, theta, beta),
        iterations: 0,
        converged: false,
    };
    for it in 1..=max_iter {
        theta = (1.0 - DAMPING) * theta + DAMPING * theta_map(c, beta);
        beta = beta_cosine(c, theta).clamp(-1.0, 1.0).acos();
        let residual = fixed_point_residual(c, theta, beta);
        if !residual.is_finite() {
            break;
        }
        if residual <= best.residual {
            best = Iterate { theta, beta, residual, iterations: it, converged: false };
        }
        if residual < tol {
            return Iterate { theta, beta, residual, iterations: it, converged: true };
        }
    }
    best.iterations = max_iter;
    best
}

/// Reported θ for a world-frame breach point: the angle between it and the canonical x-axis.
fn theta_of(c: &CanonicalInstance, breach: Point3) -> f64 {
    let e1 = c.rotation.column(0);
    (breach.dot(e1) / c.radius).clamp(-1.0, 1.0).acos()
}

fn beta_of(c: &CanonicalInstance, theta: f64) -> f64 {
    beta_cosine(c, theta).clamp(-1.0, 1.0).acos()
}

fn solution_at(
    inst: &EngagementInstance,
    c: &CanonicalInstance,
    breach: Point3,
    iterations: usize,
    method: SolveMethod,
    clamped: bool,
    tol: f64,
) -> BreachSolution {
    let theta = theta_of(c, breach);
    let beta = beta_of(c, theta);
    let residual = fixed_point_residual(c, theta, beta);
    let tau_defender = inst.defender.distance(breach);
    let tau_attacker = inst.attacker.distance(breach) / inst.v;
    BreachSolution {
        theta_star: theta,
        beta_star: beta,
        breach_world: breach,
        tau_attacker,
        tau_defender,
        payoff: tau_defender - tau_attacker,
        residual,
        iterations,
        converged: residual < tol,
        clamped,
        method,
    }
}

/// Every local maximum of a sampled periodic function, refined by golden section.
fn refine_periodic_maxima(f: impl Fn(f64) -> f64, samples: usize) -> Option<(f64, f64)> {
    let step = TAU / samples as f64;
    let values: Vec<f64> = (0..samples).map(|k| f(k as f64 * step)).collect();
    let mut best: Option<(f64, f64)> = None;
    for k in 0..samples {
        let here = values[k];
        if !here.is_finite() {
            continue;
        }
        let prev = values[(k + samples - 1) % samples];
        let next = values[(k + 1) % samples];
        if here >= prev && here >= next {
            let t0 = k as f64 * step;
            let (t, ft) = golden_section_max(&f, t0 - step, t0 + step, GOLDEN_TOL);
            let (t, ft) = if ft >= here { (t, ft) } else { (t0, here) };
            if best.is_none_or(|(_, fb)| ft > fb) {
                best = Some((t, ft));
            }
        }
    }
    best
}

fn masked(z: f64, value: f64) -> f64 {
    if z >= Z_FLOOR {
        value
    } else {
        f64::NEG_INFINITY
    }
}

/// Best feasible breach point among the in-plane arc above the ground and the equator.
fn boundary_search(inst: &EngagementInstance, c: &CanonicalInstance, samples: usize, dome: bool) -> Point3 {
    let r = c.radius;
    let plane = |t: f64| {
        let b = c.boundary_point(t);
        if dome {
            masked(b.z, inst.payoff_at(b))
        } else {
            inst.payoff_at(b)
        }
    };
    let mut best = refine_periodic_maxima(plane, samples).map(|(t, f)| (c.boundary_point(t), f));
    if dome {
        let equator = |psi: f64| inst.payoff_at(Point3::new(r * psi.cos(), r * psi.sin(), 0.0));
        if let Some((psi, f)) = refine_periodic_maxima(equator, samples) {
            if best.is_none_or(|(_, fb)| f > fb) {
                best = Some((Point3::new(r * psi.cos(), r * psi.sin(), 0.0), f));
            }
        }
    }
    let mut b = best.map(|(b, _)| b).unwrap_or_else(|| c.boundary_point(c.phi_attacker));
    if dome && b.z < 0.0 {
        b.z = 0.0;
    }
    b
}

pub(crate) fn solve_planar(inst: &EngagementInstance, tol: f64, max_iter: usize, dome: bool) -> BreachSolution {
    let c = canonicalize(inst);
    match c.degeneracy {
        Degeneracy::DefenderAtOrigin => {
            let breach = inst.attacker.normalized().unwrap_or(Point3::Z) * c.radius;
            let mut sol = solution_at(inst, &c, breach, 0, SolveMethod::ClosedForm, false, tol);
            sol.converged = true;
            return sol;
        }
        Degeneracy::AttackerOnAxis => {
            // Rotational symmetry about the axis: search the upward-reaching plane.
            let breach = boundary_search(inst, &c, BOUNDARY_SAMPLES, dome);
            let mut sol = solution_at(inst, &c, breach, 0, SolveMethod::Grid, false, tol);
            sol.converged = true;
            return sol;
        }
        Degeneracy::None => {}
    }

    let it = damped_iteration(&c, tol, max_iter);
    let breach = c.boundary_point(it.theta);
    let tau_defender = defender_distance(&c, it.theta);
    let tau_attacker = attacker_distance(&c, it.theta) / c.v;
    let sol = BreachSolution {
        theta_star: it.theta,
        beta_star: it.beta,
        breach_world: breach,
        tau_attacker,
        tau_defender,
        payoff: tau_defender - tau_attacker,
        residual: it.residual,
        iterations: it.iterations,
        converged: it.converged,
        clamped: false,
        method: SolveMethod::FixedPoint,
    };
    if dome && sol.converged && breach.z < Z_FLOOR {
        let b = boundary_search(inst, &c, BOUNDARY_SAMPLES, true);
        let mut clamped = solution_at(inst, &c, b, it.iterations, SolveMethod::Boundary, true, tol);
        clamped.converged = true;
        clamped.residual = it.residual;
        return clamped;
    }
    sol
}

fn check_tol(tol: f64, max_iter: usize) -> Result<(), GeometryError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(GeometryError::InvalidParameter("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Solves the stationarity system for the optimal breach point by damped fixed-point iteration.
///
/// On non-convergence the best iterate is returned with `converged == false`; callers are
/// expected to fall back to [`solve_breach_grid`] (see [`solve_breach`]).
pub fn solve_breach_fixed_point(
    inst: &EngagementInstance,
    tol: f64,
    max_iter: usize,
) -> Result<BreachSolution, GeometryError> {
    check_tol(tol, max_iter)?;
    Ok(solve_planar(inst, tol, max_iter, true))
}

/// Exhaustive oracle: dense sampling of the in-plane great circle and the equator, each local
/// maximum refined by golden section. Evaluates the payoff directly in world coordinates.
pub fn solve_breach_grid(inst: &EngagementInstance, grid_n: usize) -> Result<BreachSolution, GeometryError> {
    if grid_n < 64 {
        return Err(GeometryError::InvalidParameter(format!("grid_n must be at least 64, got {grid_n}")));
    }
    Ok(grid_solution(inst, grid_n, true))
}

pub(crate) fn grid_solution(inst: &EngagementInstance, grid_n: usize, dome: bool) -> BreachSolution {
    let c = canonicalize(inst);
    let r = inst.radius;
    let d = inst.defender;
    let a = inst.attacker;
    let v = inst.v;
    let on_plane = |t: f64| {
        let (s, co) = t.sin_cos();
        c.rotation.apply(Point3::new(r * co, r * s, 0.0))
    };
    let eval_plane = |t: f64| {
        let b = on_plane(t);
        let p = payoff_unchecked(d, a, b, v);
        if dome {
            masked(b.z, p)
        } else {
            p
        }
    };
    let mut best = refine_periodic_maxima(eval_plane, grid_n).map(|(t, f)| (on_plane(t), f));
    if dome {
        let on_equator = |psi: f64| Point3::new(r * psi.cos(), r * psi.sin(), 0.0);
        let eval_equator = |psi: f64| payoff_unchecked(d, a, on_equator(psi), v);
        if let Some((psi, f)) = refine_periodic_maxima(eval_equator, grid_n) {
            if best.is_none_or(|(_, fb)| f > fb) {
                best = Some((on_equator(psi), f));
            }
        }
    }
    let mut breach = best.map(|(b, _)| b).unwrap_or_else(|| on_plane(c.phi_attacker));
    let clamped = dome && breach.z.abs() < 1e-9 && breach.dot(c.rotation.column(2)).abs() > 1e-9;
    if dome && breach.z < 0.0 {
        breach.z = 0.0;
    }
    let mut sol = solution_at(inst, &c, breach, grid_n, SolveMethod::Grid, clamped, DEFAULT_TOL);
    sol.converged = true;
    sol
}

/// Fixed-point solve with the grid oracle as fallback. Always returns a usable breach point.
pub fn solve_breach(inst: &EngagementInstance) -> BreachSolution {
    let sol = solve_planar(inst, DEFAULT_TOL, DEFAULT_MAX_ITER, true);
    if sol.converged {
        sol
    } else {
        grid_solution(inst, DEFAULT_GRID_N, true)
    }
}

/// Same as [`solve_breach`] on the full sphere, ignoring the ground plane.
pub(crate) fn solve_breach_sphere(inst: &EngagementInstance) -> BreachSolution {
    let sol = solve_planar(inst, DEFAULT_TOL, DEFAULT_MAX_ITER, false);
    if sol.converged {
        sol
    } else {
        grid_solution(inst, DEFAULT_GRID_N, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(d: [f64; 3], a: [f64; 3], v: f64) -> EngagementInstance {
        EngagementInstance::unit(Point3::from_array(d), Point3::from_array(a), v).unwrap()
    }

    /// Brute-force maximum over a fine latitude/longitude sweep of the dome.
    fn dome_sweep(inst: &EngagementInstance, n: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let phi = (i as f64 / n as f64) * std::f64::consts::FRAC_PI_2;
            for j in 0..(4 * n) {
                let psi = j as f64 / (4 * n) as f64 * TAU;
                let b = Point3::from_heading(psi, phi);
                best = best.max(inst.payoff_at(b));
            }
        }
        best
    }

    #[test]
    fn collinear_symmetric_case() {
        let inst = unit([0.5, 0.0, 0.0], [2.0, 0.0, 0.0], 0.8);
        let sol = solve_breach_fixed_point(&inst, 1e-12, 200).unwrap();
        assert!(sol.theta_star.abs() < 1e-6, "theta {}", sol.theta_star);
        let grid = solve_breach_grid(&inst, 4096).unwrap();
        assert!(grid.theta_star.abs() < 1e-6);
        assert!((sol.breach_world - Point3::X).norm() < 1e-6);
    }

    #[test]
    fn off_axis_case_matches_grid() {
        let inst = unit([0.2, 0.2, 0.0], [1.5, 0.8, 0.6], 0.8);
        let fp = solve_breach_fixed_point(&inst, 1e-12, 200).unwrap();
        assert!(fp.converged);
        assert!(fp.residual < 1e-8);
        let grid = solve_breach_grid(&inst, 2048).unwrap();
        assert!((fp.theta_star - grid.theta_star).abs() < 1e-4);
        assert!((fp.payoff - grid.payoff).abs() < 1e-6);
        assert!((fp.breach_world.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn law_of_cosines_times_match_world_distances() {
        let inst = unit([0.1, -0.3, 0.2], [0.4, 1.4, 1.1], 0.9);
        let sol = solve_breach_fixed_point(&inst, 1e-12, 200).unwrap();
        assert!(sol.converged);
        assert!((sol.tau_defender - inst.defender.distance(sol.breach_world)).abs() < 1e-10);
        assert!((sol.tau_attacker - inst.attacker.distance(sol.breach_world) / 0.9).abs() < 1e-10);
    }

    #[test]
    fn defender_at_origin_closed_form() {
        let inst = unit([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.7);
        let sol = solve_breach(&inst);
        let expected = Point3::new(1.0, 1.0, 1.0).normalized().unwrap();
        assert!((sol.breach_world - expected).norm() < 1e-12);
        assert_eq!(sol.method, SolveMethod::ClosedForm);
    }

    #[test]
    fn slow_attacker_aims_at_nearest_point() {
        // As v → 0 the attacker's own travel time dominates.
        let inst = unit([0.3, 0.0, 0.0], [0.0, 0.0, 5.0], 1e-3);
        let sol = solve_breach_grid(&inst, 1024).unwrap();
        assert!((sol.breach_world - Point3::Z).norm() < 1e-3);
        assert!(sol.payoff < -100.0);
    }

    #[test]
    fn ground_clamp_keeps_breach_on_dome() {
        // Defender high on the dome, attacker skimming the ground on the far side.
        let inst = unit([0.0, 0.0, 0.9], [0.0, 1.3, 0.02], 1.2);
        let sol = solve_breach(&inst);
        assert!(sol.breach_world.z >= -1e-12);
        assert!((sol.breach_world.norm() - 1.0).abs() < 1e-8);
        let grid = solve_breach_grid(&inst, 4096).unwrap();
        assert!((sol.payoff - grid.payoff).abs() < 1e-6);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let inst = unit([0.2, 0.0, 0.0], [2.0, 0.0, 0.5], 0.8);
        assert!(solve_breach_fixed_point(&inst, 0.0, 10).is_err());
        assert!(solve_breach_fixed_point(&inst, 1e-9, 0).is_err());
        assert!(solve_breach_grid(&inst, 32).is_err());
    }

    #[test]
    fn grid_agrees_with_dome_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let inst = random_instance(&mut rng);
            let grid = solve_breach_grid(&inst, 1024).unwrap();
            let sweep = dome_sweep(&inst, 120);
            // The sweep is coarse, so it can only approach the optimum from below.
            assert!(grid.payoff >= sweep - 1e-9, "grid {} sweep {}", grid.payoff, sweep);
            assert!(grid.payoff - sweep < 5e-3);
        }
    }

    #[test]
    fn no_profitable_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let inst = random_instance(&mut rng);
            let sol = solve_breach(&inst);
            for _ in 0..100 {
                let b = Point3::from_heading(rng.random_range(0.0..TAU), rng.random_range(0.0..1.5707963));
                assert!(inst.payoff_at(b) <= sol.payoff + 1e-9);
            }
        }
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng) -> EngagementInstance {
        let d = Point3::from_heading(rng.random_range(0.0..TAU), rng.random_range(0.0..1.5))
            * rng.random_range(0.05..0.9);
        let a = Point3::from_heading(rng.random_range(0.0..TAU), rng.random_range(0.0..1.5))
            * rng.random_range(1.2..2.5);
        EngagementInstance::unit(d, a, rng.random_range(0.5..1.5)).unwrap()
    }
}

//! Browser bindings. Every function takes plain numbers and returns a JSON string, or an
//! `{"error": ...}` object when the inputs do not form a valid engagement.

use pdlab_core::geometry::{
    simulate_1v1, solve_breach, zero_payoff_surface, EngagementInstance, GeometryError, Point3, SurfaceParams,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Breach {
    breach: [f64; 3],
    payoff: f64,
    theta: f64,
    defender_time: f64,
    attacker_time: f64,
    method: String,
}

#[derive(Serialize)]
struct Surface {
    points: Vec<[f64; 3]>,
    planar: Vec<(f64, f64)>,
    omitted: usize,
}

#[derive(Serialize)]
struct Duel {
    breach: [f64; 3],
    target: [f64; 3],
    defender_path: Vec<[f64; 3]>,
    attacker_path: Vec<[f64; 3]>,
    defender_arrival: f64,
    attacker_arrival: f64,
    payoff: f64,
}

fn json<T: Serialize>(r: Result<T, GeometryError>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("plain data serializes"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

fn breach(d: Point3, a: Point3, v: f64) -> Result<Breach, GeometryError> {
    let s = solve_breach(&EngagementInstance::unit(d, a, v)?);
    Ok(Breach {
        breach: s.breach_world.to_array(),
        payoff: s.payoff,
        theta: s.theta_star,
        defender_time: s.tau_defender,
        attacker_time: s.tau_attacker,
        method: format!("{:?}", s.method),
    })
}

/// Optimal breach point on the unit dome for defender `d`, attacker `a` and speed ratio `v`.
#[wasm_bindgen]
pub fn breach_point(dx: f64, dy: f64, dz: f64, ax: f64, ay: f64, az: f64, v: f64) -> String {
    json(breach(Point3::new(dx, dy, dz), Point3::new(ax, ay, az), v))
}

/// Zero-payoff surface around defender `d` on the unit dome.
#[wasm_bindgen]
pub fn zero_surface(dx: f64, dy: f64, dz: f64, v: f64, theta_samples: usize, slices: usize) -> String {
    let params = SurfaceParams { theta_samples, slices, ..SurfaceParams::default() };
    json(zero_payoff_surface(Point3::new(dx, dy, dz), v, &params).map(|s| Surface {
        points: s.points.iter().map(|p| p.point.to_array()).collect(),
        planar: s.planar,
        omitted: s.omitted.len(),
    }))
}

/// Straight-line 1v1 engagement. `deviation` only matters for a non-optimal attacker.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn duel(
    dx: f64,
    dy: f64,
    dz: f64,
    ax: f64,
    ay: f64,
    az: f64,
    v: f64,
    defender_optimal: bool,
    attacker_optimal: bool,
    deviation: f64,
) -> String {
    let run = || {
        let inst = EngagementInstance::unit(Point3::new(dx, dy, dz), Point3::new(ax, ay, az), v)?;
        let o = simulate_1v1(&inst, defender_optimal, attacker_optimal, deviation, 0.005)?;
        Ok(Duel {
            breach: o.optimal_breach.to_array(),
            target: o.attacker_target.to_array(),
            defender_path: o.trajectory.iter().map(|s| s.defender.to_array()).collect(),
            attacker_path: o.trajectory.iter().map(|s| s.attacker.to_array()).collect(),
            defender_arrival: o.defender_arrival,
            attacker_arrival: o.attacker_arrival,
            payoff: o.realized_payoff,
        })
    };
    json(run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breach_point_lies_on_dome() {
        let v: serde_json::Value = serde_json::from_str(&breach_point(0.2, 0.2, 0.0, 1.5, 0.8, 0.6, 0.8)).unwrap();
        let b: Vec<f64> = serde_json::from_value(v["breach"].clone()).unwrap();
        assert!((b.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_engagement_reports_error() {
        let v: serde_json::Value = serde_json::from_str(&breach_point(0.2, 0.2, 0.0, 0.5, 0.0, 0.0, 0.8)).unwrap();
        assert!(v["error"].is_string());
    }

    #[test]
    fn optimal_duel_ties() {
        let s: serde_json::Value = serde_json::from_str(&zero_surface(0.2, 0.2, 0.0, 0.8, 12, 4)).unwrap();
        let p: Vec<f64> = serde_json::from_value(s["points"][0].clone()).unwrap();
        let d: serde_json::Value = serde_json::from_str(&duel(0.2, 0.2, 0.0, p[0], p[1], p[2], 0.8, true, true, 0.0)).unwrap();
        assert!(d["payoff"].as_f64().unwrap().abs() < 0.02);
    }
}

//! Batch check of the equilibrium strategies on attackers placed on the zero-payoff surface.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::duel::simulate_1v1;
use super::surface::attacker_on_zero_surface;
use super::{EngagementInstance, GeometryError, Point3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NashParams {
    pub instances: usize,
    /// Attacker speed over defender speed.
    pub v: f64,
    pub radius: f64,
    pub dt: f64,
    /// Angle by which the attacker misses the optimal breach point in the third scenario.
    pub deviation: f64,
    /// Defenders start within this fraction of the radius.
    pub defender_extent: f64,
    pub seed: u64,
}

impl Default for NashParams {
    fn default() -> Self {
        NashParams { instances: 200, v: 1.25, radius: 1.0, dt: 0.01, deviation: 0.3, defender_extent: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Both players play the equilibrium.
    BothOptimal,
    /// The defender detours through the attacker–defender line.
    DefenderDeviates,
    /// The attacker aims away from the optimal breach point.
    AttackerDeviates,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::BothOptimal, Scenario::DefenderDeviates, Scenario::AttackerDeviates];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::BothOptimal => "i",
            Scenario::DefenderDeviates => "ii",
            Scenario::AttackerDeviates => "iii",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub instance: usize,
    pub scenario: Scenario,
    pub defender: Point3,
    pub attacker: Point3,
    pub defender_arrival: f64,
    pub attacker_arrival: f64,
    /// `defender_arrival − attacker_arrival`.
    pub payoff: f64,
}

fn sample_defender(rng: &mut ChaCha8Rng, extent: f64) -> Point3 {
    loop {
        let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        if p.norm() <= 1.0 {
            return p * extent;
        }
    }
}

fn sample_direction(rng: &mut ChaCha8Rng) -> Point3 {
    let yaw: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let elevation: f64 = rng.random_range(0.0..FRAC_PI_2 * 0.9);
    Point3::from_heading(yaw, elevation)
}

/// Runs the three scenarios on `params.instances` seeded instances. Directions without a
/// zero-payoff radius are redrawn.
pub fn nash_scenarios(params: &NashParams) -> Result<Vec<ScenarioRecord>, GeometryError> {
    if params.instances == 0 || !(params.defender_extent > 0.0 && params.defender_extent < 1.0) {
        return Err(GeometryError::InvalidParameter("instances and defender_extent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let r = params.radius;
    let mut out = Vec::with_capacity(3 * params.instances);
    let mut k = 0;
    let mut draws = 0;
    while k < params.instances {
        draws += 1;
        if draws > 100 * params.instances {
            return Err(GeometryError::InvalidInstance("could not place attackers on the zero-payoff surface".into()));
        }
        let d = sample_defender(&mut rng, params.defender_extent * r);
        let dir = sample_direction(&mut rng);
        let Ok(a) = attacker_on_zero_surface(d, dir, params.v, r, 1e-12) else {
            continue;
        };
        let Ok(inst) = EngagementInstance::new(d, a, params.v, r) else {
            continue;
        };
        for s in Scenario::ALL {
            let (dopt, aopt) = match s {
                Scenario::BothOptimal => (true, true),
                Scenario::DefenderDeviates => (false, true),
                Scenario::AttackerDeviates => (true, false),
            };
            let o = simulate_1v1(&inst, dopt, aopt, params.deviation, params.dt)?;
            out.push(ScenarioRecord {
                instance: k,
                scenario: s,
                defender: d,
                attacker: a,
                defender_arrival: o.defender_arrival,
                attacker_arrival: o.attacker_arrival,
                payoff: o.realized_payoff,
            });
        }
        k += 1;
    }
    Ok(out)
}

pub const NASH_CSV_HEADER: &str = "instance,scenario,dx,dy,dz,ax,ay,az,defender_arrival,attacker_arrival,payoff";

pub fn write_nash_csv<W: Write>(records: &[ScenarioRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{NASH_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.instance,
            r.scenario.label(),
            r.defender.x,
            r.defender.y,
            r.defender.z,
            r.attacker.x,
            r.attacker.y,
            r.attacker.z,
            r.defender_arrival,
            r.attacker_arrival,
            r.payoff
        )?;
    }
    Ok(())
}

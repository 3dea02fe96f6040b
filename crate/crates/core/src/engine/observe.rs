use super::{WorldState, NUM_TYPES};
use crate::geometry::Point3;

/// `(distance, pitch, yaw)` of `target` as seen from an agent at `from` facing `(yaw, pitch)`.
///
/// The body frame has x along the heading, y to the left in the horizontal plane and z completing
/// a right-handed frame.
pub fn relative_angles(from: Point3, yaw: f64, pitch: f64, target: Point3) -> (f64, f64, f64) {
    let rel = target - from;
    let forward = Point3::from_heading(yaw, pitch);
    let left = Point3::new(-yaw.sin(), yaw.cos(), 0.0);
    let up = forward.cross(left);
    let (f, l, u) = (rel.dot(forward), rel.dot(left), rel.dot(up));
    let d = rel.norm();
    if d == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    (d, u.atan2(f.hypot(l)), l.atan2(f))
}

/// Local observation of defender `i`: self block, one block per other defender (zeros once that
/// defender is retired), and the assigned attacker (zeros when there is none).
pub fn observe(world: &WorldState, i: usize) -> Vec<f64> {
    let n = world.n_defenders();
    let mut out = Vec::with_capacity(world.config.obs_dim());
    let me = &world.defenders[i];
    self_block(world, i, &mut out);
    for j in 0..n {
        if j == i {
            continue;
        }
        let other = &world.defenders[j];
        if other.alive {
            let (d, th, ph) = relative_angles(me.position, me.yaw, me.pitch, other.position);
            out.extend_from_slice(&[d, th, ph]);
        } else {
            out.extend_from_slice(&[0.0; 3]);
        }
    }
    target_block(world, i, &mut out);
    out
}

fn self_block(world: &WorldState, i: usize, out: &mut Vec<f64>) {
    let me = &world.defenders[i];
    let p = me.position;
    let v = me.velocity;
    out.extend_from_slice(&[p.x, p.y, p.z, me.yaw, me.pitch, v.x, v.y, v.z]);
    out.push(me.dynamics.type_id as f64 / NUM_TYPES as f64);
}

fn target_block(world: &WorldState, i: usize, out: &mut Vec<f64>) {
    let me = &world.defenders[i];
    match world.assignment[i].filter(|&j| world.attackers[j].alive && me.alive) {
        Some(j) => {
            let (d, th, ph) = relative_angles(me.position, me.yaw, me.pitch, world.attackers[j].position);
            out.extend_from_slice(&[d, th, ph]);
        }
        None => out.extend_from_slice(&[0.0; 3]),
    }
}

/// Critic state of defender `i`. The first [`super::STATE_OTHER_DIM`] entries do not depend on
/// teammates: self block, target block, assigned attacker position and velocity. They are followed
/// by one world-frame offset `(dx, dy, dz)` per other defender, zero once that defender is
/// retired.
pub fn agent_state(world: &WorldState, i: usize) -> Vec<f64> {
    let n = world.n_defenders();
    let mut out = Vec::with_capacity(world.config.state_dim());
    self_block(world, i, &mut out);
    target_block(world, i, &mut out);
    match world.assignment[i].filter(|&j| world.attackers[j].alive) {
        Some(j) => {
            let a = &world.attackers[j];
            out.extend_from_slice(&a.position.to_array());
            out.extend_from_slice(&a.velocity.to_array());
        }
        None => out.extend_from_slice(&[0.0; 6]),
    }
    let me = world.defenders[i].position;
    for j in 0..n {
        if j == i {
            continue;
        }
        let other = &world.defenders[j];
        if other.alive {
            out.extend_from_slice(&(other.position - me).to_array());
        } else {
            out.extend_from_slice(&[0.0; 3]);
        }
    }
    out
}

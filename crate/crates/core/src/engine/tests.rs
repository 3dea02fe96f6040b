use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

fn calm(n: usize) -> GameConfig {
    GameConfig { n_defenders: n, n_attackers: n, wind_scale: 0.0, ..GameConfig::default() }
}

fn world(cfg: &GameConfig, seed: u64) -> WorldState {
    reset(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn idle(w: &WorldState) -> Vec<[f64; 2]> {
    (0..w.n_defenders()).map(|i| steer_action(&w.defenders[i], w.defenders[i].heading(), w.config.dt)).collect()
}

#[test]
fn reset_places_agents_on_the_right_side() {
    let cfg = GameConfig { n_defenders: 8, n_attackers: 8, ..GameConfig::default() };
    for seed in 0..20 {
        let w = world(&cfg, seed);
        for d in &w.defenders {
            assert!(d.position.norm() < cfg.radius * cfg.defender_spawn && d.position.z >= 0.0);
        }
        for a in &w.attackers {
            let r = a.position.norm();
            assert!(r >= 1.2 - 1e-12 && r <= 2.5 + 1e-12 && a.position.z >= 0.0);
        }
        let all: Vec<Point3> = w.defenders.iter().chain(&w.attackers).map(|a| a.position).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(all[i].distance(all[j]) >= cfg.d_safe);
            }
        }
        for (i, d) in w.defenders.iter().enumerate() {
            assert_eq!(d.dynamics.type_id, i % NUM_TYPES);
        }
    }
}

#[test]
fn reset_is_seeded() {
    let cfg = GameConfig::default();
    assert_eq!(world(&cfg, 5), world(&cfg, 5));
    assert_ne!(world(&cfg, 5), world(&cfg, 6));
}

#[test]
fn impossible_spawn_is_config_error() {
    let cfg = GameConfig { n_defenders: 40, n_attackers: 40, d_safe: 0.5, ..GameConfig::default() };
    assert!(matches!(reset(&cfg, &mut ChaCha8Rng::seed_from_u64(0)), Err(EngineError::Config(_))));
}

#[test]
fn observation_length() {
    for n in 1..6 {
        let cfg = GameConfig { n_defenders: n, n_attackers: n, ..GameConfig::default() };
        let w = world(&cfg, 1);
        for i in 0..n {
            assert_eq!(observe(&w, i).len(), 9 + 3 * (n - 1) + 3);
            assert_eq!(agent_state(&w, i).len(), cfg.state_dim());
        }
    }
}

#[test]
fn coincident_teammates_are_at_distance_zero() {
    let mut w = world(&calm(2), 2);
    w.defenders[1].position = w.defenders[0].position;
    assert_eq!(observe(&w, 0)[9], 0.0);
}

// Rotate into the body frame with explicit yaw and pitch matrices.
fn oracle_angles(from: Point3, yaw: f64, pitch: f64, target: Point3) -> (f64, f64, f64) {
    let r = target - from;
    let (sy, cy) = yaw.sin_cos();
    let x1 = cy * r.x + sy * r.y;
    let y1 = -sy * r.x + cy * r.y;
    let z1 = r.z;
    let (sp, cp) = pitch.sin_cos();
    let x2 = cp * x1 + sp * z1;
    let z2 = -sp * x1 + cp * z1;
    let d = (x2 * x2 + y1 * y1 + z2 * z2).sqrt();
    (d, (z2 / d).asin(), y1.atan2(x2))
}

#[test]
fn relative_angles_match_rotation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let from = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let to = Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0));
        let yaw = rng.random_range(0.0..2.0 * PI);
        let pitch = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let got = relative_angles(from, yaw, pitch, to);
        let want = oracle_angles(from, yaw, pitch, to);
        assert!((got.0 - want.0).abs() < 1e-10);
        assert!((got.1 - want.1).abs() < 1e-10);
        assert!((got.2 - want.2).abs() < 1e-10);
    }
}

#[test]
fn reward_examples() {
    let cfg = GameConfig::default();
    let r = reward_terms(&cfg, Some(1.0), Some(1.0), 0);
    assert!((r.total + 0.01).abs() < 1e-15);
    let r = reward_terms(&cfg, Some(1.0), Some(0.95), 0);
    assert!((r.guide - 0.5).abs() < 1e-12);
    assert!((r.total - 0.49).abs() < 1e-12);
    let r = reward_terms(&cfg, Some(0.12), Some(0.05), 2);
    assert!((r.task - 9.99).abs() < 1e-12);
    assert!((r.collide + 0.06).abs() < 1e-12);
    assert_eq!(r.total, r.task + r.guide + r.collide);
}

#[test]
fn capture_retires_both_agents() {
    let mut w = world(&calm(2), 3);
    let j = w.assignment[0].unwrap();
    w.defenders[0].position = w.attackers[j].position + Point3::new(0.02, 0.0, 0.0);
    w.defenders[0].yaw = 0.0;
    let res = w.step(&idle(&w), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(res.events.contains(&Event::Capture { defender: 0, attacker: j }));
    assert!(res.dones[0]);
    assert!(!w.attackers[j].alive);
    assert!(res.rewards[0].task > 9.0);
}

#[test]
fn breach_without_defender_nearby() {
    let mut w = world(&calm(1), 4);
    w.attackers[0].position = Point3::new(0.0, 1.0 + 0.01, 0.3).normalized().unwrap() * 1.01;
    w.defenders[0].position = Point3::new(0.0, -0.8, 0.1);
    let res = w.step(&idle(&w), &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(res.events, vec![Event::Breach { attacker: 0 }]);
    assert!(res.dones[0] && res.episode_done);
    assert_eq!(w.stats.breaches, 1);
}

#[test]
fn horizon_ends_episode() {
    let cfg = GameConfig { horizon: 3, ..calm(2) };
    let mut w = world(&cfg, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut res = w.step(&idle(&w), &mut rng);
    let mut steps = 1;
    while !res.episode_done {
        res = w.step(&idle(&w), &mut rng);
        steps += 1;
    }
    assert!(steps <= 3);
    assert!(res.dones.iter().all(|&d| d));
    assert!(w.stats.finished);
    // Acting after the end is ignored.
    w.step(&[[0.5, 0.5]; 2], &mut rng);
    assert_eq!(w.ignored_actions, 2);
}

fn rollout(cfg: &GameConfig, seed: u64, policy: impl Fn(&WorldState, usize) -> [f64; 2]) -> (WorldState, Vec<StepResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = reset(cfg, &mut rng).unwrap();
    let mut out = Vec::new();
    loop {
        let actions: Vec<[f64; 2]> =
            (0..w.n_defenders()).map(|i| if w.defenders[i].alive && !w.defender_done[i] { policy(&w, i) } else { [0.0; 2] }).collect();
        let res = w.step(&actions, &mut rng);
        let done = res.episode_done;
        out.push(res);
        if done {
            return (w, out);
        }
    }
}

fn chase(w: &WorldState, i: usize) -> [f64; 2] {
    let d = &w.defenders[i];
    match w.assignment[i] {
        Some(j) => steer_action(d, w.attackers[j].position - d.position, w.config.dt),
        None => [0.0; 2],
    }
}

#[test]
fn rollouts_are_deterministic() {
    let cfg = GameConfig::default();
    let (a, ra) = rollout(&cfg, 11, chase);
    let (b, rb) = rollout(&cfg, 11, chase);
    assert_eq!(a.stats, b.stats);
    assert_eq!(ra, rb);
}

#[test]
fn reward_decomposes_and_guide_telescopes() {
    let cfg = GameConfig { n_defenders: 1, n_attackers: 1, ..GameConfig::default() };
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = reset(&cfg, &mut rng).unwrap();
        let start = w.distance_to_target(0).unwrap();
        let mut guide = 0.0;
        loop {
            let res = w.step(&[chase(&w, 0)], &mut rng);
            let r = res.rewards[0];
            assert_eq!(r.total, r.task + r.guide + r.collide);
            guide += r.guide;
            if res.episode_done {
                break;
            }
        }
        let end = w.target_distance[0];
        assert!((guide - 10.0 * (start - end)).abs() < 1e-9);
    }
}

#[test]
fn capture_and_breach_are_exclusive() {
    let cfg = GameConfig { n_defenders: 4, n_attackers: 4, ..GameConfig::default() };
    for seed in 0..10 {
        let (w, results) = rollout(&cfg, seed, chase);
        let mut outcome = vec![0; 4];
        let mut done = vec![false; 4];
        for res in &results {
            for e in &res.events {
                match e {
                    Event::Capture { attacker, .. } | Event::Breach { attacker } => outcome[*attacker] += 1,
                    Event::Collision { .. } => {}
                }
            }
            for (k, &d) in res.dones.iter().enumerate() {
                assert!(d || !done[k], "done flag reset");
                done[k] = d;
            }
        }
        assert!(outcome.iter().all(|&c| c <= 1));
        assert_eq!(w.stats.captures + w.stats.breaches, outcome.iter().sum::<usize>());
    }
}

#[test]
fn direct_angle_flight_is_straight_in_calm_air() {
    let cfg = calm(1);
    let mut w = world(&cfg, 6);
    let spec = *dynamics_table().iter().find(|s| s.family == DynamicsFamily::DirectAngle).unwrap();
    w.defenders[0] = AgentState::new(Point3::new(0.0, 0.0, 0.1), 0.0, 0.0, spec, Role::Defender);
    w.attackers[0].position = Point3::new(0.0, 2.4, 0.0);
    let goal = Point3::new(0.5, 0.3, 0.6);
    let start = w.defenders[0].position;
    let dir = (goal - start).normalized().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a = steer_action(&w.defenders[0], dir, cfg.dt);
        w.step(&[a], &mut rng);
        let off = w.defenders[0].position - start;
        worst = worst.max((off - dir * off.dot(dir)).norm());
    }
    assert!(worst < 1e-9 * 10.0);
}

#[test]
fn calm_attacker_flies_at_breach_point() {
    let cfg = calm(2);
    let mut w = world(&cfg, 7);
    for j in 0..2 {
        let (b, threat) = attacker_target(&w, j);
        assert!(threat.is_some());
        let a = w.attackers[j];
        let next = integrate(&a, attacker_policy(&w, j), Point3::ZERO, cfg.dt);
        let dir = (b - a.position).normalized().unwrap();
        assert!(next.velocity.normalized().unwrap().distance(dir) < 1e-9);
    }
    for d in &mut w.defenders {
        d.alive = false;
    }
    let (b, threat) = attacker_target(&w, 0);
    assert!(threat.is_none());
    let nearest = w.attackers[0].position.normalized().unwrap();
    assert!(b.distance(nearest) < 1e-12);
}

#[test]
fn attacker_breach_point_is_stable_between_steps() {
    let cfg = calm(1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut w = reset(&cfg, &mut rng).unwrap();
    w.defenders[0].dynamics = dynamics_table()[8];
    let mut prev = attacker_target(&w, 0).0;
    let mut worst: f64 = 0.0;
    while !w.stats.finished {
        let d = &w.defenders[0];
        let a = steer_action(d, prev - d.position, cfg.dt);
        w.step(&[a], &mut rng);
        if !w.attackers[0].alive || !w.defenders[0].alive {
            break;
        }
        let b = attacker_target(&w, 0).0;
        worst = worst.max(b.distance(prev));
        prev = b;
    }
    assert!(worst < 1e-3 || w.step_index < 3, "drift {worst}");
}

#[test]
fn trace_lines_are_json() {
    let cfg = calm(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut w = reset(&cfg, &mut rng).unwrap();
    let actions = idle(&w);
    let res = w.step(&actions, &mut rng);
    let mut buf = Vec::new();
    write_trace_line(&mut buf, &TraceRecord::new(&w, &actions, &res)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.ends_with('\n'));
    let back: TraceRecord = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(back.step, 1);
    assert_eq!(back.defenders.len(), 2);
}

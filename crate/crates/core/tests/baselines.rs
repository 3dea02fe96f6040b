use pdlab_core::baselines::{assigned_breach_point, independent_ac, plain_mean_field, rule_based_policy, BaselineKind, RulePolicy};
use pdlab_core::emfac::{evaluate, TrainConfig, Variant};
use pdlab_core::engine::{integrate, reset, steer_action, DynamicsFamily, GameConfig, WorldState};
use pdlab_core::geometry::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn world(cfg: &GameConfig, seed: u64) -> WorldState {
    reset(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: vec![8],
        total_steps: 300,
        warmup_steps: 100,
        batch_size: 16,
        buffer_capacity: 1_000,
        eval_every: 150,
        eval_episodes: 1,
        freeze_step: Some(300),
        seed,
        ..TrainConfig::default()
    }
}

fn short_game() -> GameConfig {
    GameConfig { horizon: 40, ..GameConfig::default() }
}

fn angle(a: Point3, b: Point3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

#[test]
fn calm_uncrowded_rule_steers_at_breach_point() {
    let cfg = GameConfig { wind_scale: 0.0, ..GameConfig::default() };
    let mut checked = 0;
    for seed in 0..20 {
        let w = world(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..w.n_defenders() {
            let d = &w.defenders[i];
            let crowded = w.defenders.iter().enumerate().any(|(j, o)| j != i && o.position.distance(d.position) < 1.5 * cfg.d_safe);
            if crowded {
                continue;
            }
            let b = assigned_breach_point(&w, i).unwrap();
            assert_eq!(rule_based_policy(&w, i, false, &mut rng), steer_action(d, b - d.position, cfg.dt));
            checked += 1;
        }
    }
    assert!(checked > 30);
}

#[test]
fn crowded_rule_turns_away_from_breach_point() {
    let cfg = GameConfig::default();
    let mut w = world(&cfg, 3);
    let p = w.defenders[0].position;
    w.defenders[1].position = p + Point3::new(0.5 * cfg.d_safe, 0.0, 0.0);
    let b = assigned_breach_point(&w, 0).unwrap();
    let direct = steer_action(&w.defenders[0], b - p, cfg.dt);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let evasive = rule_based_policy(&w, 0, false, &mut rng);
    assert_ne!(evasive, direct);
}

#[test]
fn wind_compensation_aligns_ground_track() {
    let cfg = GameConfig { wind_scale: 3.0, n_defenders: 12, n_attackers: 12, ..GameConfig::default() };
    let mut compared = 0;
    for seed in 0..20 {
        let mut w = world(&cfg, seed);
        for i in 0..w.n_defenders() {
            if w.defenders[i].dynamics.family != DynamicsFamily::DirectAngle {
                continue;
            }
            w.defenders[i].position.z = 0.6;
            let crowded = (0..w.n_defenders()).any(|j| {
                j != i && w.defenders[j].position.distance(w.defenders[i].position) < 1.5 * cfg.d_safe
            });
            if crowded {
                continue;
            }
            let d = w.defenders[i];
            let want = assigned_breach_point(&w, i).unwrap() - d.position;
            let model = w.wind_model(&d);
            let ground = |compensate: bool| {
                let a = rule_based_policy(&w, i, compensate, &mut ChaCha8Rng::seed_from_u64(0));
                let own = integrate(&d, a, Point3::ZERO, cfg.dt).own_velocity;
                own + model.mean(d.position.z, own)
            };
            assert!(angle(ground(true), want) <= angle(ground(false), want) + 1e-9);
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn rule_policy_is_seeded() {
    let game = short_game();
    let run = || evaluate(&game, 3, 11, &mut |w| RulePolicy::new(5).actions(w), None).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn learning_baselines_run_and_repeat() {
    let game = short_game();
    for kind in BaselineKind::ALL {
        let Some(variant) = kind.variant() else { continue };
        let train = |seed| match variant {
            Variant::Independent => independent_ac(&game, &tiny_train(seed)),
            _ => plain_mean_field(&game, &tiny_train(seed)),
        };
        let a = train(1).unwrap();
        let b = train(1).unwrap();
        assert_eq!(a.learner.config.variant, variant);
        assert_eq!(a.curve.len(), 3);
        assert!(a.curve.iter().all(|r| r.mean_reward.is_finite()));
        assert_eq!(a.curve, b.curve);
        assert!(a.learner.all_finite());
    }
}

use pdlab_core::assignment::{hungarian, CostMatrix};
use pdlab_core::emfac::{mean_field_action, refine_attention, weighted_state, ReplayBuffer, Transition};
use pdlab_core::engine::{observe, reset, GameConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn brute_force(rows: &[Vec<f64>]) -> f64 {
    fn go(rows: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
        if i == rows.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..rows.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(rows[i][j] + go(rows, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(rows, 0, &mut vec![false; rows.len()])
}

fn square(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, n), n))
}

fn transition(tag: f64) -> Transition {
    Transition {
        states: vec![vec![tag]],
        observations: vec![vec![tag]],
        actions: vec![[tag, 0.0]],
        types: vec![0],
        rewards: vec![tag],
        next_states: vec![vec![tag]],
        next_observations: vec![vec![tag]],
        dones: vec![false],
        active: vec![true],
        next_active: vec![true],
    }
}

proptest! {
    #[test]
    fn refined_attention_is_a_top_m_distribution(
        logits in prop::collection::vec(-5.0..5.0f64, 1..64),
        k in 0.0..=1.0f64,
    ) {
        let n = logits.len() + 1;
        let w = refine_attention(&logits, k, n);
        let m = ((k * n as f64 + 1e-9).floor() as usize).max(1).min(logits.len());
        prop_assert!(w.refined.iter().all(|&x| x >= 0.0));
        prop_assert!((w.refined.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(w.refined.iter().filter(|&&x| x > 0.0).count(), m);
        let cut = w.selected.iter().map(|&i| logits[i]).fold(f64::INFINITY, f64::min);
        for (i, &l) in logits.iter().enumerate() {
            if !w.selected.contains(&i) {
                prop_assert!(l <= cut);
            }
        }
    }

    #[test]
    fn equal_logits_select_lowest_indices(len in 1usize..40, k in 0.0..=1.0f64) {
        let w = refine_attention(&vec![0.5; len], k, len + 1);
        let mut sel = w.selected.clone();
        sel.sort_unstable();
        prop_assert_eq!(sel, (0..w.selected.len()).collect::<Vec<_>>());
    }

    #[test]
    fn mean_field_scales_linearly(
        acts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 1..8),
        c in 0.01..10.0f64,
    ) {
        let refs: Vec<&[f64]> = acts.iter().map(|a| a.as_slice()).collect();
        let w: Vec<f64> = (0..acts.len()).map(|j| 1.0 / (j + 1) as f64).collect();
        let cw: Vec<f64> = w.iter().map(|x| c * x).collect();
        let base = mean_field_action(&refs, Some(&w)).unwrap();
        let scaled = mean_field_action(&refs, Some(&cw)).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((c * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn weighted_state_keeps_length(state in prop::collection::vec(-1.0..1.0f64, 12..30), w in prop::collection::vec(0.0..1.0f64, 0..4)) {
        let out = weighted_state(&state, 0, &w).unwrap();
        prop_assert_eq!(out.len(), state.len());
    }

    #[test]
    fn hungarian_matches_brute_force(rows in square(6)) {
        let (perm, cost) = hungarian(&CostMatrix::from_rows(&rows).unwrap()).unwrap();
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..rows.len()).collect::<Vec<_>>());
        prop_assert!((cost - brute_force(&rows)).abs() < 1e-9);
    }

    #[test]
    fn hungarian_ignores_constant_shift(rows in square(6), c in -50.0..50.0f64) {
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + c).collect()).collect();
        let (p0, c0) = hungarian(&CostMatrix::from_rows(&rows).unwrap()).unwrap();
        let (p1, c1) = hungarian(&CostMatrix::from_rows(&shifted).unwrap()).unwrap();
        prop_assert_eq!(p0, p1);
        prop_assert!((c1 - c0 - rows.len() as f64 * c).abs() < 1e-8);
    }

    #[test]
    fn replay_evicts_oldest_first(cap in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(cap, 1);
        for t in 0..pushes {
            buf.push(transition(t as f64));
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        let first = pushes.saturating_sub(cap);
        for (k, tr) in buf.iter().enumerate() {
            prop_assert_eq!(tr.rewards[0], (first + k) as f64);
        }
    }

    #[test]
    fn replay_refuses_small_samples(stored in 0usize..40, min in 1usize..40) {
        let mut buf = ReplayBuffer::new(100, min);
        for t in 0..stored {
            buf.push(transition(t as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        prop_assert_eq!(buf.sample(8, &mut rng).is_some(), stored >= min);
    }

    #[test]
    fn observation_length_tracks_team_size(n in 1usize..8, seed in 0u64..1000) {
        let cfg = GameConfig { n_defenders: n, n_attackers: n, ..GameConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = reset(&cfg, &mut rng).unwrap();
        for i in 0..n {
            prop_assert_eq!(observe(&world, i).len(), 9 + 3 * (n - 1) + 3);
        }
    }

    #[test]
    fn episodes_are_deterministic_and_rewards_decompose(seed in 0u64..500, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let cfg = GameConfig { horizon: 40, ..GameConfig::default() };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut world = reset(&cfg, &mut rng).unwrap();
            let mut log = Vec::new();
            let mut done = vec![false; cfg.n_defenders];
            while !world.episode_done() {
                let r = world.step(&vec![[a, b]; cfg.n_defenders], &mut rng);
                for (d, &now) in done.iter_mut().zip(&r.dones) {
                    assert!(!*d || now, "done flag was cleared");
                    *d = now;
                }
                for t in &r.rewards {
                    assert_eq!(t.total, t.task + t.guide + t.collide);
                }
                log.push(r);
            }
            (log, world.stats)
        };
        prop_assert_eq!(run(), run());
    }
}

//! Defender-to-attacker matching by minimum total payoff.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::WorldState;
use crate::geometry::{solve_breach, EngagementInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("cost matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
}

/// Square cost matrix; `defenders[i]` and `attackers[j]` name the world agents behind row `i` and
/// column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    pub defenders: Vec<usize>,
    pub attackers: Vec<usize>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AssignmentError::NotSquare { rows: n, cols: row.len() });
            }
            for (j, &c) in row.iter().enumerate() {
                if !c.is_finite() {
                    return Err(AssignmentError::NonFinite(i, j));
                }
                entries.push(c);
            }
        }
        Ok(CostMatrix { n, entries, defenders: (0..n).collect(), attackers: (0..n).collect() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn cost_of(&self, assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Payoff of every living defender against every living attacker at the pair's optimal breach
/// point, with the speed ratio taken from the two agents' speeds.
pub fn build_cost_matrix(world: &WorldState) -> CostMatrix {
    let defenders: Vec<usize> = (0..world.defenders.len()).filter(|&i| world.defenders[i].alive).collect();
    let attackers: Vec<usize> = (0..world.attackers.len()).filter(|&j| world.attackers[j].alive).collect();
    let n = defenders.len().min(attackers.len());
    let (defenders, attackers) = (defenders[..n].to_vec(), attackers[..n].to_vec());
    let r = world.config.radius;
    let mut entries = Vec::with_capacity(n * n);
    for &i in &defenders {
        let d = &world.defenders[i];
        for &j in &attackers {
            let a = &world.attackers[j];
            let v = a.dynamics.max_speed / d.dynamics.max_speed;
            let sol = solve_breach(&EngagementInstance::unchecked(d.position, a.position, v, r));
            entries.push(sol.payoff);
        }
    }
    CostMatrix { n, entries, defenders, attackers }
}

/// Minimum-cost perfect matching: `assignment[i]` is the column of row `i`.
///
/// Among optimal matchings the lexicographically smallest one is returned.
pub fn hungarian(costs: &CostMatrix) -> Result<(Vec<usize>, f64), AssignmentError> {
    let n = costs.n;
    if costs.entries.len() != n * n {
        return Err(AssignmentError::NotSquare { rows: n, cols: costs.entries.len().checked_div(n).unwrap_or(0) });
    }
    if let Some(k) = costs.entries.iter().position(|c| !c.is_finite()) {
        return Err(AssignmentError::NonFinite(k / n, k % n));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let (u, v) = dual_potentials(costs);
    let scale = costs.entries.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tight_tol = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| costs.get(i, j) - u[i] - v[j] <= tight_tol).collect())
        .collect();

    // Every optimal matching uses tight edges only, so the smallest one is found greedily while
    // keeping the remainder perfectly matchable.
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if used[j] || !tight[i][j] {
                continue;
            }
            used[j] = true;
            if perfect_matching_exists(&tight, i + 1, &used) {
                assignment[i] = j;
                break;
            }
            used[j] = false;
        }
        debug_assert!(assignment[i] != usize::MAX);
    }
    let total = costs.cost_of(&assignment);
    Ok((assignment, total))
}

/// Optimal dual potentials from the shortest-augmenting-path Hungarian method.
fn dual_potentials(costs: &CostMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = costs.n;
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (u[1..].to_vec(), v[1..].to_vec())
}

/// Whether rows `first..n` can be matched to unused columns along allowed edges.
fn perfect_matching_exists(allowed: &[Vec<bool>], first: usize, used: &[bool]) -> bool {
    let n = allowed.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        allowed: &[Vec<bool>],
        used: &[bool],
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for j in 0..allowed.len() {
            if used[j] || !allowed[i][j] || seen[j] {
                continue;
            }
            seen[j] = true;
            if match_col[j].is_none_or(|k| augment(k, allowed, used, seen, match_col)) {
                match_col[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in first..n {
        let mut seen = vec![false; n];
        if !augment(i, allowed, used, &mut seen, &mut match_col) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_by_two_example() {
        let (a, c) = hungarian(&matrix(&[&[4.0, 1.0], &[2.0, 3.0]])).unwrap();
        assert_eq!(a, vec![1, 0]);
        assert_eq!(c, 3.0);
    }

    #[test]
    fn dominant_diagonal_is_identity() {
        let (a, _) = hungarian(&matrix(&[&[0.0, 5.0, 5.0], &[5.0, 0.0, 5.0], &[5.0, 5.0, 0.0]])).unwrap();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn ties_pick_smallest_permutation() {
        let (a, c) = hungarian(&matrix(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]])).unwrap();
        assert_eq!(a, vec![0, 1, 2]);
        assert_eq!(c, 3.0);
        let (a, _) = hungarian(&matrix(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]])).unwrap();
        assert_eq!(a, vec![1, 2, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(CostMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        let bad = CostMatrix { n: 2, entries: vec![1.0; 3], defenders: vec![], attackers: vec![] };
        assert!(hungarian(&bad).is_err());
    }

    #[test]
    fn constant_shift_keeps_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..7 {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + 2.5).collect()).collect();
            let (a, c) = hungarian(&CostMatrix::from_rows(&rows).unwrap()).unwrap();
            let (b, d) = hungarian(&CostMatrix::from_rows(&shifted).unwrap()).unwrap();
            assert_eq!(a, b);
            assert!((d - c - 2.5 * n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn beats_random_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 12;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let m = CostMatrix::from_rows(&rows).unwrap();
        let (a, c) = hungarian(&m).unwrap();
        let mut seen = a.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        for _ in 0..100 {
            let mut p: Vec<usize> = (0..n).collect();
            for k in (1..n).rev() {
                p.swap(k, rng.random_range(0..=k));
            }
            assert!(c <= m.cost_of(&p) + 1e-12);
        }
    }
}

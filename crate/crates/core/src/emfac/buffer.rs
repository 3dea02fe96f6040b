use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{dynamics_table, NUM_TYPES};

/// One environment step for all `n` defenders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<[f64; 2]>,
    pub types: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub next_observations: Vec<Vec<f64>>,
    pub dones: Vec<bool>,
    /// Defender alive before the step.
    pub active: Vec<bool>,
    /// Defender alive after the step.
    pub next_active: Vec<bool>,
}

impl Transition {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.n_agents();
        [
            self.states.len(),
            self.observations.len(),
            self.types.len(),
            self.rewards.len(),
            self.next_states.len(),
            self.next_observations.len(),
            self.dones.len(),
            self.active.len(),
            self.next_active.len(),
        ]
        .iter()
        .all(|&l| l == n)
    }
}

/// Widths of one packed transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    n: usize,
    state: usize,
    obs: usize,
}

impl Layout {
    fn of(t: &Transition) -> Self {
        let (state, obs) = (t.states[0].len(), t.observations[0].len());
        for j in 0..t.n_agents() {
            assert!(
                t.states[j].len() == state
                    && t.next_states[j].len() == state
                    && t.observations[j].len() == obs
                    && t.next_observations[j].len() == obs,
                "agents differ in state or observation width"
            );
        }
        Layout { n: t.n_agents(), state, obs }
    }

    /// Per agent: state, observation, action (2), type, reward, next state, next observation and
    /// three flags.
    fn agent_width(&self) -> usize {
        2 * (self.state + self.obs) + 7
    }

    fn width(&self) -> usize {
        self.n * self.agent_width()
    }
}

/// FIFO ring of transitions with uniform sampling.
///
/// Transitions are packed into one flat array instead of being kept as separate allocations,
/// which keeps long runs from fragmenting the heap.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    min_sample: usize,
    layout: Option<Layout>,
    data: Vec<f64>,
    len: usize,
    /// Slot of the oldest transition once the ring is full.
    head: usize,
}

impl ReplayBuffer {
    /// Sampling is refused until `min_sample` transitions are stored.
    pub fn new(capacity: usize, min_sample: usize) -> Self {
        assert!(capacity > 0 && min_sample <= capacity);
        ReplayBuffer { capacity, min_sample, layout: None, data: Vec::new(), len: 0, head: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        assert!(t.is_consistent(), "per-agent lists differ in length");
        assert!(t.n_agents() > 0, "transition without agents");
        let layout = *self.layout.get_or_insert_with(|| Layout::of(&t));
        assert_eq!(Layout::of(&t), layout, "transition shape changed");
        let w = layout.width();
        if self.len < self.capacity {
            pack(&t, &mut self.data);
            self.len += 1;
        } else {
            let mut row = Vec::with_capacity(w);
            pack(&t, &mut row);
            self.data[self.head * w..(self.head + 1) * w].copy_from_slice(&row);
            self.head = (self.head + 1) % self.capacity;
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        let w = self.layout.expect("non-empty buffer").width();
        let slot = (self.head + i) % self.capacity;
        &self.data[slot * w..(slot + 1) * w]
    }

    /// The `i`-th oldest transition.
    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len).then(|| unpack(self.row(i), self.layout.expect("non-empty buffer")))
    }

    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.len).map(|i| unpack(self.row(i), self.layout.expect("non-empty buffer")))
    }

    /// `size` transitions drawn uniformly with replacement, or `None` below the sampling minimum.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Option<Batch> {
        if self.len < self.min_sample.max(1) {
            return None;
        }
        let picked: Vec<Transition> = (0..size).map(|_| self.get(rng.random_range(0..self.len)).expect("in range")).collect();
        let refs: Vec<&Transition> = picked.iter().collect();
        Some(Batch::from_transitions(&refs))
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn pack(t: &Transition, out: &mut Vec<f64>) {
    for j in 0..t.n_agents() {
        out.extend_from_slice(&t.states[j]);
        out.extend_from_slice(&t.observations[j]);
        out.extend_from_slice(&t.actions[j]);
        out.push(t.types[j] as f64);
        out.push(t.rewards[j]);
        out.extend_from_slice(&t.next_states[j]);
        out.extend_from_slice(&t.next_observations[j]);
        out.extend([flag(t.dones[j]), flag(t.active[j]), flag(t.next_active[j])]);
    }
}

fn unpack(row: &[f64], layout: Layout) -> Transition {
    let n = layout.n;
    let mut t = Transition {
        states: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        types: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        next_states: Vec::with_capacity(n),
        next_observations: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        active: Vec::with_capacity(n),
        next_active: Vec::with_capacity(n),
    };
    for chunk in row.chunks_exact(layout.agent_width()) {
        let (state, rest) = chunk.split_at(layout.state);
        let (obs, rest) = rest.split_at(layout.obs);
        t.states.push(state.to_vec());
        t.observations.push(obs.to_vec());
        t.actions.push([rest[0], rest[1]]);
        t.types.push(rest[2] as usize);
        t.rewards.push(rest[3]);
        let (next_state, rest) = rest[4..].split_at(layout.state);
        let (next_obs, flags) = rest.split_at(layout.obs);
        t.next_states.push(next_state.to_vec());
        t.next_observations.push(next_obs.to_vec());
        t.dones.push(flags[0] != 0.0);
        t.active.push(flags[1] != 0.0);
        t.next_active.push(flags[2] != 0.0);
    }
    t
}

/// Column-stacked transitions, one matrix per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<Array2<f64>>,
    pub next_states: Vec<Array2<f64>>,
    pub observations: Vec<Array2<f64>>,
    pub next_observations: Vec<Array2<f64>>,
    pub actions: Vec<Array2<f64>>,
    /// One-hot dynamics type, `size × 16`.
    pub type_onehots: Vec<Array2<f64>>,
    pub families: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
    pub dones: Vec<Vec<f64>>,
    pub active: Vec<Vec<f64>>,
    pub next_active: Vec<Vec<f64>>,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, size: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    let cols = flat.len() / size.max(1);
    Array2::from_shape_vec((size, cols), flat).expect("rows share a width")
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let size = ts.len();
        assert!(size > 0, "empty batch");
        let n = ts[0].n_agents();
        let table = dynamics_table();
        let per_agent = |f: &dyn Fn(&Transition, usize) -> Vec<f64>| -> Vec<Array2<f64>> {
            (0..n).map(|j| stack(ts.iter().map(|t| f(t, j)), size)).collect()
        };
        Batch {
            size,
            states: per_agent(&|t, j| t.states[j].clone()),
            next_states: per_agent(&|t, j| t.next_states[j].clone()),
            observations: per_agent(&|t, j| t.observations[j].clone()),
            next_observations: per_agent(&|t, j| t.next_observations[j].clone()),
            actions: per_agent(&|t, j| t.actions[j].to_vec()),
            type_onehots: per_agent(&|t, j| {
                let mut v = vec![0.0; NUM_TYPES];
                v[t.types[j]] = 1.0;
                v
            }),
            families: (0..n).map(|j| ts.iter().map(|t| table[t.types[j]].family.index()).collect()).collect(),
            rewards: (0..n).map(|j| ts.iter().map(|t| t.rewards[j]).collect()).collect(),
            dones: (0..n).map(|j| ts.iter().map(|t| flag(t.dones[j])).collect()).collect(),
            active: (0..n).map(|j| ts.iter().map(|t| flag(t.active[j])).collect()).collect(),
            next_active: (0..n).map(|j| ts.iter().map(|t| flag(t.next_active[j])).collect()).collect(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Event, StepResult, WorldState};

/// One line of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub defenders: Vec<[f64; 3]>,
    pub attackers: Vec<[f64; 3]>,
    pub actions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
}

impl TraceRecord {
    pub fn new(world: &WorldState, actions: &[[f64; 2]], result: &StepResult) -> Self {
        TraceRecord {
            step: world.step_index,
            defenders: world.defenders.iter().map(|a| a.position.to_array()).collect(),
            attackers: world.attackers.iter().map(|a| a.position.to_array()).collect(),
            actions: actions.to_vec(),
            rewards: result.rewards.iter().map(|r| r.total).collect(),
            events: result.events.clone(),
        }
    }
}

pub fn write_trace_line<W: Write>(mut out: W, record: &TraceRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, record)?;
    out.write_all(b"\n")
}

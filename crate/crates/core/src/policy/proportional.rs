//! The partially-imitable controller: proportional speed tracking of an effective gap.

use serde::{Deserialize, Serialize};

use crate::sim::{
    forward_distance, next_junction_ahead, next_vehicle_ahead, ActionSpace, Anchor, JunctionEnd, MarkovState,
    TrackTopology,
};

/// Inside this distance of the junction the vehicle is committed and ignores the contest.
const COMMITTED: f64 = 2.0;
/// Arrival predictions look this many steps ahead.
const HORIZON: f64 = 3.0;
/// Rivals farther than this from the junction are ignored.
const RIVAL_RANGE: f64 = 15.0;
/// Free space needed beyond the twin endpoint to cross.
const EXIT_CLEAR: f64 = 2.5;
/// Room the leader must leave past the junction before entering it.
const ENTRY_ROOM: f64 = 6.5;
/// Stop-line offset: a losing vehicle aims to halt this far before its endpoint minus the safe distance.
const STOP_OFFSET: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProportionalParams {
    pub gain: f64,
    pub safe_distance: f64,
    pub conflict_vehicles: usize,
}

impl Default for ProportionalParams {
    fn default() -> Self {
        ProportionalParams { gain: 0.25, safe_distance: 4.0, conflict_vehicles: 2 }
    }
}

/// Up to `m` vehicles behind `end` on its loop, nearest first, as (distance, speed).
fn vehicles_behind(state: &MarkovState, topology: &TrackTopology, end: JunctionEnd, m: usize) -> Vec<(f64, f64)> {
    let at = topology.endpoint(end);
    let len = topology.loop_length(at.loop_idx);
    let mut found: Vec<(f64, usize)> = state
        .vehicles
        .iter()
        .enumerate()
        .filter(|(_, v)| v.loop_idx == at.loop_idx)
        .map(|(i, v)| {
            let d = forward_distance(v.position, at.position, len);
            (if d > 0.0 { d } else { len }, i)
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.into_iter().take(m).map(|(d, i)| (d, state.vehicles[i].speed)).collect()
}

/// Distance the ego vehicle may use before it must be stopped.
pub fn effective_gap(state: &MarkovState, topology: &TrackTopology, ego: usize, params: &ProportionalParams) -> f64 {
    let me = &state.vehicles[ego];
    let len = topology.loop_length(me.loop_idx);
    let leader_gap = next_vehicle_ahead(state, topology, Anchor::Vehicle(ego))
        .map_or(len, |i| forward_distance(me.position, state.vehicles[i].position, len));
    let Some(end) = next_junction_ahead(state, topology, ego) else {
        return leader_gap;
    };
    let dj = forward_distance(me.position, topology.endpoint(end).position, len);
    if dj < COMMITTED {
        return leader_gap;
    }
    let twin = end.twin();
    let twin_at = topology.endpoint(twin);
    let twin_len = topology.loop_length(twin_at.loop_idx);
    let clearance = next_vehicle_ahead(state, topology, Anchor::Junction(twin))
        .map_or(twin_len, |i| forward_distance(twin_at.position, state.vehicles[i].position, twin_len));
    let my_arrival = dj - me.speed * HORIZON;
    let losing = clearance < EXIT_CLEAR
        || leader_gap < dj + ENTRY_ROOM
        || vehicles_behind(state, topology, twin, params.conflict_vehicles)
            .into_iter()
            .any(|(dc, v)| dc < RIVAL_RANGE && dc - v * HORIZON <= my_arrival);
    if losing {
        leader_gap.min(dj + STOP_OFFSET)
    } else {
        leader_gap
    }
}

pub fn partially_imitable(
    state: &MarkovState,
    topology: &TrackTopology,
    ego: usize,
    params: &ProportionalParams,
    actions: &ActionSpace,
    v_max: f64,
) -> usize {
    let d_eff = effective_gap(state, topology, ego, params);
    let target = (params.gain * (d_eff - params.safe_distance)).clamp(0.0, v_max);
    actions.nearest(target - state.vehicles[ego].speed)
}

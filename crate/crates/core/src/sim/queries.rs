//! Spatial lookups on a Markov state: the primitives behind `fj`, `fa` and `ba`.
//!
//! Distances wrap around the loop and must be strictly positive: an entity sitting exactly
//! on the anchor is found only after a full lap. Equal distances resolve to the lower index.

use super::state::{forward_distance, MarkovState};
use super::topology::{JunctionEnd, TrackPoint, TrackTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Vehicle(usize),
    Junction(JunctionEnd),
}

pub fn anchor_point(state: &MarkovState, topology: &TrackTopology, anchor: Anchor) -> TrackPoint {
    match anchor {
        Anchor::Vehicle(i) => {
            let v = &state.vehicles[i];
            TrackPoint { loop_idx: v.loop_idx, position: v.position }
        }
        Anchor::Junction(end) => topology.endpoint(end),
    }
}

fn positive(d: f64, len: f64) -> f64 {
    if d > 0.0 {
        d
    } else {
        len
    }
}

/// Nearest junction endpoint strictly ahead of the vehicle on its own loop.
pub fn next_junction_ahead(state: &MarkovState, topology: &TrackTopology, vehicle: usize) -> Option<JunctionEnd> {
    let v = &state.vehicles[vehicle];
    let len = topology.loop_length(v.loop_idx);
    let mut best: Option<(f64, JunctionEnd)> = None;
    for &(pos, end) in topology.endpoints_on(v.loop_idx) {
        let d = positive(forward_distance(v.position, pos, len), len);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, end));
        }
    }
    best.map(|(_, end)| end)
}

fn nearest_vehicle(state: &MarkovState, topology: &TrackTopology, anchor: Anchor, ahead: bool) -> Option<usize> {
    let at = anchor_point(state, topology, anchor);
    let len = topology.loop_length(at.loop_idx);
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in state.vehicles.iter().enumerate() {
        if v.loop_idx != at.loop_idx || anchor == Anchor::Vehicle(i) {
            continue;
        }
        let d = if ahead {
            forward_distance(at.position, v.position, len)
        } else {
            forward_distance(v.position, at.position, len)
        };
        let d = positive(d, len);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

pub fn next_vehicle_ahead(state: &MarkovState, topology: &TrackTopology, anchor: Anchor) -> Option<usize> {
    nearest_vehicle(state, topology, anchor, true)
}

pub fn next_vehicle_behind(state: &MarkovState, topology: &TrackTopology, anchor: Anchor) -> Option<usize> {
    nearest_vehicle(state, topology, anchor, false)
}

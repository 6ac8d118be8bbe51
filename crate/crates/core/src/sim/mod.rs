//! Seeded discrete-time traffic simulator.

mod episode;
mod queries;
mod state;
mod topology;

pub use episode::{initial_state, run_episode, EpisodeHistory, EpisodeRecord, Policy, Termination};
pub use queries::{anchor_point, next_junction_ahead, next_vehicle_ahead, next_vehicle_behind, Anchor};
pub use state::{
    circular_distance, detect_collisions, detect_stall, forward_distance, step, ActionSpace, MarkovState,
    SimParams, Vehicle,
};
pub use topology::{Embedding, Junction, JunctionEnd, Side, TrackLoop, TrackPoint, TrackTopology};

/// Immutable environment description shared by every episode on one topology.
#[derive(Debug, Clone)]
pub struct World {
    pub topology: TrackTopology,
    pub params: SimParams,
    pub actions: ActionSpace,
}

impl World {
    pub fn new(topology: TrackTopology) -> Self {
        World { topology, params: SimParams::default(), actions: ActionSpace::default() }
    }

    pub fn preset(name: &str) -> crate::Result<Self> {
        Ok(World::new(TrackTopology::preset(name)?))
    }
}

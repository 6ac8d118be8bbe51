use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::{detect_collisions, detect_stall, forward_distance, step, MarkovState, Vehicle};
use super::World;
use crate::{Error, Result};

/// Placement attempts per vehicle before giving up on a configuration.
const PLACEMENT_RETRIES: usize = 10_000;

/// A controller applied independently to every vehicle.
///
/// `rng` is the episode's random stream; deterministic controllers ignore it.
pub trait Policy: Send + Sync {
    fn act(&self, world: &World, state: &MarkovState, ego: usize, rng: &mut ChaCha8Rng) -> usize;

    fn joint_action(&self, world: &World, state: &MarkovState, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..state.vehicles.len()).map(|i| self.act(world, state, i, rng)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    RanToLimit,
    Collision,
    Stall,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        self != Termination::RanToLimit
    }
}

/// One logged time step. The final state of an episode carries no action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub state: MarkovState,
    pub actions: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHistory {
    pub topology: String,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub termination: Termination,
}

impl EpisodeHistory {
    /// Number of simulated transitions.
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    /// Records that carry an action, i.e. usable state-action pairs.
    pub fn labelled(&self) -> impl Iterator<Item = (&MarkovState, &[usize])> {
        self.records.iter().filter_map(|r| r.actions.as_deref().map(|a| (&r.state, a)))
    }

    /// JSON-lines: one object per record; the last line carries the termination flag.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            topology: &'a str,
            seed: u64,
            time: u64,
            vehicles: &'a [Vehicle],
            actions: Option<&'a [usize]>,
            #[serde(skip_serializing_if = "Option::is_none")]
            termination: Option<Termination>,
        }
        let last = self.records.len() - 1;
        for (i, r) in self.records.iter().enumerate() {
            let line = Line {
                topology: &self.topology,
                seed: self.seed,
                time: r.state.time,
                vehicles: &r.state.vehicles,
                actions: r.actions.as_deref(),
                termination: (i == last).then_some(self.termination),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            topology: String,
            seed: u64,
            time: u64,
            vehicles: Vec<Vehicle>,
            actions: Option<Vec<usize>>,
            termination: Option<Termination>,
        }
        let mut records = Vec::new();
        let mut head = None;
        let mut termination = None;
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<episode log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line)?;
            head.get_or_insert((l.topology, l.seed));
            termination = l.termination;
            records.push(EpisodeRecord { state: MarkovState { vehicles: l.vehicles, time: l.time }, actions: l.actions });
        }
        let (topology, seed) = head.ok_or_else(|| Error::InvalidInput("empty episode log".into()))?;
        let termination =
            termination.ok_or_else(|| Error::InvalidInput("episode log lacks a termination record".into()))?;
        Ok(EpisodeHistory { topology, seed, records, termination })
    }
}

/// Random non-overlapping placement at rest.
pub fn initial_state(world: &World, n_vehicles: usize, rng: &mut ChaCha8Rng) -> Result<MarkovState> {
    let topo = &world.topology;
    let mut state = MarkovState { vehicles: Vec::with_capacity(n_vehicles), time: 0 };
    for i in 0..n_vehicles {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let loop_idx = rng.gen_range(0..topo.loops.len());
            let len = topo.loop_length(loop_idx);
            let position = rng.gen_range(0.0..len);
            let clear = state.vehicles.iter().filter(|v| v.loop_idx == loop_idx).all(|v| {
                forward_distance(v.position, position, len).min(forward_distance(position, v.position, len))
                    >= world.params.vehicle_length
            });
            if !clear {
                continue;
            }
            state.vehicles.push(Vehicle { loop_idx, position, speed: 0.0 });
            if detect_collisions(&state, topo, &world.params).is_empty() {
                placed = true;
                break;
            }
            state.vehicles.pop();
        }
        if !placed {
            return Err(Error::Config(format!(
                "cannot place vehicle {i} of {n_vehicles} on topology {} without overlap",
                topo.name
            )));
        }
    }
    Ok(state)
}

/// Simulate one seeded episode, stopping at the first collision or stall.
pub fn run_episode(
    world: &World,
    policy: &dyn Policy,
    n_vehicles: usize,
    max_steps: usize,
    seed: u64,
) -> Result<EpisodeHistory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(world, n_vehicles, &mut rng)?;
    let mut records = Vec::with_capacity(max_steps.min(4096) + 1);
    // Post-step states only: the placement state does not count towards a stall.
    let mut recent: Vec<MarkovState> = Vec::new();
    let mut termination = Termination::RanToLimit;
    for _ in 0..max_steps {
        let actions = policy.joint_action(world, &state, &mut rng);
        let next = step(&state, &actions, &world.topology, &world.actions, &world.params)?;
        records.push(EpisodeRecord { state, actions: Some(actions) });
        state = next;
        if !detect_collisions(&state, &world.topology, &world.params).is_empty() {
            termination = Termination::Collision;
            break;
        }
        recent.push(state.clone());
        if recent.len() > world.params.stall_window {
            recent.remove(0);
        }
        if detect_stall(&recent, &world.params) {
            termination = Termination::Stall;
            break;
        }
    }
    records.push(EpisodeRecord { state, actions: None });
    Ok(EpisodeHistory { topology: world.topology.name.clone(), seed, records, termination })
}

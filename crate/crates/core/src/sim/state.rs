use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::topology::{Side, TrackTopology};
use crate::{Error, Result};

/// Kinematic and failure-detection constants shared by every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub dt: f64,
    pub v_max: f64,
    /// Minimum front-to-front gap between consecutive vehicles on a loop.
    pub vehicle_length: f64,
    /// Half-width of the occupancy window around each junction endpoint.
    pub junction_window: f64,
    /// Number of consecutive halted states that constitute a stall.
    pub stall_window: usize,
    pub stall_epsilon: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1.0,
            v_max: 1.0,
            vehicle_length: 2.0,
            junction_window: 2.0,
            stall_window: 20,
            stall_epsilon: 1e-6,
        }
    }
}

/// Discrete acceleration levels; the action label is the index into `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    levels: Vec<f64>,
}

impl Default for ActionSpace {
    fn default() -> Self {
        ActionSpace { levels: vec![-0.2, -0.1, 0.0, 0.1, 0.2] }
    }
}

impl ActionSpace {
    /// Levels must be strictly increasing, symmetric about zero, with an exact zero in the middle.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        let ok = n % 2 == 1
            && levels.windows(2).all(|w| w[0] < w[1])
            && levels[n / 2] == 0.0
            && (0..n).all(|i| levels[i] == -levels[n - 1 - i]);
        if !ok {
            return Err(Error::Config(format!("invalid acceleration levels {levels:?}")));
        }
        Ok(ActionSpace { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, action: usize) -> Option<f64> {
        self.levels.get(action).copied()
    }

    /// Index of the "keep speed" action.
    pub fn hold(&self) -> usize {
        self.levels.len() / 2
    }

    /// Index whose level is closest to `delta`; equidistant levels resolve to the lower index.
    pub fn nearest(&self, delta: f64) -> usize {
        let mut best = 0;
        let mut best_err = f64::INFINITY;
        for (i, &l) in self.levels.iter().enumerate() {
            let err = (l - delta).abs();
            // A small tolerance keeps exact mathematical ties from being split by rounding noise.
            if err < best_err - 1e-12 {
                best = i;
                best_err = err;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    #[serde(rename = "loop")]
    pub loop_idx: usize,
    pub position: f64,
    pub speed: f64,
}

/// Full observable simulator state at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovState {
    pub vehicles: Vec<Vehicle>,
    pub time: u64,
}

impl MarkovState {
    pub fn validate(&self, topology: &TrackTopology, params: &SimParams) -> Result<()> {
        for (i, v) in self.vehicles.iter().enumerate() {
            let Some(track) = topology.loops.get(v.loop_idx) else {
                return Err(Error::InvalidInput(format!("vehicle {i} on missing loop {}", v.loop_idx)));
            };
            if !(v.position >= 0.0 && v.position < track.length) {
                return Err(Error::InvalidInput(format!("vehicle {i} position {} off loop", v.position)));
            }
            if !(v.speed >= 0.0 && v.speed <= params.v_max) {
                return Err(Error::InvalidInput(format!("vehicle {i} speed {} out of range", v.speed)));
            }
        }
        Ok(())
    }
}

/// Forward arc distance from `from` to `to` on a loop of length `len`, in `[0, len)`.
pub fn forward_distance(from: f64, to: f64, len: f64) -> f64 {
    let d = (to - from).rem_euclid(len);
    if d >= len {
        0.0
    } else {
        d
    }
}

/// Shortest arc distance in either direction.
pub fn circular_distance(a: f64, b: f64, len: f64) -> f64 {
    let d = forward_distance(a, b, len);
    d.min(len - d)
}

/// Advance every vehicle by one step under the given joint action.
pub fn step(
    state: &MarkovState,
    actions: &[usize],
    topology: &TrackTopology,
    action_space: &ActionSpace,
    params: &SimParams,
) -> Result<MarkovState> {
    if actions.len() != state.vehicles.len() {
        return Err(Error::InvalidInput(format!(
            "{} actions for {} vehicles",
            actions.len(),
            state.vehicles.len()
        )));
    }
    let vehicles = state
        .vehicles
        .iter()
        .zip(actions)
        .map(|(v, &a)| {
            let accel = action_space
                .level(a)
                .ok_or_else(|| Error::InvalidInput(format!("action index {a} out of range")))?;
            let speed = (v.speed + accel * params.dt).clamp(0.0, params.v_max);
            let len = topology.loop_length(v.loop_idx);
            let mut position = (v.position + speed * params.dt).rem_euclid(len);
            if position >= len {
                position = 0.0;
            }
            Ok(Vehicle { loop_idx: v.loop_idx, position, speed })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkovState { vehicles, time: state.time + 1 })
}

/// Colliding vehicle pairs `(i, j)` with `i < j`, sorted.
///
/// Two vehicles collide when they are consecutive on one loop with a forward gap below
/// the vehicle length, or when they sit inside the windows of the two endpoints of one
/// junction at the same time.
pub fn detect_collisions(state: &MarkovState, topology: &TrackTopology, params: &SimParams) -> Vec<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    let mut by_loop: Vec<Vec<usize>> = vec![Vec::new(); topology.loops.len()];
    for (i, v) in state.vehicles.iter().enumerate() {
        by_loop[v.loop_idx].push(i);
    }
    for (l, ids) in by_loop.iter_mut().enumerate() {
        if ids.len() < 2 {
            continue;
        }
        let len = topology.loop_length(l);
        ids.sort_by(|&x, &y| {
            state.vehicles[x].position.total_cmp(&state.vehicles[y].position).then(x.cmp(&y))
        });
        for k in 0..ids.len() {
            let behind = ids[k];
            let ahead = ids[(k + 1) % ids.len()];
            let gap = forward_distance(state.vehicles[behind].position, state.vehicles[ahead].position, len);
            if gap < params.vehicle_length {
                pairs.insert((behind.min(ahead), behind.max(ahead)));
            }
        }
    }
    for junction in &topology.junctions {
        let inside = |side: Side| -> Vec<usize> {
            let p = junction.endpoint(side);
            let len = topology.loop_length(p.loop_idx);
            state
                .vehicles
                .iter()
                .enumerate()
                .filter(|(_, v)| {
                    v.loop_idx == p.loop_idx
                        && circular_distance(v.position, p.position, len) < params.junction_window
                })
                .map(|(i, _)| i)
                .collect()
        };
        let on_a = inside(Side::A);
        let on_b = inside(Side::B);
        for &i in &on_a {
            for &j in &on_b {
                if i != j {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    pairs.into_iter().collect()
}

/// True iff the window holds at least `stall_window` states and every vehicle is
/// halted in each of the last `stall_window` of them.
pub fn detect_stall(window: &[MarkovState], params: &SimParams) -> bool {
    let s = params.stall_window;
    if window.len() < s || s == 0 {
        return false;
    }
    window[window.len() - s..]
        .iter()
        .all(|st| st.vehicles.iter().all(|v| v.speed < params.stall_epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::topology::{Embedding, TrackLoop};

    fn ring(len: f64) -> TrackTopology {
        TrackTopology::new(
            "ring",
            vec![TrackLoop { length: len, embedding: Embedding::Circle { center: [0.0, 0.0], start_angle: 0.0 } }],
            vec![],
        )
        .unwrap()
    }

    fn state(vs: &[(usize, f64, f64)]) -> MarkovState {
        MarkovState {
            vehicles: vs.iter().map(|&(l, p, s)| Vehicle { loop_idx: l, position: p, speed: s }).collect(),
            time: 0,
        }
    }

    #[test]
    fn step_kinematics() {
        let topo = ring(60.0);
        let (acts, params) = (ActionSpace::default(), SimParams::default());
        let next = step(&state(&[(0, 10.0, 0.5)]), &[3], &topo, &acts, &params).unwrap();
        assert!((next.vehicles[0].speed - 0.6).abs() < 1e-12);
        assert!((next.vehicles[0].position - 10.6).abs() < 1e-12);
        assert_eq!(next.time, 1);

        let next = step(&state(&[(0, 10.0, 0.95)]), &[4], &topo, &acts, &params).unwrap();
        assert_eq!(next.vehicles[0].speed, 1.0);

        let next = step(&state(&[(0, 59.5, 1.0)]), &[2], &topo, &acts, &params).unwrap();
        assert!((next.vehicles[0].position - 0.5).abs() < 1e-12);

        let next = step(&state(&[(0, 3.0, 0.1)]), &[0], &topo, &acts, &params).unwrap();
        assert_eq!(next.vehicles[0].speed, 0.0);
        assert_eq!(next.vehicles[0].position, 3.0);
    }

    #[test]
    fn step_rejects_bad_actions() {
        let topo = ring(60.0);
        let (acts, params) = (ActionSpace::default(), SimParams::default());
        assert!(step(&state(&[(0, 10.0, 0.5)]), &[5], &topo, &acts, &params).is_err());
        assert!(step(&state(&[(0, 10.0, 0.5)]), &[1, 1], &topo, &acts, &params).is_err());
    }

    #[test]
    fn same_loop_collisions() {
        let topo = ring(60.0);
        let params = SimParams::default();
        assert_eq!(detect_collisions(&state(&[(0, 10.0, 0.0), (0, 11.5, 0.0)]), &topo, &params), vec![(0, 1)]);
        assert!(detect_collisions(&state(&[(0, 10.0, 0.0), (0, 13.0, 0.0)]), &topo, &params).is_empty());
        // Wraparound gap: 59.5 -> 0.5 is 1.0.
        assert_eq!(detect_collisions(&state(&[(0, 0.5, 0.0), (0, 59.5, 0.0)]), &topo, &params), vec![(0, 1)]);
    }

    #[test]
    fn junction_collision() {
        let loops = vec![
            TrackLoop { length: 60.0, embedding: Embedding::Circle { center: [0.0, 0.0], start_angle: 0.0 } },
            TrackLoop { length: 60.0, embedding: Embedding::Circle { center: [12.0, 0.0], start_angle: 0.0 } },
        ];
        let base = TrackTopology::preset("A").unwrap();
        let j = base.junctions[0];
        let topo = TrackTopology::new("A", loops, vec![j]).unwrap();
        let params = SimParams::default();
        let a = j.a.position;
        let b = j.b.position;
        let s = state(&[(0, (a - 0.5).rem_euclid(60.0), 0.5), (1, (b - 0.5).rem_euclid(60.0), 0.5)]);
        assert_eq!(detect_collisions(&s, &topo, &params), vec![(0, 1)]);
        let s = state(&[(0, (a - 0.5).rem_euclid(60.0), 0.5), (1, (b - 2.5).rem_euclid(60.0), 0.5)]);
        assert!(detect_collisions(&s, &topo, &params).is_empty());
    }

    #[test]
    fn stall_detection() {
        let params = SimParams::default();
        let halted = state(&[(0, 1.0, 0.0), (0, 20.0, 0.0)]);
        let moving = state(&[(0, 1.0, 0.0), (0, 20.0, 0.3)]);
        assert!(detect_stall(&vec![halted.clone(); 20], &params));
        assert!(!detect_stall(&vec![moving.clone(); 30], &params));
        let mut w = vec![halted.clone(); 19];
        w.push(moving);
        assert!(!detect_stall(&w, &params));
        assert!(!detect_stall(&vec![halted; 19], &params));
    }

    #[test]
    fn nearest_level_ties_go_low() {
        let acts = ActionSpace::default();
        assert_eq!(acts.nearest(-0.15), 0);
        assert_eq!(acts.nearest(1.0), 4);
        assert_eq!(acts.nearest(0.0), 2);
        assert_eq!(acts.nearest(0.04), 2);
        assert!(ActionSpace::new(vec![-0.2, 0.0, 0.1]).is_err());
    }
}

//! Reference state representations: the six rule-table features and the egocentric baseline.

use std::f64::consts::PI;

use crate::features::{eval_feature, EvalContext, Expr, FeatureExpr, FeatureSet};
use crate::sim::{MarkovState, TrackTopology};

/// Number of neighbours described by the egocentric baseline.
pub const EGOCENTRIC_NEIGHBOURS: usize = 4;

/// Column indices of the six rule-table features.
pub mod col {
    pub const SPEED: usize = 0;
    pub const JUNCTION_GAP: usize = 1;
    pub const RIVAL_GAP: usize = 2;
    pub const GAP_MARGIN: usize = 3;
    pub const LEADER_GAP: usize = 4;
    pub const EXIT_CLEARANCE: usize = 5;
}

/// The six features the fully-imitable controller reads, in column order:
///
/// 0. ego speed;
/// 1. forward distance from ego to its next junction endpoint;
/// 2. forward distance from the nearest vehicle behind the twin endpoint to that endpoint;
/// 3. (2) minus (1): positive when ego is the closer of the two;
/// 4. forward distance to the vehicle ahead on ego's loop;
/// 5. forward distance from the twin endpoint to the nearest vehicle past it.
pub fn rule_feature_exprs() -> [Expr; 6] {
    let ego = || Expr::Ego;
    let junction = || ego().fj();
    let twin = || junction().twin();
    let junction_gap = Expr::sep(junction().pos(), ego().pos());
    let rival_gap = Expr::sep(twin().pos(), twin().ba().pos());
    [
        ego().speed(),
        junction_gap.clone(),
        rival_gap.clone(),
        Expr::sub(rival_gap, junction_gap),
        Expr::sep(ego().fa().pos(), ego().pos()),
        Expr::sep(twin().fa().pos(), twin().pos()),
    ]
}

pub fn rule_feature_set() -> FeatureSet {
    let features = rule_feature_exprs().into_iter().map(|e| FeatureExpr::new(e).expect("well-sorted")).collect();
    FeatureSet::new(features).expect("distinct")
}

pub fn rule_features(state: &MarkovState, topology: &TrackTopology, ego: usize) -> [f64; 6] {
    let ctx = EvalContext { state, topology, ego };
    rule_feature_exprs().map(|e| eval_feature(&e, &ctx))
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Column names of the egocentric baseline with `k` neighbours.
pub fn egocentric_names(k: usize) -> Vec<String> {
    (0..k)
        .flat_map(|i| {
            ["radius", "bearing", "radial_velocity", "heading"].map(|what| format!("ego_{what}_{i}"))
        })
        .collect()
}

/// Egocentric description of the `k` nearest other vehicles by planar distance:
/// radius, bearing relative to ego heading, relative velocity along the ego→agent ray
/// (positive when separating) and heading relative to ego heading. Missing neighbours
/// are padded with radius = longest loop length and zeros.
pub fn egocentric_features(state: &MarkovState, topology: &TrackTopology, ego: usize, k: usize) -> Vec<f64> {
    let kin = |i: usize| {
        let v = &state.vehicles[i];
        let track = &topology.loops[v.loop_idx];
        let p = track.point_at(v.position);
        let h = track.heading_at(v.position);
        (p, h, [v.speed * h.cos(), v.speed * h.sin()])
    };
    let (p0, h0, vel0) = kin(ego);
    let mut others: Vec<(f64, usize)> = (0..state.vehicles.len())
        .filter(|&i| i != ego)
        .map(|i| {
            let (p, _, _) = kin(i);
            ((p[0] - p0[0]).hypot(p[1] - p0[1]), i)
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(4 * k);
    for slot in 0..k {
        match others.get(slot) {
            Some(&(r, i)) => {
                let (p, h, vel) = kin(i);
                let (dx, dy) = (p[0] - p0[0], p[1] - p0[1]);
                let bearing = if r > 0.0 { wrap_angle(dy.atan2(dx) - h0) } else { 0.0 };
                let radial = if r > 0.0 {
                    ((vel[0] - vel0[0]) * dx + (vel[1] - vel0[1]) * dy) / r
                } else {
                    0.0
                };
                out.extend([r, bearing, radial, wrap_angle(h - h0)]);
            }
            None => out.extend([topology.max_loop_length(), 0.0, 0.0, 0.0]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::enumerate_features;
    use crate::sim::{Embedding, TrackLoop, Vehicle};

    fn line_world() -> TrackTopology {
        // A huge circle is locally straight: heading ~ +y at arc position 0.
        TrackTopology::new(
            "big",
            vec![TrackLoop { length: 6000.0, embedding: Embedding::Circle { center: [0.0, 0.0], start_angle: 0.0 } }],
            vec![],
        )
        .unwrap()
    }

    fn state(vs: &[(f64, f64)]) -> MarkovState {
        MarkovState { vehicles: vs.iter().map(|&(p, s)| Vehicle { loop_idx: 0, position: p, speed: s }).collect(), time: 0 }
    }

    #[test]
    fn rule_features_are_enumerated() {
        let all = enumerate_features(6).unwrap();
        for f in rule_feature_set().features() {
            assert!(all.contains(f.canonical()), "{f} missing from depth-6 enumeration");
        }
    }

    #[test]
    fn agent_dead_ahead_moving_away() {
        let topo = line_world();
        let s = state(&[(0.0, 0.2), (5.0, 0.8)]);
        let f = egocentric_features(&s, &topo, 0, 1);
        assert!((f[0] - 5.0).abs() < 1e-3, "{f:?}");
        // Chord geometry on the large circle leaves a bearing of about 5 / (2R).
        assert!(f[1].abs() < 1e-2, "{f:?}");
        assert!(f[2] > 0.0);
        assert!(f[3].abs() < 1e-2);
    }

    #[test]
    fn padding() {
        let topo = line_world();
        let alone = egocentric_features(&state(&[(0.0, 0.5)]), &topo, 0, EGOCENTRIC_NEIGHBOURS);
        assert_eq!(alone.len(), 16);
        for slot in alone.chunks(4) {
            assert_eq!(slot, &[6000.0, 0.0, 0.0, 0.0]);
        }
        let two = egocentric_features(&state(&[(0.0, 0.5), (10.0, 0.0)]), &topo, 0, EGOCENTRIC_NEIGHBOURS);
        assert_eq!(&two[4..8], &[6000.0, 0.0, 0.0, 0.0]);
        assert_eq!(egocentric_names(4).len(), 16);
    }
}

//! The fully-imitable controller: a nested threshold table over the six rule features.
//!
//! Speeds move in steps of 0.1, so the table first splits the speed into four bands and
//! then applies, per band:
//!
//! * junction decisions once the junction is closer than the band's stopping threshold:
//!   wait while the exit beyond the twin endpoint is occupied, yield when the rival is
//!   not farther from the junction, and do not enter while the leader is too close to
//!   clear the junction behind it;
//! * a cautious approach inside the wider junction zone when the rival is closer or the
//!   exit is occupied;
//! * otherwise a car-following guard on the leader gap, then cruise.
//!
//! Stopping thresholds are sized so that a vehicle that does not brake this step can
//! still stop outside the junction window at the next one, with a half-unit margin.

use super::representation::col;

#[derive(Debug, Clone, PartialEq)]
pub enum RuleNode {
    /// `below` is taken when `features[feature] < threshold`.
    Test { feature: usize, threshold: f64, below: Box<RuleNode>, above: Box<RuleNode> },
    Act(usize),
}

impl RuleNode {
    fn test(feature: usize, threshold: f64, below: RuleNode, above: RuleNode) -> RuleNode {
        RuleNode::Test { feature, threshold, below: Box::new(below), above: Box::new(above) }
    }

    pub fn decide(&self, features: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                RuleNode::Act(a) => return *a,
                RuleNode::Test { feature, threshold, below, above } => {
                    node = if features[*feature] < *threshold { below } else { above };
                }
            }
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            RuleNode::Act(_) => 1,
            RuleNode::Test { below, above, .. } => below.leaves() + above.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RuleNode::Act(_) => 0,
            RuleNode::Test { below, above, .. } => 1 + below.depth().max(above.depth()),
        }
    }

    /// Every feature column the table tests.
    pub fn features_used(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_features(&self, out: &mut Vec<usize>) {
        if let RuleNode::Test { feature, below, above, .. } = self {
            out.push(*feature);
            below.collect_features(out);
            above.collect_features(out);
        }
    }
}

const BRAKE: usize = 0;
const EASE: usize = 1;
const HOLD: usize = 2;
const CREEP: usize = 3;
const ACCEL: usize = 4;

/// Speed band lower edges are 0, 0.25, 0.55 and 0.75.
const BAND_EDGES: [f64; 3] = [0.25, 0.55, 0.75];
/// Distance to the junction below which a decision must be taken.
const DECIDE: [f64; 4] = [3.0, 4.0, 5.0, 5.5];
/// Leader gap below which to brake hard.
const FOLLOW_HARD: [f64; 4] = [3.0, 3.8, 4.8, 6.0];
/// Leader gap below which to ease off (unused in the slowest band).
const FOLLOW_SOFT: [f64; 4] = [0.0, 5.0, 6.5, 8.0];
/// Leader gap required before entering a junction.
const ENTRY_GAP: [f64; 4] = [9.0, 10.0, 11.0, 11.5];
/// Inside the window: committed to crossing.
const WINDOW: f64 = 2.0;
/// Exit clearance beyond the twin endpoint needed to cross.
const EXIT_CLEAR: f64 = 2.5;
/// Extent of the approach zone and of rival relevance.
const APPROACH: f64 = 12.0;
const RIVAL_RANGE: f64 = 15.0;
const TOP_SPEED_EDGE: f64 = 0.95;

fn cruise(band: usize) -> RuleNode {
    if band == 3 {
        RuleNode::test(col::SPEED, TOP_SPEED_EDGE, RuleNode::Act(ACCEL), RuleNode::Act(HOLD))
    } else {
        RuleNode::Act(ACCEL)
    }
}

/// Car-following guard followed by `otherwise`.
fn follow(band: usize, otherwise: RuleNode) -> RuleNode {
    let soft = if band == 0 {
        otherwise
    } else {
        RuleNode::test(col::LEADER_GAP, FOLLOW_SOFT[band], RuleNode::Act(EASE), otherwise)
    };
    RuleNode::test(col::LEADER_GAP, FOLLOW_HARD[band], RuleNode::Act(BRAKE), soft)
}

fn free(band: usize) -> RuleNode {
    follow(band, cruise(band))
}

fn cautious(band: usize) -> RuleNode {
    let action = match band {
        0 | 1 => CREEP,
        2 => HOLD,
        _ => EASE,
    };
    follow(band, RuleNode::Act(action))
}

fn decide(band: usize) -> RuleNode {
    RuleNode::test(
        col::EXIT_CLEARANCE,
        EXIT_CLEAR,
        RuleNode::Act(BRAKE),
        // Yield unless strictly closer than the rival.
        RuleNode::test(
            col::GAP_MARGIN,
            f64::MIN_POSITIVE,
            RuleNode::Act(BRAKE),
            RuleNode::test(col::LEADER_GAP, ENTRY_GAP[band], RuleNode::Act(BRAKE), free(band)),
        ),
    )
}

fn approach(band: usize) -> RuleNode {
    let contested = RuleNode::test(
        col::RIVAL_GAP,
        RIVAL_RANGE,
        RuleNode::test(col::GAP_MARGIN, f64::MIN_POSITIVE, cautious(band), free(band)),
        free(band),
    );
    RuleNode::test(col::EXIT_CLEARANCE, EXIT_CLEAR, cautious(band), contested)
}

fn band_table(band: usize) -> RuleNode {
    RuleNode::test(
        col::JUNCTION_GAP,
        WINDOW,
        free(band),
        RuleNode::test(
            col::JUNCTION_GAP,
            DECIDE[band],
            decide(band),
            RuleNode::test(col::JUNCTION_GAP, APPROACH, approach(band), free(band)),
        ),
    )
}

/// The complete rule table.
pub fn fully_imitable_table() -> RuleNode {
    RuleNode::test(
        col::SPEED,
        BAND_EDGES[1],
        RuleNode::test(col::SPEED, BAND_EDGES[0], band_table(0), band_table(1)),
        RuleNode::test(col::SPEED, BAND_EDGES[2], band_table(2), band_table(3)),
    )
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::derive_seed;
use crate::dataset::{Dataset, SplitTag};
use crate::sim::{run_episode, Policy, Termination, World};
use crate::tree::DecisionTree;
use crate::{Error, Result};

/// Fraction of rows carrying `tag` that the tree labels correctly.
pub fn accuracy(tree: &DecisionTree, data: &Dataset, tag: SplitTag) -> Result<f64> {
    let rows = data.with_tag(tag);
    if rows.n_rows() == 0 {
        return Err(Error::InvalidInput(format!("no rows tagged `{}`", tag.name())));
    }
    Ok(tree.accuracy(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureStats {
    pub mtbf: f64,
    pub episodes: usize,
    pub total_steps: usize,
    pub collisions: usize,
    pub stalls: usize,
}

impl FailureStats {
    pub fn failures(&self) -> usize {
        self.collisions + self.stalls
    }

    /// Steps per failed episode; with no failures, the full step budget.
    pub fn from_outcomes(outcomes: &[(usize, Termination)], max_steps: usize) -> Self {
        let total_steps = outcomes.iter().map(|o| o.0).sum();
        let collisions = outcomes.iter().filter(|o| o.1 == Termination::Collision).count();
        let stalls = outcomes.iter().filter(|o| o.1 == Termination::Stall).count();
        let failures = collisions + stalls;
        let mtbf = if failures == 0 {
            (outcomes.len() * max_steps) as f64
        } else {
            total_steps as f64 / failures as f64
        };
        FailureStats { mtbf, episodes: outcomes.len(), total_steps, collisions, stalls }
    }
}

/// Runs `episodes` seeded episodes of up to `max_steps` and measures time between failures.
pub fn mtbf(
    policy: &dyn Policy,
    world: &World,
    vehicles: usize,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<FailureStats> {
    if episodes == 0 {
        return Err(Error::InvalidInput("at least one episode is required".into()));
    }
    let outcomes = (0..episodes as u64)
        .into_par_iter()
        .map(|k| {
            let h = run_episode(world, policy, vehicles, max_steps, derive_seed(seed, 0, k))?;
            Ok((h.steps(), h.termination))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FailureStats::from_outcomes(&outcomes, max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ConstantPolicy;

    #[test]
    fn formula() {
        let mut o = vec![(1000, Termination::RanToLimit); 98];
        o.extend([(500, Termination::Collision), (500, Termination::Stall)]);
        let s = FailureStats::from_outcomes(&o, 1000);
        assert_eq!(s.mtbf, 49_500.0);
        assert_eq!((s.collisions, s.stalls), (1, 1));
        let clean = FailureStats::from_outcomes(&vec![(1000, Termination::RanToLimit); 100], 1000);
        assert_eq!(clean.mtbf, 100_000.0);
        assert_eq!(FailureStats::from_outcomes(&[(1, Termination::Collision)], 1000).mtbf, 1.0);
    }

    #[test]
    fn braking_everywhere_stalls_at_the_window() {
        let world = World::preset("C").unwrap();
        let s = mtbf(&ConstantPolicy { action: 0 }, &world, 11, 4, 1000, 7).unwrap();
        assert_eq!(s.stalls, 4);
        assert_eq!(s.mtbf, world.params.stall_window as f64);
    }
}

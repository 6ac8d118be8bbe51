//! Target controllers, baselines and the deployable tree controller.

mod proportional;
mod representation;
mod rules;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use proportional::{effective_gap, partially_imitable, ProportionalParams};
pub use representation::{col, egocentric_names, rule_features, rule_feature_exprs, rule_feature_set, egocentric_features, EGOCENTRIC_NEIGHBOURS};
pub use rules::{fully_imitable_table, RuleNode};

use crate::features::{EvalContext, FeatureProgram, FeatureSet};
use crate::sim::{MarkovState, Policy, World};
use crate::tree::DecisionTree;
use crate::{Error, Result};

/// Configuration-level description of a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    FullyImitable,
    PartiallyImitable {
        #[serde(flatten)]
        params: ProportionalParams,
    },
    /// A tree saved by the training pipeline.
    TreeModel { path: PathBuf },
    /// Uniform over the action space.
    Random,
    Constant { action: usize },
}

impl PolicySpec {
    pub fn partially_imitable() -> Self {
        PolicySpec::PartiallyImitable { params: ProportionalParams::default() }
    }

    /// Short name for reports.
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::FullyImitable => "fully-imitable",
            PolicySpec::PartiallyImitable { .. } => "partially-imitable",
            PolicySpec::TreeModel { .. } => "tree-model",
            PolicySpec::Random => "random",
            PolicySpec::Constant { .. } => "constant",
        }
    }

    /// Instantiates the controller. Relative tree paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Arc<dyn Policy>> {
        Ok(match self {
            PolicySpec::FullyImitable => Arc::new(FullyImitable::new()),
            PolicySpec::PartiallyImitable { params } => Arc::new(PartiallyImitable { params: *params }),
            PolicySpec::TreeModel { path } => Arc::new(TreePolicy::new(DecisionTree::load(&base.join(path))?)?),
            PolicySpec::Random => Arc::new(RandomPolicy),
            PolicySpec::Constant { action } => Arc::new(ConstantPolicy { action: *action }),
        })
    }
}

pub struct FullyImitable {
    table: RuleNode,
}

impl FullyImitable {
    pub fn new() -> Self {
        FullyImitable { table: fully_imitable_table() }
    }

    pub fn table(&self) -> &RuleNode {
        &self.table
    }
}

impl Default for FullyImitable {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for FullyImitable {
    fn act(&self, world: &World, state: &MarkovState, ego: usize, _rng: &mut ChaCha8Rng) -> usize {
        self.table.decide(&rule_features(state, &world.topology, ego))
    }
}

pub struct PartiallyImitable {
    pub params: ProportionalParams,
}

impl Policy for PartiallyImitable {
    fn act(&self, world: &World, state: &MarkovState, ego: usize, _rng: &mut ChaCha8Rng) -> usize {
        partially_imitable(state, &world.topology, ego, &self.params, &world.actions, world.params.v_max)
    }
}

pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, world: &World, _state: &MarkovState, _ego: usize, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..world.actions.len())
    }
}

pub struct ConstantPolicy {
    pub action: usize,
}

impl Policy for ConstantPolicy {
    fn act(&self, _world: &World, _state: &MarkovState, _ego: usize, _rng: &mut ChaCha8Rng) -> usize {
        self.action
    }
}

/// A learned tree acting as the live controller. Only the features the tree tests are evaluated.
pub struct TreePolicy {
    tree: DecisionTree,
    program: FeatureProgram,
    /// Column of each evaluated feature in the tree's input vector.
    columns: Vec<usize>,
}

impl TreePolicy {
    pub fn new(tree: DecisionTree) -> Result<Self> {
        let all = FeatureSet::new(
            tree.feature_names()
                .iter()
                .map(|n| crate::features::FeatureExpr::parse(n))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let columns = tree.used_features();
        let program = FeatureProgram::compile(&all.select(&columns));
        Ok(TreePolicy { tree, program, columns })
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn predict(&self, state: &MarkovState, world: &World, ego: usize) -> Result<usize> {
        let ctx = EvalContext { state, topology: &world.topology, ego };
        let values = self.program.eval(&ctx);
        let mut input = vec![0.0; self.tree.n_features()];
        for (&c, v) in self.columns.iter().zip(values) {
            input[c] = v;
        }
        self.tree.predict(&input)
    }
}

impl Policy for TreePolicy {
    fn act(&self, world: &World, state: &MarkovState, ego: usize, _rng: &mut ChaCha8Rng) -> usize {
        // Feature sentinels keep every input finite, so prediction cannot fail here.
        self.predict(state, world, ego).unwrap_or_else(|e| panic!("tree prediction failed: {e}"))
    }
}

/// Rejects action indices outside the action space.
pub fn check_action(action: usize, world: &World) -> Result<usize> {
    if action < world.actions.len() {
        Ok(action)
    } else {
        Err(Error::Config(format!("action {action} outside 0..{}", world.actions.len())))
    }
}

use super::loss::LossFunction;
use super::model::DecisionTree;

/// Link strengths within this distance of the minimum are collapsed together.
pub const ALPHA_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PruneStep {
    pub alpha: f64,
    pub tree: DecisionTree,
}

/// Nested trees from the fully grown tree (α = 0) down to the lone root.
#[derive(Debug, Clone)]
pub struct PruneSequence {
    steps: Vec<PruneStep>,
}

impl PruneSequence {
    pub fn steps(&self) -> &[PruneStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, level: usize) -> Option<&DecisionTree> {
        self.steps.get(level).map(|s| &s.tree)
    }

    pub fn full(&self) -> &DecisionTree {
        &self.steps[0].tree
    }

    /// Checks nesting, strictly increasing α and a root-only final tree.
    pub fn is_consistent(&self) -> bool {
        let nested = self.steps.windows(2).all(|w| w[1].alpha > w[0].alpha && w[1].tree.is_pruning_of(&w[0].tree));
        nested && self.steps[0].alpha == 0.0 && self.steps.last().is_some_and(|s| s.tree.n_leaves() == 1)
    }
}

/// Per-node subtree risk and leaf count, for nodes of the current tree.
fn subtree_stats(tree: &DecisionTree, risk: &[f64]) -> Vec<(f64, usize)> {
    let nodes = tree.nodes();
    let mut stats = vec![(0.0, 0); nodes.len()];
    // Children have larger ids than parents.
    for i in (0..nodes.len()).rev() {
        stats[i] = match nodes[i].split {
            None => (risk[i], 1),
            Some(s) => (stats[s.left].0 + stats[s.right].0, stats[s.left].1 + stats[s.right].1),
        };
    }
    stats
}

/// Weakest-link pruning with training risk `R(t) = (1/N) Σ ℓ(label(t), a_i)` over the rows at `t`.
///
/// A zero first breakpoint is absorbed into the α = 0 tree.
pub fn mccp(tree: &DecisionTree, loss: &LossFunction) -> PruneSequence {
    let total = tree.root().n_rows().max(1) as f64;
    let mut steps: Vec<PruneStep> = vec![PruneStep { alpha: 0.0, tree: tree.clone() }];
    loop {
        let current = &steps.last().expect("nonempty").tree;
        if current.n_leaves() == 1 {
            break;
        }
        let risk: Vec<f64> = current.nodes().iter().map(|n| loss.cost(n.label, &n.counts) / total).collect();
        let stats = subtree_stats(current, &risk);
        let strength: Vec<Option<f64>> = current
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| n.split.map(|_| ((risk[i] - stats[i].0) / (stats[i].1 - 1) as f64).max(0.0)))
            .collect();
        let alpha = strength.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let weakest: Vec<bool> = strength.iter().map(|g| g.is_some_and(|g| g <= alpha + ALPHA_TOL)).collect();
        let pruned = current.collapse(&weakest);
        let last = steps.last_mut().expect("nonempty");
        if alpha <= last.alpha + ALPHA_TOL {
            last.tree = pruned;
        } else {
            steps.push(PruneStep { alpha, tree: pruned });
        }
    }
    PruneSequence { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::tree::grow;
    use proptest::prelude::*;

    #[test]
    fn stump_sequence() {
        let d = Dataset::from_rows(
            vec!["x".into()],
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0, 0, 2, 2],
            5,
        )
        .unwrap();
        let loss = LossFunction::absolute(5);
        let seq = mccp(&grow(&d, &loss).unwrap(), &loss);
        assert_eq!(seq.len(), 2);
        assert!((seq.steps()[1].alpha - 1.0).abs() < 1e-15);
        assert_eq!(seq.get(1).unwrap().n_leaves(), 1);
        assert_eq!(seq.get(1).unwrap().root().label, 0);
        assert!(seq.is_consistent());
    }

    #[test]
    fn single_leaf_sequence() {
        let d = Dataset::from_rows(vec!["x".into()], vec![vec![1.0], vec![2.0]], vec![3, 3], 5).unwrap();
        let loss = LossFunction::absolute(5);
        let seq = mccp(&grow(&d, &loss).unwrap(), &loss);
        assert_eq!(seq.len(), 1);
        assert!(seq.is_consistent());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sequences_are_nested(
            rows in prop::collection::vec((prop::collection::vec(0i32..10, 3), 0usize..5), 1..120),
            zero_one in any::<bool>(),
        ) {
            let d = Dataset::from_rows(
                vec!["a".into(), "b".into(), "c".into()],
                rows.iter().map(|r| r.0.iter().map(|&v| f64::from(v)).collect()).collect(),
                rows.iter().map(|r| r.1).collect(),
                5,
            ).unwrap();
            let loss = if zero_one { LossFunction::zero_one(5) } else { LossFunction::absolute(5) };
            let t = grow(&d, &loss).unwrap();
            let seq = mccp(&t, &loss);
            prop_assert!(seq.is_consistent());
            prop_assert_eq!(seq.steps().last().unwrap().tree.root().label, loss.medoid(t.root().counts.as_slice()));
            let leaves: Vec<usize> = seq.steps().iter().map(|s| s.tree.n_leaves()).collect();
            prop_assert!(leaves.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

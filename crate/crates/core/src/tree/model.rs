use crate::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// Every node keeps its training class counts and its medoid label, so any internal
/// node can be collapsed into a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub counts: Vec<usize>,
    pub label: usize,
    pub split: Option<SplitRule>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn n_rows(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Binary axis-aligned classification tree. Node 0 is the root; children follow parents.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    feature_names: Vec<String>,
    n_classes: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub(crate) fn from_parts(feature_names: Vec<String>, n_classes: usize, nodes: Vec<Node>) -> Result<Self> {
        let tree = DecisionTree { feature_names, n_classes, nodes };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("malformed tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return bad(format!("node {i} reached twice"));
            }
            let node = &self.nodes[i];
            if node.counts.len() != self.n_classes || node.label >= self.n_classes {
                return bad(format!("node {i} has inconsistent classes"));
            }
            if let Some(s) = node.split {
                if s.feature >= self.feature_names.len() || !s.threshold.is_finite() {
                    return bad(format!("node {i} has an invalid test"));
                }
                for c in [s.left, s.right] {
                    if c <= i || c >= self.nodes.len() {
                        return bad(format!("node {i} has child {c}"));
                    }
                    stack.push(c);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes".into());
        }
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    /// Leaf reached by `x`, without input checks.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] < s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict_unchecked(&self, x: &[f64]) -> usize {
        self.nodes[self.leaf_of(x)].label
    }

    /// Rejects inputs of the wrong width or with non-finite values.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features() {
            return Err(Error::InvalidInput(format!("{} inputs for {} features", x.len(), self.n_features())));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value for `{}`", self.feature_names[j])));
        }
        Ok(self.predict_unchecked(x))
    }

    /// Fraction of rows whose label the tree reproduces.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.n_rows() == 0 {
            return f64::NAN;
        }
        let hits = (0..data.n_rows()).filter(|&i| self.predict_unchecked(data.row(i)) == data.labels()[i]).count();
        hits as f64 / data.n_rows() as f64
    }

    /// Sorted indices of the features tested by some internal node.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self.nodes.iter().filter_map(|n| n.split.map(|s| s.feature)).collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn used_feature_names(&self) -> Vec<String> {
        self.used_features().into_iter().map(|j| self.feature_names[j].clone()).collect()
    }

    /// The same tree over the given feature columns only; every tested feature must be kept.
    pub fn restrict(&self, columns: &[usize]) -> Result<DecisionTree> {
        let mut nodes = self.nodes.clone();
        for n in &mut nodes {
            if let Some(s) = &mut n.split {
                s.feature = columns.iter().position(|&c| c == s.feature).ok_or_else(|| {
                    Error::InvalidInput(format!("feature `{}` is tested but dropped", self.feature_names[s.feature]))
                })?;
            }
        }
        let names = columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        DecisionTree::from_parts(names, self.n_classes, nodes)
    }

    /// Copy with the marked internal nodes turned into leaves and orphans removed.
    pub(crate) fn collapse(&self, collapse: &[bool]) -> DecisionTree {
        let mut nodes = Vec::new();
        fn copy(t: &DecisionTree, i: usize, collapse: &[bool], out: &mut Vec<Node>) -> usize {
            let id = out.len();
            let src = &t.nodes[i];
            out.push(Node { counts: src.counts.clone(), label: src.label, split: None });
            if let (Some(s), false) = (src.split, collapse[i]) {
                let left = copy(t, s.left, collapse, out);
                let right = copy(t, s.right, collapse, out);
                out[id].split = Some(SplitRule { left, right, ..s });
            }
            id
        }
        copy(self, 0, collapse, &mut nodes);
        DecisionTree { feature_names: self.feature_names.clone(), n_classes: self.n_classes, nodes }
    }

    /// True when `self` is `other` with zero or more internal nodes collapsed into leaves.
    pub fn is_pruning_of(&self, other: &DecisionTree) -> bool {
        fn go(a: &DecisionTree, i: usize, b: &DecisionTree, j: usize) -> bool {
            let (x, y) = (&a.nodes[i], &b.nodes[j]);
            if x.counts != y.counts || x.label != y.label {
                return false;
            }
            match (x.split, y.split) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(s), Some(t)) => {
                    s.feature == t.feature
                        && s.threshold == t.threshold
                        && go(a, s.left, b, t.left)
                        && go(a, s.right, b, t.right)
                }
            }
        }
        self.feature_names == other.feature_names && go(self, 0, other, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> DecisionTree {
        let leaf = |counts: Vec<usize>, label| Node { counts, label, split: None };
        DecisionTree::from_parts(
            vec!["x".into(), "y".into()],
            3,
            vec![
                Node {
                    counts: vec![2, 0, 2],
                    label: 0,
                    split: Some(SplitRule { feature: 1, threshold: 2.5, left: 1, right: 2 }),
                },
                leaf(vec![2, 0, 0], 0),
                leaf(vec![0, 0, 2], 2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn boundary_goes_right() {
        let t = stump();
        assert_eq!(t.predict(&[0.0, 1.0]).unwrap(), 0);
        assert_eq!(t.predict(&[0.0, 2.5]).unwrap(), 2);
        assert!(t.predict(&[0.0, f64::NAN]).is_err());
        assert!(t.predict(&[f64::INFINITY, 1.0]).is_err());
        assert!(t.predict(&[1.0]).is_err());
    }

    #[test]
    fn root_only_and_used_features() {
        let t = stump();
        assert_eq!(t.used_features(), vec![1]);
        let root = t.collapse(&[true, false, false]);
        assert_eq!(root.n_leaves(), 1);
        assert!(root.used_features().is_empty());
        assert_eq!(root.predict(&[9.0, -9.0]).unwrap(), 0);
        assert!(root.is_pruning_of(&t));
        assert!(!t.is_pruning_of(&root));
    }

    #[test]
    fn restriction_keeps_predictions() {
        let t = stump();
        let r = t.restrict(&[1]).unwrap();
        assert_eq!(r.predict(&[3.0]).unwrap(), 2);
        assert!(t.restrict(&[0]).is_err());
    }

    #[test]
    fn rejects_malformed() {
        let bad = DecisionTree::from_parts(
            vec!["x".into()],
            2,
            vec![Node { counts: vec![1, 1], label: 0, split: Some(SplitRule { feature: 0, threshold: 0.0, left: 0, right: 0 }) }],
        );
        assert!(bad.is_err());
    }
}

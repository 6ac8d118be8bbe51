use rayon::prelude::*;

use super::loss::LossFunction;
use super::model::{DecisionTree, Node, SplitRule};
use super::split::{best_split_sorted, Split, SCORE_EPS};
use crate::dataset::Dataset;
use crate::{Error, Result};

/// Splits must lower the impurity by more than this.
pub const MIN_DECREASE: f64 = 1e-12;

/// Below this many (rows × features) a node's split search runs on one thread.
const PARALLEL_WORK: usize = 1 << 14;

struct Grower<'a> {
    columns: Vec<Vec<f64>>,
    labels: &'a [usize],
    loss: &'a LossFunction,
    /// Per feature, row indices sorted by value; each node owns one range in all of them.
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, lo: usize, hi: usize) -> Vec<usize> {
        let mut c = vec![0; self.loss.n_classes()];
        for &r in &self.order[0][lo..hi] {
            c[self.labels[r as usize]] += 1;
        }
        c
    }

    fn split_on(&self, feature: usize, lo: usize, hi: usize, counts: &[usize]) -> Option<Split> {
        let rows = &self.order[feature][lo..hi];
        let col = &self.columns[feature];
        let values: Vec<f64> = rows.iter().map(|&r| col[r as usize]).collect();
        let labels: Vec<usize> = rows.iter().map(|&r| self.labels[r as usize]).collect();
        best_split_sorted(&values, &labels, counts, self.loss)
    }

    /// Lowest score across features; near-equal scores keep the lower feature index.
    fn best(&self, lo: usize, hi: usize, counts: &[usize]) -> Option<(usize, Split)> {
        let f = self.columns.len();
        let per_feature: Vec<Option<Split>> = if (hi - lo) * f >= PARALLEL_WORK {
            (0..f).into_par_iter().map(|j| self.split_on(j, lo, hi, counts)).collect()
        } else {
            (0..f).map(|j| self.split_on(j, lo, hi, counts)).collect()
        };
        let mut best: Option<(usize, Split)> = None;
        for (j, s) in per_feature.into_iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|(_, b)| s.score < b.score - SCORE_EPS) {
                    best = Some((j, s));
                }
            }
        }
        best
    }

    /// Stable partition of every feature's range so that left rows come first.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        let col = &self.columns[feature];
        let mut n_left = 0;
        for &r in &self.order[feature][lo..hi] {
            let left = col[r as usize] < threshold;
            self.goes_left[r as usize] = left;
            n_left += left as usize;
        }
        let goes_left = &self.goes_left;
        self.order.par_iter_mut().for_each(|order| {
            let slice = &mut order[lo..hi];
            let mut right = Vec::with_capacity(slice.len() - n_left);
            let mut w = 0;
            for i in 0..slice.len() {
                let r = slice[i];
                if goes_left[r as usize] {
                    slice[w] = r;
                    w += 1;
                } else {
                    right.push(r);
                }
            }
            slice[w..].copy_from_slice(&right);
        });
        lo + n_left
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let counts = self.counts(lo, hi);
        let id = self.nodes.len();
        self.nodes.push(Node { label: self.loss.medoid(&counts), counts: counts.clone(), split: None });
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            return id;
        }
        let Some((feature, split)) = self.best(lo, hi, &counts) else { return id };
        if split.decrease <= MIN_DECREASE {
            return id;
        }
        let mid = self.partition(lo, hi, feature, split.threshold);
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id].split = Some(SplitRule { feature, threshold: split.threshold, left, right });
        id
    }
}

/// Grows a tree until every leaf is pure or admits no impurity-reducing split.
pub fn grow(data: &Dataset, loss: &LossFunction) -> Result<DecisionTree> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot grow a tree on an empty dataset".into()));
    }
    if loss.n_classes() != data.n_classes() {
        return Err(Error::InvalidInput(format!(
            "loss covers {} classes, data has {}",
            loss.n_classes(),
            data.n_classes()
        )));
    }
    if data.n_rows() > u32::MAX as usize {
        return Err(Error::InvalidInput("too many rows".into()));
    }
    let n = data.n_rows();
    let columns: Vec<Vec<f64>> =
        (0..data.n_features()).into_par_iter().map(|j| (0..n).map(|i| data.value(i, j)).collect()).collect();
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value in training data".into()));
    }
    // A feature-less dataset still yields a root leaf; sort on a dummy order.
    let order_count = data.n_features().max(1);
    let order: Vec<Vec<u32>> = (0..order_count)
        .into_par_iter()
        .map(|j| {
            let mut o: Vec<u32> = (0..n as u32).collect();
            if let Some(col) = columns.get(j) {
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            }
            o
        })
        .collect();
    let mut g = Grower { columns, labels: data.labels(), loss, order, goes_left: vec![false; n], nodes: Vec::new() };
    g.build(0, n);
    DecisionTree::from_parts(data.names().to_vec(), data.n_classes(), g.nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::split::best_split;
    use proptest::prelude::*;

    fn data(rows: &[(Vec<f64>, usize)]) -> Dataset {
        let w = rows[0].0.len();
        Dataset::from_rows(
            (0..w).map(|j| format!("f{j}")).collect(),
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter().map(|r| r.1).collect(),
            5,
        )
        .unwrap()
    }

    #[test]
    fn separable_toy_is_a_stump() {
        let d = data(&[(vec![1.0], 0), (vec![2.0], 0), (vec![3.0], 2), (vec![4.0], 2)]);
        let t = grow(&d, &LossFunction::absolute(5)).unwrap();
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.root().split.unwrap().threshold, 2.5);
        assert_eq!(t.accuracy(&d), 1.0);
    }

    #[test]
    fn contradictory_rows_take_lowest_medoid() {
        let d = data(&[(vec![1.0], 0), (vec![1.0], 4)]);
        let t = grow(&d, &LossFunction::absolute(5)).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.root().label, 0);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let d = data(&[(vec![1.0], 0)]);
        assert!(grow(&d, &LossFunction::absolute(3)).is_err());
        let empty = Dataset::empty(vec!["x".into()], 5);
        assert!(grow(&empty, &LossFunction::absolute(5)).is_err());
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        (1usize..=6, 2usize..=64).prop_flat_map(|(w, n)| {
            prop::collection::vec((prop::collection::vec(0i32..6, w), 0usize..5), n).prop_map(|rows| {
                data(&rows.into_iter().map(|(x, a)| (x.into_iter().map(f64::from).collect(), a)).collect::<Vec<_>>())
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn root_split_is_globally_best(d in dataset_strategy()) {
            let loss = LossFunction::absolute(5);
            let t = grow(&d, &loss).unwrap();
            // Exhaustive search over (feature, threshold): lowest score, then lowest feature.
            let mut best: Option<(usize, Split)> = None;
            for j in 0..d.n_features() {
                let col: Vec<f64> = (0..d.n_rows()).map(|i| d.value(i, j)).collect();
                if let Some(s) = best_split(&col, d.labels(), &loss) {
                    if best.is_none_or(|(_, b)| s.score < b.score - SCORE_EPS) {
                        best = Some((j, s));
                    }
                }
            }
            match (t.root().split, best) {
                (Some(r), Some((j, s))) => {
                    prop_assert_eq!((r.feature, r.threshold), (j, s.threshold));
                }
                (None, b) => prop_assert!(b.is_none_or(|(_, s)| s.decrease <= MIN_DECREASE)),
                (Some(_), None) => prop_assert!(false, "split without a candidate"),
            }
        }

        #[test]
        fn fits_consistent_data(d in dataset_strategy()) {
            let t = grow(&d, &LossFunction::absolute(5)).unwrap();
            if !d.has_contradictions() {
                prop_assert_eq!(t.accuracy(&d), 1.0);
            }
            let used = t.used_features();
            let r = t.restrict(&used).unwrap();
            let narrow = d.select_columns(&used);
            for i in 0..d.n_rows() {
                prop_assert_eq!(t.predict(d.row(i)).unwrap(), r.predict(narrow.row(i)).unwrap());
            }
        }
    }
}

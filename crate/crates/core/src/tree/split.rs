use super::loss::LossFunction;

/// Scores closer than this are treated as equal, so ties resolve by position.
pub(crate) const SCORE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    /// Rows with value `< threshold` go left.
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurity.
    pub decrease: f64,
    /// `pair_sum(left)/n_left + pair_sum(right)/n_right`; lower is better.
    pub(crate) score: f64,
}

/// Midpoint of two consecutive distinct values that still separates them in floating point.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

/// Incremental pair sums while rows move from the right child to the left child.
struct Sweep<'a> {
    loss: &'a LossFunction,
    left: Vec<usize>,
    right: Vec<usize>,
    left_sum: f64,
    right_sum: f64,
}

impl Sweep<'_> {
    fn shift(&mut self, label: usize) {
        let row = self.loss.row(label);
        let dot = |counts: &[usize]| counts.iter().zip(row).map(|(&c, &l)| c as f64 * l).sum::<f64>();
        self.right[label] -= 1;
        self.right_sum -= 2.0 * dot(&self.right);
        self.left_sum += 2.0 * dot(&self.left);
        self.left[label] += 1;
    }
}

/// Best threshold on one feature, given its rows already sorted by value.
///
/// Returns `None` when the values are all equal. Equal scores resolve to the lowest threshold.
pub fn best_split_sorted(values: &[f64], labels: &[usize], counts: &[usize], loss: &LossFunction) -> Option<Split> {
    let n = values.len();
    if n < 2 || values[0] == values[n - 1] {
        return None;
    }
    let parent_sum = loss.pair_sum(counts);
    let mut sweep = Sweep {
        loss,
        left: vec![0; counts.len()],
        right: counts.to_vec(),
        left_sum: 0.0,
        right_sum: parent_sum,
    };
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n - 1 {
        sweep.shift(labels[i]);
        if values[i] == values[i + 1] {
            continue;
        }
        let (nl, nr) = ((i + 1) as f64, (n - i - 1) as f64);
        // Clamp away rounding drift below zero.
        let score = sweep.left_sum.max(0.0) / nl + sweep.right_sum.max(0.0) / nr;
        if best.is_none_or(|(b, _)| score < b - SCORE_EPS) {
            best = Some((score, i));
        }
    }
    best.map(|(score, i)| {
        let nf = n as f64;
        Split {
            threshold: midpoint(values[i], values[i + 1]),
            decrease: (parent_sum / nf - score) / nf,
            score,
        }
    })
}

/// Best threshold on one unsorted column.
pub fn best_split(values: &[f64], labels: &[usize], loss: &LossFunction) -> Option<Split> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let l: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let mut counts = vec![0; loss.n_classes()];
    for &a in labels {
        counts[a] += 1;
    }
    best_split_sorted(&v, &l, &counts, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let s = best_split(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 2, 2], &LossFunction::absolute(5)).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert!((s.decrease - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_columns() {
        let abs = LossFunction::absolute(5);
        assert!(best_split(&[3.0, 3.0, 3.0], &[0, 1, 4], &abs).is_none());
        let pure = best_split(&[1.0, 2.0, 3.0], &[1, 1, 1], &abs).unwrap();
        assert_eq!(pure.decrease, 0.0);
        assert_eq!(pure.threshold, 1.5);
    }

    #[test]
    fn threshold_separates_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let s = best_split(&[lo, hi], &[0, 4], &LossFunction::absolute(5)).unwrap();
        assert!(lo < s.threshold && s.threshold <= hi);
    }

    /// Exact rational score of a split under integer loss: (num, den) of S_L/n_L + S_R/n_R.
    fn exact_score(values: &[f64], labels: &[usize], thr: f64) -> (i128, i128) {
        let sum = |side: &[usize]| -> i128 {
            side.iter().flat_map(|&a| side.iter().map(move |&b| (a as i128 - b as i128).abs())).sum()
        };
        let left: Vec<usize> = values.iter().zip(labels).filter(|(v, _)| **v < thr).map(|(_, &a)| a).collect();
        let right: Vec<usize> = values.iter().zip(labels).filter(|(v, _)| **v >= thr).map(|(_, &a)| a).collect();
        let (nl, nr) = (left.len() as i128, right.len() as i128);
        (sum(&left) * nr + sum(&right) * nl, nl * nr)
    }

    proptest! {
        #[test]
        fn matches_exhaustive_oracle(
            rows in prop::collection::vec((0i32..8, 0usize..5), 2..64)
        ) {
            let values: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let got = best_split(&values, &labels, &LossFunction::absolute(5));
            if distinct.len() < 2 {
                prop_assert!(got.is_none());
                return Ok(());
            }
            let candidates: Vec<f64> = distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
            let mut best = candidates[0];
            let mut best_score = exact_score(&values, &labels, best);
            for &c in &candidates[1..] {
                let s = exact_score(&values, &labels, c);
                if s.0 * best_score.1 < best_score.0 * s.1 {
                    best = c;
                    best_score = s;
                }
            }
            prop_assert_eq!(got.unwrap().threshold, best);
        }
    }
}

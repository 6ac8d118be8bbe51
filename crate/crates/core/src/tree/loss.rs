use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pairwise loss over action indices, stored as a dense square table.
///
/// Invariants: zero diagonal, strictly positive off-diagonal, symmetric, finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LossFunction {
    n: usize,
    table: Vec<f64>,
}

impl LossFunction {
    pub fn from_table(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("loss table must be square and nonempty".into()));
        }
        for (a, row) in rows.iter().enumerate() {
            for (b, &l) in row.iter().enumerate() {
                let ok = l.is_finite() && if a == b { l == 0.0 } else { l > 0.0 && l == rows[b][a] };
                if !ok {
                    return Err(Error::Config(format!("loss entry ({a},{b}) = {l} violates the loss contract")));
                }
            }
        }
        Ok(LossFunction { n, table: rows.concat() })
    }

    /// `|a - a'|` on action indices.
    pub fn absolute(n: usize) -> Self {
        let table = (0..n).flat_map(|a| (0..n).map(move |b| a.abs_diff(b) as f64)).collect();
        LossFunction { n, table }
    }

    /// 0/1 loss; the impurity becomes Gini.
    pub fn zero_one(n: usize) -> Self {
        let table = (0..n).flat_map(|a| (0..n).map(move |b| if a == b { 0.0 } else { 1.0 })).collect();
        LossFunction { n, table }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.table[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.table[a * self.n..(a + 1) * self.n]
    }

    /// Total loss of predicting `label` for every counted row.
    pub fn cost(&self, label: usize, counts: &[usize]) -> f64 {
        counts.iter().enumerate().map(|(b, &c)| c as f64 * self.get(label, b)).sum()
    }

    /// The label with least total loss against `counts`; ties go to the lowest index.
    pub fn medoid(&self, counts: &[usize]) -> usize {
        let mut best = (0, f64::INFINITY);
        for a in 0..self.n {
            let c = self.cost(a, counts);
            if c < best.1 {
                best = (a, c);
            }
        }
        best.0
    }

    /// `Σ_a Σ_b counts[a]·counts[b]·ℓ(a,b)`, the impurity scaled by the squared total.
    pub fn pair_sum(&self, counts: &[usize]) -> f64 {
        let mut s = 0.0;
        for (a, &ca) in counts.iter().enumerate() {
            if ca > 0 {
                s += ca as f64 * self.cost(a, counts);
            }
        }
        s
    }
}

impl TryFrom<Vec<Vec<f64>>> for LossFunction {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        LossFunction::from_table(rows)
    }
}

impl From<LossFunction> for Vec<Vec<f64>> {
    fn from(loss: LossFunction) -> Self {
        loss.table.chunks(loss.n).map(<[f64]>::to_vec).collect()
    }
}

/// Expected pairwise loss between two independent draws from the class distribution.
pub fn impurity(counts: &[usize], loss: &LossFunction) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("impurity of an empty node".into()));
    }
    if counts.len() != loss.n_classes() {
        return Err(Error::InvalidInput(format!("{} counts for {} classes", counts.len(), loss.n_classes())));
    }
    let n = total as f64;
    Ok(loss.pair_sum(counts) / (n * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        let abs = LossFunction::absolute(5);
        assert_eq!(impurity(&[0, 0, 10, 0, 0], &abs).unwrap(), 0.0);
        assert_eq!(impurity(&[5, 5], &LossFunction::zero_one(2)).unwrap(), 0.5);
        let three = LossFunction::absolute(3);
        assert!((impurity(&[1, 1, 1], &three).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!(impurity(&[0, 0, 0], &three).is_err());
    }

    #[test]
    fn medoid_ties_go_low() {
        let abs = LossFunction::absolute(5);
        assert_eq!(abs.medoid(&[1, 0, 0, 0, 1]), 0);
        assert_eq!(abs.medoid(&[1, 0, 0, 0, 2]), 4);
        assert_eq!(abs.medoid(&[1, 1, 0, 1, 1]), 1);
    }

    #[test]
    fn table_contract() {
        assert!(LossFunction::from_table(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(LossFunction::from_table(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(LossFunction::from_table(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(LossFunction::from_table(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        let json = serde_json::to_string(&LossFunction::absolute(3)).unwrap();
        assert_eq!(json, "[[0.0,1.0,2.0],[1.0,0.0,1.0],[2.0,1.0,0.0]]");
        assert!(serde_json::from_str::<LossFunction>("[[0.0,-1.0],[-1.0,0.0]]").is_err());
    }

    proptest! {
        #[test]
        fn zero_one_is_gini(counts in prop::collection::vec(0usize..50, 2..7)) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let n: usize = counts.iter().sum();
            let gini = 1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>();
            let i = impurity(&counts, &LossFunction::zero_one(counts.len())).unwrap();
            prop_assert!((i - gini).abs() < 1e-12);
        }

        #[test]
        fn zero_iff_pure(counts in prop::collection::vec(0usize..20, 5)) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let pure = counts.iter().filter(|&&c| c > 0).count() == 1;
            let i = impurity(&counts, &LossFunction::absolute(5)).unwrap();
            prop_assert_eq!(i == 0.0, pure);
        }
    }
}

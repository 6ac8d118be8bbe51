//! Depth-bounded enumeration of candidate features.
//!
//! Entity terms (vehicles and junction endpoints) are grown from `ego` by the navigation
//! operations `fj`, `fa`, `ba` and `twin`, never undoing the previous step (`twin(twin(_))`,
//! `fa(ba(_))`, `ba(fa(_))`). Scalars are then formed as:
//!
//! * `speed(v)` for every vehicle term;
//! * one separation per navigation hop, measured forward along the track:
//!   `sep(pos(child), pos(parent))` for `fj`/`fa`, `sep(pos(parent), pos(child))` for `ba`
//!   (`twin` hops change loop and have no separation);
//! * `sub(x, y)` for ordered pairs of distinct speeds or hop separations that lie on one
//!   navigation chain, i.e. one underlying entity term contains the other.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::expr::{Expr, FeatureExpr, Op};
use crate::{Error, Result};

/// Version tag of the enumeration grammar, recorded alongside feature sets.
pub const GRAMMAR_VERSION: &str = "hop-chain-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: Vec<FeatureExpr>,
    /// Recursion depth used to generate the set, if it came from enumeration.
    pub depth: Option<usize>,
    pub grammar: String,
}

impl FeatureSet {
    /// Rejects duplicate canonical strings.
    pub fn new(features: Vec<FeatureExpr>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(f.canonical()) {
                return Err(Error::InvalidInput(format!("duplicate feature `{f}`")));
            }
        }
        Ok(FeatureSet { features, depth: None, grammar: "explicit".into() })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureExpr] {
        &self.features
    }

    pub fn get(&self, i: usize) -> Option<&FeatureExpr> {
        self.features.get(i)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.canonical().to_string()).collect()
    }

    pub fn position(&self, canonical: &str) -> Option<usize> {
        self.features.iter().position(|f| f.canonical() == canonical)
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.position(canonical).is_some()
    }

    /// Sub-set by column index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            depth: self.depth,
            grammar: self.grammar.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            grammar: &'a str,
            depth: Option<usize>,
            features: Vec<&'a str>,
        }
        let out = Out {
            grammar: &self.grammar,
            depth: self.depth,
            features: self.features.iter().map(|f| f.canonical()).collect(),
        };
        serde_json::to_string_pretty(&out).expect("feature set serializes")
    }

    /// Accepts either the object written by [`FeatureSet::to_json`] or a bare list of strings.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum In {
            Bare(Vec<String>),
            Full { grammar: String, depth: Option<usize>, features: Vec<String> },
        }
        let (names, grammar, depth) = match serde_json::from_str::<In>(text)? {
            In::Bare(names) => (names, "explicit".to_string(), None),
            In::Full { grammar, depth, features } => (features, grammar, depth),
        };
        let features = names.iter().map(|n| FeatureExpr::parse(n)).collect::<Result<Vec<_>>>()?;
        let mut set = FeatureSet::new(features)?;
        set.grammar = grammar;
        set.depth = depth;
        Ok(set)
    }
}

struct Entity {
    expr: Expr,
    depth: usize,
    is_vehicle: bool,
}

fn backtracks(op: Op, parent: &Expr) -> bool {
    matches!(
        (op, parent),
        (Op::Twin, Expr::App(Op::Twin, _)) | (Op::Fa, Expr::App(Op::Ba, _)) | (Op::Ba, Expr::App(Op::Fa, _))
    )
}

fn entities(max_depth: usize) -> Vec<Entity> {
    let mut all = vec![Entity { expr: Expr::Ego, depth: 0, is_vehicle: true }];
    let mut frontier = 0..1;
    for depth in 1..=max_depth {
        let mut next = Vec::new();
        for parent in &all[frontier.clone()] {
            let ops: &[Op] = if parent.is_vehicle { &[Op::Fj, Op::Fa, Op::Ba] } else { &[Op::Fa, Op::Ba, Op::Twin] };
            for &op in ops {
                if backtracks(op, &parent.expr) {
                    continue;
                }
                let is_vehicle = matches!(op, Op::Fa | Op::Ba);
                next.push(Entity { expr: Expr::App(op, vec![parent.expr.clone()]), depth, is_vehicle });
            }
        }
        let start = all.len();
        all.extend(next);
        frontier = start..all.len();
    }
    all
}

/// Forward separation across the hop that produced `child`, if that hop stays on one loop.
fn hop_separation(child: &Expr) -> Option<Expr> {
    let Expr::App(op, args) = child else { return None };
    let parent = args[0].clone();
    match op {
        Op::Fj | Op::Fa => Some(Expr::sep(child.clone().pos(), parent.pos())),
        Op::Ba => Some(Expr::sep(parent.pos(), child.clone().pos())),
        _ => None,
    }
}

/// All features of depth at most `r`, ordered by depth then canonical string.
pub fn enumerate_features(r: usize) -> Result<FeatureSet> {
    if r == 0 {
        return Err(Error::InvalidInput("recursion depth must be at least 1".into()));
    }
    // Entities feeding a scalar need at least one more operation on top.
    let ents = entities(r - 1);
    let mut speeds: Vec<(Expr, &Expr)> = Vec::new();
    let mut seps: Vec<(Expr, &Expr)> = Vec::new();
    for e in &ents {
        if e.is_vehicle {
            speeds.push((e.expr.clone().speed(), &e.expr));
        }
        if e.depth + 2 <= r {
            if let Some(s) = hop_separation(&e.expr) {
                seps.push((s, &e.expr));
            }
        }
    }
    let mut out: BTreeSet<(usize, String)> = BTreeSet::new();
    let mut push = |e: Expr| {
        out.insert((e.depth(), e.to_string()));
    };
    for group in [&speeds, &seps] {
        for (x, _) in group.iter() {
            push(x.clone());
        }
        for (x, ex) in group.iter() {
            for (y, ey) in group.iter() {
                if x == y || x.depth().max(y.depth()) + 1 > r {
                    continue;
                }
                if ex.contains(ey) || ey.contains(ex) {
                    push(Expr::sub(x.clone(), y.clone()));
                }
            }
        }
    }
    let features = out.into_iter().map(|(_, s)| FeatureExpr::parse(&s)).collect::<Result<Vec<_>>>()?;
    let mut set = FeatureSet::new(features)?;
    set.depth = Some(r);
    set.grammar = GRAMMAR_VERSION.to_string();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::expr::signatures;

    #[test]
    fn depth_one_is_ego_speed() {
        let set = enumerate_features(1).unwrap();
        assert_eq!(set.names(), vec!["speed(ego)".to_string()]);
        assert!(enumerate_features(0).is_err());
    }

    #[test]
    fn hand_enumeration_depth_three() {
        // Vehicles of depth <= 2 without backtracking: ego, fa, ba, fa(fa), ba(ba),
        // fa(fj), ba(fj) -> 7 speeds. Hops of depth-1 children: fj, fa, ba -> 3 separations.
        // Chain-related speed pairs at depth <= 2 operands: (ego, fa(ego)), (ego, ba(ego)),
        // both orders -> 4 subs.
        let set = enumerate_features(3).unwrap();
        assert_eq!(set.len(), 14);
        assert!(set.contains("sep(pos(fj(ego)),pos(ego))"));
        assert!(set.contains("sep(pos(ego),pos(ba(ego)))"));
        assert!(set.contains("sub(speed(ego),speed(fa(ego)))"));
        assert!(set.contains("speed(fa(fj(ego)))"));
    }

    #[test]
    fn counts_by_depth() {
        let counts: Vec<usize> = (1..=6).map(|r| enumerate_features(r).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 3, 14, 42, 130, 380]);
    }

    #[test]
    fn monotone_in_depth() {
        let small = enumerate_features(5).unwrap();
        let big = enumerate_features(6).unwrap();
        for f in small.features() {
            assert!(big.contains(f.canonical()), "{f}");
        }
    }

    #[test]
    fn well_sorted_bounded_and_ordered() {
        let set = enumerate_features(6).unwrap();
        let sigs = signatures();
        let mut prev = (0, String::new());
        for f in set.features() {
            assert!(f.depth() <= 6);
            assert!(f.sort().is_scalar());
            let key = (f.depth(), f.canonical().to_string());
            assert!(key > prev, "ordering broken at {f}");
            prev = key;
            assert_eq!(FeatureExpr::parse(f.canonical()).unwrap(), *f);
            check_sorts(f.expr(), &sigs);
        }
    }

    fn check_sorts(e: &Expr, sigs: &[crate::features::expr::OperationSig]) {
        if let Expr::App(op, args) = e {
            let ins: Vec<_> = args.iter().map(|a| a.sort().unwrap()).collect();
            assert!(sigs.iter().any(|s| s.op == *op && s.inputs == ins), "{e}");
            args.iter().for_each(|a| check_sorts(a, sigs));
        }
    }

    #[test]
    fn json_forms() {
        let set = enumerate_features(3).unwrap();
        let back = FeatureSet::from_json(&set.to_json()).unwrap();
        assert_eq!(back, set);
        let bare = FeatureSet::from_json(r#"["speed(ego)", "sep(pos(fa(ego)),pos(ego))"]"#).unwrap();
        assert_eq!(bare.len(), 2);
        assert!(FeatureSet::from_json(r#"["speed(ego)", "speed(ego)"]"#).is_err());
    }
}

//! Feature evaluation against simulator states.
//!
//! Missing entities propagate as `None`. At the scalar boundary they become sentinels:
//! the speed of a missing vehicle is 0, and a separation involving a missing position or
//! spanning two loops equals the length of the ego vehicle's loop.

use std::collections::HashMap;

use super::enumerate::FeatureSet;
use super::expr::{Expr, Op};
use crate::sim::{
    anchor_point, forward_distance, next_junction_ahead, next_vehicle_ahead, next_vehicle_behind, Anchor,
    JunctionEnd, MarkovState, TrackPoint, TrackTopology,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Vehicle(Option<usize>),
    Junction(Option<JunctionEnd>),
    Position(Option<TrackPoint>),
    Scalar(f64),
}

impl Value {
    pub fn scalar(self) -> f64 {
        match self {
            Value::Scalar(x) => x,
            other => panic!("expected a scalar, found {other:?}"),
        }
    }
}

/// What a feature is evaluated against: one state, seen from one vehicle.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub state: &'a MarkovState,
    pub topology: &'a TrackTopology,
    pub ego: usize,
}

impl EvalContext<'_> {
    fn ego_loop_length(&self) -> f64 {
        self.topology.loop_length(self.state.vehicles[self.ego].loop_idx)
    }

    fn apply(&self, op: Op, args: &[Value]) -> Value {
        let anchor = |v: Value| match v {
            Value::Vehicle(i) => i.map(Anchor::Vehicle),
            Value::Junction(j) => j.map(Anchor::Junction),
            _ => unreachable!("navigation from a non-entity"),
        };
        match (op, args) {
            (Op::Pos, [v]) => {
                Value::Position(anchor(*v).map(|a| anchor_point(self.state, self.topology, a)))
            }
            (Op::Speed, [Value::Vehicle(i)]) => Value::Scalar(i.map_or(0.0, |i| self.state.vehicles[i].speed)),
            (Op::Fj, [Value::Vehicle(i)]) => {
                Value::Junction(i.and_then(|i| next_junction_ahead(self.state, self.topology, i)))
            }
            (Op::Fa, [v]) => Value::Vehicle(anchor(*v).and_then(|a| next_vehicle_ahead(self.state, self.topology, a))),
            (Op::Ba, [v]) => {
                Value::Vehicle(anchor(*v).and_then(|a| next_vehicle_behind(self.state, self.topology, a)))
            }
            (Op::Twin, [Value::Junction(j)]) => Value::Junction(j.map(JunctionEnd::twin)),
            (Op::Sep, [Value::Position(p1), Value::Position(p2)]) => Value::Scalar(match (p1, p2) {
                (Some(p1), Some(p2)) if p1.loop_idx == p2.loop_idx => {
                    forward_distance(p2.position, p1.position, self.topology.loop_length(p1.loop_idx))
                }
                _ => self.ego_loop_length(),
            }),
            (Op::Sub, [Value::Scalar(x), Value::Scalar(y)]) => Value::Scalar(x - y),
            _ => unreachable!("ill-sorted application of {op:?}"),
        }
    }
}

/// Direct bottom-up evaluation of one term.
pub fn eval_expr(expr: &Expr, ctx: &EvalContext<'_>) -> Value {
    match expr {
        Expr::Ego => Value::Vehicle(Some(ctx.ego)),
        Expr::App(op, args) => {
            let vals: Vec<Value> = args.iter().map(|a| eval_expr(a, ctx)).collect();
            ctx.apply(*op, &vals)
        }
    }
}

/// Scalar value of a (scalar-sorted) feature term.
pub fn eval_feature(expr: &Expr, ctx: &EvalContext<'_>) -> f64 {
    eval_expr(expr, ctx).scalar()
}

/// A feature set compiled into a shared-subterm DAG, evaluated in one pass per row.
#[derive(Debug, Clone)]
pub struct FeatureProgram {
    nodes: Vec<(Option<Op>, Vec<usize>)>,
    outputs: Vec<usize>,
}

impl FeatureProgram {
    pub fn compile(features: &FeatureSet) -> Self {
        let mut nodes = Vec::new();
        let mut ids: HashMap<Expr, usize> = HashMap::new();
        fn intern(e: &Expr, nodes: &mut Vec<(Option<Op>, Vec<usize>)>, ids: &mut HashMap<Expr, usize>) -> usize {
            if let Some(&id) = ids.get(e) {
                return id;
            }
            let node = match e {
                Expr::Ego => (None, Vec::new()),
                Expr::App(op, args) => (Some(*op), args.iter().map(|a| intern(a, nodes, ids)).collect()),
            };
            nodes.push(node);
            ids.insert(e.clone(), nodes.len() - 1);
            nodes.len() - 1
        }
        let outputs = features.features().iter().map(|f| intern(f.expr(), &mut nodes, &mut ids)).collect();
        FeatureProgram { nodes, outputs }
    }

    pub fn width(&self) -> usize {
        self.outputs.len()
    }

    /// Appends one value per feature to `out`.
    pub fn eval_into(&self, ctx: &EvalContext<'_>, scratch: &mut Vec<Value>, out: &mut Vec<f64>) {
        scratch.clear();
        for (op, args) in &self.nodes {
            let v = match op {
                None => Value::Vehicle(Some(ctx.ego)),
                Some(op) => {
                    let vals: Vec<Value> = args.iter().map(|&a| scratch[a]).collect();
                    ctx.apply(*op, &vals)
                }
            };
            scratch.push(v);
        }
        out.extend(self.outputs.iter().map(|&o| scratch[o].scalar()));
    }

    pub fn eval(&self, ctx: &EvalContext<'_>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.eval_into(ctx, &mut Vec::with_capacity(self.nodes.len()), &mut out);
        out
    }
}

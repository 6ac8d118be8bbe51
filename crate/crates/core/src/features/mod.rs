//! Candidate feature synthesis: typed terms, enumeration, and evaluation.

mod enumerate;
mod eval;
mod expr;

pub use enumerate::{enumerate_features, FeatureSet, GRAMMAR_VERSION};
pub use eval::{eval_expr, eval_feature, EvalContext, FeatureProgram, Value};
pub use expr::{signatures, Expr, FeatureExpr, Op, OperationSig, Sort};

use crate::dataset::{Dataset, RowMeta};
use crate::sim::{EpisodeHistory, TrackTopology};
use rayon::prelude::*;

/// One row per (labelled time step, vehicle): the feature vector and that vehicle's action.
///
/// Columns follow the order of `features`; rows are ordered by time step, then vehicle.
pub fn evaluate_matrix(
    features: &FeatureSet,
    history: &EpisodeHistory,
    topology: &TrackTopology,
    episode: usize,
    n_classes: usize,
) -> Dataset {
    let program = FeatureProgram::compile(features);
    let labelled: Vec<_> = history.labelled().collect();
    let blocks: Vec<(Vec<f64>, Vec<usize>, Vec<RowMeta>)> = labelled
        .par_iter()
        .map(|(state, actions)| {
            let mut values = Vec::with_capacity(actions.len() * program.width());
            let mut scratch = Vec::new();
            let mut meta = Vec::with_capacity(actions.len());
            for ego in 0..actions.len() {
                program.eval_into(&EvalContext { state, topology, ego }, &mut scratch, &mut values);
                meta.push(RowMeta { episode, topology: history.topology.clone(), time: state.time, vehicle: ego, tag: None });
            }
            (values, actions.to_vec(), meta)
        })
        .collect();
    let mut data = Dataset::empty(features.names(), n_classes);
    for (values, labels, meta) in blocks {
        data.extend_rows(values, labels, meta);
    }
    data
}

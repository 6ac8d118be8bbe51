//! Orchestration of the full pipeline and the report it produces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::data::{derive_seed, rebalance_indices, rebalance_present_indices, split, stream, worlds, Collection};
use super::metrics::{accuracy, mtbf, FailureStats};
use crate::dataset::{Dataset, SplitTag};
use crate::policy::{RandomPolicy, TreePolicy};
use crate::sim::{Policy, World};
use crate::tree::{grow, mccp, DecisionTree, PruneSequence};
use crate::{Error, Result};

/// Training and held-out episodes of one configuration.
pub struct Simulation {
    pub train: Collection,
    pub test: Collection,
}

/// Runs the target policy on the training and test topologies.
pub fn simulate(cfg: &ExperimentConfig, base: &Path) -> Result<Simulation> {
    let policy = cfg.policy.build(base)?;
    let run = |refs: &[String], episodes, stream| {
        Collection::run(worlds(refs, base)?, policy.as_ref(), cfg.vehicles, episodes, cfg.steps_per_episode, cfg.seed, stream)
    };
    Ok(Simulation {
        train: run(&cfg.train_topologies, cfg.episodes_per_topology, stream::TRAIN)?,
        test: run(&cfg.test_topologies, cfg.test_episodes, stream::TEST)?,
    })
}

/// The tagged training dataset plus one held-out dataset per test topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    pub train: Dataset,
    pub test: Vec<(String, Dataset)>,
}

pub fn n_classes(cfg: &ExperimentConfig, base: &Path) -> Result<usize> {
    Ok(ExperimentConfig::world(&cfg.train_topologies[0], base)?.actions.len())
}

/// Rebalances labels first so that only kept rows are featurized, then splits by episode.
pub fn build_datasets(cfg: &ExperimentConfig, sim: &Simulation, n_classes: usize) -> Result<Datasets> {
    let rows = sim.train.rows();
    let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
    let cap = cfg.dataset_size / n_classes;
    let keep = rebalance_indices(&labels, n_classes, Some(cap), derive_seed(cfg.seed, stream::REBALANCE, 0))?;
    let kept: Vec<_> = keep.iter().map(|&i| rows[i]).collect();
    let data = sim.train.featurize(&cfg.representation, &kept, n_classes)?;
    let train = split(&data, cfg.split.as_array(), derive_seed(cfg.seed, stream::SPLIT, 0))?;
    let mut test = Vec::new();
    for (w, world) in sim.test.worlds.iter().enumerate() {
        let rows: Vec<_> = sim.test.rows().into_iter().filter(|r| sim.test.episodes[r.episode].0 == w).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
        let keep = rebalance_present_indices(&labels, n_classes, derive_seed(cfg.seed, stream::REBALANCE, 1 + w as u64));
        let kept: Vec<_> = keep.iter().map(|&i| rows[i]).collect();
        test.push((world.topology.name.clone(), sim.test.featurize(&cfg.representation, &kept, n_classes)?));
    }
    Ok(Datasets { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub prune_index: usize,
    pub alpha: f64,
    pub leaves: usize,
    pub val_accuracy: f64,
    pub used_features: usize,
}

pub struct Training {
    pub sequence: PruneSequence,
    pub curve: Vec<CurvePoint>,
}

/// Grows on the train partition and prunes; the curve scores every tree on validation rows.
pub fn train(cfg: &ExperimentConfig, data: &Dataset) -> Result<Training> {
    let rows = data.with_tag(SplitTag::Train);
    let loss = cfg.loss.build(data.n_classes());
    let full = grow(&rows, &loss)?;
    let sequence = mccp(&full, &loss);
    let val = data.with_tag(SplitTag::Val);
    let curve = sequence
        .steps()
        .iter()
        .enumerate()
        .map(|(i, s)| CurvePoint {
            prune_index: i,
            alpha: s.alpha,
            leaves: s.tree.n_leaves(),
            val_accuracy: s.tree.accuracy(&val),
            used_features: s.tree.used_features().len(),
        })
        .collect();
    Ok(Training { sequence, curve })
}

/// A tree chosen for evaluation, with the name used in reports.
#[derive(Debug, Clone)]
pub struct SelectedTree {
    pub name: String,
    pub prune_index: usize,
    pub alpha: f64,
    pub tree: DecisionTree,
}

/// Index of the most accurate tree on validation rows; ties go to the smaller tree.
pub fn best_validation_index(curve: &[CurvePoint]) -> usize {
    let mut best = 0;
    for (i, p) in curve.iter().enumerate() {
        if p.val_accuracy >= curve[best].val_accuracy {
            best = i;
        }
    }
    best
}

/// The full tree, the configured prune levels that exist, and the best-validation tree.
pub fn select_trees(cfg: &ExperimentConfig, training: &Training) -> Vec<SelectedTree> {
    let steps = training.sequence.steps();
    let pick = |name: String, i: usize| SelectedTree { name, prune_index: i, alpha: steps[i].alpha, tree: steps[i].tree.clone() };
    let mut out = vec![pick("full".into(), 0)];
    for &level in &cfg.prune_levels {
        if level > 0 && level < steps.len() {
            out.push(pick(format!("prune-{level}"), level));
        }
    }
    out.push(pick("best-val".into(), best_validation_index(&training.curve)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub name: String,
    pub prune_index: usize,
    pub alpha: f64,
    pub leaves: usize,
    pub used_features: Vec<String>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// One (controller, topology) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMetrics {
    pub controller: String,
    pub topology: String,
    pub accuracy: Option<f64>,
    pub leaves: Option<usize>,
    pub used_features: Option<usize>,
    pub deployment: Option<FailureStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub policy: String,
    pub representation: String,
    pub feature_count: usize,
    pub rows: RowCounts,
    pub trees: Vec<TreeSummary>,
    pub topologies: Vec<TopologyMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per (controller, topology).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "controller",
            "topology",
            "accuracy",
            "leaves",
            "used_features",
            "mtbf",
            "episodes",
            "collisions",
            "stalls",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for m in &self.topologies {
            let d = m.deployment;
            w.write_record([
                m.controller.clone(),
                m.topology.clone(),
                opt(m.accuracy.map(|a| a.to_string())),
                opt(m.leaves.map(|a| a.to_string())),
                opt(m.used_features.map(|a| a.to_string())),
                opt(d.map(|d| d.mtbf.to_string())),
                opt(d.map(|d| d.episodes.to_string())),
                opt(d.map(|d| d.collisions.to_string())),
                opt(d.map(|d| d.stalls.to_string())),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn write_curve_csv(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn deploy(cfg: &ExperimentConfig, policy: &dyn Policy, world: &World, w: usize) -> Result<Option<FailureStats>> {
    cfg.deploy
        .map(|d| mtbf(policy, world, cfg.vehicles, d.episodes, d.max_steps, derive_seed(cfg.seed, stream::DEPLOY, w as u64)))
        .transpose()
}

fn representation_label(cfg: &ExperimentConfig) -> String {
    serde_json::to_value(&cfg.representation)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
        .unwrap_or_default()
}

/// Scores the selected trees on held-out rows and, if configured, deploys them, the target
/// policy and the uniform-random policy on every test topology.
pub fn evaluate(cfg: &ExperimentConfig, base: &Path, data: &Datasets, trees: &[SelectedTree]) -> Result<MetricsReport> {
    let test_worlds = worlds(&cfg.test_topologies, base)?;
    let mut summaries = Vec::new();
    let mut cells = Vec::new();
    let split_rows = |tag| data.train.with_tag(tag);
    let (tr, va, te) = (split_rows(SplitTag::Train), split_rows(SplitTag::Val), split_rows(SplitTag::Test));
    for t in trees {
        summaries.push(TreeSummary {
            name: t.name.clone(),
            prune_index: t.prune_index,
            alpha: t.alpha,
            leaves: t.tree.n_leaves(),
            used_features: t.tree.used_feature_names(),
            train_accuracy: t.tree.accuracy(&tr),
            val_accuracy: t.tree.accuracy(&va),
            test_accuracy: accuracy(&t.tree, &data.train, SplitTag::Test)?,
        });
        // Egocentric trees are scored but not deployed: their inputs are not symbolic features.
        let policy = match cfg.deploy {
            Some(_) if cfg.representation.feature_set()?.is_some() => Some(TreePolicy::new(t.tree.clone())?),
            _ => None,
        };
        for (w, (world, (name, rows))) in test_worlds.iter().zip(&data.test).enumerate() {
            let deployment = match &policy {
                Some(p) => deploy(cfg, p, world, w)?,
                None => None,
            };
            cells.push(TopologyMetrics {
                controller: t.name.clone(),
                topology: name.clone(),
                accuracy: (rows.n_rows() > 0).then(|| t.tree.accuracy(rows)),
                leaves: Some(t.tree.n_leaves()),
                used_features: Some(t.tree.used_features().len()),
                deployment,
            });
        }
    }
    if cfg.deploy.is_some() {
        let target = cfg.policy.build(base)?;
        for (label, policy) in [("target", target.as_ref()), ("random", &RandomPolicy as &dyn Policy)] {
            for (w, world) in test_worlds.iter().enumerate() {
                cells.push(TopologyMetrics {
                    controller: label.into(),
                    topology: world.topology.name.clone(),
                    accuracy: None,
                    leaves: None,
                    used_features: None,
                    deployment: deploy(cfg, policy, world, w)?,
                });
            }
        }
    }
    Ok(MetricsReport {
        seed: cfg.seed,
        policy: cfg.policy.label().into(),
        representation: representation_label(cfg),
        feature_count: data.train.n_features(),
        rows: RowCounts { train: tr.n_rows(), val: va.n_rows(), test: te.n_rows() },
        trees: summaries,
        topologies: cells,
    })
}

pub struct ExperimentOutcome {
    pub datasets: Datasets,
    pub training: Training,
    pub selected: Vec<SelectedTree>,
    pub report: MetricsReport,
}

/// collect → rebalance → split → grow → prune → select → evaluate.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let sim = simulate(cfg, base)?;
    let datasets = build_datasets(cfg, &sim, n_classes(cfg, base)?)?;
    let training = train(cfg, &datasets.train)?;
    let selected = select_trees(cfg, &training);
    let report = evaluate(cfg, base, &datasets, &selected)?;
    Ok(ExperimentOutcome { datasets, training, selected, report })
}

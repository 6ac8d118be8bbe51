//! Pipeline stages. Each reads its inputs from the run directory, rebuilding missing or stale
//! upstream artifacts first, except trees, which `evaluate` never retrains.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use i2l_core::dataset::Dataset;
use i2l_core::harness::{
    build_datasets, evaluate, n_classes, simulate, train, worlds, write_curve_csv, Collection, Datasets,
    ExperimentConfig, MetricsReport, Representation, SelectedTree, Simulation,
};
use i2l_core::harness::select_trees;
use i2l_core::sim::EpisodeHistory;
use i2l_core::tree::DecisionTree;
use i2l_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::{hash_config, now_unix, RunManifest, CONFIG_FILE};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub depth: Option<usize>,
}

pub struct Run {
    pub cfg: ExperimentConfig,
    base: PathBuf,
    out: PathBuf,
    manifest: RunManifest,
}

#[derive(Serialize, Deserialize)]
struct SelectedEntry {
    name: String,
    prune_index: usize,
    alpha: f64,
    path: String,
}

fn config_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{}: {other}", path.display())),
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() {
        io(path, std::fs::remove_dir_all(path))?;
    }
    io(path, std::fs::create_dir_all(path))
}

fn rel(path: &Path, out: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn episode_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("{i:05}.jsonl"))
}

fn test_stem(i: usize, topology: &str) -> String {
    let safe: String = topology.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("{i:02}-{safe}")
}

impl Run {
    /// Loads and validates the config, applies overrides and stores the resolved config.
    pub fn prepare(config: &Path, overrides: Overrides, out: &Path) -> Result<Run> {
        let mut cfg = ExperimentConfig::load(config).map_err(|e| config_error(config, e))?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(depth) = overrides.depth {
            match &mut cfg.representation {
                Representation::Enumerated { depth: d } => *d = depth,
                other => {
                    return Err(Error::Config(format!(
                        "representation: a depth override contradicts the fixed `{}` features",
                        serde_json::to_value(&*other).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default()
                    )))
                }
            }
        }
        cfg.validate()?;
        io(out, std::fs::create_dir_all(out))?;
        let text = cfg.to_json();
        let path = out.join(CONFIG_FILE);
        io(&path, std::fs::write(&path, &text))?;
        let manifest = RunManifest::open(out, &hash_config(&text), cfg.seed);
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Run { cfg, base, out: out.to_path_buf(), manifest })
    }

    fn finish(&mut self, stage: &str, started: u64, outputs: Vec<PathBuf>) -> Result<()> {
        let outputs = outputs.iter().map(|p| rel(p, &self.out)).collect();
        self.manifest.record(stage, started, outputs);
        self.manifest.write(&self.out)
    }

    pub fn simulate(&mut self) -> Result<Simulation> {
        let started = now_unix();
        let sim = simulate(&self.cfg, &self.base)?;
        let mut outputs = Vec::new();
        for (name, collection) in [("train", &sim.train), ("test", &sim.test)] {
            let dir = self.out.join("episodes").join(name);
            fresh_dir(&dir)?;
            for (i, (_, history)) in collection.episodes.iter().enumerate() {
                let path = episode_path(&dir, i);
                let mut w = BufWriter::new(io(&path, File::create(&path))?);
                io(&path, history.write_jsonl(&mut w).and_then(|_| w.flush()))?;
                outputs.push(path);
            }
        }
        self.finish("simulate", started, outputs)?;
        Ok(sim)
    }

    fn load_collection(&self, name: &str, refs: &[String], per_world: usize) -> Result<Collection> {
        let worlds = worlds(refs, &self.base)?;
        let dir = self.out.join("episodes").join(name);
        let mut episodes = Vec::new();
        for i in 0..worlds.len() * per_world {
            let path = episode_path(&dir, i);
            let history = EpisodeHistory::read_jsonl(BufReader::new(io(&path, File::open(&path))?))?;
            let w = i / per_world;
            if history.topology != worlds[w].topology.name {
                return Err(Error::InvalidInput(format!("{}: episode of topology `{}` where `{}` was expected", path.display(), history.topology, worlds[w].topology.name)));
            }
            episodes.push((w, history));
        }
        Ok(Collection { worlds, episodes })
    }

    fn simulation(&mut self) -> Result<Simulation> {
        if !self.manifest.is_current(&self.out, "simulate") {
            return self.simulate();
        }
        Ok(Simulation {
            train: self.load_collection("train", &self.cfg.train_topologies, self.cfg.episodes_per_topology)?,
            test: self.load_collection("test", &self.cfg.test_topologies, self.cfg.test_episodes)?,
        })
    }

    pub fn features(&mut self) -> Result<Datasets> {
        let sim = self.simulation()?;
        let started = now_unix();
        let data = build_datasets(&self.cfg, &sim, n_classes(&self.cfg, &self.base)?)?;
        let mut outputs = vec![self.out.join("dataset.csv"), self.out.join("dataset_meta.csv")];
        data.train.write_csv(&outputs[0])?;
        data.train.write_meta_csv(&outputs[1])?;
        let features = self.out.join("features.json");
        let text = match self.cfg.representation.feature_set()? {
            Some(set) => set.to_json(),
            None => serde_json::to_string_pretty(data.train.names())?,
        };
        io(&features, std::fs::write(&features, text))?;
        outputs.push(features);
        let test_dir = self.out.join("test");
        fresh_dir(&test_dir)?;
        for (i, (topology, rows)) in data.test.iter().enumerate() {
            let stem = test_stem(i, topology);
            let (csv, meta) = (test_dir.join(format!("{stem}.csv")), test_dir.join(format!("{stem}_meta.csv")));
            rows.write_csv(&csv)?;
            rows.write_meta_csv(&meta)?;
            outputs.extend([csv, meta]);
        }
        self.manifest.feature_count = Some(data.train.n_features());
        self.finish("features", started, outputs)?;
        Ok(data)
    }

    fn read_dataset(&self, csv: &Path, meta: &Path, n_classes: usize) -> Result<Dataset> {
        let mut data = Dataset::read_csv(csv, n_classes)?;
        data.read_meta_csv(meta)?;
        Ok(data)
    }

    fn datasets(&mut self) -> Result<Datasets> {
        if !self.manifest.is_current(&self.out, "features") {
            return self.features();
        }
        let k = n_classes(&self.cfg, &self.base)?;
        let train = self.read_dataset(&self.out.join("dataset.csv"), &self.out.join("dataset_meta.csv"), k)?;
        let mut test = Vec::new();
        for (i, world) in worlds(&self.cfg.test_topologies, &self.base)?.iter().enumerate() {
            let stem = test_stem(i, &world.topology.name);
            let dir = self.out.join("test");
            let rows = self.read_dataset(&dir.join(format!("{stem}.csv")), &dir.join(format!("{stem}_meta.csv")), k)?;
            test.push((world.topology.name.clone(), rows));
        }
        Ok(Datasets { train, test })
    }

    /// Grows and prunes; writes every tree of the sequence, the curve and the selection.
    pub fn train(&mut self) -> Result<()> {
        let data = self.datasets()?;
        let started = now_unix();
        let training = train(&self.cfg, &data.train)?;
        let dir = self.out.join("trees");
        fresh_dir(&dir)?;
        let mut outputs = Vec::new();
        for (k, step) in training.sequence.steps().iter().enumerate() {
            let path = dir.join(format!("tree-{k:03}.json"));
            step.tree.save(&path)?;
            outputs.push(path);
        }
        let curve = self.out.join("curve.csv");
        write_curve_csv(&training.curve, &curve)?;
        let selected: Vec<SelectedEntry> = select_trees(&self.cfg, &training)
            .into_iter()
            .map(|t| SelectedEntry {
                path: format!("trees/tree-{:03}.json", t.prune_index),
                name: t.name,
                prune_index: t.prune_index,
                alpha: t.alpha,
            })
            .collect();
        let selection = self.out.join("selected.json");
        io(&selection, std::fs::write(&selection, serde_json::to_string_pretty(&selected)?))?;
        outputs.extend([curve, selection]);
        self.finish("train", started, outputs)
    }

    /// Scores and deploys the selected trees. Missing tree files are an error.
    pub fn evaluate(&mut self) -> Result<MetricsReport> {
        let selection = self.out.join("selected.json");
        let text = io(&selection, std::fs::read_to_string(&selection))?;
        let entries: Vec<SelectedEntry> = serde_json::from_str(&text)?;
        let data = self.datasets()?;
        let started = now_unix();
        let mut trees = Vec::new();
        for e in entries {
            let tree = DecisionTree::load(&self.out.join(&e.path))?;
            if tree.feature_names() != data.train.names() {
                return Err(Error::InvalidInput(format!("{}: tree features differ from the dataset; rerun train", e.path)));
            }
            trees.push(SelectedTree { name: e.name, prune_index: e.prune_index, alpha: e.alpha, tree });
        }
        let report = evaluate(&self.cfg, &self.base, &data, &trees)?;
        let (json, csv) = (self.out.join("report.json"), self.out.join("report.csv"));
        io(&json, std::fs::write(&json, report.to_json()))?;
        report.write_csv(&csv)?;
        self.finish("evaluate", started, vec![json, csv])?;
        Ok(report)
    }

    /// Re-derives the CSV and a plain-text summary from the stored report.
    pub fn report(&mut self) -> Result<String> {
        let json = self.out.join("report.json");
        let report = MetricsReport::from_json(&io(&json, std::fs::read_to_string(&json))?)?;
        let started = now_unix();
        let csv = self.out.join("report.csv");
        report.write_csv(&csv)?;
        let text = summary(&report);
        let path = self.out.join("summary.txt");
        io(&path, std::fs::write(&path, &text))?;
        self.finish("report", started, vec![csv, path])?;
        Ok(text)
    }
}

fn summary(r: &MetricsReport) -> String {
    let mut s = format!(
        "policy {} | representation {} | {} features | rows train {} val {} test {}\n\n",
        r.policy, r.representation, r.feature_count, r.rows.train, r.rows.val, r.rows.test
    );
    s.push_str(&format!("{:<12} {:>6} {:>7} {:>5} {:>8} {:>8} {:>8}\n", "tree", "index", "leaves", "used", "train", "val", "test"));
    for t in &r.trees {
        s.push_str(&format!(
            "{:<12} {:>6} {:>7} {:>5} {:>8.4} {:>8.4} {:>8.4}\n",
            t.name,
            t.prune_index,
            t.leaves,
            t.used_features.len(),
            t.train_accuracy,
            t.val_accuracy,
            t.test_accuracy
        ));
    }
    s.push_str(&format!("\n{:<12} {:<10} {:>9} {:>10} {:>10} {:>7}\n", "controller", "topology", "accuracy", "mtbf", "collisions", "stalls"));
    for m in &r.topologies {
        let acc = m.accuracy.map_or("-".into(), |a| format!("{a:.4}"));
        let (mtbf, col, stall) = m
            .deployment
            .map_or(("-".into(), "-".into(), "-".into()), |d| (format!("{:.1}", d.mtbf), d.collisions.to_string(), d.stalls.to_string()));
        s.push_str(&format!("{:<12} {:<10} {:>9} {:>10} {:>10} {:>7}\n", m.controller, m.topology, acc, mtbf, col, stall));
    }
    s
}

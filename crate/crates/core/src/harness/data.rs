//! Episode collection, class rebalancing, episode-level splitting and featurization.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Representation};
use crate::dataset::{Dataset, RowMeta, SplitTag};
use crate::features::{EvalContext, FeatureProgram};
use crate::policy::egocentric_features;
use crate::sim::{run_episode, EpisodeHistory, Policy, World};
use crate::{Error, Result};

/// Independent seed streams for the pipeline stages.
pub mod stream {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const DEPLOY: u64 = 3;
    pub const REBALANCE: u64 = 4;
    pub const SPLIT: u64 = 5;
}

/// Deterministic sub-seed number `index` of `stream` under the base seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Episodes gathered under one controller, with the worlds they ran in.
#[derive(Debug, Clone)]
pub struct Collection {
    pub worlds: Vec<World>,
    /// (index into `worlds`, history), in collection order.
    pub episodes: Vec<(usize, EpisodeHistory)>,
}

/// One labelled (state, vehicle) pair of a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowRef {
    pub episode: usize,
    pub record: usize,
    pub vehicle: usize,
    pub label: usize,
}

impl Collection {
    /// Runs `episodes` seeded episodes per world. Episode seeds come from `stream`.
    pub fn run(
        worlds: Vec<World>,
        policy: &dyn Policy,
        vehicles: usize,
        episodes: usize,
        steps: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Collection> {
        let jobs: Vec<(usize, u64)> = (0..worlds.len())
            .flat_map(|w| (0..episodes).map(move |e| (w, (w * episodes + e) as u64)))
            .collect();
        let episodes = jobs
            .par_iter()
            .map(|&(w, k)| run_episode(&worlds[w], policy, vehicles, steps, derive_seed(seed, stream, k)).map(|h| (w, h)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Collection { worlds, episodes })
    }

    /// Every labelled pair, ordered by episode, time step, then vehicle.
    pub fn rows(&self) -> Vec<RowRef> {
        let mut out = Vec::new();
        for (e, (_, h)) in self.episodes.iter().enumerate() {
            for (r, rec) in h.records.iter().enumerate() {
                if let Some(actions) = &rec.actions {
                    out.extend(actions.iter().enumerate().map(|(v, &a)| RowRef { episode: e, record: r, vehicle: v, label: a }));
                }
            }
        }
        out
    }

    /// Feature rows for the given pairs, in the given order.
    pub fn featurize(&self, representation: &Representation, rows: &[RowRef], n_classes: usize) -> Result<Dataset> {
        let names = representation.names()?;
        let program = representation.feature_set()?.map(|set| FeatureProgram::compile(&set));
        let width = names.len();
        let chunks: Vec<Vec<f64>> = rows
            .par_chunks(256)
            .map(|chunk| {
                let mut values = Vec::with_capacity(chunk.len() * width);
                let mut scratch = Vec::new();
                for r in chunk {
                    let (w, h) = &self.episodes[r.episode];
                    let state = &h.records[r.record].state;
                    let topology = &self.worlds[*w].topology;
                    match (&program, representation) {
                        (Some(p), _) => {
                            p.eval_into(&EvalContext { state, topology, ego: r.vehicle }, &mut scratch, &mut values)
                        }
                        (None, Representation::Egocentric { neighbours }) => {
                            values.extend(egocentric_features(state, topology, r.vehicle, *neighbours))
                        }
                        (None, _) => unreachable!("symbolic representations compile to a program"),
                    }
                }
                values
            })
            .collect();
        let meta = rows
            .iter()
            .map(|r| {
                let (_, h) = &self.episodes[r.episode];
                RowMeta {
                    episode: r.episode,
                    topology: h.topology.clone(),
                    time: h.records[r.record].state.time,
                    vehicle: r.vehicle,
                    tag: None,
                }
            })
            .collect();
        let mut data = Dataset::empty(names, n_classes);
        data.extend_rows(chunks.concat(), rows.iter().map(|r| r.label).collect(), meta);
        Ok(data)
    }
}

/// Resolves topology references, in order.
pub fn worlds(references: &[String], base: &Path) -> Result<Vec<World>> {
    references.iter().map(|r| ExperimentConfig::world(r, base)).collect()
}

/// All labelled rows of the training episodes, before rebalancing.
pub fn collect_dataset(cfg: &ExperimentConfig, base: &Path) -> Result<Dataset> {
    let policy = cfg.policy.build(base)?;
    let worlds = worlds(&cfg.train_topologies, base)?;
    let n_classes = worlds[0].actions.len();
    let c = Collection::run(
        worlds,
        policy.as_ref(),
        cfg.vehicles,
        cfg.episodes_per_topology,
        cfg.steps_per_episode,
        cfg.seed,
        stream::TRAIN,
    )?;
    c.featurize(&cfg.representation, &c.rows(), n_classes)
}

/// Indices that keep an equal number of rows of every class: the smallest class count,
/// optionally capped. Selected indices are returned in increasing order.
pub fn rebalance_indices(labels: &[usize], n_classes: usize, cap: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    let by_class = by_class(labels, n_classes);
    if let Some(missing) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::MissingClass(missing));
    }
    Ok(downsample(by_class, cap, seed))
}

/// As [`rebalance_indices`], but classes that never occur are left out instead of rejected.
pub fn rebalance_present_indices(labels: &[usize], n_classes: usize, seed: u64) -> Vec<usize> {
    let present = by_class(labels, n_classes).into_iter().filter(|c| !c.is_empty()).collect();
    downsample(present, None, seed)
}

fn by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &a) in labels.iter().enumerate() {
        by_class[a].push(i);
    }
    by_class
}

fn downsample(by_class: Vec<Vec<usize>>, cap: Option<usize>, seed: u64) -> Vec<usize> {
    let keep = by_class.iter().map(Vec::len).min().unwrap_or(0).min(cap.unwrap_or(usize::MAX));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = Vec::with_capacity(keep * by_class.len());
    for mut members in by_class {
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..keep]);
    }
    out.sort_unstable();
    out
}

/// Uniform seeded downsampling of every class to the smallest class count.
pub fn rebalance(data: &Dataset, seed: u64) -> Result<Dataset> {
    Ok(data.subset(&rebalance_indices(data.labels(), data.n_classes(), None, seed)?))
}

/// Partition sizes by largest remainder; equal remainders favour the earlier partition.
pub fn partition_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|x| x.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n.saturating_sub(sizes.iter().sum());
    for &k in order.iter().take(short) {
        sizes[k] += 1;
    }
    sizes
}

/// Seeded assignment of whole episodes to train/val/test.
pub fn split_episodes(episodes: &[usize], fractions: [f64; 3], seed: u64) -> Result<BTreeMap<usize, SplitTag>> {
    let mut ids: Vec<usize> = episodes.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let needed = fractions.iter().filter(|&&f| f > 0.0).count();
    if ids.len() < needed {
        return Err(Error::Config(format!("{} episodes cannot fill {needed} partitions", ids.len())));
    }
    let sizes = partition_sizes(ids.len(), fractions);
    if sizes.iter().zip(fractions).any(|(&s, f)| f > 0.0 && s == 0) {
        return Err(Error::Config(format!("{} episodes leave a partition empty", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = BTreeMap::new();
    let mut it = ids.into_iter();
    for (tag, size) in SplitTag::ALL.into_iter().zip(sizes) {
        for id in it.by_ref().take(size) {
            out.insert(id, tag);
        }
    }
    Ok(out)
}

/// Tags every row with its episode's partition.
pub fn split(data: &Dataset, fractions: [f64; 3], seed: u64) -> Result<Dataset> {
    let episodes: Vec<usize> = data.meta().iter().map(|m| m.episode).collect();
    let tags = split_episodes(&episodes, fractions, seed)?;
    let mut out = data.clone();
    for m in out.meta_mut() {
        m.tag = Some(tags[&m.episode]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;
    use proptest::prelude::*;

    #[test]
    fn rebalance_to_smallest_class() {
        let labels: Vec<usize> = [(0, 100), (1, 50), (2, 50), (3, 25), (4, 25)]
            .iter()
            .flat_map(|&(a, n)| std::iter::repeat_n(a, n))
            .collect();
        let keep = rebalance_indices(&labels, 5, None, 9).unwrap();
        assert_eq!(keep.len(), 125);
        let mut counts = [0; 5];
        keep.iter().for_each(|&i| counts[labels[i]] += 1);
        assert_eq!(counts, [25; 5]);
        assert_eq!(keep, rebalance_indices(&labels, 5, None, 9).unwrap());
        assert_eq!(rebalance_indices(&labels, 5, Some(10), 9).unwrap().len(), 50);
        assert_eq!(rebalance_present_indices(&labels[..200], 5, 9).len(), 150);
    }

    #[test]
    fn balanced_input_is_kept() {
        let labels = vec![0, 1, 2, 3, 4, 4, 3, 2, 1, 0];
        assert_eq!(rebalance_indices(&labels, 5, None, 1).unwrap(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn missing_class_is_named() {
        match rebalance_indices(&[0, 1, 2, 4], 5, None, 0) {
            Err(Error::MissingClass(3)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(partition_sizes(10, [0.7, 0.15, 0.15]), [7, 2, 1]);
        assert_eq!(partition_sizes(40, [0.7, 0.15, 0.15]), [28, 6, 6]);
        assert!(split_episodes(&[0, 1], [0.7, 0.15, 0.15], 0).is_err());
        assert!(split_episodes(&[0, 1, 2, 3], [0.7, 0.15, 0.15], 0).is_err());
        assert_eq!(split_episodes(&[0, 1, 2, 3, 4], [0.7, 0.15, 0.15], 0).unwrap().len(), 5);
    }

    #[test]
    fn one_short_episode_gives_1100_rows() {
        let cfg = ExperimentConfig {
            train_topologies: vec!["A".into()],
            episodes_per_topology: 1,
            steps_per_episode: 100,
            representation: Representation::RuleFeatures,
            policy: PolicySpec::FullyImitable,
            ..ExperimentConfig::desk(4)
        };
        let d = collect_dataset(&cfg, Path::new(".")).unwrap();
        assert_eq!(d.n_rows(), 1100);
        assert!(d.meta().iter().all(|m| m.topology == "A" && m.episode == 0));
        let two = ExperimentConfig { train_topologies: vec!["A".into(), "D".into()], ..cfg };
        let d = collect_dataset(&two, Path::new(".")).unwrap();
        assert!(d.meta().iter().any(|m| m.topology == "A") && d.meta().iter().any(|m| m.topology == "D"));
    }

    proptest! {
        #[test]
        fn episodes_never_straddle_tags(n_eps in 5usize..40, rows_per in 1usize..5, seed in any::<u64>()) {
            let rows: Vec<Vec<f64>> = (0..n_eps * rows_per).map(|i| vec![i as f64]).collect();
            let labels = vec![0; rows.len()];
            let mut d = Dataset::from_rows(vec!["x".into()], rows, labels, 5).unwrap();
            for (i, m) in d.meta_mut().iter_mut().enumerate() {
                m.episode = i / rows_per;
            }
            let tagged = split(&d, [0.7, 0.15, 0.15], seed).unwrap();
            let mut seen: BTreeMap<usize, SplitTag> = BTreeMap::new();
            for m in tagged.meta() {
                let tag = m.tag.unwrap();
                prop_assert_eq!(*seen.entry(m.episode).or_insert(tag), tag);
            }
            let sizes = partition_sizes(n_eps, [0.7, 0.15, 0.15]);
            for (k, tag) in SplitTag::ALL.iter().enumerate() {
                prop_assert_eq!(seen.values().filter(|t| *t == tag).count(), sizes[k]);
            }
            prop_assert_eq!(split(&d, [0.7, 0.15, 0.15], seed).unwrap(), tagged);
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{enumerate_features, FeatureSet};
use crate::policy::{egocentric_names, rule_feature_set, PolicySpec, EGOCENTRIC_NEIGHBOURS};
use crate::sim::{TrackTopology, World};
use crate::tree::LossFunction;
use crate::{Error, Result};

/// State representation the learner sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RawRepresentation")]
pub enum Representation {
    /// Every feature of the grammar up to the given depth.
    Enumerated { depth: usize },
    /// The six features read by the rule table.
    RuleFeatures,
    /// Egocentric geometry of the nearest vehicles.
    Egocentric { neighbours: usize },
}

fn default_neighbours() -> usize {
    EGOCENTRIC_NEIGHBOURS
}

/// Flat form of [`Representation`], so that parameters given to the wrong kind are rejected.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRepresentation {
    kind: String,
    depth: Option<usize>,
    neighbours: Option<usize>,
}

impl TryFrom<RawRepresentation> for Representation {
    type Error = String;

    fn try_from(raw: RawRepresentation) -> std::result::Result<Self, String> {
        let stray = |field: &str| Err(format!("`{field}` does not apply to representation `{}`", raw.kind));
        match raw.kind.as_str() {
            "enumerated" => match (raw.depth, raw.neighbours) {
                (_, Some(_)) => stray("neighbours"),
                (None, _) => Err("depth: required for representation `enumerated`".into()),
                (Some(0), _) => Err("depth: must be at least 1".into()),
                (Some(depth), None) => Ok(Representation::Enumerated { depth }),
            },
            "rule-features" => match (raw.depth, raw.neighbours) {
                (Some(_), _) => stray("depth"),
                (_, Some(_)) => stray("neighbours"),
                _ => Ok(Representation::RuleFeatures),
            },
            "egocentric" => match raw.depth {
                Some(_) => stray("depth"),
                None => Ok(Representation::Egocentric { neighbours: raw.neighbours.unwrap_or_else(default_neighbours) }),
            },
            other => Err(format!("kind: unknown representation `{other}`")),
        }
    }
}

impl Representation {
    /// Symbolic features, or `None` for the egocentric baseline.
    pub fn feature_set(&self) -> Result<Option<FeatureSet>> {
        match self {
            Representation::Enumerated { depth } => enumerate_features(*depth).map(Some),
            Representation::RuleFeatures => Ok(Some(rule_feature_set())),
            Representation::Egocentric { .. } => Ok(None),
        }
    }

    pub fn names(&self) -> Result<Vec<String>> {
        Ok(match (self, self.feature_set()?) {
            (_, Some(set)) => set.names(),
            (Representation::Egocentric { neighbours }, None) => egocentric_names(*neighbours),
            _ => unreachable!(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.7, val: 0.15, test: 0.15 }
    }
}

impl SplitFractions {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Absolute,
    ZeroOne,
}

impl LossKind {
    pub fn build(self, n_classes: usize) -> LossFunction {
        match self {
            LossKind::Absolute => LossFunction::absolute(n_classes),
            LossKind::ZeroOne => LossFunction::zero_one(n_classes),
        }
    }
}

/// Episodes run to measure failures of a deployed controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeployConfig {
    pub episodes: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub policy: PolicySpec,
    pub representation: Representation,
    /// Preset names or paths to topology JSON files.
    pub train_topologies: Vec<String>,
    pub test_topologies: Vec<String>,
    #[serde(default = "default_vehicles")]
    pub vehicles: usize,
    pub episodes_per_topology: usize,
    pub steps_per_episode: usize,
    /// Rows kept after rebalancing, spread evenly over the actions.
    pub dataset_size: usize,
    /// Episodes collected per test topology to measure accuracy away from the training set.
    #[serde(default = "default_test_episodes")]
    pub test_episodes: usize,
    #[serde(default)]
    pub split: SplitFractions,
    /// Indices into the pruning sequence to evaluate besides the full tree.
    #[serde(default)]
    pub prune_levels: Vec<usize>,
    pub deploy: Option<DeployConfig>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_vehicles() -> usize {
    11
}

fn default_test_episodes() -> usize {
    2
}

fn default_loss() -> LossKind {
    LossKind::Absolute
}

impl ExperimentConfig {
    /// Desk-scale run: all five topologies, 20000 rebalanced rows.
    pub fn desk(seed: u64) -> Self {
        let all: Vec<String> = TrackTopology::preset_names().iter().map(|s| s.to_string()).collect();
        ExperimentConfig {
            seed,
            policy: PolicySpec::FullyImitable,
            representation: Representation::Enumerated { depth: 6 },
            train_topologies: all.clone(),
            test_topologies: all,
            vehicles: 11,
            episodes_per_topology: 32,
            steps_per_episode: 1000,
            dataset_size: 20_000,
            test_episodes: 2,
            split: SplitFractions::default(),
            prune_levels: vec![],
            deploy: Some(DeployConfig { episodes: 10, max_steps: 1000 }),
            loss: LossKind::Absolute,
        }
    }

    /// Full-scale run: 125000 rebalanced rows, 100 deployment episodes.
    pub fn full_scale(seed: u64) -> Self {
        ExperimentConfig {
            episodes_per_topology: 40,
            dataset_size: 125_000,
            deploy: Some(DeployConfig { episodes: 100, max_steps: 1000 }),
            ..ExperimentConfig::desk(seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            match path.as_str() {
                "." => Error::Config(e.into_inner().to_string()),
                _ => Error::Config(format!("{path}: {}", e.into_inner())),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let f = self.split.as_array();
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return fail("split: fractions must lie in [0, 1] and sum to 1");
        }
        if self.train_topologies.is_empty() {
            return fail("train_topologies: at least one topology is required");
        }
        if self.test_topologies.is_empty() {
            return fail("test_topologies: at least one topology is required");
        }
        for (field, value) in [
            ("vehicles", self.vehicles),
            ("episodes_per_topology", self.episodes_per_topology),
            ("steps_per_episode", self.steps_per_episode),
            ("test_episodes", self.test_episodes),
        ] {
            if value == 0 {
                return fail(&format!("{field}: must be positive"));
            }
        }
        if self.dataset_size == 0 {
            return fail("dataset_size: must be positive");
        }
        if let Some(d) = self.deploy {
            if d.episodes == 0 || d.max_steps == 0 {
                return fail("deploy: needs at least one episode and one step");
            }
        }
        if let Representation::Enumerated { depth: 0 } = self.representation {
            return fail("representation: depth must be at least 1");
        }
        if let Representation::Egocentric { neighbours: 0 } = self.representation {
            return fail("representation: neighbours must be at least 1");
        }
        Ok(())
    }

    /// Resolves a topology reference against the presets, then as a path under `base`.
    pub fn world(reference: &str, base: &Path) -> Result<World> {
        if TrackTopology::preset_names().contains(&reference) {
            return World::preset(reference);
        }
        let path: PathBuf = base.join(reference);
        Ok(World::new(TrackTopology::load(&path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ExperimentConfig::desk(1), ExperimentConfig::full_scale(2)] {
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn seed_is_mandatory_and_fractions_checked() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::desk(1).to_json()).unwrap();
        v["split"]["test"] = 0.3.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).unwrap_err().is_config());
        v.as_object_mut().unwrap().remove("seed");
        assert!(ExperimentConfig::from_json(&v.to_string()).unwrap_err().is_config());
    }

    fn error_for(edit: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::desk(1).to_json()).unwrap();
        edit(&mut v);
        let e = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(e.is_config());
        e.to_string()
    }

    #[test]
    fn errors_name_the_field() {
        assert!(error_for(|v| v["vehicles"] = "many".into()).contains("vehicles"));
        assert!(error_for(|v| v["steps_per_episode"] = 0.into()).contains("steps_per_episode"));
        assert!(error_for(|v| v["bogus"] = 1.into()).contains("bogus"));
        assert!(error_for(|v| v["representation"]["depth"] = (-1).into()).contains("representation"));
        assert!(error_for(|v| v.as_object_mut().unwrap().remove("seed").map(drop).unwrap()).contains("seed"));
    }

    #[test]
    fn rule_features_reject_a_depth() {
        let err = error_for(|v| v["representation"] = serde_json::json!({"kind": "rule-features", "depth": 6}));
        assert!(err.contains("depth"), "{err}");
    }

    #[test]
    fn representation_names() {
        assert_eq!(Representation::RuleFeatures.names().unwrap().len(), 6);
        assert_eq!(Representation::Egocentric { neighbours: 4 }.names().unwrap().len(), 16);
        assert_eq!(Representation::Enumerated { depth: 3 }.names().unwrap().len(), 14);
        let r: Representation = serde_json::from_str(r#"{"kind":"egocentric"}"#).unwrap();
        assert_eq!(r, Representation::Egocentric { neighbours: 4 });
    }
}

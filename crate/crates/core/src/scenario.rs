//! Scenario files: everything needed to reproduce a run.
//!
//! A scenario names a game (one of the built-in examples or an explicit
//! definition), an event generator, one baseline policy per player, the
//! manager configuration, the horizon and the seed. For example games the
//! generator and baselines default to the example's own.
//!
//! Canonical form: [`Scenario::canonical`] fills in defaults, and
//! [`Scenario::to_canonical_json`] writes fields in declaration order with
//! two-space indentation. Parsing canonical JSON and writing it again gives
//! the same bytes.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{validate_game, GameSpec, GameSpecDef, UtilityRegistry};
use crate::location::{make_example, ExampleId, Sharing};
use crate::manager::ManagerConfig;
use crate::sim::generator::EventGenerator;
use crate::sim::policy::PlayerPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    Example { id: ExampleId, sharing: Sharing },
    Spec(GameSpecDef),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Directory receiving `trace.csv` and `summary.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Skip the per-round CSV and write only the summary.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub summary_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub game: GameSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<EventGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<Vec<PlayerPolicy>>,
    pub manager: ManagerConfig,
    pub horizon: u64,
    pub seed: u64,
    /// 1-based seat played interactively by a person; its baseline policy is
    /// the fallback and the headless stand-in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_player: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
}

/// A schema error with the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for SchemaError {}

/// A scenario with its game built and every part validated.
#[derive(Clone, Debug)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub spec: Arc<GameSpec>,
    pub generator: EventGenerator,
    pub baselines: Vec<PlayerPolicy>,
}

impl Scenario {
    /// Parses JSON, reporting the field path on schema errors.
    pub fn from_json(text: &str) -> std::result::Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| SchemaError {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Defaults filled in from the example, when the game is an example.
    pub fn canonical(&self) -> Result<Scenario> {
        let mut s = self.clone();
        if let GameSource::Example { id, sharing } = &self.game {
            let ex = make_example(*id, *sharing)?;
            s.generator.get_or_insert(ex.generator);
            s.baselines.get_or_insert(ex.policies);
        }
        Ok(s)
    }

    /// SHA-256 (hex) of the canonical scenario with horizon and outputs
    /// cleared. Runs of different lengths from one scenario share a
    /// fingerprint because a shorter trace is a prefix of a longer one.
    pub fn fingerprint(&self) -> Result<String> {
        let mut s = self.canonical()?;
        s.horizon = 0;
        s.outputs = None;
        let json = serde_json::to_string(&s).expect("scenario serializes");
        Ok(hex::encode(Sha256::digest(json.as_bytes())))
    }

    pub fn resolve(&self, registry: &UtilityRegistry) -> Result<ResolvedScenario> {
        let canonical = self.canonical()?;
        let spec = match &canonical.game {
            GameSource::Example { id, sharing } => make_example(*id, *sharing)?.spec,
            GameSource::Spec(def) => GameSpec::from_def(def, registry)?,
        };
        let generator = canonical
            .generator
            .clone()
            .ok_or_else(|| Error::invalid("generator: required for explicit games"))?;
        let baselines = canonical
            .baselines
            .clone()
            .ok_or_else(|| Error::invalid("baselines: required for explicit games"))?;

        generator
            .validate(spec.event_dim())
            .map_err(|e| Error::invalid(format!("generator: {e}")))?;
        if baselines.len() != spec.num_players() {
            return Err(Error::invalid(format!(
                "baselines: {} policies for {} players",
                baselines.len(),
                spec.num_players()
            )));
        }
        for (i, p) in baselines.iter().enumerate() {
            p.validate(&spec, i)
                .map_err(|e| Error::invalid(format!("baselines[{i}]: {e}")))?;
        }
        if let Some(h) = canonical.human_player {
            if h == 0 || h > spec.num_players() {
                return Err(Error::invalid(format!(
                    "human_player: {h} is not a player (1..={})",
                    spec.num_players()
                )));
            }
        }
        let samples = generator.support_events(crate::game::guard_limit_from_env()?)?;
        let report = validate_game(&spec, &samples);
        if !report.is_ok() {
            return Err(Error::AssumptionViolation(report.to_string()));
        }
        Ok(ResolvedScenario {
            scenario: canonical,
            spec: Arc::new(spec),
            generator,
            baselines,
        })
    }
}

/// Reads and parses a scenario file. I/O failures come back as
/// [`LoadError::Io`]; schema failures as [`LoadError::Schema`].
pub fn load_scenario(path: &Path) -> std::result::Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text).map_err(LoadError::Schema)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io(String),
    Schema(SchemaError),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Io(m) => write!(f, "cannot read scenario: {m}"),
            LoadError::Schema(e) => write!(f, "invalid scenario {e}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// A small random scenario over a `linear_table` game, for exercising the
/// manager and the checks on shapes other than the location game. Up to
/// three players with up to three actions each, up to two event
/// coordinates in `[0, 1]` drawn i.i.d., from a script, or from a
/// distribution that switches every few dozen rounds. Coefficients sit on a
/// grid of quarters so that ties are common.
pub fn random_small_scenario(seed: u64, horizon: u64) -> Scenario {
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=2usize);
    let action_sets: Vec<Vec<crate::game::Action>> = (0..n)
        .map(|_| (1..=rng.random_range(1..=3)).collect())
        .collect();
    let joint: usize = action_sets.iter().map(Vec::len).product();
    let mut observation_sets: Vec<Vec<usize>> = (0..n)
        .map(|_| (1..=m).filter(|_| rng.random_bool(0.6)).collect())
        .collect();
    for j in 1..=m {
        if !observation_sets.iter().any(|s| s.contains(&j)) {
            observation_sets[0].push(j);
        }
    }
    for s in observation_sets.iter_mut() {
        s.sort_unstable();
        if s.is_empty() {
            s.push(1);
        }
    }
    let coefficients: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..joint)
                .map(|_| (0..m).map(|_| rng.random_range(0..=4) as f64 / 4.0).collect())
                .collect()
        })
        .collect();
    let game = GameSpecDef {
        num_players: n,
        event_dim: m,
        observation_sets: observation_sets.clone(),
        action_sets: action_sets.clone(),
        utility: crate::game::UtilityDef {
            name: crate::game::LINEAR_TABLE.into(),
            params: serde_json::json!({ "coefficients": coefficients }),
        },
        utility_caps: vec![m as f64; n],
    };

    let iid = |rng: &mut rand_chacha::ChaCha8Rng| {
        let atoms = rng.random_range(1..=3);
        let mut weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(1..=4) as f64).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let support = weights
            .into_iter()
            .map(|p| {
                let event: Vec<f64> = (0..m).map(|_| rng.random_range(0..=8) as f64 / 8.0).collect();
                crate::sim::generator::SupportPoint::new(event, p)
            })
            .collect();
        EventGenerator::Iid { support }
    };
    let generator = match rng.random_range(0..8) {
        0..=4 => iid(&mut rng),
        5 => EventGenerator::Scripted {
            events: (0..rng.random_range(1..=5))
                .map(|_| {
                    (0..m)
                        .map(|_| rng.random_range(0..=8) as f64 / 8.0)
                        .collect::<Vec<_>>()
                        .into()
                })
                .collect(),
        },
        _ => EventGenerator::Piecewise {
            segments: (0..rng.random_range(2..=3))
                .map(|_| crate::sim::generator::Segment {
                    duration: rng.random_range(1..=60),
                    generator: iid(&mut rng),
                })
                .collect(),
        },
    };

    let baselines = (0..n)
        .map(|i| {
            let set = &action_sets[i];
            match rng.random_range(0..4) {
                0 => PlayerPolicy::Constant {
                    action: *set.choose(&mut rng).expect("non-empty"),
                },
                1 => PlayerPolicy::Random,
                2 => PlayerPolicy::Scripted {
                    actions: (0..rng.random_range(1..=4))
                        .map(|_| *set.choose(&mut rng).expect("non-empty"))
                        .collect(),
                },
                _ => PlayerPolicy::Threshold {
                    coordinate: observation_sets[i].choose(&mut rng).expect("non-empty") - 1,
                    at_least: 0.5,
                    then: *set.last().expect("non-empty"),
                    otherwise: set[0],
                },
            }
        })
        .collect();

    let v = *[0.0, 1.0, 10.0, 100.0].choose(&mut rng).expect("non-empty");
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0..=3) as f64).collect();
    let phi = match rng.random_range(0..3) {
        0 => crate::phi::PhiKind::WeightedSum { theta: theta.clone() },
        1 => crate::phi::PhiKind::LogOffset {
            theta: theta.iter().map(|t| t + 1.0).collect(),
            delta: *[0.5, 1.0, 2.0].choose(&mut rng).expect("non-empty"),
        },
        _ => crate::phi::PhiKind::MinUtility,
    };
    let manager = match rng.random_range(0..4) {
        0 => ManagerConfig::Weighted { v, theta },
        1 => ManagerConfig::Concave { v, phi },
        2 => ManagerConfig::ConservativeLinear { theta },
        _ => ManagerConfig::ConservativeConcave { v, phi },
    };
    Scenario {
        name: Some(format!("random small scenario {seed}")),
        game: GameSource::Spec(game),
        generator: Some(generator),
        baselines: Some(baselines),
        manager,
        horizon,
        seed,
        human_player: None,
        outputs: None,
    }
}

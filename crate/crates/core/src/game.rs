//! Abstract N-player game with partial observations.
//!
//! Players, event coordinates and actions use these conventions throughout
//! the Rust API:
//!
//! * players are `0..N`,
//! * event coordinates are `0..M`,
//! * actions are opaque `u32` labels drawn from each player's action set.
//!
//! Scenario files and the HTTP service present players and event
//! coordinates 1-based; the conversion happens at those boundaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Action = u32;

/// Default cap on the number of joint actions (or lookahead sequences) that
/// any exhaustive search will enumerate.
pub const DEFAULT_GUARD_LIMIT: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_GUARD_LIMIT`].
pub const GUARD_LIMIT_ENV: &str = "REGRET_MANAGER_GUARD_LIMIT";

/// Reads the guard limit from the environment, falling back to the default.
/// Accepts plain integers and integral scientific notation (`1e8`).
pub fn guard_limit_from_env() -> Result<u64> {
    match std::env::var(GUARD_LIMIT_ENV) {
        Ok(raw) => parse_count(&raw)
            .ok_or_else(|| Error::invalid(format!("{GUARD_LIMIT_ENV}={raw:?} is not a count"))),
        Err(_) => Ok(DEFAULT_GUARD_LIMIT),
    }
}

/// Parses a non-negative integral count such as `1000000` or `1e6`.
pub fn parse_count(raw: &str) -> Option<u64> {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<u64>() {
        return Some(n);
    }
    let f: f64 = raw.parse().ok()?;
    if f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Some(f as u64)
    } else {
        None
    }
}

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident, $elem:ty) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<$elem>);

        impl Deref for $name {
            type Target = [$elem];
            fn deref(&self) -> &[$elem] {
                &self.0
            }
        }

        impl From<Vec<$elem>> for $name {
            fn from(v: Vec<$elem>) -> Self {
                $name(v)
            }
        }

        impl<const K: usize> From<[$elem; K]> for $name {
            fn from(v: [$elem; K]) -> Self {
                $name(v.to_vec())
            }
        }
    };
}

vector_newtype!(
    /// The round's event vector ω(t), length M.
    EventVector,
    f64
);
vector_newtype!(
    /// One action per player. Used for suggestions and for baselines.
    ActionVector,
    Action
);
vector_newtype!(
    /// One utility per player, each in `[0, u_max]`.
    UtilityVector,
    f64
);

/// The part of an event vector one player is allowed to see.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub player: usize,
    /// Event coordinate (0-based) to value, exactly the player's observation set.
    pub visible: BTreeMap<usize, f64>,
}

impl Observation {
    pub fn get(&self, coordinate: usize) -> Option<f64> {
        self.visible.get(&coordinate).copied()
    }
}

/// A pure utility map `(α, ω) -> (û_1, …, û_N)`.
///
/// Implementations must be deterministic. They are registered by name so that
/// games can be described in scenario files.
pub trait UtilityModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Parameters that, together with [`UtilityModel::name`], rebuild this model.
    fn params(&self) -> serde_json::Value;

    /// Writes one utility per player into `out`. Inputs are already
    /// dimension-checked by the caller.
    fn evaluate(&self, actions: &[Action], event: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Builds a utility model from its serialized parameters and the game shape.
pub type UtilityBuilder =
    fn(&serde_json::Value, &[Vec<Action>], usize) -> Result<Arc<dyn UtilityModel>>;

/// Name-keyed table of utility models available to scenario files.
#[derive(Clone)]
pub struct UtilityRegistry {
    builders: HashMap<String, UtilityBuilder>,
}

impl UtilityRegistry {
    pub fn empty() -> Self {
        UtilityRegistry {
            builders: HashMap::new(),
        }
    }

    /// Registry holding `location_reward` and `linear_table`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(
            crate::location::LOCATION_REWARD,
            crate::location::build_location_reward,
        );
        r.register(LINEAR_TABLE, build_linear_table);
        r
    }

    pub fn register(&mut self, name: &str, builder: UtilityBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn build(
        &self,
        def: &UtilityDef,
        action_sets: &[Vec<Action>],
        event_dim: usize,
    ) -> Result<Arc<dyn UtilityModel>> {
        let builder = self
            .builders
            .get(&def.name)
            .ok_or_else(|| Error::invalid(format!("unknown utility function {:?}", def.name)))?;
        builder(&def.params, action_sets, event_dim)
    }
}

impl Default for UtilityRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for UtilityRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.builders.keys().collect();
        names.sort();
        f.debug_struct("UtilityRegistry").field("names", &names).finish()
    }
}

/// Serialized reference to a registered utility model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

/// Game description as it appears in scenario files (1-based event indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecDef {
    pub num_players: usize,
    pub event_dim: usize,
    pub observation_sets: Vec<Vec<usize>>,
    pub action_sets: Vec<Vec<Action>>,
    pub utility: UtilityDef,
    pub utility_caps: Vec<f64>,
}

/// An N-player game: who sees which event coordinates, who may take which
/// actions, and what everyone earns.
#[derive(Clone, Debug)]
pub struct GameSpec {
    num_players: usize,
    event_dim: usize,
    observation_sets: Vec<Vec<usize>>,
    action_sets: Vec<Vec<Action>>,
    utility: Arc<dyn UtilityModel>,
    utility_caps: Vec<f64>,
}

impl GameSpec {
    /// Checks shapes only. Semantic invariants (coverage of all event
    /// coordinates, non-empty action sets, utility bounds) are reported by
    /// [`validate_game`] so that a broken game can still be inspected.
    pub fn new(
        event_dim: usize,
        observation_sets: Vec<Vec<usize>>,
        action_sets: Vec<Vec<Action>>,
        utility: Arc<dyn UtilityModel>,
        utility_caps: Vec<f64>,
    ) -> Result<Self> {
        let num_players = action_sets.len();
        if num_players == 0 {
            return Err(Error::invalid("a game needs at least one player"));
        }
        if event_dim == 0 {
            return Err(Error::invalid("event dimension must be positive"));
        }
        if observation_sets.len() != num_players || utility_caps.len() != num_players {
            return Err(Error::invalid(format!(
                "{num_players} action sets but {} observation sets and {} utility caps",
                observation_sets.len(),
                utility_caps.len()
            )));
        }
        let mut observation_sets = observation_sets;
        for (i, set) in observation_sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&j) = set.iter().find(|&&j| j >= event_dim) {
                return Err(Error::invalid(format!(
                    "player {} observes coordinate {} but M = {event_dim}",
                    i + 1,
                    j + 1
                )));
            }
        }
        for (i, set) in action_sets.iter().enumerate() {
            let distinct: BTreeSet<_> = set.iter().collect();
            if distinct.len() != set.len() {
                return Err(Error::invalid(format!(
                    "action set of player {} has duplicates",
                    i + 1
                )));
            }
        }
        for (i, &cap) in utility_caps.iter().enumerate() {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::invalid(format!(
                    "utility cap of player {} must be positive and finite, got {cap}",
                    i + 1
                )));
            }
        }
        Ok(GameSpec {
            num_players,
            event_dim,
            observation_sets,
            action_sets,
            utility,
            utility_caps,
        })
    }

    pub fn from_def(def: &GameSpecDef, registry: &UtilityRegistry) -> Result<Self> {
        if def.num_players != def.action_sets.len() {
            return Err(Error::invalid(format!(
                "num_players = {} but {} action sets given",
                def.num_players,
                def.action_sets.len()
            )));
        }
        let observation_sets = def
            .observation_sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(|&j| {
                        j.checked_sub(1).ok_or_else(|| {
                            Error::invalid("observation indices are 1-based; found 0")
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let utility = registry.build(&def.utility, &def.action_sets, def.event_dim)?;
        GameSpec::new(
            def.event_dim,
            observation_sets,
            def.action_sets.clone(),
            utility,
            def.utility_caps.clone(),
        )
    }

    pub fn to_def(&self) -> GameSpecDef {
        GameSpecDef {
            num_players: self.num_players,
            event_dim: self.event_dim,
            observation_sets: self
                .observation_sets
                .iter()
                .map(|s| s.iter().map(|j| j + 1).collect())
                .collect(),
            action_sets: self.action_sets.clone(),
            utility: UtilityDef {
                name: self.utility.name().to_string(),
                params: self.utility.params(),
            },
            utility_caps: self.utility_caps.clone(),
        }
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn event_dim(&self) -> usize {
        self.event_dim
    }

    pub fn observation_set(&self, player: usize) -> &[usize] {
        &self.observation_sets[player]
    }

    pub fn action_set(&self, player: usize) -> &[Action] {
        &self.action_sets[player]
    }

    pub fn action_sets(&self) -> &[Vec<Action>] {
        &self.action_sets
    }

    pub fn utility_caps(&self) -> &[f64] {
        &self.utility_caps
    }

    pub fn utility_model(&self) -> &dyn UtilityModel {
        self.utility.as_ref()
    }

    /// Number of joint action vectors, without overflow.
    pub fn joint_action_count(&self) -> u128 {
        self.action_sets
            .iter()
            .map(|s| s.len() as u128)
            .try_fold(1u128, |acc, n| acc.checked_mul(n))
            .unwrap_or(u128::MAX)
    }

    pub fn check_actions(&self, actions: &[Action]) -> Result<()> {
        if actions.len() != self.num_players {
            return Err(Error::invalid(format!(
                "action vector has length {} but N = {}",
                actions.len(),
                self.num_players
            )));
        }
        for (i, a) in actions.iter().enumerate() {
            if !self.action_sets[i].contains(a) {
                return Err(Error::invalid(format!(
                    "action {a} is not in the action set of player {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn check_event(&self, event: &[f64]) -> Result<()> {
        if event.len() != self.event_dim {
            return Err(Error::invalid(format!(
                "event vector has length {} but M = {}",
                event.len(),
                self.event_dim
            )));
        }
        if let Some(v) = event.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("event component {v} is not finite")));
        }
        Ok(())
    }

    /// Evaluates utilities for an action vector already known to be valid,
    /// still enforcing the `[0, u_max]` assumption on the result.
    pub(crate) fn evaluate_unchecked(
        &self,
        actions: &[Action],
        event: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.utility.evaluate(actions, event, out)?;
        for (i, (&u, &cap)) in out.iter().zip(&self.utility_caps).enumerate() {
            if !(0.0..=cap).contains(&u) {
                return Err(Error::AssumptionViolation(format!(
                    "utility of player {} is {u}, outside [0, {cap}], at actions {actions:?}, event {event:?}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// `(û_1(α, ω), …, û_N(α, ω))`.
pub fn evaluate_utilities(
    spec: &GameSpec,
    actions: &ActionVector,
    event: &EventVector,
) -> Result<UtilityVector> {
    spec.check_actions(actions)?;
    spec.check_event(event)?;
    let mut out = vec![0.0; spec.num_players];
    spec.evaluate_unchecked(actions, event, &mut out)?;
    Ok(UtilityVector(out))
}

/// Projects ω onto the coordinates player `player` can see.
pub fn observe(spec: &GameSpec, player: usize, event: &EventVector) -> Result<Observation> {
    if player >= spec.num_players {
        return Err(Error::invalid(format!(
            "player index {player} out of range for N = {}",
            spec.num_players
        )));
    }
    spec.check_event(event)?;
    let visible = spec.observation_sets[player]
        .iter()
        .map(|&j| (j, event[j]))
        .collect();
    Ok(Observation { player, visible })
}

/// All joint action vectors, lexicographic by player index and then by
/// the declaration order within each action set: player 1's action varies
/// slowest.
pub fn enumerate_joint_actions(spec: &GameSpec, guard_limit: u64) -> Result<Vec<ActionVector>> {
    let count = spec.joint_action_count();
    if count > guard_limit as u128 {
        return Err(Error::TooLarge {
            count,
            limit: guard_limit,
        });
    }
    let sets = &spec.action_sets;
    if sets.iter().any(|s| s.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; sets.len()];
    loop {
        out.push(ActionVector(
            idx.iter().zip(sets).map(|(&k, s)| s[k]).collect(),
        ));
        // odometer increment, last player fastest
        let mut p = sets.len();
        loop {
            if p == 0 {
                return Ok(out);
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < sets[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Finding {
    /// Event coordinates (0-based) no player observes.
    UncoveredCoordinates(Vec<usize>),
    EmptyActionSet { player: usize },
    EventDimension { sample: usize, len: usize },
    UtilityOutOfBounds {
        player: usize,
        actions: ActionVector,
        event: EventVector,
        value: f64,
        cap: f64,
    },
    EvaluationFailed { actions: ActionVector, event: EventVector, message: String },
    TooManyJointActions { count: u128, limit: u64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::UncoveredCoordinates(js) => {
                let names: Vec<String> = js.iter().map(|j| format!("ω_{}", j + 1)).collect();
                write!(f, "no player observes {}", names.join(", "))
            }
            Finding::EmptyActionSet { player } => {
                write!(f, "player {} has an empty action set", player + 1)
            }
            Finding::EventDimension { sample, len } => {
                write!(f, "event sample {sample} has length {len}")
            }
            Finding::UtilityOutOfBounds {
                player,
                actions,
                event,
                value,
                cap,
            } => write!(
                f,
                "utility of player {} is {value} (cap {cap}) at α = {:?}, ω = {:?}",
                player + 1,
                actions.0,
                event.0
            ),
            Finding::EvaluationFailed {
                actions,
                event,
                message,
            } => write!(f, "evaluation failed at α = {:?}, ω = {:?}: {message}", actions.0, event.0),
            Finding::TooManyJointActions { count, limit } => {
                write!(f, "{count} joint actions exceed the guard limit {limit}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return write!(f, "ok");
        }
        for (k, finding) in self.findings.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

const MAX_BOUND_FINDINGS: usize = 64;

/// Checks the game's standing assumptions over every joint action and every
/// supplied event sample. Never fails; problems land in the report.
pub fn validate_game(spec: &GameSpec, event_samples: &[EventVector]) -> ValidationReport {
    let mut findings = Vec::new();

    let covered: BTreeSet<usize> = spec.observation_sets.iter().flatten().copied().collect();
    let uncovered: Vec<usize> = (0..spec.event_dim).filter(|j| !covered.contains(j)).collect();
    if !uncovered.is_empty() {
        findings.push(Finding::UncoveredCoordinates(uncovered));
    }
    for (player, set) in spec.action_sets.iter().enumerate() {
        if set.is_empty() {
            findings.push(Finding::EmptyActionSet { player });
        }
    }

    let joint = match enumerate_joint_actions(spec, DEFAULT_GUARD_LIMIT) {
        Ok(j) => j,
        Err(Error::TooLarge { count, limit }) => {
            findings.push(Finding::TooManyJointActions { count, limit });
            Vec::new()
        }
        Err(_) => Vec::new(),
    };

    let mut bound_findings = 0;
    let mut out = vec![0.0; spec.num_players];
    'samples: for (k, event) in event_samples.iter().enumerate() {
        if event.len() != spec.event_dim {
            findings.push(Finding::EventDimension {
                sample: k,
                len: event.len(),
            });
            continue;
        }
        for actions in &joint {
            if let Err(e) = spec.utility.evaluate(actions, event, &mut out) {
                findings.push(Finding::EvaluationFailed {
                    actions: actions.clone(),
                    event: event.clone(),
                    message: e.to_string(),
                });
                continue;
            }
            for (player, (&value, &cap)) in out.iter().zip(&spec.utility_caps).enumerate() {
                if !(0.0..=cap).contains(&value) {
                    findings.push(Finding::UtilityOutOfBounds {
                        player,
                        actions: actions.clone(),
                        event: event.clone(),
                        value,
                        cap,
                    });
                    bound_findings += 1;
                    if bound_findings >= MAX_BOUND_FINDINGS {
                        break 'samples;
                    }
                }
            }
        }
    }
    ValidationReport { findings }
}

/// Name of the table-driven utility model.
pub const LINEAR_TABLE: &str = "linear_table";

/// `û_i(α, ω) = Σ_j c[i][index(α)][j] · ω_j`, with `index(α)` the position of
/// α in [`enumerate_joint_actions`] order. Handy for arbitrary small games
/// where the event vector acts as a random payoff scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTable {
    action_sets: Vec<Vec<Action>>,
    /// `coefficients[player][joint_index][coordinate]`.
    coefficients: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearTableParams {
    coefficients: Vec<Vec<Vec<f64>>>,
}

impl LinearTable {
    pub fn new(
        action_sets: Vec<Vec<Action>>,
        event_dim: usize,
        coefficients: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let joint: usize = action_sets.iter().map(|s| s.len()).product();
        if coefficients.len() != action_sets.len()
            || coefficients
                .iter()
                .any(|per| per.len() != joint || per.iter().any(|row| row.len() != event_dim))
        {
            return Err(Error::invalid(format!(
                "linear_table coefficients must have shape [{}][{joint}][{event_dim}]",
                action_sets.len()
            )));
        }
        Ok(LinearTable {
            action_sets,
            coefficients,
        })
    }

    fn joint_index(&self, actions: &[Action]) -> Result<usize> {
        let mut index = 0;
        for (i, (a, set)) in actions.iter().zip(&self.action_sets).enumerate() {
            let k = set.iter().position(|x| x == a).ok_or_else(|| {
                Error::invalid(format!("action {a} not available to player {}", i + 1))
            })?;
            index = index * set.len() + k;
        }
        Ok(index)
    }
}

impl UtilityModel for LinearTable {
    fn name(&self) -> &str {
        LINEAR_TABLE
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "coefficients": self.coefficients })
    }

    fn evaluate(&self, actions: &[Action], event: &[f64], out: &mut [f64]) -> Result<()> {
        let idx = self.joint_index(actions)?;
        for (o, per_player) in out.iter_mut().zip(&self.coefficients) {
            *o = per_player[idx].iter().zip(event).map(|(c, w)| c * w).sum();
        }
        Ok(())
    }
}

fn build_linear_table(
    params: &serde_json::Value,
    action_sets: &[Vec<Action>],
    event_dim: usize,
) -> Result<Arc<dyn UtilityModel>> {
    let p: LinearTableParams = serde_json::from_value(params.clone())
        .map_err(|e| Error::invalid(format!("linear_table params: {e}")))?;
    Ok(Arc::new(LinearTable::new(
        action_sets.to_vec(),
        event_dim,
        p.coefficients,
    )?))
}

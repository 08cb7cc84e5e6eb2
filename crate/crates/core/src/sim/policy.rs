//! Stand-alone strategies that produce each player's baseline action.
//!
//! A policy sees only its player's [`Observation`] and the round index.
//! It never sees the unobserved event coordinates, the other players'
//! choices, or the manager's state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameSpec, Observation};

/// Serializes a 0-based index as 1-based.
pub mod one_based {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        (v + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let v = usize::deserialize(d)?;
        v.checked_sub(1)
            .ok_or_else(|| serde::de::Error::custom("indices are 1-based"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlayerPolicy {
    Constant {
        action: Action,
    },
    /// Plays the list in order, cycling.
    Scripted {
        actions: Vec<Action>,
    },
    /// `then` when the observed coordinate is at least `at_least`, else
    /// `otherwise`. The coordinate must be in the player's observation set.
    Threshold {
        #[serde(with = "one_based")]
        coordinate: usize,
        at_least: f64,
        then: Action,
        otherwise: Action,
    },
    /// Best response to fixed beliefs: the other players play
    /// `assumed_actions` and unobserved coordinates equal `assumed_event`.
    /// Ties go to the first action in the player's action set.
    GreedyObserved {
        assumed_actions: Vec<Action>,
        assumed_event: Vec<f64>,
    },
    /// Uniform over the action set, on the player's own random stream.
    Random,
}

impl PlayerPolicy {
    pub fn validate(&self, spec: &GameSpec, player: usize) -> Result<()> {
        let allowed = spec.action_set(player);
        let legal = |a: Action| -> Result<()> {
            if allowed.contains(&a) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "player {}: action {a} is not in its action set {allowed:?}",
                    player + 1
                )))
            }
        };
        match self {
            PlayerPolicy::Constant { action } => legal(*action),
            PlayerPolicy::Scripted { actions } => {
                if actions.is_empty() {
                    return Err(Error::invalid(format!("player {}: empty script", player + 1)));
                }
                actions.iter().try_for_each(|a| legal(*a))
            }
            PlayerPolicy::Threshold {
                coordinate,
                at_least,
                then,
                otherwise,
            } => {
                if !spec.observation_set(player).contains(coordinate) {
                    return Err(Error::invalid(format!(
                        "player {}: threshold reads ω_{} which the player does not observe",
                        player + 1,
                        coordinate + 1
                    )));
                }
                if !at_least.is_finite() {
                    return Err(Error::invalid("threshold must be finite"));
                }
                legal(*then)?;
                legal(*otherwise)
            }
            PlayerPolicy::GreedyObserved {
                assumed_actions,
                assumed_event,
            } => {
                if assumed_actions.len() != spec.num_players() {
                    return Err(Error::invalid(format!(
                        "player {}: assumed_actions needs {} entries",
                        player + 1,
                        spec.num_players()
                    )));
                }
                if assumed_event.len() != spec.event_dim() {
                    return Err(Error::invalid(format!(
                        "player {}: assumed_event needs {} entries",
                        player + 1,
                        spec.event_dim()
                    )));
                }
                for (j, a) in assumed_actions.iter().enumerate() {
                    if j != player && !spec.action_set(j).contains(a) {
                        return Err(Error::invalid(format!(
                            "player {}: assumed action {a} is illegal for player {}",
                            player + 1,
                            j + 1
                        )));
                    }
                }
                Ok(())
            }
            PlayerPolicy::Random => Ok(()),
        }
    }

    /// Whether the choice may depend on the round index or earlier rounds.
    pub fn is_stationary(&self) -> bool {
        !matches!(self, PlayerPolicy::Scripted { actions } if actions.len() > 1)
    }
}

/// The random stream used by player `player`'s policy.
pub fn policy_rng(seed: u64, player: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + player as u64);
    rng
}

/// A policy plus whatever it remembers between rounds.
#[derive(Clone, Debug)]
pub struct PolicyState {
    player: usize,
    policy: PlayerPolicy,
    position: usize,
    rng: ChaCha8Rng,
}

impl PolicyState {
    pub fn new(policy: PlayerPolicy, player: usize, seed: u64) -> Self {
        PolicyState {
            player,
            policy,
            position: 0,
            rng: policy_rng(seed, player),
        }
    }

    pub fn policy(&self) -> &PlayerPolicy {
        &self.policy
    }

    /// The baseline action for this round.
    pub fn decide(&mut self, spec: &GameSpec, obs: &Observation) -> Result<Action> {
        if obs.player != self.player {
            return Err(Error::invalid("observation belongs to another player"));
        }
        match &self.policy {
            PlayerPolicy::Constant { action } => Ok(*action),
            PlayerPolicy::Scripted { actions } => {
                let a = actions[self.position];
                self.position = (self.position + 1) % actions.len();
                Ok(a)
            }
            PlayerPolicy::Threshold {
                coordinate,
                at_least,
                then,
                otherwise,
            } => {
                let w = obs.get(*coordinate).ok_or_else(|| {
                    Error::invalid(format!("ω_{} is not observed", coordinate + 1))
                })?;
                Ok(if w >= *at_least { *then } else { *otherwise })
            }
            PlayerPolicy::GreedyObserved {
                assumed_actions,
                assumed_event,
            } => {
                let mut event = assumed_event.clone();
                for (&j, &w) in &obs.visible {
                    event[j] = w;
                }
                let mut actions = assumed_actions.clone();
                let mut u = vec![0.0; spec.num_players()];
                let mut best: Option<(Action, f64)> = None;
                for &a in spec.action_set(self.player) {
                    actions[self.player] = a;
                    spec.evaluate_unchecked(&actions, &event, &mut u)?;
                    let v = u[self.player];
                    if best.map_or(true, |(_, b)| v > b) {
                        best = Some((a, v));
                    }
                }
                best.map(|(a, _)| a)
                    .ok_or_else(|| Error::invalid("empty action set"))
            }
            PlayerPolicy::Random => {
                let set = spec.action_set(self.player);
                Ok(set[self.rng.random_range(0..set.len())])
            }
        }
    }
}

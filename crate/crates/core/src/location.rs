//! The location-reward game and its two-location example instances.
//!
//! Every round each location `m` carries a reward `ω_m`. Each player picks
//! one location; the reward of a location is split evenly among the players
//! that picked it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameSpec, UtilityModel, UtilityVector};
use crate::sim::generator::{EventGenerator, SupportPoint};
use crate::sim::policy::PlayerPolicy;

pub const LOCATION_REWARD: &str = "location_reward";

/// Utility model of the location-reward game. Actions are location labels
/// `1..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationReward {
    num_locations: usize,
}

impl LocationReward {
    pub fn new(num_locations: usize) -> Self {
        LocationReward { num_locations }
    }
}

impl UtilityModel for LocationReward {
    fn name(&self) -> &str {
        LOCATION_REWARD
    }

    fn params(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn evaluate(&self, actions: &[Action], event: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, &a) in actions.iter().enumerate() {
            if a == 0 || a as usize > self.num_locations {
                return Err(Error::invalid(format!(
                    "player {} chose location {a}, valid locations are 1..={}",
                    i + 1,
                    self.num_locations
                )));
            }
            let crowd = actions.iter().filter(|&&b| b == a).count();
            out[i] = event[a as usize - 1] / crowd as f64;
        }
        Ok(())
    }
}

pub(crate) fn build_location_reward(
    params: &serde_json::Value,
    action_sets: &[Vec<Action>],
    event_dim: usize,
) -> Result<Arc<dyn UtilityModel>> {
    if !params.is_null() && params.as_object().map_or(true, |o| !o.is_empty()) {
        return Err(Error::invalid("location_reward takes no parameters"));
    }
    for (i, set) in action_sets.iter().enumerate() {
        if let Some(a) = set.iter().find(|&&a| a == 0 || a as usize > event_dim) {
            return Err(Error::invalid(format!(
                "player {} may choose location {a}, valid locations are 1..={event_dim}",
                i + 1
            )));
        }
    }
    Ok(Arc::new(LocationReward::new(event_dim)))
}

/// `u_i = ω_{α_i} / K_{α_i}` where `K_m` counts players at location `m`.
/// The number of locations is the length of `event`.
pub fn location_utility(actions: &[Action], event: &[f64]) -> Result<UtilityVector> {
    let mut out = vec![0.0; actions.len()];
    LocationReward::new(event.len()).evaluate(actions, event, &mut out)?;
    Ok(UtilityVector(out))
}

/// A location-reward game described by locations rather than generic sets.
/// Location labels and known-location lists are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationGame {
    pub num_locations: usize,
    /// Locations each player may choose.
    pub allowed: Vec<Vec<Action>>,
    /// Locations whose reward each player sees.
    pub known: Vec<Vec<usize>>,
}

impl LocationGame {
    /// Embeds the game; `utility_caps` would normally be the largest reward
    /// that can appear.
    pub fn into_spec(self, utility_caps: Vec<f64>) -> Result<GameSpec> {
        if self.allowed.iter().any(|s| s.is_empty())
            || self.known.iter().any(|s| s.is_empty())
        {
            return Err(Error::invalid("allowed and known location sets must be non-empty"));
        }
        let observation_sets = self
            .known
            .iter()
            .map(|set| {
                set.iter()
                    .map(|&m| {
                        if m == 0 || m > self.num_locations {
                            Err(Error::invalid(format!("unknown location {m}")))
                        } else {
                            Ok(m - 1)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let utility = build_location_reward(&serde_json::Value::Null, &self.allowed, self.num_locations)?;
        GameSpec::new(
            self.num_locations,
            observation_sets,
            self.allowed,
            utility,
            utility_caps,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    Example1,
    Example2,
    Example3,
}

impl ExampleId {
    pub const ALL: [ExampleId; 3] = [ExampleId::Example1, ExampleId::Example2, ExampleId::Example3];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::Example1 => "example1",
            ExampleId::Example2 => "example2",
            ExampleId::Example3 => "example3",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ExampleId::Example1),
            "example2" => Ok(ExampleId::Example2),
            "example3" => Ok(ExampleId::Example3),
            other => Err(Error::invalid(format!("unknown example id {other:?}"))),
        }
    }
}

/// Whether player 2 reveals `ω_2` to player 1 before decisions are made.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    NoShare,
    Share,
}

impl Sharing {
    pub fn as_str(self) -> &'static str {
        match self {
            Sharing::NoShare => "no_share",
            Sharing::Share => "share",
        }
    }
}

/// Choices in example 3 under sharing when `ω_2 = 2`, where no single best
/// reply exists. The default reproduces the no-share allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Example3LowRewardChoice {
    pub player1: Action,
    pub player2: Action,
}

impl Default for Example3LowRewardChoice {
    fn default() -> Self {
        Example3LowRewardChoice {
            player1: 2,
            player2: 1,
        }
    }
}

/// One of the three two-player, two-location example games together with
/// its reward distribution and the players' stand-alone strategies.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: ExampleId,
    pub sharing: Sharing,
    pub spec: GameSpec,
    pub generator: EventGenerator,
    pub policies: Vec<PlayerPolicy>,
    /// Long-run average utilities `(ū_1, ū_2)` of these strategies.
    pub reference: [f64; 2],
}

/// The constant reward at location 1.
pub const LEFT_REWARD: f64 = 2.2;
pub const HIGH_REWARD: f64 = 10.0;
pub const LOW_REWARD: f64 = 2.0;

fn high_probability(id: ExampleId) -> f64 {
    match id {
        ExampleId::Example1 => 0.2,
        ExampleId::Example2 | ExampleId::Example3 => 0.5,
    }
}

/// Reward distribution: `ω_1 ≡ 2.2`, `ω_2 = 10` with probability `p` and `2`
/// otherwise (`p = 1/5` for example 1, `1/2` for examples 2 and 3).
pub fn example_generator(id: ExampleId) -> EventGenerator {
    let p = high_probability(id);
    EventGenerator::Iid {
        support: vec![
            SupportPoint::new([LEFT_REWARD, HIGH_REWARD], p),
            SupportPoint::new([LEFT_REWARD, LOW_REWARD], 1.0 - p),
        ],
    }
}

/// The example game. Player 1 may use both locations; player 2 only
/// location 2 except in example 3. Under [`Sharing::Share`] player 1 also
/// observes `ω_2`.
pub fn example_spec(id: ExampleId, sharing: Sharing) -> Result<GameSpec> {
    let allowed = match id {
        ExampleId::Example1 | ExampleId::Example2 => vec![vec![1, 2], vec![2]],
        ExampleId::Example3 => vec![vec![1, 2], vec![1, 2]],
    };
    let known = match sharing {
        Sharing::NoShare => vec![vec![1], vec![2]],
        Sharing::Share => vec![vec![1, 2], vec![2]],
    };
    LocationGame {
        num_locations: 2,
        allowed,
        known,
    }
    .into_spec(vec![HIGH_REWARD, HIGH_REWARD])
}

/// Go to location 2 when the high reward is visible there, else `otherwise`.
fn chase_high(otherwise: Action) -> PlayerPolicy {
    PlayerPolicy::Threshold {
        coordinate: 1,
        at_least: HIGH_REWARD,
        then: 2,
        otherwise,
    }
}

/// Scripted stand-alone strategies of each example:
///
/// * example 1, no share: player 1 always takes location 1.
/// * examples 1 and 2, share: player 1 takes location 2 only when `ω_2 = 10`.
/// * example 2, no share: player 1 always takes location 2.
/// * example 3, no share: player 1 always takes location 2; player 2 takes
///   location 2 when `ω_2 = 10`, else location 1.
/// * example 3, share: both take location 2 when `ω_2 = 10`; otherwise
///   `low` decides.
pub fn example_policies(
    id: ExampleId,
    sharing: Sharing,
    low: Example3LowRewardChoice,
) -> Vec<PlayerPolicy> {
    use PlayerPolicy::Constant;
    match (id, sharing) {
        (ExampleId::Example1, Sharing::NoShare) => vec![Constant { action: 1 }, Constant { action: 2 }],
        (ExampleId::Example2, Sharing::NoShare) => vec![Constant { action: 2 }, Constant { action: 2 }],
        (ExampleId::Example1 | ExampleId::Example2, Sharing::Share) => {
            vec![chase_high(1), Constant { action: 2 }]
        }
        (ExampleId::Example3, Sharing::NoShare) => vec![Constant { action: 2 }, chase_high(1)],
        (ExampleId::Example3, Sharing::Share) => vec![chase_high(low.player1), chase_high(low.player2)],
    }
}

/// Closed-form average utilities of the scripted strategies.
pub fn reference_averages(id: ExampleId, sharing: Sharing) -> [f64; 2] {
    match (id, sharing) {
        (ExampleId::Example1, Sharing::NoShare) => [2.2, 3.6],
        (ExampleId::Example1, Sharing::Share) => [2.76, 2.6],
        (ExampleId::Example2, Sharing::NoShare) => [3.0, 3.0],
        (ExampleId::Example2, Sharing::Share) => [3.6, 3.5],
        (ExampleId::Example3, _) => [3.5, 3.6],
    }
}

pub fn make_example(id: ExampleId, sharing: Sharing) -> Result<Example> {
    make_example_with(id, sharing, Example3LowRewardChoice::default())
}

pub fn make_example_with(
    id: ExampleId,
    sharing: Sharing,
    low: Example3LowRewardChoice,
) -> Result<Example> {
    Ok(Example {
        id,
        sharing,
        spec: example_spec(id, sharing)?,
        generator: example_generator(id),
        policies: example_policies(id, sharing, low),
        reference: reference_averages(id, sharing),
    })
}

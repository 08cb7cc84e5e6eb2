//! The causal game manager.
//!
//! Every round the manager receives the full event vector ω(t) and the
//! players' baseline actions b(t), suggests an action vector α̃(t), and
//! updates its virtual queues. Four decision rules are available:
//!
//! | variant                | proxy γ(t)                 | suggestion maximizes          | over      | queues |
//! |------------------------|----------------------------|-------------------------------|-----------|--------|
//! | `weighted`             | none                       | `Σ û_i (Vθ_i + Q_i)`          | all α     | Q      |
//! | `concave`              | `argmax Vφ(γ) − Σ Z_i γ_i` | `Σ û_i (Q_i + Z_i)`           | all α     | Q, Z   |
//! | `conservative_linear`  | none                       | `Σ θ_i û_i`                   | A(b, ω)   | none   |
//! | `conservative_concave` | `argmax Vφ(γ) − Σ Z_i γ_i` | `Σ Z_i û_i`                   | A(b, ω)   | Z      |
//!
//! `A(b, ω)` holds the action vectors that give every player at least its
//! baseline utility this round. A fifth variant, `baseline`, echoes b(t) and
//! serves as the no-manager reference.
//!
//! All maximizations are exhaustive over the enumerated joint actions; ties
//! go to the first candidate in enumeration order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{enumerate_joint_actions, ActionVector, EventVector, GameSpec, UtilityVector};
use crate::phi::{Phi, PhiKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManagerConfig {
    /// Suggest the baseline itself.
    Baseline,
    Weighted {
        #[serde(rename = "V")]
        v: f64,
        theta: Vec<f64>,
    },
    Concave {
        #[serde(rename = "V")]
        v: f64,
        phi: PhiKind,
    },
    ConservativeLinear { theta: Vec<f64> },
    ConservativeConcave {
        #[serde(rename = "V")]
        v: f64,
        phi: PhiKind,
    },
}

impl ManagerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ManagerConfig::Baseline => "baseline",
            ManagerConfig::Weighted { .. } => "weighted",
            ManagerConfig::Concave { .. } => "concave",
            ManagerConfig::ConservativeLinear { .. } => "conservative_linear",
            ManagerConfig::ConservativeConcave { .. } => "conservative_concave",
        }
    }

    /// The tradeoff parameter, where the variant has one.
    pub fn v(&self) -> Option<f64> {
        match self {
            ManagerConfig::Weighted { v, .. }
            | ManagerConfig::Concave { v, .. }
            | ManagerConfig::ConservativeConcave { v, .. } => Some(*v),
            _ => None,
        }
    }

    /// Same variant with a different `V`; variants without `V` are returned
    /// unchanged.
    pub fn with_v(&self, new_v: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ManagerConfig::Weighted { v, .. }
            | ManagerConfig::Concave { v, .. }
            | ManagerConfig::ConservativeConcave { v, .. } => *v = new_v,
            _ => {}
        }
        c
    }

    pub fn uses_q(&self) -> bool {
        matches!(self, ManagerConfig::Weighted { .. } | ManagerConfig::Concave { .. })
    }

    pub fn uses_z(&self) -> bool {
        matches!(
            self,
            ManagerConfig::Concave { .. } | ManagerConfig::ConservativeConcave { .. }
        )
    }

    pub fn is_conservative(&self) -> bool {
        matches!(
            self,
            ManagerConfig::ConservativeLinear { .. } | ManagerConfig::ConservativeConcave { .. }
        )
    }
}

/// Queue state carried between rounds. `Q ≥ 0` always; `Z` is signed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManagerState {
    pub t: u64,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
}

impl ManagerState {
    pub fn new(num_players: usize) -> Self {
        ManagerState {
            t: 0,
            q: vec![0.0; num_players],
            z: vec![0.0; num_players],
        }
    }

    /// Lyapunov value `½‖Q‖² + ½‖Z‖²`; diagnostics only.
    pub fn lyapunov(&self) -> f64 {
        0.5 * self.q.iter().chain(&self.z).map(|x| x * x).sum::<f64>()
    }
}

/// `Q_i' = max(Q_i + x_i − u_i, 0)`. The round counter is left alone.
pub fn update_queue_q(state: &ManagerState, x: &[f64], u: &[f64]) -> ManagerState {
    let q = state
        .q
        .iter()
        .zip(x)
        .zip(u)
        .map(|((q, x), u)| (q + x - u).max(0.0))
        .collect();
    ManagerState {
        q,
        ..state.clone()
    }
}

/// `Z_i' = Z_i + γ_i − u_i`, no clamping.
pub fn update_queue_z(state: &ManagerState, gamma: &[f64], u: &[f64]) -> ManagerState {
    let z = state
        .z
        .iter()
        .zip(gamma)
        .zip(u)
        .map(|((z, g), u)| z + g - u)
        .collect();
    ManagerState {
        z,
        ..state.clone()
    }
}

/// Constants of the drift bounds for a game and configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `½ Σ (u_i^max)²`, the single-queue drift constant.
    pub b: f64,
    /// `Σ |θ_i| u_i^max` for the linear variants.
    pub c_linear: Option<f64>,
    /// `Σ (u_i^max)²`, the two-queue drift constant.
    pub c_concave: f64,
    /// Drift constant of the Z-only conservative rule, `½ Σ (u_i^max)²`.
    pub d: f64,
    pub phi_max: Option<f64>,
    pub lipschitz: Option<f64>,
}

impl BoundConstants {
    pub fn new(caps: &[f64], theta: Option<&[f64]>, phi: Option<&Phi>) -> Self {
        let sq: f64 = caps.iter().map(|c| c * c).sum();
        BoundConstants {
            b: 0.5 * sq,
            c_linear: theta.map(|t| t.iter().zip(caps).map(|(t, c)| t.abs() * c).sum()),
            c_concave: sq,
            d: 0.5 * sq,
            phi_max: phi.map(Phi::phi_max),
            lipschitz: phi.map(Phi::lipschitz_bound),
        }
    }
}

/// Everything the manager decides in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub suggestion: ActionVector,
    /// Proxy vector, concave variants only.
    pub gamma: Option<Vec<f64>>,
    /// Utilities under the suggestion.
    pub u: UtilityVector,
    /// Utilities under the baselines.
    pub x: UtilityVector,
    /// Value of the maximized suggestion objective.
    pub objective: f64,
    pub constants: BoundConstants,
}

/// Utilities of every joint action under one event vector.
struct UtilityTable {
    n: usize,
    values: Vec<f64>,
}

impl UtilityTable {
    fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }
}

fn weighted(row: &[f64], weights: &[f64]) -> f64 {
    row.iter().zip(weights).map(|(u, w)| u * w).sum()
}

/// A manager bound to one game and configuration.
#[derive(Clone, Debug)]
pub struct Manager {
    spec: Arc<GameSpec>,
    config: ManagerConfig,
    phi: Option<Phi>,
    joint: Vec<ActionVector>,
    constants: BoundConstants,
}

impl Manager {
    pub fn new(spec: Arc<GameSpec>, config: ManagerConfig, guard_limit: u64) -> Result<Self> {
        let n = spec.num_players();
        let check_v = |v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("V must be finite and non-negative, got {v}")))
            }
        };
        let check_theta = |theta: &[f64]| -> Result<()> {
            if theta.len() != n || theta.iter().any(|t| !t.is_finite()) {
                Err(Error::invalid(format!("theta must hold {n} finite weights")))
            } else {
                Ok(())
            }
        };
        let mut theta = None;
        let phi = match &config {
            ManagerConfig::Baseline => None,
            ManagerConfig::Weighted { v, theta: th } => {
                check_v(*v)?;
                check_theta(th)?;
                theta = Some(th.as_slice());
                None
            }
            ManagerConfig::ConservativeLinear { theta: th } => {
                check_theta(th)?;
                theta = Some(th.as_slice());
                None
            }
            ManagerConfig::Concave { v, phi } | ManagerConfig::ConservativeConcave { v, phi } => {
                check_v(*v)?;
                Some(Phi::new(phi.clone(), spec.utility_caps())?)
            }
        };
        let constants = BoundConstants::new(spec.utility_caps(), theta, phi.as_ref());
        let joint = enumerate_joint_actions(&spec, guard_limit)?;
        if joint.is_empty() {
            return Err(Error::invalid("some player has an empty action set"));
        }
        Ok(Manager {
            spec,
            config,
            phi,
            joint,
            constants,
        })
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.config
    }

    pub fn phi(&self) -> Option<&Phi> {
        self.phi.as_ref()
    }

    pub fn constants(&self) -> BoundConstants {
        self.constants
    }

    pub fn joint_actions(&self) -> &[ActionVector] {
        &self.joint
    }

    fn table(&self, event: &[f64]) -> Result<UtilityTable> {
        let n = self.spec.num_players();
        let mut values = vec![0.0; self.joint.len() * n];
        for (k, a) in self.joint.iter().enumerate() {
            self.spec
                .evaluate_unchecked(a, event, &mut values[k * n..(k + 1) * n])?;
        }
        Ok(UtilityTable { n, values })
    }

    fn baseline_utilities(&self, event: &[f64], baseline: &[u32]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.spec.num_players()];
        self.spec.evaluate_unchecked(baseline, event, &mut x)?;
        Ok(x)
    }

    fn check_round(&self, event: &EventVector, baseline: &ActionVector) -> Result<()> {
        self.spec.check_event(event)?;
        self.spec.check_actions(baseline)
    }

    /// First maximizer of `Σ w_i û_i` among `candidates` (indices into the
    /// joint-action list).
    fn argmax(
        table: &UtilityTable,
        candidates: impl IntoIterator<Item = usize>,
        weights: &[f64],
    ) -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for k in candidates {
            let val = weighted(table.row(k), weights);
            if best.0 == usize::MAX || val > best.1 {
                best = (k, val);
            }
        }
        best
    }

    /// Indices of `A(b, ω)`.
    fn feasible(table: &UtilityTable, x: &[f64]) -> Vec<usize> {
        (0..table.values.len() / table.n)
            .filter(|&k| table.row(k).iter().zip(x).all(|(u, x)| u >= x))
            .collect()
    }

    /// The suggestion maximizing `Σ w_i û_i(α, ω)` over all joint actions, or
    /// over `A(b, ω)` when `baseline` is given. Exposed for post-hoc checks.
    pub fn suggest_with_weights(
        &self,
        event: &EventVector,
        weights: &[f64],
        baseline: Option<&ActionVector>,
    ) -> Result<(ActionVector, f64)> {
        self.spec.check_event(event)?;
        let table = self.table(event)?;
        let (k, val) = match baseline {
            Some(b) => {
                self.spec.check_actions(b)?;
                let x = self.baseline_utilities(event, b)?;
                Self::argmax(&table, Self::feasible(&table, &x), weights)
            }
            None => Self::argmax(&table, 0..self.joint.len(), weights),
        };
        Ok((self.joint[k].clone(), val))
    }

    fn finish(
        &self,
        table: &UtilityTable,
        k: usize,
        objective: f64,
        x: Vec<f64>,
        gamma: Option<Vec<f64>>,
    ) -> StepOutput {
        StepOutput {
            suggestion: self.joint[k].clone(),
            gamma,
            u: UtilityVector(table.row(k).to_vec()),
            x: UtilityVector(x),
            objective,
            constants: self.constants,
        }
    }

    /// Maximizes `Σ û_i(α, ω)(Vθ_i + Q_i)`. Does not touch the state.
    pub fn weighted_step(
        &self,
        state: &ManagerState,
        event: &EventVector,
        baseline: &ActionVector,
    ) -> Result<StepOutput> {
        let ManagerConfig::Weighted { v, theta } = &self.config else {
            return Err(Error::invalid("weighted_step needs the weighted variant"));
        };
        self.check_round(event, baseline)?;
        let weights: Vec<f64> = theta.iter().zip(&state.q).map(|(t, q)| v * t + q).collect();
        let table = self.table(event)?;
        let (k, obj) = Self::argmax(&table, 0..self.joint.len(), &weights);
        let x = self.baseline_utilities(event, baseline)?;
        Ok(self.finish(&table, k, obj, x, None))
    }

    /// Picks γ from the proxy problem, then maximizes `Σ û_i (Q_i + Z_i)`.
    pub fn concave_step(
        &self,
        state: &ManagerState,
        event: &EventVector,
        baseline: &ActionVector,
    ) -> Result<StepOutput> {
        let (ManagerConfig::Concave { v, .. }, Some(phi)) = (&self.config, &self.phi) else {
            return Err(Error::invalid("concave_step needs the concave variant"));
        };
        self.check_round(event, baseline)?;
        let gamma = phi.proxy_argmax(&state.z, *v)?;
        let weights: Vec<f64> = state.q.iter().zip(&state.z).map(|(q, z)| q + z).collect();
        let table = self.table(event)?;
        let (k, obj) = Self::argmax(&table, 0..self.joint.len(), &weights);
        let x = self.baseline_utilities(event, baseline)?;
        Ok(self.finish(&table, k, obj, x, Some(gamma)))
    }

    /// Maximizes `Σ θ_i û_i` over `A(b, ω)`. No queues.
    pub fn conservative_linear_step(
        &self,
        event: &EventVector,
        baseline: &ActionVector,
    ) -> Result<StepOutput> {
        let ManagerConfig::ConservativeLinear { theta } = &self.config else {
            return Err(Error::invalid(
                "conservative_linear_step needs the conservative_linear variant",
            ));
        };
        self.check_round(event, baseline)?;
        let table = self.table(event)?;
        let x = self.baseline_utilities(event, baseline)?;
        let (k, obj) = Self::argmax(&table, Self::feasible(&table, &x), theta);
        Ok(self.finish(&table, k, obj, x, None))
    }

    /// Picks γ from the proxy problem, then maximizes `Σ Z_i û_i` over `A(b, ω)`.
    pub fn conservative_concave_step(
        &self,
        state: &ManagerState,
        event: &EventVector,
        baseline: &ActionVector,
    ) -> Result<StepOutput> {
        let (ManagerConfig::ConservativeConcave { v, .. }, Some(phi)) = (&self.config, &self.phi)
        else {
            return Err(Error::invalid(
                "conservative_concave_step needs the conservative_concave variant",
            ));
        };
        self.check_round(event, baseline)?;
        let gamma = phi.proxy_argmax(&state.z, *v)?;
        let table = self.table(event)?;
        let x = self.baseline_utilities(event, baseline)?;
        let (k, obj) = Self::argmax(&table, Self::feasible(&table, &x), &state.z);
        Ok(self.finish(&table, k, obj, x, Some(gamma)))
    }

    fn baseline_step(&self, event: &EventVector, baseline: &ActionVector) -> Result<StepOutput> {
        self.check_round(event, baseline)?;
        let x = self.baseline_utilities(event, baseline)?;
        Ok(StepOutput {
            suggestion: baseline.clone(),
            gamma: None,
            u: UtilityVector(x.clone()),
            x: UtilityVector(x),
            objective: 0.0,
            constants: self.constants,
        })
    }

    /// One full round: decide, apply the variant's queue updates, advance `t`.
    /// Reads only the current round's inputs and the carried state.
    pub fn run_round(
        &self,
        state: &ManagerState,
        event: &EventVector,
        baseline: &ActionVector,
    ) -> Result<(ManagerState, StepOutput)> {
        let out = match &self.config {
            ManagerConfig::Baseline => self.baseline_step(event, baseline)?,
            ManagerConfig::Weighted { .. } => self.weighted_step(state, event, baseline)?,
            ManagerConfig::Concave { .. } => self.concave_step(state, event, baseline)?,
            ManagerConfig::ConservativeLinear { .. } => {
                self.conservative_linear_step(event, baseline)?
            }
            ManagerConfig::ConservativeConcave { .. } => {
                self.conservative_concave_step(state, event, baseline)?
            }
        };
        let mut next = if self.config.uses_q() {
            update_queue_q(state, &out.x, &out.u)
        } else {
            state.clone()
        };
        if self.config.uses_z() {
            let gamma = out.gamma.as_deref().expect("concave variants produce γ");
            next = update_queue_z(&next, gamma, &out.u);
        }
        next.t = state.t + 1;
        Ok((next, out))
    }
}

/// `A(b, ω)`: every joint action giving each player at least its baseline
/// utility. Always contains `b`.
pub fn conservative_feasible_set(
    spec: &GameSpec,
    baseline: &ActionVector,
    event: &EventVector,
    guard_limit: u64,
) -> Result<Vec<ActionVector>> {
    spec.check_actions(baseline)?;
    spec.check_event(event)?;
    let n = spec.num_players();
    let mut x = vec![0.0; n];
    spec.evaluate_unchecked(baseline, event, &mut x)?;
    let mut u = vec![0.0; n];
    let mut out = Vec::new();
    for a in enumerate_joint_actions(spec, guard_limit)? {
        spec.evaluate_unchecked(&a, event, &mut u)?;
        if u.iter().zip(&x).all(|(u, x)| u >= x) {
            out.push(a);
        }
    }
    Ok(out)
}

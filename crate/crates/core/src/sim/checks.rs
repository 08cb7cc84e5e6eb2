//! Streaming checks of the manager's guarantees against a trace.
//!
//! Each check consumes records in round order and reports a [`Verdict`]
//! with the worst slack seen and the first violation. Inequalities are
//! accepted with [`TOLERANCE`] absolute slack. Checks read only the trace
//! (plus the game and configuration where they need to re-evaluate
//! utilities), so they work the same on a live run and on a file read back.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionVector, EventVector, GameSpec};
use crate::lookahead::{frame_psis, Objective, OracleProblem};
use crate::manager::{Manager, ManagerConfig};
use crate::phi::Phi;
use crate::sim::trace::RoundRecord;
use crate::stats::{norm, CompensatedSum, RunningMean};

pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Rounds completed when the violation was seen.
    pub round: u64,
    /// 1-based player, when the inequality is per player.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    /// Number of inequalities evaluated.
    pub evaluated: u64,
    /// Smallest `rhs − lhs` (for `lhs ≤ rhs`) seen; negative means violated.
    pub worst_slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {} evaluated, worst slack {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.check,
            self.evaluated,
            self.worst_slack
        )?;
        if let Some(v) = &self.violation {
            write!(f, "; first violation after {} rounds", v.round)?;
            if let Some(p) = v.player {
                write!(f, " player {p}")?;
            }
            write!(f, " ({} > {})", v.lhs, v.rhs)?;
        }
        if let Some(n) = &self.note {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

/// Running worst case of `lhs ≤ rhs`.
#[derive(Clone, Debug)]
struct Tally {
    name: String,
    evaluated: u64,
    worst: f64,
    violation: Option<Violation>,
    note: Option<String>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Tally {
            name: name.into(),
            evaluated: 0,
            worst: f64::INFINITY,
            violation: None,
            note: None,
        }
    }

    fn tol(&mut self, round: u64, player: Option<usize>, lhs: f64, rhs: f64, tol: f64) {
        self.evaluated += 1;
        let slack = rhs - lhs;
        // NaN slack counts as a violation
        let ok = slack >= -tol;
        if slack < self.worst || slack.is_nan() {
            self.worst = slack;
        }
        if !ok && self.violation.is_none() {
            self.violation = Some(Violation {
                round,
                player: player.map(|p| p + 1),
                lhs,
                rhs,
            });
        }
    }

    fn le(&mut self, round: u64, player: Option<usize>, lhs: f64, rhs: f64) {
        self.tol(round, player, lhs, rhs, TOLERANCE);
    }

    fn verdict(&self) -> Verdict {
        Verdict {
            check: self.name.clone(),
            passed: self.violation.is_none(),
            evaluated: self.evaluated,
            worst_slack: if self.evaluated == 0 { 0.0 } else { self.worst },
            violation: self.violation.clone(),
            note: self.note.clone(),
        }
    }
}

pub trait Check: Send {
    fn name(&self) -> &str;
    fn observe(&mut self, r: &RoundRecord) -> Result<()>;
    fn finish(&mut self) -> Result<Verdict>;
}

fn rounds(r: &RoundRecord) -> f64 {
    r.rounds() as f64
}

/// Stored averages agree with averages recomputed from the per-round
/// columns, and rounds are numbered 0, 1, 2, ….
pub struct AverageConsistency {
    tally: Tally,
    u: Option<RunningMean>,
    x: Option<RunningMean>,
    g: Option<RunningMean>,
    expected_t: u64,
}

impl AverageConsistency {
    pub fn new() -> Self {
        AverageConsistency {
            tally: Tally::new("average_consistency"),
            u: None,
            x: None,
            g: None,
            expected_t: 0,
        }
    }
}

impl Default for AverageConsistency {
    fn default() -> Self {
        Self::new()
    }
}

impl Check for AverageConsistency {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let n = r.u.len();
        let round = r.rounds();
        if r.t != self.expected_t {
            self.tally.le(round, None, r.t as f64, self.expected_t as f64);
            self.tally.le(round, None, self.expected_t as f64, r.t as f64);
        }
        self.expected_t = r.t + 1;
        let u = self.u.get_or_insert_with(|| RunningMean::new(n));
        u.push(&r.u);
        let x = self.x.get_or_insert_with(|| RunningMean::new(n));
        x.push(&r.x);
        let pairs = [(u.mean(), &r.ubar), (x.mean(), &r.xbar)];
        for (recomputed, stored) in pairs {
            for (i, (a, b)) in recomputed.iter().zip(stored.iter()).enumerate() {
                self.tally.le(round, Some(i), (a - b).abs(), 0.0);
            }
        }
        if let (Some(gamma), Some(gbar)) = (&r.gamma, &r.gbar) {
            let g = self.g.get_or_insert_with(|| RunningMean::new(n));
            g.push(gamma);
            for (i, (a, b)) in g.mean().iter().zip(gbar).enumerate() {
                self.tally.le(round, Some(i), (a - b).abs(), 0.0);
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// `ū_i(t) ≥ x̄_i(t) − Q_i(t)/t`, which holds for any suggestions because
/// the queue dominates the accumulated shortfall.
pub struct QueueEnvelope {
    tally: Tally,
}

impl QueueEnvelope {
    pub fn new() -> Self {
        QueueEnvelope {
            tally: Tally::new("queue_envelope"),
        }
    }
}

impl Default for QueueEnvelope {
    fn default() -> Self {
        Self::new()
    }
}

impl Check for QueueEnvelope {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let t = rounds(r);
        for i in 0..r.ubar.len() {
            self.tally
                .le(r.rounds(), Some(i), r.xbar[i] - r.q[i] / t, r.ubar[i]);
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// Which queues a growth bound covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Queues {
    Q,
    Z,
    Both,
}

/// `‖queues(t)‖ / t ≤ √(K / t)`.
pub struct QueueGrowth {
    tally: Tally,
    queues: Queues,
    k: f64,
}

impl QueueGrowth {
    pub fn new(name: impl Into<String>, queues: Queues, k: f64) -> Self {
        QueueGrowth {
            tally: Tally::new(name),
            queues,
            k,
        }
    }
}

impl Check for QueueGrowth {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let t = rounds(r);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let total = match self.queues {
            Queues::Q => sq(&r.q),
            Queues::Z => sq(&r.z),
            Queues::Both => sq(&r.q) + sq(&r.z),
        };
        self.tally.le(r.rounds(), None, total.sqrt() / t, (self.k / t).sqrt());
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// `ū_i(t) − x̄_i(t) ≥ −√(K / t)` for every player.
pub struct RegretBound {
    tally: Tally,
    k: f64,
}

impl RegretBound {
    pub fn new(name: impl Into<String>, k: f64) -> Self {
        RegretBound {
            tally: Tally::new(name),
            k,
        }
    }
}

impl Check for RegretBound {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let env = (self.k / rounds(r)).sqrt();
        for i in 0..r.ubar.len() {
            self.tally.le(r.rounds(), Some(i), -env, r.ubar[i] - r.xbar[i]);
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// `φ(ū(t)) ≥ (1/t) Σ_τ φ(γ(τ)) − L √(K / t)`.
pub struct UtilityVsProxy {
    tally: Tally,
    phi: Phi,
    k: f64,
    phi_gamma: CompensatedSum,
}

impl UtilityVsProxy {
    pub fn new(name: impl Into<String>, phi: Phi, k: f64) -> Self {
        UtilityVsProxy {
            tally: Tally::new(name),
            phi,
            k,
            phi_gamma: CompensatedSum::new(),
        }
    }
}

impl Check for UtilityVsProxy {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let gamma = r
            .gamma
            .as_ref()
            .ok_or_else(|| Error::Format(format!("round {}: missing proxy vector", r.t)))?;
        self.phi_gamma.add(self.phi.eval(gamma)?);
        let t = rounds(r);
        let lhs = self.phi_gamma.value() / t - self.phi.lipschitz_bound() * (self.k / t).sqrt();
        self.tally.le(r.rounds(), None, lhs, self.phi.eval(&r.ubar)?);
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// `‖ū(t) − γ̄(t)‖ = ‖Z(t)‖ / t`.
pub struct ProxyIdentity {
    tally: Tally,
}

impl ProxyIdentity {
    pub fn new() -> Self {
        ProxyIdentity {
            tally: Tally::new("proxy_identity"),
        }
    }
}

impl Default for ProxyIdentity {
    fn default() -> Self {
        Self::new()
    }
}

impl Check for ProxyIdentity {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let gbar = r
            .gbar
            .as_ref()
            .ok_or_else(|| Error::Format(format!("round {}: missing proxy average", r.t)))?;
        let diff: Vec<f64> = r.ubar.iter().zip(gbar).map(|(u, g)| u - g).collect();
        let gap = (norm(&diff) - norm(&r.z) / rounds(r)).abs();
        self.tally.le(r.rounds(), None, gap, 0.0);
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// `u_i(t) ≥ x_i(t)` in every round, exactly.
pub struct PerRoundDominance {
    tally: Tally,
}

impl PerRoundDominance {
    pub fn new() -> Self {
        PerRoundDominance {
            tally: Tally::new("per_round_dominance"),
        }
    }
}

impl Default for PerRoundDominance {
    fn default() -> Self {
        Self::new()
    }
}

impl Check for PerRoundDominance {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        for (i, (u, x)) in r.u.iter().zip(r.x.iter()).enumerate() {
            self.tally.tol(r.rounds(), Some(i), *x, *u, 0.0);
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// Re-derives each round's decision from the previous round's queues:
/// recorded utilities match the game, γ matches the proxy problem, the
/// suggestion attains the maximum of the per-round objective, conservative
/// suggestions lie in `A(b, ω)`, and queues follow their update rules.
pub struct DecisionConsistency {
    tally: Tally,
    manager: Manager,
    prev_q: Vec<f64>,
    prev_z: Vec<f64>,
}

impl DecisionConsistency {
    pub fn new(manager: Manager) -> Self {
        let n = manager.spec().num_players();
        DecisionConsistency {
            tally: Tally::new("decision_consistency"),
            manager,
            prev_q: vec![0.0; n],
            prev_z: vec![0.0; n],
        }
    }

    fn equal(&mut self, round: u64, player: Option<usize>, a: f64, b: f64) {
        self.tally.le(round, player, (a - b).abs(), 0.0);
    }
}

impl Check for DecisionConsistency {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        let spec = self.manager.spec().clone();
        let n = spec.num_players();
        let round = r.rounds();
        let mut u = vec![0.0; n];
        spec.evaluate_unchecked(&r.suggestion, &r.omega, &mut u)?;
        let mut x = vec![0.0; n];
        spec.evaluate_unchecked(&r.baseline, &r.omega, &mut x)?;
        for i in 0..n {
            self.equal(round, Some(i), u[i], r.u[i]);
            self.equal(round, Some(i), x[i], r.x[i]);
        }

        let config = self.manager.config().clone();
        let weights: Option<Vec<f64>> = match &config {
            ManagerConfig::Baseline => {
                if r.suggestion != r.baseline {
                    self.tally.le(round, None, 1.0, 0.0);
                }
                None
            }
            ManagerConfig::Weighted { v, theta } => {
                Some(theta.iter().zip(&self.prev_q).map(|(t, q)| v * t + q).collect())
            }
            ManagerConfig::Concave { .. } => {
                Some(self.prev_q.iter().zip(&self.prev_z).map(|(q, z)| q + z).collect())
            }
            ManagerConfig::ConservativeLinear { theta } => Some(theta.clone()),
            ManagerConfig::ConservativeConcave { .. } => Some(self.prev_z.clone()),
        };
        if let Some(w) = weights {
            let baseline = config.is_conservative().then_some(&r.baseline);
            let (_, best) = self.manager.suggest_with_weights(&r.omega, &w, baseline)?;
            let achieved: f64 = u.iter().zip(&w).map(|(u, w)| u * w).sum();
            let scale = 1.0 + best.abs();
            self.tally.le(round, None, best - achieved, TOLERANCE * scale);
            if config.is_conservative() {
                for i in 0..n {
                    self.tally.tol(round, Some(i), x[i], u[i], 0.0);
                }
            }
        }

        if let (Some(phi), Some(v)) = (self.manager.phi(), config.v()) {
            let expected = phi.proxy_argmax(&self.prev_z, v)?;
            let gamma = r
                .gamma
                .as_ref()
                .ok_or_else(|| Error::Format(format!("round {}: missing proxy vector", r.t)))?;
            for i in 0..n {
                self.equal(round, Some(i), expected[i], gamma[i]);
            }
        }

        if config.uses_q() {
            for i in 0..n {
                let q = (self.prev_q[i] + r.x[i] - r.u[i]).max(0.0);
                self.equal(round, Some(i), q, r.q[i]);
            }
        }
        if config.uses_z() {
            if let Some(gamma) = &r.gamma {
                for (i, g) in gamma.iter().enumerate() {
                    let z = self.prev_z[i] + g - r.u[i];
                    self.equal(round, Some(i), z, r.z[i]);
                }
            }
        }
        self.prev_q.clone_from(&r.q);
        self.prev_z.clone_from(&r.z);
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        Ok(self.tally.verdict())
    }
}

/// What a frame-boundary comparison against the lookahead oracle asserts.
#[derive(Clone, Debug)]
enum FrameBound {
    /// `Σ θ_i ū_i(KT) ≥ ψ̄ − slack`
    Linear { slack: f64 },
    /// `(1/KT) Σ φ(γ(τ)) ≥ ψ̄ − slack` and
    /// `φ(ū(KT)) ≥ ψ̄ − slack − L √(K'/KT)`
    ConcaveWithProxy { phi: Phi, slack: f64, k: f64 },
    /// `φ(ū(KT)) ≥ ψ̄ − slack − L √(K'/KT)`
    Concave { phi: Phi, slack: f64, k: f64 },
}

struct PendingFrame {
    events: Vec<EventVector>,
    baselines: Vec<ActionVector>,
    round: u64,
    lhs_utility: f64,
    lhs_proxy: Option<f64>,
}

const FRAME_BATCH: usize = 4096;

/// Compares the run's averages at every frame boundary `KT` against the mean
/// of `ψ_T[k]` over the frames so far, with `ψ` computed on the trace's own
/// events and baselines.
pub struct LookaheadGap {
    tally: Tally,
    spec: Arc<GameSpec>,
    problem: OracleProblem,
    bound: Option<FrameBound>,
    frame_len: usize,
    guard_limit: u64,
    current: PendingFrame,
    pending: Vec<PendingFrame>,
    psi_sum: CompensatedSum,
    frames: u64,
    phi_gamma: CompensatedSum,
    min_gap: f64,
    last_gap: f64,
}

impl LookaheadGap {
    /// `None` for the pass-through baseline variant.
    pub fn new(manager: &Manager, frame_len: usize, guard_limit: u64) -> Result<Option<Self>> {
        let spec = manager.spec().clone();
        let config = manager.config();
        let Some(problem) = OracleProblem::for_config(config, spec.utility_caps())? else {
            return Ok(None);
        };
        if frame_len == 0 {
            return Err(Error::invalid("frame length must be positive"));
        }
        let c = manager.constants();
        let t = frame_len as f64;
        let phi = manager.phi().cloned();
        let mut note = None;
        let bound = match (config, config.v()) {
            (ManagerConfig::ConservativeLinear { .. }, _) => Some(FrameBound::Linear { slack: 0.0 }),
            (_, Some(v)) if v <= 0.0 => {
                note = Some("V = 0: bound is vacuous".to_string());
                None
            }
            (ManagerConfig::Weighted { .. }, Some(v)) => Some(FrameBound::Linear { slack: t * c.b / v }),
            (ManagerConfig::Concave { .. }, Some(v)) => Some(FrameBound::ConcaveWithProxy {
                phi: phi.clone().expect("concave variant has φ"),
                slack: t * c.c_concave / v,
                k: 2.0 * c.c_concave + 2.0 * v * c.phi_max.unwrap_or(0.0),
            }),
            (ManagerConfig::ConservativeConcave { .. }, Some(v)) => Some(FrameBound::Concave {
                phi: phi.clone().expect("concave variant has φ"),
                slack: t * c.d / v,
                k: 2.0 * c.d + 2.0 * v * c.phi_max.unwrap_or(0.0),
            }),
            _ => None,
        };
        let mut tally = Tally::new(format!("lookahead_gap_T{frame_len}"));
        tally.note = note;
        Ok(Some(LookaheadGap {
            tally,
            spec,
            problem,
            bound,
            frame_len,
            guard_limit,
            current: PendingFrame {
                events: Vec::new(),
                baselines: Vec::new(),
                round: 0,
                lhs_utility: 0.0,
                lhs_proxy: None,
            },
            pending: Vec::new(),
            psi_sum: CompensatedSum::new(),
            frames: 0,
            phi_gamma: CompensatedSum::new(),
            min_gap: f64::INFINITY,
            last_gap: f64::NAN,
        }))
    }

    /// Smallest `achieved − ψ̄` over all frame boundaries, where "achieved"
    /// is `Σθū` or `φ(ū)`.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// `achieved − ψ̄` at the last complete frame.
    pub fn last_gap(&self) -> f64 {
        self.last_gap
    }

    /// Frames compared so far.
    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// The allowance subtracted from `ψ̄` in the bound on the achieved
    /// objective at frame boundary `round`, if the bound applies.
    pub fn allowance(&self, round: u64) -> Option<f64> {
        let t = round as f64;
        match &self.bound {
            None => None,
            Some(FrameBound::Linear { slack }) => Some(*slack),
            Some(FrameBound::ConcaveWithProxy { phi, slack, k } | FrameBound::Concave { phi, slack, k }) => {
                Some(slack + phi.lipschitz_bound() * (k / t).sqrt())
            }
        }
    }

    fn flush(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let events: Vec<EventVector> = self.pending.iter().flat_map(|f| f.events.iter().cloned()).collect();
        let baselines: Vec<ActionVector> = self
            .pending
            .iter()
            .flat_map(|f| f.baselines.iter().cloned())
            .collect();
        let psis = frame_psis(
            &self.spec,
            &self.problem,
            &events,
            &baselines,
            self.frame_len,
            self.guard_limit,
        )?;
        let pending = std::mem::take(&mut self.pending);
        for (frame, psi) in pending.into_iter().zip(psis) {
            self.psi_sum.add(psi);
            self.frames += 1;
            let psi_bar = self.psi_sum.value() / self.frames as f64;
            self.last_gap = frame.lhs_utility - psi_bar;
            self.min_gap = self.min_gap.min(self.last_gap);
            let t = frame.round as f64;
            match &self.bound {
                None => {}
                Some(FrameBound::Linear { slack, .. }) => {
                    self.tally.le(frame.round, None, psi_bar - slack, frame.lhs_utility);
                }
                Some(FrameBound::ConcaveWithProxy { phi, slack, k }) => {
                    let proxy = frame.lhs_proxy.unwrap_or(f64::NAN);
                    self.tally.le(frame.round, None, psi_bar - slack, proxy);
                    let l = phi.lipschitz_bound();
                    self.tally
                        .le(frame.round, None, psi_bar - slack - l * (k / t).sqrt(), frame.lhs_utility);
                }
                Some(FrameBound::Concave { phi, slack, k }) => {
                    let l = phi.lipschitz_bound();
                    self.tally
                        .le(frame.round, None, psi_bar - slack - l * (k / t).sqrt(), frame.lhs_utility);
                }
            }
        }
        Ok(())
    }
}

impl Check for LookaheadGap {
    fn name(&self) -> &str {
        &self.tally.name
    }

    fn observe(&mut self, r: &RoundRecord) -> Result<()> {
        if let Some(gamma) = &r.gamma {
            if let Objective::Concave(phi) = &self.problem.objective {
                self.phi_gamma.add(phi.eval(gamma)?);
            }
        }
        self.current.events.push(r.omega.clone());
        self.current.baselines.push(r.baseline.clone());
        if self.current.events.len() == self.frame_len {
            let lhs_utility = self.problem.objective.eval(&r.ubar)?;
            let lhs_proxy = r
                .gamma
                .as_ref()
                .map(|_| self.phi_gamma.value() / rounds(r));
            let frame = std::mem::replace(
                &mut self.current,
                PendingFrame {
                    events: Vec::with_capacity(self.frame_len),
                    baselines: Vec::with_capacity(self.frame_len),
                    round: 0,
                    lhs_utility: 0.0,
                    lhs_proxy: None,
                },
            );
            self.pending.push(PendingFrame {
                round: r.rounds(),
                lhs_utility,
                lhs_proxy,
                ..frame
            });
            if self.pending.len() >= FRAME_BATCH {
                self.flush()?;
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Verdict> {
        self.flush()?;
        if self.frames == 0 && self.tally.note.is_none() {
            self.tally.note = Some("no complete frame".into());
        }
        Ok(self.tally.verdict())
    }
}

/// The checks that apply to a manager configuration. `frame_lens` selects
/// the lookahead comparisons; pass an empty slice to skip the oracle.
pub fn standard_checks(
    manager: &Manager,
    frame_lens: &[usize],
    guard_limit: u64,
) -> Result<Vec<Box<dyn Check>>> {
    let config = manager.config();
    let c = manager.constants();
    let mut checks: Vec<Box<dyn Check>> = vec![
        Box::new(AverageConsistency::new()),
        Box::new(DecisionConsistency::new(manager.clone())),
    ];
    match config {
        ManagerConfig::Baseline => {}
        ManagerConfig::Weighted { v, .. } => {
            let k = 2.0 * c.b + 2.0 * v * c.c_linear.unwrap_or(0.0);
            checks.push(Box::new(QueueEnvelope::new()));
            checks.push(Box::new(QueueGrowth::new("queue_growth", Queues::Q, k)));
            checks.push(Box::new(RegretBound::new("regret_bound", k)));
        }
        ManagerConfig::Concave { v, .. } => {
            let k = 2.0 * c.c_concave + 2.0 * v * c.phi_max.unwrap_or(0.0);
            let phi = manager.phi().cloned().expect("concave variant has φ");
            checks.push(Box::new(QueueEnvelope::new()));
            checks.push(Box::new(QueueGrowth::new("queue_growth", Queues::Both, k)));
            checks.push(Box::new(RegretBound::new("regret_bound", k)));
            checks.push(Box::new(UtilityVsProxy::new("utility_vs_proxy", phi, k)));
            checks.push(Box::new(ProxyIdentity::new()));
        }
        ManagerConfig::ConservativeLinear { .. } => {
            checks.push(Box::new(PerRoundDominance::new()));
        }
        ManagerConfig::ConservativeConcave { v, .. } => {
            let k = 2.0 * c.d + 2.0 * v * c.phi_max.unwrap_or(0.0);
            let phi = manager.phi().cloned().expect("concave variant has φ");
            checks.push(Box::new(PerRoundDominance::new()));
            checks.push(Box::new(QueueGrowth::new("queue_growth", Queues::Z, k)));
            checks.push(Box::new(UtilityVsProxy::new("utility_vs_proxy", phi, k)));
            checks.push(Box::new(ProxyIdentity::new()));
        }
    }
    for &t in frame_lens {
        if let Some(g) = LookaheadGap::new(manager, t, guard_limit)? {
            checks.push(Box::new(g));
        }
    }
    Ok(checks)
}

/// Runs `checks` over a record stream.
pub fn run_checks<I>(records: I, checks: &mut [Box<dyn Check>]) -> Result<Vec<Verdict>>
where
    I: IntoIterator<Item = Result<RoundRecord>>,
{
    for r in records {
        let r = r?;
        for c in checks.iter_mut() {
            c.observe(&r)?;
        }
    }
    checks.iter_mut().map(|c| c.finish()).collect()
}

/// Convenience for in-memory traces.
pub fn check_records(records: &[RoundRecord], checks: &mut [Box<dyn Check>]) -> Result<Vec<Verdict>> {
    run_checks(records.iter().cloned().map(Ok), checks)
}

//! Simulation harness: drives the round protocol over a scenario.
//!
//! Each round the generator draws ω(t); every player's policy sees its own
//! observation and picks a baseline; the manager sees ω(t) and b(t) and
//! suggests α̃(t), which the players adopt. Runs are reproducible from the
//! seed: events and each player's policy draw from separate ChaCha8 streams.

pub mod checks;
pub mod generator;
pub mod policy;
pub mod trace;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{observe, ActionVector, EventVector, GameSpec, UtilityRegistry};
use crate::location::{reference_averages, ExampleId, Sharing};
use crate::manager::{Manager, ManagerConfig, ManagerState, StepOutput};
use crate::scenario::{GameSource, ResolvedScenario, Scenario};
use crate::stats::{norm, RunningMean};

use self::checks::{run_checks, standard_checks, Verdict};
use self::generator::EventSource;
use self::policy::PolicyState;
use self::trace::{RoundRecord, TraceSummary};

/// A drawn round waiting for the baselines to be fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingRound {
    pub t: u64,
    pub omega: EventVector,
    /// What each player's scenario policy chose.
    pub proposed: ActionVector,
}

pub struct Simulation {
    spec: Arc<GameSpec>,
    manager: Manager,
    state: ManagerState,
    events: EventSource,
    policies: Vec<PolicyState>,
    ubar: RunningMean,
    xbar: RunningMean,
    gbar: RunningMean,
    horizon: u64,
    max_q_norm: f64,
    max_z_norm: f64,
    pending: bool,
    resolved: ResolvedScenario,
    guard_limit: u64,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let resolved = scenario.resolve(&UtilityRegistry::with_builtins())?;
        Self::from_resolved(resolved, crate::game::guard_limit_from_env()?)
    }

    pub fn from_resolved(resolved: ResolvedScenario, guard_limit: u64) -> Result<Self> {
        let spec = resolved.spec.clone();
        let n = spec.num_players();
        let seed = resolved.scenario.seed;
        let manager = Manager::new(spec.clone(), resolved.scenario.manager.clone(), guard_limit)?;
        let policies = resolved
            .baselines
            .iter()
            .enumerate()
            .map(|(i, p)| PolicyState::new(p.clone(), i, seed))
            .collect();
        Ok(Simulation {
            events: resolved.generator.seeded_source(seed),
            state: ManagerState::new(n),
            ubar: RunningMean::new(n),
            xbar: RunningMean::new(n),
            gbar: RunningMean::new(n),
            horizon: resolved.scenario.horizon,
            max_q_norm: 0.0,
            max_z_norm: 0.0,
            pending: false,
            spec,
            manager,
            policies,
            resolved,
            guard_limit,
        })
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }

    pub fn manager(&self) -> &Manager {
        &self.manager
    }

    pub fn state(&self) -> &ManagerState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.resolved.scenario
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rounds_done(&self) -> u64 {
        self.state.t
    }

    pub fn is_finished(&self) -> bool {
        self.state.t >= self.horizon
    }

    pub fn guard_limit(&self) -> u64 {
        self.guard_limit
    }

    /// Draws ω(t) and asks every policy for its baseline.
    pub fn begin_round(&mut self) -> Result<PendingRound> {
        let t = self.state.t;
        if self.pending {
            return Err(Error::invalid("the current round has not been completed"));
        }
        let omega = self.events.next_event();
        let mut proposed = Vec::with_capacity(self.policies.len());
        for (i, p) in self.policies.iter_mut().enumerate() {
            let obs = observe(&self.spec, i, &omega).map_err(|e| e.at_round(t))?;
            proposed.push(p.decide(&self.spec, &obs).map_err(|e| e.at_round(t))?);
        }
        self.pending = true;
        Ok(PendingRound {
            t,
            omega,
            proposed: ActionVector(proposed),
        })
    }

    /// Runs the manager on the round with the given baselines.
    pub fn complete_round(
        &mut self,
        round: &PendingRound,
        baseline: ActionVector,
    ) -> Result<(RoundRecord, StepOutput)> {
        let t = self.state.t;
        if !self.pending || round.t != t {
            return Err(Error::invalid("no matching round in progress"));
        }
        let (next, out) = self
            .manager
            .run_round(&self.state, &round.omega, &baseline)
            .map_err(|e| e.at_round(t))?;
        self.pending = false;
        self.state = next;
        self.ubar.push(&out.u);
        self.xbar.push(&out.x);
        if let Some(g) = &out.gamma {
            self.gbar.push(g);
        }
        self.max_q_norm = self.max_q_norm.max(norm(&self.state.q));
        self.max_z_norm = self.max_z_norm.max(norm(&self.state.z));
        let record = RoundRecord {
            t,
            omega: round.omega.clone(),
            baseline,
            suggestion: out.suggestion.clone(),
            u: out.u.clone(),
            x: out.x.clone(),
            q: self.state.q.clone(),
            z: self.state.z.clone(),
            gamma: out.gamma.clone(),
            ubar: self.ubar.mean(),
            xbar: self.xbar.mean(),
            gbar: out.gamma.as_ref().map(|_| self.gbar.mean()),
            objective: out.objective,
        };
        Ok((record, out))
    }

    /// One full round with every baseline from the scenario's policies.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let round = self.begin_round()?;
        let baseline = round.proposed.clone();
        self.complete_round(&round, baseline).map(|(r, _)| r)
    }

    pub fn summary(&self, verdicts: Vec<Verdict>) -> Result<TraceSummary> {
        let ubar = self.ubar.mean();
        let xbar = self.xbar.mean();
        Ok(TraceSummary {
            fingerprint: self.resolved.scenario.fingerprint()?,
            manager: self.manager.config().name().to_string(),
            rounds: self.state.t,
            regret_gap: ubar.iter().zip(&xbar).map(|(u, x)| u - x).collect(),
            final_ubar: ubar,
            final_xbar: xbar,
            final_gbar: self.manager.config().uses_z().then(|| self.gbar.mean()),
            max_q_norm: self.max_q_norm,
            max_z_norm: self.max_z_norm,
            constants: self.manager.constants(),
            verdicts,
        })
    }
}

impl Iterator for Simulation {
    type Item = Result<RoundRecord>;

    /// Rounds until the horizon; stops after the first error.
    fn next(&mut self) -> Option<Self::Item> {
        if self.is_finished() || self.pending {
            return None;
        }
        Some(self.step())
    }
}

/// A completed in-memory run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    pub summary: TraceSummary,
}

impl Trace {
    pub fn events(&self) -> Vec<EventVector> {
        self.records.iter().map(|r| r.omega.clone()).collect()
    }

    pub fn baselines(&self) -> Vec<ActionVector> {
        self.records.iter().map(|r| r.baseline.clone()).collect()
    }
}

/// Runs a scenario to its horizon, checks it, and keeps every record.
/// Use [`run_streaming`] for long horizons.
pub fn run_simulation(scenario: &Scenario, frame_lens: &[usize]) -> Result<Trace> {
    let mut records = Vec::new();
    let summary = run_streaming(scenario, frame_lens, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(Trace { records, summary })
}

/// Runs a scenario to its horizon, feeding each record to `sink` and to the
/// applicable checks, without keeping the trace in memory.
pub fn run_streaming<F>(scenario: &Scenario, frame_lens: &[usize], sink: F) -> Result<TraceSummary>
where
    F: FnMut(&RoundRecord) -> Result<()>,
{
    drive(Simulation::new(scenario)?, frame_lens, sink)
}

/// Runs an already constructed simulation to its horizon.
pub fn drive<F>(mut sim: Simulation, frame_lens: &[usize], mut sink: F) -> Result<TraceSummary>
where
    F: FnMut(&RoundRecord) -> Result<()>,
{
    let mut checks = standard_checks(sim.manager(), frame_lens, sim.guard_limit())?;
    let mut failure = None;
    let verdicts = {
        let records = std::iter::from_fn(|| {
            if failure.is_some() {
                return None;
            }
            match sim.next()? {
                Ok(r) => match sink(&r) {
                    Ok(()) => Some(Ok(r)),
                    Err(e) => {
                        failure = Some(e);
                        None
                    }
                },
                Err(e) => {
                    failure = Some(e);
                    None
                }
            }
        });
        run_checks(records, &mut checks)?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    sim.summary(verdicts)
}

/// Measured long-run averages of one example's stand-alone strategies.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ExampleReproduction {
    pub id: ExampleId,
    pub sharing: Sharing,
    pub measured: [f64; 2],
    pub reference: [f64; 2],
    pub tolerance: f64,
    pub passed: bool,
}

/// Tolerance for the example averages at a million rounds.
pub const EXAMPLE_TOLERANCE: f64 = 0.02;

/// Plays an example with its scripted strategies and no manager, and
/// compares the average utilities with the closed-form values.
pub fn reproduce_example(id: ExampleId, sharing: Sharing, horizon: u64, seed: u64) -> Result<ExampleReproduction> {
    let scenario = Scenario {
        name: Some(format!("{id} {}", sharing.as_str())),
        game: GameSource::Example { id, sharing },
        generator: None,
        baselines: None,
        manager: ManagerConfig::Baseline,
        horizon,
        seed,
        human_player: None,
        outputs: None,
    };
    let summary = run_streaming(&scenario, &[], |_| Ok(()))?;
    let measured = [summary.final_ubar[0], summary.final_ubar[1]];
    let reference = reference_averages(id, sharing);
    let passed = measured
        .iter()
        .zip(&reference)
        .all(|(m, r)| (m - r).abs() <= EXAMPLE_TOLERANCE);
    Ok(ExampleReproduction {
        id,
        sharing,
        measured,
        reference,
        tolerance: EXAMPLE_TOLERANCE,
        passed,
    })
}

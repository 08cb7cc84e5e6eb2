//! Transport-free session state machine.
//!
//! One person plays one seat; the other seats play their scenario policies.
//! Phases cycle `awaiting_baseline → suggestion_ready → awaiting_baseline`;
//! after the last round the session rests in `round_closed`.
//!
//! Everything sent toward the client goes through [`Session::log`], so tests
//! can inspect exactly what the person could have seen.

use serde::Serialize;
use serde_json::{json, Value};

use regret_manager::game::{observe, Action, ActionVector};
use regret_manager::scenario::Scenario;
use regret_manager::sim::trace::{format_float, RoundRecord, TraceWriter};
use regret_manager::sim::{PendingRound, Simulation};
use regret_manager::stats::RunningMean;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingBaseline,
    SuggestionReady,
    RoundClosed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SessionError {
    InvalidScenario(String),
    InvalidPlayer(String),
    NotHumanSeat(usize),
    WrongPhase(Phase),
    IllegalAction(Action),
    DuplicateSubmission,
    Complete,
    Engine(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidScenario(_) => "invalid_scenario",
            SessionError::InvalidPlayer(_) => "invalid_player",
            SessionError::NotHumanSeat(_) => "not_human_seat",
            SessionError::WrongPhase(_) => "wrong_phase",
            SessionError::IllegalAction(_) => "illegal_action",
            SessionError::DuplicateSubmission => "duplicate_submission",
            SessionError::Complete => "session_complete",
            SessionError::Engine(_) => "engine_error",
        }
    }
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionError::InvalidScenario(m) => write!(f, "invalid scenario: {m}"),
            SessionError::InvalidPlayer(m) => write!(f, "invalid player: {m}"),
            SessionError::NotHumanSeat(p) => write!(f, "player {p} is not the human seat"),
            SessionError::WrongPhase(p) => write!(f, "not allowed in phase {p:?}"),
            SessionError::IllegalAction(a) => write!(f, "action {a} is not allowed"),
            SessionError::DuplicateSubmission => write!(f, "baseline already submitted this round"),
            SessionError::Complete => write!(f, "session is complete"),
            SessionError::Engine(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for SessionError {}

/// A message pushed to clients: `{"type": ..., "payload": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServerMessage {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub payload: Value,
}

fn num(x: f64) -> Value {
    Value::String(format_float(x))
}

fn int(x: impl std::fmt::Display) -> Value {
    Value::String(x.to_string())
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

fn ints<T: std::fmt::Display>(xs: &[T]) -> Value {
    Value::Array(xs.iter().map(int).collect())
}

pub struct Session {
    sim: Simulation,
    /// 0-based.
    human: usize,
    phase: Phase,
    pending: Option<PendingRound>,
    last: Option<RoundRecord>,
    records: Vec<RoundRecord>,
    followed: Vec<bool>,
    human_u: RunningMean,
    human_x: RunningMean,
    log: Vec<ServerMessage>,
}

impl Session {
    /// `human` is 1-based; `None` falls back to the scenario's `human_player`.
    pub fn new(scenario: &Scenario, human: Option<usize>) -> Result<Self, SessionError> {
        let mut scenario = scenario.clone();
        if human.is_some() {
            scenario.human_player = human;
        }
        let h = scenario
            .human_player
            .ok_or_else(|| SessionError::InvalidPlayer("no human player designated".into()))?;
        let sim = Simulation::new(&scenario).map_err(|e| match e {
            e if e.to_string().contains("human_player") => SessionError::InvalidPlayer(e.to_string()),
            e => SessionError::InvalidScenario(e.to_string()),
        })?;
        let mut s = Session {
            sim,
            human: h - 1,
            phase: Phase::AwaitingBaseline,
            pending: None,
            last: None,
            records: Vec::new(),
            followed: Vec::new(),
            human_u: RunningMean::new(1),
            human_x: RunningMean::new(1),
            log: Vec::new(),
        };
        s.start_round()?;
        Ok(s)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// 1-based.
    pub fn human_player(&self) -> usize {
        self.human + 1
    }

    pub fn t(&self) -> u64 {
        self.sim.rounds_done()
    }

    pub fn is_complete(&self) -> bool {
        self.sim.is_finished() && self.pending.is_none()
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    /// Per closed round: did the person keep the suggestion.
    pub fn followed(&self) -> &[bool] {
        &self.followed
    }

    pub fn log(&self) -> &[ServerMessage] {
        &self.log
    }

    pub fn scenario(&self) -> &Scenario {
        self.sim.scenario()
    }

    /// What the scenario policy of the human seat would play this round;
    /// used for the auto-play fallback.
    pub fn fallback_action(&self) -> Option<Action> {
        self.pending.as_ref().map(|p| p.proposed[self.human])
    }

    fn push(&mut self, kind: &'static str, payload: Value) -> ServerMessage {
        let m = ServerMessage { kind, payload };
        self.log.push(m.clone());
        m
    }

    fn visible(&self, omega: &[f64], player: usize) -> Result<Value, SessionError> {
        let obs = observe(self.sim.spec(), player, &omega.to_vec().into())
            .map_err(|e| SessionError::Engine(e.to_string()))?;
        Ok(Value::Object(
            obs.visible
                .iter()
                .map(|(j, w)| (format!("omega_{}", j + 1), num(*w)))
                .collect(),
        ))
    }

    fn start_round(&mut self) -> Result<Option<ServerMessage>, SessionError> {
        if self.sim.is_finished() {
            self.phase = Phase::RoundClosed;
            return Ok(None);
        }
        let round = self
            .sim
            .begin_round()
            .map_err(|e| SessionError::Engine(e.to_string()))?;
        let visible = self.visible(&round.omega, self.human)?;
        self.pending = Some(round);
        self.phase = Phase::AwaitingBaseline;
        let payload = json!({
            "t": int(self.t()),
            "player": int(self.human + 1),
            "visible": visible,
            "allowed_actions": ints(self.sim.spec().action_set(self.human)),
        });
        Ok(Some(self.push("round_start", payload)))
    }

    fn check_human(&self, player: usize) -> Result<(), SessionError> {
        if player != self.human + 1 {
            return Err(SessionError::NotHumanSeat(player));
        }
        Ok(())
    }

    /// The round view for the human seat. `player` is 1-based.
    pub fn view(&self, player: usize) -> Result<Value, SessionError> {
        self.check_human(player)?;
        let ubar = self.human_u.mean()[0];
        let xbar = self.human_x.mean()[0];
        let visible = match &self.pending {
            Some(p) => self.visible(&p.omega, self.human)?,
            None => json!({}),
        };
        let suggestion = match (&self.phase, &self.last) {
            (Phase::SuggestionReady, Some(r)) => int(r.suggestion[self.human]),
            _ => Value::Null,
        };
        Ok(json!({
            "t": int(self.t()),
            "horizon": int(self.sim.horizon()),
            "phase": self.phase,
            "complete": self.is_complete(),
            "player": int(player),
            "visible": visible,
            "allowed_actions": ints(self.sim.spec().action_set(self.human)),
            "suggestion": suggestion,
            "ubar": num(ubar),
            "xbar": num(xbar),
            "gain": num(ubar - xbar),
        }))
    }

    /// Records the human's baseline, lets the other seats play theirs, and
    /// runs the manager.
    pub fn submit_baseline(
        &mut self,
        player: usize,
        action: Action,
    ) -> Result<ServerMessage, SessionError> {
        self.check_human(player)?;
        match self.phase {
            Phase::AwaitingBaseline => {}
            Phase::SuggestionReady => return Err(SessionError::DuplicateSubmission),
            Phase::RoundClosed => return Err(SessionError::WrongPhase(self.phase)),
        }
        if !self.sim.spec().action_set(self.human).contains(&action) {
            return Err(SessionError::IllegalAction(action));
        }
        let round = self.pending.clone().ok_or(SessionError::WrongPhase(self.phase))?;
        let mut baseline: Vec<Action> = round.proposed.0.clone();
        baseline[self.human] = action;
        let (record, _) = self
            .sim
            .complete_round(&round, ActionVector(baseline))
            .map_err(|e| SessionError::Engine(e.to_string()))?;
        self.human_u.push(&[record.u[self.human]]);
        self.human_x.push(&[record.x[self.human]]);
        let payload = json!({
            "t": int(record.t),
            "suggestion": ints(&record.suggestion),
            "human_action": int(record.suggestion[self.human]),
            "u": num(record.u[self.human]),
            "x": num(record.x[self.human]),
        });
        self.records.push(record.clone());
        self.last = Some(record);
        self.phase = Phase::SuggestionReady;
        Ok(self.push("suggestion", payload))
    }

    /// Closes the round: reveals its full outcome, then draws the next round
    /// or, at the horizon, emits the summary. Returns the messages sent.
    pub fn advance(&mut self, follow_suggestion: bool) -> Result<Vec<ServerMessage>, SessionError> {
        match self.phase {
            Phase::SuggestionReady => {}
            Phase::RoundClosed if self.is_complete() => return Err(SessionError::Complete),
            p => return Err(SessionError::WrongPhase(p)),
        }
        let r = self.last.clone().expect("suggestion_ready has a record");
        self.pending = None;
        self.phase = Phase::RoundClosed;
        self.followed.push(follow_suggestion);
        let ubar = self.human_u.mean()[0];
        let xbar = self.human_x.mean()[0];
        let payload = json!({
            "t": int(r.t),
            "omega": nums(&r.omega),
            "baselines": ints(&r.baseline),
            "suggestion": ints(&r.suggestion),
            "u": nums(&r.u),
            "x": nums(&r.x),
            "human_followed": follow_suggestion,
            "ubar": num(ubar),
            "xbar": num(xbar),
            "gain": num(ubar - xbar),
        });
        let mut out = vec![self.push("round_result", payload)];
        match self.start_round()? {
            Some(m) => out.push(m),
            None => {
                let summary = json!({
                    "rounds": int(self.t()),
                    "ubar": nums(&r.ubar),
                    "xbar": nums(&r.xbar),
                    "human_gain": num(ubar - xbar),
                    "followed": int(self.followed.iter().filter(|f| **f).count()),
                });
                out.push(self.push("summary", summary));
            }
        }
        Ok(out)
    }

    /// The rounds played so far in the trace CSV format.
    pub fn trace_csv(&self) -> Result<Vec<u8>, SessionError> {
        let spec = self.sim.spec();
        let mut w = TraceWriter::new(Vec::new(), spec.num_players(), spec.event_dim())
            .map_err(|e| SessionError::Engine(e.to_string()))?;
        for r in &self.records {
            w.write(r).map_err(|e| SessionError::Engine(e.to_string()))?;
        }
        w.finish().map_err(|e| SessionError::Engine(e.to_string()))
    }
}

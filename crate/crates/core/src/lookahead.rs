//! Brute-force T-slot lookahead oracle.
//!
//! For a frame of `T` consecutive rounds whose events and baselines are all
//! known in advance, `ψ_T` is the best objective value reachable by any
//! sequence of `T` action vectors. The unconstrained families require the
//! frame-average utility of every player to be at least its frame-average
//! baseline utility; the conservative families require `û(α, ω) ≥ û(b, ω)`
//! coordinatewise in every slot. Every sequence is enumerated, so this is
//! only meant for small games and `T ∈ {1, 2, 3}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{enumerate_joint_actions, ActionVector, EventVector, GameSpec};
use crate::manager::ManagerConfig;
use crate::phi::Phi;

#[derive(Clone, Debug)]
pub enum Objective {
    /// `Σ θ_i γ_i`
    Linear(Vec<f64>),
    Concave(Phi),
}

impl Objective {
    pub fn eval(&self, gamma: &[f64]) -> Result<f64> {
        match self {
            Objective::Linear(theta) => Ok(theta.iter().zip(gamma).map(|(t, g)| t * g).sum()),
            Objective::Concave(phi) => phi.eval(gamma),
        }
    }
}

/// An objective together with the constraint style of its manager variant.
#[derive(Clone, Debug)]
pub struct OracleProblem {
    pub objective: Objective,
    /// Per-slot feasibility instead of frame-average feasibility.
    pub per_slot: bool,
}

impl OracleProblem {
    /// The comparison problem for a manager configuration; `None` for the
    /// pass-through baseline variant.
    pub fn for_config(config: &ManagerConfig, caps: &[f64]) -> Result<Option<Self>> {
        let (objective, per_slot) = match config {
            ManagerConfig::Baseline => return Ok(None),
            ManagerConfig::Weighted { theta, .. } => (Objective::Linear(theta.clone()), false),
            ManagerConfig::ConservativeLinear { theta } => (Objective::Linear(theta.clone()), true),
            ManagerConfig::Concave { phi, .. } => (Objective::Concave(Phi::new(phi.clone(), caps)?), false),
            ManagerConfig::ConservativeConcave { phi, .. } => {
                (Objective::Concave(Phi::new(phi.clone(), caps)?), true)
            }
        };
        Ok(Some(OracleProblem { objective, per_slot }))
    }
}

struct Slot {
    /// Candidate utility vectors, flattened `n` per candidate.
    rows: Vec<f64>,
    baseline: Vec<f64>,
}

/// `ψ_T` for one frame. `events` and `baselines` hold the frame's `T` rounds.
pub fn psi_frame(
    spec: &GameSpec,
    problem: &OracleProblem,
    events: &[EventVector],
    baselines: &[ActionVector],
    guard_limit: u64,
) -> Result<f64> {
    let joint = enumerate_joint_actions(spec, guard_limit)?;
    psi_frame_with(spec, problem, &joint, events, baselines, guard_limit)
}

fn psi_frame_with(
    spec: &GameSpec,
    problem: &OracleProblem,
    joint: &[ActionVector],
    events: &[EventVector],
    baselines: &[ActionVector],
    guard_limit: u64,
) -> Result<f64> {
    if events.is_empty() || events.len() != baselines.len() {
        return Err(Error::invalid("a frame needs one baseline per event and at least one round"));
    }
    let n = spec.num_players();
    let mut slots = Vec::with_capacity(events.len());
    let mut count: u128 = 1;
    for (w, b) in events.iter().zip(baselines) {
        spec.check_event(w)?;
        spec.check_actions(b)?;
        let mut baseline = vec![0.0; n];
        spec.evaluate_unchecked(b, w, &mut baseline)?;
        let mut rows = Vec::with_capacity(joint.len() * n);
        let mut u = vec![0.0; n];
        for a in joint {
            spec.evaluate_unchecked(a, w, &mut u)?;
            if !problem.per_slot || u.iter().zip(&baseline).all(|(u, x)| u >= x) {
                rows.extend_from_slice(&u);
            }
        }
        count = count.saturating_mul((rows.len() / n) as u128);
        slots.push(Slot { rows, baseline });
    }
    if count > u128::from(guard_limit) {
        return Err(Error::TooLarge {
            count,
            limit: guard_limit,
        });
    }

    let t = events.len() as f64;
    let mut baseline_avg = vec![0.0; n];
    for s in &slots {
        for (acc, x) in baseline_avg.iter_mut().zip(&s.baseline) {
            *acc += x;
        }
    }
    for x in &mut baseline_avg {
        *x /= t;
    }

    let mut best = f64::NEG_INFINITY;
    let mut sum = vec![0.0; n];
    let mut avg = vec![0.0; n];
    search(&slots, 0, n, &mut sum, &mut |sum| {
        for (a, s) in avg.iter_mut().zip(sum) {
            *a = s / t;
        }
        if !problem.per_slot && avg.iter().zip(&baseline_avg).any(|(u, x)| u < x) {
            return Ok(());
        }
        best = best.max(problem.objective.eval(&avg)?);
        Ok(())
    })?;
    if best == f64::NEG_INFINITY {
        // the baseline sequence itself is always feasible up to rounding
        return Err(Error::invalid("no feasible action sequence in frame"));
    }
    Ok(best)
}

fn search(
    slots: &[Slot],
    depth: usize,
    n: usize,
    sum: &mut Vec<f64>,
    leaf: &mut dyn FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    if depth == slots.len() {
        return leaf(sum);
    }
    for row in slots[depth].rows.chunks_exact(n) {
        let saved = sum.clone();
        for (s, u) in sum.iter_mut().zip(row) {
            *s += u;
        }
        search(slots, depth + 1, n, sum, leaf)?;
        *sum = saved;
    }
    Ok(())
}

/// `ψ_T[k]` for each complete frame `k = 0, 1, …` of a run. Trailing rounds
/// that do not fill a frame are ignored. Frames are evaluated in parallel.
pub fn frame_psis(
    spec: &GameSpec,
    problem: &OracleProblem,
    events: &[EventVector],
    baselines: &[ActionVector],
    frame_len: usize,
    guard_limit: u64,
) -> Result<Vec<f64>> {
    if frame_len == 0 {
        return Err(Error::invalid("frame length must be positive"));
    }
    if events.len() != baselines.len() {
        return Err(Error::invalid("events and baselines differ in length"));
    }
    let joint = enumerate_joint_actions(spec, guard_limit)?;
    events
        .par_chunks_exact(frame_len)
        .zip(baselines.par_chunks_exact(frame_len))
        .map(|(w, b)| psi_frame_with(spec, problem, &joint, w, b, guard_limit))
        .collect()
}

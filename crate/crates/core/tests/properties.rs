use std::sync::Arc;

use proptest::prelude::*;

use regret_manager::game::LinearTable;
use regret_manager::location::location_utility;
use regret_manager::sim::trace::{TraceReader, TraceWriter};
use regret_manager::{
    conservative_feasible_set, enumerate_joint_actions, evaluate_utilities, update_queue_q, update_queue_z,
    ActionVector, EventVector, GameSpec, Manager, ManagerConfig, ManagerState, RoundRecord, UtilityVector,
    DEFAULT_GUARD_LIMIT,
};

/// A random table game: up to 3 players with up to 3 actions each and
/// utilities `Σ_j c_j ω_j` with `c, ω ∈ [0, 1]`.
#[derive(Clone, Debug)]
struct TableGame {
    action_sets: Vec<Vec<u32>>,
    event_dim: usize,
    coefficients: Vec<Vec<Vec<f64>>>,
}

impl TableGame {
    fn spec(&self) -> GameSpec {
        let n = self.action_sets.len();
        let table = LinearTable::new(self.action_sets.clone(), self.event_dim, self.coefficients.clone()).unwrap();
        GameSpec::new(
            self.event_dim,
            vec![(0..self.event_dim).collect(); n],
            self.action_sets.clone(),
            Arc::new(table),
            vec![self.event_dim as f64; n],
        )
        .unwrap()
    }
}

fn table_game() -> impl Strategy<Value = TableGame> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(n, m)| (prop::collection::vec(1u32..=3, n), Just(m)))
        .prop_flat_map(|(sizes, m)| {
            let action_sets: Vec<Vec<u32>> = sizes.iter().map(|&k| (1..=k).collect()).collect();
            let joint: usize = sizes.iter().map(|&k| k as usize).product();
            let n = sizes.len();
            // coarse coefficients make exact ties common
            let coef = prop::collection::vec(
                prop::collection::vec(prop::collection::vec((0u8..=4).prop_map(|c| c as f64 / 4.0), m), joint),
                n,
            );
            (Just(action_sets), Just(m), coef).prop_map(|(action_sets, event_dim, coefficients)| TableGame {
                action_sets,
                event_dim,
                coefficients,
            })
        })
}

fn event(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..=8).prop_map(|w| w as f64 / 8.0), m)
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4i32..=4, n).prop_map(|w| w.into_iter().map(f64::from).collect())
}

fn pick(joint: &[ActionVector], k: usize) -> ActionVector {
    joint[k % joint.len()].clone()
}

/// Straight enumeration: best weighted value and the first joint action
/// attaining it, over the candidates passing `keep`.
fn brute_force(
    spec: &GameSpec,
    omega: &EventVector,
    w: &[f64],
    keep: impl Fn(&UtilityVector) -> bool,
) -> (ActionVector, f64) {
    let mut best: Option<(ActionVector, f64)> = None;
    for a in enumerate_joint_actions(spec, DEFAULT_GUARD_LIMIT).unwrap() {
        let u = evaluate_utilities(spec, &a, omega).unwrap();
        if !keep(&u) {
            continue;
        }
        let val: f64 = u.iter().zip(w).map(|(u, w)| u * w).sum();
        if best.as_ref().map_or(true, |(_, b)| val > *b) {
            best = Some((a, val));
        }
    }
    best.unwrap()
}

fn weighted_manager(spec: GameSpec) -> Manager {
    let n = spec.num_players();
    Manager::new(
        Arc::new(spec),
        ManagerConfig::Weighted {
            v: 1.0,
            theta: vec![1.0; n],
        },
        DEFAULT_GUARD_LIMIT,
    )
    .unwrap()
}

fn game_event_weights() -> impl Strategy<Value = (TableGame, Vec<f64>, Vec<f64>, usize)> {
    table_game().prop_flat_map(|g| {
        let n = g.action_sets.len();
        let m = g.event_dim;
        (Just(g), event(m), weights(n), any::<usize>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn argmax_matches_enumeration((g, omega, w, _) in game_event_weights()) {
        let spec = g.spec();
        let omega = EventVector(omega);
        let (expected, value) = brute_force(&spec, &omega, &w, |_| true);
        let m = weighted_manager(spec);
        let (got, got_value) = m.suggest_with_weights(&omega, &w, None).unwrap();
        prop_assert_eq!(got, expected);
        prop_assert!((got_value - value).abs() <= 1e-12);
    }

    #[test]
    fn conservative_argmax_matches_filtered_enumeration((g, omega, w, k) in game_event_weights()) {
        let spec = g.spec();
        let omega = EventVector(omega);
        let joint = enumerate_joint_actions(&spec, DEFAULT_GUARD_LIMIT).unwrap();
        let b = pick(&joint, k);
        let x = evaluate_utilities(&spec, &b, &omega).unwrap();
        let dominates = |u: &UtilityVector| u.iter().zip(x.iter()).all(|(u, x)| u >= x);
        let (expected, _) = brute_force(&spec, &omega, &w, dominates);

        let feasible = conservative_feasible_set(&spec, &b, &omega, DEFAULT_GUARD_LIMIT).unwrap();
        prop_assert!(feasible.contains(&b));
        for a in &joint {
            let u = evaluate_utilities(&spec, a, &omega).unwrap();
            prop_assert_eq!(feasible.contains(a), dominates(&u));
        }

        let m = weighted_manager(spec.clone());
        let (got, _) = m.suggest_with_weights(&omega, &w, Some(&b)).unwrap();
        let u = evaluate_utilities(&spec, &got, &omega).unwrap();
        prop_assert!(dominates(&u));
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn argmax_is_invariant_under_power_of_two_scaling(
        (g, omega, w, _) in game_event_weights(),
        e in -20i32..20,
    ) {
        let spec = g.spec();
        let omega = EventVector(omega);
        let m = weighted_manager(spec);
        let s = 2f64.powi(e);
        let scaled: Vec<f64> = w.iter().map(|w| w * s).collect();
        let (a, va) = m.suggest_with_weights(&omega, &w, None).unwrap();
        let (b, vb) = m.suggest_with_weights(&omega, &scaled, None).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(va * s, vb);
    }

    #[test]
    fn queue_update_scales_exactly(
        q in prop::collection::vec(0.0f64..100.0, 3),
        x in prop::collection::vec(0.0f64..10.0, 3),
        u in prop::collection::vec(0.0f64..10.0, 3),
        e in -20i32..20,
    ) {
        let s = 2f64.powi(e);
        let scale = |v: &[f64]| v.iter().map(|x| x * s).collect::<Vec<_>>();
        let state = ManagerState { t: 0, q: q.clone(), z: q.clone() };
        let scaled_state = ManagerState { t: 0, q: scale(&q), z: scale(&q) };
        let a = update_queue_q(&state, &x, &u);
        let b = update_queue_q(&scaled_state, &scale(&x), &scale(&u));
        prop_assert_eq!(scale(&a.q), b.q);
        let a = update_queue_z(&state, &x, &u);
        let b = update_queue_z(&scaled_state, &scale(&x), &scale(&u));
        prop_assert_eq!(scale(&a.z), b.z);
    }

    /// `ū_i(t) ≥ x̄_i(t) − Q_i(t)/t` along any path, and `Q ≥ 0`.
    #[test]
    fn queue_envelope_along_random_paths(
        path in prop::collection::vec((prop::collection::vec(0.0f64..10.0, 2), prop::collection::vec(0.0f64..10.0, 2)), 1..300),
    ) {
        let mut s = ManagerState::new(2);
        let mut su = [0.0; 2];
        let mut sx = [0.0; 2];
        for (t, (x, u)) in path.iter().enumerate() {
            s = update_queue_q(&s, x, u);
            let rounds = (t + 1) as f64;
            for i in 0..2 {
                su[i] += u[i];
                sx[i] += x[i];
                prop_assert!(s.q[i] >= 0.0);
                prop_assert!(su[i] / rounds >= sx[i] / rounds - s.q[i] / rounds - 1e-9);
            }
        }
    }

    /// `Z(t)/t = γ̄(t) − ū(t)` from a zero start.
    #[test]
    fn z_queue_telescopes(
        path in prop::collection::vec((prop::collection::vec(0.0f64..10.0, 2), prop::collection::vec(0.0f64..10.0, 2)), 1..300),
    ) {
        let mut s = ManagerState::new(2);
        let mut sg = [0.0; 2];
        let mut su = [0.0; 2];
        for (g, u) in &path {
            s = update_queue_z(&s, g, u);
            for i in 0..2 {
                sg[i] += g[i];
                su[i] += u[i];
                prop_assert!((s.z[i] - (sg[i] - su[i])).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn location_payouts(
        actions in prop::collection::vec(1u32..=4, 1..5),
        omega in prop::collection::vec(0.0f64..10.0, 4),
    ) {
        let u = location_utility(&actions, &omega).unwrap();
        let mut claimed = 0.0;
        for m in 1..=4u32 {
            let at: Vec<usize> = (0..actions.len()).filter(|&i| actions[i] == m).collect();
            if let Some(&first) = at.first() {
                claimed += omega[m as usize - 1];
                for &i in &at {
                    prop_assert_eq!(u[i], u[first]);
                }
                let total: f64 = at.iter().map(|&i| u[i]).sum();
                prop_assert!((total - omega[m as usize - 1]).abs() <= 1e-12);
            }
        }
        let sum: f64 = u.iter().sum();
        prop_assert!(sum <= omega.iter().sum::<f64>() + 1e-12);
        prop_assert!((sum - claimed).abs() <= 1e-12);

        // one more player at location 1 lowers the share of those already there
        let mut crowded = actions.clone();
        crowded.push(1);
        let v = location_utility(&crowded, &omega).unwrap();
        for i in 0..actions.len() {
            if actions[i] == 1 && omega[0] > 0.0 {
                prop_assert!(v[i] < u[i]);
            }
        }
    }

    #[test]
    fn trace_rows_round_trip(rows in prop::collection::vec(record(), 0..20)) {
        let mut w = TraceWriter::new(Vec::new(), 2, 3).unwrap();
        for r in &rows {
            w.write(r).unwrap();
        }
        let bytes = w.finish().unwrap();
        let back: Vec<RoundRecord> = TraceReader::new(bytes.as_slice()).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        }
    }
}

fn float() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e3f64..1e3,
        Just(0.1 + 0.2),
        Just(-0.0),
    ]
}

fn floats(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(float(), n)
}

fn record() -> impl Strategy<Value = RoundRecord> {
    (
        (any::<u64>(), floats(3), prop::collection::vec(1u32..9, 2), prop::collection::vec(1u32..9, 2)),
        (floats(2), floats(2), floats(2), floats(2)),
        (prop::option::of(floats(2)), floats(2), floats(2), prop::option::of(floats(2)), float()),
    )
        .prop_map(|((t, omega, b, a), (u, x, q, z), (gamma, ubar, xbar, gbar, objective))| RoundRecord {
            t,
            omega: EventVector(omega),
            baseline: ActionVector(b),
            suggestion: ActionVector(a),
            u: UtilityVector(u),
            x: UtilityVector(x),
            q,
            z,
            gamma,
            ubar,
            xbar,
            gbar,
            objective,
        })
}

//! Concave objectives over the utility box `∏ [0, u_i^max]`.
//!
//! Each kind ships an exact maximizer for the per-round proxy problem
//!
//! ```text
//! maximize  V·φ(γ) − Σ Z_i γ_i   subject to  0 ≤ γ_i ≤ u_i^max
//! ```
//!
//! together with its maximum over the box and an analytic Lipschitz constant
//! (Euclidean norm).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points within this relative distance outside the box are clamped onto it
/// rather than rejected; running averages can overshoot a cap by an ulp.
const BOX_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiKind {
    /// `Σ θ_i γ_i` with `θ_i ≥ 0`.
    WeightedSum { theta: Vec<f64> },
    /// `Σ θ_i log(δ + γ_i)`, shifted by `−Σ θ_i log δ` when `δ < 1` so the
    /// minimum over the box is zero.
    LogOffset { theta: Vec<f64>, delta: f64 },
    /// `min_i γ_i`.
    MinUtility,
}

/// A concave objective bound to a particular box.
#[derive(Clone, Debug, PartialEq)]
pub struct Phi {
    kind: PhiKind,
    caps: Vec<f64>,
}

impl Phi {
    pub fn new(kind: PhiKind, caps: &[f64]) -> Result<Self> {
        if caps.is_empty() || caps.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("phi box caps must be positive and finite"));
        }
        let check_theta = |theta: &[f64]| -> Result<()> {
            if theta.len() != caps.len() {
                return Err(Error::invalid(format!(
                    "phi has {} weights for {} players",
                    theta.len(),
                    caps.len()
                )));
            }
            if theta.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::invalid("phi weights must be non-negative and finite"));
            }
            Ok(())
        };
        match &kind {
            PhiKind::WeightedSum { theta } => check_theta(theta)?,
            PhiKind::LogOffset { theta, delta } => {
                check_theta(theta)?;
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::invalid("log_offset needs delta > 0"));
                }
            }
            PhiKind::MinUtility => {}
        }
        Ok(Phi {
            kind,
            caps: caps.to_vec(),
        })
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn dim(&self) -> usize {
        self.caps.len()
    }

    fn log_shift(theta: &[f64], delta: f64) -> f64 {
        if delta < 1.0 {
            -theta.iter().sum::<f64>() * delta.ln()
        } else {
            0.0
        }
    }

    /// Evaluates φ without box checks.
    fn raw(&self, gamma: &[f64]) -> f64 {
        match &self.kind {
            PhiKind::WeightedSum { theta } => theta.iter().zip(gamma).map(|(t, g)| t * g).sum(),
            PhiKind::LogOffset { theta, delta } => {
                theta
                    .iter()
                    .zip(gamma)
                    .map(|(t, g)| t * (delta + g).ln())
                    .sum::<f64>()
                    + Self::log_shift(theta, *delta)
            }
            PhiKind::MinUtility => gamma.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// φ(γ). Points a hair outside the box are clamped; anything further out
    /// is rejected.
    pub fn eval(&self, gamma: &[f64]) -> Result<f64> {
        if gamma.len() != self.caps.len() {
            return Err(Error::invalid(format!(
                "phi evaluated at a {}-vector, expected {}",
                gamma.len(),
                self.caps.len()
            )));
        }
        let mut clamped = Vec::with_capacity(gamma.len());
        for (i, (&g, &cap)) in gamma.iter().zip(&self.caps).enumerate() {
            let tol = BOX_TOLERANCE * cap;
            if !g.is_finite() || g < -tol || g > cap + tol {
                return Err(Error::invalid(format!(
                    "γ_{} = {g} is outside [0, {cap}]",
                    i + 1
                )));
            }
            clamped.push(g.clamp(0.0, cap));
        }
        Ok(self.raw(&clamped))
    }

    /// Global maximizer of `V·φ(γ) − Σ Z_i γ_i` over the box.
    ///
    /// Ties resolve toward the upper corner, so `V = 0, Z = 0` returns the caps.
    pub fn proxy_argmax(&self, z: &[f64], v: f64) -> Result<Vec<f64>> {
        if z.len() != self.caps.len() {
            return Err(Error::invalid(format!(
                "proxy problem with {} queues for {} players",
                z.len(),
                self.caps.len()
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("virtual queue values must be finite"));
        }
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!("V must be finite and non-negative, got {v}")));
        }
        let gamma = match &self.kind {
            PhiKind::WeightedSum { theta } => theta
                .iter()
                .zip(z)
                .zip(&self.caps)
                .map(|((t, z), &cap)| if v * t >= *z { cap } else { 0.0 })
                .collect(),
            PhiKind::LogOffset { theta, delta } => theta
                .iter()
                .zip(z)
                .zip(&self.caps)
                .map(|((t, &z), &cap)| {
                    let a = v * t;
                    if z <= 0.0 {
                        // non-decreasing in γ (constant only when a = z = 0)
                        cap
                    } else if a == 0.0 {
                        0.0
                    } else {
                        // a/(δ+γ) = z
                        (a / z - delta).clamp(0.0, cap)
                    }
                })
                .collect(),
            PhiKind::MinUtility => {
                // For a common level m, coordinates with Z_i > 0 sit at m and
                // the rest at their caps; the objective is then linear in m.
                let slope = v - z.iter().filter(|&&x| x > 0.0).sum::<f64>();
                let top = self.caps.iter().copied().fold(f64::INFINITY, f64::min);
                let m = if slope >= 0.0 { top } else { 0.0 };
                z.iter()
                    .zip(&self.caps)
                    .map(|(&zi, &cap)| if zi > 0.0 { m } else { cap })
                    .collect()
            }
        };
        Ok(gamma)
    }

    /// Maximum of φ over the box. Every shipped kind is non-decreasing, so
    /// this is φ at the upper corner.
    pub fn phi_max(&self) -> f64 {
        self.raw(&self.caps)
    }

    /// Constant `L` with `|φ(γ) − φ(r)| ≤ L·‖γ − r‖₂` on the box.
    pub fn lipschitz_bound(&self) -> f64 {
        match &self.kind {
            PhiKind::WeightedSum { theta } => theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
            PhiKind::LogOffset { theta, delta } => {
                theta.iter().map(|t| (t / delta).powi(2)).sum::<f64>().sqrt()
            }
            PhiKind::MinUtility => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ws(theta: &[f64], caps: &[f64]) -> Phi {
        Phi::new(PhiKind::WeightedSum { theta: theta.to_vec() }, caps).unwrap()
    }

    fn log(theta: &[f64], delta: f64, caps: &[f64]) -> Phi {
        Phi::new(
            PhiKind::LogOffset {
                theta: theta.to_vec(),
                delta,
            },
            caps,
        )
        .unwrap()
    }

    fn min(caps: &[f64]) -> Phi {
        Phi::new(PhiKind::MinUtility, caps).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert!((ws(&[1.0, 1.0], &[10.0, 10.0]).eval(&[3.6, 3.5]).unwrap() - 7.1).abs() < 1e-12);
        assert_eq!(min(&[10.0, 10.0]).eval(&[2.0, 5.0]).unwrap(), 2.0);
        assert_eq!(log(&[1.0, 1.0], 1.0, &[10.0, 10.0]).eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_points_outside_box() {
        let p = min(&[10.0, 10.0]);
        assert!(p.eval(&[-1.0, 1.0]).is_err());
        assert!(p.eval(&[11.0, 1.0]).is_err());
        assert!(p.eval(&[1.0]).is_err());
        // an ulp above the cap is clamped
        assert_eq!(p.eval(&[10.0 + 1e-12, 10.0]).unwrap(), 10.0);
    }

    #[test]
    fn small_delta_is_shifted_non_negative() {
        let p = log(&[1.0, 2.0], 0.5, &[4.0, 4.0]);
        assert!(p.eval(&[0.0, 0.0]).unwrap().abs() < 1e-12);
        assert!(p.eval(&[1.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn proxy_argmax_examples() {
        let p = ws(&[1.0, 1.0], &[10.0, 10.0]);
        assert_eq!(p.proxy_argmax(&[3.0, 30.0], 10.0).unwrap(), vec![10.0, 0.0]);
        for phi in [p, log(&[1.0, 1.0], 1.0, &[10.0, 10.0]), min(&[10.0, 10.0])] {
            assert_eq!(phi.proxy_argmax(&[0.0, 0.0], 0.0).unwrap(), vec![10.0, 10.0]);
        }
        // V/(δ+γ) = Z ⇒ γ = 4/1 − 1 = 3
        let g = log(&[1.0], 1.0, &[10.0]).proxy_argmax(&[1.0], 4.0).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_argmax_matches_fine_grid() {
        // objective 4·log(1+γ) − γ on [0, 10], step 1e-4
        let p = log(&[1.0], 1.0, &[10.0]);
        let obj = |g: f64| 4.0 * (1.0 + g).ln() - g;
        let (best, _) = (0..=100_000)
            .map(|k| k as f64 * 1e-4)
            .map(|g| (g, obj(g)))
            .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let g = p.proxy_argmax(&[1.0], 4.0).unwrap()[0];
        assert!((g - best).abs() <= 1e-4);
    }

    #[test]
    fn lipschitz_and_max_examples() {
        assert!((ws(&[1.0, 1.0], &[10.0, 10.0]).lipschitz_bound() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(min(&[10.0, 4.0]).lipschitz_bound(), 1.0);
        assert_eq!(log(&[2.0], 1.0, &[10.0]).lipschitz_bound(), 2.0);
        assert_eq!(ws(&[1.0, 1.0], &[10.0, 10.0]).phi_max(), 20.0);
        assert_eq!(min(&[10.0, 4.0]).phi_max(), 4.0);
        assert!((log(&[1.0, 1.0], 1.0, &[9.0, 9.0]).phi_max() - 2.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn construction_rejects_bad_params() {
        assert!(Phi::new(PhiKind::WeightedSum { theta: vec![-1.0] }, &[1.0]).is_err());
        assert!(Phi::new(PhiKind::WeightedSum { theta: vec![1.0] }, &[1.0, 1.0]).is_err());
        assert!(Phi::new(
            PhiKind::LogOffset {
                theta: vec![1.0],
                delta: 0.0
            },
            &[1.0]
        )
        .is_err());
        assert!(ws(&[1.0], &[1.0]).proxy_argmax(&[0.0], -1.0).is_err());
    }

    #[test]
    fn serialized_form_is_kind_and_params() {
        let k = PhiKind::LogOffset {
            theta: vec![1.0, 1.0],
            delta: 1.0,
        };
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"kind":"log_offset","params":{"theta":[1.0,1.0],"delta":1.0}}"#);
        assert_eq!(serde_json::from_str::<PhiKind>(&s).unwrap(), k);
        let m: PhiKind = serde_json::from_str(r#"{"kind":"min_utility"}"#).unwrap();
        assert_eq!(m, PhiKind::MinUtility);
    }

    // ---- property checks -------------------------------------------------

    fn phi_strategy() -> impl Strategy<Value = Phi> {
        (1usize..=3).prop_flat_map(|n| {
            let caps = proptest::collection::vec(0.5f64..20.0, n);
            let theta = proptest::collection::vec(0.0f64..3.0, n);
            (caps, theta, 0.2f64..3.0, 0u8..3).prop_map(|(caps, theta, delta, k)| {
                let kind = match k {
                    0 => PhiKind::WeightedSum { theta },
                    1 => PhiKind::LogOffset { theta, delta },
                    _ => PhiKind::MinUtility,
                };
                Phi::new(kind, &caps).unwrap()
            })
        })
    }

    fn random_point(rng: &mut ChaCha8Rng, caps: &[f64]) -> Vec<f64> {
        caps.iter().map(|&c| rng.random_range(0.0..=c)).collect()
    }

    fn grid(caps: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
        let mut pts = vec![vec![]];
        for &c in caps {
            let mut next = Vec::new();
            for p in &pts {
                for k in 0..per_axis {
                    let mut q = p.clone();
                    q.push(c * k as f64 / (per_axis - 1) as f64);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn proxy_argmax_is_globally_optimal(phi in phi_strategy(), seed: u64, v in 0.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..phi.dim()).map(|_| rng.random_range(-20.0..40.0)).collect();
            let obj = |g: &[f64]| v * phi.eval(g).unwrap() - z.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
            let best = phi.proxy_argmax(&z, v).unwrap();
            for (g, &c) in best.iter().zip(phi.caps()) {
                prop_assert!((0.0..=c).contains(g));
            }
            let at_best = obj(&best);
            for _ in 0..10_000 {
                let p = random_point(&mut rng, phi.caps());
                prop_assert!(at_best >= obj(&p) - 1e-9, "random point {:?} beats {:?}", p, best);
            }
            for p in grid(phi.caps(), 10) {
                prop_assert!(at_best >= obj(&p) - 1e-9, "grid point {:?} beats {:?}", p, best);
            }
        }

        #[test]
        fn lipschitz_certificate_holds(phi in phi_strategy(), seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = phi.lipschitz_bound();
            for _ in 0..10_000 {
                let a = random_point(&mut rng, phi.caps());
                let b = random_point(&mut rng, phi.caps());
                let dist = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let gap = (phi.eval(&a).unwrap() - phi.eval(&b).unwrap()).abs();
                prop_assert!(gap <= l * dist + 1e-12);
            }
        }

        #[test]
        fn concave_along_segments(phi in phi_strategy(), seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let a = random_point(&mut rng, phi.caps());
                let b = random_point(&mut rng, phi.caps());
                let (fa, fb) = (phi.eval(&a).unwrap(), phi.eval(&b).unwrap());
                for lambda in [0.25, 0.5, 0.75] {
                    let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
                    prop_assert!(phi.eval(&m).unwrap() >= lambda * fa + (1.0 - lambda) * fb - 1e-12);
                }
            }
        }

        #[test]
        fn jensen_direction(phi in phi_strategy(), seed: u64, len in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..len).map(|_| random_point(&mut rng, phi.caps())).collect();
            let mean_of_phi = pts.iter().map(|p| phi.eval(p).unwrap()).sum::<f64>() / len as f64;
            let centroid: Vec<f64> = (0..phi.dim())
                .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / len as f64)
                .collect();
            prop_assert!(mean_of_phi <= phi.eval(&centroid).unwrap() + 1e-12);
        }

        #[test]
        fn phi_max_dominates_box(phi in phi_strategy(), seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let top = phi.phi_max();
            for _ in 0..1000 {
                let p = random_point(&mut rng, phi.caps());
                let f = phi.eval(&p).unwrap();
                prop_assert!(f <= top + 1e-12);
                prop_assert!(f >= -1e-12);
            }
        }
    }
}

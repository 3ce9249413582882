//! Rescaling of LP masses by the step density `f = 1-ε` on `[0, θ]` and
//! `1+δ` on `(θ, 1]`, `θ = δ/(δ+ε)`: each mass becomes `∫_y^{y+x} f(z) dz`.
//! Since `∫_0^1 f = 1`, rescaled cumulative masses stay in `[0, 1]`.

use serde::Serialize;

use crate::bounds::thresholds;
use crate::error::{invalid, Result};
use crate::instance::{BernoulliInstance, GeneralInstance};
use crate::lp::{GeneralLpSolution, LpSolution};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaledSolution {
    pub epsilon: f64,
    pub delta: f64,
    pub theta: f64,
    pub theta_hat: f64,
    /// The rescaled masses with their own cumulative masses and rates.
    #[serde(skip)]
    pub scaled: LpSolution,
}

/// `∫_a^b f(z) dz` for the step density with parameters `(ε, δ, θ)`.
pub fn step_integral(eps: f64, delta: f64, theta: f64, a: f64, b: f64) -> f64 {
    let antideriv = |z: f64| (1.0 - eps) * z.min(theta) + (1.0 + delta) * (z - theta).max(0.0);
    antideriv(b) - antideriv(a)
}

fn check_params(eps: f64, delta: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&eps) || !(0.0..=1.0).contains(&delta) {
        return invalid(format!("eps and delta must lie in [0, 1], got ({eps}, {delta})"));
    }
    Ok(thresholds(eps, delta))
}

pub fn rescale(inst: &BernoulliInstance, sol: &LpSolution, eps: f64, delta: f64) -> Result<RescaledSolution> {
    let (theta, theta_hat) = check_params(eps, delta)?;
    let horizon = sol.horizon();
    let mut x = vec![0.0; sol.n * horizon];
    for i in 0..sol.n {
        for t in 0..horizon {
            let (xi, y) = (sol.x(i, t), sol.y(i, t));
            if xi != 0.0 {
                x[i * horizon + t] = step_integral(eps, delta, theta, y, y + xi);
            }
        }
    }
    Ok(RescaledSolution {
        epsilon: eps,
        delta,
        theta,
        theta_hat,
        scaled: LpSolution::from_masses(inst, x)?,
    })
}

/// Every type at time `t` integrates from the same start `y_{i,t}`.
pub fn rescale_general(
    inst: &GeneralInstance,
    sol: &GeneralLpSolution,
    eps: f64,
    delta: f64,
) -> Result<GeneralLpSolution> {
    let (theta, _) = check_params(eps, delta)?;
    let mut x = sol.x.clone();
    for (t, xt) in x.iter_mut().enumerate() {
        for xj in xt.iter_mut() {
            for (i, v) in xj.iter_mut().enumerate() {
                if *v != 0.0 {
                    let y = sol.y(i, t);
                    *v = step_integral(eps, delta, theta, y, y + *v);
                }
            }
        }
    }
    GeneralLpSolution::from_masses(inst, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Edge;

    fn one_node(p: Vec<f64>) -> BernoulliInstance {
        let edges = (0..p.len()).map(|t| Edge { i: 0, t, w: 1.0 }).collect();
        BernoulliInstance::new(1, p, edges, None).unwrap()
    }

    #[test]
    fn zero_parameters_are_the_identity() {
        let inst = one_node(vec![0.5, 0.8, 1.0]);
        let sol = LpSolution::from_masses(&inst, vec![0.5, 0.3, 0.2]).unwrap();
        let r = rescale(&inst, &sol, 0.0, 0.0).unwrap();
        assert_eq!(r.theta, 0.0);
        for (a, b) in r.scaled.masses().iter().zip(sol.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_below_threshold_shrinks() {
        let inst = one_node(vec![0.5]);
        let sol = LpSolution::from_masses(&inst, vec![0.5]).unwrap();
        let r = rescale(&inst, &sol, 0.2, 0.2).unwrap();
        assert_eq!(r.theta, 0.5);
        assert!((r.scaled.x(0, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn interval_straddling_threshold() {
        let (eps, delta) = (0.11, 0.18);
        let (theta, _) = thresholds(eps, delta);
        let closed = step_integral(eps, delta, theta, 0.5, 0.7);
        // Midpoint-rule quadrature of the step density.
        let steps = 200_000;
        let h = 0.2 / steps as f64;
        let quad: f64 = (0..steps)
            .map(|k| {
                let z = 0.5 + (k as f64 + 0.5) * h;
                if z <= theta { 1.0 - eps } else { 1.0 + delta }
            })
            .sum::<f64>()
            * h;
        assert!((closed - quad).abs() < 1e-5);
        // 0.89(θ - 0.5) + 1.18(0.7 - θ) = 0.381 - 0.29θ = 0.201 exactly.
        assert!((closed - 0.201).abs() < 1e-12);
        assert!((closed - 0.20099).abs() < 2e-5);
    }

    #[test]
    fn rescaled_masses_stay_feasible() {
        let inst = one_node(vec![0.9, 0.9, 0.9, 1.0]);
        let x = vec![0.9, 0.09, 0.009, 0.001];
        let sol = LpSolution::from_masses(&inst, x).unwrap();
        let r = rescale(&inst, &sol, 0.11, 0.18).unwrap();
        for t in 0..4 {
            assert!(r.scaled.r(0, t) <= 1.0 + 1e-12);
        }
        assert!(r.scaled.y(0, 3) + r.scaled.x(0, 3) <= 1.0 + 1e-12);
    }

    #[test]
    fn full_unit_interval_integrates_to_one() {
        for (e, d) in [(0.11, 0.18), (0.5, 0.5), (1.0, 0.3), (0.0, 0.7)] {
            let (th, _) = thresholds(e, d);
            assert!((step_integral(e, d, th, 0.0, 1.0) - 1.0).abs() < 1e-15);
        }
    }
}

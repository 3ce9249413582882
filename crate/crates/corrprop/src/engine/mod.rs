//! The correlated-proposal algorithms.
//!
//! At each time `t`, every free offline node `i` is a candidate with rate
//! `r_{i,t}`. Candidates are ordered by decreasing `w_{i,t}` (lower index
//! first on ties) and a proposer set is drawn from the rates, by pivotal
//! sampling or independently. If `t` arrives, the first proposer in that
//! order is matched. Every other proposer is then discarded independently
//! with probability `p_t`, which keeps `Pr[i free at t] = 1 - y_{i,t}`.
//!
//! Randomness per step: the sampler's draws, one arrival coin, then one
//! discard coin per non-top proposer in increasing offline index. A step with
//! no proposers draws nothing.
//!
//! The finite-type variant draws the realized type first, samples proposers
//! from that type's rates and matches the top one, with no discarding.

mod exact;
mod rescale;
mod simulate;

use rand::Rng;
use serde::Serialize;

pub use exact::{exact_evaluate, exact_evaluate_general, ExactReport, ThresholdLaw, EXACT_MAX_BRANCHES};
pub use rescale::{rescale, rescale_general, step_integral, RescaledSolution};
pub use simulate::{simulate, simulate_with_workers, AlgSpec, SimReport};

use crate::error::{invalid, Error, Result};
use crate::instance::{BernoulliInstance, GeneralInstance};
use crate::lp::{check_feasibility, check_feasibility_general, solve_lp, Constraint, GeneralLpSolution, LpSolution};
use crate::pivotal::ps_sample;

/// Tolerance for the free-mass constraint on algorithm inputs.
pub const INPUT_TOL: f64 = 1e-7;

/// Default step-function parameters of the scaled algorithm.
pub const DEFAULT_EPS: f64 = 0.11;
pub const DEFAULT_DELTA: f64 = 0.18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sampler {
    Pivotal,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepTrace {
    pub t: usize,
    /// Proposers in priority order.
    pub proposers: Vec<usize>,
    /// Top-priority proposer, matched iff `arrived`.
    pub chosen: Option<usize>,
    pub arrived: bool,
    pub discarded: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    /// `(i, t)` pairs in time order.
    pub matching: Vec<(usize, usize)>,
    pub weight: f64,
    pub steps: Vec<StepTrace>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub i: usize,
    pub w: f64,
    pub r: f64,
}

/// Candidates per step (or per step and type), already in priority order.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub n: usize,
    /// `steps[t][j]`; Bernoulli plans have exactly one type per step.
    pub steps: Vec<Vec<(f64, Vec<Candidate>)>>,
    pub discard: bool,
}

fn priority_sort(c: &mut [Candidate]) {
    c.sort_by(|a, b| b.w.total_cmp(&a.w).then(a.i.cmp(&b.i)));
}

impl Plan {
    pub fn bernoulli(inst: &BernoulliInstance, sol: &LpSolution) -> Result<Self> {
        if sol.n != inst.n || sol.horizon() != inst.horizon() {
            return invalid("solution dimensions differ from the instance");
        }
        let rep = check_feasibility(sol, inst, INPUT_TOL);
        let bad: Vec<_> = rep
            .violations
            .iter()
            .filter(|v| !matches!(v.constraint, Constraint::StepCapacity { .. }))
            .collect();
        if !bad.is_empty() {
            return invalid(format!("fractional solution is infeasible: {:?}", bad[0]));
        }
        let steps = inst
            .adjacency()
            .into_iter()
            .enumerate()
            .map(|(t, edges)| {
                let mut c: Vec<Candidate> = edges
                    .into_iter()
                    .map(|(i, w)| Candidate { i, w, r: sol.r(i, t).clamp(0.0, 1.0) })
                    .filter(|c| c.r > 0.0)
                    .collect();
                priority_sort(&mut c);
                vec![(inst.p[t], c)]
            })
            .collect();
        Ok(Self {
            n: inst.n,
            steps,
            discard: true,
        })
    }

    pub fn general(inst: &GeneralInstance, sol: &GeneralLpSolution) -> Result<Self> {
        if sol.n != inst.n || sol.horizon() != inst.horizon() {
            return invalid("solution dimensions differ from the instance");
        }
        let bad: Vec<String> = check_feasibility_general(sol, inst, INPUT_TOL)
            .into_iter()
            .filter(|v| !v.starts_with("type capacity"))
            .collect();
        if !bad.is_empty() {
            return invalid(format!("fractional solution is infeasible: {}", bad[0]));
        }
        let steps = inst
            .types
            .iter()
            .enumerate()
            .map(|(t, ts)| {
                ts.iter()
                    .enumerate()
                    .map(|(j, at)| {
                        let mut c: Vec<Candidate> = at
                            .edges
                            .iter()
                            .map(|&(i, w)| Candidate { i, w, r: sol.r(i, j, t).clamp(0.0, 1.0) })
                            .filter(|c| c.r > 0.0)
                            .collect();
                        priority_sort(&mut c);
                        (at.p, c)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n: inst.n,
            steps,
            discard: false,
        })
    }

    /// One run. `free` must be all-true on entry; `on_match` receives `(i, t, w)`.
    pub fn run<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        sampler: Sampler,
        free: &mut [bool],
        mut trace: Option<&mut Vec<StepTrace>>,
        mut on_match: impl FnMut(usize, usize, f64),
        mut on_step_start: impl FnMut(usize, &[bool]),
    ) {
        let mut v = Vec::new();
        let mut cands: Vec<Candidate> = Vec::new();
        for (t, types) in self.steps.iter().enumerate() {
            on_step_start(t, free);
            let (p, list) = if self.discard {
                (&types[0].0, &types[0].1)
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let Some(k) = types.iter().position(|(p, _)| {
                    acc += p;
                    u < acc
                }) else {
                    continue;
                };
                (&1.0, &types[k].1)
            };
            cands.clear();
            cands.extend(list.iter().filter(|c| free[c.i]));
            if cands.is_empty() {
                continue;
            }
            v.clear();
            v.extend(cands.iter().map(|c| c.r));
            let chosen: Vec<usize> = match sampler {
                Sampler::Pivotal => ps_sample(&v, rng),
                Sampler::Independent => (0..v.len()).filter(|&k| rng.gen::<f64>() < v[k]).collect(),
            };
            if chosen.is_empty() {
                continue;
            }
            let top = cands[chosen[0]];
            let arrived = rng.gen::<f64>() < *p;
            if arrived {
                free[top.i] = false;
                on_match(top.i, t, top.w);
            }
            let mut discarded = Vec::new();
            if self.discard {
                let mut others: Vec<usize> = chosen[1..].iter().map(|&k| cands[k].i).collect();
                others.sort_unstable();
                for i in others {
                    if rng.gen::<f64>() < *p {
                        free[i] = false;
                        discarded.push(i);
                    }
                }
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(StepTrace {
                    t,
                    proposers: chosen.iter().map(|&k| cands[k].i).collect(),
                    chosen: Some(top.i),
                    arrived,
                    discarded,
                });
            }
        }
        on_step_start(self.steps.len(), free);
    }

    fn run_traced<R: Rng + ?Sized>(&self, rng: &mut R, sampler: Sampler) -> RunResult {
        let mut free = vec![true; self.n];
        let mut steps = Vec::new();
        let mut matching = Vec::new();
        let mut weight = 0.0;
        self.run(
            rng,
            sampler,
            &mut free,
            Some(&mut steps),
            |i, t, w| {
                matching.push((i, t));
                weight += w;
            },
            |_, _| {},
        );
        RunResult { matching, weight, steps }
    }
}

/// One run of the proposal algorithm on a fixed fractional solution.
pub fn run_core<R: Rng + ?Sized>(
    inst: &BernoulliInstance,
    sol: &LpSolution,
    rng: &mut R,
    sampler: Sampler,
) -> Result<RunResult> {
    Ok(Plan::bernoulli(inst, sol)?.run_traced(rng, sampler))
}

/// Solve the LP, rescale with `(ε, δ)`, run with pivotal sampling.
pub fn run_edge_weighted_with<R: Rng + ?Sized>(
    inst: &BernoulliInstance,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<RunResult> {
    let sol = solve_lp(inst)?;
    let scaled = rescale(inst, &sol, eps, delta)?;
    run_core(inst, &scaled.scaled, rng, Sampler::Pivotal)
}

/// The scaled algorithm with `ε = 0.11`, `δ = 0.18`.
pub fn run_edge_weighted<R: Rng + ?Sized>(inst: &BernoulliInstance, rng: &mut R) -> Result<RunResult> {
    run_edge_weighted_with(inst, DEFAULT_EPS, DEFAULT_DELTA, rng)
}

/// The unscaled algorithm; only vertex-weighted instances are accepted.
pub fn run_vertex_weighted<R: Rng + ?Sized>(inst: &BernoulliInstance, rng: &mut R) -> Result<RunResult> {
    if !inst.is_vertex_weighted() {
        return Err(Error::InvalidInput("run_vertex_weighted needs a vertex-weighted instance".into()));
    }
    let sol = solve_lp(inst)?;
    run_core(inst, &sol, rng, Sampler::Pivotal)
}

/// The finite-type algorithm on given masses (typically rescaled LP masses).
pub fn run_general<R: Rng + ?Sized>(
    inst: &GeneralInstance,
    sol: &GeneralLpSolution,
    rng: &mut R,
) -> Result<RunResult> {
    Ok(Plan::general(inst, sol)?.run_traced(rng, Sampler::Pivotal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_uniform_star, ArrivalType, Edge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_certain_edge_is_always_matched() {
        let inst = BernoulliInstance::new(1, vec![1.0], vec![Edge { i: 0, t: 0, w: 4.0 }], None).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let res = run_core(&inst, &sol, &mut rng, Sampler::Pivotal).unwrap();
            assert_eq!(res.matching, vec![(0, 0)]);
            assert_eq!(res.weight, 4.0);
        }
    }

    #[test]
    fn infeasible_masses_are_rejected() {
        let inst = BernoulliInstance::new(1, vec![0.5], vec![Edge { i: 0, t: 0, w: 1.0 }], None).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_core(&inst, &sol, &mut rng, Sampler::Pivotal).is_err());
    }

    #[test]
    fn pivotal_star_always_has_one_proposer() {
        let inst = gen_uniform_star(2).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let res = run_core(&inst, &sol, &mut rng, Sampler::Pivotal).unwrap();
            assert_eq!(res.steps[0].proposers.len(), 1);
            assert_eq!(res.matching.len(), 1);
        }
    }

    #[test]
    fn runs_are_matchings() {
        let inst = crate::instance::gen_rescale_example(5, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let res = run_edge_weighted(&inst, &mut rng).unwrap();
            let mut is: Vec<usize> = res.matching.iter().map(|m| m.0).collect();
            let mut ts: Vec<usize> = res.matching.iter().map(|m| m.1).collect();
            is.sort_unstable();
            is.dedup();
            ts.sort_unstable();
            ts.dedup();
            assert_eq!(is.len(), res.matching.len());
            assert_eq!(ts.len(), res.matching.len());
            let w: f64 = res.matching.iter().map(|&(i, t)| inst.edge_weight(i, t).unwrap()).sum();
            assert!((w - res.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_weighted_requires_vertex_weights() {
        let inst = crate::instance::gen_rescale_example(2, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_vertex_weighted(&inst, &mut rng).is_err());
        assert!(run_vertex_weighted(&gen_uniform_star(2).unwrap(), &mut rng).is_ok());
    }

    #[test]
    fn general_two_half_types_always_match() {
        let inst = GeneralInstance::new(
            1,
            vec![vec![
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
            ]],
        )
        .unwrap();
        let sol = GeneralLpSolution::from_masses(&inst, vec![vec![vec![0.5], vec![0.5]]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(run_general(&inst, &sol, &mut rng).unwrap().matching, vec![(0, 0)]);
        }
    }
}

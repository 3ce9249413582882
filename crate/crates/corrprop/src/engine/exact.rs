//! Exact evaluation of the proposal algorithms on tiny instances by
//! enumerating every branch: proposer sets (with their exact sampler law),
//! the arrival coin and the discard coins. The free set is carried as a
//! bitmask law.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Candidate, Plan, Sampler};
use crate::error::{guard, Result};
use crate::instance::{BernoulliInstance, GeneralInstance};
use crate::lp::{GeneralLpSolution, LpSolution};
use crate::pivotal::{ps_exact_distribution, SubsetDistribution};

/// Largest number of branches enumerated in a single step.
pub const EXACT_MAX_BRANCHES: usize = 10_000;
const MAX_N: usize = 4;
const MAX_T: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdLaw {
    pub w: f64,
    /// `E[min(1, R_{t,w})]` with `R_{t,w} = Σ r_{i,t}` over free `i` with `w_{i,t} ≥ w`.
    pub min1: f64,
    /// `Pr[t is matched along an edge of weight ≥ w]`.
    pub matched_at_least: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactReport {
    pub n: usize,
    pub horizon: usize,
    pub expected_weight: f64,
    /// `match_prob[i * T + t]`.
    pub match_prob: Vec<f64>,
    /// Law of the free set before step `t`, for `t = 0..=T`, as `(mask, prob)`.
    pub free_law: Vec<Vec<(u64, f64)>>,
    /// Per step, one entry per distinct edge weight at `t` and for `0`, ascending.
    /// Empty for finite-type instances.
    pub thresholds: Vec<Vec<ThresholdLaw>>,
}

impl ExactReport {
    pub fn match_prob(&self, i: usize, t: usize) -> f64 {
        self.match_prob[i * self.horizon + t]
    }

    /// `Pr[i free before step t]`.
    pub fn free_prob(&self, i: usize, t: usize) -> f64 {
        self.free_law[t].iter().filter(|(m, _)| m >> i & 1 == 1).map(|(_, p)| p).sum()
    }

    /// The free-set law before step `t` as a subset distribution.
    pub fn free_distribution(&self, t: usize) -> SubsetDistribution {
        SubsetDistribution::from_pairs(self.n, self.free_law[t].iter().copied())
    }
}

fn proposer_law(cands: &[Candidate], sampler: Sampler) -> Result<SubsetDistribution> {
    let v: Vec<f64> = cands.iter().map(|c| c.r).collect();
    match sampler {
        Sampler::Pivotal => ps_exact_distribution(&v),
        Sampler::Independent => Ok(SubsetDistribution::independent(&v)),
    }
}

struct Acc {
    next: BTreeMap<u64, f64>,
    weight: f64,
    match_prob: Vec<f64>,
    /// Matched weight per branch, for the threshold laws.
    matched_w: Vec<(f64, f64)>,
    branches: usize,
}

impl Acc {
    fn add_branch(&mut self) -> Result<()> {
        self.branches += 1;
        guard("exact branches per step", self.branches, EXACT_MAX_BRANCHES)
    }
}

fn check_size(n: usize, horizon: usize) -> Result<()> {
    guard("offline nodes for exact evaluation", n, MAX_N)?;
    guard("time steps for exact evaluation", horizon, MAX_T)
}

/// Exact law of the proposal algorithm run on fixed masses `sol`.
pub fn exact_evaluate(inst: &BernoulliInstance, sol: &LpSolution, sampler: Sampler) -> Result<ExactReport> {
    check_size(inst.n, inst.horizon())?;
    let plan = Plan::bernoulli(inst, sol)?;
    let adjacency = inst.adjacency();
    evaluate_plan(&plan, sampler, |t, mask| thresholds_for(&adjacency[t], &plan.steps[t][0].1, mask))
}

/// Exact law of the finite-type algorithm run on fixed masses `sol`.
pub fn exact_evaluate_general(inst: &GeneralInstance, sol: &GeneralLpSolution) -> Result<ExactReport> {
    check_size(inst.n, inst.horizon())?;
    let plan = Plan::general(inst, sol)?;
    evaluate_plan(&plan, Sampler::Pivotal, |_, _| Vec::new())
}

/// Distinct weights at `t` plus 0, ascending, each with `min(1, R_{t,w})` for `mask`.
fn thresholds_for(edges: &[(usize, f64)], cands: &[Candidate], mask: u64) -> Vec<(f64, f64)> {
    let mut ws: Vec<f64> = edges.iter().map(|e| e.1).chain(std::iter::once(0.0)).collect();
    ws.sort_by(f64::total_cmp);
    ws.dedup();
    ws.into_iter()
        .map(|w| {
            let r: f64 = cands
                .iter()
                .filter(|c| mask >> c.i & 1 == 1 && c.w >= w)
                .map(|c| c.r)
                .sum();
            (w, r.min(1.0))
        })
        .collect()
}

fn evaluate_plan(
    plan: &Plan,
    sampler: Sampler,
    thresholds: impl Fn(usize, u64) -> Vec<(f64, f64)>,
) -> Result<ExactReport> {
    let n = plan.n;
    let horizon = plan.steps.len();
    let full = if n == 0 { 0 } else { (1u64 << n) - 1 };
    let mut law: BTreeMap<u64, f64> = BTreeMap::from([(full, 1.0)]);
    let mut free_law = Vec::with_capacity(horizon + 1);
    let mut threshold_laws = Vec::with_capacity(horizon);
    let mut match_prob = vec![0.0; n * horizon];
    let mut expected_weight = 0.0;

    for (t, types) in plan.steps.iter().enumerate() {
        free_law.push(law.iter().map(|(&m, &p)| (m, p)).collect::<Vec<_>>());
        let mut acc = Acc {
            next: BTreeMap::new(),
            weight: 0.0,
            match_prob: vec![0.0; n],
            matched_w: Vec::new(),
            branches: 0,
        };
        let mut step_thresholds: Vec<ThresholdLaw> = Vec::new();
        for (&mask, &pm) in &law {
            let th = thresholds(t, mask);
            if step_thresholds.is_empty() {
                step_thresholds = th
                    .iter()
                    .map(|&(w, _)| ThresholdLaw { w, min1: 0.0, matched_at_least: 0.0 })
                    .collect();
            }
            for (law_t, (_, m1)) in step_thresholds.iter_mut().zip(&th) {
                law_t.min1 += pm * m1;
            }
            acc.matched_w.clear();
            if plan.discard {
                let (p, list) = &types[0];
                branch_step(list, *p, true, mask, pm, sampler, &mut acc)?;
            } else {
                let mut rest = 1.0;
                for (pj, list) in types {
                    rest -= pj;
                    branch_step(list, 1.0, false, mask, pm * pj, sampler, &mut acc)?;
                }
                if rest > 0.0 {
                    acc.add_branch()?;
                    *acc.next.entry(mask).or_insert(0.0) += pm * rest;
                }
            }
            for &(w, q) in &acc.matched_w {
                for law_t in step_thresholds.iter_mut().filter(|l| w >= l.w) {
                    law_t.matched_at_least += q;
                }
            }
        }
        for (i, q) in acc.match_prob.iter().enumerate() {
            match_prob[i * horizon + t] = *q;
        }
        expected_weight += acc.weight;
        threshold_laws.push(step_thresholds);
        law = acc.next;
        law.retain(|_, p| *p > 0.0);
    }
    free_law.push(law.into_iter().collect());
    Ok(ExactReport {
        n,
        horizon,
        expected_weight,
        match_prob,
        free_law,
        thresholds: threshold_laws,
    })
}

/// All branches of one step from free set `mask` (weight `pm`).
fn branch_step(
    list: &[Candidate],
    p: f64,
    discard: bool,
    mask: u64,
    pm: f64,
    sampler: Sampler,
    acc: &mut Acc,
) -> Result<()> {
    let cands: Vec<Candidate> = list.iter().copied().filter(|c| mask >> c.i & 1 == 1).collect();
    if cands.is_empty() {
        acc.add_branch()?;
        *acc.next.entry(mask).or_insert(0.0) += pm;
        return Ok(());
    }
    let dist = proposer_law(&cands, sampler)?;
    for (set, q) in dist.subsets() {
        let pq = pm * q;
        let Some(&first) = set.first() else {
            acc.add_branch()?;
            *acc.next.entry(mask).or_insert(0.0) += pq;
            continue;
        };
        let top = cands[first];
        let others: Vec<usize> = if discard {
            let mut o: Vec<usize> = set[1..].iter().map(|&k| cands[k].i).collect();
            o.sort_unstable();
            o
        } else {
            Vec::new()
        };
        for arrived in [true, false] {
            let pa = if arrived { p } else { 1.0 - p };
            if pa <= 0.0 {
                continue;
            }
            let base = if arrived { mask & !(1u64 << top.i) } else { mask };
            if arrived {
                acc.weight += pq * pa * top.w;
                acc.match_prob[top.i] += pq * pa;
                acc.matched_w.push((top.w, pq * pa));
            }
            for d in 0u64..1 << others.len() {
                let mut prob = pq * pa;
                let mut m = base;
                for (k, &i) in others.iter().enumerate() {
                    if d >> k & 1 == 1 {
                        prob *= p;
                        m &= !(1u64 << i);
                    } else {
                        prob *= 1.0 - p;
                    }
                }
                if prob <= 0.0 {
                    continue;
                }
                acc.add_branch()?;
                *acc.next.entry(m).or_insert(0.0) += prob;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_rescale_example, gen_uniform_star, ArrivalType, Edge};
    use crate::lp::solve_lp;

    #[test]
    fn single_certain_edge() {
        let inst = BernoulliInstance::new(1, vec![1.0], vec![Edge { i: 0, t: 0, w: 2.0 }], None).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![1.0]).unwrap();
        let rep = exact_evaluate(&inst, &sol, Sampler::Pivotal).unwrap();
        assert_eq!(rep.free_prob(0, 1), 0.0);
        assert_eq!(rep.expected_weight, 2.0);
    }

    #[test]
    fn rescale_example_last_step_threshold() {
        let inst = gen_rescale_example(2, 1000.0).unwrap();
        let sol = solve_lp(&inst).unwrap();
        let rep = exact_evaluate(&inst, &sol, Sampler::Pivotal).unwrap();
        let zero = &rep.thresholds[2][0];
        assert_eq!(zero.w, 0.0);
        assert!((zero.min1 - 0.75).abs() < 1e-12);
        assert!((zero.matched_at_least - 0.75).abs() < 1e-12);
    }

    #[test]
    fn star_pivotal_versus_independent() {
        let inst = gen_uniform_star(3).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![1.0 / 3.0; 3]).unwrap();
        let piv = exact_evaluate(&inst, &sol, Sampler::Pivotal).unwrap();
        let ind = exact_evaluate(&inst, &sol, Sampler::Independent).unwrap();
        assert!((piv.expected_weight - 1.0).abs() < 1e-12);
        let expect = 1.0 - (2.0f64 / 3.0).powi(3);
        assert!((ind.expected_weight - expect).abs() < 1e-12);
    }

    #[test]
    fn star_two_nodes_independent() {
        let inst = gen_uniform_star(2).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![0.5, 0.5]).unwrap();
        let ind = exact_evaluate(&inst, &sol, Sampler::Independent).unwrap();
        assert!((ind.expected_weight - 0.75).abs() < 1e-12);
    }

    #[test]
    fn free_law_sums_to_one() {
        let inst = gen_rescale_example(3, 10.0).unwrap();
        let sol = solve_lp(&inst).unwrap();
        let rep = exact_evaluate(&inst, &sol, Sampler::Pivotal).unwrap();
        for law in &rep.free_law {
            let s: f64 = law.iter().map(|x| x.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn general_two_half_types() {
        let inst = GeneralInstance::new(
            1,
            vec![vec![
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
            ]],
        )
        .unwrap();
        let sol = GeneralLpSolution::from_masses(&inst, vec![vec![vec![0.5], vec![0.5]]]).unwrap();
        let rep = exact_evaluate_general(&inst, &sol).unwrap();
        assert!((rep.expected_weight - 1.0).abs() < 1e-12);
        assert_eq!(rep.free_prob(0, 1), 0.0);
    }

    #[test]
    fn size_guard() {
        let inst = gen_uniform_star(5).unwrap();
        let sol = LpSolution::from_masses(&inst, vec![0.2; 5]).unwrap();
        assert!(exact_evaluate(&inst, &sol, Sampler::Pivotal).is_err());
    }
}

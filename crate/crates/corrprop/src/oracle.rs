//! Exact benchmarks: the optimal online policy by backward induction over
//! free-set bitmasks, the value of a stochastic 3-SAT game, and the
//! offline ("prophet") optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{guard, invalid, Result};
use crate::instance::{BernoulliInstance, GeneralInstance, Stochastic3SatFormula};

/// Largest offline side accepted by the online-optimum DP.
pub const MDP_MAX_N: usize = 20;
/// Largest variable count accepted by [`opt_stochastic_3sat`].
pub const SAT_MAX_VARS: usize = 16;
/// Largest horizon accepted by [`prophet_value_exact`].
pub const PROPHET_EXACT_MAX_T: usize = 20;

const SKIP: u8 = u8::MAX;

/// Actions of an online policy, indexed by time, realized type and free set.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub n: usize,
    actions: Vec<Vec<Vec<u8>>>,
}

impl Policy {
    /// The offline node matched in state `(t, j, mask)`, or `None` to skip.
    pub fn action(&self, t: usize, j: usize, mask: u64) -> Option<usize> {
        match self.actions[t][j][mask as usize] {
            SKIP => None,
            a => Some(a as usize),
        }
    }

    pub fn set_action(&mut self, t: usize, j: usize, mask: u64, action: Option<usize>) {
        self.actions[t][j][mask as usize] = action.map_or(SKIP, |a| a as u8);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpValue {
    pub value: f64,
    pub policy: Policy,
}

/// Optimal online value; one arrival type per step.
pub fn opt_online(inst: &BernoulliInstance) -> Result<MdpValue> {
    opt_online_general(&GeneralInstance::from_bernoulli(inst))
}

/// `V(F, t) = Σ_j p_{j,t} max(V(F, t+1), max_i w_{i,j,t} + V(F∖{i}, t+1)) + (1 − Σ_j p_{j,t}) V(F, t+1)`.
pub fn opt_online_general(inst: &GeneralInstance) -> Result<MdpValue> {
    guard("offline nodes for the online-optimum DP", inst.n, MDP_MAX_N)?;
    let size = 1usize << inst.n;
    let horizon = inst.horizon();
    let mut next = vec![0.0f64; size];
    let mut actions: Vec<Vec<Vec<u8>>> = vec![Vec::new(); horizon];
    for t in (0..horizon).rev() {
        let types = &inst.types[t];
        let rest = (1.0 - types.iter().map(|a| a.p).sum::<f64>()).max(0.0);
        let mut cur: Vec<f64> = next.iter().map(|v| rest * v).collect();
        let mut acts = vec![vec![SKIP; size]; types.len()];
        for (j, at) in types.iter().enumerate() {
            for mask in 0..size {
                let mut best = next[mask];
                let mut act = SKIP;
                for &(i, w) in &at.edges {
                    if mask >> i & 1 == 1 {
                        let v = w + next[mask & !(1 << i)];
                        if v > best {
                            best = v;
                            act = i as u8;
                        }
                    }
                }
                cur[mask] += at.p * best;
                acts[j][mask] = act;
            }
        }
        actions[t] = acts;
        next = cur;
    }
    Ok(MdpValue {
        value: next[size - 1],
        policy: Policy { n: inst.n, actions },
    })
}

/// Exact expected weight of `policy` on `inst`. Actions on absent edges or
/// occupied nodes are treated as skips.
pub fn evaluate_policy(inst: &GeneralInstance, policy: &Policy) -> Result<f64> {
    guard("offline nodes for policy evaluation", inst.n, MDP_MAX_N)?;
    if policy.n != inst.n || policy.actions.len() != inst.horizon() {
        return invalid("policy dimensions differ from the instance");
    }
    let size = 1usize << inst.n;
    let mut next = vec![0.0f64; size];
    for t in (0..inst.horizon()).rev() {
        let types = &inst.types[t];
        let rest = (1.0 - types.iter().map(|a| a.p).sum::<f64>()).max(0.0);
        let mut cur: Vec<f64> = next.iter().map(|v| rest * v).collect();
        for (j, at) in types.iter().enumerate() {
            for (mask, c) in cur.iter_mut().enumerate() {
                let v = match policy.action(t, j, mask as u64) {
                    Some(i) if mask >> i & 1 == 1 => match at.edges.iter().find(|e| e.0 == i) {
                        Some(&(_, w)) => w + next[mask & !(1 << i)],
                        None => next[mask],
                    },
                    _ => next[mask],
                };
                *c += at.p * v;
            }
        }
        next = cur;
    }
    Ok(next[size - 1])
}

/// Expected number of satisfied clauses when odd variables are chosen
/// optimally and even variables are fair coins, in index order.
pub fn opt_stochastic_3sat(formula: &Stochastic3SatFormula) -> Result<f64> {
    guard("variables for the 3-SAT DP", formula.num_vars, SAT_MAX_VARS)?;
    let errors = formula.validate();
    if let Some(e) = errors.first() {
        return invalid(e.clone());
    }
    Ok(sat_value(formula, 0, 0))
}

fn sat_value(f: &Stochastic3SatFormula, k: usize, assign: u32) -> f64 {
    if k == f.num_vars {
        return f
            .clauses
            .iter()
            .filter(|c| {
                c.iter().any(|&l| {
                    let v = assign >> (l.unsigned_abs() - 1) & 1 == 1;
                    v == (l > 0)
                })
            })
            .count() as f64;
    }
    let a = sat_value(f, k + 1, assign | 1 << k);
    let b = sat_value(f, k + 1, assign);
    // Variable k + 1 is odd (controlled) when k is even.
    if k % 2 == 0 {
        a.max(b)
    } else {
        0.5 * (a + b)
    }
}

/// Maximum-weight matching in a dense `rows × cols` weight matrix (weights
/// ≥ 0, zero = no edge), by the Hungarian method on the padded square
/// matrix. Returns the weight and the row-to-column assignment.
pub fn max_weight_matching(w: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = w.len();
    let cols = w.first().map_or(0, |r| r.len());
    let m = rows.max(cols);
    if m == 0 {
        return (0.0, Vec::new());
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -w[i][j]
        } else {
            0.0
        }
    };
    // 1-based potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=m {
        let (i, c) = (p[j] - 1, j - 1);
        if i < rows && c < cols && w[i][c] > 0.0 {
            assign[i] = Some(c);
            total += w[i][c];
        }
    }
    (total, assign)
}

fn realized_value(inst: &BernoulliInstance, arrived: &[bool]) -> f64 {
    let ts: Vec<usize> = (0..inst.horizon()).filter(|&t| arrived[t]).collect();
    if ts.is_empty() {
        return 0.0;
    }
    let mut w = vec![vec![0.0; ts.len()]; inst.n];
    for e in &inst.edges {
        if let Ok(k) = ts.binary_search(&e.t) {
            w[e.i][k] = e.w;
        }
    }
    max_weight_matching(&w).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of the expected offline optimum. Replication `k`
/// uses the ChaCha8 stream `(seed, k)`; the result does not depend on the
/// thread count.
pub fn prophet_value_mc(inst: &BernoulliInstance, replications: usize, seed: u64) -> Result<Estimate> {
    if replications == 0 {
        return invalid("replications must be >= 1");
    }
    let values: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let arrived: Vec<bool> = inst.p.iter().map(|&p| rng.gen::<f64>() < p).collect();
            realized_value(inst, &arrived)
        })
        .collect();
    let reps = replications as f64;
    let mean = values.iter().sum::<f64>() / reps;
    let stderr = if replications > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (reps - 1.0) / reps).sqrt()
    } else {
        0.0
    };
    Ok(Estimate { mean, stderr })
}

/// Expected offline optimum by enumerating all arrival patterns.
pub fn prophet_value_exact(inst: &BernoulliInstance) -> Result<f64> {
    let horizon = inst.horizon();
    guard("horizon for the exact prophet value", horizon, PROPHET_EXACT_MAX_T)?;
    let total = (0u64..1 << horizon)
        .into_par_iter()
        .map(|pat| {
            let arrived: Vec<bool> = (0..horizon).map(|t| pat >> t & 1 == 1).collect();
            let prob: f64 = inst
                .p
                .iter()
                .zip(&arrived)
                .map(|(&p, &a)| if a { p } else { 1.0 - p })
                .product();
            if prob == 0.0 {
                0.0
            } else {
                prob * realized_value(inst, &arrived)
            }
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ArrivalType, Edge};

    fn one_node(p: Vec<f64>, w: Vec<f64>) -> BernoulliInstance {
        let edges = w.iter().enumerate().map(|(t, &w)| Edge { i: 0, t, w }).collect();
        BernoulliInstance::new(1, p, edges, None).unwrap()
    }

    #[test]
    fn hand_computed_dp_values() {
        assert_eq!(opt_online(&one_node(vec![1.0], vec![5.0])).unwrap().value, 5.0);
        assert!((opt_online(&one_node(vec![0.5, 0.5], vec![1.0, 1.0])).unwrap().value - 0.75).abs() < 1e-15);
        assert!((opt_online(&one_node(vec![1.0, 0.5], vec![1.0, 2.0])).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_dp_values() {
        let g = GeneralInstance::new(
            1,
            vec![vec![
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
                ArrivalType { p: 0.5, edges: vec![(0, 3.0)] },
            ]],
        )
        .unwrap();
        assert_eq!(opt_online_general(&g).unwrap().value, 2.0);
        let empty = GeneralInstance::new(2, vec![vec![]]).unwrap();
        assert_eq!(opt_online_general(&empty).unwrap().value, 0.0);
    }

    #[test]
    fn optimal_policy_evaluates_to_its_value() {
        let inst = crate::instance::gen_rescale_example(3, 7.0).unwrap();
        let g = GeneralInstance::from_bernoulli(&inst);
        let opt = opt_online_general(&g).unwrap();
        assert!((evaluate_policy(&g, &opt.policy).unwrap() - opt.value).abs() < 1e-12);
        let mut greedy = opt.policy.clone();
        for t in 0..g.horizon() {
            for mask in 0..8u64 {
                let a = g.types[t][0].edges.iter().find(|e| mask >> e.0 & 1 == 1).map(|e| e.0);
                greedy.set_action(t, 0, mask, a);
            }
        }
        assert!(evaluate_policy(&g, &greedy).unwrap() <= opt.value + 1e-12);
    }

    fn formula(num_vars: usize, clauses: Vec<Vec<i32>>) -> Stochastic3SatFormula {
        Stochastic3SatFormula { num_vars, clauses, k: 3 }
    }

    #[test]
    fn sat_values() {
        assert_eq!(opt_stochastic_3sat(&formula(1, vec![vec![1]])).unwrap(), 1.0);
        assert_eq!(opt_stochastic_3sat(&formula(2, vec![vec![2]])).unwrap(), 0.5);
        assert_eq!(opt_stochastic_3sat(&formula(1, vec![vec![1], vec![-1]])).unwrap(), 1.0);
        // x1 chosen before x2 is revealed: (x1 ∨ x2) ∧ (¬x1 ∨ x2) gives 1.5.
        assert_eq!(opt_stochastic_3sat(&formula(2, vec![vec![1, 2], vec![-1, 2]])).unwrap(), 1.5);
    }

    #[test]
    fn hungarian_small_cases() {
        let w = vec![vec![3.0, 2.0], vec![3.0, 0.0]];
        assert_eq!(max_weight_matching(&w).0, 5.0);
        let w = vec![vec![1.0, 5.0, 1.0]];
        let (v, a) = max_weight_matching(&w);
        assert_eq!((v, a), (5.0, vec![Some(1)]));
        assert_eq!(max_weight_matching(&[]).0, 0.0);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (r, c) = (rng.gen_range(1..5), rng.gen_range(1..5));
            let w: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| if rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen_range(0.0..10.0) }).collect())
                .collect();
            assert!((max_weight_matching(&w).0 - brute(&w, 0, 0)).abs() < 1e-9);
        }
    }

    fn brute(w: &[Vec<f64>], row: usize, used: u32) -> f64 {
        if row == w.len() {
            return 0.0;
        }
        let mut best = brute(w, row + 1, used);
        for (c, &x) in w[row].iter().enumerate() {
            if used >> c & 1 == 0 && x > 0.0 {
                best = best.max(x + brute(w, row + 1, used | 1 << c));
            }
        }
        best
    }

    #[test]
    fn prophet_values() {
        let forced = one_node(vec![1.0], vec![5.0]);
        let est = prophet_value_mc(&forced, 100, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (5.0, 0.0));
        let two = one_node(vec![0.5, 0.5], vec![1.0, 1.0]);
        assert!((prophet_value_exact(&two).unwrap() - 0.75).abs() < 1e-15);
        let est = prophet_value_mc(&two, 20_000, 3).unwrap();
        assert!((est.mean - 0.75).abs() < 3.0 * est.stderr);
    }
}

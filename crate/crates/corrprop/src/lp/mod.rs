//! LP relaxation of the optimal online policy.
//!
//! For Bernoulli arrivals the relaxation is
//!
//! ```text
//! max Σ w_{i,t} x_{i,t}
//!   Σ_i x_{i,t} ≤ p_t                                  (one arrival per step)
//!   x_{i,t} + p_t Σ_{t'<t} x_{i,t'} ≤ p_t              (i still free when t arrives)
//!   0 ≤ x_{i,t} ≤ p_t
//! ```
//!
//! with one variable per edge. From a solution we derive the cumulative mass
//! `y_{i,t} = Σ_{t'<t} x_{i,t'}` and the proposal rate
//! `r_{i,t} = x_{i,t} / (p_t (1 - y_{i,t}))`, taken as 0 whenever `x_{i,t} = 0`.

mod simplex;

use serde::{Deserialize, Serialize};

pub use simplex::{DenseSimplex, LpOutcome, LpProblem, LpSolver, Row};

use crate::error::{invalid, Error, Result};
use crate::instance::{BernoulliInstance, GeneralInstance};

/// r-values within this distance of 0 or 1 count as binary.
pub const BINARY_TOL: f64 = 1e-7;

fn rate(x: f64, p: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        let denom = p * (1.0 - y);
        if denom > 0.0 {
            x / denom
        } else {
            f64::INFINITY
        }
    }
}

/// A fractional solution of the Bernoulli LP, stored densely as `n × T`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub n: usize,
    pub p: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    r: Vec<f64>,
    /// `Σ w_{i,t} x_{i,t}` under the instance the solution was built for.
    pub objective: f64,
    /// True when the solution is a vertex returned by the simplex.
    pub basic: bool,
}

impl LpSolution {
    /// Wraps arbitrary masses `x[i * T + t]` without checking feasibility.
    pub fn from_masses(inst: &BernoulliInstance, x: Vec<f64>) -> Result<Self> {
        let horizon = inst.horizon();
        if x.len() != inst.n * horizon {
            return invalid(format!("expected {} masses, got {}", inst.n * horizon, x.len()));
        }
        let mut y = vec![0.0; x.len()];
        let mut r = vec![0.0; x.len()];
        for i in 0..inst.n {
            let mut acc = 0.0;
            for t in 0..horizon {
                let k = i * horizon + t;
                y[k] = acc;
                r[k] = rate(x[k], inst.p[t], acc);
                acc += x[k];
            }
        }
        let objective = inst.edges.iter().map(|e| e.w * x[e.i * horizon + e.t]).sum();
        Ok(Self {
            n: inst.n,
            p: inst.p.clone(),
            x,
            y,
            r,
            objective,
            basic: false,
        })
    }

    pub fn horizon(&self) -> usize {
        self.p.len()
    }

    pub fn x(&self, i: usize, t: usize) -> f64 {
        self.x[i * self.horizon() + t]
    }

    /// `Σ_{t'<t} x_{i,t'}`; `t = T` gives the total mass on `i`.
    pub fn y(&self, i: usize, t: usize) -> f64 {
        let horizon = self.horizon();
        if t == horizon {
            return self.x[i * horizon..(i + 1) * horizon].iter().sum();
        }
        self.y[i * horizon + t]
    }

    pub fn r(&self, i: usize, t: usize) -> f64 {
        self.r[i * self.horizon() + t]
    }

    /// All masses, row-major by offline node.
    pub fn masses(&self) -> &[f64] {
        &self.x
    }

    /// Number of r-values outside `[0, BINARY_TOL] ∪ [1 - BINARY_TOL, 1]`.
    pub fn fractional_count(&self) -> usize {
        self.r
            .iter()
            .filter(|&&r| r > BINARY_TOL && r < 1.0 - BINARY_TOL)
            .count()
    }
}

/// Solves the Bernoulli LP with the default dense simplex.
pub fn solve_lp(inst: &BernoulliInstance) -> Result<LpSolution> {
    solve_lp_with(inst, &DenseSimplex::default())
}

pub fn solve_lp_with(inst: &BernoulliInstance, solver: &impl LpSolver) -> Result<LpSolution> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return invalid(violations.join("; "));
    }
    let horizon = inst.horizon();
    let nv = inst.edges.len();
    let mut by_node: Vec<Vec<(usize, usize)>> = vec![Vec::new(); inst.n];
    let mut by_time: Vec<Vec<usize>> = vec![Vec::new(); horizon];
    for (k, e) in inst.edges.iter().enumerate() {
        by_node[e.i].push((e.t, k));
        by_time[e.t].push(k);
    }
    let mut rows = Vec::with_capacity(horizon + nv);
    for (t, ks) in by_time.iter().enumerate() {
        if !ks.is_empty() {
            rows.push(Row {
                coeffs: ks.iter().map(|&k| (k, 1.0)).collect(),
                rhs: inst.p[t],
            });
        }
    }
    for node in &by_node {
        for &(t, k) in node {
            let pt = inst.p[t];
            let mut coeffs = vec![(k, 1.0)];
            coeffs.extend(node.iter().filter(|&&(s, _)| s < t).map(|&(_, k2)| (k2, pt)));
            rows.push(Row { coeffs, rhs: pt });
        }
    }
    let problem = LpProblem {
        objective: inst.edges.iter().map(|e| e.w).collect(),
        rows,
        upper: inst.edges.iter().map(|e| inst.p[e.t]).collect(),
    };
    let out = solver.maximize(&problem)?;
    let mut x = vec![0.0; inst.n * horizon];
    for (k, e) in inst.edges.iter().enumerate() {
        x[e.i * horizon + e.t] = out.x[k];
    }
    let mut sol = LpSolution::from_masses(inst, x)?;
    sol.basic = true;
    Ok(sol)
}

/// Which LP constraint a violation refers to (0-based indices).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Constraint {
    /// `Σ_i x_{i,t} ≤ p_t`.
    StepCapacity { t: usize },
    /// `x_{i,t} ≤ p_t (1 - y_{i,t})`.
    FreeMass { i: usize, t: usize },
    Nonnegative { i: usize, t: usize },
    /// Positive mass where no edge exists.
    NonEdge { i: usize, t: usize },
    /// `Σ_{t'≤t} x_{i,t'} ≤ 1 - Π_{t'≤t} (1 - p_{t'})`.
    DegreeBound { i: usize, t: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    /// Amount by which the left side exceeds the right side.
    pub excess: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
    /// Smallest slack of the step-capacity and free-mass rows.
    pub min_slack: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the LP rows, nonnegativity, support and the implied degree bound.
pub fn check_feasibility(sol: &LpSolution, inst: &BernoulliInstance, tol: f64) -> FeasibilityReport {
    let horizon = inst.horizon();
    let mut report = FeasibilityReport {
        violations: Vec::new(),
        min_slack: f64::INFINITY,
    };
    if sol.n != inst.n || sol.horizon() != horizon {
        report.violations.push(Violation {
            constraint: Constraint::StepCapacity { t: 0 },
            excess: f64::INFINITY,
        });
        return report;
    }
    let mut is_edge = vec![false; inst.n * horizon];
    for e in &inst.edges {
        is_edge[e.i * horizon + e.t] = true;
    }
    let push = |report: &mut FeasibilityReport, constraint, excess: f64| {
        if excess > tol || excess.is_nan() {
            report.violations.push(Violation { constraint, excess });
        }
    };
    for t in 0..horizon {
        let col: f64 = (0..inst.n).map(|i| sol.x(i, t)).sum();
        let excess = col - inst.p[t];
        report.min_slack = report.min_slack.min(-excess);
        push(&mut report, Constraint::StepCapacity { t }, excess);
    }
    for i in 0..inst.n {
        let mut survive = 1.0;
        let mut cum = 0.0;
        for t in 0..horizon {
            let x = sol.x(i, t);
            push(&mut report, Constraint::Nonnegative { i, t }, -x);
            if !is_edge[i * horizon + t] {
                push(&mut report, Constraint::NonEdge { i, t }, x);
            }
            let excess = x - inst.p[t] * (1.0 - sol.y(i, t));
            report.min_slack = report.min_slack.min(-excess);
            push(&mut report, Constraint::FreeMass { i, t }, excess);
            cum += x;
            survive *= 1.0 - inst.p[t];
            push(&mut report, Constraint::DegreeBound { i, t }, cum - (1.0 - survive));
        }
    }
    report
}

/// Mass-weighted averages of `r·y`, `r(1-y)` and `r`, split by whether
/// `y_{i,t} ≤ θ`. Satisfies `alpha = s_le + s_gt - beta_le - beta_gt`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpStatistics {
    pub theta: f64,
    pub alpha: f64,
    pub beta_le: f64,
    pub beta_gt: f64,
    pub s_le: f64,
    pub s_gt: f64,
    pub total_mass: f64,
    /// Set when the solution has no mass; every average is then 0.
    pub zero_mass: bool,
}

pub fn lp_statistics(sol: &LpSolution, theta: f64) -> LpStatistics {
    let mut acc = LpStatistics {
        theta,
        alpha: 0.0,
        beta_le: 0.0,
        beta_gt: 0.0,
        s_le: 0.0,
        s_gt: 0.0,
        total_mass: 0.0,
        zero_mass: false,
    };
    for i in 0..sol.n {
        for t in 0..sol.horizon() {
            let (x, y, r) = (sol.x(i, t), sol.y(i, t), sol.r(i, t));
            acc.total_mass += x;
            if x == 0.0 {
                continue;
            }
            acc.alpha += r * y * x;
            if y <= theta {
                acc.beta_le += r * (1.0 - y) * x;
                acc.s_le += r * x;
            } else {
                acc.beta_gt += r * (1.0 - y) * x;
                acc.s_gt += r * x;
            }
        }
    }
    if acc.total_mass > 0.0 {
        let m = acc.total_mass;
        acc.alpha /= m;
        acc.beta_le /= m;
        acc.beta_gt /= m;
        acc.s_le /= m;
        acc.s_gt /= m;
    } else {
        acc.zero_mass = true;
    }
    acc
}

// ---------------------------------------------------------------------------
// Finite-type arrivals
// ---------------------------------------------------------------------------

/// A fractional solution of the finite-type LP. `x[t][j][i]` is the mass
/// on offline node `i` from type `j` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralLpSolution {
    pub n: usize,
    /// `probs[t][j] = p_{j,t}`.
    pub probs: Vec<Vec<f64>>,
    pub x: Vec<Vec<Vec<f64>>>,
    /// `y[i * T + t] = Σ_{t'<t} Σ_j x_{i,j,t'}`.
    y: Vec<f64>,
    pub objective: f64,
    pub basic: bool,
}

impl GeneralLpSolution {
    /// Wraps arbitrary masses without checking feasibility.
    pub fn from_masses(inst: &GeneralInstance, x: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let horizon = inst.horizon();
        if x.len() != horizon
            || x.iter().zip(&inst.types).any(|(xt, ts)| {
                xt.len() != ts.len() || xt.iter().any(|xj| xj.len() != inst.n)
            })
        {
            return invalid("mass array shape does not match the instance");
        }
        let mut y = vec![0.0; inst.n * horizon];
        for i in 0..inst.n {
            let mut acc = 0.0;
            for t in 0..horizon {
                y[i * horizon + t] = acc;
                acc += x[t].iter().map(|xj| xj[i]).sum::<f64>();
            }
        }
        let mut objective = 0.0;
        for (t, ts) in inst.types.iter().enumerate() {
            for (j, at) in ts.iter().enumerate() {
                for &(i, w) in &at.edges {
                    objective += w * x[t][j][i];
                }
            }
        }
        Ok(Self {
            n: inst.n,
            probs: inst.types.iter().map(|ts| ts.iter().map(|a| a.p).collect()).collect(),
            x,
            y,
            objective,
            basic: false,
        })
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.y[i * self.horizon() + t]
    }

    pub fn r(&self, i: usize, j: usize, t: usize) -> f64 {
        rate(self.x[t][j][i], self.probs[t][j], self.y(i, t))
    }
}

pub fn solve_lp_general(inst: &GeneralInstance) -> Result<GeneralLpSolution> {
    solve_lp_general_with(inst, &DenseSimplex::default())
}

pub fn solve_lp_general_with(inst: &GeneralInstance, solver: &impl LpSolver) -> Result<GeneralLpSolution> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return invalid(violations.join("; "));
    }
    // (t, j, i, w) per variable, in time order.
    let mut vars = Vec::new();
    for (t, ts) in inst.types.iter().enumerate() {
        for (j, at) in ts.iter().enumerate() {
            for &(i, w) in &at.edges {
                vars.push((t, j, i, w));
            }
        }
    }
    let mut rows = Vec::new();
    let mut k = 0;
    for ts in &inst.types {
        for at in ts {
            if !at.edges.is_empty() {
                rows.push(Row {
                    coeffs: (k..k + at.edges.len()).map(|v| (v, 1.0)).collect(),
                    rhs: at.p,
                });
            }
            k += at.edges.len();
        }
    }
    for (v, &(t, j, i, _)) in vars.iter().enumerate() {
        let pjt = inst.types[t][j].p;
        let mut coeffs = vec![(v, 1.0)];
        coeffs.extend(
            vars.iter()
                .enumerate()
                .filter(|(_, &(s, _, i2, _))| s < t && i2 == i)
                .map(|(v2, _)| (v2, pjt)),
        );
        rows.push(Row { coeffs, rhs: pjt });
    }
    let problem = LpProblem {
        objective: vars.iter().map(|v| v.3).collect(),
        rows,
        upper: vars.iter().map(|&(t, j, _, _)| inst.types[t][j].p).collect(),
    };
    let out = solver.maximize(&problem)?;
    let mut x: Vec<Vec<Vec<f64>>> = inst
        .types
        .iter()
        .map(|ts| vec![vec![0.0; inst.n]; ts.len()])
        .collect();
    for (v, &(t, j, i, _)) in vars.iter().enumerate() {
        x[t][j][i] = out.x[v];
    }
    let mut sol = GeneralLpSolution::from_masses(inst, x)?;
    sol.basic = true;
    Ok(sol)
}

/// Checks the finite-type rows: per-type capacity and `x_{i,j,t} ≤ p_{j,t}(1 - y_{i,t})`.
pub fn check_feasibility_general(sol: &GeneralLpSolution, inst: &GeneralInstance, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (t, ts) in inst.types.iter().enumerate() {
        for (j, at) in ts.iter().enumerate() {
            let col: f64 = sol.x[t][j].iter().sum();
            if col > at.p + tol {
                out.push(format!("type capacity exceeded at t={}, j={} by {}", t + 1, j + 1, col - at.p));
            }
            for i in 0..inst.n {
                let x = sol.x[t][j][i];
                if x < -tol {
                    out.push(format!("negative mass at (i={}, j={}, t={})", i + 1, j + 1, t + 1));
                }
                if x > tol && !at.edges.iter().any(|&(e, _)| e == i) {
                    out.push(format!("mass on non-edge (i={}, j={}, t={})", i + 1, j + 1, t + 1));
                }
                let excess = x - at.p * (1.0 - sol.y(i, t));
                if excess > tol {
                    out.push(format!("free-mass bound exceeded at (i={}, j={}, t={}) by {excess}", i + 1, j + 1, t + 1));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MassDoc {
    i: usize,
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
    v: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    x: Vec<MassDoc>,
    objective: f64,
}

/// Serializes the nonzero masses with 1-based indices.
pub fn solution_to_json(sol: &LpSolution) -> String {
    let mut x = Vec::new();
    for i in 0..sol.n {
        for t in 0..sol.horizon() {
            let v = sol.x(i, t);
            if v != 0.0 {
                x.push(MassDoc { i: i + 1, t: t + 1, j: None, v });
            }
        }
    }
    serde_json::to_string_pretty(&SolutionDoc { x, objective: sol.objective }).expect("serializable")
}

pub fn solution_from_json(text: &str, inst: &BernoulliInstance) -> Result<LpSolution> {
    let doc: SolutionDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let horizon = inst.horizon();
    let mut x = vec![0.0; inst.n * horizon];
    for m in doc.x {
        if m.j.is_some() {
            return Err(Error::Parse("field `j` is not allowed for Bernoulli solutions".into()));
        }
        if m.i == 0 || m.i > inst.n || m.t == 0 || m.t > horizon {
            return Err(Error::Parse(format!("mass index (i={}, t={}) out of range", m.i, m.t)));
        }
        x[(m.i - 1) * horizon + m.t - 1] = m.v;
    }
    LpSolution::from_masses(inst, x)
}

pub fn general_solution_to_json(sol: &GeneralLpSolution) -> String {
    let mut x = Vec::new();
    for (t, xt) in sol.x.iter().enumerate() {
        for (j, xj) in xt.iter().enumerate() {
            for (i, &v) in xj.iter().enumerate() {
                if v != 0.0 {
                    x.push(MassDoc { i: i + 1, t: t + 1, j: Some(j + 1), v });
                }
            }
        }
    }
    serde_json::to_string_pretty(&SolutionDoc { x, objective: sol.objective }).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_rescale_example, gen_uniform_star, ArrivalType, Edge};

    fn single(p: Vec<f64>, w: Vec<f64>) -> BernoulliInstance {
        let edges = w.iter().enumerate().map(|(t, &w)| Edge { i: 0, t, w }).collect();
        BernoulliInstance::new(1, p, edges, None).unwrap()
    }

    #[test]
    fn single_edge_lp() {
        let sol = solve_lp(&single(vec![1.0], vec![5.0])).unwrap();
        assert_eq!(sol.x(0, 0), 1.0);
        assert_eq!(sol.objective, 5.0);
        assert!(sol.basic);
    }

    #[test]
    fn rescale_example_has_diagonal_optimum() {
        let inst = gen_rescale_example(4, 1000.0).unwrap();
        let sol = solve_lp(&inst).unwrap();
        for i in 0..4 {
            assert!((sol.x(i, i) - 0.75).abs() < 1e-9);
            assert!((sol.x(i, 4) - 0.25).abs() < 1e-9);
        }
        assert!((sol.objective - 1003.0).abs() < 1e-9);
    }

    #[test]
    fn star_lp_fills_the_single_arrival() {
        let sol = solve_lp(&gen_uniform_star(4).unwrap()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        let col: f64 = (0..4).map(|i| sol.x(i, 0)).sum();
        assert!((col - 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_two_types_share_one_node() {
        let inst = GeneralInstance::new(
            1,
            vec![vec![
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
                ArrivalType { p: 0.5, edges: vec![(0, 1.0)] },
            ]],
        )
        .unwrap();
        let sol = solve_lp_general(&inst).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.x[0][0][0] - 0.5).abs() < 1e-12 && (sol.x[0][1][0] - 0.5).abs() < 1e-12);
        let empty = GeneralInstance::new(1, vec![vec![]]).unwrap();
        assert_eq!(solve_lp_general(&empty).unwrap().objective, 0.0);
    }

    #[test]
    fn general_embedding_matches_bernoulli() {
        let inst = gen_rescale_example(3, 10.0).unwrap();
        let b = solve_lp(&inst).unwrap();
        let g = solve_lp_general(&GeneralInstance::from_bernoulli(&inst)).unwrap();
        assert!((b.objective - g.objective).abs() < 1e-9);
        for i in 0..3 {
            for t in 0..4 {
                assert!((b.x(i, t) - g.x[t][0][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn overfull_mass_is_flagged() {
        let inst = single(vec![0.5, 0.5], vec![1.0, 1.0]);
        let sol = LpSolution::from_masses(&inst, vec![0.6, 0.0]).unwrap();
        let rep = check_feasibility(&sol, &inst, 1e-7);
        let kinds: Vec<_> = rep.violations.iter().map(|v| v.constraint.clone()).collect();
        assert!(kinds.contains(&Constraint::StepCapacity { t: 0 }));
        assert!(kinds.contains(&Constraint::FreeMass { i: 0, t: 0 }));
    }

    #[test]
    fn solver_output_is_feasible() {
        let inst = gen_rescale_example(5, 1000.0).unwrap();
        let sol = solve_lp(&inst).unwrap();
        assert!(check_feasibility(&sol, &inst, 1e-7).is_feasible());
    }

    #[test]
    fn statistics_of_single_full_edge() {
        let inst = single(vec![0.7], vec![1.0]);
        let sol = LpSolution::from_masses(&inst, vec![0.7]).unwrap();
        let s = lp_statistics(&sol, 0.5);
        assert_eq!((s.alpha, s.s_le, s.beta_le, s.s_gt, s.beta_gt), (0.0, 1.0, 1.0, 0.0, 0.0));
        // Tight case: beta_le = S_le (1 - θ + S_le / 2).
        assert!((s.beta_le - s.s_le * (1.0 - 0.5 + s.s_le / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn statistics_of_zero_solution_are_flagged() {
        let inst = single(vec![0.7], vec![1.0]);
        let sol = LpSolution::from_masses(&inst, vec![0.0]).unwrap();
        let s = lp_statistics(&sol, 0.5);
        assert!(s.zero_mass);
        assert_eq!(s.alpha + s.s_le + s.s_gt, 0.0);
    }

    #[test]
    fn rate_is_zero_without_mass() {
        let inst = single(vec![0.0, 1.0], vec![1.0, 1.0]);
        let sol = LpSolution::from_masses(&inst, vec![0.0, 1.0]).unwrap();
        assert_eq!(sol.r(0, 0), 0.0);
        assert_eq!(sol.r(0, 1), 1.0);
    }

    #[test]
    fn solution_json_round_trip() {
        let inst = gen_rescale_example(3, 1000.0).unwrap();
        let sol = solve_lp(&inst).unwrap();
        let back = solution_from_json(&solution_to_json(&sol), &inst).unwrap();
        assert_eq!(back.masses(), sol.masses());
        assert!((back.objective - sol.objective).abs() < 1e-9);
    }
}

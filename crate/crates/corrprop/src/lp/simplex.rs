//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Solves `max c·x` subject to `A x ≤ b`, `0 ≤ x ≤ u` with `b ≥ 0`, so the
//! all-slack basis is feasible and no phase I is needed. Nonbasic variables
//! sit at either bound; the ratio test includes the entering variable's own
//! bound flip. Smallest-index entering and leaving choices rule out cycling.

use crate::error::{invalid, Error, Result};

/// One `≤` row with sparse coefficients.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Per-variable upper bound; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// A maximizer for problems in [`LpProblem`] form.
pub trait LpSolver {
    fn maximize(&self, problem: &LpProblem) -> Result<LpOutcome>;
}

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    /// Optimality and pivot tolerance.
    pub tol: f64,
    /// `None` selects a size-based default.
    pub max_iterations: Option<usize>,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

impl LpSolver for DenseSimplex {
    fn maximize(&self, problem: &LpProblem) -> Result<LpOutcome> {
        let nv = problem.objective.len();
        let m = problem.rows.len();
        if problem.upper.len() != nv {
            return invalid("upper-bound vector length differs from objective length");
        }
        for (r, row) in problem.rows.iter().enumerate() {
            if !(row.rhs >= 0.0 && row.rhs.is_finite()) {
                return invalid(format!("row {r} has rhs {} (must be finite and >= 0)", row.rhs));
            }
            if row.coeffs.iter().any(|&(j, a)| j >= nv || !a.is_finite()) {
                return invalid(format!("row {r} has an out-of-range or non-finite coefficient"));
            }
        }
        if problem.upper.iter().any(|&u| u.is_nan() || u < 0.0) {
            return invalid("upper bounds must be >= 0");
        }

        let ncols = nv + m;
        let mut upper = problem.upper.clone();
        upper.extend(std::iter::repeat(f64::INFINITY).take(m));
        let mut tab = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut basis: Vec<usize> = (nv..ncols).collect();
        let mut status = vec![Status::AtLower; ncols];
        for (r, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                tab[r * ncols + j] += a;
            }
            tab[r * ncols + nv + r] = 1.0;
            beta[r] = row.rhs;
            status[nv + r] = Status::Basic;
        }
        let mut d = problem.objective.clone();
        d.extend(std::iter::repeat(0.0).take(m));

        let limit = self.max_iterations.unwrap_or(1000 + 50 * (m + ncols));
        let tol = self.tol;
        let mut iterations = 0;
        loop {
            let entering = (0..ncols).find(|&j| match status[j] {
                Status::AtLower => d[j] > tol,
                Status::AtUpper => d[j] < -tol,
                Status::Basic => false,
            });
            let Some(j) = entering else { break };
            if iterations >= limit {
                return Err(Error::Numeric(format!(
                    "simplex did not converge after {iterations} iterations ({m} rows, {nv} variables, last entering column {j})"
                )));
            }
            iterations += 1;
            let dir = if status[j] == Status::AtLower { 1.0 } else { -1.0 };

            let mut step = upper[j];
            let mut leave: Option<(usize, Status)> = None;
            for r in 0..m {
                let a = dir * tab[r * ncols + j];
                let (lim, hits) = if a > tol {
                    (beta[r] / a, Status::AtLower)
                } else if a < -tol && upper[basis[r]].is_finite() {
                    ((upper[basis[r]] - beta[r]) / -a, Status::AtUpper)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    None => lim < step,
                    Some((r0, _)) => lim < step || (lim == step && basis[r] < basis[r0]),
                };
                if better {
                    step = lim;
                    leave = Some((r, hits));
                }
            }
            if !step.is_finite() {
                return Err(Error::Numeric(format!(
                    "problem is unbounded along column {j} after {iterations} iterations"
                )));
            }
            for r in 0..m {
                beta[r] -= dir * step * tab[r * ncols + j];
            }
            match leave {
                None => {
                    status[j] = if status[j] == Status::AtLower {
                        Status::AtUpper
                    } else {
                        Status::AtLower
                    };
                }
                Some((pr, hits)) => {
                    let value = if status[j] == Status::AtLower { step } else { upper[j] - step };
                    let leaving = basis[pr];
                    status[leaving] = hits;
                    let piv = tab[pr * ncols + j];
                    for c in 0..ncols {
                        tab[pr * ncols + c] /= piv;
                    }
                    let (before, rest) = tab.split_at_mut(pr * ncols);
                    let (prow, after) = rest.split_at_mut(ncols);
                    for other in before.chunks_exact_mut(ncols).chain(after.chunks_exact_mut(ncols)) {
                        let f = other[j];
                        if f != 0.0 {
                            for (o, &pv) in other.iter_mut().zip(prow.iter()) {
                                *o -= f * pv;
                            }
                        }
                    }
                    let f = d[j];
                    for (dc, &pv) in d.iter_mut().zip(prow.iter()) {
                        *dc -= f * pv;
                    }
                    basis[pr] = j;
                    status[j] = Status::Basic;
                    beta[pr] = value;
                }
            }
        }

        let mut x = vec![0.0; nv];
        for (j, xj) in x.iter_mut().enumerate() {
            if status[j] == Status::AtUpper {
                *xj = upper[j];
            }
        }
        for (r, &b) in basis.iter().enumerate() {
            if b < nv {
                x[b] = beta[r];
            }
        }
        for (j, xj) in x.iter_mut().enumerate() {
            if xj.abs() < 1e-12 {
                *xj = 0.0;
            }
            *xj = xj.clamp(0.0, upper[j]);
        }
        let objective = x.iter().zip(&problem.objective).map(|(a, c)| a * c).sum();
        Ok(LpOutcome {
            x,
            objective,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], rhs: f64) -> Row {
        Row {
            coeffs: coeffs.to_vec(),
            rhs,
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let p = LpProblem {
            objective: vec![3.0, 5.0],
            rows: vec![row(&[(0, 1.0)], 4.0), row(&[(1, 2.0)], 12.0), row(&[(0, 3.0), (1, 2.0)], 18.0)],
            upper: vec![f64::INFINITY; 2],
        };
        let out = DenseSimplex::default().maximize(&p).unwrap();
        assert!((out.objective - 36.0).abs() < 1e-9);
        assert!((out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_without_rows() {
        let p = LpProblem {
            objective: vec![1.0, -1.0, 2.0],
            rows: vec![],
            upper: vec![0.5, 3.0, 0.25],
        };
        let out = DenseSimplex::default().maximize(&p).unwrap();
        assert_eq!(out.x, vec![0.5, 0.0, 0.25]);
        assert!((out.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bounds_interact_with_rows() {
        // max x + y, x + y <= 1.5, x <= 1, y <= 1
        let p = LpProblem {
            objective: vec![1.0, 1.0],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], 1.5)],
            upper: vec![1.0, 1.0],
        };
        let out = DenseSimplex::default().maximize(&p).unwrap();
        assert!((out.objective - 1.5).abs() < 1e-12);
        assert!(out.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn unbounded_is_reported() {
        let p = LpProblem {
            objective: vec![1.0],
            rows: vec![],
            upper: vec![f64::INFINITY],
        };
        assert!(matches!(DenseSimplex::default().maximize(&p), Err(Error::Numeric(_))));
    }

    #[test]
    fn degenerate_rows_terminate() {
        // Many rows tight at the origin.
        let p = LpProblem {
            objective: vec![1.0, 1.0, 1.0],
            rows: vec![
                row(&[(0, 1.0), (1, -1.0)], 0.0),
                row(&[(1, 1.0), (2, -1.0)], 0.0),
                row(&[(2, 1.0), (0, -1.0)], 0.0),
                row(&[(0, 1.0), (1, 1.0), (2, 1.0)], 3.0),
            ],
            upper: vec![f64::INFINITY; 3],
        };
        let out = DenseSimplex::default().maximize(&p).unwrap();
        assert!((out.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_is_rejected() {
        let p = LpProblem {
            objective: vec![1.0],
            rows: vec![row(&[(0, 1.0)], -1.0)],
            upper: vec![1.0],
        };
        assert!(matches!(DenseSimplex::default().maximize(&p), Err(Error::InvalidInput(_))));
    }
}

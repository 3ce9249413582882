//! Lower bounds on `E[min(1, X)]` for `X = Σ c_i X_i` with `c_i ∈ [0,1]` and
//! Bernoulli `X_i ~ Ber(q_i)`, plus the scalar functions used by the
//! certificates.
//!
//! The product-form bounds (independent coin, bucketing, fractional
//! bucketing) are valid whenever the `X_i` are negatively cylinder dependent;
//! the variance bound needs only `E[X] ≤ 1`.

use serde::Serialize;

use crate::error::{guard, invalid, Result};
use crate::pivotal::SubsetDistribution;
use crate::INTEGRALITY_EPS;

/// Largest independent system [`exact_min1`] will enumerate.
pub const EXACT_INDEPENDENT_MAX_N: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Correlation {
    Independent,
    Explicit(SubsetDistribution),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedBernoulliSystem {
    pub c: Vec<f64>,
    pub q: Vec<f64>,
    pub correlation: Correlation,
}

impl WeightedBernoulliSystem {
    pub fn independent(c: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let s = Self {
            c,
            q,
            correlation: Correlation::Independent,
        };
        s.check()?;
        Ok(s)
    }

    /// A system with the given joint law; marginals are read off the law.
    pub fn explicit(c: Vec<f64>, dist: SubsetDistribution) -> Result<Self> {
        if dist.n != c.len() {
            return invalid("distribution size differs from coefficient count");
        }
        if (dist.total() - 1.0).abs() > 1e-12 {
            return invalid(format!("distribution mass {} != 1", dist.total()));
        }
        let q = dist.marginals();
        let s = Self {
            c,
            q,
            correlation: Correlation::Explicit(dist),
        };
        s.check()?;
        Ok(s)
    }

    /// Same joint law, new coefficients.
    pub fn with_coefficients(&self, c: Vec<f64>) -> Result<Self> {
        let s = Self {
            c,
            q: self.q.clone(),
            correlation: self.correlation.clone(),
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if self.c.len() != self.q.len() {
            return invalid("coefficient and marginal lengths differ");
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.c.iter().all(unit) || !self.q.iter().all(unit) {
            return invalid("coefficients and marginals must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.c.iter().zip(&self.q).map(|(c, q)| c * q).sum()
    }
}

/// `{z}` with values within `INTEGRALITY_EPS` of an integer snapped to it.
fn floor_frac(z: f64) -> (f64, f64) {
    let fl = (z + INTEGRALITY_EPS).floor();
    let fr = z - fl;
    if fr.abs() < INTEGRALITY_EPS || fr < 0.0 {
        (fl, 0.0)
    } else {
        (fl, fr)
    }
}

/// `g_θ(x) = (1 - (1-θ){x/(1-θ)}) θ^⌊x/(1-θ)⌋`, unchecked.
pub(crate) fn g_raw(theta: f64, x: f64) -> f64 {
    let (fl, fr) = floor_frac(x / (1.0 - theta));
    (1.0 - (1.0 - theta) * fr) * theta.powi(fl as i32)
}

/// Continuous, convex and non-increasing in `x`; `g_θ(0) = 1`.
pub fn g_theta(theta: f64, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return invalid(format!("theta must lie in [0, 1), got {theta}"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return invalid(format!("g_theta needs finite x >= 0, got {x}"));
    }
    Ok(g_raw(theta, x))
}

/// Exact `E[min(1, X)]`.
pub fn exact_min1(sys: &WeightedBernoulliSystem) -> Result<f64> {
    match &sys.correlation {
        Correlation::Explicit(dist) => Ok(dist
            .support
            .iter()
            .map(|&(m, p)| {
                let s: f64 = (0..sys.len()).filter(|&k| m >> k & 1 == 1).map(|k| sys.c[k]).sum();
                p * s.min(1.0)
            })
            .sum()),
        Correlation::Independent => {
            guard("independent system size", sys.len(), EXACT_INDEPENDENT_MAX_N)?;
            Ok(enumerate_independent(&sys.c, &sys.q, 0, 0.0))
        }
    }
}

fn enumerate_independent(c: &[f64], q: &[f64], k: usize, partial: f64) -> f64 {
    if partial >= 1.0 {
        return 1.0;
    }
    if k == c.len() {
        return partial;
    }
    let mut v = 0.0;
    if q[k] > 0.0 {
        v += q[k] * enumerate_independent(c, q, k + 1, partial + c[k]);
    }
    if q[k] < 1.0 {
        v += (1.0 - q[k]) * enumerate_independent(c, q, k + 1, partial);
    }
    v
}

/// `1 - Π (1 - c_i q_i)`.
pub fn independent_coin_bound(sys: &WeightedBernoulliSystem) -> f64 {
    1.0 - sys.c.iter().zip(&sys.q).map(|(c, q)| 1.0 - c * q).product::<f64>()
}

/// `1 - Π_B (1 - Σ_{i∈B} c_i q_i)` over a partition whose buckets have `Σ c_i ≤ 1`.
pub fn bucketing_bound(sys: &WeightedBernoulliSystem, partition: &[Vec<usize>]) -> Result<f64> {
    let mut seen = vec![false; sys.len()];
    for b in partition {
        for &i in b {
            if i >= sys.len() || seen[i] {
                return invalid(format!("index {i} repeated or out of range in partition"));
            }
            seen[i] = true;
        }
        let cap: f64 = b.iter().map(|&i| sys.c[i]).sum();
        if cap > 1.0 + 1e-12 {
            return invalid(format!("bucket {b:?} has coefficient sum {cap} > 1"));
        }
    }
    if seen.iter().any(|s| !s) {
        return invalid("partition does not cover every index");
    }
    let prod: f64 = partition
        .iter()
        .map(|b| 1.0 - b.iter().map(|&i| sys.c[i] * sys.q[i]).sum::<f64>())
        .product();
    Ok(1.0 - prod)
}

/// Greedy first-fit partition into buckets of coefficient sum at most 1.
pub fn first_fit_partition(sys: &WeightedBernoulliSystem) -> Vec<Vec<usize>> {
    let mut buckets: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &c) in sys.c.iter().enumerate() {
        match buckets.iter_mut().find(|(s, _)| s + c <= 1.0) {
            Some((s, b)) => {
                *s += c;
                b.push(i);
            }
            None => buckets.push((c, vec![i])),
        }
    }
    buckets.into_iter().map(|(_, b)| b).collect()
}

/// `1 - g_θ(μ_S) Π_{i∉S} (1 - c_i q_i)` with `S = {i : q_i ≥ 1-θ}`, `μ_S = Σ_S c_i q_i`.
pub fn fractional_bucketing_bound(sys: &WeightedBernoulliSystem, theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return invalid(format!("theta must lie in [0, 1), got {theta}"));
    }
    let mut mu = 0.0;
    let mut rest = 1.0;
    for (&c, &q) in sys.c.iter().zip(&sys.q) {
        if q >= 1.0 - theta {
            mu += c * q;
        } else {
            rest *= 1.0 - c * q;
        }
    }
    Ok(1.0 - g_raw(theta, mu) * rest)
}

/// `E[X] - ½ √(Var(X) E[X])`, clamped at 0.
pub fn variance_bound(mean: f64, var: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mean) {
        return invalid(format!("variance bound needs E[X] in [0, 1], got {mean}"));
    }
    if !(var >= 0.0) {
        return invalid(format!("variance must be >= 0, got {var}"));
    }
    Ok((mean - 0.5 * (var * mean).sqrt()).max(0.0))
}

/// `Var(X)`: `Σ c_i² q_i (1 - q_i)` when independent, else from the joint law.
pub fn variance_of(sys: &WeightedBernoulliSystem) -> f64 {
    match &sys.correlation {
        Correlation::Independent => sys
            .c
            .iter()
            .zip(&sys.q)
            .map(|(c, q)| c * c * q * (1.0 - q))
            .sum(),
        Correlation::Explicit(dist) => {
            let mean = sys.mean();
            dist.support
                .iter()
                .map(|&(m, p)| {
                    let s: f64 = (0..sys.len()).filter(|&k| m >> k & 1 == 1).map(|k| sys.c[k]).sum();
                    p * (s - mean) * (s - mean)
                })
                .sum()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

/// Both branches of a pairwise merge; `sigma · plus + (1 - sigma) · minus`
/// reproduces the original coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeSplit {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub sigma: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Shifts coefficient mass between `j` and `k` as `c_j ± ρ q_k`, `c_k ∓ ρ q_j`
/// with the largest `ρ` keeping both in `[0, 1]`. `E[X]` is unchanged.
pub fn merge_pair(sys: &WeightedBernoulliSystem, j: usize, k: usize, dir: Direction) -> Result<(Vec<f64>, f64)> {
    let split = merge_split(sys, j, k)?;
    Ok(match dir {
        Direction::Plus => (split.plus, split.rho_plus),
        Direction::Minus => (split.minus, split.rho_minus),
    })
}

pub fn merge_split(sys: &WeightedBernoulliSystem, j: usize, k: usize) -> Result<MergeSplit> {
    if j == k || j >= sys.len() || k >= sys.len() {
        return invalid(format!("merge needs distinct in-range indices, got {j} and {k}"));
    }
    let (cj, ck, qj, qk) = (sys.c[j], sys.c[k], sys.q[j], sys.q[k]);
    if !(cj > 0.0 && cj < 1.0 && ck > 0.0 && ck < 1.0) {
        return invalid("merge needs fractional coefficients at both indices");
    }
    if qj == 0.0 && qk == 0.0 {
        return invalid("merge of two zero-marginal terms has no finite shift");
    }
    let rho_plus = ratio(1.0 - cj, qk).min(ratio(ck, qj));
    let rho_minus = ratio(cj, qk).min(ratio(1.0 - ck, qj));
    let mut plus = sys.c.clone();
    plus[j] = (cj + rho_plus * qk).clamp(0.0, 1.0);
    plus[k] = (ck - rho_plus * qj).clamp(0.0, 1.0);
    let mut minus = sys.c.clone();
    minus[j] = (cj - rho_minus * qk).clamp(0.0, 1.0);
    minus[k] = (ck + rho_minus * qj).clamp(0.0, 1.0);
    Ok(MergeSplit {
        plus,
        minus,
        rho_plus,
        rho_minus,
        sigma: rho_minus / (rho_plus + rho_minus),
    })
}

/// Step-function parameters `θ = δ/(δ+ε)` and `θ̂ = θ(1-ε)`; `θ = 0` when `ε = δ = 0`.
pub fn thresholds(eps: f64, delta: f64) -> (f64, f64) {
    let theta = if eps + delta == 0.0 { 0.0 } else { delta / (delta + eps) };
    (theta, theta * (1.0 - eps))
}

/// `k_{ε,δ}(z) = 1 - g_θ̂((1-ε) z) exp(-(1+δ)(1-z))`.
pub fn k_func(eps: f64, delta: f64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) || !(0.0..=1.0).contains(&delta) || eps + delta == 0.0 {
        return invalid(format!("k needs eps, delta in [0, 1], not both 0; got ({eps}, {delta})"));
    }
    if !(0.0..=1.0).contains(&z) {
        return invalid(format!("k is defined on [0, 1], got z={z}"));
    }
    Ok(k_raw(eps, delta, z))
}

pub(crate) fn k_raw(eps: f64, delta: f64, z: f64) -> f64 {
    let (_, theta_hat) = thresholds(eps, delta);
    1.0 - g_raw(theta_hat, (1.0 - eps) * z) * (-(1.0 + delta) * (1.0 - z)).exp()
}

/// `1 - g_θ(x) (1 - y/(1-x))^{(1-x)²/y}`, with the `y → 0` limit
/// `1 - g_θ(x) e^{-(1-x)}`. Domain `0 ≤ x ≤ 1`, `0 ≤ y ≤ (1-x)²`, and `y = 0` when `x = 1`.
pub fn conv_raw(theta: f64, x: f64, y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return invalid(format!("theta must lie in [0, 1), got {theta}"));
    }
    if !(0.0..=1.0).contains(&x) || !(y >= 0.0) || y > (1.0 - x).powi(2) + 1e-12 {
        return invalid(format!("({x}, {y}) outside 0 <= x <= 1, 0 <= y <= (1-x)^2"));
    }
    Ok(conv_unchecked(theta, x, y))
}

pub(crate) fn conv_unchecked(theta: f64, x: f64, y: f64) -> f64 {
    let g = g_raw(theta, x);
    if y == 0.0 {
        return 1.0 - g * (-(1.0 - x)).exp();
    }
    let base = (1.0 - y / (1.0 - x)).max(0.0);
    1.0 - g * base.powf((1.0 - x) * (1.0 - x) / y)
}

/// `f_var(z) = 1 - ½ √z`.
pub fn f_var(z: f64) -> f64 {
    1.0 - 0.5 * z.sqrt()
}

/// The vertex-weighted min-max objective with `θ = ½` and the linear
/// envelope `0.614 + 0.122 x + 0.197 y` substituted:
/// `max(1 - ½√(x + y - x(½ + x/2) - y²/2), 0.614 + 0.061 + 0.197 y²/2)`.
pub fn vertex_b(x: f64, y: f64) -> f64 {
    let inner = x + y - x * (0.5 + x / 2.0) - y * y / 2.0;
    let var_branch = 1.0 - 0.5 * inner.max(0.0).sqrt();
    let conv_branch = 0.614 + 0.122 * 0.5 + 0.197 * y * y / 2.0;
    var_branch.max(conv_branch)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub parameters: String,
    /// `exact - value` when the exact value is available.
    pub gap_to_exact: Option<f64>,
}

/// Evaluates every bound on a system, with the exact value when small enough.
pub fn bound_reports(sys: &WeightedBernoulliSystem, theta: f64) -> Result<(Option<f64>, Vec<BoundReport>)> {
    let exact = match &sys.correlation {
        Correlation::Independent if sys.len() > EXACT_INDEPENDENT_MAX_N => None,
        _ => Some(exact_min1(sys)?),
    };
    let gap = |v: f64| exact.map(|e| e - v);
    let partition = first_fit_partition(sys);
    let mut out = vec![
        BoundReport {
            name: "independent_coin".into(),
            value: independent_coin_bound(sys),
            parameters: String::new(),
            gap_to_exact: None,
        },
        BoundReport {
            name: "bucketing".into(),
            value: bucketing_bound(sys, &partition)?,
            parameters: format!("partition={partition:?}"),
            gap_to_exact: None,
        },
        BoundReport {
            name: "fractional_bucketing".into(),
            value: fractional_bucketing_bound(sys, theta)?,
            parameters: format!("theta={theta}"),
            gap_to_exact: None,
        },
    ];
    let mean = sys.mean();
    if mean <= 1.0 {
        out.push(BoundReport {
            name: "variance".into(),
            value: variance_bound(mean, variance_of(sys))?,
            parameters: format!("mean={mean}"),
            gap_to_exact: None,
        });
    }
    for r in &mut out {
        r.gap_to_exact = gap(r.value);
    }
    Ok((exact, out))
}

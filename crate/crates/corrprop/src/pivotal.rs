//! Linear-order pivotal sampling.
//!
//! Given `v ∈ [0,1]^n`, repeatedly take the two lowest-index fractional
//! entries and move mass between them so that one becomes 0 or 1 while their
//! sum and expectations are preserved. A lone fractional entry left at the
//! end is rounded by a single coin. The output subset satisfies
//!
//! * `Pr[i ∈ S] = v_i`;
//! * `Pr[|S ∩ {0..k}| ≥ 1] = min(1, Σ_{i<k} v_i)` for every prefix;
//! * negative cylinder dependence of the indicators.
//!
//! Pivot coin, with `s = v_i + v_j`: if `s ≤ 1`, `(s, 0)` with probability
//! `v_i / s`, else `(0, s)`; if `s > 1`, `(1, s - 1)` with probability
//! `(1 - v_j) / (2 - s)`, else `(s - 1, 1)`. Each pivot consumes one uniform draw.

use rand::Rng;

use crate::error::{guard, Result};
use crate::INTEGRALITY_EPS;

/// Largest input size accepted by [`ps_exact_distribution`].
pub const EXACT_MAX_N: usize = 16;

fn is_fractional(v: f64) -> bool {
    (v - v.round()).abs() > INTEGRALITY_EPS
}

/// The two outcomes of one pivot: `(first_i, first_j, prob_first, second_i, second_j)`.
fn pivot(vi: f64, vj: f64) -> (f64, f64, f64, f64, f64) {
    let s = vi + vj;
    if s <= 1.0 {
        (s, 0.0, vi / s, 0.0, s)
    } else {
        (1.0, s - 1.0, (1.0 - vj) / (2.0 - s), s - 1.0, 1.0)
    }
}

fn snap(v: f64) -> f64 {
    if is_fractional(v) {
        v
    } else {
        v.round()
    }
}

/// Draws a subset (ascending indices). Entries are clamped to `[0, 1]`.
pub fn ps_sample<R: Rng + ?Sized>(v: &[f64], rng: &mut R) -> Vec<usize> {
    let mut w: Vec<f64> = v.iter().map(|&x| snap(x.clamp(0.0, 1.0))).collect();
    let mut cur: Option<usize> = None;
    for j in 0..w.len() {
        if !is_fractional(w[j]) {
            continue;
        }
        let Some(i) = cur else {
            cur = Some(j);
            continue;
        };
        let (ai, aj, prob, bi, bj) = pivot(w[i], w[j]);
        let (ni, nj) = if rng.gen::<f64>() < prob { (ai, aj) } else { (bi, bj) };
        w[i] = snap(ni);
        w[j] = snap(nj);
        cur = [i, j].into_iter().find(|&k| is_fractional(w[k]));
    }
    if let Some(i) = cur {
        w[i] = if rng.gen::<f64>() < w[i] { 1.0 } else { 0.0 };
    }
    (0..w.len()).filter(|&k| w[k] == 1.0).collect()
}

/// A finite distribution over subsets of `{0..n}`, encoded as bitmasks.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetDistribution {
    pub n: usize,
    /// Distinct masks with positive probability, in increasing mask order.
    pub support: Vec<(u64, f64)>,
}

impl SubsetDistribution {
    /// Merges duplicate masks and drops zero-probability entries.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut map = std::collections::BTreeMap::new();
        for (m, p) in pairs {
            *map.entry(m).or_insert(0.0) += p;
        }
        Self {
            n,
            support: map.into_iter().filter(|&(_, p)| p > 0.0).collect(),
        }
    }

    /// The product distribution with independent marginals `q`.
    pub fn independent(q: &[f64]) -> Self {
        let n = q.len();
        let mut pairs = vec![(0u64, 1.0)];
        for (k, &qk) in q.iter().enumerate() {
            let mut next = Vec::with_capacity(pairs.len() * 2);
            for (m, p) in pairs {
                if qk < 1.0 {
                    next.push((m, p * (1.0 - qk)));
                }
                if qk > 0.0 {
                    next.push((m | 1 << k, p * qk));
                }
            }
            pairs = next;
        }
        Self::from_pairs(n, pairs)
    }

    pub fn subsets(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.support
            .iter()
            .map(|&(m, p)| ((0..self.n).filter(|&k| m >> k & 1 == 1).collect(), p))
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|&(_, p)| p).sum()
    }

    pub fn marginals(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.n];
        for &(m, p) in &self.support {
            for (k, qk) in q.iter_mut().enumerate() {
                if m >> k & 1 == 1 {
                    *qk += p;
                }
            }
        }
        q
    }

    /// `Pr[S ∩ {0..k} ≠ ∅]`.
    pub fn prefix_hit(&self, k: usize) -> f64 {
        let mask = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
        self.support.iter().filter(|&&(m, _)| m & mask != 0).map(|&(_, p)| p).sum()
    }
}

/// Exact output law of [`ps_sample`] by enumerating both outcomes of every pivot.
pub fn ps_exact_distribution(v: &[f64]) -> Result<SubsetDistribution> {
    guard("pivotal input size", v.len(), EXACT_MAX_N)?;
    let w: Vec<f64> = v.iter().map(|&x| snap(x.clamp(0.0, 1.0))).collect();
    let mut out = Vec::new();
    recurse(w, 0, None, 1.0, &mut out);
    Ok(SubsetDistribution::from_pairs(v.len(), out))
}

fn recurse(mut w: Vec<f64>, start: usize, cur: Option<usize>, prob: f64, out: &mut Vec<(u64, f64)>) {
    let mut cur = cur;
    let mut j = start;
    while j < w.len() && !is_fractional(w[j]) {
        j += 1;
    }
    if j == w.len() {
        let base = (0..w.len())
            .filter(|&k| w[k] == 1.0)
            .fold(0u64, |m, k| m | 1 << k);
        match cur {
            Some(i) => {
                out.push((base | 1 << i, prob * w[i]));
                out.push((base, prob * (1.0 - w[i])));
            }
            None => out.push((base, prob)),
        }
        return;
    }
    let Some(i) = cur else {
        cur = Some(j);
        return recurse(w, j + 1, cur, prob, out);
    };
    let (ai, aj, pa, bi, bj) = pivot(w[i], w[j]);
    for (ni, nj, pb) in [(ai, aj, pa), (bi, bj, 1.0 - pa)] {
        if pb <= 0.0 {
            continue;
        }
        let (oi, oj) = (w[i], w[j]);
        w[i] = snap(ni);
        w[j] = snap(nj);
        let next = [i, j].into_iter().find(|&k| is_fractional(w[k]));
        recurse(w.clone(), j + 1, next, prob * pb, out);
        w[i] = oi;
        w[j] = oj;
    }
}

/// Largest violations of the two negative-cylinder inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct NcdReport {
    /// `max_I (Pr[all of I in] - Π_{i∈I} v_i)`.
    pub ones_violation: f64,
    /// `max_I (Pr[none of I in] - Π_{i∈I} (1 - v_i))`.
    pub zeros_violation: f64,
    pub worst_ones: u64,
    pub worst_zeros: u64,
}

impl NcdReport {
    pub fn max_violation(&self) -> f64 {
        self.ones_violation.max(self.zeros_violation)
    }
}

/// Checks both inequalities over every nonempty index set.
pub fn check_ncd(dist: &SubsetDistribution, v: &[f64]) -> Result<NcdReport> {
    guard("NCD check size", dist.n, 20)?;
    let n = dist.n;
    let mut rep = NcdReport {
        ones_violation: f64::NEG_INFINITY,
        zeros_violation: f64::NEG_INFINITY,
        worst_ones: 0,
        worst_zeros: 0,
    };
    for set in 1u64..(1u64 << n) {
        let mut ones = 0.0;
        let mut zeros = 0.0;
        for &(m, p) in &dist.support {
            if m & set == set {
                ones += p;
            }
            if m & set == 0 {
                zeros += p;
            }
        }
        let (mut pv, mut pz) = (1.0, 1.0);
        for (k, &vk) in v.iter().enumerate().take(n) {
            if set >> k & 1 == 1 {
                pv *= vk;
                pz *= 1.0 - vk;
            }
        }
        if ones - pv > rep.ones_violation {
            rep.ones_violation = ones - pv;
            rep.worst_ones = set;
        }
        if zeros - pz > rep.zeros_violation {
            rep.zeros_violation = zeros - pz;
            rep.worst_zeros = set;
        }
    }
    if n == 0 {
        rep.ones_violation = 0.0;
        rep.zeros_violation = 0.0;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn integral_input_is_returned_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(ps_sample(&[1.0, 0.0, 1.0], &mut rng), vec![0, 2]);
        }
    }

    #[test]
    fn two_halves_give_exactly_one() {
        let d = ps_exact_distribution(&[0.5, 0.5]).unwrap();
        assert_eq!(d.support, vec![(0b01, 0.5), (0b10, 0.5)]);
        let d = ps_exact_distribution(&[1.0, 1.0]).unwrap();
        assert_eq!(d.support, vec![(0b11, 1.0)]);
    }

    #[test]
    fn prefix_property_on_small_input() {
        let d = ps_exact_distribution(&[0.6, 0.7]).unwrap();
        let q = d.marginals();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.7).abs() < 1e-15);
        assert!((d.prefix_hit(2) - 1.0).abs() < 1e-15);
        assert!((d.prefix_hit(1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn exact_marginals_match_input() {
        let v = [0.25, 0.25, 0.5];
        let d = ps_exact_distribution(&v).unwrap();
        for (q, v) in d.marginals().iter().zip(v) {
            assert!((q - v).abs() < 1e-15);
        }
        assert!((d.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ncd_checks() {
        let d = ps_exact_distribution(&[0.5, 0.5]).unwrap();
        assert!(check_ncd(&d, &[0.5, 0.5]).unwrap().max_violation() <= 1e-12);
        let ind = SubsetDistribution::independent(&[0.3, 0.7]);
        let rep = check_ncd(&ind, &[0.3, 0.7]).unwrap();
        assert!(rep.max_violation().abs() < 1e-12);
        let v = [0.4, 0.4, 0.4];
        let d = ps_exact_distribution(&v).unwrap();
        assert!(check_ncd(&d, &v).unwrap().max_violation() <= 1e-12);
    }

    #[test]
    fn a_correlated_pair_violates_ncd() {
        let d = SubsetDistribution::from_pairs(2, [(0b11, 0.5), (0b00, 0.5)]);
        assert!(check_ncd(&d, &[0.5, 0.5]).unwrap().ones_violation > 0.2);
    }

    #[test]
    fn lone_fractional_entry_is_a_single_coin() {
        let d = ps_exact_distribution(&[1.0, 0.3, 0.0]).unwrap();
        assert_eq!(d.support.len(), 2);
        assert!((d.marginals()[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exact_size_guard() {
        assert!(ps_exact_distribution(&[0.5; 17]).is_err());
    }

    #[test]
    fn sample_cardinality_is_floor_or_ceil() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = [0.3, 0.9, 0.45, 0.2, 0.77];
        let s: f64 = v.iter().sum();
        for _ in 0..1000 {
            let k = ps_sample(&v, &mut rng).len() as f64;
            assert!(k == s.floor() || k == s.ceil());
        }
    }
}

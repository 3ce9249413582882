//! Matching instances, named generators, the stochastic 3-SAT reduction and
//! the JSON file format.
//!
//! Edges are stored sparsely; an absent edge has weight 0. Internally every
//! index is 0-based, while the JSON format uses 1-based `i`, `t` and `j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack allowed when checking that type probabilities at one time sum to at most 1.
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub t: usize,
    pub w: f64,
}

/// Bernoulli arrivals: online node `t` arrives independently with probability `p[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliInstance {
    pub n: usize,
    pub p: Vec<f64>,
    /// Sorted by `(t, i)` when built through [`BernoulliInstance::new`].
    pub edges: Vec<Edge>,
    /// Present in vertex-weighted mode; every edge then carries its offline node's weight.
    pub vertex_weights: Option<Vec<f64>>,
}

impl BernoulliInstance {
    /// Builds a validated instance with edges in canonical `(t, i)` order.
    pub fn new(
        n: usize,
        p: Vec<f64>,
        mut edges: Vec<Edge>,
        vertex_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        edges.sort_by_key(|e| (e.t, e.i));
        let inst = Self {
            n,
            p,
            edges,
            vertex_weights,
        };
        let violations = inst.validate();
        if violations.is_empty() {
            Ok(inst)
        } else {
            invalid(violations.join("; "))
        }
    }

    /// Number of online time steps `T`.
    pub fn horizon(&self) -> usize {
        self.p.len()
    }

    pub fn is_vertex_weighted(&self) -> bool {
        self.vertex_weights.is_some()
    }

    /// Per time step, the `(i, w)` pairs of incident edges in increasing `i`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.horizon()];
        for e in &self.edges {
            if e.t < adj.len() {
                adj[e.t].push((e.i, e.w));
            }
        }
        for row in &mut adj {
            row.sort_by_key(|&(i, _)| i);
        }
        adj
    }

    /// Weight of edge `(i, t)`, or `None` if the edge is absent.
    pub fn edge_weight(&self, i: usize, t: usize) -> Option<f64> {
        self.edges.iter().find(|e| e.i == i && e.t == t).map(|e| e.w)
    }

    /// Lists every violated invariant; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (t, &p) in self.p.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("arrival probability out of range at t={}: {p}", t + 1));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.i >= self.n || e.t >= self.horizon() {
                out.push(format!("edge index out of range: (i={}, t={})", e.i + 1, e.t + 1));
            }
            if !(e.w.is_finite() && e.w >= 0.0) {
                out.push(format!("negative or non-finite weight on edge (i={}, t={})", e.i + 1, e.t + 1));
            }
            if !seen.insert((e.i, e.t)) {
                out.push(format!("duplicate edge (i={}, t={})", e.i + 1, e.t + 1));
            }
        }
        if let Some(vw) = &self.vertex_weights {
            if vw.len() != self.n {
                out.push(format!("vertex_weights has length {}, expected {}", vw.len(), self.n));
            }
            for (i, &w) in vw.iter().enumerate() {
                if !(w.is_finite() && w >= 0.0) {
                    out.push(format!("negative or non-finite vertex weight at i={}", i + 1));
                }
            }
            for e in &self.edges {
                if let Some(&wi) = vw.get(e.i) {
                    if e.w != wi {
                        out.push(format!(
                            "vertex-weight mismatch on edge (i={}, t={}): {} != {}",
                            e.i + 1,
                            e.t + 1,
                            e.w,
                            wi
                        ));
                    }
                }
            }
        }
        out
    }
}

/// One arrival type at a time step: realized with probability `p`, with its own edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalType {
    pub p: f64,
    /// `(i, w)` pairs in increasing `i`.
    pub edges: Vec<(usize, f64)>,
}

/// Finite-type arrivals: at time `t` at most one type from `types[t]` is realized.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralInstance {
    pub n: usize,
    /// `types[t][j]`; the horizon is `types.len()`.
    pub types: Vec<Vec<ArrivalType>>,
}

impl GeneralInstance {
    pub fn new(n: usize, mut types: Vec<Vec<ArrivalType>>) -> Result<Self> {
        for at in types.iter_mut().flatten() {
            at.edges.sort_by_key(|&(i, _)| i);
        }
        let inst = Self { n, types };
        let violations = inst.validate();
        if violations.is_empty() {
            Ok(inst)
        } else {
            invalid(violations.join("; "))
        }
    }

    /// The single-type embedding of a Bernoulli instance.
    pub fn from_bernoulli(inst: &BernoulliInstance) -> Self {
        let types = inst
            .adjacency()
            .into_iter()
            .zip(&inst.p)
            .map(|(edges, &p)| vec![ArrivalType { p, edges }])
            .collect();
        Self { n: inst.n, types }
    }

    pub fn horizon(&self) -> usize {
        self.types.len()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (t, ts) in self.types.iter().enumerate() {
            let mut total = 0.0;
            for (j, at) in ts.iter().enumerate() {
                if !(0.0..=1.0).contains(&at.p) {
                    out.push(format!("arrival probability out of range at t={}, j={}: {}", t + 1, j + 1, at.p));
                }
                total += at.p;
                let mut seen = std::collections::HashSet::new();
                for &(i, w) in &at.edges {
                    if i >= self.n {
                        out.push(format!("edge index out of range: (i={}, j={}, t={})", i + 1, j + 1, t + 1));
                    }
                    if !(w.is_finite() && w >= 0.0) {
                        out.push(format!("negative or non-finite weight on (i={}, j={}, t={})", i + 1, j + 1, t + 1));
                    }
                    if !seen.insert(i) {
                        out.push(format!("duplicate edge (i={}, j={}, t={})", i + 1, j + 1, t + 1));
                    }
                }
            }
            if total > 1.0 + PROB_SUM_TOL {
                out.push(format!("type probabilities at t={} sum to {total} > 1", t + 1));
            }
        }
        out
    }
}

/// Either instance model, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Bernoulli(BernoulliInstance),
    General(GeneralInstance),
}

impl Instance {
    pub fn n(&self) -> usize {
        match self {
            Instance::Bernoulli(b) => b.n,
            Instance::General(g) => g.n,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Instance::Bernoulli(b) => b.horizon(),
            Instance::General(g) => g.horizon(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        match self {
            Instance::Bernoulli(b) => b.validate(),
            Instance::General(g) => g.validate(),
        }
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Default weight of the final node's edges in [`gen_rescale_example`].
pub const DEFAULT_RESCALE_WEIGHT: f64 = 1000.0;

/// `n` diagonal edges of weight 1 arriving with probability `1 - 1/n`, then a
/// certain final node adjacent to every offline node with weight `big_w`.
///
/// Without rescaling, the final node sees `Bin(n, 1/n)` free proposers.
pub fn gen_rescale_example(n: usize, big_w: f64) -> Result<BernoulliInstance> {
    if n == 0 {
        return invalid("gen_rescale_example requires n >= 1");
    }
    let q = 1.0 - 1.0 / n as f64;
    let mut p = vec![q; n];
    p.push(1.0);
    let mut edges: Vec<Edge> = (0..n).map(|i| Edge { i, t: i, w: 1.0 }).collect();
    edges.extend((0..n).map(|i| Edge { i, t: n, w: big_w }));
    BernoulliInstance::new(n, p, edges, None)
}

/// A single certain arrival adjacent to all `n` offline nodes with unit weight.
pub fn gen_uniform_star(n: usize) -> Result<BernoulliInstance> {
    if n == 0 {
        return invalid("gen_uniform_star requires n >= 1");
    }
    let edges = (0..n).map(|i| Edge { i, t: 0, w: 1.0 }).collect();
    BernoulliInstance::new(n, vec![1.0], edges, Some(vec![1.0; n]))
}

/// Parameters for [`gen_random`].
#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub n: usize,
    pub horizon: usize,
    pub density: f64,
    pub weight_range: (f64, f64),
    pub vertex_weighted: bool,
    pub seed: u64,
}

/// Random instance: each edge present independently with probability
/// `density`, `p_t` uniform on `(0, 1]`, weights uniform on `weight_range`.
/// Deterministic given the seed.
pub fn gen_random(spec: &RandomSpec) -> Result<BernoulliInstance> {
    let (lo, hi) = spec.weight_range;
    if spec.n == 0 || spec.horizon == 0 {
        return invalid("gen_random requires n >= 1 and T >= 1");
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return invalid(format!("density {} not in [0, 1]", spec.density));
    }
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return invalid(format!("empty or negative weight range [{lo}, {hi}]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw_w = |rng: &mut ChaCha8Rng| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let p: Vec<f64> = (0..spec.horizon).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let vw: Option<Vec<f64>> = spec
        .vertex_weighted
        .then(|| (0..spec.n).map(|_| draw_w(&mut rng)).collect());
    let mut edges = Vec::new();
    for t in 0..spec.horizon {
        for i in 0..spec.n {
            if rng.gen::<f64>() < spec.density {
                let w = match &vw {
                    Some(vw) => vw[i],
                    None => draw_w(&mut rng),
                };
                edges.push(Edge { i, t, w });
            }
        }
    }
    BernoulliInstance::new(spec.n, p, edges, vw)
}

/// Random finite-type instance with `types_per_step` types per time step
/// whose probabilities sum to a uniform draw on `(0, 1]`.
pub fn gen_random_general(
    n: usize,
    horizon: usize,
    types_per_step: usize,
    density: f64,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<GeneralInstance> {
    let (lo, hi) = weight_range;
    if n == 0 || horizon == 0 || types_per_step == 0 {
        return invalid("gen_random_general requires n, T and types per step >= 1");
    }
    if !(0.0..=1.0).contains(&density) || !(0.0 <= lo && lo <= hi && hi.is_finite()) {
        return invalid("gen_random_general: bad density or weight range");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut types = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let total = 1.0 - rng.gen::<f64>();
        let raw: Vec<f64> = (0..types_per_step).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let mut step = Vec::with_capacity(types_per_step);
        for r in raw {
            let mut edges = Vec::new();
            for i in 0..n {
                if rng.gen::<f64>() < density {
                    let w = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
                    edges.push((i, w));
                }
            }
            step.push(ArrivalType {
                p: total * r / s,
                edges,
            });
        }
        types.push(step);
    }
    GeneralInstance::new(n, types)
}

// ---------------------------------------------------------------------------
// Stochastic 3-SAT reduction
// ---------------------------------------------------------------------------

/// A CNF formula over variables `1..=num_vars` with DIMACS-style signed
/// literals. Odd variables are chosen by the player, even ones by a fair coin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stochastic3SatFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
    /// Maximum number of clauses any variable may appear in.
    pub k: usize,
}

impl Stochastic3SatFormula {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut occurrences = vec![0usize; self.num_vars + 1];
        for (c, clause) in self.clauses.iter().enumerate() {
            if clause.is_empty() || clause.len() > 3 {
                out.push(format!("clause {} has {} literals, expected 1..=3", c + 1, clause.len()));
            }
            let mut vars: Vec<usize> = Vec::new();
            for &lit in clause {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > self.num_vars {
                    out.push(format!("clause {} has literal {lit} out of range", c + 1));
                    continue;
                }
                if lit < 0 && v % 2 == 0 {
                    out.push(format!("even variable x{v} appears negated in clause {}", c + 1));
                }
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            for v in vars {
                occurrences[v] += 1;
            }
        }
        for (v, &count) in occurrences.iter().enumerate().skip(1) {
            if count > self.k {
                out.push(format!("variable x{v} appears in {count} clauses > k={}", self.k));
            }
        }
        out
    }
}

/// The reduced matching instance plus the offline-node layout.
#[derive(Clone, Debug)]
pub struct SatReduction {
    pub instance: BernoulliInstance,
    /// `true_node[v - 1]` is the offline index of `T^v` (odd `v` only).
    pub true_node: Vec<Option<usize>>,
    /// `false_node[v - 1]` is the offline index of `F^v`.
    pub false_node: Vec<usize>,
}

/// Builds the unweighted instance whose optimum online value encodes the
/// formula: one variable node per variable in order, then one clause node
/// per clause arriving with probability `p`.
pub fn build_from_3sat(formula: &Stochastic3SatFormula, p: f64) -> Result<SatReduction> {
    let violations = formula.validate();
    if !violations.is_empty() {
        return invalid(violations.join("; "));
    }
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("clause probability {p} not in [0, 1]"));
    }
    let nv = formula.num_vars;
    let mut true_node = vec![None; nv];
    let mut false_node = vec![0; nv];
    let mut n = 0;
    for v in 1..=nv {
        if v % 2 == 1 {
            true_node[v - 1] = Some(n);
            n += 1;
        }
        false_node[v - 1] = n;
        n += 1;
    }
    let mut probs = Vec::with_capacity(nv + formula.clauses.len());
    let mut edges = Vec::new();
    for v in 1..=nv {
        let t = v - 1;
        if v % 2 == 1 {
            probs.push(1.0);
            edges.push(Edge { i: true_node[v - 1].unwrap(), t, w: 1.0 });
        } else {
            probs.push(0.5);
        }
        edges.push(Edge { i: false_node[v - 1], t, w: 1.0 });
    }
    for (c, clause) in formula.clauses.iter().enumerate() {
        let t = nv + c;
        probs.push(p);
        let mut nbrs: Vec<usize> = clause
            .iter()
            .map(|&lit| {
                let v = lit.unsigned_abs() as usize;
                if lit > 0 {
                    false_node[v - 1]
                } else {
                    true_node[v - 1].expect("validated: only odd variables are negated")
                }
            })
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        edges.extend(nbrs.into_iter().map(|i| Edge { i, t, w: 1.0 }));
    }
    let instance = BernoulliInstance::new(n, probs, edges, Some(vec![1.0; n]))?;
    Ok(SatReduction {
        instance,
        true_node,
        false_node,
    })
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Bernoulli,
    General,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    i: usize,
    t: usize,
    w: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeEdgeDoc {
    i: usize,
    w: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    t: usize,
    j: usize,
    p: f64,
    edges: Vec<TypeEdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    kind: Kind,
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertex_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<TypeDoc>>,
}

fn one_based(field: &str, v: usize, max: usize) -> Result<usize> {
    if v == 0 || v > max {
        Err(Error::Parse(format!("field `{field}` value {v} not in 1..={max}")))
    } else {
        Ok(v - 1)
    }
}

/// Parses and validates an instance document.
pub fn read_json(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let missing = |f: &str| Error::Parse(format!("missing field `{f}`"));
    let unexpected = |f: &str| Error::Parse(format!("field `{f}` is not allowed for this kind"));
    match doc.kind {
        Kind::Bernoulli => {
            if doc.types.is_some() {
                return Err(unexpected("types"));
            }
            let p = doc.p.ok_or_else(|| missing("p"))?;
            let edge_docs = doc.edges.ok_or_else(|| missing("edges"))?;
            if p.len() != doc.horizon {
                return Err(Error::Parse(format!("field `p` has length {}, expected T={}", p.len(), doc.horizon)));
            }
            let mut edges = Vec::with_capacity(edge_docs.len());
            for e in edge_docs {
                edges.push(Edge {
                    i: one_based("i", e.i, doc.n)?,
                    t: one_based("t", e.t, doc.horizon)?,
                    w: e.w,
                });
            }
            Ok(Instance::Bernoulli(BernoulliInstance::new(
                doc.n,
                p,
                edges,
                doc.vertex_weights,
            )?))
        }
        Kind::General => {
            for (name, present) in [
                ("p", doc.p.is_some()),
                ("edges", doc.edges.is_some()),
                ("vertex_weights", doc.vertex_weights.is_some()),
            ] {
                if present {
                    return Err(unexpected(name));
                }
            }
            let type_docs = doc.types.ok_or_else(|| missing("types"))?;
            let mut keyed: Vec<Vec<(usize, ArrivalType)>> = vec![Vec::new(); doc.horizon];
            for td in type_docs {
                let t = one_based("t", td.t, doc.horizon)?;
                if td.j == 0 {
                    return Err(Error::Parse("field `j` must be >= 1".into()));
                }
                if keyed[t].iter().any(|(j, _)| *j == td.j) {
                    return Err(Error::Parse(format!("duplicate type j={} at t={}", td.j, td.t)));
                }
                let mut edges = Vec::with_capacity(td.edges.len());
                for e in td.edges {
                    edges.push((one_based("i", e.i, doc.n)?, e.w));
                }
                keyed[t].push((td.j, ArrivalType { p: td.p, edges }));
            }
            let types = keyed
                .into_iter()
                .map(|mut v| {
                    v.sort_by_key(|(j, _)| *j);
                    v.into_iter().map(|(_, at)| at).collect()
                })
                .collect();
            Ok(Instance::General(GeneralInstance::new(doc.n, types)?))
        }
    }
}

/// Serializes an instance; `read_json(&write_json(x))` reproduces `x`.
pub fn write_json(inst: &Instance) -> String {
    let doc = match inst {
        Instance::Bernoulli(b) => InstanceDoc {
            kind: Kind::Bernoulli,
            n: b.n,
            horizon: b.horizon(),
            p: Some(b.p.clone()),
            edges: Some(
                b.edges
                    .iter()
                    .map(|e| EdgeDoc { i: e.i + 1, t: e.t + 1, w: e.w })
                    .collect(),
            ),
            vertex_weights: b.vertex_weights.clone(),
            types: None,
        },
        Instance::General(g) => InstanceDoc {
            kind: Kind::General,
            n: g.n,
            horizon: g.horizon(),
            p: None,
            edges: None,
            vertex_weights: None,
            types: Some(
                g.types
                    .iter()
                    .enumerate()
                    .flat_map(|(t, ts)| {
                        ts.iter().enumerate().map(move |(j, at)| TypeDoc {
                            t: t + 1,
                            j: j + 1,
                            p: at.p,
                            edges: at.edges.iter().map(|&(i, w)| TypeEdgeDoc { i: i + 1, w }).collect(),
                        })
                    })
                    .collect(),
            ),
        },
    };
    serde_json::to_string_pretty(&doc).expect("instance documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_instance_is_valid() {
        let inst = BernoulliInstance::new(
            2,
            vec![0.5, 0.7],
            vec![
                Edge { i: 0, t: 0, w: 1.0 },
                Edge { i: 1, t: 0, w: 2.0 },
                Edge { i: 1, t: 1, w: 3.0 },
            ],
            None,
        )
        .unwrap();
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn out_of_range_probability_is_reported() {
        let inst = BernoulliInstance {
            n: 1,
            p: vec![1.5],
            edges: vec![],
            vertex_weights: None,
        };
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("arrival probability out of range"));
    }

    #[test]
    fn vertex_weight_mismatch_is_reported() {
        let inst = BernoulliInstance {
            n: 2,
            p: vec![1.0],
            edges: vec![Edge { i: 0, t: 0, w: 1.0 }, Edge { i: 1, t: 0, w: 5.0 }],
            vertex_weights: Some(vec![1.0, 2.0]),
        };
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("vertex-weight mismatch"));
    }

    #[test]
    fn rescale_example_layout() {
        let inst = gen_rescale_example(2, DEFAULT_RESCALE_WEIGHT).unwrap();
        assert_eq!(inst.p, vec![0.5, 0.5, 1.0]);
        let got: Vec<(usize, usize, f64)> = inst.edges.iter().map(|e| (e.i, e.t, e.w)).collect();
        assert_eq!(
            got,
            vec![(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1000.0), (1, 2, 1000.0)]
        );
        assert_eq!(gen_rescale_example(1, 1000.0).unwrap().p, vec![0.0, 1.0]);
        let ten = gen_rescale_example(10, 1000.0).unwrap();
        assert_eq!(ten.edges.len(), 20);
        assert!(ten.p[..10].iter().all(|&p| (p - 0.9).abs() < 1e-15));
        assert!(gen_rescale_example(0, 1000.0).is_err());
    }

    #[test]
    fn uniform_star_layout() {
        let one = gen_uniform_star(1).unwrap();
        assert_eq!((one.n, one.p.clone(), one.edges.len()), (1, vec![1.0], 1));
        let three = gen_uniform_star(3).unwrap();
        assert_eq!(three.edges.len(), 3);
        assert!(three.edges.iter().all(|e| e.t == 0 && e.w == 1.0));
        assert!(gen_uniform_star(0).is_err());
    }

    fn spec(n: usize, t: usize, density: f64, seed: u64) -> RandomSpec {
        RandomSpec {
            n,
            horizon: t,
            density,
            weight_range: (0.5, 2.0),
            vertex_weighted: false,
            seed,
        }
    }

    #[test]
    fn random_generator_is_deterministic() {
        assert!(gen_random(&spec(3, 3, 0.0, 1)).unwrap().edges.is_empty());
        let a = gen_random(&spec(2, 2, 1.0, 7)).unwrap();
        assert_eq!(a.edges.len(), 4);
        assert_eq!(a, gen_random(&spec(2, 2, 1.0, 7)).unwrap());
        let x = write_json(&Instance::Bernoulli(gen_random(&spec(6, 6, 0.5, 1)).unwrap()));
        let y = write_json(&Instance::Bernoulli(gen_random(&spec(6, 6, 0.5, 1)).unwrap()));
        assert_eq!(x, y);
        assert!(a.p.iter().all(|&p| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn random_generator_rejects_empty_ranges() {
        assert!(gen_random(&spec(0, 3, 0.5, 1)).is_err());
        assert!(gen_random(&spec(3, 3, 1.5, 1)).is_err());
        let mut s = spec(3, 3, 0.5, 1);
        s.weight_range = (2.0, 1.0);
        assert!(gen_random(&s).is_err());
    }

    #[test]
    fn vertex_weighted_random_instance_is_consistent() {
        let mut s = spec(5, 5, 0.6, 3);
        s.vertex_weighted = true;
        let inst = gen_random(&s).unwrap();
        assert!(inst.validate().is_empty());
        assert!(inst.is_vertex_weighted());
    }

    #[test]
    fn sat_clause_neighbors_follow_literal_rule() {
        // Clause (not x1) or x3 or x4 over four variables.
        let f = Stochastic3SatFormula {
            num_vars: 4,
            clauses: vec![vec![-1, 3, 4]],
            k: 3,
        };
        let red = build_from_3sat(&f, 0.05).unwrap();
        let inst = &red.instance;
        // T1 F1 F2 T3 F3 F4
        assert_eq!(inst.n, 6);
        assert_eq!(inst.horizon(), 5);
        let clause_nbrs: Vec<usize> = inst.adjacency()[4].iter().map(|&(i, _)| i).collect();
        let mut expect = vec![
            red.true_node[0].unwrap(),
            red.false_node[2],
            red.false_node[3],
        ];
        expect.sort_unstable();
        assert_eq!(clause_nbrs, expect);
        assert_eq!(inst.p, vec![1.0, 0.5, 1.0, 0.5, 0.05]);
        assert!(inst.edges.iter().all(|e| e.w == 1.0));
    }

    #[test]
    fn sat_single_odd_variable_without_clauses() {
        let f = Stochastic3SatFormula { num_vars: 1, clauses: vec![], k: 3 };
        let red = build_from_3sat(&f, 0.05).unwrap();
        assert_eq!(red.instance.n, 2);
        assert_eq!(red.instance.horizon(), 1);
        assert_eq!(red.instance.p, vec![1.0]);
    }

    #[test]
    fn sat_negated_even_variable_is_rejected() {
        let f = Stochastic3SatFormula { num_vars: 2, clauses: vec![vec![-2]], k: 3 };
        assert!(build_from_3sat(&f, 0.05).is_err());
    }

    #[test]
    fn sat_occurrence_bound_is_enforced() {
        let f = Stochastic3SatFormula {
            num_vars: 1,
            clauses: vec![vec![1], vec![-1]],
            k: 1,
        };
        assert!(!f.validate().is_empty());
    }

    #[test]
    fn json_round_trip_bernoulli_and_general() {
        let b = Instance::Bernoulli(gen_rescale_example(3, 1000.0).unwrap());
        assert_eq!(read_json(&write_json(&b)).unwrap(), b);
        let s = Instance::Bernoulli(gen_uniform_star(3).unwrap());
        assert_eq!(read_json(&write_json(&s)).unwrap(), s);
        let g = Instance::General(gen_random_general(3, 3, 2, 0.7, (1.0, 3.0), 9).unwrap());
        assert_eq!(read_json(&write_json(&g)).unwrap(), g);
    }

    #[test]
    fn json_missing_field_is_named() {
        let err = read_json(r#"{"kind":"bernoulli","n":1,"T":1,"edges":[]}"#).unwrap_err();
        assert!(err.to_string().contains("`p`"), "{err}");
    }

    #[test]
    fn json_unknown_field_is_rejected() {
        let err = read_json(r#"{"kind":"bernoulli","n":1,"T":1,"p":[1],"edges":[],"extra":1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn json_general_overfull_probability_is_rejected() {
        let doc = r#"{"kind":"general","n":1,"T":1,"types":[
            {"t":1,"j":1,"p":0.6,"edges":[{"i":1,"w":1}]},
            {"t":1,"j":2,"p":0.6,"edges":[{"i":1,"w":1}]}]}"#;
        let err = read_json(doc).unwrap_err();
        assert!(err.to_string().contains("sum to"), "{err}");
    }

    #[test]
    fn json_indices_are_one_based() {
        let doc = r#"{"kind":"bernoulli","n":2,"T":1,"p":[1.0],"edges":[{"i":2,"t":1,"w":4}]}"#;
        let Instance::Bernoulli(b) = read_json(doc).unwrap() else { panic!() };
        assert_eq!(b.edges[0], Edge { i: 1, t: 0, w: 4.0 });
        let bad = r#"{"kind":"bernoulli","n":2,"T":1,"p":[1.0],"edges":[{"i":0,"t":1,"w":4}]}"#;
        assert!(read_json(bad).is_err());
    }
}

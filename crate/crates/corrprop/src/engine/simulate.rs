//! Monte Carlo evaluation. Replication `k` draws from a ChaCha8 stream
//! `(seed, k)`; chunk boundaries are fixed and results are reduced in
//! replication order, so reports are bit-identical for any worker count.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{rescale, rescale_general, Plan, Sampler, DEFAULT_DELTA, DEFAULT_EPS};
use crate::error::{invalid, Error, Result};
use crate::instance::Instance;
use crate::lp::{solve_lp, solve_lp_general};

const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum AlgSpec {
    /// Unscaled LP masses, pivotal sampling.
    Core,
    /// Unscaled LP masses, independent sampling.
    CoreIndependent,
    EdgeWeighted { eps: f64, delta: f64 },
    /// Unscaled; requires a vertex-weighted instance.
    VertexWeighted,
    /// Finite-type instances: rescaled LP masses, no discarding.
    General { eps: f64, delta: f64 },
}

fn parse_pair(name: &str, rest: Option<&str>) -> Result<(f64, f64)> {
    let Some(rest) = rest else {
        return Ok((DEFAULT_EPS, DEFAULT_DELTA));
    };
    let parts: Vec<&str> = rest.split(',').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number {s:?} in algorithm {name}")))
    };
    match parts.as_slice() {
        [e, d] => Ok((parse(e)?, parse(d)?)),
        _ => invalid(format!("algorithm {name} takes `:eps,delta`")),
    }
}

impl FromStr for AlgSpec {
    type Err = Error;

    /// `core`, `core-independent`, `edge-weighted[:eps,delta]`,
    /// `vertex-weighted`, `general[:eps,delta]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        match (name, rest) {
            ("core", None) => Ok(AlgSpec::Core),
            ("core-independent", None) => Ok(AlgSpec::CoreIndependent),
            ("vertex-weighted", None) => Ok(AlgSpec::VertexWeighted),
            ("edge-weighted", r) => {
                let (eps, delta) = parse_pair(name, r)?;
                Ok(AlgSpec::EdgeWeighted { eps, delta })
            }
            ("general", r) => {
                let (eps, delta) = parse_pair(name, r)?;
                Ok(AlgSpec::General { eps, delta })
            }
            _ => invalid(format!("unknown algorithm {s:?}")),
        }
    }
}

impl std::fmt::Display for AlgSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlgSpec::Core => write!(f, "core"),
            AlgSpec::CoreIndependent => write!(f, "core-independent"),
            AlgSpec::VertexWeighted => write!(f, "vertex-weighted"),
            AlgSpec::EdgeWeighted { eps, delta } => write!(f, "edge-weighted:{eps},{delta}"),
            AlgSpec::General { eps, delta } => write!(f, "general:{eps},{delta}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub algorithm: String,
    pub replications: usize,
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    /// Objective of the (unscaled) LP the algorithm was driven by.
    pub lp_objective: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `match_freq[i * T + t]`: fraction of runs matching `(i, t)`.
    pub match_freq: Vec<f64>,
    /// `free_freq[i * (T + 1) + t]`: fraction of runs with `i` free before step `t`.
    pub free_freq: Vec<f64>,
}

impl SimReport {
    pub fn match_freq(&self, i: usize, t: usize) -> f64 {
        self.match_freq[i * self.horizon + t]
    }

    pub fn free_freq(&self, i: usize, t: usize) -> f64 {
        self.free_freq[i * (self.horizon + 1) + t]
    }

    /// Fraction of runs in which online node `t` was matched.
    pub fn step_match_freq(&self, t: usize) -> f64 {
        (0..self.n).map(|i| self.match_freq(i, t)).sum()
    }
}

struct ChunkResult {
    weights: Vec<f64>,
    matched: Vec<u64>,
    free: Vec<u64>,
}

pub fn simulate(inst: &Instance, spec: &AlgSpec, replications: usize, seed: u64) -> Result<SimReport> {
    simulate_with_workers(inst, spec, replications, seed, None)
}

/// `workers = None` uses the global rayon pool.
pub fn simulate_with_workers(
    inst: &Instance,
    spec: &AlgSpec,
    replications: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<SimReport> {
    if replications == 0 {
        return invalid("replications must be >= 1");
    }
    let (plan, sampler, lp_objective) = build_plan(inst, spec)?;
    let n = inst.n();
    let horizon = inst.horizon();
    let chunks = replications.div_ceil(CHUNK);
    let work = || -> Vec<ChunkResult> {
        (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(&plan, sampler, seed, c * CHUNK, ((c + 1) * CHUNK).min(replications)))
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut sum = 0.0;
    let mut matched = vec![0u64; n * horizon];
    let mut free = vec![0u64; n * (horizon + 1)];
    for r in &results {
        for &w in &r.weights {
            sum += w;
        }
        for (a, b) in matched.iter_mut().zip(&r.matched) {
            *a += b;
        }
        for (a, b) in free.iter_mut().zip(&r.free) {
            *a += b;
        }
    }
    let reps = replications as f64;
    let mean = sum / reps;
    let mut ss = 0.0;
    for r in &results {
        for &w in &r.weights {
            ss += (w - mean) * (w - mean);
        }
    }
    let stderr = if replications > 1 {
        (ss / (reps - 1.0) / reps).sqrt()
    } else {
        0.0
    };
    Ok(SimReport {
        algorithm: spec.to_string(),
        replications,
        seed,
        n,
        horizon,
        lp_objective,
        mean,
        stderr,
        match_freq: matched.iter().map(|&c| c as f64 / reps).collect(),
        free_freq: free.iter().map(|&c| c as f64 / reps).collect(),
    })
}

fn build_plan(inst: &Instance, spec: &AlgSpec) -> Result<(Plan, Sampler, f64)> {
    match (inst, spec) {
        (Instance::Bernoulli(b), AlgSpec::General { .. }) => {
            let g = crate::instance::GeneralInstance::from_bernoulli(b);
            build_plan(&Instance::General(g), spec)
        }
        (Instance::Bernoulli(b), _) => {
            let sol = solve_lp(b)?;
            let lp = sol.objective;
            match *spec {
                AlgSpec::Core => Ok((Plan::bernoulli(b, &sol)?, Sampler::Pivotal, lp)),
                AlgSpec::CoreIndependent => Ok((Plan::bernoulli(b, &sol)?, Sampler::Independent, lp)),
                AlgSpec::VertexWeighted => {
                    if !b.is_vertex_weighted() {
                        return invalid("vertex-weighted algorithm needs a vertex-weighted instance");
                    }
                    Ok((Plan::bernoulli(b, &sol)?, Sampler::Pivotal, lp))
                }
                AlgSpec::EdgeWeighted { eps, delta } => {
                    let r = rescale(b, &sol, eps, delta)?;
                    Ok((Plan::bernoulli(b, &r.scaled)?, Sampler::Pivotal, lp))
                }
                AlgSpec::General { .. } => unreachable!("handled above"),
            }
        }
        (Instance::General(g), AlgSpec::General { eps, delta }) => {
            let sol = solve_lp_general(g)?;
            let scaled = rescale_general(g, &sol, *eps, *delta)?;
            Ok((Plan::general(g, &scaled)?, Sampler::Pivotal, sol.objective))
        }
        (Instance::General(_), _) => invalid(format!("algorithm {spec} needs a Bernoulli instance")),
    }
}

fn run_chunk(plan: &Plan, sampler: Sampler, seed: u64, lo: usize, hi: usize) -> ChunkResult {
    let n = plan.n;
    let horizon = plan.steps.len();
    let mut out = ChunkResult {
        weights: Vec::with_capacity(hi - lo),
        matched: vec![0; n * horizon],
        free: vec![0; n * (horizon + 1)],
    };
    let mut free = vec![true; n];
    for k in lo..hi {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        free.iter_mut().for_each(|f| *f = true);
        let mut weight = 0.0;
        let matched = &mut out.matched;
        let free_counts = &mut out.free;
        plan.run(
            &mut rng,
            sampler,
            &mut free,
            None,
            |i, t, w| {
                weight += w;
                matched[i * horizon + t] += 1;
            },
            |t, fr| {
                for (i, &f) in fr.iter().enumerate() {
                    if f {
                        free_counts[i * (horizon + 1) + t] += 1;
                    }
                }
            },
        );
        out.weights.push(weight);
    }
    out
}

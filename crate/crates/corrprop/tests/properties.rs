use corrprop::bounds::{exact_min1, fractional_bucketing_bound, g_theta, independent_coin_bound, WeightedBernoulliSystem};
use corrprop::certify::certify_grid_1d;
use corrprop::engine::{rescale, run_core, run_edge_weighted, Sampler};
use corrprop::instance::{gen_random, read_json, write_json, Instance, RandomSpec};
use corrprop::lp::{check_feasibility, lp_statistics, solve_lp};
use corrprop::oracle::opt_online;
use corrprop::pivotal::{ps_exact_distribution, ps_sample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec() -> impl Strategy<Value = RandomSpec> {
    (1usize..=5, 1usize..=5, 0.0f64..=1.0, any::<bool>(), any::<u64>()).prop_map(|(n, horizon, density, vw, seed)| {
        RandomSpec {
            n,
            horizon,
            density,
            weight_range: (0.0, 4.0),
            vertex_weighted: vw,
            seed,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(s in spec()) {
        let inst = Instance::Bernoulli(gen_random(&s).unwrap());
        prop_assert_eq!(read_json(&write_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn lp_is_feasible_near_binary_and_above_online_optimum(s in spec()) {
        let inst = gen_random(&s).unwrap();
        let sol = solve_lp(&inst).unwrap();
        prop_assert!(check_feasibility(&sol, &inst, 1e-7).is_feasible());
        prop_assert!(sol.fractional_count() <= inst.horizon());
        prop_assert!(sol.objective >= opt_online(&inst).unwrap().value - 1e-7);
    }

    #[test]
    fn statistics_identity(s in spec(), theta in 0.0f64..=1.0) {
        let inst = gen_random(&s).unwrap();
        let st = lp_statistics(&solve_lp(&inst).unwrap(), theta);
        prop_assert!((st.alpha + st.beta_le + st.beta_gt - st.s_le - st.s_gt).abs() < 1e-12);
        for v in [st.alpha, st.beta_le, st.beta_gt, st.s_le, st.s_gt] {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn rescaled_rates_stay_in_unit_interval(s in spec(), eps in 0.0f64..=1.0, delta in 0.0f64..=1.0) {
        let inst = gen_random(&s).unwrap();
        let sol = solve_lp(&inst).unwrap();
        let r = rescale(&inst, &sol, eps, delta).unwrap();
        for i in 0..inst.n {
            for t in 0..inst.horizon() {
                prop_assert!(r.scaled.r(i, t) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn runs_are_matchings(s in spec(), seed in any::<u64>()) {
        let inst = gen_random(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = run_edge_weighted(&inst, &mut rng).unwrap();
        let mut seen_i = vec![false; inst.n];
        let mut seen_t = vec![false; inst.horizon()];
        let mut w = 0.0;
        for &(i, t) in &res.matching {
            prop_assert!(!seen_i[i] && !seen_t[t]);
            seen_i[i] = true;
            seen_t[t] = true;
            w += inst.edge_weight(i, t).unwrap();
        }
        prop_assert!((w - res.weight).abs() < 1e-12);
    }

    #[test]
    fn vertex_weighted_runs_match_the_heaviest_proposer(s in spec(), seed in any::<u64>()) {
        let mut s = s;
        s.vertex_weighted = true;
        let inst = gen_random(&s).unwrap();
        let sol = solve_lp(&inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = run_core(&inst, &sol, &mut rng, Sampler::Pivotal).unwrap();
        for step in &res.steps {
            let top = step.chosen.unwrap();
            let wt = inst.edge_weight(top, step.t).unwrap();
            for &i in &step.proposers {
                prop_assert!(inst.edge_weight(i, step.t).unwrap() <= wt);
            }
        }
    }

    #[test]
    fn pivotal_cardinality_and_support(v in prop::collection::vec(0.0f64..=1.0, 1..8), seed in any::<u64>()) {
        let sum: f64 = v.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exact = ps_exact_distribution(&v).unwrap();
        for _ in 0..50 {
            let out = ps_sample(&v, &mut rng);
            let k = out.len() as f64;
            prop_assert!(k >= (sum - 1e-9).floor() && k <= (sum + 1e-9).ceil());
            let mask = out.iter().fold(0u64, |m, &i| m | 1 << i);
            prop_assert!(exact.support.iter().any(|&(s, _)| s == mask));
        }
        for (m, vi) in exact.marginals().iter().zip(&v) {
            prop_assert!((m - vi).abs() < 1e-12);
        }
    }

    #[test]
    fn g_is_non_increasing(theta in 0.0f64..0.999, a in 0.0f64..5.0, d in 0.0f64..1.0) {
        prop_assert!(g_theta(theta, a + d).unwrap() <= g_theta(theta, a).unwrap() + 1e-12);
    }

    #[test]
    fn product_bounds_below_exact(
        cq in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..10),
        theta in 0.0f64..0.99,
    ) {
        let (c, q): (Vec<f64>, Vec<f64>) = cq.into_iter().unzip();
        let sys = WeightedBernoulliSystem::independent(c, q).unwrap();
        let exact = exact_min1(&sys).unwrap();
        prop_assert!(independent_coin_bound(&sys) <= exact + 1e-12);
        prop_assert!(fractional_bucketing_bound(&sys, theta).unwrap() <= exact + 1e-12);
    }

    #[test]
    fn certificates_are_self_consistent(h in 1e-3f64..0.2, l in 0.0f64..5.0, tau in -1.0f64..1.0) {
        let r = certify_grid_1d(|z| (3.0 * z).sin(), 0.0, 1.0, h, l, tau).unwrap();
        prop_assert!(r.is_consistent());
        prop_assert!(r.pass == (r.grid_min >= tau + l * h));
    }
}

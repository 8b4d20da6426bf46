use dgreedy_core::dihat::{run_dihat, run_dihat_observed, DihatConfig, DihatVariant};
use dgreedy_core::network::{build_metropolis, verify_consensus_conditions, CombinationMatrix, Topology};
use dgreedy_core::scenario::{derived_rng, gen_batch_data, GroundTruth, NodeBatch, Role};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    n: usize,
    m: usize,
    l: usize,
    s: usize,
    snr_db: f64,
    graph: usize,
    variant: DihatVariant,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..=5, 4usize..=12)
        .prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                2..=m,
                1..=3usize.min(m / 2),
                prop_oneof![Just(f64::INFINITY), 0.0f64..30.0],
                0usize..3,
                prop_oneof![Just(DihatVariant::Full), Just(DihatVariant::EstimateOnly), Just(DihatVariant::NonCooperative)],
                any::<u64>(),
            )
        })
        .prop_map(|(n, m, l, s, snr_db, graph, variant, seed)| Case { n, m, l, s, snr_db, graph, variant, seed })
}

fn setup(c: &Case) -> (GroundTruth<f64>, Vec<NodeBatch<f64>>, CombinationMatrix<f64>, DihatConfig) {
    let truth = GroundTruth::generate(c.m, c.s, &mut derived_rng(c.seed, Role::Truth, &[])).unwrap();
    let data = gen_batch_data(&truth, c.n, c.l, c.snr_db, c.seed).unwrap();
    let topology = match c.graph {
        0 => Topology::path(c.n),
        1 => Topology::ring(c.n),
        _ => Topology::complete(c.n),
    }
    .unwrap();
    let mut cfg = DihatConfig::new(c.s);
    cfg.variant = c.variant;
    cfg.max_iters = 6;
    cfg.rel_change_tol = 0.0;
    (truth, data, build_metropolis(&topology), cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn estimates_are_sparse_and_pruning_at_most_doubles_the_error(c in case()) {
        let (truth, data, w, cfg) = setup(&c);
        let mut checked = 0;
        let mut failure = None;
        run_dihat_observed(&data, &truth, &w, &w, &cfg, |iter, states, info| {
            for (st, fused) in states.iter().zip(&info.fused) {
                let pruned_err = st.h.dist_sq(&truth.h_star).sqrt();
                let fused_err = fused.dist_sq(&truth.h_star).sqrt();
                if st.h.nnz() > c.s || !st.h.is_finite() || pruned_err > 2.0 * fused_err * (1.0 + 1e-12) + 1e-12 {
                    failure.get_or_insert((iter, st.h.nnz(), pruned_err, fused_err));
                }
                checked += 1;
            }
        })
        .unwrap();
        prop_assert!(failure.is_none(), "{:?}", failure);
        prop_assert_eq!(checked, c.n * cfg.max_iters);
    }

    #[test]
    fn averaged_measurements_reach_the_network_mean(c in case().prop_filter("mixing needs a network", |c| c.n > 1)) {
        let (truth, data, w, mut cfg) = setup(&c);
        cfg.variant = DihatVariant::Full;
        let lambda = verify_consensus_conditions(w.matrix()).spectral_value;
        let l = c.l;
        let mean: Vec<f64> = (0..l).map(|i| data.iter().map(|b| b.y[i]).sum::<f64>() / c.n as f64).collect();
        let deviation = |ys: &mut dyn Iterator<Item = Vec<f64>>| {
            ys.map(|y| y.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum::<f64>().sqrt()
        };
        let d0 = deviation(&mut data.iter().map(|b| b.y.as_slice().to_vec()));
        let mut worst: f64 = 0.0;
        run_dihat_observed(&data, &truth, &w, &w, &cfg, |iter, states, _| {
            let d = deviation(&mut states.iter().map(|s| s.y_bar.as_slice().to_vec()));
            let bound = lambda.powi(iter as i32) * d0 * (1.0 + 1e-9) + 1e-12 * (1.0 + d0);
            worst = worst.max(d - bound);
        })
        .unwrap();
        prop_assert!(worst <= 0.0, "exceeded bound by {}", worst);
    }

    #[test]
    fn runs_are_bit_identical(c in case()) {
        let (truth, data, w, cfg) = setup(&c);
        let a = run_dihat(&data, &truth, &w, &w, &cfg).unwrap();
        let b = run_dihat(&data, &truth, &w, &w, &cfg).unwrap();
        let bits = |r: &dgreedy_core::dihat::DihatRun<f64>| r.msd().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a.estimates, b.estimates);
    }
}

#[test]
fn reference_scenario_reaches_one_percent_within_fifty_iterations() {
    let seed = 7;
    let n = 20;
    let topology = Topology::random_geometric(n, (2.0 * (n as f64).ln() / n as f64).sqrt(), &mut derived_rng(seed, Role::Topology, &[])).unwrap();
    let w = build_metropolis::<f64>(&topology);
    let truth = GroundTruth::generate(70, 10, &mut derived_rng(seed, Role::Truth, &[])).unwrap();
    let data = gen_batch_data(&truth, n, 55, 20.0, seed).unwrap();
    let mut cfg = DihatConfig::new(10);
    cfg.max_iters = 50;
    cfg.rel_change_tol = 0.0;
    let msd = run_dihat(&data, &truth, &w, &w, &cfg).unwrap().msd();
    let reached = msd.iter().position(|&x| x < 1e-2).expect("MSD never fell below 1e-2");
    assert!(reached <= 50);
    assert!(msd[reached..].iter().all(|&x| x < 1e-2), "{msd:?}");
}

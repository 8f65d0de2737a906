use consensus_core::gains::{design_t4_static_a, design_t5_switched_b, verify_certificate};
use consensus_core::{
    detect_settling, simulate, DisturbanceModel, RhoParams, SimOptions, SwitchedNetwork, WeightedGraph,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rho() -> RhoParams {
    RhoParams::new(1.0, 2.0, 1.5, 3.0, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn designed_gains_pass_their_own_check(
        seed in any::<u64>(),
        n in 3usize..12,
        t_c in 0.2f64..5.0,
        l in 0.0f64..4.0,
        margin in 1.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs: Vec<_> = (0..3).map(|_| WeightedGraph::random_connected(n, 0.2, &mut rng).unwrap()).collect();
        let t4 = design_t4_static_a(&graphs[0], rho(), t_c, l, margin).unwrap();
        prop_assert!(verify_certificate(&t4, &graphs[..1]).passed);
        let t5 = design_t5_switched_b(&graphs, rho(), t_c, l, margin).unwrap();
        prop_assert!(verify_certificate(&t5, &graphs).passed);
    }

    #[test]
    fn shorter_deadlines_need_larger_gains(seed in any::<u64>(), t_c in 0.2f64..5.0) {
        let g = WeightedGraph::random_connected(6, 0.3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let slow = design_t4_static_a(&g, rho(), t_c, 0.0, 1.0).unwrap();
        let fast = design_t4_static_a(&g, rho(), t_c / 2.0, 0.0, 1.0).unwrap();
        prop_assert!(fast.gains.min_gain() > slow.gains.min_gain());
    }
}

#[test]
fn designed_switched_gains_meet_the_deadline() {
    let n = 8;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs: Vec<_> = (0..3).map(|_| WeightedGraph::random_connected(n, 0.2, &mut rng).unwrap()).collect();
        let dist = DisturbanceModel::benchmark(n);
        let l = dist.bounds(n).unwrap().iter().map(|b| b * b).sum::<f64>().sqrt();
        let cert = design_t5_switched_b(&graphs, rho(), 0.5, l, 1.0).unwrap();
        let net = SwitchedNetwork::random_schedule(graphs, 0.1, 1.0, &mut rng).unwrap();
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 - 3.5) * 2.0).collect();
        let opts = SimOptions { h: 1e-5, t_end: 1.0, record_every: 10, record_controls: false };
        let tr = simulate(&net, &x0, &cert.gains, &dist, &opts).unwrap();
        let s = detect_settling(&tr, 1e-3, Some(0.5));
        assert_eq!(s.bound_satisfied, Some(true), "seed {seed}: {s:?}");
    }
}

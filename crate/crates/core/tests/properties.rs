use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stripe_inp::eval::{cutset_bound, fronthaul_rate, sum_rate_lb};
use stripe_inp::hybrid::{fit_digital, project_analog, random_analog};
use stripe_inp::inp::{
    eigenmode_objective, fronthaul_budget, observations, run_network, solve_quantizer,
    stationarity_residual,
};
use stripe_inp::linalg::{c, frobenius, hermitian_eigen, log2_det_hpd, CMatrix};
use stripe_inp::{HybridMode, Scenario, Scheme, SystemConfig};

fn gammas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..50.0f64, 1e-3..1e3f64], 1..7)
}

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        CMatrix::from_iterator(rows, cols, v.into_iter().map(|(re, im)| c(re, im)))
    })
}

proptest! {
    #[test]
    fn allocation_spends_the_whole_budget(g in gammas(), c_f in 0.1..40.0f64) {
        let s = solve_quantizer(&g, c_f).unwrap();
        prop_assert!((fronthaul_budget(&g, &s.a) - c_f).abs() < 1e-9);
        prop_assert!(s.a.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn allocation_beats_random_feasible_points(
        g in gammas(),
        c_f in 0.1..20.0f64,
        weights in prop::collection::vec(0.0..1.0f64, 7),
    ) {
        let s = solve_quantizer(&g, c_f).unwrap();
        let best = eigenmode_objective(&g, &s.a);
        // Spread the budget by random weights; each mode carrying b bits has
        // a = (2^b - 1) / (g + 1).
        let w = &weights[..g.len()];
        let total: f64 = w.iter().sum::<f64>().max(1e-12);
        let a: Vec<f64> = g.iter().zip(w).map(|(gk, wk)| ((c_f * wk / total).exp2() - 1.0) / (gk + 1.0)).collect();
        prop_assert!(eigenmode_objective(&g, &a) <= best + 1e-9);
    }

    #[test]
    fn objective_grows_with_the_budget(g in gammas(), c_f in 0.1..20.0f64, extra in 0.0..5.0f64) {
        let lo = solve_quantizer(&g, c_f).unwrap();
        let hi = solve_quantizer(&g, c_f + extra).unwrap();
        prop_assert!(eigenmode_objective(&g, &hi.a) >= eigenmode_objective(&g, &lo.a) - 1e-12);
    }

    #[test]
    fn kkt_conditions_hold(g in gammas(), c_f in 0.1..30.0f64) {
        let s = solve_quantizer(&g, c_f).unwrap();
        if s.lambda > 0.0 {
            for (&gk, &ak) in g.iter().zip(&s.a) {
                if ak > 0.0 {
                    prop_assert!(stationarity_residual(gk, ak, s.lambda).abs() < 1e-8);
                } else {
                    // Raising an inactive a_k from zero must not pay off.
                    prop_assert!(gk / (gk + 1.0) <= s.lambda * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn least_squares_digital_stage_is_optimal(
        u in complex_matrix(8, 3),
        x in complex_matrix(3, 3),
        seed in any::<u64>(),
    ) {
        let a = random_analog(8, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let d = fit_digital(&u, &a).unwrap();
        let fitted = frobenius(&(&u - &a * &d));
        prop_assert!(fitted <= frobenius(&(&u - &a * x)) + 1e-12);
        let orth = frobenius(&(a.adjoint() * (&u - &a * &d)));
        prop_assert!(orth < 1e-8);
    }

    #[test]
    fn analog_projection_has_unit_modulus(u in complex_matrix(6, 2)) {
        let a = project_analog(&u);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        prop_assert!(frobenius(&(project_analog(&a) - &a)) < 1e-12);
    }

    #[test]
    fn log_det_is_the_sum_of_log_eigenvalues(m in complex_matrix(4, 4)) {
        let a = &m * m.adjoint() + CMatrix::identity(4, 4) * c(0.5, 0.0);
        let (values, _) = hermitian_eigen(&a).unwrap();
        let want: f64 = values.iter().map(|v| v.log2()).sum();
        prop_assert!((log2_det_hpd(&a).unwrap() - want).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_respects_budget_and_cutset(
        seed in any::<u64>(),
        stripes in 1usize..3,
        aps in 1usize..4,
        antennas in 1usize..6,
        ues in 1usize..5,
        c_f in 0.5..24.0f64,
    ) {
        let cfg = SystemConfig::desk(stripes, aps, antennas, ues, c_f);
        let sc = Scenario::generate(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let obs = observations(&sc);
        let cutset = cutset_bound(&obs, &sc.sigma_x, c_f).unwrap();
        for scheme in Scheme::ALL {
            let net = run_network(&obs, &sc.sigma_x, c_f, scheme, HybridMode::Off, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let rate = sum_rate_lb(&net.final_side_infos(), &sc.sigma_x).unwrap();
            prop_assert!(rate >= -1e-12);
            prop_assert!(rate <= cutset + 1e-6, "{scheme}: {rate} > {cutset}");
            for ap in net.stripes.iter().flat_map(|s| &s.aps) {
                let si = &ap.side_info_out;
                let fh = fronthaul_rate(&si.g_hat, &si.sigma_e, &sc.sigma_x, &ap.omega).unwrap();
                prop_assert!(fh <= c_f + 1e-6, "{scheme}: {fh}");
                if scheme.compression == stripe_inp::inp::Compression::Optimized {
                    prop_assert!((fh - c_f).abs() < 1e-6, "{scheme}: {fh}");
                }
            }
        }
    }
}

use nalgebra::DMatrix;
use proptest::prelude::*;
use relaycap::cutset::{cutset, direct_rate, objective};
use relaycap::gauss_info::{aref_min_cut, mutual_information, CorrelationState};
use relaycap::report::{parse_json, rate_summary, to_json, RateSummary};
use relaycap::strategies::{af_rate, mrc_rate, AfGains};
use relaycap::{Geometry, NetworkConfig, Point};

fn gain() -> impl Strategy<Value = f64> {
    (-4.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

fn power() -> impl Strategy<Value = f64> {
    1e-3f64..1.0
}

fn network(max_relays: usize) -> impl Strategy<Value = NetworkConfig> {
    (0..=max_relays).prop_flat_map(|r| {
        (
            power(),
            prop::collection::vec(power(), r),
            gain(),
            prop::collection::vec(gain(), r),
            prop::collection::vec(gain(), r),
        )
            .prop_map(|(ps, pr, gsd, gsr, grd)| NetworkConfig::new(ps, pr, 1e-6, gsd, gsr, grd).unwrap())
    })
}

/// Positive definite `n x n` matrix.
fn covariance(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let f = DMatrix::from_vec(n, n, v);
        &f * f.transpose() + DMatrix::identity(n, n) * 0.1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mutual_information_is_symmetric_and_non_negative(cov in covariance(5)) {
        let ab = mutual_information(&cov, &[0], &[1, 2], &[3]).unwrap();
        let ba = mutual_information(&cov, &[1, 2], &[0], &[3]).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-10 * ab.max(1.0));
    }

    #[test]
    fn mutual_information_chain_rule(cov in covariance(5)) {
        let joint = mutual_information(&cov, &[0], &[1, 2], &[4]).unwrap();
        let first = mutual_information(&cov, &[0], &[1], &[4]).unwrap();
        let second = mutual_information(&cov, &[0], &[2], &[1, 4]).unwrap();
        prop_assert!((joint - first - second).abs() <= 1e-9 * joint.max(1.0));
        // Observing more cannot reduce information.
        prop_assert!(joint >= first - 1e-12);
    }

    #[test]
    fn oracle_matches_closed_form(cfg in network(4), rho in 0.0f64..=1.0) {
        let corr = CorrelationState::fully_correlated(cfg.relay_count(), rho).unwrap();
        let (oracle, _) = aref_min_cut(&cfg, &corr).unwrap();
        prop_assert!((oracle - objective(&cfg, rho)).abs() <= 1e-6);
    }

    #[test]
    fn bound_dominates_its_objective_and_direct(cfg in network(5), rho in 0.0f64..=1.0) {
        let bound = cutset(&cfg);
        prop_assert!(bound.rate >= objective(&cfg, rho) - 1e-12);
        prop_assert!(bound.rate >= direct_rate(&cfg) - 1e-12);
        prop_assert!((0.0..=1.0).contains(&bound.rho_star));
    }

    #[test]
    fn rates_are_scale_invariant(cfg in network(4), factor in 0.1f64..10.0) {
        let scaled = cfg.scaled(factor);
        let af = af_rate(&cfg, &AfGains::maximal(&cfg)).unwrap();
        let af_scaled = af_rate(&scaled, &AfGains::maximal(&scaled)).unwrap();
        prop_assert!((af - af_scaled).abs() <= 1e-12 * af.max(1.0));
        prop_assert!((cutset(&cfg).rate - cutset(&scaled).rate).abs() <= 1e-9);
        prop_assert!((mrc_rate(&cfg) - mrc_rate(&scaled)).abs() <= 1e-12 * mrc_rate(&cfg).max(1.0));
    }

    #[test]
    fn af_improves_with_direct_gain(cfg in network(3), extra in 0.0f64..5.0) {
        let mut better = cfg.clone();
        better.gain_sd += extra;
        let gains = AfGains::maximal(&cfg);
        prop_assert!(af_rate(&better, &gains).unwrap() >= af_rate(&cfg, &gains).unwrap());
    }

    #[test]
    fn single_relay_gain_peaks_at_interior_optimum(cfg in network(1), fraction in 0.0f64..=1.0) {
        prop_assume!(cfg.relay_count() == 1);
        // The SNR (a + b c)^2 / (1 + b^2 d) rises for b below c / (d a) and
        // falls above it, with a = sqrt(g_sd), c = sqrt(g_sr g_rd), d = g_rd.
        let peak = (cfg.gains_sr[0] / (cfg.gains_rd[0] * cfg.gain_sd)).sqrt();
        let max = AfGains::maximal(&cfg);
        let at_max = af_rate(&cfg, &max).unwrap();
        let reduced = af_rate(&cfg, &AfGains::fraction_of_maximal(&cfg, fraction)).unwrap();
        if max.beta[0] <= peak {
            prop_assert!(reduced <= at_max + 1e-12);
        } else {
            let best = af_rate(&cfg, &AfGains::new(vec![peak])).unwrap();
            prop_assert!(best >= at_max - 1e-12);
            prop_assert!(best >= reduced - 1e-12);
        }
    }

    #[test]
    fn mrc_never_below_direct(cfg in network(5)) {
        prop_assert!(mrc_rate(&cfg) >= direct_rate(&cfg));
    }

    #[test]
    fn summary_json_round_trips(cfg in network(3)) {
        let summary = rate_summary(&cfg).unwrap();
        let back: RateSummary = parse_json(&to_json(&summary)).unwrap();
        prop_assert_eq!(back, summary);
    }

    #[test]
    fn geometry_gains_are_reciprocal(x in -5.0f64..5.0, y in -5.0f64..5.0, d in 0.5f64..10.0) {
        let forward = Geometry::new(Point(0.0, 0.0), Point(d, 0.0), vec![Point(x, y)])
            .to_config(1.0, vec![1.0], 1.0).unwrap();
        let backward = Geometry::new(Point(d, 0.0), Point(0.0, 0.0), vec![Point(x, y)])
            .to_config(1.0, vec![1.0], 1.0).unwrap();
        prop_assert_eq!(forward.gain_sd, backward.gain_sd);
        prop_assert_eq!(forward.gains_sr[0], backward.gains_rd[0]);
    }
}

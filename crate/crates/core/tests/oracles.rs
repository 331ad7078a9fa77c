//! Comparisons against values and procedures independent of the library's
//! own numerics: 40-digit reference values, direct log-determinants, and
//! brute-force maximization of the all-cuts oracle.

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use relaycap::cutset::{cutset, direct_rate, objective, parallel_channels_rate, BindingCut};
use relaycap::gauss_info::{aref_min_cut, mutual_information, CorrelationState};
use relaycap::strategies::{af_rate, mrc_rate, AfGains};
use relaycap::verify::{random_config, trial_rng};
use relaycap::NetworkConfig;

fn asymmetric(gains_sr: Vec<f64>) -> NetworkConfig {
    NetworkConfig::new(1.0, vec![0.5, 2.0], 0.1, 0.3, gains_sr, vec![0.4, 1.5]).unwrap()
}

// Reference values computed with 40-digit arithmetic.
#[test]
fn broadcast_limited_reference() {
    let cfg = asymmetric(vec![2.0, 0.7]);
    let r = cutset(&cfg);
    assert_eq!(r.rho_star, 0.0);
    assert_eq!(r.binding_cut, BindingCut::Broadcast { relays: vec![1] });
    assert_abs_diff_eq!(r.rate, 1.7297158093186486, epsilon = 1e-13);
    let af = af_rate(&cfg, &AfGains::maximal(&cfg)).unwrap();
    assert_abs_diff_eq!(af, 1.9533730188801597, epsilon = 1e-13);
    assert_abs_diff_eq!(mrc_rate(&cfg), 1.7613955810430902, epsilon = 1e-13);
    assert_abs_diff_eq!(parallel_channels_rate(&cfg), 2.584_962_500_721_156, epsilon = 1e-13);
    assert_abs_diff_eq!(direct_rate(&cfg), 1.0, epsilon = 1e-15);
}

#[test]
fn interior_crossing_reference() {
    let cfg = asymmetric(vec![20.0, 9.0]);
    let r = cutset(&cfg);
    assert_abs_diff_eq!(r.rho_star, 0.559_801_468_598_945_1, epsilon = 1e-12);
    assert_abs_diff_eq!(r.rate, 3.0095826853084926, epsilon = 1e-12);
    assert!(matches!(r.binding_cut, BindingCut::Tie { .. }));
    let af = af_rate(&cfg, &AfGains::maximal(&cfg)).unwrap();
    assert_abs_diff_eq!(af, 2.904_689_822_601_293, epsilon = 1e-13);
    assert_abs_diff_eq!(mrc_rate(&cfg), 2.415_943_636_066_222, epsilon = 1e-13);
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let l = m.clone().cholesky().expect("positive definite").l();
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn sub(cov: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])])
}

/// `I(A;B|C) = 1/2 log2( det S_AC det S_BC / (det S_C det S_ABC) )`.
fn mi_by_determinants(cov: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let join = |x: &[usize], y: &[usize]| -> Vec<usize> { x.iter().chain(y).copied().collect() };
    let ac = join(a, c);
    let bc = join(b, c);
    let abc = join(&join(a, b), c);
    (log_det(&sub(cov, &ac)) + log_det(&sub(cov, &bc)) - log_det(&sub(cov, c)) - log_det(&sub(cov, &abc)))
        / (2.0 * std::f64::consts::LN_2)
}

#[test]
fn mutual_information_matches_determinants() {
    use rand::Rng;
    let mut rng = trial_rng(77, 0);
    for trial in 0..200 {
        let n = 3 + trial % 6;
        let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let cov = &f * f.transpose() + DMatrix::identity(n, n) * 0.05;
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let na = 1 + trial % 2;
        let nb = 1 + (trial / 2) % 2;
        let (a, rest) = idx.split_at(na);
        let (b, c) = rest.split_at(nb);
        let got = mutual_information(&cov, a, b, c).unwrap();
        let want = mi_by_determinants(&cov, a, b, c);
        assert_abs_diff_eq!(got, want, epsilon = 1e-9 * want.max(1.0));
    }
}

#[test]
fn closed_form_matches_oracle_supremum() {
    // Maximize the all-cuts oracle over a fine correlation grid and compare
    // with the closed-form optimum.
    for t in 0..12 {
        let cfg = random_config(&mut trial_rng(31, t), 1 + t % 3);
        let bound = cutset(&cfg);
        let best = (0..=2000)
            .map(|i| i as f64 / 2000.0)
            .map(|rho| {
                let corr = CorrelationState::fully_correlated(cfg.relay_count(), rho).unwrap();
                aref_min_cut(&cfg, &corr).unwrap().0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= bound.rate + 1e-6, "grid {best} above bound {}", bound.rate);
        let corr = CorrelationState::fully_correlated(cfg.relay_count(), bound.rho_star).unwrap();
        let at_star = aref_min_cut(&cfg, &corr).unwrap().0;
        assert_abs_diff_eq!(at_star, bound.rate, epsilon = 1e-6);
    }
}

#[test]
fn bisection_matches_dense_grid() {
    for t in 0..200 {
        let cfg = random_config(&mut trial_rng(32, t), 1 + t % 5);
        let bound = cutset(&cfg);
        let grid_max = (0..=100_000)
            .map(|i| objective(&cfg, i as f64 / 100_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(bound.rate >= grid_max - 1e-12);
        assert_abs_diff_eq!(bound.rate, objective(&cfg, bound.rho_star), epsilon = 0.0);
    }
}

//! Closed forms checked against independent numerical evaluations.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sure_edf::bounds::{
    best_subset_constant, best_subset_objective, chi_sq_max_bound, edf_upper_bound_simplified,
    nested_null_edf_bound, nested_null_term, nested_null_tail_certificate, optimal_delta,
};
use sure_edf::family::{EstimatorFamily, Tuning};
use sure_edf::montecarlo::{mc_df_paired, mc_edf, mc_risk, oracle_tuning, MonteCarlo};
use sure_edf::shrinkage::{positive_part_shrink, ShrinkMeans};
use sure_edf::soft_threshold::{scan_jump_signs, tune_soft_threshold};
use sure_edf::subset::{two_model_edf, two_model_edf_max, CpFamily, SubsetCollection};
use sure_edf::GaussianModel;

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let inner: f64 = (1..steps).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// `E[(m+Z)Z 1{(m+Z)² > 2}] − P((m+Z)² > 2)` by Simpson's rule on the two
/// selection intervals.
fn two_model_edf_quadrature(m: f64) -> f64 {
    let g = |z: f64| phi(z) * ((m + z) * z - 1.0);
    let cut = 2f64.sqrt();
    simpson(g, cut - m, 14.0, 200_000) + simpson(g, -14.0, -cut - m, 200_000)
}

#[test]
fn two_model_closed_form_matches_quadrature() {
    for m in [0.0, 0.5, 1.0, 1.7, 3.0, 5.0] {
        assert!((two_model_edf(m) - two_model_edf_quadrature(m)).abs() < 1e-9, "m = {m}");
    }
    let (_, peak) = two_model_edf_max();
    assert!((peak - 0.575).abs() < 5e-4);
    assert!((two_model_edf(0.0) - 0.415).abs() < 5e-4);
}

#[test]
fn nested_null_term_from_chi_square_cdf() {
    // √(2d)(1+1/d) · d/dr P(χ_d ≤ r) at r = √(2d), derivative by central differences
    for d in 1..=30usize {
        let chi = ChiSquared::new(d as f64).unwrap();
        let r = (2.0 * d as f64).sqrt();
        let h = 1e-5;
        let dens = (chi.cdf((r + h).powi(2)) - chi.cdf((r - h).powi(2))) / (2.0 * h);
        let direct = r * (1.0 + 1.0 / d as f64) * dens;
        assert!((nested_null_term(d) - direct).abs() < 1e-7, "d = {d}");
    }
}

#[test]
fn tail_certificate_against_long_sums() {
    let cert = nested_null_tail_certificate(1000);
    let q = (2.0 / std::f64::consts::E).sqrt();
    let c = 1.0 / std::f64::consts::PI.sqrt();
    let first: f64 = (1..20_000).map(|d| c * (d as f64).sqrt() * q.powi(d)).sum();
    let second: f64 = (1..20_000).map(|d| c * q.powi(d) / (d as f64).sqrt()).sum();
    assert!(cert.first_total() >= first - 1e-9 && cert.first_total() < 8.21);
    assert!(cert.second_total() >= second - 1e-9 && cert.second_total() < 1.75);
    assert!(nested_null_edf_bound(5000).unwrap() < first + second);
}

#[test]
fn best_subset_constant_against_grid() {
    let grid_min = (1..100_000)
        .map(|k| best_subset_objective(k as f64 / 100_000.0))
        .fold(f64::INFINITY, f64::min);
    let c = best_subset_constant();
    assert!(c.value <= grid_min + 1e-9);
    assert!(grid_min - c.value < 1e-6);
    assert!((2.28..=2.30).contains(&c.value));
    assert!(c.half_value < 1.145);
}

#[test]
fn optimal_delta_against_grid() {
    for (card, p_max) in [(10usize, 3usize), (1000, 20), (2, 50)] {
        let (_, best) = optimal_delta(card, p_max).unwrap();
        let sizes = vec![p_max; card];
        let grid_min = (1..10_000)
            .map(|k| edf_upper_bound_simplified(&sizes, k as f64 / 10_000.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(best <= grid_min + 1e-9 && grid_min - best < 1e-3 * (1.0 + best));
    }
}

#[test]
fn soft_threshold_worked_examples() {
    let fit = tune_soft_threshold(&DVector::from_vec(vec![3.0]), 1.0).unwrap();
    assert_eq!(fit.s_hat, Tuning::Value(0.0));
    assert_eq!(fit.theta_hat[0], 3.0);
    let fit = tune_soft_threshold(&DVector::from_vec(vec![0.5]), 1.0).unwrap();
    assert_eq!(fit.s_hat, Tuning::Value(0.5));
    assert_eq!(fit.theta_hat[0], 0.0);
    // one coordinate: SURE(0) = 2σ² against SURE(|t|) = t², so the jump sits at √2 σ
    let sigma = 1.3;
    let grid: Vec<f64> = (0..=30_000).map(|k| 3.0 * sigma * k as f64 / 30_000.0).collect();
    let jumps = scan_jump_signs(&DVector::from_vec(vec![0.0]), 0, &grid, sigma).unwrap();
    assert_eq!(jumps.len(), 1);
    assert!((jumps[0].location - 2f64.sqrt() * sigma).abs() < 2e-4);
    assert!((jumps[0].size - 2f64.sqrt() * sigma).abs() < 2e-3);
}

#[test]
fn shrinkage_oracle_risk_against_monte_carlo() {
    let n = 12;
    let theta0 = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin() * 2.0);
    let model = GaussianModel::homoskedastic(theta0, 1.0).unwrap();
    let fam = ShrinkMeans::new(n, 1.0).unwrap();
    let oracle = oracle_tuning(&fam, &model).unwrap();
    let s0 = oracle.s0;
    let risk = mc_risk(|y| fam.estimate(s0, y).unwrap(), &model, MonteCarlo::new(20_000, 9)).unwrap();
    assert!(risk.agrees_with_value(oracle.risk, 4.0), "{risk:?} vs {}", oracle.risk);
    // the tuned rule is within 4σ² of the oracle
    let tuned = mc_risk(|y| positive_part_shrink(y, 1.0), &model, MonteCarlo::new(20_000, 10)).unwrap();
    assert!(tuned.mean <= oracle.risk + 4.0 + 4.0 * tuned.std_error);
}

#[test]
fn cov_term_splits_into_projection_and_mean_parts() {
    // per draw: θ̂ᵀZ = ‖P_ŝ Z‖² + θ₀ᵀ P_ŝ Z, so the projection form of the excess df
    // is exact only when θ₀ = 0
    let x = DMatrix::from_fn(15, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let coll = SubsetCollection::full_chain(x.clone()).unwrap();
    let fam = CpFamily::new(coll.clone(), 1.0).unwrap();
    let theta0 = &x * DVector::from_vec(vec![0.3, -0.2, 0.0, 0.1]);
    let mut rng = sure_edf::exec::stream(3, &[], 0);
    let model = GaussianModel::homoskedastic(theta0.clone(), 1.0).unwrap();
    for _ in 0..50 {
        let y = model.draw(&mut rng);
        let z = &y - &theta0;
        let fit = fam.minimize_sure(&y).unwrap();
        let Tuning::Label(idx) = fit.s_hat else { panic!() };
        let pz = coll.projector(idx).apply(&z);
        let lhs = fit.theta_hat.dot(&z);
        assert!((lhs - (pz.norm_squared() + theta0.dot(&pz))).abs() < 1e-9);
    }
}

#[test]
fn chi_square_bound_dominates_null_edf() {
    let x = DMatrix::from_fn(20, 6, |i, j| (((i + 1) * (j + 2)) as f64).sin());
    for coll in [SubsetCollection::full_chain(x.clone()).unwrap(), SubsetCollection::all_subsets(x.clone()).unwrap()] {
        let sizes = coll.sizes();
        let fam = CpFamily::new(coll, 1.0).unwrap();
        let model = GaussianModel::homoskedastic(DVector::zeros(20), 1.0).unwrap();
        let edf = mc_edf(&fam, &model, MonteCarlo::new(3000, 11)).unwrap();
        for delta in [0.3, 0.5, 0.7, 0.9] {
            assert!(edf.value <= chi_sq_max_bound(&sizes, delta).unwrap());
        }
        assert!(edf.value >= -4.0 * edf.std_error);
    }
}

#[test]
fn best_subset_df_brackets() {
    let p = 5;
    let solver = sure_edf::subset::BestSubset::new(DMatrix::identity(p, p), 2.0).unwrap();
    let model = GaussianModel::homoskedastic(DVector::from_vec(vec![3.0, 0.0, 1.0, 0.0, 0.0]), 1.0).unwrap();
    let paired = mc_df_paired(
        |y| {
            let f = solver.fit(y).unwrap();
            let size = f.subset.len() as f64;
            (f.fitted, size)
        },
        &model,
        MonteCarlo::new(4000, 12),
    )
    .unwrap();
    let ex = paired.excess;
    assert!(ex.mean >= -4.0 * ex.std_error && ex.mean <= 2.29 * p as f64 + 4.0 * ex.std_error);
}

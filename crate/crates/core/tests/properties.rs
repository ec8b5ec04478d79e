use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sure_edf::bounds::{
    chi_sq_max_bound, edf_upper_bound_simplified, gas_stations_rotation, gaussian_surface_area_origin,
    rotation_is_valid,
};
use sure_edf::family::{sure, EstimatorFamily, Tuning};
use sure_edf::linalg::Projector;
use sure_edf::shrinkage::{minimize_quadratic_sure, positive_part_shrink, tune_shrink_means};
use sure_edf::soft_threshold::{candidate_minimizer, SoftThreshold};
use sure_edf::subset::{best_subset_lagrangian, tune_cp, SubsetCollection};

fn vec_strategy(lo: usize, hi: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, lo..=hi).prop_map(DVector::from_vec)
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn soft_sure(y: &DVector<f64>, t: f64) -> f64 {
    y.iter().map(|v| (v * v).min(t * t) + if v.abs() > t { 2.0 } else { 0.0 }).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quadratic_minimizer_beats_grid(a in 0.01..10.0f64, b in 0.01..10.0f64) {
        let g = |s: f64| if s.is_infinite() { a } else { a * s * s / (1.0 + s).powi(2) + 2.0 * b / (1.0 + s) };
        let s_hat = minimize_quadratic_sure(a, b).unwrap().as_f64().unwrap();
        for k in 0..2000 {
            let s = (k as f64 / 100.0).exp() - 1.0;
            prop_assert!(g(s_hat) <= g(s) + 1e-12);
        }
    }

    #[test]
    fn tuned_shrinkage_is_positive_part(y in vec_strategy(1, 30, 4.0), sigma in 0.2..3.0f64) {
        let fit = tune_shrink_means(&y, sigma).unwrap();
        let pp = positive_part_shrink(&y, sigma);
        prop_assert!((fit.theta_hat - pp).amax() <= 1e-10 * (1.0 + y.amax()));
    }

    #[test]
    fn soft_candidate_is_global_minimum(y in vec_strategy(1, 15, 3.0), t in 0.0..4.0f64) {
        let (s_hat, value) = candidate_minimizer(&y, 1.0);
        prop_assert!((value - soft_sure(&y, s_hat)).abs() <= 1e-10 * (1.0 + value));
        prop_assert!(value <= soft_sure(&y, t) + 1e-12);
        let fam = SoftThreshold::new(y.len(), 1.0).unwrap();
        let via_family = sure(&fam, Tuning::Value(s_hat), &y).unwrap();
        prop_assert!((via_family - value).abs() <= 1e-10 * (1.0 + value));
    }

    // as |Yᵢ| grows the selection can only cross from thresholds ≥ |Yᵢ| to
    // thresholds < |Yᵢ|; a threshold that rises leaves coordinate i at zero
    #[test]
    fn soft_threshold_rises_only_above_the_coordinate(y in vec_strategy(3, 8, 3.0), i in 0usize..8) {
        let i = i % y.len();
        let mut yt = y.clone();
        let mut prev: Option<(f64, f64, Vec<f64>)> = None;
        for k in 0..=3000 {
            let t = 4.0 * k as f64 / 3000.0;
            yt[i] = t;
            let (s, _) = candidate_minimizer(&yt, 1.0);
            let mut sorted: Vec<f64> = yt.iter().map(|v| v.abs()).chain([0.0]).collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if let Some((t_prev, s_prev, prev_sorted)) = &prev {
                // the same ranks evaluated at the new point
                let continued: Vec<f64> = (0..prev_sorted.len())
                    .filter(|&r| prev_sorted[r] == *s_prev)
                    .map(|r| sorted[r])
                    .collect();
                let closest = continued.iter().map(|c| c - s).min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
                if closest < -1e-9 {
                    prop_assert!(*s_prev >= *t_prev && s >= t, "threshold rose across |Yᵢ| at t = {t}");
                }
            }
            prev = Some((t, s, sorted));
        }
    }

    #[test]
    fn projector_is_symmetric_idempotent(x in matrix_strategy(7, 3)) {
        let p = Projector::from_design(&x).to_matrix();
        prop_assert!((&p * &p - &p).amax() < 1e-10);
        prop_assert!((&p - p.transpose()).amax() < 1e-12);
    }

    #[test]
    fn cp_matches_brute_force(x in matrix_strategy(8, 4), y in vec_strategy(8, 8, 3.0), sigma in 0.3..2.0f64) {
        let coll = SubsetCollection::all_subsets(x.clone()).unwrap();
        let fit = tune_cp(&coll, &y, sigma).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let cols: Vec<usize> = (0..4).filter(|j| mask >> j & 1 == 1).collect();
            let xs = DMatrix::from_fn(8, cols.len(), |r, c| x[(r, cols[c])]);
            let proj = Projector::from_design(&xs);
            best = best.min((&y - proj.apply(&y)).norm_squared() + 2.0 * sigma * sigma * proj.rank() as f64);
        }
        prop_assert!((fit.sure_min - best).abs() <= 1e-9 * (1.0 + best));
        let bs = best_subset_lagrangian(&x, &y, 2.0 * sigma * sigma).unwrap();
        prop_assert!((bs.fitted - fit.theta_hat).amax() <= 1e-9);
    }

    #[test]
    fn tight_bound_below_simplified(sizes in prop::collection::vec(0usize..12, 1..20), delta in 0.01..0.99f64) {
        let tight = chi_sq_max_bound(&sizes, delta).unwrap();
        let simple = edf_upper_bound_simplified(&sizes, delta).unwrap();
        prop_assert!(tight <= simple + 1e-9);
    }

    #[test]
    fn gas_stations_unique(raw in prop::collection::vec(0.01..5.0f64, 1..10)) {
        let d = raw.len();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x * 2.0 * d as f64 / total).collect();
        let found = gas_stations_rotation(&w).unwrap();
        prop_assert!(rotation_is_valid(&w, found.start));
        let valid = (0..d).filter(|&k| rotation_is_valid(&w, k)).count();
        prop_assert_eq!(valid, found.multiplicity);
    }

    #[test]
    fn surface_area_at_most_one(d in 1usize..40, r in 0.01..12.0f64) {
        prop_assert!(gaussian_surface_area_origin(d, r).unwrap() <= 1.0);
    }

    #[test]
    fn naive_df_of_soft_threshold_is_strict_count(y in vec_strategy(1, 12, 3.0), k in 0usize..12) {
        let k = k % y.len();
        let fam = SoftThreshold::new(y.len(), 1.0).unwrap();
        let t = y[k].abs();
        let df = fam.naive_df(Tuning::Value(t), &y).unwrap();
        prop_assert_eq!(df as usize, y.iter().filter(|v| v.abs() > t).count());
    }
}

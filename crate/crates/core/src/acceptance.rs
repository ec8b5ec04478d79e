//! Desk-scale verification suite: fourteen gating checks, each run at fixed
//! seeds and reported as one pass/fail line.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::distribution::{ChiSquared, Continuous};

use crate::bootstrap::{bootstrap_estimates, BootstrapConfig, Sampler};
use crate::bounds::{
    best_subset_constant, chi_sq_max_bound, gas_stations_rotation, gaussian_surface_area_origin,
    nested_null_edf_bound, rotation_is_valid, simplified_constants, sphere_mc_surface_area, SPHERE_DIRECTIONS,
};
use crate::error::Result;
use crate::exec::{stream, Execution};
use crate::family::{EstimatorFamily, Pinned, Tuning};
use crate::linalg::Projector;
use crate::model::GaussianModel;
use crate::special::std_normal_pdf;
use crate::montecarlo::{mc_df_paired, mc_edf, mc_prediction_error, mc_risk, mc_tuned_records, McEstimate, MonteCarlo};
use crate::shrinkage::{
    james_stein_positive, positive_part_shrink, risk_bounds_shrink, tune_shrink_means,
    tune_shrink_regression, ShrinkMeans, ShrinkRegression,
};
use crate::sim::MeanSetting;
use crate::soft_threshold::{candidate_minimizer, df_lower_bound_check, scan_jump_signs, SoftThreshold};
use crate::stein::{
    edf_implicit_diff, exopt_hetero_shrink, ridge_as_hetero, HeteroShrink, ShrinkMeansHooks, ShrinkRegressionHooks,
};
use crate::subset::{edf_two_model_exact, two_model_direction, two_model_edf, BestSubset, CpFamily, SubsetCollection};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:02} {}: {}", self.id, self.name, self.detail)
    }
}

pub const NAMES: [&str; 14] = [
    "sure-unbiasedness",
    "shrinkage-edf",
    "shrinkage-dominance",
    "shrinkage-risk-bound",
    "two-model-edf",
    "nested-null-chains",
    "chi-square-max-bound",
    "soft-threshold",
    "implicit-differentiation",
    "ridge-rotation",
    "parametric-bootstrap",
    "gas-stations",
    "gaussian-surface-area",
    "best-subset-search-df",
];

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vector(n: usize, sd: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

fn fmt_est(e: &McEstimate) -> String {
    format!("{:.4}±{:.4}", e.mean, e.std_error)
}

fn pinned_sure_vs_error<F: EstimatorFamily>(
    family: F,
    s: Tuning,
    model: &GaussianModel,
    mc: MonteCarlo,
) -> Result<(McEstimate, McEstimate)> {
    let recs = mc_tuned_records(&Pinned::new(family, s)?, model, mc)?;
    let sure: Vec<f64> = recs.iter().map(|r| r.sure_min).collect();
    let err: Vec<f64> = recs.iter().map(|r| r.test_error).collect();
    Ok((McEstimate::from_samples(&sure), McEstimate::from_samples(&err)))
}

/// SURE at fixed tuning is unbiased for prediction error, for every family.
pub fn sure_unbiasedness(exec: Execution) -> Result<Criterion> {
    let n = 50;
    let mc = MonteCarlo::new(2000, 101).with_exec(exec);
    let mut rng = stream(1, &[], 0);
    let mut worst = 0.0f64;
    let mut pass = true;
    let mut check = |label: &str, pair: (McEstimate, McEstimate)| {
        let z = (pair.0.mean - pair.1.mean).abs() / pair.0.std_error.hypot(pair.1.std_error);
        if z > worst {
            worst = z;
        }
        if !pair.0.agrees_with(&pair.1, 4.0) {
            pass = false;
            return format!(" {label}:FAIL");
        }
        String::new()
    };
    let mut fails = String::new();

    let weak = GaussianModel::homoskedastic(MeanSetting::WeakSparsity.theta0(n, None)?, 1.0)?;
    for s in [0.1, 1.0, 10.0] {
        let pair = pinned_sure_vs_error(ShrinkMeans::new(n, 1.0)?, Tuning::Value(s), &weak, mc)?;
        fails += &check(&format!("shrink@{s}"), pair);
    }
    let x = gaussian_matrix(n, 8, &mut rng);
    let theta0 = &x * gaussian_vector(8, 0.5, &mut rng) + gaussian_vector(n, 0.3, &mut rng);
    let reg = GaussianModel::homoskedastic(theta0.clone(), 1.0)?;
    for s in [0.1, 1.0, 10.0] {
        let pair = pinned_sure_vs_error(ShrinkRegression::new(&x, 1.0)?, Tuning::Value(s), &reg, mc)?;
        fails += &check(&format!("regression@{s}"), pair);
    }
    let strong = GaussianModel::homoskedastic(MeanSetting::StrongSparsity.theta0(n, None)?, 1.0)?;
    for s in [0.5, 1.5, 3.0] {
        let pair = pinned_sure_vs_error(SoftThreshold::new(n, 1.0)?, Tuning::Value(s), &strong, mc)?;
        fails += &check(&format!("soft@{s}"), pair);
    }
    let xc = gaussian_matrix(n, 5, &mut rng);
    let cp_model = GaussianModel::homoskedastic(&xc * DVector::from_vec(vec![1.0, 0.5, 0.25, 0.0, 0.0]), 1.0)?;
    for idx in [1, 3, 5] {
        let fam = CpFamily::new(SubsetCollection::full_chain(xc.clone())?, 1.0)?;
        let pair = pinned_sure_vs_error(fam, Tuning::Label(idx), &cp_model, mc)?;
        fails += &check(&format!("cp@{idx}"), pair);
    }
    let sigmas: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let het = GaussianModel::heteroskedastic(gaussian_vector(n, 1.0, &mut rng), sigmas.clone())?;
    for s in [0.1, 1.0, 10.0] {
        let pair = pinned_sure_vs_error(HeteroShrink::new(sigmas.clone())?, Tuning::Value(s), &het, mc)?;
        fails += &check(&format!("hetero@{s}"), pair);
    }
    Ok(Criterion {
        id: 1,
        name: NAMES[0],
        pass,
        detail: format!("15 family/s pairs, n=50, 2000 reps; max |SURE−Err| = {worst:.2} combined SE{fails}"),
    })
}

/// Null-case excess df of SURE-tuned shrinkage against the mean of `2ŝ/(1+ŝ)`.
pub fn shrinkage_edf(exec: Execution) -> Result<Criterion> {
    let n = 50;
    let model = GaussianModel::homoskedastic(DVector::zeros(n), 1.0)?;
    let recs = mc_tuned_records(&ShrinkMeans::new(n, 1.0)?, &model, MonteCarlo::new(5000, 202).with_exec(exec))?;
    let edf = McEstimate::from_samples(&recs.iter().map(|r| r.edf_term()).collect::<Vec<_>>());
    let unbiased: Vec<f64> = recs
        .iter()
        .map(|r| match r.s_hat {
            Tuning::Value(s) => 2.0 * s / (1.0 + s),
            _ => 0.0,
        })
        .collect();
    let unbiased = McEstimate::from_samples(&unbiased);
    let pass = (0.0..=2.0).contains(&edf.mean) && edf.agrees_with(&unbiased, 4.0);
    Ok(Criterion {
        id: 2,
        name: NAMES[1],
        pass,
        detail: format!("MC edf {} vs mean 2ŝ/(1+ŝ) {}", fmt_est(&edf), fmt_est(&unbiased)),
    })
}

fn dominance_grid(n: usize) -> Vec<(&'static str, DVector<f64>)> {
    vec![
        ("zero", DVector::zeros(n)),
        ("moderate", DVector::from_element(n, 1.0)),
        ("large", DVector::from_element(n, 3.0)),
    ]
}

/// SURE-tuned shrinkage beats the MLE, positive-part James–Stein does at least as well.
pub fn shrinkage_dominance(exec: Execution) -> Result<Criterion> {
    let n = 10;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, theta0) in dominance_grid(n) {
        let model = GaussianModel::homoskedastic(theta0, 1.0)?;
        let mc = MonteCarlo::new(5000, 303).with_exec(exec);
        let tuned = mc_prediction_error(|y| positive_part_shrink(y, 1.0), &model, mc)?;
        let js = mc_prediction_error(|y| james_stein_positive(y, 1.0), &model, mc)?;
        let beats_mle = tuned.mean < 2.0 * n as f64;
        let js_ok = js.mean <= tuned.mean + 2.0 * tuned.std_error.hypot(js.std_error);
        pass &= beats_mle && js_ok;
        let mark = match (beats_mle, js_ok) {
            (true, true) => "",
            (false, _) => " [above MLE]",
            (true, false) => " [JS+ worse]",
        };
        parts.push(format!("{label}: Err {} JS+ {}{mark}", fmt_est(&tuned), fmt_est(&js)));
    }
    Ok(Criterion { id: 3, name: NAMES[2], pass, detail: format!("2nσ²=20; {}", parts.join("; ")) })
}

/// Risk of SURE-tuned shrinkage within `4σ²` of the oracle risk.
pub fn shrinkage_risk_bound(exec: Execution) -> Result<Criterion> {
    let n = 10;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, theta0) in dominance_grid(n) {
        let model = GaussianModel::homoskedastic(theta0, 1.0)?;
        let risk = mc_risk(|y| positive_part_shrink(y, 1.0), &model, MonteCarlo::new(5000, 404).with_exec(exec))?;
        let bound = risk_bounds_shrink(&model)?;
        let ok = risk.mean <= bound.sure_tuned_bound + 4.0 * risk.std_error;
        pass &= ok;
        parts.push(format!("{label}: {} ≤ {:.4}", fmt_est(&risk), bound.sure_tuned_bound));
    }
    Ok(Criterion { id: 4, name: NAMES[3], pass, detail: parts.join("; ") })
}

/// Cp choosing between the empty model and one column: null value ≈ 0.415
/// and the off-center closed form.
pub fn two_model_edf_check(exec: Execution) -> Result<Criterion> {
    let mut rng = stream(5, &[], 0);
    let x = gaussian_matrix(20, 1, &mut rng);
    let v = two_model_direction(&x)?;
    let family = CpFamily::new(SubsetCollection::two_model(x.clone())?, 1.0)?;
    let mut pass = (two_model_edf(0.0) - 0.415).abs() < 5e-4;
    let mut parts = vec![format!("closed form at 0: {:.5}", two_model_edf(0.0))];
    for m in [0.0, 1.0, 3.0] {
        let theta0 = &v * m;
        let model = GaussianModel::homoskedastic(theta0.clone(), 1.0)?;
        let edf = mc_edf(&family, &model, MonteCarlo::new(5000, 505).with_exec(exec))?.estimate();
        let target = if m == 0.0 { 0.415 } else { edf_two_model_exact(&x, &theta0, 1.0)? };
        let ok = edf.agrees_with_value(target, 4.0) && (m != 0.0 || edf.std_error <= 0.02);
        pass &= ok;
        parts.push(format!("m={m}: {} vs {target:.4}", fmt_est(&edf)));
    }
    Ok(Criterion { id: 5, name: NAMES[4], pass, detail: parts.join("; ") })
}

/// Full nested chains under a zero mean: edf in `[0, 10]` and below the
/// surface-area bound, which itself stays under 10.
pub fn nested_null_chains(exec: Execution) -> Result<Criterion> {
    let mut rng = stream(6, &[], 0);
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [5, 10, 20] {
        let x = gaussian_matrix(2 * p + 10, p, &mut rng);
        let family = CpFamily::new(SubsetCollection::full_chain(x)?, 1.0)?;
        let model = GaussianModel::homoskedastic(DVector::zeros(2 * p + 10), 1.0)?;
        let edf = mc_edf(&family, &model, MonteCarlo::new(2000, 606).with_exec(exec))?.estimate();
        let bound = nested_null_edf_bound(p)?;
        let ok = edf.mean >= -4.0 * edf.std_error && edf.mean <= 10.0 && bound < 10.0 && bound >= edf.mean;
        pass &= ok;
        parts.push(format!("p={p}: edf {} bound {bound:.4}", fmt_est(&edf)));
    }
    Ok(Criterion { id: 6, name: NAMES[5], pass, detail: parts.join("; ") })
}

/// Monte Carlo `E max_s (‖P_s Z‖² − p_s)` under the chi-square maximum bound.
pub fn chi_square_max_bound(exec: Execution) -> Result<Criterion> {
    let deltas = [0.3, 0.5, 0.7, 0.9];
    let (a, b) = simplified_constants(0.9)?;
    let mut pass = (a - 20.0).abs() < 1e-12 && (b - 0.054).abs() < 5e-4;
    let mut min_slack = f64::INFINITY;
    for c in 0..50u64 {
        let mut rng = stream(7, &[], c);
        let p = rng.random_range(2..=8usize);
        let x = gaussian_matrix(p + 4, p, &mut rng);
        let k = rng.random_range(2..=12usize).min(1 << p);
        let subsets: Vec<Vec<usize>> = sample(&mut rng, 1 << p, k)
            .into_iter()
            .map(|mask| (0..p).filter(|j| mask >> j & 1 == 1).collect())
            .collect();
        let coll = SubsetCollection::new(x, subsets)?;
        let sizes = coll.sizes();
        let draws = exec.map(2000, |r| {
            let mut rng = stream(77, &[c], r as u64);
            let z = gaussian_vector(p + 4, 1.0, &mut rng);
            (0..coll.len())
                .map(|s| coll.projector(s).norm_squared(&z) - sizes[s] as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        });
        let est = McEstimate::from_samples(&draws);
        for &d in &deltas {
            let bound = chi_sq_max_bound(&sizes, d)?;
            min_slack = min_slack.min(bound - est.mean);
            pass &= est.mean <= bound;
        }
    }
    Ok(Criterion {
        id: 7,
        name: NAMES[6],
        pass,
        detail: format!(
            "50 collections × δ∈{{0.3,0.5,0.7,0.9}}, min slack {min_slack:.4}; δ=0.9 constants {a:.6}, {b:.6}"
        ),
    })
}

fn soft_sure_strict(y: &DVector<f64>, t: f64, sigma: f64) -> f64 {
    y.iter().map(|v| (v * v).min(t * t) + if v.abs() > t { 2.0 * sigma * sigma } else { 0.0 }).sum()
}

/// Candidate-set SURE minimization, jump signs along coordinates and the df lower bound.
pub fn soft_threshold_checks(exec: Execution) -> Result<Criterion> {
    let n = 20;
    let mut grid_ok = 0;
    for k in 0..100u64 {
        let mut rng = stream(8, &[1], k);
        let y = gaussian_vector(n, rng.random_range(0.5..3.0), &mut rng);
        let (t, s) = candidate_minimizer(&y, 1.0);
        let top = y.amax() * 1.01;
        let step = top / 9_999.0;
        let (tg, sg) = (0..10_000)
            .map(|j| {
                let tj = j as f64 * step;
                (tj, soft_sure_strict(&y, tj, 1.0))
            })
            .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        let close = (tg - t).abs() <= 2.0 * step || sg - s <= 2.0 * n as f64 * top * step;
        if s <= sg + 1e-9 && close {
            grid_ok += 1;
        }
    }
    let mut jumps = 0;
    let mut negative = 0;
    for k in 0..200u64 {
        let mut rng = stream(8, &[2], k);
        let y = gaussian_vector(8, 1.5, &mut rng);
        let i = rng.random_range(0..8);
        let grid: Vec<f64> = (0..=4000).map(|j| -4.0 + 8.0 * j as f64 / 4000.0).collect();
        for jump in scan_jump_signs(&y, i, &grid, 1.0)? {
            jumps += 1;
            if jump.size < 0.0 {
                negative += 1;
            }
        }
    }
    let mc = MonteCarlo::new(5000, 808).with_exec(exec);
    let null = df_lower_bound_check(&GaussianModel::homoskedastic(DVector::zeros(50), 1.0)?, mc)?;
    let strong = df_lower_bound_check(
        &GaussianModel::homoskedastic(MeanSetting::StrongSparsity.theta0(50, None)?, 1.0)?,
        mc,
    )?;
    let pass = grid_ok == 100 && negative == 0 && jumps > 0 && null.holds && strong.holds;
    Ok(Criterion {
        id: 8,
        name: NAMES[7],
        pass,
        detail: format!(
            "grid agreement {grid_ok}/100; {jumps} jumps on 200 scans, {negative} negative; \
             df−count null {} strong {}",
            fmt_est(&null.paired.excess),
            fmt_est(&strong.paired.excess)
        ),
    })
}

/// Implicit-differentiation edf reproduces `2ŝ/(1+ŝ)`; the heteroskedastic
/// ratio collapses to the homoskedastic excess optimism.
pub fn implicit_differentiation() -> Result<Criterion> {
    let n = 20;
    let mut rng = stream(9, &[], 0);
    let x = gaussian_matrix(n, 6, &mut rng);
    let projector = Projector::from_design(&x);
    let (mut worst_means, mut worst_reg, mut worst_het) = (0.0f64, 0.0f64, 0.0f64);
    let mut done = 0;
    while done < 100 {
        let y = gaussian_vector(n, 1.0, &mut rng) + gaussian_vector(n, 2.0, &mut rng);
        let fit = tune_shrink_means(&y, 1.0)?;
        let Tuning::Value(s) = fit.s_hat else { continue };
        let target = 2.0 * s / (1.0 + s);
        worst_means = worst_means.max((edf_implicit_diff(&ShrinkMeansHooks { sigma: 1.0 }, &y, s)? - target).abs());

        let reg = tune_shrink_regression(&x, &y, 1.0)?;
        if let Tuning::Value(sr) = reg.s_hat {
            let hooks = ShrinkRegressionHooks { projector: projector.clone(), sigma: 1.0 };
            worst_reg = worst_reg.max((edf_implicit_diff(&hooks, &y, sr)? - 2.0 * sr / (1.0 + sr)).abs());
        }

        for sigma in [1.0, 1.3] {
            let fit = tune_shrink_means(&y, sigma)?;
            if let Tuning::Value(sh) = fit.s_hat {
                let ex = exopt_hetero_shrink(&y, &vec![sigma; n], sh / (sigma * sigma))?;
                worst_het = worst_het.max((ex - 2.0 * (2.0 * sh / (1.0 + sh))).abs());
            }
        }
        done += 1;
    }
    let pass = worst_means <= 1e-4 && worst_reg <= 1e-4 && worst_het <= 1e-8;
    Ok(Criterion {
        id: 9,
        name: NAMES[8],
        pass,
        detail: format!(
            "100 Y: max deviation means {worst_means:.2e}, regression {worst_reg:.2e}, equal-variance ratio {worst_het:.2e}"
        ),
    })
}

/// Ridge fits through the rotated heteroskedastic family equal direct solves.
pub fn ridge_rotation() -> Result<Criterion> {
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = stream(10, &[], k);
        let n = rng.random_range(6..=15usize);
        let p = rng.random_range(2..=n + 2);
        let x = gaussian_matrix(n, p, &mut rng);
        let y = gaussian_vector(n, 2.0, &mut rng);
        let sigma = rng.random_range(0.5..2.0);
        let s = rng.random_range(-3.0f64..3.0).exp();
        let rot = ridge_as_hetero(&x, &y, sigma)?;
        let lambda = rot.penalty(s);
        let lhs = x.transpose() * &x + DMatrix::identity(p, p) * lambda;
        let direct = lhs.lu().solve(&(x.transpose() * &y)).expect("positive definite");
        let beta = rot.coefficients(Tuning::Value(s))?;
        let fitted = rot.fitted(Tuning::Value(s))?;
        worst = worst.max((beta - &direct).amax()).max((fitted - &x * &direct).amax());
    }
    Ok(Criterion {
        id: 10,
        name: NAMES[9],
        pass: worst <= 1e-8,
        detail: format!("100 random (X, Y, s): max deviation {worst:.2e}"),
    })
}

/// Parametric bootstrap edf against the Monte Carlo edf in the shrinkage null case.
pub fn parametric_bootstrap(exec: Execution) -> Result<Criterion> {
    let n = 50;
    let family = ShrinkMeans::new(n, 1.0)?;
    let null = GaussianModel::homoskedastic(DVector::zeros(n), 1.0)?;
    let mc = mc_edf(&family, &null, MonteCarlo::new(5000, 1101).with_exec(exec))?.estimate();
    let outer = |model: &GaussianModel, reps: usize, b: usize| -> Result<Vec<(f64, f64)>> {
        exec.map(reps, |r| {
            let mut rng = stream(1102, &[], r as u64);
            let y = model.draw(&mut rng);
            let cfg = BootstrapConfig::new(b, Sampler::Parametric, 1103 + r as u64).with_exec(Execution::Sequential);
            let est = bootstrap_estimates(&family, &y, &cfg)?;
            Ok((est.edf.value, est.df.value))
        })
        .into_iter()
        .collect()
    };
    let boot = outer(&null, 500, 500)?;
    let boot_edf = McEstimate::from_samples(&boot.iter().map(|b| b.0).collect::<Vec<_>>());
    let pass = (boot_edf.mean - mc.mean).abs() <= 0.3;

    // weak sparsity: bootstrap df is known to undershoot; recorded only
    let weak = GaussianModel::homoskedastic(MeanSetting::WeakSparsity.theta0(n, None)?, 1.0)?;
    let weak_boot = outer(&weak, 100, 200)?;
    let weak_df = McEstimate::from_samples(&weak_boot.iter().map(|b| b.1).collect::<Vec<_>>());
    let recs = mc_tuned_records(&family, &weak, MonteCarlo::new(2000, 1104).with_exec(exec))?;
    let mc_df = McEstimate::from_samples(&recs.iter().map(|r| r.cov_term).collect::<Vec<_>>());
    Ok(Criterion {
        id: 11,
        name: NAMES[10],
        pass,
        detail: format!(
            "null: bootstrap edf {} vs MC {} (tol 0.3); weak sparsity df: bootstrap {} vs MC {} (recorded)",
            fmt_est(&boot_edf),
            fmt_est(&mc),
            fmt_est(&weak_df),
            fmt_est(&mc_df)
        ),
    })
}

/// Exactly one valid circular rotation for random continuous vectors.
pub fn gas_stations() -> Result<Criterion> {
    let mut bad = 0;
    for k in 0..1000u64 {
        let mut rng = stream(12, &[], k);
        let d = rng.random_range(1..=8usize);
        let raw: Vec<f64> = (0..d).map(|_| rng.sample(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x * 2.0 * d as f64 / total).collect();
        let found = gas_stations_rotation(&w)?;
        let brute: Vec<usize> = (0..d).filter(|&k| rotation_is_valid(&w, k)).collect();
        if found.multiplicity != 1 || brute != vec![found.start] {
            bad += 1;
        }
    }
    Ok(Criterion {
        id: 12,
        name: NAMES[11],
        pass: bad == 0,
        detail: format!("1000 vectors, d ≤ 8: {bad} without a unique brute-force-confirmed rotation"),
    })
}

/// Closed-form Gaussian surface area of origin balls against sphere Monte Carlo.
pub fn gaussian_surface_area() -> Result<Criterion> {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1usize, 2, 3, 5] {
        for r in [1.0, (2.0 * d as f64).sqrt()] {
            let exact = gaussian_surface_area_origin(d, r)?;
            let mc = sphere_mc_surface_area(&DVector::zeros(d), r, SPHERE_DIRECTIONS, 13)?;
            let ok = (exact - mc.value).abs() <= 4.0 * mc.std_error + 1e-12 && exact <= 1.0 && mc.value <= 1.0;
            pass &= ok;
            parts.push(format!("d={d} r={r:.3}: {exact:.5}/{:.5}", mc.value));
        }
    }
    // independent oracle: the chi density, d/dr P(‖Z‖ ≤ r) = 2r f_{χ²_d}(r²)
    let mut worst_chi = 0.0f64;
    for d in [1usize, 2, 3, 5] {
        let chi = ChiSquared::new(d as f64).expect("positive dof");
        for r in [0.5, 1.0, (2.0 * d as f64).sqrt(), 4.0] {
            let exact = gaussian_surface_area_origin(d, r)?;
            worst_chi = worst_chi.max((exact - 2.0 * r * chi.pdf(r * r)).abs());
        }
    }
    pass &= worst_chi <= 1e-10;
    // off-center in three dimensions: (r/a)[φ(r − a) − φ(r + a)]
    let mut rng = stream(13, &[], 0);
    let mut off = 0;
    for k in 0..5u64 {
        let c = gaussian_vector(3, 1.0, &mut rng);
        let (a, r) = (c.norm(), 6f64.sqrt());
        let exact = r / a * (std_normal_pdf(r - a) - std_normal_pdf(r + a));
        let mc = sphere_mc_surface_area(&c, r, SPHERE_DIRECTIONS, 14 + k)?;
        if (mc.value - exact).abs() <= 4.0 * mc.std_error && mc.value <= 1.0 {
            off += 1;
        }
    }
    pass &= off == 5;
    parts.push(format!("chi-density oracle max dev {worst_chi:.1e}; off-center d=3 {off}/5 within 4 SE"));
    Ok(Criterion { id: 13, name: NAMES[12], pass, detail: parts.join("; ") })
}

/// Search df of best subset selection over an orthogonal design.
pub fn best_subset_search_df(exec: Execution) -> Result<Criterion> {
    let p = 6;
    let solver = BestSubset::new(DMatrix::identity(p, p), 2.0)?;
    let model = GaussianModel::homoskedastic(DVector::zeros(p), 1.0)?;
    let paired = mc_df_paired(
        |y| {
            let fit = solver.fit(y).expect("dimensions match");
            let size = fit.subset.len() as f64;
            (fit.fitted, size)
        },
        &model,
        MonteCarlo::new(5000, 1414).with_exec(exec),
    )?;
    let c = best_subset_constant();
    let ex = paired.excess;
    let pass = ex.mean >= -4.0 * ex.std_error
        && ex.mean <= 2.29 * p as f64 + 4.0 * ex.std_error
        && (2.28..=2.30).contains(&c.value);
    Ok(Criterion {
        id: 14,
        name: NAMES[13],
        pass,
        detail: format!(
            "search df {} ≤ {:.2}; constant {:.5} at δ={:.4}; 0.84p = {:.2} for comparison",
            fmt_est(&ex),
            2.29 * p as f64,
            c.value,
            c.delta,
            0.84 * p as f64
        ),
    })
}

/// Checks expected to fail. Positive-part James–Stein does not dominate the
/// SURE-tuned shrinkage rule: at `θ₀ = 0` the tuned rule shrinks harder and
/// its risk is about half that of JS+ for `n = 10`.
pub const EXPECTED_FAILURES: [usize; 1] = [3];

/// Runs check `id` (1-based).
pub fn run(id: usize, exec: Execution) -> Result<Criterion> {
    match id {
        1 => sure_unbiasedness(exec),
        2 => shrinkage_edf(exec),
        3 => shrinkage_dominance(exec),
        4 => shrinkage_risk_bound(exec),
        5 => two_model_edf_check(exec),
        6 => nested_null_chains(exec),
        7 => chi_square_max_bound(exec),
        8 => soft_threshold_checks(exec),
        9 => implicit_differentiation(),
        10 => ridge_rotation(),
        11 => parametric_bootstrap(exec),
        12 => gas_stations(),
        13 => gaussian_surface_area(),
        14 => best_subset_search_df(exec),
        _ => Err(crate::error::Error::Contract(format!("no check numbered {id}"))),
    }
}

/// All fourteen checks; an error counts as a failure.
pub fn run_all(exec: Execution) -> Vec<Criterion> {
    (1..=NAMES.len())
        .map(|id| {
            run(id, exec).unwrap_or_else(|e| Criterion {
                id,
                name: NAMES[id - 1],
                pass: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

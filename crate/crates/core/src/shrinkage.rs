//! Shrinkage toward zero in the normal means and regression problems.
//!
//! Both families have SURE of the form `a s²/(1+s)² + 2b/(1+s)`, minimized in
//! closed form by [`minimize_quadratic_sure`]. The SURE-tuned estimates are
//! the positive-part rules `(1 − nσ²/‖Y‖²)₊ Y` and `(1 − rσ²/‖P_X Y‖²)₊ P_X Y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, domain, Result};
use crate::family::{EstimatorFamily, TunedFit, Tuning, TuningDomain};
use crate::linalg::Projector;
use crate::model::{GaussianModel, NoiseLevel};
use crate::montecarlo::{ExactRisk, Oracle, OracleTuning};

/// Minimizer over `x ∈ [0, ∞]` of `g(x) = a x²/(1+x)² + 2b/(1+x)`.
///
/// Returns `b/(a−b)` when `a > b` and `+∞` otherwise; at `a = b` the
/// infimum is only approached as `x → ∞`.
pub fn minimize_quadratic_sure(a: f64, b: f64) -> Result<Tuning> {
    if !(a > 0.0 && b > 0.0) {
        return Err(domain(format!("quadratic SURE needs a, b > 0 (got a={a}, b={b})")));
    }
    if a > b {
        Ok(Tuning::Value(b / (a - b)))
    } else {
        Ok(Tuning::Infinite)
    }
}

fn shrink_factor(s: Tuning) -> Result<f64> {
    match s {
        Tuning::Value(v) if v >= 0.0 => Ok(1.0 / (1.0 + v)),
        Tuning::Infinite => Ok(0.0),
        other => Err(domain(format!("shrinkage tuning must be in [0, ∞], got {other}"))),
    }
}

fn quadratic_tuning(a: f64, b: f64) -> Tuning {
    if a <= 0.0 {
        Tuning::Infinite
    } else {
        minimize_quadratic_sure(a, b).expect("a, b > 0")
    }
}

fn positive_sigma(sigma: f64) -> Result<NoiseLevel> {
    NoiseLevel::homoskedastic(sigma)
}

/// `θ̂_s(Y) = Y/(1+s)`, `s ∈ [0, ∞]`.
#[derive(Debug, Clone)]
pub struct ShrinkMeans {
    n: usize,
    sigma: f64,
    noise: NoiseLevel,
}

impl ShrinkMeans {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(contract("dimension must be at least 1"));
        }
        Ok(Self { n, sigma, noise: positive_sigma(sigma)? })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl EstimatorFamily for ShrinkMeans {
    fn name(&self) -> String {
        "shrink-means".into()
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn noise(&self) -> &NoiseLevel {
        &self.noise
    }

    fn domain(&self) -> TuningDomain {
        TuningDomain::Interval { lo: 0.0, hi: f64::INFINITY }
    }

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(s, y)?;
        Ok(y * shrink_factor(s)?)
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.check(s, y)?;
        Ok(self.n as f64 * shrink_factor(s)?)
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        let s = quadratic_tuning(y.norm_squared(), self.n as f64 * self.sigma * self.sigma);
        TunedFit::evaluate(self, s, y)
    }
}

impl ExactRisk for ShrinkMeans {
    fn risk_at(&self, s: Tuning, model: &GaussianModel) -> Result<f64> {
        let sigma = homoskedastic_sd(model)?;
        let f = shrink_factor(s)?;
        let norm2 = model.theta0().norm_squared();
        Ok((1.0 - f).powi(2) * norm2 + f * f * self.n as f64 * sigma * sigma)
    }
}

impl OracleTuning for ShrinkMeans {
    /// `s₀ = nσ²/‖θ₀‖²`, risk `nσ²‖θ₀‖²/(nσ² + ‖θ₀‖²)`.
    fn oracle(&self, model: &GaussianModel) -> Result<Oracle> {
        let sigma = homoskedastic_sd(model)?;
        let norm2 = model.theta0().norm_squared();
        let ns2 = self.n as f64 * sigma * sigma;
        let (s0, risk) = if norm2 == 0.0 {
            (Tuning::Infinite, 0.0)
        } else {
            (Tuning::Value(ns2 / norm2), ns2 * norm2 / (ns2 + norm2))
        };
        Ok(Oracle { s0, risk, err: model.irreducible_error() + risk })
    }
}

fn homoskedastic_sd(model: &GaussianModel) -> Result<f64> {
    match model.noise() {
        NoiseLevel::Homoskedastic(s) => Ok(*s),
        NoiseLevel::Heteroskedastic(_) => Err(contract("shrinkage risk formulas need homoskedastic noise")),
    }
}

/// `θ̂_s(Y) = P_X Y/(1+s)`, `s ∈ [0, ∞]`, with `P_X` the projection onto `col(X)`.
#[derive(Debug, Clone)]
pub struct ShrinkRegression {
    projector: Projector,
    sigma: f64,
    noise: NoiseLevel,
}

impl ShrinkRegression {
    pub fn new(x: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(contract("design must have at least one row"));
        }
        Ok(Self { projector: Projector::from_design(x), sigma, noise: positive_sigma(sigma)? })
    }

    pub fn rank(&self) -> usize {
        self.projector.rank()
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl EstimatorFamily for ShrinkRegression {
    fn name(&self) -> String {
        "shrink-regression".into()
    }

    fn dim(&self) -> usize {
        self.projector.dim()
    }

    fn noise(&self) -> &NoiseLevel {
        &self.noise
    }

    fn domain(&self) -> TuningDomain {
        TuningDomain::Interval { lo: 0.0, hi: f64::INFINITY }
    }

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(s, y)?;
        Ok(self.projector.apply(y) * shrink_factor(s)?)
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.check(s, y)?;
        Ok(self.rank() as f64 * shrink_factor(s)?)
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        let b = self.rank() as f64 * self.sigma * self.sigma;
        let s = if b == 0.0 {
            Tuning::Infinite
        } else {
            quadratic_tuning(self.projector.norm_squared(y), b)
        };
        TunedFit::evaluate(self, s, y)
    }
}

impl ExactRisk for ShrinkRegression {
    fn risk_at(&self, s: Tuning, model: &GaussianModel) -> Result<f64> {
        let sigma = homoskedastic_sd(model)?;
        let f = shrink_factor(s)?;
        let t2 = model.theta0().norm_squared();
        let p2 = self.projector.norm_squared(model.theta0());
        Ok((t2 - p2) + (1.0 - f).powi(2) * p2 + f * f * self.rank() as f64 * sigma * sigma)
    }
}

impl OracleTuning for ShrinkRegression {
    /// `s₀ = rσ²/‖P_X θ₀‖²`.
    fn oracle(&self, model: &GaussianModel) -> Result<Oracle> {
        let sigma = homoskedastic_sd(model)?;
        let t2 = model.theta0().norm_squared();
        let p2 = self.projector.norm_squared(model.theta0());
        let rs2 = self.rank() as f64 * sigma * sigma;
        let (s0, risk) = if p2 == 0.0 {
            (Tuning::Infinite, t2)
        } else {
            (Tuning::Value(rs2 / p2), (rs2 * t2 + p2 * (t2 - p2)) / (rs2 + p2))
        };
        Ok(Oracle { s0, risk, err: model.irreducible_error() + risk })
    }
}

/// SURE-tuned means shrinkage via the closed-form quadratic minimizer.
pub fn tune_shrink_means(y: &DVector<f64>, sigma: f64) -> Result<TunedFit> {
    ShrinkMeans::new(y.len(), sigma)?.minimize_sure(y)
}

/// SURE-tuned regression shrinkage.
pub fn tune_shrink_regression(x: &DMatrix<f64>, y: &DVector<f64>, sigma: f64) -> Result<TunedFit> {
    ShrinkRegression::new(x, sigma)?.minimize_sure(y)
}

/// The same SURE-tuned means estimate written as `(1 − nσ²/‖Y‖²)₊ Y`.
pub fn positive_part_shrink(y: &DVector<f64>, sigma: f64) -> DVector<f64> {
    positive_part(y, y.len() as f64 * sigma * sigma)
}

fn positive_part(v: &DVector<f64>, numerator: f64) -> DVector<f64> {
    let norm2 = v.norm_squared();
    if norm2 == 0.0 {
        return DVector::zeros(v.len());
    }
    v * (1.0 - numerator / norm2).max(0.0)
}

/// Unbiased excess df of a SURE-tuned shrinkage fit: `2ŝ/(1+ŝ)`, or 0 when `ŝ = ∞`.
pub fn edf_unbiased_shrink(fit: &TunedFit) -> f64 {
    match fit.s_hat {
        Tuning::Value(s) => 2.0 * s / (1.0 + s),
        _ => 0.0,
    }
}

/// Positive-part James–Stein `(1 − (n−2)σ²/‖Y‖²)₊ Y`.
pub fn james_stein_positive(y: &DVector<f64>, sigma: f64) -> DVector<f64> {
    positive_part(y, (y.len() as f64 - 2.0) * sigma * sigma)
}

/// Regression form `(1 − (r−2)σ²/‖P_X Y‖²)₊ P_X Y`.
pub fn james_stein_regression(projector: &Projector, y: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let py = projector.apply(y);
    positive_part(&py, (projector.rank() as f64 - 2.0) * sigma * sigma)
}

/// Unbiased estimate of the risk of the SURE-tuned means shrinkage estimator.
///
/// `nσ² − (n−4)σ²·nσ²/‖Y‖²` when `‖Y‖² ≥ nσ²`, else `‖Y‖² − nσ²`.
pub fn unbiased_risk_sure_tuned_shrink(y: &DVector<f64>, sigma: f64) -> f64 {
    let n = y.len() as f64;
    let s2 = sigma * sigma;
    let norm2 = y.norm_squared();
    if norm2 >= n * s2 {
        n * s2 - (n - 4.0) * s2 * n * s2 / norm2
    } else {
        norm2 - n * s2
    }
}

/// Oracle risk and the two risk upper bounds (SURE-tuned: +4σ², JS+: +2σ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBounds {
    pub oracle_risk: f64,
    pub sure_tuned_bound: f64,
    pub js_bound: f64,
}

pub fn risk_bounds_shrink(model: &GaussianModel) -> Result<RiskBounds> {
    let sigma = homoskedastic_sd(model)?;
    let oracle = ShrinkMeans::new(model.dim(), sigma)?.oracle(model)?;
    Ok(bounds_from(oracle.risk, sigma))
}

pub fn risk_bounds_shrink_regression(x: &DMatrix<f64>, model: &GaussianModel) -> Result<RiskBounds> {
    let sigma = homoskedastic_sd(model)?;
    let family = ShrinkRegression::new(x, sigma)?;
    if family.dim() != model.dim() {
        return Err(contract("design rows must match the model dimension"));
    }
    Ok(bounds_from(family.oracle(model)?.risk, sigma))
}

fn bounds_from(oracle_risk: f64, sigma: f64) -> RiskBounds {
    let s2 = sigma * sigma;
    RiskBounds { oracle_risk, sure_tuned_bound: oracle_risk + 4.0 * s2, js_bound: oracle_risk + 2.0 * s2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::sure;
    use approx::assert_relative_eq;

    fn vec_with_norm2(n: usize, norm2: f64) -> DVector<f64> {
        let v = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        let scale = (norm2 / v.norm_squared()).sqrt();
        v * scale
    }

    #[test]
    fn quadratic_minimizer_cases() {
        assert_eq!(minimize_quadratic_sure(2.0, 1.0).unwrap(), Tuning::Value(1.0));
        assert_eq!(minimize_quadratic_sure(1.0, 2.0).unwrap(), Tuning::Infinite);
        assert_eq!(minimize_quadratic_sure(1.0, 1.0).unwrap(), Tuning::Infinite);
        assert!(minimize_quadratic_sure(0.0, 1.0).is_err());
        assert!(minimize_quadratic_sure(1.0, -1.0).is_err());
    }

    #[test]
    fn quadratic_minimizer_against_grid_search() {
        let (a, b) = (3.0, 1.0);
        let g = |x: f64| a * x * x / (1.0 + x).powi(2) + 2.0 * b / (1.0 + x);
        let x_star = match minimize_quadratic_sure(a, b).unwrap() {
            Tuning::Value(v) => v,
            _ => unreachable!(),
        };
        assert_relative_eq!(x_star, 0.5);
        for k in 0..10_000 {
            let x = 100.0 * k as f64 / 9_999.0;
            assert!(g(x_star) <= g(x) + 1e-15, "g({x}) = {} < g(x*) = {}", g(x), g(x_star));
        }
    }

    #[test]
    fn sure_examples() {
        let fam = ShrinkMeans::new(2, 1.0).unwrap();
        let zero = DVector::zeros(2);
        assert_eq!(sure(&fam, Tuning::Value(0.0), &zero).unwrap(), 4.0);
        let y = DVector::from_vec(vec![1.5, -2.0]);
        assert_eq!(sure(&fam, Tuning::Infinite, &y).unwrap(), y.norm_squared());
        assert!(sure(&fam, Tuning::Value(-1.0), &y).is_err());
        assert!(sure(&fam, Tuning::Value(1.0), &DVector::zeros(3)).is_err());
    }

    #[test]
    fn tuning_examples() {
        let y = vec_with_norm2(4, 8.0);
        let fit = tune_shrink_means(&y, 1.0).unwrap();
        match fit.s_hat {
            Tuning::Value(s) => assert_relative_eq!(s, 1.0, epsilon = 1e-12),
            other => panic!("{other}"),
        }
        assert!((&fit.theta_hat - &y / 2.0).amax() < 1e-12);
        assert_relative_eq!(edf_unbiased_shrink(&fit), 1.0, epsilon = 1e-12);

        let small = vec_with_norm2(4, 2.0);
        let fit = tune_shrink_means(&small, 1.0).unwrap();
        assert_eq!(fit.s_hat, Tuning::Infinite);
        assert_eq!(fit.theta_hat, DVector::zeros(4));
        assert_eq!(edf_unbiased_shrink(&fit), 0.0);

        let boundary = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let fit = tune_shrink_means(&boundary, 1.0).unwrap();
        assert_eq!(fit.theta_hat, DVector::zeros(4));
        assert_eq!(positive_part_shrink(&boundary, 1.0), DVector::zeros(4));
    }

    #[test]
    fn james_stein_examples() {
        let y = vec_with_norm2(3, 1.0);
        assert_eq!(james_stein_positive(&y, 1.0), DVector::zeros(3));
        let big = DVector::from_vec(vec![1e4, -2e4, 3e4]);
        let js = james_stein_positive(&big, 1.0);
        assert!((js - &big).amax() < 1e-4);
    }

    #[test]
    fn unbiased_risk_examples() {
        let y = DVector::from_element(10, 1.0);
        assert_relative_eq!(unbiased_risk_sure_tuned_shrink(&y, 1.0), 4.0, epsilon = 1e-12);
        let small = vec_with_norm2(10, 3.0);
        assert_relative_eq!(unbiased_risk_sure_tuned_shrink(&small, 1.0), -7.0, epsilon = 1e-12);
    }

    #[test]
    fn risk_bound_examples() {
        let null = GaussianModel::homoskedastic(DVector::zeros(5), 1.0).unwrap();
        let rb = risk_bounds_shrink(&null).unwrap();
        assert_eq!((rb.oracle_risk, rb.sure_tuned_bound, rb.js_bound), (0.0, 4.0, 2.0));
        let fam = ShrinkMeans::new(5, 1.0).unwrap();
        let o = fam.oracle(&null).unwrap();
        assert_eq!(o.s0, Tuning::Infinite);
        assert_eq!(o.err, 5.0);

        let m = GaussianModel::homoskedastic(vec_with_norm2(5, 5.0), 1.0).unwrap();
        let o = fam.oracle(&m).unwrap();
        assert_relative_eq!(o.s0.as_f64().unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(o.risk, 2.5, epsilon = 1e-12);
        // closed-form oracle risk equals the exact risk at s₀
        assert_relative_eq!(fam.risk_at(o.s0, &m).unwrap(), o.risk, epsilon = 1e-12);
    }

    #[test]
    fn regression_oracle_in_column_space() {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0]);
        let beta = DVector::from_vec(vec![0.3, 0.2]);
        let mut theta0: DVector<f64> = &x * beta;
        theta0 *= (2.0 / theta0.norm_squared()).sqrt(); // ‖θ₀‖² = rσ²
        let model = GaussianModel::homoskedastic(theta0, 1.0).unwrap();
        let rb = risk_bounds_shrink_regression(&x, &model).unwrap();
        assert_relative_eq!(rb.oracle_risk, 1.0, epsilon = 1e-10);
        let fam = ShrinkRegression::new(&x, 1.0).unwrap();
        let o = fam.oracle(&model).unwrap();
        assert_relative_eq!(fam.risk_at(o.s0, &model).unwrap(), o.risk, epsilon = 1e-10);
    }

    #[test]
    fn regression_tuned_matches_positive_part() {
        let x = DMatrix::from_fn(8, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let fam = ShrinkRegression::new(&x, 1.0).unwrap();
        let y = DVector::from_fn(8, |i, _| (i as f64 * 0.9).cos() * 3.0);
        let fit = fam.minimize_sure(&y).unwrap();
        let py = fam.projector().apply(&y);
        let pp = &py * (1.0 - 3.0 / py.norm_squared()).max(0.0);
        assert!((fit.theta_hat - pp).amax() < 1e-12);
    }
}

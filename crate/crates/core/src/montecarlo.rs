//! Monte Carlo oracles for prediction error, degrees of freedom and excess
//! degrees of freedom, plus oracle tuning and the oracle-gap check.

use nalgebra::DVector;

use crate::error::{contract, Result};
use crate::exec::{stream, Execution};
use crate::family::{tune_by_sure, EstimatorFamily, Pinned, Tuning};
use crate::model::GaussianModel;

/// Replication count, seed and execution mode of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub reps: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl MonteCarlo {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self { reps, seed, exec: Execution::default() }
    }

    pub fn sequential(mut self) -> Self {
        self.exec = Execution::Sequential;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(contract(format!("Monte Carlo needs at least 2 replications, got {}", self.reps)));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std_error: (var / n as f64).sqrt(), reps: n }
    }

    /// `|self − other| ≤ k · √(se₁² + se₂²)`.
    pub fn agrees_with(&self, other: &McEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.std_error.hypot(other.std_error)
    }

    /// `|self − value| ≤ k · se`.
    pub fn agrees_with_value(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// How an excess degrees of freedom value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdfMethod {
    MonteCarlo,
    AnalyticUnbiased,
    ImplicitDiff,
    BootstrapParametric,
    BootstrapBigModel,
    BootstrapResidual,
    ClosedForm,
}

impl EdfMethod {
    pub fn tag(self) -> &'static str {
        match self {
            EdfMethod::MonteCarlo => "monte_carlo",
            EdfMethod::AnalyticUnbiased => "analytic_unbiased",
            EdfMethod::ImplicitDiff => "implicit_diff",
            EdfMethod::BootstrapParametric => "bootstrap_parametric",
            EdfMethod::BootstrapBigModel => "bootstrap_bigmodel",
            EdfMethod::BootstrapResidual => "bootstrap_residual",
            EdfMethod::ClosedForm => "closed_form",
        }
    }
}

/// An excess degrees of freedom estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfReport {
    pub method: EdfMethod,
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl EdfReport {
    pub fn closed_form(value: f64) -> Self {
        Self { method: EdfMethod::ClosedForm, value, std_error: 0.0, reps: 0 }
    }

    pub fn from_estimate(method: EdfMethod, est: McEstimate) -> Self {
        Self { method, value: est.mean, std_error: est.std_error, reps: est.reps }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate { mean: self.value, std_error: self.std_error, reps: self.reps }
    }
}

const TAG_ERR: u64 = 1;
const TAG_DF: u64 = 2;
const TAG_TUNED: u64 = 3;

/// `E‖Y* − rule(Y)‖²` (variance-scaled under heteroskedastic noise) for independent `Y, Y*`.
pub fn mc_prediction_error<R>(rule: R, model: &GaussianModel, mc: MonteCarlo) -> Result<McEstimate>
where
    R: Fn(&DVector<f64>) -> DVector<f64> + Sync + Send,
{
    mc.validate()?;
    let xs = mc.exec.map(mc.reps, |rep| {
        let mut rng = stream(mc.seed, &[TAG_ERR], rep as u64);
        let y = model.draw(&mut rng);
        let y_star = model.draw(&mut rng);
        model.noise().error_metric(&(y_star - rule(&y)))
    });
    Ok(McEstimate::from_samples(&xs))
}

/// `E‖rule(Y) − θ₀‖²` in the same metric as the prediction error.
pub fn mc_risk<R>(rule: R, model: &GaussianModel, mc: MonteCarlo) -> Result<McEstimate>
where
    R: Fn(&DVector<f64>) -> DVector<f64> + Sync + Send,
{
    mc.validate()?;
    let xs = mc.exec.map(mc.reps, |rep| {
        let mut rng = stream(mc.seed, &[TAG_ERR], rep as u64);
        let y = model.draw(&mut rng);
        model.noise().error_metric(&(rule(&y) - model.theta0()))
    });
    Ok(McEstimate::from_samples(&xs))
}

/// `df = ∑ Cov(θ̂ᵢ(Y), Yᵢ)/σᵢ²`, using the known-mean form `E[θ̂ᵢ(Y)(Yᵢ − θ₀ᵢ)]/σᵢ²`.
pub fn mc_df<R>(rule: R, model: &GaussianModel, mc: MonteCarlo) -> Result<McEstimate>
where
    R: Fn(&DVector<f64>) -> DVector<f64> + Sync + Send,
{
    mc.validate()?;
    let xs = mc.exec.map(mc.reps, |rep| {
        let mut rng = stream(mc.seed, &[TAG_DF], rep as u64);
        let y = model.draw(&mut rng);
        let z = &y - model.theta0();
        model.noise().df_inner(&rule(&y), &z)
    });
    Ok(McEstimate::from_samples(&xs))
}

/// `df` from sample covariances, for use when the mean is treated as unknown.
pub fn mc_df_centered<R>(rule: R, model: &GaussianModel, mc: MonteCarlo) -> Result<McEstimate>
where
    R: Fn(&DVector<f64>) -> DVector<f64> + Sync + Send,
{
    mc.validate()?;
    let pairs = mc.exec.map(mc.reps, |rep| {
        let mut rng = stream(mc.seed, &[TAG_DF], rep as u64);
        let y = model.draw(&mut rng);
        let fit = rule(&y);
        (y, fit)
    });
    let b = pairs.len() as f64;
    let n = model.dim();
    let mut y_bar = DVector::zeros(n);
    for (y, _) in &pairs {
        y_bar += y;
    }
    y_bar /= b;
    let xs: Vec<f64> = pairs
        .iter()
        .map(|(y, fit)| model.noise().df_inner(fit, &(y - &y_bar)) * b / (b - 1.0))
        .collect();
    Ok(McEstimate::from_samples(&xs))
}

/// df of a rule alongside the mean of a per-draw statistic from the same draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDf {
    pub df: McEstimate,
    pub stat: McEstimate,
    /// `df − stat`, paired per replication.
    pub excess: McEstimate,
}

/// Known-mean df of `rule(Y).0` paired with the mean of `rule(Y).1`.
///
/// Used for selection rules whose plug-in df (selected size, active count)
/// is not a member of an [`EstimatorFamily`].
pub fn mc_df_paired<R>(rule: R, model: &GaussianModel, mc: MonteCarlo) -> Result<PairedDf>
where
    R: Fn(&DVector<f64>) -> (DVector<f64>, f64) + Sync + Send,
{
    mc.validate()?;
    let rows = mc.exec.map(mc.reps, |rep| {
        let mut rng = stream(mc.seed, &[TAG_DF], rep as u64);
        let y = model.draw(&mut rng);
        let (fit, stat) = rule(&y);
        (model.noise().df_inner(&fit, &(&y - model.theta0())), stat)
    });
    let df: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let stat: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let excess: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    Ok(PairedDf {
        df: McEstimate::from_samples(&df),
        stat: McEstimate::from_samples(&stat),
        excess: McEstimate::from_samples(&excess),
    })
}

/// Per-replication quantities for a SURE-tuned rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedRecord {
    /// `∑ θ̂ᵢ(Yᵢ − θ₀ᵢ)/σᵢ²`: unbiased for the df of the tuned rule.
    pub cov_term: f64,
    pub naive_df: f64,
    pub sure_min: f64,
    /// Error against an independent copy `Y*`.
    pub test_error: f64,
    /// Loss `‖θ̂ − θ₀‖²` in the error metric.
    pub loss: f64,
    pub s_hat: Tuning,
}

impl TunedRecord {
    pub fn edf_term(&self) -> f64 {
        self.cov_term - self.naive_df
    }
}

/// Runs the SURE-tuned rule over `mc.reps` draws and records per-replication terms.
pub fn mc_tuned_records<F>(family: &F, model: &GaussianModel, mc: MonteCarlo) -> Result<Vec<TunedRecord>>
where
    F: EstimatorFamily + ?Sized,
{
    mc.validate()?;
    if family.dim() != model.dim() {
        return Err(contract(format!("family dimension {} vs model dimension {}", family.dim(), model.dim())));
    }
    let rows = mc.exec.map(mc.reps, |rep| -> Result<TunedRecord> {
        let mut rng = stream(mc.seed, &[TAG_TUNED], rep as u64);
        let y = model.draw(&mut rng);
        let y_star = model.draw(&mut rng);
        let fit = tune_by_sure(family, &y)?;
        let noise = model.noise();
        Ok(TunedRecord {
            cov_term: noise.df_inner(&fit.theta_hat, &(&y - model.theta0())),
            naive_df: fit.naive_df_at_shat,
            sure_min: fit.sure_min,
            test_error: noise.error_metric(&(y_star - &fit.theta_hat)),
            loss: noise.error_metric(&(&fit.theta_hat - model.theta0())),
            s_hat: fit.s_hat,
        })
    });
    rows.into_iter().collect()
}

/// Excess degrees of freedom of the SURE-tuned rule: MC df minus the mean
/// plug-in df, paired over the same draws.
pub fn mc_edf<F>(family: &F, model: &GaussianModel, mc: MonteCarlo) -> Result<EdfReport>
where
    F: EstimatorFamily + ?Sized,
{
    let recs = mc_tuned_records(family, model, mc)?;
    let terms: Vec<f64> = recs.iter().map(TunedRecord::edf_term).collect();
    Ok(EdfReport::from_estimate(EdfMethod::MonteCarlo, McEstimate::from_samples(&terms)))
}

/// The risk-minimizing member of a family under a known model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    pub s0: Tuning,
    pub risk: f64,
    pub err: f64,
}

/// Families whose members have an exactly computable risk.
pub trait ExactRisk: EstimatorFamily {
    /// `E‖θ̂_s(Y) − θ₀‖²` for fixed `s`.
    fn risk_at(&self, s: Tuning, model: &GaussianModel) -> Result<f64>;
}

/// Families with a computable oracle tuning value.
pub trait OracleTuning: EstimatorFamily {
    fn oracle(&self, model: &GaussianModel) -> Result<Oracle>;
}

impl<F: ExactRisk> ExactRisk for Pinned<F> {
    fn risk_at(&self, _s: Tuning, model: &GaussianModel) -> Result<f64> {
        self.inner().risk_at(self.value(), model)
    }
}

impl<F: ExactRisk> OracleTuning for Pinned<F> {
    fn oracle(&self, model: &GaussianModel) -> Result<Oracle> {
        let risk = self.inner().risk_at(self.value(), model)?;
        Ok(Oracle { s0: self.value(), risk, err: model.irreducible_error() + risk })
    }
}

/// Oracle tuning `s₀ = argmin_s Err(θ̂_s)` with its exact error.
pub fn oracle_tuning<F: OracleTuning + ?Sized>(family: &F, model: &GaussianModel) -> Result<Oracle> {
    family.oracle(model)
}

/// Numbers behind the oracle-gap inequality `Err(θ̂_ŝ) ≤ Err(θ̂_s₀) + ExOpt(θ̂_ŝ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub err_tuned: McEstimate,
    pub oracle: Oracle,
    pub excess_optimism: McEstimate,
    pub mean_min_sure: McEstimate,
    /// `Err(θ̂_ŝ) − ExOpt − Err(θ̂_s₀)`, paired per replication; nonpositive in theory.
    pub gap: McEstimate,
    pub gap_holds: bool,
    /// `E[min SURE] − Err(θ̂_s₀)`; nonpositive in theory.
    pub min_sure_excess: McEstimate,
    pub min_sure_holds: bool,
}

/// Checks the oracle gap bound and `E[min SURE] ≤ min_s Err(θ̂_s)` within 4 SE.
pub fn oracle_gap_check<F>(family: &F, model: &GaussianModel, mc: MonteCarlo) -> Result<GapReport>
where
    F: OracleTuning + ?Sized,
{
    let oracle = family.oracle(model)?;
    let recs = mc_tuned_records(family, model, mc)?;
    let scale = model.noise().optimism_scale();
    let collect = |f: &dyn Fn(&TunedRecord) -> f64| -> McEstimate {
        McEstimate::from_samples(&recs.iter().map(f).collect::<Vec<_>>())
    };
    let err_tuned = collect(&|r| r.test_error);
    let excess_optimism = collect(&|r| scale * r.edf_term());
    let mean_min_sure = collect(&|r| r.sure_min);
    let gap = collect(&|r| r.test_error - scale * r.edf_term() - oracle.err);
    let min_sure_excess = collect(&|r| r.sure_min - oracle.err);
    Ok(GapReport {
        err_tuned,
        oracle,
        excess_optimism,
        mean_min_sure,
        gap_holds: gap.mean <= 4.0 * gap.std_error,
        gap,
        min_sure_holds: min_sure_excess.mean <= 4.0 * min_sure_excess.std_error,
        min_sure_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn null_model(n: usize) -> GaussianModel {
        GaussianModel::homoskedastic(DVector::zeros(n), 1.0).unwrap()
    }

    #[test]
    fn mle_prediction_error_is_twice_noise() {
        let est = mc_prediction_error(|y| y.clone(), &null_model(10), MonteCarlo::new(4000, 1)).unwrap();
        assert!(est.agrees_with_value(20.0, 4.0), "{est:?}");
        let zero = mc_prediction_error(|y| DVector::zeros(y.len()), &null_model(10), MonteCarlo::new(4000, 2)).unwrap();
        assert!(zero.agrees_with_value(10.0, 4.0), "{zero:?}");
    }

    #[test]
    fn oracle_constant_rule_error() {
        let theta0 = DVector::from_fn(8, |i, _| i as f64 - 3.0);
        let model = GaussianModel::homoskedastic(theta0.clone(), 1.5).unwrap();
        let est = mc_prediction_error(move |_| theta0.clone(), &model, MonteCarlo::new(4000, 3)).unwrap();
        assert!(est.agrees_with_value(8.0 * 2.25, 4.0), "{est:?}");
    }

    #[test]
    fn df_of_simple_rules() {
        let model = null_model(10);
        let id = mc_df(|y| y.clone(), &model, MonteCarlo::new(4000, 4)).unwrap();
        assert!(id.agrees_with_value(10.0, 4.0), "{id:?}");
        let zero = mc_df(|y| DVector::zeros(y.len()), &model, MonteCarlo::new(100, 5)).unwrap();
        assert_eq!(zero.mean, 0.0);
        let mut basis = DMatrix::<f64>::zeros(10, 3);
        for j in 0..3 {
            basis[(j, j)] = 1.0;
        }
        let proj = crate::linalg::Projector::from_orthonormal(basis);
        let p = mc_df(move |y| proj.apply(y), &model, MonteCarlo::new(4000, 6)).unwrap();
        assert!(p.agrees_with_value(3.0, 4.0), "{p:?}");
        let c = mc_df_centered(|y| y * 0.5, &model, MonteCarlo::new(4000, 7)).unwrap();
        assert!(c.agrees_with_value(5.0, 4.0), "{c:?}");
    }

    #[test]
    fn err_minus_risk_is_noise_level() {
        let theta0 = DVector::from_fn(6, |i, _| (i as f64).sin() * 2.0);
        let model = GaussianModel::homoskedastic(theta0, 1.0).unwrap();
        let rule = |y: &DVector<f64>| y * 0.7;
        // same seed, same Y draws: paired comparison
        let err = mc_prediction_error(rule, &model, MonteCarlo::new(5000, 9)).unwrap();
        let risk = mc_risk(rule, &model, MonteCarlo::new(5000, 9)).unwrap();
        let diff = McEstimate { mean: err.mean - risk.mean, std_error: err.std_error.hypot(risk.std_error), reps: 5000 };
        assert!(diff.agrees_with_value(6.0, 4.0), "{diff:?}");
    }

    #[test]
    fn too_few_reps() {
        assert!(mc_df(|y| y.clone(), &null_model(2), MonteCarlo::new(1, 0)).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let model = null_model(5);
        let a = mc_df(|y| y * 0.3, &model, MonteCarlo::new(300, 12)).unwrap();
        let b = mc_df(|y| y * 0.3, &model, MonteCarlo::new(300, 12).sequential()).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}

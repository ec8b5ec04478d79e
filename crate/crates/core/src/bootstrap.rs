//! Bootstrap estimates of excess degrees of freedom and df.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{contract, domain, Result};
use crate::exec::{stream, Execution};
use crate::family::{tune_by_sure, EstimatorFamily};
use crate::montecarlo::{EdfMethod, EdfReport, McEstimate};

/// How bootstrap data `Y*` are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    /// `N(θ̂_ŝ(Y), σ²I)`.
    Parametric,
    /// `N(Y, cσ²I)` with `0 < c ≤ 1`.
    BigModel { c: f64 },
    /// `θ̂_ŝ(Y)` plus residuals `Y − θ̂_ŝ(Y)` resampled uniformly with replacement.
    Residual,
}

impl Sampler {
    pub fn method(self) -> EdfMethod {
        match self {
            Sampler::Parametric => EdfMethod::BootstrapParametric,
            Sampler::BigModel { .. } => EdfMethod::BootstrapBigModel,
            Sampler::Residual => EdfMethod::BootstrapResidual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub b: usize,
    pub sampler: Sampler,
    pub seed: u64,
    pub exec: Execution,
}

impl BootstrapConfig {
    pub fn new(b: usize, sampler: Sampler, seed: u64) -> Self {
        Self { b, sampler, seed, exec: Execution::default() }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(contract(format!("bootstrap needs B ≥ 2, got {}", self.b)));
        }
        if let Sampler::BigModel { c } = self.sampler {
            if !(c > 0.0 && c <= 1.0) {
                return Err(domain(format!("big-model variance factor must lie in (0, 1], got {c}")));
            }
        }
        Ok(())
    }
}

/// Draws one bootstrap data vector.
///
/// The residual sampler ignores `noise_draw` entirely.
fn draw<R: Rng>(
    sampler: Sampler,
    y: &DVector<f64>,
    theta_hat: &DVector<f64>,
    noise_draw: impl Fn(&mut R) -> DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    match sampler {
        Sampler::Parametric => theta_hat + noise_draw(rng),
        Sampler::BigModel { c } => y + noise_draw(rng) * c.sqrt(),
        Sampler::Residual => {
            let resid = y - theta_hat;
            let n = y.len();
            DVector::from_fn(n, |i, _| theta_hat[i] + resid[rng.random_range(0..n)])
        }
    }
}

/// All three bootstrap estimates from one set of draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapEstimates {
    /// First term minus second: the excess df estimate.
    pub edf: EdfReport,
    /// `(1/B)∑_b ∑ᵢ θ̂ᵢ(Y*ᵇ)(Y*ᵇᵢ − Ȳ*ᵢ)/σ²`.
    pub df: EdfReport,
    /// `(1/B)∑_b d̂f_{ŝ(Y*ᵇ)}(Y*ᵇ)`.
    pub naive_df: EdfReport,
}

const TAG_BOOT: u64 = 11;

/// Runs the bootstrap for the SURE-tuned rule of `family` at data `y`.
pub fn bootstrap_estimates<F>(family: &F, y: &DVector<f64>, cfg: &BootstrapConfig) -> Result<BootstrapEstimates>
where
    F: EstimatorFamily + ?Sized,
{
    cfg.validate()?;
    let fit = tune_by_sure(family, y)?;
    let noise = family.noise();
    let n = y.len();
    let draws = cfg.exec.map(cfg.b, |b| -> Result<(DVector<f64>, DVector<f64>, f64)> {
        let mut rng = stream(cfg.seed, &[TAG_BOOT], b as u64);
        let y_star = draw(cfg.sampler, y, &fit.theta_hat, |r| noise.draw(n, r), &mut rng);
        let f = tune_by_sure(family, &y_star)?;
        Ok((y_star, f.theta_hat, f.naive_df_at_shat))
    });
    let draws: Vec<_> = draws.into_iter().collect::<Result<_>>()?;
    // second pass: the across-replication mean of Y*
    let mut y_bar = DVector::zeros(n);
    for (ys, _, _) in &draws {
        y_bar += ys;
    }
    y_bar /= draws.len() as f64;
    let cov: Vec<f64> = draws.iter().map(|(ys, th, _)| noise.df_inner(th, &(ys - &y_bar))).collect();
    let naive: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let diff: Vec<f64> = cov.iter().zip(&naive).map(|(c, d)| c - d).collect();
    let method = cfg.sampler.method();
    Ok(BootstrapEstimates {
        edf: EdfReport::from_estimate(method, McEstimate::from_samples(&diff)),
        df: EdfReport::from_estimate(method, McEstimate::from_samples(&cov)),
        naive_df: EdfReport::from_estimate(method, McEstimate::from_samples(&naive)),
    })
}

pub fn bootstrap_edf<F: EstimatorFamily + ?Sized>(family: &F, y: &DVector<f64>, cfg: &BootstrapConfig) -> Result<EdfReport> {
    Ok(bootstrap_estimates(family, y, cfg)?.edf)
}

/// The covariance term alone; known to undershoot in high dimensions.
pub fn bootstrap_df<F: EstimatorFamily + ?Sized>(family: &F, y: &DVector<f64>, cfg: &BootstrapConfig) -> Result<EdfReport> {
    Ok(bootstrap_estimates(family, y, cfg)?.df)
}

/// Minimized SURE plus the bootstrap excess optimism.
pub fn corrected_error_estimate<F>(family: &F, y: &DVector<f64>, cfg: &BootstrapConfig) -> Result<f64>
where
    F: EstimatorFamily + ?Sized,
{
    let fit = tune_by_sure(family, y)?;
    let edf = bootstrap_edf(family, y, cfg)?;
    Ok(fit.sure_min + family.noise().optimism_scale() * edf.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Pinned, Tuning};
    use crate::shrinkage::ShrinkMeans;
    use crate::subset::{CpFamily, SubsetCollection};
    use nalgebra::DMatrix;

    fn y_example() -> DVector<f64> {
        DVector::from_fn(20, |i, _| ((i * 37 % 11) as f64 - 5.0) * 0.4)
    }

    #[test]
    fn singleton_domain_gives_zero_edf() {
        let coll = SubsetCollection::new(DMatrix::identity(20, 3), vec![vec![0, 1]]).unwrap();
        let fam = CpFamily::new(coll, 1.0).unwrap();
        let est = bootstrap_estimates(&fam, &y_example(), &BootstrapConfig::new(400, Sampler::Parametric, 3)).unwrap();
        assert!(est.edf.value.abs() <= 4.0 * est.edf.std_error, "{:?}", est.edf);
        assert_eq!(est.naive_df.value, 2.0);
        let y = y_example();
        let plain = crate::family::tune_by_sure(&fam, &y).unwrap().sure_min;
        let corrected = corrected_error_estimate(&fam, &y, &BootstrapConfig::new(400, Sampler::Parametric, 3)).unwrap();
        assert!((corrected - plain).abs() <= 2.0 * 4.0 * est.edf.std_error);
    }

    #[test]
    fn df_of_fixed_rules() {
        let y = y_example();
        let id = Pinned::new(ShrinkMeans::new(20, 1.0).unwrap(), Tuning::Value(0.0)).unwrap();
        let df = bootstrap_df(&id, &y, &BootstrapConfig::new(2000, Sampler::Parametric, 5)).unwrap();
        assert!((df.value - 20.0).abs() <= 4.0 * df.std_error + 0.5, "{df:?}");
        let half = Pinned::new(ShrinkMeans::new(20, 1.0).unwrap(), Tuning::Value(1.0)).unwrap();
        let df = bootstrap_df(&half, &y, &BootstrapConfig::new(2000, Sampler::Parametric, 6)).unwrap();
        assert!((df.value - 10.0).abs() <= 4.0 * df.std_error + 0.25, "{df:?}");
    }

    #[test]
    fn config_validation_and_determinism() {
        let fam = ShrinkMeans::new(20, 1.0).unwrap();
        let y = y_example();
        assert!(bootstrap_edf(&fam, &y, &BootstrapConfig::new(1, Sampler::Parametric, 0)).is_err());
        assert!(bootstrap_edf(&fam, &y, &BootstrapConfig::new(10, Sampler::BigModel { c: 1.5 }, 0)).is_err());
        assert!(bootstrap_edf(&fam, &y, &BootstrapConfig::new(10, Sampler::BigModel { c: 0.0 }, 0)).is_err());
        for sampler in [Sampler::Parametric, Sampler::BigModel { c: 0.5 }, Sampler::Residual] {
            let a = bootstrap_edf(&fam, &y, &BootstrapConfig::new(50, sampler, 9)).unwrap();
            let b = bootstrap_edf(&fam, &y, &BootstrapConfig::new(50, sampler, 9).with_exec(Execution::Sequential))
                .unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits());
            assert_eq!(a.method, sampler.method());
        }
    }

    #[test]
    fn residual_draws_reuse_residual_values() {
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let theta = DVector::from_vec(vec![0.5, 0.5, 0.5]);
        let mut rng = stream(1, &[], 0);
        let ys = draw(Sampler::Residual, &y, &theta, |_| panic!("noise must not be drawn"), &mut rng);
        for v in ys.iter() {
            assert!([1.0, 2.0, 4.0].contains(v));
        }
    }
}

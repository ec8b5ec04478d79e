//! Tunable estimator families and the SURE criterion.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{contract, domain, Result};
use crate::model::NoiseLevel;

/// A tuning parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    /// Finite value of a continuous tuning parameter.
    Value(f64),
    /// `s = +∞`; a legitimate minimizer for shrinkage families (estimate 0).
    Infinite,
    /// Index into a discrete tuning set.
    Label(usize),
}

impl Tuning {
    /// Numeric value of a continuous tuning parameter (`+∞` included).
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Tuning::Value(v) => Some(v),
            Tuning::Infinite => Some(f64::INFINITY),
            Tuning::Label(_) => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Tuning::Value(_))
    }
}

impl std::fmt::Display for Tuning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tuning::Value(v) => write!(f, "{v}"),
            Tuning::Infinite => write!(f, "inf"),
            Tuning::Label(i) => write!(f, "#{i}"),
        }
    }
}

/// The set of admissible tuning values.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningDomain {
    /// `[lo, hi]`; `hi = +∞` admits [`Tuning::Infinite`].
    Interval { lo: f64, hi: f64 },
    Discrete(Vec<String>),
}

impl TuningDomain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo <= hi) || lo.is_infinite() {
            return Err(domain(format!("empty or negative tuning interval [{lo}, {hi}]")));
        }
        Ok(Self::Interval { lo, hi })
    }

    pub fn discrete(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(domain("discrete tuning set is empty"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(domain("discrete tuning labels are not unique"));
        }
        Ok(Self::Discrete(labels))
    }

    pub fn contains(&self, s: Tuning) -> bool {
        match (self, s) {
            (TuningDomain::Interval { lo, hi }, Tuning::Value(v)) => v >= *lo && v <= *hi,
            (TuningDomain::Interval { hi, .. }, Tuning::Infinite) => hi.is_infinite(),
            (TuningDomain::Discrete(labels), Tuning::Label(i)) => i < labels.len(),
            _ => false,
        }
    }

    /// A random member of the domain, used for probing minimizers.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Tuning {
        match self {
            TuningDomain::Discrete(labels) => Tuning::Label(rng.random_range(0..labels.len())),
            TuningDomain::Interval { lo, hi } => {
                if hi.is_infinite() && rng.random_bool(0.05) {
                    return Tuning::Infinite;
                }
                let span = if hi.is_finite() { hi - lo } else { 1e4 };
                // log-uniform offsets cover small and large scales
                let u: f64 = rng.random_range(-8.0..span.max(1e-300).log10());
                let v = (lo + 10f64.powf(u)).min(*hi);
                if rng.random_bool(0.05) {
                    Tuning::Value(*lo)
                } else {
                    Tuning::Value(v)
                }
            }
        }
    }
}

/// Outcome of minimizing SURE over a family at one data vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedFit {
    pub s_hat: Tuning,
    pub theta_hat: DVector<f64>,
    pub sure_min: f64,
    pub naive_df_at_shat: f64,
    /// More than one local minimum of SURE was located (continuous searches only).
    pub multimodal: bool,
}

impl TunedFit {
    /// Evaluates the family at `s` and packages the result.
    pub fn evaluate<F: EstimatorFamily + ?Sized>(family: &F, s: Tuning, y: &DVector<f64>) -> Result<Self> {
        let theta_hat = family.estimate(s, y)?;
        let naive_df_at_shat = family.naive_df(s, y)?;
        let sure_min = sure_from_parts(family.noise(), y, &theta_hat, naive_df_at_shat);
        Ok(Self { s_hat: s, theta_hat, sure_min, naive_df_at_shat, multimodal: false })
    }
}

/// A family `{θ̂_s : s ∈ S}` together with an unbiased df estimate for each member.
///
/// Families are immutable after construction and shareable across threads.
pub trait EstimatorFamily: Send + Sync {
    fn name(&self) -> String;

    /// Length of the data vector.
    fn dim(&self) -> usize;

    fn noise(&self) -> &NoiseLevel;

    fn domain(&self) -> TuningDomain;

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// Unbiased estimate of the degrees of freedom of `θ̂_s` for fixed `s`.
    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64>;

    /// Exact (or documented numeric) global minimizer of SURE at `y`.
    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit>;

    /// Validates `s` and `y` against the family.
    fn check(&self, s: Tuning, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(contract(format!("data has length {}, family expects {}", y.len(), self.dim())));
        }
        if !self.domain().contains(s) {
            return Err(domain(format!("tuning value {s} outside the domain of {}", self.name())));
        }
        Ok(())
    }
}

pub(crate) fn sure_from_parts(noise: &NoiseLevel, y: &DVector<f64>, theta: &DVector<f64>, df: f64) -> f64 {
    noise.error_metric(&(y - theta)) + noise.optimism_scale() * df
}

/// SURE at tuning value `s`: `‖Y − θ̂_s(Y)‖² + 2σ² d̂f_s(Y)`, or the variance-scaled
/// residual plus `2 d̂f_s(Y)` under heteroskedastic noise.
pub fn sure<F: EstimatorFamily + ?Sized>(family: &F, s: Tuning, y: &DVector<f64>) -> Result<f64> {
    family.check(s, y)?;
    let theta = family.estimate(s, y)?;
    let df = family.naive_df(s, y)?;
    Ok(sure_from_parts(family.noise(), y, &theta, df))
}

/// The SURE-tuned fit `θ̂_ŝ(Y)(Y)`.
pub fn tune_by_sure<F: EstimatorFamily + ?Sized>(family: &F, y: &DVector<f64>) -> Result<TunedFit> {
    if y.len() != family.dim() {
        return Err(contract(format!("data has length {}, family expects {}", y.len(), family.dim())));
    }
    family.minimize_sure(y)
}

/// A family restricted to a single tuning value: no selection takes place.
#[derive(Debug, Clone)]
pub struct Pinned<F> {
    inner: F,
    s: Tuning,
}

impl<F: EstimatorFamily> Pinned<F> {
    pub fn new(inner: F, s: Tuning) -> Result<Self> {
        if !inner.domain().contains(s) {
            return Err(domain(format!("cannot pin {} at {s}", inner.name())));
        }
        Ok(Self { inner, s })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn value(&self) -> Tuning {
        self.s
    }

    fn resolve(&self, s: Tuning) -> Result<Tuning> {
        if s == Tuning::Label(0) || s == self.s {
            Ok(self.s)
        } else {
            Err(domain(format!("{s} is not the pinned value {}", self.s)))
        }
    }
}

impl<F: EstimatorFamily> EstimatorFamily for Pinned<F> {
    fn name(&self) -> String {
        format!("{}@{}", self.inner.name(), self.s)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn noise(&self) -> &NoiseLevel {
        self.inner.noise()
    }

    fn domain(&self) -> TuningDomain {
        TuningDomain::Discrete(vec![self.s.to_string()])
    }

    fn check(&self, s: Tuning, y: &DVector<f64>) -> Result<()> {
        self.resolve(s)?;
        self.inner.check(self.s, y)
    }

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner.estimate(self.resolve(s)?, y)
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.inner.naive_df(self.resolve(s)?, y)
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        TunedFit::evaluate(&self.inner, self.s, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_membership() {
        let d = TuningDomain::interval(0.0, f64::INFINITY).unwrap();
        assert!(d.contains(Tuning::Value(0.0)));
        assert!(d.contains(Tuning::Infinite));
        assert!(!d.contains(Tuning::Value(-1.0)));
        assert!(!d.contains(Tuning::Label(0)));
        let b = TuningDomain::interval(0.0, 1.0).unwrap();
        assert!(!b.contains(Tuning::Infinite));
        assert!(TuningDomain::interval(2.0, 1.0).is_err());
        assert!(TuningDomain::interval(-1.0, 1.0).is_err());
        assert!(TuningDomain::discrete(vec![]).is_err());
        assert!(TuningDomain::discrete(vec!["a".into(), "a".into()]).is_err());
        let disc = TuningDomain::discrete(vec!["a".into(), "b".into()]).unwrap();
        assert!(disc.contains(Tuning::Label(1)));
        assert!(!disc.contains(Tuning::Label(2)));
    }
}

//! The Gaussian data model `Y ~ N(θ₀, Σ)` with known, diagonal noise.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, domain, Result};

/// Known noise scale: one standard deviation for all coordinates, or one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLevel {
    Homoskedastic(f64),
    Heteroskedastic(Vec<f64>),
}

impl NoiseLevel {
    pub fn homoskedastic(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("noise sd must be positive and finite, got {sigma}")));
        }
        Ok(Self::Homoskedastic(sigma))
    }

    pub fn heteroskedastic(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(contract("heteroskedastic noise needs at least one sd"));
        }
        if let Some(bad) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(domain(format!("noise sds must be positive and finite, got {bad}")));
        }
        Ok(Self::Heteroskedastic(sigmas))
    }

    /// Standard deviation of coordinate `i`.
    pub fn sd(&self, i: usize) -> f64 {
        match self {
            NoiseLevel::Homoskedastic(s) => *s,
            NoiseLevel::Heteroskedastic(v) => v[i],
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        let s = self.sd(i);
        s * s
    }

    /// Checks that this noise level can describe vectors of length `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            NoiseLevel::Heteroskedastic(v) if v.len() != n => Err(contract(format!(
                "{} noise sds for a vector of length {n}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Squared error in the model's natural metric: `‖a‖²` for homoskedastic
    /// noise, `∑ aᵢ²/σᵢ²` for heteroskedastic noise.
    pub fn error_metric(&self, a: &DVector<f64>) -> f64 {
        match self {
            NoiseLevel::Homoskedastic(_) => a.norm_squared(),
            NoiseLevel::Heteroskedastic(v) => {
                a.iter().zip(v).map(|(x, s)| x * x / (s * s)).sum()
            }
        }
    }

    /// `∑ aᵢ bᵢ / σᵢ²` (`aᵀb / σ²` when homoskedastic).
    pub fn df_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            NoiseLevel::Homoskedastic(s) => a.dot(b) / (s * s),
            NoiseLevel::Heteroskedastic(v) => {
                a.iter().zip(b.iter()).zip(v).map(|((x, y), s)| x * y / (s * s)).sum()
            }
        }
    }

    /// Multiplier on the degrees of freedom in the optimism: `2σ²` for
    /// homoskedastic error, 2 for the variance-scaled heteroskedastic error.
    pub fn optimism_scale(&self) -> f64 {
        match self {
            NoiseLevel::Homoskedastic(s) => 2.0 * s * s,
            NoiseLevel::Heteroskedastic(_) => 2.0,
        }
    }

    /// Draws a mean-zero noise vector of length `n`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let z: f64 = rng.sample(StandardNormal);
            z * self.sd(i)
        })
    }
}

/// Data-generating law `Y ~ N(θ₀, diag(σᵢ²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    theta0: DVector<f64>,
    noise: NoiseLevel,
}

impl GaussianModel {
    pub fn new(theta0: DVector<f64>, noise: NoiseLevel) -> Result<Self> {
        if theta0.is_empty() {
            return Err(contract("mean vector must have length at least 1"));
        }
        noise.check_dim(theta0.len())?;
        Ok(Self { theta0, noise })
    }

    pub fn homoskedastic(theta0: DVector<f64>, sigma: f64) -> Result<Self> {
        Self::new(theta0, NoiseLevel::homoskedastic(sigma)?)
    }

    pub fn heteroskedastic(theta0: DVector<f64>, sigmas: Vec<f64>) -> Result<Self> {
        Self::new(theta0, NoiseLevel::heteroskedastic(sigmas)?)
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    pub fn noise(&self) -> &NoiseLevel {
        &self.noise
    }

    /// One observation from the model.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.theta0 + self.noise.draw(self.dim(), rng)
    }

    /// `∑ σᵢ² / σᵢ²`-scaled irreducible error: `nσ²` (homoskedastic) or `n` (scaled).
    pub fn irreducible_error(&self) -> f64 {
        match &self.noise {
            NoiseLevel::Homoskedastic(s) => self.dim() as f64 * s * s,
            NoiseLevel::Heteroskedastic(_) => self.dim() as f64,
        }
    }
}

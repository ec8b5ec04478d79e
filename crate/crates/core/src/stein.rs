//! Stein divergences and excess df by implicit differentiation of the SURE surface.
//!
//! For a parent map `Θ̂(Y, s)` and surface `G(Y, s)` whose minimizer `ŝ(Y)` is
//! smooth, the tuned estimate `Θ̂(Y, ŝ(Y))` has divergence
//! `∑ ∂Θ̂ᵢ/∂Yᵢ − (∂²G/∂s²)⁻¹ ∑ (∂Θ̂ᵢ/∂s)(∂²G/∂Yᵢ∂s)`; the second sum is the
//! excess df contributed by tuning. The heteroskedastic shrinkage family and
//! its ridge reduction live here too.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, domain, Error, Result};
use crate::family::{EstimatorFamily, TunedFit, Tuning, TuningDomain};
use crate::linalg::{Projector, RANK_TOL};
use crate::model::NoiseLevel;
use crate::special::golden_section;

/// `∑ᵢ ∂ruleᵢ/∂Yᵢ` by central differences with step `1e-5·σ`.
pub fn numeric_divergence<R>(rule: R, y: &DVector<f64>, sigma: f64) -> f64
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h = 1e-5 * sigma;
    let mut yp = y.clone();
    let mut total = 0.0;
    for i in 0..y.len() {
        yp[i] = y[i] + h;
        let up = rule(&yp)[i];
        yp[i] = y[i] - h;
        let down = rule(&yp)[i];
        yp[i] = y[i];
        total += (up - down) / (2.0 * h);
    }
    total
}

fn step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

/// Central-difference `∂Θ̂/∂s`.
pub fn numeric_dtheta_ds<H: SmoothFamilyHooks + ?Sized>(hooks: &H, y: &DVector<f64>, s: f64) -> DVector<f64> {
    let h = step(s);
    (hooks.theta(y, s + h) - hooks.theta(y, s - h)) / (2.0 * h)
}

/// Central-difference `∂G/∂s`.
pub fn numeric_dg_ds<H: SmoothFamilyHooks + ?Sized>(hooks: &H, y: &DVector<f64>, s: f64) -> f64 {
    let h = step(s);
    (hooks.g(y, s + h) - hooks.g(y, s - h)) / (2.0 * h)
}

/// Central difference of `∂G/∂s` in `s`.
pub fn numeric_d2g_ds2<H: SmoothFamilyHooks + ?Sized>(hooks: &H, y: &DVector<f64>, s: f64) -> f64 {
    let h = step(s);
    (hooks.dg_ds(y, s + h) - hooks.dg_ds(y, s - h)) / (2.0 * h)
}

/// Central differences of `∂G/∂s` in each `Yᵢ`.
pub fn numeric_d2g_dyds<H: SmoothFamilyHooks + ?Sized>(hooks: &H, y: &DVector<f64>, s: f64) -> DVector<f64> {
    let mut yp = y.clone();
    DVector::from_fn(y.len(), |i, _| {
        let h = step(y[i]);
        yp[i] = y[i] + h;
        let up = hooks.dg_ds(&yp, s);
        yp[i] = y[i] - h;
        let down = hooks.dg_ds(&yp, s);
        yp[i] = y[i];
        (up - down) / (2.0 * h)
    })
}

/// Parent map and SURE surface of a smoothly tuned family.
///
/// Only `theta` and `g` are required; derivatives default to central
/// differences with step `1e-5·(1 + |v|)`.
pub trait SmoothFamilyHooks {
    fn theta(&self, y: &DVector<f64>, s: f64) -> DVector<f64>;

    fn g(&self, y: &DVector<f64>, s: f64) -> f64;

    fn dtheta_ds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        numeric_dtheta_ds(self, y, s)
    }

    fn dg_ds(&self, y: &DVector<f64>, s: f64) -> f64 {
        numeric_dg_ds(self, y, s)
    }

    fn d2g_ds2(&self, y: &DVector<f64>, s: f64) -> f64 {
        numeric_d2g_ds2(self, y, s)
    }

    fn d2g_dyds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        numeric_d2g_dyds(self, y, s)
    }
}

/// Relative stationarity tolerance: `|∂G/∂s|·(1+s) ≤ STATIONARITY_TOL·(1+|G|)`.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// `−(∂²G/∂s²)⁻¹ ∑ᵢ (∂Θ̂ᵢ/∂s)(∂²G/∂Yᵢ∂s)` at `(Y, ŝ)`.
///
/// The caller vouches for smoothness and uniqueness of the minimizer near `Y`;
/// this checks that `ŝ` is a stationary point with positive curvature.
pub fn edf_implicit_diff<H: SmoothFamilyHooks + ?Sized>(hooks: &H, y: &DVector<f64>, s_hat: f64) -> Result<f64> {
    if !(s_hat.is_finite() && s_hat >= 0.0) {
        return Err(domain(format!("implicit differentiation needs a finite interior ŝ, got {s_hat}")));
    }
    let gradient = hooks.dg_ds(y, s_hat);
    let tolerance = STATIONARITY_TOL * (1.0 + hooks.g(y, s_hat).abs()) / (1.0 + s_hat);
    if gradient.abs() > tolerance {
        return Err(Error::Stationarity { s: s_hat, gradient, tolerance });
    }
    let curvature = hooks.d2g_ds2(y, s_hat);
    if !(curvature > 0.0) {
        return Err(Error::Curvature { s: s_hat, curvature });
    }
    Ok(-hooks.dtheta_ds(y, s_hat).dot(&hooks.d2g_dyds(y, s_hat)) / curvature)
}

/// Closed-form hooks for `Y/(1+s)` with `G = ‖Y‖²s²/(1+s)² + 2σ²n/(1+s)`.
#[derive(Debug, Clone, Copy)]
pub struct ShrinkMeansHooks {
    pub sigma: f64,
}

impl SmoothFamilyHooks for ShrinkMeansHooks {
    fn theta(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        y / (1.0 + s)
    }

    fn g(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        y.norm_squared() * s * s / (a * a) + 2.0 * self.sigma.powi(2) * y.len() as f64 / a
    }

    fn dtheta_ds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        -y / (1.0 + s).powi(2)
    }

    fn dg_ds(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        2.0 * y.norm_squared() * s / a.powi(3) - 2.0 * self.sigma.powi(2) * y.len() as f64 / (a * a)
    }

    fn d2g_ds2(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        y.norm_squared() * (2.0 - 4.0 * s) / a.powi(4) + 4.0 * self.sigma.powi(2) * y.len() as f64 / a.powi(3)
    }

    fn d2g_dyds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        y * (4.0 * s / (1.0 + s).powi(3))
    }
}

/// Closed-form hooks for `P_X Y/(1+s)`.
#[derive(Debug, Clone)]
pub struct ShrinkRegressionHooks {
    pub projector: Projector,
    pub sigma: f64,
}

impl SmoothFamilyHooks for ShrinkRegressionHooks {
    fn theta(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        self.projector.apply(y) / (1.0 + s)
    }

    fn g(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        let p2 = self.projector.norm_squared(y);
        (y.norm_squared() - p2).max(0.0) + p2 * s * s / (a * a)
            + 2.0 * self.sigma.powi(2) * self.projector.rank() as f64 / a
    }

    fn dtheta_ds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        -self.projector.apply(y) / (1.0 + s).powi(2)
    }

    fn dg_ds(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        let r = self.projector.rank() as f64;
        2.0 * self.projector.norm_squared(y) * s / a.powi(3) - 2.0 * self.sigma.powi(2) * r / (a * a)
    }

    fn d2g_ds2(&self, y: &DVector<f64>, s: f64) -> f64 {
        let a = 1.0 + s;
        let r = self.projector.rank() as f64;
        self.projector.norm_squared(y) * (2.0 - 4.0 * s) / a.powi(4) + 4.0 * self.sigma.powi(2) * r / a.powi(3)
    }

    fn d2g_dyds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        self.projector.apply(y) * (4.0 * s / (1.0 + s).powi(3))
    }
}

/// Closed-form hooks for `Yᵢ/(1+σᵢ²s)` with the variance-scaled SURE surface
/// `G = ∑ Yᵢ²σᵢ²s²/(1+σᵢ²s)² + 2∑ 1/(1+σᵢ²s)`.
#[derive(Debug, Clone)]
pub struct HeteroShrinkHooks {
    pub sigmas: Vec<f64>,
}

impl HeteroShrinkHooks {
    fn terms(&self, y: &DVector<f64>, s: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        // (Yᵢ, σᵢ², 1 + σᵢ²s)
        let ys: Vec<f64> = y.iter().copied().collect();
        ys.into_iter().zip(&self.sigmas).map(move |(yi, sd)| {
            let v = sd * sd;
            (yi, v, 1.0 + v * s)
        })
    }
}

impl SmoothFamilyHooks for HeteroShrinkHooks {
    fn theta(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        DVector::from_iterator(y.len(), self.terms(y, s).map(|(yi, _, a)| yi / a))
    }

    fn g(&self, y: &DVector<f64>, s: f64) -> f64 {
        self.terms(y, s).map(|(yi, v, a)| yi * yi * v * s * s / (a * a) + 2.0 / a).sum()
    }

    fn dtheta_ds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        DVector::from_iterator(y.len(), self.terms(y, s).map(|(yi, v, a)| -yi * v / (a * a)))
    }

    fn dg_ds(&self, y: &DVector<f64>, s: f64) -> f64 {
        self.terms(y, s).map(|(yi, v, a)| 2.0 * v * (yi * yi * s / a.powi(3) - 1.0 / (a * a))).sum()
    }

    fn d2g_ds2(&self, y: &DVector<f64>, s: f64) -> f64 {
        self.terms(y, s)
            .map(|(yi, v, a)| 2.0 * yi * yi * v * (1.0 - 2.0 * v * s) / a.powi(4) + 4.0 * v * v / a.powi(3))
            .sum()
    }

    fn d2g_dyds(&self, y: &DVector<f64>, s: f64) -> DVector<f64> {
        DVector::from_iterator(y.len(), self.terms(y, s).map(|(yi, v, a)| 4.0 * yi * v * s / a.powi(3)))
    }
}

/// Excess optimism of SURE-tuned heteroskedastic shrinkage in variance-scaled
/// units: `∑ 4Yᵢ²σᵢ⁴ŝ/(1+σᵢ²ŝ)⁵` over
/// `∑ σᵢ²/(1+σᵢ²ŝ)² · (Yᵢ² − 4Yᵢ²σᵢ²ŝ/(1+σᵢ²ŝ) + 3Yᵢ²σᵢ⁴ŝ²/(1+σᵢ²ŝ)² + 2σᵢ²/(1+σᵢ²ŝ))`.
///
/// Equals twice [`edf_implicit_diff`] on [`HeteroShrinkHooks`].
pub fn exopt_hetero_shrink(y: &DVector<f64>, sigmas: &[f64], s_hat: f64) -> Result<f64> {
    if y.len() != sigmas.len() {
        return Err(contract("data and noise levels differ in length"));
    }
    if !(s_hat.is_finite() && s_hat >= 0.0) {
        return Err(domain(format!("ŝ must be finite and nonnegative, got {s_hat}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&yi, &sd) in y.iter().zip(sigmas) {
        let v = sd * sd;
        let a = 1.0 + v * s_hat;
        let y2 = yi * yi;
        num += 4.0 * y2 * v * v * s_hat / a.powi(5);
        den += v / (a * a) * (y2 - 4.0 * y2 * v * s_hat / a + 3.0 * y2 * v * v * s_hat * s_hat / (a * a) + 2.0 * v / a);
    }
    if !(den > 0.0) {
        return Err(Error::Curvature { s: s_hat, curvature: den });
    }
    Ok(num / den)
}

/// `θ̂_{s,i} = Yᵢ/(1+σᵢ²s)`, `s ∈ [0, ∞]`, under heteroskedastic noise.
#[derive(Debug, Clone)]
pub struct HeteroShrink {
    hooks: HeteroShrinkHooks,
    noise: NoiseLevel,
}

impl HeteroShrink {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        let noise = NoiseLevel::heteroskedastic(sigmas.clone())?;
        Ok(Self { hooks: HeteroShrinkHooks { sigmas }, noise })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.hooks.sigmas
    }

    pub fn hooks(&self) -> &HeteroShrinkHooks {
        &self.hooks
    }

    /// `G(Y, +∞) = ∑ Yᵢ²/σᵢ²`.
    pub fn sure_at_infinity(&self, y: &DVector<f64>) -> f64 {
        y.iter().zip(&self.hooks.sigmas).map(|(yi, sd)| (yi / sd).powi(2)).sum()
    }
}

impl EstimatorFamily for HeteroShrink {
    fn name(&self) -> String {
        "hetero-shrink".into()
    }

    fn dim(&self) -> usize {
        self.hooks.sigmas.len()
    }

    fn noise(&self) -> &NoiseLevel {
        &self.noise
    }

    fn domain(&self) -> TuningDomain {
        TuningDomain::Interval { lo: 0.0, hi: f64::INFINITY }
    }

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(s, y)?;
        Ok(match s {
            Tuning::Value(v) => self.hooks.theta(y, v),
            _ => DVector::zeros(y.len()),
        })
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.check(s, y)?;
        Ok(match s {
            Tuning::Value(v) => self.hooks.sigmas.iter().map(|sd| 1.0 / (1.0 + sd * sd * v)).sum(),
            _ => 0.0,
        })
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        let (s, local_minima) = self.search(y);
        let mut fit = TunedFit::evaluate(self, s, y)?;
        fit.multimodal = local_minima > 1;
        Ok(fit)
    }
}

/// Points of the multi-start grid.
pub const HETERO_GRID_POINTS: usize = 64;

impl HeteroShrink {
    /// Global minimizer of the SURE surface and the number of local minima found.
    fn search(&self, y: &DVector<f64>) -> (Tuning, usize) {
        let g_inf = self.sure_at_infinity(y);
        if g_inf == 0.0 {
            return (Tuning::Infinite, 1);
        }
        let vars: Vec<f64> = self.hooks.sigmas.iter().map(|s| s * s).collect();
        let vmax = vars.iter().copied().fold(0.0, f64::max);
        let vmin = vars.iter().copied().fold(f64::INFINITY, f64::min);
        let (lo, hi) = ((1e-6 / vmax).ln(), (1e8 / vmin).ln());
        let grid: Vec<f64> =
            (0..HETERO_GRID_POINTS).map(|k| (lo + (hi - lo) * k as f64 / (HETERO_GRID_POINTS - 1) as f64).exp()).collect();
        let vals: Vec<f64> = grid.iter().map(|&s| self.hooks.g(y, s)).collect();
        let g0 = self.hooks.g(y, 0.0);

        let mut minima: Vec<(f64, f64)> = Vec::new();
        let last = grid.len() - 1;
        for k in 0..=last {
            let left = if k == 0 { g0 } else { vals[k - 1] };
            let right = if k == last { g_inf } else { vals[k + 1] };
            if vals[k] <= left && vals[k] <= right {
                let a = if k == 0 { 0.0 } else { grid[k - 1] };
                let b = if k == last { grid[k] * 1e3 } else { grid[k + 1] };
                let s = self.refine(y, a, b);
                minima.push((s, self.hooks.g(y, s)));
            }
        }
        let tail_min = vals[last] > g_inf;
        let count = minima.len() + usize::from(tail_min);
        // lowest SURE wins; among equal values the smaller s
        let best = minima.iter().copied().fold(None, |acc: Option<(f64, f64)>, m| match acc {
            Some(b) if b.1 <= m.1 => Some(b),
            _ => Some(m),
        });
        match best {
            Some((s, v)) if v < g_inf => (Tuning::Value(s), count.max(1)),
            _ => (Tuning::Infinite, count.max(1)),
        }
    }

    /// Golden section on `log(1+s)` over `[a, b]`, then bisection on `∂G/∂s`.
    fn refine(&self, y: &DVector<f64>, a: f64, b: f64) -> f64 {
        let u = golden_section(|u| self.hooks.g(y, u.exp_m1()), a.ln_1p(), b.ln_1p(), 1e-10);
        let s = u.exp_m1();
        let (mut lo, mut hi) = (a, b);
        let d = |t: f64| self.hooks.dg_ds(y, t);
        // shrink to a sign-change bracket around s when one exists
        let (dl, dh) = (d(lo), d(hi));
        if dl < 0.0 && dh > 0.0 {
            if d(s) < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if d(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cand = 0.5 * (lo + hi);
            if self.hooks.g(y, cand) <= self.hooks.g(y, s) {
                return cand;
            }
        }
        s
    }
}

/// SURE-tuned heteroskedastic shrinkage.
pub fn tune_hetero_shrink(y: &DVector<f64>, sigmas: &[f64]) -> Result<TunedFit> {
    let fam = HeteroShrink::new(sigmas.to_vec())?;
    crate::family::tune_by_sure(&fam, y)
}

/// Ridge regression written as heteroskedastic shrinkage of rotated data.
///
/// With `X = UDVᵀ` (rank-`r` thin SVD), `W = D⁻¹UᵀY` has independent
/// coordinates with sds `σ/dᵢ`, and shrinking them by `1/(1+(σ/dᵢ)²s)` gives the
/// ridge fit with penalty `σ²s`.
#[derive(Debug, Clone)]
pub struct RidgeRotation {
    u: DMatrix<f64>,
    d: DVector<f64>,
    v: DMatrix<f64>,
    pub w: DVector<f64>,
    pub family: HeteroShrink,
    sigma: f64,
}

pub fn ridge_as_hetero(x: &DMatrix<f64>, y: &DVector<f64>, sigma: f64) -> Result<RidgeRotation> {
    if x.nrows() != y.len() {
        return Err(contract("response length does not match the design"));
    }
    if !(sigma > 0.0) {
        return Err(domain("sigma must be positive"));
    }
    let svd = x.clone().svd(true, true);
    let (u_full, vt_full) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let dmax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * dmax && dmax > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(domain("design has rank zero"));
    }
    let u = DMatrix::from_fn(x.nrows(), keep.len(), |i, k| u_full[(i, keep[k])]);
    let v = DMatrix::from_fn(x.ncols(), keep.len(), |j, k| vt_full[(keep[k], j)]);
    let d = DVector::from_iterator(keep.len(), keep.iter().map(|&i| svd.singular_values[i]));
    let w = u.tr_mul(y).component_div(&d);
    let family = HeteroShrink::new(d.iter().map(|di| sigma / di).collect())?;
    Ok(RidgeRotation { u, d, v, w, family, sigma })
}

impl RidgeRotation {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.d
    }

    /// Ridge penalty `λ = σ²s` matching shrinkage level `s` of the rotated family.
    pub fn penalty(&self, s: f64) -> f64 {
        self.sigma * self.sigma * s
    }

    pub fn alpha(&self, s: Tuning) -> Result<DVector<f64>> {
        self.family.estimate(s, &self.w)
    }

    /// `β̂ = V α̂`.
    pub fn coefficients(&self, s: Tuning) -> Result<DVector<f64>> {
        Ok(&self.v * self.alpha(s)?)
    }

    /// `Xβ̂ = U D α̂`.
    pub fn fitted(&self, s: Tuning) -> Result<DVector<f64>> {
        Ok(&self.u * self.alpha(s)?.component_mul(&self.d))
    }
}

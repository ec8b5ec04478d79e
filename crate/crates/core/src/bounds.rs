//! Numeric evaluation of excess-df bounds and the quantities behind them.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, domain, Result};
use crate::exec::{stream, Execution};
use crate::montecarlo::McEstimate;
use crate::special::{golden_section, ln_gamma};

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(contract("collection of subset sizes is empty"));
    }
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(2/(1−δ), log(1/δ)/(1−δ) − 1)`: the multipliers of `log|S|` and `p_max`
/// in the simplified bound.
pub fn simplified_constants(delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    Ok((2.0 / (1.0 - delta), (1.0 / delta).ln() / (1.0 - delta) - 1.0))
}

/// `(2/(1−δ)) log ∑_s (δe^{1−δ})^{−p_s/2}`, an upper bound on
/// `E[max_s (W_s − p_s)]` for `W_s ~ χ²_{p_s}` with arbitrary dependence.
pub fn chi_sq_max_bound(sizes: &[usize], delta: f64) -> Result<f64> {
    check_sizes(sizes)?;
    check_delta(delta)?;
    let log_base = delta.ln() + 1.0 - delta;
    let lse = log_sum_exp(sizes.iter().map(|&p| if p == 0 { 0.0 } else { -0.5 * p as f64 * log_base }));
    Ok(2.0 / (1.0 - delta) * lse)
}

/// `(2/(1−δ)) log|S| + p_max (log(1/δ)/(1−δ) − 1)`.
pub fn edf_upper_bound_simplified(sizes: &[usize], delta: f64) -> Result<f64> {
    check_sizes(sizes)?;
    let (a, b) = simplified_constants(delta)?;
    let p_max = *sizes.iter().max().expect("nonempty") as f64;
    let c = if p_max == 0.0 { 0.0 } else { p_max * b };
    Ok(a * (sizes.len() as f64).ln() + c)
}

/// The tighter, unsimplified form; same as [`chi_sq_max_bound`].
pub fn edf_upper_bound_tight(sizes: &[usize], delta: f64) -> Result<f64> {
    chi_sq_max_bound(sizes, delta)
}

/// `δ ∈ (0, 1)` minimizing the simplified bound for `|S|` models of size at most `p_max`.
pub fn optimal_delta(card: usize, p_max: usize) -> Result<(f64, f64)> {
    if card == 0 {
        return Err(contract("collection is empty"));
    }
    let f = |d: f64| {
        let (a, b) = simplified_constants(d).expect("in range");
        a * (card as f64).ln() + p_max as f64 * b
    };
    let d = golden_section(f, 1e-12, 1.0 - 1e-12, 1e-13);
    Ok((d, f(d)))
}

/// Simplified bound at the best `δ`, relative to an oracle risk (in units of σ²).
/// Tends to zero when `log|S|` and `p_max` are both small relative to the risk.
pub fn edf_to_risk_ratio(card: usize, p_max: usize, oracle_risk: f64) -> Result<f64> {
    if !(oracle_risk > 0.0) {
        return Err(domain("oracle risk must be positive"));
    }
    Ok(optimal_delta(card, p_max)?.1 / oracle_risk)
}

/// `log` of the surface area `2π^{d/2} r^{d−1}/Γ(d/2)` of the sphere of radius `r` in `ℝᵈ`.
pub fn ln_sphere_area(d: usize, r: f64) -> f64 {
    let d = d as f64;
    2f64.ln() + 0.5 * d * PI.ln() + (d - 1.0) * r.ln() - ln_gamma(0.5 * d)
}

/// Gaussian surface area of the origin-centered ball:
/// `r^{d−1} e^{−r²/2} / (2^{d/2−1} Γ(d/2))`.
pub fn gaussian_surface_area_origin(d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(domain("radius must be positive"));
    }
    let df = d as f64;
    Ok(((df - 1.0) * r.ln() - 0.5 * r * r - (0.5 * df - 1.0) * 2f64.ln() - ln_gamma(0.5 * df)).exp())
}

/// Default number of sphere directions for off-center surface areas.
pub const SPHERE_DIRECTIONS: usize = 100_000;

/// Gaussian surface area of a ball with reported Monte Carlo error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceArea {
    pub value: f64,
    pub std_error: f64,
    /// True when computed by sphere Monte Carlo.
    pub approximate: bool,
}

/// Sphere Monte Carlo estimate of `∫_{∂B(c,r)} φ_d dH^{d−1}`: the sphere area
/// times the mean density over uniform directions, drawn in antithetic pairs.
pub fn sphere_mc_surface_area(center: &DVector<f64>, r: f64, directions: usize, seed: u64) -> Result<SurfaceArea> {
    let d = center.len();
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(domain("radius must be positive"));
    }
    let pairs = (directions / 2).max(2);
    let ln_area = ln_sphere_area(d, r);
    let ln_norm = -0.5 * d as f64 * (2.0 * PI).ln();
    let c2 = center.norm_squared();
    // density at c ± rω is exp(ln_norm − (‖c‖² + r² ± 2r cᵀω)/2)
    let base = ln_area + ln_norm - 0.5 * (c2 + r * r);
    let key = crate::exec::mix_seed(seed, &[d as u64, r.to_bits()]);
    let samples = Execution::Sequential.map(pairs, |k| {
        let mut rng = stream(key, &[], k as u64);
        let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        let dot: f64 = center.iter().zip(&w).map(|(c, x)| c * x).sum();
        0.5 * ((base - r * dot).exp() + (base + r * dot).exp())
    });
    let est = McEstimate::from_samples(&samples);
    Ok(SurfaceArea { value: est.mean, std_error: est.std_error, approximate: true })
}

/// `Λ_d(B_d(center, r))`: closed form at the origin, sphere Monte Carlo elsewhere.
pub fn gaussian_surface_area_ball(center: &DVector<f64>, r: f64, directions: usize, seed: u64) -> Result<SurfaceArea> {
    if center.iter().all(|&c| c == 0.0) {
        let value = gaussian_surface_area_origin(center.len(), r)?;
        return Ok(SurfaceArea { value, std_error: 0.0, approximate: false });
    }
    sphere_mc_surface_area(center, r, directions, seed)
}

/// Result of the circular-rotation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GasStations {
    /// Smallest valid rotation start.
    pub start: usize,
    /// Number of valid starts.
    pub multiplicity: usize,
}

/// Whether starting at `k` keeps every prefix of `q` terms at most `2q`.
pub fn rotation_is_valid(w: &[f64], k: usize) -> bool {
    let d = w.len();
    let tol = 1e-9 * (1.0 + 2.0 * d as f64);
    let mut sum = 0.0;
    (1..=d).all(|q| {
        sum += w[(k + q - 1) % d];
        sum <= 2.0 * q as f64 + tol
    })
}

/// Finds the rotations of `w` (nonnegative, summing to `2d`) whose prefix sums
/// of `q` terms never exceed `2q`.
///
/// The valid starts are where the running excess `∑_{j<k} (w_j − 2)` peaks.
pub fn gas_stations_rotation(w: &[f64]) -> Result<GasStations> {
    let d = w.len();
    if d == 0 {
        return Err(domain("empty vector"));
    }
    if w.iter().any(|&x| !(x >= 0.0)) {
        return Err(domain("entries must be nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if (total - 2.0 * d as f64).abs() > 1e-9 * (1.0 + 2.0 * d as f64) {
        return Err(domain(format!("entries sum to {total}, expected {}", 2 * d)));
    }
    let mut excess = Vec::with_capacity(d);
    let mut acc = 0.0;
    for &x in w {
        excess.push(acc);
        acc += x - 2.0;
    }
    let peak = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (1.0 + 2.0 * d as f64);
    let valid: Vec<usize> = (0..d).filter(|&k| excess[k] >= peak - tol).collect();
    Ok(GasStations { start: valid[0], multiplicity: valid.len() })
}

/// `√(2d)(1+1/d) Λ_d(B_d(0, √(2d)))`, written as `2(1+1/d) d^{d/2} e^{−d}/Γ(d/2)`.
pub fn nested_null_term(d: usize) -> f64 {
    let df = d as f64;
    2.0 * (1.0 + 1.0 / df) * (0.5 * df * df.ln() - df - ln_gamma(0.5 * df)).exp()
}

/// `∑_{d=1}^p √(2d)(1+1/d) Λ_d(B_d(0, √(2d)))`: excess df bound for nested
/// collections under a zero mean.
pub fn nested_null_edf_bound(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(domain("p must be at least 1"));
    }
    Ok((1..=p).map(nested_null_term).sum())
}

/// Two-part certificate that the nested null bound stays below 10 for every `p`.
///
/// Each term is first bounded via `x^{x−1/2}e^{−x}/Γ(x) ≤ 1/√(2π)` by
/// `(1/√π)(√d + 1/√d)(2/e)^{d/2}`; the two resulting series are summed to
/// `N` terms and their tails bounded by geometric series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCertificate {
    pub n_terms: usize,
    /// `(1/√π)∑_{d≤N} √d (2/e)^{d/2}` and its tail bound `(1/√π)∑_{d>N} d (2/e)^{d/2}`.
    pub first_sum: f64,
    pub first_tail: f64,
    /// `(1/√π)∑_{d≤N} (2/e)^{d/2}/√d` and its tail bound `(1/√π)∑_{d>N} (2/e)^{d/2}`.
    pub second_sum: f64,
    pub second_tail: f64,
}

impl TailCertificate {
    pub fn first_total(&self) -> f64 {
        self.first_sum + self.first_tail
    }

    pub fn second_total(&self) -> f64 {
        self.second_sum + self.second_tail
    }

    pub fn total(&self) -> f64 {
        self.first_total() + self.second_total()
    }
}

pub fn nested_null_tail_certificate(n_terms: usize) -> TailCertificate {
    let q = (2.0 / std::f64::consts::E).sqrt();
    let c = 1.0 / PI.sqrt();
    let mut first_sum = 0.0;
    let mut second_sum = 0.0;
    for d in 1..=n_terms {
        let g = q.powi(d as i32);
        first_sum += c * (d as f64).sqrt() * g;
        second_sum += c * g / (d as f64).sqrt();
    }
    let n1 = (n_terms + 1) as f64;
    let qn1 = q.powf(n1);
    // ∑_{d>N} d q^d = q^{N+1}/(1−q) · (N+1 + q/(1−q))
    let first_tail = c * qn1 / (1.0 - q) * (n1 + q / (1.0 - q));
    let second_tail = c * qn1 / (1.0 - q);
    TailCertificate { n_terms, first_sum, first_tail, second_sum, second_tail }
}

/// Surface-area bound with Monte Carlo error, for general means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxBound {
    pub value: f64,
    pub std_error: f64,
    pub approximate: bool,
}

/// `∑_{d=1}^p √(2d)(d+1) max_j Λ_d(B_d(μ_{(j+1):(j+d)}, √(2d)))` for nested
/// collections, with `μ = Vᵀθ₀/σ` in the sequential Gram–Schmidt basis.
///
/// The maximum runs over every window `j = 0..p−d` that fits in `μ`.
/// Off-center surface areas use sphere Monte Carlo with `directions` draws;
/// the reported error is that of the selected windows.
pub fn general_theta_bound(mu: &DVector<f64>, directions: usize, seed: u64) -> Result<ApproxBound> {
    let p = mu.len();
    if p == 0 {
        return Err(domain("μ must have at least one coordinate"));
    }
    let mut value = 0.0;
    let mut var = 0.0;
    let mut approximate = false;
    for d in 1..=p {
        let r = (2.0 * d as f64).sqrt();
        let mut best = SurfaceArea { value: f64::NEG_INFINITY, std_error: 0.0, approximate: false };
        for j in 0..=(p - d) {
            let center = mu.rows(j, d).into_owned();
            let a = gaussian_surface_area_ball(&center, r, directions, crate::exec::mix_seed(seed, &[d as u64, j as u64]))?;
            if a.value > best.value {
                best = a;
            }
        }
        let w = r * (d as f64 + 1.0);
        value += w * best.value;
        var += (w * best.std_error).powi(2);
        approximate |= best.approximate;
    }
    Ok(ApproxBound { value, std_error: var.sqrt(), approximate })
}

/// `√(2p) p(p+1)`, valid because no ball has Gaussian surface area above 1.
pub fn general_theta_loose_cap(p: usize) -> f64 {
    (2.0 * p as f64).sqrt() * (p * (p + 1)) as f64
}

/// Default number of draws for noncentral chi-square probabilities.
pub const CHI_SQ_DRAWS: usize = 100_000;

/// Monte Carlo `P(W > t)` (or `P(W < t)` when `upper` is false) for `W = ‖Z + c‖²`,
/// `Z ~ N(0, I_d)`. A zero-dimensional `W` is treated as satisfying the event.
fn noncentral_chi_sq_prob(c: &[f64], t: f64, upper: bool, draws: usize, seed: u64) -> McEstimate {
    if c.is_empty() {
        return McEstimate { mean: 1.0, std_error: 0.0, reps: 0 };
    }
    let hits = Execution::Sequential.map(draws, |k| {
        let mut rng = stream(seed, &[], k as u64);
        let w: f64 = c.iter().map(|ci| (ci + rng.sample::<f64, _>(StandardNormal)).powi(2)).sum();
        f64::from(if upper { w > t } else { w < t })
    });
    McEstimate::from_samples(&hits)
}

/// The alternate bound
/// `√2 ∑_{j<k} √(k−j) P(W_j(‖μ_{1:j}‖²) > 2(j−1)) P(W_{p−k}(‖μ_{(k+1):p}‖²) < 2(p−k)) Λ_{k−j}(B(μ_{(j+1):k}, √(2(k−j))))`
/// over model sizes `0 ≤ j < k ≤ p`, with Monte Carlo probabilities and surface areas.
pub fn general_theta_bound_alternate(mu: &DVector<f64>, draws: usize, seed: u64) -> Result<ApproxBound> {
    let p = mu.len();
    if p == 0 {
        return Err(domain("μ must have at least one coordinate"));
    }
    let m: Vec<f64> = mu.iter().copied().collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for j in 0..p {
        let head = noncentral_chi_sq_prob(&m[..j], 2.0 * (j as f64 - 1.0), true, draws, crate::exec::mix_seed(seed, &[1, j as u64]));
        for k in (j + 1)..=p {
            let tail = noncentral_chi_sq_prob(&m[k..], 2.0 * (p - k) as f64, false, draws, crate::exec::mix_seed(seed, &[2, k as u64]));
            let d = k - j;
            let center = DVector::from_column_slice(&m[j..k]);
            let area = gaussian_surface_area_ball(&center, (2.0 * d as f64).sqrt(), draws, crate::exec::mix_seed(seed, &[3, j as u64, k as u64]))?;
            let w = 2f64.sqrt() * (d as f64).sqrt();
            let term = w * head.mean * tail.mean * area.value;
            value += term;
            // first-order error propagation through the product
            let rel2 = |e: f64, s: f64| if e > 0.0 { (s / e).powi(2) } else { 0.0 };
            var += term * term
                * (rel2(head.mean, head.std_error) + rel2(tail.mean, tail.std_error) + rel2(area.value, area.std_error));
        }
    }
    Ok(ApproxBound { value, std_error: var.sqrt(), approximate: true })
}

/// `f(δ) = (2/(1−δ)) log(1 + (δe^{1−δ})^{−1/2})`; `p·f(δ)` bounds the search df of
/// best subset selection over all `2^p` subsets.
pub fn best_subset_objective(delta: f64) -> f64 {
    2.0 / (1.0 - delta) * (1.0 + (delta * (1.0 - delta).exp()).powf(-0.5)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSubsetConstant {
    pub delta: f64,
    /// `min_δ f(δ) ≈ 2.289`, the per-predictor search df bound.
    pub value: f64,
    /// Half the minimum, ≈ 1.145.
    pub half_value: f64,
}

pub fn best_subset_constant() -> BestSubsetConstant {
    let delta = golden_section(best_subset_objective, 1e-9, 1.0 - 1e-9, 1e-14);
    let value = best_subset_objective(delta);
    BestSubsetConstant { delta, value, half_value: 0.5 * value }
}

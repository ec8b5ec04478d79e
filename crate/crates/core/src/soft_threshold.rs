//! Soft thresholding tuned by SURE.
//!
//! The minimizer over `s ∈ [0, ∞]` is found exactly among the order
//! statistics `|Y|₍₁₎ ≥ … ≥ |Y|₍ₙ₎` and `0`. The plug-in df counts coordinates
//! with `|Yᵢ| > s` strictly, which makes SURE lower semicontinuous in `s` so
//! that its infimum is attained at one of those candidates.

use nalgebra::DVector;

use crate::error::{contract, Result};
use crate::family::{EstimatorFamily, TunedFit, Tuning, TuningDomain};
use crate::model::{GaussianModel, NoiseLevel};
use crate::montecarlo::{mc_df_paired, MonteCarlo, PairedDf};

/// `θ̂_{s,i} = sign(Yᵢ)(|Yᵢ| − s)₊`.
#[derive(Debug, Clone)]
pub struct SoftThreshold {
    n: usize,
    sigma: f64,
    noise: NoiseLevel,
}

impl SoftThreshold {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(contract("dimension must be at least 1"));
        }
        Ok(Self { n, sigma, noise: NoiseLevel::homoskedastic(sigma)? })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn threshold_value(s: Tuning) -> f64 {
    match s {
        Tuning::Value(v) => v,
        _ => f64::INFINITY,
    }
}

/// Soft thresholding of a scalar.
pub fn soft(y: f64, s: f64) -> f64 {
    y.signum() * (y.abs() - s).max(0.0)
}

/// `#{i : |Yᵢ| > s}`.
pub fn active_count(y: &DVector<f64>, s: f64) -> usize {
    y.iter().filter(|v| v.abs() > s).count()
}

impl EstimatorFamily for SoftThreshold {
    fn name(&self) -> String {
        "soft-threshold".into()
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
        let t = threshold_value(s);
        Ok(y.map(|v| soft(v, t)))
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.check(s, y)?;
        Ok(active_count(y, threshold_value(s)) as f64)
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        let t = candidate_minimizer(y, self.sigma).0;
        TunedFit::evaluate(self, Tuning::Value(t), y)
    }
}

/// Scans the candidates `|Y|₍ₖ₎`, `k = 1..n+1` (with `|Y|₍ₙ₊₁₎ = 0`), using
/// `SURE = (k−1)t² + ∑_{j≥k} |Y|²₍ⱼ₎ + 2σ² #{|Y| > t}` at `t = |Y|₍ₖ₎`.
/// Ties go to the larger threshold. Returns `(ŝ, SURE(ŝ))`.
pub fn candidate_minimizer(y: &DVector<f64>, sigma: f64) -> (f64, f64) {
    let mut a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    a.push(0.0);
    let n = y.len();
    // tail[k] = ∑_{j ≥ k} a_j²
    let mut tail = vec![0.0; n + 2];
    for k in (0..=n).rev() {
        tail[k] = tail[k + 1] + a[k] * a[k];
    }
    let two_s2 = 2.0 * sigma * sigma;
    let mut best = (f64::INFINITY, f64::INFINITY);
    let mut first_of_group = 0;
    for k in 0..=n {
        let t = a[k];
        if k > 0 && a[k] < a[k - 1] {
            first_of_group = k;
        }
        // coordinates before the tied group exceed t strictly
        let count = first_of_group.min(n);
        let value = k as f64 * t * t + tail[k] + two_s2 * count as f64;
        if value < best.1 {
            best = (t, value);
        }
    }
    best
}

/// SURE-tuned soft thresholding.
pub fn tune_soft_threshold(y: &DVector<f64>, sigma: f64) -> Result<TunedFit> {
    SoftThreshold::new(y.len(), sigma)?.minimize_sure(y)
}

/// A discontinuity of `t ↦ θ̂_{ŝ,i}` along a coordinate scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Midpoint of the grid cell containing the discontinuity.
    pub location: f64,
    /// Right limit minus left limit, oriented along increasing `t`.
    pub size: f64,
}

/// Relative size (in units of σ) above which a change counts as a jump.
pub const JUMP_TOL: f64 = 1e-6;

/// Scans coordinate `i` of the SURE-tuned soft-thresholding estimate over
/// `Yᵢ = t` for each `t` in the increasing `grid`, holding the other
/// coordinates of `y` fixed.
///
/// A jump is flagged in cell `[t_k, t_{k+1}]` when the tuned value at `t_{k+1}`
/// differs from what the selection at `t_k` would give at `t_{k+1}`. A
/// selection is the rank of the chosen order statistic of `|Y|` (rank `n+1`
/// for the zero threshold); order statistics move continuously with `t`, so
/// continuous movement of the estimate does not register. When several ranks
/// share the selected value, the continuation closest to the new value is used.
pub fn scan_jump_signs(y: &DVector<f64>, i: usize, grid: &[f64], sigma: f64) -> Result<Vec<Jump>> {
    if i >= y.len() {
        return Err(contract(format!("coordinate {i} out of range for n = {}", y.len())));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(contract("scan grid must be strictly increasing"));
    }
    let mut yt = y.clone();
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        yt[i] = t;
        let (s, _) = candidate_minimizer(&yt, sigma);
        let mut sorted: Vec<f64> = yt.iter().map(|v| v.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        // every rank holding the selected value, with rank n standing for zero
        let mut ranks: Vec<usize> = (0..sorted.len()).filter(|&r| sorted[r] == s).collect();
        if s == 0.0 {
            ranks.push(sorted.len());
        }
        states.push((s, ranks, sorted));
    }
    let tol = JUMP_TOL * sigma;
    let mut jumps = Vec::new();
    for k in 0..grid.len().saturating_sub(1) {
        let t = grid[k + 1];
        let (s_next, _, ref sorted_next) = states[k + 1];
        let now = soft(t, s_next);
        let delta = states[k]
            .1
            .iter()
            .map(|&r| now - soft(t, sorted_next.get(r).copied().unwrap_or(0.0)))
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .expect("selected value is a candidate");
        if delta.abs() > tol {
            jumps.push(Jump { location: 0.5 * (grid[k] + t), size: delta });
        }
    }
    Ok(jumps)
}

/// Monte Carlo df of the tuned rule next to the mean active count `#{|Yᵢ| > ŝ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfLowerBoundReport {
    pub paired: PairedDf,
    /// `df ≥ count − 4 SE` of the paired difference.
    pub holds: bool,
}

pub fn df_lower_bound_check(model: &GaussianModel, mc: MonteCarlo) -> Result<DfLowerBoundReport> {
    let sigma = match model.noise() {
        NoiseLevel::Homoskedastic(s) => *s,
        NoiseLevel::Heteroskedastic(_) => return Err(contract("soft thresholding needs homoskedastic noise")),
    };
    let paired = mc_df_paired(
        |y| {
            let (t, _) = candidate_minimizer(y, sigma);
            (y.map(|v| soft(v, t)), active_count(y, t) as f64)
        },
        model,
        mc,
    )?;
    let holds = paired.excess.mean >= -4.0 * paired.excess.std_error;
    Ok(DfLowerBoundReport { paired, holds })
}

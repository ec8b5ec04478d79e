//! Subset regression tuned by Mallows' Cp, and Lagrangian best subset selection.

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, domain, Error, Result};
use crate::family::{EstimatorFamily, TunedFit, Tuning, TuningDomain};
use crate::linalg::{least_squares, select_columns, sequential_basis, Projector};
use crate::model::{GaussianModel, NoiseLevel};
use crate::montecarlo::{ExactRisk, Oracle, OracleTuning};
use crate::special::{golden_section, std_normal_pdf};

/// Largest `p` for which all `2^p` projections are cached.
pub const ALL_SUBSETS_LIMIT: usize = 20;
/// Largest `p` for on-the-fly exhaustive best subset search.
pub const BEST_SUBSET_LIMIT: usize = 25;

/// A design matrix with a collection of column subsets and their projections.
#[derive(Debug, Clone)]
pub struct SubsetCollection {
    x: DMatrix<f64>,
    subsets: Vec<Vec<usize>>,
    projectors: Vec<Projector>,
    /// Member indices sorted by (rank, subset); SURE ties resolve to the earliest.
    tie_order: Vec<usize>,
    nested: bool,
}

impl SubsetCollection {
    /// Builds a collection from 0-based column index sets.
    pub fn new(x: DMatrix<f64>, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(contract("subset collection is empty"));
        }
        if x.nrows() == 0 {
            return Err(contract("design must have at least one row"));
        }
        let p = x.ncols();
        let mut normalized = Vec::with_capacity(subsets.len());
        for s in subsets {
            let mut s = s;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(contract(format!("subset {s:?} repeats a column")));
            }
            if let Some(&j) = s.iter().find(|&&j| j >= p) {
                return Err(contract(format!("column {j} out of range for p = {p}")));
            }
            normalized.push(s);
        }
        let mut seen = normalized.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != normalized.len() {
            return Err(contract("subsets are not unique"));
        }
        let projectors: Vec<Projector> =
            normalized.iter().map(|s| Projector::from_design(&select_columns(&x, s))).collect();
        let nested = is_chain(&normalized);
        let mut tie_order: Vec<usize> = (0..normalized.len()).collect();
        tie_order.sort_by(|&a, &b| {
            projectors[a].rank().cmp(&projectors[b].rank()).then_with(|| normalized[a].cmp(&normalized[b]))
        });
        Ok(Self { x, subsets: normalized, projectors, tie_order, nested })
    }

    /// Prefixes of `order` with the given lengths, e.g. lengths `0..=p` for a full chain.
    pub fn make_nested(x: DMatrix<f64>, order: &[usize], lengths: &[usize]) -> Result<Self> {
        let mut lengths = lengths.to_vec();
        lengths.sort_unstable();
        lengths.dedup();
        if let Some(&l) = lengths.iter().find(|&&l| l > order.len()) {
            return Err(contract(format!("prefix length {l} exceeds the ordering length {}", order.len())));
        }
        let subsets = lengths.iter().map(|&l| order[..l].to_vec()).collect();
        Self::new(x, subsets)
    }

    /// `{∅, {1}, {1,2}, …, {1..p}}`.
    pub fn full_chain(x: DMatrix<f64>) -> Result<Self> {
        let p = x.ncols();
        let order: Vec<usize> = (0..p).collect();
        let lengths: Vec<usize> = (0..=p).collect();
        Self::make_nested(x, &order, &lengths)
    }

    /// `{{1..p−1}, {1..p}}`.
    pub fn two_model(x: DMatrix<f64>) -> Result<Self> {
        let p = x.ncols();
        if p == 0 {
            return Err(contract("two-model collection needs p ≥ 1"));
        }
        let order: Vec<usize> = (0..p).collect();
        Self::make_nested(x, &order, &[p - 1, p])
    }

    /// All `2^p` subsets.
    pub fn all_subsets(x: DMatrix<f64>) -> Result<Self> {
        let p = x.ncols();
        if p > ALL_SUBSETS_LIMIT {
            return Err(Error::TooLarge { p, limit: ALL_SUBSETS_LIMIT });
        }
        let subsets = (0u64..1 << p).map(|mask| mask_to_subset(mask, p)).collect();
        Self::new(x, subsets)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn subset(&self, idx: usize) -> &[usize] {
        &self.subsets[idx]
    }

    /// `p_s`, taken as the numerical rank of `X_s`.
    pub fn size(&self, idx: usize) -> usize {
        self.projectors[idx].rank()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.projectors.iter().map(Projector::rank).collect()
    }

    pub fn projector(&self, idx: usize) -> &Projector {
        &self.projectors[idx]
    }

    pub fn is_nested(&self) -> bool {
        self.nested
    }

    pub fn find(&self, subset: &[usize]) -> Option<usize> {
        let mut s = subset.to_vec();
        s.sort_unstable();
        self.subsets.iter().position(|t| *t == s)
    }

    /// 1-based display label, e.g. `{1,3}`.
    pub fn label(&self, idx: usize) -> String {
        let inner: Vec<String> = self.subsets[idx].iter().map(|j| (j + 1).to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }

    fn check_member(&self, idx: usize) -> Result<()> {
        if idx >= self.len() {
            return Err(domain(format!("subset #{idx} is not in the collection")));
        }
        Ok(())
    }

    /// Index minimizing `‖Y − P_s Y‖² + penalty · p_s`; ties go to smaller `p_s`,
    /// then to the lexicographically smaller subset. Values within a relative
    /// `1e-12` count as tied so that rounding in the projections cannot break ties.
    pub fn penalized_argmin(&self, y: &DVector<f64>, penalty: f64) -> Result<(usize, f64)> {
        if y.len() != self.x.nrows() {
            return Err(contract(format!("response has length {}, design has {} rows", y.len(), self.x.nrows())));
        }
        let y2 = y.norm_squared();
        let mut best = (usize::MAX, f64::INFINITY);
        for &i in &self.tie_order {
            let crit = (y2 - self.projectors[i].norm_squared(y)).max(0.0) + penalty * self.size(i) as f64;
            if beats(crit, best.1) {
                best = (i, crit);
            }
        }
        Ok(best)
    }
}

/// Relative margin below which two criterion values count as tied.
const TIE_TOL: f64 = 1e-12;

fn beats(candidate: f64, incumbent: f64) -> bool {
    if incumbent.is_infinite() {
        return candidate < incumbent;
    }
    candidate < incumbent - TIE_TOL * (1.0 + incumbent.abs())
}

fn mask_to_subset(mask: u64, p: usize) -> Vec<usize> {
    (0..p).filter(|j| mask >> j & 1 == 1).collect()
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|j| b.binary_search(j).is_ok())
}

fn is_chain(subsets: &[Vec<usize>]) -> bool {
    let mut by_size: Vec<&Vec<usize>> = subsets.iter().collect();
    by_size.sort_by_key(|s| s.len());
    by_size.windows(2).all(|w| is_subset(w[0], w[1]))
}

/// `‖Y − P_s Y‖² + 2σ² p_s`.
pub fn cp_criterion(coll: &SubsetCollection, idx: usize, y: &DVector<f64>, sigma: f64) -> Result<f64> {
    coll.check_member(idx)?;
    if y.len() != coll.x.nrows() {
        return Err(contract("response length does not match the design"));
    }
    let resid = y - coll.projectors[idx].apply(y);
    Ok(resid.norm_squared() + 2.0 * sigma * sigma * coll.size(idx) as f64)
}

/// Subset regression `θ̂_s(Y) = P_s Y` over a collection, tuned by Cp.
#[derive(Debug, Clone)]
pub struct CpFamily {
    coll: SubsetCollection,
    sigma: f64,
    noise: NoiseLevel,
}

impl CpFamily {
    pub fn new(coll: SubsetCollection, sigma: f64) -> Result<Self> {
        Ok(Self { coll, sigma, noise: NoiseLevel::homoskedastic(sigma)? })
    }

    pub fn collection(&self) -> &SubsetCollection {
        &self.coll
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn index(&self, s: Tuning) -> Result<usize> {
        match s {
            Tuning::Label(i) if i < self.coll.len() => Ok(i),
            other => Err(domain(format!("{other} is not a subset label of this collection"))),
        }
    }
}

impl EstimatorFamily for CpFamily {
    fn name(&self) -> String {
        "subset-cp".into()
    }

    fn dim(&self) -> usize {
        self.coll.x.nrows()
    }

    fn noise(&self) -> &NoiseLevel {
        &self.noise
    }

    fn domain(&self) -> TuningDomain {
        TuningDomain::Discrete((0..self.coll.len()).map(|i| self.coll.label(i)).collect())
    }

    fn check(&self, s: Tuning, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim() {
            return Err(contract(format!("data has length {}, family expects {}", y.len(), self.dim())));
        }
        self.index(s).map(|_| ())
    }

    fn estimate(&self, s: Tuning, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(s, y)?;
        Ok(self.coll.projectors[self.index(s)?].apply(y))
    }

    fn naive_df(&self, s: Tuning, y: &DVector<f64>) -> Result<f64> {
        self.check(s, y)?;
        Ok(self.coll.size(self.index(s)?) as f64)
    }

    fn minimize_sure(&self, y: &DVector<f64>) -> Result<TunedFit> {
        let (idx, _) = self.coll.penalized_argmin(y, 2.0 * self.sigma * self.sigma)?;
        TunedFit::evaluate(self, Tuning::Label(idx), y)
    }
}

impl ExactRisk for CpFamily {
    /// Squared bias `‖(I − P_s)θ₀‖²` plus variance `σ² p_s`.
    fn risk_at(&self, s: Tuning, model: &GaussianModel) -> Result<f64> {
        let idx = self.index(s)?;
        let t = model.theta0();
        let bias2 = (t - self.coll.projectors[idx].apply(t)).norm_squared();
        let var = match model.noise() {
            NoiseLevel::Homoskedastic(sd) => sd * sd * self.coll.size(idx) as f64,
            NoiseLevel::Heteroskedastic(_) => return Err(contract("Cp risk needs homoskedastic noise")),
        };
        Ok(bias2 + var)
    }
}

impl OracleTuning for CpFamily {
    fn oracle(&self, model: &GaussianModel) -> Result<Oracle> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &self.coll.tie_order {
            let r = self.risk_at(Tuning::Label(i), model)?;
            if best.is_none_or(|(_, b)| beats(r, b)) {
                best = Some((i, r));
            }
        }
        let (i, risk) = best.expect("collection is nonempty");
        Ok(Oracle { s0: Tuning::Label(i), risk, err: model.irreducible_error() + risk })
    }
}

/// Cp-tuned subset regression over a collection.
pub fn tune_cp(coll: &SubsetCollection, y: &DVector<f64>, sigma: f64) -> Result<TunedFit> {
    CpFamily::new(coll.clone(), sigma)?.minimize_sure(y)
}

/// Unit direction `P⊥_{p−1} X_p / ‖P⊥_{p−1} X_p‖` separating the two nested models.
pub fn two_model_direction(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = x.ncols();
    if p == 0 {
        return Err(contract("design has no columns"));
    }
    let head = Projector::from_design(&x.columns(0, p - 1).into_owned());
    let last = x.column(p - 1).into_owned();
    let resid = &last - head.apply(&last);
    let norm = resid.norm();
    if norm <= crate::linalg::RANK_TOL * last.norm() || norm == 0.0 {
        return Err(domain("last column lies in the span of the others"));
    }
    Ok(resid / norm)
}

/// `√2 [φ(√2 − m) + φ(√2 + m)]`: excess df of Cp choosing between two nested models
/// whose mean offset along the separating direction is `m` noise units.
pub fn two_model_edf(m: f64) -> f64 {
    SQRT_2 * (std_normal_pdf(SQRT_2 - m) + std_normal_pdf(SQRT_2 + m))
}

/// Exact excess df for the two-model collection `{{1..p−1}, {1..p}}`.
pub fn edf_two_model_exact(x: &DMatrix<f64>, theta0: &DVector<f64>, sigma: f64) -> Result<f64> {
    if theta0.len() != x.nrows() {
        return Err(contract("mean length does not match the design"));
    }
    if !(sigma > 0.0) {
        return Err(domain("sigma must be positive"));
    }
    let v = two_model_direction(x)?;
    Ok(two_model_edf(v.dot(theta0) / sigma))
}

/// `(argmax_m, max_m)` of [`two_model_edf`].
pub fn two_model_edf_max() -> (f64, f64) {
    let m = golden_section(|m| -two_model_edf(m), 0.0, 5.0, 1e-12);
    (m, two_model_edf(m))
}

/// Coordinates `μ = Vᵀθ₀/σ` of the mean in the sequential Gram–Schmidt basis of `X`.
pub fn nested_mu(x: &DMatrix<f64>, theta0: &DVector<f64>, sigma: f64) -> Result<DVector<f64>> {
    if theta0.len() != x.nrows() {
        return Err(contract("mean length does not match the design"));
    }
    let v = sequential_basis(x)?;
    Ok(v.tr_mul(theta0) / sigma)
}

/// Winning subset and coefficients of `argmin ‖Y − Xβ‖² + λ‖β‖₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestSubsetFit {
    pub subset: Vec<usize>,
    /// Length `p`, zero off the subset.
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub criterion: f64,
}

/// Exhaustive Lagrangian best subset selection with projections cached up front.
#[derive(Debug, Clone)]
pub struct BestSubset {
    coll: SubsetCollection,
    lambda: f64,
}

impl BestSubset {
    pub fn new(x: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { coll: SubsetCollection::all_subsets(x)?, lambda })
    }

    pub fn collection(&self) -> &SubsetCollection {
        &self.coll
    }

    pub fn fit(&self, y: &DVector<f64>) -> Result<BestSubsetFit> {
        let (idx, criterion) = self.coll.penalized_argmin(y, self.lambda)?;
        finish_fit(&self.coll.x, self.coll.subset(idx).to_vec(), self.coll.projector(idx), y, criterion)
    }
}

fn finish_fit(
    x: &DMatrix<f64>,
    subset: Vec<usize>,
    proj: &Projector,
    y: &DVector<f64>,
    criterion: f64,
) -> Result<BestSubsetFit> {
    let coef = least_squares(&select_columns(x, &subset), y)?;
    let mut beta = DVector::zeros(x.ncols());
    for (k, &j) in subset.iter().enumerate() {
        beta[j] = coef[k];
    }
    Ok(BestSubsetFit { fitted: proj.apply(y), subset, beta, criterion })
}

/// Best subset selection `argmin ‖Y − Xβ‖² + λ‖β‖₀` by enumerating all `2^p` subsets.
///
/// Model size counts the rank of `X_s`, which equals `‖β‖₀` for designs in general
/// position. Ties follow the Cp rule.
pub fn best_subset_lagrangian(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<BestSubsetFit> {
    let p = x.ncols();
    if p > BEST_SUBSET_LIMIT {
        return Err(Error::TooLarge { p, limit: BEST_SUBSET_LIMIT });
    }
    if !(lambda >= 0.0) {
        return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    if y.len() != x.nrows() {
        return Err(contract("response length does not match the design"));
    }
    let y2 = y.norm_squared();
    let mut best: Option<(usize, Vec<usize>, Projector, f64)> = None;
    for mask in 0u64..1 << p {
        let s = mask_to_subset(mask, p);
        let proj = Projector::from_design(&select_columns(x, &s));
        let crit = (y2 - proj.norm_squared(y)).max(0.0) + lambda * proj.rank() as f64;
        let better = match &best {
            None => true,
            Some((r, t, _, c)) => {
                beats(crit, *c) || (!beats(*c, crit) && (proj.rank(), &s).cmp(&(*r, t)) == Ordering::Less)
            }
        };
        if better {
            best = Some((proj.rank(), s, proj, crit));
        }
    }
    let (_, subset, proj, crit) = best.expect("at least the empty subset");
    finish_fit(x, subset, &proj, y, crit)
}

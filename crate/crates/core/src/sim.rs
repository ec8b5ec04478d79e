//! Simulation harness for SURE-tuned shrinkage and soft-thresholding:
//! per-repetition edf, df and error estimates written as long-format CSV.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;

use crate::bootstrap::{bootstrap_estimates, BootstrapConfig, BootstrapEstimates, Sampler};
use crate::error::{contract, Error, Result};
use crate::exec::{mix_seed, stream, Execution};
use crate::family::{tune_by_sure, EstimatorFamily, Pinned, Tuning};
use crate::model::GaussianModel;
use crate::montecarlo::McEstimate;
use crate::shrinkage::{edf_unbiased_shrink, ShrinkMeans};
use crate::soft_threshold::SoftThreshold;
use crate::stein::{edf_implicit_diff, ShrinkMeansHooks};

/// Families the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyId {
    Shrinkage,
    SoftThreshold,
    /// Shrinkage pinned at `s = 1`: no selection, so every edf is zero.
    Singleton,
}

impl FamilyId {
    pub const ALL: [FamilyId; 3] = [FamilyId::Shrinkage, FamilyId::SoftThreshold, FamilyId::Singleton];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Shrinkage => "shrinkage",
            FamilyId::SoftThreshold => "soft-threshold",
            FamilyId::Singleton => "singleton",
        }
    }

    pub fn build(self, n: usize, sigma: f64) -> Result<Box<dyn EstimatorFamily>> {
        Ok(match self {
            FamilyId::Shrinkage => Box::new(ShrinkMeans::new(n, sigma)?),
            FamilyId::SoftThreshold => Box::new(SoftThreshold::new(n, sigma)?),
            FamilyId::Singleton => Box::new(Pinned::new(ShrinkMeans::new(n, sigma)?, Tuning::Value(1.0))?),
        })
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|f| f.name()).collect();
            format!("unknown family `{s}`; registered families: {}", names.join(", "))
        })
    }
}

/// Mean vectors used in the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanSetting {
    Null,
    /// `θ₀ᵢ = 4/√i`.
    WeakSparsity,
    /// `θ₀ᵢ = 4` for `i ≤ ⌊log n⌋`, zero after.
    StrongSparsity,
    /// The configured `custom_mean` vector.
    Custom,
}

impl MeanSetting {
    pub fn name(self) -> &'static str {
        match self {
            MeanSetting::Null => "null",
            MeanSetting::WeakSparsity => "weak_sparsity",
            MeanSetting::StrongSparsity => "strong_sparsity",
            MeanSetting::Custom => "custom",
        }
    }

    pub fn theta0(self, n: usize, custom: Option<&[f64]>) -> Result<DVector<f64>> {
        Ok(match self {
            MeanSetting::Null => DVector::zeros(n),
            MeanSetting::WeakSparsity => DVector::from_fn(n, |i, _| 4.0 / ((i + 1) as f64).sqrt()),
            MeanSetting::StrongSparsity => {
                let k = (n as f64).ln().floor() as usize;
                DVector::from_fn(n, |i, _| if i < k { 4.0 } else { 0.0 })
            }
            MeanSetting::Custom => {
                let v = custom.ok_or_else(|| contract("custom setting requested without custom_mean"))?;
                if v.len() != n {
                    return Err(contract(format!("custom_mean has length {}, sample size is {n}", v.len())));
                }
                DVector::from_column_slice(v)
            }
        })
    }
}

impl FromStr for MeanSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [MeanSetting::Null, MeanSetting::WeakSparsity, MeanSetting::StrongSparsity, MeanSetting::Custom]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mean setting `{s}`"))
    }
}

/// A full simulation design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub family: FamilyId,
    pub settings: Vec<MeanSetting>,
    pub custom_mean: Option<Vec<f64>>,
    pub sample_sizes: Vec<usize>,
    pub sigma: f64,
    pub outer_reps: usize,
    /// Bootstrap replications per outer repetition; 0 disables the bootstrap.
    pub bootstrap_b: usize,
    pub bootstrap_sampler: Sampler,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// `count` integers log-spaced between `lo` and `hi`, rounded.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect()
}

impl SimSpec {
    /// Full-scale design: ten sizes from 10 to 5000, σ = 1, 5000 repetitions, B = 1000.
    pub fn full(family: FamilyId) -> Self {
        Self {
            family,
            settings: vec![MeanSetting::Null, MeanSetting::WeakSparsity, MeanSetting::StrongSparsity],
            custom_mean: None,
            sample_sizes: log_spaced(10, 5000, 10),
            sigma: 1.0,
            outer_reps: 5000,
            bootstrap_b: 1000,
            bootstrap_sampler: Sampler::Parametric,
            seed: 1,
            output: None,
        }
    }

    /// Laptop-scale design: n ∈ {10, 50, 200}, 1000 repetitions, B = 200.
    pub fn desk(family: FamilyId) -> Self {
        Self { sample_sizes: vec![10, 50, 200], outer_reps: 1000, bootstrap_b: 200, ..Self::full(family) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(contract("sample sizes must be a nonempty list of positive integers"));
        }
        if self.settings.is_empty() {
            return Err(contract("no mean settings given"));
        }
        if self.outer_reps < 2 {
            return Err(contract(format!("outer_reps must be at least 2, got {}", self.outer_reps)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(contract(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.bootstrap_b == 1 {
            return Err(contract("bootstrap_b must be 0 (off) or at least 2"));
        }
        if self.settings.contains(&MeanSetting::Custom) {
            for &n in &self.sample_sizes {
                MeanSetting::Custom.theta0(n, self.custom_mean.as_deref())?;
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep the
    /// desk defaults for the given family.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut spec = Self::desk(FamilyId::Shrinkage);
        let mut family_seen = false;
        let mut boot_c = None;
        let mut sampler = "parametric".to_string();
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |message: String| Error::Config { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            match key {
                "family" => {
                    spec.family = value.parse().map_err(err)?;
                    family_seen = true;
                }
                "settings" => spec.settings = parse_list(value).map_err(err)?,
                "custom_mean" => spec.custom_mean = Some(parse_list(value).map_err(err)?),
                "sample_sizes" => spec.sample_sizes = parse_list(value).map_err(err)?,
                "sigma" => spec.sigma = parse_one(value).map_err(err)?,
                "outer_reps" => spec.outer_reps = parse_one(value).map_err(err)?,
                "bootstrap_b" => spec.bootstrap_b = parse_one(value).map_err(err)?,
                "bootstrap_sampler" => sampler = value.to_string(),
                "bootstrap_c" => boot_c = Some(parse_one::<f64>(value).map_err(err)?),
                "seed" => spec.seed = parse_one(value).map_err(err)?,
                "output" => spec.output = Some(PathBuf::from(value)),
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if !family_seen {
            return Err(Error::Config { line: 0, message: "missing required key `family`".into() });
        }
        spec.bootstrap_sampler = match (sampler.as_str(), boot_c) {
            ("parametric", None) => Sampler::Parametric,
            ("residual", None) => Sampler::Residual,
            ("bigmodel", c) => Sampler::BigModel { c: c.unwrap_or(1.0) },
            (other, None) => {
                return Err(Error::Config { line: 0, message: format!("unknown bootstrap_sampler `{other}`") })
            }
            (_, Some(_)) => {
                return Err(Error::Config { line: 0, message: "bootstrap_c only applies to the bigmodel sampler".into() })
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_one<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse_one(v.trim())).collect()
}

/// One long-format output row. `mean = None` marks a method that does not
/// apply to the family.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub n: usize,
    pub setting: String,
    pub method: String,
    pub quantity: String,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTable {
    pub rows: Vec<SimRow>,
}

pub const CSV_HEADER: [&str; 7] = ["n", "setting", "method", "quantity", "mean", "std_error", "reps"];

fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.11e}"),
        None => "NA".to_string(),
    }
}

impl SimTable {
    pub fn find(&self, n: usize, setting: &str, method: &str, quantity: &str) -> Option<&SimRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.setting == setting && r.method == method && r.quantity == quantity)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| contract(format!("writing CSV: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.setting.clone(),
                r.method.clone(),
                r.quantity.clone(),
                fmt_num(r.mean),
                fmt_num(r.std_error),
                r.reps.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| contract(format!("writing CSV: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
    }
}

struct RepOut {
    cov_term: f64,
    naive_df: f64,
    sure_min: f64,
    test_error: f64,
    unbiased_edf: Option<f64>,
    implicit_edf: Option<f64>,
    boot: Option<BootstrapEstimates>,
}

fn one_rep(
    spec: &SimSpec,
    family: &dyn EstimatorFamily,
    model: &GaussianModel,
    key: u64,
    rep: usize,
) -> Result<RepOut> {
    let mut rng = stream(key, &[], rep as u64);
    let y = model.draw(&mut rng);
    let y_star = model.draw(&mut rng);
    let fit = tune_by_sure(family, &y)?;
    let noise = model.noise();
    let (unbiased_edf, implicit_edf) = match spec.family {
        FamilyId::Shrinkage => {
            let implicit = match fit.s_hat {
                Tuning::Value(s) => edf_implicit_diff(&ShrinkMeansHooks { sigma: spec.sigma }, &y, s)?,
                // θ̂ is identically zero near Y
                _ => 0.0,
            };
            (Some(edf_unbiased_shrink(&fit)), Some(implicit))
        }
        FamilyId::Singleton => (Some(0.0), None),
        FamilyId::SoftThreshold => (None, None),
    };
    let boot = if spec.bootstrap_b >= 2 {
        let cfg = BootstrapConfig::new(spec.bootstrap_b, spec.bootstrap_sampler, mix_seed(key, &[rep as u64]))
            .with_exec(Execution::Sequential);
        Some(bootstrap_estimates(family, &y, &cfg)?)
    } else {
        None
    };
    Ok(RepOut {
        cov_term: noise.df_inner(&fit.theta_hat, &(&y - model.theta0())),
        naive_df: fit.naive_df_at_shat,
        sure_min: fit.sure_min,
        test_error: noise.error_metric(&(y_star - &fit.theta_hat)),
        unbiased_edf,
        implicit_edf,
        boot,
    })
}

/// Runs every (sample size, mean setting) cell of the design.
///
/// Outer repetitions run under `exec`; each repetition's bootstrap is
/// sequential on its own substream, so the table does not depend on `exec`.
pub fn run_simulation(spec: &SimSpec, exec: Execution) -> Result<SimTable> {
    spec.validate()?;
    let mut table = SimTable::default();
    let boot_tag = spec.bootstrap_sampler.method().tag().trim_start_matches("bootstrap_").to_string();
    for (ni, &n) in spec.sample_sizes.iter().enumerate() {
        let family = spec.family.build(n, spec.sigma)?;
        for (si, &setting) in spec.settings.iter().enumerate() {
            let model = GaussianModel::homoskedastic(setting.theta0(n, spec.custom_mean.as_deref())?, spec.sigma)?;
            let key = mix_seed(spec.seed, &[ni as u64, si as u64]);
            let outs: Vec<RepOut> = exec
                .map(spec.outer_reps, |rep| one_rep(spec, family.as_ref(), &model, key, rep))
                .into_iter()
                .collect::<Result<_>>()?;
            let scale = model.noise().optimism_scale();
            let mut push = |method: &str, quantity: &str, xs: Option<Vec<f64>>| {
                let est = xs.map(|v| McEstimate::from_samples(&v));
                table.rows.push(SimRow {
                    n,
                    setting: setting.name().to_string(),
                    method: method.to_string(),
                    quantity: quantity.to_string(),
                    mean: est.map(|e| e.mean),
                    std_error: est.map(|e| e.std_error),
                    reps: est.map_or(0, |e| e.reps),
                });
            };
            let col = |f: &dyn Fn(&RepOut) -> Option<f64>| -> Option<Vec<f64>> { outs.iter().map(f).collect() };
            let boot_col = |f: &dyn Fn(&BootstrapEstimates) -> f64| col(&|o| o.boot.as_ref().map(f));

            push("monte_carlo", "edf", col(&|o| Some(o.cov_term - o.naive_df)));
            push("unbiased", "edf", col(&|o| o.unbiased_edf));
            push("implicit_diff", "edf", col(&|o| o.implicit_edf));
            push(&format!("bootstrap_{boot_tag}"), "edf", boot_col(&|b| b.edf.value));
            push("observed", "edf", col(&|o| Some((o.test_error - o.sure_min) / scale)));

            push("monte_carlo", "df", col(&|o| Some(o.cov_term)));
            push("naive", "df", col(&|o| Some(o.naive_df)));
            push("unbiased", "df", col(&|o| o.unbiased_edf.map(|e| o.naive_df + e)));
            push(&format!("bootstrap_{boot_tag}"), "df", boot_col(&|b| b.df.value));
            push(&format!("naive_bootstrap_{boot_tag}"), "df", boot_col(&|b| b.naive_df.value));

            let errs: [(&str, Option<Vec<f64>>); 4] = [
                ("naive", col(&|o| Some(o.sure_min))),
                ("corrected_unbiased", col(&|o| o.unbiased_edf.map(|e| o.sure_min + scale * e))),
                (
                    &format!("corrected_bootstrap_{boot_tag}"),
                    col(&|o| o.boot.as_ref().map(|b| o.sure_min + scale * b.edf.value)),
                ),
                ("test", col(&|o| Some(o.test_error))),
            ];
            for (method, xs) in errs {
                let per_n = xs.as_ref().map(|v| v.iter().map(|x| x / n as f64).collect());
                push(method, "err", xs);
                push(method, "err_per_n", per_n);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke(family: FamilyId) -> SimSpec {
        SimSpec {
            sample_sizes: vec![8],
            settings: vec![MeanSetting::Null, MeanSetting::StrongSparsity],
            outer_reps: 40,
            bootstrap_b: 10,
            ..SimSpec::desk(family)
        }
    }

    #[test]
    fn presets() {
        assert_eq!(log_spaced(10, 5000, 10).len(), 10);
        assert_eq!(log_spaced(10, 5000, 10)[0], 10);
        assert_eq!(*log_spaced(10, 5000, 10).last().unwrap(), 5000);
        let p = SimSpec::full(FamilyId::Shrinkage);
        assert_eq!((p.outer_reps, p.bootstrap_b, p.sigma), (5000, 1000, 1.0));
        let d = SimSpec::desk(FamilyId::SoftThreshold);
        assert_eq!((d.sample_sizes.clone(), d.outer_reps, d.bootstrap_b), (vec![10, 50, 200], 1000, 200));
    }

    #[test]
    fn mean_settings() {
        let w = MeanSetting::WeakSparsity.theta0(4, None).unwrap();
        assert_eq!(w[0], 4.0);
        assert_eq!(w[3], 2.0);
        // ⌊log 20⌋ = 2
        let s = MeanSetting::StrongSparsity.theta0(20, None).unwrap();
        assert_eq!(s.iter().filter(|&&x| x == 4.0).count(), 2);
        assert!(MeanSetting::Custom.theta0(3, Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn config_parsing() {
        let text = "# demo\nfamily = soft-threshold\nsample_sizes = 10, 20\nsettings = null,custom\n\
                    custom_mean = 1,2,3,4,5,6,7,8,9,10\nouter_reps=5\nbootstrap_sampler = bigmodel\nbootstrap_c = 0.5\n";
        // custom_mean length must match every sample size
        match SimSpec::parse_config(text) {
            Err(Error::Contract(_)) => {}
            other => panic!("{other:?}"),
        }
        let ok = SimSpec::parse_config(&text.replace("10, 20", "10")).unwrap();
        assert_eq!(ok.family, FamilyId::SoftThreshold);
        assert_eq!(ok.bootstrap_sampler, Sampler::BigModel { c: 0.5 });
        assert_eq!(ok.outer_reps, 5);
        match SimSpec::parse_config("family = shrinkage\nsigma = abc\n") {
            Err(Error::Config { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match SimSpec::parse_config("family = lasso\n") {
            Err(Error::Config { line: 1, message }) => assert!(message.contains("soft-threshold")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(SimSpec::parse_config("sigma = 1\n"), Err(Error::Config { line: 0, .. })));
        assert!(matches!(SimSpec::parse_config("family = shrinkage\nfoo = 1\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(SimSpec::parse_config("family = shrinkage\noops\n"), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn skip_rows_for_soft_threshold() {
        let t = run_simulation(&smoke(FamilyId::SoftThreshold), Execution::Sequential).unwrap();
        let r = t.find(8, "null", "unbiased", "edf").unwrap();
        assert_eq!((r.mean, r.reps), (None, 0));
        assert!(t.find(8, "null", "bootstrap_parametric", "edf").unwrap().mean.is_some());
        assert!(t.to_csv_string().unwrap().contains(",NA,NA,0"));
    }

    #[test]
    fn shrinkage_implicit_matches_unbiased() {
        let t = run_simulation(&smoke(FamilyId::Shrinkage), Execution::Sequential).unwrap();
        for setting in ["null", "strong_sparsity"] {
            let a = t.find(8, setting, "unbiased", "edf").unwrap().mean.unwrap();
            let b = t.find(8, setting, "implicit_diff", "edf").unwrap().mean.unwrap();
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        let naive = t.find(8, "null", "naive", "err").unwrap().mean.unwrap();
        let per_n = t.find(8, "null", "naive", "err_per_n").unwrap().mean.unwrap();
        assert!((naive / 8.0 - per_n).abs() < 1e-12);
    }

    #[test]
    fn singleton_has_zero_edf() {
        let spec = SimSpec { outer_reps: 2, bootstrap_b: 0, ..smoke(FamilyId::Singleton) };
        let t = run_simulation(&spec, Execution::Sequential).unwrap();
        let unb = t.find(8, "null", "unbiased", "edf").unwrap();
        assert_eq!(unb.mean, Some(0.0));
        assert_eq!(unb.reps, 2);
        assert!(t.find(8, "null", "bootstrap_parametric", "edf").unwrap().mean.is_none());
    }

    #[test]
    fn csv_is_independent_of_execution() {
        let spec = smoke(FamilyId::Shrinkage);
        let a = run_simulation(&spec, Execution::Sequential).unwrap().to_csv_string().unwrap();
        let b = run_simulation(&spec, Execution::Parallel).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("n,setting,method,quantity,mean,std_error,reps\n"));
    }
}

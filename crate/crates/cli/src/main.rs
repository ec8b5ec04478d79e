use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use sure_edf::acceptance::{self, EXPECTED_FAILURES};
use sure_edf::bootstrap::{bootstrap_estimates, BootstrapConfig, Sampler};
use sure_edf::bounds;
use sure_edf::exec::stream;
use sure_edf::family::tune_by_sure;
use sure_edf::montecarlo::{mc_edf, MonteCarlo};
use sure_edf::shrinkage::{edf_unbiased_shrink, tune_shrink_means};
use sure_edf::sim::{run_simulation, FamilyId, MeanSetting, SimSpec};
use sure_edf::subset::two_model_edf;
use sure_edf::{Execution, GaussianModel};

#[derive(Parser)]
#[command(name = "sure-edf", version, about = "Excess degrees of freedom of SURE-tuned estimators")]
struct Cli {
    /// Base seed for every random stream [default: 1, or the design's `seed` key].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Run replication loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Write output to this file instead of stdout; for `simulate` it
    /// overrides the design's `output` key.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune a family by SURE at observed data.
    Tune {
        #[arg(long)]
        family: FamilyId,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// File of numbers separated by whitespace or commas; `#` starts a comment.
        #[arg(long)]
        data: PathBuf,
    },
    /// Estimate the excess degrees of freedom of a SURE-tuned family.
    Edf(EdfArgs),
    /// Run a simulation design and write its CSV table.
    Simulate {
        /// `key = value` design file.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in design, used with --family.
        #[arg(long, requires = "family")]
        preset: Option<Preset>,
        #[arg(long)]
        family: Option<FamilyId>,
    },
    /// Evaluate a theoretical bound.
    Bounds {
        #[command(subcommand)]
        which: BoundCommand,
    },
    /// Run the acceptance checks.
    Selfcheck {
        /// Run only these check numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Three sizes up to 200, 1000 repetitions, B = 200.
    Desk,
    /// Ten sizes up to 5000, 5000 repetitions, B = 1000 (long-running).
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    MonteCarlo,
    Unbiased,
    Bootstrap,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Parametric,
    Bigmodel,
    Residual,
}

#[derive(Args)]
struct EdfArgs {
    #[arg(long)]
    family: FamilyId,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Dimension of the simulated mean (ignored with --data).
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Mean vector for simulated data.
    #[arg(long, default_value = "null")]
    setting: MeanSetting,
    /// Monte Carlo repetitions.
    #[arg(long, default_value_t = 5000)]
    reps: usize,
    /// Bootstrap replications.
    #[arg(long, default_value_t = 1000)]
    b: usize,
    #[arg(long, value_enum, default_value = "parametric")]
    sampler: SamplerArg,
    /// Big-model variance factor.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Observed data for the unbiased and bootstrap methods; one draw from the
    /// simulated model is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundCommand {
    /// Excess df bound for nested collections at a zero mean.
    NestedNullEdf {
        #[arg(long)]
        p: usize,
    },
    /// Expected-maximum chi-square bound and the resulting edf bounds.
    ChiSqMax {
        /// Model sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// The two constants of the simplified bound at δ.
    Simplified {
        #[arg(long)]
        delta: f64,
    },
    /// Gaussian surface area of a ball.
    SurfaceArea {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: f64,
        /// Center of the ball, comma separated; the origin when absent.
        #[arg(long, value_delimiter = ',')]
        center: Vec<f64>,
        #[arg(long, default_value_t = bounds::SPHERE_DIRECTIONS)]
        directions: usize,
    },
    /// Valid rotations for a sequence with mean at most 2.
    GasStations {
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// The best-subset constant and its minimizing δ.
    BestSubsetConstant,
    /// Certificate that the nested null bound stays below 10.
    TailCertificate {
        #[arg(long, default_value_t = 100)]
        terms: usize,
    },
    /// Closed-form excess df of choosing between two nested models.
    TwoModelEdf {
        /// Signed standardized mean along the added direction.
        #[arg(long, allow_hyphen_values = true)]
        m: f64,
    },
    /// Nested bound at a general mean.
    GeneralTheta {
        /// Standardized mean in the Gram–Schmidt basis, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        mu: Vec<f64>,
        /// Use the pairwise form with chi-square probabilities.
        #[arg(long)]
        alternate: bool,
        #[arg(long, default_value_t = bounds::CHI_SQ_DRAWS)]
        draws: usize,
    },
    /// δ minimizing the simplified bound.
    OptimalDelta {
        #[arg(long)]
        card: usize,
        #[arg(long)]
        p_max: usize,
    },
}

fn read_data(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .with_context(|| format!("{}:{}: `{tok}` is not a number", path.display(), lineno + 1))?;
            if !v.is_finite() {
                bail!("{}:{}: non-finite value", path.display(), lineno + 1);
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        bail!("{} holds no data", path.display());
    }
    Ok(DVector::from_vec(values))
}

fn fmt_vec(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn tune(out: &mut impl Write, family: FamilyId, sigma: f64, data: &Path) -> Result<()> {
    let y = read_data(data)?;
    let fam = family.build(y.len(), sigma)?;
    let fit = tune_by_sure(fam.as_ref(), &y)?;
    writeln!(out, "family\t{family}")?;
    writeln!(out, "n\t{}", y.len())?;
    writeln!(out, "s_hat\t{}", fit.s_hat)?;
    writeln!(out, "sure\t{:.10}", fit.sure_min)?;
    writeln!(out, "naive_df\t{:.10}", fit.naive_df_at_shat)?;
    writeln!(out, "theta_hat\t{}", fmt_vec(&fit.theta_hat))?;
    Ok(())
}

fn edf(out: &mut impl Write, a: &EdfArgs, seed: u64, exec: Execution) -> Result<()> {
    let n = match &a.data {
        Some(_) if matches!(a.method, Method::MonteCarlo) => bail!("--data does not apply to the monte-carlo method"),
        _ => a.n,
    };
    let observed = |n: usize| -> Result<DVector<f64>> {
        match &a.data {
            Some(path) => read_data(path),
            None => {
                let model = GaussianModel::homoskedastic(a.setting.theta0(n, None)?, a.sigma)?;
                Ok(model.draw(&mut stream(seed, &[0xda7a], 0)))
            }
        }
    };
    let report = match a.method {
        Method::MonteCarlo => {
            let model = GaussianModel::homoskedastic(a.setting.theta0(n, None)?, a.sigma)?;
            let fam = a.family.build(n, a.sigma)?;
            mc_edf(fam.as_ref(), &model, MonteCarlo::new(a.reps, seed).with_exec(exec))?
        }
        Method::Unbiased => {
            if a.family != FamilyId::Shrinkage {
                bail!("the unbiased method is available for the shrinkage family only");
            }
            let y = observed(n)?;
            let fit = tune_shrink_means(&y, a.sigma)?;
            sure_edf::EdfReport {
                method: sure_edf::EdfMethod::AnalyticUnbiased,
                value: edf_unbiased_shrink(&fit),
                std_error: 0.0,
                reps: 0,
            }
        }
        Method::Bootstrap => {
            let y = observed(n)?;
            let fam = a.family.build(y.len(), a.sigma)?;
            let sampler = match a.sampler {
                SamplerArg::Parametric => Sampler::Parametric,
                SamplerArg::Bigmodel => Sampler::BigModel { c: a.c },
                SamplerArg::Residual => Sampler::Residual,
            };
            let cfg = BootstrapConfig::new(a.b, sampler, seed).with_exec(exec);
            bootstrap_estimates(fam.as_ref(), &y, &cfg)?.edf
        }
    };
    writeln!(out, "method\tvalue\tstd_error\treps")?;
    writeln!(out, "{}\t{:.10}\t{:.10}\t{}", report.method.tag(), report.value, report.std_error, report.reps)?;
    Ok(())
}

fn simulate(
    out: &mut impl Write,
    config: Option<&Path>,
    preset: Option<Preset>,
    family: Option<FamilyId>,
    dest: Option<&Path>,
    seed: Option<u64>,
    exec: Execution,
) -> Result<()> {
    let mut spec = match (config, preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimSpec::parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(p)) => {
            let family = family.context("--preset needs --family")?;
            match p {
                Preset::Desk => SimSpec::desk(family),
                Preset::Full => SimSpec::full(family),
            }
        }
        (None, None) => bail!("simulate needs --config or --preset"),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(d) = dest {
        spec.output = Some(d.to_path_buf());
    }
    let table = run_simulation(&spec, exec)?;
    match &spec.output {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            table.write_csv(io::BufWriter::new(file))?;
            writeln!(out, "wrote {} rows to {}", table.rows.len(), path.display())?;
        }
        None => table.write_csv(out)?,
    }
    Ok(())
}

fn bound(out: &mut impl Write, which: &BoundCommand, seed: u64) -> Result<()> {
    match which {
        BoundCommand::NestedNullEdf { p } => {
            let v = bounds::nested_null_edf_bound(*p)?;
            writeln!(out, "nested_null_edf_bound\t{v:.10}")?;
            writeln!(out, "below_10\t{}", v < 10.0)?;
        }
        BoundCommand::ChiSqMax { sizes, delta } => {
            writeln!(out, "chi_sq_max_bound\t{:.10}", bounds::chi_sq_max_bound(sizes, *delta)?)?;
            writeln!(out, "edf_upper_bound_simplified\t{:.10}", bounds::edf_upper_bound_simplified(sizes, *delta)?)?;
            writeln!(out, "edf_upper_bound_tight\t{:.10}", bounds::edf_upper_bound_tight(sizes, *delta)?)?;
        }
        BoundCommand::Simplified { delta } => {
            let (a, b) = bounds::simplified_constants(*delta)?;
            writeln!(out, "log_coefficient\t{a:.10}")?;
            writeln!(out, "size_coefficient\t{b:.10}")?;
        }
        BoundCommand::SurfaceArea { d, r, center, directions } => {
            if center.is_empty() {
                writeln!(out, "surface_area\t{:.10}", bounds::gaussian_surface_area_origin(*d, *r)?)?;
            } else {
                if center.len() != *d {
                    bail!("--center has {} coordinates, --d is {d}", center.len());
                }
                let c = DVector::from_column_slice(center);
                let sa = bounds::gaussian_surface_area_ball(&c, *r, *directions, seed)?;
                writeln!(out, "surface_area\t{:.10}", sa.value)?;
                writeln!(out, "std_error\t{:.10}", sa.std_error)?;
                writeln!(out, "approximate\t{}", sa.approximate)?;
            }
        }
        BoundCommand::GasStations { weights } => {
            let g = bounds::gas_stations_rotation(weights)?;
            writeln!(out, "start\t{}", g.start)?;
            writeln!(out, "valid_starts\t{}", g.multiplicity)?;
        }
        BoundCommand::BestSubsetConstant => {
            let c = bounds::best_subset_constant();
            writeln!(out, "delta\t{:.10}", c.delta)?;
            writeln!(out, "constant\t{:.10}", c.value)?;
            writeln!(out, "half_constant\t{:.10}", c.half_value)?;
        }
        BoundCommand::TailCertificate { terms } => {
            let t = bounds::nested_null_tail_certificate(*terms);
            writeln!(out, "terms\t{}", t.n_terms)?;
            writeln!(out, "first\t{:.10}\t(sum {:.10} + tail {:.3e})", t.first_total(), t.first_sum, t.first_tail)?;
            writeln!(out, "second\t{:.10}\t(sum {:.10} + tail {:.3e})", t.second_total(), t.second_sum, t.second_tail)?;
            writeln!(out, "total\t{:.10}", t.total())?;
            writeln!(out, "below_10\t{}", t.total() < 10.0)?;
        }
        BoundCommand::TwoModelEdf { m } => {
            writeln!(out, "two_model_edf\t{:.10}", two_model_edf(*m))?;
        }
        BoundCommand::GeneralTheta { mu, alternate, draws } => {
            let mu = DVector::from_column_slice(mu);
            let b = if *alternate {
                bounds::general_theta_bound_alternate(&mu, *draws, seed)?
            } else {
                bounds::general_theta_bound(&mu, bounds::SPHERE_DIRECTIONS, seed)?
            };
            writeln!(out, "bound\t{:.10}", b.value)?;
            writeln!(out, "std_error\t{:.10}", b.std_error)?;
            writeln!(out, "approximate\t{}", b.approximate)?;
            writeln!(out, "loose_cap\t{:.10}", bounds::general_theta_loose_cap(mu.len()))?;
        }
        BoundCommand::OptimalDelta { card, p_max } => {
            let (delta, value) = bounds::optimal_delta(*card, *p_max)?;
            writeln!(out, "delta\t{delta:.10}")?;
            writeln!(out, "bound\t{value:.10}")?;
        }
    }
    Ok(())
}

/// Returns whether every failure is an expected one.
fn selfcheck(out: &mut impl Write, only: &[usize], exec: Execution) -> Result<bool> {
    let ids: Vec<usize> = if only.is_empty() { (1..=acceptance::NAMES.len()).collect() } else { only.to_vec() };
    let mut unexpected = Vec::new();
    for id in ids {
        let c = acceptance::run(id, exec)?;
        writeln!(out, "{c}")?;
        if !c.pass {
            if EXPECTED_FAILURES.contains(&id) {
                writeln!(out, "     (known failure, see README)")?;
            } else {
                unexpected.push(id);
            }
        }
    }
    if unexpected.is_empty() {
        writeln!(out, "selfcheck ok")?;
    } else {
        writeln!(out, "selfcheck failed: {unexpected:?}")?;
    }
    Ok(unexpected.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let seed = cli.seed.unwrap_or(1);
    if let Command::Simulate { config, preset, family } = &cli.command {
        let mut out = io::stdout().lock();
        simulate(&mut out, config.as_deref(), *preset, *family, cli.out.as_deref(), cli.seed, exec)?;
        return Ok(true);
    }
    let mut out: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let ok = match &cli.command {
        Command::Tune { family, sigma, data } => {
            tune(&mut out, *family, *sigma, data)?;
            true
        }
        Command::Edf(a) => {
            edf(&mut out, a, seed, exec)?;
            true
        }
        Command::Bounds { which } => {
            bound(&mut out, which, seed)?;
            true
        }
        Command::Selfcheck { only } => selfcheck(&mut out, only, exec)?,
        Command::Simulate { .. } => unreachable!(),
    };
    out.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

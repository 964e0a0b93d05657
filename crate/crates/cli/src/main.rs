use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arbitrariness::abc::{
    abc_fit, abc_model_choice, simulate_replicates, AbcConfig, AcceptanceRule, PiAttribution,
    DEFAULT_EPSILON_A, DEFAULT_EPSILON_PI,
};
use arbitrariness::exec::with_workers;
use arbitrariness::models::{
    rafc_map, rafc_moment_estimate, rfc_map, rfc_moment_estimate, EstimateResult, EstimateStatus,
};
use arbitrariness::report::{
    density_grid_export, read_draws, read_metadata, write_model_choice, write_samples,
    write_simulations, write_summary, DensityQuantity, DensitySource, RunConfig, RunMetadata,
};
use arbitrariness::samplers::{
    sample_rfc_exact, summarize_posterior, ExactOptions, PosteriorSamples, PosteriorSummary,
    QuantitySummary, SamplerTag,
};
use arbitrariness::{
    Error, Execution, MarginalMode, Model, ObservedData, RafcParams, RandomStream,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const DEFAULT_ALPHAS: [f64; 6] = [0.0, 0.025, 0.05, 0.10, 0.20, 0.50];

#[derive(Parser)]
#[command(
    name = "arbitrariness",
    version,
    about = "Inference on the arbitrariness of peer review"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form moment estimate and MAP.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        /// Share of surely accepted items; omit for the RFC model.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Exact posterior sampling for the RFC model.
    FitRfc {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = MarginalArg::Exact)]
        marginal_mode: MarginalArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rejection ABC for the RAFC model with known alpha.
    FitRafc {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        sims: usize,
        #[command(flatten)]
        abc: AbcArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// ABC model choice over candidate alphas.
    ModelChoice {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated candidate alphas.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 600_000)]
        sims: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON_PI)]
        epsilon_pi: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON_A)]
        epsilon_a: f64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
    /// Forward-simulate replicates of the two-committee experiment.
    Simulate {
        #[arg(long, default_value_t = 166)]
        n: u64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Number of replicates.
        #[arg(long, default_value_t = 1000)]
        sims: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_sims: Option<PathBuf>,
    },
    /// Recompute a summary from a samples CSV.
    Summarize {
        /// Samples CSV with header `x,y,a`.
        input: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Number of submissions.
    #[arg(long)]
    n: Option<u64>,
    /// Observed acceptance rate.
    #[arg(long, conflicts_with = "k")]
    pi: Option<f64>,
    /// Observed number of acceptances (instead of --pi).
    #[arg(long)]
    k: Option<u64>,
    /// Observed arbitrariness.
    #[arg(long)]
    a_hat: Option<f64>,
}

impl DataArgs {
    fn given(&self) -> bool {
        self.n.is_some() || self.pi.is_some() || self.k.is_some() || self.a_hat.is_some()
    }

    fn resolve(&self) -> Result<ObservedData, CliError> {
        let d = ObservedData::reference_experiment();
        let n = self.n.unwrap_or(d.n());
        let a_hat = self.a_hat.unwrap_or(d.a_hat());
        let r = match self.k {
            Some(k) => ObservedData::from_count(n, k, a_hat),
            None => ObservedData::from_rate(n, self.pi.unwrap_or(d.pi_hat()), a_hat),
        };
        r.map_err(|e| CliError::Invalid(format!("--n/--pi/--k/--a-hat: {e}")))
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AbcArgs {
    #[arg(long, conflicts_with = "quantile")]
    epsilon_pi: Option<f64>,
    #[arg(long, conflicts_with = "quantile")]
    epsilon_a: Option<f64>,
    /// Keep this fraction of closest simulations instead of fixed tolerances.
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long, value_enum, default_value_t = PiArg::Committee1)]
    pi_attribution: PiArg,
}

impl AbcArgs {
    fn rule(&self) -> AcceptanceRule {
        match self.quantile {
            Some(q) => AcceptanceRule::TopQuantile { q },
            None => AcceptanceRule::FixedTolerance {
                epsilon_pi: self.epsilon_pi.unwrap_or(DEFAULT_EPSILON_PI),
                epsilon_a: self.epsilon_a.unwrap_or(DEFAULT_EPSILON_A),
            },
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out_samples: Option<PathBuf>,
    #[arg(long)]
    out_summary: Option<PathBuf>,
    #[arg(long)]
    out_density: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DensityArg::MarginalA)]
    density: DensityArg,
    #[arg(long, default_value_t = 50)]
    bins: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarginalArg {
    Exact,
    PaperApprox,
}

#[derive(Clone, Copy, ValueEnum)]
enum PiArg {
    Committee1,
    Pooled,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    JointXy,
    MarginalX,
    MarginalA,
}

impl From<DensityArg> for DensityQuantity {
    fn from(d: DensityArg) -> Self {
        match d {
            DensityArg::JointXy => DensityQuantity::JointXy,
            DensityArg::MarginalX => DensityQuantity::MarginalX,
            DensityArg::MarginalA => DensityQuantity::MarginalA,
        }
    }
}

enum CliError {
    Invalid(String),
    Infeasible(String),
    ZeroAcceptance(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::ZeroAcceptance(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m)
            | CliError::Infeasible(m)
            | CliError::ZeroAcceptance(m)
            | CliError::Other(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_) | Error::Degenerate(_) | Error::InsufficientSamples { .. } => {
                CliError::Invalid(msg)
            }
            Error::Infeasible(_) => CliError::Infeasible(msg),
            Error::ZeroAcceptance { .. } => CliError::ZeroAcceptance(msg),
            _ => CliError::Other(msg),
        }
    }
}

fn fmt_ci(name: &str, q: &QuantitySummary) -> String {
    format!("{name}={:.4} [{:.4}, {:.4}]", q.mean, q.ci_low, q.ci_high)
}

fn summary_line(sum: &PosteriorSummary) -> String {
    format!(
        "{} {}: {} {} {} ({} draws)",
        sum.model,
        sum.sampler,
        fmt_ci("x", &sum.x),
        fmt_ci("y", &sum.y),
        fmt_ci("a", &sum.a),
        sum.sample_count
    )
}

fn write_outputs(
    s: &PosteriorSamples,
    d: &ObservedData,
    meta: &RunMetadata,
    out: &OutputArgs,
) -> Result<PosteriorSummary, CliError> {
    let sum = summarize_posterior(s, d)?;
    if let Some(p) = &out.out_samples {
        write_samples(s, meta, p)?;
    }
    if let Some(p) = &out.out_summary {
        write_summary(&sum, meta, p)?;
    }
    if let Some(p) = &out.out_density {
        density_grid_export(
            DensitySource::Samples(s),
            out.density.into(),
            out.bins,
            meta,
            p,
        )?;
    }
    Ok(sum)
}

fn check_alpha(flag: &str, alpha: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{flag}: alpha {alpha} must lie in [0, 1)"
        )))
    }
}

fn estimate_line(label: &str, r: &EstimateResult) -> String {
    match r.estimate {
        Some(e) => format!("{label}: x={:.4} y={:.4} a={:.4}", e.x, e.y, e.a),
        None => format!("{label}: none"),
    }
}

fn run_estimate(data: &DataArgs, alpha: Option<f64>) -> Result<(), CliError> {
    let d = data.resolve()?;
    let (moment, map) = match alpha {
        Some(a) => {
            check_alpha("--alpha", a)?;
            (rafc_moment_estimate(&d, a)?, rafc_map(&d, a)?)
        }
        None => (rfc_moment_estimate(&d), rfc_map(&d)),
    };
    let model = match alpha {
        Some(a) => Model::Rafc { alpha: a },
        None => Model::Rfc,
    };
    if moment.status == EstimateStatus::Infeasible {
        let why = moment
            .note
            .clone()
            .unwrap_or_else(|| "observed data outside the model's range".into());
        let mut msg = format!("{model}: no moment estimate reproduces the data: {why}");
        if map.is_feasible() {
            msg.push_str(&format!("; {}", estimate_line("posterior mode", &map)));
        }
        return Err(CliError::Infeasible(msg));
    }
    let e = moment.estimate.expect("feasible estimate");
    let mut line = format!("{model}: x={:.4} y={:.4}", e.x, e.y);
    if let Some(m) = map.estimate {
        line.push_str(&format!(" (MAP x={:.4} y={:.4})", m.x, m.y));
    }
    if let Some(alt) = moment.alternate {
        line.push_str(&format!(" (alternate root x={:.4} y={:.4})", alt.x, alt.y));
    }
    println!("{line}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate { data, alpha } => run_estimate(&data, alpha),

        Command::FitRfc {
            data,
            samples,
            marginal_mode,
            run,
            out,
        } => {
            let d = data.resolve()?;
            let marginal = match marginal_mode {
                MarginalArg::Exact => MarginalMode::Exact,
                MarginalArg::PaperApprox => MarginalMode::PaperApprox,
            };
            let opts = ExactOptions {
                marginal,
                execution: Execution::Parallel,
            };
            let rng = RandomStream::from_seed(run.seed);
            let s = with_workers(run.workers, || sample_rfc_exact(&d, samples, &rng, opts))?;
            let meta = RunMetadata::for_samples(&s, d).with_config(RunConfig {
                marginal_mode: Some(marginal),
                ..Default::default()
            });
            let sum = write_outputs(&s, &d, &meta, &out)?;
            println!("{}", summary_line(&sum));
            Ok(())
        }

        Command::FitRafc {
            data,
            alpha,
            sims,
            abc,
            run,
            out,
        } => {
            let d = data.resolve()?;
            check_alpha("--alpha", alpha)?;
            let cfg = AbcConfig {
                sims,
                rule: abc.rule(),
                pi_attribution: match abc.pi_attribution {
                    PiArg::Committee1 => PiAttribution::Committee1,
                    PiArg::Pooled => PiAttribution::Pooled,
                },
                execution: Execution::Parallel,
            };
            cfg.validate()
                .map_err(|e| CliError::Invalid(format!("--sims/--epsilon-*/--quantile: {e}")))?;
            let rng = RandomStream::from_seed(run.seed);
            let s = with_workers(run.workers, || abc_fit(&d, alpha, &cfg, &rng))?;
            let config = match cfg.rule {
                AcceptanceRule::FixedTolerance {
                    epsilon_pi,
                    epsilon_a,
                } => RunConfig {
                    epsilon_pi: Some(epsilon_pi),
                    epsilon_a: Some(epsilon_a),
                    ..Default::default()
                },
                AcceptanceRule::TopQuantile { q } => RunConfig {
                    quantile: Some(q),
                    ..Default::default()
                },
            };
            let meta = RunMetadata::for_samples(&s, d).with_config(config);
            let sum = write_outputs(&s, &d, &meta, &out)?;
            println!(
                "{}; {} of {} simulations accepted",
                summary_line(&sum),
                s.len(),
                sims
            );
            Ok(())
        }

        Command::ModelChoice {
            data,
            alphas,
            sims,
            epsilon_pi,
            epsilon_a,
            run,
            out_summary,
        } => {
            let d = data.resolve()?;
            for &a in &alphas {
                check_alpha("--alphas", a)?;
            }
            let cfg = AbcConfig {
                sims,
                rule: AcceptanceRule::FixedTolerance {
                    epsilon_pi,
                    epsilon_a,
                },
                ..Default::default()
            };
            cfg.validate()
                .map_err(|e| CliError::Invalid(format!("--sims/--epsilon-*: {e}")))?;
            let rng = RandomStream::from_seed(run.seed);
            let r = with_workers(run.workers, || abc_model_choice(&d, &alphas, &cfg, &rng))?;
            if let Some(p) = &out_summary {
                let meta = RunMetadata::new(
                    Model::Rafc { alpha: alphas[0] },
                    SamplerTag::Abc,
                    run.seed,
                    sims,
                    Some(d),
                )
                .with_config(RunConfig {
                    epsilon_pi: Some(epsilon_pi),
                    epsilon_a: Some(epsilon_a),
                    alphas: Some(alphas.clone()),
                    ..Default::default()
                });
                write_model_choice(&r, &meta, p)?;
            }
            let parts: Vec<String> = r
                .models
                .iter()
                .map(|m| format!("p(alpha={})={:.3}", m.alpha, m.posterior_probability))
                .collect();
            println!(
                "{}; best alpha={} ({} accepted of {})",
                parts.join(" "),
                r.best().alpha,
                r.total_accepted(),
                sims
            );
            Ok(())
        }

        Command::Simulate {
            n,
            x,
            y,
            alpha,
            sims,
            run,
            out_sims,
        } => {
            let p = RafcParams::new(x, y, alpha)
                .map_err(|e| CliError::Invalid(format!("--x/--y/--alpha: {e}")))?;
            if n == 0 || sims == 0 {
                return Err(CliError::Invalid(
                    "--n and --sims must be at least 1".into(),
                ));
            }
            let rng = RandomStream::from_seed(run.seed);
            let outs = with_workers(run.workers, || {
                simulate_replicates(&p, n, sims, &rng, Execution::Parallel)
            })?;
            if let Some(path) = &out_sims {
                let model = if alpha == 0.0 {
                    Model::Rfc
                } else {
                    Model::Rafc { alpha }
                };
                let meta = RunMetadata::new(model, SamplerTag::External, run.seed, sims, None);
                write_simulations(&outs, &meta, path)?;
            }
            let mean_pi = outs.iter().map(|o| o.pi_sim()).sum::<f64>() / outs.len() as f64;
            let arb: Vec<f64> = outs.iter().filter_map(|o| o.a_sim()).collect();
            let mean_a = if arb.is_empty() {
                "undefined".to_string()
            } else {
                format!("{:.4}", arb.iter().sum::<f64>() / arb.len() as f64)
            };
            println!("{sims} replicates of n={n}: mean pi_sim={mean_pi:.4} mean a_sim={mean_a}");
            Ok(())
        }

        Command::Summarize {
            input,
            data,
            out_summary,
        } => summarize(&input, &data, out_summary.as_deref()),
    }
}

fn summarize(input: &Path, data: &DataArgs, out: Option<&Path>) -> Result<(), CliError> {
    let draws = read_draws(input)?;
    let meta = match read_metadata(input)? {
        Some(m) if m.observed.is_some() && !data.given() => m,
        Some(m) => RunMetadata {
            observed: Some(data.resolve()?),
            ..m
        },
        None => RunMetadata::new(
            Model::Rfc,
            SamplerTag::External,
            0,
            draws.len(),
            Some(data.resolve()?),
        ),
    };
    let observed = meta.observed.expect("observed data resolved above");
    let s = PosteriorSamples {
        draws,
        model: meta.model,
        sampler: meta.sampler,
        seed: meta.seed,
        requested_count: meta.requested_count,
    };
    let sum = summarize_posterior(&s, &observed)?;
    if let Some(p) = out {
        write_summary(&sum, &meta, p)?;
    }
    println!("{}", summary_line(&sum));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

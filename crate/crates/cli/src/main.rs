use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hdp_cli::{run_eval, run_fit, run_synth, run_validate, FitOptions, HyperSetting};
use hdp_core::diagnostics::TimeAlignment;
use hdp_core::hyper::GammaPrior;
use hdp_core::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "hdp", version, about = "Infinite topic models with split-merge moves")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit one or more chains to a corpus and write diagnostics.
    Fit(FitArgs),
    /// Score a held-out corpus against saved model states.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with known topics.
    Synth(SynthArgs),
    /// Check a saved state dump against its corpus for consistency.
    Validate(ValidateArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Alignment {
    Wallclock,
    Iteration,
}

#[derive(Args)]
struct FitArgs {
    /// Corpus file: one document per line, "M term:count term:count ...".
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary file, one term per line; inferred from the corpus if absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
    /// Topic Dirichlet smoothing.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Initial document-level concentration.
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Initial corpus-level concentration.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Hold both concentrations at their initial values.
    #[arg(long)]
    fix_hypers: bool,
    /// Gamma prior shape for alpha0 resampling.
    #[arg(long, default_value_t = 1.0)]
    alpha_shape: f64,
    /// Gamma prior scale for alpha0 resampling.
    #[arg(long, default_value_t = 1.0)]
    alpha_scale: f64,
    /// Gamma prior shape for gamma resampling.
    #[arg(long, default_value_t = 1.0)]
    gamma_shape: f64,
    /// Gamma prior scale for gamma resampling.
    #[arg(long, default_value_t = 1.0)]
    gamma_scale: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Split-merge moves on or off.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    sm: Toggle,
    /// Split-merge runs only for the first this many iterations
    /// [default: 50, capped at max-iters].
    #[arg(long)]
    sm_iters: Option<usize>,
    /// Split-merge proposals per iteration while active.
    #[arg(long, default_value_t = 1)]
    sm_per_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent chains, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    num_chains: usize,
    /// State snapshot cadence in iterations; 0 keeps only the final state.
    #[arg(long, default_value_t = 100)]
    save_every: usize,
    /// Visit words in shuffled order during the initial seating pass.
    #[arg(long)]
    shuffle_init: bool,
    /// Hold out this fraction of documents as test.dat before fitting.
    #[arg(long)]
    holdout_fraction: Option<f64>,
    /// Time axis for cross-chain mode comparison curves.
    #[arg(long, value_enum, default_value_t = Alignment::Wallclock)]
    time_alignment: Alignment,
}

#[derive(Args)]
struct EvalArgs {
    /// State dump files, or directories scanned for state-*.json.
    #[arg(long, num_args = 1.., required = true)]
    states: Vec<PathBuf>,
    /// Test corpus file.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Document-level sampler sweeps per (state, document) pair.
    #[arg(long, default_value_t = 20)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    num_docs: usize,
    #[arg(long, default_value_t = 50)]
    words_per_doc: usize,
    #[arg(long, default_value_t = 5)]
    num_topics: usize,
    #[arg(long, default_value_t = 12)]
    vocab_size: usize,
    /// Upper bound on distinct true topics per document.
    #[arg(long, default_value_t = 2)]
    max_topics_per_doc: usize,
    /// Use exactly max_topics_per_doc topics in every document.
    #[arg(long)]
    exact_topics: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// State dump to check.
    #[arg(long)]
    state: PathBuf,
}

fn fit_options(args: &FitArgs) -> Result<FitOptions> {
    for (flag, v) in [
        ("--alpha-shape", args.alpha_shape),
        ("--alpha-scale", args.alpha_scale),
        ("--gamma-shape", args.gamma_shape),
        ("--gamma-scale", args.gamma_scale),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            anyhow::bail!("{flag} must be positive, got {v}");
        }
    }
    let (alpha0, gamma) = if args.fix_hypers {
        (HyperSetting::Fixed(args.alpha0), HyperSetting::Fixed(args.gamma))
    } else {
        (
            HyperSetting::Resampled {
                init: args.alpha0,
                prior: GammaPrior::new(args.alpha_shape, args.alpha_scale),
            },
            HyperSetting::Resampled {
                init: args.gamma,
                prior: GammaPrior::new(args.gamma_shape, args.gamma_scale),
            },
        )
    };
    Ok(FitOptions {
        eta: args.eta,
        alpha0,
        gamma,
        max_iters: args.max_iters,
        sm_enabled: args.sm == Toggle::On,
        sm_iters: args.sm_iters.unwrap_or_else(|| 50.min(args.max_iters)),
        sm_per_iter: args.sm_per_iter,
        seed: args.seed,
        num_chains: args.num_chains,
        save_every: args.save_every,
        shuffle_init: args.shuffle_init,
        holdout_fraction: args.holdout_fraction,
        time_alignment: match args.time_alignment {
            Alignment::Wallclock => TimeAlignment::WallClock,
            Alignment::Iteration => TimeAlignment::Iteration,
        },
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Fit(args) => {
            let opts = fit_options(&args)?;
            run_fit(&args.corpus, args.vocab.as_deref(), &args.output_dir, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Eval(args) => {
            run_eval(
                &args.states,
                &args.test,
                args.vocab.as_deref(),
                args.sweeps,
                args.seed,
                &args.output_dir,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Synth(args) => {
            let cfg = SynthConfig {
                num_docs: args.num_docs,
                words_per_doc: args.words_per_doc,
                num_topics: args.num_topics,
                vocab_size: args.vocab_size,
                max_topics_per_doc: args.max_topics_per_doc,
                exact_topics_per_doc: args.exact_topics,
                topic_matrix: None,
            };
            run_synth(&cfg, args.seed, &args.output_dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate(args) => {
            let violations =
                run_validate(&args.corpus, args.vocab.as_deref(), &args.state)?;
            if violations.is_empty() {
                println!("state is consistent");
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use retro::commands::{self, DiscoverArgs, EvalArgs, SweepArgs, TallySource, DEFAULT_SEED};
use retro::error::exit;
use retro::{Error, Result};
use retro_core::tensor::Layout;
use retro_core::TransformId;

/// Label-altering video transforms, class-transform discovery, dataset
/// synthesis and evaluation.
///
/// Log verbosity is read from RETRO_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "retro", version)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, default_value_t = default_jobs())]
    jobs: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    Tr,
    Hf,
    Hftr,
}

impl From<Op> for TransformId {
    fn from(op: Op) -> Self {
        match op {
            Op::Tr => TransformId::Tr,
            Op::Hf => TransformId::Hf,
            Op::Hftr => TransformId::HfTr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Tchw,
    Cthw,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Tchw => Layout::Tchw,
            LayoutArg::Cthw => Layout::Cthw,
        }
    }
}

#[derive(Args)]
struct ManifestArgs {
    /// Manifest JSONL.
    #[arg(long)]
    manifest: PathBuf,
    /// Class-names JSON array; defaults to `<manifest stem>.classes.json` if present.
    #[arg(long)]
    classes: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a transform to every .rten file in a directory.
    Transform {
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Output layout; defaults to each input's layout.
        #[arg(long, value_enum)]
        layout: Option<LayoutArg>,
    },
    /// Extract a class-transform map from a prediction log.
    Discover {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        transform: TransformId,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        alpha: f64,
        /// Report JSON (map plus per-class diagnostics).
        #[arg(long)]
        out: PathBuf,
        /// Also write the bare map JSON.
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// Score discovery over a (lambda, alpha) grid against a ground-truth map.
    Sweep {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// `a:b:step` or a single value.
        #[arg(long)]
        lambda_grid: String,
        #[arg(long)]
        alpha_grid: String,
        /// Grid table CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build synthetic training data.
    #[command(subcommand)]
    Synth(Synth),
    /// Top-k accuracy, group breakdown and confusion matrix.
    Eval {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        pred: PathBuf,
        /// `original`, `HF`, `TR` or `HFTR`.
        #[arg(long, default_value = "original")]
        variant: String,
        #[arg(long)]
        map: Option<PathBuf>,
        /// Score against labels mapped through --map.
        #[arg(long, requires = "map")]
        apply_lt: bool,
        /// JSON object of group name to class ids.
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long, default_value = "1,5")]
        topk: String,
        #[arg(long)]
        breakdown_out: Option<PathBuf>,
        #[arg(long)]
        confusion_out: Option<PathBuf>,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reversibility verdicts from forward-preference tallies.
    Perception {
        /// Tally CSV `class_id,n_trials,forward_choices`.
        #[arg(long, required_unless_present = "qc", conflicts_with = "qc")]
        tally: Option<PathBuf>,
        /// Submissions JSONL; tallied after catch-trial filtering.
        #[arg(long, requires = "k")]
        qc: Option<PathBuf>,
        /// Catch trials per submission.
        #[arg(long)]
        k: Option<usize>,
        /// Catch trials a submission must pass; defaults to all of them.
        #[arg(long)]
        min_correct: Option<usize>,
        /// Write the tally used as CSV.
        #[arg(long)]
        tally_out: Option<PathBuf>,
    },
    /// Check a class-transform map and print its category counts.
    ValidateMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Synth {
    /// One transformed copy of each training example of a mapped class.
    Augment {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop one class per equivariant pair and synthesize it from the other.
    Zeroshot {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        map: PathBuf,
        /// Must match the map's transform.
        #[arg(long)]
        transform: Option<TransformId>,
        /// Directory for retained.jsonl, synthetic.jsonl and pairs.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// One seeded sampler draw per training example.
    Sample {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Class-transform maps, applied in order.
        #[arg(long = "map", required = true)]
        maps: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write RTEN files for a synthetic manifest.
    Materialize {
        #[arg(long)]
        synthetic: PathBuf,
        /// Directory holding `<source>.rten`.
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        layout: Option<LayoutArg>,
    },
}

fn run(cli: Cli) -> Result<String> {
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::Transform {
            op,
            input,
            output,
            layout,
        } => commands::transform(op.into(), &input, &output, layout.map(Into::into), jobs)?
            .into_result(),
        Command::Discover {
            manifest,
            pred,
            transform,
            lambda,
            alpha,
            out,
            map_out,
        } => commands::discover(
            &DiscoverArgs {
                manifest: &manifest.manifest,
                classes: manifest.classes.as_deref(),
                predictions: &pred,
                transform,
                lambda,
                alpha,
                out: &out,
                map_out: map_out.as_deref(),
            },
            jobs,
        ),
        Command::Sweep {
            manifest,
            pred,
            truth,
            lambda_grid,
            alpha_grid,
            out,
        } => commands::sweep(
            &SweepArgs {
                manifest: &manifest.manifest,
                classes: manifest.classes.as_deref(),
                predictions: &pred,
                truth: &truth,
                lambda_grid: &lambda_grid,
                alpha_grid: &alpha_grid,
                out: &out,
            },
            jobs,
        ),
        Command::Synth(s) => match s {
            Synth::Augment { manifest, map, out } => {
                commands::synth_augment(&manifest.manifest, manifest.classes.as_deref(), &map, &out)
            }
            Synth::Zeroshot {
                manifest,
                map,
                transform,
                out,
            } => commands::synth_zeroshot(
                &manifest.manifest,
                manifest.classes.as_deref(),
                &map,
                transform,
                &out,
            ),
            Synth::Sample {
                manifest,
                maps,
                p,
                out,
            } => commands::synth_sample(
                &manifest.manifest,
                manifest.classes.as_deref(),
                &maps,
                p,
                cli.seed,
                &out,
            ),
            Synth::Materialize {
                synthetic,
                src,
                out,
                layout,
            } => {
                let summaries = commands::synth_materialize(
                    &synthetic,
                    &src,
                    &out,
                    layout.map(Into::into),
                    jobs,
                )?;
                let failed: usize = summaries.iter().map(|s| s.failed).sum();
                let total: usize = summaries.iter().map(|s| s.files).sum();
                let text = serde_json::to_string_pretty(&summaries).expect("summary serializes");
                if failed > 0 {
                    Err(Error::ItemsFailed {
                        failed,
                        total,
                        summary: text,
                    })
                } else {
                    Ok(text)
                }
            }
        },
        Command::Eval {
            manifest,
            pred,
            variant,
            map,
            apply_lt,
            groups,
            topk,
            breakdown_out,
            confusion_out,
            out,
        } => {
            let ks = commands::parse_ks(&topk)?;
            let text = commands::eval(&EvalArgs {
                predictions: &pred,
                manifest: &manifest.manifest,
                classes: manifest.classes.as_deref(),
                variant: commands::parse_variant(&variant)?,
                map: map.as_deref(),
                apply_lt,
                groups: groups.as_deref(),
                ks: &ks,
                confusion_out: confusion_out.as_deref(),
                breakdown_out: breakdown_out.as_deref(),
            })?;
            if let Some(p) = out {
                std::fs::write(&p, format!("{text}\n")).map_err(|e| Error::io(&p, e))?;
            }
            Ok(text)
        }
        Command::Perception {
            tally,
            qc,
            k,
            min_correct,
            tally_out,
        } => {
            let source = match (&tally, &qc, k) {
                (Some(t), _, _) => TallySource::Tally(t),
                (None, Some(q), Some(k)) => TallySource::Submissions {
                    path: q,
                    k,
                    min_correct: min_correct.unwrap_or(k),
                },
                _ => unreachable!("clap requires --tally or --qc with --k"),
            };
            commands::perception(source, tally_out.as_deref())
        }
        Command::ValidateMap {
            map,
            manifest,
            classes,
        } => {
            let (text, violations) =
                commands::validate_map(&map, manifest.as_deref(), classes.as_deref())?;
            if violations.is_empty() {
                Ok(text)
            } else {
                println!("{text}");
                Err(Error::InvalidMap(violations))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RETRO_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let Error::ItemsFailed { summary, .. } = &e {
                println!("{summary}");
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

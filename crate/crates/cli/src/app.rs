//! Argument parsing and exit-code mapping for the `mhi` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mhi_core::classify::{evaluate, ClassifyError, MlpConfig, SplitSpec, DEFAULT_K};
use mhi_core::dataset::write_features_csv;
use mhi_core::imgio;
use mhi_core::temporal::DEFAULT_TAU;
use mhi_core::DEFAULT_THETA;

use crate::commands::{self, ClassifierChoice, UsageError};
use crate::synth;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mhi",
    version,
    about = "Action recognition with motion history templates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn every labeled sequence of a manifest into a feature CSV row.
    Extract {
        /// JSON Lines manifest of frame sequences.
        manifest: PathBuf,
        #[command(flatten)]
        template: TemplateArgs,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Split, standardize and train a classifier; writes the model and a report.
    Train {
        /// Feature CSV, or a manifest (.jsonl) to extract features from.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ClassifierKind::Mlp)]
        classifier: ClassifierKind,
        /// θ and τ used for extraction; both are stored in the model.
        #[command(flatten)]
        template: TemplateArgs,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        mlp: MlpArgs,
        /// Seed for the split and the network initialization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Report file [default: <out> with extension .report.txt].
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Confusion matrix of a model on a feature CSV or manifest.
    Eval {
        model: PathBuf,
        /// Feature CSV, or a manifest extracted with the model's θ and τ.
        input: PathBuf,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Label a frame directory with a sliding window; prints JSON.
    Predict {
        model: PathBuf,
        /// Directory of NNNNNN.pgm frames.
        frames: PathBuf,
        /// Window length in frames [default: the model's τ, clamped to the clip].
        #[arg(long)]
        window: Option<usize>,
        /// Window step in frames [default: window / 2, at least 1].
        #[arg(long)]
        stride: Option<usize>,
        /// Output JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
    /// Write mei.pgm and mhi.pgm for the trailing window of a frame directory.
    Render {
        frames: PathBuf,
        #[command(flatten)]
        template: TemplateArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic clips and a manifest from a JSON list of specs.
    Synth {
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Knn,
    Mlp,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TemplateArgs {
    /// Frame-difference threshold.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: u8,
    /// Time window in frames.
    #[arg(long, default_value_t = DEFAULT_TAU, value_parser = clap::value_parser!(u32).range(1..))]
    pub tau: u32,
}

#[derive(Debug, Clone, Args)]
pub struct MlpArgs {
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Extract {
            manifest,
            template,
            out,
            jobs,
        } => {
            let entries = commands::read_manifest(&manifest)?;
            let result = commands::extract(&entries, template.theta, template.tau, jobs.into())?;
            info!(
                "{} samples, {} skipped",
                result.samples.len(),
                result.warnings.len()
            );
            write_output(out.as_deref(), &write_features_csv(&result.samples)?)
        }
        Command::Train {
            input,
            classifier,
            template,
            k,
            mlp,
            seed,
            out,
            report,
            jobs,
        } => {
            let samples =
                commands::load_samples(&input, template.theta, template.tau, jobs.into())?;
            let choice = match classifier {
                ClassifierKind::Knn => {
                    if k == 0 {
                        return Err(commands::usage("--k must be >= 1"));
                    }
                    ClassifierChoice::Knn { k }
                }
                ClassifierKind::Mlp => ClassifierChoice::Mlp(MlpConfig {
                    hidden: mlp.hidden,
                    lr: mlp.lr,
                    epochs: mlp.epochs,
                    batch: mlp.batch,
                    seed,
                }),
            };
            let trained = commands::train(
                &samples,
                &choice,
                &SplitSpec::with_seed(seed),
                template.theta,
                template.tau,
            )?;
            fs::write(&out, trained.model.to_json()?)
                .with_context(|| format!("writing {}", out.display()))?;
            let report = report.unwrap_or_else(|| commands::report_path(&out));
            fs::write(&report, &trained.report)
                .with_context(|| format!("writing {}", report.display()))?;
            println!(
                "train {:.4}  validation {:.4}  test {:.4}",
                trained.train.accuracy, trained.val.accuracy, trained.test.accuracy
            );
            Ok(())
        }
        Command::Eval {
            model,
            input,
            out,
            jobs,
        } => {
            let model = commands::load_model(&model)?;
            let samples = commands::load_samples(&input, model.theta, model.tau, jobs.into())?;
            let e = evaluate(&model, &samples)?;
            write_output(out.as_deref(), &e.matrix.to_csv())
        }
        Command::Predict {
            model,
            frames,
            window,
            stride,
            out,
            jobs,
        } => {
            let model = commands::load_model(&model)?;
            let seq = commands::load_frame_dir(&frames)?;
            let labels = commands::predict(
                &model,
                &seq.frames,
                seq.record.start,
                window,
                stride,
                jobs.into(),
            )?;
            let mut json = serde_json::to_string_pretty(&labels)?;
            json.push('\n');
            write_output(out.as_deref(), &json)
        }
        Command::Render {
            frames,
            template,
            out,
        } => {
            let seq = commands::load_frame_dir(&frames)?;
            let (mei, mhi) = commands::render(&seq.frames, template.theta, template.tau)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (name, img) in [("mei.pgm", &mei), ("mhi.pgm", &mhi)] {
                let path = out.join(name);
                fs::write(&path, imgio::write_pgm(img))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Synth { spec, out } => {
            let text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let specs = synth::parse_specs(&text).map_err(|e| commands::usage(format!("{e:#}")))?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let records = synth::generate(&specs, &out)?;
            info!("{} sequences written to {}", records.len(), out.display());
            Ok(())
        }
    }
}

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        match cause.downcast_ref::<ClassifyError>() {
            Some(ClassifyError::NonFiniteLoss { .. }) => return EXIT_NUMERIC,
            Some(ClassifyError::InvalidConfig(_) | ClassifyError::InvalidSplit(_)) => {
                return EXIT_USAGE
            }
            _ => {}
        }
    }
    EXIT_DATA
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

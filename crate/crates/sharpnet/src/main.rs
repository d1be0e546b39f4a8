use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use sharpnet::commands::{self, Subset};
use sharpnet::config::RunConfig;
use sharpnet::{CliError, Result};
use sharpnet_core::data::{Appearance, SyntheticSpec};
use sharpnet_core::model::SharpNetConfig;

/// SHARP-Net: pyramid segmentation with Haar-like feature injection.
#[derive(Debug, Parser)]
#[command(name = "sharpnet", version)]
struct Cli {
    /// JSON run configuration; omitted keys take the defaults listed below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the model, training and split seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write each image's Haar responses as `<out>/<id>.tnsr` (H×W×B).
    ExtractFeatures,
    /// Pool Haar maps over the dataset and drop near-duplicates by PSNR.
    SelectFeatures,
    /// Train; writes train_log.jsonl, best.ckpt and final.ckpt to --out.
    Train,
    /// Print the metrics JSON of a checkpoint on a dataset subset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
    },
    /// Segment one PNG into a colour-coded mask `<out>/<stem>_mask.png`.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Palette CSV (`class_name,r,g,b,ciw`) used to colour the mask.
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Print the trainable parameter count of the configured model.
    CountParams,
    /// Compare reverse-mode gradients with finite differences; exit 4 on failure.
    GradCheck {
        /// Use the 16×16, two-level, [8, 16]-channel, 3-class model.
        #[arg(long)]
        tiny: bool,
    },
    /// Write a synthetic dataset (images/, masks/, palette.csv) to --out.
    GenSynthetic {
        #[arg(long, default_value_t = 32)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// tinted: per-class hues; flat: shared intensities, classes differ only in
        /// shape; textured: oriented stripe and checker patches.
        #[arg(long, value_enum, default_value_t = AppearanceArg::Tinted)]
        appearance: AppearanceArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum AppearanceArg {
    Tinted,
    Flat,
    Textured,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::ExtractFeatures => commands::extract_features(&config, &cli.out, &mut out),
        Command::SelectFeatures => commands::select(&config, &mut out).map(drop),
        Command::Train => commands::train_command(&config, &cli.out, &mut out),
        Command::Evaluate { checkpoint, subset } => {
            commands::evaluate_command(&config, &checkpoint, subset, &mut out).map(drop)
        }
        Command::Predict {
            checkpoint,
            image,
            palette,
        } => {
            let path = commands::predict_command(&checkpoint, &image, palette.as_deref(), &cli.out)?;
            writeln!(out, "{}", path.display()).map_err(|e| CliError::Data(e.to_string()))
        }
        Command::CountParams => commands::count_params(&config.model, &mut out).map(drop),
        Command::GradCheck { tiny } => {
            let model = if tiny {
                SharpNetConfig::tiny()
            } else {
                config.model.clone()
            };
            commands::grad_check(&model, cli.seed.unwrap_or(config.model.seed), &mut out).map(drop)
        }
        Command::GenSynthetic {
            count,
            width,
            height,
            classes,
            appearance,
        } => commands::gen_synthetic_command(
            &SyntheticSpec {
                count,
                width,
                height,
                num_classes: classes,
                seed: cli.seed.unwrap_or(0),
                appearance: match appearance {
                    AppearanceArg::Tinted => Appearance::Tinted,
                    AppearanceArg::Flat => Appearance::Flat,
                    AppearanceArg::Textured => Appearance::Textured,
                },
            },
            Path::new(&cli.out),
        ),
    }
}

fn main() -> ExitCode {
    let defaults = format!("Configuration keys and defaults:\n{}", RunConfig::describe_defaults());
    let command = Cli::command()
        .after_help(defaults.clone())
        .mut_subcommands(|sub| sub.after_help(defaults.clone()));
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}

//! `deephash`: train, encode, query and evaluate hash models from the shell.

mod commands;
mod outcome;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use outcome::Status;

#[derive(Parser, Debug)]
#[command(name = "deephash", version, about = "Deep hashing of feature vectors into binary codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelCol {
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Label,
    Euclidean,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it to `--out`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat the last CSV column as an integer label.
        #[arg(long, value_enum)]
        label_col: Option<LabelCol>,
    },
    /// Hash every feature row with a trained model.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        label_col: Option<LabelCol>,
    },
    /// Print the nearest stored codes to a hex query code.
    Query {
        #[arg(long)]
        codes: PathBuf,
        /// Query code as hex, whole 64-bit words, most significant first.
        #[arg(long)]
        q: String,
        #[arg(long)]
        k: usize,
        /// One id per line; defaults to row positions.
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Precision-recall sweep over the Hamming radius, each row querying the rest.
    EvalPr {
        #[arg(long)]
        codes: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Relevant neighbours per query in euclidean mode.
        #[arg(long, default_value_t = 10)]
        gt_n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        label_col: Option<LabelCol>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Usage } else { Status::Success }.into();
        }
    };
    let result = match cli.command {
        Command::Train {
            config,
            features,
            out,
            label_col,
        } => commands::train(&config, &features, &out, label_col.is_some()),
        Command::Encode {
            model,
            features,
            out,
            label_col,
        } => commands::encode(&model, &features, &out, label_col.is_some()),
        Command::Query { codes, q, k, ids } => commands::query(&codes, &q, k, ids.as_deref()),
        Command::EvalPr {
            codes,
            features,
            mode,
            gt_n,
            out,
            label_col,
        } => {
            let mode = match mode {
                Mode::Label => deephash::search::GroundTruthMode::Label,
                Mode::Euclidean => deephash::search::GroundTruthMode::EuclideanTopN,
            };
            commands::eval_pr(&codes, &features, mode, gt_n, &out, label_col.is_some())
        }
    };
    match result {
        Ok(()) => Status::Success.into(),
        Err(f) => {
            eprintln!("error: {f}");
            f.status.into()
        }
    }
}

//! `faqmatch`: extract FAQ pairs, build models, ask questions, benchmark
//! thresholds and run the HTTP service.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

mod commands;
mod thresholds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "faqmatch", version, about = "FAQ extraction and question matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PageSource {
    /// FAQ page URL
    #[arg(long)]
    url: Option<String>,
    /// Local HTML file
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct BuildSource {
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
    /// JSON array of {"question", "answer"} objects
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract question/answer pairs from a FAQ page
    Parse {
        #[command(flatten)]
        source: PageSource,
        /// Prefix prepended verbatim to --url (e.g. a CORS proxy)
        #[arg(long, requires = "url")]
        proxy: Option<String>,
        /// Write the pairs as JSON to this file
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Embed questions and write a model file
    Build {
        #[command(flatten)]
        source: BuildSource,
        #[arg(long, requires = "url")]
        proxy: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = faqmatch_core::embedding::BASELINE_ID)]
        embedder: String,
        #[arg(long, default_value_t = faqmatch_core::embedding::DEFAULT_DIMENSION)]
        dim: usize,
        /// Default threshold stored in the model
        #[arg(long, default_value_t = faqmatch_core::DEFAULT_THRESHOLD, allow_negative_numbers = true)]
        threshold: f64,
        #[arg(long)]
        json: bool,
    },
    /// Answer a question, or read questions from stdin when none is given
    Ask {
        #[arg(long, env = "FAQMATCH_MODEL")]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[arg(long, default_value = faqmatch_service::DEFAULT_FALLBACK)]
        fallback: String,
        #[arg(long)]
        json: bool,
        question: Option<String>,
    },
    /// Sweep thresholds over a test set and report precision, recall and f1
    Bench {
        #[arg(long, env = "FAQMATCH_MODEL")]
        model: PathBuf,
        /// CSV with columns test_question,expected_question
        #[arg(long)]
        testset: PathBuf,
        /// T | T1,T2,... | START:END:COUNT
        #[arg(long, default_value = thresholds::DEFAULT_SPEC, allow_hyphen_values = true)]
        thresholds: String,
        /// Curve CSV destination; printed to stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service
    Serve(commands::ServeArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Parse { source, proxy, out, json } => {
            let input = match (source.url, source.file) {
                (Some(url), _) => commands::Input::Url(url, proxy),
                (_, Some(file)) => commands::Input::File(file),
                _ => unreachable!("clap enforces one source"),
            };
            commands::parse(input, out, json)
        }
        Command::Build { source, proxy, out, embedder, dim, threshold, json } => {
            let input = match (source.url, source.file, source.pairs) {
                (Some(url), _, _) => commands::Input::Url(url, proxy),
                (_, Some(file), _) => commands::Input::File(file),
                (_, _, Some(pairs)) => commands::Input::Pairs(pairs),
                _ => unreachable!("clap enforces one source"),
            };
            commands::build(input, out, embedder, dim, threshold, json)
        }
        Command::Ask { model, threshold, fallback, json, question } => {
            commands::ask(model, threshold, fallback, json, question)
        }
        Command::Bench { model, testset, thresholds, out, json } => {
            commands::bench(model, testset, thresholds, out, json)
        }
        Command::Serve(args) => commands::serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("faqmatch: {e}");
            ExitCode::from(e.code())
        }
    }
}

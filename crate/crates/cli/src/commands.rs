use std::fmt;
use std::io::{BufRead, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use faqmatch_core::evaluation::{best_f1, load_test_set, write_curve, EvalError};
use faqmatch_core::model_store::PairRecord;
use faqmatch_core::{
    export_curve, load_model, parse_faq, save_model, threshold_sweep, EmbedderRegistry,
    EmbedderSpec, KnowledgeBase, MatchResult, Matcher, ParseReport, QaPair,
};
use faqmatch_service::server::pairs_from_records;
use faqmatch_service::{fetch_url, BodyEncoding, EngineConfig, ServiceConfig};

use crate::thresholds;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unusable input files.
    Input(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

fn input(e: impl fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn runtime(e: impl fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Result<T = ()> = std::result::Result<T, Failure>;

pub enum Input {
    Url(String, Option<String>),
    File(PathBuf),
    Pairs(PathBuf),
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn runtime_rt() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(runtime)
}

fn fetch(url: &str, proxy: Option<&str>) -> Result<Vec<u8>> {
    runtime_rt()?
        .block_on(fetch_url(url, proxy))
        .map_err(|e| match e {
            faqmatch_service::FetchError::InvalidUrl(_) => input(e),
            _ => runtime(e),
        })
}

fn parse_input(source: &Input) -> Result<(ParseReport, String)> {
    let (html, url, label) = match source {
        Input::Url(url, proxy) => (fetch(url, proxy.as_deref())?, Some(url.as_str()), url.clone()),
        Input::File(path) => (read(path)?, None, path.display().to_string()),
        Input::Pairs(_) => unreachable!("pairs files are not parsed"),
    };
    let report = parse_faq(&html, url).map_err(|e| input(format!("{label}: {e}")))?;
    Ok((report, label))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn print_report(report: &ParseReport) {
    println!("candidates: {}", report.candidate_count);
    println!(
        "question pattern: {} ({} votes)",
        report.winning_signature, report.winning_votes
    );
    println!("answer scope distance: {}", report.answer_scope_distance);
    println!("pairs: {}", report.pairs.len());
    if !report.empty_answers.is_empty() {
        println!("empty answers: {:?}", report.empty_answers);
    }
}

pub fn parse(source: Input, out: Option<PathBuf>, json: bool) -> Result {
    let (report, _) = parse_input(&source)?;
    if let Some(out) = &out {
        write_json(out, &report.pairs)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
        return Ok(());
    }
    print_report(&report);
    if out.is_none() {
        for p in &report.pairs {
            println!();
            println!("[{}] Q: {}", p.index, p.question);
            println!("    A: {}", p.answer);
        }
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<QaPair>> {
    let records: Vec<PairRecord> = serde_json::from_slice(&read(path)?)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(input(format!("{}: no pairs", path.display())));
    }
    Ok(pairs_from_records(records))
}

pub fn build(
    source: Input,
    out: PathBuf,
    embedder: String,
    dim: usize,
    threshold: f64,
    json: bool,
) -> Result {
    let registry = EmbedderRegistry::with_builtins();
    let spec = if embedder == faqmatch_core::embedding::BASELINE_ID {
        EmbedderSpec::baseline(dim)
    } else {
        EmbedderSpec::new(embedder, dim)
    };
    let embedder = registry.build(&spec).map_err(input)?;
    let (pairs, label) = match &source {
        Input::Pairs(path) => (read_pairs(path)?, path.display().to_string()),
        _ => {
            let (report, label) = parse_input(&source)?;
            (report.pairs, label)
        }
    };
    let kb = KnowledgeBase::build(pairs, embedder.as_ref(), threshold, label).map_err(input)?;
    save_model(&kb, &out).map_err(runtime)?;
    if json {
        let summary = serde_json::json!({
            "model": out,
            "pairs": kb.len(),
            "embedder": kb.embedder(),
        });
        println!("{summary}");
    } else {
        println!(
            "wrote {} ({} pairs, {} {}-d)",
            out.display(),
            kb.len(),
            kb.embedder().id,
            kb.embedder().dimension
        );
    }
    Ok(())
}

fn open_matcher(model: &Path) -> Result<Matcher> {
    if !model.exists() {
        return Err(input(format!("{}: no such model file", model.display())));
    }
    let kb = load_model(model).map_err(|e| input(format!("{}: {e}", model.display())))?;
    Matcher::from_registry(Arc::new(kb), &EmbedderRegistry::with_builtins()).map_err(input)
}

fn render(result: &MatchResult, fallback: &str, json: bool) -> Result<String> {
    if json {
        return serde_json::to_string(result).map_err(runtime);
    }
    Ok(match (&result.answer, &result.matched_question) {
        (Some(answer), Some(question)) => format!(
            "answer: {answer}\nmatched question: {question}\nconfidence: {:.4}\nsource: {}",
            result.confidence, result.source
        ),
        _ => format!("{fallback}\nconfidence: {:.4}", result.confidence),
    })
}

pub fn ask(
    model: PathBuf,
    threshold: Option<f64>,
    fallback: String,
    json: bool,
    question: Option<String>,
) -> Result {
    if let Some(t) = threshold {
        if !(-1.0..=1.0).contains(&t) {
            return Err(input(format!("threshold {t} outside [-1, 1]")));
        }
    }
    let matcher = open_matcher(&model)?;
    let answer = |q: &str| -> Result<String> {
        let r = matcher.answer(q, threshold).map_err(runtime)?;
        render(&r, &fallback, json)
    };
    if let Some(q) = question {
        if q.trim().is_empty() {
            return Err(input("question is empty"));
        }
        println!("{}", answer(&q)?);
        return Ok(());
    }
    let stdin = std::io::stdin();
    let interactive = stdin.is_terminal();
    let mut stdout = std::io::stdout();
    let prompt = |out: &mut std::io::Stdout| {
        if interactive {
            let _ = write!(out, "> ");
            let _ = out.flush();
        }
    };
    prompt(&mut stdout);
    for line in stdin.lock().lines() {
        let line = line.map_err(runtime)?;
        if !line.trim().is_empty() {
            writeln!(stdout, "{}", answer(line.trim())?).map_err(runtime)?;
            if interactive && !json {
                writeln!(stdout).map_err(runtime)?;
            }
        }
        prompt(&mut stdout);
    }
    Ok(())
}

pub fn bench(
    model: PathBuf,
    testset: PathBuf,
    spec: String,
    out: Option<PathBuf>,
    json: bool,
) -> Result {
    let thresholds = thresholds::parse(&spec).map_err(|e| input(format!("--thresholds: {e}")))?;
    let matcher = open_matcher(&model)?;
    if !testset.exists() {
        return Err(input(format!("{}: no such test set", testset.display())));
    }
    let questions: Vec<&str> = matcher.knowledge_base().questions().collect();
    let cases = load_test_set(&testset, &questions).map_err(|e| match e {
        EvalError::Io(_) => runtime(format!("{}: {e}", testset.display())),
        _ => input(format!("{}: {e}", testset.display())),
    })?;
    let results = threshold_sweep(&matcher, &cases, &thresholds).map_err(runtime)?;
    match &out {
        Some(path) => export_curve(&results, path).map_err(runtime)?,
        None => write_curve(&results, std::io::stdout().lock()).map_err(runtime)?,
    }
    let best = best_f1(&results).expect("at least one threshold");
    if json {
        println!("{}", serde_json::to_string(best).map_err(runtime)?);
    } else {
        let line = format!(
            "best f1 {:.6} at threshold {} (precision {:.6}, recall {:.6}; tp {} fp {} fn {}; {} cases)",
            best.f1,
            best.threshold,
            best.precision,
            best.recall,
            best.counts.tp,
            best.counts.fp,
            best.counts.fn_,
            cases.len()
        );
        // keep stdout a clean CSV when the curve goes there
        if out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct ServeArgs {
    /// TOML configuration file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// faq-model mode
    #[arg(long, group = "mode")]
    model: Option<PathBuf>,
    /// faq-web mode
    #[arg(long, group = "mode")]
    url: Option<String>,
    /// faq-custom mode: JSON array of {"question", "answer"} objects
    #[arg(long, group = "mode")]
    pairs: Option<PathBuf>,
    /// Knowledge-engine mode: webhook URL
    #[arg(long, group = "mode")]
    engine: Option<String>,
    #[arg(long, requires = "engine")]
    engine_question_key: Option<String>,
    #[arg(long, requires = "engine")]
    engine_response_key: Option<String>,
    #[arg(long, requires = "engine")]
    engine_timeout_ms: Option<u64>,
    /// Send the question as a JSON object instead of a form field
    #[arg(long, requires = "engine")]
    engine_json: bool,
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Allowed CORS origin; repeatable
    #[arg(long = "origin")]
    origins: Vec<String>,
    #[arg(long)]
    proxy: Option<String>,
    #[arg(long)]
    fallback: Option<String>,
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
}

fn clear_modes(c: &mut ServiceConfig) {
    c.model_path = None;
    c.faq_url = None;
    c.pairs = None;
    c.engine = None;
}

fn service_config(args: ServeArgs) -> Result<ServiceConfig> {
    let mut c = match &args.config {
        Some(path) => ServiceConfig::from_file(path).map_err(input)?,
        None => ServiceConfig::default(),
    };
    c.apply_env(|k| std::env::var(k).ok()).map_err(input)?;
    if let Some(b) = args.bind {
        c.bind_address = b;
    }
    if let Some(m) = args.model {
        clear_modes(&mut c);
        c.model_path = Some(m);
    }
    if let Some(u) = args.url {
        clear_modes(&mut c);
        c.faq_url = Some(u);
    }
    if let Some(p) = args.pairs {
        let records: Vec<PairRecord> = serde_json::from_slice(&read(&p)?)
            .map_err(|e| input(format!("{}: {e}", p.display())))?;
        clear_modes(&mut c);
        c.pairs = Some(records);
    }
    if let Some(url) = args.engine {
        let mut e = EngineConfig::new(url);
        if let Some(k) = args.engine_question_key {
            e.question_param_key = k;
        }
        e.response_value_key = args.engine_response_key;
        if let Some(ms) = args.engine_timeout_ms {
            e.timeout = Duration::from_millis(ms);
        }
        if args.engine_json {
            e.body = BodyEncoding::Json;
        }
        clear_modes(&mut c);
        c.engine = Some(e);
    }
    if args.threshold.is_some() {
        c.threshold = args.threshold;
    }
    if !args.origins.is_empty() {
        c.allowed_origins = args.origins;
    }
    if args.proxy.is_some() {
        c.proxy_prefix = args.proxy;
    }
    if let Some(f) = args.fallback {
        c.fallback_message = f;
    }
    if args.embedder.is_some() || args.dim.is_some() {
        let dim = args.dim.unwrap_or(c.embedder.dimension);
        c.embedder = match args.embedder {
            Some(id) if id != faqmatch_core::embedding::BASELINE_ID => EmbedderSpec::new(id, dim),
            _ => EmbedderSpec::baseline(dim),
        };
    }
    c.validate().map_err(input)?;
    Ok(c)
}

fn init_logging() {
    let color = std::env::var_os("NO_COLOR").is_none() && std::io::stderr().is_terminal();
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(color)
        .try_init();
}

pub fn serve(args: ServeArgs) -> Result {
    let config = service_config(args)?;
    init_logging();
    runtime_rt()?.block_on(async move {
        let mut svc = faqmatch_service::start(config, Arc::new(EmbedderRegistry::with_builtins()))
            .await
            .map_err(|e| match e {
                faqmatch_service::ServiceError::Model(_) | faqmatch_service::ServiceError::Config(_) => input(e),
                _ => runtime(e),
            })?;
        println!("listening on http://{} ({})", svc.addr, svc.service.mode());
        let _ = std::io::stdout().flush();
        tokio::select! {
            r = tokio::signal::ctrl_c() => r.map_err(runtime)?,
            r = svc.join() => return r.map_err(runtime),
        }
        tracing::info!(addr = %svc.addr, "shutting down");
        svc.shutdown().await.map_err(runtime)
    })
}

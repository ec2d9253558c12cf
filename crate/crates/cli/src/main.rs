use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use paco_core::attributes::{measure_all, Document, Providers};
use paco_core::harness::{
    evaluate_corpus, load_corpus, load_traces, write_outputs, write_report, CorpusRecord, Method, RunConfig, RunReport,
};
use paco_core::policy::{rule_editor, HttpChatBackend, LlmPolicy, Policy, PromptLibrary, ScriptedPolicy};
use paco_core::search::run_search;

const SIDECAR_VAR: &str = "PACO_SIDECAR_URL";

#[derive(Parser)]
#[command(
    name = "paco",
    version,
    about = "Plan multi-attribute controlled summaries by tree search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run methods over a corpus and write a report with per-document traces.
    Run(RunArgs),
    /// Search one document and print the chosen summary.
    Search(SearchArgs),
    /// Measure a summary's attributes against a document.
    Measure(MeasureArgs),
    /// Rebuild report tables from a trace directory.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    /// Chat-completions endpoint from PACO_LLM_BASE_URL.
    Http,
    /// Offline scripted summaries.
    Scripted,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value = "scripted")]
    provider: ProviderKind,
    /// Script file for the scripted provider; without one, a rule-based
    /// editor stands in for the model.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling seed passed to the model.
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement sidecar base URL (default: PACO_SIDECAR_URL, else offline providers).
    #[arg(long)]
    sidecar: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated methods.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "paco,single,implicit,explicit,explicit-adaptive"
    )]
    method: Vec<Method>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[arg(long, default_value = "paco-out")]
    out: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Document id; defaults to the first record.
    #[arg(long)]
    id: Option<String>,
    /// Directory for the search trace.
    #[arg(long, default_value = "paco-out")]
    out: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, conflicts_with = "summary_file", required_unless_present = "summary_file")]
    summary: Option<String>,
    #[arg(long)]
    summary_file: Option<PathBuf>,
    #[arg(long)]
    sidecar: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of `<doc-id>.json` traces.
    #[arg(long)]
    traces: PathBuf,
    /// Where to write report.tsv and report.md; tables go to stdout only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the Markdown table instead of TSV.
    #[arg(long)]
    markdown: bool,
}

fn providers(sidecar: Option<&str>) -> Providers {
    match sidecar.map(str::to_string).or_else(|| std::env::var(SIDECAR_VAR).ok()) {
        Some(url) if !url.is_empty() => Providers::sidecar(&url),
        _ => Providers::fallback(),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn build_policy(args: &PolicyArgs, cfg: &mut RunConfig) -> Result<Box<dyn Policy>> {
    if let Some(seed) = args.seed {
        cfg.llm.seed = Some(seed);
    }
    Ok(match args.provider {
        ProviderKind::Scripted => match &args.script {
            Some(path) => {
                Box::new(ScriptedPolicy::from_file(path).with_context(|| format!("loading script {}", path.display()))?)
            }
            None => Box::new(ScriptedPolicy::from_generator(rule_editor())),
        },
        ProviderKind::Http => {
            let prompts = match &args.prompts {
                Some(dir) => PromptLibrary::with_overrides(dir)?,
                None => PromptLibrary::builtin(),
            };
            Box::new(LlmPolicy::new(HttpChatBackend::from_env()?, prompts, cfg.llm.clone()))
        }
    })
}

fn pick(corpus: &Path, id: Option<&str>) -> Result<Document> {
    let records = load_corpus(corpus)?;
    let found = match id {
        Some(id) => records.into_iter().find(|r| r.document.id == id),
        None => records.into_iter().next(),
    };
    match found {
        Some(CorpusRecord { document, .. }) => Ok(document),
        None => bail!("no matching document in {}", corpus.display()),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.policy.config.as_deref())?;
    let policy = build_policy(&args.policy, &mut cfg)?;
    let corpus = load_corpus(&args.corpus)?;
    let traces = evaluate_corpus(
        &corpus,
        &args.method,
        policy.as_ref(),
        &providers(args.policy.sidecar.as_deref()),
        &cfg.search,
        usize::from(args.jobs),
    )?;
    let report = RunReport::from_traces(&traces);
    write_outputs(&args.out, &traces, &report, Some(&cfg))?;
    print!("{}", report.to_tsv());
    eprintln!("wrote {}", args.out.join("report.tsv").display());
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let mut cfg = load_config(args.policy.config.as_deref())?;
    let policy = build_policy(&args.policy, &mut cfg)?;
    let doc = pick(&args.corpus, args.id.as_deref())?;
    let res = run_search(
        &doc,
        policy.as_ref(),
        &providers(args.policy.sidecar.as_deref()),
        &cfg.search,
    )?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let safe: String = doc
        .id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    let path = args.out.join(format!("search-{safe}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&res.trace())? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("{}", res.summary);
    eprintln!(
        "degree {:.6} via [{}] after {} simulations; trace: {}",
        res.breakdown.degree,
        res.path.iter().map(|a| a.name()).collect::<Vec<_>>().join(", "),
        res.simulations,
        path.display()
    );
    Ok(())
}

fn measure(args: MeasureArgs) -> Result<()> {
    let doc = pick(&args.corpus, args.id.as_deref())?;
    let summary = match (args.summary, args.summary_file) {
        (Some(s), _) => s,
        (None, Some(p)) => std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let measured = measure_all(&summary, &doc, &providers(args.sidecar.as_deref()))?;
    println!("{}", serde_json::to_string_pretty(&measured)?);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let traces = load_traces(&args.traces)?;
    if traces.is_empty() {
        bail!("no traces in {}", args.traces.display());
    }
    let report = RunReport::from_traces(&traces);
    if let Some(out) = &args.out {
        write_report(out, &report, None)?;
    }
    if args.markdown {
        print!("{}", report.to_markdown(None));
    } else {
        print!("{}", report.to_tsv());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Search(a) => search(a),
        Command::Measure(a) => measure(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

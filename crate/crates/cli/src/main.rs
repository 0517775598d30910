mod render;
mod script;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use quark_core::analysis::analyze;
use quark_core::inference::DEFAULT_SEED;
use quark_core::speclang::{bind_spec, parse_spec, BindError, ParseErrors};
use quark_core::{
    anneal, generate_candidates, load_kb, AnnealParams, BoundSpec, Configuration, DecisionId, KnowledgeBase,
    ScoreWeights, Session, Threshold,
};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "quark", version, about = "Knowledge-driven architectural decision making")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for the configuration search.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// JSON file with scoring weights.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Suggestion threshold in (0, 1].
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a knowledge base document.
    ValidateKb { kb: PathBuf },
    /// Parse a specification, and bind it when a knowledge base is given.
    ParseSpec { spec: PathBuf, kb: Option<PathBuf> },
    /// Rank candidate decisions and search for a best configuration.
    Infer {
        kb: PathBuf,
        spec: PathBuf,
        /// Decision already taken (repeatable).
        #[arg(long = "decide")]
        decide: Vec<String>,
    },
    /// Analyse a configuration against a specification.
    Analyze {
        kb: PathBuf,
        spec: PathBuf,
        #[arg(long = "decide")]
        decide: Vec<String>,
    },
    /// Execute a scripted session.
    Run {
        script: PathBuf,
        /// Write the resulting session document here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Render the report of a saved session.
    Report { session: PathBuf, kb: PathBuf },
}

/// A failed command and its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Spec(String),
    Kb(String),
    Script(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Spec(_) => 2,
            Failure::Kb(_) => 3,
            Failure::Script(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Spec(m) | Failure::Kb(m) | Failure::Script(m) => m,
        }
    }

    pub fn parse(path: &Path, errors: &ParseErrors) -> Self {
        let lines: Vec<String> = errors.0.iter().map(|e| format!("{}:{e}", path.display())).collect();
        Failure::Spec(lines.join("\n"))
    }

    pub fn bind(path: &Path, error: &BindError) -> Self {
        Failure::Spec(format!("{}: {error}", path.display()))
    }
}

pub struct Options {
    pub format: Format,
    pub seed: u64,
    pub weights: ScoreWeights,
    pub threshold: Threshold,
}

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn read_kb(path: &Path) -> Result<Arc<KnowledgeBase>, Failure> {
    load_kb(&read(path)?).map(Arc::new).map_err(|e| Failure::Kb(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path, kb: &KnowledgeBase) -> Result<BoundSpec, Failure> {
    let spec = parse_spec(&read(path)?).map_err(|e| Failure::parse(path, &e))?;
    let bound = bind_spec(&spec, kb).map_err(|e| Failure::bind(path, &e))?;
    for w in &bound.warnings {
        eprintln!("{}: warning: statement {}: {}", path.display(), w.statement + 1, w.message);
    }
    Ok(bound)
}

fn configuration(ids: &[String], kb: &KnowledgeBase) -> Result<Configuration, Failure> {
    ids.iter()
        .map(|id| {
            let d = DecisionId::from(id.as_str());
            match kb.decision(&d) {
                Some(_) => Ok(d),
                None => Err(Failure::Spec(format!("unknown decision {id:?}"))),
            }
        })
        .collect()
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn validate_kb(path: &Path, opts: &Options) -> Result<String, Failure> {
    let kb = read_kb(path)?;
    let counts = (kb.attributes.len(), kb.kinds.len(), kb.elements.len(), kb.decisions.len());
    Ok(match opts.format {
        Format::Json => pretty(&json!({
            "valid": true,
            "version": kb.version,
            "attributes": counts.0,
            "kinds": counts.1,
            "elements": counts.2,
            "decisions": counts.3,
        })),
        Format::Text => format!(
            "{}: knowledge base {} is valid\n  {} attributes, {} kinds, {} elements, {} decisions",
            path.display(),
            kb.version,
            counts.0,
            counts.1,
            counts.2,
            counts.3
        ),
    })
}

fn parse_spec_cmd(spec_path: &Path, kb_path: Option<&Path>, opts: &Options) -> Result<String, Failure> {
    let spec = parse_spec(&read(spec_path)?).map_err(|e| Failure::parse(spec_path, &e))?;
    let bound = match kb_path {
        Some(p) => {
            let kb = read_kb(p)?;
            Some(bind_spec(&spec, &kb).map_err(|e| Failure::bind(spec_path, &e))?)
        }
        None => None,
    };
    let warnings = bound.as_ref().map(|b| b.warnings.clone()).unwrap_or_default();
    Ok(match opts.format {
        Format::Json => pretty(&json!({
            "statements": spec.statements,
            "canonical": quark_core::serialize_spec(&spec),
            "bound": bound.is_some(),
            "warnings": warnings,
        })),
        Format::Text => render::spec(&spec, bound.as_ref()),
    })
}

fn infer(kb_path: &Path, spec_path: &Path, decide: &[String], opts: &Options) -> Result<String, Failure> {
    let kb = read_kb(kb_path)?;
    let spec = read_spec(spec_path, &kb)?;
    let config = configuration(decide, &kb)?;
    let candidates = generate_candidates(&config, &spec, &kb, &opts.weights);
    let search = anneal(&spec, &kb, &opts.weights, opts.seed, &AnnealParams::default())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(match opts.format {
        Format::Json => pretty(&json!({
            "configuration": config,
            "candidates": candidates,
            "search": { "seed": opts.seed, "configuration": search.configuration, "score": search.score },
        })),
        Format::Text => render::candidates(&candidates, &config, &search, opts.seed),
    })
}

fn analyze_cmd(kb_path: &Path, spec_path: &Path, decide: &[String], opts: &Options) -> Result<String, Failure> {
    let kb = read_kb(kb_path)?;
    let spec = read_spec(spec_path, &kb)?;
    let config = configuration(decide, &kb)?;
    let report = analyze(&config, &spec, &kb, opts.threshold);
    Ok(match opts.format {
        Format::Json => pretty(&json!({ "configuration": config, "report": report })),
        Format::Text => render::analysis(&report, &config, &kb),
    })
}

fn report(session_path: &Path, kb_path: &Path, opts: &Options) -> Result<String, Failure> {
    let kb = read_kb(kb_path)?;
    let session = Session::load(&read(session_path)?, kb)
        .map_err(|e| Failure::Usage(format!("{}: {e}", session_path.display())))?;
    let report = session.final_report();
    Ok(match opts.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_markdown(),
    })
}

fn options(cli: &Cli) -> Result<Options, Failure> {
    let weights = match &cli.weights {
        Some(p) => ScoreWeights::from_json(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => ScoreWeights::default(),
    };
    let threshold = match cli.threshold {
        Some(t) => Threshold::new(t).map_err(Failure::Usage)?,
        None => Threshold::default(),
    };
    Ok(Options { format: cli.format, seed: cli.seed, weights, threshold })
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let opts = options(cli)?;
    match &cli.command {
        Command::ValidateKb { kb } => validate_kb(kb, &opts),
        Command::ParseSpec { spec, kb } => parse_spec_cmd(spec, kb.as_deref(), &opts),
        Command::Infer { kb, spec, decide } => infer(kb, spec, decide, &opts),
        Command::Analyze { kb, spec, decide } => analyze_cmd(kb, spec, decide, &opts),
        Command::Run { script, save } => script::run(script, save.as_deref(), &opts),
        Command::Report { session, kb } => report(session, kb, &opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.trim_end());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

//! `uxeval` command line: corpus ingestion, paper annotation, benchmarking,
//! graph export and the HTTP service.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use uxeval::corpus::{annotate_paper, load_corpus, load_metrics, save_corpus, Annotation, AuditReport, CorpusPaths};
use uxeval::embed::EmbeddingConfig;
use uxeval::evalharness::{load_samples, run_benchmark, BenchReport, PipelineRecommender, RecordedPredictions, Recommender};
use uxeval::graph::{build_graph, EdgeWeightConfig};
use uxeval::llm::{ClientConfig, ClientKind, Llm};
use uxeval::recommend::Engine;
use uxeval::service::{http, ProjectService, ServiceConfig};

#[derive(Parser)]
#[command(name = "uxeval", version, about = "UX evaluation metric recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpus files and write them, canonicalized, to a directory.
    Ingest {
        #[arg(long)]
        papers: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        incidents: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate full-text papers (a file, or every `.txt` file in a directory).
    Annotate {
        #[arg(long)]
        fulltext: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        /// `mock:<script.json>`, or omit to use the `[llm]` block of `--config`.
        #[arg(long)]
        llm: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write annotations and the audit report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a recommender against labelled samples.
    Bench {
        #[arg(long)]
        samples: PathBuf,
        /// `pipeline`, `mock:<script.json>` or `predictions:<file.json>`.
        #[arg(long)]
        recommender: String,
        /// Second recommender, compared with a paired t-test.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// JSON report path; a Markdown table is written next to it.
        #[arg(long)]
        report: PathBuf,
        /// Service config providing corpus, embedding and LLM settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Export the knowledge graph with its communities.
    Graph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

type CliResult = Result<(), String>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest {
            papers,
            metrics,
            incidents,
            out,
        } => ingest(CorpusPaths { papers, metrics, incidents }, &out),
        Command::Annotate {
            fulltext,
            metrics,
            llm,
            config,
            out,
        } => annotate(&fulltext, &metrics, llm.as_deref(), config.as_deref(), out.as_deref()),
        Command::Bench {
            samples,
            recommender,
            baseline,
            runs,
            report,
            config,
        } => bench(&samples, &recommender, baseline.as_deref(), runs, &report, config.as_deref()),
        Command::Graph { corpus, format, out } => graph(&corpus, format, out.as_deref()),
        Command::Serve { config } => serve(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, String> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(ServiceConfig::default()),
    }
}

fn mock_llm(script: &str, base: &ClientConfig) -> Result<Llm, String> {
    let cfg = ClientConfig {
        kind: ClientKind::Mock,
        script: Some(script.into()),
        ..base.clone()
    };
    Llm::from_config(&cfg).map_err(|e| e.to_string())
}

fn ingest(paths: CorpusPaths, out: &Path) -> CliResult {
    let corpus = load_corpus(&paths).map_err(|e| e.to_string())?;
    save_corpus(&corpus, out).map_err(|e| e.to_string())?;
    let report = corpus.report();
    println!(
        "ingested {} papers, {} metrics, {} incidents into {}",
        corpus.papers().len(),
        corpus.metrics().len(),
        corpus.incidents().len(),
        out.display()
    );
    for (paper, cited) in &report.dangling_citations {
        println!("dangling citation: {paper} -> {cited}");
    }
    for (paper, written, canonical) in &report.canonicalized_metrics {
        println!("canonicalized: {paper}: `{written}` -> `{canonical}`");
    }
    Ok(())
}

#[derive(Serialize)]
struct AnnotatedPaper {
    file: String,
    annotation: Annotation,
    warnings: Vec<uxeval::llm::StageWarning>,
}

#[derive(Serialize)]
struct AnnotateOutput {
    papers: Vec<AnnotatedPaper>,
    failures: Vec<(String, String)>,
    audit: AuditReport,
    measured_rate: f64,
    in_candidate_list_rate: f64,
    accurate_rate: f64,
}

fn annotate(fulltext: &Path, metrics: &Path, llm: Option<&str>, config: Option<&Path>, out: Option<&Path>) -> CliResult {
    let repo = load_metrics(metrics).map_err(|e| e.to_string())?;
    let cfg = load_config(config)?;
    let llm = match llm {
        Some(spec) => {
            let script = spec
                .strip_prefix("mock:")
                .ok_or_else(|| format!("--llm must be mock:<script>, got `{spec}`"))?;
            mock_llm(script, &cfg.llm)?
        }
        None => Llm::from_config(&cfg.llm).map_err(|e| e.to_string())?,
    };

    let files = if fulltext.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(fulltext)
            .map_err(|e| format!("{}: {e}", fulltext.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        files
    } else {
        vec![fulltext.to_path_buf()]
    };

    let mut papers = Vec::new();
    let mut failures = Vec::new();
    for file in &files {
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
        match annotate_paper(&llm, &text, &repo) {
            Ok((annotation, warnings)) => papers.push(AnnotatedPaper {
                file: name,
                annotation,
                warnings,
            }),
            Err(e) => failures.push((name, e.to_string())),
        }
    }
    let audit = AuditReport::from_annotations(papers.iter().map(|p| &p.annotation));
    let output = AnnotateOutput {
        measured_rate: audit.measured_rate(),
        in_candidate_list_rate: audit.in_candidate_list_rate(),
        accurate_rate: audit.accurate_rate(),
        papers,
        failures,
        audit,
    };
    eprintln!(
        "annotated {} paper(s): {} identified, {} accurate",
        output.papers.len(),
        output.audit.identified,
        output.audit.accurate()
    );
    write_output(out, &to_json(&output))
}

fn build_engine(cfg: &ServiceConfig, llm: Llm) -> Result<Engine, String> {
    let corpus = load_corpus(&cfg.corpus_paths()).map_err(|e| e.to_string())?;
    let embedder = cfg.embedding.build().map_err(|e| e.to_string())?;
    Engine::build(Arc::new(corpus), &cfg.edge_weights, embedder, llm, cfg.risk.clone()).map_err(|e| e.to_string())
}

/// Holds whatever a recommender spec needs to stay alive during the run.
enum RecommenderSource {
    Engine(Box<Engine>, String),
    Recorded(RecordedPredictions),
}

impl RecommenderSource {
    fn parse(spec: &str, cfg: &ServiceConfig) -> Result<Self, String> {
        if spec == "pipeline" {
            let llm = Llm::from_config(&cfg.llm).map_err(|e| e.to_string())?;
            Ok(RecommenderSource::Engine(Box::new(build_engine(cfg, llm)?), spec.into()))
        } else if let Some(script) = spec.strip_prefix("mock:") {
            let llm = mock_llm(script, &cfg.llm)?;
            Ok(RecommenderSource::Engine(Box::new(build_engine(cfg, llm)?), spec.into()))
        } else if let Some(file) = spec.strip_prefix("predictions:") {
            RecordedPredictions::load(Path::new(file))
                .map(RecommenderSource::Recorded)
                .map_err(|e| e.to_string())
        } else {
            Err(format!("unknown recommender `{spec}`"))
        }
    }

    fn recommender(&self) -> Box<dyn Recommender + '_> {
        match self {
            RecommenderSource::Engine(engine, label) => Box::new(PipelineRecommender {
                engine,
                label: label.clone(),
            }),
            RecommenderSource::Recorded(r) => Box::new(r.clone()),
        }
    }
}

fn bench(
    samples: &Path,
    recommender: &str,
    baseline: Option<&str>,
    runs: usize,
    report: &Path,
    config: Option<&Path>,
) -> CliResult {
    let cfg = load_config(config)?;
    let samples = load_samples(samples).map_err(|e| e.to_string())?;
    // Scoring only needs the metric repository.
    let repo = load_metrics(&cfg.corpus_paths().metrics).map_err(|e| e.to_string())?;

    let system = RecommenderSource::parse(recommender, &cfg)?;
    let system = run_benchmark(&samples, system.recommender().as_ref(), runs, &repo);
    let system = system.map_err(|e| e.to_string())?;
    let baseline = match baseline {
        Some(spec) => {
            let source = RecommenderSource::parse(spec, &cfg)?;
            let result = run_benchmark(&samples, source.recommender().as_ref(), runs, &repo);
            Some(result.map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let report_doc = BenchReport::new(system, baseline);
    let markdown = report_doc.to_markdown();
    write_output(Some(report), &to_json(&report_doc))?;
    write_output(Some(&report.with_extension("md")), &markdown)?;
    print!("{markdown}");
    Ok(())
}

fn graph(corpus_dir: &Path, format: GraphFormat, out: Option<&Path>) -> CliResult {
    let corpus = load_corpus(&CorpusPaths::in_dir(corpus_dir)).map_err(|e| e.to_string())?;
    let embedder = EmbeddingConfig::default().build().map_err(|e| e.to_string())?;
    let graph = build_graph(Arc::new(corpus), &EdgeWeightConfig::default(), embedder.as_ref()).map_err(|e| e.to_string())?;
    let communities = graph.detect_communities();
    let text = match format {
        GraphFormat::Json => graph.to_json(Some(&communities)),
        GraphFormat::Dot => graph.to_dot(Some(&communities)),
    };
    write_output(out, &text)
}

fn serve(config: &Path) -> CliResult {
    let cfg = ServiceConfig::load(config).map_err(|e| e.to_string())?;
    let svc = ProjectService::from_config(&cfg).map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime
        .block_on(http::serve(Arc::new(svc), &cfg.bind))
        .map_err(|e| format!("{}: {e}", cfg.bind))
}

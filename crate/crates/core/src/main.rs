use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use concept_workbench::context::FormalContext;
use concept_workbench::corpus::{load_documents, Corpus, InvertedIndex, Language, Section};
use concept_workbench::esom::{self, FeatureVector, MapLabel, Topology, TrainingSchedule};
use concept_workbench::fca::{build_lattice, compute_concepts_bounded, DEFAULT_CONCEPT_LIMIT};
use concept_workbench::hmm::{SymbolMap, UnmappedPolicy};
use concept_workbench::service::{
    ComposeKind, ComposeParams, CreateSession, HmmMode, InvestigationParams, PhaseParams, PhaseRequest,
    Profile, SegmentChoice, Session, Workbench, DATA_DIR_ENV,
};
use concept_workbench::time::Granularity;
use concept_workbench::Ontology;

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "workbench", version, about = "Concept discovery over timestamped text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, report on it and optionally write its index.
    Ingest(IngestArgs),
    /// Ontology commands.
    #[command(subcommand)]
    Ontology(OntologyCommand),
    /// Formal context commands.
    #[command(subcommand)]
    Context(ContextCommand),
    /// Concept lattice of a context file.
    Fca(FcaArgs),
    /// Life tracks of entities through the concept lattice.
    Tca(TcaArgs),
    /// Train an emergent self-organizing map.
    Esom(EsomArgs),
    /// Process model or Baum-Welch HMM from event sequences.
    Hmm(HmmArgs),
    /// Fetch an artifact from a stored session.
    Export(ExportArgs),
    /// Stored sessions.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Expected language (en, nl, ru); the corpus declares its own.
    #[arg(long)]
    language: Option<Language>,
    /// Sections to index, comma separated.
    #[arg(long, default_value = "title,authors,abstract,keywords,body")]
    sections: String,
    /// Write the index JSON here.
    #[arg(long)]
    index_out: Option<PathBuf>,
    /// Print the documents matching each phrase.
    #[arg(long)]
    phrase: Vec<String>,
}

#[derive(Subcommand)]
enum OntologyCommand {
    /// Parse and resolve an ontology; with a corpus, also check its terms.
    Check {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
}

#[derive(Args)]
struct Selection {
    /// Context attributes, comma separated; default all.
    #[arg(long, value_delimiter = ',')]
    attributes: Vec<String>,
    /// Only these document ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    documents: Option<Vec<String>>,
    /// Segment to analyse, as RULE=SEGMENT.
    #[arg(long)]
    segment: Option<String>,
    /// Object-cluster rule producing composite objects.
    #[arg(long)]
    object_cluster: Option<String>,
    #[arg(long)]
    clarify: bool,
}

impl Selection {
    fn params(&self) -> Result<InvestigationParams> {
        let segmentation = match &self.segment {
            Some(s) => {
                let (rule, segment) = s.split_once('=').ok_or("--segment expects RULE=SEGMENT")?;
                Some(SegmentChoice {
                    rule: rule.into(),
                    segment: segment.into(),
                })
            }
            None => None,
        };
        Ok(InvestigationParams {
            attributes: self.attributes.clone(),
            documents: self.documents.clone(),
            segmentation,
            object_cluster: self.object_cluster.clone(),
            clarify: self.clarify,
            ..Default::default()
        })
    }
}

#[derive(Subcommand)]
enum ContextCommand {
    /// Evaluate ontology attributes on the corpus.
    Build {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        selection: Selection,
        /// json or cxt.
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FcaArgs {
    /// Context as JSON or Burmeister (.cxt).
    #[arg(long)]
    context: PathBuf,
    /// json or dot.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long, default_value_t = DEFAULT_CONCEPT_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TcaArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    selection: Selection,
    /// Object-cluster rule naming the tracked entity.
    #[arg(long)]
    entity_rule: String,
    #[arg(long, default_value = "day")]
    granularity: Granularity,
    /// json or dot.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EsomArgs {
    /// Train on context rows from this file.
    #[arg(long, conflicts_with = "vectors")]
    context: Option<PathBuf>,
    /// Train on a JSON list of {object_id, values}.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value_t = esom::DEFAULT_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = esom::DEFAULT_COLS)]
    cols: usize,
    /// Use the 50x82 grid.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value = "toroid")]
    topology: Topology,
    #[arg(long, default_value_t = esom::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// json (map) or checkpoint.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HmmArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Object-cluster rule naming the entity (e.g. per patient).
    #[arg(long)]
    entity_rule: String,
    /// Structured field holding the activity.
    #[arg(long)]
    symbol_field: String,
    /// JSON file {"groups": [...], "codes": {code: group}} merging codes.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Skip documents whose activity has no symbol instead of failing.
    #[arg(long)]
    skip_unmapped: bool,
    /// Train a Baum-Welch model with this many states instead of the
    /// one-state-per-symbol process model.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// json (graph), dot, checkpoint or sequences.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    session: String,
    #[arg(long)]
    artifact: String,
    #[arg(long, default_value = "json")]
    format: String,
    /// Payload format inside an xml envelope.
    #[arg(long)]
    payload: Option<String>,
    /// Session directory; defaults to $WORKBENCH_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Create a session and print its id.
    Create {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run a phase from a profile JSON file, or a stored profile by name.
    Run {
        #[arg(long)]
        session: String,
        #[arg(long, conflicts_with = "stored")]
        profile: Option<PathBuf>,
        #[arg(long)]
        stored: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Print the session summary.
    Show {
        #[arg(long)]
        session: String,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()).into()),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn workbench(dir: Option<&Path>) -> Result<Workbench> {
    Ok(match dir {
        Some(d) => Workbench::with_data_dir(d)?,
        None if std::env::var_os(DATA_DIR_ENV).is_some() => Workbench::from_env()?,
        None => return Err(format!("no session directory: pass --data-dir or set {DATA_DIR_ENV}").into()),
    })
}

/// In-memory session over the two input files.
fn session(inputs: &Inputs) -> Result<Session> {
    let corpus = read(&inputs.corpus)?;
    let ontology = read(&inputs.ontology)?;
    Ok(Session::create(
        "cli",
        &corpus,
        &ontology,
        &inputs.corpus.display().to_string(),
        Utc::now(),
    )?)
}

fn load_context(path: &Path) -> Result<FormalContext> {
    let text = read(path)?;
    Ok(if text.trim_start().starts_with('{') {
        FormalContext::from_json(&text)?
    } else {
        FormalContext::from_burmeister(&text)?
    })
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run_pipeline(s: &mut Session, selection: &Selection, kind: ComposeKind) -> Result<()> {
    let start = Profile::new("context", PhaseParams::StartInvestigation(selection.params()?));
    print_warnings(&s.run_phase(&start)?.warnings);
    let compose = Profile::new(
        "artifact",
        PhaseParams::ComposeArtifact(ComposeParams {
            output: "artifact".into(),
            context: "context".into(),
            kind,
        }),
    );
    print_warnings(&s.run_phase(&compose)?.warnings);
    Ok(())
}

#[derive(Deserialize)]
struct GroupsFile {
    groups: Vec<String>,
    codes: BTreeMap<String, String>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let text = read(&a.corpus)?;
            let corpus = Corpus::from_xml(&text, &a.corpus.display().to_string(), Utc::now())?;
            if let Some(lang) = a.language {
                load_documents(&a.corpus, lang)?;
            }
            let sections = Section::parse_list(&a.sections)?;
            let index = InvertedIndex::build(&corpus, &sections);
            println!(
                "{} documents, language {}, {} terms, analyzer {}",
                corpus.len(),
                corpus.language().code(),
                index.term_count(),
                index.analyzer_id()
            );
            for p in &a.phrase {
                let hits: Vec<String> = index.match_phrase(p)?.into_iter().collect();
                println!("{p:?}: {}", hits.join(" "));
            }
            if let Some(out) = a.index_out {
                emit(Some(&out), &index.to_json())?;
            }
        }
        Command::Ontology(OntologyCommand::Check { ontology, corpus }) => {
            let ont = Ontology::from_xml(&read(&ontology)?)?;
            println!(
                "ok: {} clusters, {} attributes, {} object-cluster rules, {} segmentation rules",
                ont.clusters().count(),
                ont.attribute_names().len(),
                ont.object_cluster_rules().count(),
                ont.segmentation_rules().count()
            );
            if let Some(c) = corpus {
                let corpus = Corpus::from_xml(&read(&c)?, &c.display().to_string(), Utc::now())?;
                let index = InvertedIndex::build(&corpus, &Section::ALL.into_iter().collect());
                ont.validate_terms(&index)?;
                println!("all terms analyse to non-empty phrases");
            }
        }
        Command::Context(ContextCommand::Build {
            inputs,
            selection,
            format,
            out,
        }) => {
            let mut s = session(&inputs)?;
            let p = Profile::new("context", PhaseParams::StartInvestigation(selection.params()?));
            print_warnings(&s.run_phase(&p)?.warnings);
            emit(out.as_deref(), &s.get_artifact("context", &format, None)?)?;
        }
        Command::Fca(a) => {
            let ctx = load_context(&a.context)?;
            let lat = build_lattice(&ctx, compute_concepts_bounded(&ctx, a.limit)?)?;
            emit(a.out.as_deref(), &lat.export(&a.format)?)?;
        }
        Command::Tca(a) => {
            let mut s = session(&a.inputs)?;
            run_pipeline(
                &mut s,
                &a.selection,
                ComposeKind::Tca {
                    entity_rule: a.entity_rule,
                    granularity: a.granularity,
                },
            )?;
            emit(a.out.as_deref(), &s.get_artifact("artifact", &a.format, None)?)?;
        }
        Command::Esom(a) => {
            let (vectors, labels): (Vec<FeatureVector>, Vec<MapLabel>) = match (&a.context, &a.vectors) {
                (Some(c), _) => {
                    let ctx = load_context(c)?;
                    let labels = ctx
                        .objects()
                        .iter()
                        .map(|o| MapLabel {
                            label: o.label.clone(),
                            url: o.url.clone(),
                        })
                        .collect();
                    (esom::vectors_from_context(&ctx), labels)
                }
                (None, Some(v)) => {
                    let vectors: Vec<FeatureVector> = serde_json::from_str(&read(v)?)?;
                    let labels = vectors
                        .iter()
                        .map(|v| MapLabel {
                            label: v.object_id.clone(),
                            url: String::new(),
                        })
                        .collect();
                    (vectors, labels)
                }
                (None, None) => return Err("pass --context or --vectors".into()),
            };
            let (rows, cols) = if a.paper_scale {
                (esom::EMERGENT_ROWS, esom::EMERGENT_COLS)
            } else {
                (a.rows, a.cols)
            };
            let bounds = esom::data_bounds(&vectors).ok_or("no vectors")?;
            let grid = esom::init_grid_within(rows, cols, a.topology, &bounds, a.seed)?;
            let (trained, trace) =
                esom::train_with_trace(&grid, &vectors, &TrainingSchedule::for_grid(rows, cols, a.epochs))?;
            eprintln!(
                "quantization error {:.6} -> {:.6}",
                trace.first().copied().unwrap_or(0.0),
                trace.last().copied().unwrap_or(0.0)
            );
            let text = match a.format.as_str() {
                "json" => esom::export_map(&trained, &esom::project(&trained, &vectors, &labels)?),
                "checkpoint" => trained.to_checkpoint(),
                other => return Err(format!("unknown esom format {other:?}").into()),
            };
            emit(a.out.as_deref(), &text)?;
        }
        Command::Hmm(a) => {
            let mut symbols = SymbolMap::field(a.symbol_field.clone());
            if let Some(g) = &a.groups {
                let file: GroupsFile = serde_json::from_str(&read(g)?)?;
                symbols = symbols.with_groups(file.codes).with_symbols(file.groups);
            }
            let mode = match a.states {
                Some(states) => HmmMode::BaumWelch {
                    states,
                    seed: a.seed,
                    tol: None,
                    max_iter: None,
                },
                None => HmmMode::Process { smoothing: a.smoothing },
            };
            let mut s = session(&a.inputs)?;
            let selection = Selection {
                attributes: Vec::new(),
                documents: None,
                segment: None,
                object_cluster: None,
                clarify: false,
            };
            run_pipeline(
                &mut s,
                &selection,
                ComposeKind::Hmm {
                    entity_rule: a.entity_rule,
                    symbols,
                    unmapped: if a.skip_unmapped {
                        UnmappedPolicy::Skip
                    } else {
                        UnmappedPolicy::Error
                    },
                    mode,
                    threshold: a.threshold,
                },
            )?;
            emit(a.out.as_deref(), &s.get_artifact("artifact", &a.format, None)?)?;
        }
        Command::Export(a) => {
            let wb = workbench(a.data_dir.as_deref())?;
            let text = wb.read(&a.session, |s| s.get_artifact(&a.artifact, &a.format, a.payload.as_deref()))?;
            emit(a.out.as_deref(), &text)?;
        }
        Command::Session(SessionCommand::Create { inputs, data_dir }) => {
            let wb = workbench(data_dir.as_deref())?;
            let summary = wb.create_session(&CreateSession {
                corpus: read(&inputs.corpus)?,
                ontology: read(&inputs.ontology)?,
                source: Some(inputs.corpus.display().to_string()),
            })?;
            println!("{}", summary.id);
        }
        Command::Session(SessionCommand::Run {
            session,
            profile,
            stored,
            data_dir,
        }) => {
            let wb = workbench(data_dir.as_deref())?;
            let req = match (profile, stored) {
                (Some(p), _) => PhaseRequest::Inline(Profile::from_json(&read(&p)?)?),
                (None, Some(name)) => PhaseRequest::Stored { profile: name },
                (None, None) => return Err("pass --profile or --stored".into()),
            };
            let outcome = wb.run_phase(&session, &req)?;
            print_warnings(&outcome.warnings);
            println!("{}", serde_json::to_string_pretty(&outcome)?);
        }
        Command::Session(SessionCommand::Show { session, data_dir }) => {
            let wb = workbench(data_dir.as_deref())?;
            let summary = wb.read(&session, |s| Ok(s.summary()))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Serve(a) => {
            let wb = match &a.data_dir {
                Some(d) => Workbench::with_data_dir(d)?,
                None => Workbench::from_env()?,
            };
            match wb.data_dir() {
                Some(d) => eprintln!("sessions in {}", d.display()),
                None => eprintln!("sessions kept in memory (set {DATA_DIR_ENV} to persist)"),
            }
            eprintln!("listening on {}", a.addr);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(concept_workbench::service::http::serve(Arc::new(wb), &a.addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

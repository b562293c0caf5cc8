//! Command-line dispatch over the library: one subcommand per pipeline stage.

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::align::{align_dataset, AlignmentConfig};
use crate::bm25::{bm25_top_k, build_inverted_index, Bm25Params, InvertedIndex};
use crate::corpus::{parse_squad_json, read_documents_jsonl, write_squad_json};
use crate::eval::{evaluate, read_predictions_jsonl};
use crate::phrase_index::{
    build_ivf, ingest_vectors, load_index, save_index, PhraseIndex,
};
use crate::qtrain::{
    train, QueryProjection, TrainBatch, TrainConfig, TrainError,
};
use crate::serve::{answer_question, spawn_server, PipelineConfig, QaService};
use crate::translate::{
    build_translated_dataset, DatasetMode, HttpClient, StubClient, StubFallback,
    TranslationCache, TranslationClient, TranslateOptions,
};

#[derive(Parser)]
#[command(
    name = "spyrja",
    version,
    about = "Cross-lingual QA toolkit: translated datasets, phrase MIPS retrieval, EM/F1 evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align translated answers to spans in translated contexts
    Align(AlignArgs),
    /// Build a translated dataset through an MT client with a persistent cache
    Translate(TranslateArgs),
    /// Sparse BM25 baseline over JSONL documents
    Bm25 {
        #[command(subcommand)]
        command: Bm25Command,
    },
    /// Phrase-vector index: build from JSONL vectors, query by inner product
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Fit a query projection with contrastive + distillation losses
    Qtrain(QtrainArgs),
    /// Score predictions against gold answers (EM / F1 / top-k)
    Eval(EvalArgs),
    /// One-shot query against a built index
    Query(QueryArgs),
    /// Serve /v1/query and /healthz over HTTP
    Serve(ServeArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// SQuAD-schema dataset with the original answers
    #[arg(long)]
    dataset: PathBuf,
    /// JSONL of {id, text}: translated context per record id
    #[arg(long = "context-file")]
    context_file: PathBuf,
    /// JSONL of {id, texts}: translated answers per record id
    #[arg(long = "answers-file")]
    answers_file: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    /// Where to write the aligned dataset (SQuAD schema)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the stats report JSON
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dataset name used for synthetic document ids
    #[arg(long, default_value = "dataset")]
    name: String,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long, value_enum)]
    mode: CliDatasetMode,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Translation cache file (created on first use)
    #[arg(long)]
    cache: PathBuf,
    /// MT engine: "stub" (deterministic, offline) or "http" (uses
    /// MT_ENDPOINT / MT_API_KEY)
    #[arg(long, default_value = "stub")]
    engine: String,
    #[arg(long, default_value = "en")]
    source_lang: String,
    #[arg(long, default_value = "is")]
    target_lang: String,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long, default_value = "dataset")]
    name: String,
    /// Where to write the alignment stats report JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDatasetMode {
    QuestionsOnly,
    Full,
}

#[derive(Subcommand)]
enum Bm25Command {
    /// Build an inverted index from JSONL documents
    Build {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank documents for a query
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Ingest JSONL phrase vectors into a binary index
    Build {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also build an IVF accelerator with this many centroids
        #[arg(long)]
        ivf: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search the index with a query vector read from a JSON file
    Query {
        #[arg(long)]
        index: PathBuf,
        /// JSON file holding either a bare array or {"vector": [...]}
        #[arg(long = "vector-file")]
        vector_file: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Probe this many IVF lists (requires an IVF-enabled index)
        #[arg(long)]
        nprobe: Option<usize>,
    },
}

#[derive(Args)]
struct QtrainArgs {
    /// Question vectors, JSONL in the phrase-entry shape
    #[arg(long)]
    questions: PathBuf,
    /// Phrase vectors, JSONL in the phrase-entry shape
    #[arg(long)]
    phrases: PathBuf,
    /// JSONL of {question_id, gold_phrase_id}
    #[arg(long)]
    gold: PathBuf,
    /// Optional JSONL of {question_id, scores: [{phrase_id, score}]}
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long = "lambda", default_value_t = 0.5)]
    distill_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Questions per batch; 0 trains full-batch
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions, JSONL of {question_id, answers: [...]}
    #[arg(long)]
    pred: PathBuf,
    /// Gold dataset, SQuAD schema
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Drop English articles during normalization
    #[arg(long)]
    strip_articles: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Optional projection applied to the question vector first
    #[arg(long)]
    proj: Option<PathBuf>,
    #[arg(long = "vector-file")]
    vector_file: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Deduplicate answers by normalized text
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    proj: Option<PathBuf>,
    /// Listen port; the PORT environment variable overrides both this flag
    /// and the config file
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    k: Option<usize>,
}

/// Parse argv and dispatch; returns the process exit code. Usage errors exit
/// 2, runtime failures exit 1.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Align(args) => cmd_align(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Bm25 { command } => cmd_bm25(command),
        Command::Index { command } => cmd_index(command),
        Command::Qtrain(args) => cmd_qtrain(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Query(args) => cmd_query(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

#[derive(serde::Deserialize)]
struct KeyedText {
    id: String,
    text: String,
}

#[derive(serde::Deserialize)]
struct KeyedTexts {
    id: String,
    texts: Vec<String>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<Vec<T>, Box<dyn std::error::Error>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(line)
            .map_err(|e| format!("{} line {}: {e}", path.display(), i + 1))?;
        out.push(item);
    }
    Ok(out)
}

fn cmd_align(args: AlignArgs) -> CliResult {
    let dataset_bytes = fs::read(&args.dataset)?;
    let parsed = parse_squad_json(&dataset_bytes, &args.name, "en")?;
    if !parsed.skipped.is_empty() {
        eprintln!("skipped {} records during parsing", parsed.skipped.len());
    }
    let contexts: HashMap<String, String> = read_jsonl::<KeyedText>(&args.context_file)?
        .into_iter()
        .map(|k| (k.id, k.text))
        .collect();
    let answers: HashMap<String, Vec<String>> = read_jsonl::<KeyedTexts>(&args.answers_file)?
        .into_iter()
        .map(|k| (k.id, k.texts))
        .collect();
    let config = AlignmentConfig {
        threshold: args.threshold,
        ..Default::default()
    };
    let (aligned, stats) = align_dataset(&parsed.records, &contexts, &answers, &config);
    println!("{stats}");
    if let Some(report_path) = &args.report {
        fs::write(report_path, serde_json::to_string_pretty(&stats.to_report_json())?)?;
    }
    if let Some(out_path) = &args.out {
        // rebuild documents from the translated contexts the spans now
        // reference; the first surviving record of a context supplies its text
        let docs: Vec<crate::corpus::Document> = {
            let mut seen = std::collections::BTreeSet::new();
            aligned
                .iter()
                .filter(|r| seen.insert(r.context_ref.clone()))
                .map(|r| crate::corpus::Document {
                    id: r.context_ref.clone(),
                    title: String::new(),
                    text: contexts.get(&r.id).cloned().unwrap_or_default(),
                    lang: "is".into(),
                })
                .collect()
        };
        fs::write(out_path, write_squad_json(&docs, &aligned)?)?;
    }
    Ok(())
}

fn make_client(engine: &str) -> Result<Box<dyn TranslationClient>, Box<dyn std::error::Error>> {
    match engine {
        "stub" => Ok(Box::new(StubClient::new(StubFallback::Uppercase))),
        "http" => {
            let client = HttpClient::from_env()
                .ok_or("engine \"http\" needs MT_ENDPOINT in the environment")?;
            Ok(Box::new(client))
        }
        other => Err(format!("unknown engine {other:?}; expected \"stub\" or \"http\"").into()),
    }
}

fn cmd_translate(args: TranslateArgs) -> CliResult {
    let bytes = fs::read(&args.input)?;
    let parsed = parse_squad_json(&bytes, &args.name, &args.source_lang)?;
    if !parsed.skipped.is_empty() {
        eprintln!("skipped {} records during parsing", parsed.skipped.len());
    }
    let client = make_client(&args.engine)?;
    let mut cache = TranslationCache::open(&args.cache)?;
    let mode = match args.mode {
        CliDatasetMode::QuestionsOnly => DatasetMode::QuestionsOnly,
        CliDatasetMode::Full => DatasetMode::Full,
    };
    let align_config = AlignmentConfig {
        threshold: args.threshold,
        ..Default::default()
    };
    let concurrency = std::env::var("MT_CONCURRENCY")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1);
    let opts = TranslateOptions {
        source_lang: args.source_lang.clone(),
        target_lang: args.target_lang.clone(),
        concurrency,
        ..Default::default()
    };
    let (documents, records, stats) = build_translated_dataset(
        &parsed.documents,
        &parsed.records,
        client.as_ref(),
        &mut cache,
        mode,
        &align_config,
        &opts,
    )?;
    println!("{stats}");
    fs::write(&args.out, write_squad_json(&documents, &records)?)?;
    if let Some(report_path) = &args.report {
        fs::write(report_path, serde_json::to_string_pretty(&stats.to_report_json())?)?;
    }
    Ok(())
}

fn cmd_bm25(command: Bm25Command) -> CliResult {
    match command {
        Bm25Command::Build { docs, out } => {
            let documents = read_documents_jsonl(&fs::read(&docs)?)?;
            let index = build_inverted_index(&documents);
            fs::write(&out, serde_json::to_vec(&index)?)?;
            println!("indexed {} documents", index.n_docs());
            Ok(())
        }
        Bm25Command::Query { index, q, k, k1, b } => {
            let index: InvertedIndex = serde_json::from_slice(&fs::read(&index)?)?;
            let params = Bm25Params { k1, b };
            for (rank, (ordinal, score)) in bm25_top_k(&index, &params, &q, k).iter().enumerate() {
                println!("{:>3}. {}  {:.4}", rank + 1, index.doc_id(*ordinal as usize), score);
            }
            Ok(())
        }
    }
}

fn read_query_vector(path: &PathBuf) -> Result<Vec<f32>, Box<dyn std::error::Error>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum VectorFile {
        Bare(Vec<f32>),
        Wrapped { vector: Vec<f32> },
    }
    let bytes = fs::read(path)?;
    match serde_json::from_slice(&bytes)? {
        VectorFile::Bare(v) => Ok(v),
        VectorFile::Wrapped { vector } => Ok(vector),
    }
}

fn cmd_index(command: IndexCommand) -> CliResult {
    match command {
        IndexCommand::Build {
            vectors,
            out,
            ivf,
            seed,
        } => {
            let file = fs::File::open(&vectors)?;
            let flat = ingest_vectors(BufReader::new(file))?;
            let ivf_index = match ivf {
                Some(n) => Some(build_ivf(&flat, n, seed)?),
                None => None,
            };
            let index = PhraseIndex {
                flat,
                ivf: ivf_index,
            };
            save_index(&index, &out)?;
            println!(
                "indexed {} phrases (dim {:?}{})",
                index.flat.len(),
                index.flat.dim(),
                index
                    .ivf
                    .as_ref()
                    .map(|i| format!(", ivf {} centroids", i.n_centroids()))
                    .unwrap_or_default()
            );
            Ok(())
        }
        IndexCommand::Query {
            index,
            vector_file,
            k,
            nprobe,
        } => {
            let index = load_index(&index)?;
            let query = read_query_vector(&vector_file)?;
            let hits = index.search(&query, k, nprobe)?;
            for (rank, hit) in hits.iter().enumerate() {
                let meta = index.flat.meta(hit.ordinal);
                println!(
                    "{:>3}. [{}] {}  {:.4}  ({} {}..{})",
                    rank + 1,
                    hit.phrase_id,
                    meta.text,
                    hit.score,
                    meta.doc_id,
                    meta.char_start,
                    meta.char_end
                );
            }
            Ok(())
        }
    }
}

#[derive(serde::Deserialize)]
struct GoldMapping {
    question_id: u64,
    gold_phrase_id: u64,
}

#[derive(serde::Deserialize)]
struct TeacherScores {
    question_id: u64,
    scores: Vec<TeacherScore>,
}

#[derive(serde::Deserialize)]
struct TeacherScore {
    phrase_id: u64,
    score: f64,
}

fn cmd_qtrain(args: QtrainArgs) -> CliResult {
    let questions = ingest_vectors(BufReader::new(fs::File::open(&args.questions)?))?;
    let phrases = ingest_vectors(BufReader::new(fs::File::open(&args.phrases)?))?;
    let gold: Vec<GoldMapping> = read_jsonl(&args.gold)?;
    let teacher: Option<HashMap<u64, HashMap<u64, f64>>> = match &args.teacher {
        Some(path) => {
            let rows: Vec<TeacherScores> = read_jsonl(path)?;
            Some(
                rows.into_iter()
                    .map(|r| {
                        (
                            r.question_id,
                            r.scores.into_iter().map(|s| (s.phrase_id, s.score)).collect(),
                        )
                    })
                    .collect(),
            )
        }
        None => None,
    };

    let q_dim = questions.dim().ok_or("question vector file is empty")?;
    let p_dim = phrases.dim().ok_or("phrase vector file is empty")?;

    // assemble batches in gold-file order; the pool of each batch is its
    // questions' gold phrases (in-batch negatives)
    let batch_size = if args.batch_size == 0 {
        gold.len()
    } else {
        args.batch_size
    };
    let mut batches = Vec::new();
    for chunk in gold.chunks(batch_size.max(1)) {
        let mut question_vectors = Vec::with_capacity(chunk.len());
        let mut candidate_vectors = Vec::with_capacity(chunk.len());
        let mut gold_index = Vec::with_capacity(chunk.len());
        let mut pool_ids = Vec::with_capacity(chunk.len());
        for (i, mapping) in chunk.iter().enumerate() {
            let q_ord = questions
                .ordinal_of(mapping.question_id)
                .ok_or_else(|| format!("question id {} not in vector file", mapping.question_id))?;
            let p_ord = phrases
                .ordinal_of(mapping.gold_phrase_id)
                .ok_or_else(|| format!("phrase id {} not in vector file", mapping.gold_phrase_id))?;
            question_vectors
                .push(questions.vector(q_ord).iter().map(|&x| x as f64).collect::<Vec<f64>>());
            candidate_vectors
                .push(phrases.vector(p_ord).iter().map(|&x| x as f64).collect::<Vec<f64>>());
            gold_index.push(i);
            pool_ids.push(mapping.gold_phrase_id);
        }
        let teacher_scores = match &teacher {
            Some(map) => {
                let mut rows = Vec::with_capacity(chunk.len());
                for mapping in chunk {
                    let per_question = map.get(&mapping.question_id).ok_or_else(|| {
                        format!("teacher file has no scores for question {}", mapping.question_id)
                    })?;
                    let row: Result<Vec<f64>, String> = pool_ids
                        .iter()
                        .map(|pid| {
                            per_question.get(pid).copied().ok_or_else(|| {
                                format!(
                                    "teacher scores for question {} miss phrase {}",
                                    mapping.question_id, pid
                                )
                            })
                        })
                        .collect();
                    rows.push(row?);
                }
                Some(rows)
            }
            None => None,
        };
        batches.push(TrainBatch {
            question_vectors,
            candidate_vectors,
            gold_index,
            teacher_scores,
        });
    }

    let config = TrainConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size,
        distill_weight: args.distill_weight,
        temperature: args.temperature,
        seed: args.seed,
    };
    let initial = QueryProjection::identity_with_noise(p_dim, q_dim, 0.01, args.seed);
    let outcome = train(&batches, &config, initial).map_err(|e| match e {
        TrainError::Diverged { epoch } => format!("training diverged at epoch {epoch}").into(),
        other => Box::<dyn std::error::Error>::from(other.to_string()),
    })?;
    outcome.projection.save(&args.out)?;
    let first = outcome.epoch_mean_loss.first().copied().unwrap_or(0.0);
    let last = outcome.epoch_mean_loss.last().copied().unwrap_or(0.0);
    println!(
        "trained {} epochs over {} batches: mean loss {:.4} -> {:.4}",
        config.epochs,
        batches.len(),
        first,
        last
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let predictions = read_predictions_jsonl(&fs::read(&args.pred)?)?;
    let gold = parse_squad_json(&fs::read(&args.gold)?, "gold", "is")?;
    let report = evaluate(&predictions, &gold.records, args.k, args.strip_articles)?;
    match args.format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        ReportFormat::Table => print!("{}", report.render_table()),
    }
    Ok(())
}

fn cmd_query(args: QueryArgs) -> CliResult {
    let index = load_index(&args.index)?;
    let projection = match &args.proj {
        Some(p) => Some(QueryProjection::load(p)?),
        None => None,
    };
    let vector = read_query_vector(&args.vector_file)?;
    let response = answer_question("", &vector, &index, projection.as_ref(), args.k, args.dedup)?;
    println!("{}", serde_json::to_string_pretty(&response)?);
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> CliResult {
    let mut config = match &args.config {
        Some(path) => serde_json::from_slice::<PipelineConfig>(&fs::read(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(index) = args.index {
        config.index_path = Some(index);
    }
    if let Some(proj) = args.proj {
        config.projection_path = Some(proj);
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    let index_path = config
        .index_path
        .clone()
        .ok_or("serve needs --index or an index_path in --config")?;

    let port = std::env::var("PORT")
        .ok()
        .and_then(|p| p.parse::<u16>().ok())
        .unwrap_or(config.port);
    let state: Arc<RwLock<Option<Arc<QaService>>>> = Arc::new(RwLock::new(None));
    let running = spawn_server(&format!("0.0.0.0:{port}"), Arc::clone(&state), 8)
        .map_err(|e| e.to_string())?;
    eprintln!("listening on {}", running.addr);
    let service = QaService::load(
        &index_path,
        config.projection_path.as_deref(),
        config.k,
        config.dedup,
        config.embedder_seed,
    )?;
    *state.write().unwrap() = Some(Arc::new(service));
    eprintln!("index loaded, serving");
    // serve until killed
    loop {
        std::thread::park();
    }
}

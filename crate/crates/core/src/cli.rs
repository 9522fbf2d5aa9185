//! The `attrnorm` command line: `gen-triplets`, `train`, `normalize`,
//! `eval` and `export-embeddings`.
//!
//! Every tab- or comma-separated output starts with a `# {...}` line holding
//! a JSON run manifest (command, arguments, seed, SHA-256 of every input).
//! Outputs are written to a temporary sibling file and renamed into place,
//! so an existing file at the output path is only replaced on success.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{
    generate_triplets, read_labeled, read_raw_records, read_surface_forms, read_triplets, split_dev_test,
    write_triplets, CanonicalRegistry, Label, LabeledExample, SurfaceForm, DEFAULT_MAX_RETRIES, OTHER_LABEL,
};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy_coverage, accuracy_single, baseline_majority, baseline_random, evaluate_labels, select_thresholds,
    sweep_curve, write_curve_csv, Scored, DEFAULT_GRID_STEP,
};
use crate::model::{load_external_vectors, train, write_text_vectors, EmbeddingModel, Optimizer, TrainConfig};
use crate::norm::{normalize_batch, write_predictions, Scorer, Thresholds, ABSTAIN_LABEL};
use crate::strsim::Algorithm;
use crate::text::{LexiconOptions, NgramSpec, PhraseLexicon};

#[derive(Debug, Parser)]
#[command(name = "attrnorm", version, about = "Normalize product attribute values to canonical forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build training triplets (and the phrase lexicon) from a product corpus.
    GenTriplets(GenTripletsArgs),
    /// Train subword embeddings on a triplet file.
    Train(TrainArgs),
    /// Map surface forms to canonical forms.
    Normalize(NormalizeArgs),
    /// Score a labeled set: single-threshold report, dev-selected thresholds, or a full curve.
    Eval(EvalArgs),
    /// Write token embeddings in the text vector format.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenTripletsArgs {
    /// Line-delimited JSON records with `attribute`, `category`, `title`, `value`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Triplet TSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Phrase lexicon to write; defaults to `<out>.phrases`.
    #[arg(long)]
    pub phrases_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES, value_parser = parse_positive)]
    pub max_retries: usize,
    /// Minimum occurrences for a multi-word value to become a phrase.
    #[arg(long, default_value_t = 1)]
    pub min_phrase_count: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Adadelta,
    Sgd,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub margin: f64,
    #[arg(long, default_value_t = 200, value_parser = parse_positive)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub ngram_min: usize,
    #[arg(long, default_value_t = 4)]
    pub ngram_max: usize,
    #[arg(long, default_value_t = 5, value_parser = parse_positive)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adadelta)]
    pub optimizer: OptimizerChoice,
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Learning rate; defaults to 1.0 for adadelta and 0.05 for sgd.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lock-free multi-threaded training. Results are not reproducible.
    #[arg(long)]
    pub parallel_train: bool,
    /// Worker threads for --parallel-train.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl TrainArgs {
    pub fn config(&self) -> Result<TrainConfig> {
        let optimizer = match self.optimizer {
            OptimizerChoice::Adadelta => Optimizer::Adadelta {
                rho: self.rho,
                eps: self.eps,
                lr: self.lr.unwrap_or(1.0),
            },
            OptimizerChoice::Sgd => Optimizer::Sgd {
                lr: self.lr.unwrap_or(0.05),
            },
        };
        let config = TrainConfig {
            margin: self.margin,
            dimension: self.dim,
            ngram_spec: NgramSpec::new(self.ngram_min, self.ngram_max, true)?,
            epochs: self.epochs,
            optimizer,
            seed: self.seed,
            threads: if self.parallel_train { self.jobs.max(1) } else { 1 },
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse::<Algorithm>().map_err(|e| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
        format!("{e}; expected one of: cosine, {}", names.join(", "))
    })
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct ScorerSource {
    /// String similarity algorithm name (`cosine` is short for `ngram_cosine`).
    #[arg(long, value_parser = parse_algorithm)]
    #[serde(serialize_with = "ser_algorithm")]
    pub scorer: Option<Algorithm>,
    /// Trained subword model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// External word vectors in text format.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

fn ser_algorithm<S: serde::Serializer>(a: &Option<Algorithm>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match a {
        Some(a) => s.serialize_str(a.name()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct NormalizeArgs {
    #[command(flatten)]
    pub source: ScorerSource,
    /// Phrase lexicon used to merge multi-word values for embedding scorers.
    #[arg(long)]
    pub phrases: Option<PathBuf>,
    #[arg(long)]
    pub registry: PathBuf,
    /// `attribute<TAB>surface[<TAB>...]` rows.
    #[arg(long)]
    pub input: PathBuf,
    /// Predict OTHER below this score; defaults to the scorer's minimum.
    #[arg(long, allow_negative_numbers = true)]
    pub x1: Option<f64>,
    /// Abstain for scores in [x1, x2).
    #[arg(long, allow_negative_numbers = true)]
    pub x2: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Metrics over the whole labeled set at the given thresholds.
    Single,
    /// Thresholds selected on the dev split, metrics on the test split.
    Report,
    /// Accuracy–coverage curve over the test split, as CSV.
    Curve,
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct EvalSource {
    #[arg(long, value_parser = parse_algorithm)]
    #[serde(serialize_with = "ser_algorithm")]
    pub scorer: Option<Algorithm>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// A `normalize` output aligned row-for-row with the labeled file,
    /// produced without an OTHER threshold.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: EvalSource,
    #[arg(long)]
    pub phrases: Option<PathBuf>,
    #[arg(long)]
    pub registry: PathBuf,
    /// `attribute<TAB>surface<TAB>gold` rows; gold `__OTHER__` for the catch-all class.
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Report)]
    pub mode: EvalMode,
    /// Threshold for `single` mode; defaults to the scorer's minimum.
    #[arg(long, allow_negative_numbers = true)]
    pub x1: Option<f64>,
    /// Optional abstention threshold for `single` mode.
    #[arg(long, allow_negative_numbers = true)]
    pub x2: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report the random and majority-class baselines.
    #[arg(long)]
    pub baselines: bool,
    /// Report JSON (single/report) or curve CSV (curve).
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the Pareto frontier CSV in curve mode.
    #[arg(long)]
    pub frontier_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// Trained subword model file.
    #[arg(long)]
    pub model: PathBuf,
    /// One token per line.
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Runs one command, writing human-readable progress to `stdout`.
pub fn run<W: Write>(command: Command, stdout: &mut W) -> Result<()> {
    match command {
        Command::GenTriplets(a) => cmd_gen_triplets(&a, stdout),
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Normalize(a) => cmd_normalize(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::ExportEmbeddings(a) => cmd_export_embeddings(&a, stdout),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e))
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::file(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest<A: Serialize>(command: &str, args: &A, seed: Option<u64>, inputs: &[&Path]) -> Result<Value> {
    let mut digests = serde_json::Map::new();
    for p in inputs {
        digests.insert(p.display().to_string(), Value::String(sha256_file(p)?));
    }
    Ok(json!({
        "tool": "attrnorm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": serde_json::to_value(args).map_err(std::io::Error::from)?,
        "seed": seed,
        "inputs": digests,
    }))
}

/// Writes through a temporary sibling and renames on success.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let f = File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
        let mut w = BufWriter::new(f);
        body(&mut w)?;
        w.flush().map_err(|e| Error::file(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn to_json_string(v: &Value) -> String {
    serde_json::to_string(v).expect("json values always serialize")
}

pub fn cmd_gen_triplets<W: Write>(args: &GenTripletsArgs, stdout: &mut W) -> Result<()> {
    require_files([args.corpus.as_path()])?;
    let raw = read_raw_records(open(&args.corpus)?).map_err(|e| with_path(e, &args.corpus))?;
    let opts = LexiconOptions {
        min_count: args.min_phrase_count,
        ..Default::default()
    };
    let ingested = crate::corpus::ingest_raw(&raw, opts);
    let (triplets, report) = generate_triplets(&ingested.records, args.max_retries, args.seed, args.jobs);
    let manifest = manifest("gen-triplets", args, Some(args.seed), &[&args.corpus])?;

    write_atomic(&args.out, |w| {
        writeln!(w, "# {}", to_json_string(&manifest))?;
        write_triplets(w, &triplets)
    })?;
    let phrases_out = args.phrases_out.clone().unwrap_or_else(|| {
        let mut p = args.out.as_os_str().to_owned();
        p.push(".phrases");
        PathBuf::from(p)
    });
    write_atomic(&phrases_out, |w| ingested.lexicon.write_to(w))?;

    let summary = json!({
        "ingest": ingested.report,
        "triplets": report,
        "phrases": ingested.lexicon.len(),
        "phrases_out": phrases_out.display().to_string(),
    });
    writeln!(stdout, "{}", to_json_string(&summary))?;
    Ok(())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

pub fn cmd_train<W: Write>(args: &TrainArgs, stdout: &mut W) -> Result<()> {
    let config = args.config()?;
    require_files([args.triplets.as_path()])?;
    let triplets = read_triplets(open(&args.triplets)?).map_err(|e| with_path(e, &args.triplets))?;
    let mut model = EmbeddingModel::new_subword(config.dimension, config.ngram_spec);
    let report = train(&mut model, &triplets, &config)?;
    write_atomic(&args.model_out, |w| model.write_to(w))?;
    for loss in &report.epoch_losses {
        writeln!(stdout, "{loss}")?;
    }
    Ok(())
}

fn load_lexicon(path: Option<&Path>) -> Result<PhraseLexicon> {
    match path {
        Some(p) => PhraseLexicon::read_from(open(p)?).map_err(|e| with_path(e, p)),
        None => Ok(PhraseLexicon::new()),
    }
}

fn build_scorer(
    algorithm: Option<Algorithm>,
    model: Option<&Path>,
    vectors: Option<&Path>,
    phrases: Option<&Path>,
) -> Result<Scorer> {
    if let Some(alg) = algorithm {
        return Ok(Scorer::string(alg));
    }
    let lexicon = load_lexicon(phrases)?;
    if let Some(p) = model {
        return Ok(Scorer::embedding(EmbeddingModel::load(p)?, lexicon));
    }
    if let Some(p) = vectors {
        let m = load_external_vectors(open(p)?).map_err(|e| with_path(e, p))?;
        return Ok(Scorer::embedding(m, lexicon));
    }
    Err(Error::Config("one of --scorer, --model or --vectors is required".into()))
}

fn input_paths<'a>(candidates: &[Option<&'a Path>]) -> Vec<&'a Path> {
    candidates.iter().flatten().copied().collect()
}

pub fn cmd_normalize<W: Write>(args: &NormalizeArgs, stdout: &mut W) -> Result<()> {
    let inputs = input_paths(&[
        Some(args.registry.as_path()),
        Some(args.input.as_path()),
        args.source.model.as_deref(),
        args.source.vectors.as_deref(),
        args.phrases.as_deref(),
    ]);
    require_files(inputs.iter().copied())?;
    let scorer = build_scorer(
        args.source.scorer,
        args.source.model.as_deref(),
        args.source.vectors.as_deref(),
        args.phrases.as_deref(),
    )?;
    let thresholds = Thresholds {
        x1: args.x1.unwrap_or(scorer.range().0),
        x2: args.x2,
    };
    thresholds.validate(scorer.range())?;
    let registry = CanonicalRegistry::read_from(open(&args.registry)?).map_err(|e| with_path(e, &args.registry))?;
    let items = read_surface_forms(open(&args.input)?).map_err(|e| with_path(e, &args.input))?;
    let predictions = normalize_batch(&scorer, &items, &registry, thresholds, args.jobs)?;
    let manifest = manifest("normalize", args, None, &inputs)?;
    write_atomic(&args.out, |w| {
        writeln!(w, "# {}", to_json_string(&manifest))?;
        write_predictions(w, &items, &predictions)
    })?;
    let (mut other, mut abstain) = (0, 0);
    for p in &predictions {
        match p.outcome.label() {
            OTHER_LABEL => other += 1,
            ABSTAIN_LABEL => abstain += 1,
            _ => {}
        }
    }
    writeln!(
        stdout,
        "{}",
        to_json_string(&json!({
            "scorer": scorer.name(),
            "predictions": predictions.len(),
            "other": other,
            "abstain": abstain,
        }))
    )?;
    Ok(())
}

/// Scores from a `normalize` output file, aligned with `examples`.
fn read_prediction_scores(path: &Path, examples: &[LabeledExample]) -> Result<Vec<Scored>> {
    let mut out = Vec::with_capacity(examples.len());
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(i + 1, format!("{}: expected 4 columns", path.display())));
        }
        let score: f64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("{}: bad score `{}`", path.display(), cols[3])))?;
        let k = out.len();
        let Some(ex) = examples.get(k) else {
            return Err(Error::parse(i + 1, format!("{}: more rows than labeled examples", path.display())));
        };
        if ex.attribute != cols[0] || ex.surface != cols[1] {
            return Err(Error::parse(
                i + 1,
                format!("{}: row does not match labeled example {}", path.display(), k + 1),
            ));
        }
        let argmax = match cols[2] {
            OTHER_LABEL | ABSTAIN_LABEL => None,
            c => Some(c.to_owned()),
        };
        out.push(Scored {
            top_score: score,
            argmax,
        });
    }
    if out.len() != examples.len() {
        return Err(Error::LengthMismatch(out.len(), examples.len()));
    }
    Ok(out)
}

pub fn cmd_eval<W: Write>(args: &EvalArgs, stdout: &mut W) -> Result<()> {
    let src = &args.source;
    let inputs = input_paths(&[
        Some(args.registry.as_path()),
        Some(args.labeled.as_path()),
        src.model.as_deref(),
        src.vectors.as_deref(),
        src.predictions.as_deref(),
        args.phrases.as_deref(),
    ]);
    require_files(inputs.iter().copied())?;
    if !(args.grid_step > 0.0) {
        return Err(Error::Config("--grid-step must be positive".into()));
    }
    let registry = CanonicalRegistry::read_from(open(&args.registry)?).map_err(|e| with_path(e, &args.registry))?;
    let labeled = read_labeled(open(&args.labeled)?).map_err(|e| with_path(e, &args.labeled))?;
    registry.validate_labels(&labeled)?;

    let (scored, range, scorer_name) = match &src.predictions {
        Some(p) => {
            let scored = read_prediction_scores(p, &labeled)?;
            let range = if scored.iter().any(|s| s.top_score < 0.0) { (-1.0, 1.0) } else { (0.0, 1.0) };
            (scored, range, format!("predictions:{}", p.display()))
        }
        None => {
            let scorer = build_scorer(src.scorer, src.model.as_deref(), src.vectors.as_deref(), args.phrases.as_deref())?;
            let items: Vec<SurfaceForm> = labeled.iter().map(LabeledExample::surface_form).collect();
            let preds = normalize_batch(&scorer, &items, &registry, Thresholds::single(scorer.range().0), args.jobs)?;
            (preds.iter().map(Scored::from).collect(), scorer.range(), scorer.name())
        }
    };
    let gold: Vec<Label> = labeled.iter().map(|e| e.gold.clone()).collect();
    let manifest = manifest("eval", args, Some(args.seed), &inputs)?;

    let (dev_idx, test_idx) = split_indices(&labeled, args.dev_fraction, args.seed)?;
    let pick_scored = |idx: &[usize]| idx.iter().map(|&i| scored[i].clone()).collect::<Vec<_>>();
    let pick_gold = |idx: &[usize]| idx.iter().map(|&i| gold[i].clone()).collect::<Vec<_>>();
    let pick_examples = |idx: &[usize]| idx.iter().map(|&i| labeled[i].clone()).collect::<Vec<_>>();

    let baselines = if args.baselines {
        let dev = pick_examples(&dev_idx);
        let test = pick_examples(&test_idx);
        let test_gold = pick_gold(&test_idx);
        let random = baseline_random(&test, &registry, args.seed)?;
        let majority = baseline_majority(&dev, &test, &registry);
        Some(json!({
            "random": evaluate_labels(&random, &test_gold)?,
            "majority": evaluate_labels(&majority, &test_gold)?,
        }))
    } else {
        None
    };

    let mut summary = json!({
        "manifest": manifest,
        "scorer": scorer_name,
        "mode": args.mode,
        "range": [range.0, range.1],
    });
    match args.mode {
        EvalMode::Single => {
            let x1 = args.x1.unwrap_or(range.0);
            let thresholds = Thresholds { x1, x2: args.x2 };
            thresholds.validate(range)?;
            summary["single"] = serde_json::to_value(accuracy_single(&scored, &gold, x1)?).map_err(std::io::Error::from)?;
            if let Some(x2) = args.x2 {
                summary["band"] =
                    serde_json::to_value(accuracy_coverage(&scored, &gold, x1, x2)?).map_err(std::io::Error::from)?;
            }
        }
        EvalMode::Report => {
            let selection = select_thresholds(&pick_scored(&dev_idx), &pick_gold(&dev_idx), range, args.grid_step)?;
            let (ts, tg) = (pick_scored(&test_idx), pick_gold(&test_idx));
            let x1 = selection.single.x1.expect("single selection carries x1");
            let test_single = accuracy_single(&ts, &tg, x1)?;
            let test_band = match &selection.band {
                Some(b) => Some(accuracy_coverage(&ts, &tg, b.x1.unwrap(), b.x2.unwrap())?),
                None => None,
            };
            summary["split"] = json!({"dev": dev_idx.len(), "test": test_idx.len()});
            summary["dev_selection"] = serde_json::to_value(&selection).map_err(std::io::Error::from)?;
            summary["test"] = json!({ "single": test_single, "band": test_band });
        }
        EvalMode::Curve => {
            let curve = sweep_curve(&pick_scored(&test_idx), &pick_gold(&test_idx), range, args.grid_step)?;
            write_atomic(&args.out, |w| {
                writeln!(w, "# {}", to_json_string(&summary["manifest"]))?;
                write_curve_csv(w, &curve.points)
            })?;
            if let Some(f) = &args.frontier_out {
                write_atomic(f, |w| {
                    writeln!(w, "# {}", to_json_string(&summary["manifest"]))?;
                    write_curve_csv(w, &curve.frontier)
                })?;
            }
            summary["points"] = json!(curve.points.len());
            summary["frontier"] = json!(curve.frontier.len());
        }
    }
    if let Some(b) = baselines {
        summary["baselines"] = b;
    }
    if args.mode != EvalMode::Curve {
        let text = serde_json::to_string_pretty(&summary).map_err(std::io::Error::from)?;
        write_atomic(&args.out, |w| Ok(writeln!(w, "{text}")?))?;
    }
    let mut brief = summary.clone();
    if let Some(obj) = brief.as_object_mut() {
        obj.remove("manifest");
        if let Some(sel) = obj.get_mut("dev_selection").and_then(Value::as_object_mut) {
            sel.remove("candidates");
        }
    }
    writeln!(stdout, "{}", to_json_string(&brief))?;
    Ok(())
}

fn split_indices(labeled: &[LabeledExample], dev_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    // Tag each example with its position so the split can be mapped back.
    let tagged: Vec<LabeledExample> = labeled
        .iter()
        .enumerate()
        .map(|(i, e)| LabeledExample { line: i, ..e.clone() })
        .collect();
    let (dev, test) = split_dev_test(&tagged, dev_fraction, seed)?;
    Ok((dev.iter().map(|e| e.line).collect(), test.iter().map(|e| e.line).collect()))
}

pub fn cmd_export_embeddings<W: Write>(args: &ExportArgs, stdout: &mut W) -> Result<()> {
    require_files([args.model.as_path(), args.tokens.as_path()])?;
    let model = EmbeddingModel::load(&args.model)?;
    let mut tokens = Vec::new();
    for line in open(&args.tokens)?.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            tokens.push(t.to_owned());
        }
    }
    let rows: Vec<(String, Vec<f64>)> = tokens.into_iter().map(|t| {
        let v = model.embed_token(&t);
        (t, v)
    }).collect();
    write_atomic(&args.out, |w| write_text_vectors(w, model.dim(), &rows))?;
    writeln!(stdout, "{}", to_json_string(&json!({"tokens": rows.len(), "dim": model.dim()})))?;
    Ok(())
}

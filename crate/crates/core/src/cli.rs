//! Command line driver: `split`, `synthesize`, `augment`, `stats` and
//! `validate`.
//!
//! Every subcommand that writes to an output directory also writes a
//! `report.json` (versioned by `schema_version`) and a `manifest.json` with
//! the flags, input hashes, tool version and wall clock timestamps. The
//! timestamps only appear in the manifest, so all other outputs are
//! byte-identical when a run is repeated with the same manifest.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::atomize::{atomize, select_k, AtomizeConfig};
use crate::augment::{augment_loop, AugmentConfig, ExecRanker, NgramRanker, Ranker};
use crate::corpus::{load_corpus_with, read_records, save_corpus, write_jsonl, Dataset, Language, LoadOptions, MathWordProblem};
use crate::dbca::{label_pool, stats, LabeledProblem, SplitConfig, DEFAULT_ALPHA_ATOM, DEFAULT_ALPHA_COMPOUND};
use crate::num::{rational_to_f64, Rational};
use crate::synth::{build_sd, bundled_rules, load_rules, IndexedCorpus, KeywordExtractor, Outcome, Synthesizer};

/// Version of the `report.json` layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LangArg {
    En,
    Zh,
}

impl From<LangArg> for Language {
    fn from(lang: LangArg) -> Self {
        match lang {
            LangArg::En => Language::En,
            LangArg::Zh => Language::Zh,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "compsplit", version, about = "Compositional-generalization splits, synthesis and augmentation for math word problems")]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Append log lines to this file instead of stderr.
    #[arg(long, global = true, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Corpus language.
    #[arg(long, global = true, value_enum, default_value = "en")]
    pub lang: LangArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a corpus into train/test with maximum compound divergence.
    Split(SplitArgs),
    /// Build a train/test pair with decomposition and reformulation rules.
    Synthesize(SynthArgs),
    /// Grow a training set by iterative fragment substitution.
    Augment(AugmentArgs),
    /// Report NR, LR, DBCA^a and DBCA^c for an existing split.
    Stats(StatsArgs),
    /// Check a corpus for parse, alignment, evaluation and answer problems.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.02)]
    pub atom_bound: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_ATOM)]
    pub alpha_atom: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_COMPOUND)]
    pub alpha_compound: f64,
    /// Target test fraction.
    #[arg(long, default_value_t = 0.2)]
    pub ratio: f64,
    /// Relative tolerance on the test fraction.
    #[arg(long, default_value_t = 0.1)]
    pub ratio_tolerance: f64,
    /// Candidate cluster counts; the one giving the highest DBCA^c wins.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k: Vec<usize>,
    /// Context window (tokens on each side of a quantity).
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    pub input: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Rule table (JSON); the bundled table is used when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Donor corpus; defaults to the pool itself.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Keyword lexicon (TSV `word, tag[, lemma]`); defaults to the bundled one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Recorded in the manifest; synthesis itself draws no random numbers.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    pub pool: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    #[arg(long, default_value_t = 7)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.2)]
    pub keep: f64,
    #[arg(long, default_value_t = 4)]
    pub max_span: usize,
    /// `ngram:N` (N = 2 or 3) or `exec:COMMAND`.
    #[arg(long, default_value = "ngram:2")]
    pub ranker: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Candidates ranked per iteration (0 = no limit).
    #[arg(long, default_value_t = 2000)]
    pub max_candidates: usize,
    pub train: PathBuf,
    /// Output corpus; provenance, report and manifest go next to it.
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Cluster count used to label atoms over train and test together.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_ATOM)]
    pub alpha_atom: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_COMPOUND)]
    pub alpha_compound: f64,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Relative tolerance for comparing an answer with the expression value.
    #[arg(long, default_value_t = 1e-4)]
    pub answer_tolerance: f64,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    pub corpus: PathBuf,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    /// Bad arguments or missing input (exit 2).
    Usage(anyhow::Error),
    /// Validation or pipeline failure (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_logging(&cli) {
        eprintln!("error: {e:#}");
        return 2;
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn init_logging(cli: &Cli) -> anyhow::Result<()> {
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level).parse_default_env();
    if let Some(path) = &cli.log {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening log file {}", path.display()))?;
        builder.target(env_logger::Target::Pipe(Box::new(file)));
    }
    // A second call in the same process (tests) keeps the first logger.
    let _ = builder.try_init();
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let lang: Language = cli.lang.into();
    match &cli.command {
        Command::Split(args) => run_split(args, lang),
        Command::Synthesize(args) => run_synthesize(args, lang),
        Command::Augment(args) => run_augment(args, lang),
        Command::Stats(args) => run_stats(args, lang),
        Command::Validate(args) => run_validate(args, lang),
    }
}

fn require_input(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow::anyhow!("input file {} not found", path.display())))
    }
}

fn load(path: &Path, lang: Language) -> Result<Dataset, Failure> {
    require_input(path)?;
    let dataset = load_corpus_with(path, lang, &LoadOptions::default()).with_context(|| format!("loading {}", path.display()))?;
    Ok(dataset)
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, A: Serialize> {
    subcommand: &'a str,
    tool_version: &'a str,
    language: Language,
    seed: Option<u64>,
    flags: &'a A,
    inputs: Vec<InputHash>,
    started_at: u64,
    finished_at: u64,
}

/// Output directory writer shared by the subcommands.
struct Outputs {
    dir: PathBuf,
    started_at: u64,
}

impl Outputs {
    fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), started_at: unix_time() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn write_corpus(&self, name: &str, dataset: &Dataset) -> anyhow::Result<()> {
        let path = self.path(name);
        save_corpus(dataset, &path).with_context(|| format!("writing {}", path.display()))
    }

    fn write_manifest<A: Serialize>(&self, subcommand: &str, language: Language, seed: Option<u64>, flags: &A, inputs: &[&Path]) -> anyhow::Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| Ok(InputHash { path: p.display().to_string(), sha256: sha256_file(p)? }))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let manifest = Manifest {
            subcommand,
            tool_version: VERSION,
            language,
            seed,
            flags,
            inputs,
            started_at: self.started_at,
            finished_at: unix_time(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn report_header(subcommand: &str) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
    map.insert("subcommand".into(), json!(subcommand));
    map.insert("tool_version".into(), json!(VERSION));
    map
}

fn subset(pool: &Dataset, ids: &[String]) -> anyhow::Result<Dataset> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let problems = pool.problems.iter().filter(|p| wanted.contains(p.id.as_str())).cloned().collect();
    Ok(Dataset::new(problems, pool.language)?)
}

fn split_sides<'a>(labeled: &'a [LabeledProblem], test_ids: &HashSet<&str>) -> (Vec<&'a LabeledProblem>, Vec<&'a LabeledProblem>) {
    labeled.iter().partition(|p| !test_ids.contains(p.id.as_str()))
}

fn run_split(args: &SplitArgs, lang: Language) -> Result<(), Failure> {
    let pool = load(&args.input, lang)?;
    if args.k.is_empty() {
        return Err(Failure::Usage(anyhow::anyhow!("--k needs at least one value")));
    }
    let atomize_config = AtomizeConfig { window: args.window, seed: args.seed, ..AtomizeConfig::default() };
    let split_config = SplitConfig::<f64> {
        atom_bound: args.atom_bound,
        target_ratio: args.ratio,
        ratio_tolerance: args.ratio_tolerance,
        alpha_atom: args.alpha_atom,
        alpha_compound: args.alpha_compound,
        seed: args.seed,
        sweeps: args.sweeps,
        restarts: args.restarts,
        ..SplitConfig::default()
    };
    let (best, trials) = select_k(&pool, &args.k, &atomize_config, &split_config).context("splitting")?;
    let chosen = &trials[best];
    log::info!(
        "chose k={} (DBCA^a {:.4}, DBCA^c {:.4})",
        chosen.k,
        chosen.split.report.atom_divergence,
        chosen.split.report.compound_divergence
    );

    let labeled = label_pool(&pool, &chosen.labeling).context("labeling pool")?;
    let test_ids: HashSet<&str> = chosen.split.test.iter().map(String::as_str).collect();
    let (train_side, test_side) = split_sides(&labeled, &test_ids);
    let split_stats = stats(&train_side, &test_side, args.alpha_atom, args.alpha_compound).context("computing statistics")?;

    let out = Outputs::create(&args.out_dir)?;
    out.write_corpus("train.jsonl", &subset(&pool, &chosen.split.train)?)?;
    out.write_corpus("test.jsonl", &subset(&pool, &chosen.split.test)?)?;
    let labels_path = out.path("labels.jsonl");
    write_jsonl(&labels_path, chosen.labeling.records()).with_context(|| format!("writing {}", labels_path.display()))?;

    let mut report = report_header("split");
    if let Value::Object(columns) = serde_json::to_value(&split_stats).context("serializing statistics")? {
        report.extend(columns);
    }
    report.insert("alpha_atom".into(), json!(args.alpha_atom));
    report.insert("alpha_compound".into(), json!(args.alpha_compound));
    report.insert("atom_bound".into(), json!(args.atom_bound));
    report.insert("chosen_k".into(), json!(chosen.k));
    report.insert(
        "k_trials".into(),
        Value::Array(
            trials
                .iter()
                .map(|t| json!({"k": t.k, "DBCA_a": t.split.report.atom_divergence, "DBCA_c": t.split.report.compound_divergence}))
                .collect(),
        ),
    );
    report.insert("tfidf".into(), json!("tf * (ln((1 + N) / (1 + df)) + 1), l2-normalized"));
    out.write_json("report.json", &report)?;
    out.write_manifest("split", lang, Some(args.seed), args, &[&args.input])?;
    Ok(())
}

fn run_synthesize(args: &SynthArgs, lang: Language) -> Result<(), Failure> {
    let pool = load(&args.pool, lang)?;
    let table = match &args.rules {
        Some(path) => {
            require_input(path)?;
            load_rules(path).context("loading rule table")?
        }
        None => bundled_rules().to_vec(),
    };
    let donors = match &args.corpus {
        Some(path) => load(path, lang)?,
        None => pool.clone(),
    };
    let extractor = match &args.lexicon {
        Some(path) => {
            require_input(path)?;
            KeywordExtractor::from_path(path, lang).context("loading lexicon")?
        }
        None => KeywordExtractor::bundled(lang),
    };
    let indexed = IndexedCorpus::from_dataset(&donors);
    let options = LoadOptions::default();
    let synthesizer = Synthesizer { corpus: &indexed, extractor: &extractor, options: &options };
    let result = build_sd(&pool, &table, &synthesizer);

    let out = Outputs::create(&args.out_dir)?;
    out.write_corpus("train.jsonl", &result.train)?;
    out.write_corpus("test.jsonl", &result.test)?;
    let provenance_path = out.path("provenance.jsonl");
    write_jsonl(&provenance_path, &result.log).with_context(|| format!("writing {}", provenance_path.display()))?;

    let mut outcomes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut abandoned: BTreeMap<String, usize> = BTreeMap::new();
    let mut rules_used: BTreeMap<u32, usize> = BTreeMap::new();
    for entry in &result.log {
        let outcome = match entry.outcome {
            Outcome::Accepted => "accepted",
            Outcome::Abandoned => "abandoned",
            Outcome::NoRule => "no_rule",
        };
        *outcomes.entry(outcome).or_default() += 1;
        if let Some(reason) = &entry.abandonment {
            let tag = serde_json::to_value(reason).ok().and_then(|v| v.get("reason").and_then(Value::as_str).map(str::to_string));
            *abandoned.entry(tag.unwrap_or_default()).or_default() += 1;
        }
        if let (Outcome::Accepted, Some(rule)) = (entry.outcome, entry.rule) {
            *rules_used.entry(rule).or_default() += 1;
        }
    }
    let generalization = |tag: &str| {
        result
            .test
            .problems
            .iter()
            .filter(|p| p.extra.get("generalization").and_then(Value::as_str) == Some(tag))
            .count()
    };
    let mut report = report_header("synthesize");
    report.insert("pool_count".into(), json!(pool.len()));
    report.insert("train_count".into(), json!(result.train.len()));
    report.insert("test_count".into(), json!(result.test.len()));
    report.insert("structural".into(), json!(generalization("structural")));
    report.insert("lexical".into(), json!(generalization("lexical")));
    report.insert("outcomes".into(), json!(outcomes));
    report.insert("abandoned".into(), json!(abandoned));
    report.insert("accepted_by_rule".into(), json!(rules_used));
    out.write_json("report.json", &report)?;

    let mut inputs: Vec<&Path> = vec![&args.pool];
    inputs.extend(args.rules.as_deref());
    inputs.extend(args.corpus.as_deref());
    inputs.extend(args.lexicon.as_deref());
    out.write_manifest("synthesize", lang, Some(args.seed), args, &inputs)?;
    Ok(())
}

fn parse_ranker(choice: &str, train: &Dataset) -> Result<Box<dyn Ranker>, Failure> {
    if let Some(n) = choice.strip_prefix("ngram:") {
        let n: usize = n.parse().map_err(|_| Failure::Usage(anyhow::anyhow!("bad n-gram order in --ranker {choice}")))?;
        let ranker = NgramRanker::fit(train, n).map_err(|e| Failure::Usage(e.into()))?;
        return Ok(Box::new(ranker));
    }
    if let Some(command) = choice.strip_prefix("exec:") {
        if command.trim().is_empty() {
            return Err(Failure::Usage(anyhow::anyhow!("--ranker exec: needs a command")));
        }
        return Ok(Box::new(ExecRanker::new(command)));
    }
    Err(Failure::Usage(anyhow::anyhow!("unknown ranker {choice:?} (use ngram:N or exec:COMMAND)")))
}

fn run_augment(args: &AugmentArgs, lang: Language) -> Result<(), Failure> {
    let train = load(&args.train, lang)?;
    if args.iterations == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--iterations must be at least 1")));
    }
    if !(args.keep > 0.0 && args.keep <= 1.0) {
        return Err(Failure::Usage(anyhow::anyhow!("--keep must lie in (0, 1]")));
    }
    let mut ranker = parse_ranker(&args.ranker, &train)?;
    let config = AugmentConfig {
        iterations: args.iterations,
        keep: args.keep,
        max_span: args.max_span,
        seed: args.seed,
        max_candidates: (args.max_candidates > 0).then_some(args.max_candidates),
    };
    let result = augment_loop(&train, ranker.as_mut(), &config, &LoadOptions::default()).context("augmenting")?;

    let dir = match args.output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let out = Outputs::create(&dir)?;
    save_corpus(&result.dataset, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    let provenance_path = out.path("provenance.jsonl");
    write_jsonl(&provenance_path, &result.provenance).with_context(|| format!("writing {}", provenance_path.display()))?;

    let mut report = report_header("augment");
    report.insert("input_count".into(), json!(train.len()));
    report.insert("output_count".into(), json!(result.dataset.len()));
    report.insert("iterations".into(), serde_json::to_value(&result.stats).context("serializing statistics")?);
    out.write_json("report.json", &report)?;
    out.write_manifest("augment", lang, Some(args.seed), args, &[&args.train])?;
    Ok(())
}

fn run_stats(args: &StatsArgs, lang: Language) -> Result<(), Failure> {
    let train = load(&args.train, lang)?;
    let test = load(&args.test, lang)?;
    let test_ids: HashSet<&str> = test.problems.iter().map(|p| p.id.as_str()).collect();
    if let Some(shared) = train.problems.iter().find(|p| test_ids.contains(p.id.as_str())) {
        return Err(Failure::Runtime(anyhow::anyhow!("problem id {} occurs in both train and test", shared.id)));
    }
    let mut problems = train.problems.clone();
    problems.extend(test.problems.iter().cloned());
    let union = Dataset::new(problems, lang).context("combining train and test")?;
    let atomize_config = AtomizeConfig { k: args.k, window: args.window, seed: args.seed, ..AtomizeConfig::default() };
    let labeling = atomize::<f64>(&union, &atomize_config).context("labeling atoms")?;
    let labeled = label_pool(&union, &labeling).context("labeling atoms")?;
    let (train_side, test_side) = split_sides(&labeled, &test_ids);
    let split_stats = stats(&train_side, &test_side, args.alpha_atom, args.alpha_compound).context("computing statistics")?;

    let mut report = report_header("stats");
    if let Value::Object(columns) = serde_json::to_value(&split_stats).context("serializing statistics")? {
        report.extend(columns);
    }
    report.insert("alpha_atom".into(), json!(args.alpha_atom));
    report.insert("alpha_compound".into(), json!(args.alpha_compound));
    report.insert("k".into(), json!(args.k));
    let text = serde_json::to_string_pretty(&report).context("serializing report")?;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    if let Some(dir) = &args.out {
        let out = Outputs::create(dir)?;
        out.write_json("report.json", &report)?;
        out.write_manifest("stats", lang, Some(args.seed), args, &[&args.train, &args.test])?;
    }
    Ok(())
}

/// One problem found by `validate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub id: Option<String>,
    pub kind: String,
    pub message: String,
}

/// Checks every record of a corpus: JSON syntax, expression parsing,
/// alignment, exact evaluation, answer agreement and id uniqueness.
pub fn validate_corpus(path: &Path, language: Language, answer_tolerance: f64) -> anyhow::Result<Vec<Diagnostic>> {
    let options = LoadOptions::default();
    let mut diagnostics = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut push = |line: usize, id: Option<&str>, kind: &str, message: String| {
        diagnostics.push(Diagnostic { line, id: id.map(str::to_string), kind: kind.into(), message });
    };
    for (line, record) in read_records(path)? {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                push(line, None, "malformed json", e.to_string());
                continue;
            }
        };
        let id = Some(record.id.as_str());
        if !seen.insert(record.id.clone()) {
            push(line, id, "duplicate id", format!("id {} already used", record.id));
        }
        let problem = match MathWordProblem::from_record(&record, language, &options) {
            Ok(p) => p,
            Err(e) => {
                push(line, id, "alignment", e.to_string());
                continue;
            }
        };
        let value = match problem.evaluate::<Rational>() {
            Ok(v) => v,
            Err(e) => {
                push(line, id, "evaluation error", e.to_string());
                continue;
            }
        };
        if let Some(answer) = problem.answer {
            let computed = rational_to_f64(&value);
            if (computed - answer).abs() > answer_tolerance * answer.abs().max(1.0) {
                push(line, id, "answer mismatch", format!("expression gives {computed}, answer says {answer}"));
            }
        }
    }
    Ok(diagnostics)
}

fn run_validate(args: &ValidateArgs, lang: Language) -> Result<(), Failure> {
    require_input(&args.corpus)?;
    let diagnostics = validate_corpus(&args.corpus, lang, args.answer_tolerance)?;
    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    for d in &diagnostics {
        let id = d.id.as_deref().unwrap_or("-");
        let _ = writeln!(handle, "line {}: {id}: {}: {}", d.line, d.kind, d.message);
    }
    if let Some(dir) = &args.out {
        let out = Outputs::create(dir)?;
        let mut report = report_header("validate");
        report.insert("diagnostic_count".into(), json!(diagnostics.len()));
        report.insert("diagnostics".into(), serde_json::to_value(&diagnostics).context("serializing diagnostics")?);
        out.write_json("report.json", &report)?;
        out.write_manifest("validate", lang, None, args, &[&args.corpus])?;
    }
    if diagnostics.is_empty() {
        log::info!("{}: no problems found", args.corpus.display());
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("{} problem(s) found in {}", diagnostics.len(), args.corpus.display())))
    }
}

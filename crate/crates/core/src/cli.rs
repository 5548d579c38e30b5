//! Command-line orchestration.
//!
//! Every command takes `--config <path>` (a TOML document) and reads or
//! writes stage files in the configured output directory:
//!
//! | command            | reads                          | writes                                  |
//! |--------------------|--------------------------------|-----------------------------------------|
//! | `genq`             | claims                         | `questions.jsonl`, `conversion_stats.json` |
//! | `answer`           | `questions.jsonl`, vocab       | `answers.jsonl`                         |
//! | `classify`         | claims, questions, answers     | `verdicts.jsonl`, `report.json`, `report.txt` |
//! | `derive-threshold` | claims, `verdicts.jsonl`       | `threshold.json`                        |
//! | `run`              | claims                         | all of the above except `threshold.json` |
//!
//! Exit codes: 0 success, 1 configuration, 2 data, 3 transport.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answerer::{answer_questions, AnswerOutcome, AnswerRecord, Backend, OracleBackend, RemoteBackend, ScriptedBackend};
use crate::classify::{
    derive_threshold, evaluate, gold_map, render_conversion_table, render_report, EvalReport, Objective, PrPoint,
    Threshold, ThresholdSpec, Verdict,
};
use crate::clozegen::{conversion_stats, generate, ClozeQuestion, ConversionStats};
use crate::dataset::{load_claims, read_stage, write_stage};
use crate::http::RetryPolicy;
use crate::tagger::{tag_record, Gazetteer, RemoteTagger, RuleTagger, Tagger};
use crate::tokenizer::Vocab;
use crate::Error;

pub const QUESTIONS_FILE: &str = "questions.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const CONVERSION_STATS_FILE: &str = "conversion_stats.json";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const THRESHOLD_FILE: &str = "threshold.json";

const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const DEFAULT_BATCH_SIZE: usize = 32;

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggerConfig {
    #[default]
    Rule,
    Remote {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    /// Fixed answer key; without a path every question is keyed to its gold answer.
    Oracle {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    Scripted {
        path: PathBuf,
    },
    Remote {
        endpoint: String,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

impl std::str::FromStr for BackendConfig {
    type Err = Error;

    /// `oracle`, `oracle:<path>`, `scripted:<path>`, `remote:<url>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match (kind, rest) {
            ("oracle", "") => Ok(BackendConfig::Oracle { path: None }),
            ("oracle", p) => Ok(BackendConfig::Oracle { path: Some(p.into()) }),
            ("scripted", p) if !p.is_empty() => Ok(BackendConfig::Scripted { path: p.into() }),
            ("remote", url) if !url.is_empty() => Ok(BackendConfig::Remote {
                endpoint: url.to_string(),
                batch_size: DEFAULT_BATCH_SIZE,
                timeout_ms: DEFAULT_TIMEOUT_MS,
            }),
            _ => Err(Error::Config(format!(
                "bad backend {s:?}; expected oracle[:path], scripted:<path> or remote:<url>"
            ))),
        }
    }
}

fn default_phi() -> String {
    "0.76".into()
}

fn default_retries() -> u32 {
    3
}

fn default_retry_base_ms() -> u64 {
    200
}

fn default_top_k() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    claims_path: PathBuf,
    vocab_path: PathBuf,
    #[serde(default)]
    gazetteer_path: Option<PathBuf>,
    #[serde(default)]
    tagger: TaggerConfig,
    backend: BackendConfig,
    #[serde(default = "default_phi")]
    phi: String,
    output_dir: PathBuf,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default = "default_top_k")]
    top_k: usize,
    #[serde(default = "default_retries")]
    retries: u32,
    #[serde(default = "default_retry_base_ms")]
    retry_base_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub claims_path: PathBuf,
    pub vocab_path: PathBuf,
    pub gazetteer_path: Option<PathBuf>,
    pub tagger: TaggerConfig,
    pub backend: BackendConfig,
    pub phi: ThresholdSpec,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses one per core.
    pub jobs: Option<usize>,
    pub top_k: usize,
    pub retry: RetryPolicy,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    /// Parse a TOML config. Relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, Error> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let backend = match file.backend {
            BackendConfig::Oracle { path } => BackendConfig::Oracle {
                path: path.map(|p| resolve(base_dir, p)),
            },
            BackendConfig::Scripted { path } => BackendConfig::Scripted {
                path: resolve(base_dir, path),
            },
            remote => remote,
        };
        Ok(PipelineConfig {
            claims_path: resolve(base_dir, file.claims_path),
            vocab_path: resolve(base_dir, file.vocab_path),
            gazetteer_path: file.gazetteer_path.map(|p| resolve(base_dir, p)),
            tagger: file.tagger,
            backend,
            phi: file.phi.parse()?,
            output_dir: resolve(base_dir, file.output_dir),
            jobs: file.jobs,
            top_k: file.top_k,
            retry: RetryPolicy {
                max_retries: file.retries,
                base_delay: Duration::from_millis(file.retry_base_ms),
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Check that every referenced input exists and values are in range.
    pub fn validate(&self) -> Result<(), Error> {
        let must_exist = |label: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(Error::Config(format!("{label} {} does not exist", p.display())))
            }
        };
        must_exist("claims_path", &self.claims_path)?;
        must_exist("vocab_path", &self.vocab_path)?;
        if let Some(g) = &self.gazetteer_path {
            must_exist("gazetteer_path", g)?;
        }
        match &self.backend {
            BackendConfig::Oracle { path: Some(p) } | BackendConfig::Scripted { path: p } => {
                must_exist("backend path", p)?
            }
            BackendConfig::Remote { batch_size: 0, .. } => {
                return Err(Error::Config("backend batch_size must be at least 1".into()))
            }
            _ => {}
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn output(&self, file: &str) -> PathBuf {
        self.output_dir.join(file)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Error> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(jobs) = self.jobs {
            builder = builder.num_threads(jobs);
        }
        builder.build().map_err(|e| Error::Config(e.to_string()))
    }

    fn ensure_output_dir(&self) -> Result<(), Error> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::Io {
            path: self.output_dir.display().to_string(),
            message: e.to_string(),
        })
    }

    fn require_input(&self, file: &str) -> Result<PathBuf, Error> {
        let path = self.output(file);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::Config(format!(
                "{} does not exist; run the earlier stage first",
                path.display()
            )))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    write_text(path, &text)
}

fn build_tagger(config: &PipelineConfig) -> Result<Box<dyn Tagger>, Error> {
    Ok(match &config.tagger {
        TaggerConfig::Rule => {
            let gazetteer = match &config.gazetteer_path {
                Some(p) => Gazetteer::load(p)?,
                None => Gazetteer::new(),
            };
            Box::new(RuleTagger::new(gazetteer))
        }
        TaggerConfig::Remote { endpoint, timeout_ms } => Box::new(RemoteTagger::new(
            endpoint.clone(),
            Duration::from_millis(*timeout_ms),
            config.retry,
        )),
    })
}

fn build_backend(config: &PipelineConfig, questions: &[ClozeQuestion]) -> Result<Box<dyn Backend>, Error> {
    Ok(match &config.backend {
        BackendConfig::Oracle { path: None } => Box::new(OracleBackend::from_gold(questions)),
        BackendConfig::Oracle { path: Some(p) } => Box::new(OracleBackend::load(p)?),
        BackendConfig::Scripted { path } => Box::new(ScriptedBackend::load(path)?),
        BackendConfig::Remote {
            endpoint,
            batch_size,
            timeout_ms,
        } => Box::new(RemoteBackend::new(
            endpoint.clone(),
            Duration::from_millis(*timeout_ms),
            *batch_size,
            config.retry,
        )),
    })
}

/// Tag every claim and write the questions stage file.
pub fn cmd_genq(config: &PipelineConfig) -> Result<ConversionStats, Error> {
    config.validate()?;
    let claims = load_claims(&config.claims_path)?;
    let tagger = build_tagger(config)?;
    let per_claim: Vec<Vec<ClozeQuestion>> = config.pool()?.install(|| {
        claims
            .par_iter()
            .map(|claim| {
                let spans = tag_record(tagger.as_ref(), claim)?;
                Ok(generate(claim, &spans)?)
            })
            .collect::<Result<_, Error>>()
    })?;
    let mut questions: Vec<ClozeQuestion> = per_claim.into_iter().flatten().collect();
    questions.sort_by_key(|q| (q.claim_id, q.question_index));
    let stats = conversion_stats(&claims, &questions)?;

    config.ensure_output_dir()?;
    write_stage(config.output(QUESTIONS_FILE), &questions)?;
    write_json(&config.output(CONVERSION_STATS_FILE), &stats)?;
    Ok(stats)
}

/// Answer every question and write the answers stage file.
pub fn cmd_answer(config: &PipelineConfig) -> Result<AnswerOutcome, Error> {
    config.validate()?;
    let questions: Vec<ClozeQuestion> = read_stage(config.require_input(QUESTIONS_FILE)?)?;
    let vocab = Vocab::load(&config.vocab_path)?;
    let backend = build_backend(config, &questions)?;
    let outcome = config
        .pool()?
        .install(|| answer_questions(&questions, &vocab, backend.as_ref(), config.top_k))?;
    config.ensure_output_dir()?;
    write_stage(config.output(ANSWERS_FILE), &outcome.records)?;
    Ok(outcome)
}

/// Score and label every answered claim; write verdicts and the report.
pub fn cmd_classify(config: &PipelineConfig) -> Result<EvalReport, Error> {
    config.validate()?;
    let questions_path = config.require_input(QUESTIONS_FILE)?;
    let answers_path = config.require_input(ANSWERS_FILE)?;
    let claims = load_claims(&config.claims_path)?;
    let questions: Vec<ClozeQuestion> = read_stage(questions_path)?;
    let answers: Vec<AnswerRecord> = read_stage(answers_path)?;
    let (verdicts, report) = evaluate(&claims, &questions, &answers, config.phi)?;
    write_stage(config.output(VERDICTS_FILE), &verdicts)?;
    write_json(&config.output(REPORT_JSON_FILE), &report)?;
    write_text(&config.output(REPORT_TEXT_FILE), &render_report(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub objective: String,
    pub threshold: Threshold,
    pub pr_curve: Vec<PrPoint>,
}

/// Derive a threshold from an existing verdicts file.
pub fn cmd_derive_threshold(config: &PipelineConfig, objective: Option<Objective>) -> Result<ThresholdReport, Error> {
    config.validate()?;
    let verdicts_path = config.require_input(VERDICTS_FILE)?;
    let objective = objective.unwrap_or(match config.phi {
        ThresholdSpec::Derive(o) => o,
        ThresholdSpec::Fixed(_) => Objective::MaxF1,
    });
    let claims = load_claims(&config.claims_path)?;
    let verdicts: Vec<Verdict> = read_stage(verdicts_path)?;
    let (threshold, pr_curve) = derive_threshold(&verdicts, &gold_map(&claims), objective)?;
    let report = ThresholdReport {
        objective: objective.to_string(),
        threshold,
        pr_curve,
    };
    write_json(&config.output(THRESHOLD_FILE), &report)?;
    Ok(report)
}

/// `genq`, then `answer`, then `classify`.
pub fn cmd_run(config: &PipelineConfig) -> Result<EvalReport, Error> {
    cmd_genq(config)?;
    cmd_answer(config)?;
    cmd_classify(config)
}

#[derive(Debug, Parser)]
#[command(name = "clozecheck", version, about = "Verify claims by answering Cloze questions about them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Pipeline configuration file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Threshold: a decimal, `k/N`, `k-of-N`, `strict`, `lenient` or `derive(<objective>)`
    #[arg(long)]
    pub phi: Option<String>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Vocabulary file, one token per line
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Backend: `oracle`, `oracle:<path>`, `scripted:<path>` or `remote:<url>`
    #[arg(long)]
    pub backend: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate Cloze questions from claims
    Genq(CommonArgs),
    /// Answer generated questions
    Answer(CommonArgs),
    /// Score, label and evaluate answered claims
    Classify(CommonArgs),
    /// Choose a threshold from the precision-recall sweep of existing verdicts
    DeriveThreshold {
        #[command(flatten)]
        common: CommonArgs,
        /// `max_f1`, `precision_at_least(p)` or `recall_at_least(r)`
        #[arg(long)]
        objective: Option<String>,
    },
    /// Run all stages
    Run(CommonArgs),
}

impl CommonArgs {
    /// Load the config file and apply command-line overrides.
    pub fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut config = PipelineConfig::load(&self.config)?;
        if let Some(phi) = &self.phi {
            config.phi = phi.parse()?;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
        if let Some(vocab) = &self.vocab {
            config.vocab_path = vocab.clone();
        }
        if let Some(backend) = &self.backend {
            config.backend = backend.parse()?;
        }
        Ok(config)
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    match command {
        Command::Genq(args) => {
            let stats = cmd_genq(&args.resolve()?)?;
            print!("{}", render_conversion_table(&stats));
        }
        Command::Answer(args) => {
            let outcome = cmd_answer(&args.resolve()?)?;
            let correct = outcome.records.iter().filter(|r| r.correct).count();
            println!(
                "answered {} questions, {} correct, {} claims failed, {} answers tokenized whole-word",
                outcome.records.len(),
                correct,
                outcome.failed_claims.len(),
                outcome.fallback_questions
            );
        }
        Command::Classify(args) => {
            let report = cmd_classify(&args.resolve()?)?;
            print!("{}", render_report(&report));
        }
        Command::DeriveThreshold { common, objective } => {
            let objective = objective.as_deref().map(str::parse).transpose()?;
            let report = cmd_derive_threshold(&common.resolve()?, objective)?;
            println!("{}: φ = {}", report.objective, report.threshold.phi);
        }
        Command::Run(args) => {
            let report = cmd_run(&args.resolve()?)?;
            print!("{}", render_report(&report));
        }
    }
    Ok(())
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

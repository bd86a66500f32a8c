//! Command implementations behind the `dtscore` binary.
//!
//! Each command returns a serializable report. [`run`] prints it to stdout
//! (JSON by default, aligned text with `--format text`); warnings and errors
//! go to stderr through `log`. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | invalid or unreadable input (data, config, ratings, arguments) |
//! | 2 | embedding backend failure (unreachable, wrong dimension) |
//! | 3 | internal error |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::data::{
    build_trials, subject_groups, DataError, EmbeddingVector, EnsembleScore, RatingKind,
    ResponseScore, ScoreTable, SubjectScore,
};
use crate::embed::{EmbedError, Embedder, EmbeddingCache};
use crate::io::{
    export_scores, format_sig9, parse_ratings_file, parse_responses, read_subject_scores, CsvTable,
    ModelRunStats, PipelineError, RunConfig, RunManifest,
};
use crate::scoring::{
    elaboration, elaboration_cjk, ensemble_stratified, flexibility, fluency, semantic_distance,
    subject_originality, EnsembleSpec, ScoreError,
};
use crate::stats::{
    icc_2k, min_n_per_group, pearson, select_models, t_test_pooled, Alternative, CorrKey,
    DCiMethod, GroupComparison, PowerRequest, PowerResult, Selection, StatsError, TTestOptions,
    Tails,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ValidationError = 1,
    BackendError = 2,
    InternalError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model {model_id:?}: {source}")]
    Embed {
        model_id: String,
        #[source]
        source: EmbedError,
    },
    #[error("{context}: {source}")]
    Score {
        context: String,
        #[source]
        source: ScoreError,
    },
    #[error("{context}: {source}")]
    Stats {
        context: String,
        #[source]
        source: StatsError,
    },
    #[error("expected exactly 2 groups, found {}: {:?}", .0.len(), .0)]
    GroupCount(Vec<String>),
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Embed { source, .. } => match source {
                EmbedError::BackendUnavailable(_) | EmbedError::DimensionMismatch { .. } => {
                    ExitStatus::BackendError
                }
                EmbedError::Io { .. } | EmbedError::CacheCorrupt { .. } => {
                    ExitStatus::InternalError
                }
                _ => ExitStatus::ValidationError,
            },
            CliError::Score { source, .. } => match source {
                ScoreError::DegenerateVector { .. } | ScoreError::DimensionMismatch { .. } => {
                    ExitStatus::BackendError
                }
                ScoreError::AlignmentError(_) => ExitStatus::InternalError,
                _ => ExitStatus::ValidationError,
            },
            CliError::Internal(_) => ExitStatus::InternalError,
            _ => ExitStatus::ValidationError,
        }
    }
}

fn stats_err(context: impl Into<String>) -> impl FnOnce(StatsError) -> CliError {
    let context = context.into();
    move |source| CliError::Stats { context, source }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "dtscore",
    version,
    about = "Semantic-distance scoring of Alternate Uses Task responses"
)]
pub struct Cli {
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed responses and write response, subject and ensemble score CSVs.
    Score(ScoreArgs),
    /// Correlate model scores with human ratings; ICC and model selection.
    Validate(ValidateArgs),
    /// Compare two groups on an ensemble measure.
    Compare(CompareArgs),
    /// Minimum n per group for a two-sample t test.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Responses CSV: subject_id,prompt_id,order,response_text[,group_label].
    #[arg(long)]
    pub data: PathBuf,
    /// Ignore the configured cache directory.
    #[arg(long)]
    pub cache_off: bool,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for embedding (default: available processors).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Count only CJK ideographs for elaboration.
    #[arg(long)]
    pub cjk_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// subject_scores.csv from `score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub ratings: PathBuf,
    /// Selection threshold; a cell must exceed it for every rater.
    #[arg(long, default_value_t = 0.30)]
    pub threshold: f64,
    /// k for aggregating a rater's response ratings into a subject score.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Originality,
    Flexibility,
}

impl Measure {
    fn column(self) -> &'static str {
        match self {
            Measure::Originality => "originality_z_mean",
            Measure::Flexibility => "flexibility_z_mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DCiArg {
    Normal,
    NoncentralT,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// ensemble_scores.csv from `score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "group_label")]
    pub group_col: String,
    #[arg(long, value_enum)]
    pub measure: Measure,
    #[arg(long, value_enum, default_value = "two")]
    pub tails: TailsArg,
    /// Group expected to score higher; required for a one-tailed test.
    #[arg(long)]
    pub expect_greater: Option<String>,
    /// Welch's unequal-variance test.
    #[arg(long)]
    pub welch: bool,
    #[arg(long, value_enum, default_value = "normal")]
    pub d_ci: DCiArg,
    /// Restrict to these prompts (repeatable). Default: all.
    #[arg(long = "prompt")]
    pub prompts: Vec<String>,
    /// Write a plot-ready long CSV (subject_id,group,measure,value).
    #[arg(long)]
    pub long_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailsArg {
    One,
    Two,
}

impl From<TailsArg> for Tails {
    fn from(t: TailsArg) -> Self {
        match t {
            TailsArg::One => Tails::One,
            TailsArg::Two => Tails::Two,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Cohen's d.
    #[arg(long, allow_negative_numbers = true)]
    pub d: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
    #[arg(long, value_enum, default_value = "two")]
    pub tails: TailsArg,
}

/// Runs a parsed command line, printing the report. Returns the exit status.
pub fn run(cli: Cli) -> ExitStatus {
    let printed = match &cli.command {
        Command::Score(a) => run_score(a).map(|r| render(&r, cli.format, ScoreReport::text)),
        Command::Validate(a) => {
            run_validate(a).map(|r| render(&r, cli.format, ValidationReport::text))
        }
        Command::Compare(a) => run_compare(a).map(|r| render(&r, cli.format, CompareReport::text)),
        Command::Power(a) => run_power(a).map(|r| render(&r, cli.format, PowerReport::text)),
    };
    match printed {
        Ok(out) => {
            print!("{out}");
            ExitStatus::Success
        }
        Err(e) => {
            log::error!("{e}");
            e.exit_status()
        }
    }
}

fn render<T: Serialize>(report: &T, format: Format, text: fn(&T) -> String) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => text(report),
    }
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub n_responses: usize,
    pub n_trials: usize,
    pub manifest: RunManifest,
    #[serde(skip)]
    pub table: ScoreTable,
}

impl ScoreReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scored {} responses in {} trials",
            self.n_responses, self.n_trials
        );
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>10} {:>10}",
            "model", "embedded", "hits", "misses"
        );
        for m in &self.manifest.models {
            let _ = writeln!(
                s,
                "{:<16} {:>10} {:>10} {:>10}",
                m.model_id, m.embeddings, m.cache_hits, m.cache_misses
            );
        }
        for f in &self.files {
            let _ = writeln!(s, "wrote {}", f.display());
        }
        s
    }
}

pub fn run_score(args: &ScoreArgs) -> Result<ScoreReport, CliError> {
    let (mut config, config_bytes) = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if args.cache_off {
        config.cache_dir = None;
    }
    config.cjk_only |= args.cjk_only;

    let dataset_bytes = std::fs::read(&args.data).map_err(|e| PipelineError::Io {
        path: args.data.clone(),
        source: e,
    })?;
    let records = parse_responses(dataset_bytes.as_slice())?;
    if let Some((i, rec)) = records
        .iter()
        .enumerate()
        .find(|(_, r)| !config.prompts.contains_key(&r.prompt_id))
    {
        return Err(CliError::Invalid(format!(
            "{}: row {}: prompt_id {:?} is not defined in the config",
            args.data.display(),
            i + 1,
            rec.prompt_id
        )));
    }
    let trials = build_trials(&records)?;
    let groups = subject_groups(&records)?;

    let jobs = match args.jobs {
        Some(0) => return Err(CliError::Invalid("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    // Distinct texts, sorted, so backend traffic is independent of row order.
    let used_prompts: BTreeSet<&str> = trials.iter().map(|t| t.prompt_id.as_str()).collect();
    let mut texts: BTreeSet<&str> = used_prompts
        .iter()
        .map(|p| config.prompts[*p].as_str())
        .collect();
    texts.extend(records.iter().map(|r| r.response_text.as_str()));
    let texts: Vec<&str> = texts.into_iter().collect();

    let mut table = ScoreTable::default();
    let mut run_stats = Vec::with_capacity(config.models.len());
    let mut originality: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut flex: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for model in &config.models {
        let model_id = model.model_id.clone();
        let embed_err = |source| CliError::Embed {
            model_id: model_id.clone(),
            source,
        };
        let cache = config.cache_dir.as_ref().map(EmbeddingCache::new);
        let embedder = Embedder::new(model.clone(), cache).map_err(embed_err)?;
        let vectors = if texts.is_empty() {
            Vec::new()
        } else {
            pool.install(|| embedder.embed_batch(&texts))
                .map_err(embed_err)?
        };
        let lookup: HashMap<&str, &EmbeddingVector> =
            texts.iter().copied().zip(vectors.iter()).collect();
        let stats = embedder.stats();
        run_stats.push(ModelRunStats {
            model_id: model_id.clone(),
            embeddings: texts.len(),
            cache_hits: stats.cache_hits,
            cache_misses: stats.cache_misses,
        });

        let (mut orig_col, mut flex_col) = (
            Vec::with_capacity(trials.len()),
            Vec::with_capacity(trials.len()),
        );
        for trial in &trials {
            let context = || {
                format!(
                    "model {model_id:?}, subject {:?}, prompt {:?}",
                    trial.subject_id, trial.prompt_id
                )
            };
            let score_err = |source| CliError::Score {
                context: context(),
                source,
            };
            let prompt_vec = lookup[config.prompts[&trial.prompt_id].as_str()];
            let response_vecs: Vec<EmbeddingVector> = trial
                .responses
                .iter()
                .map(|r| lookup[r.response_text.as_str()].clone())
                .collect();
            let mut distances = Vec::with_capacity(response_vecs.len());
            for (rec, v) in trial.responses.iter().zip(&response_vecs) {
                let d = semantic_distance(prompt_vec, v).map_err(|e| match e {
                    ScoreError::DegenerateVector { .. } => ScoreError::DegenerateVector {
                        index: Some(rec.order as usize),
                    },
                    other => other,
                });
                let d = d.map_err(score_err)?;
                distances.push(d);
                table.response_scores.push(ResponseScore {
                    subject_id: rec.subject_id.clone(),
                    prompt_id: rec.prompt_id.clone(),
                    order: rec.order,
                    model_id: model_id.clone(),
                    originality_distance: d,
                    elaboration: if config.cjk_only {
                        elaboration_cjk(&rec.response_text)
                    } else {
                        elaboration(&rec.response_text)
                    },
                });
            }
            let topk = subject_originality(&distances, config.top_k).map_err(score_err)?;
            let flexibility_sum = flexibility(&response_vecs).map_err(score_err)?;
            table.subject_scores.push(SubjectScore {
                subject_id: trial.subject_id.clone(),
                prompt_id: trial.prompt_id.clone(),
                model_id: model_id.clone(),
                originality_topk: topk,
                flexibility_sum,
                fluency: fluency(trial),
            });
            orig_col.push(topk);
            flex_col.push(flexibility_sum);
        }
        originality.insert(model_id.clone(), orig_col);
        flex.insert(model_id, flex_col);
    }

    if !trials.is_empty() {
        let spec =
            EnsembleSpec::new(config.model_ids(), config.standardize_scope).map_err(|source| {
                CliError::Score {
                    context: "ensemble".into(),
                    source,
                }
            })?;
        let strata: Vec<&str> = trials.iter().map(|t| t.prompt_id.as_str()).collect();
        let ens = |scores: &BTreeMap<String, Vec<f64>>, measure: &str| {
            ensemble_stratified(scores, &strata, &spec).map_err(|source| CliError::Score {
                context: format!("{measure} ensemble ({:?} scope)", config.standardize_scope),
                source,
            })
        };
        let orig_z = ens(&originality, "originality")?;
        let flex_z = ens(&flex, "flexibility")?;
        for ((trial, o), f) in trials.iter().zip(orig_z).zip(flex_z) {
            table.ensemble_scores.push(EnsembleScore {
                subject_id: trial.subject_id.clone(),
                prompt_id: trial.prompt_id.clone(),
                originality_z_mean: o,
                flexibility_z_mean: f,
                group_label: groups.get(&trial.subject_id).cloned().flatten(),
            });
        }
    }
    table.sort();
    table
        .validate()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let files = export_scores(&table, &config.output_dir)?;
    let manifest = RunManifest::new(
        &config_bytes,
        &dataset_bytes,
        run_stats,
        config.cache_dir.is_some(),
    );
    manifest.write(&config.output_dir)?;
    let mut files = files;
    files.push(config.output_dir.join(crate::io::MANIFEST_FILE));

    Ok(ScoreReport {
        output_dir: config.output_dir.clone(),
        files,
        n_responses: records.len(),
        n_trials: trials.len(),
        manifest,
        table,
    })
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationRow {
    pub measure: Measure,
    pub model_id: String,
    pub prompt_id: String,
    pub rater_id: String,
    pub n: usize,
    /// `None` when either side has zero variance.
    pub r: Option<f64>,
    pub p_two_tailed: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IccRow {
    pub measure: Measure,
    pub prompt_id: String,
    pub n_targets: usize,
    pub k_raters: usize,
    pub icc2k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub threshold: f64,
    pub top_k: usize,
    pub correlations: Vec<CorrelationRow>,
    pub icc: Vec<IccRow>,
    /// Selection over originality correlations; `None` when the table is
    /// incomplete or there are no originality ratings.
    pub selection: Option<Selection>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            s,
            "{:<12} {:<14} {:<14} {:<8} {:>5} {:>7} {:>8}",
            "measure", "model", "prompt", "rater", "n", "r", "p"
        );
        for c in &self.correlations {
            let measure = match c.measure {
                Measure::Originality => "originality",
                Measure::Flexibility => "flexibility",
            };
            let _ = writeln!(
                s,
                "{:<12} {:<14} {:<14} {:<8} {:>5} {:>7} {:>8}",
                measure,
                c.model_id,
                c.prompt_id,
                c.rater_id,
                c.n,
                opt(c.r),
                c.p_two_tailed
                    .map_or_else(|| "NA".into(), |p| format!("{p:.4}"))
            );
        }
        let _ = writeln!(s);
        for i in &self.icc {
            let _ = writeln!(
                s,
                "ICC(2,k) {:?} {:<14} n={:<5} k={:<3} {}",
                i.measure,
                i.prompt_id,
                i.n_targets,
                i.k_raters,
                i.skipped.clone().unwrap_or_else(|| opt(i.icc2k))
            );
        }
        if let Some(sel) = &self.selection {
            let _ = writeln!(
                s,
                "\nretained at r > {}: models [{}] x prompts [{}]",
                sel.threshold,
                sel.models.join(", "),
                sel.prompts.join(", ")
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

pub fn run_validate(args: &ValidateArgs) -> Result<ValidationReport, CliError> {
    if args.top_k == 0 {
        return Err(CliError::Invalid("--top-k must be at least 1".into()));
    }
    let scores = read_subject_scores(&args.scores)?;
    let ratings = parse_ratings_file(&args.ratings)?;
    let mut warnings = Vec::new();
    let mut warn = |msg: String| {
        log::warn!("{msg}");
        warnings.push(msg);
    };

    // Human subject-level scores per (kind, prompt, rater, subject).
    let mut by_response: BTreeMap<(RatingKind, &str, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in &ratings {
        by_response
            .entry((r.rating_kind, &r.prompt_id, &r.rater_id, &r.subject_id))
            .or_default()
            .push(r.rating);
    }
    let mut human: BTreeMap<(RatingKind, &str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for ((kind, prompt, rater, subject), vals) in &by_response {
        let v = match kind {
            RatingKind::Originality => subject_originality(vals, args.top_k).expect("nonempty"),
            RatingKind::Flexibility => vals.iter().sum::<f64>() / vals.len() as f64,
        };
        human
            .entry((*kind, prompt, rater))
            .or_default()
            .insert(subject, v);
    }

    // (model, prompt) -> subject -> (originality_topk, flexibility_sum)
    type ByCell<'a> = BTreeMap<(&'a str, &'a str), BTreeMap<&'a str, (f64, f64)>>;
    let mut model_scores: ByCell = BTreeMap::new();
    for s in &scores {
        model_scores
            .entry((&s.model_id, &s.prompt_id))
            .or_default()
            .insert(&s.subject_id, (s.originality_topk, s.flexibility_sum));
    }

    let mut correlations = Vec::new();
    let mut corr_table = BTreeMap::new();
    for ((model, prompt), subjects) in &model_scores {
        for ((kind, h_prompt, rater), h) in &human {
            if h_prompt != prompt {
                continue;
            }
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for (subject, &(orig, flex)) in subjects {
                if let Some(&hv) = h.get(subject) {
                    x.push(match kind {
                        RatingKind::Originality => orig,
                        RatingKind::Flexibility => flex,
                    });
                    y.push(hv);
                }
            }
            let context = format!("{kind} model {model:?} prompt {prompt:?} rater {rater:?}");
            if x.len() < 3 {
                return Err(CliError::Stats {
                    context,
                    source: StatsError::InsufficientData(format!(
                        "{} joined pairs, need at least 3",
                        x.len()
                    )),
                });
            }
            let measure = match kind {
                RatingKind::Originality => Measure::Originality,
                RatingKind::Flexibility => Measure::Flexibility,
            };
            let row = match pearson(&x, &y) {
                Ok(c) => CorrelationRow {
                    measure,
                    model_id: model.to_string(),
                    prompt_id: prompt.to_string(),
                    rater_id: rater.to_string(),
                    n: c.n,
                    r: Some(c.r),
                    p_two_tailed: Some(c.p_two_tailed),
                    ci95: Some(c.ci95),
                },
                Err(StatsError::ZeroVariance) => {
                    warn(format!("{context}: zero variance, correlation undefined"));
                    CorrelationRow {
                        measure,
                        model_id: model.to_string(),
                        prompt_id: prompt.to_string(),
                        rater_id: rater.to_string(),
                        n: x.len(),
                        r: None,
                        p_two_tailed: None,
                        ci95: None,
                    }
                }
                Err(e) => return Err(stats_err(context)(e)),
            };
            if measure == Measure::Originality {
                corr_table.insert(
                    CorrKey::new(*model, *prompt, *rater),
                    row.r.unwrap_or(f64::NAN),
                );
            }
            correlations.push(row);
        }
    }

    let icc = icc_rows(&ratings, &mut warn);

    let selection = if corr_table.is_empty() {
        None
    } else {
        match select_models(&corr_table, args.threshold) {
            Ok(s) => Some(s),
            Err(e) => {
                warn(format!("model selection skipped: {e}"));
                None
            }
        }
    };

    Ok(ValidationReport {
        threshold: args.threshold,
        top_k: args.top_k,
        correlations,
        icc,
        selection,
        warnings,
    })
}

/// ICC(2,k) per (measure, prompt). Originality targets are single
/// responses; flexibility targets are trials. Targets not rated by every
/// rater of the prompt are dropped.
fn icc_rows(ratings: &[crate::data::HumanRating], warn: &mut impl FnMut(String)) -> Vec<IccRow> {
    type Target<'a> = (&'a str, Option<u32>);
    type ByRater<'a> = BTreeMap<&'a str, Vec<f64>>;
    let mut cells: BTreeMap<(RatingKind, &str), BTreeMap<Target, ByRater>> = BTreeMap::new();
    for r in ratings {
        let order = match r.rating_kind {
            RatingKind::Originality => r.order,
            RatingKind::Flexibility => None,
        };
        cells
            .entry((r.rating_kind, &r.prompt_id))
            .or_default()
            .entry((&r.subject_id, order))
            .or_default()
            .entry(&r.rater_id)
            .or_default()
            .push(r.rating);
    }

    let mut out = Vec::new();
    for ((kind, prompt), targets) in cells {
        let measure = match kind {
            RatingKind::Originality => Measure::Originality,
            RatingKind::Flexibility => Measure::Flexibility,
        };
        let raters: BTreeSet<&str> = targets.values().flat_map(|m| m.keys().copied()).collect();
        let k = raters.len();
        let mut row = IccRow {
            measure,
            prompt_id: prompt.to_string(),
            n_targets: 0,
            k_raters: k,
            icc2k: None,
            skipped: None,
        };
        if k < 2 {
            let msg = format!("{kind} ICC for prompt {prompt:?} skipped: only one rater");
            warn(msg.clone());
            row.skipped = Some(msg);
            out.push(row);
            continue;
        }
        let matrix: Vec<Vec<f64>> = targets
            .values()
            .filter(|by_rater| by_rater.len() == k)
            .map(|by_rater| {
                raters
                    .iter()
                    .map(|r| {
                        let v = &by_rater[r];
                        v.iter().sum::<f64>() / v.len() as f64
                    })
                    .collect()
            })
            .collect();
        let dropped = targets.len() - matrix.len();
        if dropped > 0 {
            warn(format!(
                "{kind} ICC for prompt {prompt:?}: dropped {dropped} targets not rated by all {k} raters"
            ));
        }
        row.n_targets = matrix.len();
        match icc_2k(&matrix) {
            Ok(r) => row.icc2k = Some(r.icc2k),
            Err(e) => {
                let msg = format!("{kind} ICC for prompt {prompt:?} skipped: {e}");
                warn(msg.clone());
                row.skipped = Some(msg);
            }
        }
        out.push(row);
    }
    out
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl GroupSummary {
    fn new(label: &str, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            label: label.to_string(),
            n,
            mean,
            sd,
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[n - 1],
        }
    }
}

/// Linear interpolation between order statistics (type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub measure: Measure,
    pub group_col: String,
    /// Group 1 (the expected-greater group for one-tailed tests).
    pub group1: String,
    pub group2: String,
    /// Prompts included; empty means all.
    pub prompts: Vec<String>,
    pub comparison: GroupComparison,
    pub groups: Vec<GroupSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_csv: Option<PathBuf>,
}

impl CompareReport {
    fn text(&self) -> String {
        let c = &self.comparison;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>5} {:>9} {:>9} {:>9} {:>9}",
            "group", "n", "mean", "sd", "median", "iqr"
        );
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:<16} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                g.label,
                g.n,
                g.mean,
                g.sd,
                g.median,
                g.q3 - g.q1
            );
        }
        let _ = writeln!(
            s,
            "\n{} vs {}: t({}) = {:.3}, p = {:.4} ({:?}{}), d = {:.3}, 95% CI [{:.3}, {:.3}]",
            self.group1,
            self.group2,
            format_sig9((c.df * 100.0).round() / 100.0),
            c.t_stat,
            c.p,
            c.alternative,
            if c.welch { ", Welch" } else { "" },
            c.cohens_d,
            c.d_ci95.0,
            c.d_ci95.1
        );
        s
    }
}

pub fn run_compare(args: &CompareArgs) -> Result<CompareReport, CliError> {
    let table = CsvTable::read(&args.scores)?;
    let subject_col = table.column("subject_id")?;
    let prompt_col = table.column("prompt_id")?;
    let group_col = table.column(&args.group_col)?;
    let value_col = table.column(args.measure.column())?;
    let wanted: BTreeSet<&str> = args.prompts.iter().map(String::as_str).collect();

    // subject -> (group, values across prompts)
    let mut subjects: BTreeMap<&str, (&str, Vec<f64>)> = BTreeMap::new();
    let mut seen_prompts = BTreeSet::new();
    let mut unlabeled = BTreeSet::new();
    for (i, row) in table.rows.iter().enumerate() {
        let prompt = row[prompt_col].as_str();
        seen_prompts.insert(prompt);
        if !wanted.is_empty() && !wanted.contains(prompt) {
            continue;
        }
        let subject = row[subject_col].as_str();
        let group = row[group_col].trim();
        if group.is_empty() {
            unlabeled.insert(subject);
            continue;
        }
        let raw = &row[value_col];
        let value: f64 = raw.trim().parse().map_err(|_| PipelineError::Parse {
            row: i + 1,
            message: format!("{} {raw:?} is not a number", args.measure.column()),
        })?;
        let entry = subjects.entry(subject).or_insert((group, Vec::new()));
        if entry.0 != group {
            return Err(DataError::GroupConflict {
                subject_id: subject.to_string(),
                first: entry.0.min(group).to_string(),
                second: entry.0.max(group).to_string(),
            }
            .into());
        }
        entry.1.push(value);
    }
    if let Some(missing) = wanted.iter().find(|p| !seen_prompts.contains(*p)) {
        return Err(CliError::Invalid(format!(
            "prompt {missing:?} not found in {}",
            args.scores.display()
        )));
    }
    if !unlabeled.is_empty() {
        log::warn!(
            "{} subjects without a group label were left out",
            unlabeled.len()
        );
    }

    let mut by_group: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (subject, (group, values)) in &subjects {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        by_group.entry(group).or_default().push((subject, mean));
    }
    let labels: Vec<String> = by_group.keys().map(|g| g.to_string()).collect();
    if labels.len() != 2 {
        return Err(CliError::GroupCount(labels));
    }

    let (mut first, mut second) = (labels[0].clone(), labels[1].clone());
    let mut alternative = Alternative::TwoSided;
    if let Some(g) = &args.expect_greater {
        if !labels.contains(g) {
            return Err(CliError::Invalid(format!(
                "--expect-greater {g:?} is not one of the groups {labels:?}"
            )));
        }
        if *g != first {
            std::mem::swap(&mut first, &mut second);
        }
    }
    match (args.tails, &args.expect_greater) {
        (TailsArg::One, Some(_)) => alternative = Alternative::Greater,
        (TailsArg::One, None) => {
            log::warn!("one-tailed test requested without --expect-greater; reporting two-tailed p")
        }
        (TailsArg::Two, _) => {}
    }

    let values = |label: &str| -> Vec<f64> { by_group[label].iter().map(|(_, v)| *v).collect() };
    let (g1, g2) = (values(&first), values(&second));
    let opts = TTestOptions {
        alternative,
        welch: args.welch,
        d_ci: match args.d_ci {
            DCiArg::Normal => DCiMethod::Normal,
            DCiArg::NoncentralT => DCiMethod::NoncentralT,
        },
    };
    let comparison =
        t_test_pooled(&g1, &g2, opts).map_err(stats_err(format!("{first} vs {second}")))?;

    if let Some(path) = &args.long_csv {
        write_long_csv(path, args.measure, &by_group)?;
    }

    Ok(CompareReport {
        measure: args.measure,
        group_col: args.group_col.clone(),
        groups: vec![
            GroupSummary::new(&first, &g1),
            GroupSummary::new(&second, &g2),
        ],
        group1: first,
        group2: second,
        prompts: wanted.iter().map(|p| p.to_string()).collect(),
        comparison,
        long_csv: args.long_csv.clone(),
    })
}

fn write_long_csv(
    path: &Path,
    measure: Measure,
    by_group: &BTreeMap<&str, Vec<(&str, f64)>>,
) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    let measure = match measure {
        Measure::Originality => "originality",
        Measure::Flexibility => "flexibility",
    };
    let csv_err = |e: csv::Error| CliError::Internal(format!("{}: {e}", path.display()));
    w.write_record(["subject_id", "group", "measure", "value"])
        .map_err(csv_err)?;
    for (group, rows) in by_group {
        for (subject, v) in rows {
            w.write_record([*subject, *group, measure, &format_sig9(*v)])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

// ---------------------------------------------------------------- power

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub request: PowerRequest,
    #[serde(flatten)]
    pub result: PowerResult,
}

impl PowerReport {
    fn text(&self) -> String {
        format!(
            "n per group = {} (power {:.4} at d = {}, alpha = {}, {:?}-tailed)\n",
            self.result.n_per_group,
            self.result.achieved_power,
            self.request.d,
            self.request.alpha,
            self.request.tails
        )
    }
}

pub fn run_power(args: &PowerArgs) -> Result<PowerReport, CliError> {
    let request = PowerRequest {
        d: args.d,
        alpha: args.alpha,
        power: args.power,
        tails: args.tails.into(),
    };
    let result = min_n_per_group(&request).map_err(stats_err("power analysis"))?;
    Ok(PowerReport { request, result })
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mbrn",
    version,
    about = "MBR distillation pipeline: sample candidate pools from a teacher, \
             score them with pairwise utilities, select knowledge-distillation \
             targets, and build weighted training files."
)]
pub struct Cli {
    /// TOML config file with [teacher] and [metric] sections.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample candidate pools (or deterministic baseline outputs) from the
    /// generation service.
    Sample(SampleArgs),
    /// Compute expected-utility rankings for candidate pools.
    Score(ScoreArgs),
    /// Pick training targets from scored pools.
    Select(SelectArgs),
    /// Emit a KD training file from selections, parallel data, or
    /// deterministic outputs.
    Build(BuildArgs),
    /// Draw nested source subsets for data-efficiency runs.
    Subsample(SubsampleArgs),
    /// Self-similarity (diversity) report over candidate pools.
    Diversity(DiversityArgs),
    /// Corpus scores and selection-quality comparisons.
    Evaluate(EvaluateArgs),
    /// Write a staged-training manifest.
    StagePlan(StagePlanArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TeacherFlags {
    /// Generation service base URL (or [teacher].url, or MBRN_TEACHER_URL).
    #[arg(long, value_name = "URL")]
    pub teacher_url: Option<String>,
    /// Label recorded as the pools' teacher id.
    #[arg(long, value_name = "ID")]
    pub teacher_id: Option<String>,
    /// Candidates to request per source.
    #[arg(long, value_name = "K")]
    pub num_candidates: Option<usize>,
    /// Epsilon-sampling threshold transmitted to the service.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Generation length limit transmitted to the service.
    #[arg(long, value_name = "N")]
    pub max_tokens: Option<u32>,
    /// Sampling seed transmitted to the service and recorded in the pools.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent generation requests.
    #[arg(long, value_name = "N")]
    pub max_in_flight: Option<usize>,
    /// Per-request timeout in milliseconds.
    #[arg(long, value_name = "MS")]
    pub timeout_ms: Option<u64>,
    /// Retries per request after transport failures.
    #[arg(long, value_name = "N")]
    pub retries: Option<u32>,
}

#[derive(Debug, Args, Clone)]
pub struct MetricFlags {
    /// Metric service base URL (or [metric].url, or MBRN_METRIC_URL).
    #[arg(long, value_name = "URL")]
    pub metric_url: Option<String>,
    /// Name the remote metric is recorded under.
    #[arg(long, value_name = "NAME")]
    pub metric_name: Option<String>,
    /// Pairs per scoring request.
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Concurrent scoring requests.
    #[arg(long, value_name = "N")]
    pub max_in_flight: Option<usize>,
    /// Per-request timeout in milliseconds.
    #[arg(long, value_name = "MS")]
    pub timeout_ms: Option<u64>,
    /// Retries per request after transport failures.
    #[arg(long, value_name = "N")]
    pub retries: Option<u32>,
    /// Bearer token for the metric service (or MBRN_METRIC_TOKEN).
    #[arg(long, value_name = "TOKEN")]
    pub token: Option<String>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Source corpus, JSONL with id/text/source_lang/target_lang.
    #[arg(long, value_name = "FILE")]
    pub sources: PathBuf,
    /// Output path: pool JSONL, or baseline-output JSONL with --greedy.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Request the deterministic single output instead of a sampled pool.
    #[arg(long)]
    pub greedy: bool,
    #[command(flatten)]
    pub teacher: TeacherFlags,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Candidate pools, JSONL.
    #[arg(long, value_name = "FILE")]
    pub pools: PathBuf,
    /// Output path for expected-utility records, JSONL.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// chrf | sbleu | exact_match | remote, or a full metric id string.
    #[arg(long, default_value = "chrf")]
    pub metric: String,
    /// Threads for in-process pairwise scoring.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub workers: usize,
    /// Drop the hypothesis-equals-reference term from each expected utility.
    #[arg(long)]
    pub exclude_self: bool,
    /// Share scored pairs across pools through an in-memory cache.
    #[arg(long)]
    pub cache: bool,
    /// Also dump each pool's utility matrix into this directory.
    #[arg(long, value_name = "DIR")]
    pub matrix_dir: Option<PathBuf>,
    #[command(flatten)]
    pub remote: MetricFlags,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Candidate pools, JSONL.
    #[arg(long, value_name = "FILE")]
    pub pools: PathBuf,
    /// Expected-utility records from `score`; required for MBR strategies.
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    /// Output path for selection records, JSONL.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// mbr_top_n | mbr_temperature | random.
    #[arg(long)]
    pub strategy: String,
    /// Targets to select per source.
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Softmax temperature for mbr_temperature.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Base seed for the randomized strategies; the per-source seed derived
    /// from it is recorded in each output record.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep duplicate candidate texts selectable (top-n only).
    #[arg(long)]
    pub no_dedup: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Output path for the KD training file, JSONL.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Selection records from `select`; requires --pools.
    #[arg(long, value_name = "FILE")]
    pub selections: Option<PathBuf>,
    /// Candidate pools the selections refer to.
    #[arg(long, value_name = "FILE")]
    pub pools: Option<PathBuf>,
    /// Emit one unweighted line per selected target instead of weights.
    #[arg(long)]
    pub flatten: bool,
    /// Reference baseline: aligned source text file.
    #[arg(long, value_name = "FILE")]
    pub reference_source: Option<PathBuf>,
    /// Reference baseline: aligned target text file.
    #[arg(long, value_name = "FILE")]
    pub reference_target: Option<PathBuf>,
    /// Reference baseline from a single two-column TSV.
    #[arg(long, value_name = "FILE")]
    pub reference_tsv: Option<PathBuf>,
    /// Provenance label for reference rows.
    #[arg(long, default_value = "reference", value_name = "ID")]
    pub teacher_id: String,
    /// Beam/greedy baseline outputs from `sample --greedy`.
    #[arg(long, value_name = "FILE")]
    pub beam: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    /// Source corpus, JSONL.
    #[arg(long, value_name = "FILE")]
    pub sources: PathBuf,
    /// Ascending subset sizes, e.g. 1000,5000,30000.
    #[arg(long, value_delimiter = ',', required = true, value_name = "N,..")]
    pub sizes: Vec<usize>,
    /// Permutation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving sources_<size>.jsonl (and pools_<size>.jsonl).
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
    /// Candidate pools to co-filter alongside the sources.
    #[arg(long, value_name = "FILE")]
    pub pools: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiversityArgs {
    /// Candidate pools, JSONL.
    #[arg(long, value_name = "FILE")]
    pub pools: PathBuf,
    /// Use only the first N candidates of each pool.
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus mode: hypothesis file, one sentence per line.
    #[arg(long, value_name = "FILE")]
    pub hypotheses: Option<PathBuf>,
    /// Corpus mode: aligned reference file.
    #[arg(long, value_name = "FILE")]
    pub references: Option<PathBuf>,
    /// chrf | sbleu | exact_match | remote, or a full metric id string.
    #[arg(long, default_value = "chrf")]
    pub metric: String,
    /// Quality mode: expected-utility records from `score`.
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    /// Quality mode: selection files to compare; repeatable.
    #[arg(long, value_name = "FILE")]
    pub selections: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Upsert the corpus-mode mean into a label,size,score CSV.
    #[arg(long, value_name = "FILE", requires = "csv_label", requires = "csv_size")]
    pub csv: Option<PathBuf>,
    /// Curve label for the CSV row.
    #[arg(long, value_name = "LABEL")]
    pub csv_label: Option<String>,
    /// Training-set size for the CSV row.
    #[arg(long, value_name = "N")]
    pub csv_size: Option<u64>,
    #[command(flatten)]
    pub remote: MetricFlags,
}

#[derive(Debug, Args)]
pub struct StagePlanArgs {
    /// Output path for the manifest, JSON.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Stage as dataset=teacher_id[=note]; repeat in curriculum order.
    #[arg(long = "stage", value_name = "SPEC", required = true)]
    pub stages: Vec<String>,
}

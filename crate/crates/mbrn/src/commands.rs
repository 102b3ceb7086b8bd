//! Implementations behind the CLI subcommands. Thin argument handling and
//! file plumbing; the actual work lives in the library modules.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;

use mbrn_core::kd::{stage_plan, subsample_sources, StageSpec};
use mbrn_core::mbr::{
    expected_utilities_with, select_random, select_temperature, select_top_n,
    ExpectedUtilityOptions,
};
use mbrn_core::types::{CandidatePool, MbrResult, Selection, SelectionStrategy};
use mbrn_core::{MetricId, NativeMetric};

use crate::cache::PairCache;
use crate::cli::{
    BuildArgs, DiversityArgs, EvaluateArgs, MetricFlags, SampleArgs, ScoreArgs, SelectArgs,
    StagePlanArgs, SubsampleArgs, TeacherFlags,
};
use crate::config::{self, FileConfig, MetricOverrides, TeacherOverrides};
use crate::dataset;
use crate::eval;
use crate::formats::{
    self, BeamRecord, KdRecord, MbrRecord, SelectionRecord, StagePlanFile,
};
use crate::matrix::{utility_matrices, write_matrix};
use crate::remote::RemoteMetric;
use crate::scorer::{NativeScorer, PairScorer};
use crate::teacher::{ingest_pools, TeacherClient};

fn fnv1a64(text: &str) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Per-source seed for randomized selection: reproducible from the base seed
/// yet uncorrelated across sources.
fn derive_seed(base: u64, source_id: &str) -> u64 {
    base ^ fnv1a64(source_id)
}

impl From<&TeacherFlags> for TeacherOverrides {
    fn from(flags: &TeacherFlags) -> Self {
        TeacherOverrides {
            url: flags.teacher_url.clone(),
            id: flags.teacher_id.clone(),
            num_candidates: flags.num_candidates,
            epsilon: flags.epsilon,
            max_tokens: flags.max_tokens,
            seed: flags.seed,
            max_in_flight: flags.max_in_flight,
            timeout_ms: flags.timeout_ms,
            retries: flags.retries,
        }
    }
}

impl From<&MetricFlags> for MetricOverrides {
    fn from(flags: &MetricFlags) -> Self {
        MetricOverrides {
            url: flags.metric_url.clone(),
            name: flags.metric_name.clone(),
            batch_size: flags.batch_size,
            max_in_flight: flags.max_in_flight,
            timeout_ms: flags.timeout_ms,
            retries: flags.retries,
            token: flags.token.clone(),
        }
    }
}

/// Accepts the shorthand names and full metric id strings.
fn parse_metric_id(name: &str) -> anyhow::Result<MetricId> {
    let id = match name {
        "chrf" => MetricId::Chrf(Default::default()),
        "sbleu" => MetricId::SentenceBleu(Default::default()),
        "exact_match" => MetricId::ExactMatch,
        other => MetricId::from_str(other)
            .map_err(|e| anyhow::anyhow!("{e}; expected chrf, sbleu, exact_match, remote, or a full metric id"))?,
    };
    Ok(id)
}

fn build_scorer(
    metric: &str,
    remote_flags: &MetricFlags,
    file: &FileConfig,
) -> anyhow::Result<Box<dyn PairScorer>> {
    if metric == "remote" || metric.starts_with("remote(") {
        let mut overrides = MetricOverrides::from(remote_flags);
        if let Some(name) = metric.strip_prefix("remote(").and_then(|r| r.strip_suffix(')')) {
            if overrides.name.is_none() {
                overrides.name = Some(name.to_string());
            }
        }
        let config = config::resolve_metric(&overrides, file)?;
        return Ok(Box::new(RemoteMetric::new(config)?));
    }
    let id = parse_metric_id(metric)?;
    let native = NativeMetric::from_id(&id)
        .ok_or_else(|| anyhow::anyhow!("`{metric}` needs the remote scorer; pass --metric remote"))?;
    Ok(Box::new(NativeScorer::new(native)))
}

// ---------------------------------------------------------------------------

pub fn sample(args: &SampleArgs, file: &FileConfig) -> anyhow::Result<()> {
    let segments = formats::read_sources(&args.sources)?;
    if segments.is_empty() {
        anyhow::bail!("{}: no sources", args.sources.display());
    }
    let config = config::resolve_teacher(&TeacherOverrides::from(&args.teacher), file)?;
    let client = TeacherClient::new(config)?;

    if args.greedy {
        let mut records = Vec::with_capacity(segments.len());
        for segment in &segments {
            let output = client.greedy_decode(segment)?;
            records.push(BeamRecord {
                source_id: segment.id.clone(),
                source_text: segment.text.clone(),
                source_lang: segment.pair.source_lang.clone(),
                target_lang: segment.pair.target_lang.clone(),
                teacher_id: client.config().teacher_id.clone(),
                target_text: output.candidate.text,
                mode: output.mode,
            });
        }
        formats::write_jsonl(&args.output, &records)?;
        log::info!(
            "wrote {} deterministic output(s) to {}",
            records.len(),
            args.output.display()
        );
    } else {
        let pools = client.sample_pools(&segments)?;
        formats::write_pools(&args.output, &pools)?;
        log::info!(
            "wrote {} pool(s) of {} to {}",
            pools.len(),
            client.config().num_candidates,
            args.output.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn matrix_dump_path(dir: &Path, source_id: &str) -> PathBuf {
    let safe: String = source_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    dir.join(format!("{safe}.mat"))
}

pub fn score(args: &ScoreArgs, file: &FileConfig) -> anyhow::Result<()> {
    if args.workers == 0 {
        anyhow::bail!("--workers must be at least 1");
    }
    let pools = ingest_pools(&args.pools)?;
    if pools.is_empty() {
        anyhow::bail!("{}: no pools", args.pools.display());
    }
    let scorer = build_scorer(&args.metric, &args.remote, file)?;
    let cache = args.cache.then(|| PairCache::new(&scorer.metric_id().canonical()));

    let matrices = utility_matrices(&pools, scorer.as_ref(), cache.as_ref(), args.workers)?;

    if let Some(dir) = &args.matrix_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        for (pool, matrix) in pools.iter().zip(&matrices) {
            let path = matrix_dump_path(dir, &pool.source().id);
            write_matrix(&path, matrix).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let options = ExpectedUtilityOptions {
        exclude_self: args.exclude_self,
    };
    let records: Vec<MbrRecord> = pools
        .iter()
        .zip(&matrices)
        .map(|(pool, matrix)| {
            let result = expected_utilities_with(matrix, options);
            MbrRecord {
                source_id: pool.source().id.clone(),
                metric_id: matrix.metric_id().to_string(),
                expected_utility: result.expected_utility,
                ranking: result.ranking,
            }
        })
        .collect();
    formats::write_jsonl(&args.output, &records)?;
    log::info!(
        "scored {} pool(s) with {} into {}",
        records.len(),
        scorer.metric_id().canonical(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn select(args: &SelectArgs, _file: &FileConfig) -> anyhow::Result<()> {
    if args.n == 0 {
        anyhow::bail!("--n must be at least 1");
    }
    let strategy = SelectionStrategy::parse(&args.strategy)
        .ok_or_else(|| anyhow::anyhow!("unknown strategy `{}`", args.strategy))?;
    let pools = ingest_pools(&args.pools)?;

    let scores: Option<BTreeMap<String, MbrRecord>> = match &args.scores {
        Some(path) => {
            let records: Vec<MbrRecord> = formats::read_jsonl(path)?;
            Some(
                records
                    .into_iter()
                    .map(|r| (r.source_id.clone(), r))
                    .collect(),
            )
        }
        None => None,
    };

    let scored_result = |pool: &CandidatePool| -> anyhow::Result<(MbrResult, String)> {
        let source_id = &pool.source().id;
        let table = scores
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--strategy {} needs --scores", args.strategy))?;
        let record = table
            .get(source_id)
            .ok_or_else(|| anyhow::anyhow!("no scores for source `{source_id}`"))?;
        if record.expected_utility.len() != pool.len() {
            anyhow::bail!(
                "source `{source_id}`: {} scores for a pool of {}",
                record.expected_utility.len(),
                pool.len()
            );
        }
        let mut check: Vec<usize> = record.ranking.clone();
        check.sort_unstable();
        if !check.iter().copied().eq(0..pool.len()) {
            anyhow::bail!("source `{source_id}`: ranking is not a permutation of the pool");
        }
        Ok((
            MbrResult {
                expected_utility: record.expected_utility.clone(),
                ranking: record.ranking.clone(),
            },
            record.metric_id.clone(),
        ))
    };

    let dedup = !args.no_dedup;
    let mut out = Vec::with_capacity(pools.len());
    for pool in &pools {
        let source_id = pool.source().id.clone();
        let (selection, metric_id) = match strategy {
            SelectionStrategy::MbrTopN => {
                let (result, metric_id) = scored_result(pool)?;
                (select_top_n(&result, pool, args.n, dedup), Some(metric_id))
            }
            SelectionStrategy::MbrTemperature => {
                let temperature = args
                    .temperature
                    .ok_or_else(|| anyhow::anyhow!("mbr_temperature needs --temperature"))?;
                let seed = args
                    .seed
                    .ok_or_else(|| anyhow::anyhow!("mbr_temperature needs --seed"))?;
                let (result, metric_id) = scored_result(pool)?;
                let selection =
                    select_temperature(&result, pool, args.n, temperature, derive_seed(seed, &source_id))?;
                (selection, Some(metric_id))
            }
            SelectionStrategy::Random => {
                let seed = args
                    .seed
                    .ok_or_else(|| anyhow::anyhow!("random needs --seed"))?;
                (select_random(pool, args.n, derive_seed(seed, &source_id)), None)
            }
            SelectionStrategy::Beam | SelectionStrategy::Reference => {
                anyhow::bail!("`{}` datasets come from `build`, not `select`", args.strategy)
            }
        };
        out.push(SelectionRecord::new(
            &source_id,
            &selection,
            dedup,
            metric_id.as_deref(),
        ));
    }
    formats::write_jsonl(&args.output, &out)?;
    log::info!(
        "selected {} per source for {} source(s) into {}",
        args.n,
        out.len(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn build(args: &BuildArgs, _file: &FileConfig) -> anyhow::Result<()> {
    let modes = [
        args.selections.is_some(),
        args.reference_source.is_some() || args.reference_target.is_some(),
        args.reference_tsv.is_some(),
        args.beam.is_some(),
    ];
    if modes.iter().filter(|m| **m).count() != 1 {
        anyhow::bail!(
            "pick exactly one input: --selections, --reference-source/--reference-target, --reference-tsv, or --beam"
        );
    }

    let records: Vec<KdRecord> = if let Some(selections_path) = &args.selections {
        let pools_path = args
            .pools
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--selections needs --pools"))?;
        let pools = ingest_pools(pools_path)?;
        let selections: Vec<SelectionRecord> = formats::read_jsonl(selections_path)?;
        let build = dataset::build_from_selections(&pools, &selections, args.flatten)?;
        if !build.skipped.is_empty() {
            log::warn!("skipped {} source(s)", build.skipped.len());
        }
        build.records
    } else if let Some(tsv) = &args.reference_tsv {
        dataset::build_reference_tsv(tsv, &args.teacher_id)?
    } else if let Some(beam_path) = &args.beam {
        let outputs: Vec<BeamRecord> = formats::read_jsonl(beam_path)?;
        dataset::build_beam(&outputs)?
    } else {
        let source = args
            .reference_source
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--reference-target needs --reference-source"))?;
        let target = args
            .reference_target
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--reference-source needs --reference-target"))?;
        dataset::build_reference(source, target, &args.teacher_id)?
    };

    formats::write_jsonl(&args.output, &records)?;
    log::info!(
        "wrote {} training example(s) to {}",
        records.len(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn subsample(args: &SubsampleArgs, _file: &FileConfig) -> anyhow::Result<()> {
    let segments = formats::read_sources(&args.sources)?;
    let subsets = subsample_sources(&segments, &args.sizes, args.seed)?;
    std::fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("creating {}", args.output_dir.display()))?;

    let pools = match &args.pools {
        Some(path) => Some(ingest_pools(path)?),
        None => None,
    };

    for (size, subset) in args.sizes.iter().zip(&subsets) {
        let path = args.output_dir.join(format!("sources_{size}.jsonl"));
        formats::write_sources(&path, subset)?;
        if let Some(pools) = &pools {
            let by_source: BTreeMap<&str, &CandidatePool> = pools
                .iter()
                .map(|p| (p.source().id.as_str(), p))
                .collect();
            let mut kept = Vec::new();
            for segment in subset {
                match by_source.get(segment.id.as_str()) {
                    Some(pool) => kept.push((*pool).clone()),
                    None => log::warn!("no pool for subsampled source `{}`", segment.id),
                }
            }
            let pool_path = args.output_dir.join(format!("pools_{size}.jsonl"));
            formats::write_pools(&pool_path, &kept)?;
        }
    }
    log::info!(
        "wrote {} nested subset(s) under {}",
        subsets.len(),
        args.output_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn diversity(args: &DiversityArgs, _file: &FileConfig) -> anyhow::Result<()> {
    let pools = ingest_pools(&args.pools)?;
    let samples: Vec<(String, Vec<String>)> = pools
        .iter()
        .map(|pool| {
            let mut texts: Vec<String> = pool.texts().map(String::from).collect();
            if let Some(limit) = args.limit {
                texts.truncate(limit);
            }
            (pool.source().id.clone(), texts)
        })
        .collect();
    let report = eval::diversity_report(&samples)?;
    print!("{}", report.table());
    if let Some(path) = &args.output {
        formats::write_json_pretty(path, &report)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn read_text_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let content = std::fs::read_to_string(path)
        .with_context(|| path.display().to_string())?;
    Ok(content.lines().map(String::from).collect())
}

pub fn evaluate(args: &EvaluateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let corpus_mode = args.hypotheses.is_some() || args.references.is_some();
    let quality_mode = args.scores.is_some() || !args.selections.is_empty();
    if corpus_mode == quality_mode {
        anyhow::bail!(
            "pick one mode: --hypotheses/--references for corpus scores, --scores/--selections for selection quality"
        );
    }

    if corpus_mode {
        let hyp_path = args
            .hypotheses
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("corpus mode needs --hypotheses"))?;
        let ref_path = args
            .references
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("corpus mode needs --references"))?;
        let hypotheses = read_text_lines(hyp_path)?;
        let references = read_text_lines(ref_path)?;
        let hyp_refs: Vec<&str> = hypotheses.iter().map(String::as_str).collect();
        let ref_refs: Vec<&str> = references.iter().map(String::as_str).collect();
        let scorer = build_scorer(&args.metric, &args.remote, file)?;
        let report = eval::corpus_score(&hyp_refs, &ref_refs, scorer.as_ref())?;
        print!("{}", report.table());
        if let Some(path) = &args.output {
            formats::write_json_pretty(path, &report)?;
        }
        if let Some(csv) = &args.csv {
            let label = args.csv_label.as_deref().unwrap();
            let size = args.csv_size.unwrap();
            eval::upsert_efficiency_row(csv, label, size, report.mean)?;
        }
        return Ok(());
    }

    if args.csv.is_some() {
        anyhow::bail!("--csv applies to corpus mode only");
    }
    let scores_path = args
        .scores
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("quality mode needs --scores"))?;
    if args.selections.is_empty() {
        anyhow::bail!("quality mode needs at least one --selections file");
    }
    let score_records: Vec<MbrRecord> = formats::read_jsonl(scores_path)?;
    let expected: BTreeMap<String, Vec<f64>> = score_records
        .into_iter()
        .map(|r| (r.source_id, r.expected_utility))
        .collect();

    let mut groups: Vec<(String, Vec<(String, Selection)>)> = Vec::new();
    for path in &args.selections {
        let records: Vec<SelectionRecord> = formats::read_jsonl(path)?;
        let mut label = records
            .first()
            .map(|r| r.strategy.clone())
            .unwrap_or_else(|| "empty".to_string());
        if groups.iter().any(|(l, _)| *l == label) {
            label = format!(
                "{label} ({})",
                path.file_stem().map_or_else(
                    || path.display().to_string(),
                    |s| s.to_string_lossy().into_owned()
                )
            );
        }
        let mut selections = Vec::with_capacity(records.len());
        for record in records {
            let pair = record
                .into_selection()
                .map_err(|m| anyhow::anyhow!("{}: {m}", path.display()))?;
            selections.push(pair);
        }
        groups.push((label, selections));
    }
    let report = eval::selection_quality(&expected, &groups)?;
    print!("{}", report.table());
    if let Some(path) = &args.output {
        formats::write_json_pretty(path, &report)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn stage_plan_cmd(args: &StagePlanArgs, _file: &FileConfig) -> anyhow::Result<()> {
    let mut specs = Vec::with_capacity(args.stages.len());
    for stage in &args.stages {
        let mut parts = stage.splitn(3, '=');
        let dataset_path = parts.next().unwrap_or_default();
        let teacher_id = parts
            .next()
            .ok_or_else(|| anyhow::anyhow!("stage `{stage}` is not dataset=teacher_id[=note]"))?;
        let note = parts.next().unwrap_or_default();
        specs.push(StageSpec {
            dataset_path: dataset_path.to_string(),
            teacher_id: teacher_id.to_string(),
            note: note.to_string(),
        });
    }
    let plan = stage_plan(&specs)?;
    formats::write_json_pretty(&args.output, &StagePlanFile::from(&plan))?;
    log::info!(
        "wrote {}-stage plan to {}",
        plan.stages.len(),
        args.output.display()
    );
    Ok(())
}

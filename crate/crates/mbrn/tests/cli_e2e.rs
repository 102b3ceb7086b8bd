use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::Ordering;

use mbrn::formats::{KdRecord, MbrRecord, SelectionRecord};
use mbrn::stub::StubServer;

fn mbrn() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mbrn"));
    cmd.env_remove("MBRN_TEACHER_URL")
        .env_remove("MBRN_METRIC_URL")
        .env_remove("MBRN_METRIC_TOKEN");
    cmd
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no exit code")
}

fn write_sources(path: &Path, count: usize) {
    let sentences = [
        "the quick brown fox jumps over the lazy dog",
        "a small house stands near the river",
        "two cats sleep in the warm sun",
        "the train arrives at the old station",
        "she reads a long book every evening",
        "fresh bread smells good in the morning",
        "the children play football in the park",
        "a cold wind blows from the north",
    ];
    let lines: Vec<String> = (0..count)
        .map(|i| {
            format!(
                r#"{{"id":"src-{i:03}","text":"{}","source_lang":"English","target_lang":"German"}}"#,
                sentences[i % sentences.len()]
            )
        })
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

struct Pipeline {
    dir: tempfile::TempDir,
    server: StubServer,
    pools: PathBuf,
    scores: PathBuf,
}

/// sample + score once; several tests build on the same artifacts.
fn sampled_and_scored(sources: usize, candidates: usize) -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start().unwrap();
    let sources_path = dir.path().join("sources.jsonl");
    write_sources(&sources_path, sources);
    let pools = dir.path().join("pools.jsonl");
    let scores = dir.path().join("scores.jsonl");

    ok(&mbrn()
        .args(["sample", "--sources"])
        .arg(&sources_path)
        .arg("--output")
        .arg(&pools)
        .args([
            "--teacher-url",
            &server.url(),
            "--teacher-id",
            "t-xl",
            "--num-candidates",
            &candidates.to_string(),
            "--max-tokens",
            "32",
            "--seed",
            "5",
        ])
        .output()
        .unwrap());

    ok(&mbrn()
        .args(["score", "--pools"])
        .arg(&pools)
        .arg("--output")
        .arg(&scores)
        .args(["--metric", "chrf", "--workers", "2"])
        .output()
        .unwrap());

    Pipeline {
        dir,
        server,
        pools,
        scores,
    }
}

#[test]
fn pipeline_from_sampling_to_kd_file() {
    let p = sampled_and_scored(6, 12);
    let dir = p.dir.path();

    let score_records: Vec<MbrRecord> = read_jsonl(&p.scores);
    assert_eq!(score_records.len(), 6);
    for record in &score_records {
        assert_eq!(record.expected_utility.len(), 12);
        assert_eq!(record.metric_id, "chrf(o=6,beta=2)");
        let mut ranking = record.ranking.clone();
        ranking.sort_unstable();
        assert_eq!(ranking, (0..12).collect::<Vec<_>>());
    }

    let selections = dir.join("top.jsonl");
    ok(&mbrn()
        .args(["select", "--pools"])
        .arg(&p.pools)
        .arg("--scores")
        .arg(&p.scores)
        .arg("--output")
        .arg(&selections)
        .args(["--strategy", "mbr_top_n", "--n", "3"])
        .output()
        .unwrap());
    let selection_records: Vec<SelectionRecord> = read_jsonl(&selections);
    assert_eq!(selection_records.len(), 6);
    for record in &selection_records {
        assert!(record.indices.len() <= 3 && !record.indices.is_empty());
        assert!(record.dedup);
        assert_eq!(record.metric_id.as_deref(), Some("chrf(o=6,beta=2)"));
        let scores = record.scores.as_ref().unwrap();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    let kd = dir.join("kd.jsonl");
    ok(&mbrn()
        .args(["build", "--pools"])
        .arg(&p.pools)
        .arg("--selections")
        .arg(&selections)
        .arg("--output")
        .arg(&kd)
        .output()
        .unwrap());
    let kd_records: Vec<KdRecord> = read_jsonl(&kd);
    let mut weight_sums: BTreeMap<&str, f64> = BTreeMap::new();
    for record in &kd_records {
        record.validate().unwrap();
        assert_eq!(record.strategy, "mbr_top_n");
        assert_eq!(record.n, 3);
        *weight_sums.entry(record.source_id.as_str()).or_default() += record.weight;
    }
    assert_eq!(weight_sums.len(), 6);
    for (source, sum) in &weight_sums {
        assert!((sum - 1.0).abs() < 1e-12, "{source} sums to {sum}");
    }

    let flat = dir.join("kd_flat.jsonl");
    ok(&mbrn()
        .args(["build", "--flatten", "--pools"])
        .arg(&p.pools)
        .arg("--selections")
        .arg(&selections)
        .arg("--output")
        .arg(&flat)
        .output()
        .unwrap());
    let flat_records: Vec<KdRecord> = read_jsonl(&flat);
    assert_eq!(flat_records.len(), kd_records.len());
    assert!(flat_records.iter().all(|r| r.weight == 1.0));

    // No scratch files left next to the outputs.
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy();
        assert!(!name.starts_with(".tmp"), "leftover temp file {name}");
    }
}

#[test]
fn matrix_dump_and_cache_flags() {
    let p = sampled_and_scored(3, 8);
    let dir = p.dir.path();
    let rescored = dir.join("scores_cached.jsonl");
    let mats = dir.join("mats");
    ok(&mbrn()
        .args(["score", "--pools"])
        .arg(&p.pools)
        .arg("--output")
        .arg(&rescored)
        .arg("--matrix-dir")
        .arg(&mats)
        .args(["--metric", "chrf", "--workers", "1", "--cache"])
        .output()
        .unwrap());

    assert_eq!(
        std::fs::read_to_string(&p.scores).unwrap(),
        std::fs::read_to_string(&rescored).unwrap(),
        "cache or matrix dump changed the scores"
    );
    let mut dumps: Vec<String> = std::fs::read_dir(&mats)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    dumps.sort();
    assert_eq!(dumps, vec!["src-000.mat", "src-001.mat", "src-002.mat"]);
    let matrix = mbrn::matrix::read_matrix(&mats.join("src-000.mat")).unwrap();
    assert_eq!(matrix.k(), 8);
    assert_eq!(matrix.metric_id(), "chrf(o=6,beta=2)");
}

#[test]
fn random_selection_and_quality_report() {
    let p = sampled_and_scored(6, 12);
    let dir = p.dir.path();

    let top = dir.join("top.jsonl");
    ok(&mbrn()
        .args(["select", "--pools"])
        .arg(&p.pools)
        .arg("--scores")
        .arg(&p.scores)
        .arg("--output")
        .arg(&top)
        .args(["--strategy", "mbr_top_n", "--n", "3"])
        .output()
        .unwrap());

    let random = dir.join("random.jsonl");
    ok(&mbrn()
        .args(["select", "--pools"])
        .arg(&p.pools)
        .arg("--output")
        .arg(&random)
        .args(["--strategy", "random", "--n", "3", "--seed", "41"])
        .output()
        .unwrap());
    let random_records: Vec<SelectionRecord> = read_jsonl(&random);
    assert!(random_records.iter().all(|r| r.rng_seed.is_some()));
    // Per-source seeds differ so picks decorrelate across sources.
    let seeds: std::collections::BTreeSet<u64> =
        random_records.iter().filter_map(|r| r.rng_seed).collect();
    assert!(seeds.len() > 1);

    let report_path = dir.join("quality.json");
    let output = mbrn()
        .args(["evaluate", "--scores"])
        .arg(&p.scores)
        .arg("--selections")
        .arg(&top)
        .arg("--selections")
        .arg(&random)
        .arg("--output")
        .arg(&report_path)
        .output()
        .unwrap();
    ok(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("mbr_top_n"), "table missing: {stdout}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let strategies = report["strategies"].as_array().unwrap();
    assert_eq!(strategies.len(), 2);
    let difference = report["differences"][0]["difference"].as_f64().unwrap();
    // Top-n picks the utility-maximal distinct candidates, so it can never
    // trail a random distinct pick.
    assert!(difference >= 0.0, "top-n lost to random: {difference}");
}

#[test]
fn temperature_selection_records_its_parameters() {
    let p = sampled_and_scored(3, 8);
    let out = p.dir.path().join("temp.jsonl");
    ok(&mbrn()
        .args(["select", "--pools"])
        .arg(&p.pools)
        .arg("--scores")
        .arg(&p.scores)
        .arg("--output")
        .arg(&out)
        .args([
            "--strategy",
            "mbr_temperature",
            "--n",
            "2",
            "--temperature",
            "0.7",
            "--seed",
            "13",
        ])
        .output()
        .unwrap());
    let records: Vec<SelectionRecord> = read_jsonl(&out);
    assert_eq!(records.len(), 3);
    for record in &records {
        assert_eq!(record.temperature, Some(0.7));
        assert!(record.rng_seed.is_some());
        assert_eq!(record.strategy, "mbr_temperature");
    }
}

#[test]
fn greedy_outputs_become_a_beam_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start().unwrap();
    let sources = dir.path().join("sources.jsonl");
    write_sources(&sources, 4);

    let beam = dir.path().join("beam.jsonl");
    ok(&mbrn()
        .args(["sample", "--greedy", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&beam)
        .args(["--teacher-url", &server.url(), "--teacher-id", "t-xl", "--max-tokens", "32"])
        .output()
        .unwrap());
    let outputs: Vec<serde_json::Value> = read_jsonl(&beam);
    assert_eq!(outputs.len(), 4);
    assert!(outputs.iter().all(|o| o["mode"] == "greedy"));
    // The stub's deterministic mode echoes the source sentence.
    assert_eq!(outputs[0]["target_text"], outputs[0]["source_text"]);

    let kd = dir.path().join("kd_beam.jsonl");
    ok(&mbrn()
        .args(["build", "--beam"])
        .arg(&beam)
        .arg("--output")
        .arg(&kd)
        .output()
        .unwrap());
    let records: Vec<KdRecord> = read_jsonl(&kd);
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.strategy == "beam" && r.weight == 1.0));
}

#[test]
fn subsample_writes_nested_prefixes() {
    let p = sampled_and_scored(6, 4);
    let dir = p.dir.path();
    let subs = dir.join("subs");
    ok(&mbrn()
        .args(["subsample", "--sources"])
        .arg(dir.join("sources.jsonl"))
        .arg("--output-dir")
        .arg(&subs)
        .arg("--pools")
        .arg(&p.pools)
        .args(["--sizes", "2,5", "--seed", "3"])
        .output()
        .unwrap());

    let two = std::fs::read_to_string(subs.join("sources_2.jsonl")).unwrap();
    let five = std::fs::read_to_string(subs.join("sources_5.jsonl")).unwrap();
    assert!(five.starts_with(&two), "smaller subset is not a prefix");
    assert_eq!(two.lines().count(), 2);
    assert_eq!(five.lines().count(), 5);

    let pools_two: Vec<serde_json::Value> = read_jsonl(&subs.join("pools_2.jsonl"));
    let ids: Vec<String> = two
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    let pool_ids: Vec<String> = pools_two
        .iter()
        .map(|p| p["source_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(pool_ids, ids);
}

#[test]
fn diversity_command_reports_per_pool() {
    let p = sampled_and_scored(3, 8);
    let report_path = p.dir.path().join("div.json");
    let output = mbrn()
        .args(["diversity", "--pools"])
        .arg(&p.pools)
        .args(["--limit", "5"])
        .arg("--output")
        .arg(&report_path)
        .output()
        .unwrap();
    ok(&output);
    assert!(String::from_utf8_lossy(&output.stdout).contains("self_bleu"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["per_source"].as_array().unwrap().len(), 3);
    assert!(report["mean"].as_f64().unwrap().is_finite());
}

#[test]
fn corpus_evaluation_with_efficiency_csv() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("hyp.txt");
    let reference = dir.path().join("ref.txt");
    std::fs::write(&hyp, "das Haus ist blau\nein Hund läuft\n").unwrap();
    std::fs::write(&reference, "das Haus ist blau\nein Hund läuft\n").unwrap();

    let csv = dir.path().join("curve.csv");
    let output = mbrn()
        .args(["evaluate", "--hypotheses"])
        .arg(&hyp)
        .arg("--references")
        .arg(&reference)
        .arg("--csv")
        .arg(&csv)
        .args(["--metric", "chrf", "--csv-label", "mbr", "--csv-size", "30000"])
        .output()
        .unwrap();
    ok(&output);
    assert!(String::from_utf8_lossy(&output.stdout).contains("100.0000"));
    let csv_content = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_content, "label,size,score\nmbr,30000,100\n");
}

#[test]
fn stage_plan_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    ok(&mbrn()
        .args(["stage-plan", "--output"])
        .arg(&plan)
        .args(["--stage", "kd_weak.jsonl=t-xxs", "--stage", "kd_strong.jsonl=t-xl=final stage"])
        .output()
        .unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    let stages = manifest["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 2);
    assert_eq!(stages[0]["stage_index"], 1);
    assert_eq!(stages[0]["teacher_id"], "t-xxs");
    assert_eq!(stages[1]["stage_index"], 2);
    assert_eq!(stages[1]["note"], "final stage");
}

#[test]
fn config_file_and_env_fill_in_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start().unwrap();
    let sources = dir.path().join("sources.jsonl");
    write_sources(&sources, 2);

    // Config file provides url and id; no teacher flags on the command line.
    let config = dir.path().join("mbrn.toml");
    std::fs::write(
        &config,
        format!(
            "[teacher]\nurl = \"{}\"\nid = \"cfg-teacher\"\nnum_candidates = 4\nmax_tokens = 16\n",
            server.url()
        ),
    )
    .unwrap();
    let pools = dir.path().join("pools.jsonl");
    ok(&mbrn()
        .arg("--config")
        .arg(&config)
        .args(["sample", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&pools)
        .output()
        .unwrap());
    let records: Vec<serde_json::Value> = read_jsonl(&pools);
    assert_eq!(records[0]["teacher_id"], "cfg-teacher");
    assert_eq!(records[0]["candidates"].as_array().unwrap().len(), 4);

    // Flag beats a broken config url.
    let bad_config = dir.path().join("bad.toml");
    std::fs::write(
        &bad_config,
        "[teacher]\nurl = \"http://127.0.0.1:9\"\nid = \"cfg-teacher\"\nnum_candidates = 4\nmax_tokens = 16\n",
    )
    .unwrap();
    ok(&mbrn()
        .arg("--config")
        .arg(&bad_config)
        .args(["sample", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&pools)
        .args(["--teacher-url", &server.url()])
        .output()
        .unwrap());

    // Environment variable alone is enough for the url.
    ok(&mbrn()
        .env("MBRN_TEACHER_URL", server.url())
        .args(["sample", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&pools)
        .args(["--teacher-id", "env-teacher", "--num-candidates", "4", "--max-tokens", "16"])
        .output()
        .unwrap());
    let records: Vec<serde_json::Value> = read_jsonl(&pools);
    assert_eq!(records[0]["teacher_id"], "env-teacher");
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");

    let missing = mbrn()
        .args(["score", "--pools", "/nonexistent/pools.jsonl", "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&missing), 2);
    assert!(!out.exists());

    let sources = dir.path().join("sources.jsonl");
    write_sources(&sources, 1);
    let bad_strategy = mbrn()
        .args(["select", "--pools"])
        .arg(&sources) // wrong format too, but strategy fails first
        .arg("--output")
        .arg(&out)
        .args(["--strategy", "argmax", "--n", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&bad_strategy), 2);

    let usage = mbrn().args(["score", "--no-such-flag"]).output().unwrap();
    assert_eq!(code(&usage), 2);
}

#[test]
fn transport_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let sources = dir.path().join("sources.jsonl");
    write_sources(&sources, 1);
    let out = dir.path().join("pools.jsonl");
    let output = mbrn()
        .args(["sample", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&out)
        .args([
            "--teacher-url",
            "http://127.0.0.1:9",
            "--teacher-id",
            "t",
            "--num-candidates",
            "2",
            "--max-tokens",
            "8",
            "--retries",
            "0",
            "--timeout-ms",
            "2000",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&output), 3, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(!out.exists(), "failed run must not leave an output file");
}

#[test]
fn protocol_failures_exit_4() {
    let p = sampled_and_scored(2, 4);
    let out = p.dir.path().join("broken_scores.jsonl");

    p.server.state().truncate_scores.store(true, Ordering::SeqCst);
    let output = mbrn()
        .args(["score", "--pools"])
        .arg(&p.pools)
        .arg("--output")
        .arg(&out)
        .args(["--metric", "remote", "--metric-name", "broken"])
        .args(["--metric-url", &p.server.url()])
        .output()
        .unwrap();
    assert_eq!(code(&output), 4, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(!out.exists());

    // Shortfall from the generation side is a protocol error too.
    p.server.state().shortfall.store(1, Ordering::SeqCst);
    let sources = p.dir.path().join("sources.jsonl");
    let pools_out = p.dir.path().join("pools2.jsonl");
    let output = mbrn()
        .args(["sample", "--sources"])
        .arg(&sources)
        .arg("--output")
        .arg(&pools_out)
        .args([
            "--teacher-url",
            &p.server.url(),
            "--teacher-id",
            "t",
            "--num-candidates",
            "4",
            "--max-tokens",
            "8",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&output), 4);
}

#[test]
fn remote_scoring_matches_native_chrf_scaled() {
    let p = sampled_and_scored(2, 6);
    let remote_scores = p.dir.path().join("remote_scores.jsonl");
    ok(&mbrn()
        .args(["score", "--pools"])
        .arg(&p.pools)
        .arg("--output")
        .arg(&remote_scores)
        .args(["--metric", "remote", "--metric-name", "chrf-like", "--batch-size", "16"])
        .args(["--metric-url", &p.server.url()])
        .output()
        .unwrap());

    let native: Vec<MbrRecord> = read_jsonl(&p.scores);
    let remote: Vec<MbrRecord> = read_jsonl(&remote_scores);
    for (n, r) in native.iter().zip(&remote) {
        assert_eq!(r.metric_id, "remote(chrf-like)");
        assert_eq!(n.ranking, r.ranking, "rankings diverged for {}", n.source_id);
        for (a, b) in n.expected_utility.iter().zip(&r.expected_utility) {
            assert!((a / 100.0 - b).abs() < 1e-6);
        }
    }
}

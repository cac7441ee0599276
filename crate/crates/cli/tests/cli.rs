//! End-to-end coverage of the musrover binary: subcommands, exit codes,
//! artifact determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_musrover")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary must spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn demo_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.json");
    fs::write(
        &path,
        r#"{"pieces":[
 {"id":"a","voices":[[[72,1],[74,1],[76,1],[72,1]],[[67,2],[69,2]],[[64,2],[62,2]],[[48,1],[50,1],[47,1],[48,1]]]},
 {"id":"b","voices":[[[76,1],[74,1],[72,2]],[[69,2],[67,2]],[[62,2],[64,2]],[[47,2],[48,2]]]}
]}"#,
    )
    .unwrap();
    path
}

#[test]
fn ingest_reports_dimensions() {
    let dir = TempDir::new().unwrap();
    let corpus = demo_corpus(dir.path());
    let out = run(&["ingest", "--corpus", corpus.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("pieces: 2"));
    assert!(stdout.contains("columns: 8"));

    let quiet = run(&[
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--validate-only",
    ]);
    assert_eq!(code(&quiet), 0);
    assert!(quiet.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["ingest"]); // missing --corpus
    assert_eq!(code(&out), 1);

    let out = run(&["describe", "--feature", "order@3"]);
    assert_eq!(code(&out), 1);

    let out = run(&["no-such-command"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{").unwrap();
    let out = run(&["ingest", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let unequal = dir.path().join("unequal.json");
    fs::write(
        &unequal,
        r#"{"pieces":[{"id":"x","voices":[[[60,2]],[[55,2]],[[52,2]],[[48,3]]]}]}"#,
    )
    .unwrap();
    let out = run(&["ingest", "--corpus", unequal.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unequal voice durations"), "{stderr}");

    let out = run(&["ingest", "--corpus", "/nonexistent/corpus.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn describe_prints_readable_text() {
    let out = run(&["describe", "--feature", "pitch12@1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        "pitch class of the soprano"
    );
}

fn run_trace(corpus: &Path, out_dir: &Path) {
    let out = run(&[
        "trace",
        "--corpus",
        corpus.to_str().unwrap(),
        "--alpha",
        "1.0",
        "--epsilon",
        "0.005",
        "--max-iters",
        "4",
        "--objective",
        "tsallis2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn run_bigram(corpus: &Path, trace: &Path, out_dir: &Path) {
    let out = run(&[
        "bigram",
        "--corpus",
        corpus.to_str().unwrap(),
        "--from-trace",
        trace.to_str().unwrap(),
        "--alpha",
        "1.0",
        "--epsilon",
        "0.005",
        "--max-iters",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn trace_bigram_report_sample_roundtrip() {
    let dir = TempDir::new().unwrap();
    let corpus = demo_corpus(dir.path());
    let uni = dir.path().join("uni");
    run_trace(&corpus, &uni);

    for name in [
        "rulebook.json",
        "trace_1.0.json",
        "footprints_1.0.csv",
        "student_1.0.json",
        "report.txt",
    ] {
        assert!(uni.join(name).exists(), "missing {name}");
    }

    let bi = dir.path().join("bi");
    run_bigram(&corpus, &uni.join("trace_1.0.json"), &bi);
    let report = fs::read_to_string(bi.join("report.txt")).unwrap();
    assert!(report.contains("diff report"), "{report}");
    let book = fs::read_to_string(bi.join("rulebook.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&book).unwrap();
    assert_eq!(parsed["unigram"].as_array().unwrap().len(), 63);
    assert!(!parsed["bigram"].as_array().unwrap().is_empty());

    let out = run(&[
        "report",
        "--trace",
        uni.join("trace_1.0.json").to_str().unwrap(),
        "--epsilon",
        "0.005",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("efficiency E"));
    assert!(text.contains("memorability M"));

    // sampling is deterministic per seed and produces ingestible output
    let s1 = dir.path().join("s1.json");
    let s2 = dir.path().join("s2.json");
    for s in [&s1, &s2] {
        let out = run(&[
            "sample",
            "--model",
            uni.join("student_1.0.json").to_str().unwrap(),
            "--length",
            "12",
            "--seed",
            "9",
            "--out",
            s.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&s1).unwrap(), fs::read(&s2).unwrap());
    let out = run(&["ingest", "--corpus", s1.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn full_pipeline_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let corpus = demo_corpus(dir.path());

    let mut digests: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for round in 0..2 {
        let uni = dir.path().join(format!("uni{round}"));
        let bi = dir.path().join(format!("bi{round}"));
        run_trace(&corpus, &uni);
        run_bigram(&corpus, &uni.join("trace_1.0.json"), &bi);

        let mut files = Vec::new();
        for root in [&uni, &bi] {
            let mut names: Vec<_> = fs::read_dir(root)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            for path in names {
                files.push((
                    path.file_name().unwrap().to_string_lossy().to_string(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
        digests.push(files);
    }
    assert_eq!(digests[0].len(), digests[1].len());
    for (a, b) in digests[0].iter().zip(&digests[1]) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1, "bytes differ in {}", a.0);
    }
}

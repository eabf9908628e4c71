use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spikebench_core::metrics::{aggregate, evaluate_all, LabeledReport};
use spikebench_core::midi::{parse_midi, write_midi, Note, Score};
use spikebench_core::study::{EXPORT_HEADER, MODELS};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikebench")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn melody(offset: u8, n: usize) -> Score {
    let notes = (0..n)
        .flat_map(|i| {
            let t = i as f64 * 0.25;
            [Note::new(60 + offset + (i % 5) as u8 * 2, t, 0.25, 90), Note::new(48 + offset, t, 0.5, 70)]
        })
        .collect();
    Score::with_notes(notes, 120.0)
}

/// `<root>/<dataset>/<source>/k.mid` for two datasets and two sources.
fn corpus(root: &Path) -> Vec<(String, String, String, Score)> {
    let mut out = Vec::new();
    for (d, ds) in ["JSB", "POP909"].iter().enumerate() {
        for (k, src) in ["S-RNN", "Reference"].iter().enumerate() {
            for i in 0..2 {
                let score = melody((d * 3 + k + i) as u8, 24 + 8 * i);
                let rel = format!("{ds}/{src}/{i}.mid");
                let path = root.join(&rel);
                fs::create_dir_all(path.parent().unwrap()).unwrap();
                fs::write(&path, write_midi(&score)).unwrap();
                out.push((ds.to_string(), src.to_string(), rel, score));
            }
        }
    }
    out
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    let unknown = bin(&["ingest", ".", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("--bogus"));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["study", "simulate", "--participants", "1,2"]).status.code(), Some(2));
    let missing = bin(&["ingest", "/definitely/not/here"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Io"));
}

#[test]
fn ingest_reports_failures_by_name() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    assert_eq!(bin(&["ingest", s(dir.path())]).status.code(), Some(0));
    fs::write(dir.path().join("broken.mid"), b"MThd\x00\x00").unwrap();
    let out = bin(&["ingest", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().any(|l| l.starts_with("broken.mid,failed,")));
}

#[test]
fn eval_objective_three_files() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        fs::write(dir.path().join(format!("{i}.mid")), write_midi(&melody(i, 16))).unwrap();
    }
    fs::create_dir_all(dir.path().join("chords")).unwrap();
    fs::write(dir.path().join("chords/0.chords"), "0\t0\tmaj\n").unwrap();
    let out = dir.path().join("out/report.csv");
    let res = bin(&["eval-objective", s(dir.path()), "--chords", s(&dir.path().join("chords")), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("dataset,source,piece,pc,"));
}

#[test]
fn report_tables_read_back_equal_in_memory_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let pieces = corpus(dir.path());
    let reports: Vec<LabeledReport> = pieces
        .iter()
        .map(|(d, src, rel, score)| LabeledReport { dataset: d.clone(), source: src.clone(), piece: rel.clone(), report: evaluate_all(score) })
        .collect();
    let reread_dir = tempfile::tempdir().unwrap();
    let reread = spikebench_cli::write_report(&reports, reread_dir.path(), true, true, 4).unwrap();
    assert_eq!(reread, aggregate(&reports));

    // Overlapping same-pitch notes are truncated by the file format, so the
    // CLI is compared against the scores as read back from disk.
    let parsed_reports: Vec<LabeledReport> = pieces
        .iter()
        .map(|(d, src, rel, _)| {
            let score = parse_midi(&fs::read(dir.path().join(rel)).unwrap()).unwrap();
            LabeledReport { dataset: d.clone(), source: src.clone(), piece: rel.clone(), report: evaluate_all(&score) }
        })
        .collect();
    let expected = aggregate(&parsed_reports);
    let out = tempfile::tempdir().unwrap();

    let cli_out = out.path().join("cli");
    let res = bin(&["report", s(dir.path()), "--out", s(&cli_out), "--aggregate", "--heatmaps"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let texts: Vec<String> = ["pitch", "rhythm", "harmony"].iter().map(|t| fs::read_to_string(cli_out.join(format!("{t}.csv"))).unwrap()).collect();
    let parsed = spikebench_core::metrics::parse_aggregate_csv(&texts.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
    assert_eq!(parsed, expected);
    let pgm = fs::read_to_string(cli_out.join("nltm_JSB_S-RNN.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n128 128\n255\n"));
}

#[test]
fn tokenize_train_generate_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let work = tempfile::tempdir().unwrap();
    let w = |name: &str| work.path().join(name);
    let res = bin(&["tokenize", s(dir.path()), "--vocab", s(&w("vocab.txt")), "--out", s(&w("tok"))]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(w("tok/JSB/S-RNN/0.tok").is_file());
    for run in ["a", "b"] {
        let model = w(&format!("{run}.mspk"));
        let res = bin(&["train-toy", "--corpus", s(&w("tok")), "--epochs", "3", "--seed", "11", "--hidden", "8", "--out", s(&model)]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        let res = bin(&[
            "generate", "--model", s(&model), "--length", "40", "--seed", "5", "--vocab", s(&w("vocab.txt")),
            "--out", s(&w(&format!("{run}.mid"))), "--tokens", s(&w(&format!("{run}.tok"))),
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for ext in ["mspk", "mid", "tok"] {
        assert_eq!(fs::read(w(&format!("a.{ext}"))).unwrap(), fs::read(w(&format!("b.{ext}"))).unwrap(), "{ext} differs");
    }
    let bad = bin(&["generate", "--model", s(&w("vocab.txt")), "--length", "4", "--out", s(&w("x.mid"))]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Checkpoint"));
}

#[test]
fn simulate_full_cohort_meets_quotas() {
    let res = bin(&["study", "simulate", "--participants", "48,15,13"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["satisfied"], true);
    assert_eq!(v["finished"], true);
    assert_eq!(v["min_counts"], serde_json::json!([16, 4, 4]));
    assert_eq!(v["total_responses"], 19440);
}

#[test]
fn study_init_simulate_resume_export() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("study");
    let res = bin(&["study", "init", "--synthetic", "--out", s(&study), "--per-model", "1", "--per-dataset-human", "1", "--seed", "3"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(String::from_utf8(res.stdout).unwrap().trim().len(), 32);
    assert_eq!(fs::read_dir(study.join("audio")).unwrap().count(), 30);
    let export = bin(&["study", "export", "--study", s(&study)]);
    assert_eq!(String::from_utf8(export.stdout).unwrap(), format!("{EXPORT_HEADER}\n"));
    // The derived caps assume the full cohort; a small cohort cannot finish.
    let partial = bin(&["study", "simulate", "--study", s(&study), "--participants", "4,2,2", "--stop-after", "20"]);
    assert_eq!(partial.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&partial.stdout).unwrap();
    assert_eq!((v["accepted"].as_u64(), v["finished"].as_bool()), (Some(20), Some(false)));
    let rest = bin(&["study", "simulate", "--study", s(&study), "--participants", "4,2,2"]);
    let v: serde_json::Value = serde_json::from_slice(&rest.stdout).unwrap();
    assert!(v["total_responses"].as_u64().unwrap() > 20);
    let csv = String::from_utf8(bin(&["study", "export", "--study", s(&study)]).stdout).unwrap();
    let items: u64 = v["total_responses"].as_u64().unwrap();
    assert!(csv.lines().count() as u64 > items);
}

/// Export where Reference and S-Transformer differ by exactly −1.1313 on
/// the expert group's harmonic-progression item.
pub fn synthetic_export() -> String {
    let mut out = format!("{EXPORT_HEADER}\n");
    let n = 10_000;
    let mut row = |participant: usize, source: &str, value: u8| {
        let _ = writeln!(out, "e{:03},Expert,x,JSB,{source},Q8,{value},,0", participant % 13);
    };
    // Reference: 6000 fours and 4000 fives (mean 4.4).
    for i in 0..n {
        row(i, "Reference", if i < 6000 { 4 } else { 5 });
    }
    // S-Transformer: mean 4.4 − 1.1313 = 3.2687, i.e. sum 32687.
    for i in 0..n {
        row(i, "S-Transformer", if i < 7313 { 3 } else { 4 });
    }
    for (k, m) in MODELS.iter().enumerate().skip(1) {
        for i in 0..n {
            row(i, m, [2, 3, 4, 3, 2][(i + k) % 5]);
        }
    }
    out
}

#[test]
fn analyze_reproduces_known_gap() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export.csv");
    fs::write(&export, synthetic_export()).unwrap();
    let out = dir.path().join("analysis");
    let res = bin(&["analyze", "--responses", s(&export), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let tukey = fs::read_to_string(out.join("tukey_expert.csv")).unwrap();
    let row = tukey.lines().find(|l| l.starts_with("S-Transformer,Q8,")).expect("row present");
    let cols: Vec<&str> = row.rsplitn(5, ',').collect();
    let diff: f64 = cols[3].parse().unwrap();
    assert!((diff - (-1.1313)).abs() < 1e-9, "{row}");
    assert_eq!(cols[0], "true");
    assert!(fs::read_to_string(out.join("anova.csv")).unwrap().lines().count() == 2);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "nope\n").unwrap();
    let res = bin(&["analyze", "--responses", s(&bad), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("MalformedExport"));
}

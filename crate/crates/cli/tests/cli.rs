use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mctn::data::load_dataset;

fn mctn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mctn")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TINY: [&str; 6] = ["--model-dim", "3", "--hidden-dim", "3", "--head-hidden", "3"];

fn synth(dir: &Path, name: &str, dims: &str) {
    ok(&mctn(&["synth", "--n", "30", "--L", "4", "--dims", dims, "--seed", "5", "--out", name], dir));
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--dataset", "ds", "--out", out, "--source", "language", "--target1", "visual"];
    args.extend_from_slice(&TINY);
    args.extend_from_slice(extra);
    mctn(&args, dir)
}

#[test]
fn unknown_variant_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    let out = train(tmp.path(), "run", &["--variant", "z"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown variant id 'z'"), "{}", stderr(&out));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn missing_roles_and_bad_config_fail() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    let out = mctn(&["train", "--dataset", "ds", "--out", "run", "--variant", "a"], tmp.path());
    assert!(!out.status.success() && stderr(&out).contains("--source"));
    let out = train(tmp.path(), "run", &["--variant", "e", "--target2", "acoustic"]);
    assert!(!out.status.success() && stderr(&out).contains("acoustic"), "{}", stderr(&out));
    fs::write(tmp.path().join("bad.json"), r#"{"epochs": 2, "learnig_rate": 0.1}"#).unwrap();
    let out = train(tmp.path(), "run", &["--variant", "a", "--config", "bad.json"]);
    assert!(!out.status.success() && stderr(&out).contains("learnig_rate"), "{}", stderr(&out));
    let out = train(tmp.path(), "run", &["--variant", "a", "--learning-rate", "-1"]);
    assert!(!out.status.success());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    fs::write(tmp.path().join("c.json"), r#"{"variant": "b", "epochs": 5, "lambda_t": 0.5, "seed": 3}"#).unwrap();
    ok(&train(tmp.path(), "run", &["--config", "c.json", "--epochs", "2"]));
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/config.echo.json")).unwrap()).unwrap();
    assert_eq!(echo["epochs"], 2);
    assert_eq!(echo["variant"], "b");
    assert_eq!(echo["lambda_t"], 0.5);
    assert_eq!(echo["seed"], 3);
    assert_eq!(echo["model_dim"], 3);
    let log = fs::read_to_string(tmp.path().join("run/epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    for f in ["checkpoint.json", "checkpoint.bin", "report.json"] {
        assert!(tmp.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn eval_reproduces_the_training_report() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2,2");
    ok(&train(tmp.path(), "run", &["--variant", "e", "--target2", "acoustic", "--epochs", "2", "--export-embeddings"]));
    ok(&mctn(&["eval", "--checkpoint", "run/checkpoint.json", "--dataset", "ds", "--out", "ev", "--export-embeddings"], tmp.path()));
    let read = |p: &str| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(tmp.path().join(p)).unwrap()).unwrap() };
    let (trained, evaluated) = (read("run/report.json"), read("ev/report.json"));
    assert_eq!(trained["splits"]["test"]["report"], evaluated["report"]);
    assert_eq!(trained["splits"]["test"]["diagnostics"], evaluated["diagnostics"]);
    assert_eq!(
        fs::read(tmp.path().join("run/embeddings.csv")).unwrap(),
        fs::read(tmp.path().join("ev/embeddings.csv")).unwrap()
    );
    let csv = fs::read_to_string(tmp.path().join("ev/embeddings.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("id,x,y,label"));
}

#[test]
fn eval_without_target_files_reports_diagnostics_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    ok(&train(tmp.path(), "run", &["--variant", "a", "--epochs", "1"]));
    ok(&mctn(&["eval", "--checkpoint", "run/checkpoint.json", "--dataset", "ds", "--out", "full"], tmp.path()));
    for e in fs::read_dir(tmp.path().join("ds/data")).unwrap() {
        let p = e.unwrap().path();
        if p.to_string_lossy().ends_with(".visual.csv") {
            fs::remove_file(p).unwrap();
        }
    }
    let out = mctn(&["eval", "--checkpoint", "run/checkpoint.json", "--dataset", "ds", "--out", "partial"], tmp.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("unavailable"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("partial/report.json")).unwrap()).unwrap();
    assert!(report["diagnostics"].is_null());
    assert_eq!(
        fs::read(tmp.path().join("full/predictions.jsonl")).unwrap(),
        fs::read(tmp.path().join("partial/predictions.jsonl")).unwrap()
    );
}

#[test]
fn eval_rejects_corrupt_checkpoints_and_mismatched_dims() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    synth(tmp.path(), "wide", "4,2");
    ok(&train(tmp.path(), "run", &["--variant", "a", "--epochs", "1"]));
    let out = mctn(&["eval", "--checkpoint", "run/checkpoint.json", "--dataset", "wide", "--out", "ev"], tmp.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("language") && err.contains('3') && err.contains('4'), "{err}");

    let blob = tmp.path().join("run/checkpoint.bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[5] ^= 0xff;
    fs::write(&blob, bytes).unwrap();
    let out = mctn(&["eval", "--checkpoint", "run/checkpoint.json", "--dataset", "ds", "--out", "ev"], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("integrity"), "{}", stderr(&out));
}

#[test]
fn synth_is_reproducible_and_loadable() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "one", "4,3,2");
    synth(tmp.path(), "two", "4,3,2");
    let files = |d: &str| {
        let mut v: Vec<_> = walk(&tmp.path().join(d));
        v.sort();
        v
    };
    let (a, b) = (files("one"), files("two"));
    assert_eq!(a.len(), b.len());
    for ((pa, da), (pb, db)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert_eq!(da, db, "{pa}");
    }
    let ds = load_dataset(&tmp.path().join("one")).unwrap();
    assert_eq!((ds.len(), ds.modality_names()), (30, vec!["language".into(), "visual".into(), "acoustic".into()]));
}

fn walk(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    out
}

#[test]
fn ablate_on_two_modalities_skips_trimodal_variants() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2");
    let mut args = vec!["ablate", "--dataset", "ds", "--out", "abl", "--epochs", "1", "--jobs", "2"];
    args.extend_from_slice(&TINY);
    ok(&mctn(&args, tmp.path()));
    let table = fs::read_to_string(tmp.path().join("abl/table.txt")).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with('(')).count(), 8);
    for id in ['e', 'f', 'g', 'h', 'i'] {
        assert!(table.contains(&format!("variant {id} skipped: needs 3 modalities")), "{table}");
    }
    assert!(table.contains("T⇄V") && table.contains("V⇄T") && table.contains("[T→V, V→T]"));
    assert!(tmp.path().join("abl/runs/a_language_visual/epochs.jsonl").exists());
    assert!(tmp.path().join("abl/config.echo.json").exists());
}

#[test]
fn ablate_runs_are_independent_of_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "ds", "3,2,2");
    for (out, jobs) in [("serial", "1"), ("parallel", "3")] {
        let mut args = vec!["ablate", "--dataset", "ds", "--out", out, "--epochs", "1", "--jobs", jobs, "--variants", "a,e,h"];
        args.extend_from_slice(&TINY);
        ok(&mctn(&args, tmp.path()));
    }
    assert_eq!(
        fs::read(tmp.path().join("serial/table.txt")).unwrap(),
        fs::read(tmp.path().join("parallel/table.txt")).unwrap()
    );
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mctn(&["gradcheck", "--seed", "2"], tmp.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("variant a") && text.contains("variant e") && text.contains("cross_entropy"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn align_averages_frames_over_word_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("w.csv"), "0.0,0.5\n0.5,1.0\n1.0,1.5\n").unwrap();
    fs::write(d.join("lang.csv"), "1,0\n0,1\n1,1\n").unwrap();
    // 4 Hz frames stamped 0, 0.25, 0.5, 0.75; the last interval has none.
    fs::write(d.join("vis.csv"), "1\n3\n10\n20\n").unwrap();
    fs::write(
        d.join("align.json"),
        r#"{"name": "toy", "task": "regression",
            "modalities": [{"name": "language", "dim": 2}, {"name": "visual", "dim": 1, "rate": 4.0}],
            "samples": [{"id": "c1", "label": 0.5, "split": "train", "intervals": "w.csv",
                         "files": {"language": "lang.csv", "visual": "vis.csv"}}]}"#,
    )
    .unwrap();
    let out = mctn(&["align", "--input", "align.json", "--out", "aligned"], d);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 word intervals contained no frames"));
    let ds = load_dataset(&d.join("aligned")).unwrap();
    let s = &ds.samples[0];
    assert_eq!(s.feature("visual").unwrap().frames(), vec![vec![2.0], vec![15.0], vec![0.0]]);
    assert_eq!(s.feature("language").unwrap().frames(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);

    fs::write(d.join("lang.csv"), "1,0\n0,1\n").unwrap();
    let out = mctn(&["align", "--input", "align.json", "--out", "bad"], d);
    assert!(!out.status.success() && stderr(&out).contains("2 rows for 3 words"), "{}", stderr(&out));
}

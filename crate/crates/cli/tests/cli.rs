use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_notescreen"));
    c.env_remove("NOTESCREEN_RUNS_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn split_of_100_notes_is_70_10_20_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "100", "--seed", "3", "--out", "s"]);
    ok(d, &["split", "--cohort", "s/cohort.jsonl", "--ratios", "7,1,2", "--seed", "1", "--out", "sp"]);
    let m = json(&d.join("sp/manifest.json"));
    let sizes: Vec<usize> = ["train", "val", "test"]
        .iter()
        .map(|k| m[k].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, [70, 10, 20]);
    let c = json(&d.join("sp/config.json"));
    assert_eq!(c["command"], "split");
    assert_eq!(c["config"]["seed"], 1);
    assert!(c["tool_version"].is_string());
}

#[test]
fn synth_prevalence_follows_the_requested_fraction() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "2000", "--epilepsy-frac", "0.768", "--out", "s"]);
    let s = json(&dir.path().join("s/summary.json"));
    assert_eq!(s["n"], 2000);
    assert_eq!(s["epilepsy"], 1536);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"n": 50, "seed": 8}"#).unwrap();
    ok(d, &["--config", "cfg.json", "synth", "--seed", "9", "--out", "s"]);
    let c = json(&d.join("s/config.json"));
    assert_eq!((c["config"]["n"].as_u64(), c["config"]["seed"].as_u64()), (Some(50), Some(9)));
}

#[test]
fn runs_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("myruns");
    let out = bin()
        .current_dir(dir.path())
        .env("NOTESCREEN_RUNS_DIR", &root)
        .args(["synth", "--n", "20"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let entries: Vec<_> = std::fs::read_dir(&root).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let name = entries[0].as_ref().unwrap().file_name().into_string().unwrap();
    assert!(name.starts_with("synth-"), "{name}");
}

#[test]
fn exit_codes_distinguish_usage_data_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(d, &["split", "--ratios", "1,2"]).status.code(), Some(1));
    assert_eq!(run(d, &["split", "--out", "x"]).status.code(), Some(1));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));

    std::fs::write(
        d.join("bad.csv"),
        "id,patient_id,text,label,site\na,p1,Seizure at night.,Epilepsy,s\nb,p2,\"open quote,PNES\n",
    )
    .unwrap();
    let out = run(d, &["ingest", "--input", "bad.csv", "--out", "i"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(d.join("label.csv"), "id,patient_id,text,label,site\na,p1,Text.,Migraine,s\n").unwrap();
    let out = run(d, &["ingest", "--input", "label.csv", "--out", "j"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

/// Each class carries its own cue tokens, so a zero-error classifier exists.
fn separable_csv(path: &Path, n: usize) {
    let mut csv = String::from("id,patient_id,text,label,site\n");
    for i in 0..n {
        let (label, cue) = if i % 3 == 0 {
            ("PNES", "stress pseudoseizure")
        } else {
            ("Epilepsy", "tongue biting")
        };
        csv.push_str(&format!(
            "n{i:03},p{i:03},\"Patient seen in clinic. Event with {cue} reported. Follow up in {} weeks.\",{label},a\n",
            i % 7 + 1
        ));
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn train_eval_explain_roundtrip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    separable_csv(&d.join("sep.csv"), 120);
    ok(d, &["ingest", "--input", "sep.csv", "--out", "s"]);
    ok(d, &["train", "--cohort", "s/cohort.jsonl", "--split-seed", "2", "--out", "t"]);
    let common = [
        "--checkpoint", "t/checkpoint.json", "--cohort", "s/cohort.jsonl", "--split", "t/split.json", "--n-boot", "200",
    ];
    let mut a = vec!["eval", "--out", "e1"];
    a.extend(common);
    ok(d, &a);
    let mut b = vec!["--sequential", "eval", "--out", "e2"];
    b.extend(common);
    ok(d, &b);
    let m1 = std::fs::read(d.join("e1/metrics.json")).unwrap();
    assert_eq!(m1, std::fs::read(d.join("e2/metrics.json")).unwrap());
    assert_eq!(
        std::fs::read(d.join("e1/predictions.csv")).unwrap(),
        std::fs::read(d.join("e2/predictions.csv")).unwrap()
    );
    let m = json(&d.join("e1/metrics.json"));
    assert_eq!(m["auc"], 1.0);

    ok(
        d,
        &[
            "explain", "--checkpoint", "t/checkpoint.json", "--cohort", "s/cohort.jsonl", "--split", "t/split.json",
            "--limit", "4", "--m", "64", "--out", "x",
        ],
    );
    let csv = std::fs::read_to_string(d.join("x/category_scores.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let a_c: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(a_c >= 0.0 && a_c <= 1.0, "{line}");
        rows += 1;
    }
    assert!(rows > 0);
    let assist = json(&d.join("x/assist.json"));
    assert_eq!(assist.as_object().unwrap().len(), 4);
}

#[test]
fn experiment_writes_tidy_csv_with_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["experiment", "--kind", "ratio", "--values", "0.5,0", "--n", "200", "--n-boot", "50", "--out", "x"],
    );
    let csv = std::fs::read_to_string(d.join("x/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sweep,value,n_train,metric,estimate,bootstrap_mean,ci_lo,ci_hi,status");
    assert!(lines[1].starts_with("ratio,0.5,") && lines[1].ends_with(",ok"));
    assert!(lines.iter().any(|l| l.starts_with("ratio,0,") && l.ends_with(",failed")));
    let points: Vec<_> = std::fs::read_dir(d.join("x/points")).unwrap().collect();
    assert_eq!(points.len(), 2);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_healthz_and_rejects_a_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "30", "--out", "s"]);
    let port = free_port();
    let mut child = bin()
        .current_dir(d)
        .args(["serve", "--port", &port.to_string(), "--cohort", "s/cohort.jsonl", "--out", "srv"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut resp = None;
    while Instant::now() < deadline {
        if let Some(r) = get(port, "/healthz") {
            resp = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let busy = run(d, &["serve", "--port", &port.to_string(), "--out", "srv2"]);
    child.kill().unwrap();
    child.wait().unwrap();
    let resp = resp.expect("server did not come up");
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert_eq!(busy.status.code(), Some(3));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn skelact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelact")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = skelact(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 4] = ["--set", "clips_per_class=3", "--set", "frames_per_clip=36"];

#[test]
fn train_eval_infer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    // Every fifth clip of a class is held out.
    ok(&["synth", "--no-video", "--out", p(&data), "--set", "clips_per_class=5", "--set", "frames_per_clip=36"]);
    let trained = ok(&["train", "--data", p(&data), "--out", p(&run), "--T", "12", "--set", "epochs=2"]);
    let fused = trained.lines().find(|l| l.contains("\"fused\"")).expect("fused test line");

    let eval = ok(&["eval", "--model", p(&run), "--data", p(&data), "--split", "test"]);
    assert_eq!(eval.trim(), fused);
    for name in ["hp.ckpt", "ohp.ckpt", "run.cfg", "metrics.jsonl"] {
        assert!(run.join(name).exists(), "{name}");
    }
    let cfg = std::fs::read_to_string(run.join("run.cfg")).unwrap();
    assert!(cfg.contains("T = 12\n") && cfg.contains("epochs = 2\n"));

    let infer = ok(&["infer", "--model", p(&run), "--data", p(&data)]);
    let lines: Vec<Value> = infer.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 20);
    for v in &lines {
        let probs: Vec<f64> = v["probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(probs.len(), 4);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = (0..4).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
        assert_eq!(v["predicted_class"].as_u64().unwrap() as usize, best);
        assert!(matches!(v["streams_used"].as_str().unwrap(), "HP" | "HP+OHP"));
    }
}

#[test]
fn sample_and_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[&["synth", "--no-video", "--out", p(&data)][..], &SMALL].concat());

    let sampled = dir.path().join("sampled");
    ok(&["sample", "--data", p(&data), "--out", p(&sampled), "--T", "8", "--sampling", "uniform"]);
    let text = std::fs::read_to_string(sampled.join("samples.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 12);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let frames: Vec<u64> = v["frames"].as_array().unwrap().iter().map(|f| f.as_u64().unwrap()).collect();
        assert_eq!(frames.len(), 8);
        assert!(frames.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(v["object_present"].as_array().unwrap().len(), 8);
    }

    let ingested = dir.path().join("ingested");
    ok(&["ingest", "--data", p(&data), "--out", p(&ingested)]);
    for entry in std::fs::read_dir(data.join("clips")).unwrap() {
        let path = entry.unwrap().path();
        let again = ingested.join("clips").join(path.file_name().unwrap());
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(again).unwrap());
    }
    let rows = |d: &Path| {
        let mut r: Vec<String> = std::fs::read_to_string(d.join("labels.csv")).unwrap().lines().map(String::from).collect();
        r.sort();
        r
    };
    assert_eq!(rows(&data), rows(&ingested));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "T = 20\nclips_per_class = 2\nframes_per_clip = 30\nstrategy = limbs\n").unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--no-video", "--config", p(&cfg), "--strategy", "body", "--out", p(&data)]);
    let written = std::fs::read_to_string(data.join("synth.cfg")).unwrap();
    assert!(written.contains("T = 20\n"));
    assert!(written.contains("strategy = body\n"));
    assert_eq!(std::fs::read_dir(data.join("clips")).unwrap().count(), 8);
}

#[test]
fn exit_codes() {
    assert_eq!(skelact(&["--bogus"]).status.code(), Some(1));
    assert_eq!(skelact(&["train", "--set", "lr=-1", "--data", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(skelact(&["train", "--set", "nonsense"]).status.code(), Some(1));
    assert_eq!(skelact(&["train", "--out", "y"]).status.code(), Some(1));
    assert_eq!(skelact(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = skelact(&["train", "--data", p(&missing), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let clips = dir.path().join("bad/clips");
    std::fs::create_dir_all(&clips).unwrap();
    std::fs::write(clips.join("a.json"), "{\"frames\": 3}").unwrap();
    assert_eq!(skelact(&["ingest", "--data", p(&dir.path().join("bad")), "--out", p(&dir.path().join("o"))]).status.code(), Some(2));
}

use std::path::Path;
use std::process::{Command, Output};

fn emdkern(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_emdkern")).args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "emdkern {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Matrix body of a CSV written by the tool, comments dropped.
fn matrix(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn distance_transform_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    emdkern(d, &["synth", "--classes", "2", "--per-class", "6", "--seed", "3", "--out", "data.json"]);
    emdkern(
        d,
        &["dist", "--data", "data.json", "--variant", "emdhat-sink", "--threshold", "2", "--include-empty", "--out", "d.csv"],
    );
    let m = matrix(&d.join("d.csv"));
    assert_eq!(m.len(), 14);
    assert_eq!(m[0].last().unwrap(), "__empty__");
    // the empty-set row is the flat sink rate times each set's mass
    let data = json(&d.join("data.json"));
    let first_mass = data["items"][0]["points"].as_array().unwrap().len() as f64;
    assert_eq!(m[1].last().unwrap().parse::<f64>().unwrap(), 2.0 * first_mass);

    emdkern(d, &["xform", "--in", "d.csv", "--op", "biotope", "--anchor-row", "empty", "--out", "b.csv"]);
    assert_eq!(matrix(&d.join("b.csv")).len(), 13);
    let out = emdkern(d, &["diag", "--in", "b.csv"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["kind"], "distance");
    assert_eq!(report["report"]["eigenvalues"].as_array().unwrap().len(), 12);
    assert!(report["provenance"].as_str().unwrap().contains("biotope anchor=__empty__"));
}

#[test]
fn train_eval_and_corrections() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    emdkern(d, &["synth", "--classes", "3", "--per-class", "8", "--seed", "5", "--out", "train.json"]);
    emdkern(d, &["synth", "--classes", "3", "--per-class", "4", "--seed", "6", "--out", "test.json"]);
    std::fs::write(
        d.join("p.json"),
        r#"{"ground":{"kind":"euclidean","threshold":3},"variant":"emdhat-sink","rbf":"auto"}"#,
    )
    .unwrap();
    emdkern(d, &["train", "--data", "train.json", "--pipeline", "p.json", "--correction", "ksvm", "--C", "10", "--out", "m.json"]);
    let model = json(&d.join("m.json"));
    assert_eq!(model["model"]["classes"].as_array().unwrap().len(), 3);
    assert!(model["u"].as_f64().unwrap() > 0.0);
    assert_eq!(model["train"]["items"].as_array().unwrap().len(), 24);

    emdkern(d, &["eval", "--model", "m.json", "--data", "test.json", "--out", "e.json"]);
    let e = json(&d.join("e.json"));
    assert_eq!(e["total"], 12);
    assert!(e["accuracy"].as_f64().unwrap() >= 90.0, "{e}");
    assert_eq!(e["spec_hash"], model["spec_hash"]);

    std::fs::write(
        d.join("k.json"),
        r#"{"ground":{"kind":"euclidean","threshold":3},"variant":"emi","transform":"nested:2"}"#,
    )
    .unwrap();
    emdkern(d, &["gram", "--data", "train.json", "--pipeline", "k.json", "--out", "k.csv"]);
    let ids: Vec<String> = matrix(&d.join("k.csv"))[0][1..].to_vec();
    let labels: String = ids.iter().map(|id| format!("{id},{}\n", id.split('-').next().unwrap())).collect();
    std::fs::write(d.join("labels.csv"), labels).unwrap();
    emdkern(d, &["correct", "--in", "k.csv", "--mode", "ksvm", "--labels", "labels.csv", "--positive", "c1", "--out", "kc.csv"]);
    emdkern(d, &["correct", "--in", "k.csv", "--mode", "shift", "--out", "ks.csv"]);
    for f in ["kc.csv", "ks.csv"] {
        let out = emdkern(d, &["diag", "--in", f]);
        let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(r["report"]["is_psd"], true, "{f}: {r}");
    }
}

#[test]
fn run_spec_and_posture_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    emdkern(d, &["synth", "--classes", "2", "--per-class", "9", "--seed", "1", "--out", "data.json"]);
    std::fs::write(
        d.join("spec.json"),
        r#"{"dataset":{"path":"data.json"},
            "pipeline":{"ground":{"kind":"euclidean","threshold":3},"variant":"emjd","rbf":"auto"},
            "protocol":{"kind":"kfold","k":3,"seed":4},"C":10}"#,
    )
    .unwrap();
    emdkern(d, &["run", "--spec", "spec.json", "--out", "r.json"]);
    let r = json(&d.join("r.json"));
    assert_eq!(r["folds"].as_array().unwrap().len(), 3);
    for key in ["spec_hash", "mean_accuracy", "std_accuracy", "timings"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert!(r["folds"][0]["gram_diag"]["is_psd"].is_boolean());

    std::fs::write(
        d.join("raw.csv"),
        "Class,User,X0,Y0,Z0,X1,Y1,Z1,X2,Y2,Z2,X3,Y3,Z3\n1,0,1,2,3,4,5,6,7,8,9,300,0,0\n2,1,1,2,3,?,?,?,7,8,9,,,\n",
    )
    .unwrap();
    let out = emdkern(d, &["ingest-posture", "--in", "raw.csv", "--out", "post.json"]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rep["kept"], 1);
    assert_eq!(rep["pruned_markers"], 1);
    assert_eq!(json(&d.join("post.json"))["items"][0]["group"], "0");
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "id,a,b\na,0,1\nb,1,oops\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emdkern")).args(["diag", "--in", "bad.csv"]).current_dir(d).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

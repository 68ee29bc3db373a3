use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use vomt::imaging::{save_png, two_gaussian_fixture};

fn vomt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vomt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn two_node_inputs(dir: &Path) {
    write(dir, "k2.tsv", "0\t1\t1\n");
    write(dir, "mu.csv", "0.9\n0.1\n");
    write(dir, "nu.csv", "0.1\n0.9\n");
}

#[test]
fn dist_graph_on_two_nodes() {
    let dir = tempfile::tempdir().unwrap();
    two_node_inputs(dir.path());
    let out = vomt(
        dir.path(),
        &["dist-graph", "k2.tsv", "mu.csv", "nu.csv", "--nt", "32", "--trajectory"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let want = 2.0 * 0.8f64.asin();
    assert!((report["value"].as_f64().unwrap() - want).abs() / want < 0.02);
    assert_eq!(report["converged"], Value::Bool(true));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["slices"].as_array().unwrap().len(), 33);
    assert!(dir.path().join("slice_0032.csv").exists());

    let out = vomt(
        dir.path(),
        &[
            "dist-graph",
            "k2.tsv",
            "mu.csv",
            "nu.csv",
            "--variant",
            "w2a-max",
            "--nt",
            "16",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let (f, b) = (
        v["forward"]["value"].as_f64().unwrap(),
        v["backward"]["value"].as_f64().unwrap(),
    );
    assert_eq!(v["value"].as_f64().unwrap(), f.max(b));
}

#[test]
fn w1_with_certificates() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "path.tsv", "0\t1\t1\n1\t2\t1\n");
    write(dir.path(), "mu.csv", "1\n0\n0\n");
    write(dir.path(), "nu.csv", "0\n0\n1\n");
    let out = vomt(
        dir.path(),
        &[
            "w1",
            "path.tsv",
            "mu.csv",
            "nu.csv",
            "--dual-check",
            "--action-check",
            "--nt",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(v["gap"].as_f64().unwrap().abs() <= 1e-8);
    assert!(v["action_difference"].as_f64().unwrap() <= 2e-3);
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("w1.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
}

#[test]
fn entropy_flow_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    two_node_inputs(dir.path());
    let out = vomt(
        dir.path(),
        &["entropy-flow", "k2.tsv", "mu.csv", "--h", "1e-2", "--steps", "2000"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for r in v["rho"].as_array().unwrap() {
        assert!((r.as_f64().unwrap() - 0.5).abs() < 1e-3);
    }
    let csv = fs::read_to_string(dir.path().join("entropy_flow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn interp_vector_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = vomt(
            dir.path(),
            &[
                "interp-vector",
                "--cells",
                "12",
                "--nt",
                "8",
                "--frames",
                "3",
                "--output-dir",
                sub,
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.path().join(sub).join("manifest.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let m: Value = serde_json::from_str(&a).unwrap();
    let frames = m["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 3);
    for f in frames {
        assert!((f["mass"].as_f64().unwrap() - 1.0).abs() < 1e-8);
        assert!(dir.path().join("a").join(f["csv"].as_str().unwrap()).exists());
    }
}

#[test]
fn interp_vector_from_files() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "mu.csv",
        "channels=2\n0.2,0.05\n0.2,0.05\n0.05,0.2\n0.05,0.2\n",
    );
    write(
        dir.path(),
        "nu.csv",
        "channels=2\n0.05,0.2\n0.05,0.2\n0.2,0.05\n0.2,0.05\n",
    );
    let out = vomt(
        dir.path(),
        &[
            "interp-vector",
            "mu.csv",
            "nu.csv",
            "--shape",
            "2x2",
            "--nt",
            "6",
            "--frames",
            "2",
            "--gamma",
            "0.5",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["mutation_flux"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["run"]["variant"], Value::String("symmetric-layered".into()));
}

#[test]
fn interp_image_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let fx = two_gaussian_fixture(6);
    save_png(&fx.start, dir.path().join("a.png")).unwrap();
    save_png(&fx.end, dir.path().join("b.png")).unwrap();
    let out = vomt(
        dir.path(),
        &[
            "interp-image",
            "a.png",
            "b.png",
            "--nt",
            "4",
            "--frames",
            "2",
            "--scaling",
            "original",
            "--objective-tol",
            "1e-5",
            "--max-iters",
            "3000",
            "--output-dir",
            "frames",
        ],
    );
    // convergence is not required here, only a complete, flagged result
    assert!(
        matches!(out.status.code(), Some(0) | Some(3)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["run"]["converged"].as_bool().unwrap(), out.status.code() == Some(0));
    for name in [
        "frame_t0.333.png",
        "frame_t0.667.png",
        "frame_t0.333.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join("frames").join(name).exists(), "{name}");
    }
    let img = image::open(dir.path().join("frames/frame_t0.333.png")).unwrap();
    assert_eq!((img.width(), img.height()), (6, 6));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    two_node_inputs(dir.path());
    assert_eq!(vomt(dir.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(
        vomt(dir.path(), &["dist-graph", "k2.tsv", "mu.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(
        vomt(dir.path(), &["dist-graph", "missing.tsv", "mu.csv", "nu.csv"])
            .status
            .code(),
        Some(2)
    );
    write(dir.path(), "bad.csv", "0.9\n0.3\n");
    let out = vomt(dir.path(), &["dist-graph", "k2.tsv", "bad.csv", "nu.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(vomt(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn iteration_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    two_node_inputs(dir.path());
    let out = vomt(
        dir.path(),
        &["dist-graph", "k2.tsv", "mu.csv", "nu.csv", "--max-iters", "5"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["converged"], Value::Bool(false));
}

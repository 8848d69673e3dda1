use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netclutter::io::read_points_csv;
use netclutter::network::build_network;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netclutter"))
}

fn designs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../designs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Clutter-plus-feature pattern and its network written to `dir`.
fn simulated(dir: &Path) -> (PathBuf, PathBuf) {
    let pts = dir.join("pts.csv");
    let net = dir.join("net.csv");
    let out = run(&[
        "simulate",
        "--design",
        s(&designs().join("mixed_chicago.toml")),
        "--out",
        s(&pts),
        "--network-out",
        s(&net),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (net, pts)
}

#[test]
fn simulate_single_layer_count() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("p.csv");
    let out =
        run(&["simulate", "--network", "synthetic:chicago", "--lambda", "0.013", "--seed", "3", "--out", s(&pts)]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = summary["n"].as_f64().unwrap();
    // 404.95 expected, sd about 20
    assert!((n - 404.95).abs() < 100.0, "n = {n}");
    assert_eq!(summary["seed"], 3);
}

#[test]
fn classify_fixed_k_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = simulated(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&["classify", "--network", s(&net), "--points", s(&pts), "--k", "10", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["schema_version"], 1);
    assert_eq!(fit["K"], 10);
    assert!(fit["config_hash"].as_str().unwrap().len() == 16);

    let raw = netclutter::io::read_raw_network(&net, None).unwrap();
    let network = build_network(&raw.segments, netclutter::network::default_merge_tol(&raw.segments)).unwrap();
    let orig = read_points_csv(&network, std::fs::File::open(&pts).unwrap(), 10.0).unwrap();
    let labelled_text = std::fs::read_to_string(out_dir.join("labelled.csv")).unwrap();
    assert!(labelled_text.starts_with("# netclutter"));
    let labelled = read_points_csv(&network, labelled_text.as_bytes(), 10.0).unwrap();
    assert_eq!(labelled.points, orig.points);
    let labels = labelled.labels.unwrap();
    assert_eq!(labels.iter().filter(|l| l.is_feature()).count() as u64, fit["n_feature"].as_u64().unwrap());

    // writing the re-read pattern gives the same file again
    let again = dir.path().join("again");
    let out = run(&[
        "classify",
        "--network",
        s(&net),
        "--points",
        s(&out_dir.join("labelled.csv")),
        "--k",
        "10",
        "--out",
        s(&again),
    ]);
    assert!(out.status.success());
    let strip = |t: String| t.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(std::fs::read_to_string(again.join("labelled.csv")).unwrap()), strip(labelled_text));
}

#[test]
fn classify_auto_writes_curve_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = simulated(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "classify",
        "--network",
        s(&net),
        "--points",
        s(&pts),
        "--k-max",
        "35",
        "--hist",
        "27..32",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["entropy.csv", "entropy.svg", "segmented.json", "histograms.csv", "histograms.svg", "fit.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let seg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("segmented.json")).unwrap()).unwrap();
    for key in ["psi", "beta", "gamma", "rss", "k_hat"] {
        assert!(!seg[key].is_null(), "{key}");
    }
    let hist = std::fs::read_to_string(out_dir.join("histograms.csv")).unwrap();
    let ks: std::collections::BTreeSet<&str> = hist.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks.len(), 6);
}

#[test]
fn insufficient_points_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = simulated(dir.path());
    let few = dir.path().join("few.csv");
    std::fs::write(&few, "segment_id,offset\n0,0.5\n1,0.5\n2,0.5\n").unwrap();
    let out = run(&["classify", "--network", s(&net), "--points", s(&few), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("insufficient points"));
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn bad_input_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.csv");
    std::fs::write(&net, "a,b\n1,2\n").unwrap();
    let out = run(&["volumes", "--network", s(&net), "--points", s(&net), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geojson_network_with_planar_points() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.geojson");
    std::fs::write(
        &net,
        r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
        "geometry":{"type":"LineString","coordinates":[[0,0],[100,0],[100,100]]}}]}"#,
    )
    .unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "x,y\n10,1\n20,-1\n40,0\n70,2\n100,50\n500,500\n").unwrap();
    let out = run(&["--format", "json", "volumes", "--network", s(&net), "--points", s(&pts), "--k", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let vols = v["volumes"].as_array().unwrap();
    assert_eq!(vols.len(), 5);
    // nearest neighbour of the point at 10 is the one at 20
    assert_eq!(vols[0]["d_k"].as_f64().unwrap(), 10.0);
    assert_eq!(vols[0]["s_k"].as_f64().unwrap(), 20.0);
}

#[test]
fn rates_table_layout() {
    let out = run(&["rates", "--design", s(&designs().join("chicago_d1.toml")), "--reps", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# netclutter"));
    assert_eq!(
        lines[1],
        "design,lambda_clutter,lambda_feature,E_n_clutter,E_n_feature,mean_n_clutter,mean_n_feature,k_bar,k_sd,rate,fixed:5,fixed:10,auto:35,failed"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("chicago_d1,0.032,0.1,") && lines[2].contains(",TPR,"));
    assert!(lines[4].contains(",ACC,"));
}

#[test]
fn rates_are_reproducible() {
    let design = designs().join("chicago_d4.toml");
    let args = ["rates", "--design", s(&design), "--reps", "2", "--policies", "fixed:10"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn select_k_and_hist() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = simulated(dir.path());
    let out_dir = dir.path().join("sk");
    let out = run(&["select-k", "--network", s(&net), "--points", s(&pts), "--k-max", "20", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let entropy = std::fs::read_to_string(out_dir.join("entropy.csv")).unwrap();
    assert!(entropy.lines().nth(1).unwrap() == "K,entropy");
    let h = dir.path().join("h");
    let out = run(&["hist", "--network", s(&net), "--points", s(&pts), "--k", "3..4", "--bins", "10", "--out", s(&h)]);
    assert!(out.status.success());
    let rows = std::fs::read_to_string(h.join("histograms.csv")).unwrap().lines().count();
    assert_eq!(rows, 2 + 20);
}

#[test]
fn zones_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = simulated(dir.path());
    let n_segments = std::fs::read_to_string(&net).unwrap().lines().count() - 1;
    // zone "stack" holds a single segment with twelve co-located points, whose
    // volumes are all zero
    let text = std::fs::read_to_string(&pts).unwrap();
    let stack_segment = 0;
    let mut lines: Vec<String> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter(|l| l.split(',').nth(1) != Some(&stack_segment.to_string()))
        .map(String::from)
        .collect();
    for i in 0..12 {
        lines.push(format!("{},{stack_segment},1.0,clutter", 10_000 + i));
    }
    let pts2 = dir.path().join("pts2.csv");
    std::fs::write(&pts2, lines.join("\n") + "\n").unwrap();
    let part = dir.path().join("part.csv");
    let mut p = String::from("segment_id,zone\n");
    for i in 0..n_segments {
        p.push_str(&format!("{i},{}\n", if i == stack_segment { "stack" } else { "rest" }));
    }
    std::fs::write(&part, p).unwrap();

    let base = ["classify-zones", "--network", s(&net), "--points", s(&pts2), "--partition", s(&part), "--k", "10"];
    let out_dir = dir.path().join("z");
    let mut args = base.to_vec();
    args.extend(["--out", s(&out_dir)]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    args.push("--allow-partial");
    let out = run(&args);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let zones = std::fs::read_to_string(out_dir.join("zones.csv")).unwrap();
    assert!(zones.contains("rest,ok"));
    assert!(zones.contains("stack,failed"));
    let labelled = std::fs::read_to_string(out_dir.join("labelled.csv")).unwrap();
    assert!(labelled.lines().any(|l| l.ends_with(",stack,,,,")));
}

//! End-to-end runs of the `graphconv` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphconv::data::synthetic::BlockRegression;
use graphconv::graph::NeighborTable;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graphconv"));
    cmd.env_remove("GRAPHCONV_WORKERS").env_remove("RUST_LOG");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn graphconv")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "graphconv {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Writes a regression CSV with block-correlated features.
fn write_csv(path: &Path, n_obs: usize, seed: u64) {
    let g = BlockRegression {
        n_obs,
        n_blocks: 3,
        block_size: 4,
        n_linear: 4,
        n_interactions: 2,
        noise_sd: 0.3,
        seed,
        ..BlockRegression::default()
    }
    .generate()
    .unwrap();
    let d = &g.data;
    let mut text: Vec<String> = (0..d.n_features()).map(|j| format!("f{j}")).collect();
    text.push("y".into());
    let mut out = text.join(",") + "\n";
    let y = match d.targets() {
        graphconv::data::TargetValues::Values(v) => v.clone(),
        _ => unreachable!(),
    };
    for (i, target) in y.iter().enumerate() {
        let row: Vec<String> = d.row(i).iter().map(|v| v.to_string()).collect();
        out += &format!("{},{}\n", row.join(","), target);
    }
    fs::write(path, out).unwrap();
}

struct CsvFixture {
    dir: TempDir,
}

impl CsvFixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        write_csv(&dir.path().join("train.csv"), 300, 1);
        write_csv(&dir.path().join("test.csv"), 100, 2);
        CsvFixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn data_args(&self) -> Vec<String> {
        vec![
            "--csv".into(),
            s(&self.path("train.csv")).into(),
            "--test-csv".into(),
            s(&self.path("test.csv")).into(),
            "--target".into(),
            "y".into(),
        ]
    }

    fn cmd(&self, head: &[&str], tail: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = head.iter().map(|x| x.to_string()).collect();
        v.extend(self.data_args());
        v.extend(tail.iter().map(|x| x.to_string()));
        v
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Minimal IDX pair: `n` 4x4 images whose bright pixel encodes the label.
fn write_idx(dir: &Path, images: &str, labels: &str, n: usize, seed: u64) {
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut img = vec![0, 0, 8, 3];
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&4u32.to_be_bytes());
    img.extend_from_slice(&4u32.to_be_bytes());
    let mut lab = vec![0, 0, 8, 1];
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    for i in 0..n {
        let label = (i % 10) as u8;
        for px in 0..16 {
            let noise = (next() % 60) as u8;
            img.push(if px == label as usize {
                200 + noise / 2
            } else {
                noise
            });
        }
        lab.push(label);
    }
    fs::write(dir.join(images), img).unwrap();
    fs::write(dir.join(labels), lab).unwrap();
}

fn idx_fixture() -> TempDir {
    let dir = TempDir::new().unwrap();
    write_idx(
        dir.path(),
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        400,
        1,
    );
    write_idx(
        dir.path(),
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
        2000,
        2,
    );
    dir
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}

#[test]
fn inspect_chain_lists_self_then_neighbor() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("chain");
    ok(&[
        "build-graph",
        "--grid",
        "1x3",
        "--k",
        "1",
        "--p",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        ok(&["inspect", "--table", s(&out), "--node", "0"]).trim(),
        "[0, 1]"
    );
    // The middle node's tie between its two neighbors resolves to the lower index.
    assert_eq!(
        ok(&["inspect", "--table", s(&out), "--node", "1"]).trim(),
        "[1, 0]"
    );

    let json: Value = serde_json::from_str(&ok(&[
        "inspect",
        "--table",
        s(&out),
        "--node",
        "2",
        "--json",
    ]))
    .unwrap();
    assert_eq!(json["neighbors"], serde_json::json!([2, 1]));
    assert_eq!(json["slots"][1]["padded"], false);
}

#[test]
fn grid_table_has_one_row_per_pixel() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("grid");
    let stdout = ok(&[
        "build-graph",
        "--grid",
        "28x28",
        "--k",
        "3",
        "--p",
        "25",
        "--out",
        s(&out),
    ]);
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["n_nodes"], 784);
    assert_eq!(summary["p"], 25);
    assert_eq!(summary["k"], 3);
    assert_eq!(summary, read_json(&out.join("summary.json")));

    let table = NeighborTable::read_file(&out.join("table.gnbt")).unwrap();
    assert_eq!(table.n_nodes(), 784);
    assert_eq!(table.p(), 25);
    assert_eq!(summary["table_hash"], table.content_hash());
}

#[test]
fn csv_build_records_walk_length_and_is_byte_identical() {
    let fx = CsvFixture::new();
    let a = fx.path("a");
    let b = fx.path("b");
    for out in [&a, &b] {
        ok(&strs(&fx.cmd(
            &["build-graph"],
            &["--k", "1", "--p", "5", "--json", "--out", s(out)],
        )));
    }
    for name in ["table.gnbt", "table.json", "features.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let table = NeighborTable::read_file(&a.join("table.gnbt")).unwrap();
    assert_eq!(table.k(), 1);
    assert_eq!(table.p(), 5);
    assert_eq!(table.n_nodes(), 12);

    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "build-graph");
    assert_eq!(manifest["config"]["k"], 1);
    let inputs = manifest["inputs"].as_object().unwrap();
    assert!(inputs.keys().any(|k| k.ends_with("train.csv")));
    assert!(inputs.values().all(|h| h.as_str().unwrap().len() == 64));
}

#[test]
fn external_table_import_preserves_content() {
    let tmp = TempDir::new().unwrap();
    let src = tmp.path().join("src");
    ok(&[
        "build-graph",
        "--grid",
        "3x3",
        "--k",
        "2",
        "--p",
        "4",
        "--json",
        "--out",
        s(&src),
    ]);
    let original = read_json(&src.join("summary.json"))["table_hash"].clone();
    for file in ["table.gnbt", "table.json"] {
        let out = tmp.path().join(file.replace('.', "_"));
        ok(&[
            "build-graph",
            "--table",
            s(&src.join(file)),
            "--out",
            s(&out),
        ]);
        assert_eq!(read_json(&out.join("summary.json"))["table_hash"], original);
    }
}

#[test]
fn train_then_evaluate_regression() {
    let fx = CsvFixture::new();
    let graph = fx.path("graph");
    let run_dir = fx.path("run");
    ok(&strs(&fx.cmd(
        &["build-graph"],
        &["--k", "1", "--p", "3", "--out", s(&graph)],
    )));
    let stdout = ok(&strs(&fx.cmd(
        &["train"],
        &[
            "--graph",
            s(&graph),
            "--arch",
            "C4-FC8",
            "--epochs",
            "5",
            "--out",
            s(&run_dir),
        ],
    )));
    let params: usize = stdout
        .lines()
        .find_map(|l| l.strip_prefix("parameters: "))
        .expect("parameter line")
        .parse()
        .unwrap();
    // Conv filters with biases, then 12 nodes x 4 channels into FC8, then the scalar head.
    assert_eq!(params, 4 * (3 + 1) + (12 * 4 * 8 + 8) + (8 + 1));

    let log = fs::read_to_string(run_dir.join("train_log.jsonl")).unwrap();
    let records: Vec<Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 5);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["epoch"], i + 1);
        assert!(r["train_loss"].as_f64().unwrap().is_finite());
    }
    for f in ["checkpoint.gnck", "standardizer.json", "manifest.json"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }

    let eval_dir = fx.path("eval");
    let report: Value = serde_json::from_str(&ok(&strs(&fx.cmd(
        &["evaluate"],
        &[
            "--graph",
            s(&graph),
            "--checkpoint",
            s(&run_dir.join("checkpoint.gnck")),
            "--out",
            s(&eval_dir),
        ],
    ))))
    .unwrap();
    assert_eq!(report["n"], 100);
    assert_eq!(report["parameters"], params);
    assert!(report["error_rate"].is_null());
    // Checkpoints hold f32 parameters, so the reloaded model drifts slightly from the last epoch.
    let r2 = report["r_squared"].as_f64().unwrap();
    let logged = records[4]["eval_metric"].as_f64().unwrap();
    assert!(
        (r2 - logged).abs() <= 1e-6 * logged.abs().max(1.0),
        "{r2} vs {logged}"
    );
    assert_eq!(report, read_json(&eval_dir.join("metrics.json")));
}

#[test]
fn training_logs_repeat_apart_from_wall_time() {
    let fx = CsvFixture::new();
    let graph = fx.path("graph");
    ok(&strs(
        &fx.cmd(&["build-graph"], &["--p", "3", "--out", s(&graph)]),
    ));
    let mut logs = Vec::new();
    for (name, workers) in [("r1", "1"), ("r2", "2")] {
        let dir = fx.path(name);
        let args = fx.cmd(
            &["--workers", workers, "train"],
            &[
                "--graph",
                s(&graph),
                "--arch",
                "C2-FC4",
                "--dropout",
                "0.3",
                "--epochs",
                "3",
                "--out",
                s(&dir),
            ],
        );
        ok(&strs(&args));
        let mut records: Vec<Value> = fs::read_to_string(dir.join("train_log.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        for r in &mut records {
            r.as_object_mut().unwrap().remove("wall_ms");
        }
        logs.push((records, fs::read(dir.join("checkpoint.gnck")).unwrap()));
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn checkpoint_refuses_a_different_table() {
    let fx = CsvFixture::new();
    let g3 = fx.path("g3");
    let g4 = fx.path("g4");
    let run_dir = fx.path("run");
    ok(&strs(
        &fx.cmd(&["build-graph"], &["--p", "3", "--out", s(&g3)]),
    ));
    ok(&strs(
        &fx.cmd(&["build-graph"], &["--p", "4", "--out", s(&g4)]),
    ));
    ok(&strs(&fx.cmd(
        &["train"],
        &[
            "--graph",
            s(&g3),
            "--arch",
            "C2",
            "--epochs",
            "1",
            "--out",
            s(&run_dir),
        ],
    )));
    let out = bin()
        .args(fx.cmd(
            &["evaluate"],
            &[
                "--graph",
                s(&g4),
                "--checkpoint",
                s(&run_dir.join("checkpoint.gnck")),
            ],
        ))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
    assert!(out.stdout.is_empty());
}

#[test]
fn exit_codes_follow_error_kind() {
    let fx = CsvFixture::new();
    let out = fx.path("o");
    let train = fx.path("train.csv");
    // Usage.
    assert_eq!(code(&["build-graph", "--bogus"]), 2);
    assert_eq!(
        code(&[
            "build-graph",
            "--grid",
            "2x2",
            "--csv",
            s(&train),
            "--target",
            "y",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        code(&["build-graph", "--grid", "2x2", "--p", "0", "--out", s(&out)]),
        2
    );
    assert_eq!(
        code(&[
            "build-graph",
            "--grid",
            "2x2",
            "--tie-break",
            "random",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        code(&[
            "build-graph",
            "--csv",
            s(&train),
            "--target",
            "nope",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        bin()
            .args(["build-graph", "--grid", "2x2", "--out", s(&out)])
            .env("GRAPHCONV_WORKERS", "0")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    // Data.
    assert_eq!(
        code(&[
            "build-graph",
            "--csv",
            s(&fx.path("missing.csv")),
            "--target",
            "y",
            "--out",
            s(&out)
        ]),
        3
    );
    assert_eq!(
        code(&["build-graph", "--grid", "2x2", "--p", "9", "--out", s(&out)]),
        3
    );
    fs::write(fx.path("bad.gnbt"), b"not a table").unwrap();
    assert_eq!(
        code(&["inspect", "--table", s(&fx.path("bad.gnbt")), "--node", "0"]),
        3
    );
    // Numeric: an absurd learning rate overflows the weights.
    let graph = fx.path("graph");
    ok(&strs(
        &fx.cmd(&["build-graph"], &["--p", "3", "--out", s(&graph)]),
    ));
    let diverge = fx.cmd(
        &["train"],
        &[
            "--graph",
            s(&graph),
            "--arch",
            "FC8",
            "--lr",
            "1e300",
            "--epochs",
            "3",
            "--out",
            s(&fx.path("d")),
        ],
    );
    assert_eq!(code(&strs(&diverge)), 4);
}

#[test]
fn workers_come_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    let status = bin()
        .args(["build-graph", "--grid", "2x2", "--p", "2", "--out", s(&out)])
        .env("GRAPHCONV_WORKERS", "1")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(read_json(&out.join("manifest.json"))["workers"], 1);
}

fn untrained_error(data: &[&str], graph: &Path, arch: &str, seed: u64) -> f64 {
    let mut args = vec!["evaluate"];
    args.extend_from_slice(data);
    let seed = seed.to_string();
    args.extend_from_slice(&["--graph", s(graph), "--arch", arch, "--seed", &seed]);
    let report: Value = serde_json::from_str(&ok(&args)).unwrap();
    report["error_rate"].as_f64().unwrap()
}

#[test]
fn untrained_classifier_sits_at_chance() {
    let fx = idx_fixture();
    let dir = s(fx.path());
    let graph = fx.path().join("graph");
    ok(&[
        "build-graph",
        "--mnist-dir",
        dir,
        "--k",
        "1",
        "--p",
        "4",
        "--out",
        s(&graph),
    ]);
    let errors: Vec<f64> = (0..5)
        .map(|seed| untrained_error(&["--mnist-dir", dir], &graph, "C4", seed))
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(
        (mean - 0.9).abs() <= 0.03,
        "mean untrained error {mean} ({errors:?})"
    );
}

#[test]
fn mnist_c20_parameter_count_and_chance_level() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST files not found; set MNIST_DIR to run this test");
        return;
    };
    let tmp = TempDir::new().unwrap();
    let graph = tmp.path().join("graph");
    let dir = s(&dir);
    ok(&[
        "build-graph",
        "--mnist-dir",
        dir,
        "--k",
        "1",
        "--p",
        "6",
        "--out",
        s(&graph),
    ]);
    assert_eq!(read_json(&graph.join("summary.json"))["n_nodes"], 717);

    let stdout = ok(&[
        "train",
        "--mnist-dir",
        dir,
        "--train-limit",
        "256",
        "--test-limit",
        "256",
        "--graph",
        s(&graph),
        "--arch",
        "C20",
        "--epochs",
        "1",
        "--lr",
        "0.001",
        "--dropout",
        "0.2",
        "--out",
        s(&tmp.path().join("run")),
    ]);
    assert!(
        stdout.lines().any(|l| l == "parameters: 143550"),
        "{stdout}"
    );

    let data = ["--mnist-dir", dir, "--test-limit", "2000"];
    let errors: Vec<f64> = (0..5)
        .map(|seed| untrained_error(&data, &graph, "C20", seed))
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(
        (mean - 0.9).abs() <= 0.03,
        "mean untrained error {mean} ({errors:?})"
    );
}

use std::path::Path;
use std::process::{Command, Output};

fn qmra(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmra"))
        .current_dir(dir)
        .env_remove("QMRA_ANNEALER_URL")
        .env_remove("QMRA_ANNEALER_TOKEN")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qmra(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    qmra(dir, args).status.code().expect("exited normally")
}

const FAST: &[&str] = &["--reads", "8", "--sweeps", "40", "--maxiter", "6"];

fn small_graph(dir: &Path) {
    ok(
        dir,
        &[
            "generate", "--n", "5", "--sigma", "pi/10", "--seed", "4", "--out", "g.json",
        ],
    );
}

#[test]
fn generate_writes_a_loadable_graph() {
    let tmp = tempfile::tempdir().unwrap();
    small_graph(tmp.path());
    let text = std::fs::read_to_string(tmp.path().join("g.json")).unwrap();
    let g: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(g["n"], 5);
    assert_eq!(g["edges"].as_array().unwrap().len(), 20);
    assert!(g["ground_truth"].is_array());
}

#[test]
fn solve_writes_result_trace_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    let mut args = vec!["solve", "--graph", "g.json", "--out", "out/r.json"];
    args.extend_from_slice(FAST);
    let stdout = ok(d, &args);
    assert!(stdout.contains("residual="));

    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/r.json")).unwrap()).unwrap();
    assert_eq!(r["rotations"].as_array().unwrap().len(), 5);
    assert!(r["residual"].as_f64().unwrap().is_finite());

    let trace = std::fs::read_to_string(d.join("out/r.trace.csv")).unwrap();
    assert!(trace.starts_with("iter,residual,"));
    assert_eq!(
        trace.lines().count(),
        1 + r["iterations"].as_u64().unwrap() as usize
    );

    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/r.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["command"], "solve");
    assert_eq!(m["config"]["maxiter"], 6);
    assert_eq!(m["seeds"][0], 0);
}

#[test]
fn repeated_runs_are_bit_identical_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    for (method, extra) in [
        ("iqars", &["--refine", "top4"][..]),
        ("lm", &[][..]),
        ("direct", &[][..]),
    ] {
        let a = format!("{method}_a.json");
        let b = format!("{method}_b.json");
        let c = format!("{method}_c.json");
        let mut base = vec![
            "solve", "--graph", "g.json", "--method", method, "--seed", "11",
        ];
        base.extend_from_slice(FAST);
        base.extend_from_slice(extra);

        let mut first = base.clone();
        first.extend(["--out", &a]);
        ok(d, &first);
        let mut second = base.clone();
        second.extend(["--out", &b]);
        ok(d, &second);
        let manifest = format!("{method}_a.manifest.json");
        ok(
            d,
            &[
                "solve",
                "--config",
                &manifest,
                "--out",
                &c,
                "--trace-out",
                "t.csv",
                "--manifest-out",
                "m.json",
            ],
        );

        let ra = std::fs::read(d.join(&a)).unwrap();
        assert_eq!(
            ra,
            std::fs::read(d.join(&b)).unwrap(),
            "{method}: rerun differs"
        );
        assert_eq!(
            ra,
            std::fs::read(d.join(&c)).unwrap(),
            "{method}: replay differs"
        );
    }
}

#[test]
fn toml_config_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    std::fs::write(
        d.join("run.toml"),
        "graph = \"g.json\"\nmethod = \"lm\"\nmaxiter = 3\nout = \"from_file.json\"\n",
    )
    .unwrap();
    ok(d, &["solve", "--config", "run.toml", "--maxiter", "2"]);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("from_file.json")).unwrap()).unwrap();
    assert_eq!(r["method"], "lm");
    assert!(r["iterations"].as_u64().unwrap() <= 2);

    std::fs::write(d.join("bad.toml"), "graph = \"g.json\"\nbogus = 1\n").unwrap();
    assert_eq!(code(d, &["solve", "--config", "bad.toml"]), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_graph(d);
    assert_eq!(code(d, &["solve", "--graph", "missing.json"]), 3);
    assert_eq!(code(d, &["solve", "--graph", "g.json", "--m", "0"]), 2);
    assert_eq!(code(d, &["solve", "--graph", "g.json", "--bogus"]), 2);
    assert_eq!(code(d, &["generate", "--n", "1", "--out", "x.json"]), 2);
    assert_eq!(
        code(d, &["solve", "--graph", "g.json", "--backend", "remote"]),
        4
    );
    std::fs::write(d.join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(d, &["solve", "--graph", "broken.json"]), 3);
    assert_eq!(
        code(
            d,
            &[
                "benchmark",
                "--sigmas",
                "0.1",
                "--seeds",
                "0",
                "--out",
                "b.csv"
            ]
        ),
        2
    );
}

#[test]
fn stats_reports_logical_qubits() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["generate", "--n", "15", "--seed", "1", "--out", "g15.json"],
    );
    let csv = ok(d, &["stats", "--graph", "g15.json", "--m", "3"]);
    assert!(csv.lines().any(|l| l == "logical_qubits,135"), "{csv}");
    assert!(csv.lines().any(|l| l == "dim,135"), "{csv}");
}

#[test]
fn benchmark_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut args = vec![
        "benchmark",
        "--n",
        "4",
        "--sigmas",
        "0,pi/10",
        "--seeds",
        "2",
        "--methods",
        "iqars,lm",
        "--jobs",
        "1",
        "--out",
        "b.csv",
    ];
    args.extend_from_slice(FAST);
    ok(d, &args);
    let text = std::fs::read_to_string(d.join("b.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("sigma,seed,method,residual,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
    assert!(d.join("b.manifest.json").exists());
}

#[test]
fn refine_emits_csv_for_each_k() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let csv = ok(
        d,
        &[
            "refine", "--bits", "8", "--k-grid", "1,5", "--trials", "10", "--reads", "20",
        ],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "K,improve_freq,mean_delta,below_median_freq");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,0,0,"));
}

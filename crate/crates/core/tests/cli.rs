use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use invmean::separation::{contraction_bound, contraction_curve, even_t_grid, SeparationOptions};
use invmean::{Generator, Interval};

const AGM_SPEC: &str = r#"{
  "family": {"domain": [1, 2], "pieces": [
    {"span": [0, 0.5], "gen": {"kind": "power", "p": 1}},
    {"span": [0.5, 1], "gen": {"kind": "power", "p": 0}}]},
  "measure": {"domain": [1, 2], "atoms": [[1, 0.5], [2, 0.5]]},
  "nodes": 2,
  "tol": 1e-12,
  "probes": [{"kind": "power", "p": -1}, {"kind": "log"}],
  "outputs": {"trace": "agm-trace.csv", "result": "agm.json"}
}"#;

fn invmean(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invmean"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn iterate_agm_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("agm.spec.json"), AGM_SPEC).unwrap();
    let o = invmean(dir.path(), &["iterate", "--spec", "agm.spec.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("K=1.456791031"), "{out}");
    assert!(out.trim_end().ends_with("status=Converged"));

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("agm.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "Converged");
    assert!((result["k_value"].as_f64().unwrap() - 1.4567910310469068).abs() < 1e-12);
    let trace = fs::read_to_string(dir.path().join("agm-trace.csv")).unwrap();
    assert!(trace.starts_with("n,gamma_lo,gamma_hi,gap,variance,atoms,probe:power(-1),probe:log\n"));
    assert_eq!(
        trace.lines().count(),
        1 + 1 + result["iterations"].as_u64().unwrap() as usize
    );
}

#[test]
fn iterate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("agm.json"), AGM_SPEC).unwrap();
    let o = invmean(
        p,
        &[
            "iterate",
            "--spec",
            "agm.json",
            "--max-iter",
            "1",
            "--out",
            "short",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("status=MaxIterations"));
    assert!(p.join("short/agm.json").exists());

    fs::write(p.join("bad.json"), AGM_SPEC.replace("[2, 0.5]", "[2, 0.4]")).unwrap();
    let o = invmean(p, &["iterate", "--spec", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("atoms"), "{}", stderr(&o));

    fs::write(
        p.join("extra.json"),
        AGM_SPEC.replace("\"nodes\": 2", "\"nodes\": 2, \"seed\": 7"),
    )
    .unwrap();
    let o = invmean(p, &["iterate", "--spec", "extra.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"));

    let o = invmean(p, &["iterate", "--spec", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));

    let o = invmean(p, &["iterate", "--spec", "agm.json", "--nodes", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nodes"));
}

#[test]
fn iterate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let spec = r#"{
      "family": {"domain": [1, 4], "pieces": [{"span": [0, 1],
        "gen": {"kind": "power-sweep", "p_of_x": {"type": "affine", "a": 1, "b": 0}}}]},
      "measure": {"domain": [1, 4], "atoms": [[1, 0.25], [2.5, 0.25], [4, 0.5]]},
      "nodes": 128,
      "probes": [{"kind": "power", "p": 2}]
    }"#;
    fs::write(p.join("sweep.json"), spec).unwrap();
    let mut runs = Vec::new();
    for (i, threads) in ["0", "3", ""].iter().enumerate() {
        let out = format!("run{i}");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_invmean"));
        cmd.current_dir(p)
            .args(["iterate", "--spec", "sweep.json", "--out", &out]);
        if !threads.is_empty() {
            cmd.env("IM_THREADS", threads);
        } else {
            cmd.env_remove("IM_THREADS");
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        runs.push((
            o.stdout,
            fs::read(p.join(&out).join("trace.csv")).unwrap(),
            fs::read(p.join(&out).join("result.json")).unwrap(),
        ));
    }
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn bad_thread_setting_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("agm.json"), AGM_SPEC).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_invmean"))
        .current_dir(dir.path())
        .args(["iterate", "--spec", "agm.json"])
        .env("IM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("IM_THREADS"));
}

fn read_curve(path: &Path) -> Vec<(f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["t", "d"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn separation_command() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let pair = |a: &str, b: &str| format!(r#"{{"domain":[1,2],"generators":[{a},{b}],"grid":16}}"#);

    fs::write(
        p.join("same.json"),
        pair(
            r#"{"kind":"power","p":1}"#,
            r#"{"kind":"affine","a":2,"b":1}"#,
        ),
    )
    .unwrap();
    let o = invmean(p, &["separation", "--spec", "same.json", "--out", "same"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_curve(&p.join("same/separation.csv"));
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|&(_, d)| d == 0.0));

    fs::write(
        p.join("ag.json"),
        pair(r#"{"kind":"power","p":1}"#, r#"{"kind":"power","p":0}"#),
    )
    .unwrap();
    let o = invmean(p, &["separation", "--spec", "ag.json", "--out", "ag"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_curve(&p.join("ag/separation.csv"));
    assert!(rows.iter().all(|&(t, d)| d < t && d > 0.0));

    fs::write(
        p.join("ah.json"),
        pair(r#"{"kind":"power","p":-1}"#, r#"{"kind":"power","p":1}"#),
    )
    .unwrap();
    let o = invmean(p, &["separation", "--spec", "ah.json", "--out", "ah"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_curve(&p.join("ah/separation.csv"));
    let domain = Interval::new(1.0, 2.0).unwrap();
    let set = [
        Generator::power(-1.0, domain).unwrap(),
        Generator::power(1.0, domain).unwrap(),
    ];
    let lib = contraction_curve(&set, &even_t_grid(1.0, 100), &SeparationOptions::new(16)).unwrap();
    for (i, &(t, d)) in rows.iter().enumerate() {
        assert_eq!((t, d), (lib.t_grid[i], lib.values[i]));
    }
    for i in [0, 37, 99] {
        assert_eq!(rows[i].1, contraction_bound(&set, rows[i].0, 16).unwrap());
    }
}

#[test]
fn separation_command_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (name, spec) in [
        ("nodomain.json", r#"{"generators":[{"kind":"log"}]}"#),
        (
            "unknown.json",
            r#"{"domain":[1,2],"generators":[{"kind":"log"}],"colour":1}"#,
        ),
        (
            "range.json",
            r#"{"domain":[1,2],"generators":[{"kind":"log"}],"t_range":[0,3]}"#,
        ),
        (
            "grid.json",
            r#"{"domain":[1,2],"generators":[{"kind":"log"}],"grid":1}"#,
        ),
    ] {
        fs::write(p.join(name), spec).unwrap();
        let o = invmean(p, &["separation", "--spec", name]);
        assert_eq!(o.status.code(), Some(1), "{name}");
    }
}

#[test]
fn demo_agm_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = invmean(dir.path(), &["demo-agm", "1", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let field = |key: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((field("K=") - 1.456791031).abs() < 1e-9);
    assert!((field("AGM=") - 1.456791031).abs() < 1e-9);
    assert!(field("diff=") < 1e-9);

    let o = invmean(dir.path(), &["demo-agm", "3", "3"]);
    assert!(stdout(&o).starts_with("K=3.0000000000000000e0\n"));

    let o = invmean(dir.path(), &["demo-agm", "1", "4", "--harmonic"]);
    assert!(stdout(&o).starts_with("K=2.0000000000000000e0\n"));

    for args in [
        ["demo-agm", "0", "1"],
        ["demo-agm", "-1", "1"],
        ["demo-agm", "2", "1"],
    ] {
        let o = invmean(dir.path(), &args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

use laqfuse::cli::Manifest;

fn laqfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laqfuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    laqfuse(args).status.code().expect("exit code")
}

fn gen(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec![
        "gen",
        "--dataset",
        d,
        "--sf",
        "1",
        "--features",
        "12",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    let out = laqfuse(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_records(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn gen_is_deterministic_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, &[]);
    gen(&b, &[]);
    let m = manifest(&a);
    assert_eq!(m, manifest(&b));
    let rows: Vec<usize> = m.tables.iter().map(|t| t.rows).collect();
    assert_eq!(rows, [3000, 2000, 2000, 2555]);
    for t in &m.tables {
        let bytes = fs::read(a.join(&t.file)).unwrap();
        assert_eq!(bytes, fs::read(b.join(&t.file)).unwrap());
        let hex: String = Sha256::digest(&bytes)
            .iter()
            .map(|x| format!("{x:02x}"))
            .collect();
        assert_eq!(hex, t.sha256, "{}", t.file);
        assert_eq!(bytes.iter().filter(|&&c| c == b'\n').count(), t.rows);
    }
    assert_eq!(
        fs::read(a.join("queries.json")).unwrap(),
        fs::read(b.join("queries.json")).unwrap()
    );
}

#[test]
fn query_reports_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    gen(&ds, &[]);
    let d = ds.to_str().unwrap();
    let report = tmp.path().join("q.csv");
    let r = report.to_str().unwrap();
    assert_eq!(
        code(&[
            "query",
            "--dataset",
            d,
            "--query",
            "g1",
            "--verify",
            "--out",
            r
        ]),
        0
    );
    let recs = csv_records(&report);
    assert_eq!(
        recs[0][..5],
        ["mode", "id", "repetitions", "mean_s", "stderr_s"]
    );
    assert_eq!(recs.len(), 4);
    for rec in &recs[1..] {
        assert_eq!(rec[0], "laq");
        assert_eq!(rec[2], "10");
        assert_eq!(rec.last().unwrap(), "true");
        assert_eq!(rec.len(), recs[0].len());
    }

    // Both engines hash to the same checksum.
    let oracle = tmp.path().join("o.csv");
    assert_eq!(
        code(&[
            "query",
            "--dataset",
            d,
            "--query",
            "Q42",
            "--engine",
            "oracle",
            "--repeats",
            "1",
            "--out",
            oracle.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        code(&[
            "query",
            "--dataset",
            d,
            "--query",
            "Q42",
            "--repeats",
            "1",
            "--out",
            r
        ]),
        0
    );
    let (o, l) = (csv_records(&oracle), csv_records(&report));
    let ck = recs[0].iter().position(|c| c == "checksum").unwrap();
    assert_eq!(o[1][ck], l[1][ck]);
    assert_eq!(o[1][0], "oracle");

    assert_eq!(code(&["query", "--dataset", d, "--query", "Q99"]), 2);
    assert_eq!(code(&["query", "--dataset", d, "--repeats", "0"]), 2);
    assert_eq!(code(&["query", "--dataset", d, "--engine", "duckdb"]), 2);
    assert_eq!(
        code(&[
            "query",
            "--dataset",
            tmp.path().join("missing").to_str().unwrap()
        ]),
        1
    );

    // A tampered table fails verification against the manifest.
    let part = ds.join("part.csv");
    let mut text = fs::read_to_string(&part).unwrap();
    text.replace_range(0..1, "9");
    fs::write(&part, text).unwrap();
    assert_eq!(
        code(&["query", "--dataset", d, "--query", "Q11", "--repeats", "1"]),
        3
    );
}

#[test]
fn pipeline_modes_share_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    gen(&ds, &["--dangling", "0.1"]);
    let d = ds.to_str().unwrap();
    let out = tmp.path().join("p.json");
    let o = out.to_str().unwrap();
    for model in [
        ["--model", "linear", "--outputs", "3"],
        ["--model", "tree", "--leaves", "24"],
    ] {
        let mut args = vec![
            "pipeline",
            "--dataset",
            d,
            "--repeats",
            "2",
            "--verify",
            "--cache",
            "--out",
            o,
        ];
        args.extend_from_slice(&model);
        let run = laqfuse(&args);
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        let rep: laqfuse::report::RunReport =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        let modes: Vec<&str> = rep.records.iter().map(|r| r.mode.as_str()).collect();
        assert_eq!(modes, ["laq", "laq-fused", "oracle"]);
        assert!(rep
            .records
            .iter()
            .all(|r| r.checksum == rep.records[0].checksum && r.repetitions == 2));
        assert!(rep.records.iter().all(|r| r.verified == Some(true)));
        let fused = &rep.records[1];
        assert!(fused.stages["prefuse"] > 0.0 && fused.stages["materialize"] == 0.0);
        assert!(
            rep.records[0].stages["prefuse"] == 0.0 && rep.records[0].stages["materialize"] > 0.0
        );
    }

    let tree = tmp.path().join("stump.tree");
    fs::write(&tree, "# one split\nN 0 3 0.5 1 2\nL 1 100\nL 2 200\n").unwrap();
    let t = tree.to_str().unwrap();
    assert_eq!(
        code(&[
            "pipeline",
            "--dataset",
            d,
            "--model",
            "tree",
            "--model-file",
            t,
            "--repeats",
            "1",
            "--verify"
        ]),
        0
    );
    fs::write(&tree, "N 0 3 0.5 1 1\nL 1 100\n").unwrap();
    assert_eq!(
        code(&[
            "pipeline",
            "--dataset",
            d,
            "--model",
            "tree",
            "--model-file",
            t,
            "--repeats",
            "1"
        ]),
        1
    );
    assert_eq!(
        code(&[
            "pipeline",
            "--dataset",
            d,
            "--mode",
            "nonfused",
            "--mem-cap-mb",
            "0"
        ]),
        4
    );
    assert_eq!(code(&["pipeline", "--dataset", d, "--mode", "sideways"]), 2);
}

#[test]
fn gen_capacity_and_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let d = ds.to_str().unwrap();
    assert_eq!(
        code(&["gen", "--dataset", d, "--sf", "4", "--mem-cap-mb", "0"]),
        4
    );

    let cfg = tmp.path().join("gen.conf");
    fs::write(&cfg, "# scale\nsf = 2\nfeatures=6\nssb=false\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&["gen", "--config", c, "--dataset", d]), 0);
    let m = manifest(&ds);
    assert_eq!((m.config.sf, m.config.feature_width), (2, 6));
    // Command-line flags win over the file.
    assert_eq!(
        code(&["gen", "--config", c, "--dataset", d, "--sf", "1"]),
        0
    );
    assert_eq!(manifest(&ds).config.sf, 1);
    fs::write(&cfg, "not a pair\n").unwrap();
    assert_eq!(code(&["gen", "--config", c, "--dataset", d]), 2);
}

#[test]
fn cost_point_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c.txt");
    let o = out.to_str().unwrap();
    assert_eq!(code(&["cost", "--k", "128", "--l", "2", "--out", o]), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("leading_term=64.000000"));
    assert!(text.contains("decision=fuse"));

    assert_eq!(
        code(&["cost", "--model", "tree", "--k", "4", "--l", "64", "--out", o]),
        0
    );
    assert!(fs::read_to_string(&out)
        .unwrap()
        .contains("decision=no-fuse"));
    assert_eq!(code(&["cost", "--k", "0"]), 1);
    assert_eq!(code(&["cost", "--r", ""]), 2);

    assert_eq!(code(&["cost", "--sweep", "--out", o]), 0);
    let rows: Vec<(f64, f64, f64)> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').take(3).map(|x| x.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    assert_eq!(rows.len(), 81);
    let at = |k: f64, l: f64| rows.iter().find(|r| r.0 == k && r.1 == l).unwrap().2;
    for &(k, l, r) in &rows {
        if l < 512.0 {
            assert!(at(k, l * 2.0) < r);
        }
        if k < 512.0 {
            assert!(at(k * 2.0, l) > r);
        }
    }
}

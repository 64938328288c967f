use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn netobliv(args: &[&str], dir: &Path, seed: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_netobliv"));
    c.args(args).current_dir(dir).env_remove("NETOBLIV_SEED");
    if let Some(s) = seed {
        c.env("NETOBLIV_SEED", s);
    }
    c.output().unwrap()
}

fn config(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const MM: &str = r#"{"algorithm":"matmul","n":[64],"p":[2,4,8],"sigma":[0,4],"instances":2}"#;

#[test]
fn run_writes_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "mm.json", MM);
    let o = netobliv(&["run", "--config", &cfg, "--out", "rep"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rep/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "algo,n,p,sigma,preset,H,D,alpha,gamma,bound_ratio,protocol");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("matmul,64,2,0,flat,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",standard")));
    assert!(dir.path().join("rep/report.json").exists());
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.json", r#"{"algorithm":"columnsort","n":[64],"p":[2,8],"sigma":[0,"1/2"],"presets":["flat","geometric(2)"]}"#);
    let a = netobliv(&["run", "--config", &cfg, "--out", "a"], dir.path(), Some("7"));
    let b = netobliv(&["run", "--config", &cfg, "--out", "b"], dir.path(), Some("7"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    for f in ["report.csv", "report.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn check_only_skips_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "mm.json", MM);
    let o = netobliv(&["run", "--config", &cfg, "--out", "rep", "--check-only"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 failed"));
    assert!(!dir.path().join("rep").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        r#"{"algorithm":"matmul","n":[64],"p":[]}"#,
        r#"{"algorithm":"matmul","n":[64],"p":[128]}"#,
        r#"{"algorithm":"matmul","n":[32],"p":[2]}"#,
        r#"{"algorithm":"matmul","n":[64],"p":[3]}"#,
        r#"{"algorithm":"matmul","n":[64],"p":[2],"sigma":[-1]}"#,
        r#"{"algorithm":"quicksort","n":[64],"p":[2]}"#,
        r#"{"algorithm":"fft","n":[64],"p":[4],"presets":[{"g":[1],"l":[0]}]}"#,
        r#"{"algorithm":"fft","n":[64],"p":[4],"presets":["steep"]}"#,
        "not json",
    ];
    for (k, body) in cases.iter().enumerate() {
        let cfg = config(&dir, &format!("bad{k}.json"), body);
        let o = netobliv(&["run", "--config", &cfg], dir.path(), None);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let o = netobliv(&["run", "--config", "missing.json"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let cfg = config(&dir, "mm.json", MM);
    let o = netobliv(&["run", "--config", &cfg, "--check-only"], dir.path(), Some("x"));
    assert_eq!(o.status.code(), Some(2));
    let o = netobliv(&["frobnicate"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn novel_protocol_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "n.json",
        r#"{"algorithm":"fft","n":[64],"p":[4,16],"protocol":"novel","prefix":"geometric","presets":["flat","geometric(2)"],"instances":2}"#,
    );
    let o = netobliv(&["run", "--config", &cfg, "--out", "."], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",novel")));
}

#[test]
fn aware_broadcast_reruns_per_sigma() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "b.json", r#"{"algorithm":"broadcast_aware","n":[256],"p":[256],"sigma":[0,16,256]}"#);
    let o = netobliv(&["run", "--config", &cfg, "--out", "."], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let h: Vec<u64> = csv.lines().skip(1).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert_eq!(h.len(), 3);
    assert!(h.windows(2).all(|w| w[0] < w[1]), "{h:?}");
}

#[test]
fn verify_shipped_suite_passes() {
    let dir = TempDir::new().unwrap();
    for body in [
        r#"{"algorithm":"matmul","n":[64],"p":[2,8],"presets":["flat","geometric(2)"]}"#,
        r#"{"algorithm":"stencil_1d","n":[64],"p":[4,16]}"#,
        r#"{"algorithm":"stencil_2d","n":[8],"p":[4,16],"prefix":"geometric"}"#,
        r#"{"algorithm":"matmul_space_efficient","n":[64],"p":[4]}"#,
    ] {
        let cfg = config(&dir, "v.json", body);
        let o = netobliv(&["verify", "--config", &cfg, "--out", "v"], dir.path(), None);
        let out = stdout(&o);
        assert_eq!(o.status.code(), Some(0), "{body}\n{out}");
        assert!(!out.contains("FAIL"));
        for prop in ["oracle", "static", "cluster_constraint", "lemma1", "wiseness", "fullness", "lemma6", "theorem1_preconditions"] {
            assert!(out.contains(&format!("PASS {prop} ")), "{prop} missing");
        }
    }
    assert!(dir.path().join("v/verify.json").exists());
}

#[test]
fn verify_flags_corrupted_trace() {
    let dir = TempDir::new().unwrap();
    // A 1-superstep may not leave its half of the machine.
    std::fs::write(
        dir.path().join("bad.jsonl"),
        "{\"seq\":0,\"label\":0,\"pairs\":[[0,2,false]]}\n{\"seq\":1,\"label\":1,\"pairs\":[[0,3,false]]}\n",
    )
    .unwrap();
    let cfg = config(&dir, "t.json", r#"{"trace":{"path":"bad.jsonl","v":4,"n":4}}"#);
    let o = netobliv(&["verify", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL cluster_constraint"));

    std::fs::write(dir.path().join("good.jsonl"), "{\"seq\":0,\"label\":0,\"pairs\":[[0,2,false]]}\n").unwrap();
    let cfg = config(&dir, "g.json", r#"{"trace":{"path":"good.jsonl","v":4,"n":4}}"#);
    let o = netobliv(&["verify", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    std::fs::write(dir.path().join("junk.jsonl"), "{\"seq\":0,\"label\":5,\"pairs\":[]}\n").unwrap();
    let cfg = config(&dir, "j.json", r#"{"trace":{"path":"junk.jsonl","v":4,"n":4}}"#);
    let o = netobliv(&["verify", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_rejects_increasing_g() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "g.json",
        r#"{"algorithm":"fft","n":[16],"p":[4],"presets":["flat",{"name":"rising","g":[1,2],"l":[0,0]}]}"#,
    );
    let o = netobliv(&["verify", "--config", &cfg], dir.path(), None);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.contains("FAIL theorem1_preconditions [fft n=16 p=4 sigma=0 preset=rising]"), "{out}");
    assert!(out.contains("PASS theorem1_preconditions [fft n=16 p=4 sigma=0 preset=flat]"));
}

fn gap_rows(dir: &TempDir, body: &str) -> Vec<Vec<String>> {
    let cfg = config(dir, "gap.json", body);
    let o = netobliv(&["gap", "--config", &cfg, "--out", "g"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("g/gap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "sigma,h_oblivious,h_aware,ratio,gap,lower_bound_shape");
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn gap_table() {
    let dir = TempDir::new().unwrap();
    let rows = gap_rows(&dir, r#"{"gap":{"p":256,"sigma1":0,"sigma2":256}}"#);
    let gap: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(rows.first().unwrap()[0], "0");
    assert_eq!(rows.last().unwrap()[0], "256");
    assert!(gap.windows(2).all(|w| w[0] <= w[1]));

    let rows = gap_rows(&dir, r#"{"gap":{"p":256,"sigma1":8,"sigma2":8}}"#);
    assert_eq!(rows.len(), 1);

    let rows = gap_rows(&dir, r#"{"gap":{"p":2,"sigma1":0,"sigma2":64}}"#);
    for r in rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 1.0, "{r:?}");
    }

    let cfg = config(&dir, "bad.json", r#"{"gap":{"p":256,"sigma1":16,"sigma2":2}}"#);
    assert_eq!(netobliv(&["gap", "--config", &cfg], dir.path(), None).status.code(), Some(2));
    let cfg = config(&dir, "none.json", r#"{"algorithm":"fft"}"#);
    assert_eq!(netobliv(&["gap", "--config", &cfg], dir.path(), None).status.code(), Some(2));
}

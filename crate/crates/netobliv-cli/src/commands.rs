//! The `run`, `verify` and `gap` commands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use netobliv::algorithms::bounds;
use netobliv::algorithms::broadcast::{gap_ratio, pow2_grid, BroadcastOblivious, GapReport};
use netobliv::folding::{all_profiles, profile, DegreeProfile};
use netobliv::machine::{log2_exact, read_jsonl, run, same_structure, validate_cluster_constraint, Trace};
use netobliv::metrics::*;
use netobliv::problem::Gen;
use netobliv::protocol::{check_lemma6, Lemma6Bounds};
use num::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::config::{AlgoId, ProtocolKind, SweepConfig};
use crate::suite::{check_size, execute, Case, Request};
use crate::CliError;

/// One CSV row; column order is the report schema.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub algo: String,
    pub n: usize,
    pub p: usize,
    pub sigma: String,
    pub preset: String,
    #[serde(rename = "H")]
    pub h: String,
    #[serde(rename = "D")]
    pub d: String,
    pub alpha: String,
    pub gamma: String,
    pub bound_ratio: String,
    pub protocol: String,
}

#[derive(Serialize)]
struct RunReport<'a> {
    algorithm: &'a str,
    seed: u64,
    instances: usize,
    dummies: bool,
    protocol: String,
    oracles: Vec<OracleLine>,
    rows: &'a [Row],
}

#[derive(Serialize)]
struct OracleLine {
    n: usize,
    sigma: Option<String>,
    instance: usize,
    p: Option<usize>,
    ok: bool,
}

fn out_dir(cfg: &SweepConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", path.display()))
}

fn ratio_string(x: &Option<Q>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// The `sigma` values that need separate runs: each one for the aware
/// broadcast, a single shared run otherwise.
fn run_sigmas(algo: AlgoId, grid: &[Q]) -> Vec<Q> {
    if algo == AlgoId::BroadcastAware {
        grid.to_vec()
    } else {
        vec![Q::zero()]
    }
}

struct Point {
    n: usize,
    sigma: Q,
    cases: Vec<Case>,
}

fn gather(cfg: &SweepConfig, algo: AlgoId, novel: bool) -> Result<Vec<Point>, CliError> {
    let seed = cfg.seed()?;
    let grid: Vec<Q> = cfg.sigma.iter().map(|r| r.0.clone()).collect();
    let mut points = Vec::new();
    for &n in &cfg.n {
        check_size(algo, n)?;
    }
    for &n in &cfg.n {
        for sigma in run_sigmas(algo, &grid) {
            let req = Request {
                algo,
                n,
                instances: cfg.instances,
                seed,
                dummies: cfg.dummies,
                sigma: &sigma,
                novel: if novel { &cfg.p } else { &[] },
                strategy: cfg.prefix,
            };
            let cases = execute(&req)?;
            points.push(Point { n, sigma, cases });
        }
    }
    Ok(points)
}

fn oracle_lines(algo: AlgoId, points: &[Point]) -> Vec<OracleLine> {
    let mut out = Vec::new();
    for pt in points {
        let sigma = (algo == AlgoId::BroadcastAware).then(|| pt.sigma.to_string());
        for (k, c) in pt.cases.iter().enumerate() {
            out.push(OracleLine { n: pt.n, sigma: sigma.clone(), instance: k, p: None, ok: c.ok });
            for nr in &c.novel {
                out.push(OracleLine { n: pt.n, sigma: sigma.clone(), instance: k, p: Some(nr.p), ok: nr.matches });
            }
        }
    }
    out
}

fn describe(algo: AlgoId, l: &OracleLine) -> String {
    let mut s = format!("{algo} n={} instance {}", l.n, l.instance);
    if let Some(sig) = &l.sigma {
        s += &format!(" sigma={sig}");
    }
    match l.p {
        Some(p) => s + &format!(" p={p}: novel protocol output differs"),
        None => s + ": output differs from oracle",
    }
}

pub fn cmd_run(cfg: &SweepConfig, out: Option<&Path>, check_only: bool) -> Result<(), CliError> {
    let algo = cfg.validate_sweep()?;
    let novel = cfg.protocol == ProtocolKind::Novel;
    let points = gather(cfg, algo, novel)?;
    let oracles = oracle_lines(algo, &points);
    let failures: Vec<String> = oracles.iter().filter(|l| !l.ok).map(|l| describe(algo, l)).collect();
    for f in &failures {
        eprintln!("oracle mismatch: {f}");
    }
    if check_only {
        println!("{} cases checked, {} failed", oracles.len(), failures.len());
        return match failures.first() {
            None => Ok(()),
            Some(_) => Err(CliError::Failed(failures.join("; "))),
        };
    }
    let rows = sweep_rows(cfg, algo, &points)?;
    let dir = out_dir(cfg, out);
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let csv_path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::Usage(format!("{}: {e}", csv_path.display())))?;
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Usage(format!("{}: {e}", csv_path.display())))?;
    }
    w.flush().map_err(io(&csv_path))?;
    let json_path = dir.join("report.json");
    let report = RunReport {
        algorithm: algo.name(),
        seed: cfg.seed()?,
        instances: cfg.instances,
        dummies: cfg.dummies,
        protocol: cfg.protocol.to_string(),
        oracles,
        rows: &rows,
    };
    let f = File::create(&json_path).map_err(io(&json_path))?;
    serde_json::to_writer_pretty(f, &report).map_err(|e| CliError::Usage(format!("{}: {e}", json_path.display())))?;
    println!("{} rows written to {}", rows.len(), csv_path.display());
    match failures.first() {
        None => Ok(()),
        Some(_) => Err(CliError::Failed(failures.join("; "))),
    }
}

fn metric_err(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn sweep_rows(cfg: &SweepConfig, algo: AlgoId, points: &[Point]) -> Result<Vec<Row>, CliError> {
    let mut keyed: BTreeMap<(usize, usize, Q, String), Row> = BTreeMap::new();
    for pt in points {
        let profiles: Vec<Vec<DegreeProfile>> = pt.cases.iter().map(|c| all_profiles(&c.trace)).collect();
        for &p in &cfg.p {
            let lp = log2_exact(p) as usize;
            let upto = &profiles[0][..=lp];
            let alpha = wiseness_from_profiles(upto, p).ok();
            let gamma = fullness_from_profiles(upto, p).ok();
            for sig in &cfg.sigma {
                let sigma = &sig.0;
                if algo == AlgoId::BroadcastAware && *sigma != pt.sigma {
                    continue;
                }
                let eval = EvalParams::new(p, sigma.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
                for preset in &cfg.presets {
                    let params = preset.params(p, sigma).map_err(|e| CliError::Usage(format!("{}: {e}", preset.name())))?;
                    let (mut h, mut d) = (Q::zero(), Q::zero());
                    for (k, c) in pt.cases.iter().enumerate() {
                        let (hk, dk) = match cfg.protocol {
                            ProtocolKind::Standard => {
                                let prof = &profiles[k][lp];
                                (comm_complexity(prof, &eval).map_err(metric_err)?, comm_time(prof, &params).map_err(metric_err)?)
                            }
                            ProtocolKind::Novel => {
                                let nr = c.novel.iter().find(|r| r.p == p).expect("protocol run for every p");
                                let t = nr.protocol.as_trace().map_err(metric_err)?;
                                let prof = profile(&t, p).map_err(metric_err)?;
                                (comm_complexity(&prof, &eval).map_err(metric_err)?, nr.protocol.comm_time(&params).map_err(metric_err)?)
                            }
                        };
                        h = h.max(hk);
                        d = d.max(dk);
                    }
                    let bound = bounds::for_problem(algo.name(), pt.n, p, sigma.to_f64().unwrap_or(f64::NAN));
                    let bound_ratio = match bound {
                        Some(b) if b > 0.0 => format!("{:.6}", bound_ratio(&h, b)),
                        _ => String::new(),
                    };
                    let row = Row {
                        algo: algo.name().into(),
                        n: pt.n,
                        p,
                        sigma: sigma.to_string(),
                        preset: preset.name(),
                        h: h.to_string(),
                        d: d.to_string(),
                        alpha: ratio_string(&alpha),
                        gamma: ratio_string(&gamma),
                        bound_ratio,
                        protocol: cfg.protocol.to_string(),
                    };
                    keyed.insert((pt.n, p, sigma.clone(), preset.name()), row);
                }
            }
        }
    }
    Ok(keyed.into_values().collect())
}

/// One line of the `verify` report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub property: String,
    pub scope: String,
    pub ok: bool,
    pub detail: String,
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, property: &str, scope: String, ok: bool, detail: String) {
        println!("{} {property} [{scope}] {detail}", if ok { "PASS" } else { "FAIL" });
        self.0.push(Check { property: property.into(), scope, ok, detail });
    }
}

/// Cluster constraint and folding inequality on one trace.
fn trace_checks(checks: &mut Checks, scope: &str, traces: &[&Trace], ps: &[usize]) {
    let mut bad = Vec::new();
    for (k, t) in traces.iter().enumerate() {
        let v = validate_cluster_constraint(t);
        if let Some(first) = v.first() {
            bad.push(format!("instance {k}: {} violations, first {first:?}", v.len()));
        }
    }
    checks.add("cluster_constraint", scope.into(), bad.is_empty(), bad.join("; "));
    let profiles: Vec<Vec<DegreeProfile>> = traces.iter().map(|t| all_profiles(t)).collect();
    for &p in ps {
        let ok = profiles.iter().all(|pr| lemma1_from_profiles(pr, p));
        checks.add("lemma1", format!("{scope} p={p}"), ok, String::new());
    }
}

pub fn cmd_verify(cfg: &SweepConfig, out: Option<&Path>) -> Result<(), CliError> {
    let mut checks = Checks(Vec::new());
    if let Some(tf) = &cfg.trace {
        let f = File::open(&tf.path).map_err(io(&tf.path))?;
        let scope = format!("trace {}", tf.path.display());
        match read_jsonl(tf.v, tf.n, BufReader::new(f)) {
            Err(e) => checks.add("trace_readable", scope, false, e.to_string()),
            Ok(t) => {
                let ps: Vec<usize> = if cfg.p.is_empty() {
                    (1..=log2_exact(t.v)).map(|j| 1usize << j).collect()
                } else {
                    cfg.p.iter().copied().filter(|&p| p <= t.v).collect()
                };
                trace_checks(&mut checks, &scope, &[&t], &ps);
            }
        }
    }
    if cfg.algorithm.is_some() || cfg.trace.is_none() {
        verify_algorithm(cfg, &mut checks)?;
    }
    if let Some(dir) = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()) {
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join("verify.json");
        let f = File::create(&path).map_err(io(&path))?;
        serde_json::to_writer_pretty(f, &checks.0).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    let failed: Vec<String> = checks.0.iter().filter(|c| !c.ok).map(|c| format!("{} [{}]", c.property, c.scope)).collect();
    println!("{} checks, {} failed", checks.0.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed.join("; ")))
    }
}

fn verify_algorithm(cfg: &SweepConfig, checks: &mut Checks) -> Result<(), CliError> {
    let algo = cfg.validate_sweep()?;
    let points = gather(cfg, algo, true)?;
    for pt in &points {
        let mut scope = format!("{algo} n={}", pt.n);
        if algo == AlgoId::BroadcastAware {
            scope += &format!(" sigma={}", pt.sigma);
        }
        let bad: Vec<String> = pt.cases.iter().enumerate().filter(|(_, c)| !c.ok).map(|(k, _)| format!("instance {k}")).collect();
        checks.add("oracle", scope.clone(), bad.is_empty(), bad.join(", "));
        let traces: Vec<Trace> = pt.cases.iter().map(|c| c.trace.clone()).collect();
        checks.add("static", scope.clone(), same_structure(&traces), String::new());
        let refs: Vec<&Trace> = traces.iter().collect();
        trace_checks(checks, &scope, &refs, &cfg.p);

        let profiles = all_profiles(&traces[0]);
        for &p in &cfg.p {
            let upto = &profiles[..=log2_exact(p) as usize];
            let at = format!("{scope} p={p}");
            match wiseness_from_profiles(upto, p) {
                Ok(a) => checks.add("wiseness", at.clone(), a.is_positive() && a <= one(), format!("alpha={a}")),
                Err(e) => checks.add("wiseness", at.clone(), true, format!("undefined: {e}")),
            }
            match fullness_from_profiles(upto, p) {
                Ok(g) => checks.add("fullness", at.clone(), g.is_positive(), format!("gamma={g}")),
                Err(e) => checks.add("fullness", at.clone(), true, format!("undefined: {e}")),
            }
            let mut same = true;
            let mut worst = None;
            for c in &pt.cases {
                let nr = c.novel.iter().find(|r| r.p == p).expect("protocol run for every p");
                same &= nr.matches;
                let r = check_lemma6(&nr.protocol, &c.trace, &Lemma6Bounds::default()).map_err(metric_err)?;
                if worst.as_ref().is_none_or(|w: &netobliv::protocol::Lemma6Report| w.ok && (!r.ok || r.c2 > w.c2)) {
                    worst = Some(r);
                }
            }
            checks.add("protocol_output", at.clone(), same, String::new());
            if let Some(r) = worst {
                checks.add("lemma6", at.clone(), r.ok, format!("c1={} c2={:.3} c3={:.3} c4={}", r.c1, r.c2, r.c3, r.c4));
            }
            let range = if algo == AlgoId::Matmul {
                SigmaRange::matmul_corollary(pt.n, p)
            } else {
                SigmaRange::unbounded(levels(p))
            };
            for sig in &cfg.sigma {
                for preset in &cfg.presets {
                    let params = preset.params(p, &sig.0).map_err(|e| CliError::Usage(format!("{}: {e}", preset.name())))?;
                    let t = check_theorem1_preconditions(&params, &range).map_err(metric_err)?;
                    checks.add(
                        "theorem1_preconditions",
                        format!("{at} sigma={} preset={}", sig.0, preset.name()),
                        t.ok,
                        format!("g non-increasing={} l/g non-increasing={} range [{}, {}]", t.g_non_increasing, t.ratio_non_increasing, t.lower, t.upper),
                    );
                }
            }
        }
    }
    Ok(())
}

pub fn cmd_gap(cfg: &SweepConfig, out: Option<&Path>) -> Result<(), CliError> {
    let gap = cfg.gap.as_ref().ok_or_else(|| CliError::Usage("no gap section in config".into()))?;
    if gap.p < 2 || !gap.p.is_power_of_two() {
        return Err(CliError::Usage(format!("p = {} is not a power of two >= 2", gap.p)));
    }
    if gap.sigma1 > gap.sigma2 {
        return Err(CliError::Usage(format!("sigma1 = {} exceeds sigma2 = {}", gap.sigma1, gap.sigma2)));
    }
    let grid: Vec<Q> = match &gap.grid {
        Some(g) => {
            let lo = Q::from_integer(gap.sigma1.into());
            let hi = Q::from_integer(gap.sigma2.into());
            if let Some(x) = g.iter().find(|x| x.0 < lo || x.0 > hi) {
                return Err(CliError::Usage(format!("grid point {} outside [sigma1, sigma2]", x.0)));
            }
            g.iter().map(|x| x.0.clone()).collect()
        }
        None => pow2_grid(gap.sigma1, gap.sigma2),
    };
    let input = Gen::new(cfg.seed()?).broadcast(gap.p);
    let (_, trace) = run(&BroadcastOblivious, &input).map_err(metric_err)?;
    let report = gap_ratio(&trace, gap.p, &grid).map_err(|e| CliError::Usage(e.to_string()))?;
    print_gap(&report);
    if let Some(dir) = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()) {
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join("gap.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for r in &report.rows {
            w.serialize(r).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(io(&path))?;
    }
    Ok(())
}

fn print_gap(r: &GapReport) {
    println!("p = {}", r.p);
    println!("{:>10} {:>12} {:>12} {:>8} {:>8} {:>8}", "sigma", "H_obl", "H_aware", "ratio", "gap", "lb");
    for row in &r.rows {
        println!(
            "{:>10} {:>12} {:>12} {:>8.3} {:>8.3} {:>8.3}",
            row.sigma, row.h_oblivious, row.h_aware, row.ratio, row.gap, row.lower_bound_shape
        );
    }
    println!("gap = {:.3}", r.gap);
}

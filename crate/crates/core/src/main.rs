use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::{BigInt, BigUint};
use serde_json::{json, Value};

use cubesum::arith::{cubefree_part, factorize, CubefreeK};
use cubesum::curves::{conductor, CurveForm, CurveModel, CurvePoint};
use cubesum::descent::selmer_rank_bound;
use cubesum::enumerate::{enumerate_candidates, enumerate_from, Candidate, Measure};
use cubesum::heights::{certify_independent, Verdict, DEFAULT_TOL};
use cubesum::ledger::{
    append, fingerprint, CandidateRecord, Checkpoint, Ledger, PointRecord, Provenance, Status,
};
use cubesum::mestre::{cache_dir_from_env, mestre_score, score_series, ApTables};
use cubesum::pointsearch::{search, CurveChoice, SearchTask};
use cubesum::surfaces::{scan_box_resumable, ScanCursor, ScanFilters, SurfaceId};
use cubesum::verify::{transfer, verify_paper, Direction, VerifyOptions};
use cubesum::{Error, Result};

#[derive(Parser)]
#[command(name = "cubesum", version, about = "Rational points and ranks of x^3 + y^3 = k")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Factor an integer and split off its cube part.
    Factor { n: BigInt },
    /// Rows, columns, rank and the rank bound from the descent matrix.
    DescentBound { k: String },
    /// Conductor of E'_k.
    Conductor { k: String },
    /// Mestre log-score of one or more k.
    Mestre {
        #[arg(required = true)]
        k: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        primes_up_to: u64,
        /// Emit `p,log_score` rows instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Divisor point search on E_k and E'_k.
    Search {
        k: String,
        #[arg(long, default_value_t = 50)]
        dmax: u64,
        #[arg(long, value_enum, default_value_t = CurveArg::Both)]
        curve: CurveArg,
        #[arg(long)]
        abudget: Option<BigUint>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan a parameter box on one of the cubic surfaces.
    Scan(ScanArgs),
    /// Enumerate k whose descent bound reaches a target.
    Enumerate(EnumArgs),
    /// Certify independence of points on E'_k.
    Certify {
        #[arg(long)]
        k: String,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Check the shipped record tables and point lists.
    VerifyPaper {
        /// Skip height certificates.
        #[arg(long)]
        no_certify: bool,
        #[arg(long, default_value_t = 4)]
        minimality_up_to: usize,
        #[arg(long, default_value_t = 60)]
        dmax: u64,
        /// Write the verified records as a ledger.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Move a point across the 3-isogeny.
    Transfer {
        #[arg(long)]
        k: String,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Model tag of the input point.
        #[arg(long, default_value = "minimal")]
        model: String,
        #[arg(long)]
        direction: Direction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveArg {
    Ek,
    Ekprime,
    Both,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    surface: SurfaceId,
    #[arg(long = "box")]
    bound: i64,
    #[arg(long)]
    min_selmer: Option<usize>,
    #[arg(long)]
    max_k: Option<BigUint>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "measure", required = true, multiple = false)]
struct MeasureArgs {
    #[arg(long, group = "measure")]
    max_k: Option<u128>,
    #[arg(long, group = "measure")]
    max_conductor: Option<u128>,
}

#[derive(Args)]
struct EnumArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 0)]
    min_selmer: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn k_arg(s: &str) -> Result<CubefreeK> {
    CubefreeK::parse(s)
}

fn emit(v: &Value, pretty: bool) {
    if pretty {
        print!("{}", render(v, 0));
    } else {
        println!("{v}");
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Key/value layout for objects, one row per element for arrays of objects.
fn render(v: &Value, indent: usize) -> String {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(m) => {
            let w = m.keys().map(|k| k.len()).max().unwrap_or(0);
            let mut s = String::new();
            for (k, x) in m {
                match x {
                    Value::Object(_) | Value::Array(_) if !is_flat_array(x) => {
                        s += &format!("{pad}{k}:\n{}", render(x, indent + 2));
                    }
                    _ => s += &format!("{pad}{k:<w$}  {}\n", flat(x)),
                }
            }
            s
        }
        Value::Array(a) if a.iter().all(Value::is_object) && !a.is_empty() => {
            let cols: Vec<String> = a[0].as_object().unwrap().keys().cloned().collect();
            let rows: Vec<Vec<String>> = a
                .iter()
                .map(|r| cols.iter().map(|c| flat(r.get(c).unwrap_or(&Value::Null))).collect())
                .collect();
            let widths: Vec<usize> = (0..cols.len())
                .map(|i| rows.iter().map(|r| r[i].len()).chain([cols[i].len()]).max().unwrap())
                .collect();
            let line = |cells: &[String]| {
                let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                format!("{pad}{}\n", parts.join("  ").trim_end())
            };
            let mut s = line(&cols);
            for r in &rows {
                s += &line(r);
            }
            s
        }
        Value::Array(a) => a.iter().map(|x| format!("{pad}{}\n", flat(x))).collect(),
        other => format!("{pad}{}\n", scalar(other)),
    }
}

fn is_flat_array(v: &Value) -> bool {
    matches!(v, Value::Array(a) if a.iter().all(|x| !x.is_object()) && a.len() <= 16)
}

fn flat(v: &Value) -> String {
    match v {
        Value::Array(a) => format!("[{}]", a.iter().map(flat).collect::<Vec<_>>().join(", ")),
        Value::Object(_) => v.to_string(),
        other => scalar(other),
    }
}

fn point_record(p: &CurvePoint) -> PointRecord {
    let (x, y) = match p.xy() {
        Some((x, y)) => (cubesum::curves::fmt_rational(x), cubesum::curves::fmt_rational(y)),
        None => ("inf".into(), "inf".into()),
    };
    PointRecord {
        model: p.model().form().tag().into(),
        x,
        y,
    }
}

fn model_for(k: &CubefreeK, tag: &str) -> Result<Arc<CurveModel>> {
    let form = if tag == "minimal" {
        cubesum::curves::minimal_model(k).form()
    } else {
        CurveForm::from_tag(tag)?
    };
    Ok(Arc::new(CurveModel::new(k.clone(), form)?))
}

fn factor_cmd(n: &BigInt) -> Result<Value> {
    let f = factorize(n.magnitude())?;
    let part = cubefree_part(n)?;
    Ok(json!({
        "n": n.to_string(),
        "factors": f.factors().iter().map(|(p, e)| json!([p.to_string(), e])).collect::<Vec<_>>(),
        "cubefree_part": part.k.to_string(),
        "cube_root": part.d.to_string(),
    }))
}

fn mestre_cmd(ks: &[String], x: u64, csv: bool, pretty: bool) -> Result<()> {
    let tables = ApTables::load_or_build(x, cache_dir_from_env().as_deref())?;
    let ks: Vec<CubefreeK> = ks.iter().map(|s| k_arg(s)).collect::<Result<_>>()?;
    if csv {
        println!("k,p,log_score");
        for k in &ks {
            for (p, s) in score_series(k, x, &tables) {
                println!("{k},{p},{s}");
            }
        }
        return Ok(());
    }
    let scores: Vec<Value> = ks
        .iter()
        .map(|k| serde_json::to_value(mestre_score(k, x, &tables)))
        .collect::<std::result::Result<_, _>>()?;
    emit(&Value::Array(scores), pretty);
    Ok(())
}

fn search_cmd(k: &str, dmax: u64, curve: CurveArg, abudget: Option<BigUint>, out: Option<&Path>, pretty: bool) -> Result<()> {
    let mut task = SearchTask::new(k_arg(k)?, dmax);
    task.curves = match curve {
        CurveArg::Ek => CurveChoice::Ek,
        CurveArg::Ekprime => CurveChoice::EkPrime,
        CurveArg::Both => CurveChoice::Both,
    };
    if let Some(b) = abudget {
        task.a_budget = b;
    }
    let res = search(&task)?;
    let lines: Vec<Value> = res
        .points
        .iter()
        .map(|p| {
            let r = point_record(&p.minimal);
            let cubic = point_record(&p.cubic_point());
            json!({"model": r.model, "x": r.x, "y": r.y, "curve": p.curve, "d": p.d,
                   "cubic": {"model": cubic.model, "x": cubic.x, "y": cubic.y}})
        })
        .collect();
    if let Some(path) = out {
        let mut f = fs::File::create(path)?;
        for l in &lines {
            writeln!(f, "{l}")?;
        }
    }
    emit(
        &json!({"k": k, "dmax": dmax, "points": lines.len(), "cells": res.cells,
                "filtered": res.filtered, "truncated": res.truncated,
                "found": if out.is_some() { Value::Null } else { Value::Array(lines) }}),
        pretty,
    );
    Ok(())
}

fn scan_cmd(a: &ScanArgs, pretty: bool) -> Result<()> {
    let filters = ScanFilters {
        min_selmer: a.min_selmer,
        max_k: a.max_k.clone(),
        max_k_digits: None,
    };
    let params = json!({"surface": a.surface.to_string(), "box": a.bound, "min_selmer": a.min_selmer,
                        "max_k": a.max_k.as_ref().map(|m| m.to_string())});
    let fp = fingerprint("scan", &params);
    let mut cursor = ScanCursor { next_slab: 0 };
    if let Some(ck) = a.resume.as_deref().filter(|p| p.exists()) {
        cursor = serde_json::from_value(Checkpoint::load(ck, &fp)?.cursor)?;
    } else if a.out.exists() {
        fs::remove_file(&a.out)?;
    }
    let mut written = 0u64;
    let stats = scan_box_resumable(a.surface, a.bound, &filters, cursor, 4, |samples, next| {
        for s in samples {
            let k = s.k.clone().expect("non-degenerate");
            let (p1, p2) = s.pair.clone().expect("non-degenerate");
            let rec = CandidateRecord {
                k: k.to_string(),
                factors: k.factors().iter().map(|(p, e)| (p.to_string(), *e)).collect(),
                selmer_bound: Some(selmer_rank_bound(&k)?.bound),
                mestre: None,
                points: vec![point_record(&p1), point_record(&p2)],
                rank_lb: None,
                status: Status::Candidate,
                provenance: Provenance::now("scan", json!({"triple": s.triple.params, "surface": a.surface.to_string()})),
            };
            append(&a.out, &rec)?;
            written += 1;
        }
        if let Some(ck) = &a.resume {
            Checkpoint::new(fp.clone(), serde_json::to_value(next)?).save(ck)?;
        }
        Ok(true)
    })?;
    emit(&json!({"written": written, "stats": stats, "out": a.out.display().to_string()}), pretty);
    Ok(())
}

fn candidate_record(c: &Candidate, params: &Value) -> CandidateRecord {
    CandidateRecord {
        k: c.k.to_string(),
        factors: c.factors.iter().map(|(p, e)| (p.to_string(), *e)).collect(),
        selmer_bound: Some(c.selmer_bound),
        mestre: None,
        points: vec![],
        rank_lb: None,
        status: Status::Candidate,
        provenance: Provenance::now("enumerate", params.clone()),
    }
}

/// Without `--resume` the branches run in parallel; with it the walk is
/// sequential and the DFS path is saved every few hundred nodes.
fn enumerate_cmd(a: &EnumArgs, pretty: bool) -> Result<()> {
    let measure = match (a.measure.max_k, a.measure.max_conductor) {
        (Some(k), None) => Measure::MaxK(k),
        (None, Some(n)) => Measure::MaxConductor(n),
        _ => unreachable!("clap enforces one measure"),
    };
    let params = json!({"measure": measure, "min_selmer": a.min_selmer});
    let found = match &a.resume {
        None => {
            let c = enumerate_candidates(measure, a.min_selmer)?;
            let l = Ledger {
                records: c.iter().map(|c| candidate_record(c, &params)).collect(),
            };
            l.write(&a.out)?;
            c.len()
        }
        Some(ck) => {
            let fp = fingerprint("enumerate", &params);
            let mut cursor: Option<Vec<(u64, u32)>> = None;
            if ck.exists() {
                let c = Checkpoint::load(ck, &fp)?;
                if c.cursor == json!("done") {
                    return finish_enumerate(a, pretty);
                }
                cursor = serde_json::from_value(c.cursor)?;
            } else if a.out.exists() {
                fs::remove_file(&a.out)?;
            }
            let mut since = 0u32;
            let mut err: Option<Error> = None;
            enumerate_from(measure, a.min_selmer, cursor, |state, hit| {
                let step = || -> Result<()> {
                    if let Some(c) = hit {
                        append(&a.out, &candidate_record(&c, &params))?;
                    }
                    since += 1;
                    if since >= 256 {
                        since = 0;
                        Checkpoint::new(fp.clone(), json!(state.chosen)).save(ck)?;
                    }
                    Ok(())
                };
                match step() {
                    Ok(()) => true,
                    Err(e) => {
                        err = Some(e);
                        false
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            Checkpoint::new(fp, json!("done")).save(ck)?;
            return finish_enumerate(a, pretty);
        }
    };
    emit(&json!({"candidates": found, "out": a.out.display().to_string()}), pretty);
    Ok(())
}

/// Dedups and sorts a resumable run's output.
fn finish_enumerate(a: &EnumArgs, pretty: bool) -> Result<()> {
    let l = if a.out.exists() { Ledger::read(&a.out)? } else { Ledger::default() };
    let merged = Ledger::merge([&l])?;
    merged.write(&a.out)?;
    emit(&json!({"candidates": merged.records.len(), "out": a.out.display().to_string()}), pretty);
    Ok(())
}

fn certify_cmd(k: &str, points: &Path, tol: f64, pretty: bool) -> Result<bool> {
    let k = k_arg(k)?;
    let text = fs::read_to_string(points)?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: PointRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            msg: e.to_string(),
        })?;
        pts.push(CurvePoint::parse(model_for(&k, &r.model)?, &r.x, &r.y)?);
    }
    let cert = certify_independent(&pts, tol)?;
    emit(&serde_json::to_value(&cert)?, pretty);
    Ok(cert.verdict == Verdict::Independent)
}

fn verify_cmd(no_certify: bool, up_to: usize, dmax: u64, ledger: Option<&Path>, pretty: bool) -> Result<bool> {
    let opts = VerifyOptions {
        certify: !no_certify,
        minimality_up_to: up_to,
        d_max: dmax,
        tol: DEFAULT_TOL,
    };
    let report = verify_paper(&opts)?;
    if let Some(path) = ledger {
        report.ledger.write(path)?;
    }
    let mut v = serde_json::to_value(&report)?;
    v["passed"] = json!(report.passed());
    if pretty {
        v = json!({"passed": report.passed(), "checks": v["checks"], "discrepancies": report.discrepancies()});
    }
    emit(&v, pretty);
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let pretty = cli.pretty;
    match cli.cmd {
        Cmd::Factor { n } => emit(&factor_cmd(&n)?, pretty),
        Cmd::DescentBound { k } => emit(&serde_json::to_value(selmer_rank_bound(&k_arg(&k)?)?)?, pretty),
        Cmd::Conductor { k } => emit(&serde_json::to_value(conductor(&k_arg(&k)?))?, pretty),
        Cmd::Mestre { k, primes_up_to, csv } => mestre_cmd(&k, primes_up_to, csv, pretty)?,
        Cmd::Search {
            k,
            dmax,
            curve,
            abudget,
            out,
        } => search_cmd(&k, dmax, curve, abudget, out.as_deref(), pretty)?,
        Cmd::Scan(a) => scan_cmd(&a, pretty)?,
        Cmd::Enumerate(a) => enumerate_cmd(&a, pretty)?,
        Cmd::Certify { k, points, tol } => return certify_cmd(&k, &points, tol, pretty),
        Cmd::VerifyPaper {
            no_certify,
            minimality_up_to,
            dmax,
            ledger,
        } => return verify_cmd(no_certify, minimality_up_to, dmax, ledger.as_deref(), pretty),
        Cmd::Transfer {
            k,
            x,
            y,
            model,
            direction,
        } => {
            let k = k_arg(&k)?;
            let p = CurvePoint::parse(model_for(&k, &model)?, &x, &y)?;
            let q = transfer(&p, direction)?;
            emit(&serde_json::to_value(point_record(&q))?, pretty);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

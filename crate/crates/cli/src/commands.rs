use std::fs::File;
use std::io::Write;
use std::path::Path;

use chainbound::chaining::{
    build_dyadic_nets_with, default_depth, dudley_bound_check, projection_step_excess, recursive_projection,
    stage1_bound_check, telescoping_identity_check, CanonicalProcess, IndexSet, NetStrategy,
};
use chainbound::discrete_exact::run_discrete_suite;
use chainbound::gaussian_mc::{run_gauss_suite, GaussSuiteConfig};
use chainbound::io::{load_metric_set, read_points, write_profile_csv, write_violations_json, InputKind};
use chainbound::maurey::{
    l1_hull_net_bound, l1_hull_net_construct, maurey_k, maurey_sparsify, random_l1_theta, ColumnDictionary,
    DEFAULT_MAX_ATTEMPTS,
};
use chainbound::metric::{
    dyadic_sum_with, entropy_integral_with, entropy_profile, CoveringOracle, FiniteMetricSet, Quadrature,
};
use chainbound::regression::{l1_rate_experiment, linear_rate_experiment, RateReport};
use chainbound::report::{write_csv, CheckReport};
use chainbound::rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    parse_grid, ClassKind, CoverArgs, DiscreteArgs, DudleyArgs, EntropyArgs, Format, GaussArgs, MaureyArgs,
    RegressArgs, RunConfig, Strategy,
};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Whether every inequality check in the run passed.
pub type Verdict = bool;

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, doc: &Value) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn envelope(subcommand: &str, seed: Option<u64>) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("subcommand".into(), json!(subcommand));
    m.insert("seed".into(), json!(seed));
    m
}

/// Writes check reports in the requested format and returns the verdict.
fn emit_reports(
    run: &RunConfig,
    subcommand: &str,
    seed: u64,
    reports: &[CheckReport],
    extra: Vec<(&str, Value)>,
) -> Result<Verdict, CliError> {
    let all_pass = reports.iter().all(|r| r.pass);
    match run.format {
        Format::Csv => {
            let mut w = sink(run.out.as_deref())?;
            write_csv(&mut w, reports)?;
            w.flush()?;
        }
        Format::Json => {
            let mut doc = envelope(subcommand, Some(seed));
            doc.insert("all_pass".into(), json!(all_pass));
            for (k, v) in extra {
                doc.insert(k.into(), v);
            }
            doc.insert("reports".into(), serde_json::to_value(reports)?);
            write_json(run.out.as_deref(), &Value::Object(doc))?;
        }
    }
    Ok(all_pass)
}

/// Two-column `quantity,value` CSV for scalar summaries.
fn write_key_values(path: Option<&Path>, rows: &[(&str, String)]) -> Result<(), CliError> {
    let mut w = sink(path)?;
    let mut wtr = csv::Writer::from_writer(&mut w);
    wtr.write_record(["quantity", "value"])?;
    for (k, v) in rows {
        wtr.write_record([*k, v.as_str()])?;
    }
    wtr.flush()?;
    drop(wtr);
    w.flush()?;
    Ok(())
}

fn load_set(points: Option<&Path>, matrix: Option<&Path>) -> Result<FiniteMetricSet, CliError> {
    match (points, matrix) {
        (Some(p), None) => Ok(load_metric_set(p, InputKind::Points)?),
        (None, Some(m)) => Ok(load_metric_set(m, InputKind::DistanceMatrix)?),
        (None, None) => Err(CliError::Config("give --points or --matrix".into())),
        (Some(_), Some(_)) => Err(CliError::Config("--points and --matrix are exclusive".into())),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn halvings(top: f64, levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| top * (-(k as f64)).exp2()).collect()
}

pub fn cover(run: &RunConfig, a: &CoverArgs) -> Result<Verdict, CliError> {
    let s = load_set(a.points.as_deref(), a.matrix.as_deref())?;
    let scales = match &a.eps {
        Some(e) => e.clone(),
        None => {
            let d = s.diameter();
            if d == 0.0 {
                vec![1.0]
            } else {
                halvings(d, a.levels.unwrap_or(8))
            }
        }
    };
    let profile = entropy_profile(&s, &scales)?;
    match run.format {
        Format::Csv => {
            let mut w = sink(run.out.as_deref())?;
            write_profile_csv(&mut w, &profile)?;
            w.flush()?;
        }
        Format::Json => {
            let mut doc = envelope("cover", None);
            doc.insert("points".into(), json!(s.len()));
            doc.insert("diameter".into(), json!(s.diameter()));
            doc.insert("profile".into(), serde_json::to_value(&profile)?);
            write_json(run.out.as_deref(), &Value::Object(doc))?;
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct DyadicTerm {
    k: usize,
    eps: f64,
    upper: usize,
    entropy: f64,
    partial_sum: f64,
}

pub fn entropy(run: &RunConfig, a: &EntropyArgs) -> Result<Verdict, CliError> {
    let s = load_set(a.points.as_deref(), a.matrix.as_deref())?;
    let diameter = s.diameter();
    let d_max = positive("--d-max", a.d_max.unwrap_or(diameter))?;
    if d_max < diameter * (1.0 - 1e-12) {
        return Err(CliError::Config(format!("--d-max {d_max} is below the diameter {diameter}")));
    }
    let depth = a.depth.unwrap_or(16);
    let oracle = CoveringOracle::new(&s);
    let integral = entropy_integral_with(&oracle, d_max, Quadrature::default())?;
    let mut terms = Vec::with_capacity(depth);
    for k in 0..depth {
        let eps = d_max * (-(k as f64)).exp2();
        terms.push(DyadicTerm {
            k,
            eps,
            upper: oracle.upper(eps),
            entropy: oracle.entropy(eps),
            partial_sum: dyadic_sum_with(&oracle, d_max, k + 1),
        });
    }
    let dyadic = terms.last().map(|t| t.partial_sum).unwrap_or(0.0);
    match run.format {
        Format::Csv => write_key_values(
            run.out.as_deref(),
            &[
                ("points", s.len().to_string()),
                ("diameter", diameter.to_string()),
                ("d_max", d_max.to_string()),
                ("entropy_integral", integral.to_string()),
                ("depth", depth.to_string()),
                ("dyadic_sum", dyadic.to_string()),
            ],
        )?,
        Format::Json => {
            let mut doc = envelope("entropy", None);
            doc.insert("points".into(), json!(s.len()));
            doc.insert("diameter".into(), json!(diameter));
            doc.insert("d_max".into(), json!(d_max));
            doc.insert("entropy_integral".into(), json!(integral));
            doc.insert("dyadic_sum".into(), json!(dyadic));
            doc.insert("terms".into(), serde_json::to_value(&terms)?);
            write_json(run.out.as_deref(), &Value::Object(doc))?;
        }
    }
    Ok(true)
}

pub fn discrete_check(run: &RunConfig, a: &DiscreteArgs) -> Result<Verdict, CliError> {
    let seed = run.require_seed("discrete-check")?;
    let instances = a.instances.or(run.trials).unwrap_or(200);
    let cube_dim = a.cube_dim.unwrap_or(3);
    let suite = run_discrete_suite(instances, cube_dim, seed)?;
    if let Some(p) = &a.violations {
        let mut w = sink(Some(p))?;
        write_violations_json(&mut w, &suite.violations)?;
        w.flush()?;
    } else if !suite.violations.is_empty() {
        eprintln!(
            "{} instance(s) violated a check; rerun with --violations PATH to save them",
            suite.violations.len()
        );
    }
    emit_reports(
        run,
        "discrete-check",
        seed,
        &suite.reports,
        vec![
            ("instances", json!(instances)),
            ("cube_dim", json!(cube_dim)),
            ("violations", serde_json::to_value(&suite.violations)?),
        ],
    )
}

pub fn gauss_check(run: &RunConfig, a: &GaussArgs) -> Result<Verdict, CliError> {
    let seed = run.require_seed("gauss-check")?;
    let d = GaussSuiteConfig::default();
    let cfg = GaussSuiteConfig {
        fields: a.fields.unwrap_or(d.fields),
        max_dim: a.max_dim.unwrap_or(d.max_dim),
        n_samples: run.samples.unwrap_or(d.n_samples),
        lambda: a.lambda.unwrap_or(d.lambda),
        t: positive("--t", a.t.unwrap_or(d.t))?,
    };
    if cfg.n_samples < 2 {
        return Err(CliError::Config("--samples must be at least 2".into()));
    }
    let reports = run_gauss_suite(&cfg, seed)?;
    emit_reports(run, "gauss-check", seed, &reports, vec![("config", serde_json::to_value(cfg)?)])
}

pub fn dudley(run: &RunConfig, a: &DudleyArgs) -> Result<Verdict, CliError> {
    let seed = run.require_seed("dudley")?;
    let path = a
        .points
        .as_deref()
        .ok_or_else(|| CliError::Config("dudley needs --points".into()))?;
    let s = IndexSet::new(read_points(File::open(path)?)?, a.base.unwrap_or(0))?;
    let proc = CanonicalProcess::new(positive("--sigma", a.sigma.unwrap_or(1.0))?)?;
    let d_max = match a.d_max {
        Some(v) => v,
        None => s.diameter(),
    };
    if d_max.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::Config("the point cloud has zero diameter; give --d-max".into()));
    }
    let depth = a.depth.unwrap_or_else(|| default_depth(&s, d_max)).max(1);
    let strategy = match a.strategy.unwrap_or(Strategy::Greedy) {
        Strategy::Greedy => NetStrategy::Greedy,
        Strategy::Exact => NetStrategy::Exact,
    };
    let nets = build_dyadic_nets_with(&s, d_max, depth, strategy)?;
    nets.verify(&s)?;
    let samples = run.samples.unwrap_or(100_000);
    let paths = run.trials.unwrap_or(100);
    if paths == 0 || samples < 2 {
        return Err(CliError::Config("dudley needs --trials ≥ 1 and --samples ≥ 2".into()));
    }

    let mut rng = rng::substream(seed, "paths", 0);
    let finest = nets.finest();
    let mut worst_resid: f64 = 0.0;
    let mut worst_step = f64::NEG_INFINITY;
    for p in 0..paths {
        let u = finest[p % finest.len()];
        let w = rng::normal_vec(&mut rng, s.dim());
        worst_resid = worst_resid.max(telescoping_identity_check(u, &nets, &s, &w, &proc)?);
        let chain = recursive_projection(u, &nets, &s)?;
        worst_step = worst_step.max(projection_step_excess(&chain, &nets, &s));
    }
    let mut reports = vec![
        CheckReport::exact("telescoping", worst_resid, 0.0, 1e-10),
        CheckReport::exact("projection_step", worst_step, 0.0, 0.0),
    ];
    reports.push(stage1_bound_check(&nets, &s, &proc, samples, seed)?.report("stage1", seed));
    reports.push(dudley_bound_check(&s, d_max, &proc, samples, seed)?.report("dudley", seed));

    let profile = nets.profile();
    if let Some(p) = &a.profile_out {
        let mut wtr = csv::Writer::from_path(p)?;
        wtr.write_record(["k", "eps", "size"])?;
        for (k, eps, size) in &profile {
            wtr.write_record([k.to_string(), eps.to_string(), size.to_string()])?;
        }
        wtr.flush()?;
    }
    let profile_json: Vec<Value> = profile
        .iter()
        .map(|(k, eps, size)| json!({ "k": k, "eps": eps, "size": size }))
        .collect();
    emit_reports(
        run,
        "dudley",
        seed,
        &reports,
        vec![
            ("points", json!(s.len())),
            ("d_max", json!(d_max)),
            ("depth", json!(depth)),
            ("profile", Value::Array(profile_json)),
        ],
    )
}

fn rate_csv(path: Option<&Path>, report: &RateReport) -> Result<(), CliError> {
    let mut w = sink(path)?;
    let mut wtr = csv::Writer::from_writer(&mut w);
    wtr.write_record(["n", "d", "r", "delta_star", "median_err", "normalized", "slope"])?;
    for c in &report.cells {
        wtr.write_record([
            c.n.to_string(),
            c.d.to_string(),
            c.r.to_string(),
            c.delta_star.map(|v| v.to_string()).unwrap_or_default(),
            c.median_err.to_string(),
            c.normalized.to_string(),
            report.slope_for(c.d).map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    drop(wtr);
    w.flush()?;
    Ok(())
}

pub fn regress(run: &RunConfig, a: &RegressArgs) -> Result<Verdict, CliError> {
    let seed = run.require_seed("regress")?;
    let class = a.class.unwrap_or(ClassKind::Linear);
    let sigma = positive("--sigma", a.sigma.unwrap_or(1.0))?;
    let radius = positive("--R", a.radius.unwrap_or(1.0))?;
    let trials = run.trials.unwrap_or(200);
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => vec![(a.n.unwrap_or(128), a.d.unwrap_or(8))],
    };
    let report = match class {
        ClassKind::Linear => linear_rate_experiment(&grid, sigma, trials, seed)?,
        ClassKind::L1 => l1_rate_experiment(&grid, radius, sigma, trials, seed)?,
    };
    let mut summary = envelope("regress", Some(seed));
    summary.insert("class".into(), serde_json::to_value(class)?);
    summary.insert("sigma".into(), json!(sigma));
    if class == ClassKind::L1 {
        summary.insert("R".into(), json!(radius));
    }
    summary.insert("trials".into(), json!(trials));
    summary.insert("cells".into(), serde_json::to_value(&report.cells)?);
    summary.insert(
        "slopes".into(),
        Value::Array(report.slopes.iter().map(|(d, s)| json!({ "d": d, "slope": s })).collect()),
    );
    summary.insert("max_normalized".into(), json!(report.max_normalized()));
    summary.insert("min_normalized".into(), json!(report.min_normalized()));
    let summary = Value::Object(summary);
    match run.format {
        Format::Csv => {
            rate_csv(run.out.as_deref(), &report)?;
            if let Some(p) = &a.summary {
                write_json(Some(p), &summary)?;
            }
        }
        Format::Json => write_json(run.out.as_deref(), &summary)?,
    }
    Ok(true)
}

#[derive(Serialize)]
struct NetSummary {
    size: usize,
    probes: usize,
    sparsify_hits: usize,
    max_nearest: f64,
    covers: bool,
}

pub fn maurey(run: &RunConfig, a: &MaureyArgs) -> Result<Verdict, CliError> {
    let seed = run.require_seed("maurey")?;
    let d = a.d.unwrap_or(3);
    let n = a.n.unwrap_or(10);
    let radius = positive("--R", a.radius.unwrap_or(1.0))?;
    let eps = positive("--eps", a.eps.unwrap_or(0.5))?;
    let trials = run.trials.unwrap_or(200);
    if d == 0 || n == 0 {
        return Err(CliError::Config("--d and --n must be at least 1".into()));
    }

    let mut design_rng = rng::substream(seed, "maurey-design", 0);
    let dict = ColumnDictionary::random(n, d, 0.5, &mut design_rng)?;
    let k = maurey_k(radius, eps);
    let bound = l1_hull_net_bound(d, radius, eps)?;

    let runs: Vec<chainbound::Result<(bool, usize, f64)>> = rng::map_trials(trials, seed, "maurey-trials", |t, r| {
        let theta = random_l1_theta(d, radius, r);
        let sp = maurey_sparsify(&theta, radius, &dict, eps, DEFAULT_MAX_ATTEMPTS, rng::derive_seed(seed, &format!("trial{t}")))?;
        Ok((sp.success, sp.attempts, sp.error))
    });
    let runs = runs.into_iter().collect::<chainbound::Result<Vec<_>>>()?;
    let successes = runs.iter().filter(|r| r.0).count();
    let max_attempts = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let mean_attempts = runs.iter().map(|r| r.1 as f64).sum::<f64>() / runs.len().max(1) as f64;
    let max_error = runs.iter().map(|r| r.2).fold(0.0, f64::max);

    let net = match l1_hull_net_construct(&dict, radius, eps, rng::derive_seed(seed, "net")) {
        Ok(h) => Some(NetSummary {
            size: h.members.len(),
            probes: h.probes,
            sparsify_hits: h.sparsify_hits,
            max_nearest: h.max_nearest,
            covers: h.covers(eps),
        }),
        Err(chainbound::Error::TooLarge { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let all_pass = successes == trials && max_error <= eps && net.as_ref().is_none_or(|h| h.covers);

    match run.format {
        Format::Json => {
            let mut doc = envelope("maurey", Some(seed));
            doc.insert("all_pass".into(), json!(all_pass));
            doc.insert("n".into(), json!(n));
            doc.insert("d".into(), json!(d));
            doc.insert("R".into(), json!(radius));
            doc.insert("eps".into(), json!(eps));
            doc.insert("k".into(), json!(k));
            doc.insert("bound".into(), json!(bound.to_string()));
            doc.insert("net".into(), serde_json::to_value(&net)?);
            doc.insert(
                "sparsify".into(),
                json!({
                    "trials": trials,
                    "successes": successes,
                    "max_attempts": max_attempts,
                    "mean_attempts": mean_attempts,
                    "max_error": max_error,
                }),
            );
            write_json(run.out.as_deref(), &Value::Object(doc))?;
        }
        Format::Csv => {
            let opt = |v: Option<String>| v.unwrap_or_default();
            write_key_values(
                run.out.as_deref(),
                &[
                    ("k", k.to_string()),
                    ("bound", bound.to_string()),
                    ("net_size", opt(net.as_ref().map(|h| h.size.to_string()))),
                    ("net_max_nearest", opt(net.as_ref().map(|h| h.max_nearest.to_string()))),
                    ("net_covers", opt(net.as_ref().map(|h| h.covers.to_string()))),
                    ("trials", trials.to_string()),
                    ("successes", successes.to_string()),
                    ("max_attempts", max_attempts.to_string()),
                    ("mean_attempts", mean_attempts.to_string()),
                    ("max_error", max_error.to_string()),
                ],
            )?;
        }
    }
    Ok(all_pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_failing_report_flips_the_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunConfig {
            seed: Some(1),
            samples: None,
            trials: None,
            out: Some(dir.path().join("r.csv")),
            format: Format::Csv,
        };
        let ok = CheckReport::exact("ok", 1.0, 2.0, 0.0);
        let bad = CheckReport::exact("bad", 3.0, 2.0, 0.0);
        assert!(emit_reports(&run, "t", 1, std::slice::from_ref(&ok), vec![]).unwrap());
        assert!(!emit_reports(&run, "t", 1, &[ok, bad], vec![]).unwrap());
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.lines().nth(2).unwrap().contains(",fail,"));
    }
}

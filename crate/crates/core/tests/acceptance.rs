//! Acceptance run: one verdict line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the verdict lines are always printed.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use chainbound::chaining::{
    dudley_bound_check, run_chaining_suite, CanonicalProcess, ChainingSuiteConfig, IndexSet,
};
use chainbound::discrete_exact::{
    entropy_duality_check, run_discrete_suite, DiscreteFunction, DiscreteInstance, FiniteProductSpace, EXACT_TOL,
};
use chainbound::gaussian_mc::{
    herbst_cgf_gap, lipschitz_tail_gap, poincare_gap, run_gauss_suite, GaussSuiteConfig, ScalarField,
};
use chainbound::maurey::{l1_hull_net_bound, run_maurey_suite};
use chainbound::metric::{
    covering_number_bounds, euclidean_ball_covering_bound, exact_covering_number, is_epsilon_net, maximal_packing,
    FiniteMetricSet, PackingOrder,
};
use chainbound::regression::{
    critical_radius, l1_rate_experiment, linear_rate_experiment, localized_complexity_linear_exact,
    localized_complexity_mc, master_bound_experiment, Bracket, FunctionClass, RegressionModel,
};
use chainbound::report::{write_csv, CheckReport};
use chainbound::rng;

const SEED: u64 = 20_240_601;

type Verdict = Result<(bool, String), String>;

fn csv_bytes(reports: &[CheckReport]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports).expect("in-memory write");
    buf
}

fn failures(reports: &[CheckReport]) -> Vec<&str> {
    reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect()
}

fn count_prefix(reports: &[CheckReport], prefix: &str) -> usize {
    reports.iter().filter(|r| r.check.starts_with(prefix)).count()
}

fn discrete_suite() -> Verdict {
    let mut detail = Vec::new();
    let mut ok = true;
    for dim in 2..=3 {
        let suite = run_discrete_suite(200, dim, SEED).map_err(|e| e.to_string())?;
        let n = suite.reports.len();
        let bad = failures(&suite.reports);
        ok &= n == 1000 && bad.is_empty() && suite.violations.is_empty();
        detail.push(format!("dim {dim}: {n} checks, {} violations", bad.len()));
    }
    // Duality equality at T = Y for positive Y.
    let cube = FiniteProductSpace::binary_cube(3).map_err(|e| e.to_string())?;
    let instances = rng::map_trials(200, SEED, "discrete", |i, r| DiscreteInstance::random(i, 3, r));
    let mut worst: f64 = 0.0;
    for inst in &instances {
        let y = DiscreteFunction::from_values(&cube, inst.t.clone()).map_err(|e| e.to_string())?;
        let (ent, dual) = entropy_duality_check(&y, &y, &cube).map_err(|e| e.to_string())?;
        worst = worst.max((ent - dual).abs());
    }
    ok &= worst <= EXACT_TOL;
    detail.push(format!("max |Ent − dual| at T=Y = {worst:.1e}"));
    Ok((ok, detail.join("; ")))
}

fn ball_sample<R: Rng>(n: usize, dim: usize, radius: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let g = rng::normal_vec(rng, dim);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            g.iter().map(|v| v * r / norm).collect()
        })
        .collect()
}

/// Smallest net by trying every subset in order of size.
fn brute_force_cover(eps: f64, s: &FiniteMetricSet) -> usize {
    let n = s.len();
    (1..=n)
        .find(|&k| {
            (0u32..1 << n).filter(|m| m.count_ones() as usize == k).any(|m| {
                (0..n).all(|p| (0..n).any(|c| m >> c & 1 == 1 && s.d(p, c) <= eps))
            })
        })
        .unwrap_or(0)
}

fn covering_calculus() -> Verdict {
    let mut sandwich_bad = 0;
    let mut witness_bad = 0;
    let mut ball_bad = 0;
    let mut oracle_bad = 0;
    let mut oracle_checked = 0;
    for i in 0..100u64 {
        let mut r = rng::substream(SEED, "covering-acceptance", i);
        let n = r.random_range(1..=25);
        let dim = r.random_range(1..=3);
        let radius = r.random_range(0.5..2.0);
        let s = FiniteMetricSet::from_points(ball_sample(n, dim, radius, &mut r)).map_err(|e| e.to_string())?;
        let eps = radius * r.random_range(0.05..1.2);
        let exact = exact_covering_number(eps, &s).map_err(|e| e.to_string())?;
        for order in [PackingOrder::FarthestPoint, PackingOrder::Index] {
            let p1 = maximal_packing(eps, &s, order).len();
            let p2 = maximal_packing(2.0 * eps, &s, order).len();
            if !(p2 <= exact && exact <= p1) {
                sandwich_bad += 1;
            }
        }
        let b = covering_number_bounds(eps, &s);
        if !(b.lower <= exact && exact <= b.upper) {
            sandwich_bad += 1;
        }
        let covered = (0..n).all(|p| b.witness.iter().any(|&c| s.d(p, c) <= eps));
        if !covered || !is_epsilon_net(&b.witness, eps, &s) || b.witness.len() != b.upper {
            witness_bad += 1;
        }
        if exact as f64 > euclidean_ball_covering_bound(radius, eps, dim as u32) {
            ball_bad += 1;
        }
        if n <= 14 {
            oracle_checked += 1;
            if brute_force_cover(eps, &s) != exact {
                oracle_bad += 1;
            }
        }
    }
    let ok = sandwich_bad + witness_bad + ball_bad + oracle_bad == 0;
    Ok((
        ok,
        format!(
            "100 instances: sandwich violations {sandwich_bad}, invalid witnesses {witness_bad}, \
             ball-bound violations {ball_bad}, brute-force mismatches {oracle_bad}/{oracle_checked}"
        ),
    ))
}

fn gaussian_suite(store: &mut Vec<(String, Vec<u8>)>) -> Verdict {
    let cfg = GaussSuiteConfig::default();
    let reports = run_gauss_suite(&cfg, SEED).map_err(|e| e.to_string())?;
    store.push(("gauss".into(), csv_bytes(&reports)));
    let bad = failures(&reports);
    let counts: Vec<usize> = ["poincare#", "gaussian_lsi#", "herbst#", "lipschitz_tail#"]
        .iter()
        .map(|p| count_prefix(&reports, p))
        .collect();
    let mut ok = bad.is_empty() && counts.iter().all(|&c| c == 20);

    // Positive controls: linear fields saturate Poincaré and Herbst.
    let mut controls = 0;
    let mut saturated = 0;
    for (j, (a, b)) in [(vec![1.0], 0.0), (vec![0.6, -0.8], 0.3), (vec![2.0, 1.0, -1.0], -1.0)]
        .into_iter()
        .enumerate()
    {
        let f = ScalarField::linear(a, b);
        let s = rng::derive_seed(SEED, &format!("control{j}"));
        let p = poincare_gap(&f, cfg.n_samples, s).map_err(|e| e.to_string())?;
        let h = herbst_cgf_gap(&f, cfg.lambda, cfg.n_samples, s).map_err(|e| e.to_string())?;
        controls += 2;
        saturated += usize::from(p.equal_within_ci()) + usize::from(h.equal_within_ci());
    }
    ok &= saturated == controls;

    let x1 = ScalarField::linear(vec![1.0], 0.0);
    let tail = lipschitz_tail_gap(&x1, 1.0, cfg.n_samples, rng::derive_seed(SEED, "tail-x1")).map_err(|e| e.to_string())?;
    let tail_ok = (tail.lhs.mean - 0.3173).abs() <= 0.01 && (tail.rhs.mean - 1.2131).abs() <= 1e-4 && tail.holds();
    ok &= tail_ok;
    Ok((
        ok,
        format!(
            "{} checks at n={}, {} failures, per-kind counts {counts:?}; controls saturated {saturated}/{controls}; \
             tail(x1, t=1) = {:.4} vs bound {:.4}",
            reports.len(),
            cfg.n_samples,
            bad.len(),
            tail.lhs.mean,
            tail.rhs.mean
        ),
    ))
}

fn chaining_suite(store: &mut Vec<(String, Vec<u8>)>) -> Verdict {
    let cfg = ChainingSuiteConfig::default();
    let reports = run_chaining_suite(&cfg, 1.0, SEED).map_err(|e| e.to_string())?;
    store.push(("chaining".into(), csv_bytes(&reports)));
    let bad = failures(&reports);
    let stage1 = count_prefix(&reports, "stage1#");
    let dudley = count_prefix(&reports, "dudley#");
    let paths = cfg.geometries * cfg.paths;
    let mut ok = bad.is_empty() && stage1 == 60 && dudley == 60 && count_prefix(&reports, "telescoping#") == 20;

    let two = IndexSet::new(vec![vec![0.0], vec![1.0]], 0).map_err(|e| e.to_string())?;
    let proc = CanonicalProcess::new(1.0).map_err(|e| e.to_string())?;
    let g = dudley_bound_check(&two, 1.0, &proc, 400_000, rng::derive_seed(SEED, "two-point")).map_err(|e| e.to_string())?;
    let target = 1.0 / (2.0 * PI).sqrt();
    let closed_bound = 12.0 * SQRT_2 * 2f64.ln().sqrt();
    let two_ok = (g.lhs.mean - target).abs() <= 0.005 && (g.rhs.mean - 14.129).abs() <= 0.01 && g.holds();
    ok &= two_ok;
    Ok((
        ok,
        format!(
            "{} checks ({paths} telescoping paths, {stage1} stage-1, {dudley} Dudley), {} failures; \
             two-point E sup = {:.4} (target {target:.4}) ≤ {:.3} (closed form {closed_bound:.3})",
            reports.len(),
            bad.len(),
            g.lhs.mean,
            g.rhs.mean
        ),
    ))
}

fn regression_suite(store: &mut Vec<(String, Vec<u8>)>) -> Verdict {
    let err = |e: chainbound::Error| e.to_string();
    let mut ok = true;
    let mut detail = Vec::new();

    // Linear class: numerical sup equals the projection formula draw by draw.
    let mut r = rng::substream(SEED, "regression-designs", 0);
    let mut worst_z: f64 = 0.0;
    for (n, d, delta) in [(20, 3, 0.5), (40, 8, 1.0), (30, 30, 0.2)] {
        let model = RegressionModel::random_linear(n, d, 1.0, &mut r).map_err(err)?;
        let s = rng::derive_seed(SEED, &format!("equiv{n}x{d}"));
        let mc = localized_complexity_mc(&model.x, FunctionClass::Linear, delta, 4000, s).map_err(err)?;
        let exact = localized_complexity_linear_exact(&model.x, delta, 4000, s).map_err(err)?;
        let z = (mc.mean - exact.mean).abs() / (mc.stderr + exact.stderr);
        worst_z = worst_z.max(z);
    }
    ok &= worst_z <= 3.0;
    detail.push(format!("equivalence worst |Δ|/se = {worst_z:.2e}"));

    // δ* scales linearly in σ on a common panel.
    let mut worst_rel: f64 = 0.0;
    let base = RegressionModel::random_linear(32, 4, 1.0, &mut r).map_err(err)?;
    let d1 = critical_radius(&base, FunctionClass::Linear, 2000, SEED, Bracket::Auto).map_err(err)?;
    for c in [0.5, 2.0, 3.0] {
        let scaled = RegressionModel::new(base.x.clone(), base.theta_star.clone(), c).map_err(err)?;
        let dc = critical_radius(&scaled, FunctionClass::Linear, 2000, SEED, Bracket::Auto).map_err(err)?;
        worst_rel = worst_rel.max((dc.delta_star - c * d1.delta_star).abs() / (c * d1.delta_star));
    }
    ok &= worst_rel <= 1e-12;
    detail.push(format!("δ* homogeneity rel err {worst_rel:.1e}"));

    // Master bound at several t ≥ δ*.
    let mut master = Vec::new();
    let mut master_ok = true;
    let lin = RegressionModel::random_linear(64, 8, 1.0, &mut r).map_err(err)?;
    let sparse = RegressionModel::random_sparse(48, 64, 1.0, 3, 0.5, &mut r).map_err(err)?;
    for (name, model, class) in [
        ("linear", &lin, FunctionClass::Linear),
        ("l1", &sparse, FunctionClass::L1Ball { radius: 1.0 }),
    ] {
        let cr = critical_radius(model, class, 500, SEED, Bracket::Auto).map_err(err)?;
        for k in [1.0, 1.5, 2.0, 4.0] {
            let t = k * cr.delta_star;
            let mb = master_bound_experiment(model, class, cr.delta_star, t, 500, rng::derive_seed(SEED, name))
                .map_err(err)?;
            master_ok &= mb.holds();
            master.push(format!("{name} t={k}δ*: {:.1e} ≤ {:.1e}", mb.freq.mean, mb.bound));
        }
    }
    ok &= master_ok;
    detail.push(format!("master bound [{}]", master.join(", ")));

    let grid: Vec<(usize, usize)> = [64, 128, 256, 512].iter().map(|&n| (n, 8)).collect();
    let lin_rate = linear_rate_experiment(&grid, 1.0, 200, SEED).map_err(err)?;
    store.push(("linear-rate".into(), serde_json::to_vec(&lin_rate).map_err(|e| e.to_string())?));
    let slope = lin_rate.slope_for(8).unwrap_or(f64::NAN);
    ok &= (slope + 1.0).abs() <= 0.15;
    detail.push(format!("linear slope {slope:.3}"));

    let chi = linear_rate_experiment(&[(1, 1)], 1.0, 20_000, SEED).map_err(err)?;
    let chi_med = chi.cells[0].normalized;
    ok &= (chi_med - 0.455).abs() <= 0.05;
    detail.push(format!("χ²₁ median {chi_med:.3}"));

    let l1_grid = [(32, 64), (64, 128), (128, 256), (64, 32), (64, 64)];
    let l1 = l1_rate_experiment(&l1_grid, 1.0, 1.0, 100, SEED).map_err(err)?;
    store.push(("l1-rate".into(), serde_json::to_vec(&l1).map_err(|e| e.to_string())?));
    let band = l1.max_normalized() / l1.min_normalized();
    let alt: Vec<f64> = l1.cells.iter().filter_map(|c| c.normalized_alt).collect();
    let alt_band = alt.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / alt.iter().cloned().fold(f64::INFINITY, f64::min);
    ok &= band <= 3.0;
    detail.push(format!("ℓ1 band {band:.2} (alternate normalisation {alt_band:.2})"));
    Ok((ok, detail.join("; ")))
}

fn maurey_suite(store: &mut Vec<(String, Vec<u8>)>) -> Verdict {
    let reports = run_maurey_suite(200, 2000, SEED).map_err(|e| e.to_string())?;
    store.push(("maurey".into(), csv_bytes(&reports)));
    let bad = failures(&reports);
    let kinds = ["unbiased#", "second_moment#", "one_over_k#", "average_error_mc#", "sparsify#"];
    let counts: Vec<usize> = kinds.iter().map(|k| count_prefix(&reports, k)).collect();
    let bound = l1_hull_net_bound(3, 1.0, 0.5).map_err(|e| e.to_string())?;
    let ok = bad.is_empty() && counts.iter().all(|&c| c == 200) && bound == 2401u32.into();
    Ok((
        ok,
        format!("{} checks, {} failures, per-kind counts {counts:?}; net bound (3, 1, 0.5) = {bound}", reports.len(), bad.len()),
    ))
}

fn reproducibility(store: &[(String, Vec<u8>)]) -> Verdict {
    let err = |e: chainbound::Error| e.to_string();
    let mut differing = Vec::new();
    for (name, first) in store {
        let again = match name.as_str() {
            "gauss" => csv_bytes(&run_gauss_suite(&GaussSuiteConfig::default(), SEED).map_err(err)?),
            "chaining" => csv_bytes(&run_chaining_suite(&ChainingSuiteConfig::default(), 1.0, SEED).map_err(err)?),
            "maurey" => csv_bytes(&run_maurey_suite(200, 2000, SEED).map_err(err)?),
            "linear-rate" => {
                let grid: Vec<(usize, usize)> = [64, 128, 256, 512].iter().map(|&n| (n, 8)).collect();
                serde_json::to_vec(&linear_rate_experiment(&grid, 1.0, 200, SEED).map_err(err)?).unwrap()
            }
            "l1-rate" => {
                let grid = [(32, 64), (64, 128), (128, 256), (64, 32), (64, 64)];
                serde_json::to_vec(&l1_rate_experiment(&grid, 1.0, 1.0, 100, SEED).map_err(err)?).unwrap()
            }
            other => return Err(format!("no rerun for {other}")),
        };
        if &again != first {
            differing.push(name.clone());
        }
    }
    let a = csv_bytes(&run_discrete_suite(200, 3, SEED).map_err(err)?.reports);
    let b = csv_bytes(&run_discrete_suite(200, 3, SEED).map_err(err)?.reports);
    if a != b {
        differing.push("discrete".into());
    }
    let checked = store.len() + 1;
    Ok((
        differing.is_empty() && checked == 6,
        format!("{checked} suites rerun, byte-identical except {differing:?}"),
    ))
}

fn main() -> ExitCode {
    let mut store = Vec::new();
    let mut all = true;
    let mut report = |idx: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && elapsed <= limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "criterion {idx} {name}: {} ({:.2} s, limit {} s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    report(1, "exact discrete suite", Duration::from_secs(10), &mut discrete_suite);
    report(2, "covering calculus", Duration::from_secs(60), &mut covering_calculus);
    report(3, "gaussian mc suite", Duration::from_secs(300), &mut || gaussian_suite(&mut store));
    report(4, "chaining suite", Duration::from_secs(300), &mut || chaining_suite(&mut store));
    report(5, "regression suite", Duration::from_secs(1200), &mut || regression_suite(&mut store));
    report(6, "maurey suite", Duration::from_secs(120), &mut || maurey_suite(&mut store));
    let snapshot = std::mem::take(&mut store);
    report(7, "reproducibility", Duration::from_secs(1800), &mut || reproducibility(&snapshot));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

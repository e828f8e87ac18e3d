//! Dyadic nets, recursive projection and Dudley's bound for the canonical
//! Gaussian process `X_t = σ⟨w, t − t₀⟩`.

use rand::Rng;
use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{invalid, Error, Result};
use crate::gaussian_mc::{McGap, SLACK_SIGMAS};
use crate::metric::{
    dyadic_sum_with, entropy_integral_with, exact_minimal_net, is_epsilon_net, CoveringOracle,
    FiniteMetricSet, Quadrature, EXACT_COVER_LIMIT,
};
use crate::report::CheckReport;
use crate::rng;
use crate::stats::{chi_mean, McEstimate};

/// Relative slack when comparing a diameter with a declared `D`.
const DIAM_TOL: f64 = 1e-12;

/// A finite point cloud in Euclidean space with a basepoint `t₀`.
#[derive(Debug, Clone)]
pub struct IndexSet {
    metric: FiniteMetricSet,
    points: Vec<Vec<f64>>,
    base: usize,
}

impl IndexSet {
    pub fn new(points: Vec<Vec<f64>>, base: usize) -> Result<Self> {
        if base >= points.len() {
            return Err(invalid(format!(
                "basepoint {base} out of range for {} points",
                points.len()
            )));
        }
        let metric = FiniteMetricSet::from_points(points.clone())?;
        Ok(Self { metric, points, base })
    }

    /// `n` equally spaced points on `[lo, hi]`, basepoint `lo`.
    pub fn grid_1d(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("grid needs at least one point"));
        }
        let pts = (0..n)
            .map(|i| {
                let x = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                vec![x]
            })
            .collect();
        Self::new(pts, 0)
    }

    /// `n` points uniform in `[0, 1]^dim`, basepoint index 0.
    pub fn random_cloud<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let pts = (0..n)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::new(pts, 0)
    }

    pub fn metric(&self) -> &FiniteMetricSet {
        &self.metric
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.metric.diameter()
    }

    fn check_diameter(&self, d_max: f64) -> Result<()> {
        if !(d_max > 0.0) {
            return Err(invalid("D must be positive"));
        }
        let diam = self.diameter();
        if diam > d_max * (1.0 + DIAM_TOL) {
            return Err(invalid(format!("diameter {diam} exceeds D = {d_max}")));
        }
        Ok(())
    }

    /// Offsets `t − t₀`, one row per point.
    fn offsets(&self) -> Vec<Vec<f64>> {
        let t0 = &self.points[self.base];
        self.points
            .iter()
            .map(|p| p.iter().zip(t0).map(|(a, b)| a - b).collect())
            .collect()
    }
}

/// `X_t(w) = σ⟨w, t − t₀⟩`: centred at `t₀`, increments `N(0, σ²‖s − t‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalProcess {
    pub sigma: f64,
}

impl CanonicalProcess {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma must be positive and finite"));
        }
        Ok(Self { sigma })
    }

    pub fn value(&self, s: &IndexSet, u: usize, w: &[f64]) -> f64 {
        let t0 = &s.points[s.base];
        self.sigma
            * s.points[u]
                .iter()
                .zip(t0)
                .zip(w)
                .map(|((a, b), x)| (a - b) * x)
                .sum::<f64>()
    }

    /// The whole path `(X_t(w))_t`.
    pub fn realize(&self, s: &IndexSet, w: &[f64]) -> Vec<f64> {
        (0..s.len()).map(|u| self.value(s, u, w)).collect()
    }
}

fn max_over(offsets: &[Vec<f64>], idx: &[usize], w: &[f64]) -> f64 {
    idx.iter()
        .map(|&u| offsets[u].iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// How each level's net is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum NetStrategy {
    /// Farthest-point packing prefixes; nested and cheap.
    #[default]
    Greedy,
    /// Minimal nets from exact set cover (at most 25 points), so `|T_k|`
    /// equals the covering number at `ε_{k+1}`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetLevel {
    pub k: usize,
    pub scale: f64,
    pub net: Vec<usize>,
    /// Covering bound at `ε_{k+1}` that `|net|` is certified against.
    pub cardinality_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicNets {
    pub d_max: f64,
    pub strategy: NetStrategy,
    pub levels: Vec<NetLevel>,
}

impl DyadicNets {
    /// Depth `K`; levels run over `0..=K`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.d_max * (-(k as f64)).exp2()
    }

    pub fn finest(&self) -> &[usize] {
        &self.levels[self.depth()].net
    }

    /// `(k, ε_k, |T_k|)` rows.
    pub fn profile(&self) -> Vec<(usize, f64, usize)> {
        self.levels.iter().map(|l| (l.k, l.scale, l.net.len())).collect()
    }

    /// Rechecks net validity, cardinality certificates and membership.
    pub fn verify(&self, s: &IndexSet) -> Result<()> {
        for l in &self.levels {
            if l.net.iter().any(|&p| p >= s.len()) {
                return Err(invalid(format!("level {} has a point outside the set", l.k)));
            }
            if !is_epsilon_net(&l.net, l.scale, s.metric()) {
                return Err(invalid(format!("level {} is not an ε_k-net", l.k)));
            }
            if l.net.len() > l.cardinality_bound {
                return Err(invalid(format!(
                    "level {}: |T_k| = {} exceeds its bound {}",
                    l.k,
                    l.net.len(),
                    l.cardinality_bound
                )));
            }
        }
        Ok(())
    }
}

/// Smallest `K` with `ε_K = D·2^-K` below half the minimal positive distance.
pub fn default_depth(s: &IndexSet, d_max: f64) -> usize {
    match s.metric().min_positive_distance() {
        None => 0,
        Some(m) => {
            let mut k = 0;
            while d_max * (-(k as f64)).exp2() >= 0.5 * m {
                k += 1;
            }
            k
        }
    }
}

pub fn build_dyadic_nets(s: &IndexSet, d_max: f64, depth: usize) -> Result<DyadicNets> {
    build_dyadic_nets_with(s, d_max, depth, NetStrategy::Greedy)
}

/// Level `k` holds an `ε_{k+1}`-net `T_k` (hence also an `ε_k`-net).
pub fn build_dyadic_nets_with(
    s: &IndexSet,
    d_max: f64,
    depth: usize,
    strategy: NetStrategy,
) -> Result<DyadicNets> {
    s.check_diameter(d_max)?;
    if strategy == NetStrategy::Exact && s.len() > EXACT_COVER_LIMIT {
        return Err(Error::TooLarge {
            what: "points for exact dyadic nets",
            actual: s.len(),
            limit: EXACT_COVER_LIMIT,
        });
    }
    let oracle = CoveringOracle::new(s.metric());
    let mut levels = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let scale = d_max * (-(k as f64)).exp2();
        let next = 0.5 * scale;
        let (net, bound) = match strategy {
            NetStrategy::Greedy => {
                let net = oracle.net(next);
                let bound = oracle.upper(next);
                (net, bound)
            }
            NetStrategy::Exact => {
                let net = exact_minimal_net(next, s.metric())?;
                let bound = net.len();
                (net, bound)
            }
        };
        levels.push(NetLevel {
            k,
            scale,
            net,
            cardinality_bound: bound,
        });
    }
    let nets = DyadicNets {
        d_max,
        strategy,
        levels,
    };
    nets.verify(s)?;
    Ok(nets)
}

/// `[π_0(u), …, π_K(u)]` with `π_K(u) = u` and `π_k(u)` the point of `T_k`
/// nearest to `π_{k+1}(u)`, ties to the lowest index.
pub fn recursive_projection(u: usize, nets: &DyadicNets, s: &IndexSet) -> Result<Vec<usize>> {
    if !nets.finest().contains(&u) {
        return Err(invalid(format!("point {u} is not in the finest net T_K")));
    }
    let depth = nets.depth();
    let mut chain = vec![u; depth + 1];
    for k in (0..depth).rev() {
        chain[k] = s
            .metric()
            .nearest_in(chain[k + 1], &nets.levels[k].net)
            .expect("nets are nonempty");
    }
    Ok(chain)
}

/// Largest `dist(π_k, π_{k+1}) − ε_k` over the chain; `≤ 0` when every step
/// obeys its bound.
pub fn projection_step_excess(chain: &[usize], nets: &DyadicNets, s: &IndexSet) -> f64 {
    chain
        .windows(2)
        .enumerate()
        .map(|(k, w)| s.metric().d(w[0], w[1]) - nets.scale(k))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `|(X_u − X_{t₀}) − (X_{π_0} − X_{t₀}) − Σ_k (X_{π_{k+1}} − X_{π_k})|`.
pub fn telescoping_identity_check(
    u: usize,
    nets: &DyadicNets,
    s: &IndexSet,
    w: &[f64],
    proc: &CanonicalProcess,
) -> Result<f64> {
    if w.len() != s.dim() {
        return Err(invalid("noise vector has the wrong dimension"));
    }
    let chain = recursive_projection(u, nets, s)?;
    let x = |p: usize| proc.value(s, p, w);
    let x0 = x(s.base());
    let lhs = x(u) - x0;
    let base = x(chain[0]) - x0;
    let incr: f64 = chain.windows(2).map(|p| x(p[1]) - x(p[0])).sum();
    Ok((lhs - base - incr).abs())
}

fn sup_estimate(s: &IndexSet, idx: &[usize], proc: &CanonicalProcess, n_samples: usize, seed: u64, label: &str) -> McEstimate {
    let offsets = s.offsets();
    let sigma = proc.sigma;
    let maxima = rng::map_gaussian(s.dim(), n_samples, seed, label, |w| sigma * max_over(&offsets, idx, w));
    McEstimate::from_samples(&maxima)
}

/// `E max_{u∈T_K}(X_u − X_{t₀}) ≤ 6√2·σ·R_{K+1}(s, D)`.
pub fn stage1_bound_check(
    nets: &DyadicNets,
    s: &IndexSet,
    proc: &CanonicalProcess,
    n_samples: usize,
    seed: u64,
) -> Result<McGap> {
    if nets.depth() < 1 {
        return Err(invalid("stage-1 check needs depth K ≥ 1"));
    }
    let esup = sup_estimate(s, nets.finest(), proc, n_samples, seed, "stage1");
    let oracle = CoveringOracle::new(s.metric());
    let bound = 6.0 * SQRT_2 * proc.sigma * dyadic_sum_with(&oracle, nets.d_max, nets.depth() + 1);
    Ok(McGap {
        lhs: esup,
        rhs: McEstimate::exact(bound),
    })
}

/// `E sup_t X_t ≤ 12√2·σ·∫_0^D √(log N(ε)) dε`.
pub fn dudley_bound_check(
    s: &IndexSet,
    d_max: f64,
    proc: &CanonicalProcess,
    n_samples: usize,
    seed: u64,
) -> Result<McGap> {
    s.check_diameter(d_max)?;
    let all: Vec<usize> = (0..s.len()).collect();
    let esup = sup_estimate(s, &all, proc, n_samples, seed, "dudley");
    let oracle = CoveringOracle::new(s.metric());
    let integral = entropy_integral_with(&oracle, d_max, Quadrature::default())?;
    Ok(McGap {
        lhs: esup,
        rhs: McEstimate::exact(12.0 * SQRT_2 * proc.sigma * integral),
    })
}

/// Per `(s, t, λ)` comparison of the empirical increment MGF with
/// `exp(λ²σ²d(s,t)²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubGaussianCheck {
    pub entries: Vec<CheckReport>,
    pub min_margin: f64,
}

pub fn subgaussian_process_check(
    proc: &CanonicalProcess,
    s: &IndexSet,
    pairs: &[(usize, usize)],
    lambdas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SubGaussianCheck> {
    if pairs.is_empty() || lambdas.is_empty() {
        return Err(invalid("pairs and lambdas must be nonempty"));
    }
    if pairs.iter().any(|&(a, b)| a >= s.len() || b >= s.len()) {
        return Err(invalid("pair index out of range"));
    }
    // One shared noise panel; the increment is σ⟨w, s − t⟩.
    let incs: Vec<Vec<f64>> = rng::map_gaussian(s.dim(), n_samples, seed, "subgaussian", |w| {
        pairs
            .iter()
            .map(|&(a, b)| proc.value(s, a, w) - proc.value(s, b, w))
            .collect()
    });
    let mut entries = Vec::new();
    for (pi, &(a, b)) in pairs.iter().enumerate() {
        let dist = s.metric().d(a, b);
        for &l in lambdas {
            let mgf: Vec<f64> = incs.iter().map(|row| (l * row[pi]).exp()).collect();
            if let Some(bad) = mgf.iter().find(|v| !v.is_finite()) {
                return Err(Error::Integrability(format!(
                    "exp(λ·increment) = {bad} for pair ({a}, {b}), λ = {l}"
                )));
            }
            let est = McEstimate::from_samples(&mgf);
            let bound = (0.5 * l * l * proc.sigma * proc.sigma * dist * dist).exp();
            entries.push(CheckReport::stochastic(
                format!("subgaussian({a},{b};λ={l})"),
                &est,
                bound,
                est.stderr,
                SLACK_SIGMAS,
                seed,
            ));
        }
    }
    let min_margin = entries.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(SubGaussianCheck { entries, min_margin })
}

/// Sup estimates over a coarse set and a finer superset on one noise panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseSupCheck {
    pub coarse: McEstimate,
    pub fine: McEstimate,
    /// Paired difference `sup_fine − sup_coarse`.
    pub diff: McEstimate,
    /// `max_{f ∈ fine} min_{c ∈ coarse} ‖f − c‖`.
    pub mesh_gap: f64,
    /// `σ·mesh_gap·E‖w‖`.
    pub bound: f64,
}

impl DenseSupCheck {
    pub fn holds(&self) -> bool {
        self.diff.mean <= self.bound + SLACK_SIGMAS * self.diff.stderr
    }

    pub fn monotone(&self) -> bool {
        self.diff.mean >= -SLACK_SIGMAS * self.diff.stderr
    }
}

pub fn dense_sequence_sup_check(
    coarse: &IndexSet,
    fine: &IndexSet,
    proc: &CanonicalProcess,
    n_samples: usize,
    seed: u64,
) -> Result<DenseSupCheck> {
    if coarse.dim() != fine.dim() {
        return Err(invalid("coarse and fine sets differ in dimension"));
    }
    if coarse.points[coarse.base] != fine.points[fine.base] {
        return Err(invalid("coarse and fine sets must share the basepoint"));
    }
    if !coarse.points.iter().all(|c| fine.points.contains(c)) {
        return Err(invalid("coarse set is not contained in the fine set"));
    }
    let mesh_gap = fine
        .points
        .iter()
        .map(|f| {
            coarse
                .points
                .iter()
                .map(|c| f.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let co = coarse.offsets();
    let fo = fine.offsets();
    let ci: Vec<usize> = (0..coarse.len()).collect();
    let fi: Vec<usize> = (0..fine.len()).collect();
    let sigma = proc.sigma;
    let pairs = rng::map_gaussian(fine.dim(), n_samples, seed, "dense-sup", |w| {
        (sigma * max_over(&co, &ci, w), sigma * max_over(&fo, &fi, w))
    });
    let c: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    Ok(DenseSupCheck {
        coarse: McEstimate::from_samples(&c),
        fine: McEstimate::from_samples(&f),
        diff: McEstimate::from_samples(&d),
        mesh_gap,
        bound: sigma * mesh_gap * chi_mean(fine.dim()),
    })
}

/// Settings for [`run_chaining_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainingSuiteConfig {
    pub geometries: usize,
    pub seeds_per_geometry: usize,
    pub max_points: usize,
    pub n_samples: usize,
    pub paths: usize,
}

impl Default for ChainingSuiteConfig {
    fn default() -> Self {
        Self {
            geometries: 20,
            seeds_per_geometry: 3,
            max_points: 50,
            n_samples: 20_000,
            paths: 100,
        }
    }
}

/// Random clouds of assorted size, dimension and aspect ratio.
pub fn random_geometry(index: usize, max_points: usize, seed: u64) -> Result<IndexSet> {
    let mut rng = rng::substream(seed, "geometry", index as u64);
    let n = rng.random_range(2..=max_points.max(2));
    let dim = 1 + index % 3;
    let stretch: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..3.0)).collect();
    let pts = (0..n)
        .map(|_| stretch.iter().map(|s| s * rng.random::<f64>()).collect())
        .collect();
    IndexSet::new(pts, 0)
}

/// Telescoping, projection-step, Stage-1 and Dudley checks over random
/// geometries.
pub fn run_chaining_suite(cfg: &ChainingSuiteConfig, sigma: f64, seed: u64) -> Result<Vec<CheckReport>> {
    let proc = CanonicalProcess::new(sigma)?;
    let mut out = Vec::new();
    for g in 0..cfg.geometries {
        let s = random_geometry(g, cfg.max_points, seed)?;
        let d_max = s.diameter();
        let depth = default_depth(&s, d_max).max(1);
        let nets = build_dyadic_nets(&s, d_max, depth)?;

        let mut rng = rng::substream(seed, "paths", g as u64);
        let finest = nets.finest();
        let mut worst_resid: f64 = 0.0;
        let mut worst_step = f64::NEG_INFINITY;
        for _ in 0..cfg.paths {
            let u = finest[rng.random_range(0..finest.len())];
            let w = rng::normal_vec(&mut rng, s.dim());
            worst_resid = worst_resid.max(telescoping_identity_check(u, &nets, &s, &w, &proc)?);
            let chain = recursive_projection(u, &nets, &s)?;
            worst_step = worst_step.max(projection_step_excess(&chain, &nets, &s));
        }
        out.push(CheckReport::exact(format!("telescoping#g{g}"), worst_resid, 0.0, 1e-10));
        out.push(CheckReport::exact(format!("projection_step#g{g}"), worst_step, 0.0, 0.0));

        for r in 0..cfg.seeds_per_geometry {
            let sd = rng::derive_seed(seed, &format!("g{g}/r{r}"));
            let st = stage1_bound_check(&nets, &s, &proc, cfg.n_samples, sd)?;
            out.push(st.report(format!("stage1#g{g}/r{r}"), sd));
            let du = dudley_bound_check(&s, d_max, &proc, cfg.n_samples, sd)?;
            out.push(du.report(format!("dudley#g{g}/r{r}"), sd));
        }
    }
    Ok(out)
}

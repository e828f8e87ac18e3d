//! ε-nets, packings, covering numbers and metric entropy on finite sets.
//!
//! All nets are *internal*: centers are drawn from the set being covered.
//! Balls are closed, so `p` is covered by `c` when `dist(p, c) ≤ eps`.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Largest set accepted by [`exact_covering_number`].
pub const EXACT_COVER_LIMIT: usize = 25;

/// Sets up to this size have the triangle inequality checked on every triple.
const EXHAUSTIVE_VALIDATION_LIMIT: usize = 200;
const SAMPLED_TRIPLES: usize = 1_000_000;

/// A finite pseudo-metric space stored as a dense distance matrix.
#[derive(Debug, Clone)]
pub struct FiniteMetricSet {
    n: usize,
    dist: Vec<f64>,
    coords: Option<Vec<Vec<f64>>>,
}

impl FiniteMetricSet {
    /// Euclidean distances between `points`.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if let Some(first) = points.first() {
            let dim = first.len();
            if let Some(bad) = points.iter().position(|p| p.len() != dim) {
                return Err(invalid(format!(
                    "point {bad} has {} coordinates, expected {dim}",
                    points[bad].len()
                )));
            }
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(&points[i], &points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self {
            n,
            dist,
            coords: Some(points),
        })
    }

    /// Points on the real line.
    pub fn from_reals(xs: &[f64]) -> Result<Self> {
        Self::from_points(xs.iter().map(|&x| vec![x]).collect())
    }

    /// A row-major `n × n` distance matrix, validated as a pseudo-metric.
    pub fn from_matrix(n: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != n * n {
            return Err(invalid(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        let s = Self {
            n,
            dist,
            coords: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds the matrix from a distance oracle on indices.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = f(i, j);
            }
        }
        Self::from_matrix(n, dist)
    }

    /// Checks the pseudo-metric axioms: zero diagonal, nonnegativity, symmetry
    /// and the triangle inequality (every triple up to 200 points, a seeded
    /// sample of triples beyond that).
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let scale = self.dist.iter().cloned().fold(0.0, f64::max).max(1.0);
        let tol = 1e-12 * scale;
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::NotAMetric(format!("dist({i},{i}) = {}", self.d(i, i))));
            }
            for j in 0..n {
                let d = self.d(i, j);
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::NotAMetric(format!("dist({i},{j}) = {d}")));
                }
                if (d - self.d(j, i)).abs() > tol {
                    return Err(Error::NotAMetric(format!("dist({i},{j}) ≠ dist({j},{i})")));
                }
            }
        }
        let check = |p: usize, q: usize, r: usize| -> Result<()> {
            if self.d(p, r) > self.d(p, q) + self.d(q, r) + tol {
                Err(Error::NotAMetric(format!(
                    "triangle inequality fails for ({p},{q},{r})"
                )))
            } else {
                Ok(())
            }
        };
        if n <= EXHAUSTIVE_VALIDATION_LIMIT {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        check(p, q, r)?;
                    }
                }
            }
        } else {
            let mut rng = rng::substream(0, "metric-validation", 0);
            for _ in 0..SAMPLED_TRIPLES {
                check(
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                )?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Coordinates, when the set was built from points.
    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest strictly positive pairwise distance, if any.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .iter()
            .cloned()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Index of the point of `candidates` nearest to `p`, ties to the lowest index.
    pub fn nearest_in(&self, p: usize, candidates: &[usize]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for &c in candidates {
            let d = self.d(p, c);
            match best {
                Some((bd, bc)) if d > bd || (d == bd && c > bc) => {}
                _ => best = Some((d, c)),
            }
        }
        best.map(|(_, c)| c)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// True iff every point of `s` lies within closed distance `eps` of a center.
pub fn is_epsilon_net(net: &[usize], eps: f64, s: &FiniteMetricSet) -> bool {
    let all: Vec<usize> = (0..s.len()).collect();
    is_epsilon_net_for(net, &all, eps, s)
}

/// Coverage of an arbitrary subset `targets` of `s` by `net`.
pub fn is_epsilon_net_for(net: &[usize], targets: &[usize], eps: f64, s: &FiniteMetricSet) -> bool {
    targets
        .iter()
        .all(|&p| net.iter().any(|&c| s.d(p, c) <= eps))
}

/// Point ordering used by the greedy packing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum PackingOrder {
    /// Farthest-point-first from index 0, ties to the lowest index. Packings
    /// are prefixes of one ordering, so their sizes are monotone in `eps`.
    #[default]
    FarthestPoint,
    /// Scan points in input order, keeping each one farther than `eps` from
    /// everything kept so far.
    Index,
}

/// Farthest-point (Gonzalez) ordering of a set.
///
/// `radius[i]` is the distance from `order[i]` to `order[..i]` when it was
/// chosen (`+∞` for the first point); radii are nonincreasing, so the prefix
/// `order[..m]` with `m` the first index where `radius[m] ≤ eps` is a maximal
/// `eps`-packing and an `eps`-net at once.
#[derive(Debug, Clone)]
pub struct FarthestPointOrder {
    pub order: Vec<usize>,
    pub radius: Vec<f64>,
}

impl FarthestPointOrder {
    pub fn new(s: &FiniteMetricSet) -> Self {
        let n = s.len();
        let mut order = Vec::with_capacity(n);
        let mut radius = Vec::with_capacity(n);
        if n == 0 {
            return Self { order, radius };
        }
        let mut gap = vec![f64::INFINITY; n];
        let mut taken = vec![false; n];
        let mut next = 0usize;
        let mut next_r = f64::INFINITY;
        for _ in 0..n {
            order.push(next);
            radius.push(next_r);
            taken[next] = true;
            let cur = next;
            next_r = f64::NEG_INFINITY;
            for p in 0..n {
                if taken[p] {
                    continue;
                }
                let d = s.d(p, cur);
                if d < gap[p] {
                    gap[p] = d;
                }
                if gap[p] > next_r {
                    next_r = gap[p];
                    next = p;
                }
            }
        }
        Self { order, radius }
    }

    /// Length of the packing prefix at scale `eps`.
    pub fn prefix_len(&self, eps: f64) -> usize {
        // radius[0] = ∞, radius is nonincreasing afterwards.
        let n = self.radius.len();
        if n == 0 {
            return 0;
        }
        1 + self.radius[1..].partition_point(|&r| r > eps)
    }

    pub fn packing(&self, eps: f64) -> Vec<usize> {
        self.order[..self.prefix_len(eps)].to_vec()
    }
}

/// A maximal `eps`-packing: pairwise distances exceed `eps` and no further
/// point can be added. Maximality makes it an `eps`-net of `s`.
pub fn maximal_packing(eps: f64, s: &FiniteMetricSet, order: PackingOrder) -> Vec<usize> {
    match order {
        PackingOrder::FarthestPoint => FarthestPointOrder::new(s).packing(eps),
        PackingOrder::Index => {
            let mut kept: Vec<usize> = Vec::new();
            for p in 0..s.len() {
                if kept.iter().all(|&c| s.d(p, c) > eps) {
                    kept.push(p);
                }
            }
            kept
        }
    }
}

/// Packing-based sandwich on the internal covering number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringBounds {
    pub lower: usize,
    pub upper: usize,
    pub witness: Vec<usize>,
}

/// Caches the farthest-point ordering so many scales can be queried cheaply.
#[derive(Debug, Clone)]
pub struct CoveringOracle<'a> {
    set: &'a FiniteMetricSet,
    fps: FarthestPointOrder,
}

impl<'a> CoveringOracle<'a> {
    pub fn new(set: &'a FiniteMetricSet) -> Self {
        Self {
            set,
            fps: FarthestPointOrder::new(set),
        }
    }

    pub fn set(&self) -> &FiniteMetricSet {
        self.set
    }

    pub fn upper(&self, eps: f64) -> usize {
        self.fps.prefix_len(eps)
    }

    pub fn lower(&self, eps: f64) -> usize {
        self.fps.prefix_len(2.0 * eps)
    }

    pub fn net(&self, eps: f64) -> Vec<usize> {
        self.fps.packing(eps)
    }

    pub fn bounds(&self, eps: f64) -> CoveringBounds {
        CoveringBounds {
            lower: self.lower(eps),
            upper: self.upper(eps),
            witness: self.net(eps),
        }
    }

    pub fn entropy(&self, eps: f64) -> f64 {
        entropy_of_count(self.upper(eps))
    }
}

/// `lower = |P(2eps)| ≤ N(eps) ≤ |P(eps)| = upper`, with `P` the maximal packing.
pub fn covering_number_bounds(eps: f64, s: &FiniteMetricSet) -> CoveringBounds {
    CoveringOracle::new(s).bounds(eps)
}

/// Exact internal covering number by branch-and-bound set cover.
pub fn exact_covering_number(eps: f64, s: &FiniteMetricSet) -> Result<usize> {
    Ok(exact_minimal_net(eps, s)?.len())
}

/// A minimum-cardinality internal `eps`-net (sets of at most 25 points).
pub fn exact_minimal_net(eps: f64, s: &FiniteMetricSet) -> Result<Vec<usize>> {
    let n = s.len();
    if n > EXACT_COVER_LIMIT {
        return Err(Error::TooLarge {
            what: "point set",
            actual: n,
            limit: EXACT_COVER_LIMIT,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let masks: Vec<u32> = (0..n)
        .map(|c| {
            (0..n)
                .filter(|&p| s.d(p, c) <= eps)
                .fold(0u32, |m, p| m | (1 << p))
        })
        .collect();
    let max_cover = masks.iter().map(|m| m.count_ones()).max().unwrap_or(1);

    let mut best = maximal_packing(eps, s, PackingOrder::FarthestPoint);
    let mut chosen = Vec::new();
    search(0, full, &masks, max_cover, &mut chosen, &mut best);
    best.sort_unstable();
    Ok(best)
}

fn search(
    covered: u32,
    full: u32,
    masks: &[u32],
    max_cover: u32,
    chosen: &mut Vec<usize>,
    best: &mut Vec<usize>,
) {
    if covered == full {
        if chosen.len() < best.len() {
            *best = chosen.clone();
        }
        return;
    }
    let uncovered = (full & !covered).count_ones();
    let need = uncovered.div_ceil(max_cover) as usize;
    if chosen.len() + need >= best.len() {
        return;
    }
    let p = (full & !covered).trailing_zeros();
    let mut cands: Vec<usize> = (0..masks.len())
        .filter(|&c| masks[c] & (1 << p) != 0)
        .collect();
    cands.sort_by_key(|&c| std::cmp::Reverse((masks[c] & !covered).count_ones()));
    for c in cands {
        chosen.push(c);
        search(covered | masks[c], full, masks, max_cover, chosen, best);
        chosen.pop();
    }
}

fn entropy_of_count(count: usize) -> f64 {
    if count <= 1 {
        0.0
    } else {
        (count as f64).ln()
    }
}

/// `log N(eps)` with `N` the greedy upper bound; zero when one center suffices.
pub fn metric_entropy(eps: f64, s: &FiniteMetricSet) -> f64 {
    CoveringOracle::new(s).entropy(eps)
}

/// Covering counts and entropies over decreasing scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    pub scales: Vec<f64>,
    pub lower: Vec<usize>,
    pub counts: Vec<usize>,
    pub entropies: Vec<f64>,
}

pub fn entropy_profile(s: &FiniteMetricSet, scales: &[f64]) -> Result<EntropyProfile> {
    if scales.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("scales must be positive"));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("scales must be strictly decreasing"));
    }
    let oracle = CoveringOracle::new(s);
    let counts: Vec<usize> = scales.iter().map(|&e| oracle.upper(e)).collect();
    Ok(EntropyProfile {
        scales: scales.to_vec(),
        lower: scales.iter().map(|&e| oracle.lower(e)).collect(),
        entropies: counts.iter().map(|&c| entropy_of_count(c)).collect(),
        counts,
    })
}

/// Geometric grid for [`entropy_integral`]: `nodes` intervals spread over
/// `octaves` halvings below the upper limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub nodes: usize,
    pub octaves: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            nodes: 64,
            octaves: 16,
        }
    }
}

/// Upper Riemann sum of `eps ↦ √(log N(eps))` over `(0, D]`.
///
/// Nodes are `e_j = D·2^(-octaves·j/nodes)`; each interval `[e_{j+1}, e_j]`
/// is charged the integrand at its left endpoint, which dominates because the
/// integrand is nonincreasing. The head `(0, e_nodes]` is charged
/// `e_nodes·√(log |s|)`.
pub fn entropy_integral(s: &FiniteMetricSet, d_max: f64, grid: Quadrature) -> Result<f64> {
    entropy_integral_with(&CoveringOracle::new(s), d_max, grid)
}

pub fn entropy_integral_with(oracle: &CoveringOracle<'_>, d_max: f64, grid: Quadrature) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(invalid("upper limit D must be positive"));
    }
    if grid.octaves == 0 || grid.nodes < 2 * grid.octaves as usize {
        return Err(invalid(format!(
            "quadrature needs at least 2 nodes per octave, got {} nodes over {} octaves",
            grid.nodes, grid.octaves
        )));
    }
    let node = |j: usize| d_max * (-(f64::from(grid.octaves) * j as f64) / grid.nodes as f64).exp2();
    let mut total = 0.0;
    for j in 0..grid.nodes {
        let (hi, lo) = (node(j), node(j + 1));
        total += (hi - lo) * oracle.entropy(lo).sqrt();
    }
    let head = node(grid.nodes);
    total += head * entropy_of_count(oracle.set().len()).sqrt();
    Ok(total)
}

/// `Σ_{k<K} ε_k √(log N(ε_k))` with `ε_k = D·2^-k`.
pub fn dyadic_sum(s: &FiniteMetricSet, d_max: f64, depth: usize) -> f64 {
    dyadic_sum_with(&CoveringOracle::new(s), d_max, depth)
}

pub fn dyadic_sum_with(oracle: &CoveringOracle<'_>, d_max: f64, depth: usize) -> f64 {
    (0..depth)
        .map(|k| {
            let eps = d_max * (-(k as f64)).exp2();
            eps * oracle.entropy(eps).sqrt()
        })
        .sum()
}

/// `(1 + 2R/eps)^dim`, the volumetric covering bound for a Euclidean ball.
pub fn euclidean_ball_covering_bound(radius: f64, eps: f64, dim: u32) -> f64 {
    (1.0 + 2.0 * radius / eps).powi(dim as i32)
}

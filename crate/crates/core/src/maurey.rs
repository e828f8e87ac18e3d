//! Maurey's empirical method for `absconv(X/√n; R) = {Xθ/√n : ‖θ‖₁ ≤ R}`:
//! atom distributions, variance control, sparsification and explicit nets.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::report::CheckReport;
use crate::rng;
use crate::stats::McEstimate;

/// Slack on `‖θ‖₁ ≤ R`.
pub const L1_SLACK: f64 = 1e-12;
pub const DEFAULT_MAX_ATTEMPTS: usize = 64;
/// Largest `(2d+1)^k` that [`l1_hull_net_construct`] will enumerate.
pub const NET_BUDGET: u64 = 1_000_000;
pub const COVERAGE_PROBES: usize = 500;
/// Two-sided slack for the Monte Carlo match against the closed form. The
/// suite runs this check once per instance, so 3σ would flag a correct
/// implementation a few times per hundred runs; 4.5σ keeps a 200-instance
/// family below 0.2%.
pub const MC_MATCH_SIGMAS: f64 = 4.5;
const DEDUP_GRID: f64 = 1e-9;

/// Design columns used as hull generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDictionary {
    x: DMatrix<f64>,
    normalized: bool,
}

impl ColumnDictionary {
    /// Flags the dictionary as normalized when every `‖col_j‖₂ ≤ √n`.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("dictionary needs at least one row and one column"));
        }
        let limit = (x.nrows() as f64).sqrt() * (1.0 + 1e-12);
        let normalized = x.column_iter().all(|c| c.norm() <= limit);
        Ok(Self { x, normalized })
    }

    /// Gaussian columns rescaled to norm `√n·s_j` with `s_j ∈ [min_scale, 1]`.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, min_scale: f64, rng: &mut R) -> Result<Self> {
        let mut x = linalg::gaussian_matrix(n, d, rng);
        linalg::normalize_columns(&mut x);
        for mut c in x.column_iter_mut() {
            let s = if min_scale >= 1.0 { 1.0 } else { rng.random_range(min_scale..=1.0) };
            c *= s;
        }
        Self::new(x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(invalid("dictionary columns must have norm at most √n"))
        }
    }

    /// `Xθ/√n`.
    pub fn image(&self, theta: &[f64]) -> Result<DVector<f64>> {
        if theta.len() != self.d() {
            return Err(invalid("θ length differs from the number of columns"));
        }
        Ok(&self.x * DVector::from_column_slice(theta) / (self.n() as f64).sqrt())
    }

    pub fn atom_vector(&self, atom: Atom, radius: f64) -> DVector<f64> {
        match atom {
            Atom::Zero => DVector::zeros(self.n()),
            Atom::Column { index, negative } => {
                let s = if negative { -radius } else { radius };
                self.x.column(index) * (s / (self.n() as f64).sqrt())
            }
        }
    }
}

/// An extreme point `±R·col_j/√n` of the hull, or the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Atom {
    Zero,
    Column { index: usize, negative: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomDistribution {
    pub radius: f64,
    pub atoms: Vec<(Atom, f64)>,
}

impl AtomDistribution {
    /// `Σ p·atom`, summed exactly over the finite support.
    pub fn expectation(&self, dict: &ColumnDictionary) -> DVector<f64> {
        self.atoms
            .iter()
            .fold(DVector::zeros(dict.n()), |acc, &(a, p)| acc + dict.atom_vector(a, self.radius) * p)
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.atoms.iter().map(|a| a.1)).expect("probabilities are nonnegative and sum to 1")
    }
}

fn l1_norm(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v.abs()).sum()
}

fn check_theta(theta: &[f64], radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(invalid("R must be positive"));
    }
    let l1 = l1_norm(theta);
    if l1 > radius + L1_SLACK {
        return Err(invalid(format!("‖θ‖₁ = {l1} exceeds R = {radius}")));
    }
    Ok(())
}

/// `Z = sign(θ_j)·R·col_j/√n` with probability `|θ_j|/R`, else `Z = 0`.
pub fn maurey_distribution(theta: &[f64], radius: f64) -> Result<AtomDistribution> {
    check_theta(theta, radius)?;
    let mut atoms: Vec<(Atom, f64)> = theta
        .iter()
        .enumerate()
        .filter(|(_, &t)| t != 0.0)
        .map(|(j, &t)| {
            (
                Atom::Column {
                    index: j,
                    negative: t < 0.0,
                },
                t.abs() / radius,
            )
        })
        .collect();
    let zero = (1.0 - l1_norm(theta) / radius).max(0.0);
    if zero > 0.0 || atoms.is_empty() {
        atoms.push((Atom::Zero, zero.max(if atoms.is_empty() { 1.0 } else { 0.0 })));
    }
    Ok(AtomDistribution { radius, atoms })
}

/// Exact `E‖Z‖² = Σ_j |θ_j|·R·‖col_j‖²/n`.
pub fn maurey_second_moment(theta: &[f64], radius: f64, dict: &ColumnDictionary) -> Result<f64> {
    dict.require_normalized()?;
    check_theta(theta, radius)?;
    if theta.len() != dict.d() {
        return Err(invalid("θ length differs from the number of columns"));
    }
    let n = dict.n() as f64;
    Ok(theta
        .iter()
        .zip(dict.x.column_iter())
        .map(|(t, c)| t.abs() * radius * c.norm_squared() / n)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageError {
    pub mc: McEstimate,
    /// `(E‖Z‖² − ‖v‖²)/k`.
    pub closed_form: f64,
    /// `R²/k`.
    pub bound: f64,
}

impl AverageError {
    pub fn mc_matches(&self) -> bool {
        (self.mc.mean - self.closed_form).abs() <= 3.0 * self.mc.stderr + 1e-15
    }

    pub fn holds(&self) -> bool {
        self.mc.mean <= self.bound + 3.0 * self.mc.stderr
    }
}

/// `(E‖Z‖² − ‖v‖²)/k`, the variance of the `k`-sample average.
pub fn maurey_closed_form_error(theta: &[f64], radius: f64, dict: &ColumnDictionary, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let m2 = maurey_second_moment(theta, radius, dict)?;
    let v = dict.image(theta)?;
    Ok(((m2 - v.norm_squared()) / k as f64).max(0.0))
}

fn average_of<R: Rng + ?Sized>(
    dist: &AtomDistribution,
    sampler: &WeightedIndex<f64>,
    dict: &ColumnDictionary,
    k: usize,
    rng: &mut R,
) -> (Vec<Atom>, DVector<f64>) {
    let mut atoms: Vec<Atom> = (0..k).map(|_| dist.atoms[sampler.sample(rng)].0).collect();
    atoms.sort();
    let value = average_vector(&atoms, dict, dist.radius);
    (atoms, value)
}

fn average_vector(atoms: &[Atom], dict: &ColumnDictionary, radius: f64) -> DVector<f64> {
    if atoms.is_empty() {
        return DVector::zeros(dict.n());
    }
    let sum = atoms
        .iter()
        .fold(DVector::zeros(dict.n()), |acc, &a| acc + dict.atom_vector(a, radius));
    sum / atoms.len() as f64
}

/// Monte Carlo `E‖Z̄_k − v‖²` next to its closed form.
pub fn maurey_average_error(
    theta: &[f64],
    radius: f64,
    dict: &ColumnDictionary,
    k: usize,
    n_mc: usize,
    seed: u64,
) -> Result<AverageError> {
    let closed_form = maurey_closed_form_error(theta, radius, dict, k)?;
    let dist = maurey_distribution(theta, radius)?;
    let sampler = dist.sampler();
    let v = dict.image(theta)?;
    let errs = rng::map_trials(n_mc, seed, "maurey-average", |_, r| {
        let (_, avg) = average_of(&dist, &sampler, dict, k, r);
        (avg - &v).norm_squared()
    });
    Ok(AverageError {
        mc: McEstimate::from_samples(&errs),
        closed_form,
        bound: radius * radius / k as f64,
    })
}

/// `k = ⌈R²/ε²⌉`, with a relative slack of `1e-12` so exact ratios such as
/// `1/0.5²` are not pushed up by rounding.
pub fn maurey_k(radius: f64, eps: f64) -> u64 {
    let q = radius * radius / (eps * eps);
    (q * (1.0 - 1e-12)).ceil().max(0.0) as u64
}

/// An average of `k` atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseCombination {
    pub k: usize,
    pub atoms: Vec<Atom>,
    pub value: Vec<f64>,
}

impl SparseCombination {
    /// `value` equals the recomputed atom average within `1e-12`.
    pub fn consistent(&self, dict: &ColumnDictionary, radius: f64) -> bool {
        let recomputed = average_vector(&self.atoms, dict, radius);
        recomputed
            .iter()
            .zip(&self.value)
            .all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsifyResult {
    pub combination: SparseCombination,
    /// `‖Z̄_k − v‖₂` of the returned combination.
    pub error: f64,
    pub attempts: usize,
    pub success: bool,
}

/// Resamples `k = ⌈R²/ε²⌉`-atom averages until one lands within `ε` of
/// `v = Xθ/√n`; on failure the closest attempt is returned unflagged.
pub fn maurey_sparsify(
    theta: &[f64],
    radius: f64,
    dict: &ColumnDictionary,
    eps: f64,
    max_attempts: usize,
    seed: u64,
) -> Result<SparsifyResult> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if max_attempts == 0 {
        return Err(invalid("max_attempts must be at least 1"));
    }
    dict.require_normalized()?;
    let dist = maurey_distribution(theta, radius)?;
    let sampler = dist.sampler();
    let v = dict.image(theta)?;
    let k = maurey_k(radius, eps).max(1) as usize;
    let mut best: Option<(Vec<Atom>, DVector<f64>, f64)> = None;
    for attempt in 1..=max_attempts {
        let mut r = rng::substream(seed, "maurey-sparsify", attempt as u64);
        let (atoms, avg) = average_of(&dist, &sampler, dict, k, &mut r);
        let err = (&avg - &v).norm();
        if err <= eps {
            return Ok(SparsifyResult {
                combination: SparseCombination {
                    k,
                    atoms,
                    value: avg.as_slice().to_vec(),
                },
                error: err,
                attempts: attempt,
                success: true,
            });
        }
        if best.as_ref().is_none_or(|b| err < b.2) {
            best = Some((atoms, avg, err));
        }
    }
    let (atoms, avg, err) = best.expect("at least one attempt");
    Ok(SparsifyResult {
        combination: SparseCombination {
            k,
            atoms,
            value: avg.as_slice().to_vec(),
        },
        error: err,
        attempts: max_attempts,
        success: false,
    })
}

/// `(2d+1)^⌈R²/ε²⌉` as an exact big integer.
pub fn l1_hull_net_bound(d: usize, radius: f64, eps: f64) -> Result<BigUint> {
    if !(eps > 0.0) || !(radius >= 0.0) {
        return Err(invalid("need eps > 0 and R ≥ 0"));
    }
    let k = maurey_k(radius, eps);
    let k = u32::try_from(k).map_err(|_| invalid(format!("exponent {k} is too large")))?;
    Ok(BigUint::from(2 * d as u64 + 1).pow(k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullNet {
    pub k: usize,
    pub bound: u64,
    pub members: Vec<Vec<f64>>,
    /// Random hull points checked.
    pub probes: usize,
    /// Probes whose sparsified combination is a net member within `ε`.
    pub sparsify_hits: usize,
    /// Largest distance from a probe to its nearest net member.
    pub max_nearest: f64,
}

impl HullNet {
    pub fn covers(&self, eps: f64) -> bool {
        self.sparsify_hits == self.probes && self.max_nearest <= eps
    }
}

fn dedup_key(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x / DEDUP_GRID).round() as i64).collect()
}

/// A point uniform in direction with radius `R·U`, inside the ℓ1 ball.
pub fn random_l1_theta<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let g = rng::normal_vec(rng, d);
    let l1 = l1_norm(&g);
    let scale = if l1 > 0.0 { radius * rng.random::<f64>() / l1 } else { 0.0 };
    g.into_iter().map(|v| v * scale).collect()
}

/// Enumerates every average of `k` atoms (multisets of the `2d+1` atoms),
/// deduplicates, and checks coverage of `COVERAGE_PROBES` random hull points.
pub fn l1_hull_net_construct(dict: &ColumnDictionary, radius: f64, eps: f64, seed: u64) -> Result<HullNet> {
    dict.require_normalized()?;
    if !(radius > 0.0) || !(eps > 0.0) {
        return Err(invalid("need R > 0 and eps > 0"));
    }
    let bound = l1_hull_net_bound(dict.d(), radius, eps)?;
    let bound = u64::try_from(&bound).ok().filter(|&b| b <= NET_BUDGET).ok_or(Error::TooLarge {
        what: "atom tuples to enumerate; use maurey_sparsify as an implicit net",
        actual: usize::try_from(&bound).unwrap_or(usize::MAX),
        limit: NET_BUDGET as usize,
    })?;
    let k = maurey_k(radius, eps).max(1) as usize;
    let mut all_atoms = vec![Atom::Zero];
    for j in 0..dict.d() {
        all_atoms.push(Atom::Column { index: j, negative: false });
        all_atoms.push(Atom::Column { index: j, negative: true });
    }
    let vecs: Vec<DVector<f64>> = all_atoms.iter().map(|&a| dict.atom_vector(a, radius)).collect();

    // Nondecreasing index sequences enumerate each multiset once.
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut members = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let sum = idx.iter().fold(DVector::zeros(dict.n()), |acc, &i| acc + &vecs[i]);
        let avg = sum / k as f64;
        if seen.insert(dedup_key(avg.as_slice())) {
            members.push(avg.as_slice().to_vec());
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] + 1 < vecs.len()) else {
            break;
        };
        let next = idx[pos] + 1;
        for slot in &mut idx[pos..] {
            *slot = next;
        }
    }

    let mut rng = rng::substream(seed, "hull-net-probes", 0);
    let mut sparsify_hits = 0;
    let mut max_nearest: f64 = 0.0;
    for p in 0..COVERAGE_PROBES {
        let theta = random_l1_theta(dict.d(), radius, &mut rng);
        let v = dict.image(&theta)?;
        let nearest = members
            .iter()
            .map(|m| m.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        max_nearest = max_nearest.max(nearest);
        let sp = maurey_sparsify(&theta, radius, dict, eps, DEFAULT_MAX_ATTEMPTS, rng::derive_seed(seed, &format!("probe{p}")))?;
        if sp.success && sp.combination.k == k && seen.contains(&dedup_key(&sp.combination.value)) {
            sparsify_hits += 1;
        }
    }
    Ok(HullNet {
        k,
        bound,
        members,
        probes: COVERAGE_PROBES,
        sparsify_hits,
        max_nearest,
    })
}

/// One random instance of the Maurey suite.
#[derive(Debug, Clone)]
pub struct MaureyInstance {
    pub dict: ColumnDictionary,
    pub theta: Vec<f64>,
    pub radius: f64,
    pub eps: f64,
}

impl MaureyInstance {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let n = rng.random_range(1..=50);
        let d = rng.random_range(1..=20);
        let dict = ColumnDictionary::random(n, d, 0.5, rng)?;
        let radius = rng.random_range(0.5..2.0);
        let mut theta = random_l1_theta(d, radius, rng);
        match rng.random_range(0..4) {
            // On the sphere ‖θ‖₁ = R.
            0 => {
                let l1 = l1_norm(&theta);
                if l1 > 0.0 {
                    theta.iter_mut().for_each(|t| *t *= radius / l1);
                }
            }
            // A single vertex.
            1 => {
                theta = vec![0.0; d];
                theta[rng.random_range(0..d)] = if rng.random::<bool>() { radius } else { -radius };
            }
            _ => {}
        }
        let eps = radius * rng.random_range(0.3..1.0);
        Ok(Self { dict, theta, radius, eps })
    }
}

/// Unbiasedness, second moment, `1/k` law and sparsification per instance.
pub fn run_maurey_suite(instances: usize, n_mc: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let per: Result<Vec<Vec<CheckReport>>> = rng::map_trials(instances, seed, "maurey-suite", |i, r| {
        let inst = MaureyInstance::random(r)?;
        let MaureyInstance { dict, theta, radius, eps } = &inst;
        let s = rng::derive_seed(seed, &format!("maurey{i}"));
        let mut out = Vec::new();

        let v = dict.image(theta)?;
        let e = maurey_distribution(theta, *radius)?.expectation(dict);
        out.push(CheckReport::exact(format!("unbiased#{i}"), (e - &v).amax(), 0.0, 1e-12));

        let m2 = maurey_second_moment(theta, *radius, dict)?;
        out.push(CheckReport::exact(format!("second_moment#{i}"), m2, radius * l1_norm(theta), 1e-12));

        let k = maurey_k(*radius, *eps).max(1) as usize;
        let c1 = maurey_closed_form_error(theta, *radius, dict, k)?;
        let c2 = maurey_closed_form_error(theta, *radius, dict, 2 * k)?;
        out.push(CheckReport::exact(format!("one_over_k#{i}"), (c1 - 2.0 * c2).abs(), 0.0, 1e-12 * c1.max(1.0)));

        let avg = maurey_average_error(theta, *radius, dict, k, n_mc, s)?;
        let mut mc = CheckReport::stochastic(
            format!("average_error_mc#{i}"),
            &avg.mc,
            avg.closed_form,
            avg.mc.stderr,
            MC_MATCH_SIGMAS,
            s,
        );
        // Two-sided: the estimate must match the closed form.
        mc.margin = MC_MATCH_SIGMAS * avg.mc.stderr + 1e-15 - (avg.mc.mean - avg.closed_form).abs();
        mc.pass = mc.margin >= 0.0;
        out.push(mc);

        let sp = maurey_sparsify(theta, *radius, dict, *eps, DEFAULT_MAX_ATTEMPTS, s)?;
        let direct = {
            let val = DVector::from_vec(sp.combination.value.clone());
            (val - &v).norm()
        };
        let mut rep = CheckReport::exact(format!("sparsify#{i}"), direct, *eps, 0.0);
        rep.pass &= sp.success && sp.combination.consistent(dict, *radius);
        rep.n_samples = sp.attempts;
        out.push(rep);
        Ok(out)
    })
    .into_iter()
    .collect();
    Ok(per?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dict(n: usize, d: usize, seed: u64) -> ColumnDictionary {
        let mut r = rng::substream(seed, "dict", 0);
        ColumnDictionary::random(n, d, 0.5, &mut r).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let dc = dict(6, 3, 1);
        let mut theta = vec![0.0; 3];
        theta[1] = 1.5;
        let dist = maurey_distribution(&theta, 1.5).unwrap();
        assert_eq!(dist.atoms, vec![(Atom::Column { index: 1, negative: false }, 1.0)]);
        assert!((dist.expectation(&dc) - dc.image(&theta).unwrap()).amax() < 1e-15);

        let zero = maurey_distribution(&[0.0; 3], 1.0).unwrap();
        assert_eq!(zero.atoms, vec![(Atom::Zero, 1.0)]);

        assert!(maurey_distribution(&[0.6, -0.5], 1.0).is_err());
        assert!(maurey_distribution(&[0.5, -0.5 - 1e-13], 1.0).is_ok());
    }

    #[test]
    fn second_moment_examples() {
        let mut x = DMatrix::from_element(4, 2, 0.5);
        x[(0, 1)] = 2.0;
        x[(1, 1)] = 0.0;
        x[(2, 1)] = 0.0;
        x[(3, 1)] = 0.0;
        let dc = ColumnDictionary::new(x).unwrap();
        assert!(dc.is_normalized());
        assert_eq!(maurey_second_moment(&[0.0, 0.0], 1.0, &dc).unwrap(), 0.0);
        // ‖col_1‖ = √n = 2, θ = R e_1: exactly R².
        assert!((maurey_second_moment(&[0.0, 1.3], 1.3, &dc).unwrap() - 1.69).abs() < 1e-15);
        let big = ColumnDictionary::new(DMatrix::from_element(4, 1, 3.0)).unwrap();
        assert!(!big.is_normalized());
        assert!(maurey_second_moment(&[0.1], 1.0, &big).is_err());
    }

    #[test]
    fn average_error_examples() {
        let dc = dict(10, 4, 2);
        let vertex = [0.0, -0.8, 0.0, 0.0];
        let a = maurey_average_error(&vertex, 0.8, &dc, 3, 500, 1).unwrap();
        assert!(a.mc.mean < 1e-28);
        assert!(a.closed_form.abs() < 1e-15);

        let theta = [0.2, -0.3, 0.1, 0.0];
        let a = maurey_average_error(&theta, 1.0, &dc, 4, 40_000, 2).unwrap();
        assert!(a.mc_matches() && a.holds(), "{a:?}");
        let c8 = maurey_closed_form_error(&theta, 1.0, &dc, 8).unwrap();
        assert!((a.closed_form - 2.0 * c8).abs() < 1e-15);
    }

    #[test]
    fn k_and_bound_examples() {
        assert_eq!(maurey_k(1.0, 0.5), 4);
        assert_eq!(maurey_k(1.0, 1.0), 1);
        assert_eq!(maurey_k(0.0, 0.3), 0);
        assert_eq!(maurey_k(1.0, 0.49), 5);
        assert_eq!(l1_hull_net_bound(3, 1.0, 0.5).unwrap(), BigUint::from(2401u32));
        assert_eq!(l1_hull_net_bound(7, 0.0, 0.5).unwrap(), BigUint::from(1u32));
        assert_eq!(l1_hull_net_bound(1, 1.0, 1.0).unwrap(), BigUint::from(3u32));
        let huge = l1_hull_net_bound(1000, 10.0, 0.1).unwrap();
        assert_eq!(huge, BigUint::from(2001u32).pow(10_000));
    }

    #[test]
    fn sparsify_examples() {
        let dc = dict(8, 5, 3);
        let vertex = [0.0, 0.0, 1.0, 0.0, 0.0];
        let s = maurey_sparsify(&vertex, 1.0, &dc, 0.5, 64, 1).unwrap();
        assert!(s.success && s.attempts == 1 && s.error < 1e-15);
        assert_eq!(s.combination.k, 4);

        let theta = [0.3, -0.2, 0.1, 0.25, -0.15];
        let s = maurey_sparsify(&theta, 1.0, &dc, 0.4, 64, 2).unwrap();
        assert!(s.success && s.error <= 0.4);
        assert!(s.combination.consistent(&dc, 1.0));
        let direct = (DVector::from_vec(s.combination.value.clone()) - dc.image(&theta).unwrap()).norm();
        assert!((direct - s.error).abs() < 1e-15);
    }

    #[test]
    fn net_examples() {
        let dc = dict(5, 1, 4);
        let net = l1_hull_net_construct(&dc, 1.0, 1.0, 1).unwrap();
        assert_eq!(net.k, 1);
        assert!(net.members.len() <= 3);

        let dc2 = dict(6, 2, 5);
        let net = l1_hull_net_construct(&dc2, 1.0, 1.0, 2).unwrap();
        assert!(net.covers(1.0), "{net:?}");
        assert!(net.members.len() as u64 <= net.bound);

        let net = l1_hull_net_construct(&dc2, 1.0, 0.5, 3).unwrap();
        assert_eq!(net.k, 4);
        assert!(net.members.len() as u64 <= 625);
        assert!(net.covers(0.5));

        let wide = dict(4, 20, 6);
        assert!(matches!(
            l1_hull_net_construct(&wide, 1.0, 0.2, 0),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn suite_is_clean_and_deterministic() {
        let a = run_maurey_suite(30, 2000, 7).unwrap();
        assert_eq!(a.len(), 150);
        assert!(a.iter().all(|r| r.pass), "{:?}", a.iter().find(|r| !r.pass));
        assert_eq!(a, run_maurey_suite(30, 2000, 7).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn maurey_invariants(seed in any::<u64>()) {
            let mut r = rng::substream(seed, "prop-maurey", 0);
            let inst = MaureyInstance::random(&mut r).unwrap();
            let v = inst.dict.image(&inst.theta).unwrap();
            let e = maurey_distribution(&inst.theta, inst.radius).unwrap().expectation(&inst.dict);
            prop_assert!((e - &v).amax() <= 1e-12);
            let m2 = maurey_second_moment(&inst.theta, inst.radius, &inst.dict).unwrap();
            prop_assert!(m2 <= inst.radius * l1_norm(&inst.theta) + 1e-12);
            prop_assert!(m2 <= inst.radius * inst.radius + 1e-12);
            let k = r.random_range(1..20);
            let a = maurey_closed_form_error(&inst.theta, inst.radius, &inst.dict, k).unwrap();
            let b = maurey_closed_form_error(&inst.theta, inst.radius, &inst.dict, 2 * k).unwrap();
            prop_assert!((a - 2.0 * b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}

//! Exact checks of the tensorization chain on finite product spaces.
//!
//! Outcomes are enumerated in lexicographic order (coordinate 0 most
//! significant) and every expectation is a plain ordered sum, so results are
//! bit-reproducible. Logarithms are natural; `0·log 0 = 0`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::report::CheckReport;
use crate::rng;

/// Maximum number of outcomes of a product space.
pub const OUTCOME_BUDGET: usize = 4096;
/// Maximum dimension for the Bernoulli log-Sobolev check.
pub const MAX_RADEMACHER_DIM: usize = 12;
/// Tolerance for every exact inequality in this module.
pub const EXACT_TOL: f64 = 1e-10;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Product of independent finite-support distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProductSpace {
    supports: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    probs: Vec<f64>,
}

impl FiniteProductSpace {
    pub fn new(supports: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if supports.len() != weights.len() {
            return Err(invalid("supports and weights differ in length"));
        }
        let mut total = 1usize;
        for (i, (s, w)) in supports.iter().zip(&weights).enumerate() {
            if s.is_empty() || s.len() != w.len() {
                return Err(invalid(format!("coordinate {i}: support/weight size mismatch")));
            }
            if w.iter().any(|&p| !(p >= 0.0)) {
                return Err(invalid(format!("coordinate {i}: negative weight")));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(invalid(format!("coordinate {i}: weights sum to {sum}")));
            }
            total = total.saturating_mul(s.len());
            if total > OUTCOME_BUDGET {
                return Err(Error::TooLarge {
                    what: "outcome count",
                    actual: total,
                    limit: OUTCOME_BUDGET,
                });
            }
        }
        let n = supports.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * supports[i + 1].len();
        }
        let mut space = Self {
            supports,
            weights,
            strides,
            probs: Vec::new(),
        };
        space.probs = (0..total)
            .map(|idx| {
                (0..n)
                    .map(|i| space.weights[i][space.digit(idx, i)])
                    .product()
            })
            .collect();
        Ok(space)
    }

    /// Equal weights on each support.
    pub fn uniform(supports: Vec<Vec<f64>>) -> Result<Self> {
        let weights = supports
            .iter()
            .map(|s| vec![1.0 / s.len() as f64; s.len()])
            .collect();
        Self::new(supports, weights)
    }

    /// Uniform measure on `{0,1}ⁿ`.
    pub fn binary_cube(n: usize) -> Result<Self> {
        Self::uniform(vec![vec![0.0, 1.0]; n])
    }

    /// Uniform measure on `{−1,1}ⁿ`.
    pub fn rademacher(n: usize) -> Result<Self> {
        Self::uniform(vec![vec![-1.0, 1.0]; n])
    }

    pub fn dim(&self) -> usize {
        self.supports.len()
    }

    pub fn outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn support(&self, i: usize) -> &[f64] {
        &self.supports[i]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    #[inline]
    fn digit(&self, idx: usize, i: usize) -> usize {
        (idx / self.strides[i]) % self.supports[i].len()
    }

    /// `idx` with coordinate `i` replaced by atom `y`.
    #[inline]
    fn update(&self, idx: usize, i: usize, y: usize) -> usize {
        idx - self.digit(idx, i) * self.strides[i] + y * self.strides[i]
    }

    /// Atom values of outcome `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.supports[i][self.digit(idx, i)])
            .collect()
    }

    fn is_rademacher(&self) -> bool {
        self.supports.iter().zip(&self.weights).all(|(s, w)| {
            s.len() == 2
                && ((s[0] == -1.0 && s[1] == 1.0) || (s[0] == 1.0 && s[1] == -1.0))
                && w.iter().all(|&p| (p - 0.5).abs() <= WEIGHT_SUM_TOL)
        })
    }
}

/// Real function on the outcomes of a product space, stored by outcome index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFunction {
    pub values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn from_fn(sp: &FiniteProductSpace, f: impl Fn(&[f64]) -> f64) -> Self {
        Self {
            values: (0..sp.outcomes()).map(|i| f(&sp.point(i))).collect(),
        }
    }

    pub fn from_values(sp: &FiniteProductSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != sp.outcomes() {
            return Err(invalid(format!(
                "function has {} values, space has {} outcomes",
                values.len(),
                sp.outcomes()
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(sp: &FiniteProductSpace, c: f64) -> Self {
        Self {
            values: vec![c; sp.outcomes()],
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v >= 0.0)) {
            Some(outcome) => Err(Error::NegativeValue {
                outcome,
                value: self.values[outcome],
            }),
            None => Ok(()),
        }
    }
}

/// An inequality `lhs ≤ rhs` evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lhs: f64,
    pub rhs: f64,
}

impl Gap {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

fn check_domain(f: &DiscreteFunction, sp: &FiniteProductSpace) {
    assert_eq!(
        f.values.len(),
        sp.outcomes(),
        "function is not defined on this space"
    );
}

pub fn exact_expectation(f: &DiscreteFunction, sp: &FiniteProductSpace) -> f64 {
    check_domain(f, sp);
    f.values
        .iter()
        .zip(&sp.probs)
        .map(|(v, p)| v * p)
        .sum()
}

pub fn exact_variance(f: &DiscreteFunction, sp: &FiniteProductSpace) -> f64 {
    let m = exact_expectation(f, sp);
    exact_expectation(&f.map(|v| (v - m) * (v - m)), sp)
}

/// Integrates out coordinate `i`: `x ↦ Σ_y f(x with x_i = y)·w_i(y)`.
pub fn cond_exp_except_coord(i: usize, f: &DiscreteFunction, sp: &FiniteProductSpace) -> DiscreteFunction {
    check_domain(f, sp);
    assert!(i < sp.dim(), "coordinate {i} out of range");
    let w = sp.weights(i);
    DiscreteFunction {
        values: (0..sp.outcomes())
            .map(|idx| {
                w.iter()
                    .enumerate()
                    .map(|(y, p)| f.values[sp.update(idx, i, y)] * p)
                    .sum()
            })
            .collect(),
    }
}

/// `Var f ≤ Σ_i E[(f − E⁽ⁱ⁾f)²]`.
pub fn efron_stein_gap(f: &DiscreteFunction, sp: &FiniteProductSpace) -> Gap {
    let rhs = (0..sp.dim())
        .map(|i| {
            let ce = cond_exp_except_coord(i, f, sp);
            let sq = DiscreteFunction {
                values: f
                    .values
                    .iter()
                    .zip(&ce.values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .collect(),
            };
            exact_expectation(&sq, sp)
        })
        .sum();
    Gap {
        lhs: exact_variance(f, sp),
        rhs,
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `Ent f = E[f log f] − E f · log E f` for `f ≥ 0`.
pub fn entropy_functional(f: &DiscreteFunction, sp: &FiniteProductSpace) -> Result<f64> {
    f.check_nonnegative()?;
    let m = exact_expectation(f, sp);
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(exact_expectation(&f.map(xlogx), sp) - xlogx(m))
}

/// Evaluates the variational formula at one `T`: returns `(Ent Y, E[Y(log T − log E T)])`.
pub fn entropy_duality_check(
    y: &DiscreteFunction,
    t: &DiscreteFunction,
    sp: &FiniteProductSpace,
) -> Result<(f64, f64)> {
    let ent = entropy_functional(y, sp)?;
    if let Some(outcome) = t.values.iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!(
            "T must be strictly positive, T = {} at outcome {outcome}",
            t.values[outcome]
        )));
    }
    let log_mean = exact_expectation(t, sp).ln();
    let integrand = DiscreteFunction {
        values: y
            .values
            .iter()
            .zip(&t.values)
            .map(|(yv, tv)| yv * (tv.ln() - log_mean))
            .collect(),
    };
    Ok((ent, exact_expectation(&integrand, sp)))
}

/// Entropy along coordinate `i` with the others held fixed, as a function of
/// the outcome.
pub fn cond_entropy_except_coord(
    i: usize,
    y: &DiscreteFunction,
    sp: &FiniteProductSpace,
) -> Result<DiscreteFunction> {
    y.check_nonnegative()?;
    let mean = cond_exp_except_coord(i, y, sp);
    let ylogy = cond_exp_except_coord(i, &y.map(xlogx), sp);
    Ok(DiscreteFunction {
        values: ylogy
            .values
            .iter()
            .zip(&mean.values)
            .map(|(a, m)| a - xlogx(*m))
            .collect(),
    })
}

/// `Ent Y ≤ Σ_i E[Ent⁽ⁱ⁾ Y]`.
pub fn tensorization_gap(y: &DiscreteFunction, sp: &FiniteProductSpace) -> Result<Gap> {
    let lhs = entropy_functional(y, sp)?;
    let mut rhs = 0.0;
    for i in 0..sp.dim() {
        rhs += exact_expectation(&cond_entropy_except_coord(i, y, sp)?, sp);
    }
    Ok(Gap { lhs, rhs })
}

/// A joint probability table over a finite grid, lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub sizes: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let total: usize = sizes.iter().product();
        if total != probs.len() {
            return Err(invalid(format!(
                "table has {} entries, sizes imply {total}",
                probs.len()
            )));
        }
        if total > OUTCOME_BUDGET {
            return Err(Error::TooLarge {
                what: "outcome count",
                actual: total,
                limit: OUTCOME_BUDGET,
            });
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("negative probability"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("probabilities sum to {sum}")));
        }
        Ok(Self { sizes, probs })
    }

    /// Product of the given marginals.
    pub fn product(marginals: &[Vec<f64>]) -> Result<Self> {
        let sizes: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut probs = vec![1.0];
        for m in marginals {
            probs = probs
                .iter()
                .flat_map(|p| m.iter().map(move |q| p * q))
                .collect();
        }
        Self::new(sizes, probs)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    /// Shannon entropy in nats.
    pub fn shannon_entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| xlogx(p)).sum::<f64>()
    }

    /// Marginal of all coordinates except `i`.
    pub fn leave_one_out(&self, i: usize) -> JointPmf {
        let n = self.dim();
        let inner: usize = self.sizes[i + 1..].iter().product();
        let k = self.sizes[i];
        let outer = self.probs.len() / (inner * k);
        let mut probs = vec![0.0; outer * inner];
        for o in 0..outer {
            for y in 0..k {
                for r in 0..inner {
                    probs[o * inner + r] += self.probs[(o * k + y) * inner + r];
                }
            }
        }
        let sizes = (0..n).filter(|&j| j != i).map(|j| self.sizes[j]).collect();
        JointPmf { sizes, probs }
    }
}

/// Han: `H(X₁..Xₙ) ≤ (1/(n−1)) Σ_i H(X⁽ⁱ⁾)`.
pub fn han_inequality_gap(p: &JointPmf) -> Result<Gap> {
    let n = p.dim();
    if n < 2 {
        return Err(invalid("Han's inequality needs at least two coordinates"));
    }
    let rhs = (0..n)
        .map(|i| p.leave_one_out(i).shannon_entropy())
        .sum::<f64>()
        / (n - 1) as f64;
    Ok(Gap {
        lhs: p.shannon_entropy(),
        rhs,
    })
}

/// Bernoulli log-Sobolev: `Ent(f²) ≤ ½ E[Σ_i (f(X) − f(X flipped at i))²]`
/// on the uniform cube `{−1,1}ⁿ`.
pub fn bernoulli_lsi_gap(f: &DiscreteFunction, sp: &FiniteProductSpace) -> Result<Gap> {
    if !sp.is_rademacher() {
        return Err(invalid("Bernoulli LSI requires the uniform space on {-1,1}^n"));
    }
    if sp.dim() > MAX_RADEMACHER_DIM {
        return Err(Error::TooLarge {
            what: "Rademacher dimension",
            actual: sp.dim(),
            limit: MAX_RADEMACHER_DIM,
        });
    }
    check_domain(f, sp);
    let lhs = entropy_functional(&f.map(|v| v * v), sp)?;
    let energy = DiscreteFunction {
        values: (0..sp.outcomes())
            .map(|idx| {
                (0..sp.dim())
                    .map(|i| {
                        let flipped = sp.update(idx, i, 1 - sp.digit(idx, i));
                        let d = f.values[idx] - f.values[flipped];
                        d * d
                    })
                    .sum()
            })
            .collect(),
    };
    Ok(Gap {
        lhs,
        rhs: 0.5 * exact_expectation(&energy, sp),
    })
}

/// One randomly generated instance of every exact check, kept whole so a
/// violation can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub index: usize,
    pub cube_dim: usize,
    /// Function for Efron–Stein on uniform `{0,1}ⁿ`.
    pub f: Vec<f64>,
    /// Nonnegative `Y` for entropy duality and tensorization on `{0,1}ⁿ`.
    pub y: Vec<f64>,
    /// Positive `T` for entropy duality.
    pub t: Vec<f64>,
    /// Joint binary pmf for Han's inequality.
    pub pmf: Vec<f64>,
    /// Function on `{−1,1}ⁿ` for the Bernoulli LSI.
    pub g: Vec<f64>,
}

impl DiscreteInstance {
    pub fn random(index: usize, cube_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let m = 1usize << cube_dim;
        let f = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        // A quarter of the Y values are exact zeros to exercise 0·log 0.
        let y = (0..m)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(0.0..3.0)
                }
            })
            .collect();
        let t = (0..m).map(|_| rng.random_range(0.01..3.0)).collect();
        let raw: Vec<f64> = (0..m)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    -rng.random::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let pmf = if total > 0.0 {
            raw.iter().map(|v| v / total).collect()
        } else {
            let mut p = vec![0.0; m];
            p[0] = 1.0;
            p
        };
        let g = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        Self {
            index,
            cube_dim,
            f,
            y,
            t,
            pmf,
            g,
        }
    }

    /// The five exact checks for this instance, plus the duality equality at `T = Y`
    /// when `Y > 0`.
    pub fn check(&self) -> Result<Vec<CheckReport>> {
        let n = self.cube_dim;
        let cube = FiniteProductSpace::binary_cube(n)?;
        let rad = FiniteProductSpace::rademacher(n)?;
        let tag = |name: &str| format!("{name}#{}", self.index);

        let es = efron_stein_gap(&DiscreteFunction::from_values(&cube, self.f.clone())?, &cube);
        let y = DiscreteFunction::from_values(&cube, self.y.clone())?;
        let t = DiscreteFunction::from_values(&cube, self.t.clone())?;
        let (ent, dual) = entropy_duality_check(&y, &t, &cube)?;
        let tens = tensorization_gap(&y, &cube)?;
        let han = han_inequality_gap(&JointPmf::new(vec![2; n], self.pmf.clone())?)?;
        let lsi = bernoulli_lsi_gap(&DiscreteFunction::from_values(&rad, self.g.clone())?, &rad)?;

        Ok(vec![
            CheckReport::exact(tag("efron_stein"), es.lhs, es.rhs, EXACT_TOL),
            CheckReport::exact(tag("han"), han.lhs, han.rhs, EXACT_TOL),
            CheckReport::exact(tag("entropy_duality"), dual, ent, EXACT_TOL),
            CheckReport::exact(tag("tensorization"), tens.lhs, tens.rhs, EXACT_TOL),
            CheckReport::exact(tag("bernoulli_lsi"), lsi.lhs, lsi.rhs, EXACT_TOL),
        ])
    }
}

/// Output of [`run_discrete_suite`].
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteSuite {
    pub reports: Vec<CheckReport>,
    pub violations: Vec<DiscreteInstance>,
}

/// Generates `instances` random instances on `{0,1}ⁿ`/`{−1,1}ⁿ` (instance `i`
/// uses substream `i` of `(seed, "discrete")`) and runs every exact check.
pub fn run_discrete_suite(instances: usize, cube_dim: usize, seed: u64) -> Result<DiscreteSuite> {
    if cube_dim == 0 || (1usize << cube_dim) > OUTCOME_BUDGET {
        return Err(invalid(format!("cube dimension {cube_dim} out of range")));
    }
    let generated = rng::map_trials(instances, seed, "discrete", |i, rng| {
        let inst = DiscreteInstance::random(i, cube_dim, rng);
        let reports = inst.check();
        (inst, reports)
    });
    let mut reports = Vec::with_capacity(instances * 5);
    let mut violations = Vec::new();
    for (inst, r) in generated {
        let r = r?;
        if r.iter().any(|c| !c.pass) {
            violations.push(inst);
        }
        reports.extend(r);
    }
    Ok(DiscreteSuite {
        reports,
        violations,
    })
}

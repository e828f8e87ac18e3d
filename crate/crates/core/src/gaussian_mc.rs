//! Monte Carlo checks of the Gaussian concentration chain.
//!
//! Every check compares two [`McEstimate`]s (an exact side has zero stderr)
//! and passes when `lhs.mean ≤ rhs.mean + 3·(lhs.stderr + rhs.stderr)`.
//! Fields with a gradient or Lipschitz constant are validated against that
//! claim before sampling.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::report::CheckReport;
use crate::rng;
use crate::stats::McEstimate;

/// Slack, in standard errors, before a Monte Carlo check is declared failed.
pub const SLACK_SIGMAS: f64 = 3.0;

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const FD_POINTS: usize = 100;
const LIPSCHITZ_PAIRS: usize = 1000;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A function `ℝ^dim → ℝ` with optional gradient and Lipschitz constant.
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    pub dim: usize,
    eval: EvalFn,
    grad: Option<GradFn>,
    lipschitz: Option<f64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("grad", &self.grad.is_some())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

impl ScalarField {
    pub fn new(name: impl Into<String>, dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            grad: None,
            lipschitz: None,
        }
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(x))
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    /// Checks the gradient against central differences at 100 random points
    /// and the Lipschitz constant on 1000 random pairs.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let mut rng = rng::substream(seed, &format!("validate/{}", self.name), 0);
        if let Some(grad) = &self.grad {
            for _ in 0..FD_POINTS {
                let x = scaled(&rng::normal_vec(&mut rng, self.dim), 2.0);
                let g = grad(&x);
                if g.len() != self.dim {
                    return Err(invalid(format!("{}: gradient has wrong length", self.name)));
                }
                let mut xp = x.clone();
                let fd: Vec<f64> = (0..self.dim)
                    .map(|i| {
                        xp[i] = x[i] + FD_STEP;
                        let up = self.eval(&xp);
                        xp[i] = x[i] - FD_STEP;
                        let down = self.eval(&xp);
                        xp[i] = x[i];
                        (up - down) / (2.0 * FD_STEP)
                    })
                    .collect();
                let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                if norm2(&err) > FD_REL_TOL * (1.0 + norm2(&g)) {
                    return Err(invalid(format!(
                        "{}: gradient disagrees with finite differences at {x:?}",
                        self.name
                    )));
                }
            }
        }
        if let Some(l) = self.lipschitz {
            for k in 0..LIPSCHITZ_PAIRS {
                let x = scaled(&rng::normal_vec(&mut rng, self.dim), 2.0);
                // Alternate far pairs with close ones, where slopes are sharpest.
                let step = if k % 2 == 0 { 2.0 } else { 1e-3 };
                let y: Vec<f64> = x
                    .iter()
                    .zip(rng::normal_vec(&mut rng, self.dim))
                    .map(|(a, b)| a + step * b)
                    .collect();
                let lhs = (self.eval(&x) - self.eval(&y)).abs();
                let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if lhs > l * dist * (1.0 + 1e-9) + 1e-12 {
                    return Err(invalid(format!(
                        "{}: Lipschitz constant {l} violated ({lhs} > {l}·{dist})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    // --- a small library of smooth Lipschitz test fields ---

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(format!("const({c})"), dim, move |_| c)
            .with_grad(move |_| vec![0.0; dim])
            .with_lipschitz(0.0)
    }

    /// `⟨a, x⟩ + b`.
    pub fn linear(a: Vec<f64>, b: f64) -> Self {
        let l = norm2(&a);
        let ga = a.clone();
        Self::new(format!("linear{a:?}"), a.len(), move |x| dot(&a, x) + b)
            .with_grad(move |_| ga.clone())
            .with_lipschitz(l)
    }

    /// `sin(⟨a, x⟩) + c`.
    pub fn sin_ridge(a: Vec<f64>, c: f64) -> Self {
        let l = norm2(&a);
        let ga = a.clone();
        Self::new(format!("sin_ridge{a:?}"), a.len(), move |x| dot(&a, x).sin() + c)
            .with_grad(move |x| scaled(&ga, dot(&ga, x).cos()))
            .with_lipschitz(l)
    }

    /// `cos(a·x₁)` in `dim` dimensions.
    pub fn cos_first(dim: usize, a: f64) -> Self {
        Self::new(format!("cos_first({a})"), dim, move |x| (a * x[0]).cos())
            .with_grad(move |x| {
                let mut g = vec![0.0; dim];
                g[0] = -a * (a * x[0]).sin();
                g
            })
            .with_lipschitz(a.abs())
    }

    /// `log cosh(⟨a, x⟩)`.
    pub fn logcosh_ridge(a: Vec<f64>) -> Self {
        let l = norm2(&a);
        let ga = a.clone();
        Self::new(format!("logcosh{a:?}"), a.len(), move |x| {
            let t = dot(&a, x).abs();
            t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2
        })
        .with_grad(move |x| scaled(&ga, dot(&ga, x).tanh()))
        .with_lipschitz(l)
    }

    /// `s·√(1 + ‖x − c‖²)`.
    pub fn smooth_norm(center: Vec<f64>, s: f64) -> Self {
        let gc = center.clone();
        Self::new(format!("smooth_norm({s})"), center.len(), move |x| {
            s * (1.0 + x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sqrt()
        })
        .with_grad(move |x| {
            let r = (1.0 + x.iter().zip(&gc).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sqrt();
            x.iter().zip(&gc).map(|(a, b)| s * (a - b) / r).collect()
        })
        .with_lipschitz(s.abs())
    }

    /// `atan(⟨a, x⟩)`.
    pub fn atan_ridge(a: Vec<f64>) -> Self {
        let l = norm2(&a);
        let ga = a.clone();
        Self::new(format!("atan{a:?}"), a.len(), move |x| dot(&a, x).atan())
            .with_grad(move |x| {
                let t = dot(&ga, x);
                scaled(&ga, 1.0 / (1.0 + t * t))
            })
            .with_lipschitz(l)
    }

    /// `log(1 + e^⟨a,x⟩)`, evaluated stably.
    pub fn softplus_ridge(a: Vec<f64>) -> Self {
        let l = norm2(&a);
        let ga = a.clone();
        Self::new(format!("softplus{a:?}"), a.len(), move |x| {
            let t = dot(&a, x);
            t.max(0.0) + (-t.abs()).exp().ln_1p()
        })
        .with_grad(move |x| {
            let t = dot(&ga, x);
            scaled(&ga, 1.0 / (1.0 + (-t).exp()))
        })
        .with_lipschitz(l)
    }

    /// `‖x‖₂` (Lipschitz, no gradient at the origin).
    pub fn euclidean_norm(dim: usize) -> Self {
        Self::new("norm", dim, norm2).with_lipschitz(1.0)
    }

    /// `max(x₁, x₂)` (Lipschitz 1).
    pub fn max_pair(dim: usize) -> Self {
        assert!(dim >= 2);
        Self::new("max(x1,x2)", dim, |x| x[0].max(x[1])).with_lipschitz(1.0)
    }
}

/// `count` smooth Lipschitz fields in dimensions `1..=max_dim` with random
/// parameters, drawn deterministically from `seed`.
pub fn field_family(count: usize, max_dim: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = rng::substream(seed, "field-family", 0);
    (0..count)
        .map(|i| {
            let dim = 1 + i % max_dim.max(1);
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            match i % 7 {
                0 => ScalarField::linear(a, rng.random_range(-1.0..1.0)),
                1 => ScalarField::sin_ridge(a, rng.random_range(0.5..2.0)),
                2 => ScalarField::cos_first(dim, rng.random_range(0.3..2.0)),
                3 => ScalarField::logcosh_ridge(a),
                4 => {
                    let c = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    ScalarField::smooth_norm(c, rng.random_range(0.3..1.5))
                }
                5 => ScalarField::atan_ridge(a),
                _ => ScalarField::softplus_ridge(a),
            }
        })
        .collect()
}

/// `count` i.i.d. standard normal `dim`-vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl GaussianSample {
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }
}

pub fn sample_std_gaussian(dim: usize, count: usize, seed: u64) -> Result<GaussianSample> {
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let rows = rng::map_gaussian(dim, count, seed, "std-gaussian", |w| w.to_vec());
    Ok(GaussianSample {
        dim,
        data: rows.into_iter().flatten().collect(),
    })
}

/// Two Monte Carlo sides of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McGap {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
}

impl McGap {
    pub fn combined_stderr(&self) -> f64 {
        self.lhs.stderr + self.rhs.stderr
    }

    pub fn holds(&self) -> bool {
        self.lhs.mean <= self.rhs.mean + SLACK_SIGMAS * self.combined_stderr()
    }

    /// `|lhs − rhs| ≤ 3·combined stderr` (used for saturating positive controls).
    pub fn equal_within_ci(&self) -> bool {
        (self.lhs.mean - self.rhs.mean).abs() <= SLACK_SIGMAS * self.combined_stderr()
    }

    pub fn report(&self, check: impl Into<String>, seed: u64) -> CheckReport {
        CheckReport::stochastic(
            check,
            &self.lhs,
            self.rhs.mean,
            self.combined_stderr(),
            SLACK_SIGMAS,
            seed,
        )
    }
}

fn require_grad(f: &ScalarField) -> Result<()> {
    if f.has_grad() {
        Ok(())
    } else {
        Err(invalid(format!("{} has no gradient", f.name)))
    }
}

fn require_lipschitz(f: &ScalarField) -> Result<f64> {
    f.lipschitz()
        .ok_or_else(|| invalid(format!("{} has no Lipschitz constant", f.name)))
}

/// Gaussian Poincaré: `Var f(X) ≤ E‖∇f(X)‖²`, both sides on one sample.
pub fn poincare_gap(f: &ScalarField, n_samples: usize, seed: u64) -> Result<McGap> {
    require_grad(f)?;
    f.validate(seed)?;
    let pairs = rng::map_gaussian(f.dim, n_samples, seed, "poincare", |x| {
        let g = f.grad(x).expect("checked above");
        (f.eval(x), dot(&g, &g))
    });
    let n = pairs.len() as f64;
    let m = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let centred: Vec<f64> = pairs
        .iter()
        .map(|p| (p.0 - m) * (p.0 - m) * n / (n - 1.0))
        .collect();
    let energy: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(McGap {
        lhs: McEstimate::from_samples(&centred),
        rhs: McEstimate::from_samples(&energy),
    })
}

/// Plug-in estimate of `Ent(Y)` for `Y ≥ 0` with a delta-method stderr.
fn plug_in_entropy(ys: &[f64]) -> Result<McEstimate> {
    let n = ys.len();
    let mut ylogy = Vec::with_capacity(n);
    for &y in ys {
        let v = if y == 0.0 { 0.0 } else { y * y.ln() };
        if !v.is_finite() || !y.is_finite() {
            return Err(Error::Integrability(format!(
                "Y·log Y is not finite for Y = {y}"
            )));
        }
        ylogy.push(v);
    }
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    if mean_y == 0.0 {
        return Ok(McEstimate::new(0.0, 0.0, n));
    }
    let a = ylogy.iter().sum::<f64>() / n as f64;
    let ent = a - mean_y * mean_y.ln();
    // Linearisation of (ā, ȳ) ↦ ā − ȳ log ȳ.
    let slope = mean_y.ln() + 1.0;
    let infl: Vec<f64> = ylogy.iter().zip(ys).map(|(a, y)| a - slope * y).collect();
    let se = McEstimate::from_samples(&infl).stderr;
    Ok(McEstimate::new(ent, se, n))
}

/// Gaussian log-Sobolev: `Ent(f²) ≤ 2 E‖∇f‖²`.
pub fn gaussian_lsi_gap(f: &ScalarField, n_samples: usize, seed: u64) -> Result<McGap> {
    require_grad(f)?;
    f.validate(seed)?;
    let pairs = rng::map_gaussian(f.dim, n_samples, seed, "lsi", |x| {
        let g = f.grad(x).expect("checked above");
        let v = f.eval(x);
        (v * v, 2.0 * dot(&g, &g))
    });
    let sq: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let energy: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(McGap {
        lhs: plug_in_entropy(&sq)?,
        rhs: McEstimate::from_samples(&energy),
    })
}

/// Splits `values` into a mean-estimation half and an evaluation half.
fn split_halves(values: &[f64]) -> (&[f64], &[f64]) {
    values.split_at(values.len() / 2)
}

/// Herbst CGF bound: `log E exp(λ(f − Ef)) ≤ λ²L²/2`.
///
/// `Ef` is estimated on the first half of the sample and the exponential
/// moment on the second; the reported stderr folds in both.
pub fn herbst_cgf_gap(f: &ScalarField, lambda: f64, n_samples: usize, seed: u64) -> Result<McGap> {
    let l = require_lipschitz(f)?;
    if n_samples < 4 {
        return Err(invalid("need at least 4 samples"));
    }
    f.validate(seed)?;
    let values = rng::map_gaussian(f.dim, n_samples, seed, "herbst", |x| f.eval(x));
    let (first, second) = split_halves(&values);
    let mean_est = McEstimate::from_samples(first);
    let exps: Vec<f64> = second
        .iter()
        .map(|v| (lambda * (v - mean_est.mean)).exp())
        .collect();
    if let Some(bad) = exps.iter().find(|e| !e.is_finite()) {
        return Err(Error::Integrability(format!("exp(λ(f − Ef)) = {bad}")));
    }
    let mgf = McEstimate::from_samples(&exps);
    let se = ((mgf.stderr / mgf.mean).powi(2) + (lambda * mean_est.stderr).powi(2)).sqrt();
    Ok(McGap {
        lhs: McEstimate::new(mgf.mean.ln(), se, second.len()),
        rhs: McEstimate::exact(0.5 * lambda * lambda * l * l),
    })
}

/// Gaussian Lipschitz tail: `P(|f − Ef| ≥ t) ≤ 2 exp(−t²/(2L²))`, with `Ef`
/// from the first half of the sample and the event counted on the second.
pub fn lipschitz_tail_gap(f: &ScalarField, t: f64, n_samples: usize, seed: u64) -> Result<McGap> {
    let l = require_lipschitz(f)?;
    if !(t > 0.0) {
        return Err(invalid("t must be positive"));
    }
    if n_samples < 4 {
        return Err(invalid("need at least 4 samples"));
    }
    f.validate(seed)?;
    let values = rng::map_gaussian(f.dim, n_samples, seed, "lipschitz-tail", |x| f.eval(x));
    let (first, second) = split_halves(&values);
    let centre = first.iter().sum::<f64>() / first.len() as f64;
    let hits: Vec<f64> = second
        .iter()
        .map(|v| if (v - centre).abs() >= t { 1.0 } else { 0.0 })
        .collect();
    let bound = if l == 0.0 { 0.0 } else { 2.0 * (-t * t / (2.0 * l * l)).exp() };
    Ok(McGap {
        lhs: McEstimate::from_samples(&hits),
        rhs: McEstimate::exact(bound),
    })
}

type ProcessMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A centred process over `m` indices driven by `noise_dim` standard normals.
pub struct ProcessSampler {
    pub noise_dim: usize,
    pub values: ProcessMap,
}

impl ProcessSampler {
    /// `m` i.i.d. `N(0, scale²)` variables.
    pub fn iid_normal(m: usize, scale: f64) -> Self {
        Self {
            noise_dim: m,
            values: Box::new(move |w| w.iter().map(|x| scale * x).collect()),
        }
    }
}

/// `E max_{i≤m} Y_i ≤ σε·√(2 log m)` for centred sub-Gaussian `Y_i` with
/// parameter `σε`.
pub fn finite_max_bound_check(
    m: usize,
    sigma_eps: f64,
    sampler: &ProcessSampler,
    n_samples: usize,
    seed: u64,
) -> Result<McGap> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let maxima = rng::map_gaussian(sampler.noise_dim, n_samples, seed, "finite-max", |w| {
        let ys = (sampler.values)(w);
        debug_assert_eq!(ys.len(), m);
        ys.into_iter().fold(f64::NEG_INFINITY, f64::max)
    });
    let bound = if m == 1 {
        0.0
    } else {
        sigma_eps * (2.0 * (m as f64).ln()).sqrt()
    };
    Ok(McGap {
        lhs: McEstimate::from_samples(&maxima),
        rhs: McEstimate::exact(bound),
    })
}

/// Evaluation grid and quadrature resolution for [`mollify_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifyGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Trapezoid intervals on the mollifier support `(−1, 1)`.
    pub quad_intervals: usize,
}

impl Default for MollifyGrid {
    fn default() -> Self {
        Self {
            lo: -1.0,
            hi: 1.0,
            points: 401,
            quad_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mollified {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_err: f64,
    pub argmax: f64,
    pub c_rho: f64,
    /// `L·C_ρ·eps`.
    pub bound: f64,
}

impl Mollified {
    pub fn holds(&self) -> bool {
        self.sup_err <= self.bound + MOLLIFY_QUAD_SLACK
    }
}

/// Quadrature slack in the mollification bound.
pub const MOLLIFY_QUAD_SLACK: f64 = 1e-6;

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Smooths `f` with the bump mollifier `ρ_ε(u) = ρ(u/ε)/ε`,
/// `ρ(u) ∝ exp(−1/(1−u²))` on `(−1, 1)`, and measures `sup |f_ε − f|` on the
/// grid against `L·C_ρ·ε` with `C_ρ = ∫|u|ρ(u)du`.
pub fn mollify_1d(f: impl Fn(f64) -> f64, lipschitz: f64, eps: f64, grid: MollifyGrid) -> Result<Mollified> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if grid.points < 2 || grid.quad_intervals < 2 {
        return Err(invalid("grid needs at least two points and two quadrature intervals"));
    }
    if !(grid.hi - grid.lo >= 2.0 * eps) {
        return Err(invalid(format!(
            "grid span {} is smaller than the mollifier width 2·eps = {}",
            grid.hi - grid.lo,
            2.0 * eps
        )));
    }
    // Symmetric trapezoid nodes; endpoints carry zero mass.
    let h = 2.0 / grid.quad_intervals as f64;
    let nodes: Vec<f64> = (1..grid.quad_intervals).map(|k| -1.0 + h * k as f64).collect();
    let raw: Vec<f64> = nodes.iter().map(|&u| bump(u) * h).collect();
    let mass: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();
    let c_rho: f64 = nodes.iter().zip(&weights).map(|(u, w)| u.abs() * w).sum();

    let xs: Vec<f64> = (0..grid.points)
        .map(|i| grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.points - 1) as f64)
        .collect();
    let values: Vec<f64> = xs
        .iter()
        .map(|&x| {
            nodes
                .iter()
                .zip(&weights)
                .map(|(u, w)| f(x - eps * u) * w)
                .sum()
        })
        .collect();
    let (mut sup_err, mut argmax) = (0.0, xs[0]);
    for (x, v) in xs.iter().zip(&values) {
        let e = (v - f(*x)).abs();
        if e > sup_err {
            sup_err = e;
            argmax = *x;
        }
    }
    Ok(Mollified {
        xs,
        values,
        sup_err,
        argmax,
        c_rho,
        bound: lipschitz * c_rho * eps,
    })
}

/// `E max(Z₁, Z₂) = 1/√π` for i.i.d. standard normals.
pub fn expected_max_of_two_normals() -> f64 {
    1.0 / PI.sqrt()
}

/// Settings for the batch sweep in [`run_gauss_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussSuiteConfig {
    pub fields: usize,
    pub max_dim: usize,
    pub n_samples: usize,
    pub lambda: f64,
    pub t: f64,
}

impl Default for GaussSuiteConfig {
    fn default() -> Self {
        Self {
            fields: 20,
            max_dim: 3,
            n_samples: 100_000,
            lambda: 0.5,
            t: 1.0,
        }
    }
}

/// Poincaré, LSI, Herbst and Lipschitz-tail checks over a field family, plus
/// the linear positive controls and the finite-max closed forms.
pub fn run_gauss_suite(cfg: &GaussSuiteConfig, seed: u64) -> Result<Vec<CheckReport>> {
    let fields = field_family(cfg.fields, cfg.max_dim, seed);
    let mut out = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        let s = rng::derive_seed(seed, &format!("field{i}"));
        out.push(poincare_gap(f, cfg.n_samples, s)?.report(format!("poincare#{i}:{}", f.name), s));
        out.push(gaussian_lsi_gap(f, cfg.n_samples, s)?.report(format!("gaussian_lsi#{i}:{}", f.name), s));
        out.push(herbst_cgf_gap(f, cfg.lambda, cfg.n_samples, s)?.report(format!("herbst#{i}:{}", f.name), s));
        out.push(lipschitz_tail_gap(f, cfg.t, cfg.n_samples, s)?.report(format!("lipschitz_tail#{i}:{}", f.name), s));
    }
    for m in [1usize, 2, 16] {
        let s = rng::derive_seed(seed, &format!("finite-max{m}"));
        let gap = finite_max_bound_check(m, 1.0, &ProcessSampler::iid_normal(m, 1.0), cfg.n_samples, s)?;
        out.push(gap.report(format!("finite_max#m={m}"), s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_sf;

    const N: usize = 100_000;

    #[test]
    fn sampler_moments_and_determinism() {
        let s = sample_std_gaussian(1, 1_000_000, 5).unwrap();
        let m = s.data.iter().sum::<f64>() / s.data.len() as f64;
        assert!(m.abs() <= 0.005, "mean {m}");
        assert_eq!(s, sample_std_gaussian(1, 1_000_000, 5).unwrap());

        let s3 = sample_std_gaussian(3, 1_000_000, 6).unwrap();
        for c in 0..3 {
            let xs: Vec<f64> = s3.rows().map(|r| r[c]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!(mean.abs() <= 5.0 / 1000.0);
            assert!((var - 1.0).abs() <= 0.01, "var {var}");
        }
        assert!(sample_std_gaussian(2, 0, 1).is_err());
    }

    #[test]
    fn field_validation_catches_bad_claims() {
        for f in field_family(14, 3, 1) {
            f.validate(2).unwrap();
        }
        let wrong_grad = ScalarField::new("x^2", 1, |x| x[0] * x[0]).with_grad(|x| vec![x[0]]);
        assert!(wrong_grad.validate(0).is_err());
        let wrong_l = ScalarField::new("2x", 1, |x| 2.0 * x[0]).with_lipschitz(1.0);
        assert!(wrong_l.validate(0).is_err());
        ScalarField::euclidean_norm(3).validate(0).unwrap();
        ScalarField::max_pair(2).validate(0).unwrap();
    }

    #[test]
    fn poincare_examples() {
        let g = poincare_gap(&ScalarField::linear(vec![1.0], 0.0), N, 1).unwrap();
        assert!(g.equal_within_ci());
        assert!((g.lhs.mean - 1.0).abs() < 0.02);
        assert_eq!(g.rhs.mean, 1.0);

        let sin = ScalarField::sin_ridge(vec![1.0], 0.0);
        let g = poincare_gap(&sin, N, 2).unwrap();
        let e2 = (-2.0f64).exp();
        assert!(g.holds());
        assert!(g.lhs.contains_within(0.5 * (1.0 - e2), 4.0));
        assert!(g.rhs.contains_within(0.5 * (1.0 + e2), 4.0));

        let g = poincare_gap(&ScalarField::constant(1, 3.0), 1000, 3).unwrap();
        assert_eq!((g.lhs.mean, g.rhs.mean), (0.0, 0.0));
        assert!(poincare_gap(&ScalarField::euclidean_norm(1), 10, 0).is_err());
    }

    #[test]
    fn lsi_examples() {
        let g = gaussian_lsi_gap(&ScalarField::constant(1, 2.0), 1000, 1).unwrap();
        assert!(g.lhs.mean.abs() < 1e-12 && g.rhs.mean == 0.0);
        let g = gaussian_lsi_gap(&ScalarField::linear(vec![1.0], 0.0), N, 2).unwrap();
        assert_eq!(g.rhs.mean, 2.0);
        assert!(g.holds());
        // E[X² log X²] = 2 − γ − log 2
        let exact = 2.0 - 0.577_215_664_901_532_9 - std::f64::consts::LN_2;
        assert!(g.lhs.contains_within(exact, 4.0), "{:?} vs {exact}", g.lhs);
        let g = gaussian_lsi_gap(&ScalarField::cos_first(2, 1.0), N, 3).unwrap();
        assert!(g.holds());
    }

    #[test]
    fn lsi_exponential_positive_control() {
        // f = exp(a x / 2) saturates the Gaussian LSI: both sides a²/2·e^{a²/2}.
        let a = 0.6;
        let f = ScalarField::new("exp", 1, move |x| (a * x[0] / 2.0).exp())
            .with_grad(move |x| vec![a / 2.0 * (a * x[0] / 2.0).exp()]);
        let g = gaussian_lsi_gap(&f, 400_000, 4).unwrap();
        let exact = a * a / 2.0 * (a * a / 2.0).exp();
        assert!(g.equal_within_ci(), "{g:?}");
        assert!(g.rhs.contains_within(exact, 4.0));
    }

    #[test]
    fn herbst_examples() {
        let g = herbst_cgf_gap(&ScalarField::linear(vec![1.0, 0.0], 0.0), 0.5, N, 1).unwrap();
        assert_eq!(g.rhs.mean, 0.125);
        assert!(g.equal_within_ci(), "{g:?}");
        let g = herbst_cgf_gap(&ScalarField::sin_ridge(vec![1.0], 0.0), 0.0, 1000, 1).unwrap();
        assert_eq!((g.lhs.mean, g.rhs.mean), (0.0, 0.0));
        let g = herbst_cgf_gap(&ScalarField::euclidean_norm(3), 1.0, N, 2).unwrap();
        assert_eq!(g.rhs.mean, 0.5);
        assert!(g.holds());
        let blowup = ScalarField::new("big", 1, |x| 1e3 * x[0]).with_lipschitz(1e3);
        assert!(matches!(
            herbst_cgf_gap(&blowup, 10.0, 1000, 0),
            Err(Error::Integrability(_))
        ));
    }

    #[test]
    fn tail_examples() {
        let g = lipschitz_tail_gap(&ScalarField::linear(vec![1.0], 0.0), 1.0, N, 1).unwrap();
        assert!((g.lhs.mean - 2.0 * normal_sf(1.0)).abs() <= 0.01);
        assert!((g.rhs.mean - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(g.holds());
        let g = lipschitz_tail_gap(&ScalarField::linear(vec![1.0], 0.0), 10.0, N, 2).unwrap();
        assert_eq!(g.lhs.mean, 0.0);
        assert!(g.holds());
        let g = lipschitz_tail_gap(&ScalarField::max_pair(2), 1.0, N, 3).unwrap();
        assert!(g.holds());
    }

    #[test]
    fn finite_max_examples() {
        let g = finite_max_bound_check(1, 1.0, &ProcessSampler::iid_normal(1, 0.0), 100, 1).unwrap();
        assert_eq!((g.lhs.mean, g.rhs.mean), (0.0, 0.0));
        let g = finite_max_bound_check(2, 1.0, &ProcessSampler::iid_normal(2, 1.0), N, 2).unwrap();
        assert!(g.lhs.contains_within(expected_max_of_two_normals(), 4.0));
        assert!((g.rhs.mean - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        let g = finite_max_bound_check(16, 1.0, &ProcessSampler::iid_normal(16, 1.0), N, 3).unwrap();
        assert!(g.holds());
    }

    #[test]
    fn mollify_examples() {
        let grid = MollifyGrid::default();
        let lin = mollify_1d(|x| x, 1.0, 0.1, grid).unwrap();
        assert!(lin.sup_err <= 1e-8, "{}", lin.sup_err);

        let abs = mollify_1d(f64::abs, 1.0, 0.1, grid).unwrap();
        assert!(abs.holds());
        assert!(abs.argmax.abs() < 1e-12);
        assert!((abs.sup_err - abs.bound).abs() < 1e-12);

        let half = mollify_1d(f64::abs, 1.0, 0.05, grid).unwrap();
        let ratio = half.sup_err / abs.sup_err;
        assert!((ratio - 0.5).abs() <= 0.05, "ratio {ratio}");

        assert!(mollify_1d(f64::abs, 1.0, 2.0, grid).is_err());

        // A non-smooth Lipschitz function with several kinks.
        let zig = |x: f64| (3.0 * x).sin().abs() + 0.5 * (x - 0.3).abs();
        let z = mollify_1d(zig, 3.5, 0.07, grid).unwrap();
        assert!(z.holds());
    }

    #[test]
    fn gauss_suite_is_deterministic() {
        let cfg = GaussSuiteConfig {
            fields: 7,
            n_samples: 20_000,
            ..Default::default()
        };
        let a = run_gauss_suite(&cfg, 9).unwrap();
        assert_eq!(a, run_gauss_suite(&cfg, 9).unwrap());
        assert!(a.iter().all(|r| r.pass), "{a:#?}");
    }
}

//! Localized least squares: models, ERM solvers, localized Gaussian
//! complexity, the critical radius, the master error bound and rate sweeps.
//!
//! The shifted ℓ1 class `{θ − θ* : ‖θ‖₁ ≤ R}` is not itself a centred ball;
//! every complexity computed for a model's ℓ1 class uses the centred ball of
//! radius `2R`, a star-shaped superset, so the derived radii stay valid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, ColumnSpace};
use crate::metric::{entropy_integral, FiniteMetricSet, Quadrature};
use crate::rng;
use crate::stats::{chi_mean, median, ols_slope, McEstimate};

/// Relative duality-gap target for ERM solves in experiments.
pub const ERM_TOL: f64 = 1e-9;
pub const ERM_MAX_ITER: usize = 200_000;
/// Relative gap for the ℓ1 localized inner supremum.
pub const INNER_RTOL: f64 = 1e-4;
/// Number of random feasible probes in an ERM certificate.
pub const PROBES: usize = 100;
/// Default common-noise panel for the critical radius.
pub const DEFAULT_PANEL: usize = 2000;
/// Relative bracket width at which bisection stops.
pub const BISECTION_RTOL: f64 = 1e-3;
/// Slack when checking that `G_n(δ)/δ` is nonincreasing.
pub const MONOTONE_RTOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionClass {
    Linear,
    L1Ball { radius: f64 },
}

impl FunctionClass {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::L1Ball { radius } if !(radius > 0.0) => Err(invalid("ℓ1 radius must be positive")),
            _ => Ok(()),
        }
    }

    /// A star-shaped class containing `{f − f* : f ∈ F}` when `‖θ*‖₁ ≤ R`.
    pub fn shifted_superset(&self) -> Self {
        match *self {
            Self::Linear => Self::Linear,
            Self::L1Ball { radius } => Self::L1Ball { radius: 2.0 * radius },
        }
    }
}

/// `y = Xθ* + σw` with `n` design rows in `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub x: DMatrix<f64>,
    pub theta_star: DVector<f64>,
    pub sigma: f64,
}

impl RegressionModel {
    pub fn new(x: DMatrix<f64>, theta_star: DVector<f64>, sigma: f64) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(invalid("need at least one design point"));
        }
        if x.ncols() != theta_star.len() {
            return Err(invalid(format!(
                "design has {} columns but θ* has length {}",
                x.ncols(),
                theta_star.len()
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma must be positive and finite"));
        }
        Ok(Self { x, theta_star, sigma })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn signal(&self) -> DVector<f64> {
        &self.x * &self.theta_star
    }

    /// `y_i = ⟨θ*, x_i⟩ + σ w_i`.
    pub fn response(&self, w: &[f64]) -> Result<DVector<f64>> {
        if w.len() != self.n() {
            return Err(invalid("noise vector length differs from n"));
        }
        Ok(self.signal() + DVector::from_column_slice(w) * self.sigma)
    }

    /// Gaussian design and Gaussian `θ*`.
    pub fn random_linear<R: Rng + ?Sized>(n: usize, d: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        let x = linalg::gaussian_matrix(n, d, rng);
        let theta = DVector::from_vec(rng::normal_vec(rng, d));
        Self::new(x, theta, sigma)
    }

    /// Gaussian design rescaled to column norm `√n` and a `sparsity`-sparse
    /// `θ*` with `‖θ*‖₁ = R/2`, inside the ball.
    pub fn random_sparse<R: Rng + ?Sized>(
        n: usize,
        d: usize,
        radius: f64,
        sparsity: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut x = linalg::gaussian_matrix(n, d, rng);
        linalg::normalize_columns(&mut x);
        let s = sparsity.clamp(1, d.max(1));
        let mut theta = DVector::zeros(d);
        let mut chosen = Vec::with_capacity(s);
        while chosen.len() < s {
            let j = rng.random_range(0..d);
            if !chosen.contains(&j) {
                chosen.push(j);
            }
        }
        let mut weights: Vec<f64> = (0..s).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        for (w, &j) in weights.iter_mut().zip(&chosen) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            theta[j] = sign * 0.5 * radius * *w / total;
        }
        Self::new(x, theta, sigma)
    }

    /// `‖X(θ − θ*)‖_n²`.
    pub fn squared_error(&self, theta: &DVector<f64>) -> f64 {
        let diff = &self.x * (theta - &self.theta_star);
        let e = empirical_norm(diff.as_slice());
        e * e
    }
}

/// `√((1/n)·Σ v_i²)`.
pub fn empirical_norm(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmResult {
    pub theta_hat: Vec<f64>,
    /// `‖y − Xθ̂‖²`.
    pub objective: f64,
    /// `max(objective(θ̂) − objective(probe))` over feasible probes.
    pub certificate: f64,
    pub certified: bool,
    pub iterations: usize,
    pub duality_gap: Option<f64>,
}

fn rss(x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (y - x * theta).norm_squared()
}

fn probe_rng(label: &str) -> ChaCha8Rng {
    rng::substream(0, label, 0)
}

pub fn solve_ls_linear(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ErmResult> {
    if x.nrows() != y.len() {
        return Err(invalid("design and response lengths differ"));
    }
    let theta = linalg::min_norm_lstsq(x, y);
    let objective = rss(x, y, &theta);
    let mut r = probe_rng("ls-linear-probes");
    let scale = theta.norm().max(1.0);
    let certificate = (0..PROBES)
        .map(|k| {
            let noise = DVector::from_vec(rng::normal_vec(&mut r, theta.len()));
            // Alternate far probes with small perturbations of the solution.
            let probe = if k % 2 == 0 { noise * scale } else { &theta + noise * 1e-3 * scale };
            objective - rss(x, y, &probe)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-8 * (1.0 + y.norm_squared());
    Ok(ErmResult {
        theta_hat: theta.as_slice().to_vec(),
        objective,
        certificate,
        certified: certificate <= tol,
        iterations: 1,
        duality_gap: None,
    })
}

/// Active-set state of the pairwise Frank–Wolfe solver; atom `2j` is
/// `+ρe_j`, atom `2j+1` is `−ρe_j`.
#[derive(Debug, Clone)]
struct FwState {
    weights: Vec<f64>,
    active: Vec<usize>,
}

#[derive(Debug, Clone)]
struct FwOutcome {
    theta: DVector<f64>,
    gram_theta: DVector<f64>,
    /// `½·scale·θᵀGθ − bᵀθ`.
    objective: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    state: FwState,
}

fn atom(a: usize) -> (usize, f64) {
    (a / 2, if a.is_multiple_of(2) { 1.0 } else { -1.0 })
}

/// Pairwise Frank–Wolfe for `min ½·scale·θᵀGθ − bᵀθ` over `‖θ‖₁ ≤ ρ`.
fn l1_quadratic_fw(
    gram: &DMatrix<f64>,
    scale: f64,
    b: &[f64],
    rho: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<FwState>,
) -> FwOutcome {
    let d = b.len();
    let state = warm.unwrap_or_else(|| {
        let j = (0..d)
            .max_by(|&p, &q| b[p].abs().total_cmp(&b[q].abs()))
            .unwrap_or(0);
        let a = if b[j] >= 0.0 { 2 * j } else { 2 * j + 1 };
        let mut weights = vec![0.0; 2 * d];
        weights[a] = 1.0;
        FwState { weights, active: vec![a] }
    });
    let FwState { mut weights, mut active } = state;
    let theta_of = |w: &[f64]| DVector::from_fn(d, |j, _| rho * (w[2 * j] - w[2 * j + 1]));
    let mut theta = theta_of(&weights);
    let mut gt = gram * &theta;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let grad: Vec<f64> = (0..d).map(|i| scale * gt[i] - b[i]).collect();
        let jf = (0..d)
            .max_by(|&p, &q| grad[p].abs().total_cmp(&grad[q].abs()))
            .unwrap_or(0);
        let fw = if grad[jf] > 0.0 { 2 * jf + 1 } else { 2 * jf };
        let g_theta: f64 = grad.iter().zip(theta.iter()).map(|(g, t)| g * t).sum();
        gap = g_theta + rho * grad[jf].abs();
        if gap <= tol {
            converged = true;
            break;
        }
        let value = |a: usize| {
            let (j, s) = atom(a);
            s * rho * grad[j]
        };
        let away = *active
            .iter()
            .max_by(|&&p, &&q| value(p).total_cmp(&value(q)))
            .expect("active set is never empty");
        if away == fw {
            break;
        }
        iterations += 1;
        let (jf, sf) = atom(fw);
        let (ja, sa) = atom(away);
        // Δ = v_fw − v_away has at most two nonzero coordinates.
        let mut delta: Vec<(usize, f64)> = vec![(jf, sf * rho)];
        if ja == jf {
            delta[0].1 -= sa * rho;
        } else {
            delta.push((ja, -sa * rho));
        }
        let slope: f64 = delta.iter().map(|&(j, v)| grad[j] * v).sum();
        let mut curv = 0.0;
        for &(i, vi) in &delta {
            for &(j, vj) in &delta {
                curv += vi * vj * gram[(i, j)];
            }
        }
        curv *= scale;
        let gmax = weights[away];
        let step = if curv > 0.0 { (-slope / curv).min(gmax) } else { gmax };
        if step <= 0.0 {
            break;
        }
        weights[fw] += step;
        weights[away] -= step;
        if !active.contains(&fw) {
            active.push(fw);
        }
        if weights[away] <= 1e-15 {
            weights[away] = 0.0;
            active.retain(|&a| a != away);
        }
        for &(j, v) in &delta {
            theta[j] += step * v;
            gt.axpy(step * v, &gram.column(j), 1.0);
        }
        if iterations % 1000 == 0 {
            theta = theta_of(&weights);
            gt = gram * &theta;
        }
    }
    theta = theta_of(&weights);
    gt = gram * &theta;
    let objective = 0.5 * scale * theta.dot(&gt) - b.iter().zip(theta.iter()).map(|(p, q)| p * q).sum::<f64>();
    FwOutcome {
        theta,
        gram_theta: gt,
        objective,
        gap,
        iterations,
        converged,
        state: FwState { weights, active },
    }
}

fn random_l1_point<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::from_vec(rng::normal_vec(rng, d));
    let l1 = v.lp_norm(1);
    if l1 > 0.0 {
        let r: f64 = rng.random::<f64>();
        v *= radius * r / l1;
    }
    v
}

/// ℓ1-constrained least squares `min ‖y − Xθ‖² s.t. ‖θ‖₁ ≤ R` by pairwise
/// Frank–Wolfe; stops once the duality gap is below `tol·‖y‖²`.
pub fn solve_ls_l1(x: &DMatrix<f64>, y: &DVector<f64>, radius: f64, tol: f64, max_iter: usize) -> Result<ErmResult> {
    if !(radius > 0.0) {
        return Err(invalid("ℓ1 radius must be positive"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if x.nrows() != y.len() {
        return Err(invalid("design and response lengths differ"));
    }
    let gram = x.tr_mul(x);
    solve_ls_l1_with_gram(x, &gram, y, radius, tol, max_iter)
}

fn solve_ls_l1_with_gram(
    x: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    y: &DVector<f64>,
    radius: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ErmResult> {
    let d = x.ncols();
    let yy = y.norm_squared();
    if yy == 0.0 || d == 0 {
        return Ok(ErmResult {
            theta_hat: vec![0.0; d],
            objective: yy,
            certificate: 0.0,
            certified: true,
            iterations: 0,
            duality_gap: Some(0.0),
        });
    }
    let b: Vec<f64> = (x.tr_mul(y) * 2.0).as_slice().to_vec();
    let tol_abs = tol * yy;
    let out = l1_quadratic_fw(gram, 2.0, &b, radius, tol_abs, max_iter, None);
    let objective = rss(x, y, &out.theta);
    let mut r = probe_rng("ls-l1-probes");
    let certificate = (0..PROBES)
        .map(|_| objective - rss(x, y, &random_l1_point(d, radius, &mut r)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ErmResult {
        theta_hat: out.theta.as_slice().to_vec(),
        objective,
        certificate,
        certified: out.converged && certificate <= tol_abs,
        iterations: out.iterations,
        duality_gap: Some(out.gap),
    })
}

/// Precomputed pieces for the inner supremum
/// `sup { |wᵀXθ|/n : θ ∈ class, ‖Xθ‖₂ ≤ δ√n }`.
pub struct LocalizedSup {
    x: DMatrix<f64>,
    class: FunctionClass,
    space: ColumnSpace,
    pinv: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl LocalizedSup {
    /// For `L1Ball { radius }` the class is the centred ball of that radius.
    pub fn new(x: &DMatrix<f64>, class: FunctionClass) -> Result<Self> {
        class.validate()?;
        let (space, pinv, gram) = match class {
            FunctionClass::Linear => (ColumnSpace::new(x), linalg::pseudo_inverse(x), DMatrix::zeros(0, 0)),
            FunctionClass::L1Ball { .. } => (ColumnSpace::new(&DMatrix::zeros(x.nrows(), 0)), DMatrix::zeros(0, 0), x.tr_mul(x)),
        };
        Ok(Self {
            x: x.clone(),
            class,
            space,
            pinv,
            gram,
        })
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    /// Closed form `(δ/√n)‖P w‖₂` for the linear class.
    pub fn linear_closed_form(&self, w: &[f64], delta: f64) -> f64 {
        delta / self.n().sqrt() * self.space.projected_norm(w)
    }

    /// Inner supremum for one noise draw.
    pub fn value(&self, w: &[f64], delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(invalid("δ must be positive"));
        }
        if w.len() != self.x.nrows() {
            return Err(invalid("noise vector length differs from n"));
        }
        let v = match self.class {
            FunctionClass::Linear => {
                // Fitted values of regressing w on X are P w.
                let fitted = &self.x * (&self.pinv * DVector::from_column_slice(w));
                delta / self.n().sqrt() * fitted.norm()
            }
            FunctionClass::L1Ball { radius } => {
                let c: Vec<f64> = (self.x.tr_mul(&DVector::from_column_slice(w)) / self.n())
                    .as_slice()
                    .to_vec();
                l1_localized_sup(&self.gram, &c, radius, delta * self.n().sqrt())?
            }
        };
        if !v.is_finite() {
            return Err(Error::EmptyLocalizedSet(format!("inner supremum is not finite at δ = {delta}")));
        }
        Ok(v)
    }
}

/// `sup cᵀθ` over `‖θ‖₁ ≤ ρ`, `θᵀGθ ≤ r²`, through the Lagrangian dual in `μ`.
///
/// Each `μ` gives the upper bound `max_θ (cᵀθ − μθᵀGθ) + μr²` and, after
/// rescaling the maximiser into the ellipsoid, a feasible lower bound.
fn l1_localized_sup(gram: &DMatrix<f64>, c: &[f64], rho: f64, r: f64) -> Result<f64> {
    let d = c.len();
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if cmax == 0.0 || d == 0 {
        return Ok(0.0);
    }
    let j = (0..d).max_by(|&p, &q| c[p].abs().total_cmp(&c[q].abs())).unwrap();
    let vertex_norm = rho * gram[(j, j)].sqrt();
    if vertex_norm <= r {
        return Ok(rho * cmax);
    }
    match l1_homotopy_sup(gram, c, rho, r, j) {
        Some(v) => Ok(v),
        None => l1_sup_bisection(gram, c, rho, r, cmax, vertex_norm),
    }
}

/// Bisection on `μ` with a Frank–Wolfe solve per multiplier.
fn l1_sup_bisection(gram: &DMatrix<f64>, c: &[f64], rho: f64, r: f64, cmax: f64, vertex_norm: f64) -> Result<f64> {
    let mut best_ub = rho * cmax;
    let mut best_lb = rho * cmax * r / vertex_norm;
    let (mut mu_lo, mut mu_hi): (f64, Option<f64>) = (0.0, None);
    let mut mu = rho * cmax / (r * r);
    let mut warm = None;
    for _ in 0..200 {
        if best_ub - best_lb <= INNER_RTOL * best_ub {
            return Ok(best_lb);
        }
        // Tolerance relative to the value being bracketed, not to ρ·max|c|.
        let fw_tol = 1e-2 * INNER_RTOL * best_lb;
        let out = l1_quadratic_fw(gram, 2.0 * mu, c, rho, fw_tol, 50_000, warm.take());
        let quad = out.theta.dot(&out.gram_theta).max(0.0);
        let norm = quad.sqrt();
        let ct: f64 = c.iter().zip(out.theta.iter()).map(|(a, b)| a * b).sum();
        best_ub = best_ub.min(-out.objective + out.gap + mu * r * r);
        let lb = if norm > r { ct * r / norm } else { ct };
        best_lb = best_lb.max(lb);
        if norm > r {
            mu_lo = mu;
        } else {
            mu_hi = Some(mu);
        }
        mu = match mu_hi {
            None => mu * 4.0,
            Some(hi) if mu_lo == 0.0 => hi / 4.0,
            Some(hi) => (mu_lo * hi).sqrt(),
        };
        warm = Some(out.state);
    }
    if best_ub - best_lb <= INNER_RTOL * best_ub {
        Ok(best_lb)
    } else {
        Err(invalid(format!(
            "ℓ1 inner supremum did not reach relative gap {INNER_RTOL}: [{best_lb}, {best_ub}]"
        )))
    }
}

/// Certified value at `θ` for the multiplier `μ`, when the duality gap closes.
fn certify_l1(gram: &DMatrix<f64>, c: &[f64], rho: f64, r: f64, theta: &DVector<f64>, mu: f64) -> Option<f64> {
    let cv = DVector::from_column_slice(c);
    let gt = gram * theta;
    let quad = theta.dot(&gt).max(0.0);
    let ct = cv.dot(theta);
    let grad = 2.0 * mu * &gt - &cv;
    let gap = grad.dot(theta) + rho * grad.amax();
    let ub = -(mu * quad - ct) + gap + mu * r * r;
    let l1 = theta.lp_norm(1);
    let scale = (rho / l1).min(1.0).min(r / quad.sqrt().max(f64::MIN_POSITIVE));
    let lb = ct * scale;
    (lb > 0.0 && ub - lb <= INNER_RTOL * ub).then_some(lb)
}

/// Exact path of `argmin ½φᵀGφ − cᵀφ + λ‖φ‖₁` as `λ` decreases.
///
/// Along the path `θ = ρφ/‖φ‖₁` solves the Lagrangian problem with
/// `μ = ‖φ‖₁/(2ρ)`, and `θᵀGθ` falls monotonically, so the radius where it
/// meets `r²` is a root of one quadratic per segment. `None` hands the
/// problem back to the iterative solver.
fn l1_homotopy_sup(gram: &DMatrix<f64>, c: &[f64], rho: f64, r: f64, first: usize) -> Option<f64> {
    let d = c.len();
    let mut active = vec![first];
    let mut signs = vec![c[first].signum()];
    let mut phi = DVector::<f64>::zeros(d);
    let mut corr = DVector::from_column_slice(c);
    let lambda0 = c[first].abs();
    let mut lambda = lambda0;
    let (rho2, r2) = (rho * rho, r * r);
    for _ in 0..8 * d + 8 {
        let k = active.len();
        let gss = DMatrix::from_fn(k, k, |a, b| gram[(active[a], active[b])]);
        let Some(chol) = gss.cholesky() else {
            break;
        };
        let u = chol.solve(&DVector::from_column_slice(&signs));
        let mut gu = DVector::<f64>::zeros(d);
        for (&i, &ui) in active.iter().zip(u.iter()) {
            gu.axpy(ui, &gram.column(i), 1.0);
        }

        let mut step = lambda;
        let mut event = None;
        for j in 0..d {
            if active.contains(&j) {
                continue;
            }
            for (num, den) in [(lambda - corr[j], 1.0 - gu[j]), (lambda + corr[j], 1.0 + gu[j])] {
                if den > 1e-12 {
                    let s = num / den;
                    if s > 1e-14 * lambda && s < step {
                        step = s;
                        event = Some((j, true));
                    }
                }
            }
        }
        for (a, &i) in active.iter().enumerate() {
            let s = -phi[i] / u[a];
            if s > 1e-14 * lambda && s < step {
                step = s;
                event = Some((a, false));
            }
        }

        let t0: f64 = active.iter().zip(&signs).map(|(&i, s)| s * phi[i]).sum();
        let dt = u.dot(&DVector::from_column_slice(&signs));
        // Gφ = c − corr, and uᵀG_SS u = sᵀu.
        let qphi = phi.dot(&(DVector::from_column_slice(c) - &corr));
        let cross = phi.dot(&gu);
        // ‖A θ‖² − r² up to the positive factor t²/ρ².
        let q = |x: f64| rho2 * (qphi + 2.0 * x * cross + x * x * dt) - r2 * (t0 + x * dt).powi(2);
        if q(step) <= 0.0 {
            let (mut lo, mut hi) = (0.0, step);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if q(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut at = phi.clone();
            for (&i, ui) in active.iter().zip(u.iter()) {
                at[i] += hi * ui;
            }
            let t = t0 + hi * dt;
            return certify_l1(gram, c, rho, r, &(at * (rho / t)), t / (2.0 * rho));
        }

        for (&i, ui) in active.iter().zip(u.iter()) {
            phi[i] += step * ui;
        }
        corr.axpy(-step, &gu, 1.0);
        lambda -= step;
        if lambda <= 1e-12 * lambda0 {
            break;
        }
        match event {
            None => break,
            Some((j, true)) => {
                active.push(j);
                signs.push(corr[j].signum());
            }
            Some((a, false)) => {
                phi[active[a]] = 0.0;
                active.remove(a);
                signs.remove(a);
            }
        }
    }
    // End of the path: the ℓ1 constraint goes slack and θ shrinks radially.
    let norm = phi.dot(&(gram * &phi)).max(0.0).sqrt();
    if !(norm > 0.0) {
        return None;
    }
    let t = rho * norm / r;
    certify_l1(gram, c, rho, r, &(&phi * (r / norm)), t / (2.0 * rho))
}

/// A frozen set of noise draws shared by every evaluation of `G_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePanel {
    pub draws: Vec<Vec<f64>>,
}

impl NoisePanel {
    pub fn new(n: usize, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(invalid("panel needs at least one draw"));
        }
        Ok(Self {
            draws: rng::map_gaussian(n, count, seed, "noise-panel", |w| w.to_vec()),
        })
    }

    /// Monte Carlo `G_n(δ)` on this panel.
    pub fn complexity(&self, sup: &LocalizedSup, delta: f64) -> Result<McEstimate> {
        let vals: Result<Vec<f64>> = self.draws.par_iter().map(|w| sup.value(w, delta)).collect();
        Ok(McEstimate::from_samples(&vals?))
    }
}

/// `G_n(δ) = E (δ/√n)‖P w‖₂` for the linear class, by Monte Carlo.
pub fn localized_complexity_linear_exact(x: &DMatrix<f64>, delta: f64, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if !(delta > 0.0) {
        return Err(invalid("δ must be positive"));
    }
    let space = ColumnSpace::new(x);
    let n = x.nrows();
    let vals = rng::map_gaussian(n, n_samples, seed, "complexity", |w| {
        delta / (n as f64).sqrt() * space.projected_norm(w)
    });
    Ok(McEstimate::from_samples(&vals))
}

/// `G_n(δ)` with the inner supremum solved numerically per draw.
pub fn localized_complexity_mc(
    x: &DMatrix<f64>,
    class: FunctionClass,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let sup = LocalizedSup::new(x, class)?;
    let n = x.nrows();
    let vals: Result<Vec<f64>> = rng::map_gaussian(n, n_samples, seed, "complexity", |w| sup.value(w, delta))
        .into_iter()
        .collect();
    Ok(McEstimate::from_samples(&vals?))
}

/// Where bisection for `δ*` starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Bracket {
    /// Expand from `σ` until the sign change is found.
    #[default]
    Auto,
    Explicit(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalRadius {
    pub delta_star: f64,
    pub bracket: (f64, f64),
    /// `(δ, G_n(δ)/δ)` at every evaluated radius, sorted by `δ`.
    pub ratios: Vec<(f64, f64)>,
    pub monotone: bool,
    pub degenerate: bool,
    pub panel_size: usize,
}

/// True when `ratios` (sorted by δ) never increase by more than the slack.
pub fn ratios_nonincreasing(ratios: &[(f64, f64)], rtol: f64) -> bool {
    ratios
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + rtol * w[0].1.abs().max(1e-300))
}

/// Smallest `δ` with `G_n(δ)/δ ≤ δ/(2σ)` on a common noise panel, by
/// bisection on `h(δ) = G_n(δ)/δ − δ/(2σ)`; the upper end is returned.
pub fn critical_radius(
    model: &RegressionModel,
    class: FunctionClass,
    n_samples: usize,
    seed: u64,
    bracket: Bracket,
) -> Result<CriticalRadius> {
    let panel = NoisePanel::new(model.n(), n_samples, seed)?;
    let sup = LocalizedSup::new(&model.x, class.shifted_superset())?;
    critical_radius_on_panel(&sup, &panel, model.sigma, bracket)
}

pub fn critical_radius_on_panel(
    sup: &LocalizedSup,
    panel: &NoisePanel,
    sigma: f64,
    bracket: Bracket,
) -> Result<CriticalRadius> {
    let mut ratios: Vec<(f64, f64)> = Vec::new();
    let mut eval = |delta: f64| -> Result<f64> {
        let g = panel.complexity(sup, delta)?.mean;
        ratios.push((delta, g / delta));
        Ok(g)
    };
    let h = |g: f64, delta: f64| g / delta - delta / (2.0 * sigma);
    let finish = |mut ratios: Vec<(f64, f64)>, delta_star, bracket, degenerate| {
        ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = ratios_nonincreasing(&ratios, MONOTONE_RTOL);
        CriticalRadius {
            delta_star,
            bracket,
            ratios,
            monotone,
            degenerate,
            panel_size: panel.draws.len(),
        }
    };

    let (mut lo, mut hi) = match bracket {
        Bracket::Explicit(lo, hi) => {
            if !(0.0 < lo && lo < hi) {
                return Err(invalid(format!("bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        Bracket::Auto => (1e-3 * sigma, sigma),
    };
    let mut g_lo = eval(lo)?;
    if g_lo == 0.0 {
        return Ok(finish(ratios, lo, (lo, hi), true));
    }
    let mut g_hi = eval(hi)?;
    if bracket == Bracket::Auto {
        let mut guard = 0;
        while h(g_lo, lo) <= 0.0 && guard < 200 {
            lo *= 0.5;
            g_lo = eval(lo)?;
            guard += 1;
            if g_lo == 0.0 {
                return Ok(finish(ratios, lo, (lo, hi), true));
            }
        }
        guard = 0;
        while h(g_hi, hi) > 0.0 && guard < 200 {
            hi *= 2.0;
            g_hi = eval(hi)?;
            guard += 1;
        }
    }
    let (h_lo, h_hi) = (h(g_lo, lo), h(g_hi, hi));
    if !(h_lo > 0.0 && h_hi <= 0.0) {
        return Err(Error::InvalidBracket { lo, hi, h_lo, h_hi });
    }
    let start = (lo, hi);
    while hi - lo > BISECTION_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        let g = eval(mid)?;
        if h(g, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(ratios, hi, start, false))
}

/// `G_n(δ)/δ` at each radius on one panel.
pub fn complexity_ratios(sup: &LocalizedSup, panel: &NoisePanel, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    deltas
        .iter()
        .map(|&d| Ok((d, panel.complexity(sup, d)?.mean / d)))
        .collect()
}

/// ERM fit and its squared empirical error for one noise draw.
pub fn erm_error(model: &RegressionModel, class: FunctionClass, w: &[f64]) -> Result<f64> {
    let y = model.response(w)?;
    let fit = match class {
        FunctionClass::Linear => solve_ls_linear(&model.x, &y)?,
        FunctionClass::L1Ball { radius } => solve_ls_l1(&model.x, &y, radius, ERM_TOL, ERM_MAX_ITER)?,
    };
    Ok(model.squared_error(&DVector::from_vec(fit.theta_hat)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasterBound {
    pub t: f64,
    pub delta_star: f64,
    /// `16·t·δ*`.
    pub threshold: f64,
    pub freq: McEstimate,
    /// `exp(−n·t·δ*/(2σ²))`.
    pub bound: f64,
}

impl MasterBound {
    pub fn holds(&self) -> bool {
        self.freq.mean <= self.bound + 3.0 * self.freq.stderr
    }
}

/// Frequency of `‖f̂ − f*‖_n² ≥ 16tδ*` over independent noise draws.
pub fn master_bound_experiment(
    model: &RegressionModel,
    class: FunctionClass,
    delta_star: f64,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<MasterBound> {
    class.validate()?;
    if !(delta_star > 0.0) {
        return Err(invalid("δ* must be positive"));
    }
    if t < delta_star {
        return Err(invalid(format!("t = {t} must be at least δ* = {delta_star}")));
    }
    let threshold = 16.0 * t * delta_star;
    let n = model.n();
    let gram = model.x.tr_mul(&model.x);
    let hits: Result<Vec<f64>> = rng::map_trials(trials, seed, "master-bound", |_, r| {
        let w = rng::normal_vec(r, n);
        let err = match class {
            FunctionClass::Linear => erm_error(model, class, &w)?,
            FunctionClass::L1Ball { radius } => {
                let y = model.response(&w)?;
                let fit = solve_ls_l1_with_gram(&model.x, &gram, &y, radius, ERM_TOL, ERM_MAX_ITER)?;
                model.squared_error(&DVector::from_vec(fit.theta_hat))
            }
        };
        Ok(if err >= threshold { 1.0 } else { 0.0 })
    })
    .into_iter()
    .collect();
    let sigma2 = model.sigma * model.sigma;
    Ok(MasterBound {
        t,
        delta_star,
        threshold,
        freq: McEstimate::from_samples(&hits?),
        bound: (-(n as f64) * t * delta_star / (2.0 * sigma2)).exp(),
    })
}

/// Largest empirical norm reachable in the shifted class, or `∞` for the
/// linear class with a nonzero design.
fn max_shifted_norm(model: &RegressionModel, class: FunctionClass) -> f64 {
    let n = model.n() as f64;
    match class {
        FunctionClass::Linear => {
            if ColumnSpace::new(&model.x).rank() > 0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
        FunctionClass::L1Ball { radius } => {
            // A convex function on the ball peaks at a vertex.
            let signal = model.signal();
            (0..model.d())
                .flat_map(|j| [1.0, -1.0].map(|s| (j, s)))
                .map(|(j, s)| ((model.x.column(j) * (s * radius)) - &signal).norm() / n.sqrt())
                .fold(0.0, f64::max)
        }
    }
}

/// Frequency of `sup_{g ∈ H, ‖g‖_n = u} |(σ/n)Σ w_i g(x_i)| ≥ threshold`
/// (default `2u²`). For the ℓ1 class the supremum is taken over the
/// `‖g‖_n ≤ u` ball of the `2R` superset, which can only raise the frequency.
pub fn estimate_bad_event_probability(
    model: &RegressionModel,
    class: FunctionClass,
    u: f64,
    threshold: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(u > 0.0) {
        return Err(invalid("u must be positive"));
    }
    class.validate()?;
    if max_shifted_norm(model, class) < u {
        return Err(Error::EmptyLocalizedSet(format!(
            "no function of the shifted class has empirical norm {u}"
        )));
    }
    let thr = threshold.unwrap_or(2.0 * u * u);
    let sup = LocalizedSup::new(&model.x, class.shifted_superset())?;
    let n = model.n();
    let sigma = model.sigma;
    let hits: Result<Vec<f64>> = rng::map_trials(trials, seed, "bad-event", |_, r| {
        let w = rng::normal_vec(r, n);
        let s = match class {
            FunctionClass::Linear => sigma * sup.linear_closed_form(&w, u),
            FunctionClass::L1Ball { .. } => sigma * sup.value(&w, u)?,
        };
        Ok(if s >= thr { 1.0 } else { 0.0 })
    })
    .into_iter()
    .collect();
    Ok(McEstimate::from_samples(&hits?))
}

/// `P(σu‖Pw‖/√n ≥ threshold)` for the linear class, via the `χ²_r` tail.
pub fn linear_bad_event_probability(rank: usize, n: usize, sigma: f64, u: f64, threshold: f64) -> f64 {
    if rank == 0 {
        return if threshold <= 0.0 { 1.0 } else { 0.0 };
    }
    let q = threshold * (n as f64).sqrt() / (sigma * u);
    let chi = ChiSquared::new(rank as f64).expect("positive degrees of freedom");
    chi.sf(q * q)
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut p = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&q| q * q <= p).all(|&q| !p.is_multiple_of(q)) {
            out.push(p);
        }
        p += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut v = 0.0;
    while i > 0 {
        v += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    v
}

/// `count` Halton points in `[0,1]^dim`, skipping index 0.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    (1..=count as u64)
        .map(|i| bases.iter().map(|&b| radical_inverse(i, b)).collect())
        .collect()
}

/// Low-discrepancy points in the `p`-norm ball of radius `radius`:
/// a Halton direction from the cube, normalised, times a radial coordinate.
fn halton_ball(count: usize, dim: usize, radius: f64, p_one: bool) -> Vec<DVector<f64>> {
    halton(count, dim + 1)
        .into_iter()
        .filter_map(|h| {
            let z = DVector::from_fn(dim, |i, _| 2.0 * h[i] - 1.0);
            let norm = if p_one { z.lp_norm(1) } else { z.norm() };
            (norm > 0.0).then(|| z * (radius * h[dim].powf(1.0 / dim as f64) / norm))
        })
        .collect()
}

/// `24√2/√n · ∫_0^{2δ} √(log N(ε)) dε` for a discretisation of the localized
/// ball's empirical-metric image (the origin plus `resolution` points).
pub fn dudley_capacity_bound(model: &RegressionModel, class: FunctionClass, delta: f64, resolution: usize) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid("δ must be positive"));
    }
    class.validate()?;
    let n = model.n() as f64;
    let mut cloud: Vec<Vec<f64>> = Vec::with_capacity(resolution + 1);
    match class.shifted_superset() {
        FunctionClass::Linear => {
            let r = ColumnSpace::new(&model.x).rank();
            cloud.push(vec![0.0; r.max(1)]);
            if r > 0 {
                // The image is a Euclidean δ-ball in the r-dimensional column space.
                for z in halton_ball(resolution, r, delta, false) {
                    cloud.push(z.as_slice().to_vec());
                }
            }
        }
        FunctionClass::L1Ball { radius } => {
            cloud.push(vec![0.0; model.n()]);
            for theta in halton_ball(resolution, model.d(), radius, true) {
                let mut v = &model.x * theta / n.sqrt();
                let norm = v.norm();
                if norm > delta {
                    v *= delta / norm;
                }
                cloud.push(v.as_slice().to_vec());
            }
        }
    }
    let s = FiniteMetricSet::from_points(cloud)?;
    let integral = entropy_integral(&s, 2.0 * delta, Quadrature::default())?;
    Ok(24.0 * std::f64::consts::SQRT_2 / n.sqrt() * integral)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCell {
    pub n: usize,
    pub d: usize,
    /// Numerical rank of the first design in the cell.
    pub r: usize,
    pub delta_star: Option<f64>,
    pub median_err: f64,
    pub normalized: f64,
    /// A second normalisation reported alongside, if any.
    pub normalized_alt: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub cells: Vec<RateCell>,
    /// `(d, slope)` of log median error against log n, per `d` with at
    /// least two distinct `n`.
    pub slopes: Vec<(usize, f64)>,
}

impl RateReport {
    pub fn max_normalized(&self) -> f64 {
        self.cells.iter().map(|c| c.normalized).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_normalized(&self) -> f64 {
        self.cells.iter().map(|c| c.normalized).fold(f64::INFINITY, f64::min)
    }

    pub fn slope_for(&self, d: usize) -> Option<f64> {
        self.slopes.iter().find(|s| s.0 == d).map(|s| s.1)
    }
}

fn slopes(cells: &[RateCell]) -> Vec<(usize, f64)> {
    let mut ds: Vec<usize> = cells.iter().map(|c| c.d).collect();
    ds.sort_unstable();
    ds.dedup();
    ds.into_iter()
        .filter_map(|d| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.d == d && c.median_err > 0.0)
                .map(|c| ((c.n as f64).ln(), c.median_err.ln()))
                .collect();
            let mut ns: Vec<u64> = pts.iter().map(|p| p.0.to_bits()).collect();
            ns.sort_unstable();
            ns.dedup();
            (ns.len() >= 2).then(|| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                (d, ols_slope(&xs, &ys))
            })
        })
        .collect()
}

fn check_grid(grid: &[(usize, usize)], trials: usize) -> Result<()> {
    if grid.is_empty() || trials == 0 {
        return Err(invalid("grid and trials must be nonempty"));
    }
    if grid.iter().any(|&(n, d)| n == 0 || d == 0) {
        return Err(invalid("grid cells need n ≥ 1 and d ≥ 1"));
    }
    Ok(())
}

/// Per cell: median over trials of `n‖f̂ − f*‖_n²/(σ²r)` with fresh Gaussian
/// designs; `δ* = 2σ·E‖Pw‖/√n` in closed form.
pub fn linear_rate_experiment(grid: &[(usize, usize)], sigma: f64, trials: usize, seed: u64) -> Result<RateReport> {
    check_grid(grid, trials)?;
    if grid.iter().any(|&(n, d)| n < d) {
        return Err(invalid("linear rate grid needs n ≥ d"));
    }
    let mut cells = Vec::with_capacity(grid.len());
    for &(n, d) in grid {
        let label = format!("linear-rate/{n}x{d}");
        let runs: Result<Vec<(f64, usize)>> = rng::map_trials(trials, seed, &label, |_, r| {
            let model = RegressionModel::random_linear(n, d, sigma, r)?;
            let w = rng::normal_vec(r, n);
            Ok((erm_error(&model, FunctionClass::Linear, &w)?, linalg::numerical_rank(&model.x)))
        })
        .into_iter()
        .collect();
        let runs = runs?;
        let errs: Vec<f64> = runs.iter().map(|p| p.0).collect();
        let r = runs[0].1;
        let med = median(&errs);
        let normalized = if r == 0 { 0.0 } else { n as f64 * med / (sigma * sigma * r as f64) };
        cells.push(RateCell {
            n,
            d,
            r,
            delta_star: Some(2.0 * sigma * chi_mean(r) / (n as f64).sqrt()),
            median_err: med,
            normalized,
            normalized_alt: None,
            trials,
        });
    }
    let slopes = slopes(&cells);
    Ok(RateReport { cells, slopes })
}

/// Per cell: median of `‖f̂ − f*‖_n²` normalised by `R²·log d/n`, with
/// `σR√(log d/n)` as the alternate normalisation. Designs are Gaussian with
/// columns rescaled to norm `√n`; `θ*` is 3-sparse with `‖θ*‖₁ = R/2`.
pub fn l1_rate_experiment(grid: &[(usize, usize)], radius: f64, sigma: f64, trials: usize, seed: u64) -> Result<RateReport> {
    check_grid(grid, trials)?;
    if !(radius > 0.0) {
        return Err(invalid("ℓ1 radius must be positive"));
    }
    let mut cells = Vec::with_capacity(grid.len());
    for &(n, d) in grid {
        let label = format!("l1-rate/{n}x{d}");
        let runs: Result<Vec<(f64, usize)>> = rng::map_trials(trials, seed, &label, |t, r| {
            let model = RegressionModel::random_sparse(n, d, radius, 3, sigma, r)?;
            let w = rng::normal_vec(r, n);
            let err = erm_error(&model, FunctionClass::L1Ball { radius }, &w)?;
            let rank = if t == 0 { linalg::numerical_rank(&model.x) } else { 0 };
            Ok((err, rank))
        })
        .into_iter()
        .collect();
        let runs = runs?;
        let errs: Vec<f64> = runs.iter().map(|p| p.0).collect();
        let med = median(&errs);
        let logd = (d.max(2) as f64).ln();
        let nf = n as f64;
        cells.push(RateCell {
            n,
            d,
            r: runs[0].1,
            delta_star: None,
            median_err: med,
            normalized: med / (radius * radius * logd / nf),
            normalized_alt: Some(med / (sigma * radius * (logd / nf).sqrt())),
            trials,
        });
    }
    let slopes = slopes(&cells);
    Ok(RateReport { cells, slopes })
}

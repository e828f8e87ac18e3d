//! Monte Carlo estimates and a few closed-form reference quantities.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// z-value of the two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// A Monte Carlo mean with its standard error.
///
/// `ci95 = mean ± 1.96·stderr`, `stderr = sample_sd / √n_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn new(mean: f64, stderr: f64, n_samples: usize) -> Self {
        Self {
            mean,
            stderr,
            n_samples,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
        }
    }

    /// Sample mean and standard error of `values`, summed in order.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::new(f64::NAN, f64::NAN, 0);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self::new(mean, stderr, n)
    }

    /// A known value with no sampling error.
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, 0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci95.0 <= x && x <= self.ci95.1
    }

    /// `|mean − x| ≤ sigmas·stderr`.
    pub fn contains_within(&self, x: f64, sigmas: f64) -> bool {
        (self.mean - x).abs() <= sigmas * self.stderr
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median by sorting a copy; NaNs sort last.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard normal upper tail `P(Z ≥ x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `E‖w‖₂` for `w ~ N(0, I_k)`: the chi distribution mean.
pub fn chi_mean(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    std::f64::consts::SQRT_2 * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp()
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

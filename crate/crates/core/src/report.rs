//! Per-check verdict records shared by every suite.

use serde::{Deserialize, Serialize};

use crate::stats::McEstimate;

/// Outcome of one inequality check. `verdict` is pass iff `margin ≥ 0`.
///
/// Wall time is deliberately not a field: reports must be byte-identical
/// across reruns with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub margin: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    pub n_samples: usize,
}

impl CheckReport {
    /// `lhs ≤ rhs + tol`.
    pub fn exact(check: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = rhs + tol - lhs;
        Self {
            check: check.into(),
            lhs,
            rhs,
            stderr: 0.0,
            margin,
            pass: margin >= 0.0,
            seed: None,
            n_samples: 0,
        }
    }

    /// `lhs.mean ≤ rhs + slack_sigmas·stderr`.
    pub fn stochastic(
        check: impl Into<String>,
        lhs: &McEstimate,
        rhs: f64,
        stderr: f64,
        slack_sigmas: f64,
        seed: u64,
    ) -> Self {
        let margin = rhs + slack_sigmas * stderr - lhs.mean;
        Self {
            check: check.into(),
            lhs: lhs.mean,
            rhs,
            stderr,
            margin,
            pass: margin >= 0.0,
            seed: Some(seed),
            n_samples: lhs.n_samples,
        }
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["check", "lhs", "rhs", "stderr", "margin", "verdict", "seed", "n_samples"];

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.check.clone(),
            format!("{:e}", self.lhs),
            format!("{:e}", self.rhs),
            format!("{:e}", self.stderr),
            format!("{:e}", self.margin),
            if self.pass { "pass" } else { "fail" }.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.n_samples.to_string(),
        ]
    }
}

/// Writes reports as RFC-4180 CSV.
pub fn write_csv<W: std::io::Write>(w: W, reports: &[CheckReport]) -> crate::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CheckReport::CSV_HEADER)?;
    for r in reports {
        wtr.write_record(r.csv_record())?;
    }
    wtr.flush()?;
    Ok(())
}

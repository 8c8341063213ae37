//! ε-sweeps and the log-log gap fit.

use rayon::prelude::*;
use spocb::duality::{format_float, CSV_HEADER};
use spocb::{bounds_report, BoundsReport, Problem, SolveOptions};
use thiserror::Error;

/// Environment variable capping sweep parallelism.
pub const THREADS_VAR: &str = "SPOCB_THREADS";

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("a sweep needs at least 3 epsilon values, got {0}")]
    TooFewPoints(usize),
    #[error("epsilon values must be strictly decreasing ({0} is followed by {1})")]
    NotDecreasing(f64, f64),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub epsilon: f64,
    /// The report, or the failing stage's message.
    pub outcome: Result<BoundsReport, String>,
}

/// Least-squares fit of `log gap = a + slope·log ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Absent when fewer than 3 rows have a positive gap.
    pub fit: Option<SlopeFit>,
}

pub const FIT_HEADER: &str = "slope,slope_stderr,eps_max,eps_min,points";

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Bounds CSV with a trailing `status` column.
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER},status\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => s.push_str(&format!("{},ok\n", r.csv_row())),
                Err(msg) => s.push_str(&format!(
                    "{},0,,,,,,,failed: {}\n",
                    format_float(row.epsilon),
                    msg.replace([',', '\n'], ";")
                )),
            }
        }
        s
    }

    /// Fit CSV; the data row is empty when no fit exists.
    pub fn fit_csv(&self) -> String {
        match self.fit {
            Some(f) => format!(
                "{FIT_HEADER}\n{},{},{},{},{}\n",
                format_float(f.slope),
                format_float(f.stderr),
                format_float(f.eps_max),
                format_float(f.eps_min),
                f.points
            ),
            None => format!("{FIT_HEADER}\n,,,,0\n"),
        }
    }
}

/// Fits the slope of `log y` against `log x`. Needs at least 3 points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2) as f64 / sxx).sqrt();
    let xs = points.iter().map(|p| p.0);
    Some(SlopeFit {
        slope,
        stderr,
        eps_max: xs.clone().fold(f64::MIN, f64::max),
        eps_min: xs.fold(f64::MAX, f64::min),
        points: n,
    })
}

pub fn check_grid(eps: &[f64]) -> Result<(), SweepError> {
    if eps.len() < 3 {
        return Err(SweepError::TooFewPoints(eps.len()));
    }
    if let Some(&e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(SweepError::BadEpsilon(e));
    }
    if let Some(w) = eps.windows(2).find(|w| w[1] >= w[0]) {
        return Err(SweepError::NotDecreasing(w[0], w[1]));
    }
    Ok(())
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Computes one bounds report per ε in parallel. Failures at individual ε
/// are kept as rows; only an invalid grid is an error.
pub fn sweep(template: &Problem, eps: &[f64], opts: &SolveOptions) -> Result<SweepResult, SweepError> {
    check_grid(eps)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(cap) = thread_cap() {
        builder = builder.num_threads(cap.min(eps.len()));
    }
    let pool = builder.build().map_err(|e| SweepError::Pool(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        eps.par_iter()
            .map(|&e| SweepRow {
                epsilon: e,
                outcome: template
                    .with_epsilon(e)
                    .and_then(|p| bounds_report(&p, opts))
                    .map_err(|err| err.to_string()),
            })
            .collect()
    });
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|b| (r.epsilon, b.gap)))
        .filter(|&(_, g)| g > 0.0 && g.is_finite())
        .collect();
    Ok(SweepResult {
        fit: fit_slope(&usable),
        rows,
    })
}

//! Log-log slope estimation for scaling-law experiments.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("slope fit needs at least two usable points, got {got}")]
    TooFewPoints { got: usize },
    #[error("slope fit requires positive abscissae, got {value}")]
    BadAbscissa { value: f64 },
    #[error("abscissae are all equal; slope is undefined")]
    DegenerateAbscissa,
}

/// Least-squares fit of `ln y = slope * ln x + intercept`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of `ln y` about the fitted line.
    pub rms_residual: f64,
    /// Standard error of the slope estimate; `None` with only two points
    /// (zero degrees of freedom).
    pub slope_stderr: Option<f64>,
    /// Points dropped because `y` was zero or non-finite in log scale.
    pub excluded: usize,
    pub used: usize,
}

impl SlopeFit {
    /// A two-sided ~95% confidence half-width (twice the standard error).
    pub fn slope_halfwidth(&self) -> Option<f64> {
        self.slope_stderr.map(|s| 2.0 * s)
    }
}

/// Fits a power law `y ~ C x^slope` by ordinary least squares in log-log
/// coordinates. Points with `y <= 0` (identically-zero observables) are
/// excluded and counted, so callers can distinguish "tiny slope" from
/// "quantity vanished".
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, FitError> {
    for &(x, _) in points {
        if !(x > 0.0 && x.is_finite()) {
            return Err(FitError::BadAbscissa { value: x });
        }
    }
    let mut logs = Vec::with_capacity(points.len());
    let mut excluded = 0usize;
    for &(x, y) in points {
        if y > 0.0 && y.is_finite() {
            logs.push((x.ln(), y.ln()));
        } else {
            excluded += 1;
        }
    }
    let n = logs.len();
    if n < 2 {
        return Err(FitError::TooFewPoints { got: n });
    }
    let nf = n as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return Err(FitError::DegenerateAbscissa);
    }
    let sxy = logs
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<f64>();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = logs
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum::<f64>();
    let slope_stderr = if n > 2 {
        Some((ss_res / (nf - 2.0) / sxx).sqrt())
    } else {
        None
    };
    Ok(SlopeFit {
        slope,
        intercept,
        rms_residual: (ss_res / nf).sqrt(),
        slope_stderr,
        excluded,
        used: n,
    })
}

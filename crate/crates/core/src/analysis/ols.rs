use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    /// `1 - SSE/SST`; defined as 1 when `y` is constant.
    pub r_squared: f64,
    pub n_points: usize,
    /// Standard error of the slope; `None` with only two points.
    pub slope_std_err: Option<f64>,
}

pub fn ols_fit(points: &[(f64, f64)]) -> Result<OlsFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "OLS needs at least 2 points, got {n}"
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("OLS points must be finite"));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut sst) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        sst += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if sst == 0.0 {
        1.0
    } else {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    };
    let slope_std_err = (n > 2).then(|| (sse / (nf - 2.0) / sxx).sqrt());
    Ok(OlsFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
        slope_std_err,
    })
}

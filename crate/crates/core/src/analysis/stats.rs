use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum CiMethod {
    #[default]
    StudentT,
    Bootstrap {
        resamples: usize,
        seed: u64,
    },
}

/// Mean, sample standard deviation and 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// False when `n == 1`: std and CI are placeholders.
    pub spread_defined: bool,
}

pub fn group_stats(values: &[f64], method: CiMethod) -> Result<GroupStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("group has no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("group values must be finite"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        log::debug!("single-member group: std reported as 0 and CI collapsed to the value");
        return Ok(GroupStats {
            n,
            mean,
            std: 0.0,
            ci_low: mean,
            ci_high: mean,
            spread_defined: false,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std = var.sqrt();
    let (lo, hi) = match method {
        CiMethod::StudentT => {
            let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            let half = t * std / (n as f64).sqrt();
            (mean - half, mean + half)
        }
        CiMethod::Bootstrap { resamples, seed } => bootstrap_ci(values, resamples, seed)?,
    };
    Ok(GroupStats {
        n,
        mean,
        std,
        ci_low: lo.min(mean),
        ci_high: hi.max(mean),
        spread_defined: true,
    })
}

fn bootstrap_ci(values: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 resamples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&means, 0.025),
        quantile_sorted(&means, 0.975),
    ))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs two equal-length series of at least 2".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&midranks(x), &midranks(y))
}

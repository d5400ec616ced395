use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ols::ols_fit;
use super::stats::midranks;
use crate::error::{Error, Result};

/// Largest sample size handled by exact enumeration of the null distribution.
pub const EXACT_WILCOXON_MAX_N: usize = 25;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const MIN_TEST_PARTICIPANTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Every difference was zero; `p_value` is reported as 1.
    pub undefined: bool,
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` is the
/// number of sign patterns giving `2 * W+ = s`.
fn signed_rank_counts(doubled_ranks: &[usize]) -> Vec<f64> {
    let total: usize = doubled_ranks.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled_ranks {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// `(P(W+ >= w), P(W+ <= w))` under the exact null.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let counts = signed_rank_counts(&doubled);
    let total = 2f64.powi(ranks.len() as i32);
    let obs = (2.0 * w_plus).round() as usize;
    let ge: f64 = counts[obs..].iter().sum();
    let le: f64 = counts[..=obs].iter().sum();
    (ge / total, le / total)
}

/// Normal approximation with tie and continuity corrections.
fn normal_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let nf = ranks.len() as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i..].iter().take_while(|r| **r == sorted[i]).count();
        tie_term += (t * t * t - t) as f64;
        i += t;
    }
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    (
        z.sf((w_plus - mean - 0.5) / sd),
        z.cdf((w_plus - mean + 0.5) / sd),
    )
}

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped; ties among the rest get mid-ranks.
pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("differences must be finite"));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        log::warn!("all paired differences are zero; test undefined, reporting p = 1");
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            p_value: 1.0,
            exact: true,
            undefined: true,
        });
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let exact = n <= EXACT_WILCOXON_MAX_N;
    let (p_greater, p_less) = if exact {
        exact_tails(&ranks, w_plus)
    } else {
        normal_tails(&ranks, w_plus)
    };
    let p_value = match alternative {
        Alternative::Greater => p_greater,
        Alternative::Less => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        p_value,
        exact,
        undefined: false,
    })
}

/// One-sided sign-flip permutation test of `mean(values) > 0`.
pub fn sign_flip_test(values: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    if values.is_empty() || permutations == 0 {
        return Err(Error::InsufficientData(
            "permutation test needs values and permutations".into(),
        ));
    }
    let observed: f64 = values.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-12 * values.iter().map(|v| v.abs()).sum::<f64>();
    let mut hits = 0usize;
    for _ in 0..permutations {
        let s: f64 = values
            .iter()
            .map(|v| if rng.random_bool(0.5) { *v } else { -*v })
            .sum();
        if s >= observed - tol {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum TestMethod {
    /// Wilcoxon signed-rank on `delta_4 - delta_2`, one-sided.
    #[default]
    Wilcoxon,
    /// Sign-flip permutation on per-participant slopes over tasks 2-4.
    Permutation { permutations: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadEffect {
    pub method: TestMethod,
    pub n_participants: usize,
    pub p_value: f64,
    /// Signed-rank statistic or summed slopes.
    pub statistic: f64,
    pub exact: bool,
    pub undefined: bool,
}

/// Does SED grow with listening load? `seds[p] = [delta_2, delta_3, delta_4]`.
pub fn load_effect_test(seds: &[[f64; 3]], method: TestMethod) -> Result<LoadEffect> {
    let n = seds.len();
    if n < MIN_TEST_PARTICIPANTS {
        return Err(Error::InsufficientData(format!(
            "load-effect test needs at least {MIN_TEST_PARTICIPANTS} participants, got {n}"
        )));
    }
    match method {
        TestMethod::Wilcoxon => {
            let diffs: Vec<f64> = seds.iter().map(|d| d[2] - d[0]).collect();
            let w = wilcoxon_signed_rank(&diffs, Alternative::Greater)?;
            Ok(LoadEffect {
                method,
                n_participants: n,
                p_value: w.p_value,
                statistic: w.w_plus,
                exact: w.exact,
                undefined: w.undefined,
            })
        }
        TestMethod::Permutation { permutations, seed } => {
            let slopes = seds
                .iter()
                .map(|d| ols_fit(&[(2.0, d[0]), (3.0, d[1]), (4.0, d[2])]).map(|f| f.slope))
                .collect::<Result<Vec<_>>>()?;
            let undefined = slopes.iter().all(|s| *s == 0.0);
            let p_value = if undefined {
                1.0
            } else {
                sign_flip_test(&slopes, permutations, seed)?
            };
            Ok(LoadEffect {
                method,
                n_participants: n,
                p_value,
                statistic: slopes.iter().sum(),
                exact: false,
                undefined,
            })
        }
    }
}

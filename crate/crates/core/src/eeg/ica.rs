use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::EegRecording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IcaInit {
    /// Gaussian random start drawn from the seed.
    #[default]
    Random,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcaConfig {
    pub n_components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init: IcaInit,
}

impl IcaConfig {
    pub fn new(n_components: usize, seed: u64) -> Self {
        Self {
            n_components,
            tol: 1e-6,
            max_iter: 500,
            seed,
            init: IcaInit::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    /// Excess kurtosis (0 for Gaussian).
    pub kurtosis: f64,
    /// Share of power below 3 Hz.
    pub low_freq_ratio: f64,
    /// Share of the component's scalp projection on frontal channels;
    /// `None` when no channel name looks frontal.
    pub frontal_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaDecomposition {
    /// `n_components x n_channels`; applied to mean-removed data.
    pub unmixing: DMatrix<f64>,
    /// `n_channels x n_components`.
    pub mixing: DMatrix<f64>,
    /// `n_components x n_samples`, unit variance.
    pub components: DMatrix<f64>,
    pub channel_means: Vec<f64>,
    pub diagnostics: Vec<ComponentDiagnostics>,
    pub iterations: usize,
    pub converged: bool,
    source: EegRecording,
}

impl IcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn recording(&self) -> &EegRecording {
        &self.source
    }
}

fn inv_sqrt_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt()),
    );
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    inv_sqrt_sym(&(w * w.transpose())) * w
}

pub(crate) fn is_frontal(name: &str) -> bool {
    let n = name.trim().to_ascii_uppercase();
    let mut chars = n.chars();
    n.starts_with("FP")
        || n.starts_with("AF")
        || (chars.next() == Some('F')
            && chars.next().is_some_and(|c| c.is_ascii_digit() || c == 'Z'))
}

fn low_freq_ratio(x: &[f64], rate: f64, cutoff: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut low, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let p = c.norm_sqr();
        total += p;
        if (k as f64) * rate / (n as f64) < cutoff {
            low += p;
        }
    }
    if total > 0.0 {
        low / total
    } else {
        0.0
    }
}

fn kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    if m2 > 0.0 {
        m4 / (m2 * m2) - 3.0
    } else {
        0.0
    }
}

/// Symmetric FastICA with the log-cosh contrast on PCA-whitened data.
pub fn fastica(data: &EegRecording, config: &IcaConfig) -> Result<IcaDecomposition> {
    data.validate()?;
    let c = data.n_channels();
    let n = data.n_samples();
    let k = config.n_components;
    if k == 0 || k > c {
        return Err(Error::invalid(format!(
            "n_components must be in 1..={c}, got {k}"
        )));
    }
    if n <= c {
        return Err(Error::InsufficientData(format!(
            "{n} samples for {c} channels"
        )));
    }
    let means: Vec<f64> = data
        .channels
        .iter()
        .map(|ch| ch.iter().sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(c, n, |i, t| data.channels[i][t] - means[i]);
    let cov = &x * x.transpose() / n as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let lambda_k = eig.eigenvalues[order[k - 1]];
    if !(top > 0.0) || lambda_k <= top * 1e-10 {
        return Err(Error::RankDeficient(format!(
            "covariance supports fewer than {k} independent components (eigenvalue {lambda_k:.3e} vs {top:.3e})"
        )));
    }
    let e = DMatrix::from_fn(c, k, |i, j| eig.eigenvectors[(i, order[j])]);
    let d = DVector::from_fn(k, |j, _| eig.eigenvalues[order[j]]);
    let whitening = DMatrix::from_diagonal(&d.map(|l| 1.0 / l.sqrt())) * e.transpose();
    let dewhitening = &e * DMatrix::from_diagonal(&d.map(f64::sqrt));
    let z = &whitening * &x;

    let mut w = match config.init {
        IcaInit::Identity => DMatrix::identity(k, k),
        IcaInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            decorrelate(&DMatrix::from_fn(k, k, |_, _| {
                StandardNormal.sample(&mut rng)
            }))
        }
    };
    w = decorrelate(&w);
    let mut converged = false;
    let mut iterations = 0;
    let nf = n as f64;
    for it in 1..=config.max_iter {
        iterations = it;
        let wz = &w * &z;
        let g = wz.map(f64::tanh);
        let g_prime_mean = DVector::from_fn(k, |i, _| {
            g.row(i).iter().map(|v| 1.0 - v * v).sum::<f64>() / nf
        });
        let w_new =
            decorrelate(&(&g * z.transpose() / nf - DMatrix::from_diagonal(&g_prime_mean) * &w));
        let change = (&w_new * w.transpose())
            .diagonal()
            .iter()
            .map(|v| (1.0 - v.abs()).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {} iterations", config.max_iter);
    }
    let unmixing = &w * &whitening;
    let mixing = &dewhitening * w.transpose();
    let components = &unmixing * &x;
    let frontal: Vec<bool> = data.channel_names.iter().map(|s| is_frontal(s)).collect();
    let diagnostics = (0..k)
        .map(|j| {
            let row: Vec<f64> = components.row(j).iter().copied().collect();
            let col = mixing.column(j);
            let energy: f64 = col.iter().map(|v| v * v).sum();
            let frontal_weight = frontal.iter().any(|&f| f).then(|| {
                col.iter()
                    .zip(&frontal)
                    .filter(|(_, &f)| f)
                    .map(|(v, _)| v * v)
                    .sum::<f64>()
                    / energy
            });
            ComponentDiagnostics {
                kurtosis: kurtosis(&row),
                low_freq_ratio: low_freq_ratio(&row, data.sample_rate, 3.0),
                frontal_weight,
            }
        })
        .collect();
    Ok(IcaDecomposition {
        unmixing,
        mixing,
        components,
        channel_means: means,
        diagnostics,
        iterations,
        converged,
        source: data.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum RejectPolicy {
    Manual { indices: Vec<usize> },
    Heuristic { kurtosis: f64, low_freq_ratio: f64 },
}

impl RejectPolicy {
    pub fn heuristic() -> Self {
        RejectPolicy::Heuristic {
            kurtosis: 5.0,
            low_freq_ratio: 0.6,
        }
    }

    pub fn none() -> Self {
        RejectPolicy::Manual {
            indices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub recording: EegRecording,
    pub rejected: Vec<usize>,
    pub reasons: Vec<String>,
}

/// Zero the selected components and project back to channels.
pub fn reject_components(decomp: &IcaDecomposition, policy: &RejectPolicy) -> Result<Rejection> {
    let k = decomp.n_components();
    let (rejected, reasons): (Vec<usize>, Vec<String>) = match policy {
        RejectPolicy::Manual { indices } => {
            let mut idx = indices.clone();
            idx.sort_unstable();
            idx.dedup();
            if let Some(bad) = idx.iter().find(|&&i| i >= k) {
                return Err(Error::invalid(format!(
                    "component {bad} does not exist ({k} components)"
                )));
            }
            let reasons = idx
                .iter()
                .map(|i| format!("component {i}: manual"))
                .collect();
            (idx, reasons)
        }
        RejectPolicy::Heuristic {
            kurtosis,
            low_freq_ratio,
        } => decomp
            .diagnostics
            .iter()
            .enumerate()
            .filter_map(|(i, d)| {
                if d.kurtosis.abs() > *kurtosis {
                    Some((i, format!("component {i}: kurtosis {:.2}", d.kurtosis)))
                } else if d.low_freq_ratio > *low_freq_ratio
                    && d.frontal_weight.is_some_and(|w| w > 0.5)
                {
                    Some((
                        i,
                        format!(
                            "component {i}: {:.0}% power below 3 Hz, frontal",
                            100.0 * d.low_freq_ratio
                        ),
                    ))
                } else {
                    None
                }
            })
            .unzip(),
    };
    if rejected.len() == k {
        return Err(Error::invalid("policy rejects every component"));
    }
    for r in &reasons {
        log::info!("rejected {r}");
    }
    let mut s = decomp.components.clone();
    for &i in &rejected {
        s.row_mut(i).fill(0.0);
    }
    let x = &decomp.mixing * s;
    let channels = (0..x.nrows())
        .map(|i| {
            x.row(i)
                .iter()
                .map(|v| v + decomp.channel_means[i])
                .collect()
        })
        .collect();
    Ok(Rejection {
        recording: EegRecording {
            channels,
            ..decomp.source.clone()
        },
        rejected,
        reasons,
    })
}

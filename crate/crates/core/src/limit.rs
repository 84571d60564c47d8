//! The limit law `sqrt(1 - r^2) Z + r Y` of the standardized row sums.

use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use thiserror::Error;

use crate::mixture::MixturePair;
use crate::rng::RngStream;

/// Slack allowed on |r| <= 1 before inputs are declared inconsistent.
pub const R_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("sigma must be positive, got {0}")]
    SigmaZero(f64),
    #[error("r = {0} lies outside [-1, 1]; mixture means and sigma are inconsistent")]
    ROutOfRange(f64),
    #[error("ell must be at least 2, got {0}")]
    InvalidEll(u32),
    #[error("empirical proxy for Y has no samples")]
    EmptyProxy,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF
    let d = normal_pdf(x);
    if d > 0.0 {
        x - (normal_cdf(x) - p) / d
    } else {
        x
    }
}

/// Correlation coefficient between the limit and the match-count limit Y:
/// `sqrt(1/ell (1 - 1/ell)) (E V - E U) / sigma`.
pub fn r_coeff(ell: u32, mean_u: f64, mean_v: f64, sigma: f64) -> Result<f64, LimitError> {
    if ell < 2 {
        return Err(LimitError::InvalidEll(ell));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(LimitError::SigmaZero(sigma));
    }
    let inv = 1.0 / f64::from(ell);
    let r = (inv * (1.0 - inv)).sqrt() * (mean_v - mean_u) / sigma;
    if r.abs() > 1.0 + R_SLACK || r.is_nan() {
        return Err(LimitError::ROutOfRange(r));
    }
    Ok(r.clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "y_family", rename_all = "snake_case")]
pub enum YFamily {
    /// Limit of the standardized match counts on complete bipartite graphs.
    CompleteBipartite,
    /// User-supplied draws of Y, resampled with replacement.
    EmpiricalProxy { samples: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub ell: u32,
    pub r: f64,
    #[serde(flatten)]
    pub y: YFamily,
}

impl LimitLaw {
    pub fn new(ell: u32, r: f64, y: YFamily) -> Result<Self, LimitError> {
        if ell < 2 {
            return Err(LimitError::InvalidEll(ell));
        }
        if r.is_nan() || r.abs() > 1.0 {
            return Err(LimitError::ROutOfRange(r));
        }
        if matches!(&y, YFamily::EmpiricalProxy { samples } if samples.is_empty()) {
            return Err(LimitError::EmptyProxy);
        }
        Ok(LimitLaw { ell, r, y })
    }

    /// Limit law of the construction driven by `pair` with summand
    /// standard deviation `sigma`, on the complete bipartite family.
    pub fn for_pair(ell: u32, pair: &MixturePair, sigma: f64) -> Result<Self, LimitError> {
        let r = r_coeff(ell, pair.mean_u, pair.mean_v, sigma)?;
        LimitLaw::new(ell, r, YFamily::CompleteBipartite)
    }
}

/// Draws of the complete-bipartite match-count limit Y for `ell` labels.
///
/// Each draw projects two independent vectors of `ell` standard normals onto
/// the zero-sum hyperplane and scales by `1/sqrt(ell)`, giving covariance
/// `delta/ell - 1/ell^2` (the label-histogram fluctuation), then returns the
/// standardized inner product. For `ell = 2` this is a product of two
/// independent standard normals.
pub fn sample_y_bipartite(ell: u32, rng: &mut RngStream, n: usize) -> Vec<f64> {
    let mut draws = Vec::with_capacity(n);
    let mut g = vec![0.0; ell as usize];
    let mut h = vec![0.0; ell as usize];
    for _ in 0..n {
        draws.push(y_bipartite_once(ell, rng, &mut g, &mut h));
    }
    draws
}

fn y_bipartite_once(ell: u32, rng: &mut RngStream, g: &mut [f64], h: &mut [f64]) -> f64 {
    let l = f64::from(ell);
    for v in g.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    for v in h.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let mg = g.iter().sum::<f64>() / l;
    let mh = h.iter().sum::<f64>() / l;
    let inner: f64 = g.iter().zip(h.iter()).map(|(a, b)| (a - mg) * (b - mh)).sum();
    // (1/ell) * inner / sqrt((1/ell)(1 - 1/ell)) = inner / sqrt(ell - 1)
    inner / l / ((1.0 / l) * (1.0 - 1.0 / l)).sqrt()
}

/// Draws of `sqrt(1 - r^2) Z + r Y` with Z independent of Y.
pub fn sample_limit(law: &LimitLaw, rng: &mut RngStream, n: usize) -> Vec<f64> {
    let ell = law.ell as usize;
    let mut g = vec![0.0; ell];
    let mut h = vec![0.0; ell];
    let normal_weight = (1.0 - law.r * law.r).max(0.0).sqrt();
    (0..n)
        .map(|_| {
            let z = if normal_weight > 0.0 {
                StandardNormal.sample(rng)
            } else {
                0.0
            };
            let y = if law.r != 0.0 {
                match &law.y {
                    YFamily::CompleteBipartite => y_bipartite_once(law.ell, rng, &mut g, &mut h),
                    YFamily::EmpiricalProxy { samples } => {
                        let idx = (rng.open01() * samples.len() as f64) as usize;
                        samples[idx.min(samples.len() - 1)]
                    }
                }
            } else {
                0.0
            };
            normal_weight * z + law.r * y
        })
        .collect()
}

//! Probability laws on the real line.
//!
//! Finite discrete laws are the exact path: atoms carry rational
//! probabilities, so cumulative comparisons against a mixture weight are
//! exact. Parametric families (normal, uniform, exponential), optionally
//! truncated to an interval, are handled through closed-form CDF, quantile
//! and moment formulas.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limit::{normal_cdf, normal_pdf, normal_quantile};
use crate::rng::RngStream;

/// Exact probability value.
pub type Prob = BigRational;

/// Tolerance of the sum-to-one check on atom probabilities.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("support is empty")]
    EmptySupport,
    #[error("support has {support} entries but probs has {probs}")]
    LengthMismatch { support: usize, probs: usize },
    #[error("probability at index {index} is not positive ({value})")]
    NonPositiveProb { index: usize, value: String },
    #[error("probabilities sum to {sum}, not 1")]
    SumNotOne { sum: f64 },
    #[error("support value at index {index} is not finite")]
    NonFiniteSupport { index: usize },
    #[error("invalid {family} parameters: {reason}")]
    InvalidParameter { family: String, reason: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("cannot parse probability `{0}`")]
    BadProb(String),
    #[error("tau must lie strictly between 0 and 1, got {0}")]
    InvalidTau(String),
}

pub fn prob(numer: i64, denom: i64) -> Prob {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn prob_to_f64(p: &Prob) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite float.
pub fn exact_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Simplest rational within a few ulps of `x`.
///
/// Walks the continued-fraction convergents of the exact binary value of `x`
/// and returns the first one within relative distance 2^-50, so decimal or
/// small-denominator inputs (0.3, 1/6 rounded to double) recover their
/// intended rational value.
pub fn prob_from_f64(x: f64) -> Option<Prob> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(Prob::zero());
    }
    let exact = exact_rational(x);
    let tol = exact.abs() / BigRational::from_integer(BigInt::one() << 50usize);
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut rem = exact.clone();
    loop {
        let a = rem.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let approx = BigRational::new(h.clone(), k.clone());
        if (&approx - &exact).abs() <= tol {
            return Some(approx);
        }
        let frac = &rem - BigRational::from_integer(a);
        if frac.is_zero() {
            return Some(exact);
        }
        rem = frac.recip();
    }
}

/// Parses "0.25", "1/4" or "3" into an exact probability.
pub fn parse_prob(text: &str) -> Result<Prob, DistError> {
    let bad = || DistError::BadProb(text.to_string());
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(n, d))
    } else {
        let x: f64 = t.parse().map_err(|_| bad())?;
        prob_from_f64(x).ok_or_else(bad)
    }
}

pub fn format_prob(p: &Prob) -> String {
    if p.denom().is_one() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

/// Finite-support law with exact rational atom probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Discrete {
    support: Vec<f64>,
    probs: Vec<Prob>,
    cumulative: Vec<f64>,
}

impl Discrete {
    /// Canonicalizing constructor: sorts atoms, merges duplicates, drops
    /// zero-probability atoms and checks the total mass. A total within
    /// `SUM_TOLERANCE` of one is renormalized exactly.
    pub fn new(support: Vec<f64>, probs: Vec<Prob>) -> Result<Self, DistError> {
        if support.len() != probs.len() {
            return Err(DistError::LengthMismatch {
                support: support.len(),
                probs: probs.len(),
            });
        }
        if support.is_empty() {
            return Err(DistError::EmptySupport);
        }
        let mut atoms = Vec::with_capacity(support.len());
        for (index, (x, p)) in support.into_iter().zip(probs).enumerate() {
            if !x.is_finite() {
                return Err(DistError::NonFiniteSupport { index });
            }
            if p.is_negative() {
                return Err(DistError::NonPositiveProb {
                    index,
                    value: format_prob(&p),
                });
            }
            if !p.is_zero() {
                // -0.0 and 0.0 are the same atom
                atoms.push((if x == 0.0 { 0.0 } else { x }, p));
            }
        }
        if atoms.is_empty() {
            return Err(DistError::SumNotOne { sum: 0.0 });
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Prob)> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        let total: Prob = merged.iter().map(|(_, p)| p.clone()).sum();
        let total_f = prob_to_f64(&total);
        if (total_f - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistError::SumNotOne { sum: total_f });
        }
        let (support, mut probs): (Vec<f64>, Vec<Prob>) = merged.into_iter().unzip();
        if !total.is_one() {
            for p in &mut probs {
                *p = &*p / &total;
            }
        }
        let mut running = Prob::zero();
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                running += p;
                prob_to_f64(&running)
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Discrete {
            support,
            probs,
            cumulative,
        })
    }

    pub fn point_mass(x: f64) -> Self {
        Discrete::new(vec![x], vec![Prob::one()]).expect("valid point mass")
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[Prob] {
        &self.probs
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        self.probs.iter().map(prob_to_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Exact probability of the atom at `x` (zero off the support).
    pub fn mass_at(&self, x: f64) -> Prob {
        match self.support.binary_search_by(|s| s.total_cmp(&x)) {
            Ok(i) => self.probs[i].clone(),
            Err(_) => Prob::zero(),
        }
    }

    /// Exact P(W <= x).
    pub fn cdf_exact(&self, x: f64) -> Prob {
        self.support
            .iter()
            .zip(&self.probs)
            .take_while(|(s, _)| **s <= x)
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// Exact (mean, variance).
    pub fn exact_moments(&self) -> (BigRational, BigRational) {
        let mut first = BigRational::zero();
        let mut second = BigRational::zero();
        for (x, p) in self.support.iter().zip(&self.probs) {
            let xr = exact_rational(*x);
            let term = &xr * p;
            second += &term * &xr;
            first += term;
        }
        let var = second - &first * &first;
        (first, var)
    }

    /// Exact E[W^2].
    pub fn exact_second_moment(&self) -> BigRational {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| {
                let xr = exact_rational(*x);
                &xr * &xr * p
            })
            .sum()
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.support[idx.min(self.support.len() - 1)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal { .. } => "normal",
            Family::Uniform { .. } => "uniform",
            Family::Exponential { .. } => "exponential",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Family::Normal { mean, sd } => vec![mean, sd],
            Family::Uniform { low, high } => vec![low, high],
            Family::Exponential { rate } => vec![rate],
        }
    }

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, DistError> {
        let invalid = |reason: &str| DistError::InvalidParameter {
            family: name.to_string(),
            reason: reason.to_string(),
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        match name {
            "normal" => match params {
                [mean, sd] if *sd > 0.0 => Ok(Family::Normal { mean: *mean, sd: *sd }),
                [_, _] => Err(invalid("sd must be positive")),
                _ => Err(invalid("expected [mean, sd]")),
            },
            "uniform" => match params {
                [low, high] if low < high => Ok(Family::Uniform { low: *low, high: *high }),
                [_, _] => Err(invalid("need low < high")),
                _ => Err(invalid("expected [low, high]")),
            },
            "exponential" => match params {
                [rate] if *rate > 0.0 => Ok(Family::Exponential { rate: *rate }),
                [_] => Err(invalid("rate must be positive")),
                _ => Err(invalid("expected [rate]")),
            },
            other => Err(DistError::UnknownFamily(other.to_string())),
        }
    }

    fn natural_bounds(&self) -> (f64, f64) {
        match *self {
            Family::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Uniform { low, high } => (low, high),
            Family::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            Family::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => mean + sd * normal_quantile(p),
            Family::Uniform { low, high } => low + p * (high - low),
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
        }
    }
}

/// A parametric family restricted to `[lower, upper]` (conditional law).
#[derive(Clone, Debug, PartialEq)]
pub struct Parametric {
    family: Family,
    lower: f64,
    upper: f64,
}

impl Parametric {
    pub fn new(family: Family) -> Self {
        let (lower, upper) = family.natural_bounds();
        Parametric {
            family,
            lower,
            upper,
        }
    }

    /// Conditional law given `lower <= W <= upper`.
    pub fn truncated(family: Family, lower: f64, upper: f64) -> Result<Self, DistError> {
        let (lo, hi) = family.natural_bounds();
        let lower = lower.max(lo);
        let upper = upper.min(hi);
        let base = Parametric {
            family,
            lower,
            upper,
        };
        if lower.is_nan() || upper.is_nan() || lower >= upper || base.mass() <= 0.0 {
            return Err(DistError::InvalidParameter {
                family: family.name().to_string(),
                reason: format!("truncation [{lower}, {upper}] has no mass"),
            });
        }
        Ok(base)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn is_truncated(&self) -> bool {
        (self.lower, self.upper) != self.family.natural_bounds()
    }

    fn mass(&self) -> f64 {
        self.family.cdf(self.upper) - self.family.cdf(self.lower)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let lo = self.family.cdf(self.lower);
        ((self.family.cdf(x) - lo) / self.mass()).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let lo = self.family.cdf(self.lower);
        self.family
            .quantile(lo + p * self.mass())
            .clamp(self.lower, self.upper)
    }

    pub fn moments(&self) -> (f64, f64) {
        match self.family {
            Family::Normal { mean, sd } => {
                let alpha = (self.lower - mean) / sd;
                let beta = (self.upper - mean) / sd;
                let z = self.mass();
                let (pa, pb) = (normal_pdf(alpha), normal_pdf(beta));
                let apa = if alpha.is_finite() { alpha * pa } else { 0.0 };
                let bpb = if beta.is_finite() { beta * pb } else { 0.0 };
                let shift = (pa - pb) / z;
                (
                    mean + sd * shift,
                    sd * sd * (1.0 + (apa - bpb) / z - shift * shift),
                )
            }
            Family::Uniform { .. } => {
                let w = self.upper - self.lower;
                (0.5 * (self.lower + self.upper), w * w / 12.0)
            }
            Family::Exponential { rate } => {
                // memoryless: shift to the lower bound, truncate at width t
                let t = self.upper - self.lower;
                let inv = 1.0 / rate;
                if t.is_infinite() {
                    return (self.lower + inv, inv * inv);
                }
                let tail = (-rate * t).exp();
                let mass = -(-rate * t).exp_m1();
                let m1 = inv - t * tail / mass;
                let m2 = (2.0 * inv * inv - tail * (t * t + 2.0 * t * inv + 2.0 * inv * inv)) / mass;
                (self.lower + m1, m2 - m1 * m1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub enum Distribution {
    Discrete(Discrete),
    Parametric(Parametric),
}

/// Lower and upper (1 - tau)-quantiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePair {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
}

/// Builds a canonical finite discrete law from float probabilities.
pub fn make_discrete(support: &[f64], probs: &[f64]) -> Result<Distribution, DistError> {
    let exact = probs
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            if p.is_nan() || p < 0.0 {
                Err(DistError::NonPositiveProb {
                    index,
                    value: p.to_string(),
                })
            } else {
                prob_from_f64(p).ok_or(DistError::NonPositiveProb {
                    index,
                    value: p.to_string(),
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Discrete::new(support.to_vec(), exact).map(Distribution::Discrete)
}

impl Distribution {
    pub fn point_mass(x: f64) -> Self {
        Distribution::Discrete(Discrete::point_mass(x))
    }

    pub fn discrete_exact(support: Vec<f64>, probs: Vec<Prob>) -> Result<Self, DistError> {
        Discrete::new(support, probs).map(Distribution::Discrete)
    }

    pub fn parametric(family: &str, params: &[f64]) -> Result<Self, DistError> {
        Family::from_name(family, params).map(|f| Distribution::Parametric(Parametric::new(f)))
    }

    pub fn as_discrete(&self) -> Option<&Discrete> {
        match self {
            Distribution::Discrete(d) => Some(d),
            Distribution::Parametric(_) => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            Distribution::Discrete(d) => d.len() == 1,
            Distribution::Parametric(_) => false,
        }
    }

    /// (mean, variance).
    pub fn moments(&self) -> (f64, f64) {
        match self {
            Distribution::Discrete(d) => {
                let (m, v) = d.exact_moments();
                (prob_to_f64(&m), prob_to_f64(&v))
            }
            Distribution::Parametric(p) => p.moments(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    /// P(W <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Discrete(d) => prob_to_f64(&d.cdf_exact(x)),
            Distribution::Parametric(p) => p.cdf(x),
        }
    }

    /// Generalized inverse: inf { x : P(W <= x) >= p }.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Distribution::Discrete(d) => {
                let idx = d.cumulative.partition_point(|&c| c < p);
                d.support[idx.min(d.len() - 1)]
            }
            Distribution::Parametric(par) => par.quantile(p),
        }
    }

    /// Lower quantile a = sup{w : P(W < w) < 1 - tau} and upper quantile
    /// b = inf{w : P(W > w) < tau}. Exact cumulative scan for discrete laws.
    pub fn quantile_pair(&self, tau: &Prob) -> Result<QuantilePair, DistError> {
        if !tau.is_positive() || *tau >= Prob::one() {
            return Err(DistError::InvalidTau(format_prob(tau)));
        }
        let level = Prob::one() - tau;
        let (a, b) = match self {
            Distribution::Discrete(d) => {
                let mut running = Prob::zero();
                let mut a = None;
                let mut b = None;
                for (x, p) in d.support.iter().zip(&d.probs) {
                    running += p;
                    if a.is_none() && running >= level {
                        a = Some(*x);
                    }
                    if b.is_none() && running > level {
                        b = Some(*x);
                        break;
                    }
                }
                (a.expect("total mass is one"), b.expect("total mass is one"))
            }
            Distribution::Parametric(p) => {
                let q = p.quantile(prob_to_f64(&level));
                (q, q)
            }
        };
        Ok(QuantilePair {
            a,
            b,
            tau: prob_to_f64(tau),
        })
    }

    /// Inverse-CDF transform of a uniform on (0, 1).
    pub fn from_uniform(&self, u: f64) -> f64 {
        match self {
            Distribution::Discrete(d) => d.inverse_cdf(u),
            Distribution::Parametric(p) => p.quantile(u),
        }
    }

    pub fn sample_one(&self, rng: &mut RngStream) -> f64 {
        let u = rng.open01();
        self.from_uniform(u)
    }

    pub fn sample(&self, rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Discrete(d) => {
                write!(f, "discrete{{")?;
                for (i, (x, p)) in d.support.iter().zip(&d.probs).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}: {}", format_prob(p))?;
                }
                write!(f, "}}")
            }
            Distribution::Parametric(p) => {
                write!(f, "{}{:?}", p.family.name(), p.family.params())?;
                if p.is_truncated() {
                    write!(f, " on [{}, {}]", p.lower, p.upper)?;
                }
                Ok(())
            }
        }
    }
}

/// A probability as it appears in JSON: a number or a "p/q" string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbSpec {
    Number(f64),
    Text(String),
}

impl ProbSpec {
    pub fn to_prob(&self) -> Result<Prob, DistError> {
        match self {
            ProbSpec::Number(x) => {
                prob_from_f64(*x).ok_or_else(|| DistError::BadProb(x.to_string()))
            }
            ProbSpec::Text(s) => parse_prob(s),
        }
    }

    /// Plain number when the float reading recovers the same rational.
    pub fn from_prob(p: &Prob) -> Self {
        let x = prob_to_f64(p);
        match prob_from_f64(x) {
            Some(back) if back == *p => ProbSpec::Number(x),
            _ => ProbSpec::Text(format_prob(p)),
        }
    }
}

/// Serialized form of a [`Distribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistSpec {
    Discrete {
        support: Vec<f64>,
        probs: Vec<ProbSpec>,
    },
    Parametric {
        family: String,
        params: Vec<f64>,
        /// Optional truncation bounds; `null` means unbounded on that side.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncate: Option<[Option<f64>; 2]>,
    },
}

impl TryFrom<DistSpec> for Distribution {
    type Error = DistError;

    fn try_from(spec: DistSpec) -> Result<Self, DistError> {
        match spec {
            DistSpec::Discrete { support, probs } => {
                let probs = probs
                    .iter()
                    .map(ProbSpec::to_prob)
                    .collect::<Result<Vec<_>, _>>()?;
                Distribution::discrete_exact(support, probs)
            }
            DistSpec::Parametric {
                family,
                params,
                truncate,
            } => {
                let family = Family::from_name(&family, &params)?;
                let par = match truncate {
                    None => Parametric::new(family),
                    Some([lo, hi]) => Parametric::truncated(
                        family,
                        lo.unwrap_or(f64::NEG_INFINITY),
                        hi.unwrap_or(f64::INFINITY),
                    )?,
                };
                Ok(Distribution::Parametric(par))
            }
        }
    }
}

impl From<Distribution> for DistSpec {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Discrete(d) => DistSpec::Discrete {
                probs: d.probs.iter().map(ProbSpec::from_prob).collect(),
                support: d.support,
            },
            Distribution::Parametric(p) => {
                let finite = |x: f64| x.is_finite().then_some(x);
                DistSpec::Parametric {
                    family: p.family.name().to_string(),
                    params: p.family.params(),
                    truncate: p
                        .is_truncated()
                        .then(|| [finite(p.lower), finite(p.upper)]),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(support: &[f64], probs: &[f64]) -> Discrete {
        match make_discrete(support, probs).unwrap() {
            Distribution::Discrete(d) => d,
            _ => unreachable!(),
        }
    }

    #[test]
    fn bernoulli_half() {
        let d = disc(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[prob(1, 2), prob(1, 2)]);
    }

    #[test]
    fn canonical_sorting() {
        let d = disc(&[1.0, 0.0], &[0.7, 0.3]);
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[prob(3, 10), prob(7, 10)]);
    }

    #[test]
    fn duplicate_atoms_merge() {
        let d = disc(&[0.0, 0.0, 1.0], &[0.2, 0.1, 0.7]);
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[prob(3, 10), prob(7, 10)]);
    }

    #[test]
    fn zero_atoms_dropped() {
        let d = disc(&[0.0, 1.0, 2.0], &[0.5, 0.0, 0.5]);
        assert_eq!(d.support(), &[0.0, 2.0]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(make_discrete(&[], &[]), Err(DistError::EmptySupport));
        assert!(matches!(
            make_discrete(&[0.0, 1.0], &[-0.5, 1.5]),
            Err(DistError::NonPositiveProb { index: 0, .. })
        ));
        assert!(matches!(
            make_discrete(&[0.0, 1.0], &[0.5, 0.6]),
            Err(DistError::SumNotOne { .. })
        ));
        assert!(matches!(
            make_discrete(&[0.0], &[0.5, 0.5]),
            Err(DistError::LengthMismatch { .. })
        ));
        assert!(matches!(
            make_discrete(&[f64::NAN], &[1.0]),
            Err(DistError::NonFiniteSupport { index: 0 })
        ));
    }

    #[test]
    fn float_probs_recover_rationals() {
        assert_eq!(prob_from_f64(0.3), Some(prob(3, 10)));
        assert_eq!(prob_from_f64(1.0 / 6.0), Some(prob(1, 6)));
        assert_eq!(prob_from_f64(2.0 / 3.0), Some(prob(2, 3)));
        assert_eq!(prob_from_f64(0.125), Some(prob(1, 8)));
        // a float without a short rational form keeps its exact binary value
        let x = 0.123_456_789_012_345_67;
        assert_eq!(prob_to_f64(&prob_from_f64(x).unwrap()), x);
    }

    #[test]
    fn die_probs_sum_exactly() {
        let d = disc(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1.0 / 6.0; 6]);
        assert_eq!(d.cdf_exact(4.0), prob(2, 3));
    }

    #[test]
    fn parse_prob_forms() {
        assert_eq!(parse_prob("1/6").unwrap(), prob(1, 6));
        assert_eq!(parse_prob(" 0.25 ").unwrap(), prob(1, 4));
        assert!(parse_prob("1/0").is_err());
        assert!(parse_prob("x").is_err());
    }

    #[test]
    fn moment_examples() {
        let bern = make_discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(bern.moments(), (0.5, 0.25));
        let skew = make_discrete(&[0.0, 1.0], &[0.3, 0.7]).unwrap();
        // direct summation: mean = 0.7, E[W^2] = 0.7, var = 0.7 - 0.49
        let (m, v) = skew.moments();
        assert_eq!(m, 0.7);
        assert!((v - 0.21).abs() < 1e-15);
        assert_eq!(skew.as_discrete().unwrap().exact_moments().1, prob(21, 100));
        assert_eq!(Distribution::point_mass(3.5).moments(), (3.5, 0.0));
    }

    /// Brute-force quantile pair: sup/inf over a fine grid merged with the atoms.
    fn brute_quantiles(d: &Discrete, tau: f64) -> (f64, f64) {
        let lo = d.support()[0] - 1.0;
        let hi = d.support()[d.len() - 1] + 1.0;
        let mut grid: Vec<f64> = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0).collect();
        grid.extend_from_slice(d.support());
        let below = |w: f64| d.support().iter().zip(d.probs_f64()).filter(|(x, _)| **x < w).map(|(_, p)| p).sum::<f64>();
        let above = |w: f64| d.support().iter().zip(d.probs_f64()).filter(|(x, _)| **x > w).map(|(_, p)| p).sum::<f64>();
        let a = grid.iter().copied().filter(|&w| below(w) < 1.0 - tau - 1e-12).fold(f64::MIN, f64::max);
        let b = grid.iter().copied().filter(|&w| above(w) < tau - 1e-12).fold(f64::MAX, f64::min);
        (a, b)
    }

    #[test]
    fn quantile_pair_examples() {
        let bern = make_discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let q = bern.quantile_pair(&prob(1, 2)).unwrap();
        assert_eq!((q.a, q.b), (0.0, 1.0));
        assert_eq!(brute_quantiles(bern.as_discrete().unwrap(), 0.5), (0.0, 1.0));

        let skew = make_discrete(&[0.0, 1.0], &[0.3, 0.7]).unwrap();
        let q = skew.quantile_pair(&prob(1, 2)).unwrap();
        assert_eq!((q.a, q.b), (1.0, 1.0));
        assert_eq!(brute_quantiles(skew.as_discrete().unwrap(), 0.5), (1.0, 1.0));

        let q = Distribution::point_mass(5.0).quantile_pair(&prob(1, 3)).unwrap();
        assert_eq!((q.a, q.b), (5.0, 5.0));
    }

    #[test]
    fn quantile_pair_rejects_bad_tau() {
        let bern = make_discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(bern.quantile_pair(&prob(0, 1)).is_err());
        assert!(bern.quantile_pair(&prob(1, 1)).is_err());
        assert!(bern.quantile_pair(&prob(3, 2)).is_err());
    }

    #[test]
    fn point_mass_samples() {
        let mut rng = RngStream::new(99);
        assert_eq!(Distribution::point_mass(5.0).sample(&mut rng, 3), vec![5.0; 3]);
    }

    #[test]
    fn bernoulli_sample_mean() {
        let bern = make_discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let xs = bern.sample(&mut RngStream::new(1), 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Distribution::parametric("normal", &[1.0, 2.0]).unwrap();
        let a = d.sample(&mut RngStream::new(5), 50);
        let b = d.sample(&mut RngStream::new(5), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn parametric_validation() {
        assert!(Distribution::parametric("normal", &[0.0, 0.0]).is_err());
        assert!(Distribution::parametric("uniform", &[1.0, 1.0]).is_err());
        assert!(Distribution::parametric("exponential", &[-1.0]).is_err());
        assert!(matches!(
            Distribution::parametric("cauchy", &[0.0, 1.0]),
            Err(DistError::UnknownFamily(_))
        ));
    }

    #[test]
    fn parametric_cdf_quantile_consistency() {
        let fams = [
            Distribution::parametric("normal", &[0.5, 2.0]).unwrap(),
            Distribution::parametric("uniform", &[-1.0, 3.0]).unwrap(),
            Distribution::parametric("exponential", &[1.5]).unwrap(),
            Distribution::Parametric(
                Parametric::truncated(Family::Normal { mean: 0.0, sd: 1.0 }, f64::NEG_INFINITY, 0.3).unwrap(),
            ),
            Distribution::Parametric(
                Parametric::truncated(Family::Exponential { rate: 2.0 }, 0.4, 1.1).unwrap(),
            ),
        ];
        for d in &fams {
            let mut prev = 0.0;
            for i in 1..200 {
                let p = i as f64 / 200.0;
                let x = d.quantile(p);
                assert!((d.cdf(x) - p).abs() < 1e-10, "{d} at {p}");
                assert!(d.cdf(x) >= prev);
                prev = d.cdf(x);
            }
        }
    }

    #[test]
    fn truncated_normal_half_line() {
        // N(0,1) given W <= 0: mean -sqrt(2/pi), variance 1 - 2/pi
        let p = Parametric::truncated(Family::Normal { mean: 0.0, sd: 1.0 }, f64::NEG_INFINITY, 0.0).unwrap();
        let (m, v) = p.moments();
        let two_over_pi = 2.0 / std::f64::consts::PI;
        assert!((m + two_over_pi.sqrt()).abs() < 1e-12);
        assert!((v - (1.0 - two_over_pi)).abs() < 1e-12);
    }

    #[test]
    fn truncated_exponential_matches_quadrature() {
        let p = Parametric::truncated(Family::Exponential { rate: 2.0 }, 0.4, 1.1).unwrap();
        // midpoint quadrature of the conditional density
        let steps = 200_000;
        let h = 0.7 / steps as f64;
        let z = (-0.8f64).exp() - (-2.2f64).exp();
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..steps {
            let x = 0.4 + (i as f64 + 0.5) * h;
            let w = 2.0 * (-2.0 * x).exp() / z * h;
            m1 += x * w;
            m2 += x * x * w;
        }
        let (m, v) = p.moments();
        assert!((m - m1).abs() < 1e-9);
        assert!((v - (m2 - m1 * m1)).abs() < 1e-9);
    }

    #[test]
    fn json_shapes() {
        let d: Distribution =
            serde_json::from_str(r#"{"kind":"discrete","support":[1,0],"probs":[0.7,"3/10"]}"#).unwrap();
        assert_eq!(d, make_discrete(&[0.0, 1.0], &[0.3, 0.7]).unwrap());
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"kind":"discrete","support":[0.0,1.0],"probs":[0.3,0.7]}"#
        );
        let n: Distribution =
            serde_json::from_str(r#"{"kind":"parametric","family":"normal","params":[0,1]}"#).unwrap();
        assert_eq!(n, Distribution::parametric("normal", &[0.0, 1.0]).unwrap());
        let t = Distribution::Parametric(
            Parametric::truncated(Family::Normal { mean: 0.0, sd: 1.0 }, f64::NEG_INFINITY, 0.5).unwrap(),
        );
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.contains(r#""truncate":[null,0.5]"#), "{text}");
        assert_eq!(serde_json::from_str::<Distribution>(&text).unwrap(), t);
        assert!(serde_json::from_str::<Distribution>(r#"{"kind":"discrete","support":[0],"probs":[0.5]}"#).is_err());
    }

    #[test]
    fn non_short_rationals_serialize_as_text() {
        let d = Distribution::discrete_exact(
            vec![0.0, 1.0],
            vec![prob(1, 1_000_000_000_000_000_001), prob(1_000_000_000_000_000_000, 1_000_000_000_000_000_001)],
        )
        .unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"1/1000000000000000001\""), "{text}");
        assert_eq!(serde_json::from_str::<Distribution>(&text).unwrap(), d);
    }
}

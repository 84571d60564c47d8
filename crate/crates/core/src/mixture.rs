//! Two-component mixture decomposition `W = (1 - tau) U + tau V` with
//! `E U < E V`.
//!
//! With `a`, `b` the lower and upper `(1 - tau)`-quantiles of `W` there are
//! two cases. If the quantiles separate the mass exactly
//! (`P(W <= a) = 1 - tau`), U and V are the conditional laws of W below `a`
//! and above `b`. Otherwise `a = b` carries an atom, which is split between
//! U and V in the proportions needed to complete both components.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{
    exact_rational, prob, prob_to_f64, DistError, Distribution, Parametric, Prob, ProbSpec,
};

/// Number of quantile levels used to compare CDFs of non-discrete laws.
pub const CDF_GRID: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("W is almost surely constant")]
    DegenerateLaw,
    #[error("tau must lie strictly between 0 and 1")]
    InvalidTau,
    #[error("component means are not separated: E U = {mean_u}, E V = {mean_v}")]
    MeansNotSeparated { mean_u: f64, mean_v: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// U, V are the conditional laws of W below and above the quantiles.
    SeparatedQuantiles,
    /// The atom at `a = b` is shared between U and V.
    AtomSplit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixturePair {
    pub u: Distribution,
    pub v: Distribution,
    pub tau: Prob,
    pub case_tag: CaseTag,
    pub mean_u: f64,
    pub mean_v: f64,
}

impl MixturePair {
    /// Assembles a pair from given components without checking the mean
    /// ordering; see [`MixturePair::check_means`].
    pub fn new(u: Distribution, v: Distribution, tau: Prob, case_tag: CaseTag) -> Self {
        let mean_u = u.mean();
        let mean_v = v.mean();
        MixturePair {
            u,
            v,
            tau,
            case_tag,
            mean_u,
            mean_v,
        }
    }

    pub fn tau_f64(&self) -> f64 {
        prob_to_f64(&self.tau)
    }

    pub fn check_means(&self) -> Result<(), MixtureError> {
        if self.mean_u < self.mean_v {
            Ok(())
        } else {
            Err(MixtureError::MeansNotSeparated {
                mean_u: self.mean_u,
                mean_v: self.mean_v,
            })
        }
    }
}

/// Decomposes `w` into a mixture with weight `tau` on the upper component.
pub fn split(w: &Distribution, tau: &Prob) -> Result<MixturePair, MixtureError> {
    if !tau.is_positive() || *tau >= Prob::one() {
        return Err(MixtureError::InvalidTau);
    }
    if w.is_degenerate() {
        return Err(MixtureError::DegenerateLaw);
    }
    let q = w.quantile_pair(tau)?;
    let lower_weight = Prob::one() - tau;
    let pair = match w {
        Distribution::Discrete(d) => {
            let below: Prob = d
                .support()
                .iter()
                .zip(d.probs())
                .filter(|(x, _)| **x < q.a)
                .map(|(_, p)| p.clone())
                .sum();
            let at_a = d.mass_at(q.a);
            if &below + &at_a == lower_weight {
                let (mut us, mut up, mut vs, mut vp) = (vec![], vec![], vec![], vec![]);
                for (x, p) in d.support().iter().zip(d.probs()) {
                    if *x <= q.a {
                        us.push(*x);
                        up.push(p / &lower_weight);
                    } else {
                        vs.push(*x);
                        vp.push(p / tau);
                    }
                }
                MixturePair::new(
                    Distribution::discrete_exact(us, up)?,
                    Distribution::discrete_exact(vs, vp)?,
                    tau.clone(),
                    CaseTag::SeparatedQuantiles,
                )
            } else {
                let above = Prob::one() - &below - &at_a;
                let (mut us, mut up, mut vs, mut vp) = (vec![], vec![], vec![], vec![]);
                for (x, p) in d.support().iter().zip(d.probs()) {
                    if *x < q.a {
                        us.push(*x);
                        up.push(p / &lower_weight);
                    } else if *x > q.a {
                        vs.push(*x);
                        vp.push(p / tau);
                    }
                }
                us.push(q.a);
                up.push((&lower_weight - &below) / &lower_weight);
                vs.push(q.a);
                vp.push((tau - &above) / tau);
                MixturePair::new(
                    Distribution::discrete_exact(us, up)?,
                    Distribution::discrete_exact(vs, vp)?,
                    tau.clone(),
                    CaseTag::AtomSplit,
                )
            }
        }
        Distribution::Parametric(p) => {
            let (lo, hi) = p.bounds();
            MixturePair::new(
                Distribution::Parametric(Parametric::truncated(p.family(), lo, q.a)?),
                Distribution::Parametric(Parametric::truncated(p.family(), q.a, hi)?),
                tau.clone(),
                CaseTag::SeparatedQuantiles,
            )
        }
    };
    pair.check_means()?;
    Ok(pair)
}

/// Largest deviation between `w` and the mixture described by `pair`.
///
/// Atom-wise and exact when all three laws are discrete; otherwise the CDF
/// deviation on `CDF_GRID` equispaced quantile levels of `w`.
pub fn verify_mixture_identity(pair: &MixturePair, w: &Distribution) -> f64 {
    let lower_weight = Prob::one() - &pair.tau;
    if let (Some(wd), Some(ud), Some(vd)) = (w.as_discrete(), pair.u.as_discrete(), pair.v.as_discrete()) {
        let mut points: Vec<f64> = wd
            .support()
            .iter()
            .chain(ud.support())
            .chain(vd.support())
            .copied()
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let worst = points
            .into_iter()
            .map(|x| (wd.mass_at(x) - &lower_weight * ud.mass_at(x) - &pair.tau * vd.mass_at(x)).abs())
            .max()
            .unwrap_or_else(Prob::zero);
        return prob_to_f64(&worst);
    }
    let tau = pair.tau_f64();
    (0..CDF_GRID)
        .map(|i| {
            let x = w.quantile((i as f64 + 0.5) / CDF_GRID as f64);
            (w.cdf(x) - (1.0 - tau) * pair.u.cdf(x) - tau * pair.v.cdf(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Threshold `a` with `P(W <= a) = 1 - 1/ell` exactly, when one exists.
///
/// For a discrete law this is an exact scan of the cumulative
/// probabilities. A continuous parametric law always has one: its
/// `(1 - 1/ell)`-quantile.
pub fn detect_condition1(w: &Distribution, ell: u32) -> Option<f64> {
    assert!(ell >= 2, "ell must be at least 2");
    let level = Prob::one() - prob(1, i64::from(ell));
    match w {
        Distribution::Discrete(d) => {
            let mut running = Prob::zero();
            for (x, p) in d.support().iter().zip(d.probs()) {
                running += p;
                if running == level {
                    return Some(*x);
                }
                if running > level {
                    return None;
                }
            }
            None
        }
        Distribution::Parametric(p) => Some(p.quantile(prob_to_f64(&level))),
    }
}

/// Exact second-moment mismatch `E[W^2] - (1 - tau) E[U^2] - tau E[V^2]`
/// for discrete laws.
pub fn second_moment_gap(pair: &MixturePair, w: &Distribution) -> Option<Prob> {
    let (wd, ud, vd) = (w.as_discrete()?, pair.u.as_discrete()?, pair.v.as_discrete()?);
    Some(
        wd.exact_second_moment()
            - (Prob::one() - &pair.tau) * ud.exact_second_moment()
            - &pair.tau * vd.exact_second_moment(),
    )
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    u: Distribution,
    v: Distribution,
    tau: ProbSpec,
    case_tag: CaseTag,
    mean_u: f64,
    mean_v: f64,
}

impl Serialize for MixturePair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PairJson {
            u: self.u.clone(),
            v: self.v.clone(),
            tau: ProbSpec::from_prob(&self.tau),
            case_tag: self.case_tag,
            mean_u: self.mean_u,
            mean_v: self.mean_v,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixturePair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PairJson::deserialize(d)?;
        let tau = raw.tau.to_prob().map_err(serde::de::Error::custom)?;
        Ok(MixturePair::new(raw.u, raw.v, tau, raw.case_tag))
    }
}

/// `E[W 1(W <= a)]`-style exact conditional mean, used by tests.
pub fn conditional_mean(w: &Distribution, keep: impl Fn(f64) -> bool) -> Option<f64> {
    let d = w.as_discrete()?;
    let mut mass = Prob::zero();
    let mut first = Prob::zero();
    for (x, p) in d.support().iter().zip(d.probs()) {
        if keep(*x) {
            mass += p;
            first += exact_rational(*x) * p;
        }
    }
    (!mass.is_zero()).then(|| prob_to_f64(&(first / mass)))
}

//! Exact and statistical verification: empirical CDFs, Kolmogorov-Smirnov
//! distances, independence audits and the gap-filling check for sequences.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Distribution, Prob};
use crate::exact::{enumeration_states, subset_law, ExactError, Weight, ENUMERATION_BUDGET};
use crate::graph::{ratio_trend, EdgeId, Graph, GraphSeq, RatioTrend};
use crate::limit::{sample_limit, LimitError, LimitLaw};
use crate::rng::RngStream;
use crate::sampler::{sample_row, stream_sequence, Construction, SamplerError};

/// Monte Carlo KS acceptance at 10^5 draws.
pub const KS_TOLERANCE: f64 = 0.02;
/// Tolerance of floating-point enumeration.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("empirical distribution needs at least one sample")]
    EmptySample,
    #[error("sample contains NaN")]
    NanSample,
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Limit(#[from] LimitError),
}

/// Sorted sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, VerifyError> {
        if samples.is_empty() {
            return Err(VerifyError::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(VerifyError::NanSample);
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDist { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// F_n(x) = #{x_i <= x} / n.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        sample_variance(&self.sorted)
    }
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = sample_mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = sample_mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2).max(0.0) / n).sqrt()
}

/// sup_x |F_n(x) - F(x)|, checking both sides of every jump of F_n. The
/// left limit of F is read just below each sample point, so reference laws
/// with atoms are handled too.
pub fn ks_one_sample(e: &EmpiricalDist, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = e.len() as f64;
    let xs = &e.sorted;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let below = cdf(x.next_down());
        worst = worst.max((j as f64 / n - cdf(x)).abs()).max((below - i as f64 / n).abs());
        i = j;
    }
    worst
}

/// Two-sample sup distance between empirical CDFs by a merge scan.
pub fn ks_two_sample(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    let (xs, ys) = (&a.sorted, &b.sorted);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetGap {
    pub size: usize,
    pub subsets_checked: usize,
    pub worst_subset: Vec<EdgeId>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub tuple_size: usize,
    pub arithmetic: Arithmetic,
    pub tolerance: f64,
    pub per_size: Vec<SubsetGap>,
    pub worst_subset: Vec<EdgeId>,
    pub max_factorization_gap: f64,
    pub pass: bool,
    /// Worst subset of size `tuple_size + 1`, where independence may fail.
    pub next_size: Option<SubsetGap>,
}

fn worst_of_size<W: Weight>(
    g: &Graph,
    ell: u32,
    u: &Distribution,
    v: &Distribution,
    size: usize,
) -> Result<SubsetGap, ExactError> {
    let ids: Vec<EdgeId> = g.edges().iter().map(|e| e.id).collect();
    let mut worst: Option<(W, Vec<EdgeId>)> = None;
    let mut checked = 0;
    for subset in ids.into_iter().combinations(size) {
        let gap = subset_law::<W>(g, ell, u, v, &subset)?.factorization_gap();
        checked += 1;
        let better = match &worst {
            None => true,
            Some((w, _)) => gap != *w && gap.clone().max_of(w.clone()) == gap,
        };
        if better {
            worst = Some((gap, subset));
        }
    }
    let (gap, subset) = worst.map(|(g, s)| (g.to_f64(), s)).unwrap_or((0.0, Vec::new()));
    Ok(SubsetGap {
        size,
        subsets_checked: checked,
        worst_subset: subset,
        gap,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Compares, for every edge subset of size at most `k`, the exact joint
/// law of the summands with the product of its marginals. Also reports the
/// worst subset of size `k + 1` when the graph has that many edges. The
/// total work over all subsets is capped at 100 times the per-subset budget.
pub fn audit_independence(
    g: &Graph,
    ell: u32,
    u: &Distribution,
    v: &Distribution,
    k: usize,
    tolerance: f64,
    arithmetic: Arithmetic,
) -> Result<IndependenceReport, VerifyError> {
    let run = |size: usize| match arithmetic {
        Arithmetic::Exact => worst_of_size::<Prob>(g, ell, u, v, size),
        Arithmetic::Float => worst_of_size::<f64>(g, ell, u, v, size),
    };
    let max_size = k.min(g.num_edges());
    let top = (k + 1).min(g.num_edges());
    let mut work = 0.0;
    for size in 1..=top {
        let subsets = binomial(g.num_edges(), size);
        work += subsets * enumeration_states(2 * size, size, ell, u, v)?;
    }
    if work > ENUMERATION_BUDGET * 1e2 {
        return Err(ExactError::BudgetExceeded {
            states: work,
            budget: ENUMERATION_BUDGET * 1e2,
        }
        .into());
    }
    let per_size = (1..=max_size).map(run).collect::<Result<Vec<_>, _>>()?;
    let next_size = if k < g.num_edges() { Some(run(k + 1)?) } else { None };
    let worst = per_size
        .iter()
        .max_by(|a, b| a.gap.total_cmp(&b.gap))
        .cloned();
    let (worst_subset, max_gap) = worst.map(|w| (w.worst_subset, w.gap)).unwrap_or_default();
    Ok(IndependenceReport {
        tuple_size: k,
        arithmetic,
        tolerance,
        per_size,
        worst_subset,
        max_factorization_gap: max_gap,
        pass: max_gap <= tolerance,
        next_size,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSettings {
    /// Independent sequence paths.
    pub reps: usize,
    /// Index into the sequence of the graph `G_m` opening the window
    /// `n_m <= n < n_{m+1}`.
    pub checkpoint: usize,
    /// Draws from the limit law and of independent rows.
    pub reference_samples: usize,
    pub ks_tolerance: f64,
    pub checkpoint_ks_tolerance: f64,
    /// Allowed deviation of increment variances, in standard errors.
    pub sigma_band: f64,
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings {
            reps: 10_000,
            checkpoint: 0,
            reference_samples: 100_000,
            ks_tolerance: 0.03,
            checkpoint_ks_tolerance: KS_TOLERANCE,
            sigma_band: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementRow {
    pub n: usize,
    pub expected: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub ratio_trend: RatioTrend,
    pub window: Option<(usize, usize)>,
    pub increments: Vec<IncrementRow>,
    pub increments_ok: bool,
    pub off_checkpoint_ks: Option<f64>,
    pub checkpoint_ks: Option<f64>,
    pub r: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

const LIMIT_STREAM: u64 = u64::MAX;
const ROW_STREAM: u64 = u64::MAX - 1;

/// Simulates sequence paths across the window between two consecutive
/// checkpoints. The increment term `sum_{k=N+1}^n (X_k - mu) / (sigma sqrt N)`
/// (N the last checkpoint) must have variance `(n - N)/N`, and the partial
/// sums off the checkpoints must follow the limit law of the checkpoints.
pub fn gap_filling_check(
    gs: &GraphSeq,
    ctx: &Construction,
    settings: &GapSettings,
    rng: &RngStream,
) -> Result<GapReport, VerifyError> {
    let counts = gs.edge_counts();
    let ratios: Vec<f64> = counts.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let trend = ratio_trend(&ratios);
    let law = LimitLaw::for_pair(ctx.ell(), ctx.pair(), ctx.sigma())?;
    let mut notes = Vec::new();
    if trend == RatioTrend::Unverifiable {
        notes.push("fewer than three graphs: ratio hypothesis n_{m+1}/n_m -> 1 is unverifiable".to_string());
    }
    if settings.checkpoint + 1 >= counts.len() {
        notes.push("no checkpoint window: the sequence has no graph after the checkpoint".to_string());
        return Ok(GapReport {
            ratio_trend: trend,
            window: None,
            increments: Vec::new(),
            increments_ok: false,
            off_checkpoint_ks: None,
            checkpoint_ks: None,
            r: law.r,
            pass: false,
            notes,
        });
    }
    let (lo, hi) = (counts[settings.checkpoint], counts[settings.checkpoint + 1]);
    let width = hi - lo;
    let (mu, sigma) = (ctx.mu(), ctx.sigma());

    // per path: S_n for n in lo..hi and increments for the same n
    let paths: Vec<(Vec<f64>, Vec<f64>)> = (0..settings.reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = rng.derive(rep as u64);
            let path = stream_sequence(gs, ctx, hi - 1, &mut stream)?;
            let mut s = Vec::with_capacity(width);
            let mut inc = Vec::with_capacity(width);
            let mut tail = 0.0;
            for point in path.skip(lo - 1) {
                if point.n > lo {
                    tail += point.summand - mu;
                }
                s.push(point.s_n);
                inc.push(tail / (sigma * (lo as f64).sqrt()));
            }
            Ok((s, inc))
        })
        .collect::<Result<_, SamplerError>>()?;

    let mut increments = Vec::with_capacity(width);
    for offset in 0..width {
        let n = lo + offset;
        let column: Vec<f64> = paths.iter().map(|(_, inc)| inc[offset]).collect();
        let expected = (n - lo) as f64 / lo as f64;
        let empirical = sample_variance(&column);
        let standard_error = variance_standard_error(&column);
        let within_band = (empirical - expected).abs() <= settings.sigma_band * standard_error;
        increments.push(IncrementRow {
            n,
            expected,
            empirical,
            standard_error,
            within_band,
        });
    }
    let increments_ok = increments.iter().all(|r| r.within_band);

    let limit = EmpiricalDist::new(sample_limit(&law, &mut rng.derive(LIMIT_STREAM), settings.reference_samples))?;
    let off: Vec<f64> = paths.iter().flat_map(|(s, _)| s[1..].iter().copied()).collect();
    let off_checkpoint_ks = if off.is_empty() {
        notes.push("window has no off-checkpoint index".to_string());
        None
    } else {
        Some(ks_two_sample(&EmpiricalDist::new(off)?, &limit))
    };

    let at_checkpoint = EmpiricalDist::new(paths.iter().map(|(s, _)| s[0]).collect())?;
    let g = &gs.graphs()[settings.checkpoint];
    let row_base = rng.derive(ROW_STREAM);
    let rows: Vec<f64> = (0..settings.reference_samples)
        .into_par_iter()
        .map(|i| sample_row(g, ctx, &mut row_base.derive(i as u64)).s_star)
        .collect();
    let checkpoint_ks = ks_two_sample(&at_checkpoint, &EmpiricalDist::new(rows)?);

    let ks_ok = off_checkpoint_ks.is_some_and(|d| d <= settings.ks_tolerance);
    let pass = increments_ok && ks_ok && checkpoint_ks <= settings.checkpoint_ks_tolerance;
    Ok(GapReport {
        ratio_trend: trend,
        window: Some((lo, hi)),
        increments,
        increments_ok,
        off_checkpoint_ks,
        checkpoint_ks: Some(checkpoint_ks),
        r: law.r,
        pass,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::make_discrete;
    use crate::graph::{complete_bipartite, Edge};
    use crate::limit::normal_cdf;
    use proptest::prelude::*;
    use rand_distr::{Distribution as _, StandardNormal};

    #[test]
    fn empirical_basics() {
        assert_eq!(EmpiricalDist::new(vec![]), Err(VerifyError::EmptySample));
        assert_eq!(EmpiricalDist::new(vec![1.0, f64::NAN]), Err(VerifyError::NanSample));
        let e = EmpiricalDist::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.samples(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.mean(), 2.0);
    }

    #[test]
    fn ks_quantile_grid_is_small() {
        let n = 1000;
        let xs = (1..=n).map(|i| crate::limit::normal_quantile(i as f64 / (n + 1) as f64)).collect();
        let d = ks_one_sample(&EmpiricalDist::new(xs).unwrap(), normal_cdf);
        assert!(d <= 2.0 / n as f64, "{d}");
    }

    #[test]
    fn ks_point_mass_vs_normal() {
        let e = EmpiricalDist::new(vec![0.0; 50]).unwrap();
        assert_eq!(ks_one_sample(&e, normal_cdf), 0.5);
    }

    #[test]
    fn ks_normal_draws() {
        let mut rng = RngStream::new(31);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_one_sample(&EmpiricalDist::new(xs).unwrap(), normal_cdf);
        assert!(d <= 1.5 * 1.95 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn ks_discrete_reference() {
        let e = EmpiricalDist::new(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let cdf = |x: f64| if x < 0.0 { 0.0 } else if x < 1.0 { 0.25 } else if x < 2.0 { 0.75 } else { 1.0 };
        assert_eq!(ks_one_sample(&e, cdf), 0.0);
    }

    #[test]
    fn ks_two_sample_examples() {
        let a = EmpiricalDist::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a.clone()), 0.0);
        let b = EmpiricalDist::new(vec![10.0, 11.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let mut rng = RngStream::new(12);
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_two_sample(&EmpiricalDist::new(x).unwrap(), &EmpiricalDist::new(y).unwrap());
        assert!(d <= 0.02, "{d}");
    }

    #[test]
    fn ks_two_sample_with_ties() {
        let a = EmpiricalDist::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let b = EmpiricalDist::new(vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 0.25);
    }

    proptest! {
        #[test]
        fn ks_two_sample_symmetric_and_monotone_invariant(
            a in proptest::collection::vec(-5.0f64..5.0, 1..60),
            b in proptest::collection::vec(-5.0f64..5.0, 1..60),
        ) {
            let ea = EmpiricalDist::new(a.clone()).unwrap();
            let eb = EmpiricalDist::new(b.clone()).unwrap();
            let d = ks_two_sample(&ea, &eb);
            prop_assert_eq!(d, ks_two_sample(&eb, &ea));
            let t = |x: f64| x.exp() + 3.0 * x;
            let ta = EmpiricalDist::new(a.into_iter().map(t).collect()).unwrap();
            let tb = EmpiricalDist::new(b.into_iter().map(t).collect()).unwrap();
            prop_assert_eq!(d, ks_two_sample(&ta, &tb));
        }
    }

    fn delta(x: f64) -> Distribution {
        Distribution::point_mass(x)
    }

    #[test]
    fn audit_k22() {
        let g = complete_bipartite(2);
        let r = audit_independence(&g, 2, &delta(0.0), &delta(1.0), 3, 0.0, Arithmetic::Exact).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_factorization_gap, 0.0);
        assert_eq!(r.per_size.iter().map(|s| s.subsets_checked).collect::<Vec<_>>(), vec![4, 6, 4]);
        let four = r.next_size.unwrap();
        assert_eq!(four.gap, 1.0 / 16.0);
        assert_eq!(four.worst_subset, vec![0, 1, 2, 3]);
    }

    #[test]
    fn audit_triangle() {
        let edges = vec![Edge { id: 0, u: 0, v: 1 }, Edge { id: 1, u: 1, v: 2 }, Edge { id: 2, u: 2, v: 0 }];
        let g = Graph::new(vec![0, 1, 2], edges).unwrap();
        let r = audit_independence(&g, 2, &delta(0.0), &delta(1.0), 2, 0.0, Arithmetic::Exact).unwrap();
        assert!(r.pass);
        // 8 assignments: all-match 2/8 vs 1/8; exactly one mismatch impossible
        assert_eq!(r.next_size.unwrap().gap, 1.0 / 8.0);
        let fail = audit_independence(&g, 2, &delta(0.0), &delta(1.0), 3, 0.0, Arithmetic::Exact).unwrap();
        assert!(!fail.pass);
        assert_eq!(fail.worst_subset, vec![0, 1, 2]);
    }

    #[test]
    fn audit_single_edge() {
        let g = complete_bipartite(1);
        let u = make_discrete(&[0.0, 2.0], &[0.5, 0.5]).unwrap();
        let r = audit_independence(&g, 3, &u, &delta(1.0), 1, 0.0, Arithmetic::Float).unwrap();
        assert!(r.pass);
        assert!(r.next_size.is_none());
    }

    #[test]
    fn large_audit_is_refused() {
        let g = complete_bipartite(40);
        let r = audit_independence(&g, 2, &delta(0.0), &delta(1.0), 3, 0.0, Arithmetic::Exact);
        assert!(matches!(r, Err(VerifyError::Exact(ExactError::BudgetExceeded { .. }))));
    }

    #[test]
    fn float_audit_within_tolerance() {
        let g = complete_bipartite(2);
        let u = make_discrete(&[0.0, 1.0], &[0.6, 0.4]).unwrap();
        let r = audit_independence(&g, 2, &u, &delta(1.0), 3, FLOAT_TOLERANCE, Arithmetic::Float).unwrap();
        assert!(r.pass, "{}", r.max_factorization_gap);
    }
}

//! Sampling the dependent construction.
//!
//! Every vertex `i` gets a label `M_i` uniform on `1..=ell`; an edge is a
//! match (`D_k = 1`) when its endpoint labels agree. The summand on edge `k`
//! is a draw of V on a match and of U otherwise. With `(U, V)` a mixture
//! decomposition of W at weight `1/ell`, every summand has law W, and the
//! summands of a graph of girth `K + 1` are K-tuplewise independent.
//!
//! Labels and summand uniforms are read from counter-based lanes indexed by
//! vertex id and edge id, so a row drawn directly and the same row reached
//! by a growing sequence see identical randomness.

use std::collections::HashMap;

use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{prob, Distribution};
use crate::graph::{edge_order, Edge, EdgeId, Graph, GraphError, GraphSeq, VertexId};
use crate::mixture::{verify_mixture_identity, MixturePair};
use crate::rng::{Lane, RngStream, LABEL_LANE, SUMMAND_LANE};

/// Largest mixture-identity deviation accepted between a pair and W.
pub const PAIR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("ell must be at least 2, got {0}")]
    InvalidEll(u32),
    #[error("mixture weight {tau} does not equal 1/ell for ell = {ell}")]
    TauMismatch { tau: String, ell: u32 },
    #[error("W must have positive finite variance, got {0}")]
    ZeroVariance(f64),
    #[error("mixture pair does not decompose W (deviation {0})")]
    PairMismatch(f64),
    #[error("sequence has {available} edges, {requested} requested")]
    ExhaustedSequence { requested: usize, available: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Validated parameters of the construction: label count, mixture pair and
/// the moments of W.
#[derive(Clone, Debug)]
pub struct Construction {
    ell: u32,
    pair: MixturePair,
    mu: f64,
    sigma: f64,
}

impl Construction {
    pub fn new(ell: u32, pair: &MixturePair, w: &Distribution) -> Result<Self, SamplerError> {
        if ell < 2 {
            return Err(SamplerError::InvalidEll(ell));
        }
        if pair.tau != prob(1, i64::from(ell)) {
            return Err(SamplerError::TauMismatch {
                tau: crate::dist::format_prob(&pair.tau),
                ell,
            });
        }
        let (mu, var) = w.moments();
        if !(var > 0.0 && var.is_finite()) {
            return Err(SamplerError::ZeroVariance(var));
        }
        let deviation = verify_mixture_identity(pair, w);
        if deviation > PAIR_TOLERANCE {
            return Err(SamplerError::PairMismatch(deviation));
        }
        Ok(Construction {
            ell,
            pair: pair.clone(),
            mu,
            sigma: var.sqrt(),
        })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn pair(&self) -> &MixturePair {
        &self.pair
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Standardized match count `(Xi - n/ell) / sqrt(n/ell (1 - 1/ell))`.
    pub fn xi_star(&self, xi: u64, n: usize) -> f64 {
        standardize_matches(xi, n, self.ell)
    }

    /// Standardized sum `(sum - n mu) / (sigma sqrt(n))`.
    pub fn s_star(&self, sum: f64, n: usize) -> f64 {
        let n = n as f64;
        (sum - n * self.mu) / (self.sigma * n.sqrt())
    }

    fn summand(&self, matched: bool, u: f64) -> f64 {
        if matched {
            self.pair.v.from_uniform(u)
        } else {
            self.pair.u.from_uniform(u)
        }
    }
}

pub fn standardize_matches(xi: u64, n: usize, ell: u32) -> f64 {
    let n = n as f64;
    let p = 1.0 / f64::from(ell);
    (xi as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
}

/// One realization of a row: labels, match indicators, summands and the
/// row statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct RowDraw {
    pub labels: Vec<(VertexId, u32)>,
    pub edges: Vec<EdgeId>,
    pub indicators: Vec<bool>,
    pub summands: Vec<f64>,
    pub xi: u64,
    pub xi_star: f64,
    pub s_star: f64,
    pub n_m: usize,
}

impl RowDraw {
    pub fn label(&self, v: VertexId) -> Option<u32> {
        self.labels
            .binary_search_by_key(&v, |(id, _)| *id)
            .ok()
            .map(|i| self.labels[i].1)
    }
}

/// Summary statistics of a row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub xi: u64,
    pub xi_star: f64,
    pub s_star: f64,
}

/// Draws one row of the construction on `g`.
///
/// Consumes one split of `rng`; labels and summand uniforms come from the
/// split's lanes, indexed by vertex id and edge id. Only the branch selected
/// by the match indicator is drawn for each edge.
pub fn sample_row(g: &Graph, ctx: &Construction, rng: &mut RngStream) -> RowDraw {
    let row = rng.split();
    let mut label_lane = row.lane(LABEL_LANE);
    let mut summand_lane = row.lane(SUMMAND_LANE);
    let labels: Vec<(VertexId, u32)> = g
        .vertices()
        .iter()
        .map(|&v| (v, label_lane.label(v, ctx.ell)))
        .collect();
    let lookup: HashMap<VertexId, u32> = labels.iter().copied().collect();
    let n = g.num_edges();
    let mut edges = Vec::with_capacity(n);
    let mut indicators = Vec::with_capacity(n);
    let mut summands = Vec::with_capacity(n);
    let mut xi = 0u64;
    let mut sum = 0.0;
    for e in g.edges() {
        let matched = lookup[&e.u] == lookup[&e.v];
        let x = ctx.summand(matched, summand_lane.open01(e.id));
        xi += u64::from(matched);
        sum += x;
        edges.push(e.id);
        indicators.push(matched);
        summands.push(x);
    }
    RowDraw {
        labels,
        edges,
        indicators,
        summands,
        xi,
        xi_star: ctx.xi_star(xi, n),
        s_star: ctx.s_star(sum, n),
        n_m: n,
    }
}

/// Counts of each label among `m` uniform labels, via a chain of binomials.
pub fn uniform_label_histogram(m: u64, ell: u32, rng: &mut RngStream) -> Vec<u64> {
    let mut counts = Vec::with_capacity(ell as usize);
    let mut remaining = m;
    for c in 0..ell {
        let left = ell - c;
        let k = if left == 1 || remaining == 0 {
            remaining
        } else {
            Binomial::new(remaining, 1.0 / f64::from(left))
                .expect("valid binomial")
                .sample(rng)
        };
        counts.push(k);
        remaining -= k;
    }
    counts
}

/// Histogram of labels in `1..=ell`.
pub fn label_histogram(labels: &[u32], ell: u32) -> Vec<u64> {
    let mut counts = vec![0u64; ell as usize];
    for &l in labels {
        counts[(l - 1) as usize] += 1;
    }
    counts
}

/// Matches of `K_{m,m}` from the two side histograms: `sum_c N_c N'_c`.
pub fn bipartite_matches(left: &[u64], right: &[u64]) -> u64 {
    left.iter().zip(right).map(|(a, b)| a * b).sum()
}

/// Standardized match count of `K_{m,m}` from the two label histograms.
pub fn xi_star_from_histograms(left: &[u64], right: &[u64], m: usize, ell: u32) -> f64 {
    standardize_matches(bipartite_matches(left, right), m * m, ell)
}

/// `xi*_m` for `K_{m,m}` in O(ell) per draw: the left and right label
/// histograms are independent multinomials.
pub fn xi_star_fast_bipartite(m: usize, ell: u32, rng: &mut RngStream) -> f64 {
    assert!(m >= 1 && ell >= 2);
    let left = uniform_label_histogram(m as u64, ell, rng);
    let right = uniform_label_histogram(m as u64, ell, rng);
    xi_star_from_histograms(&left, &right, m, ell)
}

/// Sum of `count` independent draws of `d`. Discrete laws use multinomial
/// atom counts; other laws are summed draw by draw.
pub fn sum_of_draws(d: &Distribution, count: u64, rng: &mut RngStream) -> f64 {
    match d {
        Distribution::Discrete(disc) => {
            let probs = disc.probs_f64();
            let mut remaining = count;
            let mut left_mass = 1.0;
            let mut total = 0.0;
            for (i, (&x, &p)) in disc.support().iter().zip(&probs).enumerate() {
                if remaining == 0 {
                    break;
                }
                let k = if i + 1 == probs.len() {
                    remaining
                } else {
                    let q = (p / left_mass).clamp(0.0, 1.0);
                    Binomial::new(remaining, q).expect("valid binomial").sample(rng)
                };
                total += k as f64 * x;
                remaining -= k;
                left_mass -= p;
            }
            total
        }
        Distribution::Parametric(_) => (0..count).map(|_| d.sample_one(rng)).sum(),
    }
}

/// Row statistics of `K_{m,m}` without materializing edges: Xi from the
/// label histograms, then the sum of Xi draws of V and `m^2 - Xi` draws of U.
pub fn row_stats_fast_bipartite(m: usize, ctx: &Construction, rng: &mut RngStream) -> RowStats {
    let left = uniform_label_histogram(m as u64, ctx.ell, rng);
    let right = uniform_label_histogram(m as u64, ctx.ell, rng);
    let n = m * m;
    let xi = bipartite_matches(&left, &right);
    let sum = sum_of_draws(&ctx.pair.v, xi, rng) + sum_of_draws(&ctx.pair.u, n as u64 - xi, rng);
    RowStats {
        xi,
        xi_star: ctx.xi_star(xi, n),
        s_star: ctx.s_star(sum, n),
    }
}

/// One step of a sequence path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeqPoint {
    pub n: usize,
    pub edge: EdgeId,
    pub summand: f64,
    pub xi: u64,
    pub s_n: f64,
}

/// Standardized partial sums `S_n` along the canonical edge order of a
/// nested graph sequence. Vertex labels are assigned on first appearance
/// and kept for the rest of the path.
#[derive(Debug)]
pub struct SequenceStream {
    ctx: Construction,
    order: Vec<Edge>,
    n_max: usize,
    next: usize,
    labels: HashMap<VertexId, u32>,
    label_lane: Lane,
    summand_lane: Lane,
    xi: u64,
    sum: f64,
}

impl SequenceStream {
    fn label(&mut self, v: VertexId) -> u32 {
        let (lane, ell) = (&mut self.label_lane, self.ctx.ell);
        *self.labels.entry(v).or_insert_with(|| lane.label(v, ell))
    }

    pub fn labels_assigned(&self) -> usize {
        self.labels.len()
    }
}

impl Iterator for SequenceStream {
    type Item = SeqPoint;

    fn next(&mut self) -> Option<SeqPoint> {
        if self.next >= self.n_max {
            return None;
        }
        let e = self.order[self.next];
        let matched = self.label(e.u) == self.label(e.v);
        let x = self.ctx.summand(matched, self.summand_lane.open01(e.id));
        self.next += 1;
        self.xi += u64::from(matched);
        self.sum += x;
        Some(SeqPoint {
            n: self.next,
            edge: e.id,
            summand: x,
            xi: self.xi,
            s_n: self.ctx.s_star(self.sum, self.next),
        })
    }
}

/// Starts a sequence path of `n_max` terms. Consumes one split of `rng`,
/// exactly like [`sample_row`], so a row and a path drawn from equal stream
/// states share labels and summands.
pub fn stream_sequence(
    gs: &GraphSeq,
    ctx: &Construction,
    n_max: usize,
    rng: &mut RngStream,
) -> Result<SequenceStream, SamplerError> {
    let order = edge_order(gs)?;
    if n_max > order.len() {
        return Err(SamplerError::ExhaustedSequence {
            requested: n_max,
            available: order.len(),
        });
    }
    let path = rng.split();
    Ok(SequenceStream {
        ctx: ctx.clone(),
        order,
        n_max,
        next: 0,
        labels: HashMap::new(),
        label_lane: path.lane(LABEL_LANE),
        summand_lane: path.lane(SUMMAND_LANE),
        xi: 0,
        sum: 0.0,
    })
}

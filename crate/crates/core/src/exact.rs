//! Exact joint laws of row summands by enumeration of label assignments.
//!
//! For a set of edges, the labels of the touched vertices are enumerated
//! and grouped by the resulting match pattern; each pattern is then
//! expanded over the atoms of U (non-matches) and V (matches). Arithmetic is
//! generic so the same enumeration runs in floating point or in exact
//! rationals.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::dist::{Discrete, Distribution, Prob};
use crate::graph::{EdgeId, Graph, VertexId};

/// Maximum number of enumerated states `ell^|V| * support^|E|`.
pub const ENUMERATION_BUDGET: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("enumeration needs {states:.3e} states, budget is {budget:.0e}")]
    BudgetExceeded { states: f64, budget: f64 },
    #[error("exact enumeration needs finite discrete U and V")]
    NotDiscrete,
    #[error("edge {0} is not in the graph")]
    UnknownEdge(EdgeId),
    #[error("at most 64 edges per enumerated subset")]
    TooManyEdges,
}

/// Number field used by the enumeration.
pub trait Weight: Clone + Debug + PartialEq {
    fn zero() -> Self;
    fn from_prob(p: &Prob) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    fn max_of(self, other: Self) -> Self;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_prob(p: &Prob) -> Self {
        crate::dist::prob_to_f64(p)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn max_of(self, other: Self) -> Self {
        self.max(other)
    }
}

impl Weight for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_prob(p: &Prob) -> Self {
        p.clone()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Joint law of the summands on an ordered list of edges. Keys index into
/// `values`, one entry per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLaw<W> {
    pub edges: Vec<EdgeId>,
    pub values: Vec<f64>,
    pub table: BTreeMap<Vec<u16>, W>,
}

impl<W: Weight> JointLaw<W> {
    /// Probability of the given value tuple (zero if not an atom).
    pub fn prob(&self, xs: &[f64]) -> W {
        let key: Option<Vec<u16>> = xs
            .iter()
            .map(|x| self.values.iter().position(|v| v == x).map(|i| i as u16))
            .collect();
        key.and_then(|k| self.table.get(&k).cloned())
            .unwrap_or_else(W::zero)
    }

    /// Law of the summand at position `pos`, indexed like `values`.
    pub fn marginal(&self, pos: usize) -> Vec<W> {
        let mut out = vec![W::zero(); self.values.len()];
        for (key, w) in &self.table {
            let slot = &mut out[key[pos] as usize];
            *slot = slot.add(w);
        }
        out
    }

    pub fn total(&self) -> W {
        self.table.values().fold(W::zero(), |acc, w| acc.add(w))
    }

    /// Largest atom-wise gap between the joint law and the product of its
    /// one-dimensional marginals.
    pub fn factorization_gap(&self) -> W {
        let k = self.edges.len();
        let marginals: Vec<Vec<W>> = (0..k).map(|p| self.marginal(p)).collect();
        let supports: Vec<Vec<usize>> = marginals
            .iter()
            .map(|m| (0..m.len()).filter(|&i| m[i] != W::zero()).collect())
            .collect();
        let mut worst = W::zero();
        let mut cursor = vec![0usize; k];
        loop {
            let key: Vec<u16> = cursor.iter().enumerate().map(|(p, &c)| supports[p][c] as u16).collect();
            let product = key
                .iter()
                .enumerate()
                .fold(None::<W>, |acc, (p, &v)| {
                    let m = &marginals[p][v as usize];
                    Some(match acc {
                        None => m.clone(),
                        Some(a) => a.mul(m),
                    })
                })
                .unwrap_or_else(W::zero);
            let joint = self.table.get(&key).cloned().unwrap_or_else(W::zero);
            worst = worst.max_of(joint.sub(&product).abs());
            // odometer over the product of marginal supports
            let mut p = 0;
            loop {
                if p == k {
                    return worst;
                }
                cursor[p] += 1;
                if cursor[p] < supports[p].len() {
                    break;
                }
                cursor[p] = 0;
                p += 1;
            }
        }
    }
}

fn discrete(d: &Distribution) -> Result<&Discrete, ExactError> {
    d.as_discrete().ok_or(ExactError::NotDiscrete)
}

/// Enumeration size admission check: `ell^|V| * s^|E|` with `s` the larger
/// support size of U and V.
pub fn enumeration_states(vertices: usize, edges: usize, ell: u32, u: &Distribution, v: &Distribution) -> Result<f64, ExactError> {
    let s = discrete(u)?.len().max(discrete(v)?.len()) as f64;
    Ok(f64::from(ell).powi(vertices as i32) * s.powi(edges as i32))
}

/// Exact joint law of the summands on `subset` (edge ids of `g`).
pub fn subset_law<W: Weight>(
    g: &Graph,
    ell: u32,
    u: &Distribution,
    v: &Distribution,
    subset: &[EdgeId],
) -> Result<JointLaw<W>, ExactError> {
    let (ud, vd) = (discrete(u)?, discrete(v)?);
    if subset.len() > 64 {
        return Err(ExactError::TooManyEdges);
    }
    let edges = subset
        .iter()
        .map(|&id| g.edge(id).copied().ok_or(ExactError::UnknownEdge(id)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut touched: Vec<VertexId> = edges.iter().flat_map(|e| [e.u, e.v]).collect();
    touched.sort_unstable();
    touched.dedup();
    let states = enumeration_states(touched.len(), edges.len(), ell, u, v)?;
    if states > ENUMERATION_BUDGET {
        return Err(ExactError::BudgetExceeded {
            states,
            budget: ENUMERATION_BUDGET,
        });
    }
    let local = |x: VertexId| touched.binary_search(&x).expect("touched vertex");
    let ends: Vec<(usize, usize)> = edges.iter().map(|e| (local(e.u), local(e.v))).collect();

    // label assignments grouped by match pattern
    let mut patterns: HashMap<u64, u64> = HashMap::new();
    let mut labels = vec![0u32; touched.len()];
    let assignments = u64::from(ell).pow(touched.len() as u32);
    loop {
        let mut bits = 0u64;
        for (k, &(a, b)) in ends.iter().enumerate() {
            if labels[a] == labels[b] {
                bits |= 1 << k;
            }
        }
        *patterns.entry(bits).or_insert(0) += 1;
        let mut p = 0;
        while p < labels.len() {
            labels[p] += 1;
            if labels[p] < ell {
                break;
            }
            labels[p] = 0;
            p += 1;
        }
        if p == labels.len() {
            break;
        }
    }

    let mut values: Vec<f64> = ud.support().iter().chain(vd.support()).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let atoms = |d: &Discrete| -> Vec<(u16, W)> {
        d.support()
            .iter()
            .zip(d.probs())
            .map(|(x, p)| (values.iter().position(|v| v == x).unwrap() as u16, W::from_prob(p)))
            .collect()
    };
    let (u_atoms, v_atoms) = (atoms(ud), atoms(vd));

    let mut sorted: Vec<(u64, u64)> = patterns.into_iter().collect();
    sorted.sort_unstable();
    let mut table: BTreeMap<Vec<u16>, W> = BTreeMap::new();
    let mut key = Vec::with_capacity(edges.len());
    for (bits, count) in sorted {
        let weight = W::from_prob(&BigRational::new(BigInt::from(count), BigInt::from(assignments)));
        let choices: Vec<&[(u16, W)]> = (0..edges.len())
            .map(|k| if bits >> k & 1 == 1 { v_atoms.as_slice() } else { u_atoms.as_slice() })
            .collect();
        expand(&choices, 0, weight, &mut key, &mut table);
    }
    Ok(JointLaw {
        edges: subset.to_vec(),
        values,
        table,
    })
}

fn expand<W: Weight>(
    choices: &[&[(u16, W)]],
    depth: usize,
    weight: W,
    key: &mut Vec<u16>,
    table: &mut BTreeMap<Vec<u16>, W>,
) {
    if depth == choices.len() {
        let slot = table.entry(key.clone()).or_insert_with(W::zero);
        *slot = slot.add(&weight);
        return;
    }
    for (value, p) in choices[depth] {
        key.push(*value);
        expand(choices, depth + 1, weight.mul(p), key, table);
        key.pop();
    }
}

/// Exact joint law of all summands of a row on `g`.
pub fn exact_row_law(g: &Graph, ell: u32, u: &Distribution, v: &Distribution) -> Result<JointLaw<Prob>, ExactError> {
    let states = enumeration_states(g.vertices().len(), g.num_edges(), ell, u, v)?;
    if states > ENUMERATION_BUDGET {
        return Err(ExactError::BudgetExceeded {
            states,
            budget: ENUMERATION_BUDGET,
        });
    }
    let ids: Vec<EdgeId> = g.edges().iter().map(|e| e.id).collect();
    subset_law(g, ell, u, v, &ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{make_discrete, prob};
    use crate::graph::complete_bipartite;
    use num_traits::One;

    fn delta(x: f64) -> Distribution {
        Distribution::point_mass(x)
    }

    #[test]
    fn single_edge_bernoulli() {
        let g = complete_bipartite(1);
        let law = exact_row_law(&g, 2, &delta(0.0), &delta(1.0)).unwrap();
        assert_eq!(law.prob(&[0.0]), prob(1, 2));
        assert_eq!(law.prob(&[1.0]), prob(1, 2));
    }

    #[test]
    fn single_edge_is_the_mixture() {
        let u = make_discrete(&[0.0, 1.0, 2.0], &[0.5, 0.25, 0.25]).unwrap();
        let v = make_discrete(&[1.0, 5.0], &[0.4, 0.6]).unwrap();
        for ell in 2..=4u32 {
            let g = complete_bipartite(1);
            let law = exact_row_law(&g, ell, &u, &v).unwrap();
            let t = prob(1, i64::from(ell));
            for &x in &[0.0, 1.0, 2.0, 5.0] {
                let expected = (Prob::one() - &t) * u.as_discrete().unwrap().mass_at(x)
                    + &t * v.as_discrete().unwrap().mass_at(x);
                assert_eq!(law.prob(&[x]), expected);
            }
        }
    }

    /// Independent oracle: all 16 label assignments of K_{2,2}, ell = 2,
    /// with X_k = D_k.
    fn brute_k22() -> HashMap<[u8; 4], u32> {
        let g = complete_bipartite(2);
        let mut counts = HashMap::new();
        for mask in 0u32..16 {
            let label = |v: u64| (mask >> v) & 1;
            let mut key = [0u8; 4];
            for (k, e) in g.edges().iter().enumerate() {
                key[k] = u8::from(label(e.u) == label(e.v));
            }
            *counts.entry(key).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn k22_full_law_matches_brute_force() {
        let g = complete_bipartite(2);
        let law = exact_row_law(&g, 2, &delta(0.0), &delta(1.0)).unwrap();
        let brute = brute_k22();
        for (key, count) in &brute {
            let xs: Vec<f64> = key.iter().map(|&b| f64::from(b)).collect();
            assert_eq!(law.prob(&xs), prob(i64::from(*count), 16));
        }
        assert_eq!(law.table.len(), brute.len());
        assert_eq!(law.total(), Prob::one());
    }

    #[test]
    fn k22_gap_is_one_sixteenth() {
        // from the brute-force table: all-match has 2/16 vs 1/16 product,
        // any single mismatch has 0 vs 1/16
        let brute = brute_k22();
        assert_eq!(brute[&[1, 1, 1, 1]], 2);
        assert!(!brute.contains_key(&[0, 1, 1, 1]));
        let g = complete_bipartite(2);
        let law = exact_row_law(&g, 2, &delta(0.0), &delta(1.0)).unwrap();
        assert_eq!(law.factorization_gap(), prob(1, 16));
    }

    #[test]
    fn triples_factorize_exactly() {
        let g = complete_bipartite(2);
        let ids: Vec<EdgeId> = (0..4).collect();
        for skip in 0..4 {
            let subset: Vec<EdgeId> = ids.iter().copied().filter(|&i| i != skip).collect();
            let law: JointLaw<Prob> = subset_law(&g, 2, &delta(0.0), &delta(1.0), &subset).unwrap();
            assert!(law.factorization_gap().is_zero());
        }
    }

    #[test]
    fn float_and_exact_agree() {
        let g = complete_bipartite(2);
        let u = make_discrete(&[0.0, 1.0], &[0.6, 0.4]).unwrap();
        let v = delta(1.0);
        let exact = exact_row_law(&g, 2, &u, &v).unwrap();
        let ids: Vec<EdgeId> = (0..4).collect();
        let float: JointLaw<f64> = subset_law(&g, 2, &u, &v, &ids).unwrap();
        assert_eq!(exact.table.len(), float.table.len());
        for (k, p) in &exact.table {
            assert!((Weight::to_f64(p) - float.table[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = complete_bipartite(6);
        let u = make_discrete(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(matches!(
            exact_row_law(&g, 3, &u, &u),
            Err(ExactError::BudgetExceeded { .. })
        ));
        let normal = Distribution::parametric("normal", &[0.0, 1.0]).unwrap();
        assert_eq!(exact_row_law(&complete_bipartite(1), 2, &normal, &u), Err(ExactError::NotDiscrete));
    }
}

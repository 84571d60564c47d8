//! Graphs and nested graph sequences carrying the label construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = u64;
pub type EdgeId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("edge id {0} appears twice")]
    DuplicateEdgeId(EdgeId),
    #[error("edges {0} and {1} join the same pair of vertices")]
    DuplicateEndpoints(EdgeId, EdgeId),
    #[error("edge {edge} uses vertex {vertex}, which is not in the vertex set")]
    UnknownVertex { edge: EdgeId, vertex: VertexId },
    #[error("graph sequence is not nested: {0}")]
    NotNested(String),
    #[error("graph sequence is empty")]
    EmptySequence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub id: EdgeId,
    pub u: VertexId,
    pub v: VertexId,
}

impl Edge {
    fn key(&self) -> (VertexId, VertexId) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

/// Simple undirected graph with stable vertex and edge ids. Edges are kept
/// sorted by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    vertices: Vec<VertexId>,
    edges: Vec<(EdgeId, VertexId, VertexId)>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = GraphError;

    fn try_from(raw: GraphJson) -> Result<Self, GraphError> {
        Graph::new(
            raw.vertices,
            raw.edges.into_iter().map(|(id, u, v)| Edge { id, u, v }).collect(),
        )
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            vertices: g.vertices,
            edges: g.edges.into_iter().map(|e| (e.id, e.u, e.v)).collect(),
        }
    }
}

impl Graph {
    pub fn new(vertices: Vec<VertexId>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        let vertex_set: BTreeSet<VertexId> = vertices.into_iter().collect();
        edges.sort_by_key(|e| e.id);
        let mut pairs: HashMap<(VertexId, VertexId), EdgeId> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            if i > 0 && edges[i - 1].id == e.id {
                return Err(GraphError::DuplicateEdgeId(e.id));
            }
            if e.u == e.v {
                return Err(GraphError::SelfLoop(e.id));
            }
            for vertex in [e.u, e.v] {
                if !vertex_set.contains(&vertex) {
                    return Err(GraphError::UnknownVertex { edge: e.id, vertex });
                }
            }
            if let Some(other) = pairs.insert(e.key(), e.id) {
                return Err(GraphError::DuplicateEndpoints(other, e.id));
            }
        }
        Ok(Graph {
            vertices: vertex_set.into_iter().collect(),
            edges,
        })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Subgraph on the given edge ids, with only the vertices they touch.
    pub fn edge_subgraph(&self, ids: &[EdgeId]) -> Graph {
        let edges: Vec<Edge> = ids.iter().filter_map(|&id| self.edge(id).copied()).collect();
        let vertices = edges.iter().flat_map(|e| [e.u, e.v]).collect();
        Graph::new(vertices, edges).expect("subgraph of a valid graph")
    }
}

/// Vertex ids of `K_{m,m}`: left vertex `i` is `2i`, right vertex `j` is `2j + 1`.
pub fn bipartite_vertex(side: usize, index: usize) -> VertexId {
    (2 * index + side) as VertexId
}

/// Edge id of the left-`i`/right-`j` edge, numbered shell by shell so that
/// the edges of `K_{m,m}` are exactly ids `0..m^2`.
pub fn bipartite_edge_id(i: usize, j: usize) -> EdgeId {
    let s = i.max(j);
    let id = if i == s { s * s + j } else { s * s + s + 1 + i };
    id as EdgeId
}

/// `K_{m,m}` with nested ids: `K_{m,m}` is an induced subgraph of `K_{m+1,m+1}`.
pub fn complete_bipartite(m: usize) -> Graph {
    assert!(m >= 1, "complete_bipartite needs m >= 1");
    let vertices = (0..m).flat_map(|i| [bipartite_vertex(0, i), bipartite_vertex(1, i)]).collect();
    let mut edges = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            edges.push(Edge {
                id: bipartite_edge_id(i, j),
                u: bipartite_vertex(0, i),
                v: bipartite_vertex(1, j),
            });
        }
    }
    Graph::new(vertices, edges).expect("K_{m,m} is simple")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Girth {
    Finite(usize),
    Infinite,
}

impl Girth {
    pub fn at_least(self, k: usize) -> bool {
        match self {
            Girth::Finite(g) => g >= k,
            Girth::Infinite => true,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => write!(f, "inf"),
        }
    }
}

/// Shortest cycle length by breadth-first search from every vertex, O(V E).
pub fn girth(g: &Graph) -> Girth {
    let index: HashMap<VertexId, usize> = g.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = g.vertices.len();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        let (a, b) = (index[&e.u], index[&e.v]);
        adj[a].push((b, e.id));
        adj[b].push((a, e.id));
    }
    let mut best = usize::MAX;
    let mut dist = vec![usize::MAX; n];
    let mut via = vec![EdgeId::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[root] = 0;
        via[root] = EdgeId::MAX;
        queue.clear();
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            // any cycle closed from here has length at least 2 * dist[x]
            if 2 * dist[x] >= best {
                break;
            }
            for &(y, edge) in &adj[x] {
                if edge == via[x] {
                    continue;
                }
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    via[y] = edge;
                    queue.push_back(y);
                } else {
                    best = best.min(dist[x] + dist[y] + 1);
                }
            }
        }
    }
    if best == usize::MAX {
        Girth::Infinite
    } else {
        Girth::Finite(best)
    }
}

/// A sequence of graphs `G_1, G_2, ...` with consistent edge endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Graph>", into = "Vec<Graph>")]
pub struct GraphSeq {
    graphs: Vec<Graph>,
}

impl TryFrom<Vec<Graph>> for GraphSeq {
    type Error = GraphError;

    fn try_from(graphs: Vec<Graph>) -> Result<Self, GraphError> {
        GraphSeq::new(graphs)
    }
}

impl From<GraphSeq> for Vec<Graph> {
    fn from(gs: GraphSeq) -> Self {
        gs.graphs
    }
}

impl GraphSeq {
    pub fn new(graphs: Vec<Graph>) -> Result<Self, GraphError> {
        if graphs.is_empty() {
            return Err(GraphError::EmptySequence);
        }
        Ok(GraphSeq { graphs })
    }

    /// `K_{m,m}` for `m` in `m_min..=m_max`.
    pub fn complete_bipartite(m_min: usize, m_max: usize) -> Self {
        assert!(1 <= m_min && m_min <= m_max, "need 1 <= m_min <= m_max");
        GraphSeq {
            graphs: (m_min..=m_max).map(complete_bipartite).collect(),
        }
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Edge counts `n_m`.
    pub fn edge_counts(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::num_edges).collect()
    }

    /// Union of all edges, or the first edge id whose endpoints disagree
    /// between two graphs.
    pub fn edge_union(&self) -> Result<BTreeMap<EdgeId, Edge>, EdgeId> {
        let mut all: BTreeMap<EdgeId, Edge> = BTreeMap::new();
        for g in &self.graphs {
            for e in &g.edges {
                match all.get(&e.id) {
                    Some(prev) if prev.key() != e.key() => return Err(e.id),
                    Some(_) => {}
                    None => {
                        all.insert(e.id, *e);
                    }
                }
            }
        }
        Ok(all)
    }

    pub fn vertex_union(&self) -> BTreeSet<VertexId> {
        self.graphs.iter().flat_map(|g| g.vertices.iter().copied()).collect()
    }

    /// First nestedness violation, if any.
    pub fn nesting_violation(&self) -> Option<String> {
        for (m, pair) in self.graphs.windows(2).enumerate() {
            let (small, big) = (&pair[0], &pair[1]);
            if let Some(v) = small.vertices.iter().find(|v| !big.contains_vertex(**v)) {
                return Some(format!("vertex {v} of G_{} missing from G_{}", m + 1, m + 2));
            }
            let induced: BTreeSet<EdgeId> = big
                .edges
                .iter()
                .filter(|e| small.contains_vertex(e.u) && small.contains_vertex(e.v))
                .map(|e| e.id)
                .collect();
            let own: BTreeSet<EdgeId> = small.edges.iter().map(|e| e.id).collect();
            if let Some(e) = own.difference(&induced).next() {
                return Some(format!("edge {e} of G_{} is not an edge of G_{} inside V(G_{})", m + 1, m + 2, m + 1));
            }
            if let Some(e) = induced.difference(&own).next() {
                return Some(format!("edge {e} of G_{} joins vertices of G_{} but is not in G_{}", m + 2, m + 1, m + 1));
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioTrend {
    TendsToOne,
    NotTendingToOne,
    Unverifiable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tuple_size: usize,
    pub endpoint_consistent: bool,
    pub nested: bool,
    pub girths: Vec<Girth>,
    pub girth_ok: bool,
    pub edge_counts: Vec<usize>,
    pub ratios: Vec<f64>,
    pub ratio_trend: RatioTrend,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.endpoint_consistent && self.nested && self.girth_ok
    }
}

/// Checks endpoint consistency, nestedness, girth `>= k + 1` and the
/// behaviour of the edge-count ratios `n_{m+1} / n_m`.
pub fn validate_sequence(gs: &GraphSeq, k: usize) -> ValidationReport {
    assert!(k >= 2, "tuple size must be at least 2");
    let mut failures = Vec::new();
    let endpoint_consistent = match gs.edge_union() {
        Ok(_) => true,
        Err(id) => {
            failures.push(format!("edge {id} changes endpoints between graphs"));
            false
        }
    };
    let nested = match gs.nesting_violation() {
        None => true,
        Some(msg) => {
            failures.push(msg);
            false
        }
    };
    let girths: Vec<Girth> = gs.graphs.iter().map(girth).collect();
    let girth_ok = girths.iter().all(|g| g.at_least(k + 1));
    for (m, g) in girths.iter().enumerate() {
        if !g.at_least(k + 1) {
            failures.push(format!("G_{} has girth {g} < {}", m + 1, k + 1));
        }
    }
    let edge_counts = gs.edge_counts();
    let ratios: Vec<f64> = edge_counts
        .windows(2)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect();
    let ratio_trend = ratio_trend(&ratios);
    ValidationReport {
        tuple_size: k,
        endpoint_consistent,
        nested,
        girths,
        girth_ok,
        edge_counts,
        ratios,
        ratio_trend,
        failures,
    }
}

/// Ratios must exceed one, decrease over the second half of the prefix, and
/// end closer to one than they started.
pub fn ratio_trend(ratios: &[f64]) -> RatioTrend {
    if ratios.len() < 2 {
        return RatioTrend::Unverifiable;
    }
    let increasing = ratios.iter().all(|&r| r > 1.0);
    let tail = &ratios[ratios.len() / 2..];
    let settling = tail.windows(2).all(|w| w[1] <= w[0]);
    let closer = ratios[ratios.len() - 1] - 1.0 < ratios[0] - 1.0;
    if increasing && settling && closer {
        RatioTrend::TendsToOne
    } else {
        RatioTrend::NotTendingToOne
    }
}

/// Canonical sequence arrangement: `E(G_1)` first, then each new layer
/// `E(G_{m+1}) \ E(G_m)`, ascending edge id within a layer.
pub fn edge_order(gs: &GraphSeq) -> Result<Vec<Edge>, GraphError> {
    if let Err(id) = gs.edge_union() {
        return Err(GraphError::NotNested(format!("edge {id} changes endpoints")));
    }
    if let Some(msg) = gs.nesting_violation() {
        return Err(GraphError::NotNested(msg));
    }
    let mut order: Vec<Edge> = Vec::new();
    let mut seen: BTreeSet<EdgeId> = BTreeSet::new();
    for g in &gs.graphs {
        for e in &g.edges {
            if seen.insert(e.id) {
                order.push(*e);
            }
        }
    }
    Ok(order)
}

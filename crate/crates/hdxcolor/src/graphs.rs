//! Simple graphs, list-coloring instances and residual instances.
//!
//! Elements of an instance are vertices (vertex kind) or edges (edge kind).
//! Edges get dense ids in lexicographic order of `(min endpoint, max endpoint)`,
//! so element `i` of an edge instance is `graph.edges()[i]`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("parallel edge {0}-{1}")]
    ParallelEdge(usize, usize),
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("{0}-{1} is not an edge")]
    UnknownEdge(usize, usize),
    #[error("expected {expected} lists, got {got}")]
    ListCount { expected: usize, got: usize },
    #[error("list of element {0} is empty")]
    EmptyList(usize),
    #[error("element {element} uses color 0; colors start at 1")]
    ZeroColor { element: usize },
    #[error("element {0} out of range")]
    ElementOutOfRange(usize),
    #[error("color {color} is not in the list of element {element}")]
    ColorNotInList { element: usize, color: u32 },
    #[error("adjacent elements {a} and {b} both have color {color}")]
    Improper { a: usize, b: usize, color: u32 },
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Vertex or edge coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Vertex,
    Edge,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Vertex => write!(f, "vertex"),
            Kind::Edge => write!(f, "edge"),
        }
    }
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut list = Vec::with_capacity(edges.len());
        for (u, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            for w in nbrs.windows(2) {
                if w[0] == w[1] {
                    return Err(GraphError::ParallelEdge(u.min(w[0]), u.max(w[0])));
                }
            }
            list.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        Ok(Graph {
            adjacency,
            edges: list,
        })
    }

    pub fn path(n: usize) -> Self {
        let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &e).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Self {
        let mut e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n >= 3 {
            e.push((0, n - 1));
        }
        Self::from_edges(n, &e).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Self {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v));
            }
        }
        Self::from_edges(n, &e).expect("complete graph is simple")
    }

    /// Star K_{1,k} with center 0.
    pub fn star(k: usize) -> Self {
        let e: Vec<_> = (1..=k).map(|i| (0, i)).collect();
        Self::from_edges(k + 1, &e).expect("star is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.vertex_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, lexicographically sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    /// Connected components of the subgraph induced on `active` vertices,
    /// each sorted, ordered by smallest member.
    pub fn components_within(&self, active: &[bool]) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if !active[s] || seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &w in &self.adjacency[u] {
                    if active[w] && !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components_within(&vec![true; self.vertex_count()])
            .len()
            <= 1
    }

    pub fn is_tree(&self) -> bool {
        self.vertex_count() > 0
            && self.edge_count() + 1 == self.vertex_count()
            && self.is_connected()
    }
}

/// Line graph: one vertex per edge of `g` (in edge-id order), adjacent iff the
/// edges share an endpoint.
pub fn line_graph(g: &Graph) -> Graph {
    let mut e = Vec::new();
    for v in 0..g.vertex_count() {
        let inc: Vec<usize> = g
            .neighbors(v)
            .iter()
            .map(|&w| g.edge_id(v, w).expect("neighbor edge exists"))
            .collect();
        for i in 0..inc.len() {
            for j in i + 1..inc.len() {
                e.push((inc[i].min(inc[j]), inc[i].max(inc[j])));
            }
        }
    }
    // two distinct edges of a simple graph share at most one endpoint
    Graph::from_edges(g.edge_count(), &e).expect("line graph is simple")
}

/// Δ(u) + Δ(v) − 2 for the edge {u, v}.
pub fn edge_degree(g: &Graph, e: (usize, usize)) -> Result<usize> {
    if !g.has_edge(e.0, e.1) {
        return Err(GraphError::UnknownEdge(e.0, e.1));
    }
    Ok(g.degree(e.0) + g.degree(e.1) - 2)
}

/// Partial coloring: element id to color.
pub type PartialColoring = BTreeMap<usize, u32>;

/// Graph plus a list of admissible colors per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ListColoringInstance {
    kind: Kind,
    graph: Graph,
    lists: Vec<Vec<u32>>,
    conflict: Graph,
}

impl ListColoringInstance {
    pub fn new(kind: Kind, graph: Graph, mut lists: Vec<Vec<u32>>) -> Result<Self> {
        let expected = match kind {
            Kind::Vertex => graph.vertex_count(),
            Kind::Edge => graph.edge_count(),
        };
        if lists.len() != expected {
            return Err(GraphError::ListCount {
                expected,
                got: lists.len(),
            });
        }
        for (x, l) in lists.iter_mut().enumerate() {
            l.sort_unstable();
            l.dedup();
            if l.is_empty() {
                return Err(GraphError::EmptyList(x));
            }
            if l[0] == 0 {
                return Err(GraphError::ZeroColor { element: x });
            }
        }
        let conflict = match kind {
            Kind::Vertex => graph.clone(),
            Kind::Edge => line_graph(&graph),
        };
        Ok(ListColoringInstance {
            kind,
            graph,
            lists,
            conflict,
        })
    }

    /// Every list equal to `1..=q`.
    pub fn uniform(kind: Kind, graph: Graph, q: u32) -> Result<Self> {
        let count = match kind {
            Kind::Vertex => graph.vertex_count(),
            Kind::Edge => graph.edge_count(),
        };
        Self::new(kind, graph, vec![(1..=q).collect(); count])
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    pub fn list(&self, x: usize) -> &[u32] {
        &self.lists[x]
    }

    pub fn element_count(&self) -> usize {
        self.lists.len()
    }

    /// Palette size q: the largest color in any list.
    pub fn palette_size(&self) -> u32 {
        self.lists
            .iter()
            .filter_map(|l| l.last().copied())
            .max()
            .unwrap_or(0)
    }

    /// Graph on elements whose edges are the coloring constraints
    /// (the graph itself, or its line graph).
    pub fn conflict_graph(&self) -> &Graph {
        &self.conflict
    }

    /// Δ(v) for vertices, Δ(e) for edges.
    pub fn element_degree(&self, x: usize) -> usize {
        self.conflict.degree(x)
    }

    /// Endpoints of element `x` of an edge instance.
    pub fn endpoints(&self, x: usize) -> (usize, usize) {
        self.graph.edges()[x]
    }

    /// |L(x)| ≥ β + Δ(x) for every element, compared exactly.
    pub fn is_beta_extra(&self, beta: Rational64) -> bool {
        (0..self.element_count()).all(|x| {
            Rational64::from_integer(self.lists[x].len() as i64)
                >= beta + Rational64::from_integer(self.element_degree(x) as i64)
        })
    }

    /// Checks that `tau` is a proper partial coloring using list colors.
    pub fn check_partial(&self, tau: &PartialColoring) -> Result<()> {
        for (&x, &c) in tau {
            if x >= self.element_count() {
                return Err(GraphError::ElementOutOfRange(x));
            }
            if self.lists[x].binary_search(&c).is_err() {
                return Err(GraphError::ColorNotInList {
                    element: x,
                    color: c,
                });
            }
            for &y in self.conflict.neighbors(x) {
                if y > x && tau.get(&y) == Some(&c) {
                    return Err(GraphError::Improper {
                        a: x,
                        b: y,
                        color: c,
                    });
                }
            }
        }
        Ok(())
    }

    /// Colors of `L(x)` not used by colored neighbors of `x` under `tau`.
    pub fn available(&self, x: usize, tau: &PartialColoring) -> Vec<u32> {
        let used: Vec<u32> = self
            .conflict
            .neighbors(x)
            .iter()
            .filter_map(|y| tau.get(y).copied())
            .collect();
        self.lists[x]
            .iter()
            .copied()
            .filter(|c| !used.contains(c))
            .collect()
    }
}

/// Instance left after fixing a partial coloring τ.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualInstance {
    pub base: ListColoringInstance,
    pub fixed: PartialColoring,
    /// G_τ. Vertex kind: edges among uncolored vertices (colored vertices stay
    /// as isolated ids and are not part of V_τ). Edge kind: (V, E_τ).
    pub residual_graph: Graph,
    /// L_τ for every uncolored element.
    pub residual_lists: BTreeMap<usize, Vec<u32>>,
}

pub fn residual(inst: &ListColoringInstance, tau: &PartialColoring) -> Result<ResidualInstance> {
    inst.check_partial(tau)?;
    let g = inst.graph();
    let residual_graph = match inst.kind() {
        Kind::Vertex => {
            let e: Vec<_> = g
                .edges()
                .iter()
                .copied()
                .filter(|(u, v)| !tau.contains_key(u) && !tau.contains_key(v))
                .collect();
            Graph::from_edges(g.vertex_count(), &e)?
        }
        Kind::Edge => {
            let e: Vec<_> = g
                .edges()
                .iter()
                .enumerate()
                .filter(|(i, _)| !tau.contains_key(i))
                .map(|(_, &e)| e)
                .collect();
            Graph::from_edges(g.vertex_count(), &e)?
        }
    };
    let residual_lists = (0..inst.element_count())
        .filter(|x| !tau.contains_key(x))
        .map(|x| (x, inst.available(x, tau)))
        .collect();
    Ok(ResidualInstance {
        base: inst.clone(),
        fixed: tau.clone(),
        residual_graph,
        residual_lists,
    })
}

impl ResidualInstance {
    pub fn uncolored(&self) -> Vec<usize> {
        self.residual_lists.keys().copied().collect()
    }

    /// Number of uncolored conflict neighbors: Δ_τ(v), or Δ_τ(e) for edges.
    pub fn residual_degree(&self, x: usize) -> usize {
        self.base
            .conflict_graph()
            .neighbors(x)
            .iter()
            .filter(|y| !self.fixed.contains_key(y))
            .count()
    }

    /// The residual as a plain instance on the same element ids: fixed
    /// elements get the singleton list of their color.
    pub fn as_instance(&self) -> Result<ListColoringInstance> {
        let lists = (0..self.base.element_count())
            .map(|x| match self.fixed.get(&x) {
                Some(&c) => vec![c],
                None => self.residual_lists[&x].clone(),
            })
            .collect();
        ListColoringInstance::new(self.base.kind(), self.base.graph().clone(), lists)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lists(v: &[&[u32]]) -> Vec<Vec<u32>> {
        v.iter().map(|l| l.to_vec()).collect()
    }

    #[test]
    fn line_graphs() {
        assert_eq!(line_graph(&Graph::complete(3)), Graph::complete(3));
        assert_eq!(line_graph(&Graph::path(3)), Graph::path(2));
        assert_eq!(line_graph(&Graph::star(3)), Graph::complete(3));
    }

    #[test]
    fn edge_degrees() {
        let k3 = Graph::complete(3);
        assert_eq!(edge_degree(&k3, (0, 1)).unwrap(), 2);
        assert_eq!(edge_degree(&Graph::path(3), (1, 2)).unwrap(), 1);
        let k4 = Graph::complete(4);
        for &e in k4.edges() {
            assert_eq!(edge_degree(&k4, e).unwrap(), 4);
        }
        assert_eq!(
            edge_degree(&Graph::path(3), (0, 2)),
            Err(GraphError::UnknownEdge(0, 2))
        );
    }

    #[test]
    fn rejects_non_simple() {
        assert!(matches!(
            Graph::from_edges(2, &[(0, 0)]),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            Graph::from_edges(2, &[(0, 1), (1, 0)]),
            Err(GraphError::ParallelEdge(0, 1))
        ));
        assert!(matches!(
            Graph::from_edges(2, &[(0, 2)]),
            Err(GraphError::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn beta_extra() {
        let p2 = ListColoringInstance::uniform(Kind::Vertex, Graph::path(2), 3).unwrap();
        assert!(p2.is_beta_extra(Rational64::from_integer(2)));
        let k3 = ListColoringInstance::uniform(Kind::Vertex, Graph::complete(3), 3).unwrap();
        assert!(!k3.is_beta_extra(Rational64::from_integer(2)));
        let star = ListColoringInstance::uniform(Kind::Edge, Graph::star(2), 3).unwrap();
        assert!(star.is_beta_extra(Rational64::from_integer(2)));
        assert!(!p2.is_beta_extra(Rational64::new(5, 2)));
        assert!(p2.is_beta_extra(Rational64::new(4, 2)));
    }

    #[test]
    fn residual_examples() {
        let k3 = ListColoringInstance::uniform(Kind::Vertex, Graph::complete(3), 3).unwrap();
        let tau: PartialColoring = [(0, 1)].into_iter().collect();
        let r = residual(&k3, &tau).unwrap();
        assert_eq!(r.residual_lists[&1], vec![2, 3]);
        assert_eq!(r.residual_lists[&2], vec![2, 3]);
        assert_eq!(r.residual_graph.edges(), &[(1, 2)]);

        let r0 = residual(&k3, &PartialColoring::new()).unwrap();
        assert_eq!(&r0.residual_graph, k3.graph());
        assert_eq!(r0.as_instance().unwrap(), k3);

        let p3 = ListColoringInstance::uniform(Kind::Vertex, Graph::path(3), 2).unwrap();
        let r = residual(&p3, &[(1, 1)].into_iter().collect()).unwrap();
        assert_eq!(r.residual_lists[&0], vec![2]);
        assert_eq!(r.residual_lists[&2], vec![2]);
        assert_eq!(r.residual_graph.edge_count(), 0);
    }

    #[test]
    fn residual_errors() {
        let p2 =
            ListColoringInstance::new(Kind::Vertex, Graph::path(2), lists(&[&[1, 2], &[1, 2]]))
                .unwrap();
        let bad: PartialColoring = [(0, 1), (1, 1)].into_iter().collect();
        assert!(matches!(
            residual(&p2, &bad),
            Err(GraphError::Improper { .. })
        ));
        let out: PartialColoring = [(0, 3)].into_iter().collect();
        assert!(matches!(
            residual(&p2, &out),
            Err(GraphError::ColorNotInList { .. })
        ));
    }

    #[test]
    fn edge_residual_keeps_vertices() {
        let star = ListColoringInstance::uniform(Kind::Edge, Graph::star(3), 4).unwrap();
        let r = residual(&star, &[(0, 2)].into_iter().collect()).unwrap();
        assert_eq!(r.residual_graph.vertex_count(), 4);
        assert_eq!(r.residual_graph.edges(), &[(0, 2), (0, 3)]);
        assert_eq!(r.residual_lists[&1], vec![1, 3, 4]);
        assert_eq!(r.residual_degree(1), 1);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..8).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let mut e = Vec::new();
                let mut i = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        if bits[i] {
                            e.push((u, v));
                        }
                        i += 1;
                    }
                }
                Graph::from_edges(n, &e).unwrap()
            })
        })
    }

    /// Random instance plus a random proper partial coloring split in two.
    fn arb_split() -> impl Strategy<Value = (ListColoringInstance, PartialColoring, PartialColoring)>
    {
        (arb_graph(), any::<bool>(), any::<u64>()).prop_map(|(g, edge, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let kind = if edge && g.edge_count() > 0 {
                Kind::Edge
            } else {
                Kind::Vertex
            };
            let count = if kind == Kind::Edge {
                g.edge_count()
            } else {
                g.vertex_count()
            };
            let lists = (0..count)
                .map(|_| {
                    let mut l: Vec<u32> = (1..=6).filter(|_| rng.gen_bool(0.6)).collect();
                    if l.is_empty() {
                        l.push(rng.gen_range(1..=6));
                    }
                    l
                })
                .collect();
            let inst = ListColoringInstance::new(kind, g, lists).unwrap();
            let (mut t1, mut t2) = (PartialColoring::new(), PartialColoring::new());
            let mut all = PartialColoring::new();
            for x in 0..count {
                if rng.gen_bool(0.5) {
                    let avail = inst.available(x, &all);
                    if !avail.is_empty() {
                        let c = avail[rng.gen_range(0..avail.len())];
                        all.insert(x, c);
                        if rng.gen_bool(0.5) {
                            t1.insert(x, c);
                        } else {
                            t2.insert(x, c);
                        }
                    }
                }
            }
            (inst, t1, t2)
        })
    }

    proptest! {
        #[test]
        fn line_graph_degree_identity(g in arb_graph()) {
            let l = line_graph(&g);
            for (i, &e) in g.edges().iter().enumerate() {
                prop_assert_eq!(l.degree(i), edge_degree(&g, e).unwrap());
            }
        }

        #[test]
        fn residual_monotone((inst, t1, t2) in arb_split()) {
            let mut tau = t1.clone();
            tau.extend(t2);
            let r = residual(&inst, &tau).unwrap();
            for (&x, l) in &r.residual_lists {
                prop_assert!(l.iter().all(|c| inst.list(x).contains(c)));
                let fixed_nbrs = inst.conflict_graph().neighbors(x).iter().filter(|y| tau.contains_key(y)).count();
                prop_assert!(inst.list(x).len() - l.len() <= fixed_nbrs);
            }
        }

        #[test]
        fn residual_composition((inst, t1, t2) in arb_split()) {
            let mut both = t1.clone();
            both.extend(t2.clone());
            let direct = residual(&inst, &both).unwrap();
            let step = residual(&inst, &t1).unwrap();
            // an uncolored element may run out of colors; as_instance needs nonempty lists
            prop_assume!(step.residual_lists.values().all(|l| !l.is_empty()));
            let twice = residual(&step.as_instance().unwrap(), &t2).unwrap();
            for (x, l) in &direct.residual_lists {
                prop_assert_eq!(l, &twice.residual_lists[x]);
            }
            for x in t1.keys() {
                prop_assert!(!direct.residual_lists.contains_key(x));
            }
        }
    }
}

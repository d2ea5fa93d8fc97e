//! Finite simple graphs with paired directed edges.
//!
//! Each undirected edge `{a, b}` is stored as two directed edges `a → b` and
//! `b → a` that point at each other through `twin`. Directed edge `2k` and
//! `2k + 1` always form a pair.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{int, PolyMatrix, TPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {0}) is a loop; graphs must be simple")]
    LoopEdge(usize),
    #[error("edge ({0}, {1}) appears more than once; graphs must be simple")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected (vertex {0} unreachable from vertex 0)")]
    Disconnected(usize),
    #[error("graph has no vertices or no edges")]
    EmptyGraph,
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    InvalidVertex(usize, usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot read graph: {0}")]
    Io(String),
    #[error("malformed graph file: {0}")]
    Format(String),
}

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DirectedEdge {
    pub id: EdgeId,
    pub origin: VertexId,
    pub terminus: VertexId,
    pub twin: EdgeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    name: String,
    vertex_count: usize,
    edges: Vec<DirectedEdge>,
    out_edges: Vec<Vec<EdgeId>>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Reject disconnected graphs and graphs without edges.
    pub check_connected: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            check_connected: true,
        }
    }
}

/// Builds a connected simple graph from an undirected edge list.
pub fn build_graph(
    vertex_count: usize,
    undirected_edges: &[(VertexId, VertexId)],
) -> Result<Graph, GraphError> {
    Graph::with_options(vertex_count, undirected_edges, BuildOptions::default())
}

impl Graph {
    pub fn with_options(
        vertex_count: usize,
        undirected_edges: &[(VertexId, VertexId)],
        options: BuildOptions,
    ) -> Result<Graph, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(2 * undirected_edges.len());
        let mut out_edges = vec![Vec::new(); vertex_count];
        for &(a, b) in undirected_edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(GraphError::InvalidVertex(a, b, vertex_count));
            }
            if a == b {
                return Err(GraphError::LoopEdge(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            let id = edges.len();
            edges.push(DirectedEdge {
                id,
                origin: a,
                terminus: b,
                twin: id + 1,
            });
            edges.push(DirectedEdge {
                id: id + 1,
                origin: b,
                terminus: a,
                twin: id,
            });
            out_edges[a].push(id);
            out_edges[b].push(id + 1);
        }
        let g = Graph {
            name: format!("graph(n={vertex_count}, m={})", undirected_edges.len()),
            vertex_count,
            edges,
            out_edges,
        };
        if options.check_connected {
            if g.edges.is_empty() {
                return Err(GraphError::EmptyGraph);
            }
            let dist = g.distances_from(0);
            if let Some(v) = dist.iter().position(Option::is_none) {
                return Err(GraphError::Disconnected(v));
            }
        }
        Ok(g)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn directed_edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &DirectedEdge {
        &self.edges[id]
    }

    /// `E_x`: directed edges with origin `x`.
    pub fn out_edges(&self, x: VertexId) -> &[EdgeId] {
        &self.out_edges[x]
    }

    pub fn degree(&self, x: VertexId) -> usize {
        self.out_edges[x].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.vertex_count).map(|x| self.degree(x)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.out_edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Returns `q` when the graph is `(q+1)`-regular.
    pub fn regular_q(&self) -> Option<usize> {
        let d = self.degree(0);
        (d >= 1 && (0..self.vertex_count).all(|x| self.degree(x) == d)).then(|| d - 1)
    }

    pub fn neighbors(&self, x: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.out_edges[x].iter().map(|&e| self.edges[e].terminus)
    }

    /// One entry per undirected edge, as `(origin, terminus)` of the even member.
    pub fn undirected_edges(&self) -> Vec<(VertexId, VertexId)> {
        self.edges
            .iter()
            .step_by(2)
            .map(|e| (e.origin, e.terminus))
            .collect()
    }

    /// BFS distances; `None` for unreachable vertices.
    pub fn distances_from(&self, x0: VertexId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count];
        dist[x0] = Some(0);
        let mut queue = VecDeque::from([x0]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap();
            for y in self.neighbors(x) {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Length of a shortest cycle, or `None` for forests.
    pub fn girth(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for root in 0..self.vertex_count {
            let mut dist = vec![usize::MAX; self.vertex_count];
            let mut parent = vec![usize::MAX; self.vertex_count];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for y in self.neighbors(x) {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        parent[y] = x;
                        queue.push_back(y);
                    } else if parent[x] != y {
                        let len = dist[x] + dist[y] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    /// Induced subgraph on vertices within distance `r` of `x0`. Vertex `i`
    /// of the result corresponds to `map[i]` in `self`; `x0` maps to 0.
    pub fn ball(&self, x0: VertexId, r: usize) -> (Graph, Vec<VertexId>) {
        let dist = self.distances_from(x0);
        let mut map: Vec<VertexId> = (0..self.vertex_count)
            .filter(|&v| dist[v].is_some_and(|d| d <= r))
            .collect();
        map.sort_by_key(|&v| (dist[v], v));
        let mut inverse = vec![usize::MAX; self.vertex_count];
        for (i, &v) in map.iter().enumerate() {
            inverse[v] = i;
        }
        let edges: Vec<_> = self
            .undirected_edges()
            .into_iter()
            .filter(|&(a, b)| inverse[a] != usize::MAX && inverse[b] != usize::MAX)
            .map(|(a, b)| (inverse[a], inverse[b]))
            .collect();
        let g = Graph::with_options(
            map.len(),
            &edges,
            BuildOptions {
                check_connected: false,
            },
        )
        .expect("induced subgraph of a simple graph is simple")
        .named(format!("ball({}, {x0}, {r})", self.name));
        (g, map)
    }

    pub fn operators(&self) -> Operators {
        let n = self.vertex_count;
        let mut adjacency = PolyMatrix::zeros(n, n);
        for e in &self.edges {
            adjacency.set(e.origin, e.terminus, TPoly::one());
        }
        let valency = PolyMatrix::diagonal(
            self.degrees()
                .into_iter()
                .map(|d| TPoly::constant(int(d as i64)))
                .collect(),
        );
        let laplacian = &valency - &adjacency;
        Operators {
            adjacency,
            valency,
            laplacian,
        }
    }

    pub fn adjacency_f64(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.vertex_count, self.vertex_count);
        for e in &self.edges {
            a[(e.origin, e.terminus)] = 1.0;
        }
        a
    }

    pub fn laplacian_f64(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency_f64();
        for x in 0..self.vertex_count {
            l[(x, x)] = self.degree(x) as f64;
        }
        l
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// `A_X`, `D_X` and `Δ_X = D_X − A_X` as constant-coefficient matrices.
#[derive(Clone, Debug)]
pub struct Operators {
    pub adjacency: PolyMatrix,
    pub valency: PolyMatrix,
    pub laplacian: PolyMatrix,
}

/// Named graph families used as a test corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Cycle(usize),
    Complete(usize),
    Hypercube(usize),
    Petersen,
    Path(usize),
    /// Star on `n` vertices: one center and `n - 1` leaves.
    Star(usize),
    /// Radius-`radius` ball around a vertex of the `(q+1)`-regular tree.
    TreeBall { q_plus_1: usize, radius: usize },
}

pub fn generate(family: Family) -> Result<Graph, GraphError> {
    let bad = |msg: &str| Err(GraphError::InvalidParameter(msg.to_string()));
    let (n, edges, name): (usize, Vec<(usize, usize)>, String) = match family {
        Family::Cycle(n) => {
            if n < 3 {
                return bad("cycle needs n >= 3");
            }
            (n, (0..n).map(|i| (i, (i + 1) % n)).collect(), format!("cycle({n})"))
        }
        Family::Complete(n) => {
            if n < 2 {
                return bad("complete graph needs n >= 2");
            }
            let edges = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect();
            (n, edges, format!("complete({n})"))
        }
        Family::Hypercube(d) => {
            if !(1..=16).contains(&d) {
                return bad("hypercube needs 1 <= d <= 16");
            }
            let n = 1usize << d;
            let edges = (0..n)
                .flat_map(|v| (0..d).map(move |b| (v, v ^ (1 << b))))
                .filter(|&(a, b)| a < b)
                .collect();
            (n, edges, format!("hypercube({d})"))
        }
        Family::Petersen => {
            let mut edges = Vec::new();
            for i in 0..5 {
                edges.push((i, (i + 1) % 5));
                edges.push((i, i + 5));
                edges.push((i + 5, (i + 2) % 5 + 5));
            }
            (10, edges, "petersen".to_string())
        }
        Family::Path(n) => {
            if n < 2 {
                return bad("path needs n >= 2");
            }
            (n, (0..n - 1).map(|i| (i, i + 1)).collect(), format!("path({n})"))
        }
        Family::Star(n) => {
            if n < 2 {
                return bad("star needs n >= 2");
            }
            (n, (1..n).map(|i| (0, i)).collect(), format!("star({n})"))
        }
        Family::TreeBall { q_plus_1, radius } => {
            if q_plus_1 < 1 || radius < 1 {
                return bad("tree ball needs q+1 >= 1 and radius >= 1");
            }
            let mut edges = Vec::new();
            let mut frontier = vec![0usize];
            let mut next_id = 1;
            for level in 0..radius {
                let children = if level == 0 { q_plus_1 } else { q_plus_1 - 1 };
                let mut next = Vec::new();
                for &p in &frontier {
                    for _ in 0..children {
                        edges.push((p, next_id));
                        next.push(next_id);
                        next_id += 1;
                    }
                }
                frontier = next;
            }
            if next_id < 2 {
                return bad("tree ball must have at least 2 vertices");
            }
            (next_id, edges, format!("tree_ball({q_plus_1}, {radius})"))
        }
    };
    Ok(build_graph(n, &edges)?.named(name))
}

#[derive(Deserialize)]
struct GraphJson {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

/// Parses either the JSON form `{"vertices": n, "edges": [[a, b], ...]}` or a
/// plain edge list with one `a b` pair per line and `#` comments.
pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    if text.trim_start().starts_with('{') {
        let parsed: GraphJson =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        return build_graph(parsed.vertices, &parsed.edges);
    }
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<_> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| GraphError::Format(format!("line {}: bad vertex {s:?}", lineno + 1)))
        };
        match fields.as_slice() {
            [a, b] => edges.push((parse(a)?, parse(b)?)),
            _ => {
                return Err(GraphError::Format(format!(
                    "line {}: expected two vertex ids",
                    lineno + 1
                )))
            }
        }
    }
    let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    build_graph(n, &edges)
}

pub fn load_graph(path: &Path) -> Result<Graph, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
    Ok(parse_graph(&text)?.named(path.display().to_string()))
}

/// The standard test corpus.
pub fn corpus() -> Vec<Graph> {
    [
        Family::Cycle(3),
        Family::Cycle(4),
        Family::Cycle(6),
        Family::Complete(4),
        Family::Star(4),
        Family::Path(4),
        Family::Hypercube(3),
        Family::Petersen,
        Family::TreeBall {
            q_plus_1: 3,
            radius: 3,
        },
    ]
    .into_iter()
    .map(|f| generate(f).expect("corpus family parameters are valid"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_k4_degrees() {
        let tri = build_graph(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(tri.degrees(), vec![2, 2, 2]);
        let k4 = generate(Family::Complete(4)).unwrap();
        assert_eq!(k4.degrees(), vec![3; 4]);
        assert_eq!(k4.regular_q(), Some(2));
    }

    #[test]
    fn construction_errors_name_the_axiom() {
        assert_eq!(
            build_graph(2, &[(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(build_graph(2, &[(1, 0), (0, 1)]), Err(GraphError::DuplicateEdge(0, 1)));
        assert_eq!(build_graph(2, &[(1, 1)]), Err(GraphError::LoopEdge(1)));
        assert_eq!(build_graph(4, &[(0, 1), (2, 3)]), Err(GraphError::Disconnected(2)));
        assert_eq!(build_graph(0, &[]), Err(GraphError::EmptyGraph));
        assert_eq!(build_graph(1, &[]), Err(GraphError::EmptyGraph));
        assert_eq!(build_graph(2, &[(0, 5)]), Err(GraphError::InvalidVertex(0, 5, 2)));
    }

    #[test]
    fn twin_involution_axioms() {
        for g in corpus() {
            for e in g.directed_edges() {
                let tw = g.edge(e.twin);
                assert_ne!(e.twin, e.id);
                assert_eq!(tw.twin, e.id);
                assert_eq!(e.origin, tw.terminus);
                assert_ne!(e.origin, e.terminus);
            }
            let deg_sum: usize = g.degrees().iter().sum();
            assert_eq!(deg_sum, g.directed_edges().len());
        }
    }

    #[test]
    fn family_sizes() {
        let c4 = generate(Family::Cycle(4)).unwrap();
        assert_eq!((c4.vertex_count(), c4.directed_edges().len()), (4, 8));
        assert_eq!(c4.regular_q(), Some(1));
        let tb = generate(Family::TreeBall { q_plus_1: 3, radius: 2 }).unwrap();
        assert_eq!(tb.vertex_count(), 10);
        let p3 = generate(Family::Path(3)).unwrap();
        assert_eq!(p3.degrees(), vec![1, 2, 1]);
        assert_eq!(generate(Family::Hypercube(3)).unwrap().regular_q(), Some(2));
        assert!(generate(Family::Cycle(2)).is_err());
        assert!(generate(Family::Star(1)).is_err());
    }

    #[test]
    fn petersen_is_cubic_with_girth_five() {
        let p = generate(Family::Petersen).unwrap();
        assert_eq!(p.vertex_count(), 10);
        assert_eq!(p.regular_q(), Some(2));
        assert_eq!(p.girth(), Some(5));
        assert_eq!(generate(Family::Complete(4)).unwrap().girth(), Some(3));
        assert_eq!(generate(Family::Path(5)).unwrap().girth(), None);
    }

    #[test]
    fn triangle_operators() {
        let tri = generate(Family::Cycle(3)).unwrap();
        let ops = tri.operators();
        for i in 0..3 {
            for j in 0..3 {
                let a = if i == j { 0 } else { 1 };
                assert_eq!(*ops.adjacency.get(i, j), TPoly::from_int(a));
                let l = if i == j { 2 } else { -1 };
                assert_eq!(*ops.laplacian.get(i, j), TPoly::from_int(l));
            }
        }
    }

    #[test]
    fn operators_are_consistent() {
        for g in corpus() {
            let ops = g.operators();
            assert_eq!(ops.adjacency, ops.adjacency.transpose());
            let n = g.vertex_count();
            for i in 0..n {
                let mut row = TPoly::zero();
                for j in 0..n {
                    row += ops.laplacian.get(i, j);
                }
                assert!(row.is_zero(), "{g}: Laplacian row {i} sums to {row}");
            }
        }
    }

    #[test]
    fn balls() {
        let p = generate(Family::Petersen).unwrap();
        let (b0, map) = p.ball(3, 0);
        assert_eq!((b0.vertex_count(), map), (1, vec![3]));
        let c10 = generate(Family::Cycle(10)).unwrap();
        let (b, map) = c10.ball(0, 2);
        assert_eq!(b.vertex_count(), 5);
        assert_eq!(b.directed_edges().len(), 8);
        let mut degs = b.degrees();
        degs.sort();
        assert_eq!(degs, vec![1, 1, 2, 2, 2]);
        assert_eq!(map[0], 0);
    }

    #[test]
    fn parses_both_formats() {
        let json = r#"{"vertices": 3, "edges": [[0,1],[1,2],[2,0]]}"#;
        assert_eq!(parse_graph(json).unwrap().degrees(), vec![2, 2, 2]);
        let text = "# a path\n0 1\n1 2  # trailing comment\n\n2 3\n";
        assert_eq!(parse_graph(text).unwrap().degrees(), vec![1, 2, 2, 1]);
        assert!(matches!(parse_graph("0 1 2\n"), Err(GraphError::Format(_))));
        assert_eq!(parse_graph("0 0\n"), Err(GraphError::LoopEdge(0)));
    }
}

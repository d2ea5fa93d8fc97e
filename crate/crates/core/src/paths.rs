//! Brute-force path enumeration.
//!
//! Nothing in this module uses the operator recursion: every tally is a
//! plain depth-first walk over directed edges, so it can serve as the
//! reference the symbolic identities are checked against.

use num_bigint::BigInt;
use thiserror::Error;

use crate::graph::{EdgeId, Graph, VertexId};
use crate::series::{PolyMatrix, Rational, TPoly};

/// Longest walk the enumerators accept. Work grows like `max_degree^m`.
pub const MAX_ENUMERATION_LENGTH: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("path is not closed")]
    NotClosed,
    #[error("path is not a valid walk in the graph")]
    NotAWalk,
    #[error("length {0} exceeds the enumeration cap {MAX_ENUMERATION_LENGTH}")]
    LengthCap(usize),
    #[error("edge {0} does not start at the root vertex")]
    EdgeNotAtRoot(EdgeId),
}

/// A walk given by its directed edges. A length-0 path is a bare vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub start: VertexId,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn vertex(v: VertexId) -> Self {
        Path {
            start: v,
            edges: Vec::new(),
        }
    }

    /// Validates that consecutive edges chain `t(e_i) = o(e_{i+1})`.
    pub fn new(g: &Graph, start: VertexId, edges: Vec<EdgeId>) -> Result<Self, PathError> {
        let mut at = start;
        for &e in &edges {
            if e >= g.directed_edges().len() || g.edge(e).origin != at {
                return Err(PathError::NotAWalk);
            }
            at = g.edge(e).terminus;
        }
        Ok(Path { start, edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn origin(&self) -> VertexId {
        self.start
    }

    pub fn terminus(&self, g: &Graph) -> VertexId {
        self.edges
            .last()
            .map_or(self.start, |&e| g.edge(e).terminus)
    }

    pub fn is_closed(&self, g: &Graph) -> bool {
        self.terminus(g) == self.start
    }

    /// `e_m = twin(e_1)`.
    pub fn has_tail(&self, g: &Graph) -> bool {
        match (self.edges.first(), self.edges.last()) {
            (Some(&first), Some(&last)) if self.edges.len() >= 2 => g.edge(first).twin == last,
            _ => false,
        }
    }
}

pub fn bump_count(g: &Graph, p: &Path) -> usize {
    p.edges
        .windows(2)
        .filter(|w| g.edge(w[0]).twin == w[1])
        .count()
}

pub fn cyclic_bump_count(g: &Graph, p: &Path) -> Result<usize, PathError> {
    if !p.is_closed(g) {
        return Err(PathError::NotClosed);
    }
    Ok(bump_count(g, p) + usize::from(p.has_tail(g)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    Bc,
    Cbc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Filter {
    All,
    NoTail,
    FirstEdge(EdgeId),
    LastEdge(EdgeId),
    /// First edge `e` and last edge `twin(e)`.
    FirstAndLast(EdgeId),
}

/// Calls `visit(edges, bc)` for every walk of exactly `len` edges from `start`.
fn for_each_walk(g: &Graph, start: VertexId, len: usize, visit: &mut impl FnMut(&[EdgeId], usize)) {
    fn go(
        g: &Graph,
        at: VertexId,
        remaining: usize,
        stack: &mut Vec<EdgeId>,
        bc: usize,
        visit: &mut impl FnMut(&[EdgeId], usize),
    ) {
        if remaining == 0 {
            visit(stack, bc);
            return;
        }
        for &e in g.out_edges(at) {
            let bump = stack.last().is_some_and(|&prev| g.edge(prev).twin == e);
            stack.push(e);
            go(g, g.edge(e).terminus, remaining - 1, stack, bc + usize::from(bump), visit);
            stack.pop();
        }
    }
    let mut stack = Vec::with_capacity(len);
    go(g, start, len, &mut stack, 0, visit);
}

fn counts_to_poly(counts: &[u64]) -> TPoly {
    TPoly::from_coeffs(
        counts
            .iter()
            .map(|&c| Rational::from_integer(BigInt::from(c)))
            .collect(),
    )
}

/// Σ `t^weight(C)` over closed walks of length `m` at `x0` that pass `filter`.
pub fn enumerate_closed_weighted(
    g: &Graph,
    x0: VertexId,
    m: usize,
    weight: Weight,
    filter: Filter,
) -> Result<TPoly, PathError> {
    if m > MAX_ENUMERATION_LENGTH {
        return Err(PathError::LengthCap(m));
    }
    let root_edge = |e: EdgeId| {
        if e < g.directed_edges().len() && g.edge(e).origin == x0 {
            Ok(())
        } else {
            Err(PathError::EdgeNotAtRoot(e))
        }
    };
    match filter {
        Filter::FirstEdge(e) | Filter::FirstAndLast(e) => root_edge(e)?,
        Filter::LastEdge(e) => {
            // the last edge ends at x0, so its twin starts there
            if e >= g.directed_edges().len() || g.edge(e).terminus != x0 {
                return Err(PathError::EdgeNotAtRoot(e));
            }
        }
        Filter::All | Filter::NoTail => {}
    }
    if m == 0 {
        // the bare vertex: no edges, no tail, weight 0
        let pass = matches!(filter, Filter::All | Filter::NoTail);
        return Ok(if pass { TPoly::one() } else { TPoly::zero() });
    }
    let mut counts = vec![0u64; m + 1];
    for_each_walk(g, x0, m, &mut |edges, bc| {
        let last = *edges.last().unwrap();
        if g.edge(last).terminus != x0 {
            return;
        }
        let first = edges[0];
        let tail = g.edge(first).twin == last;
        let keep = match filter {
            Filter::All => true,
            Filter::NoTail => !tail,
            Filter::FirstEdge(e) => first == e,
            Filter::LastEdge(e) => last == e,
            Filter::FirstAndLast(e) => first == e && last == g.edge(e).twin,
        };
        if keep {
            let w = match weight {
                Weight::Bc => bc,
                Weight::Cbc => bc + usize::from(tail),
            };
            counts[w] += 1;
        }
    });
    Ok(counts_to_poly(&counts))
}

/// Matrix whose `(x, y)` entry is Σ `t^bc(C)` over walks `x → y` of length `m`.
pub fn cm_bruteforce(g: &Graph, m: usize) -> Result<PolyMatrix, PathError> {
    if m > MAX_ENUMERATION_LENGTH {
        return Err(PathError::LengthCap(m));
    }
    let n = g.vertex_count();
    if m == 0 {
        return Ok(PolyMatrix::identity(n));
    }
    let mut out = PolyMatrix::zeros(n, n);
    for x in 0..n {
        let mut counts = vec![vec![0u64; m]; n];
        for_each_walk(g, x, m, &mut |edges, bc| {
            let y = g.edge(*edges.last().unwrap()).terminus;
            counts[y][bc] += 1;
        });
        for (y, c) in counts.iter().enumerate() {
            out.set(x, y, counts_to_poly(c));
        }
    }
    Ok(out)
}

/// A primitive closed walk with its length and cyclic bump count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimitivePath {
    pub path: Path,
    pub length: usize,
    pub cbc: usize,
}

/// Smallest `p` dividing `len` with `seq[i] = seq[i mod p]`.
pub fn minimal_period(seq: &[EdgeId]) -> usize {
    let len = seq.len();
    (1..=len)
        .filter(|p| len.is_multiple_of(*p))
        .find(|&p| (p..len).all(|i| seq[i] == seq[i - p]))
        .unwrap_or(len)
}

/// All closed walks at `x0` of length `1..=max_len` that are not a k-fold
/// repetition (k ≥ 2) of a shorter closed walk at `x0`.
pub fn primitive_rooted_closed_paths(
    g: &Graph,
    x0: VertexId,
    max_len: usize,
) -> Result<Vec<PrimitivePath>, PathError> {
    if max_len > MAX_ENUMERATION_LENGTH {
        return Err(PathError::LengthCap(max_len));
    }
    let mut out = Vec::new();
    for len in 1..=max_len {
        for_each_walk(g, x0, len, &mut |edges, bc| {
            let last = *edges.last().unwrap();
            if g.edge(last).terminus != x0 || minimal_period(edges) != len {
                return;
            }
            let tail = g.edge(edges[0]).twin == last;
            out.push(PrimitivePath {
                path: Path {
                    start: x0,
                    edges: edges.to_vec(),
                },
                length: len,
                cbc: bc + usize::from(tail),
            });
        });
    }
    Ok(out)
}

/// Number of closed geodesics (no bump, no tail) of length `m` at `x0`.
///
/// Deliberately separate from the weighted enumerator: it prunes every
/// backtracking step instead of counting bumps.
pub fn closed_geodesic_count(g: &Graph, x0: VertexId, m: usize) -> Result<u64, PathError> {
    if m > MAX_ENUMERATION_LENGTH {
        return Err(PathError::LengthCap(m));
    }
    if m == 0 {
        return Ok(0);
    }
    fn go(g: &Graph, x0: VertexId, first: EdgeId, prev: EdgeId, remaining: usize) -> u64 {
        let at = g.edge(prev).terminus;
        if remaining == 0 {
            return u64::from(at == x0 && g.edge(first).twin != prev);
        }
        g.out_edges(at)
            .iter()
            .filter(|&&e| e != g.edge(prev).twin)
            .map(|&e| go(g, x0, first, e, remaining - 1))
            .sum()
    }
    Ok(g.out_edges(x0)
        .iter()
        .map(|&e| go(g, x0, e, e, m - 1))
        .sum())
}

/// Non-backtracking walk counts `x → y` of length `m`, by a pruned DFS.
pub fn non_backtracking_counts(g: &Graph, m: usize) -> Result<Vec<Vec<u64>>, PathError> {
    if m > MAX_ENUMERATION_LENGTH {
        return Err(PathError::LengthCap(m));
    }
    let n = g.vertex_count();
    let mut out = vec![vec![0u64; n]; n];
    if m == 0 {
        for (x, row) in out.iter_mut().enumerate() {
            row[x] = 1;
        }
        return Ok(out);
    }
    fn go(g: &Graph, prev: EdgeId, remaining: usize, row: &mut [u64]) {
        let at = g.edge(prev).terminus;
        if remaining == 0 {
            row[at] += 1;
            return;
        }
        for &e in g.out_edges(at) {
            if e != g.edge(prev).twin {
                go(g, e, remaining - 1, row);
            }
        }
    }
    for (x, row) in out.iter_mut().enumerate() {
        for &e in g.out_edges(x) {
            go(g, e, m - 1, row);
        }
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of edges in the complete graph over `n` nodes.
pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Canonical flat index of the unordered pair `{i, j}`: pairs `(a, b)` with
/// `a < b` enumerated lexicographically.
pub fn edge_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= n || j >= n {
        return Err(Error::invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
    }
    if i == j {
        return Err(Error::invalid(format!("self-loop ({i}, {i}) has no edge index")));
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    Ok(a * n - a * (a + 1) / 2 + (b - a - 1))
}

/// Inverse of [`edge_index`]; returns `(a, b)` with `a < b`.
pub fn edge_pair(k: usize, n: usize) -> Result<(usize, usize)> {
    if k >= edge_count(n) {
        return Err(Error::invalid(format!("edge index {k} out of range for n = {n}")));
    }
    let mut rest = k;
    for a in 0..n {
        let row = n - a - 1;
        if rest < row {
            return Ok((a, a + 1 + rest));
        }
        rest -= row;
    }
    unreachable!("edge index bounded by edge_count")
}

/// Weights over all edges of the complete graph, in canonical pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeightVector {
    n: usize,
    values: Vec<f64>,
}

impl EdgeWeightVector {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != edge_count(n) {
            return Err(Error::invalid(format!(
                "expected {} edge weights for n = {n}, got {}",
                edge_count(n),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("edge weight {k} is not finite")));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.values[edge_index(i, j, self.n)?])
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.values.iter().all(|v| (lo..=hi).contains(v))
    }
}

/// A rooted spanning tree over node indices `0..n`.
///
/// Edges are stored canonically (`a < b`) in ascending order; child lists are
/// ascending, which makes traversal a pure function of the edge set and root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpanningTree {
    n: usize,
    root: usize,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

impl SpanningTree {
    pub fn from_edges(n: usize, edges: &[(usize, usize)], root: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("tree must have at least one node"));
        }
        if root >= n {
            return Err(Error::invalid(format!("root {root} out of range for n = {n}")));
        }
        if edges.len() != n - 1 {
            return Err(Error::invalid(format!(
                "a tree on {n} nodes needs {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut canon = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(format!("invalid tree edge ({a}, {b})")));
            }
            canon.push((a.min(b), a.max(b)));
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate tree edge"));
        }

        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut stack = vec![root];
        let mut visited = 1;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    children[u].push(v);
                    stack.push(v);
                }
            }
        }
        if visited != n {
            return Err(Error::invalid("edge set is not connected"));
        }
        for list in &mut children {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            root,
            edges: canon,
            children,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn rerooted(&self, root: usize) -> Result<Self> {
        Self::from_edges(self.n, &self.edges, root)
    }

    /// Rebuilds derived adjacency after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::from_edges(self.n, &self.edges, self.root)
    }
}

/// Prim's algorithm on the complete graph weighted by `w`, O(n²).
///
/// Among frontier edges of equal weight the smaller canonical edge index wins,
/// so the tree is a deterministic function of `w`. The result is rooted at
/// `root`; the MST itself does not depend on the root.
pub fn prim_mst(n: usize, w: &EdgeWeightVector, root: usize) -> Result<SpanningTree> {
    if w.n() != n {
        return Err(Error::invalid(format!(
            "weight vector is for n = {}, requested n = {n}",
            w.n()
        )));
    }
    if root >= n {
        return Err(Error::invalid(format!("root {root} out of range for n = {n}")));
    }
    let values = w.values();
    let mut in_tree = vec![false; n];
    // Cheapest known connection into the tree: (weight, edge index, tree endpoint).
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    let mut current = root;
    in_tree[current] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let k = edge_index(current, v, n)?;
            let cand = (values[k], k, current);
            let better = match best[v] {
                None => true,
                Some((bw, bk, _)) => cand.0 < bw || (cand.0 == bw && cand.1 < bk),
            };
            if better {
                best[v] = Some(cand);
            }
        }
        let (next, (_, _, from)) = (0..n)
            .filter(|&v| !in_tree[v])
            .filter_map(|v| best[v].map(|b| (v, b)))
            .min_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("complete graph always has a frontier edge");
        in_tree[next] = true;
        edges.push((from, next));
        current = next;
    }
    SpanningTree::from_edges(n, &edges, root)
}

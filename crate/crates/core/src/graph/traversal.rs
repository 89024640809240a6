use serde::{Deserialize, Serialize};

use super::SpanningTree;
use crate::error::{Error, Result};

/// Euler-tour token list: a node is emitted on arrival and again after each
/// return from one of its child subtrees. Length `2n - 1` for `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraversalSequence {
    tokens: Vec<usize>,
}

impl TraversalSequence {
    /// Wraps raw tokens, checking only the shape common to every Euler tour:
    /// odd length and matching ends.
    pub fn from_tokens(tokens: Vec<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("traversal sequence is empty"));
        }
        if tokens.len().is_multiple_of(2) || tokens.first() != tokens.last() {
            return Err(Error::invalid(
                "traversal sequence must have odd length and start and end at the root",
            ));
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn root(&self) -> usize {
        self.tokens[0]
    }

    /// Number of distinct nodes the tour covers, `(len + 1) / 2`.
    pub fn node_count(&self) -> usize {
        self.tokens.len().div_ceil(2)
    }

    /// Checks every Euler-tour invariant against `tree`.
    pub fn validate_against(&self, tree: &SpanningTree) -> Result<()> {
        let n = tree.n();
        if self.len() != 2 * n - 1 {
            return Err(Error::invalid(format!(
                "sequence length {} != 2n-1 = {}",
                self.len(),
                2 * n - 1
            )));
        }
        if self.root() != tree.root() || *self.tokens.last().unwrap() != tree.root() {
            return Err(Error::invalid("sequence does not start and end at the root"));
        }
        if let Some(w) = self.tokens.windows(2).find(|w| !tree.contains_edge(w[0], w[1])) {
            return Err(Error::invalid(format!(
                "consecutive tokens {} -> {} are not a tree edge",
                w[0], w[1]
            )));
        }
        let mut seen = vec![false; n];
        for &t in &self.tokens {
            seen[t] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("sequence does not cover every node"));
        }
        Ok(())
    }
}

/// Preorder depth-first walk with backtracking; children in ascending order.
pub fn preorder_traverse(tree: &SpanningTree) -> TraversalSequence {
    let mut tokens = Vec::with_capacity(2 * tree.n() - 1);
    // (node, next child position)
    let mut stack = vec![(tree.root(), 0usize)];
    tokens.push(tree.root());
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        let kids = tree.children(node);
        if *next < kids.len() {
            let child = kids[*next];
            *next += 1;
            tokens.push(child);
            stack.push((child, 0));
        } else {
            stack.pop();
            if let Some(&(parent, _)) = stack.last() {
                tokens.push(parent);
            }
        }
    }
    TraversalSequence { tokens }
}

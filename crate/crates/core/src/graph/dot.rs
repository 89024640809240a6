use std::fmt::Write;

use super::{LandmarkSet, SpanningTree};
use crate::error::{Error, Result};

/// Graphviz text for a tree placed at landmark coordinates.
///
/// Node lines are `id [pos="x,y"]`, edge lines `a -- b` in canonical order,
/// two-space indentation, LF line endings.
pub fn tree_to_dot(tree: &SpanningTree, landmarks: &LandmarkSet) -> Result<String> {
    if tree.n() != landmarks.len() {
        return Err(Error::invalid(format!(
            "tree has {} nodes but landmark set has {}",
            tree.n(),
            landmarks.len()
        )));
    }
    let mut out = String::from("graph tree {\n");
    for p in landmarks.points() {
        writeln!(out, "  {} [pos=\"{},{}\"]", p.index, p.x, p.y).unwrap();
    }
    for &(a, b) in tree.edges() {
        writeln!(out, "  {a} -- {b}").unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}

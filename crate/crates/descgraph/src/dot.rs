//! Graphviz DOT export of presentations and ball views. Vertices backed
//! by implicit trees — frontier vertices and the tree nodes below them —
//! are drawn as triangles; materialized vertices as ellipses. Output is
//! deterministic (sorted nodes and edges) so exports diff cleanly.

use crate::limit::BallView;
use crate::presentation::{Presentation, VertexRef};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn node_line(id: &str, triangle: bool) -> String {
    let shape = if triangle { "triangle" } else { "ellipse" };
    format!("  {} [shape={shape}];", quote(id))
}

/// The core digraph of a presentation, frontier vertices as triangles.
pub fn presentation_to_dot(p: &Presentation) -> String {
    let mut out = String::from("digraph {\n");
    for v in p.vertices() {
        out.push_str(&node_line(v, p.is_frontier(v)));
        out.push('\n');
    }
    for (s, t) in p.edges() {
        out.push_str(&format!("  {} -> {};\n", quote(&s), quote(&t)));
    }
    out.push_str("}\n");
    out
}

/// A ball view over `p`, drawing as triangles both the frontier vertices
/// themselves and the implicit tree nodes hanging below them.
pub fn ball_to_dot(p: &Presentation, ball: &BallView) -> String {
    let mut out = String::from("digraph {\n");
    for id in &ball.vertices {
        let r = VertexRef::parse_string(id);
        let triangle = if r.addr.is_empty() {
            p.is_frontier(&r.base)
        } else {
            // an id with an address suffix can still name a materialized
            // vertex; only genuinely implicit nodes get the tree marker
            match p.resolve_flex(&r) {
                Ok(resolved) => !resolved.addr.is_empty() || p.is_frontier(&resolved.base),
                Err(_) => false,
            }
        };
        out.push_str(&node_line(id, triangle));
        out.push('\n');
    }
    for (s, t) in &ball.edges {
        out.push_str(&format!("  {} -> {};\n", quote(s), quote(t)));
    }
    out.push_str("}\n");
    out
}

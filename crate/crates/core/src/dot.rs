//! Graphviz rendering of an annotated tree with its structure sets.

use std::fmt::Write;

use crate::builder::Annotation;
use crate::rational::format_rational;
use crate::roots::StructureSets;
use crate::tree::DyadicTree;

/// Bare DOT identifier when possible, quoted otherwise.
fn dot_id(s: &str) -> String {
    let plain = !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let numeral = !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    if plain || numeral {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// Minus edges are emitted before plus edges and `ordering=out` keeps them
/// on the left. Spine edges are bold; `gamma` is overlaid dashed red and
/// `gamma_t` dotted blue. Output depends only on the input.
pub fn render_dot(tree: &DyadicTree, ann: &Annotation, sets: &StructureSets) -> String {
    let mut out = String::new();
    out.push_str("digraph tree {\n");
    out.push_str("  ordering=out;\n");
    out.push_str("  node [shape=box];\n");
    for t in tree.nodes() {
        let label = format!(
            "{} ({},{})",
            tree.name(t),
            format_rational(ann.alpha(t)),
            format_rational(ann.beta(t))
        );
        let _ = writeln!(
            out,
            "  {} [label={}];",
            dot_id(tree.name(t)),
            dot_id(&label)
        );
    }
    for t in tree.internal_nodes() {
        let (m, p) = tree.children(t).expect("internal");
        for child in [m, p] {
            let style = if tree.on_spine(child) {
                "bold"
            } else {
                "solid"
            };
            let _ = writeln!(
                out,
                "  {} -> {} [style={style}];",
                dot_id(tree.name(t)),
                dot_id(tree.name(child))
            );
        }
    }
    for e in &sets.gamma {
        let _ = writeln!(
            out,
            "  {} -> {} [style=dashed,color=red];",
            dot_id(tree.name(e.parent)),
            dot_id(tree.name(e.child))
        );
    }
    for e in &sets.gamma_t {
        let _ = writeln!(
            out,
            "  {} -> {} [style=dotted,color=blue];",
            dot_id(tree.name(e.parent)),
            dot_id(tree.name(e.child))
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::example_instance;
    use crate::rational::int;
    use crate::roots::build_structure_sets;
    use crate::tree::NodeSpec;

    #[test]
    fn example_dot() {
        let (t, a) = example_instance();
        let sets = build_structure_sets(&t, &a).unwrap();
        let dot = render_dot(&t, &a, &sets);
        assert!(dot.contains("A -> 2 [style=dashed,color=red];"));
        assert!(dot.contains("C -> 4 [style=dashed,color=red];"));
        assert!(dot.contains("I -> A [style=dotted,color=blue];"));
        for (p, c) in [("I", "B"), ("B", "D"), ("D", "6")] {
            assert!(
                dot.contains(&format!("{p} -> {c} [style=bold];")),
                "{p} -> {c}"
            );
        }
        assert!(dot.contains("I -> A [style=solid];"));
        assert!(dot.contains("A [label=\"A (2,3)\"];"));
        assert_eq!(dot, render_dot(&t, &a, &sets));
    }

    #[test]
    fn single_leaf_dot() {
        let t = DyadicTree::new(&[NodeSpec::leaf("x")], "x", None).unwrap();
        let a = Annotation::from_vecs(&t, vec![int(2)], vec![int(2)]).unwrap();
        let sets = build_structure_sets(&t, &a).unwrap();
        let dot = render_dot(&t, &a, &sets);
        assert!(!dot.contains("->"));
        assert_eq!(dot.matches("[label=").count(), 1);
    }

    #[test]
    fn quotes_awkward_ids() {
        assert_eq!(dot_id("v1"), "v1");
        assert_eq!(dot_id("12"), "12");
        assert_eq!(dot_id("1a"), "\"1a\"");
        assert_eq!(dot_id("a \"b\""), "\"a \\\"b\\\"\"");
    }
}

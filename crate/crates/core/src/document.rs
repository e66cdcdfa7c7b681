//! JSON documents read and written by the command-line tool.
//!
//! Rationals are written as strings (`"3"`, `"-1/8"`). On input a JSON
//! integer is also accepted; floats never are.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::Signed;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::builder::{build_umatrix, Annotation, UMatrix};
use crate::error::{Error, Result};
use crate::inverse::{invert_oracle, kernel, neumann_check, potentials};
use crate::links::{link_matrix_with, zero_pattern, ColumnRootTest, LinkTrace};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::roots::{analyze_roots, build_structure_sets};
use crate::tree::{DyadicTree, NodeId, NodeSpec, TreeEdge};

/// Exact rational with the string encoding used in documents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExactVisitor;

        impl Visitor<'_> for ExactVisitor {
            type Value = Exact;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a string \"p\" or \"p/q\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exact, E> {
                Err(E::custom(format!(
                    "floating-point value {v} is not exact; write it as \"p/q\""
                )))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exact, E> {
                parse_rational(v)
                    .map(Exact)
                    .map_err(|e| E::custom(e.to_string()))
            }
        }

        d.deserialize_any(ExactVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<String>,
    pub alpha: Exact,
    pub beta: Exact,
}

/// An annotated tree: nodes with children and `(alpha, beta)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpecDocument {
    pub nodes: Vec<NodeEntry>,
    pub root: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_leaf: Option<String>,
}

impl TreeSpecDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for node in &doc.nodes {
            if node.minus.is_some() != node.plus.is_some() {
                return Err(Error::Parse(format!(
                    "node `{}` must list both minus and plus, or neither",
                    node.id
                )));
            }
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Tree and annotation, without checking the annotation conditions.
    pub fn to_instance(&self) -> Result<(DyadicTree, Annotation)> {
        let specs: Vec<NodeSpec> = self
            .nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id.clone(),
                minus: n.minus.clone(),
                plus: n.plus.clone(),
            })
            .collect();
        let tree = DyadicTree::new(&specs, &self.root, self.fixed_leaf.as_deref())?;
        let values: HashMap<String, (Rational, Rational)> = self
            .nodes
            .iter()
            .map(|n| (n.id.clone(), (n.alpha.0.clone(), n.beta.0.clone())))
            .collect();
        let ann = Annotation::from_named(&tree, &values)?;
        Ok((tree, ann))
    }

    /// Nodes in pre-order; `fixed_leaf` is written out explicitly.
    pub fn from_instance(tree: &DyadicTree, ann: &Annotation) -> Self {
        let nodes = tree
            .to_specs()
            .into_iter()
            .map(|s| {
                let t = tree.id(&s.id).expect("node of this tree");
                NodeEntry {
                    id: s.id,
                    minus: s.minus,
                    plus: s.plus,
                    alpha: Exact(ann.alpha(t).clone()),
                    beta: Exact(ann.beta(t).clone()),
                }
            })
            .collect();
        TreeSpecDocument {
            nodes,
            root: tree.name(tree.root()).to_string(),
            fixed_leaf: Some(tree.name(tree.fixed_leaf()).to_string()),
        }
    }
}

/// A block `rows × cols` of `U⁻¹`, given by leaf ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroBlock {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    /// Leaf ids in matrix order.
    pub leaves: Vec<String>,
    pub matrix: Vec<Vec<Exact>>,
    pub inverse: Vec<Vec<Exact>>,
    pub mu: Vec<Exact>,
    pub nu: Vec<Exact>,
    pub mu_bar: Exact,
    pub roots: Vec<String>,
    pub roots_t: Vec<String>,
    pub gamma: Vec<(String, String)>,
    pub gamma_t: Vec<(String, String)>,
    pub exit_lhs: Exact,
    pub exit_rhs: Exact,
    pub n_exiting: bool,
    pub row_dominant: bool,
    pub links: Vec<(String, String)>,
    pub zero_blocks: Vec<ZeroBlock>,
    pub eta: Exact,
    /// `‖ηU − S_M‖_∞` for `M = 0..`, present when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neumann_gaps: Option<Vec<f64>>,
}

/// A structural verdict that disagrees with the exact inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Roots {
        structural: Vec<String>,
        oracle: Vec<String>,
    },
    TransposeRoots {
        structural: Vec<String>,
        oracle: Vec<String>,
    },
    Link(String),
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Roots { structural, oracle } => {
                write!(
                    f,
                    "roots: structural {structural:?}, positive row sums {oracle:?}"
                )
            }
            Mismatch::TransposeRoots { structural, oracle } => {
                write!(
                    f,
                    "transpose roots: structural {structural:?}, positive column sums {oracle:?}"
                )
            }
            Mismatch::Link(s) => write!(f, "link {s}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub eta: Option<Rational>,
    pub neumann_terms: Option<usize>,
}

/// Report plus every disagreement between structure and inverse.
#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub report: ReportDocument,
    pub mismatches: Vec<Mismatch>,
}

fn exact_vec(v: &[Rational]) -> Vec<Exact> {
    v.iter().cloned().map(Exact).collect()
}

fn exact_rows(m: &crate::matrix::RationalMatrix) -> Vec<Vec<Exact>> {
    (0..m.rows()).map(|i| exact_vec(m.row(i))).collect()
}

fn edge_pairs(tree: &DyadicTree, set: &BTreeSet<TreeEdge>) -> Vec<(String, String)> {
    set.iter()
        .map(|e| {
            (
                tree.name(e.parent).to_string(),
                tree.name(e.child).to_string(),
            )
        })
        .collect()
}

fn leaf_names(tree: &DyadicTree, leaves: impl IntoIterator<Item = NodeId>) -> Vec<String> {
    let mut v: Vec<NodeId> = leaves.into_iter().collect();
    v.sort_by_key(|&t| tree.leaf_index(t));
    v.into_iter().map(|t| tree.name(t).to_string()).collect()
}

/// Builds the full report for a valid, nonsingular instance.
pub fn build_report(
    tree: &DyadicTree,
    ann: &Annotation,
    opts: &ReportOptions,
) -> Result<ReportOutcome> {
    let sets = build_structure_sets(tree, ann)?;
    let u: UMatrix = build_umatrix(tree, ann)?;
    let inverse = invert_oracle(&u.entries)?;
    let pot = potentials(&inverse);
    let roots = analyze_roots(&u, &sets)?;
    let links = link_matrix_with(&u, &inverse, ColumnRootTest::Transposed)?;
    let k = kernel(&inverse, opts.eta.as_ref())?;
    let neumann_gaps = match opts.neumann_terms {
        Some(m) => Some(neumann_check(&u, &k, m)?.gaps),
        None => None,
    };
    let order = tree.leaf_order();
    let leaf = |k: usize| tree.name(order[k]).to_string();

    let mut mismatches = Vec::new();
    let oracle_roots: Vec<NodeId> = order
        .iter()
        .zip(&pot.mu)
        .filter(|(_, v)| v.is_positive())
        .map(|(&i, _)| i)
        .collect();
    let oracle_roots_t: Vec<NodeId> = order
        .iter()
        .zip(&pot.nu)
        .filter(|(_, v)| v.is_positive())
        .map(|(&i, _)| i)
        .collect();
    let (structural, oracle) = (
        leaf_names(tree, roots.roots.clone()),
        leaf_names(tree, oracle_roots),
    );
    if structural != oracle {
        mismatches.push(Mismatch::Roots { structural, oracle });
    }
    let (structural, oracle) = (
        leaf_names(tree, roots.roots_t.clone()),
        leaf_names(tree, oracle_roots_t),
    );
    if structural != oracle {
        mismatches.push(Mismatch::TransposeRoots { structural, oracle });
    }
    let describe = |t: &LinkTrace| {
        format!(
            "({}, {}): structural {}, inverse entry {}, rule {:?}, reason {:?}",
            leaf(t.i),
            leaf(t.j),
            t.linked(),
            format_rational(&inverse[(t.i, t.j)]),
            t.rule,
            t.reason
        )
    };
    mismatches.extend(
        links
            .counterexamples
            .iter()
            .map(|t| Mismatch::Link(describe(t))),
    );

    let pattern = zero_pattern(tree, ann);
    let block_leaves = |k: usize| pattern.blocks[k].clone().map(leaf).collect::<Vec<_>>();
    let zero_blocks = pattern
        .predicted_zero
        .iter()
        .map(|&(p, q)| ZeroBlock {
            rows: block_leaves(p),
            cols: block_leaves(q),
        })
        .collect();

    let report = ReportDocument {
        leaves: (0..order.len()).map(leaf).collect(),
        matrix: exact_rows(&u.entries),
        inverse: exact_rows(&inverse),
        mu: exact_vec(&pot.mu),
        nu: exact_vec(&pot.nu),
        mu_bar: Exact(pot.mu_bar.clone()),
        roots: leaf_names(tree, roots.roots.iter().copied()),
        roots_t: leaf_names(tree, roots.roots_t.iter().copied()),
        gamma: edge_pairs(tree, &sets.gamma),
        gamma_t: edge_pairs(tree, &sets.gamma_t),
        exit_lhs: Exact(roots.exit.lhs.clone()),
        exit_rhs: Exact(roots.exit.rhs.clone()),
        n_exiting: roots.n_exiting,
        row_dominant: roots.row_dominant,
        links: links
            .links()
            .into_iter()
            .map(|(i, j)| (leaf(i), leaf(j)))
            .collect(),
        zero_blocks,
        eta: Exact(k.eta),
        neumann_gaps,
    };
    Ok(ReportOutcome { report, mismatches })
}

impl ReportDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;

        let s = |e: &Exact| format_rational(&e.0);
        let list = |v: &[String]| format!("{{{}}}", v.join(", "));
        let pairs = |v: &[(String, String)]| {
            let items: Vec<String> = v.iter().map(|(a, b)| format!("({a},{b})")).collect();
            format!("{{{}}}", items.join(", "))
        };
        let table = |m: &[Vec<Exact>]| {
            let cells: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(s).collect()).collect();
            let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
            cells
                .iter()
                .map(|r| {
                    let row: Vec<String> = r.iter().map(|c| format!("{c:>width$}")).collect();
                    format!("  {}\n", row.join(" "))
                })
                .collect::<String>()
        };

        let mut out = String::new();
        let _ = writeln!(out, "leaves: {}", self.leaves.join(" "));
        let _ = write!(out, "U:\n{}", table(&self.matrix));
        let _ = write!(out, "U^-1:\n{}", table(&self.inverse));
        let _ = writeln!(
            out,
            "mu: [{}]",
            self.mu.iter().map(s).collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(
            out,
            "nu: [{}]",
            self.nu.iter().map(s).collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(out, "mu_bar: {}", s(&self.mu_bar));
        let _ = writeln!(out, "gamma: {}", pairs(&self.gamma));
        let _ = writeln!(out, "gamma_t: {}", pairs(&self.gamma_t));
        let _ = writeln!(out, "roots: {}", list(&self.roots));
        let _ = writeln!(out, "roots_t: {}", list(&self.roots_t));
        let _ = writeln!(
            out,
            "fixed leaf: 1/U_nn = {} vs spine sum {} (row dominant: {}, exiting: {})",
            s(&self.exit_lhs),
            s(&self.exit_rhs),
            self.row_dominant,
            self.n_exiting
        );
        let _ = writeln!(out, "links: {}", pairs(&self.links));
        for b in &self.zero_blocks {
            let _ = writeln!(out, "zero block: {} x {}", list(&b.rows), list(&b.cols));
        }
        let _ = writeln!(out, "eta: {}", s(&self.eta));
        if let Some(gaps) = &self.neumann_gaps {
            for (m, g) in gaps.iter().enumerate() {
                let _ = writeln!(out, "gap[{m}]: {g:e}");
            }
        }
        out
    }
}

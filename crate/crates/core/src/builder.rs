//! Annotated trees and the matrices they support.
//!
//! An [`Annotation`] attaches a pair `(alpha, beta)` of nonnegative rationals
//! to every node. [`validate_annotation`] checks the four structural
//! conditions independently, and [`build_umatrix`] materializes the matrix
//! indexed by leaf order:
//!
//! * `U_ii = alpha_i`,
//! * `U_ij = alpha_t` for `i` left of `j`, where `t = i ∧ j`,
//! * `U_ij = beta_s` for `i` right of `j`, where `s` is the deeper of
//!   `i ∧ j` and `i ∧ n`.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::RationalMatrix;
use crate::rational::{format_rational, frac, Rational};
use crate::tree::{DyadicTree, NodeId, NodeSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    alpha: Vec<Rational>,
    beta: Vec<Rational>,
}

impl Annotation {
    /// Builds an annotation for `tree` from per-node `(alpha, beta)` pairs
    /// keyed by node name.
    pub fn from_named(
        tree: &DyadicTree,
        values: &HashMap<String, (Rational, Rational)>,
    ) -> Result<Self> {
        let mut alpha = Vec::with_capacity(tree.num_nodes());
        let mut beta = Vec::with_capacity(tree.num_nodes());
        for t in tree.nodes() {
            let (a, b) = values
                .get(tree.name(t))
                .ok_or_else(|| Error::MissingAnnotation(tree.name(t).to_string()))?;
            alpha.push(a.clone());
            beta.push(b.clone());
        }
        Ok(Annotation { alpha, beta })
    }

    /// Values listed in node-id order of the tree they belong to.
    pub fn from_vecs(tree: &DyadicTree, alpha: Vec<Rational>, beta: Vec<Rational>) -> Result<Self> {
        let covered = alpha.len().min(beta.len());
        if covered < tree.num_nodes() {
            return Err(Error::MissingAnnotation(
                tree.name(NodeId(covered)).to_string(),
            ));
        }
        if alpha.len() != beta.len() || alpha.len() > tree.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} alpha and {} beta values for {} nodes",
                alpha.len(),
                beta.len(),
                tree.num_nodes()
            )));
        }
        Ok(Annotation { alpha, beta })
    }

    pub fn alpha(&self, t: NodeId) -> &Rational {
        &self.alpha[t.0]
    }

    pub fn beta(&self, t: NodeId) -> &Rational {
        &self.beta[t.0]
    }

    pub fn set(&mut self, t: NodeId, alpha: Rational, beta: Rational) {
        self.alpha[t.0] = alpha;
        self.beta[t.0] = beta;
    }

    /// Annotation of a subtree, reindexed with the id map from
    /// [`DyadicTree::subtree`].
    pub fn restricted(&self, map: &[NodeId]) -> Annotation {
        Annotation {
            alpha: map.iter().map(|t| self.alpha[t.0].clone()).collect(),
            beta: map.iter().map(|t| self.beta[t.0].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    /// alpha and beta agree on leaves.
    LeafEquality,
    /// Internal nodes of the plus subtree of the root copy alpha from their
    /// attachment point on the spine.
    SpineCopy,
    /// alpha ≤ beta.
    Ordered,
    /// Both vectors increase from the root towards the leaves.
    Monotone,
    /// alpha = beta on the spine.
    SpineEquality,
    Nonnegative,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::LeafEquality | Condition::SpineCopy => "(i)",
            Condition::Ordered => "(ii)",
            Condition::Monotone => "(iii)",
            Condition::SpineEquality => "(iv)",
            Condition::Nonnegative => "(nonnegativity)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub condition: Condition,
    /// Witnessing node names.
    pub nodes: Vec<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "condition {} at {}: {}",
            self.condition.label(),
            self.nodes.join(","),
            self.detail
        )
    }
}

/// Checks every condition and returns all violations found (empty when the
/// annotation is valid for `tree`).
pub fn validate_annotation(tree: &DyadicTree, ann: &Annotation) -> Vec<Violation> {
    let mut out = Vec::new();
    let name = |t: NodeId| tree.name(t).to_string();
    let fmt = format_rational;
    let n = tree.fixed_leaf();

    for t in tree.nodes() {
        let (a, b) = (ann.alpha(t), ann.beta(t));
        if a.is_negative() || b.is_negative() {
            out.push(Violation {
                condition: Condition::Nonnegative,
                nodes: vec![name(t)],
                detail: format!("alpha = {}, beta = {}", fmt(a), fmt(b)),
            });
        }
    }

    for &i in tree.leaf_order() {
        if ann.alpha(i) != ann.beta(i) {
            out.push(Violation {
                condition: Condition::LeafEquality,
                nodes: vec![name(i)],
                detail: format!(
                    "leaf has alpha = {} but beta = {}",
                    fmt(ann.alpha(i)),
                    fmt(ann.beta(i))
                ),
            });
        }
    }
    if let Some(plus) = tree.plus(tree.root()) {
        for t in tree
            .internal_nodes()
            .filter(|&t| tree.is_ancestor_or_self(plus, t))
        {
            let s = tree.lca(t, n);
            if ann.alpha(t) != ann.alpha(s) {
                out.push(Violation {
                    condition: Condition::SpineCopy,
                    nodes: vec![name(t), name(s)],
                    detail: format!(
                        "alpha = {} differs from alpha = {} at {}",
                        fmt(ann.alpha(t)),
                        fmt(ann.alpha(s)),
                        name(s)
                    ),
                });
            }
        }
    }

    for t in tree.nodes() {
        if ann.alpha(t) > ann.beta(t) {
            out.push(Violation {
                condition: Condition::Ordered,
                nodes: vec![name(t)],
                detail: format!(
                    "alpha = {} exceeds beta = {}",
                    fmt(ann.alpha(t)),
                    fmt(ann.beta(t))
                ),
            });
        }
    }

    for t in tree.nodes() {
        let Some(p) = tree.parent(t) else { continue };
        for (label, parent_v, child_v) in [
            ("alpha", ann.alpha(p), ann.alpha(t)),
            ("beta", ann.beta(p), ann.beta(t)),
        ] {
            if parent_v > child_v {
                out.push(Violation {
                    condition: Condition::Monotone,
                    nodes: vec![name(p), name(t)],
                    detail: format!(
                        "{label} decreases from {} to {}",
                        fmt(parent_v),
                        fmt(child_v)
                    ),
                });
            }
        }
    }

    for t in tree.spine() {
        if ann.alpha(t) != ann.beta(t) {
            out.push(Violation {
                condition: Condition::SpineEquality,
                nodes: vec![name(t)],
                detail: format!(
                    "spine node has alpha = {} but beta = {}",
                    fmt(ann.alpha(t)),
                    fmt(ann.beta(t))
                ),
            });
        }
    }
    out
}

/// Which entry rule a matrix follows below the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Lower entries use `beta` at the deeper of `i ∧ j` and `i ∧ n`.
    FixedLeaf,
    /// Lower entries use `beta` at `i ∧ j`; these are the blocks hanging off
    /// the spine.
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UMatrix {
    pub entries: RationalMatrix,
    pub tree: DyadicTree,
    pub annotation: Annotation,
    pub kind: MatrixKind,
}

impl UMatrix {
    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    /// Entry at the leaf-order positions of two leaves.
    pub fn at(&self, i: NodeId, j: NodeId) -> &Rational {
        let a = self.tree.leaf_index(i).expect("leaf");
        let b = self.tree.leaf_index(j).expect("leaf");
        &self.entries[(a, b)]
    }
}

/// Entry rule without validation.
pub fn entries_by_rule(tree: &DyadicTree, ann: &Annotation, kind: MatrixKind) -> RationalMatrix {
    let leaves = tree.leaf_order();
    let n = tree.fixed_leaf();
    RationalMatrix::from_fn(leaves.len(), leaves.len(), |a, b| {
        let (i, j) = (leaves[a], leaves[b]);
        if a == b {
            return ann.alpha(i).clone();
        }
        let t = tree.lca(i, j);
        if a < b {
            return ann.alpha(t).clone();
        }
        let s = match kind {
            MatrixKind::Generalized => t,
            MatrixKind::FixedLeaf => {
                let m = tree.lca(i, n);
                if tree.depth(m) > tree.depth(t) {
                    m
                } else {
                    t
                }
            }
        };
        ann.beta(s).clone()
    })
}

pub fn build_umatrix(tree: &DyadicTree, ann: &Annotation) -> Result<UMatrix> {
    let violations = validate_annotation(tree, ann);
    if !violations.is_empty() {
        return Err(Error::InvalidAnnotation(violations));
    }
    Ok(UMatrix {
        entries: entries_by_rule(tree, ann, MatrixKind::FixedLeaf),
        tree: tree.clone(),
        annotation: ann.clone(),
        kind: MatrixKind::FixedLeaf,
    })
}

/// Principal submatrix on the leaves below `node`, with the restricted tree
/// and annotation attached. Restrictions at spine nodes keep the fixed-leaf
/// rule; restrictions anywhere else are generalized blocks.
pub fn restrict(u: &UMatrix, node: NodeId) -> UMatrix {
    let (sub, map) = u.tree.subtree(node);
    let range = u.tree.leaf_range(node);
    let kind = if u.kind == MatrixKind::FixedLeaf && u.tree.on_spine(node) {
        MatrixKind::FixedLeaf
    } else {
        MatrixKind::Generalized
    };
    UMatrix {
        entries: u.entries.block(range.clone(), range),
        annotation: u.annotation.restricted(&map),
        tree: sub,
        kind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Increments may be zero, so equality cases (and singular matrices) occur.
    Lax,
    /// Positive increments everywhere the conditions allow.
    Strict,
}

/// Random valid annotated tree with between 1 and `max_leaves` leaves.
///
/// Values are drawn as cumulative increments from the root, then repaired:
/// leaves take `alpha = beta = max`, the spine takes `beta := alpha`, and the
/// plus subtree of the root copies alpha from the spine. Deterministic in
/// `seed`.
pub fn random_instance(
    seed: u64,
    max_leaves: usize,
    strictness: Strictness,
) -> (DyadicTree, Annotation) {
    random_instance_sized(seed, 1..=max_leaves, strictness)
}

/// [`random_instance`] with the leaf count drawn from `leaves`.
pub fn random_instance_sized(
    seed: u64,
    leaves: RangeInclusive<usize>,
    strictness: Strictness,
) -> (DyadicTree, Annotation) {
    assert!(
        *leaves.start() >= 1 && !leaves.is_empty(),
        "leaf range must be nonempty and start at 1 or more"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = rng.random_range(leaves);

    // Shape: preorder list of (name, minus, plus) built by random splits.
    enum Shape {
        Leaf,
        Node(Box<Shape>, Box<Shape>),
    }
    fn grow(rng: &mut ChaCha8Rng, k: usize) -> Shape {
        if k == 1 {
            return Shape::Leaf;
        }
        let left = rng.random_range(1..k);
        Shape::Node(Box::new(grow(rng, left)), Box::new(grow(rng, k - left)))
    }
    fn emit(
        shape: &Shape,
        specs: &mut Vec<NodeSpec>,
        internal: &mut usize,
        leaf: &mut usize,
    ) -> String {
        match shape {
            Shape::Leaf => {
                *leaf += 1;
                let id = leaf.to_string();
                specs.push(NodeSpec::leaf(id.clone()));
                id
            }
            Shape::Node(m, p) => {
                *internal += 1;
                let id = format!("v{internal}");
                let slot = specs.len();
                specs.push(NodeSpec::leaf(id.clone()));
                let m = emit(m, specs, internal, leaf);
                let p = emit(p, specs, internal, leaf);
                specs[slot] = NodeSpec::internal(id.clone(), m, p);
                id
            }
        }
    }
    let shape = grow(&mut rng, leaves);
    let mut specs = Vec::new();
    let root = emit(&shape, &mut specs, &mut 0, &mut 0);
    let tree = DyadicTree::new(&specs, &root, None).expect("generated tree is dyadic");

    let increment = |rng: &mut ChaCha8Rng| -> Rational {
        match strictness {
            Strictness::Strict => frac(rng.random_range(1..=4), rng.random_range(1..=3)),
            Strictness::Lax => {
                if rng.random_bool(0.5) {
                    Rational::zero()
                } else {
                    frac(rng.random_range(1..=2), rng.random_range(1..=2))
                }
            }
        }
    };

    let count = tree.num_nodes();
    let mut alpha = vec![Rational::zero(); count];
    let mut beta = vec![Rational::zero(); count];
    // Pre-order ids put every parent before its children.
    for t in tree.nodes() {
        let (pa, pb) = match tree.parent(t) {
            Some(p) => (alpha[p.0].clone(), beta[p.0].clone()),
            None => (Rational::zero(), Rational::zero()),
        };
        let a = pa + increment(&mut rng);
        let b = pb + increment(&mut rng);
        beta[t.0] = if b < a { a.clone() } else { b };
        alpha[t.0] = a;
    }
    for &i in tree.leaf_order() {
        let m = alpha[i.0].clone().max(beta[i.0].clone());
        alpha[i.0] = m.clone();
        beta[i.0] = m;
    }
    for t in tree.spine() {
        beta[t.0] = alpha[t.0].clone();
    }
    if let Some(plus) = tree.plus(tree.root()) {
        let n = tree.fixed_leaf();
        let targets: Vec<NodeId> = tree
            .internal_nodes()
            .filter(|&t| tree.is_ancestor_or_self(plus, t))
            .collect();
        for t in targets {
            alpha[t.0] = alpha[tree.lca(t, n).0].clone();
        }
    }
    let ann = Annotation::from_vecs(&tree, alpha, beta).expect("one value per node");
    (tree, ann)
}

/// Annotation of the worked six-leaf example on [`crate::tree::example_tree_specs`].
pub fn example_instance() -> (DyadicTree, Annotation) {
    let tree = DyadicTree::new(&crate::tree::example_tree_specs(), "I", Some("6"))
        .expect("example tree is valid");
    let values: HashMap<String, (Rational, Rational)> = [
        ("I", 1, 1),
        ("A", 2, 3),
        ("B", 2, 2),
        ("C", 2, 4),
        ("D", 3, 3),
        ("1", 3, 3),
        ("2", 3, 3),
        ("3", 4, 4),
        ("4", 4, 4),
        ("5", 4, 4),
        ("6", 4, 4),
    ]
    .into_iter()
    .map(|(k, a, b)| (k.to_string(), (frac(a, 1), frac(b, 1))))
    .collect();
    let ann = Annotation::from_named(&tree, &values).expect("every node annotated");
    (tree, ann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn example_u() -> UMatrix {
        let (tree, ann) = example_instance();
        build_umatrix(&tree, &ann).unwrap()
    }

    #[test]
    fn example_is_valid() {
        let (tree, ann) = example_instance();
        assert!(validate_annotation(&tree, &ann).is_empty());
    }

    #[test]
    fn example_matrix() {
        let expected = RationalMatrix::from_integers(
            &[
                vec![3, 2, 1, 1, 1, 1],
                vec![3, 3, 1, 1, 1, 1],
                vec![2, 2, 4, 2, 2, 2],
                vec![2, 2, 4, 4, 2, 2],
                vec![3, 3, 3, 3, 4, 3],
                vec![4, 4, 4, 4, 4, 4],
            ],
            1,
        );
        assert_eq!(example_u().entries, expected);
    }

    #[test]
    fn beta_below_alpha_is_condition_ii() {
        let (tree, mut ann) = example_instance();
        let a = tree.id("A").unwrap();
        ann.set(a, int(2), int(1));
        let v = validate_annotation(&tree, &ann);
        assert!(v
            .iter()
            .any(|x| x.condition == Condition::Ordered && x.nodes == ["A"]));
        assert!(matches!(
            build_umatrix(&tree, &ann),
            Err(Error::InvalidAnnotation(_))
        ));
    }

    #[test]
    fn copy_rule_is_condition_i() {
        let (tree, mut ann) = example_instance();
        let c = tree.id("C").unwrap();
        ann.set(c, int(3), int(4));
        let v = validate_annotation(&tree, &ann);
        assert!(v
            .iter()
            .any(|x| x.condition == Condition::SpineCopy && x.nodes[0] == "C"));
        assert_eq!(v[0].condition.label(), "(i)");
    }

    #[test]
    fn monotonicity_spine_and_leaf_conditions() {
        let (tree, mut ann) = example_instance();
        ann.set(tree.id("1").unwrap(), int(1), int(1));
        ann.set(tree.id("D").unwrap(), int(3), int(4));
        ann.set(tree.id("5").unwrap(), int(4), int(5));
        let v = validate_annotation(&tree, &ann);
        let has = |c| v.iter().any(|x: &Violation| x.condition == c);
        assert!(has(Condition::Monotone));
        assert!(has(Condition::SpineEquality));
        assert!(has(Condition::LeafEquality));
    }

    #[test]
    fn missing_annotation() {
        let (tree, _) = example_instance();
        let values = HashMap::new();
        assert!(matches!(
            Annotation::from_named(&tree, &values),
            Err(Error::MissingAnnotation(_))
        ));
    }

    #[test]
    fn single_leaf_and_two_leaf_matrices() {
        let tree = DyadicTree::new(&[NodeSpec::leaf("x")], "x", None).unwrap();
        let ann = Annotation::from_vecs(&tree, vec![int(5)], vec![int(5)]).unwrap();
        assert_eq!(
            build_umatrix(&tree, &ann).unwrap().entries,
            RationalMatrix::from_integers(&[vec![5]], 1)
        );

        let specs = [
            NodeSpec::internal("I", "1", "2"),
            NodeSpec::leaf("1"),
            NodeSpec::leaf("2"),
        ];
        let tree = DyadicTree::new(&specs, "I", None).unwrap();
        let values: HashMap<_, _> = [("I", 1), ("1", 2), ("2", 3)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), (int(v), int(v))))
            .collect();
        let ann = Annotation::from_named(&tree, &values).unwrap();
        assert_eq!(
            build_umatrix(&tree, &ann).unwrap().entries,
            RationalMatrix::from_integers(&[vec![2, 1], vec![3, 3]], 1)
        );
    }

    #[test]
    fn restrictions_of_example() {
        let u = example_u();
        let c = restrict(&u, u.tree.id("C").unwrap());
        assert_eq!(
            c.entries,
            RationalMatrix::from_integers(&[vec![4, 2], vec![4, 4]], 1)
        );
        assert_eq!(c.kind, MatrixKind::Generalized);
        let a = restrict(&u, u.tree.id("A").unwrap());
        assert_eq!(
            a.entries,
            RationalMatrix::from_integers(&[vec![3, 2], vec![3, 3]], 1)
        );
        let whole = restrict(&u, u.tree.root());
        assert_eq!(whole.entries, u.entries);
        assert_eq!(whole.kind, MatrixKind::FixedLeaf);
        let b = restrict(&u, u.tree.id("B").unwrap());
        assert_eq!(b.kind, MatrixKind::FixedLeaf);
        assert_eq!(b.tree.name(b.tree.fixed_leaf()), "6");
    }

    #[test]
    fn generator_single_leaf() {
        for seed in 0..5 {
            let (tree, ann) = random_instance(seed, 1, Strictness::Lax);
            assert_eq!(tree.num_leaves(), 1);
            let u = build_umatrix(&tree, &ann).unwrap();
            assert_eq!(u.size(), 1);
        }
        let (tree, ann) = random_instance(0, 1, Strictness::Strict);
        let u = build_umatrix(&tree, &ann).unwrap();
        assert!(u.entries[(0, 0)].is_positive());
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(
            random_instance(42, 9, Strictness::Lax),
            random_instance(42, 9, Strictness::Lax)
        );
    }
}

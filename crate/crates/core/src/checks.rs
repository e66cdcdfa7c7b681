//! Invariant suites run against the exact inverse, one instance at a time.
//!
//! Every suite returns a list of failure messages; an empty list is a pass.
//! Diagnostic suites record information (alternative readings, explained
//! exceptions) and never count as violations.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::builder::{
    build_umatrix, entries_by_rule, restrict, validate_annotation, Annotation, MatrixKind, UMatrix,
};
use crate::inverse::{
    invert_oracle, kernel, neumann_check, potentials, schur_blocks, verify_mu_recursion,
};
use crate::links::{check_zero_pattern, link_matrix_with, zero_pattern, ColumnRootTest};
use crate::matrix::RationalMatrix;
use crate::rational::{format_rational, Rational};
use crate::roots::{
    dominance_screens, exit_of_n, gu_mass_bounds, roots_structural, roots_structural_with,
    roots_transpose, structure_sets, PathReading,
};
use crate::tree::{DyadicTree, NodeId};

macro_rules! suites {
    ($($variant:ident => $name:literal, $diag:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Suite { $($variant),* }

        impl Suite {
            pub const ALL: &'static [Suite] = &[$(Suite::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Suite::$variant => $name),* }
            }

            pub fn is_diagnostic(self) -> bool {
                match self { $(Suite::$variant => $diag),* }
            }
        }
    };
}

suites! {
    TreeGeodesic => "tree.geodesic", false;
    TreeLca => "tree.lca", false;
    TreePartition => "tree.partition", false;
    TreeSpine => "tree.spine", false;
    GeneratorValid => "build.valid", false;
    Ultrametric => "build.ultrametric", false;
    RootSplit => "build.root-split", false;
    LastRow => "build.last-row", false;
    RestrictSpine => "build.restrict-spine", false;
    RestrictOffSpine => "build.restrict-off-spine", false;
    MMatrix => "inverse.m-matrix", false;
    Potentials => "inverse.potentials", false;
    Schur => "inverse.schur", false;
    MuRecursion => "inverse.mu-recursion", false;
    RestrictionsNonsingular => "inverse.restrictions-nonsingular", false;
    Kernel => "kernel.substochastic", false;
    EtaInvariance => "kernel.eta-invariance", false;
    Neumann => "kernel.neumann", false;
    Roots => "roots.top", false;
    RootsEveryNode => "roots.every-node", false;
    TransposeRoots => "roots.transpose-every-node", false;
    TransposeTop => "roots.transpose-top", false;
    ExitIdentity => "roots.exit-identity", false;
    Screens => "roots.screens", false;
    GuMass => "roots.generalized-mass", false;
    Links => "links.structural", false;
    LinksMinusBlock => "links.minus-block", false;
    LinksPlusBlock => "links.plus-block", false;
    CrossSplit => "links.cross-split", false;
    ZeroBlocks => "pattern.zero-blocks", false;
    Triangular => "pattern.triangular", false;
    Nonzero => "pattern.nonzero", false;
    NonzeroExplained => "pattern.nonzero-zero-split-value", true;
    RootsFromRootReading => "roots.from-root-reading-disagreements", true;
    LinksDirectColumn => "links.direct-column-disagreements", true;
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Partial sums checked up to this many terms.
    pub neumann_terms: usize,
    /// Neumann checks only run on instances with at most this many leaves.
    pub neumann_max_leaves: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            neumann_terms: 20,
            neumann_max_leaves: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub suite: Suite,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceReport {
    pub leaves: usize,
    pub singular: bool,
    pub results: Vec<SuiteResult>,
}

impl InstanceReport {
    /// Failed non-diagnostic suites.
    pub fn violations(&self) -> impl Iterator<Item = &SuiteResult> {
        self.results
            .iter()
            .filter(|r| !r.suite.is_diagnostic() && !r.passed())
    }

    pub fn ok(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn result(&self, suite: Suite) -> Option<&SuiteResult> {
        self.results.iter().find(|r| r.suite == suite)
    }
}

struct Recorder {
    results: Vec<SuiteResult>,
}

impl Recorder {
    fn record(&mut self, suite: Suite, failures: Vec<String>) {
        self.results.push(SuiteResult { suite, failures });
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Option<String> {
    (!ok).then(msg)
}

/// Runs every suite on one annotated tree. A singular `U` stops after the
/// tree and builder suites.
pub fn check_instance(tree: &DyadicTree, ann: &Annotation, opts: &CheckOptions) -> InstanceReport {
    let mut rec = Recorder {
        results: Vec::new(),
    };
    tree_suites(tree, &mut rec);

    let violations = validate_annotation(tree, ann);
    rec.record(
        Suite::GeneratorValid,
        violations.iter().map(ToString::to_string).collect(),
    );
    let leaves = tree.num_leaves();
    let Ok(u) = build_umatrix(tree, ann) else {
        return InstanceReport {
            leaves,
            singular: false,
            results: rec.results,
        };
    };
    builder_suites(&u, &mut rec);

    let Ok(inverse) = invert_oracle(&u.entries) else {
        return InstanceReport {
            leaves,
            singular: true,
            results: rec.results,
        };
    };
    inverse_suites(&u, &inverse, opts, &mut rec);
    root_suites(&u, &inverse, &mut rec);
    link_suites(&u, &inverse, &mut rec);
    InstanceReport {
        leaves,
        singular: false,
        results: rec.results,
    }
}

fn name_of(tree: &DyadicTree, t: NodeId) -> String {
    tree.name(t).to_string()
}

fn tree_suites(tree: &DyadicTree, rec: &mut Recorder) {
    let root = tree.root();
    let mut geodesic = Vec::new();
    for &i in tree.leaf_order() {
        let edges = tree.geodesic_edges(i, root);
        geodesic.extend(check(edges.len() == tree.depth(i), || {
            format!(
                "leaf {}: {} edges at depth {}",
                name_of(tree, i),
                edges.len(),
                tree.depth(i)
            )
        }));
        geodesic.extend(check(
            edges.iter().all(|e| tree.is_ancestor_or_self(e.parent, i)),
            || {
                format!(
                    "leaf {}: geodesic edge off the ancestor path",
                    name_of(tree, i)
                )
            },
        ));
    }
    rec.record(Suite::TreeGeodesic, geodesic);

    let mut lca = Vec::new();
    let nodes: Vec<NodeId> = tree.nodes().collect();
    for &a in &nodes {
        lca.extend(check(tree.lca(a, a) == a, || {
            format!("lca({0},{0}) is not {0}", name_of(tree, a))
        }));
        for &b in &nodes {
            let l = tree.lca(a, b);
            lca.extend(check(l == tree.lca(b, a), || {
                format!("lca not commutative at {}, {}", a.0, b.0)
            }));
            lca.extend(check(
                tree.is_ancestor_or_self(l, a) && tree.is_ancestor_or_self(l, b),
                || {
                    format!(
                        "lca({}, {}) is not a common ancestor",
                        name_of(tree, a),
                        name_of(tree, b)
                    )
                },
            ));
        }
    }
    rec.record(Suite::TreeLca, lca);

    let mut partition = Vec::new();
    let mut spine = Vec::new();
    for t in tree.internal_nodes() {
        let (m, p) = tree.children(t).expect("internal");
        let joined: Vec<NodeId> = tree
            .leaves_below(m)
            .iter()
            .chain(tree.leaves_below(p))
            .copied()
            .collect();
        partition.extend(check(joined == tree.leaves_below(t), || {
            format!("leaves below {} are not minus then plus", name_of(tree, t))
        }));
        if tree.on_spine(t) {
            spine.extend(check(
                tree.leaves_below(p).contains(&tree.fixed_leaf()),
                || {
                    format!(
                        "fixed leaf not below the plus child of spine node {}",
                        name_of(tree, t)
                    )
                },
            ));
        }
    }
    rec.record(Suite::TreePartition, partition);
    rec.record(Suite::TreeSpine, spine);
}

fn builder_suites(u: &UMatrix, rec: &mut Recorder) {
    let m = &u.entries;
    let size = u.size();
    let tree = &u.tree;

    let mut ultra = Vec::new();
    for i in 0..size {
        for j in 0..size {
            for k in 0..size {
                if m[(i, j)] < m[(i, k)].clone().min(m[(k, j)].clone()) {
                    ultra.push(format!("U[{i},{j}] < min(U[{i},{k}], U[{k},{j}])"));
                }
            }
        }
    }
    rec.record(Suite::Ultrametric, ultra);

    let mut split = Vec::new();
    if let Some((minus, plus)) = tree.children(tree.root()) {
        let (j, k) = (tree.leaf_range(minus), tree.leaf_range(plus));
        let alpha = u.annotation.alpha(tree.root());
        for a in j.clone() {
            for b in k.clone() {
                split.extend(check(m[(a, b)] == *alpha, || {
                    format!("U[{a},{b}] differs from alpha at the root")
                }));
                split.extend(check(m[(b, a)] == m[(b, size - 1)], || {
                    format!("U[{b},{a}] differs from the last column of the plus block")
                }));
            }
        }
    }
    rec.record(Suite::RootSplit, split);

    let last = size - 1;
    rec.record(
        Suite::LastRow,
        (0..size)
            .filter(|&j| m[(last, j)] != m[(last, last)])
            .map(|j| format!("U[n,{j}] differs from U_nn"))
            .collect(),
    );

    let mut spine = Vec::new();
    let mut off = Vec::new();
    for t in tree.nodes() {
        let r = restrict(u, t);
        let (sub, map) = tree.subtree(t);
        let sub_ann = u.annotation.restricted(&map);
        if tree.on_spine(t) {
            match build_umatrix(&sub, &sub_ann) {
                Ok(b) => spine.extend(check(
                    b.entries == r.entries && r.kind == MatrixKind::FixedLeaf,
                    || {
                        format!(
                            "restriction at {} differs from the subtree build",
                            name_of(tree, t)
                        )
                    },
                )),
                Err(e) => spine.push(format!(
                    "subtree at {} does not build: {e}",
                    name_of(tree, t)
                )),
            }
        } else {
            let g = entries_by_rule(&sub, &sub_ann, MatrixKind::Generalized);
            off.extend(check(
                g == r.entries && r.kind == MatrixKind::Generalized,
                || {
                    format!(
                        "restriction at {} differs from the generalized subtree rule",
                        name_of(tree, t)
                    )
                },
            ));
        }
    }
    rec.record(Suite::RestrictSpine, spine);
    rec.record(Suite::RestrictOffSpine, off);
}

fn inverse_suites(u: &UMatrix, inverse: &RationalMatrix, opts: &CheckOptions, rec: &mut Recorder) {
    let size = u.size();
    let last = size - 1;
    let pot = potentials(inverse);

    let mut mm = Vec::new();
    for ((i, j), v) in inverse.entries() {
        if i == j && !v.is_positive() {
            mm.push(format!(
                "inverse diagonal ({i},{i}) = {} is not positive",
                format_rational(v)
            ));
        }
        if i != j && v.is_positive() {
            mm.push(format!(
                "inverse entry ({i},{j}) = {} is positive",
                format_rational(v)
            ));
        }
    }
    for (j, v) in pot.nu.iter().enumerate() {
        mm.extend(check(!v.is_negative(), || {
            format!("column sum {j} = {} is negative", format_rational(v))
        }));
    }
    rec.record(Suite::MMatrix, mm);

    let inv_unn = Rational::one() / &u.entries[(last, last)];
    let mut p = Vec::new();
    for (j, v) in pot.nu.iter().enumerate() {
        let want = if j == last {
            inv_unn.clone()
        } else {
            Rational::zero()
        };
        p.extend(check(*v == want, || {
            format!(
                "nu[{j}] = {}, expected {}",
                format_rational(v),
                format_rational(&want)
            )
        }));
    }
    for (i, v) in pot.mu[..last].iter().enumerate() {
        p.extend(check(!v.is_negative(), || {
            format!("mu[{i}] = {} is negative", format_rational(v))
        }));
    }
    p.extend(check(pot.mu_bar == inv_unn, || {
        format!("mu_bar = {} is not 1/U_nn", format_rational(&pot.mu_bar))
    }));
    rec.record(Suite::Potentials, p);

    if size >= 2 {
        let s = match schur_blocks(u) {
            Ok(b) => {
                let mut f = Vec::new();
                f.extend(check(b.assemble() == *inverse, || {
                    "assembled blocks differ from the inverse".into()
                }));
                f.extend(check(b.denominator.is_positive(), || {
                    format!(
                        "1 - alpha mu_bar_J = {} is not positive",
                        format_rational(&b.denominator)
                    )
                }));
                f
            }
            Err(e) => vec![format!("block formula failed: {e}")],
        };
        rec.record(Suite::Schur, s);
        let mu = match verify_mu_recursion(u) {
            Ok(r) => r.mismatches,
            Err(e) => vec![format!("mu recursion failed: {e}")],
        };
        rec.record(Suite::MuRecursion, mu);
    }

    let singular_blocks = u
        .tree
        .nodes()
        .filter(|&t| invert_oracle(&restrict(u, t).entries).is_err())
        .map(|t| format!("restriction at {} is singular", name_of(&u.tree, t)))
        .collect();
    rec.record(Suite::RestrictionsNonsingular, singular_blocks);

    let k = match kernel(inverse, None) {
        Ok(k) => k,
        Err(e) => {
            rec.record(Suite::Kernel, vec![e.to_string()]);
            return;
        }
    };
    let mut kf = Vec::new();
    kf.extend(check(k.is_nonnegative(), || {
        "kernel has a negative entry".into()
    }));
    kf.extend(check(k.is_column_substochastic(), || {
        "a column sum of the kernel exceeds one".into()
    }));
    rec.record(Suite::Kernel, kf);

    let doubled = &k.eta * Rational::from_integer(2.into());
    let mut eta = Vec::new();
    for candidate in [
        k.clone(),
        kernel(inverse, Some(&doubled)).expect("larger eta is admissible"),
    ] {
        for ((i, j), v) in candidate.p.entries() {
            if i != j && v.is_positive() != inverse[(i, j)].is_negative() {
                eta.push(format!(
                    "eta = {}: kernel sign at ({i},{j}) disagrees",
                    format_rational(&candidate.eta)
                ));
            }
        }
    }
    rec.record(Suite::EtaInvariance, eta);

    if size <= opts.neumann_max_leaves {
        let n = match neumann_check(u, &k, opts.neumann_terms) {
            Ok(r) => r.failures,
            Err(e) => vec![e.to_string()],
        };
        rec.record(Suite::Neumann, n);
    }
}

fn positive_set(tree: &DyadicTree, node: NodeId, values: &[Rational]) -> BTreeSet<NodeId> {
    tree.leaves_below(node)
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_positive())
        .map(|(&i, _)| i)
        .collect()
}

fn names(tree: &DyadicTree, s: &BTreeSet<NodeId>) -> String {
    let v: Vec<&str> = s.iter().map(|&t| tree.name(t)).collect();
    format!("{{{}}}", v.join(","))
}

fn root_suites(u: &UMatrix, inverse: &RationalMatrix, rec: &mut Recorder) {
    let tree = &u.tree;
    let sets = structure_sets(tree, &u.annotation, u.kind);
    let root = tree.root();
    let n = tree.fixed_leaf();
    let pot = potentials(inverse);
    let last = u.size() - 1;

    let mut top = Vec::new();
    let mut identity = Vec::new();
    match exit_of_n(u) {
        Ok(exit) => {
            let mut roots = roots_structural(tree, &sets, root).decided;
            if exit.n_exiting {
                roots.insert(n);
            }
            let oracle = positive_set(tree, root, &pot.mu);
            top.extend(check(roots == oracle, || {
                format!(
                    "structural roots {} vs positive mu {}",
                    names(tree, &roots),
                    names(tree, &oracle)
                )
            }));
            let row_sum = &pot.mu[last];
            identity.extend(check(*row_sum == &exit.lhs - &exit.rhs, || {
                format!(
                    "last row sum {} differs from {} - {}",
                    format_rational(row_sum),
                    format_rational(&exit.lhs),
                    format_rational(&exit.rhs)
                )
            }));
        }
        Err(e) => identity.push(format!("exit test failed: {e}")),
    }
    rec.record(Suite::Roots, top);
    rec.record(Suite::ExitIdentity, identity);

    let top_t = roots_transpose(tree, &sets, root);
    rec.record(
        Suite::TransposeTop,
        check(top_t == BTreeSet::from([n]), || {
            format!("transpose roots at the top are {}", names(tree, &top_t))
        })
        .into_iter()
        .collect(),
    );

    let mut every = Vec::new();
    let mut every_t = Vec::new();
    let mut gu = Vec::new();
    let mut literal = Vec::new();
    for t in tree.nodes() {
        let r = restrict(u, t);
        let Ok(rinv) = invert_oracle(&r.entries) else {
            continue;
        };
        let rpot = potentials(&rinv);
        let oracle_mu = positive_set(tree, t, &rpot.mu);
        let oracle_nu = positive_set(tree, t, &rpot.nu);

        let structural = roots_structural(tree, &sets, t);
        let mut want = oracle_mu.clone();
        if let Some(p) = structural.pending {
            want.remove(&p);
        }
        every.extend(check(structural.decided == want, || {
            format!(
                "at {}: structural roots {} vs positive mu {}",
                name_of(tree, t),
                names(tree, &structural.decided),
                names(tree, &want)
            )
        }));
        let lit = roots_structural_with(tree, &sets, t, PathReading::FromRoot).decided;
        literal.extend(check(lit == want, || {
            format!(
                "at {}: from-root reading gives {} vs {}",
                name_of(tree, t),
                names(tree, &lit),
                names(tree, &want)
            )
        }));

        let rt = roots_transpose(tree, &sets, t);
        every_t.extend(check(rt == oracle_nu, || {
            format!(
                "at {}: transpose roots {} vs positive nu {}",
                name_of(tree, t),
                names(tree, &rt),
                names(tree, &oracle_nu)
            )
        }));

        if r.kind == MatrixKind::Generalized {
            match gu_mass_bounds(&r.entries) {
                Ok(g) => gu.extend(check(g.consistent(), || {
                    format!("mass bounds fail at {}", name_of(tree, t))
                })),
                Err(e) => gu.push(format!("at {}: {e}", name_of(tree, t))),
            }
        }
    }
    rec.record(Suite::RootsEveryNode, every);
    rec.record(Suite::TransposeRoots, every_t);
    rec.record(Suite::GuMass, gu);
    rec.record(Suite::RootsFromRootReading, literal);

    rec.record(
        Suite::Screens,
        match dominance_screens(u) {
            Ok(s) => s.violations,
            Err(e) => vec![e.to_string()],
        },
    );
}

fn link_suites(u: &UMatrix, inverse: &RationalMatrix, rec: &mut Recorder) {
    let tree = &u.tree;
    let leaf_name = |k: usize| tree.name(tree.leaf_order()[k]).to_string();
    let size = u.size();

    let (links, direct) = match (
        link_matrix_with(u, inverse, ColumnRootTest::Transposed),
        link_matrix_with(u, inverse, ColumnRootTest::Direct),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            rec.record(Suite::Links, vec![e.to_string()]);
            return;
        }
    };
    let describe = |t: &crate::links::LinkTrace| {
        format!(
            "({}, {}): structural {} but inverse entry {} ({:?}, {:?} at {})",
            leaf_name(t.i),
            leaf_name(t.j),
            t.linked(),
            format_rational(&inverse[(t.i, t.j)]),
            t.rule,
            t.reason,
            tree.name(t.lca)
        )
    };
    rec.record(
        Suite::Links,
        links.counterexamples.iter().map(describe).collect(),
    );
    rec.record(
        Suite::LinksDirectColumn,
        direct.counterexamples.iter().map(describe).collect(),
    );

    if let Some((minus, plus)) = tree.children(tree.root()) {
        let (j, k) = (tree.leaf_range(minus), tree.leaf_range(plus));
        let uj = restrict(u, minus).entries;
        let uk = restrict(u, plus).entries;
        let alpha = u.annotation.alpha(tree.root());
        let neg = |m: &RationalMatrix, a: usize, b: usize| m[(a, b)].is_negative();

        let mut minus_block = Vec::new();
        let mut plus_block = Vec::new();
        let mut cross = Vec::new();
        match (invert_oracle(&uj), invert_oracle(&uk)) {
            (Ok(ij), Ok(ik)) => {
                for a in j.clone() {
                    for b in j.clone().filter(|&b| b != a) {
                        let want = neg(&ij, a, b) && u.entries[(a, b)] > *alpha;
                        minus_block.extend(check(neg(inverse, a, b) == want, || {
                            format!("minus block ({}, {})", leaf_name(a), leaf_name(b))
                        }));
                    }
                }
                for a in k.clone() {
                    for b in k.clone().filter(|&b| b != a) {
                        let (la, lb) = (a - k.start, b - k.start);
                        plus_block.extend(check(neg(inverse, a, b) == neg(&ik, la, lb), || {
                            format!("plus block ({}, {})", leaf_name(a), leaf_name(b))
                        }));
                    }
                }
                let pj = potentials(&ij);
                let last = size - 1;
                for a in j.clone() {
                    for b in k.clone() {
                        if neg(inverse, a, b) && (b != last || !pj.mu[a].is_positive()) {
                            cross.push(format!(
                                "upper-right link ({}, {})",
                                leaf_name(a),
                                leaf_name(b)
                            ));
                        }
                        if neg(inverse, b, a) && (b != last || !pj.nu[a].is_positive()) {
                            cross.push(format!(
                                "lower-left link ({}, {})",
                                leaf_name(b),
                                leaf_name(a)
                            ));
                        }
                    }
                }
            }
            _ => minus_block.push("root blocks are singular".into()),
        }
        rec.record(Suite::LinksMinusBlock, minus_block);
        rec.record(Suite::LinksPlusBlock, plus_block);
        rec.record(Suite::CrossSplit, cross);
    }

    let pattern = zero_pattern(tree, &u.annotation);
    let found = check_zero_pattern(&pattern, inverse);
    let pos = |(a, b): (usize, usize)| format!("({}, {})", leaf_name(a), leaf_name(b));
    rec.record(
        Suite::ZeroBlocks,
        found.zero_violations.iter().map(|&e| pos(e)).collect(),
    );
    rec.record(
        Suite::Triangular,
        found
            .triangular_violations
            .iter()
            .map(|&e| pos(e))
            .collect(),
    );
    let (explained, unexplained): (Vec<_>, Vec<_>) = found
        .nonzero_failures
        .iter()
        .partition(|&&e| zero_split_value_explains(u, &pattern, e));
    rec.record(
        Suite::Nonzero,
        unexplained.into_iter().map(|&e| pos(e)).collect(),
    );
    rec.record(
        Suite::NonzeroExplained,
        explained.into_iter().map(|&e| pos(e)).collect(),
    );
}

/// A predicted-nonzero entry in the last block row or column vanishes when
/// the spine node owning the other block has `alpha = 0`.
pub fn zero_split_value_explains(
    u: &UMatrix,
    pattern: &crate::links::BlockPattern,
    (a, b): (usize, usize),
) -> bool {
    let fixed = u.size() - 1;
    let other = match (a == fixed, b == fixed) {
        (true, false) => b,
        (false, true) => a,
        _ => return false,
    };
    pattern
        .blocks
        .iter()
        .zip(&pattern.block_nodes)
        .find(|(range, _)| range.contains(&other))
        .and_then(|(_, node)| *node)
        .is_some_and(|spine_node| u.annotation.alpha(spine_node).is_zero())
}

/// Smallest spine subtree of a failing instance that still fails. Spine
/// subtrees keep the fixed leaf, so they are valid instances themselves.
pub fn minimize(
    tree: &DyadicTree,
    ann: &Annotation,
    opts: &CheckOptions,
) -> (DyadicTree, Annotation) {
    let mut spine = tree.spine();
    spine.reverse();
    for t in spine {
        let (sub, map) = tree.subtree(t);
        let sub_ann = ann.restricted(&map);
        let report = check_instance(&sub, &sub_ann, opts);
        if !report.ok() {
            return (sub, sub_ann);
        }
    }
    (tree.clone(), ann.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{example_instance, random_instance, Strictness};

    #[test]
    fn example_passes_every_suite() {
        let (t, a) = example_instance();
        let report = check_instance(&t, &a, &CheckOptions::default());
        assert!(!report.singular);
        let bad: Vec<_> = report.violations().collect();
        assert!(bad.is_empty(), "{bad:?}");
        // The example distinguishes the two column tests.
        assert!(!report.result(Suite::LinksDirectColumn).unwrap().passed());
    }

    #[test]
    fn random_instances_pass() {
        for seed in 0..40 {
            for strictness in [Strictness::Strict, Strictness::Lax] {
                let (t, a) = random_instance(seed, 7, strictness);
                let report = check_instance(&t, &a, &CheckOptions::default());
                let bad: Vec<_> = report.violations().collect();
                assert!(bad.is_empty(), "seed {seed} {strictness:?}: {bad:?}");
            }
        }
    }

    #[test]
    fn every_suite_has_a_distinct_name() {
        let names: BTreeSet<_> = Suite::ALL.iter().map(|s| s.name()).collect();
        assert_eq!(names.len(), Suite::ALL.len());
    }
}

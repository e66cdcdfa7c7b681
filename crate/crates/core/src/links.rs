//! Links of the kernel and the block zero pattern of `U⁻¹`.
//!
//! A pair `(i, j)` with `i ≠ j` is a link when `(U⁻¹)_ij < 0`. The structural
//! test looks only at the tree, the annotation and the structure sets. Leaf
//! indices are positions in leaf order, `0..size`.

use std::collections::BTreeSet;
use std::ops::Range;

use num_traits::{Signed, Zero};

use crate::builder::{Annotation, MatrixKind, UMatrix};
use crate::error::{Error, Result};
use crate::inverse::invert_oracle;
use crate::matrix::RationalMatrix;
use crate::rational::Rational;
use crate::roots::{roots_structural, roots_transpose, structure_sets, StructureSets};
use crate::tree::{DyadicTree, NodeId, TreeEdge};

/// `(U⁻¹)_ij < 0`, read off an already inverted matrix.
pub fn link_oracle(inverse: &RationalMatrix, i: usize, j: usize) -> Result<bool> {
    let size = inverse.rows();
    if i >= size || j >= size {
        return Err(Error::IndexOutOfRange(i, j, size));
    }
    Ok(i != j && inverse[(i, j)].is_negative())
}

/// Which root set the column index is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnRootTest {
    /// Roots of the transposed kernel. Agrees with the exact inverse.
    #[default]
    Transposed,
    /// Roots of the kernel itself, on both sides.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkRule {
    /// `lca` on the spine, row in its minus subtree.
    SpineRowMinus,
    /// `lca` on the spine, row in its plus subtree.
    SpineRowPlus,
    /// `lca` off the spine.
    OffSpine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkReason {
    Linked,
    ColumnNotFixedLeaf,
    RowNotFixedLeaf,
    SplitValueZero,
    RowNotRoot(NodeId),
    ColumnNotRoot(NodeId),
    /// `U_ij ≤ alpha_{L1}`.
    AtSpineLevel,
    /// `U_ij = alpha_L` and the edge out of an equal-valued ancestor toward
    /// the pair is blocked.
    ChainBlocked(TreeEdge),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkTrace {
    pub i: usize,
    pub j: usize,
    pub lca: NodeId,
    /// Nearest spine ancestor of `lca` (itself when on the spine).
    pub spine_anchor: NodeId,
    pub rule: LinkRule,
    pub reason: LinkReason,
    pub u_ij: Rational,
    pub alpha_lca: Rational,
    pub alpha_anchor: Rational,
}

impl LinkTrace {
    pub fn linked(&self) -> bool {
        self.reason == LinkReason::Linked
    }
}

/// Structural link test for a fixed-leaf matrix.
pub struct LinkAnalyzer<'a> {
    u: &'a UMatrix,
    sets: StructureSets,
    column_test: ColumnRootTest,
}

impl<'a> LinkAnalyzer<'a> {
    pub fn new(u: &'a UMatrix) -> Self {
        Self::with_column_test(u, ColumnRootTest::Transposed)
    }

    pub fn with_column_test(u: &'a UMatrix, column_test: ColumnRootTest) -> Self {
        let sets = structure_sets(&u.tree, &u.annotation, u.kind);
        LinkAnalyzer {
            u,
            sets,
            column_test,
        }
    }

    pub fn sets(&self) -> &StructureSets {
        &self.sets
    }

    fn tree(&self) -> &DyadicTree {
        &self.u.tree
    }

    fn ann(&self) -> &Annotation {
        &self.u.annotation
    }

    fn row_root(&self, side: NodeId, leaf: NodeId) -> bool {
        roots_structural(self.tree(), &self.sets, side)
            .decided
            .contains(&leaf)
    }

    fn column_root(&self, side: NodeId, leaf: NodeId) -> bool {
        match self.column_test {
            ColumnRootTest::Transposed => {
                roots_transpose(self.tree(), &self.sets, side).contains(&leaf)
            }
            ColumnRootTest::Direct => self.row_root(side, leaf),
        }
    }

    /// Decides whether `(i, j)` is a link and records why.
    pub fn link_structural(&self, i: usize, j: usize) -> Result<LinkTrace> {
        let size = self.u.size();
        if i >= size || j >= size || i == j {
            return Err(Error::IndexOutOfRange(i, j, size));
        }
        if self.u.kind != MatrixKind::FixedLeaf {
            return Err(Error::DimensionMismatch(
                "link test applies to fixed-leaf matrices only".into(),
            ));
        }
        let tree = self.tree();
        let ann = self.ann();
        let (li, lj) = (tree.leaf_order()[i], tree.leaf_order()[j]);
        let n = tree.fixed_leaf();
        let lca = tree.lca(li, lj);
        let (minus, plus) = tree
            .children(lca)
            .expect("lca of distinct leaves is internal");
        let anchor = tree.lca(lca, n);
        let u_ij = self.u.entries[(i, j)].clone();
        let alpha_lca = ann.alpha(lca).clone();
        let alpha_anchor = ann.alpha(anchor).clone();
        let row_in_minus = tree.is_ancestor_or_self(minus, li);

        let (rule, reason) = if tree.on_spine(lca) {
            if row_in_minus {
                let reason = if lj != n {
                    LinkReason::ColumnNotFixedLeaf
                } else if alpha_lca.is_zero() {
                    LinkReason::SplitValueZero
                } else if !self.row_root(minus, li) {
                    LinkReason::RowNotRoot(minus)
                } else {
                    LinkReason::Linked
                };
                (LinkRule::SpineRowMinus, reason)
            } else {
                let reason = if li != n {
                    LinkReason::RowNotFixedLeaf
                } else if !self.column_root(minus, lj) {
                    LinkReason::ColumnNotRoot(minus)
                } else {
                    LinkReason::Linked
                };
                (LinkRule::SpineRowPlus, reason)
            }
        } else {
            let side = |leaf| {
                if tree.is_ancestor_or_self(minus, leaf) {
                    minus
                } else {
                    plus
                }
            };
            let reason = if !self.row_root(side(li), li) {
                LinkReason::RowNotRoot(side(li))
            } else if !self.column_root(side(lj), lj) {
                LinkReason::ColumnNotRoot(side(lj))
            } else if u_ij <= alpha_anchor {
                LinkReason::AtSpineLevel
            } else if u_ij > alpha_lca {
                LinkReason::Linked
            } else {
                self.chain_verdict(lca, anchor, li)
            };
            (LinkRule::OffSpine, reason)
        };
        Ok(LinkTrace {
            i,
            j,
            lca,
            spine_anchor: anchor,
            rule,
            reason,
            u_ij,
            alpha_lca,
            alpha_anchor,
        })
    }

    /// Walks the strict ancestors of `lca` up to the minus child of `anchor`.
    /// An ancestor with the same alpha blocks the pair when its edge toward
    /// the pair is in `gamma_t` (minus side) or `gamma` (plus side).
    fn chain_verdict(&self, lca: NodeId, anchor: NodeId, row: NodeId) -> LinkReason {
        let tree = self.tree();
        let ann = self.ann();
        let stop = tree.minus(anchor).expect("spine anchor is internal");
        let mut v = lca;
        while v != stop {
            v = tree.parent(v).expect("stop is an ancestor");
            if ann.alpha(v) != ann.alpha(lca) {
                continue;
            }
            let (m, p) = tree.children(v).expect("internal");
            let (edge, set) = if tree.is_ancestor_or_self(m, row) {
                (
                    TreeEdge {
                        parent: v,
                        child: m,
                    },
                    &self.sets.gamma_t,
                )
            } else {
                (
                    TreeEdge {
                        parent: v,
                        child: p,
                    },
                    &self.sets.gamma,
                )
            };
            if set.contains(&edge) {
                return LinkReason::ChainBlocked(edge);
            }
        }
        LinkReason::Linked
    }
}

/// Convenience wrapper around [`LinkAnalyzer::link_structural`].
pub fn link_structural(u: &UMatrix, i: usize, j: usize) -> Result<LinkTrace> {
    LinkAnalyzer::new(u).link_structural(i, j)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkReport {
    pub structural: Vec<Vec<bool>>,
    pub oracle: Vec<Vec<bool>>,
    /// Pairs where the two verdicts differ, with the structural trace.
    pub counterexamples: Vec<LinkTrace>,
}

impl LinkReport {
    pub fn agrees(&self) -> bool {
        self.counterexamples.is_empty()
    }

    /// Structural links as index pairs in row-major order.
    pub fn links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.structural.iter().enumerate() {
            out.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &l)| l)
                    .map(|(j, _)| (i, j)),
            );
        }
        out
    }
}

/// Structural link matrix checked against the exact inverse.
pub fn link_matrix(u: &UMatrix) -> Result<LinkReport> {
    let inverse = invert_oracle(&u.entries)?;
    link_matrix_with(u, &inverse, ColumnRootTest::Transposed)
}

pub fn link_matrix_with(
    u: &UMatrix,
    inverse: &RationalMatrix,
    column_test: ColumnRootTest,
) -> Result<LinkReport> {
    let size = u.size();
    let analyzer = LinkAnalyzer::with_column_test(u, column_test);
    let mut structural = vec![vec![false; size]; size];
    let mut oracle = vec![vec![false; size]; size];
    let mut counterexamples = Vec::new();
    for i in 0..size {
        for j in (0..size).filter(|&j| j != i) {
            let trace = analyzer.link_structural(i, j)?;
            structural[i][j] = trace.linked();
            oracle[i][j] = link_oracle(inverse, i, j)?;
            if structural[i][j] != oracle[i][j] {
                counterexamples.push(trace);
            }
        }
    }
    Ok(LinkReport {
        structural,
        oracle,
        counterexamples,
    })
}

/// Strictness conditions under which the nonzero part of the pattern is
/// predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrictHypotheses {
    /// `beta_i > beta_t` for every leaf `i` and strict ancestor `t`.
    pub leaf_beta_strict: bool,
    /// `alpha` of the root's minus child exceeds `alpha` of the root.
    pub root_minus_alpha_strict: bool,
    /// `beta_{A⁻} > beta_A` for every internal spine node `A`.
    pub spine_minus_beta_strict: bool,
}

impl StrictHypotheses {
    pub fn all(&self) -> bool {
        self.leaf_beta_strict && self.root_minus_alpha_strict && self.spine_minus_beta_strict
    }
}

/// Block pattern of `U⁻¹` along the spine decomposition.
///
/// The blocks are the minus subtrees of the internal spine nodes, root
/// first, followed by the fixed leaf. With `s` blocks, block `(p, q)` is zero
/// whenever `p ≠ q` and neither is the last block, and diagonal blocks
/// `1..s-1` are lower triangular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPattern {
    pub blocks: Vec<Range<usize>>,
    /// Spine node whose minus subtree forms each block; `None` for the fixed leaf.
    pub block_nodes: Vec<Option<NodeId>>,
    pub predicted_zero: Vec<(usize, usize)>,
    pub predicted_triangular: Vec<usize>,
    pub hypotheses: StrictHypotheses,
    /// Entries (not blocks) predicted nonzero; empty unless every hypothesis holds.
    pub predicted_nonzero: BTreeSet<(usize, usize)>,
}

impl BlockPattern {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
}

pub fn zero_pattern(tree: &DyadicTree, ann: &Annotation) -> BlockPattern {
    let spine = tree.spine();
    let n = tree.fixed_leaf();
    let mut blocks = Vec::new();
    let mut block_nodes = Vec::new();
    for &a in &spine {
        if let Some(m) = tree.minus(a) {
            blocks.push(tree.leaf_range(m));
            block_nodes.push(Some(a));
        }
    }
    blocks.push(tree.leaf_range(n));
    block_nodes.push(None);
    let s = blocks.len();
    let last = s - 1;

    let mut predicted_zero = Vec::new();
    for p in 0..last {
        for q in (0..last).filter(|&q| q != p) {
            predicted_zero.push((p, q));
        }
    }
    let predicted_triangular: Vec<usize> = (1..last).collect();

    let leaf_beta_strict = tree
        .leaf_order()
        .iter()
        .all(|&i| tree.ancestors(i).all(|t| ann.beta(i) > ann.beta(t)));
    let root = tree.root();
    let root_minus_alpha_strict = tree
        .minus(root)
        .is_none_or(|m| ann.alpha(m) > ann.alpha(root));
    let spine_minus_beta_strict = spine
        .iter()
        .all(|&a| tree.minus(a).is_none_or(|m| ann.beta(m) > ann.beta(a)));
    let hypotheses = StrictHypotheses {
        leaf_beta_strict,
        root_minus_alpha_strict,
        spine_minus_beta_strict,
    };

    let mut predicted_nonzero = BTreeSet::new();
    if hypotheses.all() {
        let first = &blocks[0];
        for a in first.clone() {
            for b in first.clone() {
                predicted_nonzero.insert((a, b));
            }
        }
        let fixed = blocks[last].start;
        for block in &blocks[..last] {
            for a in block.clone() {
                predicted_nonzero.insert((a, fixed));
                predicted_nonzero.insert((fixed, a));
            }
        }
        for &p in &predicted_triangular {
            let block = &blocks[p];
            for a in block.clone() {
                for b in block.start..a {
                    predicted_nonzero.insert((a, b));
                }
            }
        }
    }
    BlockPattern {
        blocks,
        block_nodes,
        predicted_zero,
        predicted_triangular,
        hypotheses,
        predicted_nonzero,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternCheck {
    /// Entries inside predicted zero blocks that are nonzero.
    pub zero_violations: Vec<(usize, usize)>,
    /// Entries above the diagonal of a predicted triangular block that are nonzero.
    pub triangular_violations: Vec<(usize, usize)>,
    /// Entries predicted nonzero that are zero.
    pub nonzero_failures: Vec<(usize, usize)>,
}

impl PatternCheck {
    pub fn ok(&self) -> bool {
        self.zero_violations.is_empty()
            && self.triangular_violations.is_empty()
            && self.nonzero_failures.is_empty()
    }
}

pub fn check_zero_pattern(pattern: &BlockPattern, inverse: &RationalMatrix) -> PatternCheck {
    let mut check = PatternCheck::default();
    for &(p, q) in &pattern.predicted_zero {
        for a in pattern.blocks[p].clone() {
            for b in pattern.blocks[q].clone() {
                if !inverse[(a, b)].is_zero() {
                    check.zero_violations.push((a, b));
                }
            }
        }
    }
    for &p in &pattern.predicted_triangular {
        let block = &pattern.blocks[p];
        for a in block.clone() {
            for b in a + 1..block.end {
                if !inverse[(a, b)].is_zero() {
                    check.triangular_violations.push((a, b));
                }
            }
        }
    }
    check.nonzero_failures = pattern
        .predicted_nonzero
        .iter()
        .copied()
        .filter(|&(a, b)| inverse[(a, b)].is_zero())
        .collect();
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_umatrix, example_instance};

    fn example() -> UMatrix {
        let (t, a) = example_instance();
        build_umatrix(&t, &a).unwrap()
    }

    fn named(u: &UMatrix, pairs: &[(usize, usize)]) -> BTreeSet<(String, String)> {
        let name = |k: usize| u.tree.name(u.tree.leaf_order()[k]).to_string();
        pairs.iter().map(|&(i, j)| (name(i), name(j))).collect()
    }

    #[test]
    fn example_links() {
        let u = example();
        let report = link_matrix(&u).unwrap();
        assert!(report.agrees(), "{:?}", report.counterexamples);
        let want: BTreeSet<(String, String)> = [
            ("1", "2"),
            ("2", "1"),
            ("1", "6"),
            ("3", "6"),
            ("4", "3"),
            ("5", "6"),
            ("6", "2"),
            ("6", "4"),
            ("6", "5"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(named(&u, &report.links()), want);
    }

    #[test]
    fn example_traces() {
        let u = example();
        let t = &u.tree;
        let trace = link_structural(&u, 3, 2).unwrap();
        assert_eq!(t.name(trace.lca), "C");
        assert_eq!(t.name(trace.spine_anchor), "B");
        assert_eq!(trace.rule, LinkRule::OffSpine);
        assert!(trace.linked());
        let trace = link_structural(&u, 1, 5).unwrap();
        assert_eq!(trace.rule, LinkRule::SpineRowMinus);
        assert_eq!(trace.reason, LinkReason::RowNotRoot(t.id("A").unwrap()));
        let trace = link_structural(&u, 2, 3).unwrap();
        assert_eq!(trace.reason, LinkReason::AtSpineLevel);
    }

    #[test]
    fn direct_column_test_disagrees_on_example() {
        let u = example();
        let inverse = invert_oracle(&u.entries).unwrap();
        let report = link_matrix_with(&u, &inverse, ColumnRootTest::Direct).unwrap();
        assert!(!report.agrees());
    }

    #[test]
    fn out_of_range() {
        let u = example();
        assert_eq!(
            link_structural(&u, 6, 0).unwrap_err(),
            Error::IndexOutOfRange(6, 0, 6)
        );
        assert!(link_structural(&u, 2, 2).is_err());
        let inverse = invert_oracle(&u.entries).unwrap();
        assert!(link_oracle(&inverse, 0, 9).is_err());
        assert!(!link_oracle(&inverse, 1, 1).unwrap());
    }

    #[test]
    fn example_zero_pattern() {
        let (t, a) = example_instance();
        let u = build_umatrix(&t, &a).unwrap();
        let pattern = zero_pattern(&t, &a);
        assert_eq!(pattern.blocks, vec![0..2, 2..4, 4..5, 5..6]);
        assert_eq!(pattern.predicted_triangular, vec![1, 2]);
        assert_eq!(pattern.predicted_zero.len(), 6);
        let inverse = invert_oracle(&u.entries).unwrap();
        let check = check_zero_pattern(&pattern, &inverse);
        assert!(check.zero_violations.is_empty() && check.triangular_violations.is_empty());
    }
}

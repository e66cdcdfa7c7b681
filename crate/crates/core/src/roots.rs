//! Exiting roots decided from the tree.
//!
//! Two sets of directed edges are built from the annotation. A leaf `i` is an
//! exiting root of the kernel restricted to the subtree at `L` exactly when
//! the path from `L` down to `i` avoids `gamma`; the same holds for the
//! transposed kernel with `gamma_t`. The fixed leaf is the exception: whether
//! it exits is decided by comparing its own mass with a sum over the spine.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::builder::{restrict, validate_annotation, Annotation, MatrixKind, UMatrix};
use crate::error::{Error, Result};
use crate::inverse::{invert_oracle, mass, potentials};
use crate::matrix::RationalMatrix;
use crate::rational::{format_rational, Rational};
use crate::tree::{DyadicTree, NodeId, TreeEdge};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureSets {
    pub gamma: BTreeSet<TreeEdge>,
    pub gamma_t: BTreeSet<TreeEdge>,
    /// For each leaf `i`: ancestors-or-self `L` with `alpha_L = alpha_i`.
    pub n_plus: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// For each leaf `i`: ancestors-or-self `L` with `beta_L = beta_i`.
    pub n_minus: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// Structure sets of a valid annotated tree.
pub fn build_structure_sets(tree: &DyadicTree, ann: &Annotation) -> Result<StructureSets> {
    let violations = validate_annotation(tree, ann);
    if !violations.is_empty() {
        return Err(Error::InvalidAnnotation(violations));
    }
    Ok(structure_sets(tree, ann, MatrixKind::FixedLeaf))
}

/// Structure sets without validation. For [`MatrixKind::Generalized`] no
/// node gets the spine treatment in `gamma_t`.
pub fn structure_sets(tree: &DyadicTree, ann: &Annotation, kind: MatrixKind) -> StructureSets {
    let mut n_plus = BTreeMap::new();
    let mut n_minus = BTreeMap::new();
    for &i in tree.leaf_order() {
        let chain = std::iter::once(i).chain(tree.ancestors(i));
        let (mut plus, mut minus) = (BTreeSet::new(), BTreeSet::new());
        for l in chain {
            if ann.alpha(l) == ann.alpha(i) {
                plus.insert(l);
            }
            if ann.beta(l) == ann.beta(i) {
                minus.insert(l);
            }
        }
        n_plus.insert(i, plus);
        n_minus.insert(i, minus);
    }

    // "exists a leaf i below `side` with L in N(i)".
    let witnessed = |sets: &BTreeMap<NodeId, BTreeSet<NodeId>>, l: NodeId, side: NodeId| {
        tree.leaves_below(side).iter().any(|i| sets[i].contains(&l))
    };

    let mut gamma = BTreeSet::new();
    let mut gamma_t = BTreeSet::new();
    for l in tree.internal_nodes() {
        let (m, p) = tree.children(l).expect("internal");
        let to_minus = TreeEdge {
            parent: l,
            child: m,
        };
        let to_plus = TreeEdge {
            parent: l,
            child: p,
        };
        if witnessed(&n_plus, l, p) {
            gamma.insert(to_minus);
        }
        if witnessed(&n_minus, l, m) {
            gamma.insert(to_plus);
        }
        if kind == MatrixKind::FixedLeaf && tree.on_spine(l) {
            gamma_t.insert(to_minus);
        } else {
            if witnessed(&n_minus, l, p) {
                gamma_t.insert(to_minus);
            }
            if witnessed(&n_plus, l, m) {
                gamma_t.insert(to_plus);
            }
        }
    }
    StructureSets {
        gamma,
        gamma_t,
        n_plus,
        n_minus,
    }
}

/// First edge of the path from `top` down to `leaf` that lies in `set`.
pub fn blocking_edge(
    tree: &DyadicTree,
    set: &BTreeSet<TreeEdge>,
    top: NodeId,
    leaf: NodeId,
) -> Option<TreeEdge> {
    tree.path_down(top, leaf)
        .into_iter()
        .find(|e| set.contains(e))
}

/// Exiting roots of the transposed kernel restricted to the subtree at `node`.
pub fn roots_transpose(tree: &DyadicTree, sets: &StructureSets, node: NodeId) -> BTreeSet<NodeId> {
    tree.leaves_below(node)
        .iter()
        .copied()
        .filter(|&i| blocking_edge(tree, &sets.gamma_t, node, i).is_none())
        .collect()
}

/// Which path the root test walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathReading {
    /// From the analyzed node down to the leaf.
    Local,
    /// From the root of the whole tree down to the leaf, whatever the
    /// analyzed node is.
    FromRoot,
}

/// Root verdicts that follow from `gamma` alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralRoots {
    pub decided: BTreeSet<NodeId>,
    /// The fixed leaf of a spine restriction; its status needs
    /// [`exit_of_n`].
    pub pending: Option<NodeId>,
}

/// Leaves of the subtree at `node` that are exiting roots by the edge test.
///
/// At a spine node the fixed leaf is left pending. Off the spine the
/// restriction has no fixed leaf and every leaf is decided by the edge test.
pub fn roots_structural(tree: &DyadicTree, sets: &StructureSets, node: NodeId) -> StructuralRoots {
    roots_structural_with(tree, sets, node, PathReading::Local)
}

pub fn roots_structural_with(
    tree: &DyadicTree,
    sets: &StructureSets,
    node: NodeId,
    reading: PathReading,
) -> StructuralRoots {
    let pending = tree.on_spine(node).then(|| tree.fixed_leaf());
    let top = match reading {
        PathReading::Local => node,
        PathReading::FromRoot => tree.root(),
    };
    let decided = tree
        .leaves_below(node)
        .iter()
        .copied()
        .filter(|&i| Some(i) != pending)
        .filter(|&i| blocking_edge(tree, &sets.gamma, top, i).is_none())
        .collect();
    StructuralRoots { decided, pending }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitOfN {
    /// `1 / U_nn`.
    pub lhs: Rational,
    /// Sum of the spine terms.
    pub rhs: Rational,
    /// One term per spine node above the fixed leaf, root first.
    pub terms: Vec<(NodeId, Rational)>,
    pub row_dominant: bool,
    pub n_exiting: bool,
}

/// Compares the mass of the fixed leaf with
/// `Σ_{L on spine, L ≠ n} mu_bar(L⁻)(1 − alpha_L mu_bar(L⁺)) / (1 − alpha_L mu_bar(L⁻))`.
/// Block masses come from exact inversion of the restrictions. `lhs − rhs`
/// is the last row sum of `U⁻¹`.
pub fn exit_of_n(u: &UMatrix) -> Result<ExitOfN> {
    if u.kind != MatrixKind::FixedLeaf {
        return Err(Error::DimensionMismatch(
            "exit test applies to fixed-leaf matrices only".into(),
        ));
    }
    let tree = &u.tree;
    let n = tree.fixed_leaf();
    let unn = u.annotation.alpha(n);
    if unn.is_zero() {
        return Err(Error::Singular("U_nn = 0".into()));
    }
    let lhs = Rational::one() / unn;
    let mut rhs = Rational::zero();
    let mut terms = Vec::new();
    for l in tree.spine() {
        let Some((m, p)) = tree.children(l) else {
            break;
        };
        let mass_minus = mass(&restrict(u, m).entries)?;
        let mass_plus = mass(&restrict(u, p).entries)?;
        let alpha = u.annotation.alpha(l);
        let denom = Rational::one() - alpha * &mass_minus;
        if denom.is_zero() {
            return Err(Error::Singular(format!(
                "1 - alpha * mu_bar vanishes at spine node `{}`",
                tree.name(l)
            )));
        }
        let term = &mass_minus * (Rational::one() - alpha * &mass_plus) / denom;
        rhs += &term;
        terms.push((l, term));
    }
    Ok(ExitOfN {
        row_dominant: lhs >= rhs,
        n_exiting: lhs > rhs,
        lhs,
        rhs,
        terms,
    })
}

/// Exiting roots of the restriction at `node`: the edge test, plus the exit
/// test for the fixed leaf when `node` is on the spine.
pub fn exiting_roots(u: &UMatrix, sets: &StructureSets, node: NodeId) -> Result<BTreeSet<NodeId>> {
    let structural = roots_structural(&u.tree, sets, node);
    let mut roots = structural.decided;
    if let Some(n) = structural.pending {
        let sub = restrict(u, node);
        if exit_of_n(&sub)?.n_exiting {
            roots.insert(n);
        }
    }
    Ok(roots)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuMassReport {
    pub mu_bar: Rational,
    /// `U_ii · mu_bar` per index.
    pub products: Vec<Rational>,
    pub max_diagonal: Rational,
    /// Every product is at least one.
    pub all_at_least_one: bool,
    /// `max_diagonal · mu_bar = 1`.
    pub equality: bool,
    /// A column whose entries all equal `max_diagonal`.
    pub constant_column: Option<usize>,
}

impl GuMassReport {
    /// Both bounds hold and the equality case matches the constant column.
    pub fn consistent(&self) -> bool {
        self.all_at_least_one && self.equality == self.constant_column.is_some()
    }
}

/// Mass bounds for a nonsingular generalized block.
pub fn gu_mass_bounds(m: &RationalMatrix) -> Result<GuMassReport> {
    let inverse = invert_oracle(m)?;
    let mu_bar = inverse.total();
    let diag = m.diagonal();
    let products: Vec<Rational> = diag.iter().map(|d| d * &mu_bar).collect();
    let max_diagonal = diag.iter().max().cloned().unwrap_or_else(Rational::zero);
    let constant_column = (0..m.cols()).find(|&j| (0..m.rows()).all(|i| m[(i, j)] == max_diagonal));
    Ok(GuMassReport {
        all_at_least_one: products.iter().all(|p| *p >= Rational::one()),
        equality: &max_diagonal * &mu_bar == Rational::one(),
        mu_bar,
        products,
        max_diagonal,
        constant_column,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceScreens {
    /// Some `i ≠ n` has `U_ii < U_nn`: not row dominant and `n` does not exit.
    pub small_diagonal: bool,
    /// Some `i ≠ n` has `U_ii ≤ U_nn`: `n` does not exit.
    pub weak_dominance: bool,
    /// The last row has the smallest row sum: row and column dominant and
    /// `n` exits.
    pub row_sum_order: bool,
    /// Implications that failed against the exact inverse.
    pub violations: Vec<String>,
}

/// Evaluates the three diagonal screens and checks each implication against
/// the exact potentials and [`exit_of_n`].
pub fn dominance_screens(u: &UMatrix) -> Result<DominanceScreens> {
    let size = u.size();
    let last = size - 1;
    let diag = u.entries.diagonal();
    let unn = &diag[last];
    let small_diagonal = diag[..last].iter().any(|d| d < unn);
    let weak_dominance = diag[..last].iter().any(|d| d <= unn);
    let row_sums = u.entries.row_sums();
    let row_sum_order = row_sums[..last].iter().all(|s| *s >= row_sums[last]);

    let inverse = invert_oracle(&u.entries)?;
    let pot = potentials(&inverse);
    let exit = exit_of_n(u)?;
    let mu_n = &pot.mu[last];
    let mut violations = Vec::new();
    if small_diagonal {
        if !mu_n.is_negative() {
            violations.push(format!(
                "small diagonal but mu_n = {} is not negative",
                format_rational(mu_n)
            ));
        }
        if exit.row_dominant {
            violations.push("small diagonal but the exit inequality holds".into());
        }
    }
    if weak_dominance && mu_n.is_positive() {
        violations.push(format!(
            "weak diagonal screen but mu_n = {} > 0",
            format_rational(mu_n)
        ));
    }
    if row_sum_order {
        if pot.mu.iter().any(Signed::is_negative) || !mu_n.is_positive() {
            violations
                .push("last row sum is smallest but mu is not positive at n / nonnegative".into());
        }
        if pot.nu.iter().any(Signed::is_negative) {
            violations
                .push("last row sum is smallest but some column sum of U⁻¹ is negative".into());
        }
        if !exit.n_exiting {
            violations
                .push("last row sum is smallest but the exit inequality is not strict".into());
        }
    }
    Ok(DominanceScreens {
        small_diagonal,
        weak_dominance,
        row_sum_order,
        violations,
    })
}

/// Why a leaf is or is not an exiting root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RootJustification {
    Blocked(TreeEdge),
    Clear,
    ExitInequality { lhs: Rational, rhs: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootReport {
    pub roots: BTreeSet<NodeId>,
    pub roots_t: BTreeSet<NodeId>,
    pub n_exiting: bool,
    pub row_dominant: bool,
    pub exit: ExitOfN,
    /// Justification of the root verdict per leaf, in leaf order.
    pub justification: Vec<(NodeId, RootJustification)>,
    /// Justification of the transposed verdict per leaf, in leaf order.
    pub justification_t: Vec<(NodeId, RootJustification)>,
}

/// Root analysis of the whole matrix.
pub fn analyze_roots(u: &UMatrix, sets: &StructureSets) -> Result<RootReport> {
    let tree = &u.tree;
    let root = tree.root();
    let n = tree.fixed_leaf();
    let exit = exit_of_n(u)?;
    let mut roots = roots_structural(tree, sets, root).decided;
    if exit.n_exiting {
        roots.insert(n);
    }
    let roots_t = roots_transpose(tree, sets, root);
    let justification = tree
        .leaf_order()
        .iter()
        .map(|&i| {
            let why = if i == n {
                RootJustification::ExitInequality {
                    lhs: exit.lhs.clone(),
                    rhs: exit.rhs.clone(),
                }
            } else {
                blocking_edge(tree, &sets.gamma, root, i)
                    .map_or(RootJustification::Clear, RootJustification::Blocked)
            };
            (i, why)
        })
        .collect();
    let justification_t = tree
        .leaf_order()
        .iter()
        .map(|&i| {
            (
                i,
                blocking_edge(tree, &sets.gamma_t, root, i)
                    .map_or(RootJustification::Clear, RootJustification::Blocked),
            )
        })
        .collect();
    Ok(RootReport {
        roots,
        roots_t,
        n_exiting: exit.n_exiting,
        row_dominant: exit.row_dominant,
        exit,
        justification,
        justification_t,
    })
}

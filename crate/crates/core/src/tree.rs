//! Rooted dyadic trees with a distinguished fixed leaf.
//!
//! Every internal node has a minus child and a plus child. Leaves are kept in
//! in-order (minus subtree before plus subtree), so the leaves below any node
//! form a contiguous range of that order and the fixed leaf is always the
//! last one. Nodes are re-indexed in pre-order from the root, which makes
//! every derived quantity independent of the order the input was given in.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Index of a node inside one [`DyadicTree`]. Only meaningful for the tree
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Directed edge from a node to one of its two children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeEdge {
    pub parent: NodeId,
    pub child: NodeId,
}

/// One node of a tree description, as read from a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub minus: Option<String>,
    pub plus: Option<String>,
}

impl NodeSpec {
    pub fn leaf(id: impl Into<String>) -> Self {
        NodeSpec {
            id: id.into(),
            minus: None,
            plus: None,
        }
    }

    pub fn internal(
        id: impl Into<String>,
        minus: impl Into<String>,
        plus: impl Into<String>,
    ) -> Self {
        NodeSpec {
            id: id.into(),
            minus: Some(minus.into()),
            plus: Some(plus.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicTree {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    children: Vec<Option<(NodeId, NodeId)>>,
    parent: Vec<Option<NodeId>>,
    depth: Vec<usize>,
    leaf_order: Vec<NodeId>,
    leaf_pos: Vec<Option<usize>>,
    span: Vec<Range<usize>>,
    on_spine: Vec<bool>,
    fixed_leaf: NodeId,
}

impl DyadicTree {
    /// Validates a node list and builds the tree rooted at `root`.
    ///
    /// The fixed leaf defaults to the rightmost leaf. A declared fixed leaf
    /// that is not the rightmost one is rejected rather than reordered.
    pub fn new(specs: &[NodeSpec], root: &str, fixed_leaf: Option<&str>) -> Result<Self> {
        let mut by_name: HashMap<&str, &NodeSpec> = HashMap::with_capacity(specs.len());
        for spec in specs {
            if spec.id.is_empty() {
                return Err(Error::MalformedTree("empty node id".into()));
            }
            if by_name.insert(spec.id.as_str(), spec).is_some() {
                return Err(Error::MalformedTree(format!(
                    "duplicate node id `{}`",
                    spec.id
                )));
            }
        }
        for spec in specs {
            match (&spec.minus, &spec.plus) {
                (None, None) => {}
                (Some(m), Some(p)) => {
                    for c in [m, p] {
                        if !by_name.contains_key(c.as_str()) {
                            return Err(Error::MalformedTree(format!(
                                "node `{}` references unknown child `{c}`",
                                spec.id
                            )));
                        }
                    }
                    if m == p {
                        return Err(Error::MalformedTree(format!(
                            "node `{}` uses `{m}` as both children",
                            spec.id
                        )));
                    }
                }
                _ => {
                    return Err(Error::MalformedTree(format!(
                        "node `{}` has exactly one child; dyadic nodes need zero or two",
                        spec.id
                    )))
                }
            }
        }
        if !by_name.contains_key(root) {
            return Err(Error::MalformedTree(format!(
                "root `{root}` is not among the nodes"
            )));
        }

        let mut tree = DyadicTree {
            names: Vec::with_capacity(specs.len()),
            index: HashMap::with_capacity(specs.len()),
            children: Vec::with_capacity(specs.len()),
            parent: Vec::with_capacity(specs.len()),
            depth: Vec::with_capacity(specs.len()),
            leaf_order: Vec::new(),
            leaf_pos: Vec::with_capacity(specs.len()),
            span: Vec::with_capacity(specs.len()),
            on_spine: Vec::with_capacity(specs.len()),
            fixed_leaf: NodeId(0),
        };

        // Pre-order walk; revisiting a name means a cycle or a shared child.
        let mut seen: HashSet<&str> = HashSet::with_capacity(specs.len());
        let mut stack: Vec<(&str, Option<NodeId>, usize)> = vec![(root, None, 0)];
        let mut pending_children: Vec<(NodeId, &str, &str)> = Vec::new();
        while let Some((name, parent, depth)) = stack.pop() {
            if !seen.insert(name) {
                return Err(Error::MalformedTree(format!(
                    "node `{name}` is reachable twice (cycle or shared child)"
                )));
            }
            let id = NodeId(tree.names.len());
            tree.names.push(name.to_string());
            tree.index.insert(name.to_string(), id);
            tree.children.push(None);
            tree.parent.push(parent);
            tree.depth.push(depth);
            tree.leaf_pos.push(None);
            tree.span.push(0..0);
            tree.on_spine.push(false);
            let spec = by_name[name];
            if let (Some(m), Some(p)) = (&spec.minus, &spec.plus) {
                pending_children.push((id, m.as_str(), p.as_str()));
                stack.push((p.as_str(), Some(id), depth + 1));
                stack.push((m.as_str(), Some(id), depth + 1));
            }
        }
        if seen.len() != specs.len() {
            let mut missing: Vec<&str> = specs
                .iter()
                .map(|s| s.id.as_str())
                .filter(|s| !seen.contains(s))
                .collect();
            missing.sort_unstable();
            return Err(Error::MalformedTree(format!(
                "nodes not reachable from root `{root}`: {}",
                missing.join(", ")
            )));
        }
        for (id, m, p) in pending_children {
            tree.children[id.0] = Some((tree.index[m], tree.index[p]));
        }

        tree.assign_leaf_order();
        let rightmost = *tree
            .leaf_order
            .last()
            .expect("a tree has at least one leaf");
        tree.fixed_leaf = rightmost;
        if let Some(declared) = fixed_leaf {
            let id = tree.id(declared)?;
            if id != rightmost {
                return Err(Error::FixedLeafNotRightmost {
                    declared: declared.to_string(),
                    rightmost: tree.name(rightmost).to_string(),
                });
            }
        }
        let mut t = tree.root();
        tree.on_spine[t.0] = true;
        while let Some((_, plus)) = tree.children[t.0] {
            t = plus;
            tree.on_spine[t.0] = true;
        }
        Ok(tree)
    }

    fn assign_leaf_order(&mut self) {
        fn visit(tree: &mut DyadicTree, t: NodeId) {
            let start = tree.leaf_order.len();
            match tree.children[t.0] {
                None => {
                    tree.leaf_pos[t.0] = Some(start);
                    tree.leaf_order.push(t);
                }
                Some((m, p)) => {
                    visit(tree, m);
                    visit(tree, p);
                }
            }
            tree.span[t.0] = start..tree.leaf_order.len();
        }
        self.leaf_order.clear();
        visit(self, self.root());
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn fixed_leaf(&self) -> NodeId {
        self.fixed_leaf
    }

    pub fn num_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_order.len()
    }

    /// All nodes in pre-order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len()).map(NodeId)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&t| !self.is_leaf(t))
    }

    pub fn id(&self, name: &str) -> Result<NodeId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, t: NodeId) -> &str {
        &self.names[t.0]
    }

    pub fn is_leaf(&self, t: NodeId) -> bool {
        self.children[t.0].is_none()
    }

    pub fn children(&self, t: NodeId) -> Option<(NodeId, NodeId)> {
        self.children[t.0]
    }

    pub fn minus(&self, t: NodeId) -> Option<NodeId> {
        self.children[t.0].map(|c| c.0)
    }

    pub fn plus(&self, t: NodeId) -> Option<NodeId> {
        self.children[t.0].map(|c| c.1)
    }

    pub fn parent(&self, t: NodeId) -> Option<NodeId> {
        self.parent[t.0]
    }

    pub fn depth(&self, t: NodeId) -> usize {
        self.depth[t.0]
    }

    /// Leaves in the in-order (minus before plus) order.
    pub fn leaf_order(&self) -> &[NodeId] {
        &self.leaf_order
    }

    /// Position of a leaf in [`leaf_order`](Self::leaf_order).
    pub fn leaf_index(&self, leaf: NodeId) -> Option<usize> {
        self.leaf_pos[leaf.0]
    }

    /// Range of leaf positions covered by the subtree at `t`.
    pub fn leaf_range(&self, t: NodeId) -> Range<usize> {
        self.span[t.0].clone()
    }

    /// Leaves of the subtree rooted at `t`, in leaf order.
    pub fn leaves_below(&self, t: NodeId) -> &[NodeId] {
        &self.leaf_order[self.leaf_range(t)]
    }

    /// Whether leaf (or node) `t` lies in the subtree rooted at `ancestor`,
    /// i.e. `ancestor ⪯ t`.
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, t: NodeId) -> bool {
        let a = &self.span[ancestor.0];
        let b = &self.span[t.0];
        a.start <= b.start && b.end <= a.end && self.depth[ancestor.0] <= self.depth[t.0]
    }

    /// Closest common ancestor `a ∧ b`.
    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        while self.depth[a.0] > self.depth[b.0] {
            a = self.parent[a.0].expect("non-root has a parent");
        }
        while self.depth[b.0] > self.depth[a.0] {
            b = self.parent[b.0].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a.0].expect("non-root has a parent");
            b = self.parent[b.0].expect("non-root has a parent");
        }
        a
    }

    /// Edges of the path from `ancestor` down to `t`, top first. Empty when
    /// `t == ancestor`. Panics if `ancestor` is not an ancestor of `t`.
    pub fn path_down(&self, ancestor: NodeId, t: NodeId) -> Vec<TreeEdge> {
        let mut edges = Vec::with_capacity(self.depth[t.0].saturating_sub(self.depth[ancestor.0]));
        let mut v = t;
        while v != ancestor {
            let p = self.parent[v.0].unwrap_or_else(|| {
                panic!(
                    "`{}` is not an ancestor of `{}`",
                    self.name(ancestor),
                    self.name(t)
                )
            });
            edges.push(TreeEdge {
                parent: p,
                child: v,
            });
            v = p;
        }
        edges.reverse();
        edges
    }

    /// Edge set of the unique path between `a` and `b`, every edge oriented
    /// parent to child.
    pub fn geodesic_edges(&self, a: NodeId, b: NodeId) -> BTreeSet<TreeEdge> {
        let top = self.lca(a, b);
        self.path_down(top, a)
            .into_iter()
            .chain(self.path_down(top, b))
            .collect()
    }

    /// Strict ancestors of `t`, nearest first.
    pub fn ancestors(&self, t: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent[t.0], move |v| self.parent[v.0])
    }

    /// The path from the root to the fixed leaf, root first.
    pub fn spine(&self) -> Vec<NodeId> {
        let mut out = vec![self.root()];
        while let Some(p) = self.plus(*out.last().unwrap()) {
            out.push(p);
        }
        out
    }

    pub fn on_spine(&self, t: NodeId) -> bool {
        self.on_spine[t.0]
    }

    /// The subtree rooted at `t` as a tree of its own (its fixed leaf is its
    /// rightmost leaf), together with the map from new node ids to ids in
    /// `self`.
    pub fn subtree(&self, t: NodeId) -> (DyadicTree, Vec<NodeId>) {
        let mut specs = Vec::new();
        let mut stack = vec![t];
        while let Some(v) = stack.pop() {
            match self.children[v.0] {
                None => specs.push(NodeSpec::leaf(self.name(v))),
                Some((m, p)) => {
                    specs.push(NodeSpec::internal(self.name(v), self.name(m), self.name(p)));
                    stack.push(p);
                    stack.push(m);
                }
            }
        }
        let sub = DyadicTree::new(&specs, self.name(t), None)
            .expect("a subtree of a valid tree is valid");
        let map = sub.nodes().map(|v| self.index[sub.name(v)]).collect();
        (sub, map)
    }

    /// Node list describing this tree, in pre-order.
    pub fn to_specs(&self) -> Vec<NodeSpec> {
        self.nodes()
            .map(|v| match self.children[v.0] {
                None => NodeSpec::leaf(self.name(v)),
                Some((m, p)) => NodeSpec::internal(self.name(v), self.name(m), self.name(p)),
            })
            .collect()
    }
}

impl fmt::Display for TreeEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.parent.0, self.child.0)
    }
}

/// The tree of the worked six-leaf example: `I → (A, B)`, `A → (1, 2)`,
/// `B → (C, D)`, `C → (3, 4)`, `D → (5, 6)`.
pub fn example_tree_specs() -> Vec<NodeSpec> {
    vec![
        NodeSpec::internal("I", "A", "B"),
        NodeSpec::internal("A", "1", "2"),
        NodeSpec::internal("B", "C", "D"),
        NodeSpec::internal("C", "3", "4"),
        NodeSpec::internal("D", "5", "6"),
        NodeSpec::leaf("1"),
        NodeSpec::leaf("2"),
        NodeSpec::leaf("3"),
        NodeSpec::leaf("4"),
        NodeSpec::leaf("5"),
        NodeSpec::leaf("6"),
    ]
}

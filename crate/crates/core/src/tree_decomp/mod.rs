//! Tree-decompositions and S-trees over term graphs: uniform schemes with
//! provenance labels, exhaustive truncation verification, the normal-tree
//! expansion and squeeze constructions, display checking, and the two
//! decomposition pipelines.

mod build;
mod display;

pub use build::{expansion, squeeze, td_from_normal_tree, theorem5_pipeline, Theorem5Report};
pub use display::{
    displaying_stree, strictly_separating, theorem7_decomposition, tree_rank, verify_display,
    DisplayMode, DisplayReport, Theorem7Report,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::boundary::CritPattern;
use crate::term_graphs::{
    AddrPattern, IdxPat, OmegaTerm, StepPat, TermError, VertexAddr,
};

#[derive(Debug, Clone, Error)]
pub enum TdError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("malformed scheme: {0}")]
    Malformed(String),
    #[error("term is disconnected")]
    Disconnected,
    #[error("input tree is not rayless")]
    NotRayless,
    #[error("input tree is not normal")]
    NotNormal,
    #[error("a component of G - T has infinite neighbourhood")]
    InfiniteNeighbourhood,
    #[error("dominated end in the display set: {0}")]
    DominatedEnd(String),
    #[error("non-tame input in Gamma mode")]
    NotTame,
    #[error("infinite separator encountered")]
    InfiniteSeparator,
    #[error("finite U")]
    FiniteU,
}

/// Provenance of a decomposition tree node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum NodeLabel {
    /// A node of the underlying normal tree; carries the graph vertex.
    TntNode { vertex: AddrPattern },
    /// A critical vertex set node.
    CritNode { crit: CritPattern },
    /// A component of G minus the normal tree.
    ComponentNode,
    /// The fresh leaf added by squeezing.
    SqueezeLeaf,
    Plain,
}

/// One node class of a decomposition scheme: a node (or uniform family of
/// nodes) of the decomposition tree with its part and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeClass {
    /// Address pattern of the node in the decomposition tree term.
    pub node: AddrPattern,
    /// Parent node pattern (shares vars); None at the root.
    pub parent: Option<AddrPattern>,
    /// The part V_t, as patterns over the graph (shares the node's vars).
    pub part: Vec<AddrPattern>,
    /// The adhesion set toward the parent.
    pub separator: Vec<AddrPattern>,
    /// The strictly-beyond vertex set (child side minus the separator),
    /// used as the oriented separation of the parent edge.
    pub beyond: Vec<AddrPattern>,
    pub label: NodeLabel,
}

/// A tree-decomposition of a term graph. The decomposition tree is itself
/// a tree-shaped term; node classes map tree addresses to parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TDScheme {
    pub tree: OmegaTerm,
    pub root: VertexAddr,
    pub classes: Vec<NodeClass>,
    /// True when a non-periodic construction was cut off at the budget.
    #[serde(default)]
    pub continuation: bool,
}

/// An S-tree: the same data read as separations along tree edges (the
/// parts are ignored, the separator/beyond fields are the α map).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct STreeScheme {
    pub tree: OmegaTerm,
    pub root: VertexAddr,
    pub classes: Vec<NodeClass>,
    pub tame: bool,
    #[serde(default)]
    pub continuation: bool,
}

impl TDScheme {
    /// The class holding a concrete tree node.
    pub fn class_of_node(&self, node: &VertexAddr) -> Option<(usize, Vec<(String, u32)>)> {
        for (i, c) in self.classes.iter().enumerate() {
            if let Some(env) = c.node.matches(node) {
                return Some((i, env));
            }
        }
        None
    }

    /// The part at a concrete tree node.
    pub fn part_at(&self, node: &VertexAddr) -> Option<Vec<AddrPattern>> {
        let (i, env) = self.class_of_node(node)?;
        Some(
            self.classes[i]
                .part
                .iter()
                .map(|p| instantiate_shared(p, &env))
                .collect(),
        )
    }

    pub fn as_stree(&self, tame: bool) -> STreeScheme {
        STreeScheme {
            tree: self.tree.clone(),
            root: self.root.clone(),
            classes: self.classes.clone(),
            tame,
            continuation: self.continuation,
        }
    }
}

/// Substitute the env's vars, leaving other vars free.
pub(crate) fn instantiate_shared(p: &AddrPattern, env: &[(String, u32)]) -> AddrPattern {
    let map: BTreeMap<String, u32> = env.iter().cloned().collect();
    crate::separations::CompClass::subst_tuple_public(p, &map)
}

/// Report of a full tree-decomposition verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TdReport {
    pub pass: bool,
    pub failures: Vec<String>,
    pub budget: u32,
    pub separators_finite: bool,
    pub separators_connected: bool,
    pub separators_pairwise_disjoint: bool,
}

/// Exhaustively verify the tree-decomposition axioms and the separator
/// property on truncations up to the budget.
pub fn verify_td(t: &OmegaTerm, d: &TDScheme, budget: u32) -> Result<TdReport, TdError> {
    let mut failures = Vec::new();
    if d.classes.is_empty() {
        return Err(TdError::Malformed("no node classes".to_string()));
    }
    for c in &d.classes {
        if !d.tree.resolves(&probe_node(c)) {
            return Err(TdError::Malformed(format!(
                "node pattern does not resolve in the tree term: {}",
                c.node
            )));
        }
    }
    let mut separators_finite = true;
    let mut separators_connected = true;
    let mut separators_pairwise_disjoint = true;

    for n in 2..=budget.max(2) {
        let g = t.truncate(n);
        let tree_g = d.tree.truncate(n);
        // Collect nodes and parts in this truncation.
        let mut parts: BTreeMap<VertexAddr, BTreeSet<VertexAddr>> = BTreeMap::new();
        for node in tree_g.vertices() {
            let Some(pats) = d.part_at(node) else {
                failures.push(format!("n={n}: tree node {node} has no part"));
                continue;
            };
            let mut set = BTreeSet::new();
            for p in &pats {
                for a in crate::separations::enumerate_in_truncation(p, n) {
                    if g.contains(&a) {
                        set.insert(a);
                    }
                }
            }
            parts.insert(node.clone(), set);
        }
        // Vertex and edge coverage.
        for v in g.vertices() {
            if !parts.values().any(|s| s.contains(v)) {
                failures.push(format!("n={n}: vertex {v} uncovered"));
            }
        }
        for (a, b) in g.edges() {
            if !parts.values().any(|s| s.contains(&a) && s.contains(&b)) {
                failures.push(format!("n={n}: edge {a} - {b} uncovered"));
            }
        }
        // Subtree connectivity per vertex.
        for v in g.vertices() {
            let holders: BTreeSet<VertexAddr> = parts
                .iter()
                .filter(|(_, s)| s.contains(v))
                .map(|(node, _)| node.clone())
                .collect();
            if holders.len() > 1 {
                let sub = tree_g.delete(
                    &tree_g.vertices().filter(|x| !holders.contains(x)).cloned().collect(),
                );
                if !sub.is_connected() {
                    failures.push(format!("n={n}: nodes holding {v} are not a subtree"));
                }
            }
        }
        // Separator property per tree edge.
        for (s_node, t_node) in tree_g.edges() {
            let (ps, pt) = (&parts[&s_node], &parts[&t_node]);
            let sep: BTreeSet<VertexAddr> = ps.intersection(pt).cloned().collect();
            // Sides of the tree edge.
            let cut: BTreeSet<VertexAddr> = [s_node.clone(), t_node.clone()].into();
            let h = tree_g.delete(&cut);
            let side_of = |node: &VertexAddr| -> u8 {
                if *node == s_node {
                    return 0;
                }
                if *node == t_node {
                    return 1;
                }
                for comp in h.components() {
                    if comp.contains(node) {
                        return if comp
                            .iter()
                            .any(|x| tree_g.has_edge(x, &s_node))
                        {
                            0
                        } else {
                            1
                        };
                    }
                }
                0
            };
            let mut a1: BTreeSet<VertexAddr> = BTreeSet::new();
            let mut a2: BTreeSet<VertexAddr> = BTreeSet::new();
            for (node, s) in &parts {
                if side_of(node) == 0 {
                    a1.extend(s.iter().cloned());
                } else {
                    a2.extend(s.iter().cloned());
                }
            }
            let gg = g.delete(&sep);
            for comp in gg.components() {
                let m1 = comp.iter().any(|v| a1.contains(v) && !a2.contains(v));
                let m2 = comp.iter().any(|v| a2.contains(v) && !a1.contains(v));
                if m1 && m2 {
                    failures.push(format!(
                        "n={n}: separator of tree edge {s_node} - {t_node} fails"
                    ));
                }
            }
        }
        // Separator metadata.
        let mut seps_seen: Vec<BTreeSet<VertexAddr>> = Vec::new();
        for c in &d.classes {
            if c.parent.is_none() {
                continue;
            }
            let node_vars = pattern_var_names(&c.node);
            let has_free_sep = c.separator.iter().any(|p| {
                p.0.iter().any(|s| match s.idx() {
                    Some(IdxPat::Star) => true,
                    Some(IdxPat::Bound { var, .. }) | Some(IdxPat::Strided { var, .. }) => {
                        !node_vars.contains(var)
                    }
                    _ => false,
                })
            });
            if has_free_sep {
                separators_finite = false;
            }
        }
        for node in tree_g.vertices() {
            if let Some((i, env)) = d.class_of_node(node) {
                if d.classes[i].parent.is_none() {
                    continue;
                }
                let mut sep = BTreeSet::new();
                for p in &d.classes[i].separator {
                    let q = instantiate_shared(p, &env);
                    for a in crate::separations::enumerate_in_truncation(&q, n) {
                        if g.contains(&a) {
                            sep.insert(a);
                        }
                    }
                }
                if sep.is_empty() {
                    continue;
                }
                let induced = g
                    .delete(&g.vertices().filter(|v| !sep.contains(v)).cloned().collect());
                if !induced.is_connected() {
                    separators_connected = false;
                }
                for old in &seps_seen {
                    if !old.is_disjoint(&sep) && old != &sep {
                        separators_pairwise_disjoint = false;
                    }
                }
                if !seps_seen.contains(&sep) {
                    seps_seen.push(sep);
                }
            }
        }
    }
    let pass = failures.is_empty();
    Ok(TdReport {
        pass,
        failures,
        budget,
        separators_finite,
        separators_connected,
        separators_pairwise_disjoint,
    })
}

/// Every part meets the vertex set described by `u` in finitely many
/// vertices (per node instance).
pub fn parts_meet_u_finitely(d: &TDScheme, u: &crate::term_graphs::UPattern) -> bool {
    for c in &d.classes {
        let node_vars = pattern_var_names(&c.node);
        for p in &c.part {
            for q in &u.0 {
                if let Some(m) = p.meet(q) {
                    if m.unbounded || m.left_free.iter().any(|v| !node_vars.contains(v)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Parts at non-leaf nodes are finite (no free positions beyond the node
/// vars).
pub fn nonleaf_parts_finite(d: &TDScheme) -> bool {
    for (i, c) in d.classes.iter().enumerate() {
        let is_leaf = !d.classes.iter().any(|x| x.parent.as_ref() == Some(&d.classes[i].node));
        if is_leaf {
            continue;
        }
        let node_vars = pattern_var_names(&c.node);
        let infinite = c.part.iter().any(|p| {
            p.0.iter().any(|s| match s.idx() {
                Some(IdxPat::Star) => true,
                Some(IdxPat::Bound { var, .. }) | Some(IdxPat::Strided { var, .. }) => {
                    !node_vars.contains(var)
                }
                _ => false,
            })
        });
        if infinite {
            return false;
        }
    }
    true
}

/// The decomposition tree, as a graph, has no rays.
pub fn tree_is_rayless(d: &TDScheme) -> Result<bool, TdError> {
    Ok(crate::boundary::ends(&d.tree)?.is_empty())
}

/// The decomposition tree is locally finite: no node class spawns a child
/// family with a fresh index.
pub fn tree_is_locally_finite(d: &TDScheme) -> bool {
    d.classes.iter().all(|c| {
        let nv = pattern_var_names(&c.node);
        d.classes
            .iter()
            .filter(|x| x.parent.as_ref() == Some(&c.node))
            .all(|x| pattern_var_names(&x.node).len() <= nv.len())
    })
}

pub(crate) fn pattern_var_names(p: &AddrPattern) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in &p.0 {
        if let Some(v) = s.idx().and_then(IdxPat::var_name) {
            out.insert(v.to_string());
        }
    }
    out
}

pub(crate) fn probe_node(c: &NodeClass) -> VertexAddr {
    let free = c.node.free_positions();
    c.node
        .instantiate_positional(&vec![0; free])
        .expect("node pattern instantiates")
}

// ---------------------------------------------------------------------------
// Class trees and their tree terms.
// ---------------------------------------------------------------------------

/// An intermediate class-tree: nodes are uniform node families, each
/// adding at most one index var relative to its parent. Generates the
/// tree-shaped term together with per-class tree addresses.
#[derive(Debug, Clone, Default)]
pub(crate) struct ClassTree {
    pub nodes: Vec<ClassNode>,
}

#[derive(Debug, Clone)]
pub(crate) struct ClassNode {
    /// None for the root.
    pub parent: Option<usize>,
    /// The new var introduced at this class (None: same instances as the
    /// parent, one node per parent instance).
    pub new_var: Option<String>,
    pub label: NodeLabel,
    pub part: Vec<AddrPattern>,
    pub separator: Vec<AddrPattern>,
    pub beyond: Vec<AddrPattern>,
}

impl ClassTree {
    pub fn add(&mut self, node: ClassNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Generate the tree term plus the tree-address pattern per class.
    pub fn to_term(&self) -> (OmegaTerm, Vec<AddrPattern>) {
        assert!(!self.nodes.is_empty());
        let (term, addrs) = self.region_term(self.region_of_root());
        (term, addrs)
    }

    fn region_of_root(&self) -> Vec<usize> {
        // The root region: classes reachable from the root without new vars.
        let root = self
            .nodes
            .iter()
            .position(|n| n.parent.is_none())
            .expect("rooted class tree");
        self.region_from(root)
    }

    fn region_from(&self, start: usize) -> Vec<usize> {
        let mut region = vec![start];
        let mut queue = vec![start];
        while let Some(x) = queue.pop() {
            for (i, n) in self.nodes.iter().enumerate() {
                if n.parent == Some(x) && n.new_var.is_none() && !region.contains(&i) {
                    region.push(i);
                    queue.push(i);
                }
            }
        }
        region.sort();
        region
    }

    /// Build the term of the region rooted at `region[0]`'s subtree,
    /// wrapping one Omega per child family.
    fn region_term(&self, region: Vec<usize>) -> (OmegaTerm, Vec<AddrPattern>) {
        let name = |i: usize| format!("n{i}");
        let mut vertices: Vec<String> = region.iter().map(|&i| name(i)).collect();
        vertices.sort();
        let mut edges = Vec::new();
        for &i in &region {
            if let Some(p) = self.nodes[i].parent {
                if region.contains(&p) {
                    edges.push((name(p), name(i)));
                }
            }
        }
        let mut term = OmegaTerm::Finite { vertices, edges };
        let mut addrs: Vec<AddrPattern> = vec![AddrPattern::default(); self.nodes.len()];
        for &i in &region {
            addrs[i] = AddrPattern(vec![StepPat::Leaf(name(i))]);
        }
        // Child families: classes with a new var whose parent is in region.
        let mut families: Vec<usize> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                n.new_var.is_some() && n.parent.map(|p| region.contains(&p)).unwrap_or(false)
            })
            .map(|(i, _)| i)
            .collect();
        families.sort();
        for f in families {
            let parent = self.nodes[f].parent.unwrap();
            let var = self.nodes[f].new_var.clone().unwrap();
            let sub_region = self.region_from(f);
            let (copy_term, sub_addrs) = self.region_term(sub_region);
            // Anchor: the parent's current address (concrete instance) and
            // the child's root address inside the copy.
            let parent_addr = addrs[parent]
                .clone()
                .to_addr_with_zeros()
                .expect("parent address");
            let child_root = sub_addrs[f]
                .clone()
                .to_addr_with_zeros()
                .expect("child root address");
            // Lift existing addresses under B/, new family under C(var)/.
            for a in addrs.iter_mut() {
                if !a.0.is_empty() {
                    *a = a.prefixed(StepPat::Base);
                }
            }
            for (i, sa) in sub_addrs.iter().enumerate() {
                if !sa.0.is_empty() {
                    addrs[i] = sa.prefixed(StepPat::Copy(IdxPat::bound(&var)));
                }
            }
            term = OmegaTerm::Omega {
                base: Box::new(term),
                copy: Box::new(copy_term),
                links: vec![(parent_addr, child_root)],
            };
        }
        (term, addrs)
    }
}

trait ToAddrZeros {
    fn to_addr_with_zeros(&self) -> Option<VertexAddr>;
}

impl ToAddrZeros for AddrPattern {
    fn to_addr_with_zeros(&self) -> Option<VertexAddr> {
        self.instantiate_positional(&vec![0; self.free_positions()])
    }
}

impl ClassTree {
    /// Assemble the final scheme.
    pub fn into_td(self, continuation: bool) -> TDScheme {
        let (tree, addrs) = self.to_term();
        let root_idx = self.nodes.iter().position(|n| n.parent.is_none()).unwrap();
        let root = addrs[root_idx].to_addr_with_zeros().expect("root");
        let classes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeClass {
                node: addrs[i].clone(),
                parent: n.parent.map(|p| addrs[p].clone()),
                part: n.part.clone(),
                separator: n.separator.clone(),
                beyond: n.beyond.clone(),
                label: n.label.clone(),
            })
            .collect();
        TDScheme { tree, root, classes, continuation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    /// A handmade decomposition of the ray with parts {s_i, s_(i+1)}.
    fn ray_td() -> TDScheme {
        let tree = ray();
        let classes = vec![
            NodeClass {
                node: "S(0)/V(v)".parse().unwrap(),
                parent: None,
                part: vec!["S(0)/V(v)".parse().unwrap(), "S(1)/V(v)".parse().unwrap()],
                separator: vec![],
                beyond: vec![],
                label: NodeLabel::Plain,
            },
            NodeClass {
                node: "S(i+1)/V(v)".parse().unwrap(),
                parent: Some("S(i)/V(v)".parse().unwrap()),
                part: vec!["S(i+1)/V(v)".parse().unwrap(), "S(i+2)/V(v)".parse().unwrap()],
                separator: vec!["S(i+1)/V(v)".parse().unwrap()],
                beyond: vec!["S(i+2)/V(v)".parse().unwrap()],
                label: NodeLabel::Plain,
            },
        ];
        TDScheme { tree, root: "S(0)/V(v)".parse().unwrap(), classes, continuation: false }
    }

    #[test]
    fn ray_decomposition_passes() {
        let d = ray_td();
        let rep = verify_td(&ray(), &d, 6).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
        assert!(rep.separators_finite);
        assert!(rep.separators_connected);
    }

    #[test]
    fn dropping_edge_coverage_fails() {
        let mut d = ray_td();
        // Parts become singletons: the edge s0-s1 is uncovered.
        d.classes[0].part = vec!["S(0)/V(v)".parse().unwrap()];
        d.classes[1].part = vec!["S(i+1)/V(v)".parse().unwrap()];
        let rep = verify_td(&ray(), &d, 4).unwrap();
        assert!(!rep.pass);
        assert!(rep.failures.iter().any(|f| f.contains("edge")));
    }

    #[test]
    fn class_tree_generates_star_shaped_term() {
        let mut ct = ClassTree::default();
        let root = ct.add(ClassNode {
            parent: None,
            new_var: None,
            label: NodeLabel::Plain,
            part: vec![],
            separator: vec![],
            beyond: vec![],
        });
        ct.add(ClassNode {
            parent: Some(root),
            new_var: Some("i".to_string()),
            label: NodeLabel::Plain,
            part: vec![],
            separator: vec![],
            beyond: vec![],
        });
        let (term, addrs) = ct.to_term();
        assert!(term.validate().is_ok());
        let g = term.truncate(3);
        assert_eq!(g.vertex_count(), 4); // root + 3 leaves
        assert_eq!(addrs[0].to_string(), "B/V(n0)");
        assert_eq!(addrs[1].to_string(), "C(i)/V(n1)");
    }

    #[test]
    fn class_tree_generates_nested_families() {
        // root - s_i - t_ij, the shape of the three-level tree.
        let mut ct = ClassTree::default();
        let root = ct.add(ClassNode {
            parent: None,
            new_var: None,
            label: NodeLabel::Plain,
            part: vec![],
            separator: vec![],
            beyond: vec![],
        });
        let mid = ct.add(ClassNode {
            parent: Some(root),
            new_var: Some("i".to_string()),
            label: NodeLabel::Plain,
            part: vec![],
            separator: vec![],
            beyond: vec![],
        });
        ct.add(ClassNode {
            parent: Some(mid),
            new_var: Some("j".to_string()),
            label: NodeLabel::Plain,
            part: vec![],
            separator: vec![],
            beyond: vec![],
        });
        let (term, addrs) = ct.to_term();
        assert!(term.validate().is_ok());
        let g = term.truncate(2);
        assert_eq!(g.vertex_count(), 7);
        assert!(g.is_connected());
        assert_eq!(addrs[2].free_positions(), 2);
    }
}

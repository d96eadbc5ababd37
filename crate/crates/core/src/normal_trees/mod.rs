//! Normal trees over term graphs: uniform tree schemes, normality
//! checking against truncations, the depth-first baseline on finite
//! graphs, builders for the rayless and locally finite normal trees, and
//! the component structure with respect to down-closed node sets.

mod build;

pub use build::{
    build_locally_finite_normal_tree, build_rayless_normal_tree, CombObstruction,
    LocallyFiniteTree, StarObstruction,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::boundary::{ends, EndPattern, InClosure};
use crate::separations::{delete_components, Components};
use crate::term_graphs::{
    AddrPattern, FiniteGraph, IdxPat, OmegaTerm, StepPat, TermError, UPattern, VertexAddr,
};

#[derive(Debug, Clone, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("scheme is not a tree: {0}")]
    NotATree(String),
    #[error("orphan member without a parent rule: {0}")]
    Orphan(String),
    #[error("parent step is not a graph edge: {0} -> {1}")]
    NotAnEdge(String, String),
    #[error("node set is not down-closed at {0}")]
    NotDownClosed(String),
    #[error("term is disconnected")]
    Disconnected,
    #[error("scheme is not normal")]
    NotNormal,
    #[error("scheme is not rayless")]
    NotRayless,
}

/// One parent rule: members matching `shape` have parent `transform`
/// (same bound vars; offsets express index-preserving or decrementing
/// transforms, a var-free transform is a constant parent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRule {
    pub shape: AddrPattern,
    pub transform: AddrPattern,
}

/// A uniform presentation of a rooted tree subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeScheme {
    pub root: VertexAddr,
    #[serde(rename = "parents")]
    pub rules: Vec<ParentRule>,
    pub members: UPattern,
}

impl TreeScheme {
    pub fn contains(&self, a: &VertexAddr) -> bool {
        self.members.contains(a)
    }

    /// The parent of a member (None for the root). First matching rule wins.
    pub fn parent_of(&self, a: &VertexAddr) -> Option<VertexAddr> {
        if *a == self.root {
            return None;
        }
        for r in &self.rules {
            if let Some(env) = r.shape.matches(a) {
                return r.transform.instantiate(&env);
            }
        }
        None
    }

    /// The path from `a` up to the root (inclusive), or None on a cycle or
    /// a missing rule.
    pub fn ancestors(&self, a: &VertexAddr) -> Option<Vec<VertexAddr>> {
        let mut path = vec![a.clone()];
        let mut cur = a.clone();
        let mut seen: BTreeSet<VertexAddr> = BTreeSet::from([cur.clone()]);
        while cur != self.root {
            let p = self.parent_of(&cur)?;
            if !seen.insert(p.clone()) {
                return None;
            }
            path.push(p.clone());
            cur = p;
        }
        Some(path)
    }

    /// Tree-order comparability of two members.
    pub fn comparable(&self, a: &VertexAddr, b: &VertexAddr) -> Option<bool> {
        let aa = self.ancestors(a)?;
        let bb = self.ancestors(b)?;
        Some(aa.contains(b) || bb.contains(a))
    }

    /// Members with all indices below n.
    pub fn members_in_truncation(&self, n: u32) -> Vec<VertexAddr> {
        let mut out = BTreeSet::new();
        for p in &self.members.0 {
            out.extend(crate::separations::enumerate_in_truncation(p, n));
        }
        out.into_iter().collect()
    }

    /// Structurally rayless: no rule family strictly lowers an index of
    /// its own shape (which is how this scheme class presents rays).
    pub fn is_structurally_rayless(&self) -> bool {
        !self.rules.iter().any(rule_descends)
    }
}

/// Does this rule move from its shape toward a lower index of the same
/// pattern family (the signature of a presented ray)?
fn rule_descends(r: &ParentRule) -> bool {
    for (s, t) in r.shape.0.iter().zip(r.transform.0.iter()) {
        match (s.idx(), t.idx()) {
            (
                Some(IdxPat::Bound { var: v1, offset: o1 }),
                Some(IdxPat::Bound { var: v2, offset: o2 }),
            ) => {
                if v1 == v2 && o2 < o1 {
                    return true;
                }
            }
            (
                Some(IdxPat::Strided { var: v1, scale: s1, offset: o1 }),
                Some(IdxPat::Strided { var: v2, scale: s2, offset: o2 }),
            ) => {
                if v1 == v2 && s1 == s2 && o2 < o1 {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

/// Verdict of a normality check, with a concrete incomparable T-path
/// counterexample (its endvertices) when it fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalityReport {
    pub normal: bool,
    pub counterexample: Option<(VertexAddr, VertexAddr)>,
    pub budget: u32,
}

/// Check that a scheme presents a normal tree of `t`: membership resolves,
/// parent steps are graph edges, the parent relation is a tree rooted at
/// `root`, and the endvertices of every T-path are comparable in every
/// truncation up to the budget (rule uniformity carries the verdict one
/// step beyond).
pub fn check_normal(
    t: &OmegaTerm,
    s: &TreeScheme,
    budget: u32,
) -> Result<NormalityReport, SchemeError> {
    for p in &s.members.0 {
        if !t.pattern_resolves(p) {
            return Err(TermError::UnresolvablePattern(p.to_string()).into());
        }
    }
    if !s.contains(&s.root) {
        return Err(SchemeError::Orphan(format!("root {}", s.root)));
    }
    for n in [budget.max(3), budget.max(3) + 1] {
        let g = t.truncate(n);
        let members: Vec<VertexAddr> = s
            .members_in_truncation(n)
            .into_iter()
            .filter(|a| g.contains(a))
            .collect();
        let mset: BTreeSet<VertexAddr> = members.iter().cloned().collect();
        for a in &members {
            if *a == s.root {
                continue;
            }
            let Some(p) = s.parent_of(a) else {
                return Err(SchemeError::Orphan(a.to_string()));
            };
            if !mset.contains(&p) {
                return Err(SchemeError::NotATree(format!(
                    "parent {p} of {a} is not a member of the truncated tree"
                )));
            }
            if !g.has_edge(a, &p) {
                return Err(SchemeError::NotAnEdge(a.to_string(), p.to_string()));
            }
            if s.ancestors(a).is_none() {
                return Err(SchemeError::NotATree(format!("no root path from {a}")));
            }
        }
        // Normality: (i) edges inside T join comparable nodes; (ii) the
        // attachment set of every component of G - T is a chain.
        let anc: BTreeMap<VertexAddr, BTreeSet<VertexAddr>> = members
            .iter()
            .map(|a| {
                (a.clone(), s.ancestors(a).unwrap_or_default().into_iter().collect())
            })
            .collect();
        let cmp = |x: &VertexAddr, y: &VertexAddr| anc[x].contains(y) || anc[y].contains(x);
        for (a, b) in g.edges() {
            if mset.contains(&a) && mset.contains(&b) && !cmp(&a, &b) {
                return Ok(NormalityReport { normal: false, counterexample: Some((a, b)), budget });
            }
        }
        let h = g.delete(&mset);
        for comp in h.components() {
            let attach: Vec<VertexAddr> = g
                .neighborhood(&comp)
                .into_iter()
                .filter(|v| mset.contains(v))
                .collect();
            for i in 0..attach.len() {
                for j in (i + 1)..attach.len() {
                    if !cmp(&attach[i], &attach[j]) {
                        return Ok(NormalityReport {
                            normal: false,
                            counterexample: Some((attach[i].clone(), attach[j].clone())),
                            budget,
                        });
                    }
                }
            }
        }
    }
    Ok(NormalityReport { normal: true, counterexample: None, budget })
}

/// Depth-first spanning tree of a finite graph: the classic normal-tree
/// baseline. Deterministic via canonical neighbour order.
pub fn dfs_normal_tree(g: &FiniteGraph, root: &VertexAddr) -> Result<TreeScheme, SchemeError> {
    if !g.is_connected() {
        return Err(SchemeError::Disconnected);
    }
    if !g.contains(root) {
        return Err(SchemeError::Orphan(root.to_string()));
    }
    let mut parent: BTreeMap<VertexAddr, VertexAddr> = BTreeMap::new();
    let mut visited: BTreeSet<VertexAddr> = BTreeSet::new();
    let mut stack = vec![root.clone()];
    while let Some(v) = stack.pop() {
        if !visited.insert(v.clone()) {
            continue;
        }
        let mut ns = g.neighbors_of(&v);
        ns.sort();
        ns.reverse();
        for w in ns {
            if !visited.contains(&w) {
                parent.insert(w.clone(), v.clone());
                stack.push(w);
            }
        }
    }
    let rules = parent
        .iter()
        .map(|(c, p)| ParentRule {
            shape: AddrPattern::from_addr(c),
            transform: AddrPattern::from_addr(p),
        })
        .collect();
    Ok(TreeScheme { root: root.clone(), rules, members: UPattern::from_addrs(g.vertices()) })
}

/// The two component types of `G - W` for a down-closed node set `W`:
/// components avoiding the tree, and components spanned by a generalised
/// up-closure, reported with the minimal tree node spanning them.
#[derive(Debug, Clone)]
pub struct DownclosedComponents {
    pub comps: Components,
    /// Per class: the minimal tree member inside it when the class meets
    /// the tree (the spanning witness); None for tree-avoiding classes.
    pub spanned_by: Vec<Option<VertexAddr>>,
}

pub fn components_wrt_downclosed(
    t: &OmegaTerm,
    s: &TreeScheme,
    w: &BTreeSet<VertexAddr>,
) -> Result<DownclosedComponents, SchemeError> {
    for v in w {
        if !s.contains(v) {
            return Err(SchemeError::NotDownClosed(format!("{v} is not a tree node")));
        }
        if let Some(p) = s.parent_of(v) {
            if !w.contains(&p) {
                return Err(SchemeError::NotDownClosed(v.to_string()));
            }
        }
    }
    let comps = delete_components(t, w)?;
    let mut spanned_by = Vec::new();
    for c in &comps.classes {
        let mut min_member: Option<VertexAddr> = None;
        for p in &c.rep {
            for a in crate::separations::enumerate_in_truncation(p, 4) {
                if s.contains(&a) && c.instance_of(&a).is_some() {
                    min_member = Some(match min_member {
                        None => a,
                        Some(m) => m.min(a),
                    });
                }
            }
        }
        // Walk down to the minimal tree node of the component.
        let refined = min_member.map(|mut x| {
            while let Some(p) = s.parent_of(&x) {
                if w.contains(&p) || c.instance_of(&p).is_none() {
                    break;
                }
                x = p;
            }
            x
        });
        spanned_by.push(refined);
    }
    Ok(DownclosedComponents { comps, spanned_by })
}

/// The normal rays of a scheme paired with the ends of G they converge to:
/// one pair per end in the closure of V(T), empty for rayless schemes.
pub fn normal_rays(
    t: &OmegaTerm,
    s: &TreeScheme,
) -> Result<Vec<(EndPattern, ParentRule)>, SchemeError> {
    let ray_rules: Vec<&ParentRule> = s.rules.iter().filter(|r| rule_descends(r)).collect();
    let boundary = ends(t)?;
    let mut out = Vec::new();
    for e in &boundary {
        if let Some(sel) = crate::boundary::end_in_closure(t, e, &s.members)? {
            let inst = match &sel {
                InClosure::All => e.instances_up_to(1).remove(0),
                InClosure::Instances(vals) => {
                    let mut inst = e.clone();
                    let mut vi = vals.first().cloned().unwrap_or_default().into_iter();
                    for st in inst.prefix.iter_mut() {
                        if let StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) = st {
                            if !i.is_concrete() {
                                *i = IdxPat::Concrete(vi.next().unwrap_or(0));
                            }
                        }
                    }
                    inst
                }
            };
            let rule = ray_rules
                .iter()
                .find(|r| {
                    // A deep instance of the rule's shape must lie in the
                    // end's component beyond a deep cut.
                    let Ok(cut) = crate::boundary::end_cut(t, &inst, 23) else { return false };
                    let Ok(comps) = delete_components(t, &cut) else { return false };
                    let ec = crate::boundary::end_component(&comps, &inst);
                    let free = r.shape.free_positions();
                    let probe = r.shape.instantiate_positional(&vec![31; free]);
                    match (ec, probe) {
                        (Some(e1), Some(pv)) => comps.class_of(&pv) == Some(e1),
                        _ => false,
                    }
                })
                .copied()
                .cloned();
            match rule {
                Some(rule) => out.push((inst, rule)),
                None => {
                    return Err(SchemeError::NotATree(format!(
                        "end in the closure of the tree has no normal ray: {e:?}"
                    )))
                }
            }
        }
    }
    if out.is_empty() && !ray_rules.is_empty() {
        return Err(SchemeError::NotATree(
            "descending rules but no end in the closure of the tree".to_string(),
        ));
    }
    Ok(out)
}

/// Cofinal containment: every tree member has a U-member above it in the
/// tree order, decided on a truncation with a uniform margin.
pub fn contains_cofinally(
    t: &OmegaTerm,
    s: &TreeScheme,
    u: &UPattern,
    budget: u32,
) -> Result<bool, SchemeError> {
    let n = budget.max(4);
    let g = t.truncate(n + 2);
    let members = s.members_in_truncation(n);
    let deep: Vec<VertexAddr> = s
        .members_in_truncation(n + 2)
        .into_iter()
        .filter(|a| g.contains(a) && u.contains(a))
        .collect();
    let mut above: BTreeSet<VertexAddr> = BTreeSet::new();
    for d in &deep {
        if let Some(anc) = s.ancestors(d) {
            above.extend(anc);
        }
    }
    Ok(members.into_iter().all(|m| above.contains(&m)))
}

/// U ⊆ V(T), decided on a margin truncation.
pub fn contains_u(t: &OmegaTerm, s: &TreeScheme, u: &UPattern, budget: u32) -> bool {
    let n = budget.max(4) + 1;
    for p in &u.0 {
        for a in crate::separations::enumerate_in_truncation(p, n) {
            if t.resolves(&a) && !s.contains(&a) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    fn ray_scheme() -> TreeScheme {
        TreeScheme {
            root: "S(0)/V(v)".parse().unwrap(),
            rules: vec![ParentRule {
                shape: "S(i+1)/V(v)".parse().unwrap(),
                transform: "S(i)/V(v)".parse().unwrap(),
            }],
            members: "S(*)/V(v)".parse().unwrap(),
        }
    }

    fn star_scheme() -> TreeScheme {
        TreeScheme {
            root: "B/V(c)".parse().unwrap(),
            rules: vec![ParentRule {
                shape: "C(i)/V(l)".parse().unwrap(),
                transform: "B/V(c)".parse().unwrap(),
            }],
            members: "B/V(c); C(*)/V(l)".parse().unwrap(),
        }
    }

    #[test]
    fn ray_and_star_schemes_are_normal() {
        let r = check_normal(&ray(), &ray_scheme(), 5).unwrap();
        assert!(r.normal);
        let r = check_normal(&star(), &star_scheme(), 5).unwrap();
        assert!(r.normal);
        assert!(star_scheme().is_structurally_rayless());
        assert!(!ray_scheme().is_structurally_rayless());
    }

    #[test]
    fn orphaned_member_is_reported() {
        // A domray scheme that spans the ray but forgets r.
        let s = TreeScheme {
            root: "S(0)/V(v)".parse().unwrap(),
            rules: vec![ParentRule {
                shape: "S(i+1)/V(v)".parse().unwrap(),
                transform: "S(i)/V(v)".parse().unwrap(),
            }],
            members: "S(*)/V(v); B/V(r)".parse().unwrap(),
        };
        assert!(matches!(
            check_normal(&domray(), &s, 5),
            Err(SchemeError::Orphan(v)) if v == "B/V(r)"
        ));
    }

    #[test]
    fn dfs_tree_of_path_and_cycle() {
        let path_term = OmegaTerm::finite(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let s = dfs_normal_tree(&path_term.truncate(2), &"V(a)".parse().unwrap()).unwrap();
        assert!(check_normal(&path_term, &s, 4).unwrap().normal);

        // A 4-cycle: the DFS tree is a Hamilton path, hence normal.
        let cyc = OmegaTerm::finite(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")],
        );
        let s = dfs_normal_tree(&cyc.truncate(2), &"V(a)".parse().unwrap()).unwrap();
        assert!(check_normal(&cyc, &s, 4).unwrap().normal);

        // The BFS-style tree {ab, ad, bc} of the 4-cycle is not normal:
        // the edge cd joins incomparable nodes.
        let bfs = TreeScheme {
            root: "V(a)".parse().unwrap(),
            rules: vec![
                ParentRule { shape: "V(b)".parse().unwrap(), transform: "V(a)".parse().unwrap() },
                ParentRule { shape: "V(d)".parse().unwrap(), transform: "V(a)".parse().unwrap() },
                ParentRule { shape: "V(c)".parse().unwrap(), transform: "V(b)".parse().unwrap() },
            ],
            members: "V(a); V(b); V(c); V(d)".parse().unwrap(),
        };
        let r = check_normal(&cyc, &bfs, 4).unwrap();
        assert!(!r.normal);
        let (x, y) = r.counterexample.unwrap();
        let cd: BTreeSet<String> = [x.to_string(), y.to_string()].into();
        assert_eq!(cd, ["V(c)".to_string(), "V(d)".to_string()].into());
    }

    #[test]
    fn components_wrt_downclosed_of_star_and_ray() {
        let s = star_scheme();
        let w: BTreeSet<VertexAddr> = ["B/V(c)".parse().unwrap()].into();
        let d = components_wrt_downclosed(&star(), &s, &w).unwrap();
        assert_eq!(d.comps.classes.len(), 1);
        assert!(d.spanned_by[0].is_some());

        let s = ray_scheme();
        let w: BTreeSet<VertexAddr> =
            ["S(0)/V(v)".parse().unwrap(), "S(1)/V(v)".parse().unwrap()].into();
        let d = components_wrt_downclosed(&ray(), &s, &w).unwrap();
        assert_eq!(d.comps.classes.len(), 1);
        assert_eq!(d.spanned_by[0], Some("S(2)/V(v)".parse().unwrap()));

        let w: BTreeSet<VertexAddr> = ["S(1)/V(v)".parse().unwrap()].into();
        assert!(matches!(
            components_wrt_downclosed(&ray(), &s, &w),
            Err(SchemeError::NotDownClosed(_))
        ));
    }

    #[test]
    fn normal_rays_of_ray_and_star() {
        let pairs = normal_rays(&ray(), &ray_scheme()).unwrap();
        assert_eq!(pairs.len(), 1);
        let pairs = normal_rays(&star(), &star_scheme()).unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn cofinality_and_containment() {
        assert!(contains_cofinally(&star(), &star_scheme(), &star_leaves(), 5).unwrap());
        assert!(contains_u(&star(), &star_scheme(), &star_leaves(), 5));
        let r = ray();
        assert!(contains_cofinally(&r, &ray_scheme(), &all(&r), 5).unwrap());
    }
}

//! U-rank: the ordinal recursion specialised to the term class, where all
//! ranks are finite naturals. Rank 0 means at most finitely many
//! U-vertices; a successor step deletes a finite set per component so that
//! every remaining component has smaller rank. A graph has a U-rank iff no
//! comb is attached to U; the recursion is exact because deleting the
//! base-side hull of a term node realises the minimising deletion.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{ends, BoundaryError};
use crate::separations::{CompClass, Components};
use crate::term_graphs::{
    AddrPattern, Card, IdxPat, OmegaTerm, StepPat, TermError, UPattern, VertexAddr,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankValue {
    Finite(u32),
    NoRank,
}

/// The recursion tree of deleted sets witnessing a finite U-rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum RankTree {
    /// A component (family) holding at most finitely many U-vertices.
    Leaf { members: Vec<AddrPattern> },
    /// A component (family) whose deletion step leaves the children.
    Node {
        members: Vec<AddrPattern>,
        delete: Vec<AddrPattern>,
        children: Vec<RankTree>,
    },
    /// A disjoint union: rank is the maximum child rank, plus one when
    /// infinitely many components achieve it.
    Union {
        members: Vec<AddrPattern>,
        children: Vec<RankTree>,
        bump: bool,
    },
}

impl RankTree {
    pub fn rank(&self) -> u32 {
        match self {
            RankTree::Leaf { .. } => 0,
            RankTree::Node { children, .. } => {
                1 + children.iter().map(RankTree::rank).max().unwrap_or(0)
            }
            RankTree::Union { children, bump, .. } => {
                children.iter().map(RankTree::rank).max().unwrap_or(0) + u32::from(*bump)
            }
        }
    }
}

/// Compute the U-rank. `NoRank` exactly when a comb is attached to U, in
/// which case the witness is a comb certificate (see `comb_certificate`);
/// otherwise the witness is the deletion recursion tree.
pub fn u_rank(
    t: &OmegaTerm,
    u: &UPattern,
) -> Result<(RankValue, Option<RankTree>), BoundaryError> {
    for p in &u.0 {
        if !t.pattern_resolves(p) {
            return Err(TermError::UnresolvablePattern(p.to_string()).into());
        }
    }
    // Disconnected terms are allowed here, so test comb existence directly
    // against the end list rather than through boundary_gamma.
    for e in ends(t)? {
        if super::end_in_closure(t, &e, u)?.is_some() {
            return Ok((RankValue::NoRank, None));
        }
    }
    let comps = Components::analyze(t, &UPattern::default())?;
    let mut children = Vec::new();
    let mut max = 0u32;
    let mut finite_achievers = 0usize;
    let mut family_achiever = false;
    for c in &comps.classes {
        let (r, tree) = rank_class(t, u, &[], c)?;
        if r > max {
            max = r;
            finite_achievers = 0;
            family_achiever = false;
        }
        if r == max {
            if c.component_count() == Card::Infinite {
                family_achiever = true;
            } else {
                finite_achievers += 1;
            }
        }
        children.push(tree);
    }
    let _ = finite_achievers;
    if children.len() == 1 && !family_achiever {
        let tree = children.pop().unwrap();
        let r = tree.rank();
        return Ok((RankValue::Finite(r), Some(tree)));
    }
    let bump = family_achiever;
    let tree = RankTree::Union {
        members: t.all_vertices().0,
        children,
        bump,
    };
    Ok((RankValue::Finite(max + u32::from(bump)), Some(tree)))
}

/// Per-instance census of U inside a component class: infinite iff some
/// pattern meet leaves a non-dim position free.
fn instance_census_infinite(c: &CompClass, u: &UPattern) -> bool {
    for r in &c.rep {
        for q in &u.0 {
            if let Some(m) = r.meet(q) {
                if m.unbounded {
                    return true;
                }
                let dims: Vec<&String> = c.dims.iter().map(|d| &d.var).collect();
                if m.left_free.iter().any(|v| !dims.contains(&v)) {
                    return true;
                }
                // Star positions on the left count as free member positions.
                let has_star = r.0.iter().any(|s| matches!(s.idx(), Some(IdxPat::Star)));
                if has_star && r.meet(q).is_some() {
                    // check whether the star position is actually matched
                    // against something unbounded on the right
                    if q.0.iter().zip(r.0.iter()).any(|(sq, sr)| {
                        matches!(sr.idx(), Some(IdxPat::Star))
                            && !matches!(sq.idx(), Some(IdxPat::Concrete(_)))
                    }) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn rank_class(
    t: &OmegaTerm,
    u: &UPattern,
    deleted: &[AddrPattern],
    class: &CompClass,
) -> Result<(u32, RankTree), BoundaryError> {
    if !instance_census_infinite(class, u) {
        return Ok((0, RankTree::Leaf { members: class.rep.clone() }));
    }
    // Successor step: delete the class's neighbourhood (generalised over
    // the family) plus the base-side hull at the class's position.
    let mut delete: Vec<AddrPattern> = deleted.to_vec();
    for nb in &class.nbhd {
        delete.push(generalize_dims(nb));
    }
    next_deletion(t, &class.rep, &mut delete)?;
    delete.sort();
    delete.dedup();
    let sub = Components::analyze(t, &UPattern(delete.clone()))?;
    let mut children = Vec::new();
    let mut max = 0u32;
    for c in &sub.classes {
        if !contained_in(class, c) {
            continue;
        }
        let (r, tree) = rank_class(t, u, &delete, c)?;
        max = max.max(r);
        children.push(tree);
    }
    if children.is_empty() {
        // Everything with infinite census must leave residue; an empty
        // child list means U inside the instance was covered by the hull.
        return Ok((1, RankTree::Node {
            members: class.rep.clone(),
            delete,
            children,
        }));
    }
    Ok((1 + max, RankTree::Node { members: class.rep.clone(), delete, children }))
}

/// Replace every bound index var by a star (uniform over the family).
fn generalize_dims(p: &AddrPattern) -> AddrPattern {
    let mut q = p.clone();
    for s in q.0.iter_mut() {
        if let StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) = s {
            if matches!(i, IdxPat::Bound { .. }) {
                *i = IdxPat::Star;
            }
        }
    }
    q
}

/// The next rank deletion for a class: the base-side hull at the term node
/// the class sits at. Classes living inside copies or segments descend one
/// level, lifted uniformly across the family.
fn next_deletion(
    t: &OmegaTerm,
    reps: &[AddrPattern],
    out: &mut Vec<AddrPattern>,
) -> Result<(), TermError> {
    let at_node = reps.iter().any(|r| {
        matches!(
            r.0.first(),
            Some(StepPat::Base) | Some(StepPat::K(_)) | Some(StepPat::Leaf(_))
        )
    });
    if at_node {
        out.extend(node_hull(t));
        return Ok(());
    }
    // All member patterns descend into copies or segments.
    let copies = reps.iter().all(|r| matches!(r.0.first(), Some(StepPat::Copy(_))));
    let segs = reps.iter().all(|r| matches!(r.0.first(), Some(StepPat::Seg(_))));
    let stripped: Vec<AddrPattern> = reps.iter().map(AddrPattern::strip_first).collect();
    match t {
        OmegaTerm::Omega { copy, .. } if copies => {
            let mut inner = Vec::new();
            next_deletion(copy, &stripped, &mut inner)?;
            for p in inner {
                out.push(p.prefixed(StepPat::Copy(IdxPat::Star)));
            }
            Ok(())
        }
        OmegaTerm::Chain { segment, .. } if segs => {
            let mut inner = Vec::new();
            next_deletion(segment, &stripped, &mut inner)?;
            for p in inner {
                out.push(p.prefixed(StepPat::Seg(IdxPat::Star)));
            }
            Ok(())
        }
        _ => Err(TermError::UnresolvablePattern(format!(
            "rank descent does not fit the term shape: {:?}",
            reps.first()
        ))),
    }
}

/// The finite base-side hull of a term node: every base Finite-leaf vertex
/// and every base-side link anchor, recursively through bases.
fn node_hull(t: &OmegaTerm) -> Vec<AddrPattern> {
    fn hull(t: &OmegaTerm, out: &mut Vec<AddrPattern>) {
        match t {
            OmegaTerm::Finite { vertices, .. } => {
                for v in vertices {
                    out.push(AddrPattern(vec![StepPat::Leaf(v.clone())]));
                }
            }
            OmegaTerm::KOmega => {}
            OmegaTerm::Omega { base, links, .. } => {
                let mut inner = Vec::new();
                hull(base, &mut inner);
                for p in inner {
                    out.push(p.prefixed(StepPat::Base));
                }
                for (a, _) in links {
                    out.push(AddrPattern::from_addr(a).prefixed(StepPat::Base));
                }
            }
            OmegaTerm::Chain { base, links, .. } => {
                if let Some(b) = base {
                    let mut inner = Vec::new();
                    hull(b, &mut inner);
                    for p in inner {
                        out.push(p.prefixed(StepPat::Base));
                    }
                    for (a, _) in links {
                        out.push(AddrPattern::from_addr(a).prefixed(StepPat::Base));
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    hull(t, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Is the (representative) child class contained in the parent class?
fn contained_in(parent: &CompClass, child: &CompClass) -> bool {
    let Some(probe) = child_probe(child) else { return false };
    parent.instance_of(&probe).is_some()
}

fn child_probe(c: &CompClass) -> Option<VertexAddr> {
    for r in &c.rep {
        let free = r.free_positions();
        if let Some(a) = r.instantiate_positional(&vec![0; free]) {
            return Some(a);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Witness replay.
// ---------------------------------------------------------------------------

/// Replay a rank tree against truncations: member sets must decompose as
/// claimed and leaves must hold boundedly many U-vertices. Returns the
/// rank encoded by the tree shape.
pub fn verify_rank_tree(
    t: &OmegaTerm,
    u: &UPattern,
    tree: &RankTree,
    budget: u32,
) -> Result<u32, String> {
    for n in [budget.max(4) - 1, budget.max(4)] {
        let g = t.truncate(n);
        let all: BTreeSet<VertexAddr> = g.vertices().cloned().collect();
        replay(&g, u, tree, &all, n, true)?;
    }
    // Per-component leaf U-census must not grow with the truncation.
    let mut maxima = Vec::new();
    for n in [budget.max(4) - 1, budget.max(4)] {
        let g = t.truncate(n);
        let mut ms = Vec::new();
        leaf_maxima(&g, u, tree, n, &mut ms);
        maxima.push(ms);
    }
    if maxima[0] != maxima[1] {
        return Err(format!(
            "a leaf component's U-census grows with the truncation: {:?} vs {:?}",
            maxima[0], maxima[1]
        ));
    }
    Ok(tree.rank())
}

fn member_set(
    g: &crate::term_graphs::FiniteGraph,
    pats: &[AddrPattern],
    n: u32,
) -> BTreeSet<VertexAddr> {
    let mut out = BTreeSet::new();
    for p in pats {
        for a in crate::separations::enumerate_in_truncation(p, n) {
            if g.contains(&a) {
                out.insert(a);
            }
        }
    }
    out
}

fn replay(
    g: &crate::term_graphs::FiniteGraph,
    u: &UPattern,
    tree: &RankTree,
    ambient: &BTreeSet<VertexAddr>,
    n: u32,
    top: bool,
) -> Result<(), String> {
    match tree {
        RankTree::Leaf { members } => {
            let mem = member_set(g, members, n);
            if !mem.is_subset(ambient) {
                return Err("leaf members escape their component".to_string());
            }
            Ok(())
        }
        RankTree::Node { members, delete, children } => {
            let mem = member_set(g, members, n);
            if !top && !mem.is_subset(ambient) {
                return Err("node members escape their component".to_string());
            }
            let del = member_set(g, delete, n);
            let remaining: BTreeSet<VertexAddr> = mem.difference(&del).cloned().collect();
            let mut covered: BTreeSet<VertexAddr> = BTreeSet::new();
            for ch in children {
                let cm = match ch {
                    RankTree::Leaf { members }
                    | RankTree::Node { members, .. }
                    | RankTree::Union { members, .. } => member_set(g, members, n),
                };
                if !cm.is_subset(&remaining) {
                    return Err("child members not inside the deleted remainder".to_string());
                }
                if cm.iter().any(|v| covered.contains(v)) {
                    return Err("children overlap".to_string());
                }
                covered.extend(cm.iter().cloned());
                replay(g, u, ch, &cm, n, false)?;
            }
            // Children jointly cover the U-carrying remainder.
            for v in &remaining {
                if u.contains(v) && !covered.contains(v) {
                    return Err(format!("U-vertex {v} not covered by any child"));
                }
            }
            // No edges may join different children (component soundness).
            let h = g.delete(&g.vertices().filter(|v| !remaining.contains(v)).cloned().collect());
            for comp in h.components() {
                let mut owners: BTreeSet<usize> = BTreeSet::new();
                for v in &comp {
                    for (i, ch) in children.iter().enumerate() {
                        let cm = match ch {
                            RankTree::Leaf { members }
                            | RankTree::Node { members, .. }
                            | RankTree::Union { members, .. } => member_set(g, members, n),
                        };
                        if cm.contains(v) {
                            owners.insert(i);
                        }
                    }
                }
                if owners.len() > 1 {
                    return Err("a component crosses two children".to_string());
                }
            }
            Ok(())
        }
        RankTree::Union { members, children, .. } => {
            let mem = member_set(g, members, n);
            if !top && !mem.is_subset(ambient) {
                return Err("union members escape their component".to_string());
            }
            for ch in children {
                let cm = match ch {
                    RankTree::Leaf { members }
                    | RankTree::Node { members, .. }
                    | RankTree::Union { members, .. } => member_set(g, members, n),
                };
                replay(g, u, ch, &cm, n, false)?;
            }
            Ok(())
        }
    }
}

/// For every leaf, in tree order: the largest U-count over the components
/// of the truncated member set.
fn leaf_maxima(
    g: &crate::term_graphs::FiniteGraph,
    u: &UPattern,
    tree: &RankTree,
    n: u32,
    out: &mut Vec<usize>,
) {
    match tree {
        RankTree::Leaf { members } => {
            let mem = member_set(g, members, n);
            let h = g.delete(&g.vertices().filter(|v| !mem.contains(v)).cloned().collect());
            let m = h
                .components()
                .iter()
                .map(|c| c.iter().filter(|v| u.contains(v)).count())
                .max()
                .unwrap_or(0);
            out.push(m);
        }
        RankTree::Node { children, .. } | RankTree::Union { children, .. } => {
            for c in children {
                leaf_maxima(g, u, c, n, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    fn rank_of(t: &OmegaTerm, u: &UPattern) -> RankValue {
        u_rank(t, u).unwrap().0
    }

    #[test]
    fn finite_terms_have_rank_zero() {
        let t = p3();
        assert_eq!(rank_of(&t, &all(&t)), RankValue::Finite(0));
    }

    #[test]
    fn star_has_rank_one() {
        assert_eq!(rank_of(&star(), &star_leaves()), RankValue::Finite(1));
        assert_eq!(rank_of(&spider(), &spider_leaves()), RankValue::Finite(1));
    }

    #[test]
    fn t3_has_rank_two() {
        assert_eq!(rank_of(&t3(), &all(&t3())), RankValue::Finite(2));
    }

    #[test]
    fn comb_carriers_have_no_rank() {
        assert_eq!(rank_of(&ray(), &all(&ray())), RankValue::NoRank);
        assert_eq!(rank_of(&komega(), &all(&komega())), RankValue::NoRank);
        assert_eq!(rank_of(&comb(), &comb_teeth()), RankValue::NoRank);
        assert_eq!(rank_of(&domray(), &all(&domray())), RankValue::NoRank);
        assert_eq!(rank_of(&star_of_rays(), &all(&star_of_rays())), RankValue::NoRank);
    }

    #[test]
    fn rank_respects_subset_monotonicity() {
        // U' ⊆ U gives rank(U') <= rank(U).
        let t = t3();
        let u_all = all(&t);
        let u_sub: UPattern = "C(*)/C(*)/V(t)".parse().unwrap();
        let (RankValue::Finite(r_all), _) = u_rank(&t, &u_all).unwrap() else {
            panic!()
        };
        let (RankValue::Finite(r_sub), _) = u_rank(&t, &u_sub).unwrap() else {
            panic!()
        };
        assert!(r_sub <= r_all);
    }

    #[test]
    fn rank_trees_replay_on_truncations() {
        for (t, u, want) in [
            (star(), star_leaves(), 1),
            (t3(), all(&t3()), 2),
            (spider(), spider_leaves(), 1),
            (p3(), all(&p3()), 0),
        ] {
            let (v, tree) = u_rank(&t, &u).unwrap();
            assert_eq!(v, RankValue::Finite(want));
            let tree = tree.expect("witness");
            let got = verify_rank_tree(&t, &u, &tree, 6)
                .unwrap_or_else(|e| panic!("replay failed: {e}"));
            assert_eq!(got, want);
        }
    }
}

//! The decomposition constructions: the tree-decomposition stemming from a
//! rayless normal tree, its expansion with explicit critical-set nodes,
//! squeezing, and the combined pipeline.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    pattern_var_names, ClassNode, ClassTree, NodeLabel, TDScheme, TdError,
};
use crate::boundary::{self, CritPattern, RankValue};
use crate::normal_trees::TreeScheme;
use crate::separations::Components;
use crate::term_graphs::{AddrPattern, IdxPat, OmegaTerm, StepPat, UPattern, VertexAddr};

/// The skeleton of a tree scheme as a class tree, with per-class member
/// pattern and the generalised ancestor (down-closure) patterns.
struct SchemeSkeleton {
    ct: ClassTree,
    /// Per class: the member pattern of the scheme it stands for.
    member: Vec<AddrPattern>,
    /// Per class: the down-closure patterns (the member and its ancestors).
    down: Vec<Vec<AddrPattern>>,
}

/// Probe values used to recover the var correspondence between a member
/// instance and its parent's pattern.
fn probe_env(vars: &[String]) -> Vec<(String, u32)> {
    vars.iter()
        .enumerate()
        .map(|(k, v)| (v.clone(), 17 + 4 * k as u32))
        .collect()
}

fn ordered_vars(p: &AddrPattern) -> Vec<String> {
    let mut out = Vec::new();
    for s in &p.0 {
        if let Some(v) = s.idx().and_then(IdxPat::var_name) {
            if !out.iter().any(|x| x == v) {
                out.push(v.to_string());
            }
        }
    }
    out
}

/// Rename the vars of `p` via the map, leaving others.
fn rename_vars(p: &AddrPattern, map: &BTreeMap<String, String>) -> AddrPattern {
    let mut q = p.clone();
    for s in q.0.iter_mut() {
        if let StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) = s {
            match i {
                IdxPat::Bound { var, .. } | IdxPat::Strided { var, .. } => {
                    if let Some(n) = map.get(var) {
                        *var = n.clone();
                    }
                }
                _ => {}
            }
        }
    }
    q
}

/// Convert a rayless normal tree scheme into a class tree whose classes
/// carry down-closure parts.
fn scheme_skeleton(t: &OmegaTerm, s: &TreeScheme) -> Result<SchemeSkeleton, TdError> {
    if !s.is_structurally_rayless() {
        return Err(TdError::NotRayless);
    }
    let members: Vec<AddrPattern> = s.members.0.iter().map(|p| p.clone()).collect();
    // Identify each member pattern's parent pattern and var correspondence.
    let find_class = |a: &VertexAddr| -> Option<(usize, Vec<(String, u32)>)> {
        members.iter().enumerate().find_map(|(i, m)| m.matches(a).map(|env| (i, env)))
    };
    let n = members.len();
    let mut parent_of: Vec<Option<usize>> = vec![None; n];
    let mut canon: Vec<Vec<String>> = vec![Vec::new(); n]; // canonical var names per class
    let mut raw_vars: Vec<Vec<String>> = Vec::new();
    for m in &members {
        raw_vars.push(ordered_vars(m));
    }
    // Root class.
    let root_class = find_class(&s.root)
        .ok_or_else(|| TdError::Malformed("root is not a member".to_string()))?
        .0;
    // BFS assignment of canonical names: the class introducing var k in
    // its chain names it after its position in the chain.
    let mut order: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = (0..n).collect();
    canon[root_class] = raw_vars[root_class].clone();
    order.push(root_class);
    pending.retain(|&i| i != root_class);
    let mut guard = 0;
    while !pending.is_empty() {
        guard += 1;
        if guard > n + 2 {
            return Err(TdError::Malformed(
                "member classes do not form a rooted hierarchy".to_string(),
            ));
        }
        let mut progressed = Vec::new();
        for &i in &pending {
            let env = probe_env(&raw_vars[i]);
            let Some(inst) = members[i].instantiate(&env) else {
                return Err(TdError::Malformed(format!("cannot instantiate {}", members[i])));
            };
            let Some(par) = s.parent_of(&inst) else {
                return Err(TdError::Malformed(format!("no parent for member {}", members[i])));
            };
            let Some((pc, penv)) = find_class(&par) else {
                return Err(TdError::Malformed(format!("parent {par} is not a member")));
            };
            if !order.contains(&pc) {
                continue;
            }
            parent_of[i] = Some(pc);
            // Var correspondence: parent var bound to value v came from the
            // child var with probe value v.
            let mut rename: BTreeMap<String, String> = BTreeMap::new();
            for (pv_raw, val) in &penv {
                let Some((cv, _)) = env.iter().find(|(_, v)| v == val) else {
                    return Err(TdError::Malformed(format!(
                        "parent of {} uses an index the child does not carry",
                        members[i]
                    )));
                };
                // Parent raw var -> parent canonical name; child var cv maps
                // to the same canonical name.
                let ppos = raw_vars[pc].iter().position(|x| x == pv_raw).unwrap();
                let pname = canon[pc][ppos].clone();
                rename.insert(cv.clone(), pname);
            }
            let mut names = Vec::new();
            for rv in &raw_vars[i] {
                match rename.get(rv) {
                    Some(nm) => names.push(nm.clone()),
                    None => names.push(format!("v{}_{}", i, rv)),
                }
            }
            canon[i] = names;
            order.push(i);
            progressed.push(i);
        }
        if progressed.is_empty() {
            return Err(TdError::Malformed("cyclic member class structure".to_string()));
        }
        pending.retain(|i| !progressed.contains(i));
    }
    // Build the class tree in `order`, computing down-closures on probes.
    let mut ct = ClassTree::default();
    let mut class_idx: BTreeMap<usize, usize> = BTreeMap::new();
    let mut member_out = Vec::new();
    let mut down_out = Vec::new();
    for &i in &order {
        let rename: BTreeMap<String, String> = raw_vars[i]
            .iter()
            .cloned()
            .zip(canon[i].iter().cloned())
            .collect();
        let member_canon = rename_vars(&members[i], &rename);
        // The down-closure: generalise the representative's ancestors.
        let env = probe_env(&canon[i]);
        let inst = member_canon.instantiate(&env).expect("instantiates");
        let anc = s
            .ancestors(&inst)
            .ok_or_else(|| TdError::Malformed("broken ancestor chain".to_string()))?;
        let mut down = Vec::new();
        for a in &anc {
            down.push(generalize_by_env(a, &env));
        }
        down.sort();
        down.dedup();
        let new_var = match parent_of[i] {
            Some(p) => {
                let pvars: BTreeSet<&String> = canon[p].iter().collect();
                let fresh: Vec<&String> =
                    canon[i].iter().filter(|v| !pvars.contains(*v)).collect();
                if fresh.len() > 1 {
                    return Err(TdError::Malformed(
                        "a member class introduces more than one index".to_string(),
                    ));
                }
                fresh.first().map(|v| (*v).clone())
            }
            None => {
                if !canon[i].is_empty() {
                    return Err(TdError::Malformed("the root class carries an index".to_string()));
                }
                None
            }
        };
        let idx = ct.add(ClassNode {
            parent: parent_of[i].map(|p| class_idx[&p]),
            new_var,
            label: NodeLabel::TntNode { vertex: member_canon.clone() },
            part: down.clone(),
            separator: Vec::new(),
            beyond: Vec::new(),
        });
        class_idx.insert(i, idx);
        member_out.push(member_canon);
        down_out.push(down);
    }
    // Separators: the parent's down-closure.
    for idx in 0..ct.nodes.len() {
        if let Some(p) = ct.nodes[idx].parent {
            ct.nodes[idx].separator = ct.nodes[p].part.clone();
        }
    }
    let _ = t;
    Ok(SchemeSkeleton { ct, member: member_out, down: down_out })
}

/// Generalise a concrete address by replacing probe values with their vars.
fn generalize_by_env(a: &VertexAddr, env: &[(String, u32)]) -> AddrPattern {
    let mut steps = Vec::new();
    for st in &a.0 {
        let gen = match st {
            crate::term_graphs::Step::Copy(i) => {
                Some((StepPat::Copy(IdxPat::Concrete(*i)), *i, 0u8))
            }
            crate::term_graphs::Step::Seg(i) => Some((StepPat::Seg(IdxPat::Concrete(*i)), *i, 1)),
            crate::term_graphs::Step::K(i) => Some((StepPat::K(IdxPat::Concrete(*i)), *i, 2)),
            crate::term_graphs::Step::Base => None,
            crate::term_graphs::Step::Leaf(_) => None,
        };
        match gen {
            Some((default, val, kind)) => {
                let found = env.iter().find(|(_, v)| *v == val);
                let ip = match found {
                    Some((var, _)) => IdxPat::bound(var),
                    None => match default {
                        StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) => i,
                        _ => unreachable!(),
                    },
                };
                steps.push(match kind {
                    0 => StepPat::Copy(ip),
                    1 => StepPat::Seg(ip),
                    _ => StepPat::K(ip),
                });
            }
            None => steps.push(StepPat::from_step(st)),
        }
    }
    AddrPattern(steps)
}

/// The hanging components of G - T, grouped by their attachment maximum:
/// (component class, generalised reps, nbhd patterns, attachment class).
struct HangingComp {
    reps: Vec<AddrPattern>,
    nbhd: Vec<AddrPattern>,
    /// Class index (in the skeleton order) of the attachment maximum.
    at_class: usize,
    /// The component's own dims renamed to follow the attachment class's
    /// canonical vars, plus fresh ones.
    new_vars: Vec<String>,
}

fn hanging_components(
    t: &OmegaTerm,
    s: &TreeScheme,
    skel: &SchemeSkeleton,
) -> Result<Vec<HangingComp>, TdError> {
    let comps = Components::analyze(t, &s.members)?;
    let mut out = Vec::new();
    for (ci, c) in comps.classes.iter().enumerate() {
        // Attachment chain: the nbhd patterns; its maximum is the deepest
        // (the one whose down-closure contains the others).
        if c.nbhd.is_empty() {
            return Err(TdError::Malformed(format!(
                "component class {ci} of G - T has empty neighbourhood"
            )));
        }
        // Identify the attachment member classes via meets against the
        // skeleton members, and rename the comp dims accordingly.
        let mut best: Option<(usize, usize)> = None; // (skeleton class, depth)
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        for nb in &c.nbhd {
            for (k, m) in skel.member.iter().enumerate() {
                if let Some(meet) = m.meet(nb) {
                    // nb's vars linked to member vars take their names.
                    for (mv, nv, delta) in &meet.links {
                        if *delta == 0 {
                            rename.insert(nv.clone(), mv.clone());
                        }
                    }
                    let depth = skel.down[k].len();
                    if best.map_or(true, |(_, d)| depth > d) {
                        best = Some((k, depth));
                    }
                }
            }
        }
        let Some((at_class, _)) = best else {
            return Err(TdError::Malformed(
                "component attachment does not match any tree member".to_string(),
            ));
        };
        let reps: Vec<AddrPattern> = c.rep.iter().map(|p| rename_vars(p, &rename)).collect();
        let nbhd: Vec<AddrPattern> = c.nbhd.iter().map(|p| rename_vars(p, &rename)).collect();
        let at_vars: BTreeSet<String> = skel.ct.nodes[at_class]
            .part
            .iter()
            .flat_map(|p| pattern_var_names(p))
            .collect();
        let new_vars: Vec<String> = c
            .dims
            .iter()
            .map(|d| rename.get(&d.var).cloned().unwrap_or_else(|| d.var.clone()))
            .filter(|v| !at_vars.contains(v))
            .collect();
        out.push(HangingComp { reps, nbhd, at_class, new_vars });
    }
    Ok(out)
}

/// The Theorem 2 construction: parts are down-closures along the normal
/// tree, plus one leaf per off-tree component carrying the component and
/// its attachment chain.
pub fn td_from_normal_tree(t: &OmegaTerm, s: &TreeScheme) -> Result<TDScheme, TdError> {
    let rep = crate::normal_trees::check_normal(t, s, 5)
        .map_err(|e| TdError::Malformed(e.to_string()))?;
    if !rep.normal {
        return Err(TdError::NotNormal);
    }
    let skel = scheme_skeleton(t, s)?;
    let mut ct = skel.ct.clone();
    for h in hanging_components(t, s, &skel)? {
        if h.new_vars.len() > 1 {
            return Err(TdError::Malformed(
                "a hanging component family adds more than one index".to_string(),
            ));
        }
        let mut part = ct.nodes[h.at_class].part.clone();
        part.extend(h.reps.clone());
        ct.add(ClassNode {
            parent: Some(h.at_class),
            new_var: h.new_vars.first().cloned(),
            label: NodeLabel::ComponentNode,
            part,
            separator: ct.nodes[h.at_class].part.clone(),
            beyond: h.reps.clone(),
        });
    }
    fill_beyond(&mut ct);
    Ok(ct.into_td(false))
}

/// Beyond-side of each parent edge: the subtree's member/part material.
fn fill_beyond(ct: &mut ClassTree) {
    let n = ct.nodes.len();
    for i in 0..n {
        if ct.nodes[i].parent.is_none() {
            continue;
        }
        if !ct.nodes[i].beyond.is_empty() {
            continue;
        }
        // Collect the subtree's parts minus this node's separator material.
        let mut in_subtree = vec![false; n];
        in_subtree[i] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for j in 0..n {
                if !in_subtree[j] {
                    if let Some(p) = ct.nodes[j].parent {
                        if in_subtree[p] {
                            in_subtree[j] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        let sep: BTreeSet<AddrPattern> = ct.nodes[i].separator.iter().cloned().collect();
        let mut beyond = Vec::new();
        for (j, node) in ct.nodes.iter().enumerate() {
            if in_subtree[j] {
                for p in &node.part {
                    if !sep.contains(p) && !beyond.contains(p) {
                        beyond.push(p.clone());
                    }
                }
            }
        }
        ct.nodes[i].beyond = beyond;
    }
}

/// The expansion of a normal tree: insert one node per critical vertex set
/// in the closure of the tree, re-hang the matching branches and hanging
/// components below it, and keep down-closure parts elsewhere.
pub fn expansion(t: &OmegaTerm, s: &TreeScheme) -> Result<TDScheme, TdError> {
    let rep = crate::normal_trees::check_normal(t, s, 5)
        .map_err(|e| TdError::Malformed(e.to_string()))?;
    if !rep.normal {
        return Err(TdError::NotNormal);
    }
    let skel = scheme_skeleton(t, s)?;
    let hanging = hanging_components(t, s, &skel)?;
    // Hypothesis: components of G - T have finite neighbourhood.
    for h in &hanging {
        for nb in &h.nbhd {
            let vars = pattern_var_names(nb);
            let own: BTreeSet<String> = h
                .nbhd
                .iter()
                .chain(h.reps.iter())
                .flat_map(|p| pattern_var_names(p))
                .collect();
            if nb.0.iter().any(|st| matches!(st.idx(), Some(IdxPat::Star))) || !vars.is_subset(&own)
            {
                return Err(TdError::InfiniteNeighbourhood);
            }
        }
    }
    // Critical vertex sets in the closure of the tree.
    let crits: Vec<CritPattern> = boundary::critical_sets(t)?
        .into_iter()
        .filter(|c| {
            boundary::crit_in_closure(t, c, &s.members)
                .ok()
                .flatten()
                .is_some()
        })
        .collect();

    let mut ct = skel.ct.clone();
    // Insert crit nodes. The attachment is the deepest member class whose
    // member pattern appears in X.
    let mut crit_node_of: Vec<usize> = Vec::new();
    for x in &crits {
        let mut best: Option<(usize, usize)> = None;
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        for xm in &x.members {
            for (k, m) in skel.member.iter().enumerate() {
                if let Some(meet) = m.meet(xm) {
                    for (mv, nv, delta) in &meet.links {
                        if *delta == 0 {
                            rename.insert(nv.clone(), mv.clone());
                        }
                    }
                    let depth = skel.down[k].len();
                    if best.map_or(true, |(_, d)| depth > d) {
                        best = Some((k, depth));
                    }
                }
            }
        }
        let Some((at_class, _)) = best else {
            return Err(TdError::Malformed(
                "critical set not contained in the tree".to_string(),
            ));
        };
        let x_pats: Vec<AddrPattern> = x.members.iter().map(|p| rename_vars(p, &rename)).collect();
        let idx = ct.add(ClassNode {
            parent: Some(at_class),
            new_var: None,
            label: NodeLabel::CritNode {
                crit: CritPattern { members: x_pats.clone() },
            },
            part: x_pats.clone(),
            separator: x_pats.clone(),
            beyond: Vec::new(),
        });
        crit_node_of.push(idx);
        // Re-hang tree branches whose up-component has neighbourhood X:
        // children of at_class whose separator toward the parent equals X.
        let children: Vec<usize> = (0..skel.ct.nodes.len())
            .filter(|&j| skel.ct.nodes[j].parent == Some(at_class))
            .collect();
        for j in children {
            // The branch component below j: neighbourhood = N(up-closure):
            // computed against the deletion of at_class's down-closure.
            let nb = branch_neighbourhood(t, s, &skel, j)?;
            if same_pattern_set(&nb, &x_pats) {
                ct.nodes[j].parent = Some(idx);
                ct.nodes[j].separator = x_pats.clone();
            }
        }
        // Re-hang hanging components with N(C) = X.
        for (hi, h) in hanging.iter().enumerate() {
            if h.at_class == at_class && same_pattern_set(&h.nbhd, &x_pats) {
                let mut part = x_pats.clone();
                part.extend(h.reps.clone());
                ct.add(ClassNode {
                    parent: Some(idx),
                    new_var: h.new_vars.first().cloned(),
                    label: NodeLabel::ComponentNode,
                    part,
                    separator: x_pats.clone(),
                    beyond: h.reps.clone(),
                });
                let _ = hi;
            }
        }
    }
    // Remaining hanging components attach at their chain maximum.
    for h in &hanging {
        let already = ct.nodes.iter().any(|n| {
            matches!(n.label, NodeLabel::ComponentNode) && same_pattern_set(&n.beyond, &h.reps)
        });
        if already {
            continue;
        }
        let mut part = ct.nodes[h.at_class].part.clone();
        part.extend(h.reps.clone());
        ct.add(ClassNode {
            parent: Some(h.at_class),
            new_var: h.new_vars.first().cloned(),
            label: NodeLabel::ComponentNode,
            part,
            separator: ct.nodes[h.at_class].part.clone(),
            beyond: h.reps.clone(),
        });
    }
    recompute_expansion_parts(&mut ct);
    fill_beyond(&mut ct);
    Ok(ct.into_td(false))
}

/// Parts of the expansion, top-down: a TNT node's part is its vertex plus
/// the parent's interface, where a critical node's interface is X itself
/// (the inserted node cuts the ancestor set).
fn recompute_expansion_parts(ct: &mut ClassTree) {
    let n = ct.nodes.len();
    let order = {
        let mut order = Vec::new();
        let mut frontier: Vec<usize> =
            (0..n).filter(|&i| ct.nodes[i].parent.is_none()).collect();
        while let Some(i) = frontier.pop() {
            order.push(i);
            frontier.extend((0..n).filter(|&j| ct.nodes[j].parent == Some(i)));
        }
        order
    };
    let mut interface: Vec<Vec<AddrPattern>> = vec![Vec::new(); n];
    for &i in &order {
        let parent_iface = match ct.nodes[i].parent {
            Some(p) => interface[p].clone(),
            None => Vec::new(),
        };
        match ct.nodes[i].label.clone() {
            NodeLabel::TntNode { vertex } => {
                let mut part = parent_iface.clone();
                if !part.contains(&vertex) {
                    part.push(vertex);
                }
                part.sort();
                ct.nodes[i].part = part.clone();
                ct.nodes[i].separator = parent_iface;
                interface[i] = part;
            }
            NodeLabel::CritNode { crit } => {
                ct.nodes[i].part = crit.members.clone();
                ct.nodes[i].separator = crit.members.clone();
                interface[i] = crit.members.clone();
            }
            NodeLabel::ComponentNode => {
                let mut part = parent_iface.clone();
                for r in &ct.nodes[i].beyond {
                    if !part.contains(r) {
                        part.push(r.clone());
                    }
                }
                part.sort();
                ct.nodes[i].part = part;
                ct.nodes[i].separator = parent_iface.clone();
                interface[i] = parent_iface;
            }
            _ => {
                interface[i] = ct.nodes[i].part.clone();
            }
        }
    }
}

fn same_pattern_set(a: &[AddrPattern], b: &[AddrPattern]) -> bool {
    let na: BTreeSet<String> = a.iter().map(|p| p.normalized().to_string()).collect();
    let nb: BTreeSet<String> = b.iter().map(|p| p.normalized().to_string()).collect();
    na == nb
}

/// The branch below class j: its up-component's neighbourhood, i.e. the
/// part of the parent's down-closure the branch attaches to.
fn branch_neighbourhood(
    t: &OmegaTerm,
    s: &TreeScheme,
    skel: &SchemeSkeleton,
    j: usize,
) -> Result<Vec<AddrPattern>, TdError> {
    // Delete the parent's down-closure and look up the component holding
    // the branch member's probe vertex.
    let parent = skel.ct.nodes[j].parent.expect("non-root branch");
    let del: Vec<AddrPattern> = skel.ct.nodes[parent]
        .part
        .iter()
        .map(|p| generalize_all_vars(p))
        .collect();
    let comps = Components::analyze(t, &UPattern(del))?;
    let member = &skel.member[j];
    let probe = member
        .instantiate_positional(&vec![0; member.free_positions()])
        .ok_or_else(|| TdError::Malformed("branch probe".to_string()))?;
    let Some((k, _asg)) = comps.class_of(&probe) else {
        return Err(TdError::Malformed("branch probe outside all components".to_string()));
    };
    // Keep the raw dim vars: the comparison against the critical set is by
    // normalised shape.
    let _ = s;
    Ok(comps.classes[k].nbhd.clone())
}

/// Replace every bound var by a star (family-wide deletion pattern).
fn generalize_all_vars(p: &AddrPattern) -> AddrPattern {
    let mut q = p.clone();
    for s in q.0.iter_mut() {
        if let StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) = s {
            if matches!(i, IdxPat::Bound { .. } | IdxPat::Strided { .. }) {
                *i = IdxPat::Star;
            }
        }
    }
    q
}

/// Squeeze: for every internal node of finite degree > 1 with an infinite
/// part, delegate the part to a fresh leaf and shrink the node's part to
/// the union of its incident separators.
pub fn squeeze(d: &TDScheme) -> Result<TDScheme, TdError> {
    // Reconstruct the class tree from the scheme.
    let mut ct = ClassTree::default();
    let mut index_of: BTreeMap<String, usize> = BTreeMap::new();
    for (i, c) in d.classes.iter().enumerate() {
        let parent = c.parent.as_ref().map(|pp| {
            d.classes
                .iter()
                .position(|x| &x.node == pp)
                .expect("parent class present")
        });
        let own: Vec<String> = ordered_vars(&c.node);
        let parent_vars: BTreeSet<String> = parent
            .map(|p| pattern_var_names(&d.classes[p].node).into_iter().collect())
            .unwrap_or_default();
        let new_var = own.into_iter().find(|v| !parent_vars.contains(v));
        let idx = ct.add(ClassNode {
            parent,
            new_var,
            label: d.classes[i].label.clone(),
            part: c.part.clone(),
            separator: c.separator.clone(),
            beyond: c.beyond.clone(),
        });
        index_of.insert(c.node.to_string(), idx);
    }
    for c in &d.classes {
        let vars = pattern_var_names(&c.separator.iter().cloned().fold(
            AddrPattern::default(),
            |mut acc, p| {
                acc.0.extend(p.0);
                acc
            },
        ));
        let node_vars = pattern_var_names(&c.node);
        if !vars.is_subset(&node_vars)
            || c.separator.iter().any(|p| p.0.iter().any(|s| matches!(s.idx(), Some(IdxPat::Star))))
        {
            return Err(TdError::InfiniteSeparator);
        }
    }
    let n = ct.nodes.len();
    for i in 0..n {
        // Degree: parent edge + same-var children (one per instance) is
        // finite; any new-var child family makes it infinite.
        let children: Vec<usize> = (0..n).filter(|&j| ct.nodes[j].parent == Some(i)).collect();
        let family_child = children.iter().any(|&j| ct.nodes[j].new_var.is_some());
        let degree = children.len() + usize::from(ct.nodes[i].parent.is_some());
        if family_child || degree <= 1 {
            continue;
        }
        // Infinite part: free positions beyond the node's own vars.
        let node_vars = pattern_var_names(
            &d.classes
                .iter()
                .find(|c| c.part == ct.nodes[i].part)
                .map(|c| c.node.clone())
                .unwrap_or_default(),
        );
        let infinite_part = ct.nodes[i].part.iter().any(|p| {
            p.0.iter().any(|s| match s.idx() {
                Some(IdxPat::Star) => true,
                Some(IdxPat::Bound { var, .. }) | Some(IdxPat::Strided { var, .. }) => {
                    !node_vars.contains(var)
                }
                _ => false,
            })
        });
        if !infinite_part {
            continue;
        }
        let old_part = ct.nodes[i].part.clone();
        let mut new_part: Vec<AddrPattern> = ct.nodes[i].separator.clone();
        for &j in &children {
            for p in &ct.nodes[j].separator {
                if !new_part.contains(p) {
                    new_part.push(p.clone());
                }
            }
        }
        ct.nodes[i].part = new_part.clone();
        ct.add(ClassNode {
            parent: Some(i),
            new_var: None,
            label: NodeLabel::SqueezeLeaf,
            part: old_part,
            separator: new_part,
            beyond: Vec::new(),
        });
    }
    Ok(ct.into_td(d.continuation))
}

/// The combined pipeline: the squeezed expansion of the rayless normal
/// tree, with the four target properties checked.
#[derive(Debug, Clone)]
pub struct Theorem5Report {
    pub td: TDScheme,
    pub parts_meet_u_finitely: bool,
    pub nonleaf_parts_finite: bool,
    pub displays_gamma_u: bool,
    pub tame: bool,
    pub tree_rank: RankValue,
    pub u_rank: RankValue,
    pub rank_equal: bool,
}

pub fn theorem5_pipeline(
    t: &OmegaTerm,
    u: &UPattern,
) -> Result<Result<Theorem5Report, crate::normal_trees::CombObstruction>, TdError> {
    let tree = crate::normal_trees::build_rayless_normal_tree(t, u)
        .map_err(|e| TdError::Malformed(e.to_string()))?;
    let scheme = match tree {
        Ok(s) => s,
        Err(obs) => return Ok(Err(obs)),
    };
    let expanded = expansion(t, &scheme)?;
    let td = squeeze(&expanded)?;
    // Parts meet U finitely; non-leaf parts finite.
    let n_classes = td.classes.len();
    let is_leaf = |i: usize| -> bool {
        !td.classes
            .iter()
            .any(|c| c.parent.as_ref() == Some(&td.classes[i].node))
    };
    let mut parts_meet_u_finitely = true;
    let mut nonleaf_parts_finite = true;
    for i in 0..n_classes {
        let c = &td.classes[i];
        let node_vars = pattern_var_names(&c.node);
        let infinite_part = c.part.iter().any(|p| {
            p.0.iter().any(|s| match s.idx() {
                Some(IdxPat::Star) => true,
                Some(IdxPat::Bound { var, .. }) | Some(IdxPat::Strided { var, .. }) => {
                    !node_vars.contains(var)
                }
                _ => false,
            })
        });
        if infinite_part {
            if !is_leaf(i) {
                nonleaf_parts_finite = false;
            }
            // An infinite part meets U finitely iff no U pattern meets it
            // with leftover freedom.
            for p in &c.part {
                for q in &u.0 {
                    if let Some(m) = p.meet(q) {
                        let free_non_node: Vec<&String> = m
                            .left_free
                            .iter()
                            .filter(|v| !node_vars.contains(*v))
                            .collect();
                        if !free_non_node.is_empty() || m.unbounded {
                            parts_meet_u_finitely = false;
                        }
                    }
                }
            }
        }
    }
    // Display of the Gamma boundary.
    let psi = boundary::boundary_gamma(t, u).map_err(|e| TdError::Malformed(e.to_string()))?;
    let disp = super::verify_display(t, &td.as_stree(true), &psi, super::DisplayMode::Gamma)?;
    // Rank equality.
    let (tree_rank, _) = tree_rank_value(&td)?;
    let (u_rank, _) = boundary::u_rank(t, u).map_err(|e| TdError::Malformed(e.to_string()))?;
    let rank_equal = tree_rank == u_rank;
    Ok(Ok(Theorem5Report {
        tame: disp.tame,
        displays_gamma_u: disp.pass,
        td,
        parts_meet_u_finitely,
        nonleaf_parts_finite,
        tree_rank,
        u_rank,
        rank_equal,
    }))
}

pub(crate) fn tree_rank_value(
    d: &TDScheme,
) -> Result<(RankValue, Option<boundary::RankTree>), TdError> {
    let all = d.tree.all_vertices();
    boundary::u_rank(&d.tree, &all).map_err(|e| TdError::Malformed(e.to_string()))
}

//! Ends, domination, closures, critical vertex sets, the star-comb
//! dichotomy with certificates, dispersedness, and U-rank.

mod rank;
mod star_comb;

pub use rank::{u_rank, verify_rank_tree, RankTree, RankValue};
pub use star_comb::{
    comb_certificate, grow_path_or_star, star_certificate, star_comb, star_exists,
    verify_certificate, Certificate, PathOrStar, StarCombReport,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::separations::{delete_components, Components, Separation, Side, StripRelations};
use crate::term_graphs::{
    AddrPattern, Card, IdxPat, OmegaTerm, Step, StepPat, TermError, UPattern, VertexAddr,
};

#[derive(Debug, Clone, Error)]
pub enum BoundaryError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("term is disconnected")]
    Disconnected,
    #[error("U is finite; the star-comb lemma needs an infinite attachment set")]
    FiniteU,
    #[error("not an end of this term: {0}")]
    NoSuchEnd(String),
}

/// Structural connectivity verdict, cross-checked against truncations by
/// the test suite.
pub fn is_connected(t: &OmegaTerm) -> Result<bool, TermError> {
    Ok(Components::analyze(t, &UPattern::default())?.is_single_component())
}

// ---------------------------------------------------------------------------
// Ends.
// ---------------------------------------------------------------------------

/// What an end looks like at its defining term node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EndKind {
    /// A strip end of a Chain node, named by a representative glue lane
    /// (a segment-level vertex address).
    ChainTail { lane: VertexAddr },
    /// The single end of a KOmega node.
    KOmega,
}

/// An end or a uniform family of ends: a descent prefix (indices concrete
/// or star) to a Chain/KOmega node, plus the end kind there.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndPattern {
    pub prefix: Vec<StepPat>,
    pub kind: EndKind,
    /// No vertex of the whole graph dominates this end.
    pub undominated: bool,
}

impl EndPattern {
    pub fn is_concrete(&self) -> bool {
        self.prefix.iter().all(|s| s.idx().map_or(true, IdxPat::is_concrete))
    }

    /// All concrete instances with prefix indices below `n`.
    pub fn instances_up_to(&self, n: u32) -> Vec<EndPattern> {
        let stars: Vec<usize> = self
            .prefix
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.idx(), Some(IdxPat::Star)))
            .map(|(i, _)| i)
            .collect();
        if stars.is_empty() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut vals = vec![0u32; stars.len()];
        loop {
            let mut inst = self.clone();
            for (k, &pos) in stars.iter().enumerate() {
                if let StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) = &mut inst.prefix[pos] {
                    *i = IdxPat::Concrete(vals[k]);
                }
            }
            out.push(inst);
            let mut k = 0;
            loop {
                if k == vals.len() {
                    return out;
                }
                vals[k] += 1;
                if vals[k] < n {
                    break;
                }
                vals[k] = 0;
                k += 1;
            }
        }
    }

    /// A vertex that lies in `C(X, ω)` for every finite `X` whose indices
    /// are below `depth`.
    pub fn probe_vertex(&self, depth: u32) -> VertexAddr {
        let mut steps: Vec<Step> = self
            .prefix
            .iter()
            .map(|s| match s {
                StepPat::Base => Step::Base,
                StepPat::Copy(i) => Step::Copy(concrete_or(i, 0)),
                StepPat::Seg(i) => Step::Seg(concrete_or(i, 0)),
                StepPat::K(i) => Step::K(concrete_or(i, 0)),
                StepPat::Leaf(l) => Step::Leaf(l.clone()),
            })
            .collect();
        match &self.kind {
            EndKind::ChainTail { lane } => {
                steps.push(Step::Seg(depth));
                steps.extend(lane.0.iter().cloned());
            }
            EndKind::KOmega => steps.push(Step::K(depth)),
        }
        VertexAddr(steps)
    }
}

pub(crate) fn concrete_or(i: &IdxPat, d: u32) -> u32 {
    match i {
        IdxPat::Concrete(c) => *c,
        _ => d,
    }
}

/// All ends of the term, as patterns (wildcard prefixes for per-copy and
/// per-segment end families), with domination flags filled in.
pub fn ends(t: &OmegaTerm) -> Result<Vec<EndPattern>, TermError> {
    let mut out = Vec::new();
    collect_ends(t, &mut Vec::new(), &mut out)?;
    for e in out.iter_mut() {
        e.undominated = dominators_exist(t, e)?.is_none();
    }
    out.sort();
    Ok(out)
}

fn collect_ends(
    t: &OmegaTerm,
    prefix: &mut Vec<StepPat>,
    out: &mut Vec<EndPattern>,
) -> Result<(), TermError> {
    match t {
        OmegaTerm::Finite { .. } => {}
        OmegaTerm::KOmega => {
            out.push(EndPattern {
                prefix: prefix.clone(),
                kind: EndKind::KOmega,
                undominated: false,
            });
        }
        OmegaTerm::Omega { base, copy, .. } => {
            prefix.push(StepPat::Base);
            collect_ends(base, prefix, out)?;
            prefix.pop();
            prefix.push(StepPat::Copy(IdxPat::Star));
            collect_ends(copy, prefix, out)?;
            prefix.pop();
        }
        OmegaTerm::Chain { base, segment, glue, .. } => {
            if let Some(b) = base {
                prefix.push(StepPat::Base);
                collect_ends(b, prefix, out)?;
                prefix.pop();
            }
            prefix.push(StepPat::Seg(IdxPat::Star));
            collect_ends(segment, prefix, out)?;
            prefix.pop();
            // Strip ends: one per persistent lane class.
            let seg_classes = Components::analyze(segment, &UPattern::default())?.classes;
            let strip = StripRelations::compute(&seg_classes, glue, &[]);
            for cls in strip.end_classes() {
                let lane = cls
                    .iter()
                    .filter_map(|&x| lane_vertex(&strip, &seg_classes, x, glue))
                    .min()
                    .expect("persistent class has a lane");
                out.push(EndPattern {
                    prefix: prefix.clone(),
                    kind: EndKind::ChainTail { lane },
                    undominated: false,
                });
            }
        }
    }
    Ok(())
}

/// The least concrete glue-endpoint address lying in a lane node.
fn lane_vertex(
    strip: &StripRelations,
    seg_classes: &[crate::separations::CompClass],
    node: usize,
    glue: &[(VertexAddr, VertexAddr)],
) -> Option<VertexAddr> {
    let key = &strip.nodes[node];
    let mut best: Option<VertexAddr> = None;
    for (u, v) in glue {
        for a in [u, v] {
            if let Some((k, asg)) = crate::separations::class_lookup_in(seg_classes, a) {
                if k == key.0 && asg == key.1 {
                    best = match best {
                        None => Some(a.clone()),
                        Some(b) => Some(b.min(a.clone())),
                    };
                }
            }
        }
    }
    best
}

/// Which component class of an analysis the end lives in (the class of
/// `C(X, ω)` for `X` the analysis' deleted set).
pub fn end_component(
    comps: &Components,
    end: &EndPattern,
) -> Option<(usize, BTreeMap<String, u32>)> {
    let depth = probe_depth(comps);
    comps.class_of(&end.probe_vertex(depth))
}

fn probe_depth(comps: &Components) -> u32 {
    let mut m = 0u32;
    let mut scan = |p: &AddrPattern| {
        for s in &p.0 {
            match s.idx() {
                Some(IdxPat::Concrete(c)) => m = m.max(*c),
                Some(IdxPat::Bound { offset, .. }) => m = m.max(*offset),
                _ => {}
            }
        }
    };
    for p in &comps.deleted.0 {
        scan(p);
    }
    for c in &comps.classes {
        for p in c.rep.iter().chain(c.excluded.iter()) {
            scan(p);
        }
    }
    m + 41
}

/// Orient a separation by an end: the side its rays have tails in.
pub fn orient_by_end(sep: &Separation, end: &EndPattern) -> Result<Side, BoundaryError> {
    let Some((cls, asg)) = end_component(&sep.comps, end) else {
        return Err(BoundaryError::NoSuchEnd(format!("{end:?}")));
    };
    let selected = sep
        .side
        .iter()
        .any(|sp| sp.class == cls && sp.selector.accepts(&asg));
    Ok(if selected { Side::Right } else { Side::Left })
}

// ---------------------------------------------------------------------------
// Critical vertex sets.
// ---------------------------------------------------------------------------

/// A finite vertex set, or a uniform family of them sharing bound index
/// vars (one instance per assignment).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CritPattern {
    pub members: Vec<AddrPattern>,
}

impl CritPattern {
    pub fn dims(&self) -> Vec<String> {
        let mut vars = Vec::new();
        for p in &self.members {
            for s in &p.0 {
                if let Some(IdxPat::Bound { var, .. }) = s.idx() {
                    if !vars.contains(var) {
                        vars.push(var.clone());
                    }
                }
            }
        }
        vars
    }

    pub fn is_concrete(&self) -> bool {
        self.members.iter().all(|p| p.is_concrete())
    }

    pub fn instance(&self, vals: &[u32]) -> Option<BTreeSet<VertexAddr>> {
        let dims = self.dims();
        if vals.len() != dims.len() {
            return None;
        }
        let env: Vec<(String, u32)> = dims.into_iter().zip(vals.iter().copied()).collect();
        self.members.iter().map(|p| p.instantiate(&env)).collect()
    }

    pub fn concrete_instance(&self) -> Option<BTreeSet<VertexAddr>> {
        self.instance(&[])
    }
}

/// All critical vertex sets of the term, as finitely many patterns.
/// Candidates are generated structurally; each is verified through the
/// component engine.
pub fn critical_sets(t: &OmegaTerm) -> Result<Vec<CritPattern>, TermError> {
    let mut cands: BTreeSet<Vec<AddrPattern>> = BTreeSet::new();
    collect_crit_candidates(t, &mut Vec::new(), &mut cands)?;
    let mut out = Vec::new();
    for members in cands {
        let pat = CritPattern { members };
        if verify_critical(t, &pat)? {
            out.push(pat);
        }
    }
    out.sort();
    Ok(out)
}

fn collect_crit_candidates(
    t: &OmegaTerm,
    prefix: &mut Vec<StepPat>,
    out: &mut BTreeSet<Vec<AddrPattern>>,
) -> Result<(), TermError> {
    match t {
        OmegaTerm::Finite { .. } | OmegaTerm::KOmega => {}
        OmegaTerm::Omega { base, copy, links } => {
            // Detachable copy components: X = base-side endpoints linked in.
            let copy_comps = Components::analyze(copy, &UPattern::default())?;
            let mut by_class: BTreeMap<usize, BTreeSet<VertexAddr>> = BTreeMap::new();
            for (a, b) in links {
                if let Some((k, _)) = copy_comps.class_of(b) {
                    by_class.entry(k).or_default().insert(a.clone());
                }
            }
            for (_, x) in by_class {
                let members: Vec<AddrPattern> = x
                    .iter()
                    .map(|a| {
                        let mut pre = prefix.clone();
                        pre.push(StepPat::Base);
                        AddrPattern(
                            pre.into_iter().chain(a.0.iter().map(StepPat::from_step)).collect(),
                        )
                    })
                    .collect();
                out.insert(members);
            }
            prefix.push(StepPat::Base);
            collect_crit_candidates(base, prefix, out)?;
            prefix.pop();
            prefix.push(StepPat::Copy(IdxPat::bound(&format!("i{}", prefix.len()))));
            collect_crit_candidates(copy, prefix, out)?;
            prefix.pop();
        }
        OmegaTerm::Chain { base, segment, glue, links } => {
            // Detachable per-segment components: no glue endpoint inside,
            // linked from the base.
            let seg_comps = Components::analyze(segment, &UPattern::default())?;
            let glued: BTreeSet<usize> = glue
                .iter()
                .flat_map(|(u, v)| [u, v])
                .filter_map(|a| seg_comps.class_of(a).map(|(k, _)| k))
                .collect();
            let mut by_class: BTreeMap<(usize, Vec<(String, u32)>), BTreeSet<VertexAddr>> =
                BTreeMap::new();
            for (a, x) in links {
                if let Some((k, asg)) = seg_comps.class_of(x) {
                    if !glued.contains(&k) {
                        by_class
                            .entry((k, asg.into_iter().collect()))
                            .or_default()
                            .insert(a.clone());
                    }
                }
            }
            for (_, x) in by_class {
                let members: Vec<AddrPattern> = x
                    .iter()
                    .map(|a| {
                        let mut pre = prefix.clone();
                        pre.push(StepPat::Base);
                        AddrPattern(
                            pre.into_iter().chain(a.0.iter().map(StepPat::from_step)).collect(),
                        )
                    })
                    .collect();
                out.insert(members);
            }
            if let Some(b) = base {
                prefix.push(StepPat::Base);
                collect_crit_candidates(b, prefix, out)?;
                prefix.pop();
            }
            prefix.push(StepPat::Seg(IdxPat::bound(&format!("j{}", prefix.len()))));
            collect_crit_candidates(segment, prefix, out)?;
            prefix.pop();
        }
    }
    Ok(())
}

/// A candidate is critical iff the components of `G - X` include
/// infinitely many with neighbourhood exactly `X`.
fn verify_critical(t: &OmegaTerm, pat: &CritPattern) -> Result<bool, TermError> {
    let dims = pat.dims();
    let Some(x) = pat.instance(&vec![0; dims.len()]) else {
        return Ok(false);
    };
    if x.is_empty() {
        return Ok(false);
    }
    for a in &x {
        if !t.resolves(a) {
            return Ok(false);
        }
    }
    let comps = delete_components(t, &x)?;
    Ok(count_nbhd_exactly(&comps, &x) == Card::Infinite)
}

/// Number of component instances with neighbourhood exactly `x`.
pub(crate) fn count_nbhd_exactly(comps: &Components, x: &BTreeSet<VertexAddr>) -> Card {
    let mut total = Card::Finite(0);
    for c in &comps.classes {
        total = match (total, crate::separations::nbhd_exact_count(c, x)) {
            (Card::Finite(a), Card::Finite(b)) => Card::Finite(a + b),
            _ => Card::Infinite,
        };
    }
    total
}

// ---------------------------------------------------------------------------
// Closures.
// ---------------------------------------------------------------------------

/// Which instances of a pattern family are in the closure of M.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InClosure {
    All,
    Instances(Vec<Vec<u32>>),
}

/// The boundary `∂_Γ M`: end patterns and critical-set patterns lying in
/// the closure of `M`, with instance selectors for families.
pub type GammaBoundary = (Vec<(EndPattern, InClosure)>, Vec<(CritPattern, InClosure)>);

pub fn boundary_gamma(t: &OmegaTerm, m: &UPattern) -> Result<GammaBoundary, BoundaryError> {
    if !is_connected(t)? {
        return Err(BoundaryError::Disconnected);
    }
    for p in &m.0 {
        if !t.pattern_resolves(p) {
            return Err(TermError::UnresolvablePattern(p.to_string()).into());
        }
    }
    let mut ends_out = Vec::new();
    for e in ends(t)? {
        if let Some(sel) = end_in_closure(t, &e, m)? {
            ends_out.push((e, sel));
        }
    }
    let mut crit_out = Vec::new();
    for c in critical_sets(t)? {
        if let Some(sel) = crit_in_closure(t, &c, m)? {
            crit_out.push((c, sel));
        }
    }
    Ok((ends_out, crit_out))
}

/// Is U dispersed, i.e. does no end of G lie in the closure of U?
pub fn is_dispersed(t: &OmegaTerm, u: &UPattern) -> Result<bool, BoundaryError> {
    Ok(boundary_gamma(t, u)?.0.is_empty())
}

/// Which instances of an end family lie in the closure of M.
pub fn end_in_closure(
    t: &OmegaTerm,
    e: &EndPattern,
    m: &UPattern,
) -> Result<Option<InClosure>, TermError> {
    end_in_closure_rec(t, &e.prefix, &e.kind, &m.0)
}

fn end_in_closure_rec(
    t: &OmegaTerm,
    prefix: &[StepPat],
    kind: &EndKind,
    m: &[AddrPattern],
) -> Result<Option<InClosure>, TermError> {
    if prefix.is_empty() {
        return end_here_in_closure(t, kind, m);
    }
    match (&prefix[0], t) {
        (StepPat::Base, OmegaTerm::Omega { base, .. }) => {
            let lowered = lower(m, |s| matches!(s, StepPat::Base));
            end_in_closure_rec(base, &prefix[1..], kind, &lowered)
        }
        (StepPat::Base, OmegaTerm::Chain { base: Some(b), .. }) => {
            let lowered = lower(m, |s| matches!(s, StepPat::Base));
            end_in_closure_rec(b, &prefix[1..], kind, &lowered)
        }
        (StepPat::Copy(ip), OmegaTerm::Omega { copy: sub, .. })
        | (StepPat::Seg(ip), OmegaTerm::Chain { segment: sub, .. }) => {
            let seg = matches!(prefix[0], StepPat::Seg(_));
            let uniform = lower(m, |s| match s {
                StepPat::Copy(i) if !seg => !i.is_concrete(),
                StepPat::Seg(i) if seg => !i.is_concrete(),
                _ => false,
            });
            match ip {
                IdxPat::Concrete(c) => {
                    let mut parts = uniform.clone();
                    parts.extend(lower(m, |s| match s {
                        StepPat::Copy(IdxPat::Concrete(i)) if !seg => i == c,
                        StepPat::Seg(IdxPat::Concrete(i)) if seg => i == c,
                        _ => false,
                    }));
                    end_in_closure_rec(sub, &prefix[1..], kind, &parts)
                }
                _ => {
                    if end_in_closure_rec(sub, &prefix[1..], kind, &uniform)?.is_some() {
                        return Ok(Some(InClosure::All));
                    }
                    // Only concretely-named instances can still qualify.
                    let concrete_idxs: BTreeSet<u32> = m
                        .iter()
                        .filter_map(|p| match p.0.first() {
                            Some(StepPat::Copy(IdxPat::Concrete(i))) if !seg => Some(*i),
                            Some(StepPat::Seg(IdxPat::Concrete(i))) if seg => Some(*i),
                            _ => None,
                        })
                        .collect();
                    let mut insts: Vec<Vec<u32>> = Vec::new();
                    for i in concrete_idxs {
                        let mut parts = uniform.clone();
                        parts.extend(lower(m, |s| match s {
                            StepPat::Copy(IdxPat::Concrete(j)) if !seg => *j == i,
                            StepPat::Seg(IdxPat::Concrete(j)) if seg => *j == i,
                            _ => false,
                        }));
                        if let Some(sub_sel) =
                            end_in_closure_rec(sub, &prefix[1..], kind, &parts)?
                        {
                            match sub_sel {
                                InClosure::All => insts.push(vec![i]),
                                InClosure::Instances(subs) => {
                                    for mut s in subs {
                                        let mut v = vec![i];
                                        v.append(&mut s);
                                        insts.push(v);
                                    }
                                }
                            }
                        }
                    }
                    Ok(if insts.is_empty() { None } else { Some(InClosure::Instances(insts)) })
                }
            }
        }
        _ => Ok(None),
    }
}

/// Strip the first step off the M-patterns selected by `pred`.
pub(crate) fn lower(m: &[AddrPattern], pred: impl Fn(&StepPat) -> bool) -> Vec<AddrPattern> {
    m.iter()
        .filter(|p| p.0.first().is_some_and(&pred))
        .map(|p| p.strip_first())
        .collect()
}

fn end_here_in_closure(
    t: &OmegaTerm,
    kind: &EndKind,
    m: &[AddrPattern],
) -> Result<Option<InClosure>, TermError> {
    match (kind, t) {
        (EndKind::KOmega, OmegaTerm::KOmega) => {
            let u = UPattern(m.to_vec());
            Ok(match t.census(&u) {
                Ok(Card::Infinite) => Some(InClosure::All),
                _ => None,
            })
        }
        (EndKind::ChainTail { lane }, OmegaTerm::Chain { segment, glue, .. }) => {
            // M meets the tail component at infinitely many levels iff a
            // level-uniform M-part lands in a segment component joined to
            // the lane's orbit.
            let seg_classes = Components::analyze(segment, &UPattern::default())?.classes;
            let strip = StripRelations::compute(&seg_classes, glue, &[]);
            let Some(key) = crate::separations::class_lookup_in(&seg_classes, lane) else {
                return Ok(None);
            };
            let Some(start) = strip.nodes.iter().position(|n| *n == key) else {
                return Ok(None);
            };
            let orbit = strip_orbit(&strip, start);
            let uniform = lower(m, |s| matches!(s, StepPat::Seg(i) if !i.is_concrete()));
            for q in &uniform {
                for &(node, _) in &orbit {
                    let (k, asg) = &strip.nodes[node];
                    for r in &seg_classes[*k].rep {
                        let r_inst = crate::separations::CompClass::subst_tuple(r, asg);
                        if r_inst.meet(q).is_some() {
                            return Ok(Some(InClosure::All));
                        }
                    }
                }
            }
            Ok(None)
        }
        _ => Ok(None),
    }
}

/// Orbit of a lane node over (node, level offset), capped.
pub(crate) fn strip_orbit(strip: &StripRelations, start: usize) -> BTreeSet<(usize, i64)> {
    let cap = (strip.nodes.len() as i64 + 2) * 2;
    let mut orbit: BTreeSet<(usize, i64)> = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([(start, 0i64)]);
    while let Some((x, d)) = queue.pop_front() {
        if d.abs() > cap || !orbit.insert((x, d)) {
            continue;
        }
        for &y in &strip.full[x] {
            queue.push_back((y, d));
        }
        for &(a, b) in &strip.arcs {
            if a == x {
                queue.push_back((b, d + 1));
            }
            if b == x {
                queue.push_back((a, d - 1));
            }
        }
    }
    orbit
}

/// Which instances of a critical pattern lie in the closure of M.
pub fn crit_in_closure(
    t: &OmegaTerm,
    c: &CritPattern,
    m: &UPattern,
) -> Result<Option<InClosure>, TermError> {
    let dims = c.dims();
    if dims.is_empty() {
        let x = c.concrete_instance().expect("concrete");
        return Ok(if crit_instance_in_closure(t, &x, m)? {
            Some(InClosure::All)
        } else {
            None
        });
    }
    // The representative instance decides the family for uniform M.
    let rep = c.instance(&vec![0; dims.len()]).expect("instance");
    if rep.iter().all(|a| t.resolves(a)) && crit_instance_in_closure(t, &rep, m)? {
        return Ok(Some(InClosure::All));
    }
    // Instances named by concrete indices occurring in M.
    let mut idxs: BTreeSet<u32> = BTreeSet::new();
    for p in &m.0 {
        for s in &p.0 {
            if let Some(IdxPat::Concrete(i)) = s.idx() {
                idxs.insert(*i);
            }
        }
    }
    let mut insts = Vec::new();
    for &i in &idxs {
        if let Some(x) = c.instance(&vec![i; dims.len()]) {
            if x.iter().all(|a| t.resolves(a)) && crit_instance_in_closure(t, &x, m)? {
                insts.push(vec![i; dims.len()]);
            }
        }
    }
    Ok(if insts.is_empty() { None } else { Some(InClosure::Instances(insts)) })
}

fn crit_instance_in_closure(
    t: &OmegaTerm,
    x: &BTreeSet<VertexAddr>,
    m: &UPattern,
) -> Result<bool, TermError> {
    let comps = delete_components(t, x)?;
    let mut meeting = Card::Finite(0);
    for c in &comps.classes {
        let cnt = crate::separations::instances_meeting_with_nbhd(c, x, m);
        meeting = match (meeting, cnt) {
            (Card::Finite(a), Card::Finite(b)) => Card::Finite(a + b),
            _ => Card::Infinite,
        };
    }
    Ok(meeting == Card::Infinite)
}

// ---------------------------------------------------------------------------
// Domination.
// ---------------------------------------------------------------------------

/// Does `v` dominate the end? When it does not, also return a finite set
/// strictly separating `v` from the end.
pub fn dominates(
    t: &OmegaTerm,
    v: &VertexAddr,
    end: &EndPattern,
) -> Result<(bool, Option<BTreeSet<VertexAddr>>), BoundaryError> {
    t.require_resolves(v)?;
    if !end.is_concrete() {
        return Err(BoundaryError::NoSuchEnd("end pattern is a family".to_string()));
    }
    if dominates_rec(t, v, &end.prefix, &end.kind)? {
        return Ok((true, None));
    }
    let x = strict_separator(t, v, end)?;
    Ok((false, Some(x)))
}

/// Any dominator at all (used to fill the undominated flag)?
fn dominators_exist(t: &OmegaTerm, e: &EndPattern) -> Result<Option<VertexAddr>, TermError> {
    let inst = e.instances_up_to(1).remove(0);
    dominator_rec(t, &inst.prefix, &inst.kind)
}

fn dominator_rec(
    t: &OmegaTerm,
    prefix: &[StepPat],
    kind: &EndKind,
) -> Result<Option<VertexAddr>, TermError> {
    if prefix.is_empty() {
        return Ok(match (kind, t) {
            (EndKind::KOmega, OmegaTerm::KOmega) => Some(VertexAddr::k(0)),
            (EndKind::ChainTail { lane }, OmegaTerm::Chain { segment, glue, links, .. }) => {
                let seg_classes = Components::analyze(segment, &UPattern::default())?.classes;
                let strip = StripRelations::compute(&seg_classes, glue, &[]);
                let node = crate::separations::class_lookup_in(&seg_classes, lane)
                    .and_then(|key| strip.nodes.iter().position(|n| *n == key));
                let Some(start) = node else { return Ok(None) };
                let orbit = strip_orbit(&strip, start);
                let orbit_nodes: BTreeSet<usize> = orbit.iter().map(|(x, _)| *x).collect();
                let mut found: Option<VertexAddr> = None;
                for (b, x) in links {
                    if let Some(key) = crate::separations::class_lookup_in(&seg_classes, x) {
                        if let Some(nx) = strip.nodes.iter().position(|n| *n == key) {
                            if orbit_nodes.contains(&nx) {
                                let cand = b.prefixed(Step::Base);
                                found = Some(match found {
                                    None => cand,
                                    Some(c) => c.min(cand),
                                });
                            }
                        }
                    }
                }
                found
            }
            _ => None,
        });
    }
    match (&prefix[0], t) {
        (StepPat::Base, OmegaTerm::Omega { base, .. }) => {
            Ok(dominator_rec(base, &prefix[1..], kind)?.map(|d| d.prefixed(Step::Base)))
        }
        (StepPat::Base, OmegaTerm::Chain { base: Some(b), .. }) => {
            Ok(dominator_rec(b, &prefix[1..], kind)?.map(|d| d.prefixed(Step::Base)))
        }
        (StepPat::Copy(ip), OmegaTerm::Omega { copy, .. }) => {
            let i = concrete_or(ip, 0);
            Ok(dominator_rec(copy, &prefix[1..], kind)?.map(|d| d.prefixed(Step::Copy(i))))
        }
        (StepPat::Seg(ip), OmegaTerm::Chain { segment, .. }) => {
            let i = concrete_or(ip, 0);
            Ok(dominator_rec(segment, &prefix[1..], kind)?.map(|d| d.prefixed(Step::Seg(i))))
        }
        _ => Ok(None),
    }
}

fn dominates_rec(
    t: &OmegaTerm,
    v: &VertexAddr,
    prefix: &[StepPat],
    kind: &EndKind,
) -> Result<bool, TermError> {
    if prefix.is_empty() {
        return Ok(match (kind, t) {
            (EndKind::KOmega, OmegaTerm::KOmega) => matches!(v.first(), Some(Step::K(_))),
            (EndKind::ChainTail { lane }, OmegaTerm::Chain { segment, glue, links, .. }) => {
                match v.first() {
                    Some(Step::Base) => {
                        let v_in_base = v.strip(&Step::Base).unwrap();
                        let seg_classes =
                            Components::analyze(segment, &UPattern::default())?.classes;
                        let strip = StripRelations::compute(&seg_classes, glue, &[]);
                        let node = crate::separations::class_lookup_in(&seg_classes, lane)
                            .and_then(|key| strip.nodes.iter().position(|n| *n == key));
                        let Some(start) = node else { return Ok(false) };
                        let orbit = strip_orbit(&strip, start);
                        let orbit_nodes: BTreeSet<usize> =
                            orbit.iter().map(|(x, _)| *x).collect();
                        links.iter().any(|(b, x)| {
                            *b == v_in_base
                                && crate::separations::class_lookup_in(&seg_classes, x)
                                    .and_then(|key| strip.nodes.iter().position(|n| *n == key))
                                    .is_some_and(|nx| orbit_nodes.contains(&nx))
                        })
                    }
                    _ => false,
                }
            }
            _ => false,
        });
    }
    match (&prefix[0], t) {
        (StepPat::Base, OmegaTerm::Omega { base, .. }) => match v.strip(&Step::Base) {
            Some(rest) => dominates_rec(base, &rest, &prefix[1..], kind),
            None => Ok(false),
        },
        (StepPat::Base, OmegaTerm::Chain { base: Some(b), .. }) => match v.strip(&Step::Base) {
            Some(rest) => dominates_rec(b, &rest, &prefix[1..], kind),
            None => Ok(false),
        },
        (StepPat::Copy(ip), OmegaTerm::Omega { copy, .. }) => {
            let i = concrete_or(ip, 0);
            match v.strip(&Step::Copy(i)) {
                Some(rest) => dominates_rec(copy, &rest, &prefix[1..], kind),
                None => Ok(false),
            }
        }
        (StepPat::Seg(ip), OmegaTerm::Chain { segment, .. }) => {
            let i = concrete_or(ip, 0);
            match v.strip(&Step::Seg(i)) {
                Some(rest) => dominates_rec(segment, &rest, &prefix[1..], kind),
                None => Ok(false),
            }
        }
        _ => Ok(false),
    }
}

/// A finite X with `v ∉ X ∪ C(X, ω)`, verified through the engine.
fn strict_separator(
    t: &OmegaTerm,
    v: &VertexAddr,
    end: &EndPattern,
) -> Result<BTreeSet<VertexAddr>, BoundaryError> {
    let vmax = v
        .0
        .iter()
        .map(|s| match s {
            Step::Copy(i) | Step::Seg(i) | Step::K(i) => *i,
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    let mut x = end_cut(t, end, vmax + 2)?;
    x.remove(v);
    let comps = delete_components(t, &x).map_err(BoundaryError::Term)?;
    let vc = comps.class_of(v);
    let ec = end_component(&comps, end);
    match (vc, ec) {
        (Some(a), Some(b)) if a != b => Ok(x),
        _ => Err(BoundaryError::NoSuchEnd(format!(
            "no strict separator found for {v} (end {end:?})"
        ))),
    }
}

/// A finite cut putting the end beyond level/index `depth`: glue lanes at
/// two consecutive levels plus the base-side link anchors, collected along
/// the end's prefix.
pub(crate) fn end_cut(
    t: &OmegaTerm,
    end: &EndPattern,
    depth: u32,
) -> Result<BTreeSet<VertexAddr>, BoundaryError> {
    let mut out = BTreeSet::new();
    end_cut_rec(t, &end.prefix, &end.kind, depth, &mut Vec::new(), &mut out)?;
    Ok(out)
}

fn end_cut_rec(
    t: &OmegaTerm,
    prefix: &[StepPat],
    kind: &EndKind,
    depth: u32,
    steps: &mut Vec<Step>,
    out: &mut BTreeSet<VertexAddr>,
) -> Result<(), BoundaryError> {
    let lift = |steps: &[Step], a: &VertexAddr| {
        let mut v = steps.to_vec();
        v.extend(a.0.iter().cloned());
        VertexAddr(v)
    };
    if prefix.is_empty() {
        match (kind, t) {
            (EndKind::ChainTail { .. }, OmegaTerm::Chain { glue, links, .. }) => {
                for (u, v) in glue {
                    for l in [depth, depth + 1] {
                        out.insert(lift(steps, &u.prefixed(Step::Seg(l))));
                        out.insert(lift(steps, &v.prefixed(Step::Seg(l))));
                    }
                }
                for (b, _) in links {
                    out.insert(lift(steps, &b.prefixed(Step::Base)));
                }
            }
            (EndKind::KOmega, _) => {
                // Every vertex dominates a KOmega end: no strict separator.
            }
            _ => {}
        }
        return Ok(());
    }
    match (&prefix[0], t) {
        (StepPat::Base, OmegaTerm::Omega { base, .. }) => {
            steps.push(Step::Base);
            end_cut_rec(base, &prefix[1..], kind, depth, steps, out)?;
            steps.pop();
        }
        (StepPat::Base, OmegaTerm::Chain { base: Some(b), .. }) => {
            steps.push(Step::Base);
            end_cut_rec(b, &prefix[1..], kind, depth, steps, out)?;
            steps.pop();
        }
        (StepPat::Copy(ip), OmegaTerm::Omega { copy, links, .. }) => {
            let i = concrete_or(ip, 0);
            for (_, c) in links {
                out.insert(lift(steps, &c.prefixed(Step::Copy(i))));
            }
            steps.push(Step::Copy(i));
            end_cut_rec(copy, &prefix[1..], kind, depth, steps, out)?;
            steps.pop();
        }
        (StepPat::Seg(ip), OmegaTerm::Chain { segment, glue, links, .. }) => {
            let i = concrete_or(ip, 0);
            for (u, v) in glue {
                out.insert(lift(steps, &u.prefixed(Step::Seg(i))));
                out.insert(lift(steps, &v.prefixed(Step::Seg(i))));
            }
            for (_, x) in links {
                out.insert(lift(steps, &x.prefixed(Step::Seg(i))));
            }
            steps.push(Step::Seg(i));
            end_cut_rec(segment, &prefix[1..], kind, depth, steps, out)?;
            steps.pop();
        }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    #[test]
    fn ends_of_standard_terms() {
        assert_eq!(ends(&ray()).unwrap().len(), 1);
        assert_eq!(ends(&star()).unwrap().len(), 0);
        assert_eq!(ends(&t3()).unwrap().len(), 0);
        assert_eq!(ends(&komega()).unwrap().len(), 1);
        assert_eq!(ends(&ladder()).unwrap().len(), 1);
        assert_eq!(ends(&comb()).unwrap().len(), 1);
        let sor = ends(&star_of_rays()).unwrap();
        assert_eq!(sor.len(), 1);
        assert!(!sor[0].is_concrete(), "one end per ray copy");
    }

    #[test]
    fn domray_end_is_dominated_ray_end_is_not() {
        let de = ends(&domray()).unwrap();
        assert_eq!(de.len(), 1);
        assert!(!de[0].undominated);
        let re = ends(&ray()).unwrap();
        assert!(re[0].undominated);
        let ke = ends(&komega()).unwrap();
        assert!(!ke[0].undominated);
        let le = ends(&ladder()).unwrap();
        assert!(le[0].undominated);
    }

    #[test]
    fn dominates_with_strict_separator_fallback() {
        let t = domray();
        let e = ends(&t).unwrap().remove(0);
        let (dom, _) = dominates(&t, &"B/V(r)".parse().unwrap(), &e).unwrap();
        assert!(dom);
        let (dom, x) = dominates(&t, &"S(0)/V(v)".parse().unwrap(), &e).unwrap();
        assert!(!dom);
        assert!(!x.unwrap().contains(&"S(0)/V(v)".parse().unwrap()));

        let t = ray();
        let e = ends(&t).unwrap().remove(0);
        let (dom, x) = dominates(&t, &"S(0)/V(v)".parse().unwrap(), &e).unwrap();
        assert!(!dom);
        assert!(x.is_some());

        let t = komega();
        let e = ends(&t).unwrap().remove(0);
        let (dom, _) = dominates(&t, &"K(7)".parse().unwrap(), &e).unwrap();
        assert!(dom);
    }

    #[test]
    fn critical_sets_of_corpus_terms() {
        let crit = critical_sets(&star()).unwrap();
        assert_eq!(crit.len(), 1);
        assert_eq!(crit[0].members[0].to_string(), "B/V(c)");

        assert!(critical_sets(&domray()).unwrap().is_empty());
        assert!(critical_sets(&komega()).unwrap().is_empty());
        assert!(critical_sets(&ray()).unwrap().is_empty());
        assert!(critical_sets(&comb()).unwrap().is_empty());
        assert!(critical_sets(&ladder()).unwrap().is_empty());

        let crit = critical_sets(&t3()).unwrap();
        assert_eq!(crit.len(), 2, "{crit:?}");
        assert!(crit.iter().any(|c| c.is_concrete()));
        assert!(crit.iter().any(|c| !c.is_concrete()));

        let crit = critical_sets(&star_of_rays()).unwrap();
        assert_eq!(crit.len(), 1);
        assert!(crit[0].is_concrete());

        let crit = critical_sets(&spider()).unwrap();
        assert_eq!(crit.len(), 1, "{crit:?}");
        assert_eq!(crit[0].members[0].to_string(), "B/V(c)");
    }

    #[test]
    fn dispersedness_matches_comb_existence() {
        assert!(is_dispersed(&star(), &star_leaves()).unwrap());
        assert!(is_dispersed(&t3(), &all(&t3())).unwrap());
        assert!(!is_dispersed(&ray(), &all(&ray())).unwrap());
        assert!(!is_dispersed(&komega(), &all(&komega())).unwrap());
        assert!(!is_dispersed(&comb(), &comb_teeth()).unwrap());
        assert!(!is_dispersed(&domray(), &all(&domray())).unwrap());
        assert!(!is_dispersed(&ladder(), &all(&ladder())).unwrap());
        assert!(!is_dispersed(&star_of_rays(), &all(&star_of_rays())).unwrap());
        assert!(is_dispersed(&spider(), &spider_leaves()).unwrap());
    }

    #[test]
    fn boundary_gamma_of_corpus_cases() {
        let (e, c) = boundary_gamma(&star(), &star_leaves()).unwrap();
        assert!(e.is_empty());
        assert_eq!(c.len(), 1);

        let (e, c) = boundary_gamma(&ray(), &all(&ray())).unwrap();
        assert_eq!(e.len(), 1);
        assert!(c.is_empty());

        let (e, c) = boundary_gamma(&t3(), &all(&t3())).unwrap();
        assert!(e.is_empty());
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn orientation_by_end_picks_the_tail_side() {
        use crate::separations::{make_separation, ComponentSelector, SidePattern};
        let t = ray();
        let x: BTreeSet<VertexAddr> = ["S(2)/V(v)".parse().unwrap()].into();
        let comps = delete_components(&t, &x).unwrap();
        let tail = comps
            .classes
            .iter()
            .position(|c| c.card == Card::Infinite)
            .unwrap();
        let sep = make_separation(
            &t,
            &x,
            vec![crate::separations::SidePattern {
                class: tail,
                selector: ComponentSelector::all(),
            }],
        )
        .unwrap();
        let _ = SidePattern { class: tail, selector: ComponentSelector::all() };
        let e = ends(&t).unwrap().remove(0);
        assert_eq!(orient_by_end(&sep, &e).unwrap(), Side::Right);
        assert_eq!(orient_by_end(&sep.inverse(), &e).unwrap(), Side::Left);
    }
}

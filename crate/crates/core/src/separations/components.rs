//! Exact symbolic computation of the components of `G - D` for a term
//! graph `G` and a deleted vertex set `D` given by patterns.
//!
//! The result is a finite list of component classes. A class with empty
//! `dims` is a single component whose members are described by its `rep`
//! patterns (free index vars enumerate members). A class with non-empty
//! `dims` is a uniform family: one component per assignment of the dim
//! vars. Chain terms are handled by a periodic strip analysis: same-level
//! connectivity relations are fixpoints over the glue structure, an
//! explicit window resolves everything near deletions, and the uniform
//! region beyond is described by shift families and tail orbits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::term_graphs::{
    AddrPattern, Card, IdxPat, OmegaTerm, Step, StepPat, TermError, UPattern, VertexAddr,
};

/// A family index of a component class: instances range over `min..`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyDim {
    pub var: String,
    pub min: u32,
}

/// One class of components of `G - D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompClass {
    /// Member patterns. Vars listed in `dims` index the family; all other
    /// free positions enumerate members within one component.
    pub rep: Vec<AddrPattern>,
    /// Instances grounded out of a family (absorbed elsewhere), as patterns.
    pub excluded: Vec<AddrPattern>,
    /// The same exclusions as dim assignments, for exact counting.
    pub excluded_tuples: Vec<BTreeMap<String, u32>>,
    pub dims: Vec<FamilyDim>,
    /// Deleted neighbours (may use dim vars of `rep`).
    pub nbhd: Vec<AddrPattern>,
    /// Vertices per component instance.
    pub card: Card,
}

impl CompClass {
    /// Number of components this class stands for.
    pub fn component_count(&self) -> Card {
        if self.dims.is_empty() {
            Card::Finite(1)
        } else {
            Card::Infinite
        }
    }

    pub(crate) fn subst_tuple(p: &AddrPattern, asg: &BTreeMap<String, u32>) -> AddrPattern {
        let mut out = p.clone();
        for s in out.0.iter_mut() {
            let repl = match s {
                StepPat::Copy(ip) | StepPat::Seg(ip) | StepPat::K(ip) => match ip {
                    IdxPat::Bound { var, offset } => {
                        asg.get(var).map(|v| IdxPat::Concrete(v + *offset))
                    }
                    IdxPat::Strided { var, scale, offset } => {
                        asg.get(var).map(|v| IdxPat::Concrete(v * *scale + *offset))
                    }
                    _ => None,
                },
                _ => None,
            };
            if let Some(idx) = repl {
                match s {
                    StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) => *i = idx,
                    _ => {}
                }
            }
        }
        out
    }

    /// Does this class (some instance of it) contain the address? Returns
    /// the dim assignment of the instance holding it.
    pub fn instance_of(&self, a: &VertexAddr) -> Option<BTreeMap<String, u32>> {
        if self.excluded.iter().any(|p| p.matches(a).is_some()) {
            return None;
        }
        for p in &self.rep {
            if let Some(env) = p.matches(a) {
                let mut asg = BTreeMap::new();
                let mut ok = true;
                for d in &self.dims {
                    if let Some((_, v)) = env.iter().find(|(n, _)| n == &d.var) {
                        if *v < d.min {
                            ok = false;
                        }
                        asg.insert(d.var.clone(), *v);
                    }
                }
                if ok
                    && self
                        .excluded_tuples
                        .iter()
                        .any(|t| !t.is_empty() && t.iter().all(|(k, v)| asg.get(k) == Some(v)))
                {
                    ok = false;
                }
                if ok {
                    return Some(asg);
                }
            }
        }
        None
    }
}

/// Components of `t - deleted`.
#[derive(Debug, Clone)]
pub struct Components {
    pub deleted: UPattern,
    pub classes: Vec<CompClass>,
}

impl Components {
    pub fn analyze(t: &OmegaTerm, deleted: &UPattern) -> Result<Components, TermError> {
        for p in &deleted.0 {
            check_deletion_pattern(p)?;
            if !t.pattern_resolves(p) {
                return Err(TermError::UnresolvablePattern(p.to_string()));
            }
        }
        let classes = analyze_rec(t, deleted.0.clone())?;
        Ok(Components { deleted: deleted.clone(), classes })
    }

    /// Which class instance contains the (non-deleted) address?
    pub fn class_of(&self, a: &VertexAddr) -> Option<(usize, BTreeMap<String, u32>)> {
        for (i, c) in self.classes.iter().enumerate() {
            if let Some(asg) = c.instance_of(a) {
                return Some((i, asg));
            }
        }
        None
    }

    pub fn is_single_component(&self) -> bool {
        self.classes.len() == 1 && self.classes[0].component_count() == Card::Finite(1)
    }
}

/// Deletion patterns must not share an index var across positions; a var
/// is then equivalent to a star with a minimum.
fn check_deletion_pattern(p: &AddrPattern) -> Result<(), TermError> {
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    for s in &p.0 {
        if let Some(IdxPat::Bound { var, .. }) = s.idx() {
            if !seen.insert(var) {
                return Err(TermError::UnresolvablePattern(format!(
                    "deletion pattern shares index var: {p}"
                )));
            }
        }
    }
    Ok(())
}

fn is_deleted(del: &[AddrPattern], a: &VertexAddr) -> bool {
    del.iter().any(|p| p.matches(a).is_some())
}

// ---------------------------------------------------------------------------
// Piece assembly shared by the Omega and Chain cases.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Piece {
    rep: Vec<AddrPattern>,
    excluded: Vec<AddrPattern>,
    excluded_tuples: Vec<BTreeMap<String, u32>>,
    dims: Vec<FamilyDim>,
    nbhd: Vec<AddrPattern>,
    card: Card,
}

impl Piece {
    fn from_class(c: &CompClass) -> Piece {
        Piece {
            rep: c.rep.clone(),
            excluded: c.excluded.clone(),
            excluded_tuples: c.excluded_tuples.clone(),
            dims: c.dims.clone(),
            nbhd: c.nbhd.clone(),
            card: c.card,
        }
    }

    fn prefixed(&self, step: StepPat, fresh: &mut u32) -> Piece {
        // Rename every bound var apart (dims and free member vars), then
        // push the prefix step onto every pattern.
        let mut out = self.clone();
        let mut ren: BTreeMap<String, String> = BTreeMap::new();
        for p in out.rep.iter().chain(out.excluded.iter()).chain(out.nbhd.iter()) {
            for s in &p.0 {
                if let Some(IdxPat::Bound { var, .. }) = s.idx() {
                    if !ren.contains_key(var) {
                        ren.insert(var.clone(), format!("d{}", *fresh));
                        *fresh += 1;
                    }
                }
            }
        }
        for d in out.dims.iter_mut() {
            let nv = ren
                .entry(d.var.clone())
                .or_insert_with(|| {
                    let v = format!("d{}", *fresh);
                    *fresh += 1;
                    v
                })
                .clone();
            d.var = nv;
        }
        let fix = |p: &AddrPattern, ren: &BTreeMap<String, String>| -> AddrPattern {
            let mut q = p.clone();
            for s in q.0.iter_mut() {
                if let StepPat::Copy(IdxPat::Bound { var, .. })
                | StepPat::Seg(IdxPat::Bound { var, .. })
                | StepPat::K(IdxPat::Bound { var, .. }) = s
                {
                    if let Some(n) = ren.get(var) {
                        *var = n.clone();
                    }
                }
            }
            q
        };
        out.rep = out.rep.iter().map(|p| fix(p, &ren).prefixed(step.clone())).collect();
        out.excluded = out
            .excluded
            .iter()
            .map(|p| fix(p, &ren).prefixed(step.clone()))
            .collect();
        out.nbhd = out.nbhd.iter().map(|p| fix(p, &ren).prefixed(step.clone())).collect();
        out.excluded_tuples = out
            .excluded_tuples
            .iter()
            .map(|t| {
                t.iter()
                    .map(|(k, v)| (ren.get(k).cloned().unwrap_or_else(|| k.clone()), *v))
                    .collect()
            })
            .collect();
        out
    }

    /// Ground the instance `asg` out of this family piece, returning the
    /// grounded instance as its own piece.
    fn ground(&mut self, asg: &BTreeMap<String, u32>) -> Piece {
        let inst = Piece {
            rep: self.rep.iter().map(|p| CompClass::subst_tuple(p, asg)).collect(),
            excluded: self
                .excluded
                .iter()
                .map(|p| CompClass::subst_tuple(p, asg))
                .collect(),
            excluded_tuples: Vec::new(),
            dims: self
                .dims
                .iter()
                .filter(|d| !asg.contains_key(&d.var))
                .cloned()
                .collect(),
            nbhd: self.nbhd.iter().map(|p| CompClass::subst_tuple(p, asg)).collect(),
            card: self.card,
        };
        self.excluded_tuples.push(asg.clone());
        inst
    }
}

fn piece_instance_of(piece: &Piece, a: &VertexAddr) -> Option<BTreeMap<String, u32>> {
    if piece.excluded.iter().any(|p| p.matches(a).is_some()) {
        return None;
    }
    for p in &piece.rep {
        if let Some(env) = p.matches(a) {
            let mut asg = BTreeMap::new();
            for d in &piece.dims {
                if let Some((_, v)) = env.iter().find(|(n, _)| n == &d.var) {
                    if *v < d.min {
                        return None;
                    }
                    asg.insert(d.var.clone(), *v);
                }
            }
            if piece
                .excluded_tuples
                .iter()
                .any(|t| !t.is_empty() && t.iter().all(|(k, v)| asg.get(k) == Some(v)))
            {
                return None;
            }
            return Some(asg);
        }
    }
    None
}

struct Assembler {
    pieces: Vec<Piece>,
    parent: Vec<usize>,
    fresh: u32,
}

impl Assembler {
    fn new() -> Self {
        Assembler { pieces: Vec::new(), parent: Vec::new(), fresh: 0 }
    }

    fn add(&mut self, p: Piece) -> usize {
        self.pieces.push(p);
        self.parent.push(self.pieces.len() - 1);
        self.pieces.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    /// Locate the piece holding a concrete (lifted) address, grounding a
    /// family instance out if needed.
    fn resolve_addr(&mut self, lifted: &VertexAddr) -> Option<usize> {
        for i in 0..self.pieces.len() {
            if let Some(asg) = piece_instance_of(&self.pieces[i], lifted) {
                if asg.is_empty() {
                    return Some(i);
                }
                let inst = self.pieces[i].ground(&asg);
                return Some(self.add(inst));
            }
        }
        None
    }

    /// Locate the piece family for an Omega link target: the outermost
    /// (copy) dim is kept, inner dims are grounded. The returned piece
    /// stands for the target instance in every copy at once.
    fn resolve_family_link(&mut self, lifted0: &VertexAddr) -> Option<usize> {
        for i in 0..self.pieces.len() {
            if let Some(mut asg) = piece_instance_of(&self.pieces[i], lifted0) {
                // Drop the outer copy dim from the assignment.
                let outer = self.pieces[i].rep.iter().find_map(|p| match p.0.first() {
                    Some(StepPat::Copy(IdxPat::Bound { var, .. })) => Some(var.clone()),
                    _ => None,
                });
                if let Some(outer) = outer {
                    asg.remove(&outer);
                }
                if asg.is_empty() {
                    return Some(i);
                }
                let inst = self.pieces[i].ground(&asg);
                return Some(self.add(inst));
            }
        }
        None
    }

    fn finish(mut self) -> Vec<CompClass> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.pieces.len() {
            let r = self.find(i);
            groups.entry(r).or_default().push(i);
        }
        let mut out = Vec::new();
        for (_, members) in groups {
            if members.len() == 1 {
                let p = &self.pieces[members[0]];
                if p.rep.is_empty() {
                    continue;
                }
                out.push(CompClass {
                    rep: p.rep.clone(),
                    excluded: p.excluded.clone(),
                    excluded_tuples: p.excluded_tuples.clone(),
                    dims: p.dims.clone(),
                    nbhd: dedup(&p.nbhd),
                    card: p.card,
                });
            } else {
                // A blob: one single component spanning every instance of
                // every member piece; dim vars become free member vars.
                let mut rep = Vec::new();
                let mut excluded = Vec::new();
                let mut nbhd = Vec::new();
                let mut card = Card::Finite(0);
                for &m in &members {
                    let p = &self.pieces[m];
                    // Excluded instance tuples stay excluded: keep patterns.
                    rep.extend(p.rep.clone());
                    excluded.extend(excluded_patterns(p));
                    nbhd.extend(p.nbhd.clone());
                    card = add_card(card, if p.dims.is_empty() { p.card } else { Card::Infinite });
                }
                if rep.is_empty() {
                    continue;
                }
                out.push(CompClass {
                    rep,
                    excluded,
                    excluded_tuples: Vec::new(),
                    dims: Vec::new(),
                    nbhd: dedup(&nbhd),
                    card,
                });
            }
        }
        out.sort_by(|a, b| a.rep.iter().min().cmp(&b.rep.iter().min()));
        out
    }
}

/// The membership exclusions of a piece as patterns (explicit excluded
/// patterns plus grounded-out instance tuples).
fn excluded_patterns(p: &Piece) -> Vec<AddrPattern> {
    let mut out = p.excluded.clone();
    for t in &p.excluded_tuples {
        for r in &p.rep {
            out.push(CompClass::subst_tuple(r, t));
        }
    }
    out
}

fn dedup(v: &[AddrPattern]) -> Vec<AddrPattern> {
    let mut out: Vec<AddrPattern> = Vec::new();
    for p in v {
        if !out.contains(p) {
            out.push(p.clone());
        }
    }
    out.sort();
    out
}

fn add_card(a: Card, b: Card) -> Card {
    match (a, b) {
        (Card::Finite(x), Card::Finite(y)) => Card::Finite(x + y),
        _ => Card::Infinite,
    }
}

// ---------------------------------------------------------------------------
// Recursive analysis.
// ---------------------------------------------------------------------------

fn analyze_rec(t: &OmegaTerm, del: Vec<AddrPattern>) -> Result<Vec<CompClass>, TermError> {
    match t {
        OmegaTerm::Finite { vertices, edges } => {
            let mut g = crate::term_graphs::FiniteGraph::default();
            for v in vertices {
                let a = VertexAddr::leaf(v);
                if !is_deleted(&del, &a) {
                    g.add_vertex(a);
                }
            }
            for (x, y) in edges {
                let (a, b) = (VertexAddr::leaf(x), VertexAddr::leaf(y));
                if !is_deleted(&del, &a) && !is_deleted(&del, &b) {
                    g.add_edge(&a, &b);
                }
            }
            let mut out = Vec::new();
            for comp in g.components() {
                let mut nbhd = BTreeSet::new();
                for v in &comp {
                    for (x, y) in edges {
                        let (a, b) = (VertexAddr::leaf(x), VertexAddr::leaf(y));
                        if a == *v && is_deleted(&del, &b) {
                            nbhd.insert(b);
                        } else if b == *v && is_deleted(&del, &a) {
                            nbhd.insert(a);
                        }
                    }
                }
                out.push(CompClass {
                    rep: comp.iter().map(AddrPattern::from_addr).collect(),
                    excluded: Vec::new(),
                    excluded_tuples: Vec::new(),
                    dims: Vec::new(),
                    nbhd: nbhd.iter().map(AddrPattern::from_addr).collect(),
                    card: Card::Finite(comp.len()),
                });
            }
            Ok(out)
        }
        OmegaTerm::KOmega => {
            let wild: Vec<&AddrPattern> = del.iter().filter(|p| p.free_positions() > 0).collect();
            let concrete: BTreeSet<VertexAddr> = del.iter().filter_map(|p| p.to_addr()).collect();
            if wild.is_empty() {
                let rep = AddrPattern(vec![StepPat::K(IdxPat::Star)]);
                Ok(vec![CompClass {
                    rep: vec![rep],
                    excluded: concrete.iter().map(AddrPattern::from_addr).collect(),
                    excluded_tuples: Vec::new(),
                    dims: Vec::new(),
                    nbhd: concrete.iter().map(AddrPattern::from_addr).collect(),
                    card: Card::Infinite,
                }])
            } else {
                // Wildcard deletions leave only finitely many vertices.
                let min = wild
                    .iter()
                    .map(|p| match p.0[0].idx() {
                        Some(IdxPat::Bound { offset, .. }) => *offset,
                        _ => 0,
                    })
                    .min()
                    .unwrap_or(0);
                let survivors: Vec<VertexAddr> = (0..min)
                    .map(VertexAddr::k)
                    .filter(|a| !concrete.contains(a))
                    .collect();
                if survivors.is_empty() {
                    return Ok(Vec::new());
                }
                Ok(vec![CompClass {
                    rep: survivors.iter().map(AddrPattern::from_addr).collect(),
                    excluded: Vec::new(),
                    excluded_tuples: Vec::new(),
                    dims: Vec::new(),
                    nbhd: del.to_vec(),
                    card: Card::Finite(survivors.len()),
                }])
            }
        }
        OmegaTerm::Omega { base, copy, links } => analyze_omega(base, copy, links, del),
        OmegaTerm::Chain { base, segment, glue, links } => {
            analyze_chain(base.as_deref(), segment, glue, links, del)
        }
    }
}

/// Split deletion patterns at an Omega/Chain node. Returns
/// (base_del, uniform_del (pattern, min_index), concrete_del (idx, pattern)).
type DelSplit = (
    Vec<AddrPattern>,
    Vec<(AddrPattern, u32)>,
    Vec<(u32, AddrPattern)>,
);

fn split_del(del: &[AddrPattern], seg: bool) -> Result<DelSplit, TermError> {
    let mut base = Vec::new();
    let mut uniform = Vec::new();
    let mut concrete = Vec::new();
    for p in del {
        match &p.0[0] {
            StepPat::Base => base.push(p.strip_first()),
            StepPat::Copy(ip) if !seg => match ip {
                IdxPat::Concrete(i) => concrete.push((*i, p.strip_first())),
                IdxPat::Star => uniform.push((p.strip_first(), 0)),
                IdxPat::Bound { offset, .. } => uniform.push((p.strip_first(), *offset)),
                IdxPat::Strided { .. } => {
                    return Err(TermError::UnresolvablePattern(format!(
                        "strided deletion patterns are not supported: {p}"
                    )))
                }
            },
            StepPat::Seg(ip) if seg => match ip {
                IdxPat::Concrete(i) => concrete.push((*i, p.strip_first())),
                IdxPat::Star => uniform.push((p.strip_first(), 0)),
                IdxPat::Bound { offset, .. } => uniform.push((p.strip_first(), *offset)),
                IdxPat::Strided { .. } => {
                    return Err(TermError::UnresolvablePattern(format!(
                        "strided deletion patterns are not supported: {p}"
                    )))
                }
            },
            _ => {
                return Err(TermError::UnresolvablePattern(format!(
                    "deletion pattern does not fit term shape: {p}"
                )))
            }
        }
    }
    Ok((base, uniform, concrete))
}

fn del_for_instance(
    uniform: &[(AddrPattern, u32)],
    concrete: &[(u32, AddrPattern)],
    i: u32,
) -> Vec<AddrPattern> {
    let mut out: Vec<AddrPattern> = uniform
        .iter()
        .filter(|(_, min)| i >= *min)
        .map(|(p, _)| p.clone())
        .collect();
    out.extend(concrete.iter().filter(|(j, _)| *j == i).map(|(_, p)| p.clone()));
    out
}

fn analyze_omega(
    base: &OmegaTerm,
    copy: &OmegaTerm,
    links: &[(VertexAddr, VertexAddr)],
    del: Vec<AddrPattern>,
) -> Result<Vec<CompClass>, TermError> {
    let (del_b, uniform, concrete) = split_del(&del, false)?;
    let max_uni = uniform.iter().map(|(_, m)| *m).max().unwrap_or(0);
    let mut affected: BTreeSet<u32> = concrete.iter().map(|(i, _)| *i).collect();
    affected.extend(0..max_uni);

    let rec_base = analyze_rec(base, del_b.clone())?;
    let uni_all: Vec<AddrPattern> = uniform.iter().map(|(p, _)| p.clone()).collect();
    let rec_templ = analyze_rec(copy, uni_all.clone())?;
    let mut rec_aff: BTreeMap<u32, Vec<CompClass>> = BTreeMap::new();
    for &i in &affected {
        rec_aff.insert(i, analyze_rec(copy, del_for_instance(&uniform, &concrete, i))?);
    }

    let mut asm = Assembler::new();
    for c in &rec_base {
        let mut fresh = asm.fresh;
        let p = Piece::from_class(c).prefixed(StepPat::Base, &mut fresh);
        asm.fresh = fresh;
        asm.add(p);
    }
    // Template family pieces with a leading copy dim; affected copies are
    // carved out of the family.
    for c in &rec_templ {
        let var = format!("d{}", asm.fresh);
        asm.fresh += 1;
        let mut fresh = asm.fresh;
        let mut p = Piece::from_class(c).prefixed(
            StepPat::Copy(IdxPat::Bound { var: var.clone(), offset: 0 }),
            &mut fresh,
        );
        asm.fresh = fresh;
        p.dims.insert(0, FamilyDim { var: var.clone(), min: 0 });
        for &i in &affected {
            let mut asg = BTreeMap::new();
            asg.insert(var.clone(), i);
            for r in &p.rep.clone() {
                p.excluded.push(CompClass::subst_tuple(r, &asg));
            }
        }
        asm.add(p);
    }
    for (&i, classes) in &rec_aff {
        for c in classes {
            let mut fresh = asm.fresh;
            let p = Piece::from_class(c).prefixed(StepPat::Copy(IdxPat::Concrete(i)), &mut fresh);
            asm.fresh = fresh;
            asm.add(p);
        }
    }

    for (a, c) in links {
        let a_alive = !is_deleted(&del_b, a);
        let c_alive_templ = !is_deleted(&uni_all, c);
        let a_lifted = a.prefixed(Step::Base);
        if a_alive {
            let Some(ap) = asm.resolve_addr(&a_lifted) else { continue };
            if c_alive_templ {
                if let Some(cp) = asm.resolve_family_link(&c.prefixed(Step::Copy(0))) {
                    asm.union(ap, cp);
                }
            } else {
                asm.pieces[ap]
                    .nbhd
                    .push(AddrPattern::from_addr(c).prefixed(StepPat::Copy(IdxPat::Star)));
            }
            for &i in &affected {
                let del_i = del_for_instance(&uniform, &concrete, i);
                if !is_deleted(&del_i, c) {
                    if let Some(cp) = asm.resolve_addr(&c.prefixed(Step::Copy(i))) {
                        asm.union(ap, cp);
                    }
                } else {
                    asm.pieces[ap]
                        .nbhd
                        .push(AddrPattern::from_addr(c).prefixed(StepPat::Copy(IdxPat::Concrete(i))));
                }
            }
        } else {
            // a deleted: neighbourhood of every alive copy-side class.
            let nb = AddrPattern::from_addr(a).prefixed(StepPat::Base);
            if c_alive_templ {
                if let Some(cp) = asm.resolve_family_link(&c.prefixed(Step::Copy(0))) {
                    asm.pieces[cp].nbhd.push(nb.clone());
                }
            }
            for &i in &affected {
                let del_i = del_for_instance(&uniform, &concrete, i);
                if !is_deleted(&del_i, c) {
                    if let Some(cp) = asm.resolve_addr(&c.prefixed(Step::Copy(i))) {
                        asm.pieces[cp].nbhd.push(nb.clone());
                    }
                }
            }
        }
    }

    Ok(asm.finish())
}

pub(crate) fn class_lookup(
    classes: &[CompClass],
    a: &VertexAddr,
) -> Option<(usize, BTreeMap<String, u32>)> {
    for (k, c) in classes.iter().enumerate() {
        if let Some(asg) = c.instance_of(a) {
            return Some((k, asg));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Chain analysis: periodic strip plus explicit window.
// ---------------------------------------------------------------------------

/// Same-level connectivity relations of the (template) strip. A lane node
/// is a class instance of the segment analysis holding a glue endpoint.
#[derive(Debug, Clone)]
pub(crate) struct StripRelations {
    /// Lane nodes: (class index, dim assignment).
    pub nodes: Vec<(usize, BTreeMap<String, u32>)>,
    /// Glue arcs between lane nodes: (from node, to node).
    pub arcs: Vec<(usize, usize)>,
    /// Upward same-level connectivity (within strip[l..)).
    pub up: Vec<BTreeSet<usize>>,
    /// Stabilised two-way same-level connectivity (far above any cut).
    pub full: Vec<BTreeSet<usize>>,
    /// Persistent lane nodes (lie in an infinite component).
    pub persistent: BTreeSet<usize>,
}

impl StripRelations {
    pub(crate) fn compute(
        seg_classes: &[CompClass],
        glue: &[(VertexAddr, VertexAddr)],
        seg_del: &[AddrPattern],
    ) -> StripRelations {
        let mut nodes: Vec<(usize, BTreeMap<String, u32>)> = Vec::new();
        let node_of = |nodes: &mut Vec<(usize, BTreeMap<String, u32>)>,
                           key: (usize, BTreeMap<String, u32>)|
         -> usize {
            if let Some(i) = nodes.iter().position(|n| *n == key) {
                i
            } else {
                nodes.push(key);
                nodes.len() - 1
            }
        };
        let mut arcs = Vec::new();
        for (u, v) in glue {
            if is_deleted(seg_del, u) || is_deleted(seg_del, v) {
                continue;
            }
            let (Some(cu), Some(cv)) = (class_lookup(seg_classes, u), class_lookup(seg_classes, v))
            else {
                continue;
            };
            let nu = node_of(&mut nodes, cu);
            let nv = node_of(&mut nodes, cv);
            arcs.push((nu, nv));
        }
        let n = nodes.len();
        let close = |rel: &mut Vec<BTreeSet<usize>>| loop {
            let mut changed = false;
            for a in 0..rel.len() {
                let via: Vec<usize> = rel[a].iter().copied().collect();
                for b in via {
                    let add: Vec<usize> = rel[b].iter().copied().collect();
                    for c in add {
                        changed |= rel[a].insert(c);
                        changed |= rel[c].insert(a);
                    }
                }
            }
            if !changed {
                break;
            }
        };
        // up: least fixpoint of the up-excursion rule.
        let mut up: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        loop {
            let before: usize = up.iter().map(BTreeSet::len).sum();
            for &(a, b) in &arcs {
                for &(a2, b2) in &arcs {
                    if up[b].contains(&b2) {
                        up[a].insert(a2);
                        up[a2].insert(a);
                    }
                }
            }
            close(&mut up);
            let after: usize = up.iter().map(BTreeSet::len).sum();
            if after == before {
                break;
            }
        }
        // full: adds the down-excursion rule (valid far above any cut).
        let mut full = up.clone();
        loop {
            let before: usize = full.iter().map(BTreeSet::len).sum();
            for &(a, b) in &arcs {
                for &(a2, b2) in &arcs {
                    if full[b].contains(&b2) {
                        full[a].insert(a2);
                        full[a2].insert(a);
                    }
                    if full[a].contains(&a2) {
                        full[b].insert(b2);
                        full[b2].insert(b);
                    }
                }
            }
            close(&mut full);
            let after: usize = full.iter().map(BTreeSet::len).sum();
            if after == before {
                break;
            }
        }
        // persistent: greatest fixpoint.
        let mut persistent: BTreeSet<usize> = (0..n).collect();
        loop {
            let keep: BTreeSet<usize> = (0..n)
                .filter(|&x| {
                    arcs.iter()
                        .any(|&(y, z)| up[x].contains(&y) && persistent.contains(&z))
                })
                .collect();
            if keep == persistent {
                break;
            }
            persistent = keep;
        }
        StripRelations { nodes, arcs, up, full, persistent }
    }

    /// Strip end classes: `up`-classes of persistent lane nodes.
    pub(crate) fn end_classes(&self) -> Vec<BTreeSet<usize>> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut out = Vec::new();
        for x in self.persistent.iter().copied() {
            if seen.contains(&x) {
                continue;
            }
            let cls: BTreeSet<usize> = self.up[x]
                .iter()
                .copied()
                .filter(|y| self.persistent.contains(y))
                .collect();
            seen.extend(cls.iter().copied());
            out.push(cls);
        }
        out
    }
}

fn analyze_chain(
    base: Option<&OmegaTerm>,
    segment: &OmegaTerm,
    glue: &[(VertexAddr, VertexAddr)],
    links: &[(VertexAddr, VertexAddr)],
    del: Vec<AddrPattern>,
) -> Result<Vec<CompClass>, TermError> {
    let (del_b, uniform, concrete) = split_del(&del, true)?;
    let max_uni = uniform.iter().map(|(_, m)| *m).max().unwrap_or(0);
    let max_conc = concrete.iter().map(|(i, _)| i + 1).max().unwrap_or(0);
    // All levels below `a_lo` may carry level-specific deletions.
    let a_lo = max_uni.max(max_conc);

    let uni_all: Vec<AddrPattern> = uniform.iter().map(|(p, _)| p.clone()).collect();
    let rec_templ = analyze_rec(segment, uni_all.clone())?;
    let strip = StripRelations::compute(&rec_templ, glue, &uni_all);
    let n_lane = strip.nodes.len().max(1) as u32;

    // Explicit window [0, w); uniform beyond.
    let w = a_lo + n_lane * n_lane + n_lane + 6;

    let rec_base = match base {
        Some(b) => analyze_rec(b, del_b.clone())?,
        None => Vec::new(),
    };
    let mut rec_level: Vec<Vec<CompClass>> = Vec::new();
    let mut del_level: Vec<Vec<AddrPattern>> = Vec::new();
    for i in 0..w {
        let d = del_for_instance(&uniform, &concrete, i);
        let classes = if i >= a_lo { rec_templ.clone() } else { analyze_rec(segment, d.clone())? };
        rec_level.push(classes);
        del_level.push(d);
    }

    let mut asm = Assembler::new();
    for c in &rec_base {
        let mut fresh = asm.fresh;
        let p = Piece::from_class(c).prefixed(StepPat::Base, &mut fresh);
        asm.fresh = fresh;
        asm.add(p);
    }
    for (i, classes) in rec_level.iter().enumerate() {
        for c in classes {
            let mut fresh = asm.fresh;
            let p =
                Piece::from_class(c).prefixed(StepPat::Seg(IdxPat::Concrete(i as u32)), &mut fresh);
            asm.fresh = fresh;
            asm.add(p);
        }
    }

    // Glue edges within the window.
    for (u, v) in glue {
        for i in 0..w.saturating_sub(1) {
            let u_alive = !is_deleted(&del_level[i as usize], u);
            let v_alive = !is_deleted(&del_level[(i + 1) as usize], v);
            let (lu, lv) = (u.prefixed(Step::Seg(i)), v.prefixed(Step::Seg(i + 1)));
            match (u_alive, v_alive) {
                (true, true) => {
                    if let (Some(pu), Some(pv)) = (asm.resolve_addr(&lu), asm.resolve_addr(&lv)) {
                        asm.union(pu, pv);
                    }
                }
                (true, false) => {
                    if let Some(pu) = asm.resolve_addr(&lu) {
                        asm.pieces[pu].nbhd.push(AddrPattern::from_addr(&lv));
                    }
                }
                (false, true) => {
                    if let Some(pv) = asm.resolve_addr(&lv) {
                        asm.pieces[pv].nbhd.push(AddrPattern::from_addr(&lu));
                    }
                }
                (false, false) => {}
            }
        }
    }
    // Top closure at level w-1: same-level connectivity through the tail.
    for (x, ys) in strip.up.iter().enumerate() {
        for &y in ys {
            let (ax, ay) = (lane_addr(&strip, &rec_templ, x), lane_addr(&strip, &rec_templ, y));
            if let (Some(ax), Some(ay)) = (ax, ay) {
                if let (Some(px), Some(py)) = (
                    asm.resolve_addr(&ax.prefixed(Step::Seg(w - 1))),
                    asm.resolve_addr(&ay.prefixed(Step::Seg(w - 1))),
                ) {
                    asm.union(px, py);
                }
            }
        }
    }

    // Base links.
    for (b, x) in links {
        let b_alive = !is_deleted(&del_b, b);
        if b_alive {
            let Some(bp) = asm.resolve_addr(&b.prefixed(Step::Base)) else { continue };
            for i in 0..w {
                if !is_deleted(&del_level[i as usize], x) {
                    if let Some(px) = asm.resolve_addr(&x.prefixed(Step::Seg(i))) {
                        asm.union(bp, px);
                    }
                } else {
                    asm.pieces[bp].nbhd.push(
                        AddrPattern::from_addr(x).prefixed(StepPat::Seg(IdxPat::Concrete(i))),
                    );
                }
            }
            if is_deleted(&uni_all, x) {
                let var = format!("d{}", asm.fresh);
                asm.fresh += 1;
                asm.pieces[bp].nbhd.push(
                    AddrPattern::from_addr(x).prefixed(StepPat::Seg(IdxPat::Bound { var, offset: w })),
                );
            }
        } else {
            for i in 0..w {
                if !is_deleted(&del_level[i as usize], x) {
                    if let Some(px) = asm.resolve_addr(&x.prefixed(Step::Seg(i))) {
                        asm.pieces[px]
                            .nbhd
                            .push(AddrPattern::from_addr(b).prefixed(StepPat::Base));
                    }
                }
            }
        }
    }

    // Tail orbits: describe infinite components beyond the window.
    emit_tails(&mut asm, &strip, &rec_templ, links, &del_b, &uni_all, w);

    let classes = asm.finish();
    Ok(fold_chain_families(classes, a_lo, w))
}

fn lane_addr(
    strip: &StripRelations,
    rec_templ: &[CompClass],
    x: usize,
) -> Option<VertexAddr> {
    let (cx, ax) = &strip.nodes[x];
    rep_addr_of(&rec_templ[*cx], ax)
}

fn rep_addr_of(class: &CompClass, asg: &BTreeMap<String, u32>) -> Option<VertexAddr> {
    for r in &class.rep {
        let g = CompClass::subst_tuple(r, asg);
        if let Some(a) = g.to_addr() {
            return Some(a);
        }
        let free = g.free_positions();
        if let Some(a) = g.instantiate_positional(&vec![0; free]) {
            return Some(a);
        }
    }
    None
}

/// Attach tail membership patterns (levels >= w) to the window pieces of
/// infinite strip components.
fn emit_tails(
    asm: &mut Assembler,
    strip: &StripRelations,
    rec_templ: &[CompClass],
    links: &[(VertexAddr, VertexAddr)],
    del_b: &[AddrPattern],
    uni_all: &[AddrPattern],
    w: u32,
) {
    let mut starts: Vec<usize> = strip.persistent.iter().copied().collect();
    for (b, x) in links {
        if is_deleted(del_b, b) || is_deleted(uni_all, x) {
            continue;
        }
        if let Some(key) = class_lookup(rec_templ, x) {
            if let Some(i) = strip.nodes.iter().position(|n| *n == key) {
                starts.push(i);
            }
        }
    }
    starts.sort();
    starts.dedup();
    let cap = (strip.nodes.len() as i64 + 2) * 2;
    let mut done: BTreeSet<usize> = BTreeSet::new();
    for start in starts {
        if !done.insert(start) {
            continue;
        }
        let Some(addr) = lane_addr(strip, rec_templ, start) else { continue };
        let Some(pid) = asm.resolve_addr(&addr.prefixed(Step::Seg(w - 1))) else { continue };
        // Orbit over (node, level offset) using `full` relations and arcs.
        let mut orbit: BTreeSet<(usize, i64)> = BTreeSet::new();
        let mut queue = VecDeque::from([(start, 0i64)]);
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
        done.extend(orbit.iter().filter(|(_, d)| *d == 0).map(|(x, _)| *x));
        // Per node: appearances at positive offsets must become contiguous.
        let mut by_node: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
        for (x, d) in &orbit {
            if *d >= 1 {
                by_node.entry(*x).or_default().push(*d);
            }
        }
        for (x, ds) in by_node {
            let d0 = *ds.first().expect("nonempty");
            // Appearances must continue at every level up to the cap;
            // otherwise the orbit would need a stride, which the pattern
            // language does not express.
            for k in 0..(cap - 2 - d0) {
                assert!(
                    ds.contains(&(d0 + k)),
                    "strip orbit with stride is not supported by the term class"
                );
            }
            let (cx, axg) = &strip.nodes[x];
            let var = format!("d{}", asm.fresh);
            asm.fresh += 1;
            let off = w - 1 + d0 as u32;
            for r in &rec_templ[*cx].rep {
                let grounded = CompClass::subst_tuple(r, axg);
                asm.pieces[pid].rep.push(
                    grounded.prefixed(StepPat::Seg(IdxPat::Bound { var: var.clone(), offset: off })),
                );
            }
            for nb in &rec_templ[*cx].nbhd {
                let grounded = CompClass::subst_tuple(nb, axg);
                asm.pieces[pid].nbhd.push(
                    grounded.prefixed(StepPat::Seg(IdxPat::Bound { var: var.clone(), offset: off })),
                );
            }
        }
        asm.pieces[pid].card = Card::Infinite;
    }
}

/// Fold repeating window groups into shift families, and per-level family
/// classes in the uniform region into one class with a level dim.
fn fold_chain_families(mut classes: Vec<CompClass>, a_lo: u32, w: u32) -> Vec<CompClass> {
    let mut drop: BTreeSet<usize> = BTreeSet::new();

    // Shift families of dimless window groups.
    let mut shapes: BTreeMap<String, Vec<(u32, u32, usize)>> = BTreeMap::new(); // shape -> (min_l, max_l, idx)
    for (i, c) in classes.iter().enumerate() {
        if !c.dims.is_empty() || c.card == Card::Infinite {
            continue;
        }
        let levels: Option<Vec<u32>> = c
            .rep
            .iter()
            .map(|p| match p.0.first() {
                Some(StepPat::Seg(IdxPat::Concrete(l))) => Some(*l),
                _ => None,
            })
            .collect();
        let Some(levels) = levels else { continue };
        let (Some(&min_l), Some(&max_l)) = (levels.iter().min(), levels.iter().max()) else {
            continue;
        };
        // Shape relative to min_l; neighbourhood entries may sit one level
        // below, so encode the relative level textually.
        let shifted = |p: &AddrPattern| -> String {
            if let Some(StepPat::Seg(IdxPat::Concrete(l))) = p.0.first() {
                let rel = *l as i64 - min_l as i64;
                format!("S[{rel}]/{}", p.strip_first().normalized())
            } else {
                p.normalized().to_string()
            }
        };
        let mut shape: Vec<String> = c.rep.iter().map(&shifted).collect();
        shape.extend(c.nbhd.iter().map(|p| format!("n:{}", shifted(p))));
        shape.sort();
        shapes.entry(shape.join("|")).or_default().push((min_l, max_l, i));
    }
    for occurrences in shapes.values() {
        let recurring = occurrences.iter().any(|(m, _, _)| *m > a_lo);
        if !recurring || occurrences.len() < 2 {
            // Groups cut off by the window edge are instances of some
            // recurring family; they never form a singleton shape unless
            // genuinely unique, in which case they stay explicit.
            if occurrences.len() == 1 && occurrences[0].1 >= w - 1 {
                drop.insert(occurrences[0].2);
            }
            continue;
        }
        let (m0, _, first) = occurrences.iter().min().copied().unwrap();
        for &(m, _, i) in occurrences {
            if m != m0 || i != first {
                drop.insert(i);
            }
        }
        let _ = m0;
        let var = format!("f{first}");
        let c = &mut classes[first];
        // Dim value v stands for the instance shifted v levels up from the
        // representative, so every concrete level l becomes offset l.
        let shift = |p: &AddrPattern| -> AddrPattern {
            let mut q = p.clone();
            if let Some(StepPat::Seg(IdxPat::Concrete(l))) = q.0.first().cloned() {
                q.0[0] = StepPat::Seg(IdxPat::Bound { var: var.clone(), offset: l });
            }
            q
        };
        c.rep = c.rep.iter().map(shift).collect();
        c.nbhd = c.nbhd.iter().map(shift).collect();
        c.excluded = c.excluded.iter().map(shift).collect();
        c.dims.push(FamilyDim { var, min: 0 });
    }

    // Per-level segment-internal families in the uniform region.
    let mut fam_shapes: BTreeMap<String, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        if drop.contains(&i) || c.dims.is_empty() {
            continue;
        }
        // Single-level classes only.
        let levels: Option<Vec<u32>> = c
            .rep
            .iter()
            .map(|p| match p.0.first() {
                Some(StepPat::Seg(IdxPat::Concrete(l))) => Some(*l),
                _ => None,
            })
            .collect();
        let Some(levels) = levels else { continue };
        if levels.is_empty() || levels.iter().min() != levels.iter().max() {
            continue;
        }
        let l0 = levels[0];
        let shifted = |p: &AddrPattern| -> String {
            if let Some(StepPat::Seg(IdxPat::Concrete(l))) = p.0.first() {
                let rel = *l as i64 - l0 as i64;
                format!("S[{rel}]/{}", p.strip_first().normalized())
            } else {
                p.normalized().to_string()
            }
        };
        let mut shape: Vec<String> = c.rep.iter().map(&shifted).collect();
        shape.extend(c.excluded.iter().map(|p| format!("x:{}", shifted(p))));
        shape.extend(c.nbhd.iter().map(|p| format!("n:{}", shifted(p))));
        shape.sort();
        fam_shapes.entry(shape.join("|")).or_default().push((l0, i));
    }
    for occurrences in fam_shapes.values() {
        let recurring = occurrences.iter().any(|(m, _)| *m > a_lo);
        if !recurring || occurrences.len() < 2 {
            continue;
        }
        let (m0, first) = occurrences.iter().min().copied().unwrap();
        for &(m, i) in occurrences {
            if m != m0 || i != first {
                drop.insert(i);
            }
        }
        let _ = m0;
        let var = format!("g{first}");
        let c = &mut classes[first];
        let shift = |p: &AddrPattern| -> AddrPattern {
            let mut q = p.clone();
            if let Some(StepPat::Seg(IdxPat::Concrete(l))) = q.0.first().cloned() {
                q.0[0] = StepPat::Seg(IdxPat::Bound { var: var.clone(), offset: l });
            }
            q
        };
        c.rep = c.rep.iter().map(shift).collect();
        c.nbhd = c.nbhd.iter().map(shift).collect();
        c.excluded = c.excluded.iter().map(shift).collect();
        c.dims.insert(0, FamilyDim { var, min: 0 });
    }

    let mut out: Vec<CompClass> = classes
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, c)| c)
        .collect();
    out.sort_by(|a, b| a.rep.iter().min().cmp(&b.rep.iter().min()));
    out
}

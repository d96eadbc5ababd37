//! The ω-term algebra and its basic operations: validation, truncation,
//! lazy adjacency and pattern census.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::addr::{AddrPattern, IdxPat, Step, StepPat, UPattern, VertexAddr};
use super::finite::FiniteGraph;
use super::TermError;

/// A finite presentation of a countable (possibly infinite) graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OmegaTerm {
    /// A concrete finite labelled graph.
    Finite {
        vertices: Vec<String>,
        edges: Vec<(String, String)>,
    },
    /// `base` plus countably many disjoint copies of `copy`; copy `i` is
    /// joined to the base by one edge per link, identically for every `i`.
    Omega {
        base: Box<OmegaTerm>,
        copy: Box<OmegaTerm>,
        links: Vec<(VertexAddr, VertexAddr)>,
    },
    /// `base` plus segments s0, s1, ...; each glue pair `(u, v)` yields an
    /// edge from `u` in segment i to `v` in segment i+1 for every i, and
    /// each link `(b, x)` an edge from `b` in the base to `x` in every
    /// segment.
    Chain {
        base: Option<Box<OmegaTerm>>,
        segment: Box<OmegaTerm>,
        glue: Vec<(VertexAddr, VertexAddr)>,
        links: Vec<(VertexAddr, VertexAddr)>,
    },
    /// The countably infinite complete graph.
    KOmega,
}

/// Cardinality of a vertex set described by patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Card {
    Finite(usize),
    Infinite,
}

impl Card {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Card::Infinite)
    }
}

/// Degree report of the lazy adjacency oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Finite(usize),
    Infinite,
}

impl OmegaTerm {
    pub fn finite(vertices: &[&str], edges: &[(&str, &str)]) -> OmegaTerm {
        OmegaTerm::Finite {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    /// Validate all structural invariants, returning a diagnostic naming the
    /// first violated one.
    pub fn validate(&self) -> Result<(), TermError> {
        match self {
            OmegaTerm::Finite { vertices, edges } => {
                let mut seen = BTreeSet::new();
                for v in vertices {
                    if !seen.insert(v) {
                        return Err(TermError::DuplicateLabel(v.clone()));
                    }
                }
                for (a, b) in edges {
                    if a == b {
                        return Err(TermError::LoopEdge(a.clone()));
                    }
                    for e in [a, b] {
                        if !seen.contains(e) {
                            return Err(TermError::DanglingAddress(format!("V({e})")));
                        }
                    }
                }
                Ok(())
            }
            OmegaTerm::Omega { base, copy, links } => {
                base.validate()?;
                copy.validate()?;
                for (b, c) in links {
                    base.require_resolves(b)?;
                    copy.require_resolves(c)?;
                }
                Ok(())
            }
            OmegaTerm::Chain { base, segment, glue, links } => {
                if let Some(b) = base {
                    b.validate()?;
                } else if !links.is_empty() {
                    return Err(TermError::DanglingAddress(
                        "links with empty base".to_string(),
                    ));
                }
                segment.validate()?;
                for (u, v) in glue {
                    segment.require_resolves(u)?;
                    segment.require_resolves(v)?;
                }
                for (b, x) in links {
                    if let Some(bt) = base {
                        bt.require_resolves(b)?;
                    }
                    segment.require_resolves(x)?;
                }
                Ok(())
            }
            OmegaTerm::KOmega => Ok(()),
        }
    }

    /// Does `a` name a vertex of this term?
    pub fn resolves(&self, a: &VertexAddr) -> bool {
        match (self, a.first()) {
            (OmegaTerm::Finite { vertices, .. }, Some(Step::Leaf(l))) => {
                a.0.len() == 1 && vertices.contains(l)
            }
            (OmegaTerm::KOmega, Some(Step::K(_))) => a.0.len() == 1,
            (OmegaTerm::Omega { base, .. }, Some(Step::Base)) => {
                base.resolves(&a.strip(&Step::Base).unwrap())
            }
            (OmegaTerm::Omega { copy, .. }, Some(Step::Copy(i))) => {
                copy.resolves(&a.strip(&Step::Copy(*i)).unwrap())
            }
            (OmegaTerm::Chain { base: Some(b), .. }, Some(Step::Base)) => {
                b.resolves(&a.strip(&Step::Base).unwrap())
            }
            (OmegaTerm::Chain { segment, .. }, Some(Step::Seg(i))) => {
                segment.resolves(&a.strip(&Step::Seg(*i)).unwrap())
            }
            _ => false,
        }
    }

    pub fn require_resolves(&self, a: &VertexAddr) -> Result<(), TermError> {
        if self.resolves(a) {
            Ok(())
        } else {
            Err(TermError::DanglingAddress(a.to_string()))
        }
    }

    /// Does the pattern describe vertices of this term (shape-wise)?
    /// Bound and star indices are accepted at any index position.
    pub fn pattern_resolves(&self, p: &AddrPattern) -> bool {
        match (self, p.0.first()) {
            (OmegaTerm::Finite { vertices, .. }, Some(StepPat::Leaf(l))) => {
                p.0.len() == 1 && vertices.contains(l)
            }
            (OmegaTerm::KOmega, Some(StepPat::K(_))) => p.0.len() == 1,
            (OmegaTerm::Omega { base, .. }, Some(StepPat::Base)) => {
                base.pattern_resolves(&p.strip_first())
            }
            (OmegaTerm::Omega { copy, .. }, Some(StepPat::Copy(_))) => {
                copy.pattern_resolves(&p.strip_first())
            }
            (OmegaTerm::Chain { base: Some(b), .. }, Some(StepPat::Base)) => {
                b.pattern_resolves(&p.strip_first())
            }
            (OmegaTerm::Chain { segment, .. }, Some(StepPat::Seg(_))) => {
                segment.pattern_resolves(&p.strip_first())
            }
            _ => false,
        }
    }

    /// Patterns jointly describing the whole vertex set.
    pub fn all_vertices(&self) -> UPattern {
        let mut out = Vec::new();
        self.collect_vertex_patterns(&mut Vec::new(), &mut out);
        UPattern(out)
    }

    fn collect_vertex_patterns(&self, prefix: &mut Vec<StepPat>, out: &mut Vec<AddrPattern>) {
        match self {
            OmegaTerm::Finite { vertices, .. } => {
                for v in vertices {
                    let mut steps = prefix.clone();
                    steps.push(StepPat::Leaf(v.clone()));
                    out.push(AddrPattern(steps));
                }
            }
            OmegaTerm::KOmega => {
                let mut steps = prefix.clone();
                steps.push(StepPat::K(IdxPat::Star));
                out.push(AddrPattern(steps));
            }
            OmegaTerm::Omega { base, copy, .. } => {
                prefix.push(StepPat::Base);
                base.collect_vertex_patterns(prefix, out);
                prefix.pop();
                prefix.push(StepPat::Copy(IdxPat::Star));
                copy.collect_vertex_patterns(prefix, out);
                prefix.pop();
            }
            OmegaTerm::Chain { base, segment, .. } => {
                if let Some(b) = base {
                    prefix.push(StepPat::Base);
                    b.collect_vertex_patterns(prefix, out);
                    prefix.pop();
                }
                prefix.push(StepPat::Seg(IdxPat::Star));
                segment.collect_vertex_patterns(prefix, out);
                prefix.pop();
            }
        }
    }

    /// Replace every ω index set by `{0, .., n-1}`, recursively.
    pub fn truncate(&self, n: u32) -> FiniteGraph {
        assert!(n >= 1, "truncation budget must be at least 1");
        let mut g = FiniteGraph::default();
        self.truncate_into(n, &mut Vec::new(), &mut g);
        g
    }

    fn truncate_into(&self, n: u32, prefix: &mut Vec<Step>, g: &mut FiniteGraph) {
        let lift = |prefix: &[Step], a: &VertexAddr| {
            let mut steps = prefix.to_vec();
            steps.extend(a.0.iter().cloned());
            VertexAddr(steps)
        };
        match self {
            OmegaTerm::Finite { vertices, edges } => {
                for v in vertices {
                    prefix.push(Step::Leaf(v.clone()));
                    g.add_vertex(VertexAddr(prefix.clone()));
                    prefix.pop();
                }
                for (a, b) in edges {
                    let va = lift(prefix, &VertexAddr::leaf(a));
                    let vb = lift(prefix, &VertexAddr::leaf(b));
                    g.add_edge(&va, &vb);
                }
            }
            OmegaTerm::KOmega => {
                for i in 0..n {
                    g.add_vertex(lift(prefix, &VertexAddr::k(i)));
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        g.add_edge(&lift(prefix, &VertexAddr::k(i)), &lift(prefix, &VertexAddr::k(j)));
                    }
                }
            }
            OmegaTerm::Omega { base, copy, links } => {
                prefix.push(Step::Base);
                base.truncate_into(n, prefix, g);
                prefix.pop();
                for i in 0..n {
                    prefix.push(Step::Copy(i));
                    copy.truncate_into(n, prefix, g);
                    prefix.pop();
                }
                for (b, c) in links {
                    let vb = lift(prefix, &b.prefixed(Step::Base));
                    for i in 0..n {
                        let vc = lift(prefix, &c.prefixed(Step::Copy(i)));
                        g.add_edge(&vb, &vc);
                    }
                }
            }
            OmegaTerm::Chain { base, segment, glue, links } => {
                if let Some(b) = base {
                    prefix.push(Step::Base);
                    b.truncate_into(n, prefix, g);
                    prefix.pop();
                }
                for i in 0..n {
                    prefix.push(Step::Seg(i));
                    segment.truncate_into(n, prefix, g);
                    prefix.pop();
                }
                for (u, v) in glue {
                    for i in 0..n.saturating_sub(1) {
                        let vu = lift(prefix, &u.prefixed(Step::Seg(i)));
                        let vv = lift(prefix, &v.prefixed(Step::Seg(i + 1)));
                        g.add_edge(&vu, &vv);
                    }
                }
                for (b, x) in links {
                    let vb = lift(prefix, &b.prefixed(Step::Base));
                    for i in 0..n {
                        let vx = lift(prefix, &x.prefixed(Step::Seg(i)));
                        g.add_edge(&vb, &vx);
                    }
                }
            }
        }
    }

    /// The first `limit` neighbours of `a` in canonical order, plus the
    /// degree of `a` (exact, possibly infinite).
    pub fn neighbors(&self, a: &VertexAddr, limit: usize) -> Result<(Vec<VertexAddr>, Degree), TermError> {
        self.require_resolves(a)?;
        let mut finite: Vec<VertexAddr> = Vec::new();
        // Families of neighbours, one per index i >= min, e.g. all C(i)/x.
        let mut families: Vec<(Box<dyn Fn(u32) -> VertexAddr + '_>, u32)> = Vec::new();
        self.neighbor_parts(a, &mut finite, &mut families);
        let degree = if families.is_empty() {
            Degree::Finite(finite.len())
        } else {
            Degree::Infinite
        };
        let mut out: BTreeSet<VertexAddr> = finite.into_iter().collect();
        // Pull family members in increasing index order until `limit` is met;
        // family members at index i are canonically ordered among themselves.
        let mut round = 0u32;
        while out.len() < limit && !families.is_empty() {
            for (f, min) in &families {
                if round >= *min {
                    out.insert(f(round - *min));
                }
            }
            round += 1;
            if round > limit as u32 + 4 {
                break;
            }
        }
        Ok((out.into_iter().take(limit).collect(), degree))
    }

    #[allow(clippy::type_complexity)]
    fn neighbor_parts<'a>(
        &'a self,
        a: &VertexAddr,
        finite: &mut Vec<VertexAddr>,
        families: &mut Vec<(Box<dyn Fn(u32) -> VertexAddr + 'a>, u32)>,
    ) {
        match (self, a.first()) {
            (OmegaTerm::Finite { edges, .. }, Some(Step::Leaf(l))) => {
                for (x, y) in edges {
                    if x == l {
                        finite.push(VertexAddr::leaf(y));
                    } else if y == l {
                        finite.push(VertexAddr::leaf(x));
                    }
                }
            }
            (OmegaTerm::KOmega, Some(Step::K(i))) => {
                let i = *i;
                families.push((
                    Box::new(move |j| VertexAddr::k(if j < i { j } else { j + 1 })),
                    0,
                ));
            }
            (OmegaTerm::Omega { base, copy, links }, Some(step)) => match step {
                Step::Base => {
                    let rest = a.strip(&Step::Base).unwrap();
                    let mut sub_finite = Vec::new();
                    base.neighbor_parts(&rest, &mut sub_finite, &mut Vec::new());
                    finite.extend(sub_finite.iter().map(|x| x.prefixed(Step::Base)));
                    base.neighbor_families_lifted(&rest, Step::Base, families);
                    for (b, c) in links {
                        if *b == rest {
                            let c = c.clone();
                            families.push((Box::new(move |i| c.prefixed(Step::Copy(i))), 0));
                        }
                    }
                }
                Step::Copy(i) => {
                    let i = *i;
                    let rest = a.strip(&Step::Copy(i)).unwrap();
                    let mut sub_finite = Vec::new();
                    copy.neighbor_parts(&rest, &mut sub_finite, &mut Vec::new());
                    finite.extend(sub_finite.iter().map(|x| x.prefixed(Step::Copy(i))));
                    copy.neighbor_families_lifted(&rest, Step::Copy(i), families);
                    for (b, c) in links {
                        if *c == rest {
                            finite.push(b.prefixed(Step::Base));
                        }
                    }
                }
                _ => {}
            },
            (OmegaTerm::Chain { base, segment, glue, links }, Some(step)) => match step {
                Step::Base => {
                    let rest = a.strip(&Step::Base).unwrap();
                    if let Some(b) = base {
                        let mut sub_finite = Vec::new();
                        b.neighbor_parts(&rest, &mut sub_finite, &mut Vec::new());
                        finite.extend(sub_finite.iter().map(|x| x.prefixed(Step::Base)));
                        b.neighbor_families_lifted(&rest, Step::Base, families);
                    }
                    for (b, x) in links {
                        if *b == rest {
                            let x = x.clone();
                            families.push((Box::new(move |i| x.prefixed(Step::Seg(i))), 0));
                        }
                    }
                }
                Step::Seg(i) => {
                    let i = *i;
                    let rest = a.strip(&Step::Seg(i)).unwrap();
                    let mut sub_finite = Vec::new();
                    segment.neighbor_parts(&rest, &mut sub_finite, &mut Vec::new());
                    finite.extend(sub_finite.iter().map(|x| x.prefixed(Step::Seg(i))));
                    segment.neighbor_families_lifted(&rest, Step::Seg(i), families);
                    for (u, v) in glue {
                        if *u == rest {
                            finite.push(v.prefixed(Step::Seg(i + 1)));
                        }
                        if *v == rest && i > 0 {
                            finite.push(u.prefixed(Step::Seg(i - 1)));
                        }
                    }
                    for (b, x) in links {
                        if *x == rest {
                            finite.push(b.prefixed(Step::Base));
                        }
                    }
                }
                _ => {}
            },
            _ => {}
        }
    }

    #[allow(clippy::type_complexity)]
    fn neighbor_families_lifted<'a>(
        &'a self,
        a: &VertexAddr,
        lift: Step,
        families: &mut Vec<(Box<dyn Fn(u32) -> VertexAddr + 'a>, u32)>,
    ) {
        let mut sub: Vec<(Box<dyn Fn(u32) -> VertexAddr + 'a>, u32)> = Vec::new();
        self.neighbor_parts(a, &mut Vec::new(), &mut sub);
        for (f, min) in sub {
            let lift = lift.clone();
            families.push((Box::new(move |i| f(i).prefixed(lift.clone())), min));
        }
    }

    /// Is there an edge between two (distinct, resolving) addresses?
    pub fn has_edge(&self, a: &VertexAddr, b: &VertexAddr) -> bool {
        match self {
            OmegaTerm::Finite { edges, .. } => match (a.first(), b.first()) {
                (Some(Step::Leaf(x)), Some(Step::Leaf(y))) => edges
                    .iter()
                    .any(|(p, q)| (p == x && q == y) || (p == y && q == x)),
                _ => false,
            },
            OmegaTerm::KOmega => a != b && a.0.len() == 1 && b.0.len() == 1,
            OmegaTerm::Omega { base, copy, links } => match (a.first(), b.first()) {
                (Some(Step::Base), Some(Step::Base)) => base.has_edge(
                    &a.strip(&Step::Base).unwrap(),
                    &b.strip(&Step::Base).unwrap(),
                ),
                (Some(Step::Copy(i)), Some(Step::Copy(j))) if i == j => copy.has_edge(
                    &a.strip(&Step::Copy(*i)).unwrap(),
                    &b.strip(&Step::Copy(*i)).unwrap(),
                ),
                (Some(Step::Base), Some(Step::Copy(i))) => {
                    let (ra, rb) = (a.strip(&Step::Base).unwrap(), b.strip(&Step::Copy(*i)).unwrap());
                    links.iter().any(|(x, y)| *x == ra && *y == rb)
                }
                (Some(Step::Copy(_)), Some(Step::Base)) => self.has_edge(b, a),
                _ => false,
            },
            OmegaTerm::Chain { base, segment, glue, links } => match (a.first(), b.first()) {
                (Some(Step::Base), Some(Step::Base)) => base.as_ref().is_some_and(|t| {
                    t.has_edge(&a.strip(&Step::Base).unwrap(), &b.strip(&Step::Base).unwrap())
                }),
                (Some(Step::Seg(i)), Some(Step::Seg(j))) => {
                    let (ra, rb) = (
                        a.strip(&Step::Seg(*i)).unwrap(),
                        b.strip(&Step::Seg(*j)).unwrap(),
                    );
                    if i == j {
                        segment.has_edge(&ra, &rb)
                    } else if *j == *i + 1 {
                        glue.iter().any(|(u, v)| *u == ra && *v == rb)
                    } else if *i == *j + 1 {
                        glue.iter().any(|(u, v)| *u == rb && *v == ra)
                    } else {
                        false
                    }
                }
                (Some(Step::Base), Some(Step::Seg(i))) => {
                    let (ra, rb) = (a.strip(&Step::Base).unwrap(), b.strip(&Step::Seg(*i)).unwrap());
                    links.iter().any(|(x, y)| *x == ra && *y == rb)
                }
                (Some(Step::Seg(_)), Some(Step::Base)) => self.has_edge(b, a),
                _ => false,
            },
        }
    }

    /// Exact cardinality of the matched set of a pattern collection.
    pub fn census(&self, u: &UPattern) -> Result<Card, TermError> {
        let mut concrete: BTreeSet<VertexAddr> = BTreeSet::new();
        for p in &u.0 {
            if !self.pattern_resolves(p) {
                return Err(TermError::UnresolvablePattern(p.to_string()));
            }
            if p.free_positions() > 0 {
                return Ok(Card::Infinite);
            }
            concrete.insert(p.to_addr().expect("concrete pattern"));
        }
        Ok(Card::Finite(concrete.len()))
    }

    /// Enumerate matched addresses in graded order (by maximum instantiated
    /// index, ties broken lexicographically), up to `limit` of them.
    pub fn enumerate(&self, u: &UPattern, limit: usize) -> Vec<VertexAddr> {
        let mut out: BTreeSet<VertexAddr> = BTreeSet::new();
        let mut grade = 0u32;
        loop {
            let mut added = false;
            for p in &u.0 {
                let free = p.free_positions();
                if free == 0 {
                    if grade == 0 {
                        if let Some(a) = p.to_addr() {
                            if self.resolves(&a) {
                                out.insert(a);
                            }
                        }
                    }
                    continue;
                }
                // All index tuples with max = grade.
                for tuple in tuples_with_max(free, grade) {
                    if let Some(a) = p.instantiate_positional(&tuple) {
                        if self.resolves(&a) && out.insert(a) {
                            added = true;
                        }
                    }
                }
            }
            if out.len() >= limit {
                break;
            }
            if grade > 0 && !added && grade > limit as u32 + 2 {
                break;
            }
            grade += 1;
            if grade > 64 + limit as u32 {
                break;
            }
        }
        out.into_iter().take(limit).collect()
    }
}

/// All tuples of length `n` over `0..=max` containing `max` at least once.
fn tuples_with_max(n: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(cur: &mut Vec<u32>, pos: usize, max: u32, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            if cur.iter().any(|&x| x == max) {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=max {
            cur[pos] = v;
            rec(cur, pos + 1, max, out);
        }
    }
    rec(&mut cur, 0, max, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    #[test]
    fn validate_accepts_smallest_graph() {
        let t = OmegaTerm::finite(&["a", "b"], &[("a", "b")]);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn validate_rejects_dangling_link() {
        let t = OmegaTerm::Omega {
            base: Box::new(OmegaTerm::finite(&["c"], &[])),
            copy: Box::new(OmegaTerm::finite(&["l"], &[])),
            links: vec![("V(c)".parse().unwrap(), "V(z)".parse().unwrap())],
        };
        assert!(matches!(t.validate(), Err(TermError::DanglingAddress(a)) if a == "V(z)"));
    }

    #[test]
    fn validate_rejects_duplicates_and_loops() {
        let t = OmegaTerm::finite(&["a", "a"], &[]);
        assert!(matches!(t.validate(), Err(TermError::DuplicateLabel(_))));
        let t = OmegaTerm::finite(&["a"], &[("a", "a")]);
        assert!(matches!(t.validate(), Err(TermError::LoopEdge(_))));
    }

    #[test]
    fn truncate_ray_is_path() {
        let g = ray().truncate(3);
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(g.is_connected());
    }

    #[test]
    fn truncate_star_has_n_leaves() {
        let g = star().truncate(4);
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.edge_count(), 4);
        let c: VertexAddr = "B/V(c)".parse().unwrap();
        assert_eq!(g.degree(&c), 4);
    }

    #[test]
    fn truncate_t3_is_binary_tree_of_depth_two() {
        let g = t3().truncate(2);
        assert_eq!(g.vertex_count(), 7);
        assert_eq!(g.edge_count(), 6);
        assert!(g.is_connected());
    }

    #[test]
    fn truncate_komega_is_complete() {
        let g = OmegaTerm::KOmega.truncate(5);
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.edge_count(), 10);
    }

    #[test]
    fn neighbors_of_star_center() {
        let (ns, deg) = star().neighbors(&"B/V(c)".parse().unwrap(), 3).unwrap();
        assert_eq!(deg, Degree::Infinite);
        assert_eq!(
            ns,
            vec![
                "C(0)/V(l)".parse().unwrap(),
                "C(1)/V(l)".parse().unwrap(),
                "C(2)/V(l)".parse().unwrap()
            ]
        );
    }

    #[test]
    fn neighbors_of_inner_ray_vertex() {
        let (ns, deg) = ray().neighbors(&"S(5)/V(v)".parse().unwrap(), 10).unwrap();
        assert_eq!(deg, Degree::Finite(2));
        assert_eq!(
            ns,
            vec!["S(4)/V(v)".parse().unwrap(), "S(6)/V(v)".parse().unwrap()]
        );
    }

    #[test]
    fn neighbors_of_domray_base_vertex() {
        let (ns, deg) = domray().neighbors(&"B/V(r)".parse().unwrap(), 2).unwrap();
        assert_eq!(deg, Degree::Infinite);
        assert_eq!(
            ns,
            vec!["S(0)/V(v)".parse().unwrap(), "S(1)/V(v)".parse().unwrap()]
        );
    }

    #[test]
    fn census_distinguishes_finite_and_infinite() {
        assert_eq!(
            star().census(&"C(*)/V(l)".parse().unwrap()).unwrap(),
            Card::Infinite
        );
        assert_eq!(
            star().census(&"B/V(c)".parse().unwrap()).unwrap(),
            Card::Finite(1)
        );
        assert_eq!(t3().census(&t3().all_vertices()).unwrap(), Card::Infinite);
    }

    #[test]
    fn enumerate_orders_matches_by_grade() {
        let got = star().enumerate(&"C(*)/V(l)".parse().unwrap(), 3);
        assert_eq!(
            got,
            vec![
                "C(0)/V(l)".parse().unwrap(),
                "C(1)/V(l)".parse().unwrap(),
                "C(2)/V(l)".parse().unwrap()
            ]
        );
    }

    #[test]
    fn term_json_roundtrip_matches_wire_format() {
        let t = star();
        let js = serde_json::to_value(&t).unwrap();
        assert_eq!(js["kind"], "omega");
        assert_eq!(js["links"][0][0], "V(c)");
        let back: OmegaTerm = serde_json::from_value(js).unwrap();
        assert_eq!(back, t);
    }
}

//! Finite-order separations `{X, C}` of term graphs, their orientation by
//! ends and critical vertex sets, tameness, and corner separations.

mod components;
mod indexset;
mod separation;

pub use components::{CompClass, Components, FamilyDim};
pub use indexset::IndexSet;
pub use separation::{
    corner, instances_meeting_with_nbhd, is_tame, make_separation, nbhd_exact_count,
    orient_by_crit, ComponentSelector, SepError, Separation, Side, SidePattern,
};

pub(crate) use components::StripRelations;

impl CompClass {
    /// Substitute a dim assignment into a pattern (public mirror of the
    /// internal helper).
    pub fn subst_tuple_public(
        p: &AddrPattern,
        asg: &std::collections::BTreeMap<String, u32>,
    ) -> AddrPattern {
        CompClass::subst_tuple(p, asg)
    }
}

/// All concrete instances of a pattern with indices below `n`.
pub fn enumerate_in_truncation(p: &AddrPattern, n: u32) -> Vec<VertexAddr> {
    enumerate_pattern_in_truncation(p, n, &std::collections::BTreeMap::new())
}

/// Locate the class instance holding a concrete address among a class list.
pub(crate) fn class_lookup_in(
    classes: &[CompClass],
    a: &crate::term_graphs::VertexAddr,
) -> Option<(usize, std::collections::BTreeMap<String, u32>)> {
    components::class_lookup(classes, a)
}

use crate::term_graphs::{AddrPattern, IdxPat, OmegaTerm, Step, TermError, UPattern, VertexAddr};
use std::collections::{BTreeMap, BTreeSet};

/// Components of `t - X` for a finite deletion set.
pub fn delete_components(
    t: &OmegaTerm,
    x: &BTreeSet<VertexAddr>,
) -> Result<Components, TermError> {
    for a in x {
        t.require_resolves(a)?;
    }
    let u = UPattern(x.iter().map(AddrPattern::from_addr).collect());
    Components::analyze(t, &u)
}

/// Enumerate all concrete instances of a pattern whose indices are all
/// below `n`, under a partial dim assignment.
pub(crate) fn enumerate_pattern_in_truncation(
    p: &AddrPattern,
    n: u32,
    asg: &BTreeMap<String, u32>,
) -> Vec<VertexAddr> {
    let q = CompClass::subst_tuple(p, asg);
    let free = {
        let mut vars: Vec<&String> = Vec::new();
        let mut stars = 0usize;
        for s in &q.0 {
            match s.idx() {
                Some(IdxPat::Star) => stars += 1,
                Some(IdxPat::Bound { var, .. }) => {
                    if !vars.contains(&var) {
                        vars.push(var);
                    }
                }
                _ => {}
            }
        }
        stars + vars.len()
    };
    fn rec(q: &AddrPattern, n: u32, tuple: &mut Vec<u32>, pos: usize, out: &mut Vec<VertexAddr>) {
        if pos == tuple.len() {
            if let Some(a) = q.instantiate_positional(tuple) {
                let in_range = a.0.iter().all(|s| match s {
                    Step::Copy(i) | Step::Seg(i) | Step::K(i) => *i < n,
                    _ => true,
                });
                if in_range {
                    out.push(a);
                }
            }
            return;
        }
        for v in 0..n {
            tuple[pos] = v;
            rec(q, n, tuple, pos + 1, out);
        }
    }
    let mut out = Vec::new();
    let mut tuple = vec![0u32; free];
    rec(&q, n, &mut tuple, 0, &mut out);
    out.sort();
    out.dedup();
    out
}

impl CompClass {
    /// All component instances of this class inside `truncate(t, n)`, as
    /// vertex sets. For merged classes, one combined set.
    pub fn instances_in_truncation(&self, n: u32) -> Vec<BTreeSet<VertexAddr>> {
        let mut excluded_addrs: BTreeSet<VertexAddr> = BTreeSet::new();
        for e in &self.excluded {
            excluded_addrs.extend(enumerate_pattern_in_truncation(e, n, &BTreeMap::new()));
        }
        let build = |asg: &BTreeMap<String, u32>| -> BTreeSet<VertexAddr> {
            let mut set = BTreeSet::new();
            for r in &self.rep {
                set.extend(enumerate_pattern_in_truncation(r, n, asg));
            }
            set.retain(|a| !excluded_addrs.contains(a));
            set
        };
        if self.dims.is_empty() {
            let set = build(&BTreeMap::new());
            if set.is_empty() {
                return Vec::new();
            }
            return vec![set];
        }
        fn rec(
            cls: &CompClass,
            dims: &[FamilyDim],
            n: u32,
            asg: &mut BTreeMap<String, u32>,
            build: &dyn Fn(&BTreeMap<String, u32>) -> BTreeSet<VertexAddr>,
            out: &mut Vec<BTreeSet<VertexAddr>>,
        ) {
            if dims.is_empty() {
                if cls
                    .excluded_tuples
                    .iter()
                    .any(|t| t.iter().all(|(k, v)| asg.get(k) == Some(v)))
                {
                    return;
                }
                let set = build(asg);
                if !set.is_empty() {
                    out.push(set);
                }
                return;
            }
            let d = &dims[0];
            for v in d.min..n {
                asg.insert(d.var.clone(), v);
                rec(cls, &dims[1..], n, asg, build, out);
            }
            asg.remove(&d.var);
        }
        let mut out = Vec::new();
        let mut asg = BTreeMap::new();
        rec(self, &self.dims, n, &mut asg, &build, &mut out);
        out
    }
}

impl Components {
    /// Oracle check: inside `truncate(t, n)`, the class instances must be
    /// disjoint, cover the surviving vertices, and every component of the
    /// truncated deleted graph must lie inside exactly one instance.
    pub fn check_against_truncation(&self, t: &OmegaTerm, n: u32) -> Result<(), String> {
        let g = t.truncate(n);
        let mut deleted: BTreeSet<VertexAddr> = BTreeSet::new();
        for p in &self.deleted.0 {
            deleted.extend(enumerate_pattern_in_truncation(p, n, &BTreeMap::new()));
        }
        let h = g.delete(&deleted);
        let mut cover: BTreeMap<VertexAddr, usize> = BTreeMap::new();
        let mut next_id = 0usize;
        for (ci, c) in self.classes.iter().enumerate() {
            for inst in c.instances_in_truncation(n) {
                for a in &inst {
                    if !h.contains(a) {
                        return Err(format!(
                            "class {ci} claims vertex {a} outside the truncated graph"
                        ));
                    }
                    if cover.insert(a.clone(), next_id).is_some() {
                        return Err(format!("vertex {a} claimed by two instances"));
                    }
                }
                next_id += 1;
            }
        }
        for v in h.vertices() {
            if !cover.contains_key(v) {
                return Err(format!("vertex {v} not covered by any class instance"));
            }
        }
        for comp in h.components() {
            let ids: BTreeSet<usize> = comp.iter().map(|v| cover[v]).collect();
            if ids.len() != 1 {
                return Err(format!(
                    "truncated component at {:?} crosses {} instances",
                    comp.iter().next(),
                    ids.len()
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    fn addrs(list: &[&str]) -> BTreeSet<VertexAddr> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn check(t: &OmegaTerm, del: &[&str]) -> Components {
        let comps = delete_components(t, &addrs(del)).unwrap();
        for n in 2..=6 {
            if let Err(e) = comps.check_against_truncation(t, n) {
                panic!("truncation oracle failed at n={n} for deletion {del:?}: {e}\nclasses: {:#?}", comps.classes);
            }
        }
        comps
    }

    #[test]
    fn star_minus_center_is_leaf_family() {
        let comps = check(&star(), &["B/V(c)"]);
        assert_eq!(comps.classes.len(), 1);
        let c = &comps.classes[0];
        assert_eq!(c.component_count(), crate::term_graphs::Card::Infinite);
        assert_eq!(c.card, crate::term_graphs::Card::Finite(1));
        assert_eq!(c.nbhd.len(), 1);
        assert_eq!(c.nbhd[0].to_string(), "B/V(c)");
    }

    #[test]
    fn ray_minus_inner_vertex_has_prefix_and_tail() {
        let comps = check(&ray(), &["S(2)/V(v)"]);
        assert_eq!(comps.classes.len(), 2, "{:#?}", comps.classes);
        let finite: Vec<_> = comps
            .classes
            .iter()
            .filter(|c| c.card == crate::term_graphs::Card::Finite(2))
            .collect();
        assert_eq!(finite.len(), 1);
        let infinite: Vec<_> = comps
            .classes
            .iter()
            .filter(|c| c.card == crate::term_graphs::Card::Infinite)
            .collect();
        assert_eq!(infinite.len(), 1);
    }

    #[test]
    fn domray_minus_base_stays_connected() {
        let comps = check(&domray(), &["B/V(r)"]);
        assert_eq!(comps.classes.len(), 1);
        assert!(comps.is_single_component());
    }

    #[test]
    fn whole_terms_are_connected() {
        for t in [ray(), star(), domray(), comb(), ladder(), t3(), star_of_rays(), spider(), komega()] {
            let comps = check(&t, &[]);
            assert!(comps.is_single_component(), "term should be connected: {:#?}", comps.classes);
        }
    }

    #[test]
    fn komega_minus_vertices_is_one_component() {
        let comps = check(&komega(), &["K(0)", "K(3)"]);
        assert_eq!(comps.classes.len(), 1);
        let c = &comps.classes[0];
        assert_eq!(c.card, crate::term_graphs::Card::Infinite);
        assert_eq!(c.nbhd.len(), 2);
    }

    #[test]
    fn t3_minus_root_gives_copy_family() {
        let comps = check(&t3(), &["B/V(r)"]);
        assert_eq!(comps.classes.len(), 1);
        let c = &comps.classes[0];
        assert_eq!(c.component_count(), crate::term_graphs::Card::Infinite);
        assert_eq!(c.card, crate::term_graphs::Card::Infinite);
        assert_eq!(c.dims.len(), 1);
    }

    #[test]
    fn t3_minus_root_and_one_branch_vertex() {
        let comps = check(&t3(), &["B/V(r)", "C(0)/B/V(s)"]);
        // Families: untouched copies (i >= 1) and copy 0's grandchildren.
        let total: usize = comps.classes.len();
        assert!(total >= 2, "{:#?}", comps.classes);
    }

    #[test]
    fn comb_minus_spine_vertex() {
        let comps = check(&comb(), &["S(2)/V(v)"]);
        // prefix (with teeth), the detached tooth at level 2, infinite tail
        assert_eq!(comps.classes.len(), 3, "{:#?}", comps.classes);
    }

    #[test]
    fn ladder_minus_rung_pair() {
        let comps = check(&ladder(), &["S(1)/V(a)", "S(1)/V(b)"]);
        assert_eq!(comps.classes.len(), 2, "{:#?}", comps.classes);
    }

    #[test]
    fn star_of_rays_minus_center() {
        let comps = check(&star_of_rays(), &["B/V(c)"]);
        assert_eq!(comps.classes.len(), 1);
        let c = &comps.classes[0];
        assert_eq!(c.component_count(), crate::term_graphs::Card::Infinite);
        assert_eq!(c.card, crate::term_graphs::Card::Infinite);
    }

    #[test]
    fn uniform_pattern_deletion_of_level_one() {
        // Deleting every level-1 vertex of T3 leaves the root and the
        // grandchild families.
        let comps = Components::analyze(&t3(), &"C(*)/B/V(s)".parse().unwrap()).unwrap();
        for n in 2..=6 {
            comps.check_against_truncation(&t3(), n).unwrap();
        }
        // root singleton + grandchildren family over two dims
        assert_eq!(comps.classes.len(), 2, "{:#?}", comps.classes);
        let fam = comps
            .classes
            .iter()
            .find(|c| !c.dims.is_empty())
            .expect("grandchild family");
        assert_eq!(fam.dims.len(), 2);
    }

    #[test]
    fn deletion_of_all_spine_vertices_leaves_teeth() {
        let comps = Components::analyze(&comb(), &"S(*)/V(v)".parse().unwrap()).unwrap();
        for n in 2..=6 {
            comps.check_against_truncation(&comb(), n).unwrap();
        }
        assert_eq!(comps.classes.len(), 1, "{:#?}", comps.classes);
        assert_eq!(comps.classes[0].dims.len(), 1);
    }
}

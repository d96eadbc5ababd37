//! The standard example terms used across tests and the built-in corpus.

use super::{OmegaTerm, UPattern};

fn a(s: &str) -> super::VertexAddr {
    s.parse().expect("example address")
}

/// One-way infinite path v0 v1 v2 ...
pub fn ray() -> OmegaTerm {
    OmegaTerm::Chain {
        base: None,
        segment: Box::new(OmegaTerm::finite(&["v"], &[])),
        glue: vec![(a("V(v)"), a("V(v)"))],
        links: vec![],
    }
}

/// Infinite star: centre c joined to countably many leaves.
pub fn star() -> OmegaTerm {
    OmegaTerm::Omega {
        base: Box::new(OmegaTerm::finite(&["c"], &[])),
        copy: Box::new(OmegaTerm::finite(&["l"], &[])),
        links: vec![(a("V(c)"), a("V(l)"))],
    }
}

/// A ray whose first vertex r is additionally joined to every other ray
/// vertex: r dominates the end.
pub fn domray() -> OmegaTerm {
    OmegaTerm::Chain {
        base: Some(Box::new(OmegaTerm::finite(&["r"], &[]))),
        segment: Box::new(OmegaTerm::finite(&["v"], &[])),
        glue: vec![(a("V(v)"), a("V(v)"))],
        links: vec![(a("V(r)"), a("V(v)"))],
    }
}

/// Comb: spine ray v0 v1 ... with one pendant tooth per spine vertex.
pub fn comb() -> OmegaTerm {
    OmegaTerm::Chain {
        base: None,
        segment: Box::new(OmegaTerm::finite(&["t", "v"], &[("v", "t")])),
        glue: vec![(a("V(v)"), a("V(v)"))],
        links: vec![],
    }
}

/// The infinite ladder: two parallel rays joined by rungs.
pub fn ladder() -> OmegaTerm {
    OmegaTerm::Chain {
        base: None,
        segment: Box::new(OmegaTerm::finite(&["a", "b"], &[("a", "b")])),
        glue: vec![(a("V(a)"), a("V(a)")), (a("V(b)"), a("V(b)"))],
        links: vec![],
    }
}

/// First three levels of the tree all whose vertices have countably
/// infinite degree: root r, children s, grandchildren t.
pub fn t3() -> OmegaTerm {
    OmegaTerm::Omega {
        base: Box::new(OmegaTerm::finite(&["r"], &[])),
        copy: Box::new(OmegaTerm::Omega {
            base: Box::new(OmegaTerm::finite(&["s"], &[])),
            copy: Box::new(OmegaTerm::finite(&["t"], &[])),
            links: vec![(a("V(s)"), a("V(t)"))],
        }),
        links: vec![(a("V(r)"), a("B/V(s)"))],
    }
}

/// Infinite star of rays: centre c with countably many disjoint rays.
pub fn star_of_rays() -> OmegaTerm {
    OmegaTerm::Omega {
        base: Box::new(OmegaTerm::finite(&["c"], &[])),
        copy: Box::new(ray()),
        links: vec![(a("V(c)"), a("S(0)/V(v)"))],
    }
}

/// Subdivided infinite star: centre c, each edge to a leaf subdivided once.
pub fn spider() -> OmegaTerm {
    OmegaTerm::Omega {
        base: Box::new(OmegaTerm::finite(&["c"], &[])),
        copy: Box::new(OmegaTerm::finite(&["l", "m"], &[("m", "l")])),
        links: vec![(a("V(c)"), a("V(m)"))],
    }
}

/// The countably infinite complete graph.
pub fn komega() -> OmegaTerm {
    OmegaTerm::KOmega
}

/// A finite path on three vertices.
pub fn p3() -> OmegaTerm {
    OmegaTerm::finite(&["a", "b", "c"], &[("a", "b"), ("b", "c")])
}

pub fn all(t: &OmegaTerm) -> UPattern {
    t.all_vertices()
}

pub fn star_leaves() -> UPattern {
    "C(*)/V(l)".parse().unwrap()
}

pub fn comb_teeth() -> UPattern {
    "S(*)/V(t)".parse().unwrap()
}

pub fn spider_leaves() -> UPattern {
    "C(*)/V(l)".parse().unwrap()
}

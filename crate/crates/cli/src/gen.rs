//! Random valid connected terms for the property suites. The generator
//! stays inside the class the builders support: small finite leaves, one
//! or two self-glue lanes per chain, no index vars shared across pattern
//! positions.

use rand::Rng;
use sct_core::term_graphs::{Card, OmegaTerm, UPattern, VertexAddr};

const LABELS: [&str; 3] = ["a", "b", "c"];

fn random_finite(rng: &mut impl Rng) -> OmegaTerm {
    let n = rng.gen_range(1..=3);
    let vertices: Vec<&str> = LABELS[..n].to_vec();
    let mut edges = Vec::new();
    // A random spanning path keeps the leaf connected.
    for i in 1..n {
        edges.push((LABELS[i - 1], LABELS[i]));
    }
    if n == 3 && rng.gen_bool(0.3) {
        edges.push((LABELS[0], LABELS[2]));
    }
    OmegaTerm::finite(&vertices, &edges)
}

fn random_vertex(rng: &mut impl Rng, t: &OmegaTerm) -> VertexAddr {
    let pool = t.enumerate(&t.all_vertices(), 8);
    let i = rng.gen_range(0..pool.len());
    pool[i].clone()
}

fn random_term(rng: &mut impl Rng, depth: u32) -> OmegaTerm {
    if depth == 0 {
        return if rng.gen_bool(0.15) { OmegaTerm::KOmega } else { random_finite(rng) };
    }
    match rng.gen_range(0..10) {
        0..=2 => random_finite(rng),
        3 => OmegaTerm::KOmega,
        4..=6 => {
            let base = random_term(rng, depth - 1);
            let copy = random_term(rng, depth - 1);
            let links = (0..rng.gen_range(1..=2))
                .map(|_| (random_vertex(rng, &base), random_vertex(rng, &copy)))
                .collect();
            OmegaTerm::Omega { base: Box::new(base), copy: Box::new(copy), links }
        }
        _ => {
            let has_base = rng.gen_bool(0.5);
            let base = has_base.then(|| Box::new(random_term(rng, depth - 1)));
            let segment = random_term(rng, depth - 1);
            // Self-glue lanes keep the strip in the supported class.
            let lanes = rng.gen_range(1..=2);
            let mut glue = Vec::new();
            for _ in 0..lanes {
                let v = random_vertex(rng, &segment);
                let pair = (v.clone(), v);
                if !glue.contains(&pair) {
                    glue.push(pair);
                }
            }
            let links = match &base {
                Some(b) => (0..rng.gen_range(1..=2))
                    .map(|_| (random_vertex(rng, b), random_vertex(rng, &segment)))
                    .collect(),
                None => Vec::new(),
            };
            OmegaTerm::Chain { base, segment: Box::new(segment), glue, links }
        }
    }
}

/// A random valid connected term of nesting depth at most `max_depth`.
pub fn random_connected_term(rng: &mut impl Rng, max_depth: u32) -> OmegaTerm {
    loop {
        let t = random_term(rng, max_depth);
        if t.validate().is_err() {
            continue;
        }
        if let Ok(true) = sct_core::boundary::is_connected(&t) {
            // The analysis layer needs the truncation cross-check to hold.
            if let Ok(comps) = sct_core::separations::Components::analyze(&t, &UPattern::default())
            {
                if (2..=5).all(|n| comps.check_against_truncation(&t, n).is_ok()) {
                    return t;
                }
            }
        }
    }
}

/// A random U: the full vertex set, or a nonempty subset of its patterns,
/// occasionally with one pattern pinned to a concrete index.
pub fn random_u(rng: &mut impl Rng, t: &OmegaTerm) -> UPattern {
    let all = t.all_vertices();
    if rng.gen_bool(0.4) {
        return all;
    }
    let mut pats = Vec::new();
    for p in &all.0 {
        if rng.gen_bool(0.6) {
            pats.push(p.clone());
        }
    }
    if pats.is_empty() {
        pats.push(all.0[rng.gen_range(0..all.0.len())].clone());
    }
    UPattern(pats)
}

/// A random infinite U (retries until the census is infinite).
pub fn random_infinite_u(rng: &mut impl Rng, t: &OmegaTerm) -> UPattern {
    for _ in 0..20 {
        let u = random_u(rng, t);
        if t.census(&u) == Ok(Card::Infinite) {
            return u;
        }
    }
    t.all_vertices()
}

//! Vertex addresses and address patterns.
//!
//! A vertex of a term graph is named by the path from the term root to a
//! `Finite` leaf label (or a `KOmega` index): `B` descends into a base,
//! `C(i)` into copy `i`, `S(i)` into segment `i`, `V(x)` names a leaf
//! vertex and `K(i)` the `i`-th vertex of `KOmega`. Patterns replace
//! concrete indices by `*` (all indices) or a bound name with an optional
//! offset such as `i` or `i+1`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use super::TermError;

/// One step of a concrete vertex address.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    /// Descend into the base of an `Omega` or `Chain`.
    Base,
    /// Descend into copy `i` of an `Omega`.
    Copy(u32),
    /// Descend into segment `i` of a `Chain`.
    Seg(u32),
    /// The `i`-th vertex of `KOmega`.
    K(u32),
    /// A vertex label inside a `Finite` leaf.
    Leaf(String),
}

/// A concrete vertex address: a sequence of steps ending in `V(..)` or `K(..)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VertexAddr(pub Vec<Step>);

impl VertexAddr {
    pub fn leaf(label: &str) -> Self {
        VertexAddr(vec![Step::Leaf(label.to_string())])
    }

    pub fn k(i: u32) -> Self {
        VertexAddr(vec![Step::K(i)])
    }

    /// Prefix this address with one step (descending from a parent term).
    pub fn prefixed(&self, step: Step) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(step);
        v.extend(self.0.iter().cloned());
        VertexAddr(v)
    }

    /// Strip a leading step, if it matches.
    pub fn strip(&self, step: &Step) -> Option<VertexAddr> {
        match self.0.first() {
            Some(s) if s == step => Some(VertexAddr(self.0[1..].to_vec())),
            _ => None,
        }
    }

    pub fn first(&self) -> Option<&Step> {
        self.0.first()
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Base => write!(f, "B"),
            Step::Copy(i) => write!(f, "C({i})"),
            Step::Seg(i) => write!(f, "S({i})"),
            Step::K(i) => write!(f, "K({i})"),
            Step::Leaf(l) => write!(f, "V({l})"),
        }
    }
}

impl fmt::Display for VertexAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, s) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, "/")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Index position of a pattern step: concrete, wildcard, a bound name
/// with a non-negative offset (`i`, `i+1`, ...), or a strided bound name
/// (`2i`, `2i+1`, ...) used by tree schemes with periodic structure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdxPat {
    Concrete(u32),
    Star,
    Bound { var: String, offset: u32 },
    Strided { var: String, scale: u32, offset: u32 },
}

impl IdxPat {
    pub fn bound(var: &str) -> Self {
        IdxPat::Bound { var: var.to_string(), offset: 0 }
    }

    pub fn strided(var: &str, scale: u32, offset: u32) -> Self {
        assert!(scale >= 1);
        IdxPat::Strided { var: var.to_string(), scale, offset }
    }

    /// Does this index pattern match a concrete index, under (or extending)
    /// the given binding environment?
    fn matches(&self, i: u32, env: &mut Vec<(String, u32)>) -> bool {
        let bind = |var: &str, val: u32, env: &mut Vec<(String, u32)>| {
            if let Some((_, bound)) = env.iter().find(|(v, _)| v == var) {
                *bound == val
            } else {
                env.push((var.to_string(), val));
                true
            }
        };
        match self {
            IdxPat::Concrete(c) => *c == i,
            IdxPat::Star => true,
            IdxPat::Bound { var, offset } => i >= *offset && bind(var, i - offset, env),
            IdxPat::Strided { var, scale, offset } => {
                i >= *offset && (i - offset) % scale == 0 && bind(var, (i - offset) / scale, env)
            }
        }
    }

    fn instantiate(&self, env: &[(String, u32)]) -> Option<u32> {
        match self {
            IdxPat::Concrete(c) => Some(*c),
            IdxPat::Star => None,
            IdxPat::Bound { var, offset } => {
                env.iter().find(|(v, _)| v == var).map(|(_, val)| val + offset)
            }
            IdxPat::Strided { var, scale, offset } => env
                .iter()
                .find(|(v, _)| v == var)
                .map(|(_, val)| val * scale + offset),
        }
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self, IdxPat::Concrete(_))
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            IdxPat::Bound { var, .. } | IdxPat::Strided { var, .. } => Some(var),
            _ => None,
        }
    }
}

/// One step of an address pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepPat {
    Base,
    Copy(IdxPat),
    Seg(IdxPat),
    K(IdxPat),
    Leaf(String),
}

impl StepPat {
    pub fn from_step(s: &Step) -> StepPat {
        match s {
            Step::Base => StepPat::Base,
            Step::Copy(i) => StepPat::Copy(IdxPat::Concrete(*i)),
            Step::Seg(i) => StepPat::Seg(IdxPat::Concrete(*i)),
            Step::K(i) => StepPat::K(IdxPat::Concrete(*i)),
            Step::Leaf(l) => StepPat::Leaf(l.clone()),
        }
    }

    pub fn idx(&self) -> Option<&IdxPat> {
        match self {
            StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) => Some(i),
            _ => None,
        }
    }

    fn idx_mut(&mut self) -> Option<&mut IdxPat> {
        match self {
            StepPat::Copy(i) | StepPat::Seg(i) | StepPat::K(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for StepPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = |f: &mut fmt::Formatter<'_>, tag: &str, i: &IdxPat| match i {
            IdxPat::Concrete(c) => write!(f, "{tag}({c})"),
            IdxPat::Star => write!(f, "{tag}(*)"),
            IdxPat::Bound { var, offset } if *offset == 0 => write!(f, "{tag}({var})"),
            IdxPat::Bound { var, offset } => write!(f, "{tag}({var}+{offset})"),
            IdxPat::Strided { var, scale, offset } if *offset == 0 => {
                write!(f, "{tag}({scale}{var})")
            }
            IdxPat::Strided { var, scale, offset } => write!(f, "{tag}({scale}{var}+{offset})"),
        };
        match self {
            StepPat::Base => write!(f, "B"),
            StepPat::Copy(i) => idx(f, "C", i),
            StepPat::Seg(i) => idx(f, "S", i),
            StepPat::K(i) => idx(f, "K", i),
            StepPat::Leaf(l) => write!(f, "V({l})"),
        }
    }
}

/// A pattern describing a vertex (or a uniform family of vertices).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AddrPattern(pub Vec<StepPat>);

impl AddrPattern {
    pub fn from_addr(a: &VertexAddr) -> Self {
        AddrPattern(a.0.iter().map(StepPat::from_step).collect())
    }

    /// True if no step carries a wildcard or bound index.
    pub fn is_concrete(&self) -> bool {
        self.0.iter().all(|s| s.idx().map_or(true, IdxPat::is_concrete))
    }

    pub fn to_addr(&self) -> Option<VertexAddr> {
        self.instantiate(&[])
    }

    /// Match a concrete address; on success return the binding environment
    /// (bound vars in order of first occurrence). `Star` positions bind
    /// nothing and are reported as raw indices via `star_indices`.
    pub fn matches(&self, a: &VertexAddr) -> Option<Vec<(String, u32)>> {
        if self.0.len() != a.0.len() {
            return None;
        }
        let mut env = Vec::new();
        for (p, s) in self.0.iter().zip(a.0.iter()) {
            let ok = match (p, s) {
                (StepPat::Base, Step::Base) => true,
                (StepPat::Copy(ip), Step::Copy(i)) => ip.matches(*i, &mut env),
                (StepPat::Seg(ip), Step::Seg(i)) => ip.matches(*i, &mut env),
                (StepPat::K(ip), Step::K(i)) => ip.matches(*i, &mut env),
                (StepPat::Leaf(lp), Step::Leaf(l)) => lp == l,
                _ => false,
            };
            if !ok {
                return None;
            }
        }
        Some(env)
    }

    /// Instantiate all bound vars from `env`; fails if a `Star` remains.
    pub fn instantiate(&self, env: &[(String, u32)]) -> Option<VertexAddr> {
        let mut steps = Vec::with_capacity(self.0.len());
        for p in &self.0 {
            steps.push(match p {
                StepPat::Base => Step::Base,
                StepPat::Leaf(l) => Step::Leaf(l.clone()),
                StepPat::Copy(ip) => Step::Copy(ip.instantiate(env)?),
                StepPat::Seg(ip) => Step::Seg(ip.instantiate(env)?),
                StepPat::K(ip) => Step::K(ip.instantiate(env)?),
            });
        }
        Some(VertexAddr(steps))
    }

    /// Replace every `Star` and bound index by values drawn in order from
    /// `indices` (used by enumerators and truncation instantiation).
    pub fn instantiate_positional(&self, indices: &[u32]) -> Option<VertexAddr> {
        let mut it = indices.iter();
        let mut env: Vec<(String, u32)> = Vec::new();
        let mut steps = Vec::with_capacity(self.0.len());
        for p in &self.0 {
            let step = match p {
                StepPat::Base => Step::Base,
                StepPat::Leaf(l) => Step::Leaf(l.clone()),
                StepPat::Copy(ip) | StepPat::Seg(ip) | StepPat::K(ip) => {
                    let i = match ip {
                        IdxPat::Concrete(c) => *c,
                        IdxPat::Star => *it.next()?,
                        IdxPat::Bound { var, offset } => {
                            if let Some((_, v)) = env.iter().find(|(v, _)| v == var) {
                                v + offset
                            } else {
                                let v = *it.next()?;
                                env.push((var.clone(), v));
                                v + offset
                            }
                        }
                        IdxPat::Strided { var, scale, offset } => {
                            if let Some((_, v)) = env.iter().find(|(v, _)| v == var) {
                                v * scale + offset
                            } else {
                                let v = *it.next()?;
                                env.push((var.clone(), v));
                                v * scale + offset
                            }
                        }
                    };
                    match p {
                        StepPat::Copy(_) => Step::Copy(i),
                        StepPat::Seg(_) => Step::Seg(i),
                        _ => Step::K(i),
                    }
                }
            };
            steps.push(step);
        }
        if it.next().is_some() {
            return None;
        }
        Some(VertexAddr(steps))
    }

    /// Number of free index positions (`Star`s plus distinct bound vars).
    pub fn free_positions(&self) -> usize {
        let mut vars: Vec<&String> = Vec::new();
        let mut stars = 0usize;
        for p in &self.0 {
            match p.idx() {
                Some(IdxPat::Star) => stars += 1,
                Some(IdxPat::Bound { var, .. }) | Some(IdxPat::Strided { var, .. }) => {
                    if !vars.contains(&var) {
                        vars.push(var);
                    }
                }
                _ => {}
            }
        }
        stars + vars.len()
    }

    /// Prefix with a pattern step.
    pub fn prefixed(&self, step: StepPat) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(step);
        v.extend(self.0.iter().cloned());
        AddrPattern(v)
    }

    pub fn strip_first(&self) -> AddrPattern {
        AddrPattern(self.0[1..].to_vec())
    }

    /// Rename every free index position to fresh sequential vars `i0, i1, ..`
    /// keeping shared bound vars shared. Normalises patterns for comparison.
    pub fn normalized(&self) -> AddrPattern {
        let mut map: Vec<(String, String)> = Vec::new();
        let mut stars = 0usize;
        let mut out = self.clone();
        for p in out.0.iter_mut() {
            if let Some(ip) = p.idx_mut() {
                match ip {
                    IdxPat::Star => {
                        *ip = IdxPat::Bound { var: format!("_s{stars}"), offset: 0 };
                        stars += 1;
                    }
                    IdxPat::Bound { var, offset } => {
                        let nv = if let Some((_, n)) = map.iter().find(|(o, _)| o == var) {
                            n.clone()
                        } else {
                            let n = format!("_b{}", map.len());
                            map.push((var.clone(), n.clone()));
                            n
                        };
                        *ip = IdxPat::Bound { var: nv, offset: *offset };
                    }
                    IdxPat::Strided { var, scale, offset } => {
                        let nv = if let Some((_, n)) = map.iter().find(|(o, _)| o == var) {
                            n.clone()
                        } else {
                            let n = format!("_b{}", map.len());
                            map.push((var.clone(), n.clone()));
                            n
                        };
                        *ip = IdxPat::Strided { var: nv, scale: *scale, offset: *offset };
                    }
                    IdxPat::Concrete(_) => {}
                }
            }
        }
        out
    }
}

impl fmt::Display for AddrPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, s) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, "/")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A finite set of address patterns, read as the union of their matches.
#[derive(Debug, Clone, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct UPattern(pub Vec<AddrPattern>);

impl UPattern {
    pub fn single(p: AddrPattern) -> Self {
        UPattern(vec![p])
    }

    pub fn from_addrs<'a>(addrs: impl IntoIterator<Item = &'a VertexAddr>) -> Self {
        UPattern(addrs.into_iter().map(AddrPattern::from_addr).collect())
    }

    pub fn contains(&self, a: &VertexAddr) -> bool {
        self.0.iter().any(|p| p.matches(a).is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for UPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, p) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing. Addresses: "B/C(3)/V(x)"; patterns: "C(*)/V(l)", "S(i+1)/V(v)".
// ---------------------------------------------------------------------------

fn parse_step_pat(tok: &str) -> Result<StepPat, TermError> {
    let bad = || TermError::AddrSyntax(tok.to_string());
    if tok == "B" {
        return Ok(StepPat::Base);
    }
    let (head, rest) = tok.split_at(1);
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(bad)?;
    if inner.is_empty() {
        return Err(bad());
    }
    match head {
        "V" => Ok(StepPat::Leaf(inner.to_string())),
        "C" | "S" | "K" => {
            let ip = parse_idx(inner).ok_or_else(bad)?;
            Ok(match head {
                "C" => StepPat::Copy(ip),
                "S" => StepPat::Seg(ip),
                _ => StepPat::K(ip),
            })
        }
        _ => Err(bad()),
    }
}

fn parse_idx(s: &str) -> Option<IdxPat> {
    if s == "*" {
        return Some(IdxPat::Star);
    }
    if let Ok(n) = s.parse::<u32>() {
        return Some(IdxPat::Concrete(n));
    }
    let (head, offset) = match s.split_once('+') {
        Some((v, o)) => (v, o.parse::<u32>().ok()?),
        None => (s, 0),
    };
    // Optional leading scale digits: "2i", "3j+1".
    let split = head.find(|c: char| !c.is_ascii_digit()).unwrap_or(head.len());
    let (scale_str, var) = head.split_at(split);
    if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphabetic() || c == '_') {
        return None;
    }
    if scale_str.is_empty() {
        Some(IdxPat::Bound { var: var.to_string(), offset })
    } else {
        let scale = scale_str.parse::<u32>().ok()?;
        if scale == 0 {
            return None;
        }
        Some(IdxPat::Strided { var: var.to_string(), scale, offset })
    }
}

impl FromStr for StepPat {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, TermError> {
        parse_step_pat(s)
    }
}

impl FromStr for AddrPattern {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, TermError> {
        let steps = s
            .split('/')
            .map(parse_step_pat)
            .collect::<Result<Vec<_>, _>>()?;
        if steps.is_empty() {
            return Err(TermError::AddrSyntax(s.to_string()));
        }
        Ok(AddrPattern(steps))
    }
}

impl FromStr for VertexAddr {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, TermError> {
        let pat: AddrPattern = s.parse()?;
        pat.to_addr().ok_or_else(|| TermError::AddrSyntax(s.to_string()))
    }
}

impl FromStr for UPattern {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, TermError> {
        let pats = s
            .split(';')
            .map(|p| p.trim().parse::<AddrPattern>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(UPattern(pats))
    }
}

/// Result of intersecting two address patterns: a consistent assignment
/// scheme for their index variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatMeet {
    /// Bindings for the left pattern's vars that are forced by the meet.
    pub left_fixed: Vec<(String, u32)>,
    /// Left vars that remain free (the meet has one solution per value).
    pub left_free: Vec<String>,
    /// Affine relations `left_var = right_var + delta` induced by the meet.
    pub links: Vec<(String, String, i64)>,
    /// True if any index position stays unconstrained (star-star etc.),
    /// i.e. the meet is infinite even ignoring the left pattern's vars.
    pub unbounded: bool,
}

impl AddrPattern {
    /// Intersect two patterns over the same term position. Returns `None`
    /// when no common instance exists. Variables of `self` and `other` are
    /// treated as disjoint namespaces; shared-name coincidences are not
    /// identified.
    pub fn meet(&self, other: &AddrPattern) -> Option<PatMeet> {
        if self.0.len() != other.0.len() {
            return None;
        }
        // var id spaces: left vars 0.., right vars offset by left count.
        let mut lvars: Vec<String> = Vec::new();
        let mut rvars: Vec<String> = Vec::new();
        for p in &self.0 {
            if let Some(IdxPat::Bound { var, .. }) = p.idx() {
                if !lvars.contains(var) {
                    lvars.push(var.clone());
                }
            }
        }
        for p in &other.0 {
            if let Some(IdxPat::Bound { var, .. }) = p.idx() {
                if !rvars.contains(var) {
                    rvars.push(var.clone());
                }
            }
        }
        let mut uf = OffsetUf::new(lvars.len() + rvars.len());
        let lid = |v: &str| lvars.iter().position(|x| x == v).unwrap();
        let rid = |v: &str| lvars.len() + rvars.iter().position(|x| x == v).unwrap();
        let mut unbounded = false;
        for (sp, sq) in self.0.iter().zip(other.0.iter()) {
            if let (StepPat::Leaf(a), StepPat::Leaf(b)) = (sp, sq) {
                if a != b {
                    return None;
                }
                continue;
            }
            let shape_ok = matches!(
                (sp, sq),
                (StepPat::Base, StepPat::Base)
                    | (StepPat::Copy(_), StepPat::Copy(_))
                    | (StepPat::Seg(_), StepPat::Seg(_))
                    | (StepPat::K(_), StepPat::K(_))
            );
            match (sp.idx(), sq.idx()) {
                (None, None) if matches!((sp, sq), (StepPat::Base, StepPat::Base)) => {}
                (Some(ip), Some(iq)) if shape_ok => match (ip, iq) {
                    (IdxPat::Concrete(a), IdxPat::Concrete(b)) => {
                        if a != b {
                            return None;
                        }
                    }
                    (IdxPat::Concrete(_), IdxPat::Star) | (IdxPat::Star, IdxPat::Concrete(_)) => {}
                    (IdxPat::Star, IdxPat::Star) => unbounded = true,
                    (IdxPat::Concrete(a), IdxPat::Bound { var, offset }) => {
                        if *a < *offset || !uf.fix(rid(var), (*a - *offset) as i64) {
                            return None;
                        }
                    }
                    (IdxPat::Bound { var, offset }, IdxPat::Concrete(b)) => {
                        if *b < *offset || !uf.fix(lid(var), (*b - *offset) as i64) {
                            return None;
                        }
                    }
                    (IdxPat::Bound { .. }, IdxPat::Star) | (IdxPat::Star, IdxPat::Bound { .. }) => {}
                    (
                        IdxPat::Bound { var: u, offset: o1 },
                        IdxPat::Bound { var: v, offset: o2 },
                    ) => {
                        if !uf.unify(lid(u), *o1 as i64, rid(v), *o2 as i64) {
                            return None;
                        }
                    }
                    // Strided positions only ever meet concrete or star
                    // positions in this artifact (tree-scheme patterns are
                    // stripped before deeper meets); anything else has no
                    // common instance we can describe, so report none.
                    (IdxPat::Strided { var, scale, offset }, IdxPat::Concrete(b))
                    | (IdxPat::Concrete(b), IdxPat::Strided { var, scale, offset }) => {
                        if *b < *offset || (*b - *offset) % *scale != 0 {
                            return None;
                        }
                        let val = ((*b - *offset) / *scale) as i64;
                        let id = if matches!(sp.idx(), Some(IdxPat::Strided { .. })) {
                            lid(var)
                        } else {
                            rid(var)
                        };
                        if !uf.fix(id, val) {
                            return None;
                        }
                    }
                    (IdxPat::Strided { .. }, IdxPat::Star)
                    | (IdxPat::Star, IdxPat::Strided { .. }) => {}
                    (IdxPat::Strided { .. }, _) | (_, IdxPat::Strided { .. }) => return None,
                },
                _ => return None,
            }
        }
        // Read off left-var assignments, checking non-negativity.
        let mut left_fixed = Vec::new();
        let mut left_free = Vec::new();
        let mut links = Vec::new();
        for (i, v) in lvars.iter().enumerate() {
            match uf.value(i) {
                Some(val) => {
                    if val < 0 {
                        return None;
                    }
                    left_fixed.push((v.clone(), val as u32));
                }
                None => {
                    left_free.push(v.clone());
                    // Relate to a right var sharing the same class, if any.
                    let (rl, pl) = uf.find(i);
                    for (j, rv) in rvars.iter().enumerate() {
                        let (rr, pr) = uf.find(lvars.len() + j);
                        if rr == rl {
                            links.push((v.clone(), rv.clone(), pl - pr));
                            break;
                        }
                    }
                }
            }
        }
        Some(PatMeet { left_fixed, left_free, links, unbounded })
    }
}

/// Union-find over index variables with additive offsets and optional
/// fixed values: maintains equations `value(a) + da == value(b) + db`.
struct OffsetUf {
    parent: Vec<usize>,
    pot: Vec<i64>,
    fixed: Vec<Option<i64>>,
}

impl OffsetUf {
    fn new(n: usize) -> Self {
        OffsetUf { parent: (0..n).collect(), pot: vec![0; n], fixed: vec![None; n] }
    }

    fn find(&mut self, x: usize) -> (usize, i64) {
        if self.parent[x] == x {
            return (x, 0);
        }
        let (r, p) = self.find(self.parent[x]);
        self.parent[x] = r;
        self.pot[x] += p;
        (r, self.pot[x])
    }

    /// Record `value(a) + da == value(b) + db`; false on contradiction.
    fn unify(&mut self, a: usize, da: i64, b: usize, db: i64) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa + da == pb + db;
        }
        self.parent[ra] = rb;
        self.pot[ra] = pb + db - pa - da;
        match (self.fixed[ra].take(), self.fixed[rb]) {
            (Some(v), None) => self.fixed[rb] = Some(v - self.pot[ra]),
            (Some(v), Some(w)) => {
                if v - self.pot[ra] != w {
                    return false;
                }
            }
            _ => {}
        }
        true
    }

    /// Record `value(x) == val`; false on contradiction.
    fn fix(&mut self, x: usize, val: i64) -> bool {
        let (r, p) = self.find(x);
        match self.fixed[r] {
            None => {
                self.fixed[r] = Some(val - p);
                true
            }
            Some(w) => w == val - p,
        }
    }

    fn value(&mut self, x: usize) -> Option<i64> {
        let (r, p) = self.find(x);
        self.fixed[r].map(|v| v + p)
    }
}

// Addresses and patterns serialize as their string syntax.
macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(D::Error::custom)
            }
        }
    };
}
string_serde!(VertexAddr);
string_serde!(AddrPattern);
string_serde!(UPattern);
string_serde!(StepPat);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_addr_strings() {
        for s in ["B/C(3)/V(x)", "S(5)/V(v)", "K(0)", "V(a)"] {
            let a: VertexAddr = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
    }

    #[test]
    fn pattern_matching_binds_indices() {
        let p: AddrPattern = "C(i)/C(j)/V(t)".parse().unwrap();
        let a: VertexAddr = "C(4)/C(7)/V(t)".parse().unwrap();
        let env = p.matches(&a).unwrap();
        assert_eq!(env, vec![("i".to_string(), 4), ("j".to_string(), 7)]);
        assert_eq!(p.instantiate(&env).unwrap(), a);
    }

    #[test]
    fn offset_patterns_respect_minimum() {
        let p: AddrPattern = "S(i+1)/V(v)".parse().unwrap();
        assert!(p.matches(&"S(0)/V(v)".parse().unwrap()).is_none());
        let env = p.matches(&"S(3)/V(v)".parse().unwrap()).unwrap();
        assert_eq!(env[0].1, 2);
    }

    #[test]
    fn shared_bound_var_must_agree() {
        let p: AddrPattern = "C(i)/S(i)/V(v)".parse().unwrap();
        assert!(p.matches(&"C(2)/S(2)/V(v)".parse().unwrap()).is_some());
        assert!(p.matches(&"C(2)/S(3)/V(v)".parse().unwrap()).is_none());
    }

    #[test]
    fn meet_binds_and_frees_vars() {
        let fam: AddrPattern = "C(d)/C(e)/V(t)".parse().unwrap();
        // Concrete address fixes both dims.
        let m = fam.meet(&"C(4)/C(7)/V(t)".parse().unwrap()).unwrap();
        assert_eq!(m.left_fixed, vec![("d".into(), 4), ("e".into(), 7)]);
        assert!(m.left_free.is_empty());
        // A star pattern leaves both free.
        let m = fam.meet(&"C(*)/C(*)/V(t)".parse().unwrap()).unwrap();
        assert_eq!(m.left_free.len(), 2);
        // Mismatched leaf: empty meet.
        assert!(fam.meet(&"C(1)/C(1)/V(s)".parse().unwrap()).is_none());
    }

    #[test]
    fn meet_respects_offset_relations() {
        let p: AddrPattern = "S(d)/V(v)".parse().unwrap();
        let q: AddrPattern = "S(i+2)/V(v)".parse().unwrap();
        let m = p.meet(&q).unwrap();
        // d = i + 2 for free i, so d stays free (one solution per i >= 0).
        assert_eq!(m.left_free, vec!["d".to_string()]);
        // Offsets that cannot agree: S(d)/S(d) vs S(0)/S(1).
        let p: AddrPattern = "S(d)/S(d)/V(v)".parse().unwrap();
        assert!(p.meet(&"S(0)/S(1)/V(v)".parse().unwrap()).is_none());
        assert!(p.meet(&"S(3)/S(3)/V(v)".parse().unwrap()).is_some());
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let a: VertexAddr = "B/V(c)".parse().unwrap();
        let b: VertexAddr = "C(0)/V(l)".parse().unwrap();
        let c: VertexAddr = "C(1)/V(l)".parse().unwrap();
        assert!(a < b && b < c);
    }
}

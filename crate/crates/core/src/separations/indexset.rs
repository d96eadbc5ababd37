//! Eventually periodic subsets of the naturals. Component family selectors
//! (cofinite sets, congruence classes, finite exception lists) and their
//! boolean combinations all live in this class, which keeps side
//! descriptions of separations exact.

use crate::term_graphs::Card;
use std::collections::BTreeSet;

/// Membership: for `j < split` given by `explicit`; for `j >= split` by
/// `(j - split) % period ∈ residues`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    split: u32,
    explicit: BTreeSet<u32>,
    period: u32,
    residues: BTreeSet<u32>,
}

impl IndexSet {
    pub fn all() -> Self {
        IndexSet { split: 0, explicit: BTreeSet::new(), period: 1, residues: BTreeSet::from([0]) }
    }

    pub fn empty() -> Self {
        IndexSet { split: 0, explicit: BTreeSet::new(), period: 1, residues: BTreeSet::new() }
    }

    pub fn finite(vals: impl IntoIterator<Item = u32>) -> Self {
        let explicit: BTreeSet<u32> = vals.into_iter().collect();
        let split = explicit.iter().max().map_or(0, |m| m + 1);
        IndexSet { split, explicit, period: 1, residues: BTreeSet::new() }
    }

    pub fn cofinite(excluded: impl IntoIterator<Item = u32>) -> Self {
        Self::finite(excluded).complement()
    }

    pub fn congruence(modulus: u32, residue: u32) -> Self {
        assert!(modulus >= 1 && residue < modulus);
        IndexSet {
            split: 0,
            explicit: BTreeSet::new(),
            period: modulus,
            residues: BTreeSet::from([residue]),
        }
    }

    /// All indices >= min.
    pub fn from_min(min: u32) -> Self {
        IndexSet {
            split: min,
            explicit: BTreeSet::new(),
            period: 1,
            residues: BTreeSet::from([0]),
        }
    }

    pub fn contains(&self, j: u32) -> bool {
        if j < self.split {
            self.explicit.contains(&j)
        } else {
            self.residues.contains(&((j - self.split) % self.period))
        }
    }

    fn realign(&self, split: u32, period: u32) -> IndexSet {
        assert!(split >= self.split && period % self.period == 0);
        let mut explicit = BTreeSet::new();
        for j in 0..split {
            if self.contains(j) {
                explicit.insert(j);
            }
        }
        let mut residues = BTreeSet::new();
        for r in 0..period {
            if self.contains(split + r) {
                residues.insert(r);
            }
        }
        IndexSet { split, explicit, period, residues }
    }

    fn aligned(a: &IndexSet, b: &IndexSet) -> (IndexSet, IndexSet) {
        let split = a.split.max(b.split);
        let period = lcm(a.period, b.period);
        (a.realign(split, period), b.realign(split, period))
    }

    pub fn complement(&self) -> IndexSet {
        let explicit: BTreeSet<u32> = (0..self.split).filter(|j| !self.explicit.contains(j)).collect();
        let residues: BTreeSet<u32> = (0..self.period).filter(|r| !self.residues.contains(r)).collect();
        IndexSet { split: self.split, explicit, period: self.period, residues }
    }

    pub fn intersect(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = Self::aligned(self, other);
        IndexSet {
            split: a.split,
            explicit: a.explicit.intersection(&b.explicit).copied().collect(),
            period: a.period,
            residues: a.residues.intersection(&b.residues).copied().collect(),
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = Self::aligned(self, other);
        IndexSet {
            split: a.split,
            explicit: a.explicit.union(&b.explicit).copied().collect(),
            period: a.period,
            residues: a.residues.union(&b.residues).copied().collect(),
        }
    }

    /// The set `{ j : j - delta ∈ self }` (for delta possibly negative).
    pub fn shifted(&self, delta: i64) -> IndexSet {
        if delta >= 0 {
            let d = delta as u32;
            IndexSet {
                split: self.split + d,
                explicit: self.explicit.iter().map(|j| j + d).collect(),
                period: self.period,
                residues: self.residues.clone(),
            }
        } else {
            let d = (-delta) as u32;
            if d <= self.split {
                let split = self.split - d;
                IndexSet {
                    split,
                    explicit: self
                        .explicit
                        .iter()
                        .filter(|&&j| j >= d)
                        .map(|j| j - d)
                        .collect(),
                    period: self.period,
                    residues: self.residues.clone(),
                }
            } else {
                let roll = (d - self.split) % self.period;
                let residues = self
                    .residues
                    .iter()
                    .map(|r| (r + self.period - roll) % self.period)
                    .collect();
                IndexSet { split: 0, explicit: BTreeSet::new(), period: self.period, residues }
            }
        }
    }

    pub fn card(&self) -> Card {
        if self.residues.is_empty() {
            Card::Finite(self.explicit.len())
        } else {
            Card::Infinite
        }
    }

    pub fn is_empty(&self) -> bool {
        self.explicit.is_empty() && self.residues.is_empty()
    }

    pub fn is_infinite(&self) -> bool {
        !self.residues.is_empty()
    }

    /// Smallest member, if any.
    pub fn min(&self) -> Option<u32> {
        if let Some(&m) = self.explicit.iter().next() {
            return Some(m);
        }
        self.residues.iter().next().map(|r| self.split + r)
    }

    pub fn iter_up_to(&self, n: u32) -> impl Iterator<Item = u32> + '_ {
        (0..n).filter(|&j| self.contains(j))
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / gcd(a, b) * b
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolean_algebra_on_periodic_sets() {
        let even = IndexSet::congruence(2, 0);
        let odd = even.complement();
        assert!(even.contains(4) && !even.contains(5));
        assert!(odd.contains(5));
        assert!(even.intersect(&odd).is_empty());
        assert_eq!(even.union(&odd), IndexSet::all().realign(0, 2));
        let cof = IndexSet::cofinite([0, 2]);
        assert!(!cof.contains(2) && cof.contains(3));
        assert!(cof.intersect(&even).is_infinite());
        assert_eq!(IndexSet::finite([1, 5]).card(), crate::term_graphs::Card::Finite(2));
    }

    #[test]
    fn shifting_respects_membership() {
        let s = IndexSet::congruence(3, 1); // {1, 4, 7, ...}
        let up = s.shifted(2); // {3, 6, 9, ...}
        assert!(up.contains(3) && !up.contains(1));
        let down = s.shifted(-2); // j such that j+2 ∈ s: {2, 5, 8, ...}
        assert!(down.contains(2) && !down.contains(1));
        let fin = IndexSet::finite([0, 3]);
        assert!(fin.shifted(-1).contains(2) && !fin.shifted(-1).contains(0));
    }
}

//! The built-in corpus: the standard example graphs with their expected
//! verdict tables.

use sct_core::boundary::RankValue;
use sct_core::term_graphs::{examples, OmegaTerm, UPattern};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub term: OmegaTerm,
    pub u: UPattern,
    /// Expected verdicts: the comb column drives Theorems 1-5, the star
    /// column Theorems 6-7.
    pub comb: bool,
    pub star: bool,
    pub crit_count: usize,
    pub rank: RankValue,
    pub note: String,
}

pub fn corpus() -> Vec<CorpusCase> {
    let case = |name: &str,
                term: OmegaTerm,
                u: UPattern,
                comb: bool,
                star: bool,
                crit_count: usize,
                rank: RankValue,
                note: &str| CorpusCase {
        name: name.to_string(),
        term,
        u,
        comb,
        star,
        crit_count,
        rank,
        note: note.to_string(),
    };
    vec![
        case(
            "ray",
            examples::ray(),
            examples::all(&examples::ray()),
            true,
            false,
            0,
            RankValue::NoRank,
            "one-way infinite path; a comb onto any infinite subset, no infinite star",
        ),
        case(
            "star",
            examples::star(),
            examples::star_leaves(),
            false,
            true,
            1,
            RankValue::Finite(1),
            "infinite star; the centre is the unique critical vertex set",
        ),
        case(
            "domray",
            examples::domray(),
            examples::all(&examples::domray()),
            true,
            true,
            0,
            RankValue::NoRank,
            "ray with its first vertex joined to all others: an infinite star but no critical vertex set",
        ),
        case(
            "comb",
            examples::comb(),
            examples::comb_teeth(),
            true,
            false,
            0,
            RankValue::NoRank,
            "spine with one tooth per spine vertex; attachment set = the teeth",
        ),
        case(
            "ladder",
            examples::ladder(),
            examples::all(&examples::ladder()),
            true,
            false,
            0,
            RankValue::NoRank,
            "two parallel rays with rungs; a single end",
        ),
        case(
            "t3",
            examples::t3(),
            examples::all(&examples::t3()),
            false,
            true,
            2,
            RankValue::Finite(2),
            "first three levels of the everywhere-infinitely-branching tree; rayless, rank 2",
        ),
        case(
            "star_of_rays",
            examples::star_of_rays(),
            examples::all(&examples::star_of_rays()),
            true,
            true,
            1,
            RankValue::NoRank,
            "infinitely many rays glued at a centre; combs and stars both attach to V",
        ),
        case(
            "komega",
            examples::komega(),
            examples::all(&examples::komega()),
            true,
            true,
            0,
            RankValue::NoRank,
            "the countably infinite complete graph contains both shapes",
        ),
        case(
            "spider",
            examples::spider(),
            examples::spider_leaves(),
            false,
            true,
            1,
            RankValue::Finite(1),
            "subdivided infinite star; rank 1, centre critical",
        ),
        case(
            "p3",
            examples::p3(),
            examples::all(&examples::p3()),
            false,
            false,
            0,
            RankValue::Finite(0),
            "finite path; every finite graph has rank 0 and neither shape",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_has_enough_valid_cases() {
        let cases = corpus();
        assert!(cases.len() >= 8);
        for c in &cases {
            c.term.validate().unwrap_or_else(|e| panic!("{}: {e}", c.name));
            assert!(
                sct_core::boundary::is_connected(&c.term).unwrap(),
                "{} must be connected",
                c.name
            );
        }
    }

    #[test]
    fn corpus_verdicts_are_internally_consistent() {
        // Comb-theorem verdicts share one column, star-theorems the other;
        // NoRank iff comb.
        for c in corpus() {
            assert_eq!(c.rank == RankValue::NoRank, c.comb, "{}", c.name);
        }
    }
}

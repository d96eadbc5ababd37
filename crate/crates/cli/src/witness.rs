//! Witness files: serialized finite evidence for either side of each
//! theorem, re-verifiable from the term and the file alone.

use anyhow::{anyhow, bail, Result};
use sct_core::boundary::{
    self, verify_certificate, verify_rank_tree, Certificate, CritPattern, RankTree,
};
use sct_core::normal_trees::{self, TreeScheme};
use sct_core::term_graphs::{OmegaTerm, UPattern};
use sct_core::tree_decomp::{self, DisplayMode, TDScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub theorem: u8,
    /// "i" for the comb/star side, "ii" for the structure side.
    pub side: String,
    pub u: UPattern,
    pub data: WitnessData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessData {
    Certificate { cert: Certificate },
    NormalTree { scheme: TreeScheme },
    TreeDecomposition { scheme: TDScheme },
    RankTree { rank: u32, tree: RankTree },
    /// Rows (U', X): a critical vertex set with infinitely many
    /// exact-neighbourhood components meeting U'.
    CritTable { rows: Vec<(UPattern, CritPattern)> },
}

/// Re-run the matching verifier with no access to the builder state.
/// Returns the list of checks performed; fails with the first
/// counterexample.
pub fn verify_witness(t: &OmegaTerm, w: &Witness, budget: u32) -> Result<Vec<String>> {
    t.validate()?;
    let mut checks = Vec::new();
    match (&w.data, w.side.as_str()) {
        (WitnessData::Certificate { cert }, "i") => {
            if (cert.k() as u32) < budget {
                bail!("certificate has {} teeth, budget demands {budget}", cert.k());
            }
            verify_certificate(t, &w.u, cert).map_err(|e| anyhow!(e))?;
            let kind_ok = match (w.theorem, cert) {
                (1..=5, Certificate::Comb { .. }) => true,
                (6 | 7, Certificate::Star { .. }) => true,
                _ => false,
            };
            if !kind_ok {
                bail!("certificate kind does not fit theorem {}", w.theorem);
            }
            checks.push(format!("certificate with {} attachments verified", cert.k()));
        }
        (WitnessData::NormalTree { scheme }, "ii") if w.theorem == 1 => {
            let rep = normal_trees::check_normal(t, scheme, budget).map_err(|e| anyhow!(e))?;
            if !rep.normal {
                bail!("tree is not normal: {:?}", rep.counterexample);
            }
            if !scheme.is_structurally_rayless() {
                bail!("tree is not rayless");
            }
            if !normal_trees::contains_u(t, scheme, &w.u, budget) {
                bail!("tree does not contain U");
            }
            if !normal_trees::contains_cofinally(t, scheme, &w.u, budget)
                .map_err(|e| anyhow!(e))?
            {
                bail!("tree does not contain U cofinally");
            }
            checks.push("rayless normal tree containing U cofinally".to_string());
        }
        (WitnessData::NormalTree { scheme }, "ii") if w.theorem == 6 => {
            let rep = normal_trees::check_normal(t, scheme, budget).map_err(|e| anyhow!(e))?;
            if !rep.normal {
                bail!("tree is not normal: {:?}", rep.counterexample);
            }
            if !normal_trees::contains_u(t, scheme, &w.u, budget) {
                bail!("tree does not contain U");
            }
            let rays = normal_trees::normal_rays(t, scheme).map_err(|e| anyhow!(e))?;
            for (e, _) in &rays {
                let ends = boundary::ends(t).map_err(|e| anyhow!(e))?;
                let dominated = ends
                    .iter()
                    .find(|fe| fe.kind == e.kind && fe.prefix.len() == e.prefix.len())
                    .map(|fe| !fe.undominated)
                    .unwrap_or(false);
                if dominated {
                    bail!("a normal ray's end is dominated");
                }
            }
            checks.push(format!(
                "locally finite normal tree, {} normal ray families all undominated",
                rays.len()
            ));
        }
        (WitnessData::TreeDecomposition { scheme }, "ii") if w.theorem == 2 => {
            let rep = tree_decomp::verify_td(t, scheme, budget).map_err(|e| anyhow!(e))?;
            if !rep.pass {
                bail!("decomposition fails: {}", rep.failures.join("; "));
            }
            if !tree_decomp::tree_is_rayless(scheme).map_err(|e| anyhow!(e))? {
                bail!("decomposition tree has a ray");
            }
            if !tree_decomp::parts_meet_u_finitely(scheme, &w.u) {
                bail!("a part meets U infinitely");
            }
            if !tree_decomp::nonleaf_parts_finite(scheme) {
                bail!("an internal part is infinite");
            }
            checks.push("rayless decomposition: parts meet U finitely, internal parts finite".into());
            if rep.separators_connected {
                checks.push("separators connected".into());
            }
        }
        (WitnessData::TreeDecomposition { scheme }, "ii") if w.theorem == 5 => {
            let rep = tree_decomp::verify_td(t, scheme, budget).map_err(|e| anyhow!(e))?;
            if !rep.pass {
                bail!("decomposition fails: {}", rep.failures.join("; "));
            }
            if !tree_decomp::parts_meet_u_finitely(scheme, &w.u) {
                bail!("a part meets U infinitely");
            }
            if !tree_decomp::nonleaf_parts_finite(scheme) {
                bail!("an internal part is infinite");
            }
            let psi = boundary::boundary_gamma(t, &w.u).map_err(|e| anyhow!(e))?;
            let disp =
                tree_decomp::verify_display(t, &scheme.as_stree(true), &psi, DisplayMode::Gamma)
                    .map_err(|e| anyhow!(e))?;
            if !disp.pass {
                bail!("display fails: {}", disp.diagnostics.join("; "));
            }
            if !disp.tame {
                bail!("decomposition is not tame");
            }
            let tr = tree_decomp::tree_rank(scheme).map_err(|e| anyhow!(e))?;
            let (ur, _) = boundary::u_rank(t, &w.u).map_err(|e| anyhow!(e))?;
            if tr != ur {
                bail!("tree rank {tr:?} differs from the U-rank {ur:?}");
            }
            checks.push(format!("tame display of the Gamma boundary; rank {tr:?}"));
        }
        (WitnessData::TreeDecomposition { scheme }, "ii") if w.theorem == 7 => {
            let rep = tree_decomp::verify_td(t, scheme, budget).map_err(|e| anyhow!(e))?;
            if !rep.pass {
                bail!("decomposition fails: {}", rep.failures.join("; "));
            }
            if !tree_decomp::tree_is_locally_finite(scheme) {
                bail!("decomposition tree is not locally finite");
            }
            if !rep.separators_finite || !rep.separators_pairwise_disjoint {
                bail!("separators are not finite and pairwise disjoint");
            }
            if !tree_decomp::parts_meet_u_finitely(scheme, &w.u) {
                bail!("a part meets U infinitely");
            }
            checks.push("locally finite decomposition with disjoint finite separators".into());
            if rep.separators_connected {
                checks.push("separators connected".into());
            }
        }
        (WitnessData::RankTree { rank, tree }, "ii") if w.theorem == 4 => {
            let got = verify_rank_tree(t, &w.u, tree, budget).map_err(|e| anyhow!(e))?;
            if got != *rank {
                bail!("rank tree encodes {got}, file claims {rank}");
            }
            checks.push(format!("rank recursion tree replayed: U-rank {rank}"));
        }
        (WitnessData::CritTable { rows }, "ii") if w.theorem == 3 => {
            let all_crit = boundary::critical_sets(t).map_err(|e| anyhow!(e))?;
            for (u_sub, x) in rows {
                let known = all_crit.iter().any(|c| {
                    let a: std::collections::BTreeSet<String> =
                        c.members.iter().map(|p| p.normalized().to_string()).collect();
                    let b: std::collections::BTreeSet<String> =
                        x.members.iter().map(|p| p.normalized().to_string()).collect();
                    a == b
                });
                if !known {
                    bail!("table names a non-critical set {x:?}");
                }
                if boundary::crit_in_closure(t, x, u_sub)
                    .map_err(|e| anyhow!(e))?
                    .is_none()
                {
                    bail!("critical set {x:?} does not lie in the closure of {u_sub}");
                }
            }
            checks.push(format!("{} sampled subsets covered by critical sets", rows.len()));
        }
        _ => bail!(
            "witness kind does not match theorem {} side {}",
            w.theorem,
            w.side
        ),
    }
    Ok(checks)
}

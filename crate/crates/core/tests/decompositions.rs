//! Integration tests for the decomposition constructions: the normal-tree
//! decomposition, expansion, squeeze, and the two pipelines.

use sct_core::boundary::{self, RankValue};
use sct_core::normal_trees::build_rayless_normal_tree;
use sct_core::term_graphs::examples::*;
use sct_core::term_graphs::VertexAddr;
use sct_core::tree_decomp::*;

#[test]
fn star_decomposition_from_normal_tree_verifies() {
    let t = star();
    let scheme = build_rayless_normal_tree(&t, &star_leaves())
        .unwrap()
        .expect("tree side");
    let td = td_from_normal_tree(&t, &scheme).unwrap();
    let rep = verify_td(&t, &td, 6).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
    assert!(rep.separators_connected);
}

#[test]
fn t3_decomposition_parts_are_down_closures() {
    let t = t3();
    let scheme = build_rayless_normal_tree(&t, &all(&t)).unwrap().expect("tree side");
    let td = td_from_normal_tree(&t, &scheme).unwrap();
    let rep = verify_td(&t, &td, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
    // Parts are down-closures: sizes at the three levels are 1, 2, 3.
    let root: VertexAddr = td.root.clone();
    let root_part = td.part_at(&root).unwrap();
    assert_eq!(root_part.len(), 1);
    let mut sizes: Vec<usize> = td
        .classes
        .iter()
        .map(|c| c.part.len())
        .collect();
    sizes.sort();
    assert_eq!(sizes, vec![1, 2, 3]);
}

#[test]
fn ray_input_is_rejected_as_not_rayless() {
    // A ray scheme is normal but not rayless: Theorem 2 refuses it.
    let t = ray();
    let scheme = sct_core::normal_trees::TreeScheme {
        root: "S(0)/V(v)".parse().unwrap(),
        rules: vec![sct_core::normal_trees::ParentRule {
            shape: "S(i+1)/V(v)".parse().unwrap(),
            transform: "S(i)/V(v)".parse().unwrap(),
        }],
        members: "S(*)/V(v)".parse().unwrap(),
    };
    assert!(matches!(
        td_from_normal_tree(&t, &scheme),
        Err(TdError::NotRayless)
    ));
}

#[test]
fn expansion_of_star_inserts_the_crit_node() {
    let t = star();
    let scheme = build_rayless_normal_tree(&t, &star_leaves()).unwrap().expect("tree");
    let td = expansion(&t, &scheme).unwrap();
    let rep = verify_td(&t, &td, 6).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
    // One crit node labelled {c}; the leaf family hangs below it.
    let crit_nodes: Vec<_> = td
        .classes
        .iter()
        .filter(|c| matches!(c.label, NodeLabel::CritNode { .. }))
        .collect();
    assert_eq!(crit_nodes.len(), 1);
    let crit_node_pat = crit_nodes[0].node.clone();
    let leaves_below: Vec<_> = td
        .classes
        .iter()
        .filter(|c| c.parent.as_ref() == Some(&crit_node_pat))
        .collect();
    assert!(!leaves_below.is_empty(), "leaf family re-hung below the crit node");
    // alpha(c, X) = ({c}, cofinite family): separator of the crit node is {c}.
    assert_eq!(crit_nodes[0].separator.len(), 1);
    assert_eq!(crit_nodes[0].separator[0].to_string(), "B/V(c)");
}

#[test]
fn expansion_of_t3_has_crit_nodes_per_level() {
    let t = t3();
    let scheme = build_rayless_normal_tree(&t, &all(&t)).unwrap().expect("tree");
    let td = expansion(&t, &scheme).unwrap();
    let rep = verify_td(&t, &td, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
    let crit_nodes: Vec<_> = td
        .classes
        .iter()
        .filter(|c| matches!(c.label, NodeLabel::CritNode { .. }))
        .collect();
    // One for {r}, one family for the level-1 vertices.
    assert_eq!(crit_nodes.len(), 2, "{crit_nodes:#?}");
}

#[test]
fn squeeze_is_identity_when_parts_are_finite() {
    let t = t3();
    let scheme = build_rayless_normal_tree(&t, &all(&t)).unwrap().expect("tree");
    let td = expansion(&t, &scheme).unwrap();
    let squeezed = squeeze(&td).unwrap();
    let before = td
        .classes
        .iter()
        .filter(|c| matches!(c.label, NodeLabel::SqueezeLeaf))
        .count();
    let after = squeezed
        .classes
        .iter()
        .filter(|c| matches!(c.label, NodeLabel::SqueezeLeaf))
        .count();
    assert_eq!(before, 0);
    assert_eq!(after, 0, "all expansion parts of T3 are finite");
    let rep = verify_td(&t, &squeezed, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
}

#[test]
fn squeeze_delegates_infinite_internal_parts() {
    // Star with a pendant vertex: the handmade decomposition u - t - w with
    // an infinite internal part at t gets a fresh leaf.
    let t = sct_core::term_graphs::OmegaTerm::Omega {
        base: Box::new(sct_core::term_graphs::OmegaTerm::finite(
            &["a", "c"],
            &[("a", "c")],
        )),
        copy: Box::new(sct_core::term_graphs::OmegaTerm::finite(&["l"], &[])),
        links: vec![("V(c)".parse().unwrap(), "V(l)".parse().unwrap())],
    };
    let mk = |s: &str| -> sct_core::term_graphs::AddrPattern { s.parse().unwrap() };
    // Decomposition tree: path u - t - w.
    let tree = sct_core::term_graphs::OmegaTerm::finite(&["u", "t", "w"], &[("t", "u"), ("t", "w")]);
    let td = TDScheme {
        tree,
        root: "V(u)".parse().unwrap(),
        classes: vec![
            NodeClass {
                node: mk("V(u)"),
                parent: None,
                part: vec![mk("B/V(a)"), mk("B/V(c)")],
                separator: vec![],
                beyond: vec![],
                label: NodeLabel::Plain,
            },
            NodeClass {
                node: mk("V(t)"),
                parent: Some(mk("V(u)")),
                part: vec![mk("B/V(c)"), mk("C(*)/V(l)")],
                separator: vec![mk("B/V(c)")],
                beyond: vec![mk("C(*)/V(l)")],
                label: NodeLabel::Plain,
            },
            NodeClass {
                node: mk("V(w)"),
                parent: Some(mk("V(t)")),
                part: vec![mk("B/V(c)"), mk("C(0)/V(l)")],
                separator: vec![mk("B/V(c)"), mk("C(0)/V(l)")],
                beyond: vec![],
                label: NodeLabel::Plain,
            },
        ],
        continuation: false,
    };
    let rep = verify_td(&t, &td, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
    let squeezed = squeeze(&td).unwrap();
    let leaf = squeezed
        .classes
        .iter()
        .find(|c| matches!(c.label, NodeLabel::SqueezeLeaf))
        .expect("fresh squeeze leaf");
    // W_t' carries the old infinite part; W_t shrinks to the separators.
    assert!(leaf.part.iter().any(|p| p.to_string() == "C(*)/V(l)"));
    let t_node = leaf.parent.as_ref().unwrap();
    let t_class = squeezed.classes.iter().find(|c| &c.node == t_node).unwrap();
    assert!(t_class.part.iter().all(|p| p.free_positions() == 0), "{:?}", t_class.part);
    let rep = verify_td(&t, &squeezed, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.failures);
}

#[test]
fn theorem5_pipeline_on_rayless_corpus() {
    for (name, t, u, want_rank) in [
        ("star", star(), star_leaves(), 1),
        ("t3", t3(), all(&t3()), 2),
        ("spider", spider(), spider_leaves(), 1),
    ] {
        let rep = theorem5_pipeline(&t, &u)
            .unwrap()
            .unwrap_or_else(|_| panic!("{name}: expected the decomposition side"));
        assert!(rep.parts_meet_u_finitely, "{name}");
        assert!(rep.nonleaf_parts_finite, "{name}");
        assert!(rep.tame, "{name}");
        assert!(rep.displays_gamma_u, "{name}");
        assert!(rep.rank_equal, "{name}: {:?} vs {:?}", rep.tree_rank, rep.u_rank);
        assert_eq!(rep.u_rank, RankValue::Finite(want_rank), "{name}");
        let v = verify_td(&t, &rep.td, 5).unwrap();
        assert!(v.pass, "{name}: {:?}", v.failures);
    }
}

#[test]
fn theorem5_comb_side() {
    let got = theorem5_pipeline(&ray(), &all(&ray())).unwrap();
    let obs = got.expect_err("comb side");
    let cert = obs.certificate(4).unwrap();
    boundary::verify_certificate(&ray(), &all(&ray()), &cert).unwrap();
}

#[test]
fn theorem7_on_comb_ray_ladder() {
    for (name, t, u) in [
        ("comb", comb(), comb_teeth()),
        ("ray", ray(), all(&ray())),
        ("ladder", ladder(), all(&ladder())),
    ] {
        let rep = theorem7_decomposition(&t, &u)
            .unwrap()
            .unwrap_or_else(|_| panic!("{name}: expected the decomposition side"));
        assert!(rep.locally_finite, "{name}");
        assert!(rep.separators_finite, "{name}");
        assert!(rep.separators_connected, "{name}");
        assert!(rep.separators_pairwise_disjoint, "{name}");
        assert!(rep.parts_meet_u_finitely, "{name}");
        assert!(rep.displays_omega_u, "{name}");
        assert!(!rep.td.continuation, "{name}: periodic level rule expected");
    }
}

#[test]
fn theorem7_star_side() {
    for (t, u) in [(star(), star_leaves()), (domray(), all(&domray())), (t3(), all(&t3()))] {
        let got = theorem7_decomposition(&t, &u).unwrap();
        let obs = got.expect_err("star side");
        let cert = obs.certificate(4).unwrap();
        boundary::verify_certificate(&t, &u, &cert).unwrap();
    }
}

#[test]
fn strictly_separating_on_ray_and_comb() {
    let t = ray();
    let e = boundary::ends(&t).unwrap().remove(0);
    let x: std::collections::BTreeSet<VertexAddr> = ["S(0)/V(v)".parse().unwrap()].into();
    let sep = strictly_separating(&t, &x, &[e]).unwrap();
    assert!(!sep.separator.contains(&"S(0)/V(v)".parse().unwrap()));
    assert!(sct_core::separations::is_tame(&sep));

    let t = comb();
    let e = boundary::ends(&t).unwrap().remove(0);
    let x: std::collections::BTreeSet<VertexAddr> = ["S(0)/V(v)".parse().unwrap()].into();
    let sep = strictly_separating(&t, &x, &[e]).unwrap();
    // The separator is connected: verified through the td report machinery
    // in theorem7; here check X is strictly on the left.
    assert!(sep.vertex_in_left(&"S(0)/V(v)".parse().unwrap()));

    // A dominated end is rejected.
    let t = domray();
    let e = boundary::ends(&t).unwrap().remove(0);
    let x: std::collections::BTreeSet<VertexAddr> = ["B/V(r)".parse().unwrap()].into();
    assert!(matches!(
        strictly_separating(&t, &x, &[e]),
        Err(TdError::DominatedEnd(_))
    ));
}

#[test]
fn tree_rank_matches_u_rank_on_pipeline_outputs() {
    let t = star();
    let rep = theorem5_pipeline(&t, &star_leaves()).unwrap().unwrap();
    assert_eq!(tree_rank(&rep.td).unwrap(), RankValue::Finite(1));
}

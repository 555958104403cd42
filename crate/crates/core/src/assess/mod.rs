//! Dependency-level assessment: which dependencies lead to vulnerable code,
//! how far each benign candidate sits from it, and the resulting trust score.

mod pipeline;
mod reach;
mod score;

pub use pipeline::{
    assess_prediction, render_assessment, verdict_for, AssessError, AssessOptions, Assessment, LineDetail, Verdict,
    ASSESSMENT_SCHEMA_VERSION,
};
pub use reach::{
    is_vulnerable_dependency, reachability_distance, BenignSet, DataRule, DependencyAnalysis, Distance, ReachError,
    ReachOptions, TargetScope,
};
pub use score::{nearest_in, nearest_non_benign, trust_breakdown, trust_score, ReachRecord, TrustBreakdown};

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::lines::{Ensemble, LineClassifier, StubClassifier};
    use crate::pdg::{build_weighted_pdg, Explanation, LineId, Pdg, PdgEdge};

    fn l(n: u32) -> LineId {
        LineId::new(n).unwrap()
    }

    fn chain(vars: &[(u32, &[&str])], edges: Vec<PdgEdge>) -> Pdg {
        Pdg {
            function_id: "f".into(),
            nodes: vars.iter().map(|&(n, _)| l(n)).collect(),
            edges,
            line_text: vars.iter().map(|&(n, _)| (l(n), format!("s{n} ;"))).collect(),
            line_vars: vars
                .iter()
                .map(|&(n, vs)| (l(n), vs.iter().map(|v| v.to_string()).collect::<BTreeSet<_>>()))
                .collect(),
        }
    }

    #[test]
    fn data_rule_modes_differ() {
        // 1 -x-> 2 -ctl-> 3, and 3 mentions x. Direct accepts the control hop;
        // transitive flow needs a data-only path.
        let pdg = chain(
            &[(1, &["x"]), (2, &["x"]), (3, &["x"])],
            vec![PdgEdge::data(l(1), l(2), "x"), PdgEdge::control(l(2), l(3))],
        );
        let expl = Explanation::new("f", 1.0, vec![(1, 0.3), (2, 0.3), (3, 0.4)]).unwrap();
        let g = build_weighted_pdg(&pdg, &expl, false).unwrap();
        let benign = BenignSet::new("f", [l(1), l(2)]);
        let edge = PdgEdge::data(l(1), l(2), "x");
        let direct = ReachOptions::default();
        let flow = ReachOptions { data_rule: DataRule::TransitiveFlow, ..direct };
        assert!(is_vulnerable_dependency(&edge, &g, &benign, direct).unwrap());
        assert!(!is_vulnerable_dependency(&edge, &g, &benign, flow).unwrap());
    }

    #[test]
    fn target_scope_controls_unscored_lines() {
        let pdg = chain(&[(1, &[]), (2, &[])], vec![PdgEdge::control(l(1), l(2))]);
        let expl = Explanation::new("f", 1.0, vec![(1, 1.0)]).unwrap();
        let g = build_weighted_pdg(&pdg, &expl, false).unwrap();
        let benign = BenignSet::new("f", [l(1)]);
        let edge = PdgEdge::control(l(1), l(2));
        let any = ReachOptions { target_scope: TargetScope::AnyLine, ..Default::default() };
        assert!(!is_vulnerable_dependency(&edge, &g, &benign, ReachOptions::default()).unwrap());
        assert!(is_vulnerable_dependency(&edge, &g, &benign, any).unwrap());
    }

    #[test]
    fn contract_errors() {
        let pdg = chain(&[(1, &[]), (2, &[])], vec![PdgEdge::control(l(1), l(2))]);
        let expl = Explanation::new("f", 1.0, vec![(1, 0.5), (2, 0.5)]).unwrap();
        let g = build_weighted_pdg(&pdg, &expl, false).unwrap();
        let benign = BenignSet::new("f", [l(1)]);
        let opts = ReachOptions::default();
        assert_eq!(reachability_distance(l(2), l(1), &g, &benign, opts), Err(ReachError::NotBenign(l(2))));
        assert_eq!(reachability_distance(l(1), l(9), &g, &benign, opts), Err(ReachError::UnknownLine(l(9))));
        assert_eq!(reachability_distance(l(1), l(1), &g, &benign, opts), Ok(Distance::Finite(0)));
        let missing = PdgEdge::control(l(2), l(1));
        assert!(matches!(is_vulnerable_dependency(&missing, &g, &benign, opts), Err(ReachError::UnknownEdge { .. })));
    }

    #[test]
    fn self_loops_do_not_count() {
        let pdg = chain(&[(1, &[]), (2, &["i"])], vec![PdgEdge::control(l(1), l(1)), PdgEdge::control(l(1), l(2))]);
        let expl = Explanation::new("f", 1.0, vec![(1, 0.5), (2, 0.5)]).unwrap();
        let g = build_weighted_pdg(&pdg, &expl, false).unwrap();
        let benign = BenignSet::new("f", [l(1)]);
        let r = reachability_distance(l(1), l(2), &g, &benign, ReachOptions::default()).unwrap();
        assert_eq!(r, Distance::Finite(1));
    }

    #[test]
    fn ties_prefer_heavier_then_earlier_targets() {
        let pdg = chain(
            &[(1, &[]), (2, &[]), (3, &[]), (4, &[])],
            vec![PdgEdge::control(l(1), l(2)), PdgEdge::control(l(1), l(3)), PdgEdge::control(l(1), l(4))],
        );
        let expl = Explanation::new("f", 1.0, vec![(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.3)]).unwrap();
        let g = build_weighted_pdg(&pdg, &expl, false).unwrap();
        let benign = BenignSet::new("f", [l(1)]);
        let r = nearest_non_benign(l(1), &expl, &g, &benign, ReachOptions::default()).unwrap();
        assert_eq!(r.target, Some(l(3)));
        assert_eq!(r.distance, Distance::Finite(1));
    }

    #[test]
    fn empty_explanation_is_untrustworthy_with_warning() {
        let pdg = chain(&[(1, &[])], vec![]);
        let expl = Explanation::new("f", 1.0, vec![]).unwrap();
        let ens = Ensemble::new(vec![LineClassifier::Stub(StubClassifier::constant("s", 1.0))]);
        let a = assess_prediction(&expl, &pdg, &ens, 0.5, &AssessOptions::default()).unwrap();
        assert_eq!(a.trust_score, 0.0);
        assert_eq!(a.verdict, Verdict::Untrustworthy);
        assert!(a.warnings[0].contains("empty explanation"));
    }

    #[test]
    fn all_non_benign_uses_weight_sum() {
        let pdg = chain(&[(1, &[])], vec![]);
        let expl = Explanation::new("f", 1.0, vec![(1, 1.0)]).unwrap();
        let ens = Ensemble::new(vec![LineClassifier::Stub(StubClassifier::constant("s", 0.0))]);
        let a = assess_prediction(&expl, &pdg, &ens, 1.0, &AssessOptions::default()).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.trust_score, 1.0);
        assert_eq!(a.verdict, Verdict::Trustworthy);
        let back = Assessment::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}

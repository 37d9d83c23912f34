mod common;

use std::collections::BTreeSet;

use common::{answer_of, Instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use restproof::reason::{check_proof, prove, prove_all, sources_map, Budget, FilterRule, KnowledgeBase, ProveError, SourceDoc, StepKind};

#[test]
fn prove_agrees_with_forward_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2013);
    let (mut provable, mut derived_only) = (0, 0);
    for case in 0..200 {
        let inst = Instance::random(&mut rng);
        // odd cases hand the rules over as descriptions
        let (kb, descs) = if case % 2 == 0 {
            (KnowledgeBase::new(vec![SourceDoc::parse("data", &inst.data_text()).unwrap()]), vec![])
        } else {
            let facts = SourceDoc::parse("data", &inst.facts_text()).unwrap();
            (KnowledgeBase::new(vec![facts]), vec![SourceDoc::parse("rules", &inst.rules_text()).unwrap()])
        };
        let goal = FilterRule::parse("goal", &inst.goal_text()).unwrap();
        let expected = inst.oracle_answers();
        let ctx = || format!("case {case}\n{}{}", inst.data_text(), inst.goal_text());
        if std::env::var_os("ORACLE_TRACE").is_some() {
            eprintln!("{}", ctx());
        }

        let all: BTreeSet<BTreeSet<String>> =
            prove_all(&kb, &descs, &goal, Budget::default()).unwrap().iter().map(answer_of).collect();
        assert_eq!(all, expected, "{}", ctx());

        match prove(&kb, &descs, &goal, Budget::default()) {
            Ok(proof) => {
                assert!(!expected.is_empty(), "{}", ctx());
                provable += 1;
                check_proof(&proof, &sources_map(&kb, &descs, &goal)).unwrap_or_else(|e| panic!("{e}\n{}", ctx()));
                assert!(expected.contains(&answer_of(proof.conclusion().unwrap())), "{}", ctx());
                for (_, s) in proof.inferences() {
                    assert!(s.gives.as_ref().unwrap().is_universal_free());
                }
                if proof.steps.iter().filter(|s| s.kind == StepKind::Inference).count() > 1 {
                    derived_only += 1;
                }
            }
            Err(ProveError::Unprovable) => assert!(expected.is_empty(), "{}", ctx()),
            Err(e) => panic!("{e}\n{}", ctx()),
        }
    }
    // the generator must exercise both verdicts and actual rule use
    assert!(provable > 20 && provable < 180, "{provable} provable");
    assert!(derived_only > 10, "{derived_only}");
}

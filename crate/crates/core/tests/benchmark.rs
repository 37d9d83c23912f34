use restproof::benchmark::{flatness_ratio, generate_chain, run_benchmark, summarize, write_csv, ChainSpec};
use restproof::reason::{check_proof, count_rule_applications, prove, sources_map, Budget};
use restproof::restdesc::{extract_requests, validate_description};

#[test]
fn middle_description_shape() {
    let chain = generate_chain(ChainSpec::new(3, 2));
    let (_, text) = chain.descriptions.iter().find(|(iri, _)| iri == "chain_desc_2").unwrap();
    assert!(text.contains("?a1 ex:rel2 ?b1.\n  ?a2 ex:rel2 ?b2."));
    assert!(text.contains("?b1 ex:rel3 _:c1.\n  ?b2 ex:rel3 _:c2."));
    assert!(text.contains("http:methodName \"GET\""));
    assert!(chain.goal.contains("?a1 ex:rel4 ?b1"));
}

#[test]
fn minimal_chain() {
    let l = generate_chain(ChainSpec::new(2, 1)).load().unwrap();
    let p = prove(&l.knowledge, &l.descriptions, &l.goal, Budget::default()).unwrap();
    assert_eq!(count_rule_applications(&p, &["chain_desc_1", "chain_desc_2"]), 2);
}

#[test]
fn only_the_head_request_is_executable() {
    let l = generate_chain(ChainSpec::new(3, 2)).load().unwrap();
    let p = prove(&l.knowledge, &l.descriptions, &l.goal, Budget::default()).unwrap();
    let rules: Vec<_> = l.descriptions.iter().map(|d| validate_description(d.iri.clone(), &d.document).unwrap()).collect();
    let reqs = extract_requests(&p, &rules);
    assert_eq!(reqs.len(), 3);
    let ready: Vec<_> = reqs.iter().filter(|r| r.sufficiently_specified).map(|r| r.rule.as_str()).collect();
    assert_eq!(ready, ["chain_desc_1"]);
}

#[test]
fn dummies_are_not_used() {
    let chain = generate_chain(ChainSpec::new(32, 1).with_dummies(1024));
    let l = chain.load().unwrap();
    assert_eq!(l.descriptions.len(), 32 + 1024);
    let p = prove(&l.knowledge, &l.descriptions, &l.goal, Budget::default()).unwrap();
    check_proof(&p, &sources_map(&l.knowledge, &l.descriptions, &l.goal)).unwrap();
    let dummies: Vec<_> = l.descriptions.iter().map(|d| d.iri.as_str()).filter(|i| i.starts_with("dummy")).collect();
    assert_eq!(count_rule_applications(&p, &dummies), 0);
    assert_eq!(count_rule_applications(&p, &chain.plan), 32);
}

#[test]
fn generation_is_deterministic() {
    let spec = ChainSpec { n: 5, d: 2, dummies: 7, seed: 9 };
    let (a, b) = (generate_chain(spec), generate_chain(spec));
    assert_eq!(a.descriptions, b.descriptions);
    let other = generate_chain(ChainSpec { seed: 10, ..spec });
    assert_ne!(a.descriptions, other.descriptions);
    let dir = tempfile::tempdir().unwrap();
    a.write_to(dir.path()).unwrap();
    let first = std::fs::read_to_string(dir.path().join("descriptions/chain_desc_3.n3")).unwrap();
    b.write_to(dir.path()).unwrap();
    assert_eq!(first, std::fs::read_to_string(dir.path().join("descriptions/chain_desc_3.n3")).unwrap());
}

#[test]
fn harness_writes_csv() {
    let grid = [ChainSpec::new(4, 1), ChainSpec::new(4, 2)];
    let records = run_benchmark(&grid, 2, Budget::default());
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.n_pre == Some(4) && r.total() >= r.parse && r.total() >= r.reason));
    let mut out = Vec::new();
    write_csv(&records, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("n,d,dummies,trial,parse_ms,reason_ms,total_ms,n_pre\n"));
    assert_eq!(text.lines().count(), 5);
    let s = summarize(&records);
    assert_eq!(s.len(), 2);
    assert!(flatness_ratio(&s) >= 1.0);
}

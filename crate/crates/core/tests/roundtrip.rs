use proptest::prelude::*;
use restproof::n3::{formula_to_string, parse_document, serialize, Document, Formula, Literal, Statement, Term, Triple, XSD_DECIMAL, XSD_INTEGER};

const EX: &str = "http://example.org/x#";

fn iri() -> impl Strategy<Value = Term> {
    prop_oneof![
        (0..4u8).prop_map(|i| Term::uri(format!("{EX}n{i}"))),
        Just(Term::uri("lena.jpg")),
        Just(Term::uri("/images/37/thumb")),
        Just(Term::uri("http://example.org/other/path")),
    ]
}

fn literal() -> impl Strategy<Value = Term> {
    prop_oneof![
        "[a-z \"\\\\\n\t\u{e9}\u{1F600}]{0,8}".prop_map(|s| Term::Literal(Literal::string(s))),
        (-500i64..500).prop_map(|n| Term::Literal(Literal::typed(n.to_string(), XSD_INTEGER))),
        (0u32..1000, 0u32..100).prop_map(|(a, b)| Term::Literal(Literal::typed(format!("{a}.{b}"), XSD_DECIMAL))),
        "[a-z]{1,5}".prop_map(|s| Term::Literal(Literal::typed(s, format!("{EX}dt")))),
    ]
}

fn variable() -> impl Strategy<Value = Term> {
    prop_oneof![(0..3u8).prop_map(|i| Term::universal(format!("v{i}"))), (0..3u8).prop_map(|i| Term::existential(format!("e{i}")))]
}

fn node(depth: u32) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![iri(), variable()].boxed();
    if depth == 0 {
        return leaf;
    }
    prop_oneof![
        4 => leaf,
        1 => prop::collection::vec(prop_oneof![iri(), literal(), variable()], 0..3).prop_map(Term::List),
        1 => formula(depth - 1).prop_map(Term::Graph),
    ]
    .boxed()
}

fn triple(depth: u32) -> impl Strategy<Value = Statement> {
    let predicate = prop_oneof![4 => iri(), 1 => Just(Term::rdf_type()), 1 => (0..2u8).prop_map(|i| Term::universal(format!("v{i}")))];
    let object = prop_oneof![3 => node(depth), 1 => literal()];
    (node(depth), predicate, object).prop_map(|(s, p, o)| Statement::Triple(Triple::new(s, p, o)))
}

fn formula(depth: u32) -> BoxedStrategy<Formula> {
    let implication = (prop::collection::vec(triple(0), 1..3), prop::collection::vec(triple(0), 0..3)).prop_map(|(a, c)| {
        Statement::Implication { antecedent: Term::Graph(Formula::from_statements(a)), consequent: Term::Graph(Formula::from_statements(c)) }
    });
    let statement = if depth == 0 { triple(0).boxed() } else { prop_oneof![4 => triple(depth), 1 => implication].boxed() };
    prop::collection::vec(statement, 0..5).prop_map(Formula::from_statements).boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_then_parse_is_identity(body in formula(2)) {
        let doc = Document::new(body.clone()).with_prefixes([("ex", EX)]);
        let text = serialize(&doc);
        let back = parse_document(&text, None).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back.body, &body, "{}", text);
        let plain = formula_to_string(&body, &Default::default());
        let back = parse_document(&plain, None).map_err(|e| TestCaseError::fail(format!("{e}\n{plain}")))?;
        prop_assert_eq!(back.body, body);
    }
}

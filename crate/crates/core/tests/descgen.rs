use restproof::descgen::{cluster_responses, generate_skeletons, parse_trace, write_text_trace, DEFAULT_THRESHOLD, DESCGEN_NS};
use restproof::n3::{parse_document, Formula, Statement, Substitution, Term, Triple, ApplyMode};
use restproof::samples;

fn trace() -> Vec<restproof::descgen::TraceEntry> {
    parse_trace(samples::INTERACTION_TRACE).unwrap()
}

#[test]
fn trace_parses() {
    let t = trace();
    assert_eq!(t.len(), 4);
    assert_eq!(t[0].request.method, "POST");
    assert_eq!(t[1].request.target, "/images/24/thumbnail");
    assert!(t[3].response.body.contains("80.0"));
    assert_eq!(parse_trace(&write_text_trace(&t)).unwrap(), t);
}

#[test]
fn clusters() {
    let c = cluster_responses(&trace(), DEFAULT_THRESHOLD);
    let members: Vec<_> = c.iter().map(|c| c.members.clone()).collect();
    assert_eq!(members, vec![vec![0, 2], vec![1, 3]]);
    assert_eq!(c[1].uri_template, "/images/{}/thumbnail");
    assert_eq!(cluster_responses(&trace(), 1.0).len(), 4);
    assert_eq!(cluster_responses(&trace()[..1], DEFAULT_THRESHOLD).len(), 1);
}

fn sides(f: &Formula) -> (Formula, Formula) {
    match f.statements() {
        [Statement::Implication { antecedent: Term::Graph(a), consequent: Term::Graph(c) }] => (a.clone(), c.clone()),
        other => panic!("not an implication: {other:?}"),
    }
}

fn rule(a: Formula, c: Formula) -> Formula {
    Formula::from_statements(vec![Statement::Implication { antecedent: Term::Graph(a), consequent: Term::Graph(c) }])
}

#[test]
fn skeletons_match_hand_written_descriptions() {
    let t = trace();
    let sk = generate_skeletons(&cluster_responses(&t, DEFAULT_THRESHOLD), &t).unwrap();
    eprintln!("{}\n{}", sk[0], sk[1]);

    // upload: image typing moves to the antecedent, body and response merge
    let (a, c) = sides(sk[0].implication());
    let image = Term::uri("http://dbpedia.org/resource/Image");
    let mut rename = Substitution::new();
    rename.insert(Term::existential("object2"), Term::universal("object1")).unwrap();
    let a: Formula = Formula::from_triples(a.atoms().map(|t| {
        let mut t = t.clone();
        if t.object == Term::uri(format!("{DESCGEN_NS}localFile")) {
            t.object = image.clone();
        }
        t
    }));
    let c = c.apply(&rename, ApplyMode::Total);
    let dropped = Triple::new(Term::universal("object1"), Term::rdf_type(), image.clone());
    let c = Formula::from_triples(c.atoms().filter(|t| **t != dropped).cloned());
    let upload_desc = parse_document(samples::DESC_IMAGES, None).unwrap().body;
    assert!(rule(a, c).alpha_equivalent(&upload_desc));

    // thumbnail: equal up to variable names
    assert!(sk[1].linked);
    let thumbnail_desc = parse_document(samples::DESC_THUMBNAIL, None).unwrap().body;
    assert!(sk[1].implication().alpha_equivalent(&thumbnail_desc));
}

#[test]
fn skeleton_round_trips_through_text() {
    let t = trace();
    for s in generate_skeletons(&cluster_responses(&t, DEFAULT_THRESHOLD), &t).unwrap() {
        let back = parse_document(&s.to_n3(), None).unwrap();
        assert_eq!(back.body, s.document.body);
        assert!(back.body.is_simple());
    }
}

#[test]
fn constant_cluster_has_no_variables() {
    let text = "HTTP request 1: GET to /status\nHTTP response 1:\n</status> <urn:ok> true.\n\nHTTP request 2: GET to /status\nHTTP response 2:\n</status> <urn:ok> true.\n";
    let t = parse_trace(text).unwrap();
    let sk = generate_skeletons(&cluster_responses(&t, DEFAULT_THRESHOLD), &t).unwrap();
    assert_eq!(sk.len(), 1);
    assert!(sk[0].implication().variables().iter().all(|v| v.is_existential() && (v == &Term::existential("request") || v == &Term::existential("response"))));
}

#[test]
fn n3_trace_format() {
    let text = r#"
@prefix http: <http://www.w3.org/2011/http#>.
_:a http:methodName "POST"; http:requestURI "/images/"; http:body <a.jpg>;
    http:resp [ http:body { </images/1> <urn:p> </images/1/t>. } ].
_:b http:methodName "POST"; http:requestURI "/images/"; http:body <b.jpg>;
    http:resp [ http:body { </images/2> <urn:p> </images/2/t>. } ].
"#;
    let t = parse_trace(text).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(cluster_responses(&t, DEFAULT_THRESHOLD).len(), 1);
}

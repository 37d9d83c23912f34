//! RESTdesc descriptions: validation, request extraction from proofs, and
//! conversion of instantiated requests into executable ones.

use std::collections::HashSet;
use std::fmt;

use crate::n3::{Document, Formula, Statement, Term, Triple};
use crate::reason::{Proof, StepKind, StepRef};

pub const HTTP_NS: &str = "http://www.w3.org/2011/http#";

pub fn http(local: &str) -> Term {
    Term::uri(format!("{HTTP_NS}{local}"))
}

fn is_http(t: &Term, local: &str) -> bool {
    t.as_uri().is_some_and(|u| u.strip_prefix(HTTP_NS) == Some(local))
}

/// The request part of a description, or of an instantiated one.
#[derive(Clone, Debug, PartialEq)]
pub struct HttpRequestDescription {
    pub subject: Term,
    pub method: Term,
    pub request_uri: Term,
    pub body: Option<Term>,
    pub headers: Vec<Term>,
    /// The `http:resp` object and its `http:body`, if any.
    pub response: Option<(Term, Option<Term>)>,
    /// All triples of the request, including the response ones.
    pub triples: Formula,
}

impl HttpRequestDescription {
    /// Every object of a request triple other than `http:resp` is ground.
    pub fn sufficiently_specified(&self) -> bool {
        self.triples
            .atoms()
            .filter(|t| t.subject == self.subject && !is_http(&t.predicate, "resp"))
            .all(|t| t.object.is_ground())
    }

    /// Splits `formula` into the request triples and the rest. The request
    /// subject is the subject of the only `http:methodName` triple.
    fn split(formula: &Formula) -> Result<(Self, Formula), Vec<DescViolation>> {
        let methods: Vec<&Triple> = formula.atoms().filter(|t| is_http(&t.predicate, "methodName")).collect();
        if methods.len() != 1 {
            return Err(vec![DescViolation::new(
                format!("expected exactly one http:methodName triple, found {}", methods.len()),
                None,
            )]);
        }
        let subject = methods[0].subject.clone();
        let resp_objects: HashSet<&Term> = formula
            .atoms()
            .filter(|t| t.subject == subject && is_http(&t.predicate, "resp"))
            .map(|t| &t.object)
            .collect();
        let mut triples = Formula::new();
        let mut rest = Formula::new();
        for st in formula.statements() {
            match st {
                Statement::Triple(t) if t.subject == subject || resp_objects.contains(&t.subject) => {
                    triples.push(t.clone())
                }
                other => rest.push(other.clone()),
            }
        }
        let direct = |local: &str| -> Vec<Term> {
            triples
                .atoms()
                .filter(|t| t.subject == subject && is_http(&t.predicate, local))
                .map(|t| t.object.clone())
                .collect()
        };
        let mut violations = Vec::new();
        let uris = direct("requestURI");
        if uris.len() != 1 {
            violations.push(DescViolation::new(
                format!("expected exactly one http:requestURI triple, found {}", uris.len()),
                Some(subject.clone()),
            ));
        }
        let response = direct("resp").first().map(|r| {
            let body = triples
                .atoms()
                .find(|t| &t.subject == r && is_http(&t.predicate, "body"))
                .map(|t| t.object.clone());
            (r.clone(), body)
        });
        if !violations.is_empty() {
            return Err(violations);
        }
        let request = HttpRequestDescription {
            method: methods[0].object.clone(),
            request_uri: uris[0].clone(),
            body: direct("body").first().cloned(),
            headers: direct("headers"),
            response,
            subject,
            triples,
        };
        Ok((request, rest))
    }
}

impl fmt::Display for HttpRequestDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |t: &Term| match t {
            Term::Literal(l) => l.lexical.to_string(),
            other => other.to_string(),
        };
        write!(f, "{} {}", show(&self.method), show(&self.request_uri))?;
        if let Some(b) = &self.body {
            write!(f, " with body {}", show(b))?;
        }
        Ok(())
    }
}

/// A validated `{pre} => {request post}` rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RestDescription {
    pub source: String,
    pub precondition: Formula,
    pub request: HttpRequestDescription,
    pub postcondition: Formula,
    /// The rule as written.
    pub implication: Formula,
}

impl RestDescription {
    /// Reassembles the implication from its parts.
    pub fn recompose(&self) -> Formula {
        let mut consequent = self.request.triples.clone();
        consequent.extend(&self.postcondition);
        Formula::from_statements(vec![Statement::Implication {
            antecedent: Term::Graph(self.precondition.clone()),
            consequent: Term::Graph(consequent),
        }])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescViolation {
    pub message: String,
    pub term: Option<Term>,
}

impl DescViolation {
    fn new(message: String, term: Option<Term>) -> Self {
        DescViolation { message, term }
    }
}

impl fmt::Display for DescViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.term {
            Some(t) => write!(f, "{} ({t})", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValidateError {
    #[error("the document contains no implication")]
    NotAnImplication,
    #[error("the document contains {0} implications")]
    MultipleImplications(usize),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Violations(Vec<DescViolation>),
}

/// Checks `doc` against the description constraints and splits it.
pub fn validate_description(source: impl Into<String>, doc: &Document) -> Result<RestDescription, ValidateError> {
    let imps: Vec<_> = doc.body.implications().collect();
    let (ante, cons) = match imps.as_slice() {
        [] => return Err(ValidateError::NotAnImplication),
        [one] => *one,
        more => return Err(ValidateError::MultipleImplications(more.len())),
    };
    let (Term::Graph(pre), Term::Graph(cons)) = (ante, cons) else {
        return Err(ValidateError::Violations(vec![DescViolation::new(
            "both sides must be formulas".into(),
            None,
        )]));
    };
    let implication = Formula::from_statements(vec![Statement::Implication {
        antecedent: ante.clone(),
        consequent: Term::Graph(cons.clone()),
    }]);
    let mut violations = Vec::new();
    if !implication.is_simple() {
        violations.push(DescViolation::new("rule is not simple".into(), None));
    }
    let pre_vars: Vec<Term> = pre.variables();
    for v in pre_vars.iter().filter(|v| v.is_existential()) {
        violations.push(DescViolation::new("precondition contains an existential variable".into(), Some(v.clone())));
    }
    let (request, post) = match HttpRequestDescription::split(cons) {
        Ok(parts) => parts,
        Err(mut v) => {
            violations.append(&mut v);
            return Err(ValidateError::Violations(violations));
        }
    };
    if !request.subject.is_existential() {
        violations.push(DescViolation::new(
            "request subject must be an existential variable".into(),
            Some(request.subject.clone()),
        ));
    }
    if !matches!(request.method, Term::Literal(_)) {
        violations.push(DescViolation::new("http:methodName must be a literal".into(), Some(request.method.clone())));
    }
    let resp = request.response.as_ref().map(|(r, _)| r);
    for t in request.triples.atoms().filter(|t| t.subject == request.subject) {
        if t.predicate.as_uri().map_or(true, |p| !p.starts_with(HTTP_NS)) {
            violations.push(DescViolation::new("request predicate outside the http: vocabulary".into(), Some(t.predicate.clone())));
        }
        if t.object.is_existential() && Some(&t.object) != resp {
            violations.push(DescViolation::new(
                "request object is an existential variable, so the request can never be executed".into(),
                Some(t.object.clone()),
            ));
        }
    }
    let mut reported = HashSet::new();
    let mut check_universals = |f: &Formula, what: &str, violations: &mut Vec<DescViolation>| {
        for v in f.variables() {
            if v.is_universal() && !pre_vars.contains(&v) && reported.insert(v.clone()) {
                violations.push(DescViolation::new(format!("universal in the {what} does not occur in the precondition"), Some(v)));
            }
        }
    };
    check_universals(&request.triples, "request", &mut violations);
    check_universals(&post, "postcondition", &mut violations);

    if !violations.is_empty() {
        return Err(ValidateError::Violations(violations));
    }
    Ok(RestDescription { source: source.into(), precondition: pre.clone(), request, postcondition: post, implication })
}

/// An instantiated request found in a proof.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedRequest {
    pub request: HttpRequestDescription,
    pub sufficiently_specified: bool,
    /// The inference step applying the description.
    pub step: StepRef,
    /// Source IRI of the description.
    pub rule: String,
}

/// Instantiated requests of every inference applying one of `rules`, with
/// dependencies before dependents.
pub fn extract_requests(proof: &Proof, rules: &[RestDescription]) -> Vec<ExtractedRequest> {
    let mut order = Vec::new();
    let mut seen = vec![false; proof.steps.len()];
    fn visit(proof: &Proof, i: StepRef, seen: &mut [bool], order: &mut Vec<StepRef>) {
        if i >= seen.len() || seen[i] {
            return;
        }
        seen[i] = true;
        let s = &proof.steps[i];
        for &r in s.evidence.iter().chain(&s.components).chain(&s.because) {
            visit(proof, r, seen, order);
        }
        order.push(i);
    }
    visit(proof, proof.root, &mut seen, &mut order);

    let mut out = Vec::new();
    for i in order {
        let step = &proof.steps[i];
        if step.kind != StepKind::Inference {
            continue;
        }
        let Some(origin) = step.rule.and_then(|r| proof.rule_origin(r)) else { continue };
        if !rules.iter().any(|d| d.source == origin) {
            continue;
        }
        let Some(gives) = &step.gives else { continue };
        if let Ok((request, _)) = HttpRequestDescription::split(gives) {
            out.push(ExtractedRequest {
                sufficiently_specified: request.sufficiently_specified(),
                request,
                step: i,
                rule: origin.to_string(),
            });
        }
    }
    out
}

/// A request body as sent over the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireBody {
    /// An IRI naming a local entity the transport resolves.
    Entity(String),
    /// Literal text or serialized N3.
    Inline(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireRequest {
    pub method: String,
    pub target: String,
    pub body: Option<WireBody>,
    pub headers: Vec<(String, String)>,
}

impl WireRequest {
    pub fn new(method: impl Into<String>, target: impl Into<String>) -> Self {
        WireRequest { method: method.into(), target: target.into(), body: None, headers: Vec::new() }
    }

    pub fn with_body(mut self, body: WireBody) -> Self {
        self.body = Some(body);
        self
    }
}

impl fmt::Display for WireRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.target)?;
        match &self.body {
            Some(WireBody::Entity(e)) => write!(f, " with <{e}> as body"),
            Some(WireBody::Inline(s)) => write!(f, " with {s:?} as body"),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("request {0} is not sufficiently specified")]
pub struct NotSufficientlySpecified(pub String);

fn lexical(t: &Term) -> String {
    match t {
        Term::Uri(u) => u.to_string(),
        Term::Literal(l) => l.lexical.to_string(),
        other => other.to_string(),
    }
}

pub fn to_wire_request(h: &HttpRequestDescription) -> Result<WireRequest, NotSufficientlySpecified> {
    if !h.sufficiently_specified() {
        return Err(NotSufficientlySpecified(h.to_string()));
    }
    let method = lexical(&h.method);
    let target = lexical(&h.request_uri);
    if method.is_empty() || target.is_empty() {
        return Err(NotSufficientlySpecified(h.to_string()));
    }
    let body = h.body.as_ref().map(|b| match b {
        Term::Uri(u) => WireBody::Entity(u.to_string()),
        other => WireBody::Inline(lexical(other)),
    });
    // header objects are opaque; literals of the form "Name: value" are sent as-is
    let headers = h
        .headers
        .iter()
        .filter_map(|t| lexical(t).split_once(':').map(|(n, v)| (n.trim().to_string(), v.trim().to_string())))
        .collect();
    Ok(WireRequest { method, target, body, headers })
}

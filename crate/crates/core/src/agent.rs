//! The pragmatic proof loop: prove, execute one request, fold the response
//! back in, re-prove, and retire descriptions whose execution did not help.

use std::fmt;

use crate::n3::{parse_document, Formula, Statement};
use crate::reason::{count_rule_applications, prove, Budget, FilterRule, KnowledgeBase, Proof, ProveError, SourceDoc};
use crate::restdesc::{extract_requests, to_wire_request, validate_description, RestDescription, ValidateError, WireRequest};

/// What a server sent back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireResponse {
    pub status: u16,
    pub media_type: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl WireResponse {
    pub fn n3(status: u16, body: impl Into<String>) -> Self {
        WireResponse { status, media_type: "text/n3".into(), headers: Vec::new(), body: body.into() }
    }

    pub fn empty(status: u16) -> Self {
        Self::n3(status, "")
    }
}

/// Anything that can answer one request at a time.
pub trait Transport {
    fn send(&mut self, request: &WireRequest) -> WireResponse;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, request: &WireRequest) -> WireResponse {
        (**self).send(request)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("initial state {0} is not a set of ground triples")]
    NonGroundState(String),
    #[error("description {iri}: {error}")]
    InvalidDescription { iri: String, error: ValidateError },
    #[error("background knowledge {iri}: {message}")]
    InvalidBackground { iri: String, message: String },
}

/// Initial state H, goal g, descriptions R and background knowledge B.
#[derive(Clone, Debug)]
pub struct CompositionProblem {
    pub state: Vec<SourceDoc>,
    pub goal: FilterRule,
    pub descriptions: Vec<(SourceDoc, RestDescription)>,
    pub background: Vec<SourceDoc>,
}

impl CompositionProblem {
    pub fn new(
        state: Vec<SourceDoc>,
        goal: FilterRule,
        descriptions: Vec<SourceDoc>,
        background: Vec<SourceDoc>,
    ) -> Result<Self, ProblemError> {
        for s in &state {
            let ok = s.document.body.statements().iter().all(|st| matches!(st, Statement::Triple(t) if t.is_ground()));
            if !ok {
                return Err(ProblemError::NonGroundState(s.iri.clone()));
            }
        }
        for b in &background {
            check_background(b)?;
        }
        let descriptions = descriptions
            .into_iter()
            .map(|d| {
                let v = validate_description(d.iri.clone(), &d.document)
                    .map_err(|error| ProblemError::InvalidDescription { iri: d.iri.clone(), error })?;
                Ok((d, v))
            })
            .collect::<Result<_, _>>()?;
        Ok(CompositionProblem { state, goal, descriptions, background })
    }
}

fn check_background(b: &SourceDoc) -> Result<(), ProblemError> {
    let bad = |message: &str| ProblemError::InvalidBackground { iri: b.iri.clone(), message: message.into() };
    for st in b.document.body.statements() {
        match st {
            Statement::Triple(t) if !t.is_ground() => return Err(bad("facts must be ground")),
            Statement::Triple(_) => {}
            Statement::Implication { .. } => {
                let rule = Formula::from_statements(vec![st.clone()]);
                if !rule.is_simple() || rule.variables().iter().any(|v| v.is_existential()) {
                    return Err(bad("rules must be simple and free of blank nodes"));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Advance,
    Retire,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Advance => "advance",
            Decision::Retire => "retire",
        })
    }
}

/// One executed request and its effect on the plan.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecutedStep {
    pub n_pre: usize,
    pub request: WireRequest,
    /// Description the request came from.
    pub rule: String,
    /// Name of the pre-proof inference step that held the request.
    pub lemma: String,
    pub status: u16,
    pub received: Formula,
    pub n_post: usize,
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureCause {
    /// No pre-proof exists with the remaining descriptions.
    NoProof,
    /// A pre-proof applies descriptions but none of its requests is executable.
    NoneSelectable,
    Reasoner(ProveError),
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureCause::NoProof => f.write_str("no pre-proof with the remaining descriptions"),
            FailureCause::NoneSelectable => f.write_str("no sufficiently specified request in the pre-proof"),
            FailureCause::Reasoner(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Success,
    Failure(FailureCause),
}

#[derive(Clone, Debug)]
pub struct ExecutionOutcome {
    pub status: Status,
    /// Ground goal instance, on success.
    pub goal_instance: Option<Formula>,
    pub trace: Vec<ExecutedStep>,
    /// Retired description IRIs, in retirement order.
    pub retired: Vec<String>,
    pub warnings: Vec<String>,
    /// The last proof found and the knowledge it was built from.
    pub final_proof: Option<Proof>,
    pub final_knowledge: KnowledgeBase,
}

impl ExecutionOutcome {
    pub fn is_success(&self) -> bool {
        self.status == Status::Success
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Keep response facts when restarting after a retirement.
    pub keep_learned: bool,
}

/// Parses a response into ground triples. Anything else is dropped with a
/// warning; error statuses and unknown media types yield nothing.
pub fn incorporate_response(resp: &WireResponse) -> (Formula, Vec<String>) {
    let mut warnings = Vec::new();
    if !(200..300).contains(&resp.status) {
        warnings.push(format!("status {} ignored", resp.status));
        return (Formula::new(), warnings);
    }
    let media = resp.media_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if !resp.body.trim().is_empty() && media != "text/n3" && media != "text/turtle" {
        warnings.push(format!("media type {:?} not understood", resp.media_type));
        return (Formula::new(), warnings);
    }
    let doc = match parse_document(&resp.body, None) {
        Ok(d) => d,
        Err(e) => {
            warnings.push(format!("unparseable response: {e}"));
            return (Formula::new(), warnings);
        }
    };
    let mut g = Formula::new();
    for st in doc.body.statements() {
        match st {
            Statement::Triple(t) if t.is_ground() => g.push(t.clone()),
            other => warnings.push(format!("dropped non-ground statement {}", crate::n3::statement_to_string(other, &doc.prefixes))),
        }
    }
    (g, warnings)
}

/// Runs the loop until the goal holds or no description is left to try.
pub fn run(problem: &CompositionProblem, transport: &mut dyn Transport, budget: Budget, options: RunOptions) -> ExecutionOutcome {
    let mut active: Vec<&(SourceDoc, RestDescription)> = problem.descriptions.iter().collect();
    let mut learned: Vec<SourceDoc> = Vec::new();
    let mut out = ExecutionOutcome {
        status: Status::Failure(FailureCause::NoProof),
        goal_instance: None,
        trace: Vec::new(),
        retired: Vec::new(),
        warnings: Vec::new(),
        final_proof: None,
        final_knowledge: KnowledgeBase::default(),
    };
    let mut responses = 0usize;

    'epoch: loop {
        let mut kb = KnowledgeBase::new(problem.state.iter().chain(&problem.background).cloned().collect());
        if options.keep_learned {
            kb.sources.extend(learned.iter().cloned());
        }
        let docs: Vec<SourceDoc> = active.iter().map(|(d, _)| d.clone()).collect();
        let descs: Vec<RestDescription> = active.iter().map(|(_, r)| r.clone()).collect();
        let names: Vec<&str> = descs.iter().map(|d| d.source.as_str()).collect();

        // pre-proof
        let mut pre = match prove(&kb, &docs, &problem.goal, budget) {
            Ok(p) => p,
            Err(ProveError::Unprovable) => {
                out.status = Status::Failure(FailureCause::NoProof);
                out.final_knowledge = kb;
                return out;
            }
            Err(e) => {
                out.status = Status::Failure(FailureCause::Reasoner(e));
                out.final_knowledge = kb;
                return out;
            }
        };
        let mut n_pre = count_rule_applications(&pre, &names);

        loop {
            // done once the proof applies no description
            if n_pre == 0 {
                // two goal atoms may land on the same fact
                out.goal_instance = pre.conclusion().map(|g| {
                    let mut statements: Vec<Statement> = Vec::new();
                    for st in g.statements() {
                        if !statements.contains(st) {
                            statements.push(st.clone());
                        }
                    }
                    Formula::from_statements(statements)
                });
                out.final_proof = Some(pre);
                out.final_knowledge = kb;
                out.status = Status::Success;
                return out;
            }
            // first executable request, dependencies first
            let selected = extract_requests(&pre, &descs).into_iter().find(|r| r.sufficiently_specified);
            let Some(selected) = selected else {
                out.status = Status::Failure(FailureCause::NoneSelectable);
                out.final_proof = Some(pre);
                out.final_knowledge = kb;
                return out;
            };
            let request = to_wire_request(&selected.request).expect("selected request is sufficiently specified");
            let response = transport.send(&request);
            let (g, warnings) = incorporate_response(&response);
            out.warnings.extend(warnings);
            responses += 1;
            let g_doc = SourceDoc::new(format!("response{responses}"), crate::n3::Document::new(g.clone()));
            kb.push(g_doc.clone());
            learned.push(g_doc);
            let post = match prove(&kb, &docs, &problem.goal, budget) {
                Ok(p) => Some(p),
                Err(ProveError::Unprovable) => None,
                Err(e) => {
                    out.status = Status::Failure(FailureCause::Reasoner(e));
                    out.final_knowledge = kb;
                    return out;
                }
            };
            let n_post = post.as_ref().map_or(n_pre, |p| count_rule_applications(p, &names));
            // no progress means the description did not deliver
            let decision = if n_post >= n_pre { Decision::Retire } else { Decision::Advance };
            out.trace.push(ExecutedStep {
                n_pre,
                request,
                rule: selected.rule.clone(),
                lemma: pre.steps[selected.step].name.clone(),
                status: response.status,
                received: g,
                n_post,
                decision,
            });
            match (decision, post) {
                (Decision::Advance, Some(p)) => {
                    pre = p;
                    n_pre = n_post;
                }
                _ => {
                    active.retain(|(d, _)| d.iri != selected.rule);
                    out.retired.push(selected.rule);
                    continue 'epoch;
                }
            }
        }
    }
}

/// The trace as N3, one resource per executed step.
pub fn trace_to_n3(outcome: &ExecutionOutcome) -> String {
    use crate::n3::term_to_string;
    let none = indexmap::IndexMap::new();
    let mut s = String::from(
        "@prefix http: <http://www.w3.org/2011/http#>.\n@prefix r: <http://www.w3.org/2000/10/swap/reason#>.\n@prefix run: <http://example.org/restproof/run#>.\n\n",
    );
    let status = match &outcome.status {
        Status::Success => "success".to_string(),
        Status::Failure(c) => format!("failure: {c}"),
    };
    s.push_str(&format!("<#run> run:status {};\n", term_to_string(&crate::n3::Term::string(status), &none)));
    let steps: Vec<String> = (1..=outcome.trace.len()).map(|i| format!("<#step{i}>")).collect();
    s.push_str(&format!("    run:steps ( {} )", steps.join(" ")));
    if let Some(g) = &outcome.goal_instance {
        s.push_str(&format!(";\n    r:gives {}", crate::n3::term_to_string_at(&crate::n3::Term::Graph(g.clone()), &none, 1)));
    }
    s.push_str(".\n");
    for (i, step) in outcome.trace.iter().enumerate() {
        let lit = |x: &str| term_to_string(&crate::n3::Term::string(x), &none);
        s.push_str(&format!("\n<#step{}> a run:ExecutedStep;\n", i + 1));
        s.push_str(&format!("    run:nPre {};\n", step.n_pre));
        s.push_str(&format!(
            "    run:request [ http:methodName {}; http:requestURI {} ];\n",
            lit(&step.request.method),
            lit(&step.request.target)
        ));
        s.push_str(&format!("    run:rule <{}>;\n", step.rule));
        s.push_str(&format!("    run:lemma {};\n", lit(&step.lemma)));
        s.push_str(&format!("    run:status {};\n", step.status));
        s.push_str(&format!("    run:received {};\n", crate::n3::term_to_string_at(&crate::n3::Term::Graph(step.received.clone()), &none, 1)));
        s.push_str(&format!("    run:nPost {};\n", step.n_post));
        s.push_str(&format!("    run:decision {}.\n", lit(&step.decision.to_string())));
    }
    s
}

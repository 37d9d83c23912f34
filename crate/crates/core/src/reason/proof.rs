use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;

use crate::n3::{term_to_string, term_to_string_at, Document, Formula, Literal, Term};

pub const REASON_NS: &str = "http://www.w3.org/2000/10/swap/reason#";
pub const REI_NS: &str = "http://www.w3.org/2004/06/rei#";

/// Index of a step inside [`Proof::steps`].
pub type StepRef = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    Proof,
    Parsing,
    Extraction,
    Conjunction,
    Inference,
}

impl StepKind {
    pub fn local_name(self) -> &'static str {
        match self {
            StepKind::Proof => "Proof",
            StepKind::Parsing => "Parsing",
            StepKind::Extraction => "Extraction",
            StepKind::Conjunction => "Conjunction",
            StepKind::Inference => "Inference",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.local_name())
    }
}

/// `var#xK` refers to the K-th variable of the rule, counted in order of first
/// occurrence through antecedent and then consequent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binding {
    pub variable: usize,
    pub value: Term,
}

impl Binding {
    pub fn key(&self) -> String {
        format!("var#x{}", self.variable)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofStep {
    pub name: String,
    pub kind: StepKind,
    /// `None` when the serialized form left it implicit.
    pub gives: Option<Formula>,
    pub source: Option<String>,
    pub because: Option<StepRef>,
    pub components: Vec<StepRef>,
    pub rule: Option<StepRef>,
    pub evidence: Vec<StepRef>,
    pub bindings: Vec<Binding>,
}

impl ProofStep {
    pub fn new(name: impl Into<String>, kind: StepKind) -> Self {
        ProofStep {
            name: name.into(),
            kind,
            gives: None,
            source: None,
            because: None,
            components: Vec::new(),
            rule: None,
            evidence: Vec::new(),
            bindings: Vec::new(),
        }
    }

    /// Every step this one points at.
    pub fn references(&self) -> impl Iterator<Item = StepRef> + '_ {
        self.components.iter().chain(&self.evidence).copied().chain(self.rule).chain(self.because)
    }
}

/// A proof graph. Steps are addressed by index; `root` is the `r:Proof` step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proof {
    pub steps: Vec<ProofStep>,
    pub root: StepRef,
    /// Next free skolem number after the proof was built.
    pub skolem_counter: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProofReadError {
    #[error("no step of kind r:Proof")]
    NoRoot,
    #[error("step {step} refers to {target}, which is not a proof step")]
    Dangling { step: String, target: String },
    #[error("step {step}: {message}")]
    Malformed { step: String, message: String },
}

impl Proof {
    pub fn root_step(&self) -> &ProofStep {
        &self.steps[self.root]
    }

    /// What the root step gives.
    pub fn conclusion(&self) -> Option<&Formula> {
        self.steps.get(self.root).and_then(|s| s.gives.as_ref())
    }

    pub fn find(&self, name: &str) -> Option<StepRef> {
        self.steps.iter().position(|s| s.name == name)
    }

    pub fn inferences(&self) -> impl Iterator<Item = (StepRef, &ProofStep)> {
        self.steps.iter().enumerate().filter(|(_, s)| s.kind == StepKind::Inference)
    }

    /// Source IRI a rule step ultimately comes from, following extractions.
    pub fn rule_origin(&self, mut step: StepRef) -> Option<&str> {
        for _ in 0..=self.steps.len() {
            let s = self.steps.get(step)?;
            match s.kind {
                StepKind::Parsing => return s.source.as_deref(),
                StepKind::Extraction => step = s.because?,
                _ => return None,
            }
        }
        None
    }

    /// Serializes in the `r:` vocabulary. With `elide_extractions`, evidence that
    /// is merely an extraction from an inference points at the inference itself.
    pub fn to_n3(&self, prefixes: &IndexMap<String, String>, elide_extractions: bool) -> String {
        let mut prefixes = prefixes.clone();
        prefixes.insert("r".into(), REASON_NS.into());
        prefixes.insert("n3".into(), REI_NS.into());
        let mut labels: Vec<_> = prefixes.iter().collect();
        labels.sort();
        let mut out = String::new();
        for (label, iri) in labels {
            out.push_str(&format!("@prefix {label}: <{iri}>.\n"));
        }

        let elided = |r: StepRef| -> StepRef {
            if !elide_extractions {
                return r;
            }
            match self.steps.get(r) {
                Some(s) if s.kind == StepKind::Extraction => match s.because {
                    Some(b) if self.steps.get(b).is_some_and(|x| x.kind == StepKind::Inference) => b,
                    _ => r,
                },
                _ => r,
            }
        };
        let mut hidden = vec![false; self.steps.len()];
        if elide_extractions {
            // an extraction disappears when nothing references it any more
            let mut used = vec![false; self.steps.len()];
            for s in &self.steps {
                for &e in &s.evidence {
                    if e < used.len() {
                        used[elided(e)] = true;
                    }
                }
                for r in s.components.iter().copied().chain(s.rule).chain(s.because) {
                    if r < used.len() {
                        used[r] = true;
                    }
                }
            }
            for i in 0..self.steps.len() {
                hidden[i] = i != self.root && elided(i) != i && !used[i];
            }
        }
        let inline = |r: StepRef| self.steps.get(r).is_some_and(|s| s.kind == StepKind::Parsing);
        let name = |r: StepRef| match self.steps.get(r) {
            Some(s) => format!("<#{}>", s.name),
            None => format!("<#missing{r}>"),
        };

        for (i, step) in self.steps.iter().enumerate() {
            if hidden[i] || (inline(i) && i != self.root) {
                continue;
            }
            out.push('\n');
            out.push_str(&name(i));
            out.push_str(" a ");
            out.push_str(match step.kind {
                StepKind::Proof => "r:Proof, r:Conjunction",
                StepKind::Parsing => "r:Parsing",
                StepKind::Extraction => "r:Extraction",
                StepKind::Conjunction => "r:Conjunction",
                StepKind::Inference => "r:Inference",
            });
            let mut props: Vec<String> = Vec::new();
            for &c in &step.components {
                props.push(format!("r:component {}", name(c)));
            }
            if let Some(source) = &step.source {
                props.push(format!("r:source <{source}>"));
            }
            if let Some(g) = &step.gives {
                props.push(format!("r:gives {}", term_to_string_at(&Term::Graph(g.clone()), &prefixes, 1)));
            }
            if !step.evidence.is_empty() {
                let refs: Vec<String> = step.evidence.iter().map(|&e| name(elided(e))).collect();
                props.push(format!("r:evidence ( {} )", refs.join(" ")));
            }
            for b in &step.bindings {
                props.push(format!(
                    "r:binding [ r:variable [ n3:uri \"{}\" ]; r:boundTo {} ]",
                    b.key(),
                    bound_value(&b.value, &prefixes)
                ));
            }
            if let Some(r) = step.rule {
                props.push(format!("r:rule {}", name(r)));
            }
            if let Some(b) = step.because {
                if inline(b) {
                    let p = &self.steps[b];
                    let src = p.source.as_deref().unwrap_or("");
                    props.push(format!("r:because [ a r:Parsing; r:source <{src}> ]"));
                } else {
                    props.push(format!("r:because {}", name(b)));
                }
            }
            for p in props {
                out.push_str(";\n    ");
                out.push_str(&p);
            }
            out.push_str(".\n");
        }
        out
    }

    /// Reads a proof written in the `r:` vocabulary. Inline parsing steps get
    /// no `gives`; the checker fills it in from the sources.
    pub fn from_document(doc: &Document) -> Result<Proof, ProofReadError> {
        let rdf_type = Term::rdf_type();
        let r = |local: &str| Term::uri(format!("{REASON_NS}{local}"));
        let kinds = [
            (r("Proof"), StepKind::Proof),
            (r("Parsing"), StepKind::Parsing),
            (r("Extraction"), StepKind::Extraction),
            (r("Conjunction"), StepKind::Conjunction),
            (r("Inference"), StepKind::Inference),
        ];

        let mut nodes: IndexMap<Term, Vec<StepKind>> = IndexMap::new();
        let mut props: HashMap<&Term, Vec<(&Term, &Term)>> = HashMap::new();
        for t in doc.body.atoms() {
            props.entry(&t.subject).or_default().push((&t.predicate, &t.object));
            if t.predicate == rdf_type {
                if let Some((_, k)) = kinds.iter().find(|(iri, _)| iri == &t.object) {
                    nodes.entry(t.subject.clone()).or_default().push(*k);
                }
            }
        }
        let index: HashMap<&Term, usize> = nodes.keys().enumerate().map(|(i, t)| (t, i)).collect();
        let node_name = |t: &Term| match t {
            Term::Uri(iri) => iri.strip_prefix('#').unwrap_or(iri).to_string(),
            other => term_to_string(other, &IndexMap::new()),
        };

        let mut steps = Vec::new();
        let mut root = None;
        for (i, (node, ks)) in nodes.iter().enumerate() {
            let name = node_name(node);
            let kind = if ks.contains(&StepKind::Proof) {
                StepKind::Proof
            } else {
                ks[0]
            };
            if kind == StepKind::Proof && root.is_none() {
                root = Some(i);
            }
            let malformed = |message: &str| ProofReadError::Malformed { step: name.clone(), message: message.into() };
            let reference = |target: &Term| -> Result<StepRef, ProofReadError> {
                index.get(target).copied().ok_or_else(|| ProofReadError::Dangling {
                    step: name.clone(),
                    target: term_to_string(target, &doc.prefixes),
                })
            };
            let mut step = ProofStep::new(name.clone(), kind);
            for &(p, o) in props.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                let Some(local) = p.as_uri().and_then(|u| u.strip_prefix(REASON_NS)) else { continue };
                match local {
                    "gives" => match o {
                        Term::Graph(f) if step.gives.is_none() => step.gives = Some(f.clone()),
                        Term::Graph(_) => return Err(malformed("more than one r:gives")),
                        _ => return Err(malformed("r:gives must be a formula")),
                    },
                    "source" => match o {
                        Term::Uri(iri) => step.source = Some(iri.to_string()),
                        _ => return Err(malformed("r:source must be an IRI")),
                    },
                    "because" => step.because = Some(reference(o)?),
                    "rule" => step.rule = Some(reference(o)?),
                    "component" => step.components.push(reference(o)?),
                    "evidence" => match o {
                        Term::List(items) => {
                            for item in items {
                                step.evidence.push(reference(item)?);
                            }
                        }
                        _ => return Err(malformed("r:evidence must be a list")),
                    },
                    "binding" => step.bindings.push(read_binding(o, &props).map_err(|m| malformed(&m))?),
                    _ => {}
                }
            }
            steps.push(step);
        }
        let root = root.ok_or(ProofReadError::NoRoot)?;
        let skolem_counter = next_skolem(&steps);
        Ok(Proof { steps, root, skolem_counter })
    }
}

fn next_skolem(steps: &[ProofStep]) -> usize {
    let mut next = 0;
    for s in steps {
        let Some(g) = &s.gives else { continue };
        g.for_each_variable(&mut |v| {
            if let Term::Existential(n) = v {
                if let Some(k) = n.strip_prefix("sk").and_then(|d| d.parse::<usize>().ok()) {
                    next = next.max(k + 1);
                }
            }
        });
    }
    next
}

fn bound_value(value: &Term, prefixes: &IndexMap<String, String>) -> String {
    match value {
        Term::Uri(iri) => format!("[ n3:uri {} ]", quote(iri)),
        Term::Existential(n) => format!("[ n3:nodeId {} ]", quote(&format!("_:{n}"))),
        Term::Universal(n) => format!("[ n3:nodeId {} ]", quote(&format!("?{n}"))),
        other => term_to_string(other, prefixes),
    }
}

fn quote(s: &str) -> String {
    term_to_string(&Term::Literal(Literal::string(s)), &IndexMap::new())
}

fn read_binding(node: &Term, props: &HashMap<&Term, Vec<(&Term, &Term)>>) -> Result<Binding, String> {
    let get = |subject: &Term, ns: &str, local: &str| -> Option<Term> {
        props.get(subject)?.iter().find_map(|(p, o)| {
            (p.as_uri().and_then(|u| u.strip_prefix(ns)) == Some(local)).then(|| (*o).clone())
        })
    };
    let var = get(node, REASON_NS, "variable").ok_or("binding without r:variable")?;
    let key = get(&var, REI_NS, "uri").ok_or("r:variable without n3:uri")?;
    let key = key.as_literal().map(|l| l.lexical.to_string()).ok_or("variable name must be a string")?;
    let variable = key
        .strip_prefix("var#x")
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| format!("unrecognized variable reference {key:?}"))?;
    let bound = get(node, REASON_NS, "boundTo").ok_or("binding without r:boundTo")?;
    let value = if let Some(uri) = get(&bound, REI_NS, "uri") {
        let text = uri.as_literal().ok_or("n3:uri must be a string")?;
        Term::uri(text.lexical.to_string())
    } else if let Some(id) = get(&bound, REI_NS, "nodeId") {
        let text = id.as_literal().ok_or("n3:nodeId must be a string")?.lexical.to_string();
        if let Some(n) = text.strip_prefix("_:") {
            Term::existential(n)
        } else if let Some(n) = text.strip_prefix('?') {
            Term::universal(n)
        } else {
            return Err(format!("unrecognized node id {text:?}"));
        }
    } else {
        bound
    };
    Ok(Binding { variable, value })
}

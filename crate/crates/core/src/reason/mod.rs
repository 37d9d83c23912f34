//! Proof construction and proof checking.

mod check;
mod engine;
mod proof;

use std::time::Duration;

use indexmap::IndexMap;

pub use check::{check_proof, count_rule_applications, CheckError, Violation};
pub use proof::{Binding, Proof, ProofReadError, ProofStep, StepKind, StepRef, REASON_NS, REI_NS};

use crate::n3::{Document, Formula, Statement, Term};

/// A parsed document together with the IRI it was read from.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceDoc {
    pub iri: String,
    pub document: Document,
}

impl SourceDoc {
    pub fn new(iri: impl Into<String>, document: Document) -> Self {
        SourceDoc { iri: iri.into(), document }
    }

    /// Parses `text` and labels it with `iri`.
    pub fn parse(iri: impl Into<String>, text: &str) -> Result<Self, crate::n3::ParseError> {
        Ok(SourceDoc { iri: iri.into(), document: crate::n3::parse_document(text, None)? })
    }
}

/// Facts and background rules the agent holds, in load order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnowledgeBase {
    pub sources: Vec<SourceDoc>,
}

impl KnowledgeBase {
    pub fn new(sources: Vec<SourceDoc>) -> Self {
        KnowledgeBase { sources }
    }

    pub fn push(&mut self, source: SourceDoc) {
        self.sources.push(source);
    }
}

/// The goal: a single implication whose consequent instances are wanted.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRule {
    pub source: String,
    pub document: Document,
    /// Index of the implication within the document body.
    pub statement: usize,
    pub antecedent: Formula,
    pub consequent: Formula,
}

impl FilterRule {
    /// Takes the only implication of `document`.
    pub fn from_document(source: impl Into<String>, document: Document) -> Result<Self, ProveError> {
        let found: Vec<_> = document
            .body
            .statements()
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_implication().map(|(a, c)| (i, a, c)))
            .collect();
        let [(statement, Term::Graph(antecedent), Term::Graph(consequent))] = found.as_slice() else {
            return Err(ProveError::InvalidInput("goal must contain exactly one implication between formulas".into()));
        };
        let rule = FilterRule {
            source: source.into(),
            statement: *statement,
            antecedent: antecedent.clone(),
            consequent: consequent.clone(),
            document: document.clone(),
        };
        let f = rule.implication();
        if !f.is_simple() || f.variables().iter().any(Term::is_existential) {
            return Err(ProveError::InvalidInput("goal must be simple and free of blank nodes".into()));
        }
        let body_vars = Formula::from_statements(rule.antecedent.statements().to_vec()).variables();
        if f.variables().iter().any(|v| !body_vars.contains(v)) {
            return Err(ProveError::InvalidInput("every goal variable must occur in its antecedent".into()));
        }
        Ok(rule)
    }

    pub fn parse(source: impl Into<String>, text: &str) -> Result<Self, ProveError> {
        let doc = crate::n3::parse_document(text, None).map_err(|e| ProveError::InvalidInput(e.to_string()))?;
        Self::from_document(source, doc)
    }

    /// The goal as a one-statement formula.
    pub fn implication(&self) -> Formula {
        Formula::from_statements(vec![Statement::Implication {
            antecedent: Term::Graph(self.antecedent.clone()),
            consequent: Term::Graph(self.consequent.clone()),
        }])
    }
}

/// Limits on a single reasoning run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Maximum number of rule applications.
    pub max_inferences: usize,
    pub max_time: Duration,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_inferences: 1_000_000, max_time: Duration::from_secs(60) }
    }
}

impl Budget {
    pub fn steps(max_inferences: usize) -> Self {
        Budget { max_inferences, ..Budget::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProveError {
    #[error("the goal cannot be derived")]
    Unprovable,
    #[error("reasoning budget exceeded after {inferences} inferences in {elapsed:?}")]
    BudgetExceeded { inferences: usize, elapsed: Duration },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Finds a proof of some instance of the goal. Rules from `kb` are tried on
/// their own first; `descriptions` are added only if that fails.
pub fn prove(kb: &KnowledgeBase, descriptions: &[SourceDoc], goal: &FilterRule, budget: Budget) -> Result<Proof, ProveError> {
    let engine = engine::Engine::new(&kb.sources, descriptions, goal, &budget)?;
    Ok(engine.prove()?.proof)
}

/// Every derivable instance of the goal consequent, sorted.
pub fn prove_all(
    kb: &KnowledgeBase,
    descriptions: &[SourceDoc],
    goal: &FilterRule,
    budget: Budget,
) -> Result<Vec<Formula>, ProveError> {
    engine::Engine::new(&kb.sources, descriptions, goal, &budget)?.prove_all()
}

/// The IRI to formula map `check_proof` needs for a reasoning run.
pub fn sources_map(kb: &KnowledgeBase, descriptions: &[SourceDoc], goal: &FilterRule) -> IndexMap<String, Formula> {
    let mut map: IndexMap<String, Formula> =
        kb.sources.iter().chain(descriptions).map(|s| (s.iri.clone(), s.document.body.clone())).collect();
    map.insert(goal.source.clone(), goal.document.body.clone());
    map
}

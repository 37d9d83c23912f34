use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use super::proof::{Proof, StepKind, StepRef};
use crate::n3::{ApplyMode, Formula, Statement, Substitution, Term};

/// One failed condition, attributed to a step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub step: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.step, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("{} violation(s), first: {}", .0.len(), .0[0])]
    Violations(Vec<Violation>),
    #[error("step {step} refers to missing step #{target}")]
    Dangling { step: String, target: StepRef },
    #[error("step {step} is part of a reference cycle")]
    Cycle { step: String },
}

impl CheckError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            CheckError::Violations(v) => v,
            _ => &[],
        }
    }
}

/// Checks every step of `proof` against the calculus. `sources` maps source
/// IRIs to the formulas parsing steps must reproduce.
pub fn check_proof(proof: &Proof, sources: &IndexMap<String, Formula>) -> Result<(), CheckError> {
    let steps = &proof.steps;
    for s in steps {
        if let Some(target) = s.references().find(|&r| r >= steps.len()) {
            return Err(CheckError::Dangling { step: s.name.clone(), target });
        }
    }
    let order = topological_order(proof)?;

    let mut violations = Vec::new();
    let mut flag = |step: StepRef, message: String| {
        violations.push(Violation { step: steps[step].name.clone(), message });
    };

    let roots: Vec<_> = (0..steps.len()).filter(|&i| steps[i].kind == StepKind::Proof).collect();
    if roots.len() != 1 {
        let at = roots.get(1).copied().unwrap_or(proof.root.min(steps.len().saturating_sub(1)));
        if !steps.is_empty() {
            flag(at, format!("expected exactly one r:Proof step, found {}", roots.len()));
        }
    }
    if steps.get(proof.root).is_some_and(|s| s.kind != StepKind::Proof) {
        flag(proof.root, "root step is not of kind r:Proof".into());
    }

    // effective gives, resolved in dependency order
    let mut gives: Vec<Option<Formula>> = vec![None; steps.len()];
    let mut introduced: HashMap<Term, StepRef> = HashMap::new();
    let mut ancestors: Vec<BTreeSet<StepRef>> = vec![BTreeSet::new(); steps.len()];

    for &i in &order {
        let s = &steps[i];
        for r in s.evidence.iter().chain(&s.components).chain(&s.because) {
            let mut a = ancestors[*r].clone();
            a.insert(*r);
            ancestors[i].extend(a);
        }
        check_fields(i, proof, &mut flag);
        let effective = match s.kind {
            StepKind::Parsing => {
                let source = s.source.as_deref().and_then(|iri| sources.get(iri));
                match (source, &s.gives) {
                    (Some(body), Some(g)) => {
                        if g != body {
                            flag(i, "gives differs from the parsed source".into());
                        }
                        Some(g.clone())
                    }
                    (Some(body), None) => Some(body.clone()),
                    (None, g) => {
                        flag(i, format!("unknown source {:?}", s.source.as_deref().unwrap_or("")));
                        g.clone()
                    }
                }
            }
            StepKind::Extraction => {
                let from = s.because.and_then(|b| gives[b].as_ref());
                let g = match (&s.gives, from) {
                    (Some(g), _) => Some(g.clone()),
                    (None, Some(f)) if f.len() == 1 => Some(f.clone()),
                    (None, _) => {
                        flag(i, "gives is missing and cannot be inferred".into());
                        None
                    }
                };
                if let (Some(g), Some(f)) = (&g, from) {
                    if g.is_empty() {
                        flag(i, "extraction gives nothing".into());
                    } else if !g.is_subconjunction_of(f) {
                        flag(i, "gives is not a subconjunction of its r:because".into());
                    }
                }
                g
            }
            StepKind::Proof | StepKind::Conjunction => {
                let mut all = Formula::new();
                let mut complete = true;
                for &c in &s.components {
                    match &gives[c] {
                        Some(g) => all.extend(g),
                        None => complete = false,
                    }
                }
                match &s.gives {
                    Some(g) => {
                        if complete && g != &all {
                            flag(i, "gives is not the conjunction of its components".into());
                        }
                        Some(g.clone())
                    }
                    None => {
                        flag(i, "gives is missing".into());
                        complete.then_some(all)
                    }
                }
            }
            StepKind::Inference => {
                check_inference(i, proof, &gives, &ancestors[i], &mut introduced, &mut flag);
                if s.gives.is_none() {
                    flag(i, "gives is missing".into());
                }
                s.gives.clone()
            }
        };
        gives[i] = effective;
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(CheckError::Violations(violations))
    }
}

fn check_fields(i: StepRef, proof: &Proof, flag: &mut impl FnMut(StepRef, String)) {
    let s = &proof.steps[i];
    let mut extra = Vec::new();
    let allowed: &[&str] = match s.kind {
        StepKind::Proof | StepKind::Conjunction => &["components"],
        StepKind::Parsing => &["source"],
        StepKind::Extraction => &["because"],
        StepKind::Inference => &["rule", "evidence", "bindings"],
    };
    let present = [
        ("source", s.source.is_some()),
        ("because", s.because.is_some()),
        ("components", !s.components.is_empty()),
        ("rule", s.rule.is_some()),
        ("evidence", !s.evidence.is_empty()),
        ("bindings", !s.bindings.is_empty()),
    ];
    for (field, set) in present {
        if set && !allowed.contains(&field) {
            extra.push(field);
        }
    }
    if !extra.is_empty() {
        flag(i, format!("fields not allowed for r:{}: {}", s.kind, extra.join(", ")));
    }
    let missing = match s.kind {
        StepKind::Proof | StepKind::Conjunction if s.components.is_empty() => Some("r:component"),
        StepKind::Parsing if s.source.is_none() => Some("r:source"),
        StepKind::Extraction if s.because.is_none() => Some("r:because"),
        StepKind::Inference if s.rule.is_none() => Some("r:rule"),
        _ => None,
    };
    if let Some(m) = missing {
        flag(i, format!("missing {m}"));
    }
}

fn check_inference(
    i: StepRef,
    proof: &Proof,
    gives: &[Option<Formula>],
    ancestors: &BTreeSet<StepRef>,
    introduced: &mut HashMap<Term, StepRef>,
    flag: &mut impl FnMut(StepRef, String),
) {
    let s = &proof.steps[i];
    let Some(rule_ref) = s.rule else { return };
    let Some(rule) = &gives[rule_ref] else {
        flag(i, "rule step gives nothing".into());
        return;
    };
    let (antecedent, consequent) = match rule.statements() {
        [Statement::Implication { antecedent, consequent }] => (antecedent, consequent),
        _ => {
            flag(i, "rule step does not give exactly one implication".into());
            return;
        }
    };
    let (Term::Graph(ante), Term::Graph(cons)) = (antecedent, consequent) else {
        flag(i, "rule with a false side cannot be applied".into());
        return;
    };
    let implication = Formula::from_statements(rule.statements().to_vec());
    let variables = implication.variables();

    let mut sigma = Substitution::new();
    let mut seen = HashSet::new();
    for b in &s.bindings {
        let Some(var) = variables.get(b.variable) else {
            flag(i, format!("{} is not a variable of the rule", b.key()));
            continue;
        };
        if !seen.insert(b.variable) {
            flag(i, format!("{} is bound twice", b.key()));
            continue;
        }
        if let Err(e) = sigma.insert(var.clone(), b.value.clone()) {
            flag(i, e.to_string());
        }
    }

    let a_sigma = ante.apply(&sigma, ApplyMode::Total);
    let c_sigma = cons.apply(&sigma, ApplyMode::Total);
    if s.evidence.len() != a_sigma.len() {
        flag(i, format!("{} evidence step(s) for {} antecedent conjunct(s)", s.evidence.len(), a_sigma.len()));
    }
    for (k, (statement, &e)) in a_sigma.statements().iter().zip(&s.evidence).enumerate() {
        match &gives[e] {
            Some(g) if g.contains(statement) => {}
            Some(_) => flag(i, format!("antecedent conjunct {k} is not given by its evidence {}", proof.steps[e].name)),
            None => flag(i, format!("evidence {} gives nothing", proof.steps[e].name)),
        }
    }
    match &s.gives {
        Some(g) if g != &c_sigma => flag(i, "gives is not the instantiated consequent".into()),
        _ => {}
    }
    if !c_sigma.is_universal_free() {
        flag(i, "instantiated consequent contains universal variables".into());
    }

    // head existentials must become fresh existentials
    let ante_vars: HashSet<Term> = Formula::from_statements(ante.statements().to_vec()).variables().into_iter().collect();
    let mut fresh = HashSet::new();
    for var in variables.iter().filter(|v| v.is_existential() && !ante_vars.contains(v)) {
        let Some(value) = sigma.get(var) else {
            flag(i, format!("head existential {var} is not bound"));
            continue;
        };
        if !value.is_existential() {
            flag(i, format!("head existential {var} is bound to {value}, not a fresh existential"));
            continue;
        }
        if !fresh.insert(value.clone()) {
            flag(i, format!("{value} is introduced twice"));
        }
        if mentions(&a_sigma, value) {
            flag(i, format!("{value} already occurs in the instantiated antecedent"));
        }
        if let Some(&a) = ancestors.iter().find(|&&a| gives[a].as_ref().is_some_and(|g| mentions(g, value))) {
            flag(i, format!("{value} is not fresh: it occurs in {}", proof.steps[a].name));
        }
        if let Some(&other) = introduced.get(value) {
            flag(i, format!("{value} was already introduced by {}", proof.steps[other].name));
        } else {
            introduced.insert(value.clone(), i);
        }
    }
}

fn mentions(f: &Formula, term: &Term) -> bool {
    let mut found = false;
    f.for_each_variable(&mut |v| found |= v == term);
    found
}

/// Dependencies before dependents; fails on cycles.
fn topological_order(proof: &Proof) -> Result<Vec<StepRef>, CheckError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = proof.steps.len();
    let mut mark = vec![Mark::New; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        let mut stack: Vec<(StepRef, Vec<StepRef>)> = vec![(start, proof.steps[start].references().collect())];
        mark[start] = Mark::Open;
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match mark[next] {
                    Mark::New => {
                        mark[next] = Mark::Open;
                        let refs = proof.steps[next].references().collect();
                        stack.push((next, refs));
                    }
                    Mark::Open => return Err(CheckError::Cycle { step: proof.steps[next].name.clone() }),
                    Mark::Done => {}
                },
                None => {
                    mark[*node] = Mark::Done;
                    order.push(*node);
                    stack.pop();
                }
            }
        }
    }
    Ok(order)
}

/// Number of distinct inference steps whose rule comes from one of `rules`.
pub fn count_rule_applications<S: AsRef<str>>(proof: &Proof, rules: &[S]) -> usize {
    proof
        .inferences()
        .filter(|(_, s)| {
            s.rule
                .and_then(|r| proof.rule_origin(r))
                .is_some_and(|origin| rules.iter().any(|x| x.as_ref() == origin))
        })
        .count()
}

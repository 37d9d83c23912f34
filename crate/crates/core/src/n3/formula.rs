//! Conjunctions, their components, substitutions and classification.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use super::term::{Statement, Term, Triple};

/// A conjunction of atomic formulas and implications.
///
/// Equality, ordering and hashing treat the conjunction as a multiset, while
/// the stored order is kept for serialization.
#[derive(Clone, Debug, Default)]
pub struct Formula {
    statements: Vec<Statement>,
}

impl Formula {
    pub fn new() -> Self {
        Formula::default()
    }

    pub fn from_statements(statements: Vec<Statement>) -> Self {
        Formula { statements }
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        Formula { statements: triples.into_iter().map(Statement::Triple).collect() }
    }

    pub fn push(&mut self, statement: impl Into<Statement>) {
        self.statements.push(statement.into());
    }

    pub fn extend(&mut self, other: &Formula) {
        self.statements.extend(other.statements.iter().cloned());
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn into_statements(self) -> Vec<Statement> {
        self.statements
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Triple> {
        self.statements.iter().filter_map(Statement::as_triple)
    }

    pub fn implications(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.statements.iter().filter_map(Statement::as_implication)
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_ground(&self) -> bool {
        let mut ground = true;
        self.for_each_variable(&mut |_| ground = false);
        ground
    }

    pub fn is_universal_free(&self) -> bool {
        let mut free = true;
        self.for_each_variable(&mut |v| free &= !v.is_universal());
        free
    }

    /// Simple iff no component of level three or deeper exists.
    pub fn is_simple(&self) -> bool {
        self.components(3).is_empty()
    }

    pub fn classify(&self) -> Classification {
        Classification {
            ground: self.is_ground(),
            universal_free: self.is_universal_free(),
            simple: self.is_simple(),
        }
    }

    pub fn for_each_variable<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        for s in &self.statements {
            s.for_each_variable(visit);
        }
    }

    /// Distinct variables at any depth, in order of first occurrence.
    pub fn variables(&self) -> Vec<Term> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.for_each_variable(&mut |v| {
            if seen.insert(v) {
                out.push(v.clone());
            }
        });
        out
    }

    /// Direct components (level one).
    fn direct_components(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for s in &self.statements {
            match s {
                Statement::Triple(t) => {
                    for term in t.terms() {
                        flatten_lists(term, &mut out);
                    }
                }
                Statement::Implication { antecedent, consequent } => {
                    out.insert(antecedent.clone());
                    out.insert(consequent.clone());
                }
            }
        }
        out
    }

    /// Components of the given level; level one are the direct components.
    pub fn components(&self, level: usize) -> BTreeSet<Term> {
        assert!(level >= 1, "component levels start at 1");
        let direct = self.direct_components();
        if level == 1 {
            return direct;
        }
        let mut out = BTreeSet::new();
        for term in &direct {
            if let Term::Graph(inner) = term {
                out.extend(inner.components(level - 1));
            }
        }
        out
    }

    pub fn apply(&self, substitution: &Substitution, mode: ApplyMode) -> Formula {
        if substitution.is_empty() {
            return self.clone();
        }
        let statements = self
            .statements
            .iter()
            .map(|s| match s {
                Statement::Triple(t) => {
                    Statement::Triple(t.map_terms(|x| substitution.apply_term(x, mode)))
                }
                Statement::Implication { antecedent, consequent } => match mode {
                    // the components of an implication are its two formula expressions
                    ApplyMode::Component => s.clone(),
                    ApplyMode::Total => Statement::Implication {
                        antecedent: substitution.apply_term(antecedent, mode),
                        consequent: substitution.apply_term(consequent, mode),
                    },
                },
            })
            .collect();
        Formula { statements }
    }

    /// True when every statement of `self` occurs in `other` at least as often.
    pub fn is_subconjunction_of(&self, other: &Formula) -> bool {
        let mut counts: HashMap<&Statement, usize> = HashMap::new();
        for s in &other.statements {
            *counts.entry(s).or_default() += 1;
        }
        self.statements.iter().all(|s| match counts.get_mut(s) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
    }

    pub fn contains(&self, statement: &Statement) -> bool {
        self.statements.contains(statement)
    }

    fn sorted(&self) -> Vec<&Statement> {
        let mut v: Vec<&Statement> = self.statements.iter().collect();
        v.sort();
        v
    }

    /// Equality up to a consistent, bijective renaming of variables.
    pub fn alpha_equivalent(&self, other: &Formula) -> bool {
        if self.statements.len() != other.statements.len() {
            return false;
        }
        let mut renaming = Renaming::default();
        let mut used = vec![false; other.statements.len()];
        match_statements(&self.statements, &other.statements, &mut used, &mut renaming)
    }
}

fn flatten_lists(term: &Term, out: &mut BTreeSet<Term>) {
    match term {
        Term::List(items) => items.iter().for_each(|t| flatten_lists(t, out)),
        other => {
            out.insert(other.clone());
        }
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.statements.len() == other.statements.len() && self.sorted() == other.sorted()
    }
}

impl Eq for Formula {}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Formula {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sorted().cmp(&other.sorted())
    }
}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.sorted().hash(state);
    }
}

impl FromIterator<Statement> for Formula {
    fn from_iter<I: IntoIterator<Item = Statement>>(iter: I) -> Self {
        Formula { statements: iter.into_iter().collect() }
    }
}

/// The three syntactic classes a formula may belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub ground: bool,
    pub universal_free: bool,
    pub simple: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyMode {
    /// Replace direct components only.
    Component,
    /// Replace at every nesting depth.
    Total,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SubstitutionError {
    #[error("substitution key {0} is not a variable")]
    NotAVariable(Term),
    #[error("variable {0} may not be mapped to itself")]
    Identity(Term),
    #[error("variable {0} is bound twice")]
    Duplicate(Term),
}

/// A finite map from variables to expressions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    pairs: BTreeMap<Term, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn insert(&mut self, variable: Term, value: Term) -> Result<(), SubstitutionError> {
        if !variable.is_variable() {
            return Err(SubstitutionError::NotAVariable(variable));
        }
        if variable == value {
            return Err(SubstitutionError::Identity(variable));
        }
        if self.pairs.contains_key(&variable) {
            return Err(SubstitutionError::Duplicate(variable));
        }
        self.pairs.insert(variable, value);
        Ok(())
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (Term, Term)>,
    ) -> Result<Self, SubstitutionError> {
        let mut s = Substitution::new();
        for (k, v) in pairs {
            s.insert(k, v)?;
        }
        Ok(s)
    }

    pub fn get(&self, variable: &Term) -> Option<&Term> {
        self.pairs.get(variable)
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.pairs.iter()
    }

    pub fn apply_term(&self, term: &Term, mode: ApplyMode) -> Term {
        match term {
            Term::Existential(_) | Term::Universal(_) => {
                self.pairs.get(term).cloned().unwrap_or_else(|| term.clone())
            }
            // list members are direct components
            Term::List(items) => Term::List(items.iter().map(|t| self.apply_term(t, mode)).collect()),
            Term::Graph(f) if mode == ApplyMode::Total => Term::Graph(f.apply(self, mode)),
            other => other.clone(),
        }
    }

    pub fn apply_triple(&self, triple: &Triple, mode: ApplyMode) -> Triple {
        triple.map_terms(|t| self.apply_term(t, mode))
    }
}

#[derive(Default, Clone)]
struct Renaming {
    forward: HashMap<Term, Term>,
    backward: HashMap<Term, Term>,
}

impl Renaming {
    fn bind(&mut self, a: &Term, b: &Term) -> bool {
        match (self.forward.get(a), self.backward.get(b)) {
            (Some(x), Some(y)) => x == b && y == a,
            (None, None) => {
                self.forward.insert(a.clone(), b.clone());
                self.backward.insert(b.clone(), a.clone());
                true
            }
            _ => false,
        }
    }
}

fn match_statements(
    left: &[Statement],
    right: &[Statement],
    used: &mut [bool],
    renaming: &mut Renaming,
) -> bool {
    let Some((first, rest)) = left.split_first() else { return true };
    for (i, candidate) in right.iter().enumerate() {
        if used[i] {
            continue;
        }
        let mut attempt = renaming.clone();
        if match_statement(first, candidate, &mut attempt) {
            used[i] = true;
            if match_statements(rest, right, used, &mut attempt) {
                *renaming = attempt;
                return true;
            }
            used[i] = false;
        }
    }
    false
}

fn match_statement(a: &Statement, b: &Statement, r: &mut Renaming) -> bool {
    match (a, b) {
        (Statement::Triple(x), Statement::Triple(y)) => {
            match_term(&x.subject, &y.subject, r)
                && match_term(&x.predicate, &y.predicate, r)
                && match_term(&x.object, &y.object, r)
        }
        (
            Statement::Implication { antecedent: a1, consequent: c1 },
            Statement::Implication { antecedent: a2, consequent: c2 },
        ) => match_term(a1, a2, r) && match_term(c1, c2, r),
        _ => false,
    }
}

fn match_term(a: &Term, b: &Term, r: &mut Renaming) -> bool {
    match (a, b) {
        (Term::Universal(_), Term::Universal(_)) | (Term::Existential(_), Term::Existential(_)) => {
            r.bind(a, b)
        }
        (Term::List(x), Term::List(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| match_term(p, q, r))
        }
        (Term::Graph(f), Term::Graph(g)) => {
            if f.len() != g.len() {
                return false;
            }
            let mut used = vec![false; g.len()];
            match_statements(f.statements(), g.statements(), &mut used, r)
        }
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::n3::parse_document;

    fn body(text: &str) -> Formula {
        let prefixed = format!("@prefix : <http://ex.org/>.\n{text}");
        parse_document(&prefixed, None).unwrap().body
    }

    fn ex(local: &str) -> Term {
        Term::uri(format!("http://ex.org/{local}"))
    }

    #[test]
    fn components_of_nested_statement() {
        let f = body(":John :says {:Kurt :knows :Albert.}.");
        let level1 = f.components(1);
        assert_eq!(level1.len(), 3);
        assert!(level1.contains(&ex("John")));
        assert!(level1.contains(&ex("says")));
        assert!(level1.iter().any(|t| matches!(t, Term::Graph(_))));
        let level2: Vec<_> = f.components(2).into_iter().collect();
        assert_eq!(level2, {
            let mut v = vec![ex("Kurt"), ex("knows"), ex("Albert")];
            v.sort();
            v
        });
        assert!(f.components(3).is_empty());
    }

    #[test]
    fn lists_are_flattened_into_direct_components() {
        let f = body(":a :p (:b (:c :d)).");
        let level1 = f.components(1);
        assert!(level1.contains(&ex("c")));
        assert!(level1.contains(&ex("d")));
        assert!(!level1.iter().any(|t| matches!(t, Term::List(_))));
    }

    #[test]
    fn ground_atom_has_no_third_level() {
        assert!(body(":a :b :c.").components(3).is_empty());
    }

    #[test]
    fn component_application_leaves_nested_variables() {
        let f = body("_:x :says {_:x :knows :Albert.}.");
        let s = Substitution::from_pairs([(Term::existential("x"), ex("Kurt"))]).unwrap();
        assert_eq!(f.apply(&s, ApplyMode::Component), body(":Kurt :says {_:x :knows :Albert.}."));
    }

    #[test]
    fn total_application_replaces_every_occurrence() {
        let f = body("?x :says {?x :knows :Albert.}.");
        let s = Substitution::from_pairs([(Term::universal("x"), ex("Kurt"))]).unwrap();
        assert_eq!(f.apply(&s, ApplyMode::Total), body(":Kurt :says {:Kurt :knows :Albert.}."));
    }

    #[test]
    fn empty_substitution_is_identity() {
        let f = body("?x :says {?x :knows _:y.}.");
        let s = Substitution::new();
        assert_eq!(f.apply(&s, ApplyMode::Component), f);
        assert_eq!(f.apply(&s, ApplyMode::Total), f);
    }

    #[test]
    fn substitution_rejects_bad_pairs() {
        let mut s = Substitution::new();
        assert_eq!(s.insert(ex("a"), ex("b")), Err(SubstitutionError::NotAVariable(ex("a"))));
        let x = Term::universal("x");
        assert_eq!(s.insert(x.clone(), x.clone()), Err(SubstitutionError::Identity(x.clone())));
        s.insert(x.clone(), ex("a")).unwrap();
        assert_eq!(s.insert(x.clone(), ex("b")), Err(SubstitutionError::Duplicate(x)));
    }

    #[test]
    fn nested_implication_is_not_simple() {
        let f = body("{{?x :p :a.} => {?x :q :b.}.} => {{?x :r :c.} => {?x :s :d.}.}.");
        assert!(!f.is_simple());
        assert!(f.components(3).contains(&ex("p")));
        assert!(body("{?x :p :a.} => {?x :q :b.}.").is_simple());
    }

    #[test]
    fn conjunction_equality_is_order_insensitive() {
        assert_eq!(body(":a :b :c. :d :e :f."), body(":d :e :f. :a :b :c."));
        assert_ne!(body(":a :b :c. :a :b :c."), body(":a :b :c."));
    }

    #[test]
    fn alpha_equivalence_renames_consistently() {
        assert!(body("?x :p _:y. _:y :q ?x.").alpha_equivalent(&body("?a :p _:b. _:b :q ?a.")));
        assert!(!body("?x :p _:y. _:y :q ?x.").alpha_equivalent(&body("?a :p _:b. _:b :q ?c.")));
        assert!(!body("?x :p ?x.").alpha_equivalent(&body("_:x :p _:x.")));
    }
}

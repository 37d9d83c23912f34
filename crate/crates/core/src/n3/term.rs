use std::fmt;
use std::sync::Arc;

use super::formula::Formula;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";

/// A literal: lexical form plus an optional datatype IRI.
///
/// Equality is purely lexical, so `80.0` and `80.00` are different literals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub lexical: Arc<str>,
    pub datatype: Option<Arc<str>>,
}

impl Literal {
    pub fn string(lexical: impl Into<Arc<str>>) -> Self {
        Literal { lexical: lexical.into(), datatype: None }
    }

    pub fn typed(lexical: impl Into<Arc<str>>, datatype: impl Into<Arc<str>>) -> Self {
        Literal { lexical: lexical.into(), datatype: Some(datatype.into()) }
    }

    /// True when the literal can be written as a bare numeric token.
    pub fn is_bare_numeric(&self) -> bool {
        match self.datatype.as_deref() {
            Some(XSD_INTEGER) => is_integer_token(&self.lexical),
            Some(XSD_DECIMAL) => is_decimal_token(&self.lexical),
            Some(XSD_DOUBLE) => is_double_token(&self.lexical),
            _ => false,
        }
    }
}

fn split_sign(s: &str) -> &str {
    s.strip_prefix(['+', '-']).unwrap_or(s)
}

pub(crate) fn is_integer_token(s: &str) -> bool {
    let s = split_sign(s);
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn is_decimal_token(s: &str) -> bool {
    let s = split_sign(s);
    match s.split_once('.') {
        Some((int, frac)) => {
            int.bytes().all(|b| b.is_ascii_digit())
                && !frac.is_empty()
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

pub(crate) fn is_double_token(s: &str) -> bool {
    let s = split_sign(s);
    let Some(pos) = s.find(['e', 'E']) else { return false };
    let (mantissa, exp) = (&s[..pos], &s[pos + 1..]);
    let mantissa_ok = is_integer_token(mantissa)
        || is_decimal_token(mantissa)
        || (mantissa.ends_with('.') && is_integer_token(&mantissa[..mantissa.len() - 1]));
    mantissa_ok && is_integer_token(exp)
}

/// A node of the N3 syntax tree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// An IRI. Relative IRIs are kept verbatim unless a base was supplied.
    Uri(Arc<str>),
    Literal(Literal),
    /// `_:name`
    Existential(Arc<str>),
    /// `?name`
    Universal(Arc<str>),
    List(Vec<Term>),
    /// `{ ... }`, possibly empty.
    Graph(Formula),
    False,
}

impl Term {
    pub fn uri(iri: impl Into<Arc<str>>) -> Self {
        Term::Uri(iri.into())
    }

    pub fn existential(name: impl Into<Arc<str>>) -> Self {
        Term::Existential(name.into())
    }

    pub fn universal(name: impl Into<Arc<str>>) -> Self {
        Term::Universal(name.into())
    }

    pub fn string(lexical: impl Into<Arc<str>>) -> Self {
        Term::Literal(Literal::string(lexical))
    }

    pub fn rdf_type() -> Self {
        Term::uri(RDF_TYPE)
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Existential(_) | Term::Universal(_))
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Term::Universal(_))
    }

    pub fn is_existential(&self) -> bool {
        matches!(self, Term::Existential(_))
    }

    /// Formula expressions: `{...}` and `false`.
    pub fn is_formula_expression(&self) -> bool {
        matches!(self, Term::Graph(_) | Term::False)
    }

    pub fn as_uri(&self) -> Option<&str> {
        match self {
            Term::Uri(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }

    /// No variable at any nesting depth.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Existential(_) | Term::Universal(_) => false,
            Term::List(items) => items.iter().all(Term::is_ground),
            Term::Graph(f) => f.is_ground(),
            _ => true,
        }
    }

    pub fn is_universal_free(&self) -> bool {
        match self {
            Term::Universal(_) => false,
            Term::List(items) => items.iter().all(Term::is_universal_free),
            Term::Graph(f) => f.is_universal_free(),
            _ => true,
        }
    }

    /// Visits every variable at any depth, in textual order.
    pub fn for_each_variable<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        match self {
            Term::Existential(_) | Term::Universal(_) => visit(self),
            Term::List(items) => items.iter().for_each(|t| t.for_each_variable(visit)),
            Term::Graph(f) => f.for_each_variable(visit),
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefixes = indexmap::IndexMap::new();
        f.write_str(&super::serialize::term_to_string(self, &prefixes))
    }
}

/// An atomic formula `s p o.`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple { subject, predicate, object }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn is_ground(&self) -> bool {
        self.terms().iter().all(|t| t.is_ground())
    }

    pub fn is_universal_free(&self) -> bool {
        self.terms().iter().all(|t| t.is_universal_free())
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Triple {
        Triple::new(f(&self.subject), f(&self.predicate), f(&self.object))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}.", self.subject, self.predicate, self.object)
    }
}

/// One member of a conjunction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Statement {
    Triple(Triple),
    /// `t1 => t2.` where both sides are formula expressions.
    Implication { antecedent: Term, consequent: Term },
}

impl Statement {
    pub fn as_triple(&self) -> Option<&Triple> {
        match self {
            Statement::Triple(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_implication(&self) -> Option<(&Term, &Term)> {
        match self {
            Statement::Implication { antecedent, consequent } => Some((antecedent, consequent)),
            _ => None,
        }
    }

    pub fn for_each_variable<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        match self {
            Statement::Triple(t) => t.terms().iter().for_each(|x| x.for_each_variable(visit)),
            Statement::Implication { antecedent, consequent } => {
                antecedent.for_each_variable(visit);
                consequent.for_each_variable(visit);
            }
        }
    }
}

impl From<Triple> for Statement {
    fn from(t: Triple) -> Self {
        Statement::Triple(t)
    }
}

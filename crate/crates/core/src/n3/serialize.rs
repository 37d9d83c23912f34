use indexmap::IndexMap;

use super::term::{Literal, Statement, Term, RDF_TYPE};
use super::{Document, Formula};

const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

/// Writes a document: sorted prefix declarations, then one statement per line.
pub fn serialize(doc: &Document) -> String {
    let mut out = String::new();
    let mut labels: Vec<_> = doc.prefixes.iter().collect();
    labels.sort();
    for (label, iri) in labels {
        out.push_str(&format!("@prefix {label}: <{iri}>.\n"));
    }
    if let Some(base) = &doc.base {
        out.push_str(&format!("@base <{base}>.\n"));
    }
    if !out.is_empty() && !doc.body.is_empty() {
        out.push('\n');
    }
    out.push_str(&formula_to_string(&doc.body, &doc.prefixes));
    out
}

/// The statements of a formula, one per line, each terminated by a dot.
pub fn formula_to_string(formula: &Formula, prefixes: &IndexMap<String, String>) -> String {
    let w = Writer { prefixes };
    let mut out = String::new();
    for s in formula.statements() {
        w.statement(s, 0, &mut out);
        out.push_str(".\n");
    }
    out
}

/// One statement without the trailing dot.
pub fn statement_to_string(statement: &Statement, prefixes: &IndexMap<String, String>) -> String {
    let mut out = String::new();
    Writer { prefixes }.statement(statement, 0, &mut out);
    out
}

pub fn term_to_string(term: &Term, prefixes: &IndexMap<String, String>) -> String {
    term_to_string_at(term, prefixes, 0)
}

/// Like [`term_to_string`], with graph contents indented one level past `indent`.
pub fn term_to_string_at(term: &Term, prefixes: &IndexMap<String, String>, indent: usize) -> String {
    let mut out = String::new();
    Writer { prefixes }.term(term, indent, &mut out);
    out
}

struct Writer<'a> {
    prefixes: &'a IndexMap<String, String>,
}

impl Writer<'_> {
    fn statement(&self, s: &Statement, indent: usize, out: &mut String) {
        match s {
            Statement::Triple(t) => {
                self.term(&t.subject, indent, out);
                out.push(' ');
                if t.predicate.as_uri() == Some(RDF_TYPE) {
                    out.push('a');
                } else {
                    self.term(&t.predicate, indent, out);
                }
                out.push(' ');
                self.term(&t.object, indent, out);
            }
            Statement::Implication { antecedent, consequent } => {
                self.term(antecedent, indent, out);
                out.push_str(" => ");
                self.term(consequent, indent, out);
            }
        }
    }

    fn term(&self, t: &Term, indent: usize, out: &mut String) {
        match t {
            Term::Uri(iri) => out.push_str(&self.iri(iri)),
            Term::Literal(l) => self.literal(l, out),
            Term::Existential(n) => {
                out.push_str("_:");
                out.push_str(n);
            }
            Term::Universal(n) => {
                out.push('?');
                out.push_str(n);
            }
            Term::List(items) => {
                out.push('(');
                for item in items {
                    out.push(' ');
                    self.term(item, indent, out);
                }
                out.push_str(" )");
            }
            Term::Graph(f) if f.is_empty() => out.push_str("{ }"),
            Term::Graph(f) => {
                out.push_str("{\n");
                for s in f.statements() {
                    push_indent(indent + 1, out);
                    self.statement(s, indent + 1, out);
                    out.push_str(".\n");
                }
                push_indent(indent, out);
                out.push('}');
            }
            Term::False => out.push_str("false"),
        }
    }

    fn iri(&self, iri: &str) -> String {
        let best = self
            .prefixes
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .filter(|(_, ns)| is_local_name(&iri[ns.len()..]))
            .max_by_key(|(_, ns)| ns.len());
        match best {
            Some((label, ns)) => format!("{label}:{}", &iri[ns.len()..]),
            None => format!("<{iri}>"),
        }
    }

    fn literal(&self, l: &Literal, out: &mut String) {
        if l.is_bare_numeric() || (l.datatype.as_deref() == Some(XSD_BOOLEAN) && &*l.lexical == "true") {
            out.push_str(&l.lexical);
            return;
        }
        out.push('"');
        for c in l.lexical.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('"');
        if let Some(dt) = &l.datatype {
            out.push_str("^^");
            out.push_str(&self.iri(dt));
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Whether `s` can be written after `prefix:` and lexed back unchanged.
fn is_local_name(s: &str) -> bool {
    s.chars().all(|c| is_name_char(c) || c == '.') && !s.ends_with('.') && !s.starts_with('.') && !s.contains("..")
}

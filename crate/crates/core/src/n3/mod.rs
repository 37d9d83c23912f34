//! The N3 subset: terms, formulas, parsing and serialization.

mod formula;
mod lexer;
mod parser;
mod serialize;
mod term;

use indexmap::IndexMap;

pub use formula::{ApplyMode, Classification, Formula, Substitution, SubstitutionError};
pub use lexer::Position;
pub use parser::parse_document;
pub use serialize::{formula_to_string, serialize, statement_to_string, term_to_string, term_to_string_at};
pub use term::{Literal, Statement, Term, Triple, RDF_TYPE, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: unexpected input {found:?}")]
    Lex { pos: Position, found: String },
    #[error("{pos}: expected {expected}, found {found}")]
    Unexpected { pos: Position, found: String, expected: String },
    #[error("{pos}: unknown prefix {prefix:?}")]
    UnresolvedPrefix { pos: Position, prefix: String },
    #[error("{pos}: unterminated {what}")]
    Unterminated { pos: Position, what: &'static str },
    #[error("{pos}: {message}")]
    Invalid { pos: Position, message: String },
}

/// A parsed N3 file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub prefixes: IndexMap<String, String>,
    pub base: Option<String>,
    pub body: Formula,
}

impl Document {
    pub fn new(body: Formula) -> Self {
        Document { body, ..Document::default() }
    }

    pub fn with_prefixes<'a>(mut self, prefixes: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        for (label, iri) in prefixes {
            self.prefixes.insert(label.to_string(), iri.to_string());
        }
        self
    }
}

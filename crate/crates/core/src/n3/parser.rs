use std::collections::HashSet;

use indexmap::IndexMap;

use super::lexer::{Lexer, Position, Token};
use super::term::{Literal, Statement, Term, Triple};
use super::{Document, Formula, ParseError};

const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

/// Parses the supported N3 subset, expanding every syntactic shortcut.
///
/// Relative IRIs are resolved only when `base` (or an `@base` directive) is
/// present; otherwise they are kept as written.
pub fn parse_document(text: &str, base: Option<&str>) -> Result<Document, ParseError> {
    let tokens = Lexer::new(text).tokenize()?;
    let used_blank_names = tokens
        .iter()
        .filter_map(|(t, _)| match t {
            Token::BlankLabel(name) => Some(name.clone()),
            _ => None,
        })
        .collect();
    let end = tokens.last().map(|(_, p)| *p).unwrap_or_default();
    let mut parser = Parser {
        tokens,
        index: 0,
        end,
        prefixes: IndexMap::new(),
        base: base.map(str::to_string),
        used_blank_names,
        next_blank: 0,
    };
    let mut statements = Vec::new();
    while !parser.at_end() {
        parser.directive_or_statement(&mut statements)?;
    }
    Ok(Document {
        prefixes: parser.prefixes,
        base: parser.base,
        body: Formula::from_statements(statements),
    })
}

struct Parser {
    tokens: Vec<(Token, Position)>,
    index: usize,
    end: Position,
    prefixes: IndexMap<String, String>,
    base: Option<String>,
    used_blank_names: HashSet<String>,
    next_blank: usize,
}

enum Verb {
    Predicate(Term),
    Implies,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.index >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index).map(|(t, _)| t)
    }

    fn pos(&self) -> Position {
        self.tokens.get(self.index).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Token, Position)> {
        let t = self.tokens.get(self.index).cloned();
        self.index += 1;
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.index) {
            Some((t, p)) => ParseError::Unexpected { pos: *p, found: t.to_string(), expected: expected.into() },
            None => ParseError::Unexpected { pos: self.end, found: "end of input".into(), expected: expected.into() },
        }
    }

    fn expect(&mut self, token: &Token, expected: &str) -> Result<(), ParseError> {
        if self.peek() == Some(token) {
            self.index += 1;
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn fresh_blank(&mut self) -> Term {
        loop {
            let name = format!("b{}", self.next_blank);
            self.next_blank += 1;
            if !self.used_blank_names.contains(&name) {
                return Term::existential(name);
            }
        }
    }

    fn resolve(&self, iri: &str, pos: Position) -> Result<String, ParseError> {
        let Some(base) = &self.base else { return Ok(iri.to_string()) };
        let base = url::Url::parse(base)
            .map_err(|e| ParseError::Invalid { pos, message: format!("bad base IRI {base:?}: {e}") })?;
        base.join(iri)
            .map(String::from)
            .map_err(|e| ParseError::Invalid { pos, message: format!("cannot resolve <{iri}>: {e}") })
    }

    fn directive_or_statement(&mut self, out: &mut Vec<Statement>) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::PrefixDirective) => {
                self.index += 1;
                self.prefix_declaration()?;
                self.expect(&Token::Dot, "'.' after @prefix")
            }
            Some(Token::SparqlPrefix) => {
                self.index += 1;
                self.prefix_declaration()
            }
            Some(Token::BaseDirective) => {
                self.index += 1;
                self.base_declaration()?;
                self.expect(&Token::Dot, "'.' after @base")
            }
            Some(Token::SparqlBase) => {
                self.index += 1;
                self.base_declaration()
            }
            _ => {
                self.statement(out)?;
                self.expect(&Token::Dot, "'.' at end of statement")
            }
        }
    }

    fn prefix_declaration(&mut self) -> Result<(), ParseError> {
        let pos = self.pos();
        let label = match self.next() {
            Some((Token::PrefixedName { prefix, local }, _)) if local.is_empty() => prefix,
            _ => {
                self.index -= 1;
                return Err(self.unexpected("prefix label"));
            }
        };
        let iri = match self.next() {
            Some((Token::IriRef(iri), _)) => iri,
            _ => {
                self.index -= 1;
                return Err(self.unexpected("namespace IRI"));
            }
        };
        let iri = self.resolve(&iri, pos)?;
        self.prefixes.insert(label, iri);
        Ok(())
    }

    fn base_declaration(&mut self) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((Token::IriRef(iri), _)) => {
                let iri = self.resolve(&iri, pos)?;
                self.base = Some(iri);
                Ok(())
            }
            _ => {
                self.index -= 1;
                Err(self.unexpected("base IRI"))
            }
        }
    }

    /// One statement without its terminating dot.
    fn statement(&mut self, out: &mut Vec<Statement>) -> Result<(), ParseError> {
        let bracketed = self.peek() == Some(&Token::LBracket);
        let subject = self.term(out)?;
        if bracketed && matches!(self.peek(), Some(Token::Dot | Token::RBrace) | None) {
            // `[ :p :o ].` on its own
            return Ok(());
        }
        self.predicate_object_list(&subject, out)
    }

    fn predicate_object_list(&mut self, subject: &Term, out: &mut Vec<Statement>) -> Result<(), ParseError> {
        loop {
            let verb = self.verb(out)?;
            loop {
                let pos = self.pos();
                let mut aux = Vec::new();
                let object = self.term(&mut aux)?;
                match &verb {
                    Verb::Predicate(p) => {
                        out.push(Statement::Triple(Triple::new(subject.clone(), p.clone(), object)))
                    }
                    Verb::Implies => {
                        if !subject.is_formula_expression() || !object.is_formula_expression() {
                            return Err(ParseError::Invalid {
                                pos,
                                message: "both sides of '=>' must be formulas or false".into(),
                            });
                        }
                        out.push(Statement::Implication { antecedent: subject.clone(), consequent: object })
                    }
                }
                out.extend(aux);
                if self.peek() == Some(&Token::Comma) {
                    self.index += 1;
                } else {
                    break;
                }
            }
            if self.peek() != Some(&Token::Semicolon) {
                return Ok(());
            }
            while self.peek() == Some(&Token::Semicolon) {
                self.index += 1;
            }
            if matches!(self.peek(), Some(Token::Dot | Token::RBracket | Token::RBrace) | None) {
                return Ok(());
            }
        }
    }

    fn verb(&mut self, out: &mut Vec<Statement>) -> Result<Verb, ParseError> {
        match self.peek() {
            Some(Token::A) => {
                self.index += 1;
                Ok(Verb::Predicate(Term::rdf_type()))
            }
            Some(Token::Implies) => {
                self.index += 1;
                Ok(Verb::Implies)
            }
            Some(Token::IriRef(_) | Token::PrefixedName { .. } | Token::Variable(_) | Token::BlankLabel(_)) => {
                Ok(Verb::Predicate(self.term(out)?))
            }
            _ => Err(self.unexpected("predicate")),
        }
    }

    fn term(&mut self, out: &mut Vec<Statement>) -> Result<Term, ParseError> {
        let pos = self.pos();
        let Some((token, _)) = self.next() else {
            return Err(ParseError::Unexpected {
                pos: self.end,
                found: "end of input".into(),
                expected: "term".into(),
            });
        };
        match token {
            Token::IriRef(iri) => Ok(Term::uri(self.resolve(&iri, pos)?)),
            Token::PrefixedName { prefix, local } => match self.prefixes.get(&prefix) {
                Some(ns) => Ok(Term::uri(format!("{ns}{local}"))),
                None => Err(ParseError::UnresolvedPrefix { pos, prefix }),
            },
            Token::BlankLabel(name) => Ok(Term::existential(name)),
            Token::Variable(name) => Ok(Term::universal(name)),
            Token::String(s) => self.literal_suffix(s),
            Token::Number { lexical, datatype } => Ok(Term::Literal(Literal::typed(lexical, datatype))),
            Token::True => Ok(Term::Literal(Literal::typed("true", XSD_BOOLEAN))),
            Token::False => Ok(Term::False),
            Token::LParen => {
                let mut items = Vec::new();
                loop {
                    match self.peek() {
                        Some(Token::RParen) => {
                            self.index += 1;
                            return Ok(Term::List(items));
                        }
                        None => return Err(ParseError::Unterminated { pos, what: "list" }),
                        _ => items.push(self.term(out)?),
                    }
                }
            }
            Token::LBrace => {
                let mut inner = Vec::new();
                loop {
                    match self.peek() {
                        Some(Token::RBrace) => {
                            self.index += 1;
                            return Ok(Term::Graph(Formula::from_statements(inner)));
                        }
                        None => return Err(ParseError::Unterminated { pos, what: "formula" }),
                        _ => {
                            self.statement(&mut inner)?;
                            match self.peek() {
                                Some(Token::Dot) => self.index += 1,
                                Some(Token::RBrace) => {}
                                None => return Err(ParseError::Unterminated { pos, what: "formula" }),
                                _ => return Err(self.unexpected("'.' or '}'")),
                            }
                        }
                    }
                }
            }
            Token::LBracket => {
                let node = self.fresh_blank();
                if self.peek() == Some(&Token::RBracket) {
                    self.index += 1;
                    return Ok(node);
                }
                if self.at_end() {
                    return Err(ParseError::Unterminated { pos, what: "blank node property list" });
                }
                self.predicate_object_list(&node, out)?;
                match self.peek() {
                    Some(Token::RBracket) => {
                        self.index += 1;
                        Ok(node)
                    }
                    None => Err(ParseError::Unterminated { pos, what: "blank node property list" }),
                    _ => Err(self.unexpected("']'")),
                }
            }
            _ => {
                self.index -= 1;
                Err(self.unexpected("term"))
            }
        }
    }

    fn literal_suffix(&mut self, lexical: String) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Token::DoubleCaret) => {
                self.index += 1;
                let pos = self.pos();
                let mut scratch = Vec::new();
                match self.term(&mut scratch)? {
                    Term::Uri(dt) => Ok(Term::Literal(Literal::typed(lexical, dt))),
                    _ => Err(ParseError::Invalid { pos, message: "datatype must be an IRI".into() }),
                }
            }
            Some(Token::LangTag(tag)) => Err(ParseError::Invalid {
                pos: self.pos(),
                message: format!("language tags are not supported (@{tag})"),
            }),
            _ => Ok(Term::string(lexical)),
        }
    }
}

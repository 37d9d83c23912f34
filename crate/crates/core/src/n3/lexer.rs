use std::fmt;

use super::term::{XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER};
use super::ParseError;

/// Line and column, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Token {
    IriRef(String),
    PrefixedName { prefix: String, local: String },
    BlankLabel(String),
    Variable(String),
    String(String),
    Number { lexical: String, datatype: &'static str },
    LangTag(String),
    DoubleCaret,
    Dot,
    Semicolon,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Implies,
    A,
    True,
    False,
    PrefixDirective,
    BaseDirective,
    SparqlPrefix,
    SparqlBase,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::IriRef(s) => write!(f, "<{s}>"),
            Token::PrefixedName { prefix, local } => write!(f, "{prefix}:{local}"),
            Token::BlankLabel(s) => write!(f, "_:{s}"),
            Token::Variable(s) => write!(f, "?{s}"),
            Token::String(s) => write!(f, "{s:?}"),
            Token::Number { lexical, .. } => f.write_str(lexical),
            Token::LangTag(s) => write!(f, "@{s}"),
            Token::DoubleCaret => f.write_str("^^"),
            Token::Dot => f.write_str("."),
            Token::Semicolon => f.write_str(";"),
            Token::Comma => f.write_str(","),
            Token::LBracket => f.write_str("["),
            Token::RBracket => f.write_str("]"),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
            Token::LBrace => f.write_str("{"),
            Token::RBrace => f.write_str("}"),
            Token::Implies => f.write_str("=>"),
            Token::A => f.write_str("a"),
            Token::True => f.write_str("true"),
            Token::False => f.write_str("false"),
            Token::PrefixDirective => f.write_str("@prefix"),
            Token::BaseDirective => f.write_str("@base"),
            Token::SparqlPrefix => f.write_str("PREFIX"),
            Token::SparqlBase => f.write_str("BASE"),
        }
    }
}

pub(crate) struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
    line: usize,
    column: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Lexer { chars: text.char_indices().peekable(), text, line: 1, column: 1 }
    }

    pub(crate) fn tokenize(mut self) -> Result<Vec<(Token, Position)>, ParseError> {
        let mut out = Vec::new();
        while let Some(tok) = self.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn pos(&self) -> Position {
        Position { line: self.line, column: self.column }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek_second(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.text.len())
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<(Token, Position)>, ParseError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(c) = self.peek() else { return Ok(None) };
        let token = match c {
            '<' => self.iri(pos)?,
            '"' | '\'' => self.string(pos)?,
            '.' => {
                if self.peek_second().is_some_and(|d| d.is_ascii_digit()) {
                    self.number()
                } else {
                    self.bump();
                    Token::Dot
                }
            }
            ';' => self.single(Token::Semicolon),
            ',' => self.single(Token::Comma),
            '[' => self.single(Token::LBracket),
            ']' => self.single(Token::RBracket),
            '(' => self.single(Token::LParen),
            ')' => self.single(Token::RParen),
            '{' => self.single(Token::LBrace),
            '}' => self.single(Token::RBrace),
            '^' => {
                self.bump();
                if self.peek() == Some('^') {
                    self.bump();
                    Token::DoubleCaret
                } else {
                    return Err(ParseError::Lex { pos, found: "^".into() });
                }
            }
            '=' => {
                self.bump();
                if self.peek() == Some('>') {
                    self.bump();
                    Token::Implies
                } else {
                    return Err(ParseError::Lex { pos, found: "=".into() });
                }
            }
            '?' => {
                self.bump();
                let name = self.name();
                if name.is_empty() {
                    return Err(ParseError::Lex { pos, found: "?".into() });
                }
                Token::Variable(name)
            }
            '_' if self.peek_second() == Some(':') => {
                self.bump();
                self.bump();
                let name = self.local_name();
                if name.is_empty() {
                    return Err(ParseError::Lex { pos, found: "_:".into() });
                }
                Token::BlankLabel(name)
            }
            '@' => {
                self.bump();
                let word = self.name();
                match word.as_str() {
                    "prefix" => Token::PrefixDirective,
                    "base" => Token::BaseDirective,
                    "" => return Err(ParseError::Lex { pos, found: "@".into() }),
                    _ => Token::LangTag(word),
                }
            }
            '+' | '-' => {
                if self.peek_second().is_some_and(|d| d.is_ascii_digit() || d == '.') {
                    self.number()
                } else {
                    self.bump();
                    return Err(ParseError::Lex { pos, found: c.to_string() });
                }
            }
            d if d.is_ascii_digit() => self.number(),
            ':' => {
                self.bump();
                Token::PrefixedName { prefix: String::new(), local: self.local_name() }
            }
            c if is_name_start(c) => self.word(pos)?,
            other => {
                self.bump();
                return Err(ParseError::Lex { pos, found: other.to_string() });
            }
        };
        Ok(Some((token, pos)))
    }

    fn single(&mut self, t: Token) -> Token {
        self.bump();
        t
    }

    fn name(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    /// Local part of a prefixed name; dots are allowed inside but not at the end.
    fn local_name(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) {
                s.push(c);
                self.bump();
            } else if c == '.' && self.peek_second().is_some_and(is_name_char) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn word(&mut self, pos: Position) -> Result<Token, ParseError> {
        let mut prefix = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) {
                prefix.push(c);
                self.bump();
            } else if c == '.' && self.peek_second().is_some_and(is_name_char) {
                prefix.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some(':') {
            self.bump();
            let local = self.local_name();
            return Ok(Token::PrefixedName { prefix, local });
        }
        Ok(match prefix.as_str() {
            "a" => Token::A,
            "true" => Token::True,
            "false" => Token::False,
            w if w.eq_ignore_ascii_case("prefix") => Token::SparqlPrefix,
            w if w.eq_ignore_ascii_case("base") => Token::SparqlBase,
            _ => return Err(ParseError::Lex { pos, found: prefix }),
        })
    }

    fn iri(&mut self, pos: Position) -> Result<Token, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(ParseError::Unterminated { pos, what: "IRI" }),
                Some('>') => return Ok(Token::IriRef(s)),
                Some(c) if c.is_whitespace() => {
                    return Err(ParseError::Lex { pos, found: format!("<{s}") })
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn string(&mut self, pos: Position) -> Result<Token, ParseError> {
        let quote = self.bump().unwrap();
        let long = self.peek() == Some(quote) && self.peek_second() == Some(quote);
        if long {
            self.bump();
            self.bump();
        } else if self.peek() == Some(quote) {
            self.bump();
            return Ok(Token::String(String::new()));
        }
        let mut s = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(ParseError::Unterminated { pos, what: "string literal" });
            };
            match c {
                '\\' => s.push(self.escape(pos)?),
                c if c == quote && !long => return Ok(Token::String(s)),
                c if c == quote && self.peek() == Some(quote) && self.peek_second() == Some(quote) => {
                    self.bump();
                    self.bump();
                    return Ok(Token::String(s));
                }
                '\n' if !long => return Err(ParseError::Unterminated { pos, what: "string literal" }),
                c => s.push(c),
            }
        }
    }

    fn escape(&mut self, pos: Position) -> Result<char, ParseError> {
        let c = self.bump().ok_or(ParseError::Unterminated { pos, what: "string literal" })?;
        Ok(match c {
            'n' => '\n',
            't' => '\t',
            'r' => '\r',
            'b' => '\u{8}',
            'f' => '\u{c}',
            '"' => '"',
            '\'' => '\'',
            '\\' => '\\',
            'u' | 'U' => {
                let len = if c == 'u' { 4 } else { 8 };
                let mut hex = String::new();
                for _ in 0..len {
                    hex.push(self.bump().ok_or(ParseError::Unterminated { pos, what: "string literal" })?);
                }
                u32::from_str_radix(&hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| ParseError::Lex { pos, found: format!("\\{c}{hex}") })?
            }
            other => return Err(ParseError::Lex { pos, found: format!("\\{other}") }),
        })
    }

    fn number(&mut self) -> Token {
        let start = self.offset();
        if matches!(self.peek(), Some('+' | '-')) {
            self.bump();
        }
        let mut datatype = XSD_INTEGER;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_second().is_some_and(|c| c.is_ascii_digit()) {
            datatype = XSD_DECIMAL;
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut probe = self.chars.clone();
            probe.next();
            let mut next = probe.next().map(|(_, c)| c);
            if matches!(next, Some('+' | '-')) {
                next = probe.next().map(|(_, c)| c);
            }
            if next.is_some_and(|c| c.is_ascii_digit()) {
                datatype = XSD_DOUBLE;
                self.bump();
                if matches!(self.peek(), Some('+' | '-')) {
                    self.bump();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let end = self.offset();
        Token::Number { lexical: self.text[start..end].to_string(), datatype }
    }
}

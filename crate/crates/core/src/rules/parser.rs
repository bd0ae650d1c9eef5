//! Recursive-descent parser for rule files.
//!
//! ```text
//! program    := statement*
//! statement  := fact | constraint
//! fact       := atom "."
//! constraint := ":-" literal ("," literal)* "."
//! literal    := ["not"] atom
//! atom       := ident ["(" term ("," term)* ")"]
//! term       := ident | Variable | "string" | integer
//! ```
//!
//! `%` starts a comment running to the end of the line.

use std::fmt;

use thiserror::Error;

use super::ast::{Atom, IntegrityConstraint, Literal, Origin, RuleSet, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{source_name}:{line}:{col}: expected {}; found {found}", join_expected(.expected))]
    Syntax {
        source_name: String,
        line: usize,
        col: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("{source_name}:{line}:{col}: {message}")]
    Unsupported {
        source_name: String,
        line: usize,
        col: usize,
        message: &'static str,
    },
    #[error("{source_name}:{line}: unsafe variable {variable}: it occurs only in negated literals")]
    UnsafeVariable {
        source_name: String,
        line: usize,
        variable: String,
    },
    #[error("{source_name}:{line}: fact `{fact}` contains variables")]
    NonGroundFact {
        source_name: String,
        line: usize,
        fact: String,
    },
}

fn join_expected(expected: &[&str]) -> String {
    match expected {
        [one] => one.to_string(),
        many => format!("one of {}", many.join(", ")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Not,
    Brace,
    Hash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Var(s) => write!(f, "variable `{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Int(i) => write!(f, "integer `{i}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::If => f.write_str("`:-`"),
            Tok::Not => f.write_str("`not`"),
            Tok::Brace => f.write_str("`{`"),
            Tok::Hash => f.write_str("`#`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    /// Returns the token, or a lexical error as (line, col, found, expected).
    fn next(&mut self) -> Result<Spanned, (usize, usize, String, Vec<&'static str>)> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let at = |tok| Ok(Spanned { tok, line, col });
        let Some(c) = self.bump() else {
            return at(Tok::Eof);
        };
        match c {
            '(' => at(Tok::LParen),
            ')' => at(Tok::RParen),
            ',' => at(Tok::Comma),
            '.' => at(Tok::Dot),
            '{' => at(Tok::Brace),
            '#' => at(Tok::Hash),
            ':' => {
                if self.chars.peek() == Some(&'-') {
                    self.bump();
                    at(Tok::If)
                } else {
                    Err((line, col, "`:`".into(), vec!["`:-`"]))
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some('\n') => {
                            return Err((line, col, "unterminated string".into(), vec!["`\"`"]))
                        }
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            _ => {
                                return Err((line, col, "bad escape".into(), vec!["`\\\"`", "`\\\\`", "`\\n`"]))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                at(Tok::Str(s))
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut s = String::from(c);
                while let Some(&d) = self.chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    self.bump();
                }
                s.parse::<i64>()
                    .map(Tok::Int)
                    .map_err(|_| (line, col, format!("`{s}`"), vec!["integer"]))
                    .and_then(at)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(&d) = self.chars.peek() {
                    if !(d.is_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    self.bump();
                }
                if s == "not" {
                    at(Tok::Not)
                } else if c.is_uppercase() || c == '_' {
                    at(Tok::Var(s))
                } else {
                    at(Tok::Ident(s))
                }
            }
            other => Err((line, col, format!("`{other}`"), vec!["a statement"])),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Spanned>,
    source: String,
}

impl<'a> Parser<'a> {
    fn syntax(&self, at: &Spanned, expected: Vec<&'static str>) -> ParseError {
        ParseError::Syntax {
            source_name: self.source.clone(),
            line: at.line,
            col: at.col,
            expected,
            found: at.tok.to_string(),
        }
    }

    fn unsupported(&self, at: &Spanned, message: &'static str) -> ParseError {
        ParseError::Unsupported {
            source_name: self.source.clone(),
            line: at.line,
            col: at.col,
            message,
        }
    }

    fn peek(&mut self) -> Result<&Spanned, ParseError> {
        if self.peeked.is_none() {
            let next = self.lexer.next().map_err(|(line, col, found, expected)| ParseError::Syntax {
                source_name: self.source.clone(),
                line,
                col,
                expected,
                found,
            })?;
            self.peeked = Some(next);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    fn advance(&mut self) -> Result<Spanned, ParseError> {
        self.peek()?;
        Ok(self.peeked.take().expect("peeked"))
    }

    fn program(&mut self) -> Result<RuleSet, ParseError> {
        let mut rules = RuleSet::default();
        loop {
            let start = self.peek()?.clone();
            match &start.tok {
                Tok::Eof => return Ok(rules),
                Tok::If => {
                    self.advance()?;
                    let c = self.constraint(start.line)?;
                    rules.constraints.push(c);
                }
                Tok::Ident(_) => {
                    let atom = self.atom()?;
                    let next = self.advance()?;
                    match next.tok {
                        Tok::Dot => match atom.to_ground() {
                            Some(fact) => rules.facts.push(fact),
                            None => {
                                return Err(ParseError::NonGroundFact {
                                    source_name: self.source.clone(),
                                    line: start.line,
                                    fact: atom.to_string(),
                                })
                            }
                        },
                        Tok::If => {
                            return Err(self.unsupported(
                                &next,
                                "rules with a head are not supported; write facts or headless constraints",
                            ))
                        }
                        Tok::Brace | Tok::Int(_) => {
                            return Err(self.unsupported(&next, "choice rules `p {...} q` are not supported"))
                        }
                        _ => return Err(self.syntax(&next, vec!["`.`", "`:-`"])),
                    }
                }
                Tok::Int(_) | Tok::Brace => {
                    return Err(self.unsupported(&start, "choice rules `p {...} q` are not supported"))
                }
                Tok::Hash => {
                    return Err(self.unsupported(&start, "directives (`#show`, `#minimize`, ...) are not supported"))
                }
                _ => return Err(self.syntax(&start, vec!["`:-`", "identifier"])),
            }
        }
    }

    fn constraint(&mut self, line: usize) -> Result<IntegrityConstraint, ParseError> {
        let mut body = vec![self.literal()?];
        loop {
            let t = self.advance()?;
            match t.tok {
                Tok::Comma => body.push(self.literal()?),
                Tok::Dot => break,
                _ => return Err(self.syntax(&t, vec!["`,`", "`.`"])),
            }
        }
        let c = IntegrityConstraint {
            body,
            origin: Origin {
                source: self.source.clone(),
                line,
            },
        };
        if let Some(v) = c.unsafe_variables().into_iter().next() {
            return Err(ParseError::UnsafeVariable {
                source_name: self.source.clone(),
                line,
                variable: v,
            });
        }
        Ok(c)
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if self.peek()?.tok == Tok::Not {
            self.advance()?;
            Ok(Literal::neg(self.atom()?))
        } else {
            Ok(Literal::pos(self.atom()?))
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let t = self.advance()?;
        let Tok::Ident(predicate) = t.tok else {
            let expected = vec!["identifier", "`not`"];
            return Err(self.syntax(&t, expected));
        };
        let mut args = Vec::new();
        if self.peek()?.tok == Tok::LParen {
            self.advance()?;
            args.push(self.term()?);
            loop {
                let t = self.advance()?;
                match t.tok {
                    Tok::Comma => args.push(self.term()?),
                    Tok::RParen => break,
                    _ => return Err(self.syntax(&t, vec!["`,`", "`)`"])),
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let t = self.advance()?;
        match t.tok {
            Tok::Ident(s) => Ok(Term::Symbol(s)),
            Tok::Var(s) => Ok(Term::Var(s)),
            Tok::Str(s) => Ok(Term::Str(s)),
            Tok::Int(i) => Ok(Term::Int(i)),
            _ => Err(self.syntax(&t, vec!["identifier", "variable", "string", "integer"])),
        }
    }
}

/// Parse rule text. Statements are attributed to `<input>`.
pub fn parse_rules(text: &str) -> Result<RuleSet, ParseError> {
    parse_rules_from(text, "<input>")
}

/// Parse rule text, attributing statements to `source` in origins and errors.
pub fn parse_rules_from(text: &str, source: &str) -> Result<RuleSet, ParseError> {
    let mut parser = Parser {
        lexer: Lexer::new(text),
        peeked: None,
        source: source.to_string(),
    };
    parser.program()
}

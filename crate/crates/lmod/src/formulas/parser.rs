//! Recursive-descent parser for the formula grammar.
//!
//! Precedence, loosest to tightest: `->` (right-associative), `|`, `&`, `~`.
//! Quantifier bodies extend as far right as possible. Whether an identifier
//! is a variable, constant, function or relation is decided by the signature;
//! bare numerals such as `1` or `-1` may name declared constants.

use super::{Formula, Signature, Term};
use std::fmt;
use thiserror::Error;

/// A parse failure, with the 1-based line and column of the offending token.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Forall,
    Exists,
    True,
    False,
    LParen,
    RParen,
    Comma,
    Dot,
    Equal,
    And,
    Or,
    Arrow,
    Tilde,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Forall => write!(f, "`forall`"),
            Tok::Exists => write!(f, "`exists`"),
            Tok::True => write!(f, "`true`"),
            Tok::False => write!(f, "`false`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Equal => write!(f, "`=`"),
            Tok::And => write!(f, "`&`"),
            Tok::Or => write!(f, "`|`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Tilde => write!(f, "`~`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned {
                tok: $tok,
                line,
                col,
            });
            col += $len;
        }};
    }
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                chars.next();
                push!(Tok::LParen, 1);
            }
            ')' => {
                chars.next();
                push!(Tok::RParen, 1);
            }
            ',' => {
                chars.next();
                push!(Tok::Comma, 1);
            }
            '.' => {
                chars.next();
                push!(Tok::Dot, 1);
            }
            '=' => {
                chars.next();
                push!(Tok::Equal, 1);
            }
            '&' => {
                chars.next();
                push!(Tok::And, 1);
            }
            '|' => {
                chars.next();
                push!(Tok::Or, 1);
            }
            '~' => {
                chars.next();
                push!(Tok::Tilde, 1);
            }
            '-' => {
                chars.next();
                match chars.peek() {
                    Some('>') => {
                        chars.next();
                        push!(Tok::Arrow, 2);
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let mut text = String::from("-");
                        while let Some(&d) = chars.peek() {
                            if d.is_ascii_digit() {
                                text.push(d);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                        let len = text.len();
                        push!(Tok::Num(text), len);
                    }
                    _ => {
                        return Err(ParseError {
                            line,
                            col,
                            message: "expected `->` or a numeral after `-`".to_string(),
                        })
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        text.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = text.len();
                push!(Tok::Num(text), len);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        text.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = text.len();
                let tok = match text.as_str() {
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(text),
                };
                push!(tok, len);
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: &'a Signature,
}

/// Parse a formula over `sig`. Every symbol must be declared with the right
/// arity; identifiers of the shape `[a-z][a-zA-Z0-9_]*` that are not declared
/// symbols are variables.
pub fn parse_formula(src: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, sig };
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

fn is_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_at(&self, at: &Spanned, message: String) -> ParseError {
        ParseError {
            line: at.line,
            col: at.col,
            message,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            let found = self.peek().clone();
            Err(self.error_at(&found, format!("expected {tok}, found {}", found.tok)))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        let found = self.peek().clone();
        if found.tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.error_at(&found, format!("expected end of input, found {}", found.tok)))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.implication()
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implication()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().tok.clone() {
            Tok::Tilde => {
                self.advance();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Forall | Tok::Exists => {
                let quant = self.advance();
                let var_tok = self.advance();
                let name = match &var_tok.tok {
                    Tok::Ident(name) if is_variable_name(name) && !self.sig.is_declared(name) => {
                        name.clone()
                    }
                    Tok::Ident(name) if self.sig.is_declared(name) => {
                        return Err(self.error_at(
                            &var_tok,
                            format!("cannot bind `{name}`: it is a declared symbol"),
                        ))
                    }
                    other => {
                        return Err(
                            self.error_at(&var_tok, format!("expected a variable, found {other}"))
                        )
                    }
                };
                self.expect(Tok::Dot)?;
                let body = self.formula()?;
                Ok(match quant.tok {
                    Tok::Forall => Formula::forall(name, body),
                    _ => Formula::exists(name, body),
                })
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.peek().tok.clone() {
            Tok::True => {
                self.advance();
                Ok(Formula::True)
            }
            Tok::False => {
                self.advance();
                Ok(Formula::False)
            }
            Tok::LParen => {
                self.advance();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(name) if self.sig.relation_arity(&name).is_some() => {
                let at = self.advance();
                let arity = self.sig.relation_arity(&name).unwrap();
                let args = self.argument_list()?;
                if args.len() != arity {
                    return Err(self.error_at(
                        &at,
                        format!(
                            "relation `{name}` expects {arity} arguments, found {}",
                            args.len()
                        ),
                    ));
                }
                Ok(Formula::Rel(name, args))
            }
            _ => {
                let lhs = self.term()?;
                self.expect(Tok::Equal)?;
                let rhs = self.term()?;
                Ok(Formula::Equal(lhs, rhs))
            }
        }
    }

    fn argument_list(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let at = self.advance();
        match &at.tok {
            Tok::Num(text) => {
                if self.sig.is_constant(text) {
                    Ok(Term::Const(text.clone()))
                } else {
                    Err(self.error_at(&at, format!("`{text}` is not a declared constant")))
                }
            }
            Tok::Ident(name) => {
                if self.sig.is_constant(name) {
                    Ok(Term::Const(name.clone()))
                } else if let Some(arity) = self.sig.function_arity(name) {
                    let args = self.argument_list()?;
                    if args.len() != arity {
                        return Err(self.error_at(
                            &at,
                            format!(
                                "function `{name}` expects {arity} arguments, found {}",
                                args.len()
                            ),
                        ));
                    }
                    Ok(Term::App(name.clone(), args))
                } else if self.sig.relation_arity(name).is_some() {
                    Err(self.error_at(&at, format!("relation `{name}` used as a term")))
                } else if is_variable_name(name) {
                    Ok(Term::Var(name.clone()))
                } else {
                    Err(self.error_at(&at, format!("undeclared symbol `{name}`")))
                }
            }
            other => Err(self.error_at(&at, format!("expected a term, found {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quantifiers_and_implication() {
        let sig = Signature::graph();
        let f = parse_formula("forall x. exists y. E(x,y) -> E(y,x)", &sig).unwrap();
        let expected = Formula::forall(
            "x",
            Formula::exists(
                "y",
                Formula::implies(
                    Formula::rel("E", vec![Term::var("x"), Term::var("y")]),
                    Formula::rel("E", vec![Term::var("y"), Term::var("x")]),
                ),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn precedence_tilde_and_or_arrow() {
        let sig = Signature::graph();
        let f = parse_formula("~E(x,x) & E(x,y) | E(y,x) -> E(y,y)", &sig).unwrap();
        let e = |a: &str, b: &str| Formula::rel("E", vec![Term::var(a), Term::var(b)]);
        let expected = Formula::implies(
            Formula::or(
                Formula::and(Formula::not(e("x", "x")), e("x", "y")),
                e("y", "x"),
            ),
            e("y", "y"),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn arrow_is_right_associative() {
        let sig = Signature::graph();
        let f = parse_formula("E(x,x) -> E(y,y) -> E(z,z)", &sig).unwrap();
        let e = |a: &str| Formula::rel("E", vec![Term::var(a), Term::var(a)]);
        assert_eq!(
            f,
            Formula::implies(e("x"), Formula::implies(e("y"), e("z")))
        );
    }

    #[test]
    fn numeral_constants_parse() {
        let sig = Signature::special_group();
        let f = parse_formula("mul(x,1) = x & mul(x,-1) = y", &sig).unwrap();
        let expected = Formula::and(
            Formula::equal(
                Term::app("mul", vec![Term::var("x"), Term::constant("1")]),
                Term::var("x"),
            ),
            Formula::equal(
                Term::app("mul", vec![Term::var("x"), Term::constant("-1")]),
                Term::var("y"),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn arity_error_carries_position() {
        let sig = Signature::graph();
        let err = parse_formula("E(x,x) & E(x)", &sig).unwrap_err();
        assert_eq!((err.line, err.col), (1, 10));
        assert!(err.message.contains("expects 2 arguments"));
    }

    #[test]
    fn undeclared_symbol_is_rejected() {
        let sig = Signature::graph();
        let err = parse_formula("R(x,x)", &sig).unwrap_err();
        // `R` is not declared and not lowercase, so it cannot be a variable.
        assert!(err.message.contains("undeclared") || err.message.contains("expected"));
        let err = parse_formula("x = Q", &sig).unwrap_err();
        assert!(err.message.contains("undeclared symbol `Q`"));
    }

    #[test]
    fn binding_a_declared_symbol_is_rejected() {
        let sig = Signature::special_group();
        let err = parse_formula("forall mul. true", &sig).unwrap_err();
        assert!(err.message.contains("cannot bind"));
    }

    #[test]
    fn trailing_input_is_rejected() {
        let sig = Signature::graph();
        let err = parse_formula("E(x,x) E(y,y)", &sig).unwrap_err();
        assert!(err.message.contains("expected end of input"));
    }

    #[test]
    fn multiline_positions() {
        let sig = Signature::graph();
        let err = parse_formula("E(x,x) &\n  E(x)", &sig).unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }
}

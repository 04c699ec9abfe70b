use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{Ast, FuncKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes 1 argument, got {got} (at byte {offset})")]
    ArityMismatch {
        name: String,
        got: usize,
        offset: usize,
    },
    #[error("variable `{name}` exceeds dimension {dim} (at byte {offset})")]
    DimensionExceeded {
        name: String,
        dim: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::ArityMismatch { offset, .. }
            | ParseError::DimensionExceeded { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Lexer<'a> {
        Lexer {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let c = self.bytes[self.pos];
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    out.push((Tok::Plus, start));
                    self.pos += 1;
                }
                b'-' => {
                    out.push((Tok::Minus, start));
                    self.pos += 1;
                }
                b'*' => {
                    out.push((Tok::Star, start));
                    self.pos += 1;
                }
                b'/' => {
                    out.push((Tok::Slash, start));
                    self.pos += 1;
                }
                b'^' => {
                    out.push((Tok::Caret, start));
                    self.pos += 1;
                }
                b'(' => {
                    out.push((Tok::LParen, start));
                    self.pos += 1;
                }
                b')' => {
                    out.push((Tok::RParen, start));
                    self.pos += 1;
                }
                b',' => {
                    out.push((Tok::Comma, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'.' => {
                    out.push((self.number()?, start));
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut end = self.pos;
                    while end < self.bytes.len()
                        && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_')
                    {
                        end += 1;
                    }
                    let name = std::str::from_utf8(&self.bytes[self.pos..end])
                        .expect("ascii identifier")
                        .to_string();
                    self.pos = end;
                    out.push((Tok::Ident(name), start));
                }
                other => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{}`", other as char),
                    });
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let mut end = self.pos;
        let mut seen_dot = false;
        let mut seen_exp = false;
        while end < self.bytes.len() {
            match self.bytes[end] {
                b'0'..=b'9' => end += 1,
                b'.' if !seen_dot && !seen_exp => {
                    seen_dot = true;
                    end += 1;
                }
                b'e' | b'E' if !seen_exp && end > start => {
                    seen_exp = true;
                    end += 1;
                    if end < self.bytes.len() && (self.bytes[end] == b'+' || self.bytes[end] == b'-')
                    {
                        end += 1;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..end]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("invalid number literal `{text}`"),
        })?;
        self.pos = end;
        Ok(Tok::Num(value))
    }
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    cursor: usize,
    dim: usize,
    params: &'a BTreeMap<String, f64>,
    text_len: usize,
}

pub fn parse_ast(
    text: &str,
    dim: usize,
    params: &BTreeMap<String, f64>,
) -> Result<Ast, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".to_string(),
        });
    }
    let tokens = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dim,
        params,
        text_len: text.len(),
    };
    let ast = parser.expression(0)?;
    if parser.cursor != parser.tokens.len() {
        let (_, offset) = parser.tokens[parser.cursor].clone();
        return Err(ParseError::Syntax {
            offset,
            message: "unexpected trailing input".to_string(),
        });
    }
    Ok(ast)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.cursor).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(_, o)| *o)
            .unwrap_or(self.text_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.cursor).map(|(t, _)| t.clone());
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    /// Precedence-climbing over binary operators. All levels left-associate.
    fn expression(&mut self, min_bp: u8) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let (op, bp) = match self.peek() {
                Some(Tok::Plus) => ('+', 1),
                Some(Tok::Minus) => ('-', 1),
                Some(Tok::Star) => ('*', 2),
                Some(Tok::Slash) => ('/', 2),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.bump();
            // Left associative: the right operand parses at bp + 1.
            let rhs = self.expression(bp + 1)?;
            lhs = match op {
                '+' => Ast::Add(Box::new(lhs), Box::new(rhs)),
                '-' => Ast::Sub(Box::new(lhs), Box::new(rhs)),
                '*' => Ast::Mul(Box::new(lhs), Box::new(rhs)),
                '/' => Ast::Div(Box::new(lhs), Box::new(rhs)),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    /// Unary minus binds tighter than `*`,`/` and looser than `^`.
    fn unary(&mut self) -> Result<Ast, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.unary()?;
            // Fold a negated constant so print/parse round-trips node-for-node.
            return Ok(match inner {
                Ast::Const(c) => Ast::Const(-c),
                other => Ast::Neg(Box::new(other)),
            });
        }
        self.power_operand()
    }

    /// A primary followed by left-associating `^` chains. The exponent
    /// operand is a primary (optionally sign-prefixed), so `2^3^2` parses as
    /// `(2^3)^2`.
    fn power_operand(&mut self) -> Result<Ast, ParseError> {
        let mut base = self.primary()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp_offset = self.offset();
            let rhs = self.exponent_operand()?;
            let p = fold_constant(&rhs).ok_or_else(|| ParseError::Syntax {
                offset: exp_offset,
                message: "power exponent must be a constant expression".to_string(),
            })?;
            base = Ast::Pow(Box::new(base), p);
        }
        Ok(base)
    }

    fn exponent_operand(&mut self) -> Result<Ast, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.exponent_operand()?;
            return Ok(match inner {
                Ast::Const(c) => Ast::Const(-c),
                other => Ast::Neg(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Ast::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expression(0)?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(ParseError::Syntax {
                        offset: self.offset().min(self.text_len),
                        message: "expected `)`".to_string(),
                    }),
                }
            }
            Some(Tok::Ident(name)) => self.identifier(name, offset),
            Some(other) => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
            None => Err(ParseError::Syntax {
                offset: self.text_len,
                message: "unexpected end of input".to_string(),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Ast, ParseError> {
        if let Some(kind) = FuncKind::from_name(&name) {
            if !matches!(self.peek(), Some(Tok::LParen)) {
                return Err(ParseError::Syntax {
                    offset: self.offset(),
                    message: format!("expected `(` after function `{name}`"),
                });
            }
            self.bump();
            let first = self.expression(0)?;
            let mut args = 1usize;
            while matches!(self.peek(), Some(Tok::Comma)) {
                self.bump();
                let _ = self.expression(0)?;
                args += 1;
            }
            match self.bump() {
                Some(Tok::RParen) => {}
                _ => {
                    return Err(ParseError::Syntax {
                        offset: self.offset().min(self.text_len),
                        message: "expected `)`".to_string(),
                    });
                }
            }
            if args != 1 {
                return Err(ParseError::ArityMismatch {
                    name,
                    got: args,
                    offset,
                });
            }
            return Ok(Ast::Func(kind, Box::new(first)));
        }
        if name == "r" {
            return Ok(self.radius());
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                if i == 0 {
                    return Err(ParseError::Syntax {
                        offset,
                        message: "variables are numbered from x1".to_string(),
                    });
                }
                if i > self.dim {
                    return Err(ParseError::DimensionExceeded {
                        name,
                        dim: self.dim,
                        offset,
                    });
                }
                return Ok(Ast::Var(i));
            }
        }
        if let Some(&value) = self.params.get(&name) {
            return Ok(Ast::Const(value));
        }
        Err(ParseError::UnknownIdentifier { name, offset })
    }

    /// `r` expands to sqrt(x1^2 + ... + xn^2) before evaluation.
    fn radius(&self) -> Ast {
        let mut sum = Ast::Pow(Box::new(Ast::Var(1)), 2.0);
        for i in 2..=self.dim {
            sum = Ast::Add(
                Box::new(sum),
                Box::new(Ast::Pow(Box::new(Ast::Var(i)), 2.0)),
            );
        }
        Ast::Func(FuncKind::Sqrt, Box::new(sum))
    }
}

/// Evaluate a variable-free subtree to a constant; `None` if variables occur.
fn fold_constant(node: &Ast) -> Option<f64> {
    Some(match node {
        Ast::Const(c) => *c,
        Ast::Var(_) => return None,
        Ast::Neg(a) => -fold_constant(a)?,
        Ast::Add(a, b) => fold_constant(a)? + fold_constant(b)?,
        Ast::Sub(a, b) => fold_constant(a)? - fold_constant(b)?,
        Ast::Mul(a, b) => fold_constant(a)? * fold_constant(b)?,
        Ast::Div(a, b) => fold_constant(a)? / fold_constant(b)?,
        Ast::Pow(a, p) => fold_constant(a)?.powf(*p),
        Ast::Func(kind, a) => {
            let v = fold_constant(a)?;
            match kind {
                FuncKind::Sin => v.sin(),
                FuncKind::Cos => v.cos(),
                FuncKind::Tan => v.tan(),
                FuncKind::Exp => v.exp(),
                FuncKind::Log => v.ln(),
                FuncKind::Sqrt => v.sqrt(),
                FuncKind::Sinh => v.sinh(),
                FuncKind::Cosh => v.cosh(),
                FuncKind::Tanh => v.tanh(),
                FuncKind::Atan => v.atan(),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<Ast, ParseError> {
        parse_ast(text, 3, &BTreeMap::new())
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ > unary- > * > +, all left-associative.
        assert_eq!(
            p("-x1^2").unwrap(),
            Ast::Neg(Box::new(Ast::Pow(Box::new(Ast::Var(1)), 2.0)))
        );
        assert_eq!(
            p("2^3^2").unwrap(),
            Ast::Pow(Box::new(Ast::Pow(Box::new(Ast::Const(2.0)), 3.0)), 2.0)
        );
        assert_eq!(
            p("x1 - x2 - x3").unwrap(),
            Ast::Sub(
                Box::new(Ast::Sub(Box::new(Ast::Var(1)), Box::new(Ast::Var(2)))),
                Box::new(Ast::Var(3))
            )
        );
        assert_eq!(
            p("x1/x2/x3").unwrap(),
            Ast::Div(
                Box::new(Ast::Div(Box::new(Ast::Var(1)), Box::new(Ast::Var(2)))),
                Box::new(Ast::Var(3))
            )
        );
    }

    #[test]
    fn errors_carry_offsets() {
        match p("x1 +") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match p("x1 + foo") {
            Err(ParseError::UnknownIdentifier { offset, name }) => {
                assert_eq!(offset, 5);
                assert_eq!(name, "foo");
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        match p("sin(x1, x2)") {
            Err(ParseError::ArityMismatch { got, .. }) => assert_eq!(got, 2),
            other => panic!("expected arity mismatch, got {other:?}"),
        }
    }

    #[test]
    fn exponent_must_be_constant() {
        assert!(matches!(p("x1^(1/2)"), Ok(Ast::Pow(_, e)) if (e - 0.5).abs() < 1e-15));
        assert!(matches!(p("x1^-2"), Ok(Ast::Pow(_, e)) if e == -2.0));
        assert!(matches!(p("x1^x2"), Err(ParseError::Syntax { .. })));
    }
}

//! Recursive-descent parser.
//!
//! Grammar (documented in `docs/grammar.ebnf`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?          ; right-associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` parses as `-(x^2)`.
//! There is no implicit multiplication.

use super::token::{tokenize, Tok, Token};
use super::{Func, Node, ParseError, ParseErrorKind};

pub(crate) struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    vars: &'a [String],
    src_len: usize,
}

impl<'a> Parser<'a> {
    pub fn new(src: &str, vars: &'a [String]) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            vars,
            src_len: src.len(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.src_len
    }

    pub fn parse(&mut self) -> Result<Node, ParseError> {
        let node = self.expr()?;
        if let Some(t) = self.peek() {
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(describe(&t.tok)),
                offset: t.offset,
            });
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            let op = match t.tok {
                Tok::Plus => super::BinOp::Add,
                Tok::Minus => super::BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(t) = self.peek() {
            let op = match t.tok {
                Tok::Star => super::BinOp::Mul,
                Tok::Slash => super::BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if let Some(t) = self.peek() {
            if t.tok == Tok::Minus {
                self.bump();
                let inner = self.factor()?;
                return Ok(Node::Neg(Box::new(inner)));
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let Some(t) = self.peek() {
            if t.tok == Tok::Caret {
                self.bump();
                // exponent may itself be signed: 2^-3
                let exponent = self.factor()?;
                return Ok(Node::Bin(
                    super::BinOp::Pow,
                    Box::new(base),
                    Box::new(exponent),
                ));
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let t = match self.bump() {
            Some(t) => t,
            None => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedEnd,
                    offset: self.end_offset(),
                })
            }
        };
        match t.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, t.offset),
            other => Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(describe(&other)),
                offset: t.offset,
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        // Declared variables shadow nothing: function and constant names are
        // rejected at declaration time.
        if let Some(idx) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(idx));
        }
        if let Some(func) = Func::from_name(&name) {
            let open = self.bump();
            match open {
                Some(Token { tok: Tok::LParen, .. }) => {}
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::ExpectedCall(name),
                        offset,
                    })
                }
            }
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            _ => Err(ParseError {
                kind: ParseErrorKind::UnknownIdentifier(name),
                offset,
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some(Token { tok: Tok::RParen, .. }) => Ok(()),
            Some(t) => Err(ParseError {
                kind: ParseErrorKind::ExpectedClose(describe(&t.tok)),
                offset: t.offset,
            }),
            None => Err(ParseError {
                kind: ParseErrorKind::UnexpectedEnd,
                offset: self.end_offset(),
            }),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
    }
}

//! Recursive descent parser for `.nsp` specification files.
//!
//! Surface products and quotients are lowered while parsing: a factor that
//! evaluates to a constant becomes a [`Term::ScalarMul`] coefficient, `t * t`
//! and `t ^ 2` become [`Term::Square`], and literal arithmetic folds into a
//! single [`Term::Const`]. Constants must be declared before they are used
//! in a coefficient position.

use super::ast::*;
use super::desugar::desugar_robustness;
use super::lexer::{tokenize, Tok, Token};
use crate::rational::Rational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::fmt;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Unexpected { expected: Vec<String>, found: String },
    Invalid(String),
}

/// Parse failure with a 1-based source location.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn expected(&self) -> &[String] {
        match &self.kind {
            ParseErrorKind::Unexpected { expected, .. } => expected,
            ParseErrorKind::Invalid(_) => &[],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Unexpected { expected, found } => write!(
                f,
                "{}:{}: expected {}, found {}",
                self.line,
                self.col,
                expected.join(" or "),
                found
            ),
            ParseErrorKind::Invalid(msg) => write!(f, "{}:{}: {}", self.line, self.col, msg),
        }
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

/// Parses specification text.
pub fn parse_spec(text: &str) -> PResult<PropertySpec> {
    Parser::new(text).spec()
}

/// Parses raw bytes, rejecting invalid UTF-8 with a located error.
pub fn parse_spec_bytes(bytes: &[u8]) -> PResult<PropertySpec> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_spec(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count() as u32;
            let col = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count() as u32;
            Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::Invalid("input is not valid UTF-8".into()),
            })
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    constants: HashMap<String, Rational>,
    networks: HashMap<String, NetworkDecl>,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            toks: tokenize(text),
            pos: 0,
            depth: 0,
            constants: HashMap::new(),
            networks: HashMap::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let span = self.span();
        ParseError {
            line: span.line,
            col: span.col,
            kind: ParseErrorKind::Unexpected {
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: self.peek().to_string(),
            },
        }
    }

    fn invalid(&self, span: Span, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: span.line,
            col: span.col,
            kind: ParseErrorKind::Invalid(msg.into()),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&tok.to_string()]))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.span();
                self.bump();
                Ok((name, span))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.invalid(self.span(), "nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ---- declarations ----

    fn spec(&mut self) -> PResult<PropertySpec> {
        let mut spec = PropertySpec::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(spec),
                Tok::Network => {
                    let decl = self.network_decl()?;
                    self.networks.insert(decl.name.clone(), decl.clone());
                    spec.networks.push(decl);
                }
                Tok::Const => {
                    let decl = self.const_decl()?;
                    self.constants.insert(decl.name.clone(), decl.value.clone());
                    spec.constants.push(decl);
                }
                Tok::Prop => spec.properties.push(self.prop_decl()?),
                _ => return Err(self.unexpected(&["`network`", "`const`", "`prop`", "end of input"])),
            }
        }
    }

    fn dimension(&mut self) -> PResult<usize> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(q) => {
                self.bump();
                match q.to_integer().to_usize() {
                    Some(n) if q.is_integer() && n > 0 => Ok(n),
                    _ => Err(self.invalid(span, "dimension must be a positive integer")),
                }
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn network_decl(&mut self) -> PResult<NetworkDecl> {
        let span = self.expect(Tok::Network)?.span;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let input_dim = self.dimension()?;
        self.expect(Tok::Arrow)?;
        let output_dim = self.dimension()?;
        Ok(NetworkDecl {
            name,
            input_dim,
            output_dim,
            span,
        })
    }

    fn const_decl(&mut self) -> PResult<ConstDecl> {
        let span = self.expect(Tok::Const)?.span;
        let (name, _) = self.ident()?;
        self.expect(Tok::Assign)?;
        let value = self.const_term()?;
        Ok(ConstDecl { name, value, span })
    }

    fn prop_decl(&mut self) -> PResult<Property> {
        let span = self.expect(Tok::Prop)?.span;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let formula = self.formula()?;
        Ok(Property {
            name,
            formula,
            span,
        })
    }

    // ---- formulas ----

    fn formula(&mut self) -> PResult<Formula> {
        self.enter()?;
        let lhs = self.disjunction()?;
        let out = if self.eat(&Tok::Implies) {
            let rhs = self.formula()?;
            Formula::implies(lhs, rhs)
        } else {
            lhs
        };
        self.leave();
        Ok(out)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut acc = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut acc = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<Formula> {
        self.enter()?;
        let out = match self.peek() {
            Tok::Not => {
                self.bump();
                self.unary().map(Formula::negation)
            }
            Tok::Forall | Tok::Exists => self.quantifier(),
            Tok::Robust => self.robust(),
            Tok::LParen => {
                // `(` opens either a term of an atom or a nested formula.
                let start = self.pos;
                match self.atom() {
                    Ok(a) => Ok(Formula::Atom(a)),
                    Err(atom_err) => {
                        self.pos = start;
                        let nested = (|| {
                            self.bump();
                            let f = self.formula()?;
                            self.expect(Tok::RParen)?;
                            Ok(f)
                        })();
                        nested.map_err(|e| furthest(atom_err, e))
                    }
                }
            }
            _ => self.atom().map(Formula::Atom),
        };
        self.leave();
        out
    }

    fn quantifier(&mut self) -> PResult<Formula> {
        let head = self.bump();
        let mut vars = Vec::new();
        let mut bounds = Vec::new();
        loop {
            let (name, _) = self.ident()?;
            self.expect(Tok::In)?;
            self.expect(Tok::LBracket)?;
            let lo = self.const_term()?;
            self.expect(Tok::Comma)?;
            let hi = self.const_term()?;
            self.expect(Tok::RBracket)?;
            vars.push(name);
            bounds.push((lo, hi));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let mut side_constraints = Vec::new();
        if self.eat(&Tok::Where) {
            loop {
                side_constraints.push(self.atom()?);
                if !self.eat(&Tok::And) {
                    break;
                }
            }
        }
        if *self.peek() != Tok::Dot {
            let expected: &[&str] = if side_constraints.is_empty() {
                &["`,`", "`where`", "`.`"]
            } else {
                &["`and`", "`.`"]
            };
            return Err(self.unexpected(expected));
        }
        self.bump();
        let body = self.formula()?;
        let q = Quantifier {
            vars,
            domain: QuantDomain {
                bounds,
                side_constraints,
            },
            body: Box::new(body),
            span: head.span,
        };
        Ok(match head.tok {
            Tok::Forall => Formula::Forall(q),
            _ => Formula::Exists(q),
        })
    }

    /// `robust f at [c1, ..] eps E delta D [linf|l1]`
    fn robust(&mut self) -> PResult<Formula> {
        self.expect(Tok::Robust)?;
        let (net, net_span) = self.ident()?;
        self.expect(Tok::At)?;
        self.expect(Tok::LBracket)?;
        let mut center = vec![self.const_term()?];
        while self.eat(&Tok::Comma) {
            center.push(self.const_term()?);
        }
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Eps)?;
        let eps_span = self.span();
        let eps = self.const_term()?;
        self.expect(Tok::Delta)?;
        let delta = self.const_term()?;
        let norm = match self.peek() {
            Tok::Linf => {
                self.bump();
                NormKind::Linf
            }
            Tok::L1 => {
                self.bump();
                NormKind::L1
            }
            _ => NormKind::default(),
        };
        let decl = self
            .networks
            .get(&net)
            .cloned()
            .ok_or_else(|| self.invalid(net_span, format!("unknown network {net}")))?;
        let reserved: Vec<&str> = self.constants.keys().map(String::as_str).collect();
        desugar_robustness(&decl, &center, &eps, &delta, norm, &reserved)
            .map_err(|e| self.invalid(eps_span, e.to_string()))
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let lhs = self.term()?;
        let cmp = match self.peek() {
            Tok::Le => Cmp::Le,
            Tok::Lt => Cmp::Lt,
            Tok::Ge => Cmp::Ge,
            Tok::Gt => Cmp::Gt,
            _ => return Err(self.unexpected(&["`<=`", "`<`", "`>=`", "`>`", "`+`", "`-`", "`*`", "`/`"])),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Atom {
            cmp,
            lhs,
            rhs,
            span,
        })
    }

    // ---- terms ----

    fn const_term(&mut self) -> PResult<Rational> {
        let span = self.span();
        let t = self.term()?;
        self.const_value(&t)
            .ok_or_else(|| self.invalid(span, "constant expression required"))
    }

    fn term(&mut self) -> PResult<Term> {
        self.enter()?;
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.product()?;
                    acc = Term::Add(Box::new(acc), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.product()?;
                    acc = Term::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => break,
            }
        }
        self.leave();
        Ok(acc)
    }

    fn product(&mut self) -> PResult<Term> {
        let mut acc = self.prefix()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    let span = self.bump().span;
                    let rhs = self.prefix()?;
                    acc = self.multiply(acc, rhs, span)?;
                }
                Tok::Slash => {
                    let span = self.bump().span;
                    let rhs = self.prefix()?;
                    acc = self.divide(acc, rhs, span)?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn prefix(&mut self) -> PResult<Term> {
        if self.eat(&Tok::Minus) {
            self.enter()?;
            let t = self.prefix()?;
            self.leave();
            Ok(match t {
                Term::Const(q) => Term::Const(-q),
                other => Term::ScalarMul(-Rational::one(), Box::new(other)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> PResult<Term> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let span = self.span();
            match self.peek() {
                Tok::Number(q) if *q == Rational::from_integer(2.into()) => {
                    self.bump();
                    Ok(Term::Square(Box::new(base)))
                }
                Tok::Number(_) => Err(self.invalid(span, "only the exponent 2 is supported")),
                _ => Err(self.unexpected(&["`2`"])),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(q) => {
                self.bump();
                Ok(Term::Const(q))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LBracket) {
                    let args = self.term_list()?;
                    self.expect(Tok::RBracket)?;
                    let output = if self.eat(&Tok::Bang) {
                        let idx_span = self.span();
                        match self.peek().clone() {
                            Tok::Number(q) => {
                                self.bump();
                                match q.to_integer().to_usize() {
                                    Some(i) if q.is_integer() => i,
                                    _ => {
                                        return Err(self.invalid(
                                            idx_span,
                                            "output index must be a non-negative integer",
                                        ))
                                    }
                                }
                            }
                            _ => return Err(self.unexpected(&["number"])),
                        }
                    } else {
                        0
                    };
                    Ok(Term::NetApply {
                        net: name,
                        args,
                        output,
                        span,
                    })
                } else {
                    Ok(Term::Var { name, span })
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Linf | Tok::L1 => {
                let norm = if self.bump().tok == Tok::Linf {
                    NormKind::Linf
                } else {
                    NormKind::L1
                };
                self.expect(Tok::LParen)?;
                self.expect(Tok::LBracket)?;
                let left = self.term_list()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Comma)?;
                self.expect(Tok::LBracket)?;
                let right = self.term_list()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::RParen)?;
                Ok(Term::NormDiff { norm, left, right })
            }
            _ => Err(self.unexpected(&["number", "identifier", "`(`", "`-`", "`linf`", "`l1`"])),
        }
    }

    fn term_list(&mut self) -> PResult<Vec<Term>> {
        let mut items = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            items.push(self.term()?);
        }
        Ok(items)
    }

    // ---- lowering ----

    fn const_value(&self, t: &Term) -> Option<Rational> {
        const_value(t, &|name| self.constants.get(name).cloned())
    }

    fn multiply(&self, a: Term, b: Term, span: Span) -> PResult<Term> {
        if let (Term::Const(x), Term::Const(y)) = (&a, &b) {
            return Ok(Term::Const(x * y));
        }
        if let Some(c) = self.const_value(&a) {
            return Ok(Term::ScalarMul(c, Box::new(b)));
        }
        if let Some(c) = self.const_value(&b) {
            return Ok(Term::ScalarMul(c, Box::new(a)));
        }
        if a == b {
            return Ok(Term::Square(Box::new(a)));
        }
        Err(self.invalid(
            span,
            "nonlinear product: one factor must be constant, or both factors identical (a square)",
        ))
    }

    fn divide(&self, a: Term, b: Term, span: Span) -> PResult<Term> {
        let divisor = self
            .const_value(&b)
            .ok_or_else(|| self.invalid(span, "divisor must be a constant expression"))?;
        if divisor.is_zero() {
            return Err(self.invalid(span, "division by zero"));
        }
        Ok(match a {
            Term::Const(x) if matches!(b, Term::Const(_)) => Term::Const(x / divisor),
            other => Term::ScalarMul(divisor.recip(), Box::new(other)),
        })
    }
}

/// Evaluates a term built only from literals and named constants.
pub fn const_value(t: &Term, lookup: &dyn Fn(&str) -> Option<Rational>) -> Option<Rational> {
    Some(match t {
        Term::Const(q) => q.clone(),
        Term::Var { name, .. } => lookup(name)?,
        Term::Add(a, b) => const_value(a, lookup)? + const_value(b, lookup)?,
        Term::Sub(a, b) => const_value(a, lookup)? - const_value(b, lookup)?,
        Term::ScalarMul(c, a) => c * const_value(a, lookup)?,
        Term::Square(a) => {
            let v = const_value(a, lookup)?;
            &v * &v
        }
        Term::NetApply { .. } | Term::NormDiff { .. } => return None,
    })
}

fn furthest(a: ParseError, b: ParseError) -> ParseError {
    match (a.line, a.col).cmp(&(b.line, b.col)) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => match (a.kind, b.kind) {
            (
                ParseErrorKind::Unexpected {
                    mut expected,
                    found,
                },
                ParseErrorKind::Unexpected { expected: more, .. },
            ) => {
                for e in more {
                    if !expected.contains(&e) {
                        expected.push(e);
                    }
                }
                ParseError {
                    line: a.line,
                    col: a.col,
                    kind: ParseErrorKind::Unexpected { expected, found },
                }
            }
            (ak @ ParseErrorKind::Invalid(_), _) => ParseError {
                line: a.line,
                col: a.col,
                kind: ak,
            },
            (_, bk) => ParseError {
                line: b.line,
                col: b.col,
                kind: bk,
            },
        },
    }
}

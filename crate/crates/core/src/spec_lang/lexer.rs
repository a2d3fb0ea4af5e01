use super::ast::Span;
use crate::rational::Rational;
use num_bigint::BigInt;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(Rational),
    // keywords
    Network,
    Const,
    Prop,
    Forall,
    Exists,
    Where,
    In,
    And,
    Or,
    Not,
    Robust,
    At,
    Eps,
    Delta,
    Linf,
    L1,
    // punctuation
    Colon,
    Arrow,
    Assign,
    Comma,
    Dot,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Le,
    Lt,
    Ge,
    Gt,
    Implies,
    Eof,
    /// A byte sequence that starts no token.
    Invalid(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Number(q) => return write!(f, "number `{}`", crate::rational::format_rational(q)),
            Tok::Invalid(c) => return write!(f, "invalid character {c:?}"),
            Tok::Network => "`network`",
            Tok::Const => "`const`",
            Tok::Prop => "`prop`",
            Tok::Forall => "`forall`",
            Tok::Exists => "`exists`",
            Tok::Where => "`where`",
            Tok::In => "`in`",
            Tok::And => "`and`",
            Tok::Or => "`or`",
            Tok::Not => "`not`",
            Tok::Robust => "`robust`",
            Tok::At => "`at`",
            Tok::Eps => "`eps`",
            Tok::Delta => "`delta`",
            Tok::Linf => "`linf`",
            Tok::L1 => "`l1`",
            Tok::Colon => "`:`",
            Tok::Arrow => "`->`",
            Tok::Assign => "`=`",
            Tok::Comma => "`,`",
            Tok::Dot => "`.`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Bang => "`!`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Caret => "`^`",
            Tok::Le => "`<=`",
            Tok::Lt => "`<`",
            Tok::Ge => "`>=`",
            Tok::Gt => "`>`",
            Tok::Implies => "`=>`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "network" => Tok::Network,
        "const" => Tok::Const,
        "prop" => Tok::Prop,
        "forall" => Tok::Forall,
        "exists" => Tok::Exists,
        "where" => Tok::Where,
        "in" => Tok::In,
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        "robust" => Tok::Robust,
        "at" => Tok::At,
        "eps" => Tok::Eps,
        "delta" => Tok::Delta,
        "linf" => Tok::Linf,
        "l1" => Tok::L1,
        _ => return None,
    })
}

pub fn is_reserved(word: &str) -> bool {
    keyword(word).is_some()
}

/// Splits source text into tokens. Never fails: unknown characters become
/// [`Tok::Invalid`] and are reported by the parser.
pub fn tokenize(src: &str) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            keyword(&word).unwrap_or(Tok::Ident(word))
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // A '.' is a decimal point only when a digit follows.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Number(decimal(&text))
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('=', Some('>')) => (Tok::Implies, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                (':', _) => (Tok::Colon, 1),
                ('=', _) => (Tok::Assign, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('!', _) => (Tok::Bang, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('^', _) => (Tok::Caret, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                (other, _) => (Tok::Invalid(other), 1),
            };
            i += len;
            tok
        };
        col += (i - start) as u32;
        out.push(Token { tok, span });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    out
}

fn decimal(text: &str) -> Rational {
    match text.split_once('.') {
        Some((whole, frac)) => {
            let digits: BigInt = format!("{whole}{frac}").parse().expect("lexed digits");
            Rational::new(digits, num_traits::pow(BigInt::from(10), frac.len()))
        }
        None => Rational::from_integer(text.parse().expect("lexed digits")),
    }
}

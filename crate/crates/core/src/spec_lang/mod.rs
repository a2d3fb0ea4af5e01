//! Property specification language: parsing, typechecking, desugaring.
//!
//! A spec declares networks, rational constants and named first-order
//! properties over network applications:
//!
//! ```text
//! network f : 2 -> 1
//! const B = 1
//! prop safe: forall v in [-1,1], p in [-1,1] where p > (v*v)/(2*B) . f[v,p]!0 <= -B
//! ```

pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typecheck;

pub use ast::*;
pub use desugar::{desugar_robustness, DesugarError};
pub use parser::{const_value, parse_spec, parse_spec_bytes, ParseError, ParseErrorKind};
pub use printer::{print_atom, print_formula, print_spec, print_term};
pub use typecheck::{typecheck, TypeError, TypedSpec};

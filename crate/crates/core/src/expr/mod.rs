//! A small arithmetic expression language used to write metrics, maps,
//! control functions and integrands as text.
//!
//! Grammar (standard precedence, left associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | ident | func '(' args ')' | '(' expr ')'
//! func    := abs | min | max | sqrt
//! ```

mod parser;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use parser::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Abs | Func::Sqrt => 1,
            Func::Min | Func::Max => 2,
        }
    }
}

/// Parsed expression tree. Literals are kept as `f64` and converted to the
/// evaluation scalar on use.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(String),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("square root of negative value in `{0}`")]
    NegativeSqrt(String),
}

/// Variable lookup used during evaluation.
pub trait Bindings<S> {
    fn lookup(&self, name: &str) -> Option<S>;
}

impl<S: Copy> Bindings<S> for [(&str, S)] {
    fn lookup(&self, name: &str) -> Option<S> {
        self.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

impl<S: Copy, const N: usize> Bindings<S> for [(&str, S); N] {
    fn lookup(&self, name: &str) -> Option<S> {
        self.as_slice().lookup(name)
    }
}

impl<S: Copy> Bindings<S> for HashMap<String, S> {
    fn lookup(&self, name: &str) -> Option<S> {
        self.get(name).copied()
    }
}

impl<S: Copy> Bindings<S> for BTreeMap<String, S> {
    fn lookup(&self, name: &str) -> Option<S> {
        self.get(name).copied()
    }
}

impl Expression {
    /// Every variable name referenced anywhere in the tree.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expression::Num(_) => {}
            Expression::Var(name) => {
                out.insert(name.clone());
            }
            Expression::Neg(inner) => inner.collect_vars(out),
            Expression::Binary(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expression::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Names in `free_variables` that are not in `allowed`, if any.
    pub fn check_variables(&self, allowed: &[&str]) -> Result<(), String> {
        match self.free_variables().into_iter().find(|v| !allowed.contains(&v.as_str())) {
            Some(bad) => Err(bad),
            None => Ok(()),
        }
    }

    pub fn evaluate<S, B>(&self, bindings: &B) -> Result<S, EvalError>
    where
        S: Scalar,
        B: Bindings<S> + ?Sized,
    {
        match self {
            Expression::Num(v) => Ok(S::lit(*v)),
            Expression::Var(name) => bindings.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Expression::Neg(inner) => Ok(-inner.evaluate(bindings)?),
            Expression::Binary(op, lhs, rhs) => {
                let a: S = lhs.evaluate(bindings)?;
                let b: S = rhs.evaluate(bindings)?;
                Ok(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == S::zero() {
                            return Err(EvalError::DivisionByZero(self.to_string()));
                        }
                        a / b
                    }
                })
            }
            Expression::Call(func, args) => {
                let a: S = args[0].evaluate(bindings)?;
                match func {
                    Func::Abs => Ok(a.abs()),
                    Func::Sqrt => {
                        if a < S::zero() {
                            return Err(EvalError::NegativeSqrt(self.to_string()));
                        }
                        Ok(a.sqrt())
                    }
                    Func::Min => Ok(a.min(args[1].evaluate(bindings)?)),
                    Func::Max => Ok(a.max(args[1].evaluate(bindings)?)),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary(op, _, _) => op.precedence(),
            Expression::Neg(_) => 3,
            _ => 4,
        }
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// Minimal parenthesization: the printed form re-parses to the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{v}"),
            Expression::Var(name) => f.write_str(name),
            Expression::Neg(inner) => {
                if inner.precedence() < 3 {
                    write!(f, "-({inner})")
                } else {
                    write!(f, "-{inner}")
                }
            }
            Expression::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expression::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

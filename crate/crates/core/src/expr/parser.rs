use thiserror::Error;

use super::{BinOp, Expression, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => *offset,
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
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, expected: impl Into<String>) -> ParseError {
    ParseError::Syntax { offset, expected: expected.into() }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return Err(syntax(i, "digit after decimal point"));
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    let exp = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == exp {
                        return Err(syntax(i, "exponent digits"));
                    }
                }
                let value: f64 = src[start..i].parse().map_err(|_| syntax(start, "number"))?;
                if !value.is_finite() {
                    return Err(syntax(start, "finite number literal"));
                }
                toks.push((start, Tok::Num(value)));
                continue;
            }
            b'a'..=b'z' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase() || bytes[i].is_ascii_digit() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => return Err(syntax(start, "number, identifier, operator or parenthesis")),
        };
        toks.push((start, tok));
        i += 1;
    }
    toks.push((src.len(), Tok::End));
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("{}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expression::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let is_call = *self.peek() == Tok::LParen;
                match (Func::from_name(&name), is_call) {
                    (Some(func), true) => self.call(func),
                    (Some(_), false) => Err(syntax(self.offset(), format!("`(` after function name `{name}`"))),
                    (None, true) => Err(ParseError::UnknownFunction { offset: at, name }),
                    (None, false) => Ok(Expression::Var(name)),
                }
            }
            other => Err(syntax(at, format!("expression, found {}", other.describe()))),
        }
    }

    fn call(&mut self, func: Func) -> Result<Expression, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while args.len() < func.arity() {
            self.expect(Tok::Comma)?;
            args.push(self.expr()?);
        }
        if *self.peek() == Tok::Comma {
            return Err(syntax(self.offset(), format!("`)`: {} takes {} argument(s)", func.name(), func.arity())));
        }
        self.expect(Tok::RParen)?;
        Ok(Expression::Call(func, args))
    }
}

/// Parses `source` into an [`Expression`].
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let toks = lex(source)?;
    if toks.len() == 1 {
        return Err(syntax(0, "expression, found end of input"));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), format!("operator or end of input, found {}", p.peek().describe())));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unterminated_call_reports_offset() {
        let err = parse("min(x,").unwrap_err();
        assert_eq!(err.offset(), 6);
        assert!(err.to_string().contains("expected expression"), "{err}");
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        let err = parse("2x").unwrap_err();
        assert_eq!(err.offset(), 1);
    }

    #[test]
    fn unknown_function() {
        assert_eq!(parse("1 + cos(x)").unwrap_err(), ParseError::UnknownFunction { offset: 4, name: "cos".into() });
    }

    #[test]
    fn reserved_names_are_not_variables() {
        assert!(matches!(parse("abs + 1"), Err(ParseError::Syntax { offset: 4, .. })));
    }

    #[test]
    fn malformed_inputs() {
        for src in ["", "   ", "x +", "(x", "x)", "1.", "1e", "X", "min(x)", "abs(x, y)", "0x1f", "1e999", "x $ y"] {
            assert!(parse(src).is_err(), "accepted {src:?}");
        }
    }

    #[test]
    fn number_forms() {
        for (src, v) in [("3", 3.0), ("3.25", 3.25), ("1e-3", 1e-3), ("2.5E+2", 250.0)] {
            assert_eq!(parse(src).unwrap(), Expression::Num(v));
        }
    }

    #[test]
    fn identifiers_with_digits_and_underscores() {
        assert_eq!(parse("x_1").unwrap(), Expression::Var("x_1".into()));
        assert_eq!(parse("n2").unwrap(), Expression::Var("n2".into()));
    }
}

//! Small real-valued expression language for weights and test functions.
//!
//! Variables are `x1, y1, x2, y2, ...` (real and imaginary parts of the
//! complex coordinates) and `z_abs2_k = xk^2 + yk^2`. Operators are
//! `+ - * / ^` with precedence `^` > unary minus > `* /` > `+ -`; `^` is
//! right-associative. Functions: `exp`, `log`, `abs` (one argument) and
//! `max`, `min` (two or more arguments).
//!
//! Evaluation points are real vectors `(x1, y1, x2, y2, ...)`.

use std::fmt;

use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// Real part of the k-th coordinate (1-based).
    Re(usize),
    /// Imaginary part of the k-th coordinate (1-based).
    Im(usize),
    /// Squared modulus of the k-th coordinate (1-based).
    AbsSq(usize),
}

impl Variable {
    pub fn index(&self) -> usize {
        match *self {
            Variable::Re(k) | Variable::Im(k) | Variable::AbsSq(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(&self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Exp,
    Log,
    Abs,
    Max,
    Min,
}

impl Function {
    fn name(&self) -> &'static str {
        match self {
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Abs => "abs",
            Function::Max => "max",
            Function::Min => "min",
        }
    }

    fn from_name(name: &str) -> Option<Function> {
        Some(match name {
            "exp" => Function::Exp,
            "log" => Function::Log,
            "abs" => Function::Abs,
            "max" => Function::Max,
            "min" => Function::Min,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Var(Variable),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

/// Expression node with the byte offset of its source text.
/// Equality ignores offsets.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    Arity { function: String, expected: String, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier '{name}'"),
            ParseErrorKind::Arity { function, expected, got } => {
                write!(f, "{function} expects {expected} argument(s), got {got}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    LogOfNonPositive(f64),
    DivisionByZero,
    PowerDomain { base: f64, exponent: f64 },
    NonFinite,
    MissingVariable { index: usize, point_len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at offset {offset}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub offset: usize,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalErrorKind::LogOfNonPositive(x) => write!(f, "log of non-positive argument {x}"),
            EvalErrorKind::DivisionByZero => write!(f, "division by zero"),
            EvalErrorKind::PowerDomain { base, exponent } => {
                write!(f, "power {base}^{exponent} is not a finite real number")
            }
            EvalErrorKind::NonFinite => write!(f, "non-finite intermediate value"),
            EvalErrorKind::MissingVariable { index, point_len } => write!(
                f,
                "variable index {index} needs a point of length {}, got {point_len}",
                2 * index
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax(format!("malformed number '{text}'")),
                offset: start,
            })?;
            out.push((Token::Number(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Token::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                ',' => Token::Comma,
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax(format!("unexpected character '{c}'")),
                        offset: start,
                    })
                }
            };
            i += c.len_utf8();
            out.push((tok, start));
        }
    }
    Ok(out)
}

fn parse_variable(name: &str) -> Option<Variable> {
    let index = |digits: &str| -> Option<usize> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return None;
        }
        digits.parse().ok()
    };
    if let Some(rest) = name.strip_prefix("z_abs2_") {
        return index(rest).map(Variable::AbsSq);
    }
    if let Some(rest) = name.strip_prefix('x') {
        return index(rest).map(Variable::Re);
    }
    if let Some(rest) = name.strip_prefix('y') {
        return index(rest).map(Variable::Im);
    }
    None
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { kind: ParseErrorKind::Syntax(msg.into()), offset: self.offset() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            let offset = self.offset();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            let offset = self.offset();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Token::Op('-')) = self.peek() {
            let offset = self.offset();
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), offset });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            let offset = self.offset();
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                offset,
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.pos += 1;
                Ok(Expr { kind: ExprKind::Number(v), offset })
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return self.syntax("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Function::from_name(&name) {
                    if self.peek() != Some(&Token::LParen) {
                        return self.syntax(format!("expected '(' after {name}"));
                    }
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Token::RParen) {
                        loop {
                            args.push(self.expr()?);
                            match self.peek() {
                                Some(Token::Comma) => self.pos += 1,
                                Some(Token::RParen) => break,
                                _ => return self.syntax("expected ',' or ')'"),
                            }
                        }
                    }
                    self.pos += 1;
                    let ok = match func {
                        Function::Exp | Function::Log | Function::Abs => args.len() == 1,
                        Function::Max | Function::Min => args.len() >= 2,
                    };
                    if !ok {
                        let expected = match func {
                            Function::Max | Function::Min => "at least 2",
                            _ => "1",
                        };
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity {
                                function: name,
                                expected: expected.to_string(),
                                got: args.len(),
                            },
                            offset,
                        });
                    }
                    Ok(Expr { kind: ExprKind::Call(func, args), offset })
                } else if let Some(var) = parse_variable(&name) {
                    Ok(Expr { kind: ExprKind::Var(var), offset })
                } else {
                    Err(ParseError { kind: ParseErrorKind::UnknownIdentifier(name), offset })
                }
            }
            Some(tok) => self.syntax(format!("unexpected token {}", describe(&tok))),
            None => self.syntax("unexpected end of input"),
        }
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Op(c) => format!("'{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::Comma => "','".into(),
    }
}

/// Parse an expression string.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser { tokens, pos: 0, end: src.len() };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        let tok = parser.tokens[parser.pos].0.clone();
        return parser.syntax(format!("unexpected token {}", describe(&tok)));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(v) => write!(f, "{v:?}"),
            ExprKind::Var(Variable::Re(k)) => write!(f, "x{k}"),
            ExprKind::Var(Variable::Im(k)) => write!(f, "y{k}"),
            ExprKind::Var(Variable::AbsSq(k)) => write!(f, "z_abs2_{k}"),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Expr {
    /// Largest 1-based coordinate index referenced (0 for constants).
    pub fn max_variable_index(&self) -> usize {
        match &self.kind {
            ExprKind::Number(_) => 0,
            ExprKind::Var(v) => v.index(),
            ExprKind::Neg(e) => e.max_variable_index(),
            ExprKind::Binary(_, a, b) => a.max_variable_index().max(b.max_variable_index()),
            ExprKind::Call(_, args) => args.iter().map(|a| a.max_variable_index()).max().unwrap_or(0),
        }
    }

    /// Evaluate at a real point `(x1, y1, x2, y2, ...)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let err = |kind| Err(EvalError { kind, offset: self.offset });
        let v = match &self.kind {
            ExprKind::Number(v) => *v,
            ExprKind::Var(var) => {
                let k = var.index();
                if 2 * k > point.len() {
                    return err(EvalErrorKind::MissingVariable { index: k, point_len: point.len() });
                }
                let (x, y) = (point[2 * k - 2], point[2 * k - 1]);
                match var {
                    Variable::Re(_) => x,
                    Variable::Im(_) => y,
                    Variable::AbsSq(_) => x * x + y * y,
                }
            }
            ExprKind::Neg(e) => -e.eval(point)?,
            ExprKind::Binary(op, a, b) => {
                let x = a.eval(point)?;
                let y = b.eval(point)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return err(EvalErrorKind::DivisionByZero);
                        }
                        x / y
                    }
                    BinaryOp::Pow => {
                        let r = if y == 2.0 { x * x } else { x.powf(y) };
                        if !r.is_finite() {
                            return err(EvalErrorKind::PowerDomain { base: x, exponent: y });
                        }
                        r
                    }
                }
            }
            ExprKind::Call(func, args) => match func {
                Function::Exp => args[0].eval(point)?.exp(),
                Function::Abs => args[0].eval(point)?.abs(),
                Function::Log => {
                    let x = args[0].eval(point)?;
                    if !(x > 0.0) {
                        return err(EvalErrorKind::LogOfNonPositive(x));
                    }
                    x.ln()
                }
                Function::Max | Function::Min => {
                    let mut acc = args[0].eval(point)?;
                    for a in &args[1..] {
                        let v = a.eval(point)?;
                        acc = if *func == Function::Max { acc.max(v) } else { acc.min(v) };
                    }
                    acc
                }
            },
        };
        if !v.is_finite() {
            return err(EvalErrorKind::NonFinite);
        }
        Ok(v)
    }

    /// Evaluate at a point of C^n.
    pub fn eval_complex(&self, z: &[C64]) -> Result<f64, EvalError> {
        self.eval(&to_real_point(z))
    }
}

/// Flatten `(z1, ..., zn)` into `(x1, y1, ..., xn, yn)`.
pub fn to_real_point(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|w| [w.re, w.im]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn num(v: f64) -> Expr {
        Expr { kind: ExprKind::Number(v), offset: 0 }
    }
    fn var(v: Variable) -> Expr {
        Expr { kind: ExprKind::Var(v), offset: 0 }
    }
    fn bin(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr { kind: ExprKind::Binary(op, Box::new(a), Box::new(b)), offset: 0 }
    }

    #[test]
    fn parses_sum_of_squares() {
        let e = parse_expr("x1^2 + y1^2").unwrap();
        let expected = bin(
            BinaryOp::Add,
            bin(BinaryOp::Pow, var(Variable::Re(1)), num(2.0)),
            bin(BinaryOp::Pow, var(Variable::Im(1)), num(2.0)),
        );
        assert_eq!(e, expected);
        assert_eq!(e.eval(&[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn log_of_zero_is_an_error() {
        let e = parse_expr("log(x1)").unwrap();
        let err = e.eval(&[0.0, 0.0]).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::LogOfNonPositive(_)));
    }

    #[test]
    fn syntax_error_reports_offset() {
        let err = parse_expr("x1 + * 2").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(parse_expr("w1 + 1").unwrap_err().kind, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(parse_expr("x0").unwrap_err().kind, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(parse_expr("exp(x1, y1)").unwrap_err().kind, ParseErrorKind::Arity { .. }));
        assert!(matches!(parse_expr("max(x1)").unwrap_err().kind, ParseErrorKind::Arity { .. }));
    }

    #[test]
    fn precedence_and_associativity() {
        let at = |s: &str, p: &[f64]| parse_expr(s).unwrap().eval(p).unwrap();
        assert_eq!(at("-x1^2", &[3.0, 0.0]), -9.0);
        assert_eq!(at("2^3^2", &[]), 512.0);
        assert_eq!(at("8/2/2", &[]), 2.0);
        assert_eq!(at("1 - 2 - 3", &[]), -4.0);
        assert_eq!(at("2^-1", &[]), 0.5);
        assert_eq!(at("z_abs2_2 + max(x1, y1, 7)", &[1.0, 2.0, 3.0, 4.0]), 32.0);
        assert_eq!(at("1e-2 * 100", &[]), 1.0);
    }

    #[test]
    fn missing_variable_and_division_by_zero() {
        let e = parse_expr("x2").unwrap();
        assert!(matches!(e.eval(&[1.0, 2.0]).unwrap_err().kind, EvalErrorKind::MissingVariable { .. }));
        let e = parse_expr("1/(x1-1)").unwrap();
        assert!(matches!(e.eval(&[1.0, 0.0]).unwrap_err().kind, EvalErrorKind::DivisionByZero));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(num),
            (1usize..4).prop_map(|k| var(Variable::Re(k))),
            (1usize..4).prop_map(|k| var(Variable::Im(k))),
            (1usize..4).prop_map(|k| var(Variable::AbsSq(k))),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr { kind: ExprKind::Neg(Box::new(e)), offset: 0 }),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div),
                        Just(BinaryOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| bin(op, a, b)),
                inner.clone().prop_map(|e| Expr { kind: ExprKind::Call(Function::Exp, vec![e]), offset: 0 }),
                (inner.clone(), inner)
                    .prop_map(|(a, b)| Expr { kind: ExprKind::Call(Function::Max, vec![a, b]), offset: 0 }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let printed = e.to_string();
            let once = parse_expr(&printed).unwrap();
            prop_assert_eq!(&once, &e);
            let twice = parse_expr(&once.to_string()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}

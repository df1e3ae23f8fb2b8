//! Arithmetic expressions over grid coordinates.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | 'x1'..'x4' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | tan | atan | exp | abs
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-x1^2` is `-(x1^2)` and `2^3^2` is `2^9`.

use std::fmt;

use thiserror::Error;

/// Parse failure with a 1-based column into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("column {column}: {message}")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses `text`, allowing coordinates `x1..x{dim}`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0, dim, end: text.chars().count() + 1 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(p.error_at(t.column, format!("unexpected {}", t.kind))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => pow(a.eval(x), b.eval(x)),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }
}

/// Integer exponents go through `powi` so `x^2` is exactly `x*x`.
fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(v) => write!(f, "number {v}"),
            Kind::Ident(s) => write!(f, "identifier '{s}'"),
            Kind::Op(c) => write!(f, "'{c}'"),
            Kind::LParen => f.write_str("'('"),
            Kind::RParen => f.write_str("')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => {
                i += 1;
                Kind::Op(c)
            }
            '(' => {
                i += 1;
                Kind::LParen
            }
            ')' => {
                i += 1;
                Kind::RParen
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let v = lit.parse::<f64>().map_err(|_| ExprError {
                    column,
                    message: format!("malformed number '{lit}'"),
                })?;
                Kind::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Kind::Ident(chars[start..i].iter().collect())
            }
            other => {
                return Err(ExprError {
                    column,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push(Token { kind, column });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error_at(&self, column: usize, message: impl Into<String>) -> ExprError {
        ExprError { column, message: message.into() }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.next() else {
            return Err(self.error_at(self.end, "unexpected end of expression"));
        };
        match tok.kind {
            Kind::Num(v) => Ok(Expr::Num(v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.close(tok.column)?;
                Ok(e)
            }
            Kind::Ident(name) => self.ident(&name, tok.column),
            other => Err(self.error_at(tok.column, format!("unexpected {other}"))),
        }
    }

    fn ident(&mut self, name: &str, column: usize) -> Result<Expr, ExprError> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(func) = Func::from_name(name) {
            match self.next() {
                Some(Token { kind: Kind::LParen, column: open }) => {
                    let arg = self.expr()?;
                    self.close(open)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Some(t) => return Err(self.error_at(t.column, format!("expected '(' after {name}"))),
                None => return Err(self.error_at(self.end, format!("expected '(' after {name}"))),
            }
        }
        if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if (1..=self.dim).contains(&k) {
                return Ok(Expr::Var(k - 1));
            }
            let allowed = match self.dim {
                0 => "no coordinates are available here".to_string(),
                d => format!("coordinates are x1..x{d}"),
            };
            return Err(self.error_at(column, format!("unknown variable '{name}' ({allowed})")));
        }
        Err(self.error_at(column, format!("unknown identifier '{name}'")))
    }

    fn close(&mut self, open: usize) -> Result<(), ExprError> {
        match self.next() {
            Some(Token { kind: Kind::RParen, .. }) => Ok(()),
            Some(t) => Err(self.error_at(t.column, format!("expected ')' to close column {open}, found {}", t.kind))),
            None => Err(self.error_at(self.end, format!("unclosed '(' at column {open}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s, x.len()).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[]), -4.0);
        assert_eq!(eval("2 ^ -1", &[]), 0.5);
        assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval("1 - 2 - 3", &[]), -4.0);
        assert_eq!(eval("--3", &[]), 3.0);
    }

    #[test]
    fn variables_functions_constants() {
        let x = [0.3, -1.25];
        let v = eval("0.5*(x1^2 + x2^2) + sin(x1)*cos(x2) - atan(tan(0.4)) + exp(0) + abs(x2)", &x);
        let want = 0.5 * (0.09 + 1.5625) + 0.3f64.sin() * (-1.25f64).cos() - 0.4 + 1.0 + 1.25;
        assert!((v - want).abs() < 1e-15);
        assert_eq!(eval("pi/2", &[]), std::f64::consts::FRAC_PI_2);
        assert_eq!(eval("1.5e-3 + 2E2", &[]), 200.0015);
    }

    #[test]
    fn integer_powers_are_exact() {
        let x = [0.1];
        assert_eq!(eval("x1^2", &x).to_bits(), (0.1f64 * 0.1).to_bits());
    }

    #[test]
    fn errors_point_at_the_offending_column() {
        let cases = [
            ("1 + ", 5, "end of expression"),
            ("2 * (x1 + 1", 12, "unclosed '('"),
            ("x3 + 1", 1, "unknown variable 'x3'"),
            ("sqrt(2)", 1, "unknown identifier 'sqrt'"),
            ("1 + $", 5, "unexpected character '$'"),
            ("sin 2", 5, "expected '(' after sin"),
            ("1 2", 3, "unexpected number"),
            ("()", 2, "unexpected ')'"),
        ];
        for (src, column, needle) in cases {
            let err = Expr::parse(src, 2).unwrap_err();
            assert_eq!(err.column, column, "{src}: {err}");
            assert!(err.message.contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("-x1^2 + 3*sin(x2)/(1 - x1)", 2).unwrap();
        let again = Expr::parse(&e.to_string(), 2).unwrap();
        for x in [[0.2, 0.7], [-1.3, 2.0]] {
            assert_eq!(e.eval(&x).to_bits(), again.eval(&x).to_bits());
        }
        assert_eq!(e.max_var(), Some(1));
    }
}

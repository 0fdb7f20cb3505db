//! A small expression language for coefficient profiles and initial data.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := NUMBER | VAR | '(' expr ')' | FUNC '(' expr ')'
//! FUNC   := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```
//!
//! Coefficients use the single variable `x`; initial data may also use
//! `y` and `z`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    /// Produced by differentiation of general powers; not accepted by the parser.
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Variable index: 0 = x, 1 = y, 2 = z.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

const VAR_NAMES: [&str; 3] = ["x", "y", "z"];

/// Parses an expression in the single variable `x`.
pub fn parse_expr(text: &str) -> Result<Expr> {
    Parser::new(text, 1).parse()
}

/// Parses an expression in the variables `x`, `y`, `z`.
pub fn parse_expr_xyz(text: &str) -> Result<Expr> {
    Parser::new(text, 3).parse()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, nvars: usize) -> Self {
        Self { src: text.as_bytes(), pos: 0, nvars }
    }

    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if let Some(i) = self.src.iter().position(|b| !b.is_ascii()) {
            return self.err(i, "non-ASCII input");
        }
        let e = self.expr()?;
        match self.peek() {
            None => Ok(e),
            Some(c) => self.err(self.pos, format!("unexpected '{}'", c as char)),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            None => return self.err(self.pos, "unexpected end of input"),
            Some(_) => self.pos,
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return self.err(self.pos, "expected ')'");
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..end]).expect("ascii checked");
            self.pos = end;
            if let Some(k) = VAR_NAMES[..self.nvars].iter().position(|v| *v == ident) {
                return Ok(Expr::Var(k));
            }
            let func = match ident {
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "exp" => Func::Exp,
                "sqrt" => Func::Sqrt,
                _ => return self.err(start, format!("unknown identifier '{ident}'")),
            };
            if !self.eat(b'(') {
                return self.err(self.pos, format!("expected '(' after '{ident}'"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return self.err(self.pos, "expected ')'");
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        self.err(start, format!("unexpected '{}'", c as char))
    }

    fn number(&mut self) -> Result<Expr> {
        let s = self.src;
        let start = self.pos;
        let mut i = start;
        let digits = |i: &mut usize| {
            let from = *i;
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - from
        };
        let mut mantissa = digits(&mut i);
        if i < s.len() && s[i] == b'.' {
            i += 1;
            mantissa += digits(&mut i);
        }
        if mantissa == 0 {
            return self.err(start, "malformed number");
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut k = i + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if digits(&mut k) == 0 {
                return self.err(i, "malformed exponent");
            }
            i = k;
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii checked");
        let v: f64 = text
            .parse()
            .map_err(|_| Error::Syntax { offset: start, message: format!("bad number '{text}'") })?;
        self.pos = i;
        Ok(Expr::Num(v))
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(k: usize) -> Self {
        Expr::Var(k)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// True if the expression does not reference any variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(u) | Expr::Call(_, u) => u.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Evaluates with `vars[k]` bound to variable `k`.
    pub fn eval(&self, vars: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(k) => *vars
                .get(*k)
                .ok_or_else(|| Error::Eval(format!("variable {} is unbound", VAR_NAMES[*k])))?,
            Expr::Neg(u) => -u.eval(vars)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars)?, b.eval(vars)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, u) => {
                let a = u.eval(vars)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Eval(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(Error::Eval(format!("ln of nonpositive value {a}")));
                        }
                        a.ln()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite value in '{self}'")))
        }
    }

    /// Evaluates a single-variable expression at `x`.
    pub fn eval_at(&self, x: f64) -> Result<f64> {
        self.eval(&[x])
    }

    /// Symbolic derivative with respect to variable `var`.
    pub fn differentiate_wrt(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(k) => Expr::Num(if *k == var { 1.0 } else { 0.0 }),
            Expr::Neg(u) => neg(u.differentiate_wrt(var)),
            Expr::Bin(op, u, v) => {
                let du = u.differentiate_wrt(var);
                let dv = v.differentiate_wrt(var);
                let (u, v) = (u.as_ref().clone(), v.as_ref().clone());
                match op {
                    BinOp::Add => add(du, dv),
                    BinOp::Sub => sub(du, dv),
                    BinOp::Mul => add(mul(du, v), mul(u, dv)),
                    BinOp::Div => div(sub(mul(du, v.clone()), mul(u, dv)), pow(v, Expr::Num(2.0))),
                    BinOp::Pow => {
                        if let Some(c) = v.as_const() {
                            mul(mul(Expr::Num(c), pow(u, Expr::Num(c - 1.0))), du)
                        } else if let Some(a) = u.as_const() {
                            mul(mul(pow(Expr::Num(a), v), call(Func::Ln, Expr::Num(a))), dv)
                        } else {
                            let p = pow(u.clone(), v.clone());
                            let inner = add(mul(dv, call(Func::Ln, u.clone())), div(mul(v, du), u));
                            mul(p, inner)
                        }
                    }
                }
            }
            Expr::Call(f, u) => {
                let du = u.differentiate_wrt(var);
                let u = u.as_ref().clone();
                match f {
                    Func::Sin => mul(call(Func::Cos, u), du),
                    Func::Cos => mul(neg(call(Func::Sin, u)), du),
                    Func::Exp => mul(call(Func::Exp, u), du),
                    Func::Sqrt => div(du, mul(Expr::Num(2.0), call(Func::Sqrt, u))),
                    Func::Ln => div(du, u),
                }
            }
        }
    }

    /// Derivative with respect to `x`.
    pub fn differentiate(&self) -> Expr {
        self.differentiate_wrt(0)
    }
}

/// Derivative with respect to `x`.
pub fn differentiate(e: &Expr) -> Expr {
    e.differentiate()
}

fn fold(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::Num(v)
    } else {
        fallback()
    }
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Bin(op, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(u) => *u,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => bin(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => bin(BinOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => fold(x / y, || bin(BinOp::Div, a.clone(), b.clone())),
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(1.0)) => a,
        _ => bin(BinOp::Div, a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x.powf(y), || bin(BinOp::Pow, a.clone(), b.clone())),
        (_, Some(0.0)) => Expr::Num(1.0),
        (_, Some(1.0)) => a,
        _ => bin(BinOp::Pow, a, b),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    if let Some(x) = a.as_const() {
        let v = match f {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt if x >= 0.0 => x.sqrt(),
            Func::Ln if x > 0.0 => x.ln(),
            _ => f64::NAN,
        };
        if v.is_finite() {
            return Expr::Num(v);
        }
    }
    Expr::Call(f, Box::new(a))
}

// Binding strength used for printing: higher binds tighter.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Bin(BinOp::Pow, ..) => 3,
        Expr::Neg(_) => 4,
        Expr::Num(v) if *v < 0.0 => 4,
        _ => 5,
    }
}

struct Wrapped<'a>(&'a Expr, bool);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(k) => f.write_str(VAR_NAMES[*k]),
            Expr::Neg(u) => write!(f, "-{}", Wrapped(u, prec(u) < 4)),
            Expr::Call(func, u) => write!(f, "{}({})", func.name(), u),
            Expr::Bin(op, a, b) => {
                let p = prec(self);
                let (sym, wrap_a, wrap_b) = match op {
                    BinOp::Add => ("+", prec(a) < p, prec(b) <= p && matches!(**b, Expr::Bin(..))),
                    BinOp::Sub => ("-", prec(a) < p, prec(b) <= p && matches!(**b, Expr::Bin(..))),
                    BinOp::Mul => ("*", prec(a) < p, prec(b) <= p && matches!(**b, Expr::Bin(..))),
                    BinOp::Div => ("/", prec(a) < p, prec(b) <= p && matches!(**b, Expr::Bin(..))),
                    // base is a unary; exponent is a factor
                    BinOp::Pow => ("^", prec(a) < 4, prec(b) < 3),
                };
                write!(f, "{}{}{}", Wrapped(a, wrap_a), sym, Wrapped(b, wrap_b))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: f64) -> Box<Expr> {
        Box::new(Expr::Num(v))
    }

    fn x() -> Box<Expr> {
        Box::new(Expr::Var(0))
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_expr("1+0.1*x").unwrap(),
            Expr::Bin(BinOp::Add, n(1.0), Box::new(Expr::Bin(BinOp::Mul, n(0.1), x())))
        );
        assert_eq!(
            parse_expr("sin(x)^2").unwrap(),
            Expr::Bin(BinOp::Pow, Box::new(Expr::Call(Func::Sin, x())), n(2.0))
        );
        assert_eq!(
            parse_expr("1+*x"),
            Err(Error::Syntax { offset: 2, message: "unexpected '*'".into() })
        );
    }

    #[test]
    fn power_is_right_associative_and_takes_unary_base() {
        let e = parse_expr("2^3^2").unwrap();
        assert_eq!(e.eval_at(0.0).unwrap(), 512.0);
        // the base of '^' is a unary, so the minus binds first
        assert_eq!(parse_expr("-x^2").unwrap().eval_at(3.0).unwrap(), 9.0);
        assert_eq!(parse_expr("0-x^2").unwrap().eval_at(3.0).unwrap(), -9.0);
        assert_eq!(parse_expr("2^-1").unwrap().eval_at(0.0).unwrap(), 0.5);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(parse_expr("x^2").unwrap().differentiate().to_string(), "2*x");
        assert_eq!(parse_expr("sin(x)").unwrap().differentiate().to_string(), "cos(x)");
        assert_eq!(parse_expr("5").unwrap().differentiate().to_string(), "0");
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(parse_expr("1/x").unwrap().eval_at(0.0), Err(Error::Eval(_))));
        assert!(matches!(parse_expr("sqrt(x)").unwrap().eval_at(-1.0), Err(Error::Eval(_))));
        assert!(matches!(parse_expr("x^0.5").unwrap().eval_at(-1.0), Err(Error::Eval(_))));
    }

    #[test]
    fn xyz_variables() {
        assert!(parse_expr("y").is_err());
        let e = parse_expr_xyz("x*y+z").unwrap();
        assert_eq!(e.eval(&[2.0, 3.0, 4.0]).unwrap(), 10.0);
        assert_eq!(e.differentiate_wrt(1).eval(&[2.0, 3.0, 4.0]).unwrap(), 2.0);
    }

    fn expr_strategy() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..5.0).prop_map(Expr::Num),
            Just(Expr::Var(0)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))),
                (inner.clone(), 0u8..4).prop_map(|(a, k)| Expr::Bin(BinOp::Pow, Box::new(a), n(k as f64))),
                inner.clone().prop_map(|e| Expr::Call(Func::Sin, Box::new(e))),
                inner.clone().prop_map(|e| Expr::Call(Func::Cos, Box::new(e))),
                inner.prop_map(|e| Expr::Call(Func::Exp, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn printing_reparses_to_the_same_tree(e in expr_strategy()) {
            let text = e.to_string();
            prop_assert_eq!(parse_expr(&text).unwrap(), e);
        }

        #[test]
        fn derivative_matches_central_differences(e in expr_strategy(), x0 in 0.1f64..2.0) {
            let d = e.differentiate();
            let h = 1e-5;
            let (Ok(f1), Ok(f0), Ok(dv)) = (e.eval_at(x0 + h), e.eval_at(x0 - h), d.eval_at(x0)) else {
                return Ok(());
            };
            prop_assume!(dv.abs() < 1e4 && f1.abs() < 1e6);
            let fd = (f1 - f0) / (2.0 * h);
            // second-order FD error plus roundoff; skip nearly singular points
            let check = e.differentiate().differentiate().differentiate().eval_at(x0);
            prop_assume!(matches!(check, Ok(c) if c.abs() < 1e4));
            prop_assert!((fd - dv).abs() <= 1e-6 * (1.0 + dv.abs()) + 1e-15 * f1.abs().max(f0.abs()) / h);
        }
    }
}

//! A small expression language for distances, maps, gauge functions and
//! coefficient schedules.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          (right associative)
//! primary := number | variable | call | '(' expr ')'
//! call    := func '(' expr (',' expr)* ')'
//!          | 'if' '(' expr cmp expr ',' expr ',' expr ')'
//! cmp     := '<' | '<=' | '>' | '>=' | '=' | '≤' | '≥'
//! ```
//!
//! Variables come from the fixed set `x y z i j n s t`. Comparisons are only
//! legal as the first argument of `if`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Z,
    I,
    J,
    N,
    S,
    T,
}

impl Var {
    pub const ALL: [Var; 8] = [Var::X, Var::Y, Var::Z, Var::I, Var::J, Var::N, Var::S, Var::T];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::I => "i",
            Var::J => "j",
            Var::N => "n",
            Var::S => "s",
            Var::T => "t",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn unary(self) -> bool {
        !matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If {
        lhs: Box<Expr>,
        op: CmpOp,
        rhs: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
}

/// Values for the variables an expression may reference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings([Option<f64>; 8]);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.0[var.slot()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.0[var.slot()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.0[var.slot()]
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        Parser::new(text)?.parse_all()
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn eval(&self, env: &Bindings) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env.get(*var).ok_or_else(|| {
                Error::Eval(format!("variable `{}` is not bound here", var.name()))
            })?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval(format!("division by zero ({a} / 0)")));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval(env)?);
                }
                match f {
                    Func::Sqrt => {
                        if vals[0] < 0.0 {
                            return Err(Error::Eval(format!("sqrt of negative value {}", vals[0])));
                        }
                        vals[0].sqrt()
                    }
                    Func::Abs => vals[0].abs(),
                    Func::Exp => vals[0].exp(),
                    Func::Log => {
                        if vals[0] <= 0.0 {
                            return Err(Error::Eval(format!("log of nonpositive value {}", vals[0])));
                        }
                        vals[0].ln()
                    }
                    Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                    Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
            Expr::If {
                lhs,
                op,
                rhs,
                then,
                otherwise,
            } => {
                if op.holds(lhs.eval(env)?, rhs.eval(env)?) {
                    then.eval(env)?
                } else {
                    otherwise.eval(env)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite result while evaluating `{self}`")))
        }
    }

    /// Every variable referenced anywhere in the tree, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Expr::If {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => {
                for e in [lhs, rhs, then, otherwise] {
                    e.collect_vars(out);
                }
            }
        }
    }

    /// Fails with a usage error naming the first variable outside `allowed`.
    pub fn check_scope(&self, allowed: &[Var], role: &str) -> Result<()> {
        match self.variables().into_iter().find(|v| !allowed.contains(v)) {
            Some(v) => {
                let names: Vec<_> = allowed.iter().map(|v| v.name()).collect();
                Err(Error::Scenario(format!(
                    "{role} expression `{self}` uses `{}`; allowed variables: {}",
                    v.name(),
                    names.join(", ")
                )))
            }
            None => Ok(()),
        }
    }

    /// Renames variables according to `map`; unmapped variables are kept.
    pub fn rename(&self, map: &dyn Fn(Var) -> Var) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(v) => Expr::Var(map(*v)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename(map))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.rename(map)), Box::new(b.rename(map)))
            }
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.rename(map)).collect()),
            Expr::If {
                lhs,
                op,
                rhs,
                then,
                otherwise,
            } => Expr::If {
                lhs: Box::new(lhs.rename(map)),
                op: *op,
                rhs: Box::new(rhs.rename(map)),
                then: Box::new(then.rename(map)),
                otherwise: Box::new(otherwise.rename(map)),
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(v) => f.write_str(v.name())?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write_at(f, 3)?;
            }
            Expr::Binary(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => (" * ", 2, 3),
                    BinOp::Div => (" / ", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                a.write_at(f, left)?;
                f.write_str(sym)?;
                b.write_at(f, right)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    a.write_at(f, 0)?;
                }
                f.write_str(")")?;
            }
            Expr::If {
                lhs,
                op,
                rhs,
                then,
                otherwise,
            } => {
                f.write_str("if(")?;
                lhs.write_at(f, 0)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_at(f, 0)?;
                f.write_str(", ")?;
                then.write_at(f, 0)?;
                f.write_str(", ")?;
                otherwise.write_at(f, 0)?;
                f.write_str(")")?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
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
    Cmp(CmpOp),
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let c = bytes[k];
        let start = k;
        if c.is_ascii_whitespace() {
            k += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(k + 1).is_some_and(u8::is_ascii_digit)) {
            while k < bytes.len() && (bytes[k].is_ascii_digit() || bytes[k] == b'.') {
                k += 1;
            }
            if k < bytes.len() && (bytes[k] == b'e' || bytes[k] == b'E') {
                let mut m = k + 1;
                if m < bytes.len() && (bytes[m] == b'+' || bytes[m] == b'-') {
                    m += 1;
                }
                if m < bytes.len() && bytes[m].is_ascii_digit() {
                    k = m;
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                }
            }
            let lit = &text[start..k];
            let v: f64 = lit
                .parse()
                .or_else(|_| parse_err(start, format!("malformed number `{lit}`")))?;
            toks.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            toks.push((Tok::Ident(text[start..k].to_string()), start));
            continue;
        }
        let rest = &text[k..];
        let (tok, len) = if rest.starts_with("<=") {
            (Tok::Cmp(CmpOp::Le), 2)
        } else if rest.starts_with(">=") {
            (Tok::Cmp(CmpOp::Ge), 2)
        } else if rest.starts_with('≤') {
            (Tok::Cmp(CmpOp::Le), '≤'.len_utf8())
        } else if rest.starts_with('≥') {
            (Tok::Cmp(CmpOp::Ge), '≥'.len_utf8())
        } else {
            let t = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                b'<' => Tok::Cmp(CmpOp::Lt),
                b'>' => Tok::Cmp(CmpOp::Gt),
                b'=' => Tok::Cmp(CmpOp::Eq),
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return parse_err(start, format!("unexpected character `{ch}`"));
                }
            };
            (t, 1)
        };
        toks.push((tok, start));
        k += len;
    }
    toks.push((Tok::End, text.len()));
    Ok(toks)
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return parse_err(0, "empty expression");
        }
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            parse_err(self.offset(), format!("expected {what}"))
        }
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            Tok::Cmp(_) => parse_err(self.offset(), "comparisons are only allowed inside if(...)"),
            _ => parse_err(self.offset(), "unexpected trailing input"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    return self.call(&name, at);
                }
                match Var::from_name(&name) {
                    Some(v) => Ok(Expr::Var(v)),
                    None => parse_err(at, format!("unknown identifier `{name}`")),
                }
            }
            Tok::End => parse_err(at, "unexpected end of input"),
            other => parse_err(at, format!("unexpected token {other:?}")),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Expr> {
        if name == "if" {
            let lhs = self.expr()?;
            let op = match self.bump() {
                Tok::Cmp(op) => op,
                _ => return parse_err(self.offset(), "expected a comparison in if(...)"),
            };
            let rhs = self.expr()?;
            self.expect(Tok::Comma, "`,` after if condition")?;
            let then = self.expr()?;
            self.expect(Tok::Comma, "`,` before else branch")?;
            let otherwise = self.expr()?;
            self.expect(Tok::RParen, "`)` closing if(...)")?;
            return Ok(Expr::If {
                lhs: Box::new(lhs),
                op,
                rhs: Box::new(rhs),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        let func = match Func::from_name(name) {
            Some(f) => f,
            None => return parse_err(at, format!("unknown function `{name}`")),
        };
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)` closing argument list")?;
        if func.unary() && args.len() != 1 {
            return parse_err(at, format!("{name} takes 1 argument, got {}", args.len()));
        }
        if !func.unary() && args.len() < 2 {
            return parse_err(at, format!("{name} takes at least 2 arguments, got {}", args.len()));
        }
        Ok(Expr::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, env: Bindings) -> f64 {
        Expr::parse(text).unwrap().eval(&env).unwrap()
    }

    #[test]
    fn map_of_first_example() {
        let env = Bindings::new().with(Var::X, 1.0).with(Var::I, 2.0);
        assert_eq!(eval("x / 16^i", env), 1.0 / 256.0);
    }

    #[test]
    fn piecewise_map_at_zero() {
        let env = Bindings::new().with(Var::X, 0.0).with(Var::N, 1.0);
        let v = eval("if(x <= 0, 2/3 + 1/(n+2), 1)", env);
        assert!((v - 1.0).abs() < 1e-15);
        let env = Bindings::new().with(Var::X, 0.4).with(Var::N, 1.0);
        assert_eq!(eval("if(x <= 0, 2/3 + 1/(n+2), 1)", env), 1.0);
    }

    #[test]
    fn max_of_two() {
        let env = Bindings::new().with(Var::X, 0.2).with(Var::Y, 0.7);
        assert_eq!(eval("max(x, y)", env), 0.7);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Bindings::new();
        assert_eq!(eval("2^3^2", e), 512.0);
        assert_eq!(eval("-2^2", e), -4.0);
        assert_eq!(eval("8 - 3 - 2", e), 3.0);
        assert_eq!(eval("8 / 4 / 2", e), 1.0);
        assert_eq!(eval("1 + 2 * 3", e), 7.0);
        assert_eq!(eval("2^-1", e), 0.5);
        assert_eq!(eval("1e-3 * 1000", e), 1.0);
        assert_eq!(eval("if(1 ≥ 1, 5, 6)", e), 5.0);
    }

    #[test]
    fn evaluation_errors_are_reported() {
        let e = Bindings::new().with(Var::X, 0.0);
        for text in ["1 / x", "log(x)", "sqrt(x - 1)", "exp(1000)", "(0 - 8)^(1/3)", "y"] {
            let r = Expr::parse(text).unwrap().eval(&e);
            assert!(matches!(r, Err(Error::Eval(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let cases = [
            ("x + ", 4),
            ("foo(x)", 0),
            ("x + q", 4),
            ("sqrt(x, y)", 0),
            ("max(x)", 0),
            ("x < y", 2),
            ("(x + 1", 6),
            ("x $ 1", 2),
        ];
        for (text, offset) in cases {
            match Expr::parse(text) {
                Err(Error::Parse { offset: got, .. }) => assert_eq!(got, offset, "{text}"),
                other => panic!("{text}: expected parse error, got {other:?}"),
            }
        }
        assert!(Expr::parse("   ").is_err());
    }

    #[test]
    fn printing_is_reparseable() {
        for text in [
            "x / 16^i",
            "(x - y)^2",
            "-(x + 1)",
            "(-x)^2",
            "2^(3^2)",
            "(2^3)^2",
            "x - (y - z)",
            "if(abs(x - y) < 1e-3, 0, max(x, y, z))",
        ] {
            let e = Expr::parse(text).unwrap();
            let printed = e.to_string();
            assert_eq!(Expr::parse(&printed).unwrap(), e, "{text} -> {printed}");
        }
    }

    #[test]
    fn rename_swaps_arguments() {
        let e = Expr::parse("max(y - x, 0)").unwrap();
        let swapped = e.rename(&|v| match v {
            Var::X => Var::Y,
            Var::Y => Var::X,
            other => other,
        });
        assert_eq!(swapped.to_string(), "max(x - y, 0)");
        assert_eq!(e.variables(), vec![Var::X, Var::Y]);
    }
}

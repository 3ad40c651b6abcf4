//! Small arithmetic expression language used by model-definition files.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp`, `log`, `sqrt`, `tanh`, `pow(a, b)`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Tanh => x.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// Integer power by binary exponentiation. Used by both the expression
/// engine and the hand-written models so their results agree bit for bit.
#[inline]
pub fn ipow(mut x: f64, n: i32) -> f64 {
    let neg = n < 0;
    let mut k = n.unsigned_abs();
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= x;
        }
        k >>= 1;
        if k > 0 {
            x *= x;
        }
    }
    if neg {
        1.0 / acc
    } else {
        acc
    }
}

fn small_integer(x: f64) -> Option<i32> {
    if x.fract() == 0.0 && x.abs() <= 64.0 {
        Some(x as i32)
    } else {
        None
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// All variable names referenced, in first-appearance order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                if !out.iter().any(|o| o == n) {
                    out.push(n.clone());
                }
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(x, y)
            | Expr::Sub(x, y)
            | Expr::Mul(x, y)
            | Expr::Div(x, y)
            | Expr::Pow(x, y) => {
                x.collect_vars(out);
                y.collect_vars(out);
            }
        }
    }

    /// Evaluate with a name lookup. Slow path, used for setup and tests.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Var(n) => lookup(n).ok_or_else(|| Error::Definition(format!("unbound variable `{n}`")))?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Add(x, y) => x.eval_with(lookup)? + y.eval_with(lookup)?,
            Expr::Sub(x, y) => x.eval_with(lookup)? - y.eval_with(lookup)?,
            Expr::Mul(x, y) => x.eval_with(lookup)? * y.eval_with(lookup)?,
            Expr::Div(x, y) => x.eval_with(lookup)? / y.eval_with(lookup)?,
            Expr::Pow(x, y) => {
                let base = x.eval_with(lookup)?;
                match **y {
                    Expr::Num(k) if small_integer(k).is_some() => ipow(base, small_integer(k).unwrap()),
                    _ => base.powf(y.eval_with(lookup)?),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval_with(lookup)?),
        })
    }

    /// Symbolic derivative with respect to `wrt`. `chain` supplies the
    /// derivative of any other variable that depends on `wrt`.
    pub fn diff(&self, wrt: &str, chain: &HashMap<String, Expr>) -> Expr {
        let d = match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(n) => {
                if n == wrt {
                    Expr::Num(1.0)
                } else if let Some(c) = chain.get(n) {
                    c.clone()
                } else {
                    Expr::Num(0.0)
                }
            }
            Expr::Neg(a) => Expr::Neg(b(a.diff(wrt, chain))),
            Expr::Add(x, y) => Expr::Add(b(x.diff(wrt, chain)), b(y.diff(wrt, chain))),
            Expr::Sub(x, y) => Expr::Sub(b(x.diff(wrt, chain)), b(y.diff(wrt, chain))),
            Expr::Mul(x, y) => Expr::Add(
                b(Expr::Mul(b(x.diff(wrt, chain)), y.clone())),
                b(Expr::Mul(x.clone(), b(y.diff(wrt, chain)))),
            ),
            Expr::Div(x, y) => Expr::Div(
                b(Expr::Sub(
                    b(Expr::Mul(b(x.diff(wrt, chain)), y.clone())),
                    b(Expr::Mul(x.clone(), b(y.diff(wrt, chain)))),
                )),
                b(Expr::Mul(y.clone(), y.clone())),
            ),
            Expr::Pow(x, y) => {
                let dy = y.diff(wrt, chain).simplify();
                if dy == Expr::Num(0.0) {
                    // d(x^c) = c x^(c-1) x'
                    Expr::Mul(
                        b(Expr::Mul(y.clone(), b(Expr::Pow(x.clone(), b(Expr::Sub(y.clone(), b(Expr::Num(1.0)))))))),
                        b(x.diff(wrt, chain)),
                    )
                } else {
                    Expr::Mul(
                        b(self.clone()),
                        b(Expr::Add(
                            b(Expr::Mul(b(dy), b(Expr::Call(Func::Log, x.clone())))),
                            b(Expr::Div(b(Expr::Mul(y.clone(), b(x.diff(wrt, chain)))), x.clone())),
                        )),
                    )
                }
            }
            Expr::Call(f, a) => {
                let da = a.diff(wrt, chain);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => Expr::Div(b(Expr::Num(1.0)), a.clone()),
                    Func::Sqrt => Expr::Div(b(Expr::Num(0.5)), b(self.clone())),
                    Func::Tanh => Expr::Sub(
                        b(Expr::Num(1.0)),
                        b(Expr::Mul(b(self.clone()), b(self.clone()))),
                    ),
                };
                Expr::Mul(b(outer), b(da))
            }
        };
        d.simplify()
    }

    /// Constant folding and removal of neutral elements. Changes rounding,
    /// so it is only applied to derived (derivative) expressions.
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Var(_) => self.clone(),
            Neg(a) => match a.simplify() {
                Num(x) => Num(-x),
                Neg(inner) => *inner,
                s => Neg(b(s)),
            },
            Add(x, y) => match (x.simplify(), y.simplify()) {
                (Num(p), Num(q)) => Num(p + q),
                (Num(z), s) | (s, Num(z)) if z == 0.0 => s,
                (s, Neg(t)) => Sub(b(s), t),
                (s, t) => Add(b(s), b(t)),
            },
            Sub(x, y) => match (x.simplify(), y.simplify()) {
                (Num(p), Num(q)) => Num(p - q),
                (s, Num(z)) if z == 0.0 => s,
                (Num(z), t) if z == 0.0 => Neg(b(t)),
                (s, Neg(t)) => Add(b(s), t),
                (s, t) => Sub(b(s), b(t)),
            },
            Mul(x, y) => match (x.simplify(), y.simplify()) {
                (Num(p), Num(q)) => Num(p * q),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), s) | (s, Num(o)) if o == 1.0 => s,
                (Num(m), s) | (s, Num(m)) if m == -1.0 => Neg(b(s)),
                (Neg(s), Neg(t)) => Mul(s, t),
                (Neg(s), t) | (t, Neg(s)) => Neg(b(Mul(s, b(t)))),
                (s, t) => Mul(b(s), b(t)),
            },
            Div(x, y) => match (x.simplify(), y.simplify()) {
                (Num(p), Num(q)) if q != 0.0 => Num(p / q),
                (Num(z), _) if z == 0.0 => Num(0.0),
                (s, Num(o)) if o == 1.0 => s,
                (s, t) => Div(b(s), b(t)),
            },
            Pow(x, y) => match (x.simplify(), y.simplify()) {
                (Num(p), Num(q)) => Num(match small_integer(q) {
                    Some(k) => ipow(p, k),
                    None => p.powf(q),
                }),
                (_, Num(z)) if z == 0.0 => Num(1.0),
                (s, Num(o)) if o == 1.0 => s,
                (s, t) => Pow(b(s), b(t)),
            },
            Call(f, a) => match a.simplify() {
                Num(x) => Num(f.apply(x)),
                s => Call(*f, b(s)),
            },
        }
    }

    /// Replace variables by expressions.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        use Expr::*;
        match self {
            Num(_) => self.clone(),
            Var(n) => map.get(n).cloned().unwrap_or_else(|| self.clone()),
            Neg(a) => Neg(b(a.substitute(map))),
            Add(x, y) => Add(b(x.substitute(map)), b(y.substitute(map))),
            Sub(x, y) => Sub(b(x.substitute(map)), b(y.substitute(map))),
            Mul(x, y) => Mul(b(x.substitute(map)), b(y.substitute(map))),
            Div(x, y) => Div(b(x.substitute(map)), b(y.substitute(map))),
            Pow(x, y) => Pow(b(x.substitute(map)), b(y.substitute(map))),
            Call(f, a) => Call(*f, b(a.substitute(map))),
        }
    }

    /// Compile to a slot-indexed tree for fast evaluation.
    pub fn compile(&self, slot_of: &dyn Fn(&str) -> Option<usize>) -> Result<Node> {
        Ok(match self {
            Expr::Num(x) => Node::Num(*x),
            Expr::Var(n) => Node::Slot(
                slot_of(n).ok_or_else(|| Error::Definition(format!("unknown symbol `{n}`")))?,
            ),
            Expr::Neg(a) => Node::Neg(Box::new(a.compile(slot_of)?)),
            Expr::Add(x, y) => Node::Add(Box::new(x.compile(slot_of)?), Box::new(y.compile(slot_of)?)),
            Expr::Sub(x, y) => Node::Sub(Box::new(x.compile(slot_of)?), Box::new(y.compile(slot_of)?)),
            Expr::Mul(x, y) => Node::Mul(Box::new(x.compile(slot_of)?), Box::new(y.compile(slot_of)?)),
            Expr::Div(x, y) => Node::Div(Box::new(x.compile(slot_of)?), Box::new(y.compile(slot_of)?)),
            Expr::Pow(x, y) => match **y {
                Expr::Num(k) if small_integer(k).is_some() => {
                    Node::PowI(Box::new(x.compile(slot_of)?), small_integer(k).unwrap())
                }
                _ => Node::Pow(Box::new(x.compile(slot_of)?), Box::new(y.compile(slot_of)?)),
            },
            Expr::Call(f, a) => Node::Call(*f, Box::new(a.compile(slot_of)?)),
        })
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => 3,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let wrap = self.prec() < ctx;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(x) => write!(f, "{x:?}")?,
            Expr::Var(n) => f.write_str(n)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write(f, 3)?;
            }
            Expr::Add(x, y) | Expr::Sub(x, y) => {
                x.write(f, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                y.write(f, 2)?;
            }
            Expr::Mul(x, y) | Expr::Div(x, y) => {
                x.write(f, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                y.write(f, 3)?;
            }
            Expr::Pow(x, y) => {
                x.write(f, 5)?;
                f.write_str("^")?;
                y.write(f, 3)?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, 0)?;
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// Slot-indexed expression tree.
#[derive(Clone, Debug)]
pub enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    PowI(Box<Node>, i32),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    #[inline]
    pub fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Node::Num(x) => *x,
            Node::Slot(i) => env[*i],
            Node::Neg(a) => -a.eval(env),
            Node::Add(x, y) => x.eval(env) + y.eval(env),
            Node::Sub(x, y) => x.eval(env) - y.eval(env),
            Node::Mul(x, y) => x.eval(env) * y.eval(env),
            Node::Div(x, y) => x.eval(env) / y.eval(env),
            Node::PowI(x, k) => ipow(x.eval(env), *k),
            Node::Pow(x, y) => x.eval(env).powf(y.eval(env)),
            Node::Call(f, a) => f.apply(a.eval(env)),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(b(lhs), b(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(b(lhs), b(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(b(lhs), b(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(b(lhs), b(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(b(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            Ok(Expr::Pow(b(base), b(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.eat(b',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(b')') {
                        return Err(self.err("expected `)` after arguments"));
                    }
                    if name == "pow" {
                        if args.len() != 2 {
                            return Err(self.err("pow takes two arguments"));
                        }
                        let y = args.pop().unwrap();
                        let x = args.pop().unwrap();
                        return Ok(Expr::Pow(b(x), b(y)));
                    }
                    let f = Func::from_name(&name).ok_or_else(|| self.err(&format!("unknown function `{name}`")))?;
                    if args.len() != 1 {
                        return Err(self.err(&format!("{name} takes one argument")));
                    }
                    Ok(Expr::Call(f, b(args.pop().unwrap())))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse { pos: start, msg: format!("bad number `{text}`") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, v: f64) -> f64 {
        Expr::parse(src).unwrap().eval_with(&|n| (n == "V").then_some(v)).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1-2-3", 0.0), -4.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("pow(V, 2) + 1e-1", 3.0), 9.1);
        assert_eq!(ev("-(V+90)/20", -70.0), -1.0);
    }

    #[test]
    fn display_round_trips_structure() {
        for src in [
            "0.1*(V+48)/(1-exp(-(V+48)/15))",
            "(G_Na*m^3*h+0.14)*(V-E_Na)",
            "a-(b-c)",
            "a/(b*c)",
            "-(a*b)",
            "(-a)^2",
            "a^b^c",
            "(a^b)^c",
            "a*-b",
            "2^-x",
            "tanh(7.74+0.12*V)",
        ] {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(Expr::parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1+").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = Expr::parse("0.32*(V+47.13)/(1-exp(-0.1*(V+47.13))) + tanh(0.1*V)^2 + sqrt(V+200) + log(V+300)")
            .unwrap();
        let d = e.diff("V", &HashMap::new());
        let f = |v: f64| e.eval_with(&|n| (n == "V").then_some(v)).unwrap();
        for v in [-80.0, -20.0, 10.0, 35.0] {
            let h = 1e-5;
            let fd = (f(v + h) - f(v - h)) / (2.0 * h);
            let an = d.eval_with(&|n| (n == "V").then_some(v)).unwrap();
            assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{v}: {fd} vs {an}");
        }
    }

    #[test]
    fn ipow_matches_repeated_multiplication() {
        assert_eq!(ipow(0.3, 3), 0.3 * (0.3 * 0.3));
        assert_eq!(ipow(2.0, -2), 0.25);
        assert_eq!(ipow(5.0, 0), 1.0);
    }
}

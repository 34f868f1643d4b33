//! A small arithmetic language for nonlinearities, radial weights and
//! boundary functionals.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' factor)?
//! atom   := number | ident | ident '(' args ')' | '(' expr ')' | '-' factor
//! ```
//!
//! `^` is right-associative and a leading minus negates the whole factor
//! that follows it, so `-x^2` is `-(x^2)`; write `(-x)^2` for the other
//! reading. Variables are `u`, `v`, `t` and `r`. Inside boundary
//! functionals `u(τ)` and `v(τ)` denote the point value of the current
//! profile at the constant node `τ`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    U,
    V,
    T,
    R,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::V => "v",
            Var::T => "t",
            Var::R => "r",
        }
    }
}

/// Which profile a point evaluation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    U,
    V,
}

impl Profile {
    pub fn index(self) -> usize {
        match self {
            Profile::U => 0,
            Profile::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Profile::U
        } else {
            Profile::V
        }
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

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Cbrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Atan,
}

impl Func {
    const ALL: [Func; 8] = [
        Func::Sqrt,
        Func::Cbrt,
        Func::Abs,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Atan,
    ];

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Cbrt => "cbrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Atan => "atan",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    /// Point value `u(τ)` / `v(τ)`; the node is a constant expression.
    Point(Profile, Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// `ifle(a, b, x, y)`: `x` when `a <= b`, otherwise `y`.
    IfLe(Box<[Expr; 4]>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("`{name}` at byte {offset} takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        offset: usize,
    },
    #[error("point evaluation at byte {offset} needs a constant node")]
    NonConstantNode { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
    #[error("point value `{0}` requested but no profile is available")]
    NoProfile(String),
    #[error("`{expr}` is undefined at this point (value {value})")]
    Domain { expr: String, value: f64 },
}

/// Bindings for evaluation. Unset variables are errors when referenced.
#[derive(Default, Clone, Copy)]
pub struct Env<'a> {
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub t: Option<f64>,
    pub r: Option<f64>,
    /// Replace `u` by `max(u, 0)` before evaluation (nonlinearities live on
    /// `[0, ∞) × ℝ`).
    pub clamp_u: bool,
    pub profile: Option<&'a dyn PointValues>,
}

impl<'a> Env<'a> {
    pub fn uv(u: f64, v: f64) -> Self {
        Env {
            u: Some(u),
            v: Some(v),
            clamp_u: true,
            ..Default::default()
        }
    }

    pub fn t(t: f64) -> Self {
        Env {
            t: Some(t),
            ..Default::default()
        }
    }

    pub fn r(r: f64) -> Self {
        Env {
            r: Some(r),
            ..Default::default()
        }
    }

    pub fn with_profile(profile: &'a dyn PointValues) -> Self {
        Env {
            profile: Some(profile),
            ..Default::default()
        }
    }
}

/// Source of point values `u(τ)`, `v(τ)`.
pub trait PointValues {
    fn point_value(&self, profile: Profile, node: f64) -> f64;
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Num(value)
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Num(x) => *x,
            Expr::Var(var) => {
                let bound = match var {
                    Var::U => env.u.map(|u| if env.clamp_u { u.max(0.0) } else { u }),
                    Var::V => env.v,
                    Var::T => env.t,
                    Var::R => env.r,
                };
                bound.ok_or(EvalError::Unbound(var.name()))?
            }
            Expr::Point(profile, node) => {
                let at = node.eval(&Env::default())?;
                let source = env
                    .profile
                    .ok_or_else(|| EvalError::NoProfile(self.to_string()))?;
                source.point_value(*profile, at)
            }
            Expr::Neg(inner) => -inner.eval(env)?,
            Expr::Bin(op, lhs, rhs) => {
                let a = lhs.eval(env)?;
                let b = rhs.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(func, arg) => {
                let x = arg.eval(env)?;
                match func {
                    Func::Sqrt => x.sqrt(),
                    Func::Cbrt => x.cbrt(),
                    Func::Abs => x.abs(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Atan => x.atan(),
                }
            }
            Expr::IfLe(parts) => {
                let [a, b, then, otherwise] = parts.as_ref();
                if a.eval(env)? <= b.eval(env)? {
                    then.eval(env)?
                } else {
                    otherwise.eval(env)?
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::Domain {
                expr: self.to_string(),
                value,
            })
        }
    }

    /// Variables referenced outside point evaluations.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(*v);
            }
        });
        out
    }

    pub fn is_constant(&self) -> bool {
        self.free_vars().is_empty() && self.point_nodes().is_empty()
    }

    /// Distinct `(profile, node)` pairs read by point evaluations.
    pub fn point_nodes(&self) -> Vec<(Profile, f64)> {
        let mut out: Vec<(Profile, f64)> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Point(p, node) = e {
                if let Ok(at) = node.eval(&Env::default()) {
                    if !out.iter().any(|(q, x)| q == p && *x == at) {
                        out.push((*p, at));
                    }
                }
            }
        });
        out
    }

    fn walk(&self, visit: &mut dyn FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            // The node of a point evaluation is a constant and is not walked.
            Expr::Point(..) => {}
            Expr::Neg(e) | Expr::Call(_, e) => e.walk(visit),
            Expr::Bin(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::IfLe(parts) => parts.iter().for_each(|p| p.walk(visit)),
        }
    }
}

// Real powers only; negative bases need an integer exponent.
fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() < 2f64.powi(31) {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => {
                if *x < 0.0 {
                    write!(f, "(-{:?})", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Point(p, node) => {
                let name = match p {
                    Profile::U => "u",
                    Profile::V => "v",
                };
                write!(f, "{name}({node})")
            }
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::IfLe(parts) => {
                let [a, b, x, y] = parts.as_ref();
                write!(f, "ifle({a},{b},{x},{y})")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_owned(),
        }
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

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("expected a number, identifier or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let from = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos > from
        };
        let mut seen = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            seen |= digits(self);
        }
        if !seen {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = mark;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let args = self.args()?;
            return self.call(name, start, args);
        }
        match name {
            "u" => Ok(Expr::Var(Var::U)),
            "v" => Ok(Expr::Var(Var::V)),
            "t" => Ok(Expr::Var(Var::T)),
            "r" => Ok(Expr::Var(Var::R)),
            _ => Err(ParseError::UnknownIdent {
                name: name.to_owned(),
                offset: start,
            }),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat(b')') {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(b',') {
                continue;
            }
            self.expect(b')')?;
            return Ok(args);
        }
    }

    fn call(&self, name: &str, offset: usize, mut args: Vec<Expr>) -> Result<Expr, ParseError> {
        let arity = |expected: usize, args: &Vec<Expr>| {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ParseError::Arity {
                    name: name.to_owned(),
                    expected,
                    got: args.len(),
                    offset,
                })
            }
        };
        if name == "ifle" {
            arity(4, &args)?;
            let d = args.pop().unwrap();
            let c = args.pop().unwrap();
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            return Ok(Expr::IfLe(Box::new([a, b, c, d])));
        }
        if name == "u" || name == "v" {
            arity(1, &args)?;
            let node = args.pop().unwrap();
            if !node.is_constant() {
                return Err(ParseError::NonConstantNode { offset });
            }
            let profile = if name == "u" { Profile::U } else { Profile::V };
            return Ok(Expr::Point(profile, Box::new(node)));
        }
        let func = Func::lookup(name).ok_or_else(|| ParseError::UnknownIdent {
            name: name.to_owned(),
            offset,
        })?;
        arity(1, &args)?;
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f_uv(src: &str, u: f64, v: f64) -> f64 {
        parse(src).unwrap().eval(&Env::uv(u, v)).unwrap()
    }

    #[test]
    fn section_two_nonlinearities() {
        let f1 = "0.3*(u^3+abs(v)^3)+0.5";
        let value = f_uv(f1, 2.01, 1.0);
        assert!((value - 3.236_180_3).abs() < 1e-9, "{value}");
        assert_eq!(f_uv("sqrt(u)+v^2+1", 0.0, 11.0), 122.0);
        assert_eq!(f_uv("u^3+v^2+1/2", 5.0, 0.0), 125.5);
    }

    #[test]
    fn piecewise_nonlinearity() {
        let src = "ifle(u,1, 0.25*u^2*atan(v^2), 0.25*u^(2/3)*atan(v^2))";
        let below = f_uv(src, 0.5, 1.0);
        assert!((below - 0.25 * 0.25 * 1f64.atan()).abs() < 1e-15);
        let above = f_uv(src, 8.0, 1.0);
        assert!((above - 0.25 * 4.0 * 1f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn variable_node() {
        assert_eq!(parse("u").unwrap(), Expr::Var(Var::U));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(f_uv("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(f_uv("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(f_uv("(-2)^2", 0.0, 0.0), 4.0);
        assert_eq!(f_uv("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(f_uv("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(f_uv("2*-3", 0.0, 0.0), -6.0);
        assert_eq!(f_uv("1.5e1 + .5", 0.0, 0.0), 15.5);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        assert_eq!(
            parse("u + w"),
            Err(ParseError::UnknownIdent {
                name: "w".into(),
                offset: 4
            })
        );
        assert!(matches!(
            parse("sqrt(u, v)"),
            Err(ParseError::Arity {
                expected: 1,
                got: 2,
                ..
            })
        ));
        assert!(matches!(
            parse("ifle(u, 1, 2)"),
            Err(ParseError::Arity { expected: 4, .. })
        ));
        assert!(matches!(
            parse("(u + 1"),
            Err(ParseError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(
            parse("u )"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(parse("1e+"), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("u(t)"),
            Err(ParseError::NonConstantNode { .. })
        ));
        assert!(matches!(
            parse("foo(1)"),
            Err(ParseError::UnknownIdent { .. })
        ));
    }

    #[test]
    fn domain_errors_are_reported() {
        let err = parse("sqrt(v)")
            .unwrap()
            .eval(&Env::uv(0.0, -1.0))
            .unwrap_err();
        assert!(matches!(err, EvalError::Domain { ref expr, .. } if expr == "sqrt(v)"));
        assert!(parse("log(v)").unwrap().eval(&Env::uv(0.0, -1.0)).is_err());
        assert!(parse("1/v").unwrap().eval(&Env::uv(0.0, 0.0)).is_err());
        assert!(parse("v^(1/2)").unwrap().eval(&Env::uv(0.0, -4.0)).is_err());
        assert_eq!(
            parse("t").unwrap().eval(&Env::uv(1.0, 1.0)),
            Err(EvalError::Unbound("t"))
        );
    }

    #[test]
    fn u_is_clamped_for_nonlinearities() {
        assert_eq!(f_uv("sqrt(u)", -1e-14, 0.0), 0.0);
        let unclamped = Env {
            u: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(parse("u").unwrap().eval(&unclamped), Ok(-1.0));
    }

    struct Linear;
    impl PointValues for Linear {
        fn point_value(&self, profile: Profile, node: f64) -> f64 {
            match profile {
                Profile::U => node,
                Profile::V => 2.0 * node,
            }
        }
    }

    #[test]
    fn point_evaluations() {
        let h = parse("0.1*sqrt(u(1/4)) + 0.1*v(2/7)^3").unwrap();
        let value = h.eval(&Env::with_profile(&Linear)).unwrap();
        let expected = 0.1 * 0.5 + 0.1 * (4.0f64 / 7.0).powi(3);
        assert!((value - expected).abs() < 1e-15);
        assert_eq!(
            h.point_nodes(),
            vec![(Profile::U, 0.25), (Profile::V, 2.0 / 7.0)]
        );
        assert!(h.free_vars().is_empty());
        assert!(matches!(
            h.eval(&Env::default()),
            Err(EvalError::NoProfile(_))
        ));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e3).prop_map(Expr::Num),
            prop_oneof![Just(Var::U), Just(Var::V), Just(Var::T), Just(Var::R)].prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (0usize..Func::ALL.len(), inner.clone())
                    .prop_map(|(i, e)| Expr::Call(Func::ALL[i], Box::new(e))),
                (inner.clone(), inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(a, b, c, d)| Expr::IfLe(Box::new([a, b, c, d]))),
                (
                    (0.0f64..1.0),
                    prop_oneof![Just(Profile::U), Just(Profile::V)]
                )
                    .prop_map(|(x, p)| Expr::Point(p, Box::new(Expr::Num(x)))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(parse(&reparsed.to_string()).unwrap(), reparsed);
        }
    }
}

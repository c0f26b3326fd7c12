use super::ball::Ball;
use super::interval::Interval;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

/// Expression tree of one map component, without the trailing `mod 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Nonnegative rational literal (the parser only yields decimals).
    Num(BigRational),
    Pi,
    /// Zero-based coordinate index.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

fn num(n: i64) -> Expr {
    Expr::Num(BigRational::from_integer(BigInt::from(n)))
}

impl Expr {
    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_zero())
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_one())
    }

    fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            b
        } else if b.is_zero() {
            a
        } else {
            Expr::Add(Box::new(a), Box::new(b))
        }
    }

    fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            a
        } else if a.is_zero() {
            Expr::neg(b)
        } else {
            Expr::Sub(Box::new(a), Box::new(b))
        }
    }

    fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            num(0)
        } else if a.is_one() {
            b
        } else if b.is_one() {
            a
        } else {
            Expr::Mul(Box::new(a), Box::new(b))
        }
    }

    fn neg(a: Expr) -> Expr {
        if a.is_zero() {
            a
        } else {
            Expr::Neg(Box::new(a))
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => num(0),
            Expr::Var(i) => num(if *i == var { 1 } else { 0 }),
            Expr::Add(a, b) => Expr::add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(var), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Neg(a) => Expr::neg(a.derivative(var)),
            Expr::Sin(a) => Expr::mul(Expr::Cos(a.clone()), a.derivative(var)),
            Expr::Cos(a) => Expr::neg(Expr::mul(Expr::Sin(a.clone()), a.derivative(var))),
        }
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.arity().max(b.arity()),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => a.arity(),
        }
    }

    pub fn eval_interval(&self, x: &[Interval]) -> Interval {
        match self {
            Expr::Num(q) => rational_interval(q),
            Expr::Pi => Interval::pi(),
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval_interval(x).add(b.eval_interval(x)),
            Expr::Sub(a, b) => a.eval_interval(x).sub(b.eval_interval(x)),
            Expr::Mul(a, b) => a.eval_interval(x).mul(b.eval_interval(x)),
            Expr::Neg(a) => a.eval_interval(x).neg(),
            Expr::Sin(a) => a.eval_interval(x).sin(),
            Expr::Cos(a) => a.eval_interval(x).cos(),
        }
    }

    pub fn eval_ball(&self, x: &[Ball], prec: u32) -> Ball {
        match self {
            Expr::Num(q) => Ball::from_rational(q, prec),
            Expr::Pi => Ball::pi(prec),
            Expr::Var(i) => x[*i].clone(),
            Expr::Add(a, b) => a.eval_ball(x, prec).add(&b.eval_ball(x, prec)),
            Expr::Sub(a, b) => a.eval_ball(x, prec).sub(&b.eval_ball(x, prec)),
            Expr::Mul(a, b) => a.eval_ball(x, prec).mul(&b.eval_ball(x, prec)),
            Expr::Neg(a) => a.eval_ball(x, prec).neg(),
            Expr::Sin(a) => a.eval_ball(x, prec).sin(),
            Expr::Cos(a) => a.eval_ball(x, prec).cos(),
        }
    }

    /// Plain double evaluation, no enclosure.
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(q) => q.to_f64().unwrap_or(f64::NAN),
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Expr::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Expr::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Expr::Neg(a) => -a.eval_f64(x),
            Expr::Sin(a) => a.eval_f64(x).sin(),
            Expr::Cos(a) => a.eval_f64(x).cos(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) => 2,
            Expr::Neg(..) => 3,
            _ => 4,
        }
    }
}

fn rational_interval(q: &BigRational) -> Interval {
    let v = q.to_f64().unwrap_or(f64::NAN);
    if q.denom().is_one() && v.abs() < 9.0e15 {
        return Interval::point(v);
    }
    Interval::around(v)
}

/// Decimal rendering of a rational whose denominator divides a power of ten.
fn fmt_decimal(q: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if q.denom().is_one() {
        return write!(f, "{}", q.numer());
    }
    let ten = BigInt::from(10);
    let mut scale = BigInt::one();
    let mut digits = 0usize;
    while !(&scale % q.denom()).is_zero() {
        scale *= &ten;
        digits += 1;
        if digits > 400 {
            // not a terminating decimal; the parser never produces these
            return write!(f, "({}/{})", q.numer(), q.denom());
        }
    }
    let n = q.numer() * (&scale / q.denom());
    let s = n.to_string();
    let (int, frac) = if s.len() > digits {
        (s[..s.len() - digits].to_string(), s[s.len() - digits..].to_string())
    } else {
        ("0".to_string(), format!("{:0>width$}", s, width = digits))
    };
    write!(f, "{int}.{frac}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |e: &Expr, f: &mut fmt::Formatter<'_>, need: bool| {
            if need {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(q) => fmt_decimal(q, f),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let op = if matches!(self, Expr::Add(..)) { "+" } else { "-" };
                wrap(a, f, a.precedence() < 1)?;
                write!(f, " {op} ")?;
                wrap(b, f, b.precedence() <= 1)
            }
            Expr::Mul(a, b) => {
                wrap(a, f, a.precedence() < 2)?;
                write!(f, "*")?;
                wrap(b, f, b.precedence() <= 2)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(a, f, a.precedence() < 3)
            }
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

//! Typed feature terms over the eight traffic operations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Vehicle,
    Junction,
    Position,
    Speed,
    Separation,
    Delta,
}

impl Sort {
    /// Sorts that may appear as the root of a feature.
    pub fn is_scalar(self) -> bool {
        matches!(self, Sort::Speed | Sort::Separation | Sort::Delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Pos,
    Speed,
    Fj,
    Fa,
    Ba,
    Twin,
    Sep,
    Sub,
}

impl Op {
    pub const ALL: [Op; 8] = [Op::Pos, Op::Speed, Op::Fj, Op::Fa, Op::Ba, Op::Twin, Op::Sep, Op::Sub];

    pub fn name(self) -> &'static str {
        match self {
            Op::Pos => "pos",
            Op::Speed => "speed",
            Op::Fj => "fj",
            Op::Fa => "fa",
            Op::Ba => "ba",
            Op::Twin => "twin",
            Op::Sep => "sep",
            Op::Sub => "sub",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Overloads of this operation as `(inputs, output)`.
    pub fn overloads(self) -> &'static [(&'static [Sort], Sort)] {
        use Sort::*;
        match self {
            Op::Pos => &[(&[Vehicle], Position), (&[Junction], Position)],
            Op::Speed => &[(&[Vehicle], Speed)],
            Op::Fj => &[(&[Vehicle], Junction)],
            Op::Fa | Op::Ba => &[(&[Vehicle], Vehicle), (&[Junction], Vehicle)],
            Op::Twin => &[(&[Junction], Junction)],
            Op::Sep => &[(&[Position, Position], Separation)],
            Op::Sub => &[(&[Speed, Speed], Delta), (&[Separation, Separation], Delta)],
        }
    }

    pub fn arity(self) -> usize {
        self.overloads()[0].0.len()
    }

    pub fn result_sort(self, inputs: &[Sort]) -> Option<Sort> {
        self.overloads().iter().find(|(ins, _)| *ins == inputs).map(|(_, out)| *out)
    }
}

/// One overload of one operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationSig {
    pub op: Op,
    pub inputs: Vec<Sort>,
    pub output: Sort,
}

/// The full, closed signature table.
pub fn signatures() -> Vec<OperationSig> {
    Op::ALL
        .into_iter()
        .flat_map(|op| {
            op.overloads().iter().map(move |(ins, out)| OperationSig { op, inputs: ins.to_vec(), output: *out })
        })
        .collect()
}

/// A closed term rooted in the ego vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Ego,
    App(Op, Vec<Expr>),
}

impl Expr {
    fn unary(op: Op, arg: Expr) -> Expr {
        Expr::App(op, vec![arg])
    }

    pub fn pos(self) -> Expr {
        Expr::unary(Op::Pos, self)
    }
    pub fn speed(self) -> Expr {
        Expr::unary(Op::Speed, self)
    }
    pub fn fj(self) -> Expr {
        Expr::unary(Op::Fj, self)
    }
    pub fn fa(self) -> Expr {
        Expr::unary(Op::Fa, self)
    }
    pub fn ba(self) -> Expr {
        Expr::unary(Op::Ba, self)
    }
    pub fn twin(self) -> Expr {
        Expr::unary(Op::Twin, self)
    }
    pub fn sep(p1: Expr, p2: Expr) -> Expr {
        Expr::App(Op::Sep, vec![p1, p2])
    }
    #[allow(clippy::should_implement_trait)]
    pub fn sub(x: Expr, y: Expr) -> Expr {
        Expr::App(Op::Sub, vec![x, y])
    }

    pub fn sort(&self) -> Result<Sort> {
        match self {
            Expr::Ego => Ok(Sort::Vehicle),
            Expr::App(op, args) => {
                let ins = args.iter().map(Expr::sort).collect::<Result<Vec<_>>>()?;
                op.result_sort(&ins).ok_or_else(|| Error::Parse {
                    expr: self.to_string(),
                    reason: format!("`{}` is not defined on {ins:?}", op.name()),
                })
            }
        }
    }

    /// Maximum operation-nesting level; the ego symbol has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Ego => 0,
            Expr::App(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    pub fn args(&self) -> &[Expr] {
        match self {
            Expr::Ego => &[],
            Expr::App(_, args) => args,
        }
    }

    /// True if `other` occurs in `self` (including `self == other`).
    pub fn contains(&self, other: &Expr) -> bool {
        self == other || self.args().iter().any(|a| a.contains(other))
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser { src: text, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing input"));
        }
        e.sort()?;
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ego => f.write_str("ego"),
            Expr::App(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> Error {
        Error::Parse { expr: self.src.to_string(), reason: format!("{reason} at byte {}", self.pos) }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn expr(&mut self) -> Result<Expr> {
        let name = self.ident().to_string();
        if name == "ego" {
            return Ok(Expr::Ego);
        }
        let op = Op::from_name(&name).ok_or_else(|| self.error(&format!("unknown operation `{name}`")))?;
        if !self.eat('(') {
            return Err(self.error("expected `(`"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.error("expected `)`"));
        }
        if args.len() != op.arity() {
            return Err(self.error(&format!("`{name}` takes {} argument(s)", op.arity())));
        }
        Ok(Expr::App(op, args))
    }
}

/// A feature: a well-sorted term with scalar root sort, plus its canonical rendering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureExpr {
    expr: Expr,
    canonical: String,
    sort: Sort,
}

impl FeatureExpr {
    pub fn new(expr: Expr) -> Result<Self> {
        let sort = expr.sort()?;
        if !sort.is_scalar() {
            return Err(Error::Parse { expr: expr.to_string(), reason: format!("root sort {sort:?} is not scalar") });
        }
        Ok(FeatureExpr { canonical: expr.to_string(), expr, sort })
    }

    pub fn parse(text: &str) -> Result<Self> {
        FeatureExpr::new(Expr::parse(text)?)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    pub fn depth(&self) -> usize {
        self.expr.depth()
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

//! Scalar expressions over indexed tensor elements.
//!
//! Index variables are numbered by level. Inside a tensor of rank `r` the
//! binders are levels `0..r`; a `Sum` nested under `d` enclosing sums binds
//! level `r + d`.

use super::graph::TId;
use std::fmt::Write;
use std::hash::{Hash, Hasher};

/// An `f64` compared and hashed by bit pattern.
#[derive(Clone, Copy, Debug)]
pub struct F64(pub f64);

impl PartialEq for F64 {
    fn eq(&self, o: &Self) -> bool {
        self.0.to_bits() == o.0.to_bits()
    }
}

impl Eq for F64 {}

impl Hash for F64 {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.0.to_bits().hash(h)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Scalar {
    Const(F64),
    /// A constant that keeps its name through printing, e.g. a loss weight.
    Named(F64, String),
    /// The cardinality `|n|` of a range, used as a divisor.
    Card(usize),
    Index(usize),
    Elem(TId, Vec<usize>),
    Add(Box<Scalar>, Box<Scalar>),
    Sub(Box<Scalar>, Box<Scalar>),
    Mul(Box<Scalar>, Box<Scalar>),
    Div(Box<Scalar>, Box<Scalar>),
    Neg(Box<Scalar>),
    Log(Box<Scalar>),
    Exp(Box<Scalar>),
    Max(Box<Scalar>, Box<Scalar>),
    /// 1 when the left side is at least the right side, else 0.
    Ge(Box<Scalar>, Box<Scalar>),
    Sum {
        level: usize,
        extent: usize,
        body: Box<Scalar>,
    },
    /// Sum of elementwise products of two tensors of equal shape.
    Dot(TId, TId),
    /// Fraction of rows whose argmax agrees between one-hot labels and scores.
    Precision(TId, TId),
}

pub fn c(v: f64) -> Scalar {
    Scalar::Const(F64(v))
}

pub fn elem(t: TId, idx: Vec<usize>) -> Scalar {
    Scalar::Elem(t, idx)
}

/// `t[0, 1, .., rank-1]`
pub fn ident(t: TId, rank: usize) -> Scalar {
    Scalar::Elem(t, (0..rank).collect())
}

pub fn add(a: Scalar, b: Scalar) -> Scalar {
    Scalar::Add(Box::new(a), Box::new(b))
}

pub fn sub(a: Scalar, b: Scalar) -> Scalar {
    Scalar::Sub(Box::new(a), Box::new(b))
}

pub fn mul(a: Scalar, b: Scalar) -> Scalar {
    Scalar::Mul(Box::new(a), Box::new(b))
}

pub fn div(a: Scalar, b: Scalar) -> Scalar {
    Scalar::Div(Box::new(a), Box::new(b))
}

pub fn neg(a: Scalar) -> Scalar {
    Scalar::Neg(Box::new(a))
}

pub fn log(a: Scalar) -> Scalar {
    Scalar::Log(Box::new(a))
}

pub fn exp(a: Scalar) -> Scalar {
    Scalar::Exp(Box::new(a))
}

pub fn sum(level: usize, extent: usize, body: Scalar) -> Scalar {
    Scalar::Sum {
        level,
        extent,
        body: Box::new(body),
    }
}

impl Scalar {
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Scalar::Const(v) | Scalar::Named(v, _) => Some(v.0),
            Scalar::Card(n) => Some(*n as f64),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Scalar> {
        match self {
            Scalar::Add(a, b) | Scalar::Sub(a, b) | Scalar::Mul(a, b) | Scalar::Div(a, b) | Scalar::Max(a, b) | Scalar::Ge(a, b) => {
                vec![a, b]
            }
            Scalar::Neg(a) | Scalar::Log(a) | Scalar::Exp(a) => vec![a],
            Scalar::Sum { body, .. } => vec![body],
            _ => vec![],
        }
    }

    /// Rebuilds this node with `f` applied to each direct child.
    pub fn map_children(&self, f: &mut dyn FnMut(&Scalar) -> Scalar) -> Scalar {
        let b = |s: &Scalar, f: &mut dyn FnMut(&Scalar) -> Scalar| Box::new(f(s));
        match self {
            Scalar::Add(x, y) => Scalar::Add(b(x, f), b(y, f)),
            Scalar::Sub(x, y) => Scalar::Sub(b(x, f), b(y, f)),
            Scalar::Mul(x, y) => Scalar::Mul(b(x, f), b(y, f)),
            Scalar::Div(x, y) => Scalar::Div(b(x, f), b(y, f)),
            Scalar::Max(x, y) => Scalar::Max(b(x, f), b(y, f)),
            Scalar::Ge(x, y) => Scalar::Ge(b(x, f), b(y, f)),
            Scalar::Neg(x) => Scalar::Neg(b(x, f)),
            Scalar::Log(x) => Scalar::Log(b(x, f)),
            Scalar::Exp(x) => Scalar::Exp(b(x, f)),
            Scalar::Sum { level, extent, body } => Scalar::Sum {
                level: *level,
                extent: *extent,
                body: b(body, f),
            },
            leaf => leaf.clone(),
        }
    }

    /// Tensors referenced, in first-occurrence order without repeats.
    pub fn tensors(&self) -> Vec<TId> {
        let mut out = Vec::new();
        self.visit(&mut |s| match s {
            Scalar::Elem(t, _) => push_unique(&mut out, *t),
            Scalar::Dot(a, b) | Scalar::Precision(a, b) => {
                push_unique(&mut out, *a);
                push_unique(&mut out, *b);
            }
            _ => {}
        });
        out
    }

    /// Pre-order walk.
    pub fn visit(&self, f: &mut dyn FnMut(&Scalar)) {
        f(self);
        for ch in self.children() {
            ch.visit(f);
        }
    }

    pub fn any(&self, pred: &dyn Fn(&Scalar) -> bool) -> bool {
        let mut hit = false;
        self.visit(&mut |s| hit |= pred(s));
        hit
    }

    pub fn map_tensors(&self, f: &dyn Fn(TId) -> TId) -> Scalar {
        match self {
            Scalar::Elem(t, idx) => Scalar::Elem(f(*t), idx.clone()),
            Scalar::Dot(a, b) => Scalar::Dot(f(*a), f(*b)),
            Scalar::Precision(a, b) => Scalar::Precision(f(*a), f(*b)),
            other => other.map_children(&mut |ch| ch.map_tensors(f)),
        }
    }

    /// Renames every level, including the levels bound by sums.
    pub fn reindex(&self, f: &dyn Fn(usize) -> usize) -> Scalar {
        match self {
            Scalar::Index(l) => Scalar::Index(f(*l)),
            Scalar::Elem(t, idx) => Scalar::Elem(*t, idx.iter().map(|&l| f(l)).collect()),
            Scalar::Sum { level, extent, body } => Scalar::Sum {
                level: f(*level),
                extent: *extent,
                body: Box::new(body.reindex(f)),
            },
            other => other.map_children(&mut |ch| ch.reindex(f)),
        }
    }

    /// Levels used but not bound inside this expression.
    pub fn free_levels(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out.sort_unstable();
        out
    }

    fn collect_free(&self, bound: &mut Vec<usize>, out: &mut Vec<usize>) {
        let mut note = |l: usize, bound: &Vec<usize>| {
            if !bound.contains(&l) {
                push_unique(out, l);
            }
        };
        match self {
            Scalar::Index(l) => note(*l, bound),
            Scalar::Elem(_, idx) => idx.iter().for_each(|&l| note(l, bound)),
            Scalar::Sum { level, body, .. } => {
                bound.push(*level);
                body.collect_free(bound, out);
                bound.pop();
            }
            other => {
                for ch in other.children() {
                    ch.collect_free(bound, out);
                }
            }
        }
    }

    pub fn uses_level(&self, l: usize) -> bool {
        self.free_levels().contains(&l)
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Prints in the IR surface syntax. `name` renders tensor references.
    pub fn render(&self, name: &dyn Fn(TId) -> String) -> String {
        let mut s = String::new();
        self.write(&mut s, name);
        s
    }

    fn write(&self, s: &mut String, name: &dyn Fn(TId) -> String) {
        let bin = |s: &mut String, a: &Scalar, op: &str, b: &Scalar| {
            s.push('(');
            a.write(s, name);
            let _ = write!(s, " {op} ");
            b.write(s, name);
            s.push(')');
        };
        match self {
            Scalar::Const(v) => s.push_str(&fmt_num(v.0)),
            Scalar::Named(v, n) => {
                let _ = write!(s, "{n}:{}", fmt_num(v.0));
            }
            Scalar::Card(n) => {
                let _ = write!(s, "|{n}|");
            }
            Scalar::Index(l) => s.push_str(&level_name(*l)),
            Scalar::Elem(t, idx) => {
                let ix: Vec<String> = idx.iter().map(|&l| level_name(l)).collect();
                let _ = write!(s, "{}[{}]", name(*t), ix.join(","));
            }
            Scalar::Add(a, b) => bin(s, a, "+", b),
            Scalar::Sub(a, b) => bin(s, a, "-", b),
            Scalar::Mul(a, b) => bin(s, a, "*", b),
            Scalar::Div(a, b) => bin(s, a, "/", b),
            Scalar::Max(a, b) => {
                s.push_str("max(");
                a.write(s, name);
                s.push_str(", ");
                b.write(s, name);
                s.push(')');
            }
            Scalar::Ge(a, b) => bin(s, a, ">=", b),
            Scalar::Neg(a) => {
                s.push('-');
                a.write(s, name);
            }
            Scalar::Log(a) => {
                s.push_str("Log ");
                a.write(s, name);
            }
            Scalar::Exp(a) => {
                s.push_str("Exp ");
                a.write(s, name);
            }
            Scalar::Sum { level, extent, body } => {
                let _ = write!(s, "Sum({}<{extent})(", level_name(*level));
                body.write(s, name);
                s.push(')');
            }
            Scalar::Dot(a, b) => {
                let _ = write!(s, "({} . {})", name(*a), name(*b));
            }
            Scalar::Precision(a, b) => {
                let _ = write!(s, "Precision({}, {})", name(*a), name(*b));
            }
        }
    }
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

pub fn level_name(l: usize) -> String {
    const NAMES: [&str; 8] = ["i", "j", "k", "l", "m", "n", "o", "p"];
    NAMES.get(l).map(|s| s.to_string()).unwrap_or_else(|| format!("i{l}"))
}

/// Shortest decimal that reads back to the same value.
pub fn fmt_num(v: f64) -> String {
    format!("{v}")
}

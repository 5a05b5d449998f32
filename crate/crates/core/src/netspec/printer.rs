//! Canonical text form of a parsed spec. Parsing the output yields the same program.

use super::ast::*;
use std::fmt::Write;

fn num(v: f64) -> String {
    format!("{v}")
}

fn init(p: &ParamInit) -> String {
    let mults = p.lr_mult != 1.0 || p.decay_mult != 1.0;
    let tail = if mults { format!("{}, {}", num(p.lr_mult), num(p.decay_mult)) } else { String::new() };
    match p.init {
        Init::Xavier if mults => format!("xavier({tail})"),
        Init::Xavier => "xavier".into(),
        Init::Const(v) if mults => format!("const({}, {tail})", num(v)),
        Init::Const(v) => format!("const({})", num(v)),
        Init::Gaussian(v) if mults => format!("gaussian({}, {tail})", num(v)),
        Init::Gaussian(v) => format!("gaussian({})", num(v)),
    }
}

fn init_ref(r: &InitRef) -> String {
    match r {
        InitRef::Inline(p) => init(p),
        InitRef::Named(n) => n.name.clone(),
    }
}

fn labels(classes: Option<usize>) -> String {
    classes.map(|k| format!("labels=indicator({k})")).unwrap_or_default()
}

pub fn layer(l: &Layer) -> String {
    let args = match l {
        Layer::Conv { k, out, stride, pad, w, b } => {
            format!("k={k}, out={out}, stride={stride}, pad={pad}, w={}, b={}", init_ref(w), init_ref(b))
        }
        Layer::Pool { k, stride, pad, .. } => format!("k={k}, stride={stride}, pad={pad}"),
        Layer::Relu { rank } => rank.map(|r| format!("rank={r}")).unwrap_or_default(),
        Layer::Full { out, w, b } => format!("out={out}, w={}, b={}", init_ref(w), init_ref(b)),
        Layer::Flatten { rank, axis } => format!("rank={rank}, axis={axis}"),
        Layer::Softmax => String::new(),
        Layer::Dropout { rate } => format!("rate={}", num(*rate)),
        Layer::Lrn { size, alpha, beta } => format!("size={size}, alpha={}, beta={}", num(*alpha), num(*beta)),
        Layer::Concat { branches } => branches.iter().map(compose).collect::<Vec<_>>().join(", "),
        Layer::LogLoss { classes } | Layer::Precision { classes } => labels(*classes),
    };
    format!("{}({args})", l.kind_name())
}

pub fn compose(c: &Compose) -> String {
    c.terms
        .iter()
        .map(|t| match t {
            Term::Name(n) => n.name.clone(),
            Term::Layer(l, _) => layer(l),
            Term::Instance(n, i) => format!("{}({i})", n.name),
        })
        .collect::<Vec<_>>()
        .join(" . ")
}

fn loss(name: &str, l: &LossExpr) -> String {
    if let [t] = &l.terms[..] {
        if t.coef == 1.0 && name == "loss" {
            return compose(&t.body);
        }
    }
    let mut s = String::new();
    for (i, t) in l.terms.iter().enumerate() {
        let c = if i == 0 {
            t.coef
        } else {
            s.push_str(if t.coef < 0.0 { " - " } else { " + " });
            t.coef.abs()
        };
        let _ = write!(s, "{} * {}", num(c), compose(&t.body));
    }
    s
}

fn decls(out: &mut String, ds: &[Decl]) {
    for d in ds {
        let body = match &d.body {
            DeclBody::Layer(l) => layer(l),
            DeclBody::Init(p) => init(p),
            DeclBody::Compose(c) => compose(c),
            DeclBody::Loss(l) => loss(&d.name.name, l),
        };
        let _ = writeln!(out, "  {} = {body}", d.name.name);
    }
}

/// Prints a program in canonical form.
pub fn print_netspec(p: &NetworkProgram) -> String {
    let mut s = String::new();
    let d = &p.data;
    let source = match &d.source {
        DataSource::Synthetic(seed) => format!("synthetic:{seed}"),
        DataSource::MnistIdx(dir) => format!("mnist_idx:{dir}"),
    };
    let _ = writeln!(s, "data {{\n  source = \"{source}\"\n  batch = {}", d.batch);
    let _ = writeln!(s, "  shape = ({}, {}, {})\n  classes = {}", d.shape[0], d.shape[1], d.shape[2], d.classes);
    if let Some(n) = d.samples {
        let _ = writeln!(s, "  samples = {n}");
    }
    s.push_str("}\n");
    for sub in &p.subnets {
        let _ = writeln!(s, "\nnet {} {{", sub.name.name);
        decls(&mut s, &sub.decls);
        s.push_str("}\n");
    }
    s.push_str("\nnet {\n");
    decls(&mut s, &p.decls);
    s.push_str("}\n");
    let v = &p.solver;
    let _ = writeln!(s, "\nsolver {} {{", v.name);
    let _ = writeln!(s, "  iters = {}\n  test_iters = {}", v.train_iters, v.test_iters);
    let _ = writeln!(s, "  lr = {}\n  momentum = {}\n  decay = {}", num(v.lr), num(v.momentum), num(v.decay));
    let _ = writeln!(s, "  clip = {}\n  snapshot_every = {}\n}}", num(v.clip), v.snapshot_every);
    s
}

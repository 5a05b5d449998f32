//! Recursive-descent parser for network spec files.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::diag::{DResult, DiagKind, Diagnostic, Span};

/// Untyped value syntax, converted to typed decls after parsing.
#[derive(Clone, Debug)]
enum Raw {
    Num(f64, Span),
    Str(String, Span),
    Tuple(Vec<Raw>, Span),
    Compose(Vec<RawTerm>, Span),
    Linear(Vec<(f64, Vec<RawTerm>, Span)>, Span),
}

impl Raw {
    fn span(&self) -> Span {
        match self {
            Raw::Num(_, s) | Raw::Str(_, s) | Raw::Tuple(_, s) | Raw::Compose(_, s) | Raw::Linear(_, s) => *s,
        }
    }
}

#[derive(Clone, Debug)]
struct RawTerm {
    head: Ident,
    args: Option<Vec<RawArg>>,
}

#[derive(Clone, Debug)]
struct RawArg {
    key: Option<Ident>,
    value: Raw,
}

fn syntax(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagKind::SyntaxError, span, msg)
}

fn unknown_kind(head: &Ident) -> Diagnostic {
    Diagnostic::new(
        DiagKind::UnknownLayerKind,
        head.span,
        format!("unknown layer kind or subnet `{}`", head.name),
    )
}

fn invalid(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagKind::InvalidValue, span, msg)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> DResult<Span> {
        if *self.peek() == want {
            Ok(self.bump().span)
        } else {
            Err(syntax(self.span(), format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self, what: &str) -> DResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            other => Err(syntax(self.span(), format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn value(&mut self) -> DResult<Raw> {
        let start = self.span();
        let mut terms = Vec::new();
        let mut linear = false;
        let mut sign = 1.0;
        if *self.peek() == Tok::Minus {
            self.bump();
            sign = -1.0;
            linear = true;
        }
        loop {
            let (coef, body, span, is_lin) = self.product()?;
            linear |= is_lin;
            terms.push((sign * coef, body, span));
            match self.peek() {
                Tok::Plus => sign = 1.0,
                Tok::Minus => sign = -1.0,
                _ => break,
            }
            self.bump();
            linear = true;
        }
        if !linear {
            let (_, body, _) = terms.pop().expect("one term");
            return Ok(body);
        }
        if let [(coef, Raw::Num(n, sp), _)] = &terms[..] {
            return Ok(Raw::Num(coef * n, *sp));
        }
        let mut out = Vec::new();
        for (coef, body, span) in terms {
            match body {
                Raw::Compose(ts, _) => out.push((coef, ts, span)),
                other => return Err(syntax(other.span(), "expected composition in loss expression")),
            }
        }
        Ok(Raw::Linear(out, start))
    }

    /// `atom ("*" atom)*`: returns (numeric coefficient, the one non-numeric factor).
    fn product(&mut self) -> DResult<(f64, Raw, Span, bool)> {
        let span = self.span();
        let mut coef = 1.0;
        let mut body: Option<Raw> = None;
        let mut factors = 0;
        loop {
            let a = self.atom()?;
            factors += 1;
            match a {
                Raw::Num(n, _) if factors > 1 || *self.peek() == Tok::Star || body.is_some() => coef *= n,
                other => {
                    if body.is_some() {
                        return Err(syntax(other.span(), "only one composition may appear in a product"));
                    }
                    body = Some(other);
                }
            }
            if *self.peek() != Tok::Star {
                break;
            }
            self.bump();
        }
        let body = match body {
            Some(b) => b,
            None => return Err(syntax(span, "expected composition")),
        };
        Ok((coef, body, span, factors > 1))
    }

    fn atom(&mut self) -> DResult<Raw> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Raw::Num(n, span))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Raw::Str(s, span))
            }
            Tok::LParen => {
                self.bump();
                let mut items = vec![self.value()?];
                let mut tuple = false;
                while *self.peek() == Tok::Comma {
                    self.bump();
                    tuple = true;
                    items.push(self.value()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if tuple {
                    Ok(Raw::Tuple(items, span))
                } else {
                    Ok(items.pop().expect("one item"))
                }
            }
            Tok::Ident(_) => {
                let mut terms = vec![self.term()?];
                while *self.peek() == Tok::Dot {
                    self.bump();
                    terms.push(self.term()?);
                }
                Ok(Raw::Compose(terms, span))
            }
            other => Err(syntax(span, format!("expected composition, found {}", other.describe()))),
        }
    }

    fn term(&mut self) -> DResult<RawTerm> {
        let head = self.ident("layer or net name")?;
        if *self.peek() != Tok::LParen {
            return Ok(RawTerm { head, args: None });
        }
        self.bump();
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let key = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Eq {
                    let k = self.ident("argument name")?;
                    self.bump();
                    Some(k)
                } else {
                    None
                };
                args.push(RawArg {
                    key,
                    value: self.value()?,
                });
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(RawTerm {
            head,
            args: Some(args),
        })
    }

    /// `ident "=" value` lines up to the closing brace.
    fn body(&mut self) -> DResult<Vec<(Ident, Raw)>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(syntax(self.span(), "expected `}`"));
            }
            let name = self.ident("declaration name")?;
            self.expect(Tok::Eq, "`=`")?;
            let v = self.value()?;
            out.push((name, v));
        }
        self.bump();
        Ok(out)
    }
}

fn num(r: &Raw, what: &str) -> DResult<f64> {
    match r {
        Raw::Num(n, _) => Ok(*n),
        other => Err(invalid(other.span(), format!("`{what}` must be a number"))),
    }
}

fn count(r: &Raw, what: &str) -> DResult<usize> {
    let n = num(r, what)?;
    if n < 0.0 || n.fract() != 0.0 {
        return Err(invalid(r.span(), format!("`{what}` must be a non-negative integer")));
    }
    Ok(n as usize)
}

fn positive(r: &Raw, what: &str) -> DResult<usize> {
    let n = count(r, what)?;
    if n == 0 {
        return Err(invalid(r.span(), format!("`{what}` must be at least 1")));
    }
    Ok(n)
}

fn single_term(r: &Raw) -> Option<&RawTerm> {
    match r {
        Raw::Compose(ts, _) if ts.len() == 1 => Some(&ts[0]),
        _ => None,
    }
}

const INIT_KINDS: &[&str] = &["xavier", "const", "gaussian"];

fn init_of(t: &RawTerm) -> DResult<ParamInit> {
    let args = t.args.clone().unwrap_or_default();
    let span = t.head.span;
    let pos: Vec<&Raw> = args.iter().map(|a| &a.value).collect();
    let (init, rest) = match t.head.name.as_str() {
        "xavier" => (Init::Xavier, &pos[..]),
        "const" => {
            let v = pos.first().ok_or_else(|| syntax(span, "const needs a value"))?;
            (Init::Const(num(v, "const")?), &pos[1..])
        }
        "gaussian" => {
            let v = pos.first().ok_or_else(|| syntax(span, "gaussian needs a standard deviation"))?;
            (Init::Gaussian(num(v, "gaussian")?), &pos[1..])
        }
        other => return Err(Diagnostic::new(DiagKind::UnknownLayerKind, span, format!("unknown initializer `{other}`"))),
    };
    let lr_mult = rest.first().map(|r| num(r, "lr_mult")).transpose()?.unwrap_or(1.0);
    let decay_mult = rest.get(1).map(|r| num(r, "decay_mult")).transpose()?.unwrap_or(1.0);
    if rest.len() > 2 {
        return Err(syntax(span, "initializer takes at most a value and two multipliers"));
    }
    if lr_mult < 0.0 || decay_mult < 0.0 {
        return Err(invalid(span, "multipliers must be non-negative"));
    }
    Ok(ParamInit {
        init,
        lr_mult,
        decay_mult,
    })
}

fn init_ref(r: &Raw) -> DResult<InitRef> {
    let t = single_term(r).ok_or_else(|| syntax(r.span(), "expected an initializer"))?;
    if INIT_KINDS.contains(&t.head.name.as_str()) {
        Ok(InitRef::Inline(init_of(t)?))
    } else if t.args.is_none() {
        Ok(InitRef::Named(t.head.clone()))
    } else {
        Err(Diagnostic::new(
            DiagKind::UnknownLayerKind,
            t.head.span,
            format!("unknown initializer `{}`", t.head.name),
        ))
    }
}

fn compose_of(terms: &[RawTerm]) -> DResult<Compose> {
    let mut out = Vec::new();
    for t in terms {
        let term = match &t.args {
            None => Term::Name(t.head.clone()),
            Some(_) if LAYER_KINDS.contains(&t.head.name.as_str()) => Term::Layer(layer_of(t)?, t.head.span),
            Some(args) => {
                if args.len() != 1 || args[0].key.is_some() || !matches!(args[0].value, Raw::Num(..)) {
                    return Err(unknown_kind(&t.head));
                }
                Term::Instance(t.head.clone(), count(&args[0].value, "instance index")? as u32)
            }
        };
        out.push(term);
    }
    Ok(Compose { terms: out })
}

fn raw_compose(r: &Raw) -> DResult<Compose> {
    match r {
        Raw::Compose(ts, _) => compose_of(ts),
        other => Err(syntax(other.span(), "expected composition")),
    }
}

/// Binds positional and keyword arguments to the named slots of a layer.
fn bind<'a>(t: &'a RawTerm, slots: &[&str]) -> DResult<Vec<Option<&'a Raw>>> {
    let mut out: Vec<Option<&Raw>> = vec![None; slots.len()];
    let mut next = 0;
    for a in t.args.iter().flatten() {
        let i = match &a.key {
            Some(k) => slots.iter().position(|s| *s == k.name).ok_or_else(|| {
                syntax(k.span, format!("`{}` has no argument `{}`", t.head.name, k.name))
            })?,
            None => {
                let i = next;
                next += 1;
                if i >= slots.len() {
                    return Err(syntax(a.value.span(), format!("too many arguments to `{}`", t.head.name)));
                }
                i
            }
        };
        if out[i].is_some() {
            return Err(syntax(a.value.span(), format!("argument `{}` given twice", slots[i])));
        }
        out[i] = Some(&a.value);
    }
    Ok(out)
}

fn required<'a>(t: &RawTerm, v: Option<&'a Raw>, slot: &str) -> DResult<&'a Raw> {
    v.ok_or_else(|| syntax(t.head.span, format!("`{}` requires argument `{slot}`", t.head.name)))
}

fn labels_arg(r: Option<&Raw>) -> DResult<Option<usize>> {
    let Some(r) = r else { return Ok(None) };
    if let Raw::Num(..) = r {
        return Ok(Some(positive(r, "classes")?));
    }
    match single_term(r) {
        Some(t) if t.head.name == "indicator" => {
            let a = t.args.as_ref().and_then(|a| a.first()).ok_or_else(|| syntax(t.head.span, "indicator needs a class count"))?;
            Ok(Some(positive(&a.value, "classes")?))
        }
        _ => Err(syntax(r.span(), "expected `indicator(K)`")),
    }
}

fn layer_of(t: &RawTerm) -> DResult<Layer> {
    let kind = t.head.name.as_str();
    let slots: &[&str] = match kind {
        "conv" => &["k", "out", "stride", "pad", "w", "b"],
        "maxpool" | "avgpool" => &["k", "stride", "pad"],
        "relu" => &["rank"],
        "full" => &["out", "w", "b"],
        "flatten" => &["rank", "axis"],
        "softmax" => &[],
        "dropout" => &["rate"],
        "lrn" => &["size", "alpha", "beta"],
        "logloss" | "precision" => &["labels"],
        "concat" => {
            let mut branches = Vec::new();
            for a in t.args.iter().flatten() {
                if let Some(k) = &a.key {
                    return Err(syntax(k.span, "concat takes only branches"));
                }
                branches.push(raw_compose(&a.value)?);
            }
            if branches.is_empty() {
                return Err(syntax(t.head.span, "concat needs at least one branch"));
            }
            return Ok(Layer::Concat { branches });
        }
        other => {
            return Err(Diagnostic::new(
                DiagKind::UnknownLayerKind,
                t.head.span,
                format!("unknown layer kind `{other}`"),
            ))
        }
    };
    let a = bind(t, slots)?;
    let opt_count = |i: usize, default: usize| -> DResult<usize> { a[i].map(|r| count(r, slots[i])).transpose().map(|v| v.unwrap_or(default)) };
    let init = |i: usize, default: ParamInit| -> DResult<InitRef> { a[i].map(init_ref).transpose().map(|v| v.unwrap_or(InitRef::Inline(default))) };
    Ok(match kind {
        "conv" => Layer::Conv {
            k: positive(required(t, a[0], "k")?, "k")?,
            out: positive(required(t, a[1], "out")?, "out")?,
            stride: a[2].map(|r| positive(r, "stride")).transpose()?.unwrap_or(1),
            pad: opt_count(3, 0)?,
            w: init(4, ParamInit::xavier())?,
            b: init(5, ParamInit::zero())?,
        },
        "maxpool" | "avgpool" => {
            let k = positive(required(t, a[0], "k")?, "k")?;
            Layer::Pool {
                max: kind == "maxpool",
                k,
                stride: a[1].map(|r| positive(r, "stride")).transpose()?.unwrap_or(k),
                pad: opt_count(2, 0)?,
            }
        }
        "relu" => Layer::Relu {
            rank: a[0].map(|r| positive(r, "rank")).transpose()?,
        },
        "full" => Layer::Full {
            out: positive(required(t, a[0], "out")?, "out")?,
            w: init(1, ParamInit::xavier())?,
            b: init(2, ParamInit::zero())?,
        },
        "flatten" => Layer::Flatten {
            rank: positive(required(t, a[0], "rank")?, "rank")?,
            axis: count(required(t, a[1], "axis")?, "axis")?,
        },
        "softmax" => Layer::Softmax,
        "dropout" => {
            let r = required(t, a[0], "rate")?;
            let rate = num(r, "rate")?;
            if !(0.0..1.0).contains(&rate) {
                return Err(invalid(r.span(), "dropout rate must lie in [0, 1)"));
            }
            Layer::Dropout { rate }
        }
        "lrn" => Layer::Lrn {
            size: positive(required(t, a[0], "size")?, "size")?,
            alpha: num(required(t, a[1], "alpha")?, "alpha")?,
            beta: num(required(t, a[2], "beta")?, "beta")?,
        },
        "logloss" => Layer::LogLoss { classes: labels_arg(a[0])? },
        "precision" => Layer::Precision { classes: labels_arg(a[0])? },
        _ => unreachable!("kind list checked above"),
    })
}

fn decl_body(name: &Ident, v: &Raw, declared: &[String]) -> DResult<DeclBody> {
    if let Raw::Linear(terms, _) = v {
        let mut out = Vec::new();
        for (coef, ts, span) in terms {
            out.push(LossTerm {
                coef: *coef,
                body: compose_of(ts)?,
                span: *span,
            });
        }
        return Ok(DeclBody::Loss(LossExpr { terms: out }));
    }
    let Raw::Compose(ts, span) = v else {
        return Err(syntax(v.span(), "expected composition"));
    };
    if name.name == "loss" {
        return Ok(DeclBody::Loss(LossExpr {
            terms: vec![LossTerm {
                coef: 1.0,
                body: compose_of(ts)?,
                span: *span,
            }],
        }));
    }
    if let [t] = &ts[..] {
        let head = t.head.name.as_str();
        if INIT_KINDS.contains(&head) && !declared.iter().any(|d| d == head) {
            return Ok(DeclBody::Init(init_of(t)?));
        }
        if LAYER_KINDS.contains(&head) && (t.args.is_some() || !declared.iter().any(|d| d == head)) {
            return Ok(DeclBody::Layer(layer_of(t)?));
        }
    }
    Ok(DeclBody::Compose(compose_of(ts)?))
}

fn decls(items: Vec<(Ident, Raw)>, section: Span) -> DResult<Vec<Decl>> {
    if items.is_empty() {
        return Err(syntax(section, "expected composition"));
    }
    let mut out: Vec<Decl> = Vec::new();
    let mut declared: Vec<String> = Vec::new();
    for (name, v) in items {
        if declared.contains(&name.name) {
            return Err(Diagnostic::new(DiagKind::DuplicateName, name.span, format!("`{}` is declared twice", name.name)));
        }
        let body = decl_body(&name, &v, &declared)?;
        declared.push(name.name.clone());
        out.push(Decl { name, body });
    }
    Ok(out)
}

fn data_of(items: Vec<(Ident, Raw)>, span: Span) -> DResult<DataBinding> {
    let mut source = DataSource::Synthetic(1);
    let (mut batch, mut shape, mut classes, mut samples) = (None, None, None, None);
    let mut seen: Vec<String> = Vec::new();
    for (k, v) in items {
        if seen.contains(&k.name) {
            return Err(Diagnostic::new(DiagKind::DuplicateName, k.span, format!("`{}` is set twice", k.name)));
        }
        seen.push(k.name.clone());
        match k.name.as_str() {
            "source" => {
                let Raw::Str(s, sp) = &v else {
                    return Err(invalid(v.span(), "`source` must be a string"));
                };
                source = if let Some(seed) = s.strip_prefix("synthetic:") {
                    DataSource::Synthetic(seed.parse().map_err(|_| invalid(*sp, format!("bad synthetic seed `{seed}`")))?)
                } else if let Some(dir) = s.strip_prefix("mnist_idx:") {
                    DataSource::MnistIdx(dir.to_string())
                } else {
                    return Err(invalid(*sp, format!("unknown data source `{s}`; use synthetic:<seed> or mnist_idx:<dir>")));
                };
            }
            "batch" => batch = Some(positive(&v, "batch")?),
            "classes" => {
                let c = count(&v, "classes")?;
                if c < 2 {
                    return Err(invalid(v.span(), "`classes` must be at least 2"));
                }
                classes = Some(c);
            }
            "samples" => samples = Some(positive(&v, "samples")?),
            "shape" => {
                let Raw::Tuple(items, sp) = &v else {
                    return Err(invalid(v.span(), "`shape` must be a tuple (C, H, W)"));
                };
                if items.len() != 3 {
                    return Err(invalid(*sp, "`shape` must have three extents (C, H, W)"));
                }
                shape = Some([positive(&items[0], "shape")?, positive(&items[1], "shape")?, positive(&items[2], "shape")?]);
            }
            other => return Err(syntax(k.span, format!("unknown data key `{other}`"))),
        }
    }
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| syntax(span, format!("data section needs `{key}`")));
    Ok(DataBinding {
        source,
        batch: need(batch, "batch")?,
        shape: shape.ok_or_else(|| syntax(span, "data section needs `shape`"))?,
        classes: need(classes, "classes")?,
        samples,
        span,
    })
}

fn solver_of(name: Option<Ident>, items: Vec<(Ident, Raw)>) -> DResult<SolverConfig> {
    let mut s = SolverConfig::default();
    if let Some(n) = name {
        s.name = n.name;
    }
    let mut seen: Vec<String> = Vec::new();
    for (k, v) in items {
        if seen.contains(&k.name) {
            return Err(Diagnostic::new(DiagKind::DuplicateName, k.span, format!("`{}` is set twice", k.name)));
        }
        seen.push(k.name.clone());
        match k.name.as_str() {
            "iters" => s.train_iters = count(&v, "iters")?,
            "test_iters" => s.test_iters = count(&v, "test_iters")?,
            "snapshot_every" => s.snapshot_every = count(&v, "snapshot_every")?,
            "lr" => {
                s.lr = num(&v, "lr")?;
                if s.lr <= 0.0 {
                    return Err(invalid(v.span(), "`lr` must be positive"));
                }
            }
            "momentum" => {
                s.momentum = num(&v, "momentum")?;
                if !(0.0..1.0).contains(&s.momentum) {
                    return Err(invalid(v.span(), "`momentum` must lie in [0, 1)"));
                }
            }
            "decay" => {
                s.decay = num(&v, "decay")?;
                if s.decay < 0.0 {
                    return Err(invalid(v.span(), "`decay` must be non-negative"));
                }
            }
            "clip" => {
                s.clip = num(&v, "clip")?;
                if s.clip < 0.0 {
                    return Err(invalid(v.span(), "`clip` must be non-negative"));
                }
            }
            other => return Err(syntax(k.span, format!("unknown solver key `{other}`"))),
        }
    }
    Ok(s)
}

fn check_compose(c: &Compose, subnets: &[Subnet]) -> DResult<()> {
    for t in &c.terms {
        match t {
            Term::Instance(n, _) if !subnets.iter().any(|s| s.name.name == n.name) => return Err(unknown_kind(n)),
            Term::Layer(Layer::Concat { branches }, _) => {
                for b in branches {
                    check_compose(b, subnets)?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_instances(body: &DeclBody, subnets: &[Subnet]) -> DResult<()> {
    match body {
        DeclBody::Compose(c) => check_compose(c, subnets),
        DeclBody::Loss(l) => l.terms.iter().try_for_each(|t| check_compose(&t.body, subnets)),
        DeclBody::Layer(Layer::Concat { branches }) => branches.iter().try_for_each(|b| check_compose(b, subnets)),
        _ => Ok(()),
    }
}

/// Parses a network spec file.
pub fn parse_netspec(src: &str) -> DResult<NetworkProgram> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut data = None;
    let mut solver = None;
    let mut main: Option<Vec<Decl>> = None;
    let mut subnets: Vec<Subnet> = Vec::new();
    while *p.peek() != Tok::Eof {
        let kw = p.ident("`net`, `data` or `solver`")?;
        let name = if let Tok::Ident(_) = p.peek() { Some(p.ident("section name")?) } else { None };
        let section = kw.span;
        let items = p.body()?;
        match kw.name.as_str() {
            "data" => {
                if data.is_some() {
                    return Err(Diagnostic::new(DiagKind::DuplicateName, section, "second `data` section"));
                }
                data = Some(data_of(items, section)?);
            }
            "solver" => {
                if solver.is_some() {
                    return Err(Diagnostic::new(DiagKind::DuplicateName, section, "second `solver` section"));
                }
                solver = Some(solver_of(name, items)?);
            }
            "net" => match name {
                None => {
                    if main.is_some() {
                        return Err(Diagnostic::new(DiagKind::DuplicateName, section, "second unnamed `net` section"));
                    }
                    main = Some(decls(items, section)?);
                }
                Some(n) => {
                    if subnets.iter().any(|s| s.name.name == n.name) {
                        return Err(Diagnostic::new(DiagKind::DuplicateName, n.span, format!("subnet `{}` is declared twice", n.name)));
                    }
                    let ds = decls(items, section)?;
                    if !matches!(ds.last().map(|d| &d.body), Some(DeclBody::Compose(_)) | Some(DeclBody::Layer(_))) {
                        return Err(syntax(n.span, format!("subnet `{}` must end with a composition", n.name)));
                    }
                    subnets.push(Subnet { name: n, decls: ds });
                }
            },
            other => return Err(syntax(kw.span, format!("expected `net`, `data` or `solver`, found `{other}`"))),
        }
    }
    let end = p.span();
    for d in main.iter().flatten().chain(subnets.iter().flat_map(|s| s.decls.iter())) {
        check_instances(&d.body, &subnets)?;
    }
    let decls = main.ok_or_else(|| syntax(end, "missing unnamed `net` section"))?;
    let losses = decls.iter().filter(|d| matches!(d.body, DeclBody::Loss(_))).count();
    if losses != 1 || !decls.iter().any(|d| d.name.name == "loss") {
        return Err(syntax(end, "the `net` section needs exactly one `loss` expression"));
    }
    if let Some(acc) = decls.iter().find(|d| d.name.name == "accuracy") {
        if !matches!(acc.body, DeclBody::Compose(_)) {
            return Err(syntax(acc.name.span, "`accuracy` must be a composition"));
        }
    }
    Ok(NetworkProgram {
        data: data.ok_or_else(|| syntax(end, "missing `data` section"))?,
        solver: solver.unwrap_or_default(),
        decls,
        subnets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA: &str = "data { batch = 500 shape = (1, 28, 28) classes = 10 }\n";

    fn prog(net: &str) -> DResult<NetworkProgram> {
        parse_netspec(&format!("{DATA}net {{\n{net}\n}}"))
    }

    #[test]
    fn conv_decl() {
        let p = prog("cv1 = conv(k=5, out=20)\nloss = logloss . softmax . cv1").unwrap();
        match &p.decls[0].body {
            DeclBody::Layer(Layer::Conv { k, out, stride, pad, .. }) => assert_eq!((*k, *out, *stride, *pad), (5, 20, 1, 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_net_is_syntax_error() {
        let err = prog("").unwrap_err();
        assert_eq!(err.kind, DiagKind::SyntaxError);
        assert!(err.message.contains("expected composition"));
    }

    #[test]
    fn composition_written_order() {
        let p = prog("f = full(10)\nnetwork = f . relu . f\nloss = logloss . softmax . network").unwrap();
        let DeclBody::Compose(c) = &p.decls[1].body else { panic!() };
        let names: Vec<String> = c
            .terms
            .iter()
            .map(|t| match t {
                Term::Name(i) => i.name.clone(),
                other => format!("{other:?}"),
            })
            .collect();
        assert_eq!(names, ["f", "relu", "f"]);
    }

    #[test]
    fn weighted_loss_terms() {
        let p = prog("a = softmax\nloss = logloss . a + 0.3 * logloss . a - logloss . a * 2").unwrap();
        let DeclBody::Loss(l) = &p.loss().unwrap().body else { panic!() };
        let coefs: Vec<f64> = l.terms.iter().map(|t| t.coef).collect();
        assert_eq!(coefs, [1.0, 0.3, -2.0]);
    }

    #[test]
    fn duplicate_and_unknown_kind() {
        let e = prog("a = relu(2)\na = relu(2)\nloss = logloss . a").unwrap_err();
        assert_eq!(e.kind, DiagKind::DuplicateName);
        assert_eq!(e.span.line, 4);
        let e = prog("a = convolve(5)\nloss = logloss . a").unwrap_err();
        assert_eq!(e.kind, DiagKind::UnknownLayerKind);
    }

    #[test]
    fn solver_and_data_validation() {
        let e = parse_netspec("data { batch = 0 shape = (1,2,2) classes = 3 } net { loss = logloss }").unwrap_err();
        assert_eq!(e.kind, DiagKind::InvalidValue);
        let p = parse_netspec(&format!("{DATA}net {{ loss = logloss . softmax }} solver lenet {{ iters = 1000 lr = 0.01 momentum = 0.9 decay = 0.0005 }}")).unwrap();
        assert_eq!(p.solver.name, "lenet");
        assert_eq!(p.solver.train_iters, 1000);
    }

    #[test]
    fn subnet_instances() {
        let src = format!("{DATA}net blk {{ c$1 = conv(1, 4)\nout = relu . c$1 }}\nnet {{ network = blk(2) . blk(1)\nloss = logloss . softmax . network }}");
        let p = parse_netspec(&src).unwrap();
        assert_eq!(p.subnets[0].decls.len(), 2);
        let DeclBody::Compose(c) = &p.decls[0].body else { panic!() };
        assert!(matches!(&c.terms[0], Term::Instance(n, 2) if n.name == "blk"));
    }
}

//! Resolution of names, compositions and subnets into expression graphs.

use super::ast::*;
use crate::diag::{DResult, DiagKind, Diagnostic, Span};
use crate::expr::fun::{weighted_sum, Op, ScalarFun, ScalarHead, TensorFun};
use crate::expr::{Graph, PId, TId};

/// A program lowered to an expression graph.
#[derive(Clone, Debug)]
pub struct Elaborated {
    pub graph: Graph,
    /// Rank-0 loss root.
    pub loss: TId,
    /// Rank-0 precision root.
    pub accuracy: Option<TId>,
    /// Free parameters of the loss, in first-use order.
    pub params: Vec<PId>,
}

enum Value {
    Fun(TensorFun),
    Scalar(ScalarFun),
}

struct Scope<'a> {
    decls: &'a [Decl],
    /// Instance index of a subnet scope.
    instance: Option<u32>,
    parent: Option<&'a Scope<'a>>,
}

impl<'a> Scope<'a> {
    fn find(&self, name: &str) -> Option<(&'a Decl, &Scope<'a>)> {
        match self.decls.iter().find(|d| d.name.name == name) {
            Some(d) => Some((d, self)),
            None => self.parent.and_then(|p| p.find(name)),
        }
    }

    /// The name a declaration takes in this scope.
    fn rename(&self, name: &str) -> String {
        match self.instance {
            None => name.to_string(),
            Some(n) if name.contains('$') => name.replace('$', &n.to_string()),
            Some(n) => format!("{name}{n}"),
        }
    }
}

struct Elab<'p> {
    prog: &'p NetworkProgram,
    /// Declarations being expanded, for cycle detection.
    stack: Vec<String>,
}

fn unbound(id: &Ident, what: &str) -> Diagnostic {
    Diagnostic::new(DiagKind::UnboundName, id.span, format!("{what} `{}` is not declared", id.name))
}

fn arity(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagKind::ArityError, span, msg)
}

impl<'p> Elab<'p> {
    fn init(&self, r: &InitRef, scope: &Scope<'_>) -> DResult<ParamInit> {
        match r {
            InitRef::Inline(p) => Ok(p.clone()),
            InitRef::Named(id) => match scope.find(&id.name) {
                Some((Decl { body: DeclBody::Init(p), .. }, _)) => Ok(p.clone()),
                Some(_) => Err(arity(id.span, format!("`{}` is not an initializer", id.name))),
                None => Err(unbound(id, "initializer")),
            },
        }
    }

    /// A layer as a one-stage function or a scalar head.
    fn layer(&mut self, l: &Layer, prefix: String, site: Span, scope: &Scope<'_>, anon: &mut usize) -> DResult<Value> {
        let classes = self.prog.data.classes;
        let op = match l {
            Layer::Conv { k, out, stride, pad, w, b } => Op::Conv {
                k: *k,
                out: *out,
                stride: *stride,
                pad: *pad,
                w: self.init(w, scope)?,
                b: self.init(b, scope)?,
            },
            Layer::Pool { max, k, stride, pad } => Op::Pool {
                max: *max,
                k: *k,
                stride: *stride,
                pad: *pad,
            },
            Layer::Relu { rank } => Op::Relu { rank: *rank },
            Layer::Full { out, w, b } => Op::Full {
                out: *out,
                w: self.init(w, scope)?,
                b: self.init(b, scope)?,
            },
            Layer::Flatten { rank, axis } => Op::Flatten { rank: *rank, axis: *axis },
            Layer::Softmax => Op::Softmax,
            Layer::Dropout { rate } => Op::Dropout { rate: *rate },
            Layer::Lrn { size, alpha, beta } => Op::Lrn {
                size: *size,
                alpha: *alpha,
                beta: *beta,
            },
            Layer::Concat { branches } => {
                let mut funs = Vec::new();
                for b in branches {
                    match self.compose(b, &prefix, scope, anon)? {
                        Value::Fun(f) => funs.push(f),
                        Value::Scalar(s) => return Err(arity(s.site, "a concat branch must produce a tensor")),
                    }
                }
                Op::Concat(funs)
            }
            Layer::LogLoss { classes: k } => {
                return Ok(Value::Scalar(ScalarFun {
                    head: ScalarHead::LogLoss(k.unwrap_or(classes)),
                    body: TensorFun::id(),
                    site,
                }))
            }
            Layer::Precision { classes: k } => {
                return Ok(Value::Scalar(ScalarFun {
                    head: ScalarHead::Precision(k.unwrap_or(classes)),
                    body: TensorFun::id(),
                    site,
                }))
            }
        };
        Ok(Value::Fun(TensorFun::stage(op, prefix, site)))
    }

    fn name(&mut self, id: &Ident, scope: &Scope<'_>, anon: &mut usize) -> DResult<Value> {
        let Some((decl, home)) = scope.find(&id.name) else {
            let builtin = match id.name.as_str() {
                "relu" => Layer::Relu { rank: None },
                "softmax" => Layer::Softmax,
                "logloss" => Layer::LogLoss { classes: None },
                "precision" => Layer::Precision { classes: None },
                _ => return Err(unbound(id, "layer or network")),
            };
            return self.layer(&builtin, id.name.clone(), id.span, scope, anon);
        };
        let full = home.rename(&decl.name.name);
        match &decl.body {
            DeclBody::Layer(l) => {
                let mut inner = 0;
                self.layer(l, full, id.span, home, &mut inner)
            }
            DeclBody::Compose(c) => {
                if self.stack.contains(&full) {
                    return Err(arity(id.span, format!("`{}` is defined in terms of itself", id.name)));
                }
                self.stack.push(full.clone());
                let mut inner = 0;
                let v = self.compose(c, &full, home, &mut inner);
                self.stack.pop();
                v
            }
            DeclBody::Init(_) => Err(arity(id.span, format!("`{}` is an initializer, not a layer", id.name))),
            DeclBody::Loss(_) => Err(arity(id.span, format!("`{}` is a loss, not a layer", id.name))),
        }
    }

    fn instance(&mut self, id: &Ident, n: u32) -> DResult<Value> {
        let sub = self.prog.subnet(&id.name).ok_or_else(|| unbound(id, "subnet"))?;
        let main = Scope {
            decls: &self.prog.decls,
            instance: None,
            parent: None,
        };
        let inner = Scope {
            decls: &sub.decls,
            instance: Some(n),
            parent: Some(&main),
        };
        let key = format!("{}({n})", id.name);
        if self.stack.contains(&key) {
            return Err(arity(id.span, format!("subnet `{}` instantiates itself", id.name)));
        }
        self.stack.push(key);
        let last = sub.decls.last().expect("parser rejects empty subnets");
        let v = self.name(&last.name, &inner, &mut 0);
        self.stack.pop();
        v
    }

    /// Elaborates `f . g . h` right to left.
    fn compose(&mut self, c: &Compose, owner: &str, scope: &Scope<'_>, anon: &mut usize) -> DResult<Value> {
        let mut acc = TensorFun::id();
        let mut head: Option<ScalarFun> = None;
        for (pos, term) in c.terms.iter().enumerate().rev() {
            let (v, span) = match term {
                Term::Name(id) => (self.name(id, scope, anon)?, id.span),
                Term::Instance(id, n) => (self.instance(id, *n)?, id.span),
                Term::Layer(l, span) => {
                    *anon += 1;
                    let prefix = format!("{owner}_{}{}", l.kind_name(), anon);
                    (self.layer(l, prefix, *span, scope, anon)?, *span)
                }
            };
            match v {
                Value::Fun(f) => {
                    if head.is_some() {
                        return Err(arity(span, "a layer cannot be applied to a scalar"));
                    }
                    acc = TensorFun::compose(&f, &acc);
                }
                Value::Scalar(s) => {
                    if pos != 0 || head.is_some() {
                        return Err(arity(span, "a scalar function must be the outermost stage"));
                    }
                    head = Some(ScalarFun {
                        head: s.head,
                        body: TensorFun::compose(&s.body, &acc),
                        site: s.site,
                    });
                }
            }
        }
        Ok(match head {
            Some(s) => Value::Scalar(s),
            None => Value::Fun(acc),
        })
    }
}

/// Builds the loss and accuracy graphs of a parsed program.
pub fn elaborate(prog: &NetworkProgram) -> DResult<Elaborated> {
    let d = &prog.data;
    let mut graph = Graph::new([d.batch, d.shape[0], d.shape[1], d.shape[2]], d.classes);
    let mut el = Elab { prog, stack: Vec::new() };
    let scope = Scope {
        decls: &prog.decls,
        instance: None,
        parent: None,
    };
    let loss_decl = prog.loss().expect("parser requires a loss");
    let DeclBody::Loss(lx) = &loss_decl.body else {
        unreachable!("loss decls parse as losses")
    };
    let mut terms = Vec::new();
    for t in &lx.terms {
        match el.compose(&t.body, "loss", &scope, &mut 0)? {
            Value::Scalar(s) if matches!(s.head, ScalarHead::LogLoss(_)) => terms.push((t.coef, s)),
            _ => return Err(arity(t.span, "each loss term must end in `logloss`")),
        }
    }
    let mut roots = Vec::new();
    for (c, s) in &terms {
        roots.push((*c, s.apply(&mut graph)?));
    }
    graph.site = loss_decl.name.span;
    let loss = weighted_sum(&mut graph, &roots)?;
    let accuracy = match prog.accuracy() {
        None => None,
        Some(a) => {
            let DeclBody::Compose(c) = &a.body else { unreachable!("parser checks accuracy") };
            match el.compose(c, "accuracy", &scope, &mut 0)? {
                Value::Scalar(s) if matches!(s.head, ScalarHead::Precision(_)) => Some(s.apply(&mut graph)?),
                _ => return Err(arity(a.name.span, "`accuracy` must end in `precision`")),
            }
        }
    };
    let params = graph.free_params(&[loss]);
    Ok(Elaborated {
        graph,
        loss,
        accuracy,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspec::parse_netspec;

    pub const LENET: &str = "
data { batch = 500 shape = (1, 28, 28) classes = 10 }
net {
  cv1 = conv(k=5, out=20)
  cv2 = conv(k=5, out=50)
  mp = maxpool(k=2, stride=2)
  flat = flatten(4, 1)
  f = full(500)
  f2 = full(10)
  network = f2 . relu . f . flat . mp . cv2 . mp . cv1
  loss = logloss . softmax . network
  accuracy = precision . network
}
";

    fn names(e: &Elaborated) -> Vec<String> {
        e.params.iter().map(|&p| e.graph.param_info(p).name.clone()).collect()
    }

    #[test]
    fn lenet_params_in_first_use_order() {
        let e = elaborate(&parse_netspec(LENET).unwrap()).unwrap();
        assert_eq!(names(&e), ["cv1_W", "cv1_B", "cv2_W", "cv2_B", "f_W", "f_B", "f2_W", "f2_B"]);
        assert_eq!(e.graph.param_info(e.params[4]).shape, [500, 800]);
        assert!(e.accuracy.is_some());
    }

    #[test]
    fn deterministic() {
        let p = parse_netspec(LENET).unwrap();
        assert_eq!(names(&elaborate(&p).unwrap()), names(&elaborate(&p).unwrap()));
    }

    #[test]
    fn parameter_free_network() {
        let p = parse_netspec("data { batch = 2 shape = (1,1,10) classes = 10 }\nnet { f = flatten(4, 1)\nloss = logloss . softmax . f }").unwrap();
        assert!(elaborate(&p).unwrap().params.is_empty());
    }

    #[test]
    fn unbound_name_located() {
        let p = parse_netspec("data { batch = 2 shape = (1,4,4) classes = 2 }\nnet {\n loss = logloss . softmax . nothere\n}").unwrap();
        let e = elaborate(&p).unwrap_err();
        assert_eq!(e.kind, DiagKind::UnboundName);
        assert_eq!((e.span.line, e.span.col), (3, 29));
    }

    #[test]
    fn subnet_instances_get_fresh_names() {
        let src = "
data { batch = 2 shape = (3, 8, 8) classes = 4 }
net block {
  c$1 = conv(1, 2)
  c$2 = conv(3, 2, pad=1)
  out = concat(c$1, c$2) . relu
}
net {
  flat = flatten(4, 1)
  f = full(4)
  network = f . flat . block(2) . block(1)
  loss = logloss . softmax . network
}
";
        let e = elaborate(&parse_netspec(src).unwrap()).unwrap();
        assert_eq!(names(&e), ["c11_W", "c11_B", "c12_W", "c12_B", "c21_W", "c21_B", "c22_W", "c22_B", "f_W", "f_B"]);
    }

    #[test]
    fn weighted_loss_uses_named_constants() {
        let src = "
data { batch = 2 shape = (1, 2, 2) classes = 4 }
net {
  flat = flatten(4, 1)
  a = full(4) . flat
  b = full(4, w=xavier) . flat
  loss = logloss . softmax . a + 0.3 * logloss . softmax . b
}
";
        let e = elaborate(&parse_netspec(src).unwrap()).unwrap();
        let r = e.graph.render(e.loss, &|t| format!("X{}", t.0));
        assert!(r.contains("loss2:0.3"), "{r}");
        assert_eq!(e.params.len(), 4);
    }
}

//! Structured form of a network spec file.

use crate::diag::Span;

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident {
            name: name.into(),
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Xavier,
    Const(f64),
    Gaussian(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInit {
    pub init: Init,
    pub lr_mult: f64,
    pub decay_mult: f64,
}

impl ParamInit {
    pub fn xavier() -> Self {
        ParamInit {
            init: Init::Xavier,
            lr_mult: 1.0,
            decay_mult: 1.0,
        }
    }

    pub fn zero() -> Self {
        ParamInit {
            init: Init::Const(0.0),
            lr_mult: 1.0,
            decay_mult: 1.0,
        }
    }
}

/// A parameter initializer written inline or by the name of an init decl.
#[derive(Clone, Debug, PartialEq)]
pub enum InitRef {
    Inline(ParamInit),
    Named(Ident),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv {
        k: usize,
        out: usize,
        stride: usize,
        pad: usize,
        w: InitRef,
        b: InitRef,
    },
    Pool {
        max: bool,
        k: usize,
        stride: usize,
        pad: usize,
    },
    Relu {
        rank: Option<usize>,
    },
    Full {
        out: usize,
        w: InitRef,
        b: InitRef,
    },
    Flatten {
        rank: usize,
        axis: usize,
    },
    Softmax,
    Dropout {
        rate: f64,
    },
    Lrn {
        size: usize,
        alpha: f64,
        beta: f64,
    },
    Concat {
        branches: Vec<Compose>,
    },
    /// Log loss against one-hot labels of `classes` classes (data default).
    LogLoss {
        classes: Option<usize>,
    },
    Precision {
        classes: Option<usize>,
    },
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Pool { max: true, .. } => "maxpool",
            Layer::Pool { max: false, .. } => "avgpool",
            Layer::Relu { .. } => "relu",
            Layer::Full { .. } => "full",
            Layer::Flatten { .. } => "flatten",
            Layer::Softmax => "softmax",
            Layer::Dropout { .. } => "dropout",
            Layer::Lrn { .. } => "lrn",
            Layer::Concat { .. } => "concat",
            Layer::LogLoss { .. } => "logloss",
            Layer::Precision { .. } => "precision",
        }
    }

    /// Layers that map a tensor to a scalar.
    pub fn is_scalar(&self) -> bool {
        matches!(self, Layer::LogLoss { .. } | Layer::Precision { .. })
    }
}

pub const LAYER_KINDS: &[&str] = &[
    "conv", "maxpool", "avgpool", "relu", "full", "flatten", "softmax", "dropout", "lrn", "concat", "logloss",
    "precision",
];

/// One stage of a composition.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    /// A declared layer or composition, or a parameter-free built-in.
    Name(Ident),
    /// An anonymous layer written inline.
    Layer(Layer, Span),
    /// Instance `index` of a named subnet.
    Instance(Ident, u32),
}

/// `f . g . h`, stored in written order; applies right to left.
#[derive(Clone, Debug, PartialEq)]
pub struct Compose {
    pub terms: Vec<Term>,
}

/// `a + 0.3 * b - c`
#[derive(Clone, Debug, PartialEq)]
pub struct LossExpr {
    pub terms: Vec<LossTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossTerm {
    pub coef: f64,
    pub body: Compose,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeclBody {
    Layer(Layer),
    Init(ParamInit),
    Compose(Compose),
    Loss(LossExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decl {
    pub name: Ident,
    pub body: DeclBody,
}

/// A named `net` section: a reusable subnet whose last decl is its body.
#[derive(Clone, Debug, PartialEq)]
pub struct Subnet {
    pub name: Ident,
    pub decls: Vec<Decl>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(u64),
    MnistIdx(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataBinding {
    pub source: DataSource,
    pub batch: usize,
    pub shape: [usize; 3],
    pub classes: usize,
    /// Training samples kept from the source.
    pub samples: Option<usize>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub name: String,
    pub train_iters: usize,
    pub test_iters: usize,
    pub lr: f64,
    pub momentum: f64,
    pub decay: f64,
    /// Global gradient-norm threshold; 0 disables clipping.
    pub clip: f64,
    /// Iterations between snapshots; 0 saves only at the end.
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            name: "net".into(),
            train_iters: 100,
            test_iters: 10,
            lr: 0.01,
            momentum: 0.0,
            decay: 0.0,
            clip: 0.0,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkProgram {
    pub data: DataBinding,
    pub solver: SolverConfig,
    /// Decls of the unnamed `net` section, in file order.
    pub decls: Vec<Decl>,
    pub subnets: Vec<Subnet>,
}

impl NetworkProgram {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name.name == name)
    }

    pub fn loss(&self) -> Option<&Decl> {
        self.decl("loss")
    }

    pub fn accuracy(&self) -> Option<&Decl> {
        self.decl("accuracy")
    }

    pub fn subnet(&self, name: &str) -> Option<&Subnet> {
        self.subnets.iter().find(|s| s.name.name == name)
    }
}

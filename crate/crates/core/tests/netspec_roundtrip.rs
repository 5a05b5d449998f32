use proptest::prelude::*;
use tensorc::netspec::*;
use tensorc::Span;

fn float() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), (1u32..1000).prop_map(|n| n as f64 / 64.0), (-50i32..50).prop_map(|n| n as f64 * 0.1)]
}

fn param_init() -> impl Strategy<Value = ParamInit> {
    let init = prop_oneof![Just(Init::Xavier), float().prop_map(Init::Const), (1u32..100).prop_map(|n| Init::Gaussian(n as f64 / 1000.0))];
    (init, prop_oneof![Just(1.0), Just(2.0), Just(0.0)], prop_oneof![Just(1.0), Just(0.0)])
        .prop_map(|(init, lr_mult, decay_mult)| ParamInit { init, lr_mult, decay_mult })
}

fn init_ref() -> impl Strategy<Value = InitRef> {
    prop_oneof![param_init().prop_map(InitRef::Inline), Just(InitRef::Named(Ident::new("winit")))]
}

fn leaf_layer() -> impl Strategy<Value = Layer> {
    prop_oneof![
        (1usize..8, 1usize..64, 1usize..3, 0usize..3, init_ref(), init_ref())
            .prop_map(|(k, out, stride, pad, w, b)| Layer::Conv { k, out, stride, pad, w, b }),
        (any::<bool>(), 1usize..4, 1usize..4, 0usize..2).prop_map(|(max, k, stride, pad)| Layer::Pool { max, k, stride, pad }),
        proptest::option::of(1usize..5).prop_map(|rank| Layer::Relu { rank }),
        (1usize..600, init_ref(), init_ref()).prop_map(|(out, w, b)| Layer::Full { out, w, b }),
        (1usize..5, 0usize..4).prop_map(|(rank, axis)| Layer::Flatten { rank, axis }),
        Just(Layer::Softmax),
        (0u32..99).prop_map(|r| Layer::Dropout { rate: r as f64 / 100.0 }),
        (1usize..9, float(), float()).prop_map(|(size, alpha, beta)| Layer::Lrn { size, alpha, beta }),
        proptest::option::of(2usize..20).prop_map(|classes| Layer::LogLoss { classes }),
        proptest::option::of(2usize..20).prop_map(|classes| Layer::Precision { classes }),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "relu", "softmax", "net1"]).prop_map(|n| Term::Name(Ident::new(n))),
        leaf_layer().prop_map(|l| Term::Layer(l, Span::default())),
        (0u32..5).prop_map(|i| Term::Instance(Ident::new("blk"), i)),
    ];
    leaf.prop_recursive(2, 12, 3, |inner| {
        prop::collection::vec(prop::collection::vec(inner, 1..3).prop_map(|terms| Compose { terms }), 1..3)
            .prop_map(|branches| Term::Layer(Layer::Concat { branches }, Span::default()))
    })
}

fn compose() -> impl Strategy<Value = Compose> {
    prop::collection::vec(term(), 1..5).prop_map(|terms| Compose { terms })
}

fn body() -> impl Strategy<Value = DeclBody> {
    prop_oneof![
        leaf_layer().prop_map(DeclBody::Layer),
        param_init().prop_map(DeclBody::Init),
        prop::collection::vec(term(), 2..5).prop_map(|terms| DeclBody::Compose(Compose { terms })),
    ]
}

fn loss() -> impl Strategy<Value = LossExpr> {
    prop::collection::vec((prop_oneof![Just(1.0), Just(0.3), Just(-2.0), Just(0.5)], compose()), 1..4).prop_map(|ts| LossExpr {
        terms: ts.into_iter().map(|(coef, body)| LossTerm { coef, body, span: Span::default() }).collect(),
    })
}

fn program() -> impl Strategy<Value = NetworkProgram> {
    (
        prop::collection::vec(body(), 0..5),
        loss(),
        any::<bool>(),
        prop::collection::vec(term(), 2..5).prop_map(|terms| Compose { terms }),
        (1usize..600, 1usize..4, 2usize..12, proptest::option::of(1usize..1000), any::<u16>()),
        (0usize..5000, float(), 0u32..99),
    )
        .prop_map(|(bodies, loss, has_acc, sub, (batch, c, classes, samples, seed), (iters, decay, m))| {
            let mut decls: Vec<Decl> = bodies
                .into_iter()
                .enumerate()
                .map(|(i, body)| Decl { name: Ident::new(format!("d{i}")), body })
                .collect();
            decls.push(Decl { name: Ident::new("loss"), body: DeclBody::Loss(loss) });
            if has_acc {
                decls.push(Decl {
                    name: Ident::new("accuracy"),
                    body: DeclBody::Compose(Compose { terms: vec![Term::Name(Ident::new("precision")), Term::Name(Ident::new("a"))] }),
                });
            }
            NetworkProgram {
                data: DataBinding {
                    source: if seed % 2 == 0 { DataSource::Synthetic(seed as u64) } else { DataSource::MnistIdx("data/mnist".into()) },
                    batch,
                    shape: [c, 28, 28],
                    classes,
                    samples,
                    span: Span::default(),
                },
                solver: SolverConfig {
                    name: "lenet".into(),
                    train_iters: iters,
                    test_iters: 3,
                    lr: 0.01,
                    momentum: m as f64 / 100.0,
                    decay: decay.abs(),
                    clip: 0.0,
                    snapshot_every: 500,
                },
                decls,
                subnets: vec![Subnet {
                    name: Ident::new("blk"),
                    decls: vec![
                        Decl { name: Ident::new("c$"), body: DeclBody::Layer(Layer::Relu { rank: Some(2) }) },
                        Decl { name: Ident::new("out"), body: DeclBody::Compose(sub) },
                    ],
                }],
            }
        })
}

proptest! {
    #[test]
    fn print_parse_roundtrip(p in program()) {
        let text = print_netspec(&p);
        let back = parse_netspec(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &p, "{}", text);
        prop_assert_eq!(print_netspec(&back), text);
    }
}

#[test]
fn canonical_text_is_stable() {
    let src = "data { batch = 64 shape = (1,28,28) classes = 10 }\nnet {\n  cv1 = conv(5, 20)\n  loss = logloss . softmax . cv1\n}\n";
    let p = parse_netspec(src).unwrap();
    let text = print_netspec(&p);
    assert!(text.contains("cv1 = conv(k=5, out=20, stride=1, pad=0, w=xavier, b=const(0))"), "{text}");
    assert!(text.contains("loss = logloss . softmax . cv1"));
}

use proptest::prelude::*;
use tensorc::autodiff::grad_all;
use tensorc::expr::eval::{evaluate, Bindings};
use tensorc::expr::TId;
use tensorc::netspec::{elaborate, parse_netspec};
use tensorc::opt::{run_pass, Pass, RewriteTrace};

#[derive(Debug, Clone)]
struct Net {
    batch: usize,
    chans: usize,
    size: usize,
    k: usize,
    out: usize,
    pool: Option<bool>,
    relu: bool,
    dropout: bool,
    hidden: usize,
    classes: usize,
    weighted: bool,
}

fn nets() -> impl Strategy<Value = Net> {
    (
        (1usize..3, 1usize..3, 6usize..9, 1usize..4, 1usize..3),
        (prop::option::of(any::<bool>()), any::<bool>(), any::<bool>(), 2usize..5, 2usize..4, any::<bool>()),
    )
        .prop_map(|((batch, chans, size, k, out), (pool, relu, dropout, hidden, classes, weighted))| Net {
            batch,
            chans,
            size,
            k,
            out,
            pool,
            relu,
            dropout,
            hidden,
            classes,
            weighted,
        })
}

fn source(n: &Net) -> String {
    let mut feat = vec!["f".to_string(), "flatten(4, 1)".into()];
    if let Some(max) = n.pool {
        feat.push(if max { "maxpool(k=2)".into() } else { "avgpool(k=2, stride=1)".into() });
    }
    if n.relu {
        feat.push("relu".into());
    }
    feat.push("cv".into());
    let network = if n.dropout { "f2 . dropout(0.5) . h" } else { "f2 . h" };
    let loss = if n.weighted {
        "loss = logloss . softmax . network + 0.5 * logloss . softmax . f2 . relu . h"
    } else {
        "loss = logloss . softmax . network"
    };
    format!(
        "data {{ batch = {} shape = ({}, {}, {}) classes = {} }}\nnet {{\n  cv = conv(k={}, out={})\n  f = full({})\n  f2 = full({})\n  h = {}\n  network = {network}\n  {loss}\n}}\n",
        n.batch,
        n.chans,
        n.size,
        n.size,
        n.classes,
        n.k,
        n.out,
        n.hidden,
        n.classes,
        feat.join(" . ")
    )
}

fn close(g: &tensorc::expr::Graph, before: &[TId], after: &[TId], b: &Bindings<f64>) -> Result<(), String> {
    let vb = evaluate(g, before, b).map_err(|e| e.to_string())?;
    let va = evaluate(g, after, b).map_err(|e| e.to_string())?;
    for (x, y) in before.iter().zip(after) {
        let (p, q) = (&vb[x], &va[y]);
        if p.shape() != q.shape() {
            return Err(format!("shape {:?} vs {:?}", p.shape(), q.shape()));
        }
        for (u, v) in p.data().iter().zip(q.data()) {
            if (u - v).abs() > 1e-9 * u.abs().max(1.0) {
                return Err(format!("{u} vs {v}"));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn each_pass_preserves_values(n in nets()) {
        let mut e = elaborate(&parse_netspec(&source(&n)).unwrap()).unwrap();
        let grads = grad_all(&mut e.graph, e.loss, &e.params).unwrap();
        let mut roots = vec![e.loss];
        roots.extend(grads);
        let b: Bindings<f64> = Bindings::random(&e.graph, 5);
        for pass in Pass::ALL {
            let mut trace = RewriteTrace::default();
            let next = run_pass(&mut e.graph, &roots, pass, &mut trace).unwrap();
            if let Err(m) = close(&e.graph, &roots, &next, &b) {
                prop_assert!(false, "{} changed a value: {}", pass.name(), m);
            }
            prop_assert_eq!(trace.replay(&e.graph, &roots), next.clone());
            roots = next;
        }
    }
}

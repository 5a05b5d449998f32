//! Direct evaluation of an expression graph, node by node.

use super::graph::{Graph, InputKind, TId, TNode};
use super::lower::{lower, Lowered};
use std::collections::HashMap;
use tensorc_runtime::kernels::Arg;
use tensorc_runtime::{Element, Kernel, Result, Tensor};

/// Values bound to the leaves of a graph.
#[derive(Clone, Debug)]
pub struct Bindings<T: Element> {
    /// Indexed by parameter id.
    pub params: Vec<Tensor<T>>,
    pub images: Tensor<T>,
    /// One-hot rows.
    pub labels: Tensor<T>,
    pub seed: u64,
    pub iteration: u64,
    pub training: bool,
}

/// Values of every node reachable from `roots`.
pub fn evaluate<T: Element>(g: &Graph, roots: &[TId], b: &Bindings<T>) -> Result<HashMap<TId, Tensor<T>>> {
    let mut vals: HashMap<TId, Tensor<T>> = HashMap::new();
    for t in g.reachable(roots) {
        let v = match g.node(t) {
            TNode::Input(InputKind::Images) => b.images.clone(),
            TNode::Input(InputKind::Labels(_)) => b.labels.clone(),
            TNode::Param(p) => b.params[p.0 as usize].clone(),
            TNode::Flatten { arg, .. } | TNode::Reshape { arg, .. } => {
                let mut v = vals[arg].clone();
                v.reshape(g.shape(t))?;
                v
            }
            _ => match lower(g, t) {
                Lowered::Precision(labels, scores) => {
                    let (y, s) = (&vals[&labels], &vals[&scores]);
                    let cols = *s.shape().last().unwrap_or(&1);
                    Tensor::scalar(T::of(tensorc_runtime::kernels::misc::precision(s.data(), y.data(), cols)))
                }
                Lowered::Kernel(k, args) => {
                    let mut out = Tensor::zeros(g.shape(t));
                    if matches!(k, Kernel::DropoutMask { .. }) && !b.training {
                        out.data_mut().fill(T::one());
                    } else {
                        let a: Vec<Arg<'_, T>> = args.iter().map(|x| vals[x].arg()).collect();
                        k.run(&a, out.data_mut(), false, None, b.seed, b.iteration)?;
                    }
                    out
                }
                Lowered::Source => unreachable!("sources handled above"),
            },
        };
        vals.insert(t, v);
    }
    Ok(vals)
}

/// Value of a rank-0 root as `f64`.
pub fn scalar_value<T: Element>(g: &Graph, root: TId, b: &Bindings<T>) -> Result<f64> {
    Ok(evaluate(g, &[root], b)?[&root].item().as_f64())
}

impl<T: Element> Bindings<T> {
    /// Gaussian parameters and images with cyclic labels, for numeric checks.
    pub fn random(g: &Graph, seed: u64) -> Self {
        let params = g
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| tensorc_runtime::Init::Gaussian(0.5).build(&p.shape, seed, i as u64 + 1))
            .collect();
        let images = tensorc_runtime::Init::Gaussian(1.0).build(&g.images, seed, 1 << 20);
        let (n, k) = (g.images[0], g.classes);
        let mut labels = Tensor::zeros(&[n, k]);
        for r in 0..n {
            labels.data_mut()[r * k + (r * 3 + seed as usize) % k] = T::one();
        }
        Bindings {
            params,
            images,
            labels,
            seed,
            iteration: 0,
            training: true,
        }
    }
}

//! Parameter updates applied at the end of each training iteration.

use crate::error::{Result, RuntimeError};
use crate::tensor::{Element, Tensor};

/// `target = beta * target + alpha * src`
pub fn axpby<T: Element>(target: &mut Tensor<T>, src: &Tensor<T>, alpha: f64, beta: f64) -> Result<()> {
    if target.len() != src.len() {
        return Err(RuntimeError::shape(
            "update",
            format!("{:?} vs {:?}", target.shape(), src.shape()),
        ));
    }
    let (a, b) = (T::of(alpha), T::of(beta));
    let one = beta == 1.0;
    for (t, &s) in target.data_mut().iter_mut().zip(src.data()) {
        *t = if one { *t + a * s } else { b * *t + a * s };
    }
    Ok(())
}

/// L2 norm over every gradient buffer together.
pub fn global_norm<T: Element>(grads: &[&Tensor<T>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| {
            let v = v.as_f64();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their joint norm is at most `threshold`.
/// Returns the norm measured before scaling.
pub fn clip_global<T: Element>(grads: &mut [&mut Tensor<T>], threshold: f64) -> f64 {
    let norm = {
        let views: Vec<&Tensor<T>> = grads.iter().map(|g| &**g).collect();
        global_norm(&views)
    };
    if threshold > 0.0 && norm > threshold {
        let s = T::of(threshold / norm);
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v = *v * s;
            }
        }
    }
    norm
}

//! Concatenation, dropout, label indicators and precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Element;

/// Concatenates along axis 1. Each part is `(outer, parts[i], inner)` shaped
/// where `outer` is the batch extent and `inner` the product of the trailing
/// dims.
pub fn concat<T: Element>(parts: &[&[T]], channels: &[usize], outer: usize, inner: usize, out: &mut [T]) {
    let total: usize = channels.iter().sum();
    for n in 0..outer {
        let mut offset = 0;
        for (p, &c) in parts.iter().zip(channels) {
            let src = &p[n * c * inner..(n + 1) * c * inner];
            let dst = (n * total + offset) * inner;
            out[dst..dst + c * inner].copy_from_slice(src);
            offset += c;
        }
    }
}

/// Extracts channels `lo..hi` along axis 1; the concat gradient for one branch.
#[allow(clippy::too_many_arguments)]
pub fn slice_channels<T: Element>(
    x: &[T],
    total: usize,
    lo: usize,
    hi: usize,
    outer: usize,
    inner: usize,
    out: &mut [T],
    accumulate: bool,
) {
    let c = hi - lo;
    for n in 0..outer {
        let src = &x[(n * total + lo) * inner..(n * total + hi) * inner];
        let dst = &mut out[n * c * inner..(n + 1) * c * inner];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = if accumulate { *d + s } else { s };
        }
    }
}

/// Inverted-dropout mask: each element is `1/(1−rate)` with probability
/// `1−rate`, else 0. The stream is a pure function of (seed, site, iteration).
pub fn dropout_mask<T: Element>(rate: f64, seed: u64, site: u64, iteration: u64, out: &mut [T]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site);
    rng.set_word_pos(u128::from(iteration) << 40);
    let keep = T::of(1.0 / (1.0 - rate));
    for v in out {
        let u: f64 = rng.random();
        *v = if u >= rate { keep } else { T::zero() };
    }
}

/// One-hot `(labels.len(), classes)` matrix.
pub fn indicator<T: Element>(labels: &[u8], classes: usize, out: &mut [T]) {
    out.fill(T::zero());
    for (row, &l) in labels.iter().enumerate() {
        out[row * classes + l as usize] = T::one();
    }
}

fn argmax<T: Element>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax agrees between predictions and targets.
pub fn precision<T: Element>(pred: &[T], target: &[T], cols: usize) -> f64 {
    let rows = pred.len() / cols;
    if rows == 0 {
        return 0.0;
    }
    let hits = pred
        .chunks(cols)
        .zip(target.chunks(cols))
        .filter(|(p, t)| argmax(p) == argmax(t))
        .count();
    hits as f64 / rows as f64
}

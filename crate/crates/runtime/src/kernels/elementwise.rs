//! Elementwise maps, activations and softmax.

use crate::tensor::Element;

/// Smallest value fed to `log`; keeps the log-loss path finite.
pub const LOG_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryOp {
    Log,
    Recip,
    Exp,
    Neg,
    Scale(f64),
    Relu,
}

impl UnaryOp {
    #[inline]
    pub fn apply<T: Element>(self, v: T) -> T {
        match self {
            UnaryOp::Log => v.max(T::of(LOG_FLOOR)).ln(),
            UnaryOp::Recip => T::one() / v,
            UnaryOp::Exp => v.exp(),
            UnaryOp::Neg => -v,
            UnaryOp::Scale(c) => v * T::of(c),
            UnaryOp::Relu => v.max(T::zero()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    #[inline]
    pub fn apply<T: Element>(self, a: T, b: T) -> T {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }
}

pub fn map_inplace<T: Element>(op: UnaryOp, x: &mut [T]) {
    for v in x {
        *v = op.apply(*v);
    }
}

pub fn map<T: Element>(op: UnaryOp, x: &[T], out: &mut [T], accumulate: bool) {
    for (o, &v) in out.iter_mut().zip(x) {
        let r = op.apply(v);
        *o = if accumulate { *o + r } else { r };
    }
}

/// Elementwise binary op; a length-1 operand broadcasts.
pub fn binary<T: Element>(op: BinaryOp, a: &[T], b: &[T], out: &mut [T], accumulate: bool) {
    let n = out.len();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let x = if a.len() == 1 { a[0] } else { a[i] };
        let y = if b.len() == 1 { b[0] } else { b[i] };
        let r = op.apply(x, y);
        *o = if accumulate { *o + r } else { r };
    }
}

/// ReLU gradient from the forward output: `dx = dy · [y > 0]`.
pub fn relu_backward<T: Element>(dy: &[T], y: &[T], dx: &mut [T], accumulate: bool) {
    for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(y) {
        let r = if v > T::zero() { g } else { T::zero() };
        *d = if accumulate { *d + r } else { r };
    }
}

/// Row-wise softmax over the trailing axis of length `cols`, max-subtracted.
pub fn softmax<T: Element>(x: &[T], cols: usize, y: &mut [T]) {
    for (xr, yr) in x.chunks(cols).zip(y.chunks_mut(cols)) {
        let m = xr.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for (o, &v) in yr.iter_mut().zip(xr) {
            *o = (v - m).exp();
            s = s + *o;
        }
        for o in yr.iter_mut() {
            *o = *o / s;
        }
    }
}

/// Softmax gradient from its output: `dx = s ⊙ (dy − Σ dy⊙s)` per row.
pub fn softmax_backward<T: Element>(dy: &[T], s: &[T], cols: usize, dx: &mut [T], accumulate: bool) {
    for ((gr, sr), dr) in dy.chunks(cols).zip(s.chunks(cols)).zip(dx.chunks_mut(cols)) {
        let inner: T = gr.iter().zip(sr).map(|(&g, &v)| g * v).sum();
        for ((d, &g), &v) in dr.iter_mut().zip(gr).zip(sr) {
            let r = v * (g - inner);
            *d = if accumulate { *d + r } else { r };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_softmax_row() {
        let x = vec![0.0f32; 10];
        let mut y = vec![0.0; 10];
        softmax(&x, 10, &mut y);
        for v in y {
            assert!((v - 0.1).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_is_stable_for_large_inputs() {
        let x = vec![1000.0f32, 1000.0, -1000.0];
        let mut y = vec![0.0; 3];
        softmax(&x, 3, &mut y);
        assert!((y[0] - 0.5).abs() < 1e-6 && y[2] >= 0.0);
    }

    #[test]
    fn log_is_floored() {
        assert!(UnaryOp::Log.apply(0.0f64).is_finite());
    }
}

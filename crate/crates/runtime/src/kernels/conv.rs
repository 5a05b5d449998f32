//! 2-D convolution over NCHW tensors with OIHW filters.
//!
//! Every entry point takes an optional workspace slice. When present and
//! large enough (`ConvGeom::workspace_elems`) the im2col + GEMM path runs;
//! otherwise direct loops compute the same result.

use super::linalg::gemm;
use crate::error::{Result, RuntimeError};
use crate::tensor::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub hout: usize,
    pub wout: usize,
}

/// `floor((in + 2·pad − k) / stride) + 1`, or `None` when that is below 1.
pub fn out_extent(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

impl ConvGeom {
    pub fn new(x: &[usize], w: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let bad = |d: String| Err(RuntimeError::shape("convolution", d));
        if x.len() != 4 || w.len() != 4 {
            return bad(format!("input {x:?} filter {w:?} must be rank 4"));
        }
        if x[1] != w[1] || w[2] != w[3] {
            return bad(format!("input {x:?} incompatible with filter {w:?}"));
        }
        let k = w[2];
        let (Some(hout), Some(wout)) = (out_extent(x[2], k, stride, pad), out_extent(x[3], k, stride, pad))
        else {
            return bad(format!("non-positive output extent for {x:?} with k={k}"));
        };
        Ok(ConvGeom {
            n: x[0],
            cin: x[1],
            h: x[2],
            w: x[3],
            cout: w[0],
            k,
            stride,
            pad,
            hout,
            wout,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.cout, self.hout, self.wout]
    }

    fn ckk(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn hw_out(&self) -> usize {
        self.hout * self.wout
    }

    /// Elements of the batch-wide im2col buffer.
    pub fn workspace_elems(&self) -> usize {
        self.n * self.ckk() * self.hw_out()
    }

    /// Input coordinate for output position `o` and kernel offset `kk`.
    #[inline]
    fn src(&self, o: usize, kk: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + kk) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

fn im2col<T: Element>(g: &ConvGeom, x: &[T], col: &mut [T]) {
    let hw = g.hw_out();
    for c in 0..g.cin {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut col[row * hw..(row + 1) * hw];
                for oh in 0..g.hout {
                    let ih = g.src(oh, ki, g.h);
                    for ow in 0..g.wout {
                        dst[oh * g.wout + ow] = match (ih, g.src(ow, kj, g.w)) {
                            (Some(ih), Some(iw)) => x[(c * g.h + ih) * g.w + iw],
                            _ => T::zero(),
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Element>(g: &ConvGeom, col: &[T], dx: &mut [T]) {
    let hw = g.hw_out();
    for c in 0..g.cin {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &col[row * hw..(row + 1) * hw];
                for oh in 0..g.hout {
                    let Some(ih) = g.src(oh, ki, g.h) else { continue };
                    for ow in 0..g.wout {
                        if let Some(iw) = g.src(ow, kj, g.w) {
                            let d = &mut dx[(c * g.h + ih) * g.w + iw];
                            *d = *d + src[oh * g.wout + ow];
                        }
                    }
                }
            }
        }
    }
}

fn zero_unless<T: Element>(out: &mut [T], accumulate: bool) {
    if !accumulate {
        out.fill(T::zero());
    }
}

/// `y = conv(x, w) + b`.
pub fn forward<T: Element>(
    g: &ConvGeom,
    x: &[T],
    w: &[T],
    b: &[T],
    y: &mut [T],
    workspace: Option<&mut [T]>,
) {
    let (hw, ckk) = (g.hw_out(), g.ckk());
    let in_img = g.cin * g.h * g.w;
    let out_img = g.cout * hw;
    match workspace {
        Some(ws) if ws.len() >= g.workspace_elems() => {
            for n in 0..g.n {
                im2col(g, &x[n * in_img..(n + 1) * in_img], &mut ws[n * ckk * hw..(n + 1) * ckk * hw]);
            }
            for n in 0..g.n {
                let col = &ws[n * ckk * hw..(n + 1) * ckk * hw];
                let yn = &mut y[n * out_img..(n + 1) * out_img];
                gemm(false, false, g.cout, hw, ckk, w, col, yn, false);
            }
        }
        _ => direct_forward(g, x, w, y),
    }
    for n in 0..g.n {
        for co in 0..g.cout {
            let base = (n * g.cout + co) * hw;
            for v in &mut y[base..base + hw] {
                *v = *v + b[co];
            }
        }
    }
}

fn direct_forward<T: Element>(g: &ConvGeom, x: &[T], w: &[T], y: &mut [T]) {
    for n in 0..g.n {
        for co in 0..g.cout {
            for oh in 0..g.hout {
                for ow in 0..g.wout {
                    let mut acc = T::zero();
                    for ci in 0..g.cin {
                        for ki in 0..g.k {
                            let Some(ih) = g.src(oh, ki, g.h) else { continue };
                            for kj in 0..g.k {
                                let Some(iw) = g.src(ow, kj, g.w) else { continue };
                                acc = acc
                                    + x[((n * g.cin + ci) * g.h + ih) * g.w + iw]
                                        * w[((co * g.cin + ci) * g.k + ki) * g.k + kj];
                            }
                        }
                    }
                    y[((n * g.cout + co) * g.hout + oh) * g.wout + ow] = acc;
                }
            }
        }
    }
}

/// Gradient with respect to the input; needs only the filter.
pub fn backward_data<T: Element>(
    g: &ConvGeom,
    dy: &[T],
    w: &[T],
    dx: &mut [T],
    accumulate: bool,
    workspace: Option<&mut [T]>,
) {
    zero_unless(dx, accumulate);
    let (hw, ckk) = (g.hw_out(), g.ckk());
    let in_img = g.cin * g.h * g.w;
    let out_img = g.cout * hw;
    match workspace {
        Some(ws) if ws.len() >= g.workspace_elems() => {
            let dcol = &mut ws[..ckk * hw];
            for n in 0..g.n {
                gemm(true, false, ckk, hw, g.cout, w, &dy[n * out_img..(n + 1) * out_img], dcol, false);
                col2im(g, dcol, &mut dx[n * in_img..(n + 1) * in_img]);
            }
        }
        _ => {
            for n in 0..g.n {
                for co in 0..g.cout {
                    for oh in 0..g.hout {
                        for ow in 0..g.wout {
                            let d = dy[((n * g.cout + co) * g.hout + oh) * g.wout + ow];
                            for ci in 0..g.cin {
                                for ki in 0..g.k {
                                    let Some(ih) = g.src(oh, ki, g.h) else { continue };
                                    for kj in 0..g.k {
                                        let Some(iw) = g.src(ow, kj, g.w) else { continue };
                                        let t = &mut dx[((n * g.cin + ci) * g.h + ih) * g.w + iw];
                                        *t = *t + d * w[((co * g.cin + ci) * g.k + ki) * g.k + kj];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient with respect to the filter; needs only the input.
pub fn backward_filter<T: Element>(
    g: &ConvGeom,
    dy: &[T],
    x: &[T],
    dw: &mut [T],
    accumulate: bool,
    workspace: Option<&mut [T]>,
) {
    zero_unless(dw, accumulate);
    let (hw, ckk) = (g.hw_out(), g.ckk());
    let in_img = g.cin * g.h * g.w;
    let out_img = g.cout * hw;
    match workspace {
        Some(ws) if ws.len() >= g.workspace_elems() => {
            let col = &mut ws[..ckk * hw];
            for n in 0..g.n {
                im2col(g, &x[n * in_img..(n + 1) * in_img], col);
                gemm(false, true, g.cout, ckk, hw, &dy[n * out_img..(n + 1) * out_img], col, dw, true);
            }
        }
        _ => {
            for n in 0..g.n {
                for co in 0..g.cout {
                    for ci in 0..g.cin {
                        for ki in 0..g.k {
                            for kj in 0..g.k {
                                let mut acc = T::zero();
                                for oh in 0..g.hout {
                                    let Some(ih) = g.src(oh, ki, g.h) else { continue };
                                    for ow in 0..g.wout {
                                        let Some(iw) = g.src(ow, kj, g.w) else { continue };
                                        acc = acc
                                            + dy[((n * g.cout + co) * g.hout + oh) * g.wout + ow]
                                                * x[((n * g.cin + ci) * g.h + ih) * g.w + iw];
                                    }
                                }
                                let t = &mut dw[((co * g.cin + ci) * g.k + ki) * g.k + kj];
                                *t = *t + acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient with respect to the bias; needs no saved operand.
pub fn backward_bias<T: Element>(g: &ConvGeom, dy: &[T], db: &mut [T], accumulate: bool) {
    zero_unless(db, accumulate);
    let hw = g.hw_out();
    for n in 0..g.n {
        for (co, d) in db.iter_mut().enumerate() {
            let base = (n * g.cout + co) * hw;
            *d = *d + dy[base..base + hw].iter().copied().sum::<T>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_3x3_with_2x2_ones_filter() {
        let g = ConvGeom::new(&[1, 1, 3, 3], &[1, 1, 2, 2], 1, 0).unwrap();
        let x = vec![1.0f32; 9];
        let w = vec![1.0f32; 4];
        let mut y = vec![0.0; 4];
        forward(&g, &x, &w, &[0.0], &mut y, None);
        assert_eq!(y, vec![4.0; 4]);
        let mut ws = vec![0.0; g.workspace_elems()];
        forward(&g, &x, &w, &[0.0], &mut y, Some(&mut ws));
        assert_eq!(y, vec![4.0; 4]);
    }

    #[test]
    fn lenet_shapes() {
        let g = ConvGeom::new(&[500, 1, 28, 28], &[20, 1, 5, 5], 1, 0).unwrap();
        assert_eq!(g.out_shape(), [500, 20, 24, 24]);
        assert_eq!(g.workspace_elems(), 7_200_000);
        let g2 = ConvGeom::new(&[500, 20, 12, 12], &[50, 20, 5, 5], 1, 0).unwrap();
        assert_eq!(g2.out_shape(), [500, 50, 8, 8]);
        assert_eq!(g2.workspace_elems(), 16_000_000);
    }

    #[test]
    fn nonpositive_extent_is_an_error() {
        assert!(ConvGeom::new(&[1, 1, 3, 3], &[1, 1, 5, 5], 1, 0).is_err());
        assert_eq!(out_extent(28, 3, 1, 1), Some(28));
    }
}

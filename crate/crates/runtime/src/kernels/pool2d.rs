//! Max and average pooling over NCHW tensors.

use super::conv::out_extent;
use crate::error::{Result, RuntimeError};
use crate::tensor::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub hout: usize,
    pub wout: usize,
    pub max: bool,
}

impl PoolGeom {
    pub fn new(x: &[usize], k: usize, stride: usize, pad: usize, max: bool) -> Result<Self> {
        if x.len() != 4 {
            return Err(RuntimeError::shape("pooling", format!("input {x:?} must be rank 4")));
        }
        let (Some(hout), Some(wout)) = (out_extent(x[2], k, stride, pad), out_extent(x[3], k, stride, pad))
        else {
            return Err(RuntimeError::shape("pooling", format!("non-positive output for {x:?}, k={k}")));
        };
        Ok(PoolGeom {
            n: x[0],
            c: x[1],
            h: x[2],
            w: x[3],
            k,
            stride,
            pad,
            hout,
            wout,
            max,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.c, self.hout, self.wout]
    }

    /// In-bounds input offsets (within one plane) covered by window (oh, ow),
    /// in row-major window order.
    fn window(&self, oh: usize, ow: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).flat_map(move |ki| {
            (0..self.k).filter_map(move |kj| {
                let ih = (oh * self.stride + ki) as isize - self.pad as isize;
                let iw = (ow * self.stride + kj) as isize - self.pad as isize;
                (ih >= 0 && iw >= 0 && (ih as usize) < self.h && (iw as usize) < self.w)
                    .then(|| ih as usize * self.w + iw as usize)
            })
        })
    }
}

pub fn forward<T: Element>(g: &PoolGeom, x: &[T], y: &mut [T]) {
    let plane_in = g.h * g.w;
    let plane_out = g.hout * g.wout;
    let area = T::of((g.k * g.k) as f64);
    for p in 0..g.n * g.c {
        let xp = &x[p * plane_in..(p + 1) * plane_in];
        for oh in 0..g.hout {
            for ow in 0..g.wout {
                let v = if g.max {
                    g.window(oh, ow).map(|i| xp[i]).fold(T::neg_infinity(), T::max)
                } else {
                    g.window(oh, ow).map(|i| xp[i]).sum::<T>() / area
                };
                y[p * plane_out + oh * g.wout + ow] = v;
            }
        }
    }
}

/// Routes `dy` back to the input. Max pooling sends each upstream element to
/// the first window position whose input equals the saved output.
pub fn backward<T: Element>(g: &PoolGeom, dy: &[T], y: &[T], x: &[T], dx: &mut [T], accumulate: bool) {
    if !accumulate {
        dx.fill(T::zero());
    }
    let plane_in = g.h * g.w;
    let plane_out = g.hout * g.wout;
    let area = T::of((g.k * g.k) as f64);
    for p in 0..g.n * g.c {
        let xp = &x[p * plane_in..(p + 1) * plane_in];
        let dxp = &mut dx[p * plane_in..(p + 1) * plane_in];
        for oh in 0..g.hout {
            for ow in 0..g.wout {
                let o = p * plane_out + oh * g.wout + ow;
                if g.max {
                    if let Some(i) = g.window(oh, ow).find(|&i| xp[i] == y[o]) {
                        dxp[i] = dxp[i] + dy[o];
                    }
                } else {
                    let share = dy[o] / area;
                    for i in g.window(oh, ow) {
                        dxp[i] = dxp[i] + share;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenet_pool_shapes() {
        assert_eq!(PoolGeom::new(&[500, 20, 24, 24], 2, 2, 0, true).unwrap().out_shape(), [500, 20, 12, 12]);
        assert_eq!(PoolGeom::new(&[500, 50, 8, 8], 2, 2, 0, true).unwrap().out_shape(), [500, 50, 4, 4]);
        assert_eq!(PoolGeom::new(&[1, 3, 28, 28], 3, 1, 1, true).unwrap().out_shape(), [1, 3, 28, 28]);
    }

    /// Brute-force window enumeration on a 1×1×4×4 input.
    #[test]
    fn max_backward_routes_to_window_argmax() {
        let x: Vec<f64> = vec![
            1.0, 5.0, 2.0, 0.0, //
            3.0, 4.0, 7.0, 7.0, //
            0.0, 9.0, 1.0, 1.0, //
            8.0, 2.0, 1.0, 1.0,
        ];
        let g = PoolGeom::new(&[1, 1, 4, 4], 2, 2, 0, true).unwrap();
        let mut y = vec![0.0; 4];
        forward(&g, &x, &mut y);
        assert_eq!(y, vec![5.0, 7.0, 9.0, 1.0]);
        let dy = vec![10.0, 20.0, 30.0, 40.0];
        let mut dx = vec![0.0; 16];
        backward(&g, &dy, &y, &x, &mut dx, false);

        let mut want = vec![0.0; 16];
        for (o, &d) in dy.iter().enumerate() {
            let (oh, ow) = (o / 2, o % 2);
            let mut best = None::<(usize, f64)>;
            for ki in 0..2 {
                for kj in 0..2 {
                    let i = (oh * 2 + ki) * 4 + ow * 2 + kj;
                    if best.is_none_or(|(_, v)| x[i] > v) {
                        best = Some((i, x[i]));
                    }
                }
            }
            want[best.unwrap().0] += d;
        }
        assert_eq!(dx, want);
        // Tie in the second window (7, 7): the first one wins.
        assert_eq!(dx[6], 20.0);
        assert_eq!(dx[7], 0.0);
    }
}

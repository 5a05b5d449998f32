//! Parameter initializers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::tensor::{Element, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Xavier,
    Const(f64),
    Gaussian(f64),
}

/// (fan_in, fan_out) for filters `(out, in, k, k)`, matrices `(out, in)`
/// and vectors.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [o, i, rest @ ..] => {
            let field: usize = rest.iter().product();
            (i * field, o * field)
        }
        [n] => (*n, *n),
        _ => (1, 1),
    }
}

impl Init {
    /// Deterministic initial value; `stream` separates parameters that
    /// share a seed.
    pub fn build<T: Element>(&self, shape: &[usize], seed: u64, stream: u64) -> Tensor<T> {
        let mut t = Tensor::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        match *self {
            Init::Const(v) => t.data_mut().fill(T::of(v)),
            Init::Xavier => {
                let (fi, fo) = fans(shape);
                let a = (6.0 / (fi + fo) as f64).sqrt();
                let d = Uniform::new_inclusive(-a, a).expect("finite bound");
                for v in t.data_mut() {
                    *v = T::of(d.sample(&mut rng));
                }
            }
            Init::Gaussian(sigma) => {
                let d = Normal::new(0.0, sigma.abs()).expect("finite sigma");
                for v in t.data_mut() {
                    *v = T::of(d.sample(&mut rng));
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fans_by_rank() {
        assert_eq!(fans(&[20, 1, 5, 5]), (25, 500));
        assert_eq!(fans(&[500, 800]), (800, 500));
        assert_eq!(fans(&[10]), (10, 10));
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let a: Tensor<f32> = Init::Xavier.build(&[500, 800], 42, 3);
        let b: Tensor<f32> = Init::Xavier.build(&[500, 800], 42, 3);
        assert_eq!(a.data(), b.data());
        let bound = (6.0f32 / 1300.0).sqrt();
        assert!(a.data().iter().all(|v| v.abs() <= bound + 1e-7));
        let c: Tensor<f32> = Init::Xavier.build(&[500, 800], 42, 4);
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn const_fill() {
        let t: Tensor<f64> = Init::Const(0.5).build(&[3], 1, 0);
        assert_eq!(t.data(), &[0.5, 0.5, 0.5]);
    }
}

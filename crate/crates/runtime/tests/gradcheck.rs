//! Every backward kernel against central finite differences of its forward
//! kernel, in f64.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensorc_runtime::kernels::{Arg, Kernel};
use tensorc_runtime::Tensor;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn arg<'a>(data: &'a [f64], shape: &'a [usize]) -> Arg<'a, f64> {
    Arg { data, shape }
}

fn eval(k: &Kernel, ins: &[(&[f64], &[usize])], ws: bool) -> Vec<f64> {
    let args: Vec<_> = ins.iter().map(|(d, s)| arg(d, s)).collect();
    let shapes: Vec<&[usize]> = ins.iter().map(|(_, s)| *s).collect();
    let out_shape = k.out_shape(&shapes).unwrap();
    let mut out = vec![0.0; out_shape.iter().product()];
    let mut buf = vec![0.0; if ws { k.workspace_elems(&shapes).unwrap_or(0) } else { 0 }];
    let ws = if ws && !buf.is_empty() { Some(buf.as_mut_slice()) } else { None };
    k.run(&args, &mut out, false, ws, 0, 0).unwrap();
    out
}

/// d<dy, f(inputs)>/d inputs[which] by central differences.
fn numeric(k: &Kernel, inputs: &[(Vec<f64>, Vec<usize>)], which: usize, dy: &[f64]) -> Vec<f64> {
    let mut work: Vec<(Vec<f64>, Vec<usize>)> = inputs.to_vec();
    let n = work[which].0.len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let orig = work[which].0[i];
        let val = |w: &Vec<(Vec<f64>, Vec<usize>)>| {
            let ins: Vec<(&[f64], &[usize])> = w.iter().map(|(d, s)| (d.as_slice(), s.as_slice())).collect();
            eval(k, &ins, false).iter().zip(dy).map(|(a, b)| a * b).sum::<f64>()
        };
        work[which].0[i] = orig + H;
        let up = val(&work);
        work[which].0[i] = orig - H;
        let down = val(&work);
        work[which].0[i] = orig;
        grad[i] = (up - down) / (2.0 * H);
    }
    grad
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn randv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Distinct values spaced well apart, so max and ReLU stay off their kinks.
fn spaced(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 + 0.25) / n as f64 * 2.0 - 1.0).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
    v
}

fn backward(k: &Kernel, ins: &[(&[f64], &[usize])], ws: bool) -> Vec<f64> {
    eval(k, ins, ws)
}

fn conv_case() -> impl Strategy<Value = (usize, usize, usize, usize, usize, usize, usize, usize, u64)> {
    (1usize..=3, 1usize..=3, 1usize..=4, 1usize..=4, 1usize..=3, 1usize..=2, 0usize..=1, any::<u64>())
        .prop_flat_map(|(n, cin, cout, h, k, stride, pad, seed)| {
            let lo = k.saturating_sub(2 * pad).max(1);
            (Just(n), Just(cin), Just(cout), lo.max(h)..=4, Just(k), Just(stride), Just(pad), lo..=4, Just(seed))
        })
        .prop_map(|(n, cin, cout, h, k, s, p, w, seed)| (n, cin, cout, h, w, k, s, p, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_backward_matches_fd((n, cin, cout, h, w, k, stride, pad, seed) in conv_case(), ws in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = vec![n, cin, h, w];
        let wsh = vec![cout, cin, k, k];
        let x = randv(&mut rng, xs.iter().product());
        let f = randv(&mut rng, wsh.iter().product());
        let b = randv(&mut rng, cout);
        let fwd = Kernel::Conv { stride, pad };
        let ins = vec![(x.clone(), xs.clone()), (f.clone(), wsh.clone()), (b.clone(), vec![cout])];
        let yshape = fwd.out_shape(&[&xs, &wsh, &[cout]]).unwrap();
        let dy = randv(&mut rng, yshape.iter().product());

        let dx = backward(&Kernel::ConvBackwardData { stride, pad, input: [n, cin, h, w] }, &[(&dy, &yshape), (&f, &wsh)], ws);
        prop_assert!(rel_err(&dx, &numeric(&fwd, &ins, 0, &dy)) <= TOL);
        let dw = backward(&Kernel::ConvBackwardFilter { stride, pad, k }, &[(&dy, &yshape), (&x, &xs)], ws);
        prop_assert!(rel_err(&dw, &numeric(&fwd, &ins, 1, &dy)) <= TOL);
        let db = backward(&Kernel::ConvBackwardBias, &[(&dy, &yshape)], ws);
        prop_assert!(rel_err(&db, &numeric(&fwd, &ins, 2, &dy)) <= TOL);
    }

    #[test]
    fn conv_im2col_equals_direct((n, cin, cout, h, w, k, stride, pad, seed) in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = vec![n, cin, h, w];
        let wsh = vec![cout, cin, k, k];
        let x: Vec<f32> = (0..xs.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Vec<f32> = (0..wsh.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kern = Kernel::Conv { stride, pad };
        let bs = [cout];
        let args = [Arg { data: &x[..], shape: &xs[..] }, Arg { data: &f[..], shape: &wsh[..] }, Arg { data: &b[..], shape: &bs[..] }];
        let shapes: Vec<&[usize]> = vec![&xs, &wsh, &bs];
        let len: usize = kern.out_shape(&shapes).unwrap().iter().product();
        let mut direct = vec![0.0f32; len];
        kern.run(&args, &mut direct, false, None, 0, 0).unwrap();
        let mut buf = vec![0.0f32; kern.workspace_elems(&shapes).unwrap()];
        let mut fast = vec![0.0f32; len];
        kern.run(&args, &mut fast, false, Some(&mut buf), 0, 0).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn pool_backward_matches_fd(
        n in 1usize..=2, c in 1usize..=3, h in 2usize..=4, w in 2usize..=4,
        k in 1usize..=2, stride in 1usize..=2, pad in 0usize..=1, max in any::<bool>(), seed in any::<u64>()
    ) {
        prop_assume!(pad < k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = vec![n, c, h, w];
        let x = spaced(&mut rng, xs.iter().product());
        let fwd = Kernel::Pool { k, stride, pad, max };
        let ys = fwd.out_shape(&[&xs]).unwrap();
        let y = eval(&fwd, &[(&x, &xs)], false);
        let dy = randv(&mut rng, ys.iter().product());
        let dx = backward(&Kernel::PoolBackward { k, stride, pad, max }, &[(&dy, &ys), (&y, &ys), (&x, &xs)], false);
        prop_assert!(rel_err(&dx, &numeric(&fwd, &[(x, xs.clone())], 0, &dy)) <= TOL);
    }

    #[test]
    fn relu_backward_matches_fd(len in 1usize..=64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = vec![len];
        let x = spaced(&mut rng, len);
        let y = eval(&Kernel::Relu, &[(&x, &s)], false);
        let dy = randv(&mut rng, len);
        let dx = backward(&Kernel::ReluBackward, &[(&dy, &s), (&y, &s)], false);
        prop_assert!(rel_err(&dx, &numeric(&Kernel::Relu, &[(x, s.clone())], 0, &dy)) <= TOL);
    }

    #[test]
    fn softmax_backward_matches_fd(rows in 1usize..=4, cols in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = vec![rows, cols];
        let x = randv(&mut rng, rows * cols);
        let y = eval(&Kernel::Softmax, &[(&x, &s)], false);
        let dy = randv(&mut rng, rows * cols);
        let dx = backward(&Kernel::SoftmaxBackward, &[(&dy, &s), (&y, &s)], false);
        prop_assert!(rel_err(&dx, &numeric(&Kernel::Softmax, &[(x, s.clone())], 0, &dy)) <= TOL);
    }

    #[test]
    fn concat_backward_matches_fd(n in 1usize..=3, c1 in 1usize..=4, c2 in 1usize..=4, hw in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s1, s2) = (vec![n, c1, hw], vec![n, c2, hw]);
        let a = randv(&mut rng, n * c1 * hw);
        let b = randv(&mut rng, n * c2 * hw);
        let ys = vec![n, c1 + c2, hw];
        let dy = randv(&mut rng, n * (c1 + c2) * hw);
        let ins = vec![(a, s1), (b, s2)];
        let da = backward(&Kernel::ConcatBackward { lo: 0, hi: c1 }, &[(&dy, &ys)], false);
        let db = backward(&Kernel::ConcatBackward { lo: c1, hi: c1 + c2 }, &[(&dy, &ys)], false);
        prop_assert!(rel_err(&da, &numeric(&Kernel::Concat, &ins, 0, &dy)) <= TOL);
        prop_assert!(rel_err(&db, &numeric(&Kernel::Concat, &ins, 1, &dy)) <= TOL);
    }

    #[test]
    fn bias_add_backward_is_col_sum(rows in 1usize..=4, cols in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xs, bs) = (vec![rows, cols], vec![cols]);
        let x = randv(&mut rng, rows * cols);
        let b = randv(&mut rng, cols);
        let dy = randv(&mut rng, rows * cols);
        let db = backward(&Kernel::ColSum, &[(&dy, &xs)], false);
        prop_assert!(rel_err(&db, &numeric(&Kernel::BiasAdd, &[(x, xs.clone()), (b, bs)], 1, &dy)) <= TOL);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..=8, cols in 1usize..=16, scale in 0.1f64..100.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = vec![rows, cols];
        let x: Vec<f64> = randv(&mut rng, rows * cols).iter().map(|v| v * scale).collect();
        let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let mut y = vec![0.0f32; rows * cols];
        Kernel::Softmax.run(&[Arg { data: &xf[..], shape: &s[..] }], &mut y, false, None, 0, 0).unwrap();
        for row in y.chunks(cols) {
            let sum: f64 = row.iter().map(|&v| v as f64).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}

#[test]
fn update_example() {
    let mut p = Tensor::<f32>::from_vec(&[2], vec![1.0, 2.0]).unwrap();
    let g = Tensor::<f32>::from_vec(&[2], vec![10.0, 10.0]).unwrap();
    tensorc_runtime::solver::axpby(&mut p, &g, -0.01, 1.0).unwrap();
    assert!((p.data()[0] - 0.9).abs() < 1e-6);
    assert!((p.data()[1] - 1.9).abs() < 1e-6);
}

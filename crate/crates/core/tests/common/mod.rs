//! Helpers shared by the integration tests.

use tensorc::autodiff::grad_all;
use tensorc::expr::eval::{evaluate, scalar_value, Bindings};
use tensorc::netspec::{elaborate, parse_netspec};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-6;

/// Norm-wise relative error between symbolic and central-difference gradients.
pub fn fd_check(src: &str) -> Result<(), String> {
    let prog = parse_netspec(src).unwrap();
    let mut e = elaborate(&prog).unwrap();
    let grads = grad_all(&mut e.graph, e.loss, &e.params).unwrap();
    let b: Bindings<f64> = Bindings::random(&e.graph, 11);
    let vals = evaluate(&e.graph, &grads, &b).unwrap();
    for (k, &p) in e.params.iter().enumerate() {
        let sym = vals[&grads[k]].data().to_vec();
        let n = sym.len();
        let mut fd = vec![0.0; n];
        for i in 0..n {
            let mut bp = b.clone();
            bp.params[p.0 as usize].data_mut()[i] += H;
            let up = scalar_value(&e.graph, e.loss, &bp).unwrap();
            bp.params[p.0 as usize].data_mut()[i] -= 2.0 * H;
            let down = scalar_value(&e.graph, e.loss, &bp).unwrap();
            fd[i] = (up - down) / (2.0 * H);
        }
        let diff: f64 = sym.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = sym.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = if scale == 0.0 { diff } else { diff / scale };
        let name = &e.graph.param_info(p).name;
        if scale <= 1e-8 {
            return Err(format!("{name}: vanishing gradient"));
        }
        if rel > TOL {
            return Err(format!("{name}: relative error {rel:e}\nsym {sym:?}\nfd  {fd:?}"));
        }
    }
    Ok(())
}


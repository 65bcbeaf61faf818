//! Backpropagation against central finite differences on a random net.
//!
//!     cargo run --release --example gradient_check

use coopinit::{rng, Activation, Matrix, Mlp, MlpConfig};
use rand_distr::{Distribution, StandardNormal};

fn main() -> coopinit::Result<()> {
    let mut r = rng::stream(0, 0);
    let net = Mlp::new(MlpConfig::new(3, vec![8, 8], 1, Activation::Tanh, 7))?;
    let x = Matrix::from_fn(5, 3, |_, _| StandardNormal.sample(&mut r));
    let ones = Matrix::from_vec(5, 1, vec![1.0; 5])?;
    let analytic = net.param_grad(&x, &ones)?;

    let h = 1e-5;
    let f = |p: &[f64]| -> f64 {
        let n = Mlp::from_params(net.config().clone(), p.to_vec()).expect("same shape");
        n.forward(&x).expect("valid batch").as_slice().iter().sum()
    };
    let mut p = net.params().to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let v = p[k];
        p[k] = v + h;
        let up = f(&p);
        p[k] = v - h;
        let down = f(&p);
        p[k] = v;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-12));
    }
    println!("{} parameters, worst relative error {worst:.2e}", p.len());

    let gx = net.input_grad(&x)?;
    println!("input gradient of the first sample: {:?}", gx.row(0));
    Ok(())
}

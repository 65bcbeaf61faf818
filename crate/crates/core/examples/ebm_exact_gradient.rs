//! Monte-Carlo likelihood gradient against exact enumeration in 1D.
//!
//!     cargo run --release --example ebm_exact_gradient -- [samples]
//!
//! The descriptor's normalizer is computed on a grid, so the exact gradient
//! `E_data[∇D] − E_model[∇D]` is available and can be compared with the
//! sample estimate at growing batch sizes.

use coopinit::ebm::{exact_loglik_grad_oracle, GibbsGrid, GridSpec};
use coopinit::{rng, Activation, DatasetSpec, Descriptor, Mlp, MlpConfig};

fn main() -> coopinit::Result<()> {
    let max: usize = std::env::args().nth(1).map_or(100_000, |s| s.parse().expect("samples"));
    let spec = DatasetSpec::line_1d(3, 2.0, 0.5);
    let cfg = MlpConfig::new(1, vec![8], 1, Activation::Tanh, 1).with_quadratic_confinement(1.0);
    let d = Descriptor::new(Mlp::new(cfg)?)?;
    let grid = GridSpec::new(-8.0, 8.0, 1024);
    let exact = exact_loglik_grad_oracle(&d, &spec, grid)?;
    let gibbs = GibbsGrid::new(&d, grid)?;

    let mut r = rng::stream(0, 0);
    let mut n = 100;
    while n <= max {
        let real = spec.sample_batch(n, &mut r)?;
        let synth = gibbs.sample(n, &mut r);
        let est = d.mle_gradient(&real, &synth)?;
        let err = est
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        println!("n = {n:>7}: |estimate - exact| = {err:.5}");
        n *= 10;
    }
    Ok(())
}

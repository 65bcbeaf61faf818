//! Cooperative generator updates against a frozen quadratic descriptor.
//!
//!     cargo run --release --example chase -- [iterations] [eta] [steps]
//!
//! The descriptor's Gibbs law is N(1.5, 0.5). Teaching regresses G(z) onto
//! its Langevin-revised samples; the printout tracks how the generator's
//! mean and variance move.

use coopinit::langevin::{self, LangevinConfig};
use coopinit::trainer::ModelConfig;
use coopinit::{rng, Activation, AdamParams, AdamState, Descriptor, Generator, Mlp, MlpConfig};

fn main() -> coopinit::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(2000, |s| s.parse().expect("iterations"));
    let eta: f64 = args.next().map_or(0.1, |s| s.parse().expect("eta"));
    let steps: usize = args.next().map_or(10, |s| s.parse().expect("steps"));

    let cfg = MlpConfig::new(1, vec![], 1, Activation::Tanh, 0).with_quadratic_confinement(2.0);
    let d = Descriptor::new(Mlp::from_params(cfg, vec![3.0, 0.0])?)?;
    let mut g = Generator::new(Mlp::new(ModelConfig::toy(1, 0).generator)?);
    let mut adam = AdamState::new(g.net.param_count(), AdamParams::default());
    let lcfg = LangevinConfig {
        eta,
        steps,
        ..LangevinConfig::default()
    };
    let mut r = rng::stream(0, 1);
    for it in 1..=iterations {
        let z = g.sample_latents(256, &mut r)?;
        let revised = langevin::run_chain_with_rng(&d, &g.generate(&z)?, &lcfg, false, &mut r)?.samples;
        let (loss, grad) = g.teaching_loss_grad(&z, &revised)?;
        adam.step(g.net.params_mut(), &grad, false)?;
        if it % (iterations / 10).max(1) == 0 {
            let x = g.sample(5000, &mut r)?;
            println!(
                "iter {it:>6}: loss {loss:.4}  G mean {:.3}  G var {:.4}  revised var {:.4}",
                x.column_means()[0],
                x.column_variances()[0],
                revised.column_variances()[0]
            );
        }
    }
    println!("Gibbs target: mean 1.5, variance 0.5");
    Ok(())
}

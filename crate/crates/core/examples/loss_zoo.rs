//! Every adversarial loss on the same batch, with its penalty terms.
//!
//!     cargo run --release --example loss_zoo

use coopinit::adversarial::{self, AdversarialConfig, LossKind};
use coopinit::trainer::ModelConfig;
use coopinit::{rng, DatasetSpec, Descriptor, Generator, Mlp};

fn main() -> coopinit::Result<()> {
    let models = ModelConfig::toy(2, 0);
    let d = Descriptor::new(Mlp::new(models.descriptor)?)?;
    let g = Generator::new(Mlp::new(models.generator)?);
    let mut r = rng::stream(0, 0);
    let real = DatasetSpec::canonical_ring().sample_batch(256, &mut r)?;
    let z = g.sample_latents(256, &mut r)?;
    let fake = g.generate(&z)?;

    println!("{:<14} {:>12} {:>12} {:>12}", "loss", "d_loss", "g_loss", "|grad_d|");
    let variants = [
        ("ns", LossKind::Ns, 0.0),
        ("ns + r1(1.0)", LossKind::Ns, 1.0),
        ("hinge", LossKind::Hinge, 0.0),
        ("was", LossKind::Was, 0.0),
        ("was_gp", LossKind::WasGp, 0.0),
    ];
    for (name, loss, gamma) in variants {
        let cfg = AdversarialConfig {
            loss,
            gamma,
            ..AdversarialConfig::default()
        };
        let dl = adversarial::d_loss(&cfg, &d, &real, &fake, &mut r)?;
        let gl = adversarial::g_loss(&cfg, &d, &g, &z)?;
        let norm = dl.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{name:<14} {:>12.6} {:>12.6} {norm:>12.6}", dl.loss, gl.loss);
    }
    let r1 = adversarial::r1_penalty(&d, &real)?;
    println!("\nR1 penalty E|grad_x D|^2 on real data: {:.6}", r1.loss);
    Ok(())
}

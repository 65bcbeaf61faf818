//! Langevin revision under a fixed quadratic descriptor.
//!
//!     cargo run --release --example langevin_chain -- [eta] [steps] > trace.csv
//!
//! Starts 4 chains at x = 5 under `D(x) = −x²/2` and writes every state as
//! CSV on stdout; the last-state moments go to stderr.

use coopinit::langevin::{self, LangevinConfig};
use coopinit::{Activation, Descriptor, Matrix, Mlp, MlpConfig};

fn main() -> coopinit::Result<()> {
    let mut args = std::env::args().skip(1);
    let eta: f64 = args.next().map_or(0.01, |s| s.parse().expect("eta"));
    let steps: usize = args.next().map_or(1000, |s| s.parse().expect("steps"));

    // Affine net with zero weights plus a unit confinement term.
    let cfg = MlpConfig::new(1, vec![], 1, Activation::Tanh, 0).with_quadratic_confinement(1.0);
    let d = Descriptor::new(Mlp::zeros(cfg)?)?;
    let x0 = Matrix::from_fn(4, 1, |_, _| 5.0);
    let lcfg = LangevinConfig {
        eta,
        steps,
        ..LangevinConfig::default()
    };
    let out = langevin::run_chain(&d, &x0, &lcfg, true)?;
    langevin::write_trace_csv(out.trace.as_deref().unwrap_or_default(), std::io::stdout().lock())?;

    let last = out.samples.column_means()[0];
    eprintln!("eta {eta}, {steps} steps: mean of final states {last:.3} (stationary mean 0)");
    Ok(())
}

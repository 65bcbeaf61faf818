//! CoopInit vs a plain GAN on the 8-Gaussian ring.
//!
//!     cargo run --release --example ring_mode_collapse -- [seed] [total_examples]
//!
//! Both runs share the seed; the only difference is the cooperative share of
//! the example budget (3% vs 0%).

use std::time::Instant;

use coopinit::config::RunConfig;
use coopinit::trainer;

fn main() -> coopinit::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let total: u64 = args.next().map_or(2_000_000, |s| s.parse().expect("total_examples"));

    for (name, frac) in [("coopinit", 0.03), ("plain gan", 0.0)] {
        let mut cfg = RunConfig::flagship();
        cfg.seed = seed;
        cfg.schedule.total_examples = total;
        cfg.schedule.ncoop_frac = frac;
        cfg.schedule.eval_every = total / 10;
        let setup = cfg.resolve()?;

        let t0 = Instant::now();
        let out = trainer::run(&setup, &mut ())?;
        println!("{name} (seed {seed}, {:.1}s)", t0.elapsed().as_secs_f64());
        println!("  consumed    stage        modes  hq     energy");
        for r in &out.records {
            println!(
                "  {:>9}  {:<11}  {:>5}  {:.3}  {:.4}",
                r.consumed, r.stage, r.modes_covered, r.hq_fraction, r.energy_distance
            );
        }
    }
    Ok(())
}

//! Langevin step size, chain length and cooperative share, one axis at a time.
//!
//!     cargo run --release --example ablation_sweep -- [total_examples] [seed]
//!
//! Runs in parallel on all cores. The `coopinit sweep` subcommand does the
//! same with run directories on disk.

use coopinit::config::RunConfig;
use coopinit::trainer;
use rayon::prelude::*;

fn main() {
    let mut args = std::env::args().skip(1);
    let total: u64 = args.next().map_or(400_000, |s| s.parse().expect("total_examples"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let mut grid: Vec<(String, RunConfig)> = Vec::new();
    let base = || {
        let mut c = RunConfig::flagship();
        c.seed = seed;
        c.schedule.total_examples = total;
        c
    };
    for eta in [0.5, 1.0, 5.0] {
        let mut c = base();
        c.langevin.eta = eta;
        grid.push((format!("eta={eta}"), c));
    }
    for steps in [5, 15] {
        let mut c = base();
        c.langevin.steps = steps;
        grid.push((format!("T={steps}"), c));
    }
    for frac in [0.0, 0.1] {
        let mut c = base();
        c.schedule.ncoop_frac = frac;
        grid.push((format!("coop={frac}"), c));
    }

    let results: Vec<(String, String)> = grid
        .into_par_iter()
        .map(|(label, cfg)| {
            let line = match cfg.resolve().and_then(|s| trainer::run(&s, &mut ())) {
                Ok(out) => {
                    let r = out.records.last().expect("at least one record");
                    format!("modes {} hq {:.3} energy {:.4}", r.modes_covered, r.hq_fraction, r.energy_distance)
                }
                Err(e) => format!("failed: {e}"),
            };
            (label, line)
        })
        .collect();
    for (label, line) in results {
        println!("{label:<10} {line}");
    }
}

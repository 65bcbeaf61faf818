//! Interrupt a run, save a checkpoint, and resume it bitwise.
//!
//!     cargo run --release --example checkpoint_resume

use coopinit::config::RunConfig;
use coopinit::persistence;
use coopinit::trainer::{self, TrainerState};

fn main() -> coopinit::Result<()> {
    let mut cfg = RunConfig::flagship();
    cfg.schedule.total_examples = 100_000;
    cfg.schedule.ncoop_frac = 0.05;
    cfg.schedule.eval_every = 20_000;
    let setup = cfg.resolve()?;

    let full = trainer::run(&setup, &mut ())?;

    let mut state = TrainerState::new(&setup)?;
    while state.consumed < 40_000 {
        state.step(&setup.train, &setup.dataset)?;
    }
    let path = std::env::temp_dir().join("coopinit_example.ckpt");
    persistence::save_checkpoint(&setup, &state, &path)?;
    println!("saved at {} examples to {}", state.consumed, path.display());

    let ck = persistence::load_checkpoint(&path)?;
    let resumed = trainer::resume(&ck.setup, ck.state, &mut ())?;
    let same = full.state.descriptor.net.params() == resumed.state.descriptor.net.params()
        && full.state.generator.net.params() == resumed.state.generator.net.params();
    println!("resumed run matches the uninterrupted one: {same}");
    for r in &resumed.records {
        println!("  {:>7} {:<11} modes {} energy {:.4}", r.consumed, r.stage, r.modes_covered, r.energy_distance);
    }
    let _ = std::fs::remove_file(&path);
    Ok(())
}

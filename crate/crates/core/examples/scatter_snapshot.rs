//! Writes an SVG scatter of an untrained generator against the ring.
//!
//!     cargo run --release --example scatter_snapshot -- out.svg

use coopinit::plot::Scatter;
use coopinit::trainer::ModelConfig;
use coopinit::{rng, DatasetSpec, Generator, Mlp};

fn main() -> coopinit::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "snapshot.svg".into());
    let spec = DatasetSpec::canonical_ring();
    let g = Generator::new(Mlp::new(ModelConfig::toy(2, 0).generator)?);
    let mut r = rng::stream(0, 0);
    let svg = Scatter {
        real: &spec.sample_batch(1000, &mut r)?,
        generated: &g.sample(1000, &mut r)?,
        centers: &spec.mode_centers(),
        title: "untrained generator".into(),
    }
    .to_svg()?;
    std::fs::write(&path, svg).map_err(|e| coopinit::Error::io(std::path::Path::new(&path), e))?;
    println!("wrote {path}");
    Ok(())
}

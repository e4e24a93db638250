//! Regenerates one figure's data. Usage: `reproduce_figure [id] [out-dir]`.

use std::path::PathBuf;

use chimera_bm::reproduce::{reproduce, ReproduceOptions, FIGURE_IDS};

fn main() -> chimera_bm::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "mcmc-dynamics".into());
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(&id));
    std::fs::create_dir_all(&out).map_err(|e| chimera_bm::Error::io(&out, e))?;
    println!("figures: {}", FIGURE_IDS.join(", "));
    let manifest = reproduce(&id, &ReproduceOptions::default(), &out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

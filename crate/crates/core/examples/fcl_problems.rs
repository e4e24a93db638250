//! The FCL benchmark family and their cluster-level mode catalogs.

use chimera_bm::fcl::{enumerate_cluster_minima, FclSpec};
use chimera_bm::io::CatalogFile;

fn main() -> chimera_bm::Result<()> {
    for variant in 1..=4 {
        let spec = FclSpec::fcl(variant)?;
        let model = spec.build()?;
        let catalog = enumerate_cluster_minima(&model, &spec)?;
        println!(
            "FCL-{variant}: {} spins, {} couplers, {} minima, {} ground at E = {:.2}, gap {:.2}, excited levels {:.2?}",
            model.node_count(),
            model.graph().edge_count(),
            catalog.len(),
            catalog.ground_count,
            catalog.ground_energy,
            catalog.gap,
            catalog.excited_levels()
        );
    }

    let grid = FclSpec::random_grid(5, &[-1.5, -2.5], &[-0.5, -0.25, 0.38], true, 11)?;
    let frustrated = (0..4)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .filter(|&(r, c)| grid.cycle_sign_frustrated(&grid.plaquette(r, c)))
        .count();
    let model = grid.build()?;
    println!(
        "5x5 cluster grid: {} spins, {} bundles, {frustrated}/16 frustrated plaquettes",
        model.node_count(),
        grid.bundles.len()
    );

    let spec = FclSpec::scaled_fcl3();
    let catalog = enumerate_cluster_minima(&spec.build()?, &spec)?;
    let json = serde_json::to_string(&CatalogFile::from_catalog(&catalog))?;
    println!("scaled FCL-3 catalog as JSON: {} bytes", json.len());
    Ok(())
}

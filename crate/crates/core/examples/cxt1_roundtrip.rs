//! Write pipeline artefacts as CXT1 containers, read them back, and show
//! the header of one file.
//!
//!     cargo run --release --example cxt1_roundtrip

use dmri::acquisition::{KSpaceData, NavigatorMatrix};
use dmri::io::{self, sha256_file, Cxt1};
use dmri::numerics::CasoratiMatrix;
use dmri::phantom::PhantomConfig;
use dmri::pipeline::{simulate, SimulationConfig};

fn main() -> dmri::Result<()> {
    let dir = tempfile_dir()?;
    let d = simulate(&SimulationConfig {
        phantom: PhantomConfig {
            height: 32,
            width: 32,
            n_frames: 20,
            ..PhantomConfig::default()
        },
        ..SimulationConfig::default()
    })?;

    let xp = dir.join("phantom.cxt1");
    let kp = dir.join("kspace.cxt1");
    let np = dir.join("navigators.cxt1");
    io::save(&xp, &d.truth)?;
    io::save(&kp, &d.kspace)?;
    io::save(&np, &d.navigators)?;

    assert_eq!(io::load::<CasoratiMatrix>(&xp)?, d.truth);
    assert_eq!(io::load::<KSpaceData>(&kp)?, d.kspace);
    assert_eq!(io::load::<NavigatorMatrix>(&np)?, d.navigators);
    println!("three containers round-trip exactly");

    for p in [&xp, &kp, &np] {
        let c = Cxt1::read(p)?;
        println!(
            "{:<16} kind {:<10} dims {:?} sha256 {}",
            p.file_name().unwrap().to_string_lossy(),
            c.kind().unwrap_or("?"),
            c.dims,
            &sha256_file(p)?[..16]
        );
    }
    let meta = Cxt1::read(&kp)?.metadata;
    println!("k-space metadata keys: {:?}", meta.keys().collect::<Vec<_>>());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> dmri::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("cxt1-demo-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

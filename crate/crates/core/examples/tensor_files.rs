//! Writes and reads the self-describing tensor format, a schedule file and
//! a run configuration.
//!
//! Run with `cargo run --example tensor_files`.

use polartof::ellipsometry::uniform_initialization;
use polartof::io::{read_cube, read_schedule, write_cube, write_schedule, RunConfig};
use polartof::renderer::TransientMuellerCube;
use polartof::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("polartof-tensor-files");
    std::fs::create_dir_all(&dir)?;

    let mut cube = TransientMuellerCube::zeros(4, 3, 8, 25e-12);
    for (i, v) in cube.data.iter_mut().enumerate() {
        *v = (i as f64 * 0.1).cos();
    }
    let path = dir.join("cube.ptof");
    write_cube(&path, &cube)?;
    let bytes = std::fs::read(&path)?;
    let header_end = bytes.windows(2).position(|w| w == b"\n\n").unwrap_or(0);
    println!("{}", String::from_utf8_lossy(&bytes[..header_end]));
    let back = read_cube(&path)?;
    let err = back.data.iter().zip(&cube.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max f32 round-trip error {err:.2e}\n");

    let schedule = uniform_initialization(20);
    write_schedule(&dir.join("schedule.toml"), &schedule)?;
    assert_eq!(read_schedule(&dir.join("schedule.toml"))?, schedule);
    println!("schedule {} round-trips exactly", schedule.identifier());

    let cfg = RunConfig::parse("[scene]\nkind = \"sphere\"\nfov = \"30deg\"\n[sensor]\nbin_width = \"12.5ps\"\n")?;
    println!("\neffective configuration:\n{}", cfg.to_toml());
    Ok(())
}

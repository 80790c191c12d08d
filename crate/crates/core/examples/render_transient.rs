//! Renders the sphere preset to a transient Mueller cube and prints the
//! `[H]00` temporal profile of the center pixel.
//!
//! Run with `cargo run --release --example render_transient`.

use polartof::renderer::{
    alternate_material, default_material, make_synthetic_scene, render_transient, shift_cube, Camera, SensorConfig,
    SyntheticKind,
};
use polartof::Result;

fn main() -> Result<()> {
    let sensor = SensorConfig {
        num_bins: 256,
        ..SensorConfig::default()
    };
    let scene = make_synthetic_scene(
        &SyntheticKind::Sphere {
            center_z: 0.4,
            radius: 0.1,
            material: default_material(),
            backdrop_distance: 0.55,
            backdrop: alternate_material(),
        },
        Camera::with_fov(32, 32, 40f64.to_radians()),
    )?;
    let cube = shift_cube(&render_transient(&scene, &sensor)?, &scene, &sensor)?;

    let p = 16 * 32 + 16;
    let trace = cube.entry_trace(p, 0, 0);
    let peak = trace.iter().cloned().fold(0.0, f64::max);
    println!("center pixel depth {:.3} m", scene.depth[p]);
    for (k, v) in trace.iter().enumerate().filter(|(_, v)| **v > 1e-3 * peak) {
        let bar = "#".repeat((60.0 * v / peak).round() as usize);
        println!("{:>7.1} ps {v:>10.3e} {bar}", sensor.bin_center(k) * 1e12);
    }
    Ok(())
}

//! Simulates rotating-ellipsometer captures of a rendered cube and recovers
//! the Mueller cube, with and without measurement noise.
//!
//! Run with `cargo run --release --example ellipsometric_capture`.

use polartof::ellipsometry::{condition_number, learn_schedule, reconstruct_mueller, s_illum};
use polartof::renderer::{default_material, make_synthetic_scene, render_transient, shift_cube, simulate_capture};
use polartof::renderer::{Camera, SensorConfig, SyntheticKind};
use polartof::Result;

fn main() -> Result<()> {
    let scene = make_synthetic_scene(
        &SyntheticKind::Plane {
            distance: 0.3,
            tilt: 0.3,
            material: default_material(),
        },
        Camera::with_fov(16, 16, 40f64.to_radians()),
    )?;
    let schedule = learn_schedule(20, 500, 0)?;
    println!(
        "learned {}-capture schedule, condition number {:.3}",
        schedule.len(),
        condition_number(&schedule, &s_illum())?
    );

    for noise_sigma in [0.0, 1e-4] {
        let sensor = SensorConfig {
            num_bins: 128,
            noise_sigma,
            ..SensorConfig::default()
        };
        let delay = render_transient(&scene, &sensor)?;
        let truth = shift_cube(&delay, &scene, &sensor)?;
        let stack = simulate_capture(&delay, &scene, &schedule, &sensor, 7)?;
        let rec = reconstruct_mueller(&stack, &schedule)?;
        let err: f64 = rec.data.iter().zip(&truth.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = truth.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("noise {noise_sigma:e}: relative cube error {:.3e}", err / norm);
    }
    Ok(())
}

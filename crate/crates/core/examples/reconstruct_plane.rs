//! Recovers depth, normals and material of a tilted plane from its
//! transient Mueller cube.
//!
//! Run with `cargo run --release --example reconstruct_plane`.

use polartof::inverse::{reconstruct_scene, scene_errors, ReconstructConfig, SceneParams};
use polartof::renderer::{default_material, make_synthetic_scene, render_transient, shift_cube};
use polartof::renderer::{Camera, SensorConfig, SyntheticKind};
use polartof::Result;

fn main() -> Result<()> {
    let sensor = SensorConfig {
        num_bins: 256,
        noise_sigma: 0.0,
        ..SensorConfig::default()
    };
    let camera = Camera::with_fov(16, 16, 40f64.to_radians());
    let scene = make_synthetic_scene(
        &SyntheticKind::Plane {
            distance: 0.5,
            tilt: 0.5,
            material: default_material(),
        },
        camera,
    )?;
    let h = shift_cube(&render_transient(&scene, &sensor)?, &scene, &sensor)?;
    let cfg = ReconstructConfig {
        k: 1,
        iters: 800,
        ..ReconstructConfig::default()
    };
    let r = reconstruct_scene(&h, &camera, &sensor, &cfg)?;
    let e = scene_errors(
        &r.params,
        &r.clusters.labels,
        &r.mask,
        &SceneParams::from_scene(&scene),
        &scene.cluster_id,
    )?;
    println!("loss {:.4e} -> {:.4e}", r.initial_loss, r.best_loss);
    println!(
        "depth rmse {:.3} mm, mean normal error {:.3} deg",
        e.depth_rmse * 1e3,
        e.mean_normal_error_deg
    );
    let m = &r.params.materials[0];
    println!(
        "eta {:.3} (true 1.5), m {:.3} (true 0.5), sub-surface delay {:.0} ps (true 250 ps)",
        m.eta,
        m.m,
        m.subsurface.mu[0] * 1e12
    );
    Ok(())
}

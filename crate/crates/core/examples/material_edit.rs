//! Edits material parameters (sub-surface amplitude and delay, surface
//! amplitude, roughness) and compares the re-rendered `[H]00` profiles.
//!
//! Run with `cargo run --release --example material_edit`.

use polartof::inverse::{edit_material, BankEdit, ConstraintRanges, MaterialEdit, SceneParams};
use polartof::renderer::{default_material, make_synthetic_scene, render_transient, shift_cube};
use polartof::renderer::{Camera, SensorConfig, SyntheticKind};
use polartof::Result;

fn main() -> Result<()> {
    let sensor = SensorConfig {
        num_bins: 256,
        ..SensorConfig::default()
    };
    let camera = Camera::with_fov(8, 8, 20f64.to_radians());
    let scene = make_synthetic_scene(
        &SyntheticKind::Plane {
            distance: 0.5,
            tilt: 0.2,
            material: default_material(),
        },
        camera,
    )?;
    let params = SceneParams::from_scene(&scene);
    let ranges = ConstraintRanges::from_sensor(&sensor);
    let edits = [
        ("original", MaterialEdit::default()),
        (
            "3x sub-surface, re-timed",
            MaterialEdit {
                subsurface: BankEdit {
                    scale_a: 3.0,
                    shift_mu: [0.1, 2.0, 2.0, 2.0],
                },
                ..MaterialEdit::default()
            },
        ),
        (
            "2x surface",
            MaterialEdit {
                surface: BankEdit {
                    scale_a: 2.0,
                    ..BankEdit::default()
                },
                ..MaterialEdit::default()
            },
        ),
        (
            "rougher",
            MaterialEdit {
                set_m: Some(0.9),
                ..MaterialEdit::default()
            },
        ),
    ];
    let p = 4 * 8 + 4;
    for (name, edit) in edits {
        let edited = edit_material(&params, &edit, &ranges)?;
        let s = edited.to_scene(camera, &scene.cluster_id)?;
        let trace = shift_cube(&render_transient(&s, &sensor)?, &s, &sensor)?.entry_trace(p, 0, 0);
        let (k, peak) = trace
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
        let late: f64 = trace[k + 6..].iter().cloned().fold(0.0, f64::max);
        println!("{name:>24}: peak {peak:.4e} at bin {k}, late peak {late:.4e}");
    }
    Ok(())
}

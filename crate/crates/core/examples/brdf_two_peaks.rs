//! The time-resolved polarimetric BRDF of the default dielectric: an early
//! surface return and a delayed, depolarized sub-surface return.
//!
//! Run with `cargo run --example brdf_two_peaks`.

use polartof::brdf::brdf;
use polartof::polarization::{normalize, LocalGeometry};
use polartof::renderer::default_material;
use polartof::Result;

fn main() -> Result<()> {
    let mat = default_material();
    let view = [0.0, 0.0, 1.0];
    let normal = normalize(&[0.3f64.sin(), 0.0, 0.3f64.cos()]);
    let geom = LocalGeometry::coaxial(view, normal);

    println!("delay [ps]   M00          M01          M22          DoP of H-pol input");
    for k in 0..24 {
        let tau = k as f64 * 20e-12;
        let m = brdf(tau, &geom, &mat)?;
        let out = m * polartof::polarization::StokesVector::horizontal();
        let dop = polartof::polarization::degree_of_polarization(&out).unwrap_or(0.0);
        println!(
            "{:>9.0}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {dop:.3}",
            tau * 1e12,
            m[(0, 0)],
            m[(0, 1)],
            m[(2, 2)]
        );
    }
    Ok(())
}

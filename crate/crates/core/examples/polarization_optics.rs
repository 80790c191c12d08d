//! Stokes vectors through rotated optical elements and a Fresnel interface.
//!
//! Run with `cargo run --example polarization_optics`.

use polartof::polarization::{
    degree_of_polarization, element_mueller, fresnel_mueller, ElementKind, FresnelMode, StokesVector,
};
use polartof::Result;

fn main() -> Result<()> {
    let horizontal = StokesVector::horizontal();
    println!("input {:?}", horizontal.0);

    for deg in [0.0, 22.5, 45.0] {
        let t = f64::to_radians(deg);
        let hwp = element_mueller(ElementKind::HalfWavePlate, t) * horizontal;
        let qwp = element_mueller(ElementKind::QuarterWavePlate, t) * horizontal;
        let lp = element_mueller(ElementKind::LinearPolarizer, t) * horizontal;
        println!("theta {deg:>5} deg: HWP {:>7.3?}  QWP {:>7.3?}  LP {:>7.3?}", hwp.0, qwp.0, lp.0);
    }

    // unpolarized light becomes partially polarized on reflection, fully at Brewster's angle
    let unpolarized = StokesVector::unpolarized(1.0);
    let eta = 1.5f64;
    for deg in [0.0, 30.0, eta.atan().to_degrees(), 80.0] {
        let r = fresnel_mueller(FresnelMode::Reflect, eta, deg.to_radians())? * unpolarized;
        println!(
            "reflection at {deg:5.1} deg: R = {:.4}, DOP = {:.4}",
            r.s0(),
            degree_of_polarization(&r)?
        );
    }
    Ok(())
}

//! Fresnel reflection and transmission Mueller matrices.
//!
//! `eta` is the ratio `n_transmitted / n_incident`. Transmission matrices are
//! normalized to intensity transmittance, i.e. they carry the
//! `eta cos(theta_t) / cos(theta_i)` factor, so that at any non-absorbing
//! interface `[F_R]00 + [F_T]00 = 1`.

use std::f64::consts::FRAC_PI_2;

use super::mueller::MuellerMatrix;
use crate::error::{Error, Result};
use crate::numerics::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FresnelMode {
    Reflect,
    Transmit,
}

fn diattenuator<T: Real>(ps: T, pp: T, c: T, s: T) -> MuellerMatrix<T> {
    let h = T::cst(0.5);
    let o = T::zero();
    let a = (ps + pp) * h;
    let b = (ps - pp) * h;
    MuellerMatrix::from_rows([[a, b, o, o], [b, a, o, o], [o, o, c, s], [o, o, -s, c]])
}

/// Fresnel Mueller matrix at incidence angle `theta` (radians).
pub fn fresnel_mueller<T: Real>(mode: FresnelMode, eta: T, theta: T) -> Result<MuellerMatrix<T>> {
    let th = theta.value();
    if !(0.0..FRAC_PI_2).contains(&th) {
        return Err(Error::InvalidAngle(th));
    }
    fresnel_mueller_cos(mode, eta, theta.cos())
}

/// [`fresnel_mueller`] parameterized by `cos(theta)`, which keeps derivatives
/// finite at normal incidence.
pub fn fresnel_mueller_cos<T: Real>(mode: FresnelMode, eta: T, cos_i: T) -> Result<MuellerMatrix<T>> {
    let (c, n) = (cos_i.value(), eta.value());
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidAngle(c.clamp(-1.0, 1.0).acos()));
    }
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParam(format!("refractive index ratio {n}")));
    }
    let sin_i2 = T::one() - cos_i * cos_i;
    let sin_t2 = sin_i2 / (eta * eta);
    let tir = sin_t2.value() >= 1.0;
    match mode {
        FresnelMode::Reflect if tir => {
            // |rs| = |rp| = 1; only the relative phase survives.
            let kappa = (sin_t2 - T::one()).sqrt();
            let ds = -(eta * kappa).atan2(cos_i).scale(2.0);
            let dp = -kappa.atan2(eta * cos_i).scale(2.0);
            let (s, c) = (ds - dp).sin_cos();
            Ok(diattenuator(T::one(), T::one(), c, s))
        }
        FresnelMode::Reflect => {
            let cos_t = (T::one() - sin_t2).sqrt();
            let rs = (cos_i - eta * cos_t) / (cos_i + eta * cos_t);
            let rp = (eta * cos_i - cos_t) / (eta * cos_i + cos_t);
            Ok(diattenuator(rs * rs, rp * rp, rs * rp, T::zero()))
        }
        FresnelMode::Transmit if tir => Err(Error::TotalInternalReflection {
            eta: n,
            theta: c.acos(),
        }),
        FresnelMode::Transmit => {
            let cos_t = (T::one() - sin_t2).sqrt();
            let ts = cos_i.scale(2.0) / (cos_i + eta * cos_t);
            let tp = cos_i.scale(2.0) / (eta * cos_i + cos_t);
            let k = eta * cos_t / cos_i;
            Ok(diattenuator(k * ts * ts, k * tp * tp, k * ts * tp, T::zero()))
        }
    }
}

/// Snell refraction angle for a ray entering a medium of relative index `eta`.
pub fn refraction_angle<T: Real>(eta: T, theta: T) -> Result<T> {
    let s = theta.sin() / eta;
    if s.value().abs() >= 1.0 {
        return Err(Error::TotalInternalReflection {
            eta: eta.value(),
            theta: theta.value(),
        });
    }
    Ok(s.asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{degree_of_polarization, is_physical, StokesVector};

    #[test]
    fn normal_incidence_reflectance() {
        let r = fresnel_mueller(FresnelMode::Reflect, 1.5, 0.0).unwrap();
        assert!((r[(0, 0)] - 0.04).abs() < 1e-15);
        let t = fresnel_mueller(FresnelMode::Transmit, 1.5, 0.0).unwrap();
        assert!((t[(0, 0)] - 0.96).abs() < 1e-15);
        // diagonal with the helicity flip on the lower-right block
        let expect = MuellerMatrix::diag([0.04, 0.04, -0.04, -0.04]);
        assert!(r.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn brewster_reflection_is_fully_polarized() {
        let theta_b = 1.5f64.atan();
        let r = fresnel_mueller(FresnelMode::Reflect, 1.5, theta_b).unwrap();
        let out = r * StokesVector::unpolarized(1.0);
        assert!((degree_of_polarization(&out).unwrap() - 1.0).abs() < 1e-12);
        assert!(r[(2, 2)].abs() < 1e-15 && r[(3, 3)].abs() < 1e-15);
    }

    #[test]
    fn energy_accounting_over_angles() {
        for &eta in &[1.2, 1.5, 2.4] {
            for k in 0..100 {
                let th = k as f64 * 0.0155;
                let r = fresnel_mueller(FresnelMode::Reflect, eta, th).unwrap();
                let t = fresnel_mueller(FresnelMode::Transmit, eta, th).unwrap();
                assert!((r[(0, 0)] + t[(0, 0)] - 1.0).abs() < 1e-12);
                // per polarization channel too
                assert!((r[(0, 1)] + t[(0, 1)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outputs_are_physical() {
        for &eta in &[0.6, 1.0 / 1.5, 1.33, 1.5, 2.0, 3.0] {
            for k in 0..157 {
                let th = k as f64 * 0.01;
                let r = fresnel_mueller(FresnelMode::Reflect, eta, th).unwrap();
                assert!(is_physical(&r, 1e-12), "R eta {eta} th {th}");
                if let Ok(t) = fresnel_mueller(FresnelMode::Transmit, eta, th) {
                    assert!(is_physical(&t, 1e-12), "T eta {eta} th {th}");
                }
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fresnel_mueller(FresnelMode::Reflect, 1.5, FRAC_PI_2),
            Err(Error::InvalidAngle(_))
        ));
        assert!(matches!(
            fresnel_mueller(FresnelMode::Transmit, 1.0 / 1.5, 1.0),
            Err(Error::TotalInternalReflection { .. })
        ));
        // below the critical angle transmission out of the medium is fine
        assert!(fresnel_mueller(FresnelMode::Transmit, 1.0 / 1.5, 0.5).is_ok());
    }

    #[test]
    fn exit_transmittance_matches_entry() {
        let eta = 1.5;
        for k in 1..80 {
            let th = k as f64 * 0.019;
            let th_t = refraction_angle(eta, th).unwrap();
            let t_in = fresnel_mueller(FresnelMode::Transmit, eta, th).unwrap();
            let t_out = fresnel_mueller(FresnelMode::Transmit, 1.0 / eta, th_t).unwrap();
            assert!(t_in.max_abs_diff(&t_out) < 1e-12);
        }
    }
}

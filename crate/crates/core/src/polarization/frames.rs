//! Local scattering geometry and Stokes reference-frame conversions.

use super::elements::rotation_from_double_angle;
use super::mueller::MuellerMatrix;
use crate::error::{Error, Result};
use crate::numerics::Real;

pub type Vec3<T = f64> = [T; 3];

pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

pub fn normalize<T: Real>(a: &Vec3<T>) -> Vec3<T> {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn lift<T: Real>(a: &Vec3<f64>) -> Vec3<T> {
    a.map(T::cst)
}

/// Incident/outgoing directions and surface normal, all pointing away from
/// the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalGeometry<T = f64> {
    pub omega_i: Vec3<T>,
    pub omega_o: Vec3<T>,
    pub n: Vec3<T>,
}

/// Direction of the conversion performed by [`coordinate_conversion`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameConversion {
    /// Incident light: halfway coordinates to surface-normal coordinates.
    IncidentHalfwayToNormal,
    /// Outgoing light: surface-normal coordinates to halfway coordinates.
    NormalToOutgoingHalfway,
}

const FRAME_EPS: f64 = 1e-9;

impl<T: Real> LocalGeometry<T> {
    pub fn new(omega_i: Vec3<T>, omega_o: Vec3<T>, n: Vec3<T>) -> Self {
        Self { omega_i, omega_o, n }
    }

    /// Coaxial configuration: `omega_i = omega_o = to_sensor`.
    pub fn coaxial(to_sensor: Vec3<T>, n: Vec3<T>) -> Self {
        Self::new(to_sensor, to_sensor, n)
    }

    pub fn halfway(&self) -> Result<Vec3<T>> {
        let s = [
            self.omega_i[0] + self.omega_o[0],
            self.omega_i[1] + self.omega_o[1],
            self.omega_i[2] + self.omega_o[2],
        ];
        if norm(&s).value() < FRAME_EPS {
            return Err(Error::DegenerateFrame);
        }
        Ok(normalize(&s))
    }

    pub fn cos_theta_i(&self) -> T {
        dot(&self.n, &self.omega_i)
    }

    pub fn cos_theta_o(&self) -> T {
        dot(&self.n, &self.omega_o)
    }

    pub fn cos_theta_h(&self) -> Result<T> {
        Ok(dot(&self.halfway()?, &self.n))
    }

    pub fn is_coaxial(&self) -> bool {
        (0..3).all(|k| (self.omega_i[k].value() - self.omega_o[k].value()).abs() < FRAME_EPS)
    }
}

/// Fixed lab reference used when the halfway frame is undefined, which is
/// the case whenever the halfway vector is parallel to the propagation
/// direction (every coaxial configuration).
fn reference_up<T: Real>(k: &Vec3<T>) -> Vec3<T> {
    if k[1].value().abs() < 0.9 {
        [T::zero(), T::one(), T::zero()]
    } else {
        [T::one(), T::zero(), T::zero()]
    }
}

/// Unit component of `v` orthogonal to the unit vector `k`, if it exists.
fn transverse<T: Real>(v: &Vec3<T>, k: &Vec3<T>) -> Option<Vec3<T>> {
    let p = dot(v, k);
    let t = [v[0] - p * k[0], v[1] - p * k[1], v[2] - p * k[2]];
    if norm(&t).value() < FRAME_EPS {
        None
    } else {
        Some(normalize(&t))
    }
}

/// Halfway-coordinate y axis for light propagating along `k`.
pub fn halfway_y_axis<T: Real>(h: &Vec3<T>, k: &Vec3<T>) -> Vec3<T> {
    transverse(h, k).unwrap_or_else(|| {
        transverse(&reference_up(k), k).expect("reference axis is never parallel to k")
    })
}

/// Rotation taking Stokes vectors expressed with y axis `from` into the frame
/// with y axis `to`, both transverse to `k`.
fn frame_rotation<T: Real>(from: &Vec3<T>, to: &Vec3<T>, k: &Vec3<T>) -> MuellerMatrix<T> {
    let c = dot(from, to);
    let s = dot(&cross(from, to), k);
    rotation_from_double_angle(c * c - s * s, (s * c).scale(2.0))
}

/// Signed angle from `from` to `to` about `k`.
pub fn frame_angle(from: &Vec3, to: &Vec3, k: &Vec3) -> f64 {
    dot(&cross(from, to), k).atan2(dot(from, to))
}

/// Coordinate-conversion Mueller matrix between halfway and surface-normal
/// frames. When the normal is parallel to the propagation direction the
/// normal frame is taken equal to the halfway frame and the conversion is the
/// identity.
pub fn coordinate_conversion<T: Real>(
    geom: &LocalGeometry<T>,
    which: FrameConversion,
) -> Result<MuellerMatrix<T>> {
    let h = geom.halfway()?;
    match which {
        FrameConversion::IncidentHalfwayToNormal => {
            let k = geom.omega_i.map(|x| -x);
            let y_h = halfway_y_axis(&h, &k);
            let y_n = transverse(&geom.n, &k).unwrap_or(y_h);
            Ok(frame_rotation(&y_h, &y_n, &k))
        }
        FrameConversion::NormalToOutgoingHalfway => {
            let k = geom.omega_o;
            let y_h = halfway_y_axis(&h, &k);
            let y_n = transverse(&geom.n, &k).unwrap_or(y_h);
            Ok(frame_rotation(&y_n, &y_h, &k))
        }
    }
}

//! Stokes-Mueller algebra: rotations, polarizing elements, Fresnel matrices,
//! frame conversions, Poincare sampling and physicality checks.
//!
//! Conventions are fixed crate-wide: `s1` horizontal minus vertical, `s2`
//! +45 deg minus -45 deg, `s3` right minus left circular. Element matrices are
//! `R(-theta) E0 R(theta)` with the axis-aligned forms in [`axis_aligned`].

mod elements;
mod frames;
mod fresnel;
mod mueller;
mod sampling;

pub use elements::{axis_aligned, element_mueller, rotation_from_double_angle, rotation_mueller, ElementKind};
pub use frames::{
    coordinate_conversion, cross, dot, frame_angle, halfway_y_axis, lift, norm, normalize, FrameConversion,
    LocalGeometry, Vec3,
};
pub use fresnel::{fresnel_mueller, fresnel_mueller_cos, refraction_angle, FresnelMode};
pub use mueller::{degree_of_polarization, MuellerMatrix, StokesVector};
pub use sampling::{is_physical, poincare_uniform_states, random_physical_mueller};

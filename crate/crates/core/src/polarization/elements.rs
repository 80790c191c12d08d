//! Rotations and rotatable polarizing elements.

use super::mueller::MuellerMatrix;
use crate::numerics::Real;

/// Polarizing element types used in the ellipsometer arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    LinearPolarizer,
    HalfWavePlate,
    QuarterWavePlate,
}

/// Stokes frame rotation by `phi` about the propagation direction.
pub fn rotation_mueller<T: Real>(phi: T) -> MuellerMatrix<T> {
    let (s, c) = (phi.scale(2.0)).sin_cos();
    rotation_from_double_angle(c, s)
}

/// Rotation given `cos(2 phi)` and `sin(2 phi)` directly.
pub fn rotation_from_double_angle<T: Real>(c2: T, s2: T) -> MuellerMatrix<T> {
    let (o, l) = (T::zero(), T::one());
    MuellerMatrix::from_rows([
        [l, o, o, o],
        [o, c2, s2, o],
        [o, -s2, c2, o],
        [o, o, o, l],
    ])
}

/// Axis-aligned element matrix.
pub fn axis_aligned<T: Real>(kind: ElementKind) -> MuellerMatrix<T> {
    let (o, l, h) = (T::zero(), T::one(), T::cst(0.5));
    match kind {
        ElementKind::LinearPolarizer => MuellerMatrix::from_rows([
            [h, h, o, o],
            [h, h, o, o],
            [o, o, o, o],
            [o, o, o, o],
        ]),
        ElementKind::HalfWavePlate => MuellerMatrix::diag([l, l, -l, -l]),
        ElementKind::QuarterWavePlate => MuellerMatrix::from_rows([
            [l, o, o, o],
            [o, l, o, o],
            [o, o, o, -l],
            [o, o, l, o],
        ]),
    }
}

/// Element with its axis rotated to `theta`: `R(-theta) E0 R(theta)`.
pub fn element_mueller<T: Real>(kind: ElementKind, theta: T) -> MuellerMatrix<T> {
    rotation_mueller(-theta) * axis_aligned(kind) * rotation_mueller(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::StokesVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: &MuellerMatrix, b: &MuellerMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn rotation_examples() {
        let id = MuellerMatrix::identity();
        assert!(close(&rotation_mueller(0.0), &id, 0.0));
        assert!(close(&rotation_mueller(PI), &id, 1e-15));
        let r = rotation_mueller(PI / 4.0);
        let expect = MuellerMatrix::from_rows([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]);
        assert!(close(&r, &expect, 1e-15));
    }

    #[test]
    fn element_examples() {
        let lp = element_mueller(ElementKind::LinearPolarizer, 0.0);
        assert_eq!(
            lp * StokesVector::unpolarized(1.0),
            StokesVector([0.5, 0.5, 0.0, 0.0])
        );
        let hwp = element_mueller(ElementKind::HalfWavePlate, 0.0);
        assert!(close(&hwp, &MuellerMatrix::diag([1.0, 1.0, -1.0, -1.0]), 0.0));
        let out = element_mueller(ElementKind::HalfWavePlate, PI / 8.0) * StokesVector::horizontal();
        for (a, b) in out.0.iter().zip([1.0, 0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let qwp = element_mueller(ElementKind::QuarterWavePlate, 0.0);
        let out = qwp * StokesVector([1.0, 0.0, 0.0, 1.0]);
        assert_eq!(out, StokesVector([1.0, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn rotation_composes_additively() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = rng.random_range(-10.0..10.0);
            let b = rng.random_range(-10.0..10.0);
            let lhs = rotation_mueller(a) * rotation_mueller(b);
            assert!(close(&lhs, &rotation_mueller(a + b), 1e-12));
        }
    }
}

//! Poincare-sphere sampling and the sampled physicality test.

use rand::Rng;

use super::elements::rotation_mueller;
use super::mueller::{MuellerMatrix, StokesVector};

/// `n` fully polarized unit-intensity states on a Fibonacci lattice.
pub fn poincare_uniform_states(n: usize) -> Vec<StokesVector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            StokesVector([1.0, r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Fixed probe set: 6 axis and 8 diagonal fully polarized states plus 12
/// half-polarized edge states.
fn probe_states() -> Vec<StokesVector> {
    let mut out = Vec::with_capacity(26);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut s = [1.0, 0.0, 0.0, 0.0];
            s[axis + 1] = sign;
            out.push(StokesVector(s));
        }
    }
    let d = 1.0 / 3f64.sqrt();
    for a in [d, -d] {
        for b in [d, -d] {
            for c in [d, -d] {
                out.push(StokesVector([1.0, a, b, c]));
            }
        }
    }
    let e = 0.5 / 2f64.sqrt();
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        for a in [e, -e] {
            for b in [e, -e] {
                let mut s = [1.0, 0.0, 0.0, 0.0];
                s[i] = a;
                s[j] = b;
                out.push(StokesVector(s));
            }
        }
    }
    out
}

/// Sampled physicality test: every probe output keeps `s0 >= -tol` and
/// `DOP <= 1 + tol`, and `[M]00` dominates every entry.
pub fn is_physical(m: &MuellerMatrix, tol: f64) -> bool {
    if !m.is_finite() {
        return false;
    }
    if m[(0, 0)] < m.max_abs() - tol {
        return false;
    }
    probe_states().iter().all(|s| {
        let o = *m * *s;
        o.0[0] >= -tol && o.polarized_intensity() <= o.0[0] * (1.0 + tol) + tol
    })
}

/// Rotated partial linear diattenuator with principal transmittances `q, r`.
fn diattenuator(q: f64, r: f64, theta: f64) -> MuellerMatrix {
    let (a, b, c) = (0.5 * (q + r), 0.5 * (q - r), (q * r).sqrt());
    let d = MuellerMatrix::from_rows([
        [a, b, 0.0, 0.0],
        [b, a, 0.0, 0.0],
        [0.0, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, c],
    ]);
    rotation_mueller(-theta) * d * rotation_mueller(theta)
}

/// Rotated linear retarder with retardance `delta`.
fn retarder(delta: f64, theta: f64) -> MuellerMatrix {
    let (s, c) = delta.sin_cos();
    let r = MuellerMatrix::from_rows([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, c, s],
        [0.0, 0.0, -s, c],
    ]);
    rotation_mueller(-theta) * r * rotation_mueller(theta)
}

/// Random physically realizable Mueller matrix: a convex mixture of two
/// random non-depolarizing systems (diattenuator, retarder, rotator) and an
/// ideal depolarizer, scaled by a random transmittance.
pub fn random_physical_mueller(rng: &mut impl Rng) -> MuellerMatrix {
    use std::f64::consts::PI;
    let mut pure = || {
        let q = rng.random_range(0.5..1.0);
        let r = q * rng.random_range(0.0..1.0);
        diattenuator(q, r, rng.random_range(0.0..PI))
            * retarder(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..PI))
            * rotation_mueller(rng.random_range(0.0..PI))
    };
    let (m1, m2) = (pure(), pure());
    let w1 = rng.random_range(0.3..1.0);
    let w2 = (1.0 - w1) * rng.random_range(0.0..1.0);
    let w3 = 1.0 - w1 - w2;
    let depol = MuellerMatrix::diag([1.0, 0.0, 0.0, 0.0]);
    let scale = rng.random_range(0.2..1.0);
    (m1.scale(w1) + m2.scale(w2) + depol.scale(w3)).scale(scale)
}

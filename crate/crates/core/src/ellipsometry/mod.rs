//! Rotating ellipsometry: the HWP-QWP illumination arm and QWP-LP analyzer
//! arm, per-voxel least-squares Mueller recovery, and learned schedules.
//!
//! Capture `i` measures `[A_i H P_i s_illum]_0` with
//! `P_i = Q(theta2) W(theta1)` and `A_i = L(theta4) Q(theta3)`.

mod learn;

pub use learn::{
    analyzer_angles, column_mueller, illumination_angles, learn_schedule, learn_schedule_with, mean_relative_error,
    random_schedule, training_set, uniform_initialization, LearnConfig, LearnOutcome, ScheduleInit, ScheduleLoss,
};

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse, PseudoInverse, Real, SVD_CUTOFF};
use crate::polarization::{element_mueller, ElementKind, MuellerMatrix, StokesVector};
use crate::renderer::{CaptureStack, TransientMuellerCube};

/// Horizontally polarized laser illumination.
pub fn s_illum() -> StokesVector {
    StokesVector([1.0, 1.0, 0.0, 0.0])
}

/// Ordered element angles `(theta1, theta2, theta3, theta4)` in radians:
/// illumination HWP, illumination QWP, analyzer QWP, analyzer LP.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarimetricSchedule {
    pub entries: Vec<[f64; 4]>,
}

impl PolarimetricSchedule {
    pub fn new(entries: Vec<[f64; 4]>) -> Result<Self> {
        let s = Self { entries };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidParam("schedule has no entries".into()));
        }
        if self.entries.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParam("schedule angle is not finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flattened angle vector `[theta1_0, .., theta4_0, theta1_1, ..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.entries.iter().flatten().copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if x.len() % 4 != 0 {
            return Err(Error::shape("multiple of 4 angles", x.len()));
        }
        Self::new(x.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
    }

    /// Stable identifier derived from the angle bits (FNV-1a).
    pub fn identifier(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for a in self.entries.iter().flatten() {
            for b in a.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("schedule-n{}-{h:016x}", self.len())
    }
}

/// Illumination optics `Q(theta2) W(theta1)`.
pub fn illumination_matrix<T: Real>(theta1: T, theta2: T) -> MuellerMatrix<T> {
    element_mueller(ElementKind::QuarterWavePlate, theta2) * element_mueller(ElementKind::HalfWavePlate, theta1)
}

/// Analyzer optics `L(theta4) Q(theta3)`.
pub fn analyzer_matrix<T: Real>(theta3: T, theta4: T) -> MuellerMatrix<T> {
    element_mueller(ElementKind::LinearPolarizer, theta4) * element_mueller(ElementKind::QuarterWavePlate, theta3)
}

/// Linear functional `r` with `r . vec(H) = [A H P s_illum]_0`, where `vec`
/// is row-major: `r[4j + k] = A[0][j] (P s)[k]`.
pub fn measurement_row<T: Real>(entry: &[T; 4], s_illum: &StokesVector<T>) -> [T; 16] {
    let a = analyzer_matrix(entry[2], entry[3]).row(0);
    let p = illumination_matrix(entry[0], entry[1]).apply(s_illum).0;
    std::array::from_fn(|i| a[i / 4] * p[i % 4])
}

/// Stacked measurement rows of a schedule (`N x 16`).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    pub rows: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn new(schedule: &PolarimetricSchedule, s_illum: &StokesVector) -> Self {
        let n = schedule.len();
        let mut rows = DMatrix::zeros(n, 16);
        for (i, e) in schedule.entries.iter().enumerate() {
            for (j, v) in measurement_row(e, s_illum).into_iter().enumerate() {
                rows[(i, j)] = v;
            }
        }
        Self { rows }
    }

    pub fn pseudo_inverse(&self) -> PseudoInverse {
        pseudo_inverse(&self.rows, SVD_CUTOFF)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.rows.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// `sigma_max / sigma_min` of the measurement matrix.
pub fn condition_number(schedule: &PolarimetricSchedule, s_illum: &StokesVector) -> Result<f64> {
    let s = MeasurementMatrix::new(schedule, s_illum).singular_values();
    let rank = s.iter().filter(|&&x| x > SVD_CUTOFF * s[0]).count();
    if s.len() < 16 || rank < 16 {
        return Err(Error::RankDeficient { rank, required: 16 });
    }
    Ok(s[0] / s[15])
}

/// Minimum-norm least-squares Mueller matrix for every voxel of a capture
/// stack. Rank deficiency is reported as a warning only.
pub fn reconstruct_mueller(captures: &CaptureStack, schedule: &PolarimetricSchedule) -> Result<TransientMuellerCube> {
    captures.validate()?;
    if captures.n != schedule.len() {
        return Err(Error::shape(
            format!("{} captures", schedule.len()),
            format!("{} captures", captures.n),
        ));
    }
    let pinv = MeasurementMatrix::new(schedule, &s_illum()).pseudo_inverse();
    if pinv.rank < 16 {
        warn!(
            "measurement matrix has rank {} < 16; returning minimum-norm Mueller estimates",
            pinv.rank
        );
    }
    Ok(apply_pseudo_inverse(captures, &pinv.pinv))
}

/// Applies a precomputed `16 x N` pseudo-inverse to every voxel.
pub fn apply_pseudo_inverse(captures: &CaptureStack, pinv: &DMatrix<f64>) -> TransientMuellerCube {
    let (n, t) = (captures.n, captures.num_bins);
    let mut cube = TransientMuellerCube::zeros(captures.width, captures.height, t, captures.bin_width);
    let stride = cube.pixel_stride();
    cube.data.par_chunks_mut(stride).enumerate().for_each(|(p, out)| {
        let traces: Vec<&[f64]> = (0..n).map(|i| captures.trace(i, p)).collect();
        for k in 0..t {
            let m = &mut out[k * 16..(k + 1) * 16];
            for (i, tr) in traces.iter().enumerate() {
                let y = tr[k];
                if y == 0.0 {
                    continue;
                }
                for (j, mj) in m.iter_mut().enumerate() {
                    *mj += pinv[(j, i)] * y;
                }
            }
        }
    });
    cube
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Dual;
    use crate::polarization::random_physical_mueller;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dot16(r: &[f64; 16], h: &MuellerMatrix) -> f64 {
        r.iter().zip(h.to_vec16()).map(|(a, b)| a * b).sum()
    }

    fn random_entry(rng: &mut impl Rng) -> [f64; 4] {
        std::array::from_fn(|_| rng.random_range(0.0..PI))
    }

    fn stack_for(schedule: &PolarimetricSchedule, voxels: &[MuellerMatrix]) -> CaptureStack {
        let mut st = CaptureStack::zeros(schedule.len(), voxels.len(), 1, 1, 25e-12);
        for (i, e) in schedule.entries.iter().enumerate() {
            let r = measurement_row(e, &s_illum());
            for (p, h) in voxels.iter().enumerate() {
                st.trace_mut(i, p)[0] = dot16(&r, h);
            }
        }
        st
    }

    #[test]
    fn zero_angles_identity_gives_unit_intensity() {
        let r = measurement_row(&[0.0; 4], &s_illum());
        assert!((dot16(&r, &MuellerMatrix::identity()) - 1.0).abs() < 1e-15);
        // same value through the explicit chain of element matrices
        let chain = analyzer_matrix(0.0, 0.0) * illumination_matrix(0.0, 0.0) * s_illum();
        assert!((chain.0[0] - 1.0).abs() < 1e-15);
        assert_eq!(dot16(&r, &MuellerMatrix::zero()), 0.0);
    }

    #[test]
    fn row_matches_explicit_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let e = random_entry(&mut rng);
            let h = random_physical_mueller(&mut rng);
            let direct = (analyzer_matrix(e[2], e[3]) * h * illumination_matrix(e[0], e[1]) * s_illum()).0[0];
            assert!((dot16(&measurement_row(&e, &s_illum()), &h) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn rows_have_rank_one_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let r = measurement_row(&random_entry(&mut rng), &s_illum());
            let m = DMatrix::from_row_slice(4, 4, &r);
            let s = m.singular_values();
            let mut s: Vec<f64> = s.iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            assert!(s[1] <= 1e-12 * s[0].max(1e-300));
        }
    }

    #[test]
    fn hwp_and_lp_angles_have_period_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let e = random_entry(&mut rng);
            let r = measurement_row(&e, &s_illum());
            for idx in [0, 3] {
                let mut f = e;
                f[idx] += PI;
                let g = measurement_row(&f, &s_illum());
                assert!(r.iter().zip(g).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn round_trip_recovers_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let schedule = random_schedule(36, 5);
        let voxels: Vec<MuellerMatrix> = (0..50).map(|_| random_physical_mueller(&mut rng)).collect();
        let cube = reconstruct_mueller(&stack_for(&schedule, &voxels), &schedule).unwrap();
        for (p, h) in voxels.iter().enumerate() {
            let rel = (cube.get(p, 0) - *h).frobenius() / h.frobenius();
            assert!(rel < 1e-9, "{rel}");
        }
    }

    #[test]
    fn zero_captures_give_zero_cube() {
        let schedule = random_schedule(20, 1);
        let st = CaptureStack::zeros(20, 3, 2, 7, 25e-12);
        let cube = reconstruct_mueller(&st, &schedule).unwrap();
        assert!(cube.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn underdetermined_schedule_satisfies_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let schedule = random_schedule(8, 2);
        let h = random_physical_mueller(&mut rng);
        let st = stack_for(&schedule, &[h]);
        let cube = reconstruct_mueller(&st, &schedule).unwrap();
        let est = cube.get(0, 0);
        for (i, e) in schedule.entries.iter().enumerate() {
            let r = measurement_row(e, &s_illum());
            assert!((dot16(&r, &est) - st.trace(i, 0)[0]).abs() < 1e-9);
        }
        assert!((est - h).frobenius() > 1e-3);
    }

    #[test]
    fn reconstruction_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let schedule = random_schedule(20, 3);
        let mut a = CaptureStack::zeros(20, 2, 2, 3, 25e-12);
        let mut b = a.clone();
        a.data.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        b.data.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let (al, be) = (0.7, -2.5);
        let mut c = a.clone();
        c.data = a.data.iter().zip(&b.data).map(|(x, y)| al * x + be * y).collect();
        let (ra, rb, rc) = (
            reconstruct_mueller(&a, &schedule).unwrap(),
            reconstruct_mueller(&b, &schedule).unwrap(),
            reconstruct_mueller(&c, &schedule).unwrap(),
        );
        for i in 0..rc.data.len() {
            assert!((rc.data[i] - (al * ra.data[i] + be * rb.data[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_on_capture_count() {
        let schedule = random_schedule(20, 1);
        let st = CaptureStack::zeros(19, 1, 1, 1, 25e-12);
        assert!(matches!(reconstruct_mueller(&st, &schedule), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn identical_entries_are_rank_deficient() {
        let s = PolarimetricSchedule::new(vec![[0.1, 0.2, 0.3, 0.4]; 16]).unwrap();
        assert!(matches!(
            condition_number(&s, &s_illum()),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }

    #[test]
    fn appending_a_row_interlaces_singular_values() {
        // Appending a row can only raise every singular value, so the extreme
        // singular values are monotone; their ratio is not (see below).
        let base = random_schedule(16, 7);
        let s0 = MeasurementMatrix::new(&base, &s_illum()).singular_values();
        for i in 0..base.len() {
            let mut ext = base.clone();
            ext.entries.push(base.entries[i]);
            let s1 = MeasurementMatrix::new(&ext, &s_illum()).singular_values();
            assert!(s1[0] >= s0[0] - 1e-12 && s1[15] >= s0[15] - 1e-12);
        }
    }

    #[test]
    fn duplicating_an_entry_can_change_the_condition_number_either_way() {
        let base = random_schedule(16, 7);
        let k0 = condition_number(&base, &s_illum()).unwrap();
        let ks: Vec<f64> = (0..base.len())
            .map(|i| {
                let mut ext = base.clone();
                ext.entries.push(base.entries[i]);
                condition_number(&ext, &s_illum()).unwrap()
            })
            .collect();
        assert!(ks.iter().any(|&k| k < k0));
        assert!(ks.iter().any(|&k| k > k0));
    }

    #[test]
    fn noise_amplification_bounded_by_condition_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let schedule = random_schedule(20, 4);
        let mm = MeasurementMatrix::new(&schedule, &s_illum());
        let kappa = condition_number(&schedule, &s_illum()).unwrap();
        let pinv = mm.pseudo_inverse().pinv;
        let noise = rand_distr::Normal::new(0.0, 1e-4).unwrap();
        for _ in 0..100 {
            let h = random_physical_mueller(&mut rng);
            let hv = nalgebra::DVector::from_row_slice(&h.to_vec16());
            let y = &mm.rows * &hv;
            let eps = nalgebra::DVector::from_fn(20, |_, _| rng.sample(noise));
            let err = (&pinv * (&y + &eps) - &hv).norm() / hv.norm();
            assert!(err <= kappa * eps.norm() / y.norm() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dual_row_matches_value_row() {
        let e = [0.3, -1.2, 0.7, 2.1];
        let d = Dual::<4>::vars(&e);
        let s = StokesVector([1.0, 1.0, 0.0, 0.0].map(Dual::<4>::constant));
        let rd = measurement_row(&d, &s);
        let r = measurement_row(&e, &s_illum());
        for j in 0..16 {
            assert!((rd[j].v - r[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn identifier_is_stable_and_sensitive() {
        let a = random_schedule(20, 1);
        let mut b = a.clone();
        assert_eq!(a.identifier(), b.identifier());
        b.entries[3][2] += 1e-9;
        assert_ne!(a.identifier(), b.identifier());
    }
}

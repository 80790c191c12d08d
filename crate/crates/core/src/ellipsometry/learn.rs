//! Gradient-learned acquisition schedules with Poincare-uniform
//! initialization.

use std::f64::consts::{FRAC_PI_2, PI};

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::{analyzer_matrix, condition_number, illumination_matrix, measurement_row, s_illum, MeasurementMatrix, PolarimetricSchedule};
use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse, AdamState, Dual, GradProvider, SVD_CUTOFF};
use crate::polarization::{poincare_uniform_states, random_physical_mueller, MuellerMatrix, StokesVector};

/// Starting point of the angle optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleInit {
    /// Illumination and analyzer states on Poincare-uniform lattices.
    UniformPoincare,
    /// Every angle zero.
    Zeros,
    /// Angles drawn uniformly from `[0, pi)` with the run seed.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnConfig {
    pub n: usize,
    pub iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub init: ScheduleInit,
    /// Number of random Mueller matrices in the training set.
    pub train_size: usize,
    /// Standard deviation of the simulated measurement noise.
    pub noise_sigma: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            n: 20,
            iters: 500,
            lr: 1e-2,
            seed: 0,
            init: ScheduleInit::UniformPoincare,
            train_size: 256,
            noise_sigma: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    /// Best schedule found, angles wrapped to `[0, pi)`.
    pub schedule: PolarimetricSchedule,
    /// `(iteration, loss, best loss so far)` per evaluated iterate.
    pub history: Vec<(usize, f64, f64)>,
    pub initial_loss: f64,
    pub best_loss: f64,
}

/// Fixed training data: Mueller matrices as columns of a `16 x S` matrix and
/// a matching `N x S` noise matrix.
pub fn training_set(n: usize, size: usize, noise_sigma: f64, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::zeros(16, size);
    for s in 0..size {
        let m = random_physical_mueller(&mut rng);
        for (j, v) in m.to_vec16().into_iter().enumerate() {
            h[(j, s)] = v;
        }
    }
    let mut eps = DMatrix::zeros(n, size);
    if noise_sigma > 0.0 {
        let dist = Normal::new(0.0, noise_sigma).expect("finite positive std");
        rng.set_stream(1);
        eps.iter_mut().for_each(|e| *e = rng.sample(dist));
    }
    (h, eps)
}

/// Mean squared reconstruction error `|pinv(M)(M h + eps) - h|^2` over a
/// training set, as a function of the flattened schedule angles.
pub struct ScheduleLoss {
    h: DMatrix<f64>,
    eps: DMatrix<f64>,
}

impl ScheduleLoss {
    pub fn new(h: DMatrix<f64>, eps: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != 16 || h.ncols() != eps.ncols() {
            return Err(Error::shape(
                format!("16 x {} training matrices", eps.ncols()),
                format!("{} x {}", h.nrows(), h.ncols()),
            ));
        }
        Ok(Self { h, eps })
    }

    pub fn n(&self) -> usize {
        self.eps.nrows()
    }

    fn rows(&self, x: &[f64]) -> DMatrix<f64> {
        let s = PolarimetricSchedule {
            entries: x.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
        };
        MeasurementMatrix::new(&s, &s_illum()).rows
    }

    fn residual(&self, m: &DMatrix<f64>, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let y = m * &self.h + &self.eps;
        let r = p * &y - &self.h;
        (y, r)
    }

    /// Gradient of the loss with respect to the measurement matrix, using
    /// the derivative of the pseudo-inverse at constant rank.
    fn grad_rows(&self, m: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let s = self.h.ncols() as f64;
        let p = pseudo_inverse(m, SVD_CUTOFF).pinv;
        let (y, r) = self.residual(m, &p);
        let loss = r.norm_squared() / s;
        let n = m.nrows();
        let py = &p * &y;
        let pt_r = p.transpose() * &r;
        let z = (DMatrix::identity(n, n) - m * &p) * &y;
        let ppt_r = &p * (p.transpose() * &r);
        let ptp_y = p.transpose() * &py;
        let ipm_r = (DMatrix::identity(16, 16) - &p * m).transpose() * &r;
        let g = -&pt_r * py.transpose() + z * ppt_r.transpose() + ptp_y * ipm_r.transpose()
            + &pt_r * self.h.transpose();
        (loss, g * (2.0 / s))
    }
}

impl GradProvider for ScheduleLoss {
    fn dim(&self) -> usize {
        4 * self.n()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.rows(x);
        let p = pseudo_inverse(&m, SVD_CUTOFF).pinv;
        self.residual(&m, &p).1.norm_squared() / self.h.ncols() as f64
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let m = self.rows(x);
        let (loss, g) = self.grad_rows(&m);
        let s = StokesVector(s_illum().0.map(Dual::<4>::constant));
        let mut grad = vec![0.0; x.len()];
        for (i, c) in x.chunks_exact(4).enumerate() {
            let row = measurement_row(&Dual::<4>::vars(&[c[0], c[1], c[2], c[3]]), &s);
            for (k, rk) in row.iter().enumerate() {
                for j in 0..4 {
                    grad[4 * i + j] += g[(i, k)] * rk.g[j];
                }
            }
        }
        (loss, grad)
    }
}

fn stokes_error(a: &[f64; 4], b: &StokesVector) -> f64 {
    a.iter().zip(b.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
}

/// Orientation and ellipticity angles of a fully polarized state.
fn ellipse_angles(s: &StokesVector) -> (f64, f64) {
    let psi = 0.5 * s.0[2].atan2(s.0[1]);
    let chi = 0.5 * (s.0[3] / s.0[0]).clamp(-1.0, 1.0).asin();
    (psi, chi)
}

/// HWP/QWP angles steering the horizontal laser to `target`.
///
/// The QWP axis sets the ellipse orientation and the linear state leaving
/// the HWP sits at the ellipticity angle from it; the sign pairing depends
/// on the handedness convention, so both candidates are evaluated.
pub fn illumination_angles(target: &StokesVector) -> (f64, f64) {
    let (psi, chi) = ellipse_angles(target);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for t2 in [psi, psi + FRAC_PI_2] {
        for alpha in [t2 + chi, t2 - chi] {
            let t1 = 0.5 * alpha;
            let out = illumination_matrix(t1, t2) * s_illum();
            let e = stokes_error(&out.0, target);
            if e < best.0 {
                best = (e, t1, t2);
            }
        }
    }
    (best.1, best.2)
}

/// QWP/LP angles whose analyzer row is `0.5 [1, target]`: the mirrored
/// construction, with the LP playing the role of the linear state.
pub fn analyzer_angles(target: &StokesVector) -> (f64, f64) {
    let (psi, chi) = ellipse_angles(target);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for t3 in [psi, psi + FRAC_PI_2] {
        for t4 in [t3 + chi, t3 - chi] {
            let row = analyzer_matrix(t3, t4).row(0).map(|v| 2.0 * v);
            let e = stokes_error(&row, target);
            if e < best.0 {
                best = (e, t3, t4);
            }
        }
    }
    (best.1, best.2)
}

fn paired_schedule(lattice: &[StokesVector], q: usize) -> PolarimetricSchedule {
    let n = lattice.len();
    let entries = (0..n)
        .map(|i| {
            let (t1, t2) = illumination_angles(&lattice[i]);
            let (t3, t4) = analyzer_angles(&lattice[(q * i) % n]);
            [t1, t2, t3, t4]
        })
        .collect();
    PolarimetricSchedule { entries }
}

/// Multiplier `q` of the analyzer index permutation `i -> q i mod n`: the
/// unit of `Z/n` giving the best-conditioned initial system.
fn analyzer_stride(n: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let lattice = poincare_uniform_states(n);
    (1..n.max(2))
        .filter(|&q| gcd(q, n) == 1)
        .map(|q| {
            let k = condition_number(&paired_schedule(&lattice, q), &s_illum()).unwrap_or(f64::INFINITY);
            (q, k)
        })
        .fold((1, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
        .0
}

/// Schedule whose illumination states and analyzer states each cover the
/// Poincare sphere uniformly. Entry `i` pairs illumination state `i` with
/// analyzer state `q i mod n`: pairing through a fixed isometry of the
/// sphere (e.g. the identity or index reversal) makes every row a quadratic
/// function of one state and leaves the system rank-deficient, so `q` is
/// chosen among the units of `Z/n` by condition number.
pub fn uniform_initialization(n: usize) -> PolarimetricSchedule {
    paired_schedule(&poincare_uniform_states(n), analyzer_stride(n))
}

/// Seeded schedule with angles uniform in `[0, pi)`.
pub fn random_schedule(n: usize, seed: u64) -> PolarimetricSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolarimetricSchedule {
        entries: (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.0..PI))).collect(),
    }
}

fn initial_schedule(cfg: &LearnConfig) -> PolarimetricSchedule {
    match cfg.init {
        ScheduleInit::UniformPoincare => uniform_initialization(cfg.n),
        ScheduleInit::Zeros => PolarimetricSchedule {
            entries: vec![[0.0; 4]; cfg.n],
        },
        ScheduleInit::Random => random_schedule(cfg.n, cfg.seed ^ 0x5eed),
    }
}

/// Learns a schedule of `n` entries with the default configuration.
pub fn learn_schedule(n: usize, iters: usize, seed: u64) -> Result<PolarimetricSchedule> {
    Ok(learn_schedule_with(&LearnConfig {
        n,
        iters,
        seed,
        ..LearnConfig::default()
    })?
    .schedule)
}

/// Adam refinement of the schedule angles on the noisy reconstruction loss,
/// returning the best iterate.
pub fn learn_schedule_with(cfg: &LearnConfig) -> Result<LearnOutcome> {
    if cfg.n < 16 {
        return Err(Error::InvalidParam(format!("schedule length {} < 16", cfg.n)));
    }
    if cfg.iters == 0 || cfg.train_size == 0 || !(cfg.lr > 0.0) || !(cfg.noise_sigma >= 0.0) {
        return Err(Error::InvalidParam(format!("learning configuration {cfg:?}")));
    }
    let (h, eps) = training_set(cfg.n, cfg.train_size, cfg.noise_sigma, cfg.seed);
    let loss = ScheduleLoss::new(h, eps)?;
    let mut x = initial_schedule(cfg).to_flat();
    let mut adam = AdamState::new(x.len(), cfg.lr);
    let mut history = Vec::with_capacity(cfg.iters + 1);
    let mut best = (f64::INFINITY, x.clone());
    let mut initial_loss = f64::NAN;
    for it in 0..=cfg.iters {
        let (l, g) = loss.value_and_grad(&x);
        if it == 0 {
            initial_loss = l;
        }
        if l < best.0 {
            best = (l, x.clone());
        }
        history.push((it, l, best.0));
        if it % 100 == 0 {
            debug!("learn-angles iter {it}: loss {l:.6e} best {:.6e}", best.0);
        }
        if it == cfg.iters {
            break;
        }
        adam.update(&mut x, &g)?;
    }
    let wrapped: Vec<f64> = best.1.iter().map(|a| a.rem_euclid(PI)).collect();
    Ok(LearnOutcome {
        schedule: PolarimetricSchedule::from_flat(&wrapped)?,
        history,
        initial_loss,
        best_loss: best.0,
    })
}

/// Mean relative Frobenius error of reconstructing `h` (columns) from noisy
/// measurements with the given schedule.
pub fn mean_relative_error(schedule: &PolarimetricSchedule, h: &DMatrix<f64>, eps: &DMatrix<f64>) -> f64 {
    let m = MeasurementMatrix::new(schedule, &s_illum());
    let p = m.pseudo_inverse().pinv;
    let est = &p * (&m.rows * h + eps);
    let s = h.ncols();
    (0..s)
        .map(|c| (est.column(c) - h.column(c)).norm() / h.column(c).norm())
        .sum::<f64>()
        / s as f64
}

/// The physical Mueller matrix of column `c` of a training matrix.
pub fn column_mueller(h: &DMatrix<f64>, c: usize) -> MuellerMatrix {
    MuellerMatrix::from_vec16(h.column(c).as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_states_hit_the_lattice() {
        for n in [16, 20, 37] {
            let lattice = poincare_uniform_states(n);
            let sched = uniform_initialization(n);
            for (i, e) in sched.entries.iter().enumerate() {
                let out = illumination_matrix(e[0], e[1]) * s_illum();
                assert!(stokes_error(&out.0, &lattice[i]) < 1e-20, "illum {i}");
                let want = lattice[(analyzer_stride(n) * i) % n];
                let row = analyzer_matrix(e[2], e[3]).row(0).map(|v| 2.0 * v);
                assert!(stokes_error(&row, &want) < 1e-20, "analyzer {i}");
            }
        }
    }

    #[test]
    fn uniform_initialization_is_full_rank() {
        for n in 16..=40 {
            let k = condition_number(&uniform_initialization(n), &s_illum()).unwrap();
            assert!(k.is_finite() && k < 1e3, "n {n}: {k}");
        }
    }

    #[test]
    fn refinement_never_worsens_the_loss() {
        let out = learn_schedule_with(&LearnConfig {
            iters: 60,
            ..LearnConfig::default()
        })
        .unwrap();
        assert!(out.best_loss <= out.initial_loss);
        assert_eq!(out.history.len(), 61);
        assert!(out.history.windows(2).all(|w| w[1].2 <= w[0].2));
        assert_eq!(out.history.last().unwrap().2, out.best_loss);
    }

    #[test]
    fn learning_is_deterministic() {
        let a = learn_schedule(16, 20, 9).unwrap();
        let b = learn_schedule(16, 20, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configuration() {
        assert!(learn_schedule(15, 10, 0).is_err());
        assert!(learn_schedule(16, 0, 0).is_err());
    }
}

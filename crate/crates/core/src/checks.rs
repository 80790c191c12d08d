//! Self-checks of the differentiable models and of the physical invariants:
//! analytic derivatives against central finite differences, physicality of
//! randomized evaluations, microfacet normalization and optical-element
//! identities. Each check returns its worst error so callers choose the
//! tolerance.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brdf::{brdf, ggx_ndf, sample_material, Material, TimeGaussBank};
use crate::ellipsometry::{random_schedule, training_set, ScheduleLoss};
use crate::error::Result;
use crate::inverse::{unconstrain, ClusterMap, ObjectiveContext, SceneParams, WeightConfig, SMOOTH_L1_EPS};
use crate::numerics::{finite_difference, grad_check, relative_errors, Dual, Real};
use crate::polarization::{
    dot, element_mueller, is_physical, lift, normalize, ElementKind, LocalGeometry, MuellerMatrix, Vec3,
};
use crate::renderer::{
    alternate_material, default_material, make_synthetic_scene, render_transient, shift_cube, Camera, Scene,
    SensorConfig, SyntheticKind, TransientMuellerCube,
};

/// Coaxial geometry with a near-axis view ray and a random normal facing it.
pub fn random_coaxial_geometry(rng: &mut impl Rng) -> LocalGeometry {
    let w = normalize(&[rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 1.0]);
    loop {
        let n = normalize(&[
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.2..1.0),
        ]);
        if dot(&n, &w) > 0.1 {
            return LocalGeometry::coaxial(w, n);
        }
    }
}

/// Number of `n` randomized BRDF evaluations whose `M00`-normalized Mueller
/// matrix is not physical at tolerance `tol`.
pub fn brdf_physicality_failures(n: usize, seed: u64, tol: f64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let mat = sample_material(&mut rng);
            let geom = random_coaxial_geometry(&mut rng);
            let tau = rng.random_range(0.0..1e-9);
            match brdf(tau, &geom, &mat) {
                Ok(m) => {
                    let scaled = if m[(0, 0)] > 0.0 { m.scale(1.0 / m[(0, 0)]) } else { m };
                    !is_physical(&scaled, tol)
                }
                Err(_) => true,
            }
        })
        .count()
}

/// Largest `|int D(h) cos(theta_h) dh - 1|` over the given roughness
/// values (midpoint rule, 512 cells in `theta_h`).
pub fn ggx_normalization_error(roughness: &[f64]) -> f64 {
    let n = 512;
    let h = FRAC_PI_2 / n as f64;
    roughness
        .iter()
        .map(|&m| {
            let integral: f64 = (0..n)
                .map(|k| {
                    let t = (k as f64 + 0.5) * h;
                    ggx_ndf(t, m) * t.cos() * t.sin() * h
                })
                .sum::<f64>()
                * 2.0
                * PI;
            (integral - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest entry error of `W_half^2 = I`, `W_quarter^4 = I` and `L^2 = L`
/// over random element angles.
pub fn element_identity_error(trials: usize, seed: u64) -> f64 {
    let id = MuellerMatrix::identity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let t: f64 = rng.random_range(-PI..PI);
            let l = element_mueller(ElementKind::LinearPolarizer, t);
            let w = element_mueller(ElementKind::HalfWavePlate, t);
            let q = element_mueller(ElementKind::QuarterWavePlate, t);
            (l * l)
                .max_abs_diff(&l)
                .max((w * w).max_abs_diff(&id))
                .max((q * q * q * q).max_abs_diff(&id))
        })
        .fold(0.0, f64::max)
}

type D29 = Dual<29>;

/// Material parameters and normal as one flat vector: eta, m, surface
/// (a, mu, sigma), subsurface (a, mu, sigma), normal xyz.
fn brdf_params(mat: &Material, n: &Vec3) -> [f64; 29] {
    let mut x = [0.0; 29];
    x[0] = mat.eta;
    x[1] = mat.m;
    for i in 0..4 {
        x[2 + i] = mat.surface.a[i];
        x[6 + i] = mat.surface.mu[i];
        x[10 + i] = mat.surface.sigma[i];
        x[14 + i] = mat.subsurface.a[i];
        x[18 + i] = mat.subsurface.mu[i];
        x[22 + i] = mat.subsurface.sigma[i];
    }
    x[26..29].copy_from_slice(n);
    x
}

fn material_from<T: Copy>(x: &[T; 29]) -> (Material<T>, [T; 3]) {
    let bank = |o: usize| TimeGaussBank {
        a: std::array::from_fn(|i| x[o + i]),
        mu: std::array::from_fn(|i| x[o + 4 + i]),
        sigma: std::array::from_fn(|i| x[o + 8 + i]),
    };
    (
        Material {
            eta: x[0],
            m: x[1],
            surface: bank(2),
            subsurface: bank(14),
        },
        [x[26], x[27], x[28]],
    )
}

/// Worst relative error between forward-mode derivatives of every BRDF
/// entry (with respect to all material parameters and the normal) and
/// central differences, over `configs` random configurations. Entries whose
/// contribution is negligible at a configuration are skipped: they carry
/// only rounding noise.
pub fn brdf_gradient_error(configs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < configs {
        let mat = sample_material(&mut rng);
        let geom = random_coaxial_geometry(&mut rng);
        // the frame rotation is singular at normal incidence
        if dot(&geom.n, &geom.omega_i) > 0.99 {
            continue;
        }
        let tau = rng.random_range(0.0..700e-12);
        let x0 = brdf_params(&mat, &geom.n);
        let (mat_d, n_d) = material_from(&D29::vars(&x0));
        let gd = LocalGeometry::coaxial(lift::<D29>(&geom.omega_i), n_d);
        let (Ok(out), Ok(base)) = (brdf(D29::cst(tau), &gd, &mat_d), brdf(tau, &geom, &mat)) else {
            return f64::INFINITY;
        };
        let scale = base.max_abs();
        let eval = |x: &[f64; 29]| -> Option<MuellerMatrix> {
            let (m, n) = material_from(x);
            brdf(tau, &LocalGeometry::coaxial(geom.omega_i, n), &m).ok()
        };
        for k in 0..29 {
            let h = 1e-5 * x0[k].abs().max(1e-12);
            let mut xp = x0;
            let mut xm = x0;
            xp[k] += h;
            xm[k] -= h;
            let (Some(fp), Some(fm)) = (eval(&xp), eval(&xm)) else {
                return f64::INFINITY;
            };
            for r in 0..4 {
                for c in 0..4 {
                    let fd = (fp.m[r][c] - fm.m[r][c]) / (2.0 * h);
                    let ad = out.m[r][c].g[k];
                    if (fd.abs() + ad.abs()) * x0[k].abs().max(1e-12) < 1e-7 * scale {
                        continue;
                    }
                    worst = worst.max((ad - fd).abs() / (ad.abs() + fd.abs()));
                }
            }
        }
        checked += 1;
    }
    worst
}

/// Worst relative gradient error of the schedule-learning loss (N = 20,
/// 32 training matrices) at random schedules, one per seed.
pub fn schedule_gradient_error(seeds: std::ops::Range<u64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in seeds {
        let (h, eps) = training_set(20, 32, 1e-4, seed);
        let loss = ScheduleLoss::new(h, eps)?;
        let x = random_schedule(20, 100 + seed).to_flat();
        worst = worst.max(grad_check(&loss, &x, 1e-5));
    }
    Ok(worst)
}

fn two_material_scene(cam: Camera) -> Result<Scene> {
    make_synthetic_scene(
        &SyntheticKind::TwoMaterialBlobs {
            distance: 0.15,
            materials: vec![default_material(), alternate_material()],
        },
        cam,
    )
}

fn measured(scene: &Scene, s: &SensorConfig) -> Result<TransientMuellerCube> {
    shift_cube(&render_transient(scene, s)?, scene, s)
}

/// Random parameters near the generator, with every pixel's sub-bin shift
/// away from the interpolation kinks.
fn perturbed(truth: &SceneParams, rng: &mut ChaCha8Rng, s: &SensorConfig) -> SceneParams {
    loop {
        let mut p = truth.clone();
        for d in p.depth.iter_mut() {
            *d += rng.random_range(-3e-3..3e-3);
        }
        for n in p.normals.iter_mut() {
            let v: Vec3 = std::array::from_fn(|i| n[i] + rng.random_range(-0.1..0.1));
            *n = normalize(&v);
        }
        for m in p.materials.iter_mut() {
            m.eta += rng.random_range(-0.2..0.2);
            m.m = (m.m + rng.random_range(-0.1..0.1)).clamp(0.05, 0.95);
            for b in [&mut m.surface, &mut m.subsurface] {
                let scale = rng.random_range(0.7..1.0);
                for i in 0..4 {
                    b.a[i] *= scale;
                    b.mu[i] *= rng.random_range(0.8..1.2);
                    b.sigma[i] *= rng.random_range(0.8..1.2);
                }
            }
        }
        if p.depth.iter().all(|&d| (0.05..0.95).contains(&s.shift_bins(d).fract())) {
            return p;
        }
    }
}

fn rho(x: f64) -> f64 {
    (x * x + SMOOTH_L1_EPS * SMOOTH_L1_EPS).sqrt() - SMOOTH_L1_EPS
}

/// Worst relative error of the reconstruction-objective gradient (with
/// respect to the unconstrained parameters) against central differences on
/// a 4x4 two-material scene, over `configs` random parameter sets.
///
/// Each measurement is the model at the evaluated parameters plus offsets
/// of random sign and magnitude in `[1e-3, 1e-2]`, which keeps every residual
/// away from the kink of the L1 penalty; the forward value is checked
/// against the known sum of penalties before the gradient is compared.
/// Coordinates whose derivative is numerically zero on both sides are
/// skipped.
pub fn objective_gradient_error(configs: usize, seed: u64) -> Result<f64> {
    let s = SensorConfig {
        num_bins: 48,
        noise_sigma: 0.0,
        ..SensorConfig::default()
    };
    let cam = Camera::with_fov(4, 4, 0.5);
    let scene = two_material_scene(cam)?;
    let clusters = ClusterMap::new(scene.cluster_id.clone(), 2)?;
    let mask = vec![true; 16];
    let truth = SceneParams::from_scene(&scene);
    let w = WeightConfig::default();
    let weights = w.entry_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let p = perturbed(&truth, &mut rng, &s);
        let mut h = measured(&p.to_scene(cam, &scene.cluster_id)?, &s)?;
        let mut expected = 0.0;
        for (i, v) in h.data.iter_mut().enumerate() {
            let u = rng.random_range(1e-3..1e-2) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            *v += u;
            expected += weights[i % 16] * rho(u);
        }
        let ctx = ObjectiveContext {
            h_meas: &h,
            view_dirs: &scene.view_dirs,
            clusters: &clusters,
            mask: &mask,
            weights: w,
            sensor: s,
            freeze_depth: false,
        };
        let x = unconstrain(&p, &ctx.ranges());
        let (v, ad) = ctx.value_and_grad_raw(&x)?;
        if (v.data - expected).abs() > 1e-9 * expected {
            return Ok(f64::INFINITY);
        }
        let fd = finite_difference(&ctx, &x, 1e-4);
        let scale = ad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        let err = relative_errors(&ad, &fd)
            .iter()
            .zip(ad.iter().zip(&fd))
            .filter(|(_, (a, f))| a.abs().max(f.abs()) > 1e-9 * scale)
            .map(|(e, _)| *e)
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    Ok(worst)
}

//! Initialization from the measurement, the Adam loop and material editing.

use log::{debug, info, warn};

use super::{
    kmeans_cluster, normals_from_depth, peak_find, unconstrain, ClusterMap, ConstraintRanges, ObjectiveContext,
    SceneParams, WeightConfig, M_MIN,
};
use crate::brdf::{Material, TimeGaussBank};
use crate::error::{Error, Result};
use crate::numerics::{least_squares, AdamState, SVD_CUTOFF};
use crate::polarization::Vec3;
use crate::renderer::{render_transient, shift_cube, Camera, Scene, SensorConfig, TransientMuellerCube};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructConfig {
    /// Number of material clusters.
    pub k: usize,
    pub iters: usize,
    /// Adam step size on unconstrained coordinates.
    pub lr: f64,
    pub weights: WeightConfig,
    pub seed: u64,
    /// Keep the peak-finding depth fixed and optimize everything else.
    pub freeze_depth: bool,
    /// Iterations at the start during which depth is held fixed so the
    /// materials and normals settle before depth is refined.
    pub depth_warmup: usize,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            k: 3,
            iters: 2000,
            lr: 5e-3,
            weights: WeightConfig::default(),
            seed: 0,
            freeze_depth: false,
            depth_warmup: 300,
        }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidParam(format!("reconstruction configuration {self:?}")));
        }
        self.weights.validate()
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Best iterate in constrained form.
    pub params: SceneParams,
    pub clusters: ClusterMap,
    /// `false` for pixels without a detectable peak.
    pub mask: Vec<bool>,
    /// `(iteration, loss, best loss so far)` per evaluated iterate.
    pub history: Vec<(usize, f64, f64)>,
    pub initial_loss: f64,
    pub best_loss: f64,
}

/// Starting point of the optimization.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub params: SceneParams,
    pub clusters: ClusterMap,
    pub mask: Vec<bool>,
}

fn sensor_check(h_meas: &TransientMuellerCube, camera: &Camera, sensor: &SensorConfig) -> Result<()> {
    sensor.validate()?;
    if (h_meas.width, h_meas.height) != (camera.width, camera.height) {
        return Err(Error::shape(
            format!("{}x{} cube", camera.width, camera.height),
            format!("{}x{}", h_meas.width, h_meas.height),
        ));
    }
    if h_meas.num_bins != sensor.num_bins {
        return Err(Error::shape(format!("{} bins", sensor.num_bins), h_meas.num_bins));
    }
    if !h_meas.is_finite() {
        return Err(Error::InvalidParam("measured cube contains non-finite values".into()));
    }
    Ok(())
}

/// Initial parameters: peak-finding depth, normals from depth, intensity
/// clusters and per-cluster temporal banks.
///
/// The surface lobe starts one bin wide and one bin late; the sub-surface
/// lobe is centered at the energy centroid of the late (two or more bins
/// after the peak) part of each cluster's traces. Amplitudes are fitted per
/// cluster by least squares on `[H]00`.
pub fn initialize(
    h_meas: &TransientMuellerCube,
    camera: &Camera,
    sensor: &SensorConfig,
    k: usize,
    seed: u64,
) -> Result<Initialization> {
    sensor_check(h_meas, camera, sensor)?;
    let n = h_meas.num_pixels();
    let bw = sensor.bin_width;
    let mu_s = bw;
    let sigma_s = bw;
    let traces: Vec<Vec<f64>> = (0..n).map(|p| h_meas.entry_trace(p, 0, 0)).collect();

    let mut depth = vec![f64::NAN; n];
    let mut mask = vec![false; n];
    for p in 0..n {
        // detection on the full trace, localization on its first return
        if let (Ok(_), Ok(d)) = (peak_find(&traces[p], sensor), peak_find(&first_return(&traces[p]), sensor)) {
            depth[p] = d - sensor.c * mu_s / 2.0;
            mask[p] = depth[p] > 0.0;
        }
    }
    let valid: Vec<usize> = (0..n).filter(|&p| mask[p]).collect();
    if valid.is_empty() {
        return Err(Error::NoPeak);
    }
    info!("initialization: {} of {n} pixels have a peak", valid.len());
    let rays = camera.rays();
    let normals: Vec<Vec3> = normals_from_depth(&depth, camera)?
        .into_iter()
        .zip(&rays)
        .map(|(nrm, r)| if nrm[0].is_finite() { nrm } else { r.map(|v| -v) })
        .collect();
    // masked pixels need finite placeholders; they never enter the data term
    let mut sorted: Vec<f64> = valid.iter().map(|&p| depth[p]).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let fill = sorted[sorted.len() / 2];
    for d in depth.iter_mut().filter(|d| !d.is_finite() || **d <= 0.0) {
        *d = fill;
    }

    let means: Vec<f64> = valid
        .iter()
        .map(|&p| traces[p].iter().sum::<f64>() / sensor.num_bins as f64)
        .collect();
    let valid_map = kmeans_cluster(&means, k, seed)?;
    let mut labels = vec![0; n];
    for (i, &p) in valid.iter().enumerate() {
        labels[p] = valid_map.labels[i];
    }
    let clusters = ClusterMap::new(labels, k)?;

    let ranges = ConstraintRanges::from_sensor(sensor);
    let clamp_mu = |mu: f64| mu.clamp(1e-3 * ranges.t_max, (1.0 - 1e-3) * ranges.t_max);
    let clamp_sigma = |s: f64| {
        let span = ranges.sigma_max - ranges.sigma_min;
        s.clamp(ranges.sigma_min + 1e-3 * span, ranges.sigma_min + (1.0 - 1e-3) * span)
    };
    let mut materials = Vec::with_capacity(k);
    for c in 0..k {
        // energy centroid and spread of the late part of the peak-aligned traces
        let (mut e, mut e1, mut e2) = (0.0, 0.0, 0.0);
        for &p in valid.iter().filter(|&&p| clusters.labels[p] == c) {
            let t = &traces[p];
            let kp = argmax(&first_return(t));
            for (j, &v) in t.iter().enumerate().skip(kp + 2) {
                let r = v.max(0.0);
                let dl = (j - kp) as f64;
                e += r;
                e1 += r * dl;
                e2 += r * dl * dl;
            }
        }
        let (centroid, spread) = if e > 0.0 {
            let m1 = e1 / e;
            (m1, (e2 / e - m1 * m1).max(0.0).sqrt())
        } else {
            (4.0, 2.0)
        };
        debug!("cluster {c}: late-energy centroid {centroid:.2} bins, spread {spread:.2} bins");
        materials.push(Material {
            eta: 1.5,
            m: 0.3,
            surface: bank_with_half_channels(1.0, clamp_mu(mu_s), clamp_sigma(sigma_s)),
            subsurface: bank_with_half_channels(1.0, clamp_mu(mu_s + centroid * bw), clamp_sigma(spread * bw)),
        });
    }

    let mut params = SceneParams {
        width: camera.width,
        height: camera.height,
        depth,
        normals,
        materials,
    };
    fit_amplitudes(&mut params, &clusters, &mask, h_meas, camera, sensor)?;
    Ok(Initialization { params, clusters, mask })
}

/// Fraction of the global maximum a local maximum needs to count as the
/// first return.
const FIRST_RETURN_FRACTION: f64 = 0.25;

/// The histogram with everything after its first significant local maximum
/// (plus one bin for the parabolic refinement) zeroed, so a later and
/// stronger sub-surface lobe cannot win the argmax.
fn first_return(hist: &[f64]) -> Vec<f64> {
    let max = hist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = hist.to_vec();
    if !(max > 0.0) {
        return out;
    }
    let n = hist.len();
    for k in 0..n {
        let left = k == 0 || hist[k] >= hist[k - 1];
        let right = k + 1 == n || hist[k] > hist[k + 1];
        if left && right && hist[k] >= FIRST_RETURN_FRACTION * max {
            out[(k + 2).min(n)..].iter_mut().for_each(|v| *v = 0.0);
            break;
        }
    }
    out
}

fn argmax(t: &[f64]) -> usize {
    let mut k = 0;
    for (i, &v) in t.iter().enumerate() {
        if v > t[k] {
            k = i;
        }
    }
    k
}

/// Bank whose sub-dominant amplitudes are half the leading one (the
/// unconstrained origin of the ratio coordinates).
fn bank_with_half_channels(a0: f64, mu: f64, sigma: f64) -> TimeGaussBank {
    TimeGaussBank {
        a: [a0, 0.5 * a0, 0.5 * a0, 0.5 * a0],
        mu: [mu; 4],
        sigma: [sigma; 4],
    }
}

/// Least-squares leading amplitudes of both banks per cluster, fitted on the
/// `[H]00` traces of the cluster's valid pixels.
fn fit_amplitudes(
    params: &mut SceneParams,
    clusters: &ClusterMap,
    mask: &[bool],
    h_meas: &TransientMuellerCube,
    camera: &Camera,
    sensor: &SensorConfig,
) -> Result<()> {
    let render_with = |surface: bool| -> Result<TransientMuellerCube> {
        let mut p = params.clone();
        for m in p.materials.iter_mut() {
            let (a_s, a_ss) = if surface { (1.0, 0.0) } else { (0.0, 1.0) };
            m.surface = bank_with_half_channels(a_s, m.surface.mu[0], m.surface.sigma[0]);
            m.subsurface = bank_with_half_channels(a_ss, m.subsurface.mu[0], m.subsurface.sigma[0]);
        }
        let scene = unmasked_scene(&p, camera, &clusters.labels, mask)?;
        shift_cube(&render_transient(&scene, sensor)?, &scene, sensor)
    };
    let basis_s = render_with(true)?;
    let basis_ss = render_with(false)?;
    for c in 0..clusters.k {
        let pixels: Vec<usize> = (0..mask.len()).filter(|&p| mask[p] && clusters.labels[p] == c).collect();
        let rows = pixels.len() * sensor.num_bins;
        let mut a = nalgebra::DMatrix::zeros(rows, 2);
        let mut b = nalgebra::DVector::zeros(rows);
        for (i, &p) in pixels.iter().enumerate() {
            for j in 0..sensor.num_bins {
                let r = i * sensor.num_bins + j;
                a[(r, 0)] = basis_s.pixel(p)[j * 16];
                a[(r, 1)] = basis_ss.pixel(p)[j * 16];
                b[r] = h_meas.pixel(p)[j * 16];
            }
        }
        let x = least_squares(&a, &b, SVD_CUTOFF);
        let m = &mut params.materials[c];
        let a_s = x[0].max(1e-6);
        let a_ss = x[1].max(1e-3 * a_s);
        m.surface = bank_with_half_channels(a_s, m.surface.mu[0], m.surface.sigma[0]);
        m.subsurface = bank_with_half_channels(a_ss, m.subsurface.mu[0], m.subsurface.sigma[0]);
        debug!("cluster {c}: fitted amplitudes surface {a_s:.4e}, subsurface {a_ss:.4e}");
    }
    Ok(())
}

/// Scene built from parameters where masked or back-facing pixels are given
/// a harmless camera-facing normal (the renderer rejects back-facing pixels).
fn unmasked_scene(params: &SceneParams, camera: &Camera, labels: &[usize], mask: &[bool]) -> Result<Scene> {
    let mut p = params.clone();
    let rays = camera.rays();
    for (i, n) in p.normals.iter_mut().enumerate() {
        let r = rays[i];
        let facing = n[0] * r[0] + n[1] * r[1] + n[2] * r[2] < 0.0;
        if !mask[i] || !facing {
            *n = r.map(|v| -v);
        }
    }
    p.to_scene(*camera, labels)
}

/// Recovers depth, normals and clustered materials from a measured cube by
/// Adam on the weighted L1 objective, returning the best iterate.
pub fn reconstruct_scene(
    h_meas: &TransientMuellerCube,
    camera: &Camera,
    sensor: &SensorConfig,
    cfg: &ReconstructConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    let init = initialize(h_meas, camera, sensor, cfg.k, cfg.seed)?;
    let view_dirs = camera.rays();
    let mut ctx = ObjectiveContext {
        h_meas,
        view_dirs: &view_dirs,
        clusters: &init.clusters,
        mask: &init.mask,
        weights: cfg.weights,
        sensor: *sensor,
        freeze_depth: cfg.freeze_depth,
    };
    ctx.validate()?;
    let ranges = ctx.ranges();
    let mut x = unconstrain(&init.params, &ranges);
    let mut adam = AdamState::new(x.len(), cfg.lr);
    let mut history = Vec::with_capacity(cfg.iters + 1);
    let mut best = (f64::INFINITY, x.clone());
    let mut initial_loss = f64::NAN;
    for it in 0..=cfg.iters {
        ctx.freeze_depth = cfg.freeze_depth || it < cfg.depth_warmup;
        let (v, g) = ctx.value_and_grad_raw(&x)?;
        let l = v.total;
        if it == 0 {
            initial_loss = l;
        }
        if l < best.0 {
            best = (l, x.clone());
        }
        history.push((it, l, best.0));
        if it % 50 == 0 {
            debug!(
                "reconstruct iter {it}: loss {l:.6e} (data {:.6e}, reg {:.6e}) best {:.6e}",
                v.data, v.regularizer, best.0
            );
        }
        if it == cfg.iters {
            break;
        }
        adam.update(&mut x, &g)?;
    }
    info!("reconstruction: loss {initial_loss:.6e} -> {:.6e}", best.0);
    let params = super::constrain(&best.1, camera.width, camera.height, cfg.k, &ranges)?;
    Ok(Reconstruction {
        params,
        clusters: init.clusters,
        mask: init.mask,
        history,
        initial_loss,
        best_loss: best.0,
    })
}

/// Edit of one temporal bank: `a <- scale_a * a`, `mu_i <- shift_mu[i] * mu_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankEdit {
    pub scale_a: f64,
    pub shift_mu: [f64; 4],
}

impl Default for BankEdit {
    fn default() -> Self {
        Self {
            scale_a: 1.0,
            shift_mu: [1.0; 4],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MaterialEdit {
    pub surface: BankEdit,
    pub subsurface: BankEdit,
    /// Replacement roughness.
    pub set_m: Option<f64>,
    /// Cluster to edit; all clusters when `None`.
    pub cluster: Option<usize>,
}

fn edit_bank(bank: &TimeGaussBank, edit: &BankEdit, ranges: &ConstraintRanges) -> TimeGaussBank {
    let mut out = *bank;
    let scale = if edit.scale_a >= 0.0 && edit.scale_a.is_finite() {
        edit.scale_a
    } else {
        warn!("amplitude scale {} out of range, clamped to 0", edit.scale_a);
        0.0
    };
    for i in 0..4 {
        out.a[i] *= scale;
        let mu = bank.mu[i] * edit.shift_mu[i];
        out.mu[i] = if (0.0..=ranges.t_max).contains(&mu) {
            mu
        } else {
            let c = if mu.is_finite() { mu.clamp(0.0, ranges.t_max) } else { bank.mu[i] };
            warn!("edited delay {mu:e} s outside [0, {:e}] s, clamped to {c:e} s", ranges.t_max);
            c
        };
    }
    out
}

/// Applies a material edit; out-of-range values are clamped with a warning.
pub fn edit_material(params: &SceneParams, edit: &MaterialEdit, ranges: &ConstraintRanges) -> Result<SceneParams> {
    if let Some(c) = edit.cluster {
        if c >= params.materials.len() {
            return Err(Error::InvalidParam(format!(
                "cluster {c} out of range ({} materials)",
                params.materials.len()
            )));
        }
    }
    let mut out = params.clone();
    for (c, m) in out.materials.iter_mut().enumerate() {
        if edit.cluster.is_some_and(|e| e != c) {
            continue;
        }
        m.surface = edit_bank(&m.surface, &edit.surface, ranges);
        m.subsurface = edit_bank(&m.subsurface, &edit.subsurface, ranges);
        if let Some(r) = edit.set_m {
            let clamped = if r.is_finite() { r.clamp(M_MIN, 1.0) } else { m.m };
            if clamped != r {
                warn!("roughness {r} outside [{M_MIN}, 1], clamped to {clamped}");
            }
            m.m = clamped;
        }
    }
    Ok(out)
}

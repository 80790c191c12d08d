//! All-photon scene reconstruction: initialization, the constrained
//! parameterization, the weighted L1 objective with its gradient, the Adam
//! loop, and material editing.

mod init;
mod metrics;
mod objective;
mod solve;

pub use init::{kmeans_cluster, normals_from_depth, peak_find, robust_std, ClusterMap};
pub use metrics::{match_clusters, scene_errors, MaterialErrors, SceneErrors};
pub use objective::{objective, ObjectiveContext, ObjectiveValue, SMOOTH_L1_EPS};
pub use solve::{
    edit_material, initialize, reconstruct_scene, BankEdit, Initialization, MaterialEdit, ReconstructConfig,
    Reconstruction,
};

use crate::brdf::{Material, TimeGaussBank};
use crate::error::{Error, Result};
use crate::polarization::{dot, Vec3};
use crate::renderer::{Camera, Scene, SensorConfig};

/// Weights of the data term and the normal-smoothness regularizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightConfig {
    /// Weight of diagonal Mueller entries.
    pub w_diag: f64,
    /// Weight of off-diagonal Mueller entries.
    pub w_offdiag: f64,
    /// Depth-gradient magnitude (meters per pixel) above which the
    /// smoothness penalty is switched off.
    pub edge_threshold: f64,
    pub lambda_reg: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            w_diag: 1.0,
            w_offdiag: 10.0,
            edge_threshold: 0.02,
            lambda_reg: 1e-3,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_diag, self.w_offdiag, self.edge_threshold, self.lambda_reg];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParam(format!("weights {self:?}")));
        }
        Ok(())
    }

    /// Per-entry weights in row-major Mueller order.
    pub fn entry_weights(&self) -> [f64; 16] {
        std::array::from_fn(|e| if e / 4 == e % 4 { self.w_diag } else { self.w_offdiag })
    }
}

/// Value ranges of the temporal bank parameters, derived from the sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintRanges {
    /// Largest representable delay (the time window).
    pub t_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl ConstraintRanges {
    pub fn from_sensor(sensor: &SensorConfig) -> Self {
        let t_max = sensor.window();
        Self {
            t_max,
            sigma_min: sensor.bin_width / 2.0,
            sigma_max: t_max / 4.0,
        }
    }
}

/// Scene parameters in constrained (physical) form.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// One-way distance per pixel (meters).
    pub depth: Vec<f64>,
    pub normals: Vec<Vec3>,
    /// One material per cluster.
    pub materials: Vec<Material>,
}

impl SceneParams {
    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Ground-truth parameters of a synthetic scene.
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            width: scene.width,
            height: scene.height,
            depth: scene.depth.clone(),
            normals: scene.normals.clone(),
            materials: scene.materials.clone(),
        }
    }

    /// Scene for re-rendering, using `labels` as the cluster map.
    pub fn to_scene(&self, camera: Camera, labels: &[usize]) -> Result<Scene> {
        let scene = Scene {
            camera,
            width: self.width,
            height: self.height,
            depth: self.depth.clone(),
            normals: self.normals.clone(),
            cluster_id: labels.to_vec(),
            materials: self.materials.clone(),
            view_dirs: camera.rays(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

/// Offsets of the unconstrained parameter vector: 4 values per pixel
/// (depth, raw normal) followed by 26 per cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub num_pixels: usize,
    pub k: usize,
}

pub const PIXEL_DIM: usize = 4;
pub const CLUSTER_DIM: usize = 26;

impl ParamLayout {
    pub fn dim(&self) -> usize {
        self.num_pixels * PIXEL_DIM + self.k * CLUSTER_DIM
    }

    pub fn pixel(&self, p: usize) -> usize {
        p * PIXEL_DIM
    }

    /// Cluster block: `[eta, m, surface (a0..a3, mu0..mu3, s0..s3), subsurface (..)]`.
    pub fn cluster(&self, c: usize) -> usize {
        self.num_pixels * PIXEL_DIM + c * CLUSTER_DIM
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    (p / (1.0 - p)).ln()
}

fn inv_softplus(y: f64) -> f64 {
    let y = y.max(1e-300);
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp()).ln_1p()
    }
}

pub(crate) const M_MIN: f64 = 1e-3;

fn constrain_bank(raw: &[f64], r: &ConstraintRanges) -> TimeGaussBank {
    let a0 = softplus(raw[0]);
    TimeGaussBank {
        a: std::array::from_fn(|i| if i == 0 { a0 } else { a0 * sigmoid(raw[i]) }),
        mu: std::array::from_fn(|i| r.t_max * sigmoid(raw[4 + i])),
        sigma: std::array::from_fn(|i| r.sigma_min + (r.sigma_max - r.sigma_min) * sigmoid(raw[8 + i])),
    }
}

fn unconstrain_bank(b: &TimeGaussBank, r: &ConstraintRanges, out: &mut [f64]) {
    out[0] = inv_softplus(b.a[0]);
    for i in 1..4 {
        out[i] = if b.a[0] > 0.0 { logit(b.a[i] / b.a[0]) } else { 0.0 };
    }
    for i in 0..4 {
        out[4 + i] = logit(b.mu[i] / r.t_max);
        out[8 + i] = logit((b.sigma[i] - r.sigma_min) / (r.sigma_max - r.sigma_min));
    }
}

/// Constrained material of cluster block `raw` (26 values).
pub fn constrain_material(raw: &[f64], r: &ConstraintRanges) -> Material {
    Material {
        eta: 1.0 + 2.0 * sigmoid(raw[0]),
        m: sigmoid(raw[1]).clamp(M_MIN, 1.0),
        surface: constrain_bank(&raw[2..14], r),
        subsurface: constrain_bank(&raw[14..26], r),
    }
}

pub fn unconstrain_material(m: &Material, r: &ConstraintRanges) -> [f64; CLUSTER_DIM] {
    let mut out = [0.0; CLUSTER_DIM];
    out[0] = logit((m.eta - 1.0) / 2.0);
    out[1] = logit(m.m);
    unconstrain_bank(&m.surface, r, &mut out[2..14]);
    unconstrain_bank(&m.subsurface, r, &mut out[14..26]);
    out
}

/// Maps unconstrained optimizer coordinates to physical parameters.
pub fn constrain(
    raw: &[f64],
    width: usize,
    height: usize,
    k: usize,
    ranges: &ConstraintRanges,
) -> Result<SceneParams> {
    let layout = ParamLayout {
        num_pixels: width * height,
        k,
    };
    if raw.len() != layout.dim() {
        return Err(Error::shape(layout.dim(), raw.len()));
    }
    let mut depth = Vec::with_capacity(layout.num_pixels);
    let mut normals = Vec::with_capacity(layout.num_pixels);
    for p in 0..layout.num_pixels {
        let o = layout.pixel(p);
        depth.push(softplus(raw[o]));
        let v = [raw[o + 1], raw[o + 2], raw[o + 3]];
        let len = dot(&v, &v).sqrt();
        normals.push(if len > 0.0 { v.map(|x| x / len) } else { [0.0, 0.0, -1.0] });
    }
    let materials = (0..k)
        .map(|c| constrain_material(&raw[layout.cluster(c)..layout.cluster(c) + CLUSTER_DIM], ranges))
        .collect();
    Ok(SceneParams {
        width,
        height,
        depth,
        normals,
        materials,
    })
}

/// Inverse of [`constrain`] (normals map to themselves).
pub fn unconstrain(params: &SceneParams, ranges: &ConstraintRanges) -> Vec<f64> {
    let layout = ParamLayout {
        num_pixels: params.num_pixels(),
        k: params.materials.len(),
    };
    let mut raw = vec![0.0; layout.dim()];
    for p in 0..layout.num_pixels {
        let o = layout.pixel(p);
        raw[o] = inv_softplus(params.depth[p]);
        raw[o + 1..o + 4].copy_from_slice(&params.normals[p]);
    }
    for (c, m) in params.materials.iter().enumerate() {
        let o = layout.cluster(c);
        raw[o..o + CLUSTER_DIM].copy_from_slice(&unconstrain_material(m, ranges));
    }
    raw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brdf::sample_bank;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ranges() -> ConstraintRanges {
        ConstraintRanges::from_sensor(&SensorConfig {
            num_bins: 256,
            ..SensorConfig::default()
        })
    }

    #[test]
    fn constraint_examples() {
        let r = ranges();
        let raw = vec![0.0, 0.0, 0.0, 5.0];
        let p = constrain(&[raw, vec![0.0; 26]].concat(), 1, 1, 1, &r).unwrap();
        assert_eq!(p.normals[0], [0.0, 0.0, 1.0]);
        assert_eq!(p.materials[0].eta, 2.0);
        assert_eq!(p.materials[0].m, 0.5);
        assert!((p.depth[0] - 2f64.ln()).abs() < 1e-15);
        // sub-dominant channels are half the leading amplitude at raw 0
        assert_eq!(p.materials[0].surface.a[1], 0.5 * p.materials[0].surface.a[0]);
        assert!(p.materials[0].surface.sigma[0] >= r.sigma_min);
    }

    #[test]
    fn round_trip_is_identity() {
        let r = ranges();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let bank = |rng: &mut ChaCha8Rng, mu: (f64, f64)| {
                let mut b = sample_bank(rng, mu, (30e-12, 200e-12));
                for i in 1..4 {
                    b.a[i] = b.a[i].min(b.a[0]);
                }
                b
            };
            let mut n: Vec3 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let len = dot(&n, &n).sqrt();
            n = n.map(|x| x / len);
            let params = SceneParams {
                width: 1,
                height: 1,
                depth: vec![rng.random_range(0.05..5.0)],
                normals: vec![n],
                materials: vec![Material {
                    eta: rng.random_range(1.05..2.95),
                    m: rng.random_range(0.01..0.99),
                    surface: bank(&mut rng, (101e-12, 400e-12)),
                    subsurface: bank(&mut rng, (400e-12, 2e-9)),
                }],
            };
            let back = constrain(&unconstrain(&params, &r), 1, 1, 1, &r).unwrap();
            let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale;
            assert!(close(back.depth[0], params.depth[0], 1.0));
            assert!((0..3).all(|i| close(back.normals[0][i], n[i], 1.0)));
            let (a, b) = (&back.materials[0], &params.materials[0]);
            assert!(close(a.eta, b.eta, 1.0) && close(a.m, b.m, 1.0));
            for (x, y) in [(&a.surface, &b.surface), (&a.subsurface, &b.subsurface)] {
                for i in 0..4 {
                    assert!(close(x.a[i], y.a[i], 1.0));
                    assert!(close(x.mu[i], y.mu[i], 1e-9));
                    assert!(close(x.sigma[i], y.sigma[i], 1e-9));
                }
            }
        }
    }

    #[test]
    fn entry_weights_split_diagonal() {
        let w = WeightConfig::default().entry_weights();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[5], 1.0);
        assert_eq!(w[1], 10.0);
        assert_eq!(w[15], 1.0);
        assert_eq!(w.iter().filter(|&&x| x == 10.0).count(), 12);
    }
}

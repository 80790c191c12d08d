//! Pixel grids, camera rays and analytic synthetic scenes.

use crate::brdf::{Material, TimeGaussBank};
use crate::error::{Error, Result};
use crate::polarization::{dot, normalize, Vec3};

/// Pinhole camera at the origin looking down +z; x right, y down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal_px: f64,
}

impl Camera {
    /// Camera with the given full horizontal field of view (radians).
    pub fn with_fov(width: usize, height: usize, fov: f64) -> Self {
        Self {
            width,
            height,
            focal_px: width as f64 / (2.0 * (fov / 2.0).tan()),
        }
    }

    /// Unit ray direction (camera to scene) through the centre of pixel
    /// `(x, y)`.
    pub fn ray(&self, x: usize, y: usize) -> Vec3 {
        let u = (x as f64 + 0.5 - self.width as f64 / 2.0) / self.focal_px;
        let v = (y as f64 + 0.5 - self.height as f64 / 2.0) / self.focal_px;
        normalize(&[u, v, 1.0])
    }

    pub fn rays(&self) -> Vec<Vec3> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.ray(x, y))
            .collect()
    }
}

/// Geometry and materials of a coaxially imaged scene.
///
/// `view_dirs` point from the sensor to the scene (`p = d * omega`);
/// front-facing normals satisfy `n . omega < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub camera: Camera,
    pub width: usize,
    pub height: usize,
    /// One-way travel distance per pixel in meters.
    pub depth: Vec<f64>,
    pub normals: Vec<Vec3>,
    pub cluster_id: Vec<usize>,
    pub materials: Vec<Material>,
    pub view_dirs: Vec<Vec3>,
}

impl Scene {
    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Direction from the surface point back to the sensor.
    pub fn to_sensor(&self, p: usize) -> Vec3 {
        self.view_dirs[p].map(|x| -x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_pixels();
        if self.depth.len() != n
            || self.normals.len() != n
            || self.cluster_id.len() != n
            || self.view_dirs.len() != n
        {
            return Err(Error::shape(n, "per-pixel arrays of other lengths"));
        }
        for p in 0..n {
            if !(self.depth[p] > 0.0) {
                return Err(Error::InvalidParam(format!("pixel {p}: depth {}", self.depth[p])));
            }
            let nn = dot(&self.normals[p], &self.normals[p]).sqrt();
            if (nn - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParam(format!("pixel {p}: normal not unit")));
            }
            if self.cluster_id[p] >= self.materials.len() {
                return Err(Error::InvalidParam(format!(
                    "pixel {p}: cluster {} without material",
                    self.cluster_id[p]
                )));
            }
            if dot(&self.normals[p], &self.view_dirs[p]) >= 0.0 {
                return Err(Error::InvalidParam(format!("pixel {p}: back-facing normal")));
            }
        }
        for m in &self.materials {
            m.validate()?;
        }
        Ok(())
    }
}

/// Analytic scene families.
#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticKind {
    /// Plane at `distance` along the optical axis, normal tilted by `tilt`
    /// radians about the camera y axis.
    Plane {
        distance: f64,
        tilt: f64,
        material: Material,
    },
    /// Sphere on the optical axis in front of a fronto-parallel backdrop.
    Sphere {
        center_z: f64,
        radius: f64,
        material: Material,
        backdrop_distance: f64,
        backdrop: Material,
    },
    /// Fronto-parallel plane partitioned into `materials.len()` blobs.
    TwoMaterialBlobs {
        distance: f64,
        materials: Vec<Material>,
    },
}

/// Default dielectric: sharp early surface return and a delayed,
/// increasingly depolarized sub-surface return.
pub fn default_material() -> Material {
    Material {
        eta: 1.5,
        m: 0.5,
        surface: TimeGaussBank {
            a: [4.0, 4.0, 3.5, 3.0],
            mu: [20e-12; 4],
            sigma: [20e-12; 4],
        },
        subsurface: TimeGaussBank {
            a: [0.012, 0.006, 0.006, 0.003],
            mu: [250e-12; 4],
            sigma: [80e-12; 4],
        },
    }
}

/// A second, rougher material with a later, broader sub-surface return.
pub fn alternate_material() -> Material {
    Material {
        eta: 1.35,
        m: 0.55,
        surface: TimeGaussBank {
            a: [5.0, 4.5, 4.0, 3.0],
            mu: [25e-12; 4],
            sigma: [22e-12; 4],
        },
        subsurface: TimeGaussBank {
            a: [0.012, 0.004, 0.004, 0.002],
            mu: [400e-12; 4],
            sigma: [120e-12; 4],
        },
    }
}

fn plane_hit(origin_dist: f64, n: &Vec3, ray: &Vec3) -> Option<f64> {
    // plane through (0, 0, origin_dist) with normal n
    let denom = dot(n, ray);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = n[2] * origin_dist / denom;
    (t > 0.0).then_some(t)
}

fn sphere_hit(center_z: f64, radius: f64, ray: &Vec3) -> Option<f64> {
    let b = ray[2] * center_z;
    let disc = b * b - (center_z * center_z - radius * radius);
    if disc <= 0.0 {
        return None;
    }
    let t = b - disc.sqrt();
    (t > 0.0).then_some(t)
}

/// Builds a scene with analytic depth and normals.
pub fn make_synthetic_scene(kind: &SyntheticKind, camera: Camera) -> Result<Scene> {
    if camera.width == 0 || camera.height == 0 || !(camera.focal_px > 0.0) {
        return Err(Error::InvalidParam(format!("camera {camera:?}")));
    }
    let rays = camera.rays();
    let npx = rays.len();
    let mut depth = vec![0.0; npx];
    let mut normals = vec![[0.0, 0.0, -1.0]; npx];
    let mut cluster_id = vec![0usize; npx];
    let materials;
    match kind {
        SyntheticKind::Plane {
            distance,
            tilt,
            material,
        } => {
            if !(*distance > 0.0) || tilt.abs() >= 1.3 {
                return Err(Error::InvalidParam(format!(
                    "plane distance {distance} / tilt {tilt}"
                )));
            }
            let n = [tilt.sin(), 0.0, -tilt.cos()];
            for (p, ray) in rays.iter().enumerate() {
                let t = plane_hit(*distance, &n, ray)
                    .ok_or_else(|| Error::InvalidParam("plane not visible from every pixel".into()))?;
                depth[p] = t;
                normals[p] = n;
            }
            materials = vec![*material];
        }
        SyntheticKind::Sphere {
            center_z,
            radius,
            material,
            backdrop_distance,
            backdrop,
        } => {
            if !(*radius > 0.0) || *center_z - *radius <= 0.0 || *backdrop_distance <= center_z + radius {
                return Err(Error::InvalidParam(format!(
                    "sphere center {center_z} radius {radius} backdrop {backdrop_distance}"
                )));
            }
            for (p, ray) in rays.iter().enumerate() {
                if let Some(t) = sphere_hit(*center_z, *radius, ray) {
                    let hit = ray.map(|x| x * t);
                    depth[p] = t;
                    normals[p] = normalize(&[hit[0], hit[1], hit[2] - center_z]);
                    cluster_id[p] = 0;
                } else {
                    depth[p] = backdrop_distance / ray[2];
                    normals[p] = [0.0, 0.0, -1.0];
                    cluster_id[p] = 1;
                }
            }
            materials = vec![*material, *backdrop];
        }
        SyntheticKind::TwoMaterialBlobs {
            distance,
            materials: mats,
        } => {
            let k = mats.len();
            if k == 0 || !(*distance > 0.0) || k > npx {
                return Err(Error::InvalidParam(format!("blobs k={k} distance {distance}")));
            }
            // blob seeds on a ring around the image centre; k=1 is a single blob
            let (w, h) = (camera.width as f64, camera.height as f64);
            let seeds: Vec<(f64, f64)> = (0..k)
                .map(|j| {
                    if k == 1 {
                        return (w / 2.0, h / 2.0);
                    }
                    let a = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    (w / 2.0 + 0.3 * w * a.cos(), h / 2.0 + 0.3 * h * a.sin())
                })
                .collect();
            for y in 0..camera.height {
                for x in 0..camera.width {
                    let p = y * camera.width + x;
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let best = seeds
                        .iter()
                        .enumerate()
                        .map(|(j, s)| (j, (px - s.0).powi(2) + (py - s.1).powi(2)))
                        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                    cluster_id[p] = best.0;
                    depth[p] = distance / rays[p][2];
                }
            }
            let mut used = vec![false; k];
            cluster_id.iter().for_each(|&c| used[c] = true);
            if used.iter().any(|u| !u) {
                return Err(Error::InvalidParam(format!(
                    "image too small for {k} blobs"
                )));
            }
            materials = mats.clone();
        }
    }
    let scene = Scene {
        camera,
        width: camera.width,
        height: camera.height,
        depth,
        normals,
        cluster_id,
        materials,
        view_dirs: rays,
    };
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::with_fov(16, 16, 0.5)
    }

    #[test]
    fn plane_facing_camera() {
        let s = make_synthetic_scene(
            &SyntheticKind::Plane {
                distance: 0.5,
                tilt: 0.0,
                material: default_material(),
            },
            cam(),
        )
        .unwrap();
        let c = 8 * 16 + 8;
        for p in 0..s.num_pixels() {
            assert_eq!(s.normals[p], [0.0, 0.0, -1.0]);
            // z coordinate of every hit equals the plane distance
            assert!((s.depth[p] * s.view_dirs[p][2] - 0.5).abs() < 1e-12);
        }
        // near the centre pixel n is almost exactly -omega
        assert!(dot(&s.normals[c], &s.view_dirs[c]) < -0.999);
    }

    #[test]
    fn sphere_boundary_approaches_grazing() {
        let s = make_synthetic_scene(
            &SyntheticKind::Sphere {
                center_z: 0.4,
                radius: 0.1,
                material: default_material(),
                backdrop_distance: 0.6,
                backdrop: alternate_material(),
            },
            Camera::with_fov(64, 64, 0.6),
        )
        .unwrap();
        let min_cos = (0..s.num_pixels())
            .filter(|&p| s.cluster_id[p] == 0)
            .map(|p| -dot(&s.normals[p], &s.view_dirs[p]))
            .fold(1.0, f64::min);
        assert!(min_cos < 0.3, "{min_cos}");
        assert!(s.cluster_id.iter().any(|&c| c == 1));
    }

    #[test]
    fn blobs_use_every_label() {
        let s = make_synthetic_scene(
            &SyntheticKind::TwoMaterialBlobs {
                distance: 0.5,
                materials: vec![default_material(), alternate_material()],
            },
            cam(),
        )
        .unwrap();
        let mut labels = s.cluster_id.clone();
        labels.sort();
        labels.dedup();
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn invalid_params() {
        let bad = SyntheticKind::Plane {
            distance: -1.0,
            tilt: 0.0,
            material: default_material(),
        };
        assert!(matches!(make_synthetic_scene(&bad, cam()), Err(Error::InvalidParam(_))));
        let bad = SyntheticKind::TwoMaterialBlobs {
            distance: 0.5,
            materials: vec![],
        };
        assert!(matches!(make_synthetic_scene(&bad, cam()), Err(Error::InvalidParam(_))));
    }
}

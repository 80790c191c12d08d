//! Initialization: peak-finding depth, normals from depth, and intensity
//! clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::polarization::{cross, dot, normalize, Vec3};
use crate::renderer::{Camera, SensorConfig};

/// Per-pixel integer labels in `[0, k)`, every label used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterMap {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterMap {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut used = vec![false; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidParam(format!("label {l} >= k = {k}")));
            }
            used[l] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidParam("cluster labels are not contiguous".into()));
        }
        Ok(Self { labels, k })
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust standard deviation `1.4826 * MAD` of the histogram.
pub fn robust_std(histogram: &[f64]) -> f64 {
    if histogram.is_empty() {
        return 0.0;
    }
    let mut v = histogram.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = histogram.iter().map(|x| (x - med).abs()).collect();
    1.4826 * median(&mut dev)
}

/// Depth from the histogram peak with parabolic sub-bin refinement.
///
/// The peak must exceed three robust standard deviations of the histogram;
/// ties go to the earliest bin.
pub fn peak_find(histogram: &[f64], sensor: &SensorConfig) -> Result<f64> {
    let floor = 3.0 * robust_std(histogram);
    let (mut k, mut best) = (usize::MAX, f64::NEG_INFINITY);
    for (i, &y) in histogram.iter().enumerate() {
        if y > best {
            best = y;
            k = i;
        }
    }
    if k == usize::MAX || !(best > floor) || !best.is_finite() {
        return Err(Error::NoPeak);
    }
    let mut delta = 0.0;
    if k > 0 && k + 1 < histogram.len() {
        let (a, b, c) = (histogram[k - 1], histogram[k], histogram[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let t = (k as f64 + 0.5 + delta) * sensor.bin_width;
    Ok(sensor.c * t / 2.0)
}

/// Ratio of the two one-sided depth steps above which the larger one is
/// treated as an occlusion edge.
const EDGE_RATIO: f64 = 2.0;

/// Per-pixel normals from a depth map (`NaN` marks invalid depth).
///
/// Each normal is the normalized cross product of the two central-difference
/// tangents of the unprojected point map (one-sided at borders, next to
/// invalid pixels, and across depth discontinuities), oriented toward the
/// camera. Pixels without a valid
/// tangent in either direction get `NaN` normals.
pub fn normals_from_depth(depth: &[f64], camera: &Camera) -> Result<Vec<Vec3>> {
    let (w, h) = (camera.width, camera.height);
    if depth.len() != w * h {
        return Err(Error::shape(w * h, depth.len()));
    }
    let rays = camera.rays();
    let point = |p: usize| -> Option<Vec3> {
        let d = depth[p];
        d.is_finite().then(|| rays[p].map(|r| r * d))
    };
    let tangent = |p: usize, prev: Option<usize>, next: Option<usize>| -> Option<Vec3> {
        let c = point(p)?;
        let a = prev.and_then(point);
        let b = next.and_then(point);
        let (lo, hi) = match (a, b) {
            // across a depth discontinuity, difference toward the smoother side
            (Some(a), Some(b)) => {
                let (ja, jb) = ((depth[p] - depth[prev?]).abs(), (depth[next?] - depth[p]).abs());
                if ja > EDGE_RATIO * jb {
                    (c, b)
                } else if jb > EDGE_RATIO * ja {
                    (a, c)
                } else {
                    (a, b)
                }
            }
            (None, Some(b)) => (c, b),
            (Some(a), None) => (a, c),
            (None, None) => return None,
        };
        Some([hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]])
    };
    let nan = [f64::NAN; 3];
    let mut out = vec![nan; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let tx = tangent(p, (x > 0).then(|| p - 1), (x + 1 < w).then(|| p + 1));
            let ty = tangent(p, (y > 0).then(|| p - w), (y + 1 < h).then(|| p + w));
            if let (Some(tx), Some(ty)) = (tx, ty) {
                let c = cross(&tx, &ty);
                if dot(&c, &c) > 0.0 {
                    let n = normalize(&c);
                    out[p] = if dot(&n, &rays[p]) > 0.0 { n.map(|v| -v) } else { n };
                }
            }
        }
    }
    Ok(out)
}

/// Scalar k-means with k-means++ seeding; labels are ordered by ascending
/// centroid so the partition, not the seeding order, determines the names.
pub fn kmeans_cluster(values: &[f64], k: usize, seed: u64) -> Result<ClusterMap> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("non-finite intensity".into()));
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::InvalidParam(format!(
            "{} distinct values cannot form {k} clusters",
            distinct.len()
        )));
    }
    // Seeding operates on the sorted distinct values so that the result does
    // not depend on pixel order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![distinct[rng.random_range(0..distinct.len())]];
    while centers.len() < k {
        let d2: Vec<f64> = distinct
            .iter()
            .map(|v| centers.iter().map(|c| (v - c).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let mut u = rng.random_range(0.0..1.0) * total;
        let mut pick = d2.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(distinct[pick]);
    }
    let nearest = |v: f64, centers: &[f64]| -> usize {
        (0..centers.len())
            .min_by(|&a, &b| (v - centers[a]).abs().total_cmp(&(v - centers[b]).abs()))
            .unwrap()
    };
    let mut labels: Vec<usize> = values.iter().map(|&v| nearest(v, &centers)).collect();
    for _ in 0..100 {
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for (&v, &l) in values.iter().zip(&labels) {
            sum[l] += v;
            count[l] += 1;
        }
        for j in 0..k {
            if count[j] > 0 {
                centers[j] = sum[j] / count[j] as f64;
            } else {
                // reseed an empty cluster at the point farthest from its centroid
                let far = values
                    .iter()
                    .zip(&labels)
                    .map(|(&v, &l)| (v, (v - centers[l]).abs()))
                    .fold((values[0], -1.0), |a, b| if b.1 > a.1 { b } else { a });
                centers[j] = far.0;
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(v, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rename = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rename[old] = new;
    }
    let labels: Vec<usize> = labels.iter().map(|&l| rename[l]).collect();
    let used: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if used.len() != k {
        // relabel contiguously if a cluster stayed empty
        let map: Vec<usize> = (0..k).map(|l| used.range(..l).count()).collect();
        let k2 = used.len();
        return ClusterMap::new(labels.iter().map(|&l| map[l]).collect(), k2);
    }
    ClusterMap::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::{default_material, make_synthetic_scene, SyntheticKind};

    fn sensor() -> SensorConfig {
        SensorConfig::default()
    }

    #[test]
    fn single_bin_peak_uses_bin_center() {
        let mut h = vec![0.0; 512];
        h[400] = 1.0;
        let d = peak_find(&h, &sensor()).unwrap();
        assert!((d - 299_792_458.0 * 400.5 * 25e-12 / 2.0).abs() < 1e-12);
        assert!((d - 1.50083).abs() < 1e-5);
    }

    #[test]
    fn symmetric_triple_peaks_at_center() {
        let mut h = vec![0.0; 512];
        h[399] = 1.0;
        h[400] = 2.0;
        h[401] = 1.0;
        let d = peak_find(&h, &sensor()).unwrap();
        assert!((d - sensor().c * 400.5 * 25e-12 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn parabolic_refinement_recovers_subbin_peak() {
        let s = sensor();
        let t0 = 123.3;
        let h: Vec<f64> = (0..256).map(|k| (-((k as f64 + 0.5 - t0) / 2.0).powi(2)).exp()).collect();
        let d = peak_find(&h, &s).unwrap();
        assert!((2.0 * d / s.c / s.bin_width - t0).abs() < 0.05);
    }

    #[test]
    fn empty_histogram_has_no_peak() {
        assert!(matches!(peak_find(&[0.0; 64], &sensor()), Err(Error::NoPeak)));
        assert!(matches!(peak_find(&[], &sensor()), Err(Error::NoPeak)));
    }

    #[test]
    fn ties_break_to_earliest_bin() {
        let mut h = vec![0.0; 32];
        h[5] = 1.0;
        h[20] = 1.0;
        let d = peak_find(&h, &sensor()).unwrap();
        assert!((d - sensor().c * 5.5 * 25e-12 / 2.0).abs() < 1e-12);
    }

    fn plane(tilt: f64, camera: Camera) -> crate::renderer::Scene {
        make_synthetic_scene(
            &SyntheticKind::Plane {
                distance: 0.5,
                tilt,
                material: default_material(),
            },
            camera,
        )
        .unwrap()
    }

    fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
        dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn fronto_parallel_plane_normals() {
        let cam = Camera::with_fov(16, 16, 0.5);
        let s = plane(0.0, cam);
        let n = normals_from_depth(&s.depth, &cam).unwrap();
        for p in 0..n.len() {
            assert!(angle_deg(&n[p], &[0.0, 0.0, -1.0]) < 1e-6);
        }
    }

    #[test]
    fn tilted_plane_normals() {
        let cam = Camera::with_fov(32, 32, 0.5);
        let tilt = std::f64::consts::FRAC_PI_4;
        let s = plane(tilt, cam);
        let n = normals_from_depth(&s.depth, &cam).unwrap();
        for y in 1..31 {
            for x in 1..31 {
                let p = y * 32 + x;
                assert!(angle_deg(&n[p], &s.normals[p]) < 0.5);
                assert!((angle_deg(&n[p], &[0.0, 0.0, -1.0]) - 45.0).abs() < 0.5);
            }
        }
    }

    #[test]
    fn sphere_normals_from_analytic_depth() {
        let cam = Camera::with_fov(64, 64, 0.6);
        let s = make_synthetic_scene(
            &SyntheticKind::Sphere {
                center_z: 0.4,
                radius: 0.1,
                material: default_material(),
                backdrop_distance: 0.6,
                backdrop: default_material(),
            },
            cam,
        )
        .unwrap();
        let n = normals_from_depth(&s.depth, &cam).unwrap();
        let errs: Vec<f64> = (0..n.len())
            .filter(|&p| s.cluster_id[p] == 0)
            .map(|p| angle_deg(&n[p], &s.normals[p]))
            .collect();
        // the silhouette rim mixes sphere and backdrop points; the mean over
        // the sphere includes it
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean < 2.0, "{mean}");
    }

    #[test]
    fn invalid_depth_propagates() {
        let cam = Camera::with_fov(3, 3, 0.5);
        let mut d = vec![0.5; 9];
        d[4] = f64::NAN;
        let n = normals_from_depth(&d, &cam).unwrap();
        assert!(n[4][0].is_nan());
        assert!(n[0][0].is_finite());
    }

    #[test]
    fn bimodal_values_split_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let vals: Vec<f64> = truth
            .iter()
            .map(|&t| t as f64 * 10.0 + rng.random_range(-0.5..0.5))
            .collect();
        let c = kmeans_cluster(&vals, 2, 1).unwrap();
        assert_eq!(c.labels, truth);
    }

    #[test]
    fn single_cluster() {
        let c = kmeans_cluster(&[1.0, 2.0, 3.0], 1, 0).unwrap();
        assert_eq!(c.labels, vec![0, 0, 0]);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let vals: Vec<f64> = (0..300).map(|i| (i % 3) as f64 * 4.0 + rng.random_range(0.0..1.0)).collect();
        let a = kmeans_cluster(&vals, 3, 9).unwrap();
        let perm: Vec<usize> = (0..300).rev().collect();
        let pv: Vec<f64> = perm.iter().map(|&i| vals[i]).collect();
        let b = kmeans_cluster(&pv, 3, 9).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(b.labels[j], a.labels[i]);
        }
    }

    #[test]
    fn too_few_distinct_values() {
        assert!(kmeans_cluster(&[1.0, 1.0], 2, 0).is_err());
        assert!(kmeans_cluster(&[1.0], 0, 0).is_err());
    }
}

//! Error measures of a reconstruction against known ground truth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polarization::dot;

use super::SceneParams;

/// Per-cluster material errors after matching each reconstructed cluster
/// to the ground-truth material covering most of its pixels.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MaterialErrors {
    pub cluster: usize,
    /// Index of the matched ground-truth material.
    pub truth: usize,
    pub eta_error: f64,
    pub m_error: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SceneErrors {
    /// Root-mean-square depth error over unmasked pixels (meters).
    pub depth_rmse: f64,
    /// Mean angle between normals over unmasked pixels (degrees).
    pub mean_normal_error_deg: f64,
    pub valid_pixels: usize,
    pub materials: Vec<MaterialErrors>,
}

/// Ground-truth material index that covers the most pixels of each
/// reconstructed cluster (ties go to the lower index).
pub fn match_clusters(labels: &[usize], truth_labels: &[usize], k: usize, k_truth: usize) -> Vec<usize> {
    let mut counts = vec![vec![0usize; k_truth]; k];
    for (&l, &t) in labels.iter().zip(truth_labels) {
        counts[l][t] += 1;
    }
    counts
        .iter()
        .map(|c| (0..k_truth).fold(0, |best, j| if c[j] > c[best] { j } else { best }))
        .collect()
}

pub fn scene_errors(
    recon: &SceneParams,
    labels: &[usize],
    mask: &[bool],
    truth: &SceneParams,
    truth_labels: &[usize],
) -> Result<SceneErrors> {
    let n = truth.num_pixels();
    if recon.num_pixels() != n || labels.len() != n || mask.len() != n || truth_labels.len() != n {
        return Err(Error::shape(n, recon.num_pixels()));
    }
    let (mut se, mut ang, mut count) = (0.0, 0.0, 0usize);
    for p in (0..n).filter(|&p| mask[p]) {
        se += (recon.depth[p] - truth.depth[p]).powi(2);
        ang += dot(&recon.normals[p], &truth.normals[p]).clamp(-1.0, 1.0).acos().to_degrees();
        count += 1;
    }
    let denom = count.max(1) as f64;
    let matched = match_clusters(labels, truth_labels, recon.materials.len(), truth.materials.len());
    let materials = matched
        .iter()
        .enumerate()
        .map(|(c, &t)| MaterialErrors {
            cluster: c,
            truth: t,
            eta_error: recon.materials[c].eta - truth.materials[t].eta,
            m_error: recon.materials[c].m - truth.materials[t].m,
        })
        .collect();
    Ok(SceneErrors {
        depth_rmse: (se / denom).sqrt(),
        mean_normal_error_deg: ang / denom,
        valid_pixels: count,
        materials,
    })
}

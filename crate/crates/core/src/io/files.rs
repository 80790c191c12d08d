//! Schedule files and reconstructed scene-parameter bundles.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::MaterialTable;
use super::tensor::{read_map, write_map};
use crate::ellipsometry::PolarimetricSchedule;
use crate::error::{Error, Result};
use crate::inverse::SceneParams;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    identifier: String,
    units: String,
    /// `[theta1, theta2, theta3, theta4]` per capture.
    entries: Vec<[f64; 4]>,
}

/// Writes a schedule in radians; values use the shortest representation
/// that parses back to the same bits.
pub fn write_schedule(path: &Path, schedule: &PolarimetricSchedule) -> Result<()> {
    let doc = ScheduleDoc {
        identifier: schedule.identifier(),
        units: "rad".into(),
        entries: schedule.entries.clone(),
    };
    let text = toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_schedule(path: &Path) -> Result<PolarimetricSchedule> {
    let text = std::fs::read_to_string(path)?;
    let doc: ScheduleDoc =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let scale = match doc.units.as_str() {
        "rad" => 1.0,
        "deg" => std::f64::consts::PI / 180.0,
        other => return Err(Error::Format(format!("{}: unknown angle unit {other:?}", path.display()))),
    };
    let entries = doc.entries.iter().map(|e| e.map(|a| a * scale)).collect();
    PolarimetricSchedule::new(entries).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    width: usize,
    height: usize,
    /// Map files, relative to the parameter file.
    depth: String,
    normals: String,
    clusters: String,
    materials: Vec<MaterialTable>,
}

/// Scene parameters read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsBundle {
    pub params: SceneParams,
    /// Cluster label per pixel.
    pub labels: Vec<usize>,
    /// `false` where the depth map holds NaN (no detectable return).
    pub mask: Vec<bool>,
}

/// Writes `params.toml` plus `depth.ptof`, `normals.ptof` and
/// `clusters.ptof` into `dir`. Masked pixels get NaN depth and normals.
pub fn write_params(dir: &Path, bundle: &ParamsBundle) -> Result<PathBuf> {
    let p = &bundle.params;
    let n = p.num_pixels();
    if bundle.labels.len() != n || bundle.mask.len() != n || p.depth.len() != n || p.normals.len() != n {
        return Err(Error::shape(n, bundle.labels.len()));
    }
    std::fs::create_dir_all(dir)?;
    let depth: Vec<f64> = (0..n).map(|i| if bundle.mask[i] { p.depth[i] } else { f64::NAN }).collect();
    let normals: Vec<f64> = (0..n)
        .flat_map(|i| if bundle.mask[i] { p.normals[i] } else { [f64::NAN; 3] })
        .collect();
    let labels: Vec<f64> = bundle.labels.iter().map(|&l| l as f64).collect();
    write_map(&dir.join("depth.ptof"), p.width, p.height, 1, "m", &depth)?;
    write_map(&dir.join("normals.ptof"), p.width, p.height, 3, "unit", &normals)?;
    write_map(&dir.join("clusters.ptof"), p.width, p.height, 1, "label", &labels)?;
    let doc = ParamsDoc {
        width: p.width,
        height: p.height,
        depth: "depth.ptof".into(),
        normals: "normals.ptof".into(),
        clusters: "clusters.ptof".into(),
        materials: p.materials.iter().map(MaterialTable::from_material).collect(),
    };
    let path = dir.join("params.toml");
    std::fs::write(&path, toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(path)
}

/// Reads a parameter bundle. Masked pixels come back with the median
/// valid depth and a normal facing the sensor so that the scene stays
/// renderable; callers zero their output using `mask`.
pub fn read_params(path: &Path) -> Result<ParamsBundle> {
    let text = std::fs::read_to_string(path)?;
    let doc: ParamsDoc = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let check = |name: &str, (w, h, c, data): (usize, usize, usize, Vec<f64>), channels: usize| {
        if (w, h, c) != (doc.width, doc.height, channels) {
            return Err(Error::Format(format!(
                "{name}: map is {w}x{h}x{c}, parameter file says {}x{}x{channels}",
                doc.width, doc.height
            )));
        }
        Ok(data)
    };
    let depth = check("depth", read_map(&base.join(&doc.depth))?, 1)?;
    let normals = check("normals", read_map(&base.join(&doc.normals))?, 3)?;
    let labels = check("clusters", read_map(&base.join(&doc.clusters))?, 1)?;
    let k = doc.materials.len();
    let labels: Vec<usize> = labels
        .iter()
        .map(|&l| {
            if l >= 0.0 && l.fract() == 0.0 && (l as usize) < k {
                Ok(l as usize)
            } else {
                Err(Error::Format(format!("cluster label {l} invalid for {k} materials")))
            }
        })
        .collect::<Result<_>>()?;
    let materials = doc
        .materials
        .iter()
        .enumerate()
        .map(|(i, m)| m.to_material(&format!("materials[{i}]")))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mask: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
    let mut valid: Vec<f64> = depth.iter().copied().filter(|d| d.is_finite()).collect();
    valid.sort_by(f64::total_cmp);
    let fill = valid.get(valid.len() / 2).copied().unwrap_or(1.0);
    let depth = depth.iter().map(|&d| if d.is_finite() { d } else { fill }).collect();
    let normals = normals
        .chunks_exact(3)
        .map(|c| {
            if c.iter().all(|v| v.is_finite()) {
                let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                [c[0] / len, c[1] / len, c[2] / len]
            } else {
                [0.0, 0.0, -1.0]
            }
        })
        .collect();
    Ok(ParamsBundle {
        params: SceneParams {
            width: doc.width,
            height: doc.height,
            depth,
            normals,
            materials,
        },
        labels,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::{alternate_material, default_material};

    #[test]
    fn schedule_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let s = PolarimetricSchedule::new(vec![[0.1, 1.0 / 3.0, 2.0, 3.1], [1e-17, 0.7, 0.0, 2.9]]).unwrap();
        let path = dir.path().join("schedule.toml");
        write_schedule(&path, &s).unwrap();
        let back = read_schedule(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.identifier(), s.identifier());
    }

    #[test]
    fn degree_schedules_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "identifier = \"x\"\nunits = \"deg\"\nentries = [[90.0, 0.0, 45.0, 0.0]]\n").unwrap();
        let s = read_schedule(&path).unwrap();
        assert!((s.entries[0][0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        std::fs::write(&path, "units = \"rad\"\nentries = []\n").unwrap();
        assert!(matches!(read_schedule(&path), Err(Error::Format(_))));
    }

    #[test]
    fn params_round_trip_with_mask() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = ParamsBundle {
            params: SceneParams {
                width: 2,
                height: 2,
                depth: vec![0.5, 0.25, 0.75, 0.5],
                normals: vec![[0.0, 0.0, -1.0], [0.6, 0.0, -0.8], [0.0, 0.0, -1.0], [0.0, 0.6, -0.8]],
                materials: vec![default_material(), alternate_material()],
            },
            labels: vec![0, 1, 1, 0],
            mask: vec![true, true, false, true],
        };
        let path = write_params(dir.path(), &bundle).unwrap();
        let back = read_params(&path).unwrap();
        assert_eq!(back.mask, bundle.mask);
        assert_eq!(back.labels, bundle.labels);
        assert_eq!(back.params.materials, bundle.params.materials);
        assert_eq!(back.params.depth, vec![0.5, 0.25, 0.5, 0.5]);
        for (a, b) in back.params.normals.iter().zip(&bundle.params.normals).take(2) {
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-6);
            }
        }
    }
}

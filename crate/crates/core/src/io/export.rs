//! Plot exports: PNG images, CSV tables and JSON render summaries.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::renderer::TransientMuellerCube;

fn image_err(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    } else {
        Error::Format(e.to_string())
    }
}

/// Blue (negative) - white - red (positive) map of `v` in `[-1, 1]`.
fn diverging(v: f64) -> Rgb<u8> {
    let v = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if v >= 0.0 {
        Rgb([255, fade(v), fade(v)])
    } else {
        Rgb([fade(-v), fade(-v), 255])
    }
}

/// Mueller image at one time bin. With `entry = None` the 16 entries are
/// tiled as a 4x4 grid with one-pixel gaps; values are normalized by the
/// largest `|M00|` in the frame so that sign and relative size are visible.
pub fn write_mueller_png(path: &Path, cube: &TransientMuellerCube, bin: usize, entry: Option<usize>) -> Result<()> {
    if bin >= cube.num_bins {
        return Err(Error::Config(format!("plots.bin: {bin} >= num_bins {}", cube.num_bins)));
    }
    if matches!(entry, Some(e) if e >= 16) {
        return Err(Error::Config(format!("plots.entry: {} is not in 0..16", entry.unwrap_or(0))));
    }
    let (w, h) = (cube.width, cube.height);
    let value = |x: usize, y: usize, j: usize| cube.pixel(y * w + x)[bin * 16 + j];
    let scale = (0..w * h)
        .map(|p| value(p % w, p / w, 0).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let img = match entry {
        Some(j) => RgbImage::from_fn(w as u32, h as u32, |x, y| diverging(value(x as usize, y as usize, j) / scale)),
        None => {
            let (gw, gh) = (4 * w + 3, 4 * h + 3);
            RgbImage::from_fn(gw as u32, gh as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                let (tc, tr) = (x / (w + 1), y / (h + 1));
                let (px, py) = (x % (w + 1), y % (h + 1));
                if px == w || py == h {
                    Rgb([64, 64, 64])
                } else {
                    diverging(value(px, py, tr * 4 + tc) / scale)
                }
            })
        }
    };
    img.save(path).map_err(image_err)
}

/// What a per-pixel map encodes, which selects its color mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapStyle {
    /// Grayscale between the finite min and max (NaN black).
    Scalar,
    /// Normals as `0.5 * (n + 1)` in RGB.
    Normal,
    /// Labels with a fixed qualitative palette.
    Label,
}

const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

pub fn write_map_png(path: &Path, width: usize, height: usize, data: &[f64], style: MapStyle) -> Result<()> {
    let channels = if style == MapStyle::Normal { 3 } else { 1 };
    if data.len() != width * height * channels {
        return Err(Error::shape(width * height * channels, data.len()));
    }
    let finite = data.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = RgbImage::from_fn(width as u32, height as u32, |x, y| {
        let p = y as usize * width + x as usize;
        match style {
            MapStyle::Scalar => {
                let v = data[p];
                let g = if v.is_finite() { (255.0 * (v - lo) / span).round() as u8 } else { 0 };
                Rgb([g, g, g])
            }
            MapStyle::Normal => {
                let n = &data[3 * p..3 * p + 3];
                if n.iter().all(|v| v.is_finite()) {
                    Rgb([0, 1, 2].map(|i| (127.5 * (n[i].clamp(-1.0, 1.0) + 1.0)).round() as u8))
                } else {
                    Rgb([0, 0, 0])
                }
            }
            MapStyle::Label => {
                let v = data[p];
                if v.is_finite() && v >= 0.0 {
                    Rgb(PALETTE[v as usize % PALETTE.len()])
                } else {
                    Rgb([0, 0, 0])
                }
            }
        }
    });
    img.save(path).map_err(image_err)
}

/// Temporal profile of one pixel: `time_s` then the 16 entries `m00..m33`.
pub fn write_temporal_csv(path: &Path, cube: &TransientMuellerCube, x: usize, y: usize) -> Result<()> {
    if x >= cube.width || y >= cube.height {
        return Err(Error::Config(format!(
            "plots.pixel: [{x}, {y}] outside {}x{}",
            cube.width, cube.height
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["time_s".to_string()];
    header.extend((0..16).map(|j| format!("m{}{}", j / 4, j % 4)));
    w.write_record(&header).map_err(csv_err)?;
    let trace = cube.pixel(y * cube.width + x);
    for k in 0..cube.num_bins {
        let mut row = vec![format!("{:e}", (k as f64 + 0.5) * cube.bin_width)];
        row.extend(trace[k * 16..k * 16 + 16].iter().map(|v| format!("{v:e}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Optimization history: `iteration, loss, best_loss`.
pub fn write_history_csv(path: &Path, history: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "loss", "best_loss"]).map_err(csv_err)?;
    for (i, l, b) in history {
        w.write_record([i.to_string(), format!("{l:e}"), format!("{b:e}")])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EntryStats {
    /// Row-major Mueller index.
    pub entry: usize,
    pub min: f64,
    pub max: f64,
    /// Sum of squares over all pixels and bins.
    pub energy: f64,
}

/// Numbers describing a rendered cube.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RenderSummary {
    pub width: usize,
    pub height: usize,
    pub num_bins: usize,
    pub bin_width_s: f64,
    pub entries: Vec<EntryStats>,
    /// Sum of squares of the surface-only and sub-surface-only renders.
    pub surface_energy: f64,
    pub subsurface_energy: f64,
    pub total_energy: f64,
}

impl RenderSummary {
    pub fn new(total: &TransientMuellerCube, surface: &TransientMuellerCube, subsurface: &TransientMuellerCube) -> Self {
        let sq = |c: &TransientMuellerCube| c.data.iter().map(|v| v * v).sum::<f64>();
        let entries = (0..16)
            .map(|j| {
                let vals = total.data.iter().skip(j).step_by(16);
                EntryStats {
                    entry: j,
                    min: vals.clone().copied().fold(f64::INFINITY, f64::min),
                    max: vals.clone().copied().fold(f64::NEG_INFINITY, f64::max),
                    energy: vals.map(|v| v * v).sum(),
                }
            })
            .collect();
        Self {
            width: total.width,
            height: total.height,
            num_bins: total.num_bins,
            bin_width_s: total.bin_width,
            entries,
            surface_energy: sq(surface),
            subsurface_energy: sq(subsurface),
            total_energy: sq(total),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_cube() -> TransientMuellerCube {
        let mut c = TransientMuellerCube::zeros(3, 2, 4, 25e-12);
        for (i, v) in c.data.iter_mut().enumerate() {
            *v = ((i % 16) as f64 - 7.5) * (1 + i / 64) as f64;
        }
        c
    }

    #[test]
    fn mueller_grid_has_expected_size() {
        let dir = tempfile::tempdir().unwrap();
        let c = ramp_cube();
        let path = dir.path().join("m.png");
        write_mueller_png(&path, &c, 1, None).unwrap();
        let img = image::open(&path).unwrap();
        assert_eq!((img.width(), img.height()), (4 * 3 + 3, 4 * 2 + 3));
        write_mueller_png(&path, &c, 1, Some(5)).unwrap();
        assert_eq!(image::open(&path).unwrap().width(), 3);
        assert!(matches!(write_mueller_png(&path, &c, 9, None), Err(Error::Config(_))));
    }

    #[test]
    fn temporal_csv_has_one_row_per_bin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_temporal_csv(&path, &ramp_cube(), 2, 1).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        assert_eq!(r.headers().unwrap().len(), 17);
        let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 4);
        let t: f64 = rows[0][0].parse().unwrap();
        assert!((t - 12.5e-12).abs() < 1e-25);
    }

    #[test]
    fn summary_statistics() {
        let c = ramp_cube();
        let zero = TransientMuellerCube::zeros(3, 2, 4, 25e-12);
        let s = RenderSummary::new(&c, &c, &zero);
        assert_eq!(s.entries.len(), 16);
        assert_eq!(s.entries[0].min, -7.5 * 6.0);
        assert_eq!(s.entries[15].max, 7.5 * 6.0);
        assert_eq!(s.surface_energy, s.total_energy);
        assert_eq!(s.subsurface_energy, 0.0);
        let total: f64 = s.entries.iter().map(|e| e.energy).sum();
        assert!((total - s.total_energy).abs() < 1e-9 * total);
    }

    #[test]
    fn maps_render() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        write_map_png(&path, 2, 1, &[0.5, f64::NAN], MapStyle::Scalar).unwrap();
        write_map_png(&path, 1, 1, &[0.0, 0.0, -1.0], MapStyle::Normal).unwrap();
        assert!(write_map_png(&path, 2, 2, &[0.0], MapStyle::Label).is_err());
    }
}

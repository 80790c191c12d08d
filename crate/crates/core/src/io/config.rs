//! Strictly parsed TOML run configuration. Every numeric input of the
//! pipeline lives here; unknown keys are rejected, angles and times carry
//! unit suffixes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::units::{parse_angle, parse_time};
use crate::brdf::{Material, TimeGaussBank};
use crate::ellipsometry::{LearnConfig, ScheduleInit};
use crate::error::{Error, Result};
use crate::inverse::{BankEdit, MaterialEdit, ReconstructConfig, WeightConfig};
use crate::renderer::{alternate_material, default_material, Camera, SensorConfig, SyntheticKind};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory, relative to the configuration file.
    pub out_dir: String,
    pub scene: SceneSection,
    pub sensor: SensorSection,
    pub inputs: InputsSection,
    pub learn: LearnSection,
    pub reconstruct: ReconstructSection,
    pub edit: EditSection,
    pub plots: PlotsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: "out".into(),
            scene: SceneSection::default(),
            sensor: SensorSection::default(),
            inputs: InputsSection::default(),
            learn: LearnSection::default(),
            reconstruct: ReconstructSection::default(),
            edit: EditSection::default(),
            plots: PlotsSection::default(),
        }
    }
}

/// A material preset name (`default`, `alternate`, `zero`) or an explicit
/// table.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum MaterialSpec {
    Preset(String),
    Custom(MaterialTable),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialTable {
    pub eta: f64,
    pub m: f64,
    pub surface: BankTable,
    pub subsurface: BankTable,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BankTable {
    pub a: [f64; 4],
    pub mu: [String; 4],
    pub sigma: [String; 4],
}

impl BankTable {
    pub fn from_bank(b: &TimeGaussBank) -> Self {
        Self {
            a: b.a,
            mu: b.mu.map(super::units::format_time),
            sigma: b.sigma.map(super::units::format_time),
        }
    }

    fn to_bank(&self, key: &str) -> Result<TimeGaussBank> {
        let mut mu = [0.0; 4];
        let mut sigma = [0.0; 4];
        for i in 0..4 {
            mu[i] = parse_time(&format!("{key}.mu[{i}]"), &self.mu[i])?;
            sigma[i] = parse_time(&format!("{key}.sigma[{i}]"), &self.sigma[i])?;
        }
        Ok(TimeGaussBank { a: self.a, mu, sigma })
    }
}

impl MaterialTable {
    pub fn from_material(m: &Material) -> Self {
        Self {
            eta: m.eta,
            m: m.m,
            surface: BankTable::from_bank(&m.surface),
            subsurface: BankTable::from_bank(&m.subsurface),
        }
    }

    pub fn to_material(&self, key: &str) -> Result<Material> {
        let mat = Material {
            eta: self.eta,
            m: self.m,
            surface: self.surface.to_bank(&format!("{key}.surface"))?,
            subsurface: self.subsurface.to_bank(&format!("{key}.subsurface"))?,
        };
        mat.validate().map_err(|e| Error::Config(format!("{key}: {e}")))?;
        Ok(mat)
    }
}

/// Material with every amplitude zero: renders an all-zero cube.
pub fn zero_material() -> Material {
    let mut m = default_material();
    m.surface.a = [0.0; 4];
    m.subsurface.a = [0.0; 4];
    m
}

impl MaterialSpec {
    pub fn resolve(&self, key: &str) -> Result<Material> {
        match self {
            MaterialSpec::Preset(name) => match name.as_str() {
                "default" => Ok(default_material()),
                "alternate" => Ok(alternate_material()),
                "zero" => Ok(zero_material()),
                other => Err(Error::Config(format!(
                    "{key}: unknown material preset {other:?} (default, alternate, zero)"
                ))),
            },
            MaterialSpec::Custom(t) => t.to_material(key),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    /// `plane`, `sphere` or `blobs`.
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub fov: String,
    /// Plane and blob distance along the optical axis (meters).
    pub distance: f64,
    pub tilt: String,
    pub center_z: f64,
    pub radius: f64,
    pub backdrop_distance: f64,
    pub material: MaterialSpec,
    pub backdrop: MaterialSpec,
    /// Blob materials.
    pub materials: Vec<MaterialSpec>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            kind: "plane".into(),
            width: 32,
            height: 32,
            fov: "40deg".into(),
            distance: 0.5,
            tilt: "0.5rad".into(),
            center_z: 0.4,
            radius: 0.1,
            backdrop_distance: 0.55,
            material: MaterialSpec::Preset("default".into()),
            backdrop: MaterialSpec::Preset("alternate".into()),
            materials: vec![
                MaterialSpec::Preset("default".into()),
                MaterialSpec::Preset("alternate".into()),
            ],
        }
    }
}

impl SceneSection {
    pub fn camera(&self) -> Result<Camera> {
        let fov = parse_angle("scene.fov", &self.fov)?;
        if self.width == 0 || self.height == 0 || !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "scene: need width, height >= 1 and 0 < fov < 180deg (got {}x{}, {})",
                self.width, self.height, self.fov
            )));
        }
        Ok(Camera::with_fov(self.width, self.height, fov))
    }

    pub fn kind(&self) -> Result<SyntheticKind> {
        Ok(match self.kind.as_str() {
            "plane" => SyntheticKind::Plane {
                distance: self.distance,
                tilt: parse_angle("scene.tilt", &self.tilt)?,
                material: self.material.resolve("scene.material")?,
            },
            "sphere" => SyntheticKind::Sphere {
                center_z: self.center_z,
                radius: self.radius,
                material: self.material.resolve("scene.material")?,
                backdrop_distance: self.backdrop_distance,
                backdrop: self.backdrop.resolve("scene.backdrop")?,
            },
            "blobs" => SyntheticKind::TwoMaterialBlobs {
                distance: self.distance,
                materials: self
                    .materials
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.resolve(&format!("scene.materials[{i}]")))
                    .collect::<Result<_>>()?,
            },
            other => {
                return Err(Error::Config(format!(
                    "scene.kind: unknown scene {other:?} (plane, sphere, blobs)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub bin_width: String,
    pub num_bins: usize,
    pub noise_sigma: f64,
    pub irf_sigma: String,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self {
            bin_width: super::units::format_time(s.bin_width),
            num_bins: s.num_bins,
            noise_sigma: s.noise_sigma,
            irf_sigma: super::units::format_time(s.irf_sigma),
        }
    }
}

impl SensorSection {
    pub fn sensor(&self) -> Result<SensorConfig> {
        let s = SensorConfig {
            bin_width: parse_time("sensor.bin_width", &self.bin_width)?,
            num_bins: self.num_bins,
            noise_sigma: self.noise_sigma,
            irf_sigma: parse_time("sensor.irf_sigma", &self.irf_sigma)?,
            ..SensorConfig::default()
        };
        s.validate().map_err(|e| Error::Config(format!("sensor: {e}")))?;
        Ok(s)
    }
}

/// Input files, relative to the configuration file.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InputsSection {
    /// Transient Mueller cube (capture, reconstruct-scene, export-plots).
    pub cube: Option<String>,
    /// Capture stack (reconstruct-mueller).
    pub stack: Option<String>,
    /// Schedule file (capture, reconstruct-mueller).
    pub schedule: Option<String>,
    /// Scene parameter file (edit-material, export-plots).
    pub params: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LearnSection {
    pub n: usize,
    pub iters: usize,
    pub lr: f64,
    /// `uniform`, `zeros` or `random`.
    pub init: String,
    pub train_size: usize,
    pub noise_sigma: f64,
}

impl Default for LearnSection {
    fn default() -> Self {
        let c = LearnConfig::default();
        Self {
            n: c.n,
            iters: c.iters,
            lr: c.lr,
            init: "uniform".into(),
            train_size: c.train_size,
            noise_sigma: c.noise_sigma,
        }
    }
}

impl LearnSection {
    pub fn config(&self, seed: u64) -> Result<LearnConfig> {
        let init = match self.init.as_str() {
            "uniform" => ScheduleInit::UniformPoincare,
            "zeros" => ScheduleInit::Zeros,
            "random" => ScheduleInit::Random,
            other => {
                return Err(Error::Config(format!(
                    "learn.init: unknown initialization {other:?} (uniform, zeros, random)"
                )))
            }
        };
        if self.n < 16 || self.iters == 0 || self.train_size == 0 || !(self.lr > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "learn: need n >= 16, iters >= 1, train_size >= 1, lr > 0, noise_sigma >= 0 (got {self:?})"
            )));
        }
        Ok(LearnConfig {
            n: self.n,
            iters: self.iters,
            lr: self.lr,
            seed,
            init,
            train_size: self.train_size,
            noise_sigma: self.noise_sigma,
        })
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub k: usize,
    pub iters: usize,
    pub lr: f64,
    pub freeze_depth: bool,
    pub depth_warmup: usize,
    pub w_diag: f64,
    pub w_offdiag: f64,
    /// Meters per pixel.
    pub edge_threshold: f64,
    pub lambda_reg: f64,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        let c = ReconstructConfig::default();
        Self {
            k: c.k,
            iters: c.iters,
            lr: c.lr,
            freeze_depth: c.freeze_depth,
            depth_warmup: c.depth_warmup,
            w_diag: c.weights.w_diag,
            w_offdiag: c.weights.w_offdiag,
            edge_threshold: c.weights.edge_threshold,
            lambda_reg: c.weights.lambda_reg,
        }
    }
}

impl ReconstructSection {
    pub fn config(&self, seed: u64) -> Result<ReconstructConfig> {
        let c = ReconstructConfig {
            k: self.k,
            iters: self.iters,
            lr: self.lr,
            weights: WeightConfig {
                w_diag: self.w_diag,
                w_offdiag: self.w_offdiag,
                edge_threshold: self.edge_threshold,
                lambda_reg: self.lambda_reg,
            },
            seed,
            freeze_depth: self.freeze_depth,
            depth_warmup: self.depth_warmup,
        };
        c.validate().map_err(|e| Error::Config(format!("reconstruct: {e}")))?;
        Ok(c)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BankEditSection {
    pub scale_a: f64,
    pub shift_mu: [f64; 4],
}

impl Default for BankEditSection {
    fn default() -> Self {
        Self {
            scale_a: 1.0,
            shift_mu: [1.0; 4],
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EditSection {
    pub surface: BankEditSection,
    pub subsurface: BankEditSection,
    pub set_m: Option<f64>,
    pub cluster: Option<usize>,
}

impl EditSection {
    pub fn edit(&self) -> MaterialEdit {
        let bank = |b: &BankEditSection| BankEdit {
            scale_a: b.scale_a,
            shift_mu: b.shift_mu,
        };
        MaterialEdit {
            surface: bank(&self.surface),
            subsurface: bank(&self.subsurface),
            set_m: self.set_m,
            cluster: self.cluster,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PlotsSection {
    /// `mueller_image`, `temporal_profile`, `depth_map`, `normal_map` or
    /// `cluster_map`.
    pub kind: String,
    /// Tensor file (cube for Mueller plots) or parameter file (maps).
    pub input: Option<String>,
    /// Time bin of Mueller images.
    pub bin: usize,
    /// Pixel `[x, y]` of temporal profiles.
    pub pixel: [usize; 2],
    /// Mueller entry (row-major, 0..15); all entries when absent.
    pub entry: Option<usize>,
}

impl Default for PlotsSection {
    fn default() -> Self {
        Self {
            kind: "mueller_image".into(),
            input: None,
            bin: 0,
            pixel: [0, 0],
            entry: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a configuration and returns it with the directory relative
    /// paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

//! Coaxial transient Mueller rendering, time-of-flight shifting, instrument
//! response and noise: the synthetic data source for every experiment.
//!
//! Rendering produces responses in delay coordinates `tau` (bin centers
//! `(k + 0.5) * bin_width`); [`simulate_capture`] moves them to absolute
//! arrival time `t = tau + 2 d / c`.

mod cube;
mod scene;

pub use cube::{CaptureStack, TransientMuellerCube};
pub use scene::{
    alternate_material, default_material, make_synthetic_scene, Camera, Scene, SyntheticKind,
};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::brdf::ReflectanceBasis;
use crate::ellipsometry::{measurement_row, s_illum, PolarimetricSchedule};
use crate::error::{Error, Result};
use crate::numerics::Real;
use crate::polarization::LocalGeometry;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Time-resolved sensor model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorConfig {
    /// Seconds per histogram bin.
    pub bin_width: f64,
    pub num_bins: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    /// Standard deviation of the Gaussian instrument response (0 disables).
    pub irf_sigma: f64,
    pub c: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            bin_width: 25e-12,
            num_bins: 512,
            noise_sigma: 1e-4,
            irf_sigma: 0.0,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0) || self.num_bins == 0 || !(self.noise_sigma >= 0.0) || !(self.irf_sigma >= 0.0)
        {
            return Err(Error::InvalidParam(format!("sensor {self:?}")));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidParam(format!("speed of light {}", self.c)));
        }
        Ok(())
    }

    /// Delay at the center of bin `k`.
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    /// Round-trip travel time of a one-way distance `d`, in bins.
    pub fn shift_bins(&self, d: f64) -> f64 {
        2.0 * d / (self.c * self.bin_width)
    }

    /// Total window duration.
    pub fn window(&self) -> f64 {
        self.bin_width * self.num_bins as f64
    }
}

/// Sub-bin time-of-flight shift `s = n0 + frac` (in bins).
///
/// Shifted bin `k` interpolates the delay response at fractional index
/// `k - s`: `(1 - frac) H[k - n0] + frac H[k - n0 - 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TofShift {
    pub n0: i64,
    pub frac: f64,
}

impl TofShift {
    pub fn from_bins(s: f64) -> Self {
        let n0 = s.floor();
        Self {
            n0: n0 as i64,
            frac: s - n0,
        }
    }

    pub fn from_depth(d: f64, sensor: &SensorConfig) -> Self {
        Self::from_bins(sensor.shift_bins(d))
    }
}

/// Shifts `channels`-interleaved traces (`[bins][channels]`) from delay to
/// absolute time. Returns true when signal above `1e-6` of the trace peak
/// fell outside the window (far Gaussian tails are not worth a warning).
pub fn shift_trace<T: Real>(src: &[T], channels: usize, shift: TofShift, dst: &mut [T]) -> bool {
    let bins = src.len() / channels;
    dst.iter_mut().for_each(|x| *x = T::zero());
    let floor = 1e-6 * src.iter().map(|v| v.value().abs()).fold(0.0, f64::max);
    let w0 = T::cst(1.0 - shift.frac);
    let w1 = T::cst(shift.frac);
    let mut truncated = false;
    for j in 0..bins {
        let row = &src[j * channels..(j + 1) * channels];
        for (tap, w) in [(0i64, w0), (1, w1)] {
            let k = j as i64 + shift.n0 + tap;
            if w.value() == 0.0 {
                continue;
            }
            if k < 0 || k >= bins as i64 {
                truncated |= row.iter().any(|v| v.value().abs() > floor);
                continue;
            }
            let out = &mut dst[k as usize * channels..(k as usize + 1) * channels];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * *v;
            }
        }
    }
    truncated
}

/// Derivative of [`shift_trace`] with respect to the fractional shift:
/// bin `k` receives `H[k - n0 - 1] - H[k - n0]`.
pub fn shift_trace_dfrac(src: &[f64], channels: usize, shift: TofShift, dst: &mut [f64]) {
    let bins = src.len() / channels;
    dst.iter_mut().for_each(|x| *x = 0.0);
    for j in 0..bins {
        let row = &src[j * channels..(j + 1) * channels];
        for (tap, w) in [(0i64, -1.0), (1, 1.0)] {
            let k = j as i64 + shift.n0 + tap;
            if k < 0 || k >= bins as i64 {
                continue;
            }
            let out = &mut dst[k as usize * channels..(k as usize + 1) * channels];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}

/// Normalized Gaussian instrument-response taps, truncated at 4 sigma.
pub fn irf_kernel(irf_sigma: f64, bin_width: f64) -> Vec<f64> {
    if irf_sigma <= 0.0 {
        return vec![1.0];
    }
    let sb = irf_sigma / bin_width;
    let half = (4.0 * sb).ceil() as i64;
    let mut k: Vec<f64> = (-half..=half).map(|j| (-(j as f64).powi(2) / (2.0 * sb * sb)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= s);
    k
}

/// Same-length convolution with a centered odd kernel (zero padding).
pub fn convolve(trace: &[f64], kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let n = trace.len() as i64;
    (0..n)
        .map(|k| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(j, w)| {
                    let src = k + half - j as i64;
                    (0..n).contains(&src).then(|| w * trace[src as usize])
                })
                .sum()
        })
        .collect()
}

/// Renders the delay-domain transient Mueller cube and reports the number
/// of pixels zeroed because of grazing (or otherwise invalid) geometry.
pub fn render_transient_counted(scene: &Scene, sensor: &SensorConfig) -> Result<(TransientMuellerCube, usize)> {
    scene.validate()?;
    sensor.validate()?;
    let mut cube = TransientMuellerCube::zeros(scene.width, scene.height, sensor.num_bins, sensor.bin_width);
    let stride = cube.pixel_stride();
    let taus: Vec<f64> = (0..sensor.num_bins).map(|k| sensor.bin_center(k)).collect();
    let zeroed: usize = cube
        .data
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(p, out)| {
            let mat = &scene.materials[scene.cluster_id[p]];
            let geom = LocalGeometry::coaxial(scene.to_sensor(p), scene.normals[p]);
            match ReflectanceBasis::new(&geom, mat.eta, mat.m) {
                Ok(basis) => {
                    for (k, &tau) in taus.iter().enumerate() {
                        let h = basis.evaluate(mat.surface.values(tau), mat.subsurface.values(tau));
                        out[k * 16..(k + 1) * 16].copy_from_slice(&h.to_vec16());
                    }
                    0
                }
                Err(_) => 1,
            }
        })
        .sum();
    if zeroed > 0 {
        warn!("{zeroed} pixel(s) at grazing geometry rendered as zero");
    }
    Ok((cube, zeroed))
}

/// Renders the delay-domain transient Mueller cube of a scene.
pub fn render_transient(scene: &Scene, sensor: &SensorConfig) -> Result<TransientMuellerCube> {
    Ok(render_transient_counted(scene, sensor)?.0)
}

fn check_cube(cube: &TransientMuellerCube, scene: &Scene, sensor: &SensorConfig) -> Result<()> {
    if cube.width != scene.width || cube.height != scene.height {
        return Err(Error::shape(
            format!("{}x{} cube", scene.width, scene.height),
            format!("{}x{}", cube.width, cube.height),
        ));
    }
    if cube.data.len() != cube.num_pixels() * cube.pixel_stride() {
        return Err(Error::shape(cube.num_pixels() * cube.pixel_stride(), cube.data.len()));
    }
    if (cube.bin_width - sensor.bin_width).abs() > 1e-9 * sensor.bin_width {
        return Err(Error::InvalidParam(format!(
            "cube bin width {} differs from sensor bin width {}",
            cube.bin_width, sensor.bin_width
        )));
    }
    Ok(())
}

/// Moves every pixel of a delay-domain cube to absolute time using the
/// scene depth (no IRF, no noise).
pub fn shift_cube(cube: &TransientMuellerCube, scene: &Scene, sensor: &SensorConfig) -> Result<TransientMuellerCube> {
    check_cube(cube, scene, sensor)?;
    let mut out = TransientMuellerCube::zeros(cube.width, cube.height, cube.num_bins, cube.bin_width);
    let stride = out.pixel_stride();
    let truncated: usize = out
        .data
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(p, dst)| shift_trace(cube.pixel(p), 16, TofShift::from_depth(scene.depth[p], sensor), dst) as usize)
        .sum();
    if truncated > 0 {
        warn!("{truncated} pixel(s) shifted past the time window were truncated");
    }
    Ok(out)
}

/// Simulates the ellipsometric capture stack of a delay-domain cube:
/// measurement projection per schedule entry, time-of-flight shift,
/// instrument response and additive Gaussian noise.
pub fn simulate_capture(
    cube: &TransientMuellerCube,
    scene: &Scene,
    schedule: &PolarimetricSchedule,
    sensor: &SensorConfig,
    seed: u64,
) -> Result<CaptureStack> {
    schedule.validate()?;
    sensor.validate()?;
    check_cube(cube, scene, sensor)?;
    let n = schedule.len();
    let t = cube.num_bins;
    let rows: Vec<[f64; 16]> = schedule.entries.iter().map(|e| measurement_row(e, &s_illum())).collect();
    let kernel = irf_kernel(sensor.irf_sigma, sensor.bin_width);
    let noise = Normal::new(0.0, sensor.noise_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let per_pixel: Vec<(Vec<f64>, bool)> = (0..cube.num_pixels())
        .into_par_iter()
        .map(|p| {
            let h = cube.pixel(p);
            let shift = TofShift::from_depth(scene.depth[p], sensor);
            let mut out = vec![0.0; n * t];
            let mut delay = vec![0.0; t];
            let mut truncated = false;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            for (i, r) in rows.iter().enumerate() {
                for (k, d) in delay.iter_mut().enumerate() {
                    *d = r.iter().zip(&h[k * 16..(k + 1) * 16]).map(|(a, b)| a * b).sum();
                }
                let dst = &mut out[i * t..(i + 1) * t];
                truncated |= shift_trace(&delay, 1, shift, dst);
                if kernel.len() > 1 {
                    let conv = convolve(dst, &kernel);
                    dst.copy_from_slice(&conv);
                }
                if sensor.noise_sigma > 0.0 {
                    dst.iter_mut().for_each(|x| *x += rng.sample(noise));
                }
            }
            (out, truncated)
        })
        .collect();
    let mut stack = CaptureStack::zeros(n, cube.width, cube.height, t, cube.bin_width);
    stack.schedule_ref = schedule.identifier();
    let mut truncated = 0;
    for (p, (vals, tr)) in per_pixel.into_iter().enumerate() {
        truncated += tr as usize;
        for i in 0..n {
            stack.trace_mut(i, p).copy_from_slice(&vals[i * t..(i + 1) * t]);
        }
    }
    if truncated > 0 {
        warn!("{truncated} pixel(s) shifted past the time window were truncated");
    }
    Ok(stack)
}

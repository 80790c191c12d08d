//! Dense tensors produced by rendering and capture.

use crate::error::{Error, Result};
use crate::polarization::MuellerMatrix;

/// Per-pixel, per-bin Mueller matrices, laid out `[height][width][bins][4][4]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransientMuellerCube {
    pub width: usize,
    pub height: usize,
    pub num_bins: usize,
    /// Seconds per bin.
    pub bin_width: f64,
    pub data: Vec<f64>,
}

impl TransientMuellerCube {
    pub fn zeros(width: usize, height: usize, num_bins: usize, bin_width: f64) -> Self {
        Self {
            width,
            height,
            num_bins,
            bin_width,
            data: vec![0.0; width * height * num_bins * 16],
        }
    }

    pub fn from_data(width: usize, height: usize, num_bins: usize, bin_width: f64, data: Vec<f64>) -> Result<Self> {
        let n = width * height * num_bins * 16;
        if data.len() != n {
            return Err(Error::shape(n, data.len()));
        }
        Ok(Self {
            width,
            height,
            num_bins,
            bin_width,
            data,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Values per pixel (`num_bins * 16`).
    pub fn pixel_stride(&self) -> usize {
        self.num_bins * 16
    }

    /// All bins of pixel `p` (row-major pixel index), `[bins][16]`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        let s = self.pixel_stride();
        &self.data[p * s..(p + 1) * s]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        let s = self.pixel_stride();
        &mut self.data[p * s..(p + 1) * s]
    }

    /// Mueller matrix of pixel `p` at bin `k`.
    pub fn get(&self, p: usize, k: usize) -> MuellerMatrix {
        let o = (p * self.num_bins + k) * 16;
        MuellerMatrix::from_vec16(&self.data[o..o + 16])
    }

    pub fn set(&mut self, p: usize, k: usize, m: &MuellerMatrix) {
        let o = (p * self.num_bins + k) * 16;
        self.data[o..o + 16].copy_from_slice(&m.to_vec16());
    }

    /// Time trace of Mueller entry `(r, c)` at pixel `p`.
    pub fn entry_trace(&self, p: usize, r: usize, c: usize) -> Vec<f64> {
        self.pixel(p).chunks_exact(16).map(|m| m[r * 4 + c]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Captured intensities, laid out `[N][height][width][bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptureStack {
    pub n: usize,
    pub width: usize,
    pub height: usize,
    pub num_bins: usize,
    pub bin_width: f64,
    /// Identifier of the schedule that produced the stack.
    pub schedule_ref: String,
    pub data: Vec<f64>,
}

impl CaptureStack {
    pub fn zeros(n: usize, width: usize, height: usize, num_bins: usize, bin_width: f64) -> Self {
        Self {
            n,
            width,
            height,
            num_bins,
            bin_width,
            schedule_ref: String::new(),
            data: vec![0.0; n * width * height * num_bins],
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Intensity trace of schedule entry `i` at pixel `p`.
    pub fn trace(&self, i: usize, p: usize) -> &[f64] {
        let o = (i * self.num_pixels() + p) * self.num_bins;
        &self.data[o..o + self.num_bins]
    }

    pub fn trace_mut(&mut self, i: usize, p: usize) -> &mut [f64] {
        let o = (i * self.num_pixels() + p) * self.num_bins;
        &mut self.data[o..o + self.num_bins]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("capture stack with zero captures".into()));
        }
        let len = self.n * self.num_pixels() * self.num_bins;
        if self.data.len() != len {
            return Err(Error::shape(len, self.data.len()));
        }
        Ok(())
    }
}

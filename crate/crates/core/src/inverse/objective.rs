//! Weighted smoothed-L1 data term, normal-smoothness regularizer and their
//! gradient with respect to the unconstrained parameters.
//!
//! The forward model of pixel `p` is the basis decomposition
//! `H(tau) = sum_q c_q(tau) B_q(n, eta, m)` (four surface rows and four
//! sub-surface channels), shifted to absolute time by two-tap interpolation.
//! Basis derivatives come from forward-mode duals over
//! `(n_raw, eta_raw, m_raw)`; the temporal Gaussians, the shift and the
//! constraint maps are differentiated in closed form.

use rayon::prelude::*;

use super::{
    constrain, sigmoid, ClusterMap, ConstraintRanges, ParamLayout, SceneParams, WeightConfig, CLUSTER_DIM, M_MIN,
    PIXEL_DIM,
};
use crate::brdf::{Material, ReflectanceBasis};
use crate::error::{Error, Result};
use crate::numerics::{Dual, GradProvider, Real};
use crate::polarization::{LocalGeometry, Vec3};
use crate::renderer::{shift_trace, SensorConfig, TofShift, TransientMuellerCube};

/// Smoothing of the L1 data term: `rho(x) = sqrt(x^2 + eps^2) - eps`.
pub const SMOOTH_L1_EPS: f64 = 1e-8;

fn rho(x: f64) -> f64 {
    (x * x + SMOOTH_L1_EPS * SMOOTH_L1_EPS).sqrt() - SMOOTH_L1_EPS
}

fn rho_prime(x: f64) -> f64 {
    x / (x * x + SMOOTH_L1_EPS * SMOOTH_L1_EPS).sqrt()
}

/// Data term, regularizer and weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub data: f64,
    pub regularizer: f64,
    pub total: f64,
}

/// Everything the objective needs besides the parameters.
#[derive(Clone, Copy)]
pub struct ObjectiveContext<'a> {
    pub h_meas: &'a TransientMuellerCube,
    /// Per-pixel ray directions (sensor to scene).
    pub view_dirs: &'a [Vec3],
    pub clusters: &'a ClusterMap,
    /// `false` marks pixels excluded from the data term.
    pub mask: &'a [bool],
    pub weights: WeightConfig,
    pub sensor: SensorConfig,
    pub freeze_depth: bool,
}

/// Temporal coefficient tables of one cluster: 8 channels (4 surface, 4
/// sub-surface) sampled at the delay bin centers.
struct BankTables {
    coef: Vec<[f64; 8]>,
    /// `dc/da`, `dc/dmu`, `dc/dsigma` per bin and channel.
    d_a: Vec<[f64; 8]>,
    d_mu: Vec<[f64; 8]>,
    d_sigma: Vec<[f64; 8]>,
}

impl BankTables {
    fn new(mat: &Material, sensor: &SensorConfig, bins: usize, with_grad: bool) -> Self {
        let banks = [&mat.surface, &mat.subsurface];
        let mut t = Self {
            coef: vec![[0.0; 8]; bins],
            d_a: Vec::new(),
            d_mu: Vec::new(),
            d_sigma: Vec::new(),
        };
        if with_grad {
            t.d_a = vec![[0.0; 8]; bins];
            t.d_mu = vec![[0.0; 8]; bins];
            t.d_sigma = vec![[0.0; 8]; bins];
        }
        for j in 0..bins {
            let tau = sensor.bin_center(j);
            for q in 0..8 {
                let b = banks[q / 4];
                let i = q % 4;
                let z = (tau - b.mu[i]) / b.sigma[i];
                let e = (-0.5 * z * z).exp();
                let c = b.a[i] * e;
                t.coef[j][q] = c;
                if with_grad {
                    t.d_a[j][q] = e;
                    t.d_mu[j][q] = c * z / b.sigma[i];
                    t.d_sigma[j][q] = c * z * z / b.sigma[i];
                }
            }
        }
        t
    }
}

/// Eight 16-entry basis matrices of a pixel.
type Basis = [[f64; 16]; 8];

fn basis_values<T: Real>(b: &ReflectanceBasis<T>) -> [[T; 16]; 8] {
    std::array::from_fn(|q| {
        if q < 4 {
            let mut out = [T::zero(); 16];
            out[q * 4..q * 4 + 4].copy_from_slice(&b.surface.m[q]);
            out
        } else {
            b.subsurface_channel(q - 4).to_vec16()
        }
    })
}

/// Per-pixel gradient pieces before reduction.
#[derive(Clone)]
struct PixelGrad {
    loss: f64,
    /// d/d(depth) of the data term.
    d_depth: f64,
    /// d/d(basis entries).
    d_basis: Basis,
    /// d/d(a, mu, sigma) of the 8 channels.
    d_bank: [[f64; 3]; 8],
}

/// Data term of one pixel and, optionally, its gradient pieces.
fn pixel_term(
    basis: &Basis,
    tables: &BankTables,
    shift: TofShift,
    meas: &[f64],
    w: &[f64; 16],
    with_grad: bool,
) -> PixelGrad {
    let bins = tables.coef.len();
    let mut delay = vec![0.0; bins * 16];
    for j in 0..bins {
        let c = &tables.coef[j];
        let h = &mut delay[j * 16..(j + 1) * 16];
        for q in 0..8 {
            if c[q] == 0.0 {
                continue;
            }
            for e in 0..16 {
                h[e] += c[q] * basis[q][e];
            }
        }
    }
    let mut model = vec![0.0; bins * 16];
    shift_trace(&delay, 16, shift, &mut model);
    let mut loss = 0.0;
    let mut g = vec![0.0; bins * 16];
    for (idx, (m, y)) in model.iter().zip(meas).enumerate() {
        let r = m - y;
        let we = w[idx % 16];
        loss += we * rho(r);
        g[idx] = we * rho_prime(r);
    }
    let mut out = PixelGrad {
        loss,
        d_depth: 0.0,
        d_basis: [[0.0; 16]; 8],
        d_bank: [[0.0; 3]; 8],
    };
    if !with_grad {
        return out;
    }
    // adjoint of the shift: delay bin j feeds absolute bins j+n0 (1-f) and j+n0+1 (f)
    let f = shift.frac;
    let at = |k: i64| -> Option<&[f64]> {
        (k >= 0 && (k as usize) < bins).then(|| &g[k as usize * 16..(k as usize + 1) * 16])
    };
    let mut d_frac = 0.0;
    let mut gj = [0.0; 16];
    for j in 0..bins {
        let k0 = j as i64 + shift.n0;
        let (g0, g1) = (at(k0), at(k0 + 1));
        if g0.is_none() && g1.is_none() {
            continue;
        }
        gj.iter_mut().for_each(|x| *x = 0.0);
        let h = &delay[j * 16..(j + 1) * 16];
        if let Some(g0) = g0 {
            for e in 0..16 {
                gj[e] += (1.0 - f) * g0[e];
                d_frac -= g0[e] * h[e];
            }
        }
        if let Some(g1) = g1 {
            for e in 0..16 {
                gj[e] += f * g1[e];
                d_frac += g1[e] * h[e];
            }
        }
        let c = &tables.coef[j];
        for q in 0..8 {
            let dc: f64 = (0..16).map(|e| gj[e] * basis[q][e]).sum();
            out.d_bank[q][0] += dc * tables.d_a[j][q];
            out.d_bank[q][1] += dc * tables.d_mu[j][q];
            out.d_bank[q][2] += dc * tables.d_sigma[j][q];
            if c[q] != 0.0 {
                for e in 0..16 {
                    out.d_basis[q][e] += c[q] * gj[e];
                }
            }
        }
    }
    out.d_depth = d_frac;
    out
}

/// Forward-difference normal smoothness with the depth-edge mask. Returns
/// the penalty and, optionally, its gradient with respect to each normal.
fn regularizer(
    normals: &[Vec3],
    depth: &[f64],
    mask: &[bool],
    width: usize,
    height: usize,
    edge_threshold: f64,
    grad: Option<&mut [Vec3]>,
) -> f64 {
    let mut total = 0.0;
    let mut grad = grad;
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if !mask[p] || !depth_edge_weight(depth, mask, width, height, x, y, edge_threshold) {
                continue;
            }
            let nbrs = [(x + 1 < width).then(|| p + 1), (y + 1 < height).then(|| p + width)];
            for q in nbrs.into_iter().flatten() {
                if !mask[q] {
                    continue;
                }
                for ch in 0..3 {
                    let dlt = normals[q][ch] - normals[p][ch];
                    total += rho(dlt);
                    if let Some(g) = grad.as_deref_mut() {
                        let d = rho_prime(dlt);
                        g[q][ch] += d;
                        g[p][ch] -= d;
                    }
                }
            }
        }
    }
    total
}

/// `W_d` of pixel `(x, y)`: true unless the forward-difference depth
/// gradient magnitude exceeds the threshold.
pub(crate) fn depth_edge_weight(
    depth: &[f64],
    mask: &[bool],
    width: usize,
    height: usize,
    x: usize,
    y: usize,
    threshold: f64,
) -> bool {
    let p = y * width + x;
    let diff = |q: Option<usize>| -> f64 {
        match q {
            Some(q) if mask[q] => depth[q] - depth[p],
            _ => 0.0,
        }
    };
    let dx = diff((x + 1 < width).then(|| p + 1));
    let dy = diff((y + 1 < height).then(|| p + width));
    (dx * dx + dy * dy).sqrt() <= threshold
}

impl<'a> ObjectiveContext<'a> {
    pub fn width(&self) -> usize {
        self.h_meas.width
    }

    pub fn height(&self) -> usize {
        self.h_meas.height
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            num_pixels: self.h_meas.num_pixels(),
            k: self.clusters.k,
        }
    }

    pub fn ranges(&self) -> ConstraintRanges {
        ConstraintRanges::from_sensor(&self.sensor)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h_meas.num_pixels();
        if self.view_dirs.len() != n || self.clusters.labels.len() != n || self.mask.len() != n {
            return Err(Error::shape(n, "per-pixel inputs of other lengths"));
        }
        if self.h_meas.num_bins != self.sensor.num_bins {
            return Err(Error::shape(
                format!("{} bins", self.sensor.num_bins),
                format!("{} bins", self.h_meas.num_bins),
            ));
        }
        self.weights.validate()
    }

    /// Objective at constrained parameters.
    pub fn evaluate(&self, params: &SceneParams) -> ObjectiveValue {
        let bins = self.h_meas.num_bins;
        let tables: Vec<BankTables> = params
            .materials
            .iter()
            .map(|m| BankTables::new(m, &self.sensor, bins, false))
            .collect();
        let w = self.weights.entry_weights();
        let losses: Vec<f64> = (0..self.h_meas.num_pixels())
            .into_par_iter()
            .map(|p| {
                if !self.mask[p] {
                    return 0.0;
                }
                let c = self.clusters.labels[p];
                let mat = &params.materials[c];
                let geom = LocalGeometry::coaxial(self.view_dirs[p].map(|v| -v), params.normals[p]);
                let basis = match ReflectanceBasis::new(&geom, mat.eta, mat.m) {
                    Ok(b) => basis_values(&b),
                    Err(_) => [[0.0; 16]; 8],
                };
                let shift = TofShift::from_depth(params.depth[p], &self.sensor);
                pixel_term(&basis, &tables[c], shift, self.h_meas.pixel(p), &w, false).loss
            })
            .collect();
        let data: f64 = losses.iter().sum();
        let reg = regularizer(
            &params.normals,
            &params.depth,
            self.mask,
            self.width(),
            self.height(),
            self.weights.edge_threshold,
            None,
        );
        ObjectiveValue {
            data,
            regularizer: reg,
            total: data + self.weights.lambda_reg * reg,
        }
    }

    /// Objective and gradient at unconstrained coordinates.
    pub fn value_and_grad_raw(&self, raw: &[f64]) -> Result<(ObjectiveValue, Vec<f64>)> {
        let layout = self.layout();
        let ranges = self.ranges();
        let params = constrain(raw, self.width(), self.height(), layout.k, &ranges)?;
        let bins = self.h_meas.num_bins;
        let tables: Vec<BankTables> = params
            .materials
            .iter()
            .map(|m| BankTables::new(m, &self.sensor, bins, true))
            .collect();
        let w = self.weights.entry_weights();
        let depth_scale = 2.0 / (self.sensor.c * self.sensor.bin_width);
        // per pixel: (loss, d/d pixel raw [4], d/d cluster geometric raw [2], d/d bank [8][3])
        type PixelOut = (f64, [f64; PIXEL_DIM], [f64; 2], [[f64; 3]; 8]);
        let per_pixel: Vec<PixelOut> = (0..layout.num_pixels)
            .into_par_iter()
            .map(|p| {
                if !self.mask[p] {
                    return (0.0, [0.0; PIXEL_DIM], [0.0; 2], [[0.0; 3]; 8]);
                }
                let c = self.clusters.labels[p];
                let o = layout.pixel(p);
                let co = layout.cluster(c);
                // duals over (n_raw x, y, z, eta_raw, m_raw)
                let v = Dual::<5>::vars(&[raw[o + 1], raw[o + 2], raw[o + 3], raw[co], raw[co + 1]]);
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let n = [v[0] / len, v[1] / len, v[2] / len];
                let eta = Dual::constant(1.0) + v[3].sigmoid().scale(2.0);
                let m_raw = v[4].sigmoid();
                let m = if m_raw.v < M_MIN { Dual::constant(M_MIN) } else { m_raw };
                let to_sensor = self.view_dirs[p].map(|x| Dual::constant(-x));
                let geom = LocalGeometry::coaxial(to_sensor, n);
                let (basis, dbasis) = match ReflectanceBasis::new(&geom, eta, m) {
                    Ok(b) => {
                        let bv = basis_values(&b);
                        (bv.map(|r| r.map(|x| x.v)), Some(bv))
                    }
                    Err(_) => ([[0.0; 16]; 8], None),
                };
                let shift = TofShift::from_depth(params.depth[p], &self.sensor);
                let pg = pixel_term(&basis, &tables[c], shift, self.h_meas.pixel(p), &w, true);
                let mut d_pix = [0.0; PIXEL_DIM];
                let mut d_geo = [0.0; 2];
                if !self.freeze_depth {
                    d_pix[0] = pg.d_depth * depth_scale * sigmoid(raw[o]);
                }
                if let Some(db) = dbasis {
                    for q in 0..8 {
                        for e in 0..16 {
                            let a = pg.d_basis[q][e];
                            if a == 0.0 {
                                continue;
                            }
                            let d = &db[q][e].g;
                            d_pix[1] += a * d[0];
                            d_pix[2] += a * d[1];
                            d_pix[3] += a * d[2];
                            d_geo[0] += a * d[3];
                            d_geo[1] += a * d[4];
                        }
                    }
                }
                (pg.loss, d_pix, d_geo, pg.d_bank)
            })
            .collect();

        let mut grad = vec![0.0; layout.dim()];
        let mut data = 0.0;
        let mut bank_grad = vec![[[0.0; 3]; 8]; layout.k];
        for (p, (loss, d_pix, d_geo, d_bank)) in per_pixel.iter().enumerate() {
            data += loss;
            let o = layout.pixel(p);
            grad[o..o + PIXEL_DIM].copy_from_slice(d_pix);
            let c = self.clusters.labels[p];
            let co = layout.cluster(c);
            grad[co] += d_geo[0];
            grad[co + 1] += d_geo[1];
            for q in 0..8 {
                for t in 0..3 {
                    bank_grad[c][q][t] += d_bank[q][t];
                }
            }
        }
        // constrained bank parameters -> raw coordinates
        for c in 0..layout.k {
            let co = layout.cluster(c);
            for bank in 0..2 {
                let b = co + 2 + 12 * bank;
                let a0 = crate::inverse::softplus(raw[b]);
                let da0 = sigmoid(raw[b]);
                for i in 0..4 {
                    let q = 4 * bank + i;
                    let [ga, gmu, gsig] = bank_grad[c][q];
                    if i == 0 {
                        grad[b] += ga * da0;
                    } else {
                        let s = sigmoid(raw[b + i]);
                        grad[b] += ga * da0 * s;
                        grad[b + i] += ga * a0 * s * (1.0 - s);
                    }
                    let sm = sigmoid(raw[b + 4 + i]);
                    grad[b + 4 + i] += gmu * ranges.t_max * sm * (1.0 - sm);
                    let ss = sigmoid(raw[b + 8 + i]);
                    grad[b + 8 + i] += gsig * (ranges.sigma_max - ranges.sigma_min) * ss * (1.0 - ss);
                }
            }
        }
        // regularizer through the normalization of the raw normals
        let mut g_n = vec![[0.0; 3]; layout.num_pixels];
        let reg = regularizer(
            &params.normals,
            &params.depth,
            self.mask,
            self.width(),
            self.height(),
            self.weights.edge_threshold,
            Some(&mut g_n),
        );
        let lambda = self.weights.lambda_reg;
        if lambda > 0.0 {
            for p in 0..layout.num_pixels {
                let o = layout.pixel(p);
                let r = [raw[o + 1], raw[o + 2], raw[o + 3]];
                let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                let n = params.normals[p];
                let gn = g_n[p];
                let proj = gn[0] * n[0] + gn[1] * n[1] + gn[2] * n[2];
                for i in 0..3 {
                    grad[o + 1 + i] += lambda * (gn[i] - proj * n[i]) / len;
                }
            }
        }
        debug_assert_eq!(CLUSTER_DIM, 26);
        Ok((
            ObjectiveValue {
                data,
                regularizer: reg,
                total: data + lambda * reg,
            },
            grad,
        ))
    }
}

impl GradProvider for ObjectiveContext<'_> {
    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = constrain(x, self.width(), self.height(), self.layout().k, &self.ranges())
            .expect("parameter vector matches the layout");
        self.evaluate(&p).total
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, g) = self.value_and_grad_raw(x).expect("parameter vector matches the layout");
        (v.total, g)
    }
}

/// Objective of constrained parameters against a measured cube.
pub fn objective(params: &SceneParams, ctx: &ObjectiveContext) -> Result<ObjectiveValue> {
    ctx.validate()?;
    if params.num_pixels() != ctx.h_meas.num_pixels() || params.materials.len() != ctx.clusters.k {
        return Err(Error::shape(
            format!("{} pixels, {} materials", ctx.h_meas.num_pixels(), ctx.clusters.k),
            format!("{} pixels, {} materials", params.num_pixels(), params.materials.len()),
        ));
    }
    Ok(ctx.evaluate(params))
}

//! Temporal-polarimetric BRDF: a microfacet surface lobe and a sub-surface
//! lobe, each modulated over delay `tau` by a diagonal bank of Gaussians.
//!
//! All evaluation is generic over [`Real`] so the same code yields values and
//! forward-mode derivatives.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Real;
use crate::polarization::{
    coordinate_conversion, fresnel_mueller_cos, FrameConversion, FresnelMode, LocalGeometry,
    MuellerMatrix,
};

const GRAZING_LIMIT: f64 = 1e-6;

/// Four time-varying Gaussians forming the diagonal of a depolarization
/// matrix: entry `i` is `a_i exp(-(tau - mu_i)^2 / (2 sigma_i^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGaussBank<T = f64> {
    pub a: [T; 4],
    /// Means in seconds.
    pub mu: [T; 4],
    /// Standard deviations in seconds.
    pub sigma: [T; 4],
}

impl<T: Real> TimeGaussBank<T> {
    pub fn uniform(a: T, mu: T, sigma: T) -> Self {
        Self {
            a: [a; 4],
            mu: [mu; 4],
            sigma: [sigma; 4],
        }
    }

    pub fn zero() -> Self {
        Self::uniform(T::zero(), T::zero(), T::one())
    }

    /// Value of channel `i` at delay `tau`.
    pub fn channel(&self, i: usize, tau: T) -> T {
        let z = (tau - self.mu[i]) / self.sigma[i];
        self.a[i] * (-(z * z).scale(0.5)).exp()
    }

    pub fn values(&self, tau: T) -> [T; 4] {
        std::array::from_fn(|i| self.channel(i, tau))
    }

    pub fn to_f64(&self) -> TimeGaussBank<f64> {
        TimeGaussBank {
            a: self.a.map(T::value),
            mu: self.mu.map(T::value),
            sigma: self.sigma.map(T::value),
        }
    }
}

impl TimeGaussBank<f64> {
    pub fn lift<T: Real>(&self) -> TimeGaussBank<T> {
        TimeGaussBank {
            a: self.a.map(T::cst),
            mu: self.mu.map(T::cst),
            sigma: self.sigma.map(T::cst),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            if !(self.a[i] >= 0.0) || !(self.sigma[i] > 0.0) || !self.mu[i].is_finite() {
                return Err(Error::InvalidParam(format!("bank channel {i}: {self:?}")));
            }
        }
        if (1..4).any(|i| self.a[i] > self.a[0]) {
            return Err(Error::InvalidParam(format!(
                "bank amplitudes must satisfy a0 >= ai: {:?}",
                self.a
            )));
        }
        Ok(())
    }

    /// Whether `D_i(tau) <= D_0(tau)` holds for every delay, which makes the
    /// diagonal matrix non-amplifying at all times (amplitude dominance alone
    /// only guarantees it at coincident means and widths).
    pub fn is_non_amplifying(&self) -> bool {
        let (a0, m0, s0) = (self.a[0], self.mu[0], self.sigma[0]);
        (1..4).all(|i| {
            let (ai, mi, si) = (self.a[i], self.mu[i], self.sigma[i]);
            if ai == 0.0 {
                return true;
            }
            if a0 == 0.0 || ai > a0 {
                return false;
            }
            let base = (ai / a0).ln();
            let ki = 1.0 / (si * si);
            let k0 = 1.0 / (s0 * s0);
            if (ki - k0).abs() <= 1e-12 * k0 {
                return (mi - m0).abs() <= 1e-15 * s0.max(1e-30) || base == 0.0 && mi == m0;
            }
            if ki < k0 {
                return false;
            }
            // concave log-ratio; maximum at the stationary point
            let t = (mi * ki - m0 * k0) / (ki - k0);
            let f = base - 0.5 * ki * (t - mi).powi(2) + 0.5 * k0 * (t - m0).powi(2);
            f <= 1e-12
        })
    }
}

/// Per-material scattering parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material<T = f64> {
    pub eta: T,
    pub m: T,
    pub surface: TimeGaussBank<T>,
    pub subsurface: TimeGaussBank<T>,
}

impl<T: Real> Material<T> {
    pub fn to_f64(&self) -> Material<f64> {
        Material {
            eta: self.eta.value(),
            m: self.m.value(),
            surface: self.surface.to_f64(),
            subsurface: self.subsurface.to_f64(),
        }
    }
}

impl Material<f64> {
    pub fn lift<T: Real>(&self) -> Material<T> {
        Material {
            eta: T::cst(self.eta),
            m: T::cst(self.m),
            surface: self.surface.lift(),
            subsurface: self.subsurface.lift(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=3.0).contains(&self.eta) {
            return Err(Error::InvalidParam(format!("eta {} outside [1, 3]", self.eta)));
        }
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::InvalidParam(format!("roughness {} outside (0, 1]", self.m)));
        }
        self.surface.validate()?;
        self.subsurface.validate()
    }
}

/// GGX normal distribution at halfway angle `theta_h`.
pub fn ggx_ndf<T: Real>(theta_h: T, m: T) -> T {
    ggx_ndf_cos(theta_h.cos(), m)
}

pub fn ggx_ndf_cos<T: Real>(cos_h: T, m: T) -> T {
    let m2 = m * m;
    let d = (m2 - T::one()) * cos_h * cos_h + T::one();
    m2 / (d * d).scale(PI)
}

/// GGX-matched Smith masking term for a single direction.
pub fn smith_g1_cos<T: Real>(cos_t: T, m: T) -> T {
    let c2 = cos_t * cos_t;
    let tan2 = (T::one() - c2) / c2;
    T::cst(2.0) / (T::one() + (T::one() + m * m * tan2).sqrt())
}

/// Separable Smith shadowing-masking `G1(theta_i) G1(theta_o)`.
pub fn smith_g<T: Real>(theta_i: T, theta_o: T, m: T) -> T {
    smith_g1_cos(theta_i.cos(), m) * smith_g1_cos(theta_o.cos(), m)
}

/// Diagonal depolarization matrix of `bank` at delay `tau`.
pub fn time_gauss_diag<T: Real>(bank: &TimeGaussBank<T>, tau: T) -> MuellerMatrix<T> {
    MuellerMatrix::diag(bank.values(tau))
}

fn check_front_facing<T: Real>(geom: &LocalGeometry<T>) -> Result<(T, T)> {
    let ci = geom.cos_theta_i();
    let co = geom.cos_theta_o();
    let prod = ci.value() * co.value();
    if ci.value() <= 0.0 || co.value() <= 0.0 || prod < GRAZING_LIMIT {
        return Err(Error::GrazingAngle(prod));
    }
    Ok((ci, co))
}

/// Time-independent factors of the BRDF at one geometry.
///
/// The cosine-scaled BRDF is `sum_i D^s_i(tau) Rs_i + sum_i D^ss_i(tau) Rss_i`
/// where `Rs_i` keeps only row `i` of the scaled surface matrix and `Rss_i`
/// is the rank-one product through channel `i` of the sub-surface chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectanceBasis<T = f64> {
    /// `cos(theta_i) * D G / (4 cos cos) * F_R`.
    pub surface: MuellerMatrix<T>,
    /// Left factor of the sub-surface chain, `C_no F_T^o` (columns used).
    pub sub_left: MuellerMatrix<T>,
    /// Right factor of the sub-surface chain, `F_T^i C_in` (rows used).
    pub sub_right: MuellerMatrix<T>,
    /// `cos(theta_i)`, applied to the sub-surface lobe.
    pub cos_i: T,
}

impl<T: Real> ReflectanceBasis<T> {
    /// Builds the basis for `geom` and the geometric material parameters.
    pub fn new(geom: &LocalGeometry<T>, eta: T, m: T) -> Result<Self> {
        let (ci, co) = check_front_facing(geom)?;
        let cos_h = geom.cos_theta_h()?;
        let d = ggx_ndf_cos(cos_h, m);
        let g = smith_g1_cos(ci, m) * smith_g1_cos(co, m);
        let pref = d * g / (ci * co).scale(4.0);
        // microfacet Fresnel evaluated at the halfway angle
        let f_r = fresnel_mueller_cos(FresnelMode::Reflect, eta, cos_h)?;
        let surface = f_r.scale(pref * ci);

        let c_in = coordinate_conversion(geom, FrameConversion::IncidentHalfwayToNormal)?;
        let c_no = coordinate_conversion(geom, FrameConversion::NormalToOutgoingHalfway)?;
        let f_ti = fresnel_mueller_cos(FresnelMode::Transmit, eta, ci)?;
        // exit from inside the medium at the Snell angle of theta_o
        let sin_o2 = T::one() - co * co;
        let cos_t_o = (T::one() - sin_o2 / (eta * eta)).sqrt();
        let f_to = fresnel_mueller_cos(FresnelMode::Transmit, T::one() / eta, cos_t_o)?;
        Ok(Self {
            surface,
            sub_left: c_no * f_to,
            sub_right: f_ti * c_in,
            cos_i: ci,
        })
    }

    /// Surface lobe for channel values `ds`, without the cosine factor removed.
    pub fn surface_matrix(&self, ds: [T; 4]) -> MuellerMatrix<T> {
        MuellerMatrix::from_rows(std::array::from_fn(|i| self.surface.m[i].map(|x| x * ds[i])))
    }

    /// Cosine-scaled sub-surface lobe for channel values `dss`.
    pub fn subsurface_matrix(&self, dss: [T; 4]) -> MuellerMatrix<T> {
        let mut out = MuellerMatrix::zero();
        for k in 0..4 {
            let w = dss[k] * self.cos_i;
            for i in 0..4 {
                let l = self.sub_left.m[i][k] * w;
                for j in 0..4 {
                    out.m[i][j] += l * self.sub_right.m[k][j];
                }
            }
        }
        out
    }

    /// Rank-one sub-surface basis matrix for channel `k`, cosine-scaled.
    pub fn subsurface_channel(&self, k: usize) -> MuellerMatrix<T> {
        let mut d = [T::zero(); 4];
        d[k] = T::one();
        self.subsurface_matrix(d)
    }

    pub fn evaluate(&self, ds: [T; 4], dss: [T; 4]) -> MuellerMatrix<T> {
        self.surface_matrix(ds) + self.subsurface_matrix(dss)
    }
}

/// Surface reflection lobe (no cosine foreshortening).
pub fn surface_term<T: Real>(tau: T, geom: &LocalGeometry<T>, mat: &Material<T>) -> Result<MuellerMatrix<T>> {
    let (ci, co) = check_front_facing(geom)?;
    let cos_h = geom.cos_theta_h()?;
    let pref = ggx_ndf_cos(cos_h, mat.m) * smith_g1_cos(ci, mat.m) * smith_g1_cos(co, mat.m)
        / (ci * co).scale(4.0);
    let f_r = fresnel_mueller_cos(FresnelMode::Reflect, mat.eta, cos_h)?;
    Ok((time_gauss_diag(&mat.surface, tau) * f_r).scale(pref))
}

/// Sub-surface lobe `C_no F_T^o D^ss(tau) F_T^i C_in` (no cosine).
pub fn subsurface_term<T: Real>(
    tau: T,
    geom: &LocalGeometry<T>,
    mat: &Material<T>,
) -> Result<MuellerMatrix<T>> {
    let (ci, co) = check_front_facing(geom)?;
    let c_in = coordinate_conversion(geom, FrameConversion::IncidentHalfwayToNormal)?;
    let c_no = coordinate_conversion(geom, FrameConversion::NormalToOutgoingHalfway)?;
    let f_ti = fresnel_mueller_cos(FresnelMode::Transmit, mat.eta, ci)?;
    let sin_o2 = T::one() - co * co;
    let cos_t_o = (T::one() - sin_o2 / (mat.eta * mat.eta)).sqrt();
    let f_to = fresnel_mueller_cos(FresnelMode::Transmit, T::one() / mat.eta, cos_t_o)?;
    Ok(c_no * f_to * time_gauss_diag(&mat.subsurface, tau) * f_ti * c_in)
}

/// Full temporal-polarimetric BRDF: surface plus sub-surface.
pub fn brdf<T: Real>(tau: T, geom: &LocalGeometry<T>, mat: &Material<T>) -> Result<MuellerMatrix<T>> {
    Ok(surface_term(tau, geom, mat)? + subsurface_term(tau, geom, mat)?)
}

/// BRDF scaled by the incident cosine, the quantity that enters image
/// formation.
pub fn cosine_scaled<T: Real>(tau: T, geom: &LocalGeometry<T>, mat: &Material<T>) -> Result<MuellerMatrix<T>> {
    Ok(brdf(tau, geom, mat)?.scale(geom.cos_theta_i()))
}

/// Cosine-scaled BRDF via the basis decomposition (same result as
/// [`cosine_scaled`]).
pub fn cosine_scaled_basis<T: Real>(tau: T, geom: &LocalGeometry<T>, mat: &Material<T>) -> Result<MuellerMatrix<T>> {
    let basis = ReflectanceBasis::new(geom, mat.eta, mat.m)?;
    Ok(basis.evaluate(mat.surface.values(tau), mat.subsurface.values(tau)))
}

/// Draws a random bank whose diagonal never amplifies polarization.
pub fn sample_bank(rng: &mut impl Rng, mu_range: (f64, f64), sigma_range: (f64, f64)) -> TimeGaussBank {
    loop {
        let a0 = rng.random_range(0.05..1.0);
        let mu0 = rng.random_range(mu_range.0..mu_range.1);
        let s0 = rng.random_range(sigma_range.0..sigma_range.1);
        let mut bank = TimeGaussBank::uniform(a0, mu0, s0);
        for i in 1..4 {
            bank.a[i] = a0 * rng.random_range(0.0..1.0);
            // narrower and nearby channels stay dominated by channel 0
            bank.sigma[i] = s0 * rng.random_range(0.5..1.0);
            bank.mu[i] = mu0 + s0 * rng.random_range(-0.5..0.5);
        }
        if bank.is_non_amplifying() {
            return bank;
        }
    }
}

/// Random physically plausible material (non-amplifying banks).
pub fn sample_material(rng: &mut impl Rng) -> Material {
    Material {
        eta: rng.random_range(1.1..2.5),
        m: rng.random_range(0.05..1.0),
        surface: sample_bank(rng, (5e-12, 60e-12), (8e-12, 40e-12)),
        subsurface: sample_bank(rng, (100e-12, 600e-12), (40e-12, 200e-12)),
    }
}

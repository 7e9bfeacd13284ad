//! Bessel-Gaussian and Laguerre-Gaussian modes, the binary Bessel hologram
//! and the BG distance formulas.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bessel::{bessel_j, bessel_j_complex};
use crate::error::{finite, positive, Error, Result};
use crate::field::{ScalarField, TransverseGrid};

/// Radial wave number used throughout the experiment (rad/m).
pub const DEFAULT_K_R: f64 = 18e3;
/// BG Gaussian waist giving a 0.54 m non-diffracting range at the default
/// k_r and wavelength (m).
pub const DEFAULT_W0: f64 = 1.253e-3;
/// Signal and idler wavelength (m).
pub const DEFAULT_WAVELENGTH: f64 = 810e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeFamily {
    /// `k_r` in rad/m.
    BesselGauss { k_r: f64 },
    LaguerreGauss {
        #[serde(default)]
        p: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub family: ModeFamily,
    pub ell: i32,
    pub w0: f64,
    pub wavelength: f64,
}

impl ModeSpec {
    pub fn bessel_gauss(ell: i32, k_r: f64, w0: f64, wavelength: f64) -> Self {
        Self {
            family: ModeFamily::BesselGauss { k_r },
            ell,
            w0,
            wavelength,
        }
    }

    pub fn laguerre_gauss(ell: i32, w0: f64, wavelength: f64) -> Self {
        Self {
            family: ModeFamily::LaguerreGauss { p: 0 },
            ell,
            w0,
            wavelength,
        }
    }

    /// Same family and radial parameters with a different charge.
    pub fn with_ell(&self, ell: i32) -> Self {
        Self { ell, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        positive("w0", self.w0)?;
        positive("wavelength", self.wavelength)?;
        match self.family {
            ModeFamily::BesselGauss { k_r } => {
                finite("k_r", k_r)?;
                if k_r < 0.0 {
                    return Err(Error::InvalidParameter { name: "k_r", value: k_r });
                }
                if k_r >= self.wavenumber() {
                    return Err(Error::InvalidParameter { name: "k_r", value: k_r });
                }
            }
            ModeFamily::LaguerreGauss { .. } => {}
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.w0 * self.w0 / self.wavelength
    }

    /// Radial wave number for BG modes, `None` for LG.
    pub fn k_r(&self) -> Option<f64> {
        match self.family {
            ModeFamily::BesselGauss { k_r } => Some(k_r),
            ModeFamily::LaguerreGauss { .. } => None,
        }
    }

    pub fn is_bessel(&self) -> bool {
        matches!(self.family, ModeFamily::BesselGauss { .. })
    }

    /// Normalized field of either family.
    pub fn evaluate(&self, grid: TransverseGrid, z: f64) -> Result<ScalarField> {
        match self.family {
            ModeFamily::BesselGauss { .. } => evaluate_bg(self, grid, z),
            ModeFamily::LaguerreGauss { .. } => evaluate_lg(self, grid, z),
        }
    }
}

/// Pre-normalization BG amplitude at `(r, φ, z)`:
///
/// `√(2/π) J_ℓ(z_R k_r r/(z_R − iz)) exp(iℓφ − i k_z z) exp((i k_r² z w0² − 2 k r²)/(4(z_R − iz)))`.
///
/// Phases follow the `exp(−i k_z z)` convention, so for `z ≠ 0` this is the
/// complex conjugate (in its radial part) of the forward-propagated beam.
/// At `k_r = 0` the Bessel factor is replaced by its small-argument limit
/// `ρ^|ℓ|`, which differs from `J_ℓ(k_r ρ)` only by a constant.
pub fn bg_amplitude(spec: &ModeSpec, r: f64, phi: f64, z: f64) -> Complex64 {
    let k_r = spec.k_r().unwrap_or(0.0);
    let k = spec.wavenumber();
    let kz = (k * k - k_r * k_r).sqrt();
    let zr = spec.rayleigh_range();
    let denom = Complex64::new(zr, -z);
    let rho = zr * r / denom;
    let i = Complex64::new(0.0, 1.0);

    let bessel = if k_r > 0.0 {
        if z == 0.0 {
            Complex64::new(bessel_j(spec.ell, k_r * r), 0.0)
        } else {
            bessel_j_complex(spec.ell, k_r * rho)
        }
    } else {
        let sign = if spec.ell < 0 && spec.ell % 2 != 0 { -1.0 } else { 1.0 };
        sign * rho.powu(spec.ell.unsigned_abs())
    };
    let envelope = ((i * k_r * k_r * z * spec.w0 * spec.w0 - 2.0 * k * r * r) / (4.0 * denom)).exp();
    let phase = Complex64::from_polar(1.0, spec.ell as f64 * phi - kz * z);
    (2.0 / PI).sqrt() * bessel * phase * envelope
}

fn normalize(field: ScalarField, what: &str) -> Result<ScalarField> {
    let p = field.power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("{what} has no power on this grid")));
    }
    Ok(field.normalized())
}

/// Unit-power BG mode on `grid` at distance `z` (|z| < 10 z_R).
pub fn evaluate_bg(spec: &ModeSpec, grid: TransverseGrid, z: f64) -> Result<ScalarField> {
    if !spec.is_bessel() {
        return Err(Error::UnsupportedMode("evaluate_bg needs a Bessel-Gaussian spec".into()));
    }
    spec.validate()?;
    finite("z", z)?;
    if z.abs() >= 10.0 * spec.rayleigh_range() {
        return Err(Error::Precondition(format!(
            "|z| = {} m exceeds ten Rayleigh ranges ({} m)",
            z.abs(),
            10.0 * spec.rayleigh_range()
        )));
    }
    let field = ScalarField::from_polar_fn(grid, |r, phi| bg_amplitude(spec, r, phi, z));
    normalize(field, "BG mode")
}

/// Unit-power LG mode with p = 0, forward-propagated to `z` in the
/// `exp(+ikz)` convention used by [`crate::propagation::Propagator`].
pub fn evaluate_lg(spec: &ModeSpec, grid: TransverseGrid, z: f64) -> Result<ScalarField> {
    match spec.family {
        ModeFamily::LaguerreGauss { p: 0 } => {}
        ModeFamily::LaguerreGauss { p } => {
            return Err(Error::UnsupportedMode(format!("LG modes with p = {p} are not supported")))
        }
        ModeFamily::BesselGauss { .. } => {
            return Err(Error::UnsupportedMode("evaluate_lg needs a Laguerre-Gaussian spec".into()))
        }
    }
    spec.validate()?;
    finite("z", z)?;
    let zr = spec.rayleigh_range();
    let k = spec.wavenumber();
    let w = spec.w0 * (1.0 + (z / zr).powi(2)).sqrt();
    let inv_curvature = z / (z * z + zr * zr);
    let order = spec.ell.unsigned_abs();
    let gouy = (order as f64 + 1.0) * (z / zr).atan();
    let field = ScalarField::from_polar_fn(grid, |r, phi| {
        let radial = (r * 2f64.sqrt() / w).powi(order as i32) * (-r * r / (w * w)).exp();
        let phase = spec.ell as f64 * phi + 0.5 * k * r * r * inv_curvature - gouy;
        Complex64::from_polar(radial, phase)
    });
    normalize(field, "LG mode")
}

/// Phase-only transmission `sign(J_ℓ(k_r r)) exp(iℓφ)`, with zeros of J_ℓ
/// mapped to +1.
pub fn binary_bessel_hologram(ell: i32, k_r: f64, grid: TransverseGrid) -> Result<ScalarField> {
    positive("k_r", k_r)?;
    Ok(ScalarField::from_polar_fn(grid, |r, phi| {
        let sign = if bessel_j(ell, k_r * r) < 0.0 { -1.0 } else { 1.0 };
        Complex64::from_polar(sign, ell as f64 * phi)
    }))
}

/// A distance that may be unbounded (BG modes with k_r = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Finite(f64),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(d) => Some(d),
            Self::Infinite => None,
        }
    }
}

fn bg_k_r(spec: &ModeSpec) -> Result<f64> {
    spec.validate()?;
    spec.k_r()
        .ok_or_else(|| Error::UnsupportedMode("distance formulas apply to Bessel-Gaussian modes".into()))
}

/// Non-diffracting range `2π w0 / (λ k_r)`.
pub fn nondiffracting_distance(spec: &ModeSpec) -> Result<Distance> {
    let k_r = bg_k_r(spec)?;
    if k_r == 0.0 {
        return Ok(Distance::Infinite);
    }
    Ok(Distance::Finite(2.0 * PI * spec.w0 / (spec.wavelength * k_r)))
}

/// Length of the shadow behind an opaque disk of radius `radius`:
/// `2π R / (k_r λ)`.
pub fn shadow_length(radius: f64, spec: &ModeSpec) -> Result<Distance> {
    positive("obstacle radius", radius)?;
    let k_r = bg_k_r(spec)?;
    if k_r == 0.0 {
        return Ok(Distance::Infinite);
    }
    Ok(Distance::Finite(2.0 * PI * radius / (k_r * spec.wavelength)))
}

/// Distance behind the obstacle at which the mode is fully rebuilt, twice
/// the shadow length.
pub fn reconstruction_distance(radius: f64, spec: &ModeSpec) -> Result<Distance> {
    Ok(match shadow_length(radius, spec)? {
        Distance::Finite(d) => Distance::Finite(2.0 * d),
        Distance::Infinite => Distance::Infinite,
    })
}

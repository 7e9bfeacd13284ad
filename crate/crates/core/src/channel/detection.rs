//! Bob's measurement: spin-orbit decoding followed by a spatial filter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Result};
use crate::field::{inner_product, PolarizedField, ScalarField, TransverseGrid};
use crate::jones::{prepare_state, MubLabel};
use crate::modes::{binary_bessel_hologram, ModeSpec};

use super::spdc::{heralded_input, SpdcConfig};

/// Fiber-mode waist imaged back onto the hologram plane (m): a 5 µm
/// mode-field diameter magnified 250× by the 500 mm / 2 mm lens pair.
pub const DEFAULT_FIBER_WAIST: f64 = 0.625e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectionModel {
    /// Perfect projection onto the propagated prepared state.
    Ideal,
    /// Decoder right behind the last obstacle (or at `decoder_z`), then free
    /// propagation to the hologram at the receiver, then a single-mode fiber
    /// whose mode has waist `fiber_waist` at the hologram.
    HologramCascade {
        #[serde(default = "default_fiber_waist")]
        fiber_waist: f64,
        #[serde(default)]
        decoder_z: Option<f64>,
    },
}

fn default_fiber_waist() -> f64 {
    DEFAULT_FIBER_WAIST
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self::HologramCascade {
            fiber_waist: DEFAULT_FIBER_WAIST,
            decoder_z: None,
        }
    }
}

/// Unit-power scalar mode accepted by hologram plus fiber at the receiver:
/// the binary Bessel transmission (BG sources only) times the fiber
/// Gaussian.
pub fn detection_mode(source: &ModeSpec, fiber_waist: f64, grid: TransverseGrid) -> Result<ScalarField> {
    positive("fiber waist", fiber_waist)?;
    let gaussian = ScalarField::from_polar_fn(grid, |r, _| {
        Complex64::new((-r * r / (fiber_waist * fiber_waist)).exp(), 0.0)
    });
    let mode = match source.k_r() {
        Some(k_r) if k_r > 0.0 => gaussian.multiply(&binary_bessel_hologram(0, k_r, grid)?)?,
        _ => gaussian,
    };
    Ok(mode.normalized())
}

/// `⟨b|f⟩` with `|b⟩` the state prepared for `label` from the heralded input
/// of `detection`. This is the ideal modal projector.
pub fn measure_projection(f: &PolarizedField, label: MubLabel, detection: &ModeSpec) -> Result<Complex64> {
    let config = SpdcConfig {
        heralding: *detection,
        ..SpdcConfig::default()
    };
    let input = heralded_input(&config, *f.grid())?;
    let b = prepare_state(label, &input)?;
    inner_product(&b, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::prepare_state;
    use crate::modes::{DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH};

    #[test]
    fn projection_examples() {
        let grid = TransverseGrid::new(512, 8e-3).unwrap();
        let spec = ModeSpec::bessel_gauss(0, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH);
        let input = heralded_input(&SpdcConfig::default(), grid).unwrap();
        let psi00 = prepare_state(MubLabel::Psi00, &input).unwrap();
        let same = measure_projection(&psi00, MubLabel::Psi00, &spec).unwrap();
        assert!((same.norm() - 1.0).abs() < 1e-9);
        assert!(measure_projection(&psi00, MubLabel::Psi01, &spec).unwrap().norm() < 1e-6);
        let cross = measure_projection(&psi00, MubLabel::Phi00, &spec).unwrap().norm_sqr();
        assert!((cross - 0.25).abs() < 1e-3);
    }

    #[test]
    fn detection_mode_is_normalized_and_signed() {
        let grid = TransverseGrid::new(512, 8e-3).unwrap();
        let spec = ModeSpec::bessel_gauss(0, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH);
        let d = detection_mode(&spec, DEFAULT_FIBER_WAIST, grid).unwrap();
        assert!((d.power() - 1.0).abs() < 1e-12);
        assert!(d.samples().iter().any(|v| v.re < 0.0));
        let lg = ModeSpec::laguerre_gauss(0, DEFAULT_FIBER_WAIST, DEFAULT_WAVELENGTH);
        let g = detection_mode(&lg, DEFAULT_FIBER_WAIST, grid).unwrap();
        assert!(g.samples().iter().all(|v| v.re >= 0.0));
    }
}

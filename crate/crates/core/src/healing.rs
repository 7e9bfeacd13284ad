//! Self-healing diagnostics behind an opaque disk.
//!
//! The global overlap between obstructed and unobstructed beams cannot show
//! reconstruction: free propagation is unitary, so it stays equal to the
//! transmitted power fraction at every distance. Healing is therefore
//! measured inside a window centred on the obstacle, where the shadow forms
//! and later refills.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::field::{PolarizedField, ScalarField, TransverseGrid};
use crate::jones::{prepare_state, MubLabel};
use crate::modes::ModeSpec;
use crate::propagation::{apply_obstacle, ObstacleSpec, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealingPoint {
    /// Distance from the state's preparation plane (m).
    pub z: f64,
    /// Fidelity with the unobstructed state inside the window.
    pub fidelity: f64,
    /// Fidelity over the whole grid.
    pub global_fidelity: f64,
    /// Power left after the obstacle, relative to a unit input.
    pub transmitted_power: f64,
    /// Axial intensity of the obstructed charge-free heralded mode.
    pub on_axis_intensity: f64,
    /// Same without the obstacle.
    pub reference_on_axis_intensity: f64,
}

impl HealingPoint {
    pub fn on_axis_ratio(&self) -> f64 {
        if self.reference_on_axis_intensity > 0.0 {
            self.on_axis_intensity / self.reference_on_axis_intensity
        } else {
            0.0
        }
    }
}

fn disk_overlap(a: &ScalarField, b: &ScalarField, cx: f64, cy: f64, radius: f64) -> Complex64 {
    let g = a.grid();
    let (sa, sb) = (a.samples(), b.samples());
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..g.len() {
        let (x, y) = g.position(i);
        if (x - cx).hypot(y - cy) < radius {
            sum += sa[i].conj() * sb[i];
        }
    }
    sum * g.cell_area()
}

/// `|⟨a|b⟩_W|² / (‖a‖_W² ‖b‖_W²)` restricted to a disk.
pub fn windowed_fidelity(a: &PolarizedField, b: &PolarizedField, cx: f64, cy: f64, radius: f64) -> f64 {
    let ab = disk_overlap(a.h(), b.h(), cx, cy, radius) + disk_overlap(a.v(), b.v(), cx, cy, radius);
    let aa = a.h().power_in_disk(cx, cy, radius) + a.v().power_in_disk(cx, cy, radius);
    let bb = b.h().power_in_disk(cx, cy, radius) + b.v().power_in_disk(cx, cy, radius);
    if aa > 0.0 && bb > 0.0 {
        (ab.norm_sqr() / (aa * bb)).min(1.0)
    } else {
        0.0
    }
}

fn global_fidelity(a: &PolarizedField, b: &PolarizedField) -> Result<f64> {
    crate::field::fidelity(a, b)
}

fn evolve(
    prop: &Propagator,
    f: &PolarizedField,
    stations: &[f64],
) -> Result<Vec<PolarizedField>> {
    let hs = prop.propagate_scalar_to(f.h(), stations)?;
    let vs = prop.propagate_scalar_to(f.v(), stations)?;
    hs.into_iter()
        .zip(vs)
        .map(|(h, v)| PolarizedField::new(h, v, f.wavelength()))
        .collect()
}

/// Healing diagnostics for the state `label` (prepared from the charge-free
/// heralding mode `spec`) at every absolute distance in `stations`.
/// `window` defaults to the obstacle radius.
pub fn self_healing_scan(
    spec: &ModeSpec,
    label: MubLabel,
    obstacle: &ObstacleSpec,
    stations: &[f64],
    grid: TransverseGrid,
    window: Option<f64>,
) -> Result<Vec<HealingPoint>> {
    if stations.is_empty() {
        return Err(Error::Precondition("no evaluation distances given".into()));
    }
    if let Some(&z) = stations.iter().find(|z| !(**z >= obstacle.z)) {
        return Err(Error::Precondition(format!(
            "evaluation distance {z} m lies before the obstacle at {} m",
            obstacle.z
        )));
    }
    let radius = positive("window radius", window.unwrap_or(obstacle.radius))?;
    obstacle.validate(&grid)?;
    let prop = Propagator::new(grid, spec.wavelength)?;
    let profile = spec.with_ell(0).evaluate(grid, 0.0)?;
    let input = PolarizedField::horizontal(&profile, spec.wavelength)?;
    let state = prepare_state(label, &input)?;

    let at_obstacle = prop.propagate(&state, obstacle.z)?;
    let blocked = apply_obstacle(&at_obstacle, obstacle)?;
    let input_at_obstacle = prop.propagate(&input, obstacle.z)?;
    let input_blocked = apply_obstacle(&input_at_obstacle, obstacle)?;
    let transmitted = blocked.power();

    let after: Vec<f64> = stations.iter().map(|z| z - obstacle.z).collect();
    let reference = evolve(&prop, &at_obstacle, &after)?;
    let obstructed = evolve(&prop, &blocked, &after)?;
    let axis_ref = prop.propagate_scalar_to(input_at_obstacle.h(), &after)?;
    let axis_obs = prop.propagate_scalar_to(input_blocked.h(), &after)?;
    let centre = grid.center_index();

    stations
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            Ok(HealingPoint {
                z,
                fidelity: windowed_fidelity(
                    &reference[k],
                    &obstructed[k],
                    obstacle.offset_x,
                    obstacle.offset_y,
                    radius,
                ),
                global_fidelity: global_fidelity(&reference[k], &obstructed[k])?,
                transmitted_power: transmitted,
                on_axis_intensity: axis_obs[k].samples()[centre].norm_sqr(),
                reference_on_axis_intensity: axis_ref[k].samples()[centre].norm_sqr(),
            })
        })
        .collect()
}

/// Single-distance form of [`self_healing_scan`].
pub fn self_healing_fidelity(
    spec: &ModeSpec,
    label: MubLabel,
    obstacle: &ObstacleSpec,
    z_eval: f64,
    grid: TransverseGrid,
) -> Result<HealingPoint> {
    Ok(self_healing_scan(spec, label, obstacle, &[z_eval], grid, None)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{shadow_length, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH};

    #[test]
    fn unobstructed_fidelity_is_one() {
        let grid = TransverseGrid::new(256, 8e-3).unwrap();
        let spec = ModeSpec::bessel_gauss(0, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH);
        let a = prepare_state(MubLabel::Psi00, &PolarizedField::horizontal(&spec.evaluate(grid, 0.0).unwrap(), DEFAULT_WAVELENGTH).unwrap()).unwrap();
        assert!((windowed_fidelity(&a, &a, 0.0, 0.0, 6e-4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_fidelity_equals_transmission() {
        let grid = TransverseGrid::new(512, 10e-3).unwrap();
        let spec = ModeSpec::bessel_gauss(0, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH);
        let obs = ObstacleSpec::centered(600e-6, 0.0);
        let zmin = shadow_length(600e-6, &spec).unwrap().finite().unwrap();
        let points = self_healing_scan(&spec, MubLabel::Psi00, &obs, &[0.2 * zmin, zmin, 2.0 * zmin], grid, None).unwrap();
        for p in &points {
            assert!((p.global_fidelity - p.transmitted_power).abs() < 1e-9, "{p:?}");
        }
        assert!(points[2].fidelity > points[0].fidelity);
    }

    #[test]
    fn rejects_bad_stations() {
        let grid = TransverseGrid::new(256, 8e-3).unwrap();
        let spec = ModeSpec::bessel_gauss(0, DEFAULT_K_R, DEFAULT_W0, DEFAULT_WAVELENGTH);
        let obs = ObstacleSpec::centered(600e-6, 0.1);
        assert!(self_healing_scan(&spec, MubLabel::Psi00, &obs, &[], grid, None).is_err());
        assert!(self_healing_scan(&spec, MubLabel::Psi00, &obs, &[0.05], grid, None).is_err());
    }
}

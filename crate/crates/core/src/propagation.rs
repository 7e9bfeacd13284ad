//! Angular-spectrum diffraction, opaque obstacles and channel geometry.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{positive, Error, Result};
use crate::fft::{angular_frequency, Fft2};
use crate::field::{stable_sum_real, PolarizedField, ScalarField, TransverseGrid};

/// Spectral power allowed beyond 90% of the Nyquist radius before a
/// band-limit warning is raised.
pub const BAND_LIMIT_TOLERANCE: f64 = 1e-4;
/// Relative width of the outer frame watched by the boundary monitor.
pub const BOUNDARY_BAND: f64 = 0.05;
/// Boundary power fraction above which a warning is attached.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Non-fatal numerical diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NumericalWarning {
    /// Spectral power fraction in the outer 10% of k-space.
    BandLimit { stage: String, fraction: f64 },
    /// Power fraction in the outer frame of the grid (wrap-around risk).
    BoundaryPower { stage: String, fraction: f64 },
    /// A prepared state was fully blocked and left out of an average.
    BlockedRow { label: String },
}

impl NumericalWarning {
    pub fn boundary_fraction(&self) -> Option<f64> {
        match self {
            Self::BoundaryPower { fraction, .. } => Some(*fraction),
            _ => None,
        }
    }
}

/// Reusable angular-spectrum propagator for one grid and wavelength.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TransverseGrid,
    wavelength: f64,
    fft: Fft2,
    /// Longitudinal wave number per frequency bin; NaN marks evanescent bins.
    kz: Vec<f64>,
    /// Bins beyond 90% of the Nyquist radius.
    outer: Vec<bool>,
}

impl Propagator {
    pub fn new(grid: TransverseGrid, wavelength: f64) -> Result<Self> {
        positive("wavelength", wavelength)?;
        let n = grid.n();
        let k = 2.0 * PI / wavelength;
        let nyquist = PI / grid.spacing();
        let (kz, outer): (Vec<f64>, Vec<bool>) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let kx = angular_frequency(i % n, n, grid.extent());
                let ky = angular_frequency(i / n, n, grid.extent());
                let kt2 = kx * kx + ky * ky;
                let kz = if kt2 > k * k {
                    f64::NAN
                } else {
                    (k * k - kt2).sqrt()
                };
                (kz, kt2.sqrt() > 0.9 * nyquist)
            })
            .unzip();
        Ok(Self {
            grid,
            wavelength,
            fft: Fft2::new(n),
            kz,
            outer,
        })
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    fn check(&self, f: &PolarizedField) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch("field grid differs from propagator grid".into()));
        }
        if (f.wavelength() - self.wavelength).abs() > 1e-12 * self.wavelength {
            return Err(Error::ShapeMismatch(format!(
                "field wavelength {} differs from propagator wavelength {}",
                f.wavelength(),
                self.wavelength
            )));
        }
        Ok(())
    }

    fn spectrum(&self, f: &ScalarField) -> Vec<Complex64> {
        let mut data = f.samples().to_vec();
        self.fft.forward(&mut data);
        data
    }

    fn from_spectrum(&self, spectrum: &[Complex64], dz: f64) -> ScalarField {
        let mut data: Vec<Complex64> = spectrum
            .par_iter()
            .zip(self.kz.par_iter())
            .map(|(s, &kz)| {
                if kz.is_nan() {
                    Complex64::new(0.0, 0.0)
                } else {
                    s * Complex64::from_polar(1.0, kz * dz)
                }
            })
            .collect();
        self.fft.inverse(&mut data);
        ScalarField::from_samples(self.grid, data).expect("grid length preserved")
    }

    /// Advances a scalar field by `dz` (signed; negative means backwards).
    fn advance_scalar(&self, f: &ScalarField, dz: f64) -> ScalarField {
        if dz == 0.0 {
            return f.clone();
        }
        self.from_spectrum(&self.spectrum(f), dz)
    }

    fn advance(&self, f: &PolarizedField, dz: f64) -> Result<PolarizedField> {
        self.check(f)?;
        let (h, v) = rayon::join(
            || self.advance_scalar(f.h(), dz),
            || self.advance_scalar(f.v(), dz),
        );
        PolarizedField::new(h, v, self.wavelength)
    }

    /// Forward free-space propagation by `dz ≥ 0`.
    pub fn propagate(&self, f: &PolarizedField, dz: f64) -> Result<PolarizedField> {
        if !(dz >= 0.0) || !dz.is_finite() {
            return Err(Error::NegativeDistance(dz));
        }
        self.advance(f, dz)
    }

    /// Forward propagation of a scalar field by `dz ≥ 0`.
    pub fn propagate_scalar(&self, f: &ScalarField, dz: f64) -> Result<ScalarField> {
        if !(dz >= 0.0) || !dz.is_finite() {
            return Err(Error::NegativeDistance(dz));
        }
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch("field grid differs from propagator grid".into()));
        }
        Ok(self.advance_scalar(f, dz))
    }

    /// Undoes [`Propagator::propagate`] over `dz ≥ 0` with the conjugate
    /// kernel. This is also the adjoint of forward propagation.
    pub fn back_propagate(&self, f: &PolarizedField, dz: f64) -> Result<PolarizedField> {
        if !(dz >= 0.0) || !dz.is_finite() {
            return Err(Error::NegativeDistance(dz));
        }
        self.advance(f, -dz)
    }

    pub fn back_propagate_scalar(&self, f: &ScalarField, dz: f64) -> Result<ScalarField> {
        if !(dz >= 0.0) || !dz.is_finite() {
            return Err(Error::NegativeDistance(dz));
        }
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch("field grid differs from propagator grid".into()));
        }
        Ok(self.advance_scalar(f, -dz))
    }

    /// Scalar field at several distances from one forward transform.
    pub fn propagate_scalar_to(&self, f: &ScalarField, distances: &[f64]) -> Result<Vec<ScalarField>> {
        if let Some(&bad) = distances.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::NegativeDistance(bad));
        }
        let spectrum = self.spectrum(f);
        Ok(distances
            .iter()
            .map(|&d| self.from_spectrum(&spectrum, d))
            .collect())
    }

    /// Fraction of spectral power beyond 90% of the Nyquist radius.
    pub fn spectral_edge_fraction(&self, f: &PolarizedField) -> f64 {
        let mut total = 0.0;
        let mut edge = 0.0;
        for comp in [f.h(), f.v()] {
            let s = self.spectrum(comp);
            total += stable_sum_real(s.len(), |i| s[i].norm_sqr());
            edge += stable_sum_real(s.len(), |i| if self.outer[i] { s[i].norm_sqr() } else { 0.0 });
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    /// Band-limit and boundary checks for a field about to be (or just)
    /// propagated.
    pub fn diagnose(&self, f: &PolarizedField, stage: &str) -> Vec<NumericalWarning> {
        let mut warnings = Vec::new();
        let band = self.spectral_edge_fraction(f);
        if band > BAND_LIMIT_TOLERANCE {
            log::warn!("{stage}: {band:.2e} of spectral power near the Nyquist limit");
            warnings.push(NumericalWarning::BandLimit {
                stage: stage.to_string(),
                fraction: band,
            });
        }
        let boundary = boundary_power_fraction(f);
        if boundary > BOUNDARY_TOLERANCE {
            log::warn!("{stage}: {boundary:.2e} of power in the outer grid frame");
            warnings.push(NumericalWarning::BoundaryPower {
                stage: stage.to_string(),
                fraction: boundary,
            });
        }
        warnings
    }
}

/// Free-space propagation with a one-off propagator.
pub fn propagate(f: &PolarizedField, dz: f64) -> Result<PolarizedField> {
    Propagator::new(*f.grid(), f.wavelength())?.propagate(f, dz)
}

/// Power fraction in the outer [`BOUNDARY_BAND`] frame of the grid.
pub fn boundary_power_fraction(f: &PolarizedField) -> f64 {
    let total = f.power();
    if total == 0.0 {
        return 0.0;
    }
    let ph = f.h().power();
    let pv = f.v().power();
    (f.h().boundary_power_fraction(BOUNDARY_BAND) * ph
        + f.v().boundary_power_fraction(BOUNDARY_BAND) * pv)
        / total
}

/// Opaque circular disk in a transverse plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub radius: f64,
    #[serde(default)]
    pub offset_x: f64,
    #[serde(default)]
    pub offset_y: f64,
    /// Distance from the channel input (m).
    #[serde(default)]
    pub z: f64,
}

impl ObstacleSpec {
    pub fn centered(radius: f64, z: f64) -> Self {
        Self {
            radius,
            offset_x: 0.0,
            offset_y: 0.0,
            z,
        }
    }

    /// Rejects non-positive radii and disks that do not fit on the grid.
    pub fn validate(&self, grid: &TransverseGrid) -> Result<()> {
        positive("obstacle radius", self.radius)?;
        let offset = self.offset_x.hypot(self.offset_y);
        if !offset.is_finite() || self.radius + offset >= 0.5 * grid.extent() {
            return Err(Error::Precondition(format!(
                "obstacle (R = {} m, offset {} m) does not fit inside the {} m grid",
                self.radius,
                offset,
                grid.extent()
            )));
        }
        if !(self.z >= 0.0) || !self.z.is_finite() {
            return Err(Error::InvalidParameter {
                name: "obstacle z",
                value: self.z,
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.offset_x).hypot(y - self.offset_y) < self.radius
    }

    /// Binary transmission: 0 inside the disk, 1 outside.
    pub fn mask(&self, grid: TransverseGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| {
            Complex64::new(if self.contains(x, y) { 0.0 } else { 1.0 }, 0.0)
        })
    }
}

/// Blocks the light falling on the disk. Fails only if the disk does not fit
/// on the grid.
pub fn apply_obstacle(f: &PolarizedField, obstacle: &ObstacleSpec) -> Result<PolarizedField> {
    obstacle.validate(f.grid())?;
    f.multiply_scalar(&obstacle.mask(*f.grid()))
}

/// Free-space link from Alice (z = 0) to the receiver (z = `length`) with
/// opaque obstacles along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub length: f64,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

impl ChannelSpec {
    pub fn free_space(length: f64) -> Self {
        Self {
            length,
            obstacles: Vec::new(),
        }
    }

    /// Single obstacle at `z`, receiver `distance_after` further on.
    pub fn single_obstacle(obstacle: ObstacleSpec, distance_after: f64) -> Self {
        Self {
            length: obstacle.z + distance_after,
            obstacles: vec![obstacle],
        }
    }

    pub fn validate(&self, grid: &TransverseGrid) -> Result<()> {
        if !(self.length >= 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidParameter {
                name: "channel length",
                value: self.length,
            });
        }
        let mut last = 0.0;
        for obs in &self.obstacles {
            obs.validate(grid)?;
            if obs.z > self.length {
                return Err(Error::Precondition(format!(
                    "obstacle at z = {} m lies beyond the channel end {} m",
                    obs.z, self.length
                )));
            }
            if obs.z < last {
                return Err(Error::Precondition("obstacles must be sorted by z".into()));
            }
            last = obs.z;
        }
        Ok(())
    }

    /// z of the last obstacle, or 0 for free space.
    pub fn last_obstacle_z(&self) -> f64 {
        self.obstacles.last().map_or(0.0, |o| o.z)
    }

    /// Distance L from the last obstacle to the receiver.
    pub fn distance_after_obstacle(&self) -> f64 {
        self.length - self.last_obstacle_z()
    }

    /// Propagates `f` from z = `from` to z = `to`, applying every obstacle
    /// with `from ≤ z ≤ to`. The output is the field just behind the plane
    /// at `to`.
    pub fn transmit_between(
        &self,
        propagator: &Propagator,
        f: &PolarizedField,
        from: f64,
        to: f64,
    ) -> Result<(PolarizedField, Vec<NumericalWarning>)> {
        if to < from {
            return Err(Error::NegativeDistance(to - from));
        }
        let mut field = f.clone();
        let mut z = from;
        let mut warnings = Vec::new();
        for obs in &self.obstacles {
            if obs.z < from || obs.z > to {
                continue;
            }
            field = propagator.propagate(&field, obs.z - z)?;
            z = obs.z;
            field = apply_obstacle(&field, obs)?;
            warnings.extend(propagator.diagnose(&field, &format!("after obstacle at z = {:.4} m", obs.z)));
        }
        field = propagator.propagate(&field, to - z)?;
        warnings.extend(propagator.diagnose(&field, &format!("at z = {to:.4} m")));
        Ok((field, warnings))
    }

    /// Full channel from z = 0 to the receiver.
    pub fn transmit(
        &self,
        propagator: &Propagator,
        f: &PolarizedField,
    ) -> Result<(PolarizedField, Vec<NumericalWarning>)> {
        self.validate(propagator.grid())?;
        self.transmit_between(propagator, f, 0.0, self.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inner_product;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 810e-9;

    fn gaussian(grid: TransverseGrid, w: f64) -> PolarizedField {
        let s = ScalarField::from_polar_fn(grid, |r, _| Complex64::new((-r * r / (w * w)).exp(), 0.0));
        PolarizedField::horizontal(&s, LAMBDA).unwrap().normalized()
    }

    /// 1/e² intensity radius from the second moment along x.
    fn second_moment_radius(f: &PolarizedField) -> f64 {
        let g = *f.grid();
        let intensity = f.intensity();
        let (mut num, mut den) = (0.0, 0.0);
        for (i, p) in intensity.iter().enumerate() {
            let (x, _) = g.position(i);
            num += x * x * p;
            den += p;
        }
        2.0 * (num / den).sqrt()
    }

    #[test]
    fn gaussian_width_follows_analytic_law() {
        let grid = TransverseGrid::new(256, 4e-3).unwrap();
        let w0 = 150e-6;
        let zr = PI * w0 * w0 / LAMBDA;
        let p = Propagator::new(grid, LAMBDA).unwrap();
        let f = gaussian(grid, w0);
        for factor in [0.5, 1.0, 2.0] {
            let out = p.propagate(&f, factor * zr).unwrap();
            let expected = w0 * (1.0 + factor * factor).sqrt();
            let got = second_moment_radius(&out);
            assert!((got - expected).abs() / expected < 0.01, "z = {factor} z_R: {got} vs {expected}");
        }
        let at_zr = second_moment_radius(&p.propagate(&f, zr).unwrap());
        assert!((at_zr / w0 - 2f64.sqrt()).abs() < 0.01 * 2f64.sqrt());
    }

    #[test]
    fn zero_distance_is_exact_identity() {
        let grid = TransverseGrid::new(64, 1e-3).unwrap();
        let f = gaussian(grid, 1e-4);
        let p = Propagator::new(grid, LAMBDA).unwrap();
        assert_eq!(p.propagate(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn negative_distance_is_rejected() {
        let grid = TransverseGrid::new(64, 1e-3).unwrap();
        let f = gaussian(grid, 1e-4);
        let p = Propagator::new(grid, LAMBDA).unwrap();
        assert!(matches!(p.propagate(&f, -1e-3), Err(Error::NegativeDistance(_))));
        assert!(p.back_propagate(&f, -1e-3).is_err());
    }

    #[test]
    fn power_and_round_trip() {
        let grid = TransverseGrid::new(256, 4e-3).unwrap();
        let f = gaussian(grid, 200e-6);
        let p = Propagator::new(grid, LAMBDA).unwrap();
        let out = p.propagate(&f, 0.1).unwrap();
        assert!((out.power() - 1.0).abs() < 1e-9);
        let back = p.back_propagate(&out, 0.1).unwrap();
        let fid = inner_product(&f, &back).unwrap().norm_sqr();
        assert!(fid > 1.0 - 1e-9);
    }

    #[test]
    fn evanescent_components_are_removed() {
        // Sub-wavelength grid spacing so that part of k-space is evanescent.
        let grid = TransverseGrid::new(64, 64.0 * 0.3e-6).unwrap();
        let p = Propagator::new(grid, LAMBDA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<Complex64> = (0..grid.len()).map(|_| Complex64::new(rng.random(), 0.0)).collect();
        let f = PolarizedField::horizontal(&ScalarField::from_samples(grid, s).unwrap(), LAMBDA).unwrap();
        let out = p.propagate(&f, 1e-6).unwrap();
        assert!(out.power() < f.power());
    }

    #[test]
    fn obstacle_removes_disk_power() {
        let grid = TransverseGrid::new(1024, 10e-3).unwrap();
        let w0 = 1.253e-3;
        let f = gaussian(grid, w0);
        let obs = ObstacleSpec::centered(600e-6, 0.0);
        let out = apply_obstacle(&f, &obs).unwrap();
        let inside = f.h().power_in_disk(0.0, 0.0, 600e-6);
        assert!((f.power() - out.power() - inside).abs() < 1e-9);
        // Continuum value; the pixelated disk edge limits agreement.
        let analytic = (-2.0 * 0.6f64.powi(2) / 1.253f64.powi(2)).exp();
        assert!((out.power() - analytic).abs() < 5e-3);
    }

    #[test]
    fn obstacle_extremes() {
        let grid = TransverseGrid::new(64, 1e-3).unwrap();
        let f = gaussian(grid, 1e-4);
        let tiny = ObstacleSpec::centered(1e-9, 0.0);
        let out = apply_obstacle(&f, &tiny).unwrap();
        // Only the centre sample can fall inside.
        assert!(f.power() - out.power() <= f.intensity().iter().cloned().fold(0.0, f64::max) * grid.cell_area());

        let huge = ObstacleSpec::centered(0.49e-3, 0.0);
        let blocked = ScalarField::from_fn(grid, |x, y| {
            Complex64::new(if huge.contains(x, y) { 1.0 } else { 0.0 }, 0.0)
        });
        let inside_only = PolarizedField::horizontal(&blocked, LAMBDA).unwrap();
        assert_eq!(apply_obstacle(&inside_only, &huge).unwrap().power(), 0.0);
        assert!(ObstacleSpec::centered(0.6e-3, 0.0).validate(&grid).is_err());
    }

    #[test]
    fn channel_validation() {
        let grid = TransverseGrid::new(64, 1e-3).unwrap();
        let mut ch = ChannelSpec::single_obstacle(ObstacleSpec::centered(1e-4, 0.1), 0.2);
        assert!(ch.validate(&grid).is_ok());
        assert!((ch.distance_after_obstacle() - 0.2).abs() < 1e-15);
        ch.length = 0.05;
        assert!(ch.validate(&grid).is_err());
        let unsorted = ChannelSpec {
            length: 1.0,
            obstacles: vec![ObstacleSpec::centered(1e-4, 0.5), ObstacleSpec::centered(1e-4, 0.1)],
        };
        assert!(unsorted.validate(&grid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn propagation_is_linear(seed in any::<u64>(), dz in 0.0..0.5f64) {
            let grid = TransverseGrid::new(64, 2e-3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut random = || {
                let s: Vec<Complex64> = (0..grid.len())
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let h = ScalarField::from_samples(grid, s).unwrap();
                PolarizedField::horizontal(&h, LAMBDA).unwrap()
            };
            let a = random();
            let b = random();
            let p = Propagator::new(grid, LAMBDA).unwrap();
            let sum = p.propagate(&a.add(&b).unwrap(), dz).unwrap();
            let parts = p.propagate(&a, dz).unwrap().add(&p.propagate(&b, dz).unwrap()).unwrap();
            for (x, y) in sum.h().samples().iter().zip(parts.h().samples()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn obstacles_only_remove_power(r in 1e-5..4e-4f64, ox in -2e-5..2e-5f64) {
            let grid = TransverseGrid::new(64, 1e-3).unwrap();
            let f = gaussian(grid, 1.5e-4);
            let obs = ObstacleSpec { radius: r, offset_x: ox, offset_y: 0.0, z: 0.0 };
            let out = apply_obstacle(&f, &obs).unwrap();
            prop_assert!(out.power() <= f.power());
        }
    }
}

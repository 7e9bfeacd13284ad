//! Sampled transverse fields.
//!
//! Fields live on a square, axis-centered grid with `n` samples per side;
//! sample `j` sits at `x_j = (j - n/2) * spacing`. Samples are stored row-major
//! (`index = iy * n + ix`). Integrals use the midpoint rule, so the inner
//! product is `Σ conj(a) b * spacing²`.
//!
//! Polarized fields are stored in the linear (H, V) basis. The circular basis
//! is `|L⟩ = (1, i)/√2`, `|R⟩ = (1, -i)/√2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{positive, Error, Result};

/// Default samples per axis.
pub const DEFAULT_GRID_N: usize = 1024;
/// Default physical side length (m).
pub const DEFAULT_GRID_EXTENT: f64 = 10e-3;

const CHUNK: usize = 4096;

/// Order-stable parallel sum: partial sums are combined in chunk order, so
/// the result does not depend on the number of worker threads.
pub(crate) fn stable_sum<T, F>(items: &[T], f: F) -> Complex64
where
    T: Sync,
    F: Fn(&T) -> Complex64 + Sync,
{
    items
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(&f).sum::<Complex64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

pub(crate) fn stable_sum_real<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..end).map(&f).sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    n: usize,
    extent: f64,
}

impl TransverseGrid {
    /// `n` must be a power of two, at least 64.
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 64"
            )));
        }
        positive("extent", extent)?;
        Ok(Self { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of one sample cell.
    pub fn cell_area(&self) -> f64 {
        let d = self.spacing();
        d * d
    }

    /// Coordinate of sample `j` along either axis.
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    /// Cartesian position of a flat sample index.
    pub fn position(&self, index: usize) -> (f64, f64) {
        (self.coord(index % self.n), self.coord(index / self.n))
    }

    /// Polar position `(r, φ)` of a flat sample index.
    pub fn polar(&self, index: usize) -> (f64, f64) {
        let (x, y) = self.position(index);
        (x.hypot(y), y.atan2(x))
    }

    /// Flat index of the sample on the optical axis.
    pub fn center_index(&self) -> usize {
        (self.n / 2) * self.n + self.n / 2
    }
}

impl Default for TransverseGrid {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID_N,
            extent: DEFAULT_GRID_EXTENT,
        }
    }
}

fn check_same_grid(a: &TransverseGrid, b: &TransverseGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "grids differ: n = {} / {}, extent = {} / {}",
            a.n, b.n, a.extent, b.extent
        )))
    }
}

/// One complex amplitude per grid sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TransverseGrid,
    samples: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: TransverseGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_samples(grid: TransverseGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {}x{} grid",
                samples.len(),
                grid.n,
                grid.n
            )));
        }
        Ok(Self { grid, samples })
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn<F>(grid: TransverseGrid, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.position(i);
                f(x, y)
            })
            .collect();
        Self { grid, samples }
    }

    /// Samples `f(r, φ)` at every grid point.
    pub fn from_polar_fn<F>(grid: TransverseGrid, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (r, phi) = grid.polar(i);
                f(r, phi)
            })
            .collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.samples[iy * self.grid.n + ix]
    }

    /// `Σ |u|² spacing²`.
    pub fn power(&self) -> f64 {
        let s = &self.samples;
        stable_sum_real(s.len(), |i| s[i].norm_sqr()) * self.grid.cell_area()
    }

    /// `Σ conj(self) · other · spacing²`.
    pub fn inner_product(&self, other: &ScalarField) -> Result<Complex64> {
        check_same_grid(&self.grid, &other.grid)?;
        let (a, b) = (&self.samples, &other.samples);
        let pairs: Vec<usize> = (0..a.len()).collect();
        let sum = stable_sum(&pairs, |&i| a[i].conj() * b[i]);
        Ok(sum * self.grid.cell_area())
    }

    /// Scaled copy with unit power. Zero fields are returned unchanged.
    pub fn normalized(&self) -> Self {
        let p = self.power();
        if p > 0.0 {
            self.scaled(Complex64::new(1.0 / p.sqrt(), 0.0))
        } else {
            self.clone()
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.par_iter().map(|s| s * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.par_iter().map(|s| s.conj()).collect(),
        }
    }

    /// Pointwise product with another field on the same grid.
    pub fn multiply(&self, other: &ScalarField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            samples: self
                .samples
                .par_iter()
                .zip(other.samples.par_iter())
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            samples: self
                .samples
                .par_iter()
                .zip(other.samples.par_iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.par_iter().map(|s| s.norm_sqr()).collect()
    }

    /// Power inside a disk of `radius` around `(cx, cy)`.
    pub fn power_in_disk(&self, cx: f64, cy: f64, radius: f64) -> f64 {
        let g = self.grid;
        let s = &self.samples;
        stable_sum_real(s.len(), |i| {
            let (x, y) = g.position(i);
            if (x - cx).hypot(y - cy) < radius {
                s[i].norm_sqr()
            } else {
                0.0
            }
        }) * g.cell_area()
    }

    /// Fraction of power in the outer frame `|x| or |y| > (1 - band) * extent/2`.
    pub fn boundary_power_fraction(&self, band: f64) -> f64 {
        let total = self.power();
        if total == 0.0 {
            return 0.0;
        }
        let g = self.grid;
        let limit = (1.0 - band) * 0.5 * g.extent;
        let s = &self.samples;
        let edge = stable_sum_real(s.len(), |i| {
            let (x, y) = g.position(i);
            if x.abs() > limit || y.abs() > limit {
                s[i].norm_sqr()
            } else {
                0.0
            }
        }) * g.cell_area();
        edge / total
    }
}

/// Two-component transverse field in the (H, V) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedField {
    h: ScalarField,
    v: ScalarField,
    wavelength: f64,
}

impl PolarizedField {
    pub fn new(h: ScalarField, v: ScalarField, wavelength: f64) -> Result<Self> {
        check_same_grid(&h.grid, &v.grid)?;
        positive("wavelength", wavelength)?;
        Ok(Self { h, v, wavelength })
    }

    /// Uniformly polarized field `u(x, y) (jh, jv)ᵀ`.
    pub fn uniform(spatial: &ScalarField, jones: [Complex64; 2], wavelength: f64) -> Result<Self> {
        Self::new(
            spatial.scaled(jones[0]),
            spatial.scaled(jones[1]),
            wavelength,
        )
    }

    /// `u(x, y) |H⟩`.
    pub fn horizontal(spatial: &ScalarField, wavelength: f64) -> Result<Self> {
        Self::new(spatial.clone(), ScalarField::zeros(spatial.grid), wavelength)
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.h.grid
    }

    pub fn into_components(self) -> (ScalarField, ScalarField) {
        (self.h, self.v)
    }

    pub fn power(&self) -> f64 {
        self.h.power() + self.v.power()
    }

    pub fn normalized(&self) -> Self {
        let p = self.power();
        if p > 0.0 {
            self.scaled(Complex64::new(1.0 / p.sqrt(), 0.0))
        } else {
            self.clone()
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            h: self.h.scaled(factor),
            v: self.v.scaled(factor),
            wavelength: self.wavelength,
        }
    }

    pub fn add(&self, other: &PolarizedField) -> Result<Self> {
        check_wavelength(self.wavelength, other.wavelength)?;
        Self::new(self.h.add(&other.h)?, self.v.add(&other.v)?, self.wavelength)
    }

    /// Multiplies both components by the same scalar transmission.
    pub fn multiply_scalar(&self, mask: &ScalarField) -> Result<Self> {
        Self::new(self.h.multiply(mask)?, self.v.multiply(mask)?, self.wavelength)
    }

    /// Total intensity `|h|² + |v|²` per sample.
    pub fn intensity(&self) -> Vec<f64> {
        self.h
            .samples
            .par_iter()
            .zip(self.v.samples.par_iter())
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Stokes parameters `(S0, S1, S2, S3)` at one sample, with
    /// `S3 > 0` for |L⟩ under this crate's handedness convention.
    pub fn stokes_at(&self, index: usize) -> [f64; 4] {
        let eh = self.h.samples[index];
        let ev = self.v.samples[index];
        let cross = eh.conj() * ev;
        [
            eh.norm_sqr() + ev.norm_sqr(),
            eh.norm_sqr() - ev.norm_sqr(),
            2.0 * cross.re,
            2.0 * cross.im,
        ]
    }

    /// Intensity-weighted variance of the normalized Stokes vector over all
    /// samples whose intensity exceeds `threshold` times the peak.
    ///
    /// Zero for uniformly polarized fields; large for vector modes.
    pub fn polarization_variance(&self, threshold: f64) -> f64 {
        let intensity = self.intensity();
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut weight = 0.0;
        let mut mean = [0.0; 3];
        let mut second = 0.0;
        for (i, &w) in intensity.iter().enumerate() {
            if w <= threshold * peak {
                continue;
            }
            let s = self.stokes_at(i);
            let unit = [s[1] / s[0], s[2] / s[0], s[3] / s[0]];
            weight += w;
            for k in 0..3 {
                mean[k] += w * unit[k];
            }
            second += w * (unit[0] * unit[0] + unit[1] * unit[1] + unit[2] * unit[2]);
        }
        let m2: f64 = mean.iter().map(|m| (m / weight).powi(2)).sum();
        (second / weight - m2).max(0.0)
    }

    /// Converts to circular components.
    pub fn to_circular(&self) -> CircularField {
        let s = FRAC_1_SQRT_2;
        let i = Complex64::new(0.0, 1.0);
        let (l, r): (Vec<_>, Vec<_>) = self
            .h
            .samples
            .par_iter()
            .zip(self.v.samples.par_iter())
            .map(|(&h, &v)| (s * (h - i * v), s * (h + i * v)))
            .unzip();
        CircularField {
            l: ScalarField {
                grid: self.h.grid,
                samples: l,
            },
            r: ScalarField {
                grid: self.h.grid,
                samples: r,
            },
            wavelength: self.wavelength,
        }
    }
}

fn check_wavelength(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("wavelengths differ: {a} / {b}")))
    }
}

/// Polarized field expressed in the circular (L, R) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularField {
    pub l: ScalarField,
    pub r: ScalarField,
    pub wavelength: f64,
}

impl CircularField {
    pub fn to_linear(&self) -> PolarizedField {
        let s = FRAC_1_SQRT_2;
        let i = Complex64::new(0.0, 1.0);
        let (h, v): (Vec<_>, Vec<_>) = self
            .l
            .samples
            .par_iter()
            .zip(self.r.samples.par_iter())
            .map(|(&l, &r)| (s * (l + r), s * i * (l - r)))
            .unzip();
        PolarizedField {
            h: ScalarField {
                grid: self.l.grid,
                samples: h,
            },
            v: ScalarField {
                grid: self.l.grid,
                samples: v,
            },
            wavelength: self.wavelength,
        }
    }
}

/// `⟨a|b⟩ = Σ (a_h* b_h + a_v* b_v) spacing²`.
pub fn inner_product(a: &PolarizedField, b: &PolarizedField) -> Result<Complex64> {
    check_wavelength(a.wavelength, b.wavelength)?;
    Ok(a.h.inner_product(&b.h)? + a.v.inner_product(&b.v)?)
}

/// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`, insensitive to global phase.
pub fn fidelity(a: &PolarizedField, b: &PolarizedField) -> Result<f64> {
    let pa = a.power();
    let pb = b.power();
    if pa == 0.0 || pb == 0.0 {
        return Ok(0.0);
    }
    Ok(inner_product(a, b)?.norm_sqr() / (pa * pb))
}

/// Fraction of a scalar field's power in each azimuthal harmonic
/// `exp(i m φ)`, `m ∈ [-max_ell, max_ell]`.
///
/// The field is resampled bilinearly on a polar grid (one radial step per
/// grid spacing, 256 azimuthal samples) and Fourier-analyzed ring by ring.
/// Fractions are relative to the total polar-resampled power, so they sum to
/// at most one.
pub fn oam_spectrum(field: &ScalarField, max_ell: i32) -> Vec<(i32, f64)> {
    const AZIMUTHAL: usize = 256;
    let g = field.grid;
    let dr = g.spacing();
    let rings = ((0.5 * g.extent - 2.0 * dr) / dr).floor() as usize;
    let ells: Vec<i32> = (-max_ell..=max_ell).collect();

    let per_ring: Vec<(f64, Vec<f64>)> = (1..=rings)
        .into_par_iter()
        .map(|k| {
            let r = k as f64 * dr;
            let ring: Vec<Complex64> = (0..AZIMUTHAL)
                .map(|a| {
                    let phi = 2.0 * PI * a as f64 / AZIMUTHAL as f64;
                    bilinear(field, r * phi.cos(), r * phi.sin())
                })
                .collect();
            let total: f64 = ring.iter().map(|c| c.norm_sqr()).sum::<f64>() / AZIMUTHAL as f64;
            let harmonics = ells
                .iter()
                .map(|&m| {
                    let c: Complex64 = ring
                        .iter()
                        .enumerate()
                        .map(|(a, v)| {
                            let phi = 2.0 * PI * a as f64 / AZIMUTHAL as f64;
                            v * Complex64::from_polar(1.0, -(m as f64) * phi)
                        })
                        .sum::<Complex64>()
                        / AZIMUTHAL as f64;
                    c.norm_sqr() * r
                })
                .collect();
            (total * r, harmonics)
        })
        .collect();

    let total: f64 = per_ring.iter().map(|(t, _)| t).sum();
    ells.iter()
        .enumerate()
        .map(|(idx, &m)| {
            let p: f64 = per_ring.iter().map(|(_, h)| h[idx]).sum();
            (m, if total > 0.0 { p / total } else { 0.0 })
        })
        .collect()
}

/// Bilinear interpolation at a physical position inside the grid.
pub fn bilinear(field: &ScalarField, x: f64, y: f64) -> Complex64 {
    let g = field.grid;
    let n = g.n;
    let d = g.spacing();
    let fx = x / d + (n / 2) as f64;
    let fy = y / d + (n / 2) as f64;
    if fx < 0.0 || fy < 0.0 || fx >= (n - 1) as f64 || fy >= (n - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let ix = fx.floor() as usize;
    let iy = fy.floor() as usize;
    let tx = fx - ix as f64;
    let ty = fy - iy as f64;
    let s = &field.samples;
    let v00 = s[iy * n + ix];
    let v10 = s[iy * n + ix + 1];
    let v01 = s[(iy + 1) * n + ix];
    let v11 = s[(iy + 1) * n + ix + 1];
    v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> TransverseGrid {
        TransverseGrid::new(64, 1e-3).unwrap()
    }

    fn random_field(seed: u64, grid: TransverseGrid) -> PolarizedField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comp = || {
            let s: Vec<Complex64> = (0..grid.len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            ScalarField::from_samples(grid, s).unwrap()
        };
        let h = comp();
        let v = comp();
        PolarizedField::new(h, v, 810e-9).unwrap()
    }

    fn gaussian(grid: TransverseGrid, w: f64) -> ScalarField {
        ScalarField::from_polar_fn(grid, |r, _| Complex64::new((-r * r / (w * w)).exp(), 0.0))
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TransverseGrid::new(32, 1e-3).is_err());
        assert!(TransverseGrid::new(100, 1e-3).is_err());
        assert!(TransverseGrid::new(128, 0.0).is_err());
        assert!(TransverseGrid::new(128, f64::NAN).is_err());
        let g = TransverseGrid::new(128, 1e-3).unwrap();
        assert_eq!(g.coord(64), 0.0);
        assert_eq!(g.polar(g.center_index()).0, 0.0);
    }

    #[test]
    fn normalized_self_product_is_one() {
        let f = random_field(1, small_grid()).normalized();
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-9 && ip.im.abs() < 1e-9);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = random_field(1, small_grid());
        let b = random_field(2, TransverseGrid::new(128, 1e-3).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn pure_h_splits_evenly_between_circular_components() {
        let g = small_grid();
        let f = PolarizedField::horizontal(&gaussian(g, 2e-4), 810e-9).unwrap().normalized();
        let c = f.to_circular();
        assert!((c.l.power() - 0.5).abs() < 1e-12);
        assert!((c.r.power() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pure_l_has_no_r_component() {
        let g = small_grid();
        let s = FRAC_1_SQRT_2;
        let f = PolarizedField::uniform(
            &gaussian(g, 2e-4),
            [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            810e-9,
        )
        .unwrap();
        let c = f.to_circular();
        assert!(c.r.samples().iter().all(|v| v.norm() < 1e-15));
        assert!(f.stokes_at(g.center_index())[3] > 0.0);
    }

    #[test]
    fn oam_spectrum_of_vortex() {
        let g = TransverseGrid::new(256, 4e-3).unwrap();
        let f = ScalarField::from_polar_fn(g, |r, phi| {
            Complex64::from_polar(r * (-r * r / 0.5e-6).exp(), 2.0 * phi)
        });
        let spectrum = oam_spectrum(&f, 4);
        let p2 = spectrum.iter().find(|(m, _)| *m == 2).unwrap().1;
        assert!(p2 > 0.999, "ℓ=2 fraction {p2}");
    }

    #[test]
    fn grid_convergence_of_inner_products() {
        // Band-limited modes; doubling n at fixed extent must not change
        // their overlap by more than 1e-4 relative.
        let overlap = |n: usize| {
            let g = TransverseGrid::new(n, 10e-3).unwrap();
            let a = ScalarField::from_fn(g, |x, y| {
                let r2 = x * x + y * y;
                Complex64::from_polar((-r2 / (1.253e-3f64).powi(2)).exp(), y.atan2(x)) * (r2.sqrt() / 1e-3)
            });
            let b = ScalarField::from_fn(g, |x, y| {
                let r2 = (x - 2e-4).powi(2) + y * y;
                Complex64::from_polar((-r2 / (1.0e-3f64).powi(2)).exp(), (y).atan2(x - 2e-4)) * (r2.sqrt() / 1e-3)
            });
            a.inner_product(&b).unwrap()
        };
        let coarse = overlap(256);
        let fine = overlap(512);
        assert!((coarse - fine).norm() / fine.norm() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn circular_round_trip_is_identity(seed in any::<u64>()) {
            let f = random_field(seed, small_grid());
            let back = f.to_circular().to_linear();
            for (a, b) in f.h().samples().iter().zip(back.h().samples()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            for (a, b) in f.v().samples().iter().zip(back.v().samples()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn circular_basis_preserves_pointwise_intensity(seed in any::<u64>()) {
            let f = random_field(seed, small_grid());
            let c = f.to_circular();
            let lin = f.intensity();
            for (i, &p) in lin.iter().enumerate() {
                let q = c.l.samples()[i].norm_sqr() + c.r.samples()[i].norm_sqr();
                prop_assert!((p - q).abs() <= 1e-12 * p.max(1.0));
            }
            prop_assert!((f.power() - (c.l.power() + c.r.power())).abs() <= 1e-12 * f.power());
        }

        #[test]
        fn inner_product_is_conjugate_symmetric_and_bounded(s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = random_field(s1, small_grid());
            let b = random_field(s2, small_grid());
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() <= 1e-12 * ab.norm().max(1e-12));
            prop_assert!(ab.norm_sqr() <= a.power() * b.power() * (1.0 + 1e-12));
        }

        #[test]
        fn inner_product_is_sesquilinear(s1 in any::<u64>(), s2 in any::<u64>(), re in -2.0..2.0f64, im in -2.0..2.0f64) {
            let a = random_field(s1, small_grid());
            let b = random_field(s2, small_grid());
            let c = Complex64::new(re, im);
            let lhs = inner_product(&a.scaled(c), &b).unwrap();
            let rhs = c.conj() * inner_product(&a, &b).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-10));
            let sum = inner_product(&a, &a.add(&b).unwrap()).unwrap();
            let parts = inner_product(&a, &a).unwrap() + inner_product(&a, &b).unwrap();
            prop_assert!((sum - parts).norm() <= 1e-10 * parts.norm());
        }
    }
}

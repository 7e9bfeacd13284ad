//! Direct-summation diffraction reference shared by the integration tests.

use num_complex::Complex64;
use rustfft::FftPlanner;
use selfheal_core::field::ScalarField;

/// First Rayleigh–Sommerfeld integral evaluated on axis by direct summation.
/// The samples are first interpolated `UPSAMPLE`× by spectral zero padding
/// so the kernel phase stays resolved at short distances.
pub fn rayleigh_sommerfeld_on_axis(f: &ScalarField, z: f64, wavelength: f64) -> Complex64 {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let g = f.grid();
    let (fine, spacing) = upsample(f);
    let m = g.n() * UPSAMPLE;
    let origin = g.coord(0);
    let i = Complex64::new(0.0, 1.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for (idx, u) in fine.iter().enumerate() {
        let x = origin + (idx % m) as f64 * spacing;
        let y = origin + (idx / m) as f64 * spacing;
        let r = (x * x + y * y + z * z).sqrt();
        let kernel = (z / r) * (1.0 / r - i * k) * Complex64::from_polar(1.0 / r, k * r);
        sum += u * kernel;
    }
    sum * spacing * spacing / (2.0 * std::f64::consts::PI)
}

const UPSAMPLE: usize = 4;

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        fft.process(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
}

/// Band-limited interpolation of the samples; returns the fine samples and
/// their spacing. The Nyquist bin is split evenly between ±n/2.
fn upsample(f: &ScalarField) -> (Vec<Complex64>, f64) {
    let n = f.grid().n();
    let m = n * UPSAMPLE;
    let mut spectrum = f.samples().to_vec();
    fft2(&mut spectrum, n, false);
    let targets = |j: usize| -> Vec<(usize, f64)> {
        let half = n / 2;
        if j < half {
            vec![(j, 1.0)]
        } else if j == half {
            vec![(half, 0.5), (m - half, 0.5)]
        } else {
            vec![(m - (n - j), 1.0)]
        }
    };
    let mut fine = vec![Complex64::new(0.0, 0.0); m * m];
    for ky in 0..n {
        for kx in 0..n {
            for (ty, wy) in targets(ky) {
                for (tx, wx) in targets(kx) {
                    fine[ty * m + tx] += spectrum[ky * n + kx] * wx * wy;
                }
            }
        }
    }
    fft2(&mut fine, m, true);
    let scale = 1.0 / (n * n) as f64;
    fine.iter_mut().for_each(|v| *v *= scale);
    (fine, f.grid().spacing() / UPSAMPLE as f64)
}

pub fn relative_error(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

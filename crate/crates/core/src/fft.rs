//! Square 2D FFT built from row transforms and transposes.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    /// Inverse transform scaled by `1/n²`, so `inverse(forward(x)) = x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n, "buffer is not n×n");
        self.rows(plan, data);
        transpose(data, self.n);
        self.rows(plan, data);
        transpose(data, self.n);
    }

    fn rows(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(self.n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    let copy = data.to_vec();
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = copy[j * n + i];
        }
    });
}

/// Angular frequency of FFT bin `j` for `n` samples over `extent`, in the
/// usual unshifted order (non-negative frequencies first).
pub fn angular_frequency(j: usize, n: usize, extent: f64) -> f64 {
    let signed = if j < n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * signed / extent
}

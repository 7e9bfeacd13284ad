//! Prepare → transmit → measure for all 64 label pairs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{finite, Error, Result};
use crate::field::{inner_product, PolarizedField, TransverseGrid};
use crate::jones::{preparation_train, prepare_state_with, MubLabel, DEFAULT_Q};
use crate::modes::ModeSpec;
use crate::propagation::{ChannelSpec, NumericalWarning, Propagator, BAND_LIMIT_TOLERANCE};

use super::detection::{detection_mode, DetectionModel};

/// Everything needed to build one scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSetup {
    pub grid: TransverseGrid,
    /// Heralding mode; its charge is ignored.
    pub source: ModeSpec,
    pub channel: ChannelSpec,
    pub detection: DetectionModel,
    /// Probability added to every cell (uniform background).
    pub noise_floor: f64,
    /// q-plate charge of both encoder and decoder.
    pub q: f64,
}

impl ScatteringSetup {
    pub fn new(grid: TransverseGrid, source: ModeSpec, channel: ChannelSpec, detection: DetectionModel) -> Self {
        Self {
            grid,
            source,
            channel,
            detection,
            noise_floor: 0.0,
            q: DEFAULT_Q,
        }
    }
}

/// Detection probabilities indexed by (prepared, measured) label, in
/// [`MubLabel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMatrix {
    pub labels: Vec<MubLabel>,
    /// `|C_ij|²` without background.
    pub signal: Vec<Vec<f64>>,
    /// `signal + noise_floor`, capped at 1.
    pub raw: Vec<Vec<f64>>,
    /// `raw` divided by the row's sum over the prepared state's own basis.
    pub normalized: Vec<Vec<f64>>,
    /// Power of each prepared state that survives the channel.
    pub transmission: Vec<f64>,
    pub noise_floor: f64,
    #[serde(default)]
    pub warnings: Vec<NumericalWarning>,
}

fn same_basis(i: usize, j: usize) -> bool {
    MubLabel::ALL[i].basis() == MubLabel::ALL[j].basis()
}

impl ScatteringMatrix {
    pub fn from_signal(signal: Vec<Vec<f64>>, transmission: Vec<f64>, noise_floor: f64) -> Result<Self> {
        if signal.len() != 8 || signal.iter().any(|r| r.len() != 8) || transmission.len() != 8 {
            return Err(Error::ShapeMismatch("scattering matrix must be 8×8 with 8 transmissions".into()));
        }
        if !(noise_floor >= 0.0) || !noise_floor.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise floor",
                value: noise_floor,
            });
        }
        if let Some(bad) = signal.iter().flatten().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "scattering entry",
                value: *bad,
            });
        }
        let raw: Vec<Vec<f64>> = signal
            .iter()
            .map(|row| row.iter().map(|s| (s + noise_floor).min(1.0)).collect())
            .collect();
        let normalized = raw
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let sum: f64 = (0..8).filter(|&j| same_basis(i, j)).map(|j| row[j]).sum();
                row.iter().map(|v| if sum > 0.0 { v / sum } else { 0.0 }).collect()
            })
            .collect();
        Ok(Self {
            labels: MubLabel::ALL.to_vec(),
            signal,
            raw,
            normalized,
            transmission,
            noise_floor,
            warnings: Vec::new(),
        })
    }

    /// Same signal with a different background level.
    pub fn with_noise_floor(&self, noise_floor: f64) -> Result<Self> {
        let mut m = Self::from_signal(self.signal.clone(), self.transmission.clone(), noise_floor)?;
        m.warnings = self.warnings.clone();
        Ok(m)
    }

    /// Sum of raw entries over the prepared state's own basis.
    pub fn matched_sum(&self, i: usize) -> f64 {
        (0..8).filter(|&j| same_basis(i, j)).map(|j| self.raw[i][j]).sum()
    }

    /// Rows whose matched-basis sum vanishes.
    pub fn blocked_rows(&self) -> Vec<MubLabel> {
        (0..8).filter(|&i| self.matched_sum(i) <= 0.0).map(|i| MubLabel::ALL[i]).collect()
    }

    /// Mean row-normalized diagonal over rows that registered anything.
    pub fn matched_diagonal_mean(&self) -> f64 {
        let rows: Vec<usize> = (0..8).filter(|&i| self.matched_sum(i) > 0.0).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|&i| self.normalized[i][i]).sum::<f64>() / rows.len() as f64
    }

    /// CSV with a header row of measured labels and one row per prepared label.
    pub fn to_csv(&self, kind: MatrixKind) -> String {
        let data = match kind {
            MatrixKind::Signal => &self.signal,
            MatrixKind::Raw => &self.raw,
            MatrixKind::Normalized => &self.normalized,
        };
        let mut out = String::from("prepared");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(data) {
            out.push_str(l.as_str());
            for v in row {
                let _ = write!(out, ",{v:.9e}");
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV (`prepared,measured,value`) for heat-map tools.
    pub fn to_heatmap_csv(&self) -> String {
        let mut out = String::from("prepared,measured,raw,normalized\n");
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in self.labels.iter().enumerate() {
                let _ = writeln!(out, "{a},{b},{:.9e},{:.9e}", self.raw[i][j], self.normalized[i][j]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Signal,
    Raw,
    Normalized,
}

fn relabel(warnings: Vec<NumericalWarning>, label: MubLabel) -> Vec<NumericalWarning> {
    warnings
        .into_iter()
        .map(|w| match w {
            NumericalWarning::BandLimit { stage, fraction } => NumericalWarning::BandLimit {
                stage: format!("{label} {stage}"),
                fraction,
            },
            NumericalWarning::BoundaryPower { stage, fraction } => NumericalWarning::BoundaryPower {
                stage: format!("{label} {stage}"),
                fraction,
            },
            other => other,
        })
        .collect()
}

struct Row {
    amplitudes: Vec<Complex64>,
    transmission: f64,
    warnings: Vec<NumericalWarning>,
}

/// Builds the 8×8 matrix. Rows run in parallel; the result does not depend
/// on the thread count.
pub fn scattering_matrix(setup: &ScatteringSetup) -> Result<ScatteringMatrix> {
    let grid = setup.grid;
    let wavelength = setup.source.wavelength;
    finite("noise floor", setup.noise_floor)?;
    setup.channel.validate(&grid)?;
    let prop = Propagator::new(grid, wavelength)?;
    let profile = setup.source.with_ell(0).evaluate(grid, 0.0)?;
    let input = PolarizedField::horizontal(&profile, wavelength)?;
    let prepared: Vec<PolarizedField> = MubLabel::ALL
        .par_iter()
        .map(|l| prepare_state_with(*l, &input, setup.q))
        .collect::<Result<_>>()?;

    let rows: Vec<Row> = match setup.detection {
        DetectionModel::Ideal => {
            let length = setup.channel.length;
            MubLabel::ALL
                .par_iter()
                .zip(prepared.par_iter())
                .map(|(label, a)| {
                    let (f, warnings) = setup.channel.transmit(&prop, a)?;
                    let back = prop.back_propagate(&f, length)?;
                    let amplitudes = prepared
                        .iter()
                        .map(|b| inner_product(b, &back))
                        .collect::<Result<_>>()?;
                    Ok(Row {
                        amplitudes,
                        transmission: f.power(),
                        warnings: relabel(warnings, *label),
                    })
                })
                .collect::<Result<_>>()?
        }
        DetectionModel::HologramCascade { fiber_waist, decoder_z } => {
            let z_dec = decoder_z.unwrap_or_else(|| setup.channel.last_obstacle_z());
            if !(z_dec >= 0.0) || z_dec > setup.channel.length {
                return Err(Error::Precondition(format!(
                    "decoder position {z_dec} m lies outside the channel"
                )));
            }
            if setup.channel.obstacles.iter().any(|o| o.z > z_dec) {
                return Err(Error::Precondition(
                    "obstacles between decoder and receiver are not supported".into(),
                ));
            }
            let mode = detection_mode(&setup.source, fiber_waist, grid)?;
            let at_decoder = prop.back_propagate_scalar(&mode, setup.channel.length - z_dec)?;
            let carrier = PolarizedField::horizontal(&at_decoder, wavelength)?;
            // The probe is used only through an exact adjoint on the periodic
            // grid, so its boundary power is not a wrap-around hazard.
            let band = prop.spectral_edge_fraction(&carrier);
            let probe_warnings: Vec<NumericalWarning> = (band > BAND_LIMIT_TOLERANCE)
                .then(|| NumericalWarning::BandLimit {
                    stage: "detection mode at decoder".into(),
                    fraction: band,
                })
                .into_iter()
                .collect();
            let probes: Vec<PolarizedField> = MubLabel::ALL
                .iter()
                .map(|l| Ok(preparation_train(*l, setup.q)?.apply(&carrier)))
                .collect::<Result<_>>()?;
            let mut rows: Vec<Row> = MubLabel::ALL
                .par_iter()
                .zip(prepared.par_iter())
                .map(|(label, a)| {
                    let (f, warnings) = setup.channel.transmit_between(&prop, a, 0.0, z_dec)?;
                    let amplitudes = probes
                        .iter()
                        .map(|b| inner_product(b, &f))
                        .collect::<Result<_>>()?;
                    Ok(Row {
                        amplitudes,
                        transmission: f.power(),
                        warnings: relabel(warnings, *label),
                    })
                })
                .collect::<Result<_>>()?;
            rows[0].warnings.extend(probe_warnings);
            rows
        }
    };

    let signal = rows
        .iter()
        .map(|r| r.amplitudes.iter().map(|a| a.norm_sqr()).collect())
        .collect();
    let transmission = rows.iter().map(|r| r.transmission).collect();
    let mut matrix = ScatteringMatrix::from_signal(signal, transmission, setup.noise_floor)?;
    matrix.warnings = rows.into_iter().flat_map(|r| r.warnings).collect();
    for label in matrix.blocked_rows() {
        matrix.warnings.push(NumericalWarning::BlockedRow {
            label: label.to_string(),
        });
    }
    Ok(matrix)
}

/// Background level at which the equal-weight QBER of `matrix` reaches
/// `target`, found by bisection. `None` if the target is out of reach.
pub fn noise_floor_for_qber(matrix: &ScatteringMatrix, target: f64) -> Option<f64> {
    let qber = |eta: f64| matrix.with_noise_floor(eta).ok().map(|m| 1.0 - m.matched_diagonal_mean());
    let (mut lo, mut hi) = (0.0, 1.0);
    let (q_lo, q_hi) = (qber(lo)?, qber(hi)?);
    if !(q_lo <= target && target <= q_hi) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if qber(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_signal(scale: f64) -> Vec<Vec<f64>> {
        (0..8)
            .map(|i| {
                (0..8)
                    .map(|j| {
                        if i == j {
                            scale
                        } else if same_basis(i, j) {
                            0.0
                        } else {
                            scale / 4.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn normalization_and_noise() {
        let m = ScatteringMatrix::from_signal(identity_signal(0.5), vec![1.0; 8], 0.0).unwrap();
        assert_eq!(m.matched_diagonal_mean(), 1.0);
        assert_eq!(m.normalized[0][4], 0.25);
        let noisy = m.with_noise_floor(0.01).unwrap();
        let expected = 0.51 / 0.54;
        assert!((noisy.normalized[3][3] - expected).abs() < 1e-12);
        assert!(noisy.raw.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(ScatteringMatrix::from_signal(vec![vec![0.0; 8]; 7], vec![1.0; 8], 0.0).is_err());
        assert!(ScatteringMatrix::from_signal(identity_signal(0.5), vec![1.0; 8], -1.0).is_err());
        let mut bad = identity_signal(0.5);
        bad[2][2] = f64::NAN;
        assert!(ScatteringMatrix::from_signal(bad, vec![1.0; 8], 0.0).is_err());
    }

    #[test]
    fn blocked_rows_are_reported() {
        let mut s = identity_signal(0.5);
        s[1] = vec![0.0; 8];
        let m = ScatteringMatrix::from_signal(s, vec![1.0; 8], 0.0).unwrap();
        assert_eq!(m.blocked_rows(), vec![MubLabel::Psi01]);
        assert_eq!(m.matched_diagonal_mean(), 1.0);
    }

    #[test]
    fn noise_calibration_hits_target() {
        let m = ScatteringMatrix::from_signal(identity_signal(0.3), vec![1.0; 8], 0.0).unwrap();
        let eta = noise_floor_for_qber(&m, 0.2).unwrap();
        let q = 1.0 - m.with_noise_floor(eta).unwrap().matched_diagonal_mean();
        assert!((q - 0.2).abs() < 1e-12);
        assert!(noise_floor_for_qber(&m, 0.9).is_none());
    }

    #[test]
    fn csv_layout() {
        let m = ScatteringMatrix::from_signal(identity_signal(0.5), vec![1.0; 8], 0.0).unwrap();
        let csv = m.to_csv(MatrixKind::Normalized);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines[0].starts_with("prepared,psi00"));
        assert!(lines[1].starts_with("psi00,1.000000000e0"));
        assert_eq!(m.to_heatmap_csv().lines().count(), 65);
    }
}

//! Finite-statistics layer: Poisson coincidence counts per (prepared,
//! measured) cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::jones::{Basis, MubLabel};

use super::scattering::ScatteringMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRates {
    /// Heralded pairs per second entering the channel.
    pub pairs_per_second: f64,
    /// Seconds of acquisition.
    pub integration_time: f64,
    /// Probability that Alice (and, independently, Bob) picks the vector
    /// basis.
    #[serde(default = "half")]
    pub basis_probability: f64,
}

fn half() -> f64 {
    0.5
}

impl CountRates {
    /// `events` pairs in total.
    pub fn events(events: f64) -> Self {
        Self {
            pairs_per_second: events,
            integration_time: 1.0,
            basis_probability: 0.5,
        }
    }

    pub fn total_pairs(&self) -> f64 {
        self.pairs_per_second * self.integration_time
    }

    fn validate(&self) -> Result<()> {
        let checks = [
            ("pairs per second", self.pairs_per_second, self.pairs_per_second > 0.0),
            ("integration time", self.integration_time, self.integration_time >= 0.0),
            (
                "basis probability",
                self.basis_probability,
                (0.0..=1.0).contains(&self.basis_probability),
            ),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Probability of choosing `label` on one side.
    pub fn label_probability(&self, label: MubLabel) -> f64 {
        let basis = match label.basis() {
            Basis::Vector => self.basis_probability,
            Basis::Scalar => 1.0 - self.basis_probability,
        };
        basis / 4.0
    }
}

/// Simulated counts with their Poisson means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub labels: Vec<MubLabel>,
    pub counts: Vec<Vec<u64>>,
    pub expected: Vec<Vec<f64>>,
    pub rates: CountRates,
    pub seed: u64,
}

/// Draws independent Poisson counts for every cell. Each cell has its own
/// ChaCha stream, so results depend only on `seed`.
pub fn simulate_counts(matrix: &ScatteringMatrix, rates: &CountRates, seed: u64) -> Result<CountTable> {
    rates.validate()?;
    let n = rates.total_pairs();
    let mut counts = vec![vec![0u64; 8]; 8];
    let mut expected = vec![vec![0.0; 8]; 8];
    for (i, a) in MubLabel::ALL.iter().enumerate() {
        for (j, b) in MubLabel::ALL.iter().enumerate() {
            let lambda = n * rates.label_probability(*a) * rates.label_probability(*b) * matrix.raw[i][j];
            expected[i][j] = lambda;
            if lambda > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((i * 8 + j) as u64);
                let poisson = Poisson::new(lambda).map_err(|_| Error::InvalidParameter {
                    name: "Poisson mean",
                    value: lambda,
                })?;
                counts[i][j] = poisson.sample(&mut rng) as u64;
            }
        }
    }
    Ok(CountTable {
        labels: MubLabel::ALL.to_vec(),
        counts,
        expected,
        rates: *rates,
        seed,
    })
}

impl CountTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sifted counts for one prepared label (measured in the same basis).
    pub fn matched_total(&self, i: usize) -> u64 {
        (0..8)
            .filter(|&j| MubLabel::ALL[i].basis() == MubLabel::ALL[j].basis())
            .map(|j| self.counts[i][j])
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("prepared,measured,count,expected\n");
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in self.labels.iter().enumerate() {
                let _ = writeln!(out, "{a},{b},{},{:.6}", self.counts[i][j], self.expected[i][j]);
            }
        }
        out
    }
}

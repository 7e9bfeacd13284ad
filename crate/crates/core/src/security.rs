//! Error rates, high-dimensional entropy and the GLLP-type key rate.

use serde::{Deserialize, Serialize};

use crate::channel::{CountTable, ScatteringMatrix};
use crate::error::{Error, Result};
use crate::jones::MubLabel;
use crate::propagation::NumericalWarning;

/// How per-state error rates are combined into one QBER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QberWeighting {
    /// Every prepared state counts the same.
    #[default]
    Equal,
    /// States weighted by their sifted detection rate.
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub qber: f64,
    /// One standard error, when count statistics are available.
    pub uncertainty: Option<f64>,
    pub rows_used: usize,
    pub warnings: Vec<NumericalWarning>,
}

fn combine(
    errors: &[(usize, f64, f64)],
    weighting: QberWeighting,
) -> f64 {
    match weighting {
        QberWeighting::Equal => errors.iter().map(|e| e.1).sum::<f64>() / errors.len() as f64,
        QberWeighting::Counts => {
            let total: f64 = errors.iter().map(|e| e.2).sum();
            errors.iter().map(|e| e.1 * e.2).sum::<f64>() / total
        }
    }
}

fn blocked_warning(i: usize) -> NumericalWarning {
    log::warn!("{} registered no sifted detections; left out of the QBER", MubLabel::ALL[i]);
    NumericalWarning::BlockedRow {
        label: MubLabel::ALL[i].to_string(),
    }
}

/// `1 − mean(row-normalized matched diagonal)`, skipping blocked rows.
pub fn qber_from_matrix(m: &ScatteringMatrix, weighting: QberWeighting) -> Result<QberEstimate> {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    for i in 0..8 {
        let sum = m.matched_sum(i);
        if sum > 0.0 {
            errors.push((i, 1.0 - m.normalized[i][i], sum));
        } else {
            warnings.push(blocked_warning(i));
        }
    }
    if errors.is_empty() {
        return Err(Error::Precondition("every prepared state is blocked".into()));
    }
    Ok(QberEstimate {
        qber: combine(&errors, weighting),
        uncertainty: None,
        rows_used: errors.len(),
        warnings,
    })
}

/// QBER from sifted counts with a delta-method standard error.
pub fn qber_from_counts(t: &CountTable, weighting: QberWeighting) -> Result<QberEstimate> {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    let mut variances = Vec::new();
    for i in 0..8 {
        let n = t.matched_total(i) as f64;
        if n > 0.0 {
            let e = 1.0 - t.counts[i][i] as f64 / n;
            errors.push((i, e, n));
            variances.push((e * (1.0 - e) / n, n));
        } else {
            warnings.push(blocked_warning(i));
        }
    }
    if errors.is_empty() {
        return Err(Error::Precondition("no sifted counts".into()));
    }
    let qber = combine(&errors, weighting);
    let variance = match weighting {
        QberWeighting::Equal => {
            let k = errors.len() as f64;
            variances.iter().map(|v| v.0).sum::<f64>() / (k * k)
        }
        QberWeighting::Counts => {
            let total: f64 = variances.iter().map(|v| v.1).sum();
            variances.iter().map(|(v, n)| v * n * n).sum::<f64>() / (total * total)
        }
    };
    Ok(QberEstimate {
        qber,
        uncertainty: Some(variance.sqrt()),
        rows_used: errors.len(),
        warnings,
    })
}

fn check_rate(e: f64, d: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidParameter { name: "error rate", value: e });
    }
    if d < 2 {
        return Err(Error::InvalidParameter {
            name: "dimension",
            value: d as f64,
        });
    }
    Ok(())
}

/// `x log₂ x` with the continuous limit at 0.
fn xlog2(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// `H_d(e) = −(1−e) log₂(1−e) − e log₂(e/(d−1))`.
pub fn hd_entropy(e: f64, d: u32) -> Result<f64> {
    check_rate(e, d)?;
    let spread = if e > 0.0 { e * (d as f64 - 1.0).log2() } else { 0.0 };
    Ok(-xlog2(1.0 - e) - xlog2(e) + spread)
}

/// `I_AB = log₂ d + (1−e) log₂(1−e) + e log₂(e/(d−1))`.
pub fn mutual_information(e: f64, d: u32) -> Result<f64> {
    check_rate(e, d)?;
    let spread = if e > 0.0 { e * (d as f64 - 1.0).log2() } else { 0.0 };
    let direct = (d as f64).log2() + xlog2(1.0 - e) + xlog2(e) - spread;
    debug_assert!((direct - ((d as f64).log2() - hd_entropy(e, d)?)).abs() < 1e-12);
    Ok(direct)
}

/// Photon-number statistics of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhotonStatistics {
    /// Poissonian source with mean photon number `mu`.
    Poisson { mu: f64, q_mu: f64 },
    /// Explicit vacuum and single-photon probabilities.
    Probabilities { p0: f64, p1: f64, q_mu: f64 },
    /// Multi-photon fraction supplied directly.
    Direct { delta: f64 },
}

/// `P(n ≥ 2)` for a Poisson distribution, accurate for tiny `mu`.
fn poisson_multiphoton(mu: f64) -> f64 {
    if mu > 0.5 {
        return 1.0 - (-mu).exp() * (1.0 + mu);
    }
    let mut term = mu * mu / 2.0;
    let mut sum = 0.0f64;
    let mut k = 2.0;
    while term > 1e-18 * sum.max(f64::MIN_POSITIVE) {
        sum += term;
        k += 1.0;
        term *= mu / k;
    }
    (-mu).exp() * sum
}

fn check_yield(q_mu: f64) -> Result<()> {
    if !(q_mu > 0.0 && q_mu <= 1.0) {
        return Err(Error::InvalidParameter { name: "Q_mu", value: q_mu });
    }
    Ok(())
}

/// `Δ = (1 − P0 − P1)/Q_μ`, clamped to [0, 1].
pub fn multiphoton_fraction(stats: &PhotonStatistics) -> Result<f64> {
    let delta = match *stats {
        PhotonStatistics::Poisson { mu, q_mu } => {
            check_yield(q_mu)?;
            if !(mu >= 0.0) || !mu.is_finite() {
                return Err(Error::InvalidParameter { name: "mu", value: mu });
            }
            poisson_multiphoton(mu) / q_mu
        }
        PhotonStatistics::Probabilities { p0, p1, q_mu } => {
            check_yield(q_mu)?;
            let valid = |p: f64| (0.0..=1.0).contains(&p);
            if !valid(p0) || !valid(p1) || p0 + p1 > 1.0 + 1e-15 {
                return Err(Error::InvalidParameter {
                    name: "P0 + P1",
                    value: p0 + p1,
                });
            }
            (1.0 - p0 - p1) / q_mu
        }
        PhotonStatistics::Direct { delta } => {
            if !delta.is_finite() {
                return Err(Error::InvalidParameter { name: "delta", value: delta });
            }
            delta
        }
    };
    Ok(delta.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyRateVariant {
    /// Privacy-amplification term `1 − H_d`.
    AsPrinted,
    /// Privacy-amplification term `log₂ d − H_d`.
    #[default]
    TableConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    pub variant: KeyRateVariant,
    /// Secret bits per signal state.
    pub rate: f64,
    /// `rate / Q_μ`.
    pub ratio: f64,
    /// False when the rate is not positive.
    pub secure: bool,
}

/// `R_Δ = Q_μ [(1−Δ)(A − H_d(e/(1−Δ))) − f_EC H_d(e)]` with `A = 1` or
/// `log₂ d` depending on `variant`. Negative rates are returned unchanged.
pub fn key_rate(e: f64, delta: f64, d: u32, f_ec: f64, q_mu: f64, variant: KeyRateVariant) -> Result<KeyRate> {
    check_rate(e, d)?;
    check_yield(q_mu)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter { name: "delta", value: delta });
    }
    if !(f_ec > 0.0) || !f_ec.is_finite() {
        return Err(Error::InvalidParameter { name: "f_EC", value: f_ec });
    }
    let single = e / (1.0 - delta);
    if single > 1.0 {
        return Err(Error::InvalidParameter {
            name: "e/(1-delta)",
            value: single,
        });
    }
    let ceiling = match variant {
        KeyRateVariant::AsPrinted => 1.0,
        KeyRateVariant::TableConsistent => (d as f64).log2(),
    };
    let ratio = (1.0 - delta) * (ceiling - hd_entropy(single, d)?) - f_ec * hd_entropy(e, d)?;
    Ok(KeyRate {
        variant,
        rate: q_mu * ratio,
        ratio,
        secure: ratio > 0.0,
    })
}

/// Fixed protocol parameters of a security evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    #[serde(default = "default_dimension")]
    pub dimension: u32,
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
    #[serde(default)]
    pub variant: KeyRateVariant,
    #[serde(default)]
    pub weighting: QberWeighting,
}

fn default_dimension() -> u32 {
    4
}

fn default_f_ec() -> f64 {
    1.2
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            dimension: default_dimension(),
            f_ec: default_f_ec(),
            variant: KeyRateVariant::default(),
            weighting: QberWeighting::default(),
        }
    }
}

/// Every input that went into a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityInputs {
    pub e: f64,
    pub d: u32,
    pub delta: f64,
    pub mu: Option<f64>,
    pub q_mu: Option<f64>,
    pub f_ec: f64,
    pub variant: KeyRateVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub qber: f64,
    pub qber_uncertainty: Option<f64>,
    pub mutual_information: f64,
    pub delta: f64,
    /// Key rate per sifted signal in the selected variant.
    pub key_rate_ratio: f64,
    pub key_rate_ratio_as_printed: f64,
    pub key_rate_ratio_table_consistent: f64,
    pub secure: bool,
    /// Ψ₀₀ detection probability relative to the free-space reference.
    pub normalized_counts: Option<f64>,
    pub dimension: u32,
    pub inputs: SecurityInputs,
    #[serde(default)]
    pub warnings: Vec<NumericalWarning>,
}

fn stats_inputs(stats: &PhotonStatistics) -> (Option<f64>, Option<f64>) {
    match *stats {
        PhotonStatistics::Poisson { mu, q_mu } => (Some(mu), Some(q_mu)),
        PhotonStatistics::Probabilities { q_mu, .. } => (None, Some(q_mu)),
        PhotonStatistics::Direct { .. } => (None, None),
    }
}

/// Report for a known error rate (no matrix needed).
pub fn security_report_from_qber(
    e: f64,
    uncertainty: Option<f64>,
    stats: &PhotonStatistics,
    params: &SecurityParams,
) -> Result<SecurityReport> {
    let delta = multiphoton_fraction(stats)?;
    let (mu, q_mu) = stats_inputs(stats);
    // The ratio R/Q_μ does not depend on Q_μ; any valid yield works.
    let q = q_mu.unwrap_or(1.0);
    let d = params.dimension;
    let printed = key_rate(e, delta, d, params.f_ec, q, KeyRateVariant::AsPrinted)?;
    let table = key_rate(e, delta, d, params.f_ec, q, KeyRateVariant::TableConsistent)?;
    let chosen = match params.variant {
        KeyRateVariant::AsPrinted => printed,
        KeyRateVariant::TableConsistent => table,
    };
    if !chosen.secure {
        log::warn!("no secure key at e = {e:.4}, Δ = {delta:.3e}");
    }
    Ok(SecurityReport {
        qber: e,
        qber_uncertainty: uncertainty,
        mutual_information: mutual_information(e, d)?,
        delta,
        key_rate_ratio: chosen.ratio,
        key_rate_ratio_as_printed: printed.ratio,
        key_rate_ratio_table_consistent: table.ratio,
        secure: chosen.secure,
        normalized_counts: None,
        dimension: d,
        inputs: SecurityInputs {
            e,
            d,
            delta,
            mu,
            q_mu,
            f_ec: params.f_ec,
            variant: params.variant,
        },
        warnings: Vec::new(),
    })
}

/// Full report from a scattering matrix, optional counts (for the QBER
/// uncertainty) and an optional free-space reference (for NC).
pub fn security_report(
    matrix: &ScatteringMatrix,
    counts: Option<&CountTable>,
    stats: &PhotonStatistics,
    reference: Option<&ScatteringMatrix>,
    params: &SecurityParams,
) -> Result<SecurityReport> {
    let from_matrix = qber_from_matrix(matrix, params.weighting)?;
    let uncertainty = match counts {
        Some(t) => qber_from_counts(t, params.weighting)?.uncertainty,
        None => None,
    };
    let mut report = security_report_from_qber(from_matrix.qber, uncertainty, stats, params)?;
    report.normalized_counts = reference.and_then(|r| {
        let base = r.raw[0][0];
        (base > 0.0).then(|| matrix.raw[0][0] / base)
    });
    report.warnings = from_matrix.warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(hd_entropy(0.0, 4).unwrap(), 0.0);
        assert!((hd_entropy(0.04, 4).unwrap() - 0.306).abs() < 1e-3);
        assert!((hd_entropy(0.75, 4).unwrap() - 2.0).abs() < 1e-12);
        assert!(hd_entropy(1.2, 4).is_err());
        assert!(hd_entropy(0.1, 1).is_err());
    }

    #[test]
    fn mutual_information_matches_table() {
        for (e, expected) in [(0.04, 1.69), (0.05, 1.63), (0.15, 1.15), (0.51, 0.19)] {
            let i = mutual_information(e, 4).unwrap();
            assert!((i - expected).abs() <= 0.01, "I({e}) = {i}");
        }
        assert_eq!(mutual_information(0.0, 4).unwrap(), 2.0);
    }

    #[test]
    fn key_rate_examples() {
        let table = |e, delta| key_rate(e, delta, 4, 1.2, 1e-4, KeyRateVariant::TableConsistent).unwrap().ratio;
        assert!((table(0.04, 2e-3) - 1.32).abs() <= 0.02);
        assert!((table(0.05, 2e-3) - 1.19).abs() <= 0.02);
        assert!((table(0.15, 1.4e-3) - 0.13).abs() <= 0.02);
        assert_eq!(table(0.0, 0.0), 2.0);
        let printed = key_rate(0.0, 0.0, 4, 1.2, 1e-4, KeyRateVariant::AsPrinted).unwrap();
        assert_eq!(printed.ratio, 1.0);
        let hopeless = key_rate(0.51, 2e-3, 4, 1.2, 1e-4, KeyRateVariant::TableConsistent).unwrap();
        assert!(hopeless.ratio < 0.0 && !hopeless.secure);
        assert!(key_rate(0.9, 0.2, 4, 1.2, 1e-4, KeyRateVariant::TableConsistent).is_err());
        assert!(key_rate(0.1, 1.0, 4, 1.2, 1e-4, KeyRateVariant::TableConsistent).is_err());
    }

    #[test]
    fn multiphoton_examples() {
        let ideal = PhotonStatistics::Probabilities { p0: 0.3, p1: 0.7, q_mu: 1e-4 };
        assert_eq!(multiphoton_fraction(&ideal).unwrap(), 0.0);
        let poisson = multiphoton_fraction(&PhotonStatistics::Poisson { mu: 1e-3, q_mu: 1e-4 }).unwrap();
        assert!((poisson - 5.0e-3).abs() < 5e-6, "{poisson}");
        let direct = multiphoton_fraction(&PhotonStatistics::Direct { delta: 2e-3 }).unwrap();
        assert_eq!(direct, 2e-3);
        assert!(multiphoton_fraction(&PhotonStatistics::Poisson { mu: 1e-3, q_mu: 0.0 }).is_err());
        let big = multiphoton_fraction(&PhotonStatistics::Poisson { mu: 1.0, q_mu: 1e-4 }).unwrap();
        assert_eq!(big, 1.0);
    }

    #[test]
    fn poisson_tail_against_closed_form() {
        // Leading-order behaviour: P(n ≥ 2) ≈ μ²/2 (1 − 2μ/3).
        for mu in [1e-6, 1e-4, 1e-3, 1e-2] {
            let exact = poisson_multiphoton(mu);
            let approx = mu * mu / 2.0;
            let rel = (approx - exact).abs() / exact;
            assert!((rel - 2.0 * mu / 3.0).abs() < mu * mu, "μ = {mu}: {rel}");
            if mu <= 1e-3 {
                assert!(rel < 1e-3);
            }
        }
    }

    #[test]
    fn report_from_qber_echoes_inputs() {
        let stats = PhotonStatistics::Direct { delta: 2e-3 };
        let r = security_report_from_qber(0.04, Some(0.01), &stats, &SecurityParams::default()).unwrap();
        assert!((r.mutual_information - 1.69).abs() < 0.01);
        assert!((r.key_rate_ratio - 1.32).abs() < 0.02);
        assert_eq!(r.key_rate_ratio, r.key_rate_ratio_table_consistent);
        assert_eq!(r.inputs.delta, 2e-3);
        assert_eq!(r.inputs.f_ec, 1.2);
        assert!(r.secure);
    }

    fn matrix(diag: f64, off: f64) -> ScatteringMatrix {
        let signal = (0..8)
            .map(|i| {
                (0..8)
                    .map(|j| {
                        let same = (i < 4) == (j < 4);
                        if i == j {
                            diag
                        } else if same {
                            off
                        } else {
                            0.25 * (diag + 3.0 * off)
                        }
                    })
                    .collect()
            })
            .collect();
        ScatteringMatrix::from_signal(signal, vec![1.0; 8], 0.0).unwrap()
    }

    #[test]
    fn qber_limits() {
        let ideal = qber_from_matrix(&matrix(1.0, 0.0), QberWeighting::Equal).unwrap();
        assert_eq!(ideal.qber, 0.0);
        let random = qber_from_matrix(&matrix(0.25, 0.25), QberWeighting::Equal).unwrap();
        assert!((random.qber - 0.75).abs() < 1e-12);
        let blocked = matrix(0.0, 0.0);
        assert!(qber_from_matrix(&blocked, QberWeighting::Equal).is_err());
    }

    #[test]
    fn report_normalized_counts() {
        let free = matrix(0.5, 0.0);
        let obstructed = matrix(0.25, 0.01);
        let stats = PhotonStatistics::Direct { delta: 2e-3 };
        let params = SecurityParams::default();
        let own = security_report(&free, None, &stats, Some(&free), &params).unwrap();
        assert_eq!(own.normalized_counts, Some(1.0));
        let r = security_report(&obstructed, None, &stats, Some(&free), &params).unwrap();
        assert_eq!(r.normalized_counts, Some(0.5));
        let none = security_report(&obstructed, None, &stats, None, &params).unwrap();
        assert_eq!(none.normalized_counts, None);
        assert_eq!(none.qber, r.qber);
    }

    proptest! {
        #[test]
        fn information_identity(e in 0.0..0.99f64, d in prop::sample::select(vec![2u32, 4, 8])) {
            let lhs = mutual_information(e, d).unwrap();
            let rhs = (d as f64).log2() - hd_entropy(e, d).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!(lhs <= (d as f64).log2() + 1e-12);
        }

        #[test]
        fn entropy_is_concave(d in prop::sample::select(vec![2u32, 4, 8]), frac in 0.01..0.99f64) {
            let top = (d as f64 - 1.0) / d as f64;
            let h = 1e-4;
            let e = (frac * top).clamp(h, top - h);
            let second = hd_entropy(e + h, d).unwrap() - 2.0 * hd_entropy(e, d).unwrap() + hd_entropy(e - h, d).unwrap();
            prop_assert!(second <= 1e-12);
        }

        #[test]
        fn key_rate_decreases_with_error(delta in 0.0..0.01f64, variant in prop::sample::select(vec![KeyRateVariant::AsPrinted, KeyRateVariant::TableConsistent])) {
            let mut last = f64::INFINITY;
            for k in 0..=60 {
                let e = k as f64 * 0.01;
                let r = key_rate(e, delta, 4, 1.2, 1e-4, variant).unwrap().ratio;
                prop_assert!(r < last || k == 0);
                last = r;
            }
        }
    }
}

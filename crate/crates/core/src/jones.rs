//! Jones calculus: wave plates, q-plates and the horizontal polarizer, plus
//! the eight spin-orbit states used for key distribution.
//!
//! Matrices act on `(H, V)` column vectors. A q-plate's fast axis follows the
//! azimuth, so its matrix depends on the transverse position.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{fidelity, PolarizedField, ScalarField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones(pub [[Complex64; 2]; 2]);

impl Jones {
    pub const IDENTITY: Jones = Jones([[ONE, ZERO], [ZERO, ONE]]);

    fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Jones([
            [Complex64::new(a, 0.0), Complex64::new(b, 0.0)],
            [Complex64::new(c, 0.0), Complex64::new(d, 0.0)],
        ])
    }

    /// Tuned q-plate at azimuth `phi`.
    pub fn qplate(q: f64, phi: f64) -> Self {
        let (s, c) = (2.0 * q * phi).sin_cos();
        Self::real(c, s, s, -c)
    }

    pub fn half_wave(theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        Self::real(c, s, s, -c)
    }

    pub fn quarter_wave(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let off = Complex64::new(1.0, -1.0) * s * c;
        Jones([
            [Complex64::new(c * c, s * s), off],
            [off, Complex64::new(s * s, c * c)],
        ])
    }

    pub fn polarizer_h() -> Self {
        Self::real(1.0, 0.0, 0.0, 0.0)
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Jones) -> Jones {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Jones(out)
    }

    pub fn adjoint(&self) -> Jones {
        let a = &self.0;
        Jones([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let a = &self.0;
        [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
    }

    /// Frobenius norm of `J†J − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut sum = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { ONE } else { ZERO };
                sum += (p.0[r][c] - target).norm_sqr();
            }
        }
        sum.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JonesElement {
    /// Tuned q-plate; `q` must be a multiple of 1/2.
    QPlate { q: f64 },
    /// Half-wave plate with fast axis at `theta` (rad) from horizontal.
    HalfWave { theta: f64 },
    QuarterWave { theta: f64 },
    PolarizerH,
}

impl JonesElement {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::QPlate { q } => {
                let twice = 2.0 * q;
                if !twice.is_finite() || (twice - twice.round()).abs() > 1e-12 {
                    return Err(Error::InvalidParameter { name: "q", value: q });
                }
            }
            Self::HalfWave { theta } | Self::QuarterWave { theta } => {
                if !theta.is_finite() {
                    return Err(Error::InvalidParameter { name: "theta", value: theta });
                }
            }
            Self::PolarizerH => {}
        }
        Ok(())
    }

    pub fn is_position_dependent(&self) -> bool {
        matches!(self, Self::QPlate { .. })
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Self::PolarizerH)
    }

    /// Matrix at azimuth `phi`.
    pub fn matrix(&self, phi: f64) -> Jones {
        match *self {
            Self::QPlate { q } => Jones::qplate(q, phi),
            Self::HalfWave { theta } => Jones::half_wave(theta),
            Self::QuarterWave { theta } => Jones::quarter_wave(theta),
            Self::PolarizerH => Jones::polarizer_h(),
        }
    }
}

/// Jones elements in the order light meets them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OpticalTrain {
    pub elements: Vec<JonesElement>,
}

impl OpticalTrain {
    pub fn new(elements: Vec<JonesElement>) -> Result<Self> {
        for e in &elements {
            e.validate()?;
        }
        Ok(Self { elements })
    }

    /// Total matrix `J_n ⋯ J_1` at azimuth `phi`.
    pub fn matrix(&self, phi: f64) -> Jones {
        self.elements
            .iter()
            .fold(Jones::IDENTITY, |acc, e| e.matrix(phi).mul(&acc))
    }

    pub fn is_unitary(&self) -> bool {
        self.elements.iter().all(JonesElement::is_unitary)
    }

    fn map(&self, f: &PolarizedField, adjoint: bool) -> PolarizedField {
        let grid = *f.grid();
        let constant = !self.elements.iter().any(JonesElement::is_position_dependent);
        let fixed = {
            let m = self.matrix(0.0);
            if adjoint {
                m.adjoint()
            } else {
                m
            }
        };
        let (hs, vs) = (f.h().samples(), f.v().samples());
        let (h, v): (Vec<_>, Vec<_>) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let m = if constant {
                    fixed
                } else {
                    let m = self.matrix(grid.polar(i).1);
                    if adjoint {
                        m.adjoint()
                    } else {
                        m
                    }
                };
                let out = m.apply([hs[i], vs[i]]);
                (out[0], out[1])
            })
            .unzip();
        PolarizedField::new(
            ScalarField::from_samples(grid, h).expect("length preserved"),
            ScalarField::from_samples(grid, v).expect("length preserved"),
            f.wavelength(),
        )
        .expect("grid preserved")
    }

    /// Pointwise `J_n ⋯ J_1 f`.
    pub fn apply(&self, f: &PolarizedField) -> PolarizedField {
        self.map(f, false)
    }

    /// Pointwise `(J_n ⋯ J_1)† f`, i.e. the train traversed backwards.
    pub fn apply_adjoint(&self, f: &PolarizedField) -> PolarizedField {
        self.map(f, true)
    }
}

pub fn apply_element(e: &JonesElement, f: &PolarizedField) -> PolarizedField {
    OpticalTrain { elements: vec![*e] }.apply(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// Non-separable spin-orbit states.
    Vector,
    /// Uniformly polarized states.
    Scalar,
}

/// One of the eight prepared/measured states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MubLabel {
    Psi00,
    Psi01,
    Psi10,
    Psi11,
    Phi00,
    Phi01,
    Phi10,
    Phi11,
}

impl MubLabel {
    pub const ALL: [MubLabel; 8] = [
        Self::Psi00,
        Self::Psi01,
        Self::Psi10,
        Self::Psi11,
        Self::Phi00,
        Self::Phi01,
        Self::Phi10,
        Self::Phi11,
    ];
    pub const VECTOR: [MubLabel; 4] = [Self::Psi00, Self::Psi01, Self::Psi10, Self::Psi11];
    pub const SCALAR: [MubLabel; 4] = [Self::Phi00, Self::Phi01, Self::Phi10, Self::Phi11];

    /// Position in [`MubLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn basis(self) -> Basis {
        if self.index() < 4 {
            Basis::Vector
        } else {
            Basis::Scalar
        }
    }

    pub fn as_str(self) -> &'static str {
        ["psi00", "psi01", "psi10", "psi11", "phi00", "phi01", "phi10", "phi11"][self.index()]
    }
}

impl fmt::Display for MubLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MubLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == lower)
            .ok_or_else(|| Error::InvalidLabel(s.to_string()))
    }
}

impl Serialize for MubLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MubLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Wave-plate settings for one prepared state. `second` is `None` where the
/// second plate is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateSettings {
    pub first: f64,
    pub second: Option<f64>,
}

/// Plate angles for each label. Vector states use half-wave plates, scalar
/// states quarter-wave plates, around a q-plate.
pub fn plate_settings(label: MubLabel) -> PlateSettings {
    let (first, second) = match label {
        MubLabel::Psi00 => (0.0, None),
        MubLabel::Psi01 => (FRAC_PI_4, None),
        MubLabel::Psi10 => (0.0, Some(0.0)),
        MubLabel::Psi11 => (FRAC_PI_4, Some(0.0)),
        MubLabel::Phi00 => (FRAC_PI_4, Some(FRAC_PI_2)),
        MubLabel::Phi01 => (-FRAC_PI_4, Some(0.0)),
        MubLabel::Phi10 => (FRAC_PI_4, Some(0.0)),
        MubLabel::Phi11 => (-FRAC_PI_4, Some(FRAC_PI_2)),
    };
    PlateSettings { first, second }
}

/// Preparation train `P_H → plate(α₁) → q-plate → plate(α₂)`.
pub fn preparation_train(label: MubLabel, q: f64) -> Result<OpticalTrain> {
    let settings = plate_settings(label);
    let plate = |theta| match label.basis() {
        Basis::Vector => JonesElement::HalfWave { theta },
        Basis::Scalar => JonesElement::QuarterWave { theta },
    };
    let mut elements = vec![JonesElement::PolarizerH, plate(settings.first), JonesElement::QPlate { q }];
    if let Some(second) = settings.second {
        elements.push(plate(second));
    }
    OpticalTrain::new(elements)
}

/// Default q-plate charge.
pub const DEFAULT_Q: f64 = 0.5;

/// Largest V-power fraction accepted as "H-polarized".
pub const H_PURITY_TOLERANCE: f64 = 1e-6;

fn check_h_polarized(input: &PolarizedField) -> Result<()> {
    let total = input.power();
    if !(total > 0.0) {
        return Err(Error::Precondition("input field carries no power".into()));
    }
    let v = input.v().power() / total;
    if v > H_PURITY_TOLERANCE {
        return Err(Error::Precondition(format!(
            "input must be H-polarized; V power fraction is {v:.3e}"
        )));
    }
    Ok(())
}

/// Alice's state for `label` built from an H-polarized heralded input,
/// unit-normalized. Uses a q = 1/2 plate.
pub fn prepare_state(label: MubLabel, input: &PolarizedField) -> Result<PolarizedField> {
    prepare_state_with(label, input, DEFAULT_Q)
}

pub fn prepare_state_with(label: MubLabel, input: &PolarizedField, q: f64) -> Result<PolarizedField> {
    check_h_polarized(input)?;
    let out = preparation_train(label, q)?.apply(input);
    if !(out.power() > 0.0) {
        return Err(Error::Precondition("preparation train blocked the input".into()));
    }
    Ok(out.normalized())
}

/// Analytic state in the basis `{|R,+ℓ⟩, |R,−ℓ⟩, |L,+ℓ⟩, |L,−ℓ⟩}`.
pub fn mub_state_vector(label: MubLabel) -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    let p = Complex64::new(0.5, 0.5);
    let m = Complex64::new(0.5, -0.5);
    let r = |x: f64| Complex64::new(x, 0.0);
    match label {
        MubLabel::Psi00 => [r(s), ZERO, ZERO, r(s)],
        MubLabel::Psi01 => [r(s), ZERO, ZERO, r(-s)],
        MubLabel::Psi10 => [ZERO, r(s), r(s), ZERO],
        MubLabel::Psi11 => [ZERO, r(-s), r(s), ZERO],
        // |D⟩ = ((1+i)|R⟩ + (1−i)|L⟩)/2 and |A⟩ = ((1−i)|R⟩ + (1+i)|L⟩)/2
        MubLabel::Phi00 => [ZERO, p, ZERO, m],
        MubLabel::Phi01 => [p, ZERO, m, ZERO],
        MubLabel::Phi10 => [ZERO, m, ZERO, p],
        MubLabel::Phi11 => [m, ZERO, p, ZERO],
    }
}

/// `⟨a|b⟩` of two abstract 4-vectors.
pub fn vector_overlap(a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Builds `Σ c_k |pol_k⟩ u(x, y) exp(±iℓφ)` from a 4-vector and a
/// charge-free profile `u`.
pub fn synthesize(
    coefficients: &[Complex64; 4],
    profile: &ScalarField,
    ell: i32,
    wavelength: f64,
) -> Result<PolarizedField> {
    let s = FRAC_1_SQRT_2;
    let right = [Complex64::new(s, 0.0), Complex64::new(0.0, -s)];
    let left = [Complex64::new(s, 0.0), Complex64::new(0.0, s)];
    let grid = *profile.grid();
    let u = profile.samples();
    let (h, v): (Vec<_>, Vec<_>) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let phi = grid.polar(i).1;
            let plus = Complex64::from_polar(1.0, ell as f64 * phi);
            let minus = plus.conj();
            let r = coefficients[0] * plus + coefficients[1] * minus;
            let l = coefficients[2] * plus + coefficients[3] * minus;
            (
                u[i] * (r * right[0] + l * left[0]),
                u[i] * (r * right[1] + l * left[1]),
            )
        })
        .unzip();
    PolarizedField::new(
        ScalarField::from_samples(grid, h)?,
        ScalarField::from_samples(grid, v)?,
        wavelength,
    )
}

/// Outcome of a mutual-unbiasedness check between two candidate bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MubCheck {
    /// `|⟨a_i|b_j⟩|²`.
    pub overlaps: Vec<Vec<f64>>,
    pub a_orthonormal: bool,
    pub b_orthonormal: bool,
    /// Largest deviation of any overlap from `1/d`.
    pub max_deviation: f64,
    pub is_mub: bool,
}

fn gram_is_identity<T>(set: &[T], overlap: &impl Fn(&T, &T) -> Complex64, tol: f64) -> bool {
    set.iter().enumerate().all(|(i, a)| {
        set.iter().enumerate().all(|(j, b)| {
            let target = if i == j { 1.0 } else { 0.0 };
            (overlap(a, b).norm_sqr() - target).abs() <= tol
        })
    })
}

fn check_sets<T>(a: &[T], b: &[T], overlap: impl Fn(&T, &T) -> Complex64, tol: f64) -> MubCheck {
    let d = a.len().max(1) as f64;
    let overlaps: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| overlap(x, y).norm_sqr()).collect())
        .collect();
    let max_deviation = overlaps
        .iter()
        .flatten()
        .map(|v| (v - 1.0 / d).abs())
        .fold(0.0, f64::max);
    let a_orthonormal = gram_is_identity(a, &overlap, tol);
    let b_orthonormal = gram_is_identity(b, &overlap, tol);
    MubCheck {
        is_mub: a_orthonormal && b_orthonormal && a.len() == b.len() && max_deviation <= tol,
        overlaps,
        a_orthonormal,
        b_orthonormal,
        max_deviation,
    }
}

/// Analytic check on label sets.
pub fn check_mub(a: &[MubLabel], b: &[MubLabel], tol: f64) -> MubCheck {
    let va: Vec<_> = a.iter().map(|l| mub_state_vector(*l)).collect();
    let vb: Vec<_> = b.iter().map(|l| mub_state_vector(*l)).collect();
    check_sets(&va, &vb, vector_overlap, tol)
}

/// Same check on sampled fields (each assumed unit-normalized).
pub fn check_mub_fields(a: &[PolarizedField], b: &[PolarizedField], tol: f64) -> Result<MubCheck> {
    for (x, y) in a.iter().zip(b) {
        crate::field::inner_product(x, y)?;
    }
    Ok(check_sets(
        a,
        b,
        |x, y| crate::field::inner_product(x, y).unwrap_or(ZERO),
        tol,
    ))
}

/// Fidelity between a prepared field and the synthesized analytic state.
pub fn preparation_fidelity(label: MubLabel, input: &PolarizedField, ell: i32) -> Result<f64> {
    let prepared = prepare_state(label, input)?;
    let target = synthesize(&mub_state_vector(label), input.h(), ell, input.wavelength())?;
    fidelity(&target, &prepared)
}

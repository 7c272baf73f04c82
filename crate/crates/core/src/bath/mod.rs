//! Gaussian bosonic baths: two-point correlation functions, Wick moments and
//! ordered cumulants.
//!
//! The bath operator is `B(t) = sum_j g_j (a_j e^{-i w_j t} + h.c.)`, or its
//! continuum limit with spectral density `J(w) = sum_j g_j^2 delta(w - w_j)`.
//! The thermal two-point function is
//!
//! `C(u) = <dB(t + u) dB(t)> = int_0^inf J(w) [coth(beta w / 2) cos(w u) - i sin(w u)] dw`
//!
//! where `dB = B - m` and `m(t) = <B(t)>` is an optional classical mean field.

mod quad;
mod table;
mod wick;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, C64};

pub use quad::integrate;
pub use table::{build_correlation_table, CorrelationTable};
pub use wick::{ordered_cumulant, wick_moment, Pin, MAX_MOMENT_ORDER};
pub(crate) use wick::{cumulant_unchecked, GridCorrelator};

/// Relative tolerance of the spectral integrals.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Upper frequency limit of the Ohmic integrals, in units of the cutoff.
const OHMIC_CUTOFF_MULTIPLE: f64 = 50.0;
const MATSUBARA_MAX_TERMS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub g: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensity {
    /// `J(w) = alpha w exp(-w / omega_c)`.
    OhmicExp { alpha: f64, omega_c: f64 },
    /// `J(w) = (2 lambda gamma / pi) w / (w^2 + gamma^2)`, reorganization
    /// energy `lambda`.
    Drude { lambda: f64, gamma: f64 },
    DiscreteModes { modes: Vec<Mode> },
}

impl SpectralDensity {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        match self {
            SpectralDensity::OhmicExp { alpha, omega_c } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha must be non-negative, got {alpha}"
                    )));
                }
                positive("omega_c", *omega_c)
            }
            SpectralDensity::Drude { lambda, gamma } => {
                positive("lambda", *lambda)?;
                positive("gamma", *gamma)
            }
            SpectralDensity::DiscreteModes { modes } => {
                for m in modes {
                    positive("mode frequency", m.omega)?;
                    if !m.g.is_finite() {
                        return Err(Error::InvalidParameter("mode coupling must be finite".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// `J(w) / w`, finite at `w = 0`.
    fn j_over_omega(&self, w: f64) -> f64 {
        match self {
            SpectralDensity::OhmicExp { alpha, omega_c } => alpha * (-w / omega_c).exp(),
            SpectralDensity::Drude { lambda, gamma } => {
                2.0 * lambda * gamma / PI / (w * w + gamma * gamma)
            }
            SpectralDensity::DiscreteModes { .. } => unreachable!("discrete modes are summed"),
        }
    }
}

/// Inverse temperature; serialized as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseTemperature {
    Finite(f64),
    Infinite,
}

impl InverseTemperature {
    pub fn validate(&self) -> Result<()> {
        match self {
            InverseTemperature::Finite(b) if !(b.is_finite() && *b > 0.0) => Err(
                Error::InvalidParameter(format!("beta must be positive, got {b}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            InverseTemperature::Finite(b) => *b,
            InverseTemperature::Infinite => f64::INFINITY,
        }
    }

    /// `w coth(beta w / 2)`, continuous at `w = 0`.
    fn omega_coth(&self, w: f64) -> f64 {
        match self {
            InverseTemperature::Infinite => w,
            InverseTemperature::Finite(beta) => {
                let x = 0.5 * beta * w;
                let x_coth = if x.abs() < 1e-4 {
                    1.0 + x * x / 3.0
                } else {
                    x / x.tanh()
                };
                2.0 / beta * x_coth
            }
        }
    }

    fn coth_half(&self, w: f64) -> f64 {
        match self {
            InverseTemperature::Infinite => 1.0,
            InverseTemperature::Finite(beta) => 1.0 / (0.5 * beta * w).tanh(),
        }
    }
}

impl fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InverseTemperature::Finite(b) => write!(f, "{b}"),
            InverseTemperature::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for InverseTemperature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InverseTemperature::Finite(b) => s.serialize_f64(*b),
            InverseTemperature::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(b) => Ok(InverseTemperature::Finite(b)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(InverseTemperature::Infinite)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "beta must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

/// Classical mean `m(t) = <B(t)>` of the bath operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanField {
    Constant {
        value: f64,
    },
    /// `amplitude cos(frequency t + phase)`.
    Harmonic {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Coherent displacements `alpha_j = [re, im]` of discrete modes:
    /// `m(t) = sum_j 2 g_j Re(alpha_j e^{-i w_j t})`.
    Coherent { displacements: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub spectral_density: SpectralDensity,
    pub beta: InverseTemperature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<MeanField>,
}

impl BathSpec {
    pub fn new(spectral_density: SpectralDensity, beta: InverseTemperature) -> Self {
        BathSpec {
            spectral_density,
            beta,
            mean: None,
        }
    }

    pub fn with_mean(mut self, mean: MeanField) -> Self {
        self.mean = Some(mean);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral_density.validate()?;
        self.beta.validate()?;
        if let Some(MeanField::Coherent { displacements }) = &self.mean {
            match &self.spectral_density {
                SpectralDensity::DiscreteModes { modes } if modes.len() == displacements.len() => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "coherent mean field needs one displacement per discrete mode".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn has_mean(&self) -> bool {
        self.mean.is_some()
    }

    /// `m(t)`.
    pub fn mean_at(&self, t: f64) -> f64 {
        match &self.mean {
            None => 0.0,
            Some(MeanField::Constant { value }) => *value,
            Some(MeanField::Harmonic {
                amplitude,
                frequency,
                phase,
            }) => amplitude * (frequency * t + phase).cos(),
            Some(MeanField::Coherent { displacements }) => match &self.spectral_density {
                SpectralDensity::DiscreteModes { modes } => modes
                    .iter()
                    .zip(displacements)
                    .map(|(m, a)| {
                        let alpha = C64::new(a[0], a[1]);
                        2.0 * m.g * (alpha * C64::from_polar(1.0, -m.omega * t)).re
                    })
                    .sum(),
                _ => 0.0,
            },
        }
    }

    pub fn describe(&self) -> String {
        let j = match &self.spectral_density {
            SpectralDensity::OhmicExp { alpha, omega_c } => {
                format!("ohmic_exp(alpha={alpha}, omega_c={omega_c})")
            }
            SpectralDensity::Drude { lambda, gamma } => {
                format!("drude(lambda={lambda}, gamma={gamma})")
            }
            SpectralDensity::DiscreteModes { modes } => format!("discrete({} modes)", modes.len()),
        };
        let mean = if self.has_mean() { ", mean field" } else { "" };
        format!("{j}, beta={}{mean}", self.beta)
    }
}

/// `C(u)`, the connected thermal two-point function.
pub fn thermal_correlation(bath: &BathSpec, u: f64) -> Result<C64> {
    bath.validate()?;
    if !u.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {u}")));
    }
    if u < 0.0 {
        return thermal_correlation(bath, -u).map(|c| c.conj());
    }
    match &bath.spectral_density {
        SpectralDensity::DiscreteModes { modes } => Ok(modes
            .iter()
            .map(|m| {
                let g2 = m.g * m.g;
                let (s, c) = (m.omega * u).sin_cos();
                C64::new(g2 * bath.beta.coth_half(m.omega) * c, -g2 * s)
            })
            .sum()),
        SpectralDensity::OhmicExp { alpha, omega_c } => match bath.beta {
            InverseTemperature::Infinite => {
                let denom = C64::new(1.0, omega_c * u);
                Ok(C64::new(alpha * omega_c * omega_c, 0.0) / (denom * denom))
            }
            InverseTemperature::Finite(_) => ohmic_quadrature(bath, *omega_c, u),
        },
        SpectralDensity::Drude { lambda, gamma } => match bath.beta {
            InverseTemperature::Infinite => Err(Error::UnsupportedBath(
                "the Drude correlation function is only available at finite temperature".into(),
            )),
            InverseTemperature::Finite(beta) => drude_matsubara(*lambda, *gamma, beta, u),
        },
    }
}

fn panels_for(omega_max: f64, u: f64) -> usize {
    ((omega_max * u.abs() / PI).ceil() as usize).clamp(8, 4096)
}

/// Absolute error floor relative to the scale `alpha omega_c^2` of `C(0)`.
const QUAD_ABS_FLOOR: f64 = 1e-14;

fn ohmic_scale(j: &SpectralDensity) -> f64 {
    match j {
        SpectralDensity::OhmicExp { alpha, omega_c } => alpha * omega_c * omega_c,
        _ => 1.0,
    }
}

fn ohmic_quadrature(bath: &BathSpec, omega_c: f64, u: f64) -> Result<C64> {
    let j = &bath.spectral_density;
    let beta = bath.beta;
    let top = OHMIC_CUTOFF_MULTIPLE * omega_c;
    integrate(
        |w| {
            let jw = j.j_over_omega(w);
            let (s, c) = (w * u).sin_cos();
            C64::new(jw * beta.omega_coth(w) * c, -jw * w * s)
        },
        0.0,
        top,
        panels_for(top, u),
        QUAD_REL_TOL,
        QUAD_ABS_FLOOR * ohmic_scale(j),
    )
}

/// Matsubara expansion, valid for `u > 0`:
/// `C(u) = lambda gamma [cot(beta gamma / 2) - i] e^{-gamma u}
///        + (4 lambda gamma / beta) sum_k nu_k / (nu_k^2 - gamma^2) e^{-nu_k u}`.
fn drude_matsubara(lambda: f64, gamma: f64, beta: f64, u: f64) -> Result<C64> {
    if u == 0.0 {
        return Err(Error::Divergent(
            "the Drude correlation function diverges at u = 0".into(),
        ));
    }
    let nu1 = 2.0 * PI / beta;
    let resonance = (gamma / nu1).round();
    if resonance >= 1.0 && (gamma - resonance * nu1).abs() < 1e-9 * gamma {
        return Err(Error::InvalidParameter(
            "Drude cutoff coincides with a Matsubara frequency".into(),
        ));
    }
    let lead = C64::new(lambda * gamma / (0.5 * beta * gamma).tan(), -lambda * gamma)
        * (-gamma * u).exp();
    // Split nu/(nu^2 - g^2) = 1/nu + g^2/(nu (nu^2 - g^2)); the 1/nu part sums to
    // -(beta/2pi) ln(1 - e^{-nu_1 u}).
    let x = (-nu1 * u).exp();
    let mut series = -(-x).ln_1p() / nu1;
    let mut k = 1usize;
    loop {
        let nu = nu1 * k as f64;
        let term = gamma * gamma / (nu * (nu * nu - gamma * gamma)) * (-nu * u).exp();
        series += term;
        if (term.abs() * k as f64 <= 1e-16 * series.abs() && nu > 2.0 * gamma)
            || k >= MATSUBARA_MAX_TERMS
        {
            break;
        }
        k += 1;
    }
    Ok(lead + C64::new(4.0 * lambda * gamma / beta * series, 0.0))
}

/// `(S, chi)` with `S(t, s) = Re C(t - s)` (the symmetrized, connected noise
/// kernel) and `chi(t, s) = i <[B(t), B(s)]> = -2 Im C(t - s)`. The mean field
/// cancels in both.
pub fn noise_and_response(bath: &BathSpec, t: f64, s: f64) -> Result<(f64, f64)> {
    let c = thermal_correlation(bath, t - s)?;
    Ok((c.re, -2.0 * c.im))
}

/// `int_0^t Re C(s) ds = int J(w) coth(beta w / 2) sin(w t) / w dw`.
pub fn integrated_noise(bath: &BathSpec, t: f64) -> Result<f64> {
    bath.validate()?;
    if t < 0.0 {
        return integrated_noise(bath, -t).map(|v| -v);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match &bath.spectral_density {
        SpectralDensity::DiscreteModes { modes } => Ok(modes
            .iter()
            .map(|m| m.g * m.g * bath.beta.coth_half(m.omega) * (m.omega * t).sin() / m.omega)
            .sum()),
        SpectralDensity::OhmicExp { alpha, omega_c } => match bath.beta {
            InverseTemperature::Infinite => {
                let x = omega_c * t;
                Ok(alpha * omega_c * x / (1.0 + x * x))
            }
            InverseTemperature::Finite(_) => {
                let j = &bath.spectral_density;
                let beta = bath.beta;
                let top = OHMIC_CUTOFF_MULTIPLE * omega_c;
                let v = integrate(
                    |w| {
                        let sinc = if w * t < 1e-8 { t } else { (w * t).sin() / w };
                        C64::new(j.j_over_omega(w) * beta.omega_coth(w) * sinc, 0.0)
                    },
                    0.0,
                    top,
                    panels_for(top, t),
                    QUAD_REL_TOL,
                    QUAD_ABS_FLOOR * ohmic_scale(j) * t,
                )?;
                Ok(v.re)
            }
        },
        SpectralDensity::Drude { lambda, gamma } => match bath.beta {
            InverseTemperature::Infinite => Err(Error::UnsupportedBath(
                "the Drude correlation function is only available at finite temperature".into(),
            )),
            InverseTemperature::Finite(beta) => {
                let nu1 = 2.0 * PI / beta;
                let mut acc = lambda / (0.5 * beta * gamma).tan() * (1.0 - (-gamma * t).exp());
                let pref = 4.0 * lambda * gamma / beta;
                let mut k = 1usize;
                loop {
                    let nu = nu1 * k as f64;
                    let term = pref / (nu * nu - gamma * gamma) * (1.0 - (-nu * t).exp());
                    acc += term;
                    if (k >= 1000 && nu > 2.0 * gamma) || k >= MATSUBARA_MAX_TERMS {
                        // Remaining tail ~ pref / nu1^2 * sum_{j>k} 1/j^2.
                        acc += pref / (nu1 * nu1) / k as f64;
                        break;
                    }
                    k += 1;
                }
                Ok(acc)
            }
        },
    }
}

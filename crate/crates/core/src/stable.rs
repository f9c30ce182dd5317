//! Symmetric α-stable variates, the auxiliary positive stable law, Poisson
//! arrivals, Rademacher signs, the Fréchet law and the analytic constants
//! that tie maxima of stable fields to Fréchet limits.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Width of the band around α = 1 where `c_alpha` returns the limit 2/π.
const C_ALPHA_UNIT_BAND: f64 = 1e-6;

/// Stability index α.
///
/// Model code requires 0 < α < 2. The Gaussian endpoint α = 2 can only be
/// built through [`StabilityIndex::gaussian_diagnostic`] and is accepted by
/// pure quadrature routines.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StabilityIndex(f64);

impl StabilityIndex {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 2.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::param("alpha", format!("{alpha} is outside (0, 2)")))
        }
    }

    /// α = 2, for diagnostics against Gaussian closed forms.
    pub fn gaussian_diagnostic() -> Self {
        Self(2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_diagnostic(self) -> bool {
        self.0 == 2.0
    }

    /// Rejects the diagnostic α = 2 where a genuine stable model is needed.
    pub fn require_model(self) -> Result<Self> {
        if self.is_diagnostic() {
            Err(Error::param("alpha", "alpha = 2 is diagnostic-only"))
        } else {
            Ok(self)
        }
    }
}

impl TryFrom<f64> for StabilityIndex {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        if alpha == 2.0 {
            Ok(Self::gaussian_diagnostic())
        } else {
            Self::new(alpha)
        }
    }
}

impl From<StabilityIndex> for f64 {
    fn from(a: StabilityIndex) -> f64 {
        a.0
    }
}

/// Symmetric α-stable law with characteristic function exp(−σ^α |θ|^α).
#[derive(Clone, Copy, Debug)]
pub struct SymmetricStable {
    alpha: f64,
    scale: f64,
}

impl SymmetricStable {
    pub fn new(alpha: StabilityIndex, scale: f64) -> Result<Self> {
        let alpha = alpha.require_model()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("scale", format!("{scale} must be positive")));
        }
        Ok(Self {
            alpha: alpha.value(),
            scale,
        })
    }

    pub fn standard(alpha: StabilityIndex) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Chambers–Mallows–Stuck draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.scale * standard_sas(self.alpha, rng)
    }
}

#[inline]
fn standard_sas(alpha: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.uniform_open() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w = rng.exp1();
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha)
        * ((v - alpha * v).cos() / w).powf((1.0 - alpha) / alpha)
}

pub fn sample_sas(alpha: StabilityIndex, scale: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(SymmetricStable::new(alpha, scale)?.sample(rng))
}

/// Totally skewed positive stable law with index a ∈ (0, 1), normalized so
/// that E[exp(−λA)] = exp(−λ^a).
#[derive(Clone, Copy, Debug)]
pub struct PositiveStable {
    index: f64,
}

impl PositiveStable {
    pub fn new(index: f64) -> Result<Self> {
        if index.is_finite() && index > 0.0 && index < 1.0 {
            Ok(Self { index })
        } else {
            Err(Error::param("alpha_half", format!("{index} is outside (0, 1)")))
        }
    }

    /// Kanter's representation through Zolotarev's function.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let a = self.index;
        let u = PI * rng.uniform_open();
        let e = rng.exp1();
        let zolotarev = (a * u).sin().powf(a / (1.0 - a)) * ((1.0 - a) * u).sin()
            / u.sin().powf(1.0 / (1.0 - a));
        (zolotarev / e).powf((1.0 - a) / a)
    }
}

pub fn sample_positive_stable(alpha_half: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(PositiveStable::new(alpha_half)?.sample(rng))
}

/// Arrival times Γ_1 < … < Γ_J of a unit-rate Poisson process.
pub fn poisson_arrivals(count: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut acc = 0.0;
    (0..count)
        .map(|_| {
            acc += rng.exp1();
            acc
        })
        .collect()
}

pub fn rademacher(rng: &mut RngStream) -> f64 {
    if rng.next_bit() {
        1.0
    } else {
        -1.0
    }
}

/// Tail constant C_α: P(|Y| > x) ~ C_α σ^α x^{−α} for Y SαS with scale σ.
pub fn c_alpha(alpha: StabilityIndex) -> f64 {
    let a = alpha.value();
    if (a - 1.0).abs() <= C_ALPHA_UNIT_BAND {
        return 2.0 / PI;
    }
    (1.0 - a) / (libm::tgamma(2.0 - a) * (FRAC_PI_2 * a).cos())
}

/// E[Z] for Z Fréchet with shape α/β, i.e. Γ(1 − β/α).
pub fn frechet_moment(alpha: StabilityIndex, beta: f64) -> Result<f64> {
    let a = alpha.value();
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::param("beta", format!("{beta} must be non-negative")));
    }
    if beta >= a {
        return Err(Error::Pole(format!(
            "Gamma(1 - beta/alpha) with beta = {beta} >= alpha = {a}"
        )));
    }
    Ok(libm::lgamma(1.0 - beta / a).exp())
}

/// E|Y|^p for Y standard SαS (σ = 1), 0 < p < α.
pub fn sas_abs_moment(alpha: StabilityIndex, p: f64) -> Result<f64> {
    let a = alpha.value();
    if !(p > 0.0 && p < a) {
        return Err(Error::param("p", format!("{p} is outside (0, alpha = {a})")));
    }
    if alpha.is_diagnostic() {
        // E|Y|^p for Y ~ N(0, 2)
        return Ok(2f64.powf(p) * libm::tgamma((p + 1.0) / 2.0) / PI.sqrt());
    }
    Ok(2.0 / PI * libm::tgamma(p) * (FRAC_PI_2 * p).sin() * libm::tgamma(1.0 - p / a))
}

/// Fréchet law with CDF exp(−(x/scale)^{−shape}) on x > 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetLaw {
    pub shape: f64,
    pub scale: f64,
}

impl FrechetLaw {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::param("shape", format!("{shape} must be positive")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("scale", format!("{scale} must be positive")));
        }
        Ok(Self { shape, scale })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-(x / self.scale).powf(-self.shape)).exp()
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale * (-p.ln()).powf(-1.0 / self.shape)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.uniform_open())
    }
}

pub fn frechet_cdf(law: &FrechetLaw, x: f64) -> f64 {
    law.cdf(x)
}

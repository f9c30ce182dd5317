//! Kernel families f_t(s) for the supported field models.
//!
//! Lattice models use the moving-average convention Y(t) = Σ_s f(t + s) M(s),
//! so f_t(s) = f(t + s). The fractional models are evaluated pointwise and
//! the harmonizable normalizing constant κ̃ is computed by quadrature.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_periodic_power, QuadResult, QuadTolerance};
use crate::stable::StabilityIndex;

/// x_+^e with the convention x_+^0 = 1{x > 0}.
///
/// At x = 0 with e < 0 the value is the one-sided limit +∞; quadrature
/// routines never evaluate there.
#[inline]
pub fn positive_power(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        if e == 0.0 {
            1.0
        } else {
            x.powf(e)
        }
    } else if x == 0.0 && e < 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Parameters shared by the fractional models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FractionalRepr")]
pub struct Fractional {
    pub alpha: StabilityIndex,
    pub hurst: f64,
}

impl Fractional {
    pub fn new(alpha: StabilityIndex, hurst: f64) -> Result<Self> {
        alpha.require_model()?;
        check_hurst(hurst)?;
        Ok(Self { alpha, hurst })
    }

    /// H − 1/α, the exponent of the moving-average kernel.
    pub fn exponent(&self) -> f64 {
        self.hurst - 1.0 / self.alpha.value()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FractionalRepr {
    alpha: StabilityIndex,
    hurst: f64,
}

impl TryFrom<FractionalRepr> for Fractional {
    type Error = Error;

    fn try_from(r: FractionalRepr) -> Result<Self> {
        Fractional::new(r.alpha, r.hurst)
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::param("hurst", format!("{h} is outside (0, 1)")))
    }
}

/// (t − s)_+^{H−1/α} − (−s)_+^{H−1/α}, without the scale κ.
pub fn lfsm_kernel(t: f64, s: f64, hurst: f64, alpha: StabilityIndex) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let e = hurst - 1.0 / alpha.value();
    positive_power(t - s, e) - positive_power(-s, e)
}

/// g_k(s) = (k + 1 − s)_+^{H−1/α} − (k − s)_+^{H−1/α}.
pub fn lfsm_increment_kernel(k: i64, s: f64, hurst: f64, alpha: StabilityIndex) -> f64 {
    let e = hurst - 1.0 / alpha.value();
    let k = k as f64;
    positive_power(k + 1.0 - s, e) - positive_power(k - s, e)
}

/// |e^{itx} − 1| / |x|^{H+1/α} = 2|sin(tx/2)| / |x|^{H+1/α}.
pub fn hfsm_kernel_magnitude(t: f64, x: f64, hurst: f64, alpha: StabilityIndex) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::param("x", "the harmonizable kernel is singular at x = 0"));
    }
    Ok(2.0 * (0.5 * t * x).sin().abs() / x.abs().powf(hurst + 1.0 / alpha.value()))
}

/// ∫_ℝ (1 − cos x)^{α/2} |x|^{−(αH+1)} dx.
pub(crate) fn hfsm_spectral_integral(hurst: f64, alpha: f64, tol: QuadTolerance) -> Result<QuadResult> {
    let half_tol = QuadTolerance {
        abs: tol.abs / 2.0,
        ..tol
    };
    let scale = 2f64.powf(alpha / 2.0);
    // (1 − cos x)^{α/2} = 2^{α/2} |sin(x/2)|^α, free of cancellation near 0.
    let r = integrate_periodic_power(
        |x| scale * (0.5 * x).sin().abs().powf(alpha),
        alpha * hurst + 1.0,
        half_tol,
    )?;
    Ok(QuadResult {
        value: 2.0 * r.value,
        error: 2.0 * r.error,
        evaluations: r.evaluations,
    })
}

/// Value with a propagated absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// κ̃ = 2^{−1/2} (∫_ℝ (1 − cos x)^{α/2} |x|^{−(αH+1)} dx)^{−1/α}.
///
/// Accepts the diagnostic α = 2.
pub fn kappa_tilde(hurst: f64, alpha: StabilityIndex) -> Result<Estimate> {
    check_hurst(hurst)?;
    let a = alpha.value();
    let integral = hfsm_spectral_integral(hurst, a, QuadTolerance::absolute(1e-11))?;
    let value = std::f64::consts::FRAC_1_SQRT_2 * integral.value.powf(-1.0 / a);
    let error = value * integral.error / (a * integral.value);
    if error > 1e-8 {
        return Err(Error::Numerical(format!(
            "kappa_tilde error bound {error:e} exceeds 1e-8 (H = {hurst}, alpha = {a})"
        )));
    }
    Ok(Estimate { value, error })
}

/// Increment directions V = {−1, 0, 1}^d \ {0}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    dim: usize,
    vertices: Vec<Vec<i64>>,
}

impl VertexSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be positive"));
        }
        let total = 3usize.pow(dim as u32);
        let vertices = (0..total)
            .map(|mut code| {
                (0..dim)
                    .map(|_| {
                        let digit = (code % 3) as i64 - 1;
                        code /= 3;
                        digit
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|v| v.iter().any(|&c| c != 0))
            .collect();
        Ok(Self { dim, vertices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.vertices.iter().map(Vec::as_slice)
    }
}

/// Finite coefficient table f(u) on a box of Z^d, stored row-major with the
/// last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRepr")]
pub struct LatticeKernel {
    alpha: StabilityIndex,
    origin: Vec<i64>,
    shape: Vec<usize>,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeRepr {
    alpha: StabilityIndex,
    origin: Vec<i64>,
    shape: Vec<usize>,
    coeffs: Vec<f64>,
}

impl TryFrom<LatticeRepr> for LatticeKernel {
    type Error = Error;

    fn try_from(r: LatticeRepr) -> Result<Self> {
        if r.origin.len() != r.shape.len() || r.shape.iter().product::<usize>() != r.coeffs.len() {
            return Err(Error::param("kernel", "origin, shape and coefficient count disagree"));
        }
        let probe = LatticeKernel {
            alpha: r.alpha,
            origin: r.origin,
            shape: r.shape,
            coeffs: r.coeffs,
        };
        LatticeKernel::from_entries(r.alpha, &probe.entries())
    }
}

impl LatticeKernel {
    pub fn from_entries(alpha: StabilityIndex, entries: &[(Vec<i64>, f64)]) -> Result<Self> {
        alpha.require_model()?;
        let Some((first, _)) = entries.first() else {
            return Err(Error::param("kernel", "coefficient table is empty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::param("kernel", "lattice points need at least one coordinate"));
        }
        let mut lo = first.clone();
        let mut hi = first.clone();
        for (idx, value) in entries {
            if idx.len() != dim {
                return Err(Error::param("kernel", "inconsistent index dimensions"));
            }
            if !value.is_finite() {
                return Err(Error::param("kernel", format!("non-finite coefficient at {idx:?}")));
            }
            for j in 0..dim {
                lo[j] = lo[j].min(idx[j]);
                hi[j] = hi[j].max(idx[j]);
            }
        }
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let mut kernel = Self {
            alpha,
            coeffs: vec![0.0; shape.iter().product()],
            origin: lo,
            shape,
        };
        for (idx, value) in entries {
            let flat = kernel.flat_index(idx).expect("inside bounding box");
            kernel.coeffs[flat] += value;
        }
        if kernel.coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::param("kernel", "all coefficients are zero"));
        }
        Ok(kernel)
    }

    /// Point mass f = 1{0} on Z^d.
    pub fn delta(alpha: StabilityIndex, dim: usize) -> Result<Self> {
        Self::from_entries(alpha, &[(vec![0; dim], 1.0)])
    }

    /// f(u) = ρ^{|u|_1} on the box [0, len − 1]^d.
    pub fn geometric(alpha: StabilityIndex, dim: usize, ratio: f64, len: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::param("ratio", format!("{ratio} is outside (0, 1)")));
        }
        if len == 0 || dim == 0 {
            return Err(Error::param("len", "support length and dimension must be positive"));
        }
        let mut entries = Vec::with_capacity(len.pow(dim as u32));
        for flat in 0..len.pow(dim as u32) {
            let mut rest = flat;
            let mut idx = vec![0i64; dim];
            for j in (0..dim).rev() {
                idx[j] = (rest % len) as i64;
                rest /= len;
            }
            let l1: i64 = idx.iter().sum();
            entries.push((idx, ratio.powi(l1 as i32)));
        }
        Self::from_entries(alpha, &entries)
    }

    pub fn alpha(&self) -> StabilityIndex {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn flat_index(&self, idx: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for j in 0..self.dim() {
            let off = idx[j] - self.origin[j];
            if off < 0 || off as usize >= self.shape[j] {
                return None;
            }
            flat = flat * self.shape[j] + off as usize;
        }
        Some(flat)
    }

    /// f(u), zero outside the table.
    pub fn get(&self, u: &[i64]) -> f64 {
        self.flat_index(u).map_or(0.0, |i| self.coeffs[i])
    }

    /// f_t(s) = f(t + s).
    pub fn eval(&self, t: &[i64], s: &[i64]) -> f64 {
        let u: Vec<i64> = t.iter().zip(s).map(|(a, b)| a + b).collect();
        self.get(&u)
    }

    /// ‖f‖_α^α = Σ_u |f(u)|^α.
    pub fn norm_alpha_pow(&self) -> f64 {
        let a = self.alpha.value();
        self.coeffs.iter().map(|c| c.abs().powf(a)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// Non-zero entries in row-major order.
    pub fn entries(&self) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::new();
        for (flat, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rest = flat;
            let mut idx = vec![0i64; self.dim()];
            for j in (0..self.dim()).rev() {
                idx[j] = self.origin[j] + (rest % self.shape[j]) as i64;
                rest /= self.shape[j];
            }
            out.push((idx, c));
        }
        out
    }

    /// Parses the whitespace-separated `i_1 … i_d value` table format.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(alpha: StabilityIndex, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 2 {
                return Err(Error::Format(format!(
                    "line {}: expected `index... value`",
                    lineno + 1
                )));
            }
            let (idx, value) = fields.split_at(fields.len() - 1);
            let idx = idx
                .iter()
                .map(|f| f.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("line {}: bad index: {e}", lineno + 1)))?;
            let value = value[0]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: bad value: {e}", lineno + 1)))?;
            entries.push((idx, value));
        }
        Self::from_entries(alpha, &entries)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (idx, c) in self.entries() {
            for i in idx {
                write!(out, "{i} ").unwrap();
            }
            writeln!(out, "{c:e}").unwrap();
        }
        out
    }
}

/// Support and decay metadata of a kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupportInfo {
    /// Largest |u|_∞ over the finite support, when finite.
    pub radius: Option<f64>,
    /// Power-law decay exponent of |f| away from its core, when infinite.
    pub tail_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    IidDelta { alpha: StabilityIndex, dim: usize },
    LatticeMa(LatticeKernel),
    Lfsm(Fractional),
    /// Unit-lag increments Y(k) = X(k + 1) − X(k) on Z.
    LfsmIncrement(Fractional),
    Hfsm(Fractional),
    HfsmIncrement(Fractional),
    /// A p-dimensional lattice model viewed as a d-dimensional field that
    /// ignores the coordinates p + 1 … d.
    Embedded { dim: usize, base: Box<KernelSpec> },
    /// Y(t) ≡ Y(0): the trivial conservative field.
    ConstantField { alpha: StabilityIndex, dim: usize },
}

impl KernelSpec {
    pub fn embedded(dim: usize, base: KernelSpec) -> Result<Self> {
        let p = base.dim();
        if base.as_lattice().is_none() {
            return Err(Error::param("base", "embedded models need a lattice base kernel"));
        }
        if p >= dim {
            return Err(Error::param("p", format!("effective dimension {p} must be below d = {dim}")));
        }
        Ok(KernelSpec::Embedded {
            dim,
            base: Box::new(base),
        })
    }

    pub fn iid(alpha: StabilityIndex, dim: usize) -> Result<Self> {
        alpha.require_model()?;
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be positive"));
        }
        Ok(KernelSpec::IidDelta { alpha, dim })
    }

    pub fn constant(alpha: StabilityIndex, dim: usize) -> Result<Self> {
        alpha.require_model()?;
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be positive"));
        }
        Ok(KernelSpec::ConstantField { alpha, dim })
    }

    /// Re-checks the constructor invariants, for specs that were
    /// deserialized rather than built.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::IidDelta { alpha, dim } => KernelSpec::iid(*alpha, *dim).map(|_| ()),
            KernelSpec::ConstantField { alpha, dim } => KernelSpec::constant(*alpha, *dim).map(|_| ()),
            KernelSpec::Embedded { dim, base } => {
                base.validate()?;
                KernelSpec::embedded(*dim, (**base).clone()).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> StabilityIndex {
        match self {
            KernelSpec::IidDelta { alpha, .. } | KernelSpec::ConstantField { alpha, .. } => *alpha,
            KernelSpec::LatticeMa(k) => k.alpha(),
            KernelSpec::Lfsm(f)
            | KernelSpec::LfsmIncrement(f)
            | KernelSpec::Hfsm(f)
            | KernelSpec::HfsmIncrement(f) => f.alpha,
            KernelSpec::Embedded { base, .. } => base.alpha(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::IidDelta { dim, .. }
            | KernelSpec::ConstantField { dim, .. }
            | KernelSpec::Embedded { dim, .. } => *dim,
            KernelSpec::LatticeMa(k) => k.dim(),
            _ => 1,
        }
    }

    /// Rank of the coordinates the field actually depends on.
    pub fn effective_dim(&self) -> usize {
        match self {
            KernelSpec::Embedded { base, .. } => base.dim(),
            KernelSpec::ConstantField { .. } => 0,
            other => other.dim(),
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        match self {
            KernelSpec::Lfsm(f)
            | KernelSpec::LfsmIncrement(f)
            | KernelSpec::Hfsm(f)
            | KernelSpec::HfsmIncrement(f) => Some(f.hurst),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            KernelSpec::IidDelta { .. } => "iid_delta",
            KernelSpec::LatticeMa(_) => "lattice_ma",
            KernelSpec::Lfsm(_) => "lfsm",
            KernelSpec::LfsmIncrement(_) => "lfsm_increment",
            KernelSpec::Hfsm(_) => "hfsm",
            KernelSpec::HfsmIncrement(_) => "hfsm_increment",
            KernelSpec::Embedded { .. } => "embedded",
            KernelSpec::ConstantField { .. } => "constant_field",
        }
    }

    /// Lattice coefficient table for the finite moving-average models.
    pub fn as_lattice(&self) -> Option<LatticeKernel> {
        match self {
            KernelSpec::IidDelta { alpha, dim } => LatticeKernel::delta(*alpha, *dim).ok(),
            KernelSpec::LatticeMa(k) => Some(k.clone()),
            _ => None,
        }
    }

    /// Whether the stationary field (or increment field) is generated by a
    /// dissipative action.
    pub fn is_dissipative(&self) -> bool {
        matches!(
            self,
            KernelSpec::IidDelta { .. }
                | KernelSpec::LatticeMa(_)
                | KernelSpec::LfsmIncrement(_)
                | KernelSpec::Embedded { .. }
        )
    }

    pub fn support(&self) -> SupportInfo {
        match self {
            KernelSpec::IidDelta { .. } | KernelSpec::ConstantField { .. } => SupportInfo {
                radius: Some(0.0),
                tail_exponent: None,
            },
            KernelSpec::LatticeMa(k) => {
                let radius = k
                    .entries()
                    .iter()
                    .flat_map(|(idx, _)| idx.iter().map(|i| i.abs()))
                    .max()
                    .unwrap_or(0);
                SupportInfo {
                    radius: Some(radius as f64),
                    tail_exponent: None,
                }
            }
            KernelSpec::Lfsm(f) | KernelSpec::LfsmIncrement(f) => SupportInfo {
                radius: None,
                tail_exponent: Some(f.exponent() - 1.0),
            },
            KernelSpec::Hfsm(f) | KernelSpec::HfsmIncrement(f) => SupportInfo {
                radius: None,
                tail_exponent: Some(-(f.hurst + 1.0 / f.alpha.value())),
            },
            KernelSpec::Embedded { base, .. } => base.support(),
        }
    }
}

/// f_t(s) of an embedded model: the base kernel evaluated at (t_1, …, t_p).
pub fn embedded_kernel(t: &[i64], s: &[i64], base: &LatticeKernel, dim: usize) -> Result<f64> {
    let p = base.dim();
    if p >= dim {
        return Err(Error::param("p", format!("effective dimension {p} must be below d = {dim}")));
    }
    if t.len() != dim || s.len() != p {
        return Err(Error::param("t", "index dimensions do not match the model"));
    }
    Ok(base.eval(&t[..p], s))
}

//! The deterministic sequence b_n = (∫ max_{0 ≤ t ≤ (n−1)1} |f_t|^α dμ)^{1/α}
//! that controls the growth of partial maxima.
//!
//! Lattice models are enumerated exactly. The LFSM increment sequence uses
//! the decomposition into a left tail, n − 1 identical interior cells and
//! one boundary cell. The HFSM increment sequence does not depend on n.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{hfsm_spectral_integral, kappa_tilde, Estimate, Fractional, KernelSpec, LatticeKernel};
use crate::quad::{integrate, integrate_breakpoints, integrate_periodic_power, QuadTolerance};
use crate::stable::StabilityIndex;
use crate::stats::{fit_power_law, ScalingFit};
use crate::window::{sliding_hypercube, Extremum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BnEntry {
    pub n: usize,
    pub bn: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BnCurve {
    pub model: KernelSpec,
    pub alpha: StabilityIndex,
    pub entries: Vec<BnEntry>,
}

impl BnCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,bn,err")?;
        for e in &self.entries {
            writeln!(w, "{},{:e},{:e}", e.n, e.bn, e.err)?;
        }
        Ok(())
    }

    pub fn read_csv_entries<R: BufRead>(r: R) -> Result<Vec<BnEntry>> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "n,bn,err" => {}
            _ => return Err(Error::Format("expected header `n,bn,err`".into())),
        }
        let mut out = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("bad row `{line}`")));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("`{s}`: {e}")));
            out.push(BnEntry {
                n: f[0].trim().parse().map_err(|e| Error::Format(format!("`{}`: {e}", f[0])))?,
                bn: parse(f[1])?,
                err: parse(f[2])?,
            });
        }
        Ok(out)
    }
}

/// Exact b_n for finite lattice moving averages, by enumeration.
///
/// Accepts IidDelta, LatticeMa, Embedded (over a lattice base) and
/// ConstantField. Returns (b_n, exact).
pub fn bn_moving_average(kernel: &KernelSpec, n: usize) -> Result<(f64, bool)> {
    if n == 0 {
        return Err(Error::param("n", "window size must be positive"));
    }
    match kernel {
        KernelSpec::ConstantField { .. } => Ok((1.0, true)),
        KernelSpec::Embedded { base, .. } => bn_moving_average(base, n),
        other => {
            let lattice = other
                .as_lattice()
                .ok_or_else(|| Error::param("kernel", format!("{} is not a lattice model", other.tag())))?;
            Ok((lattice_bn_pow(&lattice, n).powf(1.0 / lattice.alpha().value()), true))
        }
    }
}

/// b_n^α = Σ_s max_{t ∈ [0, n−1]^d} |f(t + s)|^α.
fn lattice_bn_pow(kernel: &LatticeKernel, n: usize) -> f64 {
    let a = kernel.alpha().value();
    let d = kernel.dim();
    let padded_shape: Vec<usize> = kernel.shape().iter().map(|&s| s + 2 * (n - 1)).collect();
    let mut padded = vec![0.0; padded_shape.iter().product()];
    for (flat, &c) in kernel.coeffs().iter().enumerate() {
        let mut rest = flat;
        let mut target = 0usize;
        let mut idx = vec![0usize; d];
        for j in (0..d).rev() {
            idx[j] = rest % kernel.shape()[j];
            rest /= kernel.shape()[j];
        }
        for j in 0..d {
            target = target * padded_shape[j] + idx[j] + n - 1;
        }
        padded[target] = c.abs().powf(a);
    }
    let (maxima, _) = sliding_hypercube(&padded, &padded_shape, n, Extremum::Max);
    maxima.iter().sum()
}

/// Pieces of b_n^α = T + (n − 1) I + B for the LFSM increment kernel g_k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LfsmBnParts {
    /// ∫_{−∞}^0 |g_0|^α
    pub tail: Estimate,
    /// ∫_ℓ^{ℓ+1} max{|g_ℓ|, |g_{ℓ+1}|}^α, the same for every interior ℓ.
    pub interior: Estimate,
    /// ∫_{n−1}^n |g_{n−1}|^α = 1/(αH)
    pub boundary: f64,
}

impl LfsmBnParts {
    pub fn new(params: Fractional, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::param("tolerance", "quadrature tolerance must be positive"));
        }
        let a = params.alpha.value();
        let h = params.hurst;
        let e = params.exponent();
        let boundary = 1.0 / (a * h);
        if e == 0.0 {
            let zero = Estimate { value: 0.0, error: 0.0 };
            let one = Estimate { value: 1.0, error: 0.0 };
            return Ok(Self {
                tail: zero,
                interior: one,
                boundary,
            });
        }
        Ok(Self {
            tail: lfsm_tail(e, a, h, tol / 4.0)?,
            interior: lfsm_interior(e, a, tol / 4.0)?,
            boundary,
        })
    }

    pub fn bn_pow(&self, n: usize) -> Estimate {
        let m = (n - 1) as f64;
        Estimate {
            value: self.tail.value + m * self.interior.value + self.boundary,
            error: self.tail.error + m * self.interior.error,
        }
    }

    /// lim n^{−1/α} b_n = I^{1/α}.
    pub fn limit_scale(&self, alpha: f64) -> f64 {
        self.interior.value.powf(1.0 / alpha)
    }
}

/// |(1 + u)^e − u^e| for u > 0, accurate for large u.
#[inline]
fn tail_difference(u: f64, e: f64) -> f64 {
    if u > 1.0 {
        (u.powf(e) * (e * (1.0 / u).ln_1p()).exp_m1()).abs()
    } else {
        ((1.0 + u).powf(e) - u.powf(e)).abs()
    }
}

/// T = ∫_0^∞ |(1 + u)^e − u^e|^α du.
///
/// [0, 1] directly, [1, L] in log scale, and the leading-order tail
/// |e|^α L^{α(H−1)} / (α(1−H)) beyond L with its provable error bound.
fn lfsm_tail(e: f64, a: f64, h: f64, tol: f64) -> Result<Estimate> {
    let sub = QuadTolerance::absolute(tol / 4.0);
    let near = integrate(|u| tail_difference(u, e).powf(a), 0.0, 1.0, sub)?;
    let log_l: f64 = 40.0;
    let breaks: Vec<f64> = (0..=8).map(|i| log_l * i as f64 / 8.0).collect();
    let far = integrate_breakpoints(
        |v| {
            let u = v.exp();
            tail_difference(u, e).powf(a) * u
        },
        &breaks,
        sub,
    )?;
    let l = log_l.exp();
    let lead = e.abs().powf(a) * (a * (h - 1.0) * log_l).exp() / (a * (1.0 - h));
    // The exact remainder lies in [(1 + 1/L)^{α(e−1)}·lead, lead].
    let lead_err = lead * (1.0 - (1.0 + 1.0 / l).powf(a * (e - 1.0)));
    Ok(Estimate {
        value: near.value + far.value + lead,
        error: near.error + far.error + lead_err,
    })
}

/// I = ∫_0^1 max{w^e, |(1 + w)^e − w^e|}^α dw, with w = ℓ + 1 − s.
fn lfsm_interior(e: f64, a: f64, tol: f64) -> Result<Estimate> {
    let f = |w: f64| {
        let g_own = w.powf(e);
        let g_next = ((1.0 + w).powf(e) - g_own).abs();
        g_own.max(g_next).powf(a)
    };
    let mut breaks = vec![0.0];
    if e > 0.0 {
        // w^e = (1 + w)^e − w^e at w* = 1/(2^{1/e} − 1)
        let cross = 1.0 / (2f64.powf(1.0 / e) - 1.0);
        if cross > 0.0 && cross < 1.0 {
            breaks.push(cross);
        }
    }
    breaks.push(1.0);
    let r = integrate_breakpoints(f, &breaks, QuadTolerance::absolute(tol))?;
    Ok(Estimate {
        value: r.value,
        error: r.error,
    })
}

/// b_n of the unit-lag LFSM increment field.
pub fn bn_lfsm(n: usize, hurst: f64, alpha: StabilityIndex, tol: f64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::param("n", "window size must be positive"));
    }
    let params = Fractional::new(alpha, hurst)?;
    let parts = LfsmBnParts::new(params, tol)?;
    Ok(pow_to_bn(parts.bn_pow(n), alpha.value()))
}

fn pow_to_bn(p: Estimate, a: f64) -> Estimate {
    let value = p.value.powf(1.0 / a);
    Estimate {
        value,
        error: value * p.error / (a * p.value),
    }
}

/// b_n^{(v)} of the HFSM increment field, which does not depend on n.
///
/// The frequency weight is |x|^{−(αH+1)}, matching the normalization of κ̃.
pub fn bn_hfsm(hurst: f64, alpha: StabilityIndex, v: i32, tol: f64) -> Result<Estimate> {
    if v != 1 && v != -1 {
        return Err(Error::param("v", format!("{v} is not a unit lag (+1 or -1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tolerance", "quadrature tolerance must be positive"));
    }
    let a = alpha.value();
    let kappa = kappa_tilde(hurst, alpha)?;
    // |e^{ivx} − 1|^α = 2^α |sin(x/2)|^α for v = ±1; the 2^{α/2} is absorbed
    // by comparing against the (1 − cos x)^{α/2} integral.
    let spectral = hfsm_spectral_integral(hurst, a, QuadTolerance::absolute(tol / 4.0))?;
    let integral = 2f64.powf(a / 2.0) * spectral.value;
    let value = kappa.value * integral.powf(1.0 / a);
    let error = value * (kappa.error / kappa.value + spectral.error / (a * spectral.value));
    Ok(Estimate { value, error })
}

/// κ̃ (∫ max_{0 ≤ k < n} |e^{i(k+v)x} − e^{ikx}|^α |x|^{−(αH+1)} dx)^{1/α},
/// evaluated with the maximum over the window taken explicitly.
pub fn bn_hfsm_windowed(n: usize, hurst: f64, alpha: StabilityIndex, v: i32, tol: f64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::param("n", "window size must be positive"));
    }
    if v != 1 && v != -1 {
        return Err(Error::param("v", format!("{v} is not a unit lag (+1 or -1)")));
    }
    let a = alpha.value();
    let kappa = kappa_tilde(hurst, alpha)?;
    let v = v as f64;
    let windowed = |x: f64| {
        (0..n)
            .map(|k| {
                let k = k as f64;
                let re = ((k + v) * x).cos() - (k * x).cos();
                let im = ((k + v) * x).sin() - (k * x).sin();
                (re * re + im * im).sqrt()
            })
            .fold(0.0, f64::max)
            .powf(a)
    };
    // The integrand is even in x.
    let half = integrate_periodic_power(windowed, a * hurst + 1.0, QuadTolerance::absolute(tol / 4.0))?;
    let integral = 2.0 * half.value;
    let value = kappa.value * integral.powf(1.0 / a);
    let error = value * (kappa.error / kappa.value + 2.0 * half.error / (a * integral));
    Ok(Estimate { value, error })
}

/// ‖f‖_α for the stationary models (b_1).
pub fn norm_alpha(kernel: &KernelSpec, tol: f64) -> Result<f64> {
    Ok(bn_value(kernel, 1, tol)?.value)
}

fn bn_value(kernel: &KernelSpec, n: usize, tol: f64) -> Result<Estimate> {
    match kernel {
        KernelSpec::LfsmIncrement(p) => bn_lfsm(n, p.hurst, p.alpha, tol),
        KernelSpec::HfsmIncrement(p) => bn_hfsm(p.hurst, p.alpha, 1, tol),
        KernelSpec::Lfsm(_) | KernelSpec::Hfsm(_) => Err(Error::param(
            "kernel",
            "b_n is defined for the stationary increment fields, not the self-similar processes",
        )),
        other => bn_moving_average(other, n).map(|(value, _)| Estimate { value, error: 0.0 }),
    }
}

/// b_n over a grid of window sizes.
pub fn bn_curve(kernel: &KernelSpec, ns: &[usize], tol: f64) -> Result<BnCurve> {
    let entries = match kernel {
        KernelSpec::LfsmIncrement(p) => {
            let parts = LfsmBnParts::new(*p, tol)?;
            ns.iter()
                .map(|&n| {
                    if n == 0 {
                        return Err(Error::param("n", "window size must be positive"));
                    }
                    let e = pow_to_bn(parts.bn_pow(n), p.alpha.value());
                    Ok(BnEntry { n, bn: e.value, err: e.error })
                })
                .collect::<Result<Vec<_>>>()?
        }
        KernelSpec::HfsmIncrement(p) => {
            let e = bn_hfsm(p.hurst, p.alpha, 1, tol)?;
            ns.iter().map(|&n| BnEntry { n, bn: e.value, err: e.error }).collect()
        }
        other => ns
            .iter()
            .map(|&n| {
                let e = bn_value(other, n, tol)?;
                Ok(BnEntry { n, bn: e.value, err: e.error })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(BnCurve {
        model: kernel.clone(),
        alpha: kernel.alpha(),
        entries,
    })
}

/// lim n^{−p/α} b_n, where p is the effective dimension of the model.
pub fn limit_scale(kernel: &KernelSpec, tol: f64) -> Result<f64> {
    match kernel {
        KernelSpec::IidDelta { .. } => Ok(1.0),
        KernelSpec::LatticeMa(k) => Ok(k.max_abs()),
        KernelSpec::Embedded { base, .. } => limit_scale(base, tol),
        KernelSpec::LfsmIncrement(p) => Ok(LfsmBnParts::new(*p, tol)?.limit_scale(p.alpha.value())),
        KernelSpec::ConstantField { .. } | KernelSpec::HfsmIncrement(_) => Ok(0.0),
        KernelSpec::Lfsm(_) | KernelSpec::Hfsm(_) => Err(Error::param(
            "kernel",
            "limit scale is defined for stationary fields only",
        )),
    }
}

/// Least-squares θ̂ in b_n^α ≈ c n^θ.
pub fn fit_weak_effective_dimension(curve: &BnCurve) -> Result<ScalingFit> {
    let a = curve.alpha.value();
    let pts: Vec<(f64, f64)> = curve.entries.iter().map(|e| (e.n as f64, e.bn.powf(a))).collect();
    fit_power_law(&pts, 4, 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub passed: bool,
    /// (n, b_n^α, n^d ‖f‖_α^α) per entry.
    pub rows: Vec<(usize, f64, f64)>,
}

/// Checks b_n^α ≤ n^d ‖f‖_α^α for every entry, with 1e-9 relative slack.
pub fn verify_bn_upper_bound(curve: &BnCurve, f_norm: f64) -> BoundReport {
    let a = curve.alpha.value();
    let d = curve.model.dim() as i32;
    let rows: Vec<(usize, f64, f64)> = curve
        .entries
        .iter()
        .map(|e| (e.n, e.bn.powf(a), (e.n as f64).powi(d) * f_norm.powf(a)))
        .collect();
    let passed = rows.iter().all(|&(_, lhs, rhs)| lhs <= rhs * (1.0 + 1e-9));
    BoundReport { passed, rows }
}

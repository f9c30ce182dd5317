//! LePage series for a finite lattice window:
//! Y_t = b_n C_α^{1/α} Σ_j ξ_j Γ_j^{−1/α} f_t(U_j) / max_m |f_m(U_j)|
//! with U_j iid from η_n ∝ max_t |f_t|^α.
//!
//! After J terms the remainder is, given Γ_J, a sum of many small
//! symmetric terms with covariance
//! b_n² C_α^{2/α} Γ_J^{1−2/α}/(2/α − 1) · E[r_t(U) r_u(U)], r = f/max|f|;
//! optionally it is replaced by a Gaussian vector with that covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::RngStream;
use crate::stable::{c_alpha, rademacher};
use crate::window::{sliding_hypercube, Extremum};

use super::{Discretization, Provenance, SamplePath};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LePageConfig {
    /// Number of series terms J.
    pub terms: usize,
    /// Target remainder standard deviation relative to b_n.
    pub tolerance: f64,
    pub gaussian_remainder: bool,
}

impl Default for LePageConfig {
    fn default() -> Self {
        Self {
            terms: 10_000,
            tolerance: 1e-2,
            gaussian_remainder: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LePageInfo {
    pub terms: usize,
    /// Γ_{J+1}^{−1/α}, the envelope of the first omitted term.
    pub first_omitted: f64,
    /// Standard deviation of the omitted remainder given Γ_J, relative to b_n.
    pub tail_bound: f64,
    /// Whether `tail_bound` meets the configured tolerance.
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LePageSample {
    pub path: SamplePath,
    pub info: LePageInfo,
}

struct Support {
    origin: Vec<i64>,
    extent: Vec<usize>,
    /// max_t |f_t(s)| per support site, row-major.
    envelope: Vec<f64>,
    /// Cumulative η_n weights.
    cumulative: Vec<f64>,
    bn_pow: f64,
}

fn support(table: &crate::kernels::LatticeKernel, n: usize) -> Support {
    let d = table.dim();
    let a = table.alpha().value();
    let shape = table.shape();
    // |f| on the table box padded by n − 1 zeros on both sides of each axis.
    let padded: Vec<usize> = shape.iter().map(|&s| s + 2 * (n - 1)).collect();
    let mut data = vec![0.0; padded.iter().product()];
    for (flat, c) in table.coeffs().iter().enumerate() {
        let mut rest = flat;
        let mut target = 0usize;
        let mut stride = 1usize;
        for j in (0..d).rev() {
            target += (rest % shape[j] + n - 1) * stride;
            stride *= padded[j];
            rest /= shape[j];
        }
        data[target] = c.abs();
    }
    let (envelope, extent) = sliding_hypercube(&data, &padded, n, Extremum::Max);
    let origin = table.origin().iter().map(|&o| o - (n as i64 - 1)).collect();
    let mut total = 0.0;
    let cumulative = envelope
        .iter()
        .map(|m| {
            total += m.powf(a);
            total
        })
        .collect();
    Support {
        origin,
        extent,
        envelope,
        cumulative,
        bn_pow: total,
    }
}

impl Support {
    fn site(&self, mut flat: usize) -> Vec<i64> {
        let mut s = vec![0i64; self.extent.len()];
        for j in (0..self.extent.len()).rev() {
            s[j] = self.origin[j] + (flat % self.extent[j]) as i64;
            flat /= self.extent[j];
        }
        s
    }

    fn draw(&self, rng: &mut RngStream) -> usize {
        let target = rng.uniform_open() * self.bn_pow;
        self.cumulative.partition_point(|&c| c < target).min(self.cumulative.len() - 1)
    }
}

/// Window sites t ∈ [0, n − 1]^d in row-major order.
fn window_sites(d: usize, n: usize) -> Vec<Vec<i64>> {
    (0..n.pow(d as u32))
        .map(|mut flat| {
            let mut t = vec![0i64; d];
            for j in (0..d).rev() {
                t[j] = (flat % n) as i64;
                flat /= n;
            }
            t
        })
        .collect()
}

/// Draws (Y_t)_{t ∈ [0, n−1]^d} of a finite lattice model from its LePage
/// series truncated after `cfg.terms` terms.
pub fn lepage_series_field(model: &KernelSpec, n: usize, cfg: &LePageConfig, rng: &mut RngStream) -> Result<LePageSample> {
    let table = model.as_lattice().ok_or_else(|| {
        Error::param(
            "model",
            format!("{} has no finite lattice kernel for the series", model.tag()),
        )
    })?;
    if cfg.terms == 0 {
        return Err(Error::param("terms", "the series needs at least one term"));
    }
    if n == 0 {
        return Err(Error::param("n", "window must contain at least one point"));
    }
    let alpha = table.alpha();
    let a = alpha.value();
    let d = table.dim();
    let sup = support(&table, n);
    let bn = sup.bn_pow.powf(1.0 / a);
    let prefactor = bn * c_alpha(alpha).powf(1.0 / a);
    let sites = window_sites(d, n);
    let ratios = |flat: usize| -> Vec<f64> {
        let s = sup.site(flat);
        let m = sup.envelope[flat];
        sites.iter().map(|t| table.eval(t, &s) / m).collect()
    };

    let provenance = Provenance::new(
        rng,
        Discretization::LePage {
            terms: cfg.terms,
            gaussian_remainder: cfg.gaussian_remainder,
        },
    );
    let mut values = vec![0.0; sites.len()];
    let mut gamma = 0.0;
    for _ in 0..cfg.terms {
        gamma += rng.exp1();
        let amp = prefactor * rademacher(rng) * gamma.powf(-1.0 / a);
        for (v, r) in values.iter_mut().zip(ratios(sup.draw(rng))) {
            *v += amp * r;
        }
    }
    let first_omitted = (gamma + rng.exp1()).powf(-1.0 / a);
    let remainder_sd = prefactor * (gamma.powf(1.0 - 2.0 / a) / (2.0 / a - 1.0)).sqrt();
    if cfg.gaussian_remainder {
        for (flat, m) in sup.envelope.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            let weight = remainder_sd * (m.powf(a) / sup.bn_pow).sqrt() * rng.normal();
            for (v, r) in values.iter_mut().zip(ratios(flat)) {
                *v += weight * r;
            }
        }
    }
    let tail_bound = remainder_sd / bn;
    let path = SamplePath::new(model.clone(), vec![n; d], 1.0, values, provenance)?;
    Ok(LePageSample {
        path,
        info: LePageInfo {
            terms: cfg.terms,
            first_omitted,
            tail_bound,
            within_tolerance: tail_bound <= cfg.tolerance,
        },
    })
}

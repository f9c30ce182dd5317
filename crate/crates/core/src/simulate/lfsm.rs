//! Linear fractional stable motion X(t) = ∫ (t − s)_+^e − (−s)_+^e M(ds),
//! e = H − 1/α, on a uniform time grid.
//!
//! The integral is split into uniform noise cells of width Δs on
//! [−near, t_max] and geometric cells on [−L, −near]. Uniform cells carry
//! the L^α cell average of u_+^e, so the discrete kernel is a function of
//! the lag alone and the near part is one convolution. The far part is
//! smooth in t and is evaluated at Chebyshev nodes and interpolated.

use serde::{Deserialize, Serialize};

use crate::bn::bn_lfsm;
use crate::error::{Error, Result};
use crate::kernels::{Fractional, KernelSpec};
use crate::rng::RngStream;
use crate::stable::SymmetricStable;

use super::conv::FftConvolver;
use super::{Discretization, Provenance, SamplePath};

const CHEBYSHEV_NODES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfsmDiscretization {
    /// Width Δs of the uniform noise cells; must divide the grid step.
    pub ds: f64,
    /// Truncation point L: noise on (−∞, −L) is dropped.
    pub truncation: f64,
    /// Uniform cells cover [−near, t_max].
    pub near: f64,
    pub cells_per_octave: usize,
    /// Relative scale error of X(t_max) allowed from truncation.
    pub tolerance: f64,
}

impl LfsmDiscretization {
    /// At least 1024 noise cells across [0, t_max], near = t_max, and the
    /// smallest L meeting a 10^{-3} scale tolerance.
    pub fn for_grid(t_max: f64, grid_points: usize, params: Fractional) -> Result<Self> {
        check_grid(t_max, grid_points)?;
        let steps = grid_points - 1;
        let substeps = 1024usize.div_ceil(steps).max(1);
        let tolerance = 1e-3;
        let near = t_max;
        Ok(Self {
            ds: t_max / (steps * substeps) as f64,
            truncation: required_truncation(params, t_max, tolerance)?.max(near),
            near,
            cells_per_octave: 32,
            tolerance,
        })
    }
}

fn check_grid(t_max: f64, grid_points: usize) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::param("t_max", format!("{t_max} is not a positive time")));
    }
    if grid_points < 2 {
        return Err(Error::param("grid_points", "at least two grid points are needed"));
    }
    Ok(())
}

/// Smallest L with ∫_L^∞ |(t_max + u)^e − u^e|^α du bounded by the relative
/// α-mass α·tol of X(t_max), using |(t + u)^e − u^e| ≤ |e| t u^{e−1}.
pub fn required_truncation(params: Fractional, t_max: f64, tol: f64) -> Result<f64> {
    let a = params.alpha.value();
    let h = params.hurst;
    let e = params.exponent();
    if e == 0.0 {
        return Ok(0.0);
    }
    let b1_pow = bn_lfsm(1, h, params.alpha, 1e-9)?.value.powf(a);
    let scale_pow = b1_pow * t_max.powf(a * h);
    let decay = a * (1.0 - h);
    let lead = (e.abs() * t_max).powf(a) / decay;
    Ok((lead / (a * tol * scale_pow)).powf(1.0 / decay))
}

/// Truncated α-mass bound relative to the α-mass of X(t_max).
fn truncation_error(params: Fractional, t_max: f64, l: f64) -> Result<f64> {
    let a = params.alpha.value();
    let h = params.hurst;
    let e = params.exponent();
    if e == 0.0 {
        return Ok(0.0);
    }
    let b1_pow = bn_lfsm(1, h, params.alpha, 1e-9)?.value.powf(a);
    let decay = a * (1.0 - h);
    Ok((e.abs() * t_max).powf(a) * l.powf(-decay) / decay / (b1_pow * t_max.powf(a * h)))
}

/// (i + 1)^q − i^q without cancellation.
fn power_step(i: f64, q: f64) -> f64 {
    if i == 0.0 {
        1.0
    } else {
        i.powf(q) * (q * (1.0 / i).ln_1p()).exp_m1()
    }
}

/// (t + u)^e − u^e for u > 0, t ≥ 0.
fn shifted_power_difference(t: f64, u: f64, e: f64) -> f64 {
    u.powf(e) * (e * (t / u).ln_1p()).exp_m1()
}

/// Precomputed kernels for repeated sampling on one grid.
#[derive(Clone)]
pub struct LfsmPlan {
    params: Fractional,
    disc: LfsmDiscretization,
    grid_points: usize,
    dt: f64,
    substeps: usize,
    /// Uniform cells on [−near, 0).
    lead_cells: usize,
    near_noise: SymmetricStable,
    path_conv: FftConvolver,
    increment_conv: FftConvolver,
    far_noise: Vec<SymmetricStable>,
    /// far_nodes[c * K + k] = (τ_k + u_c)^e − u_c^e.
    far_nodes: Vec<f64>,
    /// interp[i * K + k]: Chebyshev interpolation onto grid point i.
    interp: Vec<f64>,
}

impl LfsmPlan {
    pub fn new(t_max: f64, grid_points: usize, params: Fractional, disc: LfsmDiscretization) -> Result<Self> {
        check_grid(t_max, grid_points)?;
        let a = params.alpha.value();
        let e = params.exponent();
        let dt = t_max / (grid_points - 1) as f64;
        if !(disc.ds > 0.0 && disc.ds <= dt * (1.0 + 1e-12)) {
            return Err(Error::Configuration(format!(
                "noise cell width {} must be positive and at most the grid step {dt}",
                disc.ds
            )));
        }
        let substeps = (dt / disc.ds).round() as usize;
        if (substeps as f64 * disc.ds - dt).abs() > 1e-9 * dt {
            return Err(Error::Configuration(format!(
                "noise cell width {} does not divide the grid step {dt}",
                disc.ds
            )));
        }
        if !(disc.tolerance > 0.0) || disc.cells_per_octave == 0 {
            return Err(Error::Configuration(
                "tolerance and cells_per_octave must be positive".into(),
            ));
        }
        if !(disc.near >= disc.ds) {
            return Err(Error::Configuration(format!(
                "near region {} must cover at least one noise cell",
                disc.near
            )));
        }
        let lead_cells = (disc.near / disc.ds).ceil() as usize;
        let near_len = lead_cells as f64 * disc.ds;
        let achieved = truncation_error(params, t_max, disc.truncation.max(near_len))?;
        if achieved > a * disc.tolerance * (1.0 + 1e-9) {
            let suggested = required_truncation(params, t_max, disc.tolerance)?;
            return Err(Error::Configuration(format!(
                "truncation L = {} leaves relative alpha-mass {achieved:.3e} above {:.3e}; use L >= {suggested:.6e}",
                disc.truncation,
                a * disc.tolerance
            )));
        }

        let total = lead_cells + (grid_points - 1) * substeps;
        let q = e * a + 1.0;
        let cell_scale = disc.ds.powf(e);
        let phi: Vec<f64> = (0..total)
            .map(|i| cell_scale * (power_step(i as f64, q) / q).powf(1.0 / a))
            .collect();
        let psi: Vec<f64> = (0..total)
            .map(|i| if i >= substeps { phi[i] - phi[i - substeps] } else { phi[i] })
            .collect();

        // Geometric cells [b_c, b_{c+1}] in u = −s.
        let ratio = 2f64.powf(1.0 / disc.cells_per_octave as f64);
        let mut bounds = vec![near_len];
        while *bounds.last().unwrap() < disc.truncation && e != 0.0 {
            let next = (bounds.last().unwrap() * ratio).min(disc.truncation);
            bounds.push(next);
        }
        let nodes: Vec<f64> = (0..CHEBYSHEV_NODES)
            .map(|k| {
                let x = (std::f64::consts::PI * (k as f64 + 0.5) / CHEBYSHEV_NODES as f64).cos();
                0.5 * t_max * (1.0 + x)
            })
            .collect();
        let mut far_noise = Vec::with_capacity(bounds.len().saturating_sub(1));
        let mut far_nodes = Vec::with_capacity(bounds.len().saturating_sub(1) * CHEBYSHEV_NODES);
        for w in bounds.windows(2) {
            let u = (w[0] * w[1]).sqrt();
            far_noise.push(SymmetricStable::new(params.alpha, (w[1] - w[0]).powf(1.0 / a))?);
            far_nodes.extend(nodes.iter().map(|&tau| shifted_power_difference(tau, u, e)));
        }
        let interp = chebyshev_interpolation(&nodes, t_max, grid_points, dt);

        Ok(Self {
            params,
            disc,
            grid_points,
            dt,
            substeps,
            lead_cells,
            near_noise: SymmetricStable::new(params.alpha, disc.ds.powf(1.0 / a))?,
            path_conv: FftConvolver::new(&phi, total, total),
            increment_conv: FftConvolver::new(&psi, total, total),
            far_noise,
            far_nodes,
            interp,
        })
    }

    pub fn params(&self) -> Fractional {
        self.params
    }

    pub fn discretization(&self) -> LfsmDiscretization {
        self.disc
    }

    fn draw(&self, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        let total = self.lead_cells + (self.grid_points - 1) * self.substeps;
        let near: Vec<f64> = (0..total).map(|_| self.near_noise.sample(rng)).collect();
        let far: Vec<f64> = self.far_noise.iter().map(|law| law.sample(rng)).collect();
        (near, far)
    }

    /// Far-field contribution at every grid point, shifted to vanish at 0.
    fn far_field(&self, far: &[f64]) -> Vec<f64> {
        let k = CHEBYSHEV_NODES;
        let mut at_nodes = vec![0.0; k];
        for (c, z) in far.iter().enumerate() {
            for (slot, g) in at_nodes.iter_mut().zip(&self.far_nodes[c * k..(c + 1) * k]) {
                *slot += z * g;
            }
        }
        let values: Vec<f64> = (0..self.grid_points)
            .map(|i| {
                self.interp[i * k..(i + 1) * k]
                    .iter()
                    .zip(&at_nodes)
                    .map(|(w, f)| w * f)
                    .sum()
            })
            .collect();
        values.iter().map(|v| v - values[0]).collect()
    }

    fn provenance(&self, rng: &RngStream) -> Provenance {
        Provenance::new(rng, Discretization::Lfsm(self.disc))
    }

    /// One path X(0), X(Δt), …, X(t_max).
    pub fn sample(&self, rng: &mut RngStream) -> Result<SamplePath> {
        let provenance = self.provenance(rng);
        let (near, far) = self.draw(rng);
        let conv = self.path_conv.apply_auto(&near);
        let far = self.far_field(&far);
        let origin = conv[self.lead_cells - 1];
        let values: Vec<f64> = (0..self.grid_points)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    conv[k * self.substeps + self.lead_cells - 1] - origin + far[k]
                }
            })
            .collect();
        SamplePath::new(KernelSpec::Lfsm(self.params), vec![self.grid_points], self.dt, values, provenance)
    }

    /// Increments X((k + 1)Δt) − X(kΔt) computed from the increment kernel
    /// directly, from the same noise as `sample` under the same stream.
    pub fn sample_increments(&self, rng: &mut RngStream) -> Result<SamplePath> {
        let provenance = self.provenance(rng);
        let (near, far) = self.draw(rng);
        let conv = self.increment_conv.apply_auto(&near);
        let far = self.far_field(&far);
        let values: Vec<f64> = (0..self.grid_points - 1)
            .map(|k| conv[(k + 1) * self.substeps + self.lead_cells - 1] + far[k + 1] - far[k])
            .collect();
        SamplePath::new(
            KernelSpec::LfsmIncrement(self.params),
            vec![self.grid_points - 1],
            self.dt,
            values,
            provenance,
        )
    }
}

/// Barycentric interpolation weights from first-kind Chebyshev nodes on
/// [0, t_max] to the grid points iΔt.
fn chebyshev_interpolation(nodes: &[f64], t_max: f64, grid_points: usize, dt: f64) -> Vec<f64> {
    let k = nodes.len();
    let weights: Vec<f64> = (0..k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (std::f64::consts::PI * (j as f64 + 0.5) / k as f64).sin()
        })
        .collect();
    let mut out = vec![0.0; grid_points * k];
    for i in 0..grid_points {
        let t = (i as f64 * dt).min(t_max);
        let row = &mut out[i * k..(i + 1) * k];
        if let Some(j) = nodes.iter().position(|&x| x == t) {
            row[j] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..k).map(|j| weights[j] / (t - nodes[j])).collect();
        let total: f64 = terms.iter().sum();
        for j in 0..k {
            row[j] = terms[j] / total;
        }
    }
    out
}

/// One LFSM path on grid_points equally spaced times in [0, t_max].
pub fn simulate_lfsm(
    t_max: f64,
    grid_points: usize,
    hurst: f64,
    alpha: crate::stable::StabilityIndex,
    disc: &LfsmDiscretization,
    rng: &mut RngStream,
) -> Result<SamplePath> {
    let params = Fractional::new(alpha, hurst)?;
    LfsmPlan::new(t_max, grid_points, params, *disc)?.sample(rng)
}

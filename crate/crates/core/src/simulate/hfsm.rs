//! Harmonizable fractional stable motion
//! X(t) = κ̃ Re ∫ (e^{itx} − 1) |x|^{−H−1/α} M̃(dx)
//! with M̃ rotationally invariant complex SαS, normalized so that
//! Re ∫ f dM̃ has scale ‖f‖_α and X(1) has scale 1.
//!
//! The frequency window [x_min, X_max] is cut into geometric cells below
//! x_c = 16Δx, summed directly, and uniform cells of width Δx above,
//! whose phases are periodic in the cell index with period M = 2π/(ΔtΔx)
//! and so fold into one inverse FFT of length M. Each cell carries the
//! exact α-mass of |x|^{−αH−1} and complex amplitude √(2A)(G + iG′) with
//! A positive (α/2)-stable and G, G′ standard normal; negative
//! frequencies contribute an independent conjugate amplitude.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kappa_tilde, Fractional, KernelSpec};
use crate::rng::RngStream;
use crate::stable::PositiveStable;

use super::{Discretization, Provenance, SamplePath};

const LOW_CELLS_PER_OCTAVE: usize = 16;
const MAX_LOW_CELLS: usize = 4096;
const MAX_BAND_CELLS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HfsmDiscretization {
    /// Uniform cell width Δx; adjusted down so that 2π/(ΔtΔx) is an integer.
    pub dx: f64,
    pub x_max: f64,
    pub x_min: f64,
    /// Relative scale error allowed from the neglected frequencies, at
    /// t_max for the low end and at one grid step for the high end.
    pub tolerance: f64,
}

impl HfsmDiscretization {
    /// Δx = 2π/(8NΔt) (period eight times the window), X_max at least
    /// eight times the grid Nyquist frequency, and both ends of the window
    /// at half the 5% scale tolerance.
    pub fn for_grid(t_max: f64, grid_points: usize, params: Fractional) -> Result<Self> {
        check_grid(t_max, grid_points)?;
        let dt = t_max / (grid_points - 1) as f64;
        let fft_len = (8 * grid_points).next_power_of_two();
        let dx = 2.0 * std::f64::consts::PI / (fft_len as f64 * dt);
        let tolerance = 0.05;
        let a = params.alpha.value();
        let kappa_pow = kappa_tilde(params.hurst, params.alpha)?.value.powf(a);
        let low = a * (1.0 - params.hurst);
        // 2κ̃^α (t x)^{α(1−H)} / (α(1−H)) ≤ α·tol/2 at t = t_max.
        let x_min = (a * tolerance / 2.0 * low / (2.0 * kappa_pow)).powf(1.0 / low) / t_max;
        let q = a * params.hurst;
        // 2·2^α κ̃^α (X Δt)^{−αH} / (αH) ≤ α·tol/2.
        let x_high = (4.0 * 2f64.powf(a) * kappa_pow / (q * a * tolerance)).powf(1.0 / q) / dt;
        Ok(Self {
            dx,
            x_max: x_high.max(8.0 * std::f64::consts::PI / dt),
            x_min: x_min.min(dx),
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

/// ∫_a^b x^{−αH−1} dx.
fn cell_mass(a: f64, b: f64, q: f64) -> f64 {
    (a.powf(-q) - b.powf(-q)) / q
}

#[derive(Clone)]
pub struct HfsmPlan {
    params: Fractional,
    disc: HfsmDiscretization,
    grid_points: usize,
    dt: f64,
    kappa: f64,
    /// Geometric cells: midpoint frequency and α-mass^{1/α}.
    low: Vec<(f64, f64)>,
    /// Uniform band starts at x_c; cell j is [x_c + jΔx, x_c + (j + 1)Δx].
    x_c: f64,
    dx: f64,
    band_weights: Vec<f64>,
    fft_len: usize,
    inverse: Arc<dyn Fft<f64>>,
    mixing: PositiveStable,
}

impl HfsmPlan {
    pub fn new(t_max: f64, grid_points: usize, params: Fractional, disc: HfsmDiscretization) -> Result<Self> {
        check_grid(t_max, grid_points)?;
        let a = params.alpha.value();
        let h = params.hurst;
        let q = a * h;
        let dt = t_max / (grid_points - 1) as f64;
        if !(disc.x_min > 0.0 && disc.x_min < disc.x_max && disc.dx > 0.0 && disc.tolerance > 0.0) {
            return Err(Error::Configuration(
                "need 0 < x_min < X_max, dx > 0 and a positive tolerance".into(),
            ));
        }
        let ratio = 2.0 * std::f64::consts::PI / (dt * disc.dx);
        let fft_len = if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        if fft_len < 2 * grid_points {
            return Err(Error::Configuration(format!(
                "dx = {} makes the discretized process periodic with period {:.4} shorter than twice the window",
                disc.dx,
                fft_len as f64 * dt
            )));
        }
        let dx = 2.0 * std::f64::consts::PI / (fft_len as f64 * dt);
        let kappa = kappa_tilde(h, params.alpha)?.value;
        let kappa_pow = kappa.powf(a);

        // Neglected α-mass relative to the α-mass of the increment it
        // affects most: X(t_max) for the low end, X(Δt) for the high end.
        let low_mass = 2.0 * kappa_pow * (t_max * disc.x_min).powf(a * (1.0 - h)) / (a * (1.0 - h));
        let high_mass = 2.0 * 2f64.powf(a) * kappa_pow * (disc.x_max * dt).powf(-q) / q;
        let limit = a * disc.tolerance;
        if low_mass > limit || high_mass > limit {
            return Err(Error::Configuration(format!(
                "frequency window [{:.3e}, {:.3e}] too narrow for H = {h}, alpha = {a}: neglected relative alpha-mass {:.3e} (low) and {:.3e} (high) against {limit:.3e}",
                disc.x_min, disc.x_max, low_mass, high_mass
            )));
        }

        let x_c = (16.0 * dx).min(disc.x_max).max(disc.x_min);
        let ratio = 2f64.powf(1.0 / LOW_CELLS_PER_OCTAVE as f64);
        let mut low = Vec::new();
        let mut lo = disc.x_min;
        while lo < x_c {
            let hi = (lo * ratio).min(x_c);
            low.push(((lo * hi).sqrt(), cell_mass(lo, hi, q).powf(1.0 / a)));
            lo = hi;
            if low.len() > MAX_LOW_CELLS {
                return Err(Error::Configuration(format!(
                    "x_min = {:.3e} needs more than {MAX_LOW_CELLS} low-frequency cells",
                    disc.x_min
                )));
            }
        }
        let band_cells = ((disc.x_max - x_c) / dx).ceil().max(0.0);
        if band_cells > MAX_BAND_CELLS as f64 {
            return Err(Error::Configuration(format!(
                "X_max = {:.3e} needs {band_cells:.3e} frequency cells of width {dx:.3e}, above {MAX_BAND_CELLS}",
                disc.x_max
            )));
        }
        let band_cells = band_cells as usize;
        let band_weights = (0..band_cells)
            .map(|j| {
                let lo = x_c + j as f64 * dx;
                cell_mass(lo, lo + dx, q).powf(1.0 / a)
            })
            .collect();
        let inverse = FftPlanner::new().plan_fft_inverse(fft_len);
        Ok(Self {
            params,
            disc,
            grid_points,
            dt,
            kappa,
            low,
            x_c,
            dx,
            band_weights,
            fft_len,
            inverse,
            mixing: PositiveStable::new(a / 2.0)?,
        })
    }

    pub fn params(&self) -> Fractional {
        self.params
    }

    /// Uniform cell width actually used.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// √(2A)(G + iG′).
    fn amplitude(&self, rng: &mut RngStream) -> Complex<f64> {
        let r = (2.0 * self.mixing.sample(rng)).sqrt();
        let g = rng.normal();
        let g2 = rng.normal();
        Complex::new(r * g, r * g2)
    }

    /// Positive- plus conjugated negative-frequency amplitude of one cell.
    fn cell(&self, rng: &mut RngStream, weight: f64) -> Complex<f64> {
        let pos = self.amplitude(rng);
        let neg = self.amplitude(rng);
        (pos + neg.conj()) * weight
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<SamplePath> {
        let provenance = Provenance::new(rng, Discretization::Hfsm(self.disc));
        let n = self.grid_points;
        let mut values = vec![0.0; n];

        for &(x, w) in &self.low {
            let c = self.cell(rng, w);
            let step = Complex::from_polar(1.0, x * self.dt);
            let mut phase = Complex::new(1.0, 0.0);
            for v in values.iter_mut().skip(1) {
                phase *= step;
                *v += ((phase - 1.0) * c).re;
            }
        }

        let mut folded = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (j, &w) in self.band_weights.iter().enumerate() {
            folded[j % self.fft_len] += self.cell(rng, w);
        }
        self.inverse.process(&mut folded);
        let offset = self.x_c + 0.5 * self.dx;
        for (k, v) in values.iter_mut().enumerate().skip(1) {
            let shift = Complex::from_polar(1.0, k as f64 * self.dt * offset);
            *v += (shift * folded[k] - folded[0]).re;
        }

        for v in values.iter_mut() {
            *v *= self.kappa;
        }
        SamplePath::new(KernelSpec::Hfsm(self.params), vec![n], self.dt, values, provenance)
    }
}

/// One HFSM path on grid_points equally spaced times in [0, t_max].
pub fn simulate_hfsm(
    t_max: f64,
    grid_points: usize,
    hurst: f64,
    alpha: crate::stable::StabilityIndex,
    disc: &HfsmDiscretization,
    rng: &mut RngStream,
) -> Result<SamplePath> {
    let params = Fractional::new(alpha, hurst)?;
    HfsmPlan::new(t_max, grid_points, params, *disc)?.sample(rng)
}

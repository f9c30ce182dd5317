//! Dyadic chaining grids, the empirical modulus of continuity
//! ω(h) = sup_{|s−t|∞ ≤ h} |X(t) − X(s)| and Hölder-exponent fits.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremes::partial_max;
use crate::kernels::{KernelSpec, VertexSet};
use crate::rng::RngStream;
use crate::simulate::{
    increment_path, simulate_moving_average, HfsmDiscretization, HfsmPlan, LfsmDiscretization, LfsmPlan, SamplePath,
};
use crate::stats::{fit_power_law, mean, quantile_sorted, std_dev, ScalingFit};
use crate::window::{sliding_axis, Extremum};

/// D_m = {k/2^m : 0 ≤ k_j ≤ 2^m − 1} in [0, 1)^d, addressed by integer
/// coordinates k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DyadicGrid {
    pub level: u32,
    pub dim: usize,
}

impl DyadicGrid {
    pub fn side(&self) -> u64 {
        1u64 << self.level
    }

    pub fn len(&self) -> usize {
        (self.side() as usize).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, mut flat: usize) -> Vec<u64> {
        let side = self.side() as usize;
        let mut k = vec![0u64; self.dim];
        for j in (0..self.dim).rev() {
            k[j] = (flat % side) as u64;
            flat /= side;
        }
        k
    }

    pub fn point(&self, k: &[u64]) -> Vec<f64> {
        let scale = 1.0 / self.side() as f64;
        k.iter().map(|&c| c as f64 * scale).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|f| self.point(&self.coords(f)))
    }

    /// O_{m−1}(τ) = {τ′ ∈ D_{m−1} : |τ − τ′|∞ ≤ 2^{−m}} in level-(m−1)
    /// coordinates. Empty at level 0.
    pub fn neighbors(&self, k: &[u64]) -> Vec<Vec<u64>> {
        if self.level == 0 {
            return Vec::new();
        }
        let coarse_side = self.side() / 2;
        // Per axis 2k′ ∈ {k − 1, k, k + 1}.
        let options: Vec<Vec<u64>> = k
            .iter()
            .map(|&c| {
                [c.checked_sub(1), Some(c), Some(c + 1)]
                    .into_iter()
                    .flatten()
                    .filter(|v| v % 2 == 0 && v / 2 < coarse_side)
                    .map(|v| v / 2)
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for opts in options {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<u64>| {
                    opts.iter().map(move |&o| {
                        let mut p = prefix.clone();
                        p.push(o);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// The nearest point of D_{m−1} below τ: k′_j = ⌊k_j / 2⌋.
    pub fn parent(&self, k: &[u64]) -> Option<Vec<u64>> {
        (self.level > 0).then(|| k.iter().map(|c| c / 2).collect())
    }

    /// Largest |O_{m−1}(τ)| over the grid.
    pub fn max_neighbor_count(&self) -> usize {
        (0..self.len()).map(|f| self.neighbors(&self.coords(f)).len()).max().unwrap_or(0)
    }
}

/// D_m with its neighbor-count bound |O_{m−1}(τ)| ≤ 2^d checked.
pub fn dyadic_grid(m: u32, d: usize) -> Result<DyadicGrid> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be positive"));
    }
    if (m as usize) * d > 30 {
        return Err(Error::param("m", "grid exceeds 2^30 points"));
    }
    let grid = DyadicGrid { level: m, dim: d };
    let count = grid.max_neighbor_count();
    if count > 1 << d {
        return Err(Error::Numerical(format!("neighbor set of size {count} exceeds 2^{d}")));
    }
    Ok(grid)
}

/// Window width in grid steps for a lag h, or an error below resolution.
fn lag_steps(path: &SamplePath, h: f64) -> Result<usize> {
    let steps = (h / path.spacing * (1.0 + 1e-12)).floor();
    if !(h.is_finite() && steps >= 1.0) {
        return Err(Error::param(
            "h",
            format!("{h} is below the grid spacing {}", path.spacing),
        ));
    }
    Ok(steps as usize)
}

/// ω(h): the largest |X(t) − X(s)| over grid pairs with |s − t|∞ ≤ h,
/// from separable sliding max and min over hypercubes of side h (clipped
/// to the path extent per axis).
pub fn oscillation(path: &SamplePath, h: f64) -> Result<f64> {
    let steps = lag_steps(path, h)?;
    let mut hi = path.values.clone();
    let mut lo = path.values.clone();
    let mut shape = path.extent.clone();
    for axis in 0..shape.len() {
        let w = (steps + 1).min(shape[axis]);
        let (next_hi, next_shape) = sliding_axis(&hi, &shape, axis, w, Extremum::Max);
        let (next_lo, _) = sliding_axis(&lo, &shape, axis, w, Extremum::Min);
        hi = next_hi;
        lo = next_lo;
        shape = next_shape;
    }
    Ok(hi.iter().zip(&lo).map(|(a, b)| a - b).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusProfile {
    pub h: Vec<f64>,
    pub omega_median: Vec<f64>,
    pub omega_q25: Vec<f64>,
    pub omega_q75: Vec<f64>,
    /// Description of the normalizer the profile is compared with.
    pub normalizer: String,
}

impl ModulusProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,omega_median,omega_q25,omega_q75")?;
        for i in 0..self.h.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                self.h[i], self.omega_median[i], self.omega_q25[i], self.omega_q75[i]
            )?;
        }
        Ok(())
    }
}

fn check_paths(paths: &[SamplePath]) -> Result<()> {
    let first = paths.first().ok_or_else(|| Error::InsufficientData("no paths".into()))?;
    if paths.iter().any(|p| p.extent != first.extent || p.spacing != first.spacing) {
        return Err(Error::param("paths", "all paths must share one grid"));
    }
    Ok(())
}

/// ω(h) per path (rows) and h (columns), computed in parallel over paths.
pub fn oscillation_table(paths: &[SamplePath], h_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_paths(paths)?;
    paths
        .par_iter()
        .map(|p| h_grid.iter().map(|&h| oscillation(p, h)).collect::<Result<Vec<_>>>())
        .collect()
}

/// Median and quartiles of ω(h) across paths.
pub fn modulus_profile(paths: &[SamplePath], h_grid: &[f64], normalizer: &str) -> Result<ModulusProfile> {
    let table = oscillation_table(paths, h_grid)?;
    let mut profile = ModulusProfile {
        h: h_grid.to_vec(),
        omega_median: Vec::new(),
        omega_q25: Vec::new(),
        omega_q75: Vec::new(),
        normalizer: normalizer.to_string(),
    };
    for j in 0..h_grid.len() {
        let mut col: Vec<f64> = table.iter().map(|row| row[j]).collect();
        col.sort_by(f64::total_cmp);
        profile.omega_median.push(quantile_sorted(&col, 0.5));
        profile.omega_q25.push(quantile_sorted(&col, 0.25));
        profile.omega_q75.push(quantile_sorted(&col, 0.75));
    }
    Ok(profile)
}

/// Minimum number of paths for a Hölder fit.
pub const MIN_FIT_PATHS: usize = 50;
/// Lags below this many grid steps are excluded from fits.
pub const MIN_FIT_STEPS: f64 = 8.0;

fn is_dyadic(h: f64) -> bool {
    h > 0.0 && h.log2().fract() == 0.0
}

/// Slope of ln median ω(h) against ln h over at least four dyadic lags.
pub fn fit_holder_exponent(paths: &[SamplePath], h_grid: &[f64]) -> Result<(ScalingFit, ModulusProfile)> {
    if h_grid.len() < 4 || !h_grid.iter().all(|&h| is_dyadic(h)) {
        return Err(Error::InsufficientData("need at least four dyadic lags h = 2^-k".into()));
    }
    if paths.len() < MIN_FIT_PATHS {
        return Err(Error::InsufficientData(format!(
            "{} paths given, at least {MIN_FIT_PATHS} needed",
            paths.len()
        )));
    }
    check_paths(paths)?;
    let spacing = paths[0].spacing;
    if let Some(h) = h_grid.iter().find(|&&h| h < MIN_FIT_STEPS * spacing * (1.0 - 1e-12)) {
        return Err(Error::param(
            "h_grid",
            format!("lag {h} is below {MIN_FIT_STEPS} grid steps"),
        ));
    }
    let profile = modulus_profile(paths, h_grid, "h^exponent")?;
    let pts: Vec<(f64, f64)> = profile.h.iter().copied().zip(profile.omega_median.iter().copied()).collect();
    Ok((fit_power_law(&pts, 4, 3.0)?, profile))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusRatioSeries {
    pub h: Vec<f64>,
    /// Median over paths of ω(h) / (h^{H−θ₂/α} (ln 1/h)^{1/γ}).
    pub median_ratio: Vec<f64>,
    /// Share of paths whose ratio does not increase as h runs down the
    /// three smallest lags.
    pub fraction_decreasing: f64,
    /// Share of paths with ratio(min h) < ratio(max h).
    pub fraction_below_coarsest: f64,
    /// Median ratio non-increasing over the three smallest lags.
    pub trend_decreasing: bool,
}

/// σ(h) = h^{H − θ₂/α} (ln 1/h)^{1/γ}.
pub fn modulus_normalizer(h: f64, hurst: f64, theta2: f64, alpha: f64, gamma: f64) -> f64 {
    h.powf(hurst - theta2 / alpha) * (1.0 / h).ln().powf(1.0 / gamma)
}

pub fn modulus_ratio_series(
    paths: &[SamplePath],
    hurst: f64,
    theta2: f64,
    alpha: f64,
    gamma: f64,
    h_grid: &[f64],
) -> Result<ModulusRatioSeries> {
    if theta2 >= alpha * hurst {
        return Err(Error::param(
            "theta2",
            format!("theta2 = {theta2} >= alpha H = {}; the modulus bound does not apply", alpha * hurst),
        ));
    }
    if !(gamma > 0.0 && gamma < alpha) {
        return Err(Error::param("gamma", format!("{gamma} is outside (0, alpha = {alpha})")));
    }
    if h_grid.len() < 3 || h_grid.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
        return Err(Error::param("h_grid", "need at least three lags in (0, 1)"));
    }
    let mut h: Vec<f64> = h_grid.to_vec();
    h.sort_by(f64::total_cmp);
    let table = oscillation_table(paths, &h)?;
    let norms: Vec<f64> = h.iter().map(|&x| modulus_normalizer(x, hurst, theta2, alpha, gamma)).collect();
    let ratios: Vec<Vec<f64>> = table
        .iter()
        .map(|row| row.iter().zip(&norms).map(|(w, s)| w / s).collect())
        .collect();
    let median_ratio: Vec<f64> = (0..h.len())
        .map(|j| {
            let mut col: Vec<f64> = ratios.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            quantile_sorted(&col, 0.5)
        })
        .collect();
    let count = ratios.len() as f64;
    let decreasing = ratios.iter().filter(|r| r[0] <= r[1] && r[1] <= r[2]).count() as f64 / count;
    let below = ratios.iter().filter(|r| r[0] < r[r.len() - 1]).count() as f64 / count;
    let trend = median_ratio[0] <= median_ratio[1] && median_ratio[1] <= median_ratio[2];
    Ok(ModulusRatioSeries {
        h,
        median_ratio,
        fraction_decreasing: decreasing,
        fraction_below_coarsest: below,
        trend_decreasing: trend,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainingBound {
    pub level: u32,
    pub gamma: f64,
    /// Mean of max over chain pairs |X(τ_n) − X(τ′_{n−1})|^γ.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// 2^{−nγH} Σ_v mean (M^{(v)}_{2^n})^γ.
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// lhs ≤ rhs + 3 combined standard errors.
    pub holds: bool,
}

/// Largest |X(τ) − X(τ′)| over τ ∈ D_n and τ′ ∈ O_{n−1}(τ), for a path on
/// the level-n grid (spacing 2^{−n}, at least 2^n points per axis).
pub fn max_chain_increment(path: &SamplePath, level: u32) -> Result<f64> {
    let grid = DyadicGrid {
        level,
        dim: path.dim(),
    };
    if (path.spacing - 1.0 / grid.side() as f64).abs() > 1e-12 * path.spacing
        || path.extent.iter().any(|&e| (e as u64) < grid.side())
    {
        return Err(Error::param("path", format!("path does not cover the level-{level} dyadic grid")));
    }
    let mut best: f64 = 0.0;
    for flat in 0..grid.len() {
        let k = grid.coords(flat);
        let idx: Vec<usize> = k.iter().map(|&c| c as usize).collect();
        let x = path.get(&idx);
        for nb in grid.neighbors(&k) {
            let j: Vec<usize> = nb.iter().map(|&c| 2 * c as usize).collect();
            best = best.max((x - path.get(&j)).abs());
        }
    }
    Ok(best)
}

/// Monte Carlo check of
/// E[max_{chain pairs} |X(τ_n) − X(τ′_{n−1})|^γ] ≤ 2^{−nγH} Σ_v E[(M^{(v)}_{2^n})^γ].
///
/// `x_paths[r]` is X on the level-n grid of [0, 1]^d and `y_paths[r]` holds
/// the unit-lag increment fields Y^{(v)}, one per v ∈ {−1, 0, 1}^d \ {0} in
/// `VertexSet` order, drawn under the same seed and stream.
pub fn chaining_increment_bound(
    x_paths: &[SamplePath],
    y_paths: &[Vec<SamplePath>],
    hurst: f64,
    level: u32,
    gamma: f64,
) -> Result<ChainingBound> {
    if x_paths.len() != y_paths.len() || x_paths.len() < 2 {
        return Err(Error::param("paths", "need matching X and Y replicates (at least two)"));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    let d = x_paths[0].dim();
    let vertices = VertexSet::new(d)?;
    for (x, ys) in x_paths.iter().zip(y_paths) {
        if ys.len() != vertices.len() {
            return Err(Error::param("y_paths", format!("expected {} increment fields", vertices.len())));
        }
        for y in ys {
            if y.provenance.seed != x.provenance.seed || y.provenance.stream_id != x.provenance.stream_id {
                return Err(Error::param(
                    "y_paths",
                    format!(
                        "seed/stream ({}, {}) differs from X ({}, {})",
                        y.provenance.seed, y.provenance.stream_id, x.provenance.seed, x.provenance.stream_id
                    ),
                ));
            }
        }
    }
    let n = 1usize << level;
    let lhs_samples: Vec<f64> = x_paths
        .par_iter()
        .map(|p| max_chain_increment(p, level).map(|m| m.powf(gamma)))
        .collect::<Result<_>>()?;
    let factor = 2f64.powf(-(level as f64) * gamma * hurst);
    let mut rhs = 0.0;
    let mut rhs_var = 0.0;
    for v in 0..vertices.len() {
        let col: Vec<f64> = y_paths
            .iter()
            .map(|ys| partial_max(&ys[v], n).map(|m| m.powf(gamma)))
            .collect::<Result<_>>()?;
        let r = col.len() as f64;
        rhs += factor * mean(&col);
        let se = factor * std_dev(&col) / r.sqrt();
        rhs_var += se * se;
    }
    let lhs = mean(&lhs_samples);
    let lhs_stderr = std_dev(&lhs_samples) / (lhs_samples.len() as f64).sqrt();
    let rhs_stderr = rhs_var.sqrt();
    Ok(ChainingBound {
        level,
        gamma,
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        holds: lhs <= rhs + 3.0 * (lhs_stderr * lhs_stderr + rhs_var).sqrt(),
    })
}

/// `count` paths of a model on the dyadic grid of [0, 1]^d with 2^m
/// intervals per axis, path r from `rng.replicate(r)`.
///
/// The self-similar processes are simulated on {0, 2^{−m}, …, 1}; lattice
/// models on 2^m sites per axis with spacing 2^{−m}.
pub fn unit_cube_paths(model: &KernelSpec, m: u32, count: usize, rng: &RngStream) -> Result<Vec<SamplePath>> {
    let side = 1usize << m;
    let spacing = 1.0 / side as f64;
    enum Source {
        Lfsm(LfsmPlan),
        Hfsm(HfsmPlan),
        Lattice(Vec<usize>),
    }
    let source = match model {
        KernelSpec::Lfsm(p) => Source::Lfsm(LfsmPlan::new(1.0, side + 1, *p, LfsmDiscretization::for_grid(1.0, side + 1, *p)?)?),
        KernelSpec::Hfsm(p) => Source::Hfsm(HfsmPlan::new(1.0, side + 1, *p, HfsmDiscretization::for_grid(1.0, side + 1, *p)?)?),
        KernelSpec::LfsmIncrement(_) | KernelSpec::HfsmIncrement(_) => {
            return Err(Error::param("model", "use the self-similar process, not its increments"))
        }
        other => Source::Lattice(vec![side; other.dim()]),
    };
    (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng.replicate(r);
            let path = match &source {
                Source::Lfsm(plan) => plan.sample(&mut stream)?,
                Source::Hfsm(plan) => plan.sample(&mut stream)?,
                Source::Lattice(extent) => simulate_moving_average(model, extent, &mut stream)?,
            };
            SamplePath::new(path.model, path.extent, spacing, path.values, path.provenance)
        })
        .collect()
}

/// Paired samples for `chaining_increment_bound` from a self-similar model
/// in one dimension. Replicate r draws X on the level-n grid of [0, 1] and,
/// under the same (seed, stream), a path on the integer grid 0, …, 2^n + 1
/// whose lag ±1 differences give Y^{(±1)}.
pub fn chaining_samples(
    model: &KernelSpec,
    level: u32,
    count: usize,
    rng: &RngStream,
) -> Result<(Vec<SamplePath>, Vec<Vec<SamplePath>>)> {
    let side = 1usize << level;
    let points = side + 2;
    let t_max = (points - 1) as f64;
    let integer: Box<dyn Fn(&mut RngStream) -> Result<SamplePath> + Sync> = match model {
        KernelSpec::Lfsm(p) => {
            let plan = LfsmPlan::new(t_max, points, *p, LfsmDiscretization::for_grid(t_max, points, *p)?)?;
            Box::new(move |s| plan.sample(s))
        }
        KernelSpec::Hfsm(p) => {
            let plan = HfsmPlan::new(t_max, points, *p, HfsmDiscretization::for_grid(t_max, points, *p)?)?;
            Box::new(move |s| plan.sample(s))
        }
        other => {
            return Err(Error::param(
                "model",
                format!("{} is not a self-similar process", other.tag()),
            ))
        }
    };
    let x = unit_cube_paths(model, level, count, rng)?;
    let vertices = VertexSet::new(1)?;
    let y = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let path = integer(&mut rng.replicate(r))?;
            vertices.iter().map(|v| increment_path(&path, v)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, y))
}

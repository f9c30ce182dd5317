//! Partial maxima M_n = max_{0 ≤ t ≤ (n−1)1} |Y(t)|, Monte Carlo moments
//! E[M_n^β], growth fits, the limit constant and the Fréchet limit.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bn::limit_scale;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::RngStream;
use crate::simulate::{FieldSampler, SamplePath};
use crate::stable::{c_alpha, frechet_moment, FrechetLaw, StabilityIndex};
use crate::stats::{fit_power_law, ks_statistic, mean, median, std_dev, ScalingFit};

/// Blocks used by the median-of-means estimator.
pub const MOM_BLOCKS: usize = 16;

/// M_n of one path. Needs n ≤ extent on every axis.
pub fn partial_max(path: &SamplePath, n: usize) -> Result<f64> {
    Ok(nested_partial_maxima(path, &[n])?[0])
}

/// M_n for every n in `ns` from a single pass over the path. Each site
/// belongs to the shell max_j t_j; M_n is the running maximum of the
/// shells below n.
pub fn nested_partial_maxima(path: &SamplePath, ns: &[usize]) -> Result<Vec<f64>> {
    if ns.is_empty() {
        return Err(Error::param("n", "no window sizes given"));
    }
    if ns.contains(&0) {
        return Err(Error::param("n", "window size must be positive"));
    }
    let n_max = *ns.iter().max().unwrap();
    if let Some(e) = path.extent.iter().find(|&&e| e < n_max) {
        return Err(Error::param("n", format!("window {n_max} exceeds the path extent {e}")));
    }
    let d = path.dim();
    let mut shells = vec![0.0f64; n_max];
    let mut idx = vec![0usize; d];
    for &v in &path.values {
        let level = idx.iter().copied().max().unwrap_or(0);
        if level < n_max {
            shells[level] = shells[level].max(v.abs());
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < path.extent[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    for k in 1..n_max {
        shells[k] = shells[k].max(shells[k - 1]);
    }
    Ok(ns.iter().map(|&n| shells[n - 1]).collect())
}

/// Sampler whose paths have the same partial maxima as the model on
/// [0, n_max − 1]^d. Embedded models are sampled on their p active axes
/// and the constant field on a line, since the inert axes repeat values.
fn maxima_sampler(model: &KernelSpec, n_max: usize) -> Result<FieldSampler> {
    match model {
        KernelSpec::Embedded { base, .. } => FieldSampler::new(base, &vec![n_max; base.dim()]),
        KernelSpec::ConstantField { alpha, .. } => FieldSampler::new(&KernelSpec::constant(*alpha, 1)?, &[n_max]),
        other => FieldSampler::new(other, &vec![n_max; other.dim()]),
    }
}

/// Per-replicate nested maxima, replicate r drawn from `rng.replicate(r)`.
/// Rows are returned in replicate order regardless of scheduling.
pub fn replicate_maxima(model: &KernelSpec, ns: &[usize], replicates: usize, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    let n_max = ns.iter().copied().max().ok_or_else(|| Error::param("n", "no window sizes given"))?;
    let sampler = maxima_sampler(model, n_max)?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sampler.sample(&mut rng.replicate(r))?;
            nested_partial_maxima(&path, ns)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentEstimator {
    Mean,
    MedianOfMeans,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMomentEntry {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxMomentTable {
    pub model: KernelSpec,
    pub beta: f64,
    pub estimator: MomentEstimator,
    pub entries: Vec<MaxMomentEntry>,
}

impl MaxMomentTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,estimate,stderr,R")?;
        for e in &self.entries {
            writeln!(w, "{},{:e},{:e},{}", e.n, e.estimate, e.stderr, e.replicates)?;
        }
        Ok(())
    }

    pub fn read_csv_entries<R: BufRead>(r: R) -> Result<Vec<MaxMomentEntry>> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "n,estimate,stderr,R" => {}
            _ => return Err(Error::Format("expected header `n,estimate,stderr,R`".into())),
        }
        let mut out = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("bad row `{line}`")));
            }
            let bad = |s: &str| Error::Format(format!("bad number `{s}`"));
            out.push(MaxMomentEntry {
                n: f[0].parse().map_err(|_| bad(f[0]))?,
                estimate: f[1].parse().map_err(|_| bad(f[1]))?,
                stderr: f[2].parse().map_err(|_| bad(f[2]))?,
                replicates: f[3].parse().map_err(|_| bad(f[3]))?,
            });
        }
        Ok(out)
    }
}

fn check_beta(alpha: StabilityIndex, beta: f64) -> Result<()> {
    let a = alpha.value();
    if !(beta > 0.0 && beta < a) {
        return Err(Error::param("beta", format!("{beta} is outside (0, alpha = {a})")));
    }
    Ok(())
}

/// (estimate, standard error) of E[X] from replicate values.
fn moment_estimate(xs: &[f64], estimator: MomentEstimator) -> (f64, f64) {
    match estimator {
        MomentEstimator::Mean => (mean(xs), std_dev(xs) / (xs.len() as f64).sqrt()),
        MomentEstimator::MedianOfMeans => {
            let size = xs.len() / MOM_BLOCKS;
            let blocks: Vec<f64> = (0..MOM_BLOCKS).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
            // Asymptotic standard error of a median of means.
            let se = (std::f64::consts::FRAC_PI_2).sqrt() * std_dev(&blocks) / (MOM_BLOCKS as f64).sqrt();
            (median(&blocks), se)
        }
    }
}

/// Monte Carlo E[M_n^β] over `n_grid` with common random numbers: each
/// replicate is one path on the largest window and every n reads a nested
/// sub-window, so the estimates are non-decreasing in n.
///
/// The plain mean is used when 2β < α; otherwise M_n^β may have infinite
/// variance and the median of 16 block means is reported instead.
pub fn estimate_max_moment(
    model: &KernelSpec,
    n_grid: &[usize],
    beta: f64,
    replicates: usize,
    rng: &RngStream,
) -> Result<MaxMomentTable> {
    model.validate()?;
    let alpha = model.alpha();
    check_beta(alpha, beta)?;
    if replicates < 100 {
        return Err(Error::param("replicates", format!("{replicates} < 100")));
    }
    if n_grid.is_empty() || n_grid.contains(&0) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_grid", "need strictly increasing positive window sizes"));
    }
    let estimator = if 2.0 * beta < alpha.value() {
        MomentEstimator::Mean
    } else {
        MomentEstimator::MedianOfMeans
    };
    let used = match estimator {
        MomentEstimator::Mean => replicates,
        MomentEstimator::MedianOfMeans => replicates - replicates % MOM_BLOCKS,
    };
    let maxima = replicate_maxima(model, n_grid, used, rng)?;
    let entries = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let xs: Vec<f64> = maxima.iter().map(|m| m[i].powf(beta)).collect();
            let (estimate, stderr) = moment_estimate(&xs, estimator);
            MaxMomentEntry {
                n,
                estimate,
                stderr,
                replicates: used,
            }
        })
        .collect();
    Ok(MaxMomentTable {
        model: model.clone(),
        beta,
        estimator,
        entries,
    })
}

/// Log-log slope of E[M_n^β] against n.
pub fn fit_growth_rate(table: &MaxMomentTable) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = table.entries.iter().map(|e| (e.n as f64, e.estimate)).collect();
    fit_power_law(&pts, 4, 2.0)
}

/// C = c̃^β C_α^{β/α} Γ(1 − β/α), the limit of n^{−pβ/α} E[M_n^β].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstant {
    pub alpha: StabilityIndex,
    pub beta: f64,
    pub c_tilde: f64,
    pub value: f64,
}

pub fn limit_constant(alpha: StabilityIndex, beta: f64, c_tilde: f64) -> Result<LimitConstant> {
    let gamma = frechet_moment(alpha, beta)?;
    check_beta(alpha, beta)?;
    if !(c_tilde >= 0.0 && c_tilde.is_finite()) {
        return Err(Error::param("c_tilde", format!("{c_tilde} must be finite and non-negative")));
    }
    let a = alpha.value();
    let value = if c_tilde == 0.0 {
        0.0
    } else {
        c_tilde.powf(beta) * c_alpha(alpha).powf(beta / a) * gamma
    };
    Ok(LimitConstant {
        alpha,
        beta,
        c_tilde,
        value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrechetTest {
    pub n: usize,
    pub replicates: usize,
    /// Scale ĉ = C_α^{1/α} c̃ of the limiting Fréchet law.
    pub scale: f64,
    pub ks: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Empirical median of n^{−p/α} M_n over the Fréchet median.
    pub median_ratio: f64,
}

/// KS distance between n^{−p/α} M_n and Fréchet(α, ĉ) over independent
/// replicates, p the effective dimension.
pub fn frechet_limit_test(
    model: &KernelSpec,
    n: usize,
    replicates: usize,
    threshold: f64,
    rng: &RngStream,
) -> Result<FrechetTest> {
    model.validate()?;
    if !model.is_dissipative() {
        return Err(Error::ConservativeRegime(format!(
            "{} maxima grow slower than n^(d/alpha); the normalized limit is 0, not Frechet",
            model.tag()
        )));
    }
    if replicates < 500 {
        return Err(Error::param("replicates", format!("{replicates} < 500")));
    }
    let alpha = model.alpha();
    let a = alpha.value();
    let scale = c_alpha(alpha).powf(1.0 / a) * limit_scale(model, 1e-9)?;
    let law = FrechetLaw::new(a, scale)?;
    let norm = (n as f64).powf(-(model.effective_dim() as f64) / a);
    let sample: Vec<f64> = replicate_maxima(model, &[n], replicates, rng)?
        .into_iter()
        .map(|m| m[0] * norm)
        .collect();
    let ks = ks_statistic(&sample, |x| law.cdf(x));
    Ok(FrechetTest {
        n,
        replicates,
        scale,
        ks,
        threshold,
        passed: ks <= threshold,
        median_ratio: median(&sample) / law.median(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledMoment {
    pub n: usize,
    pub scaled: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    /// pβ/α for the normalization n^{−pβ/α}.
    pub exponent_expected: f64,
    pub exponent_fitted: Option<f64>,
    pub stderr: Option<f64>,
    pub verdict: Verdict,
    pub limit: f64,
    pub rows: Vec<ScaledMoment>,
}

/// Compares n^{−pβ/α} E[M_n^β] with the limit constant.
///
/// For C > 0 the verdict passes when the largest-n value is within
/// 3 standard errors plus 10% of C. For the C = 0 sentinel it passes when
/// the scaled values strictly decrease over n ≥ 16.
pub fn verify_moment_constant(table: &MaxMomentTable, limit: &LimitConstant, p: usize) -> MomentReport {
    let exponent = p as f64 * table.beta / limit.alpha.value();
    let rows: Vec<ScaledMoment> = table
        .entries
        .iter()
        .map(|e| {
            let f = (e.n as f64).powf(-exponent);
            ScaledMoment {
                n: e.n,
                scaled: e.estimate * f,
                stderr: e.stderr * f,
            }
        })
        .collect();
    let ok = if limit.value > 0.0 {
        rows.last()
            .is_some_and(|r| (r.scaled - limit.value).abs() <= 3.0 * r.stderr + 0.1 * limit.value)
    } else {
        let tail: Vec<f64> = rows.iter().filter(|r| r.n >= 16).map(|r| r.scaled).collect();
        tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0])
    };
    let fit = fit_growth_rate(table).ok();
    MomentReport {
        exponent_expected: exponent,
        exponent_fitted: fit.map(|f| f.exponent),
        stderr: fit.map(|f| f.stderr),
        verdict: Verdict::from_bool(ok),
        limit: limit.value,
        rows,
    }
}

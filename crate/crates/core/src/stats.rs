//! Regression, order statistics and two-sample tests used by the analysis
//! modules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Least-squares fit of log y = intercept + exponent · log x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub n_range: (f64, f64),
}

/// Ordinary least squares on (ln x, ln y).
///
/// Requires at least `min_points` points whose x values span at least
/// `min_octaves` factors of two.
pub fn fit_power_law(points: &[(f64, f64)], min_points: usize, min_octaves: f64) -> Result<ScalingFit> {
    if points.len() < min_points.max(2) {
        return Err(Error::InsufficientData(format!(
            "need at least {} points, got {}",
            min_points.max(2),
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InsufficientData(
            "log-log fit needs finite positive coordinates".into(),
        ));
    }
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if (xmax / xmin).log2() < min_octaves - 1e-12 {
        return Err(Error::InsufficientData(format!(
            "x range [{xmin}, {xmax}] spans fewer than {min_octaves} octaves"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (exponent, intercept, stderr, r2) = ols(&lx, &ly);
    Ok(ScalingFit {
        exponent,
        intercept,
        stderr,
        r2,
        n_range: (xmin, xmax),
    })
}

/// Returns (slope, intercept, slope standard error, R²).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, stderr, r2)
}

/// Pairwise (tree) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation with the n − 1 denominator.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// One-sample Kolmogorov–Smirnov distance to a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Energy-distance two-sample permutation test on vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Returns (sum over within-first pairs, within-second pairs), each over
/// ordered pairs i < j.
fn within_sums(points: &[&[f64]], first: &[bool]) -> (f64, f64) {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let (mut aa, mut bb) = (0.0, 0.0);
            for j in (i + 1)..points.len() {
                if first[i] == first[j] {
                    let d = euclid(points[i], points[j]);
                    if first[i] {
                        aa += d;
                    } else {
                        bb += d;
                    }
                }
            }
            (aa, bb)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
}

fn total_sum(points: &[&[f64]]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| ((i + 1)..points.len()).map(|j| euclid(points[i], points[j])).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Székely–Rizzo energy statistic n·m/(n+m) · (2E|X−Y| − E|X−X'| − E|Y−Y'|)
/// with a permutation p-value.
pub fn energy_test(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, rng: &mut RngStream) -> Result<EnergyTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("energy test needs two samples of size >= 2".into()));
    }
    let points: Vec<&[f64]> = a.iter().chain(b).map(Vec::as_slice).collect();
    let (n, m) = (a.len(), b.len());
    let total = total_sum(&points);
    let stat = |labels: &[bool]| {
        let (aa, bb) = within_sums(&points, labels);
        let ab = total - aa - bb;
        let (nf, mf) = (n as f64, m as f64);
        let e = 2.0 * ab / (nf * mf) - 2.0 * aa / (nf * nf) - 2.0 * bb / (mf * mf);
        nf * mf / (nf + mf) * e
    };
    let mut labels: Vec<bool> = (0..n + m).map(|i| i < n).collect();
    let observed = stat(&labels);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        // Fisher–Yates
        for i in (1..labels.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            labels.swap(i, j);
        }
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    Ok(EnergyTest {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

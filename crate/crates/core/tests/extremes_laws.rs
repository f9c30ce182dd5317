//! Monte Carlo checks of partial-maxima growth, the limit constant and the
//! Fréchet limit at test scale.

use stable_fields::extremes::{
    estimate_max_moment, fit_growth_rate, frechet_limit_test, limit_constant, nested_partial_maxima, replicate_maxima,
    verify_moment_constant, MaxMomentEntry, MaxMomentTable, MomentEstimator,
};
use stable_fields::kernels::{Fractional, LatticeKernel};
use stable_fields::simulate::simulate_moving_average;
use stable_fields::stable::c_alpha;
use stable_fields::{KernelSpec, RngStream, StabilityIndex};

fn alpha(a: f64) -> StabilityIndex {
    StabilityIndex::new(a).unwrap()
}

fn dyadic(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

/// E|Y|^p = (2/π) Γ(p+1) sin(πp/2) ∫_0^∞ (1 − e^{−θ^α}) θ^{−p−1} dθ,
/// integrated in u = ln θ with a fine midpoint rule; above e^hi the factor
/// 1 − e^{−θ^α} is 1 to double precision and the tail is e^{−p·hi}/p.
fn sas_moment_from_cf(a: f64, p: f64) -> f64 {
    let (lo, hi, steps) = (-60.0, 40.0, 4_000_000);
    let h = (hi - lo) / steps as f64;
    let integral: f64 = (0..steps)
        .map(|i| {
            let u = lo + (i as f64 + 0.5) * h;
            -f64::exp_m1(-(a * u).exp()) * (-p * u).exp()
        })
        .sum::<f64>()
        * h
        + (-p * hi).exp() / p;
    2.0 / std::f64::consts::PI * libm::tgamma(p + 1.0) * (std::f64::consts::FRAC_PI_2 * p).sin() * integral
}

#[test]
fn single_site_moment_matches_characteristic_function() {
    let model = KernelSpec::iid(alpha(1.2), 1).unwrap();
    let t = estimate_max_moment(&model, &[1, 2], 0.3, 20_000, &RngStream::new(21, 0)).unwrap();
    let e = t.entries[0];
    let exact = sas_moment_from_cf(1.2, 0.3);
    assert!((e.estimate - exact).abs() < 3.0 * e.stderr, "{} ± {} vs {exact}", e.estimate, e.stderr);
}

#[test]
fn iid_growth_exponent_and_constant() {
    let a = alpha(1.2);
    let model = KernelSpec::iid(a, 1).unwrap();
    let t = estimate_max_moment(&model, &dyadic(4, 10), 0.3, 600, &RngStream::new(22, 0)).unwrap();
    assert_eq!(t.estimator, MomentEstimator::Mean);
    assert!(t.entries.windows(2).all(|w| w[0].estimate <= w[1].estimate));
    let fit = fit_growth_rate(&t).unwrap();
    assert!((fit.exponent - 0.25).abs() < 0.03, "{fit:?}");
    let c = limit_constant(a, 0.3, 1.0).unwrap();
    let report = verify_moment_constant(&t, &c, 1);
    assert!(report.verdict.passed(), "{report:?}");
}

#[test]
fn embedded_growth_follows_effective_dimension() {
    let a = alpha(1.2);
    let model = KernelSpec::embedded(2, KernelSpec::iid(a, 1).unwrap()).unwrap();
    let t = estimate_max_moment(&model, &dyadic(4, 10), 0.3, 600, &RngStream::new(23, 0)).unwrap();
    let fit = fit_growth_rate(&t).unwrap();
    assert!((fit.exponent - 0.25).abs() < 0.04, "{fit:?}");
    assert!((fit.exponent - 0.5).abs() > 0.04);
}

#[test]
fn embedded_shortcut_matches_full_window() {
    let a = alpha(1.4);
    let base = KernelSpec::LatticeMa(LatticeKernel::from_entries(a, &[(vec![0], 1.0), (vec![2], 0.5)]).unwrap());
    let model = KernelSpec::embedded(3, base).unwrap();
    let ns = [1, 3, 6];
    let rng = RngStream::new(24, 5);
    let shortcut = replicate_maxima(&model, &ns, 4, &rng).unwrap();
    for (r, row) in shortcut.iter().enumerate() {
        let full = simulate_moving_average(&model, &[6, 6, 6], &mut rng.replicate(r as u64)).unwrap();
        assert_eq!(&nested_partial_maxima(&full, &ns).unwrap(), row);
        // Permuting the inert axes leaves every maximum unchanged.
        let mut swapped = full.clone();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    swapped.values[full.flat_of(&[i, j, k])] = full.get(&[i, k, j]);
                }
            }
        }
        assert_eq!(nested_partial_maxima(&swapped, &ns).unwrap(), *row);
    }
}

#[test]
fn frechet_limit_iid_and_moving_average() {
    let a = alpha(1.2);
    let iid = KernelSpec::iid(a, 1).unwrap();
    let t = frechet_limit_test(&iid, 1024, 6000, 0.05, &RngStream::new(25, 0)).unwrap();
    assert!(t.passed, "{t:?}");
    assert!((t.scale - c_alpha(a).powf(1.0 / 1.2)).abs() < 1e-12);
    assert!((t.median_ratio - 1.0).abs() < 0.05, "{t:?}");

    let k = LatticeKernel::from_entries(a, &[(vec![0], 1.0), (vec![1], -2.0), (vec![2], 0.5)]).unwrap();
    let ma = KernelSpec::LatticeMa(k);
    let t = frechet_limit_test(&ma, 1024, 1000, 0.05, &RngStream::new(26, 0)).unwrap();
    assert!((t.scale - 2.0 * c_alpha(a).powf(1.0 / 1.2)).abs() < 1e-12);
    assert!(t.passed, "{t:?}");
}

#[test]
fn synthetic_power_law_is_recovered() {
    let a = alpha(1.5);
    let entries = dyadic(2, 9)
        .into_iter()
        .map(|n| MaxMomentEntry {
            n,
            estimate: 0.7 * (n as f64).powf(0.4375),
            stderr: 0.0,
            replicates: 100,
        })
        .collect();
    let table = MaxMomentTable {
        model: KernelSpec::iid(a, 1).unwrap(),
        beta: 0.375,
        estimator: MomentEstimator::Mean,
        entries,
    };
    let fit = fit_growth_rate(&table).unwrap();
    assert!((fit.exponent - 0.4375).abs() < 1e-12);
    let short = MaxMomentTable {
        entries: table.entries[..3].to_vec(),
        ..table
    };
    assert!(fit_growth_rate(&short).is_err());
}

#[test]
fn hfsm_increment_scaled_moments_decrease() {
    let a = alpha(1.5);
    let model = KernelSpec::HfsmIncrement(Fractional::new(a, 0.7).unwrap());
    let t = estimate_max_moment(&model, &dyadic(4, 7), 0.375, 200, &RngStream::new(27, 0)).unwrap();
    let zero = limit_constant(a, 0.375, 0.0).unwrap();
    let report = verify_moment_constant(&t, &zero, 1);
    assert!(report.verdict.passed(), "{report:?}");
    assert!(report.exponent_fitted.unwrap() < 0.1);
}

#[test]
fn replicate_farm_is_deterministic() {
    let model = KernelSpec::iid(alpha(1.3), 2).unwrap();
    let rng = RngStream::new(28, 1);
    let a = estimate_max_moment(&model, &[1, 2, 4, 8], 0.3, 128, &rng).unwrap();
    let b = estimate_max_moment(&model, &[1, 2, 4, 8], 0.3, 128, &rng).unwrap();
    assert_eq!(a, b);
    let other = estimate_max_moment(&model, &[1, 2, 4, 8], 0.3, 128, &RngStream::new(28, 2)).unwrap();
    assert_ne!(a.entries[0].estimate, other.entries[0].estimate);
}

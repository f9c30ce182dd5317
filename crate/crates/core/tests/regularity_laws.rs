//! Chaining grids, oscillation and Hölder fits against enumeration and
//! closed-form paths.

use proptest::prelude::*;
use stable_fields::kernels::Fractional;
use stable_fields::regularity::{
    chaining_increment_bound, chaining_samples, dyadic_grid, fit_holder_exponent, modulus_ratio_series, oscillation,
    unit_cube_paths,
};
use stable_fields::simulate::{Discretization, Provenance, SamplePath};
use stable_fields::{KernelSpec, RngStream, StabilityIndex};

fn deterministic(extent: Vec<usize>, spacing: f64, values: Vec<f64>) -> SamplePath {
    let a = StabilityIndex::new(1.5).unwrap();
    SamplePath::new(
        KernelSpec::iid(a, extent.len()).unwrap(),
        extent,
        spacing,
        values,
        Provenance::new(&RngStream::new(0, 0), Discretization::Lattice),
    )
    .unwrap()
}

fn dyadic_lags(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

#[test]
fn neighbor_sets_match_enumeration() {
    for d in 1..=2usize {
        for m in 1..=6u32 {
            let grid = dyadic_grid(m, d).unwrap();
            let coarse = dyadic_grid(m - 1, d).unwrap();
            let step = 2f64.powi(-(m as i32));
            let mut largest = 0;
            for f in 0..grid.len() {
                let k = grid.coords(f);
                let tau = grid.point(&k);
                let brute: Vec<Vec<u64>> = (0..coarse.len())
                    .map(|g| coarse.coords(g))
                    .filter(|c| {
                        coarse
                            .point(c)
                            .iter()
                            .zip(&tau)
                            .all(|(a, b)| (a - b).abs() <= step + 1e-15)
                    })
                    .collect();
                let nb = grid.neighbors(&k);
                assert_eq!(nb, brute, "m={m} d={d} k={k:?}");
                let parent = grid.parent(&k).unwrap();
                assert!(nb.contains(&parent));
                largest = largest.max(nb.len());
            }
            assert!(largest <= 1 << d);
            assert_eq!(largest, grid.max_neighbor_count());
        }
    }
    assert_eq!(dyadic_grid(5, 2).unwrap().max_neighbor_count(), 4);
    assert!(dyadic_grid(0, 1).unwrap().parent(&[0]).is_none());
}

fn brute_oscillation(p: &SamplePath, steps: usize) -> f64 {
    let mut best: f64 = 0.0;
    for a in 0..p.len() {
        let ia = p.index_of(a);
        for b in (a + 1)..p.len() {
            let ib = p.index_of(b);
            if ia.iter().zip(&ib).all(|(x, y)| x.abs_diff(*y) <= steps) {
                best = best.max((p.values[a] - p.values[b]).abs());
            }
        }
    }
    best
}

#[test]
fn separable_oscillation_equals_pairwise_on_256_points() {
    let mut rng = RngStream::new(31, 0);
    for extent in [vec![256], vec![16, 16]] {
        let values: Vec<f64> = (0..256).map(|_| rng.normal()).collect();
        let p = deterministic(extent, 1.0, values);
        for steps in [1usize, 2, 3, 5, 8, 15, 40, 255] {
            assert_eq!(oscillation(&p, steps as f64).unwrap(), brute_oscillation(&p, steps));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn modulus_is_monotone_and_subadditive(values in proptest::collection::vec(-5.0f64..5.0, 32)) {
        let p = deterministic(vec![32], 1.0, values);
        let omega: Vec<f64> = (1..32).map(|s| oscillation(&p, s as f64).unwrap()).collect();
        prop_assert!(omega.windows(2).all(|w| w[0] <= w[1]));
        for a in 1..16 {
            for b in 1..16 {
                prop_assert!(omega[a + b - 1] <= omega[a - 1] + omega[b - 1] + 1e-12);
            }
        }
    }
}

#[test]
fn power_path_exponent_at_the_origin() {
    let n = 1usize << 14;
    let values: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64).powf(0.3)).collect();
    let paths = vec![deterministic(vec![n], 1.0 / n as f64, values); 50];
    let (fit, profile) = fit_holder_exponent(&paths, &dyadic_lags(4, 10)).unwrap();
    assert!((fit.exponent - 0.3).abs() < 0.02, "{fit:?}");
    assert!(profile.omega_median.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn cusp_path_exponent() {
    let n = 1usize << 12;
    for q in [0.25, 0.5, 0.8] {
        let values: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64 - 0.5).abs().powf(q)).collect();
        let paths = vec![deterministic(vec![n], 1.0 / n as f64, values); 50];
        let (fit, _) = fit_holder_exponent(&paths, &dyadic_lags(3, 9)).unwrap();
        assert!((fit.exponent - q).abs() < 0.02 && fit.stderr < 0.02, "q={q} {fit:?}");
    }
}

#[test]
fn fit_preconditions() {
    let n = 1usize << 10;
    let p = deterministic(vec![n], 1.0 / n as f64, vec![0.5; n]);
    let fifty = vec![p.clone(); 50];
    assert!(fit_holder_exponent(&fifty, &dyadic_lags(4, 6)).is_err());
    assert!(fit_holder_exponent(&vec![p; 49], &dyadic_lags(3, 7)).is_err());
    // 2^-8 is only four grid steps here.
    assert!(fit_holder_exponent(&fifty, &dyadic_lags(4, 8)).is_err());
    assert!(fit_holder_exponent(&fifty, &[0.3, 0.1, 0.05, 0.02]).is_err());
}

#[test]
fn lfsm_holder_exponent_small_scale() {
    let model = KernelSpec::Lfsm(Fractional::new(StabilityIndex::new(1.8).unwrap(), 0.8).unwrap());
    let paths = unit_cube_paths(&model, 14, 60, &RngStream::new(32, 0)).unwrap();
    let (fit, _) = fit_holder_exponent(&paths, &dyadic_lags(8, 11)).unwrap();
    assert!((fit.exponent - (0.8 - 1.0 / 1.8)).abs() < 0.06, "{fit:?}");
}

#[test]
fn ratio_series_log_power_ordering() {
    let model = KernelSpec::Lfsm(Fractional::new(StabilityIndex::new(1.8).unwrap(), 0.8).unwrap());
    let paths = unit_cube_paths(&model, 10, 20, &RngStream::new(33, 0)).unwrap();
    let h = dyadic_lags(2, 7);
    let loose = modulus_ratio_series(&paths, 0.8, 1.0, 1.8, 0.5, &h).unwrap();
    let tight = modulus_ratio_series(&paths, 0.8, 1.0, 1.8, 1.5, &h).unwrap();
    for (i, &x) in h.iter().enumerate() {
        if (1.0 / x).ln() > 1.0 {
            assert!(loose.median_ratio[i] <= tight.median_ratio[i]);
        }
    }
    let n = 1usize << 10;
    let flat = vec![deterministic(vec![n + 1], 1.0 / n as f64, vec![1.0; n + 1]); 5];
    let zero = modulus_ratio_series(&flat, 0.8, 1.0, 1.8, 1.0, &h).unwrap();
    assert!(zero.median_ratio.iter().all(|&r| r == 0.0));
}

#[test]
fn chaining_bound_and_homogeneity() {
    let model = KernelSpec::Lfsm(Fractional::new(StabilityIndex::new(1.6).unwrap(), 0.8).unwrap());
    let (x, y) = chaining_samples(&model, 5, 200, &RngStream::new(34, 0)).unwrap();
    let b = chaining_increment_bound(&x, &y, 0.8, 5, 0.5).unwrap();
    assert!(b.holds, "{b:?}");
    assert!(b.lhs > 0.0);
    let x2: Vec<SamplePath> = x.iter().map(|p| p.scaled(2.0)).collect();
    let y2: Vec<Vec<SamplePath>> = y.iter().map(|v| v.iter().map(|p| p.scaled(2.0)).collect()).collect();
    let b2 = chaining_increment_bound(&x2, &y2, 0.8, 5, 0.5).unwrap();
    let f = 2f64.sqrt();
    assert!((b2.lhs / b.lhs - f).abs() < 1e-12);
    assert!((b2.rhs / b.rhs - f).abs() < 1e-12);
}

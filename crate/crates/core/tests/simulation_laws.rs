//! Distributional checks of the samplers and simulators against
//! closed-form laws and independent direct samplers.

use stable_fields::bn::{bn_hfsm, bn_lfsm};
use stable_fields::kernels::{Fractional, LatticeKernel};
use stable_fields::simulate::{
    lepage_series_field, simulate_moving_average, HfsmDiscretization, HfsmPlan, LePageConfig, LfsmDiscretization,
    LfsmPlan,
};
use stable_fields::stable::{c_alpha, sample_positive_stable, sample_sas, SymmetricStable};
use stable_fields::stats::{ks_two_sample, median};
use stable_fields::{KernelSpec, RngStream, StabilityIndex};

fn alpha(a: f64) -> StabilityIndex {
    StabilityIndex::new(a).unwrap()
}

/// median |S| of a standard SαS variable, from an independent stream.
fn reference_abs_median(a: StabilityIndex) -> f64 {
    let mut rng = RngStream::new(0xABCD, 999);
    let law = SymmetricStable::standard(a).unwrap();
    let draws: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng).abs()).collect();
    median(&draws)
}

#[test]
fn cauchy_median_and_half_mass() {
    let mut rng = RngStream::new(1, 0);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_sas(alpha(1.0), 1.0, &mut rng).unwrap()).collect();
    assert!(median(&draws).abs() < 0.02);
    let frac = draws.iter().filter(|x| x.abs() > 1.0).count() as f64 / draws.len() as f64;
    assert!((frac - 0.5).abs() < 0.01, "{frac}");
}

#[test]
fn sas_tail_constant() {
    let a = alpha(1.5);
    let mut rng = RngStream::new(2, 0);
    let law = SymmetricStable::standard(a).unwrap();
    let x = 50.0;
    let hits = (0..1_000_000).filter(|_| law.sample(&mut rng).abs() > x).count();
    let scaled = hits as f64 / 1e6 * x.powf(1.5);
    let c = c_alpha(a);
    assert!((scaled / c - 1.0).abs() < 0.15, "{scaled} vs {c}");
}

#[test]
fn positive_stable_laplace_transform() {
    let mut rng = RngStream::new(3, 0);
    for index in [0.3, 0.6, 0.75, 0.95] {
        let draws: Vec<f64> = (0..100_000).map(|_| sample_positive_stable(index, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|&v| v > 0.0));
        for lambda in [0.5, 1.0, 2.0] {
            let mc = draws.iter().map(|v| (-lambda * v).exp()).sum::<f64>() / draws.len() as f64;
            let exact = (-f64::powf(lambda, index)).exp();
            assert!((mc - exact).abs() < 0.006, "index {index} lambda {lambda}: {mc} vs {exact}");
        }
    }
}

#[test]
fn moving_average_marginal_tail() {
    let a = alpha(1.2);
    let k = LatticeKernel::from_entries(a, &[(vec![0], 1.0), (vec![1], 0.6), (vec![2], -0.3)]).unwrap();
    let norm = k.norm_alpha_pow();
    let path = simulate_moving_average(&KernelSpec::LatticeMa(k), &[1_000_000], &mut RngStream::new(4, 0)).unwrap();
    let x: f64 = 20.0;
    let frac = path.values.iter().filter(|v| v.abs() > x).count() as f64 / path.len() as f64;
    let predicted = c_alpha(a) * norm * x.powf(-1.2);
    assert!((frac / predicted - 1.0).abs() < 0.2, "{frac} vs {predicted}");
}

#[test]
fn moving_average_stationarity() {
    let a = alpha(1.3);
    let spec = KernelSpec::LatticeMa(LatticeKernel::geometric(a, 2, 0.6, 3).unwrap());
    let reps = 4000;
    let x = 2.0;
    let mut counts = vec![0usize; 36];
    for r in 0..reps {
        let path = simulate_moving_average(&spec, &[6, 6], &mut RngStream::new(5, r)).unwrap();
        for (c, v) in counts.iter_mut().zip(&path.values) {
            *c += usize::from(v.abs() > x);
        }
    }
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / reps as f64).collect();
    let pooled = p.iter().sum::<f64>() / p.len() as f64;
    let se = (pooled * (1.0 - pooled) / reps as f64).sqrt();
    for (i, pi) in p.iter().enumerate() {
        assert!((pi - pooled).abs() < 3.5 * se, "site {i}: {pi} vs {pooled}");
    }
}

fn lfsm_plan(a: f64, h: f64, t_max: f64, points: usize) -> LfsmPlan {
    let p = Fractional::new(alpha(a), h).unwrap();
    LfsmPlan::new(t_max, points, p, LfsmDiscretization::for_grid(t_max, points, p).unwrap()).unwrap()
}

#[test]
fn lfsm_marginal_scale_matches_b1() {
    let (a, h) = (1.5, 0.8);
    let plan = lfsm_plan(a, h, 1.0, 33);
    let ends: Vec<f64> = (0..4000)
        .map(|r| plan.sample(&mut RngStream::new(6, r)).unwrap().values[32])
        .collect();
    let scale = median(&ends.iter().map(|v| v.abs()).collect::<Vec<_>>()) / reference_abs_median(alpha(a));
    let b1 = bn_lfsm(1, h, alpha(a), 1e-9).unwrap().value;
    assert!((scale / b1 - 1.0).abs() < 0.05, "{scale} vs {b1}");
}

#[test]
fn lfsm_stationary_increments_and_self_similarity() {
    let (a, h) = (1.5, 0.8);
    let plan = lfsm_plan(a, h, 1.0, 65);
    let paths: Vec<Vec<f64>> = (0..2000)
        .map(|r| plan.sample(&mut RngStream::new(7, r)).unwrap().values)
        .collect();
    let early: Vec<f64> = paths.iter().map(|p| p[24] - p[16]).collect();
    let late: Vec<f64> = paths.iter().map(|p| p[56] - p[48]).collect();
    let ks = ks_two_sample(&early, &late);
    assert!(ks <= 0.05, "increment KS {ks}");
    let quarter: Vec<f64> = paths.iter().map(|p| p[16]).collect();
    let half: Vec<f64> = paths.iter().map(|p| 2f64.powf(-h) * p[32]).collect();
    let ks = ks_two_sample(&quarter, &half);
    assert!(ks <= 0.05, "self-similarity KS {ks}");
}

#[test]
fn lfsm_negative_exponent_paths() {
    // H < 1/α: singular kernel, still finite paths with X(0) = 0.
    let plan = lfsm_plan(1.5, 0.3, 1.0, 129);
    for r in 0..20 {
        let path = plan.sample(&mut RngStream::new(8, r)).unwrap();
        assert_eq!(path.values[0], 0.0);
    }
}

fn hfsm_plan(a: f64, h: f64, t_max: f64, points: usize) -> HfsmPlan {
    let p = Fractional::new(alpha(a), h).unwrap();
    HfsmPlan::new(t_max, points, p, HfsmDiscretization::for_grid(t_max, points, p).unwrap()).unwrap()
}

#[test]
fn hfsm_increment_scale_and_reversal() {
    let (a, h) = (1.5, 0.7);
    let plan = hfsm_plan(a, h, 16.0, 17);
    let paths: Vec<Vec<f64>> = (0..2000)
        .map(|r| plan.sample(&mut RngStream::new(9, r)).unwrap().values)
        .collect();
    let inc: Vec<f64> = paths.iter().map(|p| p[9] - p[8]).collect();
    let scale = median(&inc.iter().map(|v| v.abs()).collect::<Vec<_>>()) / reference_abs_median(alpha(a));
    let bn = bn_hfsm(h, alpha(a), 1, 1e-9).unwrap().value;
    assert!((scale / bn - 1.0).abs() < 0.1, "{scale} vs {bn}");
    let reversed: Vec<f64> = paths.iter().map(|p| p[8] - p[9]).collect();
    assert!(ks_two_sample(&inc, &reversed) <= 0.05);
    let later: Vec<f64> = paths.iter().map(|p| p[3] - p[2]).collect();
    assert!(ks_two_sample(&inc, &later) <= 0.05);
}

#[test]
fn lepage_iid_marginal_matches_direct_sampler() {
    let a = alpha(1.5);
    let spec = KernelSpec::iid(a, 1).unwrap();
    let cfg = LePageConfig::default();
    let series: Vec<f64> = (0..10_000)
        .map(|r| lepage_series_field(&spec, 1, &cfg, &mut RngStream::new(10, r)).unwrap().path.values[0])
        .collect();
    let mut rng = RngStream::new(11, 0);
    let direct: Vec<f64> = (0..10_000).map(|_| sample_sas(a, 1.0, &mut rng).unwrap()).collect();
    let ks = ks_two_sample(&series, &direct);
    assert!(ks <= 0.03, "KS {ks}");
}

//! Executes one configured experiment and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use stable_fields::bn::{bn_curve, fit_weak_effective_dimension, limit_scale, norm_alpha, verify_bn_upper_bound};
use stable_fields::extremes::{
    estimate_max_moment, fit_growth_rate, frechet_limit_test, limit_constant, verify_moment_constant, Verdict,
};
use stable_fields::regularity::{
    chaining_increment_bound, chaining_samples, fit_holder_exponent, modulus_ratio_series, unit_cube_paths,
};
use stable_fields::{KernelSpec, RngStream};

use crate::config::{self, ExperimentConfig, ExperimentKind, Format, Validated};
use crate::manifest::{sha256_hex, OutputDir, RunManifest};
use crate::svg::{slope_guide, Plot, Series};
use crate::CliError;

/// Default output root when neither `--out` nor the config names a directory.
pub const OUTPUT_ENV: &str = "STABLE_FIELDS_OUTPUT";
pub const DEFAULT_ROOT: &str = "stable-fields-runs";

pub const BN_SLOPE_TOL: f64 = 0.05;
pub const MOMENT_SLOPE_TOL: f64 = 0.04;
pub const CONSERVATIVE_SLOPE_MAX: f64 = 0.05;
pub const HOLDER_TOL: f64 = 0.06;
pub const MODULUS_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// One row of the consolidated report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub model: String,
    pub theorem: String,
    /// What `predicted` and `fitted` measure.
    pub quantity: String,
    pub predicted: f64,
    pub fitted: Option<f64>,
    pub stderr: Option<f64>,
    pub verdict: Verdict,
    pub details: serde_json::Value,
}

pub struct RunOutcome {
    pub directory: PathBuf,
    pub report: Option<ExperimentReport>,
    pub manifest: RunManifest,
}

struct Artifacts {
    report: ExperimentReport,
    csv: Option<(&'static str, String)>,
    plot: Option<Plot>,
}

pub fn describe(model: &KernelSpec) -> String {
    let a = model.alpha().value();
    match model {
        KernelSpec::IidDelta { dim, .. } => format!("iid_delta(alpha={a}, d={dim})"),
        KernelSpec::ConstantField { dim, .. } => format!("constant_field(alpha={a}, d={dim})"),
        KernelSpec::LatticeMa(k) => format!("lattice_ma(alpha={a}, d={}, terms={})", k.dim(), k.entries().len()),
        KernelSpec::Embedded { dim, base } => format!("embedded(d={dim}, base={})", describe(base)),
        other => format!("{}(alpha={a}, H={})", other.tag(), other.hurst().unwrap_or(f64::NAN)),
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> stable_fields::Result<()>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn data_series(label: &str, points: Vec<(f64, f64)>) -> Series {
    Series {
        label: label.to_string(),
        points,
        color: "#1f77b4",
        dashed: false,
        markers: true,
    }
}

fn loglog(title: String, x: &str, y: &str, points: Vec<(f64, f64)>, slope: f64) -> Plot {
    let guide = slope_guide(&points, slope, "predicted");
    Plot {
        title,
        x_label: x.to_string(),
        y_label: y.to_string(),
        log_x: true,
        log_y: true,
        series: vec![data_series("measured", points), guide],
    }
}

fn run_bn(v: &Validated) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let tol = v.config.numeric.tolerance;
    let a = model.alpha().value();
    let curve = bn_curve(model, &v.n_grid(), tol)?;
    // Short grids still yield the curve and the bound check.
    let fit = match fit_weak_effective_dimension(&curve) {
        Ok(f) => Some(f),
        Err(stable_fields::Error::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let bound = verify_bn_upper_bound(&curve, norm_alpha(model, tol)?);
    let predicted = if model.is_dissipative() { model.effective_dim() as f64 } else { 0.0 };
    let ok = fit.is_none_or(|f| (f.exponent - predicted).abs() <= BN_SLOPE_TOL) && bound.passed;
    let points = curve.entries.iter().map(|e| (e.n as f64, e.bn.powf(a))).collect();
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Bn,
            model: describe(model),
            theorem: "b_n growth".into(),
            quantity: "exponent of b_n^alpha".into(),
            predicted,
            fitted: fit.map(|f| f.exponent),
            stderr: fit.map(|f| f.stderr),
            verdict: Verdict::from_bool(ok),
            details: json!({ "fit": fit, "upper_bound": bound, "tolerance": BN_SLOPE_TOL }),
        },
        csv: Some(("bn.csv", csv_string(|w| curve.write_csv(w))?)),
        plot: Some(loglog(format!("b_n^alpha, {}", describe(model)), "n", "b_n^alpha", points, predicted)),
    })
}

fn run_moments(v: &Validated, rng: &RngStream) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let alpha = model.alpha();
    let beta = v.beta();
    let table = estimate_max_moment(model, &v.n_grid(), beta, v.replicates(), rng)?;
    let fit = fit_growth_rate(&table)?;
    let dissipative = model.is_dissipative();
    let c_tilde = limit_scale(model, v.config.numeric.tolerance)?;
    let limit = limit_constant(alpha, beta, c_tilde)?;
    let (p, predicted, slope_ok, theorem) = if dissipative {
        let p = model.effective_dim();
        let e = p as f64 * beta / alpha.value();
        (p, e, (fit.exponent - e).abs() <= MOMENT_SLOPE_TOL, "maximal moments, dissipative")
    } else {
        (model.dim(), 0.0, fit.exponent <= CONSERVATIVE_SLOPE_MAX, "maximal moments, conservative")
    };
    let constant = verify_moment_constant(&table, &limit, p);
    let ok = slope_ok && constant.verdict.passed();
    let points = table.entries.iter().map(|e| (e.n as f64, e.estimate)).collect();
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Moments,
            model: describe(model),
            theorem: theorem.into(),
            quantity: "exponent of E[M_n^beta]".into(),
            predicted,
            fitted: Some(fit.exponent),
            stderr: Some(fit.stderr),
            verdict: Verdict::from_bool(ok),
            details: json!({
                "beta": beta,
                "estimator": table.estimator,
                "limit": limit,
                "constant_check": constant,
                "fit": fit,
            }),
        },
        csv: Some(("moments.csv", csv_string(|w| table.write_csv(w))?)),
        plot: Some(loglog(
            format!("E[M_n^beta], {}", describe(model)),
            "n",
            "E[M_n^beta]",
            points,
            predicted,
        )),
    })
}

fn run_frechet(v: &Validated, rng: &RngStream) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let t = frechet_limit_test(model, v.frechet_n(), v.replicates(), v.config.numeric.threshold, rng)?;
    let csv = format!(
        "n,R,scale,ks,threshold,median_ratio\n{},{},{:e},{:e},{:e},{:e}\n",
        t.n, t.replicates, t.scale, t.ks, t.threshold, t.median_ratio
    );
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Frechet,
            model: describe(model),
            theorem: "Frechet limit of maxima".into(),
            quantity: "KS distance (predicted = threshold)".into(),
            predicted: t.threshold,
            fitted: Some(t.ks),
            stderr: None,
            verdict: Verdict::from_bool(t.passed),
            details: serde_json::to_value(&t).expect("serializable"),
        },
        csv: Some(("frechet.csv", csv)),
        plot: None,
    })
}

fn run_holder(v: &Validated, rng: &RngStream) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let hurst = model.hurst().expect("validated fractional model");
    let predicted = match model {
        KernelSpec::Lfsm(_) => hurst - 1.0 / model.alpha().value(),
        _ => hurst,
    };
    let paths = unit_cube_paths(model, v.level(), v.replicates(), rng)?;
    let (fit, profile) = fit_holder_exponent(&paths, &v.h_grid())?;
    let ok = (fit.exponent - predicted).abs() <= HOLDER_TOL;
    let points = profile.h.iter().copied().zip(profile.omega_median.iter().copied()).collect();
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Holder,
            model: describe(model),
            theorem: "Holder exponent of paths".into(),
            quantity: "exponent of median omega(h)".into(),
            predicted,
            fitted: Some(fit.exponent),
            stderr: Some(fit.stderr),
            verdict: Verdict::from_bool(ok),
            details: json!({ "paths": paths.len(), "level": v.level(), "fit": fit, "tolerance": HOLDER_TOL }),
        },
        csv: Some(("modulus.csv", csv_string(|w| profile.write_csv(w))?)),
        plot: Some(loglog(
            format!("modulus of continuity, {}", describe(model)),
            "h",
            "median omega(h)",
            points,
            predicted,
        )),
    })
}

fn run_modulus(v: &Validated, rng: &RngStream) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let hurst = model.hurst().expect("validated fractional model");
    let (theta2, gamma) = (v.theta2(), v.gamma());
    let paths = unit_cube_paths(model, v.level(), v.replicates(), rng)?;
    let s = modulus_ratio_series(&paths, hurst, theta2, model.alpha().value(), gamma, &v.h_grid())?;
    let mut csv = String::from("h,median_ratio\n");
    for (h, r) in s.h.iter().zip(&s.median_ratio) {
        csv.push_str(&format!("{h:e},{r:e}\n"));
    }
    let points: Vec<(f64, f64)> = s.h.iter().copied().zip(s.median_ratio.iter().copied()).collect();
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Modulus,
            model: describe(model),
            theorem: "uniform modulus of continuity".into(),
            quantity: "share of paths with decreasing ratio (predicted = minimum)".into(),
            predicted: MODULUS_FRACTION,
            fitted: Some(s.fraction_decreasing),
            stderr: None,
            verdict: Verdict::from_bool(s.fraction_decreasing >= MODULUS_FRACTION),
            details: json!({ "theta2": theta2, "gamma": gamma, "paths": paths.len(), "series": s }),
        },
        csv: Some(("ratios.csv", csv)),
        plot: Some(Plot {
            title: format!("omega(h) / normalizer, {}", describe(model)),
            x_label: "h".into(),
            y_label: "median ratio".into(),
            log_x: true,
            log_y: false,
            series: vec![data_series("measured", points)],
        }),
    })
}

fn run_chaining(v: &Validated, rng: &RngStream) -> Result<Artifacts, CliError> {
    let model = &v.model;
    let hurst = model.hurst().expect("validated fractional model");
    let (level, gamma) = (v.level(), v.gamma());
    let (x, y) = chaining_samples(model, level, v.replicates(), rng)?;
    let b = chaining_increment_bound(&x, &y, hurst, level, gamma)?;
    let se = (b.lhs_stderr.powi(2) + b.rhs_stderr.powi(2)).sqrt();
    let csv = format!(
        "level,gamma,lhs,lhs_stderr,rhs,rhs_stderr,holds\n{},{},{:e},{:e},{:e},{:e},{}\n",
        b.level, b.gamma, b.lhs, b.lhs_stderr, b.rhs, b.rhs_stderr, b.holds
    );
    Ok(Artifacts {
        report: ExperimentReport {
            experiment: ExperimentKind::Chaining,
            model: describe(model),
            theorem: "chaining increment bound".into(),
            quantity: "mean chain increment (predicted = bound)".into(),
            predicted: b.rhs,
            fitted: Some(b.lhs),
            stderr: Some(se),
            verdict: Verdict::from_bool(b.holds),
            details: serde_json::to_value(b).expect("serializable"),
        },
        csv: Some(("chaining.csv", csv)),
        plot: None,
    })
}

fn config_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

/// `--out`, then the config's directory, then `$STABLE_FIELDS_OUTPUT/<stem>`,
/// then `./stable-fields-runs/<stem>`.
pub fn output_directory(config_path: &Path, config: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    if let Some(out) = &opts.out {
        return out.clone();
    }
    if let Some(dir) = &config.output.directory {
        return dir.clone();
    }
    let stem = config_stem(config_path);
    match std::env::var_os(OUTPUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
        _ => PathBuf::from(DEFAULT_ROOT).join(stem),
    }
}

pub fn set_threads(threads: usize) {
    if threads > 0 {
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

/// Parses, validates and executes the configuration at `config_path`.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", config_path.display()))))?;
    let mut cfg = config::parse(&text)?;
    if let Some(seed) = opts.seed {
        cfg.numeric.seed = seed;
    }
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let v = config::validate(cfg, base_dir)?;
    set_threads(opts.threads.unwrap_or(v.config.numeric.threads));
    let directory = output_directory(config_path, &v.config, opts);

    if v.config.experiment.kind == ExperimentKind::Report {
        let source = base_dir.join(v.config.experiment.source.as_ref().expect("validated"));
        let manifest = crate::report::report(&source, &directory)?;
        return Ok(RunOutcome {
            directory,
            report: None,
            manifest,
        });
    }

    let canonical = v.config.canonical();
    let config_hash = sha256_hex(canonical.as_bytes());
    let seed = v.config.numeric.seed;
    let rng = RngStream::new(seed, 0);
    let artifacts = match v.config.experiment.kind {
        ExperimentKind::Bn => run_bn(&v)?,
        ExperimentKind::Moments => run_moments(&v, &rng)?,
        ExperimentKind::Frechet => run_frechet(&v, &rng)?,
        ExperimentKind::Holder => run_holder(&v, &rng)?,
        ExperimentKind::Modulus => run_modulus(&v, &rng)?,
        ExperimentKind::Chaining => run_chaining(&v, &rng)?,
        ExperimentKind::Report => unreachable!(),
    };

    let formats = &v.config.output.formats;
    let mut out = OutputDir::create(&directory)?;
    out.write("config.json", (canonical + "\n").as_bytes())?;
    let table = match &v.model {
        KernelSpec::Embedded { base, .. } => base.as_ref(),
        other => other,
    };
    if let KernelSpec::LatticeMa(k) = table {
        out.write("kernel.txt", k.to_table().as_bytes())?;
    }
    if formats.contains(&Format::Csv) {
        if let Some((name, csv)) = &artifacts.csv {
            out.write(name, csv.as_bytes())?;
        }
    }
    if formats.contains(&Format::Json) {
        let text = serde_json::to_string_pretty(&artifacts.report).expect("report serializes");
        out.write("report.json", (text + "\n").as_bytes())?;
    }
    if formats.contains(&Format::Svg) {
        if let Some(plot) = &artifacts.plot {
            out.write("plot.svg", plot.render().as_bytes())?;
        }
    }
    let manifest = out.finish(config_hash, seed, started.elapsed().as_secs_f64())?;
    Ok(RunOutcome {
        directory,
        report: Some(artifacts.report),
        manifest,
    })
}

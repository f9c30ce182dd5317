//! Consolidated report over a directory of earlier runs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::manifest::{OutputDir, RunManifest, MANIFEST_FILE};
use crate::run::ExperimentReport;
use crate::svg::{Plot, Series};
use crate::CliError;

pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug)]
pub struct ReportRow {
    pub run: PathBuf,
    pub report: ExperimentReport,
}

/// Run directories below `root` (including `root`), sorted.
fn run_directories(root: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(root)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    let is_run = entries.iter().any(|p| {
        p.file_name()
            .is_some_and(|n| n == MANIFEST_FILE || n == REPORT_FILE || n == "config.json")
    });
    if is_run {
        found.push(root.to_path_buf());
    }
    for p in entries {
        if p.is_dir() {
            run_directories(&p, found)?;
        }
    }
    Ok(())
}

/// Collects verified runs; problems with individual runs become warnings.
pub fn collect(root: &Path) -> Result<(Vec<ReportRow>, Vec<String>), CliError> {
    if !root.is_dir() {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", root.display()),
        )));
    }
    let mut dirs = Vec::new();
    run_directories(root, &mut dirs)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for dir in dirs {
        let label = dir.strip_prefix(root).unwrap_or(&dir).to_path_buf();
        let shown = if label.as_os_str().is_empty() { PathBuf::from(".") } else { label };
        if !dir.join(MANIFEST_FILE).is_file() {
            warnings.push(format!("{}: no {MANIFEST_FILE}, skipped", shown.display()));
            continue;
        }
        let manifest = match RunManifest::read(&dir) {
            Ok(m) => m,
            Err(e) => {
                warnings.push(format!("{}: unreadable manifest ({e}), skipped", shown.display()));
                continue;
            }
        };
        let problems = manifest.verify(&dir);
        if !problems.is_empty() {
            warnings.push(format!("{}: {}, skipped", shown.display(), problems.join("; ")));
            continue;
        }
        if !manifest.outputs.iter().any(|o| o.path == REPORT_FILE) {
            // A consolidated report's own manifest, or a run without JSON output.
            continue;
        }
        let text = fs::read_to_string(dir.join(REPORT_FILE))?;
        match serde_json::from_str::<ExperimentReport>(&text) {
            Ok(report) => rows.push(ReportRow { run: shown, report }),
            Err(e) => warnings.push(format!("{}: malformed {REPORT_FILE} ({e}), skipped", shown.display())),
        }
    }
    Ok((rows, warnings))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

pub fn markdown(rows: &[ReportRow]) -> String {
    let mut md = String::from("# Stable field experiments\n\n");
    md.push_str("| model | theorem | predicted | fitted | stderr | verdict | quantity | run |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let e = &r.report;
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            e.model,
            e.theorem,
            cell(Some(e.predicted)),
            cell(e.fitted),
            cell(e.stderr),
            if e.verdict.passed() { "pass" } else { "fail" },
            e.quantity,
            r.run.display()
        ));
    }
    let passed = rows.iter().filter(|r| r.report.verdict.passed()).count();
    md.push_str(&format!("\n{passed} of {} runs pass.\n", rows.len()));
    md
}

pub fn plot(rows: &[ReportRow]) -> Plot {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.report.predicted, r.report.fitted?)))
        .collect();
    let lo = pts.iter().flat_map(|p| [p.0, p.1]).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().flat_map(|p| [p.0, p.1]).fold(f64::NEG_INFINITY, f64::max);
    let mut series = vec![Series {
        label: "runs".into(),
        points: pts.clone(),
        color: "#1f77b4",
        dashed: false,
        markers: true,
    }];
    if lo.is_finite() {
        series.push(Series {
            label: "fitted = predicted".into(),
            points: vec![(lo, lo), (hi, hi)],
            color: "#d62728",
            dashed: true,
            markers: false,
        });
    }
    Plot {
        title: "fitted against predicted".into(),
        x_label: "predicted".into(),
        y_label: "fitted".into(),
        log_x: false,
        log_y: false,
        series,
    }
}

/// Scans `source` and writes report.md, report.svg and a manifest to `dest`.
/// Fails when no verified run is found.
pub fn report(source: &Path, dest: &Path) -> Result<RunManifest, CliError> {
    let (rows, warnings) = collect(source)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no verified run manifests under {}", source.display())));
    }
    let mut out = OutputDir::create(dest)?;
    out.write("report.md", markdown(&rows).as_bytes())?;
    out.write("report.svg", plot(&rows).render().as_bytes())?;
    let hash = crate::manifest::sha256_hex(
        rows.iter()
            .map(|r| r.run.display().to_string())
            .collect::<Vec<_>>()
            .join("\n")
            .as_bytes(),
    );
    Ok(out.finish(hash, 0, 0.0)?)
}

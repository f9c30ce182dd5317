//! Sample paths of the supported field models.
//!
//! Lattice models are generated by convolving iid SαS noise with the
//! coefficient table, LFSM by a discretized stochastic integral, HFSM by a
//! sub-Gaussian frequency discretization, and finite lattice windows can
//! also be drawn from the LePage series.

mod conv;
mod hfsm;
mod lattice;
mod lepage;
mod lfsm;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::RngStream;

pub use conv::{convolve_direct, convolve_fft, convolve_prefix};
pub use hfsm::{simulate_hfsm, HfsmDiscretization, HfsmPlan};
pub use lattice::simulate_moving_average;
pub use lepage::{lepage_series_field, LePageConfig, LePageInfo, LePageSample};
pub use lfsm::{simulate_lfsm, LfsmDiscretization, LfsmPlan};

/// Models are described by their kernel.
pub type FieldModel = KernelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Discretization {
    Lattice,
    Lfsm(LfsmDiscretization),
    Hfsm(HfsmDiscretization),
    LePage { terms: usize, gaussian_remainder: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    pub stream_id: u64,
    pub discretization: Discretization,
}

impl Provenance {
    pub fn new(rng: &RngStream, discretization: Discretization) -> Self {
        Self {
            seed: rng.seed(),
            stream_id: rng.stream_id(),
            discretization,
        }
    }
}

/// Field values on the regular grid {0, Δ, …, (extent_j − 1)Δ} per axis,
/// stored row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub model: KernelSpec,
    pub extent: Vec<usize>,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    model: KernelSpec,
    extent: Vec<usize>,
    spacing: f64,
    layout: String,
    provenance: Provenance,
}

const LAYOUT: &str = "f64-le-row-major";

impl SamplePath {
    pub fn new(model: KernelSpec, extent: Vec<usize>, spacing: f64, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if extent.is_empty() || extent.contains(&0) {
            return Err(Error::param("extent", "every axis needs at least one point"));
        }
        if extent.iter().product::<usize>() != values.len() {
            return Err(Error::param("values", "length does not match the grid extent"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("spacing", format!("{spacing} is not a positive spacing")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite path value at flat index {i}")));
        }
        Ok(Self {
            model,
            extent,
            spacing,
            values,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid index of a flat position.
    pub fn index_of(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = flat % self.extent[j];
            flat /= self.extent[j];
        }
        idx
    }

    pub fn flat_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.extent).fold(0, |acc, (&i, &e)| acc * e + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_of(idx)]
    }

    /// The same path multiplied pointwise by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// CSV with one coordinate column per axis (`t` in one dimension,
    /// `t1 … td` otherwise) followed by `value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header: Vec<String> = if self.dim() == 1 {
            vec!["t".into()]
        } else {
            (1..=self.dim()).map(|j| format!("t{j}")).collect()
        };
        writeln!(w, "{},value", header.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            for i in self.index_of(flat) {
                write!(w, "{},", i as f64 * self.spacing)?;
            }
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.bin` (little-endian f64, row-major) and the JSON
    /// sidecar `<stem>.json`. Returns both paths.
    pub fn write_binary(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let mut w = BufWriter::new(File::create(&bin)?);
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let sidecar = Sidecar {
            model: self.model.clone(),
            extent: self.extent.clone(),
            spacing: self.spacing,
            layout: LAYOUT.into(),
            provenance: self.provenance.clone(),
        };
        std::fs::write(&json, serde_json::to_string_pretty(&sidecar)?)?;
        Ok((bin, json))
    }

    pub fn read_binary(stem: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_reader(BufReader::new(File::open(stem.with_extension("json"))?))?;
        if sidecar.layout != LAYOUT {
            return Err(Error::Format(format!("unsupported layout {:?}", sidecar.layout)));
        }
        sidecar.model.validate()?;
        let mut bytes = Vec::new();
        File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Format("binary payload is not a whole number of f64 values".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::new(sidecar.model, sidecar.extent, sidecar.spacing, values, sidecar.provenance)
    }
}

/// Reusable sampler for one model on one integer window, used by the
/// replicate farms. Lattice models are sampled on the window itself; the
/// fractional models on the unit grid 0, 1, …, n − 1 (increment models
/// take one extra point and difference).
#[derive(Clone)]
pub enum FieldSampler {
    Lattice { model: KernelSpec, extent: Vec<usize> },
    Lfsm { model: KernelSpec, plan: Box<LfsmPlan>, increments: bool },
    Hfsm { model: KernelSpec, plan: Box<HfsmPlan>, increments: bool },
}

impl FieldSampler {
    pub fn new(model: &KernelSpec, extent: &[usize]) -> Result<Self> {
        model.validate()?;
        if extent.len() != model.dim() || extent.contains(&0) {
            return Err(Error::param("extent", format!("expected {} positive extents", model.dim())));
        }
        let n = extent[0];
        Ok(match model {
            KernelSpec::Lfsm(p) | KernelSpec::LfsmIncrement(p) => {
                let increments = matches!(model, KernelSpec::LfsmIncrement(_));
                let points = if increments { n + 1 } else { n };
                let t_max = (points.max(2) - 1) as f64;
                let disc = LfsmDiscretization::for_grid(t_max, points.max(2), *p)?;
                FieldSampler::Lfsm {
                    model: model.clone(),
                    plan: Box::new(LfsmPlan::new(t_max, points.max(2), *p, disc)?),
                    increments,
                }
            }
            KernelSpec::Hfsm(p) | KernelSpec::HfsmIncrement(p) => {
                let increments = matches!(model, KernelSpec::HfsmIncrement(_));
                let points = if increments { n + 1 } else { n };
                let t_max = (points.max(2) - 1) as f64;
                let disc = HfsmDiscretization::for_grid(t_max, points.max(2), *p)?;
                FieldSampler::Hfsm {
                    model: model.clone(),
                    plan: Box::new(HfsmPlan::new(t_max, points.max(2), *p, disc)?),
                    increments,
                }
            }
            _ => FieldSampler::Lattice {
                model: model.clone(),
                extent: extent.to_vec(),
            },
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<SamplePath> {
        match self {
            FieldSampler::Lattice { model, extent } => simulate_moving_average(model, extent, rng),
            FieldSampler::Lfsm {
                model,
                plan,
                increments,
            } => {
                let path = plan.sample(rng)?;
                unit_grid_view(model, path, *increments)
            }
            FieldSampler::Hfsm {
                model,
                plan,
                increments,
            } => {
                let path = plan.sample(rng)?;
                unit_grid_view(model, path, *increments)
            }
        }
    }
}

fn unit_grid_view(model: &KernelSpec, path: SamplePath, increments: bool) -> Result<SamplePath> {
    let values: Vec<f64> = if increments {
        path.values.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        path.values.clone()
    };
    let n = values.len();
    SamplePath::new(model.clone(), vec![n], 1.0, values, path.provenance)
}

/// Increment field Y^{(v)}(t) = X(t + v) − X(t) of a path, for t with both
/// points on the grid. Offsets are in grid steps.
pub fn increment_path(path: &SamplePath, v: &[i64]) -> Result<SamplePath> {
    if v.len() != path.dim() {
        return Err(Error::param("v", "offset dimension does not match the path"));
    }
    let lo: Vec<usize> = v.iter().map(|&x| (-x).max(0) as usize).collect();
    let mut extent = Vec::with_capacity(path.dim());
    for (j, &x) in v.iter().enumerate() {
        let e = path.extent[j] as i64 - x.abs();
        if e <= 0 {
            return Err(Error::param("v", "offset exceeds the path extent"));
        }
        extent.push(e as usize);
    }
    let count: usize = extent.iter().product();
    let mut values = Vec::with_capacity(count);
    let mut idx = vec![0usize; path.dim()];
    for flat in 0..count {
        let mut rest = flat;
        for j in (0..path.dim()).rev() {
            idx[j] = lo[j] + rest % extent[j];
            rest /= extent[j];
        }
        let base = path.get(&idx);
        let shifted: Vec<usize> = idx.iter().zip(v).map(|(&i, &x)| (i as i64 + x) as usize).collect();
        values.push(path.get(&shifted) - base);
    }
    SamplePath::new(path.model.clone(), extent, path.spacing, values, path.provenance.clone())
}

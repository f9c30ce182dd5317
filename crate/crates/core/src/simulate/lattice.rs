use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::rng::RngStream;
use crate::stable::SymmetricStable;

use super::{Discretization, Provenance, SamplePath};

/// Y(t) = Σ_s f(t + s) M(s) on the window [0, extent − 1] with M iid
/// standard SαS. Embedded models simulate their base on the first p axes
/// and repeat it along the rest; the constant field repeats one draw.
///
/// Noise is drawn in row-major order over the box of noise sites that
/// reach the window, so the path depends only on (seed, stream_id, model,
/// window).
pub fn simulate_moving_average(kernel: &KernelSpec, window: &[usize], rng: &mut RngStream) -> Result<SamplePath> {
    if window.len() != kernel.dim() {
        return Err(Error::param(
            "window",
            format!("{} extents given for a {}-dimensional model", window.len(), kernel.dim()),
        ));
    }
    if window.contains(&0) {
        return Err(Error::param("window", "extents must be at least 1"));
    }
    let provenance = Provenance::new(rng, Discretization::Lattice);
    let values = match kernel {
        KernelSpec::IidDelta { .. } | KernelSpec::LatticeMa(_) => lattice_values(kernel, window, rng)?,
        KernelSpec::Embedded { base, .. } => {
            let p = base.dim();
            let base_values = lattice_values(base, &window[..p], rng)?;
            let repeat: usize = window[p..].iter().product();
            base_values
                .iter()
                .flat_map(|&v| std::iter::repeat_n(v, repeat))
                .collect()
        }
        KernelSpec::ConstantField { alpha, .. } => {
            let y = SymmetricStable::standard(*alpha)?.sample(rng);
            vec![y; window.iter().product()]
        }
        other => {
            return Err(Error::param(
                "model",
                format!("{} is not a lattice moving-average model", other.tag()),
            ))
        }
    };
    SamplePath::new(kernel.clone(), window.to_vec(), 1.0, values, provenance)
}

fn lattice_values(kernel: &KernelSpec, window: &[usize], rng: &mut RngStream) -> Result<Vec<f64>> {
    let table = kernel.as_lattice().expect("lattice model");
    let law = SymmetricStable::standard(table.alpha())?;
    let d = window.len();
    let shape = table.shape();
    // Noise sites s = u − t cover [origin − (W − 1), origin + shape − 1].
    let noise_extent: Vec<usize> = (0..d).map(|j| window[j] + shape[j] - 1).collect();
    let noise: Vec<f64> = (0..noise_extent.iter().product::<usize>())
        .map(|_| law.sample(rng))
        .collect();
    let count: usize = window.iter().product();
    let mut values = vec![0.0; count];
    let mut t = vec![0usize; d];
    for (flat_u, &c) in table.coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        // Table offset u − origin; noise index (u − origin) + (W − 1) − t.
        let mut rest = flat_u;
        let mut offset = vec![0usize; d];
        for j in (0..d).rev() {
            offset[j] = rest % shape[j] + window[j] - 1;
            rest /= shape[j];
        }
        for (flat_t, v) in values.iter_mut().enumerate() {
            let mut r = flat_t;
            for j in (0..d).rev() {
                t[j] = r % window[j];
                r /= window[j];
            }
            let mut flat_s = 0usize;
            for j in 0..d {
                flat_s = flat_s * noise_extent[j] + (offset[j] - t[j]);
            }
            *v += c * noise[flat_s];
        }
    }
    Ok(values)
}

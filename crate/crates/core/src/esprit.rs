//! Generalized eigenvalues of the denoised pencil and their conversion to
//! aliased base frequencies.
//!
//! The noiseless pencil `{Cxx, Cxy}` has rank `K`, so the full `m x m`
//! problem is singular. Both matrices are projected onto the dominant
//! eigenspace of `Cxx` and the reduced pencil is solved there.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{general_eigenvalues, hermitian_eigen_desc, CMatrix};
use crate::signal_model::SampleSequence;
use crate::subspace::{PencilModel, SnapshotConfig};

/// Accepted generalized eigenvalues satisfy `GAMMA_BAND.0 < |gamma| < GAMMA_BAND.1`.
pub const GAMMA_BAND: (f64, f64) = (0.5, 2.0);

/// A signal eigenvalue of `Cxx` must exceed this fraction of the largest.
const RANK_TOLERANCE: f64 = 1e-10;

/// `K` rotation eigenvalues and the base frequencies they imply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilSolution {
    pub gammas: Vec<Complex64>,
    /// Base (aliased) frequencies in `[0, rate)`, ascending.
    pub base_freqs: Vec<f64>,
    pub rate: f64,
    pub window: usize,
    pub sigma2: f64,
}

/// The `k` generalized eigenvalues `gamma` with `Cxx v = gamma Cxy v` on the
/// signal subspace. Noiseless data gives `gamma_k = exp(j 2 pi f_k / rate)`.
pub fn solve_pencil(model: &PencilModel, k: usize) -> Result<Vec<Complex64>> {
    let m = model.window();
    if k == 0 || k >= m {
        return Err(Error::InvalidConfiguration(format!(
            "tone count {k} must be in 1..{m} for window {m}"
        )));
    }
    let (values, vectors) = hermitian_eigen_desc(&model.cxx);
    let resolved = values
        .iter()
        .take(k)
        .filter(|&&v| values[0] > 0.0 && v > RANK_TOLERANCE * values[0])
        .count();
    if resolved < k {
        return Err(Error::DegenerateSignal {
            requested: k,
            resolved,
        });
    }

    // Widen the subspace until enough eigenvalues fall inside the band.
    let mut best = 0;
    for dim in k..m {
        let basis = vectors.columns(0, dim).into_owned();
        let Some(mut accepted) = reduced_pencil_eigenvalues(model, &basis) else {
            continue;
        };
        accepted.retain(|g| {
            let r = g.norm();
            r.is_finite() && r > GAMMA_BAND.0 && r < GAMMA_BAND.1
        });
        if accepted.len() >= k {
            accepted.sort_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
            accepted.truncate(k);
            return Ok(accepted);
        }
        best = best.max(accepted.len());
    }
    Err(Error::DegenerateSignal {
        requested: k,
        resolved: best,
    })
}

fn reduced_pencil_eigenvalues(model: &PencilModel, basis: &CMatrix) -> Option<Vec<Complex64>> {
    let a = basis.adjoint() * &model.cxx * basis;
    let b = basis.adjoint() * &model.cxy * basis;
    let b_inv = b.try_inverse()?;
    general_eigenvalues(&(b_inv * a))
}

/// `arg(gamma) * rate / 2 pi` with the argument taken in `[0, 2 pi)`.
pub fn gamma_to_base_freq(gamma: Complex64, rate: f64) -> Result<f64> {
    if gamma.norm() == 0.0 || !gamma.norm().is_finite() {
        return Err(Error::InvalidEigenvalue(gamma.to_string()));
    }
    let f = gamma.arg().rem_euclid(TAU) / TAU * rate;
    Ok(if f >= rate { 0.0 } else { f })
}

/// Covariances, noise floor, pencil and base frequencies for a `k`-tone
/// model. `window` defaults to [`SnapshotConfig::default_window`].
pub fn esprit_estimate(
    seq: &SampleSequence,
    k: usize,
    window: Option<usize>,
) -> Result<PencilSolution> {
    let m = window.unwrap_or_else(|| SnapshotConfig::default_window(seq.len(), k));
    let model = PencilModel::estimate(seq, m, k)?;
    let gammas = solve_pencil(&model, k)?;
    let mut pairs = gammas
        .into_iter()
        .map(|g| Ok((gamma_to_base_freq(g, seq.rate)?, g)))
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(PencilSolution {
        gammas: pairs.iter().map(|p| p.1).collect(),
        base_freqs: pairs.iter().map(|p| p.0).collect(),
        rate: seq.rate,
        window: m,
        sigma2: model.sigma2,
    })
}

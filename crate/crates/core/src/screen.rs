//! Screening of eligible frequencies against the second channel.
//!
//! Each eligible frequency `f = fh (g + r/p)` is tested on the sequence
//! sampled at `fh / q` with the steering vector
//! `a_r(g)[t] = exp(j 2 pi q t (g + r/p))`, `t = 1..=m'`. The pseudo-spectrum
//! `1 / |U_e^H a_r(g)|^2` peaks where the candidate is orthogonal to the
//! noise subspace `U_e`, i.e. at the frequencies actually present.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alias::AliasSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen_desc, CMatrix};
use crate::signal_model::SampleSequence;
use crate::subspace::{auto_covariance, SnapshotConfig};

/// Upper bound on reported pseudo-spectrum power.
pub const POWER_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    /// Normalized residue `f_hat / fh`.
    pub g: f64,
    pub r: usize,
    pub alias_ratio: u32,
    pub screen_ratio: u32,
    pub entries: Vec<Complex64>,
}

/// Steering vector of the eligible frequency `fh (g + r / alias_ratio)` as
/// seen by the channel sampled at `fh / screen_ratio`.
pub fn steering_vector(
    g: f64,
    r: usize,
    alias_ratio: u32,
    screen_ratio: u32,
    len: usize,
) -> Result<SteeringVector> {
    if r >= alias_ratio as usize {
        return Err(Error::InvalidAlias {
            r,
            ratio: alias_ratio,
        });
    }
    if len == 0 {
        return Err(Error::InvalidConfiguration(
            "steering length must be positive".into(),
        ));
    }
    let norm_f = g + r as f64 / alias_ratio as f64;
    let entries = (1..=len)
        .map(|t| {
            let cycles = (screen_ratio as f64 * t as f64 * norm_f).rem_euclid(1.0);
            Complex64::from_polar(1.0, TAU * cycles)
        })
        .collect();
    Ok(SteeringVector {
        g,
        r,
        alias_ratio,
        screen_ratio,
        entries,
    })
}

/// Smallest multiple of `alias_ratio` that is at least `2k + 2`.
pub fn default_screen_window(alias_ratio: u32, k: usize) -> usize {
    let ratio = alias_ratio.max(1) as usize;
    (2 * k + 2).div_ceil(ratio) * ratio
}

/// Orthonormal basis of the `len - k` weakest eigen-directions of the
/// snapshot covariance of `seq`.
pub fn noise_subspace(seq: &SampleSequence, len: usize, k: usize) -> Result<CMatrix> {
    if len <= k {
        return Err(Error::InvalidConfiguration(format!(
            "screening window {len} must exceed tone count {k}"
        )));
    }
    SnapshotConfig::new(seq.len(), len)?;
    let rxx = auto_covariance(seq, len)?;
    let (_, vectors) = hermitian_eigen_desc(&rxx);
    Ok(vectors.columns(k, len - k).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry {
    /// Eligible frequency, Hz.
    pub freq: f64,
    /// Index of the alias family (the residue it came from).
    pub k: usize,
    /// Alias offset within the family.
    pub r: usize,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoSpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub selected: Vec<f64>,
}

impl PseudoSpectrum {
    /// `k,r,f_tilde_hz,power` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,r,f_tilde_hz,power")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.k, e.r, e.freq, e.power)?;
        }
        Ok(())
    }

    /// Entries ordered by decreasing power, ties to the lower frequency.
    pub fn ranked(&self) -> Vec<SpectrumEntry> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| b.power.total_cmp(&a.power).then(a.freq.total_cmp(&b.freq)));
        ranked
    }
}

/// Evaluates the pseudo-spectrum at every eligible frequency of every
/// family. `noise` comes from the channel sampled at `fh / screen_ratio`.
pub fn pseudo_spectrum(
    noise: &CMatrix,
    alias_sets: &[AliasSet],
    screen_ratio: u32,
) -> Result<PseudoSpectrum> {
    let len = noise.nrows();
    let candidates: Vec<(usize, &AliasSet, usize, f64)> = alias_sets
        .iter()
        .enumerate()
        .flat_map(|(k, set)| {
            set.eligible
                .iter()
                .map(move |e| (k, set, e.l as usize, e.freq))
        })
        .collect();
    let entries = candidates
        .par_iter()
        .map(|&(k, set, r, freq)| {
            let a = steering_vector(set.base / set.fh, r, set.ratio, screen_ratio, len)?;
            let projected = noise.adjoint() * nalgebra::DVector::from_vec(a.entries);
            let energy = projected.norm_squared();
            let power = if energy * POWER_CAP <= 1.0 {
                POWER_CAP
            } else {
                1.0 / energy
            };
            Ok(SpectrumEntry { freq, k, r, power })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoSpectrum {
        entries,
        selected: Vec::new(),
    })
}

/// How final estimates are picked from the pseudo-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The `k` strongest distinct eligible frequencies.
    #[default]
    TopK,
    /// The `k` strongest, at most one per alias family.
    TopKPerFamily,
    /// Every entry with power above the threshold.
    Threshold(f64),
}

/// Final estimates, ascending. Threshold mode may return any count.
pub fn select_frequencies(ps: &PseudoSpectrum, k: usize, mode: Selection) -> Vec<f64> {
    let ranked = ps.ranked();
    let mut picked: Vec<SpectrumEntry> = Vec::new();
    match mode {
        Selection::TopK => {
            for e in ranked {
                if picked.len() == k {
                    break;
                }
                // Two families with the same residue produce identical entries.
                let scale = e.freq.abs().max(1.0);
                if picked
                    .iter()
                    .all(|s| (s.freq - e.freq).abs() > 1e-9 * scale)
                {
                    picked.push(e);
                }
            }
        }
        Selection::TopKPerFamily => {
            for e in ranked {
                if picked.len() == k {
                    break;
                }
                if picked.iter().all(|s| s.k != e.k) {
                    picked.push(e);
                }
            }
        }
        Selection::Threshold(t) => picked = ranked.into_iter().filter(|e| e.power > t).collect(),
    }
    let mut out: Vec<f64> = picked.into_iter().map(|e| e.freq).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Noise subspace of `seq`, pseudo-spectrum over `alias_sets`, and selection.
pub fn screen(
    seq: &SampleSequence,
    alias_sets: &[AliasSet],
    screen_ratio: u32,
    k: usize,
    len: usize,
    mode: Selection,
) -> Result<PseudoSpectrum> {
    let noise = noise_subspace(seq, len, k)?;
    let mut ps = pseudo_spectrum(&noise, alias_sets, screen_ratio)?;
    ps.selected = select_frequencies(&ps, k, mode);
    Ok(ps)
}

//! Lagged snapshot vectors, sample covariances and the denoised pencil pair.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen_desc, hermitian_part, CMatrix};
use crate::signal_model::SampleSequence;

/// Window length `m` and the number of snapshot pairs it leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotConfig {
    pub m: usize,
    pub n_snapshots: usize,
}

impl SnapshotConfig {
    /// Window `m` over `n` samples; requires at least `m` snapshot pairs.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfiguration(
                "window length must be positive".into(),
            ));
        }
        if n < 2 * m {
            return Err(Error::InsufficientData {
                needed: 2 * m,
                got: n,
            });
        }
        Ok(Self {
            m,
            n_snapshots: n - m,
        })
    }

    /// `min(n / 2, max(2k + 2, 8))`.
    pub fn default_window(n: usize, k: usize) -> usize {
        (n / 2).min((2 * k + 2).max(8))
    }
}

/// Snapshot pairs `(x(n), y(n))`, `n = 1 ..= N - m`, with `y(n)` the window
/// advanced by one sample.
pub fn build_snapshots(
    seq: &SampleSequence,
    m: usize,
) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
    let n = seq.len();
    if m == 0 {
        return Err(Error::InvalidConfiguration(
            "window length must be positive".into(),
        ));
    }
    if n <= m {
        return Err(Error::InsufficientData {
            needed: m + 1,
            got: n,
        });
    }
    Ok((0..n - m)
        .map(|i| {
            (
                seq.samples[i..i + m].to_vec(),
                seq.samples[i + 1..i + m + 1].to_vec(),
            )
        })
        .collect())
}

/// Snapshot-averaged `(Rxx, Rxy)`. `Rxx` is returned Hermitian-symmetrized.
pub fn estimate_covariances(seq: &SampleSequence, m: usize) -> Result<(CMatrix, CMatrix)> {
    let cfg = SnapshotConfig::new(seq.len(), m)?;
    let x = &seq.samples;
    let scale = 1.0 / cfg.n_snapshots as f64;
    let rxx = lagged_products(x, x, m, cfg.n_snapshots).scale(scale);
    let rxy = lagged_products(x, &x[1..], m, cfg.n_snapshots).scale(scale);
    Ok((hermitian_part(&rxx), rxy))
}

/// Snapshot-averaged auto-covariance only.
pub fn auto_covariance(seq: &SampleSequence, m: usize) -> Result<CMatrix> {
    let cfg = SnapshotConfig::new(seq.len(), m)?;
    let x = &seq.samples;
    let r = lagged_products(x, x, m, cfg.n_snapshots).scale(1.0 / cfg.n_snapshots as f64);
    Ok(hermitian_part(&r))
}

// C[i][j] = sum_{n < s} a[n+i] conj(b[n+j]). The first row and column are summed
// directly; the rest follows from sliding each diagonal by one sample.
fn lagged_products(a: &[Complex64], b: &[Complex64], m: usize, s: usize) -> CMatrix {
    let dot = |i: usize, j: usize| -> Complex64 {
        a[i..i + s]
            .iter()
            .zip(&b[j..j + s])
            .map(|(u, v)| u * v.conj())
            .sum()
    };
    let mut c = CMatrix::zeros(m, m);
    for k in 0..m {
        c[(0, k)] = dot(0, k);
        c[(k, 0)] = dot(k, 0);
    }
    for j in 1..m {
        for i in 1..m {
            c[(i, j)] =
                c[(i - 1, j - 1)] + a[s + i - 1] * b[s + j - 1].conj() - a[i - 1] * b[j - 1].conj();
        }
    }
    c
}

/// Mean of the `m - k` smallest eigenvalues of `rxx`, clamped at zero.
pub fn estimate_noise_variance(rxx: &CMatrix, k: usize) -> Result<f64> {
    let m = rxx.nrows();
    if m <= k {
        return Err(Error::InvalidConfiguration(format!(
            "window length {m} must exceed tone count {k}"
        )));
    }
    let (values, _) = hermitian_eigen_desc(&hermitian_part(rxx));
    let tail = &values[k..];
    Ok((tail.iter().sum::<f64>() / tail.len() as f64).max(0.0))
}

/// `m x m` matrix with ones on the first sub-diagonal.
pub fn shift_matrix(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| {
        if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Covariances with the noise contribution removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilModel {
    pub rxx: CMatrix,
    pub rxy: CMatrix,
    pub sigma2: f64,
    pub cxx: CMatrix,
    pub cxy: CMatrix,
    pub z: CMatrix,
}

pub fn build_pencil(rxx: CMatrix, rxy: CMatrix, sigma2: f64) -> Result<PencilModel> {
    let m = rxx.nrows();
    if rxx.ncols() != m || rxy.shape() != (m, m) {
        return Err(Error::InvalidInput(format!(
            "covariance shapes disagree: {:?} and {:?}",
            rxx.shape(),
            rxy.shape()
        )));
    }
    let z = shift_matrix(m);
    let identity = CMatrix::identity(m, m);
    let cxx = &rxx - identity.scale(sigma2);
    let cxy = &rxy - z.scale(sigma2);
    Ok(PencilModel {
        rxx,
        rxy,
        sigma2,
        cxx,
        cxy,
        z,
    })
}

impl PencilModel {
    /// Covariances → noise floor → pencil, for a `k`-tone model.
    pub fn estimate(seq: &SampleSequence, m: usize, k: usize) -> Result<Self> {
        let (rxx, rxy) = estimate_covariances(seq, m)?;
        let sigma2 = estimate_noise_variance(&rxx, k)?;
        build_pencil(rxx, rxy, sigma2)
    }

    pub fn window(&self) -> usize {
        self.rxx.nrows()
    }

    /// Debug dump; matrices flattened row-major as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump {
            m: usize,
            sigma2: f64,
            rxx: Vec<[f64; 2]>,
            rxy: Vec<[f64; 2]>,
            cxx: Vec<[f64; 2]>,
            cxy: Vec<[f64; 2]>,
            z: Vec<[f64; 2]>,
        }
        serde_json::to_value(Dump {
            m: self.window(),
            sigma2: self.sigma2,
            rxx: flatten_row_major(&self.rxx),
            rxy: flatten_row_major(&self.rxy),
            cxx: flatten_row_major(&self.cxx),
            cxy: flatten_row_major(&self.cxy),
            z: flatten_row_major(&self.z),
        })
        .expect("pencil dump is plain data")
    }
}

pub fn flatten_row_major(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::signal_model::{add_noise, synthesize, ToneSpec};
    use nalgebra::DVector;
    use std::f64::consts::TAU;

    fn seq(values: &[(f64, f64)]) -> SampleSequence {
        SampleSequence::from_samples(
            values
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect(),
            1.0,
        )
    }

    /// Vandermonde steering matrix with entries `exp(j 2 pi f_k i / rate)`.
    fn vandermonde(freqs: &[f64], rate: f64, m: usize) -> CMatrix {
        CMatrix::from_fn(m, freqs.len(), |i, k| {
            Complex64::from_polar(1.0, TAU * freqs[k] * i as f64 / rate)
        })
    }

    #[test]
    fn snapshot_count_and_shift() {
        let s = seq(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (5.0, 0.0)]);
        let snaps = build_snapshots(&s, 3).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[1].0, s.samples[1..4].to_vec());
        assert_eq!(snaps[1].1, s.samples[2..5].to_vec());
        assert_eq!(
            build_snapshots(&s, 5).unwrap_err(),
            Error::InsufficientData { needed: 6, got: 5 }
        );
    }

    #[test]
    fn dc_snapshots_are_constant() {
        let s = seq(&[(0.5, -0.5); 9]);
        for (x, y) in build_snapshots(&s, 4).unwrap() {
            assert!(x.iter().chain(&y).all(|&v| v == Complex64::new(0.5, -0.5)));
        }
    }

    #[test]
    fn single_tone_shift_is_rotation() {
        let spec = ToneSpec::from_frequencies(&[3.3], 1.0).unwrap();
        let s = synthesize(&spec, 20.0, 30, 1).unwrap();
        let rot = Complex64::from_polar(1.0, TAU * 3.3 / 20.0);
        for (x, y) in build_snapshots(&s, 6).unwrap() {
            for (xi, yi) in x.iter().zip(&y) {
                assert!((yi - rot * xi).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dc_tone_covariance_is_all_ones() {
        let spec = ToneSpec::from_frequencies(&[0.0], 1.0).unwrap();
        let s = synthesize(&spec, 10.0, 20, 1).unwrap();
        let (rxx, rxy) = estimate_covariances(&s, 5).unwrap();
        let ones = CMatrix::from_element(5, 5, Complex64::new(1.0, 0.0));
        assert!(max_abs(&(rxx - &ones)) < 1e-14);
        assert!(max_abs(&(rxy - ones)) < 1e-14);
    }

    #[test]
    fn small_case_matches_hand_average() {
        let s = seq(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 2.0), (3.0, -1.0), (0.5, 0.5)]);
        // m = 2 leaves snapshots starting at samples 0, 1, 2.
        let (rxx, rxy) = estimate_covariances(&s, 2).unwrap();
        let x = &s.samples;
        for i in 0..2 {
            for j in 0..2 {
                let exx: Complex64 = (0..3)
                    .map(|n| x[n + i] * x[n + j].conj())
                    .sum::<Complex64>()
                    / 3.0;
                let exy: Complex64 = (0..3)
                    .map(|n| x[n + i] * x[n + j + 1].conj())
                    .sum::<Complex64>()
                    / 3.0;
                let sym = (exx
                    + (0..3)
                        .map(|n| x[n + j] * x[n + i].conj())
                        .sum::<Complex64>()
                        .conj()
                        / 3.0)
                    / 2.0;
                assert!((rxx[(i, j)] - sym).norm() < 1e-14);
                assert!((rxy[(i, j)] - exy).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_outer_product_oracle() {
        let spec = ToneSpec::from_frequencies(&[1.0, 4.5, 7.25], 0.7).unwrap();
        let s = add_noise(&synthesize(&spec, 20.0, 64, 1).unwrap(), 5.0, 11).unwrap();
        for m in [2, 5, 8, 16, 32] {
            let (rxx, rxy) = estimate_covariances(&s, m).unwrap();
            let snaps = build_snapshots(&s, m).unwrap();
            let mut oxx = CMatrix::zeros(m, m);
            let mut oxy = CMatrix::zeros(m, m);
            for (x, y) in &snaps {
                let xv = DVector::from_column_slice(x);
                let yv = DVector::from_column_slice(y);
                oxx += &xv * xv.adjoint();
                oxy += &xv * yv.adjoint();
            }
            let n = snaps.len() as f64;
            assert!(max_abs(&(rxx - oxx.unscale(n))) < 1e-12);
            assert!(max_abs(&(rxy - oxy.unscale(n))) < 1e-12);
        }
    }

    #[test]
    fn rxx_is_exactly_hermitian() {
        let spec = ToneSpec::from_frequencies(&[2.0, 9.0], 1.0).unwrap();
        let s = add_noise(&synthesize(&spec, 20.0, 200, 1).unwrap(), 0.0, 4).unwrap();
        let (rxx, _) = estimate_covariances(&s, 8).unwrap();
        assert_eq!(max_abs(&(&rxx - rxx.adjoint())), 0.0);
        let (vals, _) = hermitian_eigen_desc(&rxx);
        assert!(vals.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn covariance_requires_enough_snapshots() {
        let s = seq(&[(1.0, 0.0); 7]);
        assert_eq!(
            estimate_covariances(&s, 4).unwrap_err(),
            Error::InsufficientData { needed: 8, got: 7 }
        );
    }

    #[test]
    fn large_sample_structure() {
        // Rxx -> A S A^H + sigma^2 I with S = diag(|s_k|^2).
        let freqs = [2.0, 7.0];
        let spec = ToneSpec::new(vec![
            crate::signal_model::Tone::new(2.0, 1.0, 0.4),
            crate::signal_model::Tone::new(7.0, 0.6, 1.9),
        ])
        .unwrap();
        let s = add_noise(&synthesize(&spec, 20.0, 10_000, 1).unwrap(), 10.0, 8).unwrap();
        let sigma2 = s.noise_variance.unwrap();
        let (rxx, _) = estimate_covariances(&s, 4).unwrap();
        let a = vandermonde(&freqs, 20.0, 4);
        let p = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.36, 0.0),
        ]));
        let model = &a * p * a.adjoint() + CMatrix::identity(4, 4).scale(sigma2);
        assert!(max_abs(&(rxx - model)) < 0.05);
    }

    #[test]
    fn noise_variance_of_scaled_identity() {
        let rxx = CMatrix::identity(3, 3).scale(2.0);
        assert!((estimate_noise_variance(&rxx, 1).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(
            estimate_noise_variance(&rxx, 3),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn noise_variance_of_noiseless_data_is_tiny() {
        let spec = ToneSpec::from_frequencies(&[5.0, 10.0], 0.8).unwrap();
        let s = synthesize(&spec, 20.0 + 0.37, 400, 1).unwrap();
        let (rxx, _) = estimate_covariances(&s, 8).unwrap();
        let trace: f64 = rxx.diagonal().iter().map(|z| z.re).sum();
        assert!(estimate_noise_variance(&rxx, 2).unwrap() <= 1e-8 * trace / 8.0);
    }

    #[test]
    fn noise_variance_of_constructed_model() {
        let a = vandermonde(&[1.0, 6.0], 20.0, 8);
        let p = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.5, 0.0),
            Complex64::new(0.4, 0.0),
        ]));
        let rxx = &a * p * a.adjoint() + CMatrix::identity(8, 8).scale(0.5);
        let sigma2 = estimate_noise_variance(&rxx, 2).unwrap();
        assert!((sigma2 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn noise_variance_converges() {
        let spec = ToneSpec::from_frequencies(&[1.5, 6.0, 13.0], 0.8).unwrap();
        let s = add_noise(&synthesize(&spec, 20.0, 10_000, 1).unwrap(), 10.0, 21).unwrap();
        let truth = s.noise_variance.unwrap();
        let (rxx, _) = estimate_covariances(&s, 8).unwrap();
        let est = estimate_noise_variance(&rxx, 3).unwrap();
        assert!((est - truth).abs() < 0.1 * truth, "{est} vs {truth}");
    }

    #[test]
    fn pencil_construction() {
        let z = shift_matrix(3);
        let expected = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(z[(i, j)], Complex64::new(expected[i][j], 0.0));
            }
        }

        let spec = ToneSpec::from_frequencies(&[5.0, 10.0], 0.8).unwrap();
        let s = synthesize(&spec, 20.0, 100, 1).unwrap();
        let (rxx, rxy) = estimate_covariances(&s, 4).unwrap();
        let pencil = build_pencil(rxx.clone(), rxy.clone(), 0.0).unwrap();
        assert_eq!(pencil.cxx, rxx);
        assert_eq!(pencil.cxy, rxy);

        let pencil = build_pencil(rxx.clone(), rxy.clone(), 0.25).unwrap();
        assert_eq!(pencil.cxx, &rxx - CMatrix::identity(4, 4).scale(0.25));
        assert_eq!(pencil.cxy, &rxy - shift_matrix(4).scale(0.25));
        assert!(build_pencil(rxx, CMatrix::zeros(3, 3), 0.0).is_err());
    }

    #[test]
    fn noiseless_pencil_has_rank_k() {
        let spec = ToneSpec::from_frequencies(&[2.5, 8.0], 0.8).unwrap();
        let s = synthesize(&spec, 20.0, 200, 1).unwrap();
        let pencil = PencilModel::estimate(&s, 8, 2).unwrap();
        let (vals, _) = hermitian_eigen_desc(&pencil.cxx);
        let rank = vals.iter().filter(|&&v| v > 1e-9 * vals[0]).count();
        assert_eq!(rank, 2);
    }

    #[test]
    fn pencil_json_layout() {
        let pencil = build_pencil(CMatrix::identity(2, 2), shift_matrix(2), 0.0).unwrap();
        let json = pencil.to_json();
        assert_eq!(json["m"], 2);
        assert_eq!(
            json["z"],
            serde_json::json!([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        );
    }

    #[test]
    fn default_window_rule() {
        assert_eq!(SnapshotConfig::default_window(1000, 3), 8);
        assert_eq!(SnapshotConfig::default_window(1000, 5), 12);
        assert_eq!(SnapshotConfig::default_window(10, 5), 5);
    }
}

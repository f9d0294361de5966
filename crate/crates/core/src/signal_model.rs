//! Multi-tone complex signal synthesis and the two-channel sub-Nyquist sampler.
//!
//! A sample at index `n` taken at rate `rate` is
//! `x(n) = sum_k s_k exp(j 2 pi f_k n / rate) + e(n)`, with `n` counted from 1.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum tone separation used by the reference simulations, in Hz.
pub const DEFAULT_MIN_SEPARATION: f64 = 0.1;

/// One complex exponential component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Frequency in Hz.
    pub f: f64,
    /// Magnitude of the complex amplitude.
    pub amp: f64,
    /// Phase of the complex amplitude, radians.
    #[serde(default)]
    pub phase: f64,
}

impl Tone {
    pub fn new(f: f64, amp: f64, phase: f64) -> Self {
        Self { f, amp, phase }
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amp, self.phase)
    }
}

/// Ground-truth tone set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Tone>", into = "Vec<Tone>")]
pub struct ToneSpec {
    tones: Vec<Tone>,
}

impl ToneSpec {
    /// Builds a tone set. Rejects empty sets, non-positive amplitudes and
    /// repeated frequencies.
    pub fn new(tones: Vec<Tone>) -> Result<Self> {
        if tones.is_empty() {
            return Err(Error::InvalidInput("tone list is empty".into()));
        }
        for t in &tones {
            if !t.f.is_finite() || !t.phase.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite tone {t:?}")));
            }
            if !(t.amp.is_finite() && t.amp > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tone at {} Hz has non-positive amplitude {}",
                    t.f, t.amp
                )));
            }
        }
        let spec = Self { tones };
        if spec.min_separation() == Some(0.0) {
            return Err(Error::InvalidInput(
                "tone frequencies are not distinct".into(),
            ));
        }
        Ok(spec)
    }

    /// Convenience constructor: equal amplitudes, zero phase.
    pub fn from_frequencies(freqs: &[f64], amp: f64) -> Result<Self> {
        Self::new(freqs.iter().map(|&f| Tone::new(f, amp, 0.0)).collect())
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.tones.iter().map(|t| t.f).collect()
    }

    /// Frequencies sorted ascending.
    pub fn sorted_frequencies(&self) -> Vec<f64> {
        let mut f = self.frequencies();
        f.sort_by(f64::total_cmp);
        f
    }

    /// Total signal power `sum_k |s_k|^2`.
    pub fn power(&self) -> f64 {
        self.tones.iter().map(|t| t.amp * t.amp).sum()
    }

    /// Smallest pairwise frequency gap, `None` for a single tone.
    pub fn min_separation(&self) -> Option<f64> {
        let f = self.sorted_frequencies();
        f.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }

    /// Checks every tone lies in `[0, fh)` and the tones are at least
    /// `min_separation` apart.
    pub fn check_band(&self, fh: f64, min_separation: f64) -> Result<()> {
        if let Some(t) = self.tones.iter().find(|t| !(0.0..fh).contains(&t.f)) {
            return Err(Error::InvalidInput(format!(
                "tone at {} Hz outside [0, {fh})",
                t.f
            )));
        }
        match self.min_separation() {
            Some(gap) if gap < min_separation => Err(Error::InvalidInput(format!(
                "tones {gap} Hz apart, minimum is {min_separation} Hz"
            ))),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<Tone>> for ToneSpec {
    type Error = Error;

    fn try_from(tones: Vec<Tone>) -> Result<Self> {
        Self::new(tones)
    }
}

impl From<ToneSpec> for Vec<Tone> {
    fn from(spec: ToneSpec) -> Self {
        spec.tones
    }
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rejects a ratio pair that is not coprime.
pub fn ensure_coprime(p: u32, q: u32) -> Result<()> {
    let g = gcd(p, q);
    if g != 1 {
        return Err(Error::NotCoprime { p, q, gcd: g });
    }
    Ok(())
}

/// Two undersampling ratios against a known band edge `fh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    #[serde(rename = "fH")]
    pub fh: f64,
    pub p: u32,
    pub q: u32,
    /// Length of the rate `fh / p` sequence.
    #[serde(default = "default_samples")]
    pub n_p: usize,
    /// Length of the rate `fh / q` sequence.
    #[serde(default = "default_samples")]
    pub n_q: usize,
}

pub const DEFAULT_SAMPLES: usize = 1000;

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl SamplingScheme {
    pub fn new(fh: f64, p: u32, q: u32, n_p: usize, n_q: usize) -> Result<Self> {
        let scheme = Self { fh, p, q, n_p, n_q };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fh.is_finite() && self.fh > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "band edge fH must be positive, got {}",
                self.fh
            )));
        }
        if self.p < 2 || self.q < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "undersampling ratios must exceed 1, got p={} q={}",
                self.p, self.q
            )));
        }
        if self.n_p == 0 || self.n_q == 0 {
            return Err(Error::InvalidConfiguration(
                "sample counts must be positive".into(),
            ));
        }
        ensure_coprime(self.p, self.q)
    }

    pub fn rate_p(&self) -> f64 {
        self.fh / self.p as f64
    }

    pub fn rate_q(&self) -> f64 {
        self.fh / self.q as f64
    }
}

/// A uniformly sampled complex sequence with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pub samples: Vec<Complex64>,
    /// Sampling rate, Hz.
    pub rate: f64,
    /// Undersampling ratio that produced this sequence, if known.
    pub ratio: Option<u32>,
    /// Index of `samples[0]`.
    pub start_index: i64,
    /// Ground-truth noise variance; `None` when unknown.
    pub noise_variance: Option<f64>,
    /// Ground-truth total signal power, when synthesized.
    pub signal_power: Option<f64>,
}

impl SampleSequence {
    /// Wraps measured samples with unknown noise level.
    pub fn from_samples(samples: Vec<Complex64>, rate: f64) -> Self {
        Self {
            samples,
            rate,
            ratio: None,
            start_index: 1,
            noise_variance: None,
            signal_power: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_ratio(mut self, ratio: u32) -> Self {
        self.ratio = Some(ratio);
        self
    }

    /// Writes `index,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,re,im")?;
        for (i, z) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", self.start_index + i as i64, z.re, z.im)?;
        }
        Ok(())
    }
}

/// Noiseless samples `x(n)` for `n = start_index .. start_index + n_samples`.
pub fn synthesize(
    tones: &ToneSpec,
    rate: f64,
    n_samples: usize,
    start_index: i64,
) -> Result<SampleSequence> {
    if tones.is_empty() {
        return Err(Error::InvalidInput("tone list is empty".into()));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sampling rate must be positive, got {rate}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "at least one sample is required".into(),
        ));
    }
    let amps: Vec<(f64, Complex64)> = tones
        .tones()
        .iter()
        .map(|t| (t.f / rate, t.amplitude()))
        .collect();
    let samples = (0..n_samples as i64)
        .map(|i| {
            let n = (start_index + i) as f64;
            amps.iter()
                .map(|&(norm_f, s)| {
                    // Reduce the cycle count first so large n keeps full precision.
                    let cycles = (norm_f * n).rem_euclid(1.0);
                    s * Complex64::from_polar(1.0, TAU * cycles)
                })
                .sum()
        })
        .collect();
    Ok(SampleSequence {
        samples,
        rate,
        ratio: None,
        start_index,
        noise_variance: Some(0.0),
        signal_power: Some(tones.power()),
    })
}

/// Noise variance giving `snr_db` against `signal_power`; zero for `+inf`.
pub fn noise_variance_for(signal_power: f64, snr_db: f64) -> Result<f64> {
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!(
            "SNR must be finite or +inf, got {snr_db}"
        )));
    }
    Ok(signal_power / 10f64.powf(snr_db / 10.0))
}

/// Adds circularly-symmetric complex white Gaussian noise at `snr_db`,
/// measured against the sequence's total signal power. `f64::INFINITY`
/// means noiseless.
pub fn add_noise(seq: &SampleSequence, snr_db: f64, seed: u64) -> Result<SampleSequence> {
    let power = match seq.signal_power {
        Some(p) => p,
        None => seq.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / seq.len().max(1) as f64,
    };
    let variance = noise_variance_for(power, snr_db)?;
    let mut out = seq.clone();
    out.noise_variance = Some(seq.noise_variance.unwrap_or(0.0) + variance);
    if variance == 0.0 {
        return Ok(out);
    }
    let sd = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in &mut out.samples {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += Complex64::new(sd * re, sd * im);
    }
    Ok(out)
}

/// Mixes a stream tag into a seed (SplitMix64 finalizer) so derived
/// generators are decorrelated.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples the same tones at `fh/p` and `fh/q` from a shared time origin,
/// with independent noise per channel.
pub fn dual_sample(
    tones: &ToneSpec,
    scheme: &SamplingScheme,
    snr_db: f64,
    seed: u64,
) -> Result<(SampleSequence, SampleSequence)> {
    scheme.validate()?;
    let first = synthesize(tones, scheme.rate_p(), scheme.n_p, 1)?.with_ratio(scheme.p);
    let second = synthesize(tones, scheme.rate_q(), scheme.n_q, 1)?.with_ratio(scheme.q);
    Ok((
        add_noise(&first, snr_db, derive_seed(seed, 1))?,
        add_noise(&second, snr_db, derive_seed(seed, 2))?,
    ))
}

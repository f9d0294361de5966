//! Fixtures shared by the benchmarks.

use subnyquist::{dual_sample, SampleSequence, SamplingScheme, ToneSpec};

/// `fh = 100`, `p = 5`, `q = 7`, `n` samples per channel.
pub fn scheme(n: usize) -> SamplingScheme {
    SamplingScheme::new(100.0, 5, 7, n, n).expect("valid scheme")
}

/// Tones at 10, 25 and 50 Hz.
pub fn three_tones() -> ToneSpec {
    ToneSpec::from_frequencies(&[10.0, 25.0, 50.0], 0.8).expect("valid tones")
}

/// Both channels of [`three_tones`] at 10 dB.
pub fn channels(n: usize) -> (SampleSequence, SampleSequence) {
    dual_sample(&three_tones(), &scheme(n), 10.0, 7).expect("valid sampling")
}

//! Frequency estimation of multi-tone complex signals from two sub-Nyquist
//! sample sequences taken at `fh / p` and `fh / q` with coprime `p`, `q`.
//!
//! The estimation chain:
//!
//! 1. [`esprit`]: generalized eigenvalues of the denoised covariance pencil of
//!    the first sequence give aliased base frequencies.
//! 2. [`alias`]: each base frequency unfolds into its eligible frequencies.
//! 3. [`screen`]: a MUSIC-like pseudo-spectrum built from the second
//!    sequence, evaluated only at the eligible frequencies, picks the real
//!    ones.
//!
//! [`harness`] wires the stages together and runs Monte-Carlo comparisons
//! against conventional full-rate ESPRIT.

pub mod alias;
pub mod error;
pub mod esprit;
pub mod harness;
pub mod linalg;
pub mod screen;
pub mod signal_model;
pub mod subspace;

pub use alias::{check_ambiguity, crt_match, expand_aliases, match_all, AliasSet, MatchResult};
pub use error::{Error, Result};
pub use esprit::{esprit_estimate, gamma_to_base_freq, solve_pencil, PencilSolution};
pub use harness::{
    demo_fig2, fig2_config, fig3_config, fig4_config, mse, run_pipeline, screening_trials,
    snr_sweep, ExperimentConfig, PipelineOptions, PipelineOutput, RandomTones, ScreeningTrial,
    SweepRow, TrialResult,
};
pub use screen::{
    noise_subspace, pseudo_spectrum, screen, select_frequencies, PseudoSpectrum, Selection,
};
pub use signal_model::{
    add_noise, dual_sample, synthesize, SampleSequence, SamplingScheme, Tone, ToneSpec,
};
pub use subspace::{build_pencil, estimate_covariances, estimate_noise_variance, PencilModel};

pub use num_complex::Complex64;

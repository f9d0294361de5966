//! Experiment runner: the two-channel pipeline, the error metric, and the
//! Monte-Carlo SNR sweep against a full-rate reference.

use std::f64::consts::TAU;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alias::{
    check_ambiguity, duplicate_residues, expand_aliases, match_all, AliasSet, Collision,
    MatchResult, DEFAULT_EPS_INT,
};
use crate::error::{Error, Result};
use crate::esprit::{esprit_estimate, PencilSolution};
use crate::screen::{default_screen_window, screen, PseudoSpectrum, Selection};
use crate::signal_model::{
    add_noise, derive_seed, dual_sample, synthesize, SampleSequence, SamplingScheme, Tone,
    ToneSpec, DEFAULT_MIN_SEPARATION, DEFAULT_SAMPLES,
};

/// Root-sum-square frequency error divided by the tone count,
/// `sqrt(sum_k (f_bar_k - f_k)^2) / K`.
///
/// Both lists are sorted and paired by rank. When the counts differ the
/// order-preserving pairing with the least squared error is used; every
/// unpaired true tone costs `penalty` Hz.
pub fn mse(estimates: &[f64], truth: &[f64], penalty: f64) -> MseOutcome {
    let mut est = estimates.to_vec();
    let mut tru = truth.to_vec();
    est.sort_by(f64::total_cmp);
    tru.sort_by(f64::total_cmp);
    let k = tru.len();
    if k == 0 {
        return MseOutcome {
            value: 0.0,
            missing: 0,
        };
    }
    if est.len() == k {
        let sum: f64 = est.iter().zip(&tru).map(|(a, b)| (a - b).powi(2)).sum();
        return MseOutcome {
            value: sum.sqrt() / k as f64,
            missing: 0,
        };
    }

    // cost[i][j]: best cost using the first i estimates and first j truths,
    // with (cost, unpaired truths).
    let n = est.len();
    let pen2 = penalty * penalty;
    let mut cost = vec![vec![(f64::INFINITY, 0usize); k + 1]; n + 1];
    cost[0][0] = (0.0, 0);
    for i in 0..=n {
        for j in 0..=k {
            let (c, miss) = cost[i][j];
            if !c.is_finite() {
                continue;
            }
            let mut relax = |ii: usize, jj: usize, cand: (f64, usize)| {
                if cand.0 < cost[ii][jj].0 {
                    cost[ii][jj] = cand;
                }
            };
            if i < n && j < k {
                relax(i + 1, j + 1, (c + (est[i] - tru[j]).powi(2), miss));
            }
            if i < n {
                relax(i + 1, j, (c, miss));
            }
            if j < k {
                relax(i, j + 1, (c + pen2, miss + 1));
            }
        }
    }
    let (sum, missing) = cost[n][k];
    MseOutcome {
        value: sum.sqrt() / k as f64,
        missing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseOutcome {
    pub value: f64,
    /// True tones without an estimate.
    pub missing: usize,
}

/// Options shared by every pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub k: usize,
    /// ESPRIT window on the first channel.
    pub window: Option<usize>,
    /// Screening window on the second channel.
    pub screen_window: Option<usize>,
    pub eps_int: f64,
    pub selection: Selection,
    /// Run ESPRIT on the `q` channel and screen on the `p` channel.
    pub swapped: bool,
}

impl PipelineOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            window: None,
            screen_window: None,
            eps_int: DEFAULT_EPS_INT,
            selection: Selection::default(),
            swapped: false,
        }
    }

    pub fn swapped(mut self) -> Self {
        self.swapped = !self.swapped;
        self
    }
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput {
    /// Ratio of the channel ESPRIT ran on.
    pub alias_ratio: u32,
    /// Ratio of the channel used for screening.
    pub screen_ratio: u32,
    pub esprit: PencilSolution,
    pub alias_sets: Vec<AliasSet>,
    pub spectrum: PseudoSpectrum,
    pub screen_window: usize,
    /// Index pairs of residues that coincide on the ESPRIT channel.
    pub duplicate_residues: Vec<(usize, usize)>,
    pub estimates: Vec<f64>,
}

/// ESPRIT on one channel, alias expansion, screening on the other.
pub fn estimate_from_sequences(
    first: &SampleSequence,
    second: &SampleSequence,
    scheme: &SamplingScheme,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    scheme.validate()?;
    let (esprit_seq, screen_seq, alias_ratio, screen_ratio) = if opts.swapped {
        (second, first, scheme.q, scheme.p)
    } else {
        (first, second, scheme.p, scheme.q)
    };
    let esprit = esprit_estimate(esprit_seq, opts.k, opts.window)?;
    let alias_sets = esprit
        .base_freqs
        .iter()
        .map(|&b| expand_aliases(b, alias_ratio, scheme.fh))
        .collect::<Result<Vec<_>>>()?;
    let screen_window = opts
        .screen_window
        .unwrap_or_else(|| default_screen_window(alias_ratio, opts.k));
    let spectrum = screen(
        screen_seq,
        &alias_sets,
        screen_ratio,
        opts.k,
        screen_window,
        opts.selection,
    )?;
    let resolution = 1e-6 * esprit.rate;
    Ok(PipelineOutput {
        alias_ratio,
        screen_ratio,
        duplicate_residues: duplicate_residues(&esprit.base_freqs, esprit.rate, resolution),
        estimates: spectrum.selected.clone(),
        esprit,
        alias_sets,
        spectrum,
        screen_window,
    })
}

/// Outcome of one seeded trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub truth: Vec<f64>,
    pub estimates: Vec<f64>,
    pub mse: f64,
    pub missing: usize,
    /// Stage error, if the pipeline failed.
    pub error: Option<String>,
    pub collisions: Vec<Collision>,
    /// Residue matching across both channels flagged a cross-match;
    /// `None` when either channel's ESPRIT failed.
    pub multiple_match: Option<bool>,
    pub duplicate_residues: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Equality ignores wall-clock time.
impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.truth == other.truth
            && self.estimates == other.estimates
            && self.mse.to_bits() == other.mse.to_bits()
            && self.missing == other.missing
            && self.error == other.error
            && self.collisions == other.collisions
            && self.multiple_match == other.multiple_match
            && self.duplicate_residues == other.duplicate_residues
    }
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Synthesizes both channels at `snr_db` and runs the pipeline.
pub fn run_pipeline(
    tones: &ToneSpec,
    scheme: &SamplingScheme,
    snr_db: f64,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(TrialResult, Option<PipelineOutput>)> {
    let started = Instant::now();
    let (first, second) = dual_sample(tones, scheme, snr_db, seed)?;
    let truth = tones.sorted_frequencies();
    let collisions = check_ambiguity(tones, scheme.fh, scheme.p, scheme.q, opts.eps_int)?;
    let multiple_match = cross_match_flag(&first, &second, scheme, opts);
    let penalty = scheme.fh / 2.0;
    let (estimates, error, output) = match estimate_from_sequences(&first, &second, scheme, opts) {
        Ok(out) => (out.estimates.clone(), None, Some(out)),
        Err(e) => (Vec::new(), Some(e.to_string()), None),
    };
    let outcome = mse(&estimates, &truth, penalty);
    Ok((
        TrialResult {
            truth,
            mse: outcome.value,
            missing: outcome.missing,
            estimates,
            error,
            collisions,
            multiple_match,
            duplicate_residues: output
                .as_ref()
                .is_some_and(|o| !o.duplicate_residues.is_empty()),
            elapsed: started.elapsed(),
        },
        output,
    ))
}

/// Residue matching across both channels, for diagnostics.
pub fn match_channels(
    first: &SampleSequence,
    second: &SampleSequence,
    scheme: &SamplingScheme,
    opts: &PipelineOptions,
) -> Result<(PencilSolution, PencilSolution, MatchResult)> {
    let a = esprit_estimate(first, opts.k, opts.window)?;
    let b = esprit_estimate(second, opts.k, opts.window)?;
    let m = match_all(
        &a.base_freqs,
        &b.base_freqs,
        scheme.p,
        scheme.q,
        scheme.fh,
        opts.eps_int,
    )?;
    Ok((a, b, m))
}

fn cross_match_flag(
    first: &SampleSequence,
    second: &SampleSequence,
    scheme: &SamplingScheme,
    opts: &PipelineOptions,
) -> Option<bool> {
    match_channels(first, second, scheme, opts)
        .ok()
        .map(|(_, _, m)| m.multiple_match)
}

/// Conventional ESPRIT on a sequence sampled at `fh` itself.
pub fn full_rate_estimate(
    tones: &ToneSpec,
    fh: f64,
    n_samples: usize,
    snr_db: f64,
    seed: u64,
    k: usize,
    window: Option<usize>,
) -> Result<Vec<f64>> {
    let clean = synthesize(tones, fh, n_samples, 1)?;
    let noisy = add_noise(&clean, snr_db, seed)?;
    Ok(esprit_estimate(&noisy, k, window)?.base_freqs)
}

/// Random tone sets for the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomTones {
    pub k: usize,
    #[serde(default = "default_amp_min")]
    pub amp_min: f64,
    #[serde(default = "default_amp_max")]
    pub amp_max: f64,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    /// Reject draws near the cross-match grid `fh / (pq)`.
    #[serde(default = "default_true")]
    pub reject_collisions: bool,
}

fn default_amp_min() -> f64 {
    0.1
}
fn default_amp_max() -> f64 {
    1.0
}
fn default_min_separation() -> f64 {
    DEFAULT_MIN_SEPARATION
}
fn default_true() -> bool {
    true
}

impl RandomTones {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            amp_min: default_amp_min(),
            amp_max: default_amp_max(),
            min_separation: default_min_separation(),
            reject_collisions: true,
        }
    }

    /// Draws until a valid set appears. Returns the set and the number of
    /// rejected draws.
    pub fn draw(
        &self,
        scheme: &SamplingScheme,
        eps_int: f64,
        seed: u64,
    ) -> Result<(ToneSpec, usize)> {
        if self.k == 0
            || !(self.amp_min.is_finite() && self.amp_min > 0.0)
            || self.amp_max < self.amp_min
        {
            return Err(Error::InvalidConfiguration(format!(
                "bad random tone spec {self:?}"
            )));
        }
        const MAX_DRAWS: usize = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for rejected in 0..MAX_DRAWS {
            let tones = (0..self.k)
                .map(|_| {
                    let f = rng.random_range(0.0..scheme.fh);
                    let amp = if self.amp_max > self.amp_min {
                        rng.random_range(self.amp_min..=self.amp_max)
                    } else {
                        self.amp_min
                    };
                    Tone::new(f, amp, rng.random_range(0.0..TAU))
                })
                .collect();
            let Ok(spec) = ToneSpec::new(tones) else {
                continue;
            };
            if spec.check_band(scheme.fh, self.min_separation).is_err() {
                continue;
            }
            if self.reject_collisions
                && !check_ambiguity(&spec, scheme.fh, scheme.p, scheme.q, eps_int)?.is_empty()
            {
                continue;
            }
            return Ok((spec, rejected));
        }
        Err(Error::InvalidConfiguration(
            "random tone constraints are unsatisfiable".into(),
        ))
    }
}

/// A tone as written in configuration files; a missing phase is drawn at
/// random from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneConfig {
    pub f: f64,
    pub amp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

/// Experiment description, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub scheme: SamplingScheme,
    #[serde(default)]
    pub tones: Vec<ToneConfig>,
    #[serde(default)]
    pub random_tones: Option<RandomTones>,
    /// Tone count; defaults to the number of listed or random tones.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Length of the full-rate reference sequence.
    #[serde(default = "default_full")]
    pub n_full: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub m_prime: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps_int: f64,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_snr() -> Vec<f64> {
    vec![f64::INFINITY]
}
fn default_trials() -> usize {
    1
}
fn default_full() -> usize {
    DEFAULT_SAMPLES
}
fn default_eps() -> f64 {
    DEFAULT_EPS_INT
}

impl ExperimentConfig {
    /// Fixed tones, noiseless, default sizes.
    pub fn new(scheme: SamplingScheme, tones: &[(f64, f64)]) -> Self {
        Self {
            scheme,
            tones: tones
                .iter()
                .map(|&(f, amp)| ToneConfig {
                    f,
                    amp,
                    phase: None,
                })
                .collect(),
            random_tones: None,
            k: None,
            snr_db: default_snr(),
            trials: default_trials(),
            n_full: default_full(),
            m: None,
            m_prime: None,
            eps_int: DEFAULT_EPS_INT,
            selection: Selection::default(),
            seed: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfiguration(
                "trials must be at least 1".into(),
            ));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfiguration("SNR list is empty".into()));
        }
        if let Some(s) = self
            .snr_db
            .iter()
            .find(|s| s.is_nan() || **s == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidConfiguration(format!("invalid SNR {s}")));
        }
        if self.tones.is_empty() && self.random_tones.is_none() {
            return Err(Error::InvalidConfiguration(
                "no tones and no random tone spec".into(),
            ));
        }
        if !(self.eps_int > 0.0 && self.eps_int < 0.5) {
            return Err(Error::InvalidConfiguration(format!(
                "integer tolerance {} outside (0, 0.5)",
                self.eps_int
            )));
        }
        if self.k() == 0 {
            return Err(Error::InvalidConfiguration(
                "tone count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        let listed = match self.random_tones {
            Some(r) if self.tones.is_empty() => r.k,
            _ => self.tones.len(),
        };
        self.k.unwrap_or(listed)
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            k: self.k(),
            window: self.m,
            screen_window: self.m_prime,
            eps_int: self.eps_int,
            selection: self.selection,
            swapped: false,
        }
    }

    /// Listed tones with missing phases drawn uniformly from `seed`, or a
    /// random tone set. Returns the rejected-draw count alongside.
    pub fn resolve_tones(&self, seed: u64) -> Result<(ToneSpec, usize)> {
        if self.tones.is_empty() {
            let random = self
                .random_tones
                .ok_or_else(|| Error::InvalidConfiguration("no tones configured".into()))?;
            return random.draw(&self.scheme, self.eps_int, seed);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x9a5e));
        let tones = self
            .tones
            .iter()
            .map(|t| {
                Tone::new(
                    t.f,
                    t.amp,
                    t.phase.unwrap_or_else(|| rng.random_range(0.0..TAU)),
                )
            })
            .collect();
        let spec = ToneSpec::new(tones)?;
        spec.check_band(self.scheme.fh, 0.0)?;
        Ok((spec, 0))
    }

    /// Seed for trial `trial` at SNR index `snr_index`.
    pub fn trial_seed(&self, snr_index: usize, trial: usize) -> u64 {
        derive_seed(
            derive_seed(self.seed, snr_index as u64 + 1),
            trial as u64 + 1,
        )
    }

    /// Tones, sampling-noise seed and rejected-draw count of one trial.
    pub fn trial_inputs(&self, snr_index: usize, trial: usize) -> Result<TrialInputs> {
        let seed = self.trial_seed(snr_index, trial);
        let (tones, rejected_draws) = self.resolve_tones(derive_seed(seed, 10))?;
        Ok(TrialInputs {
            tones,
            sample_seed: derive_seed(seed, 20),
            rejected_draws,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialInputs {
    pub tones: ToneSpec,
    pub sample_seed: u64,
    pub rejected_draws: usize,
    /// Root seed of the trial; further streams derive from it.
    pub seed: u64,
}

/// Aggregate over all trials at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    /// Mean metric over non-failed trials of the two-channel method.
    pub mse_proposed: f64,
    /// Mean metric over non-failed trials of full-rate ESPRIT.
    pub mse_esprit: f64,
    pub trials: usize,
    pub failed_proposed: usize,
    pub failed_esprit: usize,
    /// Completed trials that missed at least one tone (penalized in the mean).
    pub penalized_proposed: usize,
    pub penalized_esprit: usize,
    pub rejected_draws: usize,
}

/// Per-trial record of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTrial {
    pub snr_index: usize,
    pub trial: usize,
    pub proposed: TrialResult,
    pub esprit_mse: Option<f64>,
    pub esprit_missing: usize,
    pub rejected_draws: usize,
}

/// Both methods over every (SNR, trial) pair. Trials run in parallel; the
/// result is ordered by (SNR index, trial index).
pub fn sweep_trials(config: &ExperimentConfig) -> Result<Vec<SweepTrial>> {
    config.validate()?;
    let opts = config.options();
    let keys: Vec<(usize, usize)> = (0..config.snr_db.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    keys.par_iter()
        .map(|&(snr_index, trial)| {
            let TrialInputs {
                tones,
                sample_seed,
                rejected_draws,
                seed,
            } = config.trial_inputs(snr_index, trial)?;
            let snr = config.snr_db[snr_index];
            let (proposed, _) = run_pipeline(&tones, &config.scheme, snr, sample_seed, &opts)?;
            let reference = full_rate_estimate(
                &tones,
                config.scheme.fh,
                config.n_full,
                snr,
                derive_seed(seed, 30),
                opts.k,
                opts.window,
            );
            let (esprit_mse, esprit_missing) = match reference {
                Ok(est) => {
                    let o = mse(&est, &tones.sorted_frequencies(), config.scheme.fh / 2.0);
                    (Some(o.value), o.missing)
                }
                Err(_) => (None, 0),
            };
            Ok(SweepTrial {
                snr_index,
                trial,
                proposed,
                esprit_mse,
                esprit_missing,
                rejected_draws,
            })
        })
        .collect()
}

/// Mean metric per SNR for the two-channel method and full-rate ESPRIT.
pub fn snr_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let trials = sweep_trials(config)?;
    Ok(aggregate(config, &trials))
}

pub fn aggregate(config: &ExperimentConfig, trials: &[SweepTrial]) -> Vec<SweepRow> {
    config
        .snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr_db)| {
            let rows: Vec<&SweepTrial> = trials.iter().filter(|t| t.snr_index == s).collect();
            let proposed: Vec<f64> = rows
                .iter()
                .filter(|t| !t.proposed.failed())
                .map(|t| t.proposed.mse)
                .collect();
            let esprit: Vec<f64> = rows.iter().filter_map(|t| t.esprit_mse).collect();
            SweepRow {
                snr_db,
                mse_proposed: mean(&proposed),
                mse_esprit: mean(&esprit),
                trials: rows.len(),
                failed_proposed: rows.iter().filter(|t| t.proposed.failed()).count(),
                failed_esprit: rows.iter().filter(|t| t.esprit_mse.is_none()).count(),
                penalized_proposed: rows
                    .iter()
                    .filter(|t| !t.proposed.failed() && t.proposed.missing > 0)
                    .count(),
                penalized_esprit: rows
                    .iter()
                    .filter(|t| t.esprit_mse.is_some() && t.esprit_missing > 0)
                    .count(),
                rejected_draws: rows.iter().map(|t| t.rejected_draws).sum(),
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "snr_db,mse_proposed,mse_esprit,trials,failed_proposed,failed_esprit,\
         penalized_proposed,penalized_esprit,rejected_draws"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{},{},{},{},{},{}",
            r.snr_db,
            r.mse_proposed,
            r.mse_esprit,
            r.trials,
            r.failed_proposed,
            r.failed_esprit,
            r.penalized_proposed,
            r.penalized_esprit,
            r.rejected_draws
        )?;
    }
    Ok(())
}

/// Data behind the four panels of the noiseless two-tone demonstration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Data {
    pub truth: Vec<f64>,
    pub pipeline: PipelineOutput,
}

impl Fig2Data {
    pub fn estimates(&self) -> &[f64] {
        &self.pipeline.estimates
    }

    /// Four CSV blocks separated by blank lines, each with a `# panel` line
    /// and a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# a: true frequencies")?;
        writeln!(w, "k,f_hz")?;
        for (k, f) in self.truth.iter().enumerate() {
            writeln!(w, "{k},{f}")?;
        }
        writeln!(w)?;
        writeln!(w, "# b: base frequencies")?;
        writeln!(w, "k,f_hat_hz")?;
        for (k, f) in self.pipeline.esprit.base_freqs.iter().enumerate() {
            writeln!(w, "{k},{f}")?;
        }
        writeln!(w)?;
        writeln!(w, "# c: eligible frequencies")?;
        writeln!(w, "k,l,f_tilde_hz")?;
        for (k, set) in self.pipeline.alias_sets.iter().enumerate() {
            for e in &set.eligible {
                writeln!(w, "{k},{},{}", e.l, e.freq)?;
            }
        }
        writeln!(w)?;
        writeln!(w, "# d: pseudo-spectrum and final estimates")?;
        writeln!(w, "k,r,f_tilde_hz,power,selected")?;
        for e in &self.pipeline.spectrum.entries {
            let selected = self.pipeline.estimates.contains(&e.freq);
            writeln!(
                w,
                "{},{},{},{},{}",
                e.k,
                e.r,
                e.freq,
                e.power,
                u8::from(selected)
            )?;
        }
        Ok(())
    }
}

/// Default configuration of the two-tone demonstration: tones at 25 and
/// 50 Hz with amplitude 0.8, `fh = 100`, `p = 5`, `q = 7`, noiseless.
pub fn fig2_config() -> ExperimentConfig {
    let scheme = SamplingScheme::new(100.0, 5, 7, DEFAULT_SAMPLES, DEFAULT_SAMPLES)
        .expect("reference scheme is valid");
    ExperimentConfig::new(scheme, &[(25.0, 0.8), (50.0, 0.8)])
}

/// Runs the first configured SNR of `config` once and keeps the intermediates.
pub fn demo_fig2(config: &ExperimentConfig) -> Result<Fig2Data> {
    config.validate()?;
    let TrialInputs {
        tones, sample_seed, ..
    } = config.trial_inputs(0, 0)?;
    let (first, second) = dual_sample(&tones, &config.scheme, config.snr_db[0], sample_seed)?;
    let pipeline = estimate_from_sequences(&first, &second, &config.scheme, &config.options())?;
    Ok(Fig2Data {
        truth: tones.sorted_frequencies(),
        pipeline,
    })
}

/// Three-tone screening scenario: 10, 25 and 50 Hz at amplitude 0.8, 10 dB,
/// 200 trials. 10 and 50 Hz share a residue on the `p` channel, so their sum
/// can nearly cancel; the ESPRIT window is widened to 32 to resolve it.
pub fn fig3_config() -> ExperimentConfig {
    let mut config = fig2_config();
    config.tones = [10.0, 25.0, 50.0]
        .iter()
        .map(|&f| ToneConfig {
            f,
            amp: 0.8,
            phase: None,
        })
        .collect();
    config.snr_db = vec![10.0];
    config.trials = 200;
    config.m = Some(32);
    config
}

/// Random three-tone sweep, 0 to 30 dB in 5 dB steps, 500 trials each.
pub fn fig4_config() -> ExperimentConfig {
    let mut config = fig2_config();
    config.tones.clear();
    config.random_tones = Some(RandomTones::new(3));
    config.snr_db = (0..=6).map(|i| 5.0 * i as f64).collect();
    config.trials = 500;
    config
}

/// One trial run through both channel orders on the same samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningTrial {
    pub trial: usize,
    pub primary: TrialResult,
    pub swapped: TrialResult,
}

impl ScreeningTrial {
    /// Both orders selected the same frequencies, each within `tol`.
    pub fn agree(&self, tol: f64) -> bool {
        same_set(&self.primary.estimates, &self.swapped.estimates, tol)
    }
}

/// Every truth has an estimate within `tol` and the counts match. Both lists
/// must be ascending.
pub fn same_set(estimates: &[f64], truth: &[f64], tol: f64) -> bool {
    estimates.len() == truth.len()
        && estimates
            .iter()
            .zip(truth)
            .all(|(a, b)| (a - b).abs() <= tol)
}

/// Runs every trial at the first configured SNR in both channel orders.
pub fn screening_trials(config: &ExperimentConfig) -> Result<Vec<ScreeningTrial>> {
    config.validate()?;
    let opts = config.options();
    let swapped = opts.swapped();
    let snr = config.snr_db[0];
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let TrialInputs {
                tones, sample_seed, ..
            } = config.trial_inputs(0, trial)?;
            let (primary, _) = run_pipeline(&tones, &config.scheme, snr, sample_seed, &opts)?;
            let (swapped, _) = run_pipeline(&tones, &config.scheme, snr, sample_seed, &swapped)?;
            Ok(ScreeningTrial {
                trial,
                primary,
                swapped,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> SamplingScheme {
        SamplingScheme::new(100.0, 5, 7, 1000, 1000).unwrap()
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mse(&[25.0, 50.0], &[25.0, 50.0], 50.0).value, 0.0);
        assert!((mse(&[10.1], &[10.0], 50.0).value - 0.1).abs() < 1e-12);
        let v = mse(&[1.3, 2.4, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], 50.0).value;
        assert!((v - 0.125).abs() < 1e-12);
        // Pairing is by sorted rank.
        assert!((mse(&[50.0, 25.1], &[25.0, 50.0], 50.0).value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn metric_penalizes_missing_tones() {
        let o = mse(&[50.0], &[25.0, 50.0], 50.0);
        assert_eq!(o.missing, 1);
        assert!((o.value - 25.0).abs() < 1e-12);
        let o = mse(&[], &[10.0, 20.0, 30.0], 50.0);
        assert_eq!(o.missing, 3);
        assert!((o.value - (3.0f64 * 2500.0).sqrt() / 3.0).abs() < 1e-12);
        // Surplus estimates: the best order-preserving subset counts.
        let o = mse(&[10.0, 13.0, 20.0], &[10.0, 20.0], 50.0);
        assert_eq!((o.value, o.missing), (0.0, 0));
    }

    #[test]
    fn fig2_pipeline_is_exact() {
        let tones = ToneSpec::from_frequencies(&[25.0, 50.0], 0.8).unwrap();
        let (trial, out) = run_pipeline(
            &tones,
            &scheme(),
            f64::INFINITY,
            1,
            &PipelineOptions::new(2),
        )
        .unwrap();
        assert!(trial.error.is_none());
        assert!(trial.mse < 1e-6);
        let out = out.unwrap();
        assert!((out.esprit.base_freqs[0] - 5.0).abs() < 1e-6);
        assert!((out.esprit.base_freqs[1] - 10.0).abs() < 1e-6);
        assert_eq!(out.spectrum.entries.len(), 10);
        assert_eq!(trial.multiple_match, Some(false));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let tones = ToneSpec::from_frequencies(&[10.0, 25.0, 50.0], 0.8).unwrap();
        let opts = PipelineOptions::new(3);
        let a = run_pipeline(&tones, &scheme(), 10.0, 99, &opts).unwrap();
        let b = run_pipeline(&tones, &scheme(), 10.0, 99, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stage_errors_are_recorded() {
        // Overstated tone count on noiseless data cannot be resolved.
        let tones = ToneSpec::from_frequencies(&[25.0], 0.8).unwrap();
        let (trial, out) = run_pipeline(
            &tones,
            &scheme(),
            f64::INFINITY,
            1,
            &PipelineOptions::new(2),
        )
        .unwrap();
        assert!(out.is_none());
        assert!(trial.failed());
        assert!(trial.error.unwrap().contains("degenerate"));
        assert_eq!(trial.missing, 1);
    }

    #[test]
    fn random_tones_respect_constraints() {
        let gen = RandomTones::new(3);
        for seed in 0..50 {
            let (spec, _) = gen.draw(&scheme(), DEFAULT_EPS_INT, seed).unwrap();
            assert_eq!(spec.len(), 3);
            assert!(spec.check_band(100.0, 0.1).is_ok());
            assert!(check_ambiguity(&spec, 100.0, 5, 7, DEFAULT_EPS_INT)
                .unwrap()
                .is_empty());
            assert!(spec.tones().iter().all(|t| (0.1..=1.0).contains(&t.amp)));
        }
        assert_eq!(
            gen.draw(&scheme(), 0.2, 4).unwrap(),
            gen.draw(&scheme(), 0.2, 4).unwrap()
        );
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"fH":100.0,"p":5,"q":7,"tones":[{"f":25.0,"amp":0.8,"phase":0.0},{"f":50.0,"amp":0.8}]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.k(), 2);
        assert_eq!(cfg.scheme.n_p, DEFAULT_SAMPLES);
        assert!(cfg.validate().is_ok());
        let (spec, _) = cfg.resolve_tones(3).unwrap();
        assert_eq!(spec.tones()[0].phase, 0.0);
        assert!((0.0..TAU).contains(&spec.tones()[1].phase));

        let bad: ExperimentConfig =
            serde_json::from_str(r#"{"fH":100.0,"p":2,"q":4,"tones":[{"f":1.0,"amp":1.0}]}"#)
                .unwrap();
        assert!(matches!(bad.validate(), Err(Error::NotCoprime { .. })));
    }

    #[test]
    fn noiseless_sweep_is_exact() {
        let mut cfg = ExperimentConfig::new(scheme(), &[]);
        cfg.random_tones = Some(RandomTones::new(3));
        cfg.snr_db = vec![f64::INFINITY];
        cfg.trials = 1;
        cfg.seed = 5;
        let rows = snr_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].mse_proposed < 1e-6, "{rows:?}");
        assert!(rows[0].mse_esprit < 1e-6);
        assert_eq!(rows[0].failed_proposed + rows[0].failed_esprit, 0);
    }

    #[test]
    fn sweep_accounting_and_determinism() {
        let mut cfg = ExperimentConfig::new(scheme(), &[]);
        cfg.random_tones = Some(RandomTones::new(2));
        cfg.snr_db = vec![0.0, 20.0];
        cfg.trials = 8;
        cfg.seed = 42;
        let rows = snr_sweep(&cfg).unwrap();
        for r in &rows {
            assert_eq!(r.trials, 8);
            assert!(r.failed_proposed <= r.trials);
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_sweep_csv(&rows, &mut a).unwrap();
        write_sweep_csv(&snr_sweep(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
    }

    #[test]
    fn fig2_demo_blocks() {
        let data = demo_fig2(&fig2_config()).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.split("\n\n").count(), 4);
        assert!(text.starts_with("# a: true frequencies\nk,f_hz\n0,25\n1,50\n"));
        assert_eq!(data.pipeline.alias_sets.len(), 2);
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use subnyquist::harness::{fig2_config, fig3_config, fig4_config, RandomTones, ToneConfig};
use subnyquist::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "subnyquist",
    version,
    about = "Joint frequency estimation from two coprime sub-Nyquist sample sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write both sample sequences as CSV.
    Synth,
    /// Run the pipeline once and write every intermediate as JSON.
    Estimate,
    /// Base frequencies of both channels and their residue matches as JSON.
    Match,
    /// Pseudo-spectrum over the eligible frequencies as CSV.
    Spectrum,
    /// Mean error of both methods against SNR as CSV.
    Sweep,
    /// Tones, base, eligible and final frequencies of the two-tone demo as CSV.
    #[command(name = "demo-fig2")]
    DemoFig2,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Highest frequency of interest, Hz.
    #[arg(long, global = true)]
    pub fh: Option<f64>,
    /// Undersampling ratio of the first channel.
    #[arg(long, global = true)]
    pub p: Option<u32>,
    /// Undersampling ratio of the second channel.
    #[arg(long, global = true)]
    pub q: Option<u32>,
    /// Number of tones.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Tone list `f[:amp],...`; amplitude defaults to 1.
    #[arg(long, global = true, value_parser = parse_tones)]
    pub tones: Option<ToneList>,
    /// SNR in dB: a value, `inf`, a comma list or `start:stop:step`.
    #[arg(long, global = true, value_parser = parse_snr, allow_hyphen_values = true)]
    pub snr: Option<SnrList>,
    /// Monte-Carlo trials per SNR.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Samples per channel, also used for the full-rate reference.
    #[arg(long, global = true)]
    pub n_samples: Option<usize>,
    /// ESPRIT window length.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Screening window length.
    #[arg(long = "m-prime", global = true)]
    pub m_prime: Option<usize>,
    /// Root of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrList(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ToneList(pub Vec<ToneConfig>);

fn parse_value(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| format!("invalid number '{t}'")),
    }
}

pub fn parse_snr(s: &str) -> Result<SnrList, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (parse_value(start)?, parse_value(stop)?, parse_value(step)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                return Err("range bounds and step must be finite".into());
            }
            if step <= 0.0 || stop < start {
                return Err(format!("empty range {s}"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=count).map(|i| start + step * i as f64).collect()
        }
        [_] => s
            .split(',')
            .map(parse_value)
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected start:stop:step, got '{s}'")),
    };
    if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return Err(format!("invalid SNR list '{s}'"));
    }
    Ok(SnrList(values))
}

pub fn parse_tones(s: &str) -> Result<ToneList, String> {
    s.split(',')
        .map(|item| {
            let (f, amp) = match item.split_once(':') {
                Some((f, a)) => (f, parse_value(a)?),
                None => (item, 1.0),
            };
            Ok(ToneConfig {
                f: parse_value(f)?,
                amp,
                phase: None,
            })
        })
        .collect::<Result<Vec<_>, String>>()
        .map(ToneList)
}

/// Built-in configuration each subcommand starts from.
pub fn preset(command: Command) -> ExperimentConfig {
    match command {
        Command::Spectrum => fig3_config(),
        Command::Sweep => fig4_config(),
        _ => fig2_config(),
    }
}

impl Flags {
    /// Applies every given flag on top of `config`.
    pub fn apply(&self, config: &mut ExperimentConfig) {
        let scheme = &mut config.scheme;
        if let Some(fh) = self.fh {
            scheme.fh = fh;
        }
        if let Some(p) = self.p {
            scheme.p = p;
        }
        if let Some(q) = self.q {
            scheme.q = q;
        }
        if let Some(n) = self.n_samples {
            scheme.n_p = n;
            scheme.n_q = n;
            config.n_full = n;
        }
        if let Some(tones) = &self.tones {
            config.tones = tones.0.clone();
            config.random_tones = None;
        }
        if let Some(k) = self.k {
            config.k = Some(k);
            if config.tones.is_empty() {
                config.random_tones = Some(match config.random_tones {
                    Some(r) => RandomTones { k, ..r },
                    None => RandomTones::new(k),
                });
            }
        }
        if let Some(snr) = &self.snr {
            config.snr_db = snr.0.clone();
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if self.m.is_some() {
            config.m = self.m;
        }
        if self.m_prime.is_some() {
            config.m_prime = self.m_prime;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output = Some(out.display().to_string());
        }
    }
}

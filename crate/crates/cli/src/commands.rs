use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::json;
use subnyquist::alias::check_ambiguity;
use subnyquist::harness::{demo_fig2, match_channels, write_sweep_csv, TrialInputs};
use subnyquist::{dual_sample, run_pipeline, snr_sweep, ExperimentConfig};

use crate::args::{preset, Cli, Command};

/// Why a command stopped. The variant decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "invalid configuration: {m}"),
            Failure::Runtime(m) => write!(f, "estimation failed: {m}"),
        }
    }
}

fn runtime<E: fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn invalid<E: fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

/// Preset or `--config` file, then flag overrides, then validation.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut config = match &cli.flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => preset(cli.command),
    };
    cli.flags.apply(&mut config);
    config.validate().map_err(invalid)?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Sweep => {
            let rows = snr_sweep(&config).map_err(runtime)?;
            emit(&config, |w| write_sweep_csv(&rows, w))
        }
        Command::DemoFig2 => {
            let data = demo_fig2(&config).map_err(runtime)?;
            emit(&config, |w| data.write_csv(w))
        }
        command => {
            let inputs = config.trial_inputs(0, 0).map_err(invalid)?;
            single(command, &config, &inputs)
        }
    }
}

fn single(
    command: Command,
    config: &ExperimentConfig,
    inputs: &TrialInputs,
) -> Result<(), Failure> {
    let scheme = &config.scheme;
    let snr = config.snr_db[0];
    let opts = config.options();
    match command {
        Command::Synth => {
            let (first, second) =
                dual_sample(&inputs.tones, scheme, snr, inputs.sample_seed).map_err(runtime)?;
            emit(config, |w| {
                writeln!(w, "channel,ratio,index,re,im")?;
                for (name, seq) in [("p", &first), ("q", &second)] {
                    let ratio = seq.ratio.unwrap_or_default();
                    for (i, x) in seq.samples.iter().enumerate() {
                        let index = seq.start_index + i as i64;
                        writeln!(w, "{name},{ratio},{index},{},{}", x.re, x.im)?;
                    }
                }
                Ok(())
            })
        }
        Command::Estimate => {
            let (trial, output) =
                run_pipeline(&inputs.tones, scheme, snr, inputs.sample_seed, &opts)
                    .map_err(runtime)?;
            let doc = json!({
                "scheme": scheme,
                "snr_db": snr,
                "seed": config.seed,
                "trial": trial,
                "pipeline": output,
            });
            emit(config, |w| write_json(w, &doc))?;
            match trial.error {
                Some(e) => Err(Failure::Runtime(e)),
                None => Ok(()),
            }
        }
        Command::Match => {
            let (first, second) =
                dual_sample(&inputs.tones, scheme, snr, inputs.sample_seed).map_err(runtime)?;
            let collisions =
                check_ambiguity(&inputs.tones, scheme.fh, scheme.p, scheme.q, config.eps_int)
                    .map_err(invalid)?;
            let (a, b, matches) =
                match_channels(&first, &second, scheme, &opts).map_err(runtime)?;
            let doc = json!({
                "truth": inputs.tones.sorted_frequencies(),
                "first": { "ratio": scheme.p, "solution": a },
                "second": { "ratio": scheme.q, "solution": b },
                "matches": matches,
                "frequencies": matches.frequencies(),
                "collisions": collisions,
            });
            emit(config, |w| write_json(w, &doc))
        }
        Command::Spectrum => {
            let (trial, output) =
                run_pipeline(&inputs.tones, scheme, snr, inputs.sample_seed, &opts)
                    .map_err(runtime)?;
            let output = output.ok_or_else(|| Failure::Runtime(trial.error.unwrap_or_default()))?;
            emit(config, |w| output.spectrum.write_csv(w))
        }
        Command::Sweep | Command::DemoFig2 => unreachable!("handled by run"),
    }
}

fn write_json<W: Write>(mut w: W, doc: &serde_json::Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)
}

fn emit<F>(config: &ExperimentConfig, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let mut sink: Box<dyn Write> = match &config.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::Runtime(format!("{path}: {e}")))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    body(&mut *sink).and_then(|_| sink.flush()).map_err(runtime)
}

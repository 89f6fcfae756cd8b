use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wavebayes::bench::{derive_seed, Estimator, ExperimentPlan, ExperimentResult, TestFunction};
use wavebayes::ebayes::FitOptions;
use wavebayes::hyperspec::{GammaFamily, Method, SlabFamily, TauFamily};
use wavebayes::io::{read_signal_csv, read_wav, write_signal_csv, write_wav, AudioBuffer, BlockPlan};
use wavebayes::posterior::{denoise, DenoiseOptions};
use wavebayes::transform::{Wavelet, WaveletFilter};
use wavebayes::{io, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Bayesian wavelet denoising with nonlocal spike-and-slab priors.
#[derive(Debug, Parser)]
#[command(name = "wavebayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Denoise a CSV signal or a 16-bit PCM WAV file.
    Denoise(DenoiseArgs),
    /// Run the simulation study and write per-cell MSE summaries as CSV.
    Simulate(SimulateArgs),
    /// Render win counts from a simulation CSV.
    Compare(CompareArgs),
}

/// Parses through the library's `FromStr`, whose errors list the supported names.
fn named<T: FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct Budget {
    /// Optimizer starts per fit.
    #[arg(long, default_value_t = FitOptions::default().starts)]
    starts: usize,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = FitOptions::default().max_evals)]
    max_evals: usize,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Default: sym6 for CSV, coif5 for WAV.
    #[arg(long, value_parser = named::<Wavelet>)]
    wavelet: Option<Wavelet>,
    #[arg(long, value_parser = named::<SlabFamily>, default_value = "mixture")]
    slab: SlabFamily,
    #[arg(long, value_parser = named::<GammaFamily>, default_value = "logit")]
    gamma_spec: GammaFamily,
    #[arg(long, value_parser = named::<TauFamily>, default_value = "polynom")]
    tau_spec: TauFamily,
    /// Block length (power of two). Default: whole signal for CSV, 4096 for WAV.
    #[arg(long)]
    block: Option<usize>,
    /// Samples shared by neighbouring blocks; uses Hann overlap-add.
    #[arg(long, default_value_t = 0)]
    overlap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the fitted hyperparameters of every block as JSON.
    #[arg(long)]
    fit_json: Option<PathBuf>,
    #[command(flatten)]
    budget: Budget,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = named::<TestFunction>, value_delimiter = ',', default_value = "blocks,bumps,doppler,lcomb1,lcomb2,lcomb3")]
    functions: Vec<TestFunction>,
    #[arg(long = "n", value_delimiter = ',', default_value = "1024")]
    ns: Vec<usize>,
    #[arg(long = "snr", value_delimiter = ',', default_value = "5")]
    snrs: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Comma-separated method names, `hard-universal`, or `all`.
    #[arg(long, value_parser = parse_methods, default_value = "all")]
    methods: Methods,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = named::<Wavelet>, default_value = "sym6")]
    wavelet: Wavelet,
    #[arg(long)]
    out: PathBuf,
    /// Record seconds per replication (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    budget: Budget,
}

#[derive(Debug, Clone)]
struct Methods(Vec<Estimator>);

fn parse_methods(s: &str) -> Result<Methods, String> {
    Estimator::parse_list(s).map(Methods).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::from(Error::Domain(format!("cannot write {}: {e}", path.display()))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Wav,
}

fn format_of(path: &Path) -> Result<Format, Failure> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("csv") => Ok(Format::Csv),
        Some("wav") => Ok(Format::Wav),
        _ => Err(usage(format!(
            "cannot infer the format of {} (expected a .csv or .wav extension)",
            path.display()
        ))),
    }
}

struct Denoiser {
    method: Method,
    filter: WaveletFilter,
    fit: FitOptions,
    plan: Option<BlockPlan>,
    seed: u64,
    reports: Vec<serde_json::Value>,
    /// Block being processed, for error messages.
    location: String,
}

impl Denoiser {
    fn block(
        &mut self,
        channel: usize,
        index: usize,
        start: usize,
        valid: usize,
        block: &[f64],
    ) -> wavebayes::Result<Vec<f64>> {
        let opts = DenoiseOptions {
            fit: FitOptions {
                seed: derive_seed(self.seed, &[channel as u64, index as u64]),
                ..self.fit
            },
            valid_len: Some(valid),
            ..Default::default()
        };
        if self.plan.is_some() {
            self.location = format!("channel {channel}, block {index} (sample {start}): ");
        }
        let out = denoise(block, self.method, &self.filter, &opts)?;
        self.location.clear();
        self.reports.push(json!({
            "channel": channel,
            "block": index,
            "start": start,
            "len": valid,
            "fit": out.fit,
        }));
        Ok(out.estimate)
    }

    fn channel(&mut self, channel: usize, signal: &[f64]) -> wavebayes::Result<Vec<f64>> {
        match self.plan {
            None => {
                if !signal.len().is_power_of_two() {
                    return Err(Error::Sizing(format!(
                        "signal length {} is not a power of two; use --block N to process it in blocks",
                        signal.len()
                    )));
                }
                self.block(channel, 0, 0, signal.len(), signal)
            }
            Some(plan) => {
                let starts = plan.starts(signal.len());
                io::process_blocks(signal, &plan, |i, b| {
                    let valid = (signal.len() - starts[i]).min(b.len());
                    self.block(channel, i, starts[i], valid, b)
                })
            }
        }
    }
}

fn run_denoise(args: DenoiseArgs) -> Result<(), Failure> {
    let format = format_of(&args.input)?;
    if format_of(&args.output)? != format {
        return Err(usage("input and output must use the same format"));
    }
    if args.overlap > 0 && args.block.is_none() && format == Format::Csv {
        return Err(usage("--overlap needs --block"));
    }
    let block = match (format, args.block) {
        (_, Some(b)) => Some(b),
        (Format::Wav, None) => Some(BlockPlan::default().block_size),
        (Format::Csv, None) => None,
    };
    let plan = block.map(|b| BlockPlan::new(b, args.overlap)).transpose()?;
    let wavelet = args.wavelet.unwrap_or(match format {
        Format::Csv => Wavelet::Sym6,
        Format::Wav => Wavelet::Coif5,
    });
    let mut den = Denoiser {
        method: Method {
            slab: args.slab,
            gamma: args.gamma_spec,
            tau: args.tau_spec,
        },
        filter: wavelet.filter(),
        fit: FitOptions {
            starts: args.budget.starts,
            max_evals: args.budget.max_evals,
            ..FitOptions::default()
        },
        plan,
        seed: args.seed,
        reports: Vec::new(),
        location: String::new(),
    };
    let result = match format {
        Format::Csv => {
            let signal = read_signal_csv(&args.input)?;
            den.channel(0, &signal)
                .and_then(|out| write_signal_csv(&args.output, &out))
        }
        Format::Wav => {
            let audio = read_wav(&args.input)?;
            let channels = audio
                .channels
                .iter()
                .enumerate()
                .map(|(c, x)| den.channel(c, x))
                .collect::<wavebayes::Result<Vec<_>>>();
            channels.and_then(|channels| {
                write_wav(
                    &args.output,
                    &AudioBuffer {
                        channels,
                        sample_rate: audio.sample_rate,
                        bit_depth: 16,
                    },
                )
            })
        }
    };
    result.map_err(|e| {
        let mut f = Failure::from(e);
        f.message.insert_str(0, &den.location);
        f
    })?;
    if let Some(path) = &args.fit_json {
        let report = json!({
            "method": den.method.to_string(),
            "wavelet": wavelet.name(),
            "block": block,
            "overlap": args.overlap,
            "blocks": den.reports,
        });
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_text(path, &(text + "\n"))?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let plan = ExperimentPlan {
        functions: args.functions,
        ns: args.ns,
        snrs: args.snrs,
        reps: args.reps,
        methods: args.methods.0,
        seed: args.seed,
        wavelet: args.wavelet,
        fit: FitOptions {
            starts: args.budget.starts,
            max_evals: args.budget.max_evals,
            ..FitOptions::default()
        },
        timing: args.timing,
    };
    plan.validate().map_err(|e| usage(e.to_string()))?;
    let result = wavebayes::bench::run_experiment_with(&plan, |row| {
        eprintln!(
            "{} n={} snr={} {}: mse {:.6} ({} failed)",
            row.function, row.n, row.snr, row.method, row.mean_mse, row.failures
        );
    })?;
    write_text(&args.out, &result.to_csv())
}

fn run_compare(args: CompareArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Failure::from(Error::Domain(format!("cannot read {}: {e}", args.input.display()))))?;
    let result = ExperimentResult::from_csv(&text)?;
    write_text(&args.out, &result.win_counts().render())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let outcome = match cli.command {
        Command::Denoise(a) => run_denoise(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Compare(a) => run_compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use adsg::harness::{exit_code, run_batch, run_experiment, Algorithm, DataSource, ExperimentConfig};
use adsg::reductions::Reduce;
use adsg::{Error, LossKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", version, about = "Run ADSG and baseline solvers and write CSV traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Box<RunArgs>),
    /// Run every line of FILE as a `run` argument list, on a pool capped by BENCH_THREADS.
    Batch { file: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// LIBSVM file, optionally gzip-compressed.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    data: Option<PathBuf>,
    /// Synthetic instance `n,d,kappa`.
    #[arg(long)]
    synth: Option<String>,
    /// logistic, squared, lad or hinge.
    #[arg(long)]
    loss: String,
    #[arg(long)]
    smooth: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// adsg, svrg, mrbcd or katyusha.
    #[arg(long)]
    algo: String,
    /// ADSG form: ref, efficient or stable.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long = "step-mult", default_value_t = 1.0)]
    step_mult: f64,
    /// none, reg, smooth or joint.
    #[arg(long, default_value = "none")]
    reduce: String,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Initial added strong convexity for --reduce reg/joint.
    #[arg(long)]
    mu0: Option<f64>,
    /// Initial smoothing for --reduce smooth/joint.
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn try_parse_from_line(line: &str) -> Result<Self, String> {
        use clap::FromArgMatches;
        let cmd = <RunArgs as Args>::augment_args(clap::Command::new("run").no_binary_name(true));
        let matches = cmd
            .try_get_matches_from(line.split_whitespace())
            .map_err(|e| e.to_string())?;
        RunArgs::from_arg_matches(&matches).map_err(|e| e.to_string())
    }

    fn into_config(self) -> adsg::Result<ExperimentConfig> {
        let source = match (self.data, self.synth) {
            (Some(path), None) => DataSource::File(path),
            (None, Some(s)) => s.parse()?,
            _ => return Err(Error::Config("give exactly one of --data and --synth".into())),
        };
        let loss: LossKind = self.loss.parse()?;
        let algo = Algorithm::parse(&self.algo, self.variant.as_deref())?;
        let reduce: Reduce = self.reduce.parse()?;
        let mut config = ExperimentConfig::new(source, loss, algo, self.seed);
        config.smooth = self.smooth;
        config.l1 = self.l1;
        config.l2 = self.l2;
        config.mu = self.mu;
        config.blocks = self.blocks;
        config.batch = self.batch;
        config.epochs = self.epochs;
        config.step_mult = self.step_mult;
        config.reduce = reduce;
        config.epsilon = self.epsilon;
        config.mu0 = self.mu0;
        config.lambda0 = self.lambda0;
        config.out = Some(self.out);
        config.validate()?;
        Ok(config)
    }
}

fn report(label: &str, result: &adsg::Result<Vec<adsg::TraceRecord>>) -> i32 {
    match result {
        Ok(trace) => {
            if let Some(last) = trace.last() {
                log::info!("{label}: {} epochs, objective {:e}", last.epoch, last.objective);
            }
        }
        Err(e) => eprintln!("bench: {label}: {e}"),
    }
    exit_code(result)
}

fn batch(file: &PathBuf) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("bench: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    let mut configs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = RunArgs::try_parse_from_line(line).and_then(|a| a.into_config().map_err(|e| e.to_string()));
        match parsed {
            Ok(c) => configs.push(c),
            Err(e) => {
                eprintln!("bench: {}:{}: {e}", file.display(), i + 1);
                return 2;
            }
        }
    }
    let results = match run_batch(&configs) {
        Ok(r) => r,
        Err(e) => return report("batch", &Err(e)),
    };
    results
        .iter()
        .zip(&configs)
        .map(|(r, c)| report(&c.algo.to_string(), r))
        .max()
        .unwrap_or(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => match args.into_config() {
            Ok(config) => report(&config.algo.to_string(), &run_experiment(&config)),
            Err(e) => {
                eprintln!("bench: {e}");
                exit_code::<()>(&Err(e))
            }
        },
        Command::Batch { file } => batch(&file),
    };
    ExitCode::from(code as u8)
}

//! Command-line front end for the RKHS convolution library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rkhs_conv::demo::{run_demo, Demo};
use rkhs_conv::experiment::{
    self, evaluate_all, fit_flights, read_flights, read_pairs, synth_flights, write_evals, write_flights,
    write_pairs, ExperimentConfig,
};
use rkhs_conv::training::write_loss_csv;
use rkhs_conv::{AlgNet, Error, RkhsSignal};

#[derive(Parser, Debug)]
#[command(name = "rkhs-conv", version, about = "Convolutional signal processing and AlgNNs over RKHS")]
struct Cli {
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Experiment configuration (JSON). Missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Where outputs are written.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Writes synthetic flight samples as CSV.
    SynthData,
    /// Fits every flight side by kernel ridge regression.
    Fit {
        /// Directory holding `flight_NN_{input,target}.csv`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Convolves two signals, `filter ∗ signal`.
    Convolve {
        #[arg(long)]
        filter: PathBuf,
        #[arg(long)]
        signal: PathBuf,
    },
    /// Runs a network on one signal.
    Forward {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        signal: PathBuf,
    },
    /// Trains a network on the training flights.
    Train {
        /// Directory holding fitted `flight_NN_{input,target}.json`.
        #[arg(long)]
        signals: PathBuf,
    },
    /// Scores a network on the test flights.
    Eval {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        signals: PathBuf,
    },
    /// Runs a self-checking demo, or `all` of them.
    Demo { name: String },
}

fn config(cli: &Cli) -> rkhs_conv::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> rkhs_conv::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
    })
}

fn run(cli: &Cli) -> rkhs_conv::Result<()> {
    let cfg = config(cli)?;
    let out = &cli.out_dir;
    create_dir(out)?;
    match &cli.command {
        Command::SynthData => {
            write_flights(out, &synth_flights(&cfg)?)?;
            cfg.save(out.join("config.json"))?;
            println!("wrote {} flights to {}", cfg.n_flights(), out.display());
        }
        Command::Fit { data } => {
            let flights = read_flights(data, cfg.n_flights())?;
            write_pairs(out, &fit_flights(&cfg, &flights)?)?;
            println!("wrote {} fitted flights to {}", flights.len(), out.display());
        }
        Command::Convolve { filter, signal } => {
            let h = RkhsSignal::load(filter)?.convolve(&RkhsSignal::load(signal)?)?;
            let path = out.join("convolved.json");
            h.save(&path)?;
            println!("{} terms -> {}", h.len(), path.display());
        }
        Command::Forward { net, signal } => {
            let y = AlgNet::load(net)?.forward(&RkhsSignal::load(signal)?)?;
            let path = out.join("forward.json");
            y.save(&path)?;
            println!("{} terms -> {}", y.len(), path.display());
        }
        Command::Train { signals } => {
            let pairs = read_pairs(signals, 0..cfg.n_flights_train)?;
            let net0 = experiment::init_net(&cfg)?;
            let (net, trace) = experiment::train(&cfg, &net0, &pairs)?;
            net0.save(out.join("net_init.json"))?;
            net.save(out.join("net.json"))?;
            write_loss_csv(&trace, out.join("loss.csv"))?;
            if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
                println!("loss {first:.6e} -> {last:.6e} over {} iterations", trace.len());
            }
        }
        Command::Eval { net, signals } => {
            let net = AlgNet::load(net)?;
            let first = cfg.n_flights_train;
            let pairs = read_pairs(signals, first..cfg.n_flights())?;
            let evals = evaluate_all(&cfg, &net, &pairs)?;
            write_evals(out, first, &evals)?;
            let n = evals.len() as f64;
            let mse = evals.iter().map(|e| e.relative_mse).sum::<f64>() / n;
            let base = evals.iter().map(|e| e.baseline).sum::<f64>() / n;
            println!("mean relative MSE {mse:.4} (identity baseline {base:.4})");
        }
        Command::Demo { name } => {
            let demos: Vec<Demo> = if name == "all" {
                Demo::ALL.to_vec()
            } else {
                vec![name.parse()?]
            };
            for d in demos {
                let s = run_demo(d, out, cfg.seed)?;
                let verdict = if s.pass { "pass" } else { "FAIL" };
                println!("{d}: {} = {:.3e} (threshold {:.0e}) {verdict}", s.metric, s.value, s.threshold);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation errors; 2 is reserved for IO.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

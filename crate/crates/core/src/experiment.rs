//! Synthetic coverage-prediction experiment.
//!
//! Each flight samples a scalar field at `samples_per_side` random points on the
//! left half of the square `[−L, L]²` (the input) and on the right half (the
//! target). Both sides are fitted by kernel ridge regression, a two-layer
//! network is trained on the training flights, and test flights are scored by
//! relative squared error on a raster.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algnn::AlgNet;
use crate::domain::{Center, DomainOp};
use crate::error::{Error, Result};
use crate::fitting::{fit_ridge, load_samples_csv, SampleSet};
use crate::kernels::Kernel;
use crate::signal::{Axis, Grid, GridField, RkhsSignal};
use crate::training::{adam_train, steepest_descent_train, total_loss, Pair, TrainConfig, TrainMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    /// The target side reads the field shifted by `(shift, 0)`.
    TranslationTarget,
    /// Both sides read the same field.
    RandomSmooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// Left and right waypoints drawn independently.
    Independent,
    /// Right waypoints are the left ones moved by `(shift, 0)`.
    Mirrored,
}

/// Everything the pipeline needs. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field_halfwidth: f64,
    pub samples_per_side: usize,
    pub n_flights_train: usize,
    pub n_flights_test: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub n1: usize,
    pub n2: usize,
    pub terms_per_filter: usize,
    pub init_jitter: f64,
    pub shift: f64,
    pub bumps: usize,
    pub mode: SynthMode,
    pub trajectory: Trajectory,
    pub eval_points: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            field_halfwidth: 40.0,
            samples_per_side: 9,
            n_flights_train: 12,
            n_flights_test: 4,
            sigma: 10.0,
            lambda: 1e-3,
            n1: 2,
            n2: 2,
            terms_per_filter: 3,
            init_jitter: 0.1,
            shift: 40.0,
            bumps: 10,
            mode: SynthMode::TranslationTarget,
            trajectory: Trajectory::Independent,
            eval_points: 81,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("samples_per_side", self.samples_per_side),
            ("n_flights_train", self.n_flights_train),
            ("n_flights_test", self.n_flights_test),
            ("n1", self.n1),
            ("n2", self.n2),
            ("terms_per_filter", self.terms_per_filter),
            ("bumps", self.bumps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.eval_points < 2 {
            return Err(Error::Invalid("eval_points must be at least 2".into()));
        }
        if !(self.field_halfwidth > 0.0 && self.sigma > 0.0 && self.lambda >= 0.0) {
            return Err(Error::Invalid("field_halfwidth, sigma must be > 0 and lambda ≥ 0".into()));
        }
        self.train.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn n_flights(&self) -> usize {
        self.n_flights_train + self.n_flights_test
    }

    pub fn kernel(&self) -> Result<Arc<Kernel>> {
        Ok(Arc::new(Kernel::gaussian2d(self.sigma)?))
    }

    /// Square raster over `[−L, L]²` used for evaluation.
    pub fn eval_grid(&self) -> Result<Grid> {
        let a = Axis::span(-self.field_halfwidth, self.field_halfwidth, self.eval_points)?;
        Ok(Grid::Plane { x: a, y: a })
    }
}

/// A sum of isotropic Gaussian bumps with positive amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpField {
    pub bumps: Vec<([f64; 2], f64, f64)>,
}

impl BumpField {
    pub fn random<R: Rng>(rng: &mut R, n: usize, halfwidth: f64) -> Self {
        let bumps = (0..n)
            .map(|_| {
                let c = [rng.gen_range(-halfwidth..halfwidth), rng.gen_range(-halfwidth..halfwidth)];
                let amp = rng.gen_range(0.5..1.5);
                let width = rng.gen_range(0.2..0.4) * halfwidth;
                (c, amp, width)
            })
            .collect();
        BumpField { bumps }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.bumps
            .iter()
            .map(|(c, a, w)| {
                let d2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
                a * (-d2 / (2.0 * w * w)).exp()
            })
            .sum()
    }
}

/// Input and target samples of one flight.
#[derive(Clone, Debug, PartialEq)]
pub struct Flight {
    pub input: SampleSet,
    pub target: SampleSet,
}

/// Deterministic flights for `cfg.seed`.
pub fn synth_flights(cfg: &ExperimentConfig) -> Result<Vec<Flight>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.field_halfwidth;
    (0..cfg.n_flights())
        .map(|_| {
            let field = BumpField::random(&mut rng, cfg.bumps, l);
            let left: Vec<[f64; 2]> = (0..cfg.samples_per_side)
                .map(|_| [rng.gen_range(-l..0.0), rng.gen_range(-l..l)])
                .collect();
            let right: Vec<[f64; 2]> = match cfg.trajectory {
                Trajectory::Independent => (0..cfg.samples_per_side)
                    .map(|_| [rng.gen_range(0.0..l), rng.gen_range(-l..l)])
                    .collect(),
                Trajectory::Mirrored => left.iter().map(|p| [p[0] + cfg.shift, p[1]]).collect(),
            };
            let target_value = |p: &[f64; 2]| match cfg.mode {
                SynthMode::TranslationTarget => field.eval(p[0] - cfg.shift, p[1]),
                SynthMode::RandomSmooth => field.eval(p[0], p[1]),
            };
            let input = SampleSet::new(
                left.iter().map(|p| Center::Planar(*p)).collect(),
                left.iter().map(|p| field.eval(p[0], p[1])).collect(),
            )?;
            let target = SampleSet::new(
                right.iter().map(|p| Center::Planar(*p)).collect(),
                right.iter().map(target_value).collect(),
            )?;
            Ok(Flight { input, target })
        })
        .collect()
}

pub fn flight_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("flight_{index:02}_input.csv")),
        dir.join(format!("flight_{index:02}_target.csv")),
    )
}

/// Writes `flight_NN_input.csv` and `flight_NN_target.csv` for every flight.
pub fn write_flights(dir: &Path, flights: &[Flight]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in flights.iter().enumerate() {
        let (a, b) = flight_paths(dir, i);
        f.input.save_csv(a)?;
        f.target.save_csv(b)?;
    }
    Ok(())
}

pub fn read_flights(dir: &Path, n: usize) -> Result<Vec<Flight>> {
    (0..n)
        .map(|i| {
            let (a, b) = flight_paths(dir, i);
            Ok(Flight {
                input: load_samples_csv(a)?,
                target: load_samples_csv(b)?,
            })
        })
        .collect()
}

/// Maps `f` over `items` on scoped threads, preserving order.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    if workers < 2 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Ridge fits of both sides of every flight.
pub fn fit_flights(cfg: &ExperimentConfig, flights: &[Flight]) -> Result<Vec<Pair>> {
    let k = cfg.kernel()?;
    par_map(flights, |f| {
        Pair::new(
            fit_ridge(&f.input, k.clone(), DomainOp::Translation2d, cfg.lambda)?,
            fit_ridge(&f.target, k.clone(), DomainOp::Translation2d, cfg.lambda)?,
        )
    })
    .into_iter()
    .collect()
}

pub fn signal_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("flight_{index:02}_input.json")),
        dir.join(format!("flight_{index:02}_target.json")),
    )
}

/// Writes the fitted signals as `flight_NN_input.json` / `flight_NN_target.json`.
pub fn write_pairs(dir: &Path, pairs: &[Pair]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, p) in pairs.iter().enumerate() {
        let (a, b) = signal_paths(dir, i);
        p.input.save(a)?;
        p.target.save(b)?;
    }
    Ok(())
}

pub fn read_pairs(dir: &Path, indices: std::ops::Range<usize>) -> Result<Vec<Pair>> {
    indices
        .map(|i| {
            let (a, b) = signal_paths(dir, i);
            Pair::new(RkhsSignal::load(a)?, RkhsSignal::load(b)?)
        })
        .collect()
}

/// The initial network: every filter has `terms_per_filter` unit-weight
/// sections near the origin.
pub fn init_net(cfg: &ExperimentConfig) -> Result<AlgNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e65_7400);
    AlgNet::init(
        cfg.kernel()?,
        DomainOp::Translation2d,
        cfg.n1,
        cfg.n2,
        cfg.terms_per_filter,
        cfg.init_jitter,
        &mut rng,
    )
}

pub fn train(cfg: &ExperimentConfig, net: &AlgNet, data: &[Pair]) -> Result<(AlgNet, Vec<f64>)> {
    match cfg.train.mode {
        TrainMode::Adam => adam_train(net, data, &cfg.train),
        TrainMode::SteepestDescent => steepest_descent_train(net, data, &cfg.train),
    }
}

/// `‖a − b‖²_F / ‖b‖²_F` over a raster.
pub fn relative_mse(out: &GridField, target: &GridField) -> Result<f64> {
    let num: f64 = out
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if out.grid != target.grid {
        return Err(Error::Mismatch("rasters on different grids".into()));
    }
    let den = target.frobenius_sq();
    if den == 0.0 {
        return Err(Error::Invalid("target raster is identically zero".into()));
    }
    Ok(num / den)
}

/// Rasters and scores of one flight.
#[derive(Clone, Debug)]
pub struct FlightEval {
    pub input: GridField,
    pub output: GridField,
    pub target: GridField,
    pub relative_mse: f64,
    /// Relative error of predicting the target by the input field itself.
    pub baseline: f64,
}

pub fn evaluate_pair(net: &AlgNet, pair: &Pair, grid: &Grid) -> Result<FlightEval> {
    let out: RkhsSignal = net.forward(&pair.input)?;
    let input = pair.input.evaluate_grid(grid)?;
    let output = out.evaluate_grid(grid)?;
    let target = pair.target.evaluate_grid(grid)?;
    Ok(FlightEval {
        relative_mse: relative_mse(&output, &target)?,
        baseline: relative_mse(&input, &target)?,
        input,
        output,
        target,
    })
}

pub fn evaluate_all(cfg: &ExperimentConfig, net: &AlgNet, pairs: &[Pair]) -> Result<Vec<FlightEval>> {
    let grid = cfg.eval_grid()?;
    par_map(pairs, |p| evaluate_pair(net, p, &grid)).into_iter().collect()
}

/// Writes `flight_NN_{input,output,target}.csv` rasters for each evaluation
/// and `eval.csv` with columns `flight,relative_mse,baseline`. `first` is the
/// flight index of `evals[0]`.
pub fn write_evals(dir: &Path, first: usize, evals: &[FlightEval]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut table = String::from("flight,relative_mse,baseline\n");
    for (k, e) in evals.iter().enumerate() {
        let i = first + k;
        e.input.save_csv(dir.join(format!("flight_{i:02}_input.csv")))?;
        e.output.save_csv(dir.join(format!("flight_{i:02}_output.csv")))?;
        e.target.save_csv(dir.join(format!("flight_{i:02}_target.csv")))?;
        table.push_str(&format!("{i},{},{}\n", e.relative_mse, e.baseline));
    }
    let path = dir.join("eval.csv");
    fs::write(&path, table).map_err(|e| Error::io(&path, e))
}

/// Summary of a full run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_reduction: f64,
    pub test_relative_mse: Vec<f64>,
    pub test_baseline: Vec<f64>,
    pub mean_test_relative_mse: f64,
    pub mean_test_baseline: f64,
}

/// The whole pipeline in memory: synthesize, fit, train, evaluate.
pub fn run(cfg: &ExperimentConfig) -> Result<(AlgNet, Vec<f64>, ExperimentReport)> {
    let flights = synth_flights(cfg)?;
    let pairs = fit_flights(cfg, &flights)?;
    let (train_set, test_set) = pairs.split_at(cfg.n_flights_train);
    let net0 = init_net(cfg)?;
    let (net, trace) = train(cfg, &net0, train_set)?;
    let report = report(cfg, &net0, &net, train_set, test_set)?;
    Ok((net, trace, report))
}

impl ExperimentReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

pub fn report(
    cfg: &ExperimentConfig,
    before: &AlgNet,
    after: &AlgNet,
    train_set: &[Pair],
    test_set: &[Pair],
) -> Result<ExperimentReport> {
    let initial_loss = 2.0 * total_loss(before, train_set)?;
    let final_loss = 2.0 * total_loss(after, train_set)?;
    let evals = evaluate_all(cfg, after, test_set)?;
    let test_relative_mse: Vec<f64> = evals.iter().map(|e| e.relative_mse).collect();
    let test_baseline: Vec<f64> = evals.iter().map(|e| e.baseline).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(ExperimentReport {
        initial_loss,
        final_loss,
        loss_reduction: 1.0 - final_loss / initial_loss,
        mean_test_relative_mse: mean(&test_relative_mse),
        mean_test_baseline: mean(&test_baseline),
        test_relative_mse,
        test_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_flights_train: 2,
            n_flights_test: 1,
            eval_points: 21,
            train: TrainConfig {
                iterations: 3,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = small();
        assert_eq!(synth_flights(&cfg).unwrap(), synth_flights(&cfg).unwrap());
    }

    #[test]
    fn translation_target_reads_shifted_field() {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let field = BumpField::random(&mut rng, cfg.bumps, cfg.field_halfwidth);
        let flights = synth_flights(&cfg).unwrap();
        for (p, v) in flights[0].target.points().iter().zip(flights[0].target.values()) {
            let Center::Planar([x, y]) = p else { panic!() };
            assert!((v - field.eval(x - 40.0, *y)).abs() <= 1e-10);
            assert!(*x >= 0.0);
        }
    }

    #[test]
    fn flights_round_trip_through_csv() {
        let cfg = small();
        let dir = tempfile::tempdir().unwrap();
        let flights = synth_flights(&cfg).unwrap();
        write_flights(dir.path(), &flights).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2 * cfg.n_flights());
        let back = read_flights(dir.path(), cfg.n_flights()).unwrap();
        assert_eq!(back, flights);
    }

    #[test]
    fn net_against_itself_scores_zero() {
        let cfg = small();
        let pairs = fit_flights(&cfg, &synth_flights(&cfg).unwrap()).unwrap();
        let net = init_net(&cfg).unwrap();
        let own = Pair::new(pairs[0].input.clone(), net.forward(&pairs[0].input).unwrap()).unwrap();
        let e = evaluate_pair(&net, &own, &cfg.eval_grid().unwrap()).unwrap();
        assert_eq!(e.relative_mse, 0.0);
    }

    #[test]
    fn short_run_produces_trace() {
        let (_, trace, report) = run(&small()).unwrap();
        assert_eq!(trace.len(), 3);
        assert!(report.final_loss.is_finite());
    }
}

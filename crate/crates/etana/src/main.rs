//! Command-line front end: train models, classify instances, evaluate on
//! splits or folds, and sweep the fee or bin-count knobs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use etana::dataset::{load_dense, load_sparse, Dataset, LabelSpec};
use etana::eval::{
    bin_sweep, cost_sweep, fit_model, report_text, run_eval, sweep_csv, CostSpec, EvalConfig,
    PolicyKind, SplitPlan,
};
use etana::fetana::SpsaSchedule;
use etana::model::{load_model, save_model};
use etana::runtime::{classify_batch, TraceStep};
use etana::Error;

#[derive(Parser)]
#[command(
    name = "etana",
    version,
    about = "Cost-aware sequential classifier: evaluates features one at a time, \
             updating class beliefs, and stops as soon as deciding beats paying for more"
)]
struct Cli {
    /// Cap worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    /// Delimited numeric matrix, one instance per row
    Dense,
    /// "label idx:val idx:val ..." with ascending 1-based indices
    Sparse,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    /// Exact stopping rule from backward induction on a belief grid
    Etana,
    /// Linear stopping thresholds fitted by stochastic approximation
    Fetana,
}

impl PolicyArg {
    fn kind(self) -> PolicyKind {
        match self {
            PolicyArg::Etana => PolicyKind::Etana,
            PolicyArg::Fetana => PolicyKind::Fetana,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Training data file
    #[arg(long)]
    dataset: PathBuf,
    /// Input layout
    #[arg(long, value_enum, default_value_t = Format::Dense)]
    format: Format,
    /// Label column of dense files: "last", "none", a 0-based index, or a header name
    #[arg(long, default_value = "last")]
    label_col: String,
    /// First row of a dense file is a header
    #[arg(long)]
    has_header: bool,
    /// Keep only the first N instances of each input
    #[arg(long)]
    limit: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> etana::Result<Dataset> {
        load_input(
            &self.dataset,
            self.format,
            &self.label_col,
            self.has_header,
            self.limit,
            None,
        )
    }
}

fn load_input(
    path: &Path,
    format: Format,
    label_col: &str,
    has_header: bool,
    limit: Option<usize>,
    sparse_dim: Option<usize>,
) -> etana::Result<Dataset> {
    match format {
        Format::Dense => load_dense(path, &LabelSpec::parse(label_col), has_header, limit),
        Format::Sparse => load_sparse(path, sparse_dim, limit),
    }
}

#[derive(Args)]
struct PolicyArgs {
    /// Decision policy
    #[arg(long, value_enum, default_value_t = PolicyArg::Etana)]
    policy: PolicyArg,
    /// Per-feature evaluation fee, with 0-1 misclassification costs
    #[arg(long, default_value_t = 0.01)]
    cost: f64,
    /// Per-feature fee file (one nonnegative real per line); overrides --cost
    #[arg(long)]
    cost_file: Option<PathBuf>,
    /// Quantization bins per feature (default: the number of classes)
    #[arg(long)]
    bins: Option<usize>,
    /// Belief-grid resolution (default: 100 for 2 classes, else 30, coarsened to fit --grid-bound)
    #[arg(long)]
    grid: Option<u32>,
    /// Maximum belief-grid size in points
    #[arg(long, default_value_t = etana::grid::DEFAULT_GRID_BOUND)]
    grid_bound: u64,
    /// Seed for fold shuffling and threshold training
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    spsa: SpsaArgs,
}

#[derive(Args)]
struct SpsaArgs {
    /// Threshold trainer: step-size numerator
    #[arg(long)]
    spsa_epsilon: Option<f64>,
    /// Threshold trainer: iteration offset stabilizing early steps
    #[arg(long)]
    spsa_varsigma: Option<f64>,
    /// Threshold trainer: step-size decay exponent
    #[arg(long)]
    spsa_kappa: Option<f64>,
    /// Threshold trainer: perturbation magnitude
    #[arg(long)]
    spsa_mu: Option<f64>,
    /// Threshold trainer: perturbation decay exponent
    #[arg(long)]
    spsa_upsilon: Option<f64>,
    /// Threshold trainer: iteration budget
    #[arg(long)]
    spsa_tmax: Option<u64>,
    /// Threshold trainer: stop below this gradient-estimate norm
    #[arg(long)]
    spsa_grad_tol: Option<f64>,
}

impl SpsaArgs {
    fn schedule(&self) -> SpsaSchedule {
        let mut s = SpsaSchedule::default();
        if let Some(v) = self.spsa_epsilon {
            s.epsilon = v;
        }
        if let Some(v) = self.spsa_varsigma {
            s.varsigma = v;
        }
        if let Some(v) = self.spsa_kappa {
            s.kappa = v;
        }
        if let Some(v) = self.spsa_mu {
            s.mu = v;
        }
        if let Some(v) = self.spsa_upsilon {
            s.upsilon = v;
        }
        if let Some(v) = self.spsa_tmax {
            s.t_max = v;
        }
        if let Some(v) = self.spsa_grad_tol {
            s.grad_tol = v;
        }
        s
    }
}

/// Reads a per-feature cost file: text, one nonnegative real per line.
fn read_cost_file(path: &Path) -> etana::Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: f64 = l.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "cost file {} line {}: '{}' is not a number",
                    path.display(),
                    i + 1,
                    l.trim()
                ))
            })?;
            if !(v >= 0.0) {
                return Err(Error::Config(format!(
                    "cost file {} line {}: fee {v} must be nonnegative",
                    path.display(),
                    i + 1
                )));
            }
            Ok(v)
        })
        .collect()
}

impl PolicyArgs {
    fn config(&self) -> etana::Result<EvalConfig> {
        let costs = match &self.cost_file {
            Some(path) => CostSpec::Explicit {
                feature_costs: read_cost_file(path)?,
                misclass: None,
            },
            None => {
                if !(self.cost >= 0.0) {
                    return Err(Error::Config(format!(
                        "--cost {} must be nonnegative",
                        self.cost
                    )));
                }
                CostSpec::Uniform(self.cost)
            }
        };
        Ok(EvalConfig {
            policy: self.policy.kind(),
            costs,
            n_bins: self.bins,
            grid_resolution: self.grid,
            grid_bound: self.grid_bound,
            seed: self.seed,
            spsa: self.spsa.schedule(),
        })
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Validation file (same format as --dataset); without it, k-fold on --dataset
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Fold count when no --valid is given
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

impl SplitArgs {
    fn plan(&self, data: &DataArgs, train: &Dataset) -> etana::Result<SplitPlan> {
        match &self.valid {
            Some(path) => Ok(SplitPlan::Provided(load_input(
                path,
                data.format,
                &data.label_col,
                data.has_header,
                data.limit,
                Some(train.n_features()),
            )?)),
            None => Ok(SplitPlan::KFold { folds: self.folds }),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a labeled dataset and write it to --out
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Model output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify instances, printing "label<TAB>features_used" per line
    Classify {
        /// Model file written by train
        #[arg(long)]
        model: PathBuf,
        /// Instance file
        #[arg(long)]
        dataset: PathBuf,
        /// Input layout
        #[arg(long, value_enum, default_value_t = Format::Dense)]
        format: Format,
        /// Label column to strip from dense files, if any
        #[arg(long, default_value = "none")]
        label_col: String,
        /// First row of a dense file is a header
        #[arg(long)]
        has_header: bool,
        /// Keep only the first N instances
        #[arg(long)]
        limit: Option<usize>,
        /// Emit one JSON object per instance with the per-stage record instead
        #[arg(long)]
        trace: bool,
        /// Write predictions here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate accuracy and feature usage on a split or by cross-validation
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Write the JSON report here (and an aligned-text copy with a .txt extension)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate across per-feature fees; writes a CSV curve
    SweepCost {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Comma-separated fee values (default: 0.1,0.08,0.06,0.04,0.02,0.01,0.001,0)
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate across bin counts; writes a CSV curve
    SweepBins {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Comma-separated bin counts (default: 2,3,5,10,20,30,40,50,100)
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// JSON line emitted under --trace.
#[derive(Serialize)]
struct TraceLine<'a> {
    label: &'a str,
    features_used: usize,
    trace: &'a [TraceStep],
}

fn run(cmd: Command) -> etana::Result<()> {
    match cmd {
        Command::Train { data, policy, out } => {
            let train = data.load()?;
            let config = policy.config()?;
            let (model, secs) = fit_model(&train, &config)?;
            save_model(&model, &out)?;
            println!(
                "trained {} on {} instances x {} features in {secs:.3} s -> {}",
                config.policy.name(),
                train.n_instances(),
                train.n_features(),
                out.display()
            );
            Ok(())
        }
        Command::Classify {
            model,
            dataset,
            format,
            label_col,
            has_header,
            limit,
            trace,
            out,
        } => {
            let model = load_model(&model)?;
            let instances = load_input(
                &dataset,
                format,
                &label_col,
                has_header,
                limit,
                Some(model.n_features()),
            )?;
            let mut lines = String::new();
            if instances.n_instances() > 0 {
                let outcome = classify_batch(&instances, &model)?;
                for r in &outcome.results {
                    if trace {
                        let record = TraceLine {
                            label: &model.label_names[r.label],
                            features_used: r.features_used,
                            trace: &r.trace,
                        };
                        lines.push_str(&serde_json::to_string(&record)?);
                        lines.push('\n');
                    } else {
                        lines.push_str(&format!(
                            "{}\t{}\n",
                            model.label_names[r.label], r.features_used
                        ));
                    }
                }
            }
            match out {
                Some(path) => fs::write(path, lines)?,
                None => print!("{lines}"),
            }
            Ok(())
        }
        Command::Eval {
            data,
            policy,
            split,
            out,
        } => {
            let train = data.load()?;
            let config = policy.config()?;
            let plan = split.plan(&data, &train)?;
            let report = run_eval(&train, &plan, &config)?;
            let text = report_text(&report);
            print!("{text}");
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
                fs::write(path.with_extension("txt"), text)?;
            }
            Ok(())
        }
        Command::SweepCost {
            data,
            policy,
            split,
            values,
            out,
        } => {
            let train = data.load()?;
            let config = policy.config()?;
            let plan = split.plan(&data, &train)?;
            let fees =
                values.unwrap_or_else(|| vec![0.1, 0.08, 0.06, 0.04, 0.02, 0.01, 0.001, 0.0]);
            let csv = sweep_csv(&cost_sweep(&train, &plan, &config, &fees)?);
            print!("{csv}");
            if let Some(path) = out {
                fs::write(path, csv)?;
            }
            Ok(())
        }
        Command::SweepBins {
            data,
            policy,
            split,
            values,
            out,
        } => {
            let train = data.load()?;
            let config = policy.config()?;
            let plan = split.plan(&data, &train)?;
            let bins = values.unwrap_or_else(|| vec![2, 3, 5, 10, 20, 30, 40, 50, 100]);
            let csv = sweep_csv(&bin_sweep(&train, &plan, &config, &bins)?);
            print!("{csv}");
            if let Some(path) = out {
                fs::write(path, csv)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::GridTooLarge { .. }) {
                eprintln!(
                    "hint: --policy fetana trains linear stopping thresholds and needs no belief grid"
                );
            }
            ExitCode::from(e.exit_code())
        }
    }
}

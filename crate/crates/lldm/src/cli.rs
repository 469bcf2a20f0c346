//! Command-line front end.
//!
//! Every command echoes its parsed arguments as `config.json` (or
//! `<output>.config.json` for single-file outputs); `lldm replay <echo>`
//! reruns it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynamicsKind, DynamicsSpec, Trajectory};
use crate::encoding::{self, Dataset, GlobalDataParams, SubgraphDataParams};
use crate::error::{Error, ErrorClass};
use crate::eval::{self, SubgraphExperiment};
use crate::factorization::SmfConfig;
use crate::graph::{self, Graph, NwsParams};
use crate::model::{self, LldmModel, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "lldm", version, about = "Predict synchronization of coupled oscillators from subgraph dynamics")]
pub struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
pub enum Command {
    /// Generate or normalize a graph and write its edge list.
    GenGraph(GenGraphArgs),
    /// Simulate dynamics and write a dataset directory.
    GenData(GenDataArgs),
    /// Fit a model on a dataset.
    Train(TrainArgs),
    /// Predict synchronization for a dataset or a whole graph.
    Predict(PredictArgs),
    /// Accuracy metrics and deviance residuals.
    Eval(EvalArgs),
    /// Write filters as CSV slices and coefficients as JSON.
    ExportFilters(ExportArgs),
    /// Multi-seed subgraph-level accuracy comparison on NWS parents.
    Experiment(ExperimentArgs),
    /// Rerun a command from its echoed configuration.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenGraphArgs {
    #[command(subcommand)]
    pub source: GraphSource,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
pub enum GraphSource {
    /// Ring lattice plus random shortcuts.
    Nws {
        #[arg(long, default_value_t = 300)]
        nodes: usize,
        #[arg(long, default_value_t = 12)]
        neighbors: usize,
        #[arg(long, default_value_t = 0.4)]
        shortcut_p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Read an existing edge list.
    File {
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum DynamicsArg {
    Kuramoto,
    Fca,
    Ghm,
}

impl DynamicsArg {
    fn spec(self, kappa: Option<u32>) -> Result<DynamicsSpec, CliError> {
        let kind = match self {
            DynamicsArg::Kuramoto => DynamicsKind::Kuramoto,
            DynamicsArg::Fca => DynamicsKind::Fca,
            DynamicsArg::Ghm => DynamicsKind::Ghm,
        };
        let mut spec = DynamicsSpec::default_for(kind);
        if let Some(kappa) = kappa {
            if kind == DynamicsKind::Kuramoto {
                return Err(CliError::Usage("--kappa does not apply to kuramoto".into()));
            }
            spec.kappa = kappa;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum DataMode {
    /// Dynamics run on each sampled subgraph.
    Subgraph,
    /// Dynamics run on whole parents and restricted to sampled subgraphs.
    Global,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenDataArgs {
    /// Parent edge list; repeat for several parents in global mode.
    #[arg(long = "graph", required = true)]
    pub graphs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataMode::Subgraph)]
    pub mode: DataMode,
    #[arg(long, value_enum)]
    pub dynamics: DynamicsArg,
    #[arg(long)]
    pub kappa: Option<u32>,
    /// Subgraph size.
    #[arg(short = 'k', long = "k", default_value_t = 10)]
    pub k: usize,
    /// Examples (subgraph mode) or paths per parent (global mode).
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long)]
    pub t_horizon: Option<usize>,
    #[arg(long)]
    pub t_observed: Option<usize>,
    /// Balance the two labels.
    #[arg(long)]
    pub balance: bool,
    /// Chain steps between sampled paths.
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Method {
    Smf,
    Nmf,
    NmfDistill,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Smf)]
    pub method: Method,
    #[arg(long, default_value_t = 8)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.5)]
    pub xi: f64,
    /// Sweep ξ over {0.1, 0.5, 1.0} on a 20% validation split of the data.
    #[arg(long)]
    pub xi_grid: bool,
    #[arg(long, default_value_t = 250)]
    pub iters: usize,
    #[arg(long, default_value_t = 20)]
    pub inner_iters: usize,
    #[arg(long, default_value_t = model::logistic::DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, default_value_t = 0.1)]
    pub dense_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sparse_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[command(subcommand)]
    pub target: PredictTarget,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
pub enum PredictTarget {
    /// Per-example probabilities for a dataset.
    Local {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Running-average probability that a whole graph synchronizes.
    Global {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Observed trajectory as JSON; simulated from a random start if absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Simulation horizon used to report the true label.
        #[arg(long)]
        t_horizon: Option<usize>,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also score the baseline predictor.
    #[arg(long)]
    pub baseline: bool,
    /// Also fit logistic regression on the raw tensors of this training set.
    #[arg(long)]
    pub logreg_train: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[arg(long, num_args = 1.., default_values_t = [0u64, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = DynamicsArg::Fca)]
    pub dynamics: DynamicsArg,
    #[arg(long)]
    pub kappa: Option<u32>,
    #[arg(short = 'k', long = "k", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub rank: usize,
    #[arg(long, num_args = 1.., default_values_t = SmfConfig::XI_GRID)]
    pub xi: Vec<f64>,
    #[arg(long, default_value_t = 250)]
    pub iters: usize,
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 12)]
    pub neighbors: usize,
    #[arg(long, default_value_t = 0.4)]
    pub shortcut_p: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub config: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e.class() {
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Command::Replay(args) = &cli.command {
        let text = fs::read_to_string(&args.config)?;
        let mut echoed: Cli = serde_json::from_str(&text)?;
        if cli.threads.is_some() {
            echoed.threads = cli.threads;
        }
        return run(echoed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::GenGraph(a) => gen_graph(&cli, a),
        Command::GenData(a) => gen_data(&cli, a),
        Command::Train(a) => train(&cli, a),
        Command::Predict(a) => predict(&cli, a),
        Command::Eval(a) => evaluate(&cli, a),
        Command::ExportFilters(a) => export_filters(&cli, a),
        Command::Experiment(a) => experiment(&cli, a),
        Command::Replay(_) => unreachable!("handled above"),
    }
}

fn require_input(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(not_found(path))
    }
}

fn require_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(not_found(p))
        }
        _ => Ok(()),
    }
}

fn not_found(path: &Path) -> CliError {
    std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", path.display())).into()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn echo_config(cli: &Cli, path: &Path) -> CliResult<()> {
    write_json(cli, path)
}

fn load_graph(path: &Path) -> CliResult<Graph> {
    require_input(path)?;
    Ok(graph::load_edge_list(path)?)
}

fn gen_graph(cli: &Cli, a: &GenGraphArgs) -> CliResult<()> {
    let (g, output) = match &a.source {
        GraphSource::Nws {
            nodes,
            neighbors,
            shortcut_p,
            seed,
            output,
        } => {
            require_parent(output)?;
            let params = NwsParams {
                n: *nodes,
                neighbors: *neighbors,
                shortcut_p: *shortcut_p,
                seed: *seed,
            };
            (graph::generate_nws(&params)?, output)
        }
        GraphSource::File { input, output } => {
            require_parent(output)?;
            (load_graph(input)?, output)
        }
    };
    graph::save_edge_list(&g, output)?;
    let stats = g.stats();
    write_json(&stats, &sibling(output, ".stats.json"))?;
    echo_config(cli, &sibling(output, ".config.json"))?;
    println!("nodes {} edges {} density {:.6}", stats.nodes, stats.edges, stats.density);
    Ok(())
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> CliResult<()> {
    for g in &a.graphs {
        require_input(g)?;
    }
    if a.count == 0 {
        return Err(Error::InvalidParams("count must be positive".into()).into());
    }
    let spec = a.dynamics.spec(a.kappa)?;
    let desc = a
        .graphs
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",");
    let (ds, records) = match a.mode {
        DataMode::Subgraph => {
            let [path] = a.graphs.as_slice() else {
                return Err(CliError::Usage("subgraph mode takes exactly one --graph".into()));
            };
            let parent = load_graph(path)?;
            let mut p = SubgraphDataParams::new(spec, a.k, a.count, a.seed);
            p.t_horizon = a.t_horizon.unwrap_or(p.t_horizon);
            p.t_observed = a.t_observed.unwrap_or(p.t_observed);
            p.thin = a.thin.unwrap_or(p.thin);
            p.balance = a.balance;
            (encoding::gen_subgraph_dataset(&parent, &desc, &p)?, None)
        }
        DataMode::Global => {
            let parents = a.graphs.iter().map(|p| load_graph(p)).collect::<CliResult<Vec<_>>>()?;
            let mut p = GlobalDataParams::new(spec, a.k, a.count, a.seed);
            p.t_horizon = a.t_horizon.unwrap_or(p.t_horizon);
            p.t_observed = a.t_observed.unwrap_or(p.t_observed);
            p.thin = a.thin.unwrap_or(p.thin);
            p.balance = a.balance;
            let (ds, records) = encoding::gen_global_dataset(&parents, &desc, &p)?;
            (ds, Some(records))
        }
    };
    ds.save(&a.output)?;
    if let Some(records) = records {
        let mut w = csv::Writer::from_path(a.output.join("parents.csv")).map_err(Error::from)?;
        w.write_record(["parent", "label", "attempts", "arc_fraction"]).map_err(Error::from)?;
        for r in &records {
            w.write_record([
                r.parent.to_string(),
                r.label.to_string(),
                r.attempts.to_string(),
                format!("{:.6}", r.arc_fraction),
            ])
            .map_err(Error::from)?;
        }
        w.flush()?;
        let positive = records.iter().filter(|r| r.label == 1).count();
        println!("parents: positive {positive} negative {}", records.len() - positive);
    }
    echo_config(cli, &a.output.join("config.json"))?;
    let pos = ds.manifest.labels_positive;
    println!("examples {} positive {pos} negative {}", ds.len(), ds.len() - pos);
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    require_input(path)?;
    Ok(Dataset::load(path)?)
}

fn load_model(path: &Path) -> CliResult<LldmModel> {
    require_input(path)?;
    Ok(LldmModel::load(path)?)
}

fn train(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = TrainConfig {
        iters: a.iters,
        inner_iters: a.inner_iters,
        ridge: a.ridge,
        intercept: a.intercept,
        seed: a.seed,
        dense_frac: a.dense_frac,
        sparse_frac: a.sparse_frac,
    };
    if a.xi_grid && a.method != Method::Smf {
        return Err(CliError::Usage("--xi-grid applies to --method smf only".into()));
    }
    let mut selection = None;
    let m = match a.method {
        Method::Smf if a.xi_grid => {
            let (m, sel) = eval::select_xi(&ds, a.rank, &SmfConfig::XI_GRID, &cfg, a.seed)?;
            selection = Some(sel);
            m
        }
        Method::Smf => model::train_lldm_smf(&ds, a.rank, a.xi, &cfg)?,
        Method::Nmf => model::train_lldm_nmf(&ds, a.rank, &cfg)?,
        Method::NmfDistill => model::train_lldm_t(&ds, a.rank, &cfg)?,
    };
    m.save(&a.output)?;
    if let Some(sel) = &selection {
        write_json(sel, &a.output.join("xi_grid.json"))?;
        println!("selected xi {}", sel.xi);
    }
    echo_config(cli, &a.output.join("config.json"))?;
    let acc = eval::accuracy(&m, &ds)?;
    println!("rank {} training accuracy {:.4}", m.rank(), acc.accuracy);
    Ok(())
}

#[derive(Serialize)]
struct LocalPredictions {
    probabilities: Vec<f64>,
    labels: Vec<u8>,
}

#[derive(Serialize)]
struct GlobalOutput {
    #[serde(flatten)]
    prediction: model::GlobalPrediction,
    /// Whether the simulated parent synchronized at the horizon.
    label: Option<u8>,
}

fn predict(cli: &Cli, a: &PredictArgs) -> CliResult<()> {
    match &a.target {
        PredictTarget::Local { model, data, output } => {
            require_parent(output)?;
            let m = load_model(model)?;
            let ds = load_dataset(data)?;
            let probabilities = m.predict_probs(&ds.cats)?;
            write_json(
                &LocalPredictions {
                    probabilities,
                    labels: ds.labels.clone(),
                },
                output,
            )?;
            echo_config(cli, &sibling(output, ".config.json"))?;
            println!("predicted {} examples", ds.len());
        }
        PredictTarget::Global {
            model,
            graph,
            trajectory,
            t_horizon,
            samples,
            thin,
            seed,
            output,
        } => {
            require_parent(output)?;
            let m = load_model(model)?;
            let g = load_graph(graph)?;
            let (traj, label) = match trajectory {
                Some(path) => {
                    require_input(path)?;
                    let t: Trajectory = serde_json::from_str(&fs::read_to_string(path)?)?;
                    (t, None)
                }
                None => {
                    let horizon = t_horizon.unwrap_or(encoding::default_global_horizons(m.spec.kind).0);
                    let (full, rec) =
                        encoding::parent_trajectory(&g, &m.spec, horizon, None, 1, crate::rng::derive_stream(*seed, "parent"))?;
                    (full.prefix(m.t), Some(rec.label))
                }
            };
            if traj.configs.iter().any(|c| c.len() != g.node_count()) {
                return Err(Error::SizeMismatch {
                    expected: g.node_count(),
                    actual: traj.configs.first().map_or(0, dynamics::PhaseConfig::len),
                }
                .into());
            }
            let thin = thin.unwrap_or_else(|| model::default_global_thin(m.k));
            let mut r = model::prediction_rng(*seed);
            let prediction = model::predict_global(&m, &g, &traj, *samples, thin, &mut r)?;
            println!("final probability {:.6} over {} samples", prediction.final_prob, prediction.samples_used);
            write_json(&GlobalOutput { prediction, label }, output)?;
            echo_config(cli, &sibling(output, ".config.json"))?;
        }
    }
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvalArgs) -> CliResult<()> {
    let m = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    if let Some(train) = &a.logreg_train {
        require_input(train)?;
    }
    fs::create_dir_all(&a.output)?;
    let metrics = eval::accuracy(&m, &ds)?;
    eval::write_metrics_json(&metrics, a.seed, a.output.join("metrics.json"))?;
    let residuals = eval::deviance_residuals(&m, &ds)?;
    eval::write_residuals_csv(&residuals, std::io::BufWriter::new(fs::File::create(a.output.join("residuals.csv"))?))?;
    println!("accuracy {:.4} (tp {} tn {} fp {} fn {})", metrics.accuracy, metrics.tp, metrics.tn, metrics.fp, metrics.fn_);
    if a.baseline {
        let mut coin = crate::rng::seeded(crate::rng::derive_stream(a.seed, "baseline"));
        let b = eval::baseline_accuracy_from_meta(&ds, &mut coin)?;
        eval::write_metrics_json(&b, a.seed, a.output.join("baseline_metrics.json"))?;
        println!("baseline accuracy {:.4}", b.accuracy);
    }
    if let Some(train) = &a.logreg_train {
        let train = load_dataset(train)?;
        let lr = eval::logreg_comparator(&train, &ds, model::logistic::DEFAULT_RIDGE)?;
        eval::write_metrics_json(&lr, a.seed, a.output.join("logreg_metrics.json"))?;
        println!("logreg accuracy {:.4}", lr.accuracy);
    }
    echo_config(cli, &a.output.join("config.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct Coefficient {
    filter: usize,
    coefficient: f64,
}

#[derive(Serialize)]
struct BetaExport {
    intercept: Option<f64>,
    /// Filters in order of decreasing coefficient.
    coefficients: Vec<Coefficient>,
}

fn export_filters(cli: &Cli, a: &ExportArgs) -> CliResult<()> {
    let m = load_model(&a.model)?;
    fs::create_dir_all(&a.output)?;
    for (r, f) in m.filters.iter().enumerate() {
        let dir = a.output.join(format!("filter_{r}"));
        fs::create_dir_all(&dir)?;
        for t in 0..m.t {
            let mut w = csv::Writer::from_path(dir.join(format!("t_{t}.csv"))).map_err(Error::from)?;
            for i in 0..m.k {
                w.write_record((0..m.k).map(|j| format!("{:.9e}", f.get(i, j, t))))
                    .map_err(Error::from)?;
            }
            w.flush()?;
        }
    }
    let mut coefficients: Vec<Coefficient> = m
        .beta
        .iter()
        .enumerate()
        .map(|(filter, &coefficient)| Coefficient { filter, coefficient })
        .collect();
    coefficients.sort_by(|x, y| y.coefficient.total_cmp(&x.coefficient).then(x.filter.cmp(&y.filter)));
    write_json(
        &BetaExport {
            intercept: m.intercept,
            coefficients,
        },
        &a.output.join("beta.json"),
    )?;
    echo_config(cli, &a.output.join("config.json"))?;
    println!("exported {} filters", m.rank());
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct ExperimentReport {
    seeds: Vec<eval::SeedResult>,
    lldm: Summary,
    lldm_t: Summary,
    baseline: Summary,
}

fn summary(results: &[eval::SeedResult], pick: impl Fn(&eval::SeedResult) -> f64) -> Summary {
    let values: Vec<f64> = results.iter().map(pick).collect();
    let (mean, std) = eval::mean_std(&values);
    Summary { mean, std }
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> CliResult<()> {
    require_parent(&a.output)?;
    if a.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let exp = SubgraphExperiment {
        spec: a.dynamics.spec(a.kappa)?,
        k: a.k,
        count: a.count,
        rank: a.rank,
        xi_grid: a.xi.clone(),
        train: TrainConfig {
            iters: a.iters,
            ..TrainConfig::default()
        },
        train_frac: 0.8,
    };
    let mut results = Vec::with_capacity(a.seeds.len());
    for &seed in &a.seeds {
        let params = NwsParams {
            n: a.nodes,
            neighbors: a.neighbors,
            shortcut_p: a.shortcut_p,
            seed,
        };
        let parent = graph::generate_nws(&params)?;
        let r = exp.run_seed(&parent, &format!("nws(n={},k={},p={},seed={seed})", a.nodes, a.neighbors, a.shortcut_p), seed)?;
        println!(
            "seed {seed}: lldm {:.4} lldm-t {:.4} baseline {:.4} (xi {})",
            r.lldm.accuracy, r.lldm_t.accuracy, r.baseline.accuracy, r.xi
        );
        results.push(r);
    }
    let report = ExperimentReport {
        lldm: summary(&results, |r| r.lldm.accuracy),
        lldm_t: summary(&results, |r| r.lldm_t.accuracy),
        baseline: summary(&results, |r| r.baseline.accuracy),
        seeds: results,
    };
    println!(
        "mean accuracy: lldm {:.4} ± {:.4}, lldm-t {:.4} ± {:.4}, baseline {:.4} ± {:.4}",
        report.lldm.mean, report.lldm.std, report.lldm_t.mean, report.lldm_t.std, report.baseline.mean, report.baseline.std
    );
    write_json(&report, &a.output)?;
    echo_config(cli, &sibling(&a.output, ".config.json"))?;
    Ok(())
}

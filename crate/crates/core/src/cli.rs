//! Command-line front end. Each subcommand parses its inputs, calls one
//! library entry point and serializes the result.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{sample, simulation_presets, BlockModelParams, SimCase};
use crate::io::{self as netio, IngestOptions, LabelsFile, Manifest};
use crate::kmeans::KmeansOptions;
use crate::metrics::evaluate;
use crate::modularity::{community_profile, estimate_k, ModularityMetric, DEFAULT_K_CANDIDATES};
use crate::network::MultiLayerNetwork;
use crate::oracle::{self, check_community_rows, check_normalized_rows, population_laplacian};
use crate::simulation::{run_simulation_study, threads_from_env, Scale, SimulationConfig};
use crate::spectral::{detect, DetectOptions, MethodId, TauSpec};

#[derive(Debug, Parser)]
#[command(name = "rdsos", version, about = "Community detection in multi-layer networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a network from block-model parameters.
    Generate(GenerateArgs),
    /// Detect K communities.
    Detect(DetectArgs),
    /// Scan k = 1..K_C and pick the modularity maximizer.
    EstimateK(EstimateArgs),
    /// Compare estimated labels with reference labels.
    Evaluate(EvaluateArgs),
    /// Degree profile of each community.
    Profile(ProfileArgs),
    /// Run a synthetic study.
    Simulate(SimulateArgs),
    /// Structural checks on population eigenvectors.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Edge list with `layer, src, dst` records; repeat to pass one
    /// `src, dst` file per layer instead.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Field separator; `tab`, `comma`, `space` or a single character.
    #[arg(long, default_value = "tab")]
    pub separator: String,
    #[arg(long, default_value_t = 1)]
    pub index_base: usize,
    /// Treat node tokens as integer ids.
    #[arg(long)]
    pub numeric: bool,
    /// JSON manifest with declared layers, node table or node count.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, default_value = "rdsos")]
    pub method: String,
    /// `auto`, a number, or `nu:<x>` for `tau = x * sum(D) / n`.
    #[arg(long, default_value = "auto")]
    pub tau: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Block-model parameters as JSON.
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    pub params: Option<PathBuf>,
    /// Built-in 20-node example.
    #[arg(long, value_enum)]
    pub example: Option<ExampleModel>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// One-based ground-truth labels, one per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Manifest that reproduces the network exactly on reload.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExampleModel {
    Mlsbm,
    Mldcsbm,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[arg(long)]
    pub k: usize,
    /// Labels JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[arg(long, default_value = "sos")]
    pub metric: String,
    #[arg(long, default_value_t = DEFAULT_K_CANDIDATES)]
    pub kmax: usize,
    /// Curve CSV with columns `k,Q`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated labels (labels JSON or one label per line).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScaleArg {
    Full,
    Desk,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub study: u32,
    /// mlsbm, mldcsbm, mldcsbm-a or mldcsbm-b.
    #[arg(long, default_value = "mlsbm")]
    pub case: String,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: ScaleArg,
    /// Replicates per grid point; 10 at desk scale, 50 at full scale.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated method names; the study's list when omitted.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Comma-separated grid indices to run.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Metric results CSV (replicate and mean rows).
    #[arg(long)]
    pub out: PathBuf,
    /// Also run the K-estimation grid and write accuracy rows here.
    #[arg(long)]
    pub kest_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K_CANDIDATES)]
    pub kmax: usize,
    /// Per-method wall times.
    #[arg(long)]
    pub timings: Option<PathBuf>,
    /// Print the preset grid as JSON and exit.
    #[arg(long)]
    pub show_grid: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<ExampleModel>,
    #[arg(long, default_value = "auto")]
    pub tau: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_separator(s: &str) -> Result<char> {
    match s {
        "tab" | "\\t" => Ok('\t'),
        "comma" => Ok(','),
        "space" => Ok(' '),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::InvalidParameter(format!("bad separator {s:?}"))),
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn load_network(args: &InputArgs) -> Result<MultiLayerNetwork> {
    let manifest = args.manifest.as_deref().map(|p| Manifest::from_reader(open(p)?)).transpose()?;
    let opts = IngestOptions {
        separator: parse_separator(&args.separator)?,
        index_base: args.index_base,
        numeric_nodes: args.numeric,
        manifest,
        ..IngestOptions::default()
    };
    if args.inputs.len() == 1 {
        netio::load_multilayer_edgelist(open(&args.inputs[0])?, &opts)
    } else {
        let readers = args.inputs.iter().map(|p| open(p)).collect::<Result<Vec<_>>>()?;
        netio::load_layer_files(readers, &opts)
    }
}

fn detect_options(c: &ClusterArgs) -> Result<DetectOptions> {
    Ok(DetectOptions {
        tau: c.tau.parse::<TauSpec>()?,
        kmeans: KmeansOptions {
            restarts: c.restarts,
            max_iters: c.max_iters,
        },
        ..Default::default()
    })
}

fn model_params(params: Option<&Path>, example: Option<ExampleModel>) -> Result<BlockModelParams> {
    match (params, example) {
        (Some(p), _) => {
            let params: BlockModelParams = serde_json::from_reader(open(p)?)?;
            params.validate()?;
            Ok(params)
        }
        (None, Some(ExampleModel::Mlsbm)) => Ok(oracle::example_mlsbm()),
        (None, Some(ExampleModel::Mldcsbm)) => Ok(oracle::example_mldcsbm()),
        (None, None) => Err(Error::InvalidParameter("either --params or --example is required".into())),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let params = model_params(a.params.as_deref(), a.example)?;
            let (net, truth) = sample(&params, a.seed)?;
            let mut w = sink(Some(&a.out))?;
            netio::write_edgelist(&net, &mut w)?;
            w.flush()?;
            if let Some(t) = &a.truth {
                let mut w = sink(Some(t))?;
                netio::write_labels(&truth, &mut w)?;
                w.flush()?;
            }
            if let Some(m) = &a.manifest {
                write_json(&Manifest::describe(&net), Some(m))?;
            }
            Ok(())
        }
        Command::Detect(a) => {
            let net = load_network(&a.input)?;
            let method: MethodId = a.cluster.method.parse()?;
            let det = detect(&net, a.k, method, &detect_options(&a.cluster)?, a.cluster.seed)?;
            let file = LabelsFile {
                n: net.node_count(),
                k: a.k,
                labels: det.partition.one_based(),
                method: method.name().into(),
                tau: det.diagnostics.tau.unwrap_or(0.0),
                seed: a.cluster.seed,
                eigenvalues: det.diagnostics.eigenvalues.clone(),
            };
            if det.diagnostics.gapless {
                eprintln!("warning: |lambda_K| equals |lambda_(K+1)|; the leading subspace is not unique");
            }
            if !det.diagnostics.zero_rows.is_empty() {
                eprintln!("warning: zero embedding rows at nodes {:?}", det.diagnostics.zero_rows);
            }
            write_json(&file, a.out.as_deref())
        }
        Command::EstimateK(a) => {
            let net = load_network(&a.input)?;
            let method: MethodId = a.cluster.method.parse()?;
            let metric: ModularityMetric = a.metric.parse()?;
            let curve = estimate_k(&net, method, metric, a.kmax, &detect_options(&a.cluster)?, a.cluster.seed)?;
            if let Some(p) = &a.out {
                let mut w = sink(Some(p))?;
                curve.write_csv(&mut w)?;
                w.flush()?;
            }
            if !curve.skipped_layers.is_empty() {
                eprintln!("warning: empty layers skipped: {:?}", curve.skipped_layers);
            }
            println!("best_k={} best_q={}", curve.best_k, curve.best_q);
            Ok(())
        }
        Command::Evaluate(a) => {
            let est = netio::read_partition(open(&a.labels)?)?;
            let truth = netio::read_partition(open(&a.truth)?)?;
            write_json(&evaluate(&truth, &est)?, a.out.as_deref())
        }
        Command::Profile(a) => {
            let net = load_network(&a.input)?;
            let p = netio::read_partition(open(&a.labels)?)?;
            let prof = community_profile(&net, &p)?;
            let mut w = sink(a.out.as_deref())?;
            prof.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Simulate(a) => {
            let case: SimCase = a.case.parse()?;
            let scale = match a.scale {
                ScaleArg::Full => Scale::Full,
                ScaleArg::Desk => Scale::Desk,
            };
            if a.show_grid {
                return write_json(&simulation_presets(a.study, case, scale == Scale::Desk)?, Some(&a.out));
            }
            let mut config = SimulationConfig::new(a.study, case, scale, a.seed);
            if let Some(r) = a.reps {
                config.reps = r;
            }
            config.kmeans.restarts = a.restarts;
            config.methods = a
                .methods
                .as_ref()
                .map(|ms| ms.iter().map(|m| m.parse()).collect::<Result<Vec<MethodId>>>())
                .transpose()?;
            config.grid_filter = a.points.clone();
            if a.kest_out.is_some() {
                config.estimate_k = Some(a.kmax);
            }
            let table = run_simulation_study(&config)?;
            let mut w = sink(Some(&a.out))?;
            table.write_metrics_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = &a.kest_out {
                let mut w = sink(Some(p))?;
                table.write_kest_csv(&mut w)?;
                w.flush()?;
            }
            if let Some(p) = &a.timings {
                let mut w = sink(Some(p))?;
                table.write_timings_csv(&mut w)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::OracleCheck(a) => {
            let params = model_params(a.params.as_deref(), a.example)?;
            let pop = population_laplacian(&params, a.tau.parse()?)?;
            let report = if params.is_degree_corrected() {
                check_normalized_rows(&pop, &params, &params.membership)
            } else {
                check_community_rows(&pop, &params, &params.membership)
            };
            #[derive(Serialize)]
            struct OracleOutput<'a> {
                model: &'static str,
                tau: f64,
                eigenvalues: &'a [f64],
                delta_min: f64,
                delta_max: f64,
                report: &'a oracle::RowStructureReport,
            }
            let out = OracleOutput {
                model: if params.is_degree_corrected() { "MLDCSBM" } else { "MLSBM" },
                tau: pop.tau,
                eigenvalues: &pop.embedding.eigenvalues,
                delta_min: pop.delta_min,
                delta_max: pop.delta_max,
                report: &report,
            };
            write_json(&out, a.out.as_deref())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 on usage errors, 2 on runtime errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = threads_from_env() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

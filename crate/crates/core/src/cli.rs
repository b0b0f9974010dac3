//! The `spectral-nns` command line.
//!
//! Exit codes: 0 on success, 2 for invalid arguments (the message names the
//! flag), 1 for runtime failures. Point indices are printed 1-based.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::algorithms::{self, Algorithm};
use crate::container;
use crate::error::{Error, Result};
use crate::harness::{self, InstanceSource, LinearFit, SweepConfig};
use crate::ingest::{self, PreprocessParams};
use crate::lowerbounds;
use crate::model::{self, generate_synthetic, perturb, SyntheticParams};
use crate::thresholds::{classify_regime, theorem_sigma_cap};

#[derive(Debug, Parser)]
#[command(name = "spectral-nns", version, about = "Nearest-neighbor search on noisy low-rank data")]
struct Cli {
    /// Maximum worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic latent instance.
    Generate(GenerateArgs),
    /// Add Gaussian noise to a latent instance.
    Perturb(PerturbArgs),
    /// Find the nearest neighbor of the query in an instance file.
    Solve(SolveArgs),
    /// Measure success rates over a σ grid and write CSV (and SVG).
    Sweep(SweepArgs),
    /// Measure the σ at which the success rate first drops below 90%.
    Threshold(SweepArgs),
    /// Relate the noise threshold to the k-th singular value.
    SkStudy(SkStudyArgs),
    /// Run the swap distinguishability experiments.
    Lowerbound(LowerboundArgs),
    /// Turn GloVe or MNIST data into instance files.
    Ingest(IngestArgs),
    /// Print the σ caps and noise regime of an instance file.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eps: f64,
    /// Singular values of the latent factor: one value (flat) or k values.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    spectrum: Vec<f64>,
}

impl SyntheticArgs {
    fn params(&self) -> Result<SyntheticParams> {
        let spectrum = if self.spectrum.len() == 1 {
            vec![self.spectrum[0]; self.k]
        } else {
            self.spectrum.clone()
        };
        let p = SyntheticParams {
            n: self.n,
            d: self.d,
            k: self.k,
            spectrum,
            epsilon: self.eps,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    #[value(alias = "svd_split", alias = "svd-split")]
    Svd,
    Naive,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Svd => Algorithm::SvdSplit,
            AlgoArg::Naive => Algorithm::Naive,
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "svd")]
    algo: AlgoArg,
    /// Subspace rank (default: the instance's k).
    #[arg(long)]
    k: Option<usize>,
    /// Noise level; enables distance estimates.
    #[arg(long)]
    sigma: Option<f64>,
    /// Also report the K nearest points by estimated distance.
    #[arg(long)]
    knn: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Instance files; several files are used round-robin, one per trial.
    inputs: Vec<PathBuf>,
    /// key = value sweep description (replaces the flags below).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "algo", value_enum)]
    algos: Vec<AlgoArg>,
    /// lo:hi:geometric:count, lo:hi:linear:count or a comma list.
    #[arg(long)]
    sigma_grid: Option<String>,
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// SVG plot output.
    #[arg(long)]
    plot: Option<PathBuf>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<(SweepConfig, InstanceSource)> {
        if let Some(path) = &self.config {
            if !self.inputs.is_empty() || self.sigma_grid.is_some() || !self.algos.is_empty() {
                return Err(Error::param("config", "cannot be combined with inputs, --algo or --sigma-grid"));
            }
            let file = harness::parse_sweep_file(&std::fs::read_to_string(path).map_err(Error::io_at(path))?)?;
            let base = path.parent().unwrap_or(Path::new("."));
            return Ok((file.config, file.source.load(base)?));
        }
        if self.inputs.is_empty() {
            return Err(Error::param("inputs", "give at least one instance file or --config"));
        }
        let grid = self
            .sigma_grid
            .as_deref()
            .ok_or_else(|| Error::param("sigma-grid", "required without --config"))?;
        let algorithms = if self.algos.is_empty() {
            vec![Algorithm::SvdSplit]
        } else {
            self.algos.iter().map(|&a| a.into()).collect()
        };
        let config = SweepConfig::new(algorithms, harness::parse_grid(grid)?, self.trials, self.seed)?;
        let mut insts = self
            .inputs
            .iter()
            .map(|p| container::load(p).map(|f| f.latent))
            .collect::<Result<Vec<_>>>()?;
        let source = if insts.len() == 1 {
            InstanceSource::Fixed(insts.pop().expect("one"))
        } else {
            InstanceSource::PerTrial(insts)
        };
        Ok((config, source))
    }
}

#[derive(Debug, Args)]
struct SkStudyArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    multipliers: Vec<f64>,
    #[arg(long, value_enum, default_value = "svd")]
    algo: AlgoArg,
    #[arg(long)]
    sigma_grid: String,
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: u64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the latent geometry shared by all multipliers.
    #[arg(long, default_value_t = 1)]
    instance_seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GameArg {
    /// Swap two points at distance √k (varies k and σ).
    K,
    /// Swap two points differing by ε in one coordinate (varies ε and σ).
    Eps,
}

#[derive(Debug, Args)]
struct LowerboundArgs {
    #[arg(long, value_enum, default_value = "k")]
    game: GameArg,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,1,3")]
    sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Glove,
    Mnist,
}

#[derive(Debug, Args)]
struct IngestArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Separate query pool in the same format (e.g. a test split).
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eps: f64,
    /// Number of query instances to produce.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Read at most this many vectors (MNIST only).
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving query-NNNN.snns files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct InfoArgs {
    input: PathBuf,
    /// σ to classify (default: the file's noise level, if any).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    json: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e @ Error::Parameter { .. }) => {
            let Error::Parameter { name, reason } = &e else { unreachable!() };
            let _ = writeln!(err, "error: invalid --{name}: {reason}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    // output is buffered so the command can run inside a worker pool
    let mut buf = Vec::new();
    let result = {
        let work = || dispatch(cli.command, &mut buf);
        match cli.threads {
            Some(0) => Err(Error::param("threads", "must be at least 1")),
            Some(t) => with_threads(t, work),
            None => work(),
        }
    };
    out.write_all(&buf)?;
    result
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?
        .install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(_threads: usize, f: impl FnOnce() -> Result<R>) -> Result<R> {
    f()
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Generate(a) => {
            let inst = generate_synthetic(&a.synthetic.params()?, a.seed)?;
            container::save(&a.output, &inst, None)?;
            writeln!(out, "wrote {} (nn_index {})", a.output.display(), inst.nn_index() + 1)?;
        }
        Command::Perturb(a) => {
            if !(a.sigma.is_finite() && a.sigma >= 0.0) {
                return Err(Error::param("sigma", "must be finite and nonnegative"));
            }
            let file = container::load(&a.input)?;
            let noisy = perturb(&file.latent, a.sigma, a.seed)?;
            container::save(&a.output, &file.latent, Some(&noisy))?;
            writeln!(out, "wrote {}", a.output.display())?;
        }
        Command::Solve(a) => solve(a, out)?,
        Command::Sweep(a) => {
            let (config, source) = a.resolve()?;
            let records = harness::sweep(&config, &source)?;
            match &a.output {
                Some(p) => harness::emit_csv(&records, p)?,
                None => out.write_all(harness::render_csv(&records).as_bytes())?,
            }
            if let Some(p) = &a.plot {
                harness::emit_plot(&records, p)?;
            }
        }
        Command::Threshold(a) => {
            let (config, source) = a.resolve()?;
            writeln!(out, "algorithm,threshold")?;
            for &alg in &config.algorithms {
                let t = harness::noise_threshold(&config, alg, &source)?;
                writeln!(out, "{alg},{t}")?;
            }
        }
        Command::SkStudy(a) => {
            let config = SweepConfig::new(vec![a.algo.into()], harness::parse_grid(&a.sigma_grid)?, a.trials, a.seed)?;
            let study = harness::sk_dependence_study(
                &a.synthetic.params()?,
                &a.multipliers,
                a.algo.into(),
                &config,
                a.instance_seed,
            )?;
            writeln!(out, "multiplier,s_k,threshold")?;
            for (m, (s, t)) in a.multipliers.iter().zip(&study.points) {
                writeln!(out, "{m},{s},{t}")?;
            }
            match study.fit {
                LinearFit::Fit {
                    slope,
                    intercept,
                    pearson_r,
                } => writeln!(out, "# slope={slope} intercept={intercept} pearson_r={pearson_r}")?,
                LinearFit::Degenerate => writeln!(out, "# degenerate fit: zero variance, pearson_r undefined")?,
            }
        }
        Command::Lowerbound(a) => {
            let mut rows = vec![lowerbounds::CSV_HEADER.to_string()];
            for &sigma in &a.sigma {
                match a.game {
                    GameArg::K => {
                        for &k in &a.k {
                            let r = lowerbounds::swap_test_experiment_k(k, sigma, a.trials, a.seed)?;
                            rows.push(lowerbounds::csv_row(&r)?);
                        }
                    }
                    GameArg::Eps => {
                        for &eps in &a.eps {
                            let k = a.k.first().copied().unwrap_or(1);
                            let r = lowerbounds::swap_test_experiment_eps(k, sigma, eps, a.trials, a.seed)?;
                            rows.push(lowerbounds::csv_row(&r)?);
                        }
                    }
                }
            }
            let text = rows.join("\n") + "\n";
            match &a.output {
                Some(p) => std::fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Ingest(a) => ingest(a, out)?,
        Command::Info(a) => info(a, out)?,
    }
    Ok(())
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<()> {
    let file = container::load(&a.input)?;
    let k = a.k.unwrap_or(file.latent.k());
    let matrix = file.noisy.as_ref().map_or(file.latent.b(), |nz| nz.a());
    if let Some(s) = a.sigma {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::param("sigma", "must be finite and nonnegative"));
        }
    }
    let alg: Algorithm = a.algo.into();
    let answer = alg.solve(matrix, k)?;
    writeln!(out, "{}", answer.index + 1)?;
    if let Some(sigma) = a.sigma {
        let est = algorithms::estimated_sq_distances(matrix, k, sigma)?;
        writeln!(out, "point,estimated_sq_distance")?;
        for (j, e) in est.iter().enumerate() {
            writeln!(out, "{},{e}", j + 1)?;
        }
        if let Some(count) = a.knn {
            let near = algorithms::knn(matrix, k, sigma, count)?;
            let ids: Vec<String> = near.iter().map(|j| (j + 1).to_string()).collect();
            writeln!(out, "knn,{}", ids.join(" "))?;
        }
    } else if a.knn.is_some() {
        return Err(Error::param("knn", "requires --sigma"));
    }
    Ok(())
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let load = |p: &Path| match a.format {
        FormatArg::Glove => ingest::load_glove(p),
        FormatArg::Mnist => ingest::load_mnist_idx(p, a.limit),
    };
    let params = PreprocessParams::new(a.n, a.k, a.eps, a.count);
    let raw = load(&a.input)?;
    let insts = match &a.queries {
        Some(q) => ingest::preprocess_with_queries(&raw, &load(q)?, &params, a.seed)?,
        None => ingest::preprocess(&raw, &params, a.seed)?,
    };
    std::fs::create_dir_all(&a.out_dir)?;
    for (i, inst) in insts.iter().enumerate() {
        debug_assert!(model::verify_gap(inst));
        container::save(a.out_dir.join(format!("query-{:04}.snns", i + 1)), inst, None)?;
    }
    writeln!(out, "wrote {} instances to {}", insts.len(), a.out_dir.display())?;
    Ok(())
}

fn info(a: InfoArgs, out: &mut dyn Write) -> Result<()> {
    let file = container::load(&a.input)?;
    let inst = &file.latent;
    let report = theorem_sigma_cap(inst)?;
    let sigma = a.sigma.or(file.noisy.as_ref().map(|nz| nz.sigma()));
    let regime = sigma.map(|s| classify_regime(s, inst.d(), inst.k()));
    if a.json {
        let regime_json = match (sigma, regime) {
            (Some(s), Some(r)) => format!(",\"sigma\":{s},\"regime\":\"{r}\""),
            _ => String::new(),
        };
        writeln!(
            out,
            "{{\"n\":{},\"d\":{},\"k\":{},\"epsilon\":{},\"nn_index\":{},\"report\":{}{regime_json}}}",
            inst.n(),
            inst.d(),
            inst.k(),
            inst.epsilon(),
            inst.nn_index() + 1,
            report.to_json()
        )?;
    } else {
        writeln!(
            out,
            "n={} d={} k={} eps={} nn_index={}",
            inst.n(),
            inst.d(),
            inst.k(),
            inst.epsilon(),
            inst.nn_index() + 1
        )?;
        writeln!(out, "{}", crate::thresholds::ThresholdReport::CSV_HEADER)?;
        writeln!(out, "{}", report.to_csv_row())?;
        if let (Some(s), Some(r)) = (sigma, regime) {
            writeln!(out, "sigma={s} regime={r}")?;
        }
    }
    Ok(())
}

use clap::{Args, Parser, Subcommand};
use stackiqa::evalkit::{
    cross_validate, report, single_metric_accuracy, subset_search, supporter_matrix, synthetic, CvConfig, SplitUnit,
    TiePolicy,
};
use stackiqa::metrics::{fit_pristine_model, MetricRegistry, NiqePristineModel};
use stackiqa::pairset::{load_image, load_manifest, write_manifest, PairRecord, PreferenceLabel, ScoreCache};
use stackiqa::scoring::score_pairs;
use stackiqa::stacker::{train_stack, FeatureSpec, StackHyper, StackModel};
use stackiqa::svm::SvmParams;
use stackiqa::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Stacked pairwise image quality assessment.
#[derive(Parser, Debug)]
#[command(name = "stackiqa", version, about, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pair manifest CSV (pair_id,ref_path,a_path,b_path,p_a)
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Score cache CSV (pair_id,side,metric_id,score); created when missing
    #[arg(long, global = true, value_name = "PATH")]
    cache: Option<PathBuf>,
    /// Directory receiving every output file
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for scoring and subset search [default: available parallelism]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// NIQE pristine model file [default: the bundled model]
    #[arg(long, global = true, value_name = "PATH")]
    niqe_model: Option<PathBuf>,
    /// Extra metric definitions CSV (metric_id,kind,polarity) added to the built-in registry
    #[arg(long, global = true, value_name = "PATH")]
    registry: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute native metrics (psnr, ssim, niqe) for pairs missing from the cache
    Score {
        /// Comma-separated native metric ids
        #[arg(long, value_delimiter = ',', required = true)]
        metrics: Vec<String>,
    },
    /// Merge externally computed scores (score cache CSV format) into the cache
    Ingest {
        /// Score CSV to merge
        file: PathBuf,
    },
    /// Train the stack on the manifest's non-tie pairs and write stack.model
    Train {
        /// Comma-separated metric ids forming the feature vector
        #[arg(long, value_delimiter = ',', default_value = "pieapp,niqe,topiq,hyperiqa")]
        metrics: Vec<String>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Predict every manifest pair with a trained model into predictions.csv
    Predict {
        /// Trained model file
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Single-metric accuracies (baselines.csv), optionally with the stack's random-split evaluation (cv_report.csv)
    Evaluate {
        /// Comma-separated metric ids
        #[arg(long, value_delimiter = ',', required = true)]
        metrics: Vec<String>,
        /// Also evaluate the stack of all listed metrics over repeated random splits
        #[arg(long)]
        cv: bool,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Evaluate every subset of a metric pool (subset_search.csv, subset_best.csv, subset_scatter.svg)
    Search {
        /// Comma-separated metric ids forming the pool
        #[arg(long, value_delimiter = ',', required = true)]
        pool: Vec<String>,
        /// Subset sizes, e.g. `1-4` or `1,2,4` [default: every size]
        #[arg(long)]
        sizes: Option<String>,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Supporter matrix of single-metric errors (supporters.csv, supporter_heatmap.svg)
    Supporters {
        /// Comma-separated metric ids
        #[arg(long, value_delimiter = ',', required = true)]
        metrics: Vec<String>,
        /// Keep tie pairs; they count as errors of every metric
        #[arg(long)]
        include_ties: bool,
    },
    /// Fit a NIQE pristine model from sharp images and write niqe_pristine.model
    FitNiqe {
        /// Pristine images (PNG or PNM)
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Patch edge length in pixels (even, at least 8)
        #[arg(long, default_value_t = 96)]
        patch_size: usize,
        /// Keep patches sharper than this fraction of the sharpest patch of each image
        #[arg(long, default_value_t = 0.75)]
        sharpness_fraction: f64,
    },
    /// Write a synthetic dataset (manifest.csv, scores.csv, metrics.csv) with six complementary metrics
    Synth {
        /// Number of pairs
        #[arg(long, default_value_t = 500)]
        pairs: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct HyperArgs {
    /// SVM box constraint C
    #[arg(long = "c", default_value_t = SvmParams::DEFAULT_C)]
    c: f64,
    /// RBF gamma [default: 1 / (dim * mean feature variance) after standardization]
    #[arg(long)]
    gamma: Option<f64>,
    /// KKT tolerance of the solver
    #[arg(long, default_value_t = SvmParams::DEFAULT_TOL)]
    tol: f64,
    /// Stop after this many consecutive sweeps without progress
    #[arg(long, default_value_t = SvmParams::DEFAULT_MAX_PASSES)]
    max_passes: usize,
    /// Train without adding the A/B-swapped copy of every pair
    #[arg(long)]
    no_swap_augment: bool,
}

impl HyperArgs {
    fn hyper(&self) -> StackHyper {
        StackHyper {
            c: self.c,
            gamma: self.gamma,
            tol: self.tol,
            max_passes: self.max_passes,
            swap_augment: !self.no_swap_augment,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ProtocolArgs {
    /// Number of random train/test cycles
    #[arg(long, default_value_t = 5)]
    cycles: usize,
    /// Fraction of split units used for training
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Split by `pair` or keep every `reference` image's pairs together
    #[arg(long, default_value = "pair", value_parser = ["pair", "reference"])]
    split_unit: String,
    /// Keep tie pairs; they count as errors
    #[arg(long)]
    include_ties: bool,
}

impl ProtocolArgs {
    fn config(&self, seed: u64) -> CvConfig {
        CvConfig {
            cycles: self.cycles,
            train_fraction: self.train_fraction,
            seed,
            split_unit: if self.split_unit == "reference" {
                SplitUnit::ByReference
            } else {
                SplitUnit::ByPair
            },
            ties: ties(self.include_ties),
        }
    }
}

fn ties(include: bool) -> TiePolicy {
    if include {
        TiePolicy::CountAsWrong
    } else {
        TiePolicy::Exclude
    }
}

/// Failures not produced by the library itself.
enum Failure {
    Usage(String),
    Lib(Error),
    Thread(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

impl Global {
    fn manifest(&self) -> Result<Vec<PairRecord>, Failure> {
        let path = self
            .manifest
            .as_ref()
            .ok_or_else(|| Failure::Usage("this command needs --manifest".into()))?;
        Ok(load_manifest(path)?)
    }

    fn cache_path(&self) -> Result<&Path, Failure> {
        self.cache
            .as_deref()
            .ok_or_else(|| Failure::Usage("this command needs --cache".into()))
    }

    fn cache(&self) -> Result<ScoreCache, Failure> {
        Ok(ScoreCache::load(self.cache_path()?)?)
    }

    fn registry(&self) -> Result<MetricRegistry, Failure> {
        let mut reg = MetricRegistry::builtin();
        if let Some(path) = &self.registry {
            reg.extend_from_file(path)?;
        }
        Ok(reg)
    }

    fn niqe_model(&self) -> Result<NiqePristineModel, Failure> {
        Ok(match &self.niqe_model {
            Some(path) => NiqePristineModel::load(path)?,
            None => NiqePristineModel::builtin(),
        })
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| Failure::Lib(io_error(&self.out, e)))?;
        Ok(self.out.join(name))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> CmdResult {
        let path = self.out_file(name)?;
        fs::write(&path, bytes).map_err(|e| Failure::Lib(io_error(&path, e)))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(Failure::Usage("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(jobs);
        }
        builder.build().map_err(|e| Failure::Thread(e.to_string()))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn render<F>(f: F) -> Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut Vec<u8>) -> stackiqa::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn parse_sizes(spec: Option<&str>, pool: usize) -> Result<Vec<usize>, Failure> {
    let Some(spec) = spec else {
        return Ok((1..=pool).collect());
    };
    let bad = || Failure::Usage(format!("invalid --sizes `{spec}`; use forms like `1-4` or `1,2,4`"));
    let mut sizes = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            sizes.extend(lo..=hi);
        } else {
            sizes.push(part.parse().map_err(|_| bad())?);
        }
    }
    sizes.sort_unstable();
    sizes.dedup();
    if let Some(&k) = sizes.iter().find(|&&k| k == 0 || k > pool) {
        return Err(Failure::Usage(format!("subset size {k} outside 1..={pool}")));
    }
    Ok(sizes)
}

fn cmd_score(g: &Global, metrics: &[String]) -> CmdResult {
    let registry = g.registry()?;
    for id in metrics {
        registry.require(id)?;
    }
    let pairs = g.manifest()?;
    let path = g.cache_path()?;
    let mut cache = ScoreCache::load_or_empty(path)?;
    let model = g.niqe_model()?;
    let added = g
        .pool()?
        .install(|| score_pairs(&pairs, metrics, &registry, &mut cache, &model))?;
    cache.save(path)?;
    println!("scored {added} new entries into {}", path.display());
    Ok(())
}

fn cmd_ingest(g: &Global, file: &Path) -> CmdResult {
    let path = g.cache_path()?;
    let mut cache = ScoreCache::load_or_empty(path)?;
    let reader = fs::File::open(file).map_err(|e| Failure::Lib(io_error(file, e)))?;
    let added = cache.ingest(reader)?;
    cache.save(path)?;
    println!("ingested {added} new entries into {}", path.display());
    Ok(())
}

fn cmd_train(g: &Global, metrics: &[String], hyper: &HyperArgs) -> CmdResult {
    let spec = FeatureSpec::new(metrics, &g.registry()?)?;
    let pairs = g.manifest()?;
    let cache = g.cache()?;
    let model = train_stack(&pairs, &spec, &cache, &hyper.hyper(), g.seed)?;
    let correct = pairs
        .iter()
        .filter(|p| p.label() != PreferenceLabel::Tie)
        .map(|p| model.predict_pair(p, &cache).map(|l| l == p.label()))
        .collect::<stackiqa::Result<Vec<bool>>>()?;
    let hits = correct.iter().filter(|c| **c).count();
    println!(
        "trained on {} pairs with {} support vectors; training accuracy {:.4}",
        correct.len(),
        model.svm().coeffs().len(),
        hits as f64 / correct.len() as f64
    );
    g.write("stack.model", model.to_text().as_bytes())
}

fn cmd_predict(g: &Global, model_path: &Path) -> CmdResult {
    let model = StackModel::load(model_path)?;
    let pairs = g.manifest()?;
    let cache = g.cache()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let (mut labelled, mut hits) = (0usize, 0usize);
    let csv_err = |e: csv::Error| Failure::Usage(format!("csv: {e}"));
    w.write_record(["pair_id", "decision_value", "prediction"]).map_err(csv_err)?;
    for pair in &pairs {
        let d = model.decision_pair(pair, &cache)?;
        let label = if d >= 0.0 { PreferenceLabel::PreferA } else { PreferenceLabel::PreferB };
        if pair.label() != PreferenceLabel::Tie {
            labelled += 1;
            hits += usize::from(label == pair.label());
        }
        w.write_record([pair.pair_id.clone(), format!("{d:.17e}"), label.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(format!("csv: {e}")))?;
    if labelled > 0 {
        println!("accuracy {:.4} on {labelled} labelled pairs", hits as f64 / labelled as f64);
    }
    g.write("predictions.csv", &bytes)
}

fn cmd_evaluate(g: &Global, metrics: &[String], cv: bool, protocol: &ProtocolArgs, hyper: &HyperArgs) -> CmdResult {
    let registry = g.registry()?;
    let descs = metrics
        .iter()
        .map(|id| registry.require(id))
        .collect::<stackiqa::Result<Vec<_>>>()?;
    let pairs = g.manifest()?;
    let cache = g.cache()?;
    let policy = ties(protocol.include_ties);
    let rows = descs
        .iter()
        .map(|d| single_metric_accuracy(d, &pairs, &cache, policy))
        .collect::<stackiqa::Result<Vec<_>>>()?;
    for r in &rows {
        println!("{:<14} {:.4} ({}/{})", r.metric_id, r.accuracy, r.correct, r.n);
    }
    g.write("baselines.csv", &render(|b| report::write_baselines(&rows, b))?)?;
    if cv {
        let spec = FeatureSpec::new(metrics, &registry)?;
        let rep = cross_validate(&pairs, &spec, &cache, &protocol.config(g.seed), &hyper.hyper())?;
        println!("stack median accuracy {:.4} over {} cycles", rep.median_accuracy, rep.cycles.len());
        g.write("cv_report.csv", &render(|b| report::write_cv_report(&rep, b))?)?;
    }
    Ok(())
}

fn cmd_search(g: &Global, pool: &[String], sizes: Option<&str>, protocol: &ProtocolArgs, hyper: &HyperArgs) -> CmdResult {
    let registry = g.registry()?;
    for id in pool {
        registry.require(id)?;
    }
    let sizes = parse_sizes(sizes, pool.len())?;
    let pairs = g.manifest()?;
    let cache = g.cache()?;
    let config = protocol.config(g.seed);
    let hyper = hyper.hyper();
    let search = g
        .pool()?
        .install(|| subset_search(pool, &sizes, &pairs, &cache, &config, &hyper))?;
    for best in search.best_per_size() {
        println!("size {:>2}: {:.4} {}", best.size(), best.median_accuracy(), best.metric_ids.join("+"));
    }
    g.write("subset_search.csv", &render(|b| report::write_subset_search(&search, b))?)?;
    g.write("subset_best.csv", &render(|b| report::write_subset_best(&search, b))?)?;
    g.write("subset_scatter.svg", report::subset_scatter_svg(&search).as_bytes())
}

fn cmd_supporters(g: &Global, metrics: &[String], include_ties: bool) -> CmdResult {
    let registry = g.registry()?;
    let descs = metrics
        .iter()
        .map(|id| registry.require(id))
        .collect::<stackiqa::Result<Vec<_>>>()?;
    let pairs = g.manifest()?;
    let cache = g.cache()?;
    let matrix = supporter_matrix(&descs, &pairs, &cache, ties(include_ties))?;
    g.write("supporters.csv", &render(|b| report::write_supporters(&matrix, b))?)?;
    g.write("supporter_heatmap.svg", report::supporter_heatmap_svg(&matrix).as_bytes())
}

fn cmd_fit_niqe(g: &Global, images: &[PathBuf], patch_size: usize, fraction: f64) -> CmdResult {
    let corpus = images
        .iter()
        .map(load_image)
        .collect::<stackiqa::Result<Vec<_>>>()?;
    let model = fit_pristine_model(&corpus, patch_size, fraction)?;
    g.write("niqe_pristine.model", model.to_text().as_bytes())
}

fn cmd_synth(g: &Global, n_pairs: usize) -> CmdResult {
    if n_pairs == 0 {
        return Err(Failure::Usage("--pairs must be at least 1".into()));
    }
    let ds = synthetic::generate(n_pairs, g.seed);
    g.write("manifest.csv", &render(|b| write_manifest(&ds.pairs, b))?)?;
    g.write("scores.csv", &render(|b| ds.cache.write(b))?)?;
    g.write("metrics.csv", &render(|b| MetricRegistry::write_definitions(&ds.metrics, b))?)
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::Score { metrics } => cmd_score(g, metrics),
        Command::Ingest { file } => cmd_ingest(g, file),
        Command::Train { metrics, hyper } => cmd_train(g, metrics, hyper),
        Command::Predict { model } => cmd_predict(g, model),
        Command::Evaluate {
            metrics,
            cv,
            protocol,
            hyper,
        } => cmd_evaluate(g, metrics, *cv, protocol, hyper),
        Command::Search {
            pool,
            sizes,
            protocol,
            hyper,
        } => cmd_search(g, pool, sizes.as_deref(), protocol, hyper),
        Command::Supporters { metrics, include_ties } => cmd_supporters(g, metrics, *include_ties),
        Command::FitNiqe {
            images,
            patch_size,
            sharpness_fraction,
        } => cmd_fit_niqe(g, images, *patch_size, *sharpness_fraction),
        Command::Synth { pairs } => cmd_synth(g, *pairs),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_numeric() => EXIT_NUMERIC,
        Error::InvalidArgument(_) | Error::UnknownMetric(_) | Error::DuplicateMetric(_) | Error::ExternalMetric(_) => {
            EXIT_USAGE
        }
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Thread(msg)) => {
            eprintln!("error: cannot start worker threads: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stfnn::fnn::TrainConfig;
use stfnn::harness::experiment::{DataConfig, EstimatorEntry, Protocol};
use stfnn::harness::{
    evaluate, export_dataset, ingest, load_model, merge_results, predict_files, run_experiment, save_model,
    write_results, DatasetManifest, ExperimentConfig, ResultRow, Selection,
};
use stfnn::models::{default_bandwidth_grid, select_bandwidth, TrainedModel};
use stfnn::simgen::{self, Scenario, SimConfig};
use stfnn::{Error, Result};

#[derive(Parser)]
#[command(name = "stfnn", version, about = "Spatio-temporal functional regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset as CSV files plus a manifest.
    Simulate {
        /// sim1 (heterogeneity) or sim2 (dependency).
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Cross-validate estimators and print or write a results table.
    Cv(CvArgs),
    /// Fit one estimator on a dataset and save it.
    Train(TrainArgs),
    /// Predict responses for new curves and locations.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        locations: PathBuf,
        /// Output CSV (`sample_id,prediction`); stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge result tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Network: number of functional neurons.
    #[arg(long)]
    neurons: Option<usize>,
    /// Network: hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    train_seed: Option<u64>,
    #[arg(long)]
    fve_cutoff: Option<f64>,
}

#[derive(Args)]
struct CvArgs {
    /// Experiment config (TOML); other flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "scenario")]
    manifest: Option<PathBuf>,
    /// Simulated data instead of a manifest: sim1 or sim2.
    #[arg(long)]
    scenario: Option<String>,
    /// Estimator labels such as FLM, FNN_SP, GWFNN_Gaussian, SARFNN_Nearest.
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Fixed bandwidth for every kernel estimator (selected by inner CV otherwise).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    loocv: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    inner_folds: Option<usize>,
    /// Choose the bandwidth once on all data instead of inside every fold.
    #[arg(long)]
    global_selection: bool,
    /// Write results.csv and run_log.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "scenario")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Seed of the simulation and of bandwidth selection.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model_out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

fn base_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig {
            name: None,
            seed: 0,
            data: DataConfig {
                scenario: None,
                manifest: None,
                sim_seed: None,
                sigma: None,
                rho: None,
            },
            protocol: Default::default(),
            network: Default::default(),
            training: TrainConfig::default(),
            fve_cutoff: stfnn::models::DEFAULT_FVE_CUTOFF,
            grid: None,
            estimators: Vec::new(),
            base_dir: PathBuf::new(),
        }),
    }
}

fn apply_data(config: &mut ExperimentConfig, manifest: &Option<PathBuf>, scenario: &Option<String>) {
    if let Some(m) = manifest {
        config.data.manifest = Some(std::path::absolute(m).unwrap_or_else(|_| m.clone()));
        config.data.scenario = None;
    }
    if let Some(s) = scenario {
        config.data.scenario = Some(s.clone());
        config.data.manifest = None;
    }
}

fn apply_model(config: &mut ExperimentConfig, m: &ModelArgs) {
    if let Some(n) = m.neurons {
        config.network.functional_neurons = n;
    }
    if let Some(h) = &m.hidden {
        config.network.hidden = h.clone();
    }
    if let Some(i) = m.iterations {
        config.training.max_iterations = i;
    }
    if let Some(lr) = m.learning_rate {
        config.training.learning_rate = lr;
    }
    if let Some(s) = m.train_seed {
        config.training.seed = s;
    }
    if let Some(f) = m.fve_cutoff {
        config.fve_cutoff = f;
    }
}

fn print_rows(rows: &[ResultRow]) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}%"));
    println!("{:<10} {:<12} {:>10} {:>8} {:>10} {:>10}", "estimator", "kernel", "bandwidth", "rmse", "imp_flm", "imp_fnn");
    for r in rows {
        println!(
            "{:<10} {:<12} {:>10} {:>8.4} {:>10} {:>10}",
            r.estimator,
            if r.kernel.is_empty() { "-" } else { &r.kernel },
            r.bandwidth.map_or("-".to_string(), |h| format!("{h:.4}")),
            r.rmse,
            fmt(r.imp_vs_flm),
            fmt(r.imp_vs_fnn)
        );
    }
}

fn cv(args: CvArgs) -> Result<()> {
    let mut config = base_config(args.config.as_ref())?;
    apply_data(&mut config, &args.manifest, &args.scenario);
    apply_model(&mut config, &args.model);
    if !args.estimators.is_empty() {
        config.estimators = args
            .estimators
            .iter()
            .map(|e| EstimatorEntry::Detailed {
                name: e.clone(),
                bandwidth: None,
                grid: None,
            })
            .collect();
    }
    if let Some(h) = args.bandwidth {
        for e in &mut config.estimators {
            let name = e.name().to_string();
            if stfnn::EstimatorSpec::from_label(&name)?.kernel_family.is_some() {
                *e = EstimatorEntry::Detailed {
                    name,
                    bandwidth: Some(h),
                    grid: None,
                };
            }
        }
    }
    if let Some(k) = args.folds {
        config.protocol.folds = k;
    }
    if args.loocv {
        config.protocol.cv = Protocol::Loocv;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(k) = args.inner_folds {
        config.protocol.inner_folds = k;
    }
    if args.global_selection {
        config.protocol.selection = Selection::Global;
    }
    config.validate()?;
    let out = match &args.out_dir {
        Some(dir) => run_experiment(&config, dir)?,
        None => evaluate(&config, &config.load_dataset()?)?,
    };
    print_rows(&out.rows);
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = base_config(args.config.as_ref())?;
    apply_data(&mut config, &args.manifest, &args.scenario);
    apply_model(&mut config, &args.model);
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let entry = EstimatorEntry::Detailed {
        name: args.estimator.clone(),
        bandwidth: args.bandwidth,
        grid: None,
    };
    config.estimators = vec![entry.clone()];
    config.validate()?;
    let dataset = config.load_dataset()?;
    let features: Vec<String> = match &config.data.manifest {
        Some(m) => {
            let path = if m.is_absolute() { m.clone() } else { config.base_dir.join(m) };
            DatasetManifest::load(&path)?.features
        }
        None => (1..=dataset.n_features()).map(|r| format!("x{r}")).collect(),
    };
    let mut spec = config.estimator_spec(&entry)?;
    if spec.needs_bandwidth() {
        let family = spec.kernel_family.expect("kernel estimators have a family");
        let grid = match &config.grid {
            Some(g) => g.clone(),
            None => default_bandwidth_grid(dataset.locations(), family)?,
        };
        let folds = config.protocol.inner_folds.min(dataset.len());
        let chosen = select_bandwidth(&dataset, &spec, &grid, folds, config.seed)?;
        eprintln!("selected bandwidth {}", chosen.bandwidth);
        spec = spec.with_bandwidth(chosen.bandwidth)?;
    }
    let model = TrainedModel::fit(&dataset, &spec)?;
    save_model(&args.model_out, &model, &features)?;
    eprintln!("wrote {}", args.model_out.display());
    Ok(())
}

fn simulate(scenario: Scenario, seed: u64, out_dir: PathBuf, sigma: Option<f64>, rho: Option<f64>) -> Result<()> {
    let mut sim = SimConfig::new(scenario, seed);
    if let Some(s) = sigma {
        sim.sigma = s;
    }
    if let Some(r) = rho {
        sim.rho = r;
    }
    let dataset = simgen::generate(&sim)?;
    export_dataset(&dataset, &out_dir, &["x1".to_string()])?;
    // Read back so the written files are known to ingest.
    ingest(&DatasetManifest::load(&out_dir.join("manifest.toml"))?)?;
    eprintln!("wrote {} samples to {}", dataset.len(), out_dir.display());
    Ok(())
}

fn predict(model: PathBuf, curves: PathBuf, locations: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let file = load_model(&model)?;
    let preds = predict_files(&file, &curves, &locations)?;
    let mut text = String::from("sample_id,prediction\n");
    for (id, y) in preds {
        text.push_str(&format!("{id},{y}\n"));
    }
    match out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn report(inputs: Vec<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let rows = merge_results(&inputs)?;
    match out {
        Some(p) => write_results(&p, &rows),
        None => {
            print_rows(&rows);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out_dir,
            sigma,
            rho,
        } => simulate(scenario, seed, out_dir, sigma, rho),
        Command::Cv(args) => cv(args),
        Command::Train(args) => train(args),
        Command::Predict {
            model,
            curves,
            locations,
            out,
        } => predict(model, curves, locations, out),
        Command::Report { inputs, out } => report(inputs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

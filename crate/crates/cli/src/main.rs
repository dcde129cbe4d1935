//! `apsel`: budget-constrained access-point selection from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apsel_core::analysis;
use apsel_core::anneal::{self, AnnealConfig, SelectionResult};
use apsel_core::dataset::{self, FingerprintDataset};
use apsel_core::experiment::{
    self, DatasetSource, ExperimentConfig, Method, SweepAxis, SweepParameter,
};
use apsel_core::localize::{self, LocalizerConfig};
use apsel_core::qubo::{self, QuboModel};
use apsel_core::synth::SyntheticConfig;
use apsel_core::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "apsel", version, about = "Budget-constrained WiFi AP selection via QUBO annealing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and normalize a dataset; write the canonical dump.
    Ingest(Params),
    /// Compute importance scores and the redundancy matrix.
    Analyze(Params),
    /// Build the QUBO model and write it as JSON.
    Build(Params),
    /// Sample a QUBO (from --model or built from --dataset) and select APs.
    Solve(Params),
    /// Localize the test split with a selection (or all APs).
    Evaluate(Params),
    /// Run the full experiment over all trials and samplers.
    Run(Params),
    /// Run the experiment once per value of a swept parameter.
    Sweep(Params),
    /// Write a synthetic UJIIndoorLoc-shaped dataset as CSV.
    Synth(Params),
}

#[derive(Args, Clone, Default)]
struct Params {
    /// CSV file(s) in UJIIndoorLoc layout, or `synthetic[:SEED]`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    dataset: Vec<String>,
    /// Experiment config or manifest JSON; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["entropy", "variance", "average", "max"])]
    metric: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "budget-k")]
    budget_k: Option<usize>,
    /// One or more of sa, sqa, exact, all-aps.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    sampler: Vec<String>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    trotter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long = "floor-height")]
    floor_height: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// QUBO JSON for `solve`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Selection JSON for `evaluate`.
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Swept parameter for `sweep` (alpha, eta, k, metric, beta, gamma, sweeps, reads, trotter, knn).
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated values for `sweep`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    values: Vec<String>,
    /// Sample count for `synth`.
    #[arg(long)]
    samples: Option<usize>,
}

impl Params {
    fn experiment_config(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => experiment::load_config(p)?,
            None => ExperimentConfig::default(),
        };
        if !self.dataset.is_empty() {
            c.dataset = parse_dataset(&self.dataset)?;
        } else if self.config.is_none() {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: "--dataset is required (a CSV path or `synthetic`)".into(),
            });
        }
        if let Some(m) = &self.metric {
            c.metric = m.parse()?;
        }
        set(&mut c.alpha, self.alpha);
        set(&mut c.eta, self.eta);
        set(&mut c.k, self.budget_k);
        if !self.sampler.is_empty() {
            c.samplers = self
                .sampler
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()?;
        }
        set(&mut c.anneal.num_reads, self.reads);
        set(&mut c.anneal.num_sweeps, self.sweeps);
        set(&mut c.anneal.beta, self.beta);
        set(&mut c.anneal.gamma, self.gamma);
        set(&mut c.anneal.trotter_slices, self.trotter);
        set(&mut c.seed, self.seed);
        set(&mut c.trials, self.trials);
        set(&mut c.test_fraction, self.test_fraction);
        set(&mut c.localizer.k_neighbors, self.knn);
        set(&mut c.localizer.floor_height_m, self.floor_height);
        if let Some(p) = &self.param {
            let parameter: SweepParameter = p.parse()?;
            c.sweep = Some(SweepAxis {
                parameter,
                values: self.values.clone(),
            });
        }
        c.validate()?;
        Ok(c)
    }

    fn anneal_config(&self, c: &ExperimentConfig) -> AnnealConfig {
        AnnealConfig {
            seed: c.seed,
            ..c.anneal
        }
    }

    fn out_dir(&self) -> Result<PathBuf, Error> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_dataset(items: &[String]) -> Result<DatasetSource, Error> {
    if let [only] = items {
        if let Some(rest) = only.strip_prefix("synthetic") {
            let mut s = SyntheticConfig::default();
            if let Some(seed) = rest.strip_prefix(':') {
                s.seed = seed.parse().map_err(|_| Error::InvalidParameter {
                    name: "dataset",
                    reason: format!("bad synthetic seed {seed:?}"),
                })?;
            } else if !rest.is_empty() {
                return Err(Error::InvalidParameter {
                    name: "dataset",
                    reason: format!("unrecognized dataset {only:?}"),
                });
            }
            return Ok(DatasetSource::Synthetic(s));
        }
    }
    Ok(DatasetSource::Csv(items.iter().map(PathBuf::from).collect()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    experiment::write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

fn print(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
}

fn load(c: &ExperimentConfig) -> Result<FingerprintDataset, Error> {
    experiment::load_dataset(c)
}

fn cmd_ingest(p: &Params) -> Result<(), Error> {
    let c = p.experiment_config()?;
    let d = load(&c)?;
    let out = p.out_dir()?;
    let csv = out.join("dataset.csv");
    let sidecar = d.dump(&csv, &c.ingest)?;
    let mut floors: Vec<u32> = d.floor().to_vec();
    floors.sort_unstable();
    floors.dedup();
    print(json!({
        "m": d.m(),
        "n": d.n(),
        "floors": floors,
        "never_detected": (0..d.n()).filter(|&i| d.never_detected(i)).count(),
        "csv": csv,
        "sidecar": sidecar,
    }));
    Ok(())
}

fn cmd_analyze(p: &Params) -> Result<(), Error> {
    let c = p.experiment_config()?;
    let d = load(&c)?;
    let out = p.out_dir()?;
    let imp = analysis::importance(&d, c.metric)?;
    let red = analysis::redundancy(&d, &imp)?;
    let imp_path = out.join(format!("importance_{}.csv", c.metric));
    let red_path = out.join("redundancy.csv");
    imp.write_csv(&imp_path, d.ap_ids())?;
    red.write_csv(&red_path, d.ap_ids())?;
    print(json!({
        "metric": c.metric,
        "n": d.n(),
        "active": imp.num_active(),
        "importance": imp_path,
        "redundancy": red_path,
    }));
    Ok(())
}

fn build_model(c: &ExperimentConfig, d: &FingerprintDataset) -> Result<QuboModel, Error> {
    let imp = analysis::importance(d, c.metric)?;
    let red = analysis::redundancy(d, &imp)?;
    qubo::build(&imp, &red, c.alpha, c.eta, c.k)
}

fn cmd_build(p: &Params) -> Result<(), Error> {
    let c = p.experiment_config()?;
    let d = load(&c)?;
    let model = build_model(&c, &d)?;
    let path = p.out_dir()?.join("qubo.json");
    model.save_json(&path)?;
    print(json!({ "n": model.n(), "offset": model.offset(), "model": path }));
    Ok(())
}

fn cmd_solve(p: &Params) -> Result<(), Error> {
    let (c, model) = match &p.model {
        Some(path) => {
            let mut q = p.clone();
            if q.dataset.is_empty() && q.config.is_none() {
                q.dataset = vec!["synthetic".into()];
            }
            (q.experiment_config()?, QuboModel::load_json(path)?)
        }
        None => {
            let c = p.experiment_config()?;
            let d = load(&c)?;
            let m = build_model(&c, &d)?;
            (c, m)
        }
    };
    let method = *c.samplers.first().unwrap_or(&Method::Sqa);
    let sampler = method.sampler().ok_or_else(|| Error::InvalidParameter {
        name: "sampler",
        reason: "solve needs sa, sqa or exact".into(),
    })?;
    let acfg = p.anneal_config(&c);
    let samples = anneal::sample(&model, sampler, &acfg)?;
    let mut sel = SelectionResult::from_samples(&samples);
    let reference = if model.n() <= qubo::BRUTE_FORCE_LIMIT {
        qubo::brute_force(&model)?.energy
    } else {
        sel.best_energy
    };
    sel.tts_seconds = anneal::tts(&samples, reference, c.target_probability)?;
    let out = p.out_dir()?;
    write_json(&out.join(format!("samples_{sampler}.json")), &samples)?;
    if sel.selected.is_empty() {
        return Err(Error::Solver(format!("{sampler} selected no access points")));
    }
    write_json(&out.join(format!("selection_{sampler}.json")), &sel)?;
    print(serde_json::to_value(&sel)?);
    Ok(())
}

fn cmd_evaluate(p: &Params) -> Result<(), Error> {
    let c = p.experiment_config()?;
    let d = load(&c)?;
    let split = dataset::split(&d, c.test_fraction, c.seed)?;
    let (label, subset) = match &p.selection {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let sel: SelectionResult = serde_json::from_str(&text)?;
            (sel.sampler.to_string(), sel.selected)
        }
        None => ("all-aps".to_string(), (0..d.n()).collect()),
    };
    let lcfg: LocalizerConfig = c.localizer;
    let report = localize::evaluate(&split, &subset, &lcfg)?;
    let out = p.out_dir()?;
    write_json(&out.join(format!("localization_{label}.json")), &report)?;
    report.write_csv(&out.join(format!("localization_{label}.csv")))?;
    print(json!({
        "mean_error_m": report.mean_error_m,
        "median_error_m": report.median_error_m,
        "p95_error_m": report.p95_error_m,
        "floor_accuracy": report.floor_accuracy,
        "num_aps_used": report.num_aps_used,
        "reduction_fraction": report.reduction_fraction,
        "floor_classifier": report.floor_classifier,
    }));
    Ok(())
}

fn cmd_run(p: &Params, sweeping: bool) -> Result<(), Error> {
    let c = p.experiment_config()?;
    if sweeping && c.sweep.is_none() {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "--param and --values are required".into(),
        });
    }
    let outcome = if sweeping {
        experiment::sweep(&c)?
    } else {
        experiment::run(&c)?
    };
    let out = p.out_dir()?;
    let manifest = experiment::write_outputs(&outcome, &out)?;
    if sweeping {
        let param = c.sweep.as_ref().map(|a| a.parameter.as_str()).unwrap_or("");
        print!(
            "{}",
            String::from_utf8_lossy(&experiment::sweep_csv(param, &outcome.aggregates)?)
        );
    } else {
        print!(
            "{}",
            String::from_utf8_lossy(&experiment::aggregate_csv(&outcome.aggregates)?)
        );
    }
    eprintln!(
        "wrote {} reproducible artifact(s) to {}",
        manifest.artifacts.len(),
        out.display()
    );
    Ok(())
}

fn cmd_synth(p: &Params) -> Result<(), Error> {
    let mut s = match p.dataset.first().map(|_| parse_dataset(&p.dataset)).transpose()? {
        Some(DatasetSource::Synthetic(s)) => s,
        _ => SyntheticConfig::default(),
    };
    set(&mut s.seed, p.seed);
    set(&mut s.samples, p.samples);
    let d = apsel_core::synth::generate(&s)?;
    let path = p.out_dir()?.join("synthetic.csv");
    d.write_csv(&path, &Default::default())?;
    print(json!({ "m": d.m(), "n": d.n(), "csv": path }));
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Ingest(p) => cmd_ingest(p),
        Command::Analyze(p) => cmd_analyze(p),
        Command::Build(p) => cmd_build(p),
        Command::Solve(p) => cmd_solve(p),
        Command::Evaluate(p) => cmd_evaluate(p),
        Command::Run(p) => cmd_run(p, false),
        Command::Sweep(p) => cmd_run(p, true),
        Command::Synth(p) => cmd_synth(p),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Solver => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = apsel_core::thread_pool().and_then(|pool| pool.install(|| dispatch(&cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

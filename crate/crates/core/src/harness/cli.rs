//! Command-line front end. Exit codes: 0 success, 1 bad input (flags,
//! configs, files, invalid models), 2 failure while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{load_codebook_file, load_model_file, resolve_models, ExperimentConfig, ExperimentKind, MethodKind, OutputFormat};
use super::results::{emit_results, render, summary_table, ResultSet};
use super::run::{run_experiment, train_nested};
use crate::analysis::{analysis_report, pattern_svd};
use crate::antenna_model::{load_model, save_model, synthesize_model, SynthesisSpec};
use crate::beamspace::isotropic_pattern;
use crate::codebook::save_codebook;
use crate::error::{Error, Result};
use crate::mimo_capacity::AllocationMode;

#[derive(Debug, Parser)]
#[command(name = "pixelcode", version, about = "Pixel antenna coding: models, codebooks, Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a random passive reciprocal model and write it as JSON.
    GenModel(GenModelArgs),
    /// Check a model file for reciprocity, passivity and finiteness.
    Validate(ValidateArgs),
    /// Monte Carlo SISO channel gain with optimized receive coding.
    SisoGain(SisoArgs),
    /// Train a codebook with the generalized Lloyd algorithm.
    TrainCodebook(TrainArgs),
    /// Monte Carlo MIMO capacity with joint transmit/receive coding.
    MimoCapacity(MimoArgs),
    /// Effective aerial degrees of freedom of a model.
    Eadof(EadofArgs),
    /// Pattern correlation of a codebook, with a Monte Carlo check.
    Correlation(CorrelationArgs),
}

#[derive(Debug, Args)]
struct GenModelArgs {
    /// Number of switches.
    #[arg(long)]
    q: usize,
    /// Number of sampled angles.
    #[arg(long, default_value_t = 72)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prescribed singular values of the pattern matrix, comma separated.
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    #[arg(long)]
    resistance_scale: Option<f64>,
    #[arg(long)]
    reactance_scale: Option<f64>,
    #[arg(long)]
    frequency: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
}

/// Model selection and run controls shared by the experiment commands.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use a synthetic model with this many switches instead of a file.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct TrainingArgs {
    #[arg(long)]
    training_size: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    i_max: Option<usize>,
}

#[derive(Debug, Args)]
struct SisoArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    training: TrainingArgs,
    /// sebo, exhaustive, or codebook (with --codebook).
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Train and evaluate codebooks of these sizes.
    #[arg(long, value_delimiter = ',')]
    m_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    training: TrainingArgs,
    /// Codebook size.
    #[arg(long)]
    m: usize,
}

#[derive(Debug, Args)]
struct MimoArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    model_t: Option<PathBuf>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_r: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// uniform, waterfilling, or both, comma separated.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    codebook_t: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    m_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct EadofArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    threshold: Option<f64>,
    /// Also report combiner residuals and correlation for this codebook.
    #[arg(long)]
    codebook: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelationArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Train a codebook of this size when no file is given.
    #[arg(long)]
    m: Option<usize>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenModel(a) => gen_model(a),
        Command::Validate(a) => validate(&a.model),
        Command::SisoGain(a) => {
            let mut cfg = base_config(&a.run, ExperimentKind::SisoGain)?;
            if cfg.kind != ExperimentKind::SisoGainCodebook {
                cfg.kind = ExperimentKind::SisoGain;
            }
            apply_training(&mut cfg, &a.training);
            if let Some(m) = &a.method {
                cfg.method = m.parse()?;
            }
            if let Some(p) = a.codebook {
                cfg.codebook = Some(p);
                if a.method.is_none() {
                    cfg.method = MethodKind::Codebook;
                }
            }
            if let Some(m) = a.m_sizes {
                cfg.m_sizes = m;
                cfg.kind = ExperimentKind::SisoGainCodebook;
            }
            run_and_emit(&cfg)
        }
        Command::TrainCodebook(a) => train(a),
        Command::MimoCapacity(a) => {
            let mut cfg = base_config(&a.run, ExperimentKind::MimoCapacity)?;
            cfg.kind = ExperimentKind::MimoCapacity;
            apply_training(&mut cfg, &a.training);
            if a.model_t.is_some() {
                cfg.model_t = a.model_t;
            }
            if let Some(v) = a.n_t {
                cfg.n_t = v;
            }
            if let Some(v) = a.n_r {
                cfg.n_r = v;
            }
            if let Some(v) = a.snr_db {
                cfg.snr_db = v;
            }
            if let Some(modes) = a.modes {
                cfg.modes = modes.iter().map(|m| m.parse::<AllocationMode>()).collect::<Result<_>>()?;
            }
            if let Some(m) = &a.method {
                cfg.method = m.parse()?;
            }
            if a.codebook.is_some() {
                cfg.codebook = a.codebook;
            }
            if a.codebook_t.is_some() {
                cfg.codebook_t = a.codebook_t;
            }
            if let Some(m) = a.m_sizes {
                cfg.m_sizes = m;
            }
            run_and_emit(&cfg)
        }
        Command::Eadof(a) => {
            let mut cfg = base_config(&a.run, ExperimentKind::Eadof)?;
            cfg.kind = ExperimentKind::Eadof;
            if let Some(t) = a.threshold {
                cfg.threshold = t;
            }
            if a.codebook.is_some() {
                cfg.codebook = a.codebook;
            }
            cfg.validate()?;
            let (_, model) = resolve_models(&cfg)?;
            let basis = pattern_svd(&model, cfg.threshold)?;
            println!("eadof: {}", basis.eadof);
            println!("threshold: {}", cfg.threshold);
            if cfg.output.is_some() {
                run_and_emit(&cfg)?;
            } else if let Some(path) = &cfg.codebook {
                let codebook = load_codebook_file(path)?;
                let report = analysis_report(&model, cfg.threshold, Some(&codebook))?;
                let worst = report
                    .combiner_residuals
                    .unwrap_or_default()
                    .into_iter()
                    .fold(0.0, f64::max);
                println!("codebook entries: {}", codebook.len());
                println!("max combiner residual: {worst:e}");
            }
            Ok(())
        }
        Command::Correlation(a) => {
            let mut cfg = base_config(&a.run, ExperimentKind::Correlation)?;
            cfg.kind = ExperimentKind::Correlation;
            apply_training(&mut cfg, &a.training);
            if a.codebook.is_some() {
                cfg.codebook = a.codebook;
            }
            if let Some(m) = a.m {
                cfg.m_sizes = vec![m];
            }
            let results = run_experiment(&cfg)?;
            if let Some(dev) = results.analysis.as_ref().and_then(|a| a.max_abs_deviation) {
                println!("max |empirical - rho|: {dev}");
            }
            emit(&cfg, &results)
        }
    }
}

fn gen_model(a: GenModelArgs) -> Result<()> {
    let mut spec = SynthesisSpec::new(a.q, a.k, a.seed);
    if let Some(s) = a.spectrum {
        spec = spec.with_spectrum(s);
    }
    if let Some(v) = a.resistance_scale {
        spec.resistance_scale = v;
    }
    if let Some(v) = a.reactance_scale {
        spec.reactance_scale = v;
    }
    if let Some(v) = a.frequency {
        spec.frequency_hz = v;
    }
    let model = synthesize_model(&spec)?;
    std::fs::write(&a.output, save_model(&model)?)?;
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::ModelLoad {
        path: path.display().to_string(),
        source: Box::new(e.into()),
    })?;
    let model = load_model(&bytes)?;
    println!(
        "valid: {} switches, {} angles, {} Hz",
        model.q_switches(),
        model.k_angles(),
        model.frequency_hz()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let Some(output) = a.run.output.clone() else {
        return Err(Error::InvalidConfig("train-codebook needs --output".into()));
    };
    let mut cfg = base_config(&a.run, ExperimentKind::SisoGainCodebook)?;
    cfg.kind = ExperimentKind::SisoGainCodebook;
    apply_training(&mut cfg, &a.training);
    cfg.m_sizes = vec![a.m];
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let (_, model) = resolve_models(&cfg)?;
    let e_t = isotropic_pattern(cfg.k_angles);
    let (_, codebook) = pool.install(|| train_nested(&cfg, &model, &e_t, &[a.m]))?.remove(0);
    std::fs::write(&output, save_codebook(&codebook)?)?;
    println!(
        "trained M = {} in {} iterations, training average gain {}",
        codebook.len(),
        codebook.training.iterations,
        codebook.training.final_avg_gain
    );
    Ok(())
}

fn apply_training(cfg: &mut ExperimentConfig, t: &TrainingArgs) {
    if let Some(v) = t.training_size {
        cfg.training_size = v;
    }
    if let Some(v) = t.epsilon {
        cfg.gla.epsilon = v;
    }
    if let Some(v) = t.i_max {
        cfg.gla.i_max = v;
    }
}

/// Config file (or defaults) with the shared flags applied. When neither
/// the file nor the flags set `K`, it is taken from the model.
fn base_config(run: &RunArgs, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let (mut cfg, file_sets_k) = match &run.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
            let raw: serde_json::Value = serde_json::from_slice(&bytes)
                .map_err(|e| Error::InvalidConfig(format!("config line {}: {e}", e.line())))?;
            let mut raw = raw;
            if let Some(obj) = raw.as_object_mut() {
                obj.entry("kind").or_insert_with(|| serde_json::json!(kind.name()));
            }
            let sets_k = raw.get("K").is_some();
            let cfg: ExperimentConfig =
                serde_json::from_value(raw).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
            (cfg, sets_k)
        }
        None => (ExperimentConfig::new(kind), false),
    };

    if let Some(p) = &run.model {
        cfg.model = Some(p.clone());
        cfg.synthetic = None;
    }
    if let Some(q) = run.q {
        let k = run.k.unwrap_or(cfg.k_angles);
        let mut spec = SynthesisSpec::new(q, k, run.model_seed);
        if let Some(s) = &run.spectrum {
            spec = spec.with_spectrum(s.clone());
        }
        cfg.synthetic = Some(spec);
        cfg.model = None;
    }
    if let Some(v) = run.trials {
        cfg.trials = v;
    }
    if let Some(v) = run.seed {
        cfg.seed = v;
    }
    if let Some(v) = run.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = run.block_size {
        cfg.sebo.block_size = v;
    }
    if let Some(p) = &run.output {
        cfg.output = Some(p.clone());
    }
    if let Some(f) = &run.format {
        cfg.format = f.parse::<OutputFormat>()?;
    } else if run.output.as_ref().and_then(|p| p.extension()).is_some_and(|e| e == "json") {
        cfg.format = OutputFormat::Json;
    }

    match (run.k, file_sets_k) {
        (Some(k), _) => cfg.k_angles = k,
        (None, true) => {}
        (None, false) => {
            if let Some(p) = &cfg.model {
                if p.exists() {
                    cfg.k_angles = load_model_file(p)?.k_angles();
                }
            } else if let Some(spec) = &cfg.synthetic {
                cfg.k_angles = spec.k_angles;
            }
        }
    }
    Ok(cfg)
}

fn run_and_emit(cfg: &ExperimentConfig) -> Result<()> {
    let results = run_experiment(cfg)?;
    emit(cfg, &results)
}

fn emit(cfg: &ExperimentConfig, results: &ResultSet) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            emit_results(results, cfg.format, path)?;
            print!("{}", summary_table(results));
        }
        None => print!("{}", render(results, cfg.format)),
    }
    Ok(())
}

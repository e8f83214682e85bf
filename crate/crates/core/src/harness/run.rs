//! Monte Carlo experiment driver.
//!
//! Trial `t` draws its virtual channel from sub-stream `t` of the run seed
//! and every per-trial optimizer seed is derived from `(seed, t, ...)`, so
//! records do not depend on scheduling. Parallel maps collect in trial order
//! and all sums run sequentially afterwards.

use rayon::prelude::*;

use super::config::{load_codebook_file, resolve_models, ExperimentConfig, ExperimentKind, MethodKind};
use super::results::{aggregate, AnalysisOutput, Provenance, ResultSet, TrialRecord};
use crate::analysis::{analysis_report, pattern_correlation, ComplexMatrixJson};
use crate::antenna_model::{pattern_from_bits, AntennaCoder, PixelAntennaModel};
use crate::beamspace::{incident_field, isotropic_pattern, sample_virtual_channel, trial_rng, TransmitPattern, VirtualChannel};
use crate::codebook::{mix_seed, train_codebook_from, Codebook, GlaConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::gain::{CoderPatterns, GainForm};
use crate::linalg::{self, CMatrix, CVector};
use crate::mimo_capacity::{db_to_linear, optimize_coding, CodingMethod};
use crate::sebo::{exhaustive_maximize, sebo_maximize, MAX_EXHAUSTIVE_BITS};

const TRAINING_STREAM: u64 = 0x7472_6169_6e69_6e67;
/// Above this many switches the exhaustive path evaluates on the fly
/// instead of tabulating every pattern.
const TABLE_MAX_BITS: usize = 14;

/// Runs the configured experiment on a worker pool capped by the config
/// and the environment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultSet> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ResultSet> {
    let (model_t, model_r) = resolve_models(config)?;
    let e_t = isotropic_pattern(config.k_angles);
    let mut analysis = None;

    let records = match config.kind {
        ExperimentKind::SisoGain => siso_gain(config, &model_r, &e_t)?,
        ExperimentKind::SisoGainCodebook => siso_gain_codebook(config, &model_r, &e_t)?,
        ExperimentKind::MimoCapacity => mimo_capacity(config, &model_t, &model_r, &e_t)?,
        ExperimentKind::Eadof => {
            let codebook = config.codebook.as_deref().map(load_codebook_file).transpose()?;
            analysis = Some(AnalysisOutput {
                report: analysis_report(&model_r, config.threshold, codebook.as_ref())?,
                empirical_correlation: None,
                max_abs_deviation: None,
            });
            Vec::new()
        }
        ExperimentKind::Correlation => {
            let (records, out) = correlation(config, &model_r, &e_t)?;
            analysis = Some(out);
            records
        }
    };

    let mut echo = config.clone();
    echo.threads = None;
    echo.output = None;
    Ok(ResultSet {
        aggregates: aggregate(&records),
        records,
        provenance: Provenance {
            experiment: config.kind.name().to_string(),
            config: echo,
            seed: config.seed,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        analysis,
    })
}

fn channel(config: &ExperimentConfig, trial: usize) -> VirtualChannel {
    sample_virtual_channel(config.k_angles, &mut trial_rng(config.seed, trial as u64))
}

fn field(config: &ExperimentConfig, trial: usize, e_t: &TransmitPattern) -> Result<CVector> {
    incident_field(&channel(config, trial), e_t)
}

fn record(config: &ExperimentConfig, trial: usize, value: f64, method: &str) -> TrialRecord {
    TrialRecord {
        trial,
        snr_db: None,
        gain_or_capacity: value,
        method: method.to_string(),
        mode: None,
        m_size: None,
        seed: config.seed,
    }
}

/// Every feasible coder with its normalised pattern, in index order.
pub(crate) fn feasible_table(model: &PixelAntennaModel) -> Result<(Vec<AntennaCoder>, CoderPatterns)> {
    let q = model.q_switches();
    let coders: Vec<AntennaCoder> = (0..1u64 << q)
        .into_par_iter()
        .map(|i| AntennaCoder::from_index(i, q))
        .filter(|c| pattern_from_bits(model, c.bits(), true).is_ok())
        .collect();
    if coders.is_empty() {
        return Err(Error::InfeasibleAll);
    }
    let patterns = CoderPatterns::new(model, &coders)?;
    Ok((coders, patterns))
}

/// Best SISO gain over all coders for each incident field.
pub(crate) fn exhaustive_gains(model: &PixelAntennaModel, fields: &[CVector]) -> Result<Vec<f64>> {
    let q = model.q_switches();
    if q > MAX_EXHAUSTIVE_BITS {
        return Err(Error::TooLarge {
            q,
            max: MAX_EXHAUSTIVE_BITS,
        });
    }
    if q <= TABLE_MAX_BITS {
        let (_, table) = feasible_table(model)?;
        return Ok(fields.par_iter().map(|g| table.best(g).1).collect());
    }
    fields
        .par_iter()
        .map(|g| {
            let form = GainForm::single(model, g)?;
            let (_, v) = exhaustive_maximize(|b| form.eval_bits(model, b), q)?;
            if v == f64::NEG_INFINITY {
                return Err(Error::InfeasibleAll);
            }
            Ok(v)
        })
        .collect()
}

fn siso_gain(config: &ExperimentConfig, model: &PixelAntennaModel, e_t: &TransmitPattern) -> Result<Vec<TrialRecord>> {
    let fields: Vec<CVector> = (0..config.trials)
        .into_par_iter()
        .map(|t| field(config, t, e_t))
        .collect::<Result<_>>()?;
    let method = config.method.name();
    let (values, m_size): (Vec<f64>, Option<usize>) = match config.method {
        MethodKind::Codebook => {
            let path = config.codebook.as_deref().expect("validated");
            let codebook = load_codebook_file(path)?;
            let patterns = codebook.patterns(model)?;
            (fields.par_iter().map(|g| patterns.best(g).1).collect(), Some(codebook.len()))
        }
        MethodKind::Exhaustive => (exhaustive_gains(model, &fields)?, None),
        MethodKind::Sebo => {
            let values = fields
                .par_iter()
                .enumerate()
                .map(|(t, g)| {
                    let form = GainForm::single(model, g)?;
                    let cfg = config.sebo.clone().with_seed(mix_seed(&[config.seed, t as u64]));
                    let trace = sebo_maximize(|b| form.eval_bits(model, b), model.q_switches(), &cfg, None)?
                        .require_feasible()?;
                    Ok(trace.value)
                })
                .collect::<Result<_>>()?;
            (values, None)
        }
    };
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(t, v)| TrialRecord {
            m_size,
            ..record(config, t, v, method)
        })
        .collect())
}

/// Trains one codebook per size, smallest first, each initialised with the
/// previous (smaller) trained codebook.
pub(crate) fn train_nested(
    config: &ExperimentConfig,
    model: &PixelAntennaModel,
    e_t: &TransmitPattern,
    sizes: &[usize],
) -> Result<Vec<(usize, Codebook)>> {
    let training = TrainingSet::sample(
        config.k_angles,
        config.training_size,
        e_t.clone(),
        mix_seed(&[config.seed, TRAINING_STREAM]),
    )?;
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out: Vec<(usize, Codebook)> = Vec::with_capacity(sizes.len());
    for m in sizes {
        let initial: &[AntennaCoder] = out.last().map_or(&[], |(_, cb)| cb.coders());
        let gla = GlaConfig {
            seed: mix_seed(&[config.seed, config.gla.seed, m as u64]),
            ..config.gla.clone()
        };
        let cb = train_codebook_from(model, &training, m, initial, &gla, &config.sebo)?;
        out.push((m, cb));
    }
    Ok(out)
}

fn siso_gain_codebook(
    config: &ExperimentConfig,
    model: &PixelAntennaModel,
    e_t: &TransmitPattern,
) -> Result<Vec<TrialRecord>> {
    let books = train_nested(config, model, e_t, &config.m_sizes)?;
    let fields: Vec<CVector> = (0..config.trials)
        .into_par_iter()
        .map(|t| field(config, t, e_t))
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(books.len() * fields.len());
    for (m, cb) in &books {
        let patterns = cb.patterns(model)?;
        let gains: Vec<f64> = fields.par_iter().map(|g| patterns.best(g).1).collect();
        records.extend(gains.into_iter().enumerate().map(|(t, v)| TrialRecord {
            m_size: Some(*m),
            ..record(config, t, v, "codebook")
        }));
    }
    Ok(records)
}

fn mimo_capacity(
    config: &ExperimentConfig,
    model_t: &PixelAntennaModel,
    model_r: &PixelAntennaModel,
    e_t: &TransmitPattern,
) -> Result<Vec<TrialRecord>> {
    // (m_size label, method) pairs evaluated on every trial.
    let methods: Vec<(Option<usize>, CodingMethod)> = match config.method {
        MethodKind::Sebo => vec![(None, CodingMethod::Sebo(config.sebo.clone()))],
        MethodKind::Exhaustive => vec![(None, CodingMethod::Exhaustive)],
        MethodKind::Codebook => match &config.codebook {
            Some(path) => {
                let receive = load_codebook_file(path)?;
                let transmit = match &config.codebook_t {
                    Some(p) => load_codebook_file(p)?,
                    None => receive.clone(),
                };
                vec![(Some(receive.len()), CodingMethod::Codebook { transmit, receive })]
            }
            None => {
                let rx = train_nested(config, model_r, e_t, &config.m_sizes)?;
                let tx = if config.model_t.is_some() {
                    train_nested(config, model_t, e_t, &config.m_sizes)?
                } else {
                    rx.clone()
                };
                rx.into_iter()
                    .zip(tx)
                    .map(|((m, receive), (_, transmit))| (Some(m), CodingMethod::Codebook { transmit, receive }))
                    .collect()
            }
        },
    };

    let per_trial: Vec<Vec<TrialRecord>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let h_v = channel(config, t);
            let mut rows = Vec::new();
            // One optimizer seed per trial, shared across SNRs and modes.
            let trial_seed = mix_seed(&[config.seed, t as u64]);
            for &snr_db in &config.snr_db {
                for &mode in &config.modes {
                    for (m_size, method) in &methods {
                        let method = match method {
                            CodingMethod::Sebo(cfg) => CodingMethod::Sebo(cfg.clone().with_seed(trial_seed)),
                            other => other.clone(),
                        };
                        let design = optimize_coding(
                            model_t,
                            model_r,
                            config.n_t,
                            config.n_r,
                            &h_v,
                            db_to_linear(snr_db),
                            1.0,
                            mode,
                            &method,
                        )?;
                        rows.push(TrialRecord {
                            snr_db: Some(snr_db),
                            mode: Some(mode),
                            m_size: *m_size,
                            ..record(config, t, design.capacity, config.method.name())
                        });
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn correlation(
    config: &ExperimentConfig,
    model: &PixelAntennaModel,
    e_t: &TransmitPattern,
) -> Result<(Vec<TrialRecord>, AnalysisOutput)> {
    let codebook = match &config.codebook {
        Some(p) => load_codebook_file(p)?,
        None => train_nested(config, model, e_t, &config.m_sizes)?.remove(0).1,
    };
    let patterns = codebook.patterns(model)?;
    let m = patterns.len();
    let rho = pattern_correlation(&patterns);

    let per_trial: Vec<CVector> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let g = field(config, t, e_t)?;
            Ok(CVector::from_fn(m, |i, _| linalg::dotc(patterns.pattern(i), &g)))
        })
        .collect::<Result<_>>()?;
    let mut acc = CMatrix::zeros(m, m);
    for h in &per_trial {
        acc += h * h.adjoint();
    }
    acc.unscale_mut(config.trials as f64);
    let max_abs_deviation = (0..m * m)
        .map(|k| (acc[(k / m, k % m)] - rho[(k / m, k % m)]).norm())
        .fold(0.0, f64::max);

    let records = per_trial
        .iter()
        .enumerate()
        .map(|(t, h)| {
            let best = h.iter().map(|v| v.norm_sqr()).fold(f64::NEG_INFINITY, f64::max);
            TrialRecord {
                m_size: Some(m),
                ..record(config, t, best, "codebook")
            }
        })
        .collect();
    let output = AnalysisOutput {
        report: analysis_report(model, config.threshold, Some(&codebook))?,
        empirical_correlation: Some(ComplexMatrixJson::from(&acc)),
        max_abs_deviation: Some(max_abs_deviation),
    };
    Ok((records, output))
}

//! Antenna-coder codebooks: per-realization selection and training with the
//! generalised Lloyd algorithm (nearest-neighbour partition alternating with
//! centroid updates).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna_model::{pattern_from_bits, AntennaCoder, PixelAntennaModel};
use crate::beamspace::{incident_field, sample_virtual_channel, trial_rng, TransmitPattern, VirtualChannel};
use crate::error::{Error, Result};
use crate::gain::{CoderPatterns, GainForm};
use crate::linalg::CVector;
use crate::sebo::{sebo_maximize, SeboConfig};

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingMeta {
    pub seed: u64,
    #[serde(rename = "L")]
    pub training_size: usize,
    pub iterations: usize,
    pub final_avg_gain: f64,
    /// Sample-average objective (sum over the training set) after each
    /// partition step.
    pub objective_history: Vec<f64>,
}

/// Ordered set of distinct coders.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    coders: Vec<AntennaCoder>,
    q_switches: usize,
    pub training: TrainingMeta,
}

impl Codebook {
    pub fn new(coders: Vec<AntennaCoder>) -> Result<Self> {
        let Some(first) = coders.first() else {
            return Err(Error::InvalidConfig("codebook must hold at least one coder".into()));
        };
        let q = first.len();
        if q == 0 || coders.iter().any(|c| c.len() != q) {
            return Err(Error::DimensionMismatch("codebook coders differ in length".into()));
        }
        let mut seen = HashSet::new();
        for (m, c) in coders.iter().enumerate() {
            if !seen.insert(c) {
                return Err(Error::InvalidConfig(format!("codebook entry {m} ({c}) is a duplicate")));
            }
        }
        Ok(Codebook {
            coders,
            q_switches: q,
            training: TrainingMeta::default(),
        })
    }

    /// Every one of the `2^q` coders, in index order.
    pub fn full(q: usize) -> Result<Self> {
        if q == 0 || q > 20 {
            return Err(Error::InvalidConfig(format!("full codebook needs 1 <= q <= 20, got {q}")));
        }
        Codebook::new((0..1u64 << q).map(|i| AntennaCoder::from_index(i, q)).collect())
    }

    pub fn coders(&self) -> &[AntennaCoder] {
        &self.coders
    }

    pub fn len(&self) -> usize {
        self.coders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coders.is_empty()
    }

    pub fn q_switches(&self) -> usize {
        self.q_switches
    }

    pub fn check_model(&self, model: &PixelAntennaModel) -> Result<()> {
        if self.q_switches != model.q_switches() {
            return Err(Error::DimensionMismatch(format!(
                "codebook coders have {} bits, model has {} switches",
                self.q_switches,
                model.q_switches()
            )));
        }
        Ok(())
    }

    pub fn patterns(&self, model: &PixelAntennaModel) -> Result<CoderPatterns> {
        self.check_model(model)?;
        CoderPatterns::new(model, &self.coders)
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookDocument {
    version: u32,
    q_switches: usize,
    m_size: usize,
    coders: Vec<Vec<u8>>,
    #[serde(default)]
    training: TrainingMeta,
}

pub fn save_codebook(codebook: &Codebook) -> Result<Vec<u8>> {
    let doc = CodebookDocument {
        version: CODEBOOK_FORMAT_VERSION,
        q_switches: codebook.q_switches,
        m_size: codebook.len(),
        coders: codebook.coders.iter().map(|c| c.bits().to_vec()).collect(),
        training: codebook.training.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::NonFinite(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_codebook(bytes: &[u8]) -> Result<Codebook> {
    let doc: CodebookDocument =
        serde_json::from_slice(bytes).map_err(|e| Error::parse(e.line(), "document", e.to_string()))?;
    if doc.version != CODEBOOK_FORMAT_VERSION {
        return Err(Error::parse(0, "version", format!("unsupported codebook version {}", doc.version)));
    }
    if doc.m_size != doc.coders.len() {
        return Err(Error::parse(
            0,
            "m_size",
            format!("declares {} coders, found {}", doc.m_size, doc.coders.len()),
        ));
    }
    let coders = doc
        .coders
        .into_iter()
        .enumerate()
        .map(|(m, bits)| {
            if bits.len() != doc.q_switches {
                return Err(Error::parse(
                    0,
                    "coders",
                    format!("coder {m} has {} bits, expected {}", bits.len(), doc.q_switches),
                ));
            }
            AntennaCoder::new(bits).map_err(|e| Error::parse(0, "coders", e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut codebook = Codebook::new(coders)?;
    codebook.training = doc.training;
    Ok(codebook)
}

/// Training realizations together with their incident fields `H_V e_t`.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    realizations: Vec<VirtualChannel>,
    e_t: TransmitPattern,
    fields: Vec<CVector>,
}

impl TrainingSet {
    pub fn new(realizations: Vec<VirtualChannel>, e_t: TransmitPattern) -> Result<Self> {
        if realizations.is_empty() {
            return Err(Error::InvalidConfig("training set is empty".into()));
        }
        let fields = realizations
            .iter()
            .map(|h| incident_field(h, &e_t))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet {
            realizations,
            e_t,
            fields,
        })
    }

    /// `size` realizations, realization `l` drawn from sub-stream `l` of `seed`.
    pub fn sample(k_angles: usize, size: usize, e_t: TransmitPattern, seed: u64) -> Result<Self> {
        let realizations = (0..size as u64)
            .into_par_iter()
            .map(|l| sample_virtual_channel(k_angles, &mut trial_rng(seed, l)))
            .collect();
        TrainingSet::new(realizations, e_t)
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn realizations(&self) -> &[VirtualChannel] {
        &self.realizations
    }

    pub fn transmit(&self) -> &TransmitPattern {
        &self.e_t
    }

    pub fn fields(&self) -> &[CVector] {
        &self.fields
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub coder: AntennaCoder,
    pub gain: f64,
}

/// Best codebook entry for one channel realization.
pub fn select_coder(
    codebook: &Codebook,
    model: &PixelAntennaModel,
    h_v: &VirtualChannel,
    e_t: &TransmitPattern,
) -> Result<Selection> {
    let patterns = codebook.patterns(model)?;
    let field = incident_field(h_v, e_t)?;
    if field.len() != model.pattern_len() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}-dimensional, model radiates over {}",
            field.len(),
            model.pattern_len()
        )));
    }
    let (index, gain) = patterns.best(&field);
    Ok(Selection {
        index,
        coder: codebook.coders[index].clone(),
        gain,
    })
}

fn partition_with(patterns: &CoderPatterns, fields: &[CVector]) -> (Vec<Vec<usize>>, f64) {
    let best: Vec<(usize, f64)> = fields.par_iter().map(|g| patterns.best(g)).collect();
    let mut sets = vec![Vec::new(); patterns.len()];
    let mut total = 0.0;
    for (l, (m, gain)) in best.into_iter().enumerate() {
        sets[m].push(l);
        total += gain;
    }
    (sets, total)
}

/// Nearest-neighbour rule: realization `l` goes to the coder giving it the
/// highest gain, ties to the smallest index.
pub fn partition_training_set(
    coders: &[AntennaCoder],
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
) -> Result<Vec<Vec<usize>>> {
    let patterns = CoderPatterns::new(model, coders)?;
    Ok(partition_with(&patterns, training_set.fields()).0)
}

/// Centroid condition: the coder maximising summed gain over `partition`.
///
/// SEBO starts from `init` (all switches on when absent), so the result is
/// never worse than `init` on this partition. Returns the coder and its
/// summed gain.
pub fn centroid_update(
    partition: &[usize],
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
    sebo_config: &SeboConfig,
    init: Option<&AntennaCoder>,
) -> Result<(AntennaCoder, f64)> {
    if partition.is_empty() {
        return Err(Error::EmptyPartition(0));
    }
    if let Some(&bad) = partition.iter().find(|&&l| l >= training_set.len()) {
        return Err(Error::DimensionMismatch(format!(
            "partition references realization {bad}, training set has {}",
            training_set.len()
        )));
    }
    let form = GainForm::sum(model, partition.iter().map(|&l| &training_set.fields[l]))?;
    let trace = sebo_maximize(
        |bits| form.eval_bits(model, bits),
        model.q_switches(),
        sebo_config,
        init,
    )?
    .require_feasible()?;
    Ok((trace.coder, trace.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlaConfig {
    pub epsilon: f64,
    pub i_max: usize,
    pub seed: u64,
}

impl Default for GlaConfig {
    fn default() -> Self {
        GlaConfig {
            epsilon: 1e-3,
            i_max: 30,
            seed: 0,
        }
    }
}

/// SplitMix64 finaliser over a few words, for deriving child seeds.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn is_feasible(model: &PixelAntennaModel, bits: &[u8]) -> bool {
    pattern_from_bits(model, bits, true).is_ok()
}

/// `count` distinct feasible coders not already in `taken`.
fn random_distinct_coders(
    model: &PixelAntennaModel,
    count: usize,
    taken: &HashSet<AntennaCoder>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AntennaCoder>> {
    let q = model.q_switches();
    if count == 0 {
        return Ok(Vec::new());
    }
    if q <= 16 {
        let pool: Vec<AntennaCoder> = (0..1u64 << q)
            .map(|i| AntennaCoder::from_index(i, q))
            .filter(|c| !taken.contains(c) && is_feasible(model, c.bits()))
            .collect();
        if pool.is_empty() && taken.is_empty() {
            return Err(Error::InfeasibleAll);
        }
        if pool.len() < count {
            return Err(Error::InvalidConfig(format!(
                "only {} further distinct feasible coders exist, need {count}",
                pool.len()
            )));
        }
        let picks = rand::seq::index::sample(rng, pool.len(), count);
        return Ok(picks.into_iter().map(|i| pool[i].clone()).collect());
    }

    let mut out = Vec::with_capacity(count);
    let mut seen: HashSet<AntennaCoder> = taken.clone();
    let budget = 1000 + 100 * count;
    for _ in 0..budget {
        let bits: Vec<u8> = (0..q).map(|_| rng.random_range(0..2u8)).collect();
        let coder = AntennaCoder::new(bits).expect("binary");
        if seen.contains(&coder) || !is_feasible(model, coder.bits()) {
            continue;
        }
        seen.insert(coder.clone());
        out.push(coder);
        if out.len() == count {
            return Ok(out);
        }
    }
    if out.is_empty() && taken.is_empty() {
        Err(Error::InfeasibleAll)
    } else {
        Err(Error::InvalidConfig(format!(
            "found only {} distinct feasible coders after {budget} draws",
            out.len()
        )))
    }
}

/// Trains an `m_size` codebook from a random distinct initialization.
pub fn train_codebook(
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
    m_size: usize,
    gla: &GlaConfig,
    sebo: &SeboConfig,
) -> Result<Codebook> {
    train_codebook_from(model, training_set, m_size, &[], gla, sebo)
}

/// Like [`train_codebook`], but the first entries of the initial codebook
/// are `initial`; the remainder is drawn at random. Passing a trained
/// smaller codebook yields nested training.
pub fn train_codebook_from(
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
    m_size: usize,
    initial: &[AntennaCoder],
    gla: &GlaConfig,
    sebo: &SeboConfig,
) -> Result<Codebook> {
    sebo.validate()?;
    if m_size == 0 {
        return Err(Error::InvalidConfig("codebook size must be >= 1".into()));
    }
    if training_set.len() < m_size {
        return Err(Error::InvalidConfig(format!(
            "training set has {} realizations, codebook size is {m_size}",
            training_set.len()
        )));
    }
    if initial.len() > m_size {
        return Err(Error::InvalidConfig("more initial coders than codebook entries".into()));
    }
    if !(gla.epsilon >= 0.0) || gla.i_max == 0 {
        return Err(Error::InvalidConfig("GLA needs epsilon >= 0 and i_max >= 1".into()));
    }
    if training_set.fields().first().map(|f| f.len()) != Some(model.pattern_len()) {
        return Err(Error::DimensionMismatch("training set and model disagree on 2K".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[gla.seed, 0x11]));
    let mut coders: Vec<AntennaCoder> = Vec::with_capacity(m_size);
    let mut taken = HashSet::new();
    for c in initial {
        model.check_coder(c)?;
        if !taken.insert(c.clone()) {
            return Err(Error::InvalidConfig(format!("initial coder {c} is duplicated")));
        }
        coders.push(c.clone());
    }
    coders.extend(random_distinct_coders(model, m_size - coders.len(), &taken, &mut rng)?);

    let fields = training_set.fields();
    let mut history = Vec::new();
    let mut iterations = 0;

    for iter in 1..=gla.i_max {
        let mut patterns = CoderPatterns::new(model, &coders)?;
        let (mut sets, mut total) = partition_with(&patterns, fields);
        for _ in 0..m_size {
            let Some(empty) = sets.iter().position(|s| s.is_empty()) else {
                break;
            };
            if !reseed_empty(model, training_set, sebo, &patterns, &sets, empty, &mut coders, &mut rng)? {
                break;
            }
            patterns = CoderPatterns::new(model, &coders)?;
            (sets, total) = partition_with(&patterns, fields);
        }
        history.push(total);

        let updated: Vec<AntennaCoder> = (0..m_size)
            .into_par_iter()
            .map(|m| {
                if sets[m].is_empty() {
                    return Ok(coders[m].clone());
                }
                let cfg = sebo.clone().with_seed(mix_seed(&[gla.seed, iter as u64, m as u64]));
                centroid_update(&sets[m], model, training_set, &cfg, Some(&coders[m])).map(|(c, _)| c)
            })
            .collect::<Result<_>>()?;
        let updated = dedupe(model, training_set, sebo, &sets, updated, &mut rng)?;

        let moved: f64 = updated
            .iter()
            .zip(&coders)
            .map(|(new, old)| {
                let d = new.bits().iter().zip(old.bits()).filter(|(a, b)| a != b).count();
                (d as f64).sqrt()
            })
            .sum();
        let size: f64 = updated.iter().map(|c| (c.count_ones() as f64).sqrt()).sum();
        coders = updated;
        iterations = iter;
        let converged = if size > 0.0 { moved / size <= gla.epsilon } else { moved == 0.0 };
        if converged {
            break;
        }
    }

    let patterns = CoderPatterns::new(model, &coders)?;
    let (_, total) = partition_with(&patterns, fields);
    history.push(total);

    let mut codebook = Codebook::new(coders)?;
    codebook.training = TrainingMeta {
        seed: gla.seed,
        training_size: training_set.len(),
        iterations,
        final_avg_gain: total / training_set.len() as f64,
        objective_history: history,
    };
    Ok(codebook)
}

/// Gives the unused coder `empty` a job: the worse-served half of the
/// largest partition is split off and the coder re-trained on it.
/// Returns false when no partition is large enough to split.
#[allow(clippy::too_many_arguments)]
fn reseed_empty(
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
    sebo: &SeboConfig,
    patterns: &CoderPatterns,
    sets: &[Vec<usize>],
    empty: usize,
    coders: &mut [AntennaCoder],
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let (largest, members) = sets
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .expect("non-empty codebook");
    if members.len() < 2 {
        return Ok(false);
    }
    let mut ranked: Vec<(f64, usize)> = members
        .iter()
        .map(|&l| (patterns.gain(largest, &training_set.fields()[l]), l))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let half: Vec<usize> = ranked[..members.len() / 2].iter().map(|&(_, l)| l).collect();

    let mut start = coders[largest].clone();
    start.flip(rng.random_range(0..model.q_switches()));
    let cfg = sebo.clone().with_seed(rng.random());
    let (candidate, _) = centroid_update(&half, model, training_set, &cfg, Some(&start))?;
    let replacement = distinct_or_fallback(model, coders, empty, candidate, start, rng)?;
    coders[empty] = replacement;
    Ok(true)
}

/// Makes every centroid distinct. A duplicate is perturbed by one bit flip
/// and re-optimised on its partition.
fn dedupe(
    model: &PixelAntennaModel,
    training_set: &TrainingSet,
    sebo: &SeboConfig,
    sets: &[Vec<usize>],
    mut coders: Vec<AntennaCoder>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AntennaCoder>> {
    for m in 1..coders.len() {
        if !coders[..m].contains(&coders[m]) {
            continue;
        }
        let mut start = coders[m].clone();
        start.flip(rng.random_range(0..model.q_switches()));
        let candidate = if sets[m].is_empty() {
            start.clone()
        } else {
            let cfg = sebo.clone().with_seed(rng.random());
            centroid_update(&sets[m], model, training_set, &cfg, Some(&start))?.0
        };
        coders[m] = distinct_or_fallback(model, &coders, m, candidate, start, rng)?;
    }
    Ok(coders)
}

/// First of `candidate`, `start`, or a random coder that is feasible and
/// differs from every entry of `coders` other than `slot`.
fn distinct_or_fallback(
    model: &PixelAntennaModel,
    coders: &[AntennaCoder],
    slot: usize,
    candidate: AntennaCoder,
    start: AntennaCoder,
    rng: &mut ChaCha8Rng,
) -> Result<AntennaCoder> {
    let clashes = |c: &AntennaCoder| {
        coders
            .iter()
            .enumerate()
            .any(|(k, other)| k != slot && other == c)
    };
    for c in [candidate, start] {
        if !clashes(&c) && is_feasible(model, c.bits()) {
            return Ok(c);
        }
    }
    let taken: HashSet<AntennaCoder> = coders
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != slot)
        .map(|(_, c)| c.clone())
        .collect();
    Ok(random_distinct_coders(model, 1, &taken, rng)?.remove(0))
}

/// Mean selected gain of a codebook over a set of incident fields.
pub fn average_selected_gain(patterns: &CoderPatterns, fields: &[CVector]) -> f64 {
    let total: f64 = fields.iter().map(|g| patterns.best(g).1).sum();
    total / fields.len() as f64
}

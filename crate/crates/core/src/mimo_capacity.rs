//! MIMO capacity under uniform and waterfilling power allocation, and joint
//! transmit/receive antenna coding that maximises it.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::antenna_model::{unit_feed_currents, AntennaCoder, PixelAntennaModel, ZERO_PATTERN_TOL};
use crate::beamspace::{mimo_channel, VirtualChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::sebo::{exhaustive_maximize, sebo_maximize, SeboConfig, MAX_EXHAUSTIVE_BITS};

/// Relative threshold below which an eigenvalue counts as zero.
pub const EIGEN_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    Uniform,
    Waterfilling,
}

impl std::fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocationMode::Uniform => "uniform",
            AllocationMode::Waterfilling => "waterfilling",
        })
    }
}

impl std::str::FromStr for AllocationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "up" => Ok(AllocationMode::Uniform),
            "waterfilling" | "wf" => Ok(AllocationMode::Waterfilling),
            other => Err(Error::InvalidConfig(format!("unknown allocation mode '{other}'"))),
        }
    }
}

/// Per-eigenchannel powers (same order as `eigenvalues`) and water level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub water_level: f64,
    pub eigenvalues: Vec<f64>,
}

fn check_power(total_power: f64, noise: f64) -> Result<()> {
    if !(total_power > 0.0 && total_power.is_finite() && noise > 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need finite P > 0 and noise > 0, got P = {total_power}, noise = {noise}"
        )));
    }
    Ok(())
}

fn check_channel(h: &CMatrix) -> Result<()> {
    if !linalg::is_finite_matrix(h) {
        return Err(Error::NonFinite("channel matrix".into()));
    }
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(Error::DimensionMismatch("channel matrix is empty".into()));
    }
    Ok(())
}

/// `log2 det(I + P/(σ² N_T) H Hᴴ)` in bps/Hz.
pub fn capacity_uniform(h: &CMatrix, total_power: f64, noise: f64) -> Result<f64> {
    check_power(total_power, noise)?;
    check_channel(h)?;
    let snr = total_power / (noise * h.ncols() as f64);
    Ok(linalg::gram_eigenvalues(h)
        .iter()
        .map(|&lam| (snr * lam).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2)
}

/// Exact waterfilling by the sorted active-set method.
pub fn waterfill(eigenvalues: &[f64], total_power: f64, noise: f64) -> Result<PowerAllocation> {
    check_power(total_power, noise)?;
    if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("eigenvalues must be finite and non-negative".into()));
    }
    let lam_max = eigenvalues.iter().copied().fold(0.0, f64::max);
    if lam_max <= 0.0 {
        return Err(Error::AllZeroEigenvalues);
    }
    let cutoff = EIGEN_ZERO_TOL * lam_max;

    let mut order: Vec<usize> = (0..eigenvalues.len()).filter(|&i| eigenvalues[i] > cutoff).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));

    // Largest active set whose weakest member still sits under the water.
    let mut inverse_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        inverse_sum += noise / eigenvalues[i];
        let mu = (total_power + inverse_sum) / (k + 1) as f64;
        if mu > noise / eigenvalues[i] {
            level = mu;
            active = k + 1;
        } else {
            break;
        }
    }

    let mut powers = vec![0.0; eigenvalues.len()];
    for &i in &order[..active] {
        powers[i] = (level - noise / eigenvalues[i]).max(0.0);
    }
    Ok(PowerAllocation {
        powers,
        water_level: level,
        eigenvalues: eigenvalues.to_vec(),
    })
}

/// Capacity with the capacity-achieving transmit covariance over the
/// `min(N_R, N_T)` eigenchannels of `H Hᴴ`.
pub fn capacity_waterfilling(h: &CMatrix, total_power: f64, noise: f64) -> Result<(f64, PowerAllocation)> {
    check_power(total_power, noise)?;
    check_channel(h)?;
    let mut eig = linalg::gram_eigenvalues(h);
    eig.truncate(h.nrows().min(h.ncols()));
    let alloc = waterfill(&eig, total_power, noise)?;
    let bits = alloc
        .powers
        .iter()
        .zip(&alloc.eigenvalues)
        .map(|(&p, &lam)| (p * lam / noise).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    Ok((bits, alloc))
}

/// Capacity of `h` under `mode`; an all-zero channel carries nothing.
pub fn capacity(h: &CMatrix, total_power: f64, noise: f64, mode: AllocationMode) -> Result<f64> {
    match mode {
        AllocationMode::Uniform => capacity_uniform(h, total_power, noise),
        AllocationMode::Waterfilling => match capacity_waterfilling(h, total_power, noise) {
            Ok((c, _)) => Ok(c),
            Err(Error::AllZeroEigenvalues) => Ok(0.0),
            Err(e) => Err(e),
        },
    }
}

/// How the coders of a joint design are searched.
#[derive(Debug, Clone)]
pub enum CodingMethod {
    /// SEBO over the stacked `[vec(B_T); vec(B_R)]` bit vector.
    Sebo(SeboConfig),
    /// Cyclic per-antenna search over a transmit and a receive codebook.
    Codebook { transmit: Codebook, receive: Codebook },
    /// Exhaustive search over all stacked bits (small problems only).
    Exhaustive,
}

impl CodingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CodingMethod::Sebo(_) => "sebo",
            CodingMethod::Codebook { .. } => "codebook",
            CodingMethod::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingDesign {
    pub b_t: Vec<AntennaCoder>,
    pub b_r: Vec<AntennaCoder>,
    pub capacity: f64,
    pub mode: AllocationMode,
    /// SEBO block cycles or codebook coordinate-ascent sweeps.
    pub cycles: usize,
    pub evaluations: u64,
}

/// Channel entries in port-current coordinates: with normalised currents
/// `u = i/‖E_oc i‖`, `H[r, t] = u_rᴴ (E_Rᴴ H_V E_T) u_t`.
///
/// Normalised currents are memoised per side: a SEBO block sweep changes
/// one antenna at a time, and antennas on a side share one model.
struct CurrentSpace<'a> {
    model_t: &'a PixelAntennaModel,
    model_r: &'a PixelAntennaModel,
    coupling: CMatrix,
    gram_t: CMatrix,
    gram_r: CMatrix,
    cache_t: CurrentCache,
    cache_r: CurrentCache,
}

type CurrentCache = RefCell<HashMap<Vec<u8>, Option<CVector>>>;

impl<'a> CurrentSpace<'a> {
    fn new(model_t: &'a PixelAntennaModel, model_r: &'a PixelAntennaModel, h_v: &VirtualChannel) -> Self {
        CurrentSpace {
            model_t,
            model_r,
            coupling: model_r.e_oc().adjoint() * (h_v.matrix() * model_t.e_oc()),
            gram_t: model_t.e_oc().adjoint() * model_t.e_oc(),
            gram_r: model_r.e_oc().adjoint() * model_r.e_oc(),
            cache_t: RefCell::default(),
            cache_r: RefCell::default(),
        }
    }

    fn normalized(model: &PixelAntennaModel, gram: &CMatrix, bits: &[u8]) -> Option<CVector> {
        let i = unit_feed_currents(model, bits).ok()?;
        let power = linalg::dotc(&i, &(gram * &i)).re;
        if !(power >= ZERO_PATTERN_TOL * ZERO_PATTERN_TOL) {
            return None;
        }
        Some(i.unscale(power.sqrt()))
    }

    fn cached(cache: &CurrentCache, bits: &[u8], compute: impl FnOnce() -> Option<CVector>) -> Option<CVector> {
        if let Some(hit) = cache.borrow().get(bits) {
            return hit.clone();
        }
        let value = compute();
        cache.borrow_mut().insert(bits.to_vec(), value.clone());
        value
    }

    fn transmit(&self, bits: &[u8]) -> Option<CVector> {
        Self::cached(&self.cache_t, bits, || Self::normalized(self.model_t, &self.gram_t, bits))
    }

    fn receive(&self, bits: &[u8]) -> Option<CVector> {
        Self::cached(&self.cache_r, bits, || Self::normalized(self.model_r, &self.gram_r, bits))
    }

    fn channel(&self, u_t: &[&CVector], u_r: &[&CVector]) -> CMatrix {
        let coupled: Vec<CVector> = u_t.iter().map(|u| &self.coupling * *u).collect();
        CMatrix::from_fn(u_r.len(), u_t.len(), |r, t| linalg::dotc(u_r[r], &coupled[t]))
    }
}

fn objective_value(h: &CMatrix, total_power: f64, noise: f64, mode: AllocationMode) -> f64 {
    capacity(h, total_power, noise, mode).unwrap_or(f64::NEG_INFINITY)
}

/// Jointly chooses `n_t` transmit and `n_r` receive coders maximising
/// capacity for one virtual-channel realization.
#[allow(clippy::too_many_arguments)]
pub fn optimize_coding(
    model_t: &PixelAntennaModel,
    model_r: &PixelAntennaModel,
    n_t: usize,
    n_r: usize,
    h_v: &VirtualChannel,
    total_power: f64,
    noise: f64,
    mode: AllocationMode,
    method: &CodingMethod,
) -> Result<CodingDesign> {
    check_power(total_power, noise)?;
    if n_t == 0 || n_r == 0 {
        return Err(Error::DimensionMismatch("need N_T >= 1 and N_R >= 1".into()));
    }
    if model_t.pattern_len() != h_v.dim() || model_r.pattern_len() != h_v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "models radiate over {}/{} beamspace dimensions, channel has {}",
            model_t.pattern_len(),
            model_r.pattern_len(),
            h_v.dim()
        )));
    }
    let space = CurrentSpace::new(model_t, model_r, h_v);
    let (q_t, q_r) = (model_t.q_switches(), model_r.q_switches());

    let stacked = |bits: &[u8]| -> f64 {
        let mut u_t = Vec::with_capacity(n_t);
        for n in 0..n_t {
            match space.transmit(&bits[n * q_t..(n + 1) * q_t]) {
                Some(u) => u_t.push(u),
                None => return f64::NEG_INFINITY,
            }
        }
        let offset = n_t * q_t;
        let mut u_r = Vec::with_capacity(n_r);
        for n in 0..n_r {
            match space.receive(&bits[offset + n * q_r..offset + (n + 1) * q_r]) {
                Some(u) => u_r.push(u),
                None => return f64::NEG_INFINITY,
            }
        }
        let h = space.channel(&u_t.iter().collect::<Vec<_>>(), &u_r.iter().collect::<Vec<_>>());
        objective_value(&h, total_power, noise, mode)
    };
    let total_bits = n_t * q_t + n_r * q_r;
    let split = |bits: &[u8]| -> (Vec<AntennaCoder>, Vec<AntennaCoder>) {
        let offset = n_t * q_t;
        let cut = |s: &[u8]| AntennaCoder::new(s.to_vec()).expect("binary");
        (
            (0..n_t).map(|n| cut(&bits[n * q_t..(n + 1) * q_t])).collect(),
            (0..n_r).map(|n| cut(&bits[offset + n * q_r..offset + (n + 1) * q_r])).collect(),
        )
    };

    let (b_t, b_r, cycles, evaluations) = match method {
        CodingMethod::Sebo(cfg) => {
            let trace = sebo_maximize(stacked, total_bits, cfg, None)?.require_feasible()?;
            let (b_t, b_r) = split(trace.coder.bits());
            (b_t, b_r, trace.cycles, trace.evaluations)
        }
        CodingMethod::Exhaustive => {
            if total_bits > MAX_EXHAUSTIVE_BITS {
                return Err(Error::TooLarge {
                    q: total_bits,
                    max: MAX_EXHAUSTIVE_BITS,
                });
            }
            let (coder, value) = exhaustive_maximize(stacked, total_bits)?;
            if value == f64::NEG_INFINITY {
                return Err(Error::InfeasibleAll);
            }
            let (b_t, b_r) = split(coder.bits());
            (b_t, b_r, 1, 1u64 << total_bits)
        }
        CodingMethod::Codebook { transmit, receive } => {
            transmit.check_model(model_t)?;
            receive.check_model(model_r)?;
            let table = |cb: &Codebook, f: &dyn Fn(&[u8]) -> Option<CVector>| -> Result<Vec<CVector>> {
                cb.coders()
                    .iter()
                    .map(|c| f(c.bits()).ok_or(Error::InfeasibleAll))
                    .collect()
            };
            let u_t = table(transmit, &|b| space.transmit(b))?;
            let u_r = table(receive, &|b| space.receive(b))?;
            let (pick_t, pick_r, cycles, evaluations) =
                coordinate_ascent(&space, &u_t, &u_r, n_t, n_r, total_power, noise, mode);
            (
                pick_t.iter().map(|&m| transmit.coders()[m].clone()).collect(),
                pick_r.iter().map(|&m| receive.coders()[m].clone()).collect(),
                cycles,
                evaluations,
            )
        }
    };

    let h = mimo_channel(model_t, &b_t, model_r, &b_r, h_v)?;
    let capacity = capacity(&h, total_power, noise, mode)?;
    Ok(CodingDesign {
        b_t,
        b_r,
        capacity,
        mode,
        cycles,
        evaluations,
    })
}

/// Per-antenna codebook search, transmit antennas first, starting from entry
/// 0 everywhere and sweeping until a full sweep changes nothing. A swap is
/// taken only on strict improvement, so the sweep count is finite.
#[allow(clippy::too_many_arguments)]
fn coordinate_ascent(
    space: &CurrentSpace,
    u_t: &[CVector],
    u_r: &[CVector],
    n_t: usize,
    n_r: usize,
    total_power: f64,
    noise: f64,
    mode: AllocationMode,
) -> (Vec<usize>, Vec<usize>, usize, u64) {
    let mut pick_t = vec![0usize; n_t];
    let mut pick_r = vec![0usize; n_r];
    let eval = |pt: &[usize], pr: &[usize]| {
        let ts: Vec<&CVector> = pt.iter().map(|&m| &u_t[m]).collect();
        let rs: Vec<&CVector> = pr.iter().map(|&m| &u_r[m]).collect();
        objective_value(&space.channel(&ts, &rs), total_power, noise, mode)
    };
    let mut current = eval(&pick_t, &pick_r);
    let mut evaluations = 1u64;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for slot in 0..n_t + n_r {
            let size = if slot < n_t { u_t.len() } else { u_r.len() };
            for m in 0..size {
                let (mut pt, mut pr) = (pick_t.clone(), pick_r.clone());
                if slot < n_t {
                    pt[slot] = m;
                } else {
                    pr[slot - n_t] = m;
                }
                let v = eval(&pt, &pr);
                evaluations += 1;
                if v > current {
                    current = v;
                    pick_t = pt;
                    pick_r = pr;
                    changed = true;
                }
            }
        }
        if !changed {
            return (pick_t, pick_r, sweeps, evaluations);
        }
    }
}

/// Capacity of a fixed design.
#[allow(clippy::too_many_arguments)]
pub fn design_capacity(
    model_t: &PixelAntennaModel,
    b_t: &[AntennaCoder],
    model_r: &PixelAntennaModel,
    b_r: &[AntennaCoder],
    h_v: &VirtualChannel,
    total_power: f64,
    noise: f64,
    mode: AllocationMode,
) -> Result<f64> {
    let h = mimo_channel(model_t, b_t, model_r, b_r, h_v)?;
    capacity(&h, total_power, noise, mode)
}

/// `10^(snr_db / 10)`: total transmit power for unit noise.
pub fn db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

//! Structural analysis of a pixel antenna via the SVD of its open-circuit
//! pattern matrix: orthogonal pattern basis, effective degrees of freedom,
//! equivalent combiner, gain upper bound and codebook pattern correlation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antenna_model::{unit_feed_currents, AntennaCoder, PixelAntennaModel, ZERO_PATTERN_TOL};
use crate::beamspace::{incident_field, TransmitPattern, VirtualChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::gain::CoderPatterns;
use crate::linalg::{self, CMatrix, CVector};

pub const DEFAULT_THRESHOLD: f64 = 0.998;

/// Leading-`R` SVD truncation of `E_oc`.
#[derive(Debug, Clone)]
pub struct PatternBasis {
    /// `2K × R`, orthonormal columns.
    pub u: CMatrix,
    /// `s_1 ≥ … ≥ s_R > 0`.
    pub singular_values: Vec<f64>,
    /// `(Q+1) × R`, orthonormal columns.
    pub v: CMatrix,
    pub eadof: usize,
    pub threshold: f64,
    /// Full spectrum, descending.
    pub all_singular_values: Vec<f64>,
    /// Cumulative energy fractions `F_i`.
    pub cumulative: Vec<f64>,
    /// Squared-Frobenius energy fraction discarded by the truncation.
    pub truncation_residual: f64,
}

/// Thin SVD of `E_oc`, truncated at the first index whose cumulative energy
/// fraction reaches `threshold`.
pub fn pattern_svd(model: &PixelAntennaModel, threshold: f64) -> Result<PatternBasis> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    let svd = model.e_oc().clone().svd(true, true);
    let (u_full, v_t_full) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateModel),
    };

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let all: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let energy: f64 = all.iter().map(|s| s * s).sum();
    if !(energy > 0.0) {
        return Err(Error::DegenerateModel);
    }
    let mut running = 0.0;
    let cumulative: Vec<f64> = all
        .iter()
        .map(|s| {
            running += s * s;
            running / energy
        })
        .collect();
    // Accumulated round-off can leave the last entry a hair under 1.
    let eadof = cumulative
        .iter()
        .position(|&f| f >= threshold)
        .map_or(all.len(), |i| i + 1);
    let eadof = eadof.min(all.iter().take_while(|&&s| s > 0.0).count()).max(1);

    let u = CMatrix::from_fn(u_full.nrows(), eadof, |r, c| u_full[(r, order[c])]);
    let v = CMatrix::from_fn(v_t_full.ncols(), eadof, |r, c| v_t_full[(order[c], r)].conj());
    Ok(PatternBasis {
        u,
        singular_values: all[..eadof].to_vec(),
        v,
        eadof,
        threshold,
        truncation_residual: 1.0 - cumulative[eadof - 1],
        all_singular_values: all,
        cumulative,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    /// `S Vᴴ i / ‖E_oc i‖`.
    pub w: CVector,
    /// `| ‖w‖ − 1 |`; zero up to round-off without truncation.
    pub norm_residual: f64,
}

pub fn equivalent_combiner(basis: &PatternBasis, model: &PixelAntennaModel, coder: &AntennaCoder) -> Result<Combiner> {
    model.check_coder(coder)?;
    if basis.v.nrows() != model.q_switches() + 1 || basis.u.nrows() != model.pattern_len() {
        return Err(Error::DimensionMismatch("basis was computed for a different model".into()));
    }
    let i = unit_feed_currents(model, coder.bits())?;
    let norm = (model.e_oc() * &i).norm();
    if !(norm >= ZERO_PATTERN_TOL) {
        return Err(Error::ZeroPattern { norm });
    }
    let mut w = basis.v.adjoint() * &i;
    for (k, s) in basis.singular_values.iter().enumerate() {
        w[k] *= *s / norm;
    }
    let norm_residual = (w.norm() - 1.0).abs();
    Ok(Combiner { w, norm_residual })
}

/// `h̃ = Uᴴ H_V e_t`, the channel seen by the orthogonal pattern basis.
pub fn basis_channel(basis: &PatternBasis, h_v: &VirtualChannel, e_t: &TransmitPattern) -> Result<CVector> {
    let field = incident_field(h_v, e_t)?;
    if field.len() != basis.u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "basis spans {} dimensions, channel has {}",
            basis.u.nrows(),
            field.len()
        )));
    }
    Ok(basis.u.adjoint() * field)
}

/// `‖h̃‖²`: no coder's gain exceeds it (up to truncation error).
pub fn gain_upper_bound(basis: &PatternBasis, h_v: &VirtualChannel, e_t: &TransmitPattern) -> Result<f64> {
    Ok(linalg::norm_sqr(&basis_channel(basis, h_v, e_t)?))
}

/// Pattern correlation `ρ_ij = ê_iᴴ ê_j` between normalised codebook patterns.
pub fn codebook_correlation(model: &PixelAntennaModel, codebook: &Codebook) -> Result<CMatrix> {
    let patterns = codebook.patterns(model)?;
    Ok(pattern_correlation(&patterns))
}

pub(crate) fn pattern_correlation(patterns: &CoderPatterns) -> CMatrix {
    let m = patterns.len();
    let mut rho = CMatrix::from_element(m, m, linalg::ZERO);
    for i in 0..m {
        rho[(i, i)] = linalg::ONE;
        for j in i + 1..m {
            let v = linalg::dotc(patterns.pattern(i), patterns.pattern(j));
            rho[(i, j)] = v;
            rho[(j, i)] = v.conj();
        }
    }
    rho
}

/// Complex matrix split into row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for ComplexMatrixJson {
    fn from(m: &CMatrix) -> Self {
        let part = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect())
                .collect()
        };
        ComplexMatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            re: part(|z| z.re),
            im: part(|z| z.im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub threshold: f64,
    pub eadof: usize,
    pub singular_values: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub truncation_residual: f64,
    /// `| ‖w‖ − 1 |` for each codebook entry, when a codebook was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combiner_residuals: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<ComplexMatrixJson>,
}

pub fn analysis_report(model: &PixelAntennaModel, threshold: f64, codebook: Option<&Codebook>) -> Result<AnalysisReport> {
    let basis = pattern_svd(model, threshold)?;
    let (combiner_residuals, correlation) = match codebook {
        Some(cb) => {
            let residuals = cb
                .coders()
                .iter()
                .map(|c| equivalent_combiner(&basis, model, c).map(|w| w.norm_residual))
                .collect::<Result<Vec<_>>>()?;
            let rho = codebook_correlation(model, cb)?;
            (Some(residuals), Some(ComplexMatrixJson::from(&rho)))
        }
        None => (None, None),
    };
    Ok(AnalysisReport {
        threshold,
        eadof: basis.eadof,
        singular_values: basis.all_singular_values.clone(),
        cumulative: basis.cumulative.clone(),
        truncation_residual: basis.truncation_residual,
        combiner_residuals,
        correlation,
    })
}

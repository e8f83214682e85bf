//! Beamspace channel assembly: i.i.d. Rayleigh virtual channels projected
//! onto transmit and receive radiation patterns.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::antenna_model::{pattern_from_bits, AntennaCoder, PixelAntennaModel};
use crate::error::{Error, Result, Side};
use crate::linalg::{self, CMatrix, CVector, ZERO};

const UNIT_NORM_TOL: f64 = 1e-12;

/// RNG sub-stream owned by one Monte Carlo trial.
///
/// Streams for different trials of the same seed never overlap, so results
/// do not depend on how trials are scheduled across threads.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `2K × 2K` matrix of angle-pair path gains, blocks `[θθ θφ; φθ φφ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualChannel {
    h_v: CMatrix,
}

impl VirtualChannel {
    pub fn new(h_v: CMatrix) -> Result<Self> {
        if h_v.nrows() != h_v.ncols() || h_v.nrows() == 0 || h_v.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "virtual channel must be 2K x 2K, got {}x{}",
                h_v.nrows(),
                h_v.ncols()
            )));
        }
        if !linalg::is_finite_matrix(&h_v) {
            return Err(Error::NonFinite("virtual channel".into()));
        }
        Ok(VirtualChannel { h_v })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h_v
    }

    pub fn k_angles(&self) -> usize {
        self.h_v.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.h_v.nrows()
    }
}

/// Fixed unit-norm transmit pattern of a conventional antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPattern {
    e_t: CVector,
}

impl TransmitPattern {
    pub fn new(e_t: CVector) -> Result<Self> {
        let norm = e_t.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidConfig(format!(
                "transmit pattern must have unit norm, got {norm}"
            )));
        }
        Ok(TransmitPattern { e_t })
    }

    pub fn vector(&self) -> &CVector {
        &self.e_t
    }
}

/// Draws every entry i.i.d. `CN(0, 1)`.
pub fn sample_virtual_channel<R: Rng + ?Sized>(k_angles: usize, rng: &mut R) -> VirtualChannel {
    let dim = 2 * k_angles;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        data.push(Complex64::new(re * scale, im * scale));
    }
    VirtualChannel {
        h_v: CMatrix::from_vec(dim, dim, data),
    }
}

/// θ-polarised, constant-magnitude pattern over all `K` angles.
pub fn isotropic_pattern(k_angles: usize) -> TransmitPattern {
    let amp = 1.0 / (k_angles as f64).sqrt();
    let e_t = CVector::from_fn(2 * k_angles, |i, _| {
        if i < k_angles {
            Complex64::new(amp, 0.0)
        } else {
            ZERO
        }
    });
    TransmitPattern { e_t }
}

/// `H_V e_t`: the field incident on the receiver before pattern projection.
pub fn incident_field(h_v: &VirtualChannel, e_t: &TransmitPattern) -> Result<CVector> {
    if h_v.dim() != e_t.e_t.len() {
        return Err(Error::DimensionMismatch(format!(
            "virtual channel is {}-dimensional, transmit pattern has {} entries",
            h_v.dim(),
            e_t.e_t.len()
        )));
    }
    Ok(&h_v.h_v * &e_t.e_t)
}

/// SISO beamspace channel `e_rᴴ H_V e_t`.
pub fn siso_channel(e_r: &CVector, h_v: &VirtualChannel, e_t: &TransmitPattern) -> Result<Complex64> {
    let field = incident_field(h_v, e_t)?;
    if e_r.len() != field.len() {
        return Err(Error::DimensionMismatch(format!(
            "receive pattern has {} entries, channel is {}-dimensional",
            e_r.len(),
            field.len()
        )));
    }
    Ok(linalg::dotc(e_r, &field))
}

/// Channel gain `|e_r(b)ᴴ H_V e_t|²` for a receive coder, with the pattern
/// normalised to unit norm.
pub fn siso_gain(
    model: &PixelAntennaModel,
    coder: &AntennaCoder,
    h_v: &VirtualChannel,
    e_t: &TransmitPattern,
) -> Result<f64> {
    model.check_coder(coder)?;
    let e_r = pattern_from_bits(model, coder.bits(), true)?;
    Ok(siso_channel(&e_r, h_v, e_t)?.norm_sqr())
}

/// Stacks normalised patterns of `coders` as matrix columns.
pub(crate) fn pattern_matrix(
    model: &PixelAntennaModel,
    coders: &[AntennaCoder],
    side: Side,
) -> Result<CMatrix> {
    let mut out = CMatrix::from_element(model.pattern_len(), coders.len(), ZERO);
    for (n, coder) in coders.iter().enumerate() {
        model.check_coder(coder)?;
        let e = pattern_from_bits(model, coder.bits(), true).map_err(|e| match e {
            Error::ZeroPattern { .. } => Error::ZeroPatternAt { side, index: n },
            other => other,
        })?;
        out.set_column(n, &e);
    }
    Ok(out)
}

/// MIMO beamspace channel `E_Rᴴ H_V E_T` (`N_R × N_T`).
pub fn mimo_channel(
    model_t: &PixelAntennaModel,
    coders_t: &[AntennaCoder],
    model_r: &PixelAntennaModel,
    coders_r: &[AntennaCoder],
    h_v: &VirtualChannel,
) -> Result<CMatrix> {
    if coders_t.is_empty() || coders_r.is_empty() {
        return Err(Error::DimensionMismatch("need at least one coder per side".into()));
    }
    if model_t.pattern_len() != h_v.dim() || model_r.pattern_len() != h_v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "models radiate over {}/{} beamspace dimensions, channel has {}",
            model_t.pattern_len(),
            model_r.pattern_len(),
            h_v.dim()
        )));
    }
    let e_t = pattern_matrix(model_t, coders_t, Side::Transmit)?;
    let e_r = pattern_matrix(model_r, coders_r, Side::Receive)?;
    Ok(mimo_channel_from_patterns(&e_t, &e_r, h_v))
}

pub(crate) fn mimo_channel_from_patterns(e_t: &CMatrix, e_r: &CMatrix, h_v: &VirtualChannel) -> CMatrix {
    e_r.adjoint() * (&h_v.h_v * e_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn isotropic_shapes() {
        let p = isotropic_pattern(1);
        assert_eq!(p.vector().as_slice(), &[c(1.0, 0.0), ZERO]);
        let p = isotropic_pattern(4);
        assert!(p.vector().iter().take(4).all(|&v| v == c(0.5, 0.0)));
        assert!(p.vector().iter().skip(4).all(|&v| v == ZERO));
        for k in [1, 3, 7, 72] {
            assert!((isotropic_pattern(k).vector().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_is_inner_product() {
        let h = VirtualChannel::new(CMatrix::identity(4, 4)).unwrap();
        let e_t = TransmitPattern::new(CVector::from_vec(vec![c(0.5, 0.0); 4])).unwrap();
        let e_r = CVector::from_vec(vec![c(0.0, 0.5), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let h_val = siso_channel(&e_r, &h, &e_t).unwrap();
        assert!((h_val - linalg::dotc(&e_r, e_t.vector())).norm() < 1e-15);
    }

    #[test]
    fn basis_vectors_pick_entry() {
        let mut rng = trial_rng(5, 0);
        let h = sample_virtual_channel(2, &mut rng);
        let mut d = CVector::from_element(4, ZERO);
        d[0] = c(1.0, 0.0);
        let e_t = TransmitPattern::new(d.clone()).unwrap();
        assert_eq!(siso_channel(&d, &h, &e_t).unwrap(), h.matrix()[(0, 0)]);
    }

    #[test]
    fn hand_checked_two_by_two() {
        let h = VirtualChannel::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 2.0), ZERO, c(1.0, 0.0)],
        ))
        .unwrap();
        let e_r = CVector::from_vec(vec![c(1.0, 0.0), ZERO]);
        let e_t = TransmitPattern::new(CVector::from_vec(vec![ZERO, c(1.0, 0.0)])).unwrap();
        assert_eq!(siso_channel(&e_r, &h, &e_t).unwrap(), c(0.0, 2.0));
    }

    #[test]
    fn dimension_mismatch() {
        let h = VirtualChannel::new(CMatrix::identity(4, 4)).unwrap();
        let e_t = isotropic_pattern(1);
        let e_r = CVector::from_element(4, ZERO);
        assert!(matches!(siso_channel(&e_r, &h, &e_t), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_virtual_channel(3, &mut trial_rng(9, 4));
        let b = sample_virtual_channel(3, &mut trial_rng(9, 4));
        let other = sample_virtual_channel(3, &mut trial_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn entries_have_unit_variance() {
        // 8 x 8 = 64 entries per draw; 1600 draws > 1e5 samples.
        let mut rng = trial_rng(1, 0);
        let mut sum = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let h = sample_virtual_channel(4, &mut rng);
            sum += h.matrix().iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += 64;
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn distinct_entries_uncorrelated() {
        let mut acc = ZERO;
        let trials = 10_000;
        for t in 0..trials {
            let h = sample_virtual_channel(1, &mut trial_rng(2, t));
            acc += h.matrix()[(0, 1)] * h.matrix()[(1, 0)].conj();
        }
        let corr = acc / trials as f64;
        assert!(corr.norm() < 0.05, "corr {corr}");
    }

    #[test]
    fn phase_rotation_conjugates() {
        let h = sample_virtual_channel(3, &mut trial_rng(3, 0));
        let e_t = isotropic_pattern(3);
        let mut e_r = CVector::from_fn(6, |i, _| c(i as f64, 1.0));
        e_r.unscale_mut(e_r.norm());
        let base = siso_channel(&e_r, &h, &e_t).unwrap();
        let psi = 0.7;
        let rot = Complex64::from_polar(1.0, psi);
        let turned = siso_channel(&(e_r * rot), &h, &e_t).unwrap();
        assert!((turned - base * Complex64::from_polar(1.0, -psi)).norm() < 1e-12);
        assert!((turned.norm_sqr() - base.norm_sqr()).abs() < 1e-12);
    }
}

//! Channel-gain objectives evaluated in port-current space.
//!
//! With `e(b) = E_oc i(b)` and incident fields `g_l = H_V^[l] e_t`,
//!
//! ```text
//! Σ_l |e(b)ᴴ g_l|² / ‖e(b)‖²  =  i(b)ᴴ A i(b) / i(b)ᴴ B i(b)
//! ```
//!
//! where `a_l = E_ocᴴ g_l`, `A = Σ a_l a_lᴴ` and `B = E_ocᴴ E_oc`. Both forms
//! are `(Q+1)`-dimensional, so an evaluation costs one reduced solve plus two
//! small quadratic forms instead of a `2K`-row product per realization.

use crate::antenna_model::{pattern_from_bits, unit_feed_currents, AntennaCoder, PixelAntennaModel, ZERO_PATTERN_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

#[derive(Debug, Clone)]
enum Numerator {
    Single(CVector),
    Sum(CMatrix),
}

/// Summed normalised-pattern channel gain over a fixed set of fields.
#[derive(Debug, Clone)]
pub struct GainForm {
    numerator: Numerator,
    gram: CMatrix,
}

impl GainForm {
    /// Gain for one incident field `g = H_V e_t`.
    pub fn single(model: &PixelAntennaModel, field: &CVector) -> Result<Self> {
        check_field(model, field)?;
        Ok(GainForm {
            numerator: Numerator::Single(model.e_oc().adjoint() * field),
            gram: model.e_oc().adjoint() * model.e_oc(),
        })
    }

    /// Sum of gains over several incident fields.
    pub fn sum<'a>(model: &PixelAntennaModel, fields: impl IntoIterator<Item = &'a CVector>) -> Result<Self> {
        let e_h = model.e_oc().adjoint();
        let n = model.q_switches() + 1;
        let mut acc = CMatrix::zeros(n, n);
        for field in fields {
            check_field(model, field)?;
            let a = &e_h * field;
            acc.ger(linalg::ONE, &a, &a.conjugate(), linalg::ONE);
        }
        Ok(GainForm {
            numerator: Numerator::Sum(acc),
            gram: model.e_oc().adjoint() * model.e_oc(),
        })
    }

    /// Objective value for raw coder bits: `-inf` for coders that radiate
    /// nothing or whose network is singular.
    pub fn eval_bits(&self, model: &PixelAntennaModel, bits: &[u8]) -> f64 {
        let Ok(i) = unit_feed_currents(model, bits) else {
            return f64::NEG_INFINITY;
        };
        let power = quad(&self.gram, &i);
        if !(power >= ZERO_PATTERN_TOL * ZERO_PATTERN_TOL) {
            return f64::NEG_INFINITY;
        }
        let num = match &self.numerator {
            Numerator::Single(a) => linalg::dotc(a, &i).norm_sqr(),
            Numerator::Sum(m) => quad(m, &i),
        };
        num / power
    }

    pub fn eval(&self, model: &PixelAntennaModel, coder: &AntennaCoder) -> Result<f64> {
        model.check_coder(coder)?;
        Ok(self.eval_bits(model, coder.bits()))
    }
}

fn quad(m: &CMatrix, x: &CVector) -> f64 {
    linalg::dotc(x, &(m * x)).re
}

fn check_field(model: &PixelAntennaModel, field: &CVector) -> Result<()> {
    if field.len() != model.pattern_len() {
        return Err(Error::DimensionMismatch(format!(
            "incident field has {} entries, model radiates over {}",
            field.len(),
            model.pattern_len()
        )));
    }
    Ok(())
}

/// Normalised patterns of a fixed list of coders, for repeated gain lookups.
#[derive(Debug, Clone)]
pub struct CoderPatterns {
    patterns: Vec<CVector>,
}

impl CoderPatterns {
    /// Fails with `ZeroPattern` (or a network error) on the first coder that
    /// cannot be normalised.
    pub fn new(model: &PixelAntennaModel, coders: &[AntennaCoder]) -> Result<Self> {
        let patterns = coders
            .iter()
            .map(|c| {
                model.check_coder(c)?;
                pattern_from_bits(model, c.bits(), true)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoderPatterns { patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn pattern(&self, index: usize) -> &CVector {
        &self.patterns[index]
    }

    pub fn patterns(&self) -> &[CVector] {
        &self.patterns
    }

    /// `|e_mᴴ g|²`, same arithmetic as [`crate::beamspace::siso_gain`].
    pub fn gain(&self, index: usize, field: &CVector) -> f64 {
        linalg::dotc(&self.patterns[index], field).norm_sqr()
    }

    /// Index and gain of the best entry; ties go to the smallest index.
    pub fn best(&self, field: &CVector) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for m in 0..self.patterns.len() {
            let g = self.gain(m, field);
            if g > best.1 {
                best = (m, g);
            }
        }
        best
    }
}

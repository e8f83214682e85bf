//! Multiport-network model of a pixel antenna.
//!
//! A pixel antenna with `Q` switches is treated as a `(Q+1)`-port network:
//! port 0 is the feed, ports `1..=Q` replace the switches. A switch that is
//! on shorts its port (`v = 0`), a switch that is off opens it (`i = 0`).
//! The radiated field for a coder `b` is the open-circuit pattern matrix
//! applied to the resulting port currents.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};

pub const RECIPROCITY_TOL: f64 = 1e-9;
pub const PASSIVITY_TOL: f64 = 1e-9;
pub const SINGULARITY_TOL: f64 = 1e-12;
/// Patterns with l2-norm below this are treated as non-radiating.
pub const ZERO_PATTERN_TOL: f64 = 1e-12;

/// Binary switch-state vector. `0` = switch on (short), `1` = switch off (open).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct AntennaCoder(Vec<u8>);

impl AntennaCoder {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidConfig(format!(
                "coder bit {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(AntennaCoder(bits))
    }

    /// All switches on.
    pub fn all_on(q: usize) -> Self {
        AntennaCoder(vec![0; q])
    }

    /// All switches off: only the feed port carries current.
    pub fn all_off(q: usize) -> Self {
        AntennaCoder(vec![1; q])
    }

    /// Coder whose bits spell `index` in binary with bit 0 most significant.
    pub fn from_index(index: u64, q: usize) -> Self {
        debug_assert!(q <= 64);
        AntennaCoder(
            (0..q)
                .map(|i| ((index >> (q - 1 - i)) & 1) as u8)
                .collect(),
        )
    }

    /// Inverse of [`AntennaCoder::from_index`]; `None` above 64 bits.
    pub fn to_index(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn flip(&mut self, index: usize) {
        self.0[index] ^= 1;
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

impl TryFrom<Vec<u8>> for AntennaCoder {
    type Error = Error;
    fn try_from(bits: Vec<u8>) -> Result<Self> {
        AntennaCoder::new(bits)
    }
}

impl From<AntennaCoder> for Vec<u8> {
    fn from(c: AntennaCoder) -> Vec<u8> {
        c.0
    }
}

impl fmt::Display for AntennaCoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Impedance matrix and open-circuit patterns of a pixel antenna.
///
/// Construction only checks shapes; physical invariants are reported by
/// [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelAntennaModel {
    q_switches: usize,
    k_angles: usize,
    z_matrix: CMatrix,
    e_oc: CMatrix,
    frequency_hz: f64,
}

impl PixelAntennaModel {
    pub fn new(z_matrix: CMatrix, e_oc: CMatrix, frequency_hz: f64) -> Result<Self> {
        let n = z_matrix.nrows();
        if n < 2 || z_matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "impedance matrix must be square with side >= 2, got {}x{}",
                z_matrix.nrows(),
                z_matrix.ncols()
            )));
        }
        if e_oc.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "e_oc has {} columns, impedance matrix implies {n}",
                e_oc.ncols()
            )));
        }
        if e_oc.nrows() == 0 || e_oc.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "e_oc must have 2K rows, got {}",
                e_oc.nrows()
            )));
        }
        Ok(PixelAntennaModel {
            q_switches: n - 1,
            k_angles: e_oc.nrows() / 2,
            z_matrix,
            e_oc,
            frequency_hz,
        })
    }

    pub fn q_switches(&self) -> usize {
        self.q_switches
    }

    pub fn k_angles(&self) -> usize {
        self.k_angles
    }

    /// Length of a pattern vector, `2K`.
    pub fn pattern_len(&self) -> usize {
        2 * self.k_angles
    }

    pub fn z_matrix(&self) -> &CMatrix {
        &self.z_matrix
    }

    pub fn e_oc(&self) -> &CMatrix {
        &self.e_oc
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn check_coder(&self, coder: &AntennaCoder) -> Result<()> {
        if coder.len() != self.q_switches {
            return Err(Error::DimensionMismatch(format!(
                "coder has {} bits, model has {} switches",
                coder.len(),
                self.q_switches
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Reciprocity,
    Passivity,
    Finiteness,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Reciprocity => "reciprocity",
            ViolationKind::Passivity => "passivity",
            ViolationKind::Finiteness => "finiteness",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.kind, v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Lists every violated model invariant. An empty report means valid.
pub fn validate_model(model: &PixelAntennaModel) -> ValidationReport {
    let mut violations = Vec::new();
    let z = &model.z_matrix;

    if !linalg::is_finite_matrix(z) {
        violations.push(Violation {
            kind: ViolationKind::Finiteness,
            detail: "impedance matrix has non-finite entries".into(),
        });
    }
    if !linalg::is_finite_matrix(&model.e_oc) {
        violations.push(Violation {
            kind: ViolationKind::Finiteness,
            detail: "e_oc has non-finite entries".into(),
        });
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }

    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let n = z.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((z[(i, j)] - z[(j, i)]).norm());
        }
    }
    if worst > RECIPROCITY_TOL * scale {
        violations.push(Violation {
            kind: ViolationKind::Reciprocity,
            detail: format!("max |Z - Z^T| = {worst:.3e} (scale {scale:.3e})"),
        });
    }

    let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (z[(i, j)].re + z[(j, i)].re));
    let eig = re.symmetric_eigenvalues();
    let lam_max = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let lam_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if lam_min < -PASSIVITY_TOL * lam_max {
        violations.push(Violation {
            kind: ViolationKind::Passivity,
            detail: format!("Re(Z) has eigenvalue {lam_min:.6e} (largest magnitude {lam_max:.6e})"),
        });
    }

    ValidationReport { violations }
}

/// Port currents `[i_A; i_P(b)]` for the given coder and feed current.
///
/// Open switches carry no current; shorted switches satisfy `v = 0`, which is
/// solved on the reduced on-switch subsystem.
pub fn port_currents(
    model: &PixelAntennaModel,
    coder: &AntennaCoder,
    antenna_current: Complex64,
) -> Result<CVector> {
    model.check_coder(coder)?;
    let mut currents = unit_feed_currents(model, coder.bits())?;
    if antenna_current != ONE {
        currents *= antenna_current;
    }
    Ok(currents)
}

/// Currents for `i_A = 1`. `bits` is assumed to have length `Q`.
pub(crate) fn unit_feed_currents(model: &PixelAntennaModel, bits: &[u8]) -> Result<CVector> {
    let q = model.q_switches;
    let mut currents = CVector::from_element(q + 1, ZERO);
    currents[0] = ONE;

    let on: Vec<usize> = (0..q).filter(|&p| bits[p] == 0).collect();
    if on.is_empty() {
        return Ok(currents);
    }

    let z = &model.z_matrix;
    let s = on.len();
    let sub = CMatrix::from_fn(s, s, |r, c| z[(on[r] + 1, on[c] + 1)]);
    let rhs = CVector::from_fn(s, |r, _| -z[(on[r] + 1, 0)]);

    let lu = sub.lu();
    let upper = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for k in 0..s {
        let p = upper[(k, k)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    let ratio = if pmax > 0.0 { pmin / pmax } else { 0.0 };
    if !(ratio >= SINGULARITY_TOL) {
        return Err(Error::SingularNetwork { ratio });
    }
    let solved = lu
        .solve(&rhs)
        .ok_or(Error::SingularNetwork { ratio })?;
    for (r, &p) in on.iter().enumerate() {
        currents[p + 1] = solved[r];
    }
    Ok(currents)
}

/// Radiated field `E_oc · i(b)` with a unit feed current, optionally scaled
/// to unit l2-norm.
pub fn radiation_pattern(
    model: &PixelAntennaModel,
    coder: &AntennaCoder,
    normalize: bool,
) -> Result<CVector> {
    model.check_coder(coder)?;
    pattern_from_bits(model, coder.bits(), normalize)
}

pub(crate) fn pattern_from_bits(
    model: &PixelAntennaModel,
    bits: &[u8],
    normalize: bool,
) -> Result<CVector> {
    let currents = unit_feed_currents(model, bits)?;
    let mut pattern = &model.e_oc * currents;
    if normalize {
        let norm = pattern.norm();
        if !(norm >= ZERO_PATTERN_TOL) {
            return Err(Error::ZeroPattern { norm });
        }
        pattern.unscale_mut(norm);
    }
    Ok(pattern)
}

fn default_resistance_scale() -> f64 {
    50.0
}

fn default_reactance_scale() -> f64 {
    50.0
}

fn default_frequency() -> f64 {
    2.4e9
}

/// Recipe for a random but physically consistent model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub q_switches: usize,
    pub k_angles: usize,
    #[serde(default = "default_resistance_scale")]
    pub resistance_scale: f64,
    #[serde(default = "default_reactance_scale")]
    pub reactance_scale: f64,
    #[serde(default)]
    pub singular_spectrum: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
}

impl SynthesisSpec {
    pub fn new(q_switches: usize, k_angles: usize, seed: u64) -> Self {
        SynthesisSpec {
            q_switches,
            k_angles,
            resistance_scale: default_resistance_scale(),
            reactance_scale: default_reactance_scale(),
            singular_spectrum: None,
            seed,
            frequency_hz: default_frequency(),
        }
    }

    pub fn with_spectrum(mut self, spectrum: Vec<f64>) -> Self {
        self.singular_spectrum = Some(spectrum);
        self
    }

    fn check(&self) -> Result<()> {
        if self.q_switches == 0 || self.k_angles == 0 {
            return Err(Error::InvalidSpec("q_switches and k_angles must be >= 1".into()));
        }
        if !(self.resistance_scale.is_finite() && self.resistance_scale > 0.0) {
            return Err(Error::InvalidSpec("resistance_scale must be positive and finite".into()));
        }
        if !self.reactance_scale.is_finite() {
            return Err(Error::InvalidSpec("reactance_scale must be finite".into()));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::InvalidSpec("frequency_hz must be positive and finite".into()));
        }
        if let Some(spec) = &self.singular_spectrum {
            let max_len = (2 * self.k_angles).min(self.q_switches + 1);
            if spec.is_empty() || spec.len() > max_len {
                return Err(Error::InvalidSpec(format!(
                    "singular_spectrum length {} must be in 1..={max_len}",
                    spec.len()
                )));
            }
            if spec.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::InvalidSpec("singular values must be finite and >= 0".into()));
            }
            if spec.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidSpec("singular_spectrum must be non-increasing".into()));
            }
            if spec[0] == 0.0 {
                return Err(Error::InvalidSpec("singular_spectrum is identically zero".into()));
            }
        }
        Ok(())
    }
}

/// Builds a random reciprocal, passive model. Deterministic in `spec.seed`.
pub fn synthesize_model(spec: &SynthesisSpec) -> Result<PixelAntennaModel> {
    spec.check()?;
    let n = spec.q_switches + 1;
    let rows = 2 * spec.k_angles;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    // Re(Z) = A·Aᵀ is a Gram matrix, so passivity holds by construction.
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| gauss() / (n as f64).sqrt());
    let resistance = (&a * a.transpose()) * spec.resistance_scale;
    let w = DMatrix::<f64>::from_fn(n, n, |_, _| gauss());
    let reactance = (&w + w.transpose()) * (0.5 * spec.reactance_scale / (n as f64).sqrt());
    let z = CMatrix::from_fn(n, n, |i, j| {
        // Enforce exact symmetry after the floating-point products.
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        Complex64::new(resistance[(r, c)], reactance[(r, c)])
    });

    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut e_oc = CMatrix::from_fn(rows, n, |_, _| Complex64::new(gauss() * half, gauss() * half));

    if let Some(spectrum) = &spec.singular_spectrum {
        let svd = e_oc.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^H");
        let p = u.ncols();
        let s = CMatrix::from_fn(p, p, |i, j| {
            if i == j {
                Complex64::new(spectrum.get(i).copied().unwrap_or(0.0), 0.0)
            } else {
                ZERO
            }
        });
        e_oc = u * s * v_t;
    }

    PixelAntennaModel::new(z, e_oc, spec.frequency_hz)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    frequency_hz: f64,
    q_switches: usize,
    k_angles: usize,
    z_re: Vec<f64>,
    z_im: Vec<f64>,
    e_oc_re: Vec<f64>,
    e_oc_im: Vec<f64>,
}

/// Line (1-based) of the first occurrence of `"key"` in the document.
fn field_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].matches('\n').count() + 1)
        .unwrap_or(0)
}

/// Parses and validates a model document.
pub fn load_model(bytes: &[u8]) -> Result<PixelAntennaModel> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(0, "document", format!("not UTF-8: {e}")))?;
    let doc: ModelDocument = serde_json::from_str(text)
        .map_err(|e| Error::parse(e.line(), "document", e.to_string()))?;

    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(
            field_line(text, "version"),
            "version",
            format!("unsupported version {}, expected {MODEL_FORMAT_VERSION}", doc.version),
        ));
    }
    if doc.q_switches == 0 || doc.k_angles == 0 {
        return Err(Error::parse(
            field_line(text, "q_switches"),
            "q_switches/k_angles",
            "must both be >= 1",
        ));
    }
    let n = doc.q_switches + 1;
    let rows = 2 * doc.k_angles;

    for (key, values) in [("z_re", &doc.z_re), ("z_im", &doc.z_im)] {
        if values.len() != n * n {
            return Err(Error::parse(
                field_line(text, key),
                key,
                format!("expected {} entries for a {n}x{n} matrix, found {}", n * n, values.len()),
            ));
        }
    }
    for (key, values) in [("e_oc_re", &doc.e_oc_re), ("e_oc_im", &doc.e_oc_im)] {
        if values.len() % rows == 0 && values.len() / rows != n {
            return Err(Error::parse(
                field_line(text, key),
                "e_oc columns",
                format!("expected {n} columns (Q+1), found {}", values.len() / rows),
            ));
        }
        if values.len() != rows * n {
            return Err(Error::parse(
                field_line(text, key),
                key,
                format!("expected {} entries for a {rows}x{n} matrix, found {}", rows * n, values.len()),
            ));
        }
    }
    for (key, values) in [
        ("z_re", &doc.z_re),
        ("z_im", &doc.z_im),
        ("e_oc_re", &doc.e_oc_re),
        ("e_oc_im", &doc.e_oc_im),
    ] {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(
                field_line(text, key),
                key,
                format!("entry {pos} is not finite"),
            ));
        }
    }
    if !(doc.frequency_hz.is_finite() && doc.frequency_hz > 0.0) {
        return Err(Error::parse(
            field_line(text, "frequency_hz"),
            "frequency_hz",
            "must be positive and finite",
        ));
    }

    let z = CMatrix::from_fn(n, n, |i, j| Complex64::new(doc.z_re[i * n + j], doc.z_im[i * n + j]));
    let e_oc = CMatrix::from_fn(rows, n, |i, j| {
        Complex64::new(doc.e_oc_re[i * n + j], doc.e_oc_im[i * n + j])
    });
    let model = PixelAntennaModel::new(z, e_oc, doc.frequency_hz)?;
    let report = validate_model(&model);
    if !report.is_empty() {
        return Err(Error::ValidationFailed(report));
    }
    Ok(model)
}

fn row_major(m: &CMatrix, part: impl Fn(&Complex64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(part(&m[(i, j)]));
        }
    }
    out
}

/// Serialises a model. Numbers use shortest round-trip formatting, so
/// `load_model(save_model(m))` reproduces every bit.
pub fn save_model(model: &PixelAntennaModel) -> Result<Vec<u8>> {
    if !linalg::is_finite_matrix(&model.z_matrix) || !linalg::is_finite_matrix(&model.e_oc) {
        return Err(Error::NonFinite("model matrices".into()));
    }
    let arrays = [
        ("z_re", row_major(&model.z_matrix, |z| z.re)),
        ("z_im", row_major(&model.z_matrix, |z| z.im)),
        ("e_oc_re", row_major(&model.e_oc, |z| z.re)),
        ("e_oc_im", row_major(&model.e_oc, |z| z.im)),
    ];
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"version\": {MODEL_FORMAT_VERSION},\n"));
    out.push_str(&format!(
        "  \"frequency_hz\": {},\n",
        serde_json::to_string(&model.frequency_hz).map_err(|e| Error::NonFinite(e.to_string()))?
    ));
    out.push_str(&format!("  \"q_switches\": {},\n", model.q_switches));
    out.push_str(&format!("  \"k_angles\": {},\n", model.k_angles));
    for (idx, (key, values)) in arrays.iter().enumerate() {
        let body = serde_json::to_string(values).map_err(|e| Error::NonFinite(e.to_string()))?;
        let sep = if idx + 1 == arrays.len() { "" } else { "," };
        out.push_str(&format!("  \"{key}\": {body}{sep}\n"));
    }
    out.push_str("}\n");
    Ok(out.into_bytes())
}

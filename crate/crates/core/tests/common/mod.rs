//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pixelcode::antenna_model::{synthesize_model, AntennaCoder, PixelAntennaModel, SynthesisSpec};
use pixelcode::beamspace::{sample_virtual_channel, trial_rng, VirtualChannel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Off-switch load used by the finite-penalty formulation.
pub const PENALTY_OHMS: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Port currents from `i_P = -(Z_PP + Z_L)^-1 z_PA` with a large resistive
/// load on open switches: the textbook form the exact solver replaces.
pub fn penalty_currents(model: &PixelAntennaModel, coder: &AntennaCoder) -> CVector {
    let z = model.z_matrix();
    let q = model.q_switches();
    let mut zpp = CMatrix::from_fn(q, q, |r, k| z[(r + 1, k + 1)]);
    for (p, &b) in coder.bits().iter().enumerate() {
        if b == 1 {
            zpp[(p, p)] += c(PENALTY_OHMS, 0.0);
        }
    }
    let zpa = CVector::from_fn(q, |r, _| -z[(r + 1, 0)]);
    let ip = zpp.lu().solve(&zpa).expect("penalty system solvable");
    let mut out = CVector::from_element(q + 1, c(1.0, 0.0));
    for p in 0..q {
        out[p + 1] = ip[p];
    }
    out
}

/// Water level by bisection on `sum max(mu - noise/lambda, 0) = P`.
pub fn bisection_waterfill(eigenvalues: &[f64], total_power: f64, noise: f64) -> (Vec<f64>, f64) {
    let lam_max = eigenvalues.iter().copied().fold(0.0, f64::max);
    let live = |l: f64| l > 1e-12 * lam_max;
    let used = |mu: f64| -> f64 {
        eigenvalues
            .iter()
            .filter(|&&l| live(l))
            .map(|&l| (mu - noise / l).max(0.0))
            .sum()
    };
    let floor = eigenvalues
        .iter()
        .filter(|&&l| live(l))
        .map(|&l| noise / l)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (floor, floor + total_power);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if used(mid) < total_power {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let powers = eigenvalues
        .iter()
        .map(|&l| if live(l) { (mu - noise / l).max(0.0) } else { 0.0 })
        .collect();
    (powers, mu)
}

/// `log2 det(I + H Q Hᴴ / noise)` for an explicit covariance `Q`, by LU.
pub fn logdet_capacity(h: &CMatrix, covariance: &CMatrix, noise: f64) -> f64 {
    let n = h.nrows();
    let m = CMatrix::identity(n, n) + h * covariance * h.adjoint() / c(noise, 0.0);
    m.determinant().re.log2()
}

pub fn complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-ish random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    complex_gaussian(n, n, rng).qr().q()
}

pub fn model(q: usize, k: usize, seed: u64) -> PixelAntennaModel {
    synthesize_model(&SynthesisSpec::new(q, k, seed)).expect("synthesis")
}

pub fn model_with_spectrum(q: usize, k: usize, seed: u64, spectrum: Vec<f64>) -> PixelAntennaModel {
    synthesize_model(&SynthesisSpec::new(q, k, seed).with_spectrum(spectrum)).expect("synthesis")
}

/// Singular values giving exactly five live degrees of freedom.
pub fn rank_five_spectrum() -> Vec<f64> {
    vec![1.0, 0.9, 0.8, 0.7, 0.6]
}

pub fn channel(k: usize, seed: u64, trial: u64) -> VirtualChannel {
    sample_virtual_channel(k, &mut trial_rng(seed, trial))
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

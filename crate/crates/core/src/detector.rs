//! Per-cell GLR detection with a known or estimated noise power.
//!
//! With `sigma^2` known the GLR statistic of `H1: y = alpha h + n` against
//! `H0: y = n` is `2 |h^H y|^2 / (sigma^2 |h|^2)`. It is central chi-squared
//! with two degrees of freedom under `H0` and noncentral with parameter
//! `2 |alpha|^2 |h|^2 / sigma^2` under `H1`, so thresholds and detection
//! probabilities have closed or rapidly convergent forms.

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::array_signal::{spatial_signature, AngleGrid, ArrayConfig, ScanSnapshots, WeightMatrix};
use crate::special::{bessel_i0e, poisson_cdf, poisson_pmf};
use crate::{Error, Result};

/// Truncation bound on the neglected Poisson mass in the noncentral tail.
const TAIL_TRUNCATION: f64 = 1e-13;

/// GLR statistics of one scan, `L x G`, bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    n_bins: usize,
    n_ranges: usize,
    step: usize,
    values: Vec<f64>,
}

impl DetectionMap {
    pub fn new(n_bins: usize, n_ranges: usize, step: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_bins * n_ranges {
            return Err(Error::DimensionMismatch {
                expected: n_bins * n_ranges,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::invalid(
                "values",
                format!("statistics must be nonnegative, got {v}"),
            ));
        }
        Ok(Self {
            n_bins,
            n_ranges,
            step,
            values,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_ranges(&self) -> usize {
        self.n_ranges
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn get(&self, bin: usize, range: usize) -> f64 {
        self.values[bin * self.n_ranges + range]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.n_ranges..(bin + 1) * self.n_ranges]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `t_l = max_g Lambda_{l,g}` for every bin.
    pub fn row_maxima(&self) -> Vec<f64> {
        (0..self.n_bins)
            .map(|l| self.row(l).iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// Location of the largest statistic; ties go to the first cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.n_ranges, best % self.n_ranges)
    }
}

/// Nominal false-alarm probability and the matching threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub p_fa: f64,
    pub lambda_bar: f64,
}

impl ThresholdConfig {
    pub fn from_pfa(p_fa: f64) -> Result<Self> {
        Ok(Self {
            p_fa,
            lambda_bar: threshold_from_pfa(p_fa)?,
        })
    }
}

/// White noise power, either trusted as configured or re-estimated per scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub known: bool,
}

impl NoiseModel {
    pub fn new(sigma2: f64, known: bool) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        Ok(Self { sigma2, known })
    }

    pub fn known(sigma2: f64) -> Result<Self> {
        Self::new(sigma2, true)
    }
}

fn inner(h: &[Complex64], y: &[Complex64]) -> Complex64 {
    h.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn signature_norm(h: &[Complex64]) -> Result<f64> {
    let n2 = h.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(n2 > 0.0) {
        return Err(Error::ZeroSignature);
    }
    Ok(n2)
}

/// `Lambda = (2 / sigma^2) |h^H y|^2 / |h|^2`.
pub fn glr_statistic(y: &[Complex64], h: &[Complex64], sigma2: f64) -> Result<f64> {
    if y.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            actual: y.len(),
        });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "must be positive"));
    }
    let n2 = signature_norm(h)?;
    Ok(2.0 * inner(h, y).norm_sqr() / (sigma2 * n2))
}

/// ML amplitude estimate `h^H y / |h|`. With this normalisation
/// `2 |alpha_hat|^2 / sigma^2` is exactly the GLR statistic.
pub fn ml_alpha(y: &[Complex64], h: &[Complex64]) -> Result<Complex64> {
    if y.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            actual: y.len(),
        });
    }
    let n2 = signature_norm(h)?;
    Ok(inner(h, y) / n2.sqrt())
}

/// Inverse of the chi-squared(2) survival function: `-2 ln(p_fa)`.
pub fn threshold_from_pfa(p_fa: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::invalid("p_fa", format!("must lie in (0, 1), got {p_fa}")));
    }
    Ok(-2.0 * p_fa.ln())
}

/// Survival function of the central chi-squared(2): `exp(-x / 2)`.
pub fn chi2_2_tail(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("must be nonnegative, got {x}")));
    }
    Ok((-x / 2.0).exp())
}

/// Survival function of the noncentral chi-squared with two degrees of
/// freedom, `Pr{chi2_2(delta) > x} = Q_1(sqrt(delta), sqrt(x))`.
///
/// Uses the Poisson mixture `sum_k Pois(k; delta/2) P(Pois(x/2) <= k)`,
/// summed outwards from the mode of the mixing weights. Summation stops on
/// each side once the geometric bound on the remaining weights drops below
/// `1e-13`, so the absolute truncation error is below `2e-13`.
pub fn noncentral_chi2_2_tail(x: f64, delta: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("must be nonnegative, got {x}")));
    }
    if !(delta >= 0.0) || delta.is_infinite() {
        return Err(Error::invalid(
            "delta",
            format!("must be finite and nonnegative, got {delta}"),
        ));
    }
    if delta == 0.0 {
        return chi2_2_tail(x);
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let mu = delta / 2.0;
    let nu = x / 2.0;

    let mode = mu.floor() as u64;
    let w0 = poisson_pmf(mode, mu);
    let s0 = poisson_cdf(mode, nu);
    let p0 = poisson_pmf(mode, nu);
    let mut sum = w0 * s0;

    // upwards: weights shrink by mu / (k + 1) < 1
    let (mut k, mut w, mut s, mut p) = (mode, w0, s0, p0);
    loop {
        k += 1;
        w *= mu / k as f64;
        p *= nu / k as f64;
        s = (s + p).min(1.0);
        sum += w * s;
        let r = mu / (k + 1) as f64;
        if r < 1.0 && w * r / (1.0 - r) < TAIL_TRUNCATION {
            break;
        }
    }

    // downwards: weights shrink by k / mu < 1
    let (mut k, mut w, mut s, mut p) = (mode, w0, s0, p0);
    while k > 0 {
        s = (s - p).max(0.0);
        p *= k as f64 / nu;
        w *= k as f64 / mu;
        k -= 1;
        sum += w * s;
        let r = k as f64 / mu;
        if w * r / (1.0 - r) < TAIL_TRUNCATION {
            break;
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Density of the noncentral chi-squared with two degrees of freedom,
/// `0.5 exp(-(x + delta) / 2) I_0(sqrt(x delta))`.
pub fn noncentral_chi2_2_pdf(x: f64, delta: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("must be nonnegative, got {x}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", format!("must be nonnegative, got {delta}")));
    }
    let gap = x.sqrt() - delta.sqrt();
    Ok(0.5 * (-0.5 * gap * gap).exp() * bessel_i0e((x * delta).sqrt()))
}

/// Median of `|n|^2 / sigma^2` for white noise of dimension `len`, i.e. the
/// median of a Gamma(len, 1) variable.
pub fn noise_energy_median(len: usize) -> f64 {
    Gamma::new(len as f64, 1.0).expect("shape is positive").inverse_cdf(0.5)
}

/// Robust noise power estimate from one scan: the median over cells of
/// `|y|^2`, divided by the noise-only median of that energy.
pub fn estimate_noise_power(scan: &ScanSnapshots, array: &ArrayConfig) -> Result<f64> {
    if scan.snapshot_len() != array.snapshot_len() {
        return Err(Error::DimensionMismatch {
            expected: array.snapshot_len(),
            actual: scan.snapshot_len(),
        });
    }
    let energies: Vec<f64> = scan
        .cells()
        .map(|y| y.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect();
    estimate_noise_from_energies(energies, array.snapshot_len())
}

fn estimate_noise_from_energies(mut energies: Vec<f64>, len: usize) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::invalid("snapshots", "no cells to estimate noise from"));
    }
    if energies.len() < 10 {
        return Err(Error::invalid("snapshots", "need at least 10 cells to estimate noise"));
    }
    let n = energies.len();
    let mid = n / 2;
    let (_, upper, _) = energies.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if n % 2 == 1 {
        upper
    } else {
        let lower = energies[..mid].iter().copied().fold(f64::MIN, f64::max);
        0.5 * (lower + upper)
    };
    let est = median / noise_energy_median(len);
    if !(est > 0.0) {
        return Err(Error::invalid("snapshots", "estimated noise power is not positive"));
    }
    Ok(est)
}

/// Tests every angle-range cell with the GLR statistic. The signature of each
/// angle bin is computed once and reused over its range cells.
pub fn scan(
    snapshots: &ScanSnapshots,
    weights: &WeightMatrix,
    noise: &NoiseModel,
    grid: &AngleGrid,
    array: &ArrayConfig,
) -> Result<DetectionMap> {
    if snapshots.n_bins() != grid.n_bins() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_bins(),
            actual: snapshots.n_bins(),
        });
    }
    if snapshots.snapshot_len() != array.snapshot_len() {
        return Err(Error::DimensionMismatch {
            expected: array.snapshot_len(),
            actual: snapshots.snapshot_len(),
        });
    }
    let sigma2 = if noise.known {
        noise.sigma2
    } else {
        estimate_noise_power(snapshots, array)?
    };
    let g = snapshots.n_ranges();
    let mut values = Vec::with_capacity(grid.n_bins() * g);
    for bin in 0..grid.n_bins() {
        let h = spatial_signature(grid.angle(bin), weights, array)?;
        let h = h.as_slice();
        let scale = 2.0 / (sigma2 * signature_norm(h)?);
        for range in 0..g {
            values.push(scale * inner(h, snapshots.cell(bin, range)).norm_sqr());
        }
    }
    DetectionMap::new(grid.n_bins(), g, snapshots.step(), values)
}

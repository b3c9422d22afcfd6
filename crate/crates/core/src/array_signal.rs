//! Array geometry, steering vectors, beampatterns and synthetic snapshots.
//!
//! Both subarrays are uniform linear arrays with half-wavelength spacing, so
//! element `m` of a steering vector is `exp(j * pi * m * sin(theta))`.
//! After the matched filter the measurement in one angle-range cell is the
//! vectorised `N_R x N_T` matrix `alpha * a_R a_T^T C + N`, i.e.
//! `y = alpha * h(theta) + n` with `h = (C^T a_T) kron a_R`.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, Error, Result};

/// Normalised beampattern values are floored here instead of `-inf` when a
/// grid angle falls on an exact null.
pub const NULL_FLOOR_DB: f64 = -100.0;

const POWER_REL_TOL: f64 = 1e-9;
const HERMITIAN_REL_TOL: f64 = 1e-10;
const PSD_REL_TOL: f64 = 1e-10;

/// Numbers of transmit and receive elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize) -> Result<Self> {
        if n_tx == 0 {
            return Err(Error::invalid("n_tx", "must be at least 1"));
        }
        if n_rx == 0 {
            return Err(Error::invalid("n_rx", "must be at least 1"));
        }
        Ok(Self { n_tx, n_rx })
    }

    /// Length of a vectorised snapshot, `N_T * N_R`.
    pub fn snapshot_len(&self) -> usize {
        self.n_tx * self.n_rx
    }
}

/// Uniform angle grid with inclusive endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    theta_min: f64,
    theta_max: f64,
    angles: Vec<f64>,
}

impl AngleGrid {
    pub fn new(theta_min: f64, theta_max: f64, n_bins: usize) -> Result<Self> {
        let half_pi = PI / 2.0;
        if !(theta_min.is_finite() && theta_max.is_finite()) {
            return Err(Error::invalid("theta", "grid limits must be finite"));
        }
        if theta_min <= -half_pi || theta_max >= half_pi {
            return Err(Error::invalid(
                "theta",
                "grid limits must lie strictly inside (-pi/2, pi/2)",
            ));
        }
        if theta_min >= theta_max {
            return Err(Error::invalid("theta", "theta_min must be below theta_max"));
        }
        if n_bins < 2 {
            return Err(Error::invalid("n_bins", "need at least two angle bins"));
        }
        let step = (theta_max - theta_min) / (n_bins - 1) as f64;
        let mut angles: Vec<f64> = (0..n_bins).map(|l| theta_min + step * l as f64).collect();
        angles[n_bins - 1] = theta_max;
        Ok(Self {
            theta_min,
            theta_max,
            angles,
        })
    }

    /// Grid spanning `[min_deg, max_deg]` in degrees.
    pub fn from_degrees(min_deg: f64, max_deg: f64, n_bins: usize) -> Result<Self> {
        Self::new(min_deg.to_radians(), max_deg.to_radians(), n_bins)
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn n_bins(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, bin: usize) -> f64 {
        self.angles[bin]
    }

    /// Index of the grid angle closest to `theta`. Exact midpoints go to the
    /// lower index.
    pub fn nearest_bin(&self, theta: f64) -> usize {
        let step = (self.theta_max - self.theta_min) / (self.n_bins() - 1) as f64;
        let pos = (theta - self.theta_min) / step;
        let lower = pos.floor().clamp(0.0, (self.n_bins() - 1) as f64) as usize;
        if lower + 1 >= self.n_bins() {
            return self.n_bins() - 1;
        }
        let frac = pos - lower as f64;
        // treat anything within a few ulps of one half as a tie
        if frac <= 0.5 + 1e-9 {
            lower
        } else {
            lower + 1
        }
    }
}

/// Weighting matrix `C` mixing the orthonormal baseband waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    c: CMatrix,
    p_t: f64,
}

impl WeightMatrix {
    /// Wraps `c`, checking that `trace(C C^H)` equals `p_t`.
    pub fn new(c: CMatrix, p_t: f64) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::DimensionMismatch {
                expected: c.nrows(),
                actual: c.ncols(),
            });
        }
        check_power(p_t)?;
        let power = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (power - p_t).abs() > POWER_REL_TOL * p_t {
            return Err(Error::PowerMismatch {
                expected: p_t,
                actual: power,
            });
        }
        Ok(Self { c, p_t })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn n_tx(&self) -> usize {
        self.c.nrows()
    }

    pub fn total_power(&self) -> f64 {
        self.p_t
    }

    /// `R_W = C C^H`.
    pub fn covariance(&self) -> Result<WaveformCovariance> {
        WaveformCovariance::new(&self.c * self.c.adjoint(), self.p_t)
    }
}

/// Hermitian PSD covariance `R_W` of the transmitted waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformCovariance {
    r: CMatrix,
    p_t: f64,
}

impl WaveformCovariance {
    /// Validates Hermitian symmetry, positive semidefiniteness and the trace.
    /// The stored matrix is the exact Hermitian part of `r`.
    pub fn new(r: CMatrix, p_t: f64) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::DimensionMismatch {
                expected: r.nrows(),
                actual: r.ncols(),
            });
        }
        check_power(p_t)?;
        let scale = r.norm().max(f64::MIN_POSITIVE);
        let asym = (&r - r.adjoint()).norm() / scale;
        if asym > HERMITIAN_REL_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let r = (&r + r.adjoint()).scale(0.5);
        let trace = r.trace().re;
        if (trace - p_t).abs() > POWER_REL_TOL * p_t {
            return Err(Error::PowerMismatch {
                expected: p_t,
                actual: trace,
            });
        }
        let min_eig = SymmetricEigen::new(r.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_REL_TOL * trace {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(Self { r, p_t })
    }

    /// Isotropic covariance `(p_t / n_tx) I`.
    pub fn isotropic(n_tx: usize, p_t: f64) -> Result<Self> {
        check_power(p_t)?;
        if n_tx == 0 {
            return Err(Error::invalid("n_tx", "must be at least 1"));
        }
        let r = CMatrix::identity(n_tx, n_tx).scale(p_t / n_tx as f64);
        Ok(Self { r, p_t })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.r
    }

    pub fn n_tx(&self) -> usize {
        self.r.nrows()
    }

    pub fn total_power(&self) -> f64 {
        self.p_t
    }
}

fn check_power(p_t: f64) -> Result<()> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::invalid("p_t", format!("must be positive, got {p_t}")));
    }
    Ok(())
}

/// A vectorised measurement for one angle-range cell at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub y: Vec<Complex64>,
    pub bin: usize,
    pub range: usize,
    pub step: usize,
}

/// Steering vector `exp(j pi m sin(theta))`, `m = 0..n`.
fn steering(theta: f64, n: usize) -> CVector {
    let phase = PI * theta.sin();
    CVector::from_iterator(n, (0..n).map(|m| Complex64::from_polar(1.0, phase * m as f64)))
}

/// Transmit steering vector `a_T(theta)`.
pub fn steering_tx(theta: f64, n_tx: usize) -> CVector {
    steering(theta, n_tx)
}

/// Receive steering vector `a_R(theta)`.
pub fn steering_rx(theta: f64, n_rx: usize) -> CVector {
    steering(theta, n_rx)
}

/// `B(theta) = a_T^T R_W a_T^*`, clamped at zero.
pub fn beampattern(cov: &WaveformCovariance, theta: f64) -> f64 {
    let a = steering_tx(theta, cov.n_tx());
    quadratic_form(cov.matrix(), &a)
}

/// `a^T R a^*` for Hermitian `R`.
pub(crate) fn quadratic_form(r: &CMatrix, a: &CVector) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for col in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        for row in 0..n {
            s += a[row] * r[(row, col)];
        }
        acc += (s * a[col].conj()).re;
    }
    acc.max(0.0)
}

/// `B(theta)` sampled over every grid angle.
pub fn beampattern_over_grid(cov: &WaveformCovariance, grid: &AngleGrid) -> Vec<f64> {
    grid.angles().iter().map(|&t| beampattern(cov, t)).collect()
}

/// `D(theta) = 10 log10(B(theta) / max B)` over the grid, floored at
/// [`NULL_FLOOR_DB`].
pub fn normalized_beampattern_db(cov: &WaveformCovariance, grid: &AngleGrid) -> Result<Vec<f64>> {
    normalize_db(&beampattern_over_grid(cov, grid))
}

/// Normalises raw beampattern samples to dB relative to their maximum.
pub fn normalize_db(samples: &[f64]) -> Result<Vec<f64>> {
    let peak = samples.iter().copied().fold(0.0_f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::ZeroBeampattern);
    }
    Ok(samples
        .iter()
        .map(|&b| {
            if b >= peak {
                0.0
            } else {
                (10.0 * (b / peak).log10()).max(NULL_FLOOR_DB)
            }
        })
        .collect())
}

/// `h(theta) = (C^T a_T(theta)) kron a_R(theta)`.
pub fn spatial_signature(theta: f64, weights: &WeightMatrix, array: &ArrayConfig) -> Result<CVector> {
    if weights.n_tx() != array.n_tx {
        return Err(Error::DimensionMismatch {
            expected: array.n_tx,
            actual: weights.n_tx(),
        });
    }
    let a_t = steering_tx(theta, array.n_tx);
    let a_r = steering_rx(theta, array.n_rx);
    let tx = weights.matrix().transpose() * a_t;
    Ok(tx.kronecker(&a_r))
}

/// A target present in the scene at the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTarget {
    pub bin: usize,
    /// Zero-based range cell.
    pub range: usize,
    /// `E|alpha|^2 / sigma^2`, linear scale.
    pub snr: f64,
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn check_noise(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    Ok(())
}

fn check_targets(targets: &[SceneTarget], n_bins: usize, n_ranges: usize) -> Result<()> {
    for (i, t) in targets.iter().enumerate() {
        if t.bin >= n_bins || t.range >= n_ranges {
            return Err(Error::invalid(
                "targets",
                format!("cell ({}, {}) outside the scene", t.bin, t.range),
            ));
        }
        if !(t.snr.is_finite() && t.snr >= 0.0) {
            return Err(Error::invalid("targets", "snr must be finite and nonnegative"));
        }
        if targets[..i].iter().any(|o| o.bin == t.bin && o.range == t.range) {
            return Err(Error::invalid(
                "targets",
                format!("two targets share cell ({}, {})", t.bin, t.range),
            ));
        }
    }
    Ok(())
}

fn fill_cell<R: Rng + ?Sized>(
    out: &mut [Complex64],
    signature: &CVector,
    target: Option<&SceneTarget>,
    sigma2: f64,
    rng: &mut R,
) {
    let alpha = target.map(|t| complex_gaussian(rng, t.snr * sigma2));
    for z in out.iter_mut() {
        *z = complex_gaussian(rng, sigma2);
    }
    if let Some(alpha) = alpha {
        for (z, h) in out.iter_mut().zip(signature.iter()) {
            *z += alpha * h;
        }
    }
}

/// Draws the snapshot of cell `(bin, range)`: white noise of power `sigma2`
/// plus `alpha h(theta_bin)` when a target occupies the cell, with a fresh
/// `alpha ~ CN(0, snr * sigma2)`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_snapshot<R: Rng + ?Sized>(
    bin: usize,
    range: usize,
    step: usize,
    targets: &[SceneTarget],
    weights: &WeightMatrix,
    array: &ArrayConfig,
    grid: &AngleGrid,
    sigma2: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    check_noise(sigma2)?;
    check_targets(targets, grid.n_bins(), usize::MAX)?;
    if bin >= grid.n_bins() {
        return Err(Error::invalid("bin", format!("{bin} outside the grid")));
    }
    let h = spatial_signature(grid.angle(bin), weights, array)?;
    let target = targets.iter().find(|t| t.bin == bin && t.range == range);
    let mut y = vec![Complex64::new(0.0, 0.0); array.snapshot_len()];
    fill_cell(&mut y, &h, target, sigma2, rng);
    Ok(Snapshot { y, bin, range, step })
}

/// Snapshots of every angle-range cell of one scan, stored contiguously in
/// bin-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSnapshots {
    n_bins: usize,
    n_ranges: usize,
    len: usize,
    step: usize,
    data: Vec<Complex64>,
}

impl ScanSnapshots {
    pub fn new(n_bins: usize, n_ranges: usize, len: usize, step: usize) -> Self {
        Self {
            n_bins,
            n_ranges,
            len,
            step,
            data: vec![Complex64::new(0.0, 0.0); n_bins * n_ranges * len],
        }
    }

    /// Builds a scan from individually supplied snapshots; every cell must be
    /// present exactly once.
    pub fn from_snapshots(n_bins: usize, n_ranges: usize, len: usize, step: usize, cells: &[Snapshot]) -> Result<Self> {
        let mut scan = Self::new(n_bins, n_ranges, len, step);
        let mut seen = vec![false; n_bins * n_ranges];
        for s in cells {
            if s.bin >= n_bins || s.range >= n_ranges {
                return Err(Error::invalid(
                    "snapshots",
                    format!("cell ({}, {}) outside the scene", s.bin, s.range),
                ));
            }
            if s.y.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    actual: s.y.len(),
                });
            }
            seen[s.bin * n_ranges + s.range] = true;
            scan.cell_mut(s.bin, s.range).copy_from_slice(&s.y);
        }
        if let Some(idx) = seen.iter().position(|&v| !v) {
            return Err(Error::MissingCell(idx / n_ranges, idx % n_ranges));
        }
        Ok(scan)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_ranges(&self) -> usize {
        self.n_ranges
    }

    pub fn snapshot_len(&self) -> usize {
        self.len
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn cell(&self, bin: usize, range: usize) -> &[Complex64] {
        let start = (bin * self.n_ranges + range) * self.len;
        &self.data[start..start + self.len]
    }

    pub fn cell_mut(&mut self, bin: usize, range: usize) -> &mut [Complex64] {
        let start = (bin * self.n_ranges + range) * self.len;
        &mut self.data[start..start + self.len]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.len)
    }

    /// Scales every sample by `factor` (used to emulate a different noise power).
    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }
}

/// Synthesises all `L * G` snapshots of a scan with the current weights.
/// Signatures are computed once per angle bin. Cells are drawn bin-major,
/// range-minor; for a target cell the amplitude is drawn before the noise.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_scan<R: Rng + ?Sized>(
    step: usize,
    targets: &[SceneTarget],
    weights: &WeightMatrix,
    array: &ArrayConfig,
    grid: &AngleGrid,
    n_ranges: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<ScanSnapshots> {
    let mut scan = ScanSnapshots::new(grid.n_bins(), n_ranges, array.snapshot_len(), step);
    synthesize_scan_into(&mut scan, step, targets, weights, array, grid, sigma2, rng)?;
    Ok(scan)
}

/// Same as [`synthesize_scan`] but reuses an existing buffer.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_scan_into<R: Rng + ?Sized>(
    scan: &mut ScanSnapshots,
    step: usize,
    targets: &[SceneTarget],
    weights: &WeightMatrix,
    array: &ArrayConfig,
    grid: &AngleGrid,
    sigma2: f64,
    rng: &mut R,
) -> Result<()> {
    check_noise(sigma2)?;
    if scan.n_bins != grid.n_bins() || scan.len != array.snapshot_len() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_bins() * array.snapshot_len(),
            actual: scan.n_bins * scan.len,
        });
    }
    check_targets(targets, scan.n_bins, scan.n_ranges)?;
    scan.step = step;
    for bin in 0..grid.n_bins() {
        let h = spatial_signature(grid.angle(bin), weights, array)?;
        for range in 0..scan.n_ranges {
            let target = targets.iter().find(|t| t.bin == bin && t.range == range);
            fill_cell(scan.cell_mut(bin, range), &h, target, sigma2, rng);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, 1.0))
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, p_t: f64) -> WaveformCovariance {
        let a = random_matrix(rng, n);
        let r = &a * a.adjoint();
        let tr = r.trace().re;
        WaveformCovariance::new(r.scale(p_t / tr), p_t).unwrap()
    }

    #[test]
    fn steering_examples() {
        let v = steering_tx(0.0, 4);
        assert!(v.iter().all(|z| close(*z, Complex64::new(1.0, 0.0), 1e-15)));

        let v = steering_tx(PI / 6.0, 2);
        assert!(close(v[0], Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(v[1], Complex64::new(0.0, 1.0), 1e-15));

        let v = steering_tx(-0.3, 8);
        for m in 0..8 {
            let phase = PI * m as f64 * (-0.3f64).sin();
            let expect = Complex64::new(phase.cos(), phase.sin());
            assert!(close(v[m], expect, 1e-14));
        }
    }

    #[test]
    fn steering_rx_examples() {
        assert!(steering_rx(0.0, 16)
            .iter()
            .all(|z| close(*z, Complex64::new(1.0, 0.0), 1e-15)));
        let v = steering_rx(PI / 6.0, 2);
        assert!(close(v[1], Complex64::new(0.0, 1.0), 1e-15));
        let v = steering_rx(0.7, 5);
        for m in 0..5 {
            let phase = PI * m as f64 * 0.7f64.sin();
            assert!(close(v[m], Complex64::new(phase.cos(), phase.sin()), 1e-14));
        }
    }

    #[test]
    fn beampattern_examples() {
        let iso = WaveformCovariance::isotropic(8, 3.0).unwrap();
        for t in [-1.2, -0.1, 0.0, 0.4, 1.5] {
            assert!((beampattern(&iso, t) - 3.0).abs() < 1e-12);
        }

        let theta0 = 0.35;
        let a = steering_tx(theta0, 8);
        let conj = a.map(|z| z.conj());
        let r = (&conj * conj.adjoint()).scale(3.0 / 8.0);
        let cov = WaveformCovariance::new(r, 3.0).unwrap();
        assert!((beampattern(&cov, theta0) - 24.0).abs() < 1e-10);

        // dense triple product oracle
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cov = random_psd(&mut rng, 6, 6.0);
        let a = steering_tx(0.2, 6);
        let at = a.transpose();
        let direct = (at * cov.matrix() * a.map(|z| z.conj()))[(0, 0)];
        assert!(direct.im.abs() < 1e-12);
        assert!((beampattern(&cov, 0.2) - direct.re).abs() < 1e-12);
    }

    #[test]
    fn normalized_db_examples() {
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 22).unwrap();
        let iso = WaveformCovariance::isotropic(16, 16.0).unwrap();
        let d = normalized_beampattern_db(&iso, &grid).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));

        let b = 7;
        let conj = steering_tx(grid.angle(b), 16).map(|z| z.conj());
        let cov = WaveformCovariance::new((&conj * conj.adjoint()).scale(1.0), 16.0).unwrap();
        let d = normalized_beampattern_db(&cov, &grid).unwrap();
        assert_eq!(d[b], 0.0);
        assert!(d.iter().all(|&v| v <= 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cov = random_psd(&mut rng, 16, 16.0);
        let d = normalized_beampattern_db(&cov, &grid).unwrap();
        let raw: Vec<f64> = grid.angles().iter().map(|&t| beampattern(&cov, t)).collect();
        let peak = raw.iter().copied().fold(0.0, f64::max);
        for (x, r) in d.iter().zip(&raw) {
            assert!((x - 10.0 * (r / peak).log10()).abs() < 1e-9);
        }
        assert_eq!(d.iter().copied().fold(f64::MIN, f64::max), 0.0);
    }

    #[test]
    fn normalized_db_rejects_zero_pattern() {
        assert_eq!(normalize_db(&[0.0, 0.0]), Err(Error::ZeroBeampattern));
    }

    #[test]
    fn signature_examples() {
        let array = ArrayConfig::new(4, 3).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(4, 4), 4.0).unwrap();
        let theta = 0.3;
        let h = spatial_signature(theta, &id, &array).unwrap();
        let expect = steering_tx(theta, 4).kronecker(&steering_rx(theta, 3));
        assert!((h - expect).norm() < 1e-14);

        let h0 = spatial_signature(0.0, &id, &array).unwrap();
        assert_eq!(h0.len(), 12);
        assert!(h0.iter().all(|z| close(*z, Complex64::new(1.0, 0.0), 1e-15)));

        // vec(a_R a_T^T C) oracle: column-major stacking of an N_R x N_T matrix
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_matrix(&mut rng, 4);
        let p = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w = WeightMatrix::new(c.clone(), p).unwrap();
        let theta = -0.4;
        let y = steering_rx(theta, 3) * steering_tx(theta, 4).transpose() * &c;
        let h = spatial_signature(theta, &w, &array).unwrap();
        for t in 0..4 {
            for r in 0..3 {
                assert!(close(h[t * 3 + r], y[(r, t)], 1e-12));
            }
        }
    }

    #[test]
    fn signature_rejects_wrong_size() {
        let array = ArrayConfig::new(4, 3).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(2, 2), 2.0).unwrap();
        assert!(matches!(
            spatial_signature(0.1, &id, &array),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearest_bin_breaks_ties_low() {
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 22).unwrap();
        assert_eq!(grid.nearest_bin((-30.0f64).to_radians()), 3);
        assert_eq!(grid.nearest_bin(30f64.to_radians()), 17);
        assert_eq!(grid.nearest_bin(14f64.to_radians()), 14);
        assert_eq!(grid.nearest_bin((-6f64).to_radians()), 9);
        assert_eq!(grid.nearest_bin(4f64.to_radians()), 11);
        assert_eq!(grid.nearest_bin(29f64.to_radians()), 17);
        assert_eq!(grid.nearest_bin(-1.0), 0);
        assert_eq!(grid.nearest_bin(1.0), 21);
    }

    #[test]
    fn grid_validation() {
        assert!(AngleGrid::new(0.2, 0.1, 5).is_err());
        assert!(AngleGrid::new(-PI / 2.0, 0.1, 5).is_err());
        assert!(AngleGrid::new(-0.5, 0.5, 1).is_err());
        let g = AngleGrid::new(-0.5, 0.5, 11).unwrap();
        assert!(g.angles().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.angle(10), 0.5);
    }

    #[test]
    fn covariance_validation() {
        let not_herm = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        assert!(matches!(
            WaveformCovariance::new(not_herm, 2.0),
            Err(Error::NotHermitian(_))
        ));
        let indefinite = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(3.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        );
        assert!(matches!(
            WaveformCovariance::new(indefinite, 2.0),
            Err(Error::NotPsd(_))
        ));
        assert!(matches!(
            WaveformCovariance::new(CMatrix::identity(2, 2), 3.0),
            Err(Error::PowerMismatch { .. })
        ));
    }

    #[test]
    fn noise_only_snapshot_energy() {
        let array = ArrayConfig::new(4, 4).unwrap();
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 22).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(4, 4), 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let s = synthesize_snapshot(3, 0, 1, &[], &id, &array, &grid, 1.0, &mut rng).unwrap();
            total += s.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = total / n as f64;
        assert!((mean - 16.0).abs() / 16.0 < 0.02, "mean energy {mean}");
    }

    #[test]
    fn zero_variance_target_is_noise() {
        let array = ArrayConfig::new(4, 4).unwrap();
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 22).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(4, 4), 4.0).unwrap();
        let tgt = [SceneTarget {
            bin: 3,
            range: 0,
            snr: 0.0,
        }];
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let (mut ea, mut eb) = (0.0, 0.0);
        for _ in 0..n {
            let s = synthesize_snapshot(3, 0, 1, &tgt, &id, &array, &grid, 1.0, &mut a).unwrap();
            ea += s.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let s = synthesize_snapshot(3, 0, 1, &[], &id, &array, &grid, 1.0, &mut b).unwrap();
            eb += s.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let (ea, eb) = (ea / n as f64, eb / n as f64);
        assert!((ea - 16.0).abs() / 16.0 < 0.02);
        assert!((eb - 16.0).abs() / 16.0 < 0.02);
    }

    #[test]
    fn target_snapshot_energy() {
        // E|y|^2 = N_T N_R + snr * |h|^2 by the law of total variance
        let array = ArrayConfig::new(4, 4).unwrap();
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 22).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(4, 4), 4.0).unwrap();
        let snr = 10f64.powf(-0.4);
        let tgt = [SceneTarget { bin: 5, range: 2, snr }];
        let h = spatial_signature(grid.angle(5), &id, &array).unwrap();
        let expect = 16.0 + snr * h.norm_squared();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let s = synthesize_snapshot(5, 2, 1, &tgt, &id, &array, &grid, 1.0, &mut rng).unwrap();
            total += s.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = total / n as f64;
        assert!((mean - expect).abs() / expect < 0.02, "mean {mean} vs {expect}");
    }

    #[test]
    fn duplicate_targets_rejected() {
        let array = ArrayConfig::new(2, 2).unwrap();
        let grid = AngleGrid::from_degrees(-45.0, 45.0, 4).unwrap();
        let id = WeightMatrix::new(CMatrix::identity(2, 2), 2.0).unwrap();
        let t = SceneTarget {
            bin: 1,
            range: 1,
            snr: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(synthesize_scan(1, &[t, t], &id, &array, &grid, 3, 1.0, &mut rng).is_err());
    }

    #[test]
    fn power_conservation_over_sin_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cov = random_psd(&mut rng, 8, 8.0);
        let n = 4096;
        let mean = (0..n)
            .map(|i| {
                let s = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                beampattern(&cov, s.asin())
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 8.0).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn steering_unit_modulus_and_conjugate_symmetry(theta in -1.5f64..1.5, n in 1usize..20) {
                let v = steering_tx(theta, n);
                let w = steering_tx(-theta, n);
                for m in 0..n {
                    prop_assert!((v[m].norm() - 1.0).abs() < 1e-12);
                    prop_assert!((w[m] - v[m].conj()).norm() < 1e-12);
                }
            }

            #[test]
            fn beampattern_nonnegative_and_matches_signature(seed in any::<u64>(), theta in -1.5f64..1.5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c = random_matrix(&mut rng, 5);
                let p = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let w = WeightMatrix::new(c, p).unwrap();
                let cov = w.covariance().unwrap();
                let b = beampattern(&cov, theta);
                prop_assert!(b >= 0.0);
                prop_assert!(b <= 5.0 * p * (1.0 + 1e-9));
                let array = ArrayConfig::new(5, 3).unwrap();
                let h = spatial_signature(theta, &w, &array).unwrap();
                let lhs = h.norm_squared();
                prop_assert!((lhs - 3.0 * b).abs() <= 1e-9 * lhs.max(1e-12));
            }
        }
    }
}

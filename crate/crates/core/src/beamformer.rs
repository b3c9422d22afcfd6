//! Transmit beam design: pick the angle bins most likely to hold targets and
//! shape the waveform covariance to maximise the weakest beampattern value
//! over them.
//!
//! The max-min problem
//!
//! ```text
//! maximise  min_j  u_j^H R u_j      u_j = conj(a_T(theta_j))
//! s.t.      R >= 0,  trace(R) = P_T
//! ```
//!
//! is solved by projected ascent. Power outside `span{u_j}` never raises any
//! `u_j^H R u_j`, so the iterate is kept in that span: `R = Q S Q^H` with `Q`
//! an orthonormal basis and `S` a small Hermitian matrix. Each iteration
//! steps along the gradient of a soft-min of the quadratic forms and projects
//! back onto `{S >= 0, trace(S) = P_T}` by eigendecomposition followed by a
//! Euclidean projection of the eigenvalues onto the simplex. The soft-min
//! temperature is lowered in stages so the smooth surrogate converges to the
//! max-min value; the best iterate seen is returned.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::array_signal::{steering_tx, ArrayConfig, WaveformCovariance, WeightMatrix};
use crate::detector::DetectionMap;
use crate::{CMatrix, CVector, Error, Result};

/// Iteration budget of the covariance solver.
pub const MAX_ITERATIONS: usize = 5000;
/// A temperature stage ends when the soft-min (relative to `P_T`) gains less
/// than `max(STALL_TOLERANCE, 1e-2 tau)` over `STALL_WINDOW` iterations.
pub const STALL_WINDOW: usize = 50;
pub const STALL_TOLERANCE: f64 = 1e-8;

// soft-min temperatures, relative to the current objective
const INITIAL_TEMPERATURE: f64 = 0.05;
const WARM_TEMPERATURE: f64 = 1e-3;
const WARM_MARGIN: f64 = 1.01;
const FINAL_TEMPERATURE: f64 = 1e-3;
const TEMPERATURE_DECAY: f64 = 3.0;
const STAGE_TOLERANCE: f64 = 1e-2;

/// The `i` bins with the largest row maxima of a detection map.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSelection {
    /// Selected bins, strongest first (ties by lower index).
    pub indices: Vec<usize>,
    /// Grid angles of the selected bins, same order as `indices`.
    pub angles: Vec<f64>,
    /// `t_l = max_g Lambda_{l,g}` for every bin of the grid.
    pub scores: Vec<f64>,
}

/// Outcome of one covariance design.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPlan {
    pub selection: BinSelection,
    pub covariance: WaveformCovariance,
    pub weights: WeightMatrix,
    /// `zeta`: the smallest beampattern value over the selected angles.
    pub achieved_min: f64,
}

/// Solver output with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceDesign {
    pub covariance: WaveformCovariance,
    pub achieved_min: f64,
    pub iterations: usize,
    /// Objective after every iteration, starting with the initial point.
    pub objective_history: Vec<f64>,
}

/// Indices of the `count` largest row maxima of `map`.
pub fn select_bins(map: &DetectionMap, count: usize, grid_angles: &[f64]) -> Result<BinSelection> {
    let n = map.n_bins();
    if count == 0 || count > n {
        return Err(Error::invalid("i", format!("must lie in 1..={n}, got {count}")));
    }
    if grid_angles.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: grid_angles.len(),
        });
    }
    let scores = map.row_maxima();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count);
    let angles = order.iter().map(|&l| grid_angles[l]).collect();
    Ok(BinSelection {
        indices: order,
        angles,
        scores,
    })
}

/// `C = sqrt(p_t / N_T) I`: orthonormal waveforms, flat beampattern at `p_t`.
pub fn omni_weights(array: &ArrayConfig, p_t: f64) -> Result<WeightMatrix> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::invalid("p_t", format!("must be positive, got {p_t}")));
    }
    let n = array.n_tx;
    let c = CMatrix::identity(n, n).scale((p_t / n as f64).sqrt());
    WeightMatrix::new(c, p_t)
}

/// Hermitian square root `C = U diag(sqrt(max(lambda, 0))) U^H`, so that
/// `C C^H = R_W`.
pub fn factor_covariance(cov: &WaveformCovariance) -> Result<WeightMatrix> {
    let r = cov.matrix();
    let asym = (r - r.adjoint()).norm() / r.norm().max(f64::MIN_POSITIVE);
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let eig = SymmetricEigen::new(r.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(roots[j], 0.0);
    }
    let c = &scaled * u.adjoint();
    // the clamped root can shave a few ulps of power; renormalise exactly
    let power = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let c = if power > 0.0 {
        c.scale((cov.total_power() / power).sqrt())
    } else {
        c
    };
    WeightMatrix::new(c, cov.total_power())
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = total}`.
pub fn project_onto_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - total) / (k + 1) as f64;
        if x - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

/// Projects a Hermitian matrix onto `{S >= 0, trace(S) = total}` in Frobenius
/// norm.
pub fn project_onto_spectrahedron(s: &CMatrix, total: f64) -> CMatrix {
    let herm = (s + s.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let projected = project_onto_simplex(&lambda, total);
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(projected[j], 0.0);
    }
    let out = &scaled * u.adjoint();
    (&out + out.adjoint()).scale(0.5)
}

/// Validates and canonically orders an angle set.
fn canonical_angles(angles: &[f64], n_tx: usize) -> Result<Vec<f64>> {
    if angles.is_empty() {
        return Err(Error::InvalidAngles("empty".into()));
    }
    if angles.len() > n_tx {
        return Err(Error::InvalidAngles(format!(
            "{} angles exceed the {} transmit elements",
            angles.len(),
            n_tx
        )));
    }
    if let Some(t) = angles
        .iter()
        .find(|t| !(t.is_finite() && t.abs() < std::f64::consts::FRAC_PI_2))
    {
        return Err(Error::InvalidAngles(format!("{t} outside (-pi/2, pi/2)")));
    }
    let mut sorted = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidAngles("duplicate angles".into()));
    }
    Ok(sorted)
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt, twice).
fn orthonormal_basis(vectors: &[CVector]) -> CMatrix {
    let n = vectors[0].len();
    let mut basis: Vec<CVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let norm = w.norm();
        if norm > 1e-9 * v.norm() {
            basis.push(w / Complex64::new(norm, 0.0));
        }
    }
    CMatrix::from_fn(n, basis.len(), |r, c| basis[c][r])
}

struct Reduced {
    basis: CMatrix,
    outer: Vec<CMatrix>,
}

impl Reduced {
    fn new(angles: &[f64], n_tx: usize) -> Self {
        let targets: Vec<CVector> = angles.iter().map(|&t| steering_tx(t, n_tx).map(|z| z.conj())).collect();
        let basis = orthonormal_basis(&targets);
        let coords: Vec<CVector> = targets.iter().map(|u| basis.adjoint() * u).collect();
        let outer = coords.iter().map(|b| b * b.adjoint()).collect();
        Self { basis, outer }
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `b_j^H S b_j` for every target, as `<B_j, S>` with `B_j = b_j b_j^H`.
    fn values(&self, s: &CMatrix) -> Vec<f64> {
        self.outer
            .iter()
            .map(|o| {
                o.iter()
                    .zip(s.iter())
                    .map(|(a, b)| a.re * b.re + a.im * b.im)
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect()
    }

    fn lift(&self, s: &CMatrix) -> CMatrix {
        let r = &self.basis * s * self.basis.adjoint();
        (&r + r.adjoint()).scale(0.5)
    }

    fn restrict(&self, r: &CMatrix) -> CMatrix {
        let s = self.basis.adjoint() * r * &self.basis;
        (&s + s.adjoint()).scale(0.5)
    }
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `-tau ln sum exp(-v / tau)`, computed stably.
fn soft_min(values: &[f64], tau: f64) -> f64 {
    let m = min_of(values);
    let s: f64 = values.iter().map(|v| (-(v - m) / tau).exp()).sum();
    m - tau * s.ln()
}

fn soft_min_weights(values: &[f64], tau: f64) -> Vec<f64> {
    let m = min_of(values);
    let w: Vec<f64> = values.iter().map(|v| (-(v - m) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Max-min covariance design over `angles` with total power `p_t`.
pub fn optimize_covariance(angles: &[f64], array: &ArrayConfig, p_t: f64) -> Result<WaveformCovariance> {
    Ok(optimize_covariance_traced(angles, array, p_t, None)?.covariance)
}

/// As [`optimize_covariance`], optionally warm-started from `start`, and
/// returning the per-iteration objective of the best iterate so far.
///
/// For each temperature `tau` the soft-min is maximised by accelerated
/// projected gradient with step `tau / N_T^2` (the inverse Lipschitz constant
/// of its gradient) and adaptive restart. A stage ends when the soft-min
/// stalls (see [`STALL_WINDOW`]); `tau` is
/// then divided by `TEMPERATURE_DECAY` until `tau <= FINAL_TEMPERATURE * zeta`,
/// which bounds the soft-min bias by `FINAL_TEMPERATURE * ln(i)` relative.
pub fn optimize_covariance_traced(
    angles: &[f64],
    array: &ArrayConfig,
    p_t: f64,
    start: Option<&WaveformCovariance>,
) -> Result<CovarianceDesign> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::invalid("p_t", format!("must be positive, got {p_t}")));
    }
    let angles = canonical_angles(angles, array.n_tx)?;
    let reduced = Reduced::new(&angles, array.n_tx);
    let dim = reduced.dim();

    // unit trace internally; objective values are relative to P_T
    let isotropic = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
    let mut s = isotropic.clone();
    let mut warm = false;
    if let Some(start) = start {
        if start.n_tx() != array.n_tx {
            return Err(Error::DimensionMismatch {
                expected: array.n_tx,
                actual: start.n_tx(),
            });
        }
        let candidate = project_onto_spectrahedron(&reduced.restrict(start.matrix()).scale(1.0 / p_t), 1.0);
        // a start no better than isotropic gets the cold schedule
        if min_of(&reduced.values(&candidate)) > WARM_MARGIN * min_of(&reduced.values(&isotropic)) {
            s = candidate;
            warm = true;
        }
    }

    let mut best = s.clone();
    let mut best_value = min_of(&reduced.values(&s));
    let mut history = vec![best_value * p_t];
    let mut iterations = 0;
    let lipschitz = (array.n_tx * array.n_tx) as f64;
    let mut tau = best_value * if warm { WARM_TEMPERATURE } else { INITIAL_TEMPERATURE };

    if dim > 1 {
        'stages: while tau > FINAL_TEMPERATURE * best_value {
            let step = tau / lipschitz;
            let mut y = s.clone();
            let mut momentum = 1.0_f64;
            let mut last = soft_min(&reduced.values(&s), tau);
            let mut stage_history = vec![last];
            loop {
                if iterations >= MAX_ITERATIONS {
                    break 'stages;
                }
                iterations += 1;
                let weights = soft_min_weights(&reduced.values(&y), tau);
                let mut ascent = y.clone();
                for (w, o) in weights.iter().zip(&reduced.outer) {
                    ascent.zip_apply(o, |a, b| *a += b * (w * step));
                }
                let next = project_onto_spectrahedron(&ascent, 1.0);
                let values = reduced.values(&next);
                let hard = min_of(&values);
                if hard > best_value {
                    best_value = hard;
                    best = next.clone();
                }
                history.push(best_value * p_t);

                let value = soft_min(&values, tau);
                let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                if value < last {
                    momentum = 1.0;
                    y = next.clone();
                } else {
                    y = &next + (&next - &s).scale((momentum - 1.0) / next_momentum);
                    momentum = next_momentum;
                }
                s = next;
                last = value;
                stage_history.push(value);
                let n = stage_history.len();
                if n > STALL_WINDOW
                    && stage_history[n - 1] - stage_history[n - 1 - STALL_WINDOW]
                        < STALL_TOLERANCE.max(STAGE_TOLERANCE * tau)
                {
                    break;
                }
            }
            tau /= TEMPERATURE_DECAY;
        }
    }

    let r = reduced.lift(&best).scale(p_t);
    let tr = r.trace().re;
    let covariance = WaveformCovariance::new(r.scale(p_t / tr), p_t)?;
    let achieved_min = angles
        .iter()
        .map(|&t| crate::array_signal::beampattern(&covariance, t))
        .fold(f64::INFINITY, f64::min);
    Ok(CovarianceDesign {
        covariance,
        achieved_min,
        iterations,
        objective_history: history,
    })
}

/// Stateful designer that warm-starts from the previous solution when the
/// selected angle set repeats.
#[derive(Debug, Clone)]
pub struct BeamDesigner {
    array: ArrayConfig,
    p_t: f64,
    last: Option<(Vec<usize>, WaveformCovariance)>,
}

impl BeamDesigner {
    pub fn new(array: ArrayConfig, p_t: f64) -> Self {
        Self { array, p_t, last: None }
    }

    /// Selects `count` bins from `map` and designs the matching beam.
    pub fn plan(&mut self, map: &DetectionMap, count: usize, grid_angles: &[f64]) -> Result<BeamPlan> {
        let selection = select_bins(map, count, grid_angles)?;
        let mut key = selection.indices.clone();
        key.sort_unstable();
        let start = match &self.last {
            Some((prev, cov)) if *prev == key => Some(cov),
            _ => None,
        };
        let design = optimize_covariance_traced(&selection.angles, &self.array, self.p_t, start)?;
        let weights = factor_covariance(&design.covariance)?;
        self.last = Some((key, design.covariance.clone()));
        Ok(BeamPlan {
            selection,
            covariance: design.covariance,
            weights,
            achieved_min: design.achieved_min,
        })
    }
}

/// Upper bound on the max-min value from the minimax dual:
/// `zeta* = P_T min_{w in simplex} lambda_max(sum_j w_j u_j u_j^H)`, evaluated
/// at the given weights. Any weights give a valid upper bound.
pub fn dual_bound(angles: &[f64], array: &ArrayConfig, p_t: f64, weights: &[f64]) -> f64 {
    let n = array.n_tx;
    let mut m = CMatrix::zeros(n, n);
    for (&t, &w) in angles.iter().zip(weights) {
        let u = steering_tx(t, n).map(|z| z.conj());
        m += (&u * u.adjoint()).scale(w);
    }
    let eig = SymmetricEigen::new(m);
    p_t * eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max)
}

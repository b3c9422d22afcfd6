//! Special functions needed by the detector that are not in `statrs`.

/// Exponentially scaled modified Bessel function of the first kind, order
/// zero: `exp(-z) I_0(z)` for `z >= 0`.
///
/// Power series below `z = 20`, Hankel asymptotic expansion above. Relative
/// error is below `1e-13` on both branches.
pub fn bessel_i0e(z: f64) -> f64 {
    let z = z.abs();
    if z < 20.0 {
        let q = z * z / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-z).exp()
    } else {
        let x = 8.0 * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (k as f64 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// `ln(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    statrs::function::factorial::ln_factorial(k)
}

/// Poisson probability mass `P(N = k)` for `N ~ Poisson(mean)`, evaluated in
/// log space so large means do not underflow.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp()
}

/// Poisson CDF `P(N <= k)`.
pub fn poisson_cdf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(k as f64 + 1.0, mean)
}

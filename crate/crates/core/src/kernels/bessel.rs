//! Modified Bessel functions of the first kind needed by the von Mises kernel.

/// Switch point between the power series and the large-argument expansion.
const SERIES_LIMIT: f64 = 20.0;

/// `I₀(κ)`, relative error below 1e-12 for finite `κ ≥ 0`.
///
/// Overflows to `+∞` beyond `κ ≈ 713`; use [`bessel_i0_scaled`] there.
pub fn bessel_i0(kappa: f64) -> f64 {
    let k = kappa.abs();
    if k <= SERIES_LIMIT {
        i0_series(k)
    } else {
        i0_asymptotic_scaled(k) * k.exp()
    }
}

/// `e^{-κ} I₀(κ)`.
pub fn bessel_i0_scaled(kappa: f64) -> f64 {
    let k = kappa.abs();
    if k <= SERIES_LIMIT {
        i0_series(k) * (-k).exp()
    } else {
        i0_asymptotic_scaled(k)
    }
}

/// `ln I₀(κ)` without overflow.
pub fn ln_bessel_i0(kappa: f64) -> f64 {
    let k = kappa.abs();
    bessel_i0_scaled(k).ln() + k
}

fn i0_series(k: f64) -> f64 {
    // Σ (k/2)^{2m} / (m!)², all terms positive
    let q = 0.25 * k * k;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..500 {
        let m = m as f64;
        term *= q / (m * m);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn i0_asymptotic_scaled(k: f64) -> f64 {
    // e^{-k} I₀(k) ~ (2πk)^{-1/2} Σ_j ∏_{i≤j} (2i-1)² / (j! (8k)^j)
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..200 {
        let odd = (2 * j - 1) as f64;
        let next = term * odd * odd / (8.0 * k * j as f64);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum / (std::f64::consts::TAU * k).sqrt()
}

/// Ratios `I_n(κ)/I₀(κ)` for `n = 1, 2, …` until they drop below `tol`,
/// or `max_terms` entries have been produced.
///
/// These are the Fourier coefficients of the von Mises density.
pub fn bessel_ratios(kappa: f64, tol: f64, max_terms: usize) -> Vec<f64> {
    let k = kappa.abs();
    if k == 0.0 {
        return Vec::new();
    }
    // Backward recurrence r_n = I_n / I_{n-1} = 1 / (2n/k + r_{n+1}), started
    // well beyond the last harmonic we could need.
    let start = max_terms + 64 + (4.0 * k.sqrt() * 10.0) as usize;
    let mut r = vec![0.0; start + 1];
    let mut next = 0.0;
    for n in (1..=start).rev() {
        next = 1.0 / (2.0 * n as f64 / k + next);
        r[n] = next;
    }
    let mut out = Vec::new();
    let mut prod = 1.0;
    for ratio in r.iter().skip(1).take(max_terms) {
        prod *= ratio;
        if prod < tol {
            break;
        }
        out.push(prod);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_zero() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_eq!(bessel_i0_scaled(0.0), 1.0);
    }

    #[test]
    fn branches_agree_at_switch() {
        let below = i0_series(SERIES_LIMIT) * (-SERIES_LIMIT).exp();
        let above = i0_asymptotic_scaled(SERIES_LIMIT);
        assert!(((below - above) / below).abs() < 1e-12, "{below} {above}");
        for k in [20.5, 25.0, 30.0] {
            let s = i0_series(k) * (-k).exp();
            let a = i0_asymptotic_scaled(k);
            assert!(((s - a) / s).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn large_argument_does_not_overflow() {
        let v = ln_bessel_i0(1000.0);
        // ln I₀(x) ≈ x - ½ ln(2πx) + 1/(8x)
        let approx = 1000.0 - 0.5 * (std::f64::consts::TAU * 1000.0).ln() + 1.0 / 8000.0;
        assert!((v - approx).abs() < 1e-6);
    }

    #[test]
    fn ratios_match_series() {
        // I₁(κ) by its own power series Σ (κ/2)^{2m+1} / (m! (m+1)!)
        let k: f64 = 5.0;
        let mut term = k / 2.0;
        let mut i1 = term;
        for m in 1..60 {
            let m = m as f64;
            term *= (k * k / 4.0) / (m * (m + 1.0));
            i1 += term;
        }
        let r = bessel_ratios(k, 1e-18, 100);
        assert!((r[0] - i1 / bessel_i0(k)).abs() < 1e-14);
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(r.len() < 40);
    }
}

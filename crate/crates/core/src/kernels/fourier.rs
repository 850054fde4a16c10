//! Fast evaluation of large von Mises mixtures through their Fourier series.
//!
//! A von Mises density has the expansion
//! `k(y, u) = (1/2π) [1 + 2 Σ_{n≥1} ρ_n cos(n(y − u))]` with
//! `ρ_n = I_n(κ)/I₀(κ)`. A mixture `Σ_a w_a k(y, u_a)` therefore only needs
//! the trigonometric moments `Σ_a w_a e^{i n u_a}`, which turns an
//! `atoms × grid` evaluation into `(atoms + grid) × harmonics`.

use std::f64::consts::TAU;

use super::{bessel_ratios, KernelKind, KernelSpec};

/// Harmonics whose coefficient is below this are dropped.
const COEFF_TOL: f64 = 1e-17;
/// Beyond this many harmonics direct summation is cheaper.
const MAX_HARMONICS: usize = 512;

/// Truncated Fourier representation of a von Mises kernel.
#[derive(Debug, Clone)]
pub struct VonMisesSeries {
    coeffs: Vec<f64>,
}

/// Accumulated trigonometric moments of a weighted set of atoms.
#[derive(Debug, Clone)]
pub struct Moments {
    total: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl VonMisesSeries {
    /// `None` unless the kernel is von Mises with a short enough series.
    pub fn for_kernel(kernel: &KernelSpec) -> Option<Self> {
        match kernel.kind() {
            KernelKind::VonMises { kappa } => {
                let coeffs = bessel_ratios(kappa, COEFF_TOL, MAX_HARMONICS + 1);
                if coeffs.len() > MAX_HARMONICS {
                    None
                } else {
                    Some(VonMisesSeries { coeffs })
                }
            }
            KernelKind::Gaussian { .. } => None,
        }
    }

    pub fn harmonics(&self) -> usize {
        self.coeffs.len()
    }

    pub fn empty_moments(&self) -> Moments {
        Moments {
            total: 0.0,
            cos: vec![0.0; self.coeffs.len()],
            sin: vec![0.0; self.coeffs.len()],
        }
    }

    /// Adds `weight · δ_location` to the moments.
    pub fn accumulate(&self, moments: &mut Moments, location: f64, weight: f64) {
        moments.total += weight;
        let (s1, c1) = location.sin_cos();
        let (mut c, mut s) = (c1, s1);
        for n in 0..self.coeffs.len() {
            moments.cos[n] += weight * c;
            moments.sin[n] += weight * s;
            // e^{i(n+1)u} = e^{inu} e^{iu}
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
    }

    /// Mixture density `Σ_a w_a k(y, u_a)` from accumulated moments.
    pub fn evaluate(&self, moments: &Moments, y: f64) -> f64 {
        let (s1, c1) = y.sin_cos();
        let (mut c, mut s) = (c1, s1);
        let mut acc = 0.0;
        for n in 0..self.coeffs.len() {
            acc += self.coeffs[n] * (moments.cos[n] * c + moments.sin[n] * s);
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
        (moments.total + 2.0 * acc) / TAU
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mixture_density, Atom};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kappa in [0.3, 5.0, 30.0, 200.0] {
            let kernel = KernelSpec::von_mises(kappa).unwrap();
            let series = VonMisesSeries::for_kernel(&kernel).unwrap();
            let atoms: Vec<Atom> = (0..300)
                .map(|_| Atom::new(rng.gen_range(0.0..TAU), rng.gen_range(0.01..1.0)))
                .collect();
            let mut m = series.empty_moments();
            for a in &atoms {
                series.accumulate(&mut m, a.location, a.weight);
            }
            for _ in 0..50 {
                let y = rng.gen_range(0.0..TAU);
                let direct = mixture_density(&kernel, &atoms, y);
                let fast = series.evaluate(&m, y);
                assert!(((fast - direct) / direct).abs() < 1e-11, "kappa {kappa}: {fast} vs {direct}");
            }
        }
    }

    #[test]
    fn uniform_and_gaussian_cases() {
        let flat = VonMisesSeries::for_kernel(&KernelSpec::von_mises(0.0).unwrap()).unwrap();
        assert_eq!(flat.harmonics(), 0);
        let mut m = flat.empty_moments();
        flat.accumulate(&mut m, 1.0, 2.0);
        assert!((flat.evaluate(&m, 3.0) - 2.0 / TAU).abs() < 1e-15);

        let g = KernelSpec::gaussian(1.0, crate::Window::interval(0.0, 1.0).unwrap()).unwrap();
        assert!(VonMisesSeries::for_kernel(&g).is_none());
        assert!(VonMisesSeries::for_kernel(&KernelSpec::von_mises(1e5).unwrap()).is_none());
    }
}

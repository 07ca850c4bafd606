use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{bit_reversal_permutation, ButterflyLayer, ButterflyLevel};
use crate::tensor::log2_exact;
use crate::{Error, Result};

fn twiddle_layer(n: usize, sign: f64) -> Result<ButterflyLayer<Complex64>> {
    let depth = log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
    let one = Complex64::new(1.0, 0.0);
    let levels = (0..depth)
        .map(|l| {
            let stride = 1usize << l;
            let coeffs = (0..n / 2)
                .flat_map(|p| {
                    // position of the pair inside its 2·stride block
                    let k = p % stride;
                    let w = Complex64::from_polar(1.0, sign * TAU * k as f64 / (2 * stride) as f64);
                    [one, w, one, -w]
                })
                .collect();
            ButterflyLevel::new(n, stride, coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    ButterflyLayer::from_levels(n, levels, bit_reversal_permutation(n)?, None)
}

/// Butterfly layer that computes the unnormalized DFT
/// `X_k = Σ_j x_j·e^{-2πi·jk/n}`: bit-reversal permutation, then radix-2
/// levels with records `(1, ω, 1, -ω)`.
pub fn fft_configure(n: usize) -> Result<ButterflyLayer<Complex64>> {
    twiddle_layer(n, -1.0)
}

/// Conjugate configuration: `n` times the inverse DFT.
pub fn inverse_fft_configure(n: usize) -> Result<ButterflyLayer<Complex64>> {
    twiddle_layer(n, 1.0)
}

/// Forward and inverse transforms of one size, built once.
#[derive(Clone, Debug)]
pub struct FftPlan {
    forward: ButterflyLayer<Complex64>,
    inverse: ButterflyLayer<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            forward: fft_configure(n)?,
            inverse: inverse_fft_configure(n)?,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.forward.apply_vec(x)
    }

    /// Normalized inverse (`1/n` applied).
    pub fn inverse(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let scale = 1.0 / self.len() as f64;
        let mut y = self.inverse.apply_vec(x)?;
        y.iter_mut().for_each(|v| *v *= scale);
        Ok(y)
    }

    /// Forward transform of a real signal.
    pub fn forward_real(&self, x: impl IntoIterator<Item = f64>) -> Result<Vec<Complex64>> {
        let xs: Vec<Complex64> = x.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        self.forward(&xs)
    }
}

/// Direct `O(n²)` DFT, `X_k = Σ_j x_j·e^{-2πi·jk/n}`.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &xj)| {
                    // reduce jk mod n before scaling to keep the angle small
                    let angle = -TAU * ((j * k) % n) as f64 / n as f64;
                    xj * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn impulse_and_constant() {
        let f = fft_configure(4).unwrap();
        assert_eq!(f.apply_vec(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap(), vec![c(1.0); 4]);
        let y = f.apply_vec(&[c(1.0); 4]).unwrap();
        assert!(max_rel(&y, &[c(4.0), c(0.0), c(0.0), c(0.0)]) < 1e-15);
    }

    #[test]
    fn matches_naive_dft_256() {
        let mut rng = Rng::seed_from_u64(21);
        let x: Vec<Complex64> = (0..256).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        let y = fft_configure(256).unwrap().apply_vec(&x).unwrap();
        assert!(max_rel(&y, &naive_dft(&x)) <= 1e-9);
    }

    #[test]
    fn twiddle_records_have_fft_shape() {
        let f = fft_configure(16).unwrap();
        for level in f.levels() {
            for p in 0..level.num_pairs() {
                let [a, b, c, d] = level.record(p);
                assert_eq!(a, Complex64::new(1.0, 0.0));
                assert_eq!(c, Complex64::new(1.0, 0.0));
                assert_eq!(d, -b);
                assert!((b.norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inverse_roundtrip_scales_by_n() {
        let mut rng = Rng::seed_from_u64(22);
        for n in [1, 2, 8, 128] {
            let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
            let y = inverse_fft_configure(n)
                .unwrap()
                .apply_vec(&fft_configure(n).unwrap().apply_vec(&x).unwrap())
                .unwrap();
            let scaled: Vec<Complex64> = x.iter().map(|v| v * n as f64).collect();
            assert!(max_rel(&y, &scaled) <= 1e-12);
            let plan = FftPlan::new(n).unwrap();
            assert!(max_rel(&plan.inverse(&plan.forward(&x).unwrap()).unwrap(), &x) <= 1e-12);
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(fft_configure(12).is_err());
    }
}

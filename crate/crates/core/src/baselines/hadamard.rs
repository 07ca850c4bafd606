use crate::tensor::{is_power_of_two, DenseVector, Field};
use crate::{Error, Result};

/// Unnormalized Walsh–Hadamard transform in place (`H·H = n·I`).
pub fn walsh_hadamard_in_place<T: Field>(x: &mut [T]) -> Result<()> {
    let n = x.len();
    if !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            let (lo, hi) = x[start..start + 2 * h].split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    Ok(())
}

pub fn walsh_hadamard<T: Field>(x: &DenseVector<T>) -> Result<DenseVector<T>> {
    let mut out = x.as_slice().to_vec();
    walsh_hadamard_in_place(&mut out)?;
    Ok(DenseVector::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{count_ops, Counted, Rng};

    #[test]
    fn small_cases() {
        let v = walsh_hadamard(&DenseVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 1.0]);
        let v = walsh_hadamard(&DenseVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(v.as_slice(), &[1.0; 4]);
        let v = walsh_hadamard(&DenseVector::from_vec(vec![0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(v.as_slice(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn involution() {
        let mut rng = Rng::seed_from_u64(0);
        let x: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut y = x.clone();
        walsh_hadamard_in_place(&mut y).unwrap();
        walsh_hadamard_in_place(&mut y).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - 64.0 * b).abs() <= 1e-12 * 64.0);
        }
    }

    #[test]
    fn flop_count() {
        let mut x: Vec<Counted> = (0..256).map(|i| Counted(i as f64)).collect();
        let (_, ops) = count_ops(|| walsh_hadamard_in_place(&mut x).unwrap());
        assert_eq!(ops.adds, 256 * 8);
        assert_eq!(ops.muls, 0);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(walsh_hadamard_in_place(&mut [1.0f64; 6]).is_err());
    }
}

use crate::tensor::{DenseMatrix, Scalar};
use crate::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax − onehot) / batch`. Row maxima are subtracted before
/// exponentiating.
pub fn cross_entropy<T: Scalar>(logits: &DenseMatrix<T>, labels: &[u8]) -> Result<(f64, DenseMatrix<T>)> {
    let (batch, classes) = logits.shape();
    if labels.len() != batch {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            lhs: logits.shape(),
            rhs: (labels.len(), 1),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::InvalidArgument(format!("label {bad} with {classes} classes")));
    }
    let inv = 1.0 / batch.max(1) as f64;
    let mut total = 0.0;
    let mut grad = DenseMatrix::zeros(batch, classes);
    let mut probs = vec![0.0f64; classes];
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, v) in probs.iter_mut().zip(row) {
            *p = (v.to_f64() - max).exp();
            sum += *p;
        }
        total += sum.ln() - (row[label as usize].to_f64() - max);
        for (c, (g, p)) in grad.row_mut(r).iter_mut().zip(&probs).enumerate() {
            let onehot = if c == label as usize { 1.0 } else { 0.0 };
            *g = T::from_f64((p / sum - onehot) * inv);
        }
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn uniform_logits() {
        let (l, _) = cross_entropy(&DenseMatrix::<f64>::zeros(3, 10), &[0, 4, 9]).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits() {
        let mut z = DenseMatrix::<f64>::zeros(1, 10);
        z.set(0, 2, 1000.0);
        let (l, g) = cross_entropy(&z, &[2]).unwrap();
        assert!(l.abs() < 1e-12 && l.is_finite());
        assert!(g.max_abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let mut rng = Rng::seed_from_u64(0);
        let z = DenseMatrix::<f64>::random_uniform(4, 10, -2.0, 2.0, &mut rng);
        let labels = [1, 7, 0, 9];
        let (_, g) = cross_entropy(&z, &labels).unwrap();
        let h = 1e-6;
        for r in 0..4 {
            for c in 0..10 {
                let mut zp = z.clone();
                zp.set(r, c, z.get(r, c) + h);
                let mut zm = z.clone();
                zm.set(r, c, z.get(r, c) - h);
                let fd = (cross_entropy(&zp, &labels).unwrap().0 - cross_entropy(&zm, &labels).unwrap().0) / (2.0 * h);
                assert!(crate::verify::grad_rel_err(g.get(r, c), fd) <= 1e-5);
            }
        }
    }

    #[test]
    fn label_checks() {
        assert!(cross_entropy(&DenseMatrix::<f64>::zeros(2, 10), &[0]).is_err());
        assert!(cross_entropy(&DenseMatrix::<f64>::zeros(1, 10), &[10]).is_err());
    }
}

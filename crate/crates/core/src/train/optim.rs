use crate::tensor::Scalar;
use crate::{Error, Result};

/// One classical-momentum update: `v ← μ·v + g`, `w ← w − lr·v`.
pub fn sgd_momentum_step<T: Scalar>(w: &mut [T], g: &[T], v: &mut [T], lr: f64, momentum: f64) -> Result<()> {
    if w.len() != g.len() || w.len() != v.len() {
        return Err(Error::ShapeMismatch {
            op: "sgd_momentum_step",
            lhs: (w.len(), v.len()),
            rhs: (g.len(), 1),
        });
    }
    let (lr, mu) = (T::from_f64(lr), T::from_f64(momentum));
    for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *vi = mu * *vi + gi;
        *wi -= lr * *vi;
    }
    Ok(())
}

/// SGD with classical momentum over a fixed list of parameter slices.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdMomentum<T> {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> SgdMomentum<T> {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[Vec<T>] {
        &self.velocity
    }

    /// Update `params` in place; velocities are created lazily at zero.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[&[T]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::InvalidArgument("parameter list changed between steps".into()));
        }
        for ((w, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            sgd_momentum_step(w, g, v, self.learning_rate, self.momentum)?;
        }
        Ok(())
    }
}

use super::{DiffArray, Result, Scalar, TensorError};

/// RMSProp with per-parameter mean-square accumulators.
///
/// `ms <- decay * ms + (1 - decay) * g^2; p <- p - lr * g / (sqrt(ms) + eps)`.
#[derive(Clone, Debug)]
pub struct RmsProp<T = f32> {
    pub lr: T,
    pub decay: T,
    pub eps: T,
    mean_square: Vec<Vec<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(lr: T, decay: T, eps: T) -> Self {
        Self {
            lr,
            decay,
            eps,
            mean_square: Vec::new(),
        }
    }

    pub fn mean_square(&self) -> &[Vec<T>] {
        &self.mean_square
    }

    /// Applies one update to every parameter and clears their gradients.
    /// The parameter list must be passed in the same order on every call.
    pub fn step(&mut self, params: &mut [&mut DiffArray<T>]) -> Result<()> {
        if let Some(index) = params.iter().position(|p| p.grad().is_none()) {
            return Err(TensorError::MissingGrad { index });
        }
        if self.mean_square.len() != params.len() {
            self.mean_square = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        let one = T::one();
        for (p, ms) in params.iter_mut().zip(&mut self.mean_square) {
            let g = p.grad().expect("checked above").to_vec();
            for ((v, m), gi) in p.values_mut().iter_mut().zip(ms.iter_mut()).zip(g) {
                *m = self.decay * *m + (one - self.decay) * gi * gi;
                *v = *v - self.lr * gi / (m.sqrt() + self.eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

//! Dense row-major tensors with an optional gradient accumulator.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use super::scalar::Scalar;

/// Dense n-dimensional array in row-major order.
///
/// `grad` is present iff `requires_grad` and always matches `data` in length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Self {
        let numel: usize = shape.iter().product();
        assert!(
            shape.iter().all(|&e| e > 0),
            "tensor extents must be positive, got {:?}",
            shape
        );
        assert_eq!(
            numel,
            data.len(),
            "shape {:?} wants {} elements, got {}",
            shape,
            numel,
            data.len()
        );
        Tensor { shape, data, requires_grad: false, grad: None }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Self::from_vec(shape, vec![T::zero(); numel])
    }

    pub fn full(shape: Vec<usize>, value: T) -> Self {
        let numel: usize = shape.iter().product();
        Self::from_vec(shape, vec![value; numel])
    }

    /// Xavier/Glorot uniform init: values drawn from ±sqrt(6 / (fan_in + fan_out)).
    ///
    /// Deterministic for a fixed seed. Matrices `[in, out]` use their extents
    /// as fans; conv filters `[k, in, out]` use `k*in` and `k*out`.
    pub fn xavier(shape: Vec<usize>, seed: u64) -> Self {
        let (fan_in, fan_out) = xavier_fans(&shape);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| T::from_f64(rng.gen_range(-bound..=bound)))
            .collect();
        Self::from_vec(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    /// Marks the tensor as a trainable parameter, allocating its accumulator.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        if self.grad.is_none() {
            self.grad = Some(vec![T::zero(); self.data.len()]);
        }
        self
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [T]> {
        self.grad.as_deref_mut()
    }

    /// Adds `delta` into the gradient accumulator.
    pub fn accumulate_grad(&mut self, delta: &[T]) {
        let g = self
            .grad
            .as_mut()
            .expect("accumulate_grad on tensor without requires_grad");
        assert_eq!(g.len(), delta.len(), "gradient length mismatch");
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += *di;
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Fan-in/fan-out used by Xavier init.
pub fn xavier_fans(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (shape[0], shape[0]),
        2 => (shape[0], shape[1]),
        // conv filter [k, in, out]: receptive-field-scaled fans
        _ => {
            let k: usize = shape[..shape.len() - 2].iter().product();
            (k * shape[shape.len() - 2], k * shape[shape.len() - 1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_matches_data_len() {
        let t = Tensor::<f32>::from_vec(vec![2, 3], vec![0.0; 6]);
        assert_eq!(t.numel(), 6);
    }

    #[test]
    #[should_panic(expected = "elements")]
    fn shape_mismatch_panics() {
        let _ = Tensor::<f32>::from_vec(vec![2, 3], vec![0.0; 5]);
    }

    #[test]
    fn xavier_deterministic_for_seed() {
        let a = Tensor::<f32>::xavier(vec![7, 5], 42);
        let b = Tensor::<f32>::xavier(vec![7, 5], 42);
        assert_eq!(a.data(), b.data());
        let c = Tensor::<f32>::xavier(vec![7, 5], 43);
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn xavier_bounds_never_exceeded() {
        let (fi, fo) = (30, 20);
        let bound = (6.0f64 / (fi + fo) as f64).sqrt();
        let t = Tensor::<f64>::xavier(vec![fi, fo], 7);
        assert!(t.data().iter().all(|&x| x.abs() <= bound));
    }

    #[test]
    fn xavier_empirical_variance() {
        // variance of U(-a, a) is a^2/3 = 2/(fan_in+fan_out); sampling oracle
        let (fi, fo) = (500, 200);
        let t = Tensor::<f64>::xavier(vec![fi, fo], 11);
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().sum::<f64>() / n;
        let var: f64 = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / (fi + fo) as f64;
        assert!(
            (var - expected).abs() / expected < 0.1,
            "variance {} vs expected {}",
            var,
            expected
        );
    }

    #[test]
    fn grad_accumulates() {
        let mut t = Tensor::<f64>::zeros(vec![3]).with_grad();
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), &[2.0, 3.0, 4.0]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), &[0.0, 0.0, 0.0]);
    }
}

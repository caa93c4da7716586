//! Adam with bias correction and global-norm gradient clipping.

use std::collections::BTreeMap;

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Per-parameter Adam moments plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    moments: BTreeMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamState<T> {
    /// β1 = 0.9, β2 = 0.999, ε = 1e−8.
    pub fn new() -> Self {
        AdamState {
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over every named parameter, reading `grad` from each
    /// tensor. Panics on non-finite gradients.
    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor<T>>, lr: T) {
        assert!(lr > T::zero(), "adam: learning rate must be positive");
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for (name, param) in params.iter_mut() {
            if !param.requires_grad() {
                continue;
            }
            let n = param.numel();
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![T::zero(); n], vec![T::zero(); n]));
            assert_eq!(m.len(), n, "adam: moment shape drifted for {}", name);
            let grad = param.grad().expect("adam: missing gradient").to_vec();
            assert!(
                grad.iter().all(|g| g.is_finite()),
                "adam: non-finite gradient for {}",
                name
            );
            let data = param.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

impl<T: Scalar> Default for AdamState<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Global-norm clipping across every gradient buffer: when ‖g‖ exceeds the
/// threshold, all gradients scale by `threshold / ‖g‖`.
///
/// Returns the pre-clip global norm.
pub fn clip_gradients<T: Scalar>(params: &mut BTreeMap<String, Tensor<T>>, threshold: T) -> T {
    assert!(threshold > T::zero(), "clip_gradients: threshold must be positive");
    let mut sq = T::zero();
    for p in params.values() {
        if let Some(g) = p.grad() {
            for &x in g {
                sq += x * x;
            }
        }
    }
    let norm = sq.sqrt();
    if norm > threshold {
        let scale = threshold / norm;
        for p in params.values_mut() {
            if let Some(g) = p.grad_mut() {
                for x in g.iter_mut() {
                    *x *= scale;
                }
            }
        }
    }
    norm
}

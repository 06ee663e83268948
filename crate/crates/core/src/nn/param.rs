use rand::Rng;

use super::{Scalar, Tensor};

/// A trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    /// Whether the L2 penalty applies to this tensor.
    pub decay: bool,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>, decay: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            value,
            grad,
            decay,
        }
    }
}

/// Ordered collection of named parameters. Order is fixed at construction
/// and defines both the optimizer's iteration order and the checkpoint layout.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    /// Adds a parameter and returns its index.
    pub fn push(&mut self, param: Param<T>) -> usize {
        self.params.push(param);
        self.params.len() - 1
    }

    pub fn get(&self, idx: usize) -> &Param<T> {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Param<T> {
        &mut self.params[idx]
    }

    pub fn value(&self, idx: usize) -> &Tensor<T> {
        &self.params[idx].value
    }

    pub fn grad_mut(&mut self, idx: usize) -> &mut Tensor<T> {
        &mut self.params[idx].grad
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Snapshot of all values, used to restore the best epoch.
    pub fn values(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: Vec<Tensor<T>>) {
        assert_eq!(values.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(values) {
            assert_eq!(p.value.shape(), v.shape());
            p.value = v;
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param::new(p.name.clone(), p.value.cast(), p.decay))
                .collect(),
        }
    }
}

/// Glorot/Xavier uniform initialisation.
pub(crate) fn glorot<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, limit)
}

pub(crate) fn uniform<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-limit..=limit)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches element count")
}

impl<T: Scalar> ParamSet<T> {
    /// Two distinct parameters borrowed mutably at once.
    pub fn pair_mut(&mut self, a: usize, b: usize) -> (&mut Param<T>, &mut Param<T>) {
        assert_ne!(a, b);
        if a < b {
            let (lo, hi) = self.params.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        } else {
            let (lo, hi) = self.params.split_at_mut(a);
            (&mut hi[0], &mut lo[b])
        }
    }
}

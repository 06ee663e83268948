use super::{ParamSet, Scalar, Tensor};

/// Adam hyperparameters. L2 is added to the loss (`2·l2·p` joins the
/// gradient before the moment updates), not decoupled weight decay, and only
/// touches parameters flagged with `decay`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            t: 0,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Adam { lr, ..Adam::default() }
    }

    /// One update of every parameter from its accumulated gradient.
    pub fn step<T: Scalar>(&self, params: &mut ParamSet<T>, state: &mut AdamState<T>) {
        state.t += 1;
        let t = state.t as i32;
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let bc1 = T::from_f64_lossy(1.0 - self.beta1.powi(t));
        let bc2 = T::from_f64_lossy(1.0 - self.beta2.powi(t));
        let lr = T::from_f64_lossy(self.lr);
        let eps = T::from_f64_lossy(self.eps);
        let two_l2 = T::from_f64_lossy(2.0 * self.l2);
        for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
            let decay = p.decay && self.l2 != 0.0;
            let values = p.value.data_mut();
            let grads = p.grad.data();
            for (((w, &g), mi), vi) in values
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = if decay { g + two_l2 * *w } else { g };
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Param;

    fn single(value: f64, grad: f64, decay: bool) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        let mut p = Param::new("w", Tensor::from_f64(&[1], &[value]).unwrap(), decay);
        p.grad.data_mut()[0] = grad;
        ps.push(p);
        ps
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut ps = single(1.0, 0.3, false);
        let mut st = AdamState::new(&ps);
        let adam = Adam::with_lr(1e-3);
        adam.step(&mut ps, &mut st);
        let delta = ps.value(0).data()[0] - 1.0;
        assert!((delta + 1e-3).abs() < 1e-8, "delta {delta}");
    }

    #[test]
    fn zero_grad_no_change() {
        let mut ps = single(1.5, 0.0, true);
        let mut st = AdamState::new(&ps);
        Adam::with_lr(1e-3).step(&mut ps, &mut st);
        assert_eq!(ps.value(0).data()[0], 1.5);
    }

    #[test]
    fn l2_acts_as_gradient() {
        // with l2 > 0 and zero grad the update equals a plain step on grad 2·l2·p
        let mut a = single(2.0, 0.0, true);
        let mut b = single(2.0, 2.0 * 0.01 * 2.0, true);
        let (mut sa, mut sb) = (AdamState::new(&a), AdamState::new(&b));
        Adam { l2: 0.01, ..Adam::with_lr(1e-2) }.step(&mut a, &mut sa);
        Adam::with_lr(1e-2).step(&mut b, &mut sb);
        assert_eq!(a.value(0).data(), b.value(0).data());
        assert!((sa.m[0].data()[0] - 0.1 * 0.04).abs() < 1e-15);
    }

    #[test]
    fn l2_skips_undecayed_params() {
        let mut ps = single(2.0, 0.0, false);
        let mut st = AdamState::new(&ps);
        Adam { l2: 0.5, ..Adam::default() }.step(&mut ps, &mut st);
        assert_eq!(ps.value(0).data()[0], 2.0);
    }
}

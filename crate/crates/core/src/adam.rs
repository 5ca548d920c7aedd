use crate::{Error, Result};

/// Adam moments and step counter for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_hyper(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` in the direction of `-grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if !(lr >= 0.0) {
            return Err(Error::InvalidLearningRate(lr));
        }
        if params.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                actual: params.len(),
            });
        }
        if grad.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                actual: grad.len(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2) = (self.beta1, self.beta2);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            if lr == 0.0 {
                continue;
            }
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.3, 1.0, -4.0], 0.0).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_grad_fresh_state_leaves_params() {
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, -2.0];
        s.step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        // at t = 1, m̂ = g and v̂ = g², so the step is -lr g / (|g| + eps)
        for &g in &[3.0, -0.25, 1e-3] {
            let mut s = AdamState::new(1);
            let mut p = vec![0.0];
            s.step(&mut p, &[g], 0.1).unwrap();
            let expected = -0.1 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15);
            assert!((p[0] + 0.1 * g.signum()).abs() <= 0.1 * 1e-8 / g.abs() + 1e-15);
        }
    }

    #[test]
    fn negative_lr_rejected() {
        let mut s = AdamState::new(1);
        let mut p = vec![0.0];
        assert!(matches!(
            s.step(&mut p, &[1.0], -0.1),
            Err(Error::InvalidLearningRate(_))
        ));
        assert!(s.step(&mut p, &[1.0], f64::NAN).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0];
        assert!(s.step(&mut p, &[1.0], 0.1).is_err());
    }

    #[test]
    fn moments_nonnegative_and_counter_increases() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        for i in 0..10 {
            s.step(&mut p, &[(i as f64).sin(), -1.0], 0.01).unwrap();
            assert_eq!(s.steps(), i + 1);
            assert!(s.second_moment().iter().all(|&v| v >= 0.0));
        }
    }
}

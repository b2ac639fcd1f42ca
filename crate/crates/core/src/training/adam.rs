use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adam moments and step counter, one slot per parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &[Tensor]) -> Self {
        Adam::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &[Tensor], beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// Checks that moment shapes mirror `params`.
    pub fn matches(&self, params: &[Tensor]) -> bool {
        self.m.len() == params.len()
            && self.v.len() == params.len()
            && params
                .iter()
                .zip(self.m.iter().zip(&self.v))
                .all(|(p, (m, v))| m.len() == p.len() && v.len() == p.len())
    }

    /// One bias-corrected update. `name` labels parameter `i` in errors.
    pub fn step(
        &mut self,
        params: &mut [Tensor],
        grads: &[Tensor],
        lr: f64,
        name: impl Fn(usize) -> String,
    ) -> Result<()> {
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if params.len() != grads.len() || !self.matches(params) {
            return Err(Error::InvalidArgument(
                "optimizer state does not match parameters".into(),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient for parameter {}",
                    name(i)
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let mut data = p.to_vec();
            for (j, (&gj, x)) in g.data().iter().zip(data.iter_mut()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("parameter {} diverged", name(i))));
            }
            *p = Tensor::new(p.shape().to_vec(), data)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(i: usize) -> String {
        format!("p{i}")
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::vector(&[1.0, -2.0])];
        let before = params.clone();
        let mut adam = Adam::new(&params);
        adam.step(&mut params, &[Tensor::zeros(&[2])], 0.001, name).unwrap();
        assert_eq!(params, before);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut params = vec![Tensor::vector(&[1.0])];
        let mut adam = Adam::new(&params);
        adam.m[0] = vec![0.5];
        adam.v[0] = vec![0.25];
        adam.step(&mut params, &[Tensor::zeros(&[1])], 0.001, name).unwrap();
        assert!((adam.m[0][0] - 0.45).abs() < 1e-15);
        assert!((adam.v[0][0] - 0.24975).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut adam = Adam::new(&params);
        adam.step(&mut params, &[Tensor::scalar(1.0)], 0.001, name).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((params[0].data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn descends_a_quadratic() {
        // f(x) = (x - 3)^2, f'(x) = 2(x - 3)
        let f = |x: f64| (x - 3.0).powi(2);
        let mut params = vec![Tensor::scalar(0.0)];
        let mut adam = Adam::new(&params);
        let start = f(0.0);
        for _ in 0..2 {
            let x = params[0].data()[0];
            adam.step(&mut params, &[Tensor::scalar(2.0 * (x - 3.0))], 0.1, name)
                .unwrap();
        }
        assert!(f(params[0].data()[0]) < start);
    }

    #[test]
    fn overflowing_update_is_numerical_failure() {
        let mut params = vec![Tensor::scalar(-1e308)];
        let mut adam = Adam::new(&params);
        let err = adam.step(&mut params, &[Tensor::scalar(1.0)], 1e308, name).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("p0"), "{err}");
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut params = vec![Tensor::scalar(0.0), Tensor::scalar(0.0)];
        let mut adam = Adam::new(&params);
        let err = adam
            .step(
                &mut params,
                &[Tensor::scalar(0.0), Tensor::scalar(f64::NAN)],
                0.001,
                name,
            )
            .unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");
        assert_eq!(adam.step, 0);
    }
}

use serde::{Deserialize, Serialize};

use super::{Parameters, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one parameter set, matched to it by tensor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape().to_vec()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// Zero-extends moments of tensors that grew by appending rows (mixing head growth).
    pub fn sync_shapes<P: Parameters + ?Sized>(&mut self, params: &P) -> Result<()> {
        let tensors = params.tensors();
        if tensors.len() != self.first.len() {
            return Err(Error::contract(format!(
                "optimizer tracks {} tensors, parameters have {}",
                self.first.len(),
                tensors.len()
            )));
        }
        for (i, t) in tensors.iter().enumerate() {
            for moments in [&mut self.first, &mut self.second] {
                let m = &mut moments[i];
                if m.shape() != t.shape() {
                    if t.len() < m.len() {
                        return Err(Error::contract(format!(
                            "{} shrank from {:?} to {:?}",
                            params.tensor_name(i),
                            m.shape(),
                            t.shape()
                        )));
                    }
                    let mut data = m.data().to_vec();
                    data.resize(t.len(), 0.0);
                    m.reshape_for_growth(t.shape().to_vec(), data);
                }
            }
        }
        Ok(())
    }

    /// One bias-corrected Adam update minimizing the loss whose gradient is `grads`.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        self.sync_shapes(params)?;
        let gts = grads.tensors();
        if gts.len() != self.first.len() {
            return Err(Error::contract("gradient set does not match parameters"));
        }
        for (i, g) in gts.iter().enumerate() {
            if g.shape() != self.first[i].shape() {
                return Err(Error::contract(format!(
                    "gradient for {} has shape {:?}, expected {:?}",
                    grads.tensor_name(i),
                    g.shape(),
                    self.first[i].shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(grads.tensor_name(i)));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(gts)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

impl Parameters for AdamState {
    fn tensors(&self) -> Vec<&Tensor> {
        self.first.iter().chain(&self.second).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.first.iter_mut().chain(self.second.iter_mut()).collect()
    }

    fn tensor_name(&self, index: usize) -> String {
        let n = self.first.len();
        if index < n {
            format!("m[{index}]")
        } else {
            format!("v[{}]", index - n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::{Mlp, Rng};
    use approx::assert_relative_eq;

    fn scalar_params(v: f64) -> Vec<Mlp> {
        let mut net = Mlp::zeros(&[1, 1]);
        net.layers_mut()[0].weight.data_mut()[0] = v;
        vec![net]
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut rng = Rng::new(3);
        let mut net = Mlp::random(&[2, 3, 1], 1.0, &mut rng);
        let before = net.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &net);
        let zeros = net.zeros_like();
        adam.step(&mut net, &zeros).unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 1);
        assert!(adam.first_moments().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut p = scalar_params(0.0);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        let mut g = scalar_params(1.0);
        adam.step(&mut p, &g).unwrap();
        let m1 = adam.first_moments()[0].data()[0];
        g[0].layers_mut()[0].weight.data_mut()[0] = 0.0;
        adam.step(&mut p, &g).unwrap();
        assert_relative_eq!(adam.first_moments()[0].data()[0], 0.9 * m1, max_relative = 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2 after correction: delta = -lr * g / (|g| + eps)
        for g in [0.3, -2.5, 1e-3] {
            let mut p = scalar_params(1.0);
            let cfg = AdamConfig::with_learning_rate(0.01);
            let mut adam = AdamState::new(cfg, &p);
            adam.step(&mut p, &scalar_params(g)).unwrap();
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert_relative_eq!(p[0].layers()[0].weight.data()[0], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_gradient_update_tends_to_lr_sign() {
        let lr = 1e-3;
        let mut p = scalar_params(0.0);
        let mut adam = AdamState::new(AdamConfig::with_learning_rate(lr), &p);
        let g = scalar_params(-0.7);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0].layers()[0].weight.data()[0];
            adam.step(&mut p, &g).unwrap();
            last = p[0].layers()[0].weight.data()[0] - before;
        }
        // positive direction, magnitude -> lr
        assert_relative_eq!(last, lr, max_relative = 1e-6);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = vec![Mlp::zeros(&[1, 2, 1])];
        let mut g = p.clone();
        g[0].layers_mut()[1].bias.data_mut()[0] = f64::NAN;
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        match adam.step(&mut p, &g) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "[0].layer1.bias"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn grown_parameters_get_zero_moments() {
        let mut net = Mlp::zeros(&[2, 3]);
        let mut adam = AdamState::new(AdamConfig::default(), &net);
        let mut g = net.zeros_like();
        g.layers_mut()[0].bias.data_mut()[0] = 1.0;
        adam.step(&mut net, &g).unwrap();
        net.push_output_unit(&[0.0, 0.0], 0.0).unwrap();
        let mut g2 = net.zeros_like();
        g2.layers_mut()[0].bias.data_mut()[3] = 1.0;
        adam.step(&mut net, &g2).unwrap();
        assert_eq!(adam.first_moments()[1].shape(), &[4]);
        assert!(net.layers()[0].bias.data()[3] < 0.0);
    }
}

use serde::{Deserialize, Serialize};

use super::params::ParamVector;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One in-place Adam update with bias correction.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], hp: &AdamHyper) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - hp.beta1.powi(t);
        let c2 = 1.0 - hp.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
            *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
        }
    }
}

/// Pure form of [`AdamState::step`].
pub fn adam_step(
    params: &ParamVector,
    grad: &ParamVector,
    state: &AdamState,
    hp: &AdamHyper,
) -> Result<(ParamVector, AdamState), ModelError> {
    params.expect_layout(grad.layout())?;
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(ModelError::LengthMismatch {
            layout: params.layout_tag(),
            expected: params.len(),
            found: state.m.len(),
        });
    }
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(p.values_mut(), grad.values(), hp);
    Ok((p, s))
}

/// Plain gradient descent step.
pub fn sgd_step(params: &mut [f64], grad: &[f64], learning_rate: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= learning_rate * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Layout, ModelFamily};

    const HP: AdamHyper = AdamHyper {
        learning_rate: 0.01,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };

    fn pv(v: Vec<f64>) -> ParamVector {
        ParamVector::new(Layout::new(ModelFamily::Lr, v.len() - 1), v).unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let p = pv(vec![1.0, -2.0, 0.5]);
        let g = pv(vec![3.0, -0.001, 250.0]);
        let (next, s) = adam_step(&p, &g, &AdamState::new(3), &HP).unwrap();
        assert_eq!(s.t, 1);
        for ((a, b), gi) in next.values().iter().zip(p.values()).zip(g.values()) {
            let step = b - a;
            assert!((step.abs() - HP.learning_rate).abs() < 1e-6);
            assert_eq!(step.signum(), gi.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = pv(vec![1.0, 2.0]);
        let g = pv(vec![0.0, 0.0]);
        let mut s = AdamState::new(2);
        for _ in 0..10 {
            (p, s) = adam_step(&p, &g, &s, &HP).unwrap();
        }
        assert_eq!(p.values(), &[1.0, 2.0]);
    }

    #[test]
    fn deterministic() {
        let p = pv(vec![0.3, 0.7]);
        let g = pv(vec![0.1, -0.2]);
        let s = AdamState::new(2);
        assert_eq!(
            adam_step(&p, &g, &s, &HP).unwrap(),
            adam_step(&p, &g, &s, &HP).unwrap()
        );
    }

    #[test]
    fn state_length_checked() {
        let p = pv(vec![0.3, 0.7]);
        assert!(adam_step(&p, &p, &AdamState::new(3), &HP).is_err());
    }
}

//! Two-hidden-layer perceptron: d → 32 (ReLU) → 16 (ReLU) → 1 (sigmoid).

use serde::{Deserialize, Serialize};

use super::activation::{bce_loss, relu, relu_derivative, sigmoid};
use super::params::{Layout, ParamVector};
use super::{ModelError, ModelFamily, HIDDEN1, HIDDEN2};
use crate::dataset::LabeledDataset;

/// Weight matrices are row-major with one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// Start offsets of each block in the flat layout.
#[derive(Debug, Clone, Copy)]
struct Offsets {
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

impl Offsets {
    fn new(d: usize) -> Self {
        let b1 = HIDDEN1 * d;
        let w2 = b1 + HIDDEN1;
        let b2 = w2 + HIDDEN2 * HIDDEN1;
        let w3 = b2 + HIDDEN2;
        let b3 = w3 + HIDDEN2;
        Self { b1, w2, b2, w3, b3 }
    }
}

/// Inputs, pre-activations and activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub x: Vec<f64>,
    pub z1: [f64; HIDDEN1],
    pub a1: [f64; HIDDEN1],
    pub z2: [f64; HIDDEN2],
    pub a2: [f64; HIDDEN2],
    pub z3: f64,
    pub y_hat: f64,
}

impl MlpModel {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            n_features,
            w1: vec![0.0; HIDDEN1 * n_features],
            b1: vec![0.0; HIDDEN1],
            w2: vec![0.0; HIDDEN2 * HIDDEN1],
            b2: vec![0.0; HIDDEN2],
            w3: vec![0.0; HIDDEN2],
            b3: 0.0,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(ModelFamily::Mlp, self.n_features)
    }

    pub fn flatten(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.layout().param_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v.extend_from_slice(&self.w3);
        v.push(self.b3);
        ParamVector::new(self.layout(), v).expect("block shapes are fixed")
    }

    pub fn unflatten(p: &ParamVector) -> Result<Self, ModelError> {
        let d = p.layout().n_features;
        if p.layout().family != ModelFamily::Mlp {
            return Err(ModelError::LayoutMismatch {
                expected: Layout::new(ModelFamily::Mlp, d).tag(),
                found: p.layout_tag(),
            });
        }
        let o = Offsets::new(d);
        let v = p.values();
        Ok(Self {
            n_features: d,
            w1: v[..o.b1].to_vec(),
            b1: v[o.b1..o.w2].to_vec(),
            w2: v[o.w2..o.b2].to_vec(),
            b2: v[o.b2..o.w3].to_vec(),
            w3: v[o.w3..o.b3].to_vec(),
            b3: v[o.b3],
        })
    }
}

fn forward_flat(p: &[f64], d: usize, x: &[f64], c: &mut MlpCache) {
    let o = Offsets::new(d);
    for j in 0..HIDDEN1 {
        let w = &p[j * d..(j + 1) * d];
        let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + p[o.b1 + j];
        c.z1[j] = z;
        c.a1[j] = relu(z);
    }
    for j in 0..HIDDEN2 {
        let w = &p[o.w2 + j * HIDDEN1..o.w2 + (j + 1) * HIDDEN1];
        let z = w.iter().zip(&c.a1).map(|(a, b)| a * b).sum::<f64>() + p[o.b2 + j];
        c.z2[j] = z;
        c.a2[j] = relu(z);
    }
    c.z3 = p[o.w3..o.b3]
        .iter()
        .zip(&c.a2)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + p[o.b3];
    c.y_hat = sigmoid(c.z3);
}

fn empty_cache(x: &[f64]) -> MlpCache {
    MlpCache {
        x: x.to_vec(),
        z1: [0.0; HIDDEN1],
        a1: [0.0; HIDDEN1],
        z2: [0.0; HIDDEN2],
        a2: [0.0; HIDDEN2],
        z3: 0.0,
        y_hat: 0.0,
    }
}

/// Probability and the cached intermediate values for backpropagation.
pub fn mlp_forward(m: &MlpModel, x: &[f64]) -> Result<(f64, MlpCache), ModelError> {
    if x.len() != m.n_features {
        return Err(ModelError::DimensionMismatch {
            expected: m.n_features,
            found: x.len(),
        });
    }
    let p = m.flatten();
    let mut cache = empty_cache(x);
    forward_flat(p.values(), m.n_features, x, &mut cache);
    Ok((cache.y_hat, cache))
}

pub(crate) fn mlp_predict_flat(p: &[f64], d: usize, x: &[f64]) -> f64 {
    let mut cache = empty_cache(&[]);
    forward_flat(p, d, x, &mut cache);
    cache.y_hat
}

/// Mean BCE over `rows`, writing the mean gradient into `grad` (flat layout).
pub(crate) fn mlp_loss_grad(
    p: &[f64],
    d: usize,
    ds: &LabeledDataset,
    rows: &[usize],
    grad: &mut [f64],
) -> f64 {
    let o = Offsets::new(d);
    grad.fill(0.0);
    let mut c = empty_cache(&[]);
    let mut loss = 0.0;
    let mut delta2 = [0.0; HIDDEN2];
    let mut delta1 = [0.0; HIDDEN1];
    for &i in rows {
        let x = ds.row(i);
        let y = ds.label(i);
        forward_flat(p, d, x, &mut c);
        loss += bce_loss(y, c.y_hat);

        // sigmoid + BCE: dL/dz3 = ŷ - y
        let delta3 = c.y_hat - f64::from(y);
        for j in 0..HIDDEN2 {
            grad[o.w3 + j] += delta3 * c.a2[j];
            delta2[j] = p[o.w3 + j] * delta3 * relu_derivative(c.z2[j]);
        }
        grad[o.b3] += delta3;

        delta1.fill(0.0);
        for j in 0..HIDDEN2 {
            let dj = delta2[j];
            grad[o.b2 + j] += dj;
            if dj == 0.0 {
                continue;
            }
            let row = o.w2 + j * HIDDEN1;
            for k in 0..HIDDEN1 {
                grad[row + k] += dj * c.a1[k];
                delta1[k] += p[row + k] * dj;
            }
        }
        for k in 0..HIDDEN1 {
            let dk = delta1[k] * relu_derivative(c.z1[k]);
            grad[o.b1 + k] += dk;
            if dk == 0.0 {
                continue;
            }
            for (g, xj) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g += dk * xj;
            }
        }
    }
    let n = rows.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    loss / n
}

/// Mean-over-batch BCE gradients, returned in the model's own shapes.
pub fn mlp_backprop(
    m: &MlpModel,
    ds: &LabeledDataset,
    rows: &[usize],
) -> Result<MlpModel, ModelError> {
    if ds.n_features() != m.n_features {
        return Err(ModelError::DimensionMismatch {
            expected: m.n_features,
            found: ds.n_features(),
        });
    }
    if rows.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let p = m.flatten();
    let mut grad = vec![0.0; p.len()];
    mlp_loss_grad(p.values(), m.n_features, ds, rows, &mut grad);
    MlpModel::unflatten(&ParamVector::new(p.layout(), grad)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{RegistrationKey, RowKey};
    use crate::models::init_params;

    fn ds(rows: &[(Vec<f64>, u8)]) -> LabeledDataset {
        let d = rows[0].0.len();
        LabeledDataset::new(
            (0..d).map(|j| format!("f{j}")).collect(),
            rows.iter().flat_map(|r| r.0.clone()).collect(),
            rows.iter().map(|r| r.1).collect(),
            (0..rows.len())
                .map(|i| RowKey::Registration(RegistrationKey::new(i as i64, "AAA", "X")))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_half() {
        let m = MlpModel::zeros(4);
        for x in [[0.0; 4], [1.0, -2.0, 3.0, 100.0]] {
            assert_eq!(mlp_forward(&m, &x).unwrap().0, 0.5);
        }
    }

    #[test]
    fn output_in_open_unit_interval() {
        let m = MlpModel::unflatten(&init_params(ModelFamily::Mlp, 3, 2).unwrap()).unwrap();
        for x in [[0.0, 0.0, 0.0], [5.0, -5.0, 2.0], [-30.0, 12.0, 7.0]] {
            let (p, _) = mlp_forward(&m, &x).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn dead_unit_weights_do_not_matter() {
        let mut m = MlpModel::unflatten(&init_params(ModelFamily::Mlp, 2, 5).unwrap()).unwrap();
        // Unit 0 of layer 1 is dead for all non-negative inputs.
        m.w1[0] = -1.0;
        m.w1[1] = -1.0;
        m.b1[0] = -0.5;
        let x = [0.3, 1.2];
        let before = mlp_forward(&m, &x).unwrap().0;
        m.w1[0] *= 7.0;
        m.w1[1] *= 3.0;
        assert_eq!(mlp_forward(&m, &x).unwrap().0, before);
    }

    #[test]
    fn zero_input_kills_first_layer_weight_gradient() {
        let m = MlpModel::unflatten(&init_params(ModelFamily::Mlp, 3, 8).unwrap()).unwrap();
        let d = ds(&[(vec![0.0; 3], 1), (vec![0.0; 3], 0)]);
        let g = mlp_backprop(&m, &d, &[0, 1]).unwrap();
        assert!(g.w1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_sample_has_same_gradient() {
        let m = MlpModel::unflatten(&init_params(ModelFamily::Mlp, 3, 8).unwrap()).unwrap();
        let d = ds(&[(vec![0.4, -1.0, 2.0], 1), (vec![0.4, -1.0, 2.0], 1)]);
        let once = mlp_backprop(&m, &d, &[0]).unwrap().flatten();
        let twice = mlp_backprop(&m, &d, &[0, 1]).unwrap().flatten();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let p = init_params(ModelFamily::Mlp, 10, 1).unwrap();
        assert_eq!(p.len(), 897);
        let m = MlpModel::unflatten(&p).unwrap();
        assert_eq!(m.flatten(), p);
        assert!(MlpModel::unflatten(&init_params(ModelFamily::Lr, 10, 1).unwrap()).is_err());
    }

    #[test]
    fn cache_holds_activations() {
        let m = MlpModel::unflatten(&init_params(ModelFamily::Mlp, 2, 3).unwrap()).unwrap();
        let (p, c) = mlp_forward(&m, &[1.0, -1.0]).unwrap();
        assert_eq!(c.y_hat, p);
        assert_eq!(c.x, vec![1.0, -1.0]);
        for j in 0..HIDDEN1 {
            assert_eq!(c.a1[j], relu(c.z1[j]));
        }
        assert!(mlp_forward(&m, &[1.0]).is_err());
    }
}

//! Logistic regression.

use serde::{Deserialize, Serialize};

use super::activation::{bce_loss, sigmoid};
use super::params::{Layout, ParamVector};
use super::{ModelError, ModelFamily};
use crate::dataset::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            w: vec![0.0; n_features],
            b: 0.0,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(ModelFamily::Lr, self.w.len())
    }

    pub fn flatten(&self) -> ParamVector {
        let mut v = self.w.clone();
        v.push(self.b);
        ParamVector::new(self.layout(), v).expect("layout matches by construction")
    }

    pub fn unflatten(p: &ParamVector) -> Result<Self, ModelError> {
        if p.layout().family != ModelFamily::Lr {
            return Err(ModelError::LayoutMismatch {
                expected: Layout::new(ModelFamily::Lr, p.layout().n_features).tag(),
                found: p.layout_tag(),
            });
        }
        let (w, b) = p.values().split_at(p.len() - 1);
        Ok(Self {
            w: w.to_vec(),
            b: b[0],
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `σ(w·x + b)`.
pub fn lr_forward(m: &LinearModel, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != m.w.len() {
        return Err(ModelError::DimensionMismatch {
            expected: m.w.len(),
            found: x.len(),
        });
    }
    Ok(sigmoid(dot(&m.w, x) + m.b))
}

/// Mean-over-batch gradient of BCE plus `(λ/2)‖w‖²`:
/// `grad_w = (1/B) Σ (ŷ - y) x + λ w`, `grad_b = (1/B) Σ (ŷ - y)`.
pub fn lr_gradient(
    m: &LinearModel,
    ds: &LabeledDataset,
    rows: &[usize],
    l2_lambda: f64,
) -> Result<(Vec<f64>, f64), ModelError> {
    if ds.n_features() != m.w.len() {
        return Err(ModelError::DimensionMismatch {
            expected: m.w.len(),
            found: ds.n_features(),
        });
    }
    if rows.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let params = m.flatten();
    let mut grad = vec![0.0; params.len()];
    lr_loss_grad(params.values(), ds, rows, l2_lambda, &mut grad);
    let b = grad.pop().expect("bias entry");
    Ok((grad, b))
}

/// Mean BCE + `(λ/2)‖w‖²` over `rows`, writing its gradient into `grad`
/// (flat layout). Rows are reduced left to right.
pub(crate) fn lr_loss_grad(
    params: &[f64],
    ds: &LabeledDataset,
    rows: &[usize],
    l2_lambda: f64,
    grad: &mut [f64],
) -> f64 {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    grad.fill(0.0);
    let mut loss = 0.0;
    for &i in rows {
        let x = ds.row(i);
        let y = ds.label(i);
        let p = sigmoid(dot(w, x) + b);
        loss += bce_loss(y, p);
        let r = p - f64::from(y);
        for (g, xj) in grad[..d].iter_mut().zip(x) {
            *g += r * xj;
        }
        grad[d] += r;
    }
    let n = rows.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    let mut penalty = 0.0;
    if l2_lambda != 0.0 {
        for (g, wj) in grad[..d].iter_mut().zip(w) {
            *g += l2_lambda * wj;
            penalty += wj * wj;
        }
    }
    loss / n + 0.5 * l2_lambda * penalty
}

//! Seeded mini-batch training for both model families.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::linear::lr_loss_grad;
use super::mlp::{mlp_loss_grad, mlp_predict_flat};
use super::optim::{sgd_step, AdamHyper, AdamState};
use super::params::{Layout, ParamVector};
use super::{activation::sigmoid, ModelError, ModelFamily};
use crate::dataset::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on LR weights (bias excluded); ignored for the MLP.
    pub l2_lambda: f64,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    /// Mini-batch SGD with L2: lr 0.1, λ 1e-4, batch 64, 100 epochs.
    pub fn lr_default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 64,
            l2_lambda: 1e-4,
            optimizer: Optimizer::Sgd,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            shuffle_seed: 0,
        }
    }

    /// Adam lr 1e-3 (0.9, 0.999, 1e-8), batch 64, 20 epochs.
    pub fn mlp_default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 20,
            l2_lambda: 0.0,
            optimizer: Optimizer::Adam,
            ..Self::lr_default()
        }
    }

    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Lr => Self::lr_default(),
            ModelFamily::Mlp => Self::mlp_default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return bad(format!(
                "l2_lambda must be finite and non-negative, got {}",
                self.l2_lambda
            ));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        Ok(())
    }

    fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ParamVector,
    /// Per epoch, the row-weighted mean of each batch's objective evaluated
    /// just before that batch's update.
    pub epoch_losses: Vec<f64>,
}

/// Objective value at `params` over `rows`, writing its gradient.
pub(crate) fn loss_and_grad(
    params: &ParamVector,
    ds: &LabeledDataset,
    rows: &[usize],
    l2_lambda: f64,
    grad: &mut [f64],
) -> f64 {
    let layout = params.layout();
    match layout.family {
        ModelFamily::Lr => lr_loss_grad(params.values(), ds, rows, l2_lambda, grad),
        ModelFamily::Mlp => mlp_loss_grad(params.values(), layout.n_features, ds, rows, grad),
    }
}

fn check_fit(
    params: &ParamVector,
    ds: &LabeledDataset,
    family: ModelFamily,
) -> Result<(), ModelError> {
    params.expect_layout(Layout::new(family, ds.n_features()))
}

/// Trains from `init` for `cfg.epochs` epochs.
///
/// Each epoch reshuffles the row order with a generator seeded once from
/// `cfg.shuffle_seed` and walks it in `batch_size` chunks, keeping the short
/// final batch.
pub fn train(
    family: ModelFamily,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    init: &ParamVector,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    check_fit(init, ds, family)?;
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut params = init.clone();
    let mut losses = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            params,
            epoch_losses: losses,
        });
    }

    let mut rng = seed::rng(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len());
    let l2 = if family == ModelFamily::Lr {
        cfg.l2_lambda
    } else {
        0.0
    };
    let hp = cfg.adam();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = loss_and_grad(&params, ds, batch, l2, &mut grad);
            total += loss * batch.len() as f64;
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(params.values_mut(), &grad, cfg.learning_rate),
                Optimizer::Adam => adam.step(params.values_mut(), &grad, &hp),
            }
        }
        let epoch_loss = total / ds.n_rows() as f64;
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        losses.push(epoch_loss);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses: losses,
    })
}

/// P(at risk) for every row of `ds`.
pub fn predict(params: &ParamVector, ds: &LabeledDataset) -> Result<Vec<f64>, ModelError> {
    let layout = params.layout();
    if layout.n_features != ds.n_features() {
        return Err(ModelError::DimensionMismatch {
            expected: layout.n_features,
            found: ds.n_features(),
        });
    }
    let v = params.values();
    let d = layout.n_features;
    Ok(ds
        .rows()
        .map(|x| match layout.family {
            ModelFamily::Lr => {
                sigmoid(v[..d].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + v[d])
            }
            ModelFamily::Mlp => mlp_predict_flat(v, d, x),
        })
        .collect())
}

//! Flat parameter vectors: the unit exchanged between server and clients.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, ModelFamily, HIDDEN1, HIDDEN2};
use crate::seed;

/// Family and input width of a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub family: ModelFamily,
    pub n_features: usize,
}

impl Layout {
    pub fn new(family: ModelFamily, n_features: usize) -> Self {
        Self { family, n_features }
    }

    pub fn param_count(&self) -> usize {
        let d = self.n_features;
        match self.family {
            ModelFamily::Lr => d + 1,
            ModelFamily::Mlp => HIDDEN1 * d + HIDDEN1 + HIDDEN2 * HIDDEN1 + HIDDEN2 + HIDDEN2 + 1,
        }
    }

    /// `lr.v1:d=<d>` or `mlp32x16.v1:d=<d>`.
    pub fn tag(&self) -> String {
        let family = match self.family {
            ModelFamily::Lr => "lr",
            ModelFamily::Mlp => "mlp32x16",
        };
        format!("{family}.v1:d={}", self.n_features)
    }

    pub fn parse_tag(tag: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::BadLayoutTag(tag.to_string());
        let (family, d) = tag.split_once(".v1:d=").ok_or_else(bad)?;
        let family = match family {
            "lr" => ModelFamily::Lr,
            "mlp32x16" => ModelFamily::Mlp,
            _ => return Err(bad()),
        };
        let n_features = d.parse().map_err(|_| bad())?;
        Ok(Self { family, n_features })
    }
}

/// Flat, deterministically ordered model parameters.
///
/// LR: `w` then `b`. MLP: `W1` (32×d, row-major), `b1`, `W2` (16×32), `b2`,
/// `W3` (16), `b3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamFile", into = "ParamFile")]
pub struct ParamVector {
    layout: Layout,
    values: Vec<f64>,
}

/// On-disk form: `{"layout_tag": "...", "values": [...]}`.
#[derive(Serialize, Deserialize)]
struct ParamFile {
    layout_tag: String,
    values: Vec<f64>,
}

impl TryFrom<ParamFile> for ParamVector {
    type Error = ModelError;
    fn try_from(f: ParamFile) -> Result<Self, Self::Error> {
        ParamVector::new(Layout::parse_tag(&f.layout_tag)?, f.values)
    }
}

impl From<ParamVector> for ParamFile {
    fn from(p: ParamVector) -> Self {
        ParamFile {
            layout_tag: p.layout.tag(),
            values: p.values,
        }
    }
}

impl ParamVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != layout.param_count() {
            return Err(ModelError::LengthMismatch {
                layout: layout.tag(),
                expected: layout.param_count(),
                found: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.param_count()],
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn layout_tag(&self) -> String {
        self.layout.tag()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn expect_layout(&self, layout: Layout) -> Result<(), ModelError> {
        if self.layout != layout {
            return Err(ModelError::LayoutMismatch {
                expected: layout.tag(),
                found: self.layout.tag(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameter vectors always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self, ModelError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

/// Initial parameters: LR all zeros; MLP weights uniform in
/// `±sqrt(6 / (fan_in + fan_out))` per layer, biases zero.
pub fn init_params(
    family: ModelFamily,
    n_features: usize,
    seed: u64,
) -> Result<ParamVector, ModelError> {
    if n_features == 0 {
        return Err(ModelError::InvalidConfig(
            "model needs at least one feature".into(),
        ));
    }
    let layout = Layout::new(family, n_features);
    let mut p = ParamVector::zeros(layout);
    if family == ModelFamily::Mlp {
        let mut rng = seed::rng(seed);
        let v = p.values_mut();
        let mut offset = 0;
        for (fan_in, fan_out) in [(n_features, HIDDEN1), (HIDDEN1, HIDDEN2), (HIDDEN2, 1)] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut v[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-limit..limit);
            }
            // weights, then fan_out biases left at zero
            offset += fan_in * fan_out + fan_out;
        }
        debug_assert_eq!(offset, layout.param_count());
    }
    Ok(p)
}

/// Glorot limit of each MLP weight block, in layout order.
pub fn mlp_weight_limits(n_features: usize) -> [f64; 3] {
    [(n_features, HIDDEN1), (HIDDEN1, HIDDEN2), (HIDDEN2, 1)]
        .map(|(i, o)| (6.0 / (i + o) as f64).sqrt())
}

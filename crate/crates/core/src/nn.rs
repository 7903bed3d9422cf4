//! Feedforward network model: a stack of dense layers with a scalar output
//! compared against a decision level.
//!
//! The JSON wire format is
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "level": 0.5,
//!   "layers": [
//!     { "weights": [[...], ...], "biases": [...], "activation": "relu" }
//!   ]
//! }
//! ```
//!
//! `weights[i][j]` multiplies input `j` of the layer to produce output `i`.
//! Parameters flatten layer by layer, weights row-major first, then biases.
//!
//! Two architectural degrees of freedom keep tiny textbook models honest:
//! `biases` may be empty (a bias-free layer), and `frozen_weights: true`
//! marks the weight matrix as a fixed constant of the architecture, so it
//! never appears in the flattened parameter vector. A one-parameter model
//! like `sig(x + b)` is a frozen unit weight plus one bias.

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => crate::interval::sigmoid_scalar(z),
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn apply_interval(self, z: Interval) -> Interval {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.relu(),
            Activation::Sigmoid => z.sigmoid(),
            Activation::Tanh => z.tanh(),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    /// One bias per row, or empty for a bias-free layer.
    #[serde(default)]
    pub biases: Vec<f64>,
    pub activation: Activation,
    /// Treat the weight matrix as an architecture constant rather than a
    /// parameter block.
    #[serde(default, skip_serializing_if = "is_false")]
    pub frozen_weights: bool,
}

impl Layer {
    /// The common case: trainable weights, one bias per row.
    pub fn dense(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Layer {
        Layer {
            weights,
            biases,
            activation,
            frozen_weights: false,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn param_count(&self) -> usize {
        let w = if self.frozen_weights {
            0
        } else {
            self.out_dim() * self.in_dim()
        };
        w + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub level: f64,
    pub layers: Vec<Layer>,
}

/// A network's parameters in flat form. The layout (which flat index holds
/// which weight or bias) is a function of the architecture; see
/// [`Network::param_layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Identifies a single scalar parameter within the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamIndex {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
}

/// Bijection between flat indices and (layer, weight/bias) coordinates.
/// Frozen weight blocks and absent biases own no flat indices.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    spans: Vec<LayerSpan>,
    total: usize,
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    start: usize,
    rows: usize,
    cols: usize,
    frozen: bool,
    biased: bool,
}

impl LayerSpan {
    fn weight_count(&self) -> usize {
        if self.frozen {
            0
        } else {
            self.rows * self.cols
        }
    }

    fn width(&self) -> usize {
        self.weight_count() + if self.biased { self.rows } else { 0 }
    }
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn flat(&self, idx: ParamIndex) -> usize {
        match idx {
            ParamIndex::Weight { layer, row, col } => {
                let s = self.spans[layer];
                debug_assert!(!s.frozen && row < s.rows && col < s.cols);
                s.start + row * s.cols + col
            }
            ParamIndex::Bias { layer, row } => {
                let s = self.spans[layer];
                debug_assert!(s.biased && row < s.rows);
                s.start + s.weight_count() + row
            }
        }
    }

    pub fn unflat(&self, flat: usize) -> ParamIndex {
        debug_assert!(flat < self.total);
        let layer = self
            .spans
            .partition_point(|s| s.start <= flat)
            .saturating_sub(1);
        // zero-width layers share a start with their successor; walk back
        // to the span that actually owns the index
        let layer = (0..=layer)
            .rev()
            .find(|&k| flat >= self.spans[k].start && flat < self.spans[k].start + self.spans[k].width())
            .expect("flat index inside some span");
        let s = self.spans[layer];
        let off = flat - s.start;
        let w = s.weight_count();
        if off < w {
            ParamIndex::Weight {
                layer,
                row: off / s.cols,
                col: off % s.cols,
            }
        } else {
            ParamIndex::Bias {
                layer,
                row: off - w,
            }
        }
    }
}

impl Network {
    /// Checks shape consistency: chained layer dims, a single scalar output
    /// and finite parameter values.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        if !self.level.is_finite() {
            return Err(Error::InvalidNetwork("level must be finite".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("at least one layer required".into()));
        }
        let mut dim = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.out_dim() == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i} has no rows")));
            }
            for (r, row) in layer.weights.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i} row {r}: expected {dim} weights, got {}",
                        row.len()
                    )));
                }
                if row.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i} row {r} has a non-finite weight"
                    )));
                }
            }
            if !layer.biases.is_empty() && layer.biases.len() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i}: {} biases for {} rows (give one per row, or none)",
                    layer.biases.len(),
                    layer.out_dim()
                )));
            }
            if layer.biases.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {i} has a non-finite bias")));
            }
            dim = layer.out_dim();
        }
        if dim != 1 {
            return Err(Error::InvalidNetwork(format!(
                "final layer must have one output, got {dim}"
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Network> {
        let net: Network = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Network> {
        Network::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn param_layout(&self) -> ParamLayout {
        let mut spans = Vec::with_capacity(self.layers.len());
        let mut start = 0;
        for layer in &self.layers {
            spans.push(LayerSpan {
                start,
                rows: layer.out_dim(),
                cols: layer.in_dim(),
                frozen: layer.frozen_weights,
                biased: !layer.biases.is_empty(),
            });
            start += layer.param_count();
        }
        ParamLayout { spans, total: start }
    }

    pub fn flatten(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            if !layer.frozen_weights {
                for row in &layer.weights {
                    values.extend_from_slice(row);
                }
            }
            values.extend_from_slice(&layer.biases);
        }
        ParamVector { values }
    }

    /// Rebuilds a network with this architecture and the given flat values.
    pub fn unflatten(&self, params: &ParamVector) -> Result<Network> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut net = self.clone();
        let mut it = params.values.iter();
        for layer in &mut net.layers {
            if !layer.frozen_weights {
                for row in &mut layer.weights {
                    for w in row.iter_mut() {
                        *w = *it.next().unwrap();
                    }
                }
            }
            for b in layer.biases.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(net)
    }

    /// Scalar forward pass. Accumulation order is fixed (weights left to
    /// right, then the bias) and matches the symbolic encoding exactly.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut act: Vec<f64> = x.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.out_dim());
            for (r, row) in layer.weights.iter().enumerate() {
                let mut z = row[0] * act[0];
                for (w, a) in row.iter().zip(&act).skip(1) {
                    z += w * a;
                }
                if let Some(&b) = layer.biases.get(r) {
                    z += b;
                }
                next.push(layer.activation.apply(z));
            }
            act = next;
        }
        Ok(act[0])
    }

    /// 1 if the output is at or above the decision level, else 0.
    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.forward(x)? >= self.level))
    }

    /// Forward pass with parameters taken from a flat slice instead of the
    /// stored weights, avoiding the clone that `unflatten` would make.
    /// Accumulation order matches [`Network::forward`] bit for bit.
    pub fn forward_with(&self, params: &[f64], x: &[f64]) -> Result<f64> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut act: Vec<f64> = x.to_vec();
        let mut off = 0;
        for layer in &self.layers {
            let rows = layer.out_dim();
            let cols = layer.in_dim();
            let wc = if layer.frozen_weights { 0 } else { rows * cols };
            let mut next = Vec::with_capacity(rows);
            for r in 0..rows {
                let w = |c: usize| {
                    if layer.frozen_weights {
                        layer.weights[r][c]
                    } else {
                        params[off + r * cols + c]
                    }
                };
                let mut z = w(0) * act[0];
                for (c, a) in act.iter().enumerate().skip(1) {
                    z += w(c) * a;
                }
                if !layer.biases.is_empty() {
                    z += params[off + wc + r];
                }
                next.push(layer.activation.apply(z));
            }
            off += layer.param_count();
            act = next;
        }
        Ok(act[0])
    }

    /// Interval forward pass over a box of parameters (flat layout) and a
    /// box of inputs. Sound but not exact: dependency between repeated
    /// parameter uses is ignored, as usual for interval propagation.
    pub fn interval_forward(&self, params: &IntervalBox, inputs: &IntervalBox) -> Result<Interval> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if inputs.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: inputs.len(),
            });
        }
        let mut act: Vec<Interval> = inputs.dims().to_vec();
        let mut p = 0;
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.out_dim());
            let rows = layer.out_dim();
            let cols = layer.in_dim();
            let weight_count = if layer.frozen_weights { 0 } else { rows * cols };
            for r in 0..rows {
                let weight = |c: usize| {
                    if layer.frozen_weights {
                        Interval::point(layer.weights[r][c])
                    } else {
                        params.get(p + r * cols + c)
                    }
                };
                let mut z = weight(0).mul(act[0]);
                for (c, a) in act.iter().enumerate().skip(1) {
                    z = z.add(weight(c).mul(*a));
                }
                if !layer.biases.is_empty() {
                    z = z.add(params.get(p + weight_count + r));
                }
                next.push(layer.activation.apply_interval(z));
            }
            p += layer.param_count();
            act = next;
        }
        Ok(act[0])
    }
}

/// The axis-aligned `delta`-ball around `p0` in the max norm.
pub fn perturb_box(p0: &ParamVector, delta: f64) -> Result<IntervalBox> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidQuery(format!(
            "perturbation radius must be finite and nonnegative, got {delta}"
        )));
    }
    let dims = p0
        .values
        .iter()
        .map(|&v| Interval::raw(v - delta, v + delta))
        .collect();
    Ok(IntervalBox::new(dims))
}

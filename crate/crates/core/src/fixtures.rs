//! Bundled example models and data: a trained cat/dog logistic classifier,
//! two small fixed-weight MLPs, two one-parameter teaching models with
//! closed-form robustness thresholds, and the cats measurement CSV.
//!
//! All weights are pinned constants so results are reproducible; nothing
//! here is trained at build time.

use crate::interval::{Interval, IntervalBox};
use crate::nn::{Activation, Layer, Network};

/// Logistic model classifying cat vs dog from height and weight (cm, kg):
/// `sigmoid(0.07577862 h + 1.18118408 w - 3.51518067)`, level 0.5.
pub fn cat() -> Network {
    Network {
        input_dim: 2,
        level: 0.5,
        layers: vec![Layer::dense(
            vec![vec![0.07577862, 1.18118408]],
            vec![-3.51518067],
            Activation::Sigmoid,
        )],
    }
}

/// 2-3-1 MLP with ReLU hidden units and a sigmoid output.
pub fn mlp_relu() -> Network {
    Network {
        input_dim: 2,
        level: 0.5,
        layers: vec![
            Layer::dense(
                vec![vec![2.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]],
                vec![-0.3, 0.2, -1.0],
                Activation::Relu,
            ),
            Layer::dense(vec![vec![1.5, -2.0, 1.0]], vec![-0.1], Activation::Sigmoid),
        ],
    }
}

/// 2-3-1 MLP with linear hidden units and a sigmoid output.
pub fn mlp_linear() -> Network {
    Network {
        input_dim: 2,
        level: 0.5,
        layers: vec![
            Layer::dense(
                vec![vec![1.2, -0.8], vec![-0.5, 1.0], vec![0.9, 0.7]],
                vec![-0.2, 0.1, -0.6],
                Activation::Linear,
            ),
            Layer::dense(vec![vec![1.1, -1.4, 0.9]], vec![0.15], Activation::Sigmoid),
        ],
    }
}

/// `sigmoid(w x)` with a single weight parameter `w = 1` and no bias.
pub fn toy_weight() -> Network {
    Network {
        input_dim: 1,
        level: 0.5,
        layers: vec![Layer::dense(vec![vec![1.0]], vec![], Activation::Sigmoid)],
    }
}

/// `sigmoid(x + b)` with a single bias parameter `b = 0`; the unit weight
/// is frozen into the architecture.
pub fn toy_bias() -> Network {
    Network {
        input_dim: 1,
        level: 0.5,
        layers: vec![Layer {
            weights: vec![vec![1.0]],
            biases: vec![0.0],
            activation: Activation::Sigmoid,
            frozen_weights: true,
        }],
    }
}

/// Canonical input box used for the MLP fixtures, whose weights were
/// chosen to put the decision boundary well inside it.
pub fn mlp_domain() -> IntervalBox {
    IntervalBox::new(vec![
        Interval::raw(-2.0, 2.0),
        Interval::raw(-2.0, 2.0),
    ])
}

/// The cats measurement table (`h,w,label` with a header row, 144 rows).
pub fn cats_csv() -> &'static str {
    include_str!("../fixtures/cats.csv")
}

/// Looks a bundled model up by its CLI name.
pub fn by_name(name: &str) -> Option<Network> {
    match name {
        "cat" => Some(cat()),
        "mlp-relu" => Some(mlp_relu()),
        "mlp-linear" => Some(mlp_linear()),
        "toy-weight" => Some(toy_weight()),
        "toy-bias" => Some(toy_bias()),
        _ => None,
    }
}

/// Names accepted by [`by_name`], for help text and error messages.
pub const NAMES: [&str; 5] = ["cat", "mlp-relu", "mlp-linear", "toy-weight", "toy-bias"];

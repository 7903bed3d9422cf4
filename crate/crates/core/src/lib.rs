//! Certified robustness analysis of small feed-forward binary classifiers
//! under parameter perturbation.
//!
//! Given a network, a perturbation radius delta (for example the worst-case
//! rounding error of a fixed-point quantization scheme), and a robustness
//! property, this crate either proves the property (no admissible
//! perturbation violates it) or produces a concrete counterexample, and it
//! computes certified two-sided bounds on the worst-case confidence
//! deviation and on the widest decision margin that can still be flipped.
//!
//! The pipeline: [`nn`] models the classifier, [`encoder`] negates a
//! robustness definition into a real-arithmetic [`formula::Formula`],
//! [`solver`] decides satisfiability delta-completely by interval
//! constraint propagation and branch-and-prune, and [`optimizer`] wraps the
//! same machinery in a branch-and-bound loop for the estimation problems.
//! [`quant`] maps fixed-point schemes to perturbation radii and searches
//! for the smallest safe bit width; [`sampling`] provides brute-force
//! oracles and scan generation for cross-checking everything.

pub mod contract;
pub mod encoder;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod formula;
pub mod interval;
pub mod nn;
pub mod optimizer;
pub mod quant;
pub mod sampling;
pub mod solver;

pub use encoder::{QueryKind, RobustnessQuery, Side};
pub use error::{Error, Result};
pub use expr::Expr;
pub use formula::Formula;
pub use interval::{Interval, IntervalBox};
pub use nn::{Activation, Layer, Network, ParamVector};
pub use optimizer::{
    estimate_eps_global, estimate_eps_local, estimate_sigma, minimize, Estimate, OptProblem,
    OptResult,
};
pub use quant::{
    derive_delta, quantize, safe_bits_search, verify_quantized, QuantReport, QuantScheme,
    RobustnessTarget,
};
pub use sampling::{
    accuracy, domain_from_dataset, falsify, grid_eps, load_dataset, parse_dataset, scan_inputs,
    write_scan_csv, LabeledPoint, ScanMode, ScanRecord,
};
pub use solver::{decide, SolverConfig, Verdict};

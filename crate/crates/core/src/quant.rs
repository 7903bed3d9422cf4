//! Fixed-point quantization of parameter vectors and the certified
//! safe-bit-width loop.
//!
//! A scheme with `f` fractional bits rounds every parameter to the nearest
//! multiple of `2^-f` (ties to even), moving each value by at most
//! `2^-(f+1)`. That worst case is exactly a perturbation radius: when a
//! robustness query is unsatisfiable at `delta = 2^-(f+1)`, every possible
//! rounding outcome of the scheme is covered by the certificate, so the
//! parameters can be stored with `f` fractional bits without losing the
//! property. The box certificate is conservative, so the exact quantized
//! point is also checked on its own ([`verify_quantized`]), and
//! [`safe_bits_search`] finds the smallest certified `f`.

use crate::encoder::{encode, encode_with_param_box, QueryKind, RobustnessQuery};
use crate::error::Result;
use crate::interval::{Interval, IntervalBox};
use crate::nn::{Network, ParamVector};
use crate::solver::{decide, SolveStats, SolverConfig, Verdict};
use serde::{Deserialize, Serialize};

/// Fractional bits beyond the f64 mantissa cannot move a value of ordinary
/// magnitude; schemes are saturated here.
pub const MAX_FRAC_BITS: u32 = 52;

/// Uniform fixed-point grid `{k / 2^frac_bits : k integer}` with
/// round-half-to-even, so quantization is unbiased and bit-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantScheme {
    pub frac_bits: u32,
}

impl QuantScheme {
    pub fn new(frac_bits: u32) -> QuantScheme {
        QuantScheme { frac_bits }
    }

    fn effective_bits(self) -> u32 {
        self.frac_bits.min(MAX_FRAC_BITS)
    }

    /// `2^frac_bits`, exact.
    pub fn scale(self) -> f64 {
        (1u64 << self.effective_bits()) as f64
    }
}

/// Outcome of rounding a parameter vector onto a scheme's grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantReport {
    pub quantized: ParamVector,
    /// Absolute rounding error per component, in flat parameter order.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Worst-case rounding error `2^-(f+1)`; always at least `max_error`.
    pub delta_bound: f64,
}

/// Rounds every component of `p0` to the scheme's grid.
pub fn quantize(p0: &ParamVector, scheme: QuantScheme) -> QuantReport {
    let scale = scheme.scale();
    let quantized: Vec<f64> = p0
        .values
        .iter()
        .map(|&v| (v * scale).round_ties_even() / scale)
        .collect();
    let errors: Vec<f64> = quantized
        .iter()
        .zip(&p0.values)
        .map(|(&q, &v)| (q - v).abs())
        .collect();
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    QuantReport {
        quantized: ParamVector { values: quantized },
        errors,
        max_error,
        delta_bound: derive_delta(scheme),
    }
}

/// The perturbation radius induced by a scheme: half a grid step,
/// `2^-(f+1)`.
pub fn derive_delta(scheme: QuantScheme) -> f64 {
    1.0 / (1u64 << (scheme.effective_bits() + 1)) as f64
}

/// Both verdicts of [`verify_quantized`]: the box certificate covering
/// every rounding outcome at the scheme's radius, and the degenerate query
/// at the one vector the scheme actually produces. The box is
/// conservative, so `box Unsat` forces `point Unsat`, but a failed box
/// query can coexist with a clean point.
#[derive(Debug, Clone)]
pub struct QuantVerification {
    pub scheme: QuantScheme,
    pub delta: f64,
    pub report: QuantReport,
    pub box_verdict: Verdict,
    pub box_stats: SolveStats,
    pub point_verdict: Verdict,
    pub point_stats: SolveStats,
}

/// Runs `template` (its `delta` is ignored) once with the scheme's induced
/// radius around the reference parameters and once at exactly the
/// quantized vector. The reference output inside the formulas stays at the
/// unquantized parameters in both runs.
pub fn verify_quantized(
    template: &RobustnessQuery,
    scheme: QuantScheme,
    cfg: &SolverConfig,
) -> Result<QuantVerification> {
    let delta = derive_delta(scheme);
    let mut q = template.clone();
    q.delta = delta;
    let report = quantize(&q.p0, scheme);
    let (box_verdict, box_stats) = decide(&encode(&q)?, cfg)?;
    let point_box = IntervalBox::new(
        report
            .quantized
            .values
            .iter()
            .map(|&v| Interval::point(v))
            .collect(),
    );
    let (point_verdict, point_stats) = decide(&encode_with_param_box(&q, &point_box)?, cfg)?;
    Ok(QuantVerification {
        scheme,
        delta,
        report,
        box_verdict,
        box_stats,
        point_verdict,
        point_stats,
    })
}

/// A property to preserve across quantization, over a fixed input domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessTarget {
    /// The confidence deviation from the reference network stays at or
    /// below this everywhere in the domain.
    MaxDeviation(f64),
    /// No input whose confidence margin is at least this wide changes
    /// label.
    MinMargin(f64),
}

/// The decision query asserting a violation of `target` at radius `delta`.
pub fn target_query(
    net: &Network,
    domain: &IntervalBox,
    target: RobustnessTarget,
    delta: f64,
) -> RobustnessQuery {
    let mut q = match target {
        RobustnessTarget::MaxDeviation(eps) => {
            let mut q = RobustnessQuery::new(QueryKind::GlobalEps, net.clone(), delta);
            q.epsilon = Some(eps);
            q
        }
        RobustnessTarget::MinMargin(sigma) => {
            let mut q = RobustnessQuery::new(QueryKind::SigmaFlip, net.clone(), delta);
            q.sigma = Some(sigma);
            q
        }
    };
    q.domain = Some(domain.clone());
    q
}

/// Smallest number of fractional bits whose box query proves `target`, or
/// `None` when even 52 bits cannot be certified. Shrinking the radius can
/// only shrink the feasible set, so verification is monotone in `f` and a
/// binary search suffices.
pub fn safe_bits_search(
    net: &Network,
    domain: &IntervalBox,
    target: RobustnessTarget,
    cfg: &SolverConfig,
) -> Result<Option<u32>> {
    let verified = |f: u32| -> Result<bool> {
        let delta = derive_delta(QuantScheme::new(f));
        let q = target_query(net, domain, target, delta);
        let (v, _) = decide(&encode(&q)?, cfg)?;
        Ok(v.is_unsat())
    };
    if !verified(MAX_FRAC_BITS)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u32, MAX_FRAC_BITS);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if verified(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(hi))
}

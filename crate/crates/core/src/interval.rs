//! Closed-interval arithmetic with outward rounding.
//!
//! Every operation returns an interval that contains the exact real-number
//! image of its inputs. Addition and multiplication recover the rounding
//! error of the native operation (2Sum, and an fma residual) and widen an
//! endpoint by one ulp only when it rounded toward the inside, so exact
//! arithmetic stays exact: `[0,1] - 1` is `[-1, 0]`, not `[-1-u, 0+u]`.
//! Division and exp get an unconditional one-ulp widening, sigmoid, tanh
//! and their inverses two ulps, which is enough margin on any faithful
//! libm. Infinite endpoints are allowed in intermediate results; NaN is
//! never stored.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A nonempty closed interval `[lo, hi]`. Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    x.next_down()
}

#[inline]
fn up(x: f64) -> f64 {
    x.next_up()
}

#[inline]
fn down2(x: f64) -> f64 {
    x.next_down().next_down()
}

#[inline]
fn up2(x: f64) -> f64 {
    x.next_up().next_up()
}

/// Below this magnitude a product's rounding error may not be representable
/// (gradual underflow), so the fma residual trick cannot certify exactness.
const UNDERFLOW_GUARD: f64 = 1e-290;

/// 2Sum error term: for finite `a`, `b`, `s = a + b`, the rounding error
/// `a + b - s` is exactly representable and this computes it. Overflow in
/// the intermediates surfaces as NaN, which callers treat as "widen".
#[inline]
fn add_err(a: f64, b: f64, s: f64) -> f64 {
    let a1 = s - b;
    let b1 = s - a1;
    (a - a1) + (b - b1)
}

#[inline]
fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        // +inf: exact or overflowed past MAX, either way MAX is a valid
        // lower bound. NaN (opposing infinities) has no finite witness.
        return if s == f64::INFINITY { f64::MAX } else { f64::NEG_INFINITY };
    }
    let e = add_err(a, b, s);
    if e >= 0.0 { s } else { s.next_down() }
}

#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return if s == f64::NEG_INFINITY { f64::MIN } else { f64::INFINITY };
    }
    let e = add_err(a, b, s);
    if e <= 0.0 { s } else { s.next_up() }
}

/// Corner products treat the indeterminate `0 * inf` as 0, which is sound
/// here: the zero factor is always an attained endpoint, so 0 is a genuine
/// product of the two sets.
#[inline]
fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_nan() {
        return 0.0;
    }
    if !p.is_finite() {
        return if p == f64::INFINITY { f64::MAX } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < UNDERFLOW_GUARD {
        return p.next_down();
    }
    // p + e = a * b exactly; e < 0 means p overshot the true product
    let e = a.mul_add(b, -p);
    if e >= 0.0 { p } else { p.next_down() }
}

#[inline]
fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_nan() {
        return 0.0;
    }
    if !p.is_finite() {
        return if p == f64::NEG_INFINITY { f64::MIN } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < UNDERFLOW_GUARD {
        return p.next_up();
    }
    let e = a.mul_add(b, -p);
    if e <= 0.0 { p } else { p.next_up() }
}

#[inline]
fn div_corner(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_nan() {
        0.0
    } else {
        q
    }
}

pub(crate) fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Inverse sigmoid. Returns +-inf at the saturated ends.
fn logit(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        (p / (1.0 - p)).ln()
    }
}

fn atanh_scalar(t: f64) -> f64 {
    if t <= -1.0 {
        f64::NEG_INFINITY
    } else if t >= 1.0 {
        f64::INFINITY
    } else {
        0.5 * ((1.0 + t) / (1.0 - t)).ln()
    }
}

impl Interval {
    pub const ALL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Builds `[lo, hi]`, rejecting NaN and inverted endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Interval> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Like `new` but for endpoints known to be ordered.
    #[inline]
    pub(crate) fn raw(lo: f64, hi: f64) -> Interval {
        debug_assert!(!(lo.is_nan() || hi.is_nan() || lo > hi), "bad interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    #[inline]
    pub fn point(v: f64) -> Interval {
        debug_assert!(!v.is_nan());
        Interval { lo: v, hi: v }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    #[inline]
    pub fn width(&self) -> f64 {
        // inf - inf would be NaN; a degenerate infinite interval has width 0
        if self.lo == self.hi {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    /// Midpoint of a finite interval, computed without overflow.
    pub fn midpoint(&self) -> f64 {
        debug_assert!(self.is_finite());
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::raw(add_down(self.lo, o.lo), add_up(self.hi, o.hi))
    }

    pub fn neg(self) -> Interval {
        Interval::raw(-self.hi, -self.lo)
    }

    pub fn sub(self, o: Interval) -> Interval {
        self.add(o.neg())
    }

    pub fn mul(self, o: Interval) -> Interval {
        // {0} * S = {0} even for unbounded S
        if self.lo == 0.0 && self.hi == 0.0 {
            return Interval::point(0.0);
        }
        if o.lo == 0.0 && o.hi == 0.0 {
            return Interval::point(0.0);
        }
        let lo = mul_down(self.lo, o.lo)
            .min(mul_down(self.lo, o.hi))
            .min(mul_down(self.hi, o.lo))
            .min(mul_down(self.hi, o.hi));
        let hi = mul_up(self.lo, o.lo)
            .max(mul_up(self.lo, o.hi))
            .max(mul_up(self.hi, o.lo))
            .max(mul_up(self.hi, o.hi));
        Interval::raw(lo, hi)
    }

    /// Division by an interval not containing zero. For denominators that
    /// straddle zero see [`div_extended`].
    pub fn div(self, o: Interval) -> Interval {
        debug_assert!(o.lo > 0.0 || o.hi < 0.0);
        let c = [
            div_corner(self.lo, o.lo),
            div_corner(self.lo, o.hi),
            div_corner(self.hi, o.lo),
            div_corner(self.hi, o.hi),
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::raw(down(lo), up(hi))
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval::raw(0.0, self.hi.max(-self.lo))
        }
    }

    pub fn max(self, o: Interval) -> Interval {
        Interval::raw(self.lo.max(o.lo), self.hi.max(o.hi))
    }

    pub fn exp(self) -> Interval {
        let lo = down(self.lo.exp()).max(0.0);
        let hi = if self.hi == f64::INFINITY {
            f64::INFINITY
        } else {
            up(self.hi.exp())
        };
        Interval::raw(lo, hi)
    }

    /// Preimage of `self` under exp, outward rounded. `None` if the image
    /// requirement is unsatisfiable (entirely at or below zero).
    pub fn ln_preimage(self) -> Option<Interval> {
        if self.hi <= 0.0 {
            return None;
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            down2(self.lo.ln())
        };
        let hi = if self.hi == f64::INFINITY {
            f64::INFINITY
        } else {
            up2(self.hi.ln())
        };
        Some(Interval::raw(lo, hi))
    }

    pub fn sigmoid(self) -> Interval {
        let lo = down2(sigmoid_scalar(self.lo)).max(0.0);
        let hi = up2(sigmoid_scalar(self.hi)).min(1.0);
        Interval::raw(lo, hi)
    }

    /// Preimage of `self` under the sigmoid; `None` if it misses `(0, 1)`.
    pub fn sigmoid_preimage(self) -> Option<Interval> {
        if self.hi <= 0.0 || self.lo >= 1.0 {
            return None;
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            down2(logit(self.lo))
        };
        let hi = if self.hi >= 1.0 {
            f64::INFINITY
        } else {
            up2(logit(self.hi))
        };
        Some(Interval::raw(lo, hi))
    }

    pub fn tanh(self) -> Interval {
        let lo = down2(self.lo.tanh()).max(-1.0);
        let hi = up2(self.hi.tanh()).min(1.0);
        Interval::raw(lo, hi)
    }

    /// Preimage of `self` under tanh; `None` if it misses `(-1, 1)`.
    pub fn tanh_preimage(self) -> Option<Interval> {
        if self.hi <= -1.0 || self.lo >= 1.0 {
            return None;
        }
        let lo = if self.lo <= -1.0 {
            f64::NEG_INFINITY
        } else {
            down2(atanh_scalar(self.lo))
        };
        let hi = if self.hi >= 1.0 {
            f64::INFINITY
        } else {
            up2(atanh_scalar(self.hi))
        };
        Some(Interval::raw(lo, hi))
    }

    pub fn relu(self) -> Interval {
        self.max(Interval::point(0.0))
    }
}

/// Generalized division used by backward propagation of products.
///
/// Returns up to two intervals whose union contains every `x` with
/// `x * d = n` for some `n in num`, `d in den`. `(None, None)` means no
/// such `x` exists.
pub fn div_extended(num: Interval, den: Interval) -> (Option<Interval>, Option<Interval>) {
    if den.lo > 0.0 || den.hi < 0.0 {
        return (Some(num.div(den)), None);
    }
    // den contains zero
    if num.lo <= 0.0 && num.hi >= 0.0 {
        // x * 0 = 0 solves the equation for any x
        return (Some(Interval::ALL), None);
    }
    if den.lo == 0.0 && den.hi == 0.0 {
        // x * 0 != 0 is impossible
        return (None, None);
    }
    let mut neg_part = None;
    let mut pos_part = None;
    if num.lo > 0.0 {
        if den.lo < 0.0 {
            neg_part = Some(Interval::raw(f64::NEG_INFINITY, up(num.lo / den.lo)));
        }
        if den.hi > 0.0 {
            pos_part = Some(Interval::raw(down(num.lo / den.hi), f64::INFINITY));
        }
    } else {
        // num.hi < 0.0
        if den.hi > 0.0 {
            neg_part = Some(Interval::raw(f64::NEG_INFINITY, up(num.hi / den.hi)));
        }
        if den.lo < 0.0 {
            pos_part = Some(Interval::raw(down(num.hi / den.lo), f64::INFINITY));
        }
    }
    (neg_part, pos_part)
}

/// An axis-aligned box: one interval per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> IntervalBox {
        IntervalBox { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn get(&self, i: usize) -> Interval {
        self.dims[i]
    }

    pub fn set(&mut self, i: usize, iv: Interval) {
        self.dims[i] = iv;
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn contains_point(&self, pt: &[f64]) -> bool {
        pt.len() == self.dims.len() && self.dims.iter().zip(pt).all(|(iv, &x)| iv.contains(x))
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::midpoint).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn intersect(&self, other: &IntervalBox) -> Option<IntervalBox> {
        debug_assert_eq!(self.len(), other.len());
        let mut dims = Vec::with_capacity(self.len());
        for (a, b) in self.dims.iter().zip(&other.dims) {
            dims.push(a.intersect(b)?);
        }
        Some(IntervalBox { dims })
    }

    /// Index of the widest dimension after scaling each width by the
    /// corresponding reference width (typically the initial domain).
    pub fn widest_scaled(&self, reference: &[f64]) -> Option<usize> {
        let mut best = None;
        let mut best_w = 0.0;
        for (i, iv) in self.dims.iter().enumerate() {
            let w = iv.width();
            if w <= 0.0 || !splittable(iv) {
                continue;
            }
            let scale = reference.get(i).copied().filter(|&r| r > 0.0).unwrap_or(1.0);
            let sw = w / scale;
            if best.is_none() || sw > best_w {
                best = Some(i);
                best_w = sw;
            }
        }
        best
    }

    /// Bisects dimension `dim` at its midpoint.
    pub fn split(&self, dim: usize) -> (IntervalBox, IntervalBox) {
        let iv = self.dims[dim];
        let m = iv.midpoint();
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[dim] = Interval::raw(iv.lo, m);
        right.dims[dim] = Interval::raw(m, iv.hi);
        (left, right)
    }

    /// Uniform sample; requires finite dims.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.dims
            .iter()
            .map(|iv| {
                if iv.lo == iv.hi {
                    iv.lo
                } else {
                    rng.random_range(iv.lo..=iv.hi)
                }
            })
            .collect()
    }
}

/// A dimension stops being splittable once its midpoint no longer separates
/// the endpoints, i.e. at the resolution floor of f64.
fn splittable(iv: &Interval) -> bool {
    if !iv.is_finite() {
        return true;
    }
    let m = iv.midpoint();
    m > iv.lo && m < iv.hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn new_rejects_inverted_and_nan() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
        assert!(Interval::new(-1.0, 1.0).is_ok());
    }

    #[test]
    fn add_encloses_endpoint_sums() {
        let a = iv(0.1, 0.2);
        let b = iv(0.3, 0.4);
        let s = a.add(b);
        assert!(s.lo <= 0.1 + 0.3 && 0.2 + 0.4 <= s.hi);
        assert!(s.lo < s.hi);
    }

    #[test]
    fn mul_sign_cases() {
        let cases = [
            (iv(2.0, 3.0), iv(4.0, 5.0), 8.0, 15.0),
            (iv(-3.0, -2.0), iv(4.0, 5.0), -15.0, -8.0),
            (iv(-2.0, 3.0), iv(-5.0, 4.0), -15.0, 12.0),
            (iv(-2.0, 3.0), iv(0.0, 0.0), 0.0, 0.0),
        ];
        for (a, b, lo, hi) in cases {
            let p = a.mul(b);
            assert!(p.lo <= lo && hi <= p.hi, "{a:?} * {b:?} = {p:?}");
            assert!(p.lo >= lo - 1e-12 && p.hi <= hi + 1e-12);
        }
    }

    #[test]
    fn zero_times_unbounded_is_zero() {
        let z = Interval::point(0.0);
        let u = Interval::ALL;
        assert_eq!(z.mul(u), Interval::point(0.0));
        assert_eq!(u.mul(z), Interval::point(0.0));
    }

    #[test]
    fn mul_with_infinite_endpoint() {
        let a = iv(-1.0, 1.0);
        let b = Interval::raw(0.0, f64::INFINITY);
        let p = a.mul(b);
        assert_eq!(p.lo, f64::NEG_INFINITY);
        assert_eq!(p.hi, f64::INFINITY);

        let c = iv(0.0, 1.0);
        let q = c.mul(Interval::raw(2.0, f64::INFINITY));
        assert!(q.lo <= 0.0 && q.hi == f64::INFINITY);
    }

    #[test]
    fn exp_is_positive_and_monotone() {
        let e = iv(-2.0, 1.5).exp();
        assert!(e.lo >= 0.0);
        assert!(e.lo <= (-2.0f64).exp() && 1.5f64.exp() <= e.hi);
        let whole = Interval::ALL.exp();
        assert_eq!(whole.lo, 0.0);
        assert_eq!(whole.hi, f64::INFINITY);
    }

    #[test]
    fn sigmoid_stays_in_unit_interval() {
        let s = iv(-800.0, 800.0).sigmoid();
        assert!(s.lo >= 0.0 && s.hi <= 1.0);
        let t = iv(0.0, 0.0).sigmoid();
        assert!(t.contains(0.5));
    }

    #[test]
    fn preimages_invert_forward_images() {
        let x = iv(-0.7, 1.3);
        let fwd = x.sigmoid();
        let back = fwd.sigmoid_preimage().unwrap();
        assert!(back.lo <= -0.7 && 1.3 <= back.hi);

        let fwd = x.tanh();
        let back = fwd.tanh_preimage().unwrap();
        assert!(back.lo <= -0.7 && 1.3 <= back.hi);

        let fwd = x.exp();
        let back = fwd.ln_preimage().unwrap();
        assert!(back.lo <= -0.7 && 1.3 <= back.hi);
    }

    #[test]
    fn preimage_rejects_unreachable_requirements() {
        assert!(iv(-2.0, -1.0).sigmoid_preimage().is_none());
        assert!(iv(1.0, 2.0).sigmoid_preimage().is_none());
        assert!(iv(-3.0, -1.5).tanh_preimage().is_none());
        assert!(iv(-2.0, 0.0).ln_preimage().is_none());
    }

    #[test]
    fn div_extended_splits_around_zero() {
        // 6 / [-2, 3] = (-inf, -3] u [2, inf)
        let (a, b) = div_extended(Interval::point(6.0), iv(-2.0, 3.0));
        let a = a.unwrap();
        let b = b.unwrap();
        assert!(a.hi >= -3.0 && a.hi < -2.999);
        assert!(b.lo <= 2.0 && b.lo > 1.999);

        // 0 in num: no information
        let (a, b) = div_extended(iv(-1.0, 1.0), iv(-2.0, 3.0));
        assert_eq!(a, Some(Interval::ALL));
        assert!(b.is_none());

        // nonzero / {0}: contradiction
        let (a, b) = div_extended(Interval::point(5.0), Interval::point(0.0));
        assert!(a.is_none() && b.is_none());
    }

    #[test]
    fn abs_and_max_cases() {
        assert_eq!(iv(-3.0, 2.0).abs(), iv(0.0, 3.0));
        assert_eq!(iv(1.0, 2.0).abs(), iv(1.0, 2.0));
        assert_eq!(iv(-2.0, -1.0).abs(), iv(1.0, 2.0));
        assert_eq!(iv(0.0, 1.0).max(iv(-1.0, 2.0)), iv(0.0, 2.0));
        assert_eq!(iv(-5.0, -3.0).relu(), iv(0.0, 0.0));
    }

    #[test]
    fn box_split_covers_parent() {
        let b = IntervalBox::new(vec![iv(0.0, 1.0), iv(-2.0, 2.0)]);
        let (l, r) = b.split(1);
        assert_eq!(l.get(1).hi, r.get(1).lo);
        assert_eq!(l.get(1).lo, -2.0);
        assert_eq!(r.get(1).hi, 2.0);
        assert_eq!(l.get(0), b.get(0));
    }

    #[test]
    fn widest_scaled_respects_reference() {
        let b = IntervalBox::new(vec![iv(0.0, 0.5), iv(0.0, 0.2)]);
        // unscaled: dim 0 is wider
        assert_eq!(b.widest_scaled(&[1.0, 1.0]), Some(0));
        // relative to initial widths, dim 1 has shrunk less
        assert_eq!(b.widest_scaled(&[10.0, 0.2]), Some(1));
    }

    #[test]
    fn midpoint_avoids_overflow() {
        let b = iv(-1.6e308, 1.7e308);
        let m = b.midpoint();
        assert!(m.is_finite() && b.contains(m));
    }
}

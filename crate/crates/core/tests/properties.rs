//! Randomized invariants: interval enclosures contain pointwise results,
//! inclusion is monotone, the expression compiler agrees with the direct
//! forward pass, and quantization respects its error bound.

use proptest::prelude::*;
use veriquant::expr::{const_slots, network_to_expr, var_slots, Expr};
use veriquant::nn::perturb_box;
use veriquant::{
    quantize, Activation, Interval, IntervalBox, Layer, Network, ParamVector, QuantScheme,
};

fn iv(lo: f64, width: f64) -> Interval {
    Interval::new(lo, lo + width).unwrap()
}

/// A point inside the interval, parameterized by t in [0, 1].
fn inside(i: Interval, t: f64) -> f64 {
    (i.lo + t * (i.hi - i.lo)).clamp(i.lo, i.hi)
}

fn subset(inner: Interval, outer: Interval) -> bool {
    outer.lo <= inner.lo && inner.hi <= outer.hi
}

prop_compose! {
    fn arb_interval(span: f64)
        (lo in -span..span, w in 0.0..span) -> Interval { iv(lo, w) }
}

proptest! {
    #[test]
    fn binary_ops_enclose_pointwise_results(
        a in arb_interval(1e3), b in arb_interval(1e3),
        ta in 0.0..=1.0f64, tb in 0.0..=1.0f64,
    ) {
        let (x, y) = (inside(a, ta), inside(b, tb));
        prop_assert!(a.add(b).contains(x + y));
        prop_assert!(a.sub(b).contains(x - y));
        prop_assert!(a.mul(b).contains(x * y));
        prop_assert!(a.max(b).contains(x.max(y)));
    }

    #[test]
    fn division_encloses_when_denominator_avoids_zero(
        a in arb_interval(1e3),
        dlo in 0.5..50.0f64, dw in 0.0..50.0f64, flip in any::<bool>(),
        ta in 0.0..=1.0f64, td in 0.0..=1.0f64,
    ) {
        let d = if flip { iv(dlo, dw).neg() } else { iv(dlo, dw) };
        let (x, y) = (inside(a, ta), inside(d, td));
        prop_assert!(a.div(d).contains(x / y));
    }

    #[test]
    fn unary_ops_enclose_pointwise_results(a in arb_interval(30.0), t in 0.0..=1.0f64) {
        let x = inside(a, t);
        prop_assert!(a.neg().contains(-x));
        prop_assert!(a.abs().contains(x.abs()));
        prop_assert!(a.exp().contains(x.exp()));
        prop_assert!(a.relu().contains(Activation::Relu.apply(x)));
        prop_assert!(a.sigmoid().contains(Activation::Sigmoid.apply(x)));
        prop_assert!(a.tanh().contains(Activation::Tanh.apply(x)));
    }

    #[test]
    fn exact_integer_arithmetic_stays_exact(
        i in -1_000_000i64..1_000_000, j in -1_000_000i64..1_000_000,
    ) {
        // directed rounding must not widen results that are exact in f64
        let a = Interval::point(i as f64);
        let b = Interval::point(j as f64);
        let s = a.add(b);
        prop_assert_eq!((s.lo, s.hi), ((i + j) as f64, (i + j) as f64));
        let d = a.sub(b);
        prop_assert_eq!((d.lo, d.hi), ((i - j) as f64, (i - j) as f64));
        let (i, j) = (i % 30_000, j % 30_000);
        let p = Interval::point(i as f64).mul(Interval::point(j as f64));
        prop_assert_eq!((p.lo, p.hi), ((i * j) as f64, (i * j) as f64));
    }

    #[test]
    fn inclusion_is_monotone(
        a in arb_interval(100.0), b in arb_interval(100.0),
        grow_lo in 0.0..10.0f64, grow_hi in 0.0..10.0f64,
    ) {
        let a_wide = Interval::new(a.lo - grow_lo, a.hi + grow_hi).unwrap();
        prop_assert!(subset(a.add(b), a_wide.add(b)));
        prop_assert!(subset(a.sub(b), a_wide.sub(b)));
        prop_assert!(subset(a.mul(b), a_wide.mul(b)));
        prop_assert!(subset(a.max(b), a_wide.max(b)));
        prop_assert!(subset(a.abs(), a_wide.abs()));
        prop_assert!(subset(a.sigmoid(), a_wide.sigmoid()));
        prop_assert!(subset(a.tanh(), a_wide.tanh()));
        prop_assert!(subset(a.relu(), a_wide.relu()));
    }
}

fn arb_net() -> impl Strategy<Value = Network> {
    (1usize..=2, 1usize..=3, 0usize..4).prop_flat_map(|(d, h, a)| {
        let act = [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
        ][a];
        (
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), h),
            prop::collection::vec(-1.0..1.0f64, h),
            prop::collection::vec(-2.0..2.0f64, h),
            -1.0..1.0f64,
        )
            .prop_map(move |(w1, b1, w2, b2)| Network {
                input_dim: d,
                level: 0.5,
                layers: vec![
                    Layer::dense(w1, b1, act),
                    Layer::dense(vec![w2], vec![b2], Activation::Sigmoid),
                ],
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compiled_expression_matches_forward(
        net in arb_net(),
        xt in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        net.validate().unwrap();
        let x = &xt[..net.input_dim];
        let p0 = net.flatten();
        let expr = network_to_expr(&net, &const_slots(&p0.values), &var_slots(0, net.input_dim)).unwrap();
        let via_expr = expr.eval(x).unwrap();
        let direct = net.forward(x).unwrap();
        prop_assert!((via_expr - direct).abs() <= 1e-12, "{via_expr} vs {direct}");
    }

    #[test]
    fn interval_forward_encloses_sampled_points(
        net in arb_net(),
        xt in prop::collection::vec(0.0..=1.0f64, 2),
        pt in prop::collection::vec(0.0..=1.0f64, 16),
        delta in 0.0..0.3f64,
    ) {
        let p0 = net.flatten();
        let pbox = perturb_box(&p0, delta).unwrap();
        let xbox = IntervalBox::new(
            (0..net.input_dim).map(|_| Interval::new(-2.0, 2.0).unwrap()).collect(),
        );
        let out = net.interval_forward(&pbox, &xbox).unwrap();
        let x: Vec<f64> = (0..net.input_dim).map(|i| inside(xbox.get(i), xt[i])).collect();
        let p: Vec<f64> = (0..p0.len()).map(|i| inside(pbox.get(i), pt[i])).collect();
        prop_assert!(out.contains(net.forward_with(&p, &x).unwrap()));

        // the compiled expression's interval pass agrees on containment
        let expr = network_to_expr(&net, &const_slots(&p), &var_slots(0, net.input_dim)).unwrap();
        let hull = expr.eval_interval(&xbox).unwrap();
        prop_assert!(hull.contains(expr.eval(&x).unwrap()));
    }

    #[test]
    fn flatten_unflatten_round_trips(net in arb_net(), shift in -0.25..0.25f64) {
        let mut v = net.flatten();
        for c in &mut v.values { *c += shift; }
        let rebuilt = net.unflatten(&v).unwrap();
        prop_assert_eq!(rebuilt.flatten().values, v.values);
        prop_assert_eq!(rebuilt.input_dim, net.input_dim);
    }

    #[test]
    fn quantization_error_is_bounded_and_idempotent(
        p in prop::collection::vec(-8.0..8.0f64, 1..6),
        f in 0u32..16,
    ) {
        let scheme = QuantScheme::new(f);
        let pv = ParamVector { values: p.clone() };
        let r = quantize(&pv, scheme);
        let bound = veriquant::derive_delta(scheme);
        for (q, orig) in r.quantized.values.iter().zip(&p) {
            prop_assert!((q - orig).abs() <= bound + 1e-15);
            let k = q * scheme.scale();
            prop_assert_eq!(k, k.round(), "off-grid value {}", q);
        }
        let again = quantize(&r.quantized, scheme);
        prop_assert_eq!(&again.quantized.values, &r.quantized.values);
        prop_assert_eq!(again.max_error, 0.0);
    }

    #[test]
    fn expression_interval_soundness_on_composites(
        a in arb_interval(4.0), b in arb_interval(4.0),
        ta in 0.0..=1.0f64, tb in 0.0..=1.0f64,
    ) {
        // sigmoid(x*y - tanh(x)) + |y| exercises every operator once
        let e = Expr::add(
            Expr::sigmoid(Expr::sub(
                Expr::mul(Expr::var(0), Expr::var(1)),
                Expr::tanh(Expr::var(0)),
            )),
            Expr::abs(Expr::var(1)),
        );
        let bx = IntervalBox::new(vec![a, b]);
        let hull = e.eval_interval(&bx).unwrap();
        let pt = [inside(a, ta), inside(b, tb)];
        prop_assert!(hull.contains(e.eval(&pt).unwrap()));
    }
}

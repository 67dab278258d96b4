use gaussmin::interval::*;
use gaussmin::quad::integrate;
use num::{BigRational, Signed, Zero};
use proptest::prelude::*;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// The exact image of the operation must lie inside the computed enclosure.
fn encloses(out: Interval, values: &[BigRational]) -> bool {
    let (lo, hi) = (exact(out.lo()), exact(out.hi()));
    values.iter().all(|v| &lo <= v && v <= &hi)
}

fn endpoints(a: Interval) -> [BigRational; 2] {
    [exact(a.lo()), exact(a.hi())]
}

fn pairwise(a: Interval, b: Interval, op: impl Fn(&BigRational, &BigRational) -> BigRational) -> Vec<BigRational> {
    let (ea, eb) = (endpoints(a), endpoints(b));
    ea.iter().flat_map(|x| eb.iter().map(|y| op(x, y)).collect::<Vec<_>>()).collect()
}

fn float() -> impl Strategy<Value = f64> {
    (any::<bool>(), 1.0f64..2.0, -30i32..30).prop_map(|(neg, m, e)| {
        let v = m * 2f64.powi(e);
        if neg {
            -v
        } else {
            v
        }
    })
}

fn interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        (float(), float()).prop_map(|(a, b)| Interval::new(a.min(b), a.max(b)).unwrap()),
        float().prop_map(Interval::point),
        (float(), 0.0f64..1e-6).prop_map(|(a, w)| Interval::new(a, a + w * a.abs()).unwrap()),
    ]
}

fn nonnegative() -> impl Strategy<Value = Interval> {
    interval().prop_map(|a| Interval::new(a.lo().abs().min(a.hi().abs()), a.lo().abs().max(a.hi().abs())).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn operations_enclose_exact_results(op in 0u8..6, a in interval(), b in interval(), c in nonnegative(), m in 1u32..8) {
        match op {
            0 => prop_assert!(encloses(ivl_add(a, b), &pairwise(a, b, |x, y| x + y))),
            1 => prop_assert!(encloses(ivl_sub(a, b), &pairwise(a, b, |x, y| x - y))),
            2 => prop_assert!(encloses(ivl_mul(a, b), &pairwise(a, b, |x, y| x * y))),
            3 => {
                if b.contains_zero() {
                    prop_assert!(ivl_div(a, b).is_err());
                } else {
                    prop_assert!(encloses(ivl_div(a, b).unwrap(), &pairwise(a, b, |x, y| x / y)));
                }
            }
            4 => {
                let r = ivl_sqrt(c).unwrap();
                let (lo, hi) = (exact(r.lo()), exact(r.hi()));
                for x in endpoints(c) {
                    prop_assert!(lo.is_negative() || &lo * &lo <= x);
                    prop_assert!(&hi * &hi >= x);
                }
            }
            _ => {
                let mut values: Vec<BigRational> = endpoints(a).iter().map(|x| num::pow(x.clone(), m as usize)).collect();
                if a.contains_zero() {
                    values.push(BigRational::zero());
                }
                prop_assert!(encloses(ivl_powi(a, m), &values));
            }
        }
    }
}

#[test]
fn constants_enclose_high_precision_values() {
    let pi = exact(3.0) + BigRational::new(141_592_653_589_793_238_462_643u128.into(), 10u128.pow(24).into());
    let p = ivl_pi();
    // The decimal above is below π by less than 1e-24; both bounds sit far outside that.
    assert!(exact(p.lo()) < pi && exact(p.hi()) > pi + BigRational::new(1.into(), 10u128.pow(24).into()));
    let r = ivl_sqrt2();
    let two = exact(2.0);
    assert!(exact(r.lo()) * exact(r.lo()) <= two && exact(r.hi()) * exact(r.hi()) >= two);
}

#[test]
fn refinement_nests() {
    let ks = [25usize, 50, 100, 200, 400];
    let enclosures: Vec<Interval> = ks.iter().map(|&k| simplex_p2_enclosure(k).unwrap()).collect();
    for w in enclosures.windows(2) {
        assert!(w[1].is_subset_of(&w[0]), "{} not inside {}", w[1], w[0]);
    }
}

#[test]
fn midpoint_agrees_with_float_quadrature() {
    let f = |s: f64, t: f64| {
        let base = 1.0 + s * s + s * s * t * t;
        s * (1.0 - s - s * t).powi(2) / base.powf(2.5)
    };
    let outer = integrate(|s| integrate(|t| f(s, t), 0.0, 1.0, 1e-14, 100_000).value, 0.0, 1.0, 1e-13, 100_000);
    let value = 12.0 / std::f64::consts::PI * outer.value;
    let enclosure = simplex_p2_enclosure(400).unwrap();
    assert!(enclosure.contains(value));
    assert!((enclosure.midpoint() - value).abs() <= enclosure.width());
}

#[test]
fn verdict_is_the_strict_endpoint_comparison() {
    for k in [1usize, 2, 3, 5, 8, 50, 400] {
        let cert = verify_counterexample(k).unwrap();
        assert_eq!(cert.verdict, cert.cosine_bound.hi() < cert.simplex_bound.lo(), "k = {k}");
        assert!(cert.is_consistent());
    }
}

#[test]
fn fifty_box_certificate_regression() {
    let cert = verify_counterexample(50).unwrap();
    assert!(cert.verdict);
    assert!((cert.simplex_bound.lo() - 0.12255277325353356).abs() < 1e-13);
    assert!((cert.simplex_bound.hi() - 0.16383085076849466).abs() < 1e-13);
}

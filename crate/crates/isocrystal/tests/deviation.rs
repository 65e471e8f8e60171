use isocrystal::deviation::*;
use proptest::prelude::*;

fn t(v: &[i64]) -> ExponentTuple {
    ExponentTuple::new(v.to_vec()).unwrap()
}

/// Largest |window sum| over cyclic windows whose every suffix sum has the
/// given sign, found by listing each window explicitly.
fn brute_one_sided(v: &[i64], nonneg: bool) -> u64 {
    let l = v.len();
    let mut best = 0u64;
    for start in 0..l {
        for len in 1..=l {
            let window: Vec<i64> = (0..len).map(|k| v[(start + k) % l]).collect();
            let suffixes_ok = (0..len).all(|from| {
                let s: i64 = window[from..].iter().sum();
                if nonneg {
                    s <= 0
                } else {
                    s >= 0
                }
            });
            if suffixes_ok {
                best = best.max(window.iter().sum::<i64>().unsigned_abs());
            }
        }
    }
    best
}

fn brute_s(v: &[i64]) -> u64 {
    match v.iter().sum::<i64>().signum() {
        1 => brute_one_sided(v, true),
        -1 => brute_one_sided(v, false),
        _ => brute_one_sided(v, true).min(brute_one_sided(v, false)),
    }
}

#[test]
fn samples() {
    assert_eq!(deviations(&t(&[-1, 1, -1, -1, 1, 1, 0, -1])), (2, 3));
    assert_eq!(deviations(&t(&[1, 1, -2, 1, 3])), (2, 2));
    assert_eq!(deviations(&t(&[0, 2, 5])), (0, 0));
    assert_eq!(deviations(&t(&[0])), (0, 0));
}

#[test]
fn reductions() {
    let r = df_reduce(&t(&[1, 1, 1, -1]));
    assert_eq!(r.rescale, vec![0, 0, 0, 1]);
    assert_eq!(r.cokernel_length(), 1);
    assert_eq!(df_reduce(&t(&[2, 0, 1])).rescale, vec![0, 0, 0]);
    assert_eq!(df_reduce(&t(&[-1, 1, -1])).max_rescale(), 1);
}

#[test]
fn torsion_of_plus_minus_tuples() {
    assert_eq!(torsion_upper_from_tuple(&t(&[1, 1, 1, 1, -1])), 1);
    assert_eq!(torsion_upper_from_tuple(&t(&[0, 0, 0])), 0);
    for v in [vec![1, 1, -1, -1, -1], vec![1, -1, 1, 1, -1, 1], vec![-1, -1, -1, 1]] {
        let plus = v.iter().filter(|&&x| x > 0).count() as u64;
        let minus = v.len() as u64 - plus;
        assert_eq!(value_deviation(&t(&v)), plus.min(minus), "{v:?}");
    }
}

#[test]
fn parsing() {
    assert_eq!("-1, 2,0".parse::<ExponentTuple>().unwrap(), t(&[-1, 2, 0]));
    assert!("".parse::<ExponentTuple>().is_err());
    assert!("1,a".parse::<ExponentTuple>().is_err());
}

fn tuples() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-3i64..=3, 1..9)
}

proptest! {
    #[test]
    fn matches_brute_force(v in prop::collection::vec(-2i64..=2, 1..8)) {
        prop_assert_eq!(sign_deviation(&t(&v)), brute_s(&v));
    }

    #[test]
    fn chain_of_inequalities(v in tuples()) {
        let (s, w) = deviations(&t(&v));
        let abs: u64 = v.iter().map(|x| x.unsigned_abs()).sum();
        prop_assert!(s <= w && w <= abs);
    }

    #[test]
    fn rotation_invariant(v in tuples(), k in 0usize..8) {
        let a = t(&v);
        prop_assert_eq!(deviations(&a), deviations(&a.rotated(k % v.len())));
    }

    #[test]
    fn reduction_is_uniform_and_bounded(v in tuples()) {
        let a = t(&v);
        let r = df_reduce(&a);
        prop_assert!(r.is_uniform());
        prop_assert!(u64::from(r.max_rescale()) <= sign_deviation(&a));
        let l = v.len();
        for i in 0..l {
            let expect = v[i] + i64::from(r.rescale[i]) - i64::from(r.rescale[(i + 1) % l]);
            prop_assert_eq!(r.tuple[i], expect);
        }
        let mut seen: Vec<usize> = r.cycles.iter().flatten().copied().collect();
        seen.sort();
        prop_assert_eq!(seen, (0..l).collect::<Vec<_>>());
    }
}

use isocrystal::bounds::*;
use isocrystal::crystal::{ordinary, phi_alpha_4_5, supersingular};
use isocrystal::truncation::i_number_certificates;
use isocrystal::witt::make_witt_ring;
use num_bigint::BigUint;

fn big(x: u64) -> BigUint {
    BigUint::from(x)
}

fn d(a: u64, b: u64, c: u64) -> BigUint {
    d_plus_bound(BoundParams::new(a, b, c).unwrap())
}

#[test]
fn small_cases() {
    for (a, c) in [(1, 0), (3, 0), (5, 4)] {
        assert_eq!(d(a, 0, c), d_plus_bound0(a, c));
    }
    assert_eq!(d(1, 5, 7), big(0));
    assert_eq!(d_plus_bound0(2, 1), big(2));
    assert_eq!(d(2, 1, 1), big(3));
    assert!(BoundParams::new(0, 1, 1).is_err());
}

#[test]
fn family_and_truncation_levels() {
    for p in [2, 3, 5] {
        assert_eq!(n_fam_bound(1, 3, 4, p).unwrap(), big(epsilon(p).into()));
        let pdiv = truncation_level_bound(TruncationKind::PDivisible { r: 2, dim: None }, p).unwrap();
        assert_eq!(pdiv, d(4, 1, 2) * 2u32 + epsilon(p));
        let pol = truncation_level_bound(TruncationKind::Polarized { d: 1 }, p).unwrap();
        assert_eq!(pol, d(3, 1, 2) * 2u32 + epsilon(p));
        for dim in [0, 4] {
            let k = TruncationKind::PDivisible { r: 4, dim: Some(dim) };
            assert_eq!(truncation_level_bound(k, p).unwrap(), big(0));
        }
    }
}

#[test]
fn recursion_is_monotone() {
    for a in 1..=6 {
        for c in 0..=4 {
            let v = d_plus_bound0(a, c);
            assert!(d_plus_bound0(a + 1, c) >= v);
            assert!(d_plus_bound0(a, c + 1) >= v);
        }
    }
}

#[test]
fn large_ranks_need_big_integers() {
    let v = d_plus_bound0(25, 2);
    assert!(v > big(u64::MAX));
    assert_eq!(v, d_plus_bound0(25, 2));
}

#[test]
fn bounds_dominate_witnessed_i_numbers() {
    let ring = make_witt_ring(2, 2, 8).unwrap();
    let pdiv = |r, dim| truncation_level_bound(TruncationKind::PDivisible { r, dim: Some(dim) }, 2).unwrap();
    let ord = i_number_certificates(&ordinary(&ring, 2, 1).unwrap())[0].0;
    assert!(pdiv(2, 1) >= big(ord.into()));
    let ss = i_number_certificates(&supersingular(&ring, 1).unwrap())[0].0;
    assert!(pdiv(2, 1) >= big(ss.into()));
    let ring = make_witt_ring(2, 3, 8).unwrap();
    let pa = i_number_certificates(&phi_alpha_4_5(&ring, &ring.one()).unwrap())[0].0;
    assert!(pa <= 3);
    let pol = truncation_level_bound(TruncationKind::Polarized { d: 3 }, 2).unwrap();
    assert!(pol >= big(pa.into()));
    assert!(pdiv(6, 3) >= big(pa.into()));
}

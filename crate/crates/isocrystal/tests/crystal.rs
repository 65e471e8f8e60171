use std::sync::Arc;

use isocrystal::crystal::*;
use isocrystal::deviation::{df_reduce, ExponentTuple};
use isocrystal::io::CrystalFile;
use isocrystal::plinalg::Matrix;
use isocrystal::witt::{make_witt_ring, WittRing};
use isocrystal::Error;
use num_rational::Rational64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(a: i64, b: i64) -> Rational64 {
    Rational64::new(a, b)
}

fn slopes(p: &Polygon) -> Vec<Rational64> {
    p.slopes()
}

#[test]
fn construction_normalizes() {
    let ring = make_witt_ring(2, 1, 4).unwrap();
    let et = FCrystal::new(Matrix::identity(&ring, 2), 0).unwrap();
    assert_eq!(et, etale(&ring, 2).unwrap());
    let c = FCrystal::new(Matrix::identity(&ring, 2).scale_int(2), 1).unwrap();
    assert_eq!(c.shift(), 0);
    assert!(c.matrix().is_identity());
    assert_eq!(c.ring().n(), 3);
    let ss = FCrystal::new(Matrix::from_ints(&ring, 2, 2, &[0, 2, 1, 0]), 0).unwrap();
    assert_eq!(ss, supersingular(&ring, 1).unwrap());
    let z = Matrix::zeros(&ring, 2, 2);
    assert_eq!(FCrystal::new(z, 0).unwrap_err(), Error::SingularAtPrecision);
}

#[test]
fn cyclic_crystals() {
    let ring = make_witt_ring(3, 1, 12).unwrap();
    let c = cyclic_from_exponents(&ring, &[0], None).unwrap();
    assert_eq!(c, etale(&ring, 1).unwrap());
    let half = cyclic_from_exponents(&ring, &[1, 0], None).unwrap();
    assert_eq!(slopes(&half.newton_polygon().unwrap()), vec![q(1, 2); 2]);
    for r in 2..=5 {
        let c = example_2_3_2(&ring, r).unwrap();
        let mut tau = vec![1; r];
        tau[r - 1] = -1;
        assert_eq!(c, cyclic_from_exponents(&ring, &tau, None).unwrap());
        assert_eq!(slopes(&c.newton_polygon().unwrap()), vec![q(r as i64 - 2, r as i64); r]);
    }
}

#[test]
fn hodge_examples() {
    let ring = make_witt_ring(2, 1, 6).unwrap();
    let hd = etale(&ring, 3).unwrap().hodge_data().unwrap();
    assert_eq!((slopes(&hd.hodge), hd.s, hd.h), (vec![q(0, 1); 3], 0, 0));
    let hd = supersingular(&ring, 1).unwrap().hodge_data().unwrap();
    assert_eq!((slopes(&hd.hodge), hd.s, hd.h), (vec![q(0, 1), q(1, 1)], 0, 1));

    let ring = make_witt_ring(2, 1, 12).unwrap();
    for r in 3..=6 {
        let mut tau = vec![1i64; r];
        tau[r - 1] = -1;
        let red = df_reduce(&ExponentTuple::new(tau).unwrap());
        let lattice = cyclic_from_exponents(&ring, &red.tuple, None).unwrap();
        let mut want = vec![q(1, 1); r];
        want[0] = q(0, 1);
        want[1] = q(0, 1);
        assert_eq!(slopes(&lattice.hodge_data().unwrap().hodge), want);
    }
}

#[test]
fn corpus_shapes() {
    let ring = make_witt_ring(3, 1, 7).unwrap();
    let c = isoclinic_3_3_6(&ring, 3, 2).unwrap();
    assert_eq!(c.matrix(), &Matrix::from_ints(&ring, 3, 3, &[0, 0, 3, 1, 0, 0, 0, 1, 0]));
    let pa = phi_alpha_4_5(&ring, &ring.zero()).unwrap();
    let want = Matrix::from_ints(
        &ring,
        6,
        6,
        &[
            0, 0, 3, 0, 0, 0, //
            1, 0, 0, 0, 0, 0, //
            0, 3, 0, 0, 0, 0, //
            0, 0, 0, 0, 0, 3, //
            0, 0, 0, 1, 0, 0, //
            0, 0, 0, 0, 1, 0,
        ],
    );
    assert_eq!(pa.matrix(), &want);
    let n = pa.newton_polygon().unwrap();
    assert_eq!(n.points, vec![(q(1, 3), 3), (q(2, 3), 3)]);
    polarized_4_5_4(&ring, &ring.from_int(2)).unwrap().validate().unwrap();
    assert!(matches!(paper_corpus(&ring, "nope", &[], None), Err(Error::UnknownCorpusName(_))));
}

#[test]
fn newton_gate() {
    let ring = make_witt_ring(2, 2, 12).unwrap();
    let c = phi_alpha_4_5(&ring, &ring.generator()).unwrap();
    assert_eq!(c.newton_precision_needed().unwrap(), 13);
    assert_eq!(
        c.newton_polygon().unwrap_err(),
        Error::PrecisionExhausted { needed: 13, available: 12 }
    );
}

fn corpus(p: u64) -> Vec<FCrystal> {
    let ring = make_witt_ring(p, 1, 17).unwrap();
    vec![
        etale(&ring, 2).unwrap(),
        ordinary(&ring, 3, 1).unwrap(),
        supersingular(&ring, 2).unwrap(),
        isoclinic_3_3_6(&ring, 3, 2).unwrap(),
        example_2_3_2(&ring, 4).unwrap(),
        phi_alpha_4_5(&ring, &ring.one()).unwrap(),
    ]
}

fn random_unit(ring: &Arc<WittRing>, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let m = ring.modulus();
        let g = Matrix::from_fn(ring, r, r, |_, _| (0..ring.q()).map(|_| rng.gen_range(0..m)).collect());
        if g.det().valuation() == Some(0) {
            return g;
        }
    }
}

#[test]
fn newton_above_hodge_and_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [2, 3] {
        for c in corpus(p) {
            let newton = c.newton_polygon().unwrap();
            // The Hodge polygon is that of p^s phi.
            let hd = c.hodge_data().unwrap();
            let shifted = Polygon::from_slopes(
                newton.slopes().iter().map(|x| x + Rational64::from_integer(hd.s.into())).collect(),
            );
            assert!(shifted.lies_above(&hd.hodge), "{c:?}");
            let big = make_witt_ring(p, 2, 17).unwrap();
            assert_eq!(c.embed(&big).unwrap().newton_polygon().unwrap(), newton);
            let h = random_unit(c.ring(), c.rank(), &mut rng);
            let h_inv = isocrystal::plinalg::unit_inverse(&h.sigma()).unwrap();
            let conj = FCrystal::new(h.mul(c.matrix()).mul(&h_inv), c.shift()).unwrap();
            assert_eq!(conj.newton_polygon().unwrap(), newton);
        }
    }
}

#[test]
fn derived_crystals() {
    for c in corpus(2) {
        let hd = c.hodge_data().unwrap();
        let dual = c.dual().unwrap().hodge_data().unwrap();
        assert_eq!(dual.s, hd.h.saturating_sub(hd.s));
        if hd.s == 0 {
            assert!(dual.h <= hd.h);
        }
    }
    let ring = make_witt_ring(2, 1, 12).unwrap();
    let a = supersingular(&ring, 1).unwrap();
    let b = ordinary(&ring, 2, 1).unwrap();
    let sum = a.direct_sum(&b).unwrap();
    let union = a.newton_polygon().unwrap().union(&b.newton_polygon().unwrap());
    assert_eq!(sum.newton_polygon().unwrap(), union);
    let hu = a.hodge_data().unwrap().hodge.union(&b.hodge_data().unwrap().hodge);
    assert_eq!(sum.hodge_data().unwrap().hodge, hu);
    let end = b.end().unwrap();
    assert_eq!(end.rank(), 4);
    assert_eq!(
        slopes(&end.newton_polygon().unwrap()),
        vec![q(-1, 1), q(0, 1), q(0, 1), q(1, 1)]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn files_round_trip(p in prop::sample::select(vec![2u64, 3, 5]), qq in 1usize..=3, n in 2u32..=6,
                        r in 1usize..=3, shift in 0u32..=2, seed in any::<u64>()) {
        let ring = make_witt_ring(p, qq, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ring.modulus();
        let b = Matrix::from_fn(&ring, r, r, |_, _| (0..qq).map(|_| rng.gen_range(0..m)).collect());
        if let Ok(c) = FCrystal::new(b, shift) {
            let f = CrystalFile::from_crystal(&c);
            let back = CrystalFile::parse(&f.to_json()).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.load().unwrap().crystal, c);
        }
    }
}

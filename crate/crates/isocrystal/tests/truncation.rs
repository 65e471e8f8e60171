use isocrystal::crystal::{
    etale, ordinary, phi_alpha_4_5, polarized_4_5_4, supersingular, FCrystal,
};
use isocrystal::plinalg::Matrix;
use isocrystal::semilinear::SearchRegime;
use isocrystal::truncation::*;
use isocrystal::witt::make_witt_ring;
use isocrystal::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn truncations_reduce_compatibly() {
    let ring = make_witt_ring(2, 2, 5).unwrap();
    for c in [supersingular(&ring, 1).unwrap(), ordinary(&ring, 3, 1).unwrap()] {
        let t3 = verschiebung(&c, 3).unwrap();
        assert!(t3.invariants_hold());
        assert_eq!(t3.reduce(2).unwrap(), verschiebung(&c, 2).unwrap());
    }
}

#[test]
fn truncation_isomorphisms() {
    let ring = make_witt_ring(2, 1, 3).unwrap();
    let ord = ordinary(&ring, 2, 1).unwrap();
    let t = verschiebung(&ord, 1).unwrap();
    let res = d_trunc_isom_search(&t, &t, 0).unwrap();
    assert!(res.witness.unwrap().is_identity());

    let ss = supersingular(&ring, 1).unwrap();
    let res = d_trunc_isom_search(&t, &verschiebung(&ss, 1).unwrap(), 0).unwrap();
    assert!(res.witness.is_none());
    assert!(matches!(res.regime, SearchRegime::Exhaustive { .. }));

    let g = Matrix::from_ints(&ring, 2, 2, &[3, 2, 4, 1]);
    let tw = verschiebung(&ord.twist(&g).unwrap(), 1).unwrap();
    assert!(d_trunc_isom_search(&t, &tw, 0).unwrap().witness.is_some());
}

/// Upgrades `g` when the truncations are isomorphic over the base field,
/// which a random unit twist need not satisfy.
fn upgrade_case(c: &FCrystal, g: &Matrix, q: u32) -> Option<Upgrade> {
    let split = SplitForm::detect(c).unwrap();
    let t1 = verschiebung(c, q).unwrap();
    let t2 = verschiebung(&c.twist(g).unwrap(), q).unwrap();
    let f = d_trunc_isom_search(&t1, &t2, 0).unwrap().witness?;
    let up = congruence_upgrade(c, &split, g, &f).unwrap();
    assert!(up.g_q.congruent_to_identity(q));
    assert_eq!(conjugated_twist(c, g, &up.conjugator).unwrap(), up.g_q);
    Some(up)
}

#[test]
fn upgrade_of_trivial_twist_is_identity() {
    let ring = make_witt_ring(3, 1, 6).unwrap();
    let c = ordinary(&ring, 2, 1).unwrap();
    let g = Matrix::identity(&ring, 2).add(&Matrix::from_ints(&ring, 2, 2, &[1, 2, 0, 1]).mul_p_pow(2));
    let split = SplitForm::detect(&c).unwrap();
    let id = Matrix::identity(&make_witt_ring(3, 1, 2).unwrap(), 2);
    let up = congruence_upgrade(&c, &split, &g, &id).unwrap();
    assert!(up.conjugator.is_identity());
}

/// `h g1 phi h^{-1}` with `g1 = 1 mod p` and `h` a random element of the
/// parabolic fixing the Hodge filtration mod `p`, so that the result is again
/// a twist of `phi`, with truncation mod `p` isomorphic to that of `phi`.
fn hidden_twist(c: &FCrystal, rng: &mut ChaCha8Rng) -> (FCrystal, Matrix) {
    let r = c.rank();
    let ring = c.ring();
    let deg = SplitForm::detect(c).unwrap().degrees;
    let g1 = random_twist(ring, r, 1, rng);
    let h = loop {
        let mut h = random_twist(ring, r, 0, rng);
        for i in 0..r {
            for j in 0..r {
                if deg[i] == 0 && deg[j] == 1 {
                    let e = ring.mul(h.entry(i, j), &ring.int_coeffs(ring.p() as i64));
                    h.set(i, j, e);
                }
            }
        }
        if h.det().valuation() == Some(0) {
            break h;
        }
    };
    let g = conjugated_twist(c, &g1, &h).unwrap();
    (c.reduce(g.ring().n()).unwrap(), g)
}

#[test]
fn upgrade_of_generic_twists() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in [2u64, 3] {
        let cases = [
            ordinary(&make_witt_ring(p, 1, 8).unwrap(), 2, 1).unwrap(),
            supersingular(&make_witt_ring(p, 2, 8).unwrap(), 1).unwrap(),
        ];
        for c in &cases {
            for _ in 0..5 {
                let (c, g) = hidden_twist(c, &mut rng);
                assert!(upgrade_case(&c, &g, 1).is_some());
            }
        }
    }
}

#[test]
fn upgrade_needs_split_form() {
    let ring = make_witt_ring(2, 1, 5).unwrap();
    let c = FCrystal::new(Matrix::from_ints(&ring, 1, 1, &[4]), 0).unwrap();
    assert_eq!(SplitForm::detect(&c).unwrap_err(), Error::NoSplitForm);
}

#[test]
fn probe_upper_bounds() {
    let opts = ProbeOptions::default();
    let ring = make_witt_ring(2, 2, 5).unwrap();
    let r = i_number_probe(&etale(&ring, 2).unwrap(), opts);
    assert_eq!((r.upper, r.upper_source), (Some(0), Some(UpperSource::H0)));
    assert_eq!(r.floor_evidence, 0);
    let r = i_number_probe(&ordinary(&ring, 2, 1).unwrap(), opts);
    assert_eq!(r.upper, Some(1));
    assert_eq!(r.floor_evidence, 1);
    let ring = make_witt_ring(2, 2, 8).unwrap();
    let r = i_number_probe(&supersingular(&ring, 1).unwrap(), opts);
    assert_eq!(r.upper, Some(1));
    assert_eq!(r.floor_evidence, 1);
}

#[test]
fn phi_alpha_certificate() {
    let ring = make_witt_ring(2, 3, 8).unwrap();
    for alpha in [ring.one(), ring.generator()] {
        let c = phi_alpha_4_5(&ring, &alpha).unwrap();
        let cert = parabolic_certificate(&c).unwrap();
        assert!(cert.holds(), "{cert:?}");
        let best = i_number_certificates(&c);
        assert!(best[0].0 <= 3);
    }
}

#[test]
fn aut_images_stabilize() {
    let ring = make_witt_ring(2, 2, 7).unwrap();
    assert!(aut_image_stabilization_check(&supersingular(&ring, 1).unwrap(), 0).unwrap().pass);
    let ring = make_witt_ring(3, 1, 6).unwrap();
    assert!(aut_image_stabilization_check(&ordinary(&ring, 2, 1).unwrap(), 1).unwrap().pass);
    let ring = make_witt_ring(5, 1, 4).unwrap();
    let rep = aut_image_stabilization_check(&etale(&ring, 1).unwrap(), 0).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.image_size, 4 * 5usize.pow(rep.level - 1));
}

#[test]
fn polarized_search() {
    let ring = make_witt_ring(2, 1, 4).unwrap();
    let p = polarized_4_5_4(&ring, &ring.one()).unwrap();
    p.validate().unwrap();
    let res = polarized_isom_search(&p, &p, 1).unwrap();
    let f = res.witness.unwrap();
    assert_eq!(f.transpose().mul(&p.gram.reduce(1).unwrap()).mul(&f), p.gram.reduce(1).unwrap());
}

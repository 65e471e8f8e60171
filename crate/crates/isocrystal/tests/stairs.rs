use isocrystal::bounds::epsilon;
use isocrystal::crystal::{isoclinic_3_3_6, ordinary, supersingular, FCrystal};
use isocrystal::semilinear::{isom_search, SearchRegime};
use isocrystal::stairs::*;
use isocrystal::truncation::random_twist;
use isocrystal::witt::make_witt_ring;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cases() -> Vec<FCrystal> {
    let mut v = Vec::new();
    for p in [2u64, 3] {
        v.push(ordinary(&make_witt_ring(p, 1, 7).unwrap(), 2, 1).unwrap());
        v.push(supersingular(&make_witt_ring(p, 2, 8).unwrap(), 1).unwrap());
        v.push(isoclinic_3_3_6(&make_witt_ring(p, 3, 8).unwrap(), 3, 2).unwrap());
    }
    v
}

#[test]
fn witnesses_reverify_at_reported_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for c in cases() {
        let d = build_stairs_datum(&c).unwrap();
        d.validate().unwrap();
        let need = 2 * d.m + epsilon(c.ring().p());
        for _ in 0..4 {
            let g = random_twist(c.ring(), c.rank(), need, &mut rng);
            let out = stairs_run(&d, &g, MAX_FIELD_DEGREE).unwrap();
            assert!(out.certified >= need);
            assert!(witness_precision(&c, &g, &out.witness).unwrap() >= out.certified);
            assert_eq!(out.complete(), out.stall.is_none());
        }
        if let Ok(fd) = build_stairs_datum_with(&c, Strategy::FixedLattice) {
            for _ in 0..3 {
                let g = random_twist(c.ring(), c.rank(), fd.m, &mut rng);
                let out = lang_run(&fd, &g, MAX_FIELD_DEGREE).unwrap();
                let cf = c.reduce(fd.ring().n()).unwrap();
                let gf = g.reduce(fd.ring().n()).unwrap();
                assert!(witness_precision(&cf, &gf, &out.witness).unwrap() >= out.certified);
            }
        }
    }
}

#[test]
fn complete_runs_agree_with_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ring = make_witt_ring(2, 2, 6).unwrap();
    let c = supersingular(&ring, 1).unwrap();
    let d = build_stairs_datum(&c).unwrap();
    for _ in 0..4 {
        let g = random_twist(&ring, 2, 4, &mut rng);
        let out = stairs_run(&d, &g, MAX_FIELD_DEGREE).unwrap();
        let res = isom_search(&c, &c.twist(&g).unwrap(), 3).unwrap();
        if let SearchRegime::Exhaustive { .. } = res.regime {
            if out.complete() && out.degree() == ring.q() {
                assert!(res.witness.is_some());
            }
            if res.witness.is_none() {
                assert!(!(out.complete() && out.degree() == ring.q()));
            }
        }
    }
}

#[test]
fn stalls_are_reported_not_hidden() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ring = make_witt_ring(3, 1, 7).unwrap();
    let c = ordinary(&ring, 2, 1).unwrap();
    let d = build_stairs_datum(&c).unwrap();
    let g = random_twist(&ring, 2, 1, &mut rng);
    let out = stairs_run(&d, &g, 1).unwrap();
    if !out.complete() {
        assert!(out.stall.is_some());
        assert!(out.certified < out.target);
    }
}

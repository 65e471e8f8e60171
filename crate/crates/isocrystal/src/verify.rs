//! The verification suite behind `isocrystal verify`: one check per
//! acceptance criterion, each with independent oracles where possible.

use std::time::Instant;

use num_rational::Rational64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{d_plus_bound0, epsilon, truncation_level_bound, TruncationKind};
use crate::crystal::{
    cyclic_from_exponents, etale, example_2_3_2, isoclinic_3_3_6, ordinary, phi_alpha_4_5,
    polarized_4_5_4, supersingular, FCrystal,
};
use crate::deviation::{deviations, df_reduce, sign_deviation, value_deviation, ExponentTuple};
use crate::plinalg::{exp_trunc, smith_normal_form, Matrix};
use crate::semilinear::{
    cokernel_length, descent_check, fixed_lattice, hom_stabilization, isom_search, SearchRegime,
};
use crate::stairs::{
    build_stairs_datum, build_stairs_datum_with, lang_run, stairs_run, witness_precision,
    Strategy, MAX_FIELD_DEGREE,
};
use crate::truncation::{
    i_number_probe, monomial_cycle_tuples, parabolic_certificate, random_twist, verschiebung,
    ProbeOptions, UpperSource,
};
use crate::witt::{make_witt_ring, WittElem, WittRing};

type Outcome = std::result::Result<String, String>;

/// Result of one suite entry.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub millis: u128,
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    run: fn() -> Outcome,
}

impl Criterion {
    pub fn run(&self) -> Check {
        let start = Instant::now();
        let res = (self.run)();
        Check {
            id: self.id,
            name: self.name,
            pass: res.is_ok(),
            detail: res.unwrap_or_else(|e| e),
            millis: start.elapsed().as_millis(),
        }
    }
}

pub const SUITES: &[&str] = &["paper"];

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, run| Criterion { id, name, run };
    vec![
        c(1, "deviation_samples", deviation_samples as fn() -> Outcome),
        c(2, "deviation_properties", deviation_properties),
        c(3, "example_2_3_2", example_232),
        c(4, "isoclinic_fixed_lattice", isoclinic_336),
        c(5, "phi_alpha_family", phi_alpha_family),
        c(6, "phi_alpha_non_isomorphic", phi_alpha_non_isomorphic),
        c(7, "stairs_soundness", stairs_soundness),
        c(8, "i_number_upper_witnesses", i_number_witnesses),
        c(9, "hom_stabilization", hom_stabilization_check),
        c(10, "descent", descent),
        c(11, "bound_recursion", bound_recursion),
        c(12, "infrastructure", infrastructure),
    ]
}

pub fn run_suite(name: &str) -> Option<Vec<Check>> {
    SUITES
        .contains(&name)
        .then(|| criteria().iter().map(Criterion::run).collect())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Debug>(r: std::result::Result<T, E>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

fn ring(p: u64, q: usize, n: u32) -> std::result::Result<std::sync::Arc<WittRing>, String> {
    ok(make_witt_ring(p, q, n), "ring")
}

fn tuple(v: &[i64]) -> ExponentTuple {
    ExponentTuple::new(v.to_vec()).expect("nonempty")
}

type Sample = (&'static [i64], (u64, u64));

const DEVIATION_SAMPLES: [Sample; 3] = [
    (&[-1, 1, -1, -1, 1, 1, 0, -1], (2, 3)),
    (&[1, 1, -2, 1, 3], (2, 2)),
    (&[-1, 1, -1], (1, 1)),
];

fn deviation_samples() -> Outcome {
    check_samples(&DEVIATION_SAMPLES)
}

fn check_samples(cases: &[Sample]) -> Outcome {
    for &(t, want) in cases {
        let got = deviations(&tuple(t));
        ensure(got == want, || format!("{t:?}: got {got:?}, want {want:?}"))?;
    }
    Ok(format!("{} samples", cases.len()))
}

/// The sign deviation straight from the definition: all windows `[t, u]`
/// of the cyclic tuple, each checked by recomputing its suffix sums.
pub fn sign_deviation_oracle(t: &[i64]) -> u64 {
    let l = t.len();
    let at = |i: usize| t[i % l];
    let side = |nonneg: bool| {
        let mut best = 0i64;
        for start in 0..l {
            for end in start..start + l {
                let ok = (start..=end).all(|v| {
                    let s: i64 = (v..=end).map(at).sum();
                    if nonneg {
                        s <= 0
                    } else {
                        s >= 0
                    }
                });
                if ok {
                    let s: i64 = (start..=end).map(at).sum();
                    best = best.max(if nonneg { -s } else { s });
                }
            }
        }
        best as u64
    };
    let sum: i64 = t.iter().sum();
    match sum.signum() {
        1 => side(true),
        -1 => side(false),
        _ => side(true).min(side(false)),
    }
}

fn deviation_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let l = rng.gen_range(1..=8);
        let v: Vec<i64> = (0..l).map(|_| rng.gen_range(-3..=3)).collect();
        let t = tuple(&v);
        let s = sign_deviation(&t);
        let w = value_deviation(&t);
        let abs: u64 = v.iter().map(|x| x.unsigned_abs()).sum();
        ensure(s <= w && w <= abs, || format!("{v:?}: S={s} W={w}"))?;
        let oracle = sign_deviation_oracle(&v);
        ensure(oracle == s, || format!("{v:?}: S={s}, oracle {oracle}"))?;
        let red = df_reduce(&t);
        ensure(red.is_uniform(), || format!("{v:?}: reduction not uniform"))?;
        ensure(u64::from(red.max_rescale()) <= s, || {
            format!("{v:?}: rescale {} > S={s}", red.max_rescale())
        })?;
    }
    Ok("1000 tuples".into())
}

fn example_232() -> Outcome {
    for p in [2u64, 3] {
        for r in 3..=5usize {
            let ring = ring(p, 1, 3 * r as u32 + 2)?;
            let c = ok(example_2_3_2(&ring, r), "example")?;
            let mut tau = vec![1i64; r];
            tau[r - 1] = -1;
            let red = df_reduce(&tuple(&tau));
            let lat = ok(cyclic_from_exponents(&ring, &red.tuple, None), "rescaled")?;
            let hodge = ok(lat.hodge_data(), "hodge")?.hodge.slopes();
            let mut want = vec![Rational64::zero(); 2];
            want.extend(std::iter::repeat(Rational64::from_integer(1)).take(r - 2));
            ensure(hodge == want, || format!("p={p} r={r}: Hodge {hodge:?}"))?;
            let newton = ok(c.newton_polygon(), "newton")?;
            let slope = Rational64::new(r as i64 - 2, r as i64);
            ensure(newton.points == vec![(slope, r)], || {
                format!("p={p} r={r}: Newton {:?}", newton.points)
            })?;
            // f = diag(p^{a_i}) maps the rescaled crystal into the original
            let pw: Vec<Vec<u64>> = red
                .rescale
                .iter()
                .map(|&a| ring.int_coeffs(ring.p_pow(a) as i64))
                .collect();
            let f = Matrix::diag(&ring, &pw);
            let lhs = f.mul(lat.matrix()).mul_p_pow(c.shift());
            let rhs = c.matrix().mul(&f.sigma()).mul_p_pow(lat.shift());
            ensure(lhs == rhs, || format!("p={p} r={r}: inclusion is not a morphism"))?;
            let len = ok(cokernel_length(&f), "cokernel")?;
            ensure(len == 1, || format!("p={p} r={r}: cokernel length {len}"))?;
        }
    }
    Ok("r in 3..=5, p in {2,3}".into())
}

fn isoclinic_336() -> Outcome {
    let mut ones = 0;
    for p in [2u64, 3] {
        for (r, c) in [(3usize, 2usize), (5, 3), (5, 2)] {
            let ring = ring(p, r, 4)?;
            let cr = ok(isoclinic_3_3_6(&ring, r, c), "corpus")?;
            let fl = ok(fixed_lattice(&cr, 3), "fixed lattice")?;
            ensure(fl.exponent == 1, || format!("p={p} ({r},{c}): exponent {}", fl.exponent))?;
            let all: Vec<usize> = (0..r).collect();
            let tuples = monomial_cycle_tuples(cr.matrix(), &all, &all)
                .ok_or_else(|| format!("({r},{c}) is not monomial"))?;
            let s: Vec<u64> = tuples.iter().map(sign_deviation).collect();
            ensure(s.iter().all(|&x| x <= 1) && s.contains(&1), || {
                format!("p={p} ({r},{c}): S values {s:?}")
            })?;
            ones += 1;
        }
    }
    Ok(format!("{ones} crystals, exponent 1"))
}

fn phi_alpha_family() -> Outcome {
    let third = Rational64::new(1, 3);
    let two_thirds = Rational64::new(2, 3);
    for p in [2u64, 3] {
        let ring = ring(p, 2, 13)?;
        for alpha in [ring.zero(), ring.one(), ring.generator()] {
            let c = ok(phi_alpha_4_5(&ring, &alpha), "corpus")?;
            let np = ok(c.newton_polygon(), "newton")?;
            ensure(np.points == vec![(third, 3), (two_thirds, 3)], || {
                format!("p={p}: Newton {:?}", np.points)
            })?;
            let t = ok(verschiebung(&c, 4), "verschiebung")?;
            ensure(t.invariants_hold(), || "F sigma(V) = V sigma^{-1}(F) = p fails".into())?;
            ok(polarized_4_5_4(&ring, &alpha), "gram validation")?;
        }
    }
    let s = sign_deviation(&tuple(&[1, 1, -1]));
    ensure(s == 1, || format!("S(1,1,-1) = {s}"))?;
    let ring = ring(2, 3, 8)?;
    let c = ok(phi_alpha_4_5(&ring, &ring.one()), "corpus")?;
    let cert = ok(parabolic_certificate(&c), "block decomposition")?;
    ensure(cert.upper_radical_s == 1, || format!("Lie(U1) S = {}", cert.upper_radical_s))?;
    Ok("alpha in {0, 1, t}, p in {2,3}".into())
}

fn phi_alpha_non_isomorphic() -> Outcome {
    let ring = ring(2, 6, 4)?;
    let c1 = ok(phi_alpha_4_5(&ring, &ring.one()), "corpus")?;
    let c2 = ok(phi_alpha_4_5(&ring, &ring.generator()), "corpus")?;
    let res = ok(isom_search(&c1, &c2, 4), "isom")?;
    ensure(res.witness.is_none(), || "found an isomorphism".into())?;
    match res.regime {
        SearchRegime::Exhaustive { candidates } => {
            Ok(format!("None over {candidates} candidates, Hom log size {}", res.hom_log_size))
        }
        other => Err(format!("regime {other:?}")),
    }
}

fn stairs_cases() -> std::result::Result<Vec<FCrystal>, String> {
    let mut v = Vec::new();
    for p in [2u64, 3] {
        v.push(ok(ordinary(&ring(p, 1, 7)?, 2, 1), "ordinary")?);
        v.push(ok(supersingular(&ring(p, 2, 8)?, 1), "supersingular")?);
        v.push(ok(isoclinic_3_3_6(&ring(p, 3, 8)?, 3, 2), "isoclinic")?);
    }
    Ok(v)
}

fn stairs_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases = stairs_cases()?;
    let (mut runs, mut complete, mut compared) = (0, 0, 0);
    let per_case = 200usize.div_ceil(cases.len());
    for c in &cases {
        let p = c.ring().p();
        let d = ok(build_stairs_datum(c), "datum")?;
        ok(d.validate(), "datum validation")?;
        let need = 2 * d.m + epsilon(p);
        let fixed = build_stairs_datum_with(c, Strategy::FixedLattice).ok();
        for k in 0..per_case {
            let g = random_twist(c.ring(), c.rank(), need, &mut rng);
            let out = ok(stairs_run(&d, &g, MAX_FIELD_DEGREE), "stairs")?;
            let prec = ok(witness_precision(c, &g, &out.witness), "recheck")?;
            ensure(prec >= out.certified && out.certified >= need, || {
                format!("p={p} rank {}: certified {} but identity holds to {prec}", c.rank(), out.certified)
            })?;
            runs += 1;
            complete += usize::from(out.complete());
            if let Some(fd) = &fixed {
                let n = fd.ring().n();
                let out = ok(lang_run(fd, &ok(g.reduce(n), "reduce")?, MAX_FIELD_DEGREE), "lang")?;
                let cr = ok(c.reduce(n), "reduce")?;
                let prec = ok(witness_precision(&cr, &ok(g.reduce(n), "reduce")?, &out.witness), "recheck")?;
                ensure(prec >= out.certified, || "lang witness fails recheck".into())?;
                runs += 1;
            }
            // cross-check against the exhaustive search on a few small cases
            if k < 3 && c.rank() == 2 {
                let m = 3;
                let res = ok(isom_search(c, &ok(c.twist(&g), "twist")?, m), "isom")?;
                if let SearchRegime::Exhaustive { .. } = res.regime {
                    let base = out.degree() == c.ring().q() && out.certified >= m;
                    ensure(!base || res.witness.is_some(), || "stairs found a base-field witness, search did not".into())?;
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("{runs} runs re-verified, {complete} stairs runs complete, {compared} compared with search"))
}

fn i_number_witnesses() -> Outcome {
    let opts = ProbeOptions::default();
    let mut lines = Vec::new();
    for p in [2u64, 3] {
        let r = ring(p, 2, 8)?;
        let cases: [(&str, FCrystal, u32); 3] = [
            ("etale", ok(etale(&r, 2), "etale")?, 0),
            ("ordinary", ok(ordinary(&r, 2, 1), "ordinary")?, 1),
            ("supersingular", ok(supersingular(&r, 1), "supersingular")?, 1),
        ];
        for (name, c, want) in cases {
            let rep = i_number_probe(&c, opts);
            ensure(rep.upper == Some(want), || format!("p={p} {name}: upper {:?}", rep.upper))?;
            lines.push(format!("{name}:{want}"));
        }
    }
    let r = ring(2, 3, 8)?;
    for alpha in [r.one(), r.generator()] {
        let c = ok(phi_alpha_4_5(&r, &alpha), "phi_alpha")?;
        let rep = i_number_probe(&c, ProbeOptions { n_max: 0, ..opts });
        ensure(rep.upper.is_some_and(|u| u <= 3), || format!("phi_alpha: upper {:?}", rep.upper))?;
        ensure(rep.upper_source == Some(UpperSource::Stairs), || "phi_alpha: unexpected source".into())?;
    }
    lines.push("phi_alpha:<=3".into());
    Ok(lines.join(" "))
}

fn hom_stabilization_check() -> Outcome {
    type Make = fn(&std::sync::Arc<WittRing>) -> crate::Result<FCrystal>;
    let pairs: [(&str, u64, usize, Make); 3] = [
        ("etale", 3, 1, |r| etale(r, 2)),
        ("supersingular", 2, 2, |r| supersingular(r, 1)),
        ("isoclinic", 2, 3, |r| isoclinic_3_3_6(r, 3, 2)),
    ];
    let mut out = Vec::new();
    for (name, p, q, make) in pairs {
        let c = ok(make(&ring(p, q, 9)?), name)?;
        let m12 = ok(fixed_lattice(&c, 8), "fixed lattice")?.exponent;
        // End loses precision to its determinant, so h12 is read off a
        // deeper copy
        let deep = ok(make(&ring(p, q, 16)?), name)?;
        let h12 = ok(ok(deep.end(), "end")?.hodge_data(), "hodge")?.h;
        for t in 0..=1 {
            let rep = ok(hom_stabilization(&c, &c, m12, h12, t), "stabilization")?;
            ensure(rep.holds() && rep.checked_to > rep.predicted, || format!("{name} t={t}: {rep:?}"))?;
            out.push(format!("{name}/t{t}: onset {} <= {}", rep.onset, rep.predicted));
        }
    }
    Ok(out.join(", "))
}

fn descent() -> Outcome {
    let mut count = 0;
    for p in [2u64, 3] {
        let r2 = ring(p, 2, 6)?;
        let r6 = ring(p, 6, 6)?;
        let cases = [
            ok(etale(&r2, 2), "etale")?,
            ok(ordinary(&r2, 2, 1), "ordinary")?,
            ok(supersingular(&r2, 1), "supersingular")?,
            ok(ordinary(&r6, 3, 1), "ordinary")?,
            ok(isoclinic_3_3_6(&r6, 3, 2), "isoclinic")?,
            ok(cyclic_from_exponents(&r6, &[1, 0, 0], None), "cyclic")?,
        ];
        for c in &cases {
            let res = ok(descent_check(c, 2), "descent")?;
            ensure(res.is_some(), || format!("p={p} rank {}: a generator leaves the subfield", c.rank()))?;
            count += 1;
        }
    }
    Ok(format!("{count} crystals of rank <= 3"))
}

fn bound_recursion() -> Outcome {
    use num_bigint::BigUint;
    for c in 0..10 {
        ensure(d_plus_bound0(1, c).is_zero(), || format!("D0(1,{c}) != 0"))?;
    }
    for a in 1..10 {
        ensure(d_plus_bound0(a, 0).is_zero(), || format!("D0({a},0) != 0"))?;
    }
    ensure(d_plus_bound0(2, 1) == BigUint::from(2u32), || "D0(2,1) != 2".into())?;
    for a in 1..=6 {
        for c in 0..=4 {
            let v = d_plus_bound0(a, c);
            if a < 6 {
                ensure(d_plus_bound0(a + 1, c) >= v, || format!("not monotone in a at ({a},{c})"))?;
            }
            if c < 4 {
                ensure(d_plus_bound0(a, c + 1) >= v, || format!("not monotone in c at ({a},{c})"))?;
            }
        }
    }
    for r in 1..=6 {
        for d in [0, r] {
            let b = ok(truncation_level_bound(TruncationKind::PDivisible { r, dim: Some(d) }, 2), "bound")?;
            ensure(b.is_zero(), || format!("pdiv({r},{d}) = {b}"))?;
        }
    }
    Ok("grid a <= 6, c <= 4".into())
}

fn random_elem(r: &std::sync::Arc<WittRing>, rng: &mut ChaCha8Rng) -> WittElem {
    let m = r.modulus();
    r.elem((0..r.q()).map(|_| rng.gen_range(0..m)).collect())
}

fn random_matrix(r: &std::sync::Arc<WittRing>, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let m = r.modulus();
    Matrix::from_coeffs(r, n, n, (0..n * n).map(|_| (0..r.q()).map(|_| rng.gen_range(0..m)).collect()).collect())
        .expect("shape")
}

fn infrastructure() -> Outcome {
    const CASES: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rings = [ring(2, 3, 5)?, ring(3, 2, 4)?, ring(5, 1, 3)?, ring(7, 2, 3)?];
    for i in 0..CASES {
        let r = &rings[i % rings.len()];
        let (a, b, c) = (random_elem(r, &mut rng), random_elem(r, &mut rng), random_elem(r, &mut rng));
        ensure(&(&a + &b) + &c == &a + &(&b + &c) && &a + &b == &b + &a, || "addition".into())?;
        ensure(&(&a * &b) * &c == &a * &(&b * &c) && &a * &b == &b * &a, || "multiplication".into())?;
        ensure(&a * &(&b + &c) == &(&a * &b) + &(&a * &c), || "distributivity".into())?;
        ensure(&a * &r.one() == a && &a - &a == r.zero(), || "identities".into())?;
        // Frobenius
        ensure((&a * &b).frobenius() == &a.frobenius() * &b.frobenius(), || "sigma(ab)".into())?;
        ensure((&a + &b).frobenius() == &a.frobenius() + &b.frobenius(), || "sigma(a+b)".into())?;
        let mut x = a.clone();
        for _ in 0..r.q() {
            x = x.frobenius();
        }
        ensure(x == a, || "sigma^q != id".into())?;
        ensure(a.frobenius().residue() == a.pow(r.p() as u128).residue(), || "sigma != x^p mod p".into())?;
        // Teichmueller
        let res = r.residue_ring();
        let (abar, bbar) = (a.residue(), b.residue());
        let ta = ok(r.teichmuller(&abar), "teichmuller")?;
        let tb = ok(r.teichmuller(&bbar), "teichmuller")?;
        let tab = ok(r.teichmuller(&(&abar * &bbar)), "teichmuller")?;
        ensure(&ta * &tb == tab, || "Teichmueller is not multiplicative".into())?;
        ensure(ta.pow((r.p() as u128).pow(r.q() as u32)) == ta, || "Teichmueller not fixed by x^(p^q)".into())?;
        ensure(ta.residue() == abar && **abar.ring() == *res, || "Teichmueller residue".into())?;
    }
    for i in 0..CASES {
        let r = &rings[i % rings.len()];
        let a = random_matrix(r, 3, &mut rng).mul(&Matrix::diag(
            r,
            &[r.int_coeffs(1), r.int_coeffs(r.p() as i64), r.int_coeffs(r.p_pow(2) as i64)],
        ));
        let u = random_unit(r, 3, &mut rng);
        let v = random_unit(r, 3, &mut rng);
        let e1 = smith_normal_form(&a).exponents;
        let e2 = smith_normal_form(&u.mul(&a).mul(&v)).exponents;
        ensure(e1 == e2, || format!("SNF {e1:?} vs {e2:?}"))?;
    }
    for i in 0..CASES {
        let r = &rings[i % rings.len()];
        let p = r.p();
        let l = if p == 2 { 2 } else { 1 + (i as u32 % 2).min(r.n() - 1) };
        if l >= r.n() {
            continue;
        }
        let x = random_matrix(r, 2, &mut rng).mul_p_pow(l);
        let e = ok(exp_trunc(&x), "exp")?;
        let id = Matrix::identity(r, 2);
        let k = if p == 2 { 2 * l - 1 } else { 2 * l };
        let d = e.sub(&id.add(&x));
        ensure(d.valuation().is_none_or(|v| v >= k.min(r.n())), || format!("exp congruence p={p} l={l}"))?;
        let inv = ok(exp_trunc(&x.neg()), "exp")?;
        ensure(e.mul(&inv).is_identity(), || "exp(X) exp(-X) != 1".into())?;
    }
    let mut polys = 0;
    for i in 0..CASES {
        let p = [2u64, 3][i % 2];
        let base = ring(p, 1, 8)?;
        let big = ring(p, 2, 8)?;
        let u = random_unit(&base, 3, &mut rng);
        let v = random_unit(&base, 3, &mut rng);
        let degs: Vec<Vec<u64>> = (0..3).map(|_| base.int_coeffs(if rng.gen_bool(0.5) { p as i64 } else { 1 })).collect();
        let c = ok(FCrystal::new(u.mul(&Matrix::diag(&base, &degs)).mul(&v), 0), "crystal")?;
        let n1 = ok(c.newton_polygon(), "newton")?;
        let n2 = ok(ok(c.embed(&big), "embed")?.newton_polygon(), "newton")?;
        ensure(n1 == n2, || format!("Newton {:?} vs {:?} after base change", n1.points, n2.points))?;
        polys += 1;
    }
    Ok(format!("{CASES} cases each; {polys} polygons"))
}

fn random_unit(r: &std::sync::Arc<WittRing>, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let m = random_matrix(r, n, rng);
        if m.det().valuation() == Some(0) {
            return m;
        }
    }
}

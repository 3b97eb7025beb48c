use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use sparsemul::cyclic::{
    cyclic_mul, cyclic_mul_with, eval_at_powers, CyclicPoly, Domain, MulConfig, MulStrategy,
};
use sparsemul::dynamics::{initial_distribution, step};
use sparsemul::heuristic::recover_coefficients;
use sparsemul::numtheory::{first_primes, smooth_factor, Modulus};
use sparsemul::poly::{kronecker, unkronecker, SparsePoly};
use sparsemul::rng::seeded;

fn raw_terms(
    n: usize,
    max_terms: usize,
    max_exp: u32,
) -> impl Strategy<Value = Vec<(i64, Vec<u32>)>> {
    prop::collection::vec(
        (-1000i64..=1000, prop::collection::vec(0..=max_exp, n)),
        0..=max_terms,
    )
}

fn poly(n: usize, max_terms: usize, max_exp: u32) -> impl Strategy<Value = SparsePoly> {
    raw_terms(n, max_terms, max_exp).prop_map(move |t| SparsePoly::from_terms(n, t).unwrap())
}

fn poly_pair(max_terms: usize) -> impl Strategy<Value = (SparsePoly, SparsePoly)> {
    (1usize..=4).prop_flat_map(move |n| (poly(n, max_terms, 12), poly(n, max_terms, 12)))
}

fn poly_triple(max_terms: usize) -> impl Strategy<Value = (SparsePoly, SparsePoly, SparsePoly)> {
    (1usize..=4).prop_flat_map(move |n| {
        (
            poly(n, max_terms, 12),
            poly(n, max_terms, 12),
            poly(n, max_terms, 12),
        )
    })
}

fn field() -> Domain {
    // 2^61 - 1
    Domain::Field(Modulus::new((BigInt::one() << 61u32).magnitude() - 1u32).unwrap())
}

fn cyclic(domain: Domain, r: usize) -> impl Strategy<Value = CyclicPoly> {
    prop::collection::vec(-50i64..=50, r).prop_map(move |c| {
        CyclicPoly::from_coeffs(domain.clone(), c.into_iter().map(BigInt::from).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_form_is_unique(
        terms in (1usize..=4).prop_flat_map(|n| (Just(n), raw_terms(n, 20, 6))),
        seed in any::<u64>(),
    ) {
        let (n, mut t) = terms;
        let a = SparsePoly::from_terms(n, t.clone()).unwrap();
        // shuffle with a simple LCG so the permutation depends only on the seed
        let mut s = seed | 1;
        for i in (1..t.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            t.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = SparsePoly::from_terms(n, t).unwrap();
        prop_assert_eq!(a.to_sp_string(), b.to_sp_string());
        prop_assert_eq!(&SparsePoly::parse_sp(&a.to_sp_string()).unwrap(), &a);
    }

    #[test]
    fn serializations_differ_when_polynomials_do((p, q) in poly_pair(10)) {
        prop_assert_eq!(p == q, p.to_sp_string() == q.to_sp_string());
    }

    #[test]
    fn product_is_commutative_and_distributive((p, q, s) in poly_triple(30)) {
        prop_assert_eq!(p.naive_mul(&q).unwrap(), q.naive_mul(&p).unwrap());
        let lhs = p.naive_mul(&q.add(&s).unwrap()).unwrap();
        let rhs = p.naive_mul(&q).unwrap().add(&p.naive_mul(&s).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn degree_adds_and_height_is_bounded((p, q) in poly_pair(30)) {
        prop_assume!(!p.is_zero() && !q.is_zero());
        let r = p.naive_mul(&q).unwrap();
        // over the integers the top-degree parts multiply without cancelling
        prop_assert_eq!(r.total_degree(), p.total_degree() + q.total_degree());
        let bound = p.len().min(q.len()) * p.height() * q.height();
        prop_assert!(r.height() <= bound);
    }

    #[test]
    fn kronecker_round_trip((p, q) in poly_pair(20)) {
        let bounds = vec![25u64; p.nvars()];
        let r = p.naive_mul(&q).unwrap();
        let packed = kronecker(&p, &bounds).unwrap().naive_mul(&kronecker(&q, &bounds).unwrap());
        prop_assert_eq!(unkronecker(&packed, &bounds).unwrap(), r);
    }

    #[test]
    fn cyclic_mul_is_commutative_and_associative(
        (a, b, c) in (1usize..=64).prop_flat_map(|r| {
            let d = Domain::Integer;
            (cyclic(d.clone(), r), cyclic(d.clone(), r), cyclic(d, r))
        })
    ) {
        let ab = cyclic_mul(&a, &b).unwrap();
        prop_assert_eq!(&ab, &cyclic_mul(&b, &a).unwrap());
        let left = cyclic_mul(&ab, &c).unwrap();
        let right = cyclic_mul(&a, &cyclic_mul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn cyclic_strategies_agree(
        (a, b) in (64usize..=300).prop_flat_map(|r| (cyclic(field(), r), cyclic(field(), r)))
    ) {
        let want = cyclic_mul_with(&a, &b, &MulConfig { force: Some(MulStrategy::Schoolbook), ..MulConfig::default() }).unwrap().0;
        for s in [MulStrategy::SingleTransform, MulStrategy::MultiTransform] {
            let cfg = MulConfig { force: Some(s), ..MulConfig::default() };
            prop_assert_eq!(&cyclic_mul_with(&a, &b, &cfg).unwrap().0, &want);
        }
    }

    #[test]
    fn smooth_factor_inverts_products(
        (n, d) in (1usize..=8, 0u32..=40),
        raw in prop::collection::vec(0u32..=40, 8),
    ) {
        let basis = first_primes(n, d);
        let mut budget = d;
        let k: Vec<u32> = raw[..n].iter().map(|&x| { let e = x.min(budget); budget -= e; e }).collect();
        let q = basis.primes().iter().zip(&k).fold(num_bigint::BigUint::one(), |acc, (&p, &e)| acc * num_bigint::BigUint::from(p).pow(e));
        prop_assert_eq!(smooth_factor(&q, &basis, d), Some(k));
    }

    #[test]
    fn mass_identity(tau in 0.2f64..2.0, rounds in 1usize..30) {
        let mut d = initial_distribution(tau, 64).unwrap();
        for _ in 0..rounds {
            let next = step(&d);
            if d.sigma() > 0.0 {
                let want = d.sigma() * (1.0 - d.p_k(1) / d.sigma()).powi(3);
                prop_assert!((next.sigma() - want).abs() <= 1e-12);
            }
            d = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn evaluation_is_a_ring_homomorphism(
        (p, q, lambda, r, weighted, wseed) in (1usize..=4).prop_flat_map(|n| (
            poly(n, 12, 20),
            poly(n, 12, 20),
            prop::collection::vec(0u64..1000, n),
            1usize..=40,
            any::<bool>(),
            prop::collection::vec(1i64..1_000_000, n),
        ))
    ) {
        let pq = p.naive_mul(&q).unwrap();
        let (domain, weights) = if weighted {
            (field(), Some(wseed.iter().map(|&w| BigInt::from(w)).collect::<Vec<_>>()))
        } else {
            (Domain::Integer, None)
        };
        let w = weights.as_deref();
        let lhs = cyclic_mul(
            &eval_at_powers(&p, &lambda, r, &domain, w).unwrap(),
            &eval_at_powers(&q, &lambda, r, &domain, w).unwrap(),
        ).unwrap();
        let rhs = eval_at_powers(&pq, &lambda, r, &domain, w).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // Whatever the box ratio, a returned coefficient vector is exact.
    #[test]
    fn known_support_recovery_is_las_vegas(
        (p, q) in (2usize..=4).prop_flat_map(|n| (poly(n, 15, 8), poly(n, 15, 8))),
        tau in 0.2f64..1.0,
        seed in any::<u64>(),
    ) {
        let want = p.naive_mul(&q).unwrap();
        let support = want.support();
        prop_assume!(support.len() >= 6 && tau * support.len() as f64 >= 2.0);
        if let Some(got) = recover_coefficients(&p, &q, &support, tau, &mut seeded(seed)).unwrap() {
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn recovered_coefficients_respect_signs() {
    // a product whose coefficients straddle zero in every box size
    let p = SparsePoly::from_terms(2, vec![(-7, vec![3, 0]), (5, vec![0, 2]), (1, vec![1, 1])])
        .unwrap();
    let q = SparsePoly::from_terms(2, vec![(3, vec![0, 0]), (-2, vec![2, 2])]).unwrap();
    let want = p.naive_mul(&q).unwrap();
    assert!(want.terms().iter().any(|t| t.coeff.is_negative()));
    assert!(want.terms().iter().all(|t| !t.coeff.is_zero()));
    let got = (0..50)
        .find_map(|s| recover_coefficients(&p, &q, &want.support(), 1.5, &mut seeded(s)).unwrap())
        .expect("some seed wins");
    assert_eq!(got, want);
}

//! Seeded Monte Carlo checks of the probabilistic claims behind the recovery algorithms.
//! Every test is deterministic; the thresholds leave wide margins over the expected rates.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use sparsemul::dynamics::{iterate, simulate_game};
use sparsemul::heuristic::{
    recover_coefficients, recover_exponents, recover_exponents_scored, RecoveryParams,
};
use sparsemul::numtheory::{choose_pi, first_primes, smooth_factor};
use sparsemul::poly::{all_monomials, monomial_count, random_poly, ExponentVec, SparsePoly};
use sparsemul::rng::seeded;
use sparsemul::unconditional::{
    multiply_mod_pi, recover_coefficients_lv, reduction_modulus, ModPiOutcome,
};

/// A random pair with `n` in 2..=4 and up to `max_terms` terms per factor.
fn instance(seed: u64, max_terms: usize) -> (SparsePoly, SparsePoly) {
    let mut g = seeded(seed);
    let n = g.gen_range(2..=4);
    let dp = g.gen_range(2..=10);
    let dq = g.gen_range(2..=10);
    let tp = g
        .gen_range(2..=max_terms)
        .min(monomial_count(n, dp) as usize);
    let tq = g
        .gen_range(2..=max_terms)
        .min(monomial_count(n, dq) as usize);
    let p = random_poly(n, tp, dp, 1 << 16, &mut g).unwrap();
    let q = random_poly(n, tq, dq, 1 << 16, &mut g).unwrap();
    (p, q)
}

fn sorted(mut v: Vec<ExponentVec>) -> Vec<ExponentVec> {
    v.sort_unstable();
    v
}

#[test]
fn known_support_fails_far_below_threshold() {
    let mut g = seeded(5);
    let p = random_poly(3, 32, 50, 100, &mut g).unwrap();
    let q = random_poly(3, 32, 50, 100, &mut g).unwrap();
    let support = p.naive_mul(&q).unwrap().support();
    assert!(support.len() >= 1000, "support of {}", support.len());
    let failed = (0..100)
        .filter(|&s| {
            recover_coefficients(&p, &q, &support, 0.05, &mut seeded(s))
                .unwrap()
                .is_none()
        })
        .count();
    assert!(failed >= 95, "failed only {failed}/100 at tau = 0.05");
}

#[test]
fn exponents_of_a_random_instance() {
    let params = RecoveryParams::default();
    let bound = 100 * 100;
    let runs =
        |d: u32,
         seeds: u64,
         found: &dyn Fn(&SparsePoly, &SparsePoly, u64) -> Option<Vec<ExponentVec>>| {
            let mut g = seeded(17);
            let p = random_poly(3, 100, d, 1 << 16, &mut g).unwrap();
            let q = random_poly(3, 100, d, 1 << 16, &mut g).unwrap();
            let want = sorted(p.naive_mul(&q).unwrap().support());
            (0..seeds)
                .filter(|&s| found(&p, &q, s).map(sorted).as_ref() == Some(&want))
                .count()
        };
    // a sparse support with t close to T = 10^4: at tau = 0.5 the game is near its
    // finite-size threshold, as for the known-support game
    let plain = runs(100, 200, &|p, q, s| {
        recover_exponents(p, q, bound, params.eps, 0.5, &mut seeded(s)).unwrap()
    });
    assert!(plain >= 190, "{plain}/200 runs found the sparse support");
    // a sumset filling most of a small simplex needs scored evaluation vectors
    let scored = runs(20, 100, &|p, q, s| {
        let c = params.lambda_candidates;
        recover_exponents_scored(p, q, bound, params.eps, params.tau, c, &mut seeded(s)).unwrap()
    });
    assert!(scored >= 99, "{scored}/100 runs found the dense support");
}

#[test]
fn exponent_recovery_is_rarely_wrong() {
    let eps = 2f64.powi(-10);
    let (mut wrong, mut failed) = (0, 0);
    for seed in 0..1000 {
        let (p, q) = instance(seed, 30);
        let want = sorted(p.naive_mul(&q).unwrap().support());
        let bound = ((p.len() * q.len()) as u64).max(6);
        match recover_exponents(&p, &q, bound, eps, 0.5, &mut seeded(seed ^ 0x5eed)).unwrap() {
            Some(got) => wrong += (sorted(got) != want) as u32,
            None => failed += 1,
        }
    }
    assert!(
        wrong <= 10,
        "{wrong} wrong supports out of 1000 ({failed} failed)"
    );
}

#[test]
fn repeated_single_throws_halve_and_terminate() {
    let (mut slow, mut halving, mut iterations) = (0, 0, 0);
    for seed in 0..1000 {
        let (p, q) = instance(seed, 30);
        let want = p.naive_mul(&q).unwrap();
        let support = want.support();
        let (got, trace) =
            recover_coefficients_lv(&p, &q, &support, &mut seeded(seed + 7)).unwrap();
        assert_eq!(got, want);
        let t = support.len().max(2) as f64;
        if trace.len() > 10 * t.log2().ceil() as usize {
            slow += 1;
        }
        iterations += trace.len();
        halving += trace
            .iter()
            .filter(|it| 2 * it.settled.len() >= it.unknown)
            .count();
    }
    assert!(
        slow <= 10,
        "{slow}/1000 runs exceeded 10 ceil(log2 t) iterations"
    );
    let share = halving as f64 / iterations as f64;
    assert!(
        share >= 0.4,
        "only {share:.3} of iterations settled half the unknowns"
    );
}

/// Terms of `PQ mod Pi` still missing from the running result, by exponent.
fn missing(want: &HashMap<ExponentVec, BigUint>, have: &HashMap<ExponentVec, BigUint>) -> u64 {
    let extra = have
        .iter()
        .filter(|(e, c)| !c.is_zero() && !want.contains_key(*e))
        .count();
    let absent = want.iter().filter(|(e, c)| have.get(*e) != Some(c)).count();
    (extra + absent) as u64
}

#[test]
fn modular_loop_is_flawless_and_adapts_its_bound() {
    let (mut flawless, mut events, mut late) = (0, 0, 0);
    let runs = 300;
    for seed in 0..runs {
        let (p, q) = instance(seed, 30);
        let mut g = seeded(seed + 99);
        let m = reduction_modulus(&p, &q, &mut g).unwrap();
        let pi = m.value();
        let want = p.naive_mul(&q).unwrap().reduce_mod(pi);
        let run = multiply_mod_pi(&p, &q, &m, 200, &mut g).unwrap();
        let target: HashMap<ExponentVec, BigUint> = want
            .terms()
            .iter()
            .map(|t| (t.exp.clone(), t.coeff.magnitude().clone()))
            .collect();

        // replay the trace: every added exponent must belong to PQ
        let mut have: HashMap<ExponentVec, BigUint> = HashMap::new();
        let mut heads = Vec::with_capacity(run.trace.len());
        let mut clean = true;
        for it in &run.trace {
            heads.push((it.terms_bound, missing(&target, &have)));
            for (e, c) in &it.added {
                clean &= target.contains_key(e);
                let slot = have.entry(e.clone()).or_insert_with(BigUint::zero);
                *slot = (&*slot + c) % pi;
            }
        }
        let done = matches!(&run.outcome, ModPiOutcome::Done(r) if *r == want);
        flawless += (clean && done) as u32;

        for (i, &(bound, miss)) in heads.iter().enumerate() {
            if bound >= miss {
                continue;
            }
            events += 1;
            let caught_up = heads[i + 1..]
                .iter()
                .take(3)
                .any(|&(b, m)| b >= 2 * bound || b >= m);
            late += !caught_up as u32;
        }
    }
    assert!(
        flawless >= runs as u32 * 99 / 100,
        "{flawless}/{runs} flawless runs"
    );
    assert!(events > 100, "only {events} undersized bounds seen");
    assert!(
        late * 20 <= events,
        "{late} of {events} undersized bounds did not double within 3 iterations"
    );
}

#[test]
fn safeguards_reject_collisions_of_all_ones_terms() {
    // Without diversification a slot holding m unit terms has c = m and c~ = sum of p^k,
    // so q = c~ / m is far from uniform. The support is every monomial of degree <= 20.
    let (n, d) = (3, 20);
    let basis = first_primes(n, d);
    let bound = basis.bound().clone();
    let terms = 64 * 64;
    let eps = 2f64.powi(-10);
    let mut g = seeded(2020);
    let modulus = choose_pi(&bound, terms, eps, &mut g).unwrap();
    let r = (0.45 * terms as f64) as u64;
    let monomials = all_monomials(n, d);
    let values: Vec<BigUint> = monomials
        .iter()
        .map(|e| {
            e.as_slice()
                .iter()
                .zip(basis.primes())
                .fold(BigUint::one(), |acc, (&k, &p)| {
                    acc * BigUint::from(p).pow(k)
                })
        })
        .collect();
    let (mut slots, mut below, mut smooth, mut accepted) = (0, 0, 0, 0);
    while slots < 100_000 {
        let lambda: Vec<u64> = (0..n).map(|_| g.gen_range(0..r)).collect();
        let mut boxes: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, e) in monomials.iter().enumerate() {
            boxes.entry(e.dot_mod(&lambda, r)).or_default().push(i);
        }
        for (&slot, members) in &boxes {
            if members.len() < 2 {
                continue;
            }
            slots += 1;
            let ctilde = members
                .iter()
                .fold(BigUint::zero(), |acc, &i| acc + &values[i]);
            let inv = modulus.inv(&BigUint::from(members.len())).unwrap();
            let q = modulus.mul(&modulus.reduce_u(&ctilde), &inv);
            if q > bound {
                continue;
            }
            below += 1;
            let Some(k) = smooth_factor(&q, &basis, d) else {
                continue;
            };
            smooth += 1;
            accepted += (ExponentVec(k).dot_mod(&lambda, r) == slot) as u32;
        }
    }
    assert!(
        accepted < 5,
        "{accepted} false acceptances in {slots} collision slots \
         ({below} passed q <= B, {smooth} also factored)"
    );
    println!(
        "{slots} collision slots: {below} passed q <= B, {smooth} factored, {accepted} accepted"
    );
}

#[test]
fn simulated_rounds_follow_the_recurrence() {
    // Later rounds depend on earlier ones, so their spread exceeds the binomial one;
    // compare the seed average against the empirical standard error instead.
    let (t, seeds) = (100_000, 20);
    let rounds = iterate(0.5, 8, 0.0).unwrap();
    let sims: Vec<_> = (0..seeds)
        .map(|s| simulate_game(t, 0.5, s).unwrap())
        .collect();
    for (i, want) in rounds.iter().enumerate() {
        for k in 1..=5 {
            let p = want.p_k(k);
            let xs: Vec<f64> = sims
                .iter()
                .map(|s| s.table.n(i + 1, k) as f64 / t as f64)
                .collect();
            let mean = xs.iter().sum::<f64>() / seeds as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
            let se = (var / seeds as f64).sqrt().max(1.0 / t as f64);
            assert!(
                (mean - p).abs() <= 5.0 * se,
                "round {} k {k}: simulated {mean:.5} +- {se:.5}, recurrence {p:.5}",
                i + 1
            );
        }
    }
}

#[test]
fn simulation_loses_below_threshold() {
    let lost = (0..100)
        .filter(|&s| !simulate_game(10_000, 0.35, s).unwrap().won)
        .count();
    assert!(lost >= 95, "lost only {lost}/100 at tau = 0.35");
}

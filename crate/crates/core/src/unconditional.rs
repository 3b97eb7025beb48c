//! Multiplication without distribution assumptions: repeated single throws with a
//! prime number of boxes, and a consistency check in place of random-quotient reasoning.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use rand::Rng;

use crate::cyclic::{cyclic_mul, eval_at_powers, CyclicPoly, Domain};
use crate::error::{Error, Result};
use crate::numtheory::{
    ceil_log2, first_primes, prime_in_dyadic_interval, random_prime_u64, reduction_prime_bits,
    smooth_factor, Modulus,
};
use crate::poly::{verify_product, ExponentVec, SparsePoly};
use crate::rng::{split, SeedRng};

/// Consecutive iterations without progress before the prime range for `r` is widened.
const STALL_LIMIT: u32 = 4;

/// One pass of the known-support loop.
#[derive(Debug, Clone)]
pub struct LvIteration {
    pub r: u64,
    /// Unknown coefficients at the start of the pass.
    pub unknown: usize,
    /// Coefficients settled during the pass.
    pub settled: Vec<(ExponentVec, BigInt)>,
}

fn random_lambda(n: usize, r: u64, rng: &mut SeedRng) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..r)).collect()
}

/// Exact `P Q` given a superset of its support, by repeated single throws. Always
/// correct when the support really contains `supp(P Q)`.
pub fn recover_coefficients_lv(
    p: &SparsePoly,
    q: &SparsePoly,
    support: &[ExponentVec],
    rng: &mut SeedRng,
) -> Result<(SparsePoly, Vec<LvIteration>)> {
    let n = p.nvars();
    if q.nvars() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: q.nvars(),
        });
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(e) = support.iter().find(|e| e.len() != n) {
        return Err(Error::ArityMismatch {
            left: n,
            right: e.len(),
        });
    }
    let mut coeffs: Vec<Option<BigInt>> = vec![None; support.len()];
    let mut unknown: Vec<usize> = (0..support.len()).collect();
    let mut trace = Vec::new();
    let mut widen = 1u64;
    let mut stalled = 0u32;

    while !unknown.is_empty() {
        let m = unknown.len() as u64;
        let r = random_prime_u64(4 * m * widen + 1, 8 * m * widen - 1, rng)?;
        let lambda = random_lambda(n, r, rng);
        let ru = r as usize;
        let pe = eval_at_powers(p, &lambda, ru, &Domain::Integer, None)?;
        let qe = eval_at_powers(q, &lambda, ru, &Domain::Integer, None)?;
        let mut delta = cyclic_mul(&pe, &qe)?;
        for (e, c) in support.iter().zip(&coeffs) {
            if let Some(c) = c {
                delta.sub_monomial(c, e.dot_mod(&lambda, r) as usize)?;
            }
        }
        let slots: Vec<usize> = unknown
            .iter()
            .map(|&i| support[i].dot_mod(&lambda, r) as usize)
            .collect();
        let mut occupancy = vec![0u32; ru];
        for &s in &slots {
            occupancy[s] += 1;
        }
        let mut settled = Vec::new();
        let mut still = Vec::with_capacity(unknown.len());
        for (&i, &s) in unknown.iter().zip(&slots) {
            if occupancy[s] == 1 {
                let c = delta.get(s).clone();
                settled.push((support[i].clone(), c.clone()));
                coeffs[i] = Some(c);
            } else {
                still.push(i);
            }
        }
        if settled.is_empty() {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                widen *= 2;
                stalled = 0;
            }
        } else {
            stalled = 0;
        }
        trace.push(LvIteration {
            r,
            unknown: unknown.len(),
            settled,
        });
        unknown = still;
    }
    let terms = support
        .into_iter()
        .zip(coeffs)
        .map(|(e, c)| (c.expect("every coefficient settled"), e));
    Ok((SparsePoly::from_terms(n, terms)?, trace))
}

/// One pass of the modular loop.
#[derive(Debug, Clone)]
pub struct ModPiIteration {
    /// Tentative bound on the number of missing terms at the start of the pass.
    pub terms_bound: u64,
    pub r: u64,
    /// Nonzero boxes that failed a check.
    pub failed: usize,
    /// Terms added to the running result.
    pub added: Vec<(ExponentVec, BigUint)>,
}

#[derive(Debug, Clone)]
pub enum ModPiOutcome {
    Done(SparsePoly),
    /// The iteration cap was reached.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct ModPiRun {
    pub outcome: ModPiOutcome,
    pub trace: Vec<ModPiIteration>,
}

/// Monte Carlo `P Q` over `Z/Pi Z`. `P` and `Q` are read modulo `Pi`, which must be a prime
/// with `Pi >= 4 p_n^(d_P + d_Q)`.
pub fn multiply_mod_pi(
    p: &SparsePoly,
    q: &SparsePoly,
    modulus: &Modulus,
    max_iterations: usize,
    rng: &mut SeedRng,
) -> Result<ModPiRun> {
    let n = p.nvars();
    if q.nvars() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: q.nvars(),
        });
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one variable".into()));
    }
    let pi = modulus.value();
    let p = p.reduce_mod(pi);
    let q = q.reduce_mod(pi);
    let d = u32::try_from(p.total_degree() + q.total_degree())
        .map_err(|_| Error::Precondition("total degree exceeds 32 bits".into()))?;
    let basis = first_primes(n, d);
    let bound = basis.bound();
    if *pi < bound * 4u32 {
        return Err(Error::Precondition(format!(
            "modulus {pi} is below 4 p_n^d = {}",
            bound * 4u32
        )));
    }
    let field = Domain::Field(modulus.clone());
    let big = |x: BigUint| BigInt::from_biguint(Sign::Plus, x);

    let mut acc: HashMap<ExponentVec, BigUint> = HashMap::new();
    let mut terms_bound: u64 = 8;
    let mut trace = Vec::new();

    for _ in 0..max_iterations {
        let r = random_prime_u64(8 * terms_bound + 1, 16 * terms_bound - 1, rng)?;
        let ru = r as usize;
        let lambda = random_lambda(n, r, rng);
        let v: Vec<BigUint> = (0..n).map(|_| modulus.random_unit(rng)).collect();
        let w: Vec<BigUint> = (0..n).map(|_| modulus.random_unit(rng)).collect();
        let weights: [Vec<BigInt>; 3] = [
            v.iter().map(|x| big(x.clone())).collect(),
            v.iter()
                .zip(basis.primes())
                .map(|(x, &pr)| big(modulus.mul(x, &BigUint::from(pr))))
                .collect(),
            v.iter()
                .zip(&w)
                .map(|(x, y)| big(modulus.mul(x, y)))
                .collect(),
        ];
        let current =
            SparsePoly::from_terms(n, acc.iter().map(|(e, c)| (big(c.clone()), e.clone())))?;
        let mut deltas: Vec<CyclicPoly> = Vec::with_capacity(3);
        for wl in &weights {
            let pe = eval_at_powers(&p, &lambda, ru, &field, Some(wl))?;
            let qe = eval_at_powers(&q, &lambda, ru, &field, Some(wl))?;
            let re = eval_at_powers(&current, &lambda, ru, &field, Some(wl))?;
            deltas.push(cyclic_mul(&pe, &qe)?.sub(&re)?);
        }
        if deltas.iter().all(|d| d.is_zero()) {
            trace.push(ModPiIteration {
                terms_bound,
                r,
                failed: 0,
                added: Vec::new(),
            });
            return Ok(ModPiRun {
                outcome: ModPiOutcome::Done(current),
                trace,
            });
        }

        let slots: Vec<usize> = (0..ru).filter(|&j| !deltas[0].get(j).is_zero()).collect();
        let firsts: Vec<BigUint> = slots
            .iter()
            .map(|&j| deltas[0].get(j).magnitude().clone())
            .collect();
        let invs = modulus
            .inv_many(&firsts)
            .expect("nonzero residues modulo a prime are invertible");
        let mut failed = 0usize;
        let mut accepted: Vec<(ExponentVec, &BigUint, BigUint)> = Vec::new();
        for ((&j, d1), inv) in slots.iter().zip(&firsts).zip(&invs) {
            let quotient = modulus.mul(deltas[1].get(j).magnitude(), inv);
            let k = if &quotient <= bound {
                smooth_factor(&quotient, &basis, d)
            } else {
                None
            };
            let Some(k) = k else {
                failed += 1;
                continue;
            };
            let k = ExponentVec(k);
            let mut wk = d1.clone();
            let mut vk = BigUint::one();
            for (i, &ki) in k.as_slice().iter().enumerate() {
                if ki != 0 {
                    wk = modulus.mul(&wk, &modulus.pow_u64(&w[i], ki as u64));
                    vk = modulus.mul(&vk, &modulus.pow_u64(&v[i], ki as u64));
                }
            }
            if k.dot_mod(&lambda, r) as usize != j || &wk != deltas[2].get(j).magnitude() {
                failed += 1;
                continue;
            }
            accepted.push((k, d1, vk));
        }
        let vk_invs = modulus
            .inv_many(&accepted.iter().map(|a| a.2.clone()).collect::<Vec<_>>())
            .expect("v is a unit");
        let mut added = Vec::with_capacity(accepted.len());
        for ((k, d1, _), vk_inv) in accepted.into_iter().zip(&vk_invs) {
            let c = modulus.mul(d1, vk_inv);
            let entry = acc.entry(k.clone()).or_insert_with(BigUint::zero);
            *entry = modulus.add(entry, &c);
            added.push((k, c));
        }
        acc.retain(|_, c| !c.is_zero());
        trace.push(ModPiIteration {
            terms_bound,
            r,
            failed,
            added,
        });
        terms_bound = (16 * failed as u64).max(terms_bound / 2).max(1);
    }
    Ok(ModPiRun {
        outcome: ModPiOutcome::Inconclusive,
        trace,
    })
}

/// The working prime for one attempt of [`multiply_unconditional`]: large enough that the
/// product keeps its support modulo it with high probability, and at least `4 p_n^d`.
pub fn reduction_modulus(p: &SparsePoly, q: &SparsePoly, rng: &mut SeedRng) -> Result<Modulus> {
    let n = p.nvars().max(1);
    let terms = (p.len() as u64).saturating_mul(q.len() as u64).max(1);
    let height = BigUint::from(p.len()) * q.len() * p.height() * q.height();
    let coeff_bits = height.bits().max(1);
    let d = u32::try_from(p.total_degree() + q.total_degree())
        .map_err(|_| Error::Precondition("total degree exceeds 32 bits".into()))?;
    let floor = first_primes(n, d).bound() * 4u32;
    let b = reduction_prime_bits(terms, coeff_bits).max(ceil_log2(&floor));
    prime_in_dyadic_interval(b, rng)
}

#[derive(Debug, Clone, Default)]
pub struct UnconditionalReport {
    pub attempts: u32,
    pub fallback: bool,
    /// Working prime of every attempt.
    pub primes: Vec<BigUint>,
    /// Modular-loop iterations of every attempt.
    pub iterations: Vec<usize>,
    pub total_time: Duration,
}

/// Settings for [`multiply_unconditional`].
#[derive(Debug, Clone)]
pub struct UnconditionalParams {
    pub retries: u32,
    pub max_iterations: usize,
}

impl Default for UnconditionalParams {
    fn default() -> Self {
        UnconditionalParams {
            retries: 3,
            max_iterations: 200,
        }
    }
}

/// `P Q` over the integers: support from the modular loop, coefficients from repeated
/// single throws, and a final check at a random point. Falls back to schoolbook
/// multiplication if every attempt fails.
pub fn multiply_unconditional(
    p: &SparsePoly,
    q: &SparsePoly,
    params: &UnconditionalParams,
    rng: &mut SeedRng,
) -> Result<(SparsePoly, UnconditionalReport)> {
    let start = Instant::now();
    let n = p.nvars();
    if q.nvars() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: q.nvars(),
        });
    }
    let mut report = UnconditionalReport::default();
    if n >= 1 {
        for _ in 0..params.retries {
            report.attempts += 1;
            let mut attempt_rng = split(rng);
            let modulus = reduction_modulus(p, q, &mut attempt_rng)?;
            report.primes.push(modulus.value().clone());
            let run = multiply_mod_pi(p, q, &modulus, params.max_iterations, &mut attempt_rng)?;
            report.iterations.push(run.trace.len());
            let ModPiOutcome::Done(reduced) = run.outcome else {
                continue;
            };
            let (product, _) = recover_coefficients_lv(p, q, &reduced.support(), &mut attempt_rng)?;
            if verify_product(p, q, &product, &mut attempt_rng) {
                report.total_time = start.elapsed();
                return Ok((product, report));
            }
        }
    }
    report.fallback = true;
    let product = p.naive_mul(q)?;
    report.total_time = start.elapsed();
    Ok((product, report))
}

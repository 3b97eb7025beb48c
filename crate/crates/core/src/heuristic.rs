//! Fast heuristic multiplication: exponents by prime-weighted evaluation, then
//! coefficients by a three-throw known-support game.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::cyclic::{cyclic_mul, eval_at_powers, eval_univariate, CyclicPoly, Domain};
use crate::error::{Error, Result};
use crate::numtheory::{choose_pi, first_primes, smooth_factor, Modulus, PrimeBasis};
use crate::peeling::{play_discovery, play_known_support, Identify, ThrowAssignment};
use crate::poly::{kronecker, unkronecker, verify_product, ExponentVec, SparsePoly, UniPoly};
use crate::rng::{split, SeedRng};
use crate::unconditional::recover_coefficients_lv;

/// Largest number of boxes the heuristic path will allocate per throw.
pub const MAX_TERMS_BOUND: u64 = 1 << 26;

/// Tuning for the heuristic path.
#[derive(Debug, Clone)]
pub struct RecoveryParams {
    /// Boxes per ball.
    pub tau: f64,
    /// Target failure probability of the exponent phase.
    pub eps: f64,
    /// Upper bound on the number of terms of the product, if known.
    pub terms_bound: Option<u64>,
    /// Fresh attempts before falling back to schoolbook multiplication.
    pub retries: u32,
    /// Random candidates per evaluation vector in the coefficient phase; the one with the
    /// most even box occupancy wins. 1 means plain uniform sampling.
    pub lambda_candidates: usize,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            tau: 0.45,
            eps: 2f64.powi(-20),
            terms_bound: None,
            retries: 3,
            lambda_candidates: 12,
        }
    }
}

/// Is `a = c b (mod r)` for some scalar `c`?
fn is_multiple(a: &[u64], b: &[u64], r: u64) -> Option<bool> {
    let unit = b.iter().position(|&x| x.gcd(&r) == 1);
    if let Some(k) = unit {
        let inv = BigUint::from(b[k])
            .modinv(&BigUint::from(r))
            .and_then(|x| x.to_u64())
            .expect("unit has an inverse");
        let c = (a[k] as u128 * inv as u128 % r as u128) as u64;
        return Some(
            a.iter()
                .zip(b)
                .all(|(&x, &y)| (c as u128 * y as u128 % r as u128) as u64 == x),
        );
    }
    if r > 1 << 16 {
        return None;
    }
    Some((0..r).any(|c| {
        a.iter()
            .zip(b)
            .all(|(&x, &y)| (c as u128 * y as u128 % r as u128) as u64 == x)
    }))
}

/// Whether `a` and `b` are collinear modulo `r`; `None` when undecided.
pub fn collinear_mod(a: &[u64], b: &[u64], r: u64) -> Option<bool> {
    match (is_multiple(a, b, r), is_multiple(b, a, r)) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

/// A vector whose entries share a factor `g` with `r` only reaches the multiples of
/// `g`, wasting all other boxes.
fn spans_all_boxes(lambda: &[u64], r: u64) -> bool {
    lambda.iter().fold(r, |g, &x| g.gcd(&x)) == 1
}

/// Three uniform vectors in `{0..r-1}^n`, pairwise non-collinear modulo `r`, each with
/// entries jointly coprime to `r`.
pub fn sample_lambda_triple(n: usize, r: u64, rng: &mut SeedRng) -> Result<[Vec<u64>; 3]> {
    if n < 2 || r < 2 {
        return Err(Error::Precondition(format!(
            "lambda triples need n >= 2 and r >= 2 (n = {n}, r = {r})"
        )));
    }
    for _ in 0..1000 {
        let cand: [Vec<u64>; 3] =
            std::array::from_fn(|_| (0..n).map(|_| rng.gen_range(0..r)).collect());
        let ok = cand.iter().all(|l| spans_all_boxes(l, r))
            && [(0, 1), (0, 2), (1, 2)]
                .iter()
                .all(|&(i, j)| collinear_mod(&cand[i], &cand[j], r) == Some(false));
        if ok {
            return Ok(cand);
        }
    }
    Err(Error::DegenerateLambda { n, r })
}

/// Sum of squared box occupancies when `support` is hashed by `lambda` modulo `r`.
pub fn squared_occupancy(support: &[ExponentVec], lambda: &[u64], r: u64) -> u64 {
    let mut occ = vec![0u64; r as usize];
    for e in support {
        occ[e.dot_mod(lambda, r) as usize] += 1;
    }
    occ.iter().map(|k| k * k).sum()
}

/// Like [`sample_lambda_triple`], but each vector is the best of `candidates` uniform
/// draws by [`squared_occupancy`] on a known support.
pub fn sample_lambda_triple_scored(
    n: usize,
    r: u64,
    support: &[ExponentVec],
    candidates: usize,
    rng: &mut SeedRng,
) -> Result<[Vec<u64>; 3]> {
    if candidates <= 1 {
        return sample_lambda_triple(n, r, rng);
    }
    if n < 2 || r < 2 {
        return Err(Error::Precondition(format!(
            "lambda triples need n >= 2 and r >= 2 (n = {n}, r = {r})"
        )));
    }
    let mut chosen: Vec<Vec<u64>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut best: Option<(u64, Vec<u64>)> = None;
        let mut drawn = 0;
        for _ in 0..1000 {
            if drawn == candidates {
                break;
            }
            let cand: Vec<u64> = (0..n).map(|_| rng.gen_range(0..r)).collect();
            if !spans_all_boxes(&cand, r)
                || !chosen
                    .iter()
                    .all(|c| collinear_mod(c, &cand, r) == Some(false))
            {
                continue;
            }
            drawn += 1;
            let score = squared_occupancy(support, &cand, r);
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, cand));
            }
        }
        match best {
            Some((_, cand)) => chosen.push(cand),
            None => return Err(Error::DegenerateLambda { n, r }),
        }
    }
    Ok([chosen[0].clone(), chosen[1].clone(), chosen[2].clone()])
}

/// Time spent in cyclic products, for reporting.
#[derive(Debug, Clone, Copy, Default)]
pub struct MulTimer(pub Duration);

impl MulTimer {
    fn mul(&mut self, a: &CyclicPoly, b: &CyclicPoly) -> Result<CyclicPoly> {
        let start = Instant::now();
        let c = cyclic_mul(a, b);
        self.0 += start.elapsed();
        c
    }
}

fn boxes_for(tau: f64, t: u64) -> Result<u64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Precondition(format!("tau = {tau} must be positive")));
    }
    let r = (tau * t as f64).floor() as u64;
    if r < 2 {
        return Err(Error::Precondition(format!(
            "tau * t = {} leaves fewer than two boxes",
            tau * t as f64
        )));
    }
    Ok(r)
}

/// Coefficients of `P Q` on a known support. `Ok(None)` means the game was lost (or the
/// support was incomplete); a returned polynomial is always the exact product.
pub fn recover_coefficients(
    p: &SparsePoly,
    q: &SparsePoly,
    support: &[ExponentVec],
    tau: f64,
    rng: &mut SeedRng,
) -> Result<Option<SparsePoly>> {
    recover_coefficients_timed(p, q, support, tau, 1, rng, &mut MulTimer::default())
}

/// [`recover_coefficients`] with each evaluation vector chosen as the best of
/// `candidates` draws by box occupancy.
pub fn recover_coefficients_scored(
    p: &SparsePoly,
    q: &SparsePoly,
    support: &[ExponentVec],
    tau: f64,
    candidates: usize,
    rng: &mut SeedRng,
) -> Result<Option<SparsePoly>> {
    recover_coefficients_timed(
        p,
        q,
        support,
        tau,
        candidates,
        rng,
        &mut MulTimer::default(),
    )
}

pub(crate) fn recover_coefficients_timed(
    p: &SparsePoly,
    q: &SparsePoly,
    support: &[ExponentVec],
    tau: f64,
    candidates: usize,
    rng: &mut SeedRng,
    timer: &mut MulTimer,
) -> Result<Option<SparsePoly>> {
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
    let t = support.len();
    if n < 2 || t < 6 {
        return Err(Error::Precondition(format!(
            "known-support recovery needs n >= 2 and t >= 6 (n = {n}, t = {t})"
        )));
    }
    if let Some(e) = support.iter().find(|e| e.len() != n) {
        return Err(Error::ArityMismatch {
            left: n,
            right: e.len(),
        });
    }
    let r = boxes_for(tau, t as u64)?;
    let lambdas = sample_lambda_triple_scored(n, r, &support, candidates, rng)?;
    let mut channels = Vec::with_capacity(3);
    let mut rows = Vec::with_capacity(3);
    for lambda in &lambdas {
        let pe = eval_at_powers(p, lambda, r as usize, &Domain::Integer, None)?;
        let qe = eval_at_powers(q, lambda, r as usize, &Domain::Integer, None)?;
        channels.push(vec![timer.mul(&pe, &qe)?]);
        rows.push(
            support
                .iter()
                .map(|e| e.dot_mod(lambda, r) as usize)
                .collect(),
        );
    }
    let assignment = ThrowAssignment::new(vec![r as usize; 3], rows)?;
    let out = play_known_support(&assignment, channels)?;
    if !out.won() || out.residual.iter().any(|ch| !ch[0].is_zero()) {
        return Ok(None);
    }
    let terms = support
        .into_iter()
        .zip(out.values)
        .map(|(e, v)| (v.expect("won game recovers every ball").swap_remove(0), e));
    Ok(Some(SparsePoly::from_terms(n, terms)?))
}

/// Reads exponents off the quotient of the prime-weighted channel by the plain one.
struct QuotientIdentifier<'a> {
    modulus: &'a Modulus,
    inverses: HashMap<BigUint, BigUint>,
    basis: &'a PrimeBasis,
    lambdas: &'a [Vec<u64>; 3],
    r: u64,
}

impl Identify for QuotientIdentifier<'_> {
    type Key = ExponentVec;

    fn identify(&mut self, throw: usize, slot: usize, payload: &[BigInt]) -> Option<ExponentVec> {
        let c = payload[0].magnitude();
        let inv = match self.inverses.get(c) {
            Some(inv) => inv.clone(),
            None => self.modulus.inv(c)?,
        };
        let q = self.modulus.mul(payload[1].magnitude(), &inv);
        if &q > self.basis.bound() {
            return None;
        }
        let k = ExponentVec(smooth_factor(&q, self.basis, self.basis.degree())?);
        (k.dot_mod(&self.lambdas[throw], self.r) as usize == slot).then_some(k)
    }

    fn slot_of(&self, key: &ExponentVec, throw: usize) -> usize {
        key.dot_mod(&self.lambdas[throw], self.r) as usize
    }

    fn prepare(&mut self, payloads: &[Vec<BigInt>]) {
        self.inverses = batch_inverses(self.modulus, payloads.iter().map(|p| p[0].magnitude()));
    }
}

/// Inverses of the nonzero values among `xs`, keyed by value, from one batched inversion.
fn batch_inverses<'a>(
    modulus: &Modulus,
    xs: impl Iterator<Item = &'a BigUint>,
) -> HashMap<BigUint, BigUint> {
    let mut units: Vec<BigUint> = xs.filter(|x| !x.is_zero()).cloned().collect();
    units.sort_unstable();
    units.dedup();
    match modulus.inv_many(&units) {
        Some(invs) => units.into_iter().zip(invs).collect(),
        // some value shares a factor with the modulus; fall back to one at a time
        None => HashMap::new(),
    }
}

/// Support of `P Q` given a bound `T >= t_PQ`. Monte Carlo: a returned set is wrong with
/// probability `O(eps)`. `Ok(None)` means some box never resolved.
pub fn recover_exponents(
    p: &SparsePoly,
    q: &SparsePoly,
    terms_bound: u64,
    eps: f64,
    tau: f64,
    rng: &mut SeedRng,
) -> Result<Option<Vec<ExponentVec>>> {
    recover_exponents_timed(
        p,
        q,
        terms_bound,
        eps,
        tau,
        1,
        rng,
        &mut MulTimer::default(),
    )
}

/// [`recover_exponents`] with each evaluation vector chosen as the best of `candidates`
/// draws by box occupancy on a random sample of `supp(P) + supp(Q)`, which contains the
/// unknown support of `P Q`.
pub fn recover_exponents_scored(
    p: &SparsePoly,
    q: &SparsePoly,
    terms_bound: u64,
    eps: f64,
    tau: f64,
    candidates: usize,
    rng: &mut SeedRng,
) -> Result<Option<Vec<ExponentVec>>> {
    recover_exponents_timed(
        p,
        q,
        terms_bound,
        eps,
        tau,
        candidates,
        rng,
        &mut MulTimer::default(),
    )
}

/// Up to `size` distinct exponents `a + b` with `a` in `supp(P)` and `b` in `supp(Q)`.
fn sample_sumset(
    p: &SparsePoly,
    q: &SparsePoly,
    size: usize,
    rng: &mut SeedRng,
) -> Vec<ExponentVec> {
    let (pt, qt) = (p.terms(), q.terms());
    let mut seen = HashSet::with_capacity(size);
    for _ in 0..4 * size {
        if seen.len() == size {
            break;
        }
        let a = &pt[rng.gen_range(0..pt.len())].exp;
        let b = &qt[rng.gen_range(0..qt.len())].exp;
        seen.insert(ExponentVec(
            a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
        ));
    }
    seen.into_iter().collect()
}

pub(crate) fn recover_exponents_timed(
    p: &SparsePoly,
    q: &SparsePoly,
    terms_bound: u64,
    eps: f64,
    tau: f64,
    candidates: usize,
    rng: &mut SeedRng,
    timer: &mut MulTimer,
) -> Result<Option<Vec<ExponentVec>>> {
    let n = p.nvars();
    if q.nvars() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: q.nvars(),
        });
    }
    if n < 2 || terms_bound < 6 {
        return Err(Error::Precondition(format!(
            "exponent recovery needs n >= 2 and T >= 6 (n = {n}, T = {terms_bound})"
        )));
    }
    if p.is_zero() || q.is_zero() {
        return Ok(Some(Vec::new()));
    }
    let d = u32::try_from(p.total_degree() + q.total_degree())
        .map_err(|_| Error::Precondition("total degree exceeds 32 bits".into()))?;
    let basis = first_primes(n, d);
    let bound = basis.bound().max(&BigUint::from(2u32)).clone();
    let modulus = choose_pi(&bound, terms_bound, eps, rng)?;
    let r = boxes_for(tau, terms_bound)?;
    let lambdas = if candidates > 1 {
        let sample = sample_sumset(p, q, r as usize, rng);
        sample_lambda_triple_scored(n, r, &sample, candidates, rng)?
    } else {
        sample_lambda_triple(n, r, rng)?
    };
    let field = Domain::Field(modulus.clone());

    let v: Vec<BigInt> = (0..n)
        .map(|_| BigInt::from_biguint(Sign::Plus, modulus.random_unit(rng)))
        .collect();
    let vp: Vec<BigInt> = v
        .iter()
        .zip(basis.primes())
        .map(|(vi, &pi)| field.mul(vi, &BigInt::from(pi)))
        .collect();

    let mut channels = Vec::with_capacity(3);
    for lambda in &lambdas {
        let mut pair = Vec::with_capacity(2);
        for w in [&v, &vp] {
            let pe = eval_at_powers(p, lambda, r as usize, &field, Some(w))?;
            let qe = eval_at_powers(q, lambda, r as usize, &field, Some(w))?;
            pair.push(timer.mul(&pe, &qe)?);
        }
        channels.push(pair);
    }
    let mut ident = QuotientIdentifier {
        modulus: &modulus,
        inverses: HashMap::new(),
        basis: &basis,
        lambdas: &lambdas,
        r,
    };
    let cap = (4 * terms_bound as usize).max(16);
    let out = play_discovery(channels, &mut ident, cap)?;
    if !out.unresolved.is_empty() {
        return Ok(None);
    }
    let mut exps: Vec<ExponentVec> = out.terms.into_iter().map(|(k, _)| k).collect();
    exps.sort_unstable_by(|a, b| b.cmp(a));
    Ok(Some(exps))
}

/// How a heuristic multiplication went.
#[derive(Debug, Clone, Default)]
pub struct HeuristicReport {
    pub attempts: u32,
    pub fallback: bool,
    pub terms_bound: u64,
    pub exponent_time: Duration,
    pub coefficient_time: Duration,
    pub cyclic_mul_time: Duration,
    pub total_time: Duration,
}

/// `P Q` by exponent recovery and then coefficient recovery, verified at a random point.
/// Falls back to schoolbook multiplication when the inputs are too small or every attempt
/// fails.
pub fn multiply_heuristic(
    p: &SparsePoly,
    q: &SparsePoly,
    params: &RecoveryParams,
    rng: &mut SeedRng,
) -> Result<(SparsePoly, HeuristicReport)> {
    let start = Instant::now();
    let n = p.nvars();
    if q.nvars() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: q.nvars(),
        });
    }
    let mut report = HeuristicReport::default();
    let naive_bound = (p.len() as u64).saturating_mul(q.len() as u64);
    let terms_bound = params
        .terms_bound
        .map_or(naive_bound, |b| b.min(naive_bound))
        .min(MAX_TERMS_BOUND);
    report.terms_bound = terms_bound;

    if n >= 2 && terms_bound >= 6 {
        let mut timer = MulTimer::default();
        for _ in 0..params.retries {
            report.attempts += 1;
            let mut attempt_rng = split(rng);
            let t0 = Instant::now();
            let exps = recover_exponents_timed(
                p,
                q,
                terms_bound,
                params.eps,
                params.tau,
                params.lambda_candidates,
                &mut attempt_rng,
                &mut timer,
            )?;
            report.exponent_time += t0.elapsed();
            let Some(exps) = exps else { continue };
            let t1 = Instant::now();
            let product = if exps.len() < 6 {
                Some(recover_coefficients_lv(p, q, &exps, &mut attempt_rng)?.0)
            } else {
                recover_coefficients_timed(
                    p,
                    q,
                    &exps,
                    params.tau,
                    params.lambda_candidates,
                    &mut attempt_rng,
                    &mut timer,
                )?
            };
            report.coefficient_time += t1.elapsed();
            if let Some(product) = product {
                if verify_product(p, q, &product, &mut attempt_rng) {
                    report.cyclic_mul_time = timer.0;
                    report.total_time = start.elapsed();
                    return Ok((product, report));
                }
            }
        }
        report.cyclic_mul_time = timer.0;
    }
    report.fallback = true;
    let product = p.naive_mul(q)?;
    report.total_time = start.elapsed();
    Ok((product, report))
}

/// Box counts `2 ceil(tau T / 2) + i` for `i = 1, 2, 3`, nudged upward if any pair
/// shares a factor.
pub fn coprime_box_counts(tau: f64, terms_bound: u64) -> [u64; 3] {
    let half = (tau * terms_bound as f64 / 2.0).ceil() as u64;
    let mut r = [2 * half + 1, 2 * half + 2, 2 * half + 3];
    loop {
        let clash = [(0, 1), (0, 2), (1, 2)]
            .into_iter()
            .find(|&(i, j)| r[i].gcd(&r[j]) != 1);
        match clash {
            Some((_, j)) => r[j] += 1,
            None => return r,
        }
    }
}

struct DerivativeIdentifier<'a> {
    modulus: &'a Modulus,
    inverses: HashMap<BigUint, BigUint>,
    degree: &'a BigUint,
    r: [u64; 3],
}

impl Identify for DerivativeIdentifier<'_> {
    type Key = BigUint;

    fn identify(&mut self, throw: usize, slot: usize, payload: &[BigInt]) -> Option<BigUint> {
        let c = payload[0].magnitude();
        let inv = match self.inverses.get(c) {
            Some(inv) => inv.clone(),
            None => self.modulus.inv(c)?,
        };
        let e = self.modulus.mul(payload[1].magnitude(), &inv);
        (&e <= self.degree && self.slot_of(&e, throw) == slot).then_some(e)
    }

    fn prepare(&mut self, payloads: &[Vec<BigInt>]) {
        self.inverses = batch_inverses(self.modulus, payloads.iter().map(|p| p[0].magnitude()));
    }

    fn slot_of(&self, key: &BigUint, throw: usize) -> usize {
        (key % self.r[throw])
            .to_usize()
            .expect("slot fits in usize")
    }
}

/// Support of `P Q` for univariate inputs with arbitrarily large exponents. The three
/// throws use pairwise coprime box counts and the exponent is read from the ratio of the
/// `x R'(x)` channel to the `R` channel.
pub fn recover_exponents_supersparse(
    p: &UniPoly,
    q: &UniPoly,
    terms_bound: u64,
    eps: f64,
    tau: f64,
    rng: &mut SeedRng,
) -> Result<Option<Vec<BigUint>>> {
    if terms_bound < 1 {
        return Err(Error::Precondition("T must be positive".into()));
    }
    if p.is_zero() || q.is_zero() {
        return Ok(Some(Vec::new()));
    }
    let degree = p.degree() + q.degree();
    let scale = degree.clone().max(BigUint::from(2u32));
    let modulus = choose_pi(&scale, terms_bound, eps, rng)?;
    let field = Domain::Field(modulus.clone());
    let r = coprime_box_counts(tau, terms_bound);
    let v = BigInt::from_biguint(Sign::Plus, modulus.random_unit(rng));

    let mut channels = Vec::with_capacity(3);
    for &ri in &r {
        let ri = ri as usize;
        let pe = eval_univariate(p, ri, &field, Some(&v), false)?;
        let qe = eval_univariate(q, ri, &field, Some(&v), false)?;
        let pd = eval_univariate(p, ri, &field, Some(&v), true)?;
        let qd = eval_univariate(q, ri, &field, Some(&v), true)?;
        let plain = cyclic_mul(&pe, &qe)?;
        let deriv = cyclic_mul(&pd, &qe)?.add(&cyclic_mul(&pe, &qd)?)?;
        channels.push(vec![plain, deriv]);
    }
    let mut ident = DerivativeIdentifier {
        modulus: &modulus,
        inverses: HashMap::new(),
        degree: &degree,
        r,
    };
    let cap = (4 * terms_bound as usize).max(16);
    let out = play_discovery(channels, &mut ident, cap)?;
    if !out.unresolved.is_empty() {
        return Ok(None);
    }
    let mut exps: Vec<BigUint> = out.terms.into_iter().map(|(e, _)| e).collect();
    exps.sort_unstable_by(|a, b| b.cmp(a));
    Ok(Some(exps))
}

/// Multivariate support through Kronecker packing and the univariate supersparse path.
pub fn recover_exponents_kronecker(
    p: &SparsePoly,
    q: &SparsePoly,
    terms_bound: u64,
    eps: f64,
    tau: f64,
    rng: &mut SeedRng,
) -> Result<Option<Vec<ExponentVec>>> {
    if p.nvars() != q.nvars() {
        return Err(Error::ArityMismatch {
            left: p.nvars(),
            right: q.nvars(),
        });
    }
    let bounds: Vec<u64> = p
        .partial_degrees()
        .iter()
        .zip(q.partial_degrees())
        .map(|(&a, b)| a as u64 + b as u64 + 1)
        .collect();
    let pk = kronecker(p, &bounds)?;
    let qk = kronecker(q, &bounds)?;
    let Some(exps) = recover_exponents_supersparse(&pk, &qk, terms_bound, eps, tau, rng)? else {
        return Ok(None);
    };
    let packed = UniPoly::from_terms(exps.into_iter().map(|e| (BigInt::one(), e)));
    let unpacked = unkronecker(&packed, &bounds)?;
    Ok(Some(unpacked.support()))
}

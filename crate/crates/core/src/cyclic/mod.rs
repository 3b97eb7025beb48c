//! Arithmetic in `A[u]/(u^r - 1)` and evaluation of sparse polynomials at `u^lambda`.
//!
//! Two coefficient domains are supported: the integers (exact, unbounded) and a prime
//! field `Z/pZ`. Field elements are stored as their representatives in `[0, p)`.
//!
//! Multiplication is tiered. Sparse operands, and every operand below
//! [`MulConfig::schoolbook_below`], go through a schoolbook loop over nonzero entries.
//! Otherwise the product is taken by transforms: directly modulo `p` when `p` is a
//! word-size prime with enough 2-adicity, else over several transform primes with CRT.

pub mod ntt;

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numtheory::Modulus;
use crate::poly::{SparsePoly, UniPoly};
use ntt::NttPrime;

/// Coefficient ring of a cyclic algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Integer,
    Field(Modulus),
}

impl Domain {
    pub fn normalize(&self, x: BigInt) -> BigInt {
        match self {
            Domain::Integer => x,
            Domain::Field(m) => x.mod_floor(m.signed()),
        }
    }

    pub fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.normalize(a + b)
    }

    pub fn sub(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.normalize(a - b)
    }

    pub fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.normalize(a * b)
    }

    /// Multiplicative inverse, if `x` is a unit.
    pub fn inv(&self, x: &BigInt) -> Option<BigInt> {
        match self {
            Domain::Integer => (x.abs().is_one()).then(|| x.clone()),
            Domain::Field(m) => m
                .inv(&m.reduce(x))
                .map(|v| BigInt::from_biguint(Sign::Plus, v)),
        }
    }

    pub fn pow(&self, x: &BigInt, e: &BigUint) -> BigInt {
        match self {
            Domain::Integer => {
                let e = e.to_usize().expect("integer power exponent too large");
                num_traits::pow(x.clone(), e)
            }
            Domain::Field(m) => BigInt::from_biguint(Sign::Plus, m.pow(&m.reduce(x), e)),
        }
    }

    pub fn modulus(&self) -> Option<&Modulus> {
        match self {
            Domain::Integer => None,
            Domain::Field(m) => Some(m),
        }
    }
}

/// An element of `A[u]/(u^r - 1)`; index `j` holds the coefficient of `u^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicPoly {
    domain: Domain,
    coeffs: Vec<BigInt>,
}

impl CyclicPoly {
    pub fn zero(domain: Domain, r: usize) -> Self {
        assert!(r >= 1, "cyclic length must be positive");
        CyclicPoly {
            domain,
            coeffs: vec![BigInt::zero(); r],
        }
    }

    pub fn from_coeffs(domain: Domain, coeffs: Vec<BigInt>) -> Self {
        assert!(!coeffs.is_empty(), "cyclic length must be positive");
        let coeffs = coeffs.into_iter().map(|c| domain.normalize(c)).collect();
        CyclicPoly { domain, coeffs }
    }

    pub fn one(domain: Domain, r: usize) -> Self {
        let mut p = Self::zero(domain, r);
        p.coeffs[0] = BigInt::one();
        p
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn get(&self, slot: usize) -> &BigInt {
        &self.coeffs[slot]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|c| !c.is_zero()).count()
    }

    fn check_compatible(&self, other: &CyclicPoly) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &CyclicPoly) -> Result<CyclicPoly> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| self.domain.add(a, b))
            .collect();
        Ok(CyclicPoly {
            domain: self.domain.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &CyclicPoly) -> Result<CyclicPoly> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| self.domain.sub(a, b))
            .collect();
        Ok(CyclicPoly {
            domain: self.domain.clone(),
            coeffs,
        })
    }

    /// `self -= c u^slot`.
    pub fn sub_monomial(&mut self, c: &BigInt, slot: usize) -> Result<()> {
        let len = self.len();
        let entry = self
            .coeffs
            .get_mut(slot)
            .ok_or(Error::SlotOutOfRange { slot, len })?;
        let updated = self.domain.sub(entry, c);
        *entry = updated;
        Ok(())
    }

    /// `self += c u^slot`.
    pub fn add_monomial(&mut self, c: &BigInt, slot: usize) -> Result<()> {
        let len = self.len();
        let entry = self
            .coeffs
            .get_mut(slot)
            .ok_or(Error::SlotOutOfRange { slot, len })?;
        let updated = self.domain.add(entry, c);
        *entry = updated;
        Ok(())
    }
}

/// Which multiplication routine handled a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulStrategy {
    Schoolbook,
    SingleTransform,
    MultiTransform,
}

/// Tuning knobs for [`cyclic_mul_with`].
#[derive(Debug, Clone)]
pub struct MulConfig {
    /// Lengths below this always use schoolbook multiplication.
    pub schoolbook_below: usize,
    /// Pin a strategy (for benchmarking and tests); falls back when inapplicable.
    pub force: Option<MulStrategy>,
}

impl Default for MulConfig {
    fn default() -> Self {
        MulConfig {
            schoolbook_below: 64,
            force: None,
        }
    }
}

pub fn cyclic_mul(a: &CyclicPoly, b: &CyclicPoly) -> Result<CyclicPoly> {
    cyclic_mul_with(a, b, &MulConfig::default()).map(|(c, _)| c)
}

fn limbs(x: &BigInt) -> u64 {
    x.bits().div_ceil(64).max(1)
}

pub fn cyclic_mul_with(
    a: &CyclicPoly,
    b: &CyclicPoly,
    cfg: &MulConfig,
) -> Result<(CyclicPoly, MulStrategy)> {
    a.check_compatible(b)?;
    let r = a.len();
    let nz_a: Vec<usize> = (0..r).filter(|&i| !a.coeffs[i].is_zero()).collect();
    let nz_b: Vec<usize> = (0..r).filter(|&i| !b.coeffs[i].is_zero()).collect();
    if nz_a.is_empty() || nz_b.is_empty() {
        return Ok((
            CyclicPoly::zero(a.domain.clone(), r),
            MulStrategy::Schoolbook,
        ));
    }
    let max_a = a
        .coeffs
        .iter()
        .map(|c| c.magnitude())
        .max()
        .unwrap()
        .clone();
    let max_b = b
        .coeffs
        .iter()
        .map(|c| c.magnitude())
        .max()
        .unwrap()
        .clone();
    let overlap = nz_a.len().min(nz_b.len()) as u64;
    let bound_bits = max_a.bits() + max_b.bits() + 64 - overlap.leading_zeros() as u64;

    let single = single_transform_prime(&a.domain, r);
    let strategy = match cfg.force {
        Some(MulStrategy::SingleTransform) if single.is_some() => MulStrategy::SingleTransform,
        Some(MulStrategy::SingleTransform) | Some(MulStrategy::MultiTransform) => {
            MulStrategy::MultiTransform
        }
        Some(MulStrategy::Schoolbook) => MulStrategy::Schoolbook,
        None if r < cfg.schoolbook_below => MulStrategy::Schoolbook,
        None => {
            let word = limbs(&BigInt::from_biguint(Sign::Plus, max_a.clone()))
                * limbs(&BigInt::from_biguint(Sign::Plus, max_b.clone()));
            let sparse_cost = nz_a.len() as u64 * nz_b.len() as u64 * (4 + 2 * word);
            let size = (2 * r as u64 - 1).next_power_of_two();
            let transforms = if single.is_some() {
                1
            } else {
                (bound_bits + 2) / 61 + 1
            };
            let dense_cost = transforms
                * (3 * size * (64 - size.leading_zeros() as u64) / 2 + 4 * r as u64)
                + transforms * transforms * r as u64;
            if sparse_cost <= dense_cost {
                MulStrategy::Schoolbook
            } else if single.is_some() {
                MulStrategy::SingleTransform
            } else {
                MulStrategy::MultiTransform
            }
        }
    };

    let coeffs = match strategy {
        MulStrategy::Schoolbook => schoolbook(a, b, &nz_a, &nz_b),
        MulStrategy::SingleTransform => {
            let np = single.unwrap();
            let ra: Vec<u64> = a.coeffs.iter().map(|c| c.to_u64().unwrap()).collect();
            let rb: Vec<u64> = b.coeffs.iter().map(|c| c.to_u64().unwrap()).collect();
            np.cyclic_convolve(&ra, &rb)
                .into_iter()
                .map(BigInt::from)
                .collect()
        }
        MulStrategy::MultiTransform => {
            let raw = ntt::cyclic_convolve_integers(&a.coeffs, &b.coeffs, bound_bits);
            raw.into_iter().map(|c| a.domain.normalize(c)).collect()
        }
    };
    let out = CyclicPoly {
        domain: a.domain.clone(),
        coeffs,
    };
    #[cfg(debug_assertions)]
    if a.domain == Domain::Integer {
        let cap = BigUint::from(r) * &max_a * &max_b;
        debug_assert!(out.coeffs.iter().all(|c| *c.magnitude() <= cap));
    }
    Ok((out, strategy))
}

fn single_transform_prime(domain: &Domain, r: usize) -> Option<NttPrime> {
    let p = domain.modulus()?.as_u64()?;
    let np = NttPrime::new(p)?;
    np.supports_length(r).then_some(np)
}

fn schoolbook(a: &CyclicPoly, b: &CyclicPoly, nz_a: &[usize], nz_b: &[usize]) -> Vec<BigInt> {
    let r = a.len();
    let mut acc = vec![BigInt::zero(); r];
    for &i in nz_a {
        let ai = &a.coeffs[i];
        for &k in nz_b {
            let j = if i + k >= r { i + k - r } else { i + k };
            acc[j] += ai * &b.coeffs[k];
        }
    }
    match &a.domain {
        Domain::Integer => acc,
        Domain::Field(m) => acc
            .into_iter()
            .map(|c| {
                if c.is_zero() {
                    c
                } else {
                    c.mod_floor(m.signed())
                }
            })
            .collect(),
    }
}

/// Per-variable cache of `w^e` in the domain.
struct PowerCache<'a> {
    domain: &'a Domain,
    weights: &'a [BigInt],
    cache: Vec<HashMap<u32, BigInt>>,
}

impl<'a> PowerCache<'a> {
    fn new(domain: &'a Domain, weights: &'a [BigInt]) -> Self {
        PowerCache {
            domain,
            weights,
            cache: vec![HashMap::new(); weights.len()],
        }
    }

    fn get(&mut self, var: usize, e: u32) -> &BigInt {
        let (domain, w) = (self.domain, &self.weights[var]);
        self.cache[var]
            .entry(e)
            .or_insert_with(|| domain.pow(w, &BigUint::from(e)))
    }
}

/// `P(w_1 u^lambda_1, ..., w_n u^lambda_n)` in `A[u]/(u^r - 1)`; weights default to 1.
pub fn eval_at_powers(
    p: &SparsePoly,
    lambda: &[u64],
    r: usize,
    domain: &Domain,
    weights: Option<&[BigInt]>,
) -> Result<CyclicPoly> {
    let n = p.nvars();
    if lambda.len() != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: lambda.len(),
        });
    }
    let weights: Option<Vec<BigInt>> = match weights {
        None => None,
        Some(w) => {
            if w.len() != n {
                return Err(Error::ArityMismatch {
                    left: n,
                    right: w.len(),
                });
            }
            let mut reduced = Vec::with_capacity(n);
            for (var, wi) in w.iter().enumerate() {
                let wi = domain.normalize(wi.clone());
                if matches!(domain, Domain::Field(_)) && wi.is_zero() {
                    return Err(Error::NonInvertibleWeight { var });
                }
                reduced.push(wi);
            }
            Some(reduced)
        }
    };
    let mut out = CyclicPoly::zero(domain.clone(), r);
    let mut cache = weights.as_deref().map(|w| PowerCache::new(domain, w));
    for t in p.terms() {
        let slot = t.exp.dot_mod(lambda, r as u64) as usize;
        let mut value = domain.normalize(t.coeff.clone());
        if let Some(cache) = cache.as_mut() {
            for (var, &e) in t.exp.as_slice().iter().enumerate() {
                if e != 0 {
                    value = domain.mul(&value, cache.get(var, e));
                }
            }
        }
        out.add_monomial(&value, slot)?;
    }
    Ok(out)
}

/// Univariate evaluation at `w u` in `A[u]/(u^r - 1)`. With `derivative`, evaluates
/// `x P'(x)` instead, so each term `c x^e` contributes `e c w^e`.
pub fn eval_univariate(
    p: &UniPoly,
    r: usize,
    domain: &Domain,
    weight: Option<&BigInt>,
    derivative: bool,
) -> Result<CyclicPoly> {
    let weight = weight.map(|w| domain.normalize(w.clone()));
    if let (Some(w), Domain::Field(_)) = (&weight, domain) {
        if w.is_zero() {
            return Err(Error::NonInvertibleWeight { var: 0 });
        }
    }
    let rb = BigUint::from(r);
    let mut out = CyclicPoly::zero(domain.clone(), r);
    for (c, e) in p.terms() {
        let slot = (e % &rb).to_usize().unwrap();
        let mut value = domain.normalize(c.clone());
        if let Some(w) = &weight {
            value = domain.mul(&value, &domain.pow(w, e));
        }
        if derivative {
            value = domain.mul(&value, &BigInt::from_biguint(Sign::Plus, e.clone()));
        }
        out.add_monomial(&value, slot)?;
    }
    Ok(out)
}

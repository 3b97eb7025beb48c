//! Primes, modular arithmetic, and smooth factorization over the first `n` primes.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{seeded, SeedRng};

/// Rounds of the strong probable-prime test on big candidates; 4^-32 = 2^-64.
const MR_ROUNDS: usize = 32;

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn small_primes() -> &'static [u64] {
    static CELL: OnceLock<Vec<u64>> = OnceLock::new();
    CELL.get_or_init(|| primes_up_to(1000))
}

/// Strong probable-prime test. Exact below 2^64, error below 2^-64 above.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in small_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let two = BigUint::from(2u32);
    // Bases come from a generator keyed on the candidate so the verdict is reproducible.
    let key = n.iter_u64_digits().fold(0x9e37_79b9_7f4a_7c15u64, |h, x| {
        (h ^ x).wrapping_mul(0x100_0000_01b3)
    });
    let mut rng = seeded(key);
    'witness: for _ in 0..MR_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn first_n_primes(n: usize) -> Vec<u64> {
    // Rosser: p_n < n (ln n + ln ln n) for n >= 6.
    let mut limit = if n < 6 {
        15
    } else {
        let nf = n as f64;
        (nf * (nf.ln() + nf.ln().ln())).ceil() as u64 + 1
    };
    loop {
        let primes = primes_up_to(limit);
        if primes.len() >= n {
            return primes[..n].to_vec();
        }
        limit *= 2;
    }
}

#[derive(Debug, Clone)]
enum ProductNode {
    Leaf(usize),
    Inner {
        product: BigUint,
        left: Box<ProductNode>,
        right: Box<ProductNode>,
    },
}

impl ProductNode {
    fn build(primes: &[u64], offset: usize) -> (ProductNode, BigUint) {
        if primes.len() == 1 {
            return (ProductNode::Leaf(offset), BigUint::from(primes[0]));
        }
        let mid = primes.len() / 2;
        let (left, lp) = Self::build(&primes[..mid], offset);
        let (right, rp) = Self::build(&primes[mid..], offset + mid);
        let product = &lp * &rp;
        (
            ProductNode::Inner {
                product: product.clone(),
                left: Box::new(left),
                right: Box::new(right),
            },
            product,
        )
    }

    fn product<'a>(&'a self, primes: &[u64], scratch: &'a mut BigUint) -> &'a BigUint {
        match self {
            ProductNode::Leaf(i) => {
                *scratch = BigUint::from(primes[*i]);
                scratch
            }
            ProductNode::Inner { product, .. } => product,
        }
    }
}

/// The first `n` primes together with the degree bound `d` and `B = p_n^d`.
#[derive(Debug, Clone)]
pub struct PrimeBasis {
    primes: Vec<u64>,
    degree: u32,
    bound: BigUint,
    tree: ProductNode,
    full_product: BigUint,
}

impl PrimeBasis {
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `B = p_n^d`.
    pub fn bound(&self) -> &BigUint {
        &self.bound
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Indices `j` with `p_j | q`, given `rem = q mod (product under node)`; a remainder
    /// tree, so only divisions are needed on the way down.
    fn dividing_indices(&self, rem: &BigUint, node: &ProductNode, out: &mut Vec<usize>) {
        match node {
            ProductNode::Leaf(i) => {
                if rem.is_zero() {
                    out.push(*i);
                }
            }
            ProductNode::Inner { left, right, .. } => {
                for child in [left, right] {
                    let mut scratch = BigUint::zero();
                    let r = rem % child.product(&self.primes, &mut scratch);
                    self.dividing_indices(&r, child, out);
                }
            }
        }
    }
}

/// The first `n` primes with degree bound `d`.
pub fn first_primes(n: usize, d: u32) -> PrimeBasis {
    assert!(n >= 1, "basis needs at least one prime");
    let primes = first_n_primes(n);
    let bound = BigUint::from(primes[n - 1]).pow(d);
    let (tree, full_product) = ProductNode::build(&primes, 0);
    PrimeBasis {
        primes,
        degree: d,
        bound,
        tree,
        full_product,
    }
}

/// Writes `q = p_1^k_1 ... p_n^k_n` with `k_1 + ... + k_n <= d`, if such exponents exist.
pub fn smooth_factor(q: &BigUint, basis: &PrimeBasis, d: u32) -> Option<Vec<u32>> {
    if q.is_zero() {
        return None;
    }
    let mut exps = vec![0u32; basis.len()];
    if q.is_one() {
        return Some(exps);
    }
    let mut found = Vec::new();
    basis.dividing_indices(&(q % &basis.full_product), &basis.tree, &mut found);

    let mut rest = q.clone();
    let mut total = 0u32;
    for j in found {
        let p = BigUint::from(basis.primes[j]);
        loop {
            let (quot, rem) = rest.div_rem(&p);
            if !rem.is_zero() {
                break;
            }
            rest = quot;
            exps[j] += 1;
            total += 1;
            if total > d {
                return None;
            }
        }
    }
    rest.is_one().then_some(exps)
}

/// Uniformly sampled candidates in `[lo, hi]` until one is prime.
pub fn random_prime(lo: &BigUint, hi: &BigUint, rng: &mut SeedRng) -> Result<BigUint> {
    let no_prime = |tries| Error::NoPrimeFound {
        lo: lo.to_string(),
        hi: hi.to_string(),
        tries,
    };
    if lo > hi {
        return Err(no_prime(0));
    }
    let budget = 1000 + 64 * hi.bits() as usize;
    let hi_excl = hi + 1u32;
    for _ in 0..budget {
        let candidate = rng.gen_biguint_range(lo, &hi_excl);
        if is_probable_prime(&candidate) {
            return Ok(candidate);
        }
    }
    Err(no_prime(budget))
}

pub fn random_prime_u64(lo: u64, hi: u64, rng: &mut SeedRng) -> Result<u64> {
    if lo > hi {
        return Err(Error::NoPrimeFound {
            lo: lo.to_string(),
            hi: hi.to_string(),
            tries: 0,
        });
    }
    let budget = 1000 + 64 * (64 - hi.leading_zeros() as usize);
    for _ in 0..budget {
        let candidate = rng.gen_range(lo..=hi);
        if is_prime_u64(candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::NoPrimeFound {
        lo: lo.to_string(),
        hi: hi.to_string(),
        tries: budget,
    })
}

/// A prime modulus with field operations on canonical representatives in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulus {
    value: BigUint,
    signed: BigInt,
}

impl Modulus {
    /// Wraps `p` after a probable-prime check.
    pub fn new(p: BigUint) -> Result<Self> {
        if !is_probable_prime(&p) {
            return Err(Error::Precondition(format!("{p} is not prime")));
        }
        Ok(Self::from_prime(p))
    }

    pub(crate) fn from_prime(p: BigUint) -> Self {
        let signed = BigInt::from_biguint(Sign::Plus, p.clone());
        Modulus { value: p, signed }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn signed(&self) -> &BigInt {
        &self.signed
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.value.to_u64()
    }

    pub fn bits(&self) -> u64 {
        self.value.bits()
    }

    pub fn reduce(&self, x: &BigInt) -> BigUint {
        x.mod_floor(&self.signed).into_parts().1
    }

    pub fn reduce_u(&self, x: &BigUint) -> BigUint {
        x % &self.value
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.value {
            s - &self.value
        } else {
            s
        }
    }

    pub fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            &self.value - (b - a)
        }
    }

    pub fn neg(&self, a: &BigUint) -> BigUint {
        if a.is_zero() {
            BigUint::zero()
        } else {
            &self.value - a
        }
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.value
    }

    pub fn pow(&self, a: &BigUint, e: &BigUint) -> BigUint {
        a.modpow(e, &self.value)
    }

    pub fn pow_u64(&self, a: &BigUint, e: u64) -> BigUint {
        a.modpow(&BigUint::from(e), &self.value)
    }

    pub fn inv(&self, a: &BigUint) -> Option<BigUint> {
        let a = a % &self.value;
        if a.is_zero() {
            return None;
        }
        a.modinv(&self.value)
    }

    /// Inverses of many nonzero residues with a single modular inversion.
    pub fn inv_many(&self, xs: &[BigUint]) -> Option<Vec<BigUint>> {
        if xs.is_empty() {
            return Some(Vec::new());
        }
        let mut prefix = Vec::with_capacity(xs.len());
        let mut acc = BigUint::one();
        for x in xs {
            acc = self.mul(&acc, x);
            prefix.push(acc.clone());
        }
        let mut inv = self.inv(&acc)?;
        let mut out = vec![BigUint::zero(); xs.len()];
        for i in (0..xs.len()).rev() {
            out[i] = if i == 0 {
                inv.clone()
            } else {
                self.mul(&inv, &prefix[i - 1])
            };
            inv = self.mul(&inv, &xs[i]);
        }
        Some(out)
    }

    /// Uniform element of the unit group.
    pub fn random_unit(&self, rng: &mut SeedRng) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.value)
    }
}

/// Exact `ceil(num / eps)` for a binary64 `eps > 0`.
fn ceil_div_f64(num: &BigUint, eps: f64) -> BigUint {
    assert!(eps > 0.0 && eps.is_finite());
    let bits = eps.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // eps = mant * 2^e2
    let (mant, e2) = if exp == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    // num / (mant * 2^e2) = num * 2^-e2 / mant
    let (n, d) = if e2 <= 0 {
        (num << (-e2) as usize, BigUint::from(mant))
    } else {
        (num.clone(), BigUint::from(mant) << e2 as usize)
    };
    n.div_ceil(&d)
}

/// Lower end `ceil(B T / eps)` of the working-prime interval.
pub fn pi_lower_bound(bound: &BigUint, terms: u64, eps: f64) -> BigUint {
    ceil_div_f64(&(bound * terms), eps)
}

/// A prime in `[ceil(B T / eps), 2 ceil(B T / eps)]`.
pub fn choose_pi(bound: &BigUint, terms: u64, eps: f64, rng: &mut SeedRng) -> Result<Modulus> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!(
            "eps = {eps} must lie in (0, 1)"
        )));
    }
    if terms == 0 || *bound < BigUint::from(2u32) {
        return Err(Error::Precondition("need B >= 2 and T >= 1".into()));
    }
    let lo = pi_lower_bound(bound, terms, eps);
    let hi = &lo * 2u32;
    Ok(Modulus::from_prime(random_prime(&lo, &hi, rng)?))
}

/// `ceil(log2(x))` for `x >= 1`.
pub fn ceil_log2(x: &BigUint) -> u64 {
    if x.is_zero() || x.is_one() {
        return 0;
    }
    (x - 1u32).bits()
}

/// Smallest `b >= 30` with `2^b >= 10 t B`.
pub fn reduction_prime_bits(terms: u64, coeff_bits: u64) -> u64 {
    let target = BigUint::from(terms) * coeff_bits * 10u32;
    ceil_log2(&target).max(30)
}

/// A random prime in `(2^b, 2^(b+1))` such that a `t`-term polynomial with coefficients
/// below `2^coeff_bits` keeps its support modulo the prime with probability `>= 1 - 5tB/2^b`.
pub fn choose_reduction_prime(terms: u64, coeff_bits: u64, rng: &mut SeedRng) -> Result<Modulus> {
    if terms == 0 || coeff_bits == 0 {
        return Err(Error::Precondition("need t >= 1 and B >= 1".into()));
    }
    let b = reduction_prime_bits(terms, coeff_bits);
    prime_in_dyadic_interval(b, rng)
}

/// A random prime strictly between `2^b` and `2^(b+1)`.
pub fn prime_in_dyadic_interval(b: u64, rng: &mut SeedRng) -> Result<Modulus> {
    let lo = (BigUint::one() << b as usize) + 1u32;
    let hi = (BigUint::one() << (b + 1) as usize) - 1u32;
    Ok(Modulus::from_prime(random_prime(&lo, &hi, rng)?))
}

//! Sparse multivariate integer polynomials in canonical form.
//!
//! A [`SparsePoly`] stores its terms with pairwise distinct exponent vectors, nonzero
//! coefficients, and strictly decreasing lexicographic exponent order. Every constructor
//! canonicalizes, so structural equality is polynomial equality.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numtheory::{mul_mod, pow_mod, random_prime_u64};
use crate::rng::SeedRng;

/// Exponents of one power product, one entry per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentVec(pub Vec<u32>);

impl ExponentVec {
    pub fn zero(n: usize) -> Self {
        ExponentVec(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `lambda . e mod r`.
    pub fn dot_mod(&self, lambda: &[u64], r: u64) -> u64 {
        debug_assert_eq!(lambda.len(), self.0.len());
        let r = r as u128;
        let mut acc = 0u128;
        for (&e, &l) in self.0.iter().zip(lambda) {
            if e != 0 {
                acc = (acc + (e as u128 % r) * (l as u128 % r)) % r;
            }
        }
        acc as u64
    }

    fn add(&self, other: &ExponentVec) -> ExponentVec {
        ExponentVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflows 32 bits"))
                .collect(),
        )
    }
}

impl From<Vec<u32>> for ExponentVec {
    fn from(v: Vec<u32>) -> Self {
        ExponentVec(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub coeff: BigInt,
    pub exp: ExponentVec,
}

/// Summary statistics `(d, t, s, |P|)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyStats {
    /// Total degree; 0 for the zero polynomial.
    pub total_degree: u64,
    pub term_count: usize,
    /// Nonzero exponent entries, counted over all terms.
    pub power_count: usize,
    /// Largest absolute coefficient.
    pub height: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsePoly {
    nvars: usize,
    terms: Vec<Term>,
}

impl SparsePoly {
    pub fn zero(nvars: usize) -> Self {
        SparsePoly {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: impl Into<BigInt>) -> Self {
        Self::monomial(c, ExponentVec::zero(nvars))
    }

    pub fn monomial(c: impl Into<BigInt>, exp: ExponentVec) -> Self {
        let nvars = exp.len();
        let c = c.into();
        let terms = if c.is_zero() {
            Vec::new()
        } else {
            vec![Term { coeff: c, exp }]
        };
        SparsePoly { nvars, terms }
    }

    /// Builds the canonical polynomial: duplicate exponents are merged, zero terms dropped,
    /// and the rest sorted.
    pub fn from_terms<I, C, E>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, E)>,
        C: Into<BigInt>,
        E: Into<ExponentVec>,
    {
        let mut acc: HashMap<ExponentVec, BigInt> = HashMap::new();
        for (c, e) in terms {
            let e = e.into();
            if e.len() != nvars {
                return Err(Error::ArityMismatch {
                    left: nvars,
                    right: e.len(),
                });
            }
            *acc.entry(e).or_default() += c.into();
        }
        Ok(Self::from_map(nvars, acc))
    }

    pub(crate) fn from_map(nvars: usize, acc: HashMap<ExponentVec, BigInt>) -> Self {
        let mut terms: Vec<Term> = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exp, coeff)| Term { coeff, exp })
            .collect();
        terms.sort_unstable_by(|a, b| b.exp.cmp(&a.exp));
        SparsePoly { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> Vec<ExponentVec> {
        self.terms.iter().map(|t| t.exp.clone()).collect()
    }

    /// Coefficient of `x^e`, zero if absent.
    pub fn coeff(&self, e: &ExponentVec) -> BigInt {
        self.terms
            .binary_search_by(|t| e.cmp(&t.exp))
            .map(|i| self.terms[i].coeff.clone())
            .unwrap_or_default()
    }

    pub fn total_degree(&self) -> u64 {
        self.terms
            .iter()
            .map(|t| t.exp.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Largest exponent of each variable.
    pub fn partial_degrees(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.nvars];
        for t in &self.terms {
            for (o, &e) in out.iter_mut().zip(&t.exp.0) {
                *o = (*o).max(e);
            }
        }
        out
    }

    pub fn height(&self) -> BigUint {
        self.terms
            .iter()
            .map(|t| t.coeff.magnitude().clone())
            .max()
            .unwrap_or_default()
    }

    pub fn stats(&self) -> PolyStats {
        PolyStats {
            total_degree: self.total_degree(),
            term_count: self.terms.len(),
            power_count: self
                .terms
                .iter()
                .map(|t| t.exp.0.iter().filter(|&&e| e != 0).count())
                .sum(),
            height: self.height(),
        }
    }

    fn check_arity(&self, other: &SparsePoly) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::ArityMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_arity(other)?;
        Self::from_terms(
            self.nvars,
            self.terms
                .iter()
                .chain(&other.terms)
                .map(|t| (t.coeff.clone(), t.exp.clone())),
        )
    }

    pub fn neg(&self) -> SparsePoly {
        SparsePoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: -&t.coeff,
                    exp: t.exp.clone(),
                })
                .collect(),
        }
    }

    pub fn sub(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.add(&other.neg())
    }

    /// Schoolbook product; the reference every other multiplier is checked against.
    pub fn naive_mul(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_arity(other)?;
        let mut acc: HashMap<ExponentVec, BigInt> =
            HashMap::with_capacity(self.len().saturating_mul(other.len()).min(1 << 22));
        for a in &self.terms {
            for b in &other.terms {
                *acc.entry(a.exp.add(&b.exp)).or_default() += &a.coeff * &b.coeff;
            }
        }
        Ok(Self::from_map(self.nvars, acc))
    }

    /// Coefficients reduced into `[0, m)`, zero terms dropped.
    pub fn reduce_mod(&self, m: &BigUint) -> SparsePoly {
        let mi = BigInt::from_biguint(Sign::Plus, m.clone());
        SparsePoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter_map(|t| {
                    let c = t.coeff.mod_floor(&mi);
                    (!c.is_zero()).then(|| Term {
                        coeff: c,
                        exp: t.exp.clone(),
                    })
                })
                .collect(),
        }
    }

    /// Value at `point` modulo a word-size `p`.
    pub fn eval_mod(&self, point: &[u64], p: u64) -> u64 {
        let pb = BigInt::from(p);
        let mut acc = 0u64;
        for t in &self.terms {
            let mut v = t.coeff.mod_floor(&pb).to_u64().unwrap();
            for (&e, &a) in t.exp.0.iter().zip(point) {
                if e != 0 {
                    v = mul_mod(v, pow_mod(a, e as u64, p), p);
                }
            }
            acc = ((acc as u128 + v as u128) % p as u128) as u64;
        }
        acc
    }

    /// Canonical `.sp` text.
    pub fn to_sp_string(&self) -> String {
        let mut out = format!("SP1 n={}\n", self.nvars);
        for t in &self.terms {
            write!(out, "{}", t.coeff).unwrap();
            for e in &t.exp.0 {
                write!(out, " {e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_sp(text: &str) -> Result<SparsePoly> {
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut nvars: Option<usize> = None;
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some(n) = nvars else {
                let mut parts = content.split_whitespace();
                if parts.next() != Some("SP1") {
                    return Err(err(lineno, "expected header `SP1 n=<count>`".into()));
                }
                let n = parts
                    .next()
                    .and_then(|p| p.strip_prefix("n="))
                    .and_then(|p| p.parse::<usize>().ok())
                    .ok_or_else(|| err(lineno, "malformed variable count in header".into()))?;
                if parts.next().is_some() {
                    return Err(err(lineno, "trailing tokens in header".into()));
                }
                nvars = Some(n);
                continue;
            };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.len() != n + 1 {
                return Err(err(
                    lineno,
                    format!("expected {} tokens, found {}", n + 1, tokens.len()),
                ));
            }
            let c: BigInt = tokens[0]
                .parse()
                .map_err(|_| err(lineno, format!("bad coefficient `{}`", tokens[0])))?;
            let exp = tokens[1..]
                .iter()
                .map(|s| {
                    s.parse::<u32>()
                        .map_err(|_| err(lineno, format!("bad exponent `{s}`")))
                })
                .collect::<Result<Vec<u32>>>()?;
            raw.push((c, ExponentVec(exp)));
        }
        let n = nvars.ok_or_else(|| err(1, "missing header".into()))?;
        Self::from_terms(n, raw)
    }
}

impl fmt::Display for SparsePoly {
    /// Human-readable form, e.g. `3*x1^2*x2^3 - 20*x2^3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            let mag = t.coeff.magnitude();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = t.exp.0.iter().all(|&e| e == 0);
            if !mag.is_one() || is_const {
                factors.push(mag.to_string());
            }
            for (j, &e) in t.exp.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", j + 1)),
                    _ => factors.push(format!("x{}^{}", j + 1, e)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Number of monomials of total degree `<= d` in `n` variables, saturating.
pub fn monomial_count(n: usize, d: u32) -> u128 {
    // C(d + n, n)
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = match acc.checked_mul(d as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// All exponent vectors of total degree `<= d`, in lexicographic order.
pub fn all_monomials(n: usize, d: u32) -> Vec<ExponentVec> {
    fn rec(n: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<ExponentVec>) {
        if prefix.len() == n {
            out.push(ExponentVec(prefix.clone()));
            return;
        }
        for e in 0..=budget {
            prefix.push(e);
            rec(n, budget - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::with_capacity(n), &mut out);
    out
}

fn random_monomial(n: usize, d: u32, rng: &mut SeedRng) -> ExponentVec {
    // Stars and bars: n bar positions among d + n slots.
    let mut bars = sample(rng, d as usize + n, n).into_vec();
    bars.sort_unstable();
    let mut prev: i64 = -1;
    let exps = bars
        .into_iter()
        .map(|b| {
            let e = (b as i64 - prev - 1) as u32;
            prev = b as i64;
            e
        })
        .collect();
    ExponentVec(exps)
}

fn random_nonzero_coeff(height: u64, rng: &mut SeedRng) -> BigInt {
    let mag = BigInt::from(rng.gen_range(1..=height));
    if rng.gen::<bool>() {
        -mag
    } else {
        mag
    }
}

/// A random polynomial with exactly `t` terms of total degree `<= d` and nonzero
/// coefficients uniform in `[-height, height]`.
pub fn random_poly(
    n: usize,
    t: usize,
    d: u32,
    height: u64,
    rng: &mut SeedRng,
) -> Result<SparsePoly> {
    if n == 0 {
        return Err(Error::Precondition("need at least one variable".into()));
    }
    if height == 0 && t > 0 {
        return Err(Error::Precondition("height bound must be >= 1".into()));
    }
    let available = monomial_count(n, d);
    if t as u128 > available {
        return Err(Error::InfeasibleTermCount {
            requested: t as u128,
            available,
        });
    }
    let exps: Vec<ExponentVec> = if 2 * t as u128 > available && available <= 1 << 22 {
        let all = all_monomials(n, d);
        sample(rng, all.len(), t)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    } else {
        let mut seen = std::collections::HashSet::with_capacity(t);
        let mut out = Vec::with_capacity(t);
        while out.len() < t {
            let e = random_monomial(n, d, rng);
            if seen.insert(e.clone()) {
                out.push(e);
            }
        }
        out
    };
    let terms: Vec<(BigInt, ExponentVec)> = exps
        .into_iter()
        .map(|e| (random_nonzero_coeff(height, rng), e))
        .collect();
    SparsePoly::from_terms(n, terms)
}

/// Probabilistic check of `P Q = R` at a random point modulo a random 62-bit prime.
/// `false` is always correct; `true` is correct with high probability.
pub fn verify_product(p: &SparsePoly, q: &SparsePoly, r: &SparsePoly, rng: &mut SeedRng) -> bool {
    if p.nvars != q.nvars || p.nvars != r.nvars {
        return false;
    }
    let prime = random_prime_u64(1 << 61, (1 << 62) - 1, rng).expect("62-bit primes are dense");
    let point: Vec<u64> = (0..p.nvars).map(|_| rng.gen_range(0..prime)).collect();
    let lhs = mul_mod(p.eval_mod(&point, prime), q.eval_mod(&point, prime), prime);
    lhs == r.eval_mod(&point, prime)
}

/// Univariate polynomial with arbitrary-precision exponents, for the supersparse path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniPoly {
    terms: Vec<(BigInt, BigUint)>,
}

impl UniPoly {
    pub fn from_terms<I, C, E>(terms: I) -> Self
    where
        I: IntoIterator<Item = (C, E)>,
        C: Into<BigInt>,
        E: Into<BigUint>,
    {
        let mut acc: HashMap<BigUint, BigInt> = HashMap::new();
        for (c, e) in terms {
            *acc.entry(e.into()).or_default() += c.into();
        }
        let mut terms: Vec<(BigInt, BigUint)> = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| (c, e))
            .collect();
        terms.sort_unstable_by(|a, b| b.1.cmp(&a.1));
        UniPoly { terms }
    }

    /// `(coefficient, exponent)` pairs by decreasing exponent.
    pub fn terms(&self) -> &[(BigInt, BigUint)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> BigUint {
        self.terms.first().map(|t| t.1.clone()).unwrap_or_default()
    }

    pub fn support(&self) -> Vec<BigUint> {
        self.terms.iter().map(|t| t.1.clone()).collect()
    }

    pub fn naive_mul(&self, other: &UniPoly) -> UniPoly {
        let mut prods = Vec::with_capacity(self.len() * other.len());
        for (a, ea) in &self.terms {
            for (b, eb) in &other.terms {
                prods.push((a * b, ea + eb));
            }
        }
        UniPoly::from_terms(prods)
    }
}

/// Packs `x_1^a_1 ... x_n^a_n` into `x^(a_1 + a_2 b_1 + a_3 b_1 b_2 + ...)`.
pub fn kronecker(p: &SparsePoly, bounds: &[u64]) -> Result<UniPoly> {
    if bounds.len() != p.nvars {
        return Err(Error::ArityMismatch {
            left: p.nvars,
            right: bounds.len(),
        });
    }
    let mut terms = Vec::with_capacity(p.len());
    for t in &p.terms {
        let mut packed = BigUint::zero();
        let mut radix = BigUint::one();
        for (var, (&e, &b)) in t.exp.0.iter().zip(bounds).enumerate() {
            if e as u64 >= b {
                return Err(Error::ExponentOutOfBounds {
                    var,
                    exponent: e as u64,
                    bound: b,
                });
            }
            packed += &radix * e;
            radix *= b;
        }
        terms.push((t.coeff.clone(), packed));
    }
    Ok(UniPoly::from_terms(terms))
}

/// Inverse of [`kronecker`].
pub fn unkronecker(u: &UniPoly, bounds: &[u64]) -> Result<SparsePoly> {
    let capacity: BigUint = bounds.iter().map(|&b| BigUint::from(b)).product();
    let mut terms = Vec::with_capacity(u.len());
    for (c, e) in &u.terms {
        if *e >= capacity {
            return Err(Error::Precondition(format!(
                "exponent {e} exceeds the packing capacity {capacity}"
            )));
        }
        let mut rest = e.clone();
        let mut exp = Vec::with_capacity(bounds.len());
        for (var, &b) in bounds.iter().enumerate() {
            let (q, r) = rest.div_rem(&BigUint::from(b));
            let digit = r.to_u32().ok_or(Error::ExponentOutOfBounds {
                var,
                exponent: r.to_u64().unwrap_or(u64::MAX),
                bound: u32::MAX as u64,
            })?;
            exp.push(digit);
            rest = q;
        }
        terms.push((c.clone(), ExponentVec(exp)));
    }
    SparsePoly::from_terms(bounds.len(), terms)
}

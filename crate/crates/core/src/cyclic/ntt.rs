//! Radix-2 number theoretic transforms over word-size primes, Montgomery form.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::numtheory::{is_prime_u64, pow_mod};

/// A prime `p < 2^62` with a root of unity of order `2^max_log`.
#[derive(Debug, Clone)]
pub struct NttPrime {
    pub p: u64,
    pub max_log: u32,
    root: u64,
    // -p^-1 mod 2^64
    neg_inv: u64,
    // 2^128 mod p
    r2: u64,
}

impl NttPrime {
    /// `None` unless `p` is an odd prime below 2^62.
    pub fn new(p: u64) -> Option<Self> {
        if p < 3 || p >= 1 << 62 || !is_prime_u64(p) {
            return None;
        }
        let max_log = (p - 1).trailing_zeros();
        let odd = (p - 1) >> max_log;
        // h = g^odd has order exactly 2^max_log iff h^(2^(max_log-1)) = -1.
        let root = (2..p).find_map(|g| {
            let h = pow_mod(g, odd, p);
            (pow_mod(h, 1 << (max_log - 1), p) == p - 1).then_some(h)
        })?;
        let mut inv = 1u64;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r2 = ((u128::MAX % p as u128 + 1) % p as u128) as u64;
        Some(NttPrime {
            p,
            max_log,
            root,
            neg_inv: inv.wrapping_neg(),
            r2,
        })
    }

    #[inline]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.neg_inv);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline]
    fn mmul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }

    #[inline]
    fn to_mont(&self, a: u64) -> u64 {
        self.mmul(a, self.r2)
    }

    #[inline]
    fn from_mont(&self, a: u64) -> u64 {
        self.redc(a as u128)
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    /// In-place transform of `a` (Montgomery form, power-of-two length).
    fn transform(&self, a: &mut [u64], inverse: bool) {
        let n = a.len();
        let log = n.trailing_zeros();
        assert!(log <= self.max_log, "transform length exceeds 2-adicity");
        let mut j = 0usize;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                a.swap(i, j);
            }
        }
        let mut w_n = pow_mod(self.root, 1 << (self.max_log - log), self.p);
        if inverse {
            w_n = pow_mod(w_n, self.p - 2, self.p);
        }
        // Twiddles for the largest stage; smaller stages stride through them.
        let half = n / 2;
        let mut tw = Vec::with_capacity(half.max(1));
        let w_m = self.to_mont(w_n);
        let mut cur = self.to_mont(1);
        for _ in 0..half.max(1) {
            tw.push(cur);
            cur = self.mmul(cur, w_m);
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            let h = len / 2;
            for start in (0..n).step_by(len) {
                for k in 0..h {
                    let u = a[start + k];
                    let v = self.mmul(a[start + k + h], tw[k * step]);
                    a[start + k] = self.add(u, v);
                    a[start + k + h] = self.sub(u, v);
                }
            }
            len <<= 1;
        }
        if inverse {
            let n_inv = self.to_mont(pow_mod(n as u64 % self.p, self.p - 2, self.p));
            for x in a.iter_mut() {
                *x = self.mmul(*x, n_inv);
            }
        }
    }

    /// Cyclic convolution of residues modulo `x^r - 1`, via a linear product of length `2r - 1`.
    pub fn cyclic_convolve(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let r = a.len();
        debug_assert_eq!(r, b.len());
        let size = (2 * r - 1).next_power_of_two();
        let mut fa = vec![0u64; size];
        let mut fb = vec![0u64; size];
        for (dst, &x) in fa.iter_mut().zip(a) {
            *dst = self.to_mont(x);
        }
        for (dst, &x) in fb.iter_mut().zip(b) {
            *dst = self.to_mont(x);
        }
        self.transform(&mut fa, false);
        self.transform(&mut fb, false);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = self.mmul(*x, *y);
        }
        self.transform(&mut fa, true);
        let mut out: Vec<u64> = fa[..r].iter().map(|&x| self.from_mont(x)).collect();
        for j in r..(2 * r - 1) {
            out[j - r] = self.add(out[j - r], self.from_mont(fa[j]));
        }
        out
    }

    pub fn supports_length(&self, r: usize) -> bool {
        (2 * r - 1).next_power_of_two().trailing_zeros() <= self.max_log
    }
}

/// Primes `c * 2^32 + 1 < 2^62`, largest first.
pub fn transform_primes() -> &'static [NttPrime] {
    static CELL: OnceLock<Vec<NttPrime>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        let mut c: u64 = (1 << 30) - 1;
        while out.len() < 24 {
            if let Some(p) = NttPrime::new((c << 32) + 1) {
                out.push(p);
            }
            c -= 1;
        }
        out
    })
}

fn residue(x: &BigInt, p: u64) -> u64 {
    if let Some(v) = x.to_i64() {
        return v.rem_euclid(p as i64) as u64;
    }
    let r = x % BigInt::from(p);
    let r = r.to_i64().unwrap();
    r.rem_euclid(p as i64) as u64
}

/// Exact cyclic product of integer sequences whose result coefficients are below
/// `2^bound_bits` in absolute value, by CRT over enough transform primes.
pub fn cyclic_convolve_integers(a: &[BigInt], b: &[BigInt], bound_bits: u64) -> Vec<BigInt> {
    let primes = transform_primes();
    let needed = ((bound_bits + 2) / 61 + 1) as usize;
    assert!(
        needed <= primes.len(),
        "coefficient bound too large for the prime table"
    );
    let primes = &primes[..needed];
    let r = a.len();
    let residues: Vec<Vec<u64>> = primes
        .iter()
        .map(|np| {
            let ra: Vec<u64> = a.iter().map(|x| residue(x, np.p)).collect();
            let rb: Vec<u64> = b.iter().map(|x| residue(x, np.p)).collect();
            np.cyclic_convolve(&ra, &rb)
        })
        .collect();
    crt_signed(primes, &residues, r)
}

/// Garner reconstruction into the symmetric range.
fn crt_signed(primes: &[NttPrime], residues: &[Vec<u64>], r: usize) -> Vec<BigInt> {
    let k = primes.len();
    // inv[i][j] = p_j^-1 mod p_i for j < i
    let inv: Vec<Vec<u64>> = (0..k)
        .map(|i| {
            (0..i)
                .map(|j| pow_mod(primes[j].p % primes[i].p, primes[i].p - 2, primes[i].p))
                .collect()
        })
        .collect();
    let modulus: BigUint = primes.iter().map(|np| BigUint::from(np.p)).product();
    let half = &modulus >> 1usize;
    let modulus = BigInt::from_biguint(Sign::Plus, modulus);
    let mut out = Vec::with_capacity(r);
    let mut digits = vec![0u64; k];
    for idx in 0..r {
        for i in 0..k {
            let pi = primes[i].p;
            let mut x = residues[i][idx];
            for j in 0..i {
                let diff = (x + pi - digits[j] % pi) % pi;
                x = ((diff as u128 * inv[i][j] as u128) % pi as u128) as u64;
            }
            digits[i] = x;
        }
        let mut value = BigUint::zero();
        for i in (0..k).rev() {
            value = value * primes[i].p + digits[i];
        }
        let signed = if value > half {
            BigInt::from_biguint(Sign::Plus, value) - &modulus
        } else {
            BigInt::from_biguint(Sign::Plus, value)
        };
        out.push(signed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_cyclic(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let r = a.len();
        let mut out = vec![0u128; r];
        for i in 0..r {
            for j in 0..r {
                out[(i + j) % r] = (out[(i + j) % r] + a[i] as u128 * b[j] as u128) % p as u128;
            }
        }
        out.into_iter().map(|x| x as u64).collect()
    }

    #[test]
    fn prime_table_is_sane() {
        let ps = transform_primes();
        assert!(ps.len() >= 20);
        for np in ps {
            assert!(np.p < 1 << 62 && np.max_log >= 32);
        }
    }

    #[test]
    fn single_prime_matches_naive() {
        let np = &transform_primes()[0];
        for r in [1usize, 2, 3, 7, 64, 97, 130] {
            let a: Vec<u64> = (0..r as u64).map(|i| (i * 7919 + 3) % np.p).collect();
            let b: Vec<u64> = (0..r as u64)
                .map(|i| (i * i * 104_729 + 11) % np.p)
                .collect();
            assert_eq!(
                np.cyclic_convolve(&a, &b),
                naive_cyclic(&a, &b, np.p),
                "r = {r}"
            );
        }
    }

    #[test]
    fn small_fft_prime() {
        let np = NttPrime::new(998_244_353).unwrap();
        assert_eq!(np.max_log, 23);
        let a = vec![1, 2, 3, 4, 5];
        let b = vec![5, 4, 3, 2, 1];
        assert_eq!(np.cyclic_convolve(&a, &b), naive_cyclic(&a, &b, np.p));
    }

    #[test]
    fn signed_crt_reconstruction() {
        let a: Vec<BigInt> = [-(1i64 << 60), 5, -7, 1 << 59]
            .iter()
            .map(|&x| BigInt::from(x))
            .collect();
        let b: Vec<BigInt> = [3i64, -(1 << 61), 2, 9]
            .iter()
            .map(|&x| BigInt::from(x))
            .collect();
        let got = cyclic_convolve_integers(&a, &b, 125);
        let r = a.len();
        let mut want = vec![BigInt::zero(); r];
        for i in 0..r {
            for j in 0..r {
                want[(i + j) % r] += &a[i] * &b[j];
            }
        }
        assert_eq!(got, want);
    }
}

//! Arithmetic for the field tower `F_p ⊂ F_q ⊂ F_{q^m}`, `q = p^e`.
//!
//! Elements of `F_q` are stored as indices `0..q`: the index is the base-`p`
//! packing of the coefficient vector over `F_p` in the power basis of the
//! base modulus (coefficient of degree 0 is the least significant digit).
//! Elements of `F_{q^m}` are length-`m` coefficient vectors over `F_q` in the
//! power basis of the top modulus.
//!
//! Both moduli are found by a deterministic scan: monic polynomials are tried
//! in lexicographic order of their coefficient vector `(c_0, ..., c_{deg-1})`
//! and the first irreducible one wins, so a tower is fully determined by
//! `(p, e, m)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::GfMatrix;

/// Element of `F_q`, as an index `0..q`.
pub type Fq = u16;

/// Element of `F_{q^m}`: coefficient vector over `F_q`, length `m`.
pub type Fqm = Vec<Fq>;

/// Largest supported `q`; bounds the `q x q` arithmetic tables.
pub const MAX_Q: u64 = 4096;

/// The subfield `F_q = F_{p^e}` with table-backed arithmetic.
pub struct FqField {
    p: u64,
    e: usize,
    q: usize,
    /// Monic irreducible of degree `e` over `F_p`, low coefficients first.
    modulus_base: Vec<u64>,
    gamma: Fq,
    add_t: Vec<Fq>,
    mul_t: Vec<Fq>,
    neg_t: Vec<Fq>,
    inv_t: Vec<Fq>,
}

impl fmt::Debug for FqField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FqField")
            .field("p", &self.p)
            .field("e", &self.e)
            .field("modulus_base", &self.modulus_base)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl PartialEq for FqField {
    fn eq(&self, other: &Self) -> bool {
        // Moduli and generators are deterministic in (p, e).
        self.p == other.p && self.e == other.e
    }
}
impl Eq for FqField {}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime factors of `n`, ascending, without multiplicity.
fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// Dense polynomials over F_p, low coefficients first, not normalized.
mod ppoly {
    pub fn deg(a: &[u64]) -> Option<usize> {
        a.iter().rposition(|&c| c != 0)
    }

    /// Remainder of `a` modulo monic `b`.
    pub fn rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let db = deg(b).expect("monic divisor");
        let mut r = a.to_vec();
        while let Some(dr) = deg(&r) {
            if dr < db {
                break;
            }
            let lead = r[dr];
            for i in 0..db {
                let t = (lead * b[i]) % p;
                r[dr - db + i] = (r[dr - db + i] + p - t) % p;
            }
            r[dr] = 0;
        }
        r
    }

    pub fn is_zero(a: &[u64]) -> bool {
        deg(a).is_none()
    }
}

/// Monic degree-`d` polynomial over `F_p` from a scan index, coefficients
/// `(c_0, ..., c_{d-1})` read big-endian from `idx` so that increasing `idx`
/// walks the coefficient vectors in lexicographic order.
fn monic_from_index(idx: u64, d: usize, p: u64) -> Vec<u64> {
    let mut coeffs = vec![0u64; d + 1];
    coeffs[d] = 1;
    let mut rest = idx;
    for i in 0..d {
        let pow = p.pow((d - 1 - i) as u32);
        coeffs[i] = rest / pow;
        rest %= pow;
    }
    coeffs
}

fn irreducible_over_fp(f: &[u64], p: u64) -> bool {
    let d = ppoly::deg(f).expect("nonzero");
    for dd in 1..=d / 2 {
        for idx in 0..p.pow(dd as u32) {
            let g = monic_from_index(idx, dd, p);
            if ppoly::is_zero(&ppoly::rem(f, &g, p)) {
                return false;
            }
        }
    }
    true
}

impl FqField {
    /// Constructs `F_{p^e}` with its deterministic modulus and generator.
    pub fn new(p: u64, e: usize) -> Result<Arc<FqField>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if e == 0 {
            return Err(Error::InvalidParameter("extension degree e must be >= 1".into()));
        }
        let q64 = p.checked_pow(e as u32).filter(|&q| q <= MAX_Q).ok_or_else(|| {
            Error::InvalidParameter(format!("q = {p}^{e} exceeds the supported bound {MAX_Q}"))
        })?;
        let q = q64 as usize;

        let modulus_base = (0..q64)
            .map(|idx| monic_from_index(idx, e, p))
            .find(|f| irreducible_over_fp(f, p))
            .expect("an irreducible polynomial of every degree exists");

        let digits = |idx: usize| -> Vec<u64> {
            let mut v = vec![0u64; e];
            let mut rest = idx as u64;
            for d in v.iter_mut() {
                *d = rest % p;
                rest /= p;
            }
            v
        };
        let pack = |v: &[u64]| -> Fq {
            let mut idx = 0u64;
            for &d in v.iter().rev() {
                idx = idx * p + d;
            }
            idx as Fq
        };

        let mut add_t = vec![0 as Fq; q * q];
        let mut neg_t = vec![0 as Fq; q];
        for a in 0..q {
            let da = digits(a);
            let neg: Vec<u64> = da.iter().map(|&c| (p - c) % p).collect();
            neg_t[a] = pack(&neg);
            for b in 0..=a {
                let db = digits(b);
                let sum: Vec<u64> = da.iter().zip(&db).map(|(&x, &y)| (x + y) % p).collect();
                let s = pack(&sum);
                add_t[a * q + b] = s;
                add_t[b * q + a] = s;
            }
        }

        let mut mul_t = vec![0 as Fq; q * q];
        for a in 0..q {
            let da = digits(a);
            for b in 0..=a {
                let db = digits(b);
                let mut prod = vec![0u64; 2 * e - 1];
                for (i, &x) in da.iter().enumerate() {
                    if x == 0 {
                        continue;
                    }
                    for (j, &y) in db.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                let r = ppoly::rem(&prod, &modulus_base, p);
                let mut rd = vec![0u64; e];
                rd[..r.len().min(e)].copy_from_slice(&r[..r.len().min(e)]);
                let v = pack(&rd);
                mul_t[a * q + b] = v;
                mul_t[b * q + a] = v;
            }
        }

        let mut inv_t = vec![0 as Fq; q];
        for a in 1..q {
            for b in 1..q {
                if mul_t[a * q + b] == 1 {
                    inv_t[a] = b as Fq;
                    break;
                }
            }
        }

        let mut field = FqField {
            p,
            e,
            q,
            modulus_base,
            gamma: 0,
            add_t,
            mul_t,
            neg_t,
            inv_t,
        };
        field.gamma = field.find_generator()?;
        Ok(Arc::new(field))
    }

    /// Smallest element index of multiplicative order `q - 1`.
    fn find_generator(&self) -> Result<Fq> {
        if self.q == 2 {
            return Ok(1);
        }
        let order = (self.q - 1) as u64;
        let factors = prime_factors(order);
        'outer: for g in 1..self.q as Fq {
            for &f in &factors {
                if self.pow(g, order / f) == 1 {
                    continue 'outer;
                }
            }
            return Ok(g);
        }
        Err(Error::InvalidParameter("no multiplicative generator found".into()))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn modulus_base(&self) -> &[u64] {
        &self.modulus_base
    }
    /// Deterministic generator of `F_q^*`.
    pub fn gamma(&self) -> Fq {
        self.gamma
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        self.add_t[a as usize * self.q + b as usize]
    }
    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        self.neg_t[a as usize]
    }
    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }
    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        self.mul_t[a as usize * self.q + b as usize]
    }
    /// Multiplicative inverse; `a` must be nonzero.
    #[inline]
    pub fn inv(&self, a: Fq) -> Fq {
        debug_assert!(a != 0, "inverse of zero");
        self.inv_t[a as usize]
    }

    pub fn pow(&self, a: Fq, mut k: u64) -> Fq {
        let mut base = a;
        let mut acc: Fq = 1;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// Multiplicative order of a nonzero element, by direct iteration.
    pub fn order(&self, a: Fq) -> u64 {
        assert!(a != 0);
        let mut x = a;
        let mut n = 1u64;
        while x != 1 {
            x = self.mul(x, a);
            n += 1;
        }
        n
    }

    /// Coefficient vector of an element over `F_p`, low degree first.
    pub fn digits(&self, a: Fq) -> Vec<u64> {
        let mut v = vec![0u64; self.e];
        let mut rest = a as u64;
        for d in v.iter_mut() {
            *d = rest % self.p;
            rest /= self.p;
        }
        v
    }

    pub fn from_digits(&self, digits: &[u64]) -> Result<Fq> {
        if digits.len() != self.e {
            return Err(Error::Parse(format!(
                "element of F_{} needs {} digits, got {}",
                self.q,
                self.e,
                digits.len()
            )));
        }
        let mut idx = 0u64;
        for &d in digits.iter().rev() {
            if d >= self.p {
                return Err(Error::Parse(format!("digit {d} out of range for p = {}", self.p)));
            }
            idx = idx * self.p + d;
        }
        Ok(idx as Fq)
    }
}

// Dense polynomials over F_q, low coefficients first.
mod qpoly {
    use super::{Fq, FqField};

    pub fn deg(a: &[Fq]) -> Option<usize> {
        a.iter().rposition(|&c| c != 0)
    }

    pub fn rem(f: &FqField, a: &[Fq], b: &[Fq]) -> Vec<Fq> {
        let db = deg(b).expect("nonzero divisor");
        let lead_inv = f.inv(b[db]);
        let mut r = a.to_vec();
        while let Some(dr) = deg(&r) {
            if dr < db {
                break;
            }
            let c = f.mul(r[dr], lead_inv);
            for i in 0..=db {
                let t = f.mul(c, b[i]);
                r[dr - db + i] = f.sub(r[dr - db + i], t);
            }
        }
        r.truncate(db);
        r.resize(db, 0);
        r
    }

    pub fn mul(f: &FqField, a: &[Fq], b: &[Fq]) -> Vec<Fq> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0 as Fq; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(x, y));
            }
        }
        out
    }

    pub fn is_zero(a: &[Fq]) -> bool {
        deg(a).is_none()
    }

    pub fn scale(f: &FqField, a: &[Fq], c: Fq) -> Vec<Fq> {
        a.iter().map(|&x| f.mul(x, c)).collect()
    }

    pub fn sub(f: &FqField, a: &[Fq], b: &[Fq]) -> Vec<Fq> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                f.sub(x, y)
            })
            .collect()
    }
}

/// The extension `F_{q^m}` over a shared `F_q`.
pub struct FieldTower {
    fq: Arc<FqField>,
    m: usize,
    /// Monic irreducible of degree `m` over `F_q`, low coefficients first.
    modulus_top: Vec<Fq>,
    /// `X^{m+i} mod modulus_top` for `i = 0..m-1`.
    reduction: Vec<Vec<Fq>>,
    /// Row-major `m x m` matrices over `F_q` of `x -> x^{q^j}` for `j = 0..m-1`.
    frob: Vec<Vec<Fq>>,
}

impl fmt::Debug for FieldTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldTower")
            .field("p", &self.fq.p())
            .field("e", &self.fq.e())
            .field("m", &self.m)
            .field("modulus_top", &self.modulus_top)
            .finish()
    }
}

impl PartialEq for FieldTower {
    fn eq(&self, other: &Self) -> bool {
        *self.fq == *other.fq && self.m == other.m
    }
}
impl Eq for FieldTower {}

/// Builds the tower `F_p ⊂ F_{p^e} ⊂ F_{(p^e)^m}`.
pub fn make_tower(p: u64, e: usize, m: usize) -> Result<Arc<FieldTower>> {
    let fq = FqField::new(p, e)?;
    FieldTower::new(fq, m)
}

impl FieldTower {
    pub fn new(fq: Arc<FqField>, m: usize) -> Result<Arc<FieldTower>> {
        if m == 0 {
            return Err(Error::InvalidParameter("top extension degree m must be >= 1".into()));
        }
        let q = fq.q() as u64;
        // The modulus scan trial-divides by all monic polynomials of degree
        // <= m/2; cap the work so absurd inputs fail fast.
        let scan_cost = q.checked_pow((m / 2) as u32).unwrap_or(u64::MAX);
        if scan_cost > 20_000_000 {
            return Err(Error::InvalidParameter(format!(
                "modulus search for degree {m} over F_{q} is out of desk range"
            )));
        }

        let mut modulus_top = None;
        let total = q.checked_pow(m as u32).unwrap_or(u64::MAX);
        let mut idx = 0u64;
        while idx < total {
            let mut coeffs = vec![0 as Fq; m + 1];
            coeffs[m] = 1;
            let mut be = idx;
            for i in 0..m {
                let pow = q.pow((m - 1 - i) as u32);
                coeffs[i] = (be / pow) as Fq;
                be %= pow;
            }
            if Self::irreducible_over_fq(&fq, &coeffs) {
                modulus_top = Some(coeffs);
                break;
            }
            idx += 1;
        }
        let modulus_top = modulus_top
            .ok_or_else(|| Error::InvalidParameter("no irreducible modulus found".into()))?;

        let mut reduction: Vec<Vec<Fq>> = Vec::with_capacity(m.saturating_sub(1).max(1));
        // X^m = -(c_0 + c_1 X + ... + c_{m-1} X^{m-1}).
        let mut cur: Vec<Fq> = modulus_top[..m].iter().map(|&c| fq.neg(c)).collect();
        reduction.push(cur.clone());
        for _ in 1..m {
            let mut next = vec![0 as Fq; m];
            let top = cur[m - 1];
            next[1..m].copy_from_slice(&cur[..m - 1]);
            if top != 0 {
                for (i, n) in next.iter_mut().enumerate() {
                    *n = fq.add(*n, fq.mul(top, reduction[0][i]));
                }
            }
            reduction.push(next.clone());
            cur = next;
        }

        let mut tower = FieldTower {
            fq,
            m,
            modulus_top,
            reduction,
            frob: Vec::new(),
        };
        tower.build_frobenius();
        tower.check_frobenius()?;
        Ok(Arc::new(tower))
    }

    fn irreducible_over_fq(fq: &FqField, f: &[Fq]) -> bool {
        let d = qpoly::deg(f).expect("nonzero");
        let q = fq.q() as u64;
        for dd in 1..=d / 2 {
            for idx in 0..q.pow(dd as u32) {
                let mut g = vec![0 as Fq; dd + 1];
                g[dd] = 1;
                let mut be = idx;
                for i in 0..dd {
                    let pow = q.pow((dd - 1 - i) as u32);
                    g[i] = (be / pow) as Fq;
                    be %= pow;
                }
                if qpoly::is_zero(&qpoly::rem(fq, f, &g)) {
                    return false;
                }
            }
        }
        true
    }

    fn build_frobenius(&mut self) {
        let m = self.m;
        let mut ident = vec![0 as Fq; m * m];
        for i in 0..m {
            ident[i * m + i] = 1;
        }
        if m == 1 {
            self.frob = vec![ident];
            return;
        }
        // Columns of the q-power map are successive powers of zeta^q.
        let zeta: Fqm = {
            let mut z = vec![0 as Fq; m];
            z[1] = 1;
            z
        };
        let zq = self.pow_m(&zeta, self.fq.q() as u64);
        let mut sigma = vec![0 as Fq; m * m];
        let mut acc = self.one();
        for col in 0..m {
            for row in 0..m {
                sigma[row * m + col] = acc[row];
            }
            acc = self.mul_m(&acc, &zq);
        }
        let mut frob = vec![ident, sigma.clone()];
        for _ in 2..m {
            let prev = frob.last().unwrap();
            let mut next = vec![0 as Fq; m * m];
            for r in 0..m {
                for c in 0..m {
                    let mut s: Fq = 0;
                    for t in 0..m {
                        s = self.fq.add(s, self.fq.mul(prev[r * m + t], sigma[t * m + c]));
                    }
                    next[r * m + c] = s;
                }
            }
            frob.push(next);
        }
        frob.truncate(m);
        self.frob = frob;
    }

    /// `sigma^m` must be the identity and the fixed points of `sigma` must be
    /// exactly the embedded `F_q` (checked exhaustively when `q^m` is small).
    fn check_frobenius(&self) -> Result<()> {
        let m = self.m;
        let last = &self.frob[m - 1];
        let sigma = &self.frob[1 % m];
        let mut comp = vec![0 as Fq; m * m];
        for r in 0..m {
            for c in 0..m {
                let mut s: Fq = 0;
                for t in 0..m {
                    s = self.fq.add(s, self.fq.mul(last[r * m + t], sigma[t * m + c]));
                }
                comp[r * m + c] = s;
            }
        }
        for r in 0..m {
            for c in 0..m {
                let want: Fq = if r == c { 1 } else { 0 };
                if comp[r * m + c] != want {
                    return Err(Error::InvalidParameter(
                        "internal: frobenius does not have order m".into(),
                    ));
                }
            }
        }
        let q = self.fq.q() as u64;
        let size = q.checked_pow(m as u32);
        if let Some(size) = size.filter(|&s| s <= 4096) {
            let mut fixed = 0u64;
            for idx in 0..size {
                let x = self.element_from_index(idx);
                if self.frobenius(&x, 1) == x {
                    fixed += 1;
                }
            }
            if fixed != q {
                return Err(Error::InvalidParameter(
                    "internal: frobenius fixes more than the base subfield".into(),
                ));
            }
        } else {
            for c in 0..self.fq.q() {
                let x = self.embed(c as Fq);
                if self.frobenius(&x, 1) != x {
                    return Err(Error::InvalidParameter(
                        "internal: frobenius moves a base subfield element".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn fq(&self) -> &Arc<FqField> {
        &self.fq
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn q(&self) -> usize {
        self.fq.q()
    }
    pub fn modulus_top(&self) -> &[Fq] {
        &self.modulus_top
    }

    pub fn zero(&self) -> Fqm {
        vec![0; self.m]
    }
    pub fn one(&self) -> Fqm {
        let mut v = vec![0; self.m];
        v[0] = 1;
        v
    }
    pub fn is_zero(&self, a: &[Fq]) -> bool {
        a.iter().all(|&c| c == 0)
    }
    /// Embeds `c ∈ F_q` as the constant coefficient vector.
    pub fn embed(&self, c: Fq) -> Fqm {
        let mut v = vec![0; self.m];
        v[0] = c;
        v
    }
    /// True when the element lies in the embedded `F_q`.
    pub fn in_base(&self, a: &[Fq]) -> bool {
        a[1..].iter().all(|&c| c == 0)
    }

    pub fn add_m(&self, a: &[Fq], b: &[Fq]) -> Fqm {
        a.iter().zip(b).map(|(&x, &y)| self.fq.add(x, y)).collect()
    }
    pub fn sub_m(&self, a: &[Fq], b: &[Fq]) -> Fqm {
        a.iter().zip(b).map(|(&x, &y)| self.fq.sub(x, y)).collect()
    }
    pub fn neg_m(&self, a: &[Fq]) -> Fqm {
        a.iter().map(|&x| self.fq.neg(x)).collect()
    }
    pub fn scale_m(&self, a: &[Fq], c: Fq) -> Fqm {
        a.iter().map(|&x| self.fq.mul(x, c)).collect()
    }

    pub fn mul_m(&self, a: &[Fq], b: &[Fq]) -> Fqm {
        let m = self.m;
        debug_assert_eq!(a.len(), m);
        debug_assert_eq!(b.len(), m);
        let mut prod = vec![0 as Fq; 2 * m - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = self.fq.add(prod[i + j], self.fq.mul(x, y));
            }
        }
        let mut out: Fqm = prod[..m].to_vec();
        for i in m..2 * m - 1 {
            let c = prod[i];
            if c == 0 {
                continue;
            }
            let red = &self.reduction[i - m];
            for (o, &r) in out.iter_mut().zip(red) {
                *o = self.fq.add(*o, self.fq.mul(c, r));
            }
        }
        out
    }

    pub fn pow_m(&self, a: &[Fq], mut k: u64) -> Fqm {
        let mut base = a.to_vec();
        let mut acc = self.one();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul_m(&acc, &base);
            }
            base = self.mul_m(&base, &base);
            k >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm; `None` for zero.
    pub fn inv_m(&self, a: &[Fq]) -> Option<Fqm> {
        if self.is_zero(a) {
            return None;
        }
        let fq = &*self.fq;
        let mut r0: Vec<Fq> = self.modulus_top.clone();
        let mut r1: Vec<Fq> = a.to_vec();
        let mut t0: Vec<Fq> = vec![];
        let mut t1: Vec<Fq> = vec![1];
        while !qpoly::is_zero(&r1) {
            // r0 = qq * r1 + r2
            let d1 = qpoly::deg(&r1).unwrap();
            let lead_inv = fq.inv(r1[d1]);
            let mut r2 = r0.clone();
            let mut qq: Vec<Fq> = vec![0; r0.len()];
            while let Some(d2) = qpoly::deg(&r2) {
                if d2 < d1 {
                    break;
                }
                let c = fq.mul(r2[d2], lead_inv);
                qq[d2 - d1] = fq.add(qq[d2 - d1], c);
                for i in 0..=d1 {
                    let t = fq.mul(c, r1[i]);
                    r2[d2 - d1 + i] = fq.sub(r2[d2 - d1 + i], t);
                }
            }
            let t2 = qpoly::sub(fq, &t0, &qpoly::mul(fq, &qq, &t1));
            r0 = r1;
            r1 = r2;
            t0 = t1;
            t1 = t2;
        }
        // r0 is now gcd = nonzero constant; t0 the cofactor of `a`.
        let d0 = qpoly::deg(&r0).expect("gcd nonzero");
        debug_assert_eq!(d0, 0, "modulus is irreducible");
        let c = fq.inv(r0[0]);
        let mut out = qpoly::scale(fq, &t0, c);
        out.resize(self.m, 0);
        Some(out)
    }

    /// `x^(q^j)` with `j` reduced mod `m`.
    pub fn frobenius(&self, x: &[Fq], j: usize) -> Fqm {
        let mat = &self.frob[j % self.m];
        let m = self.m;
        let mut out = vec![0 as Fq; m];
        for (r, o) in out.iter_mut().enumerate() {
            let mut s: Fq = 0;
            for c in 0..m {
                let v = x[c];
                if v != 0 {
                    s = self.fq.add(s, self.fq.mul(mat[r * m + c], v));
                }
            }
            *o = s;
        }
        out
    }

    /// Power-basis coordinate map into `F_q^m`; the identity on the stored
    /// representation, kept explicit so call sites name the direction.
    pub fn flatten(&self, x: &[Fq]) -> Vec<Fq> {
        debug_assert_eq!(x.len(), self.m);
        x.to_vec()
    }

    pub fn unflatten(&self, v: &[Fq]) -> Result<Fqm> {
        if v.len() != self.m {
            return Err(Error::Incompatible(format!(
                "coordinate vector has length {}, tower degree is {}",
                v.len(),
                self.m
            )));
        }
        Ok(v.to_vec())
    }

    /// Concatenated coordinates of a block of elements.
    pub fn flatten_blocks(&self, xs: &[Fqm]) -> Vec<Fq> {
        let mut out = Vec::with_capacity(xs.len() * self.m);
        for x in xs {
            out.extend_from_slice(x);
        }
        out
    }

    pub fn unflatten_blocks(&self, v: &[Fq]) -> Result<Vec<Fqm>> {
        if v.len() % self.m != 0 {
            return Err(Error::Incompatible(format!(
                "vector length {} is not a multiple of m = {}",
                v.len(),
                self.m
            )));
        }
        Ok(v.chunks(self.m).map(|c| c.to_vec()).collect())
    }

    /// Element from a little-endian base-`q` index, for enumerations.
    pub fn element_from_index(&self, idx: u64) -> Fqm {
        let q = self.fq.q() as u64;
        let mut v = vec![0 as Fq; self.m];
        let mut rest = idx;
        for c in v.iter_mut() {
            *c = (rest % q) as Fq;
            rest /= q;
        }
        v
    }

    pub fn element_index(&self, x: &[Fq]) -> u64 {
        let q = self.fq.q() as u64;
        let mut idx = 0u64;
        for &c in x.iter().rev() {
            idx = idx * q + c as u64;
        }
        idx
    }
}

/// Matrix over `F_q` of the linearized operator
/// `b -> sum_{l=1}^{s} a_l * b^(q^(l-1))` on `F_{q^m}`, in the power basis.
///
/// When some `a_l` is nonzero the kernel is cut out by a nonzero linearized
/// polynomial of q-degree at most `s - 1`, so it has dimension at most
/// `s - 1` and the matrix has rank at least `m - s + 1`.
pub fn linearized_op_matrix(tower: &FieldTower, a: &[Fqm]) -> Result<GfMatrix> {
    let m = tower.m();
    let s = a.len();
    if s == 0 || s > m {
        return Err(Error::InvalidParameter(format!(
            "linearized operator needs 1 <= s <= m coefficients, got s = {s}, m = {m}"
        )));
    }
    for c in a {
        if c.len() != m {
            return Err(Error::Incompatible("coefficient has wrong tower degree".into()));
        }
    }
    let mut mat = GfMatrix::zero(tower.fq().clone(), m, m);
    for col in 0..m {
        let mut basis = tower.zero();
        basis[col] = 1;
        let mut image = tower.zero();
        for (l, coeff) in a.iter().enumerate() {
            if tower.is_zero(coeff) {
                continue;
            }
            let shifted = tower.frobenius(&basis, l);
            image = tower.add_m(&image, &tower.mul_m(coeff, &shifted));
        }
        for row in 0..m {
            mat.set(row, col, image[row]);
        }
    }
    Ok(mat)
}

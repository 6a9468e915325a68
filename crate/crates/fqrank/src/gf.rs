//! Exact arithmetic in GF(p^m) for p prime and q = p^m <= 2^16.
//!
//! Elements are canonical integers in [0, q): the value encodes the
//! coefficient vector of the residue in base p, constant term in the least
//! significant digit. The modulus is the lexicographically smallest monic
//! irreducible polynomial of degree m (coefficients compared from the
//! constant term upward), so construction is deterministic without shipping
//! modulus tables. For m > 1 multiplication goes through exp/log tables over
//! a fixed generator; for m = 1 arithmetic is plain modular.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Canonical element encoding: an integer in [0, q).
pub type Elem = u16;

pub const MAX_Q: u64 = 1 << 16;

#[derive(Debug)]
pub struct FieldSpec {
    p: u64,
    m: u32,
    q: u64,
    /// Coefficients of the monic irreducible modulus, constant term first,
    /// length m + 1, leading coefficient 1.
    modulus: Vec<u64>,
    /// exp[i] = g^i for a fixed generator g, length q - 1; empty when m = 1.
    exp: Vec<Elem>,
    /// log[exp[i]] = i; log[0] is unused. Empty when m = 1.
    log: Vec<u16>,
}

/// A concrete finite field, cheap to clone and share across workers.
#[derive(Clone, Debug)]
pub struct Field(Arc<FieldSpec>);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.0.p == other.0.p && self.0.m == other.0.m
    }
}
impl Eq for Field {}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.m == 1 {
            write!(f, "{}", self.0.p)
        } else {
            write!(f, "{}^{}", self.0.p, self.0.m)
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// --- dense polynomials over GF(p), constant term first ---

fn poly_trim(v: &mut Vec<u64>) {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + ai * bj) % p;
        }
    }
    poly_trim(&mut out);
    out
}

/// Remainder of a by the monic polynomial b.
fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() - 1 >= db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let lead = r[dr];
        if lead != 0 {
            for i in 0..=db {
                let idx = dr - db + i;
                r[idx] = (r[idx] + p - (lead * b[i]) % p) % p;
            }
        }
        r.pop();
        poly_trim(&mut r);
        if r.len() == 1 {
            break;
        }
    }
    r
}

fn poly_is_zero(a: &[u64]) -> bool {
    a.iter().all(|&c| c == 0)
}

/// Trial division against every monic divisor of degree <= deg(f)/2.
fn is_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    if deg == 1 {
        return true;
    }
    if f[0] == 0 {
        return false; // divisible by x
    }
    for dg in 1..=deg / 2 {
        // monic g of degree dg, all coefficient vectors
        let count = p.pow(dg as u32);
        for code in 0..count {
            let mut g = Vec::with_capacity(dg + 1);
            let mut c = code;
            for _ in 0..dg {
                g.push(c % p);
                c /= p;
            }
            g.push(1);
            if poly_is_zero(&poly_rem(f, &g, p)) {
                return false;
            }
        }
    }
    true
}

/// Monic degree-m polynomials ordered by the canonical integer code
/// sum c_i p^i of the non-leading coefficients. Over GF(2) this picks
/// x^3 + x + 1 for degree 3.
fn monic_candidates(p: u64, m: u32) -> impl Iterator<Item = Vec<u64>> {
    let total = p.pow(m);
    (0..total).map(move |code| {
        let mut coeffs = vec![0u64; m as usize + 1];
        let mut c = code;
        for coeff in coeffs.iter_mut().take(m as usize) {
            *coeff = c % p;
            c /= p;
        }
        coeffs[m as usize] = 1;
        coeffs
    })
}

impl FieldSpec {
    fn elem_to_poly(&self, a: Elem) -> Vec<u64> {
        let mut v = vec![0u64; self.m as usize];
        let mut x = a as u64;
        for d in v.iter_mut() {
            *d = x % self.p;
            x /= self.p;
        }
        v
    }

    fn poly_to_elem(&self, v: &[u64]) -> Elem {
        let mut acc = 0u64;
        for &d in v.iter().rev() {
            acc = acc * self.p + d;
        }
        acc as Elem
    }

    /// Table-free multiplication, used only while bootstrapping the tables.
    fn mul_slow(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            return 0;
        }
        let pa = self.elem_to_poly(a);
        let pb = self.elem_to_poly(b);
        let prod = poly_mul(&pa, &pb, self.p);
        let mut r = poly_rem(&prod, &self.modulus, self.p);
        r.resize(self.m as usize, 0);
        self.poly_to_elem(&r)
    }

    fn pow_slow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc: Elem = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
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

impl Field {
    /// Build GF(p^m) with the lexicographically smallest monic irreducible
    /// modulus. Deterministic across runs and platforms.
    pub fn build(p: u64, m: u32) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if m < 1 {
            return Err(Error::BadRange("extension degree must be >= 1".into()));
        }
        let q = p.checked_pow(m).filter(|&q| q <= MAX_Q);
        let q = match q {
            Some(q) => q,
            None => return Err(Error::DegreeTooLarge { p, m }),
        };

        let modulus = monic_candidates(p, m)
            .find(|f| is_irreducible(f, p))
            .expect("an irreducible polynomial of every degree exists");

        let mut spec = FieldSpec {
            p,
            m,
            q,
            modulus,
            exp: Vec::new(),
            log: Vec::new(),
        };

        if m > 1 {
            let order = q - 1;
            let factors = prime_factors(order);
            let gen = (2..q)
                .map(|g| g as Elem)
                .find(|&g| factors.iter().all(|&l| spec.pow_slow(g, order / l) != 1))
                .expect("GF(q)* is cyclic");
            let mut exp = Vec::with_capacity(order as usize);
            let mut log = vec![0u16; q as usize];
            let mut cur: Elem = 1;
            for i in 0..order {
                exp.push(cur);
                log[cur as usize] = i as u16;
                cur = spec.mul_slow(cur, gen);
            }
            debug_assert_eq!(cur, 1, "generator order must be q-1");
            spec.exp = exp;
            spec.log = log;
        }

        Ok(Field(Arc::new(spec)))
    }

    /// Parse "p" or "p^m".
    pub fn parse(s: &str) -> Result<Field> {
        let (p, m) = match s.split_once('^') {
            Some((p, m)) => (
                p.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad field {s:?}")))?,
                m.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad field {s:?}")))?,
            ),
            None => (
                s.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad field {s:?}")))?,
                1,
            ),
        };
        Field::build(p, m)
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }
    pub fn m(&self) -> u32 {
        self.0.m
    }
    pub fn q(&self) -> u64 {
        self.0.q
    }
    pub fn modulus(&self) -> &[u64] {
        &self.0.modulus
    }

    pub fn elems(&self) -> impl Iterator<Item = Elem> {
        (0..self.0.q).map(|x| x as Elem)
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let s = &*self.0;
        if s.p == 2 {
            return a ^ b;
        }
        if s.m == 1 {
            return ((a as u64 + b as u64) % s.p) as Elem;
        }
        // digit-wise addition mod p
        let mut out = 0u64;
        let (mut x, mut y) = (a as u64, b as u64);
        let mut place = 1u64;
        for _ in 0..s.m {
            out += ((x % s.p + y % s.p) % s.p) * place;
            x /= s.p;
            y /= s.p;
            place *= s.p;
        }
        out as Elem
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        let s = &*self.0;
        if s.p == 2 {
            return a;
        }
        if s.m == 1 {
            return if a == 0 { 0 } else { (s.p - a as u64) as Elem };
        }
        let mut out = 0u64;
        let mut x = a as u64;
        let mut place = 1u64;
        for _ in 0..s.m {
            let d = x % s.p;
            out += if d == 0 { 0 } else { s.p - d } * place;
            x /= s.p;
            place *= s.p;
        }
        out as Elem
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        let s = &*self.0;
        if a == 0 || b == 0 {
            return 0;
        }
        if s.m == 1 {
            return ((a as u64 * b as u64) % s.p) as Elem;
        }
        let order = s.q - 1;
        let i = (s.log[a as usize] as u64 + s.log[b as usize] as u64) % order;
        s.exp[i as usize]
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        let s = &*self.0;
        if a == 0 {
            return Err(Error::DivisionByZero);
        }
        if s.m == 1 {
            return Ok(self.pow(a, s.p - 2));
        }
        let order = s.q - 1;
        let i = (order - s.log[a as usize] as u64) % order;
        Ok(s.exp[i as usize])
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Elem, e: u64) -> Elem {
        let s = &*self.0;
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        if s.m == 1 {
            let mut base = a as u64;
            let mut acc = 1u64;
            let mut e = e;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base % s.p;
                }
                base = base * base % s.p;
                e >>= 1;
            }
            return acc as Elem;
        }
        let order = s.q - 1;
        let i = (s.log[a as usize] as u64 * (e % order)) % order;
        s.exp[i as usize]
    }

    /// Evaluate a polynomial with GF(p) coefficients (constant first) at x.
    pub fn eval_prime_poly(&self, coeffs: &[u64], x: Elem) -> Elem {
        let mut acc: Elem = 0;
        for &c in coeffs.iter().rev() {
            acc = self.add(self.mul(acc, x), (c % self.0.p) as Elem);
        }
        acc
    }
}

/// The unique-by-construction embedding GF(p^m) -> GF(p^{m k}) that sends the
/// base generator of the power basis (the class of x) to the smallest root of
/// the base modulus in the extension, in canonical integer order.
#[derive(Debug)]
pub struct Embedding {
    base: Field,
    ext: Field,
    table: Vec<Elem>,
}

impl Embedding {
    pub fn new(base: &Field, ext: &Field) -> Result<Embedding> {
        if base.p() != ext.p() || ext.m() % base.m() != 0 {
            return Err(Error::NotAnExtension {
                base_p: base.p(),
                base_m: base.m(),
                ext_p: ext.p(),
                ext_m: ext.m(),
            });
        }
        // smallest root of the base modulus inside the extension
        let gamma = (0..ext.q())
            .map(|t| t as Elem)
            .find(|&t| ext.eval_prime_poly(base.modulus(), t) == 0)
            .expect("irreducible of degree m | mk splits in GF(p^{mk})");
        let mut powers = Vec::with_capacity(base.m() as usize);
        let mut cur: Elem = 1;
        for _ in 0..base.m() {
            powers.push(cur);
            cur = ext.mul(cur, gamma);
        }
        let p = base.p();
        let mut table = Vec::with_capacity(base.q() as usize);
        for a in 0..base.q() {
            let mut acc: Elem = 0;
            let mut x = a;
            for &pw in &powers {
                let digit = (x % p) as Elem; // GF(p) scalar, fixed by the embedding
                acc = ext.add(acc, ext.mul(digit, pw));
                x /= p;
            }
            table.push(acc);
        }
        Ok(Embedding {
            base: base.clone(),
            ext: ext.clone(),
            table,
        })
    }

    #[inline]
    pub fn map(&self, a: Elem) -> Elem {
        self.table[a as usize]
    }

    pub fn base(&self) -> &Field {
        &self.base
    }
    pub fn ext(&self) -> &Field {
        &self.ext
    }
}

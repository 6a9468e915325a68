//! Stratified point counting over extension fields, exact bias and analytic
//! rank, geometric rank via rank strata, and Gaussian binomial counts.
//!
//! The geometric rank of T is min over c of codim(X_c) + c, where X_c is the
//! set of mode-d covectors u whose slice T_u has invariant c (matrix rank at
//! order 3, recursively computed GR above that). Codimensions come from the
//! growth of exact point counts |X_c(F_{q^k})| for k = 1..K; the `certain`
//! flag makes ambiguous growth explicit instead of silently wrong.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};
use crate::linalg::RankEngine;
use crate::tensor::{Covector, FqTensor};

/// Default enumeration budget: ~2^28 rank computations.
pub const DEFAULT_BUDGET: u128 = 1 << 28;
/// Default number of extension degrees used for dimension inference.
pub const DEFAULT_K: u32 = 3;

/// Exact stratum counts N_c(k) = |X_c(F_{q^k})| for k = 1..K.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratumProfile {
    pub k_max: u32,
    /// counts[c][k-1] = N_c(k); strata absent at every k are omitted.
    pub counts: BTreeMap<usize, Vec<u64>>,
}

impl StratumProfile {
    /// Sum over c of N_c(k) must be q^{k n_d}.
    pub fn total(&self, k: u32) -> u64 {
        self.counts.values().map(|v| v[(k - 1) as usize]).sum()
    }
}

/// Dimension of (the closure of) a constructible set inferred from point
/// counts over successive extension fields.
#[derive(Clone, Debug, PartialEq)]
pub struct DimEstimate {
    pub counts: Vec<u64>,
    /// None means the stratum is empty at every tested degree.
    pub dim: Option<usize>,
    pub certain: bool,
    pub ambient: usize,
}

impl DimEstimate {
    /// Empty strata take codim = ambient by convention.
    pub fn codim(&self) -> usize {
        match self.dim {
            Some(d) => self.ambient - d,
            None => self.ambient,
        }
    }
}

/// Exact bias as N / q^E with N a big integer; the analytic rank is
/// E - log_q N, reported exactly through (z, e) and as a decimal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiasValue {
    pub z: BigUint,
    pub e: u32,
    pub field: Field,
}

impl BiasValue {
    pub fn bias_f64(&self) -> f64 {
        let qe = BigUint::from(self.field.q()).pow(self.e);
        big_ratio_f64(&self.z, &qe)
    }

    pub fn analytic_rank_f64(&self) -> f64 {
        let q = self.field.q() as f64;
        self.e as f64 - big_log(&self.z) / q.ln()
    }
}

fn big_log(x: &BigUint) -> f64 {
    // ln via the top 64 bits plus the discarded exponent
    let bits = x.bits();
    if bits <= 64 {
        (x.to_u64().unwrap() as f64).ln()
    } else {
        let shift = bits - 64;
        let top = (x >> shift).to_u64().unwrap() as f64;
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

fn big_ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    (big_log(a) - big_log(b)).exp()
}

/// Result of a geometric rank computation.
#[derive(Clone, Debug)]
pub struct GrResult {
    pub value: usize,
    pub certain: bool,
    pub profile: StratumProfile,
    /// Per-stratum dimension inference backing the value.
    pub strata: Vec<(usize, DimEstimate)>,
}

/// Extension field GF(q^k) of the tensor's field, respecting the q cap.
fn extension_of(field: &Field, k: u32) -> Result<Field> {
    Field::build(field.p(), field.m() * k)
}

/// Exact counts of u in F_{q^k}^{n_3} by the rank of the slice sum u_i T_i.
/// d = 3 fast path for the stratum profile.
pub fn rank_strata(t: &FqTensor, k: u32, budget: u128) -> Result<BTreeMap<usize, u64>> {
    if t.order() != 3 {
        return Err(Error::OrderUnsupported(t.order()));
    }
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let ext = extension_of(t.field(), k)?;
    let q_ext = ext.q() as u128;
    let needed = q_ext.checked_pow(n3 as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let t_ext = t.extend_field(k)?;
    // mode-3 slices as flat n1*n2 buffers over the extension field
    let slices: Vec<Vec<Elem>> = (1..=n3)
        .map(|i| t_ext.slice(3, i).map(|s| s.entries().to_vec()))
        .collect::<Result<_>>()?;
    let engine = RankEngine::new(&ext);
    let total = needed as u64;
    let qe = q_ext as u64;
    let max_rank = n1.min(n2);

    let chunk: u64 = 1 << 14;
    let n_chunks = total.div_ceil(chunk);
    let partials: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = (lo + chunk).min(total);
            let mut counts = vec![0u64; max_rank + 1];
            let mut buf = vec![0 as Elem; n1 * n2];
            let mut digits = vec![0 as Elem; n3];
            for u in lo..hi {
                let mut x = u;
                for d in digits.iter_mut() {
                    *d = (x % qe) as Elem;
                    x /= qe;
                }
                for b in buf.iter_mut() {
                    *b = 0;
                }
                for (i, s) in slices.iter().enumerate() {
                    let c = digits[i];
                    if c == 0 {
                        continue;
                    }
                    for (b, &v) in buf.iter_mut().zip(s.iter()) {
                        *b = ext.add(*b, ext.mul(c, v));
                    }
                }
                let r = engine.rank(n1, n2, &buf);
                counts[r] += 1;
            }
            counts
        })
        .collect();

    let mut counts = vec![0u64; max_rank + 1];
    for p in partials {
        for (a, b) in counts.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .collect())
}

/// Infer the dimension of a stratum's closure from its point counts
/// N(k), k = 1..K.
///
/// Two estimates are combined. The ratio of the last two nonzero counts
/// cancels component multiplicity but is biased upward by depletion terms
/// of the shape (q^k - 1)^e; the single-point estimate log_q N / k is
/// biased upward by multiplicity but barely by depletion. Their minimum is
/// right whenever either bias is small, which covers everything at desk
/// scale. `certain` holds when the ratio estimate stands on its own and
/// the counts fit the model a * q^{k e} with plausible multiplicity a;
/// otherwise the caller should raise K.
pub fn estimate_dim(counts: &[u64], q: u64, ambient: usize) -> Result<DimEstimate> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mk = |dim, certain| DimEstimate {
        counts: counts.to_vec(),
        dim,
        certain,
        ambient,
    };
    if counts.iter().all(|&n| n == 0) {
        return Ok(mk(None, true));
    }
    // exact powers N(k) = q^{k e} pin the dimension outright
    if counts[0] > 0 {
        let e0 = (counts[0] as f64).ln() / (q as f64).ln();
        let e = e0.round() as i64;
        if e >= 0
            && (e as usize) <= ambient
            && counts
                .iter()
                .enumerate()
                .all(|(i, &n)| n as u128 == (q as u128).pow((i as u32 + 1) * e as u32))
        {
            return Ok(mk(Some(e as usize), true));
        }
    }
    let lnq = (q as f64).ln();
    // 1-based extension degrees with nonzero counts
    let nz: Vec<usize> = (0..counts.len())
        .filter(|&i| counts[i] > 0)
        .map(|i| i + 1)
        .collect();
    let clamp = |x: f64| (x.round() as i64).clamp(0, ambient as i64) as usize;
    let k_last = *nz.last().unwrap();
    let e_point = (counts[k_last - 1] as f64).ln() / (k_last as f64 * lnq);
    let (e, ratio_ok) = if nz.len() >= 2 {
        let k_prev = nz[nz.len() - 2];
        let e_ratio = ((counts[k_last - 1] as f64).ln() - (counts[k_prev - 1] as f64).ln())
            / ((k_last - k_prev) as f64 * lnq);
        let e = clamp(e_ratio).min(clamp(e_point));
        // the ratio estimate must either agree after clamping or sit close
        // to the chosen value; a disagreement means ambiguous growth
        (e, clamp(e_ratio) == e || (e_ratio - e as f64).abs() <= 0.45)
    } else {
        (clamp(e_point), k_last >= 2)
    };
    // multiplicity from the deepest count; a << 1 signals a misread slope
    let log_a = (counts[k_last - 1] as f64).ln() - (k_last * e) as f64 * lnq;
    let mut fits = log_a >= (0.4f64).ln() - 1e-9;
    if nz.len() >= 2 {
        let k_prev = nz[nz.len() - 2];
        let model = log_a + (k_prev * e) as f64 * lnq;
        fits &= ((counts[k_prev - 1] as f64).ln() - model).abs() <= (4.0f64).ln() + 1e-9;
    }
    Ok(mk(Some(e), ratio_ok && fits))
}

fn scalar_orbit_key(ext: &Field, digits: &[Elem]) -> Vec<Elem> {
    match digits.iter().position(|&d| d != 0) {
        None => digits.to_vec(),
        Some(i) => {
            let inv = ext.inv(digits[i]).expect("nonzero");
            digits.iter().map(|&d| ext.mul(inv, d)).collect()
        }
    }
}

/// Stratum counts for order >= 4: the invariant of u is the recursively
/// computed geometric rank of the slice <T, u>. Feasible only at tiny
/// dimensions; GR is scale-invariant so the value is memoized per scalar
/// orbit of u.
fn gr_strata(t: &FqTensor, k: u32, big_k: u32, budget: u128) -> Result<(BTreeMap<usize, u64>, bool)> {
    let d = t.order();
    let nd = *t.dims().last().unwrap();
    let ext = extension_of(t.field(), k)?;
    let q_ext = ext.q() as u128;
    let needed = q_ext.checked_pow(nd as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let t_ext = t.extend_field(k)?;
    let mut memo: std::collections::HashMap<Vec<Elem>, usize> = Default::default();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut certain = true;
    let total = needed as u64;
    let qe = q_ext as u64;
    let mut digits = vec![0 as Elem; nd];
    for u in 0..total {
        let mut x = u;
        for dd in digits.iter_mut() {
            *dd = (x % qe) as Elem;
            x /= qe;
        }
        let key = scalar_orbit_key(&ext, &digits);
        let c = match memo.get(&key) {
            Some(&c) => c,
            None => {
                let tu = t_ext.contract(&[Covector {
                    mode: d,
                    coords: key.clone(),
                }])?;
                let sub = geometric_rank(&tu, big_k, budget)?;
                certain &= sub.certain;
                memo.insert(key, sub.value);
                sub.value
            }
        };
        *counts.entry(c).or_insert(0) += 1;
    }
    Ok((counts, certain))
}

/// Upper bound min rank(T_J) over proper nonempty mode subsets J; bounds
/// GR and PR from above (a single flattening is a one-term decomposition).
pub fn flattening_upper_bound(t: &FqTensor) -> usize {
    let d = t.order();
    let mut best = usize::MAX;
    for mask in 1..(1u32 << d) - 1 {
        let j: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        if let Ok(m) = t.flatten(&j) {
            best = best.min(m.rank());
        }
    }
    best
}

/// Geometric rank via stratified point counting: min over c of
/// codim(X_c) + c. Order 2 is plain matrix rank; order 3 strata use the
/// packed rank kernel; order >= 4 recurses on the slice invariant.
pub fn geometric_rank(t: &FqTensor, big_k: u32, budget: u128) -> Result<GrResult> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    if d == 2 {
        let m = t.flatten(&[1])?;
        return Ok(GrResult {
            value: m.rank(),
            certain: true,
            profile: StratumProfile {
                k_max: 0,
                counts: BTreeMap::new(),
            },
            strata: Vec::new(),
        });
    }
    let nd = *t.dims().last().unwrap();
    let q = t.field().q();
    let mut per_k: Vec<BTreeMap<usize, u64>> = Vec::new();
    let mut slices_certain = true;

    // assemble the per-stratum count rows and run dimension inference
    let evaluate = |per_k: &[BTreeMap<usize, u64>], slices_certain: bool| -> Result<_> {
        let mut all_c: std::collections::BTreeSet<usize> = Default::default();
        for m in per_k {
            all_c.extend(m.keys().copied());
        }
        let mut profile_counts: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
        for &c in &all_c {
            let v: Vec<u64> = per_k.iter().map(|m| *m.get(&c).unwrap_or(&0)).collect();
            profile_counts.insert(c, v);
        }
        let mut value = usize::MAX;
        let mut certain = slices_certain;
        let mut strata = Vec::new();
        for (&c, counts) in &profile_counts {
            let est = estimate_dim(counts, q, nd)?;
            if est.dim.is_some() {
                value = value.min(est.codim() + c);
                certain &= est.certain;
            }
            strata.push((c, est));
        }
        Ok((profile_counts, value, certain, strata))
    };

    for k in 1..=big_k {
        let counts = if d == 3 {
            rank_strata(t, k, budget)?
        } else {
            let (c, ok) = gr_strata(t, k, big_k, budget)?;
            slices_certain &= ok;
            c
        };
        per_k.push(counts);
    }
    let (mut profile_counts, mut value, mut certain, mut strata) =
        evaluate(&per_k, slices_certain)?;
    // ambiguous growth: go up to two degrees deeper (the escape hatch for
    // certain = false), stopping at the field cap or the budget
    let mut k_used = big_k;
    while !certain && k_used < big_k + 2 && extension_of(t.field(), k_used + 1).is_ok() {
        let probe = if d == 3 {
            rank_strata(t, k_used + 1, budget)
        } else {
            gr_strata(t, k_used + 1, big_k, budget).map(|(c, ok)| {
                slices_certain &= ok;
                c
            })
        };
        match probe {
            Ok(counts) => {
                per_k.push(counts);
                k_used += 1;
                (profile_counts, value, certain, strata) = evaluate(&per_k, slices_certain)?;
            }
            Err(Error::BudgetExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    // GR <= rank of any flattening; counting can only overshoot when a
    // stratum dimension was misread
    let bound = flattening_upper_bound(t);
    if bound < value {
        value = bound;
        certain = false;
    }
    Ok(GrResult {
        value,
        certain,
        profile: StratumProfile {
            k_max: k_used,
            counts: profile_counts,
        },
        strata,
    })
}

/// |Z(F_{q^k})| for Z = {(u_2,...,u_d) : <T, u_2 x ... x u_d> = 0},
/// computed by the rank recursion: enumerate modes d down to 3, then count
/// q^{k (n_2 - rank)} kernels at the matrix base case.
pub fn z_count(t: &FqTensor, k: u32, budget: u128) -> Result<BigUint> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let ext = extension_of(t.field(), k)?;
    let q_ext = ext.q() as u128;
    let enumerated: u128 = t.dims()[2..]
        .iter()
        .try_fold(1u128, |acc, &n| {
            q_ext.checked_pow(n as u32).and_then(|p| acc.checked_mul(p))
        })
        .unwrap_or(u128::MAX);
    if enumerated > budget {
        return Err(Error::BudgetExceeded {
            needed: enumerated,
            budget,
        });
    }
    let t_ext = t.extend_field(k)?;
    z_count_rec(&t_ext)
}

fn z_count_rec(t: &FqTensor) -> Result<BigUint> {
    let d = t.order();
    let ext = t.field();
    let q = ext.q();
    if d == 2 {
        let m = t.flatten(&[1])?;
        let n2 = t.dims()[1];
        return Ok(BigUint::from(q).pow((n2 - m.rank()) as u32));
    }
    if d == 3 {
        // parallel over mode-3 covectors
        let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
        let slices: Vec<Vec<Elem>> = (1..=n3)
            .map(|i| t.slice(3, i).map(|s| s.entries().to_vec()))
            .collect::<Result<_>>()?;
        let engine = RankEngine::new(ext);
        let total = (q as u128).pow(n3 as u32) as u64;
        let chunk: u64 = 1 << 14;
        let n_chunks = total.div_ceil(chunk);
        let partial: Vec<BigUint> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * chunk;
                let hi = (lo + chunk).min(total);
                let mut acc = BigUint::zero();
                let mut buf = vec![0 as Elem; n1 * n2];
                let mut digits = vec![0 as Elem; n3];
                for u in lo..hi {
                    let mut x = u;
                    for dd in digits.iter_mut() {
                        *dd = (x % q) as Elem;
                        x /= q;
                    }
                    for b in buf.iter_mut() {
                        *b = 0;
                    }
                    for (i, s) in slices.iter().enumerate() {
                        let c = digits[i];
                        if c == 0 {
                            continue;
                        }
                        for (b, &v) in buf.iter_mut().zip(s.iter()) {
                            *b = ext.add(*b, ext.mul(c, v));
                        }
                    }
                    let r = engine.rank(n1, n2, &buf);
                    acc += BigUint::from(q).pow((n2 - r) as u32);
                }
                acc
            })
            .collect();
        return Ok(partial.into_iter().sum());
    }
    // d >= 4: enumerate the last mode and recurse
    let nd = *t.dims().last().unwrap();
    let total = (q as u128).pow(nd as u32) as u64;
    let mut acc = BigUint::zero();
    let mut digits = vec![0 as Elem; nd];
    for u in 0..total {
        let mut x = u;
        for dd in digits.iter_mut() {
            *dd = (x % q) as Elem;
            x /= q;
        }
        let tu = t.contract(&[Covector {
            mode: d,
            coords: digits.clone(),
        }])?;
        acc += z_count_rec(&tu)?;
    }
    Ok(acc)
}

/// Exact bias and analytic rank at k = 1: Z = z_count(T, 1), E = n_2+...+n_d.
pub fn bias_and_ar(t: &FqTensor, budget: u128) -> Result<BiasValue> {
    let z = z_count(t, 1, budget)?;
    let e: u32 = t.dims()[1..].iter().map(|&n| n as u32).sum();
    Ok(BiasValue {
        z,
        e,
        field: t.field().clone(),
    })
}

/// Diagnostic counting bound C2 (c/C1 + n_d - log_q m); the constants are
/// caller-supplied because the underlying stability constants are not
/// explicit.
pub fn gr_upper_via_counting(
    t: &FqTensor,
    c: usize,
    m: &BigUint,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if c1 <= 0.0 || c2 <= 0.0 {
        return Err(Error::BadConstants);
    }
    if m < &BigUint::one() {
        return Err(Error::BadRange("stratum count m must be >= 1".into()));
    }
    let nd = *t.dims().last().unwrap() as f64;
    let q = t.field().q() as f64;
    let log_q_m = big_log(m) / q.ln();
    Ok(c2 * (c as f64 / c1 + nd - log_q_m))
}

/// Number of c-dimensional subspaces of F_q^n, by the exact product formula
/// (q^n - 1)...(q^n - q^{c-1}) / ((q^c - 1)...(q^c - q^{c-1})).
pub fn gaussian_binomial(c: u32, n: u32, q: u64) -> Result<BigUint> {
    if c > n || q < 2 {
        return Err(Error::BadRange(format!(
            "gaussian binomial needs 0 <= c <= n and q >= 2, got c={c}, n={n}, q={q}"
        )));
    }
    let qn = BigUint::from(q).pow(n);
    let qc = BigUint::from(q).pow(c);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..c {
        let qi = BigUint::from(q).pow(i);
        num *= &qn - &qi;
        den *= &qc - &qi;
    }
    let (quot, rem) = num_integer_div_rem(&num, &den);
    assert!(rem.is_zero(), "gaussian binomial division must be exact");
    Ok(quot)
}

fn num_integer_div_rem(a: &BigUint, b: &BigUint) -> (BigUint, BigUint) {
    (a / b, a % b)
}

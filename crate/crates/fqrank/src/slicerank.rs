//! Slice rank and partition rank at desk scale.
//!
//! Upper bounds come from single-mode flattening factorizations and a
//! greedy peel; the exact value for order 3 uses the vanishing-on-subspaces
//! criterion (SR <= r iff T vanishes on a product of subspaces of total
//! codimension r), which is validated against a direct
//! decomposition-enumeration oracle at tiny scale before being trusted.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};
use crate::linalg::FqMatrix;
use crate::strata::{flattening_upper_bound, gaussian_binomial, geometric_rank};
use crate::tensor::FqTensor;

/// Default guard on the subspace-enumeration product for the exact method.
pub const DEFAULT_SR_BUDGET: u128 = 1 << 24;
/// Default guard on term combinations for the decomposition oracle.
pub const DEFAULT_ORACLE_BUDGET: u128 = 1 << 24;

/// One term of a slice decomposition: a vector along `mode` times a
/// cofactor tensor on the remaining modes. Its mode flattening has rank 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceTerm {
    pub mode: usize,
    pub vector: Vec<Elem>,
    pub cofactor: FqTensor,
}

impl SliceTerm {
    /// Expand the term to a full order-d tensor.
    pub fn expand(&self, dims: &[usize]) -> Result<FqTensor> {
        let f = self.cofactor.field().clone();
        let mut t = FqTensor::zero(f.clone(), dims.to_vec())?;
        let d = dims.len();
        let mut idx = vec![0usize; d];
        loop {
            let rest: Vec<usize> = (0..d).filter(|&i| i != self.mode - 1).map(|i| idx[i]).collect();
            let v = f.mul(self.vector[idx[self.mode - 1]], self.cofactor.get(&rest));
            t.set(&idx, v);
            let mut pos = d;
            loop {
                if pos == 0 {
                    return Ok(t);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < dims[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}

/// A list of rank-1 terms summing to T.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceDecomposition {
    pub terms: Vec<SliceTerm>,
}

impl SliceDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms used per mode, indexed 1..d.
    pub fn counts_per_mode(&self, d: usize) -> Vec<usize> {
        let mut counts = vec![0usize; d];
        for t in &self.terms {
            counts[t.mode - 1] += 1;
        }
        counts
    }

    /// Check that the terms reconstruct T exactly.
    pub fn reconstructs(&self, t: &FqTensor) -> Result<bool> {
        let mut acc = FqTensor::zero(t.field().clone(), t.dims().to_vec())?;
        for term in &self.terms {
            acc = acc.add(&term.expand(t.dims())?)?;
        }
        Ok(acc == *t)
    }
}

/// Rank factorization of the mode-j flattening: r terms, each a vector
/// along mode j with a cofactor read off the reduced echelon rows.
fn mode_factorization(t: &FqTensor, mode: usize) -> Result<Vec<SliceTerm>> {
    let f = t.field();
    let nj = t.dims()[mode - 1];
    let m = t.flatten(&[mode])?;
    let mut r = m.clone();
    let pivots = r.rref();
    let rest_dims: Vec<usize> = t
        .dims()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != mode - 1)
        .map(|(_, &n)| n)
        .collect();
    let rest_dims = if rest_dims.is_empty() {
        vec![1]
    } else {
        rest_dims
    };
    let mut terms = Vec::with_capacity(pivots.len());
    for (row, &pc) in pivots.iter().enumerate() {
        // reduced echelon rows form a basis; coordinates of each original
        // row sit in the pivot columns
        let vector: Vec<Elem> = (0..nj).map(|i| m.get(i, pc)).collect();
        let cof_entries: Vec<Elem> = (0..m.cols()).map(|c| r.get(row, c)).collect();
        let cofactor = FqTensor::new(f.clone(), rest_dims.clone(), cof_entries)?;
        terms.push(SliceTerm {
            mode,
            vector,
            cofactor,
        });
    }
    Ok(terms)
}

/// Upper bound with a witnessing decomposition: the best single-mode
/// factorization (r_j = flattening rank, so SR <= min_j rank(T_(j))), then
/// a greedy peel mixing modes; the smaller of the two wins.
pub fn slice_rank_upper(t: &FqTensor) -> Result<(usize, SliceDecomposition)> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let mut best: Option<(usize, SliceDecomposition)> = None;
    for mode in 1..=d {
        let terms = mode_factorization(t, mode)?;
        if best.as_ref().map(|(n, _)| terms.len() < *n).unwrap_or(true) {
            best = Some((terms.len(), SliceDecomposition { terms }));
        }
    }
    let (mut best_n, mut best_dec) = best.unwrap();

    // greedy peel: subtract the factorization term whose removal drops the
    // total flattening rank the most; ties break on (mode, term) order
    let mut residual = t.clone();
    let mut peeled: Vec<SliceTerm> = Vec::new();
    while !residual.is_zero() && peeled.len() < best_n {
        let total_rank = |x: &FqTensor| -> Result<usize> {
            let mut s = 0;
            for mode in 1..=d {
                s += x.flatten(&[mode])?.rank();
            }
            Ok(s)
        };
        let before = total_rank(&residual)?;
        let mut pick: Option<(usize, SliceTerm, FqTensor)> = None;
        for mode in 1..=d {
            for term in mode_factorization(&residual, mode)? {
                let next = residual.sub(&term.expand(t.dims())?)?;
                let drop = before.saturating_sub(total_rank(&next)?);
                if pick.as_ref().map(|(b, _, _)| drop > *b).unwrap_or(true) {
                    pick = Some((drop, term, next));
                }
            }
        }
        let Some((_, term, next)) = pick else { break };
        residual = next;
        peeled.push(term);
    }
    if residual.is_zero() && peeled.len() < best_n {
        best_n = peeled.len();
        best_dec = SliceDecomposition { terms: peeled };
    }
    debug_assert!(best_dec.reconstructs(t)?);
    Ok((best_n, best_dec))
}

/// All k-dimensional subspaces of F_q^n as reduced-echelon basis matrices,
/// enumerated by pivot pattern then free entries, lexicographically.
pub fn subspace_bases(field: &Field, n: usize, k: usize) -> Vec<FqMatrix> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![FqMatrix::zero(field.clone(), 0, n)];
    }
    let q = field.q();
    let mut out = Vec::new();
    // pivot column combinations in lexicographic order
    let mut pivots: Vec<usize> = (0..k).collect();
    loop {
        // free positions: (row, col) with col > pivots[row], col not a pivot
        let mut free = Vec::new();
        for (row, &p) in pivots.iter().enumerate() {
            for col in p + 1..n {
                if !pivots.contains(&col) {
                    free.push((row, col));
                }
            }
        }
        let total = (q as u128).pow(free.len() as u32) as u64;
        for code in 0..total {
            let mut m = FqMatrix::zero(field.clone(), k, n);
            for (row, &p) in pivots.iter().enumerate() {
                m.set(row, p, 1);
            }
            let mut x = code;
            for &(row, col) in &free {
                m.set(row, col, (x % q) as Elem);
                x /= q;
            }
            out.push(m);
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pivots[i] < n - (k - i) {
                pivots[i] += 1;
                for j in i + 1..k {
                    pivots[j] = pivots[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn subspace_count(n: usize, q: u64) -> u128 {
    use num_traits::ToPrimitive;
    (0..=n as u32)
        .map(|k| {
            gaussian_binomial(k, n as u32, q)
                .map(|b| b.to_u128().unwrap_or(u128::MAX))
                .unwrap_or(u128::MAX)
        })
        .sum()
}

/// Exact slice rank for order 3: the smallest total codimension r of a
/// subspace triple (V_1, V_2, V_3) on which T vanishes identically.
pub fn slice_rank_exact(t: &FqTensor, budget: u128) -> Result<usize> {
    if t.order() != 3 {
        return Err(Error::OrderUnsupported(t.order()));
    }
    if t.is_zero() {
        return Ok(0);
    }
    let f = t.field();
    let q = f.q();
    let dims = [t.dims()[0], t.dims()[1], t.dims()[2]];
    let needed = dims
        .iter()
        .map(|&n| subspace_count(n, q))
        .try_fold(1u128, |a, b| a.checked_mul(b))
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let (upper, _) = slice_rank_upper(t)?;
    // bases[j][k]: subspaces of dimension k in mode j+1
    let bases: Vec<Vec<Vec<FqMatrix>>> = dims
        .iter()
        .map(|&n| (0..=n).map(|k| subspace_bases(f, n, k)).collect())
        .collect();
    for r in 1..upper {
        for c1 in 0..=dims[0].min(r) {
            for c2 in 0..=dims[1].min(r - c1) {
                let c3 = r - c1 - c2;
                if c3 > dims[2] {
                    continue;
                }
                let l1 = &bases[0][dims[0] - c1];
                let l2 = &bases[1][dims[1] - c2];
                let l3 = &bases[2][dims[2] - c3];
                let hit = l1.par_iter().any(|v1| {
                    l2.iter().any(|v2| {
                        l3.iter().any(|v3| vanishes(t, v1, v2, v3))
                    })
                });
                if hit {
                    return Ok(r);
                }
            }
        }
    }
    Ok(upper)
}

fn vanishes(t: &FqTensor, v1: &FqMatrix, v2: &FqMatrix, v3: &FqMatrix) -> bool {
    let row = |m: &FqMatrix, i: usize| -> Vec<Elem> {
        (0..m.cols()).map(|c| m.get(i, c)).collect()
    };
    for i in 0..v1.rows() {
        let a = row(v1, i);
        for j in 0..v2.rows() {
            let b = row(v2, j);
            for k in 0..v3.rows() {
                let c = row(v3, k);
                match t.contract_scalar(&[&a, &b, &c]) {
                    Ok(0) => {}
                    _ => return false,
                }
            }
        }
    }
    true
}

/// Brute-force decomposition enumeration: the definitional oracle. Tries
/// r ascending; at each r, all combinations of r rank-1 terms (mode,
/// normalized vector, nonzero cofactor) are summed against T. Exponential;
/// guarded for tiny tensors only.
pub fn slice_rank_oracle(t: &FqTensor, budget: u128) -> Result<usize> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    if t.is_zero() {
        return Ok(0);
    }
    let f = t.field();
    let q = f.q();
    let dims = t.dims().to_vec();
    let (upper, _) = slice_rank_upper(t)?;
    // all candidate terms: vectors normalized to leading coefficient 1
    // (scaling folds into the cofactor)
    let mut terms: Vec<FqTensor> = Vec::new();
    for mode in 1..=d {
        let nj = dims[mode - 1];
        let rest: usize = dims
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != mode - 1)
            .map(|(_, &n)| n)
            .product();
        let rest_dims: Vec<usize> = dims
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != mode - 1)
            .map(|(_, &n)| n)
            .collect();
        for vcode in 1..(q as u64).pow(nj as u32) {
            let mut x = vcode;
            let mut vector = vec![0 as Elem; nj];
            for e in vector.iter_mut() {
                *e = (x % q) as Elem;
                x /= q;
            }
            if vector.iter().find(|&&e| e != 0) != Some(&1) {
                continue;
            }
            for ccode in 1..(q as u64).pow(rest as u32) {
                let mut x = ccode;
                let mut cof = vec![0 as Elem; rest];
                for e in cof.iter_mut() {
                    *e = (x % q) as Elem;
                    x /= q;
                }
                let term = SliceTerm {
                    mode,
                    vector: vector.clone(),
                    cofactor: FqTensor::new(f.clone(), rest_dims.clone(), cof)?,
                };
                terms.push(term.expand(&dims)?);
            }
        }
    }
    for r in 1..=upper {
        let needed = (terms.len() as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        if find_sum(t, &terms, r, 0, &FqTensor::zero(f.clone(), dims.clone())?)? {
            return Ok(r);
        }
    }
    Ok(upper)
}

fn find_sum(
    t: &FqTensor,
    terms: &[FqTensor],
    r: usize,
    start: usize,
    acc: &FqTensor,
) -> Result<bool> {
    if r == 0 {
        return Ok(acc == t);
    }
    for (i, term) in terms.iter().enumerate().skip(start) {
        let next = acc.add(term)?;
        if find_sum(t, terms, r - 1, i + 1, &next)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Partition rank report. At order 3 every proper mode subset induces the
/// same three flattening pairs as single modes, so PR = SR and the exact
/// method applies; at order >= 4 only bounds are reported.
#[derive(Clone, Debug)]
pub struct PartitionRank {
    pub lower: usize,
    pub upper: usize,
    pub exact: Option<usize>,
    pub notes: Vec<String>,
}

pub fn partition_rank(t: &FqTensor, budget: u128, big_k: u32) -> Result<PartitionRank> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let mut notes = Vec::new();
    if d == 3 {
        match slice_rank_exact(t, budget) {
            Ok(v) => {
                return Ok(PartitionRank {
                    lower: v,
                    upper: v,
                    exact: Some(v),
                    notes: vec!["order 3: partition rank equals slice rank".to_string()],
                })
            }
            Err(Error::BudgetExceeded { .. }) => {
                notes.push("exact method over budget; bounds only".to_string())
            }
            Err(e) => return Err(e),
        }
    }
    let upper = flattening_upper_bound(t);
    let mut lower = 0;
    match geometric_rank(t, big_k, crate::strata::DEFAULT_BUDGET) {
        Ok(gr) if gr.certain => lower = gr.value.min(upper),
        Ok(_) => notes.push("geometric rank uncertain; trivial lower bound".to_string()),
        Err(e) => notes.push(format!("geometric rank unavailable: {e}")),
    }
    if d >= 4 {
        notes.push(
            "order >= 4 upper bound counts unordered flattening pairs once".to_string(),
        );
    }
    let exact = if lower == upper { Some(upper) } else { None };
    Ok(PartitionRank {
        lower,
        upper,
        exact,
        notes,
    })
}

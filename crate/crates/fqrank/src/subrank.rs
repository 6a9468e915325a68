//! Subrank lower bounds with replayable certificates.
//!
//! A certificate stores covectors for modes 1..d-1 and recombination
//! coefficients for the last mode; checking it reconstructs the restriction
//! maps and verifies that they carry T to the identity tensor I_c entrywise.
//! Lower bounds come from a greedy diagonalization (searching the inductive
//! step conditions directly by enumeration) and from the min-rank criterion
//! on recombined slices; exhaustive search closes the gap at tiny scale and
//! serves as the ground-truth oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};
use crate::linalg::FqMatrix;
use crate::strata::{geometric_rank, DEFAULT_BUDGET};
use crate::tensor::{Covector, FqTensor};

/// Default node budget for the exhaustive oracle.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u128 = 1 << 26;
/// Default candidate budget for the greedy search.
pub const DEFAULT_GREEDY_BUDGET: u128 = 1 << 22;
/// Default guard on q^c for the min-rank span enumeration.
pub const DEFAULT_MINRANK_BUDGET: u128 = 1 << 20;

const RANDOM_TRIES_PER_LEVEL: u64 = 1 << 16;

/// Witness that I_c restricts to T: covectors u[i][j] for modes i = 1..d-1
/// and coefficient vectors defining the recombined mode-d slices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubrankCertificate {
    pub field: Field,
    pub c: usize,
    /// u[i-1][j]: level-j covector for mode i, i = 1..d-1.
    pub u: Vec<Vec<Vec<Elem>>>,
    /// coeff[k]: length n_d, defining T'_k = sum_l coeff[k][l] T_l.
    pub coeff: Vec<Vec<Elem>>,
}

impl SubrankCertificate {
    pub fn order(&self) -> usize {
        self.u.len() + 1
    }
}

fn dot(f: &Field, a: &[Elem], b: &[Elem]) -> Elem {
    a.iter()
        .zip(b)
        .fold(0, |acc, (&x, &y)| f.add(acc, f.mul(x, y)))
}

/// Contraction of modes 1..d-1, leaving the mode-d fiber vector.
fn fiber(t: &FqTensor, ws: &[Vec<Elem>]) -> Result<Vec<Elem>> {
    let covs: Vec<Covector> = ws
        .iter()
        .enumerate()
        .map(|(i, w)| Covector {
            mode: i + 1,
            coords: w.clone(),
        })
        .collect();
    Ok(t.contract(&covs)?.entries().to_vec())
}

fn rows_independent(f: &Field, rows: &[Vec<Elem>]) -> bool {
    if rows.is_empty() {
        return true;
    }
    let cols = rows[0].len();
    let flat: Vec<Elem> = rows.iter().flatten().copied().collect();
    FqMatrix::new(f.clone(), rows.len(), cols, flat)
        .map(|m| m.rank() == rows.len())
        .unwrap_or(false)
}

/// Verify a certificate against T: mode families and coefficients must be
/// linearly independent, every contraction value must match the Kronecker
/// delta, and the reconstructed restriction maps must carry T to I_c.
pub fn check_certificate(t: &FqTensor, cert: &SubrankCertificate) -> Result<bool> {
    let d = t.order();
    let dims = t.dims();
    if cert.order() != d || cert.field != *t.field() {
        return Err(Error::ShapeMismatch(format!(
            "certificate order {} / field {} against tensor order {} / field {}",
            cert.order(),
            cert.field,
            d,
            t.field()
        )));
    }
    let c = cert.c;
    for (i, fam) in cert.u.iter().enumerate() {
        if fam.len() != c || fam.iter().any(|v| v.len() != dims[i]) {
            return Err(Error::ShapeMismatch(format!(
                "mode {} family must hold {} vectors of length {}",
                i + 1,
                c,
                dims[i]
            )));
        }
    }
    if cert.coeff.len() != c || cert.coeff.iter().any(|v| v.len() != dims[d - 1]) {
        return Err(Error::ShapeMismatch(format!(
            "coefficients must hold {} vectors of length {}",
            c,
            dims[d - 1]
        )));
    }
    if c == 0 {
        return Ok(true);
    }
    let f = t.field();
    for fam in &cert.u {
        if !rows_independent(f, fam) {
            return Ok(false);
        }
    }
    if !rows_independent(f, &cert.coeff) {
        return Ok(false);
    }
    // delta condition by direct contraction
    let mut idx = vec![0usize; d - 1];
    loop {
        let ws: Vec<Vec<Elem>> = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| cert.u[i][j].clone())
            .collect();
        let fib = fiber(t, &ws)?;
        for (k, co) in cert.coeff.iter().enumerate() {
            let v = dot(f, co, &fib);
            let want = if idx.iter().all(|&j| j == k) { 1 } else { 0 };
            if v != want {
                return Ok(false);
            }
        }
        let mut pos = 0;
        loop {
            if pos == d - 1 {
                break;
            }
            idx[pos] += 1;
            if idx[pos] < c {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == d - 1 {
            break;
        }
    }
    // reconstruct the maps and restrict
    let mut maps = Vec::with_capacity(d);
    for (i, fam) in cert.u.iter().enumerate() {
        let flat: Vec<Elem> = fam.iter().flatten().copied().collect();
        maps.push(FqMatrix::new(f.clone(), c, dims[i], flat)?);
    }
    let flat: Vec<Elem> = cert.coeff.iter().flatten().copied().collect();
    maps.push(FqMatrix::new(f.clone(), c, dims[d - 1], flat)?);
    let restricted = t.restrict(&maps)?;
    let identity = FqTensor::identity(f.clone(), c, d)?;
    Ok(restricted == identity)
}

/// Outcome of the greedy search. `Failure` means the candidate space at
/// the failing level was fully enumerated; `Budget` means it was not.
/// Both carry the valid partial certificate for the levels completed.
#[derive(Clone, Debug)]
pub enum GreedyOutcome {
    Success(SubrankCertificate),
    Failure {
        level: usize,
        partial: Option<SubrankCertificate>,
    },
    Budget {
        level: usize,
        partial: Option<SubrankCertificate>,
    },
}

impl GreedyOutcome {
    pub fn certified_level(&self) -> usize {
        match self {
            GreedyOutcome::Success(c) => c.c,
            GreedyOutcome::Failure { level, .. } | GreedyOutcome::Budget { level, .. } => *level,
        }
    }

    pub fn certificate(&self) -> Option<&SubrankCertificate> {
        match self {
            GreedyOutcome::Success(c) => Some(c),
            GreedyOutcome::Failure { partial, .. } | GreedyOutcome::Budget { partial, .. } => {
                partial.as_ref()
            }
        }
    }
}

struct GreedyState {
    field: Field,
    u: Vec<Vec<Vec<Elem>>>,
    coeff: Vec<Vec<Elem>>,
    level: usize,
}

impl GreedyState {
    fn partial_cert(&self) -> Option<SubrankCertificate> {
        if self.level == 0 {
            return None;
        }
        Some(self.cert_at(self.level))
    }

    fn cert_at(&self, c: usize) -> SubrankCertificate {
        SubrankCertificate {
            field: self.field.clone(),
            c,
            u: self.u.iter().map(|fam| fam[..c].to_vec()).collect(),
            coeff: self.coeff[..c].to_vec(),
        }
    }
}

fn decode_vec(mut code: u64, q: u64, n: usize) -> Vec<Elem> {
    let mut v = vec![0 as Elem; n];
    for x in v.iter_mut() {
        *x = (code % q) as Elem;
        code /= q;
    }
    v
}

/// Try one candidate tuple at the current level. Returns the pivot slice
/// index and the all-v fiber when the step conditions hold: the candidate
/// fiber pairs nontrivially with some remaining slice, and every mixed
/// tuple (some coordinates from the chosen levels, some equal to the
/// candidate) contracts to zero on every slice.
fn try_candidate(
    t: &FqTensor,
    st: &GreedyState,
    vs: &[Vec<Elem>],
) -> Result<Option<(usize, Vec<Elem>)>> {
    let f = &st.field;
    let m = st.level;
    let n = st.coeff.len();
    let g = fiber(t, vs)?;
    let mut pivot = None;
    for (k, co) in st.coeff.iter().enumerate().take(n).skip(m) {
        if dot(f, co, &g) != 0 {
            pivot = Some(k);
            break;
        }
    }
    let Some(pivot) = pivot else {
        return Ok(None);
    };
    if m > 0 {
        // mixed tuples: digits 0..m pick chosen covectors, digit m picks v
        let d1 = vs.len();
        let mut digits = vec![0usize; d1];
        loop {
            let has_v = digits.iter().any(|&x| x == m);
            let has_u = digits.iter().any(|&x| x < m);
            if has_v && has_u {
                let ws: Vec<Vec<Elem>> = digits
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        if x == m {
                            vs[i].clone()
                        } else {
                            st.u[i][x].clone()
                        }
                    })
                    .collect();
                if fiber(t, &ws)?.iter().any(|&e| e != 0) {
                    return Ok(None);
                }
            }
            let mut pos = 0;
            loop {
                if pos == d1 {
                    break;
                }
                digits[pos] += 1;
                if digits[pos] <= m {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == d1 {
                break;
            }
        }
    }
    Ok(Some((pivot, g)))
}

fn apply_step(st: &mut GreedyState, vs: Vec<Vec<Elem>>, pivot: usize, g: &[Elem]) -> Result<()> {
    let f = st.field.clone();
    let m = st.level;
    st.coeff.swap(m, pivot);
    let lambda = dot(&f, &st.coeff[m], g);
    let li = f.inv(lambda)?;
    for x in st.coeff[m].iter_mut() {
        *x = f.mul(li, *x);
    }
    let pivot_row = st.coeff[m].clone();
    for (k, row) in st.coeff.iter_mut().enumerate() {
        if k == m {
            continue;
        }
        let mu = dot(&f, row, g);
        if mu != 0 {
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x = f.sub(*x, f.mul(mu, p));
            }
        }
    }
    for (i, v) in vs.into_iter().enumerate() {
        st.u[i].push(v);
    }
    st.level += 1;
    Ok(())
}

/// Greedy diagonalization toward target_c, maintaining the inductive
/// invariants level by level. Candidates are enumerated lexicographically
/// over canonical integer encodings; past the budget the search falls back
/// to seeded random sampling before giving up.
pub fn greedy_diagonalize(
    t: &FqTensor,
    target_c: usize,
    budget: u128,
    seed: u64,
) -> Result<GreedyOutcome> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let dims = t.dims().to_vec();
    let nd = dims[d - 1];
    let f = t.field().clone();
    let q = f.q();
    let mut st = GreedyState {
        field: f.clone(),
        u: vec![Vec::new(); d - 1],
        coeff: (0..nd)
            .map(|k| {
                let mut v = vec![0 as Elem; nd];
                v[k] = 1;
                v
            })
            .collect(),
        level: 0,
    };
    if target_c == 0 {
        return Ok(GreedyOutcome::Success(st.cert_at(0)));
    }
    // the mode-d slices must span at least target_c dimensions
    let span = t.flatten(&[d])?.rank();
    if span < target_c {
        return Ok(GreedyOutcome::Failure {
            level: 0,
            partial: None,
        });
    }
    let total: u128 = dims[..d - 1]
        .iter()
        .try_fold(1u128, |acc, &n| {
            (q as u128).checked_pow(n as u32).and_then(|p| acc.checked_mul(p))
        })
        .unwrap_or(u128::MAX);
    let mut used: u128 = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while st.level < target_c {
        let mut found = None;
        let mut code: u128 = 0;
        while code < total && used < budget {
            let mut x = code;
            let vs: Vec<Vec<Elem>> = dims[..d - 1]
                .iter()
                .map(|&n| {
                    let span_sz = (q as u128).pow(n as u32);
                    let v = decode_vec((x % span_sz) as u64, q, n);
                    x /= span_sz;
                    v
                })
                .collect();
            used += 1;
            if vs.iter().any(|v| v.iter().all(|&e| e == 0)) {
                code += 1;
                continue;
            }
            if let Some(hit) = try_candidate(t, &st, &vs)? {
                found = Some((vs, hit));
                break;
            }
            code += 1;
        }
        if found.is_none() && code >= total {
            return Ok(GreedyOutcome::Failure {
                level: st.level,
                partial: st.partial_cert(),
            });
        }
        if found.is_none() {
            // budget exhausted mid-enumeration: seeded random sampling
            for _ in 0..RANDOM_TRIES_PER_LEVEL {
                let vs: Vec<Vec<Elem>> = dims[..d - 1]
                    .iter()
                    .map(|&n| (0..n).map(|_| (rng.gen_range(0..q)) as Elem).collect())
                    .collect();
                if vs.iter().any(|v| v.iter().all(|&e| e == 0)) {
                    continue;
                }
                if let Some(hit) = try_candidate(t, &st, &vs)? {
                    found = Some((vs, hit));
                    break;
                }
            }
            let Some((vs, (pivot, g))) = found else {
                return Ok(GreedyOutcome::Budget {
                    level: st.level,
                    partial: st.partial_cert(),
                });
            };
            apply_step(&mut st, vs, pivot, &g)?;
            continue;
        }
        let (vs, (pivot, g)) = found.unwrap();
        apply_step(&mut st, vs, pivot, &g)?;
    }
    Ok(GreedyOutcome::Success(st.cert_at(target_c)))
}

/// Min-rank criterion on recombined slices: with T'_k = sum coeff[k][l] T_l,
/// every nonzero combination in their span must have matrix rank at least
/// 2c(c-1); then Q(T) >= c. A failing combination is returned as witness
/// (a zero combination witnesses dependence).
#[derive(Clone, Debug)]
pub struct MinrankOutcome {
    pub ok: bool,
    pub c: usize,
    pub threshold: usize,
    pub witness: Option<Vec<Elem>>,
}

pub fn minrank_certificate(
    t: &FqTensor,
    coeff: &[Vec<Elem>],
    budget: u128,
) -> Result<MinrankOutcome> {
    if t.order() != 3 {
        return Err(Error::OrderUnsupported(t.order()));
    }
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let c = coeff.len();
    if coeff.iter().any(|v| v.len() != n3) {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vectors must have length {n3}"
        )));
    }
    let f = t.field();
    let q = f.q();
    let needed = (q as u128).checked_pow(c as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let threshold = 2 * c * (c.saturating_sub(1));
    let slices: Vec<Vec<Elem>> = (1..=n3)
        .map(|i| t.slice(3, i).map(|s| s.entries().to_vec()))
        .collect::<Result<_>>()?;
    let primed: Vec<Vec<Elem>> = coeff
        .iter()
        .map(|co| {
            let mut acc = vec![0 as Elem; n1 * n2];
            for (l, s) in slices.iter().enumerate() {
                if co[l] == 0 {
                    continue;
                }
                for (a, &b) in acc.iter_mut().zip(s) {
                    *a = f.add(*a, f.mul(co[l], b));
                }
            }
            acc
        })
        .collect();
    let engine = crate::linalg::RankEngine::new(f);
    for code in 1..needed as u64 {
        let lam = decode_vec(code, q, c);
        let mut m = vec![0 as Elem; n1 * n2];
        let mut zero = true;
        for (k, p) in primed.iter().enumerate() {
            if lam[k] == 0 {
                continue;
            }
            for (a, &b) in m.iter_mut().zip(p) {
                *a = f.add(*a, f.mul(lam[k], b));
                if *a != 0 {
                    zero = false;
                }
            }
            zero = zero && m.iter().all(|&x| x == 0);
        }
        if zero || engine.rank(n1, n2, &m) < threshold {
            return Ok(MinrankOutcome {
                ok: false,
                c,
                threshold,
                witness: Some(lam),
            });
        }
    }
    Ok(MinrankOutcome {
        ok: true,
        c,
        threshold,
        witness: None,
    })
}

/// Decide I_r <= T by full enumeration over tuples of r independent
/// covectors for modes 1..d-1; the mode-d map is then forced by a linear
/// solve. No symmetry quotient: this is the trusted oracle. Returns the
/// lexicographically smallest certificate, or None after exhausting the
/// space.
pub fn subrank_exhaustive(
    t: &FqTensor,
    r: usize,
    budget: u128,
) -> Result<Option<SubrankCertificate>> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let f = t.field().clone();
    if r == 0 {
        return Ok(Some(SubrankCertificate {
            field: f,
            c: 0,
            u: vec![Vec::new(); d - 1],
            coeff: Vec::new(),
        }));
    }
    let dims = t.dims().to_vec();
    if dims.iter().any(|&n| n < r) {
        return Ok(None);
    }
    let q = f.q();
    let needed: u128 = dims[..d - 1]
        .iter()
        .try_fold(1u128, |acc, &n| {
            (q as u128)
                .checked_pow((n * r) as u32)
                .and_then(|p| acc.checked_mul(p))
        })
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let first_space = (q as u128).pow(dims[0] as u32) as u64;
    let result = (0..first_space)
        .into_par_iter()
        .find_map_first(|code0| {
            let v0 = decode_vec(code0, q, dims[0]);
            if v0.iter().all(|&e| e == 0) {
                return None;
            }
            let mut fams: Vec<Vec<Vec<Elem>>> = vec![Vec::new(); d - 1];
            fams[0].push(v0);
            search_families(t, r, &mut fams, 0, 1).transpose()
        })
        .transpose()?;
    Ok(result)
}

/// Depth-first over (mode, level) slots in lexicographic order.
fn search_families(
    t: &FqTensor,
    r: usize,
    fams: &mut Vec<Vec<Vec<Elem>>>,
    mode: usize,
    level: usize,
) -> Result<Option<SubrankCertificate>> {
    let d = t.order();
    let f = t.field();
    let q = f.q();
    if mode == d - 1 {
        return solve_last_mode(t, r, fams);
    }
    if level == r {
        if mode + 1 == d - 1 {
            return solve_last_mode(t, r, fams);
        }
        let n_next = t.dims()[mode + 1];
        let space = (q as u128).pow(n_next as u32) as u64;
        for code in 0..space {
            let v = decode_vec(code, q, n_next);
            if v.iter().all(|&e| e == 0) {
                continue;
            }
            fams[mode + 1].push(v);
            let hit = search_families(t, r, fams, mode + 1, 1)?;
            fams[mode + 1].pop();
            if hit.is_some() {
                return Ok(hit);
            }
        }
        return Ok(None);
    }
    let n = t.dims()[mode];
    let space = (q as u128).pow(n as u32) as u64;
    for code in 0..space {
        let v = decode_vec(code, q, n);
        fams[mode].push(v);
        let ok = rows_independent(f, &fams[mode]);
        if ok {
            let hit = search_families(t, r, fams, mode, level + 1)?;
            if hit.is_some() {
                fams[mode].pop();
                return Ok(hit);
            }
        }
        fams[mode].pop();
    }
    Ok(None)
}

/// Solve for the mode-d coefficients forced by the chosen covectors:
/// <T'_k, tuple> = delta across all r^{d-1} index tuples.
fn solve_last_mode(
    t: &FqTensor,
    r: usize,
    fams: &[Vec<Vec<Elem>>],
) -> Result<Option<SubrankCertificate>> {
    let d = t.order();
    let f = t.field();
    let nd = t.dims()[d - 1];
    let n_tuples = r.pow((d - 1) as u32);
    // augmented system [A | E]: rows are tuple fibers, E marks the
    // diagonal tuples
    let mut aug = FqMatrix::zero(f.clone(), n_tuples, nd + r);
    let mut idx = vec![0usize; d - 1];
    for row in 0..n_tuples {
        let ws: Vec<Vec<Elem>> = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| fams[i][j].clone())
            .collect();
        let fib = fiber(t, &ws)?;
        for (col, &v) in fib.iter().enumerate() {
            aug.set(row, col, v);
        }
        if idx.iter().all(|&j| j == idx[0]) {
            aug.set(row, nd + idx[0], 1);
        }
        let mut pos = 0;
        while pos < d - 1 {
            idx[pos] += 1;
            if idx[pos] < r {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
    let pivots = aug.rref();
    if pivots.iter().any(|&c| c >= nd) {
        return Ok(None);
    }
    let mut coeff = vec![vec![0 as Elem; nd]; r];
    for (row, &col) in pivots.iter().enumerate() {
        for (k, co) in coeff.iter_mut().enumerate() {
            co[col] = aug.get(row, nd + k);
        }
    }
    let cert = SubrankCertificate {
        field: f.clone(),
        c: r,
        u: fams.iter().map(|fam| fam[..r].to_vec()).collect(),
        coeff,
    };
    // solutions set free variables to zero; the delta conditions force
    // independence, so the certificate checks by construction
    if check_certificate(t, &cert)? {
        Ok(Some(cert))
    } else {
        Ok(None)
    }
}

/// Kronecker composition: certificates for S and T compose to one for
/// S (x) T of level c_a * c_b, by tensoring covectors and coefficients.
pub fn kronecker_certificate(
    a: &SubrankCertificate,
    b: &SubrankCertificate,
) -> Result<SubrankCertificate> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch(a.order(), b.order()));
    }
    if a.field != b.field {
        return Err(Error::FieldMismatch);
    }
    let f = &a.field;
    let kron = |x: &[Elem], y: &[Elem]| -> Vec<Elem> {
        let mut out = Vec::with_capacity(x.len() * y.len());
        for &xi in x {
            for &yj in y {
                out.push(f.mul(xi, yj));
            }
        }
        out
    };
    let c = a.c * b.c;
    let mut u = Vec::with_capacity(a.u.len());
    for (fa, fb) in a.u.iter().zip(&b.u) {
        let mut fam = Vec::with_capacity(c);
        for va in fa {
            for vb in fb {
                fam.push(kron(va, vb));
            }
        }
        u.push(fam);
    }
    let mut coeff = Vec::with_capacity(c);
    for ca in &a.coeff {
        for cb in &b.coeff {
            coeff.push(kron(ca, cb));
        }
    }
    Ok(SubrankCertificate {
        field: f.clone(),
        c,
        u,
        coeff,
    })
}

/// Options for a subrank report run.
#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub big_k: u32,
    pub strata_budget: u128,
    pub greedy_budget: u128,
    pub exhaustive_budget: u128,
    pub seed: u64,
    /// Optional coefficient vectors for a min-rank probe.
    pub minrank_coeffs: Option<Vec<Vec<Elem>>>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            big_k: 3,
            strata_budget: DEFAULT_BUDGET,
            greedy_budget: DEFAULT_GREEDY_BUDGET,
            exhaustive_budget: DEFAULT_EXHAUSTIVE_BUDGET,
            seed: 0,
            minrank_coeffs: None,
        }
    }
}

/// Certified bounds on the subrank.
#[derive(Clone, Debug)]
pub struct RankReport {
    pub lower: usize,
    pub lower_method: String,
    pub certificate: Option<SubrankCertificate>,
    pub upper: usize,
    pub upper_method: String,
    /// Present when the search closed the gap.
    pub exact: Option<usize>,
    pub notes: Vec<String>,
}

/// Bounds pipeline: greedy ascent for the lower bound, GR (when certain)
/// and dimensions for the upper, optional min-rank probe, exhaustive
/// closure within budget. Every reported certificate re-verifies.
pub fn subrank_report(t: &FqTensor, opts: &ReportOptions) -> Result<RankReport> {
    let d = t.order();
    if d < 2 {
        return Err(Error::OrderUnsupported(d));
    }
    let mut notes = Vec::new();
    let mut upper = *t.dims().iter().min().unwrap();
    let mut upper_method = "min dimension".to_string();
    match geometric_rank(t, opts.big_k, opts.strata_budget) {
        Ok(gr) if gr.certain => {
            if gr.value <= upper {
                upper = gr.value;
                upper_method = "geometric rank".to_string();
            }
        }
        Ok(_) => notes.push("geometric rank uncertain; not used as upper bound".to_string()),
        Err(e) => notes.push(format!("geometric rank unavailable: {e}")),
    }

    let mut lower;
    let mut lower_method;
    let mut certificate;
    match greedy_diagonalize(t, upper, opts.greedy_budget, opts.seed)? {
        GreedyOutcome::Success(cert) => {
            lower = cert.c;
            lower_method = "greedy diagonalization".to_string();
            certificate = Some(cert);
        }
        GreedyOutcome::Failure { level, partial } => {
            lower = level;
            lower_method = "greedy diagonalization (partial)".to_string();
            certificate = partial;
        }
        GreedyOutcome::Budget { level, partial } => {
            lower = level;
            lower_method = "greedy diagonalization (budget)".to_string();
            certificate = partial;
            notes.push("greedy search stopped on budget".to_string());
        }
    }

    if let Some(coeffs) = &opts.minrank_coeffs {
        match minrank_certificate(t, coeffs, DEFAULT_MINRANK_BUDGET) {
            Ok(out) if out.ok && out.c > lower => {
                lower = out.c;
                lower_method = format!("min-rank criterion at c={}", out.c);
                certificate = None;
                notes.push(format!(
                    "min-rank bound relies on the rank threshold {}",
                    out.threshold
                ));
            }
            Ok(out) if !out.ok => notes.push("min-rank probe failed".to_string()),
            Ok(_) => {}
            Err(e) => notes.push(format!("min-rank probe unavailable: {e}")),
        }
    }

    let mut exact = None;
    let mut r = lower + 1;
    while r <= upper {
        match subrank_exhaustive(t, r, opts.exhaustive_budget) {
            Ok(Some(cert)) => {
                lower = r;
                lower_method = "exhaustive search".to_string();
                certificate = Some(cert);
                r += 1;
            }
            Ok(None) => {
                exact = Some(lower);
                break;
            }
            Err(Error::BudgetExceeded { .. }) => {
                notes.push("exhaustive closure skipped on budget".to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if lower == upper {
        exact = Some(lower);
    }
    if let Some(cert) = &certificate {
        assert!(
            check_certificate(t, cert)?,
            "reported certificate must re-verify"
        );
    }
    assert!(lower <= upper, "lower bound exceeded upper bound");
    if let Some(e) = exact {
        assert!(e >= lower && e <= upper);
    }
    Ok(RankReport {
        lower,
        lower_method,
        certificate,
        upper,
        upper_method,
        exact,
        notes,
    })
}

/// Base-field and extension-field reports side by side.
#[derive(Clone, Debug)]
pub struct ExtensionReport {
    pub k: u32,
    pub base: RankReport,
    pub ext: RankReport,
}

pub fn subrank_over_extension(t: &FqTensor, k: u32, opts: &ReportOptions) -> Result<ExtensionReport> {
    let base = subrank_report(t, opts)?;
    let ext_t = t.extend_field(k)?;
    let ext = subrank_report(&ext_t, opts)?;
    Ok(ExtensionReport { k, base, ext })
}

/// T in GF(2)^{4x4x2} with mode-3 slices I_4 and the companion matrix of
/// x^4 + x + 1; irreducibility makes every nonzero slice combination
/// invertible.
pub fn companion_tensor(field: Field) -> Result<FqTensor> {
    if field.q() != 2 {
        return Err(Error::BadParams("companion construction is defined over GF(2)".into()));
    }
    let mut t = FqTensor::zero(field, vec![4, 4, 2])?;
    for i in 0..4 {
        t.set(&[i, i, 0], 1);
    }
    // companion of x^4 + x + 1: subdiagonal ones, last column (1, 1, 0, 0)
    for i in 1..4 {
        t.set(&[i, i - 1, 1], 1);
    }
    t.set(&[0, 3, 1], 1);
    t.set(&[1, 3, 1], 1);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> Field {
        Field::build(2, 1).unwrap()
    }

    fn std_cert(f: Field, n: usize, d: usize) -> SubrankCertificate {
        let basis = |n: usize| -> Vec<Vec<Elem>> {
            (0..n)
                .map(|i| {
                    let mut v = vec![0 as Elem; n];
                    v[i] = 1;
                    v
                })
                .collect()
        };
        SubrankCertificate {
            field: f,
            c: n,
            u: vec![basis(n); d - 1],
            coeff: basis(n),
        }
    }

    #[test]
    fn check_identity_cert() {
        let t = FqTensor::identity(f2(), 2, 3).unwrap();
        let cert = std_cert(f2(), 2, 3);
        assert!(check_certificate(&t, &cert).unwrap());
        let mut bad = cert.clone();
        bad.u[0][1] = vec![0, 0];
        assert!(!check_certificate(&t, &bad).unwrap());
        let mut perturbed = cert;
        perturbed.coeff[0] = vec![1, 1];
        assert!(!check_certificate(&t, &perturbed).unwrap());
    }

    #[test]
    fn check_cert_shape_errors() {
        let t = FqTensor::identity(f2(), 2, 3).unwrap();
        let mut cert = std_cert(f2(), 2, 3);
        cert.u.pop();
        assert!(check_certificate(&t, &cert).is_err());
    }

    #[test]
    fn greedy_identity() {
        for n in 1..=4usize {
            let t = FqTensor::identity(f2(), n, 3).unwrap();
            match greedy_diagonalize(&t, n, DEFAULT_GREEDY_BUDGET, 0).unwrap() {
                GreedyOutcome::Success(cert) => {
                    assert_eq!(cert.c, n);
                    assert!(check_certificate(&t, &cert).unwrap());
                }
                other => panic!("expected success, got {other:?}"),
            }
        }
    }

    #[test]
    fn greedy_w_fails_at_two() {
        let w = FqTensor::w_tensor(f2()).unwrap();
        match greedy_diagonalize(&w, 2, DEFAULT_GREEDY_BUDGET, 0).unwrap() {
            GreedyOutcome::Failure { level, partial } => {
                assert_eq!(level, 1);
                let cert = partial.expect("partial certificate at level 1");
                assert!(check_certificate(&w, &cert).unwrap());
            }
            other => panic!("expected failure at level 1, got {other:?}"),
        }
    }

    #[test]
    fn greedy_partial_diagonal() {
        let t = FqTensor::diagonal(f2(), &[1, 1, 0], 3).unwrap();
        match greedy_diagonalize(&t, 2, DEFAULT_GREEDY_BUDGET, 0).unwrap() {
            GreedyOutcome::Success(cert) => assert!(check_certificate(&t, &cert).unwrap()),
            other => panic!("expected success, got {other:?}"),
        }
        // span precheck: three slices spanning only 2 dimensions
        match greedy_diagonalize(&t, 3, DEFAULT_GREEDY_BUDGET, 0).unwrap() {
            GreedyOutcome::Failure { level: 0, .. } => {}
            other => panic!("expected failure(0), got {other:?}"),
        }
    }

    #[test]
    fn minrank_cases() {
        let f = f2();
        let w = FqTensor::w_tensor(f.clone()).unwrap();
        // c = 1: threshold 0, any nonzero slice passes
        let out = minrank_certificate(&w, &[vec![1, 0]], DEFAULT_MINRANK_BUDGET).unwrap();
        assert!(out.ok);
        assert_eq!(out.threshold, 0);
        // c = 2 on W: 2x2 slices cannot reach rank 4
        let out =
            minrank_certificate(&w, &[vec![1, 0], vec![0, 1]], DEFAULT_MINRANK_BUDGET).unwrap();
        assert!(!out.ok);
        assert!(out.witness.is_some());
        let t = companion_tensor(f).unwrap();
        let out =
            minrank_certificate(&t, &[vec![1, 0], vec![0, 1]], DEFAULT_MINRANK_BUDGET).unwrap();
        assert!(out.ok, "witness {:?}", out.witness);
        assert_eq!(out.threshold, 4);
    }

    #[test]
    fn exhaustive_w() {
        let w = FqTensor::w_tensor(f2()).unwrap();
        let one = subrank_exhaustive(&w, 1, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        assert!(check_certificate(&w, &one.unwrap()).unwrap());
        assert!(subrank_exhaustive(&w, 2, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap()
            .is_none());
    }

    #[test]
    fn exhaustive_identity_and_zero() {
        let t = FqTensor::identity(f2(), 2, 3).unwrap();
        for r in 0..=2usize {
            let cert = subrank_exhaustive(&t, r, DEFAULT_EXHAUSTIVE_BUDGET)
                .unwrap()
                .unwrap();
            assert!(check_certificate(&t, &cert).unwrap());
        }
        let z = FqTensor::zero(f2(), vec![2, 2, 2]).unwrap();
        assert!(subrank_exhaustive(&z, 1, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap()
            .is_none());
    }

    #[test]
    fn exhaustive_deterministic() {
        let t = FqTensor::random(f2(), vec![2, 2, 2], 5).unwrap();
        let a = subrank_exhaustive(&t, 1, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        let b = subrank_exhaustive(&t, 1, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn companion_reaches_two() {
        let t = companion_tensor(f2()).unwrap();
        let cert = subrank_exhaustive(&t, 2, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap()
            .expect("I_2 restricts to the companion construction");
        assert!(check_certificate(&t, &cert).unwrap());
    }

    #[test]
    fn report_examples() {
        let opts = ReportOptions::default();
        let w = FqTensor::w_tensor(f2()).unwrap();
        let rep = subrank_report(&w, &opts).unwrap();
        assert_eq!(rep.exact, Some(1));
        assert_eq!(rep.upper, 2);
        assert_eq!(rep.upper_method, "geometric rank");

        let t = FqTensor::identity(f2(), 4, 3).unwrap();
        let rep = subrank_report(&t, &opts).unwrap();
        assert_eq!(rep.exact, Some(4));
        assert!(check_certificate(&t, rep.certificate.as_ref().unwrap()).unwrap());

        let z = FqTensor::zero(f2(), vec![2, 2, 2]).unwrap();
        let rep = subrank_report(&z, &opts).unwrap();
        assert_eq!(rep.exact, Some(0));
    }

    #[test]
    fn kronecker_composition() {
        let f = f2();
        let i2 = FqTensor::identity(f.clone(), 2, 3).unwrap();
        let cert = std_cert(f.clone(), 2, 3);
        let composed = kronecker_certificate(&cert, &cert).unwrap();
        assert_eq!(composed.c, 4);
        let prod = i2.kronecker(&i2).unwrap();
        assert!(check_certificate(&prod, &composed).unwrap());

        // mixed: certificate for W (c=1) with certificate for I_2
        let w = FqTensor::w_tensor(f).unwrap();
        let cw = subrank_exhaustive(&w, 1, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap()
            .unwrap();
        let mixed = kronecker_certificate(&cw, &cert).unwrap();
        let prod = w.kronecker(&i2).unwrap();
        assert_eq!(mixed.c, 2);
        assert!(check_certificate(&prod, &mixed).unwrap());
    }

    #[test]
    fn extension_report_identity() {
        let t = FqTensor::identity(f2(), 2, 3).unwrap();
        let rep = subrank_over_extension(&t, 2, &ReportOptions::default()).unwrap();
        assert_eq!(rep.base.exact, Some(2));
        assert_eq!(rep.ext.exact, Some(2));
        assert!(rep.base.lower <= rep.ext.lower);
    }

    #[test]
    fn direct_sum_superadditive() {
        let f = f2();
        let a = FqTensor::identity(f.clone(), 1, 3).unwrap();
        let s = a.direct_sum(&a).unwrap();
        let cert = subrank_exhaustive(&s, 2, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap()
            .expect("Q(I_1 + I_1) >= 2");
        assert!(check_certificate(&s, &cert).unwrap());
    }
}

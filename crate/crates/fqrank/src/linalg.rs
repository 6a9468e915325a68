//! Exact dense linear algebra over a finite field: rank, reduced echelon
//! form, kernels and linear solves. This is the hot kernel of the whole
//! crate; stratum counting performs up to ~10^8 small ranks, so alongside the
//! generic table-driven code there is a bit-packed kernel for GF(2^k), k <= 4
//! (elements as k-bit lanes in u64 words). Pivoting is deterministic (first
//! nonzero in column order) so echelon forms and kernels are run-to-run
//! identical.

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FqMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    entries: Vec<Elem>, // row-major
}

impl FqMatrix {
    pub fn new(field: Field, rows: usize, cols: usize, entries: Vec<Elem>) -> Result<FqMatrix> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|&e| (e as u64) >= field.q()) {
            return Err(Error::ShapeMismatch("entry out of field range".into()));
        }
        Ok(FqMatrix {
            field,
            rows,
            cols,
            entries,
        })
    }

    pub fn zero(field: Field, rows: usize, cols: usize) -> FqMatrix {
        FqMatrix {
            field,
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> FqMatrix {
        let mut m = FqMatrix::zero(field, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(field: Field, rows: &[Vec<Elem>]) -> Result<FqMatrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        if rows.iter().any(|v| v.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        FqMatrix::new(field, r, c, rows.concat())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> FqMatrix {
        let mut out = FqMatrix::zero(self.field.clone(), self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn mul(&self, other: &FqMatrix) -> Result<FqMatrix> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = FqMatrix::zero(f.clone(), self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = f.mul(a, other.get(k, j));
                    let cur = out.get(i, j);
                    out.set(i, j, f.add(cur, prod));
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, x: &[Elem]) -> Result<Vec<Elem>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} cols, vector has {}",
                self.cols,
                x.len()
            )));
        }
        let f = &self.field;
        let mut out = vec![0 as Elem; self.rows];
        for r in 0..self.rows {
            let mut acc: Elem = 0;
            for c in 0..self.cols {
                acc = f.add(acc, f.mul(self.get(r, c), x[c]));
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// In-place reduction to reduced row echelon form. Returns the pivot
    /// column of each of the leading rows.
    pub fn rref(&mut self) -> Vec<usize> {
        let f = self.field.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let pivot_row = (r..self.rows).find(|&i| self.get(i, c) != 0);
            let pr = match pivot_row {
                Some(pr) => pr,
                None => continue,
            };
            if pr != r {
                for j in 0..self.cols {
                    self.entries.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in c..self.cols {
                let v = f.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.get(i, c);
                if factor == 0 {
                    continue;
                }
                for j in c..self.cols {
                    let v = f.sub(self.get(i, j), f.mul(factor, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        work.rref().len()
    }

    /// Basis of the right null space, in reduced echelon form, one vector
    /// per free column in ascending order.
    pub fn kernel_basis(&self) -> Vec<Vec<Elem>> {
        let f = self.field.clone();
        let mut work = self.clone();
        let pivots = work.rref();
        let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![0 as Elem; self.cols];
            v[free] = 1;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = f.neg(work.get(row, free));
            }
            basis.push(v);
        }
        basis
    }

    /// One solution of Mx = y (free variables set to 0 in echelon order),
    /// or None if the system is inconsistent.
    pub fn solve(&self, y: &[Elem]) -> Result<Option<Vec<Elem>>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, rhs has {}",
                self.rows,
                y.len()
            )));
        }
        // eliminate on the augmented matrix
        let mut aug = FqMatrix::zero(self.field.clone(), self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, self.cols, y[r]);
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return Ok(None); // pivot in the rhs column
        }
        let mut x = vec![0 as Elem; self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.get(row, self.cols);
        }
        Ok(Some(x))
    }
}

/// Rank of a raw row-major buffer without constructing an FqMatrix.
/// Destroys `data`.
pub fn rank_in_place(field: &Field, rows: usize, cols: usize, data: &mut [Elem]) -> usize {
    debug_assert_eq!(data.len(), rows * cols);
    let f = field;
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows).find(|&i| data[i * cols + c] != 0);
        let pr = match pivot {
            Some(pr) => pr,
            None => continue,
        };
        if pr != rank {
            for j in c..cols {
                data.swap(pr * cols + j, rank * cols + j);
            }
        }
        let inv = f.inv(data[rank * cols + c]).expect("pivot nonzero");
        for i in (rank + 1)..rows {
            let b = data[i * cols + c];
            if b == 0 {
                continue;
            }
            let factor = f.mul(b, inv);
            for j in c..cols {
                let sub = f.mul(factor, data[rank * cols + j]);
                data[i * cols + j] = f.sub(data[i * cols + j], sub);
            }
        }
        rank += 1;
    }
    rank
}

/// Bit-packed Gaussian elimination for GF(2^k), k <= 4. Elements occupy
/// k-bit lanes of u64 words; a row operation touches 64/k entries per word.
#[derive(Clone, Debug)]
pub struct PackedSpec {
    k: u32,
    lanes_per_word: usize,
    /// top bit (bit k-1) of every lane
    himask: u64,
    /// reduction polynomial without the x^k term, as lane bits
    red: u64,
    field: Field,
}

impl PackedSpec {
    /// Only fields GF(2^k) with k <= 4 are packable.
    pub fn for_field(field: &Field) -> Option<PackedSpec> {
        if field.p() != 2 || field.m() > 4 {
            return None;
        }
        let k = field.m();
        let lanes_per_word = (64 / k) as usize;
        let mut himask = 0u64;
        for lane in 0..lanes_per_word {
            himask |= 1u64 << (lane as u32 * k + (k - 1));
        }
        let red: u64 = field
            .modulus()
            .iter()
            .take(k as usize)
            .enumerate()
            .map(|(i, &c)| (c & 1) << i)
            .sum();
        Some(PackedSpec {
            k,
            lanes_per_word,
            himask,
            red,
            field: field.clone(),
        })
    }

    pub fn words_per_row(&self, cols: usize) -> usize {
        cols.div_ceil(self.lanes_per_word)
    }

    pub fn pack_row(&self, row: &[Elem], out: &mut [u64]) {
        for w in out.iter_mut() {
            *w = 0;
        }
        for (i, &e) in row.iter().enumerate() {
            let word = i / self.lanes_per_word;
            let lane = (i % self.lanes_per_word) as u32;
            out[word] |= (e as u64) << (lane * self.k);
        }
    }

    #[inline]
    fn lane_get(&self, row: &[u64], col: usize) -> Elem {
        let word = col / self.lanes_per_word;
        let lane = (col % self.lanes_per_word) as u32;
        ((row[word] >> (lane * self.k)) & ((1u64 << self.k) - 1)) as Elem
    }

    /// Multiply every lane of `t` by x, reducing mod the field polynomial.
    #[inline]
    fn mulx(&self, t: &mut [u64]) {
        for w in t.iter_mut() {
            let top = *w & self.himask;
            *w = ((*w ^ top) << 1) ^ ((top >> (self.k - 1)) * self.red);
        }
    }

    /// dst ^= scalar * src, lane-wise.
    #[inline]
    fn scalar_mul_acc(&self, dst: &mut [u64], src: &[u64], scalar: Elem) {
        if scalar == 0 {
            return;
        }
        if self.k == 1 || scalar == 1 {
            if scalar & 1 == 1 {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d ^= s;
                }
            }
            if scalar <= 1 {
                return;
            }
        }
        let mut t: Vec<u64> = src.to_vec();
        let mut first = true;
        for bit in 0..self.k {
            if first {
                first = false;
            } else {
                self.mulx(&mut t);
            }
            if (scalar >> bit) & 1 == 1 {
                for (d, s) in dst.iter_mut().zip(t.iter()) {
                    *d ^= s;
                }
            }
        }
    }

    /// Rank of a row-major matrix via packed elimination. Agrees with the
    /// generic kernel (tested exhaustively and on random samples).
    pub fn rank(&self, rows: usize, cols: usize, data: &[Elem]) -> usize {
        debug_assert_eq!(data.len(), rows * cols);
        let wpr = self.words_per_row(cols);
        let mut packed = vec![0u64; rows * wpr];
        for r in 0..rows {
            self.pack_row(&data[r * cols..(r + 1) * cols], &mut packed[r * wpr..(r + 1) * wpr]);
        }
        let f = &self.field;
        let mut rank = 0;
        for c in 0..cols {
            if rank == rows {
                break;
            }
            let pivot = (rank..rows).find(|&i| self.lane_get(&packed[i * wpr..(i + 1) * wpr], c) != 0);
            let pr = match pivot {
                Some(pr) => pr,
                None => continue,
            };
            if pr != rank {
                for w in 0..wpr {
                    packed.swap(pr * wpr + w, rank * wpr + w);
                }
            }
            let a = self.lane_get(&packed[rank * wpr..(rank + 1) * wpr], c);
            let ainv = f.inv(a).expect("pivot nonzero");
            let (before, after) = packed.split_at_mut((rank + 1) * wpr);
            let pivot_row = &before[rank * wpr..(rank + 1) * wpr];
            for i in (rank + 1)..rows {
                let off = (i - rank - 1) * wpr;
                let row = &mut after[off..off + wpr];
                let b = {
                    let word = c / self.lanes_per_word;
                    let lane = (c % self.lanes_per_word) as u32;
                    ((row[word] >> (lane * self.k)) & ((1u64 << self.k) - 1)) as Elem
                };
                if b == 0 {
                    continue;
                }
                let factor = f.mul(b, ainv);
                self.scalar_mul_acc(row, pivot_row, factor);
            }
            rank += 1;
        }
        rank
    }
}

/// Rank engine for the stratum-counting hot path: dispatches to the packed
/// GF(2^k) kernel when the field permits, otherwise to the generic one.
/// Immutable after construction; safe to share across parallel workers.
#[derive(Clone, Debug)]
pub struct RankEngine {
    field: Field,
    packed: Option<PackedSpec>,
}

impl RankEngine {
    pub fn new(field: &Field) -> RankEngine {
        RankEngine {
            field: field.clone(),
            packed: PackedSpec::for_field(field),
        }
    }

    pub fn is_packed(&self) -> bool {
        self.packed.is_some()
    }

    pub fn rank(&self, rows: usize, cols: usize, data: &[Elem]) -> usize {
        match &self.packed {
            Some(p) => p.rank(rows, cols, data),
            None => {
                let mut work = data.to_vec();
                rank_in_place(&self.field, rows, cols, &mut work)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f2() -> Field {
        Field::build(2, 1).unwrap()
    }

    #[test]
    fn rank_trivia() {
        let id = FqMatrix::identity(f2(), 2);
        assert_eq!(id.rank(), 2);
        let z = FqMatrix::zero(f2(), 3, 4);
        assert_eq!(z.rank(), 0);
        // W-tensor slice at u = (1,0): [[b,a],[a,0]] with a=1, b=0
        let m = FqMatrix::new(f2(), 2, 2, vec![0, 1, 1, 0]).unwrap();
        assert_eq!(m.rank(), 2);
    }

    /// Minor-based rank oracle for 2x2 matrices.
    fn rank2x2_oracle(f: &Field, e: &[Elem; 4]) -> usize {
        let det = f.sub(f.mul(e[0], e[3]), f.mul(e[1], e[2]));
        if det != 0 {
            2
        } else if e.iter().any(|&x| x != 0) {
            1
        } else {
            0
        }
    }

    #[test]
    fn all_2x2_gf2_against_minor_oracle() {
        let f = f2();
        for code in 0..16u16 {
            let e = [code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1];
            let m = FqMatrix::new(f.clone(), 2, 2, e.to_vec()).unwrap();
            assert_eq!(m.rank(), rank2x2_oracle(&f, &e));
        }
    }

    #[test]
    fn rank_equals_transpose_rank_all_2x3_gf2() {
        let f = f2();
        for code in 0..64u16 {
            let e: Vec<Elem> = (0..6).map(|i| (code >> i) & 1).collect();
            let m = FqMatrix::new(f.clone(), 2, 3, e).unwrap();
            assert_eq!(m.rank(), m.transpose().rank());
            assert_eq!(3, m.rank() + m.kernel_basis().len());
        }
    }

    #[test]
    fn kernel_basics() {
        let f = f2();
        assert!(FqMatrix::identity(f.clone(), 2).kernel_basis().is_empty());
        assert_eq!(FqMatrix::zero(f.clone(), 2, 3).kernel_basis().len(), 3);
        let m = FqMatrix::new(f.clone(), 1, 2, vec![1, 1]).unwrap();
        assert_eq!(m.kernel_basis(), vec![vec![1, 1]]);
        // kernel vectors annihilate
        for v in m.kernel_basis() {
            assert!(m.mat_vec(&v).unwrap().iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn solve_examples() {
        let f = f2();
        let id = FqMatrix::identity(f.clone(), 2);
        assert_eq!(id.solve(&[1, 0]).unwrap(), Some(vec![1, 0]));
        let z = FqMatrix::zero(f.clone(), 2, 2);
        assert_eq!(z.solve(&[1, 0]).unwrap(), None);
        let m = FqMatrix::new(f.clone(), 2, 2, vec![1, 1, 0, 0]).unwrap();
        assert_eq!(m.solve(&[1, 0]).unwrap(), Some(vec![1, 0]));
        assert!(matches!(
            m.solve(&[1, 0, 0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn product_rank_bound_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Field::build(3, 1).unwrap();
        for _ in 0..50 {
            let a_entries: Vec<Elem> = (0..12).map(|_| rng.gen_range(0..3)).collect();
            let b_entries: Vec<Elem> = (0..20).map(|_| rng.gen_range(0..3)).collect();
            let a = FqMatrix::new(f.clone(), 3, 4, a_entries).unwrap();
            let b = FqMatrix::new(f.clone(), 4, 5, b_entries).unwrap();
            let ab = a.mul(&b).unwrap();
            assert!(ab.rank() <= a.rank().min(b.rank()));
        }
    }

    #[test]
    fn solve_result_satisfies_system_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Field::build(2, 2).unwrap();
        for _ in 0..200 {
            let entries: Vec<Elem> = (0..12).map(|_| rng.gen_range(0..4)).collect();
            let m = FqMatrix::new(f.clone(), 3, 4, entries).unwrap();
            let y: Vec<Elem> = (0..3).map(|_| rng.gen_range(0..4)).collect();
            if let Some(x) = m.solve(&y).unwrap() {
                assert_eq!(m.mat_vec(&x).unwrap(), y);
            }
        }
    }

    #[test]
    fn packed_agrees_with_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for m_deg in 1..=4u32 {
            let f = Field::build(2, m_deg).unwrap();
            let packed = PackedSpec::for_field(&f).unwrap();
            let q = f.q() as u16;
            for _ in 0..500 {
                let rows = rng.gen_range(1..=9);
                let cols = rng.gen_range(1..=9);
                let data: Vec<Elem> = (0..rows * cols).map(|_| rng.gen_range(0..q)).collect();
                let generic = {
                    let mut w = data.clone();
                    rank_in_place(&f, rows, cols, &mut w)
                };
                assert_eq!(packed.rank(rows, cols, &data), generic);
            }
        }
    }

    #[test]
    fn packed_agrees_on_larger_gf2() {
        let f = f2();
        let packed = PackedSpec::for_field(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rows = rng.gen_range(1..=64);
            let cols = rng.gen_range(1..=64);
            let data: Vec<Elem> = (0..rows * cols).map(|_| rng.gen_range(0..2)).collect();
            let generic = {
                let mut w = data.clone();
                rank_in_place(&f, rows, cols, &mut w)
            };
            assert_eq!(packed.rank(rows, cols, &data), generic);
        }
    }

    #[test]
    fn no_packed_kernel_for_big_or_odd_fields() {
        assert!(PackedSpec::for_field(&Field::build(3, 1).unwrap()).is_none());
        assert!(PackedSpec::for_field(&Field::build(2, 5).unwrap()).is_none());
    }
}

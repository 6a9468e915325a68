//! Dense order-d tensors over a finite field with the structural operations
//! the rank computations need: contraction against covectors, coordinate
//! slices, restriction by linear maps, direct sum, Kronecker product,
//! flattenings, field extension and a registry of named families.
//!
//! Layout is row-major with 1-based mode numbering in the public API.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{Elem, Embedding, Field};
use crate::linalg::FqMatrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FqTensor {
    field: Field,
    dims: Vec<usize>,
    entries: Vec<Elem>, // row-major
}

/// A dual vector attached to one mode of a tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Covector {
    /// 1-based mode index.
    pub mode: usize,
    pub coords: Vec<Elem>,
}

impl FqTensor {
    pub fn new(field: Field, dims: Vec<usize>, entries: Vec<Elem>) -> Result<FqTensor> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(Error::ShapeMismatch("dims must be nonempty positive".into()));
        }
        let total: usize = dims.iter().product();
        if entries.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                total,
                entries.len()
            )));
        }
        if entries.iter().any(|&e| (e as u64) >= field.q()) {
            return Err(Error::ShapeMismatch("entry out of field range".into()));
        }
        Ok(FqTensor {
            field,
            dims,
            entries,
        })
    }

    pub fn zero(field: Field, dims: Vec<usize>) -> Result<FqTensor> {
        let total: usize = dims.iter().product();
        FqTensor::new(field, dims, vec![0; total])
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn order(&self) -> usize {
        self.dims.len()
    }
    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims)
    }

    pub fn get(&self, idx: &[usize]) -> Elem {
        let s = self.strides();
        let flat: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.entries[flat]
    }

    pub fn set(&mut self, idx: &[usize], v: Elem) {
        let s = self.strides();
        let flat: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.entries[flat] = v;
    }

    pub fn add(&self, other: &FqTensor) -> Result<FqTensor> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch("dims differ in add".into()));
        }
        let f = &self.field;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| f.add(a, b))
            .collect();
        FqTensor::new(f.clone(), self.dims.clone(), entries)
    }

    pub fn sub(&self, other: &FqTensor) -> Result<FqTensor> {
        self.add(&other.scale(self.field.neg(1)))
    }

    pub fn scale(&self, s: Elem) -> FqTensor {
        let f = &self.field;
        let entries = self.entries.iter().map(|&a| f.mul(a, s)).collect();
        FqTensor {
            field: f.clone(),
            dims: self.dims.clone(),
            entries,
        }
    }

    /// Contract against covectors on distinct modes; the remaining modes keep
    /// their order. Contracting all d modes yields a 0-order... actually a
    /// dims=[1] scalar tensor holding the single contraction value.
    pub fn contract(&self, covectors: &[Covector]) -> Result<FqTensor> {
        let d = self.order();
        let mut seen = vec![false; d];
        for cv in covectors {
            if cv.mode < 1 || cv.mode > d {
                return Err(Error::ModeOutOfRange(cv.mode, d));
            }
            if seen[cv.mode - 1] {
                return Err(Error::DuplicateMode(cv.mode));
            }
            seen[cv.mode - 1] = true;
            if cv.coords.len() != self.dims[cv.mode - 1] {
                return Err(Error::ShapeMismatch(format!(
                    "covector on mode {} has length {}, mode size is {}",
                    cv.mode,
                    cv.coords.len(),
                    self.dims[cv.mode - 1]
                )));
            }
            if cv.coords.iter().any(|&e| (e as u64) >= self.field.q()) {
                return Err(Error::FieldMismatch);
            }
        }
        let f = &self.field;
        let kept: Vec<usize> = (0..d).filter(|&i| !seen[i]).collect();
        let out_dims: Vec<usize> = if kept.is_empty() {
            vec![1]
        } else {
            kept.iter().map(|&i| self.dims[i]).collect()
        };
        let out_total: usize = out_dims.iter().product();
        let mut out = vec![0 as Elem; out_total];
        let out_strides = strides_of(&out_dims);
        let mut coeff_by_mode: Vec<Option<&[Elem]>> = vec![None; d];
        for cv in covectors {
            coeff_by_mode[cv.mode - 1] = Some(&cv.coords);
        }
        let mut idx = vec![0usize; d];
        for (flat, &e) in self.entries.iter().enumerate() {
            if e != 0 {
                let mut weight: Elem = 1;
                for (mode, &i) in idx.iter().enumerate() {
                    if let Some(c) = coeff_by_mode[mode] {
                        weight = f.mul(weight, c[i]);
                        if weight == 0 {
                            break;
                        }
                    }
                }
                if weight != 0 {
                    let out_flat: usize = if kept.is_empty() {
                        0
                    } else {
                        kept.iter()
                            .enumerate()
                            .map(|(pos, &m)| idx[m] * out_strides[pos])
                            .sum()
                    };
                    out[out_flat] = f.add(out[out_flat], f.mul(e, weight));
                }
            }
            let _ = flat;
            incr(&mut idx, &self.dims);
        }
        FqTensor::new(f.clone(), out_dims, out)
    }

    /// Full contraction of an order-d tensor against one covector per mode.
    pub fn contract_scalar(&self, coords: &[&[Elem]]) -> Result<Elem> {
        debug_assert_eq!(coords.len(), self.order());
        let cvs: Vec<Covector> = coords
            .iter()
            .enumerate()
            .map(|(i, c)| Covector {
                mode: i + 1,
                coords: c.to_vec(),
            })
            .collect();
        Ok(self.contract(&cvs)?.entries[0])
    }

    /// Coordinate slice: contraction with the standard basis covector
    /// e_index (1-based index) on the given mode.
    pub fn slice(&self, mode: usize, index: usize) -> Result<FqTensor> {
        let d = self.order();
        if mode < 1 || mode > d {
            return Err(Error::ModeOutOfRange(mode, d));
        }
        let n = self.dims[mode - 1];
        if index < 1 || index > n {
            return Err(Error::IndexOutOfRange {
                mode,
                index,
                size: n,
            });
        }
        let mut coords = vec![0 as Elem; n];
        coords[index - 1] = 1;
        self.contract(&[Covector { mode, coords }])
    }

    /// S = (g_1 x ... x g_d)(T) with g_j of shape m_j x n_j.
    pub fn restrict(&self, maps: &[FqMatrix]) -> Result<FqTensor> {
        let d = self.order();
        if maps.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "need {} maps, got {}",
                d,
                maps.len()
            )));
        }
        let mut cur = self.clone();
        for (mode0, g) in maps.iter().enumerate() {
            if g.field() != &self.field {
                return Err(Error::FieldMismatch);
            }
            if g.cols() != self.dims[mode0] {
                return Err(Error::ShapeMismatch(format!(
                    "map for mode {} has {} cols, mode size is {}",
                    mode0 + 1,
                    g.cols(),
                    self.dims[mode0]
                )));
            }
            cur = cur.mode_apply(mode0, g)?;
        }
        Ok(cur)
    }

    /// Apply a single linear map along mode `mode0` (0-based).
    fn mode_apply(&self, mode0: usize, g: &FqMatrix) -> Result<FqTensor> {
        let f = &self.field;
        let mut out_dims = self.dims.clone();
        out_dims[mode0] = g.rows();
        let out_total: usize = out_dims.iter().product();
        let mut out = vec![0 as Elem; out_total];
        let out_strides = strides_of(&out_dims);
        let mut idx = vec![0usize; self.order()];
        for &e in self.entries.iter() {
            if e != 0 {
                let i = idx[mode0];
                // base flat index with mode0 coordinate zeroed
                let base: usize = idx
                    .iter()
                    .enumerate()
                    .map(|(m, &v)| if m == mode0 { 0 } else { v * out_strides[m] })
                    .sum();
                for k in 0..g.rows() {
                    let w = g.get(k, i);
                    if w == 0 {
                        continue;
                    }
                    let flat = base + k * out_strides[mode0];
                    out[flat] = f.add(out[flat], f.mul(e, w));
                }
            }
            incr(&mut idx, &self.dims);
        }
        FqTensor::new(f.clone(), out_dims, out)
    }

    /// Block-diagonal sum: self in the leading block, other in the trailing.
    pub fn direct_sum(&self, other: &FqTensor) -> Result<FqTensor> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.order() != other.order() {
            return Err(Error::OrderMismatch(self.order(), other.order()));
        }
        let dims: Vec<usize> = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a + b)
            .collect();
        let mut out = FqTensor::zero(self.field.clone(), dims)?;
        let mut idx = vec![0usize; self.order()];
        for &e in self.entries.iter() {
            if e != 0 {
                out.set(&idx, e);
            }
            incr(&mut idx, &self.dims);
        }
        let mut idx = vec![0usize; other.order()];
        for &e in other.entries.iter() {
            if e != 0 {
                let shifted: Vec<usize> =
                    idx.iter().zip(&self.dims).map(|(i, off)| i + off).collect();
                out.set(&shifted, e);
            }
            incr(&mut idx, &other.dims);
        }
        Ok(out)
    }

    /// Kronecker product with index pairing (i, i') -> i * n + i' per mode,
    /// so identity x identity = identity on the nose.
    pub fn kronecker(&self, other: &FqTensor) -> Result<FqTensor> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.order() != other.order() {
            return Err(Error::OrderMismatch(self.order(), other.order()));
        }
        let f = &self.field;
        let dims: Vec<usize> = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a * b)
            .collect();
        let mut out = FqTensor::zero(f.clone(), dims)?;
        let mut i1 = vec![0usize; self.order()];
        for &e1 in self.entries.iter() {
            if e1 != 0 {
                let mut i2 = vec![0usize; other.order()];
                for &e2 in other.entries.iter() {
                    if e2 != 0 {
                        let paired: Vec<usize> = i1
                            .iter()
                            .zip(&i2)
                            .zip(&other.dims)
                            .map(|((a, b), n)| a * n + b)
                            .collect();
                        out.set(&paired, f.mul(e1, e2));
                    }
                    incr(&mut i2, &other.dims);
                }
            }
            incr(&mut i1, &self.dims);
        }
        Ok(out)
    }

    /// Flattening T_J: rows indexed row-major over J in ascending mode order,
    /// columns over the complement. J holds 1-based modes.
    pub fn flatten(&self, j_modes: &[usize]) -> Result<FqMatrix> {
        let d = self.order();
        let mut in_j = vec![false; d];
        for &m in j_modes {
            if m < 1 || m > d {
                return Err(Error::BadSubset);
            }
            if in_j[m - 1] {
                return Err(Error::BadSubset);
            }
            in_j[m - 1] = true;
        }
        let jc: Vec<usize> = (0..d).filter(|&i| !in_j[i]).collect();
        let jj: Vec<usize> = (0..d).filter(|&i| in_j[i]).collect();
        if jj.is_empty() || jc.is_empty() {
            return Err(Error::BadSubset);
        }
        let rows: usize = jj.iter().map(|&i| self.dims[i]).product();
        let cols: usize = jc.iter().map(|&i| self.dims[i]).product();
        let row_dims: Vec<usize> = jj.iter().map(|&i| self.dims[i]).collect();
        let col_dims: Vec<usize> = jc.iter().map(|&i| self.dims[i]).collect();
        let row_strides = strides_of(&row_dims);
        let col_strides = strides_of(&col_dims);
        let mut data = vec![0 as Elem; rows * cols];
        let mut idx = vec![0usize; d];
        for &e in self.entries.iter() {
            if e != 0 {
                let r: usize = jj
                    .iter()
                    .enumerate()
                    .map(|(pos, &m)| idx[m] * row_strides[pos])
                    .sum();
                let c: usize = jc
                    .iter()
                    .enumerate()
                    .map(|(pos, &m)| idx[m] * col_strides[pos])
                    .sum();
                data[r * cols + c] = e;
            }
            incr(&mut idx, &self.dims);
        }
        FqMatrix::new(self.field.clone(), rows, cols, data)
    }

    /// Reinterpret the tensor over the degree-k extension of its field.
    pub fn extend_field(&self, k: u32) -> Result<FqTensor> {
        let base = &self.field;
        let ext = Field::build(base.p(), base.m() * k)?;
        if k == 1 {
            return Ok(self.clone());
        }
        let emb = Embedding::new(base, &ext)?;
        let entries = self.entries.iter().map(|&e| emb.map(e)).collect();
        FqTensor::new(ext, self.dims.clone(), entries)
    }

    // --- named families ---

    /// Identity tensor I_r of order d: 1 at positions (i, ..., i).
    pub fn identity(field: Field, r: usize, d: usize) -> Result<FqTensor> {
        if r == 0 || d == 0 {
            return Err(Error::BadParams("identity needs r >= 1, d >= 1".into()));
        }
        let mut t = FqTensor::zero(field, vec![r; d])?;
        for i in 0..r {
            t.set(&vec![i; d], 1);
        }
        Ok(t)
    }

    /// The 2x2x2 W tensor: unit entries at (1,1,2), (1,2,1), (2,1,1).
    pub fn w_tensor(field: Field) -> Result<FqTensor> {
        let mut t = FqTensor::zero(field, vec![2, 2, 2])?;
        t.set(&[0, 0, 1], 1);
        t.set(&[0, 1, 0], 1);
        t.set(&[1, 0, 0], 1);
        Ok(t)
    }

    /// Matrix multiplication tensor <a,b,c>: dims (ab, bc, ca) with unit
    /// entries at ((i,k), (k,j), (j,i)).
    pub fn matmul(field: Field, a: usize, b: usize, c: usize) -> Result<FqTensor> {
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::BadParams("matmul needs positive sides".into()));
        }
        let mut t = FqTensor::zero(field, vec![a * b, b * c, c * a])?;
        for i in 0..a {
            for j in 0..c {
                for k in 0..b {
                    t.set(&[i * b + k, k * c + j, j * a + i], 1);
                }
            }
        }
        Ok(t)
    }

    /// Seeded uniform random tensor; entries drawn as next_u64 % q in
    /// row-major order, so the construction is platform-independent.
    pub fn random(field: Field, dims: Vec<usize>, seed: u64) -> Result<FqTensor> {
        use rand::RngCore;
        let total: usize = dims.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = field.q();
        let entries: Vec<Elem> = (0..total).map(|_| (rng.next_u64() % q) as Elem).collect();
        FqTensor::new(field, dims, entries)
    }

    /// Order-d diagonal tensor with the given diagonal values.
    pub fn diagonal(field: Field, values: &[Elem], d: usize) -> Result<FqTensor> {
        if values.is_empty() || d == 0 {
            return Err(Error::BadParams("diagonal needs values and d >= 1".into()));
        }
        let r = values.len();
        let mut t = FqTensor::zero(field, vec![r; d])?;
        for (i, &v) in values.iter().enumerate() {
            t.set(&vec![i; d], v);
        }
        Ok(t)
    }
}

pub(crate) fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Advance a row-major multi-index; wraps to all zeros at the end.
pub(crate) fn incr(idx: &mut [usize], dims: &[usize]) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < dims[i] {
            return;
        }
        idx[i] = 0;
    }
}

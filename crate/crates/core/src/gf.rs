//! Arithmetic and linear algebra over the finite field `GF(q)`, `q = p^e`.
//!
//! Elements are stored as integer indices in `[0, q)`. For prime fields the
//! index is the residue itself. For extension fields the index encodes a
//! polynomial in the polynomial basis: `index = c_0 + c_1 p + ... + c_{e-1}
//! p^{e-1}` stands for `c_0 + c_1 x + ... + c_{e-1} x^{e-1}` modulo a monic
//! irreducible polynomial of degree `e`. Index `0` is the additive identity
//! and index `1` the multiplicative identity in every field.
//!
//! ```
//! use qpolar::gf::FieldParams;
//!
//! let gf4 = FieldParams::new(4).unwrap();
//! // x * x = x^2 = x + 1 modulo x^2 + x + 1
//! assert_eq!(gf4.mul(2, 2), 3);
//! assert_eq!(gf4.inv(2).unwrap(), 3);
//! ```

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest extension field for which log/antilog tables are built.
pub const MAX_TABLE_Q: u32 = 1 << 16;

/// Largest extension degree accepted.
pub const MAX_DEGREE: u32 = 16;

/// Shared handle to a field description.
pub type Field = Arc<FieldParams>;

/// Description of `GF(p^e)` together with its arithmetic tables.
pub struct FieldParams {
    q: u32,
    p: u32,
    e: u32,
    modulus: Option<Vec<u32>>,
    tables: Option<LogTables>,
}

struct LogTables {
    // exp[k] = g^k for k in [0, 2(q-1)), so exp[log a + log b] never wraps.
    exp: Vec<u32>,
    // log[0] is unused.
    log: Vec<u32>,
}

impl fmt::Debug for FieldParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldParams")
            .field("q", &self.q)
            .field("p", &self.p)
            .field("e", &self.e)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldParams {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.modulus == other.modulus
    }
}

impl Eq for FieldParams {}

impl FieldParams {
    /// Builds `GF(q)` with the default modulus for extension fields: the
    /// monic irreducible polynomial of degree `e` whose lower coefficients,
    /// read as a base-`p` integer, are smallest.
    pub fn new(q: u32) -> Result<Field> {
        let (p, e) = prime_power(q as u64).ok_or(Error::NotPrimePower(q as u64))?;
        if e == 1 {
            return Ok(Arc::new(FieldParams {
                q,
                p,
                e,
                modulus: None,
                tables: None,
            }));
        }
        check_extension(q, e)?;
        let modulus = default_modulus(p, e);
        Ok(Arc::new(Self::with_tables(q, p, e, modulus)))
    }

    /// Builds `GF(p^e)` with an explicit modulus given as `e + 1`
    /// coefficients, lowest degree first. The polynomial must be monic and
    /// irreducible.
    pub fn with_modulus(q: u32, modulus: &[u32]) -> Result<Field> {
        let (p, e) = prime_power(q as u64).ok_or(Error::NotPrimePower(q as u64))?;
        if e == 1 {
            if modulus.is_empty() {
                return Self::new(q);
            }
            return Err(Error::ReducibleModulus(modulus.to_vec()));
        }
        check_extension(q, e)?;
        if modulus.len() != e as usize + 1
            || modulus[e as usize] != 1
            || modulus.iter().any(|&c| c >= p)
            || !is_irreducible(modulus, p)
        {
            return Err(Error::ReducibleModulus(modulus.to_vec()));
        }
        Ok(Arc::new(Self::with_tables(q, p, e, modulus.to_vec())))
    }

    fn with_tables(q: u32, p: u32, e: u32, modulus: Vec<u32>) -> FieldParams {
        let mut field = FieldParams {
            q,
            p,
            e,
            modulus: Some(modulus),
            tables: None,
        };
        let g = (2..q)
            .find(|&g| field.order_slow(g) == q - 1)
            .expect("multiplicative group of a finite field is cyclic");
        let n = (q - 1) as usize;
        let mut exp = vec![0u32; 2 * n];
        let mut log = vec![0u32; q as usize];
        let mut acc = 1u32;
        for k in 0..n {
            exp[k] = acc;
            exp[k + n] = acc;
            log[acc as usize] = k as u32;
            acc = field.mul_slow(acc, g);
        }
        field.tables = Some(LogTables { exp, log });
        field
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.e
    }

    /// Modulus coefficients (lowest degree first), present for `e > 1`.
    pub fn modulus(&self) -> Option<&[u32]> {
        self.modulus.as_deref()
    }

    pub fn element(self: &Arc<Self>, index: u32) -> Result<FieldElement> {
        if index >= self.q {
            return Err(Error::ElementOutOfRange {
                index: index as u64,
                q: self.q,
            });
        }
        Ok(FieldElement {
            index,
            field: Arc::clone(self),
        })
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.e == 1 {
            let s = a as u64 + b as u64;
            (s % self.p as u64) as u32
        } else if self.p == 2 {
            a ^ b
        } else {
            self.digitwise(a, b, |x, y, p| (x + y) % p)
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if self.e == 1 {
            if a == 0 {
                0
            } else {
                self.p - a
            }
        } else if self.p == 2 {
            a
        } else {
            self.digitwise(a, 0, |x, _, p| (p - x) % p)
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        match &self.tables {
            None => ((a as u64 * b as u64) % self.p as u64) as u32,
            Some(t) => t.exp[(t.log[a as usize] + t.log[b as usize]) as usize],
        }
    }

    pub fn inv(&self, a: u32) -> Result<u32> {
        if a == 0 {
            return Err(Error::DivisionByZero { q: self.q });
        }
        Ok(match &self.tables {
            None => pow_mod(a as u64, (self.p - 2) as u64, self.p as u64) as u32,
            Some(t) => {
                let n = self.q - 1;
                let l = t.log[a as usize];
                t.exp[((n - l) % n) as usize]
            }
        })
    }

    pub fn div(&self, a: u32, b: u32) -> Result<u32> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: u32, mut k: u64) -> u32 {
        let mut base = a;
        let mut acc = 1u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    fn digitwise(&self, a: u32, b: u32, op: impl Fn(u32, u32, u32) -> u32) -> u32 {
        let p = self.p;
        let (mut a, mut b) = (a, b);
        let mut out = 0u32;
        let mut scale = 1u32;
        for _ in 0..self.e {
            out += op(a % p, b % p, p) * scale;
            a /= p;
            b /= p;
            scale = scale.wrapping_mul(p);
        }
        out
    }

    /// Polynomial-basis multiplication without tables. Used to build the
    /// tables and as an independent check of them.
    pub fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let Some(modulus) = &self.modulus else {
            return ((a as u64 * b as u64) % self.p as u64) as u32;
        };
        let p = self.p;
        let e = self.e as usize;
        let da = digits(a, p, e);
        let db = digits(b, p, e);
        let mut prod = vec![0u32; 2 * e - 1];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p as u64) as u32;
            }
        }
        let rem = poly_rem(&prod, modulus, p);
        undigits(&rem, p)
    }

    fn order_slow(&self, g: u32) -> u32 {
        let mut acc = g;
        let mut k = 1;
        while acc != 1 {
            acc = self.mul_slow(acc, g);
            k += 1;
            if k > self.q {
                return 0;
            }
        }
        k
    }

    fn check_same(&self, other: &FieldParams) -> Result<()> {
        if std::ptr::eq(self, other) || self == other {
            Ok(())
        } else {
            Err(Error::FieldMismatch {
                left: self.q,
                right: other.q,
            })
        }
    }
}

fn check_extension(q: u32, e: u32) -> Result<()> {
    if e > MAX_DEGREE || q > MAX_TABLE_Q {
        return Err(Error::UnsupportedField {
            q: q as u64,
            reason: format!("extension fields need q <= {MAX_TABLE_Q} and e <= {MAX_DEGREE}"),
        });
    }
    Ok(())
}

/// Returns `(p, e)` with `n = p^e` and `p` prime, or `None`.
pub fn prime_power(n: u64) -> Option<(u32, u32)> {
    if n < 2 {
        return None;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            break;
        }
        p += 1;
    }
    if !n.is_multiple_of(p) {
        p = n;
    }
    let mut rest = n;
    let mut e = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        e += 1;
    }
    (rest == 1 && p <= u32::MAX as u64).then_some((p as u32, e))
}

fn pow_mod(mut b: u64, mut k: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        k >>= 1;
    }
    acc
}

fn digits(mut a: u32, p: u32, e: usize) -> Vec<u32> {
    let mut d = vec![0u32; e];
    for slot in d.iter_mut() {
        *slot = a % p;
        a /= p;
    }
    d
}

fn undigits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0u32, |acc, &c| acc * p + c)
}

// Remainder of `a` modulo the monic polynomial `f` over F_p.
fn poly_rem(a: &[u32], f: &[u32], p: u32) -> Vec<u32> {
    let deg_f = f.len() - 1;
    let mut r = a.to_vec();
    while r.len() > deg_f {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - deg_f;
        if lead != 0 {
            for (k, &c) in f.iter().enumerate() {
                let sub = (lead as u64 * c as u64 % p as u64) as u32;
                r[shift + k] = (r[shift + k] + p - sub) % p;
            }
        }
        r.pop();
    }
    r.resize(deg_f, 0);
    r
}

fn is_irreducible(f: &[u32], p: u32) -> bool {
    let e = f.len() - 1;
    // Any factorization has a monic factor of degree at most e / 2.
    for d in 1..=e / 2 {
        let count = (p as u64).pow(d as u32);
        for low in 0..count {
            let mut g: Vec<u32> = digits(low as u32, p, d);
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn default_modulus(p: u32, e: u32) -> Vec<u32> {
    let count = (p as u64).pow(e);
    (0..count)
        .map(|low| {
            let mut f = digits(low as u32, p, e as usize);
            f.push(1);
            f
        })
        .find(|f| is_irreducible(f, p))
        .expect("irreducible polynomials exist in every degree")
}

/// A single element of `GF(q)` bound to its field.
#[derive(Clone)]
pub struct FieldElement {
    index: u32,
    field: Field,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@GF({})", self.index, self.field.q)
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && *self.field == *other.field
    }
}

impl Eq for FieldElement {}

impl FieldElement {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.index == 0
    }

    fn with(&self, index: u32) -> FieldElement {
        FieldElement {
            index,
            field: Arc::clone(&self.field),
        }
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.field.check_same(&other.field)?;
        Ok(self.with(self.field.add(self.index, other.index)))
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.field.check_same(&other.field)?;
        Ok(self.with(self.field.sub(self.index, other.index)))
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.field.check_same(&other.field)?;
        Ok(self.with(self.field.mul(self.index, other.index)))
    }

    pub fn div(&self, other: &FieldElement) -> Result<FieldElement> {
        self.field.check_same(&other.field)?;
        Ok(self.with(self.field.div(self.index, other.index)?))
    }

    pub fn inv(&self) -> Result<FieldElement> {
        Ok(self.with(self.field.inv(self.index)?))
    }

    pub fn neg(&self) -> FieldElement {
        self.with(self.field.neg(self.index))
    }
}

/// Dense row-major matrix over `GF(q)`.
#[derive(Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
    field: Field,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} over GF({})", self.rows, self.cols, self.field.q)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data && *self.field == *other.field
    }
}

impl Eq for Matrix {}

impl Matrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
            field: Arc::clone(field),
        }
    }

    pub fn identity(field: &Field, n: usize) -> Matrix {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major element indices.
    pub fn from_vec(field: &Field, rows: usize, cols: usize, data: Vec<u32>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= field.q) {
            return Err(Error::ElementOutOfRange {
                index: bad as u64,
                q: field.q,
            });
        }
        Ok(Matrix {
            rows,
            cols,
            data,
            field: Arc::clone(field),
        })
    }

    pub fn from_rows(field: &Field, rows: &[Vec<u32>]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Matrix::from_vec(field, rows.len(), cols, rows.concat())
    }

    /// A single column vector.
    pub fn column(field: &Field, v: &[u32]) -> Result<Matrix> {
        Matrix::from_vec(field, v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        assert!(v < self.field.q);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(&self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Rows `from..` as a new matrix.
    pub fn drop_rows(&self, from: usize) -> Matrix {
        let from = from.min(self.rows);
        Matrix {
            rows: self.rows - from,
            cols: self.cols,
            data: self.data[from * self.cols..].to_vec(),
            field: Arc::clone(&self.field),
        }
    }

    /// The columns listed in `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            data.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
            field: Arc::clone(&self.field),
        }
    }

    /// `[v M]`: the vector `v` prepended as a new first column.
    pub fn prepend_column(&self, v: &[u32]) -> Result<Matrix> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for (r, &x) in v.iter().enumerate() {
            data.push(x);
            data.extend_from_slice(self.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols + 1,
            data,
            field: Arc::clone(&self.field),
        })
    }

    /// Rank by Gaussian elimination, taking the first nonzero pivot in each
    /// column. Matrices with no rows or no columns have rank 0.
    pub fn rank(&self) -> usize {
        rank_in_place(&self.field, &mut self.data.clone(), self.rows, self.cols)
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.rows.min(self.cols)
    }

    /// Whether `v = M w` has a solution `w`. The column space of a matrix
    /// without columns is `{0}`.
    pub fn in_colspace(&self, v: &[u32]) -> Result<bool> {
        let augmented = self.prepend_column(v)?;
        Ok(augmented.rank() == self.rank())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.field.check_same(&other.field)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = Matrix::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    out.data[idx] = f.add(out.data[idx], f.mul(a, other.get(k, c)));
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kronecker(&self, other: &Matrix) -> Result<Matrix> {
        self.field.check_same(&other.field)?;
        let f = &self.field;
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Matrix::zeros(f, rows, cols);
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self.get(ar, ac);
                for br in 0..other.rows {
                    for bc in 0..other.cols {
                        let r = ar * other.rows + br;
                        let c = ac * other.cols + bc;
                        out.data[r * cols + c] = f.mul(a, other.get(br, bc));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Uniform sample from the full-rank `rows x cols` matrices by rejection.
    pub fn sample_full_rank<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
        if rows > cols {
            return Err(Error::DimensionMismatch(format!(
                "full row rank needs rows <= cols, got {rows}x{cols}"
            )));
        }
        let q = field.q;
        let mut data = vec![0u32; rows * cols];
        let mut scratch = vec![0u32; rows * cols];
        loop {
            for v in data.iter_mut() {
                *v = rng.gen_range(0..q);
            }
            scratch.copy_from_slice(&data);
            if rank_in_place(field, &mut scratch, rows, cols) == rows {
                return Ok(Matrix {
                    rows,
                    cols,
                    data,
                    field: Arc::clone(field),
                });
            }
        }
    }
}

/// Row-reduces `data` (a `rows x cols` row-major buffer) in place and
/// returns the rank.
pub(crate) fn rank_in_place(f: &FieldParams, data: &mut [u32], rows: usize, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| data[r * cols + c] != 0) else {
            continue;
        };
        if pivot != rank {
            for k in c..cols {
                data.swap(pivot * cols + k, rank * cols + k);
            }
        }
        let inv = f.inv(data[rank * cols + c]).expect("pivot is nonzero");
        for k in c..cols {
            data[rank * cols + k] = f.mul(data[rank * cols + k], inv);
        }
        for r in rank + 1..rows {
            let factor = data[r * cols + c];
            if factor == 0 {
                continue;
            }
            for k in c..cols {
                let sub = f.mul(factor, data[rank * cols + k]);
                data[r * cols + k] = f.sub(data[r * cols + k], sub);
            }
        }
        rank += 1;
    }
    rank
}

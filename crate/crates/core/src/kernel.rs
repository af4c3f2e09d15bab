//! Fixed polarization kernels on the `q`-ary erasure channel.
//!
//! Under successive cancellation, symbol `i` of `u` in `x = u G` is erased,
//! given the set `S` of unerased outputs and correct `u_0..u_{i-1}`, exactly
//! when row `i` of `G_S` lies in the span of rows `i+1..m` of `G_S`
//! (equivalently, when `e_1` is outside the column space of `G_S^(i)`).
//! Counting erasing sets by size gives the exact erasure polynomials
//!
//! ```text
//! phi_i(x) = sum_d a[i][d] x^(m-d) (1-x)^d,   a[i][d] = #{S : |S| = d, E^(i)(S) = 1}
//! ```
//!
//! Row `i = 0` is decoded first and is the worst channel.
//!
//! ```
//! use qpolar::kernel::{arikan_tensor, profile_poly};
//!
//! let f = arikan_tensor(1).unwrap();
//! let p = profile_poly(&f).unwrap();
//! assert_eq!(p.monomial_coeffs(0), vec![0, 2, -1]); // 2x - x^2
//! assert_eq!(p.monomial_coeffs(1), vec![0, 0, 1]); // x^2
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::de::{binomial_pmf, ErasureProb};
use crate::error::{out_of_range, Error, Result};
use crate::gf::{Field, FieldParams, Matrix};
use crate::lyapunov::{self, ErasureTransform, LambdaReport, LyapunovFn, OperatorSpec};
use crate::numeric::{count_events, kahan_sum, McEstimate};

/// Default limit on `m` for exhaustive subset enumeration.
pub const DEFAULT_MAX_ENUMERATION_M: usize = 20;

/// An invertible `m x m` matrix over `GF(q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    g: Matrix,
}

impl Kernel {
    pub fn new(g: Matrix) -> Result<Kernel> {
        if g.rows() != g.cols() {
            return Err(Error::DimensionMismatch(format!(
                "kernel must be square, got {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        let rank = g.rank();
        if rank < g.rows() {
            return Err(Error::NotInvertible { rank, m: g.rows() });
        }
        Ok(Kernel { g })
    }

    pub fn m(&self) -> usize {
        self.g.rows()
    }

    pub fn q(&self) -> u32 {
        self.g.field().q()
    }

    pub fn field(&self) -> &Field {
        self.g.field()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.g
    }

    /// Kernel file: `q m [modulus coefficients]` on the first line, then `m`
    /// rows of `m` element indices.
    pub fn read<R: BufRead>(r: R) -> Result<Kernel> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut rows = Vec::new();
        let mut header: Option<(u32, usize, Vec<u32>)> = None;
        for (n, line) in r.lines().enumerate() {
            let lineno = n + 1;
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim().to_string();
            if line.is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<u64>().map_err(|e| parse_err(lineno, format!("`{t}`: {e}"))))
                .collect::<Result<Vec<u64>>>()?;
            match &header {
                None => {
                    if nums.len() < 2 {
                        return Err(parse_err(lineno, "expected `q m [modulus coefficients]`".into()));
                    }
                    let q = u32::try_from(nums[0]).map_err(|_| parse_err(lineno, "q too large".into()))?;
                    let modulus = nums[2..].iter().map(|&c| c as u32).collect();
                    header = Some((q, nums[1] as usize, modulus));
                }
                Some((q, m, _)) => {
                    if nums.len() != *m {
                        return Err(parse_err(lineno, format!("expected {m} entries, got {}", nums.len())));
                    }
                    if let Some(&bad) = nums.iter().find(|&&v| v >= *q as u64) {
                        return Err(parse_err(lineno, format!("entry {bad} not in [0, {q})")));
                    }
                    rows.push(nums.into_iter().map(|v| v as u32).collect::<Vec<u32>>());
                }
            }
        }
        let (q, m, modulus) = header.ok_or_else(|| parse_err(1, "empty kernel file".into()))?;
        if rows.len() != m {
            return Err(parse_err(0, format!("expected {m} rows, got {}", rows.len())));
        }
        let field = if modulus.is_empty() {
            FieldParams::new(q)?
        } else {
            FieldParams::with_modulus(q, &modulus)?
        };
        Kernel::new(Matrix::from_rows(&field, &rows)?)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "{} {}", self.q(), self.m())?;
        if let Some(modulus) = self.field().modulus() {
            for c in modulus {
                write!(w, " {c}")?;
            }
        }
        writeln!(w)?;
        for r in 0..self.m() {
            let row: Vec<String> = self.g.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Kernel> {
        Kernel::read(BufReader::new(File::open(path)?))
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// `F^{⊗levels}` over `GF(2)` with `F = [[1, 0], [1, 1]]`.
pub fn arikan_tensor(levels: u32) -> Result<Kernel> {
    let field = FieldParams::new(2)?;
    let f = Matrix::from_rows(&field, &[vec![1, 0], vec![1, 1]])?;
    let mut g = Matrix::identity(&field, 1);
    for _ in 0..levels {
        g = g.kronecker(&f)?;
    }
    Kernel::new(g)
}

/// The `q x q` Vandermonde matrix on the field elements in index order,
/// rows ordered by decreasing degree: `V[r][c] = c^(q-1-r)` with
/// `0^0 = 1`. Row `r` of `V` together with the rows below spans the
/// evaluations of polynomials of degree at most `q - 1 - r`, so the first
/// decoded symbol carries the highest degree.
pub fn vandermonde(q: u32) -> Result<Kernel> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    let field = FieldParams::new(q)?;
    let rows: Vec<Vec<u32>> = (0..q)
        .map(|r| (0..q).map(|c| field.pow(c, (q - 1 - r) as u64)).collect())
        .collect();
    Kernel::new(Matrix::from_rows(&field, &rows)?)
}

/// `E^(i)(S) = rank([e_1 G_S^(i)]) - rank(G_S^(i))` as a boolean.
pub fn erasure_indicator(kernel: &Kernel, i: usize, subset: &[usize]) -> Result<bool> {
    let m = kernel.m();
    if i >= m {
        return Err(out_of_range("i", i, format!("[0, {m})")));
    }
    if let Some(&c) = subset.iter().find(|&&c| c >= m) {
        return Err(out_of_range("column", c, format!("[0, {m})")));
    }
    let sub = kernel.g.drop_rows(i).select_columns(subset);
    let mut e1 = vec![0u32; m - i];
    e1[0] = 1;
    Ok(!sub.in_colspace(&e1)?)
}

/// Row-space basis over a general field, with entries outside the observed
/// columns zeroed.
struct Basis<'a> {
    field: &'a FieldParams,
    m: usize,
    /// `rows[p]` has pivot `p` normalized to one.
    rows: Vec<Option<Vec<u32>>>,
}

impl<'a> Basis<'a> {
    fn new(field: &'a FieldParams, m: usize) -> Basis<'a> {
        Basis {
            field,
            m,
            rows: vec![None; m],
        }
    }

    /// Inserts `v`; returns false when `v` was already in the span.
    fn insert(&mut self, mut v: Vec<u32>) -> bool {
        let f = self.field;
        for p in 0..self.m {
            if v[p] == 0 {
                continue;
            }
            match &self.rows[p] {
                Some(b) => {
                    let c = v[p];
                    for k in p..self.m {
                        v[k] = f.sub(v[k], f.mul(c, b[k]));
                    }
                }
                None => {
                    let inv = f.inv(v[p]).expect("nonzero pivot");
                    for x in v[p..].iter_mut() {
                        *x = f.mul(*x, inv);
                    }
                    self.rows[p] = Some(v);
                    return true;
                }
            }
        }
        false
    }
}

/// Erasure bits of every symbol for one observed column set: bit `i` is set
/// when symbol `i` is erased.
fn erasure_pattern(kernel: &Kernel, mask: u64) -> u64 {
    let m = kernel.m();
    let mut erased = 0u64;
    if kernel.q() == 2 {
        // Rows as bit masks; an XOR basis keyed by highest set bit.
        let mut basis = [0u64; 64];
        for i in (0..m).rev() {
            let mut v = (0..m)
                .filter(|&c| kernel.g.get(i, c) != 0)
                .fold(0u64, |acc, c| acc | (1 << c))
                & mask;
            while v != 0 {
                let top = 63 - v.leading_zeros() as usize;
                if basis[top] == 0 {
                    basis[top] = v;
                    break;
                }
                v ^= basis[top];
            }
            if v == 0 {
                erased |= 1 << i;
            }
        }
        return erased;
    }
    let mut basis = Basis::new(kernel.field(), m);
    for i in (0..m).rev() {
        let v: Vec<u32> = (0..m)
            .map(|c| if mask >> c & 1 == 1 { kernel.g.get(i, c) } else { 0 })
            .collect();
        if !basis.insert(v) {
            erased |= 1 << i;
        }
    }
    erased
}

/// Exact erasure polynomials of a kernel: `a[i][d]` counts the observed
/// sets of size `d` that leave symbol `i` erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfilePolynomial {
    m: usize,
    q: u32,
    a: Vec<Vec<u64>>,
}

fn binomials(m: usize) -> Vec<u64> {
    let mut c = vec![1u64; m + 1];
    for d in 1..=m {
        c[d] = c[d - 1] * (m - d + 1) as u64 / d as u64;
    }
    c
}

/// [`profile_poly_capped`] with the default cap.
pub fn profile_poly(kernel: &Kernel) -> Result<ProfilePolynomial> {
    profile_poly_capped(kernel, DEFAULT_MAX_ENUMERATION_M)
}

/// Enumerates all `2^m` observed sets once, finding the erasure pattern of
/// every symbol with a single bottom-up pass of row insertions.
pub fn profile_poly_capped(kernel: &Kernel, max_m: usize) -> Result<ProfilePolynomial> {
    let m = kernel.m();
    let cap = max_m.min(63);
    if m > cap {
        return Err(Error::CapExceeded {
            what: "subset enumeration (use phi_mc for larger kernels)",
            requested: 1u128 << m.min(127),
            cap: 1u128 << cap,
        });
    }
    let total = 1u64 << m;
    let chunk = 1u64 << m.saturating_sub(6).min(14);
    let starts: Vec<u64> = (0..total).step_by(chunk as usize).collect();
    let partials: Vec<Vec<u64>> = starts
        .into_par_iter()
        .map(|start| {
            let mut counts = vec![0u64; m * (m + 1)];
            for mask in start..(start + chunk).min(total) {
                let d = mask.count_ones() as usize;
                let mut pattern = erasure_pattern(kernel, mask);
                while pattern != 0 {
                    let i = pattern.trailing_zeros() as usize;
                    counts[i * (m + 1) + d] += 1;
                    pattern &= pattern - 1;
                }
            }
            counts
        })
        .collect();
    let mut flat = vec![0u64; m * (m + 1)];
    for p in partials {
        for (acc, v) in flat.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let a = flat.chunks(m + 1).map(|c| c.to_vec()).collect();
    Ok(ProfilePolynomial { m, q: kernel.q(), a })
}

impl ProfilePolynomial {
    /// Builds a profile from a count table, checking `a[i][d] <= C(m, d)`.
    pub fn from_counts(q: u32, a: Vec<Vec<u64>>) -> Result<ProfilePolynomial> {
        let m = a.len();
        let c = binomials(m);
        for row in &a {
            if row.len() != m + 1 {
                return Err(Error::DimensionMismatch(format!("expected {} counts per row", m + 1)));
            }
            if let Some((d, _)) = row.iter().enumerate().find(|&(d, &v)| v > c[d]) {
                return Err(out_of_range("count", row[d], format!("<= C({m}, {d})")));
            }
        }
        Ok(ProfilePolynomial { m, q, a })
    }

    /// The split `psi_i(x) = P(Bin(q, x) >= i + 1)` of the Reed–Solomon
    /// kernel: `a[i][d] = C(q, d)` when `q - d >= i + 1`.
    pub fn reed_solomon(q: u32) -> ProfilePolynomial {
        let m = q as usize;
        let c = binomials(m);
        let a = (0..m)
            .map(|i| (0..=m).map(|d| if m - d > i { c[d] } else { 0 }).collect())
            .collect();
        ProfilePolynomial { m, q, a }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.a
    }

    /// `phi_i(x)` with its complement.
    pub fn eval(&self, i: usize, x: ErasureProb) -> ErasureProb {
        let c = binomials(self.m);
        let pmf = binomial_pmf(self.m, x.flip());
        let e = kahan_sum((0..=self.m).map(|d| pmf[d] * self.a[i][d] as f64 / c[d] as f64));
        let k = kahan_sum((0..=self.m).map(|d| pmf[d] * (c[d] - self.a[i][d]) as f64 / c[d] as f64));
        ErasureProb::from_parts(e, k)
    }

    /// Coefficients of `phi_i` in the monomial basis, constant term first.
    pub fn monomial_coeffs(&self, i: usize) -> Vec<i128> {
        let m = self.m;
        let c: Vec<Vec<i128>> = (0..=m)
            .map(|n| {
                let b = binomials(n);
                b.into_iter().map(|v| v as i128).collect()
            })
            .collect();
        let mut out = vec![0i128; m + 1];
        // x^(m-d) (1-x)^d = sum_t C(d,t) (-1)^t x^(m-d+t)
        for d in 0..=m {
            let a = self.a[i][d] as i128;
            if a == 0 {
                continue;
            }
            for t in 0..=d {
                let sign = if t % 2 == 0 { 1 } else { -1 };
                out[m - d + t] += sign * a * c[d][t];
            }
        }
        out
    }

    /// `sum_i a[i][d] = (m - d) C(m, d)`, i.e. `(1/m) sum_i phi_i(x) = x`.
    pub fn preserves_mean(&self) -> bool {
        let c = binomials(self.m);
        (0..=self.m).all(|d| self.a.iter().map(|row| row[d]).sum::<u64>() == (self.m - d) as u64 * c[d])
    }

    /// Whether the multisets of erasure polynomials agree.
    pub fn same_multiset(&self, other: &ProfilePolynomial) -> bool {
        let mut a = self.a.clone();
        let mut b = other.a.clone();
        a.sort();
        b.sort();
        a == b
    }

    /// Whether `{phi_i}` is closed under `phi -> 1 - phi(1 - x)`.
    pub fn is_symmetric(&self) -> bool {
        let c = binomials(self.m);
        let mirrored = ProfilePolynomial {
            m: self.m,
            q: self.q,
            a: self
                .a
                .iter()
                .map(|row| (0..=self.m).map(|d| c[d] - row[self.m - d]).collect())
                .collect(),
        };
        self.same_multiset(&mirrored)
    }

    pub fn transform(&self) -> ErasureTransform {
        let c = binomials(self.m);
        let erased = self
            .a
            .iter()
            .map(|row| row.iter().zip(&c).map(|(&a, &c)| a as f64 / c as f64).collect())
            .collect();
        let kept = self
            .a
            .iter()
            .map(|row| row.iter().zip(&c).map(|(&a, &c)| (c - a) as f64 / c as f64).collect())
            .collect();
        ErasureTransform::new(erased, kept, self.is_symmetric())
    }

    pub fn operator(&self, label: &str) -> OperatorSpec {
        OperatorSpec::Fixed {
            label: label.to_string(),
            transform: Arc::new(self.transform()),
        }
    }

    /// CSV with header `i,d,a_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,d,a_id")?;
        for (i, row) in self.a.iter().enumerate() {
            for (d, v) in row.iter().enumerate() {
                writeln!(w, "{i},{d},{v}")?;
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimate of `phi_i(x)`: each output erased independently
/// with probability `x`.
pub fn phi_mc(kernel: &Kernel, i: usize, x: ErasureProb, trials: u64, seed: u64) -> Result<McEstimate> {
    let m = kernel.m();
    if i >= m {
        return Err(out_of_range("i", i, format!("[0, {m})")));
    }
    if m > 63 {
        return Err(out_of_range("m", m, "<= 63"));
    }
    if trials == 0 {
        return Err(out_of_range("trials", trials, ">= 1"));
    }
    let p = x.value();
    Ok(count_events(trials, seed, |rng| {
        let mask = (0..m).fold(0u64, |acc, c| if rng.gen_bool(p) { acc } else { acc | 1 << c });
        erasure_pattern(kernel, mask) >> i & 1 == 1
    }))
}

/// `sup_x (T_G V)(x) / V(x)` for `V = (x(1-x))^beta`.
pub fn lambda_kernel(
    profile: &ProfilePolynomial,
    label: &str,
    beta: f64,
    grid_points: usize,
    refine_tol: f64,
) -> Result<LambdaReport> {
    lyapunov::lambda_sup(
        &profile.operator(label),
        &LyapunovFn::power(beta)?,
        grid_points,
        refine_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::for_each_invertible;
    use crate::numeric::block_rng;

    fn gf(q: u32) -> Field {
        FieldParams::new(q).unwrap()
    }

    fn random_kernel(q: u32, m: usize, seed: u64) -> Kernel {
        let mut rng = block_rng(seed, 0);
        Kernel::new(Matrix::sample_full_rank(&gf(q), m, m, &mut rng).unwrap()).unwrap()
    }

    fn subset(mask: u64, m: usize) -> Vec<usize> {
        (0..m).filter(|&c| mask >> c & 1 == 1).collect()
    }

    #[test]
    fn indicator_examples() {
        let f = arikan_tensor(1).unwrap();
        assert!(erasure_indicator(&f, 0, &[1]).unwrap());
        assert!(!erasure_indicator(&f, 1, &[1]).unwrap());
        for i in 0..2 {
            assert!(!erasure_indicator(&f, i, &[0, 1]).unwrap());
            assert!(erasure_indicator(&f, i, &[]).unwrap());
        }
        assert!(erasure_indicator(&f, 2, &[]).is_err());
    }

    #[test]
    fn fast_pattern_matches_rank_difference() {
        for (q, m, seed) in [(2, 5, 1), (2, 6, 2), (3, 4, 3), (4, 4, 4), (5, 3, 5)] {
            let k = random_kernel(q, m, seed);
            for mask in 0..1u64 << m {
                let pattern = erasure_pattern(&k, mask);
                for i in 0..m {
                    let slow = erasure_indicator(&k, i, &subset(mask, m)).unwrap();
                    assert_eq!(pattern >> i & 1 == 1, slow, "q={q} m={m} mask={mask} i={i}");
                }
            }
        }
    }

    #[test]
    fn indicator_is_monotone() {
        for (q, m, seed) in [(2, 5, 7), (3, 4, 8), (2, 4, 9)] {
            let k = random_kernel(q, m, seed);
            for s in 0..1u64 << m {
                for t in 0..1u64 << m {
                    if s & t == s {
                        let (ps, pt) = (erasure_pattern(&k, s), erasure_pattern(&k, t));
                        assert_eq!(pt & !ps, 0, "more observations erased a symbol");
                    }
                }
            }
        }
    }

    #[test]
    fn arikan_profiles() {
        let p = profile_poly(&arikan_tensor(1).unwrap()).unwrap();
        assert_eq!(p.counts(), &[vec![1, 2, 0], vec![1, 0, 0]]);
        assert!(p.same_multiset(&ProfilePolynomial::reed_solomon(2)));
        assert!(p.preserves_mean() && p.is_symmetric());
        let x = ErasureProb::new(0.3).unwrap();
        assert!((p.eval(0, x).value() - 0.51).abs() < 1e-15);
        assert!((p.eval(1, x).value() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn m2_binary_kernels() {
        // Only the two kernels without e_1 as a column polarize.
        let field = gf(2);
        let arikan = ProfilePolynomial::reed_solomon(2);
        let identity = ProfilePolynomial::from_counts(2, vec![vec![1, 1, 0], vec![1, 1, 0]]).unwrap();
        let mut polarizing = 0;
        let total = for_each_invertible(2, &field, |g| {
            let p = profile_poly(&Kernel::new(g.clone()).unwrap()).unwrap();
            if p.same_multiset(&arikan) {
                polarizing += 1;
            } else {
                assert!(p.same_multiset(&identity));
            }
        })
        .unwrap();
        assert_eq!((total, polarizing), (6, 2));
    }

    #[test]
    fn random_kernels_preserve_mean() {
        for (q, m, seed) in [(2, 8, 1), (3, 5, 2), (4, 4, 3), (2, 12, 4)] {
            let p = profile_poly(&random_kernel(q, m, seed)).unwrap();
            assert!(p.preserves_mean());
            let mut sum = vec![0i128; m + 1];
            for i in 0..m {
                for (s, c) in sum.iter_mut().zip(p.monomial_coeffs(i)) {
                    *s += c;
                }
            }
            let mut expected = vec![0i128; m + 1];
            expected[1] = m as i128;
            assert_eq!(sum, expected);
        }
    }

    #[test]
    fn vandermonde_kernels() {
        let v2 = vandermonde(2).unwrap();
        assert_eq!(v2.matrix().row(0), &[0, 1]);
        assert_eq!(v2.matrix().row(1), &[1, 1]);
        for q in [2, 3, 4, 5, 7, 8] {
            let p = profile_poly(&vandermonde(q).unwrap()).unwrap();
            assert!(p.same_multiset(&ProfilePolynomial::reed_solomon(q)), "q={q}");
        }
    }

    #[test]
    fn cap_and_file_round_trip() {
        let k = random_kernel(2, 8, 3);
        assert!(matches!(profile_poly_capped(&k, 6), Err(Error::CapExceeded { .. })));
        for k in [
            random_kernel(4, 5, 1),
            random_kernel(7, 3, 2),
            arikan_tensor(3).unwrap(),
        ] {
            let mut buf = Vec::new();
            k.write(&mut buf).unwrap();
            assert_eq!(Kernel::read(&buf[..]).unwrap(), k);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        vandermonde(4).unwrap().store(&path).unwrap();
        assert_eq!(Kernel::load(&path).unwrap(), vandermonde(4).unwrap());
        assert!(matches!(
            Kernel::read(&b"2 2\n1 1\n1 1\n"[..]),
            Err(Error::NotInvertible { .. })
        ));
        assert!(Kernel::read(&b"2 2\n1 0\n"[..]).is_err());
        assert!(Kernel::read(&b"2 2\n1 2\n0 1\n"[..]).is_err());
    }

    #[test]
    fn monte_carlo_profile() {
        let f = arikan_tensor(1).unwrap();
        let est = phi_mc(&f, 1, ErasureProb::new(0.5).unwrap(), 100_000, 1).unwrap();
        assert!((est.mean - 0.25).abs() <= 0.005);
        assert_eq!(phi_mc(&f, 0, ErasureProb::ZERO, 1000, 1).unwrap().hits, 0);
        assert_eq!(phi_mc(&f, 0, ErasureProb::ONE, 1000, 1).unwrap().hits, 1000);
        let k = random_kernel(3, 6, 9);
        let p = profile_poly(&k).unwrap();
        let x = ErasureProb::new(0.4).unwrap();
        for i in 0..6 {
            let est = phi_mc(&k, i, x, 20_000, i as u64).unwrap();
            assert!(est.within(p.eval(i, x).value(), 4.0), "i={i}");
        }
    }

    #[test]
    fn csv_export() {
        let p = profile_poly(&arikan_tensor(1).unwrap()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,d,a_id\n0,0,1\n0,1,2\n"));
    }
}

//! The ensemble of uniformly random invertible `m x m` kernels over `GF(q)`.
//!
//! Symbol `i` of a kernel `G` is erased, given the set `S` of unerased
//! outputs, iff `e_1` is outside the column space of `G_S^(i)`, the rows
//! `i..m` of `G` restricted to the columns in `S`. Averaged over the
//! ensemble this probability depends only on `d = |S|`:
//!
//! ```text
//! rho(m, i, d, q) = P(e_1 not in colspace(G_S^(i)))
//! ```
//!
//! With `k = m - i`, `phi(j, n) = prod_{l<j} (q^n - q^l)` and Gaussian
//! binomials `[a b]_q`,
//!
//! ```text
//! rho = sum_j (q^k - q^j) phi(j, d) [k j]_q
//!             sum_l phi(l, m - d) q^((k-j)(k-l)) [j k-l]_q
//!       / ((q^k - 1) phi(k, m))
//! ```
//!
//! Every quantity here is computed in exact rational arithmetic; floating
//! point enters only when the averaged erasure polynomials
//! `phibar_i(x) = sum_d C(m,d) x^(m-d) (1-x)^d rho(m, i, d, q)` are evaluated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::de::ErasureProb;
use crate::error::{out_of_range, Error, Result};
use crate::gf::{Field, FieldParams, Matrix};
use crate::lyapunov::{self, uniform_grid, ErasureTransform, GridFn, LambdaReport, LyapunovFn, OperatorSpec};
use crate::numeric::{count_events, kahan_sum, McEstimate};

/// Largest `m` accepted by [`RhoTable::build`].
pub const MAX_M: u32 = 128;
/// Largest depth accepted by [`gbar_sequence`].
pub const MAX_GBAR_DEPTH: u32 = 32;
/// Positive second differences up to this size still count as concave.
pub const CONCAVITY_TOLERANCE: f64 = 1e-9;
/// Largest number of matrices [`for_each_invertible`] will enumerate.
pub const ENUMERATION_CAP: u64 = 1 << 20;

/// Exact integer tables shared by the closed forms.
struct Tables {
    q: u32,
    log2_q: Option<u32>,
    /// `powers[e] = q^e` (only when `q` is not a power of two).
    powers: Vec<BigUint>,
    /// `gauss[a][b] = [a b]_q` for `b <= a`.
    gauss: Vec<Vec<BigUint>>,
    /// `phi[n][l] = phi(l, n)` for `l <= n`.
    phi: Vec<Vec<BigUint>>,
}

impl Tables {
    fn new(q: u32, n: u32) -> Tables {
        let log2_q = q.is_power_of_two().then(|| q.trailing_zeros());
        let max_exp = (n as usize) * (n as usize);
        let powers = if log2_q.is_some() {
            Vec::new()
        } else {
            let base = BigUint::from(q);
            let mut out = Vec::with_capacity(max_exp + 1);
            out.push(BigUint::one());
            for e in 1..=max_exp {
                out.push(&out[e - 1] * &base);
            }
            out
        };
        let mut t = Tables {
            q,
            log2_q,
            powers,
            gauss: Vec::new(),
            phi: Vec::new(),
        };
        let n = n as usize;
        let mut gauss: Vec<Vec<BigUint>> = Vec::with_capacity(n + 1);
        for a in 0..=n {
            let mut row = Vec::with_capacity(a + 1);
            for b in 0..=a {
                if b == 0 || b == a {
                    row.push(BigUint::one());
                } else {
                    let v = &gauss[a - 1][b - 1] + t.mul_pow(&gauss[a - 1][b], b as u64);
                    row.push(v);
                }
            }
            gauss.push(row);
        }
        let mut phi = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let top = t.pow(m as u64);
            let mut row = Vec::with_capacity(m + 1);
            row.push(BigUint::one());
            for l in 1..=m {
                let factor = &top - t.pow(l as u64 - 1);
                let v = &row[l - 1] * factor;
                row.push(v);
            }
            phi.push(row);
        }
        t.gauss = gauss;
        t.phi = phi;
        t
    }

    fn pow(&self, e: u64) -> BigUint {
        match self.log2_q {
            Some(s) => BigUint::one() << (e * s as u64),
            None => self
                .powers
                .get(e as usize)
                .cloned()
                .unwrap_or_else(|| BigUint::from(self.q).pow(e as u32)),
        }
    }

    fn mul_pow(&self, x: &BigUint, e: u64) -> BigUint {
        match self.log2_q {
            Some(s) => x << (e * s as u64),
            None => x * self.pow(e),
        }
    }

    fn gauss(&self, a: u32, b: u32) -> BigUint {
        if b > a {
            BigUint::zero()
        } else {
            self.gauss[a as usize][b as usize].clone()
        }
    }

    fn phi(&self, l: u32, n: u32) -> BigUint {
        if l > n {
            BigUint::zero()
        } else {
            self.phi[n as usize][l as usize].clone()
        }
    }

    fn rho(&self, m: u32, i: u32, d: u32) -> BigRational {
        let k = m - i;
        let mut num = BigUint::zero();
        for j in 0..=k.min(d) {
            let mut inner = BigUint::zero();
            for t in 0..=j {
                let l = k - t;
                if l > m - d {
                    continue;
                }
                let term = &self.phi[(m - d) as usize][l as usize] * &self.gauss[j as usize][t as usize];
                inner += self.mul_pow(&term, ((k - j) * t) as u64);
            }
            if inner.is_zero() {
                continue;
            }
            let outer = (self.pow(k as u64) - self.pow(j as u64))
                * &self.phi[d as usize][j as usize]
                * &self.gauss[k as usize][j as usize];
            num += outer * inner;
        }
        let den = (self.pow(k as u64) - BigUint::one()) * &self.phi[m as usize][k as usize];
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

fn check_q(q: u32) -> Result<()> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    Ok(())
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Gaussian binomial `[k j]_q`, the number of `j`-dimensional subspaces of
/// `GF(q)^k`. Zero when `j > k`.
pub fn gaussian_binomial(k: u32, j: u32, q: u32) -> Result<BigInt> {
    check_q(q)?;
    Ok(BigInt::from(Tables::new(q, k).gauss(k, j)))
}

/// `phi(j, i, q) = prod_{l<j} (q^i - q^l)`, the number of ordered linearly
/// independent `j`-tuples in `GF(q)^i`. Zero when `j > i`.
pub fn phi_count(j: u32, i: u32, q: u32) -> Result<BigInt> {
    check_q(q)?;
    if j > i {
        return Ok(BigInt::zero());
    }
    Ok(BigInt::from(Tables::new(q, i).phi(j, i)))
}

/// `P(rank = j)` for a uniform random `k x d` matrix over `GF(q)`.
pub fn rank_dist(k: u32, d: u32, q: u32, j: u32) -> Result<BigRational> {
    check_q(q)?;
    let t = Tables::new(q, k.max(d));
    Ok(ratio(t.phi(j, d) * t.gauss(k, j), t.pow(k as u64 * d as u64)))
}

/// Joint law `P(rank(G_S) = j, rank(G) = r)` for a uniform random `k x m`
/// matrix `G` and a fixed set `S` of `d` columns.
pub fn theta(m: u32, k: u32, r: u32, j: u32, d: u32, q: u32) -> Result<BigRational> {
    check_q(q)?;
    if d > m {
        return Err(out_of_range("d", d, format!("<= m = {m}")));
    }
    if j > r || r > k {
        return Ok(BigRational::zero());
    }
    let t = Tables::new(q, k.max(m));
    let mut sum = BigUint::zero();
    for l in 0..=r {
        if r - l > j {
            continue;
        }
        let term = t.phi(l, m - d) * t.gauss(j, r - l) * t.gauss(k - j, k - r);
        sum += t.mul_pow(&term, ((r - j) * (r - l)) as u64);
    }
    let num = t.phi(j, d) * t.gauss(k, j) * sum;
    Ok(ratio(num, t.pow(k as u64 * m as u64)))
}

fn check_cell(m: u32, i: u32, d: u32) -> Result<()> {
    if m == 0 || m > MAX_M {
        return Err(out_of_range("m", m, format!("[1, {MAX_M}]")));
    }
    if i >= m {
        return Err(out_of_range("i", i, format!("[0, {m})")));
    }
    if d > m {
        return Err(out_of_range("d", d, format!("[0, {m}]")));
    }
    Ok(())
}

/// `rho(m, i, d, q)` from the closed form.
pub fn rho(m: u32, i: u32, d: u32, q: u32) -> Result<BigRational> {
    check_q(q)?;
    check_cell(m, i, d)?;
    Ok(Tables::new(q, m).rho(m, i, d))
}

/// Monte Carlo estimate of `rho(m, i, d, q)`: uniform full-rank
/// `(m - i) x m` matrices, first `d` columns, `e_1` membership test.
pub fn rho_mc(m: u32, i: u32, d: u32, q: u32, trials: u64, seed: u64) -> Result<McEstimate> {
    check_cell(m, i, d)?;
    if trials == 0 {
        return Err(out_of_range("trials", trials, ">= 1"));
    }
    let field = FieldParams::new(q)?;
    let rows = (m - i) as usize;
    let cols: Vec<usize> = (0..d as usize).collect();
    let mut e1 = vec![0u32; rows];
    e1[0] = 1;
    Ok(count_events(trials, seed, |rng| {
        let g = Matrix::sample_full_rank(&field, rows, m as usize, rng).expect("rows <= cols");
        !g.select_columns(&cols).in_colspace(&e1).expect("matching lengths")
    }))
}

/// Calls `f` on every invertible `m x m` matrix over `field`.
/// Returns the number of such matrices.
pub fn for_each_invertible<F: FnMut(&Matrix)>(m: usize, field: &Field, mut f: F) -> Result<u64> {
    let q = field.q() as u64;
    let total = (q as u128).checked_pow((m * m) as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_CAP as u128 {
        return Err(Error::CapExceeded {
            what: "matrix enumeration",
            requested: total,
            cap: ENUMERATION_CAP as u128,
        });
    }
    let mut count = 0;
    let mut data = vec![0u32; m * m];
    for idx in 0..total as u64 {
        let mut rest = idx;
        for v in data.iter_mut() {
            *v = (rest % q) as u32;
            rest /= q;
        }
        let g = Matrix::from_vec(field, m, m, data.clone())?;
        if g.is_full_rank() {
            count += 1;
            f(&g);
        }
    }
    Ok(count)
}

/// `rho(m, i, d, q)` by enumerating `GL(m, q)`.
pub fn rho_by_enumeration(m: u32, i: u32, d: u32, q: u32) -> Result<BigRational> {
    check_cell(m, i, d)?;
    let field = FieldParams::new(q)?;
    let cols: Vec<usize> = (0..d as usize).collect();
    let mut e1 = vec![0u32; (m - i) as usize];
    e1[0] = 1;
    let mut erased = 0u64;
    let total = for_each_invertible(m as usize, &field, |g| {
        let sub = g.drop_rows(i as usize).select_columns(&cols);
        if !sub.in_colspace(&e1).expect("matching lengths") {
            erased += 1;
        }
    })?;
    Ok(BigRational::new(BigInt::from(erased), BigInt::from(total)))
}

/// Every `rho(m, i, d, q)` for fixed `m` and `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoTable {
    m: u32,
    q: u32,
    rho: Vec<Vec<BigRational>>,
}

/// Outcome of the exact checks in [`RhoTable::check_identities`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    /// `sum_i rho[i][d] = m - d` for every `d`.
    pub row_sums: bool,
    /// `rho[i][d] = 1 - rho[m-i-1][m-d]`.
    pub duality: bool,
    pub in_unit_interval: bool,
    pub nonincreasing_in_d: bool,
    /// Later symbols see fewer unknowns, so `rho` falls with `i`.
    pub nonincreasing_in_i: bool,
}

impl IdentityReport {
    pub fn all(&self) -> bool {
        self.row_sums && self.duality && self.in_unit_interval && self.nonincreasing_in_d && self.nonincreasing_in_i
    }
}

impl RhoTable {
    /// Evaluates the closed form for every cell, in parallel.
    pub fn build(m: u32, q: u32) -> Result<RhoTable> {
        check_q(q)?;
        check_cell(m, 0, 0)?;
        let tables = Tables::new(q, m);
        let cells: Vec<(u32, u32)> = (0..m).flat_map(|i| (0..=m).map(move |d| (i, d))).collect();
        let values: Vec<BigRational> = cells.par_iter().map(|&(i, d)| tables.rho(m, i, d)).collect();
        let rho = values.chunks(m as usize + 1).map(|c| c.to_vec()).collect();
        Ok(RhoTable { m, q, rho })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn get(&self, i: u32, d: u32) -> &BigRational {
        &self.rho[i as usize][d as usize]
    }

    /// `get(i, d)` rounded to `f64`.
    pub fn value(&self, i: u32, d: u32) -> f64 {
        self.get(i, d).to_f64().expect("rho lies in [0, 1]")
    }

    pub fn check_identities(&self) -> IdentityReport {
        let (m, rho) = (self.m as usize, &self.rho);
        let one = BigRational::one();
        let zero = BigRational::zero();
        let row_sums = (0..=m).all(|d| {
            let s: BigRational = (0..m).map(|i| &rho[i][d]).sum();
            s == BigRational::from_integer(BigInt::from(m - d))
        });
        let duality = (0..m).all(|i| (0..=m).all(|d| rho[i][d] == &one - &rho[m - i - 1][m - d]));
        let in_unit_interval = rho.iter().flatten().all(|r| *r >= zero && *r <= one);
        let nonincreasing_in_d = rho.iter().all(|row| row.windows(2).all(|w| w[0] >= w[1]));
        let nonincreasing_in_i = (1..m).all(|i| (0..=m).all(|d| rho[i - 1][d] >= rho[i][d]));
        IdentityReport {
            row_sums,
            duality,
            in_unit_interval,
            nonincreasing_in_d,
            nonincreasing_in_i,
        }
    }

    /// Cache format: `m q` on the first line, then `i d num/den` per cell.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.m, self.q)?;
        for (i, row) in self.rho.iter().enumerate() {
            for (d, r) in row.iter().enumerate() {
                writeln!(w, "{i} {d} {}/{}", r.numer(), r.denom())?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<RhoTable> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [m, q] = fields[..] else {
            return Err(parse_err(1, format!("expected `m q`, got `{header}`")));
        };
        let m: u32 = m.parse().map_err(|e| parse_err(1, format!("m: {e}")))?;
        let q: u32 = q.parse().map_err(|e| parse_err(1, format!("q: {e}")))?;
        check_q(q)?;
        check_cell(m, 0, 0)?;
        let mut rho = vec![vec![None; m as usize + 1]; m as usize];
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [i, d, value] = parts[..] else {
                return Err(parse_err(lineno, format!("expected `i d num/den`, got `{line}`")));
            };
            let i: usize = i.parse().map_err(|e| parse_err(lineno, format!("i: {e}")))?;
            let d: usize = d.parse().map_err(|e| parse_err(lineno, format!("d: {e}")))?;
            let (num, den) = value
                .split_once('/')
                .ok_or_else(|| parse_err(lineno, format!("expected num/den, got `{value}`")))?;
            let num: BigInt = num.parse().map_err(|e| parse_err(lineno, format!("numerator: {e}")))?;
            let den: BigInt = den
                .parse()
                .map_err(|e| parse_err(lineno, format!("denominator: {e}")))?;
            if den <= BigInt::zero() {
                return Err(parse_err(lineno, "denominator must be positive".into()));
            }
            let cell = rho
                .get_mut(i)
                .and_then(|row| row.get_mut(d))
                .ok_or_else(|| parse_err(lineno, format!("cell ({i}, {d}) outside the table")))?;
            *cell = Some(BigRational::new(num, den));
        }
        let rho = rho
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(d, v)| v.ok_or_else(|| parse_err(0, format!("missing cell ({i}, {d})"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RhoTable { m, q, rho })
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RhoTable> {
        RhoTable::read(BufReader::new(File::open(path)?))
    }

    /// Path of the cache file for `(m, q)` inside `dir`.
    pub fn cache_path(dir: &Path, m: u32, q: u32) -> PathBuf {
        dir.join(format!("rho_m{m}_q{q}.txt"))
    }

    /// Loads the cached table for `(m, q)` from `dir`, building and storing
    /// it first if absent.
    pub fn load_or_build(dir: &Path, m: u32, q: u32) -> Result<RhoTable> {
        let path = RhoTable::cache_path(dir, m, q);
        if path.exists() {
            let table = RhoTable::load(&path)?;
            if table.m == m && table.q == q {
                return Ok(table);
            }
        }
        let table = RhoTable::build(m, q)?;
        std::fs::create_dir_all(dir)?;
        table.store(&path)?;
        Ok(table)
    }
}

/// The averaged erasure polynomials `phibar_i` of one ensemble.
#[derive(Debug, Clone)]
pub struct AvgProfile {
    m: u32,
    q: u32,
    transform: Arc<ErasureTransform>,
}

impl AvgProfile {
    pub fn new(table: &RhoTable) -> AvgProfile {
        let to_f64 = |r: &BigRational| r.to_f64().expect("rho lies in [0, 1]");
        let one = BigRational::one();
        let erased = table.rho.iter().map(|row| row.iter().map(to_f64).collect()).collect();
        let kept = table
            .rho
            .iter()
            .map(|row| row.iter().map(|r| to_f64(&(&one - r))).collect())
            .collect();
        let symmetric = table.check_identities().duality;
        AvgProfile {
            m: table.m,
            q: table.q,
            transform: Arc::new(ErasureTransform::new(erased, kept, symmetric)),
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn phi_bar(&self, i: u32, x: ErasureProb) -> ErasureProb {
        self.transform.child(i as usize, x)
    }

    pub fn phi_bar_all(&self, x: ErasureProb) -> Vec<ErasureProb> {
        self.transform.children(x)
    }

    pub fn operator(&self) -> OperatorSpec {
        OperatorSpec::EnsembleAvg {
            m: self.m as usize,
            q: self.q,
            transform: Arc::clone(&self.transform),
        }
    }
}

/// `lambda_m = sup_x gbar_1(x) / g_0(x)` for `g_0 = (x(1-x))^beta`.
pub fn lambda_m(avg: &AvgProfile, beta: f64, grid_points: usize, refine_tol: f64) -> Result<LambdaReport> {
    lyapunov::lambda_sup(&avg.operator(), &LyapunovFn::power(beta)?, grid_points, refine_tol)
}

/// `gbar_1, ..., gbar_n` on `grid_points` uniform points of `[0, 1]`, where
/// `gbar_0 = (x(1-x))^beta` and
/// `gbar_{k+1}(x) = (1/m) sum_i gbar_k(phibar_i(x))` with `gbar_k`
/// interpolated linearly between grid points (`gbar_0` is exact).
pub fn gbar_sequence(avg: &AvgProfile, beta: f64, n: u32, grid_points: usize) -> Result<Vec<GridFn>> {
    if n > MAX_GBAR_DEPTH {
        return Err(out_of_range("depth", n, format!("<= {MAX_GBAR_DEPTH}")));
    }
    if grid_points < 3 {
        return Err(out_of_range("grid_points", grid_points, ">= 3"));
    }
    let mut prev = LyapunovFn::power(beta)?;
    let xs = uniform_grid(0.0, 1.0, grid_points);
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let ys: Vec<f64> = xs
            .par_iter()
            .map(|&x| {
                let kids = avg.phi_bar_all(ErasureProb::clamped(x));
                kahan_sum(kids.iter().map(|&c| prev.eval(c))) / kids.len() as f64
            })
            .collect();
        let g = GridFn::new(xs.clone(), ys)?;
        prev = LyapunovFn::Grid(g.clone());
        out.push(g);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelConcavity {
    pub level: u32,
    /// Largest `g(x_{k-1}) - 2 g(x_k) + g(x_{k+1})` on the grid.
    pub max_second_difference: f64,
    pub at_x: f64,
    pub interpolation_error: f64,
    pub concave: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conjecture1Report {
    pub m: u32,
    pub q: u32,
    pub beta: f64,
    pub grid_points: usize,
    pub levels: Vec<LevelConcavity>,
    pub concave: bool,
}

/// Checks that `gbar_1, ..., gbar_n` are concave on the grid.
pub fn check_conjecture1(avg: &AvgProfile, beta: f64, n: u32, grid_points: usize) -> Result<Conjecture1Report> {
    let seq = gbar_sequence(avg, beta, n, grid_points)?;
    let levels: Vec<LevelConcavity> = seq
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let (xs, ys) = (g.xs(), g.ys());
            let (max_second_difference, at_x) = (1..ys.len() - 1)
                .map(|t| (ys[t - 1] - 2.0 * ys[t] + ys[t + 1], xs[t]))
                .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
            LevelConcavity {
                level: k as u32 + 1,
                max_second_difference,
                at_x,
                interpolation_error: g.interpolation_error(),
                concave: max_second_difference <= CONCAVITY_TOLERANCE,
            }
        })
        .collect();
    Ok(Conjecture1Report {
        m: avg.m,
        q: avg.q,
        beta,
        grid_points,
        concave: levels.iter().all(|l| l.concave),
        levels,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaPoint {
    pub m: u32,
    pub lambda: f64,
    pub ln_m: f64,
    pub ln_lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conjecture2Report {
    pub q: u32,
    pub beta: f64,
    pub points: Vec<LambdaPoint>,
    /// Least-squares slope of `ln lambda_m` against `ln m`.
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `ln lambda_m = slope ln m + intercept` over the given ensembles.
pub fn check_conjecture2(
    avgs: &[AvgProfile],
    beta: f64,
    grid_points: usize,
    refine_tol: f64,
) -> Result<Conjecture2Report> {
    if avgs.len() < 2 {
        return Err(out_of_range("m-list length", avgs.len(), ">= 2"));
    }
    let q = avgs[0].q;
    if avgs.iter().any(|a| a.q != q) {
        return Err(Error::DimensionMismatch("all ensembles must share q".into()));
    }
    let mut points = Vec::with_capacity(avgs.len());
    for avg in avgs {
        let lambda = lambda_m(avg, beta, grid_points, refine_tol)?.lambda;
        points.push(LambdaPoint {
            m: avg.m,
            lambda,
            ln_m: (avg.m as f64).ln(),
            ln_lambda: lambda.ln(),
            residual: 0.0,
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.ln_m).sum::<f64>() / n;
    let my = points.iter().map(|p| p.ln_lambda).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.ln_m - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.ln_m - mx) * (p.ln_lambda - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DimensionMismatch("m-list needs two distinct m".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    for p in &mut points {
        p.residual = p.ln_lambda - (slope * p.ln_m + intercept);
    }
    Ok(Conjecture2Report {
        q,
        beta,
        points,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn int(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn gaussian_binomial_examples() {
        assert_eq!(gaussian_binomial(5, 0, 3).unwrap(), int(1));
        assert_eq!(gaussian_binomial(5, 5, 3).unwrap(), int(1));
        assert_eq!(gaussian_binomial(2, 1, 2).unwrap(), int(3));
        assert_eq!(gaussian_binomial(4, 2, 2).unwrap(), int(35));
        assert_eq!(gaussian_binomial(2, 3, 2).unwrap(), int(0));
        // Product formula.
        for q in [2u32, 3, 4, 5] {
            for k in 0..8u32 {
                for j in 0..=k {
                    let mut num = BigInt::one();
                    let mut den = BigInt::one();
                    for l in 0..j {
                        num *= BigInt::from(q).pow(k) - BigInt::from(q).pow(l);
                        den *= BigInt::from(q).pow(j) - BigInt::from(q).pow(l);
                    }
                    assert_eq!(gaussian_binomial(k, j, q).unwrap(), num / den);
                }
            }
        }
    }

    #[test]
    fn phi_count_examples() {
        assert_eq!(phi_count(0, 3, 2).unwrap(), int(1));
        assert_eq!(phi_count(2, 2, 2).unwrap(), int(6));
        assert_eq!(phi_count(3, 2, 2).unwrap(), int(0));
        let field = FieldParams::new(2).unwrap();
        assert_eq!(for_each_invertible(3, &field, |_| {}).unwrap(), 168);
        assert_eq!(phi_count(3, 3, 2).unwrap(), int(168));
    }

    #[test]
    fn rank_distribution() {
        assert_eq!(rank_dist(3, 0, 2, 0).unwrap(), r(1, 1));
        assert_eq!(rank_dist(1, 1, 2, 0).unwrap(), r(1, 2));
        assert_eq!(rank_dist(1, 1, 2, 1).unwrap(), r(1, 2));
        assert_eq!(rank_dist(2, 2, 2, 2).unwrap(), r(6, 16));
        for q in [2u32, 3, 4, 5] {
            for k in 0..=16u32 {
                for d in 0..=16u32 {
                    let total: BigRational = (0..=k.min(d)).map(|j| rank_dist(k, d, q, j).unwrap()).sum();
                    assert_eq!(total, BigRational::one(), "k={k} d={d} q={q}");
                }
            }
        }
    }

    // Joint rank law by enumerating every k x m matrix.
    fn theta_enumerated(m: usize, k: usize, r_: usize, j: usize, d: usize, q: u32) -> BigRational {
        let field = FieldParams::new(q).unwrap();
        let total = (q as u64).pow((k * m) as u32);
        let cols: Vec<usize> = (0..d).collect();
        let mut hits = 0u64;
        for idx in 0..total {
            let mut rest = idx;
            let data: Vec<u32> = (0..k * m)
                .map(|_| {
                    let v = (rest % q as u64) as u32;
                    rest /= q as u64;
                    v
                })
                .collect();
            let g = Matrix::from_vec(&field, k, m, data).unwrap();
            if g.rank() == r_ && g.select_columns(&cols).rank() == j {
                hits += 1;
            }
        }
        BigRational::new(BigInt::from(hits), BigInt::from(total))
    }

    #[test]
    fn theta_matches_enumeration() {
        assert_eq!(theta(2, 1, 1, 1, 1, 2).unwrap(), r(1, 2));
        for (m, q) in [(2usize, 2u32), (3, 2), (2, 3), (4, 2)] {
            for k in 1..=m.min(3) {
                for d in 0..=m {
                    for rr in 0..=k {
                        for j in 0..=rr {
                            let exact = theta(m as u32, k as u32, rr as u32, j as u32, d as u32, q).unwrap();
                            assert_eq!(
                                exact,
                                theta_enumerated(m, k, rr, j, d, q),
                                "m={m} k={k} r={rr} j={j} d={d} q={q}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn theta_marginals() {
        for q in [2u32, 3] {
            for m in 1..=6u32 {
                for k in 1..=m {
                    for d in 0..=m {
                        for rr in 0..=k {
                            let s: BigRational = (0..=rr).map(|j| theta(m, k, rr, j, d, q).unwrap()).sum();
                            assert_eq!(s, rank_dist(k, m, q, rr).unwrap());
                        }
                        // S = all columns: rank(G_S) = rank(G).
                        if d == m {
                            for rr in 0..=k {
                                for j in 0..rr {
                                    assert!(theta(m, k, rr, j, d, q).unwrap().is_zero());
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(2, 0, 1, 2).unwrap(), r(2, 3));
        assert_eq!(rho(2, 1, 1, 2).unwrap(), r(1, 3));
        for m in 1..=8 {
            for i in 0..m {
                assert!(rho(m, i, m, 3).unwrap().is_zero());
                assert!(rho(m, i, 0, 3).unwrap().is_one());
            }
        }
        assert!(rho(3, 3, 0, 2).is_err());
        assert!(rho(3, 0, 4, 2).is_err());
    }

    #[test]
    fn rho_matches_enumeration() {
        for (m, q) in [(1u32, 2u32), (2, 2), (3, 2), (1, 3), (2, 3)] {
            let table = RhoTable::build(m, q).unwrap();
            for i in 0..m {
                for d in 0..=m {
                    assert_eq!(
                        table.get(i, d),
                        &rho_by_enumeration(m, i, d, q).unwrap(),
                        "m={m} i={i} d={d} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn tables_satisfy_identities() {
        for q in [2u32, 3, 4] {
            for m in 1..=10 {
                let report = RhoTable::build(m, q).unwrap().check_identities();
                assert!(report.all(), "m={m} q={q}: {report:?}");
            }
        }
    }

    #[test]
    fn rho_mc_examples() {
        let est = rho_mc(2, 0, 1, 2, 100_000, 11).unwrap();
        assert!((est.mean - 2.0 / 3.0).abs() <= 0.005, "{}", est.mean);
        let full = rho_mc(4, 1, 4, 3, 1000, 11).unwrap();
        assert_eq!(full.hits, 0);
        let exact = rho(4, 1, 2, 3).unwrap().to_f64().unwrap();
        let est = rho_mc(4, 1, 2, 3, 20_000, 5).unwrap();
        assert!(est.within(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn cache_round_trip() {
        let table = RhoTable::build(7, 3).unwrap();
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("7 3\n"));
        let back = RhoTable::read(&buf[..]).unwrap();
        assert_eq!(back, table);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, buf);

        let dir = tempfile::tempdir().unwrap();
        let built = RhoTable::load_or_build(dir.path(), 4, 2).unwrap();
        assert!(RhoTable::cache_path(dir.path(), 4, 2).exists());
        assert_eq!(RhoTable::load_or_build(dir.path(), 4, 2).unwrap(), built);
    }

    #[test]
    fn cache_parse_errors() {
        assert!(RhoTable::read(&b""[..]).is_err());
        assert!(RhoTable::read(&b"2 2\n0 0 1/1\n"[..]).is_err());
        assert!(RhoTable::read(&b"1 2\n0 0 1/0\n0 1 0/1\n"[..]).is_err());
        assert!(RhoTable::read(&b"1 2\n0 0 1/1\n0 1 0/1\n"[..]).is_ok());
        assert!(RhoTable::read(&b"1 2\n0 5 1/1\n"[..]).is_err());
    }

    #[test]
    fn phi_bar_examples() {
        let avg = AvgProfile::new(&RhoTable::build(8, 2).unwrap());
        assert_eq!(avg.phi_bar(3, ErasureProb::ZERO).value(), 0.0);
        assert_eq!(avg.phi_bar(3, ErasureProb::ONE).value(), 1.0);
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let kids = avg.phi_bar_all(ErasureProb::clamped(x));
            let mean = kahan_sum(kids.iter().map(|c| c.value())) / 8.0;
            assert!((mean - x).abs() < 1e-12);
            let mirrored = avg.phi_bar_all(ErasureProb::clamped(1.0 - x));
            for i in 0..8 {
                assert!((kids[i].complement() - mirrored[7 - i].value()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn m2_average_is_gl_average() {
        // GL(2, 2) has two polarizing kernels and four that split into
        // identity channels, so phibar_0 = (2(2x - x^2) + 4x) / 6.
        let avg = AvgProfile::new(&RhoTable::build(2, 2).unwrap());
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let p0 = avg.phi_bar(0, ErasureProb::clamped(x)).value();
            let p1 = avg.phi_bar(1, ErasureProb::clamped(x)).value();
            assert!((p0 - (4.0 * x - x * x) / 3.0).abs() < 1e-15);
            assert!((p1 - (2.0 * x + x * x) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gbar_absorbing_and_concave() {
        let avg = AvgProfile::new(&RhoTable::build(8, 2).unwrap());
        let seq = gbar_sequence(&avg, 0.35, 3, 1001).unwrap();
        for g in &seq {
            assert_eq!(g.ys()[0], 0.0);
            assert_eq!(*g.ys().last().unwrap(), 0.0);
        }
        let report = check_conjecture1(&avg, 0.35, 2, 1001).unwrap();
        assert_eq!(report.levels.len(), 2);
        assert!(report.concave, "{report:?}");
        assert!(gbar_sequence(&avg, 0.35, MAX_GBAR_DEPTH + 1, 101).is_err());
    }

    #[test]
    fn conjecture2_regression() {
        let avgs: Vec<AvgProfile> = [4u32, 8, 16]
            .iter()
            .map(|&m| AvgProfile::new(&RhoTable::build(m, 2).unwrap()))
            .collect();
        let report = check_conjecture2(&avgs, 0.35, 2000, 1e-8).unwrap();
        assert_eq!(report.points.len(), 3);
        assert!(report.slope < 0.0);
        let resid: f64 = report.points.iter().map(|p| p.residual).sum();
        assert!(resid.abs() < 1e-12);
        assert!(check_conjecture2(&avgs[..1], 0.35, 2000, 1e-8).is_err());
    }
}

//! Density evolution for the Reed–Solomon `q`-ary polar codes on the `q`-ary
//! erasure channel.
//!
//! One polarization step splits a channel with erasure probability `x` into
//! `q` channels whose erasure probabilities are the binomial upper tails
//!
//! ```text
//! psi_i(x) = P(Bin(q, x) >= i + 1) = sum_{j=i+1}^{q} C(q, j) x^j (1 - x)^(q - j)
//! ```
//!
//! for `i = 0, ..., q - 1`. Channel `i = 0` is the worst (`psi_0(x) >= x`) and
//! `i = q - 1` the best. Applying the split `n` times yields the `N = q^n`
//! effective channels; channel `(i_1, ..., i_n)` has index
//! `sum_k i_k q^(n - k)` (the first stage is the most significant digit).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{out_of_range, Error, Result};
use crate::lyapunov;
use crate::numeric::{block_rng, blocks, fmt_real, KahanSum};

/// An erasure probability stored together with its complement.
///
/// Both halves are kept because the small one of `x` and `1 - x` has to be
/// known to full relative precision: Lyapunov functions such as
/// `(x(1-x))^(1/12)` are sensitive to `1 - x` when `x` is within `1e-17`
/// of one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErasureProb {
    value: f64,
    complement: f64,
}

impl ErasureProb {
    pub const ZERO: ErasureProb = ErasureProb {
        value: 0.0,
        complement: 1.0,
    };
    pub const ONE: ErasureProb = ErasureProb {
        value: 1.0,
        complement: 0.0,
    };

    /// `x` must lie in `[0, 1]`.
    pub fn new(x: f64) -> Result<ErasureProb> {
        if !(0.0..=1.0).contains(&x) {
            return Err(out_of_range("erasure probability", x, "[0, 1]"));
        }
        Ok(ErasureProb {
            value: x,
            complement: 1.0 - x,
        })
    }

    /// Clamps into `[0, 1]`; for internal grids that are known to be valid.
    pub fn clamped(x: f64) -> ErasureProb {
        let x = x.clamp(0.0, 1.0);
        ErasureProb {
            value: x,
            complement: 1.0 - x,
        }
    }

    /// Builds from a pair `(x, 1 - x)` computed independently.
    pub fn from_parts(value: f64, complement: f64) -> ErasureProb {
        ErasureProb {
            value: value.clamp(0.0, 1.0),
            complement: complement.clamp(0.0, 1.0),
        }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn complement(self) -> f64 {
        self.complement
    }

    /// `x (1 - x)` with both factors at full precision.
    pub fn variance_term(self) -> f64 {
        self.value * self.complement
    }

    /// The mirrored probability `1 - x`.
    pub fn flip(self) -> ErasureProb {
        ErasureProb {
            value: self.complement,
            complement: self.value,
        }
    }
}

/// Probability mass function of `Bin(n, x)`.
///
/// Terms are generated by the ratio recurrence outward from the mode and then
/// normalized, so no binomial coefficient is ever formed and nothing
/// overflows. The relative error of term `j` grows like `|j - mode|` ulps.
pub fn binomial_pmf(n: usize, x: ErasureProb) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if x.value == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if x.complement == 0.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let odds = x.value / x.complement;
    let mode = (((n + 1) as f64) * x.value).floor().min(n as f64) as usize;
    pmf[mode] = 1.0;
    for j in mode..n {
        let next = pmf[j] * ((n - j) as f64 / (j + 1) as f64) * odds;
        if next == 0.0 {
            break;
        }
        pmf[j + 1] = next;
    }
    for j in (1..=mode).rev() {
        let prev = pmf[j] * (j as f64 / (n - j + 1) as f64) / odds;
        if prev == 0.0 {
            break;
        }
        pmf[j - 1] = prev;
    }
    let total = crate::numeric::kahan_sum(pmf.iter().copied());
    for v in pmf.iter_mut() {
        *v /= total;
    }
    pmf
}

/// Upper and lower tails of `pmf`: entry `i` is
/// `(sum_{j > i} pmf_j, sum_{j <= i} pmf_j)` for `i` in `0..pmf.len() - 1`.
///
/// Each tail is summed from its far end inward, so small tails are accurate
/// to a few ulps relative.
pub(crate) fn split_tails(pmf: &[f64]) -> Vec<ErasureProb> {
    let n = pmf.len() - 1;
    let mut upper = vec![0.0; n];
    let mut acc = KahanSum::new();
    for i in (0..n).rev() {
        acc.add(pmf[i + 1]);
        upper[i] = acc.value();
    }
    let mut acc = KahanSum::new();
    let mut out = Vec::with_capacity(n);
    for (i, &u) in upper.iter().enumerate() {
        acc.add(pmf[i]);
        out.push(ErasureProb::from_parts(u, acc.value()));
    }
    out
}

/// All `q` children `psi_0(x), ..., psi_{q-1}(x)` of a channel.
pub fn psi_all(q: usize, x: ErasureProb) -> Vec<ErasureProb> {
    split_tails(&binomial_pmf(q, x))
}

/// `psi_i(x) = P(Bin(q, x) >= i + 1)`.
pub fn psi(q: usize, i: usize, x: f64) -> Result<f64> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    if i >= q {
        return Err(out_of_range("channel index i", i, format!("[0, {})", q)));
    }
    let x = ErasureProb::new(x)?;
    Ok(psi_all(q, x)[i].value())
}

/// `(1/q) sum_i psi_i(x)`, which equals `x` because one polarization step
/// preserves the average erasure rate.
pub fn psi_mean_check(q: usize, x: f64) -> Result<f64> {
    let x = ErasureProb::new(x)?;
    let sum = crate::numeric::kahan_sum(psi_all(q, x).iter().map(|c| c.value()));
    Ok(sum / q as f64)
}

/// Limits on the number of effective channels.
#[derive(Debug, Clone, Copy)]
pub struct ProfileCaps {
    pub materialized: u128,
    pub streaming: u128,
}

impl Default for ProfileCaps {
    fn default() -> Self {
        ProfileCaps {
            materialized: 10_000_000,
            streaming: 100_000_000,
        }
    }
}

fn channel_count(q: usize, n: u32) -> u128 {
    (q as u128).checked_pow(n).unwrap_or(u128::MAX)
}

/// The erasure rates of all `q^n` effective channels, in index order.
#[derive(Debug, Clone)]
pub struct ChannelProfile {
    q: usize,
    n: u32,
    eps: f64,
    rates: Vec<ErasureProb>,
}

/// Builds the full profile with the default caps.
pub fn profile(q: usize, n: u32, eps: f64) -> Result<ChannelProfile> {
    profile_with_caps(q, n, eps, ProfileCaps::default())
}

pub fn profile_with_caps(q: usize, n: u32, eps: f64, caps: ProfileCaps) -> Result<ChannelProfile> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    let count = channel_count(q, n);
    if count > caps.materialized {
        return Err(Error::CapExceeded {
            what: "materialized channel profile",
            requested: count,
            cap: caps.materialized,
        });
    }
    let root = ErasureProb::new(eps)?;
    let mut level = vec![root];
    for _ in 0..n {
        level = level.par_iter().flat_map_iter(|&x| psi_all(q, x)).collect();
    }
    Ok(ChannelProfile {
        q,
        n,
        eps,
        rates: level,
    })
}

impl ChannelProfile {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn stages(&self) -> u32 {
        self.n
    }

    pub fn initial_eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.rates.iter().map(|r| r.value())
    }

    pub fn entries(&self) -> &[ErasureProb] {
        &self.rates
    }

    pub fn mean(&self) -> f64 {
        crate::numeric::kahan_sum(self.rates()) / self.len() as f64
    }

    /// Fraction of channels with `lo <= rate <= hi`.
    pub fn fraction_in(&self, lo: f64, hi: f64) -> f64 {
        let hits = self.rates().filter(|&r| lo <= r && r <= hi).count();
        hits as f64 / self.len() as f64
    }

    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        histogram(self.rates(), bins)
    }

    /// CSV with header `index,rate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,rate")?;
        for (i, r) in self.rates().enumerate() {
            writeln!(w, "{i},{}", fmt_real(r))?;
        }
        Ok(())
    }
}

/// Depth-first generator of the profile in index order, for profiles too
/// large to hold in memory.
pub struct ProfileStream {
    q: usize,
    n: u32,
    root: Option<ErasureProb>,
    stack: Vec<(Vec<ErasureProb>, usize)>,
}

pub fn profile_stream(q: usize, n: u32, eps: f64, caps: ProfileCaps) -> Result<ProfileStream> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    let count = channel_count(q, n);
    if count > caps.streaming {
        return Err(Error::CapExceeded {
            what: "streamed channel profile",
            requested: count,
            cap: caps.streaming,
        });
    }
    let root = ErasureProb::new(eps)?;
    let stack = if n == 0 {
        Vec::new()
    } else {
        vec![(psi_all(q, root), 0)]
    };
    Ok(ProfileStream {
        q,
        n,
        root: (n == 0).then_some(root),
        stack,
    })
}

impl Iterator for ProfileStream {
    type Item = (u64, ErasureProb);

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(root) = self.root.take() {
            return Some((0, root));
        }
        loop {
            let depth = self.stack.len();
            let (children, pos) = self.stack.last_mut()?;
            if *pos == self.q {
                self.stack.pop();
                continue;
            }
            let child = children[*pos];
            *pos += 1;
            if depth == self.n as usize {
                let index = self
                    .stack
                    .iter()
                    .fold(0u64, |acc, (_, p)| acc * self.q as u64 + (*p as u64 - 1));
                return Some((index, child));
            }
            self.stack.push((psi_all(self.q, child), 0));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Equal-width histogram of rates on `[0, 1]`; the last bin is closed.
pub fn histogram<I: IntoIterator<Item = f64>>(rates: I, bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let mut counts = vec![0u64; bins];
    for r in rates {
        let k = ((r * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: k as f64 / bins as f64,
            hi: (k + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

/// CSV with header `bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(mut w: W, bins: &[HistogramBin]) -> std::io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    for b in bins {
        writeln!(w, "{},{},{}", fmt_real(b.lo), fmt_real(b.hi), b.count)?;
    }
    Ok(())
}

/// The information set of a polar code: channel indices in increasing order
/// of erasure rate (ties by index), and the union bound on block erasure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub indices: Vec<u64>,
    pub union_bound: f64,
}

/// Chooses the `k` channels with the smallest erasure rates.
pub fn select_channels(p: &ChannelProfile, k: usize) -> Result<Selection> {
    if k > p.len() {
        return Err(out_of_range("k", k, format!("[0, {}]", p.len())));
    }
    let mut order: Vec<u64> = (0..p.len() as u64).collect();
    order.sort_by(|&a, &b| {
        p.rates[a as usize]
            .value
            .total_cmp(&p.rates[b as usize].value)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    let union_bound = crate::numeric::kahan_sum(order.iter().map(|&i| p.rates[i as usize].value));
    Ok(Selection {
        indices: order,
        union_bound,
    })
}

#[derive(PartialEq)]
struct Ranked(f64, u64);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Streaming variant of [`select_channels`] using a bounded max-heap.
pub fn select_channels_streaming<I>(channels: I, k: usize) -> Selection
where
    I: IntoIterator<Item = (u64, ErasureProb)>,
{
    let mut heap = BinaryHeap::with_capacity(k + 1);
    if k > 0 {
        for (idx, r) in channels {
            let item = Ranked(r.value, idx);
            if heap.len() < k {
                heap.push(item);
            } else if item < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(item);
            }
        }
    }
    let sorted = heap.into_sorted_vec();
    let union_bound = crate::numeric::kahan_sum(sorted.iter().map(|r| r.0));
    Selection {
        indices: sorted.into_iter().map(|r| r.1).collect(),
        union_bound,
    }
}

/// Parameters of a finite-length scaling statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingQuery {
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub eta: f64,
}

impl ScalingQuery {
    pub fn new(gamma: f64, delta: f64, beta: f64, eta: f64) -> Result<ScalingQuery> {
        if !(gamma > 0.0) {
            return Err(out_of_range("gamma", gamma, "> 0"));
        }
        if !(delta > 0.0) {
            return Err(out_of_range("delta", delta, "> 0"));
        }
        if !(beta > 0.0 && beta <= 0.5) {
            return Err(out_of_range("beta", beta, "(0, 1/2]"));
        }
        if !(eta > 0.0 && eta < 0.5) {
            return Err(out_of_range("eta", eta, "(0, 1/2)"));
        }
        Ok(ScalingQuery {
            gamma,
            delta,
            beta,
            eta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapMetrics {
    /// Fraction of channels with erasure rate at most `N^-gamma`.
    pub good_fraction: f64,
    /// `(1 - eps) - good_fraction`.
    pub gap: f64,
    /// Upper bound on `gap` from the Lyapunov tail bound: the two-sided
    /// bound on `P(X_n >= N^-gamma)` minus `eps`. `None` when
    /// `N^-gamma > 3/4`.
    pub bound: Option<f64>,
}

pub fn gap_metrics(p: &ChannelProfile, query: &ScalingQuery, eps: f64) -> GapMetrics {
    let threshold = (p.len() as f64).powf(-query.gamma);
    let good = p.rates().filter(|&r| r <= threshold).count();
    let good_fraction = good as f64 / p.len() as f64;
    let bound = lyapunov::theorem1_bound(p.q, p.n, query.gamma, query.beta)
        .ok()
        .map(|b| b.tail_bound(eps) - eps);
    GapMetrics {
        good_fraction,
        gap: (1.0 - eps) - good_fraction,
        bound,
    }
}

/// One path of the polarization Markov chain: `n` uniformly chosen splits
/// starting from `x0`.
pub fn sample_chain<R: Rng + ?Sized>(q: usize, n: u32, x0: ErasureProb, rng: &mut R) -> ErasureProb {
    let mut x = x0;
    for _ in 0..n {
        let i = rng.gen_range(0..q);
        x = psi_all(q, x)[i];
    }
    x
}

/// Monte Carlo summary of [`sample_chain`] over many seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainEstimate {
    pub trials: u64,
    /// Trials ending in `[eta, 1 - eta]`.
    pub unpolarized: u64,
    pub unpolarized_fraction: f64,
    pub unpolarized_std_err: f64,
    pub mean: f64,
    pub mean_std_err: f64,
}

pub fn mc_chain(q: usize, n: u32, x0: f64, trials: u64, eta: f64, seed: u64) -> Result<ChainEstimate> {
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    if trials == 0 {
        return Err(out_of_range("trials", trials, ">= 1"));
    }
    let x0 = ErasureProb::new(x0)?;
    let per_block: Vec<(u64, f64, f64)> = blocks(trials)
        .into_par_iter()
        .map(|(block, count)| {
            let mut rng = block_rng(seed, block);
            let mut hits = 0u64;
            let mut sum = KahanSum::new();
            let mut sum_sq = KahanSum::new();
            for _ in 0..count {
                let x = sample_chain(q, n, x0, &mut rng).value();
                if eta <= x && x <= 1.0 - eta {
                    hits += 1;
                }
                sum.add(x);
                sum_sq.add(x * x);
            }
            (hits, sum.value(), sum_sq.value())
        })
        .collect();
    let mut hits = 0;
    let mut sum = KahanSum::new();
    let mut sum_sq = KahanSum::new();
    for (h, s, s2) in per_block {
        hits += h;
        sum.add(s);
        sum_sq.add(s2);
    }
    let t = trials as f64;
    let frac = hits as f64 / t;
    let mean = sum.value() / t;
    let var = (sum_sq.value() / t - mean * mean).max(0.0);
    Ok(ChainEstimate {
        trials,
        unpolarized: hits,
        unpolarized_fraction: frac,
        unpolarized_std_err: (frac * (1.0 - frac) / t).sqrt(),
        mean,
        mean_std_err: (var / t).sqrt(),
    })
}

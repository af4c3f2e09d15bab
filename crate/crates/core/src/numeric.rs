//! Small numeric utilities shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Random stream `block` derived from `seed`.
///
/// Every stochastic computation splits its trials into fixed-size blocks and
/// draws block `b` from ChaCha8 seeded with `seed` on stream `b`. The block
/// layout never depends on the number of worker threads, so results are
/// bit-identical for any thread count.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Trials per random stream block.
pub const BLOCK_TRIALS: u64 = 4096;

/// Splits `trials` into `(block index, trials in block)` pairs.
pub fn blocks(trials: u64) -> Vec<(u64, u64)> {
    let full = trials / BLOCK_TRIALS;
    let rest = trials % BLOCK_TRIALS;
    let mut out: Vec<(u64, u64)> = (0..full).map(|b| (b, BLOCK_TRIALS)).collect();
    if rest > 0 {
        out.push((full, rest));
    }
    out
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub hits: u64,
    pub mean: f64,
    /// Binomial standard error `sqrt(p(1-p)/trials)` at the estimate.
    pub std_err: f64,
}

impl McEstimate {
    pub fn from_hits(hits: u64, trials: u64) -> McEstimate {
        let t = trials as f64;
        let mean = hits as f64 / t;
        McEstimate {
            trials,
            hits,
            mean,
            std_err: (mean * (1.0 - mean) / t).sqrt(),
        }
    }

    /// Whether `|mean - target| <= k * std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Counts the trials for which `event` returns true, drawing block `b` of
/// the trials from [`block_rng`]`(seed, b)`.
pub fn count_events<F>(trials: u64, seed: u64, event: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let hits: u64 = blocks(trials)
        .into_par_iter()
        .map(|(block, count)| {
            let mut rng = block_rng(seed, block);
            (0..count).filter(|_| event(&mut rng)).count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    McEstimate::from_hits(hits, trials)
}

/// Formats a real with 12 significant digits, `.` as decimal separator.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping when
/// the bracket is narrower than `tol`. Returns `(argmax, max)` over every
/// point evaluated, endpoints included.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn kahan_beats_naive() {
        let xs = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000));
        assert!((kahan_sum(xs) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_real(0.9375), "0.9375");
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_real(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_real(123456.0), "123456");
        assert_eq!(fmt_real(1.5e-9), "1.5e-9");
        assert_eq!(fmt_real(-2.5e20), "-2.5e20");
    }

    #[test]
    fn blocks_cover_trials() {
        assert_eq!(blocks(0), vec![]);
        assert_eq!(blocks(10), vec![(0, 10)]);
        let b = blocks(3 * BLOCK_TRIALS + 5);
        assert_eq!(b.len(), 4);
        assert_eq!(b.iter().map(|x| x.1).sum::<u64>(), 3 * BLOCK_TRIALS + 5);
    }

    #[test]
    fn block_streams_differ_and_repeat() {
        let a: u64 = block_rng(7, 0).gen();
        let b: u64 = block_rng(7, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, block_rng(7, 0).gen::<u64>());
    }

    #[test]
    fn event_counts_repeat() {
        let a = count_events(10_000, 3, |rng| rng.gen_bool(0.25));
        let b = count_events(10_000, 3, |rng| rng.gen_bool(0.25));
        assert_eq!(a, b);
        assert!(a.within(0.25, 4.0));
        assert_eq!(count_events(100, 1, |_| true).std_err, 0.0);
    }

    #[test]
    fn golden_section_finds_interior_and_boundary_max() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6 && v.abs() < 1e-12);
        let (x, _) = golden_max(|x| x, 0.0, 0.5, 1e-10);
        assert_eq!(x, 0.5);
    }
}

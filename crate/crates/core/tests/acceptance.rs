//! Acceptance suite: one `[PASS]`, `[FAIL]` or `[SKIP]` line per criterion.
//!
//! Run with `cargo test -p qpolar --test acceptance`. Set `QPOLAR_BCH16` to
//! the path of a 16x16 BCH kernel file to enable the BCH check.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use qpolar::de::{self, psi_all, ErasureProb};
use qpolar::ensemble::{self, AvgProfile, RhoTable};
use qpolar::kernel::{self, arikan_tensor, profile_poly, vandermonde, Kernel, ProfilePolynomial};
use qpolar::lyapunov::{
    self, check_proof_inequalities, lambda_sup, InequalityGrid, LyapunovFn, OperatorSpec, DEFAULT_GRID_POINTS,
    DEFAULT_REFINE_TOL,
};
use qpolar::numeric::{block_rng, kahan_sum};
use qpolar::{FieldParams, Matrix};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Suite {
    failed: usize,
    passed: usize,
    skipped: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => {
                self.passed += 1;
                ("PASS", d)
            }
            Outcome::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => {
                self.skipped += 1;
                ("SKIP", d)
            }
        };
        println!("[{tag}] {id:02} {name} ({secs:.1}s): {detail}");
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rs(q: usize) -> OperatorSpec {
    OperatorSpec::rs(q).unwrap()
}

fn power(beta: f64) -> LyapunovFn {
    LyapunovFn::power(beta).unwrap()
}

fn lambda(op: &OperatorSpec, v: &LyapunovFn) -> lyapunov::LambdaReport {
    lambda_sup(op, v, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap()
}

const Q_SAMPLE: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

fn binary_tables() -> &'static [(u32, RhoTable, AvgProfile)] {
    static TABLES: OnceLock<Vec<(u32, RhoTable, AvgProfile)>> = OnceLock::new();
    TABLES.get_or_init(|| {
        [16u32, 32, 64]
            .into_iter()
            .map(|m| {
                let table = RhoTable::build(m, 2).unwrap();
                let avg = AvgProfile::new(&table);
                (m, table, avg)
            })
            .collect()
    })
}

fn lambda_examples() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (q, beta, lo, hi) in [
        (2, 0.66, 0.820, 0.8325),
        (4, 0.64, 0.655, 0.659),
        (16, 0.58, 0.373, 0.377),
    ] {
        let start = Instant::now();
        let r = lambda(&rs(q), &power(beta));
        let fast = start.elapsed() < Duration::from_secs(60);
        ok &= (lo..=hi).contains(&r.lambda) && fast;
        parts.push(format!("RS({q}) beta={beta}: {:.5} in [{lo}, {hi}]", r.lambda));
    }
    verdict(ok, parts.join("; "))
}

fn iterated_function() -> Outcome {
    let v5 = LyapunovFn::iterate(power(0.66), rs(2), 5);
    let r = lambda(&rs(2), &v5);
    verdict(
        (r.lambda - 0.8271).abs() <= 5e-4,
        format!("sup T V_5 / V_5 = {:.5} (target 0.8271 +- 5e-4)", r.lambda),
    )
}

fn scaled_lambdas(beta: f64) -> Vec<(usize, f64, f64)> {
    Q_SAMPLE
        .iter()
        .map(|&q| {
            let r = lambda(&rs(q), &power(beta));
            (q, (q as f64).sqrt() * r.lambda, r.argmax_x)
        })
        .collect()
}

fn sweep_half() -> Outcome {
    let rows = scaled_lambdas(0.5);
    let monotone = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    let bounded = rows.iter().all(|r| r.1 <= 1.6142 + 5e-4);
    let at_half = rows.iter().filter(|r| (r.2 - 0.5).abs() <= 1e-6).count();
    let values: Vec<String> = rows.iter().map(|r| format!("{}:{:.5}", r.0, r.1)).collect();
    verdict(
        monotone && bounded,
        format!(
            "sqrt(q) lambda = [{}]; nondecreasing={monotone}, <= 1.6142+5e-4: {bounded}; \
             observation: argmax at 1/2 for {at_half}/{} q",
            values.join(", "),
            rows.len()
        ),
    )
}

fn sweep_twelfth() -> Outcome {
    let rows = scaled_lambdas(1.0 / 12.0);
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.0, r.1)).collect();
    verdict(
        worst <= 4.1218 + 5e-4,
        format!(
            "sqrt(q) lambda = [{}]; max {worst:.5} <= 4.1218+5e-4",
            values.join(", ")
        ),
    )
}

fn gaussian_constant() -> Outcome {
    let m = lyapunov::m_beta(0.5).unwrap();
    let rows = scaled_lambdas(0.5);
    let below = rows.iter().all(|r| r.1 < m);
    verdict(
        (m - 1.6147).abs() <= 5e-4 && m < 0.5f64.exp() && below,
        format!(
            "m(1/2) = {m:.6} (target 1.6147 +- 5e-4, < e^(1/2) = {:.6}); sqrt(q) lambda < m(1/2) for all q: {below}",
            0.5f64.exp()
        ),
    )
}

fn closed_form_domination() -> Outcome {
    let mut worst: (f64, usize, f64) = (f64::INFINITY, 0, 0.0);
    for &q in &Q_SAMPLE {
        for k in 1..=10 {
            let beta = k as f64 * 0.05;
            let slack = lyapunov::lemma2_bound(q, beta).unwrap() - lambda(&rs(q), &power(beta)).lambda;
            if slack < worst.0 {
                worst = (slack, q, beta);
            }
        }
    }
    verdict(
        worst.0 >= 0.0,
        format!(
            "min(bound - lambda) = {:.4} at q={}, beta={:.2}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn proof_inequalities() -> Outcome {
    let report = check_proof_inequalities(&InequalityGrid {
        points: 10_000,
        qs: vec![2, 16, 256],
        betas: vec![0.1, 0.3, 0.5],
    });
    let violations = report.violations();
    let worst = report.worst().unwrap();
    let mut detail = format!(
        "{} checks, worst slack {:.3e} ({} q={:?} beta={:?} x={})",
        report.margins.len(),
        worst.min_slack,
        worst.name,
        worst.q,
        worst.beta,
        worst.witness_x
    );
    for v in &violations {
        detail.push_str(&format!(
            "; VIOLATED {} q={:?} beta={:?}: slack {:.3e} at x={} y={:?}",
            v.name, v.q, v.beta, v.min_slack, v.witness_x, v.witness_y
        ));
    }
    verdict(violations.is_empty(), detail)
}

fn ensemble_identities() -> Outcome {
    let mut bad = Vec::new();
    let mut count = 0;
    for q in [2u32, 3, 4] {
        for m in 1..=16 {
            let report = RhoTable::build(m, q).unwrap().check_identities();
            count += 1;
            if !(report.row_sums && report.duality) {
                bad.push(format!("(m={m}, q={q})"));
            }
        }
    }
    let start = Instant::now();
    let tables = binary_tables();
    let build = start.elapsed().as_secs_f64();
    for (m, table, _) in tables {
        let report = table.check_identities();
        count += 1;
        if !(report.row_sums && report.duality) {
            bad.push(format!("(m={m}, q=2)"));
        }
    }
    verdict(
        bad.is_empty(),
        format!("{count} tables, row sums and duality exact; failures: {bad:?}; m=16,32,64 built in {build:.1}s"),
    )
}

fn rho_oracles() -> Outcome {
    let mut cells = 0;
    let mut outside = Vec::new();
    for q in [2u32, 3, 4] {
        for m in 1..=6u32 {
            let table = RhoTable::build(m, q).unwrap();
            for i in 0..m {
                for d in 0..=m {
                    let exact = table.get(i, d).to_f64().unwrap();
                    let seed = (((q as u64 * 16 + m as u64) * 16 + i as u64) * 16) + d as u64;
                    let est = ensemble::rho_mc(m, i, d, q, 100_000, seed).unwrap();
                    cells += 1;
                    if !est.within(exact, 3.0) {
                        outside.push(format!(
                            "(m={m},i={i},d={d},q={q}: {:.5} vs {exact:.5}, {:.1} sigma)",
                            est.mean,
                            (est.mean - exact).abs() / est.std_err
                        ));
                    }
                }
            }
        }
    }
    let mut enumerated = 0;
    let mut mismatched = Vec::new();
    for (m, q) in [(1u32, 2u32), (2, 2), (3, 2), (1, 3), (2, 3)] {
        let table = RhoTable::build(m, q).unwrap();
        for i in 0..m {
            for d in 0..=m {
                enumerated += 1;
                if table.get(i, d) != &ensemble::rho_by_enumeration(m, i, d, q).unwrap() {
                    mismatched.push(format!("(m={m},i={i},d={d},q={q})"));
                }
            }
        }
    }
    verdict(
        outside.is_empty() && mismatched.is_empty(),
        format!(
            "{cells} Monte Carlo cells, outside 3 sigma: {}{}; {enumerated} enumerated cells, mismatches: {mismatched:?}",
            outside.len(),
            if outside.is_empty() { String::new() } else { format!(" {outside:?}") }
        ),
    )
}

fn lambda_m_values() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((m, _, avg), target) in binary_tables().iter().zip([0.6729, 0.4558, 0.2880]) {
        let r = ensemble::lambda_m(avg, 0.35, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        let concave = ensemble::check_conjecture1(avg, 0.35, 1, DEFAULT_GRID_POINTS).unwrap();
        ok &= (r.lambda - target).abs() <= 0.003 && concave.concave;
        parts.push(format!(
            "m={m}: {:.4} (target {target}), gbar_1 concave={} (max second difference {:.2e})",
            r.lambda, concave.concave, concave.levels[0].max_second_difference
        ));
    }
    verdict(ok, parts.join("; "))
}

fn mean_preservation() -> Outcome {
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    let mut worst = [0.0f64; 3];
    for (q, n, eps) in [(2, 12, 0.5), (3, 7, 0.3), (16, 3, 0.5), (256, 2, 0.75), (1024, 1, 0.1)] {
        let p = de::profile(q, n, eps).unwrap();
        worst[0] = worst[0].max((p.mean() - eps).abs());
    }
    for q in [2, 3, 16, 255, 1024] {
        for &x in &grid {
            let kids = psi_all(q, ErasureProb::clamped(x));
            let mean = kahan_sum(kids.iter().map(|c| c.value())) / q as f64;
            worst[1] = worst[1].max((mean - x).abs());
        }
    }
    for (m, _, avg) in binary_tables() {
        for &x in &grid {
            let kids = avg.phi_bar_all(ErasureProb::clamped(x));
            let mean = kahan_sum(kids.iter().map(|c| c.value())) / *m as f64;
            worst[2] = worst[2].max((mean - x).abs());
        }
    }
    let mut kernels = vec![
        arikan_tensor(1).unwrap(),
        arikan_tensor(4).unwrap(),
        vandermonde(5).unwrap(),
    ];
    let mut rng = block_rng(2024, 0);
    for (q, m) in [(2u32, 12usize), (3, 7), (4, 6)] {
        let field = FieldParams::new(q).unwrap();
        kernels.push(Kernel::new(Matrix::sample_full_rank(&field, m, m, &mut rng).unwrap()).unwrap());
    }
    let exact = kernels.iter().all(|k| profile_poly(k).unwrap().preserves_mean());
    verdict(
        worst.iter().all(|&w| w <= 1e-10) && exact,
        format!(
            "max deviations: profile {:.1e}, psi {:.1e}, phibar {:.1e}; kernel polynomial identity exact: {exact}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn chain_vs_exact() -> Outcome {
    let (eta, trials) = (0.01, 100_000);
    let exact = de::profile(16, 3, 0.5).unwrap().fraction_in(eta, 1.0 - eta);
    let est = de::mc_chain(16, 3, 0.5, trials, eta, 7).unwrap();
    let bound = 7.0 * 4096f64.powf(-0.353);
    let agree = (est.unpolarized_fraction - exact).abs() <= 3.0 * est.unpolarized_std_err;
    verdict(
        agree && exact <= bound && est.unpolarized_fraction <= bound,
        format!(
            "exact {exact:.5}, Monte Carlo {:.5} +- {:.5}, bound {bound:.5}",
            est.unpolarized_fraction, est.unpolarized_std_err
        ),
    )
}

type Poly = Vec<i128>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_compose(p: &Poly, r: &Poly) -> Poly {
    let mut out: Poly = vec![0];
    let mut power: Poly = vec![1];
    for &c in p {
        if out.len() < power.len() {
            out.resize(power.len(), 0);
        }
        for (o, v) in out.iter_mut().zip(&power) {
            *o += c * v;
        }
        power = poly_mul(&power, r);
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}

fn sorted_polys(p: &ProfilePolynomial) -> Vec<Poly> {
    let mut v: Vec<Poly> = (0..p.m())
        .map(|i| {
            let mut c = p.monomial_coeffs(i);
            while c.len() > 1 && *c.last().unwrap() == 0 {
                c.pop();
            }
            c
        })
        .collect();
    v.sort();
    v
}

fn kernel_chain() -> Outcome {
    let psi: Vec<Poly> = vec![vec![0, 2, -1], vec![0, 0, 1]];
    let f = profile_poly(&arikan_tensor(1).unwrap()).unwrap();
    let f_ok = sorted_polys(&f) == {
        let mut v = psi.clone();
        v.sort();
        v
    };
    let f2 = profile_poly(&arikan_tensor(2).unwrap()).unwrap();
    let mut compositions: Vec<Poly> = psi
        .iter()
        .flat_map(|a| psi.iter().map(|b| poly_compose(a, b)))
        .collect();
    compositions.sort();
    let f2_ok = sorted_polys(&f2) == compositions;

    let f4 = profile_poly(&arikan_tensor(4).unwrap()).unwrap();
    let fixed = kernel::lambda_kernel(&f4, "F^4", 0.66, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
    let repeated = lambda(&rs(2).repeated(4), &power(0.66));
    let diff = (fixed.lambda - repeated.lambda).abs();

    verdict(
        f_ok && f2_ok && diff <= 1e-6,
        format!(
            "F profile exact: {f_ok}; F^2 equals psi compositions: {f2_ok}; \
             lambda(F^4) = {:.7} vs T_2^4: {:.7} (diff {diff:.1e})",
            fixed.lambda, repeated.lambda
        ),
    )
}

fn bch16_kernel() -> Outcome {
    let Some(path) = std::env::var_os("QPOLAR_BCH16") else {
        let l2 = lambda(&rs(2), &power(0.6)).lambda;
        return Outcome::Skip(format!(
            "no kernel file; set QPOLAR_BCH16 to a 16x16 BCH kernel file to run \
             (lambda_2 at beta 0.6 = {l2:.4}, fourth power {:.4})",
            l2.powi(4)
        ));
    };
    match Kernel::load(std::path::Path::new(&path)).and_then(|k| profile_poly(&k)) {
        Ok(p) => {
            let r = kernel::lambda_kernel(&p, "bch16", 0.6, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
            let l2 = lambda(&rs(2), &power(0.6)).lambda;
            verdict(
                (r.lambda - 0.4508).abs() <= 0.002,
                format!(
                    "lambda = {:.4} (target 0.4508 +- 0.002); lambda_2^4 at beta 0.6 = {:.4}",
                    r.lambda,
                    l2.powi(4)
                ),
            )
        }
        Err(e) => Outcome::Fail(format!("kernel unusable: {e}")),
    }
}

fn scaling_evaluators() -> Outcome {
    let mut hypothesis_ok = true;
    let mut cases = 0;
    for q in [2usize, 3, 16, 256] {
        for n in 0..6u32 {
            for k in 1..=40 {
                let gamma = k as f64 * 0.05;
                let threshold = (-gamma * n as f64 * (q as f64).ln()).exp();
                let result = lyapunov::theorem1_bound(q, n, gamma, 0.5);
                cases += 1;
                hypothesis_ok &= result.is_err() == (threshold > 0.75);
            }
        }
    }
    let mut exponent_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for gi in 0..=6 {
        let gamma = 0.5 + gi as f64 * 0.25;
        for di in 1..=10 {
            let delta = di as f64 * 0.05;
            let t = lyapunov::q0_threshold(gamma, delta).unwrap();
            for extra in [0.0, 0.5, 2.0, 10.0] {
                let e = lyapunov::theorem1_exponent(t.ln_q0 + extra, gamma, t.beta);
                let excess = e - (-0.5 + delta);
                worst = worst.max(excess);
                exponent_ok &= excess <= 1e-12;
            }
        }
    }
    verdict(
        hypothesis_ok && exponent_ok,
        format!(
            "hypothesis error iff N^-gamma > 3/4 on {cases} cases: {hypothesis_ok}; \
             exponent - (-1/2 + delta) at q >= q0 at most {worst:.2e}"
        ),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite {
        failed: 0,
        passed: 0,
        skipped: 0,
    };
    suite.run(1, "contraction constants of RS(2), RS(4), RS(16)", lambda_examples);
    suite.run(2, "iterated test function", iterated_function);
    suite.run(3, "sqrt(q) lambda sweep at beta = 1/2", sweep_half);
    suite.run(4, "sqrt(q) lambda sweep at beta = 1/12", sweep_twelfth);
    suite.run(5, "Gaussian constant m(1/2)", gaussian_constant);
    suite.run(6, "closed-form bound dominates lambda", closed_form_domination);
    suite.run(7, "analytic inequality sweeps", proof_inequalities);
    suite.run(8, "exact ensemble identities", ensemble_identities);
    suite.run(9, "rho against Monte Carlo and enumeration", rho_oracles);
    suite.run(10, "ensemble lambda_m and concavity", lambda_m_values);
    suite.run(11, "mean preservation", mean_preservation);
    suite.run(12, "Markov chain against exact profile", chain_vs_exact);
    suite.run(13, "fixed-kernel oracle chain", kernel_chain);
    suite.run(13, "BCH16 kernel contraction constant", bch16_kernel);
    suite.run(14, "tail bound and threshold evaluators", scaling_evaluators);
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        suite.passed, suite.failed, suite.skipped
    );
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

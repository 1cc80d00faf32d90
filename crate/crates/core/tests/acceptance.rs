mod common;

use std::time::{Duration, Instant};

use cirjump::coefficients::{validate, JumpMeasure};
use cirjump::model::Model;
use cirjump::samplers::Component;
use cirjump::verify::{
    chapman_kolmogorov, closed_form_defect, compare_transition, euler_ladder, h_sampler_check, psi_semigroup_check,
    random_triples, skew_convolution, LaplaceComparison, McOptions, DEFAULT_LAMBDAS,
};
use cirjump::Error;
use common::*;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    elapsed: Duration,
    limit: Duration,
    /// Numbers that must be identical across worker counts.
    report: String,
    summary: String,
}

fn opts(n: usize, seed: u64, workers: usize) -> McOptions {
    McOptions {
        n,
        seed,
        workers,
        ..McOptions::default()
    }
}

fn cmp_line(c: &LaplaceComparison) -> String {
    format!("{} max|z|={:.3} soft={}", c.label, c.max_abs_z, c.soft_exceedances)
}

fn timed<F: FnOnce() -> (bool, String, String)>(id: u32, name: &'static str, limit_s: u64, f: F) -> Outcome {
    let start = Instant::now();
    let (passed, report, summary) = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_s);
    Outcome {
        id,
        name,
        passed: passed && elapsed < limit,
        elapsed,
        limit,
        report,
        summary,
    }
}

fn criterion_1() -> (bool, String, String) {
    let pairs = [(0.0, 1.0), (0.5, 2.3), (1.0, 5.0), (2.5, 2.6), (0.0, 5.0), (4.0, 4.001)];
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        for sigma2 in [1.0, 2.0] {
            let m = Model::new(constant_coeffs(0.0, 0.0, beta, sigma2, 5.0), JumpMeasure::none()).unwrap();
            worst = worst.max(closed_form_defect(&m, &pairs).unwrap());
        }
    }
    (worst <= 1e-8, format!("{worst:e}"), format!("max relative defect {worst:.3e} (bound 1e-8)"))
}

fn criterion_2() -> (bool, String, String) {
    let m = full_model(two_atoms());
    let triples = random_triples(0.0, 2.0, 100, 2024);
    let defect = psi_semigroup_check(m.engine(), &triples, &DEFAULT_LAMBDAS).unwrap();
    (defect <= 1e-7, format!("{defect:e}"), format!("max defect {defect:.3e} (bound 1e-7)"))
}

fn criterion_3() -> (bool, String, String) {
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.0, 2.5] {
        let m = Model::new(gamma_input_coeffs(alpha), JumpMeasure::none()).unwrap();
        let p = m.engine().kernel_value(S, T).unwrap().p;
        for l in DEFAULT_LAMBDAS {
            let got = m.laplace_i(S, T, l).unwrap().value;
            let want = (1.0 + l / p).powf(-alpha);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    (worst <= 1e-8, format!("{worst:e}"), format!("max relative defect {worst:.3e} (bound 1e-8)"))
}

fn criterion_4(workers: usize) -> (bool, String, String) {
    let m = full_model(two_atoms());
    let h = h_sampler_check(&m, S, T, Y, &opts(1_000_000, 41, workers)).unwrap();
    let report = serde_json::to_string(&h).unwrap();
    let summary = format!(
        "z(mean)={:.2} z(var)={:.2} z(zeros)={:.2} {}",
        h.moments.z_mean,
        h.moments.z_variance,
        h.z_zero_fraction,
        cmp_line(&h.laplace)
    );
    (h.passed, report, summary)
}

fn comparisons(cs: Vec<LaplaceComparison>) -> (bool, String, String) {
    let passed = cs.iter().all(|c| c.passed);
    let report = serde_json::to_string(&cs).unwrap();
    let summary = cs.iter().map(cmp_line).collect::<Vec<_>>().join("; ");
    (passed, report, summary)
}

fn criterion_5(workers: usize) -> (bool, String, String) {
    let cs = [(two_atoms(), 51), (exponential_density(), 52)]
        .into_iter()
        .map(|(nu, seed)| compare_transition(&full_model(nu), S, T, Y, &opts(1_000_000, seed, workers)).unwrap())
        .collect();
    comparisons(cs)
}

fn criterion_6(workers: usize) -> (bool, String, String) {
    let cs = [(two_atoms(), 61), (exponential_density(), 62)]
        .into_iter()
        .map(|(nu, seed)| chapman_kolmogorov(&full_model(nu), S, U, T, Y, &opts(1_000_000, seed, workers)).unwrap())
        .collect();
    comparisons(cs)
}

fn criterion_7(workers: usize) -> (bool, String, String) {
    let (t1, t2, t3) = (0.1, 0.9, 1.9);
    let runs = [
        (Component::I, two_atoms(), 71),
        (Component::Itilde, two_atoms(), 72),
        (Component::Itilde, exponential_density(), 73),
    ];
    let mut cs = Vec::new();
    let mut in_time = true;
    for (component, nu, seed) in runs {
        let start = Instant::now();
        cs.push(skew_convolution(&full_model(nu), component, t1, t2, t3, &opts(1_000_000, seed, workers)).unwrap());
        in_time &= start.elapsed() < Duration::from_secs(60);
    }
    let (passed, report, summary) = comparisons(cs);
    (passed && in_time, report, format!("{summary}; each < 60 s: {in_time}"))
}

fn criterion_8(workers: usize) -> (bool, String, String) {
    let m = full_model(two_atoms());
    let steps = [0.125, 0.0625, 0.03125, 0.015625];
    let ladder = euler_ladder(&m, S, T, Y, &steps, 1.0, &opts(100_000, 81, workers)).unwrap();
    let summary = ladder
        .rungs
        .iter()
        .map(|r| format!("h={} err={:.2e}±{:.1e}", r.h, r.abs_error, r.std_err))
        .collect::<Vec<_>>()
        .join(", ");
    (ladder.monotone, serde_json::to_string(&ladder).unwrap(), summary)
}

fn criterion_9() -> (bool, String, String) {
    let accepted = JumpMeasure::tempered_power(1.0, 0.4, 1.0).unwrap();
    let rejected = JumpMeasure::tempered_power(1.0, 0.7, 1.0).unwrap();
    let ok_report = validate(&full_coeffs(), &accepted);
    let ok = ok_report.status().is_ok() && ok_report.exact_samplers_available;
    let bad = full_model(rejected);
    let gate = matches!(bad.jump_source(), Err(Error::RestrictiveConditionViolated { .. }))
        && matches!(bad.transition(Component::K, S, T, Y), Err(Error::RestrictiveConditionViolated { .. }));
    let steps = accepted.truncation_schedule(8).unwrap();
    let ratios: Vec<f64> = steps.windows(2).map(|w| w[0].sqrt_mass / w[1].sqrt_mass).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let below = steps.iter().all(|s| s.sqrt_mass > 0.0 && s.sqrt_mass < 0.25f64.powi(s.level as i32));
    let report = serde_json::to_string(&steps).unwrap();
    let summary = format!("rho=0.4 accepted={ok}, rho=0.7 gated={gate}, min step ratio {min_ratio:.3}, below 4^-n={below}");
    (ok && gate && below && min_ratio >= 4.0, report, summary)
}

fn run_all(workers: usize) -> Vec<Outcome> {
    vec![
        timed(1, "kernel closed forms", 1, criterion_1),
        timed(2, "functional iteration", 5, criterion_2),
        timed(3, "gamma reduction", 1, criterion_3),
        timed(4, "H sampler", 10, || criterion_4(workers)),
        timed(5, "transition law", 60, || criterion_5(workers)),
        timed(6, "Chapman-Kolmogorov", 60, || criterion_6(workers)),
        timed(7, "skew convolution", 180, || criterion_7(workers)),
        timed(8, "Euler ladder", 120, || criterion_8(workers)),
        timed(9, "infinite-activity gate", 5, criterion_9),
    ]
}

fn main() {
    let first = run_all(1);
    let second = run_all(3);
    let mut all = true;
    for o in &first {
        all &= o.passed;
        println!(
            "criterion {:>2} [{}] {}: {} ({:.2?}, limit {:?})",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.summary,
            o.elapsed,
            o.limit
        );
    }
    let mismatched: Vec<u32> = first.iter().zip(&second).filter(|(a, b)| a.report != b.report).map(|(a, _)| a.id).collect();
    let det = mismatched.is_empty();
    all &= det;
    println!(
        "criterion 10 [{}] determinism: reports identical for 1 and 3 workers{}",
        if det { "PASS" } else { "FAIL" },
        if det { String::new() } else { format!(" (differ: {mismatched:?})") }
    );
    if !all {
        eprintln!("acceptance criteria failed");
        std::process::exit(1);
    }
}

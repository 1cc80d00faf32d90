//! Statistical checks of the samplers against the analytic transforms.
//!
//! Every comparison works in transform space: the empirical mean of
//! `e^{−λX}` over `N` draws is compared with the analytic value through its
//! z-score. A comparison passes when no point has `|z| > z_max` and at most
//! `max_soft_exceedances` points have `|z| > z_soft`.

use serde::{Deserialize, Serialize};

use crate::coefficients::JumpMeasure;
use crate::error::{Error, Result};
use crate::kernels::{psi_tilde_at, KernelEngine, KernelMode, LaplaceEval};
use crate::model::Model;
use crate::numerics::{sample_batched, uniform, RngStream};
use crate::paths::{euler_path, simulate_many, uniform_grid};
use crate::samplers::Component;

pub const DEFAULT_LAMBDAS: [f64; 8] = [0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub z_max: f64,
    pub z_soft: f64,
    pub max_soft_exceedances: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            z_max: 4.0,
            z_soft: 3.0,
            max_soft_exceedances: 1,
        }
    }
}

/// Per-λ mean and standard error of `e^{−λX}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLaplace {
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub std_err: Vec<f64>,
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

pub fn empirical_laplace(samples: &[f64], lambda_grid: &[f64]) -> Result<EmpiricalLaplace> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let mut empirical = Vec::with_capacity(lambda_grid.len());
    let mut std_err = Vec::with_capacity(lambda_grid.len());
    for &l in lambda_grid {
        let (m, se) = mean_and_se(samples.iter().map(|x| (-l * x).exp()), n);
        empirical.push(m);
        std_err.push(se);
    }
    Ok(EmpiricalLaplace {
        n,
        lambda_grid: lambda_grid.to_vec(),
        empirical,
        std_err,
    })
}

/// `(empirical − expected)/se`; a zero standard error gives 0 on exact
/// agreement and an infinite score otherwise.
pub fn z_score(empirical: f64, expected: f64, se: f64) -> f64 {
    let diff = empirical - expected;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceComparison {
    pub label: String,
    pub n: usize,
    pub lambda_grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub std_err: Vec<f64>,
    pub analytic: Vec<f64>,
    pub analytic_error: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub soft_exceedances: usize,
    pub passed: bool,
}

impl LaplaceComparison {
    pub fn new(label: impl Into<String>, emp: EmpiricalLaplace, analytic: &[LaplaceEval], th: &Thresholds) -> Self {
        let z_scores: Vec<f64> = emp
            .empirical
            .iter()
            .zip(analytic)
            .zip(&emp.std_err)
            .map(|((e, a), se)| z_score(*e, a.value, *se))
            .collect();
        let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let soft_exceedances = z_scores.iter().filter(|z| z.abs() > th.z_soft).count();
        Self {
            label: label.into(),
            n: emp.n,
            lambda_grid: emp.lambda_grid,
            empirical: emp.empirical,
            std_err: emp.std_err,
            analytic: analytic.iter().map(|a| a.value).collect(),
            analytic_error: analytic.iter().map(|a| a.error_estimate).collect(),
            z_scores,
            max_abs_z,
            soft_exceedances,
            passed: max_abs_z <= th.z_max && soft_exceedances <= th.max_soft_exceedances,
        }
    }
}

/// Options shared by the Monte Carlo checks.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    pub lambda_grid: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            n: 100_000,
            seed: 1,
            workers: 0,
            lambda_grid: DEFAULT_LAMBDAS.to_vec(),
            thresholds: Thresholds::default(),
        }
    }
}

fn analytic_grid<F: Fn(f64) -> Result<LaplaceEval>>(lambdas: &[f64], f: F) -> Result<Vec<LaplaceEval>> {
    lambdas.iter().map(|&l| f(l)).collect()
}

/// `opts.n` batched draws of `f`; the first error aborts the result.
pub fn draw_samples<F>(opts: &McOptions, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut crate::numerics::StreamRng) -> Result<f64> + Sync,
{
    let failure = std::sync::Mutex::new(None);
    let xs = sample_batched(opts.n, opts.seed, opts.workers, |rng| match f(rng) {
        Ok(x) => x,
        Err(e) => {
            failure.lock().expect("unpoisoned").get_or_insert(e);
            f64::NAN
        }
    });
    match failure.into_inner().expect("unpoisoned") {
        Some(e) => Err(e),
        None => Ok(xs),
    }
}

/// Draws from one component (or `K`) vs its analytic transform.
pub fn compare_component(model: &Model, component: Component, s: f64, t: f64, y: f64, opts: &McOptions) -> Result<LaplaceComparison> {
    let law = model.transition(component, s, t, y)?;
    let xs = draw_samples(opts, |rng| law.sample(rng))?;
    let analytic = analytic_grid(&opts.lambda_grid, |l| law.laplace(l))?;
    let emp = empirical_laplace(&xs, &opts.lambda_grid)?;
    Ok(LaplaceComparison::new(format!("{component}({s},{t},{y})"), emp, &analytic, &opts.thresholds))
}

pub fn compare_transition(model: &Model, s: f64, t: f64, y: f64, opts: &McOptions) -> Result<LaplaceComparison> {
    compare_component(model, Component::K, s, t, y, opts)
}

/// Two-step draws `s → u → t` vs the one-step analytic transform.
pub fn chapman_kolmogorov(model: &Model, s: f64, u: f64, t: f64, y: f64, opts: &McOptions) -> Result<LaplaceComparison> {
    if !(s < u && u < t) {
        return Err(Error::DegenerateIntermediate { s, u, t });
    }
    let first = model.transition(Component::K, s, u, y)?;
    let second = model.transition(Component::K, u, t, 0.0)?;
    let whole = model.transition(Component::K, s, t, y)?;
    let xs = draw_samples(opts, |rng| {
        let mid = first.sample(rng)?;
        second.sample_from(rng, mid)
    })?;
    let analytic = analytic_grid(&opts.lambda_grid, |l| whole.laplace(l))?;
    let emp = empirical_laplace(&xs, &opts.lambda_grid)?;
    Ok(LaplaceComparison::new(format!("K({s},{u},{t},{y}) two-step"), emp, &analytic, &opts.thresholds))
}

/// `V ~ C_{t1,t2}`, then `H_{t2,t3}(V) + C_{t2,t3}` vs the transform of
/// `C_{t1,t3}`, for `C ∈ {I, Ĩ}`.
pub fn skew_convolution(model: &Model, component: Component, t1: f64, t2: f64, t3: f64, opts: &McOptions) -> Result<LaplaceComparison> {
    if !matches!(component, Component::I | Component::Itilde) {
        return Err(Error::InvalidParameter("skew convolution applies to I and Itilde".into()));
    }
    if !(t1 < t2 && t2 < t3) {
        return Err(Error::DegenerateIntermediate { s: t1, u: t2, t: t3 });
    }
    let first = model.transition(component, t1, t2, 0.0)?;
    let carry = model.transition(Component::H, t2, t3, 0.0)?;
    let second = model.transition(component, t2, t3, 0.0)?;
    let whole = model.transition(component, t1, t3, 0.0)?;
    let xs = draw_samples(opts, |rng| {
        let v = first.sample(rng)?;
        Ok(carry.sample_from(rng, v)? + second.sample(rng)?)
    })?;
    let analytic = analytic_grid(&opts.lambda_grid, |l| whole.laplace(l))?;
    let emp = empirical_laplace(&xs, &opts.lambda_grid)?;
    Ok(LaplaceComparison::new(format!("{component}({t1},{t2},{t3}) skew"), emp, &analytic, &opts.thresholds))
}

/// `max |Ψ_{t1,t2}(Ψ_{t2,t3}(λ)) − Ψ_{t1,t3}(λ)|`; degenerate triples are skipped.
pub fn psi_semigroup_check(engine: &KernelEngine, triples: &[(f64, f64, f64)], lambdas: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(t1, t2, t3) in triples {
        if !(t1 < t2 && t2 < t3) {
            continue;
        }
        for &l in lambdas {
            let lhs = engine.psi(t1, t2, engine.psi(t2, t3, l)?)?;
            let rhs = engine.psi(t1, t3, l)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// `max |Ψ̃_{v,t2}(Ψ_{t2,t3}(λ)) − Ψ̃_{v,t3}(λ)|` over `v < t2 < t3` triples.
pub fn psi_tilde_iteration_check(
    engine: &KernelEngine,
    nu: &JumpMeasure,
    triples: &[(f64, f64, f64)],
    lambdas: &[f64],
    nu_tol: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(v, t2, t3) in triples {
        if !(v < t2 && t2 < t3) {
            continue;
        }
        for &l in lambdas {
            let lhs = psi_tilde_at(nu, engine.psi(v, t2, engine.psi(t2, t3, l)?)?, nu_tol)?.0;
            let rhs = engine.psi_tilde(nu, v, t3, l, nu_tol)?.0;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Sorted random triples `t1 < t2 < t3` in `[lo, hi]`.
pub fn random_triples(lo: f64, hi: f64, count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = RngStream::new(seed, 0).rng();
    (0..count)
        .map(|_| {
            let mut v = [0.0; 3];
            for x in &mut v {
                *x = lo + (hi - lo) * uniform(&mut rng);
            }
            v.sort_by(f64::total_cmp);
            (v[0], v[1], v[2])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    pub z_mean: f64,
    pub z_variance: f64,
}

/// z-scores of the sample mean and variance; the variance standard error
/// uses the sample fourth central moment.
pub fn moment_check(samples: &[f64], expected_mean: f64, expected_variance: f64) -> Result<MomentCheck> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let variance = m2 * nf / (nf - 1.0);
    Ok(MomentCheck {
        n,
        mean,
        variance,
        expected_mean,
        expected_variance,
        z_mean: z_score(mean, expected_mean, (variance / nf).sqrt()),
        z_variance: z_score(variance, expected_variance, ((m4 - m2 * m2).max(0.0) / nf).sqrt()),
    })
}

/// z-score of the fraction of exact zeros against `p0`.
pub fn zero_fraction_z(samples: &[f64], p0: f64) -> f64 {
    let n = samples.len() as f64;
    let frac = samples.iter().filter(|x| **x == 0.0).count() as f64 / n;
    z_score(frac, p0, (p0 * (1.0 - p0) / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HCheck {
    pub moments: MomentCheck,
    pub zero_fraction: f64,
    pub expected_zero_fraction: f64,
    pub z_zero_fraction: f64,
    pub laplace: LaplaceComparison,
    pub passed: bool,
}

/// Mean `yB`, variance `2yB/p`, zero mass `e^{−yγ}` and transform of `H_{s,t}(y,·)`.
pub fn h_sampler_check(model: &Model, s: f64, t: f64, y: f64, opts: &McOptions) -> Result<HCheck> {
    let law = model.transition(Component::H, s, t, y)?;
    let kv = *law.kernel();
    let xs = draw_samples(opts, |rng| law.sample(rng))?;
    let moments = moment_check(&xs, y * kv.b, 2.0 * y * kv.b / kv.p)?;
    let p0 = (-y * kv.gamma).exp();
    let zf = zero_fraction_z(&xs, p0);
    let analytic = analytic_grid(&opts.lambda_grid, |l| law.laplace(l))?;
    let laplace = LaplaceComparison::new(
        format!("H({s},{t},{y})"),
        empirical_laplace(&xs, &opts.lambda_grid)?,
        &analytic,
        &opts.thresholds,
    );
    let zmax = opts.thresholds.z_max;
    let passed = moments.z_mean.abs() <= zmax && moments.z_variance.abs() <= zmax && zf.abs() <= zmax && laplace.passed;
    Ok(HCheck {
        moments,
        zero_fraction: xs.iter().filter(|x| **x == 0.0).count() as f64 / xs.len() as f64,
        expected_zero_fraction: p0,
        z_zero_fraction: zf,
        laplace,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung {
    pub h: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerLadder {
    pub lambda: f64,
    pub analytic: f64,
    pub rungs: Vec<LadderRung>,
    /// Each rung's error is at most the previous one plus twice the
    /// standard error of their difference.
    pub monotone: bool,
}

/// Euler terminal transforms at `λ` over decreasing steps vs `laplace_K`.
pub fn euler_ladder(model: &Model, s: f64, t: f64, y: f64, steps: &[f64], lambda: f64, opts: &McOptions) -> Result<EulerLadder> {
    let whole = model.transition(Component::K, s, t, y)?;
    let analytic = whole.laplace(lambda)?.value;
    let mut rungs = Vec::with_capacity(steps.len());
    for (k, &h) in steps.iter().enumerate() {
        let grid = uniform_grid(s, t, h)?;
        let seed = opts.seed.wrapping_add(k as u64 * 0x9E37_79B9);
        let paths = simulate_many(opts.n, seed, opts.workers, |st| euler_path(st, model, &grid, y))?;
        let xs: Vec<f64> = paths.iter().map(|p| p.terminal()).collect();
        let emp = empirical_laplace(&xs, &[lambda])?;
        rungs.push(LadderRung {
            h,
            empirical: emp.empirical[0],
            std_err: emp.std_err[0],
            abs_error: (emp.empirical[0] - analytic).abs(),
        });
    }
    let monotone = rungs
        .windows(2)
        .all(|w| w[1].abs_error <= w[0].abs_error + 2.0 * w[0].std_err.hypot(w[1].std_err));
    Ok(EulerLadder {
        lambda,
        analytic,
        rungs,
        monotone,
    })
}

/// Largest relative deviation of the quadrature kernel from the closed forms
/// for constant `β`, `σ`.
pub fn closed_form_defect(model: &Model, pairs: &[(f64, f64)]) -> Result<f64> {
    let coeffs = model.coeffs().clone();
    let quad = KernelEngine::with_options(coeffs.clone(), model.tolerances().kernel, KernelMode::ForceQuadrature)?;
    let beta = coeffs.beta_fn().as_constant();
    let sigma = coeffs.sigma_fn().as_constant();
    let (Some(beta), Some(sigma)) = (beta, sigma) else {
        return Err(Error::InvalidParameter("closed forms need constant beta and sigma".into()));
    };
    let half_s2 = 0.5 * sigma * sigma;
    let mut worst = 0.0f64;
    for &(s, t) in pairs {
        let kv = quad.kernel_value(s, t)?;
        let c = if beta == 0.0 {
            half_s2 * (t - s)
        } else {
            half_s2 / beta * ((beta * t).exp() - (beta * s).exp())
        };
        let b = (-beta * (t - s)).exp();
        let p = 1.0 / ((-beta * t).exp() * c);
        let g = 1.0 / ((-beta * s).exp() * c);
        for (x, want) in [(kv.c, c), (kv.b, b), (kv.p, p), (kv.gamma, g)] {
            worst = worst.max(((x - want) / want).abs());
        }
    }
    Ok(worst)
}

/// Named verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kernels,
    SamplerH,
    SamplerI,
    SamplerItilde,
    TransitionK,
    ChapmanKolmogorov,
    EulerConvergence,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Kernels,
        Suite::SamplerH,
        Suite::SamplerI,
        Suite::SamplerItilde,
        Suite::TransitionK,
        Suite::ChapmanKolmogorov,
        Suite::EulerConvergence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::SamplerH => "sampler-H",
            Suite::SamplerI => "sampler-I",
            Suite::SamplerItilde => "sampler-Itilde",
            Suite::TransitionK => "transition-K",
            Suite::ChapmanKolmogorov => "chapman-kolmogorov",
            Suite::EulerConvergence => "euler-convergence",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

/// Times, state and Monte Carlo options for a suite run.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSettings {
    pub s: f64,
    pub t: f64,
    pub y: f64,
    /// Intermediate time for two-step checks.
    pub u: f64,
    pub mc: McOptions,
    pub euler_steps: Vec<f64>,
    pub euler_lambda: f64,
    pub triples: usize,
}

impl SuiteSettings {
    pub fn for_model(model: &Model) -> Self {
        let t = model.coeffs().t_max();
        Self {
            s: 0.0,
            t,
            y: model.coeffs().x0(),
            u: 0.5 * t,
            mc: McOptions::default(),
            euler_steps: vec![0.125, 0.0625, 0.03125, 0.015625],
            euler_lambda: 1.0,
            triples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: bool,
    pub checks: Vec<SuiteCheck>,
}

fn check<T: Serialize>(name: impl Into<String>, passed: bool, detail: &T) -> SuiteCheck {
    SuiteCheck {
        name: name.into(),
        passed,
        detail: serde_json::to_value(detail).unwrap_or(serde_json::Value::Null),
    }
}

fn comparison_check(c: LaplaceComparison) -> SuiteCheck {
    check(c.label.clone(), c.passed, &c)
}

pub fn run_suite(model: &Model, suite: Suite, st: &SuiteSettings) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Kernels => kernel_checks(model, st)?,
        Suite::SamplerH => {
            let h = h_sampler_check(model, st.s, st.t, st.y, &st.mc)?;
            vec![check("H moments, zero mass and transform", h.passed, &h)]
        }
        Suite::SamplerI => {
            let mut out = vec![comparison_check(compare_component(model, Component::I, st.s, st.t, 0.0, &st.mc)?)];
            out.push(refinement_check(model, st)?);
            out
        }
        Suite::SamplerItilde => {
            let mut out = vec![comparison_check(compare_component(model, Component::Itilde, st.s, st.t, 0.0, &st.mc)?)];
            out.push(jump_count_check(model, st)?);
            out
        }
        Suite::TransitionK => vec![comparison_check(compare_transition(model, st.s, st.t, st.y, &st.mc)?)],
        Suite::ChapmanKolmogorov => vec![comparison_check(chapman_kolmogorov(model, st.s, st.u, st.t, st.y, &st.mc)?)],
        Suite::EulerConvergence => {
            let ladder = euler_ladder(model, st.s, st.t, st.y, &st.euler_steps, st.euler_lambda, &st.mc)?;
            vec![check("Euler weak-error ladder", ladder.monotone, &ladder)]
        }
    };
    Ok(SuiteReport {
        suite: suite.name(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn kernel_checks(model: &Model, st: &SuiteSettings) -> Result<Vec<SuiteCheck>> {
    let engine = model.engine();
    let tol = model.tolerances();
    let (s, t) = (st.s, st.t);
    let lambdas = &st.mc.lambda_grid;
    let mut out = Vec::new();

    let triples = random_triples(0.0, model.coeffs().t_max(), st.triples, st.mc.seed);
    let defect = psi_semigroup_check(engine, &triples, lambdas)?;
    let bound = (10.0 * tol.kernel).max(1e-12);
    out.push(check("functional iteration", defect <= bound, &serde_json::json!({"max_defect": defect, "bound": bound})));

    let mut gb = 0.0f64;
    for &(a, b, _) in &triples {
        if a < b {
            let kv = engine.kernel_value(a, b)?;
            gb = gb.max(((kv.gamma - kv.b * kv.p) / kv.gamma).abs());
        }
    }
    out.push(check("gamma = B p", gb <= 1e-12, &serde_json::json!({"max_relative_defect": gb})));

    let kv = engine.kernel_value(s, t)?;
    let h = 1e-4;
    let f = |l: f64| engine.psi(s, t, l);
    let (f1, f2) = (f(h)?, f(2.0 * h)?);
    let d1 = (4.0 * f1 - f2) / (2.0 * h);
    let d2 = (f2 - 2.0 * f1) / (h * h);
    let d1_ok = (d1 - kv.b).abs() <= 1e-6 * kv.b.max(1.0) + 10.0 * kv.b * (h / kv.p).powi(2);
    let d2_want = -2.0 * kv.b / kv.p;
    let d2_ok = (d2 - d2_want).abs() <= 1e-3 * d2_want.abs().max(1e-3);
    out.push(check(
        "derivatives at 0",
        d1_ok && d2_ok,
        &serde_json::json!({"first": d1, "expected_first": kv.b, "second": d2, "expected_second": d2_want}),
    ));

    let nu = model.nu();
    if !nu.is_zero() {
        let tt: Vec<(f64, f64, f64)> = triples.iter().take(20).copied().collect();
        let d = psi_tilde_iteration_check(engine, nu, &tt, lambdas, tol.nu)?;
        let bound = 10.0 * tol.nu;
        out.push(check("jump exponent iteration", d <= bound, &serde_json::json!({"max_defect": d, "bound": bound})));
    }

    let mut values = Vec::with_capacity(lambdas.len() + 1);
    let mut sorted = lambdas.clone();
    sorted.push(0.0);
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut factor_defect = 0.0f64;
    for &l in &sorted {
        let k = model.laplace_k(s, t, st.y, l)?;
        let prod = model.laplace_h(s, t, st.y, l)?.value * model.laplace_i(s, t, l)?.value * model.laplace_itilde(s, t, l)?.value;
        factor_defect = factor_defect.max((k.value - prod).abs());
        values.push(k.value);
    }
    let one_at_zero = sorted[0] != 0.0 || values[0] == 1.0;
    let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let log_convex = sorted.windows(3).zip(values.windows(3)).all(|(l, v)| {
        let w = (l[1] - l[0]) / (l[2] - l[0]);
        v[1].ln() <= (1.0 - w) * v[0].ln() + w * v[2].ln() + 1e-9
    });
    out.push(check(
        "transform shape",
        one_at_zero && monotone && log_convex && values.iter().all(|v| *v > 0.0),
        &serde_json::json!({"lambdas": sorted, "values": values, "monotone": monotone, "log_convex": log_convex}),
    ));
    out.push(check("K = H * I * Itilde", factor_defect <= 1e-12, &serde_json::json!({"max_defect": factor_defect})));

    let beta0 = model.coeffs().beta_fn().bounds_on(0.0, model.coeffs().t_max()).0;
    let decay_ok = kv.b <= (-beta0 * (t - s)).exp() * (1.0 + 1e-12);
    out.push(check("decay of B", decay_ok, &serde_json::json!({"b": kv.b, "bound": (-beta0 * (t - s)).exp()})));

    if model.coeffs().beta_fn().as_constant().is_some() && model.coeffs().sigma_fn().as_constant().is_some() {
        let pairs: Vec<(f64, f64)> = triples.iter().filter(|x| x.0 < x.2).map(|x| (x.0, x.2)).collect();
        let d = closed_form_defect(model, &pairs)?;
        out.push(check("closed forms", d <= 1e-8, &serde_json::json!({"max_relative_defect": d})));
    }
    Ok(out)
}

/// Exact transforms of the immigration grid law at `n`, `2n`, `4n` cells.
fn refinement_check(model: &Model, st: &SuiteSettings) -> Result<SuiteCheck> {
    let base = model.controls().i_cells.max(1);
    let mut defects = Vec::new();
    for k in 0..3 {
        let controls = crate::samplers::SamplerControls {
            i_cells: base << k,
            ..*model.controls()
        };
        let law = crate::samplers::TransitionLaw::new(
            model.engine().clone(),
            None,
            Component::I,
            st.s,
            st.t,
            0.0,
            &controls,
            model.tolerances().nu,
        )?;
        let mut worst = 0.0f64;
        for &l in &st.mc.lambda_grid {
            let exact = law.laplace(l)?.value;
            worst = worst.max((law.discretized_laplace_i(l).unwrap_or(exact) - exact).abs());
        }
        defects.push(worst);
    }
    let passed = defects.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    Ok(check(
        "immigration grid refinement",
        passed,
        &serde_json::json!({"cells": [base, base * 2, base * 4], "max_transform_defect": defects}),
    ))
}

/// Mean number of Poisson points on `(s,t]` vs `ν((δ,∞)) ∫ ã`.
fn jump_count_check(model: &Model, st: &SuiteSettings) -> Result<SuiteCheck> {
    let src = model.jump_source()?;
    let coeffs = model.coeffs().clone();
    let expected = src.mass() * coeffs.a_tilde_fn().integral(st.s, st.t);
    let counts = draw_samples(&st.mc, |rng| Ok(src.sample_prm(rng, &coeffs, st.s, st.t)?.points.len() as f64))?;
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let z = z_score(mean, expected, (expected / n).sqrt());
    Ok(check(
        "jump count",
        z.abs() <= st.mc.thresholds.z_max,
        &serde_json::json!({"mean": mean, "expected": expected, "z": z, "delta": src.delta()}),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_samples_give_exact_transform() {
        let e = empirical_laplace(&[0.0; 10], &[0.5, 1.0]).unwrap();
        assert_eq!(e.empirical, vec![1.0, 1.0]);
        assert_eq!(e.std_err, vec![0.0, 0.0]);
        assert!(matches!(empirical_laplace(&[1.0], &[1.0]), Err(Error::InsufficientSamples(1))));
    }

    #[test]
    fn exponential_samples_match_their_transform() {
        let p = 1.7;
        let xs = sample_batched(200_000, 8, 1, |r| crate::numerics::exponential(r, p));
        let emp = empirical_laplace(&xs, &DEFAULT_LAMBDAS).unwrap();
        let analytic: Vec<LaplaceEval> = DEFAULT_LAMBDAS
            .iter()
            .map(|&l| LaplaceEval {
                lambda: l,
                value: 1.0 / (1.0 + l / p),
                error_estimate: 0.0,
            })
            .collect();
        let cmp = LaplaceComparison::new("exp", emp, &analytic, &Thresholds::default());
        assert!(cmp.passed, "{cmp:?}");
    }

    #[test]
    fn z_score_degenerate_cases() {
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.5, 0.0), f64::INFINITY);
        assert_eq!(z_score(1.0, 0.5, 0.25), 2.0);
    }

    #[test]
    fn moment_check_on_exact_zeros() {
        let m = moment_check(&[0.0; 100], 0.0, 0.0).unwrap();
        assert_eq!((m.z_mean, m.z_variance), (0.0, 0.0));
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn triples_are_sorted() {
        for (a, b, c) in random_triples(0.0, 2.0, 50, 3) {
            assert!(a <= b && b <= c && c <= 2.0);
        }
    }
}

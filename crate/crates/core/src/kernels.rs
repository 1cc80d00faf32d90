//! The analytic kernel of the transition laws.
//!
//! For `0 ≤ s < t`:
//!
//! * `C(s,t) = ∫ₛᵗ σ²(v)/2 · exp(∫₀ᵛ β) dv`, `B(s,t) = exp(−∫ₛᵗ β)`,
//! * `p(s,t) = 1/(B(0,t) C(s,t))`, `γ(s,t) = 1/(B(0,s) C(s,t)) = B(s,t) p(s,t)`,
//! * `Ψ_{s,t}(λ) = γ λ/(p + λ)`, `Ψ̃_{s,t}(λ) = ∫(1 − e^{−yΨ_{s,t}(λ)}) ν(dy)`.
//!
//! The transition law `K_{s,t}(y, ·)` has Laplace transform
//!
//! `exp(−y Ψ_{s,t}(λ) − ∫ₛᵗ [a(v) Ψ_{v,t}(λ) + ã(v) Ψ̃_{v,t}(λ)] dv)`,
//!
//! the product of the transforms of its three independent components
//! `H_{s,t}(y,·)`, `I_{s,t}` and `Ĩ_{s,t}`.
//!
//! Internally `Ψ` is evaluated as `λ B / (1 + λ D)` with `D = 1/p = B(0,t) C(s,t)`,
//! which stays finite for every `λ ∈ [0, ∞]`. The primitive
//! `C₀(v) = C(0, v)` is cached on a node grid containing every coefficient
//! knot, so any `C(v, t)` costs at most two short quadratures.

use std::sync::Arc;

use serde::Serialize;

use crate::coefficients::{CoefficientSet, JumpMeasure};
use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_with_breakpoints};

/// Default absolute tolerance for time integrals.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default absolute tolerance for integrals against `ν`.
pub const DEFAULT_NU_TOL: f64 = 1e-8;
/// Largest admissible `∫₀^{T_max} β`; beyond it `exp(∫β)` nears overflow.
pub const MAX_BETA_INTEGRAL: f64 = 600.0;

const MIN_NODE_CELLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Closed forms when `β` and `σ` are constant, quadrature otherwise.
    #[default]
    Auto,
    /// Always use the quadrature path.
    ForceQuadrature,
}

/// `(C, B, p, γ)` for a time pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub s: f64,
    pub t: f64,
    pub c: f64,
    pub b: f64,
    pub p: f64,
    pub gamma: f64,
    pub quadrature_error: f64,
}

impl KernelValue {
    /// `Ψ_{s,t}(λ)`; `λ = ∞` gives `γ`.
    pub fn psi(&self, lambda: f64) -> f64 {
        psi_from(self.b, 1.0 / self.p, lambda)
    }

    /// `1/p = B(0,t) C(s,t)`.
    pub fn d(&self) -> f64 {
        1.0 / self.p
    }
}

#[inline]
fn psi_from(b: f64, d: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else if lambda.is_infinite() {
        b / d
    } else {
        lambda * b / (1.0 + lambda * d)
    }
}

/// A Laplace transform value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceEval {
    pub lambda: f64,
    pub value: f64,
    pub error_estimate: f64,
}

impl LaplaceEval {
    fn from_exponent(lambda: f64, exponent: f64, err: f64) -> Self {
        let value = (-exponent).exp();
        Self {
            lambda,
            value,
            error_estimate: value * err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConstantKernel {
    beta: f64,
    half_sigma2: f64,
}

impl ConstantKernel {
    /// `(B(s,t), D(s,t))`.
    fn bd(&self, s: f64, t: f64) -> (f64, f64) {
        let h = t - s;
        if self.beta == 0.0 {
            (1.0, self.half_sigma2 * h)
        } else {
            let b = (-self.beta * h).exp();
            (b, -self.half_sigma2 / self.beta * (-self.beta * h).exp_m1())
        }
    }
}

/// Evaluates every kernel quantity for one coefficient set.
#[derive(Debug, Clone)]
pub struct KernelEngine {
    coeffs: Arc<CoefficientSet>,
    tol: f64,
    mode: KernelMode,
    fast: Option<ConstantKernel>,
    nodes: Vec<f64>,
    c0: Vec<f64>,
    c0_error: f64,
    breaks: Vec<f64>,
}

impl KernelEngine {
    pub fn new(coeffs: Arc<CoefficientSet>) -> Result<Self> {
        Self::with_options(coeffs, DEFAULT_TOL, KernelMode::Auto)
    }

    pub fn with_options(coeffs: Arc<CoefficientSet>, tol: f64, mode: KernelMode) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let t_max = coeffs.t_max();
        let sigma_lo = coeffs.sigma_fn().bounds_on(0.0, t_max).0;
        if !(sigma_lo > 0.0) {
            return Err(Error::NonPositiveSigma { lower_bound: sigma_lo });
        }
        let total_beta = coeffs.beta_fn().integral(0.0, t_max);
        if total_beta > MAX_BETA_INTEGRAL {
            return Err(Error::InvalidParameter(format!(
                "integral of beta over the horizon is {total_beta}, above {MAX_BETA_INTEGRAL}"
            )));
        }
        let fast = match (mode, coeffs.beta_fn().as_constant(), coeffs.sigma_fn().as_constant()) {
            (KernelMode::Auto, Some(beta), Some(sigma)) => Some(ConstantKernel {
                beta,
                half_sigma2: 0.5 * sigma * sigma,
            }),
            _ => None,
        };

        let breaks = coeffs.all_knots();
        let mut max_width = t_max / MIN_NODE_CELLS as f64;
        if let Some(scale) = coeffs.smooth_scale() {
            max_width = max_width.min(0.5 * scale);
        }
        let mut anchors = vec![0.0];
        anchors.extend(breaks.iter().copied());
        anchors.push(t_max);
        let mut nodes = vec![0.0];
        for w in anchors.windows(2) {
            let n = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
            for i in 1..=n {
                nodes.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
            }
        }

        let mut engine = Self {
            coeffs,
            tol,
            mode,
            fast,
            nodes,
            c0: Vec::new(),
            c0_error: 0.0,
            breaks,
        };
        if engine.fast.is_none() {
            let mut c0 = Vec::with_capacity(engine.nodes.len());
            let mut acc = 0.0;
            let mut err = 0.0;
            c0.push(0.0);
            for w in engine.nodes.windows(2) {
                let (v, e) = engine.c_cell(w[0], w[1]);
                acc += v;
                err += e;
                c0.push(acc);
            }
            engine.c0 = c0;
            engine.c0_error = err;
        }
        Ok(engine)
    }

    pub fn coeffs(&self) -> &Arc<CoefficientSet> {
        &self.coeffs
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn uses_closed_form(&self) -> bool {
        self.fast.is_some()
    }

    /// Accumulated error estimate of the cached primitive `C₀`.
    pub fn primitive_error(&self) -> f64 {
        self.c0_error
    }

    /// `∫₀ᵛ β`.
    fn beta_int(&self, v: f64) -> f64 {
        self.coeffs.beta_fn().integral(0.0, v)
    }

    /// `∫_lo^hi σ²/2 · exp(∫₀ᵘβ) du` on a stretch without interior knots.
    fn c_cell(&self, lo: f64, hi: f64) -> (f64, f64) {
        if hi <= lo {
            return (0.0, 0.0);
        }
        let f = |u: f64| 0.5 * self.coeffs.sigma2(u) * self.beta_int(u).exp();
        let scale = f(0.5 * (lo + hi)) * (hi - lo);
        let r = integrate(f, lo, hi, (1e-14 * scale).max(f64::MIN_POSITIVE));
        (r.value, r.error_estimate)
    }

    fn cell_of(&self, v: f64) -> usize {
        self.nodes
            .partition_point(|&x| x <= v)
            .saturating_sub(1)
            .min(self.nodes.len() - 2)
    }

    /// `C(s, t)` with its error estimate.
    fn c_between(&self, s: f64, t: f64) -> (f64, f64) {
        let (ks, kt) = (self.cell_of(s), self.cell_of(t));
        if ks == kt || (kt == ks + 1 && t == self.nodes[kt]) {
            return self.c_cell(s, t);
        }
        let (head, e1) = self.c_cell(s, self.nodes[ks + 1]);
        let (tail, e2) = self.c_cell(self.nodes[kt], t);
        let mid = self.c0[kt] - self.c0[ks + 1];
        (head + mid + tail, e1 + e2 + 4.0 * f64::EPSILON * self.c0[kt])
    }

    /// `(B(s,t), D(s,t) = B(0,t) C(s,t), error of D)`.
    fn bd(&self, s: f64, t: f64) -> (f64, f64, f64) {
        if let Some(k) = &self.fast {
            let (b, d) = k.bd(s, t);
            return (b, d, 0.0);
        }
        let bt = self.beta_int(t);
        let b = (self.beta_int(s) - bt).exp();
        let (c, e) = self.c_between(s, t);
        let scale = (-bt).exp();
        (b, c * scale, e * scale)
    }

    fn check_pair(&self, s: f64, t: f64) -> Result<()> {
        self.coeffs.check_time(s)?;
        self.coeffs.check_time(t)?;
        if !(s < t) {
            return Err(Error::DegenerateInterval { s, t });
        }
        Ok(())
    }

    pub fn kernel_value(&self, s: f64, t: f64) -> Result<KernelValue> {
        self.check_pair(s, t)?;
        let (b, d, err) = self.bd(s, t);
        let b0t = match &self.fast {
            Some(k) => (-k.beta * t).exp(),
            None => (-self.beta_int(t)).exp(),
        };
        let c = d / b0t;
        Ok(KernelValue {
            s,
            t,
            c,
            b,
            p: 1.0 / d,
            gamma: b / d,
            quadrature_error: err / b0t,
        })
    }

    /// `Ψ_{s,t}(λ)` for `λ ∈ [0, ∞]`.
    pub fn psi(&self, s: f64, t: f64, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        self.check_pair(s, t)?;
        let (b, d, _) = self.bd(s, t);
        Ok(psi_from(b, d, lambda))
    }

    /// `Ψ̃_{s,t}(λ)` and its error estimate.
    pub fn psi_tilde(&self, nu: &JumpMeasure, s: f64, t: f64, lambda: f64, nu_tol: f64) -> Result<(f64, f64)> {
        let psi = self.psi(s, t, lambda)?;
        psi_tilde_at(nu, psi, nu_tol)
    }

    /// Transform of `H_{s,t}(y, ·)`: `exp(−y Ψ_{s,t}(λ))`.
    pub fn laplace_h(&self, s: f64, t: f64, y: f64, lambda: f64) -> Result<LaplaceEval> {
        check_state(y)?;
        let psi = self.psi(s, t, lambda)?;
        Ok(LaplaceEval::from_exponent(lambda, y * psi, 0.0))
    }

    /// `∫ₛᵗ a(v) Ψ_{v,t}(λ) dv` and its error.
    pub fn input_exponent(&self, s: f64, t: f64, lambda: f64) -> Result<(f64, f64)> {
        check_lambda(lambda)?;
        self.check_pair(s, t)?;
        if lambda == 0.0 {
            return Ok((0.0, 0.0));
        }
        let r = integrate_with_breakpoints(
            |v: f64| {
                let a = self.coeffs.a(v);
                if a == 0.0 || v >= t {
                    return 0.0;
                }
                let (b, d, _) = self.bd(v, t);
                a * psi_from(b, d, lambda)
            },
            s,
            t,
            &self.breaks,
            self.tol,
        );
        Ok((r.value, r.error_estimate))
    }

    /// `∫ₛᵗ ã(v) Ψ̃_{v,t}(λ) dv` and its error.
    pub fn jump_exponent(&self, nu: &JumpMeasure, s: f64, t: f64, lambda: f64, nu_tol: f64) -> Result<(f64, f64)> {
        check_lambda(lambda)?;
        self.check_pair(s, t)?;
        if lambda == 0.0 || nu.is_zero() {
            return Ok((0.0, 0.0));
        }
        let mut failure = None;
        let mut nu_err = 0.0f64;
        let r = integrate_with_breakpoints(
            |v: f64| {
                let at = self.coeffs.a_tilde(v);
                if at == 0.0 || v >= t || failure.is_some() {
                    return 0.0;
                }
                let (b, d, _) = self.bd(v, t);
                match psi_tilde_at(nu, psi_from(b, d, lambda), nu_tol) {
                    Ok((val, e)) => {
                        nu_err = nu_err.max(e * at);
                        at * val
                    }
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            s,
            t,
            &self.breaks,
            self.tol,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((r.value, r.error_estimate + nu_err * (t - s)))
    }

    /// Transform of `I_{s,t}`: `exp(−∫ₛᵗ a(v) Ψ_{v,t}(λ) dv)`.
    pub fn laplace_i(&self, s: f64, t: f64, lambda: f64) -> Result<LaplaceEval> {
        let (e, err) = self.input_exponent(s, t, lambda)?;
        Ok(LaplaceEval::from_exponent(lambda, e, err))
    }

    /// Transform of `Ĩ_{s,t}`: `exp(−∫ₛᵗ ã(v) Ψ̃_{v,t}(λ) dv)`.
    pub fn laplace_itilde(&self, nu: &JumpMeasure, s: f64, t: f64, lambda: f64, nu_tol: f64) -> Result<LaplaceEval> {
        let (e, err) = self.jump_exponent(nu, s, t, lambda, nu_tol)?;
        Ok(LaplaceEval::from_exponent(lambda, e, err))
    }

    /// Transform of the full transition law `K_{s,t}(y, ·)`.
    pub fn laplace_k(&self, nu: &JumpMeasure, s: f64, t: f64, y: f64, lambda: f64, nu_tol: f64) -> Result<LaplaceEval> {
        check_state(y)?;
        let psi = self.psi(s, t, lambda)?;
        let (ei, erri) = self.input_exponent(s, t, lambda)?;
        let (ej, errj) = self.jump_exponent(nu, s, t, lambda, nu_tol)?;
        Ok(LaplaceEval::from_exponent(lambda, y * psi + ei + ej, erri + errj))
    }
}

/// `∫(1 − e^{−y ψ}) ν(dy)` for a given `ψ = Ψ_{s,t}(λ)`.
pub fn psi_tilde_at(nu: &JumpMeasure, psi: f64, nu_tol: f64) -> Result<(f64, f64)> {
    if psi == 0.0 || nu.is_zero() {
        return Ok((0.0, 0.0));
    }
    nu.integral(|y: f64| -(-y * psi).exp_m1(), 1.0, nu_tol)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(())
}

fn check_state(y: f64) -> Result<()> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("state must be nonnegative, got {y}")));
    }
    Ok(())
}

//! Time-dependent coefficients, the jump measure and their admissibility
//! checks.

mod jump_measure;
mod time_function;
mod validation;

pub use jump_measure::{
    CustomDensity, DensityMeasure, DensityShape, JumpMeasure, JumpMeasureSpec, JumpVariant,
    TruncationStep,
};
pub use time_function::{TimeFunction, TimeFunctionSpec};
pub use validation::{validate, validate_strict, Certificate, CheckResult, Severity, ValidationReport};

use crate::error::{Error, Result};

/// How the continuous input enters the drift.
///
/// `Alpha(α)` means `a(t) = α(t) σ²(t) / 2`; both forms expose `a` and `α`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputRate {
    Direct(TimeFunction),
    Alpha(TimeFunction),
}

/// The coefficients `a`, `ã`, `β`, `σ` of the equation, the starting point
/// and the horizon `[0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    input: InputRate,
    a_tilde: TimeFunction,
    beta: TimeFunction,
    sigma: TimeFunction,
    x0: f64,
    t_max: f64,
}

impl CoefficientSet {
    pub fn new(
        a: TimeFunction,
        a_tilde: TimeFunction,
        beta: TimeFunction,
        sigma: TimeFunction,
        x0: f64,
        t_max: f64,
    ) -> Result<Self> {
        Self::with_input(InputRate::Direct(a), a_tilde, beta, sigma, x0, t_max)
    }

    pub fn with_input(
        input: InputRate,
        a_tilde: TimeFunction,
        beta: TimeFunction,
        sigma: TimeFunction,
        x0: f64,
        t_max: f64,
    ) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be positive and finite, got {t_max}")));
        }
        if !(x0 >= 0.0) || !x0.is_finite() {
            return Err(Error::InvalidParameter(format!("x0 must be nonnegative, got {x0}")));
        }
        let nonneg = |name: &str, f: &TimeFunction| -> Result<()> {
            let (lo, _) = f.bounds_on(0.0, t_max);
            if lo < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative on [0, t_max] (minimum {lo})"
                )));
            }
            Ok(())
        };
        match &input {
            InputRate::Direct(a) => nonneg("a", a)?,
            InputRate::Alpha(alpha) => nonneg("alpha", alpha)?,
        }
        nonneg("a_tilde", &a_tilde)?;
        nonneg("beta", &beta)?;
        Ok(Self {
            input,
            a_tilde,
            beta,
            sigma,
            x0,
            t_max,
        })
    }

    pub fn input(&self) -> &InputRate {
        &self.input
    }
    pub fn a_tilde_fn(&self) -> &TimeFunction {
        &self.a_tilde
    }
    pub fn beta_fn(&self) -> &TimeFunction {
        &self.beta
    }
    pub fn sigma_fn(&self) -> &TimeFunction {
        &self.sigma
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn a(&self, t: f64) -> f64 {
        match &self.input {
            InputRate::Direct(a) => a.eval(t),
            InputRate::Alpha(alpha) => 0.5 * alpha.eval(t) * self.sigma2(t),
        }
    }

    /// `α(t) = 2 a(t) / σ²(t)`.
    pub fn alpha(&self, t: f64) -> f64 {
        match &self.input {
            InputRate::Direct(a) => 2.0 * a.eval(t) / self.sigma2(t),
            InputRate::Alpha(alpha) => alpha.eval(t),
        }
    }

    pub fn a_tilde(&self, t: f64) -> f64 {
        self.a_tilde.eval(t)
    }
    pub fn beta(&self, t: f64) -> f64 {
        self.beta.eval(t)
    }
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma.eval(t)
    }
    pub fn sigma2(&self, t: f64) -> f64 {
        let s = self.sigma.eval(t);
        s * s
    }

    /// `inf β > 0` on the horizon.
    pub fn beta_strictly_positive(&self) -> bool {
        self.beta.bounds_on(0.0, self.t_max).0 > 0.0
    }

    /// Upper bound of `ã` on `[lo, hi]`.
    pub fn a_tilde_bound(&self, lo: f64, hi: f64) -> f64 {
        self.a_tilde.bounds_on(lo, hi).1
    }

    /// Upper bound of `a` on `[lo, hi]`.
    pub fn a_bound(&self, lo: f64, hi: f64) -> f64 {
        match &self.input {
            InputRate::Direct(a) => a.bounds_on(lo, hi).1,
            InputRate::Alpha(alpha) => {
                let s = self.sigma.bounds_on(lo, hi).1;
                0.5 * alpha.bounds_on(lo, hi).1 * s * s
            }
        }
    }

    /// Knots of `a` (or `α`) and `σ` inside `(0, t_max)`: on cells between
    /// them `α` is as smooth as the coefficients allow.
    pub fn input_knots(&self) -> Vec<f64> {
        let a = match &self.input {
            InputRate::Direct(a) | InputRate::Alpha(a) => a,
        };
        self.merge_knots(&[a, &self.sigma])
    }

    /// Knots of every coefficient inside `(0, t_max)`.
    pub fn all_knots(&self) -> Vec<f64> {
        let a = match &self.input {
            InputRate::Direct(a) | InputRate::Alpha(a) => a,
        };
        self.merge_knots(&[a, &self.a_tilde, &self.beta, &self.sigma])
    }

    fn merge_knots(&self, fs: &[&TimeFunction]) -> Vec<f64> {
        let mut ks: Vec<f64> = fs
            .iter()
            .flat_map(|f| f.knots().iter().copied())
            .filter(|k| *k > 0.0 && *k < self.t_max)
            .collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        ks
    }

    /// Smallest smoothness scale among the coefficients (sinusoids).
    pub fn smooth_scale(&self) -> Option<f64> {
        let a = match &self.input {
            InputRate::Direct(a) | InputRate::Alpha(a) => a,
        };
        [a, &self.a_tilde, &self.beta, &self.sigma]
            .iter()
            .filter_map(|f| f.smooth_scale())
            .reduce(f64::min)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.t_max * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::OutsideHorizon { t, t_max: self.t_max });
        }
        Ok(())
    }
}

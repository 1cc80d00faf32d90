use serde::Serialize;

use super::{CoefficientSet, JumpMeasure, JumpVariant};
use crate::error::{Error, Result};

const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Pass,
    Warning,
    Error,
}

/// A numerically evaluated integral condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub value: f64,
    pub error_estimate: f64,
}

impl Certificate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub severity: Severity,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.severity == Severity::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub jump_variant: JumpVariant,
    /// `∫(y ∧ 1) ν(dy)`.
    pub summability: Certificate,
    /// `∫(√y ∧ 1) ν(dy)`.
    pub sqrt_summability: Certificate,
    pub beta_strictly_positive: bool,
    /// False when the square-root condition fails: exact samplers and the
    /// branching construction are then unavailable.
    pub exact_samplers_available: bool,
    pub small_jump_index: Option<f64>,
}

impl ValidationReport {
    /// The first hard error, if any.
    pub fn status(&self) -> Result<()> {
        for c in &self.checks {
            if c.severity == Severity::Error {
                return Err(match c.name {
                    "sigma_positive" => Error::NonPositiveSigma {
                        lower_bound: c.certificate.map_or(f64::NAN, |x| x.value),
                    },
                    "summability" => Error::PermanentConditionViolated,
                    _ => Error::InvalidParameter(c.detail.clone()),
                });
            }
        }
        Ok(())
    }

    /// Gate for exact samplers and the branching construction.
    pub fn require_exact_samplers(&self) -> Result<()> {
        self.status()?;
        if !self.exact_samplers_available {
            return Err(Error::RestrictiveConditionViolated {
                rho: self.small_jump_index.unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.severity == Severity::Warning)
    }
}

/// Check every standing assumption on the coefficients and `ν`.
///
/// Always returns a report; the report's [`ValidationReport::status`] carries
/// the hard failures. Use [`validate_strict`] to fail on them directly.
pub fn validate(coeffs: &CoefficientSet, nu: &JumpMeasure) -> ValidationReport {
    let t_max = coeffs.t_max();
    let mut checks = Vec::new();

    let sigma_lo = coeffs.sigma_fn().bounds_on(0.0, t_max).0;
    checks.push(CheckResult {
        name: "sigma_positive",
        severity: if sigma_lo > 0.0 { Severity::Pass } else { Severity::Error },
        detail: format!("inf sigma on [0, {t_max}] = {sigma_lo}"),
        certificate: Some(Certificate {
            value: sigma_lo,
            error_estimate: 0.0,
        }),
    });

    for (name, f) in [
        ("a_tilde_nonnegative", coeffs.a_tilde_fn()),
        ("beta_nonnegative", coeffs.beta_fn()),
    ] {
        let lo = f.bounds_on(0.0, t_max).0;
        checks.push(CheckResult {
            name,
            severity: if lo >= 0.0 { Severity::Pass } else { Severity::Error },
            detail: format!("infimum {lo}"),
            certificate: None,
        });
    }

    let beta_pos = coeffs.beta_strictly_positive();
    checks.push(CheckResult {
        name: "beta_strictly_positive",
        severity: if beta_pos { Severity::Pass } else { Severity::Warning },
        detail: if beta_pos {
            "inf beta > 0".into()
        } else {
            "beta touches 0: transforms are still computed but the closed-form transition law is not guaranteed"
                .into()
        },
        certificate: None,
    });

    let ((c1, e1), (c2, e2)) = nu.certificates(CERTIFICATE_TOL);
    let summability = Certificate {
        value: c1,
        error_estimate: e1,
    };
    let sqrt_summability = Certificate {
        value: c2,
        error_estimate: e2,
    };
    let index = nu.small_jump_index();
    let small_jump_index = index.is_finite().then_some(index);
    let idx_text = small_jump_index.map_or("none".to_string(), |r| r.to_string());

    let perm_ok = summability.is_finite() && index < 1.0;
    checks.push(CheckResult {
        name: "summability",
        severity: if perm_ok { Severity::Pass } else { Severity::Error },
        detail: format!("integral of (y ^ 1) nu(dy); small-jump index {idx_text}"),
        certificate: Some(summability),
    });

    let restrictive_ok = sqrt_summability.is_finite() && index < 0.5;
    checks.push(CheckResult {
        name: "sqrt_summability",
        severity: if restrictive_ok { Severity::Pass } else { Severity::Warning },
        detail: if restrictive_ok {
            format!("integral of (sqrt(y) ^ 1) nu(dy); small-jump index {idx_text}")
        } else {
            format!("diverges (small-jump index {idx_text} >= 1/2): exact samplers disabled")
        },
        certificate: Some(sqrt_summability),
    });

    ValidationReport {
        checks,
        jump_variant: nu.variant(),
        summability,
        sqrt_summability,
        beta_strictly_positive: beta_pos,
        exact_samplers_available: perm_ok && restrictive_ok && sigma_lo > 0.0,
        small_jump_index,
    }
}

/// [`validate`], failing on the first hard error.
pub fn validate_strict(coeffs: &CoefficientSet, nu: &JumpMeasure) -> Result<ValidationReport> {
    let r = validate(coeffs, nu);
    r.status()?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TimeFunction;

    fn coeffs(sigma: TimeFunction) -> CoefficientSet {
        CoefficientSet::new(
            TimeFunction::constant(1.0),
            TimeFunction::constant(1.0),
            TimeFunction::constant(1.0),
            sigma,
            0.5,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn single_atom_passes_everything() {
        let r = validate(&coeffs(TimeFunction::constant(1.0)), &JumpMeasure::atoms(vec![(1.0, 2.0)]).unwrap());
        assert!(r.checks.iter().all(CheckResult::passed));
        assert_eq!(r.summability.value, 2.0);
        assert_eq!(r.sqrt_summability.value, 2.0);
        assert!(r.require_exact_samplers().is_ok());
    }

    #[test]
    fn zero_sigma_is_hard_error() {
        let sigma = TimeFunction::piecewise_constant(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let r = validate(&coeffs(sigma), &JumpMeasure::none());
        assert!(matches!(r.status(), Err(Error::NonPositiveSigma { .. })));
    }

    #[test]
    fn rho_07_disables_exact_samplers() {
        let nu = JumpMeasure::tempered_power(1.0, 0.7, 1.0).unwrap();
        let r = validate(&coeffs(TimeFunction::constant(1.0)), &nu);
        assert!(r.status().is_ok());
        assert!(!r.exact_samplers_available);
        assert!(matches!(
            r.require_exact_samplers(),
            Err(Error::RestrictiveConditionViolated { rho }) if rho == 0.7
        ));
    }

    #[test]
    fn rho_above_one_violates_summability() {
        let nu = JumpMeasure::tempered_power(1.0, 1.2, 1.0).unwrap();
        let r = validate(&coeffs(TimeFunction::constant(1.0)), &nu);
        assert_eq!(r.status(), Err(Error::PermanentConditionViolated));
    }

    #[test]
    fn validation_is_deterministic() {
        let nu = JumpMeasure::tempered_power(0.5, 0.4, 2.0).unwrap();
        let c = coeffs(TimeFunction::constant(1.0));
        assert_eq!(validate(&c, &nu), validate(&c, &nu));
    }
}

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_singular, integrate_to_infinity};

/// Config-level description of the jump measure `ν` on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpMeasureSpec {
    /// Finitely many atoms given as `[y, weight]` pairs.
    Atoms { atoms: Vec<[f64; 2]> },
    /// `scale * y^-(1 + rho) * exp(-rate * y)`.
    TemperedPower { scale: f64, rho: f64, rate: f64 },
    /// `scale * rate * exp(-rate * y)`: total mass `scale`.
    Exponential { scale: f64, rate: f64 },
    /// No jumps.
    None,
}

/// A user supplied Lévy density.
#[derive(Clone)]
pub struct CustomDensity(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomDensity(..)")
    }
}

#[derive(Debug, Clone)]
pub enum DensityShape {
    TemperedPower { scale: f64, rho: f64, rate: f64 },
    Custom(CustomDensity),
}

/// An absolutely continuous `ν`, restricted to `(cutoff, ∞)`.
///
/// `rho` is the declared small-jump index: `density(y) ~ c y^-(1 + rho)`
/// as `y ↓ 0`. It alone decides integrability at 0.
#[derive(Debug, Clone)]
pub struct DensityMeasure {
    shape: DensityShape,
    rho: f64,
    cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpVariant {
    FiniteDiscrete,
    FiniteActivityDensity,
    InfiniteActivityDensity,
}

#[derive(Debug, Clone)]
pub enum JumpMeasure {
    /// `(y, weight)` atoms with `y > 0`, `weight > 0`.
    Atoms(Vec<(f64, f64)>),
    Density(DensityMeasure),
}

/// One level of a truncation schedule: jumps at or below `delta` are
/// discarded, losing `sqrt_mass = ∫_{(0,δ]} √y ν(dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationStep {
    pub level: u32,
    pub delta: f64,
    pub sqrt_mass: f64,
}

impl DensityMeasure {
    pub fn new(shape: DensityShape, rho: f64) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::InvalidParameter("small-jump index must be finite".into()));
        }
        if let DensityShape::TemperedPower { scale, rho: r, rate } = &shape {
            if !(*scale > 0.0) || !(*rate > 0.0) || !scale.is_finite() || !rate.is_finite() {
                return Err(Error::InvalidParameter(
                    "tempered power density needs scale > 0 and rate > 0".into(),
                ));
            }
            if *r != rho {
                return Err(Error::InvalidParameter(
                    "declared index must match the tempered power exponent".into(),
                ));
            }
        }
        Ok(Self {
            shape,
            rho,
            cutoff: 0.0,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn shape(&self) -> &DensityShape {
        &self.shape
    }

    /// Density at `y`; zero at or below the cutoff.
    pub fn density(&self, y: f64) -> f64 {
        if y <= self.cutoff || y <= 0.0 {
            return 0.0;
        }
        match &self.shape {
            DensityShape::TemperedPower { scale, rho, rate } => {
                scale * (-(1.0 + rho) * y.ln() - rate * y).exp()
            }
            DensityShape::Custom(f) => (f.0)(y),
        }
    }

    /// `∫_{(lo, hi]} g(y) density(y) dy` where `g(y) ~ y^order` near 0.
    fn integral<G: Fn(f64) -> f64>(
        &self,
        g: &G,
        order: f64,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<(f64, f64)> {
        let lo = lo.max(self.cutoff).max(0.0);
        if hi <= lo {
            return Ok((0.0, 0.0));
        }
        let h = |y: f64| {
            let v = g(y) * self.density(y);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let split = 1.0f64.max(lo).min(hi);
        let mut value = 0.0;
        let mut err = 0.0;
        let mut converged = true;
        if lo == 0.0 {
            let exponent = order - 1.0 - self.rho;
            if exponent <= -1.0 {
                return Err(Error::NonIntegrable(format!(
                    "integrand ~ y^{order} against density with index {}",
                    self.rho
                )));
            }
            let r = integrate_singular(h, 0.0, split, exponent, tol / 2.0)?;
            value += r.value;
            err += r.error_estimate;
            converged &= r.converged;
        } else if split > lo {
            // log scale absorbs power-law steepness just above the cutoff
            let (a, b) = (lo.ln(), split.ln());
            let breaks: Vec<f64> = {
                let n = ((b - a) / 2.0).ceil() as usize;
                (1..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
            };
            let r = crate::numerics::integrate_with_breakpoints(
                |x: f64| {
                    let y = x.exp();
                    h(y) * y
                },
                a,
                b,
                &breaks,
                tol / 2.0,
            );
            value += r.value;
            err += r.error_estimate;
            converged &= r.converged;
        }
        if hi > split {
            let r = if hi.is_infinite() {
                integrate_to_infinity(h, split, tol / 2.0)
            } else {
                integrate(h, split, hi, tol / 2.0)
            };
            value += r.value;
            err += r.error_estimate;
            converged &= r.converged;
        }
        if !converged {
            err = err.max(tol);
        }
        Ok((value, err))
    }
}

impl JumpMeasure {
    pub fn none() -> Self {
        JumpMeasure::Atoms(Vec::new())
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(y, w) in &atoms {
            if !(y > 0.0) || !(w > 0.0) || !y.is_finite() || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atoms need y > 0 and weight > 0, got ({y}, {w})"
                )));
            }
        }
        Ok(JumpMeasure::Atoms(atoms))
    }

    /// `scale * y^-(1 + rho) * exp(-rate * y)`.
    pub fn tempered_power(scale: f64, rho: f64, rate: f64) -> Result<Self> {
        Ok(JumpMeasure::Density(DensityMeasure::new(
            DensityShape::TemperedPower { scale, rho, rate },
            rho,
        )?))
    }

    pub fn custom_density<F>(density: F, rho: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Ok(JumpMeasure::Density(DensityMeasure::new(
            DensityShape::Custom(CustomDensity(Arc::new(density))),
            rho,
        )?))
    }

    pub fn variant(&self) -> JumpVariant {
        match self {
            JumpMeasure::Atoms(_) => JumpVariant::FiniteDiscrete,
            JumpMeasure::Density(d) if d.cutoff > 0.0 || d.rho < 0.0 => {
                JumpVariant::FiniteActivityDensity
            }
            JumpMeasure::Density(_) => JumpVariant::InfiniteActivityDensity,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, JumpMeasure::Atoms(a) if a.is_empty())
    }

    /// Small-jump index: `-∞` for atoms.
    pub fn small_jump_index(&self) -> f64 {
        match self {
            JumpMeasure::Atoms(_) => f64::NEG_INFINITY,
            JumpMeasure::Density(d) if d.cutoff > 0.0 => f64::NEG_INFINITY,
            JumpMeasure::Density(d) => d.rho,
        }
    }

    /// `∫ g dν` where `g(y) ~ y^order` as `y ↓ 0`; returns `(value, error)`.
    pub fn integral<G: Fn(f64) -> f64>(&self, g: G, order: f64, tol: f64) -> Result<(f64, f64)> {
        self.integral_over(g, order, 0.0, f64::INFINITY, tol)
    }

    /// `∫_{(lo, hi]} g dν`.
    pub fn integral_over<G: Fn(f64) -> f64>(
        &self,
        g: G,
        order: f64,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<(f64, f64)> {
        match self {
            JumpMeasure::Atoms(atoms) => Ok((
                atoms
                    .iter()
                    .filter(|(y, _)| *y > lo && *y <= hi)
                    .map(|(y, w)| w * g(*y))
                    .sum(),
                0.0,
            )),
            JumpMeasure::Density(d) => d.integral(&g, order, lo, hi, tol),
        }
    }

    /// `ν((lo, ∞))`, infinite for an untruncated infinite-activity density
    /// when `lo = 0`.
    pub fn mass_above(&self, lo: f64, tol: f64) -> Result<f64> {
        if lo <= 0.0 && self.variant() == JumpVariant::InfiniteActivityDensity {
            return Ok(f64::INFINITY);
        }
        Ok(self.integral_over(|_| 1.0, 0.0, lo, f64::INFINITY, tol)?.0)
    }

    /// `∫(y ∧ 1) ν(dy)` and `∫(√y ∧ 1) ν(dy)` with error estimates; `+∞`
    /// when the declared index makes the integral diverge.
    pub fn certificates(&self, tol: f64) -> ((f64, f64), (f64, f64)) {
        let cert = |power: f64| -> (f64, f64) {
            let small = self.integral_over(|y: f64| y.powf(power), power, 0.0, 1.0, tol / 2.0);
            let large = self.integral_over(|_| 1.0, 0.0, 1.0, f64::INFINITY, tol / 2.0);
            match (small, large) {
                (Ok(s), Ok(l)) => (s.0 + l.0, s.1 + l.1),
                _ => (f64::INFINITY, 0.0),
            }
        };
        (cert(1.0), cert(0.5))
    }

    /// `ν` restricted to `(delta, ∞)` and the discarded `∫_{(0,δ]} √y ν(dy)`.
    pub fn truncate(&self, delta: f64, tol: f64) -> Result<(JumpMeasure, f64)> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidDelta(delta));
        }
        match self {
            JumpMeasure::Atoms(atoms) => {
                let lost = atoms
                    .iter()
                    .filter(|(y, _)| *y <= delta)
                    .map(|(y, w)| w * y.sqrt())
                    .sum();
                let kept = atoms.iter().copied().filter(|(y, _)| *y > delta).collect();
                Ok((JumpMeasure::Atoms(kept), lost))
            }
            JumpMeasure::Density(d) => {
                let lost = self.sqrt_mass_below(delta, tol)?;
                let mut t = d.clone();
                t.cutoff = d.cutoff.max(delta);
                Ok((JumpMeasure::Density(t), lost))
            }
        }
    }

    /// `∫_{(0,δ]} √y ν(dy)`.
    pub fn sqrt_mass_below(&self, delta: f64, tol: f64) -> Result<f64> {
        if self.small_jump_index() >= 0.5 {
            return Err(Error::RestrictiveConditionViolated {
                rho: self.small_jump_index(),
            });
        }
        Ok(self.integral_over(f64::sqrt, 0.5, 0.0, delta, tol)?.0)
    }

    /// Truncation levels `δ_1 > δ_2 > …` with
    /// `0 < ∫_{(0,δ_n]} √y ν(dy) < 4^-n` and each level discarding at most a
    /// quarter of the previous level's √y-mass. Starts from `δ_0 = 1`.
    pub fn truncation_schedule(&self, levels: u32) -> Result<Vec<TruncationStep>> {
        if self.variant() != JumpVariant::InfiniteActivityDensity {
            return Err(Error::InvalidParameter(
                "truncation schedule needs an infinite-activity density".into(),
            ));
        }
        let diag = |delta: f64| -> Result<f64> {
            let scale = self.sqrt_mass_below(delta, 1e-6)?.abs().max(1e-300);
            self.sqrt_mass_below(delta, scale * 1e-10)
        };
        let mut steps = Vec::with_capacity(levels as usize);
        let mut prev_delta = 1.0;
        let mut prev_mass = diag(1.0)?;
        for n in 1..=levels {
            let target = (0.25f64.powi(n as i32)).min(prev_mass / 4.0) * (1.0 - 1e-6);
            // bracket: diag(lo) <= target < diag(hi)
            let mut hi = prev_delta;
            let mut lo = prev_delta;
            let mut lo_mass = prev_mass;
            while lo_mass > target {
                hi = lo;
                lo *= 1e-4;
                if lo < 1e-300 {
                    return Err(Error::InvalidParameter(
                        "truncation level underflows; schedule too deep for this measure".into(),
                    ));
                }
                lo_mass = diag(lo)?;
            }
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if mid <= lo || mid >= hi || hi / lo < 1.0 + 1e-12 {
                    break;
                }
                let m = diag(mid)?;
                if m <= target {
                    lo = mid;
                    lo_mass = m;
                } else {
                    hi = mid;
                }
            }
            steps.push(TruncationStep {
                level: n,
                delta: lo,
                sqrt_mass: lo_mass,
            });
            prev_delta = lo;
            prev_mass = lo_mass;
        }
        Ok(steps)
    }
}

impl TryFrom<&JumpMeasureSpec> for JumpMeasure {
    type Error = Error;

    fn try_from(spec: &JumpMeasureSpec) -> Result<Self> {
        match spec {
            JumpMeasureSpec::Atoms { atoms } => {
                JumpMeasure::atoms(atoms.iter().map(|a| (a[0], a[1])).collect())
            }
            JumpMeasureSpec::TemperedPower { scale, rho, rate } => {
                JumpMeasure::tempered_power(*scale, *rho, *rate)
            }
            JumpMeasureSpec::Exponential { scale, rate } => {
                JumpMeasure::tempered_power(scale * rate, -1.0, *rate)
            }
            JumpMeasureSpec::None => Ok(JumpMeasure::none()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Lower incomplete gamma by its power series, independent of quadrature.
    pub(crate) fn lower_incomplete_gamma(s: f64, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0; // (-x)^k / k!
        for k in 0..200 {
            sum += term / (s + k as f64);
            term *= -x / (k as f64 + 1.0);
            if term.abs() < 1e-300 {
                break;
            }
        }
        x.powf(s) * sum
    }

    #[test]
    fn atoms_integral_is_exact_sum() {
        let nu = JumpMeasure::atoms(vec![(1.0, 2.0), (3.0, 1.0)]).unwrap();
        let (v, e) = nu.integral(|y| y, 1.0, 1e-8).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(e, 0.0);
        let unit = JumpMeasure::atoms(vec![(1.0, 1.0)]).unwrap();
        let (v, _) = unit.integral(|y: f64| -(-y).exp_m1(), 1.0, 1e-8).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn exponential_density_mean_is_one() {
        let nu = JumpMeasure::try_from(&JumpMeasureSpec::Exponential { scale: 1.0, rate: 1.0 }).unwrap();
        let (v, e) = nu.integral(|y| y, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        assert!(e <= 1e-10);
        assert_eq!(nu.variant(), JumpVariant::FiniteActivityDensity);
    }

    #[test]
    fn certificates_single_atom() {
        let nu = JumpMeasure::atoms(vec![(1.0, 2.0)]).unwrap();
        let ((c1, _), (c2, _)) = nu.certificates(1e-8);
        assert_eq!((c1, c2), (2.0, 2.0));
    }

    #[test]
    fn certificates_tempered_rho_04_match_series_oracle() {
        let nu = JumpMeasure::tempered_power(1.0, 0.4, 1.0).unwrap();
        assert_eq!(nu.variant(), JumpVariant::InfiniteActivityDensity);
        let ((c1, _), (c2, _)) = nu.certificates(1e-9);
        // ∫_0^1 y^{-0.4} e^{-y} + ∫_1^∞ y^{-1.4} e^{-y}
        // = γ(0.6, 1) + [Γ(-0.4, 1)] ; the tail is checked by direct quadrature below.
        let tail = crate::numerics::integrate_to_infinity(|y: f64| y.powf(-1.4) * (-y).exp(), 1.0, 1e-12).value;
        assert!((c1 - (lower_incomplete_gamma(0.6, 1.0) + tail)).abs() < 1e-8, "{c1}");
        assert!((c2 - (lower_incomplete_gamma(0.1, 1.0) + tail)).abs() < 1e-7, "{c2}");
    }

    #[test]
    fn certificates_rho_07_diverge_for_sqrt() {
        let nu = JumpMeasure::tempered_power(1.0, 0.7, 1.0).unwrap();
        let ((c1, _), (c2, _)) = nu.certificates(1e-9);
        assert!(c1.is_finite());
        assert!(c2.is_infinite());
    }

    #[test]
    fn integral_rejects_nonintegrable_order() {
        let nu = JumpMeasure::tempered_power(1.0, 0.7, 1.0).unwrap();
        assert!(matches!(nu.integral(|_| 1.0, 0.0, 1e-8), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn truncate_atom_above_delta_is_unchanged() {
        let nu = JumpMeasure::atoms(vec![(1.0, 1.0)]).unwrap();
        let (t, lost) = nu.truncate(0.5, 1e-9).unwrap();
        assert_eq!(lost, 0.0);
        assert!(matches!(t, JumpMeasure::Atoms(ref a) if a == &vec![(1.0, 1.0)]));
        assert!(matches!(nu.truncate(0.0, 1e-9), Err(Error::InvalidDelta(_))));
        assert!(matches!(nu.truncate(-1.0, 1e-9), Err(Error::InvalidDelta(_))));
    }

    #[test]
    fn truncated_density_mass_is_finite() {
        let nu = JumpMeasure::tempered_power(1.0, 0.4, 1.0).unwrap();
        let (t, lost) = nu.truncate(1e-3, 1e-10).unwrap();
        assert_eq!(t.variant(), JumpVariant::FiniteActivityDensity);
        assert!((lost - lower_incomplete_gamma(0.1, 1e-3)).abs() < 1e-9);
        let m = t.mass_above(0.0, 1e-10).unwrap();
        // ∫_{1e-3}^∞ y^{-1.4} e^{-y}: compare with direct quadrature on a log scale
        let q = crate::numerics::integrate(|x: f64| { let y = x.exp(); y.powf(-0.4) * (-y).exp() }, (1e-3f64).ln(), 4.0, 1e-12).value;
        assert!((m - q).abs() / q < 1e-6, "{m} vs {q}");
    }

    #[test]
    fn schedule_meets_choice_bound() {
        let nu = JumpMeasure::tempered_power(1.0, 0.4, 1.0).unwrap();
        let steps = nu.truncation_schedule(3).unwrap();
        let last = steps[2];
        let oracle = lower_incomplete_gamma(0.1, last.delta);
        assert!(oracle <= 0.25f64.powi(3), "{oracle}");
        assert!((oracle - last.sqrt_mass).abs() < 1e-9 * 0.25f64.powi(3));
        for w in steps.windows(2) {
            assert!(w[1].delta < w[0].delta);
            assert!(w[0].sqrt_mass / w[1].sqrt_mass >= 4.0);
        }
    }
}

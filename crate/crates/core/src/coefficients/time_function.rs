use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Config-level description of a time function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunctionSpec {
    Constant {
        value: f64,
    },
    /// `values[j]` holds on `[knots[j], knots[j+1])`; the last value extends
    /// to the horizon.
    PiecewiseConstant {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// Linear interpolation between `(knots[j], values[j])`, constant outside.
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// `max(0, offset + amplitude * sin(frequency * t + phase))`.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Constant(f64),
    PiecewiseConstant {
        knots: Vec<f64>,
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

/// A deterministic, right-continuous, locally bounded function of time.
///
/// Integrals are exact (closed form) for every representation, which keeps
/// the kernel primitives cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFunction {
    spec: TimeFunctionSpec,
    repr: Repr,
}

fn check_grid(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.is_empty() || knots.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "knots and values must be non-empty and of equal length ({} vs {})",
            knots.len(),
            values.len()
        )));
    }
    if knots.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("knots and values must be finite".into()));
    }
    if knots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
    }
    Ok(())
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        Self::try_from(TimeFunctionSpec::Constant { value }).expect("finite constant")
    }

    pub fn piecewise_constant(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::try_from(TimeFunctionSpec::PiecewiseConstant { knots, values })
    }

    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::try_from(TimeFunctionSpec::PiecewiseLinear { knots, values })
    }

    pub fn sinusoid(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        Self::try_from(TimeFunctionSpec::Sinusoid {
            offset,
            amplitude,
            frequency,
            phase,
        })
    }

    pub fn spec(&self) -> &TimeFunctionSpec {
        &self.spec
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Constant(c) => *c,
            Repr::PiecewiseConstant { knots, values, .. } => values[segment(knots, t)],
            Repr::PiecewiseLinear { knots, values, .. } => {
                if t <= knots[0] {
                    return values[0];
                }
                let j = segment(knots, t);
                if j + 1 == knots.len() {
                    return values[j];
                }
                let w = (t - knots[j]) / (knots[j + 1] - knots[j]);
                values[j] + w * (values[j + 1] - values[j])
            }
            Repr::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => (offset + amplitude * (frequency * t + phase).sin()).max(0.0),
        }
    }

    /// `∫_lo^hi f(v) dv`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match &self.repr {
            Repr::Constant(c) => c * (hi - lo),
            _ => self.antiderivative(hi) - self.antiderivative(lo),
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Constant(c) => c * t,
            Repr::PiecewiseConstant {
                knots,
                values,
                cumulative,
            } => {
                let j = segment(knots, t);
                cumulative[j] + values[j] * (t - knots[j])
            }
            Repr::PiecewiseLinear {
                knots,
                values,
                cumulative,
            } => {
                if t <= knots[0] {
                    return values[0] * (t - knots[0]);
                }
                let j = segment(knots, t);
                let dt = t - knots[j];
                if j + 1 == knots.len() {
                    return cumulative[j] + values[j] * dt;
                }
                let slope = (values[j + 1] - values[j]) / (knots[j + 1] - knots[j]);
                cumulative[j] + values[j] * dt + 0.5 * slope * dt * dt
            }
            Repr::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => clipped_sine_antiderivative(*offset, *amplitude, *frequency, *phase, t),
        }
    }

    /// Interior non-smooth points (knots).
    pub fn knots(&self) -> &[f64] {
        match &self.repr {
            Repr::PiecewiseConstant { knots, .. } | Repr::PiecewiseLinear { knots, .. } => knots,
            _ => &[],
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &self.repr {
            Repr::Constant(c) => Some(*c),
            Repr::PiecewiseConstant { values, .. } | Repr::PiecewiseLinear { values, .. }
                if values.iter().all(|v| *v == values[0]) =>
            {
                Some(values[0])
            }
            _ => None,
        }
    }

    /// Lower and upper bounds of `f` on `[lo, hi]`. Exact for piecewise
    /// representations, global (over all t) for the sinusoid.
    pub fn bounds_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Constant(c) => (*c, *c),
            Repr::PiecewiseConstant { knots, values, .. } => {
                let (a, b) = (segment(knots, lo), segment(knots, hi));
                values[a..=b]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(m, x), v| (m.min(*v), x.max(*v)))
            }
            Repr::PiecewiseLinear { knots, .. } => {
                let mut pts = vec![self.eval(lo), self.eval(hi)];
                pts.extend(knots.iter().filter(|k| **k > lo && **k < hi).map(|k| self.eval(*k)));
                pts.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(m, x), v| (m.min(*v), x.max(*v)))
            }
            Repr::Sinusoid {
                offset, amplitude, ..
            } => (
                (offset - amplitude.abs()).max(0.0),
                (offset + amplitude.abs()).max(0.0),
            ),
        }
    }

    /// Length scale on which the function varies smoothly, if bounded.
    pub fn smooth_scale(&self) -> Option<f64> {
        match &self.repr {
            Repr::Sinusoid { frequency, .. } if *frequency != 0.0 => Some(1.0 / frequency.abs()),
            _ => None,
        }
    }
}

impl TryFrom<TimeFunctionSpec> for TimeFunction {
    type Error = Error;

    fn try_from(spec: TimeFunctionSpec) -> Result<Self> {
        let repr = match &spec {
            TimeFunctionSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("constant must be finite".into()));
                }
                Repr::Constant(*value)
            }
            TimeFunctionSpec::PiecewiseConstant { knots, values } => {
                check_grid(knots, values)?;
                let mut cumulative = vec![0.0; knots.len()];
                for j in 1..knots.len() {
                    cumulative[j] = cumulative[j - 1] + values[j - 1] * (knots[j] - knots[j - 1]);
                }
                Repr::PiecewiseConstant {
                    knots: knots.clone(),
                    values: values.clone(),
                    cumulative,
                }
            }
            TimeFunctionSpec::PiecewiseLinear { knots, values } => {
                check_grid(knots, values)?;
                let mut cumulative = vec![0.0; knots.len()];
                for j in 1..knots.len() {
                    cumulative[j] = cumulative[j - 1]
                        + 0.5 * (values[j - 1] + values[j]) * (knots[j] - knots[j - 1]);
                }
                Repr::PiecewiseLinear {
                    knots: knots.clone(),
                    values: values.clone(),
                    cumulative,
                }
            }
            TimeFunctionSpec::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                if ![offset, amplitude, frequency, phase].iter().all(|x| x.is_finite()) {
                    return Err(Error::InvalidParameter("sinusoid parameters must be finite".into()));
                }
                if *frequency == 0.0 {
                    // degenerate: constant
                    Repr::Constant((offset + amplitude * phase.sin()).max(0.0))
                } else {
                    Repr::Sinusoid {
                        offset: *offset,
                        amplitude: *amplitude,
                        frequency: *frequency,
                        phase: *phase,
                    }
                }
            }
        };
        Ok(Self { spec, repr })
    }
}

/// Index `j` of the segment `[knots[j], knots[j+1])` containing `t`
/// (0 for `t < knots[0]`).
fn segment(knots: &[f64], t: f64) -> usize {
    knots.partition_point(|k| *k <= t).saturating_sub(1)
}

/// Antiderivative of `max(0, c + a sin(w t + phi))` vanishing at `t = 0`.
fn clipped_sine_antiderivative(c: f64, a: f64, w: f64, phi: f64, t: f64) -> f64 {
    // Rewrite with a nonnegative amplitude and positive frequency; both are
    // phase shifts: a sin(x) = |a| sin(x + π), sin(-|w|t + φ) = sin(|w|t + π - φ).
    let (a, phi) = if a < 0.0 { (-a, phi + PI) } else { (a, phi) };
    let (w, phi) = if w < 0.0 { (-w, PI - phi) } else { (w, phi) };
    let g = |theta: f64| phase_antiderivative(c, a, theta);
    (g(w * t + phi) - g(phi)) / w
}

/// `∫_{θ0}^{θ} max(0, c + a sin x) dx` for a fixed reference, `a >= 0`.
fn phase_antiderivative(c: f64, a: f64, theta: f64) -> f64 {
    if c >= a {
        return c * theta - a * theta.cos();
    }
    if c <= -a {
        return 0.0;
    }
    // Positive on (x*, π - x*) modulo 2π, x* = asin(-c/a).
    let xs = (-c / a).asin();
    let xe = PI - xs;
    let arc = |x: f64| c * (x - xs) - a * (x.cos() - xs.cos());
    let full = arc(xe);
    let period = 2.0 * PI;
    let k = ((theta - xs) / period).floor();
    let r = theta - xs - k * period;
    let part = if r <= xe - xs { arc(xs + r) } else { full };
    k * full + part
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    #[test]
    fn piecewise_constant_is_right_continuous() {
        let f = TimeFunction::piecewise_constant(vec![0.0, 1.0, 2.0], vec![3.0, 5.0, 7.0]).unwrap();
        assert_eq!(f.eval(0.999_999), 3.0);
        assert_eq!(f.eval(1.0), 5.0);
        assert_eq!(f.eval(2.0), 7.0);
        assert_eq!(f.eval(10.0), 7.0);
        assert!((f.integral(0.5, 2.5) - (1.5 + 5.0 + 3.5)).abs() < 1e-14);
    }

    #[test]
    fn piecewise_linear_integral_matches_trapezoid() {
        let f = TimeFunction::piecewise_linear(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(2.0), 2.5);
        assert_eq!(f.eval(4.0), 2.0);
        let q = integrate(|t| f.eval(t), 0.2, 3.7, 1e-12);
        assert!((f.integral(0.2, 3.7) - q.value).abs() < 1e-10);
    }

    #[test]
    fn clipped_sinusoid_integral_matches_quadrature() {
        for (c, a, w, phi) in [(0.5, 1.0, 3.0, 0.3), (2.0, 1.0, 1.0, 0.0), (0.0, -1.0, 2.5, 1.0), (-0.3, 1.0, -1.7, 0.2)] {
            let f = TimeFunction::sinusoid(c, a, w, phi).unwrap();
            let breaks: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
            let q = crate::numerics::integrate_with_breakpoints(|t| f.eval(t), 0.1, 9.3, &breaks, 1e-11);
            assert!(
                (f.integral(0.1, 9.3) - q.value).abs() < 1e-8,
                "({c},{a},{w},{phi}): {} vs {}",
                f.integral(0.1, 9.3),
                q.value
            );
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeFunction::piecewise_constant(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeFunction::piecewise_linear(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn bounds_on_subinterval() {
        let f = TimeFunction::piecewise_constant(vec![0.0, 1.0, 2.0], vec![3.0, 0.5, 7.0]).unwrap();
        assert_eq!(f.bounds_on(0.0, 0.9), (3.0, 3.0));
        assert_eq!(f.bounds_on(0.5, 1.5), (0.5, 3.0));
        assert_eq!(f.bounds_on(0.0, 5.0), (0.5, 7.0));
    }
}

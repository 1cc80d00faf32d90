//! Exact samplers for the transition law `K_{s,t}(y,·) = H_{s,t}(y,·) ∗ I_{s,t} ∗ Ĩ_{s,t}`.
//!
//! * `H_{s,t}(y,·)` is a Poisson mixture of Gamma laws: `M ~ Poisson(yγ)`,
//!   then `Gamma(M, p)` (the point mass at 0 when `M = 0`).
//! * `I_{s,t}` is sampled on a grid `s = r₀ < … < r_n = t`: each cell
//!   contributes `Gamma(α_j, p(r_{j−1}, r_j))` immigrants, which are then
//!   carried to `t` by `H_{r_j,t}`. When `α` is constant on every cell the
//!   cell law is exact, so grids always contain the knots of `a` and `σ`.
//! * `Ĩ_{s,t}` is the sum of `H_{T_i,t}(Y_i)` over the points of a Poisson
//!   random measure with intensity `ã(v) dv ν(dy)` on `(s,t] × (δ,∞)`.

use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, JumpMeasure, JumpVariant};
use crate::error::{Error, Result};
use crate::kernels::{KernelEngine, KernelValue, LaplaceEval};
use crate::numerics::{exponential, gamma_sample, inhomogeneous_poisson_times, integrate, poisson_sample, uniform};

const MARK_CELLS: usize = 2048;
const MARK_TAIL_MASS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    H,
    I,
    Itilde,
    K,
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" | "h" => Ok(Component::H),
            "I" | "i" => Ok(Component::I),
            "Itilde" | "itilde" | "I~" => Ok(Component::Itilde),
            "K" | "k" => Ok(Component::K),
            other => Err(Error::InvalidParameter(format!(
                "unknown component {other:?} (expected H, I, Itilde or K)"
            ))),
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Component::H => "H",
            Component::I => "I",
            Component::Itilde => "Itilde",
            Component::K => "K",
        })
    }
}

/// Discretization controls of the exact samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerControls {
    /// Minimum number of cells of the immigration grid on `(s, t]`.
    pub i_cells: usize,
    /// Jump truncation level; `None` picks the default.
    pub delta: Option<f64>,
    /// Level of the truncation schedule used for the default `δ`.
    pub truncation_level: u32,
    /// Cap on the expected number of jumps over the horizon.
    pub jump_budget: f64,
}

impl Default for SamplerControls {
    fn default() -> Self {
        Self {
            i_cells: 64,
            delta: None,
            truncation_level: 8,
            jump_budget: 1e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpPoint {
    pub time: f64,
    pub size: f64,
}

/// Points of the Poisson random measure in time order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrmRealization {
    pub points: Vec<JumpPoint>,
    pub delta: f64,
}

#[derive(Debug, Clone)]
struct TailCell {
    start: f64,
    rate: f64,
}

#[derive(Debug, Clone)]
enum MarkTable {
    Atoms {
        sizes: Vec<f64>,
        alias: WeightedAliasIndex<f64>,
    },
    Cells {
        /// `edges[0]` may be 0; then cell 0 is a pure power law.
        edges: Vec<f64>,
        /// Local power `κ + 1` of the density on each cell.
        power: Vec<f64>,
        alias: WeightedAliasIndex<f64>,
        /// Exponential tail beyond the last edge; last alias index.
        tail: Option<TailCell>,
    },
}

/// Draws jump sizes from `ν / ν((0,∞))` for a finite measure.
#[derive(Debug, Clone)]
pub struct MarkSampler {
    table: MarkTable,
    mass: f64,
}

impl MarkSampler {
    pub fn new(nu: &JumpMeasure, tol: f64) -> Result<Option<Self>> {
        match nu {
            JumpMeasure::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Ok(None);
                }
                let weights: Vec<f64> = atoms.iter().map(|a| a.1).collect();
                let mass = weights.iter().sum();
                let alias = WeightedAliasIndex::new(weights)
                    .map_err(|e| Error::InvalidParameter(format!("atom weights: {e}")))?;
                Ok(Some(Self {
                    table: MarkTable::Atoms {
                        sizes: atoms.iter().map(|a| a.0).collect(),
                        alias,
                    },
                    mass,
                }))
            }
            JumpMeasure::Density(d) => {
                if nu.variant() == JumpVariant::InfiniteActivityDensity {
                    return Err(Error::InvalidParameter(
                        "mark sampling needs a finite measure; truncate first".into(),
                    ));
                }
                let mass = nu.mass_above(0.0, tol)?;
                if !(mass > 0.0) {
                    return Ok(None);
                }
                let lo = d.cutoff();
                let mut y_max = (2.0 * lo).max(1.0);
                let mut tail_mass = nu.integral_over(|_| 1.0, 0.0, y_max, f64::INFINITY, tol * 1e-3)?.0;
                while tail_mass > MARK_TAIL_MASS * mass {
                    y_max *= 2.0;
                    if y_max > 1e300 {
                        return Err(Error::InvalidParameter("jump density tail does not decay".into()));
                    }
                    tail_mass = nu.integral_over(|_| 1.0, 0.0, y_max, f64::INFINITY, tol * 1e-3)?.0;
                }
                let mut edges = Vec::with_capacity(MARK_CELLS + 2);
                let mut weights = Vec::with_capacity(MARK_CELLS + 2);
                let mut power = Vec::with_capacity(MARK_CELLS + 2);
                let first = if lo > 0.0 {
                    lo
                } else {
                    // finite activity without cutoff: power law on (0, first]
                    let first = y_max * 1e-12;
                    edges.push(0.0);
                    weights.push(nu.integral_over(|_| 1.0, 0.0, 0.0, first, tol * 1e-3)?.0);
                    power.push(-d.rho());
                    first
                };
                let ratio = (y_max / first).ln() / MARK_CELLS as f64;
                let grid: Vec<f64> = (0..=MARK_CELLS)
                    .map(|i| if i == MARK_CELLS { y_max } else { first * (ratio * i as f64).exp() })
                    .collect();
                for w in grid.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    let f = |y: f64| d.density(y);
                    let (fl, fr) = (f(l * (1.0 + 1e-12)), f(r));
                    let rough = f(0.5 * (l + r)) * (r - l);
                    let m = integrate(f, l, r, (1e-12 * rough).max(f64::MIN_POSITIVE)).value;
                    let kappa = if fl > 0.0 && fr > 0.0 && fl.is_finite() && fr.is_finite() {
                        (fr / fl).ln() / (r / l).ln()
                    } else {
                        0.0
                    };
                    edges.push(l);
                    weights.push(m.max(0.0));
                    power.push(kappa + 1.0);
                }
                edges.push(y_max);
                let tail = if tail_mass > 0.0 {
                    let f0 = d.density(y_max);
                    let f1 = d.density(y_max * 1.01);
                    let rate = if f0 > 0.0 && f1 > 0.0 && f0 > f1 {
                        (f0 / f1).ln() / (0.01 * y_max)
                    } else {
                        1.0 / y_max
                    };
                    weights.push(tail_mass);
                    Some(TailCell { start: y_max, rate })
                } else {
                    None
                };
                let alias = WeightedAliasIndex::new(weights)
                    .map_err(|e| Error::InvalidParameter(format!("jump density table: {e}")))?;
                Ok(Some(Self {
                    table: MarkTable::Cells {
                        edges,
                        power,
                        alias,
                        tail,
                    },
                    mass,
                }))
            }
        }
    }

    /// Total mass of the measure being sampled.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.table {
            MarkTable::Atoms { sizes, alias } => sizes[alias.sample(rng)],
            MarkTable::Cells {
                edges,
                power,
                alias,
                tail,
            } => {
                let k = alias.sample(rng);
                if k + 1 == edges.len() {
                    let tail = tail.as_ref().expect("tail cell present when indexed");
                    return tail.start + exponential(rng, tail.rate);
                }
                let (l, r, e) = (edges[k], edges[k + 1], power[k]);
                let u = uniform(rng);
                if l == 0.0 {
                    return r * u.powf(1.0 / e);
                }
                let lq = (r / l).ln();
                if (e * lq).abs() < 1e-9 {
                    l * (u * lq).exp()
                } else {
                    l * ((u * (e * lq).exp_m1()).ln_1p() / e).exp()
                }
            }
        }
    }
}

/// A finite-activity version of `ν` ready for Poisson random measure draws.
#[derive(Debug, Clone)]
pub struct JumpSource {
    delta: f64,
    measure: JumpMeasure,
    marks: Option<MarkSampler>,
    discarded_sqrt_mass: f64,
    budget_capped: bool,
}

impl JumpSource {
    /// `ν` restricted to `(delta, ∞)`; `delta = 0` is allowed for finite `ν`.
    pub fn new(nu: &JumpMeasure, delta: f64, tol: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidDelta(delta));
        }
        let infinite = nu.variant() == JumpVariant::InfiniteActivityDensity;
        if infinite && nu.small_jump_index() >= 0.5 {
            return Err(Error::RestrictiveConditionViolated {
                rho: nu.small_jump_index(),
            });
        }
        let (measure, discarded) = if delta > 0.0 {
            nu.truncate(delta, tol)?
        } else if infinite {
            return Err(Error::InvalidDelta(delta));
        } else {
            (nu.clone(), 0.0)
        };
        let marks = MarkSampler::new(&measure, tol)?;
        Ok(Self {
            delta,
            measure,
            marks,
            discarded_sqrt_mass: discarded,
            budget_capped: false,
        })
    }

    /// Default source: no truncation for finite `ν`; for infinite activity
    /// the schedule level `controls.truncation_level`, raised if needed so
    /// the expected jump count over the horizon stays within the budget.
    pub fn default_for(nu: &JumpMeasure, coeffs: &CoefficientSet, controls: &SamplerControls, tol: f64) -> Result<Self> {
        if let Some(delta) = controls.delta {
            return Self::new(nu, delta, tol);
        }
        if nu.variant() != JumpVariant::InfiniteActivityDensity {
            return Self::new(nu, 0.0, tol);
        }
        if nu.small_jump_index() >= 0.5 {
            return Err(Error::RestrictiveConditionViolated {
                rho: nu.small_jump_index(),
            });
        }
        let schedule = nu.truncation_schedule(controls.truncation_level.max(1))?;
        let mut delta = schedule.last().expect("nonempty schedule").delta;
        let rate_mass = coeffs.a_tilde_fn().integral(0.0, coeffs.t_max());
        let expected = |d: f64| -> Result<f64> { Ok(rate_mass * nu.mass_above(d, tol)?) };
        let mut capped = false;
        if expected(delta)? > controls.jump_budget {
            capped = true;
            let (mut lo, mut hi) = (delta, 1.0f64);
            while expected(hi)? > controls.jump_budget {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if hi / lo < 1.0 + 1e-10 {
                    break;
                }
                if expected(mid)? > controls.jump_budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            delta = hi;
        }
        let mut src = Self::new(nu, delta, tol)?;
        src.budget_capped = capped;
        Ok(src)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The truncated measure `ν|_{(δ,∞)}`.
    pub fn measure(&self) -> &JumpMeasure {
        &self.measure
    }

    /// `ν((δ,∞))`.
    pub fn mass(&self) -> f64 {
        self.marks.as_ref().map_or(0.0, MarkSampler::mass)
    }

    /// `∫_{(0,δ]} √y ν(dy)`.
    pub fn discarded_sqrt_mass(&self) -> f64 {
        self.discarded_sqrt_mass
    }

    /// True when `δ` was raised above the schedule level by the jump budget.
    pub fn budget_capped(&self) -> bool {
        self.budget_capped
    }

    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.marks.as_ref().map_or(0.0, |m| m.sample(rng))
    }

    /// Poisson random measure on `(s, t] × (δ, ∞)` with intensity `ã(v) dv ν(dy)`.
    pub fn sample_prm<R: Rng + ?Sized>(&self, rng: &mut R, coeffs: &CoefficientSet, s: f64, t: f64) -> Result<PrmRealization> {
        let mass = self.mass();
        if mass == 0.0 || t <= s {
            return Ok(PrmRealization {
                points: Vec::new(),
                delta: self.delta,
            });
        }
        let bound = coeffs.a_tilde_bound(s, t) * mass;
        let times = inhomogeneous_poisson_times(rng, |v| coeffs.a_tilde(v) * mass, s, t, bound)?;
        let points = times
            .into_iter()
            .map(|time| JumpPoint {
                time,
                size: self.sample_mark(rng),
            })
            .collect();
        Ok(PrmRealization {
            points,
            delta: self.delta,
        })
    }
}

/// One draw from `H_{s,t}(y, ·)` given the kernel of `(s, t)`.
#[inline]
pub fn sample_h<R: Rng + ?Sized>(rng: &mut R, kv: &KernelValue, y: f64) -> f64 {
    sample_h_raw(rng, kv.gamma, kv.p, y)
}

#[inline]
fn sample_h_raw<R: Rng + ?Sized>(rng: &mut R, gamma: f64, p: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let m = poisson_sample(rng, y * gamma);
    if m == 0 {
        0.0
    } else {
        gamma_sample(rng, m as f64, p)
    }
}

#[derive(Debug, Clone, Copy)]
struct ICell {
    alpha: f64,
    p_cell: f64,
    /// `(γ, p)` of `H_{r_j, t}`; `None` on the last cell.
    carry: Option<(f64, f64)>,
    /// `(B, D)` of `H_{r_j, t}`, for the discretized transform.
    carry_bd: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
struct IPlan {
    grid: Vec<f64>,
    cells: Vec<ICell>,
}

impl IPlan {
    fn build(engine: &KernelEngine, s: f64, t: f64, min_cells: usize) -> Result<Self> {
        let coeffs = engine.coeffs();
        let mut anchors = vec![s];
        anchors.extend(coeffs.input_knots().into_iter().filter(|k| *k > s && *k < t));
        anchors.push(t);
        let width = (t - s) / min_cells.max(1) as f64;
        let mut grid = vec![s];
        for w in anchors.windows(2) {
            let n = ((w[1] - w[0]) / width * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            for i in 1..=n {
                grid.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
            }
        }
        let mut cells = Vec::with_capacity(grid.len() - 1);
        for w in grid.windows(2) {
            let (l, r) = (w[0], w[1]);
            let alpha = coeffs.alpha(0.5 * (l + r));
            let p_cell = engine.kernel_value(l, r)?.p;
            let (carry, carry_bd) = if r < t {
                let kv = engine.kernel_value(r, t)?;
                (Some((kv.gamma, kv.p)), Some((kv.b, kv.d())))
            } else {
                (None, None)
            };
            cells.push(ICell {
                alpha,
                p_cell,
                carry,
                carry_bd,
            });
        }
        Ok(Self { grid, cells })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut total = 0.0;
        for c in &self.cells {
            if c.alpha <= 0.0 {
                continue;
            }
            let u = gamma_sample(rng, c.alpha, c.p_cell);
            total += match c.carry {
                Some((g, p)) => sample_h_raw(rng, g, p, u),
                None => u,
            };
        }
        total
    }

    /// Exact transform of the discretized law:
    /// `Π_j (1 + Ψ_{r_j,t}(λ)/p(r_{j−1},r_j))^{−α_j}`.
    fn laplace(&self, lambda: f64) -> f64 {
        let mut log = 0.0;
        for c in &self.cells {
            if c.alpha <= 0.0 {
                continue;
            }
            let psi = match c.carry_bd {
                Some((b, d)) if lambda.is_infinite() => b / d,
                Some((b, d)) => lambda * b / (1.0 + lambda * d),
                None => lambda,
            };
            log -= c.alpha * (psi / c.p_cell).ln_1p();
        }
        log.exp()
    }
}

/// A transition law with everything that depends only on `(s, t)`
/// precomputed. The starting state `y` can be varied per draw.
#[derive(Debug, Clone)]
pub struct TransitionLaw {
    s: f64,
    t: f64,
    y: f64,
    component: Component,
    engine: Arc<KernelEngine>,
    kernel: KernelValue,
    i_plan: Option<IPlan>,
    source: Option<Arc<JumpSource>>,
    nu_tol: f64,
}

impl TransitionLaw {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        engine: Arc<KernelEngine>,
        source: Option<Arc<JumpSource>>,
        component: Component,
        s: f64,
        t: f64,
        y: f64,
        controls: &SamplerControls,
        nu_tol: f64,
    ) -> Result<Self> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::InvalidParameter(format!("state must be nonnegative, got {y}")));
        }
        let kernel = engine.kernel_value(s, t)?;
        let i_plan = match component {
            Component::I | Component::K => Some(IPlan::build(&engine, s, t, controls.i_cells)?),
            _ => None,
        };
        let needs_source = matches!(component, Component::Itilde | Component::K);
        if needs_source && source.is_none() {
            return Err(Error::InvalidParameter("jump component requested without a jump source".into()));
        }
        Ok(Self {
            s,
            t,
            y,
            component,
            engine,
            kernel,
            i_plan,
            source: if needs_source { source } else { None },
            nu_tol,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn component(&self) -> Component {
        self.component
    }
    pub fn kernel(&self) -> &KernelValue {
        &self.kernel
    }
    pub fn jump_source(&self) -> Option<&Arc<JumpSource>> {
        self.source.as_ref()
    }

    /// Immigration grid `r₀ < … < r_n`, if this law has an `I` part.
    pub fn i_grid(&self) -> Option<&[f64]> {
        self.i_plan.as_ref().map(|p| p.grid.as_slice())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.sample_from(rng, self.y)
    }

    /// Draw with starting state `y` in place of the stored one.
    pub fn sample_from<R: Rng + ?Sized>(&self, rng: &mut R, y: f64) -> Result<f64> {
        Ok(self.sample_detailed(rng, y)?.0)
    }

    /// Draw with starting state `y`, also returning the jumps used.
    pub fn sample_detailed<R: Rng + ?Sized>(&self, rng: &mut R, y: f64) -> Result<(f64, PrmRealization)> {
        let mut x = 0.0;
        if matches!(self.component, Component::H | Component::K) {
            x += sample_h(rng, &self.kernel, y);
        }
        if let Some(plan) = &self.i_plan {
            x += plan.sample(rng);
        }
        let mut prm = PrmRealization::default();
        if let Some(src) = &self.source {
            let (j, pts) = self.sample_jumps(rng, src)?;
            x += j;
            prm = pts;
        }
        Ok((x, prm))
    }

    /// Immigrant masses `(r_j, U_j)` born on the grid, before transport to `t`.
    pub fn sample_immigrants<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        let Some(plan) = &self.i_plan else {
            return Vec::new();
        };
        plan.cells
            .iter()
            .zip(plan.grid.windows(2))
            .filter(|(c, _)| c.alpha > 0.0)
            .map(|(c, w)| (w[1], gamma_sample(rng, c.alpha, c.p_cell)))
            .collect()
    }

    /// `Ĩ` draw together with the Poisson points it was built from.
    pub fn sample_itilde_with_points<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, PrmRealization)> {
        match &self.source {
            Some(src) => self.sample_jumps(rng, src),
            None => Ok((0.0, PrmRealization::default())),
        }
    }

    fn sample_jumps<R: Rng + ?Sized>(&self, rng: &mut R, src: &JumpSource) -> Result<(f64, PrmRealization)> {
        let prm = src.sample_prm(rng, self.engine.coeffs(), self.s, self.t)?;
        let mut x = 0.0;
        for pt in &prm.points {
            if pt.time >= self.t {
                x += pt.size;
                continue;
            }
            let kv = self.engine.kernel_value(pt.time, self.t)?;
            x += sample_h(rng, &kv, pt.size);
        }
        Ok((x, prm))
    }

    /// Analytic transform of the law being sampled; for `Ĩ` this uses the
    /// truncated measure `ν|_{(δ,∞)}` and for `I` the exact transform
    /// (not the discretized one, see [`Self::discretized_laplace_i`]).
    pub fn laplace(&self, lambda: f64) -> Result<LaplaceEval> {
        let e = &self.engine;
        let (s, t) = (self.s, self.t);
        match self.component {
            Component::H => e.laplace_h(s, t, self.y, lambda),
            Component::I => e.laplace_i(s, t, lambda),
            Component::Itilde => e.laplace_itilde(self.nu(), s, t, lambda, self.nu_tol),
            Component::K => e.laplace_k(self.nu(), s, t, self.y, lambda, self.nu_tol),
        }
    }

    fn nu(&self) -> &JumpMeasure {
        self.source.as_ref().expect("jump source present").measure()
    }

    /// Exact transform of the grid law produced by the `I` sampler.
    pub fn discretized_laplace_i(&self, lambda: f64) -> Option<f64> {
        self.i_plan.as_ref().map(|p| p.laplace(lambda))
    }
}

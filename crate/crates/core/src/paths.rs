//! Trajectories: Euler scheme, exact Markov skeleton, absorbed CIR pieces and
//! the branching construction that superposes them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelEngine, KernelValue};
use crate::model::Model;
use crate::numerics::{standard_normal, with_workers, RngStream};
use crate::samplers::{sample_h, Component, JumpPoint, PrmRealization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    ExactSkeleton,
    Branching,
    AbsorbedCir,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "exact_skeleton" | "exact-skeleton" => Ok(Scheme::ExactSkeleton),
            "branching" => Ok(Scheme::Branching),
            "absorbed_cir" | "absorbed-cir" => Ok(Scheme::AbsorbedCir),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme {other:?} (expected euler, exact_skeleton, branching or absorbed_cir)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::ExactSkeleton => "exact_skeleton",
            Scheme::Branching => "branching",
            Scheme::AbsorbedCir => "absorbed_cir",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRealization {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `jump_flags[k]` is set when a jump landed in `(t_{k−1}, t_k]`.
    pub jump_flags: Vec<bool>,
    pub jumps: PrmRealization,
    pub seed: RngStream,
    pub scheme: Scheme,
}

impl PathRealization {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths have at least one point")
    }

    /// `sup_k |ξ_{t_k}|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `s = t₀ < … < t_n = t` with `n = ⌈(t − s)/h⌉` equal steps.
pub fn uniform_grid(s: f64, t: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !(t > s) {
        return Err(Error::InvalidParameter(format!("grid needs s < t and h > 0, got s={s}, t={t}, h={h}")));
    }
    let n = ((t - s) / h - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=n).map(|i| if i == n { t } else { s + (t - s) * i as f64 / n as f64 }).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing with at least two points".into()));
    }
    Ok(())
}

fn flags_for(grid: &[f64], points: &[JumpPoint]) -> Vec<bool> {
    let mut flags = vec![false; grid.len()];
    for p in points {
        let k = grid.partition_point(|&g| g < p.time);
        if k > 0 && k < grid.len() {
            flags[k] = true;
        }
    }
    flags
}

/// Full-truncation Euler scheme with jumps added at the end of their cell.
pub fn euler_path(stream: RngStream, model: &Model, grid: &[f64], y0: f64) -> Result<PathRealization> {
    check_grid(grid)?;
    let coeffs = model.coeffs();
    let mut rng = stream.rng();
    let (s, t) = (grid[0], *grid.last().unwrap());
    let jumps = if model.nu().is_zero() {
        PrmRealization::default()
    } else {
        model.jump_source()?.sample_prm(&mut rng, coeffs, s, t)?
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut x = y0;
    values.push(x);
    let mut next_jump = 0;
    for w in grid.windows(2) {
        let (tk, h) = (w[0], w[1] - w[0]);
        let z = standard_normal(&mut rng);
        x += (coeffs.a(tk) - coeffs.beta(tk) * x) * h + coeffs.sigma(tk) * x.max(0.0).sqrt() * h.sqrt() * z;
        while next_jump < jumps.points.len() && jumps.points[next_jump].time <= w[1] {
            x += jumps.points[next_jump].size;
            next_jump += 1;
        }
        values.push(x);
    }
    Ok(PathRealization {
        jump_flags: flags_for(grid, &jumps.points),
        times: grid.to_vec(),
        values,
        jumps,
        seed: stream,
        scheme: Scheme::Euler,
    })
}

/// Chains exact transition draws over consecutive grid cells.
pub fn exact_skeleton(stream: RngStream, model: &Model, grid: &[f64], y0: f64) -> Result<PathRealization> {
    check_grid(grid)?;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len());
    let mut points = Vec::new();
    let mut x = y0;
    values.push(x);
    let mut delta = 0.0;
    for w in grid.windows(2) {
        let law = model.transition(Component::K, w[0], w[1], x)?;
        let (next, prm) = law.sample_detailed(&mut rng, x)?;
        delta = prm.delta;
        points.extend(prm.points);
        x = next;
        values.push(x);
    }
    Ok(PathRealization {
        jump_flags: flags_for(grid, &points),
        times: grid.to_vec(),
        values,
        jumps: PrmRealization { points, delta },
        seed: stream,
        scheme: Scheme::ExactSkeleton,
    })
}

/// Exact transitions of the absorbed piece between consecutive grid times.
struct PieceStepper<'a> {
    engine: &'a KernelEngine,
    grid: &'a [f64],
    cells: Vec<KernelValue>,
}

impl<'a> PieceStepper<'a> {
    fn new(engine: &'a KernelEngine, grid: &'a [f64]) -> Result<Self> {
        let cells = grid.windows(2).map(|w| engine.kernel_value(w[0], w[1])).collect::<Result<_>>()?;
        Ok(Self { engine, grid, cells })
    }

    /// Values of the piece born at `(birth, u)` on every grid time (0 before
    /// birth), absorbed at 0.
    fn values<R: Rng + ?Sized>(&self, rng: &mut R, birth: f64, u: f64) -> Result<Vec<f64>> {
        let grid = self.grid;
        let mut out = vec![0.0; grid.len()];
        if u <= 0.0 {
            return Ok(out);
        }
        let start = grid.partition_point(|&g| g < birth);
        if start == grid.len() {
            return Ok(out);
        }
        let mut x = if grid[start] > birth {
            sample_h(rng, &self.engine.kernel_value(birth, grid[start])?, u)
        } else {
            u
        };
        out[start] = x;
        for (o, kv) in out[start + 1..].iter_mut().zip(&self.cells[start..]) {
            if x == 0.0 {
                break;
            }
            x = sample_h(rng, kv, x);
            *o = x;
        }
        Ok(out)
    }
}

/// Input-free CIR started at `(s, u)` on `grid` (which must start at `s`),
/// absorbed at 0, drawn exactly at the grid times.
pub fn absorbed_cir_path(stream: RngStream, engine: &KernelEngine, u: f64, grid: &[f64]) -> Result<PathRealization> {
    check_grid(grid)?;
    if !(u >= 0.0) {
        return Err(Error::InvalidParameter(format!("starting mass must be nonnegative, got {u}")));
    }
    let mut rng = stream.rng();
    let values = PieceStepper::new(engine, grid)?.values(&mut rng, grid[0], u)?;
    Ok(PathRealization {
        jump_flags: vec![false; grid.len()],
        times: grid.to_vec(),
        values,
        jumps: PrmRealization::default(),
        seed: stream,
        scheme: Scheme::AbsorbedCir,
    })
}

/// Superposition of absorbed CIR pieces: one from `(s, y)`, one per
/// immigrant mass born on the immigration grid and one per jump `(T_i, Y_i)`.
/// The grid runs from `s` to `t`.
pub fn branching_path(stream: RngStream, model: &Model, grid: &[f64], y: f64) -> Result<PathRealization> {
    check_grid(grid)?;
    let (s, t) = (grid[0], *grid.last().unwrap());
    let law = model.transition(Component::K, s, t, y)?;
    let mut rng = stream.rng();
    let stepper = PieceStepper::new(model.engine(), grid)?;
    let mut values = stepper.values(&mut rng, s, y)?;
    let mut add = |piece: Vec<f64>| {
        for (v, p) in values.iter_mut().zip(piece) {
            *v += p;
        }
    };
    for (birth, mass) in law.sample_immigrants(&mut rng) {
        add(stepper.values(&mut rng, birth, mass)?);
    }
    let (_, jumps) = law.sample_itilde_with_points(&mut rng)?;
    for p in &jumps.points {
        add(stepper.values(&mut rng, p.time, p.size)?);
    }
    Ok(PathRealization {
        jump_flags: flags_for(grid, &jumps.points),
        times: grid.to_vec(),
        values,
        jumps,
        seed: stream,
        scheme: Scheme::Branching,
    })
}

/// Simulate `n` paths with path `i` on stream `(seed, i)`.
pub fn simulate_many<F>(n: usize, seed: u64, workers: usize, one: F) -> Result<Vec<PathRealization>>
where
    F: Fn(RngStream) -> Result<PathRealization> + Sync,
{
    with_workers(workers, || {
        (0..n)
            .into_par_iter()
            .map(|i| one(RngStream::new(seed, i as u64)))
            .collect::<Result<Vec<_>>>()
    })
}

/// Empirical moments of absorbed CIR pieces started at `(s, u)` over `[s, s + T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorbedDiagnostics {
    pub horizon: f64,
    pub absorbed_fraction: f64,
    /// Sample mean of `sup ξ²`.
    pub mean_sup_square: f64,
    /// `mean_sup_square / ((1 + T)(u + u²))`.
    pub fitted_constant: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn absorbed_diagnostics(
    engine: &KernelEngine,
    s: f64,
    u: f64,
    horizon: f64,
    h: f64,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<AbsorbedDiagnostics> {
    let grid = uniform_grid(s, s + horizon, h)?;
    let stepper = PieceStepper::new(engine, &grid)?;
    let stats: Vec<(f64, bool)> = with_workers(workers, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(seed, i as u64).rng();
                let v = stepper.values(&mut rng, s, u)?;
                let sup = v.iter().fold(0.0f64, |m, x| m.max(*x));
                Ok((sup * sup, *v.last().unwrap() == 0.0))
            })
            .collect::<Result<_>>()
    })?;
    let mean_sup_square = stats.iter().map(|x| x.0).sum::<f64>() / n as f64;
    let absorbed_fraction = stats.iter().filter(|x| x.1).count() as f64 / n as f64;
    Ok(AbsorbedDiagnostics {
        horizon,
        absorbed_fraction,
        mean_sup_square,
        fitted_constant: mean_sup_square / ((1.0 + horizon) * (u + u * u)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSet, JumpMeasure, TimeFunction};

    fn model(a: f64, a_tilde: f64, sigma: f64, nu: JumpMeasure) -> Model {
        let c = CoefficientSet::new(
            TimeFunction::constant(a),
            TimeFunction::constant(a_tilde),
            TimeFunction::constant(1.0),
            TimeFunction::constant(sigma),
            0.5,
            2.0,
        )
        .unwrap();
        Model::new(c, nu).unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = uniform_grid(0.1, 1.9, 0.125).unwrap();
        assert_eq!(g[0], 0.1);
        assert_eq!(*g.last().unwrap(), 1.9);
        assert_eq!(g.len(), 16);
        assert!(uniform_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn absorbed_from_zero_is_zero() {
        let m = model(0.0, 0.0, 1.0, JumpMeasure::none());
        let g = uniform_grid(0.0, 1.0, 0.01).unwrap();
        let p = absorbed_cir_path(RngStream::new(1, 0), m.engine(), 0.0, &g).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn absorbed_stays_at_zero_once_hit() {
        let m = model(0.0, 0.0, 2.0, JumpMeasure::none());
        let g = uniform_grid(0.0, 2.0, 0.01).unwrap();
        for i in 0..50 {
            let p = absorbed_cir_path(RngStream::new(2, i), m.engine(), 0.05, &g).unwrap();
            if let Some(k) = p.values.iter().position(|v| *v == 0.0) {
                assert!(p.values[k..].iter().all(|v| *v == 0.0));
            }
            assert!(p.values.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn skeleton_without_input_from_zero_is_zero() {
        let m = model(0.0, 0.0, 1.0, JumpMeasure::none());
        let g = uniform_grid(0.0, 2.0, 0.25).unwrap();
        let p = exact_skeleton(RngStream::new(3, 0), &m, &g, 0.0).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn small_noise_euler_tracks_the_ode() {
        let m = model(1.0, 0.0, 1e-4, JumpMeasure::none());
        let g = uniform_grid(0.0, 2.0, 1e-3).unwrap();
        let p = euler_path(RngStream::new(4, 0), &m, &g, 0.5).unwrap();
        // ξ' = 1 − ξ, ξ(0) = 0.5
        let exact = 1.0 - 0.5 * (-2.0f64).exp();
        assert!((p.terminal() - exact).abs() < 2e-3, "{}", p.terminal());
    }

    #[test]
    fn jump_flags_reconcile_with_points() {
        let nu = JumpMeasure::atoms(vec![(1.0, 1.0)]).unwrap();
        let m = model(0.5, 3.0, 1.0, nu);
        let g = uniform_grid(0.0, 2.0, 0.1).unwrap();
        for scheme in [Scheme::Euler, Scheme::ExactSkeleton, Scheme::Branching] {
            let p = match scheme {
                Scheme::Euler => euler_path(RngStream::new(5, 1), &m, &g, 0.5),
                Scheme::ExactSkeleton => exact_skeleton(RngStream::new(5, 1), &m, &g, 0.5),
                _ => branching_path(RngStream::new(5, 1), &m, &g, 0.5),
            }
            .unwrap();
            let flagged = p.jump_flags.iter().filter(|f| **f).count();
            let cells: std::collections::BTreeSet<usize> =
                p.jumps.points.iter().map(|pt| g.partition_point(|&x| x < pt.time)).collect();
            assert_eq!(flagged, cells.len());
            assert!(p.jumps.points.windows(2).all(|w| w[0].time < w[1].time));
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let nu = JumpMeasure::atoms(vec![(0.3, 2.0)]).unwrap();
        let m = model(0.5, 1.0, 1.0, nu);
        let g = uniform_grid(0.0, 2.0, 0.05).unwrap();
        let one = simulate_many(6, 9, 1, |st| branching_path(st, &m, &g, 0.4)).unwrap();
        let two = simulate_many(6, 9, 3, |st| branching_path(st, &m, &g, 0.4)).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn scheme_names_parse() {
        for s in [Scheme::Euler, Scheme::ExactSkeleton, Scheme::Branching, Scheme::AbsorbedCir] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("milstein".parse::<Scheme>().is_err());
    }
}

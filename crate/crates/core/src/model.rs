//! A validated coefficient set and jump measure with their kernel engine.

use std::sync::{Arc, OnceLock};

use crate::coefficients::{validate, CoefficientSet, JumpMeasure, ValidationReport};
use crate::error::{Error, Result};
use crate::kernels::{KernelEngine, KernelMode, LaplaceEval, DEFAULT_NU_TOL, DEFAULT_TOL};
use crate::samplers::{Component, JumpSource, SamplerControls, TransitionLaw};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub kernel: f64,
    pub nu: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kernel: DEFAULT_TOL,
            nu: DEFAULT_NU_TOL,
        }
    }
}

#[derive(Debug)]
pub struct Model {
    coeffs: Arc<CoefficientSet>,
    nu: Arc<JumpMeasure>,
    engine: Arc<KernelEngine>,
    report: ValidationReport,
    tolerances: Tolerances,
    controls: SamplerControls,
    source: OnceLock<std::result::Result<Arc<JumpSource>, Error>>,
}

impl Model {
    pub fn new(coeffs: CoefficientSet, nu: JumpMeasure) -> Result<Self> {
        Self::with_options(coeffs, nu, Tolerances::default(), SamplerControls::default(), KernelMode::Auto)
    }

    /// Fails on hard validation errors; a failed square-root condition only
    /// disables the samplers.
    pub fn with_options(
        coeffs: CoefficientSet,
        nu: JumpMeasure,
        tolerances: Tolerances,
        controls: SamplerControls,
        mode: KernelMode,
    ) -> Result<Self> {
        let report = validate(&coeffs, &nu);
        report.status()?;
        let coeffs = Arc::new(coeffs);
        let engine = Arc::new(KernelEngine::with_options(coeffs.clone(), tolerances.kernel, mode)?);
        Ok(Self {
            coeffs,
            nu: Arc::new(nu),
            engine,
            report,
            tolerances,
            controls,
            source: OnceLock::new(),
        })
    }

    pub fn coeffs(&self) -> &Arc<CoefficientSet> {
        &self.coeffs
    }
    pub fn nu(&self) -> &Arc<JumpMeasure> {
        &self.nu
    }
    pub fn engine(&self) -> &Arc<KernelEngine> {
        &self.engine
    }
    pub fn report(&self) -> &ValidationReport {
        &self.report
    }
    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }
    pub fn controls(&self) -> &SamplerControls {
        &self.controls
    }

    /// The jump source for the configured controls (built once).
    pub fn jump_source(&self) -> Result<Arc<JumpSource>> {
        self.report.require_exact_samplers()?;
        self.source
            .get_or_init(|| {
                JumpSource::default_for(&self.nu, &self.coeffs, &self.controls, self.tolerances.nu).map(Arc::new)
            })
            .clone()
    }

    pub fn transition(&self, component: Component, s: f64, t: f64, y: f64) -> Result<TransitionLaw> {
        let source = match component {
            Component::Itilde | Component::K => Some(self.jump_source()?),
            Component::H | Component::I => {
                self.report.require_exact_samplers()?;
                None
            }
        };
        TransitionLaw::new(self.engine.clone(), source, component, s, t, y, &self.controls, self.tolerances.nu)
    }

    /// Transform of `K_{s,t}(y, ·)` under the untruncated `ν`.
    pub fn laplace_k(&self, s: f64, t: f64, y: f64, lambda: f64) -> Result<LaplaceEval> {
        self.engine.laplace_k(&self.nu, s, t, y, lambda, self.tolerances.nu)
    }

    pub fn laplace_h(&self, s: f64, t: f64, y: f64, lambda: f64) -> Result<LaplaceEval> {
        self.engine.laplace_h(s, t, y, lambda)
    }

    pub fn laplace_i(&self, s: f64, t: f64, lambda: f64) -> Result<LaplaceEval> {
        self.engine.laplace_i(s, t, lambda)
    }

    pub fn laplace_itilde(&self, s: f64, t: f64, lambda: f64) -> Result<LaplaceEval> {
        self.engine.laplace_itilde(&self.nu, s, t, lambda, self.tolerances.nu)
    }

    pub fn laplace(&self, component: Component, s: f64, t: f64, y: f64, lambda: f64) -> Result<LaplaceEval> {
        match component {
            Component::H => self.laplace_h(s, t, y, lambda),
            Component::I => self.laplace_i(s, t, lambda),
            Component::Itilde => self.laplace_itilde(s, t, lambda),
            Component::K => self.laplace_k(s, t, y, lambda),
        }
    }
}

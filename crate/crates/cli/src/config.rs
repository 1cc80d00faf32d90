//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use cirjump::coefficients::{CoefficientSet, InputRate, JumpMeasure, JumpMeasureSpec, TimeFunction, TimeFunctionSpec};
use cirjump::kernels::{KernelMode, DEFAULT_NU_TOL, DEFAULT_TOL};
use cirjump::model::{Model, Tolerances};
use cirjump::samplers::SamplerControls;
use cirjump::verify::{Thresholds, DEFAULT_LAMBDAS};
use cirjump::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub x0: f64,
    pub t_max: f64,
    pub coefficients: CoefficientsSpec,
    #[serde(default = "no_jumps")]
    pub jump_measure: JumpMeasureSpec,
    #[serde(default)]
    pub controls: SamplerControls,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub run: RunSpec,
}

fn no_jumps() -> JumpMeasureSpec {
    JumpMeasureSpec::None
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSpec {
    pub a: Option<TimeFunctionSpec>,
    pub alpha: Option<TimeFunctionSpec>,
    pub a_tilde: TimeFunctionSpec,
    pub beta: TimeFunctionSpec,
    pub sigma: TimeFunctionSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub kernel: f64,
    pub nu: f64,
    /// Evaluate every kernel by quadrature.
    pub force_quadrature: bool,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            kernel: DEFAULT_TOL,
            nu: DEFAULT_NU_TOL,
            force_quadrature: false,
        }
    }
}

/// Defaults for the commands; flags override them.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub s: f64,
    pub t: Option<f64>,
    pub y: Option<f64>,
    pub u: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub h: f64,
    pub scheme: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub euler_steps: Vec<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            s: 0.0,
            t: None,
            y: None,
            u: None,
            n: 100_000,
            seed: 1,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            h: 0.01,
            scheme: None,
            output_dir: None,
            euler_steps: vec![0.125, 0.0625, 0.03125, 0.015625],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        match (&cfg.coefficients.a, &cfg.coefficients.alpha) {
            (Some(_), Some(_)) => return Err(Error::Config("coefficients: give either `a` or `alpha`, not both".into())),
            (None, None) => return Err(Error::Config("coefficients: missing `a` (or `alpha`)".into())),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let tf = |name: &str, spec: &TimeFunctionSpec| {
            TimeFunction::try_from(spec.clone()).map_err(|e| Error::Config(format!("coefficients.{name}: {e}")))
        };
        let c = &self.coefficients;
        let input = match (&c.a, &c.alpha) {
            (Some(a), _) => InputRate::Direct(tf("a", a)?),
            (None, Some(alpha)) => InputRate::Alpha(tf("alpha", alpha)?),
            (None, None) => unreachable!("checked at parse time"),
        };
        CoefficientSet::with_input(
            input,
            tf("a_tilde", &c.a_tilde)?,
            tf("beta", &c.beta)?,
            tf("sigma", &c.sigma)?,
            self.x0,
            self.t_max,
        )
    }

    pub fn jump_measure(&self) -> Result<JumpMeasure> {
        JumpMeasure::try_from(&self.jump_measure).map_err(|e| Error::Config(format!("jump_measure: {e}")))
    }

    pub fn model(&self) -> Result<Model> {
        let tolerances = Tolerances {
            kernel: self.tolerances.kernel,
            nu: self.tolerances.nu,
        };
        let mode = if self.tolerances.force_quadrature {
            KernelMode::ForceQuadrature
        } else {
            KernelMode::Auto
        };
        Model::with_options(self.coefficients()?, self.jump_measure()?, tolerances, self.controls, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
x0 = 0.5
t_max = 2.0

[coefficients]
a = { kind = "constant", value = 0.3 }
a_tilde = { kind = "constant", value = 1.0 }
beta = { kind = "constant", value = 0.8 }
sigma = { kind = "constant", value = 1.0 }

[jump_measure]
kind = "atoms"
atoms = [[0.3, 1.0], [1.2, 0.5]]
"#;

    #[test]
    fn minimal_config_builds_a_model() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let m = cfg.model().unwrap();
        assert_eq!(m.coeffs().t_max(), 2.0);
        assert_eq!(cfg.run.n, 100_000);
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let text = MINIMAL.replace("x0 = 0.5", "x0 = 0.5\nbogus = 3");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn both_input_forms_are_rejected() {
        let text = MINIMAL.replace("a = {", "alpha = { kind = \"constant\", value = 1.0 }\na = {");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }
}

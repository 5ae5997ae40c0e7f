//! Run configuration files.
//!
//! A config is a TOML document with the tables `[map]`, `[system]`,
//! `[noise]`, `[run]`, `[output]` and the optional `[design]` and
//! `[bifurcate]`. Unknown keys are rejected. See the README for the key list.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{Sweep, SweepParam, X0Policy, DEFAULT_BIF_SAMPLES, DEFAULT_BIF_TRANSIENT};
use crate::calculus::{IterateChain, PsiFunction};
use crate::design::{ControlDesign, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::maps::MapDef;
use crate::noise::{NoiseKind, NoiseModel};
use crate::sim::{Scheme, SystemSpec};

/// Largest accepted control period.
pub const MAX_K: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    /// `ricker`, `logistic`, `quail`, `cubic45` or `cubic6`.
    pub family: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl MapSpec {
    /// Parses a standalone map table, e.g. `family = "ricker"\nparams = { r = 2.8 }`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: MapSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.build()?;
        Ok(spec)
    }

    fn allowed(&self) -> Result<&'static [&'static str]> {
        Ok(match self.family.as_str() {
            "ricker" | "logistic" => &["r"],
            "quail" => &["a", "b", "gamma"],
            "cubic45" | "cubic6" => &[],
            other => return Err(Error::Config(format!("unknown map family '{other}'"))),
        })
    }

    fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("map family {} needs parameter '{name}'", self.family)))
    }

    pub fn build(&self) -> Result<MapDef> {
        let allowed = self.allowed()?;
        if let Some(extra) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("map family {} has no parameter '{extra}'", self.family)));
        }
        if let Some(b) = self.b {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("map threshold b must be positive, got {b}")));
            }
        }
        let map = match self.family.as_str() {
            "ricker" => MapDef::ricker(self.param("r")?),
            "logistic" => MapDef::logistic(self.param("r")?),
            "quail" => {
                let get = |k: &str, d: f64| self.params.get(k).copied().unwrap_or(d);
                MapDef::quail(get("a", 0.55), get("b", 3.45), get("gamma", 9.0))
            }
            "cubic45" => Ok(MapDef::cubic45()),
            _ => Ok(MapDef::cubic6()),
        };
        map.map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub scheme: Scheme,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<f64>,
    #[serde(default)]
    pub ell1: f64,
    #[serde(default)]
    pub ell2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default)]
    pub independent_noises: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    Uniform,
    TwoPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default = "default_kind")]
    pub kind: NoiseKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_kind() -> NoiseKindName {
    NoiseKindName::Uniform
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self { kind: NoiseKindName::Uniform, p: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub x0: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub runs: usize,
    /// Cycles discarded before tail statistics.
    #[serde(default)]
    pub transient: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: default_dir(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    /// Grid for the additive-corridor scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Additive level for the corridor; defaults to `system.ell2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    /// Containment slack as a fraction of the narrowest phase width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_fraction: Option<f64>,
    /// Absolute tolerance for the tail-bound checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X0PolicyName {
    Fixed,
    TwoSided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcateBlock {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<usize>,
    #[serde(default = "default_policy")]
    pub x0_policy: X0PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_side: Option<usize>,
}

fn default_policy() -> X0PolicyName {
    X0PolicyName::Fixed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    pub system: SystemBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bifurcate: Option<BifurcateBlock>,
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.map.build()?;
        let s = &self.system;
        let targets = [s.nu, s.x_star, s.x_hat].iter().filter(|v| v.is_some()).count();
        if targets != 1 {
            return bad(format!("exactly one of system.nu, system.x_star, system.x_hat is required, got {targets}"));
        }
        if s.k == 0 || s.k > MAX_K {
            return bad(format!("system.k must lie in 1..={MAX_K}, got {}", s.k));
        }
        if s.scheme.is_shifted() && s.nu.is_none() {
            return bad("shifted schemes take system.nu directly".into());
        }
        for (name, v) in [("ell1", s.ell1), ("ell2", s.ell2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("system.{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [("nu", s.nu), ("x_star", s.x_star), ("x_hat", s.x_hat), ("k1", s.k1)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("system.{name} must be positive and finite, got {v}"));
                }
            }
        }
        if self.noise.kind == NoiseKindName::TwoPoint {
            self.noise_kind()?;
        } else if self.noise.p.is_some() {
            return bad("noise.p only applies to two_point noise".into());
        }
        let r = &self.run;
        if !(r.x0 > 0.0 && r.x0.is_finite()) {
            return bad(format!("run.x0 must be positive, got {}", r.x0));
        }
        if r.n == 0 || r.runs == 0 {
            return bad("run.n and run.runs must be at least 1".into());
        }
        if let Some(d) = &self.design {
            if d.grid.is_some_and(|g| g < 1000) {
                return bad("design.grid must be at least 1000".into());
            }
            for (name, v) in [("delta0", d.delta0), ("epsilon_fraction", d.epsilon_fraction), ("tail_tol", d.tail_tol)] {
                if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                    return bad(format!("design.{name} must be positive"));
                }
            }
        }
        if let Some(b) = &self.bifurcate {
            if b.samples == Some(0) {
                return bad("bifurcate.samples must be at least 1".into());
            }
            self.sweep()?.values().map_err(|e| Error::Config(e.to_string()))?;
            self.x0_policy()?.values().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn noise_kind(&self) -> Result<NoiseKind> {
        match self.noise.kind {
            NoiseKindName::Uniform => Ok(NoiseKind::UniformSym),
            NoiseKindName::TwoPoint => {
                NoiseKind::two_point(self.noise.p.unwrap_or(0.5)).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(self.noise_kind()?, self.noise.seed))
    }

    pub fn grid(&self) -> usize {
        self.design.as_ref().and_then(|d| d.grid).unwrap_or(DEFAULT_GRID)
    }

    pub fn sweep(&self) -> Result<Sweep> {
        let b = self.bifurcate.as_ref().ok_or_else(|| Error::Config("missing [bifurcate] table".into()))?;
        Ok(Sweep { param: b.param, from: b.from, to: b.to, points: b.points })
    }

    pub fn bifurcation_samples(&self) -> (usize, usize) {
        let b = self.bifurcate.as_ref();
        (
            b.and_then(|b| b.transient).unwrap_or(DEFAULT_BIF_TRANSIENT),
            b.and_then(|b| b.samples).unwrap_or(DEFAULT_BIF_SAMPLES),
        )
    }

    pub fn x0_policy(&self) -> Result<X0Policy> {
        match self.bifurcate.as_ref().map(|b| b.x0_policy) {
            None | Some(X0PolicyName::Fixed) => Ok(X0Policy::Fixed { x0: self.run.x0 }),
            Some(X0PolicyName::TwoSided) => {
                let b = self.bifurcate.as_ref().expect("checked above");
                let k1 = self
                    .system
                    .k1
                    .ok_or_else(|| Error::Config("two_sided x0 policy needs system.k1".into()))?;
                Ok(X0Policy::TwoSided {
                    k1,
                    lo: b.x0_lo.unwrap_or(0.0),
                    hi: b.x0_hi.unwrap_or(1.0),
                    per_side: b.per_side.unwrap_or(8),
                })
            }
        }
    }

    /// Builds the design (when the scheme admits one) and the system.
    pub fn resolve(&self) -> Result<Resolved> {
        let map = self.map.build()?;
        let s = &self.system;
        let (design, design_error) = if s.scheme.is_shifted() {
            (None, None)
        } else {
            match self.build_design(&map) {
                Ok(d) => (Some(d), None),
                Err(e) if s.nu.is_some() => (None, Some(e)),
                Err(e) => return Err(e),
            }
        };
        let nu = match (&design, s.nu) {
            (_, Some(nu)) => nu,
            (Some(d), None) => d.nu(),
            (None, None) => unreachable!("validated: a target without a design is an error"),
        };
        let spec = SystemSpec::new(s.scheme, map, s.k, nu, s.ell1, s.ell2, s.k1)?.with_independent_noises(s.independent_noises);
        Ok(Resolved { spec, design, design_error, noise: self.noise_model()? })
    }

    fn build_design(&self, map: &MapDef) -> Result<ControlDesign> {
        let b = match self.map.b {
            Some(b) => b,
            None => map.default_b()?,
        };
        let psi = PsiFunction::new(IterateChain::build(map, b, self.system.k)?)?;
        let s = &self.system;
        if let Some(nu) = s.nu {
            ControlDesign::for_gain(&psi, nu)
        } else if let Some(x_star) = s.x_star {
            ControlDesign::for_target(&psi, x_star)
        } else {
            ControlDesign::for_preimage(&psi, s.x_hat.unwrap_or_default())
        }
    }
}

/// A config turned into runnable objects.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub spec: SystemSpec,
    pub design: Option<ControlDesign>,
    /// Why no design exists for a directly supplied gain.
    pub design_error: Option<Error>,
    pub noise: NoiseModel,
}

//! Trajectories of the controlled recursions.
//!
//! Control fires at every step `n` with `n % k == 0`, starting at `n = 0`;
//! every other step is a plain application of `f`. Noisy schemes draw one
//! value per control step (two for combined noise with independent draws)
//! and nothing otherwise, so runs of different length share a prefix.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapDef;
use crate::noise::{NoiseModel, NoiseStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `f(nu x)`
    DetPf,
    /// `f((nu + l1 chi) x)`
    MultNoise,
    /// `max{f(nu x) + l2 chi, 0}`
    AddNoise,
    /// `f((nu + l1 chi) x) + l2 chi`, clamped at zero
    CombinedNoise,
    /// `f(nu x + (1 - nu) K1)`
    ShiftedDetPf,
    /// `f((nu + l1 chi) x + (1 - nu - l1 chi) K1) + l2 chi`, clamped at zero
    ShiftedNoisy,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::DetPf,
        Scheme::MultNoise,
        Scheme::AddNoise,
        Scheme::CombinedNoise,
        Scheme::ShiftedDetPf,
        Scheme::ShiftedNoisy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::DetPf => "det_pf",
            Scheme::MultNoise => "mult_noise",
            Scheme::AddNoise => "add_noise",
            Scheme::CombinedNoise => "combined_noise",
            Scheme::ShiftedDetPf => "shifted_det_pf",
            Scheme::ShiftedNoisy => "shifted_noisy",
        }
    }

    pub fn is_noisy(&self) -> bool {
        !matches!(self, Scheme::DetPf | Scheme::ShiftedDetPf)
    }

    pub fn is_shifted(&self) -> bool {
        matches!(self, Scheme::ShiftedDetPf | Scheme::ShiftedNoisy)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SystemSpec {
    scheme: Scheme,
    map: MapDef,
    k: usize,
    nu: f64,
    ell1: f64,
    ell2: f64,
    k1: Option<f64>,
    independent_noises: bool,
}

impl SystemSpec {
    /// Validating constructor. `k1` is required by the shifted schemes and
    /// ignored otherwise.
    pub fn new(scheme: Scheme, map: MapDef, k: usize, nu: f64, ell1: f64, ell2: f64, k1: Option<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("control period k must be at least 1".into()));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Parameter(format!("gain nu = {nu} outside (0, 1]")));
        }
        if !(ell1 >= 0.0 && ell1.is_finite() && ell2 >= 0.0 && ell2.is_finite()) {
            return Err(Error::Parameter(format!("amplitudes must be finite and non-negative, got {ell1}, {ell2}")));
        }
        let zero = |name: &str, v: f64| {
            if v != 0.0 {
                Err(Error::Parameter(format!("{} takes no {name}, got {v}", scheme.name())))
            } else {
                Ok(())
            }
        };
        match scheme {
            Scheme::DetPf | Scheme::ShiftedDetPf => {
                zero("ell1", ell1)?;
                zero("ell2", ell2)?;
            }
            Scheme::MultNoise => zero("ell2", ell2)?,
            Scheme::AddNoise => zero("ell1", ell1)?,
            Scheme::CombinedNoise | Scheme::ShiftedNoisy => {}
        }
        if matches!(scheme, Scheme::MultNoise | Scheme::CombinedNoise | Scheme::ShiftedNoisy) && ell1 >= nu && ell1 > 0.0 {
            return Err(Error::Parameter(format!("ell1 = {ell1} must be below nu = {nu}")));
        }
        let k1 = if scheme.is_shifted() {
            let c = k1.ok_or_else(|| Error::Parameter(format!("{} needs a shift center K1", scheme.name())))?;
            if !(c > 0.0 && c <= map.domain_hi()) {
                return Err(Error::Parameter(format!("K1 = {c} outside (0, {}]", map.domain_hi())));
            }
            Some(c)
        } else {
            None
        };
        Ok(Self { scheme, map, k, nu, ell1, ell2, k1, independent_noises: false })
    }

    pub fn det(map: MapDef, k: usize, nu: f64) -> Result<Self> {
        Self::new(Scheme::DetPf, map, k, nu, 0.0, 0.0, None)
    }

    pub fn mult(map: MapDef, k: usize, nu: f64, ell1: f64) -> Result<Self> {
        Self::new(Scheme::MultNoise, map, k, nu, ell1, 0.0, None)
    }

    pub fn add(map: MapDef, k: usize, nu: f64, ell2: f64) -> Result<Self> {
        Self::new(Scheme::AddNoise, map, k, nu, 0.0, ell2, None)
    }

    pub fn combined(map: MapDef, k: usize, nu: f64, ell1: f64, ell2: f64) -> Result<Self> {
        Self::new(Scheme::CombinedNoise, map, k, nu, ell1, ell2, None)
    }

    pub fn shifted(map: MapDef, k: usize, nu: f64, k1: f64) -> Result<Self> {
        Self::new(Scheme::ShiftedDetPf, map, k, nu, 0.0, 0.0, Some(k1))
    }

    pub fn shifted_noisy(map: MapDef, k: usize, nu: f64, k1: f64, ell1: f64, ell2: f64) -> Result<Self> {
        Self::new(Scheme::ShiftedNoisy, map, k, nu, ell1, ell2, Some(k1))
    }

    /// Draw separate values for the two noise terms of the combined schemes.
    pub fn with_independent_noises(mut self, on: bool) -> Self {
        self.independent_noises = on;
        self
    }

    /// Same system with a different gain, revalidated.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        let s = Self::new(self.scheme, self.map.clone(), self.k, nu, self.ell1, self.ell2, self.k1)?;
        Ok(s.with_independent_noises(self.independent_noises))
    }

    /// Same system with different amplitudes, revalidated.
    pub fn with_amplitudes(&self, ell1: f64, ell2: f64) -> Result<Self> {
        let s = Self::new(self.scheme, self.map.clone(), self.k, self.nu, ell1, ell2, self.k1)?;
        Ok(s.with_independent_noises(self.independent_noises))
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn map(&self) -> &MapDef {
        &self.map
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ell1(&self) -> f64 {
        self.ell1
    }

    pub fn ell2(&self) -> f64 {
        self.ell2
    }

    pub fn k1(&self) -> Option<f64> {
        self.k1
    }

    pub fn independent_noises(&self) -> bool {
        self.independent_noises
    }

    pub fn is_control_step(&self, n: usize) -> bool {
        n % self.k == 0
    }

    /// Noise values consumed at step `n`.
    pub fn draws_at(&self, n: usize) -> usize {
        if !self.scheme.is_noisy() || !self.is_control_step(n) {
            0
        } else if self.independent_noises && matches!(self.scheme, Scheme::CombinedNoise | Scheme::ShiftedNoisy) {
            2
        } else {
            1
        }
    }

    /// One step with a single noise value used in every noise slot.
    pub fn step(&self, n: usize, x: f64, chi: f64) -> Result<f64> {
        Ok(self.step_detail(n, x, chi, chi)?.value)
    }

    /// One step; `chi1` feeds the gain perturbation and `chi2` the additive term.
    pub fn step_detail(&self, n: usize, x: f64, chi1: f64, chi2: f64) -> Result<StepOutcome> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("state {x} is negative or NaN")));
        }
        let f = &self.map;
        if !self.is_control_step(n) {
            return Ok(StepOutcome { value: f.eval(x)?, clamped: false });
        }
        let clamp = |v: f64| {
            if v < 0.0 {
                StepOutcome { value: 0.0, clamped: true }
            } else {
                StepOutcome { value: v, clamped: false }
            }
        };
        let out = match self.scheme {
            Scheme::DetPf => clamp(f.eval(self.nu * x)?),
            Scheme::MultNoise => clamp(f.eval((self.nu + self.ell1 * chi1) * x)?),
            Scheme::AddNoise => clamp(f.eval(self.nu * x)? + self.ell2 * chi2),
            Scheme::CombinedNoise => clamp(f.eval((self.nu + self.ell1 * chi1) * x)? + self.ell2 * chi2),
            Scheme::ShiftedDetPf => {
                let c = self.k1.unwrap_or_default();
                clamp(f.eval(c + self.nu * (x - c))?)
            }
            Scheme::ShiftedNoisy => {
                let c = self.k1.unwrap_or_default();
                let gain = self.nu + self.ell1 * chi1;
                clamp(f.eval(c + gain * (x - c))? + self.ell2 * chi2)
            }
        };
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub value: f64,
    /// The raw value was negative and was replaced by zero.
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: SystemSpec,
    pub x0: f64,
    /// `x_0, ..., x_N`
    pub values: Vec<f64>,
    pub noise: NoiseModel,
    /// Steps `n` at which the control branch produced `x_{n+1}`.
    pub control_steps: Vec<usize>,
    /// Number of control steps whose result was clamped to zero.
    pub clamps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// `x_{mk + j}` if it exists.
    pub fn phase_value(&self, m: usize, j: usize) -> Option<f64> {
        self.values.get(m * self.spec.k() + j).copied()
    }

    /// Number of complete cycles `m` for which `x_{mk+j}` exists for all `j = 1..=k`.
    pub fn cycles(&self) -> usize {
        self.steps() / self.spec.k()
    }
}

pub fn simulate(spec: &SystemSpec, x0: f64, steps: usize, noise: &NoiseModel) -> Result<Trajectory> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::Parameter(format!("initial value {x0} must be positive and finite")));
    }
    if steps == 0 {
        return Err(Error::Parameter("number of steps must be at least 1".into()));
    }
    let mut stream = NoiseStream::new(*noise);
    let mut values = Vec::with_capacity(steps + 1);
    let mut control_steps = Vec::with_capacity(steps / spec.k() + 1);
    let mut clamps = 0;
    values.push(x0);
    let mut x = x0;
    for n in 0..steps {
        let (chi1, chi2) = match spec.draws_at(n) {
            0 => (0.0, 0.0),
            1 => {
                let c = stream.sample();
                (c, c)
            }
            _ => {
                let c1 = stream.sample();
                (c1, stream.sample())
            }
        };
        let out = spec
            .step_detail(n, x, chi1, chi2)
            .map_err(|e| Error::Step { step: n, message: e.to_string() })?;
        if !out.value.is_finite() {
            return Err(Error::Step { step: n, message: format!("non-finite value {}", out.value) });
        }
        if spec.is_control_step(n) {
            control_steps.push(n);
            if out.clamped {
                clamps += 1;
            }
        }
        x = out.value;
        values.push(x);
    }
    Ok(Trajectory { spec: spec.clone(), x0, values, noise: *noise, control_steps, clamps })
}

/// Runs `runs` trajectories; run `i` uses `noise.substream(i)`.
pub fn ensemble(spec: &SystemSpec, x0: f64, steps: usize, noise: &NoiseModel, runs: usize) -> Result<Vec<Trajectory>> {
    check_runs(runs)?;
    (0..runs).map(|i| simulate(spec, x0, steps, &noise.substream(i as u64))).collect()
}

/// Parallel counterpart of [`ensemble`] with identical output.
pub fn ensemble_par(spec: &SystemSpec, x0: f64, steps: usize, noise: &NoiseModel, runs: usize) -> Result<Vec<Trajectory>> {
    check_runs(runs)?;
    (0..runs)
        .into_par_iter()
        .map(|i| simulate(spec, x0, steps, &noise.substream(i as u64)))
        .collect()
}

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        Err(Error::Parameter("runs must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Writes `run,n,x,controlled`; `controlled` is 1 on steps where control fires.
pub fn write_csv<W: Write>(mut out: W, runs: &[Trajectory]) -> io::Result<()> {
    writeln!(out, "run,n,x,controlled")?;
    for (i, t) in runs.iter().enumerate() {
        for (n, x) in t.values.iter().enumerate() {
            writeln!(out, "{i},{n},{x},{}", u8::from(t.spec.is_control_step(n)))?;
        }
    }
    Ok(())
}

/// The subsampled recursion `z_{m+1} = max{g(z_m) + l2 chi_{m+1}, 0}` with
/// `g = f^k(nu .)`, fed by the same noise draws an additive-noise run of
/// `spec` would consume. Returns `z_0, ..., z_M`.
pub fn phase_map_sequence(spec: &SystemSpec, z0: f64, cycles: usize, noise: &NoiseModel) -> Result<Vec<f64>> {
    let f = spec.map();
    let mut stream = NoiseStream::new(*noise);
    let mut z = z0;
    let mut out = vec![z0];
    for m in 0..cycles {
        let mut y = spec.nu() * z;
        for _ in 0..spec.k() {
            y = f.eval(y).map_err(|e| Error::Step { step: m, message: e.to_string() })?;
        }
        z = (y + spec.ell2() * stream.sample()).max(0.0);
        out.push(z);
    }
    Ok(out)
}

/// The recursion for `u_m = x_{mk+1}` of an additive-noise run:
/// `u_{m+1} = max{f(nu f^{k-1}(u_m)) + l2 chi_{m+2}, 0}`, started from
/// `u_0 = x_1`. Returns `u_0, ..., u_M`.
pub fn block_map_sequence(spec: &SystemSpec, x0: f64, cycles: usize, noise: &NoiseModel) -> Result<Vec<f64>> {
    let f = spec.map();
    let mut stream = NoiseStream::new(*noise);
    let step_err = |m: usize| move |e: Error| Error::Step { step: m, message: e.to_string() };
    let mut u = (f.eval(spec.nu() * x0).map_err(step_err(0))? + spec.ell2() * stream.sample()).max(0.0);
    let mut out = vec![u];
    for m in 0..cycles {
        let mut y = u;
        for _ in 1..spec.k() {
            y = f.eval(y).map_err(step_err(m))?;
        }
        u = (f.eval(spec.nu() * y).map_err(step_err(m))? + spec.ell2() * stream.sample()).max(0.0);
        out.push(u);
    }
    Ok(out)
}

//! Post-run checks: corridor containment, tail extremes, cycle extraction,
//! and parameter sweeps.

use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Corridor;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::sim::{simulate, SystemSpec, Trajectory};

/// Fewest complete cycles a containment check accepts.
pub const MIN_CYCLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `max |x - mean|`
    pub max_dev: f64,
}

impl PhaseStats {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for x in xs.clone() {
            min = min.min(x);
            max = max.max(x);
            sum += x;
            n += 1;
        }
        let mean = sum / n as f64;
        let max_dev = xs.map(|x| (x - mean).abs()).fold(0.0, f64::max);
        Self { min, max, mean, max_dev }
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainmentReport {
    pub phase_intervals: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub cycles: usize,
    /// Smallest `m` such that every later phase value is inside.
    pub entrance_m0: Option<usize>,
    /// First `m` at which all phases are inside.
    pub first_entry: Option<usize>,
    pub violations_after_entrance: usize,
    /// Cycles after `first_entry` with some phase outside.
    pub violations_after_first_entry: usize,
    /// Per phase over `m >= entrance_m0`, or over all cycles without entrance.
    pub phase_stats: Vec<PhaseStats>,
}

impl ContainmentReport {
    pub fn contained(&self) -> bool {
        self.entrance_m0.is_some() && self.violations_after_entrance == 0
    }
}

fn check_cycles(traj: &Trajectory, k: usize, transient: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Usage("k must be at least 1".into()));
    }
    let cycles = traj.steps() / k;
    if transient >= cycles {
        return Err(Error::Usage(format!("transient {transient} leaves no cycles out of {cycles}")));
    }
    Ok(cycles)
}

fn phase(traj: &Trajectory, k: usize, m: usize, j: usize) -> f64 {
    traj.values[m * k + j]
}

/// Finds the exact entrance cycle of `traj` into `corridor` widened by `epsilon`.
pub fn containment<C: Corridor + ?Sized>(traj: &Trajectory, corridor: &C, epsilon: f64) -> Result<ContainmentReport> {
    let k = traj.spec.k();
    if corridor.k() != k || corridor.phase_intervals().len() != k {
        return Err(Error::Usage(format!("corridor has period {}, trajectory {k}", corridor.k())));
    }
    let nu = traj.spec.nu();
    if (corridor.nu() - nu).abs() > 1e-12 * nu.abs().max(1.0) {
        return Err(Error::Usage(format!("corridor gain {} differs from system gain {nu}", corridor.nu())));
    }
    if corridor.map_label() != traj.spec.map().label() {
        return Err(Error::Usage(format!(
            "corridor map {} differs from system map {}",
            corridor.map_label(),
            traj.spec.map().label()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Usage(format!("epsilon must be positive, got {epsilon}")));
    }
    let cycles = traj.steps() / k;
    if cycles < MIN_CYCLES {
        return Err(Error::Usage(format!("trajectory has {cycles} cycles, need at least {MIN_CYCLES}")));
    }
    let intervals = corridor.phase_intervals();
    let inside: Vec<bool> = (0..cycles)
        .map(|m| {
            intervals.iter().enumerate().all(|(i, &(lo, hi))| {
                let x = phase(traj, k, m, i + 1);
                lo - epsilon < x && x < hi + epsilon
            })
        })
        .collect();
    let entrance_m0 = match inside.iter().rposition(|&ok| !ok) {
        None => Some(0),
        Some(last) if last + 1 < cycles => Some(last + 1),
        Some(_) => None,
    };
    let first_entry = inside.iter().position(|&ok| ok);
    let violations_after_first_entry = first_entry.map_or(0, |m| inside[m..].iter().filter(|&&ok| !ok).count());
    let violations_after_entrance = entrance_m0.map_or(0, |m| inside[m..].iter().filter(|&&ok| !ok).count());
    let from = entrance_m0.unwrap_or(0);
    let phase_stats = (1..=k).map(|j| PhaseStats::of((from..cycles).map(move |m| phase(traj, k, m, j)))).collect();
    Ok(ContainmentReport {
        phase_intervals: intervals.to_vec(),
        epsilon,
        cycles,
        entrance_m0,
        first_entry,
        violations_after_entrance,
        violations_after_first_entry,
        phase_stats,
    })
}

/// Per-phase `(inf, sup)` of `x_{mk+j}` over cycles `m >= transient`.
pub fn liminf_limsup(traj: &Trajectory, k: usize, transient: usize) -> Result<Vec<(f64, f64)>> {
    Ok(extract_cycle(traj, k, transient)?.into_iter().map(|s| (s.min, s.max)).collect())
}

/// Compares tail extremes against per-phase bounds: `inf >= lo - tol` and
/// `sup <= hi + tol`. Returns one flag per phase.
pub fn tail_within(tails: &[(f64, f64)], bounds: &[(f64, f64)], tol: f64) -> Vec<bool> {
    tails
        .iter()
        .zip(bounds)
        .map(|(&(inf, sup), &(lo, hi))| inf >= lo - tol && sup <= hi + tol)
        .collect()
}

/// Per-phase statistics over cycles `m >= transient`.
pub fn extract_cycle(traj: &Trajectory, k: usize, transient: usize) -> Result<Vec<PhaseStats>> {
    let cycles = check_cycles(traj, k, transient)?;
    Ok((1..=k).map(|j| PhaseStats::of((transient..cycles).map(move |m| phase(traj, k, m, j)))).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterSeparation {
    /// Edge gaps between consecutive clusters in increasing order of their means.
    pub gaps: Vec<f64>,
    /// For each gap, `factor` times the larger half-range of its two clusters.
    pub thresholds: Vec<f64>,
    pub separated: bool,
}

/// Checks that the phase clusters are pairwise disjoint with every gap
/// exceeding `factor` times the neighbouring half-ranges.
pub fn cluster_separation(stats: &[PhaseStats], factor: f64) -> ClusterSeparation {
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1].min - w[0].max).collect();
    let thresholds: Vec<f64> = sorted.windows(2).map(|w| factor * w[0].half_range().max(w[1].half_range())).collect();
    let separated = gaps.iter().zip(&thresholds).all(|(g, t)| g > t);
    ClusterSeparation { gaps, thresholds, separated }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Lower,
    Center,
    Upper,
}

/// Side of `k1` on which `value` lies; within `tol` of `k1` counts as the center.
pub fn classify_branch(value: f64, k1: f64, tol: f64) -> Branch {
    if (value - k1).abs() <= tol {
        Branch::Center
    } else if value > k1 {
        Branch::Upper
    } else {
        Branch::Lower
    }
}

/// Mean of `x_n` over `n > transient`.
pub fn tail_mean(traj: &Trajectory, transient: usize) -> f64 {
    let tail = &traj.values[(transient + 1).min(traj.values.len() - 1)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// `c = 1 - nu`
    C,
    Nu,
    Ell1,
    Ell2,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::C => "c",
            SweepParam::Nu => "nu",
            SweepParam::Ell1 => "ell1",
            SweepParam::Ell2 => "ell2",
        }
    }

    /// The template with this parameter set to `value`.
    pub fn apply(&self, template: &SystemSpec, value: f64) -> Result<SystemSpec> {
        match self {
            SweepParam::C => template.with_nu(1.0 - value),
            SweepParam::Nu => template.with_nu(value),
            SweepParam::Ell1 => template.with_amplitudes(value, template.ell2()),
            SweepParam::Ell2 => template.with_amplitudes(template.ell1(), value),
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(SweepParam::C),
            "nu" => Ok(SweepParam::Nu),
            "ell1" => Ok(SweepParam::Ell1),
            "ell2" => Ok(SweepParam::Ell2),
            _ => Err(Error::Usage(format!("unknown sweep parameter '{s}' (expected c, nu, ell1 or ell2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::Usage(format!("invalid sweep {} .. {} with {} points", self.from, self.to, self.points)));
        }
        if self.points == 1 {
            return Ok(vec![self.from]);
        }
        if self.to <= self.from {
            return Err(Error::Usage(format!("sweep end {} must exceed start {}", self.to, self.from)));
        }
        let step = (self.to - self.from) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| if i + 1 == self.points { self.to } else { self.from + step * i as f64 })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum X0Policy {
    Fixed { x0: f64 },
    /// `per_side` starting values spread over `(lo, k1)` and over `(k1, hi)`.
    TwoSided { k1: f64, lo: f64, hi: f64, per_side: usize },
}

impl X0Policy {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            X0Policy::Fixed { x0 } => Ok(vec![x0]),
            X0Policy::TwoSided { k1, lo, hi, per_side } => {
                if per_side == 0 || !(lo < k1 && k1 < hi) {
                    return Err(Error::Usage(format!("two-sided policy needs lo < K1 < hi and per_side >= 1, got {lo}, {k1}, {hi}")));
                }
                let spread = |a: f64, b: f64| (0..per_side).map(move |i| a + (b - a) * (i as f64 + 0.5) / per_side as f64);
                Ok(spread(lo, k1).chain(spread(k1, hi)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationCell {
    pub value: f64,
    pub x0: f64,
    pub samples: Vec<f64>,
    pub status: CellStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationGrid {
    pub param: SweepParam,
    pub transient: usize,
    pub samples_per_cell: usize,
    pub cells: Vec<BifurcationCell>,
}

pub const DEFAULT_BIF_SAMPLES: usize = 64;
pub const DEFAULT_BIF_TRANSIENT: usize = 1000;

/// Runs one trajectory per (parameter value, x0) pair and keeps `x_n` for
/// `transient < n <= transient + samples`. Cell `i` draws noise from
/// substream `i`, cells ordered by parameter value then x0.
pub fn bifurcate(
    template: &SystemSpec,
    sweep: &Sweep,
    x0_policy: &X0Policy,
    transient: usize,
    samples: usize,
    noise: &NoiseModel,
) -> Result<BifurcationGrid> {
    if samples == 0 {
        return Err(Error::Usage("at least one sample per cell is required".into()));
    }
    let values = sweep.values()?;
    let x0s = x0_policy.values()?;
    let specs = values
        .iter()
        .map(|&v| sweep.param.apply(template, v).map_err(|e| Error::Usage(format!("sweep value {v}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|i| (0..x0s.len()).map(move |j| (i, j))).collect();
    let cells = jobs
        .par_iter()
        .enumerate()
        .map(|(cell, &(i, j))| {
            let x0 = x0s[j];
            match simulate(&specs[i], x0, transient + samples, &noise.substream(cell as u64)) {
                Ok(t) => BifurcationCell {
                    value: values[i],
                    x0,
                    samples: t.values[transient + 1..].to_vec(),
                    status: CellStatus::Ok,
                },
                Err(e) => BifurcationCell { value: values[i], x0, samples: Vec::new(), status: CellStatus::Failed(e.to_string()) },
            }
        })
        .collect();
    Ok(BifurcationGrid { param: sweep.param, transient, samples_per_cell: samples, cells })
}

/// Writes `param,x0,sample_index,x`; failed cells contribute no rows.
pub fn write_bifurcation_csv<W: Write>(mut out: W, grid: &BifurcationGrid) -> io::Result<()> {
    writeln!(out, "param,x0,sample_index,x")?;
    for cell in &grid.cells {
        for (i, x) in cell.samples.iter().enumerate() {
            writeln!(out, "{},{},{i},{x}", cell.value, cell.x0)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::PhaseCorridor;
    use crate::maps::MapDef;

    fn det_run() -> Trajectory {
        let s = SystemSpec::det(MapDef::ricker(2.0).unwrap(), 1, 0.5).unwrap();
        simulate(&s, 0.5, 200, &NoiseModel::uniform(0)).unwrap()
    }

    fn corridor(lo: f64, hi: f64) -> PhaseCorridor {
        PhaseCorridor { phase_intervals: vec![(lo, hi)], nu: 0.5, map_label: MapDef::ricker(2.0).unwrap().label() }
    }

    #[test]
    fn equilibrium_of_damped_ricker() {
        // f(0.5 x) = x  =>  0.5 exp(2 (1 - 0.5 x)) = 1  =>  x = 2 - ln 2
        let x = 2.0 - 2f64.ln();
        let t = det_run();
        let rep = containment(&t, &corridor(x, x), 1e-9).unwrap();
        assert!(rep.entrance_m0.is_some());
        assert_eq!(rep.violations_after_entrance, 0);
        let c = extract_cycle(&t, 1, 100).unwrap();
        assert!((c[0].mean - x).abs() < 1e-9);
    }

    #[test]
    fn never_settling_gives_none() {
        let t = det_run();
        let rep = containment(&t, &corridor(10.0, 11.0), 1e-12).unwrap();
        assert_eq!(rep.entrance_m0, None);
    }

    #[test]
    fn mismatched_corridor_is_usage_error() {
        let t = det_run();
        let mut c = corridor(1.0, 2.0);
        c.nu = 0.4;
        assert!(matches!(containment(&t, &c, 0.1), Err(Error::Usage(_))));
    }

    #[test]
    fn short_runs_rejected() {
        let s = SystemSpec::det(MapDef::ricker(2.0).unwrap(), 1, 0.5).unwrap();
        let t = simulate(&s, 0.5, 5, &NoiseModel::uniform(0)).unwrap();
        assert!(containment(&t, &corridor(1.0, 2.0), 0.1).is_err());
        assert!(liminf_limsup(&t, 1, 5).is_err());
    }

    #[test]
    fn sweep_grid_shape() {
        let s = Sweep { param: SweepParam::C, from: 0.0, to: 0.9, points: 10 };
        let v = s.values().unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v[9], 0.9);
        assert!(Sweep { param: SweepParam::C, from: 1.0, to: 0.0, points: 3 }.values().is_err());
        let x0 = X0Policy::TwoSided { k1: 1.0 / 3.0, lo: 0.0, hi: 1.0, per_side: 2 }.values().unwrap();
        assert_eq!(x0.len(), 4);
        assert!(x0[1] < 1.0 / 3.0 && x0[2] > 1.0 / 3.0);
    }

    #[test]
    fn branch_sides() {
        assert_eq!(classify_branch(0.5, 1.0 / 3.0, 1e-9), Branch::Upper);
        assert_eq!(classify_branch(0.1, 1.0 / 3.0, 1e-9), Branch::Lower);
        assert_eq!(classify_branch(1.0 / 3.0, 1.0 / 3.0, 1e-9), Branch::Center);
    }

    #[test]
    fn clusters() {
        let s = |lo: f64, hi: f64| PhaseStats { min: lo, max: hi, mean: 0.5 * (lo + hi), max_dev: 0.5 * (hi - lo) };
        assert!(cluster_separation(&[s(0.0, 0.1), s(1.0, 1.1)], 5.0).separated);
        assert!(!cluster_separation(&[s(0.0, 0.1), s(0.3, 0.4)], 5.0).separated);
    }
}

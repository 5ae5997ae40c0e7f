use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pfcycle::analysis::{
    self, bifurcate as run_bifurcation, classify_branch, cluster_separation, containment, extract_cycle, liminf_limsup,
    tail_mean, tail_within, Branch, CellStatus, SweepParam,
};
use pfcycle::config::{BifurcateBlock, Format, Resolved, RunConfig, X0PolicyName};
use pfcycle::design::{AddCorridor, ControlDesign, Corridor, Delta0Bound, MultCorridor};
use pfcycle::noise::NoiseKind;
use pfcycle::report;
use pfcycle::sim::{self, Scheme, Trajectory};

use crate::exit::{Code, Failure};

pub fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(&format!("reading {}", path.display()), e))?;
    Ok(RunConfig::from_toml_str(&text)?)
}

pub fn apply_overrides(
    cfg: &mut RunConfig,
    seed: Option<u64>,
    out: Option<&Path>,
    formats: Option<&[String]>,
) -> Result<(), Failure> {
    if let Some(seed) = seed {
        cfg.noise.seed = seed;
    }
    if let Some(out) = out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    if let Some(list) = formats {
        cfg.output.formats = list
            .iter()
            .map(|f| match f.trim() {
                "csv" => Ok(Format::Csv),
                "svg" => Ok(Format::Svg),
                other => Err(Failure::usage(format!("unknown format '{other}' (expected csv or svg)"))),
            })
            .collect::<Result<_, _>>()?;
    }
    Ok(())
}

pub fn apply_sweep(
    cfg: &mut RunConfig,
    param: Option<&str>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<usize>,
) -> Result<(), Failure> {
    if param.is_none() && from.is_none() && to.is_none() && points.is_none() {
        return Ok(());
    }
    let block = match cfg.bifurcate.take() {
        Some(b) => b,
        None => {
            let (Some(p), Some(from), Some(to), Some(points)) = (param, from, to, points) else {
                return Err(Failure::usage("without a [bifurcate] table, --param, --from, --to and --points are all required"));
            };
            BifurcateBlock {
                param: p.parse::<SweepParam>()?,
                from,
                to,
                points,
                samples: None,
                transient: None,
                x0_policy: X0PolicyName::Fixed,
                x0_lo: None,
                x0_hi: None,
                per_side: None,
            }
        }
    };
    let mut block = block;
    if let Some(p) = param {
        block.param = p.parse::<SweepParam>()?;
    }
    block.from = from.unwrap_or(block.from);
    block.to = to.unwrap_or(block.to);
    block.points = points.unwrap_or(block.points);
    cfg.bifurcate = Some(block);
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&format!("creating {}", dir.display()), e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(&format!("writing {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(Code::Io, e.to_string()))?;
    write_file(path, &(text + "\n"))
}

fn resolve(cfg: &RunConfig) -> Result<Resolved, Failure> {
    let res = cfg.resolve()?;
    if !res.noise.kind.has_density() && matches!(res.spec.scheme(), Scheme::AddNoise | Scheme::CombinedNoise) {
        log::warn!("two-point noise has no density; the additive-noise corridor guarantees assume one");
    }
    if let NoiseKind::TwoPoint { p } = res.noise.kind {
        if p != 0.5 {
            eprintln!("warning: two-point noise with p = {p} has non-zero mean");
        }
    }
    Ok(res)
}

#[derive(Serialize)]
struct DesignReport<'a> {
    map: String,
    b: f64,
    k: usize,
    thresholds: &'a [f64],
    f_of_b: f64,
    psi_zero: f64,
    psi_bk: f64,
    nu: f64,
    x_hat: f64,
    x_star: f64,
    cycle: &'a [f64],
    max_mult_noise: f64,
    max_delta0: Delta0Bound,
    mult_corridor: Option<MultCorridor>,
    add_corridor: Option<AddCorridor>,
    notes: Vec<String>,
}

struct Corridors {
    mult: Option<MultCorridor>,
    add: Option<AddCorridor>,
    delta0: Delta0Bound,
    notes: Vec<String>,
}

fn corridors(cfg: &RunConfig, d: &ControlDesign) -> Result<Corridors, Failure> {
    let mut notes = Vec::new();
    let ell1 = cfg.system.ell1;
    let mult = if ell1 > 0.0 {
        match d.mult_corridor(ell1) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(format!("multiplicative corridor unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let delta0 = d.max_delta0(cfg.grid())?;
    if !delta0.noise_tolerant {
        notes.push("design tolerates no additive noise".into());
    }
    let level = cfg.design.as_ref().and_then(|x| x.delta0).unwrap_or(cfg.system.ell2);
    let add = if level > 0.0 {
        if level < cfg.system.ell2 {
            notes.push(format!("design.delta0 = {level} is below ell2 = {}", cfg.system.ell2));
        }
        match d.add_corridor(level, cfg.grid()) {
            Ok(c) => {
                if c.y3.is_none() {
                    notes.push(format!("no y3 crossing found below {}", c.y3_scan_bound));
                }
                Some(c)
            }
            Err(e) => {
                notes.push(format!("additive corridor unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(Corridors { mult, add, delta0, notes })
}

fn require_design(res: &Resolved) -> Result<&ControlDesign, Failure> {
    res.design.as_ref().ok_or_else(|| match &res.design_error {
        Some(e) => Failure::new(Code::Infeasible, format!("no admissible design: {e}")),
        None => Failure::new(Code::Infeasible, "shifted schemes have no gain design"),
    })
}

pub fn design(cfg: &RunConfig) -> Result<(), Failure> {
    let res = resolve(cfg)?;
    let d = require_design(&res)?;
    let c = corridors(cfg, d)?;
    let chain = d.psi().chain();
    let rep = DesignReport {
        map: chain.map().label(),
        b: chain.b(),
        k: d.k(),
        thresholds: chain.thresholds(),
        f_of_b: chain.f_of_b(),
        psi_zero: d.psi().psi_zero(),
        psi_bk: d.psi().psi_bk(),
        nu: d.nu(),
        x_hat: d.x_hat(),
        x_star: d.x_star(),
        cycle: d.cycle(),
        max_mult_noise: d.max_mult_noise(),
        max_delta0: c.delta0,
        mult_corridor: c.mult.clone(),
        add_corridor: c.add.clone(),
        notes: c.notes.clone(),
    };
    println!("map        {}", rep.map);
    println!("b          {}   f(b) = {}", rep.b, rep.f_of_b);
    println!("k          {}", rep.k);
    println!("gain range ({}, {})", rep.psi_zero, rep.psi_bk);
    println!("nu         {}", rep.nu);
    println!("x_hat      {}", rep.x_hat);
    println!("x*         {}", rep.x_star);
    println!("cycle      {:?}", rep.cycle);
    println!("ell max    {}", rep.max_mult_noise);
    println!("delta0 max {}", rep.max_delta0.value);
    if let Some(m) = &rep.mult_corridor {
        println!("mult corridor (ell = {}): {:?}", m.ell, m.phase_intervals);
    }
    if let Some(a) = &rep.add_corridor {
        println!("add corridor (delta0 = {}): {:?}", a.delta0, a.phase_intervals);
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    write_json(&out_dir(cfg)?.join("design.json"), &rep)
}

fn run_ensemble(cfg: &RunConfig, res: &Resolved, serial: bool) -> Result<Vec<Trajectory>, Failure> {
    let r = &cfg.run;
    let runs = if serial {
        sim::ensemble(&res.spec, r.x0, r.n, &res.noise, r.runs)
    } else {
        sim::ensemble_par(&res.spec, r.x0, r.n, &res.noise, r.runs)
    };
    Ok(runs?)
}

fn bands(cfg: &RunConfig, res: &Resolved) -> Vec<(f64, f64)> {
    let Some(d) = &res.design else { return Vec::new() };
    match corridors(cfg, d) {
        Ok(Corridors { mult: Some(m), .. }) => m.phase_intervals,
        Ok(Corridors { add: Some(a), .. }) => a.phase_intervals,
        _ => d.cycle().iter().map(|&c| (c, c)).collect(),
    }
}

pub fn simulate(cfg: &RunConfig, serial: bool) -> Result<(), Failure> {
    let res = resolve(cfg)?;
    if let Some(e) = &res.design_error {
        eprintln!("warning: gain {} is outside the designable range ({e})", res.spec.nu());
    }
    let runs = run_ensemble(cfg, &res, serial)?;
    let dir = out_dir(cfg)?;
    if cfg.output.formats.contains(&Format::Csv) {
        let path = dir.join("trajectories.csv");
        let file = fs::File::create(&path).map_err(|e| Failure::io(&format!("creating {}", path.display()), e))?;
        sim::write_csv(BufWriter::new(file), &runs).map_err(|e| Failure::io("writing trajectories", e))?;
    }
    if cfg.output.formats.contains(&Format::Svg) {
        let title = format!("{} {} k={} nu={}", res.spec.map().label(), res.spec.scheme(), res.spec.k(), res.spec.nu());
        write_file(&dir.join("trajectories.svg"), &report::trajectory_svg(&runs, &bands(cfg, &res), &title))?;
    }
    let clamps: usize = runs.iter().map(|t| t.clamps).sum();
    println!("{} runs of {} steps written to {}", runs.len(), cfg.run.n, dir.display());
    if clamps > 0 {
        println!("{clamps} control steps clamped at zero");
    }
    Ok(())
}

pub fn bifurcate(cfg: &RunConfig) -> Result<(), Failure> {
    if cfg.bifurcate.is_none() {
        return Err(Failure::usage("bifurcate needs a [bifurcate] table or --param/--from/--to/--points"));
    }
    let res = resolve(cfg)?;
    let sweep = cfg.sweep()?;
    let policy = cfg.x0_policy()?;
    let (transient, samples) = cfg.bifurcation_samples();
    let grid = run_bifurcation(&res.spec, &sweep, &policy, transient, samples, &res.noise)?;
    let dir = out_dir(cfg)?;
    if cfg.output.formats.contains(&Format::Csv) {
        let path = dir.join("bifurcation.csv");
        let file = fs::File::create(&path).map_err(|e| Failure::io(&format!("creating {}", path.display()), e))?;
        analysis::write_bifurcation_csv(BufWriter::new(file), &grid).map_err(|e| Failure::io("writing grid", e))?;
    }
    if cfg.output.formats.contains(&Format::Svg) {
        let title = format!("{} {} sweep of {}", res.spec.map().label(), res.spec.scheme(), sweep.param.name());
        write_file(&dir.join("bifurcation.svg"), &report::bifurcation_svg(&grid, &title))?;
    }
    let failed = grid.cells.iter().filter(|c| matches!(c.status, CellStatus::Failed(_))).count();
    println!("{} cells ({} failed) written to {}", grid.cells.len(), failed, dir.display());
    Ok(())
}

#[derive(Serialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
enum Status {
    Pass,
    Fail,
    Skipped,
    Info,
}

#[derive(Serialize)]
struct Check {
    name: String,
    status: Status,
    detail: String,
}

fn check(name: &str, ok: bool, detail: String) -> Check {
    Check { name: name.into(), status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn note(name: &str, status: Status, detail: String) -> Check {
    Check { name: name.into(), status, detail }
}

fn containment_checks<C: Corridor>(name: &str, runs: &[Trajectory], c: &C, cfg: &RunConfig, out: &mut Vec<Check>) -> Result<(), Failure> {
    let frac = cfg.design.as_ref().and_then(|d| d.epsilon_fraction).unwrap_or(0.1);
    let eps = frac * c.min_width();
    if !(eps > 0.0) {
        out.push(note(name, Status::Skipped, "corridor has zero width".into()));
        return Ok(());
    }
    let reps = runs.iter().map(|t| containment(t, c, eps)).collect::<Result<Vec<_>, _>>()?;
    let entered = reps.iter().filter(|r| r.contained()).count();
    let m0: Vec<_> = reps.iter().map(|r| r.entrance_m0).collect();
    out.push(check(name, entered == runs.len(), format!("{entered}/{} runs settle, eps = {eps:e}, entrance cycles {m0:?}", runs.len())));
    Ok(())
}

fn tail_checks(name: &str, runs: &[Trajectory], bounds: &[(f64, f64)], cfg: &RunConfig, out: &mut Vec<Check>) -> Result<(), Failure> {
    let tol = cfg.design.as_ref().and_then(|d| d.tail_tol).unwrap_or(1e-3);
    let k = runs[0].spec.k();
    let mut ok_runs = 0;
    let mut worst = 0.0f64;
    for t in runs {
        let tails = liminf_limsup(t, k, cfg.run.transient)?;
        if tail_within(&tails, bounds, tol).iter().all(|&b| b) {
            ok_runs += 1;
        }
        for (&(inf, sup), &(lo, hi)) in tails.iter().zip(bounds) {
            worst = worst.max(lo - inf).max(sup - hi);
        }
    }
    out.push(check(
        name,
        ok_runs == runs.len(),
        format!("{ok_runs}/{} runs within tol {tol:e}; largest excursion {worst:e}", runs.len()),
    ));
    Ok(())
}

fn branch_checks(runs: &[Trajectory], k1: f64, cfg: &RunConfig, out: &mut Vec<Check>) {
    let transient = cfg.run.transient * runs[0].spec.k();
    let branches: Vec<Branch> = runs.iter().map(|t| classify_branch(tail_mean(t, transient), k1, 1e-9)).collect();
    let same = branches.windows(2).all(|w| w[0] == w[1]);
    out.push(check("branch", same, format!("tail side of K1 per run: {branches:?}")));
}

pub fn verify(cfg: &RunConfig) -> Result<(), Failure> {
    let res = resolve(cfg)?;
    let runs = run_ensemble(cfg, &res, false)?;
    let spec = &res.spec;
    let k = spec.k();
    let mut checks = Vec::new();
    if cfg.run.transient >= cfg.run.n / k {
        return Err(Failure::usage(format!("run.transient = {} leaves no cycles", cfg.run.transient)));
    }
    match (&res.design, spec.scheme()) {
        (_, Scheme::ShiftedDetPf | Scheme::ShiftedNoisy) => branch_checks(&runs, spec.k1().unwrap_or_default(), cfg, &mut checks),
        (None, _) => {
            let why = res.design_error.as_ref().map(|e| e.to_string()).unwrap_or_default();
            checks.push(note("design", Status::Skipped, format!("no admissible design for nu = {}: {why}", spec.nu())));
        }
        (Some(d), scheme) => {
            let c = corridors(cfg, d)?;
            for n in &c.notes {
                checks.push(note("design", Status::Info, n.clone()));
            }
            match scheme {
                Scheme::DetPf => {
                    let mut worst = 0.0f64;
                    for t in &runs {
                        for (s, &target) in extract_cycle(t, k, cfg.run.transient)?.iter().zip(d.cycle()) {
                            worst = worst.max((s.mean - target).abs()).max(s.max_dev);
                        }
                    }
                    checks.push(check("cycle", worst < 1e-6, format!("largest deviation from the designed cycle {worst:e}")));
                }
                Scheme::MultNoise => match &c.mult {
                    Some(m) => {
                        containment_checks("mult corridor entrance", &runs, m, cfg, &mut checks)?;
                        tail_checks("mult tail bounds", &runs, &m.phase_intervals, cfg, &mut checks)?;
                    }
                    None => checks.push(note("mult corridor", Status::Skipped, "ell1 outside the admissible range".into())),
                },
                Scheme::AddNoise => {
                    match &c.add {
                        Some(a) => {
                            tail_checks("add tail bounds", &runs, &a.phase_intervals, cfg, &mut checks)?;
                            let frac = cfg.design.as_ref().and_then(|d| d.epsilon_fraction).unwrap_or(0.1);
                            let eps = frac * a.min_width();
                            let settled = runs
                                .iter()
                                .map(|t| containment(t, a, eps).map(|r| r.contained()))
                                .collect::<Result<Vec<_>, _>>()?
                                .iter()
                                .filter(|&&b| b)
                                .count();
                            checks.push(note(
                                "add corridor frequency",
                                Status::Info,
                                format!("{settled}/{} runs settle with eps = {eps:e}", runs.len()),
                            ));
                        }
                        None => checks.push(note("add corridor", Status::Skipped, "ell2 outside the admissible range".into())),
                    }
                    let mut worst = 0.0f64;
                    for t in &runs {
                        let cycles = t.cycles().saturating_sub(1);
                        if k == 1 {
                            let z = sim::phase_map_sequence(spec, t.x0, cycles, &t.noise)?;
                            for (m, zm) in z.iter().enumerate() {
                                worst = worst.max((zm - t.values[m]).abs());
                            }
                        } else {
                            let u = sim::block_map_sequence(spec, t.x0, cycles, &t.noise)?;
                            for (m, um) in u.iter().enumerate() {
                                worst = worst.max((um - t.values[m * k + 1]).abs());
                            }
                        }
                    }
                    checks.push(check("phase recursion", worst < 1e-12, format!("largest deviation {worst:e}")));
                }
                Scheme::CombinedNoise => {
                    let mut ok = 0;
                    for t in &runs {
                        if cluster_separation(&extract_cycle(t, k, cfg.run.transient)?, 5.0).separated {
                            ok += 1;
                        }
                    }
                    checks.push(check("blurred cycle", ok == runs.len(), format!("{ok}/{} runs with separated phase clusters", runs.len())));
                }
                _ => unreachable!(),
            }
        }
    }
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
            Status::Info => "INFO",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    write_json(&out_dir(cfg)?.join("verify.json"), &checks)?;
    if checks.iter().any(|c| c.status == Status::Fail) {
        Err(Failure::new(Code::Verification, "verification failed"))
    } else if checks.iter().any(|c| c.status == Status::Skipped) {
        Err(Failure::new(Code::Infeasible, "some checks were skipped"))
    } else {
        Ok(())
    }
}

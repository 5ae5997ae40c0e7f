//! Corridor guarantees checked by simulation on parameters the design accepts.

use pfcycle::analysis::{
    bifurcate, classify_branch, containment, extract_cycle, liminf_limsup, tail_mean, tail_within, Branch, CellStatus, Sweep,
    SweepParam, X0Policy,
};
use pfcycle::calculus::{IterateChain, PsiFunction};
use pfcycle::design::{ControlDesign, Corridor, PhaseCorridor, DEFAULT_GRID};
use pfcycle::maps::MapDef;
use pfcycle::noise::NoiseModel;
use pfcycle::roots;
use pfcycle::sim::{block_map_sequence, ensemble, phase_map_sequence, simulate, SystemSpec};

fn psi(map: &MapDef, k: usize) -> PsiFunction {
    PsiFunction::new(IterateChain::build(map, map.default_b().unwrap(), k).unwrap()).unwrap()
}

fn ricker_design(frac: f64) -> ControlDesign {
    let p = psi(&MapDef::ricker(2.8).unwrap(), 3);
    let fb = p.chain().f_of_b();
    ControlDesign::for_target(&p, frac * fb).unwrap()
}

#[test]
fn multiplicative_corridor_traps_every_run() {
    for frac in [0.3, 0.5, 0.8] {
        let d = ricker_design(frac);
        let ell = 0.5 * d.max_mult_noise();
        let c = d.mult_corridor(ell).unwrap();
        let spec = SystemSpec::mult(MapDef::ricker(2.8).unwrap(), 3, d.nu(), ell).unwrap();
        for t in ensemble(&spec, 0.5, 3000, &NoiseModel::uniform(7), 5).unwrap() {
            let rep = containment(&t, &c, 0.1 * c.min_width()).unwrap();
            assert!(rep.contained(), "x* fraction {frac}: {rep:?}");
            let tails = liminf_limsup(&t, 3, rep.entrance_m0.unwrap()).unwrap();
            assert!(tail_within(&tails, &c.phase_intervals, 1e-3).iter().all(|&b| b));
            assert_eq!(rep.violations_after_first_entry, 0, "x* fraction {frac}");
        }
    }
}

#[test]
fn deterministic_control_converges_to_designed_cycle() {
    let d = ricker_design(0.5);
    let spec = SystemSpec::det(MapDef::ricker(2.8).unwrap(), 3, d.nu()).unwrap();
    for x0 in [0.1, 0.5, 2.0] {
        let t = simulate(&spec, x0, 3000, &NoiseModel::uniform(0)).unwrap();
        let stats = extract_cycle(&t, 3, 900).unwrap();
        for (s, &c) in stats.iter().zip(d.cycle()) {
            assert!((s.mean - c).abs() < 1e-6 && s.max_dev < 1e-6, "x0 {x0}: {s:?} vs {c}");
        }
        let rep = containment(&t, &d.cycle_corridor(), 1e-9).unwrap();
        assert!(rep.contained());
    }
}

#[test]
fn small_fixed_gain_settles_on_a_three_cycle() {
    // nu = 0.002 lies above the designable interval for r = 2.8, yet the
    // controlled map still has an attracting fixed point of g on its
    // decreasing branch.
    let f = MapDef::ricker(2.8).unwrap();
    let spec = SystemSpec::det(f.clone(), 3, 0.002).unwrap();
    let g = |x: f64| -> f64 {
        let mut y = 0.002 * x;
        for _ in 0..3 {
            y = f.eval(y).unwrap();
        }
        y
    };
    for x0 in [0.1, 0.5, 2.0] {
        let t = simulate(&spec, x0, 3000, &NoiseModel::uniform(0)).unwrap();
        let stats = extract_cycle(&t, 3, 900).unwrap();
        assert!(stats.iter().all(|s| s.max_dev < 1e-6));
        let x_star = stats[2].mean;
        assert!((g(x_star) - x_star).abs() < 1e-9);
        let slope = (g(x_star + 1e-7) - g(x_star - 1e-7)) / 2e-7;
        assert!(slope < 0.0 && slope > -1.0, "slope {slope}");
    }
}

#[test]
fn zero_amplitude_noisy_schemes_match_deterministic_runs() {
    let f = MapDef::ricker(2.8).unwrap();
    let noise = NoiseModel::uniform(3);
    let det = simulate(&SystemSpec::det(f.clone(), 3, 0.002).unwrap(), 0.5, 600, &noise).unwrap();
    for spec in [
        SystemSpec::mult(f.clone(), 3, 0.002, 0.0).unwrap(),
        SystemSpec::add(f.clone(), 3, 0.002, 0.0).unwrap(),
        SystemSpec::combined(f.clone(), 3, 0.002, 0.0, 0.0).unwrap(),
    ] {
        let t = simulate(&spec, 0.5, 600, &noise).unwrap();
        let same = det.values.iter().zip(&t.values).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{}", spec.scheme());
    }
}

#[test]
fn additive_runs_settle_between_y1_and_y2_for_k1() {
    // With k = 1 the run is its own subsampled recursion, so its tail lies in
    // [y1, y2]. The noise-free images f(x_hat1) = y1 + delta0 and
    // f(x_hat2) = y2 - delta0 are strictly inside that interval and are
    // crossed by the noisy run.
    for (map, frac) in [(MapDef::ricker(2.8).unwrap(), 0.6), (MapDef::quail_standard(), 0.7)] {
        let p = psi(&map, 1);
        let d = ControlDesign::for_target(&p, frac * p.chain().f_of_b()).unwrap();
        let bound = d.max_delta0(DEFAULT_GRID).unwrap();
        let delta0 = 0.5 * bound.value;
        let c = d.add_corridor(delta0, DEFAULT_GRID).unwrap();
        let spec = SystemSpec::add(map.clone(), 1, d.nu(), delta0).unwrap();
        let noise = NoiseModel::uniform(11);
        // g'(x*) is close to one for the quail design, so the climb from x0 is slow.
        for (i, t) in ensemble(&spec, 0.5, 6000, &noise, 5).unwrap().iter().enumerate() {
            let tails = liminf_limsup(t, 1, 3000).unwrap();
            assert!(
                tail_within(&tails, &[(c.y1, c.y2)], 1e-9)[0],
                "{} run {i}: {tails:?} vs [{}, {}]",
                map.label(),
                c.y1,
                c.y2
            );
            let (lo, hi) = c.phase_intervals[0];
            assert!((lo - (c.y1 + delta0)).abs() < 1e-9 && (hi - (c.y2 - delta0)).abs() < 1e-9);
            let z = phase_map_sequence(&spec, 0.5, 6000, &noise.substream(i as u64)).unwrap();
            assert_eq!(z, t.values);
        }
    }
}

#[test]
fn block_recursion_reproduces_additive_runs() {
    let p = psi(&MapDef::quail_standard(), 3);
    let d = ControlDesign::for_target(&p, 0.8 * p.chain().f_of_b()).unwrap();
    let spec = SystemSpec::add(MapDef::quail_standard(), 3, d.nu(), 1e-3).unwrap();
    let noise = NoiseModel::uniform(5);
    let t = simulate(&spec, 0.5, 3000, &noise).unwrap();
    let u = block_map_sequence(&spec, 0.5, 999, &noise).unwrap();
    let worst = u.iter().enumerate().map(|(m, um)| (um - t.values[3 * m + 1]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12);
}

#[test]
fn deterministic_entrance_persists() {
    let d = ricker_design(0.5);
    let c = d.mult_corridor(0.5 * d.max_mult_noise()).unwrap();
    let spec = SystemSpec::det(MapDef::ricker(2.8).unwrap(), 3, d.nu()).unwrap();
    // Only the last phase is constrained: the corridor around x_hat / nu.
    let last = c.phase_intervals[2];
    let loose = PhaseCorridor {
        phase_intervals: vec![(0.0, f64::MAX), (0.0, f64::MAX), last],
        nu: d.nu(),
        map_label: c.map_label.clone(),
    };
    for x0 in [0.05, 0.5, 3.0] {
        let t = simulate(&spec, x0, 1500, &NoiseModel::uniform(0)).unwrap();
        let rep = containment(&t, &loose, f64::MIN_POSITIVE).unwrap();
        assert!(rep.first_entry.is_some());
        assert_eq!(rep.violations_after_first_entry, 0);
    }
}

#[test]
fn entrance_is_monotone_in_epsilon() {
    let d = ricker_design(0.5);
    let ell = 0.5 * d.max_mult_noise();
    let c = d.mult_corridor(ell).unwrap();
    let spec = SystemSpec::mult(MapDef::ricker(2.8).unwrap(), 3, d.nu(), ell).unwrap();
    let t = simulate(&spec, 0.5, 3000, &NoiseModel::uniform(2)).unwrap();
    let w = c.min_width();
    let m0: Vec<_> = [1e-4, 1e-2, 0.1, 1.0]
        .iter()
        .map(|e| containment(&t, &c, e * w).unwrap().entrance_m0.unwrap_or(usize::MAX))
        .collect();
    assert!(m0.windows(2).all(|p| p[1] <= p[0]), "{m0:?}");
}

#[test]
fn zero_width_corridor_rejects_noisy_run() {
    let d = ricker_design(0.5);
    let spec = SystemSpec::mult(MapDef::ricker(2.8).unwrap(), 3, d.nu(), 0.5 * d.max_mult_noise()).unwrap();
    let t = simulate(&spec, 0.5, 1000, &NoiseModel::uniform(4)).unwrap();
    assert_eq!(containment(&t, &d.cycle_corridor(), 1e-12).unwrap().entrance_m0, None);
}

#[test]
fn transient_choice_does_not_matter_inside_corridor() {
    let d = ricker_design(0.5);
    let ell = 0.5 * d.max_mult_noise();
    let c = d.mult_corridor(ell).unwrap();
    let spec = SystemSpec::mult(MapDef::ricker(2.8).unwrap(), 3, d.nu(), ell).unwrap();
    // Start on the designed cycle's last phase so every cycle is inside.
    let t = simulate(&spec, d.x_star(), 1500, &NoiseModel::uniform(8)).unwrap();
    for transient in [0, 10, 200] {
        let tails = liminf_limsup(&t, 3, transient).unwrap();
        assert!(tail_within(&tails, &c.phase_intervals, 0.0).iter().all(|&b| b));
    }
}

#[test]
fn shifted_cubic_has_two_branches() {
    let spec = SystemSpec::shifted(MapDef::cubic45(), 1, 0.7, 1.0 / 3.0).unwrap();
    let grid = bifurcate(
        &spec,
        &Sweep { param: SweepParam::C, from: 0.3, to: 0.3, points: 1 },
        &X0Policy::TwoSided { k1: 1.0 / 3.0, lo: 0.0, hi: 1.0, per_side: 4 },
        1000,
        64,
        &NoiseModel::uniform(0),
    )
    .unwrap();
    let branches: Vec<Branch> = grid
        .cells
        .iter()
        .map(|c| classify_branch(c.samples.iter().sum::<f64>() / c.samples.len() as f64, 1.0 / 3.0, 1e-9))
        .collect();
    assert_eq!(&branches[..4], &[Branch::Lower; 4]);
    assert_eq!(&branches[4..], &[Branch::Upper; 4]);

    // Both equilibria solve f(K1 + nu (x - K1)) = x.
    let f = MapDef::cubic45();
    let h = |x: f64| Ok(f.eval(1.0 / 3.0 + 0.7 * (x - 1.0 / 3.0))? - x);
    let lower = roots::bisect_sign_change(h, 0.05, 0.3).unwrap();
    let upper = roots::bisect_sign_change(h, 0.4, 0.6).unwrap();
    let det_lo = simulate(&spec, 0.2, 2000, &NoiseModel::uniform(0)).unwrap();
    let det_hi = simulate(&spec, 0.6, 2000, &NoiseModel::uniform(0)).unwrap();
    assert!((tail_mean(&det_lo, 1000) - lower).abs() < 1e-9);
    assert!((tail_mean(&det_hi, 1000) - upper).abs() < 1e-9);
}

#[test]
fn single_point_sweep_matches_simulation_tail() {
    let spec = SystemSpec::mult(MapDef::ricker(2.8).unwrap(), 3, 0.002, 1e-4).unwrap();
    let noise = NoiseModel::uniform(9);
    let grid = bifurcate(
        &spec,
        &Sweep { param: SweepParam::Ell1, from: 1e-4, to: 1e-4, points: 1 },
        &X0Policy::Fixed { x0: 0.5 },
        300,
        64,
        &noise,
    )
    .unwrap();
    let t = simulate(&spec, 0.5, 364, &noise).unwrap();
    assert_eq!(grid.cells.len(), 1);
    assert_eq!(grid.cells[0].samples, t.values[301..]);
}

#[test]
fn cubic6_sweep_splits_into_branches() {
    let k1 = 0.5 - 3f64.sqrt() / 6.0;
    let spec = SystemSpec::shifted(MapDef::cubic6(), 1, 1.0, k1).unwrap();
    let grid = bifurcate(
        &spec,
        &Sweep { param: SweepParam::C, from: 0.0, to: 0.9, points: 19 },
        &X0Policy::TwoSided { k1, lo: 0.0, hi: 1.0, per_side: 4 },
        1000,
        64,
        &NoiseModel::uniform(0),
    )
    .unwrap();
    assert!(grid.cells.iter().all(|c| matches!(c.status, CellStatus::Ok)));
    let mut split_columns = 0;
    for col in grid.cells.chunks(8) {
        let side = |c: &pfcycle::analysis::BifurcationCell| {
            classify_branch(c.samples.iter().sum::<f64>() / c.samples.len() as f64, k1, 1e-9)
        };
        let lower = col.iter().filter(|c| side(c) == Branch::Lower).count();
        let upper = col.iter().filter(|c| side(c) == Branch::Upper).count();
        if lower > 0 && upper > 0 {
            split_columns += 1;
        }
    }
    assert!(split_columns > 0);
}

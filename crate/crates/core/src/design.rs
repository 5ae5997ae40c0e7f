//! Control synthesis: the gain `nu(x*)` that turns `x*` into a fixed point of
//! `g(x) = f^k(nu x)`, the admissible noise levels for both noise types, and
//! the per-phase corridors that trap the noisy trajectory.

use serde::Serialize;

use crate::calculus::PsiFunction;
use crate::error::{Error, Result};
use crate::roots;

/// Largest accepted `|f^k(nu x*) - x*|`.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Default grid for the sup/inf scans of the additive corridor.
pub const DEFAULT_GRID: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ControlDesign {
    psi: PsiFunction,
    x_star: f64,
    x_hat: f64,
    nu: f64,
    cycle: Vec<f64>,
}

impl ControlDesign {
    /// Designs the gain for a target `x*` in `(0, f(b))`.
    pub fn for_target(psi: &PsiFunction, x_star: f64) -> Result<Self> {
        let chain = psi.chain();
        let f_b = chain.f_of_b();
        if !(x_star > 0.0 && x_star < f_b) {
            return Err(Error::Range(format!("target x* = {x_star} outside (0, f(b)) = (0, {f_b})")));
        }
        let x_hat = chain.inverse_iterate(chain.k(), x_star)?;
        let nu = x_hat / x_star;
        Self::assemble(psi, x_star, x_hat, nu)
    }

    /// Designs from the preimage `x_hat` in `(0, b_k)`; the target becomes
    /// `x* = f^k(x_hat)`.
    pub fn for_preimage(psi: &PsiFunction, x_hat: f64) -> Result<Self> {
        let chain = psi.chain();
        if !(x_hat > 0.0 && x_hat < chain.b_k()) {
            return Err(Error::Range(format!("preimage {x_hat} outside (0, b_k) = (0, {})", chain.b_k())));
        }
        let x_star = chain.iterate(chain.k(), x_hat)?;
        Self::for_target(psi, x_star)
    }

    /// Designs from a prescribed gain `nu` in `(Psi_k(0), Psi_k(b_k))`.
    pub fn for_gain(psi: &PsiFunction, nu: f64) -> Result<Self> {
        if !(nu > psi.psi_zero() && nu < psi.psi_bk()) {
            return Err(Error::Range(format!("gain {nu} outside ({}, {})", psi.psi_zero(), psi.psi_bk())));
        }
        let x_hat = psi.psi_inverse(nu)?;
        let x_star = psi.chain().iterate(psi.chain().k(), x_hat)?;
        Self::assemble(psi, x_star, x_hat, nu)
    }

    // A gain derived from a target is inside the designable interval by
    // construction, even where rounding puts it a few ulps past Psi_k(0).
    fn assemble(psi: &PsiFunction, x_star: f64, x_hat: f64, nu: f64) -> Result<Self> {
        let chain = psi.chain();
        let residual = (chain.iterate(chain.k(), nu * x_star)? - x_star).abs();
        if residual > FIXED_POINT_TOL {
            return Err(Error::Numeric(format!("fixed-point residual {residual} exceeds {FIXED_POINT_TOL}")));
        }
        let cycle = (1..=chain.k()).map(|j| chain.iterate(j, x_hat)).collect::<Result<Vec<_>>>()?;
        Ok(Self { psi: psi.clone(), x_star, x_hat, nu, cycle })
    }

    pub fn psi(&self) -> &PsiFunction {
        &self.psi
    }

    pub fn k(&self) -> usize {
        self.psi.chain().k()
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `[f(x_hat), ..., f^k(x_hat)]`; the last entry is `x*`.
    pub fn cycle(&self) -> &[f64] {
        &self.cycle
    }

    /// `g(x) = f^k(nu x)`
    pub fn g(&self, x: f64) -> Result<f64> {
        self.psi.chain().iterate(self.k(), self.nu * x)
    }

    /// `b_k / nu`, the right end of the interval on which `g` is increasing.
    pub fn g_branch_end(&self) -> f64 {
        self.psi.chain().b_k() / self.nu
    }

    /// `min{Psi_k(b_k) - nu, nu - Psi_k(0)}`; multiplicative amplitudes must
    /// stay strictly below it.
    pub fn max_mult_noise(&self) -> f64 {
        (self.psi.psi_bk() - self.nu).min(self.nu - self.psi.psi_zero()).max(0.0)
    }

    pub fn mult_corridor(&self, ell: f64) -> Result<MultCorridor> {
        let bound = self.max_mult_noise();
        if !(ell > 0.0 && ell < bound) {
            return Err(Error::NoiseBound(format!("multiplicative amplitude {ell} outside (0, {bound})")));
        }
        let y_lo = self.psi.psi_inverse(self.nu - ell)?;
        let y_hi = self.psi.psi_inverse(self.nu + ell)?;
        if !(0.0 < y_lo && y_lo <= self.x_hat && self.x_hat <= y_hi && y_hi < self.psi.chain().b_k()) {
            return Err(Error::Numeric(format!(
                "corridor endpoints out of order: {y_lo} <= {} <= {y_hi}",
                self.x_hat
            )));
        }
        let chain = self.psi.chain();
        let phase_intervals = (1..=self.k())
            .map(|j| Ok((chain.iterate(j, y_lo)?, chain.iterate(j, y_hi)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultCorridor {
            ell,
            y_lo,
            y_hi,
            phase_intervals,
            k: self.k(),
            nu: self.nu,
            map_label: chain.map().label(),
        })
    }

    /// Upper bound for the additive level `delta0`.
    pub fn max_delta0(&self, grid: usize) -> Result<Delta0Bound> {
        delta0_bound(|x| self.g(x), self.x_star, self.g_branch_end(), grid)
    }

    pub fn add_corridor(&self, delta0: f64, grid: usize) -> Result<AddCorridor> {
        let tail = (10.0 * self.g_branch_end()).max(10.0 * self.x_star);
        self.add_corridor_with_tail(delta0, grid, tail)
    }

    /// As [`ControlDesign::add_corridor`], scanning for `y3` up to `tail_bound`.
    pub fn add_corridor_with_tail(&self, delta0: f64, grid: usize, tail_bound: f64) -> Result<AddCorridor> {
        let bound = self.max_delta0(grid)?;
        if !(delta0 > 0.0 && delta0 <= bound.value) {
            return Err(Error::NoiseBound(format!("delta0 = {delta0} outside (0, {}]", bound.value)));
        }
        let x_star = self.x_star;
        let step = x_star / grid as f64;

        // y1 = sup{x in [0, x*] : g(x) - x >= delta0}
        let h1 = |x: f64| -> Result<f64> { Ok(self.g(x)? - x - delta0) };
        let mut anchor = None;
        for i in (1..grid).rev() {
            let x = step * i as f64;
            if h1(x)? >= 0.0 {
                anchor = Some(x);
                break;
            }
        }
        if h1(bound.peak_at)? >= 0.0 && anchor.map_or(true, |a| bound.peak_at > a) {
            anchor = Some(bound.peak_at);
        }
        let anchor = anchor.ok_or_else(|| {
            Error::NoiseBound(format!("no point of [0, x*] with g(x) - x >= {delta0}"))
        })?;
        let right = (((anchor / step).floor() + 1.0) * step).min(x_star);
        let y1 = roots::bisect_sign_change(h1, anchor, right)?;

        // y2 = inf{x in [x*, b_k/nu] : g(x) - x <= -delta0}
        let upper = self.g_branch_end();
        let h2 = |x: f64| -> Result<f64> { Ok(self.g(x)? - x + delta0) };
        let y2 = first_nonpositive(h2, x_star, upper, grid)?.ok_or_else(|| {
            Error::NoiseBound(format!("no point of [x*, b_k/nu] with g(x) - x <= -{delta0}"))
        })?;

        // y3 = inf{x >= x* : g(x) - delta0 <= y1}, scanned up to the tail bound.
        let domain_cap = self.psi.chain().map().domain_hi() / self.nu;
        let y3_scan_bound = tail_bound.min(domain_cap);
        let h3 = |x: f64| -> Result<f64> { Ok(self.g(x)? - delta0 - y1) };
        let y3 = if y3_scan_bound > x_star {
            first_nonpositive(h3, x_star, y3_scan_bound, grid)?
        } else {
            None
        };

        let chain = self.psi.chain();
        let x_hat1 = self.nu * y1;
        let x_hat2 = self.nu * y2;
        let phase_intervals = (1..=self.k())
            .map(|j| Ok((chain.iterate(j, x_hat1)?, chain.iterate(j, x_hat2)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AddCorridor {
            delta0,
            y1,
            y2,
            y3,
            y3_scan_bound,
            x_hat1,
            x_hat2,
            grid_tol: (upper - x_star).max(x_star) / grid as f64,
            phase_intervals,
            k: self.k(),
            nu: self.nu,
            map_label: chain.map().label(),
        })
    }
}

/// Scans `[lo, hi]` on a uniform grid for the first point where `h <= 0` and
/// refines by bisection against the previous grid point.
fn first_nonpositive<H>(h: H, lo: f64, hi: f64, grid: usize) -> Result<Option<f64>>
where
    H: Fn(f64) -> Result<f64>,
{
    let step = (hi - lo) / grid as f64;
    let mut prev = lo;
    if h(lo)? <= 0.0 {
        return Ok(Some(lo));
    }
    for i in 1..=grid {
        let x = if i == grid { hi } else { lo + step * i as f64 };
        if h(x)? <= 0.0 {
            return roots::bisect_sign_change(&h, x, prev).map(Some);
        }
        prev = x;
    }
    Ok(None)
}

/// The two quantities bounding `delta0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Delta0Bound {
    /// `min(escape_margin, peak_excess)`
    pub value: f64,
    /// `b_k/nu - g(b_k/nu)`
    pub escape_margin: f64,
    /// `max_{x in [0, x*]} (g(x) - x)`
    pub peak_excess: f64,
    /// Where the maximum is attained.
    pub peak_at: f64,
    /// False when either term is not positive: no additive level is admissible.
    pub noise_tolerant: bool,
}

/// Computes the `delta0` bound for an arbitrary `g` with fixed point
/// `x_star` and increasing branch ending at `upper`. The maximum over
/// `[0, x*]` is taken on a grid and refined by golden-section search around
/// the best cell.
pub fn delta0_bound<G>(g: G, x_star: f64, upper: f64, grid: usize) -> Result<Delta0Bound>
where
    G: Fn(f64) -> Result<f64>,
{
    if grid < 1000 {
        return Err(Error::Parameter(format!("grid must be at least 1000, got {grid}")));
    }
    let escape_margin = upper - g(upper)?;
    let excess = |x: f64| -> Result<f64> { Ok(g(x)? - x) };
    let step = x_star / grid as f64;
    let (mut best_i, mut best) = (0usize, excess(0.0)?);
    for i in 1..=grid {
        let v = excess(step * i as f64)?;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut peak_at, mut peak_excess) = (step * best_i as f64, best);
    if best_i > 0 && best_i < grid {
        let (x, v) = roots::golden_max(&excess, step * (best_i - 1) as f64, step * (best_i + 1) as f64)?;
        if v > peak_excess {
            peak_at = x;
            peak_excess = v;
        }
    }
    let value = escape_margin.min(peak_excess).max(0.0);
    Ok(Delta0Bound {
        value,
        escape_margin,
        peak_excess,
        peak_at,
        noise_tolerant: escape_margin > 0.0 && peak_excess > 0.0,
    })
}

/// Per-phase intervals `(lo_j, hi_j)`, `j = 1..=k`, that a controlled
/// trajectory is expected to enter and never leave.
pub trait Corridor {
    fn phase_intervals(&self) -> &[(f64, f64)];
    fn k(&self) -> usize;
    fn nu(&self) -> f64;
    fn map_label(&self) -> &str;

    /// Width of the narrowest phase interval.
    fn min_width(&self) -> f64 {
        self.phase_intervals().iter().map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min)
    }
}

/// Corridor for multiplicative noise of amplitude `ell`.
#[derive(Clone, Debug, Serialize)]
pub struct MultCorridor {
    pub ell: f64,
    /// `Psi_k^{-1}(nu - ell)`
    pub y_lo: f64,
    /// `Psi_k^{-1}(nu + ell)`
    pub y_hi: f64,
    pub phase_intervals: Vec<(f64, f64)>,
    pub k: usize,
    pub nu: f64,
    pub map_label: String,
}

/// Corridor for additive noise bounded by `delta0`.
#[derive(Clone, Debug, Serialize)]
pub struct AddCorridor {
    pub delta0: f64,
    pub y1: f64,
    pub y2: f64,
    /// `None` when no crossing exists below `y3_scan_bound`.
    pub y3: Option<f64>,
    pub y3_scan_bound: f64,
    pub x_hat1: f64,
    pub x_hat2: f64,
    pub grid_tol: f64,
    pub phase_intervals: Vec<(f64, f64)>,
    pub k: usize,
    pub nu: f64,
    pub map_label: String,
}

/// A corridor given directly by its intervals.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseCorridor {
    pub phase_intervals: Vec<(f64, f64)>,
    pub nu: f64,
    pub map_label: String,
}

macro_rules! corridor_impl {
    ($t:ty, $k:expr) => {
        impl Corridor for $t {
            fn phase_intervals(&self) -> &[(f64, f64)] {
                &self.phase_intervals
            }
            fn k(&self) -> usize {
                $k(self)
            }
            fn nu(&self) -> f64 {
                self.nu
            }
            fn map_label(&self) -> &str {
                &self.map_label
            }
        }
    };
}

corridor_impl!(MultCorridor, |c: &MultCorridor| c.k);
corridor_impl!(AddCorridor, |c: &AddCorridor| c.k);
corridor_impl!(PhaseCorridor, |c: &PhaseCorridor| c.phase_intervals.len());

impl ControlDesign {
    /// The degenerate corridor made of the designed cycle points.
    pub fn cycle_corridor(&self) -> PhaseCorridor {
        PhaseCorridor {
            phase_intervals: self.cycle.iter().map(|&c| (c, c)).collect(),
            nu: self.nu,
            map_label: self.psi.chain().map().label(),
        }
    }
}

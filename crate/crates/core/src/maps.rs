//! Population maps and a numerical certifier for the monotone-branch
//! hypothesis the control construction relies on.
//!
//! A map `f` is admissible with threshold `b` when `f(0) = 0`, `f` is
//! strictly increasing and `f(x)/x` strictly decreasing on `(0, b]`,
//! `f(b) > b`, and `f(b)/b > f(x)/x` for every `x > b`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::roots;

/// Evaluation rule of a user supplied map.
pub type MapRule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomMap {
    name: String,
    rule: MapRule,
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    /// `x e^{r(1-x)}`
    Ricker { r: f64 },
    /// `max{r x (1-x), 0}`
    LogisticTruncated { r: f64 },
    /// Bobwhite quail model `x (A + B / (1 + x^gamma))`.
    Quail { a: f64, b: f64, gamma: f64 },
    /// `9/2 x^2 (1-x)` on `[0, 1]`.
    Cubic45,
    /// `6 x^2 (1-x)` on `[0, 1]`.
    Cubic6,
    Custom(CustomMap),
}

/// A one-dimensional map with `f(0) = 0` and `f >= 0` on its domain.
#[derive(Clone, Debug)]
pub struct MapDef {
    family: Family,
    domain_hi: f64,
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {value}")))
    }
}

impl MapDef {
    pub fn ricker(r: f64) -> Result<Self> {
        Ok(Self { family: Family::Ricker { r: positive("r", r)? }, domain_hi: f64::INFINITY })
    }

    pub fn logistic(r: f64) -> Result<Self> {
        Ok(Self {
            family: Family::LogisticTruncated { r: positive("r", r)? },
            domain_hi: f64::INFINITY,
        })
    }

    pub fn quail(a: f64, b: f64, gamma: f64) -> Result<Self> {
        let (a, b) = (positive("A", a)?, positive("B", b)?);
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::Parameter(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { family: Family::Quail { a, b, gamma }, domain_hi: f64::INFINITY })
    }

    /// The quail model with `A = 0.55`, `B = 3.45`, `gamma = 9`.
    pub fn quail_standard() -> Self {
        Self { family: Family::Quail { a: 0.55, b: 3.45, gamma: 9.0 }, domain_hi: f64::INFINITY }
    }

    pub fn cubic45() -> Self {
        Self { family: Family::Cubic45, domain_hi: 1.0 }
    }

    pub fn cubic6() -> Self {
        Self { family: Family::Cubic6, domain_hi: 1.0 }
    }

    /// A map given by an arbitrary rule on `[0, domain_hi]`. The rule must
    /// satisfy `rule(0) = 0` and stay nonnegative; violations surface as
    /// errors from [`MapDef::eval`].
    pub fn custom<F>(name: impl Into<String>, domain_hi: f64, rule: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(domain_hi > 0.0) {
            return Err(Error::Parameter(format!("domain_hi must be positive, got {domain_hi}")));
        }
        Ok(Self {
            family: Family::Custom(CustomMap { name: name.into(), rule: Arc::new(rule) }),
            domain_hi,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain_hi(&self) -> f64 {
        self.domain_hi
    }

    /// Human-readable label, also used to match corridors to trajectories.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Ricker { r } => format!("ricker(r={r})"),
            Family::LogisticTruncated { r } => format!("logistic(r={r})"),
            Family::Quail { a, b, gamma } => format!("quail(A={a}, B={b}, gamma={gamma})"),
            Family::Cubic45 => "cubic45".to_string(),
            Family::Cubic6 => "cubic6".to_string(),
            Family::Custom(c) => c.name.clone(),
        }
    }

    /// Evaluates `f(x)` for `0 <= x <= domain_hi`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x <= self.domain_hi) {
            return Err(Error::Domain(format!(
                "{} evaluated at x = {x}, outside [0, {}]",
                self.label(),
                self.domain_hi
            )));
        }
        let y = match &self.family {
            Family::Ricker { r } => x * (r * (1.0 - x)).exp(),
            Family::LogisticTruncated { r } => (r * x * (1.0 - x)).max(0.0),
            Family::Quail { a, b, gamma } => x * (a + b / (1.0 + x.powf(*gamma))),
            Family::Cubic45 => 4.5 * x * x * (1.0 - x),
            Family::Cubic6 => 6.0 * x * x * (1.0 - x),
            Family::Custom(c) => (c.rule)(x),
        };
        if y.is_finite() && y >= 0.0 {
            Ok(y)
        } else {
            Err(Error::Numeric(format!("{} returned {y} at x = {x}", self.label())))
        }
    }

    /// The composition `f^k` as a map of its own.
    pub fn iterated(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("iteration count must be at least 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let base = self.clone();
        let name = format!("{}^{k}", self.label());
        Self::custom(name, self.domain_hi, move |x| {
            let mut y = x;
            for _ in 0..k {
                y = match base.eval(y) {
                    Ok(v) => v,
                    Err(_) => return f64::NAN,
                };
            }
            y
        })
    }

    /// Tail horizon for the dominance check: [`default_tail_bound`], raised
    /// to 100 for the quail family whose `f(x)/x` only approaches `A` slowly.
    pub fn tail_bound_for(&self, b: f64) -> f64 {
        match self.family {
            Family::Quail { .. } => default_tail_bound(b).max(100.0),
            _ => default_tail_bound(b),
        }
    }

    /// Threshold known in closed form: `1/r` for Ricker, `1/2` for logistic.
    pub fn closed_form_threshold(&self) -> Option<f64> {
        match self.family {
            Family::Ricker { r } => Some(1.0 / r),
            Family::LogisticTruncated { .. } => Some(0.5),
            _ => None,
        }
    }

    /// A threshold `b` for which [`MapDef::certify`] passes at the default
    /// resolution.
    ///
    /// Closed-form thresholds are used where known. Otherwise the first local
    /// maximum of `f` is located and halved until the certificate passes,
    /// which is sound because the hypothesis is inherited by every smaller
    /// threshold.
    pub fn default_b(&self) -> Result<f64> {
        let mut b = match self.closed_form_threshold() {
            Some(b) => b,
            None => self.first_local_max()?,
        };
        for _ in 0..DEFAULT_B_HALVINGS {
            let cert = self.certify(b, DEFAULT_RESOLUTION, self.tail_bound_for(b))?;
            if cert.passed() {
                return Ok(b);
            }
            if self.closed_form_threshold().is_some() {
                break;
            }
            b *= 0.5;
        }
        Err(Error::Certification(format!(
            "no admissible threshold found for {} below {}",
            self.label(),
            self.domain_hi
        )))
    }

    fn first_local_max(&self) -> Result<f64> {
        let hi = self.domain_hi.min(LOCAL_MAX_SEARCH_HI);
        let n = LOCAL_MAX_GRID;
        let step = hi / n as f64;
        let mut prev = self.eval(step)?;
        for i in 2..=n {
            let x = step * i as f64;
            let y = self.eval(x)?;
            if y <= prev {
                // Discrete increase test d(x) = f(x + h) - f(x - h) changes sign
                // inside [x - 2 step, x].
                let h = step * 1e-3;
                let lo = (x - 2.0 * step).max(h);
                let peak = roots::bisect_sign_change(
                    |t| Ok(self.eval(t + h)? - self.eval((t - h).max(0.0))?),
                    lo,
                    x,
                )?;
                return Ok(peak);
            }
            prev = y;
        }
        Ok(hi)
    }

    /// Checks the monotone-branch hypothesis on a uniform grid of `(0, b]`
    /// refined geometrically towards zero, and the tail dominance condition
    /// on a uniform grid of `(b, tail_bound]` (capped at the domain).
    pub fn certify(&self, b: f64, resolution: usize, tail_bound: f64) -> Result<BranchCertificate> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Parameter(format!("threshold must be positive, got {b}")));
        }
        if resolution < 1000 {
            return Err(Error::Parameter(format!("resolution must be at least 1000, got {resolution}")));
        }
        if !(tail_bound > b) {
            return Err(Error::Parameter(format!("tail bound {tail_bound} must exceed b = {b}")));
        }
        let verdict = match self.check_assumption(b, resolution, tail_bound) {
            Ok(v) => v,
            Err(e) => Verdict::Fail(Violation::Evaluation { message: e.to_string() }),
        };
        Ok(BranchCertificate {
            map: self.clone(),
            b,
            grid_resolution: resolution,
            tail_bound,
            verdict,
        })
    }

    fn check_assumption(&self, b: f64, resolution: usize, tail_bound: f64) -> Result<Verdict> {
        if b > self.domain_hi {
            return Ok(Verdict::Fail(Violation::OutsideDomain { b }));
        }
        let h = b / resolution as f64;
        let mut grid: Vec<f64> = (1..=ZERO_REFINEMENT).rev().map(|i| h * 0.5f64.powi(i as i32)).collect();
        grid.extend((1..=resolution).map(|i| if i == resolution { b } else { h * i as f64 }));

        let mut prev_x = grid[0];
        let mut prev_f = self.eval(prev_x)?;
        let first_ratio = prev_f / prev_x;
        let mut prev_ratio = first_ratio;
        for &x in &grid[1..] {
            let fx = self.eval(x)?;
            if !(fx > prev_f) {
                return Ok(Verdict::Fail(Violation::NotIncreasing { x1: prev_x, x2: x }));
            }
            let ratio = fx / x;
            // Ties at rounding level are tolerated; f(x)/x may saturate in
            // floating point near zero (e.g. x^9 vanishing against 1).
            if ratio > prev_ratio * (1.0 + RATIO_SLACK) {
                return Ok(Verdict::Fail(Violation::RatioNotDecreasing { x1: prev_x, x2: x }));
            }
            prev_x = x;
            prev_f = fx;
            prev_ratio = ratio;
        }
        let fb = prev_f;
        if !(prev_ratio < first_ratio) {
            return Ok(Verdict::Fail(Violation::RatioNotDecreasing { x1: grid[0], x2: b }));
        }
        if !(fb > b) {
            return Ok(Verdict::Fail(Violation::NoGrowth { b, fb }));
        }

        let tail_hi = tail_bound.min(self.domain_hi);
        if tail_hi > b {
            let slope_b = fb / b;
            let step = (tail_hi - b) / resolution as f64;
            for i in 1..=resolution {
                let x = if i == resolution { tail_hi } else { b + step * i as f64 };
                let ratio = self.eval(x)? / x;
                if !(ratio < slope_b) {
                    return Ok(Verdict::Fail(Violation::TailNotDominated { x }));
                }
            }
        }
        Ok(Verdict::Pass)
    }
}

/// Grid resolution used by [`MapDef::default_b`] and chain construction.
pub const DEFAULT_RESOLUTION: usize = 10_000;

/// `max(10 b, 10)`
pub fn default_tail_bound(b: f64) -> f64 {
    (10.0 * b).max(10.0)
}

const DEFAULT_B_HALVINGS: usize = 60;
const LOCAL_MAX_SEARCH_HI: f64 = 10.0;
const LOCAL_MAX_GRID: usize = 100_000;
const ZERO_REFINEMENT: usize = 30;
const RATIO_SLACK: f64 = 8.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `f(x2) <= f(x1)` for grid points `x1 < x2 <= b`.
    NotIncreasing { x1: f64, x2: f64 },
    /// `f(x2)/x2 > f(x1)/x1` beyond rounding for `x1 < x2 <= b`.
    RatioNotDecreasing { x1: f64, x2: f64 },
    /// `f(b) <= b`.
    NoGrowth { b: f64, fb: f64 },
    /// `f(x)/x >= f(b)/b` at a tail point.
    TailNotDominated { x: f64 },
    OutsideDomain { b: f64 },
    Evaluation { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotIncreasing { x1, x2 } => write!(f, "f not increasing between {x1} and {x2}"),
            Violation::RatioNotDecreasing { x1, x2 } => {
                write!(f, "f(x)/x not decreasing between {x1} and {x2}")
            }
            Violation::NoGrowth { b, fb } => write!(f, "f(b) = {fb} does not exceed b = {b}"),
            Violation::TailNotDominated { x } => write!(f, "f(x)/x >= f(b)/b at x = {x}"),
            Violation::OutsideDomain { b } => write!(f, "threshold {b} lies outside the domain"),
            Violation::Evaluation { message } => write!(f, "evaluation failed: {message}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(Violation),
}

#[derive(Clone, Debug)]
pub struct BranchCertificate {
    pub map: MapDef,
    pub b: f64,
    pub grid_resolution: usize,
    pub tail_bound: f64,
    pub verdict: Verdict,
}

impl BranchCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_values() {
        let ricker = MapDef::ricker(2.8).unwrap();
        assert_eq!(ricker.eval(0.0).unwrap(), 0.0);
        assert_eq!(ricker.eval(1.0).unwrap(), 1.0);
        let cubic = MapDef::cubic45();
        assert!((cubic.eval(2.0 / 3.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((cubic.eval(1.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ricker_equilibrium_for_several_rates() {
        for r in [1.5, 2.8, 3.5] {
            let f = MapDef::ricker(r).unwrap();
            assert!((f.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_is_truncated() {
        let f = MapDef::logistic(3.8).unwrap();
        assert_eq!(f.eval(1.5).unwrap(), 0.0);
        assert!(f.eval(0.5).unwrap() > 0.0);
    }

    #[test]
    fn domain_errors() {
        let f = MapDef::ricker(2.8).unwrap();
        assert!(matches!(f.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(f.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(MapDef::cubic6().eval(1.01), Err(Error::Domain(_))));
    }

    #[test]
    fn parameter_validation() {
        assert!(MapDef::ricker(-1.0).is_err());
        assert!(MapDef::quail(0.55, 3.45, 1.0).is_err());
        assert!(MapDef::custom("bad", 0.0, |x| x).is_err());
    }

    #[test]
    fn default_thresholds() {
        let r = MapDef::ricker(2.8).unwrap().default_b().unwrap();
        assert!((r - 1.0 / 2.8).abs() < 1e-15);
        assert_eq!(MapDef::logistic(3.8).unwrap().default_b().unwrap(), 0.5);
    }

    #[test]
    fn certify_ricker() {
        let f = MapDef::ricker(2.8).unwrap();
        assert!(f.certify(1.0 / 2.8, 10_000, 10.0).unwrap().passed());
        assert!(f.certify(0.1, 10_000, 10.0).unwrap().passed());
        let fail = f.certify(1.0, 10_000, 10.0).unwrap();
        match fail.verdict {
            Verdict::Fail(Violation::NotIncreasing { x1, x2 }) => {
                // the first decreasing pair straddles or follows the peak at 1/r
                assert!(x2 > 1.0 / 2.8 && x1 > 1.0 / 2.8 - 1e-3 && x2 <= 1.0 && x1 < x2);
                assert!(f.eval(x1).unwrap() >= f.eval(x2).unwrap());
            }
            other => panic!("unexpected verdict {other:?}"),
        }
    }

    #[test]
    fn certify_validates_arguments() {
        let f = MapDef::ricker(2.8).unwrap();
        assert!(f.certify(0.0, 10_000, 10.0).is_err());
        assert!(f.certify(0.3, 999, 10.0).is_err());
        assert!(f.certify(0.3, 10_000, 0.2).is_err());
    }

    #[test]
    fn cubic_maps_have_no_admissible_threshold() {
        // f(x)/x = c x (1 - x) grows near zero, and f(x) < x there.
        for f in [MapDef::cubic45(), MapDef::cubic6()] {
            assert!(matches!(f.default_b(), Err(Error::Certification(_))));
            assert!(!f.certify(0.3, 10_000, 10.0).unwrap().passed());
        }
    }

    #[test]
    fn linear_map_fails_strict_ratio_test() {
        let f = MapDef::custom("2x", f64::INFINITY, |x| 2.0 * x).unwrap();
        let cert = f.certify(0.5, 1000, 10.0).unwrap();
        assert!(matches!(cert.verdict, Verdict::Fail(Violation::RatioNotDecreasing { .. })));
    }

    #[test]
    fn iterated_composes() {
        let f = MapDef::ricker(2.8).unwrap();
        let f3 = f.iterated(3).unwrap();
        let x = 0.2;
        let direct = f.eval(f.eval(f.eval(x).unwrap()).unwrap()).unwrap();
        assert_eq!(f3.eval(x).unwrap(), direct);
        assert!(f.iterated(0).is_err());
    }
}

//! Iteration machinery on the monotone branch: `f^j`, its inverse, the
//! threshold chain `b_1 > b_2 > ... > b_k`, and `Psi_k(x) = x / f^k(x)`.

use crate::error::{Error, Result};
use crate::maps::{MapDef, DEFAULT_RESOLUTION};
use crate::roots::{self, TOL_INV};

/// Relative agreement at which the shrinking evaluation of `Psi_k(0+)` stops.
pub const TOL_LIMIT: f64 = 1e-10;

const LIMIT_MAX_HALVINGS: usize = 1000;

/// Thresholds `b_j = f^{1-j}(b)` for `j = 1..=k`.
#[derive(Clone, Debug)]
pub struct IterateChain {
    map: MapDef,
    b: f64,
    k: usize,
    b_seq: Vec<f64>,
    f_b: f64,
}

impl IterateChain {
    /// Certifies `(map, b)` at the default resolution and builds the chain.
    pub fn build(map: &MapDef, b: f64, k: usize) -> Result<Self> {
        let cert = map.certify(b, DEFAULT_RESOLUTION, map.tail_bound_for(b))?;
        if let crate::maps::Verdict::Fail(v) = &cert.verdict {
            return Err(Error::Certification(format!("{} with b = {b}: {v}", map.label())));
        }
        Self::build_uncertified(map, b, k)
    }

    /// Builds the chain without checking the monotone-branch hypothesis. Only
    /// `f(b) > b` and the strict decrease of the chain are enforced.
    pub fn build_uncertified(map: &MapDef, b: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("cycle length k must be at least 1".into()));
        }
        let f_b = map.eval(b)?;
        if !(f_b > b) {
            return Err(Error::Certification(format!("f(b) = {f_b} does not exceed b = {b}")));
        }
        let mut b_seq = Vec::with_capacity(k);
        b_seq.push(b);
        for _ in 1..k {
            let prev = *b_seq.last().expect("chain is nonempty");
            let next = roots::bisect_increasing(|x| map.eval(x), prev, 0.0, prev)?;
            if !(next > 0.0 && next < prev) {
                return Err(Error::Numeric(format!("threshold chain not decreasing: {next} after {prev}")));
            }
            b_seq.push(next);
        }
        Ok(Self { map: map.clone(), b, k, b_seq, f_b })
    }

    pub fn map(&self) -> &MapDef {
        &self.map
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `[b_1, ..., b_k]`
    pub fn thresholds(&self) -> &[f64] {
        &self.b_seq
    }

    /// `b_k`, the end of the branch on which `f^k` is increasing.
    pub fn b_k(&self) -> f64 {
        self.b_seq[self.k - 1]
    }

    pub fn f_of_b(&self) -> f64 {
        self.f_b
    }

    fn check_order(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.k {
            return Err(Error::Parameter(format!("iterate order {j} outside 1..={}", self.k)));
        }
        Ok(())
    }

    /// `f^j(x)` by plain composition, for any `x >= 0` in the domain.
    pub fn iterate(&self, j: usize, x: f64) -> Result<f64> {
        self.check_order(j)?;
        compose(&self.map, j, x)
    }

    /// `f^j(x)` restricted to the increasing branch `[0, b_j]`.
    pub fn iterate_on_branch(&self, j: usize, x: f64) -> Result<f64> {
        self.check_order(j)?;
        let bj = self.b_seq[j - 1];
        if !(x >= 0.0 && x <= bj) {
            return Err(Error::Domain(format!("x = {x} outside the branch [0, {bj}] of f^{j}")));
        }
        compose(&self.map, j, x)
    }

    /// The unique `x` in `[0, b_j]` with `f^j(x) = y`, for `0 <= y <= f(b)`.
    /// Computed as `j` nested single-step inversions, the i-th bracketed
    /// by `[0, b_i]`.
    pub fn inverse_iterate(&self, j: usize, y: f64) -> Result<f64> {
        self.check_order(j)?;
        if !(y >= 0.0 && y <= self.f_b) {
            return Err(Error::Range(format!("y = {y} outside [0, f(b)] = [0, {}]", self.f_b)));
        }
        let mut x = y;
        for i in 0..j {
            if x == 0.0 {
                return Ok(0.0);
            }
            let target = x;
            x = roots::bisect_increasing(|t| self.map.eval(t), target, 0.0, self.b_seq[i])?;
        }
        Ok(x)
    }
}

fn compose(map: &MapDef, j: usize, x: f64) -> Result<f64> {
    let mut y = x;
    for _ in 0..j {
        y = map.eval(y)?;
    }
    Ok(y)
}

/// `Psi_k(x) = x / f^k(x)` on `(0, b_k)` together with its endpoint values.
#[derive(Clone, Debug)]
pub struct PsiFunction {
    chain: IterateChain,
    psi_zero: f64,
    psi_bk: f64,
}

impl PsiFunction {
    pub fn new(chain: IterateChain) -> Result<Self> {
        let b_k = chain.b_k();
        let psi_bk = b_k / compose(&chain.map, chain.k, b_k)?;
        let psi_zero = psi_zero_limit(&chain)?;
        if !(psi_zero >= 0.0 && psi_zero < psi_bk && psi_bk < 1.0) {
            return Err(Error::Numeric(format!(
                "Psi endpoints out of order: Psi(0) = {psi_zero}, Psi(b_k) = {psi_bk}"
            )));
        }
        Ok(Self { chain, psi_zero, psi_bk })
    }

    pub fn chain(&self) -> &IterateChain {
        &self.chain
    }

    /// `Psi_k(0) = lim_{x -> 0+} x / f^k(x)`
    pub fn psi_zero(&self) -> f64 {
        self.psi_zero
    }

    /// `Psi_k(b_k) = b_k / f(b)`
    pub fn psi_bk(&self) -> f64 {
        self.psi_bk
    }

    fn eval_unchecked(&self, x: f64) -> Result<f64> {
        Ok(x / compose(&self.chain.map, self.chain.k, x)?)
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        let b_k = self.chain.b_k();
        if !(x > 0.0 && x < b_k) {
            return Err(Error::Domain(format!("Psi evaluated at {x}, outside (0, {b_k})")));
        }
        self.eval_unchecked(x)
    }

    /// Preimage of `mu` in `(0, b_k)`; `mu` must lie strictly between
    /// `Psi_k(0)` and `Psi_k(b_k)`.
    pub fn psi_inverse(&self, mu: f64) -> Result<f64> {
        if !(mu > self.psi_zero && mu < self.psi_bk) {
            return Err(Error::Range(format!(
                "gain {mu} outside ({}, {})",
                self.psi_zero, self.psi_bk
            )));
        }
        let x = roots::bisect_increasing(|x| self.eval_unchecked(x), mu, 0.0, self.chain.b_k())?;
        let residual = (self.eval_unchecked(x)? - mu).abs();
        if residual > TOL_INV {
            return Err(Error::Numeric(format!("Psi inverse residual {residual} at mu = {mu}")));
        }
        Ok(x)
    }
}

/// Evaluates `x / f^k(x)` at `x = b_k 2^{-i}` until successive values agree
/// to [`TOL_LIMIT`] relative; returns zero once the values drop below
/// [`TOL_LIMIT`] (the case `f^k(x)/x -> infinity`).
pub fn psi_zero_limit(chain: &IterateChain) -> Result<f64> {
    let mut x = chain.b_k();
    let mut prev = x / compose(&chain.map, chain.k, x)?;
    for _ in 0..LIMIT_MAX_HALVINGS {
        x *= 0.5;
        if x == 0.0 {
            break;
        }
        let value = x / compose(&chain.map, chain.k, x)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("Psi evaluated to {value} at {x}")));
        }
        if value > prev * (1.0 + 8.0 * f64::EPSILON) {
            return Err(Error::Numeric(format!(
                "Psi not monotone towards zero: {value} at {x} exceeds {prev}"
            )));
        }
        if value < TOL_LIMIT {
            return Ok(0.0);
        }
        if prev - value <= TOL_LIMIT * value {
            return Ok(value);
        }
        prev = value;
    }
    Err(Error::Numeric("Psi limit at zero did not settle".into()))
}

//! Circle arithmetic, break configurations, jets, piecewise maps and quadrature.
//!
//! Circle maps are represented by their lifts `F: R -> R` with
//! `F(x + 2pi) = F(x) + 2pi`. Arcs between consecutive breaks are therefore plain
//! real intervals `[p_i, p_{i+1}]`, the last one being `[p_n, p_1 + 2pi]`.

mod jet;
mod map;
mod quad;

pub use jet::{compose_jets, invert_jet, Jet, MAX_JET_ORDER};
pub use map::{JetSource, PiecewiseJetMap};
pub use quad::{integrate_arc, QuadratureSpec};

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Tolerance for continuity and break-matching checks.
pub const TOL_CONT: f64 = 1e-9;

/// Minimal separation between distinct breaks.
pub const EPS_SEP: f64 = 1e-6;

/// Lower bound on one-sided derivatives of diffeomorphism pieces.
pub const DELTA_MIN: f64 = 1e-8;

/// Which one-sided limit to take at a break point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    Left,
    Right,
    /// Right at breaks; rejected by strict evaluation.
    #[default]
    Auto,
}

impl Side {
    /// Side pointing into `[a, b]` from whichever endpoint `x` is closer to.
    pub fn toward_interior(x: f64, a: f64, b: f64) -> Side {
        if x - a <= b - x {
            Side::Right
        } else {
            Side::Left
        }
    }

    fn resolve(self) -> Side {
        match self {
            Side::Auto => Side::Right,
            s => s,
        }
    }
}

/// Cyclically ordered, labeled tuple of break points `(p_1, ..., p_n)`.
///
/// Stored as lift coordinates `p_1 < p_2 < ... < p_n < p_1 + 2pi`. Labels are
/// preserved: arrows map `p_i` to the `i`-th target break, so configurations are
/// never re-sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakConfig {
    lift: Vec<f64>,
}

impl BreakConfig {
    /// Builds a configuration from angles given in cyclic order.
    ///
    /// `p_1` is reduced into `[0, 2pi)` and every following angle is lifted to the
    /// first representative above its predecessor.
    pub fn new(angles: &[f64]) -> Result<Self> {
        Self::with_min_gap(angles, EPS_SEP)
    }

    pub fn with_min_gap(angles: &[f64], min_gap: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidBreaks("at least one break is required".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidBreaks("angles must be finite".into()));
        }
        let mut lift = Vec::with_capacity(angles.len());
        lift.push(angles[0].rem_euclid(TWO_PI));
        for &a in &angles[1..] {
            let prev = *lift.last().unwrap();
            lift.push(prev + (a - prev).rem_euclid(TWO_PI));
        }
        Self::validate(lift, min_gap)
    }

    /// Accepts lift coordinates verbatim (no reduction), validating order and gaps.
    pub fn from_lift(lift: Vec<f64>) -> Result<Self> {
        Self::validate(lift, EPS_SEP)
    }

    fn validate(lift: Vec<f64>, min_gap: f64) -> Result<Self> {
        if lift.is_empty() {
            return Err(Error::InvalidBreaks("at least one break is required".into()));
        }
        if lift.len() > crate::expr::MAX_PARAMS {
            return Err(Error::InvalidBreaks(format!(
                "at most {} breaks are supported, got {}",
                crate::expr::MAX_PARAMS,
                lift.len()
            )));
        }
        let n = lift.len();
        for i in 0..n {
            let gap = if i + 1 < n { lift[i + 1] - lift[i] } else { lift[0] + TWO_PI - lift[n - 1] };
            if !(gap >= min_gap) {
                return Err(Error::InvalidBreaks(format!(
                    "gap {gap:e} after break {} is below the separation {min_gap:e}",
                    i + 1
                )));
            }
        }
        Ok(BreakConfig { lift })
    }

    pub fn n(&self) -> usize {
        self.lift.len()
    }

    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    /// Endpoints of arc `i` (0-based) on the lift.
    pub fn arc(&self, i: usize) -> (f64, f64) {
        let n = self.n();
        assert!(i < n, "arc index {i} out of range for {n} breaks");
        let end = if i + 1 < n { self.lift[i + 1] } else { self.lift[0] + TWO_PI };
        (self.lift[i], end)
    }

    /// Same labels with `p_1` reduced into `[0, 2pi)`.
    pub fn normalized(&self) -> BreakConfig {
        let shift = self.lift[0].rem_euclid(TWO_PI) - self.lift[0];
        BreakConfig { lift: self.lift.iter().map(|p| p + shift).collect() }
    }

    /// `p + h * direction` in lift coordinates.
    pub fn displaced(&self, direction: &[f64], h: f64) -> Result<BreakConfig> {
        if direction.len() != self.n() {
            return Err(Error::BreakCountMismatch(self.n(), direction.len()));
        }
        let lift = self.lift.iter().zip(direction).map(|(p, d)| p + h * d).collect();
        Self::validate(lift, EPS_SEP)
    }

    /// Label-wise equality of points on the circle.
    pub fn approx_eq(&self, other: &BreakConfig, tol: f64) -> bool {
        self.n() == other.n()
            && self.lift.iter().zip(&other.lift).all(|(a, b)| circle_distance(*a, *b) <= tol)
    }
}

/// Distance between two angles on the circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Position of a point relative to a sorted list of lift breaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    /// Arc whose piece governs the point.
    pub arc: usize,
    /// The point translated into the lift window of `arc`.
    pub x: f64,
    /// Translation applied, a multiple of `2pi`.
    pub shift: f64,
    pub at_break: bool,
}

/// Finds the arc of `breaks` (sorted lift coordinates spanning less than `2pi`)
/// that governs `x`. Points within [`TOL_CONT`] of a break are resolved by `side`.
pub fn locate(breaks: &[f64], x: f64, side: Side) -> Located {
    let n = breaks.len();
    debug_assert!(n > 0);
    let b0 = breaks[0];
    let mut k = ((x - b0) / TWO_PI).floor();
    let mut xr = x - TWO_PI * k;
    if xr >= b0 + TWO_PI {
        xr -= TWO_PI;
        k += 1.0;
    } else if xr < b0 {
        xr += TWO_PI;
        k -= 1.0;
    }
    let mut j = breaks.iter().rposition(|&b| b <= xr).unwrap_or(0);
    let upper = if j + 1 < n { breaks[j + 1] } else { b0 + TWO_PI };
    let at_lower = xr - breaks[j] <= TOL_CONT;
    let at_upper = upper - xr <= TOL_CONT;
    match side.resolve() {
        Side::Left if at_lower => {
            if j == 0 {
                j = n - 1;
                xr += TWO_PI;
                k -= 1.0;
            } else {
                j -= 1;
            }
        }
        Side::Right if at_upper => {
            if j + 1 == n {
                j = 0;
                xr -= TWO_PI;
                k += 1.0;
            } else {
                j += 1;
            }
        }
        _ => {}
    }
    Located { arc: j, x: xr, shift: TWO_PI * k, at_break: at_lower || at_upper }
}

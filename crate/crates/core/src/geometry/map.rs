use std::fmt;
use std::sync::Arc;

use super::{compose_jets, invert_jet, locate, Jet, Side, DELTA_MIN, MAX_JET_ORDER, TOL_CONT, TWO_PI};
use crate::error::{Error, Result};
use crate::expr::{Derivatives, Expression, Var, SLOT_COUNT};

/// A differentiable lift evaluated numerically, e.g. a flow map.
pub trait JetSource: Send + Sync + fmt::Debug {
    /// Jet of the lift at `x`; `side` selects the one-sided jet at breaks.
    fn jet(&self, x: f64, side: Side, order: usize) -> Result<Jet>;

    /// Highest order [`JetSource::jet`] supports.
    fn max_order(&self) -> usize;
}

#[derive(Debug)]
enum MapNode {
    /// Expression lifts, one per arc of `breaks` (or one shared piece). With no
    /// breaks the single piece is a global lift.
    Pieces { breaks: Vec<f64>, pieces: Vec<Derivatives> },
    Compose { outer: PiecewiseJetMap, inner: PiecewiseJetMap },
    Inverse { inner: PiecewiseJetMap },
    Source(Arc<dyn JetSource>),
}

/// Lift of a piecewise smooth degree-one circle map, with jets up to order 4.
///
/// `breaks` lists the lift coordinates (sorted, spanning less than `2pi`) where
/// the map may fail to be smooth. An empty list means a globally smooth lift.
#[derive(Debug, Clone)]
pub struct PiecewiseJetMap {
    breaks: Arc<[f64]>,
    node: Arc<MapNode>,
}

impl PiecewiseJetMap {
    /// Globally smooth lift given by one expression in `x`.
    pub fn from_lift(lift: Expression) -> Result<Self> {
        Self::build(Vec::new(), vec![lift])
    }

    /// Per-arc lifts; `pieces[i]` governs `[breaks[i], breaks[i+1]]`. A single
    /// piece may be given for all arcs.
    ///
    /// No diffeomorphism checks are made; see [`PiecewiseJetMap::validate_diffeo`].
    pub fn from_pieces(breaks: &[f64], pieces: Vec<Expression>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::InvalidBreaks("piecewise map without breaks".into()));
        }
        if pieces.len() != 1 && pieces.len() != breaks.len() {
            return Err(Error::BreakCountMismatch(breaks.len(), pieces.len()));
        }
        check_sorted(breaks)?;
        Self::build(breaks.to_vec(), pieces)
    }

    fn build(breaks: Vec<f64>, pieces: Vec<Expression>) -> Result<Self> {
        for piece in &pieces {
            if let Some(v) = piece.free_vars().into_iter().find(|v| *v != Var::X) {
                return Err(Error::InvalidArgument(format!("map piece `{piece}` depends on {v}")));
            }
        }
        let pieces = pieces.iter().map(|e| Derivatives::new(e, Var::X, MAX_JET_ORDER)).collect();
        Ok(PiecewiseJetMap {
            breaks: breaks.clone().into(),
            node: Arc::new(MapNode::Pieces { breaks, pieces }),
        })
    }

    /// Wraps a numeric jet source whose nonsmooth points are `breaks`.
    pub fn from_source(breaks: &[f64], source: Arc<dyn JetSource>) -> Result<Self> {
        check_sorted(breaks)?;
        Ok(PiecewiseJetMap { breaks: breaks.into(), node: Arc::new(MapNode::Source(source)) })
    }

    pub fn identity() -> Self {
        Self::from_lift(Expression::x()).expect("identity lift")
    }

    /// Lift `x + a`.
    pub fn rotation(a: f64) -> Self {
        Self::from_lift(Expression::x() + Expression::constant(a)).expect("rotation lift")
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn max_order(&self) -> usize {
        match &*self.node {
            MapNode::Pieces { .. } => MAX_JET_ORDER,
            MapNode::Compose { outer, inner } => outer.max_order().min(inner.max_order()),
            MapNode::Inverse { inner } => inner.max_order(),
            MapNode::Source(s) => s.max_order(),
        }
    }

    /// Expression pieces, if this map is expression-backed.
    pub fn pieces(&self) -> Option<Vec<Expression>> {
        match &*self.node {
            MapNode::Pieces { pieces, .. } => Some(pieces.iter().map(|d| d.expr(0).clone()).collect()),
            _ => None,
        }
    }

    /// Jet at `x`; at a break the jet is one-sided as selected by `side`.
    pub fn jet(&self, x: f64, side: Side, order: usize) -> Result<Jet> {
        let supported = self.max_order();
        if order > supported {
            return Err(Error::OrderTooHigh { requested: order, supported });
        }
        match &*self.node {
            MapNode::Pieces { breaks, pieces } => {
                let (idx, xr, shift) = if breaks.is_empty() {
                    (0, x, 0.0)
                } else {
                    let l = locate(breaks, x, side);
                    (if pieces.len() == 1 { 0 } else { l.arc }, l.x, l.shift)
                };
                let mut slots = [f64::NAN; SLOT_COUNT];
                slots[Var::X.slot()] = xr;
                let mut out = [0.0; MAX_JET_ORDER + 1];
                pieces[idx].eval(order, &slots, &mut out)?;
                Ok(Jet::new(&out[..=order]).shifted(shift))
            }
            MapNode::Compose { outer, inner } => {
                let g = inner.jet(x, side, order)?;
                let f = outer.jet(g.value(), side, order)?;
                Ok(compose_jets(&f, &g))
            }
            MapNode::Inverse { inner } => {
                let x0 = inner.solve(x)?;
                let f = inner.jet(x0, side, order)?;
                Ok(invert_jet(x0, &f))
            }
            MapNode::Source(s) => s.jet(x, side, order),
        }
    }

    /// Like [`PiecewiseJetMap::jet`], but rejects `Side::Auto` at a break.
    pub fn jet_strict(&self, x: f64, side: Side, order: usize) -> Result<Jet> {
        if side == Side::Auto && self.is_break(x) {
            return Err(Error::AmbiguousSide { x });
        }
        self.jet(x, side, order)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.jet(x, Side::Auto, 0)?.value())
    }

    fn is_break(&self, x: f64) -> bool {
        !self.breaks.is_empty() && locate(&self.breaks, x, Side::Auto).at_break
    }

    /// Solves `F(x) = y` on the lift by Newton iteration safeguarded with bisection.
    pub fn solve(&self, y: f64) -> Result<f64> {
        let value = |x: f64| -> Result<f64> { Ok(self.jet(x, Side::Auto, 0)?.value()) };
        let guess = 2.0 * y - value(y)?;
        let (mut lo, mut hi) = (guess - 0.5, guess + 0.5);
        let mut step = 0.5;
        while value(lo)? > y {
            step *= 2.0;
            lo = guess - step;
            if step > 1e3 {
                return Err(Error::InverseDiverged { y });
            }
        }
        step = 0.5;
        while value(hi)? < y {
            step *= 2.0;
            hi = guess + step;
            if step > 1e3 {
                return Err(Error::InverseDiverged { y });
            }
        }
        let mut x = guess.clamp(lo, hi);
        for _ in 0..200 {
            let j = self.jet(x, Side::Auto, 1)?;
            let r = j.value() - y;
            if r == 0.0 {
                return Ok(x);
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - r / j.d(1);
            let next = if j.d(1) > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let scale = 1.0 + next.abs();
            if (next - x).abs() <= 1e-15 * scale || hi - lo <= 4.0 * f64::EPSILON * scale {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::InverseDiverged { y })
    }

    /// `f o g` with break set `g^{-1}(breaks f) ∪ breaks g`.
    pub fn compose(f: &PiecewiseJetMap, g: &PiecewiseJetMap) -> Result<Self> {
        let mut pts: Vec<f64> = g.breaks.to_vec();
        for &b in f.breaks.iter() {
            pts.push(g.solve(b)?);
        }
        Ok(Self::compose_with_breaks(f, g, merge_breaks(pts)))
    }

    /// `f o g` with a caller-supplied break set (used when the sets are known to match).
    pub fn compose_with_breaks(f: &PiecewiseJetMap, g: &PiecewiseJetMap, breaks: Vec<f64>) -> Self {
        PiecewiseJetMap {
            breaks: breaks.into(),
            node: Arc::new(MapNode::Compose { outer: f.clone(), inner: g.clone() }),
        }
    }

    /// Inverse lift; its breaks are the images of the breaks of `self`.
    pub fn invert(&self) -> Result<Self> {
        let breaks = self
            .breaks
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let side = if i == 0 { Side::Right } else { Side::Left };
                Ok(self.jet(b, side, 0)?.value())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PiecewiseJetMap { breaks: breaks.into(), node: Arc::new(MapNode::Inverse { inner: self.clone() }) })
    }

    /// Checks continuity at breaks, degree one, and one-sided derivatives at least
    /// [`DELTA_MIN`] at the breaks and at `samples` interior points per arc.
    pub fn validate_diffeo(&self, samples: usize) -> Result<()> {
        let arcs: Vec<(f64, f64)> = if self.breaks.is_empty() {
            vec![(0.0, TWO_PI)]
        } else {
            let n = self.breaks.len();
            (0..n)
                .map(|i| {
                    let end = if i + 1 < n { self.breaks[i + 1] } else { self.breaks[0] + TWO_PI };
                    (self.breaks[i], end)
                })
                .collect()
        };
        for &b in self.breaks.iter().skip(1) {
            let l = self.jet(b, Side::Left, 0)?.value();
            let r = self.jet(b, Side::Right, 0)?.value();
            if (l - r).abs() > TOL_CONT * (1.0 + l.abs()) {
                return Err(Error::Discontinuous { at: b, jump: r - l });
            }
        }
        let (b0, _) = arcs[0];
        let defect = self.jet(b0 + TWO_PI, Side::Left, 0)?.value() - self.jet(b0, Side::Right, 0)?.value() - TWO_PI;
        if defect.abs() > TOL_CONT * (1.0 + b0.abs()) {
            return Err(Error::NotDegreeOne { defect });
        }
        let check = |x: f64, side: Side| -> Result<()> {
            let d = self.jet(x, side, 1)?.d(1);
            if !(d >= DELTA_MIN) {
                return Err(Error::DerivativeTooSmall { x, derivative: d, min: DELTA_MIN });
            }
            Ok(())
        };
        for &(a, b) in &arcs {
            check(a, Side::Right)?;
            check(b, Side::Left)?;
            for k in 1..=samples {
                check(a + (b - a) * k as f64 / (samples + 1) as f64, Side::Auto)?;
            }
        }
        Ok(())
    }
}

fn check_sorted(breaks: &[f64]) -> Result<()> {
    let sorted = breaks.windows(2).all(|w| w[0] < w[1]);
    let span_ok = breaks.last().zip(breaks.first()).is_none_or(|(l, f)| l - f < TWO_PI);
    if !sorted || !span_ok || breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidBreaks(format!("breaks must be increasing within one turn: {breaks:?}")));
    }
    Ok(())
}

/// Sorts points into one lift window starting at the smallest and removes
/// duplicates within [`TOL_CONT`] (also across the wrap).
fn merge_breaks(mut pts: Vec<f64>) -> Vec<f64> {
    if pts.is_empty() {
        return pts;
    }
    let start = pts.iter().copied().fold(f64::INFINITY, f64::min);
    for p in &mut pts {
        *p = start + (*p - start).rem_euclid(TWO_PI);
        if start + TWO_PI - *p <= TOL_CONT {
            *p = start;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= TOL_CONT);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn lift(s: &str) -> PiecewiseJetMap {
        PiecewiseJetMap::from_lift(parse(s).unwrap()).unwrap()
    }

    #[test]
    fn identity_and_rotation_jets() {
        let j = PiecewiseJetMap::identity().jet(1.3, Side::Auto, 3).unwrap();
        assert_eq!(j.as_slice(), &[1.3, 1.0, 0.0, 0.0]);
        let j = PiecewiseJetMap::rotation(0.4).jet(1.3, Side::Auto, 3).unwrap();
        assert!((j.value() - 1.7).abs() < 1e-15);
        assert_eq!(&j.as_slice()[1..], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn order_above_four_is_rejected() {
        let e = PiecewiseJetMap::identity().jet(0.0, Side::Auto, 5).unwrap_err();
        assert!(matches!(e, Error::OrderTooHigh { requested: 5, supported: 4 }));
    }

    #[test]
    fn rotations_compose_and_invert() {
        let r = PiecewiseJetMap::compose(&PiecewiseJetMap::rotation(0.3), &PiecewiseJetMap::rotation(0.5)).unwrap();
        assert!((r.value(2.0).unwrap() - 2.8).abs() < 1e-15);
        let inv = PiecewiseJetMap::rotation(0.3).invert().unwrap();
        assert!((inv.value(2.0).unwrap() - 1.7).abs() < 1e-13);
    }

    #[test]
    fn inverse_of_perturbed_identity() {
        let f = lift("x + 0.3*sin(x)");
        let inv = f.invert().unwrap();
        for k in 0..100 {
            let x = -3.0 + 0.13 * k as f64;
            let back = inv.value(f.value(x).unwrap()).unwrap();
            assert!((back - x).abs() < 1e-12, "x = {x}");
        }
        let twice = inv.invert().unwrap();
        for k in 0..20 {
            let x = 0.31 * k as f64;
            assert!((twice.value(x).unwrap() - f.value(x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn piecewise_wrap_shift_and_sides() {
        // x + 0.2 sin(2x) on both arcs of {0, pi}, written with a piece per arc.
        let f = PiecewiseJetMap::from_pieces(
            &[0.0, PI],
            vec![parse("x + 0.2*sin(2*x)").unwrap(), parse("x + 0.2*sin(2*x)").unwrap()],
        )
        .unwrap();
        f.validate_diffeo(16).unwrap();
        let v = f.value(1.0 + TWO_PI).unwrap();
        assert!((v - (1.0 + TWO_PI + 0.2 * 2f64.sin())).abs() < 1e-12);
        assert!(f.jet_strict(PI, Side::Auto, 1).is_err());
        assert!(f.jet_strict(PI, Side::Left, 1).is_ok());
    }

    #[test]
    fn validation_catches_defects() {
        let jump = PiecewiseJetMap::from_pieces(&[0.0, PI], vec![parse("x").unwrap(), parse("x + 0.1").unwrap()]).unwrap();
        assert!(matches!(jump.validate_diffeo(8), Err(Error::Discontinuous { .. })));
        let folded = lift("x + 2*sin(x)");
        assert!(matches!(folded.validate_diffeo(64), Err(Error::DerivativeTooSmall { .. })));
        let degree_two = lift("2*x");
        assert!(matches!(degree_two.validate_diffeo(8), Err(Error::NotDegreeOne { .. })));
    }

    #[test]
    fn composed_breaks_are_pulled_back() {
        let f = PiecewiseJetMap::from_pieces(&[1.0], vec![parse("x").unwrap()]).unwrap();
        let g = PiecewiseJetMap::rotation(0.5);
        let h = PiecewiseJetMap::compose(&f, &g).unwrap();
        assert_eq!(h.breaks().len(), 1);
        assert!((h.breaks()[0] - 0.5).abs() < 1e-12);
        let g2 = PiecewiseJetMap::from_pieces(&[0.5, 3.0], vec![parse("x").unwrap()]).unwrap();
        let h2 = PiecewiseJetMap::compose(&f, &g2).unwrap();
        assert_eq!(h2.breaks(), &[0.5, 1.0, 3.0]);
    }
}

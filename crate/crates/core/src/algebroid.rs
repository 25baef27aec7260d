//! Broken vector fields, sections over the space of break configurations, the
//! algebroid bracket and anchor, the arc cocycles and the extended bracket.
//!
//! Arc indices are 0-based: arc `i` is `[p_{i+1}, p_{i+2}]` in the 1-based
//! labels of the break variables, the last arc ending at `p_1 + 2pi`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{evaluate, Binding, Derivatives, Expression, Slots, Var, MAX_PARAMS, SLOT_COUNT};
use crate::geometry::{integrate_arc, locate, BreakConfig, Jet, QuadratureSpec, Side, TOL_CONT, TWO_PI};
use crate::sampling;

/// x-derivatives kept compiled for every piece.
const FIELD_ORDER: usize = 3;

/// Number of configurations sampled when checking continuity of a section.
const CONTINUITY_SAMPLES: usize = 10;

fn param_slots(p: &BreakConfig) -> Slots {
    let mut s = [f64::NAN; SLOT_COUNT];
    for (j, &v) in p.lift().iter().enumerate() {
        s[Var::p(j + 1).slot()] = v;
    }
    s
}

fn compile(pieces: &[Expression]) -> Arc<Vec<Derivatives>> {
    Arc::new(pieces.iter().map(|e| Derivatives::new(e, Var::X, FIELD_ORDER)).collect())
}

fn piece_jet(d: &[Derivatives], idx: usize, mut slots: Slots, x: f64, order: usize) -> Result<Jet> {
    if order > FIELD_ORDER {
        return Err(Error::OrderTooHigh { requested: order, supported: FIELD_ORDER });
    }
    slots[Var::X.slot()] = x;
    let mut out = [0.0; FIELD_ORDER + 1];
    d[if d.len() == 1 { 0 } else { idx }].eval(order, &slots, &mut out)?;
    Ok(Jet::new(&out[..=order]))
}

/// Checks that one-sided values agree at every break (wrap included).
fn check_continuity(d: &[Derivatives], p: &BreakConfig) -> Result<()> {
    let n = p.n();
    let slots = param_slots(p);
    for j in 0..n {
        let at = p.lift()[j];
        let (left_arc, left_x) = if j == 0 { (n - 1, at + TWO_PI) } else { (j - 1, at) };
        let l = piece_jet(d, left_arc, slots, left_x, 0)?.value();
        let r = piece_jet(d, j, slots, at, 0)?.value();
        if (l - r).abs() > TOL_CONT * (1.0 + l.abs()) {
            return Err(Error::Discontinuous { at, jump: r - l });
        }
    }
    Ok(())
}

/// Anything with per-arc x-jets at a break configuration.
pub trait FieldProfile {
    fn break_count(&self) -> usize;

    /// The configuration the profile is tied to, if fixed.
    fn fixed_breaks(&self) -> Option<&BreakConfig> {
        None
    }

    /// x-derivatives up to `order` of the piece governing arc `arc`, at `x`.
    fn arc_jet(&self, p: &BreakConfig, arc: usize, x: f64, order: usize) -> Result<Jet>;
}

/// Continuous field `u(x) d/dx` on the circle, smooth on each closed arc.
#[derive(Clone)]
pub struct BrokenField {
    breaks: BreakConfig,
    pieces: Vec<Expression>,
    derivs: Arc<Vec<Derivatives>>,
}

impl fmt::Debug for BrokenField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BrokenField").field("breaks", &self.breaks).field("pieces", &self.pieces).finish()
    }
}

impl BrokenField {
    /// `pieces[i]` is the profile on arc `i`; one piece may serve all arcs, in
    /// which case it must be `2pi`-periodic.
    pub fn new(breaks: BreakConfig, pieces: Vec<Expression>) -> Result<Self> {
        if pieces.len() != 1 && pieces.len() != breaks.n() {
            return Err(Error::BreakCountMismatch(breaks.n(), pieces.len()));
        }
        for e in &pieces {
            if let Some(v) = e.free_vars().into_iter().find(|v| *v != Var::X) {
                return Err(Error::InvalidArgument(format!("field piece `{e}` depends on {v}")));
            }
        }
        let derivs = compile(&pieces);
        check_continuity(&derivs, &breaks)?;
        Ok(BrokenField { breaks, pieces, derivs })
    }

    pub fn smooth(breaks: BreakConfig, profile: Expression) -> Result<Self> {
        Self::new(breaks, vec![profile])
    }

    pub fn breaks(&self) -> &BreakConfig {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Expression] {
        &self.pieces
    }

    pub fn piece(&self, arc: usize) -> &Expression {
        &self.pieces[if self.pieces.len() == 1 { 0 } else { arc }]
    }

    pub fn jet(&self, x: f64, side: Side, order: usize) -> Result<Jet> {
        let l = locate(self.breaks.lift(), x, side);
        piece_jet(&self.derivs, l.arc, [f64::NAN; SLOT_COUNT], l.x, order)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.jet(x, Side::Auto, 0)?.value())
    }

    /// Values at the breaks.
    pub fn anchor(&self) -> Result<Vec<f64>> {
        (0..self.breaks.n()).map(|j| self.jet(self.breaks.lift()[j], Side::Right, 0).map(|j| j.value())).collect()
    }

    /// Errors unless the field vanishes at every break.
    pub fn require_isotropic(&self) -> Result<()> {
        for (j, a) in self.anchor()?.into_iter().enumerate() {
            if a.abs() > TOL_CONT {
                return Err(Error::NotVanishing { at: self.breaks.lift()[j], value: a });
            }
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.require_isotropic().is_ok()
    }

    pub fn scale(&self, c: f64) -> BrokenField {
        let pieces: Vec<_> = self.pieces.iter().map(|e| e.scale(c)).collect();
        BrokenField { breaks: self.breaks.clone(), derivs: compile(&pieces), pieces }
    }
}

impl FieldProfile for BrokenField {
    fn break_count(&self) -> usize {
        self.breaks.n()
    }

    fn fixed_breaks(&self) -> Option<&BreakConfig> {
        Some(&self.breaks)
    }

    fn arc_jet(&self, _p: &BreakConfig, arc: usize, x: f64, order: usize) -> Result<Jet> {
        piece_jet(&self.derivs, arc, [f64::NAN; SLOT_COUNT], x, order)
    }
}

/// Region of configurations on which a section is defined.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    All,
    /// Configurations within `radius` (sup norm on the lift) of `center`.
    Near { center: BreakConfig, radius: f64 },
}

impl Domain {
    fn intersect(&self, other: &Domain) -> Domain {
        match (self, other) {
            (Domain::All, d) | (d, Domain::All) => d.clone(),
            (Domain::Near { center, radius }, Domain::Near { radius: r2, .. }) => {
                Domain::Near { center: center.clone(), radius: radius.min(*r2) }
            }
        }
    }

    fn samples(&self, n: usize) -> Result<Vec<BreakConfig>> {
        match self {
            Domain::All => {
                let mut rng = sampling::rng(0x5eed_0000 + n as u64);
                (0..CONTINUITY_SAMPLES).map(|_| sampling::random_config(&mut rng, n, 0.1)).collect()
            }
            Domain::Near { center, radius } => {
                if *radius == 0.0 {
                    return Ok(vec![center.clone()]);
                }
                let mut rng = sampling::rng(0x5eed_1000 + n as u64);
                let mut out = vec![center.clone()];
                while out.len() < CONTINUITY_SAMPLES {
                    use rand::Rng;
                    let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                    if let Ok(q) = center.displaced(&dir, *radius) {
                        out.push(q);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Family `u(x, p) d/dx` of broken fields, one for each configuration `p`.
///
/// Pieces are expressions in `x` and `p1..pn`, evaluated with `p` in the lift
/// coordinates of the configuration.
#[derive(Clone)]
pub struct Section {
    n: usize,
    pieces: Vec<Expression>,
    derivs: Arc<Vec<Derivatives>>,
    domain: Domain,
}

impl fmt::Debug for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Section").field("n", &self.n).field("pieces", &self.pieces).finish()
    }
}

impl Section {
    /// Builds a section and checks continuity at sampled configurations of `domain`.
    pub fn new(n: usize, pieces: Vec<Expression>, domain: Domain) -> Result<Self> {
        let s = Self::unchecked(n, pieces, domain)?;
        for p in s.domain.samples(n)? {
            check_continuity(&s.derivs, &p)?;
        }
        Ok(s)
    }

    fn unchecked(n: usize, pieces: Vec<Expression>, domain: Domain) -> Result<Self> {
        if n == 0 || n > MAX_PARAMS {
            return Err(Error::InvalidBreaks(format!("break count {n} outside 1..={MAX_PARAMS}")));
        }
        if pieces.len() != 1 && pieces.len() != n {
            return Err(Error::BreakCountMismatch(n, pieces.len()));
        }
        for e in &pieces {
            let bad = e.free_vars().into_iter().find(|v| match v {
                Var::X => false,
                Var::T => true,
                Var::P(k) => *k as usize > n,
            });
            if let Some(v) = bad {
                return Err(Error::InvalidArgument(format!("section piece `{e}` depends on {v}")));
            }
        }
        if let Domain::Near { center, .. } = &domain {
            if center.n() != n {
                return Err(Error::BreakCountMismatch(n, center.n()));
            }
        }
        Ok(Section { n, derivs: compile(&pieces), pieces, domain })
    }

    /// One expression on every arc, defined for all configurations.
    pub fn global(n: usize, profile: Expression) -> Result<Self> {
        Self::new(n, vec![profile], Domain::All)
    }

    pub fn zero(n: usize) -> Self {
        Self::unchecked(n, vec![Expression::zero()], Domain::All).expect("zero section")
    }

    /// The `p`-independent family equal to `u` at its own configuration.
    pub fn from_field(u: &BrokenField) -> Section {
        let domain = Domain::Near { center: u.breaks.clone(), radius: 0.0 };
        Section { n: u.breaks.n(), pieces: u.pieces.clone(), derivs: u.derivs.clone(), domain }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[Expression] {
        &self.pieces
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Pieces broadcast to one per arc.
    pub fn arc_pieces(&self) -> Vec<Expression> {
        (0..self.n).map(|i| self.piece(i).clone()).collect()
    }

    pub fn piece(&self, arc: usize) -> &Expression {
        &self.pieces[if self.pieces.len() == 1 { 0 } else { arc }]
    }

    fn check_n(&self, p: &BreakConfig) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::BreakCountMismatch(self.n, p.n()));
        }
        Ok(())
    }

    /// The broken field at configuration `p`.
    pub fn at(&self, p: &BreakConfig) -> Result<BrokenField> {
        self.check_n(p)?;
        let pieces = self.pieces.iter().map(|e| e.bind_params(p.lift())).collect();
        BrokenField::new(p.clone(), pieces)
    }

    pub fn jet(&self, x: f64, p: &BreakConfig, side: Side, order: usize) -> Result<Jet> {
        self.check_n(p)?;
        let l = locate(p.lift(), x, side);
        piece_jet(&self.derivs, l.arc, param_slots(p), l.x, order)
    }

    pub fn value(&self, x: f64, p: &BreakConfig) -> Result<f64> {
        Ok(self.jet(x, p, Side::Auto, 0)?.value())
    }

    /// Anchor `(u(p_1, p), ..., u(p_n, p))`.
    pub fn anchor(&self, p: &BreakConfig) -> Result<Vec<f64>> {
        self.check_n(p)?;
        let slots = param_slots(p);
        (0..self.n).map(|j| piece_jet(&self.derivs, j, slots, p.lift()[j], 0).map(|j| j.value())).collect()
    }

    /// Anchor components as expressions in `p`: piece `j` at `x = p_{j+1}`.
    pub fn anchor_exprs(&self) -> Vec<Expression> {
        (0..self.n).map(|j| self.piece(j).substitute(&[(Var::X, Expression::p(j + 1))])).collect()
    }

    /// `f(p) * u`.
    pub fn scale_by(&self, f: &Expression) -> Result<Section> {
        let pieces = self.pieces.iter().map(|e| Expression::mul(f.clone(), e.clone())).collect();
        Self::unchecked(self.n, pieces, self.domain.clone())
    }

    pub fn scale(&self, c: f64) -> Section {
        self.scale_by(&Expression::constant(c)).expect("scaling keeps variables")
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Section, b: f64) -> Result<Section> {
        if self.n != other.n {
            return Err(Error::BreakCountMismatch(self.n, other.n));
        }
        let pieces = if self.pieces.len() == 1 && other.pieces.len() == 1 {
            vec![Expression::add(self.pieces[0].scale(a), other.pieces[0].scale(b))]
        } else {
            (0..self.n).map(|i| Expression::add(self.piece(i).scale(a), other.piece(i).scale(b))).collect()
        };
        Self::unchecked(self.n, pieces, self.domain.intersect(&other.domain))
    }
}

impl FieldProfile for Section {
    fn break_count(&self) -> usize {
        self.n
    }

    fn arc_jet(&self, p: &BreakConfig, arc: usize, x: f64, order: usize) -> Result<Jet> {
        piece_jet(&self.derivs, arc, param_slots(p), x, order)
    }
}

/// `L_{#u} g = sum_j u(p_j, p) dg/dp_j`, symbolically.
pub fn lie_derivative(u: &Section, g: &Expression) -> Expression {
    lie_along(&u.anchor_exprs(), g)
}

fn lie_along(anchor: &[Expression], g: &Expression) -> Expression {
    Expression::sum(
        anchor
            .iter()
            .enumerate()
            .map(|(j, a)| Expression::mul(a.clone(), g.differentiate(Var::p(j + 1))))
            .collect::<Vec<_>>(),
    )
}

/// Algebroid bracket
/// `[[u, v]] = u v_x - v u_x + sum_j (u(p_j) dv/dp_j - v(p_j) du/dp_j)`.
pub fn bracket_sections(u: &Section, v: &Section) -> Result<Section> {
    if u.n != v.n {
        return Err(Error::BreakCountMismatch(u.n, v.n));
    }
    let au = u.anchor_exprs();
    let av = v.anchor_exprs();
    let count = if u.pieces.len() == 1 && v.pieces.len() == 1 { 1 } else { u.n };
    let pieces = (0..count)
        .map(|i| {
            let (ui, vi) = (u.piece(i), v.piece(i));
            let core = Expression::sub(
                Expression::mul(ui.clone(), vi.differentiate(Var::X)),
                Expression::mul(vi.clone(), ui.differentiate(Var::X)),
            );
            Expression::add(core, Expression::sub(lie_along(&au, vi), lie_along(&av, ui)))
        })
        .collect();
    Section::new(u.n, pieces, u.domain.intersect(&v.domain))
}

/// Vector field on `S^1 x B` with components `(X, P_1, ..., P_n)`, one set per arc.
#[derive(Debug, Clone)]
pub struct EmbeddedField {
    n: usize,
    pieces: Vec<Vec<Expression>>,
}

impl EmbeddedField {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Components on arc `arc`, in the coordinate order `x, p1, ..., pn`.
    pub fn components(&self, arc: usize) -> &[Expression] {
        &self.pieces[if self.pieces.len() == 1 { 0 } else { arc }]
    }

    pub fn x_component(&self, arc: usize) -> &Expression {
        &self.components(arc)[0]
    }

    fn coords(&self) -> Vec<Var> {
        std::iter::once(Var::X).chain((1..=self.n).map(Var::p)).collect()
    }

    /// Standard Lie bracket of vector fields, `[A, B]^k = A(B^k) - B(A^k)`.
    pub fn lie_bracket(&self, other: &EmbeddedField) -> Result<EmbeddedField> {
        if self.n != other.n {
            return Err(Error::BreakCountMismatch(self.n, other.n));
        }
        let coords = self.coords();
        let count = if self.pieces.len() == 1 && other.pieces.len() == 1 { 1 } else { self.n };
        let apply = |a: &[Expression], f: &Expression| {
            Expression::sum(
                coords.iter().zip(a).map(|(c, ac)| Expression::mul(ac.clone(), f.differentiate(*c))).collect::<Vec<_>>(),
            )
        };
        let pieces = (0..count)
            .map(|i| {
                let (a, b) = (self.components(i), other.components(i));
                (0..=self.n).map(|k| Expression::sub(apply(a, &b[k]), apply(b, &a[k]))).collect()
            })
            .collect();
        Ok(EmbeddedField { n: self.n, pieces })
    }

    /// Components at `(x, p)`, using the piece of the arc containing `x`.
    pub fn eval(&self, x: f64, p: &BreakConfig) -> Result<Vec<f64>> {
        let l = locate(p.lift(), x, Side::Auto);
        let b = Binding::new().with(Var::X, l.x).with_params(p.lift());
        self.components(l.arc).iter().map(|e| Ok(evaluate(e, &b)?)).collect()
    }
}

/// `u d/dx + sum_j u(p_j, p) d/dp_j`, tangent to every hypersurface `x = p_j`.
pub fn embed_section(u: &Section) -> EmbeddedField {
    let anchor = u.anchor_exprs();
    let pieces = u.pieces.iter().map(|e| std::iter::once(e.clone()).chain(anchor.iter().cloned()).collect()).collect();
    EmbeddedField { n: u.n, pieces }
}

/// Bracket of the anchor vector fields `#u`, `#v` on the base, symbolically.
pub fn base_bracket(u: &Section, v: &Section) -> Vec<Expression> {
    let (a, b) = (u.anchor_exprs(), v.anchor_exprs());
    (0..u.n).map(|j| Expression::sub(lie_along(&a, &b[j]), lie_along(&b, &a[j]))).collect()
}

/// Evaluates an expression in `p1..pn` at a configuration.
pub fn eval_at(e: &Expression, p: &BreakConfig) -> Result<f64> {
    Ok(evaluate(e, &Binding::new().with_params(p.lift()))?)
}

/// `Omega_i(u, v) = int_{arc i} (u_x v_xx - u_xx v_x) dx` at configuration `p`.
pub fn omega_i<U, V>(u: &U, v: &V, p: &BreakConfig, arc: usize, q: &QuadratureSpec) -> Result<f64>
where
    U: FieldProfile + ?Sized,
    V: FieldProfile + ?Sized,
{
    for f in [u.break_count(), v.break_count()] {
        if f != p.n() {
            return Err(Error::BreakCountMismatch(p.n(), f));
        }
    }
    for b in [u.fixed_breaks(), v.fixed_breaks()].into_iter().flatten() {
        if !b.approx_eq(p, TOL_CONT) {
            return Err(Error::InvalidBreaks(format!("field breaks {:?} differ from {:?}", b.lift(), p.lift())));
        }
    }
    if arc >= p.n() {
        return Err(Error::InvalidArgument(format!("arc {arc} out of range for {} breaks", p.n())));
    }
    let (a, b) = p.arc(arc);
    integrate_arc(
        |x| {
            let ju = u.arc_jet(p, arc, x, 2)?;
            let jv = v.arc_jet(p, arc, x, 2)?;
            Ok(ju.d(1) * jv.d(2) - ju.d(2) * jv.d(1))
        },
        a,
        b,
        q,
    )
}

/// All arc cocycles `(Omega_1, ..., Omega_n)`.
pub fn omega_all<U, V>(u: &U, v: &V, p: &BreakConfig, q: &QuadratureSpec) -> Result<Vec<f64>>
where
    U: FieldProfile + ?Sized,
    V: FieldProfile + ?Sized,
{
    (0..p.n()).map(|i| omega_i(u, v, p, i, q)).collect()
}

/// Central differences in `p` used for Lie derivatives of numeric functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSpec {
    pub h: f64,
    /// Combine steps `h` and `h/2` as `(4 D(h/2) - D(h)) / 3`.
    pub richardson: bool,
}

impl Default for FdSpec {
    fn default() -> Self {
        FdSpec { h: 1e-4, richardson: true }
    }
}

/// Derivative of `g` at `p` along `dir`.
pub fn directional_derivative<G>(g: G, p: &BreakConfig, dir: &[f64], fd: &FdSpec) -> Result<f64>
where
    G: Fn(&BreakConfig) -> Result<f64>,
{
    if dir.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let central = |h: f64| -> Result<f64> { Ok((g(&p.displaced(dir, h)?)? - g(&p.displaced(dir, -h)?)?) / (2.0 * h)) };
    let d1 = central(fd.h)?;
    if !fd.richardson {
        return Ok(d1);
    }
    let d2 = central(0.5 * fd.h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Skew form on sections with values in functions on the base.
pub trait TwoForm {
    fn eval(&self, u: &Section, v: &Section, p: &BreakConfig) -> Result<f64>;
}

/// `Omega_i` as a two-form.
#[derive(Debug, Clone, Copy)]
pub struct ArcCocycle {
    pub arc: usize,
    pub quad: QuadratureSpec,
}

impl TwoForm for ArcCocycle {
    fn eval(&self, u: &Section, v: &Section, p: &BreakConfig) -> Result<f64> {
        omega_i(u, v, p, self.arc, &self.quad)
    }
}

/// One term `weight(p) * d^k u/dx^k (location(p), p)` of an evaluation one-form.
#[derive(Debug, Clone)]
pub struct EvalTerm {
    pub weight: Expression,
    pub location: Expression,
    pub order: usize,
    /// Arc whose piece is evaluated.
    pub arc: usize,
}

/// Finite combination of point evaluations of a section and its x-derivatives.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub n: usize,
    pub terms: Vec<EvalTerm>,
}

impl OneForm {
    pub fn zero(n: usize) -> Self {
        OneForm { n, terms: Vec::new() }
    }

    /// `u -> u(q0)` with `q0` on arc `arc`.
    pub fn point_evaluation(n: usize, arc: usize, q0: f64) -> Self {
        OneForm {
            n,
            terms: vec![EvalTerm { weight: Expression::one(), location: Expression::constant(q0), order: 0, arc }],
        }
    }

    /// `Theta(u)` as an expression in `p`.
    pub fn apply(&self, u: &Section) -> Result<Expression> {
        if u.n != self.n {
            return Err(Error::BreakCountMismatch(self.n, u.n));
        }
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|t| {
                let d = u.piece(t.arc).nth_derivative(Var::X, t.order);
                Expression::mul(t.weight.clone(), d.substitute(&[(Var::X, t.location.clone())]))
            })
            .collect();
        Ok(Expression::sum(terms))
    }
}

/// `d Theta (u, v) = L_{#u} Theta(v) - L_{#v} Theta(u) - Theta([[u, v]])`.
#[derive(Debug, Clone)]
pub struct Coboundary {
    pub theta: OneForm,
}

impl Coboundary {
    /// `d Theta(u, v)` as an expression in `p`.
    pub fn expression(&self, u: &Section, v: &Section) -> Result<Expression> {
        let tu = self.theta.apply(u)?;
        let tv = self.theta.apply(v)?;
        let tb = self.theta.apply(&bracket_sections(u, v)?)?;
        Ok(Expression::sub(Expression::sub(lie_derivative(u, &tv), lie_derivative(v, &tu)), tb))
    }
}

impl TwoForm for Coboundary {
    fn eval(&self, u: &Section, v: &Section, p: &BreakConfig) -> Result<f64> {
        eval_at(&self.expression(u, v)?, p)
    }
}

/// `sum_cyc [L_{#u} Omega(v, w) - Omega([[u, v]], w)]` at `p`, with the Lie
/// derivative taken by central differences along the anchor.
pub fn algebroid_cocycle_residual(
    form: &dyn TwoForm,
    u: &Section,
    v: &Section,
    w: &Section,
    p: &BreakConfig,
    fd: &FdSpec,
) -> Result<f64> {
    let term = |a: &Section, b: &Section, c: &Section| -> Result<f64> {
        let dir = a.anchor(p)?;
        let lie = directional_derivative(|q| form.eval(b, c, q), p, &dir, fd)?;
        Ok(lie - form.eval(&bracket_sections(a, b)?, c, p)?)
    };
    Ok(term(u, v, w)? + term(v, w, u)? + term(w, u, v)?)
}

type NumericFn = Arc<dyn Fn(&BreakConfig) -> Result<f64> + Send + Sync>;

/// Function on the base: an expression in `p` plus numerically evaluated parts.
#[derive(Clone)]
pub struct BaseFunction {
    symbolic: Expression,
    numeric: Vec<NumericFn>,
}

impl fmt::Debug for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BaseFunction({} + {} numeric terms)", self.symbolic, self.numeric.len())
    }
}

impl From<Expression> for BaseFunction {
    fn from(e: Expression) -> Self {
        BaseFunction { symbolic: e, numeric: Vec::new() }
    }
}

impl BaseFunction {
    pub fn zero() -> Self {
        Expression::zero().into()
    }

    pub fn numeric<F>(f: F) -> Self
    where
        F: Fn(&BreakConfig) -> Result<f64> + Send + Sync + 'static,
    {
        BaseFunction { symbolic: Expression::zero(), numeric: vec![Arc::new(f)] }
    }

    pub fn symbolic(&self) -> Option<&Expression> {
        self.numeric.is_empty().then_some(&self.symbolic)
    }

    pub fn eval(&self, p: &BreakConfig) -> Result<f64> {
        let mut s = eval_at(&self.symbolic, p)?;
        for f in &self.numeric {
            s += f(p)?;
        }
        Ok(s)
    }

    pub fn add(&self, other: &BaseFunction) -> BaseFunction {
        BaseFunction {
            symbolic: Expression::add(self.symbolic.clone(), other.symbolic.clone()),
            numeric: self.numeric.iter().chain(&other.numeric).cloned().collect(),
        }
    }

    pub fn scale(&self, c: f64) -> BaseFunction {
        BaseFunction {
            symbolic: self.symbolic.scale(c),
            numeric: self
                .numeric
                .iter()
                .map(|f| {
                    let f = f.clone();
                    Arc::new(move |p: &BreakConfig| Ok(c * f(p)?)) as NumericFn
                })
                .collect(),
        }
    }

    /// `L_{#u}` of this function: exact on the symbolic part, central
    /// differences on numeric parts.
    pub fn lie(&self, u: &Section, fd: FdSpec) -> BaseFunction {
        let numeric = self
            .numeric
            .iter()
            .map(|f| {
                let (f, u) = (f.clone(), u.clone());
                Arc::new(move |p: &BreakConfig| directional_derivative(|q| f(q), p, &u.anchor(p)?, &fd)) as NumericFn
            })
            .collect();
        BaseFunction { symbolic: lie_derivative(u, &self.symbolic), numeric }
    }
}

/// Pair `(u, f)` of a section and `n` central components.
#[derive(Debug, Clone)]
pub struct ExtendedSection {
    pub section: Section,
    pub central: Vec<BaseFunction>,
}

impl ExtendedSection {
    pub fn new(section: Section, central: Vec<BaseFunction>) -> Result<Self> {
        if central.len() != section.n {
            return Err(Error::BreakCountMismatch(section.n, central.len()));
        }
        Ok(ExtendedSection { section, central })
    }

    /// `(u, 0)`.
    pub fn lift(section: Section) -> Self {
        let central = vec![BaseFunction::zero(); section.n];
        ExtendedSection { section, central }
    }
}

/// `[(u, f), (v, g)] = ([[u, v]], c_i Omega_i(u, v) + L_{#u} g_i - L_{#v} f_i)`.
pub fn extended_bracket(
    a: &ExtendedSection,
    b: &ExtendedSection,
    coeffs: &[f64],
    quad: &QuadratureSpec,
    fd: FdSpec,
) -> Result<ExtendedSection> {
    let n = a.section.n;
    if b.section.n != n || coeffs.len() != n {
        return Err(Error::BreakCountMismatch(n, if b.section.n != n { b.section.n } else { coeffs.len() }));
    }
    let section = bracket_sections(&a.section, &b.section)?;
    let central = (0..n)
        .map(|i| {
            let mut c = b.central[i].lie(&a.section, fd).add(&a.central[i].lie(&b.section, fd).scale(-1.0));
            if coeffs[i] != 0.0 {
                let (u, v, q, ci) = (a.section.clone(), b.section.clone(), *quad, coeffs[i]);
                c = c.add(&BaseFunction::numeric(move |p| Ok(ci * omega_i(&u, &v, p, i, &q)?)));
            }
            c
        })
        .collect();
    Ok(ExtendedSection { section, central })
}

/// Central components of `sum_cyc [[a, b], c]` at `p`.
pub fn extended_jacobi_residual(
    a: &ExtendedSection,
    b: &ExtendedSection,
    c: &ExtendedSection,
    coeffs: &[f64],
    p: &BreakConfig,
    quad: &QuadratureSpec,
    fd: FdSpec,
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; p.n()];
    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
        let inner = extended_bracket(x, y, coeffs, quad, fd)?;
        let outer = extended_bracket(&inner, z, coeffs, quad, fd)?;
        for (t, f) in total.iter_mut().zip(&outer.central) {
            *t += f.eval(p)?;
        }
    }
    Ok(total)
}

/// `(u v_x - u_x v) d/dx` for fields vanishing at every break.
pub fn isotropy_bracket(u: &BrokenField, v: &BrokenField) -> Result<BrokenField> {
    if !u.breaks.approx_eq(&v.breaks, TOL_CONT) {
        return Err(Error::InvalidBreaks("isotropy bracket of fields with different breaks".into()));
    }
    u.require_isotropic()?;
    v.require_isotropic()?;
    let count = if u.pieces.len() == 1 && v.pieces.len() == 1 { 1 } else { u.breaks.n() };
    let pieces = (0..count)
        .map(|i| {
            let (a, b) = (u.piece(i), v.piece(i));
            Expression::sub(
                Expression::mul(a.clone(), b.differentiate(Var::X)),
                Expression::mul(a.differentiate(Var::X), b.clone()),
            )
        })
        .collect();
    BrokenField::new(u.breaks.clone(), pieces)
}

/// `Omega_i` restricted to the isotropy algebra at `p`.
#[derive(Debug, Clone)]
pub struct IsotropyCocycle {
    pub p: BreakConfig,
    pub arc: usize,
    pub quad: QuadratureSpec,
}

pub fn restrict_cocycle_to_isotropy(p: &BreakConfig, arc: usize, quad: QuadratureSpec) -> IsotropyCocycle {
    IsotropyCocycle { p: p.clone(), arc, quad }
}

impl IsotropyCocycle {
    pub fn eval(&self, u: &BrokenField, v: &BrokenField) -> Result<f64> {
        omega_i(u, v, &self.p, self.arc, &self.quad)
    }

    /// `Omega([u, v], w) + Omega([v, w], u) + Omega([w, u], v)`.
    pub fn identity_residual(&self, u: &BrokenField, v: &BrokenField, w: &BrokenField) -> Result<f64> {
        let mut s = 0.0;
        for (a, b, c) in [(u, v, w), (v, w, u), (w, u, v)] {
            s += self.eval(&isotropy_bracket(a, b)?, c)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn e(s: &str) -> Expression {
        parse(s).unwrap()
    }

    fn half_circle() -> BreakConfig {
        BreakConfig::new(&[0.0, PI]).unwrap()
    }

    #[test]
    fn anchor_examples() {
        let u = Section::global(1, e("sin(x - p1)")).unwrap();
        assert!(u.anchor(&BreakConfig::new(&[0.0]).unwrap()).unwrap()[0].abs() < 1e-15);
        let one = Section::global(2, e("1")).unwrap();
        assert_eq!(one.anchor(&half_circle()).unwrap(), vec![1.0, 1.0]);
        let s = Section::global(2, e("sin(x)")).unwrap();
        let a = s.anchor(&BreakConfig::new(&[PI / 2.0, 3.0 * PI / 2.0]).unwrap()).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-15 && (a[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_bracket_on_half_circle() {
        // [sin x, sin 2x] = -2 sin^3 x = e3/2 - 3 e1/2
        let p = half_circle();
        let u = Section::from_field(&BrokenField::smooth(p.clone(), e("sin(x)")).unwrap());
        let v = Section::from_field(&BrokenField::smooth(p.clone(), e("sin(2*x)")).unwrap());
        let b = bracket_sections(&u, &v).unwrap();
        for k in 0..50 {
            let x = 0.123 * k as f64;
            let want = 0.5 * (3.0 * x).sin() - 1.5 * x.sin();
            assert!((b.value(x, &p).unwrap() - want).abs() < 1e-12);
        }
        let self_bracket = bracket_sections(&u, &u).unwrap();
        assert!(self_bracket.value(1.0, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn discontinuous_inputs_are_rejected() {
        let p = half_circle();
        assert!(matches!(
            BrokenField::new(p.clone(), vec![e("sin(x)"), e("sin(x) + 0.5")]),
            Err(Error::Discontinuous { .. })
        ));
        assert!(Section::global(1, e("x")).is_err());
        assert!(Section::global(1, e("sin(x) * p2")).is_err());
    }

    #[test]
    fn omega_sine_values() {
        let p = half_circle();
        let q = QuadratureSpec::default();
        let u = BrokenField::smooth(p.clone(), e("sin(x)")).unwrap();
        let v = BrokenField::smooth(p.clone(), e("sin(2*x)")).unwrap();
        let w = BrokenField::smooth(p.clone(), e("sin(3*x)")).unwrap();
        assert!((omega_i(&u, &v, &p, 0, &q).unwrap() + 20.0 / 3.0).abs() < 1e-10);
        assert!(omega_i(&u, &w, &p, 0, &q).unwrap().abs() < 1e-10);
        assert!(omega_i(&u, &u, &p, 0, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn embedding_is_tangent_to_break_hypersurfaces() {
        let u = Section::global(1, e("1")).unwrap();
        let eu = embed_section(&u);
        let comps = eu.components(0);
        assert_eq!(comps[0].as_const(), Some(1.0));
        assert_eq!(comps[1].as_const(), Some(1.0));
        let z = embed_section(&Section::zero(2));
        assert!(z.components(0).iter().all(|c| c.is_zero()));
    }

    #[test]
    fn point_evaluation_coboundary_expansion() {
        // p-independent fields: dTheta(u, v) = -(u v_x - u_x v)(q0)
        let p = half_circle();
        let u = Section::from_field(&BrokenField::smooth(p.clone(), e("sin(x)")).unwrap());
        let v = Section::from_field(&BrokenField::smooth(p.clone(), e("cos(2*x)")).unwrap());
        let q0 = 1.1;
        let d = Coboundary { theta: OneForm::point_evaluation(2, 0, q0) };
        let want = -(q0.sin() * (-2.0 * (2.0 * q0).sin()) - q0.cos() * (2.0 * q0).cos());
        assert!((d.eval(&u, &v, &p).unwrap() - want).abs() < 1e-12);
        let zero = Coboundary { theta: OneForm::zero(2) };
        assert_eq!(zero.eval(&u, &v, &p).unwrap(), 0.0);
    }

    #[test]
    fn bracket_with_central_element_transports_it() {
        let u = Section::global(2, e("cos(x - p1)")).unwrap();
        let g: BaseFunction = e("sin(p1) * p2").into();
        let a = ExtendedSection::lift(u.clone());
        let b = ExtendedSection::new(Section::zero(2), vec![g.clone(), BaseFunction::zero()]).unwrap();
        let r = extended_bracket(&a, &b, &[1.0, 1.0], &QuadratureSpec::default(), FdSpec::default()).unwrap();
        let p = BreakConfig::new(&[0.4, 2.5]).unwrap();
        assert!(r.section.value(1.0, &p).unwrap().abs() < 1e-15);
        let want = eval_at(&lie_derivative(&u, g.symbolic().unwrap()), &p).unwrap();
        assert!((r.central[0].eval(&p).unwrap() - want).abs() < 1e-12);
        assert!(r.central[1].eval(&p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn isotropy_bracket_requires_vanishing() {
        let p = half_circle();
        let u = BrokenField::smooth(p.clone(), e("sin(x)")).unwrap();
        let c = BrokenField::smooth(p.clone(), e("cos(x)")).unwrap();
        assert!(matches!(isotropy_bracket(&u, &c), Err(Error::NotVanishing { .. })));
        let uu = isotropy_bracket(&u, &u).unwrap();
        assert!(uu.value(0.7).unwrap().abs() < 1e-15);
    }
}

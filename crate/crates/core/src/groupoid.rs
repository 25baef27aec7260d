//! Arrows of the broken diffeomorphism groupoid, the arc Bott cocycles and the
//! extended multiplication, and bisections.

use crate::error::{Error, Result};
use crate::expr::{evaluate, Binding, Expression, Var, MAX_PARAMS};
use crate::geometry::{
    circle_distance, integrate_arc, BreakConfig, PiecewiseJetMap, QuadratureSpec, Side, DELTA_MIN, TOL_CONT,
};
use crate::sampling;

/// Interior samples per arc when validating expression-backed arrows.
const VALIDATION_SAMPLES: usize = 32;

/// Arrow `src -> trg`: a broken diffeomorphism mapping the `i`-th source break to
/// the `i`-th target break.
#[derive(Debug, Clone)]
pub struct BrokenDiffeo {
    map: PiecewiseJetMap,
    src: BreakConfig,
    trg: BreakConfig,
}

impl BrokenDiffeo {
    /// Wraps a lift whose nonsmooth points all lie in `src`; the target is the
    /// image of `src`. No diffeomorphism checks are made here.
    pub fn from_map(map: PiecewiseJetMap, src: BreakConfig) -> Result<Self> {
        for &b in map.breaks() {
            if !src.lift().iter().any(|&p| circle_distance(p, b) <= TOL_CONT) {
                return Err(Error::InvalidBreaks(format!("map break {b} is not a source break")));
            }
        }
        let images = src
            .lift()
            .iter()
            .map(|&p| Ok(map.jet(p, Side::Right, 0)?.value()))
            .collect::<Result<Vec<_>>>()?;
        let trg = BreakConfig::from_lift(images)?;
        Ok(BrokenDiffeo { map, src, trg })
    }

    /// Like [`BrokenDiffeo::from_map`], additionally validating continuity,
    /// degree one and the derivative bound.
    pub fn from_map_checked(map: PiecewiseJetMap, src: BreakConfig) -> Result<Self> {
        map.validate_diffeo(VALIDATION_SAMPLES)?;
        Self::from_map(map, src)
    }

    /// Expression lifts per arc of `src` (or one lift for all arcs), validated.
    pub fn from_pieces(src: BreakConfig, pieces: Vec<Expression>) -> Result<Self> {
        let map = PiecewiseJetMap::from_pieces(src.lift(), pieces)?;
        Self::from_map_checked(map, src)
    }

    /// Globally smooth lift, regarded as an arrow out of `src`.
    pub fn from_lift(src: BreakConfig, lift: Expression) -> Result<Self> {
        Self::from_map_checked(PiecewiseJetMap::from_lift(lift)?, src)
    }

    pub fn identity(p: &BreakConfig) -> Self {
        BrokenDiffeo { map: PiecewiseJetMap::identity(), src: p.clone(), trg: p.clone() }
    }

    pub fn rotation(p: &BreakConfig, a: f64) -> Self {
        Self::from_map(PiecewiseJetMap::rotation(a), p.clone()).expect("rotation of a valid configuration")
    }

    pub fn map(&self) -> &PiecewiseJetMap {
        &self.map
    }

    pub fn src(&self) -> &BreakConfig {
        &self.src
    }

    pub fn trg(&self) -> &BreakConfig {
        &self.trg
    }

    pub fn n(&self) -> usize {
        self.src.n()
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.map.value(x)
    }

    /// `self o other`, defined when `src(self) = trg(other)`.
    pub fn compose(&self, other: &BrokenDiffeo) -> Result<BrokenDiffeo> {
        if !self.src.approx_eq(&other.trg, TOL_CONT) {
            return Err(Error::NotComposable(format!(
                "source {:?} does not match target {:?}",
                self.src.lift(),
                other.trg.lift()
            )));
        }
        let breaks = if self.map.breaks().is_empty() && other.map.breaks().is_empty() {
            Vec::new()
        } else {
            sorted_window(other.src.lift())
        };
        let map = PiecewiseJetMap::compose_with_breaks(&self.map, &other.map, breaks);
        let trg_lift = other
            .src
            .lift()
            .iter()
            .map(|&p| Ok(map.jet(p, Side::Right, 0)?.value()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BrokenDiffeo { map, src: other.src.clone(), trg: BreakConfig::from_lift(trg_lift)? })
    }

    pub fn inverse(&self) -> Result<BrokenDiffeo> {
        let map = self.map.invert()?;
        Ok(BrokenDiffeo { map, src: self.trg.clone(), trg: self.src.clone() })
    }
}

/// Points of a labeled configuration, sorted within one lift window.
fn sorted_window(lift: &[f64]) -> Vec<f64> {
    let mut v = lift.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn require_composable(phi: &BrokenDiffeo, psi: &BrokenDiffeo) -> Result<()> {
    if !phi.src.approx_eq(&psi.trg, TOL_CONT) {
        return Err(Error::NotComposable(format!(
            "source {:?} does not match target {:?}",
            phi.src.lift(),
            psi.trg.lift()
        )));
    }
    Ok(())
}

fn checked_log(d: f64, x: f64) -> Result<f64> {
    if !(d >= DELTA_MIN) {
        return Err(Error::DerivativeTooSmall { x, derivative: d, min: DELTA_MIN });
    }
    Ok(d.ln())
}

/// `chi_i(phi, psi) = int_{arc i of src psi} log(phi_x o psi) psi_xx / psi_x dx`.
pub fn chi_i(phi: &BrokenDiffeo, psi: &BrokenDiffeo, arc: usize, q: &QuadratureSpec) -> Result<f64> {
    require_composable(phi, psi)?;
    if arc >= psi.n() {
        return Err(Error::InvalidArgument(format!("arc {arc} out of range for {} breaks", psi.n())));
    }
    let (a, b) = psi.src.arc(arc);
    integrate_arc(
        |x| {
            let side = Side::toward_interior(x, a, b);
            let jp = psi.map.jet(x, side, 2)?;
            let jf = phi.map.jet(jp.value(), side, 1)?;
            let log_phi = checked_log(jf.d(1), jp.value())?;
            checked_log(jp.d(1), x)?;
            Ok(log_phi * jp.d(2) / jp.d(1))
        },
        a,
        b,
        q,
    )
}

/// `(chi_1, ..., chi_n)(phi, psi)`.
pub fn chi(phi: &BrokenDiffeo, psi: &BrokenDiffeo, q: &QuadratureSpec) -> Result<Vec<f64>> {
    (0..psi.n()).map(|i| chi_i(phi, psi, i, q)).collect()
}

/// `chi(phi, psi eta) + chi(psi, eta) - chi(phi psi, eta) - chi(phi, psi)`.
pub fn groupoid_cocycle_residual(
    phi: &BrokenDiffeo,
    psi: &BrokenDiffeo,
    eta: &BrokenDiffeo,
    q: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let psi_eta = psi.compose(eta)?;
    let phi_psi = phi.compose(psi)?;
    let a = chi(phi, &psi_eta, q)?;
    let b = chi(psi, eta, q)?;
    let c = chi(&phi_psi, eta, q)?;
    let d = chi(phi, psi, q)?;
    Ok((0..a.len()).map(|i| a[i] + b[i] - c[i] - d[i]).collect())
}

/// Arrow with a charge in `R^n`.
#[derive(Debug, Clone)]
pub struct ExtendedDiffeo {
    pub arrow: BrokenDiffeo,
    pub charge: Vec<f64>,
}

impl ExtendedDiffeo {
    pub fn new(arrow: BrokenDiffeo, charge: Vec<f64>) -> Result<Self> {
        if charge.len() != arrow.n() {
            return Err(Error::BreakCountMismatch(arrow.n(), charge.len()));
        }
        Ok(ExtendedDiffeo { arrow, charge })
    }

    pub fn identity(p: &BreakConfig) -> Self {
        ExtendedDiffeo { arrow: BrokenDiffeo::identity(p), charge: vec![0.0; p.n()] }
    }

    /// `(phi, t) (psi, s) = (phi psi, t + s + chi(phi, psi))`.
    pub fn multiply(&self, other: &ExtendedDiffeo, q: &QuadratureSpec) -> Result<ExtendedDiffeo> {
        let arrow = self.arrow.compose(&other.arrow)?;
        let c = chi(&self.arrow, &other.arrow, q)?;
        let charge = (0..c.len()).map(|i| self.charge[i] + other.charge[i] + c[i]).collect();
        Ok(ExtendedDiffeo { arrow, charge })
    }

    /// `(phi^{-1}, -t - chi(phi, phi^{-1}))`.
    pub fn inverse(&self, q: &QuadratureSpec) -> Result<ExtendedDiffeo> {
        let arrow = self.arrow.inverse()?;
        let c = chi(&self.arrow, &arrow, q)?;
        let charge = (0..c.len()).map(|i| -self.charge[i] - c[i]).collect();
        Ok(ExtendedDiffeo { arrow, charge })
    }
}

/// Both sides of the boundary-corrected relation between the arc cocycles and
/// the classical Bott cocycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BottRelation {
    /// `sum_i chi_i(phi, psi)`.
    pub lhs: f64,
    /// `int log (phi o psi)_x dlog psi_x + boundary`.
    pub rhs: f64,
    /// The classical integral alone.
    pub integral: f64,
    /// `1/2 sum_i (log^2 psi_x(p_i^+) - log^2 psi_x(p_i^-))`.
    pub boundary: f64,
}

pub fn bott_boundary_relation(phi: &BrokenDiffeo, psi: &BrokenDiffeo, q: &QuadratureSpec) -> Result<BottRelation> {
    let lhs: f64 = chi(phi, psi, q)?.iter().sum();
    let comp = phi.compose(psi)?;
    let mut integral = 0.0;
    for i in 0..psi.n() {
        let (a, b) = psi.src.arc(i);
        integral += integrate_arc(
            |x| {
                let side = Side::toward_interior(x, a, b);
                let jc = comp.map.jet(x, side, 1)?;
                let jp = psi.map.jet(x, side, 2)?;
                Ok(checked_log(jc.d(1), x)? * jp.d(2) / jp.d(1))
            },
            a,
            b,
            q,
        )?;
    }
    let mut boundary = 0.0;
    for &p in psi.src.lift() {
        let right = checked_log(psi.map.jet(p, Side::Right, 1)?.d(1), p)?;
        let left = checked_log(psi.map.jet(p, Side::Left, 1)?.d(1), p)?;
        boundary += 0.5 * (right * right - left * left);
    }
    Ok(BottRelation { lhs, rhs: integral + boundary, integral, boundary })
}

/// Family of arrows `Phi(., p)` out of every configuration `p`, given by
/// expressions in `x` and `p1..pn` (one per arc, or one for all arcs).
#[derive(Debug, Clone)]
pub struct Bisection {
    n: usize,
    pieces: Vec<Expression>,
}

impl Bisection {
    pub fn new(n: usize, pieces: Vec<Expression>) -> Result<Self> {
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
                return Err(Error::InvalidArgument(format!("bisection piece `{e}` depends on {v}")));
            }
        }
        Ok(Bisection { n, pieces })
    }

    pub fn identity(n: usize) -> Self {
        Bisection { n, pieces: vec![Expression::x()] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[Expression] {
        &self.pieces
    }

    fn piece(&self, arc: usize) -> &Expression {
        &self.pieces[if self.pieces.len() == 1 { 0 } else { arc }]
    }

    /// Base map components `f_j(p) = Phi(p_j, p)`.
    pub fn base_exprs(&self) -> Vec<Expression> {
        (0..self.n).map(|j| self.piece(j).substitute(&[(Var::X, Expression::p(j + 1))])).collect()
    }

    pub fn base_map(&self, p: &BreakConfig) -> Result<Vec<f64>> {
        let b = Binding::new().with_params(p.lift());
        self.base_exprs().iter().map(|e| Ok(evaluate(e, &b)?)).collect()
    }

    /// `Phi(x, p)`, using the piece of the arc of `p` containing `x`.
    pub fn value(&self, x: f64, p: &BreakConfig) -> Result<f64> {
        Ok(self.arrow_at(p)?.value(x)?)
    }

    /// The bisection as a map of `S^1 x B`: `(x, p) -> (Phi(x, p), f(p))`.
    pub fn apply(&self, x: f64, p: &BreakConfig) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x, p)?, self.base_map(p)?))
    }

    /// The arrow at `p`, validated as a broken diffeomorphism.
    pub fn arrow_at(&self, p: &BreakConfig) -> Result<BrokenDiffeo> {
        if p.n() != self.n {
            return Err(Error::BreakCountMismatch(self.n, p.n()));
        }
        let pieces = self.pieces.iter().map(|e| e.bind_params(p.lift())).collect();
        BrokenDiffeo::from_pieces(p.clone(), pieces)
    }

    /// Determinant of the Jacobian of the base map at `p`.
    pub fn base_jacobian_det(&self, p: &BreakConfig) -> Result<f64> {
        let f = self.base_exprs();
        let b = Binding::new().with_params(p.lift());
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (j, fj) in f.iter().enumerate() {
            for (k, entry) in m[j].iter_mut().enumerate() {
                *entry = evaluate(&fj.differentiate(Var::p(k + 1)), &b)?;
            }
        }
        Ok(determinant(m))
    }

    /// Checks the base map for singular Jacobians at `count` seeded configurations.
    pub fn check_base_invertible(&self, count: usize, seed: u64) -> Result<()> {
        let mut rng = sampling::rng(seed);
        for _ in 0..count {
            let p = sampling::random_config(&mut rng, self.n, 0.2)?;
            let det = self.base_jacobian_det(&p)?;
            if !(det.abs() >= 1e-8) {
                return Err(Error::SingularBaseMap { p: p.lift().to_vec(), det });
            }
        }
        Ok(())
    }

    /// `(Phi Psi)(p) = Phi(trg(Psi(p))) . Psi(p)`: on arc `i`,
    /// `Phi_i(Psi_i(x, p), f_Psi(p))`.
    pub fn compose(&self, other: &Bisection) -> Result<Bisection> {
        if self.n != other.n {
            return Err(Error::BreakCountMismatch(self.n, other.n));
        }
        let base = other.base_exprs();
        let count = if self.pieces.len() == 1 && other.pieces.len() == 1 { 1 } else { self.n };
        let pieces = (0..count)
            .map(|i| {
                let mut subs = vec![(Var::X, other.piece(i).clone())];
                subs.extend(base.iter().enumerate().map(|(j, f)| (Var::p(j + 1), f.clone())));
                self.piece(i).substitute(&subs)
            })
            .collect();
        let out = Bisection { n: self.n, pieces };
        out.check_base_invertible(20, 0xb15ec7)?;
        Ok(out)
    }
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[pivot][c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            m.swap(pivot, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

//! Flows of broken fields as groupoid arrows, and the recovery of the arc
//! cocycles `Omega_i` from the arc Bott cocycles `chi_i` by mixed differences.

use std::sync::Arc;

use crate::algebroid::{omega_i, BrokenField, FieldProfile};
use crate::error::{Error, Result};
use crate::geometry::{locate, BreakConfig, Jet, JetSource, PiecewiseJetMap, QuadratureSpec, Side, TOL_CONT};
use crate::groupoid::{chi_i, BrokenDiffeo};

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub steps_per_unit: u32,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec { steps_per_unit: 2000 }
    }
}

impl FlowSpec {
    pub fn new(steps_per_unit: u32) -> Result<Self> {
        if steps_per_unit < 100 {
            return Err(Error::InvalidArgument(format!("steps_per_unit must be at least 100, got {steps_per_unit}")));
        }
        Ok(FlowSpec { steps_per_unit })
    }

    fn steps(&self, time: f64) -> usize {
        ((self.steps_per_unit as f64 * time.abs()).ceil() as usize).max(100)
    }
}

/// Time-`t` map of a broken field with its first two x-derivatives, obtained by
/// integrating the variational equations with the same RK4 steps.
#[derive(Debug)]
struct FlowMap {
    field: BrokenField,
    time: f64,
    steps: usize,
    /// Breaks are fixed, so every trajectory stays on its arc and uses one piece.
    isotropic: bool,
}

impl FlowMap {
    fn integrate(&self, x: f64, side: Side, steps: usize) -> Result<[f64; 3]> {
        let p = self.field.breaks();
        let (arc, start, shift) = if self.isotropic {
            let l = locate(p.lift(), x, side);
            (Some(l.arc), l.x, l.shift)
        } else {
            (None, x, 0.0)
        };
        let rhs = |s: [f64; 3]| -> Result<[f64; 3]> {
            let j = match arc {
                Some(a) => self.field.arc_jet(p, a, s[0], 2)?,
                None => self.field.jet(s[0], Side::Auto, 2)?,
            };
            Ok([j.d(0), j.d(1) * s[1], j.d(2) * s[1] * s[1] + j.d(1) * s[2]])
        };
        let h = self.time / steps as f64;
        let mut s = [start, 1.0, 0.0];
        let axpy = |s: [f64; 3], k: [f64; 3], c: f64| [s[0] + c * k[0], s[1] + c * k[1], s[2] + c * k[2]];
        for _ in 0..steps {
            let k1 = rhs(s)?;
            let k2 = rhs(axpy(s, k1, 0.5 * h))?;
            let k3 = rhs(axpy(s, k2, 0.5 * h))?;
            let k4 = rhs(axpy(s, k3, h))?;
            for i in 0..3 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s[0] += shift;
        Ok(s)
    }
}

impl JetSource for FlowMap {
    fn jet(&self, x: f64, side: Side, order: usize) -> Result<Jet> {
        if order > 2 {
            return Err(Error::OrderTooHigh { requested: order, supported: 2 });
        }
        let mut steps = self.steps;
        for _ in 0..3 {
            let s = self.integrate(x, side, steps)?;
            if s[1] > 0.0 && s.iter().all(|v| v.is_finite()) {
                return Ok(Jet::new(&s[..=order]));
            }
            steps *= 4;
        }
        let s = self.integrate(x, side, steps)?;
        Err(Error::FlowNotMonotone { x, derivative: s[1] })
    }

    fn max_order(&self) -> usize {
        2
    }
}

/// Time-`time` flow of `u` as an arrow out of the breaks of `u`.
///
/// When `u` vanishes at every break the breaks are fixed points and each arc is
/// integrated with its own piece. Otherwise `u` must be a single smooth profile
/// and the target breaks are the flowed source breaks.
pub fn flow(u: &BrokenField, time: f64, spec: &FlowSpec) -> Result<BrokenDiffeo> {
    FlowSpec::new(spec.steps_per_unit)?;
    if !time.is_finite() {
        return Err(Error::InvalidArgument(format!("flow time must be finite, got {time}")));
    }
    let isotropic = u.is_isotropic();
    if !isotropic && u.pieces().len() > 1 {
        // Trajectories crossing a kink would break the map inside an arc.
        return Err(Error::InvalidArgument("flows need a field that vanishes at every break or has a single smooth profile".into()));
    }
    let source = FlowMap { field: u.clone(), time, steps: spec.steps(time), isotropic };
    let mut breaks = u.breaks().lift().to_vec();
    breaks.sort_by(f64::total_cmp);
    let map = PiecewiseJetMap::from_source(&breaks, Arc::new(source))?;
    BrokenDiffeo::from_map(map, u.breaks().clone())
}

fn require_isotropic_on(u: &BrokenField, p: &BreakConfig) -> Result<()> {
    if !u.breaks().approx_eq(p, TOL_CONT) {
        return Err(Error::InvalidBreaks(format!("field breaks {:?} differ from {:?}", u.breaks().lift(), p.lift())));
    }
    u.require_isotropic()
}

/// Mixed central difference
/// `[F(h,h) - F(h,-h) - F(-h,h) + F(-h,-h)] / 4h^2` of
/// `F(t, s) = chi_i(flow(u,t), flow(v,s)) - chi_i(flow(v,s), flow(u,t))`.
///
/// Both fields must vanish at every break of `p`.
pub fn derive_algebroid_cocycle(
    u: &BrokenField,
    v: &BrokenField,
    p: &BreakConfig,
    arc: usize,
    h: f64,
    spec: &FlowSpec,
    q: &QuadratureSpec,
) -> Result<f64> {
    require_isotropic_on(u, p)?;
    require_isotropic_on(v, p)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let f = |t: f64, s: f64| -> Result<f64> {
        let phi = flow(u, t, spec)?;
        let psi = flow(v, s, spec)?;
        Ok(chi_i(&phi, &psi, arc, q)? - chi_i(&psi, &phi, arc, q)?)
    };
    let corners = [f(h, h)?, f(h, -h)?, f(-h, h)?, f(-h, -h)?];
    let peak = corners.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if peak < 1e-11 {
        log::warn!("mixed difference at h = {h:e} is at the noise floor (max |F| = {peak:e})");
    }
    Ok((corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * h * h))
}

/// Errors of the mixed difference at `h` and `h/2` against `Omega_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceEstimate {
    pub h: f64,
    pub exact: f64,
    pub coarse: f64,
    pub fine: f64,
    /// `log2(|coarse - exact| / |fine - exact|)`.
    pub order: f64,
}

pub fn convergence_order(
    u: &BrokenField,
    v: &BrokenField,
    p: &BreakConfig,
    arc: usize,
    h: f64,
    spec: &FlowSpec,
    q: &QuadratureSpec,
) -> Result<ConvergenceEstimate> {
    let exact = omega_i(u, v, p, arc, q)?;
    let coarse = derive_algebroid_cocycle(u, v, p, arc, h, spec, q)?;
    let fine = derive_algebroid_cocycle(u, v, p, arc, 0.5 * h, spec, q)?;
    let order = ((coarse - exact).abs() / (fine - exact).abs()).log2();
    Ok(ConvergenceEstimate { h, exact, coarse, fine, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn field(p: &[f64], s: &str) -> BrokenField {
        BrokenField::smooth(BreakConfig::new(p).unwrap(), parse(s).unwrap()).unwrap()
    }

    #[test]
    fn zero_and_constant_fields() {
        let spec = FlowSpec::default();
        let z = flow(&field(&[1.0], "0"), 0.7, &spec).unwrap();
        assert_eq!(z.value(2.0).unwrap(), 2.0);
        let c = flow(&field(&[1.0], "0.5"), 0.8, &spec).unwrap();
        for k in 0..10 {
            let x = 0.6 * k as f64;
            assert!((c.value(x).unwrap() - (x + 0.4)).abs() < 1e-10);
        }
        assert!((c.trg().lift()[0] - 1.4).abs() < 1e-10);
    }

    #[test]
    fn sine_flow_closed_form() {
        let u = field(&[0.0, PI], "sin(x)");
        let t: f64 = 0.5;
        let phi = flow(&u, t, &FlowSpec::default()).unwrap();
        for k in 1..40 {
            let x0 = PI * k as f64 / 40.0;
            let want = 2.0 * (t.exp() * (0.5 * x0).tan()).atan();
            assert!((phi.value(x0).unwrap() - want).abs() < 1e-8, "x0 = {x0}");
        }
        assert!(phi.trg().approx_eq(u.breaks(), 1e-12));
    }

    #[test]
    fn variational_jets_match_finite_differences() {
        let u = field(&[0.0, PI], "sin(x) + 0.3*sin(2*x)");
        let phi = flow(&u, 0.4, &FlowSpec::default()).unwrap();
        let x = 1.1;
        let h = 1e-4;
        let j = phi.map().jet(x, Side::Auto, 2).unwrap();
        let f = |y: f64| phi.value(y).unwrap();
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        assert!((j.d(1) - d1).abs() < 1e-7);
        assert!((j.d(2) - d2).abs() < 1e-5);
    }

    #[test]
    fn group_law_of_autonomous_flow() {
        let u = field(&[0.0, PI], "sin(x)*(1 + 0.2*cos(x))");
        let spec = FlowSpec::default();
        let a = flow(&u, 0.3, &spec).unwrap();
        let b = flow(&u, 0.2, &spec).unwrap();
        let ab = a.compose(&b).unwrap();
        let c = flow(&u, 0.5, &spec).unwrap();
        for k in 0..30 {
            let x = 0.2 * k as f64;
            assert!((ab.value(x).unwrap() - c.value(x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn derived_cocycle_is_antisymmetric_and_zero_on_diagonal() {
        let u = field(&[0.0, PI], "sin(x)");
        let v = field(&[0.0, PI], "sin(2*x)");
        let p = u.breaks().clone();
        let spec = FlowSpec::default();
        let q = QuadratureSpec::default();
        let d = derive_algebroid_cocycle(&u, &u, &p, 0, 1e-2, &spec, &q).unwrap();
        assert!(d.abs() < 1e-9);
        let uv = derive_algebroid_cocycle(&u, &v, &p, 0, 1e-2, &spec, &q).unwrap();
        let vu = derive_algebroid_cocycle(&v, &u, &p, 0, 1e-2, &spec, &q).unwrap();
        assert!((uv + vu).abs() < 1e-9);
        assert!(derive_algebroid_cocycle(&field(&[0.0], "1"), &v, &p, 0, 1e-2, &spec, &q).is_err());
    }

    #[test]
    fn kinked_moving_fields_rejected() {
        let p = BreakConfig::new(&[0.0, PI]).unwrap();
        let u = BrokenField::new(p, vec![parse("1 + 0.1*sin(x)").unwrap(), parse("1 - 0.1*sin(x)").unwrap()]).unwrap();
        assert!(flow(&u, 0.3, &FlowSpec::default()).is_err());
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(FlowSpec::new(50).is_err());
    }
}

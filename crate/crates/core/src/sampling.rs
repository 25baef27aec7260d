//! Seeded generators for break configurations, sections and fields.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebroid::{BrokenField, Domain, Section};
use crate::error::Result;
use crate::expr::Expression;
use crate::geometry::{BreakConfig, TWO_PI};
use crate::groupoid::BrokenDiffeo;
use crate::linkage::{flow, FlowSpec};
use crate::interval::{IntervalDiffeo, IntervalField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labeled configuration of `n` breaks with all gaps at least `min_gap`.
pub fn random_config<R: Rng>(rng: &mut R, n: usize, min_gap: f64) -> Result<BreakConfig> {
    assert!(n as f64 * min_gap < TWO_PI, "min_gap too large for {n} breaks");
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let free = TWO_PI - n as f64 * min_gap;
    let mut lift = Vec::with_capacity(n);
    let mut p = rng.gen_range(0.0..TWO_PI);
    for w in &weights {
        lift.push(p);
        p += min_gap + free * w / total;
    }
    BreakConfig::from_lift(lift)
}

/// Bounds for random trigonometric profiles.
#[derive(Debug, Clone, Copy)]
pub struct TrigSpec {
    /// Highest frequency in `x`.
    pub degree: u32,
    /// Number of global terms `c * sin(k x - m p_j)` / `c * cos(...)`.
    pub global_terms: usize,
    /// Number of per-arc terms vanishing at both ends of the arc.
    pub local_terms: usize,
    /// Coefficients are drawn from `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for TrigSpec {
    fn default() -> Self {
        TrigSpec { degree: 5, global_terms: 3, local_terms: 1, amplitude: 1.0 }
    }
}

fn coeff<R: Rng>(rng: &mut R, amplitude: f64) -> Expression {
    Expression::constant(rng.gen_range(-amplitude..=amplitude))
}

/// `sin(k pi (x - p_i) / (p_{i+1} - p_i))`, which vanishes at both ends of arc `i`.
pub fn arc_sine(n: usize, arc: usize, k: u32) -> Expression {
    let start = Expression::p(arc + 1);
    let end = if arc + 1 < n {
        Expression::p(arc + 2)
    } else {
        Expression::p(1) + Expression::constant(TWO_PI)
    };
    let phase = Expression::constant(k as f64 * PI) * (Expression::x() - start.clone()) / (end - start);
    Expression::sin(phase)
}

/// Random `p`-dependent section: a periodic trigonometric polynomial in
/// `x - p_j` plus, on each arc, sine modes adapted to the moving arc.
pub fn random_trig_section<R: Rng>(rng: &mut R, n: usize, spec: &TrigSpec) -> Result<Section> {
    let mut global = Vec::new();
    for _ in 0..spec.global_terms {
        let k = rng.gen_range(0..=spec.degree) as f64;
        let j = rng.gen_range(1..=n);
        let m = rng.gen_range(0..=1) as f64;
        let arg = Expression::constant(k) * Expression::x() - Expression::constant(m) * Expression::p(j);
        let basis = if k == 0.0 || rng.gen_bool(0.5) { Expression::cos(arg) } else { Expression::sin(arg) };
        global.push(coeff(rng, spec.amplitude) * basis);
    }
    let global = Expression::sum(global);
    let pieces = (0..n)
        .map(|i| {
            let local = (0..spec.local_terms).map(|_| {
                let k = rng.gen_range(1..=spec.degree);
                coeff(rng, spec.amplitude) * arc_sine(n, i, k)
            });
            Expression::add(global.clone(), Expression::sum(local.collect::<Vec<_>>()))
        })
        .collect();
    Section::new(n, pieces, Domain::All)
}

/// Random field on `breaks` vanishing at every break: per-arc sine series.
pub fn random_isotropy_field<R: Rng>(rng: &mut R, breaks: &BreakConfig, modes: u32, amplitude: f64) -> Result<BrokenField> {
    let n = breaks.n();
    let pieces = (0..n)
        .map(|i| {
            let terms: Vec<_> = (1..=modes).map(|k| coeff(rng, amplitude) * arc_sine(n, i, k)).collect();
            Expression::sum(terms).bind_params(breaks.lift())
        })
        .collect();
    BrokenField::new(breaks.clone(), pieces)
}

/// Random arrow out of `src`: an isotropy flow followed by a rotation, the flow
/// of a smooth field, or per-arc sine perturbations of the identity followed by
/// a rotation. All three kinds move the breaks.
pub fn random_arrow<R: Rng>(rng: &mut R, src: &BreakConfig, spec: &FlowSpec) -> Result<BrokenDiffeo> {
    let n = src.n();
    let rotate = |rng: &mut R, d: BrokenDiffeo| -> Result<BrokenDiffeo> {
        BrokenDiffeo::rotation(d.trg(), rng.gen_range(-1.0..1.0)).compose(&d)
    };
    match rng.gen_range(0..3) {
        0 => {
            let u = random_isotropy_field(rng, src, 2, 0.5)?;
            let t = rng.gen_range(0.2..0.4) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let d = flow(&u, t, spec)?;
            rotate(rng, d)
        }
        1 => {
            let arg = Expression::x() + Expression::constant(rng.gen_range(0.0..TWO_PI));
            let profile = coeff(rng, 0.5) + Expression::constant(rng.gen_range(0.2..0.6)) * Expression::sin(arg);
            let u = BrokenField::smooth(src.clone(), profile)?;
            flow(&u, rng.gen_range(0.2..0.4), spec)
        }
        _ => {
            let pieces = (0..n)
                .map(|i| {
                    let (a, b) = src.arc(i);
                    let k = rng.gen_range(1..=3);
                    let c = rng.gen_range(-0.5..0.5) * (b - a) / (k as f64 * PI);
                    Expression::x() + (Expression::constant(c) * arc_sine(n, i, k)).bind_params(src.lift())
                })
                .collect();
            let d = BrokenDiffeo::from_pieces(src.clone(), pieces)?;
            rotate(rng, d)
        }
    }
}

/// `(phi, psi, eta)` with `phi psi eta` defined, starting from a random configuration.
pub fn random_composable_triple<R: Rng>(
    rng: &mut R,
    n: usize,
    spec: &FlowSpec,
) -> Result<(BrokenDiffeo, BrokenDiffeo, BrokenDiffeo)> {
    let p0 = random_config(rng, n, 0.6)?;
    let eta = random_arrow(rng, &p0, spec)?;
    let psi = random_arrow(rng, eta.trg(), spec)?;
    let phi = random_arrow(rng, psi.trg(), spec)?;
    Ok((phi, psi, eta))
}

fn interval_sine(a: f64, b: f64, k: u32) -> Expression {
    let phase = Expression::constant(k as f64 * PI / (b - a)) * (Expression::x() - Expression::constant(a));
    Expression::sin(phase)
}

/// Random field on `[a, b]` vanishing at both ends: a sine series adapted to the interval.
pub fn random_interval_field<R: Rng>(rng: &mut R, a: f64, b: f64, modes: u32, amplitude: f64) -> Result<IntervalField> {
    let terms: Vec<_> = (1..=modes).map(|k| coeff(rng, amplitude) * interval_sine(a, b, k)).collect();
    IntervalField::new(a, b, Expression::sum(terms), true)
}

/// Random diffeomorphism `[a, b] -> [c, d]`: the affine map plus sine modes whose
/// total slope is at most 60% of the affine slope.
pub fn random_interval_diffeo<R: Rng>(rng: &mut R, (a, b): (f64, f64), (c, d): (f64, f64), modes: u32) -> Result<IntervalDiffeo> {
    let slope = (d - c) / (b - a);
    let raw: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let total: f64 = raw.iter().enumerate().map(|(k, r)| r.abs() * (k + 1) as f64 * PI / (b - a)).sum();
    let scale = if total > 0.0 { rng.gen_range(0.1..0.6) * slope / total } else { 0.0 };
    let affine = Expression::constant(c) + Expression::constant(slope) * (Expression::x() - Expression::constant(a));
    let terms = raw.iter().enumerate().map(|(k, r)| Expression::constant(r * scale) * interval_sine(a, b, k as u32 + 1));
    IntervalDiffeo::new(a, b, Expression::sum(std::iter::once(affine).chain(terms).collect::<Vec<_>>()))
}

//! Interval versions of the cocycles: `Vect_0(I)`, `Diff(I)`, the segment
//! groupoid, the exact sine basis on `[0, pi]` and the certificate that the
//! interval cocycle is not a coboundary.

use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{Binding, Derivatives, Expression, Var};
use crate::geometry::{integrate_arc, QuadratureSpec, DELTA_MIN, TOL_CONT};

pub type Rational = Ratio<i128>;

const MONOTONE_SAMPLES: usize = 64;

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is empty or not finite")));
    }
    Ok(())
}

fn require_x_only(e: &Expression) -> Result<()> {
    match e.free_vars().into_iter().find(|&v| v != Var::X) {
        Some(v) => Err(Error::InvalidArgument(format!("interval expression depends on {v}"))),
        None => Ok(()),
    }
}

fn eval_chain(d: &Derivatives, x: f64, order: usize) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    d.eval(order, &Binding::new().with(Var::X, x).slots(), &mut out)?;
    Ok(out)
}

/// Vector field `u(x) d/dx` on `[a, b]`.
#[derive(Debug, Clone)]
pub struct IntervalField {
    a: f64,
    b: f64,
    derivs: Derivatives,
    vanishing: bool,
}

impl IntervalField {
    /// With `vanishing` set, `|u(a)|` and `|u(b)|` must be below `TOL_CONT`.
    pub fn new(a: f64, b: f64, profile: Expression, vanishing: bool) -> Result<Self> {
        check_interval(a, b)?;
        require_x_only(&profile)?;
        let f = IntervalField { a, b, derivs: Derivatives::new(&profile, Var::X, 2), vanishing };
        if vanishing {
            for end in [a, b] {
                let value = f.value(end)?;
                if value.abs() >= TOL_CONT {
                    return Err(Error::NotVanishing { at: end, value });
                }
            }
        }
        Ok(f)
    }

    /// `e_m = sin(m x) d/dx` on `[0, pi]`.
    pub fn sin_basis(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("sine basis index must be at least 1".into()));
        }
        let profile = Expression::sin(Expression::constant(m as f64) * Expression::x());
        IntervalField::new(0.0, PI, profile, true)
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn profile(&self) -> &Expression {
        self.derivs.expr(0)
    }

    pub fn is_vanishing(&self) -> bool {
        self.vanishing
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(eval_chain(&self.derivs, x, 0)?[0])
    }

    /// `[u, u_x, u_xx]` at `x`.
    pub fn jet(&self, x: f64) -> Result<[f64; 3]> {
        eval_chain(&self.derivs, x, 2)
    }

    /// `u v_x - u_x v`, which again vanishes at the ends when both inputs do.
    pub fn bracket(&self, other: &IntervalField) -> Result<IntervalField> {
        require_same_interval(self, other)?;
        let (u, v) = (self.profile(), other.profile());
        let e = u.clone() * v.differentiate(Var::X) - u.differentiate(Var::X) * v.clone();
        IntervalField::new(self.a, self.b, e, self.vanishing && other.vanishing)
    }

    pub fn combine(&self, a: f64, other: &IntervalField, b: f64) -> Result<IntervalField> {
        require_same_interval(self, other)?;
        let e = self.profile().scale(a) + other.profile().scale(b);
        IntervalField::new(self.a, self.b, e, self.vanishing && other.vanishing)
    }
}

fn require_same_interval(u: &IntervalField, v: &IntervalField) -> Result<()> {
    if (u.a - v.a).abs() > TOL_CONT || (u.b - v.b).abs() > TOL_CONT {
        return Err(Error::InvalidArgument(format!(
            "fields live on [{}, {}] and [{}, {}]",
            u.a, u.b, v.a, v.b
        )));
    }
    Ok(())
}

/// `int_a^b (u_x v_xx - u_xx v_x) dx` on `Vect_0([a, b])`.
pub fn omega_interval(u: &IntervalField, v: &IntervalField, q: &QuadratureSpec) -> Result<f64> {
    require_same_interval(u, v)?;
    for f in [u, v] {
        if !f.vanishing {
            return Err(Error::InvalidArgument("cocycle is defined on fields vanishing at the endpoints".into()));
        }
    }
    integrate_arc(
        |x| {
            let (ju, jv) = (u.jet(x)?, v.jet(x)?);
            Ok(ju[1] * jv[2] - ju[2] * jv[1])
        },
        u.a,
        u.b,
        q,
    )
}

/// `Omega([u,v],w) + Omega([v,w],u) + Omega([w,u],v)`.
pub fn interval_algebra_cocycle_residual(
    u: &IntervalField,
    v: &IntervalField,
    w: &IntervalField,
    q: &QuadratureSpec,
) -> Result<f64> {
    Ok(omega_interval(&u.bracket(v)?, w, q)? + omega_interval(&v.bracket(w)?, u, q)? + omega_interval(&w.bracket(u)?, v, q)?)
}

/// Continuous field on `q_0 < ... < q_n` given piecewise and vanishing at every `q_j`.
#[derive(Debug, Clone)]
pub struct PartitionField {
    partition: Vec<f64>,
    pieces: Vec<IntervalField>,
}

impl PartitionField {
    /// One expression per subinterval, or a single expression used on all of them.
    pub fn new(partition: &[f64], pieces: Vec<Expression>) -> Result<Self> {
        if partition.len() < 2 {
            return Err(Error::InvalidArgument("a partition needs at least two points".into()));
        }
        let n = partition.len() - 1;
        if pieces.len() != 1 && pieces.len() != n {
            return Err(Error::InvalidArgument(format!("expected 1 or {n} pieces, got {}", pieces.len())));
        }
        let pieces = (0..n)
            .map(|j| {
                let e = if pieces.len() == 1 { &pieces[0] } else { &pieces[j] };
                IntervalField::new(partition[j], partition[j + 1], e.clone(), true)
            })
            .collect::<Result<_>>()?;
        Ok(PartitionField { partition: partition.to_vec(), pieces })
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn pieces(&self) -> &[IntervalField] {
        &self.pieces
    }

    pub fn bracket(&self, other: &PartitionField) -> Result<PartitionField> {
        require_same_partition(self, other)?;
        let pieces = self.pieces.iter().zip(&other.pieces).map(|(u, v)| u.bracket(v)).collect::<Result<_>>()?;
        Ok(PartitionField { partition: self.partition.clone(), pieces })
    }
}

fn require_same_partition(u: &PartitionField, v: &PartitionField) -> Result<()> {
    let same = u.partition.len() == v.partition.len()
        && u.partition.iter().zip(&v.partition).all(|(a, b)| (a - b).abs() <= TOL_CONT);
    if !same {
        return Err(Error::InvalidArgument(format!("partitions {:?} and {:?} differ", u.partition, v.partition)));
    }
    Ok(())
}

/// Component `j` is the interval cocycle over `[q_j, q_{j+1}]`.
pub fn multibreak_interval_cocycles(u: &PartitionField, v: &PartitionField, q: &QuadratureSpec) -> Result<Vec<f64>> {
    require_same_partition(u, v)?;
    u.pieces.iter().zip(&v.pieces).map(|(a, b)| omega_interval(a, b, q)).collect()
}

/// Orientation-preserving diffeomorphism of `[a, b]` onto its image.
#[derive(Debug, Clone)]
pub struct IntervalDiffeo {
    a: f64,
    b: f64,
    image: (f64, f64),
    derivs: Derivatives,
}

impl IntervalDiffeo {
    /// Checks `map_x >= DELTA_MIN` at both ends and on a uniform grid.
    pub fn new(a: f64, b: f64, map: Expression) -> Result<Self> {
        check_interval(a, b)?;
        require_x_only(&map)?;
        let d = IntervalDiffeo { a, b, image: (0.0, 0.0), derivs: Derivatives::new(&map, Var::X, 2) };
        for k in 0..=MONOTONE_SAMPLES {
            let x = a + (b - a) * k as f64 / MONOTONE_SAMPLES as f64;
            let j = d.jet(x)?;
            if !(j[1] >= DELTA_MIN) {
                return Err(Error::DerivativeTooSmall { x, derivative: j[1], min: DELTA_MIN });
            }
        }
        let image = (d.value(a)?, d.value(b)?);
        Ok(IntervalDiffeo { image, ..d })
    }

    /// Element of `Diff([a, b])`: both endpoints fixed.
    pub fn fixed_endpoint(a: f64, b: f64, map: Expression) -> Result<Self> {
        let d = IntervalDiffeo::new(a, b, map)?;
        if !d.is_fixed_endpoint() {
            return Err(Error::InvalidArgument(format!(
                "map sends [{a}, {b}] to [{}, {}]",
                d.image.0, d.image.1
            )));
        }
        Ok(d)
    }

    pub fn identity(a: f64, b: f64) -> Result<Self> {
        IntervalDiffeo::new(a, b, Expression::x())
    }

    pub fn source(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn target(&self) -> (f64, f64) {
        self.image
    }

    pub fn is_fixed_endpoint(&self) -> bool {
        (self.image.0 - self.a).abs() < TOL_CONT && (self.image.1 - self.b).abs() < TOL_CONT
    }

    pub fn map(&self) -> &Expression {
        self.derivs.expr(0)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(eval_chain(&self.derivs, x, 0)?[0])
    }

    /// `[phi, phi_x, phi_xx]` at `x`.
    pub fn jet(&self, x: f64) -> Result<[f64; 3]> {
        eval_chain(&self.derivs, x, 2)
    }

    /// `self o other`, defined when the target of `other` is the source of `self`.
    pub fn compose(&self, other: &IntervalDiffeo) -> Result<IntervalDiffeo> {
        require_composable(self, other)?;
        let map = self.map().substitute(&[(Var::X, other.map().clone())]);
        IntervalDiffeo::new(other.a, other.b, map)
    }
}

fn require_composable(phi: &IntervalDiffeo, psi: &IntervalDiffeo) -> Result<()> {
    let (s, t) = (phi.source(), psi.target());
    if (s.0 - t.0).abs() > TOL_CONT || (s.1 - t.1).abs() > TOL_CONT {
        return Err(Error::NotComposable(format!(
            "source [{}, {}] does not match target [{}, {}]",
            s.0, s.1, t.0, t.1
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

/// `int log(phi_x(psi(x))) psi_xx / psi_x dx` over the source of `psi`.
pub fn chi_interval(phi: &IntervalDiffeo, psi: &IntervalDiffeo, q: &QuadratureSpec) -> Result<f64> {
    require_composable(phi, psi)?;
    integrate_arc(
        |x| {
            let j = psi.jet(x)?;
            let outer = phi.jet(j[0])?;
            if !(j[1] >= DELTA_MIN) {
                return Err(Error::DerivativeTooSmall { x, derivative: j[1], min: DELTA_MIN });
            }
            Ok(checked_log(outer[1], j[0])? * j[2] / j[1])
        },
        psi.a,
        psi.b,
        q,
    )
}

/// `chi(phi psi, eta) + chi(phi, psi) - chi(phi, psi eta) - chi(psi, eta)`.
pub fn interval_group_cocycle_residual(
    phi: &IntervalDiffeo,
    psi: &IntervalDiffeo,
    eta: &IntervalDiffeo,
    q: &QuadratureSpec,
) -> Result<f64> {
    let phi_psi = phi.compose(psi)?;
    let psi_eta = psi.compose(eta)?;
    Ok(chi_interval(&phi_psi, eta, q)? + chi_interval(phi, psi, q)? - chi_interval(phi, &psi_eta, q)? - chi_interval(psi, eta, q)?)
}

/// Coefficient of `e_index` in a combination of sine basis fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisTerm {
    pub index: u32,
    pub coeff: Rational,
}

fn require_index(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("sine basis index must be at least 1".into()));
    }
    Ok(())
}

/// `[e_m, e_n] = (n-m)/2 e_{m+n} + (m+n)/2 e_{m-n}` with `e_{-k} = -e_k`, `e_0 = 0`.
/// Zero terms are dropped and the result is sorted by index.
pub fn sin_basis_bracket(m: u32, n: u32) -> Result<Vec<BasisTerm>> {
    require_index(m)?;
    require_index(n)?;
    let (mi, ni) = (m as i128, n as i128);
    let mut terms = vec![BasisTerm { index: m + n, coeff: Rational::new(ni - mi, 2) }];
    let diff = mi - ni;
    if diff != 0 {
        let c = Rational::new(mi + ni, 2);
        terms.push(BasisTerm { index: diff.unsigned_abs() as u32, coeff: if diff > 0 { c } else { -c } });
    }
    terms.retain(|t| !t.coeff.is_zero());
    terms.sort_by_key(|t| t.index);
    Ok(terms)
}

/// `Omega(e_m, e_n)` on `[0, pi]`: `2mn(m^2+n^2)/(m^2-n^2)` for opposite parity, `0` otherwise.
///
/// `m = n` returns 0: the closed form is singular there and antisymmetry forces 0.
pub fn sin_basis_omega(m: u32, n: u32) -> Result<Rational> {
    require_index(m)?;
    require_index(n)?;
    if m == n || (m + n) % 2 == 0 {
        return Ok(Rational::zero());
    }
    let (m, n) = (m as i128, n as i128);
    Ok(Rational::new(2 * m * n * (m * m + n * n), m * m - n * n))
}

/// `lambda_1 = 0`, `lambda_k = -(k^4 - 1)/(4k)`: the values forced by the `l = 1` rows.
pub fn certificate_lambda(k: u32) -> Rational {
    let k = k as i128;
    Rational::new(-(k.pow(4) - 1), 4 * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertificateRow {
    pub k: u32,
    pub l: u32,
    pub lambda_l: Rational,
    pub lambda_k: Rational,
    /// `(k^4 - l^4) / (4kl)`.
    pub lhs: Rational,
    /// `k lambda_l - l lambda_k`.
    pub rhs: Rational,
    pub residual: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Some row is violated, so no coboundary ansatz exists.
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub bound: u32,
    /// `(k, lambda_k)` for odd `k <= bound`.
    pub lambdas: Vec<(u32, Rational)>,
    /// All odd pairs `1 <= l < k <= bound`, ordered by `(k, l)`.
    pub rows: Vec<CertificateRow>,
    /// First row with non-zero residual.
    pub witness: Option<CertificateRow>,
}

impl Certificate {
    pub fn verdict(&self) -> Verdict {
        if self.witness.is_some() {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    }
}

pub fn certificate_row(k: u32, l: u32) -> CertificateRow {
    let (lambda_k, lambda_l) = (certificate_lambda(k), certificate_lambda(l));
    let (ki, li) = (k as i128, l as i128);
    let lhs = Rational::new(ki.pow(4) - li.pow(4), 4 * ki * li);
    let rhs = Rational::from_integer(ki) * lambda_l - Rational::from_integer(li) * lambda_k;
    CertificateRow { k, l, lambda_l, lambda_k, lhs, rhs, residual: lhs - rhs }
}

/// Exact check of the relations a coboundary would have to satisfy, for odd indices up to `bound`.
pub fn nontriviality_certificate(bound: u32) -> Result<Certificate> {
    if bound < 5 || bound % 2 == 0 {
        return Err(Error::InvalidArgument(format!("bound must be odd and at least 5, got {bound}")));
    }
    let odd: Vec<u32> = (1..=bound).step_by(2).collect();
    let lambdas = odd.iter().map(|&k| (k, certificate_lambda(k))).collect();
    let rows: Vec<CertificateRow> =
        odd.iter().flat_map(|&k| odd.iter().take_while(move |&&l| l < k).map(move |&l| certificate_row(k, l))).collect();
    let witness = rows.iter().find(|r| !r.residual.is_zero()).copied();
    Ok(Certificate { bound, lambdas, rows, witness })
}

/// `"num/den"`, or just the numerator for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

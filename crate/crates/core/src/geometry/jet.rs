/// Highest derivative order carried by a [`Jet`].
pub const MAX_JET_ORDER: usize = 4;

/// Value and derivatives `(f, f', ..., f^(k))` of a scalar map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    values: [f64; MAX_JET_ORDER + 1],
}

impl Jet {
    /// Jet from `values[0..=order]`; missing entries are zero.
    pub fn new(values: &[f64]) -> Jet {
        assert!(!values.is_empty() && values.len() <= MAX_JET_ORDER + 1, "jet order out of range");
        let mut v = [0.0; MAX_JET_ORDER + 1];
        v[..values.len()].copy_from_slice(values);
        Jet { order: values.len() - 1, values: v }
    }

    /// Jet of the identity map at `x`.
    pub fn identity(x: f64, order: usize) -> Jet {
        let mut j = Jet::new(&[x]);
        j.order = order;
        if order >= 1 {
            j.values[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// `k`-th derivative; panics if `k` exceeds the order.
    pub fn d(&self, k: usize) -> f64 {
        assert!(k <= self.order, "derivative {k} requested from a jet of order {}", self.order);
        self.values[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..=self.order]
    }

    pub fn truncate(mut self, order: usize) -> Jet {
        self.order = self.order.min(order);
        for v in &mut self.values[self.order + 1..] {
            *v = 0.0;
        }
        self
    }

    pub fn shifted(mut self, shift: f64) -> Jet {
        self.values[0] += shift;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

/// Jet of `f o g` at `x` from the jet of `g` at `x` and of `f` at `g(x)` (Faa di Bruno).
pub fn compose_jets(outer: &Jet, inner: &Jet) -> Jet {
    let order = outer.order.min(inner.order);
    let f = &outer.values;
    let g = &inner.values;
    let mut h = [0.0; MAX_JET_ORDER + 1];
    h[0] = f[0];
    if order >= 1 {
        h[1] = f[1] * g[1];
    }
    if order >= 2 {
        h[2] = f[2] * g[1] * g[1] + f[1] * g[2];
    }
    if order >= 3 {
        h[3] = f[3] * g[1].powi(3) + 3.0 * f[2] * g[1] * g[2] + f[1] * g[3];
    }
    if order >= 4 {
        h[4] = f[4] * g[1].powi(4)
            + 6.0 * f[3] * g[1] * g[1] * g[2]
            + f[2] * (3.0 * g[2] * g[2] + 4.0 * g[1] * g[3])
            + f[1] * g[4];
    }
    Jet { order, values: h }
}

/// Jet of `f^{-1}` at `y = f(x)` from the jet of `f` at `x`.
pub fn invert_jet(at_preimage: f64, f: &Jet) -> Jet {
    let order = f.order;
    let v = &f.values;
    let d1 = v[1];
    let mut h = [0.0; MAX_JET_ORDER + 1];
    h[0] = at_preimage;
    if order >= 1 {
        h[1] = 1.0 / d1;
    }
    if order >= 2 {
        h[2] = -v[2] / d1.powi(3);
    }
    if order >= 3 {
        h[3] = (3.0 * v[2] * v[2] - d1 * v[3]) / d1.powi(5);
    }
    if order >= 4 {
        h[4] = (10.0 * d1 * v[2] * v[3] - d1 * d1 * v[4] - 15.0 * v[2].powi(3)) / d1.powi(7);
    }
    Jet { order, values: h }
}

//! Discretized curves on a shared grid, trapezoid-rule inner products,
//! distances and derivative estimation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scalar::{from_usize, Scalar};

/// Strictly increasing abscissae shared by every curve of a sample, with
/// the trapezoid quadrature weights precomputed.
#[derive(Debug, Clone)]
pub struct Grid<T> {
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::GridTooShort(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::GridNonFinite { index: i });
            }
        }
        for i in 1..points.len() {
            if points[i] <= points[i - 1] {
                return Err(Error::GridNotIncreasing { index: i });
            }
        }
        let n = points.len();
        let mut weights = vec![T::zero(); n];
        for i in 0..n - 1 {
            let half = (points[i + 1] - points[i]) * T::half();
            weights[i] = weights[i] + half;
            weights[i + 1] = weights[i + 1] + half;
        }
        Ok(Self { points, weights })
    }

    /// `n` equally spaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: T, hi: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooShort(n));
        }
        let step = (hi - lo) / from_usize::<T>(n - 1);
        let mut pts: Vec<T> = (0..n).map(|i| lo + step * from_usize(i)).collect();
        pts[n - 1] = hi;
        Self::new(pts)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Trapezoid weights: `∫ f ≈ Σ wᵢ f(tᵢ)`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn span(&self) -> (T, T) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn same_as(&self, other: &Grid<T>) -> bool {
        std::ptr::eq(self, other) || self.points == other.points
    }

    /// Trapezoid integral of `values`.
    pub fn integrate(&self, values: &[T]) -> T {
        self.weights.iter().zip(values).map(|(&w, &v)| w * v).sum()
    }
}

/// A curve sampled on a grid.
#[derive(Debug, Clone)]
pub struct Curve<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Curve<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shares_grid(&self, other: &Curve<T>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    fn check_grid(&self, other: &Curve<T>) -> Result<()> {
        if self.shares_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn sub(&self, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn add(&self, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn scale(&self, s: T) -> Curve<T> {
        self.map(|v| v * s)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: T, other: &Curve<T>) -> Result<Curve<T>> {
        self.check_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + s * b))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Curve<T> {
        Curve {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Curve<T>, f: impl Fn(T, T) -> T) -> Curve<T> {
        Curve {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Plain L2 norm under the trapezoid rule.
    pub fn l2_norm(&self) -> T {
        l2_sq(self.grid.weights(), &self.values).sqrt()
    }

    pub(crate) fn with_values(&self, values: Vec<T>) -> Curve<T> {
        debug_assert_eq!(values.len(), self.values.len());
        Curve {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

pub(crate) fn l2_sq<T: Scalar>(w: &[T], v: &[T]) -> T {
    w.iter().zip(v).map(|(&w, &v)| w * v * v).sum()
}

pub(crate) fn l2_dot<T: Scalar>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(&w, (&a, &b))| w * a * b)
        .sum()
}

pub(crate) fn l2_dist_sq<T: Scalar>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(&w, (&a, &b))| {
            let d = a - b;
            w * d * d
        })
        .sum()
}

/// A set of curves on one grid, with optional per-curve labels.
#[derive(Debug, Clone)]
pub struct FunctionalSample<T> {
    grid: Arc<Grid<T>>,
    curves: Vec<Curve<T>>,
    labels: Option<Vec<String>>,
}

impl<T: Scalar> FunctionalSample<T> {
    pub fn new(curves: Vec<Curve<T>>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = curves.first().ok_or(Error::EmptySample)?;
        let grid = Arc::clone(first.grid());
        for c in &curves[1..] {
            if !c.shares_grid(first) {
                return Err(Error::GridMismatch);
            }
        }
        if let Some(l) = &labels {
            if l.len() != curves.len() {
                return Err(Error::LengthMismatch {
                    expected: curves.len(),
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            grid,
            curves,
            labels,
        })
    }

    /// Builds a sample from raw rows, one row per curve.
    pub fn from_rows(grid: Arc<Grid<T>>, rows: Vec<Vec<T>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(Arc::clone(&grid), r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves, None)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.curves.len() {
            return Err(Error::LengthMismatch {
                expected: self.curves.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve<T>] {
        &self.curves
    }

    pub fn curve(&self, i: usize) -> &Curve<T> {
        &self.curves[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Sub-sample in the given index order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let curves: Vec<_> = indices.iter().map(|&i| self.curves[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Self::new(curves, labels)
    }
}

/// How derivatives of sampled curves are estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMethod<T> {
    /// Central differences inside, second-order one-sided at the ends.
    FiniteDifference,
    /// Moving-window weighted least squares with Epanechnikov weights.
    LocalPoly { degree: usize, bandwidth: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceKind {
    L2,
    /// `‖x−y‖ + ‖x′−y′‖`, the sum of the two L2 norms.
    SobolevH1,
    /// `‖x⁽ᵐ⁾ − y⁽ᵐ⁾‖`, a semi-distance blind to polynomial shifts of degree < m.
    DerivativeL2 { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSpec<T> {
    pub kind: DistanceKind,
    pub derivative: Option<DerivativeMethod<T>>,
}

impl<T: Scalar> DistanceSpec<T> {
    pub fn l2() -> Self {
        Self {
            kind: DistanceKind::L2,
            derivative: None,
        }
    }

    pub fn sobolev_h1(method: DerivativeMethod<T>) -> Self {
        Self {
            kind: DistanceKind::SobolevH1,
            derivative: Some(method),
        }
    }

    pub fn derivative_l2(order: usize, method: DerivativeMethod<T>) -> Self {
        Self {
            kind: DistanceKind::DerivativeL2 { order },
            derivative: Some(method),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DistanceKind::L2 => Ok(()),
            DistanceKind::SobolevH1 => self.method().map(|_| ()),
            DistanceKind::DerivativeL2 { order } => {
                if !(1..=2).contains(&order) {
                    return Err(Error::UnsupportedOrder { order });
                }
                self.method().map(|_| ())
            }
        }
    }

    fn method(&self) -> Result<DerivativeMethod<T>> {
        self.derivative.ok_or(Error::MissingDerivativeMethod)
    }

    pub fn is_l2(&self) -> bool {
        self.kind == DistanceKind::L2
    }
}

/// Inner product under `spec`. For `SobolevH1` this is
/// `⟨a,b⟩ + ⟨a′,b′⟩`; for `DerivativeL2(m)` it is `⟨a⁽ᵐ⁾,b⁽ᵐ⁾⟩`.
pub fn inner_product<T: Scalar>(a: &Curve<T>, b: &Curve<T>, spec: &DistanceSpec<T>) -> Result<T> {
    a.check_grid(b)?;
    let w = a.grid().weights();
    match spec.kind {
        DistanceKind::L2 => Ok(l2_dot(w, a.values(), b.values())),
        DistanceKind::SobolevH1 => {
            let m = spec.method()?;
            let da = estimate_derivative(a, 1, &m)?;
            let db = estimate_derivative(b, 1, &m)?;
            Ok(l2_dot(w, a.values(), b.values()) + l2_dot(w, da.values(), db.values()))
        }
        DistanceKind::DerivativeL2 { order } => {
            let m = spec.method()?;
            let da = estimate_derivative(a, order, &m)?;
            let db = estimate_derivative(b, order, &m)?;
            Ok(l2_dot(w, da.values(), db.values()))
        }
    }
}

/// Distance under `spec`.
pub fn distance<T: Scalar>(a: &Curve<T>, b: &Curve<T>, spec: &DistanceSpec<T>) -> Result<T> {
    a.check_grid(b)?;
    let w = a.grid().weights();
    match spec.kind {
        DistanceKind::L2 => Ok(l2_dist_sq(w, a.values(), b.values()).sqrt()),
        DistanceKind::SobolevH1 => {
            let m = spec.method()?;
            let diff = a.sub(b)?;
            let d1 = estimate_derivative(&diff, 1, &m)?;
            Ok(l2_sq(w, diff.values()).sqrt() + l2_sq(w, d1.values()).sqrt())
        }
        DistanceKind::DerivativeL2 { order } => {
            let m = spec.method()?;
            let diff = a.sub(b)?;
            let d = estimate_derivative(&diff, order, &m)?;
            Ok(l2_sq(w, d.values()).sqrt())
        }
    }
}

/// Norm of a single curve under `spec` (its distance to the zero curve).
pub fn norm<T: Scalar>(a: &Curve<T>, spec: &DistanceSpec<T>) -> Result<T> {
    distance(a, &Curve::zeros(Arc::clone(a.grid())), spec)
}

/// Pointwise `Σ cᵢ·xᵢ`.
pub fn linear_combination<T: Scalar>(coeffs: &[T], curves: &[&Curve<T>]) -> Result<Curve<T>> {
    if coeffs.len() != curves.len() {
        return Err(Error::LengthMismatch {
            expected: curves.len(),
            found: coeffs.len(),
        });
    }
    let first = curves.first().ok_or(Error::EmptySample)?;
    let mut acc = vec![T::zero(); first.len()];
    for (&c, x) in coeffs.iter().zip(curves) {
        first.check_grid(x)?;
        for (a, &v) in acc.iter_mut().zip(x.values()) {
            *a = *a + c * v;
        }
    }
    Ok(first.with_values(acc))
}

/// Derivative of order 1 or 2 on the curve's own grid.
pub fn estimate_derivative<T: Scalar>(
    c: &Curve<T>,
    order: usize,
    method: &DerivativeMethod<T>,
) -> Result<Curve<T>> {
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder { order });
    }
    let values = match *method {
        DerivativeMethod::FiniteDifference => {
            finite_difference(c.grid().points(), c.values(), order)?
        }
        DerivativeMethod::LocalPoly { degree, bandwidth } => {
            if order > degree {
                return Err(Error::OrderExceedsDegree { order, degree });
            }
            local_poly(c.grid().points(), c.values(), order, degree, bandwidth)?
        }
    };
    Ok(c.with_values(values))
}

/// First derivative weights of the three-point Lagrange stencil through
/// `(t0,t1,t2)` evaluated at `at`.
fn lagrange_d1<T: Scalar>(t0: T, t1: T, t2: T, at: T) -> [T; 3] {
    let two = T::two();
    [
        (two * at - t1 - t2) / ((t0 - t1) * (t0 - t2)),
        (two * at - t0 - t2) / ((t1 - t0) * (t1 - t2)),
        (two * at - t0 - t1) / ((t2 - t0) * (t2 - t1)),
    ]
}

fn lagrange_d2<T: Scalar>(t0: T, t1: T, t2: T) -> [T; 3] {
    let two = T::two();
    [
        two / ((t0 - t1) * (t0 - t2)),
        two / ((t1 - t0) * (t1 - t2)),
        two / ((t2 - t0) * (t2 - t1)),
    ]
}

fn finite_difference<T: Scalar>(t: &[T], f: &[T], order: usize) -> Result<Vec<T>> {
    let n = t.len();
    if order == 1 && n == 2 {
        let s = (f[1] - f[0]) / (t[1] - t[0]);
        return Ok(vec![s, s]);
    }
    if n < 3 {
        return Err(Error::GridTooShortForStencil { len: n, needed: 3 });
    }
    let apply = |w: [T; 3], i: usize| w[0] * f[i] + w[1] * f[i + 1] + w[2] * f[i + 2];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // stencil start: centred inside, shifted at the ends
        let s = i.saturating_sub(1).min(n - 3);
        let w = if order == 1 {
            lagrange_d1(t[s], t[s + 1], t[s + 2], t[i])
        } else {
            lagrange_d2(t[s], t[s + 1], t[s + 2])
        };
        out.push(apply(w, s));
    }
    Ok(out)
}

fn local_poly<T: Scalar>(
    t: &[T],
    f: &[T],
    order: usize,
    degree: usize,
    bandwidth: T,
) -> Result<Vec<T>> {
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::InvalidBandwidth(bandwidth.as_f64()));
    }
    let n = t.len();
    let p = degree + 1;
    if n < p {
        return Err(Error::GridTooShortForStencil { len: n, needed: p });
    }
    let mut fact = T::one();
    for r in 2..=order {
        fact = fact * from_usize(r);
    }
    let scale = bandwidth.powi(order as i32);
    let mut out = Vec::with_capacity(n);
    let mut xtx = vec![T::zero(); p * p];
    let mut xty = vec![T::zero(); p];
    let mut powers = vec![T::zero(); p];
    for &t0 in t {
        xtx.iter_mut().for_each(|v| *v = T::zero());
        xty.iter_mut().for_each(|v| *v = T::zero());
        let mut used = 0;
        for (&tj, &fj) in t.iter().zip(f) {
            let u = (tj - t0) / bandwidth;
            if u.abs() >= T::one() {
                continue;
            }
            used += 1;
            let w = T::one() - u * u;
            powers[0] = T::one();
            for k in 1..p {
                powers[k] = powers[k - 1] * u;
            }
            for a in 0..p {
                xty[a] = xty[a] + w * powers[a] * fj;
                for b in 0..p {
                    xtx[a * p + b] = xtx[a * p + b] + w * powers[a] * powers[b];
                }
            }
        }
        if used < p {
            return Err(Error::SmoothingBandwidthTooSmall {
                bandwidth: bandwidth.as_f64(),
                needed: p,
                at: t0.as_f64(),
            });
        }
        let beta = solve_dense(&xtx, &xty, p).ok_or(Error::SmoothingBandwidthTooSmall {
            bandwidth: bandwidth.as_f64(),
            needed: p,
            at: t0.as_f64(),
        })?;
        out.push(fact * beta[order] / scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_grid(n: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::uniform(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::new(vec![0.0]), Err(Error::GridTooShort(1))));
        assert!(matches!(
            Grid::new(vec![0.0, 0.5, 0.25]),
            Err(Error::GridNotIncreasing { index: 2 })
        ));
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn curve_rejects_length_and_nan() {
        let g = unit_grid(3);
        assert!(Curve::new(g.clone(), vec![1.0, 2.0]).is_err());
        assert!(matches!(
            Curve::new(g, vec![1.0, f64::INFINITY, 0.0]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn constant_inner_product() {
        let g = unit_grid(11);
        let one = Curve::from_fn(g, |_| 1.0).unwrap();
        let ip = inner_product(&one, &one, &DistanceSpec::l2()).unwrap();
        assert_abs_diff_eq!(ip, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sin_cos_orthogonal() {
        let g = unit_grid(201);
        let s = Curve::from_fn(g.clone(), |t| (2.0 * PI * t).sin()).unwrap();
        let c = Curve::from_fn(g, |t| (2.0 * PI * t).cos()).unwrap();
        let ip = inner_product(&s, &c, &DistanceSpec::l2()).unwrap();
        assert!(ip.abs() < 1e-6, "{ip}");
    }

    #[test]
    fn h1_inner_product_of_identity() {
        let g = unit_grid(1001);
        let x = Curve::from_fn(g, |t| t).unwrap();
        let spec = DistanceSpec::sobolev_h1(DerivativeMethod::FiniteDifference);
        let ip = inner_product(&x, &x, &spec).unwrap();
        assert_abs_diff_eq!(ip, 4.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn distance_identities() {
        let g = unit_grid(401);
        let x = Curve::from_fn(g.clone(), |t| (3.0 * t).sin() + t * t).unwrap();
        let fd = DerivativeMethod::FiniteDifference;
        let specs = [
            DistanceSpec::l2(),
            DistanceSpec::sobolev_h1(fd),
            DistanceSpec::derivative_l2(1, fd),
            DistanceSpec::derivative_l2(2, fd),
        ];
        for s in &specs {
            assert_eq!(distance(&x, &x, s).unwrap(), 0.0);
        }
        let shifted = x.map(|v| v + 2.5);
        let d = distance(&x, &shifted, &DistanceSpec::derivative_l2(1, fd)).unwrap();
        assert!(d < 1e-8, "{d}");

        let zero = Curve::zeros(g.clone());
        let s = Curve::from_fn(g, |t| (2.0 * PI * t).sin()).unwrap();
        let d = distance(&zero, &s, &DistanceSpec::l2()).unwrap();
        assert_abs_diff_eq!(d, 0.5f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn sobolev_distance_is_sum_of_norms() {
        let g = unit_grid(201);
        let x = Curve::from_fn(g.clone(), |t| t).unwrap();
        let zero = Curve::zeros(g);
        let spec = DistanceSpec::sobolev_h1(DerivativeMethod::FiniteDifference);
        let d = distance(&x, &zero, &spec).unwrap();
        // ‖t‖ = 1/√3, ‖1‖ = 1
        assert_abs_diff_eq!(d, 1.0 / 3f64.sqrt() + 1.0, epsilon = 1e-4);
        let h1_norm = inner_product(&x, &x, &spec).unwrap().sqrt();
        assert!((d - h1_norm).abs() > 0.1);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Curve::zeros(unit_grid(5));
        let b = Curve::zeros(Arc::new(Grid::uniform(0.0, 2.0, 5).unwrap()));
        assert!(matches!(
            distance(&a, &b, &DistanceSpec::l2()),
            Err(Error::GridMismatch)
        ));
        // equal points on a distinct allocation are accepted
        let c = Curve::zeros(unit_grid(5));
        assert!(distance(&a, &c, &DistanceSpec::l2()).is_ok());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = unit_grid(21);
        let c = Curve::from_fn(g, |_| 4.0).unwrap();
        for m in [
            DerivativeMethod::FiniteDifference,
            DerivativeMethod::LocalPoly {
                degree: 2,
                bandwidth: 0.2,
            },
        ] {
            for order in [1, 2] {
                let d = estimate_derivative(&c, order, &m).unwrap();
                assert!(d.values().iter().all(|v| v.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn finite_difference_of_square() {
        let g = unit_grid(101);
        let c = Curve::from_fn(g.clone(), |t| t * t).unwrap();
        let d = estimate_derivative(&c, 1, &DerivativeMethod::FiniteDifference).unwrap();
        for (i, (&t, &v)) in g.points().iter().zip(d.values()).enumerate() {
            if i > 0 && i < 100 {
                assert!((v - 2.0 * t).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn finite_difference_nonuniform_is_exact_for_quadratics() {
        let g = Arc::new(Grid::new(vec![0.0, 0.1, 0.15, 0.4, 0.45, 0.8, 1.0]).unwrap());
        let c = Curve::from_fn(g.clone(), |t| 3.0 * t * t - t + 2.0).unwrap();
        let d1 = estimate_derivative(&c, 1, &DerivativeMethod::FiniteDifference).unwrap();
        let d2 = estimate_derivative(&c, 2, &DerivativeMethod::FiniteDifference).unwrap();
        for (&t, (&a, &b)) in g.points().iter().zip(d1.values().iter().zip(d2.values())) {
            assert_abs_diff_eq!(a, 6.0 * t - 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(b, 6.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn local_poly_second_derivative_of_cube() {
        let g = unit_grid(101);
        let bw = 0.1;
        let c = Curve::from_fn(g.clone(), |t| t * t * t).unwrap();
        let m = DerivativeMethod::LocalPoly {
            degree: 2,
            bandwidth: bw,
        };
        let d = estimate_derivative(&c, 2, &m).unwrap();
        for (&t, &v) in g.points().iter().zip(d.values()) {
            if t > bw && t < 1.0 - bw {
                let exact = 6.0 * t;
                assert!((v - exact).abs() <= 0.05 * exact, "t={t} v={v}");
            }
        }
    }

    #[test]
    fn derivative_errors() {
        let g = unit_grid(10);
        let c = Curve::zeros(g);
        let lp = DerivativeMethod::LocalPoly {
            degree: 1,
            bandwidth: 0.3,
        };
        assert!(matches!(
            estimate_derivative(&c, 2, &lp),
            Err(Error::OrderExceedsDegree { .. })
        ));
        assert!(matches!(
            estimate_derivative(&c, 3, &DerivativeMethod::FiniteDifference),
            Err(Error::UnsupportedOrder { .. })
        ));
        let short = Curve::zeros(unit_grid(2));
        assert!(matches!(
            estimate_derivative(&short, 2, &DerivativeMethod::FiniteDifference),
            Err(Error::GridTooShortForStencil { .. })
        ));
        let narrow = DerivativeMethod::LocalPoly {
            degree: 2,
            bandwidth: 0.01,
        };
        assert!(matches!(
            estimate_derivative(&c, 1, &narrow),
            Err(Error::SmoothingBandwidthTooSmall { .. })
        ));
    }

    #[test]
    fn linear_combinations() {
        let g = unit_grid(5);
        let x = Curve::from_fn(g.clone(), |t| t).unwrap();
        let y = Curve::from_fn(g, |t| 1.0 - t * t).unwrap();
        let r = linear_combination(&[1.0, 0.0], &[&x, &y]).unwrap();
        assert_eq!(r.values(), x.values());
        let r = linear_combination(&[0.5, 0.5], &[&x, &x]).unwrap();
        assert_eq!(r.values(), x.values());
        let r = linear_combination(&[2.0, -1.0], &[&x, &x]).unwrap();
        assert_eq!(r.values(), x.values());
        assert!(matches!(
            linear_combination(&[1.0], &[&x, &y]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let g = Arc::new(Grid::<f32>::uniform(0.0, 1.0, 101).unwrap());
        let one = Curve::from_fn(g, |_| 1.0f32).unwrap();
        let ip = inner_product(&one, &one, &DistanceSpec::l2()).unwrap();
        assert!((ip - 1.0).abs() < 1e-5);
    }
}

//! Kernel surrogate density of a functional sample: the estimate itself,
//! its functional gradient, the second Gateaux differential and the two
//! curvature statistics used to test candidate modes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{
    distance, inner_product, l2_dist_sq, l2_dot, linear_combination, Curve, DistanceSpec,
    FunctionalSample,
};
use crate::kernels::KernelPair;
use crate::linalg::symmetric_max_eigenvalue;
use crate::scalar::{from_usize, Scalar};

/// Bandwidth attached to each sample curve. Never depends on the query point.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule<T> {
    Fixed(T),
    PerDatum(Vec<T>),
}

impl<T: Scalar> BandwidthRule<T> {
    pub fn at(&self, i: usize) -> T {
        match self {
            BandwidthRule::Fixed(h) => *h,
            BandwidthRule::PerDatum(hs) => hs[i],
        }
    }

    /// Smallest bandwidth in use.
    pub fn min(&self) -> T {
        match self {
            BandwidthRule::Fixed(h) => *h,
            BandwidthRule::PerDatum(hs) => hs.iter().copied().fold(T::infinity(), T::min),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |h: T| {
            if h > T::zero() && h.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidBandwidth(h.as_f64()))
            }
        };
        match self {
            BandwidthRule::Fixed(h) => check(*h),
            BandwidthRule::PerDatum(hs) => {
                if hs.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        found: hs.len(),
                    });
                }
                hs.iter().try_for_each(|&h| check(h))
            }
        }
    }

    /// Restriction to a sub-sample given by (possibly repeated) indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        match self {
            BandwidthRule::Fixed(h) => BandwidthRule::Fixed(*h),
            BandwidthRule::PerDatum(hs) => {
                BandwidthRule::PerDatum(indices.iter().map(|&i| hs[i]).collect())
            }
        }
    }
}

/// A bandwidth request that is resolved against a sample's distances.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthSpec<T> {
    Absolute(T),
    /// Fraction of the largest pairwise distance.
    FractionOfMax(T),
    /// Empirical quantile (in `[0, 1]`) of the pairwise distances `i < j`.
    Quantile(T),
    PerDatum(Vec<T>),
}

impl<T: Scalar> BandwidthSpec<T> {
    pub fn resolve(&self, sample: &FunctionalSample<T>, spec: &DistanceSpec<T>) -> Result<BandwidthRule<T>> {
        match self {
            BandwidthSpec::Absolute(h) => Ok(BandwidthRule::Fixed(*h)),
            BandwidthSpec::PerDatum(hs) => Ok(BandwidthRule::PerDatum(hs.clone())),
            BandwidthSpec::FractionOfMax(f) => {
                let d = pairwise_upper(sample, spec)?;
                let max = d.iter().copied().fold(T::zero(), T::max);
                Ok(BandwidthRule::Fixed(*f * max))
            }
            BandwidthSpec::Quantile(q) => {
                let mut d = pairwise_upper(sample, spec)?;
                if d.is_empty() {
                    return Err(Error::InvalidConfig(
                        "a distance quantile needs at least two curves".into(),
                    ));
                }
                d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                Ok(BandwidthRule::Fixed(quantile_sorted(&d, *q)))
            }
        }
    }

    /// Same request restricted to a sub-sample.
    pub fn select(&self, indices: &[usize]) -> Self {
        match self {
            BandwidthSpec::PerDatum(hs) => {
                BandwidthSpec::PerDatum(indices.iter().map(|&i| hs[i]).collect())
            }
            other => other.clone(),
        }
    }
}

/// Linear-interpolation quantile of sorted data (`(n−1)p` rule).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let p = p.max(T::zero()).min(T::one());
    let pos = p * from_usize(n - 1);
    let lo = pos.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - lo;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn pairwise_upper<T: Scalar>(sample: &FunctionalSample<T>, spec: &DistanceSpec<T>) -> Result<Vec<T>> {
    let n = sample.len();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| curve_distance(sample.curve(i), sample.curve(j), spec))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[inline]
fn curve_distance<T: Scalar>(a: &Curve<T>, b: &Curve<T>, spec: &DistanceSpec<T>) -> Result<T> {
    if spec.is_l2() && a.shares_grid(b) {
        Ok(l2_dist_sq(a.grid().weights(), a.values(), b.values()).sqrt())
    } else {
        distance(a, b, spec)
    }
}

/// Whether density values carry the pairwise normalizer `w(𝒮)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `w(𝒮) = (n−1) / Σ_{i≠j} K_h(Xᵢ, Xⱼ)`
    #[default]
    Pairwise,
    /// Numerator only, `w(𝒮) = 1`.
    Numerator,
}

/// Both curvature statistics at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPair {
    pub eigen: f64,
    /// `None` when the closed form needs `lim k′(t)/t` and the profile lacks it.
    pub paper: Option<f64>,
}

/// Sample, kernel pair, distance and bandwidth bundled together, with the
/// pairwise distance matrix of the sample cached.
#[derive(Debug, Clone)]
pub struct DensityModel<T> {
    sample: FunctionalSample<T>,
    pair: KernelPair,
    distance: DistanceSpec<T>,
    bandwidth: BandwidthRule<T>,
    normalization: Normalization,
    pairwise: Vec<T>,
    sum_k: T,
    sum_g: T,
}

/// Per-datum kernel quantities at a query point.
struct Terms<T> {
    dist: Vec<T>,
    h: Vec<T>,
}

impl<T: Scalar> DensityModel<T> {
    pub fn new(
        sample: FunctionalSample<T>,
        pair: KernelPair,
        distance: DistanceSpec<T>,
        bandwidth: BandwidthRule<T>,
    ) -> Result<Self> {
        distance.validate()?;
        let n = sample.len();
        bandwidth.validate(n)?;
        let upper = pairwise_upper(&sample, &distance)?;
        let mut pairwise = vec![T::zero(); n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let d = it.next().expect("upper triangle length");
                pairwise[i * n + j] = d;
                pairwise[j * n + i] = d;
            }
        }
        let mut sum_k = T::zero();
        let mut sum_g = T::zero();
        for i in 0..n {
            let h = bandwidth.at(i);
            for j in 0..n {
                if i != j {
                    let t = pairwise[i * n + j] / h;
                    sum_k = sum_k + pair.k.eval(t);
                    sum_g = sum_g + pair.g.eval(t);
                }
            }
        }
        Ok(Self {
            sample,
            pair,
            distance,
            bandwidth,
            normalization: Normalization::Pairwise,
            pairwise,
            sum_k,
            sum_g,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Same kernel, distance and normalization on another sample; the
    /// bandwidth rule must fit the new sample.
    pub fn rebuild(&self, sample: FunctionalSample<T>, bandwidth: BandwidthRule<T>) -> Result<Self> {
        Ok(Self::new(sample, self.pair.clone(), self.distance, bandwidth)?
            .with_normalization(self.normalization))
    }

    /// Same sample and cached distances under a different bandwidth rule.
    pub fn with_bandwidth(&self, bandwidth: BandwidthRule<T>) -> Result<Self> {
        let n = self.len();
        bandwidth.validate(n)?;
        let (mut sum_k, mut sum_g) = (T::zero(), T::zero());
        for i in 0..n {
            let h = bandwidth.at(i);
            for j in 0..n {
                if i != j {
                    let t = self.pairwise[i * n + j] / h;
                    sum_k = sum_k + self.pair.k.eval(t);
                    sum_g = sum_g + self.pair.g.eval(t);
                }
            }
        }
        Ok(Self {
            bandwidth,
            sum_k,
            sum_g,
            ..self.clone()
        })
    }

    pub fn sample(&self) -> &FunctionalSample<T> {
        &self.sample
    }

    pub fn pair(&self) -> &KernelPair {
        &self.pair
    }

    pub fn distance_spec(&self) -> &DistanceSpec<T> {
        &self.distance
    }

    pub fn bandwidth(&self) -> &BandwidthRule<T> {
        &self.bandwidth
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    /// Cached `d(Xᵢ, Xⱼ)`.
    pub fn pairwise(&self, i: usize, j: usize) -> T {
        self.pairwise[i * self.len() + j]
    }

    pub fn max_pairwise(&self) -> T {
        self.pairwise.iter().copied().fold(T::zero(), T::max)
    }

    /// Smallest distance between two distinct sample indices.
    pub fn min_pairwise(&self) -> Option<T> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.pairwise(i, j))
            .reduce(T::min)
    }

    fn normalizer(&self, sum: T) -> Result<T> {
        match self.normalization {
            Normalization::Numerator => Ok(T::one()),
            Normalization::Pairwise => {
                if sum > T::zero() {
                    Ok(from_usize::<T>(self.len() - 1) / sum)
                } else {
                    Err(Error::NormalizerZero {
                        min_pairwise: self.min_pairwise().map(|d| d.as_f64()).unwrap_or(f64::NAN),
                    })
                }
            }
        }
    }

    /// `w_K(𝒮)`
    pub fn w_k(&self) -> Result<T> {
        self.normalizer(self.sum_k)
    }

    /// `w_G(𝒮)`
    pub fn w_g(&self) -> Result<T> {
        self.normalizer(self.sum_g)
    }

    fn c(&self) -> T {
        T::lit(self.pair.c)
    }

    fn check_query(&self, x: &Curve<T>) -> Result<()> {
        if x.shares_grid(self.sample.curve(0)) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `d(Xᵢ, x)` for every sample curve.
    pub fn distances_to(&self, x: &Curve<T>) -> Result<Vec<T>> {
        self.check_query(x)?;
        self.sample
            .curves()
            .iter()
            .map(|c| curve_distance(c, x, &self.distance))
            .collect()
    }

    fn terms(&self, x: &Curve<T>) -> Result<Terms<T>> {
        let dist = self.distances_to(x)?;
        let h = (0..self.len()).map(|i| self.bandwidth.at(i)).collect();
        Ok(Terms { dist, h })
    }

    fn inner(&self, a: &Curve<T>, b: &Curve<T>) -> Result<T> {
        if self.distance.is_l2() {
            Ok(l2_dot(a.grid().weights(), a.values(), b.values()))
        } else {
            inner_product(a, b, &self.distance)
        }
    }

    /// Hilbert norm `√⟨v, v⟩` under the model's inner product.
    pub fn hilbert_norm(&self, v: &Curve<T>) -> Result<T> {
        Ok(self.inner(v, v)?.max(T::zero()).sqrt())
    }

    /// `p̂(x) = w_K(𝒮) Σ k(d(X,x)/h(X))`
    pub fn density_k(&self, x: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        let s: T = t.dist.iter().zip(&t.h).map(|(&d, &h)| self.pair.k.eval(d / h)).sum();
        Ok(self.w_k()? * s)
    }

    /// `p̃(x) = w_G(𝒮) Σ g(d(X,x)/h(X))`, the density whose gradient the
    /// mean-shift update follows.
    pub fn density_g(&self, x: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        let s: T = t.dist.iter().zip(&t.h).map(|(&d, &h)| self.pair.g.eval(d / h)).sum();
        Ok(self.w_g()? * s)
    }

    /// `p̄(x) = Σ k(d(X,x)/h(X)) / h(X)²`
    pub fn p_bar(&self, x: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        Ok(self.mean_shift_weights(&t).iter().copied().sum())
    }

    fn mean_shift_weights(&self, t: &Terms<T>) -> Vec<T> {
        t.dist
            .iter()
            .zip(&t.h)
            .map(|(&d, &h)| self.pair.k.eval(d / h) / (h * h))
            .collect()
    }

    /// `Σ (wᵢ/Σw) Xᵢ`, the image of `x` under one mean-shift update.
    pub fn shift_target(&self, x: &Curve<T>) -> Result<Curve<T>> {
        let t = self.terms(x)?;
        let w = self.mean_shift_weights(&t);
        let total: T = w.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::OutsideSupport);
        }
        let coeffs: Vec<T> = w.iter().map(|&wi| wi / total).collect();
        let refs: Vec<&Curve<T>> = self.sample.curves().iter().collect();
        linear_combination(&coeffs, &refs)
    }

    /// `m(x)`: weighted mean of the sample minus `x`.
    pub fn mean_shift_vector(&self, x: &Curve<T>) -> Result<Curve<T>> {
        self.shift_target(x)?.sub(x)
    }

    /// `∇p̃ₓ = C w_G(𝒮) Σ k(d/h)/h² (X − x)`
    pub fn gradient(&self, x: &Curve<T>) -> Result<Curve<T>> {
        let t = self.terms(x)?;
        let w = self.mean_shift_weights(&t);
        let total: T = w.iter().copied().sum();
        let scale = self.c() * self.w_g()?;
        let mut coeffs: Vec<T> = w.iter().map(|&wi| scale * wi).collect();
        coeffs.push(-scale * total);
        let mut refs: Vec<&Curve<T>> = self.sample.curves().iter().collect();
        refs.push(x);
        linear_combination(&coeffs, &refs)
    }

    /// Step size `s(x)` and unit direction `a*(x)` of the gradient-ascent
    /// reading of the mean-shift step, `m(x) = s(x)·a*(x)`. The direction
    /// is the zero curve where the gradient vanishes.
    pub fn step_decomposition(&self, x: &Curve<T>) -> Result<(T, Curve<T>)> {
        let grad = self.gradient(x)?;
        let norm = self.hilbert_norm(&grad)?;
        let pbar = self.p_bar(x)?;
        if !(pbar > T::zero()) {
            return Err(Error::OutsideSupport);
        }
        let s = norm / (self.c() * self.w_g()? * pbar);
        let dir = if norm > T::zero() {
            grad.scale(T::one() / norm)
        } else {
            grad
        };
        Ok((s, dir))
    }

    /// Second Gateaux differential `p̃⁽²⁾ₓ(y, z)`.
    pub fn hessian_form(&self, x: &Curve<T>, y: &Curve<T>, z: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        let yz = self.inner(y, z)?;
        let mut acc = T::zero();
        for (i, xi) in self.sample.curves().iter().enumerate() {
            let (d, h) = (t.dist[i], t.h[i]);
            let u = d / h;
            let kv = self.pair.k.eval(u);
            let mut term = kv * yz;
            if d > T::zero() && u < T::one() {
                let dk = self.pair.k.d1(u);
                if dk != T::zero() {
                    let v = xi.sub(x)?;
                    let vy = self.inner(&v, y)?;
                    let vz = self.inner(&v, z)?;
                    term = term + dk / h * vy * vz / d;
                }
            }
            acc = acc + term / (h * h);
        }
        Ok(-self.c() * self.w_g()? * acc)
    }

    /// Closed-form curvature statistic, term for term:
    /// `C w_G [ 2‖Σ k′/h³ (X−x)/‖X−x‖‖ − Σ h⁻² ( k′/h (‖X−x‖ + ‖X−x‖⁻¹) + k ) ]`.
    pub fn lambda_paper(&self, x: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        let mut coeffs = Vec::with_capacity(self.len() + 1);
        let mut coeff_x = T::zero();
        let mut scalar_sum = T::zero();
        for (&d, &h) in t.dist.iter().zip(&t.h) {
            let u = d / h;
            let kv = self.pair.k.eval(u);
            let h2 = h * h;
            if d > T::zero() {
                let dk = self.pair.k.d1(u);
                let c = dk / (h2 * h * d);
                coeffs.push(c);
                coeff_x = coeff_x - c;
                scalar_sum = scalar_sum + (dk / h * (d + T::one() / d) + kv) / h2;
            } else {
                // k′(d/h)/d → lim k′(t)/t / h, and d·k′ → 0
                let lim = self
                    .pair
                    .k
                    .d1_over_t_at_zero()
                    .ok_or(Error::SingularEvaluation)?;
                coeffs.push(T::zero());
                scalar_sum = scalar_sum + (T::lit(lim) / h2 + kv) / h2;
            }
        }
        coeffs.push(coeff_x);
        let mut refs: Vec<&Curve<T>> = self.sample.curves().iter().collect();
        refs.push(x);
        let dir = linear_combination(&coeffs, &refs)?;
        let first = T::two() * self.hilbert_norm(&dir)?;
        Ok(self.c() * self.w_g()? * (first - scalar_sum))
    }

    /// `sup_{‖y‖=1} p̃⁽²⁾ₓ(y, y)`. The form is `−b‖y‖² + Σ cᵢ⟨vᵢ, y⟩²` with
    /// `vᵢ = Xᵢ − x` and `cᵢ ≥ 0`, so the supremum is the top eigenvalue of
    /// `√cᵢ √cⱼ ⟨vᵢ, vⱼ⟩` minus `b`.
    pub fn lambda_eigen(&self, x: &Curve<T>) -> Result<T> {
        let t = self.terms(x)?;
        let scale = self.c() * self.w_g()?;
        let mut b = T::zero();
        let mut active: Vec<(T, Curve<T>)> = Vec::new();
        for (i, xi) in self.sample.curves().iter().enumerate() {
            let (d, h) = (t.dist[i], t.h[i]);
            let u = d / h;
            b = b + self.pair.k.eval(u) / (h * h);
            if d > T::zero() && u < T::one() {
                let c = -scale * self.pair.k.d1(u) / (h * h * h * d);
                if c > T::zero() {
                    active.push((c, xi.sub(x)?));
                }
            }
        }
        let top = self.weighted_gram_top(&active)?;
        Ok(T::lit(top) - scale * b)
    }

    fn weighted_gram_top(&self, active: &[(T, Curve<T>)]) -> Result<f64> {
        let m = active.len();
        if m == 0 {
            return Ok(0.0);
        }
        let mut g = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let ip = self.inner(&active[i].1, &active[j].1)?;
                let v = (active[i].0 * active[j].0).sqrt() * ip;
                g[(i, j)] = v.as_f64();
                g[(j, i)] = v.as_f64();
            }
        }
        Ok(symmetric_max_eigenvalue(g).max(0.0))
    }

    /// Both curvature statistics; the closed form is `None` when undefined.
    pub fn lambdas(&self, x: &Curve<T>) -> Result<LambdaPair> {
        let eigen = self.lambda_eigen(x)?.as_f64();
        let paper = match self.lambda_paper(x) {
            Ok(v) => Some(v.as_f64()),
            Err(Error::SingularEvaluation) => None,
            Err(e) => return Err(e),
        };
        Ok(LambdaPair { eigen, paper })
    }

    /// True when `x` lies outside every closed support ball `B̄(X, h(X))`.
    pub fn outside_support(&self, x: &Curve<T>) -> Result<bool> {
        let t = self.terms(x)?;
        Ok(t.dist.iter().zip(&t.h).all(|(&d, &h)| d > h))
    }
}

//! Kernel profiles supported on `[0, 1]`, the shadow relation
//! `k(t) = −g′(t)/(C t)` and its validity checks.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::integrate;
use crate::scalar::Scalar;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const QUAD_PANELS: usize = 64;
const NUMERIC_MESH: usize = 4001;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Uniform,
    /// `(1 − t²)^p`
    Poly(u32),
    /// `cos(πt/2)`
    Cosine,
    /// `sin(πt/2)/t`
    Sinc,
    /// `exp(−t²/2)`
    Gaussian,
    Custom(ScalarFn),
    /// Values on the uniform mesh `i/(len−1)`, linearly interpolated.
    Tabulated(Arc<Vec<f64>>),
}

/// A nonnegative profile with support `[0, 1]`, scaled by a constant.
#[derive(Clone)]
pub struct Profile {
    name: String,
    shape: Shape,
    scale: f64,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("name", &self.name)
            .field("scale", &self.scale)
            .finish()
    }
}

impl Profile {
    fn analytic(name: &str, shape: Shape) -> Self {
        Self {
            name: name.to_string(),
            shape,
            scale: 1.0,
        }
    }

    pub fn uniform() -> Self {
        Self::analytic("uniform", Shape::Uniform)
    }

    pub fn epanechnikov() -> Self {
        Self::analytic("epanechnikov", Shape::Poly(1))
    }

    pub fn biweight() -> Self {
        Self::analytic("biweight", Shape::Poly(2))
    }

    pub fn triweight() -> Self {
        Self::analytic("triweight", Shape::Poly(3))
    }

    pub fn cosine() -> Self {
        Self::analytic("cosine", Shape::Cosine)
    }

    pub fn sinc() -> Self {
        Self::analytic("sinc", Shape::Sinc)
    }

    /// `exp(−t²/2)` truncated to `[0, 1]`.
    pub fn truncated_gaussian() -> Self {
        Self::analytic("gaussian", Shape::Gaussian)
    }

    /// A user profile given on `[0, 1]`; derivatives are taken numerically.
    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::analytic(name, Shape::Custom(Arc::new(f)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.shape, Shape::Custom(_) | Shape::Tabulated(_))
    }

    /// `k(t)`, zero outside `[0, 1]`.
    pub fn eval<T: Scalar>(&self, t: T) -> T {
        let t = t.abs();
        if t > T::one() {
            return T::zero();
        }
        let s = T::lit(self.scale);
        let v = match &self.shape {
            Shape::Uniform => T::one(),
            Shape::Poly(p) => (T::one() - t * t).powi(*p as i32),
            Shape::Cosine => (T::lit(HALF_PI) * t).cos(),
            Shape::Sinc => sinc(t),
            Shape::Gaussian => (-t * t * T::half()).exp(),
            Shape::Custom(f) => T::lit(f(t.as_f64())),
            Shape::Tabulated(tab) => T::lit(interp(tab, t.as_f64())),
        };
        s * v
    }

    /// `k′(t)` on `[0, 1)`, zero beyond the support.
    pub fn d1<T: Scalar>(&self, t: T) -> T {
        let t = t.abs();
        if t >= T::one() {
            return T::zero();
        }
        let s = T::lit(self.scale);
        let two = T::two();
        let v = match &self.shape {
            Shape::Uniform => T::zero(),
            Shape::Poly(p) => {
                let p = *p as i32;
                -two * T::lit(p as f64) * t * (T::one() - t * t).powi(p - 1)
            }
            Shape::Cosine => {
                let a = T::lit(HALF_PI);
                -a * (a * t).sin()
            }
            Shape::Sinc => sinc_d1(t),
            Shape::Gaussian => -t * (-t * t * T::half()).exp(),
            Shape::Custom(f) => T::lit(numeric_d1(|x| f(x), t.as_f64())),
            Shape::Tabulated(tab) => T::lit(numeric_d1(|x| interp(tab, x), t.as_f64())),
        };
        s * v
    }

    /// `k″(t)` on `[0, 1)`.
    pub fn d2<T: Scalar>(&self, t: T) -> T {
        let t = t.abs();
        if t >= T::one() {
            return T::zero();
        }
        let s = T::lit(self.scale);
        let v = match &self.shape {
            Shape::Uniform => T::zero(),
            Shape::Poly(p) => {
                let pf = T::lit(*p as f64);
                let p = *p as i32;
                let u = T::one() - t * t;
                let first = -T::two() * pf * u.powi(p - 1);
                if p >= 2 {
                    first + T::lit(4.0) * pf * (pf - T::one()) * t * t * u.powi(p - 2)
                } else {
                    first
                }
            }
            Shape::Cosine => {
                let a = T::lit(HALF_PI);
                -a * a * (a * t).cos()
            }
            Shape::Sinc => sinc_d2(t),
            Shape::Gaussian => (t * t - T::one()) * (-t * t * T::half()).exp(),
            Shape::Custom(f) => T::lit(numeric_d2(|x| f(x), t.as_f64())),
            Shape::Tabulated(tab) => T::lit(numeric_d2(|x| interp(tab, x), t.as_f64())),
        };
        s * v
    }

    /// `lim_{t→0⁺} k′(t)/t` when known in closed form.
    pub fn d1_over_t_at_zero(&self) -> Option<f64> {
        let v = match &self.shape {
            Shape::Uniform => 0.0,
            Shape::Poly(p) => -2.0 * *p as f64,
            Shape::Cosine => -HALF_PI * HALF_PI,
            Shape::Sinc => -HALF_PI.powi(3) / 3.0,
            Shape::Gaussian => -1.0,
            Shape::Custom(_) | Shape::Tabulated(_) => return None,
        };
        Some(self.scale * v)
    }

    /// `k′(t)/t`, using the limit at `t = 0`.
    pub fn d1_over_t<T: Scalar>(&self, t: T) -> Option<T> {
        if t == T::zero() {
            self.d1_over_t_at_zero().map(T::lit)
        } else {
            Some(self.d1(t) / t)
        }
    }
}

fn sinc<T: Scalar>(t: T) -> T {
    let a = T::lit(HALF_PI);
    if t < T::lit(1e-4) {
        let x = a * t;
        a * (T::one() - x * x / T::lit(6.0))
    } else {
        (a * t).sin() / t
    }
}

fn sinc_d1<T: Scalar>(t: T) -> T {
    let a = T::lit(HALF_PI);
    if t < T::lit(1e-3) {
        let a3 = a * a * a;
        -a3 * t / T::lit(3.0) + a3 * a * a * t * t * t / T::lit(30.0)
    } else {
        (a * t * (a * t).cos() - (a * t).sin()) / (t * t)
    }
}

fn sinc_d2<T: Scalar>(t: T) -> T {
    let a = T::lit(HALF_PI);
    if t < T::lit(1e-2) {
        let a3 = a * a * a;
        -a3 / T::lit(3.0) + a3 * a * a * t * t / T::lit(10.0)
    } else {
        let (s, c) = (a * t).sin_cos();
        (-a * a * t * t * s - T::two() * a * t * c + T::two() * s) / (t * t * t)
    }
}

fn interp(tab: &[f64], t: f64) -> f64 {
    let n = tab.len() - 1;
    let x = t.clamp(0.0, 1.0) * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let f = x - i as f64;
    tab[i] * (1.0 - f) + tab[i + 1] * f
}

const FD_STEP: f64 = 1e-5;

fn numeric_d1(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = FD_STEP;
    if t < h {
        (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
    } else if t > 1.0 - h {
        (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }
}

fn numeric_d2(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-4;
    let c = t.clamp(h, 1.0 - h);
    (f(c + h) - 2.0 * f(c) + f(c - h)) / (h * h)
}

/// Mean-shift profile `k`, its shadow `g` and the linking constant `C`.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub k: Profile,
    pub g: Profile,
    pub c: f64,
}

/// Names of the built-in pairs, mean-shift profile first.
pub const BUILTIN_PAIRS: [&str; 5] = [
    "uniform_epanechnikov",
    "epanechnikov_biweight",
    "biweight_triweight",
    "sinc_cosine",
    "gaussian_gaussian",
];

impl KernelPair {
    /// Assembles a pair without checking the shadow identity.
    pub fn from_parts(k: Profile, g: Profile, c: f64) -> Self {
        Self { k, g, c }
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.k.name(), self.g.name())
    }
}

/// One of the built-in pairs, built from its shadow profile.
pub fn builtin_pair(name: &str) -> Result<KernelPair> {
    let g = match name {
        "uniform_epanechnikov" => Profile::epanechnikov(),
        "epanechnikov_biweight" => Profile::biweight(),
        "biweight_triweight" => Profile::triweight(),
        "sinc_cosine" => Profile::cosine(),
        "gaussian_gaussian" => Profile::truncated_gaussian(),
        other => return Err(Error::UnknownKernel(other.to_string())),
    };
    shadow_of(g)
}

/// `∫₀¹ (1−t²)^m dt = 4^m (m!)² / (2m+1)!`
fn poly_moment(m: u32) -> f64 {
    let mut v = 1.0;
    for j in 1..=m {
        v *= (2 * j) as f64 / (2 * j + 1) as f64;
    }
    v
}

/// Builds the mean-shift profile whose shadow is `g`.
pub fn shadow_of(g: Profile) -> Result<KernelPair> {
    let s = g.scale;
    let (k, c) = match &g.shape {
        Shape::Uniform => {
            return Err(Error::ShadowLimit(
                "−g′(t)/t vanishes identically; the limit at 0 must be positive".into(),
            ))
        }
        Shape::Poly(p) => {
            let p = *p;
            let c = s * 2.0 * p as f64 * poly_moment(p - 1);
            let shape = if p == 1 { Shape::Uniform } else { Shape::Poly(p - 1) };
            let name = match p {
                1 => "uniform",
                2 => "epanechnikov",
                3 => "biweight",
                4 => "triweight",
                _ => "polynomial",
            };
            let k = Profile {
                name: name.into(),
                shape,
                scale: s * 2.0 * p as f64 / c,
            };
            (k, c)
        }
        Shape::Cosine => {
            let c = s * HALF_PI * integrate(|t| sinc(t), 0.0, 1.0, QUAD_PANELS);
            let k = Profile {
                name: "sinc".into(),
                shape: Shape::Sinc,
                scale: s * HALF_PI / c,
            };
            (k, c)
        }
        Shape::Gaussian => {
            let c = s * integrate(|t| (-t * t / 2.0).exp(), 0.0, 1.0, QUAD_PANELS);
            let k = Profile {
                name: "gaussian".into(),
                shape: Shape::Gaussian,
                scale: s / c,
            };
            (k, c)
        }
        Shape::Sinc | Shape::Custom(_) | Shape::Tabulated(_) => numeric_shadow(&g)?,
    };
    Ok(KernelPair { k, g, c })
}

fn numeric_shadow(g: &Profile) -> Result<(Profile, f64)> {
    let q = |t: f64| -g.d1(t) / t;
    let (q2, q3, q4) = (q(1e-2), q(1e-3), q(1e-4));
    if !q4.is_finite() || q4.abs() > 2.0 * q3.abs().max(q2.abs()) + 1e-12 {
        return Err(Error::ShadowLimit(format!(
            "−g′(t)/t diverges as t → 0 ({q3:.3e} at 1e-3, {q4:.3e} at 1e-4)"
        )));
    }
    // Richardson step for an even expansion q(t) = c + a t² + …
    let limit = (100.0 * q4 - q3) / 99.0;
    if limit <= 0.0 {
        return Err(Error::ShadowLimit(format!(
            "lim −g′(t)/t = {limit:.3e} is not positive"
        )));
    }
    let c = integrate(q, 0.0, 1.0, QUAD_PANELS);
    if c <= 0.0 {
        return Err(Error::ShadowLimit(format!("C = {c:.3e} is not positive")));
    }
    let n = NUMERIC_MESH - 1;
    let mut tab = Vec::with_capacity(NUMERIC_MESH);
    tab.push(limit / c);
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let t_in = if i == n { 1.0 - 1e-9 } else { t };
        tab.push(q(t_in) / c);
    }
    // numeric differentiation leaves ~1e-8 relative noise near t = 0
    let top = tab.iter().cloned().fold(0.0, f64::max);
    for i in 1..tab.len() {
        if tab[i] > tab[i - 1] + 1e-6 * top {
            return Err(Error::ProfileIncreasing {
                t: i as f64 / n as f64,
            });
        }
    }
    let k = Profile {
        name: format!("shadow_of_{}", g.name),
        shape: Shape::Tabulated(Arc::new(tab)),
        scale: 1.0,
    };
    Ok((k, c))
}

/// Outcome of [`validate_pair`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mesh_size: usize,
    /// `max |k(t) + g′(t)/(C t)|`
    pub shadow_residual: f64,
    /// `max |k(t)·C·t + g′(t)|`
    pub scaled_residual: f64,
    pub max_g_prime: f64,
    pub max_k: f64,
    pub min_k: f64,
    /// Largest increase `k(tᵢ₊₁) − k(tᵢ)` between mesh neighbours.
    pub max_increase: f64,
    /// `max (g′ − t g″)/(C t²)`, the derivative of `−g′/(Ct)`.
    pub max_k_prime_from_g: f64,
    pub nonnegative: bool,
    pub nonincreasing: bool,
    pub differential_inequality: bool,
    pub shadow_identity: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.nonincreasing && self.differential_inequality && self.shadow_identity
    }
}

/// Checks the profile conditions on the open mesh `t = i/(m+1)`, `i = 1..m`.
pub fn validate_pair(pair: &KernelPair, mesh_size: usize) -> Result<ValidationReport> {
    if mesh_size < 16 {
        return Err(Error::InvalidConfig(format!(
            "mesh_size must be at least 16, got {mesh_size}"
        )));
    }
    let (k, g, c) = (&pair.k, &pair.g, pair.c);
    let ts: Vec<f64> = (1..=mesh_size)
        .map(|i| i as f64 / (mesh_size + 1) as f64)
        .collect();
    let mut rep = ValidationReport {
        mesh_size,
        shadow_residual: 0.0,
        scaled_residual: 0.0,
        max_g_prime: 0.0,
        max_k: f64::NEG_INFINITY,
        min_k: f64::INFINITY,
        max_increase: f64::NEG_INFINITY,
        max_k_prime_from_g: f64::NEG_INFINITY,
        nonnegative: true,
        nonincreasing: true,
        differential_inequality: true,
        shadow_identity: true,
    };
    let mut prev: Option<f64> = None;
    for &t in &ts {
        let kt: f64 = k.eval(t);
        let g1: f64 = g.d1(t);
        let g2: f64 = g.d2(t);
        rep.shadow_residual = rep.shadow_residual.max((kt + g1 / (c * t)).abs());
        rep.scaled_residual = rep.scaled_residual.max((kt * c * t + g1).abs());
        rep.max_g_prime = rep.max_g_prime.max(g1.abs());
        rep.max_k = rep.max_k.max(kt);
        rep.min_k = rep.min_k.min(kt);
        rep.max_k_prime_from_g = rep.max_k_prime_from_g.max((g1 - t * g2) / (c * t * t));
        if let Some(p) = prev {
            rep.max_increase = rep.max_increase.max(kt - p);
        }
        prev = Some(kt);
    }
    let scale = rep.max_k.abs().max(f64::MIN_POSITIVE);
    let tol = 1e-8;
    rep.nonnegative = rep.min_k >= 0.0;
    rep.nonincreasing = rep.max_increase <= tol * scale;
    let ineq_tol = if g.is_analytic() { tol } else { 1e-3 };
    rep.differential_inequality = rep.max_k_prime_from_g <= ineq_tol * scale;
    rep.shadow_identity = rep.shadow_residual <= tol * scale.max(1.0);
    Ok(rep)
}

//! Seeded simulation generators and the fPCA / k-means baseline.

use std::sync::Arc;

use nalgebra::DMatrix;
use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{Curve, FunctionalSample, Grid};
use crate::linalg::symmetric_eigen_desc;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Two signal bundles and a clutter group, each drawn with probability 1/3.
    SignalClutter {
        mu_eta: f64,
        sigma_eta: f64,
        sigma_gamma: f64,
    },
    /// Two elliptical clouds of coefficients on `sin(2πt)`, `cos(2πt)`.
    EllipticalSincos {
        separation: f64,
        sd_major: f64,
        sd_minor: f64,
    },
    /// Concentric rings of coefficients on `sin(2πt)`, `cos(2πt)`.
    CircularSincos { radii: Vec<f64>, noise: f64 },
}

impl GeneratorKind {
    pub fn signal_clutter() -> Self {
        GeneratorKind::SignalClutter {
            mu_eta: 1.0,
            sigma_eta: 0.1,
            sigma_gamma: 0.8,
        }
    }

    pub fn elliptical_sincos() -> Self {
        GeneratorKind::EllipticalSincos {
            separation: 3.0,
            sd_major: 0.5,
            sd_minor: 0.2,
        }
    }

    pub fn circular_sincos() -> Self {
        GeneratorKind::CircularSincos {
            radii: vec![1.0, 3.0],
            noise: 0.15,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "signal_clutter" => Ok(Self::signal_clutter()),
            "elliptical_sincos" => Ok(Self::elliptical_sincos()),
            "circular_sincos" => Ok(Self::circular_sincos()),
            other => Err(Error::InvalidConfig(format!(
                "unknown generator `{other}`; expected signal_clutter, elliptical_sincos or circular_sincos"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::SignalClutter { .. } => "signal_clutter",
            GeneratorKind::EllipticalSincos { .. } => "elliptical_sincos",
            GeneratorKind::CircularSincos { .. } => "circular_sincos",
        }
    }

    /// Default sample size for each generator.
    pub fn default_n(&self) -> usize {
        match self {
            GeneratorKind::SignalClutter { .. } | GeneratorKind::EllipticalSincos { .. } => 150,
            GeneratorKind::CircularSincos { radii, .. } => 100 * radii.len(),
        }
    }

    pub fn group_names(&self) -> Vec<String> {
        match self {
            GeneratorKind::SignalClutter { .. } => vec!["X".into(), "Y".into(), "C".into()],
            GeneratorKind::EllipticalSincos { .. } => vec!["A".into(), "B".into()],
            GeneratorKind::CircularSincos { radii, .. } => {
                (0..radii.len()).map(|i| format!("ring{i}")).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let valid = match &self.kind {
            GeneratorKind::SignalClutter {
                mu_eta,
                sigma_eta,
                sigma_gamma,
            } => mu_eta.is_finite() && ok(*sigma_eta) && ok(*sigma_gamma),
            GeneratorKind::EllipticalSincos {
                separation,
                sd_major,
                sd_minor,
            } => *separation > 0.0 && ok(*separation) && ok(*sd_major) && ok(*sd_minor),
            GeneratorKind::CircularSincos { radii, noise } => {
                !radii.is_empty() && radii.iter().all(|&r| r > 0.0 && r.is_finite()) && ok(*noise)
            }
        };
        if !valid {
            return Err(Error::InvalidConfig(format!(
                "invalid parameters for generator {}",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// A simulated sample with its true group per curve.
#[derive(Debug, Clone)]
pub struct Generated<T> {
    pub sample: FunctionalSample<T>,
    pub truth: Vec<usize>,
    pub group_names: Vec<String>,
}

fn normal(mu: f64, sd: f64) -> Normal<f64> {
    // sd was validated non-negative
    Normal::new(mu, sd).expect("finite normal parameters")
}

/// Draws a labelled sample on `grid`. Deterministic in `spec.seed`.
pub fn generate<T: Scalar>(spec: &GeneratorSpec, grid: Arc<Grid<T>>) -> Result<Generated<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ts: Vec<f64> = grid.points().iter().map(|t| t.as_f64()).collect();
    let wave = |t: f64| (2.5 * std::f64::consts::PI * t).cos();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);

    match &spec.kind {
        GeneratorKind::SignalClutter {
            mu_eta,
            sigma_eta,
            sigma_gamma,
        } => {
            let eta = normal(*mu_eta, *sigma_eta);
            let gamma = normal(0.0, *sigma_gamma);
            for _ in 0..spec.n {
                let group = rng.random_range(0..3usize);
                let row = match group {
                    0 => {
                        let e = eta.sample(&mut rng);
                        ts.iter().map(|&t| e * wave(t)).collect()
                    }
                    1 => {
                        let e = eta.sample(&mut rng);
                        ts.iter().map(|&t| 3.0 + e * wave(t)).collect()
                    }
                    _ => {
                        let g = gamma.sample(&mut rng);
                        let u: f64 = rng.random();
                        let lift = if u > 0.5 { 3.0 } else { 0.0 };
                        ts.iter().map(|&t| g + lift + wave(t)).collect()
                    }
                };
                rows.push(row);
                truth.push(group);
            }
        }
        GeneratorKind::EllipticalSincos {
            separation,
            sd_major,
            sd_minor,
        } => {
            let minor = normal(0.0, *sd_minor);
            let major = normal(0.0, *sd_major);
            let n0 = spec.n.div_ceil(2);
            for i in 0..spec.n {
                let group = usize::from(i >= n0);
                let centre = if group == 0 { -separation / 2.0 } else { separation / 2.0 };
                let a = centre + minor.sample(&mut rng);
                let b = major.sample(&mut rng);
                rows.push(ts.iter().map(|&t| a * (two_pi * t).sin() + b * (two_pi * t).cos()).collect());
                truth.push(group);
            }
        }
        GeneratorKind::CircularSincos { radii, noise } => {
            let radial = normal(0.0, *noise);
            let per = spec.n / radii.len();
            let extra = spec.n % radii.len();
            for (group, &r) in radii.iter().enumerate() {
                let count = per + usize::from(group < extra);
                for _ in 0..count {
                    let theta = rng.random::<f64>() * two_pi;
                    let rho = r + radial.sample(&mut rng);
                    let (a, b) = (rho * theta.cos(), rho * theta.sin());
                    rows.push(ts.iter().map(|&t| a * (two_pi * t).sin() + b * (two_pi * t).cos()).collect());
                    truth.push(group);
                }
            }
        }
    }

    let group_names = spec.kind.group_names();
    let labels = truth.iter().map(|&g| group_names[g].clone()).collect();
    let curves = rows
        .into_iter()
        .map(|r| Curve::new(grid.clone(), r.into_iter().map(T::lit).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Generated {
        sample: FunctionalSample::new(curves, Some(labels))?,
        truth,
        group_names,
    })
}

/// How k-means picks its starting centres.
#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    /// Explicit centres in score coordinates, one per cluster.
    Centers(Vec<Vec<f64>>),
    /// `k` distinct sample points chosen with this seed.
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub pc_scores: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub km_assignments: Vec<usize>,
    pub km_centers: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Principal component scores under the quadrature inner product, then
/// Lloyd's k-means on the scores.
pub fn fpca_kmeans<T: Scalar>(
    sample: &FunctionalSample<T>,
    n_components: usize,
    k: usize,
    init: &KMeansInit,
) -> Result<BaselineResult> {
    let n = sample.len();
    let m = sample.grid().len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must lie in 1..={n}, got {k}")));
    }
    if n_components == 0 || n_components > n.min(m) {
        return Err(Error::InvalidConfig(format!(
            "n_components must lie in 1..={}, got {n_components}",
            n.min(m)
        )));
    }
    let sqrt_w: Vec<f64> = sample.grid().weights().iter().map(|w| w.as_f64().sqrt()).collect();
    let mut mean = vec![0.0; m];
    for c in sample.curves() {
        for (acc, v) in mean.iter_mut().zip(c.values()) {
            *acc += v.as_f64() / n as f64;
        }
    }
    // rows: centred curves scaled by sqrt(quadrature weight)
    let x = DMatrix::from_fn(n, m, |i, j| (sample.curve(i).values()[j].as_f64() - mean[j]) * sqrt_w[j]);
    let cov = (x.transpose() * &x) / n as f64;
    let (vals, vecs) = symmetric_eigen_desc(cov);
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let explained = vals
        .iter()
        .take(n_components)
        .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
        .collect();
    let basis = vecs.columns(0, n_components).into_owned();
    let scores_m = &x * basis;
    let scores: Vec<Vec<f64>> = (0..n).map(|i| scores_m.row(i).iter().copied().collect()).collect();
    let (assign, centers, iterations) = kmeans(&scores, k, init)?;
    Ok(BaselineResult {
        pc_scores: scores,
        explained_variance: explained,
        km_assignments: assign,
        km_centers: centers,
        iterations,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd iterations until assignments stop changing. An emptied cluster
/// keeps its previous centre.
pub fn kmeans(points: &[Vec<f64>], k: usize, init: &KMeansInit) -> Result<(Vec<usize>, Vec<Vec<f64>>, usize)> {
    let n = points.len();
    let dim = points.first().map_or(0, |p| p.len());
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must lie in 1..={n}, got {k}")));
    }
    let mut centers = match init {
        KMeansInit::Centers(c) => {
            if c.len() != k || c.iter().any(|v| v.len() != dim) {
                return Err(Error::InvalidConfig(format!(
                    "expected {k} initial centres of dimension {dim}"
                )));
            }
            c.clone()
        }
        KMeansInit::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            sample_indices(&mut rng, n, k).iter().map(|i| points[i].clone()).collect()
        }
    };
    let nearest = |p: &[f64], centers: &[Vec<f64>]| {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centers.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    };
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == assign || iterations >= 10_000 {
            break;
        }
        assign = next;
    }
    Ok((assign, centers, iterations))
}

fn confusion(pred: &[usize], truth: &[usize]) -> Result<Vec<Vec<i64>>> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let p = pred.iter().max().map_or(0, |m| m + 1);
    let t = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0i64; t]; p];
    for (&a, &b) in pred.iter().zip(truth) {
        table[a][b] += 1;
    }
    Ok(table)
}

/// Fraction of curves correctly labelled under the best one-to-one
/// matching between predicted clusters and true groups. Surplus clusters
/// on either side stay unmatched and count as errors.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Ok(1.0);
    }
    let table = confusion(pred, truth)?;
    let rows = table.len();
    let cols = table[0].len();
    let weights = if rows <= cols {
        Matrix::from_rows(table).expect("rectangular table")
    } else {
        let transposed: Vec<Vec<i64>> = (0..cols).map(|j| (0..rows).map(|i| table[i][j]).collect()).collect();
        Matrix::from_rows(transposed).expect("rectangular table")
    };
    let (best, _) = kuhn_munkres(&weights);
    Ok(best as f64 / pred.len() as f64)
}

/// Fraction of curves sharing the majority true group of their cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Ok(1.0);
    }
    let table = confusion(pred, truth)?;
    let hits: i64 = table.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::inner_product;
    use crate::function_space::DistanceSpec;

    fn grid() -> Arc<Grid<f64>> {
        Arc::new(Grid::uniform(0.0, 1.0, 101).unwrap())
    }

    #[test]
    fn noiseless_signals_are_exact() {
        let spec = GeneratorSpec::new(
            GeneratorKind::SignalClutter {
                mu_eta: 1.0,
                sigma_eta: 0.0,
                sigma_gamma: 0.0,
            },
            60,
            4,
        );
        let g = generate(&spec, grid()).unwrap();
        for (c, &grp) in g.sample.curves().iter().zip(&g.truth) {
            for (t, v) in c.grid().points().iter().zip(c.values()) {
                let w = (2.5 * std::f64::consts::PI * t).cos();
                match grp {
                    0 => assert_eq!(*v, w),
                    1 => assert_eq!(*v, 3.0 + w),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn signal_clutter_groups_look_multinomial() {
        let spec = GeneratorSpec::new(GeneratorKind::signal_clutter(), 150, 11);
        let g = generate(&spec, grid()).unwrap();
        let mut counts = [0usize; 3];
        for &t in &g.truth {
            counts[t] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 150);
        // each count within four standard deviations of 50
        assert!(counts.iter().all(|&c| (c as f64 - 50.0).abs() < 4.0 * (150.0f64 * 2.0 / 9.0).sqrt()));
    }

    #[test]
    fn rings_lie_in_the_sincos_span() {
        let gr = grid();
        let spec = GeneratorSpec::new(GeneratorKind::circular_sincos(), 200, 2);
        let g = generate(&spec, gr.clone()).unwrap();
        let s = Curve::from_fn(gr.clone(), |t| (2.0 * std::f64::consts::PI * t).sin()).unwrap();
        let c = Curve::from_fn(gr.clone(), |t| (2.0 * std::f64::consts::PI * t).cos()).unwrap();
        // least squares against the two basis vectors on the grid itself
        let a = DMatrix::from_fn(101, 2, |i, j| if j == 0 { s.values()[i] } else { c.values()[i] });
        let ata = a.transpose() * &a;
        let inv = ata.try_inverse().unwrap();
        for x in g.sample.curves() {
            let y = nalgebra::DVector::from_column_slice(x.values());
            let coef = &inv * a.transpose() * &y;
            let resid = (&y - &a * coef).amax();
            assert!(resid < 1e-10);
        }
        assert_eq!(g.truth.iter().filter(|&&t| t == 1).count(), 100);
        let _ = inner_product(&s, &c, &DistanceSpec::l2()).unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec::new(GeneratorKind::elliptical_sincos(), 30, 9);
        let a = generate(&spec, grid()).unwrap();
        let b = generate(&spec, grid()).unwrap();
        assert_eq!(a.truth, b.truth);
        for (x, y) in a.sample.curves().iter().zip(b.sample.curves()) {
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn two_components_explain_everything() {
        let spec = GeneratorSpec::new(GeneratorKind::elliptical_sincos(), 150, 3);
        let g = generate(&spec, grid()).unwrap();
        let r = fpca_kmeans(&g.sample, 2, 2, &KMeansInit::Seeded(1)).unwrap();
        let ev: f64 = r.explained_variance.iter().sum();
        assert!((ev - 1.0).abs() < 1e-8, "{ev}");
        assert!(r.pc_scores.iter().all(|s| s.len() == 2));
        assert!(accuracy(&r.km_assignments, &g.truth).unwrap() >= 0.95);
    }

    #[test]
    fn single_cluster_centre_is_the_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let (a, c, _) = kmeans(&pts, 1, &KMeansInit::Seeded(0)).unwrap();
        assert_eq!(a, vec![0, 0, 0]);
        assert!((c[0][0] - 2.0).abs() < 1e-12 && (c[0][1] - 1.0).abs() < 1e-12);
        assert!(kmeans(&pts, 4, &KMeansInit::Seeded(0)).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let pts = vec![vec![0.0], vec![2.0]];
        let (a, c, _) = kmeans(&pts, 2, &KMeansInit::Centers(vec![vec![1.0], vec![1.0]])).unwrap();
        assert_eq!(a, vec![0, 0]);
        assert_eq!(c[1], vec![1.0]);
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(accuracy(&[2, 2, 0, 0, 1, 1], &truth).unwrap(), 1.0);
        assert!((accuracy(&[0, 0, 0, 0, 0, 0], &truth).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // more clusters than groups: surplus clusters are errors
        let acc = accuracy(&[0, 1, 2, 2, 3, 3], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);
        assert_eq!(purity(&[0, 1, 2, 2, 3, 3], &[0, 0, 1, 1, 1, 1]).unwrap(), 1.0);
    }
}

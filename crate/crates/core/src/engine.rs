//! Mean-shift iterations: single trajectories, modal clustering of a whole
//! sample with mode merging and outlier flags, and the blurring variant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::function_space::{distance, Curve, FunctionalSample};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig<T> {
    pub max_iters: usize,
    /// Stop once `‖m(x)‖ ≤ ε`. `None` means `1e-6 ×` the largest pairwise distance.
    pub step_tolerance: Option<T>,
    /// Terminal points closer than `τ · min h` are merged.
    pub merge_radius_factor: T,
    /// Size of the perturbation used to check mode stability.
    /// `None` means `0.1 × min h`.
    pub perturbation_scale: Option<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for MeanShiftConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_tolerance: None,
            merge_radius_factor: T::lit(0.05),
            perturbation_scale: None,
            seed: 0,
        }
    }
}

impl<T: Scalar> MeanShiftConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if let Some(eps) = self.step_tolerance {
            if !(eps > T::zero()) {
                return Err(Error::InvalidConfig("step tolerance must be positive".into()));
            }
        }
        if !(self.merge_radius_factor > T::zero()) {
            return Err(Error::InvalidConfig("merge radius factor must be positive".into()));
        }
        if let Some(d) = self.perturbation_scale {
            if d < T::zero() {
                return Err(Error::InvalidConfig("perturbation scale must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Step tolerance actually used for `model`.
    pub fn tolerance_for(&self, model: &DensityModel<T>) -> T {
        self.step_tolerance.unwrap_or_else(|| {
            let eps = T::lit(1e-6) * model.max_pairwise();
            if eps > T::zero() {
                eps
            } else {
                T::epsilon()
            }
        })
    }

    pub fn merge_radius_for(&self, model: &DensityModel<T>) -> T {
        self.merge_radius_factor * model.bandwidth().min()
    }

    pub fn perturbation_for(&self, model: &DensityModel<T>) -> T {
        self.perturbation_scale
            .unwrap_or_else(|| T::lit(0.1) * model.bandwidth().min())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    /// Ascent finished but no mode index was attached yet.
    Unassigned,
    Mode(usize),
    /// Start lies outside every support ball: a trivial root, never clustered.
    OutsideSupport,
}

/// Iterates of one ascent, starting point first.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub iterates: Vec<Curve<T>>,
    pub converged: bool,
    pub destination: Destination,
    /// `‖m(x)‖` at the last evaluated point.
    pub final_shift: T,
    /// Number of mean-shift evaluations.
    pub evaluations: usize,
}

impl<T: Scalar> Trajectory<T> {
    pub fn start(&self) -> &Curve<T> {
        &self.iterates[0]
    }

    pub fn terminal(&self) -> &Curve<T> {
        self.iterates.last().expect("trajectory is never empty")
    }
}

/// Runs `x ← x + m(x)` from `x0` until `‖m(x)‖ ≤ ε` or `max_iters` updates.
/// On convergence the terminal iterate is the point whose shift met the
/// tolerance.
pub fn ascend<T: Scalar>(
    model: &DensityModel<T>,
    x0: &Curve<T>,
    cfg: &MeanShiftConfig<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let eps = cfg.tolerance_for(model);
    ascend_with(model, x0, cfg.max_iters, eps)
}

fn ascend_with<T: Scalar>(
    model: &DensityModel<T>,
    x0: &Curve<T>,
    max_iters: usize,
    eps: T,
) -> Result<Trajectory<T>> {
    let mut traj = Trajectory {
        iterates: vec![x0.clone()],
        converged: false,
        destination: Destination::Unassigned,
        final_shift: T::zero(),
        evaluations: 0,
    };
    let mut x = x0.clone();
    for _ in 0..=max_iters {
        let target = match model.shift_target(&x) {
            Ok(t) => t,
            Err(Error::OutsideSupport) => {
                traj.destination = Destination::OutsideSupport;
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        traj.evaluations += 1;
        let shift = model.hilbert_norm(&target.sub(&x)?)?;
        traj.final_shift = shift;
        if shift <= eps {
            traj.converged = true;
            break;
        }
        if traj.evaluations > max_iters {
            break;
        }
        x = target;
        traj.iterates.push(x.clone());
    }
    Ok(traj)
}

/// Merged fixed points of the mean-shift update and the cluster of every start.
#[derive(Debug, Clone)]
pub struct ModeSet<T> {
    pub modes: Vec<Curve<T>>,
    /// Mode index per start; `None` for starts outside every support ball.
    pub assignments: Vec<Option<usize>>,
    pub sizes: Vec<usize>,
    /// Cluster holds exactly one start (a potential outlier).
    pub atomic_flags: Vec<bool>,
    /// A perturbed restart from the mode returned to it.
    pub stability_flags: Vec<bool>,
    pub trajectories: Vec<Trajectory<T>>,
    pub merge_radius: T,
    pub step_tolerance: T,
}

impl<T: Scalar> ModeSet<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn nonatomic_count(&self) -> usize {
        self.atomic_flags.iter().filter(|&&a| !a).count()
    }

    /// Number of starts sitting in non-atomic clusters.
    pub fn nonatomic_members(&self) -> usize {
        self.sizes
            .iter()
            .zip(&self.atomic_flags)
            .filter(|(_, &a)| !a)
            .map(|(&s, _)| s)
            .sum()
    }

    pub fn members(&self, mode: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(mode))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Clusters the starts (the sample curves by default) by the mode their
/// trajectories reach.
pub fn cluster<T: Scalar>(
    model: &DensityModel<T>,
    cfg: &MeanShiftConfig<T>,
    starts: Option<&[Curve<T>]>,
) -> Result<ModeSet<T>> {
    cfg.validate()?;
    let eps = cfg.tolerance_for(model);
    let radius = cfg.merge_radius_for(model);
    let starts: Vec<&Curve<T>> = match starts {
        Some(s) => s.iter().collect(),
        None => model.sample().curves().iter().collect(),
    };
    let mut trajectories: Vec<Trajectory<T>> = starts
        .par_iter()
        .map(|x0| ascend_with(model, x0, cfg.max_iters, eps))
        .collect::<Result<_>>()?;

    let live: Vec<usize> = (0..trajectories.len())
        .filter(|&i| trajectories[i].destination != Destination::OutsideSupport)
        .collect();
    let spec = model.distance_spec();
    let mut uf = UnionFind::new(live.len());
    for a in 0..live.len() {
        for b in a + 1..live.len() {
            let d = distance(
                trajectories[live[a]].terminal(),
                trajectories[live[b]].terminal(),
                spec,
            )?;
            if d <= radius {
                uf.union(a, b);
            }
        }
    }

    // modes numbered by their lowest start index
    let mut root_to_mode = std::collections::HashMap::new();
    let mut assignments = vec![None; trajectories.len()];
    let mut reps: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (a, &i) in live.iter().enumerate() {
        let root = uf.find(a);
        let j = *root_to_mode.entry(root).or_insert_with(|| {
            reps.push(i);
            sizes.push(0);
            reps.len() - 1
        });
        sizes[j] += 1;
        assignments[i] = Some(j);
        let best = reps[j];
        if trajectories[i].final_shift < trajectories[best].final_shift {
            reps[j] = i;
        }
    }
    for (i, a) in assignments.iter().enumerate() {
        if let Some(j) = a {
            trajectories[i].destination = Destination::Mode(*j);
        }
    }
    let modes: Vec<Curve<T>> = reps
        .iter()
        .map(|&i| trajectories[i].terminal().clone())
        .collect();
    let atomic_flags = sizes.iter().map(|&s| s == 1).collect();

    let delta = cfg.perturbation_for(model);
    let stability_flags = modes
        .par_iter()
        .enumerate()
        .map(|(j, mode)| -> Result<bool> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let dir = random_unit_curve(model, mode, &mut rng)?;
            let start = mode.axpy(delta, &dir)?;
            let t = ascend_with(model, &start, cfg.max_iters, eps)?;
            if t.destination == Destination::OutsideSupport {
                return Ok(false);
            }
            Ok(distance(t.terminal(), mode, spec)? <= radius)
        })
        .collect::<Result<Vec<bool>>>()?;

    Ok(ModeSet {
        modes,
        assignments,
        sizes,
        atomic_flags,
        stability_flags,
        trajectories,
        merge_radius: radius,
        step_tolerance: eps,
    })
}

fn random_unit_curve<T: Scalar>(
    model: &DensityModel<T>,
    like: &Curve<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Curve<T>> {
    for _ in 0..16 {
        let values: Vec<T> = (0..like.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::lit(z)
            })
            .collect();
        let c = Curve::new(like.grid().clone(), values)?;
        let n = model.hilbert_norm(&c)?;
        if n > T::zero() {
            return Ok(c.scale(T::one() / n));
        }
    }
    Ok(Curve::zeros(like.grid().clone()))
}

/// One synchronous blurring update of every sample curve. The model is
/// left untouched.
pub fn blurring_pass<T: Scalar>(model: &DensityModel<T>) -> Result<FunctionalSample<T>> {
    let moved = model
        .sample()
        .curves()
        .par_iter()
        .map(|x| match model.shift_target(x) {
            Ok(t) => Ok(t),
            Err(Error::OutsideSupport) => Ok(x.clone()),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let out = FunctionalSample::new(moved, None)?;
    match model.sample().labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// `passes` blurring updates, re-estimating the density after each one.
pub fn blurring<T: Scalar>(model: &DensityModel<T>, passes: usize) -> Result<FunctionalSample<T>> {
    let mut current = model.clone();
    for _ in 0..passes {
        let next = blurring_pass(&current)?;
        current = current.rebuild(next, current.bandwidth().clone())?;
    }
    Ok(current.sample().clone())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so labels follow sample order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{BandwidthRule, Normalization};
    use crate::function_space::{DistanceSpec, Grid};
    use crate::kernels::builtin_pair;
    use std::sync::Arc;

    fn grid() -> Arc<Grid<f64>> {
        Arc::new(Grid::uniform(0.0, 1.0, 41).unwrap())
    }

    fn shifted(g: &Arc<Grid<f64>>, c: f64) -> Curve<f64> {
        Curve::from_fn(g.clone(), move |t| (3.0 * t).sin() + c).unwrap()
    }

    fn model(curves: Vec<Curve<f64>>, kernel: &str, h: f64) -> DensityModel<f64> {
        DensityModel::new(
            FunctionalSample::new(curves, None).unwrap(),
            builtin_pair(kernel).unwrap(),
            DistanceSpec::l2(),
            BandwidthRule::Fixed(h),
        )
        .unwrap()
        .with_normalization(Normalization::Numerator)
    }

    #[test]
    fn single_datum_converges_immediately() {
        let g = grid();
        let x = shifted(&g, 0.0);
        let m = model(vec![x.clone()], "gaussian_gaussian", 1.0);
        let t = ascend(&m, &x, &MeanShiftConfig::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.evaluations, 1);
        assert_eq!(t.terminal().values(), x.values());
    }

    #[test]
    fn symmetric_pair_meets_in_the_middle() {
        let g = grid();
        let a = shifted(&g, -0.5);
        let b = shifted(&g, 0.5);
        let m = model(vec![a.clone(), b.clone()], "uniform_epanechnikov", 2.0);
        let mid = shifted(&g, 0.0);
        for s in [&a, &b] {
            let t = ascend(&m, s, &MeanShiftConfig::default()).unwrap();
            assert!(t.converged);
            let d = distance(t.terminal(), &mid, &DistanceSpec::l2()).unwrap();
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn far_start_is_outside_support() {
        let g = grid();
        let m = model(vec![shifted(&g, 0.0)], "gaussian_gaussian", 1.0);
        let t = ascend(&m, &shifted(&g, 10.0), &MeanShiftConfig::default()).unwrap();
        assert_eq!(t.destination, Destination::OutsideSupport);
        assert_eq!(t.iterates.len(), 1);
        assert!(!t.converged);
    }

    #[test]
    fn identical_curves_form_one_cluster() {
        let g = grid();
        let x = shifted(&g, 0.3);
        let m = model(vec![x.clone(); 4], "gaussian_gaussian", 0.5);
        let ms = cluster(&m, &MeanShiftConfig::default(), None).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.assignments, vec![Some(0); 4]);
        assert_eq!(ms.atomic_flags, vec![false]);
        assert_eq!(ms.modes[0].values(), x.values());
    }

    #[test]
    fn separated_bundles_and_an_outlier() {
        let g = grid();
        let mut curves = Vec::new();
        for i in 0..5 {
            curves.push(shifted(&g, 0.01 * i as f64));
        }
        for i in 0..5 {
            curves.push(shifted(&g, 5.0 + 0.01 * i as f64));
        }
        curves.push(shifted(&g, 20.0));
        for kernel in ["uniform_epanechnikov", "gaussian_gaussian"] {
            let m = model(curves.clone(), kernel, 0.5);
            let ms = cluster(&m, &MeanShiftConfig::default(), None).unwrap();
            assert_eq!(ms.len(), 3, "{kernel}");
            assert_eq!(&ms.assignments[..5], &[Some(0); 5]);
            assert_eq!(&ms.assignments[5..10], &[Some(1); 5]);
            assert_eq!(ms.assignments[10], Some(2));
            assert_eq!(ms.atomic_flags, vec![false, false, true]);
            assert!(ms.stability_flags.iter().all(|&s| s));
            assert_eq!(ms.nonatomic_count(), 2);
            assert_eq!(ms.nonatomic_members(), 10);
        }
    }

    #[test]
    fn custom_starts_outside_support_stay_unclustered() {
        let g = grid();
        let m = model(vec![shifted(&g, 0.0), shifted(&g, 0.1)], "gaussian_gaussian", 0.5);
        let starts = vec![shifted(&g, 0.05), shifted(&g, 9.0)];
        let ms = cluster(&m, &MeanShiftConfig::default(), Some(&starts)).unwrap();
        assert_eq!(ms.assignments, vec![Some(0), None]);
        assert_eq!(ms.trajectories[1].destination, Destination::OutsideSupport);
    }

    #[test]
    fn blurring_moves_visible_pairs_only() {
        let g = grid();
        let same = model(vec![shifted(&g, 1.0); 3], "uniform_epanechnikov", 1.0);
        let out = blurring_pass(&same).unwrap();
        for c in out.curves() {
            assert!(distance(c, &shifted(&g, 1.0), &DistanceSpec::l2()).unwrap() < 1e-12);
        }

        let pair = model(vec![shifted(&g, 0.0), shifted(&g, 1.0)], "uniform_epanechnikov", 2.0);
        let out = blurring_pass(&pair).unwrap();
        let mid = shifted(&g, 0.5);
        for c in out.curves() {
            assert!(distance(c, &mid, &DistanceSpec::l2()).unwrap() < 1e-12);
        }
        // the model's own sample is untouched
        assert_eq!(pair.sample().curve(0).values(), shifted(&g, 0.0).values());

        let apart = model(vec![shifted(&g, 0.0), shifted(&g, 3.0)], "uniform_epanechnikov", 1.0);
        let out = blurring(&apart, 3).unwrap();
        assert_eq!(out.curve(1).values(), shifted(&g, 3.0).values());
    }

    #[test]
    fn config_validation() {
        let bad = MeanShiftConfig::<f64> {
            max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MeanShiftConfig::<f64> {
            merge_radius_factor: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
